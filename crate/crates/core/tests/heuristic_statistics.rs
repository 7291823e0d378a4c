use std::collections::HashMap;

use ddm::bench::occupancy_heatmap;
use ddm::grid::{seeded_rng, GridGraph, Vertex};
use ddm::heuristics::{random_shortest_path, single_turn_path, HeuristicKind, TurnMode};

const SAMPLES: usize = 100_000;

#[test]
fn random_paths_cover_orderings_uniformly() {
    let g = GridGraph::free(3, 3).unwrap();
    let mut rng = seeded_rng(11, 0);
    let mut freq: HashMap<Vec<Vertex>, usize> = HashMap::new();
    for _ in 0..SAMPLES {
        let p = random_shortest_path(&g, Vertex::new(1, 1), Vertex::new(3, 3), &mut rng).unwrap();
        *freq.entry(p.into_inner()).or_default() += 1;
    }
    // 4 moves, 2 of them east: C(4, 2) orderings
    assert_eq!(freq.len(), 6);
    let mut chi2 = 0.0;
    let expected = SAMPLES as f64 / 6.0;
    for &count in freq.values() {
        let share = count as f64 / SAMPLES as f64;
        assert!((share - 1.0 / 6.0).abs() < 0.01, "{share}");
        chi2 += (count as f64 - expected).powi(2) / expected;
    }
    // 5 degrees of freedom, p = 0.001
    assert!(chi2 < 20.52, "{chi2}");
}

#[test]
fn mixed_turns_pick_far_at_the_requested_rate() {
    let g = GridGraph::free(48, 27).unwrap();
    let (s, t) = (Vertex::new(1, 1), Vertex::new(10, 10));
    let far_corner = Vertex::new(1, 10);
    let mut rng = seeded_rng(12, 0);
    let far = (0..SAMPLES)
        .filter(|_| {
            single_turn_path(&g, s, t, TurnMode::Mixed(0.85), &mut rng).unwrap()[9] == far_corner
        })
        .count();
    let share = far as f64 / SAMPLES as f64;
    assert!((share - 0.85).abs() < 0.01, "{share}");
}

#[test]
fn random_paths_congest_the_center() {
    let g = GridGraph::free(48, 27).unwrap();
    let random = occupancy_heatmap(&g, SAMPLES, HeuristicKind::Random, 1).unwrap();
    let far = occupancy_heatmap(&g, SAMPLES, HeuristicKind::SingleTurnFar, 1).unwrap();
    let mixed = occupancy_heatmap(&g, SAMPLES, HeuristicKind::SingleTurnMixed(0.85), 1).unwrap();
    assert!(random.center_mean() > random.border_mean());
    assert!(far.center_mean() < random.center_mean());
    let (lo, hi) = (far.center_mean(), random.center_mean());
    assert!(lo < mixed.center_mean() && mixed.center_mean() < hi);
}
