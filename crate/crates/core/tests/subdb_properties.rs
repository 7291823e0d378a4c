use std::collections::{HashSet, VecDeque};
use std::sync::OnceLock;

use ddm::grid::seeded_rng;
use ddm::subdb::{
    apply_group_action, random_instance, transport, BuildOptions, GroupAction, Shape, SmallConfig,
    SolutionDatabase,
};
use proptest::prelude::*;

/// Joint-state BFS over raw cell ids (row-major, three columns).
fn brute_force_makespan(rows: u8, start: &[u8], goal: &[u8]) -> usize {
    let cells = 3 * rows;
    let adjacent = |a: u8, b: u8| {
        let (ax, ay, bx, by) = (a % 3, a / 3, b % 3, b / 3);
        ax.abs_diff(bx) + ay.abs_diff(by) == 1
    };
    fn expand(
        k: usize,
        cur: &[u8],
        next: &mut Vec<u8>,
        cells: u8,
        adjacent: &dyn Fn(u8, u8) -> bool,
        out: &mut Vec<Vec<u8>>,
    ) {
        if k == cur.len() {
            let swap = (0..cur.len()).any(|a| {
                (0..cur.len())
                    .any(|b| a != b && next[a] == cur[b] && next[b] == cur[a] && cur[a] != next[a])
            });
            if !swap {
                out.push(next.clone());
            }
            return;
        }
        for c in 0..cells {
            if (c == cur[k] || adjacent(c, cur[k])) && !next.contains(&c) {
                next.push(c);
                expand(k + 1, cur, next, cells, adjacent, out);
                next.pop();
            }
        }
    }
    let mut seen: HashSet<Vec<u8>> = HashSet::from([start.to_vec()]);
    let mut queue = VecDeque::from([(start.to_vec(), 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        if s == goal {
            return d;
        }
        let mut out = Vec::new();
        expand(0, &s, &mut Vec::new(), cells, &adjacent, &mut out);
        for t in out {
            if seen.insert(t.clone()) {
                queue.push_back((t, d + 1));
            }
        }
    }
    panic!("goal unreachable");
}

fn two_by_three() -> &'static SolutionDatabase {
    static DB: OnceLock<SolutionDatabase> = OnceLock::new();
    DB.get_or_init(|| SolutionDatabase::build(Shape::TwoByThree, &BuildOptions::full(6)).unwrap())
}

fn three_by_three() -> &'static SolutionDatabase {
    static DB: OnceLock<SolutionDatabase> = OnceLock::new();
    DB.get_or_init(|| SolutionDatabase::build(Shape::ThreeByThree, &BuildOptions::lazy()).unwrap())
}

fn action() -> impl Strategy<Value = GroupAction> {
    (any::<bool>(), 0u8..4).prop_map(|(flip, rot)| GroupAction { flip, rot })
}

fn instance(shape: Shape, max_n: usize) -> impl Strategy<Value = (SmallConfig, SmallConfig)> {
    (1..=max_n, any::<u64>())
        .prop_map(move |(n, seed)| random_instance(shape, n, &mut seeded_rng(seed, 0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_actions_form_the_dihedral_group(a in action(), b in action(), c in action(), id in 0u8..9) {
        let shape = Shape::ThreeByThree;
        prop_assert_eq!(a.compose(b).compose(c), a.compose(b.compose(c)));
        prop_assert_eq!(a.compose(a.inverse()), GroupAction::IDENTITY);
        let via = a.apply_cell(shape, b.apply_cell(shape, id).unwrap()).unwrap();
        prop_assert_eq!(a.compose(b).apply_cell(shape, id).unwrap(), via);
        let back = a.inverse().apply_cell(shape, a.apply_cell(shape, id).unwrap()).unwrap();
        prop_assert_eq!(back, id);
    }

    #[test]
    fn transported_solutions_stay_optimal((xi, xg) in instance(Shape::ThreeByThree, 5), a in action()) {
        let shape = Shape::ThreeByThree;
        let sol = three_by_three().lookup(&xi, &xg).unwrap();
        let moved = transport(shape, a, &sol).unwrap();
        prop_assert!(moved.is_valid(shape));
        prop_assert_eq!(moved.start(), apply_group_action(a, &xi, shape).unwrap());
        prop_assert_eq!(moved.end(), apply_group_action(a, &xg, shape).unwrap());
        let direct = three_by_three().lookup(&moved.start(), &moved.end()).unwrap();
        prop_assert_eq!(direct.makespan(), sol.makespan());
        let rev = sol.reversed();
        prop_assert!(rev.is_valid(shape));
        prop_assert_eq!(three_by_three().lookup(&xg, &xi).unwrap().makespan(), rev.makespan());
    }

    #[test]
    fn two_by_three_lookups_are_optimal((xi, xg) in instance(Shape::TwoByThree, 6)) {
        let sol = two_by_three().lookup(&xi, &xg).unwrap();
        prop_assert!(sol.is_valid(Shape::TwoByThree));
        prop_assert_eq!(sol.start(), xi);
        prop_assert_eq!(sol.end(), xg);
        prop_assert_eq!(sol.makespan(), brute_force_makespan(2, xi.as_slice(), xg.as_slice()));
    }

    #[test]
    fn three_by_three_lookups_are_optimal((xi, xg) in instance(Shape::ThreeByThree, 4)) {
        let sol = three_by_three().lookup(&xi, &xg).unwrap();
        prop_assert!(sol.is_valid(Shape::ThreeByThree));
        prop_assert_eq!(sol.makespan(), brute_force_makespan(3, xi.as_slice(), xg.as_slice()));
    }
}

#[test]
fn two_by_three_rejects_quarter_turns() {
    let c = SmallConfig::new(&[0, 4]).unwrap();
    assert!(apply_group_action(GroupAction::R, &c, Shape::TwoByThree).is_err());
    assert!(apply_group_action(GroupAction { flip: true, rot: 2 }, &c, Shape::TwoByThree).is_ok());
}
