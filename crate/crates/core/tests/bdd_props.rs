use dualmatch::split::split_bdd;
use dualmatch::{Bdd, LinearRow};
use proptest::prelude::*;

/// (coefficients, rhs) with a planted solution, plus per-layer costs.
fn row_and_costs(max_vars: usize) -> impl Strategy<Value = (Vec<i64>, i64, Vec<f64>)> {
    (1..=max_vars).prop_flat_map(|n| {
        (
            prop::collection::vec(-3i64..=3, n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(-20i32..=20, n),
        )
            .prop_map(|(coeffs, planted, costs)| {
                let rhs = coeffs.iter().zip(&planted).filter(|(_, &b)| b).map(|(c, _)| c).sum();
                (coeffs, rhs, costs.into_iter().map(|c| c as f64 / 8.0).collect())
            })
    })
}

fn assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u32..(1 << n)).map(move |m| (0..n).map(|i| m >> i & 1 == 1).collect())
}

fn satisfied(coeffs: &[i64], rhs: i64, x: &[bool]) -> bool {
    coeffs.iter().zip(x).filter(|(_, &b)| b).map(|(c, _)| c).sum::<i64>() == rhs
}

fn brute_min(coeffs: &[i64], rhs: i64, costs: &[f64], fix: Option<(usize, bool)>) -> Option<f64> {
    assignments(coeffs.len())
        .filter(|x| satisfied(coeffs, rhs, x))
        .filter(|x| fix.is_none_or(|(l, b)| x[l] == b))
        .map(|x| costs.iter().zip(&x).filter(|(_, &b)| b).map(|(c, _)| c).sum::<f64>())
        .reduce(f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn accepted_set_and_minimum((coeffs, rhs, costs) in row_and_costs(10)) {
        let vars: Vec<usize> = (0..coeffs.len()).collect();
        let bdd = Bdd::equality(&coeffs, rhs, &vars).unwrap();
        let mut count = 0u128;
        for x in assignments(coeffs.len()) {
            let sat = satisfied(&coeffs, rhs, &x);
            prop_assert_eq!(bdd.accepts(&x), sat);
            count += sat as u128;
        }
        prop_assert_eq!(bdd.count_accepting_paths(), count);

        let best = brute_min(&coeffs, rhs, &costs, None).unwrap();
        prop_assert!((bdd.min_value(&costs) - best).abs() < 1e-12);
        let (value, x) = bdd.min_assignment(&costs);
        prop_assert!((value - best).abs() < 1e-12);
        prop_assert!(bdd.accepts(&x));
    }

    #[test]
    fn min_marginals_match_brute_force((coeffs, rhs, costs) in row_and_costs(9)) {
        let vars: Vec<usize> = (0..coeffs.len()).collect();
        let bdd = Bdd::equality(&coeffs, rhs, &vars).unwrap();
        let best = bdd.min_value(&costs);
        for (l, mm) in bdd.min_marginals(&costs).iter().enumerate() {
            let m0 = brute_min(&coeffs, rhs, &costs, Some((l, false)));
            let m1 = brute_min(&coeffs, rhs, &costs, Some((l, true)));
            prop_assert_eq!(mm.m0.is_some(), m0.is_some());
            prop_assert_eq!(mm.m1.is_some(), m1.is_some());
            if let (Some(a), Some(b)) = (mm.m0, m0) { prop_assert!((a - b).abs() < 1e-12); }
            if let (Some(a), Some(b)) = (mm.m1, m1) { prop_assert!((a - b).abs() < 1e-12); }
            prop_assert!((mm.min() - best).abs() < 1e-12);
        }
    }

    #[test]
    fn reduction_is_idempotent((coeffs, rhs, _c) in row_and_costs(12)) {
        let vars: Vec<usize> = (0..coeffs.len()).map(|v| 3 * v + 1).collect();
        let bdd = Bdd::equality(&coeffs, rhs, &vars).unwrap();
        let again = Bdd::from_layers(bdd.variables().to_vec(), bdd.layers()).unwrap();
        prop_assert_eq!(again, bdd);
    }

    #[test]
    fn distances_are_consistent((coeffs, rhs, costs) in row_and_costs(12)) {
        let vars: Vec<usize> = (0..coeffs.len()).collect();
        let bdd = Bdd::equality(&coeffs, rhs, &vars).unwrap();
        let mut fwd = vec![0.0; bdd.num_nodes()];
        let mut bwd = vec![0.0; bdd.num_nodes()];
        bdd.forward_distances(&costs, &mut fwd);
        bdd.backward_distances(&costs, &mut bwd);
        let best = bdd.min_value(&costs);
        prop_assert!((bwd[0] - best).abs() < 1e-12);
        // every layer is a cut of the diagram
        for l in 0..bdd.num_layers() {
            let off = bdd.layer_offset(l);
            let through = (0..bdd.layer(l).len())
                .map(|k| fwd[off + k] + bwd[off + k])
                .fold(f64::INFINITY, f64::min);
            prop_assert!((through - best).abs() < 1e-9);
        }
    }

    #[test]
    fn split_preserves_accepted_set_and_minimum(
        (coeffs, rhs, costs) in row_and_costs(9),
        cut_seed in any::<usize>(),
    ) {
        let n = coeffs.len();
        prop_assume!(n >= 2);
        let vars: Vec<usize> = (0..n).collect();
        let bdd = Bdd::equality(&coeffs, rhs, &vars).unwrap();
        let cut = 1 + cut_seed % (n - 1);
        let mut next = n;
        let s = split_bdd(&bdd, cut, &mut next).unwrap();
        let k = s.aux_ids.len();
        let total = n + k;
        prop_assume!(total <= 20);
        let mut projected = std::collections::BTreeMap::new();
        let mut joint_min = f64::INFINITY;
        for m in 0u32..(1 << total) {
            let x: Vec<bool> = (0..total).map(|i| m >> i & 1 == 1).collect();
            let pick = |b: &Bdd| -> Vec<bool> { b.variables().iter().map(|&v| x[v]).collect() };
            if s.left.accepts(&pick(&s.left)) && s.right.accepts(&pick(&s.right)) {
                *projected.entry(x[..n].to_vec()).or_insert(0) += 1;
                let c: f64 = (0..n).filter(|&v| x[v]).map(|v| costs[v]).sum();
                joint_min = joint_min.min(c);
            }
        }
        let original: Vec<Vec<bool>> = assignments(n).filter(|x| satisfied(&coeffs, rhs, x)).collect();
        prop_assert_eq!(projected.len(), original.len());
        for x in &original {
            prop_assert_eq!(projected.get(x), Some(&1));
        }
        prop_assert!((joint_min - bdd.min_value(&costs)).abs() < 1e-12);
    }
}

#[test]
fn linear_row_compiles_to_same_set() {
    let row = LinearRow::new(vec![(4, 1), (1, -2), (7, 1)], -1);
    let bdd = row.compile().unwrap();
    assert_eq!(bdd.variables(), &[1, 4, 7]);
    for x in assignments(3) {
        let mut full = vec![false; 8];
        for (i, &v) in [1usize, 4, 7].iter().enumerate() {
            full[v] = x[i];
        }
        assert_eq!(bdd.accepts(&x), row.is_satisfied(&full));
    }
}
