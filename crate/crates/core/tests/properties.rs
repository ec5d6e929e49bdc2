use proptest::prelude::*;

use maxdist::covmodel::{build_model, compute_ap, compute_bp, compute_rhop, ToeplitzSpec};
use maxdist::extremestat::{
    limit_cdf, limit_quantile, max_interpoint_sq, max_interpoint_sq_naive, max_interpoint_sq_with, KernelOptions,
    Normalization, PairIndex,
};
use maxdist::inference::{power_beta, q_alpha, t2n, threshold};
use maxdist::sampling::DataMatrix;

fn data(max_n: usize, max_p: usize) -> impl Strategy<Value = DataMatrix> {
    (2..=max_n, 1..=max_p).prop_flat_map(|(n, p)| {
        prop::collection::vec(-10.0f64..10.0, n * p).prop_map(move |v| DataMatrix::new(n, p, v).unwrap())
    })
}

fn grid_data(max_n: usize, max_p: usize) -> impl Strategy<Value = DataMatrix> {
    (2..=max_n, 1..=max_p).prop_flat_map(|(n, p)| {
        prop::collection::vec(-500i32..500, n * p)
            .prop_map(move |v| DataMatrix::new(n, p, v.into_iter().map(f64::from).collect()).unwrap())
    })
}

fn ar1() -> impl Strategy<Value = ToeplitzSpec> {
    (0.0f64..0.95, 1usize..40).prop_map(|(r, p)| ToeplitzSpec::ar1(r, p).unwrap())
}

fn shuffled(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ap_of_identity_is_eight(p in 1usize..500) {
        prop_assert_eq!(compute_ap(&ToeplitzSpec::identity(p).unwrap()).unwrap(), 8.0);
    }

    #[test]
    fn bp_at_gaussian_kurtosis_is_ap(spec in ar1()) {
        let bp = compute_bp(&build_model(&spec).unwrap(), 3.0).unwrap();
        let ap = compute_ap(&spec).unwrap();
        prop_assert!((bp - ap).abs() <= 1e-9 * ap);
    }

    #[test]
    fn hadamard_norms_ordered(spec in ar1()) {
        let (n1, n2) = build_model(&spec).unwrap().hadamard_norms();
        prop_assert!(n1 >= n2 - 1e-9 * n1);
        prop_assert!(2.0 * n1 / spec.p as f64 >= 2.0 - 1e-12);
        if spec.correlation(1) != 0.0 && spec.p > 1 {
            prop_assert!(2.0 * n1 / spec.p as f64 > 2.0);
        }
    }

    #[test]
    fn rhop_bounded(spec in ar1(), kappa4 in 1.0f64..5.0) {
        let rho = compute_rhop(&build_model(&spec).unwrap(), kappa4).unwrap();
        prop_assert!(rho <= 1.0 / 3.0 + 1e-12);
        prop_assert!(rho >= 0.0);
    }

    #[test]
    fn root_squares_to_r(spec in ar1()) {
        let m = build_model(&spec).unwrap();
        let err = (m.t() * m.t() - m.r()).abs().max();
        prop_assert!(err < 1e-10, "max entry error {err}");
    }

    #[test]
    fn gram_kernel_matches_naive(x in data(25, 40), block in 1usize..9, parallel in any::<bool>()) {
        let fast = max_interpoint_sq_with(&x, KernelOptions { block, parallel }).unwrap();
        let slow = max_interpoint_sq_naive(&x).unwrap();
        prop_assert!((fast.value - slow.value).abs() <= 1e-9 * slow.value.max(1e-300));
    }

    #[test]
    fn translation_exact_on_integer_data(x in grid_data(20, 30), c in -1000i32..1000) {
        let shift = vec![f64::from(c); x.p()];
        let a = max_interpoint_sq(&x).unwrap();
        let b = max_interpoint_sq(&x.translate(&shift).unwrap()).unwrap();
        prop_assert_eq!(a.value, b.value);
    }

    #[test]
    fn permutation_exact(
        (x, order) in data(20, 30).prop_flat_map(|x| { let n = x.n(); (Just(x), shuffled(n)) })
    ) {
        let a = max_interpoint_sq(&x).unwrap().value;
        let b = max_interpoint_sq(&x.permute_rows(&order).unwrap()).unwrap().value;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn appending_duplicate_keeps_value((x, i) in data(15, 20).prop_flat_map(|x| { let n = x.n(); (Just(x), 0..n) })) {
        let before = max_interpoint_sq(&x).unwrap().value;
        let mut y = x.clone();
        y.push_row(x.row(i)).unwrap();
        prop_assert_eq!(max_interpoint_sq(&y).unwrap().value, before);
    }

    #[test]
    fn appending_far_point_increases(x in data(15, 20), dir in prop::collection::vec(-1.0f64..1.0, 20)) {
        let before = max_interpoint_sq(&x).unwrap().value;
        let max_norm = x.rows().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let d = &dir[..x.p()];
        let len = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        let far: Vec<f64> = d.iter().map(|v| 10.0 * max_norm.max(1.0) * v / len).collect();
        let mut y = x.clone();
        y.push_row(&far).unwrap();
        prop_assert!(max_interpoint_sq(&y).unwrap().value > before);
    }

    #[test]
    fn appending_rows_never_decreases(x in data(15, 20), row in prop::collection::vec(-10.0f64..10.0, 20)) {
        // recentering on a new midrange moves values by rounding only
        let before = max_interpoint_sq(&x).unwrap().value;
        let mut y = x.clone();
        y.push_row(&row[..x.p()]).unwrap();
        prop_assert!(max_interpoint_sq(&y).unwrap().value >= before * (1.0 - 1e-12));
    }

    #[test]
    fn t2n_permutation_invariant(
        (x, order) in data(14, 12)
            .prop_filter("n >= 4", |x| x.n() >= 4)
            .prop_flat_map(|x| { let n = x.n(); (Just(x), shuffled(n)) })
    ) {
        let a = t2n(&x).unwrap();
        let b = t2n(&x.permute_rows(&order).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn quantile_round_trip(q in 1e-6f64..(1.0 - 1e-6)) {
        let x = limit_quantile(q).unwrap();
        prop_assert!((limit_cdf(x) - q).abs() <= 1e-12);
    }

    #[test]
    fn standardize_round_trip(n in 3usize..10_000, p in 1usize..10_000, scale in 1.0f64..50.0, m in 0.0f64..1e5) {
        let norm = Normalization::new(n, p, scale).unwrap();
        let back = norm.destandardize(norm.standardize(m));
        prop_assert!((back - m).abs() <= 1e-9 * m.max(1.0));
    }

    #[test]
    fn threshold_monotone_in_alpha(n in 3usize..500, p in 1usize..5000, a in 0.001f64..0.5) {
        let strict = threshold(n, p, a / 2.0, 8.0).unwrap();
        let loose = threshold(n, p, a, 8.0).unwrap();
        prop_assert!(strict > loose);
        prop_assert!(q_alpha(a / 2.0).unwrap() > q_alpha(a).unwrap());
    }

    #[test]
    fn pair_index_bijective(n in 2usize..60) {
        let h = PairIndex::new(n);
        for (l, (i, j)) in h.iter().enumerate() {
            prop_assert!(i < j);
            prop_assert_eq!(h.index(i, j), Some(l));
            prop_assert_eq!(h.pair(l), Some((i, j)));
        }
        prop_assert_eq!(h.len(), n * (n - 1) / 2);
    }

    #[test]
    fn csv_round_trip_bitwise(x in data(10, 10)) {
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        prop_assert_eq!(DataMatrix::read_csv(buf.as_slice()).unwrap(), x);
    }
}

#[test]
fn power_grows_with_ap() {
    for n in [20, 50, 200] {
        for alpha in [0.01, 0.05] {
            let betas: Vec<(f64, f64)> = [0.0, 0.2, 0.4, 0.6, 0.8]
                .iter()
                .map(|&r| {
                    let pt = power_beta(&ToeplitzSpec::ar1(r, 2000).unwrap(), n, alpha).unwrap();
                    (pt.ap, pt.beta)
                })
                .collect();
            assert!(betas.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1), "{betas:?}");
        }
    }
}
