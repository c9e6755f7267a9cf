use hausdorff_lab::cli::RunConfig;
use hausdorff_lab::conformal::ConformalMeasure;
use hausdorff_lab::density::{density_ratio, entropy_partition, Family};
use hausdorff_lab::dimension::{moran_dimension, moran_sum};
use hausdorff_lab::ifs::{
    apply_word, block_image, branch_derivative_abs, cf_encode, cylinder_interval, decompose_prefix,
    word_derivative_abs, SystemKind, Word,
};
use hausdorff_lab::scalar::{rational_from_f64, Rational, Scalar};
use hausdorff_lab::spectral::{spectral_data, CollocationGrid, Truncation};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = SystemKind> {
    prop_oneof![Just(SystemKind::LinearGauss), Just(SystemKind::Gauss)]
}

fn word(n: u64, max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(1..=n, 0..=max_len).prop_map(|s| Word::new(s).unwrap())
}

fn q(x: f64) -> Rational {
    rational_from_f64(x).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn children_abut_and_fill_parent_image(
        k in kind(),
        (n, parent) in (1u64..=8).prop_flat_map(|n| (Just(n), word(n, 3))),
    ) {
        let mut kids: Vec<_> = (1..=n)
            .map(|j| cylinder_interval::<Rational>(k, &parent.child(j).unwrap()))
            .collect();
        kids.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
        for p in kids.windows(2) {
            prop_assert_eq!(&p[0].hi, &p[1].lo);
        }
        let a = apply_word(k, &parent, &Rational::from_ratio(1, n as i64 + 1)).unwrap();
        let b = apply_word(k, &parent, &Rational::from_u64(1)).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert_eq!(&kids[0].lo, &lo);
        prop_assert_eq!(&kids[kids.len() - 1].hi, &hi);
    }

    #[test]
    fn cylinders_nest(
        k in kind(),
        (head, tail) in (2u64..500).prop_flat_map(|n| (word(n, 6), word(n, 3))),
    ) {
        let outer = cylinder_interval::<Rational>(k, &head);
        let inner = cylinder_interval::<Rational>(k, &head.concat(&tail));
        prop_assert!(outer.contains_interval(&inner));
    }

    #[test]
    fn chain_rule(k in kind(), w in word(50, 8), x in 0.0f64..=1.0) {
        let whole = word_derivative_abs(k, &w, &x).unwrap();
        let mut y = x;
        let mut product = 1.0;
        for &s in w.symbols().iter().rev() {
            product *= branch_derivative_abs(k, s, &y).unwrap();
            y = apply_word(k, &Word::new(vec![s]).unwrap(), &y).unwrap();
        }
        prop_assert!(((whole - product) / product).abs() < 1e-13);
    }

    #[test]
    fn linear_slope_is_product_of_ratios(w in word(1000, 6), x in 0.0f64..=1.0) {
        let slope = word_derivative_abs(SystemKind::LinearGauss, &w, &q(x)).unwrap();
        let expected = w.symbols().iter().fold(Rational::from_u64(1), |acc, &k| {
            acc * Rational::from_ratio(1, (k * (k + 1)) as i64)
        });
        prop_assert_eq!(slope, expected);
    }

    #[test]
    fn prefix_weights_halve(r in 1e-12f64..1.0) {
        let d = decompose_prefix(SystemKind::LinearGauss, &q(r), 24).unwrap();
        let w = d.weights();
        for m in (2..=w.len()).step_by(2) {
            prop_assert!(w[m - 1] <= w[m - 2] + 1e-15);
        }
        for m in (1..=w.len()).step_by(2).filter(|m| m + 2 <= w.len()) {
            prop_assert!(w[m + 1] <= w[m - 1] / 4.0 + 1e-15);
        }
        // pieces tile [0, r] in order
        let total: Rational = d.pieces.iter().map(|p| p.hi.clone() - p.lo.clone()).sum();
        if d.is_complete() {
            prop_assert_eq!(total, q(r));
        } else {
            prop_assert!(total < q(r));
        }
    }

    #[test]
    fn coding_round_trip(k in kind(), x in 1e-6f64..1.0, depth in 1usize..=12) {
        let x = q(x);
        let c = cf_encode(k, &x, depth).unwrap();
        prop_assert!(c.word.len() <= depth);
        if !c.word.is_empty() {
            prop_assert!(cylinder_interval::<Rational>(k, &c.word).contains(&x));
        }
    }

    #[test]
    fn moran_root_is_increasing(n in 2u64..20_000) {
        let a = moran_dimension(n, 1e-13).unwrap();
        let b = moran_dimension(n + 1, 1e-13).unwrap();
        prop_assert!(a.h < b.h && b.h < 1.0);
        prop_assert!((moran_sum(n, a.h) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_decreases_in_t(t in 0.8f64..1.19, dt in 0.005f64..0.05, n in 2u64..300) {
        let grid = CollocationGrid::new(24).unwrap();
        let a = spectral_data(SystemKind::Gauss, t, Truncation::Finite(n), &grid).unwrap();
        let b = spectral_data(SystemKind::Gauss, t + dt, Truncation::Finite(n), &grid).unwrap();
        prop_assert!(b.lambda < a.lambda);
        prop_assert!(a.rho.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn linear_images_keep_block_ratio(
        (k, l) in (1u64..=6).prop_flat_map(|k| (Just(k), k..=6)),
        w in word(6, 3),
    ) {
        let h = moran_dimension(6, 1e-14).unwrap().h;
        let m = ConformalMeasure::linear(6, h).unwrap();
        let base = density_ratio(&m, &block_image::<Rational>(m.kind, &Word::empty(), k, l).unwrap(), 8).unwrap();
        let moved = density_ratio(&m, &block_image::<Rational>(m.kind, &w, k, l).unwrap(), 8).unwrap();
        prop_assert!((moved.upper / base.lower - 1.0).abs() < 1e-12);
        prop_assert!((moved.lower / base.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_sum_dominates_entropy(
        (k, l) in (1u64..500).prop_flat_map(|k| (Just(k), k..1000)),
        h in 0.3f64..0.9999,
    ) {
        let p = entropy_partition(k, l).unwrap();
        let lhs = (p.weights.iter().map(|w| w.powf(h)).sum::<f64>() - 1.0) / (1.0 - h);
        prop_assert!(lhs >= p.entropy - 1e-12);
        prop_assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn feasible_sequences_stay_below_s_alpha(
        alpha in 0.05f64..0.95,
        h in 0.05f64..0.95,
        shrink in prop::collection::vec(0.0f64..=1.0, 1..40),
    ) {
        let mut x = vec![1.0f64];
        for s in shrink {
            let next = x[x.len() - 1] * alpha * s;
            x.push(next);
        }
        let total: f64 = x.iter().sum();
        let value: f64 = x.iter().map(|v| (v / total).powf(h)).sum();
        let closed = (1.0 - alpha).powf(h) / (1.0 - alpha.powf(h));
        prop_assert!(value <= closed + 1e-9);
    }

    #[test]
    fn config_echo_round_trips(
        linear in any::<bool>(),
        n in prop::collection::vec(1u64..100_000, 1..5),
        grid in 16usize..200,
        seed in any::<u64>(),
        fams in prop::sample::subsequence(Family::ALL.to_vec(), 0..=4),
        eps in prop::collection::vec(0.01f64..0.99, 1..4),
        scale in 1e-3f64..1e3,
    ) {
        let mut c = RunConfig::default();
        let pairs = vec![
            ("kind".to_string(), if linear { "linear" } else { "gauss" }.to_string()),
            ("n".to_string(), n.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")),
            ("grid".to_string(), grid.to_string()),
            ("seed".to_string(), seed.to_string()),
            ("families".to_string(), fams.iter().map(|f| f.tag()).collect::<Vec<_>>().join(",")),
            ("eps".to_string(), eps.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")),
            ("tol_scale".to_string(), scale.to_string()),
        ];
        c.apply(&pairs).unwrap();
        let mut back = RunConfig::default();
        back.apply(&c.to_pairs()).unwrap();
        prop_assert_eq!(back, c);
    }
}
