use omgs_stats::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn bonferroni_never_below_raw(p in prop::collection::vec(0.0f64..=1.0, 1..20), extra in 0usize..5) {
        let m = p.len() + extra;
        let adj = bonferroni(&p, m).unwrap();
        for (a, r) in adj.iter().zip(&p) {
            prop_assert!(*a >= *r && *a <= 1.0);
        }
    }

    #[test]
    fn bh_adjusted_monotone_in_sorted_order(p in prop::collection::vec(0.0f64..=1.0, 1..30), q in 0.01f64..0.2) {
        let r = benjamini_hochberg(&p, q).unwrap();
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
        for w in idx.windows(2) {
            prop_assert!(r.adjusted[w[0]] <= r.adjusted[w[1]]);
        }
        for i in 0..p.len() {
            prop_assert_eq!(r.rejected[i], r.adjusted[i] <= q);
            prop_assert!(r.adjusted[i] >= p[i]);
        }
    }

    #[test]
    fn tests_invariant_under_reordering(
        d in prop::collection::vec(-5i32..=5, 2..14),
        rot in 0usize..14,
    ) {
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        let mut e = d.clone();
        e.rotate_left(rot % d.len());
        e.reverse();
        let a = wilcoxon_signed_rank(&PairedSample::from_diffs(&d).unwrap(), WilcoxonMode::Auto);
        let b = wilcoxon_signed_rank(&PairedSample::from_diffs(&e).unwrap(), WilcoxonMode::Auto);
        prop_assert_eq!(a, b);
        let a = median_iqr(&d).unwrap();
        let b = median_iqr(&e).unwrap();
        prop_assert_eq!(a, b);
        let ta = tost_equivalence(&d, 0.5, 0.025);
        let tb = tost_equivalence(&e, 0.5, 0.025);
        if let (Ok(ta), Ok(tb)) = (ta, tb) {
            prop_assert_eq!(ta.equivalent, tb.equivalent);
            prop_assert!((ta.mean_diff - tb.mean_diff).abs() < 1e-12);
        }
    }

    #[test]
    fn p_values_in_unit_interval(d in prop::collection::vec(-20i32..=20, 1..30)) {
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        for mode in [WilcoxonMode::Exact, WilcoxonMode::Approx] {
            if let Ok(r) = wilcoxon_signed_rank(&PairedSample::from_diffs(&d).unwrap(), mode) {
                prop_assert!((0.0..=1.0).contains(&r.p_value));
            }
        }
    }

    #[test]
    fn spearman_bounded_and_symmetric(
        xy in prop::collection::vec((0i32..10, 0i32..10), 2..25),
    ) {
        let x: Vec<f64> = xy.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = xy.iter().map(|p| p.1 as f64).collect();
        match (spearman_rho(&x, &y), spearman_rho(&y, &x)) {
            (Ok(a), Ok(b)) => {
                prop_assert!((-1.0..=1.0).contains(&a));
                prop_assert!((a - b).abs() < 1e-12);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            _ => prop_assert!(false),
        }
    }
}
