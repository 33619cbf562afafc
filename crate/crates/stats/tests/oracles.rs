use omgs_stats::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_midranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided p by listing every one of the 2^n sign assignments.
fn enumeration_p(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|x| *x != 0.0).collect();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let r = naive_midranks(&abs);
    let observed: f64 = d.iter().zip(&r).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).sum();
        if w <= observed {
            le += 1;
        }
        if w >= observed {
            ge += 1;
        }
    }
    let total = 1u64 << n;
    ((2 * le.min(ge)).min(total)) as f64 / total as f64
}

#[test]
fn wilcoxon_exact_equals_sign_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.random_range(1..=10);
        // Small integer range forces zeros and ties.
        let diffs: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=4) as f64 / 2.0).collect();
        let sample = PairedSample::from_diffs(&diffs).unwrap();
        match wilcoxon_signed_rank(&sample, WilcoxonMode::Exact) {
            Err(StatsError::Degenerate) => assert!(diffs.iter().all(|d| *d == 0.0)),
            Ok(r) => {
                assert_eq!(r.p_value, enumeration_p(&diffs), "{diffs:?}");
                assert_eq!(r.method, Method::Exact);
                checked += 1;
            }
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn wilcoxon_normal_approximation_reference_values() {
    // Reference: tie-corrected normal approximation with continuity correction.
    let d = [1.5, -2.0, 3.0, 4.0, -0.5, 6.0, 7.0, 8.5, 9.0, 10.0, -11.0, 12.0, 13.0, 14.0, -15.0];
    let r = wilcoxon_signed_rank(&PairedSample::from_diffs(&d).unwrap(), WilcoxonMode::Auto).unwrap();
    assert_eq!(r.method, Method::NormalApprox);
    assert_eq!(r.statistic, 90.0);
    assert!((r.p_value - 0.09383863903410998).abs() < 1e-9, "{}", r.p_value);

    let d = [1.0, 2.0, 2.0, 3.0, -1.0, 4.0, 4.0, 5.0, 6.0, -2.0, 7.0, 8.0, 8.0, 9.0];
    let r = wilcoxon_signed_rank(&PairedSample::from_diffs(&d).unwrap(), WilcoxonMode::Approx).unwrap();
    assert!((r.p_value - 0.0034539558554017454).abs() < 1e-9);
}

#[test]
fn wilcoxon_exact_and_approx_agree_within_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let n = rng.random_range(8..=12);
        let mut mags: Vec<f64> = (1..=40).map(f64::from).collect();
        for i in (1..mags.len()).rev() {
            mags.swap(i, rng.random_range(0..=i));
        }
        let diffs: Vec<f64> = mags[..n].iter().map(|m| if rng.random_bool(0.5) { *m } else { -m }).collect();
        let s = PairedSample::from_diffs(&diffs).unwrap();
        let e = wilcoxon_signed_rank(&s, WilcoxonMode::Exact).unwrap().p_value;
        let a = wilcoxon_signed_rank(&s, WilcoxonMode::Approx).unwrap().p_value;
        assert!((e - a).abs() <= 0.05, "{diffs:?}: exact {e} approx {a}");
    }
}

fn binom(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Two-sided Fisher p from exact integer hypergeometric weights.
fn hypergeometric_p(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let (r1, c1, n) = (a + b, a + c, a + b + c + d);
    let weight = |x: u64| binom(c1, x) * binom(n - c1, r1 - x);
    let lo = r1.saturating_sub(n - c1);
    let hi = r1.min(c1);
    let obs = weight(a);
    let total: u128 = (lo..=hi).map(weight).sum();
    let tail: u128 = (lo..=hi).map(weight).filter(|w| *w <= obs).sum();
    tail as f64 / total as f64
}

#[test]
fn fisher_2x2_matches_hypergeometric_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let cells: Vec<u64> = (0..4).map(|_| rng.random_range(0..=15)).collect();
        if cells.iter().sum::<u64>() == 0 {
            continue;
        }
        let t = ContingencyTable::new(vec![vec![cells[0], cells[1]], vec![cells[2], cells[3]]]).unwrap();
        let r = contingency_test(&t, ContingencyMethod::FisherExact).unwrap();
        let oracle = hypergeometric_p(cells[0], cells[1], cells[2], cells[3]);
        assert!((r.p_value - oracle).abs() <= 1e-12, "{cells:?}: {} vs {oracle}", r.p_value);
    }
    let r = contingency_test(
        &ContingencyTable::new(vec![vec![10, 0], vec![0, 10]]).unwrap(),
        ContingencyMethod::FisherExact,
    )
    .unwrap();
    assert!((r.p_value - 2.0 / binom(20, 10) as f64).abs() < 1e-15);
    assert!((r.p_value - 1.0825e-5).abs() < 1e-8);
}

fn factorial(n: u64) -> u128 {
    (1..=n as u128).product()
}

/// Exact conditional p for an r x c table by listing each row as a bounded
/// composition; probabilities are integer multinomial ratios.
fn rxc_enumeration_p(table: &[Vec<u64>]) -> f64 {
    let rows: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let c = table[0].len();
    let cols: Vec<u64> = (0..c).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let n: u64 = rows.iter().sum();
    let multinomial = |total: u64, parts: &[u64]| factorial(total) / parts.iter().map(|&p| factorial(p)).product::<u128>();
    let weight = |t: &[Vec<u64>]| -> u128 { t.iter().zip(&rows).map(|(r, &s)| multinomial(s, r)).product() };

    fn compositions(total: u64, caps: &[u64]) -> Vec<Vec<u64>> {
        if caps.len() == 1 {
            return if total <= caps[0] { vec![vec![total]] } else { vec![] };
        }
        let mut out = Vec::new();
        for x in 0..=total.min(caps[0]) {
            for mut rest in compositions(total - x, &caps[1..]) {
                rest.insert(0, x);
                out.push(rest);
            }
        }
        out
    }
    let mut tables: Vec<Vec<Vec<u64>>> = vec![vec![]];
    for &r in &rows {
        let mut next = Vec::new();
        for t in &tables {
            let used: Vec<u64> = (0..c).map(|j| t.iter().map(|row: &Vec<u64>| row[j]).sum()).collect();
            let caps: Vec<u64> = (0..c).map(|j| cols[j] - used[j]).collect();
            for row in compositions(r, &caps) {
                let mut t2 = t.clone();
                t2.push(row);
                next.push(t2);
            }
        }
        tables = next;
    }
    let denom = multinomial(n, &cols);
    let obs = weight(table);
    let tail: u128 = tables.iter().map(|t| weight(t)).filter(|w| *w <= obs).sum();
    assert_eq!(tables.iter().map(|t| weight(t)).sum::<u128>(), denom);
    tail as f64 / denom as f64
}

fn small_tables() -> Vec<Vec<Vec<u64>>> {
    vec![
        vec![vec![3, 0, 1, 0], vec![0, 2, 0, 1], vec![1, 0, 0, 3]],
        vec![vec![2, 1, 0], vec![0, 1, 3], vec![1, 0, 2]],
        vec![vec![4, 0], vec![1, 2], vec![0, 3]],
        vec![vec![1, 2, 0, 1], vec![2, 0, 1, 0], vec![0, 1, 2, 0], vec![1, 0, 0, 2]],
    ]
}

#[test]
fn exact_rxc_matches_enumeration_oracle() {
    for t in small_tables() {
        let r = contingency_test(&ContingencyTable::new(t.clone()).unwrap(), ContingencyMethod::FisherExact).unwrap();
        let oracle = rxc_enumeration_p(&t);
        assert!((r.p_value - oracle).abs() < 1e-12, "{t:?}: {} vs {oracle}", r.p_value);
    }
}

#[test]
fn monte_carlo_converges_to_enumeration() {
    for t in small_tables() {
        let oracle = rxc_enumeration_p(&t);
        let r = contingency_test(
            &ContingencyTable::new(t.clone()).unwrap(),
            ContingencyMethod::MonteCarlo {
                replicates: 100_000,
                seed: DEFAULT_MC_SEED,
            },
        )
        .unwrap();
        assert_eq!(r.method, Method::MonteCarlo);
        assert!((r.p_value - oracle).abs() <= 0.01, "{t:?}: {} vs {oracle}", r.p_value);
    }
}

#[test]
fn chi_square_reference_value() {
    let t = ContingencyTable::new(vec![vec![12, 5, 7], vec![3, 9, 4]]).unwrap();
    let r = contingency_test(&t, ContingencyMethod::ChiSquare).unwrap();
    assert!((r.statistic - 6.001082251082252).abs() < 1e-12);
    assert!((r.p_value - 0.04976013460148397).abs() < 1e-10);
}

/// ICC(2,k) via raw-sum computational formulas.
fn icc_oracle(x: &[Vec<f64>]) -> f64 {
    let (n, k) = (x.len() as f64, x[0].len() as f64);
    let total: f64 = x.iter().flatten().sum();
    let corr = total * total / (n * k);
    let sst = x.iter().flatten().map(|v| v * v).sum::<f64>() - corr;
    let ssr = x.iter().map(|r| r.iter().sum::<f64>().powi(2)).sum::<f64>() / k - corr;
    let ssc = (0..x[0].len()).map(|j| x.iter().map(|r| r[j]).sum::<f64>().powi(2)).sum::<f64>() / n - corr;
    let sse = sst - ssr - ssc;
    let (bms, jms, ems) = (ssr / (n - 1.0), ssc / (k - 1.0), sse / ((n - 1.0) * (k - 1.0)));
    (bms - ems) / (bms + (jms - ems) / n)
}

#[test]
fn icc_matches_sums_of_squares_oracle() {
    let r = icc_2k(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
    assert!((r.icc - 16.0 / 17.0).abs() < 1e-12);
    assert!((r.icc - icc_oracle(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]])).abs() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let n = rng.random_range(2..=20);
        let k = rng.random_range(2..=6);
        let m: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(1..=5) as f64).collect()).collect();
        let r = icc_2k(&m).unwrap();
        let denom = r.ms_rows + (r.ms_cols - r.ms_error) / n as f64;
        if !r.degenerate && denom.abs() > 1e-6 * (r.ms_rows + r.ms_cols + r.ms_error) {
            let o = icc_oracle(&m);
            assert!((r.icc - o).abs() < 1e-9 * o.abs().max(1.0), "{m:?}: {} vs {o}", r.icc);
        }
    }
}

#[test]
fn icc_classic_six_by_four_reference() {
    let m = vec![
        vec![9.0, 2.0, 5.0, 8.0],
        vec![6.0, 1.0, 3.0, 2.0],
        vec![8.0, 4.0, 6.0, 8.0],
        vec![7.0, 1.0, 2.0, 6.0],
        vec![10.0, 5.0, 6.0, 9.0],
        vec![6.0, 2.0, 4.0, 7.0],
    ];
    let r = icc_2k(&m).unwrap();
    assert!((r.icc - 0.6200505475989893).abs() < 1e-12);
    assert!((r.ms_rows - 11.241666666666674).abs() < 1e-9);
    assert!((r.ms_cols - 32.48611111111112).abs() < 1e-9);
    assert!((r.ms_error - 1.019444444444442).abs() < 1e-9);
    let (lo, hi) = r.ci95.unwrap();
    assert!((lo - 0.07113681530250336).abs() < 1e-6, "{lo}");
    assert!((hi - 0.927232040167722).abs() < 1e-6, "{hi}");
    assert_eq!(r.ci_method, "F-based");
}

#[test]
fn tost_reference_values() {
    let d = [0.1, -0.2, 0.3, 0.0, 0.15, -0.05, 0.2, 0.1, -0.1, 0.05];
    let r = tost_equivalence(&d, DEFAULT_MARGIN, DEFAULT_ALPHA_EACH).unwrap();
    assert!((r.p_lower - 4.26936668053627e-07).abs() < 1e-12);
    assert!((r.p_upper - 2.724401699850842e-06).abs() < 1e-12);
    assert!((r.ci95.0 - -0.05090342978180264).abs() < 1e-9);
    assert!((r.ci95.1 - 0.16090342978180266).abs() < 1e-9);
    assert!(r.equivalent);
}

#[test]
fn tost_ci_duality_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut seen = [0usize; 2];
    for _ in 0..500 {
        let n = rng.random_range(2..=40);
        let shift = rng.random_range(-1.0..1.0);
        let spread = rng.random_range(0.01..2.0);
        let d: Vec<f64> = (0..n).map(|_| shift + spread * rng.random_range(-1.0..1.0)).collect();
        let r = tost_equivalence(&d, 0.5, 0.025).unwrap();
        assert!(!r.degenerate);
        let inside = r.ci95.0 > -r.margin && r.ci95.1 < r.margin;
        assert_eq!(r.equivalent, inside, "{d:?}");
        seen[r.equivalent as usize] += 1;
    }
    assert!(seen[0] > 0 && seen[1] > 0);
}

#[test]
fn mean_ci_two_point_interval() {
    let r = mean_ci95(&[0.0, 2.0]).unwrap();
    assert!((r.hi - (1.0 + 12.706204736432095)).abs() < 1e-9);
    assert!((r.lo - (1.0 - 12.706204736432095)).abs() < 1e-9);
}
