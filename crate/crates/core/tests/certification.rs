use proptest::prelude::*;
use smoothcert::eval::{acr, certified_accuracy_curve, certify_dataset, default_radius_grid, CertReport, CertRow};
use smoothcert::numerics::{clopper_pearson_lower, std_normal_quantile};
use smoothcert::smoothing::{certify_hybrid_parts, combine_hybrid, CertifyMode, Norm, Smoothing};
use smoothcert::{Certificate, CertifyParams, Dataset, IntervalClassifier, Linear, NoiseSpec, Probability, SeededStream, Status};

/// Binomial pmf in log space; independent of the library's tail code.
fn binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    let ln_choose: f64 = (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum();
    (ln_choose + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

#[test]
fn clopper_pearson_exact_coverage() {
    let alpha = 0.001;
    for n in [10u64, 100, 1000] {
        let bounds: Vec<f64> = (0..=n).map(|k| clopper_pearson_lower(k, n, alpha).unwrap().value()).collect();
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let miss: f64 = (0..=n).filter(|&k| bounds[k as usize] > p).map(|k| binom_pmf(k, n, p)).sum();
            assert!(miss <= alpha * (1.0 + 1e-9), "n={n} p={p} miss={miss}");
        }
    }
}

#[test]
fn linear_oracle_acr_matches_analytic_expectation() {
    // 1-D oracle sign(x); inputs at fixed margins with exact p_A.
    let sigma = 0.5;
    let n = 1000u64;
    let alpha = 0.001;
    let oracle = Linear::new(vec![1.0], 0.0).unwrap();
    let p_as = [0.55, 0.7, 0.9, 0.99];
    let per = 250;
    let mut xs = Vec::new();
    for &p in &p_as {
        let x = sigma * std_normal_quantile(p).unwrap();
        xs.extend(std::iter::repeat(vec![x]).take(per));
    }
    let data = Dataset::new(xs, vec![1; per * p_as.len()]).unwrap();
    let params = CertifyParams::new(n, alpha).unwrap();
    let rep = certify_dataset(&oracle, &data, &CertifyMode::Gaussian { sigma }, &params, 17).unwrap();

    // Exact expected credited radius: class 1 is on top iff its count > n/2.
    let radius = |k: u64| {
        let pl = clopper_pearson_lower(k, n, alpha).unwrap().value();
        if 2 * k > n && pl > 0.5 {
            sigma * std_normal_quantile(pl.min(1.0 - 1e-12)).unwrap()
        } else {
            0.0
        }
    };
    let mut mean = 0.0;
    let mut var = 0.0;
    for &p in &p_as {
        let m: f64 = (0..=n).map(|k| binom_pmf(k, n, p) * radius(k)).sum();
        let m2: f64 = (0..=n).map(|k| binom_pmf(k, n, p) * radius(k).powi(2)).sum();
        mean += m / p_as.len() as f64;
        var += (m2 - m * m) * per as f64;
    }
    let se = var.sqrt() / (per * p_as.len()) as f64;
    let got = rep.aggregates.acr_l2;
    assert!((got - mean).abs() < 4.0 * se + 1e-12, "ACR {got} vs expected {mean} (se {se})");
}

fn arb_row() -> impl Strategy<Value = CertRow> {
    (0usize..3, prop::option::of(0usize..3), 0.0f64..2.0, 0.0f64..2.0).prop_map(|(truth, pred, r1, r2)| {
        let status = pred.map_or(Status::Abstained, |label| Status::Certified { label });
        let (r1, r2) = if pred.is_some() { (r1, r2) } else { (0.0, 0.0) };
        CertRow {
            input_id: 0,
            label_true: truth,
            cert: Certificate {
                input_id: None,
                status,
                r_l1: r1,
                r_l2: r2,
                p_lower: Probability::saturating(0.9),
                n: 100,
                alpha: 0.001,
                smoothing: Smoothing::Single(NoiseSpec::gaussian(1.0).unwrap()),
            },
        }
    })
}

proptest! {
    #[test]
    fn acr_decomposes(rows in prop::collection::vec(arb_row(), 1..60)) {
        for norm in [Norm::L1, Norm::L2] {
            let value = acr(&rows, norm).unwrap();
            let good: Vec<f64> = rows.iter().filter(|r| r.is_correct()).map(|r| r.cert.radius(norm)).collect();
            let frac = good.len() as f64 / rows.len() as f64;
            let mean = if good.is_empty() { 0.0 } else { good.iter().sum::<f64>() / good.len() as f64 };
            prop_assert!((value - frac * mean).abs() < 1e-12);
            prop_assert!(value >= 0.0);
        }
        let rep = CertReport::from_rows(rows).unwrap();
        prop_assert!((rep.aggregates.acr_avg - (rep.aggregates.acr_l1 + rep.aggregates.acr_l2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn curve_is_monotone_and_integrates_to_acr(rows in prop::collection::vec(arb_row(), 1..60)) {
        let grid = default_radius_grid(&rows, Norm::L1, 20001);
        let curve = certified_accuracy_curve(&rows, Norm::L1, &grid).unwrap();
        prop_assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1));
        let correct = rows.iter().filter(|r| r.is_correct()).count() as f64 / rows.len() as f64;
        prop_assert_eq!(curve[0].1, correct);
        let integral: f64 = curve.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
        let value = acr(&rows, Norm::L1).unwrap();
        let max = grid.last().copied().unwrap_or(0.0);
        // A step of height 1/N is off by at most one grid cell.
        prop_assert!((integral - value).abs() <= 0.01 * value + max / 20000.0 + 1e-12);
    }
}

#[test]
fn hybrid_dominates_gaussian_when_uniform_does_not_disagree() {
    let f = IntervalClassifier::new(vec![-1.0, 0.2, 1.5], vec![0, 1, 0, 1], 2).unwrap();
    let params = CertifyParams::new(2000, 0.001).unwrap();
    let mut checked = 0;
    for i in 0..120 {
        let x = [-2.5 + i as f64 * 0.04];
        let stream = SeededStream::for_input(5, i, 0);
        let (cu, cg) = certify_hybrid_parts(&f, &x, 0.4, 0.45, &params, &stream).unwrap();
        let hybrid = combine_hybrid(&cu, &cg).unwrap();
        if !cu.is_certified() || cu.label() == cg.label() {
            assert!(hybrid.r_l1 >= cg.r_l1);
            assert!(hybrid.r_l2 >= cg.r_l2);
            checked += 1;
        } else {
            assert!(!hybrid.is_certified());
        }
    }
    assert!(checked > 60);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let f = IntervalClassifier::new(vec![0.0, 1.0], vec![0, 1, 0], 2).unwrap();
    let data = Dataset::new((0..40).map(|i| vec![i as f64 * 0.05 - 0.5]).collect(), (0..40).map(|i| i % 2).collect()).unwrap();
    let params = CertifyParams::new(3000, 0.001).unwrap();
    let mode = CertifyMode::Hybrid { sigma_g: 0.3, sigma_u: 0.3 };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| certify_dataset(&f, &data, &mode, &params, 99).unwrap())
    };
    let one = run(1);
    assert_eq!(one.to_csv(), run(4).to_csv());
    assert_eq!(one.aggregates, run(3).aggregates);
}
