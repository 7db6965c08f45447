use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use nervereg::covering::{build_knn, Covering, Dataset};
use nervereg::inference::{classify_with, credible_band, smooth_multivariate};
use nervereg::metric::MassState;
use nervereg::nerve::{build_nerve, NerveComplex};
use nervereg::refine::RefineConfig;
use nervereg::spectral::filter::{HeatFilter, TikhonovFilter};
use nervereg::spectral::{
    assemble_laplacian, eigendecompose, gcv_select, Convention, EigenOptions, LaplacianForm, SmoothingFilter,
    SpectralCache,
};

struct Fixture {
    rows: Vec<Vec<f64>>,
    cov: Covering,
    cx: NerveComplex,
    cache: SpectralCache,
}

fn fixture(n: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    let ds = Dataset::new(rows.clone(), None).unwrap();
    let cov = build_knn(&ds, 6).unwrap();
    let cx = build_nerve(&cov, 2).unwrap();
    let mass = MassState::from_intersections(&cov, &cx, vec![1.0; n]).unwrap();
    let lap = assemble_laplacian(&cx, &mass, Convention::ConductanceMass, LaplacianForm::Combinatorial).unwrap();
    let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
    Fixture { rows, cov, cx, cache }
}

fn noisy(rows: &[Vec<f64>], f: impl Fn(&[f64]) -> f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.iter()
        .map(|x| f(x) + sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn wave(x: &[f64]) -> f64 {
    (2.0 * std::f64::consts::PI * x[0]).sin()
}

#[test]
fn single_column_matches_univariate() {
    let fx = fixture(90, 1);
    let y = noisy(&fx.rows, wave, 0.3, 2);
    for f in [&HeatFilter as &dyn SmoothingFilter, &TikhonovFilter] {
        let (multi, sel) = smooth_multivariate(&fx.cache, &[y.clone()], f, 25).unwrap();
        let uni = gcv_select(&fx.cache, &y, f, 25).unwrap();
        assert_eq!(sel.eta_star, uni.eta_star);
        assert_eq!(multi[0], fx.cache.smooth(f, &y, uni.eta_star).unwrap());
    }
}

#[test]
fn duplicated_column_keeps_eta() {
    let fx = fixture(90, 3);
    let y = noisy(&fx.rows, wave, 0.3, 4);
    let (_, one) = smooth_multivariate(&fx.cache, &[y.clone()], &TikhonovFilter, 25).unwrap();
    let (_, two) = smooth_multivariate(&fx.cache, &[y.clone(), y], &TikhonovFilter, 25).unwrap();
    assert!((one.eta_star - two.eta_star).abs() <= 1e-9 * one.eta_star);
}

#[test]
fn shared_eta_sits_between_column_optima() {
    let fx = fixture(120, 5);
    let smooth = noisy(&fx.rows, |x| x[0], 1.0, 6);
    let rough = noisy(&fx.rows, |x| (4.0 * std::f64::consts::PI * x[1]).sin(), 0.05, 7);
    let a = gcv_select(&fx.cache, &smooth, &TikhonovFilter, 50).unwrap().eta_star;
    let b = gcv_select(&fx.cache, &rough, &TikhonovFilter, 50).unwrap().eta_star;
    let (_, both) = smooth_multivariate(&fx.cache, &[smooth, rough], &TikhonovFilter, 50).unwrap();
    assert!(a != b, "{a} {b}");
    let (lo, hi) = (a.min(b), a.max(b));
    assert!(both.eta_star >= lo * (1.0 - 1e-9) && both.eta_star <= hi * (1.0 + 1e-9), "{a} {b} {}", both.eta_star);
}

#[test]
fn column_order_does_not_matter() {
    let fx = fixture(80, 8);
    let y1 = noisy(&fx.rows, wave, 0.3, 9);
    let y2 = noisy(&fx.rows, |x| x[1], 0.3, 10);
    let (f12, s12) = smooth_multivariate(&fx.cache, &[y1.clone(), y2.clone()], &TikhonovFilter, 25).unwrap();
    let (f21, s21) = smooth_multivariate(&fx.cache, &[y2, y1], &TikhonovFilter, 25).unwrap();
    assert!((s12.eta_star - s21.eta_star).abs() <= 1e-12 * s12.eta_star);
    for i in 0..80 {
        assert!((f12[0][i] - f21[1][i]).abs() < 1e-10);
        assert!((f12[1][i] - f21[0][i]).abs() < 1e-10);
    }
}

#[test]
fn perfect_fit_gives_zero_width_band() {
    let fx = fixture(60, 11);
    let y = vec![2.5; 60];
    let y_hat = fx.cache.smooth(&TikhonovFilter, &y, 1.0).unwrap();
    let band = credible_band(&fx.cache, &TikhonovFilter, 1.0, &y, &y_hat, 0.9, 200, 0).unwrap();
    assert!(band.sigma_hat < 1e-10);
    for i in 0..60 {
        assert!((band.upper[i] - band.lower[i]).abs() < 1e-9);
        assert!((band.lower[i] - 2.5).abs() < 1e-9);
    }
}

#[test]
fn band_is_reproducible_and_seed_dependent() {
    let fx = fixture(60, 12);
    let y = noisy(&fx.rows, wave, 0.3, 13);
    let y_hat = fx.cache.smooth(&TikhonovFilter, &y, 0.5).unwrap();
    let a = credible_band(&fx.cache, &TikhonovFilter, 0.5, &y, &y_hat, 0.9, 300, 21).unwrap();
    let b = credible_band(&fx.cache, &TikhonovFilter, 0.5, &y, &y_hat, 0.9, 300, 21).unwrap();
    let c = credible_band(&fx.cache, &TikhonovFilter, 0.5, &y, &y_hat, 0.9, 300, 22).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.lower, c.lower);
    assert!(credible_band(&fx.cache, &TikhonovFilter, 0.5, &y, &y_hat, 1.0, 300, 0).is_err());
    assert!(credible_band(&fx.cache, &TikhonovFilter, 0.5, &y, &y_hat, 0.9, 99, 0).is_err());
}

#[test]
fn declared_classes_with_one_observed_label() {
    let fx = fixture(50, 14);
    let labels = vec!["1".to_string(); 50];
    let classes = ["-1".to_string(), "1".to_string()];
    let out = classify_with(&fx.cov, &fx.cx, &labels, Some(&classes), vec![1.0; 50], None, &RefineConfig::default())
        .unwrap();
    for row in &out.probabilities.probs {
        assert!((row[1] - 1.0).abs() < 1e-9);
        assert!(row[0].abs() < 1e-9);
    }
    assert!(out.probabilities.predicted.iter().all(|&p| p == 1));
}

#[test]
fn three_classes_by_region() {
    let fx = fixture(120, 15);
    let labels: Vec<String> = fx
        .rows
        .iter()
        .map(|x| if x[0] < 1.0 / 3.0 { "a" } else if x[0] < 2.0 / 3.0 { "b" } else { "c" }.to_string())
        .collect();
    let out = classify_with(&fx.cov, &fx.cx, &labels, None, vec![1.0; 120], None, &RefineConfig::default()).unwrap();
    assert_eq!(out.probabilities.labels, vec!["a", "b", "c"]);
    let mut correct = 0;
    for (i, row) in out.probabilities.probs.iter().enumerate() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        if out.probabilities.labels[out.probabilities.predicted[i]] == labels[i] {
            correct += 1;
        }
    }
    assert!(correct as f64 >= 0.9 * 120.0, "{correct}");
}
