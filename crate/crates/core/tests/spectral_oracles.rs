use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nervereg::covering::{build_knn, Dataset};
use nervereg::inference::{denoise_features, diffusion_distance, heat_kernel_row};
use nervereg::metric::MassState;
use nervereg::nerve::{build_nerve, NerveComplex};
use nervereg::refine::diffuse_density;
use nervereg::spectral::filter::{HeatFilter, TikhonovFilter};
use nervereg::spectral::sidecar::{read_sidecar, write_sidecar};
use nervereg::spectral::{
    assemble_laplacian, eigendecompose, gcv_value, tikhonov_smooth, Convention, EigenCount, EigenOptions, Laplacian,
    LaplacianForm, SmoothingFilter, SpectralCache,
};

fn instance(n: usize, k: usize, seed: u64) -> Laplacian {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
    let ds = Dataset::new(rows, None).unwrap();
    let cov = build_knn(&ds, k).unwrap();
    let cx = build_nerve(&cov, 2).unwrap();
    let rho0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let mass = MassState::from_intersections(&cov, &cx, rho0).unwrap();
    assemble_laplacian(&cx, &mass, Convention::ConductanceMass, LaplacianForm::Combinatorial).unwrap()
}

fn masses(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.5..2.0)).collect()
}

fn both_forms(seed: u64) -> Vec<Laplacian> {
    let lap = instance(30, 4, seed);
    let rw = lap.with_form(LaplacianForm::RandomWalk, Some(&masses(30, seed + 1))).unwrap();
    vec![lap, rw]
}

fn expm_apply(lap: &Laplacian, t: f64, v: &[f64]) -> DVector<f64> {
    (lap.to_dense() * -t).exp() * DVector::from_column_slice(v)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn path(n: usize) -> Laplacian {
    let cx = NerveComplex::from_simplices(n, (0..n - 1).map(|i| (i, i + 1)).collect(), vec![]).unwrap();
    let mass = MassState {
        rho0: vec![1.0; n],
        rho1: vec![1.0; n - 1],
        offdiag: vec![],
        rho1_scale: 1.0,
    };
    assemble_laplacian(&cx, &mass, Convention::ConductanceMass, LaplacianForm::Combinatorial).unwrap()
}

#[test]
fn heat_matches_dense_expm() {
    for seed in 0..4 {
        for lap in both_forms(seed) {
            let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
            let v = masses(30, 99 + seed);
            for t in [0.0, 0.01, 0.3, 1.5, 6.0] {
                let got = cache.heat_apply(t, &v).unwrap();
                let want = expm_apply(&lap, t, &v);
                assert!(max_abs_diff(&got, want.as_slice()) < 1e-8, "t = {t}");
            }
        }
    }
}

#[test]
fn heat_semigroup() {
    for lap in both_forms(11) {
        let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
        let v = masses(30, 5);
        let twice = cache.heat_apply(0.4, &cache.heat_apply(0.7, &v).unwrap()).unwrap();
        let once = cache.heat_apply(1.1, &v).unwrap();
        assert!(max_abs_diff(&twice, &once) < 1e-8);
    }
}

#[test]
fn heat_tends_to_weighted_mean() {
    let rho = masses(30, 3);
    let lap = instance(30, 5, 3).with_form(LaplacianForm::RandomWalk, Some(&rho)).unwrap();
    let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
    let v = masses(30, 4);
    let mean = v.iter().zip(&rho).map(|(a, b)| a * b).sum::<f64>() / rho.iter().sum::<f64>();
    let out = cache.heat_apply(1e4, &v).unwrap();
    assert!(out.iter().all(|x| (x - mean).abs() < 1e-8));
}

#[test]
fn diffusion_matches_dense_oracle_and_limits() {
    let lap = instance(30, 4, 21);
    let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
    let rho = masses(30, 22);
    let init = masses(30, 23);
    let (t, beta) = (0.8, 0.25);
    let got = diffuse_density(&cache, &rho, t, beta, &init).unwrap();
    let heat = expm_apply(&lap, t, &rho);
    let keep = (-beta * t).exp();
    for i in 0..30 {
        assert!((got[i] - (keep * heat[i] + (1.0 - keep) * init[i])).abs() < 1e-8);
    }
    let damped = diffuse_density(&cache, &rho, t, 1e6, &init).unwrap();
    assert!(max_abs_diff(&damped, &init) < 1e-10);
    let frozen = diffuse_density(&cache, &rho, 0.0, beta, &init).unwrap();
    assert!(max_abs_diff(&frozen, &rho) < 1e-10);
}

#[test]
fn diffusion_distance_oracle_symmetry_and_triangle_inequality() {
    for lap in both_forms(31) {
        let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
        let rho = masses(30, 32);
        let t = 0.6;
        let kernel = (lap.to_dense() * -t).exp();
        for i in 0..30 {
            let row = heat_kernel_row(&cache, t, i);
            let want: Vec<f64> = kernel.row(i).iter().copied().collect();
            assert!(max_abs_diff(&row, &want) < 1e-8);
        }
        let d = |i, j| diffusion_distance(&cache, t, &rho, i, j).unwrap();
        for (i, j) in [(0, 1), (4, 20), (29, 7)] {
            let want: f64 = (0..30).map(|c| (kernel[(i, c)] - kernel[(j, c)]).powi(2) / rho[c]).sum::<f64>().sqrt();
            assert!((d(i, j) - want).abs() < 1e-8);
            assert!((d(i, j) - d(j, i)).abs() < 1e-12);
        }
        assert_eq!(d(5, 5), 0.0);
        for (a, b, c) in [(0, 1, 2), (3, 17, 25), (9, 28, 14)] {
            assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-12);
        }
    }
}

fn dense_gcv(lap: &Laplacian, y: &[f64], eta: f64) -> f64 {
    let n = lap.n();
    let m0 = match &lap.vertex_mass {
        Some(m) => DMatrix::from_diagonal(&DVector::from_column_slice(m)),
        None => DMatrix::identity(n, n),
    };
    let lc = &m0 * lap.to_dense();
    let s = (&m0 + lc * eta).lu().solve(&m0).unwrap();
    let yv = DVector::from_column_slice(y);
    let r = &yv - &s * &yv;
    let d = n as f64 - s.trace();
    r.norm_squared() / (d * d)
}

#[test]
fn gcv_matches_dense_smoother() {
    for lap in both_forms(41) {
        let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
        let y = masses(30, 42);
        for eta in [1e-4, 0.01, 0.2, 1.0, 10.0] {
            let got = gcv_value(&cache, &[&y], &TikhonovFilter, eta).unwrap();
            let want = dense_gcv(&lap, &y, eta);
            assert!(((got - want) / want).abs() < 1e-10, "eta {eta}: {got} vs {want}");
        }
    }
}

#[test]
fn tikhonov_direct_solve_matches_spectral() {
    for lap in both_forms(51) {
        let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
        let m0 = lap.vertex_mass.clone().unwrap_or_else(|| vec![1.0; 30]);
        let y = masses(30, 52);
        for eta in [0.0, 0.05, 2.0] {
            let direct = tikhonov_smooth(&lap, &m0, &y, eta).unwrap();
            let spectral = cache.smooth(&TikhonovFilter, &y, eta).unwrap();
            assert!(max_abs_diff(&direct, &spectral) < 1e-9);
        }
    }
}

#[test]
fn dirichlet_energy_decreases_with_eta() {
    let lap = instance(30, 4, 61);
    let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
    let y = masses(30, 62);
    for f in [&HeatFilter as &dyn SmoothingFilter, &TikhonovFilter] {
        let energies: Vec<f64> = [0.0, 0.01, 0.1, 0.5, 2.0, 10.0]
            .iter()
            .map(|&eta| lap.energy(&cache.smooth(f, &y, eta).unwrap()))
            .collect();
        assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{energies:?}");
    }
}

#[test]
fn denoising_scales_eigenvectors() {
    let lap = instance(30, 4, 71);
    let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
    let v: Vec<f64> = cache.eigvecs.column(5).iter().copied().collect();
    let out = denoise_features(&cache, 0.7, &[v.clone(), vec![2.5; 30]]).unwrap();
    let s = (-0.7 * cache.eigvals[5]).exp();
    assert!(out[0].iter().zip(&v).all(|(a, b)| (a - s * b).abs() < 1e-10));
    assert!(out[1].iter().all(|a| (a - 2.5).abs() < 1e-10));
    let same = denoise_features(&cache, 0.0, &[v.clone()]).unwrap();
    assert!(max_abs_diff(&same[0], &v) < 1e-10);
}

#[test]
fn cache_invariants() {
    for lap in both_forms(81) {
        let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
        assert!(cache.eigvals[0] <= 1e-10);
        assert!(cache.eigvals.windows(2).all(|w| w[0] <= w[1]));
        assert!(cache.orthonormality_error() < 1e-8);
        let norm = cache.lambda_max().max(1.0);
        assert!(cache.residual_norms.iter().all(|r| *r <= 1e-6 * norm));
    }
}

#[test]
fn dense_and_lanczos_agree_at_forty() {
    let lap = instance(40, 5, 91);
    let dense = eigendecompose(&lap, &EigenOptions::default()).unwrap();
    let opts = EigenOptions {
        count: EigenCount::Fixed(12),
        solver: Some("lanczos".into()),
        seed: 3,
    };
    let iterative = eigendecompose(&lap, &opts).unwrap();
    for (a, b) in iterative.eigvals.iter().zip(&dense.eigvals) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn large_path_uses_lanczos_and_matches_closed_form() {
    let n = 2200;
    let lap = path(n);
    let opts = EigenOptions {
        count: EigenCount::Fixed(8),
        ..Default::default()
    };
    let cache = eigendecompose(&lap, &opts).unwrap();
    assert_eq!(cache.p(), 8);
    for (k, l) in cache.eigvals.iter().enumerate() {
        let want = 2.0 * (1.0 - (std::f64::consts::PI * k as f64 / n as f64).cos());
        assert!((l - want).abs() < 1e-10, "k = {k}: {l} vs {want}");
    }
    // truncated cache: constants survive heat, everything else is damped
    let ones = cache.heat_apply(3.0, &vec![1.0; n]).unwrap();
    assert!(ones.iter().all(|x| (x - 1.0).abs() < 1e-8));
}

#[test]
fn sidecar_round_trip() {
    let rho = masses(30, 101);
    let lap = instance(30, 4, 100).with_form(LaplacianForm::RandomWalk, Some(&rho)).unwrap();
    let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
    let dir = std::env::temp_dir().join(format!("sidecar-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cache.bin");
    write_sidecar(&path, &cache).unwrap();
    let back: SpectralCache = read_sidecar(&path).unwrap();
    assert_eq!(back.eigvals, cache.eigvals);
    assert_eq!(back.eigvecs, cache.eigvecs);
    assert_eq!(back.weights, cache.weights);
    std::fs::remove_dir_all(&dir).unwrap();
}

