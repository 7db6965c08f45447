//! Synthetic datasets for tests and studies.

use std::f64::consts::PI;
use std::path::Path;

use nervereg::registry::Registry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{fmt_f64, write_csv};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub points: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub truth: Vec<f64>,
    pub labels: Option<Vec<String>>,
}

impl SimData {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let d = self.points.first().map_or(0, |p| p.len());
        let mut header = vec!["id".to_string()];
        header.extend((0..d).map(|j| format!("x{j}")));
        header.extend(["y".to_string(), "truth".to_string()]);
        if self.labels.is_some() {
            header.push("label".into());
        }
        let rows: Vec<Vec<String>> = (0..self.n())
            .map(|i| {
                let mut r = vec![i.to_string()];
                r.extend(self.points[i].iter().map(|&x| fmt_f64(x)));
                r.push(fmt_f64(self.y[i]));
                r.push(fmt_f64(self.truth[i]));
                if let Some(l) = &self.labels {
                    r.push(l[i].clone());
                }
                r
            })
            .collect();
        write_csv(path, &header, &rows)
    }
}

pub trait Generator: Send + Sync {
    fn name(&self) -> &'static str;
    fn generate(&self, p: &SimParams, rng: &mut ChaCha8Rng) -> CliResult<SimData>;
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn noisy(truth: &[f64], noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    truth.iter().map(|t| t + noise * gauss(rng)).collect()
}

/// Five collinear points with a step response.
pub struct Path5;

impl Generator for Path5 {
    fn name(&self) -> &'static str {
        "path5"
    }

    fn generate(&self, _p: &SimParams, _rng: &mut ChaCha8Rng) -> CliResult<SimData> {
        let y = vec![0.0, 0.0, 0.5, 1.0, 1.0];
        Ok(SimData {
            points: (0..5).map(|i| vec![i as f64]).collect(),
            truth: y.clone(),
            y,
            labels: None,
        })
    }
}

/// Two unit-variance Gaussian clusters 8 apart along the first axis; the
/// response is the cluster sign.
pub struct TwoCluster;

impl Generator for TwoCluster {
    fn name(&self) -> &'static str {
        "two_cluster"
    }

    fn generate(&self, p: &SimParams, rng: &mut ChaCha8Rng) -> CliResult<SimData> {
        let mut points = Vec::with_capacity(p.n);
        let mut truth = Vec::with_capacity(p.n);
        for i in 0..p.n {
            let sign = if i < p.n / 2 { -1.0 } else { 1.0 };
            let mut x: Vec<f64> = (0..p.d).map(|_| gauss(rng)).collect();
            x[0] += 4.0 * sign;
            points.push(x);
            truth.push(sign);
        }
        let y = noisy(&truth, p.noise, rng);
        let labels = Some(truth.iter().map(|&s| if s < 0.0 { "-1".to_string() } else { "1".to_string() }).collect());
        Ok(SimData { points, y, truth, labels })
    }
}

/// Swiss roll in the first three coordinates with a step across the roll
/// parameter; further coordinates are zero.
pub struct SwissRollStep;

impl Generator for SwissRollStep {
    fn name(&self) -> &'static str {
        "swiss_roll_step"
    }

    fn generate(&self, p: &SimParams, rng: &mut ChaCha8Rng) -> CliResult<SimData> {
        if p.d < 3 {
            return Err(CliError::Config("swiss_roll_step needs d >= 3".into()));
        }
        let mut points = Vec::with_capacity(p.n);
        let mut truth = Vec::with_capacity(p.n);
        for _ in 0..p.n {
            let t = 1.5 * PI * (1.0 + 2.0 * rng.gen::<f64>());
            let h = 21.0 * rng.gen::<f64>();
            let mut x = vec![0.0; p.d];
            x[0] = t * t.cos();
            x[1] = h;
            x[2] = t * t.sin();
            points.push(x);
            truth.push(if t > 3.0 * PI { 1.0 } else { 0.0 });
        }
        let y = noisy(&truth, p.noise, rng);
        Ok(SimData { points, y, truth, labels: None })
    }
}

/// Uniform points in the unit cube with `sin(2π x₀)` as the response.
pub struct UniformCube;

impl Generator for UniformCube {
    fn name(&self) -> &'static str {
        "uniform_cube"
    }

    fn generate(&self, p: &SimParams, rng: &mut ChaCha8Rng) -> CliResult<SimData> {
        let points: Vec<Vec<f64>> = (0..p.n).map(|_| (0..p.d).map(|_| rng.gen::<f64>()).collect()).collect();
        let truth: Vec<f64> = points.iter().map(|x| (2.0 * PI * x[0]).sin()).collect();
        let y = noisy(&truth, p.noise, rng);
        Ok(SimData { points, y, truth, labels: None })
    }
}

pub fn generator_registry() -> Registry<dyn Generator> {
    Registry::<dyn Generator>::new("simulation")
        .with("path5", |_| Box::new(Path5))
        .with("two_cluster", |_| Box::new(TwoCluster))
        .with("swiss_roll_step", |_| Box::new(SwissRollStep))
        .with("uniform_cube", |_| Box::new(UniformCube))
}

pub fn simulate(kind: &str, p: &SimParams) -> CliResult<SimData> {
    let generator = generator_registry().get(kind)?;
    if generator.name() != "path5" {
        if p.n == 0 {
            return Err(CliError::Input("cannot simulate an empty dataset (n = 0)".into()));
        }
        if p.d == 0 {
            return Err(CliError::Config("dimension d must be at least 1".into()));
        }
    }
    if !(p.noise >= 0.0 && p.noise.is_finite()) {
        return Err(CliError::Config(format!("noise {} must be non-negative", p.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    generator.generate(p, &mut rng)
}
