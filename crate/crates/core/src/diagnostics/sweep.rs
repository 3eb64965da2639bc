use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{design_matrix, Mesh};
use crate::beam::{mm_per_m_to_rad, AxleTrain};
use crate::error::{Error, Result};
use crate::inference::{
    quasi_optimality_lambda, relative_lambda_grid, NoiseModel, Parameterization, PriorSpec, TikhonovSolver,
};
use crate::linalg::linspace;
use crate::synthetic::derive_seed;

/// Smooth ground truth `EI(x) = EI₀ (1 − d·exp(−½((x − c)/w)²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothDip {
    pub base_ei: f64,
    pub depth: f64,
    pub center: f64,
    pub width: f64,
}

impl SmoothDip {
    pub fn ei_at(&self, x: f64) -> f64 {
        self.base_ei * (1.0 - self.depth * (-0.5 * ((x - self.center) / self.width).powi(2)).exp())
    }

    /// Element-averaged compliance by composite Simpson on `sub` panels.
    fn mean_compliance(&self, a: f64, b: f64, sub: usize) -> f64 {
        let h = (b - a) / sub as f64;
        let mut s = 0.0;
        for i in 0..sub {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            s += (1.0 / self.ei_at(x0) + 4.0 / self.ei_at(0.5 * (x0 + x1)) + 1.0 / self.ei_at(x1)) * h / 6.0;
        }
        s / (b - a)
    }
}

/// How the regularization weight is chosen for each sensor count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepLambda {
    /// Quasi-optimality at `reference_n`, taking the median over the first
    /// `calibration` replicates, then reused as an absolute value across
    /// the mesh sweep.
    QuasiOptimality { reference_n: usize, lo: f64, hi: f64, points: usize, calibration: usize },
    Fixed { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasVarianceConfig {
    pub length: f64,
    pub truth: SmoothDip,
    /// Candidate stations; a layout with `R` sensors uses the first `R`.
    pub stations: Vec<f64>,
    pub sensor_counts: Vec<usize>,
    pub mesh_sizes: Vec<usize>,
    pub axle_load: f64,
    pub n_positions: usize,
    pub sigma_mm_per_m: f64,
    pub replicates: usize,
    pub order: usize,
    pub lambda: SweepLambda,
    /// Elements of the reference mesh used to simulate the data.
    pub reference_elements: usize,
    /// Largest tolerated share of failed inversions per record.
    pub max_failure_rate: f64,
}

impl Default for BiasVarianceConfig {
    fn default() -> Self {
        BiasVarianceConfig {
            length: 20.0,
            truth: SmoothDip { base_ei: 5e9, depth: 0.3, center: 10.0, width: 2.0 },
            stations: vec![10.0, 5.0, 15.0, 8.0],
            sensor_counts: vec![1, 2, 4],
            mesh_sizes: vec![8, 16, 32, 48, 64, 96, 144, 200],
            axle_load: 1e5,
            n_positions: 100,
            sigma_mm_per_m: 0.005,
            replicates: 50,
            order: 2,
            lambda: SweepLambda::QuasiOptimality { reference_n: 48, lo: 1e-10, hi: 1e2, points: 61, calibration: 20 },
            reference_elements: 2000,
            max_failure_rate: 0.05,
        }
    }
}

impl BiasVarianceConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.length > 0.0) {
            problems.push("length must be positive".to_string());
        }
        if self.stations.iter().any(|&r| !(r > 0.0 && r < self.length)) {
            problems.push("stations must lie strictly inside the span".to_string());
        }
        if self.sensor_counts.is_empty() || self.sensor_counts.iter().any(|&r| r == 0 || r > self.stations.len()) {
            problems.push(format!("sensor counts must lie in 1..={}", self.stations.len()));
        }
        if self.mesh_sizes.is_empty() || self.mesh_sizes.contains(&0) {
            problems.push("mesh sizes must be non-empty and positive".to_string());
        }
        if self.replicates < 2 {
            problems.push("at least two replicates are required".to_string());
        }
        if !(self.sigma_mm_per_m >= 0.0) {
            problems.push("noise level must be >= 0".to_string());
        }
        if self.n_positions == 0 {
            problems.push("the sweep needs load positions".to_string());
        }
        if !(self.truth.depth >= 0.0 && self.truth.depth < 1.0 && self.truth.base_ei > 0.0 && self.truth.width > 0.0) {
            problems.push("truth needs base_ei > 0, width > 0 and depth in [0, 1)".to_string());
        }
        if let SweepLambda::QuasiOptimality { reference_n, points, lo, hi, calibration } = self.lambda {
            if reference_n == 0 || points < 20 || !(lo > 0.0 && lo < hi) {
                problems.push("quasi-optimality needs reference_n > 0, >= 20 points and 0 < lo < hi".to_string());
            }
            if calibration == 0 || calibration > self.replicates {
                problems.push("calibration replicates must lie in 1..=replicates".to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Monte-Carlo moments of the mid-span rigidity estimate for one `(N, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n_elements: usize,
    pub n_sensors: usize,
    pub lambda: f64,
    /// Index of the element whose midpoint is nearest `L/2`.
    pub element: usize,
    /// Per-replicate estimates; failed inversions are `None`.
    pub estimates: Vec<Option<f64>>,
    pub truth: f64,
    pub rmse: f64,
    pub bias2: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Standard error of the mean squared error.
    pub mse_se: f64,
    pub failures: usize,
}

impl SweepRecord {
    /// `|RMSE² − bias² − variance|` in units of the Monte-Carlo standard error.
    pub fn decomposition_gap(&self) -> f64 {
        let gap = (self.rmse * self.rmse - self.bias2 - self.variance).abs();
        if self.mse_se > 0.0 {
            gap / self.mse_se
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn moments(estimates: &[f64], truth: f64) -> (f64, f64, f64, f64) {
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let sq: Vec<f64> = estimates.iter().map(|e| (e - truth).powi(2)).collect();
    let mse = sq.iter().sum::<f64>() / n;
    let variance = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    (mse.sqrt(), (mean - truth).powi(2), variance, se)
}

/// Mid-span rigidity error versus mesh size for several sensor counts.
///
/// Noise for station `s` in replicate `k` comes from
/// `derive_seed(derive_seed(master, k), s)`, so nested layouts share their
/// common channels and every mesh size sees the same data.
pub fn bias_variance_sweep(cfg: &BiasVarianceConfig, master_seed: u64) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let length = cfg.length;
    let margin = 0.5 * length / cfg.n_positions as f64;
    let train = AxleTrain::point_load(cfg.axle_load, linspace(margin, length - margin, cfg.n_positions))?;
    let k = cfg.n_positions;
    let r_max = *cfg.sensor_counts.iter().max().unwrap_or(&1);
    let stations = &cfg.stations[..r_max];

    let fine = Mesh::uniform(length, cfg.reference_elements)?;
    let v_true = DVector::from_iterator(
        fine.n_elements(),
        (0..fine.n_elements()).map(|j| {
            let (a, b) = fine.element(j);
            cfg.truth.mean_compliance(a, b, 4)
        }),
    );
    let clean = design_matrix(length, stations, &train, &fine)?.matrix * v_true;
    let sigma = mm_per_m_to_rad(cfg.sigma_mm_per_m);
    let data: Vec<DVector<f64>> = (0..cfg.replicates)
        .map(|rep| {
            let base = derive_seed(master_seed, rep as u64);
            let mut y = clean.clone();
            for s in 0..r_max {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, s as u64));
                for i in 0..k {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    y[s * k + i] += sigma * e;
                }
            }
            y
        })
        .collect();
    let truth_mid = cfg.truth.ei_at(0.5 * length);
    // correlation only; σ² does not enter the Tikhonov operator
    let unit = NoiseModel::white(1.0)?;

    let mut records = Vec::new();
    for &r in &cfg.sensor_counts {
        let rows = r * k;
        let lambda = match cfg.lambda {
            SweepLambda::Fixed { lambda } => lambda,
            SweepLambda::QuasiOptimality { reference_n, lo, hi, points, calibration } => {
                let a = design_matrix(length, &stations[..r], &train, &Mesh::uniform(length, reference_n)?)?.matrix;
                let prior = PriorSpec::new(
                    Parameterization::LinearCompliance,
                    cfg.order,
                    1.0,
                    DVector::zeros(reference_n),
                )?;
                let grid = relative_lambda_grid(&a, &unit, &prior, lo, hi, points)?;
                let mut picks = data[..calibration]
                    .iter()
                    .map(|y| Ok(quasi_optimality_lambda(&a, &y.rows(0, rows).into_owned(), &unit, &prior, &grid)?.lambda))
                    .collect::<Result<Vec<f64>>>()?;
                picks.sort_by(f64::total_cmp);
                // lower median keeps the pick on the grid
                picks[(picks.len() - 1) / 2]
            }
        };
        let per_n: Vec<SweepRecord> = cfg
            .mesh_sizes
            .par_iter()
            .map(|&n| {
                let mesh = Mesh::uniform(length, n)?;
                let element = mesh.nearest_midpoint(0.5 * length);
                let a = design_matrix(length, &stations[..r], &train, &mesh)?.matrix;
                let solver = TikhonovSolver::new(&a, &unit, cfg.order, &DVector::zeros(n), lambda)?;
                let estimates: Vec<Option<f64>> = data
                    .iter()
                    .map(|y| {
                        let v = solver.solve(&y.rows(0, rows).into_owned())[element];
                        (v > 0.0 && v.is_finite()).then(|| 1.0 / v)
                    })
                    .collect();
                let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
                let failures = estimates.len() - ok.len();
                if failures as f64 > cfg.max_failure_rate * estimates.len() as f64 || ok.len() < 2 {
                    return Err(Error::Sweep(format!(
                        "N = {n}, R = {r}: {failures} of {} inversions failed",
                        estimates.len()
                    )));
                }
                let (rmse, bias2, variance, mse_se) = moments(&ok, truth_mid);
                Ok(SweepRecord {
                    n_elements: n,
                    n_sensors: r,
                    lambda,
                    element,
                    estimates,
                    truth: truth_mid,
                    rmse,
                    bias2,
                    variance,
                    mse_se,
                    failures,
                })
            })
            .collect::<Result<_>>()?;
        records.extend(per_n);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_decompose() {
        let e = [1.0, 2.0, 3.0, 6.0];
        let (rmse, bias2, var, se) = moments(&e, 2.0);
        // mean 3, bias² 1, unbiased variance 14/3, mse 18/4
        assert!((bias2 - 1.0).abs() < 1e-15);
        assert!((var - 14.0 / 3.0).abs() < 1e-14);
        assert!((rmse * rmse - 4.5).abs() < 1e-14);
        assert!(se > 0.0);
    }

    #[test]
    fn noiseless_constant_truth_is_recovered() {
        let cfg = BiasVarianceConfig {
            truth: SmoothDip { base_ei: 5e9, depth: 0.0, center: 10.0, width: 1.0 },
            sensor_counts: vec![1, 2],
            mesh_sizes: vec![8, 20],
            n_positions: 40,
            sigma_mm_per_m: 0.0,
            replicates: 3,
            lambda: SweepLambda::Fixed { lambda: 1e-30 },
            reference_elements: 200,
            ..Default::default()
        };
        for rec in bias_variance_sweep(&cfg, 5).unwrap() {
            assert!(rec.rmse / rec.truth < 1e-8, "{rec:?}");
            assert_eq!(rec.failures, 0);
        }
    }

    #[test]
    fn too_many_failures_is_a_sweep_error() {
        let cfg = BiasVarianceConfig {
            sensor_counts: vec![1],
            mesh_sizes: vec![64],
            n_positions: 30,
            sigma_mm_per_m: 5.0,
            replicates: 20,
            lambda: SweepLambda::Fixed { lambda: 1e-40 },
            reference_elements: 200,
            ..Default::default()
        };
        assert!(matches!(bias_variance_sweep(&cfg, 1), Err(Error::Sweep(_)) | Err(Error::Identifiability { .. })));
    }

    #[test]
    fn bad_config_is_rejected() {
        let cfg = BiasVarianceConfig { sensor_counts: vec![5], ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Validation(_))));
    }
}
