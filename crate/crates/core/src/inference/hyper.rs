//! Hyperparameter problems, estimates and selection policies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evidence::{log_evidence_at, profiled_log_evidence};
use super::linear::{LinearProblem, PenalizedFit};
use crate::error::{Error, Result};
use crate::linalg::logspace;

/// A penalized least-squares problem that can be re-solved at any `λ`
/// (and, optionally, any set of boundary spring stiffnesses).
pub trait HyperProblem: Sync {
    fn n_obs(&self) -> usize;
    fn n_params(&self) -> usize;
    /// Rank of the roughness operator `D`.
    fn rank(&self) -> usize;
    fn log_det_gamma(&self) -> f64;
    fn log_det_ddt(&self) -> f64;
    /// Natural scale of `λ`, used to place default grids.
    fn lambda_scale(&self) -> f64;
    fn n_springs(&self) -> usize {
        0
    }
    fn fit(&self, lambda: f64, springs: &[f64]) -> Result<PenalizedFit>;
}

impl HyperProblem for LinearProblem {
    fn n_obs(&self) -> usize {
        LinearProblem::n_obs(self)
    }
    fn n_params(&self) -> usize {
        LinearProblem::n_params(self)
    }
    fn rank(&self) -> usize {
        LinearProblem::rank(self)
    }
    fn log_det_gamma(&self) -> f64 {
        LinearProblem::log_det_gamma(self)
    }
    fn log_det_ddt(&self) -> f64 {
        LinearProblem::log_det_ddt(self)
    }
    fn lambda_scale(&self) -> f64 {
        LinearProblem::lambda_scale(self)
    }
    fn fit(&self, lambda: f64, springs: &[f64]) -> Result<PenalizedFit> {
        if !springs.is_empty() {
            return Err(Error::model("a linear problem has no spring parameters"));
        }
        LinearProblem::fit(self, lambda)
    }
}

/// One evaluated point of a hyperparameter search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// `"lambda"`, `"tau"` or `"spring[i]"`.
    pub coordinate: String,
    pub value: f64,
    pub objective: f64,
}

/// Selected hyperparameters and the search that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperEstimate {
    pub method: String,
    pub sigma2: f64,
    pub tau: f64,
    pub lambda: f64,
    pub springs: Vec<f64>,
    /// Objective at the selected point (log-evidence, or the quasi-optimality
    /// criterion).
    pub objective: f64,
    pub trace: Vec<TracePoint>,
    /// Objective range over the search below tolerance.
    pub flat: bool,
    /// Optimum on the edge of the search domain.
    pub boundary: bool,
}

/// Grid and refinement settings for the hyperparameter searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchControls {
    /// `λ` grid bounds relative to the problem's `λ` scale.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub points: usize,
    /// Golden-section tolerance in `log10` units.
    pub tol: f64,
    pub spring_lo: f64,
    pub spring_hi: f64,
    pub spring_points: usize,
    /// Coordinate sweeps when springs are estimated.
    pub sweeps: usize,
    /// Objective ranges below this are flagged as flat.
    pub flat_tol: f64,
}

impl Default for SearchControls {
    fn default() -> Self {
        SearchControls {
            lambda_lo: 1e-10,
            lambda_hi: 1e2,
            points: 40,
            tol: 1e-4,
            spring_lo: 1e5,
            spring_hi: 1e12,
            spring_points: 15,
            sweeps: 3,
            flat_tol: 1e-6,
        }
    }
}

impl SearchControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_lo > 0.0 && self.lambda_hi > self.lambda_lo) {
            return Err(Error::domain("lambda search bounds must satisfy 0 < lo < hi"));
        }
        if !(self.spring_lo > 0.0 && self.spring_hi > self.spring_lo) {
            return Err(Error::domain("spring search bounds must satisfy 0 < lo < hi"));
        }
        if self.points < 3 || self.spring_points < 3 {
            return Err(Error::domain("search grids need at least three points"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("golden-section tolerance must be positive"));
        }
        Ok(())
    }
}

/// Maximize `f` over `[a, b]` by golden-section search; returns `(x, f(x))`
/// and appends every evaluation to `trace`.
pub(crate) fn golden_max(
    mut a: f64,
    mut b: f64,
    tol: f64,
    f: &dyn Fn(f64) -> f64,
    trace: &mut Vec<(f64, f64)>,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    trace.push((c, fc));
    trace.push((d, fd));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            trace.push((c, fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            trace.push((d, fd));
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid search followed by golden-section refinement between the grid
/// neighbours of the best point. Works in `log10` of the coordinate.
pub(crate) fn grid_then_golden(
    log_lo: f64,
    log_hi: f64,
    points: usize,
    tol: f64,
    f: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<(f64, f64, Vec<(f64, f64)>, bool)> {
    let grid: Vec<f64> = (0..points)
        .map(|i| log_lo + (log_hi - log_lo) * i as f64 / (points - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.par_iter().map(|&x| f(x)).collect();
    let mut trace: Vec<(f64, f64)> = grid.iter().copied().zip(values.iter().copied()).collect();
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .fold(None, |acc: Option<(usize, f64)>, (i, &v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((i, v)),
        })
        .ok_or_else(|| Error::numeric("hyperparameter objective is not finite anywhere on the grid"))?;
    let i = best.0;
    let boundary = i == 0 || i == points - 1;
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(points - 1)];
    let (x, v) = golden_max(lo, hi, tol, f, &mut trace);
    let (x, v) = if v >= best.1 { (x, v) } else { (grid[i], best.1) };
    Ok((x, v, trace, boundary))
}

fn flat(trace: &[TracePoint], tol: f64) -> bool {
    let finite = trace.iter().map(|t| t.objective).filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    hi - lo < tol
}

/// Empirical-Bayes search over `log λ` (and spring stiffnesses).
///
/// With `known_sigma2` the evidence is maximized over `τ = λ/σ²`; otherwise
/// `σ²` is profiled out in closed form at each `λ`, which yields the joint
/// maximizer over `(σ², τ)`.
pub fn maximize_evidence(
    problem: &dyn HyperProblem,
    known_sigma2: Option<f64>,
    spring_init: &[f64],
    controls: &SearchControls,
) -> Result<HyperEstimate> {
    controls.validate()?;
    if spring_init.len() != problem.n_springs() {
        return Err(Error::shape(format!(
            "{} initial spring values for {} springs",
            spring_init.len(),
            problem.n_springs()
        )));
    }
    if let Some(s2) = known_sigma2 {
        if !(s2 > 0.0) {
            return Err(Error::domain("known noise variance must be positive"));
        }
    }
    let scale = problem.lambda_scale();
    let log_lo = (scale * controls.lambda_lo).log10();
    let log_hi = (scale * controls.lambda_hi).log10();

    let objective = |lambda: f64, springs: &[f64]| -> f64 {
        let fit = match problem.fit(lambda, springs) {
            Ok(f) => f,
            Err(_) => return f64::NEG_INFINITY,
        };
        match known_sigma2 {
            Some(s2) => log_evidence_at(problem, &fit, s2, lambda / s2),
            None => profiled_log_evidence(problem, &fit).0,
        }
    };

    let mut springs = spring_init.to_vec();
    let mut trace = Vec::new();
    let mut boundary = false;
    let mut log_lambda = 0.0;
    let mut best = f64::NEG_INFINITY;
    let sweeps = if springs.is_empty() { 1 } else { controls.sweeps.max(1) };
    let lambda_name = if known_sigma2.is_some() { "tau" } else { "lambda" };
    let to_coord = |l: f64| match known_sigma2 {
        Some(s2) => l / s2,
        None => l,
    };

    for _ in 0..sweeps {
        let sp = springs.clone();
        let f = |x: f64| objective(10f64.powf(x), &sp);
        let (x, v, t, edge) = grid_then_golden(log_lo, log_hi, controls.points, controls.tol, &f)?;
        trace.extend(t.into_iter().map(|(x, o)| TracePoint {
            coordinate: lambda_name.into(),
            value: to_coord(10f64.powf(x)),
            objective: o,
        }));
        log_lambda = x;
        best = v;
        boundary = edge;
        for i in 0..springs.len() {
            let lambda = 10f64.powf(log_lambda);
            let base = springs.clone();
            let f = |x: f64| {
                let mut s = base.clone();
                s[i] = 10f64.powf(x);
                objective(lambda, &s)
            };
            let (x, v, t, edge) = grid_then_golden(
                controls.spring_lo.log10(),
                controls.spring_hi.log10(),
                controls.spring_points,
                controls.tol,
                &f,
            )?;
            trace.extend(t.into_iter().map(|(x, o)| TracePoint {
                coordinate: format!("spring[{i}]"),
                value: 10f64.powf(x),
                objective: o,
            }));
            if v >= best {
                springs[i] = 10f64.powf(x);
                best = v;
            }
            boundary |= edge;
        }
    }
    if !best.is_finite() {
        return Err(Error::numeric("evidence could not be evaluated at any candidate"));
    }

    let lambda = 10f64.powf(log_lambda);
    let fit = problem.fit(lambda, &springs)?;
    let (sigma2, objective_value) = match known_sigma2 {
        Some(s2) => (s2, log_evidence_at(problem, &fit, s2, lambda / s2)),
        None => {
            let (le, s2) = profiled_log_evidence(problem, &fit);
            (s2, le)
        }
    };
    Ok(HyperEstimate {
        method: "evidence".into(),
        sigma2,
        tau: lambda / sigma2,
        lambda,
        springs,
        objective: objective_value,
        flat: flat(&trace, controls.flat_tol),
        boundary,
        trace,
    })
}

/// Discrete quasi-optimality over an ascending `λ` grid: the `λ_i` minimizing
/// `‖m(λ_{i+1}) − m(λ_i)‖`, ties to the smaller `λ`.
pub fn quasi_optimality(
    problem: &dyn HyperProblem,
    grid: &[f64],
    known_sigma2: Option<f64>,
    springs: &[f64],
) -> Result<HyperEstimate> {
    if grid.len() < 20 {
        return Err(Error::domain(format!("quasi-optimality needs at least 20 grid points, got {}", grid.len())));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] <= 0.0 {
        return Err(Error::domain("quasi-optimality grid must be positive and strictly increasing"));
    }
    let fits: Vec<PenalizedFit> = grid
        .par_iter()
        .map(|&l| problem.fit(l, springs))
        .collect::<Result<_>>()?;
    let crit: Vec<f64> = fits.windows(2).map(|w| (&w[1].params - &w[0].params).norm()).collect();
    let (best, value) = crit
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &c)| if c < bv { (i, c) } else { (bi, bv) });
    let fit = &fits[best];
    let sigma2 = match known_sigma2 {
        Some(s2) => s2,
        None => fit.penalized() / (problem.n_obs() - (problem.n_params() - problem.rank())) as f64,
    };
    let lambda = grid[best];
    Ok(HyperEstimate {
        method: "quasi-optimality".into(),
        sigma2,
        tau: lambda / sigma2,
        lambda,
        springs: springs.to_vec(),
        objective: value,
        trace: grid
            .iter()
            .zip(&crit)
            .map(|(&l, &c)| TracePoint {
                coordinate: "lambda".into(),
                value: l,
                objective: c,
            })
            .collect(),
        flat: false,
        boundary: best == 0 || best == crit.len() - 1,
    })
}

/// How hyperparameters are chosen for an inversion.
pub trait HyperPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn select(&self, problem: &dyn HyperProblem, known_sigma2: Option<f64>, springs: &[f64]) -> Result<HyperEstimate>;
}

/// Use the configured `σ²` and `τ` as given.
#[derive(Debug, Clone, Copy)]
pub struct FixedHyper {
    pub tau: f64,
}

impl HyperPolicy for FixedHyper {
    fn name(&self) -> &str {
        "fixed"
    }

    fn select(&self, problem: &dyn HyperProblem, known_sigma2: Option<f64>, springs: &[f64]) -> Result<HyperEstimate> {
        let sigma2 = known_sigma2.ok_or_else(|| Error::model("the fixed policy needs a known noise variance"))?;
        if !(self.tau > 0.0) {
            return Err(Error::domain("the fixed policy needs a positive prior precision"));
        }
        let lambda = sigma2 * self.tau;
        let fit = problem.fit(lambda, springs)?;
        let objective = log_evidence_at(problem, &fit, sigma2, self.tau);
        Ok(HyperEstimate {
            method: self.name().into(),
            sigma2,
            tau: self.tau,
            lambda,
            springs: springs.to_vec(),
            objective,
            trace: vec![TracePoint {
                coordinate: "tau".into(),
                value: self.tau,
                objective,
            }],
            flat: false,
            boundary: false,
        })
    }
}

/// Empirical Bayes.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvidenceHyper {
    pub controls: SearchControls,
}

impl HyperPolicy for EvidenceHyper {
    fn name(&self) -> &str {
        "evidence"
    }

    fn select(&self, problem: &dyn HyperProblem, known_sigma2: Option<f64>, springs: &[f64]) -> Result<HyperEstimate> {
        maximize_evidence(problem, known_sigma2, springs, &self.controls)
    }
}

/// Quasi-optimality over a grid placed relative to the problem's `λ` scale.
#[derive(Debug, Clone, Copy)]
pub struct QuasiOptimalHyper {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for QuasiOptimalHyper {
    fn default() -> Self {
        QuasiOptimalHyper {
            lo: 1e-10,
            hi: 1e2,
            points: 61,
        }
    }
}

impl QuasiOptimalHyper {
    pub fn grid(&self, problem: &dyn HyperProblem) -> Vec<f64> {
        let s = problem.lambda_scale();
        logspace(s * self.lo, s * self.hi, self.points)
    }
}

impl HyperPolicy for QuasiOptimalHyper {
    fn name(&self) -> &str {
        "quasi-optimality"
    }

    fn select(&self, problem: &dyn HyperProblem, known_sigma2: Option<f64>, springs: &[f64]) -> Result<HyperEstimate> {
        if self.points < 2 || !(self.lo > 0.0 && self.hi > self.lo) {
            return Err(Error::domain("quasi-optimality grid bounds must satisfy 0 < lo < hi"));
        }
        quasi_optimality(problem, &self.grid(problem), known_sigma2, springs)
    }
}
