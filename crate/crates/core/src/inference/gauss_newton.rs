//! Damped Gauss–Newton MAP estimation for nonlinear forward maps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{NoiseModel, Parameterization, PriorSpec};
use crate::beam::ForwardModel;
use crate::error::{Error, Result};
use crate::linalg::{norm2, spd_factor, symmetrize};

/// Map from inversion parameters `p` to compliance `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamMap {
    Identity,
    /// `v = exp(p)`.
    Exp,
}

impl ParamMap {
    pub fn for_parameterization(p: Parameterization) -> Self {
        match p {
            Parameterization::LinearCompliance => ParamMap::Identity,
            Parameterization::LogLatent => ParamMap::Exp,
        }
    }

    pub fn to_compliance(&self, p: &DVector<f64>) -> DVector<f64> {
        match self {
            ParamMap::Identity => p.clone(),
            ParamMap::Exp => p.map(f64::exp),
        }
    }

    /// `dv/dp` (diagonal).
    pub fn derivative(&self, p: &DVector<f64>) -> DVector<f64> {
        match self {
            ParamMap::Identity => DVector::from_element(p.len(), 1.0),
            ParamMap::Exp => p.map(f64::exp),
        }
    }
}

/// Evaluates the forward map and its Jacobian in parameter space.
pub fn forward_in_params(
    forward: &dyn ForwardModel,
    map: ParamMap,
    p: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let v = map.to_compliance(p);
    let f = forward.rotations(&v)?;
    let mut j = forward.jacobian(&v)?;
    let dv = map.derivative(p);
    for (c, s) in dv.iter().enumerate() {
        j.column_mut(c).scale_mut(*s);
    }
    Ok((f, j))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnControls {
    pub max_iter: usize,
    /// Stop when the Newton decrement falls below `rtol · Φ`.
    pub rtol: f64,
    /// Stop when the Newton step is below `xtol` relative to the iterate.
    pub xtol: f64,
    /// Initial Levenberg–Marquardt damping; 0 starts with a pure Gauss–Newton step.
    pub damping: f64,
}

impl Default for GnControls {
    fn default() -> Self {
        GnControls {
            max_iter: 200,
            rtol: 1e-12,
            xtol: 1e-10,
            damping: 0.0,
        }
    }
}

/// Outcome of [`gauss_newton_map`].
#[derive(Debug, Clone)]
pub struct GnReport {
    /// MAP (or best iterate) in parameter space.
    pub params: DVector<f64>,
    /// Negative log-posterior at `params`, up to a constant.
    pub objective: f64,
    /// `‖W(F − y)‖²`.
    pub misfit: f64,
    /// `‖D(p − c)‖²`.
    pub roughness: f64,
    /// Gauss–Newton Hessian `(1/σ²) JᵀΓ⁻¹J + τ DᵀD` at `params`.
    pub hessian: DMatrix<f64>,
    /// Jacobian (parameter space) at `params`.
    pub jacobian: DMatrix<f64>,
    pub predicted: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    /// Damping used for every attempted step.
    pub damping_trace: Vec<f64>,
}

struct State {
    p: DVector<f64>,
    pred: DVector<f64>,
    misfit: f64,
    roughness: f64,
    phi: f64,
    g: DVector<f64>,
    h: DMatrix<f64>,
    j: DMatrix<f64>,
}

/// MAP of `Φ(p) = ‖F(v(p)) − y‖²_{Γ⁻¹} / (2σ²) + τ/2 ‖D(p − c)‖²`.
///
/// Steps solve `(H + μ diag H) δ = −g`; μ grows on rejection and shrinks
/// on success. Failure to converge is reported through the flag, not an error.
pub fn gauss_newton_map(
    forward: &dyn ForwardModel,
    map: ParamMap,
    y: &DVector<f64>,
    noise: &NoiseModel,
    prior: &PriorSpec,
    init: &DVector<f64>,
    controls: &GnControls,
) -> Result<GnReport> {
    if init.len() != forward.n_params() || prior.n() != init.len() {
        return Err(Error::shape(format!(
            "initial point has {} entries, forward map has {} parameters, prior has {}",
            init.len(),
            forward.n_params(),
            prior.n()
        )));
    }
    if y.len() != forward.n_obs() {
        return Err(Error::shape(format!("y has {} rows, forward map has {}", y.len(), forward.n_obs())));
    }
    if init.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("initial point must be finite"));
    }
    let whitener = noise.whitener(y.len())?;
    let d = prior.difference().matrix;
    let dtd = d.transpose() * &d;
    let (s2, tau) = (noise.sigma2(), prior.tau);

    let evaluate = |p: &DVector<f64>| -> Result<State> {
        let (f, j) = forward_in_params(forward, map, p)?;
        if f.iter().chain(j.iter()).any(|x| !x.is_finite()) {
            return Err(Error::numeric("forward map returned non-finite values"));
        }
        let r = whitener.whiten_vec(&(&f - y));
        let jw = whitener.whiten(&j);
        let dp = p - &prior.center;
        let misfit = norm2(&r);
        let roughness = norm2(&(&d * &dp));
        let g = jw.transpose() * &r / s2 + &dtd * &dp * tau;
        let h = symmetrize(&(jw.transpose() * &jw / s2 + &dtd * tau));
        Ok(State {
            p: p.clone(),
            pred: f,
            misfit,
            roughness,
            phi: 0.5 * misfit / s2 + 0.5 * tau * roughness,
            g,
            h,
            j,
        })
    };

    let mut st = evaluate(init)?;
    let mut mu = controls.damping;
    let mut trace = vec![st.phi];
    let mut damping_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < controls.max_iter {
        let chol = spd_factor(&st.h, "Gauss–Newton Hessian")?;
        let newton = chol.solve(&st.g);
        let decrement = st.g.dot(&newton);
        let step_small = newton.amax() <= controls.xtol * st.p.amax().max(f64::MIN_POSITIVE);
        if decrement <= controls.rtol * st.phi.abs() || step_small || decrement == 0.0 {
            converged = true;
            break;
        }

        // inner loop: increase damping until the objective does not rise
        let mut accepted = false;
        for _ in 0..60 {
            damping_trace.push(mu);
            let mut hd = st.h.clone();
            for i in 0..hd.nrows() {
                hd[(i, i)] *= 1.0 + mu;
            }
            let delta = -spd_factor(&hd, "damped Hessian")?.solve(&st.g);
            let trial = &st.p + &delta;
            match evaluate(&trial) {
                Ok(next) if next.phi <= st.phi => {
                    st = next;
                    mu /= 3.0;
                    accepted = true;
                    break;
                }
                Ok(_) | Err(Error::Domain(_)) | Err(Error::Model(_)) => {
                    mu = (mu * 4.0).max(1e-3);
                }
                Err(e) => return Err(e),
            }
        }
        if !accepted {
            break;
        }
        iterations += 1;
        trace.push(st.phi);
    }

    Ok(GnReport {
        params: st.p,
        objective: st.phi,
        misfit: st.misfit,
        roughness: st.roughness,
        hessian: st.h,
        jacobian: st.j,
        predicted: st.pred,
        iterations,
        converged,
        trace,
        damping_trace,
    })
}
