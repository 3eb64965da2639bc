//! Penalized problems whose forward map is solved iteratively, optionally
//! with rotational spring stiffnesses as extra hyperparameters.

use std::sync::Arc;

use nalgebra::DVector;

use super::gauss_newton::{gauss_newton_map, GnControls, GnReport, ParamMap};
use super::hyper::HyperProblem;
use super::linear::PenalizedFit;
use super::{NoiseModel, Parameterization, PriorSpec};
use crate::assembly::{difference_operator, Mesh};
use crate::beam::{FeForward, ForwardModel};
use crate::error::{Error, Result};
use crate::linalg::{log_det, spd_factor};

enum Source {
    Fixed(Arc<dyn ForwardModel>),
    Springs { base: FeForward, mesh: Mesh, nodes: Vec<usize> },
}

/// Gauss–Newton MAP at each `λ`, with the Laplace log-determinant at the mode.
pub struct NonlinearProblem {
    source: Source,
    map: ParamMap,
    y: DVector<f64>,
    /// Correlation structure only; `σ²` is taken as 1 inside fits.
    unit_noise: NoiseModel,
    order: usize,
    center: DVector<f64>,
    controls: GnControls,
    log_det_gamma: f64,
    log_det_ddt: f64,
    lambda_scale: f64,
}

impl NonlinearProblem {
    pub fn new(
        forward: Arc<dyn ForwardModel>,
        parameterization: Parameterization,
        y: DVector<f64>,
        noise: &NoiseModel,
        order: usize,
        center: DVector<f64>,
        controls: GnControls,
    ) -> Result<Self> {
        NonlinearProblem::build(Source::Fixed(forward), parameterization, y, noise, order, center, controls)
    }

    /// Problem whose spring stiffnesses at `nodes` are free hyperparameters.
    #[allow(clippy::too_many_arguments)]
    pub fn with_springs(
        base: FeForward,
        mesh: Mesh,
        nodes: Vec<usize>,
        parameterization: Parameterization,
        y: DVector<f64>,
        noise: &NoiseModel,
        order: usize,
        center: DVector<f64>,
        controls: GnControls,
    ) -> Result<Self> {
        NonlinearProblem::build(
            Source::Springs { base, mesh, nodes },
            parameterization,
            y,
            noise,
            order,
            center,
            controls,
        )
    }

    fn build(
        source: Source,
        parameterization: Parameterization,
        y: DVector<f64>,
        noise: &NoiseModel,
        order: usize,
        center: DVector<f64>,
        controls: GnControls,
    ) -> Result<Self> {
        let unit_noise = noise.with_sigma2(1.0)?;
        let d = difference_operator(order, center.len())?;
        let log_det_ddt = log_det(&spd_factor(&(&d.matrix * d.matrix.transpose()), "D Dᵀ")?);
        let w = unit_noise.whitener(y.len())?;
        let map = ParamMap::for_parameterization(parameterization);
        let mut p = NonlinearProblem {
            source,
            map,
            y,
            unit_noise,
            order,
            center,
            controls,
            log_det_gamma: w.log_det(),
            log_det_ddt,
            lambda_scale: 1.0,
        };
        let fwd = p.forward(&p.initial_springs())?;
        if fwd.n_obs() != p.y.len() || fwd.n_params() != p.center.len() {
            return Err(Error::shape("forward map, data and prior center disagree in size"));
        }
        let (_, j) = super::gauss_newton::forward_in_params(fwd.as_ref(), map, &p.center)?;
        let jw = w.whiten(&j);
        p.lambda_scale = (jw.transpose() * jw).trace() / d.gram().trace();
        Ok(p)
    }

    fn initial_springs(&self) -> Vec<f64> {
        match &self.source {
            Source::Fixed(_) => vec![],
            Source::Springs { base, nodes, .. } => nodes
                .iter()
                .map(|&n| match base.system().supports()[n].rotation {
                    crate::beam::RotationalRestraint::Spring(k) => k,
                    _ => 0.0,
                })
                .collect(),
        }
    }

    pub fn forward(&self, springs: &[f64]) -> Result<Arc<dyn ForwardModel>> {
        match &self.source {
            Source::Fixed(f) => {
                if !springs.is_empty() {
                    return Err(Error::model("this problem has no spring parameters"));
                }
                Ok(f.clone())
            }
            Source::Springs { base, mesh, nodes } => {
                if springs.len() != nodes.len() {
                    return Err(Error::shape(format!("{} spring values for {} springs", springs.len(), nodes.len())));
                }
                Ok(Arc::new(base.with_springs(mesh, nodes, springs)?))
            }
        }
    }

    pub fn map(&self) -> ParamMap {
        self.map
    }

    /// Full Gauss–Newton report at `(σ², τ)`.
    pub fn solve(&self, sigma2: f64, tau: f64, springs: &[f64]) -> Result<GnReport> {
        let fwd = self.forward(springs)?;
        let noise = self.unit_noise.with_sigma2(sigma2)?;
        let prior = PriorSpec::new(
            match self.map {
                ParamMap::Identity => Parameterization::LinearCompliance,
                ParamMap::Exp => Parameterization::LogLatent,
            },
            self.order,
            tau,
            self.center.clone(),
        )?;
        gauss_newton_map(fwd.as_ref(), self.map, &self.y, &noise, &prior, &self.center, &self.controls)
    }
}

impl HyperProblem for NonlinearProblem {
    fn n_obs(&self) -> usize {
        self.y.len()
    }
    fn n_params(&self) -> usize {
        self.center.len()
    }
    fn rank(&self) -> usize {
        self.center.len() - self.order
    }
    fn log_det_gamma(&self) -> f64 {
        self.log_det_gamma
    }
    fn log_det_ddt(&self) -> f64 {
        self.log_det_ddt
    }
    fn lambda_scale(&self) -> f64 {
        self.lambda_scale
    }
    fn n_springs(&self) -> usize {
        match &self.source {
            Source::Fixed(_) => 0,
            Source::Springs { nodes, .. } => nodes.len(),
        }
    }
    fn fit(&self, lambda: f64, springs: &[f64]) -> Result<PenalizedFit> {
        // with σ² = 1 and τ = λ the mode and B = JᵀΓ⁻¹J + λDᵀD are those of λ
        let rep = self.solve(1.0, lambda, springs)?;
        let chol = spd_factor(&rep.hessian, "Laplace Hessian")?;
        Ok(PenalizedFit {
            lambda,
            misfit: rep.misfit,
            roughness: rep.roughness,
            logdet_b: log_det(&chol),
            b: rep.hessian,
            params: rep.params,
            converged: rep.converged,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{AdjointJacobian, AxleTrain, BeamSystem, Support};
    use crate::inference::hyper::{maximize_evidence, SearchControls};
    use crate::linalg::linspace;

    #[test]
    fn spring_is_recovered_from_noise_free_data() {
        let truth_k = 4e8;
        let sys = BeamSystem::new(
            vec![18.0, 18.0],
            vec![Support::spring(truth_k), Support::PINNED, Support::spring(truth_k)],
            None,
        )
        .unwrap();
        let mesh = Mesh::uniform(36.0, 6).unwrap();
        let train = AxleTrain::point_load(2.4e4, linspace(5.0, 30.0, 26)).unwrap();
        let fwd = FeForward::new(&sys, &mesh, &[14.0, 22.0], &train, Arc::new(AdjointJacobian)).unwrap();
        let v = DVector::from_element(6, 1e-10);
        let y = fwd.rotations(&v).unwrap();
        let start = fwd.with_springs(&mesh, &[0, 2], &[1e9, 1e9]).unwrap();
        let noise = NoiseModel::white(1.0).unwrap();
        let p = NonlinearProblem::with_springs(
            start,
            mesh,
            vec![0, 2],
            Parameterization::LogLatent,
            y + DVector::from_fn(52, |i, _| 1e-9 * ((i * 31) as f64).sin()),
            &noise,
            2,
            DVector::from_element(6, (1e-10f64).ln()),
            GnControls::default(),
        )
        .unwrap();
        let est = maximize_evidence(&p, None, &[1e9, 1e9], &SearchControls::default()).unwrap();
        for k in &est.springs {
            assert!((k / truth_k - 1.0).abs() < 0.2, "{k}");
        }
    }
}
