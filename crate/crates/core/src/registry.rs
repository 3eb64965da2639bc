//! Named strategy tables selected from configuration at runtime.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::assembly::Mesh;
use crate::beam::{
    AdjointJacobian, AnalyticSpan, AxleTrain, BeamSystem, CentralDifference, FeForward, ForwardModel,
    JacobianStrategy,
};
use crate::error::{Error, Result};
use crate::inference::{
    BandEstimator, DeltaBand, EvidenceHyper, FixedHyper, HyperPolicy, LognormalBand, QuasiOptimalHyper,
    SamplingBand, SearchControls,
};

/// Knobs shared by the strategy factories. Each factory reads what it needs.
#[derive(Debug, Clone, Default)]
pub struct StrategyOptions {
    /// Prior precision for the fixed policy.
    pub tau: Option<f64>,
    pub search: SearchControls,
    pub quasi_opt: QuasiOptimalHyper,
    pub draws: Option<usize>,
    pub seed: u64,
}

type Factory<T> = Arc<dyn Fn(&StrategyOptions) -> Result<Arc<T>> + Send + Sync>;

/// Name to factory table for one strategy trait.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Adds or replaces the factory under `name`.
    pub fn register<F>(&mut self, name: &str, factory: F) -> &mut Self
    where
        F: Fn(&StrategyOptions) -> Result<Arc<T>> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Arc::new(factory));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn create(&self, name: &str, options: &StrategyOptions) -> Result<Arc<T>> {
        let factory = self.entries.get(name).ok_or_else(|| {
            Error::domain(format!("unknown {} '{name}', expected one of: {}", self.kind, self.names().join(", ")))
        })?;
        factory(options)
    }
}

pub fn hyper_policies() -> Registry<dyn HyperPolicy> {
    let mut r: Registry<dyn HyperPolicy> = Registry::new("hyperparameter policy");
    r.register("fixed", |o| {
        let tau = o.tau.ok_or_else(|| Error::domain("the fixed policy needs a prior precision tau"))?;
        Ok(Arc::new(FixedHyper { tau }))
    })
    .register("evidence", |o| Ok(Arc::new(EvidenceHyper { controls: o.search })))
    .register("quasi-optimality", |o| Ok(Arc::new(o.quasi_opt)));
    r
}

pub fn band_estimators() -> Registry<dyn BandEstimator> {
    let mut r: Registry<dyn BandEstimator> = Registry::new("band estimator");
    r.register("delta", |_| Ok(Arc::new(DeltaBand)))
        .register("lognormal", |_| Ok(Arc::new(LognormalBand)))
        .register("sampling", |o| {
            let mut s = SamplingBand { seed: o.seed, ..Default::default() };
            if let Some(d) = o.draws {
                s.draws = d;
            }
            Ok(Arc::new(s))
        });
    r
}

pub fn jacobian_strategies() -> Registry<dyn JacobianStrategy> {
    let mut r: Registry<dyn JacobianStrategy> = Registry::new("Jacobian strategy");
    r.register("adjoint", |_| Ok(Arc::new(AdjointJacobian)))
        .register("central-difference", |_| Ok(Arc::new(CentralDifference::default())));
    r
}

/// Builds the forward map for a system, mesh and measurement layout.
pub trait ForwardBuilder: Send + Sync {
    fn name(&self) -> &str;
    fn build(
        &self,
        system: &BeamSystem,
        mesh: &Mesh,
        positions: &[f64],
        train: &AxleTrain,
        jacobian: Arc<dyn JacobianStrategy>,
    ) -> Result<Arc<dyn ForwardModel>>;
}

/// Closed-form design matrix; simply supported single spans only.
pub struct AnalyticBuilder;

impl ForwardBuilder for AnalyticBuilder {
    fn name(&self) -> &str {
        "analytic-ss"
    }

    fn build(
        &self,
        system: &BeamSystem,
        mesh: &Mesh,
        positions: &[f64],
        train: &AxleTrain,
        _jacobian: Arc<dyn JacobianStrategy>,
    ) -> Result<Arc<dyn ForwardModel>> {
        if !system.is_simply_supported_span() {
            return Err(Error::model(
                "the analytic forward map needs a simply supported single span; use 'fe'",
            ));
        }
        Ok(Arc::new(AnalyticSpan::build(system.total_length(), positions, train, mesh)?))
    }
}

pub struct FeBuilder;

impl ForwardBuilder for FeBuilder {
    fn name(&self) -> &str {
        "fe"
    }

    fn build(
        &self,
        system: &BeamSystem,
        mesh: &Mesh,
        positions: &[f64],
        train: &AxleTrain,
        jacobian: Arc<dyn JacobianStrategy>,
    ) -> Result<Arc<dyn ForwardModel>> {
        Ok(Arc::new(FeForward::new(system, mesh, positions, train, jacobian)?))
    }
}

/// Analytic when the system allows it, finite elements otherwise.
pub struct AutoBuilder;

impl ForwardBuilder for AutoBuilder {
    fn name(&self) -> &str {
        "auto"
    }

    fn build(
        &self,
        system: &BeamSystem,
        mesh: &Mesh,
        positions: &[f64],
        train: &AxleTrain,
        jacobian: Arc<dyn JacobianStrategy>,
    ) -> Result<Arc<dyn ForwardModel>> {
        if system.is_simply_supported_span() {
            AnalyticBuilder.build(system, mesh, positions, train, jacobian)
        } else {
            FeBuilder.build(system, mesh, positions, train, jacobian)
        }
    }
}

pub fn forward_builders() -> Registry<dyn ForwardBuilder> {
    let mut r: Registry<dyn ForwardBuilder> = Registry::new("forward model");
    r.register("analytic-ss", |_| Ok(Arc::new(AnalyticBuilder)))
        .register("fe", |_| Ok(Arc::new(FeBuilder)))
        .register("auto", |_| Ok(Arc::new(AutoBuilder)));
    r
}
