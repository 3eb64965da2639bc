//! Run configuration in TOML with sections `[system] [mesh] [sensors]
//! [loads] [noise] [prior] [hyper] [output]` and the optional `[truth]`,
//! `[ingest]`, `[study.noise]` and `[study.bv]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{build_mesh, Mesh, MeshSpec};
use crate::beam::{validate_layout, AxleTrain, BeamSystem, RotationalRestraint, SensorStation, Support};
use crate::diagnostics::BiasVarianceConfig;
use crate::error::{Error, Result};
use crate::inference::{Correlation, Levels, NoiseModel, Parameterization, QuasiOptimalHyper, SearchControls};
use crate::linalg::linspace;
use crate::synthetic::{DamageZone, NoiseStudyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportKind {
    Pinned,
    Clamped,
    /// Vertically restrained node with a rotational spring.
    Spring,
    Free,
}

/// Spring stiffnesses: explicit values (N·m/rad, one per `spring` support)
/// or the keyword `"estimate"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpringSpec {
    Values(Vec<f64>),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub spans: Vec<f64>,
    /// One entry per span joint; all pinned when omitted.
    #[serde(default)]
    pub supports: Vec<SupportKind>,
    pub springs: Option<SpringSpec>,
    /// Starting values for estimated springs (N·m/rad).
    pub spring_init: Option<Vec<f64>>,
    pub load_path: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// Uniform elements per span.
    pub elements: Option<usize>,
    pub per_span: Option<Vec<usize>>,
    pub breakpoints: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorsSection {
    pub stations: Vec<SensorStation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadsSection {
    /// Axle offsets relative to the reference axle (m).
    #[serde(default = "default_offsets")]
    pub offsets: Vec<f64>,
    /// Axle loads (N); alternatively `mass_t` with `fractions`.
    pub loads: Option<Vec<f64>>,
    pub mass_t: Option<f64>,
    pub fractions: Option<Vec<f64>>,
    /// Reference-axle positions (m), or a uniform `sweep`.
    pub positions: Option<Vec<f64>>,
    pub sweep: Option<SweepGrid>,
}

fn default_offsets() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationKind {
    Identity,
    Ar1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma_mm_per_m: f64,
    /// Treat `σ²` as known; otherwise it is estimated with `τ`.
    #[serde(default = "yes")]
    pub known: bool,
    #[serde(default = "identity")]
    pub correlation: CorrelationKind,
    /// Lag-one correlation within each sensor's sweep.
    pub rho: Option<f64>,
}

fn yes() -> bool {
    true
}

fn identity() -> CorrelationKind {
    CorrelationKind::Identity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub parameterization: Parameterization,
    pub order: usize,
    /// Prior center as a uniform rigidity (N·m²); fitted from the data when omitted.
    pub center_ei: Option<f64>,
}

impl Default for PriorSection {
    fn default() -> Self {
        PriorSection {
            parameterization: Parameterization::LogLatent,
            order: 2,
            center_ei: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperSection {
    /// `fixed`, `evidence` or `quasi-optimality`.
    pub policy: String,
    /// Prior precision for the fixed policy.
    pub tau: Option<f64>,
    /// Band estimator; `lognormal` for the log-latent and `delta` for the
    /// linear parameterization when omitted.
    pub bands: Option<String>,
    pub levels: [f64; 2],
    /// `auto`, `analytic-ss` or `fe`.
    pub forward: String,
    /// `adjoint` or `central-difference`.
    pub jacobian: String,
    pub draws: Option<usize>,
    pub search: SearchControls,
    pub quasi_opt_lo: f64,
    pub quasi_opt_hi: f64,
    pub quasi_opt_points: usize,
}

impl Default for HyperSection {
    fn default() -> Self {
        let q = QuasiOptimalHyper::default();
        HyperSection {
            policy: "evidence".into(),
            tau: None,
            bands: None,
            levels: [0.75, 0.95],
            forward: "auto".into(),
            jacobian: "adjoint".into(),
            draws: None,
            search: SearchControls::default(),
            quasi_opt_lo: q.lo,
            quasi_opt_hi: q.hi,
            quasi_opt_points: q.points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: std::env::var_os("TILTEI_OUT").map_or_else(|| PathBuf::from("out"), PathBuf::from),
        }
    }
}

/// Ground truth for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    pub base_ei: f64,
    #[serde(default)]
    pub zones: Vec<DamageZone>,
    /// Spring stiffnesses used to simulate when `[system] springs = "estimate"`.
    pub springs: Option<Vec<f64>>,
    /// Elements of the truth projection mesh; the run mesh when omitted.
    pub elements: Option<usize>,
}

/// One vehicle passage recorded in a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingSpec {
    pub file: PathBuf,
    /// Vehicle speed (m/s).
    pub speed: f64,
    /// Reference-axle position at `t0` (m).
    pub start_offset: f64,
    /// `+1` or `-1`.
    #[serde(default = "plus_one")]
    pub direction: f64,
    /// Time at which the reference axle is at `start_offset`; first sample when omitted.
    pub t0: Option<f64>,
}

fn plus_one() -> f64 {
    1.0
}

/// Raw channels averaged into one composite channel, named after a sensor id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelGroup {
    pub sensor: String,
    pub channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub crossings: Vec<CrossingSpec>,
    /// Composite channels; each sensor id maps to itself when omitted.
    #[serde(default)]
    pub groups: Vec<ChannelGroup>,
    #[serde(default = "baseline")]
    pub baseline_s: f64,
    #[serde(default = "window")]
    pub window: [f64; 2],
    #[serde(default = "threshold")]
    pub xcorr_threshold: f64,
}

fn baseline() -> f64 {
    4.0
}

fn window() -> [f64; 2] {
    [5.0, 30.0]
}

fn threshold() -> f64 {
    0.85
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub noise: Option<NoiseStudyConfig>,
    pub bv: Option<BiasVarianceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub system: SystemSection,
    #[serde(default)]
    pub mesh: MeshSection,
    pub sensors: SensorsSection,
    pub loads: LoadsSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub hyper: HyperSection,
    #[serde(default)]
    pub output: OutputSection,
    pub truth: Option<TruthSection>,
    pub ingest: Option<IngestSection>,
    #[serde(default)]
    pub study: StudySection,
    /// sha256 of the bytes the config was parsed from.
    #[serde(skip)]
    pub source_hash: Option<String>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parse and validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text, &path.display().to_string())?;
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    Ok(cfg)
}

/// Parse and validate configuration text; `origin` names it in errors.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    cfg.source_hash = Some(sha256_hex(text.as_bytes()));
    cfg.validate()?;
    Ok(cfg)
}

/// The parts of a configuration file the studies read; other sections are ignored.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct StudyFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub output: OutputSection,
}

pub fn load_study_config(path: &Path) -> Result<StudyFile> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

impl RunConfig {
    /// Hash of the source bytes, or of the canonical TOML for built configs.
    pub fn provenance_hash(&self) -> String {
        self.source_hash.clone().unwrap_or_else(|| {
            sha256_hex(toml::to_string(self).unwrap_or_default().as_bytes())
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn estimate_springs(&self) -> bool {
        matches!(&self.system.springs, Some(SpringSpec::Keyword(k)) if k == "estimate")
    }

    pub fn spring_count(&self) -> usize {
        self.system.supports.iter().filter(|s| **s == SupportKind::Spring).count()
    }

    /// Spring values used to build the system: the configured values,
    /// the initial guesses when estimating, or `springs_override`.
    pub fn build_system_with(&self, springs_override: Option<&[f64]>) -> Result<BeamSystem> {
        let n_nodes = self.system.spans.len() + 1;
        let kinds = if self.system.supports.is_empty() {
            vec![SupportKind::Pinned; n_nodes]
        } else {
            self.system.supports.clone()
        };
        let default_springs;
        let springs: &[f64] = match (springs_override, &self.system.springs) {
            (Some(s), _) => s,
            (None, Some(SpringSpec::Values(v))) => v,
            (None, Some(SpringSpec::Keyword(_))) => {
                default_springs = self
                    .system
                    .spring_init
                    .clone()
                    .unwrap_or_else(|| vec![(self.hyper.search.spring_lo * self.hyper.search.spring_hi).sqrt(); self.spring_count()]);
                &default_springs
            }
            (None, None) => &[],
        };
        let mut it = springs.iter();
        let mut supports = Vec::with_capacity(kinds.len());
        for k in &kinds {
            supports.push(match k {
                SupportKind::Pinned => Support::PINNED,
                SupportKind::Clamped => Support::clamped(),
                SupportKind::Free => Support::FREE,
                SupportKind::Spring => Support::spring(
                    *it.next().ok_or_else(|| Error::domain("fewer spring values than spring supports"))?,
                ),
            });
        }
        BeamSystem::new(
            self.system.spans.clone(),
            supports,
            self.system.load_path.map(|p| (p[0], p[1])),
        )
    }

    pub fn build_system(&self) -> Result<BeamSystem> {
        self.build_system_with(None)
    }

    pub fn mesh_spec(&self) -> Result<MeshSpec> {
        let m = &self.mesh;
        match (m.elements, &m.per_span, &m.breakpoints) {
            (Some(n), None, None) => Ok(MeshSpec::Uniform(n)),
            (None, Some(c), None) => Ok(MeshSpec::PerSpan(c.clone())),
            (None, None, Some(b)) => Ok(MeshSpec::Explicit(b.clone())),
            (None, None, None) => Ok(MeshSpec::Uniform(10)),
            _ => Err(Error::domain("[mesh] takes exactly one of elements, per_span or breakpoints")),
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        build_mesh(&self.build_system()?, &self.mesh_spec()?)
    }

    pub fn positions(&self) -> Result<Vec<f64>> {
        match (&self.loads.positions, &self.loads.sweep) {
            (Some(p), None) => Ok(p.clone()),
            (None, Some(g)) => {
                if g.count == 0 || !(g.end >= g.start) {
                    return Err(Error::domain("[loads] sweep needs count > 0 and end >= start"));
                }
                Ok(linspace(g.start, g.end, g.count))
            }
            _ => Err(Error::domain("[loads] takes exactly one of positions or sweep")),
        }
    }

    pub fn build_train(&self) -> Result<AxleTrain> {
        let l = &self.loads;
        let positions = self.positions()?;
        match (&l.loads, l.mass_t, &l.fractions) {
            (Some(p), None, None) => AxleTrain::new(l.offsets.clone(), p.clone(), positions),
            (None, Some(m), f) => {
                let even = vec![1.0; l.offsets.len()];
                AxleTrain::from_mass(m, l.offsets.clone(), f.as_deref().unwrap_or(&even), positions)
            }
            _ => Err(Error::domain("[loads] takes either loads or mass_t (with optional fractions)")),
        }
    }

    pub fn sensors(&self) -> &[SensorStation] {
        &self.sensors.stations
    }

    pub fn levels(&self) -> Result<Levels> {
        Levels::new(self.hyper.levels[0], self.hyper.levels[1])
    }

    pub fn correlation(&self) -> Correlation {
        match self.noise.correlation {
            CorrelationKind::Identity => Correlation::Identity,
            CorrelationKind::Ar1 => Correlation::Ar1 {
                rho: self.noise.rho.unwrap_or(0.0),
                block: self.positions().map_or(1, |p| p.len().max(1)),
            },
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(crate::beam::mm_per_m_to_rad(self.noise.sigma_mm_per_m).powi(2), self.correlation())
    }

    pub fn band_name(&self) -> String {
        self.hyper.bands.clone().unwrap_or_else(|| match self.prior.parameterization {
            Parameterization::LogLatent => "lognormal".into(),
            Parameterization::LinearCompliance => "delta".into(),
        })
    }

    /// Every semantic problem at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        let mut note = |r: Result<()>| {
            if let Err(e) = r {
                match e {
                    Error::Validation(list) => problems.extend(list),
                    other => problems.push(other.to_string()),
                }
            }
        };
        let n_nodes = self.system.spans.len() + 1;
        let supports_ok = self.system.supports.is_empty() || self.system.supports.len() == n_nodes;
        if !supports_ok {
            note(Err(Error::domain(format!(
                "[system] supports lists {} nodes, {} spans need {n_nodes}",
                self.system.supports.len(),
                self.system.spans.len()
            ))));
        }
        let springs_ok = match &self.system.springs {
            Some(SpringSpec::Keyword(k)) if k != "estimate" => {
                note(Err(Error::domain(format!("[system] springs must be a list or \"estimate\", got \"{k}\""))));
                false
            }
            Some(SpringSpec::Values(v)) if v.len() != self.spring_count() => {
                note(Err(Error::domain(format!(
                    "[system] {} spring values for {} spring supports",
                    v.len(),
                    self.spring_count()
                ))));
                false
            }
            None if self.spring_count() > 0 => {
                note(Err(Error::domain("[system] spring supports need springs = [..] or \"estimate\"")));
                false
            }
            _ => true,
        };
        if self.estimate_springs() && self.spring_count() == 0 {
            note(Err(Error::domain("[system] springs = \"estimate\" but no support is of kind spring")));
        }
        let init_ok = match &self.system.spring_init {
            Some(init) if init.len() != self.spring_count() => {
                note(Err(Error::domain("[system] spring_init must give one value per spring support")));
                false
            }
            _ => true,
        };
        let system = if supports_ok && springs_ok && init_ok {
            match self.build_system() {
                Ok(s) => Some(s),
                Err(e) => {
                    note(Err(e));
                    None
                }
            }
        } else {
            None
        };
        match self.mesh_spec() {
            Ok(spec) => {
                if let Some(s) = &system {
                    note(build_mesh(s, &spec).map(|_| ()));
                }
            }
            Err(e) => note(Err(e)),
        }
        if self.sensors.stations.is_empty() {
            note(Err(Error::domain("[sensors] at least one station is required")));
        }
        if let Some(s) = &system {
            note(validate_layout(&self.sensors.stations, s));
        }
        let ids: Vec<&str> = self.sensors.stations.iter().map(|s| s.id.as_str()).collect();
        for (i, id) in ids.iter().enumerate() {
            if ids[..i].contains(id) {
                note(Err(Error::domain(format!("[sensors] duplicate station id '{id}'"))));
            }
        }
        match self.build_train() {
            Ok(t) => {
                if let Some(s) = &system {
                    let (a, b) = s.load_path();
                    if let Some(z) = t.positions.iter().find(|z| !(**z >= a && **z <= b)) {
                        note(Err(Error::domain(format!(
                            "[loads] position {z} m lies outside the load path [{a}, {b}]"
                        ))));
                    }
                }
            }
            Err(e) => note(Err(e)),
        }
        if !(self.noise.sigma_mm_per_m > 0.0 && self.noise.sigma_mm_per_m.is_finite()) {
            note(Err(Error::domain("[noise] sigma_mm_per_m must be positive")));
        }
        if self.noise.correlation == CorrelationKind::Ar1 {
            match self.noise.rho {
                Some(r) if r > -1.0 && r < 1.0 => {}
                _ => note(Err(Error::domain("[noise] ar1 correlation needs rho in (-1, 1)"))),
            }
        }
        if self.prior.order > 2 {
            note(Err(Error::domain("[prior] order must be 0, 1 or 2")));
        }
        if let Some(c) = self.prior.center_ei {
            if !(c > 0.0 && c.is_finite()) {
                note(Err(Error::domain("[prior] center_ei must be positive")));
            }
        }
        let registry_checks: [(&str, Vec<&str>, &str); 4] = [
            ("policy", vec!["fixed", "evidence", "quasi-optimality"], self.hyper.policy.as_str()),
            ("forward", vec!["auto", "analytic-ss", "fe"], self.hyper.forward.as_str()),
            ("jacobian", vec!["adjoint", "central-difference"], self.hyper.jacobian.as_str()),
            ("bands", vec!["delta", "lognormal", "sampling"], &self.band_name()),
        ];
        for (key, allowed, got) in registry_checks {
            if !allowed.contains(&got) {
                note(Err(Error::domain(format!("[hyper] {key} = '{got}', expected one of {}", allowed.join(", ")))));
            }
        }
        if self.band_name() == "lognormal" && self.prior.parameterization == Parameterization::LinearCompliance {
            note(Err(Error::domain("[hyper] lognormal bands need the log-latent parameterization")));
        }
        if self.hyper.policy == "fixed" {
            match self.hyper.tau {
                Some(t) if t > 0.0 => {}
                _ => note(Err(Error::domain("[hyper] the fixed policy needs tau > 0"))),
            }
            if !self.noise.known {
                note(Err(Error::domain("[hyper] the fixed policy needs [noise] known = true")));
            }
        }
        if self.hyper.policy == "quasi-optimality" && self.estimate_springs() {
            note(Err(Error::domain("[hyper] springs can only be estimated with the evidence policy")));
        }
        note(self.levels().map(|_| ()));
        note(self.hyper.search.validate());
        if let Some(t) = &self.truth {
            if !(t.base_ei > 0.0) {
                note(Err(Error::domain("[truth] base_ei must be positive")));
            }
            if self.estimate_springs() && t.springs.as_ref().map(Vec::len) != Some(self.spring_count()) {
                note(Err(Error::domain("[truth] springs must give one value per spring support when estimating")));
            }
        }
        if let Some(ing) = &self.ingest {
            if ing.crossings.is_empty() {
                note(Err(Error::domain("[ingest] at least one crossing is required")));
            }
            for c in &ing.crossings {
                if !(c.speed > 0.0) || (c.direction != 1.0 && c.direction != -1.0) {
                    note(Err(Error::domain(format!(
                        "[ingest] crossing {}: speed must be positive and direction +1 or -1",
                        c.file.display()
                    ))));
                }
            }
            if !(ing.window[0] < ing.window[1]) || !(ing.baseline_s >= 0.0) {
                note(Err(Error::domain("[ingest] window must be increasing and baseline_s >= 0")));
            }
            if !(ing.xcorr_threshold >= -1.0 && ing.xcorr_threshold <= 1.0) {
                note(Err(Error::domain("[ingest] xcorr_threshold must lie in [-1, 1]")));
            }
            for g in &ing.groups {
                if !ids.contains(&g.sensor.as_str()) || g.channels.is_empty() {
                    note(Err(Error::domain(format!(
                        "[ingest] group '{}' must name a configured sensor and list channels",
                        g.sensor
                    ))));
                }
            }
        }
        if let Some(bv) = &self.study.bv {
            note(bv.validate());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Spring support node indices in system order.
    pub fn spring_nodes(&self) -> Result<Vec<usize>> {
        let s = self.build_system()?;
        Ok(s.supports()
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s.rotation, RotationalRestraint::Spring(_)))
            .map(|(i, _)| i)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
spans = [20.0]

[sensors]
stations = [{ id = "S1", position = 5.0 }, { id = "S2", position = 15.0 }]

[loads]
loads = [1e5]
sweep = { start = 0.5, end = 19.5, count = 20 }

[noise]
sigma_mm_per_m = 0.01
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL, "minimal").unwrap();
        assert_eq!(cfg.prior.order, 2);
        assert_eq!(cfg.levels().unwrap(), Levels::new(0.75, 0.95).unwrap());
        assert_eq!(cfg.hyper.policy, "evidence");
        assert_eq!(cfg.prior.parameterization, Parameterization::LogLatent);
        assert_eq!(cfg.band_name(), "lognormal");
        assert!(cfg.build_system().unwrap().is_simply_supported_span());
        assert_eq!(cfg.build_train().unwrap().n_positions(), 20);
        assert_eq!(cfg.build_mesh().unwrap().n_elements(), 10);
    }

    #[test]
    fn sensor_on_support_is_rejected() {
        let text = MINIMAL.replace("position = 15.0", "position = 20.0");
        match parse_config(&text, "bad") {
            Err(Error::Validation(v)) => assert!(v.iter().any(|m| m.contains("S2")), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_problems_are_reported_together() {
        let text = MINIMAL
            .replace("position = 15.0", "position = 25.0")
            .replace("sigma_mm_per_m = 0.01", "sigma_mm_per_m = -1.0");
        match parse_config(&text, "bad") {
            Err(Error::Validation(v)) => assert!(v.len() >= 2, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_a_location() {
        let err = parse_config("[system\nspans = 1", "broken.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("broken.toml") && msg.contains("line"), "{msg}");
        assert!(matches!(parse_config("[system]\nspanz = [1.0]", "x"), Err(Error::Parse { .. })));
    }

    #[test]
    fn estimate_keyword_enables_spring_search() {
        let text = MINIMAL
            .replace("spans = [20.0]", "spans = [20.0]\nsupports = [\"spring\", \"spring\"]\nsprings = \"estimate\"");
        let cfg = parse_config(&text, "springs").unwrap();
        assert!(cfg.estimate_springs());
        assert_eq!(cfg.spring_nodes().unwrap(), vec![0, 1]);
        assert!(!cfg.build_system().unwrap().is_simply_supported_span());
        let bad = MINIMAL.replace("spans = [20.0]", "spans = [20.0]\nsupports = [\"spring\", \"pinned\"]\nsprings = \"guess\"");
        assert!(matches!(parse_config(&bad, "x"), Err(Error::Validation(_))));
    }

    #[test]
    fn hash_follows_bytes() {
        let a = parse_config(MINIMAL, "a").unwrap();
        let b = parse_config(&format!("{MINIMAL}\n"), "b").unwrap();
        let c = parse_config(MINIMAL, "c").unwrap();
        assert_ne!(a.provenance_hash(), b.provenance_hash());
        assert_eq!(a.provenance_hash(), c.provenance_hash());
    }
}
