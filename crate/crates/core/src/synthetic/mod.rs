//! Ground truth generation and simulated tilt data for desk studies.

mod noise_study;
mod simulate;
mod truth;

pub use noise_study::{damage_detected, noise_sweep_study, NoiseLevelResult, NoiseStudy, NoiseStudyConfig};
pub use simulate::{derive_seed, exact_rotations, simulate, SyntheticDataset};
pub use truth::{make_truth, DamageZone, TruthProfile};
