//! Configuration, measurement ingestion, orchestration and export.

mod config;
mod export;
mod ingest;
mod run;
mod simulate;

pub use config::*;
pub use export::*;
pub use ingest::*;
pub use run::*;
pub use simulate::*;
