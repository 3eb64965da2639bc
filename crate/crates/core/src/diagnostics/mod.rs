mod fisher;
mod spectrum;
mod sweep;

pub use fisher::*;
pub use spectrum::*;
pub use sweep::*;
