//! l1-recovery thresholds for compressed sensing.

pub mod error;
pub mod lp;
pub mod par;
pub mod recovery;
pub mod rng;
pub mod scalar_funcs;
pub mod thresholds;
pub mod width;

pub use error::{Error, Result};
pub use thresholds::ThresholdKind;
