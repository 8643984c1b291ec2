//! Chaotic k-map compositions: orbit iteration at selectable precision,
//! Lyapunov and bifurcation analysis, a deep-zoom pseudo-random generator and
//! a statistical test battery.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod manifest;
pub mod maps;
pub mod numerics;
pub mod prng;
pub mod randtests;

pub use error::{Error, ErrorClass, Result};
pub use maps::{MapKind, Params};
pub use numerics::{PhaseValue, PrecisionMode, Seed};
