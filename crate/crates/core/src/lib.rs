//! Behavioral simulator of a memristor-crossbar MMSE-SIC massive MIMO detector.
//!
//! The crate is organised the way the hardware is:
//!
//! - [`mimo`]: uplink system model, QAM constellations and channel draws.
//! - [`sic`]: exact digital MMSE-SIC, used as the reference oracle.
//! - [`crossbar`]: conductance mapping, quantization and the steady state of
//!   the matrix-computing module.
//! - [`slicer`]: comparator bank plus multiplexer slicer, in the
//!   directly-select and indirectly-select structures.
//! - [`detector`]: K crossbar stages and 2K slicers wired into a detector.
//! - [`perf`]: convergence time, equivalent speed, energy and efficiency.
//! - [`harness`]: Monte Carlo BER sweeps, demo trace and report emission.

pub mod crossbar;
pub mod detector;
mod error;
pub mod harness;
pub mod mimo;
pub mod perf;
pub mod sic;
pub mod slicer;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;
/// Dense real vector.
pub type RVector = nalgebra::DVector<f64>;
