//! Joint optimization for self-sustainable, information-bearing RIS nodes
//! that backscatter secondary data over a primary transmitter's signal in an
//! underlay cognitive-radio network with uplink NOMA decoding at the access
//! point.
//!
//! The crate is layered bottom-up:
//!
//! * [`conic`]: a small dense complex SDP solver and Hermitian eigen helpers.
//! * [`channel`]: geometry drops, path loss and Rician fading.
//! * [`system`]: decision variables and every physical quantity of the model
//!   (harvested power, SINRs, weighted sum spectral efficiency, constraints).
//! * [`fp`]: Lagrangian-dual and quadratic-transform surrogate.
//! * [`refl`], [`beam`], [`ps`]: the three block subproblems.
//! * [`bcd`]: the outer block-coordinate-ascent loop.
//! * [`baselines`]: SUD, TDMA, 2-bit phase and active-antenna benchmarks.
//! * [`experiment`]: config files, Monte-Carlo sweeps and CSV output.

pub mod baselines;
pub mod bcd;
pub mod beam;
pub mod channel;
pub mod conic;
pub mod error;
pub mod experiment;
pub mod fp;
pub mod linalg;
pub mod ps;
pub mod refl;
pub mod system;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
