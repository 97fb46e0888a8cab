//! Multichannel spatial features for target-speaker processing in reverberant
//! rooms.
//!
//! The crate covers the whole experiment loop: shoebox room impulse responses
//! from the image-source method, reverberant two-talker mixtures, the
//! inter-channel phase based spatial feature (SF), the RIR-convolved variant
//! (RSF) that folds the target's reflections back into the phase, oracle
//! dominance masks and discriminability metrics, and the file formats used by
//! the `rirsf` command-line driver.

pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod mixer;
pub mod par;
pub mod room;
pub mod seed;

pub use error::{Error, Result};
