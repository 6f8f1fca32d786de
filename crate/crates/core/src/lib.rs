//! Max-min fair resource allocation for a two-user rate-splitting multiple
//! access (RSMA) downlink with zero-forcing private precoders.
//!
//! The crate computes, in closed form, the split of the power budget between
//! the private and common streams, the division of the common rate between
//! the users, and which of RSMA, NOMA, SDMA or multicast transmission is
//! best. Brute-force validators in [`oracle`] check every closed form, and
//! [`harness`] reproduces rate-vs-SNR sweeps, strategy region maps and
//! timing runs.
//!
//! ```
//! use rsma_mmf::{beamform::effective_gains, channel::make_channel_pair, linalg::ComplexVec};
//! use rsma_mmf::allocator::{solve_mmf, Strategy};
//!
//! let h1 = ComplexVec::from_real(&[1.0, 0.0]).unwrap();
//! let h2 = ComplexVec::from_real(&[0.0, 1.0]).unwrap();
//! let gains = effective_gains(&make_channel_pair(h1, h2).unwrap());
//! let sol = solve_mmf(&gains, 10.0).unwrap();
//! assert_eq!(sol.strategy, Strategy::Sdma);
//! assert!((sol.mmf - 6f64.log2()).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod beamform;
pub mod channel;
pub mod cli;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod oracle;

pub use error::{Error, Result};

/// Power budget for an SNR in dB (unit noise power).
pub fn snr_db_to_power(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}
