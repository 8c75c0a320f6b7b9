//! Exact analysis of interval exchange transformations and their cyclic
//! skew-product extensions: languages and Rauzy graphs of natural codings,
//! orbit-connection scans, minimality verdicts with machine-checkable
//! evidence, closed-form gcd criteria, unique-ergodicity advisories, and
//! floating-point probes kept strictly outside the exact core.

pub mod error;
pub mod field;
pub mod iet;

pub use error::{Error, Result};
