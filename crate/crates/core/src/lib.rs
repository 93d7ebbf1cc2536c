//! Air-to-ground millimetre-wave channel toolkit.
//!
//! * [`scene`]: terrain, buildings, foliage, materials and the four seeded
//!   scenarios (over sea, rural, suburban, urban) plus UAV trajectories.
//! * [`raytrace`]: image-method multipath search with Fresnel reflection,
//!   knife-edge diffraction, dipole patterns and foliage loss.
//! * [`analytic`]: free-space, two-ray and critical-distance references.
//! * [`metrics`]: channel impulse responses, narrowband RSS, RMS delay spread, CDFs.
//! * [`sounder`]: PN-correlation channel sounder model with squaring CFO
//!   estimation and matched-filter CIR recovery.
//! * [`campaign`]: config parsing, parallel sweeps and CSV output.

// `!(x > 0.0)` is used on purpose to reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod campaign;
pub mod geometry;
pub mod metrics;
pub mod raytrace;
pub mod rng;
pub mod scene;
pub mod sounder;
pub mod textfmt;

/// m/s
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// F/m
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
