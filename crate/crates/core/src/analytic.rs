//! Closed-form propagation references: free space, the two-ray ground
//! reflection model and its critical distance.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::raytrace::{fresnel_reflection, Polarization};
use crate::scene::{wavelength, Permittivity};

/// Grid step used by [`extrema_count`], metres.
pub const EXTREMA_GRID_M: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub f_c: f64,
    pub h_t: f64,
    pub h_r: f64,
    pub g_t_dbi: f64,
    pub g_r_dbi: f64,
}

impl LinkBudget {
    /// 30 dBm, 2 m ground station, isotropic antennas.
    pub fn new(f_c: f64, h_r: f64) -> Self {
        Self {
            tx_power_dbm: 30.0,
            f_c,
            h_t: 2.0,
            h_r,
            g_t_dbi: 0.0,
            g_r_dbi: 0.0,
        }
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.f_c)
    }
}

/// Free-space path loss in dB.
pub fn fspl_db(d: f64, f_c: f64) -> f64 {
    20.0 * (4.0 * PI * d / wavelength(f_c)).log10()
}

/// Received power (dBm) of the direct ray plus a ground ray with reflection
/// coefficient `gamma`, at ground distance `d`.
pub fn two_ray_rss(lb: &LinkBudget, d: f64, gamma: Complex64) -> f64 {
    let lambda = lb.wavelength();
    let k = 2.0 * PI / lambda;
    let d1 = d.hypot(lb.h_t - lb.h_r);
    let d2 = d.hypot(lb.h_t + lb.h_r);
    let direct = Complex64::from_polar(1.0 / d1, -k * d1);
    let reflected = gamma * Complex64::from_polar(1.0 / d2, -k * d2);
    let field = lambda / (4.0 * PI) * (direct + reflected).norm();
    lb.tx_power_dbm + lb.g_t_dbi + lb.g_r_dbi + 20.0 * field.log10()
}

/// Vertical-polarization ground reflection coefficient at the specular
/// grazing angle `atan((h_t + h_r) / d)`.
pub fn ground_gamma(lb: &LinkBudget, d: f64, ground: Permittivity) -> Complex64 {
    fresnel_reflection(ground, (lb.h_t + lb.h_r).atan2(d), Polarization::Vertical)
}

/// [`two_ray_rss`] with the reflection coefficient of a real ground.
pub fn two_ray_rss_over(lb: &LinkBudget, d: f64, ground: Permittivity) -> f64 {
    two_ray_rss(lb, d, ground_gamma(lb, d, ground))
}

/// `(d, rss)` pairs from `d_min` to `d_max` in steps of `step`.
pub fn two_ray_curve(
    lb: &LinkBudget,
    d_min: f64,
    d_max: f64,
    step: f64,
    ground: Permittivity,
) -> Vec<(f64, f64)> {
    let n = ((d_max - d_min) / step + 1e-9).floor() as usize + 1;
    (0..n)
        .map(|i| {
            let d = d_min + i as f64 * step;
            (d, two_ray_rss_over(lb, d, ground))
        })
        .collect()
}

/// Distance beyond which the two-ray power falls as `d^-4`: `4 h_t h_r / lambda`.
pub fn critical_distance(h_t: f64, h_r: f64, lambda: f64) -> f64 {
    4.0 * h_t * h_r / lambda
}

/// Number of strict local minima of [`two_ray_rss`] sampled every
/// [`EXTREMA_GRID_M`] from `d_start` to `d_end`.
pub fn extrema_count(lb: &LinkBudget, d_start: f64, d_end: f64, gamma: Complex64) -> usize {
    let n = ((d_end - d_start) / EXTREMA_GRID_M + 1e-9).floor() as usize + 1;
    let mut count = 0;
    let mut prev2 = f64::NAN;
    let mut prev = f64::NAN;
    for i in 0..n {
        let v = two_ray_rss(lb, d_start + i as f64 * EXTREMA_GRID_M, gamma);
        if i >= 2 && prev < prev2 && prev < v {
            count += 1;
        }
        prev2 = prev;
        prev = v;
    }
    count
}
