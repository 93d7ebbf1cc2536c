//! Channel observables computed from traced paths.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::Vec3;
use crate::raytrace::PathComponent;
use crate::textfmt::g6;

/// Lowest reported RSS, relative to the transmit power.
pub const RSS_FLOOR_DB: f64 = -250.0;
/// Default power window for the RMS delay spread.
pub const DEFAULT_RMS_CUT_DB: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("channel impulse response has no paths")]
    EmptyCir,
    #[error("empirical CDF needs at least one value")]
    EmptySample,
    #[error("non-finite sample value {0}")]
    NonFinite(f64),
    #[error("power cut must be positive, got {0} dB")]
    BadCut(f64),
}

/// Multipath response at one transmitter/receiver geometry, sorted by delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    paths: Vec<PathComponent>,
    pub f_c: f64,
    pub tx: Vec3,
    pub rx: Vec3,
}

impl Cir {
    pub fn new(mut paths: Vec<PathComponent>, f_c: f64, tx: Vec3, rx: Vec3) -> Self {
        paths.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        Self { paths, f_c, tx, rx }
    }

    pub fn paths(&self) -> &[PathComponent] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn has_line_of_sight(&self) -> bool {
        self.paths.iter().any(|p| p.is_line_of_sight())
    }
}

/// Narrowband received power, or the absence of any path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rss {
    Dbm(f64),
    NoCoverage,
}

impl Rss {
    pub fn dbm(self) -> Option<f64> {
        match self {
            Rss::Dbm(v) => Some(v),
            Rss::NoCoverage => None,
        }
    }
}

impl fmt::Display for Rss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rss::Dbm(v) => f.write_str(&g6(*v)),
            Rss::NoCoverage => f.write_str("nan"),
        }
    }
}

/// Coherent phasor sum of all paths, `p_t + 20 log10 |sum a_p e^{j theta_p}|`,
/// clamped at [`RSS_FLOOR_DB`] below `p_t`.
pub fn narrowband_rss(cir: &Cir, p_t_dbm: f64) -> Rss {
    if cir.is_empty() {
        return Rss::NoCoverage;
    }
    let sum: Complex64 = cir.paths.iter().map(|p| p.phasor()).sum();
    let rel = 20.0 * sum.norm().log10();
    Rss::Dbm(p_t_dbm + rel.max(RSS_FLOOR_DB))
}

/// Power-weighted RMS delay spread (seconds) over the paths within `cut_db`
/// of the strongest one.
pub fn rms_delay_spread(cir: &Cir, cut_db: f64) -> Result<f64, MetricsError> {
    if cir.is_empty() {
        return Err(MetricsError::EmptyCir);
    }
    if !(cut_db > 0.0) {
        return Err(MetricsError::BadCut(cut_db));
    }
    let p_max = cir
        .paths
        .iter()
        .map(|p| p.amplitude * p.amplitude)
        .fold(0.0, f64::max);
    let floor = p_max * 10f64.powf(-cut_db / 10.0);
    let kept = || {
        cir.paths
            .iter()
            .map(|p| (p.amplitude * p.amplitude, p.delay))
            .filter(move |(pw, _)| *pw >= floor)
    };
    let total: f64 = kept().map(|(pw, _)| pw).sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    // Moments about the first arrival keep the subtraction well conditioned.
    let t0 = kept().map(|(_, t)| t).fold(f64::INFINITY, f64::min);
    let mean = kept().map(|(pw, t)| pw * (t - t0)).sum::<f64>() / total;
    let second = kept().map(|(pw, t)| pw * (t - t0) * (t - t0)).sum::<f64>() / total;
    Ok((second - mean * mean).max(0.0).sqrt())
}

/// Step CDF: distinct sorted values with `P(X <= v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest value with cumulative probability >= `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let idx = self
            .probabilities
            .iter()
            .position(|&p| p >= q - 1e-12)
            .unwrap_or(self.values.len() - 1);
        self.values[idx]
    }

    /// Two-column `value,probability` text with a header line; values are
    /// multiplied by `scale` (e.g. 1e9 for seconds to ns).
    pub fn to_csv(&self, header: &str, scale: f64) -> String {
        let mut s = format!("{header}\n");
        for (v, p) in self.values.iter().zip(&self.probabilities) {
            s.push_str(&format!("{},{}\n", g6(v * scale), g6(*p)));
        }
        s
    }
}

pub fn empirical_cdf(values: &[f64]) -> Result<EmpiricalCdf, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(bad));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut cdf = EmpiricalCdf {
        values: Vec::new(),
        probabilities: Vec::new(),
    };
    for (k, v) in sorted.iter().enumerate() {
        let p = (k + 1) as f64 / n;
        if cdf.values.last() == Some(v) {
            *cdf.probabilities.last_mut().unwrap() = p;
        } else {
            cdf.values.push(*v);
            cdf.probabilities.push(p);
        }
    }
    Ok(cdf)
}

/// Median of the finite entries; `None` if there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// One trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssRow {
    /// Ground-plane transmitter-receiver distance, metres.
    pub distance_m: f64,
    pub rss: Rss,
    pub num_paths: usize,
    /// Seconds; `None` when there is no path.
    pub rms_ds: Option<f64>,
    pub los_blocked: bool,
}

/// Samples along a trajectory, distances strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RssTrace {
    pub rows: Vec<RssRow>,
}

impl RssTrace {
    pub const CSV_HEADER: &'static str = "distance_m,rss_dbm,num_paths,rms_ds_ns,los_blocked";

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(40 * (self.rows.len() + 1));
        s.push_str(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                g6(r.distance_m),
                r.rss,
                r.num_paths,
                g6(r.rms_ds.map_or(f64::NAN, |t| t * 1e9)),
                u8::from(r.los_blocked)
            ));
        }
        s
    }

    pub fn rms_ds_samples(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rms_ds).collect()
    }

    pub fn mean_rss_dbm(&self) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter_map(|r| r.rss.dbm()).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn path(a: f64, theta: f64, tau: f64) -> PathComponent {
        PathComponent {
            amplitude: a,
            phase: theta,
            delay: tau,
            interactions: Vec::new(),
            frequency: 28e9,
        }
    }

    fn cir(paths: Vec<PathComponent>) -> Cir {
        Cir::new(paths, 28e9, Vec3::default(), Vec3::new(1.0, 0.0, 1.0))
    }

    #[test]
    fn single_path_rss() {
        let c = cir(vec![path(1e-5, 0.3, 1e-6)]);
        assert!((narrowband_rss(&c, 30.0).dbm().unwrap() - (30.0 - 100.0)).abs() < 1e-9);
    }

    #[test]
    fn cancellation_hits_floor() {
        let c = cir(vec![path(1e-3, 0.0, 1e-6), path(1e-3, PI, 2e-6)]);
        assert_eq!(narrowband_rss(&c, 30.0), Rss::Dbm(30.0 + RSS_FLOOR_DB));
    }

    #[test]
    fn three_path_phasor_sum() {
        // 1e-4 + 5e-5 e^{j pi/2} + 2e-5 e^{-j 2.5}, summed by hand:
        // re = 1e-4 + 2e-5 cos(2.5) = 8.397713e-5, im = 5e-5 - 2e-5 sin(2.5) = 3.803056e-5
        // |.| = 9.218721e-5 -> -80.7066 dB
        let c = cir(vec![
            path(1e-4, 0.0, 1e-6),
            path(5e-5, PI / 2.0, 2e-6),
            path(2e-5, -2.5, 3e-6),
        ]);
        let got = narrowband_rss(&c, 0.0).dbm().unwrap();
        assert!((got - (-80.706587)).abs() < 1e-5, "{got}");
    }

    #[test]
    fn empty_cir() {
        let c = cir(Vec::new());
        assert_eq!(narrowband_rss(&c, 30.0), Rss::NoCoverage);
        assert_eq!(rms_delay_spread(&c, 25.0), Err(MetricsError::EmptyCir));
    }

    #[test]
    fn delay_spread_values() {
        assert_eq!(
            rms_delay_spread(&cir(vec![path(1.0, 0.0, 3e-6)]), 25.0).unwrap(),
            0.0
        );
        let two = cir(vec![path(1.0, 0.0, 0.0), path(1.0, 0.0, 100e-9)]);
        assert!((rms_delay_spread(&two, 25.0).unwrap() - 50e-9).abs() < 1e-15);
        // Powers 1 and 0.25 at 0 and 200 ns: mean 40 ns, second moment 8000 ns^2, spread 80 ns.
        let uneven = cir(vec![path(1.0, 0.0, 0.0), path(0.5, 0.0, 200e-9)]);
        assert!((rms_delay_spread(&uneven, 25.0).unwrap() - 80e-9).abs() < 1e-15);
        // A cut of 5 dB drops the 6 dB weaker path.
        assert_eq!(rms_delay_spread(&uneven, 5.0).unwrap(), 0.0);
        assert!(rms_delay_spread(&uneven, 0.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        let one = empirical_cdf(&[5.0]).unwrap();
        assert_eq!(
            (one.values.clone(), one.probabilities.clone()),
            (vec![5.0], vec![1.0])
        );
        let four = empirical_cdf(&[3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(four.probabilities, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(four.values, vec![1.0, 2.0, 3.0, 4.0]);
        let dup = empirical_cdf(&[2.0, 7.0, 2.0, 2.0]).unwrap();
        assert_eq!(dup.values, vec![2.0, 7.0]);
        assert_eq!(dup.probabilities, vec![0.75, 1.0]);
        assert_eq!(empirical_cdf(&[]), Err(MetricsError::EmptySample));
        assert!(empirical_cdf(&[1.0, f64::NAN]).is_err());
        assert_eq!(
            dup.to_csv("value_ns,probability", 1.0),
            "value_ns,probability\n2,0.75\n7,1\n"
        );
    }

    #[test]
    fn trace_csv_encoding() {
        let t = RssTrace {
            rows: vec![
                RssRow {
                    distance_m: 50.0,
                    rss: Rss::Dbm(-67.1234567),
                    num_paths: 2,
                    rms_ds: Some(1.5e-9),
                    los_blocked: false,
                },
                RssRow {
                    distance_m: 51.0,
                    rss: Rss::NoCoverage,
                    num_paths: 0,
                    rms_ds: None,
                    los_blocked: true,
                },
            ],
        };
        assert_eq!(
            t.to_csv(),
            "distance_m,rss_dbm,num_paths,rms_ds_ns,los_blocked\n50,-67.1235,2,1.5,0\n51,nan,0,nan,1\n"
        );
    }
}
