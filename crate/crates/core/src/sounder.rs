//! Software model of a PN-correlation channel sounder.
//!
//! The transmitter repeats a ±1 maximal-length sequence at one chip per
//! sample. The receiver squares the capture to find the carrier offset (the
//! squared BPSK stream carries a tone at twice the offset), derotates,
//! averages whole sequence periods and correlates against the sequence; the
//! result is the sum of delayed, scaled copies of the two-valued periodic
//! autocorrelation, i.e. the channel impulse response with processing gain N.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use thiserror::Error;

use crate::raytrace::PathComponent;
use crate::textfmt::g6;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 25e6;
pub const DEFAULT_DEGREE: u32 = 12;
/// Required margin of the squared-spectrum peak over its median, dB.
const CFO_PEAK_MARGIN_DB: f64 = 3.0;
/// Noise-only false-alarm probability targeted by the CIR detection threshold.
const DETECTION_FALSE_ALARM: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SounderError {
    #[error("sequence degree {0} outside 2..=20")]
    InvalidDegree(u32),
    #[error(
        "taps {taps:?} do not give a maximal-length sequence of degree {degree} (period {period})"
    )]
    InvalidTaps {
        degree: u32,
        taps: Vec<u32>,
        period: usize,
    },
    #[error("invalid sounder configuration: {0}")]
    Config(String),
    #[error("carrier offset {cfo} Hz outside (-fs/4, fs/4) for fs = {fs} Hz")]
    CfoOutOfRange { cfo: f64, fs: f64 },
    #[error("path delay of {samples} samples does not fit in one period of {period}")]
    DelayOutOfRange { samples: i64, period: usize },
    #[error("capture of {got} samples is shorter than the {needed} required")]
    TooShort { needed: usize, got: usize },
    #[error("no dominant squared-spectrum line (peak {margin_db:.1} dB above median)")]
    EstimationFailed { margin_db: f64 },
    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Feedback taps (exponents of the non-constant terms) of a primitive
/// polynomial for each supported degree; degree 12 is x^12 + x^6 + x^4 + x + 1.
pub fn default_taps(degree: u32) -> Option<&'static [u32]> {
    Some(match degree {
        2 => &[2, 1],
        3 => &[3, 2],
        4 => &[4, 3],
        5 => &[5, 3],
        6 => &[6, 5],
        7 => &[7, 6],
        8 => &[8, 6, 5, 4],
        9 => &[9, 5],
        10 => &[10, 7],
        11 => &[11, 9],
        12 => &[12, 6, 4, 1],
        13 => &[13, 4, 3, 1],
        14 => &[14, 5, 3, 1],
        15 => &[15, 14],
        16 => &[16, 15, 13, 4],
        17 => &[17, 14],
        18 => &[18, 11],
        19 => &[19, 6, 2, 1],
        20 => &[20, 17],
        _ => return None,
    })
}

/// ±1 maximal-length sequence; index it with [`PnSequence::chip`] for the
/// periodic extension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnSequence {
    degree: u32,
    taps: Vec<u32>,
    chips: Vec<i8>,
}

impl PnSequence {
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn taps(&self) -> &[u32] {
        &self.taps
    }

    pub fn chips(&self) -> &[i8] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    /// Chip `n` of the periodic extension (any integer `n`).
    pub fn chip(&self, n: i64) -> i8 {
        self.chips[n.rem_euclid(self.chips.len() as i64) as usize]
    }
}

/// Fibonacci shift register with stages 1..=m, all-ones seed.
///
/// Each step outputs stage m, feeds back the XOR of the tapped stages into
/// stage 1 and shifts towards m. Output bits map 0 -> +1, 1 -> -1. The taps
/// must include `degree` and produce the full period `2^degree - 1`.
pub fn pn_sequence(degree: u32, taps: &[u32]) -> Result<PnSequence, SounderError> {
    if !(2..=20).contains(&degree) {
        return Err(SounderError::InvalidDegree(degree));
    }
    let invalid = |period| SounderError::InvalidTaps {
        degree,
        taps: taps.to_vec(),
        period,
    };
    if !taps.contains(&degree) || taps.iter().any(|&t| t == 0 || t > degree) {
        return Err(invalid(0));
    }
    let full = (1usize << degree) - 1;
    let mask: u32 = taps.iter().fold(0, |m, &t| m | 1 << (t - 1));
    let seed: u32 = (1u32 << degree) - 1;
    let mut state = seed;
    let mut chips = Vec::with_capacity(full);
    loop {
        let out = (state >> (degree - 1)) & 1;
        chips.push(if out == 0 { 1 } else { -1 });
        let fb = (state & mask).count_ones() & 1;
        state = ((state << 1) | fb) & seed;
        if state == seed || chips.len() > full {
            break;
        }
    }
    if chips.len() != full {
        return Err(invalid(chips.len()));
    }
    let mut taps = taps.to_vec();
    taps.sort_unstable_by(|a, b| b.cmp(a));
    taps.dedup();
    Ok(PnSequence {
        degree,
        taps,
        chips,
    })
}

/// Degree-12 sequence with the default taps.
pub fn default_sequence() -> PnSequence {
    pn_sequence(DEFAULT_DEGREE, default_taps(DEFAULT_DEGREE).unwrap())
        .expect("default taps are primitive")
}

/// `sum_n s[n] s[(n + lag) mod N]`.
pub fn periodic_autocorrelation(seq: &PnSequence, lag: i64) -> i64 {
    let n = seq.len() as i64;
    (0..n)
        .map(|i| seq.chip(i) as i64 * seq.chip(i + lag) as i64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SounderConfig {
    pub sample_rate: f64,
    /// Sequence periods in one capture; the first is discarded by the receiver.
    pub periods: usize,
    pub amplitude: f64,
}

impl Default for SounderConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE_HZ,
            periods: 8,
            amplitude: 1.0,
        }
    }
}

impl SounderConfig {
    pub fn validate(&self) -> Result<(), SounderError> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(SounderError::Config("sample rate must be > 0".into()));
        }
        if self.periods < 2 {
            return Err(SounderError::Config("at least 2 periods are needed".into()));
        }
        if !self.amplitude.is_finite() {
            return Err(SounderError::Config("amplitude must be finite".into()));
        }
        Ok(())
    }
}

/// Complex baseband samples at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    /// Length of the repeating sounding period, when known.
    pub period: Option<usize>,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `periods` back-to-back copies of the sequence scaled by `amplitude`.
pub fn synthesize_tx(seq: &PnSequence, cfg: &SounderConfig) -> Result<Waveform, SounderError> {
    cfg.validate()?;
    let samples = (0..cfg.periods)
        .flat_map(|_| seq.chips().iter())
        .map(|&c| Complex64::new(cfg.amplitude * c as f64, 0.0))
        .collect();
    Ok(Waveform {
        samples,
        sample_rate: cfg.sample_rate,
        period: Some(seq.len()),
    })
}

/// One propagation path seen by the sounder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTap {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
}

impl ChannelTap {
    pub fn new(gain: Complex64, delay: f64) -> Self {
        Self { gain, delay }
    }
}

/// Taps from traced paths, with delays relative to the first arrival so
/// they fit within one sounding period.
pub fn taps_from_paths(paths: &[PathComponent]) -> Vec<ChannelTap> {
    let t0 = paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min);
    paths
        .iter()
        .map(|p| ChannelTap::new(p.phasor(), p.delay - t0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impairments {
    pub cfo_hz: f64,
    /// Per-sample SNR; `f64::INFINITY` for a noiseless channel.
    pub snr_db: f64,
    pub noise_seed: u64,
}

impl Default for Impairments {
    fn default() -> Self {
        Self {
            cfo_hz: 0.0,
            snr_db: f64::INFINITY,
            noise_seed: 0,
        }
    }
}

/// `y(n) = e^{j 2 pi cfo n / fs} sum_p g_p x(n - k_p) + w(n)` with
/// `k_p = round(tau_p fs)`; samples before the start of transmission are zero.
/// Noise is complex white Gaussian scaled to the mean received signal power.
pub fn apply_channel(
    tx: &Waveform,
    taps: &[ChannelTap],
    imp: &Impairments,
) -> Result<Waveform, SounderError> {
    let fs = tx.sample_rate;
    if !(imp.cfo_hz.abs() < fs / 4.0) {
        return Err(SounderError::CfoOutOfRange {
            cfo: imp.cfo_hz,
            fs,
        });
    }
    let limit = tx.period.unwrap_or(tx.len());
    let mut shifts = Vec::with_capacity(taps.len());
    for t in taps {
        let k = (t.delay * fs).round() as i64;
        if k < 0 || k >= limit as i64 {
            return Err(SounderError::DelayOutOfRange {
                samples: k,
                period: limit,
            });
        }
        shifts.push((t.gain, k as usize));
    }
    let n = tx.len();
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for &(g, k) in &shifts {
        for (out, x) in y[k..].iter_mut().zip(&tx.samples) {
            *out += g * x;
        }
    }
    if imp.cfo_hz != 0.0 {
        let w = 2.0 * PI * imp.cfo_hz / fs;
        for (i, v) in y.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, w * i as f64);
        }
    }
    if imp.snr_db.is_finite() {
        let p_sig = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / n.max(1) as f64;
        let sigma = (p_sig / 10f64.powf(imp.snr_db / 10.0) / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(imp.noise_seed);
        for v in y.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(sigma * re, sigma * im);
        }
    }
    Ok(Waveform {
        samples: y,
        sample_rate: fs,
        period: tx.period,
    })
}

/// Carrier offset from the strongest line of the squared capture's spectrum.
///
/// The whole capture is transformed without windowing; the returned value is
/// half the signed peak-bin frequency, so the resolution is `fs / (2 L)`.
pub fn estimate_cfo(rx: &Waveform) -> Result<f64, SounderError> {
    let l = rx.len();
    if l < 2 {
        return Err(SounderError::TooShort { needed: 2, got: l });
    }
    let mut buf: Vec<Complex64> = rx.samples.iter().map(|v| v * v).collect();
    FftPlanner::new().plan_fft_forward(l).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
    let (peak_bin, peak) =
        power
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| {
                if p > best.1 {
                    (i, p)
                } else {
                    best
                }
            });
    let mut sorted = power.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[l / 2];
    let margin_db = 10.0 * (peak / median).log10();
    if !(peak > 0.0) || !(margin_db.is_nan() || margin_db >= CFO_PEAK_MARGIN_DB) {
        return Err(SounderError::EstimationFailed { margin_db });
    }
    let signed = if peak_bin > l / 2 {
        peak_bin as f64 - l as f64
    } else {
        peak_bin as f64
    };
    Ok(signed * rx.sample_rate / l as f64 / 2.0)
}

/// Multiplies sample `n` by `e^{-j 2 pi f_hat n / fs}`.
pub fn correct_cfo(rx: &Waveform, f_hat: f64) -> Waveform {
    let w = -2.0 * PI * f_hat / rx.sample_rate;
    Waveform {
        samples: rx
            .samples
            .iter()
            .enumerate()
            .map(|(i, v)| v * Complex64::from_polar(1.0, w * i as f64))
            .collect(),
        sample_rate: rx.sample_rate,
        period: rx.period,
    }
}

/// Averages complete periods after the first and circularly correlates the
/// result with the sequence: `r(k) = sum_n y(n) s(n - k)`.
pub fn matched_filter(rx: &Waveform, seq: &PnSequence) -> Result<Waveform, SounderError> {
    let n = seq.len();
    let periods = rx.len() / n;
    if periods < 2 {
        return Err(SounderError::TooShort {
            needed: 2 * n,
            got: rx.len(),
        });
    }
    let mut avg = vec![Complex64::new(0.0, 0.0); n];
    for p in 1..periods {
        for (a, v) in avg.iter_mut().zip(&rx.samples[p * n..(p + 1) * n]) {
            *a += v;
        }
    }
    let scale = 1.0 / (periods - 1) as f64;
    for a in avg.iter_mut() {
        *a *= scale;
    }

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut s: Vec<Complex64> = seq
        .chips()
        .iter()
        .map(|&c| Complex64::new(c as f64, 0.0))
        .collect();
    fwd.process(&mut avg);
    fwd.process(&mut s);
    for (a, b) in avg.iter_mut().zip(&s) {
        *a *= b.conj();
    }
    inv.process(&mut avg);
    let norm = 1.0 / n as f64;
    for a in avg.iter_mut() {
        *a *= norm;
    }
    Ok(Waveform {
        samples: avg,
        sample_rate: rx.sample_rate,
        period: Some(n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedTap {
    pub delay_samples: usize,
    /// Delay relative to the strongest tap, in `(-N/2, N/2]`.
    pub relative_delay: i64,
    pub gain: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CirEstimate {
    /// Strongest first.
    pub taps: Vec<EstimatedTap>,
    pub reference_peak: Option<usize>,
    /// Correlation gain the peaks were divided by (the sequence length).
    pub processing_gain: f64,
    /// False when nothing rose above the noise threshold.
    pub detected: bool,
}

impl CirEstimate {
    /// `delay_samples,gain_real,gain_imag` rows sorted by delay, with header.
    pub fn to_csv(&self) -> String {
        let mut taps = self.taps.clone();
        taps.sort_by_key(|t| t.delay_samples);
        let mut s = String::from("delay_samples,gain_real,gain_imag\n");
        for t in taps {
            s.push_str(&format!(
                "{},{},{}\n",
                t.delay_samples,
                g6(t.gain.re),
                g6(t.gain.im)
            ));
        }
        s
    }
}

/// Detection threshold above the median correlation magnitude, dB.
///
/// For noise alone `|r|^2` is exponential, so the median sits at `ln 2` times
/// the mean; the margin keeps the chance that any of the `n` lags crosses the
/// threshold at [`DETECTION_FALSE_ALARM`], and is never below 10 dB.
pub fn detection_margin_db(n: usize) -> f64 {
    let t = ((n.max(2) as f64).ln() + (1.0 / DETECTION_FALSE_ALARM).ln()) / 2f64.ln();
    (10.0 * t.log10()).max(10.0)
}

/// Picks correlation peaks out of one period of `r`.
///
/// Candidates are local maxima of `|r|` (circular neighbours) within `cut_db`
/// of the global maximum and above the noise threshold; they are accepted
/// strongest first, skipping any within one sample of an accepted peak, up to
/// `max_paths`. Gains are `r(peak) / seq_len`.
pub fn extract_cir(
    r: &Waveform,
    seq_len: usize,
    cut_db: f64,
    max_paths: usize,
) -> Result<CirEstimate, SounderError> {
    if r.len() != seq_len || seq_len < 3 {
        return Err(SounderError::Format {
            what: "correlation".into(),
            detail: format!("expected one period of {seq_len} samples, got {}", r.len()),
        });
    }
    if !(cut_db > 0.0) {
        return Err(SounderError::Config(format!(
            "cut must be positive, got {cut_db} dB"
        )));
    }
    let n = seq_len;
    let mag: Vec<f64> = r.samples.iter().map(|v| v.norm()).collect();
    let mut sorted = mag.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    let peak = sorted[n - 1];
    let threshold = median * 10f64.powf(detection_margin_db(n) / 20.0);
    let empty = CirEstimate {
        taps: Vec::new(),
        reference_peak: None,
        processing_gain: n as f64,
        detected: false,
    };
    if !(peak > threshold) {
        return Ok(empty);
    }
    let floor = (peak * 10f64.powf(-cut_db / 20.0)).max(threshold);
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let m = mag[i];
            m >= floor && m >= mag[(i + n - 1) % n] && m >= mag[(i + 1) % n]
        })
        .collect();
    candidates.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        if accepted.len() >= max_paths {
            break;
        }
        let near = accepted.iter().any(|&a| {
            let d = c.abs_diff(a);
            d.min(n - d) <= 1
        });
        if !near {
            accepted.push(c);
        }
    }
    let reference = accepted[0];
    let half = (n / 2) as i64;
    let taps = accepted
        .iter()
        .map(|&k| {
            let mut rel = k as i64 - reference as i64;
            if rel > half {
                rel -= n as i64;
            } else if rel <= -half {
                rel += n as i64;
            }
            EstimatedTap {
                delay_samples: k,
                relative_delay: rel,
                gain: r.samples[k] / n as f64,
            }
        })
        .collect();
    Ok(CirEstimate {
        taps,
        reference_peak: Some(reference),
        processing_gain: n as f64,
        detected: true,
    })
}

/// Outcome of a full synthetic sounding run.
#[derive(Debug, Clone)]
pub struct LoopbackReport {
    pub cfo_estimate: f64,
    pub correlation: Waveform,
    pub cir: CirEstimate,
}

/// Transmit, propagate, estimate and correct CFO, correlate and extract.
pub fn loopback(
    seq: &PnSequence,
    cfg: &SounderConfig,
    taps: &[ChannelTap],
    imp: &Impairments,
    cut_db: f64,
    max_paths: usize,
) -> Result<LoopbackReport, SounderError> {
    let tx = synthesize_tx(seq, cfg)?;
    let rx = apply_channel(&tx, taps, imp)?;
    let cfo_estimate = estimate_cfo(&rx)?;
    let corrected = correct_cfo(&rx, cfo_estimate);
    let correlation = matched_filter(&corrected, seq)?;
    let cir = extract_cir(&correlation, seq.len(), cut_db, max_paths)?;
    Ok(LoopbackReport {
        cfo_estimate,
        correlation,
        cir,
    })
}

/// Sidecar header path for an I/Q file: `<path>.hdr`.
pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

/// Writes interleaved little-endian f32 `(I, Q)` pairs to `path` and
/// `fs=<Hz> fc=<Hz> len=<samples>` to the sidecar header.
pub fn write_iq(path: &Path, wf: &Waveform, f_c: f64) -> Result<(), SounderError> {
    let mut bytes = Vec::with_capacity(wf.len() * 8);
    for v in &wf.samples {
        bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(
        header_path(path),
        format!("fs={} fc={} len={}\n", wf.sample_rate, f_c, wf.len()),
    )?;
    Ok(())
}

/// Reads a capture written by [`write_iq`]; returns the waveform and its carrier.
pub fn read_iq(path: &Path) -> Result<(Waveform, f64), SounderError> {
    let header = fs::read_to_string(header_path(path))?;
    let bad = |detail: String| SounderError::Format {
        what: "I/Q header".into(),
        detail,
    };
    let (mut fs_hz, mut fc, mut len) = (None, None, None);
    for field in header.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| bad(format!("`{field}`")))?;
        match k {
            "fs" => fs_hz = Some(v.parse::<f64>().map_err(|_| bad(format!("fs `{v}`")))?),
            "fc" => fc = Some(v.parse::<f64>().map_err(|_| bad(format!("fc `{v}`")))?),
            "len" => len = Some(v.parse::<usize>().map_err(|_| bad(format!("len `{v}`")))?),
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    let (fs_hz, fc, len) = match (fs_hz, fc, len) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(bad("missing fs, fc or len".into())),
    };
    let bytes = fs::read(path)?;
    if bytes.len() != len * 8 {
        return Err(SounderError::Format {
            what: "I/Q data".into(),
            detail: format!("{} bytes for {len} samples", bytes.len()),
        });
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok((
        Waveform {
            samples,
            sample_rate: fs_hz,
            period: None,
        },
        fc,
    ))
}

/// Parses channel taps from `delay_samples,gain_real,gain_imag` lines
/// (header line and `#` comments allowed) at sample rate `fs`.
pub fn parse_taps(text: &str, fs: f64) -> Result<Vec<ChannelTap>, SounderError> {
    let mut taps = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() || line.starts_with("delay_samples") {
            continue;
        }
        let bad = || SounderError::Format {
            what: "tap list".into(),
            detail: format!("line {}: `{line}`", i + 1),
        };
        let f: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        if f.len() != 3 {
            return Err(bad());
        }
        taps.push(ChannelTap::new(Complex64::new(f[1], f[2]), f[0] / fs));
    }
    Ok(taps)
}
