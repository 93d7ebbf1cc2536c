//! Scenario × frequency × height sweeps over UAV trajectories.
//!
//! Config files are flat `key = value` text:
//!
//! ```text
//! # everything not listed keeps its default
//! scenarios   = over_sea, rural, suburban, urban
//! seeds       = 1
//! frequencies = 28e9, 60e9
//! heights     = 2, 50, 100, 150
//! ```
//!
//! See [`CampaignConfig::to_text`] for the full key set.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::metrics::{
    empirical_cdf, narrowband_rss, rms_delay_spread, Cir, Rss, RssRow, RssTrace, DEFAULT_RMS_CUT_DB,
};
use crate::raytrace::{evaluate_paths, Antenna, TraceConfig, TraceError, Tracer};
use crate::scene::{
    generate_scenario, trajectory_samples, ScenarioKind, Scene, SceneError, TrajectorySpec,
    MAX_MODEL_FREQUENCY_HZ, MIN_MODEL_FREQUENCY_HZ,
};
use crate::textfmt::g6;

/// A combination fails when more than this fraction of its points is invalid.
pub const MAX_INVALID_FRACTION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{combination}: {invalid} of {total} points invalid (first: {first})")]
    TooManyInvalid {
        combination: String,
        invalid: usize,
        total: usize,
        first: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CampaignError {
    /// Bad input as opposed to a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            CampaignError::Parse { .. } | CampaignError::Invalid(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub scenarios: Vec<ScenarioKind>,
    pub seeds: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub heights: Vec<f64>,
    /// Flight path; its `height` is replaced by each entry of `heights`.
    pub trajectory: TrajectorySpec,
    pub trace: TraceConfig,
    /// Ground station sits at `(0, 0, tx_height)`.
    pub tx_height: f64,
    pub tx_power_dbm: f64,
    pub rms_cut_db: f64,
    pub output_dir: PathBuf,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            scenarios: ScenarioKind::STANDARD.to_vec(),
            seeds: vec![1],
            frequencies: vec![28e9, 60e9],
            heights: vec![2.0, 50.0, 100.0, 150.0],
            trajectory: TrajectorySpec::default_at_height(0.0),
            trace: TraceConfig::default(),
            tx_height: 2.0,
            tx_power_dbm: 30.0,
            rms_cut_db: DEFAULT_RMS_CUT_DB,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("`{v}` is not a finite number"))
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if v.is_empty() {
        return Err("empty list".into());
    }
    v.split(',')
        .map(|item| {
            let item = item.trim();
            if item.is_empty() {
                Err("empty list item".to_string())
            } else {
                f(item)
            }
        })
        .collect()
}

fn parse_pair(v: &str) -> Result<(f64, f64), String> {
    match parse_list(v, parse_f64)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        other => Err(format!("expected 2 values, got {}", other.len())),
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn antenna_name(a: Antenna) -> &'static str {
    match a {
        Antenna::HalfWaveDipole => "dipole",
        Antenna::Isotropic => "isotropic",
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

/// Parses and validates a config; unspecified keys keep their defaults.
pub fn parse_config(text: &str) -> Result<CampaignConfig, CampaignError> {
    let mut cfg = CampaignConfig::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| CampaignError::Parse { line, msg };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        let t = &mut cfg.trajectory;
        let res: Result<(), String> = match key {
            "scenarios" => parse_list(value, |s| {
                s.parse::<ScenarioKind>().map_err(|e| e.to_string())
            })
            .map(|v| cfg.scenarios = v),
            "seeds" => parse_list(value, |s| {
                s.parse::<u64>().map_err(|_| format!("`{s}` is not a seed"))
            })
            .map(|v| cfg.seeds = v),
            "frequencies" => parse_list(value, parse_f64).map(|v| cfg.frequencies = v),
            "heights" => parse_list(value, parse_f64).map(|v| cfg.heights = v),
            "trajectory_start" => parse_pair(value).map(|(x, y)| t.start = Vec3::new(x, y, 0.0)),
            "trajectory_heading" => parse_pair(value).and_then(|(x, y)| {
                let h = Vec3::new(x, y, 0.0);
                let n = h.norm();
                if !(n > 0.0) {
                    return Err("heading must be non-zero".into());
                }
                // Leave already-unit vectors untouched so that echoes reparse exactly.
                t.heading = if (n - 1.0).abs() < 1e-12 {
                    h
                } else {
                    h * (1.0 / n)
                };
                Ok(())
            }),
            "trajectory_length" => parse_f64(value).map(|v| t.length = v),
            "trajectory_spacing" => parse_f64(value).map(|v| t.spacing = v),
            "uav_speed" => parse_f64(value).map(|v| t.speed = v),
            "tx_height" => parse_f64(value).map(|v| cfg.tx_height = v),
            "tx_power_dbm" => parse_f64(value).map(|v| cfg.tx_power_dbm = v),
            "max_order" => value
                .parse::<u8>()
                .map(|v| cfg.trace.max_order = v)
                .map_err(|_| format!("`{value}` is not an order")),
            "diffraction" => parse_bool(value).map(|v| cfg.trace.diffraction = v),
            "path_cut_db" => parse_f64(value).map(|v| cfg.trace.cut_db = v),
            "antenna" => match value {
                "dipole" => Ok(Antenna::HalfWaveDipole),
                "isotropic" => Ok(Antenna::Isotropic),
                _ => Err(format!("unknown antenna `{value}`")),
            }
            .map(|a| cfg.trace.antenna = a),
            "rms_cut_db" => parse_f64(value).map(|v| cfg.rms_cut_db = v),
            "output_dir" => {
                if value.is_empty() {
                    Err("empty path".into())
                } else {
                    cfg.output_dir = PathBuf::from(value);
                    Ok(())
                }
            }
            _ => Err(format!("unknown key `{key}`")),
        };
        res.map_err(|m| err(format!("{key}: {m}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::Invalid(m));
        if self.scenarios.is_empty()
            || self.seeds.is_empty()
            || self.frequencies.is_empty()
            || self.heights.is_empty()
        {
            return bad("scenario, seed, frequency and height lists must be non-empty".into());
        }
        for &f in &self.frequencies {
            if !(MIN_MODEL_FREQUENCY_HZ..=MAX_MODEL_FREQUENCY_HZ).contains(&f) {
                return bad(format!("frequency {f} Hz outside [10, 100] GHz"));
            }
        }
        for &h in &self.heights {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("UAV height {h} m must be > 0"));
            }
        }
        if !(self.tx_height > 0.0) {
            return bad(format!("tx height {} m must be > 0", self.tx_height));
        }
        if !(self.rms_cut_db > 0.0) {
            return bad(format!("rms cut {} dB must be > 0", self.rms_cut_db));
        }
        let mut seen = HashSet::new();
        for s in &self.scenarios {
            if !seen.insert(s) {
                return bad(format!("scenario {s} listed twice"));
            }
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return bad("duplicate seed".into());
        }
        let distinct = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            s.windows(2).all(|w| w[0] != w[1])
        };
        if !distinct(&self.frequencies) || !distinct(&self.heights) {
            return bad("duplicate frequency or height".into());
        }
        self.trajectory
            .validate()
            .map_err(|e| CampaignError::Invalid(e.to_string()))?;
        self.trace
            .validate()
            .map_err(|e| CampaignError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn tx(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.tx_height)
    }

    /// Every setting as config text; [`parse_config`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let t = &self.trajectory;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("scenarios", join(&self.scenarios, |k| k.name().to_string()));
        kv("seeds", join(&self.seeds, |s| s.to_string()));
        kv("frequencies", join(&self.frequencies, |f| format!("{f:e}")));
        kv("heights", join(&self.heights, |h| h.to_string()));
        kv("trajectory_start", format!("{}, {}", t.start.x, t.start.y));
        kv(
            "trajectory_heading",
            format!("{}, {}", t.heading.x, t.heading.y),
        );
        kv("trajectory_length", t.length.to_string());
        kv("trajectory_spacing", t.spacing.to_string());
        kv("uav_speed", t.speed.to_string());
        kv("tx_height", self.tx_height.to_string());
        kv("tx_power_dbm", self.tx_power_dbm.to_string());
        kv("max_order", self.trace.max_order.to_string());
        kv("diffraction", self.trace.diffraction.to_string());
        kv("path_cut_db", self.trace.cut_db.to_string());
        kv("antenna", antenna_name(self.trace.antenna).to_string());
        kv("rms_cut_db", self.rms_cut_db.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        s
    }

    /// SHA-256 of [`CampaignConfig::to_text`], hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes()).iter().fold(
            String::with_capacity(64),
            |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            },
        )
    }
}

/// One point whose geometry could not be traced.
#[derive(Debug, Clone, PartialEq)]
pub struct InvalidPoint {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Combination {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub frequency: f64,
    pub height: f64,
    pub trace: RssTrace,
    /// Nanoseconds, one per point with at least one path.
    pub rms_ds_ns: Vec<f64>,
    pub invalid: Vec<InvalidPoint>,
}

impl Combination {
    /// `<scenario>_<freq>GHz_<h>m`, plus `_s<seed>` when `with_seed`.
    pub fn stem(&self, with_seed: bool) -> String {
        let mut s = format!(
            "{}_{}GHz_{}m",
            self.scenario.name(),
            g6(self.frequency / 1e9),
            g6(self.height)
        );
        if with_seed {
            let _ = write!(s, "_s{}", self.seed);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    pub config_hash: String,
    /// Scenario-major, then seed, height, frequency.
    pub combinations: Vec<Combination>,
    pub scenes: Vec<Scene>,
}

impl CampaignResult {
    pub fn find(
        &self,
        scenario: ScenarioKind,
        seed: u64,
        frequency: f64,
        height: f64,
    ) -> Option<&Combination> {
        self.combinations.iter().find(|c| {
            c.scenario == scenario
                && c.seed == seed
                && c.frequency == frequency
                && c.height == height
        })
    }
}

/// Traces every point of every combination on a pool of `workers` threads.
///
/// Geometry is searched once per receiver position and evaluated at each
/// frequency. Points whose geometry is invalid keep a `nan` row and are
/// listed in [`Combination::invalid`].
pub fn run_campaign(cfg: &CampaignConfig, workers: usize) -> Result<CampaignResult, CampaignError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CampaignError::Invalid(format!("worker pool: {e}")))?;
    let tx = cfg.tx();
    let mut combinations = Vec::new();
    let mut scenes = Vec::new();
    for &scenario in &cfg.scenarios {
        for &seed in &cfg.seeds {
            let scene = generate_scenario(scenario, seed)?;
            let tracer = Tracer::new(&scene, tx, cfg.trace)?;
            for &height in &cfg.heights {
                let spec = TrajectorySpec {
                    height,
                    ..cfg.trajectory
                };
                let points = trajectory_samples(&spec)?;
                let per_point: Vec<Result<Vec<RssRow>, String>> = pool.install(|| {
                    points
                        .par_iter()
                        .map(|&rx| evaluate_point(&tracer, cfg, rx))
                        .collect()
                });
                for (fi, &frequency) in cfg.frequencies.iter().enumerate() {
                    let mut rows = Vec::with_capacity(points.len());
                    let mut invalid = Vec::new();
                    for (index, (res, rx)) in per_point.iter().zip(&points).enumerate() {
                        match res {
                            Ok(r) => rows.push(r[fi]),
                            Err(reason) => {
                                invalid.push(InvalidPoint {
                                    index,
                                    reason: reason.clone(),
                                });
                                rows.push(RssRow {
                                    distance_m: rx.ground_distance(tx),
                                    rss: Rss::NoCoverage,
                                    num_paths: 0,
                                    rms_ds: None,
                                    los_blocked: true,
                                });
                            }
                        }
                    }
                    let trace = RssTrace { rows };
                    let rms_ds_ns = trace.rms_ds_samples().iter().map(|t| t * 1e9).collect();
                    let combo = Combination {
                        scenario,
                        seed,
                        frequency,
                        height,
                        trace,
                        rms_ds_ns,
                        invalid,
                    };
                    if combo.invalid.len() as f64 > MAX_INVALID_FRACTION * points.len() as f64 {
                        return Err(CampaignError::TooManyInvalid {
                            combination: combo.stem(true),
                            invalid: combo.invalid.len(),
                            total: points.len(),
                            first: combo.invalid[0].reason.clone(),
                        });
                    }
                    combinations.push(combo);
                }
            }
            scenes.push(scene);
        }
    }
    Ok(CampaignResult {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        combinations,
        scenes,
    })
}

/// One row per configured frequency, or the geometry error.
fn evaluate_point(
    tracer: &Tracer<'_>,
    cfg: &CampaignConfig,
    rx: Vec3,
) -> Result<Vec<RssRow>, String> {
    let tx = tracer.tx();
    let geo = tracer.geometric_paths(rx).map_err(|e| e.to_string())?;
    cfg.frequencies
        .iter()
        .map(|&f| {
            let paths = evaluate_paths(&geo, f, &cfg.trace).map_err(|e| e.to_string())?;
            let cir = Cir::new(paths, f, tx, rx);
            Ok(RssRow {
                distance_m: rx.ground_distance(tx),
                rss: narrowband_rss(&cir, cfg.tx_power_dbm),
                num_paths: cir.len(),
                rms_ds: rms_delay_spread(&cir, cfg.rms_cut_db).ok(),
                los_blocked: !cir.has_line_of_sight(),
            })
        })
        .collect()
}

/// Text of the CDF file for one combination; header only when no point had paths.
pub fn rms_ds_cdf_csv(combo: &Combination) -> String {
    match empirical_cdf(&combo.rms_ds_ns) {
        Ok(cdf) => cdf.to_csv("value_ns,probability", 1.0),
        Err(_) => "value_ns,probability\n".to_string(),
    }
}

/// Manifest: provenance comments followed by the config echo.
pub fn manifest_text(res: &CampaignResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# mmwave-ag {} campaign manifest",
        env!("CARGO_PKG_VERSION")
    );
    let _ = writeln!(s, "# config_sha256 {}", res.config_hash);
    let seeds = join(&res.config.seeds, |s| s.to_string());
    let _ = writeln!(s, "# seeds {seeds}");
    let t = &res.config.trajectory;
    let _ = writeln!(
        s,
        "# trajectory starts {} m from the ground station along ({}, {})",
        g6(t.start.x.hypot(t.start.y)),
        t.heading.x,
        t.heading.y
    );
    for c in &res.combinations {
        if !c.invalid.is_empty() {
            let _ = writeln!(s, "# {} invalid points: {}", c.stem(true), c.invalid.len());
        }
    }
    s.push_str(&res.config.to_text());
    s
}

/// Writes `contents` to a sibling temp file and renames it into place.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CampaignError> {
    let io_err = |source| CampaignError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

/// Writes every RSS trace, RMS-DS CDF, the scene descriptions and the
/// manifest into `dir`. Returns the paths written, in order.
pub fn write_outputs(res: &CampaignResult, dir: &Path) -> Result<Vec<PathBuf>, CampaignError> {
    fs::create_dir_all(dir).map_err(|source| CampaignError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let with_seed = res.config.seeds.len() > 1;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<(), CampaignError> {
        let p = dir.join(name);
        write_atomic(&p, &text)?;
        written.push(p);
        Ok(())
    };
    for c in &res.combinations {
        let stem = c.stem(with_seed);
        put(format!("rss_{stem}.csv"), c.trace.to_csv())?;
        put(format!("cdf_rmsds_{stem}.csv"), rms_ds_cdf_csv(c))?;
    }
    for scene in &res.scenes {
        put(
            format!("scene_{}_s{}.txt", scene.kind.name(), scene.seed),
            scene.to_text(),
        )?;
    }
    put("manifest.txt".into(), manifest_text(res))?;
    Ok(written)
}
