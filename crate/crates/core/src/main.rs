use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use mmwave_ag::analytic::{critical_distance, two_ray_curve, LinkBudget};
use mmwave_ag::campaign::{parse_config, run_campaign, write_outputs, CampaignError};
use mmwave_ag::scene::{material_permittivity, MaterialKind};
use mmwave_ag::sounder::{
    apply_channel, default_taps, loopback, parse_taps, pn_sequence, synthesize_tx, write_iq,
    ChannelTap, Impairments, SounderConfig, SounderError,
};
use mmwave_ag::textfmt::g6;

#[derive(Parser)]
#[command(
    name = "mmwave-ag",
    version,
    about = "mmWave air-to-ground channel simulator",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a ray-tracing campaign and write RSS / RMS-DS CSV files.
    Simulate {
        /// Campaign config file (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Scene seed; replaces the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the analytic two-ray RSS curve as CSV.
    Tworay {
        /// Ground station height, m.
        #[arg(long, default_value_t = 2.0)]
        ht: f64,
        /// UAV height, m.
        #[arg(long, default_value_t = 50.0)]
        hr: f64,
        /// Carrier frequency, Hz.
        #[arg(long, default_value_t = 28e9)]
        fc: f64,
        /// Last distance, m.
        #[arg(long, default_value_t = 2000.0)]
        dmax: f64,
        /// First distance, m.
        #[arg(long, default_value_t = 1.0)]
        dmin: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        /// Ground material: dry_ground, sea_water or pec.
        #[arg(long, default_value = "dry_ground")]
        ground: String,
        #[arg(long, default_value_t = 30.0)]
        ptx: f64,
    },
    /// Synthetic sounder loopback: print the estimated CIR and a report.
    SounderDemo {
        /// Carrier offset, Hz.
        #[arg(long, default_value_t = 10e3)]
        cfo: f64,
        /// Per-sample SNR, dB.
        #[arg(long, default_value_t = 20.0)]
        snr: f64,
        /// Channel taps as `delay_samples,gain_real,gain_imag` lines;
        /// defaults to three paths at 0, 3 and 10 samples.
        #[arg(long)]
        paths: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        degree: u32,
        #[arg(long, default_value_t = 8)]
        periods: usize,
        /// Sample (chip) rate, Hz.
        #[arg(long, default_value_t = 25e6)]
        fs: f64,
        /// Noise seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write `rx.iq` (+ header) and `cir.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<CampaignError> for Failure {
    fn from(e: CampaignError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<SounderError> for Failure {
    fn from(e: SounderError) -> Self {
        match e {
            SounderError::Io(_) | SounderError::EstimationFailed { .. } => {
                Failure::Runtime(e.to_string())
            }
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let res = match cli.command {
        Command::Simulate {
            config,
            out,
            workers,
            seed,
        } => simulate(config, out, workers, seed),
        Command::Tworay {
            ht,
            hr,
            fc,
            dmax,
            dmin,
            step,
            ground,
            ptx,
        } => tworay(ht, hr, fc, dmin, dmax, step, &ground, ptx),
        Command::SounderDemo {
            cfo,
            snr,
            paths,
            degree,
            periods,
            fs,
            seed,
            out,
        } => sounder_demo(cfo, snr, paths, degree, periods, fs, seed, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn simulate(
    config: PathBuf,
    out: Option<PathBuf>,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let text = fs::read_to_string(&config)
        .map_err(|e| Failure::Validation(format!("{}: {e}", config.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| match e {
        CampaignError::Parse { line, msg } => {
            Failure::Validation(format!("{}:{line}: {msg}", config.display()))
        }
        e => e.into(),
    })?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let workers = match workers {
        Some(0) => return Err(Failure::Validation("--workers must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let res = run_campaign(&cfg, workers)?;
    let files = write_outputs(&res, &cfg.output_dir)?;
    for c in &res.combinations {
        println!(
            "{} seed={} points={} invalid={} mean_rss_dbm={} rms_ds_samples={}",
            c.stem(false),
            c.seed,
            c.trace.rows.len(),
            c.invalid.len(),
            c.trace.mean_rss_dbm().map_or("nan".into(), g6),
            c.rms_ds_ns.len()
        );
    }
    println!(
        "wrote {} files to {}",
        files.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn tworay(
    ht: f64,
    hr: f64,
    fc: f64,
    dmin: f64,
    dmax: f64,
    step: f64,
    ground: &str,
    ptx: f64,
) -> Result<(), Failure> {
    let bad = |m: String| Err(Failure::Validation(m));
    if !(ht > 0.0 && hr > 0.0) {
        return bad("heights must be > 0".into());
    }
    if !(dmin > 0.0 && dmax >= dmin && step > 0.0) {
        return bad("need 0 < dmin <= dmax and step > 0".into());
    }
    let kind = ground
        .parse::<MaterialKind>()
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let eta = material_permittivity(kind, fc).map_err(|e| Failure::Validation(e.to_string()))?;
    let lb = LinkBudget {
        tx_power_dbm: ptx,
        h_t: ht,
        ..LinkBudget::new(fc, hr)
    };
    let mut s = format!(
        "# two-ray fc={} ht={} hr={} ground={} critical_distance_m={}\ndistance_m,rss_dbm\n",
        g6(fc),
        g6(ht),
        g6(hr),
        kind,
        g6(critical_distance(ht, hr, lb.wavelength()))
    );
    for (d, rss) in two_ray_curve(&lb, dmin, dmax, step, eta) {
        s.push_str(&format!("{},{}\n", g6(d), g6(rss)));
    }
    print!("{s}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sounder_demo(
    cfo: f64,
    snr: f64,
    paths: Option<PathBuf>,
    degree: u32,
    periods: usize,
    fs_hz: f64,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let taps = match &paths {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?;
            parse_taps(&text, fs_hz)?
        }
        None => [(0.0, 1.0, 0.0), (3.0, 0.5, 1.0), (10.0, 0.25, -2.0)]
            .iter()
            .map(|&(k, a, th)| ChannelTap::new(Complex64::from_polar(a, th), k / fs_hz))
            .collect(),
    };
    if taps.is_empty() {
        return Err(Failure::Validation("no channel taps".into()));
    }
    let taps_list = default_taps(degree).ok_or(SounderError::InvalidDegree(degree))?;
    let seq = pn_sequence(degree, taps_list)?;
    let cfg = SounderConfig {
        sample_rate: fs_hz,
        periods,
        amplitude: 1.0,
    };
    let imp = Impairments {
        cfo_hz: cfo,
        snr_db: snr,
        noise_seed: seed,
    };
    let report = loopback(&seq, &cfg, &taps, &imp, 30.0, taps.len().max(1) * 2)?;
    if let Some(dir) = &out {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        let tx = synthesize_tx(&seq, &cfg)?;
        let rx = apply_channel(&tx, &taps, &imp)?;
        write_iq(&dir.join("rx.iq"), &rx, 28e9)?;
        fs::write(dir.join("cir.csv"), report.cir.to_csv())
            .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    }
    print!("{}", report.cir.to_csv());
    eprintln!(
        "sequence degree={} length={} periods={} fs={}",
        degree,
        seq.len(),
        periods,
        g6(fs_hz)
    );
    eprintln!(
        "cfo true={} estimated={} error={} Hz (bin {} Hz)",
        g6(cfo),
        g6(report.cfo_estimate),
        g6(report.cfo_estimate - cfo),
        g6(fs_hz / (2.0 * (periods * seq.len()) as f64))
    );
    eprintln!(
        "detected={} paths={} processing_gain_db={}",
        report.cir.detected,
        report.cir.taps.len(),
        g6(10.0 * report.cir.processing_gain.log10())
    );
    Ok(())
}
