use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uwb_guard::autoencoder::complexity_of_dims;
use uwb_guard::harness::report::{write_run_csv, write_sweep_csv};
use uwb_guard::harness::sweep::DATASET_SEED_OFFSET;
use uwb_guard::harness::{
    calibrate, generate_dataset, prepare_detector, run_campaign, sweep, train_model, Dataset, Detector, ScenarioConfig,
    SweepParameter,
};
use uwb_guard::model_file::{Calibration, ModelFile, ModelSidecar};
use uwb_guard::{Error, Result};

#[derive(Parser)]
#[command(name = "uwb-guard", version, about = "UWB DS-TWR simulator with reciprocity-based attack detection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario config (JSON); missing keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `trials`.
    #[arg(long, global = true)]
    trials: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate unattacked CIR pairs into a dataset file.
    GenData {
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `model.dataset_pairs`.
        #[arg(long)]
        pairs: Option<u64>,
    },
    /// Train an autoencoder on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Fit quantizer bounds and threshold, stored in the model file.
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to overwriting `--model`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one campaign and write the per-round CSV.
    Run {
        /// Calibrated model; without it one is trained on the fly.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Enables the Ghost Peak attacker.
        #[arg(long)]
        attack: bool,
        /// Disables the integrity check.
        #[arg(long)]
        no_detect: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter over H0 and H1 campaigns.
    Sweep {
        #[arg(long, value_parser = parse_param)]
        param: SweepParameter,
        /// Comma-separated; defaults to the parameter's standard grid.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Calibrated model; needs `--data` too, or both are built.
        #[arg(long, requires = "data")]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print layer widths and forward-pass complexity.
    InspectModel {
        #[arg(long, conflicts_with = "dims", required_unless_present = "dims")]
        model: Option<PathBuf>,
        /// Comma-separated widths, e.g. 700,32.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
    },
}

fn parse_param(s: &str) -> std::result::Result<SweepParameter, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| "expected one of input_dim, output_dim, q_bits, alpha_t, sir_db, snr_db".to_owned())
}

fn scenario(c: &Common) -> Result<ScenarioConfig> {
    let mut s = match &c.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = c.seed {
        s.master_seed = seed;
    }
    if let Some(t) = c.trials {
        s.trials = t;
    }
    s.validate()?;
    Ok(s)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Dataset for on-the-fly training, seeded apart from the campaign.
fn fresh_dataset(s: &ScenarioConfig) -> Result<Dataset> {
    let mut ds = s.clone();
    ds.attack.enabled = false;
    ds.master_seed = s.master_seed.wrapping_add(DATASET_SEED_OFFSET);
    log::info!("generating {} training pairs", s.model.dataset_pairs);
    generate_dataset(&ds, s.model.dataset_pairs)
}

fn load_detector(path: &Path) -> Result<Detector> {
    let file = ModelFile::load(path)?;
    let calibration = file
        .calibration
        .ok_or_else(|| Error::Config(format!("{} is not calibrated; run `calibrate` first", path.display())))?;
    Ok(Detector {
        model: file.model,
        calibration,
    })
}

fn check_calibration(s: &ScenarioConfig, c: &Calibration) {
    let q = c.quantizer.q;
    if q != s.detector.q || c.threshold.alpha_t != s.detector.alpha_t {
        log::warn!(
            "model calibrated for q={q}, alpha_t={}; config asks q={}, alpha_t={}; using the model's",
            c.threshold.alpha_t,
            s.detector.q,
            s.detector.alpha_t
        );
    }
}

fn save_model(path: &Path, file: &ModelFile, sidecar: &ModelSidecar) -> Result<()> {
    file.save(path)?;
    sidecar.save(path)
}

fn execute(cli: Cli) -> Result<()> {
    let s = scenario(&cli.common)?;
    match cli.cmd {
        Command::GenData { out, pairs } => {
            let n = pairs.unwrap_or(s.model.dataset_pairs);
            let data = generate_dataset(&s, n)?;
            data.save(&out)?;
            eprintln!("wrote {} pairs of {} taps to {}", data.len(), data.dim, out.display());
        }
        Command::Train { data, out, epochs } => {
            let mut s = s;
            if let Some(e) = epochs {
                s.model.train.epochs = e;
            }
            s.validate()?;
            let data = Dataset::load(&data)?;
            let (model, report) = train_model(&s, &data)?;
            if let Some(last) = report.history.last() {
                eprintln!(
                    "epochs {}: test mse {:.4e} (initial {:.4e})",
                    report.history.len(),
                    last.test_loss,
                    report.initial_test_loss
                );
            }
            let file = ModelFile {
                model,
                calibration: None,
            };
            let sidecar = ModelSidecar::describe(&file, Some(s.model.train.clone()), Some(report));
            save_model(&out, &file, &sidecar)?;
        }
        Command::Calibrate { model, data, out } => {
            let mut file = ModelFile::load(&model)?;
            let data = Dataset::load(&data)?;
            let d = &s.detector;
            let cal = calibrate(&file.model, &data, d.q, d.alpha_t, d.t_h_statistic)?;
            eprintln!("q={} t_h={} T={}", d.q, cal.threshold.t_h, cal.threshold.threshold);
            file.calibration = Some(cal);
            let out = out.unwrap_or(model.clone());
            let mut sidecar = ModelSidecar::load(&model).unwrap_or_else(|_| ModelSidecar::describe(&file, None, None));
            sidecar.calibration = file.calibration.clone();
            save_model(&out, &file, &sidecar)?;
        }
        Command::Run {
            model,
            attack,
            no_detect,
            out,
        } => {
            let mut s = s;
            s.attack.enabled |= attack;
            s.detector.enabled &= !no_detect;
            s.validate()?;
            let detector = match (s.detector.enabled, model) {
                (false, _) => None,
                (true, Some(p)) => {
                    let d = load_detector(&p)?;
                    check_calibration(&s, &d.calibration);
                    Some(d)
                }
                (true, None) => Some(prepare_detector(&s, &fresh_dataset(&s)?)?.0),
            };
            let result = run_campaign(&s, detector.as_ref())?;
            let r = &result.report;
            let fmt = |p: Option<f64>| p.map_or("n/a".to_owned(), |v| format!("{v:.4}"));
            eprintln!(
                "valid {} invalid {} | p_fa {} p_m {} p_s {}",
                r.n_valid,
                r.n_invalid,
                fmt(r.p_fa),
                fmt(r.p_m),
                fmt(r.p_s)
            );
            let mut w = output(out.as_deref())?;
            write_run_csv(&mut w, r, &result.records)?;
            w.flush()?;
        }
        Command::Sweep {
            param,
            values,
            model,
            data,
            out,
        } => {
            let values = values.unwrap_or_else(|| param.default_values());
            let (data, detector) = match (model, data) {
                (Some(m), Some(d)) => (Dataset::load(&d)?, load_detector(&m)?),
                (None, Some(d)) => {
                    let data = Dataset::load(&d)?;
                    let det = prepare_detector(&s, &data)?.0;
                    (data, det)
                }
                _ => {
                    let data = fresh_dataset(&s)?;
                    let det = prepare_detector(&s, &data)?.0;
                    (data, det)
                }
            };
            let rows = sweep(param, &values, &s, &data, &detector)?;
            let mut w = output(out.as_deref())?;
            write_sweep_csv(&mut w, param, &s, &rows)?;
            w.flush()?;
        }
        Command::InspectModel { model, dims } => {
            let (dims, calibration) = match (model, dims) {
                (Some(p), _) => {
                    let f = ModelFile::load(&p)?;
                    (f.model.layer_dims.clone(), f.calibration)
                }
                (None, Some(d)) => (d, None),
                (None, None) => return Err(Error::Config("give --model or --dims".into())),
            };
            if dims.len() < 2 || dims.contains(&0) {
                return Err(Error::Config("dims need at least two positive widths".into()));
            }
            let c = complexity_of_dims(&dims);
            let list: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
            println!("dims: {}", list.join(","));
            println!("layers: {}", dims.len() - 1);
            println!("flops: {}", c.flops);
            println!("params: {}", c.params);
            if let Some(cal) = calibration {
                println!(
                    "calibration: q={} alpha_t={} t_h={} T={}",
                    cal.quantizer.q, cal.threshold.alpha_t, cal.threshold.t_h, cal.threshold.threshold
                );
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) | Error::LengthMismatch { .. } | Error::Io(_) | Error::Json(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
