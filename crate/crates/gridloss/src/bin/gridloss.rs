//! Command-line front end: evaluate losses between grid files, run gradient
//! checks, run the training demo, and sweep FSS neighborhood sizes. Every
//! exit path prints JSON.

use clap::{Parser, Subcommand};
use gridloss::autodiff::{check, Tape};
use gridloss::discretize::DiscretizationMode;
use gridloss::losses::{spatial, LossSpec};
use gridloss::tensor::io::load_tensor;
use gridloss::train;
use gridloss::{GridError, GridTensor, Shape};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gridloss",
    about = "Losses and verification metrics for gridded forecasts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate losses/metrics between a truth and a prediction grid file.
    Evaluate {
        /// Truth grid (GRD1 or CSV).
        #[arg(long)]
        truth: PathBuf,
        /// Prediction grid (GRD1 or CSV).
        #[arg(long)]
        pred: PathBuf,
        /// Loss SPEC: inline JSON or name:key=val,... shorthand. Repeatable.
        #[arg(long = "loss", required = true)]
        losses: Vec<String>,
    },
    /// Compare reverse-mode gradients against finite differences on random
    /// inputs.
    Gradcheck {
        /// Loss SPEC to check.
        #[arg(long)]
        loss: String,
        /// Number of random trial points.
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Maximum allowed relative error.
        #[arg(long = "rel-tol", default_value_t = 1e-5)]
        rel_tol: f64,
    },
    /// Run a training demo from a JSON config (or the built-in two-phase
    /// demo when no config is given).
    TrainDemo {
        /// JSON config with model, data, and train sections.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate the fractions skill score at several mask sizes.
    FssSweep {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Comma-separated mask sizes, e.g. 1,3,5.
        #[arg(long, value_delimiter = ',')]
        masks: Vec<usize>,
        /// Discretization: hard, soft, or none.
        #[arg(long, default_value = "hard")]
        mode: String,
        #[arg(long, default_value_t = 0.5)]
        cutoff: f64,
        #[arg(long, default_value_t = 10.0)]
        c: f64,
    },
}

fn seed_from_env() -> u64 {
    std::env::var("GRIDLOSS_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

fn exit_code_for(e: &GridError) -> u8 {
    match e {
        GridError::DivergenceDetected { .. } => 4,
        GridError::GradientBlockedLoss(_) | GridError::HardModeAsLoss => 3,
        _ => 2,
    }
}

fn fail(e: &GridError) -> ExitCode {
    let obj = json!({ "error": { "code": e.code(), "message": e.to_string() } });
    println!("{obj}");
    ExitCode::from(exit_code_for(e))
}

fn eval_loss(spec: &LossSpec, truth: &GridTensor, pred: &GridTensor) -> gridloss::Result<f64> {
    let f = spec.build()?;
    let tape = Tape::new();
    let t = tape.constant(truth.clone());
    let p = tape.constant(pred.clone());
    f(&t, &p)?.scalar_value()
}

fn cmd_evaluate(truth: &PathBuf, pred: &PathBuf, losses: &[String]) -> gridloss::Result<Value> {
    let t = load_tensor(truth)?;
    let p = load_tensor(pred)?;
    let mut out = serde_json::Map::new();
    for raw in losses {
        let spec = LossSpec::parse(raw)?;
        let v = eval_loss(&spec, &t, &p)?;
        out.insert(spec.name.clone(), json!(v));
    }
    Ok(Value::Object(out))
}

/// Random trial tensors shaped for the named loss: binary truth for the
/// count-based measures, a supplementary channel where required, per-sample
/// flux pairs for the physics losses, unit-interval fields otherwise.
fn trial_pair(name: &str, rng: &mut ChaCha8Rng) -> gridloss::Result<(GridTensor, GridTensor)> {
    let base = name.strip_suffix(".loss").unwrap_or(name);
    let shape = Shape::new(2, 8, 8, 1)?;
    let rand_grid = |rng: &mut ChaCha8Rng, shape: Shape, lo: f64, hi: f64| {
        let data = (0..shape.len()).map(|_| rng.gen_range(lo..hi)).collect();
        GridTensor::new(shape, data)
    };
    match base {
        "csi" | "iou" | "iou_strict" | "dice" | "dice_per_grid_point" | "tversky" | "fss"
        | "fss_per_sample" => {
            let truth = rand_grid(rng, shape, 0.0, 1.0)?.greater_scalar(0.6);
            // keep scores away from the sigmoid cutoff kink region
            let pred = rand_grid(rng, shape, 0.05, 0.95)?;
            Ok((truth, pred))
        }
        "ssim" => Ok((
            rand_grid(rng, shape, 0.05, 0.95)?,
            rand_grid(rng, shape, 0.05, 0.95)?,
        )),
        "mse_supplementary_weighted" => {
            let s2 = Shape::new(2, 8, 8, 2)?;
            Ok((rand_grid(rng, s2, 0.0, 2.0)?, rand_grid(rng, shape, 0.0, 2.0)?))
        }
        _ => Ok((
            rand_grid(rng, shape, -2.0, 2.0)?,
            rand_grid(rng, shape, -2.0, 2.0)?,
        )),
    }
}

fn cmd_gradcheck(loss: &str, trials: usize, rel_tol: f64) -> gridloss::Result<(Value, bool)> {
    let spec = LossSpec::parse(loss)?;
    let f = spec.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from_env());
    let mut reports = Vec::new();
    let mut all_pass = true;
    for _ in 0..trials {
        let (truth, pred) = trial_pair(&spec.name, &mut rng)?;
        let f = f.clone();
        let report = check::grad_check(
            &spec.name,
            move |tape, params| {
                let t = tape.constant(truth.clone());
                f(&t, &params[0])
            },
            &[pred],
            check::DEFAULT_FD_STEP,
            rel_tol,
        )?;
        if !report.blocked.is_empty() {
            return Err(GridError::GradientBlockedLoss(report.blocked.join(", ")));
        }
        all_pass &= report.pass;
        reports.push(report);
    }
    let v = json!({
        "loss": spec.name,
        "trials": trials,
        "rel_tol": rel_tol,
        "pass": all_pass,
        "reports": reports,
    });
    Ok((v, all_pass))
}

#[derive(serde::Deserialize)]
struct ModelCfg {
    rows: usize,
    cols: usize,
    #[serde(default)]
    smooth_input: bool,
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum DataCfg {
    Synthetic {
        synthetic: SynthCfg,
    },
    Inline {
        samples: usize,
        x: Vec<f64>,
        y: Vec<f64>,
    },
}

#[derive(serde::Deserialize)]
struct SynthCfg {
    samples: usize,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(serde::Deserialize)]
struct DemoConfig {
    model: ModelCfg,
    data: DataCfg,
    train: train::TrainConfig,
}

fn cmd_train_demo(config: Option<&PathBuf>) -> gridloss::Result<Vec<String>> {
    let mut lines = Vec::new();
    let (model, reports) = match config {
        None => train::run_two_phase_demo(seed_from_env())?,
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let cfg: DemoConfig =
                serde_json::from_str(&text).map_err(|e| GridError::Parse(e.to_string()))?;
            let model = train::ToyModel::zeros(cfg.model.rows, cfg.model.cols, cfg.model.smooth_input)?;
            let (x, y) = match cfg.data {
                DataCfg::Synthetic { synthetic } => train::synthetic_blob_data(
                    synthetic.samples,
                    cfg.model.rows,
                    cfg.model.cols,
                    synthetic.seed.unwrap_or_else(seed_from_env),
                )?,
                DataCfg::Inline { samples, x, y } => {
                    let shape = Shape::new(samples, cfg.model.rows, cfg.model.cols, 1)?;
                    (GridTensor::new(shape, x)?, GridTensor::new(shape, y)?)
                }
            };
            train::train(model, &x, &y, &cfg.train)?
        }
    };
    for r in &reports {
        lines.push(serde_json::to_string(r).expect("report serializes"));
    }
    let phases = reports.iter().map(|r| r.phase).max().map_or(0, |p| p + 1);
    let summary = json!({
        "summary": {
            "epochs": reports.len(),
            "phases": phases,
            "final_weights": model.weights.data(),
            "final_bias": model.bias.data(),
        }
    });
    lines.push(summary.to_string());
    Ok(lines)
}

fn cmd_fss_sweep(
    truth: &PathBuf,
    pred: &PathBuf,
    masks: &[usize],
    mode: &str,
    cutoff: f64,
    c: f64,
) -> gridloss::Result<Value> {
    let t = load_tensor(truth)?;
    let p = load_tensor(pred)?;
    let discretization = match mode {
        "hard" => DiscretizationMode::Hard { cutoff },
        "soft" => DiscretizationMode::Soft { cutoff, c },
        "none" => DiscretizationMode::None,
        other => return Err(GridError::Parse(format!("unknown mode \"{other}\""))),
    };
    let mut values = Vec::new();
    for &mask_size in masks {
        let cfg = spatial::FssConfig {
            mask_size,
            discretization,
            soft_form: Default::default(),
        };
        let tape = Tape::new();
        let tv = tape.constant(t.clone());
        let pv = tape.constant(p.clone());
        values.push(spatial::fss_score(&tv, &pv, &cfg)?.scalar_value()?);
    }
    Ok(json!({ "masks": masks, "fss": values }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail(&GridError::Parse(e.to_string()));
        }
    };
    match cli.command {
        Command::Evaluate { truth, pred, losses } => {
            match cmd_evaluate(&truth, &pred, &losses) {
                Ok(v) => {
                    println!("{v}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Gradcheck { loss, trials, rel_tol } => {
            match cmd_gradcheck(&loss, trials, rel_tol) {
                Ok((v, pass)) => {
                    println!("{v}");
                    if pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::TrainDemo { config } => match cmd_train_demo(config.as_ref()) {
            Ok(lines) => {
                for line in lines {
                    println!("{line}");
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::FssSweep { truth, pred, masks, mode, cutoff, c } => {
            match cmd_fss_sweep(&truth, &pred, &masks, &mode, cutoff, c) {
                Ok(v) => {
                    println!("{v}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
