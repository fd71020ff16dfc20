//! Command-line surface: dataset generation, training, prediction,
//! evaluation, the gradient-check suite, and flow visualization.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::data::{generate, read_sample, sample_scene, write_dataset, Profile};
use crate::error::{Error, Result};
use crate::eval::evaluate_checkpoints;
use crate::gradsuite::run_suite;
use crate::model::{predict_rollout, SeqBatch};
use crate::train::{
    build_car, build_mme, load_checkpoint, read_meta, train_stage1, train_stage2, TrainConfig,
};
use crate::viz::{flow_to_color, save_frame_png, save_rgb_png};

#[derive(Parser)]
#[command(
    name = "avpred",
    about = "Audio-conditioned video prediction on synthetic multimodal data",
    version
)]
struct Cli {
    /// Global seed override (AVPRED_SEED is consulted when absent).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    GenData(GenDataArgs),
    /// Train stage 1 (flow) or stage 2 (refinement).
    Train(TrainArgs),
    /// Roll out a trained model on one sample and dump PNGs plus raw arrays.
    Predict(PredictArgs),
    /// Evaluate trained checkpoints over a dataset split.
    Eval(EvalArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck,
    /// Colorize a dataset sample's ground-truth flow fields.
    VizFlow(VizFlowArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
    #[arg(long, default_value = "default")]
    profile: String,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    sprites: u8,
    #[arg(long, default_value = "train")]
    split: String,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    stage: u8,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    sample: usize,
    #[arg(long)]
    mme: PathBuf,
    #[arg(long)]
    car: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    mme: PathBuf,
    #[arg(long)]
    car: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct VizFlowArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    sample: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Parse argv and run; never panics on bad input.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    return 0;
                }
                _ => 1,
            };
            eprint!("{e}");
            return code;
        }
    };
    let seed_override = cli.seed.or_else(|| {
        std::env::var("AVPRED_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    match run(cli.command, seed_override) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(cmd: Command, seed_override: Option<u64>) -> Result<()> {
    match cmd {
        Command::GenData(args) => gen_data(args, seed_override),
        Command::Train(args) => train(args, seed_override),
        Command::Predict(args) => predict(args),
        Command::Eval(args) => eval_cmd(args),
        Command::Gradcheck => gradcheck(),
        Command::VizFlow(args) => viz_flow(args),
    }
}

fn gen_data(args: GenDataArgs, seed_override: Option<u64>) -> Result<()> {
    let profile = Profile::parse(&args.profile)?;
    let seed = seed_override.unwrap_or(args.gen_seed);
    let mut samples = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let spec = sample_scene(profile, args.sprites as usize, seed, i as u64);
        samples.push(generate(&spec)?);
    }
    let manifest = write_dataset(&samples, &args.out, &args.split)?;
    println!(
        "wrote {} samples ({}x{}, T={}) to {}",
        manifest.count,
        samples[0].spec.height,
        samples[0].spec.width,
        samples[0].spec.t_total,
        args.out.display()
    );
    Ok(())
}

fn load_config(path: Option<&Path>, seed_override: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => TrainConfig::from_json(&fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn train(args: TrainArgs, seed_override: Option<u64>) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref(), seed_override)?;
    cfg.data = Some(args.data.display().to_string());
    let dataset = crate::data::read_dataset(&args.data)?;
    let val = match &cfg.val_data {
        Some(dir) => Some(crate::data::read_dataset(Path::new(dir))?),
        None => None,
    };
    match args.stage {
        1 => {
            let out = train_stage1(
                &dataset,
                val.as_deref(),
                &cfg,
                Some(&args.out),
                args.resume.as_deref(),
            )?;
            write_history(&args.out, &out.history)?;
            for e in &out.history {
                print_epoch(e);
            }
        }
        2 => {
            let mme_ckpt = cfg.mme_checkpoint.clone().ok_or_else(|| {
                Error::Config("stage 2 requires mme_checkpoint in the config".into())
            })?;
            let out = train_stage2(
                &dataset,
                val.as_deref(),
                &cfg,
                Path::new(&mme_ckpt),
                Some(&args.out),
                args.resume.as_deref(),
            )?;
            write_history(&args.out, &out.history)?;
            for e in &out.history {
                print_epoch(e);
            }
        }
        _ => unreachable!("clap range"),
    }
    Ok(())
}

fn write_history(dir: &Path, history: &crate::train::History) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("history.json"),
        serde_json::to_string_pretty(history)?,
    )?;
    Ok(())
}

fn print_epoch(e: &crate::train::EpochStats) {
    match e.val_loss {
        Some(v) => println!("epoch {:>4}  train {:.6}  val {:.6}", e.epoch, e.train_loss, v),
        None => println!("epoch {:>4}  train {:.6}", e.epoch, e.train_loss),
    }
}

fn predict(args: PredictArgs) -> Result<()> {
    let seq = read_sample(&args.data, args.sample)?;
    let mme_meta = read_meta(&args.mme)?;
    let dataset = vec![seq];
    let (mme_ps, mme) = build_mme(&mme_meta.config, &dataset)?;
    load_checkpoint(&args.mme, "mme", &mme_ps, None)?;
    let car_meta = read_meta(&args.car)?;
    let (car_ps, car) = build_car(&car_meta.config, &dataset)?;
    load_checkpoint(&args.car, "car", &car_ps, None)?;

    let seq = &dataset[0];
    let spec = &seq.spec;
    let horizon = args.horizon.unwrap_or(spec.t_total - spec.k_seen);
    let batch = SeqBatch::new(&[seq])?;
    let roll = predict_rollout(&mme, &car, &batch, horizon)?;

    fs::create_dir_all(&args.out)?;
    let (c, h, w) = (spec.channels, spec.height, spec.width);
    let mut flow_raw = Vec::new();
    let mut frame_raw = Vec::new();
    for (i, (frame, flow)) in roll.refined.iter().zip(&roll.flows).enumerate() {
        let t = spec.k_seen + i + 1;
        save_frame_png(
            frame.data(),
            c,
            h,
            w,
            &args.out.join(format!("frame_{t:03}.png")),
        )?;
        let rgb = flow_to_color(flow.data(), h, w)?;
        save_rgb_png(&rgb, h, w, &args.out.join(format!("flow_{t:03}.png")))?;
        frame_raw.extend_from_slice(frame.data());
        flow_raw.extend_from_slice(flow.data());
    }
    let write_bin = |name: &str, data: &[f64]| -> Result<()> {
        let mut bytes = Vec::with_capacity(data.len() * 4);
        for v in data {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        fs::write(args.out.join(name), bytes)?;
        Ok(())
    };
    write_bin("frames.bin", &frame_raw)?;
    write_bin("flows.bin", &flow_raw)?;
    println!(
        "wrote {} predicted frames and flows to {}",
        horizon,
        args.out.display()
    );
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let report = evaluate_checkpoints(&args.data, &args.mme, &args.car, args.horizon)?;
    print!("{}", report.table());
    if let Some(out) = args.out {
        fs::write(&out, serde_json::to_string_pretty(&report)?)?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn gradcheck() -> Result<()> {
    let outcomes = run_suite()?;
    let mut all_ok = true;
    for o in &outcomes {
        let status = if o.passed() { "PASS" } else { "FAIL" };
        println!("{status} {:<24} max_rel {:>12.3e}  tol {:>8.0e}", o.name, o.max_rel, o.tol);
        all_ok &= o.passed();
    }
    if all_ok {
        Ok(())
    } else {
        Err(Error::Training("gradient checks failed".into()))
    }
}

fn viz_flow(args: VizFlowArgs) -> Result<()> {
    let seq = read_sample(&args.data, args.sample)?;
    fs::create_dir_all(&args.out)?;
    let (h, w) = (seq.spec.height, seq.spec.width);
    for t in 0..seq.spec.t_total {
        let rgb = flow_to_color(seq.flow(t), h, w)?;
        save_rgb_png(&rgb, h, w, &args.out.join(format!("flow_{t:03}.png")))?;
    }
    println!("wrote {} flow images to {}", seq.spec.t_total, args.out.display());
    Ok(())
}
