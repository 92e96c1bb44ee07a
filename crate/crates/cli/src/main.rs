//! Command-line front end: dataset generation, training with resume,
//! latent interpolation, the transport-decomposition verifier, evaluation,
//! and the latent-weight sweep.
//!
//! Every subcommand is deterministic given its flags and seed. Exit codes:
//! 0 success, 1 runtime failure, 2 usage error.

mod config;
mod manifest;
mod theorem;

use clap::{Args, Parser, Subcommand};
use config::Overrides;
use jwdm_core::data::{self, DatasetKind, GeneratorSpec};
use jwdm_core::error::{Error, Result};
use jwdm_core::metrics::{self, EvalConfig, EvalReport};
use jwdm_core::model::GanLoss;
use jwdm_core::synthesis;
use jwdm_core::trainer::{self, Checkpoint, TrainConfig};
use manifest::ManifestBuilder;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "jwdm",
    about = "Cross-domain auto-encoder/GAN lab on 2-D toy domains, with exact transport oracles",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a two-domain dataset (x.csv, y.csv, spec.json).
    GenData(GenDataArgs),
    /// Train a model; writes checkpoint, training log, and manifest.
    Train(TrainArgs),
    /// Interpolate between two source inputs through the latent space.
    Synth(SynthArgs),
    /// Check the additive-cost transport decomposition on random instances.
    VerifyTheorem(VerifyArgs),
    /// Evaluate a checkpoint on held-out data.
    Eval(EvalArgs),
    /// Train one model per latent-weight value and tabulate the metrics.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Dataset family: gauss-mix, ring, or two-moons-affine.
    #[arg(long, value_parser = DatasetKind::parse)]
    kind: DatasetKind,
    /// Samples per domain.
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Generator seed (falls back to JDM_SEED, then 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth map rotation, degrees.
    #[arg(long, default_value_t = 90.0)]
    angle: f64,
    /// Ground-truth map scale factor.
    #[arg(long, default_value_t = 0.5)]
    scale: f64,
    /// Mixture components (gauss-mix).
    #[arg(long, default_value_t = 8)]
    components: usize,
    /// Base radius of the mixture circle / annulus.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Component noise (gauss-mix, two-moons).
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Annulus half-width (ring).
    #[arg(long, default_value_t = 0.1)]
    width: f64,
}

#[derive(Args)]
struct TrainFlags {
    /// Key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Epoch budget; the learning rate reaches zero here (default 200).
    #[arg(long)]
    epochs: Option<usize>,
    /// Epoch where the linear lr decay begins (default 100).
    #[arg(long)]
    lr_decay_start: Option<usize>,
    /// Adam learning rate before decay (default 0.0002).
    #[arg(long)]
    base_lr: Option<f64>,
    /// Minibatch size (default 64).
    #[arg(long)]
    batch_size: Option<usize>,
    /// Data-space divergence weight for domain X (default 0.1).
    #[arg(long)]
    lambda_x: Option<f64>,
    /// Data-space divergence weight for domain Y (default 0.1).
    #[arg(long)]
    lambda_y: Option<f64>,
    /// Latent divergence weight (default 0.1).
    #[arg(long)]
    lambda_z: Option<f64>,
    /// Weight of the cycle fake vs the translation fake, in (0,1)
    /// (default 0.5).
    #[arg(long)]
    lambda_mix: Option<f64>,
    /// Shared latent dimensionality (default 8).
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Hidden layer widths, comma separated (default 64,64).
    #[arg(long)]
    hidden_dims: Option<DimsArg>,
    /// Experiment seed (falls back to JDM_SEED, then 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Generator objective: non-saturating or minimax.
    #[arg(long, value_parser = GanLoss::parse)]
    gan_loss: Option<GanLoss>,
    /// Discriminator ascents per generator descent.
    #[arg(long)]
    disc_steps: Option<usize>,
    /// Dataset family (when generating training data).
    #[arg(long, value_parser = DatasetKind::parse)]
    data_kind: Option<DatasetKind>,
    #[arg(long)]
    data_n: Option<usize>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    data_angle_deg: Option<f64>,
    #[arg(long)]
    data_scale: Option<f64>,
    /// Load training data from a gen-data directory instead of generating.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Output directory for checkpoint, log, and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    flags: TrainFlags,
    /// Continue from this checkpoint instead of initializing.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// With --resume: extra epochs to run (default: the remaining budget).
    #[arg(long)]
    extra_epochs: Option<usize>,
    /// Stop after this many epochs of the budget (the schedule still spans
    /// the full budget); later resume picks up from the checkpoint.
    #[arg(long)]
    stop_after: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Source-domain start point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    begin: PointArg,
    /// Source-domain end point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    end: PointArg,
    /// Interpolation segments; produces n+1 frames per domain.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(2..))]
    n: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Optional scatter plot of both trajectories.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Arbitrary-coupling instances.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    instances: u64,
    /// Product-measure instances (the equality regime).
    #[arg(long, default_value_t = 50)]
    product_instances: u64,
    /// Max atoms per joint support.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..=6))]
    max_support: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Report CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Evaluate against this gen-data directory instead of the training
    /// spec's held-out stream.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Held-out samples per domain.
    #[arg(long, default_value_t = 512)]
    heldout_n: usize,
    /// Points for the exact transport metric (<= 64); 0 disables it.
    #[arg(long, default_value_t = 64)]
    w2_n: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: TrainFlags,
    /// Latent-weight values to train, comma separated.
    #[arg(long, default_value = "0.01,0.1,1,10")]
    values: PointArg,
}

/// Comma-separated f64 list for clap.
#[derive(Clone, Debug)]
struct PointArg(Vec<f64>);

impl std::str::FromStr for PointArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let vals: std::result::Result<Vec<f64>, _> = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number '{v}'")))
            .collect();
        let vals = vals?;
        if vals.is_empty() {
            return Err("need at least one value".into());
        }
        Ok(PointArg(vals))
    }
}

/// Comma-separated layer widths for clap.
#[derive(Clone, Debug)]
struct DimsArg(Vec<usize>);

impl std::str::FromStr for DimsArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        config::parse_dims(s).map(DimsArg).map_err(|e| e.to_string())
    }
}

fn env_seed() -> Option<u64> {
    std::env::var("JDM_SEED").ok().and_then(|v| v.parse().ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::GenData(args) => cmd_gen_data(args),
        Cmd::Train(args) => cmd_train(args),
        Cmd::Synth(args) => cmd_synth(args),
        Cmd::VerifyTheorem(args) => cmd_verify_theorem(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    let spec = GeneratorSpec {
        kind: args.kind,
        n: args.n as usize,
        seed: args.seed.or_else(env_seed).unwrap_or(1),
        angle_deg: args.angle,
        scale: args.scale,
        components: args.components,
        radius: args.radius,
        sigma: args.sigma,
        width: args.width,
        paired: false,
    };
    let mut manifest = ManifestBuilder::new("gen-data", serde_json::to_value(&spec)?);
    let ds = data::gen_domain_pair(&spec)?;
    data::save_dataset(&ds, &args.out)?;
    for name in ["x.csv", "y.csv", "spec.json"] {
        manifest.artifact(&args.out.join(name));
    }
    manifest.write(&args.out, 0)?;
    println!(
        "wrote {} samples per domain to {}",
        spec.n,
        args.out.display()
    );
    Ok(())
}

fn overrides_from(flags: &TrainFlags) -> Overrides {
    Overrides {
        epochs: flags.epochs,
        lr_decay_start: flags.lr_decay_start,
        base_lr: flags.base_lr,
        batch_size: flags.batch_size,
        lambda_x: flags.lambda_x,
        lambda_y: flags.lambda_y,
        lambda_z: flags.lambda_z,
        lambda_mix: flags.lambda_mix,
        latent_dim: flags.latent_dim,
        hidden_dims: flags.hidden_dims.as_ref().map(|d| d.0.clone()),
        seed: flags.seed,
        gan_loss: flags.gan_loss,
        disc_steps: flags.disc_steps,
        data_kind: flags.data_kind,
        data_n: flags.data_n,
        data_seed: flags.data_seed,
        data_angle_deg: flags.data_angle_deg,
        data_scale: flags.data_scale,
        out_dir: flags.out.clone(),
    }
}

fn resolve_train(flags: &TrainFlags) -> Result<(TrainConfig, data::DomainDataset)> {
    let mut cfg = config::resolve(flags.config.as_deref(), env_seed(), &overrides_from(flags))?;
    let ds = match &flags.data_dir {
        Some(dir) => {
            let ds = data::load_dataset(dir)?;
            match &ds.spec {
                // Keep the config's dataset record consistent with what we
                // actually train on, so the checkpoint can regenerate it.
                Some(spec) => cfg.dataset = spec.clone(),
                None => eprintln!(
                    "note: {} has no spec.json; the checkpoint cannot regenerate this data, \
                     so pass --data-dir again when resuming or evaluating",
                    dir.display()
                ),
            }
            ds
        }
        None => data::gen_domain_pair(&cfg.dataset)?,
    };
    Ok((cfg, ds))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let (cfg, ds) = resolve_train(&args.flags)?;
    let mut manifest =
        ManifestBuilder::new("train", serde_json::Value::String(cfg.canonical_text()));
    let outcome = match &args.resume {
        Some(ckpt_path) => {
            let ckpt = Checkpoint::load(ckpt_path)?;
            let extra = args
                .extra_epochs
                .unwrap_or_else(|| cfg.epochs.saturating_sub(ckpt.epoch));
            trainer::resume(&cfg, &ds, &ckpt, extra)?
        }
        None => match args.stop_after {
            Some(stop) => trainer::train_partial(&cfg, &ds, stop)?,
            None => trainer::train(&cfg, &ds)?,
        },
    };
    manifest.artifact(&outcome.checkpoint_path);
    manifest.artifact(&cfg.out_dir.join(trainer::TRAIN_LOG_FILE));
    manifest.write(&cfg.out_dir, 0)?;
    let last = outcome.log.last();
    println!(
        "trained to epoch {} ({} log rows); total loss {}",
        outcome.epochs_done,
        outcome.log.len(),
        last.map_or("n/a".into(), |r| r.losses.total.to_string())
    );
    println!("checkpoint: {}", outcome.checkpoint_path.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let bundle = ckpt.bundle()?;
    let traj = synthesis::interpolate(
        &bundle,
        &args.begin.0,
        &args.end.0,
        args.n as usize,
        Some(ckpt.id()),
    )?;
    synthesis::export_csv(&traj, &args.out)?;
    let config = serde_json::json!({
        "checkpoint": args.checkpoint.display().to_string(),
        "checkpoint_id": ckpt.id(),
        "begin": args.begin.0,
        "end": args.end.0,
        "n": args.n,
    });
    let mut manifest = ManifestBuilder::new("synth", config);
    manifest.artifact(&args.out);
    if let Some(plot) = &args.plot {
        synthesis::render_png(&traj, plot, 512)?;
        manifest.artifact(plot);
    }
    manifest.write(&out_parent(&args.out), 0)?;
    let (step_src, step_tgt) = traj.max_step();
    println!(
        "{} frames per domain; max frame step source {:.6} target {:.6}",
        traj.frame_count(),
        step_src,
        step_tgt
    );
    Ok(())
}

fn cmd_verify_theorem(args: VerifyArgs) -> Result<()> {
    let seed = args.seed.or_else(env_seed).unwrap_or(1);
    let instances = theorem::run_instances(
        seed,
        args.instances as usize,
        args.product_instances as usize,
        args.max_support as usize,
    )?;
    std::fs::write(&args.out, theorem::csv_text(&instances))?;
    let verdict = theorem::judge(&instances);
    let config = serde_json::json!({
        "instances": args.instances,
        "product_instances": args.product_instances,
        "max_support": args.max_support,
        "seed": seed,
    });
    let mut manifest = ManifestBuilder::new("verify-theorem", config);
    manifest.artifact(&args.out);
    manifest.write(&out_parent(&args.out), 0)?;
    println!(
        "{} instances ({} with strictly positive gap); worst gap {:.3e}; worst |product gap| {:.3e}",
        instances.len(),
        verdict.positive_gap_count,
        verdict.worst_gap,
        verdict.worst_product_gap,
    );
    println!(
        "widest instance #{} ({}):",
        verdict.widest_instance,
        instances[verdict.widest_instance].kind.name()
    );
    println!("{}", instances[verdict.widest_instance].report);
    println!("{}", if verdict.pass { "PASS" } else { "FAIL" });
    if !verdict.pass {
        return Err(Error::InvalidArg(
            "decomposition verdict failed; see report CSV".into(),
        ));
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let bundle = ckpt.bundle()?;
    let train_cfg = config::config_from_text(&ckpt.config_text)?;
    let ds = match &args.data_dir {
        Some(dir) => data::load_dataset(dir)?,
        None => data::gen_domain_pair(&train_cfg.dataset)?,
    };
    let report = metrics::evaluate(
        &bundle,
        &ds,
        &EvalConfig {
            heldout_n: args.heldout_n,
            w2_n: (args.w2_n > 0).then_some(args.w2_n),
            lambda_z: train_cfg.lambda_z,
            task: train_cfg.dataset.kind.to_string(),
        },
    )?;
    let mut text = String::from(EvalReport::csv_header());
    text.push('\n');
    text.push_str(&report.csv_row());
    text.push('\n');
    std::fs::write(&args.out, text)?;
    let config = serde_json::json!({
        "checkpoint": args.checkpoint.display().to_string(),
        "checkpoint_id": ckpt.id(),
        "heldout_n": args.heldout_n,
        "w2_n": args.w2_n,
    });
    let mut manifest = ManifestBuilder::new("eval", config);
    manifest.artifact(&args.out);
    manifest.write(&out_parent(&args.out), 0)?;
    println!("{}", EvalReport::csv_header());
    println!("{}", report.csv_row());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let (cfg, ds) = resolve_train(&args.flags)?;
    let mut manifest = ManifestBuilder::new(
        "sweep",
        serde_json::json!({
            "values": args.values.0,
            "config": cfg.canonical_text(),
        }),
    );
    let rows = trainer::lambda_z_sweep(&cfg, &ds, &args.values.0)?;
    let table = cfg.out_dir.join("sweep.csv");
    trainer::write_sweep_csv(&rows, &table)?;
    manifest.artifact(&table);
    manifest.write(&cfg.out_dir, 0)?;
    println!("{}", EvalReport::csv_header());
    for row in &rows {
        println!("{}", row.report.csv_row());
    }
    println!("table: {}", table.display());
    Ok(())
}

fn out_parent(path: &std::path::Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."))
}
