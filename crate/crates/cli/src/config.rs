//! Flat key=value config files (diffable experiment records) and their
//! merge with command-line overrides. Keys match the canonical rendering
//! the trainer embeds in checkpoints, so a config can round-trip through a
//! checkpoint file unchanged.

use jwdm_core::data::DatasetKind;
use jwdm_core::error::{Error, Result};
use jwdm_core::model::GanLoss;
use jwdm_core::trainer::TrainConfig;
use std::path::{Path, PathBuf};

pub fn config_from_text(text: &str) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    apply_text(&mut cfg, text, "<embedded config>")?;
    Ok(cfg)
}

fn apply_text(cfg: &mut TrainConfig, text: &str, origin: &str) -> Result<()> {
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: idx + 1,
            msg: format!("expected key=value, got '{line}'"),
        })?;
        apply_kv(cfg, key.trim(), value.trim()).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

fn apply_kv(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str| Error::InvalidConfig(format!("bad {what} value '{value}'"));
    match key {
        "epochs" => cfg.epochs = value.parse().map_err(|_| bad(key))?,
        "lr_decay_start" => cfg.lr_decay_start = value.parse().map_err(|_| bad(key))?,
        "base_lr" => cfg.base_lr = value.parse().map_err(|_| bad(key))?,
        "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad(key))?,
        "lambda_x" => cfg.lambda_x = value.parse().map_err(|_| bad(key))?,
        "lambda_y" => cfg.lambda_y = value.parse().map_err(|_| bad(key))?,
        "lambda_z" => cfg.lambda_z = value.parse().map_err(|_| bad(key))?,
        "lambda_mix" => cfg.lambda_mix = value.parse().map_err(|_| bad(key))?,
        "latent_dim" => cfg.latent_dim = value.parse().map_err(|_| bad(key))?,
        "hidden_dims" => cfg.hidden_dims = parse_dims(value)?,
        "seed" => cfg.seed = value.parse().map_err(|_| bad(key))?,
        "gan_loss" => cfg.gan_loss = GanLoss::parse(value)?,
        "disc_steps" => cfg.disc_steps = value.parse().map_err(|_| bad(key))?,
        "data_kind" => cfg.dataset.kind = DatasetKind::parse(value)?,
        "data_n" => cfg.dataset.n = value.parse().map_err(|_| bad(key))?,
        "data_seed" => cfg.dataset.seed = value.parse().map_err(|_| bad(key))?,
        "data_angle_deg" => cfg.dataset.angle_deg = value.parse().map_err(|_| bad(key))?,
        "data_scale" => cfg.dataset.scale = value.parse().map_err(|_| bad(key))?,
        "data_components" => cfg.dataset.components = value.parse().map_err(|_| bad(key))?,
        "data_radius" => cfg.dataset.radius = value.parse().map_err(|_| bad(key))?,
        "data_sigma" => cfg.dataset.sigma = value.parse().map_err(|_| bad(key))?,
        "data_width" => cfg.dataset.width = value.parse().map_err(|_| bad(key))?,
        "data_paired" => cfg.dataset.paired = value.parse().map_err(|_| bad(key))?,
        "out_dir" => cfg.out_dir = PathBuf::from(value),
        other => {
            return Err(Error::InvalidConfig(format!("unknown config key '{other}'")));
        }
    }
    Ok(())
}

pub fn parse_dims(value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|d| {
            d.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad layer width '{d}'")))
        })
        .collect()
}

/// Optional command-line overrides applied on top of a loaded config.
#[derive(Default, Debug, Clone)]
pub struct Overrides {
    pub epochs: Option<usize>,
    pub lr_decay_start: Option<usize>,
    pub base_lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub lambda_x: Option<f64>,
    pub lambda_y: Option<f64>,
    pub lambda_z: Option<f64>,
    pub lambda_mix: Option<f64>,
    pub latent_dim: Option<usize>,
    pub hidden_dims: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub gan_loss: Option<GanLoss>,
    pub disc_steps: Option<usize>,
    pub data_kind: Option<DatasetKind>,
    pub data_n: Option<usize>,
    pub data_seed: Option<u64>,
    pub data_angle_deg: Option<f64>,
    pub data_scale: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

/// Resolution order: defaults, then the `JDM_SEED` fallback, then keys
/// present in the config file, then explicit flags (flags win).
pub fn resolve(
    file: Option<&Path>,
    env_seed: Option<u64>,
    ov: &Overrides,
) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(seed) = env_seed {
        cfg.seed = seed;
    }
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)?;
        apply_text(&mut cfg, &text, &path.display().to_string())?;
    }
    let spec = &mut cfg.dataset;
    if let Some(v) = ov.data_kind {
        spec.kind = v;
    }
    if let Some(v) = ov.data_n {
        spec.n = v;
    }
    if let Some(v) = ov.data_seed {
        spec.seed = v;
    }
    if let Some(v) = ov.data_angle_deg {
        spec.angle_deg = v;
    }
    if let Some(v) = ov.data_scale {
        spec.scale = v;
    }
    if let Some(v) = ov.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = ov.lr_decay_start {
        cfg.lr_decay_start = v;
    }
    if let Some(v) = ov.base_lr {
        cfg.base_lr = v;
    }
    if let Some(v) = ov.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = ov.lambda_x {
        cfg.lambda_x = v;
    }
    if let Some(v) = ov.lambda_y {
        cfg.lambda_y = v;
    }
    if let Some(v) = ov.lambda_z {
        cfg.lambda_z = v;
    }
    if let Some(v) = ov.lambda_mix {
        cfg.lambda_mix = v;
    }
    if let Some(v) = ov.latent_dim {
        cfg.latent_dim = v;
    }
    if let Some(v) = &ov.hidden_dims {
        cfg.hidden_dims = v.clone();
    }
    if let Some(v) = ov.seed {
        cfg.seed = v;
    }
    if let Some(v) = ov.gan_loss {
        cfg.gan_loss = v;
    }
    if let Some(v) = ov.disc_steps {
        cfg.disc_steps = v;
    }
    if let Some(v) = &ov.out_dir {
        cfg.out_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}
