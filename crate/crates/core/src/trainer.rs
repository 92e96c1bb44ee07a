//! Alternating optimization: per step, `disc_steps` ascents on the weighted
//! discriminator objective, then one descent on the full generator loss.
//! Fixed epoch budget, per-epoch checkpointing, and bit-identical resume.
//!
//! Determinism contract: every random choice flows from the config seed
//! through named ChaCha streams (init, shuffling, prior draws), and the
//! checkpoint records the stream positions, so `train(n)` equals
//! `train(n-m)` followed by `resume(m)` bit for bit.

use crate::autodiff::Graph;
use crate::data::{self, DomainDataset, GeneratorSpec};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{self, EvalConfig, EvalReport};
use crate::model::{
    adv_x_terms, adv_y_terms, adv_z_terms, forward_paths, sample_prior, total_generator_loss,
    GanLoss, LossBreakdown, LossWeights, ModelBundle,
};
use crate::nn::{adam_step, Activation, AdamState, Layer, LrSchedule, Mlp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"JWDM0001";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAIN_LOG_FILE: &str = "training_log.csv";

/// GAN-standard Adam moments.
pub const ADAM_BETA1: f64 = 0.5;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_PRIOR: u64 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Total epoch budget (decay reaches zero here).
    pub epochs: usize,
    /// Constant learning rate until this epoch, then linear decay.
    pub lr_decay_start: usize,
    pub base_lr: f64,
    pub batch_size: usize,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub lambda_z: f64,
    pub lambda_mix: f64,
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
    pub gan_loss: GanLoss,
    /// Discriminator ascents per generator descent.
    pub disc_steps: usize,
    pub dataset: GeneratorSpec,
    pub out_dir: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr_decay_start: 100,
            base_lr: 2e-4,
            batch_size: 64,
            lambda_x: 0.1,
            lambda_y: 0.1,
            lambda_z: 0.1,
            lambda_mix: 0.5,
            latent_dim: 8,
            hidden_dims: vec![64, 64],
            seed: 1,
            gan_loss: GanLoss::NonSaturating,
            disc_steps: 1,
            dataset: GeneratorSpec::default(),
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr_decay_start > self.epochs {
            return Err(Error::InvalidConfig(format!(
                "lr_decay_start {} past epochs {}",
                self.lr_decay_start, self.epochs
            )));
        }
        if self.disc_steps == 0 {
            return Err(Error::InvalidConfig("disc_steps must be >= 1".into()));
        }
        if self.lambda_x < 0.0 || self.lambda_y < 0.0 || self.lambda_z < 0.0 {
            return Err(Error::InvalidConfig("loss weights must be nonnegative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.latent_dim == 0 {
            return Err(Error::InvalidConfig("latent_dim must be >= 1".into()));
        }
        Ok(())
    }

    /// Flat key=value rendering in fixed order; the diffable experiment
    /// record and the hash input.
    pub fn canonical_text(&self) -> String {
        let hidden: Vec<String> = self.hidden_dims.iter().map(|d| d.to_string()).collect();
        format!(
            "epochs={}\nlr_decay_start={}\nbase_lr={}\nbatch_size={}\n\
             lambda_x={}\nlambda_y={}\nlambda_z={}\nlambda_mix={}\n\
             latent_dim={}\nhidden_dims={}\nseed={}\ngan_loss={}\ndisc_steps={}\n\
             data_kind={}\ndata_n={}\ndata_seed={}\ndata_angle_deg={}\ndata_scale={}\n\
             data_components={}\ndata_radius={}\ndata_sigma={}\ndata_width={}\ndata_paired={}\n\
             out_dir={}\n",
            self.epochs,
            self.lr_decay_start,
            self.base_lr,
            self.batch_size,
            self.lambda_x,
            self.lambda_y,
            self.lambda_z,
            self.lambda_mix,
            self.latent_dim,
            hidden.join(","),
            self.seed,
            self.gan_loss.name(),
            self.disc_steps,
            self.dataset.kind,
            self.dataset.n,
            self.dataset.seed,
            self.dataset.angle_deg,
            self.dataset.scale,
            self.dataset.components,
            self.dataset.radius,
            self.dataset.sigma,
            self.dataset.width,
            self.dataset.paired,
            self.out_dir.display(),
        )
    }

    /// Canonical text minus the output location, which has no bearing on
    /// the trained result; this is what checkpoints embed.
    pub fn portable_text(&self) -> String {
        self.canonical_text()
            .lines()
            .filter(|l| !l.starts_with("out_dir="))
            .fold(String::new(), |mut acc, l| {
                acc.push_str(l);
                acc.push('\n');
                acc
            })
    }

    /// FNV-1a over the portable text.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.portable_text().as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    pub fn schedule(&self) -> Result<LrSchedule> {
        LrSchedule::new(self.base_lr, self.lr_decay_start, self.epochs)
    }
}

/// One training-log record; rows are strictly increasing in (epoch, step).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub losses: LossBreakdown,
}

pub const LOG_HEADER: &str =
    "epoch,step,lr,recon_x,recon_y,adv_x,adv_y,adv_z1,adv_z2,disc_x,disc_y,disc_z,total";

impl LogRow {
    pub fn csv_row(&self) -> String {
        let l = &self.losses;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.step,
            self.lr,
            l.recon_x,
            l.recon_y,
            l.adv_x,
            l.adv_y,
            l.adv_z1,
            l.adv_z2,
            l.disc_x,
            l.disc_y,
            l.disc_z,
            l.total
        )
    }
}

pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub log: Vec<LogRow>,
    /// Epochs completed over the model's lifetime (not just this call).
    pub epochs_done: usize,
    pub checkpoint_path: PathBuf,
}

struct TrainerState {
    bundle: ModelBundle,
    gen_opt: AdamState,
    disc_opt: AdamState,
    shuffle_rng: ChaCha8Rng,
    prior_rng: ChaCha8Rng,
    epoch: usize,
    global_step: u64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gen_param_sizes(bundle: &ModelBundle) -> Vec<usize> {
    [&bundle.e1, &bundle.e2, &bundle.g1, &bundle.g2]
        .iter()
        .flat_map(|n| n.param_sizes())
        .collect()
}

fn disc_param_sizes(bundle: &ModelBundle) -> Vec<usize> {
    [&bundle.dx, &bundle.dy, &bundle.dz]
        .iter()
        .flat_map(|n| n.param_sizes())
        .collect()
}

impl TrainerState {
    fn fresh(cfg: &TrainConfig, data_dim: usize) -> Result<Self> {
        let mut init_rng = stream(cfg.seed, STREAM_INIT);
        let bundle = ModelBundle::init(data_dim, cfg.latent_dim, &cfg.hidden_dims, &mut init_rng)?;
        let gen_opt = AdamState::new(&gen_param_sizes(&bundle), ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        let disc_opt = AdamState::new(&disc_param_sizes(&bundle), ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        Ok(Self {
            bundle,
            gen_opt,
            disc_opt,
            shuffle_rng: stream(cfg.seed, STREAM_SHUFFLE),
            prior_rng: stream(cfg.seed, STREAM_PRIOR),
            epoch: 0,
            global_step: 0,
        })
    }
}

/// Full run over the config's epoch budget.
pub fn train(cfg: &TrainConfig, ds: &DomainDataset) -> Result<TrainOutcome> {
    train_partial(cfg, ds, cfg.epochs)
}

/// Run only the first `stop_after` epochs of the budget (the lr schedule
/// still spans the full budget). Checkpoints land in `cfg.out_dir`.
pub fn train_partial(cfg: &TrainConfig, ds: &DomainDataset, stop_after: usize) -> Result<TrainOutcome> {
    cfg.validate()?;
    let state = TrainerState::fresh(cfg, ds.dim())?;
    run_epochs(cfg, ds, state, stop_after.min(cfg.epochs))
}

/// Continue a checkpointed run for `extra` more epochs (clamped to the
/// budget), exactly as if it had never stopped.
pub fn resume(
    cfg: &TrainConfig,
    ds: &DomainDataset,
    checkpoint: &Checkpoint,
    extra: usize,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if checkpoint.config_hash != cfg.hash() {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint hash {:016x} vs config hash {:016x}",
            checkpoint.config_hash,
            cfg.hash()
        )));
    }
    let state = checkpoint.restore(cfg)?;
    let target = (state.epoch + extra).min(cfg.epochs);
    run_epochs(cfg, ds, state, target)
}

fn run_epochs(
    cfg: &TrainConfig,
    ds: &DomainDataset,
    mut state: TrainerState,
    target_epoch: usize,
) -> Result<TrainOutcome> {
    if ds.x.rows() < cfg.batch_size || ds.y.rows() < cfg.batch_size {
        return Err(Error::InvalidConfig(format!(
            "dataset ({} / {}) smaller than batch size {}",
            ds.x.rows(),
            ds.y.rows(),
            cfg.batch_size
        )));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let schedule = cfg.schedule()?;
    let weights = LossWeights {
        lambda_x: cfg.lambda_x,
        lambda_y: cfg.lambda_y,
        lambda_z: cfg.lambda_z,
        lambda_mix: cfg.lambda_mix,
        gan_loss: cfg.gan_loss,
    };
    let mut log = Vec::new();

    while state.epoch < target_epoch {
        let lr = schedule.lr_at(state.epoch)?;
        let epoch_batches = data::batches(ds, cfg.batch_size, &mut state.shuffle_rng)?;
        for (step, (bx, by)) in epoch_batches.iter().enumerate() {
            let breakdown = train_step(cfg, &weights, &mut state, bx, by, lr)?;
            for (term, value) in breakdown.terms() {
                if !value.is_finite() {
                    // Leave any previous epoch's checkpoint on disk untouched.
                    return Err(Error::NonFiniteLoss {
                        term,
                        epoch: state.epoch,
                        step,
                    });
                }
            }
            log.push(LogRow {
                epoch: state.epoch,
                step,
                lr,
                losses: breakdown,
            });
            state.global_step += 1;
        }
        state.epoch += 1;
        Checkpoint::capture(cfg, &state).save(&cfg.out_dir.join(CHECKPOINT_FILE))?;
    }

    // A zero-epoch run still leaves a resumable checkpoint behind.
    let checkpoint_path = cfg.out_dir.join(CHECKPOINT_FILE);
    if state.epoch == 0 {
        Checkpoint::capture(cfg, &state).save(&checkpoint_path)?;
    }
    write_log_csv(&log, &cfg.out_dir.join(TRAIN_LOG_FILE))?;
    Ok(TrainOutcome {
        bundle: state.bundle,
        log,
        epochs_done: state.epoch,
        checkpoint_path,
    })
}

pub fn write_log_csv(log: &[LogRow], path: &Path) -> Result<()> {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for row in log {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// One alternating step on a fixed minibatch: `disc_steps` discriminator
/// ascents, then one generator descent against the updated discriminators.
fn train_step(
    cfg: &TrainConfig,
    weights: &LossWeights,
    state: &mut TrainerState,
    bx: &Matrix,
    by: &Matrix,
    lr: f64,
) -> Result<LossBreakdown> {
    let mut disc_vals = (0.0, 0.0, 0.0);
    for _ in 0..cfg.disc_steps {
        disc_vals = disc_update(cfg, weights, state, bx, by, lr)?;
    }
    gen_update(cfg, weights, state, bx, by, lr, disc_vals)
}

/// Generator descent on a fresh tape and a fresh prior draw; only the
/// encoder/decoder parameters receive the Adam step.
fn gen_update(
    cfg: &TrainConfig,
    weights: &LossWeights,
    state: &mut TrainerState,
    bx: &Matrix,
    by: &Matrix,
    lr: f64,
    disc_vals: (f64, f64, f64),
) -> Result<LossBreakdown> {
    let mut g = Graph::new();
    let bound = state.bundle.bind(&mut g)?;
    let xt = g.leaf(&[bx.rows(), bx.cols()], bx.data().to_vec())?;
    let yt = g.leaf(&[by.rows(), by.cols()], by.data().to_vec())?;
    let z = sample_prior(bx.rows(), cfg.latent_dim, &mut state.prior_rng);
    let zt = g.leaf(&[z.rows(), z.cols()], z.into_data())?;
    let paths = forward_paths(&mut g, &bound, xt, yt)?;
    let loss = total_generator_loss(&mut g, &bound, &paths, xt, yt, zt, weights)?;
    g.backward(loss.total)?;

    let mut grads = Vec::new();
    for b in [&bound.e1, &bound.e2, &bound.g1, &bound.g2] {
        grads.extend(b.grads(&g)?);
    }
    let breakdown = LossBreakdown {
        recon_x: g.value(loss.recon_x),
        recon_y: g.value(loss.recon_y),
        adv_x: g.value(loss.adv_x),
        adv_y: g.value(loss.adv_y),
        adv_z1: g.value(loss.adv_z1),
        adv_z2: g.value(loss.adv_z2),
        disc_x: disc_vals.0,
        disc_y: disc_vals.1,
        disc_z: disc_vals.2,
        total: g.value(loss.total),
    };
    let mut params = Vec::new();
    for net in [
        &mut state.bundle.e1,
        &mut state.bundle.e2,
        &mut state.bundle.g1,
        &mut state.bundle.g2,
    ] {
        params.extend(net.params_mut());
    }
    adam_step(&mut state.gen_opt, params, &grads, lr)?;
    Ok(breakdown)
}

/// Ascend `λx·disc_x + λy·disc_y + λz·disc_z` in the discriminators only
/// (fakes are detached inside the loss assembly).
fn disc_update(
    cfg: &TrainConfig,
    weights: &LossWeights,
    state: &mut TrainerState,
    bx: &Matrix,
    by: &Matrix,
    lr: f64,
) -> Result<(f64, f64, f64)> {
    let mut g = Graph::new();
    let bound = state.bundle.bind(&mut g)?;
    let xt = g.leaf(&[bx.rows(), bx.cols()], bx.data().to_vec())?;
    let yt = g.leaf(&[by.rows(), by.cols()], by.data().to_vec())?;
    let z = sample_prior(bx.rows(), cfg.latent_dim, &mut state.prior_rng);
    let zt = g.leaf(&[z.rows(), z.cols()], z.into_data())?;
    let paths = forward_paths(&mut g, &bound, xt, yt)?;
    let ax = adv_x_terms(&mut g, &bound, &paths, xt, cfg.lambda_mix, cfg.gan_loss)?;
    let ay = adv_y_terms(&mut g, &bound, &paths, yt, cfg.lambda_mix, cfg.gan_loss)?;
    let az = adv_z_terms(&mut g, &bound, &paths, zt, cfg.gan_loss)?;
    let ax_w = g.scale(ax.disc, weights.lambda_x);
    let ay_w = g.scale(ay.disc, weights.lambda_y);
    let az_w = g.scale(az.disc, weights.lambda_z);
    let s1 = g.add(ax_w, ay_w)?;
    let ascent = g.add(s1, az_w)?;
    let objective = g.neg(ascent); // descend the negation
    g.backward(objective)?;

    let mut grads = Vec::new();
    for b in [&bound.dx, &bound.dy, &bound.dz] {
        grads.extend(b.grads(&g)?);
    }
    let values = (g.value(ax.disc), g.value(ay.disc), g.value(az.disc));
    let mut params = Vec::new();
    for net in [
        &mut state.bundle.dx,
        &mut state.bundle.dy,
        &mut state.bundle.dz,
    ] {
        params.extend(net.params_mut());
    }
    adam_step(&mut state.disc_opt, params, &grads, lr)?;
    Ok(values)
}

/// Serialized training state: parameters, optimizer moments, counters, and
/// RNG stream positions. Little-endian throughout.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub config_text: String,
    pub epoch: usize,
    pub global_step: u64,
    shuffle_pos: u128,
    prior_pos: u128,
    nets: Vec<Vec<LayerSnapshot>>,
    gen_opt: OptSnapshot,
    disc_opt: OptSnapshot,
}

#[derive(Clone, Debug)]
struct LayerSnapshot {
    in_dim: u32,
    out_dim: u32,
    act_code: u8,
    act_slope: f64,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Clone, Debug)]
struct OptSnapshot {
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn id(&self) -> String {
        format!("{:016x}:{}", self.config_hash, self.epoch)
    }

    fn capture(cfg: &TrainConfig, state: &TrainerState) -> Self {
        let snap_net = |net: &Mlp| -> Vec<LayerSnapshot> {
            net.layers()
                .iter()
                .map(|l| LayerSnapshot {
                    in_dim: l.in_dim as u32,
                    out_dim: l.out_dim as u32,
                    act_code: l.activation.code(),
                    act_slope: match l.activation {
                        Activation::LeakyRelu(s) => s,
                        _ => 0.0,
                    },
                    weight: l.weight.clone(),
                    bias: l.bias.clone(),
                })
                .collect()
        };
        let snap_opt = |opt: &AdamState| -> OptSnapshot {
            let (m, v) = opt.moments();
            OptSnapshot {
                step: opt.step,
                m: m.to_vec(),
                v: v.to_vec(),
            }
        };
        Self {
            config_hash: cfg.hash(),
            config_text: cfg.portable_text(),
            epoch: state.epoch,
            global_step: state.global_step,
            shuffle_pos: state.shuffle_rng.get_word_pos(),
            prior_pos: state.prior_rng.get_word_pos(),
            nets: state.bundle.nets().iter().map(|(_, n)| snap_net(n)).collect(),
            gen_opt: snap_opt(&state.gen_opt),
            disc_opt: snap_opt(&state.disc_opt),
        }
    }

    fn restore(&self, cfg: &TrainConfig) -> Result<TrainerState> {
        let build_net = |layers: &[LayerSnapshot]| -> Result<Mlp> {
            let mut out = Vec::with_capacity(layers.len());
            for l in layers {
                out.push(Layer {
                    in_dim: l.in_dim as usize,
                    out_dim: l.out_dim as usize,
                    weight: l.weight.clone(),
                    bias: l.bias.clone(),
                    activation: Activation::from_code(l.act_code, l.act_slope)?,
                });
            }
            Mlp::from_layers(out)
        };
        if self.nets.len() != 7 {
            return Err(Error::Checkpoint(format!(
                "expected 7 nets, found {}",
                self.nets.len()
            )));
        }
        let bundle = ModelBundle::from_nets(
            build_net(&self.nets[0])?,
            build_net(&self.nets[1])?,
            build_net(&self.nets[2])?,
            build_net(&self.nets[3])?,
            build_net(&self.nets[4])?,
            build_net(&self.nets[5])?,
            build_net(&self.nets[6])?,
        )?;
        let mut gen_opt = AdamState::new(&gen_param_sizes(&bundle), ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        gen_opt.restore(self.gen_opt.step, self.gen_opt.m.clone(), self.gen_opt.v.clone());
        let mut disc_opt =
            AdamState::new(&disc_param_sizes(&bundle), ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        disc_opt.restore(self.disc_opt.step, self.disc_opt.m.clone(), self.disc_opt.v.clone());
        let mut shuffle_rng = stream(cfg.seed, STREAM_SHUFFLE);
        shuffle_rng.set_word_pos(self.shuffle_pos);
        let mut prior_rng = stream(cfg.seed, STREAM_PRIOR);
        prior_rng.set_word_pos(self.prior_pos);
        Ok(TrainerState {
            bundle,
            gen_opt,
            disc_opt,
            shuffle_rng,
            prior_rng,
            epoch: self.epoch,
            global_step: self.global_step,
        })
    }

    /// Bundle alone, for evaluation and synthesis.
    pub fn bundle(&self) -> Result<ModelBundle> {
        let cfg = TrainConfig::default();
        // restore() only uses cfg.seed for RNG streams; the bundle itself
        // is position-independent.
        let state = self.restore(&TrainConfig {
            seed: 0,
            ..cfg
        })?;
        Ok(state.bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        push_u64(&mut buf, self.config_hash);
        let text = self.config_text.as_bytes();
        push_u32(&mut buf, text.len() as u32);
        buf.extend_from_slice(text);
        push_u32(&mut buf, self.epoch as u32);
        push_u64(&mut buf, self.global_step);
        push_u128(&mut buf, self.shuffle_pos);
        push_u128(&mut buf, self.prior_pos);
        push_u32(&mut buf, self.nets.len() as u32);
        for net in &self.nets {
            push_u32(&mut buf, net.len() as u32);
            for l in net {
                push_u32(&mut buf, l.in_dim);
                push_u32(&mut buf, l.out_dim);
                buf.push(l.act_code);
                push_f64(&mut buf, l.act_slope);
                push_f64_slice(&mut buf, &l.weight);
                push_f64_slice(&mut buf, &l.bias);
            }
        }
        for opt in [&self.gen_opt, &self.disc_opt] {
            push_u64(&mut buf, opt.step);
            push_u32(&mut buf, opt.m.len() as u32);
            for (m, v) in opt.m.iter().zip(&opt.v) {
                push_u32(&mut buf, m.len() as u32);
                push_f64_slice(&mut buf, m);
                push_f64_slice(&mut buf, v);
            }
        }
        // Atomic publish: write sideways, then rename into place.
        let tmp = path.with_extension("bin.tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&buf)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut r = Reader {
            bytes: &bytes,
            pos: 0,
        };
        let magic = r.take(8)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic {:?}, expected {:?}",
                &magic[..8.min(magic.len())],
                CHECKPOINT_MAGIC
            )));
        }
        let config_hash = r.u64()?;
        let text_len = r.u32()? as usize;
        let config_text = String::from_utf8(r.take(text_len)?.to_vec())
            .map_err(|e| Error::Checkpoint(format!("config text not utf-8: {e}")))?;
        let epoch = r.u32()? as usize;
        let global_step = r.u64()?;
        let shuffle_pos = r.u128()?;
        let prior_pos = r.u128()?;
        let n_nets = r.u32()? as usize;
        let mut nets = Vec::with_capacity(n_nets);
        for _ in 0..n_nets {
            let n_layers = r.u32()? as usize;
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let in_dim = r.u32()?;
                let out_dim = r.u32()?;
                let act_code = r.u8()?;
                let act_slope = r.f64()?;
                let weight = r.f64_vec(in_dim as usize * out_dim as usize)?;
                let bias = r.f64_vec(out_dim as usize)?;
                layers.push(LayerSnapshot {
                    in_dim,
                    out_dim,
                    act_code,
                    act_slope,
                    weight,
                    bias,
                });
            }
            nets.push(layers);
        }
        let mut opts = Vec::with_capacity(2);
        for _ in 0..2 {
            let step = r.u64()?;
            let n_params = r.u32()? as usize;
            let mut m = Vec::with_capacity(n_params);
            let mut v = Vec::with_capacity(n_params);
            for _ in 0..n_params {
                let len = r.u32()? as usize;
                m.push(r.f64_vec(len)?);
                v.push(r.f64_vec(len)?);
            }
            opts.push(OptSnapshot { step, m, v });
        }
        let disc_opt = opts.pop().unwrap();
        let gen_opt = opts.pop().unwrap();
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            config_hash,
            config_text,
            epoch,
            global_step,
            shuffle_pos,
            prior_pos,
            nets,
            gen_opt,
            disc_opt,
        })
    }
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u128(buf: &mut Vec<u8>, v: u128) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64_slice(buf: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        push_f64(buf, *v);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        // Validate the length prefix against the remaining bytes before
        // allocating, so a corrupt file cannot demand absurd memory.
        if n.checked_mul(8).is_none_or(|bytes| self.pos + bytes > self.bytes.len()) {
            return Err(Error::Checkpoint(format!(
                "length prefix {n} exceeds remaining file size"
            )));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
}

/// One sweep row: the λz it was trained with plus its evaluation.
pub struct SweepRow {
    pub lambda_z: f64,
    pub report: EvalReport,
}

/// Train one model per λz value (fresh init per run, same seed, same data)
/// and evaluate each; rows come back in input order.
pub fn lambda_z_sweep(
    cfg: &TrainConfig,
    ds: &DomainDataset,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidArg("sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &lz in values {
        let run_cfg = TrainConfig {
            lambda_z: lz,
            out_dir: cfg.out_dir.join(format!("lambda_z_{lz}")),
            ..cfg.clone()
        };
        let outcome = train(&run_cfg, ds)?;
        let report = metrics::evaluate(
            &outcome.bundle,
            ds,
            &EvalConfig {
                lambda_z: lz,
                task: cfg.dataset.kind.to_string(),
                ..EvalConfig::default()
            },
        )?;
        rows.push(SweepRow {
            lambda_z: lz,
            report,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut out = String::from(EvalReport::csv_header());
    out.push('\n');
    for row in rows {
        out.push_str(&row.report.csv_row());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
