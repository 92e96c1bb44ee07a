//! The learnable bundle (two encoders, two decoders, three discriminators)
//! and every loss term of the training objective.
//!
//! Reconstruction is the per-sample L1 auto-encoding error plus the L1
//! cycle error, averaged over the batch. The three adversarial terms pit
//! discriminators on the two data spaces and the shared latent space against
//! the generator stack; fakes feeding a discriminator loss are detached so
//! that ascending it can only move discriminator parameters.

use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{Activation, BoundMlp, Mlp};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Discriminator outputs are clamped to this band before any log.
pub const PROB_CLAMP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GanLoss {
    /// Generator descends `-log D(fake)`.
    NonSaturating,
    /// Generator descends `log(1 - D(fake))`, the raw minimax form.
    Minimax,
}

impl GanLoss {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "non-saturating" => Ok(Self::NonSaturating),
            "minimax" => Ok(Self::Minimax),
            other => Err(Error::InvalidArg(format!("unknown gan loss '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::NonSaturating => "non-saturating",
            Self::Minimax => "minimax",
        }
    }
}

/// Encoders E1: X→Z, E2: Y→Z; decoders G1: Z→X, G2: Z→Y; discriminators on
/// X, Y, and the shared latent space.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub e1: Mlp,
    pub e2: Mlp,
    pub g1: Mlp,
    pub g2: Mlp,
    pub dx: Mlp,
    pub dy: Mlp,
    pub dz: Mlp,
    pub latent_dim: usize,
}

impl ModelBundle {
    /// Fresh bundle: encoder/decoder hidden layers use ReLU with identity
    /// outputs, discriminators use leaky ReLU into a sigmoid.
    pub fn init(
        data_dim: usize,
        latent_dim: usize,
        hidden: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let enc_dims: Vec<usize> = [data_dim]
            .into_iter()
            .chain(hidden.iter().copied())
            .chain([latent_dim])
            .collect();
        let dec_dims: Vec<usize> = enc_dims.iter().rev().copied().collect();
        let gen_acts: Vec<Activation> = hidden
            .iter()
            .map(|_| Activation::Relu)
            .chain([Activation::Identity])
            .collect();
        let disc_acts: Vec<Activation> = hidden
            .iter()
            .map(|_| Activation::LeakyRelu(0.01))
            .chain([Activation::Sigmoid])
            .collect();
        let disc_dims = |input: usize| -> Vec<usize> {
            [input]
                .into_iter()
                .chain(hidden.iter().copied())
                .chain([1])
                .collect()
        };
        Ok(Self {
            e1: Mlp::init(&enc_dims, &gen_acts, rng)?,
            e2: Mlp::init(&enc_dims, &gen_acts, rng)?,
            g1: Mlp::init(&dec_dims, &gen_acts, rng)?,
            g2: Mlp::init(&dec_dims, &gen_acts, rng)?,
            dx: Mlp::init(&disc_dims(data_dim), &disc_acts, rng)?,
            dy: Mlp::init(&disc_dims(data_dim), &disc_acts, rng)?,
            dz: Mlp::init(&disc_dims(latent_dim), &disc_acts, rng)?,
            latent_dim,
        })
    }

    pub fn from_nets(
        e1: Mlp,
        e2: Mlp,
        g1: Mlp,
        g2: Mlp,
        dx: Mlp,
        dy: Mlp,
        dz: Mlp,
    ) -> Result<Self> {
        let latent_dim = e1.output_dim();
        if e2.output_dim() != latent_dim
            || g1.input_dim() != latent_dim
            || g2.input_dim() != latent_dim
            || dz.input_dim() != latent_dim
        {
            return Err(Error::InvalidConfig(
                "latent dims of encoders/decoders/latent discriminator disagree".into(),
            ));
        }
        for (d, name) in [(&dx, "dx"), (&dy, "dy"), (&dz, "dz")] {
            let last = d.layers().last().unwrap();
            if last.activation != Activation::Sigmoid || d.output_dim() != 1 {
                return Err(Error::InvalidConfig(format!(
                    "discriminator {name} must end in a 1-unit sigmoid"
                )));
            }
        }
        Ok(Self {
            e1,
            e2,
            g1,
            g2,
            dx,
            dy,
            dz,
            latent_dim,
        })
    }

    /// Nets in fixed serialization order.
    pub fn nets(&self) -> [(&'static str, &Mlp); 7] {
        [
            ("e1", &self.e1),
            ("e2", &self.e2),
            ("g1", &self.g1),
            ("g2", &self.g2),
            ("dx", &self.dx),
            ("dy", &self.dy),
            ("dz", &self.dz),
        ]
    }

    pub fn bind(&self, g: &mut Graph) -> Result<BoundBundle> {
        Ok(BoundBundle {
            e1: self.e1.bind(g, "e1")?,
            e2: self.e2.bind(g, "e2")?,
            g1: self.g1.bind(g, "g1")?,
            g2: self.g2.bind(g, "g2")?,
            dx: self.dx.bind(g, "dx")?,
            dy: self.dy.bind(g, "dy")?,
            dz: self.dz.bind(g, "dz")?,
        })
    }

    // Plain-value translation paths used by evaluation and synthesis.

    pub fn translate_x_to_y(&self, x: &Matrix) -> Result<Matrix> {
        self.g2.forward(&self.e1.forward(x)?)
    }

    pub fn translate_y_to_x(&self, y: &Matrix) -> Result<Matrix> {
        self.g1.forward(&self.e2.forward(y)?)
    }

    pub fn cycle_x(&self, x: &Matrix) -> Result<Matrix> {
        self.translate_y_to_x(&self.translate_x_to_y(x)?)
    }

    pub fn cycle_y(&self, y: &Matrix) -> Result<Matrix> {
        self.translate_x_to_y(&self.translate_y_to_x(y)?)
    }
}

pub struct BoundBundle {
    pub e1: BoundMlp,
    pub e2: BoundMlp,
    pub g1: BoundMlp,
    pub g2: BoundMlp,
    pub dx: BoundMlp,
    pub dy: BoundMlp,
    pub dz: BoundMlp,
}

/// Standard-normal latent prior sample, shape `[batch, latent_dim]`.
pub fn sample_prior(batch: usize, latent_dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data: Vec<f64> = (0..batch * latent_dim)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Matrix::new(batch, latent_dim, data).expect("prior shape")
}

/// All forward passes a training step needs, computed once and shared.
pub struct Paths {
    pub e1x: Tensor,
    pub e2y: Tensor,
    /// G1(E1(x)), the X auto-encoding.
    pub ae_x: Tensor,
    /// G2(E2(y)).
    pub ae_y: Tensor,
    /// G2(E1(x)), translation into Y.
    pub tr_y: Tensor,
    /// G1(E2(y)), translation into X.
    pub tr_x: Tensor,
    /// G1(E2(G2(E1(x)))), the X cycle.
    pub cyc_x: Tensor,
    /// G2(E1(G1(E2(y)))), the Y cycle.
    pub cyc_y: Tensor,
}

pub fn forward_paths(g: &mut Graph, b: &BoundBundle, x: Tensor, y: Tensor) -> Result<Paths> {
    let e1x = b.e1.forward(g, x)?;
    let e2y = b.e2.forward(g, y)?;
    let ae_x = b.g1.forward(g, e1x)?;
    let ae_y = b.g2.forward(g, e2y)?;
    let tr_y = b.g2.forward(g, e1x)?;
    let tr_x = b.g1.forward(g, e2y)?;
    let z1_cyc = b.e2.forward(g, tr_y)?;
    let z2_cyc = b.e1.forward(g, tr_x)?;
    let cyc_x = b.g1.forward(g, z1_cyc)?;
    let cyc_y = b.g2.forward(g, z2_cyc)?;
    Ok(Paths {
        e1x,
        e2y,
        ae_x,
        ae_y,
        tr_y,
        tr_x,
        cyc_x,
        cyc_y,
    })
}

/// Mean over the batch of per-sample L1 distance: `sum |a - b| / rows`.
fn batch_l1(g: &mut Graph, a: Tensor, b: Tensor) -> Result<Tensor> {
    let rows = g.shape(a)[0] as f64;
    let diff = g.sub(a, b)?;
    let abs = g.abs(diff);
    let total = g.sum(abs);
    Ok(g.scale(total, 1.0 / rows))
}

/// Auto-encoding plus cycle L1 error for domain X.
pub fn recon_loss_x(g: &mut Graph, paths: &Paths, x: Tensor) -> Result<Tensor> {
    let ae = batch_l1(g, x, paths.ae_x)?;
    let cyc = batch_l1(g, x, paths.cyc_x)?;
    g.add(ae, cyc)
}

/// Mirror of [`recon_loss_x`] with the domain roles swapped.
pub fn recon_loss_y(g: &mut Graph, paths: &Paths, y: Tensor) -> Result<Tensor> {
    let ae = batch_l1(g, y, paths.ae_y)?;
    let cyc = batch_l1(g, y, paths.cyc_y)?;
    g.add(ae, cyc)
}

/// Clamped discriminator probability for a batch.
fn disc_prob(g: &mut Graph, d: &BoundMlp, input: Tensor) -> Result<Tensor> {
    let p = d.forward(g, input)?;
    Ok(g.clamp(p, PROB_CLAMP, 1.0 - PROB_CLAMP))
}

fn mean_log(g: &mut Graph, t: Tensor) -> Result<Tensor> {
    let l = g.log(t)?;
    Ok(g.mean(l))
}

fn mean_log_one_minus(g: &mut Graph, t: Tensor) -> Result<Tensor> {
    let one = g.scalar(1.0);
    let om = g.sub(one, t)?;
    let l = g.log(om)?;
    Ok(g.mean(l))
}

pub struct AdvTerms {
    /// Generator objective (to be descended).
    pub gen: Tensor,
    /// Discriminator objective (to be ascended).
    pub disc: Tensor,
}

/// Adversarial terms for the X data space. The discriminator sees real x
/// against the cycle fake (weight `lambda_mix`) and the translation fake
/// (weight `1 - lambda_mix`); both fakes are detached on the disc side.
pub fn adv_x_terms(
    g: &mut Graph,
    b: &BoundBundle,
    paths: &Paths,
    x: Tensor,
    lambda_mix: f64,
    gan_loss: GanLoss,
) -> Result<AdvTerms> {
    adv_data_terms(g, &b.dx, paths.cyc_x, paths.tr_x, x, lambda_mix, gan_loss)
}

/// Mirror of [`adv_x_terms`] for the Y data space.
pub fn adv_y_terms(
    g: &mut Graph,
    b: &BoundBundle,
    paths: &Paths,
    y: Tensor,
    lambda_mix: f64,
    gan_loss: GanLoss,
) -> Result<AdvTerms> {
    adv_data_terms(g, &b.dy, paths.cyc_y, paths.tr_y, y, lambda_mix, gan_loss)
}

fn adv_data_terms(
    g: &mut Graph,
    d: &BoundMlp,
    cyc_fake: Tensor,
    tr_fake: Tensor,
    real: Tensor,
    lambda_mix: f64,
    gan_loss: GanLoss,
) -> Result<AdvTerms> {
    if !(0.0..1.0).contains(&lambda_mix) || lambda_mix == 0.0 {
        return Err(Error::InvalidArg(format!(
            "lambda_mix must lie in (0, 1), got {lambda_mix}"
        )));
    }
    // Ascent objective: E[log D(real)] + mix * E[log(1-D(cycle))]
    //                  + (1-mix) * E[log(1-D(translate))].
    let p_real = disc_prob(g, d, real)?;
    let real_term = mean_log(g, p_real)?;
    let cyc_detached = g.detach(cyc_fake);
    let tr_detached = g.detach(tr_fake);
    let p_cyc_d = disc_prob(g, d, cyc_detached)?;
    let p_tr_d = disc_prob(g, d, tr_detached)?;
    let cyc_term = mean_log_one_minus(g, p_cyc_d)?;
    let tr_term = mean_log_one_minus(g, p_tr_d)?;
    let cyc_w = g.scale(cyc_term, lambda_mix);
    let tr_w = g.scale(tr_term, 1.0 - lambda_mix);
    let fake_sum = g.add(cyc_w, tr_w)?;
    let disc = g.add(real_term, fake_sum)?;

    // Generator objective on the live (non-detached) fakes.
    let p_cyc = disc_prob(g, d, cyc_fake)?;
    let p_tr = disc_prob(g, d, tr_fake)?;
    let gen = match gan_loss {
        GanLoss::NonSaturating => {
            let lc = mean_log(g, p_cyc)?;
            let lt = mean_log(g, p_tr)?;
            let lc_w = g.scale(lc, lambda_mix);
            let lt_w = g.scale(lt, 1.0 - lambda_mix);
            let s = g.add(lc_w, lt_w)?;
            g.neg(s)
        }
        GanLoss::Minimax => {
            let lc = mean_log_one_minus(g, p_cyc)?;
            let lt = mean_log_one_minus(g, p_tr)?;
            let lc_w = g.scale(lc, lambda_mix);
            let lt_w = g.scale(lt, 1.0 - lambda_mix);
            g.add(lc_w, lt_w)?
        }
    };
    Ok(AdvTerms { gen, disc })
}

pub struct AdvZTerms {
    /// Generator term for the E1 branch, ½-weighted.
    pub gen_z1: Tensor,
    /// Generator term for the E2 branch, ½-weighted.
    pub gen_z2: Tensor,
    /// Shared latent discriminator objective (to be ascended).
    pub disc: Tensor,
}

/// Latent adversarial terms. One discriminator serves both encoder
/// branches; the branch pair shares a single prior term and each fake branch
/// carries weight ½ so the latent trade-off keeps one scale.
pub fn adv_z_terms(
    g: &mut Graph,
    b: &BoundBundle,
    paths: &Paths,
    z_prior: Tensor,
    gan_loss: GanLoss,
) -> Result<AdvZTerms> {
    let p_prior = disc_prob(g, &b.dz, z_prior)?;
    let prior_term = mean_log(g, p_prior)?;
    let z1_detached = g.detach(paths.e1x);
    let z2_detached = g.detach(paths.e2y);
    let p_z1_d = disc_prob(g, &b.dz, z1_detached)?;
    let p_z2_d = disc_prob(g, &b.dz, z2_detached)?;
    let f1 = mean_log_one_minus(g, p_z1_d)?;
    let f2 = mean_log_one_minus(g, p_z2_d)?;
    let f1h = g.scale(f1, 0.5);
    let f2h = g.scale(f2, 0.5);
    let fakes = g.add(f1h, f2h)?;
    let disc = g.add(prior_term, fakes)?;

    let p_z1 = disc_prob(g, &b.dz, paths.e1x)?;
    let p_z2 = disc_prob(g, &b.dz, paths.e2y)?;
    let (gen_z1, gen_z2) = match gan_loss {
        GanLoss::NonSaturating => {
            let l1 = mean_log(g, p_z1)?;
            let l2 = mean_log(g, p_z2)?;
            let l1h = g.scale(l1, 0.5);
            let l2h = g.scale(l2, 0.5);
            (g.neg(l1h), g.neg(l2h))
        }
        GanLoss::Minimax => {
            let l1 = mean_log_one_minus(g, p_z1)?;
            let l2 = mean_log_one_minus(g, p_z2)?;
            (g.scale(l1, 0.5), g.scale(l2, 0.5))
        }
    };
    Ok(AdvZTerms {
        gen_z1,
        gen_z2,
        disc,
    })
}

/// Per-step scalar record of every loss component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub recon_x: f64,
    pub recon_y: f64,
    pub adv_x: f64,
    pub adv_y: f64,
    pub adv_z1: f64,
    pub adv_z2: f64,
    pub disc_x: f64,
    pub disc_y: f64,
    pub disc_z: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Recompute the total from the parts with the same association order
    /// the graph uses; exact equality is expected.
    pub fn recomputed_total(&self, lx: f64, ly: f64, lz: f64) -> f64 {
        self.recon_x + self.recon_y + lx * self.adv_x + ly * self.adv_y
            + lz * (self.adv_z1 + self.adv_z2)
    }

    pub fn terms(&self) -> [(&'static str, f64); 10] {
        [
            ("recon_x", self.recon_x),
            ("recon_y", self.recon_y),
            ("adv_x", self.adv_x),
            ("adv_y", self.adv_y),
            ("adv_z1", self.adv_z1),
            ("adv_z2", self.adv_z2),
            ("disc_x", self.disc_x),
            ("disc_y", self.disc_y),
            ("disc_z", self.disc_z),
            ("total", self.total),
        ]
    }
}

pub struct GeneratorLoss {
    pub total: Tensor,
    pub recon_x: Tensor,
    pub recon_y: Tensor,
    pub adv_x: Tensor,
    pub adv_y: Tensor,
    pub adv_z1: Tensor,
    pub adv_z2: Tensor,
}

/// Weights for the three divergence penalties.
#[derive(Clone, Copy, Debug)]
pub struct LossWeights {
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub lambda_z: f64,
    pub lambda_mix: f64,
    pub gan_loss: GanLoss,
}

/// Full generator objective:
/// `recon_x + recon_y + λx·adv_x + λy·adv_y + λz·(adv_z1 + adv_z2)`.
pub fn total_generator_loss(
    g: &mut Graph,
    b: &BoundBundle,
    paths: &Paths,
    x: Tensor,
    y: Tensor,
    z_prior: Tensor,
    w: &LossWeights,
) -> Result<GeneratorLoss> {
    if w.lambda_x < 0.0 || w.lambda_y < 0.0 || w.lambda_z < 0.0 {
        return Err(Error::InvalidArg("loss weights must be nonnegative".into()));
    }
    let recon_x = recon_loss_x(g, paths, x)?;
    let recon_y = recon_loss_y(g, paths, y)?;
    let ax = adv_x_terms(g, b, paths, x, w.lambda_mix, w.gan_loss)?;
    let ay = adv_y_terms(g, b, paths, y, w.lambda_mix, w.gan_loss)?;
    let az = adv_z_terms(g, b, paths, z_prior, w.gan_loss)?;

    let recon = g.add(recon_x, recon_y)?;
    let ax_w = g.scale(ax.gen, w.lambda_x);
    let t1 = g.add(recon, ax_w)?;
    let ay_w = g.scale(ay.gen, w.lambda_y);
    let t2 = g.add(t1, ay_w)?;
    let z_sum = g.add(az.gen_z1, az.gen_z2)?;
    let z_w = g.scale(z_sum, w.lambda_z);
    let total = g.add(t2, z_w)?;

    Ok(GeneratorLoss {
        total,
        recon_x,
        recon_y,
        adv_x: ax.gen,
        adv_y: ay.gen,
        adv_z1: az.gen_z1,
        adv_z2: az.gen_z2,
    })
}
