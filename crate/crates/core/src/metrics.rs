//! Evaluation: closed-form Gaussian Fréchet distance on raw 2-D samples,
//! exact ground-truth correspondence error, cycle error, and a small-sample
//! exact transport distance.
//!
//! Evaluation always runs on a fresh held-out sample drawn from the
//! dataset's generator spec on a separate seed stream, generated in paired
//! mode so an exact translator scores exactly zero.

use crate::data::{gen_domain_pair, DomainDataset, GeneratorSpec};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::ModelBundle;
use crate::ot::{cost_matrix, exact_wasserstein, DiscreteDistribution, Metric};

/// Eigenvalue floor for the covariance-product square root.
const EIG_FLOOR: f64 = 1e-12;

/// Seed-stream offset separating held-out evaluation data from training data.
const HELDOUT_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    XToY,
    YToX,
}

/// Fréchet distance between Gaussians moment-matched to the two samples:
/// `||μa - μb||² + tr(Σa + Σb - 2(ΣaΣb)^{1/2})`, with the 2×2 matrix square
/// root taken analytically through the product's trace and determinant.
pub fn gaussian_frechet(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.cols() != 2 || b.cols() != 2 {
        return Err(Error::DimMismatch(format!(
            "gaussian_frechet works on 2-D samples, got dims {} and {}",
            a.cols(),
            b.cols()
        )));
    }
    for (m, name) in [(a, "first"), (b, "second")] {
        if m.rows() < 3 {
            return Err(Error::InvalidArg(format!(
                "{name} sample needs at least d+1 = 3 points, got {}",
                m.rows()
            )));
        }
    }
    let (mu_a, mu_b) = (a.mean_rows(), b.mean_rows());
    let dmu2 = (mu_a[0] - mu_b[0]).powi(2) + (mu_a[1] - mu_b[1]).powi(2);
    let (ca, cb) = (a.covariance(), b.covariance());
    let tr = ca.get(0, 0) + ca.get(1, 1) + cb.get(0, 0) + cb.get(1, 1);
    Ok((dmu2 + tr - 2.0 * tr_sqrt_product(&ca, &cb)).max(0.0))
}

/// `tr((A·B)^{1/2})` for SPD 2×2 factors. The product is similar to an SPD
/// matrix, so its eigenvalues are real and nonnegative; then
/// `sqrt(λ1) + sqrt(λ2) = sqrt(tr + 2·sqrt(det))`.
fn tr_sqrt_product(a: &Matrix, b: &Matrix) -> f64 {
    let p00 = a.get(0, 0) * b.get(0, 0) + a.get(0, 1) * b.get(1, 0);
    let p11 = a.get(1, 0) * b.get(0, 1) + a.get(1, 1) * b.get(1, 1);
    let tr_p = p00 + p11;
    let det_p = (a.get(0, 0) * a.get(1, 1) - a.get(0, 1) * a.get(1, 0))
        * (b.get(0, 0) * b.get(1, 1) - b.get(0, 1) * b.get(1, 0));
    let disc = (tr_p * tr_p - 4.0 * det_p).max(0.0);
    let root = disc.sqrt();
    let l1 = ((tr_p + root) / 2.0).max(EIG_FLOOR);
    let l2 = ((tr_p - root) / 2.0).max(EIG_FLOOR);
    l1.sqrt() + l2.sqrt()
}

/// RMS distance between the model's translation and the generator's exact
/// map on the dataset's own points.
pub fn correspondence_rmse(
    bundle: &ModelBundle,
    ds: &DomainDataset,
    direction: Direction,
) -> Result<f64> {
    let map = ds
        .ground_truth_map()
        .ok_or_else(|| Error::InvalidArg("dataset carries no ground-truth map".into()))?;
    let (translated, target) = match direction {
        Direction::XToY => (bundle.translate_x_to_y(&ds.x)?, map.apply_all(&ds.x)),
        Direction::YToX => (bundle.translate_y_to_x(&ds.y)?, map.inverse()?.apply_all(&ds.y)),
    };
    let n = translated.rows() as f64;
    let mse: f64 = translated
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        / n;
    Ok(mse.sqrt())
}

/// Exact squared-L2 transport between `sample_n` translated points and
/// `sample_n` real target points, uniform weights.
pub fn ot_distribution_distance(
    bundle: &ModelBundle,
    ds: &DomainDataset,
    direction: Direction,
    sample_n: usize,
) -> Result<f64> {
    if sample_n > 64 {
        return Err(Error::InvalidArg(format!(
            "exact transport evaluation capped at 64 points, got {sample_n}"
        )));
    }
    if sample_n == 0 || sample_n > ds.x.rows() || sample_n > ds.y.rows() {
        return Err(Error::InvalidArg(format!(
            "sample_n {sample_n} out of range for dataset of {}x{} points",
            ds.x.rows(),
            ds.y.rows()
        )));
    }
    let idx: Vec<usize> = (0..sample_n).collect();
    let (translated, real) = match direction {
        Direction::XToY => (
            bundle.translate_x_to_y(&ds.x.select_rows(&idx))?,
            ds.y.select_rows(&idx),
        ),
        Direction::YToX => (
            bundle.translate_y_to_x(&ds.y.select_rows(&idx))?,
            ds.x.select_rows(&idx),
        ),
    };
    let mu = DiscreteDistribution::uniform(translated)?;
    let nu = DiscreteDistribution::uniform(real)?;
    let c = cost_matrix(mu.points(), nu.points(), Metric::SqL2)?;
    let (value, _) = exact_wasserstein(&mu, &nu, &c)?;
    Ok(value)
}

/// Mean per-sample L1 error of the full cycle through the other domain.
pub fn cycle_l1(bundle: &ModelBundle, points: &Matrix, direction: Direction) -> Result<f64> {
    let cycled = match direction {
        Direction::XToY => bundle.cycle_x(points)?,
        Direction::YToX => bundle.cycle_y(points)?,
    };
    let n = points.rows() as f64;
    Ok(points
        .data()
        .iter()
        .zip(cycled.data())
        .map(|(p, q)| (p - q).abs())
        .sum::<f64>()
        / n)
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    /// Held-out sample size per domain.
    pub heldout_n: usize,
    /// Points for the exact transport metric; `None` skips it.
    pub w2_n: Option<usize>,
    /// Tag columns for the report row.
    pub lambda_z: f64,
    pub task: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            heldout_n: 512,
            w2_n: Some(64),
            lambda_z: f64::NAN,
            task: String::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub lambda_z: f64,
    pub task: String,
    pub frechet_x: f64,
    pub frechet_y: f64,
    pub corr_rmse: Option<f64>,
    pub cycle_l1_x: f64,
    pub cycle_l1_y: f64,
    pub w2_x: Option<f64>,
    pub w2_y: Option<f64>,
}

impl EvalReport {
    pub fn csv_header() -> &'static str {
        "lambda_z,task,frechet_x,frechet_y,corr_rmse,cycle_l1_x,cycle_l1_y,w2_x,w2_y"
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.lambda_z,
            self.task,
            self.frechet_x,
            self.frechet_y,
            opt(&self.corr_rmse),
            self.cycle_l1_x,
            self.cycle_l1_y,
            opt(&self.w2_x),
            opt(&self.w2_y)
        )
    }

    pub fn all_finite(&self) -> bool {
        [self.frechet_x, self.frechet_y, self.cycle_l1_x, self.cycle_l1_y]
            .iter()
            .chain(self.corr_rmse.iter())
            .chain(self.w2_x.iter())
            .chain(self.w2_y.iter())
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Held-out dataset for a training spec: same generator, separate seed
/// stream, paired so exact translators score zero.
pub fn heldout_for(spec: &GeneratorSpec, n: usize) -> Result<DomainDataset> {
    let heldout_spec = GeneratorSpec {
        n,
        seed: spec.seed ^ HELDOUT_SEED_SALT,
        paired: true,
        ..spec.clone()
    };
    gen_domain_pair(&heldout_spec)
}

/// Full evaluation row. Falls back to the dataset's own samples when it has
/// no generator spec (CSV-imported data).
pub fn evaluate(bundle: &ModelBundle, ds: &DomainDataset, cfg: &EvalConfig) -> Result<EvalReport> {
    let heldout;
    let eval_ds = match &ds.spec {
        Some(spec) => {
            heldout = heldout_for(spec, cfg.heldout_n)?;
            &heldout
        }
        None => ds,
    };
    let translated_to_x = bundle.translate_y_to_x(&eval_ds.y)?;
    let translated_to_y = bundle.translate_x_to_y(&eval_ds.x)?;
    let report = EvalReport {
        lambda_z: cfg.lambda_z,
        task: cfg.task.clone(),
        frechet_x: gaussian_frechet(&translated_to_x, &eval_ds.x)?,
        frechet_y: gaussian_frechet(&translated_to_y, &eval_ds.y)?,
        corr_rmse: if eval_ds.ground_truth_map().is_some() {
            Some(correspondence_rmse(bundle, eval_ds, Direction::XToY)?)
        } else {
            None
        },
        cycle_l1_x: cycle_l1(bundle, &eval_ds.x, Direction::XToY)?,
        cycle_l1_y: cycle_l1(bundle, &eval_ds.y, Direction::YToX)?,
        w2_x: match cfg.w2_n {
            Some(n) => Some(ot_distribution_distance(bundle, eval_ds, Direction::YToX, n)?),
            None => None,
        },
        w2_y: match cfg.w2_n {
            Some(n) => Some(ot_distribution_distance(bundle, eval_ds, Direction::XToY, n)?),
            None => None,
        },
    };
    Ok(report)
}
