//! Decomposition verifier: random discrete joint distributions, exact
//! transport on the joint and on both marginal problems, and the gap
//! between them. The gap must never be meaningfully negative, and must
//! vanish whenever both joints are product measures.

use jwdm_core::error::Result;
use jwdm_core::linalg::Matrix;
use jwdm_core::ot::{
    decomposition_report, DecompositionReport, DiscreteDistribution, JointPairDistribution,
    Metric,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GAP_TOL: f64 = 1e-9;

pub struct Instance {
    pub kind: InstanceKind,
    pub report: DecompositionReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceKind {
    Random,
    Product,
}

impl InstanceKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Product => "product",
        }
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::new(n, d, data).expect("rectangular")
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    // Kill normalization dust so the distribution ctor's 1e-12 gate holds.
    let partial: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - partial;
    w
}

fn pick_metric(rng: &mut ChaCha8Rng) -> Metric {
    match rng.random_range(0..3u8) {
        0 => Metric::L1,
        1 => Metric::L2,
        _ => Metric::SqL2,
    }
}

/// A joint with arbitrary coupling structure. Roughly a third of draws make
/// the second coordinate a deterministic affine image of the first, the
/// regime where strictly positive gaps show up.
pub fn random_joint(rng: &mut ChaCha8Rng, max_support: usize, dx: usize, dy: usize) -> JointPairDistribution {
    let n = rng.random_range(1..=max_support);
    let first = random_points(rng, n, dx);
    let second = if dy == dx && rng.random_bool(1.0 / 3.0) {
        let scale = rng.random_range(-1.5..1.5);
        let offset = rng.random_range(-0.5..0.5);
        let data: Vec<f64> = first.data().iter().map(|v| scale * v + offset).collect();
        Matrix::new(n, dy, data).expect("rectangular")
    } else {
        random_points(rng, n, dy)
    };
    let weights = random_weights(rng, n);
    JointPairDistribution::new(first, second, weights).expect("valid joint")
}

/// A joint that factors exactly: product of two random marginals.
pub fn random_product_joint(
    rng: &mut ChaCha8Rng,
    max_support: usize,
    dx: usize,
    dy: usize,
) -> JointPairDistribution {
    let na = rng.random_range(1..=max_support);
    let nb = rng.random_range(1..=max_support);
    let a = DiscreteDistribution::new(random_points(rng, na, dx), random_weights(rng, na))
        .expect("valid marginal");
    let b = DiscreteDistribution::new(random_points(rng, nb, dy), random_weights(rng, nb))
        .expect("valid marginal");
    JointPairDistribution::product(&a, &b).expect("valid product")
}

/// Run `random_n` arbitrary instances and `product_n` product-measure
/// instances, all with supports of at most `max_support` atoms per joint.
pub fn run_instances(
    seed: u64,
    random_n: usize,
    product_n: usize,
    max_support: usize,
) -> Result<Vec<Instance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x7E0);
    let mut out = Vec::with_capacity(random_n + product_n);
    for i in 0..random_n + product_n {
        let kind = if i < random_n {
            InstanceKind::Random
        } else {
            InstanceKind::Product
        };
        let dx = rng.random_range(1..=2);
        let dy = rng.random_range(1..=2);
        let (pa, pb) = match kind {
            InstanceKind::Random => (
                random_joint(&mut rng, max_support, dx, dy),
                random_joint(&mut rng, max_support, dx, dy),
            ),
            InstanceKind::Product => (
                random_product_joint(&mut rng, max_support, dx, dy),
                random_product_joint(&mut rng, max_support, dx, dy),
            ),
        };
        let (c1, c2) = (pick_metric(&mut rng), pick_metric(&mut rng));
        let report = decomposition_report(&pa, &pb, c1, c2)?;
        out.push(Instance { kind, report });
    }
    Ok(out)
}

pub struct Verdict {
    pub pass: bool,
    pub worst_gap: f64,
    pub worst_product_gap: f64,
    pub positive_gap_count: usize,
    /// Index of the instance with the largest gap, for the detail printout.
    pub widest_instance: usize,
}

/// PASS iff no instance dips below `-GAP_TOL` and every product instance
/// stays within `GAP_TOL` of zero.
pub fn judge(instances: &[Instance]) -> Verdict {
    let mut worst_gap = f64::INFINITY;
    let mut worst_product_gap = 0.0f64;
    let mut positive_gap_count = 0;
    let mut widest_instance = 0;
    let mut widest = f64::NEG_INFINITY;
    for (idx, inst) in instances.iter().enumerate() {
        worst_gap = worst_gap.min(inst.report.gap);
        if inst.report.gap > GAP_TOL {
            positive_gap_count += 1;
        }
        if inst.report.gap > widest {
            widest = inst.report.gap;
            widest_instance = idx;
        }
        if inst.kind == InstanceKind::Product {
            worst_product_gap = worst_product_gap.max(inst.report.gap.abs());
        }
    }
    let pass = worst_gap >= -GAP_TOL && worst_product_gap <= GAP_TOL;
    Verdict {
        pass,
        worst_gap,
        worst_product_gap,
        positive_gap_count,
        widest_instance,
    }
}

pub fn csv_text(instances: &[Instance]) -> String {
    let mut out = String::from("instance,kind,");
    out.push_str(DecompositionReport::csv_header());
    out.push('\n');
    for (i, inst) in instances.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i, inst.kind.name(), inst.report.csv_row()));
    }
    out
}
