//! Discrete optimal transport: exact solvers (assignment + transportation
//! simplex), an entropic approximation, and the joint-cost decomposition
//! report used to check that transport between two joint distributions with
//! additive cost splits into two marginal transport problems.

pub mod hungarian;
pub mod network_simplex;
pub mod sinkhorn;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const WEIGHT_TOL: f64 = 1e-12;

/// Ground cost between points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    L1,
    L2,
    SqL2,
}

impl Metric {
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::SqL2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
            Metric::SqL2 => "sql2",
        }
    }
}

/// Weighted point set; weights are validated to be a probability vector.
#[derive(Clone, Debug)]
pub struct DiscreteDistribution {
    points: Matrix,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(points: Matrix, weights: Vec<f64>) -> Result<Self> {
        if points.rows() == 0 || points.rows() != weights.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} points vs {} weights",
                points.rows(),
                weights.len()
            )));
        }
        if let Some(&w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(Error::InvalidDistribution(format!("negative weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Matrix) -> Result<Self> {
        let n = points.rows();
        if n == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        // n * (1/n) can land a few ulps off 1; normalize the last weight.
        let w = 1.0 / n as f64;
        let mut weights = vec![w; n];
        let partial: f64 = weights[..n - 1].iter().sum();
        weights[n - 1] = 1.0 - partial;
        Self::new(points, weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&x| (x - w).abs() <= WEIGHT_TOL)
    }
}

/// Pairwise ground costs plus the metric that generated them.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    entries: Matrix,
    metric: Option<Metric>,
}

impl CostMatrix {
    pub fn from_matrix(entries: Matrix) -> Result<Self> {
        if let Some(&c) = entries.data().iter().find(|&&c| c < 0.0 || !c.is_finite()) {
            return Err(Error::InvalidArg(format!("bad cost entry {c}")));
        }
        Ok(Self {
            entries,
            metric: None,
        })
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn metric(&self) -> Option<Metric> {
        self.metric
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.data().iter().fold(0.0f64, |a, &c| a.max(c))
    }
}

/// `C[i][j] = metric(a_i, b_j)`.
pub fn cost_matrix(a: &Matrix, b: &Matrix, metric: Metric) -> Result<CostMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::DimMismatch(format!(
            "points have dim {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    let mut entries = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            entries.set(i, j, metric.dist(a.row(i), b.row(j)));
        }
    }
    Ok(CostMatrix {
        entries,
        metric: Some(metric),
    })
}

/// Transport plan with marginals matching the two input distributions.
#[derive(Clone, Debug)]
pub struct Coupling {
    plan: Matrix,
}

impl Coupling {
    pub fn plan(&self) -> &Matrix {
        &self.plan
    }

    pub fn transport_cost(&self, c: &CostMatrix) -> f64 {
        self.plan
            .data()
            .iter()
            .zip(c.entries.data())
            .map(|(&p, &cc)| p * cc)
            .sum()
    }

    /// Largest deviation of a row/column sum from the target marginals.
    pub fn marginal_violation(&self, mu: &[f64], nu: &[f64]) -> f64 {
        let mut v = 0.0f64;
        for (i, &w) in mu.iter().enumerate() {
            let row: f64 = self.plan.row(i).iter().sum();
            v = v.max((row - w).abs());
        }
        for (j, &w) in nu.iter().enumerate() {
            let col: f64 = (0..mu.len()).map(|i| self.plan.get(i, j)).sum();
            v = v.max((col - w).abs());
        }
        v
    }
}

/// Exact transport value and an optimal coupling. Uniform equal-size
/// instances route through the assignment solver (the optimum is a scaled
/// permutation); everything else goes to the transportation simplex.
pub fn exact_wasserstein(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    c: &CostMatrix,
) -> Result<(f64, Coupling)> {
    if c.entries.rows() != mu.len() || c.entries.cols() != nu.len() {
        return Err(Error::DimMismatch(format!(
            "cost is {}x{} for |mu|={} |nu|={}",
            c.entries.rows(),
            c.entries.cols(),
            mu.len(),
            nu.len()
        )));
    }
    let plan = if mu.len() == nu.len() && mu.is_uniform() && nu.is_uniform() {
        let (assignment, _) = hungarian::solve(&c.entries)?;
        let n = mu.len();
        let mut plan = Matrix::zeros(n, n);
        for (i, &j) in assignment.iter().enumerate() {
            plan.set(i, j, mu.weights()[i]);
        }
        plan
    } else {
        network_simplex::solve(mu.weights(), nu.weights(), &c.entries)?
    };
    let coupling = Coupling { plan };
    let value = coupling.transport_cost(c);
    Ok((value, coupling))
}

/// Entropic approximation; see [`sinkhorn::solve`] for the scheme.
pub fn sinkhorn(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    c: &CostMatrix,
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> Result<(f64, Coupling)> {
    let out = sinkhorn::solve(mu.weights(), nu.weights(), &c.entries, epsilon, max_iters, tol)?;
    Ok((out.value, Coupling { plan: out.plan }))
}

/// Discrete joint distribution over a product space, stored as parallel
/// point lists: atom k sits at `(first[k], second[k])` with `weights[k]`.
#[derive(Clone, Debug)]
pub struct JointPairDistribution {
    first: Matrix,
    second: Matrix,
    weights: Vec<f64>,
}

impl JointPairDistribution {
    pub fn new(first: Matrix, second: Matrix, weights: Vec<f64>) -> Result<Self> {
        if first.rows() != second.rows() || first.rows() != weights.len() || weights.is_empty() {
            return Err(Error::InvalidDistribution(format!(
                "joint with {} first points, {} second points, {} weights",
                first.rows(),
                second.rows(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidDistribution("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidDistribution(format!(
                "joint weights sum to {total}"
            )));
        }
        Ok(Self {
            first,
            second,
            weights,
        })
    }

    /// Product measure `margin_a ⊗ margin_b` on the full support grid.
    pub fn product(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<Self> {
        let mut first = Vec::new();
        let mut second = Vec::new();
        let mut weights = Vec::with_capacity(a.len() * b.len());
        for i in 0..a.len() {
            for j in 0..b.len() {
                first.extend_from_slice(a.points().row(i));
                second.extend_from_slice(b.points().row(j));
                weights.push(a.weights()[i] * b.weights()[j]);
            }
        }
        // Renormalize away accumulated rounding so the ctor's 1e-12 gate holds.
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Self::new(
            Matrix::new(a.len() * b.len(), a.dim(), first)?,
            Matrix::new(a.len() * b.len(), b.dim(), second)?,
            weights,
        )
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn first_points(&self) -> &Matrix {
        &self.first
    }

    pub fn second_points(&self) -> &Matrix {
        &self.second
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn first_marginal(&self) -> Result<DiscreteDistribution> {
        marginal_of(&self.first, &self.weights)
    }

    pub fn second_marginal(&self) -> Result<DiscreteDistribution> {
        marginal_of(&self.second, &self.weights)
    }

    /// True iff the joint equals the product of its own marginals, entrywise
    /// within `tol` over the full marginal-support grid.
    pub fn is_product(&self, tol: f64) -> Result<bool> {
        let (_, xw, xid) = group_rows(&self.first, &self.weights);
        let (_, yw, yid) = group_rows(&self.second, &self.weights);
        let (nx, ny) = (xw.len(), yw.len());
        let mut grid = vec![0.0f64; nx * ny];
        for k in 0..self.weights.len() {
            grid[xid[k] * ny + yid[k]] += self.weights[k];
        }
        for i in 0..nx {
            for j in 0..ny {
                if (grid[i * ny + j] - xw[i] * yw[j]).abs() > tol {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Group identical rows (bitwise, via total order) and sum their weights.
/// Returns (unique rows, their weights, original-row -> group index).
fn group_rows(points: &Matrix, weights: &[f64]) -> (Matrix, Vec<f64>, Vec<usize>) {
    let n = points.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (points.row(a), points.row(b));
        for (x, y) in ra.iter().zip(rb) {
            let c = x.total_cmp(y);
            if c != std::cmp::Ordering::Equal {
                return c;
            }
        }
        std::cmp::Ordering::Equal
    });
    let mut unique: Vec<f64> = Vec::new();
    let mut grouped_w: Vec<f64> = Vec::new();
    let mut group_of = vec![0usize; n];
    let mut prev: Option<usize> = None;
    for &idx in &order {
        let same = prev.is_some_and(|p| points.row(p) == points.row(idx));
        if !same {
            unique.extend_from_slice(points.row(idx));
            grouped_w.push(0.0);
        }
        let g = grouped_w.len() - 1;
        grouped_w[g] += weights[idx];
        group_of[idx] = g;
        prev = Some(idx);
    }
    let rows = grouped_w.len();
    (
        Matrix::new(rows, points.cols(), unique).expect("grouped rows are rectangular"),
        grouped_w,
        group_of,
    )
}

fn marginal_of(points: &Matrix, weights: &[f64]) -> Result<DiscreteDistribution> {
    let (pts, mut w, _) = group_rows(points, weights);
    // Mass is preserved by grouping; renormalize rounding dust only.
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    DiscreteDistribution::new(pts, w)
}

/// Transport between two joint distributions under the additive pair cost
/// `c((x, y'), (x', y)) = c1(x, x') + c2(y', y)`.
pub fn joint_wasserstein(
    pa: &JointPairDistribution,
    pb: &JointPairDistribution,
    c1: Metric,
    c2: Metric,
) -> Result<(f64, Coupling)> {
    let c = joint_cost(pa, pb, c1, c2)?;
    let mu = joint_as_distribution(pa)?;
    let nu = joint_as_distribution(pb)?;
    exact_wasserstein(&mu, &nu, &c)
}

fn joint_cost(
    pa: &JointPairDistribution,
    pb: &JointPairDistribution,
    c1: Metric,
    c2: Metric,
) -> Result<CostMatrix> {
    let ca = cost_matrix(pa.first_points(), pb.first_points(), c1)?;
    let cb = cost_matrix(pa.second_points(), pb.second_points(), c2)?;
    let data: Vec<f64> = ca
        .entries
        .data()
        .iter()
        .zip(cb.entries.data())
        .map(|(&a, &b)| a + b)
        .collect();
    CostMatrix::from_matrix(Matrix::new(pa.len(), pb.len(), data)?)
}

fn joint_as_distribution(p: &JointPairDistribution) -> Result<DiscreteDistribution> {
    // Pair atoms laid out as concatenated coordinates; only the weights
    // matter to the solver, the cost matrix is built separately.
    let mut data = Vec::with_capacity(p.len() * (p.first.cols() + p.second.cols()));
    for k in 0..p.len() {
        data.extend_from_slice(p.first.row(k));
        data.extend_from_slice(p.second.row(k));
    }
    DiscreteDistribution::new(
        Matrix::new(p.len(), p.first.cols() + p.second.cols(), data)?,
        p.weights.to_vec(),
    )
}

/// Joint transport value against the sum of its two marginal problems.
#[derive(Clone, Copy, Debug)]
pub struct DecompositionReport {
    pub w_c: f64,
    pub w_c1: f64,
    pub w_c2: f64,
    /// `w_c - (w_c1 + w_c2)`; nonnegative, and zero when both joints are
    /// product measures.
    pub gap: f64,
    /// Both inputs factor as products of their marginals (within 1e-12).
    pub independent: bool,
}

impl DecompositionReport {
    pub fn csv_header() -> &'static str {
        "w_c,w_c1,w_c2,gap,independent"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.w_c, self.w_c1, self.w_c2, self.gap, self.independent
        )
    }
}

impl std::fmt::Display for DecompositionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "joint transport cost      W_c  = {:.12}", self.w_c)?;
        writeln!(f, "first marginal transport  W_c1 = {:.12}", self.w_c1)?;
        writeln!(f, "second marginal transport W_c2 = {:.12}", self.w_c2)?;
        writeln!(f, "gap  W_c - (W_c1 + W_c2)       = {:.3e}", self.gap)?;
        write!(
            f,
            "independence premise satisfied = {}",
            if self.independent { "yes" } else { "no" }
        )
    }
}

/// Solve the joint problem and both marginal problems exactly and report the
/// decomposition gap.
pub fn decomposition_report(
    pa: &JointPairDistribution,
    pb: &JointPairDistribution,
    c1: Metric,
    c2: Metric,
) -> Result<DecompositionReport> {
    let (w_c, _) = joint_wasserstein(pa, pb, c1, c2)?;
    let ma = pa.first_marginal()?;
    let mb = pb.first_marginal()?;
    let (w_c1, _) = exact_wasserstein(&ma, &mb, &cost_matrix(ma.points(), mb.points(), c1)?)?;
    let sa = pa.second_marginal()?;
    let sb = pb.second_marginal()?;
    let (w_c2, _) = exact_wasserstein(&sa, &sb, &cost_matrix(sa.points(), sb.points(), c2)?)?;
    let independent = pa.is_product(WEIGHT_TOL)? && pb.is_product(WEIGHT_TOL)?;
    Ok(DecompositionReport {
        w_c,
        w_c1,
        w_c2,
        gap: w_c - (w_c1 + w_c2),
        independent,
    })
}
