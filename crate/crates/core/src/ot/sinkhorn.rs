//! Entropically regularized transport via log-domain Sinkhorn iterations,
//! with ε-scaling warm starts so small regularizers stay stable.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug)]
pub struct SinkhornOutcome {
    /// Transport cost `⟨P, C⟩` of the returned plan (no entropy term).
    pub value: f64,
    pub plan: Matrix,
    pub iterations: usize,
    pub marginal_violation: f64,
}

/// Iterations spent at each warm-start level before tightening ε.
const WARMUP_ITERS: usize = 60;

pub fn solve(
    mu: &[f64],
    nu: &[f64],
    cost: &Matrix,
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> Result<SinkhornOutcome> {
    let n = mu.len();
    let m = nu.len();
    if cost.rows() != n || cost.cols() != m {
        return Err(Error::DimMismatch(format!(
            "cost is {}x{} for {} and {} weights",
            cost.rows(),
            cost.cols(),
            n,
            m
        )));
    }
    if epsilon <= 0.0 {
        return Err(Error::InvalidArg(format!("epsilon must be > 0, got {epsilon}")));
    }

    let log_mu: Vec<f64> = mu.iter().map(|&w| w.ln()).collect(); // ln 0 = -inf is fine
    let log_nu: Vec<f64> = nu.iter().map(|&w| w.ln()).collect();

    // ε-scaling schedule: halve from the cost scale down to the target.
    let cmax = cost.data().iter().fold(0.0f64, |a, &c| a.max(c));
    let mut levels = Vec::new();
    let mut e = cmax.max(epsilon);
    while e > epsilon * 1.000_001 {
        levels.push(e);
        e *= 0.5;
    }
    levels.push(epsilon);

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut iterations = 0usize;

    // max_iters bounds the total work across all warm-start levels.
    for (li, &eps) in levels.iter().enumerate() {
        let last = li == levels.len() - 1;
        let budget = if last {
            max_iters.saturating_sub(iterations)
        } else {
            WARMUP_ITERS.min(max_iters.saturating_sub(iterations))
        };
        for _ in 0..budget {
            iterations += 1;
            // f_i <- eps ln mu_i - eps LSE_j((g_j - C_ij)/eps)
            for i in 0..n {
                if log_mu[i] == f64::NEG_INFINITY {
                    f[i] = f64::NEG_INFINITY;
                    continue;
                }
                let lse = log_sum_exp((0..m).map(|j| (g[j] - cost.get(i, j)) / eps));
                f[i] = eps * (log_mu[i] - lse);
            }
            for j in 0..m {
                if log_nu[j] == f64::NEG_INFINITY {
                    g[j] = f64::NEG_INFINITY;
                    continue;
                }
                let lse = log_sum_exp((0..n).map(|i| (f[i] - cost.get(i, j)) / eps));
                g[j] = eps * (log_nu[j] - lse);
            }
            if last {
                let (plan, violation) = build_plan(&f, &g, cost, eps, mu, nu);
                if violation < tol {
                    let value = transport_cost(&plan, cost);
                    return Ok(SinkhornOutcome {
                        value,
                        plan,
                        iterations,
                        marginal_violation: violation,
                    });
                }
            }
        }
    }

    let (_, violation) = build_plan(&f, &g, cost, epsilon, mu, nu);
    Err(Error::SinkhornDiverged {
        violation,
        iters: iterations,
    })
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

fn build_plan(
    f: &[f64],
    g: &[f64],
    cost: &Matrix,
    eps: f64,
    mu: &[f64],
    nu: &[f64],
) -> (Matrix, f64) {
    let (n, m) = (f.len(), g.len());
    let mut plan = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let expo = (f[i] + g[j] - cost.get(i, j)) / eps;
            plan.set(i, j, expo.exp());
        }
    }
    let mut violation = 0.0f64;
    for i in 0..n {
        let row: f64 = plan.row(i).iter().sum();
        violation = violation.max((row - mu[i]).abs());
    }
    for j in 0..m {
        let col: f64 = (0..n).map(|i| plan.get(i, j)).sum();
        violation = violation.max((col - nu[j]).abs());
    }
    (plan, violation)
}

fn transport_cost(plan: &Matrix, cost: &Matrix) -> f64 {
    plan.data()
        .iter()
        .zip(cost.data())
        .map(|(&p, &c)| p * c)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginals_meet_tolerance() {
        let cost = Matrix::from_rows(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0]]).unwrap();
        let mu = [0.6, 0.4];
        let nu = [0.3, 0.3, 0.4];
        let out = solve(&mu, &nu, &cost, 0.05, 20_000, 1e-9).unwrap();
        assert!(out.marginal_violation < 1e-9);
        for i in 0..2 {
            let row: f64 = out.plan.row(i).iter().sum();
            assert!((row - mu[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn self_transport_value_vanishes_with_epsilon() {
        // mu = nu and a zero-diagonal cost: value -> 0 as eps -> 0.
        let cost = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let w = [0.5, 0.5];
        let coarse = solve(&w, &w, &cost, 0.5, 20_000, 1e-9).unwrap();
        let fine = solve(&w, &w, &cost, 1e-3, 50_000, 1e-9).unwrap();
        assert!(fine.value < coarse.value);
        assert!(fine.value < 1e-2, "value {}", fine.value);
    }

    #[test]
    fn zero_weight_atoms_get_zero_rows() {
        let cost = Matrix::from_rows(&[vec![0.5, 1.0], vec![2.0, 0.25], vec![1.0, 1.0]]).unwrap();
        let mu = [0.5, 0.5, 0.0];
        let nu = [0.5, 0.5];
        let out = solve(&mu, &nu, &cost, 0.1, 50_000, 1e-8).unwrap();
        assert!(out.plan.row(2).iter().all(|&p| p == 0.0));
        assert!(out.marginal_violation < 1e-8);
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        let cost = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert!(solve(&[1.0], &[1.0], &cost, 0.0, 10, 1e-6).is_err());
    }

    #[test]
    fn non_convergence_reports_violation() {
        let cost = Matrix::from_rows(&[vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let err = solve(&[0.5, 0.5], &[0.5, 0.5], &cost, 1e-4, 3, 1e-12).unwrap_err();
        match err {
            Error::SinkhornDiverged { violation, .. } => assert!(violation.is_finite()),
            other => panic!("expected divergence report, got {other:?}"),
        }
    }
}
