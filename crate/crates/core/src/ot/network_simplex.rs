//! Exact transportation-problem solver: a network simplex specialized to the
//! bipartite transportation polytope (row sums = supplies, column sums =
//! demands). Handles arbitrary nonnegative real supplies/demands, which the
//! assignment solver cannot.
//!
//! The basis is a spanning tree over the n row nodes and m column nodes,
//! held as a boolean cell matrix. Each pivot recomputes potentials by a tree
//! walk, picks the most negative reduced cost (falling back to Bland's rule
//! after a long degenerate streak), and shifts flow around the unique cycle
//! the entering cell closes.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAX_PIVOTS: usize = 200_000;

/// Optimal flow matrix for the balanced transportation problem.
pub fn solve(supply: &[f64], demand: &[f64], cost: &Matrix) -> Result<Matrix> {
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 || cost.rows() != n || cost.cols() != m {
        return Err(Error::DimMismatch(format!(
            "cost is {}x{} for {} supplies and {} demands",
            cost.rows(),
            cost.cols(),
            n,
            m
        )));
    }
    let (s_sum, d_sum): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (s_sum - d_sum).abs() > 1e-9 * s_sum.abs().max(1.0) {
        return Err(Error::InvalidDistribution(format!(
            "unbalanced problem: supply {s_sum} vs demand {d_sum}"
        )));
    }
    if supply.iter().chain(demand).any(|&w| w < 0.0) {
        return Err(Error::InvalidDistribution("negative mass".into()));
    }

    let mut flow = Matrix::zeros(n, m);
    let mut basic = vec![false; n * m];

    // Northwest-corner initial basis: a staircase of exactly n+m-1 cells,
    // zero allocations included, forming a spanning tree.
    {
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let x = a[i].min(b[j]);
            flow.set(i, j, x);
            basic[i * m + j] = true;
            a[i] -= x;
            b[j] -= x;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if a[i] == 0.0 && i < n - 1 {
                i += 1;
            } else if j < m - 1 {
                j += 1;
            } else {
                i += 1;
            }
        }
    }

    let cost_scale = cost.data().iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
    let tol = 1e-11 * (1.0 + cost_scale);
    let mut degenerate_streak = 0usize;

    for _pivot in 0..MAX_PIVOTS {
        let (u, v) = potentials(n, m, cost, &basic)?;

        // Entering cell: most negative reduced cost, or the first negative
        // one (Bland) once degenerate pivots pile up.
        let bland = degenerate_streak > 2 * (n + m);
        let mut entering: Option<(usize, usize, f64)> = None;
        'scan: for i in 0..n {
            for j in 0..m {
                if basic[i * m + j] {
                    continue;
                }
                let rc = cost.get(i, j) - u[i] - v[j];
                if rc < -tol {
                    if bland {
                        entering = Some((i, j, rc));
                        break 'scan;
                    }
                    match entering {
                        Some((_, _, best)) if rc >= best => {}
                        _ => entering = Some((i, j, rc)),
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            // Optimal. Scrub the dust left by cycle updates.
            for x in flow.data_mut() {
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
            return Ok(flow);
        };

        // The tree path column ej -> row ei; with the entering cell it forms
        // the pivot cycle. Cells along the path alternate -, +, -, ...
        let path = tree_path(n, m, &basic, ei, ej)?;
        let mut delta = f64::INFINITY;
        let mut leaving = path[0];
        for (idx, &(i, j)) in path.iter().enumerate() {
            if idx % 2 == 0 {
                let f = flow.get(i, j);
                if f < delta || (f == delta && (i, j) < leaving) {
                    delta = f;
                    leaving = (i, j);
                }
            }
        }

        flow.set(ei, ej, flow.get(ei, ej) + delta);
        for (idx, &(i, j)) in path.iter().enumerate() {
            let cur = flow.get(i, j);
            if idx % 2 == 0 {
                flow.set(i, j, cur - delta);
            } else {
                flow.set(i, j, cur + delta);
            }
        }
        flow.set(leaving.0, leaving.1, 0.0);
        basic[leaving.0 * m + leaving.1] = false;
        basic[ei * m + ej] = true;

        if delta == 0.0 {
            degenerate_streak += 1;
        } else {
            degenerate_streak = 0;
        }
    }

    Err(Error::SolverStalled(MAX_PIVOTS))
}

/// Dual potentials from the basis tree, rooted at row 0 with u[0] = 0.
fn potentials(n: usize, m: usize, cost: &Matrix, basic: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rows_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut cols_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..n {
        for j in 0..m {
            if basic[i * m + j] {
                rows_adj[i].push(j);
                cols_adj[j].push(i);
            }
        }
    }
    let mut u = vec![f64::NAN; n];
    let mut v = vec![f64::NAN; m];
    u[0] = 0.0;
    // Nodes 0..n are rows, n..n+m are columns.
    let mut stack = vec![0usize];
    while let Some(node) = stack.pop() {
        if node < n {
            for &j in &rows_adj[node] {
                if v[j].is_nan() {
                    v[j] = cost.get(node, j) - u[node];
                    stack.push(n + j);
                }
            }
        } else {
            let j = node - n;
            for &i in &cols_adj[j] {
                if u[i].is_nan() {
                    u[i] = cost.get(i, j) - v[j];
                    stack.push(i);
                }
            }
        }
    }
    if u.iter().any(|x| x.is_nan()) || v.iter().any(|x| x.is_nan()) {
        return Err(Error::SolverStalled(0));
    }
    Ok((u, v))
}

/// Basic-cell path whose node walk runs from row `ei` to column `ej`.
/// Returned in walk order, so even indices are the cells sharing a row or
/// column with the entering cell on the decreasing side of the cycle.
fn tree_path(
    n: usize,
    m: usize,
    basic: &[bool],
    ei: usize,
    ej: usize,
) -> Result<Vec<(usize, usize)>> {
    let total = n + m;
    let mut parent = vec![usize::MAX; total];
    let mut seen = vec![false; total];
    seen[ei] = true;
    let mut queue = std::collections::VecDeque::from([ei]);
    let target = n + ej;
    while let Some(node) = queue.pop_front() {
        if node == target {
            break;
        }
        if node < n {
            for j in 0..m {
                if basic[node * m + j] && !seen[n + j] {
                    seen[n + j] = true;
                    parent[n + j] = node;
                    queue.push_back(n + j);
                }
            }
        } else {
            let j = node - n;
            for i in 0..n {
                if basic[i * m + j] && !seen[i] {
                    seen[i] = true;
                    parent[i] = n + j;
                    queue.push_back(i);
                }
            }
        }
    }
    if !seen[target] {
        return Err(Error::SolverStalled(0));
    }
    // Node sequence target -> ei via parents, then reversed into cells.
    let mut nodes = vec![target];
    let mut cur = target;
    while cur != ei {
        cur = parent[cur];
        nodes.push(cur);
    }
    nodes.reverse(); // ei ... target
    let cells = nodes
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if a < n {
                (a, b - n)
            } else {
                (b, a - n)
            }
        })
        .collect();
    Ok(cells)
}
