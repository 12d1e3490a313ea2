//! Transportation simplex on the bipartite supply/demand graph.
//!
//! The basis is a spanning tree over `rows + cols` nodes with exactly
//! `rows + cols − 1` cells (degenerate zero-flow cells included). Each
//! iteration prices every non-basic cell with the tree potentials, enters the
//! most negative reduced cost and pivots around the unique tree cycle.
//! After a run of degenerate pivots the rule switches to Bland's (smallest
//! index) until progress resumes.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Plan {
    /// `(row, col, mass)` for every basic cell with positive mass.
    pub cells: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

struct Basis {
    rows: usize,
    cols: usize,
    cells: Vec<(usize, usize, f64)>,
    is_basic: Vec<bool>,
}

impl Basis {
    fn node_edges(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.rows + self.cols];
        for (e, &(i, j, _)) in self.cells.iter().enumerate() {
            adj[i].push(e);
            adj[self.rows + j].push(e);
        }
        adj
    }

    fn other(&self, e: usize, node: usize) -> usize {
        let (i, j, _) = self.cells[e];
        if node == i {
            self.rows + j
        } else {
            i
        }
    }
}

pub fn solve(cost: &[f64], rows: usize, cols: usize, supply: &[f64], demand: &[f64]) -> Result<Plan> {
    assert_eq!(cost.len(), rows * cols);
    assert_eq!(supply.len(), rows);
    assert_eq!(demand.len(), cols);
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    let demand: Vec<f64> = demand.iter().map(|b| b * total_s / total_d).collect();

    let mut basis = northwest_corner(rows, cols, supply, &demand);
    let scale = cost.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
    let eps = 1e-12 * scale;
    let max_iter = 50 * (rows + cols) * (rows + cols) + 1000;
    let mut degenerate_run = 0usize;
    let nodes = rows + cols;

    for _ in 0..max_iter {
        let adj = basis.node_edges();
        let (u, v) = potentials(&basis, &adj, cost);
        let bland = degenerate_run > nodes;

        let mut entering = None;
        let mut best = -eps;
        'scan: for i in 0..rows {
            for j in 0..cols {
                if basis.is_basic[i * cols + j] {
                    continue;
                }
                let r = cost[i * cols + j] - u[i] - v[j];
                if r < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let cost_total = basis.cells.iter().map(|&(i, j, f)| f * cost[i * cols + j]).sum();
            let cells = basis.cells.into_iter().filter(|c| c.2 > 0.0).collect();
            return Ok(Plan {
                cells,
                cost: cost_total,
            });
        };

        // Tree path from column `ej` back to row `ei`.
        let path = tree_path(&basis, &adj, rows + ej, ei, nodes);
        // Edges on the path alternate −, +, −, … starting at column ej.
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 {
                let (i, j, f) = basis.cells[e];
                let better = f < theta
                    || (f == theta && bland && i * cols + j < {
                        let (li, lj, _) = basis.cells[leave];
                        li * cols + lj
                    });
                if better {
                    theta = f;
                    leave = e;
                }
            }
        }
        let theta = theta.max(0.0);
        if theta <= eps * 1e-3 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        for (k, &e) in path.iter().enumerate() {
            let f = &mut basis.cells[e].2;
            if k % 2 == 0 {
                *f = (*f - theta).max(0.0);
            } else {
                *f += theta;
            }
        }
        let (li, lj, _) = basis.cells[leave];
        basis.is_basic[li * cols + lj] = false;
        basis.cells[leave] = (ei, ej, theta);
        basis.is_basic[ei * cols + ej] = true;
    }
    Err(Error::Solver(format!(
        "transportation simplex did not converge in {max_iter} iterations"
    )))
}

fn northwest_corner(rows: usize, cols: usize, supply: &[f64], demand: &[f64]) -> Basis {
    let mut cells = Vec::with_capacity(rows + cols - 1);
    let mut is_basic = vec![false; rows * cols];
    let (mut i, mut j) = (0usize, 0usize);
    let mut ra = supply[0];
    let mut rb = demand[0];
    loop {
        let last_row = i + 1 == rows;
        let last_col = j + 1 == cols;
        let mass = if last_row && last_col {
            ra.max(rb).max(0.0)
        } else {
            ra.min(rb).max(0.0)
        };
        cells.push((i, j, mass));
        is_basic[i * cols + j] = true;
        if last_row && last_col {
            break;
        }
        let row_exhausted = !last_row && (ra <= rb || last_col);
        if row_exhausted {
            rb -= ra.min(rb);
            i += 1;
            ra = supply[i];
        } else {
            ra -= rb.min(ra);
            j += 1;
            rb = demand[j];
        }
    }
    Basis {
        rows,
        cols,
        cells,
        is_basic,
    }
}

fn potentials(basis: &Basis, adj: &[Vec<usize>], cost: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (rows, cols) = (basis.rows, basis.cols);
    let mut pot = vec![f64::NAN; rows + cols];
    let mut seen = vec![false; rows + cols];
    let mut stack = vec![0usize];
    pot[0] = 0.0;
    seen[0] = true;
    while let Some(node) = stack.pop() {
        for &e in &adj[node] {
            let next = basis.other(e, node);
            if seen[next] {
                continue;
            }
            let (i, j, _) = basis.cells[e];
            let c = cost[i * cols + j];
            // u_i + v_j = c_ij on basic cells.
            pot[next] = c - pot[node];
            seen[next] = true;
            stack.push(next);
        }
    }
    let v = pot.split_off(rows);
    (pot, v)
}

fn tree_path(basis: &Basis, adj: &[Vec<usize>], from: usize, to: usize, nodes: usize) -> Vec<usize> {
    let mut parent_edge = vec![usize::MAX; nodes];
    let mut seen = vec![false; nodes];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(node) = stack.pop() {
        if node == to {
            break;
        }
        for &e in &adj[node] {
            let next = basis.other(e, node);
            if !seen[next] {
                seen[next] = true;
                parent_edge[next] = e;
                stack.push(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let e = parent_edge[node];
        path.push(e);
        node = basis.other(e, node);
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_instance() {
        // Supplies 20/30/25, demands 10/35/30, costs from a standard example.
        let cost = [8.0, 6.0, 10.0, 9.0, 12.0, 13.0, 14.0, 9.0, 16.0];
        let supply = [20.0, 30.0, 25.0];
        let demand = [10.0, 35.0, 30.0];
        let plan = solve(&cost, 3, 3, &supply, &demand).unwrap();
        // Brute-force optimum over integral plans.
        let mut best = f64::INFINITY;
        for x00 in 0..=10 {
            for x01 in 0..=20 - x00 {
                let x02 = 20 - x00 - x01;
                for x10 in 0..=10 - x00 {
                    for x11 in 0..=30 - x10 {
                        let x12 = 30 - x10 - x11;
                        let x20 = 10 - x00 - x10;
                        let x21 = 35 - x01 - x11;
                        let x22 = 30 - x02 - x12;
                        if x21 < 0 || x22 < 0 || x20 + x21 + x22 != 25 {
                            continue;
                        }
                        let x = [x00, x01, x02, x10, x11, x12, x20, x21, x22];
                        let c: f64 = x.iter().zip(&cost).map(|(a, b)| *a as f64 * b).sum();
                        best = best.min(c);
                    }
                }
            }
        }
        assert!((plan.cost - best).abs() < 1e-9, "{} vs {best}", plan.cost);
    }

    #[test]
    fn single_row() {
        let plan = solve(&[1.0, 2.0, 3.0], 1, 3, &[1.0], &[0.2, 0.3, 0.5]).unwrap();
        assert!((plan.cost - (0.2 + 0.6 + 1.5)).abs() < 1e-15);
    }
}
