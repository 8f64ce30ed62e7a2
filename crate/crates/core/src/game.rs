//! Exact solution of finite two-player zero-sum games by the simplex method.
//!
//! Rows are the maximizing player's pure strategies, columns the
//! minimizer's. After shifting the payoffs to be strictly positive, the
//! minimizer's problem becomes `max sum x  s.t.  A x <= 1, x >= 0`, whose
//! origin is feasible, so no phase-one is needed. The optimal tableau also
//! carries the maximizer's mixture in the slack reduced costs. Bland's rule
//! keeps degenerate problems from cycling.

use crate::error::{contract, BoostError, Result};

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    /// `min_d max_h (A d)_h`, evaluated at `column_strategy`.
    pub upper_value: f64,
    /// `max_q min_p (q^T A)_p`, evaluated at `row_strategy`.
    pub lower_value: f64,
    /// Minimizer's mixture over columns.
    pub column_strategy: Vec<f64>,
    /// Maximizer's mixture over rows.
    pub row_strategy: Vec<f64>,
    pub pivots: usize,
}

impl MatrixGameSolution {
    pub fn gap(&self) -> f64 {
        self.upper_value - self.lower_value
    }
}

fn best_response_values(payoff: &[Vec<f64>], column: &[f64], row: &[f64]) -> (f64, f64) {
    let upper = payoff
        .iter()
        .map(|r| r.iter().zip(column).map(|(a, d)| a * d).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let cols = column.len();
    let lower = (0..cols)
        .map(|p| payoff.iter().zip(row).map(|(r, q)| r[p] * q).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    (upper, lower)
}

/// Solve the game with payoff `payoff[h][p]` to the row player.
///
/// Fails with [`BoostError::Solver`] if the certified duality gap exceeds
/// `gap_tol` or the pivot budget runs out.
pub fn solve_matrix_game(payoff: &[Vec<f64>], gap_tol: f64) -> Result<MatrixGameSolution> {
    let rows = payoff.len();
    let Some(cols) = payoff.first().map(Vec::len) else {
        return contract("game has no row strategies");
    };
    if cols == 0 {
        return contract("game has no column strategies");
    }
    if payoff.iter().any(|r| r.len() != cols || r.iter().any(|v| !v.is_finite())) {
        return contract("payoff matrix is ragged or non-finite");
    }
    let lo = payoff.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - lo;

    // Columns: decision x_0..x_{cols-1}, slacks s_0..s_{rows-1}, rhs.
    let width = cols + rows + 1;
    let rhs = width - 1;
    let mut tab: Vec<Vec<f64>> = payoff
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut t = vec![0.0; width];
            for (p, v) in row.iter().enumerate() {
                t[p] = v + shift;
            }
            t[cols + r] = 1.0;
            t[rhs] = 1.0;
            t
        })
        .collect();
    let mut objective = vec![0.0; width];
    for c in objective.iter_mut().take(cols) {
        *c = -1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let budget = 50 * (rows + cols) + 100;
    let mut pivots = 0;
    while let Some(enter) = (0..rhs).find(|&j| objective[j] < -PIVOT_TOL) {
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let a = tab[r][enter];
            if a > PIVOT_TOL {
                let ratio = tab[r][rhs] / a;
                let better = match leave {
                    None => true,
                    Some((l, best)) => {
                        ratio < best - PIVOT_TOL
                            || (ratio <= best + PIVOT_TOL && basis[r] < basis[l])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((pr, _)) = leave else {
            // Cannot happen with a strictly positive matrix.
            return Err(BoostError::Numeric("game program is unbounded".into()));
        };
        let pivot = tab[pr][enter];
        for v in tab[pr].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = tab[pr].clone();
        for (r, row) in tab.iter_mut().enumerate() {
            if r == pr {
                continue;
            }
            let factor = row[enter];
            if factor != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
            }
        }
        let factor = objective[enter];
        for (v, pv) in objective.iter_mut().zip(&pivot_row) {
            *v -= factor * pv;
        }
        basis[pr] = enter;
        pivots += 1;
        if pivots > budget {
            return Err(BoostError::Solver {
                gap: f64::NAN,
                iterations: pivots,
            });
        }
    }

    let mut x = vec![0.0; cols];
    for (r, &b) in basis.iter().enumerate() {
        if b < cols {
            x[b] = tab[r][rhs].max(0.0);
        }
    }
    let y: Vec<f64> = (0..rows).map(|r| objective[cols + r].max(0.0)).collect();
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    if !(sx > 0.0 && sy > 0.0) {
        return Err(BoostError::Numeric("degenerate game solution".into()));
    }
    let column_strategy: Vec<f64> = x.iter().map(|v| v / sx).collect();
    let row_strategy: Vec<f64> = y.iter().map(|v| v / sy).collect();
    let (upper_value, lower_value) = best_response_values(payoff, &column_strategy, &row_strategy);
    let solution = MatrixGameSolution {
        upper_value,
        lower_value,
        column_strategy,
        row_strategy,
        pivots,
    };
    if !(solution.gap() <= gap_tol) {
        return Err(BoostError::Solver {
            gap: solution.gap(),
            iterations: pivots,
        });
    }
    Ok(solution)
}
