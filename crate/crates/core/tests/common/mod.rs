//! Independent reference implementations used to cross-check the library:
//! a bisection equilibrium solver working on the level-form first-order
//! condition, and a compensated normal-equations 2SLS estimator. Neither
//! shares code with the crate under test.

use conductlab::model::{ExogenousDraw, StructuralParams};

/// Level-form marginal condition `(1 + theta*alpha0) * P(Q) - MC(Q)`
/// evaluated at `Q = exp(log_q)`, entirely in levels via `powf`.
pub fn foc_level(params: &StructuralParams, draw: &ExogenousDraw, log_q: f64) -> f64 {
    let q = log_q.exp();
    let price = q.powf(params.alpha0)
        * draw.x1d.powf(params.alpha1)
        * draw.x2d.powf(params.alpha2)
        * draw.eps_d.exp();
    let marginal_cost = q.powf(params.beta0)
        * draw.x1s.powf(params.beta1)
        * draw.x2s.powf(params.beta2)
        * draw.eps_s.exp();
    (1.0 + params.theta * params.alpha0) * price - marginal_cost
}

/// Bisects the level-form condition for log Q on [-40, 40]. Valid for
/// downward-sloping demand against upward-sloping marginal cost
/// (alpha0 < 0 < beta0), where the condition is strictly decreasing in Q.
pub fn bisect_equilibrium(params: &StructuralParams, draw: &ExogenousDraw) -> f64 {
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    assert!(
        foc_level(params, draw, lo) > 0.0 && foc_level(params, draw, hi) < 0.0,
        "bracket does not straddle the root"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if foc_level(params, draw, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Neumaier-compensated dot product: running sum plus a separate
/// accumulator for the low-order bits lost at each addition.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut sum = 0.0_f64;
    let mut compensation = 0.0_f64;
    for (&ai, &bi) in a.iter().zip(b) {
        let term = ai * bi;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            compensation += (sum - t) + term;
        } else {
            compensation += (term - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Gauss-Jordan solve of `A x = b` with partial pivoting. `a` is row-major
/// and consumed. Panics on a numerically singular system; the oracle is only
/// fed well-conditioned fixtures.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = a.len();
    assert!(a.iter().all(|row| row.len() == n) && b.len() == n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        assert!(a[pivot_row][col].abs() > 1e-12, "singular system");
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let pivot = a[col][col];
        for val in a[col].iter_mut() {
            *val /= pivot;
        }
        b[col] /= pivot;
        let pivot_vals = a[col].clone();
        let pivot_rhs = b[col];
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            if factor == 0.0 {
                continue;
            }
            for (val, &pv) in a[row].iter_mut().zip(&pivot_vals) {
                *val -= factor * pv;
            }
            b[row] -= factor * pivot_rhs;
        }
    }
    b
}

/// Textbook normal-equations 2SLS,
/// `b = (X'Z W^-1 Z'X)^-1 X'Z W^-1 Z'y` with `W = Z'Z`, assembled from
/// compensated dot products and solved by Gauss-Jordan. Inputs are given
/// column by column.
pub fn two_sls_normal_equations(y: &[f64], x_cols: &[Vec<f64>], z_cols: &[Vec<f64>]) -> Vec<f64> {
    let k = x_cols.len();
    let m = z_cols.len();
    assert!(m >= k, "under-identified fixture");

    let w: Vec<Vec<f64>> = z_cols
        .iter()
        .map(|zi| z_cols.iter().map(|zj| dot(zi, zj)).collect())
        .collect();
    // A = Z'X (m x k), g = Z'y (m).
    let a: Vec<Vec<f64>> = z_cols
        .iter()
        .map(|zi| x_cols.iter().map(|xj| dot(zi, xj)).collect())
        .collect();
    let g: Vec<f64> = z_cols.iter().map(|zi| dot(zi, y)).collect();

    // Columns of W^-1 Z'X, then W^-1 Z'y.
    let winv_a: Vec<Vec<f64>> = (0..k)
        .map(|j| solve_dense(w.clone(), a.iter().map(|row| row[j]).collect()))
        .collect();
    let winv_g = solve_dense(w.clone(), g.clone());

    // M = X'Z W^-1 Z'X (k x k), v = X'Z W^-1 Z'y (k).
    let m_mat: Vec<Vec<f64>> = (0..k)
        .map(|r| {
            (0..k)
                .map(|c| (0..m).map(|i| a[i][r] * winv_a[c][i]).sum())
                .collect()
        })
        .collect();
    let v: Vec<f64> = (0..k)
        .map(|r| (0..m).map(|i| a[i][r] * winv_g[i]).sum())
        .collect();
    solve_dense(m_mat, v)
}

/// Direct instrumental-variables solve for the exactly identified case:
/// `b = (Z'X)^-1 Z'y`.
pub fn direct_iv(y: &[f64], x_cols: &[Vec<f64>], z_cols: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(x_cols.len(), z_cols.len(), "not exactly identified");
    let a: Vec<Vec<f64>> = z_cols
        .iter()
        .map(|zi| x_cols.iter().map(|xj| dot(zi, xj)).collect())
        .collect();
    let g: Vec<f64> = z_cols.iter().map(|zi| dot(zi, y)).collect();
    solve_dense(a, g)
}
