//! Lasso regression by cyclic coordinate descent on centered data.
//!
//! Minimizes `(1/2n)‖y − Xw − b‖² + α‖w‖₁` with an unpenalized intercept.

use crate::linalg::Matrix;
use crate::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct LassoOptions {
    /// Stop once no coefficient moves by more than this in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_sweeps: 10_000 }
    }
}

#[derive(Clone, Debug)]
pub struct LassoFit<S> {
    pub weights: Vec<S>,
    pub bias: S,
    pub objective: S,
    pub sweeps: usize,
}

pub fn lasso_objective<S: Scalar>(x: &Matrix<S>, y: &[S], w: &[S], b: S, alpha: S) -> S {
    let n = S::of(x.rows() as f64);
    let rss: S = (0..x.rows())
        .map(|i| {
            let r = y[i] - crate::linalg::dot(x.row(i), w) - b;
            r * r
        })
        .sum();
    rss / (n + n) + alpha * w.iter().map(|v| v.abs()).sum::<S>()
}

fn soft_threshold<S: Scalar>(v: S, t: S) -> S {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        S::zero()
    }
}

pub fn fit_lasso<S: Scalar>(x: &Matrix<S>, y: &[S], alpha: S, opts: &LassoOptions) -> LassoFit<S> {
    assert_eq!(x.rows(), y.len(), "design rows and targets differ in length");
    let (n, p) = x.shape();
    let nf = S::of(n as f64);
    let x_mean: Vec<S> = (0..p).map(|j| (0..n).map(|i| x.get(i, j)).sum::<S>() / nf).collect();
    let y_mean = y.iter().copied().sum::<S>() / nf;
    let xc = Matrix::from_vec(n, p, (0..n).flat_map(|i| (0..p).map(|j| x.get(i, j) - x_mean[j]).collect::<Vec<_>>()).collect());
    let col_ss: Vec<S> = (0..p).map(|j| (0..n).map(|i| xc.get(i, j) * xc.get(i, j)).sum::<S>() / nf).collect();

    let mut w = vec![S::zero(); p];
    let mut resid: Vec<S> = y.iter().map(|&v| v - y_mean).collect();
    let tol = S::of(opts.tol);
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change = S::zero();
        for j in 0..p {
            if col_ss[j] <= S::zero() {
                continue;
            }
            let rho = (0..n).map(|i| xc.get(i, j) * resid[i]).sum::<S>() / nf + col_ss[j] * w[j];
            let next = soft_threshold(rho, alpha) / col_ss[j];
            let delta = next - w[j];
            if delta != S::zero() {
                for (i, r) in resid.iter_mut().enumerate() {
                    *r -= delta * xc.get(i, j);
                }
                w[j] = next;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            break;
        }
    }
    let bias = y_mean - crate::linalg::dot(&x_mean, &w);
    let objective = lasso_objective(x, y, &w, bias, alpha);
    LassoFit { weights: w, bias, objective, sweeps }
}
