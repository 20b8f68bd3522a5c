//! Lasso: absolute-sum coefficient penalty, fit by cyclic coordinate
//! descent with soft thresholding.
//!
//! Objective on standardized data: (1/2n)·‖y − Zw‖² + λ‖w‖₁. Population
//! standardization makes every column satisfy zᵀz = n, so each coordinate
//! update is a plain soft threshold and λ ≥ max|Zᵀy|/n zeroes every slope.

use serde::{Deserialize, Serialize};

use super::{
    DesignMatrix, FittedRegressor, LinearMethod, LinearParams, ModelParams, RegressError,
    RegressorKind, Standardizer, MODEL_FORMAT_VERSION,
};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig<T> {
    pub lambda: T,
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for LassoConfig<T> {
    fn default() -> Self {
        LassoConfig {
            lambda: real(0.1),
            tol: real(1e-6),
            max_iter: 10_000,
        }
    }
}

#[inline]
fn soft_threshold<T: Real>(x: T, lambda: T) -> T {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        T::zero()
    }
}

pub fn fit_lasso<T: Real>(
    data: &DesignMatrix<T>,
    cfg: &LassoConfig<T>,
    seed: u64,
) -> Result<FittedRegressor<T>, RegressError> {
    if data.n() < data.k() {
        return Err(RegressError::TooFewRows {
            rows: data.n(),
            cols: data.k(),
        });
    }
    let std = Standardizer::fit(data)?;
    let z = std.standardize(data.features())?;
    let t = std.standardize_target(data.target());
    let (n, k) = (data.n(), data.k());
    let nf: T = real(n as f64);

    let mut w = vec![T::zero(); k];
    let mut residual = t.clone();
    let mut iterations = 0usize;
    let mut max_delta = T::infinity();
    while iterations < cfg.max_iter {
        iterations += 1;
        max_delta = T::zero();
        for j in 0..k {
            // rho = z_jᵀ(residual + z_j w_j)/n; z_jᵀz_j/n = 1 by standardization
            let mut dot = T::zero();
            for i in 0..n {
                dot += z[i * k + j] * residual[i];
            }
            let rho = dot / nf + w[j];
            let w_new = soft_threshold(rho, cfg.lambda);
            if w_new != w[j] {
                let delta = w[j] - w_new;
                for i in 0..n {
                    residual[i] += z[i * k + j] * delta;
                }
                max_delta = max_delta.max(delta.abs());
                w[j] = w_new;
            }
        }
        if max_delta < cfg.tol {
            return Ok(FittedRegressor {
                format_version: MODEL_FORMAT_VERSION,
                kind: RegressorKind::Lasso,
                feature_names: data.features().names().to_vec(),
                standardizer: std,
                seed,
                params: ModelParams::Linear(LinearParams {
                    method: LinearMethod::Lasso,
                    lambda: cfg.lambda,
                    weights: w,
                    iterations: Some(iterations),
                }),
            });
        }
    }
    Err(RegressError::NotConverged {
        iterations,
        residual: max_delta.to_f64().unwrap_or(f64::NAN),
    })
}

/// λ at and above which the lasso solution is identically zero.
pub fn lasso_lambda_max<T: Real>(data: &DesignMatrix<T>) -> Result<T, RegressError> {
    let std = Standardizer::fit(data)?;
    let z = std.standardize(data.features())?;
    let t = std.standardize_target(data.target());
    let (n, k) = (data.n(), data.k());
    let nf: T = real(n as f64);
    let mut best = T::zero();
    for j in 0..k {
        let mut dot = T::zero();
        for i in 0..n {
            dot += z[i * k + j] * t[i];
        }
        best = best.max((dot / nf).abs());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::test_util::toy_problem;
    use crate::regress::{fit_ridge, RidgeConfig};

    #[test]
    fn lambda_above_critical_kills_all_slopes() {
        let d = toy_problem(30, 3, 0.05, 41);
        let lmax = lasso_lambda_max(&d).unwrap();
        let cfg = LassoConfig {
            lambda: lmax * 1.0001,
            ..LassoConfig::default()
        };
        let model = fit_lasso(&d, &cfg, 0).unwrap();
        let ModelParams::Linear(p) = &model.params else {
            unreachable!()
        };
        assert!(p.weights.iter().all(|w| *w == 0.0));
        // and just below, at least one wakes up
        let cfg = LassoConfig {
            lambda: lmax * 0.99,
            ..LassoConfig::default()
        };
        let model = fit_lasso(&d, &cfg, 0).unwrap();
        let ModelParams::Linear(p) = &model.params else {
            unreachable!()
        };
        assert!(p.weights.iter().any(|w| *w != 0.0));
    }

    #[test]
    fn unpenalized_limit_matches_ridge() {
        let d = toy_problem(40, 3, 0.1, 17);
        let lasso = fit_lasso(
            &d,
            &LassoConfig {
                lambda: 0.0,
                tol: 1e-10,
                max_iter: 100_000,
            },
            0,
        )
        .unwrap();
        let ridge = fit_ridge(&d, &RidgeConfig { lambda: 0.0 }, 0).unwrap();
        let (ls, li) = lasso.linear_coefficients().unwrap();
        let (rs, ri) = ridge.linear_coefficients().unwrap();
        for (a, b) in ls.iter().zip(&rs) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!((li - ri).abs() < 1e-6);
    }

    #[test]
    fn objective_matches_grid_search_oracle() {
        // brute-force grid over the two standardized coefficients; the
        // objective is convex, so a coarse pass plus a 1e-4 refinement
        // around the coarse optimum brackets the true minimum
        let d = toy_problem(25, 2, 0.2, 7);
        let lambda = 0.15;
        let std = Standardizer::fit(&d).unwrap();
        let z = std.standardize(d.features()).unwrap();
        let t = std.standardize_target(d.target());
        let n = d.n();
        let objective = |w0: f64, w1: f64| -> f64 {
            let mut rss = 0.0;
            for i in 0..n {
                let r = t[i] - z[i * 2] * w0 - z[i * 2 + 1] * w1;
                rss += r * r;
            }
            rss / (2.0 * n as f64) + lambda * (w0.abs() + w1.abs())
        };

        let mut best = (0.0, 0.0, f64::INFINITY);
        let scan = |c0: f64, c1: f64, half: f64, step: f64, best: &mut (f64, f64, f64)| {
            let m = (half / step).round() as i64;
            for i in -m..=m {
                for j in -m..=m {
                    let w0 = c0 + i as f64 * step;
                    let w1 = c1 + j as f64 * step;
                    let v = objective(w0, w1);
                    if v < best.2 {
                        *best = (w0, w1, v);
                    }
                }
            }
        };
        scan(0.0, 0.0, 1.5, 0.01, &mut best);
        let coarse = best;
        scan(coarse.0, coarse.1, 0.02, 1e-4, &mut best);

        let model = fit_lasso(
            &d,
            &LassoConfig {
                lambda,
                tol: 1e-10,
                max_iter: 100_000,
            },
            0,
        )
        .unwrap();
        let ModelParams::Linear(p) = &model.params else {
            unreachable!()
        };
        let fitted_obj = objective(p.weights[0], p.weights[1]);
        assert!(
            (fitted_obj - best.2).abs() < 1e-6,
            "fitted {fitted_obj}, grid {}",
            best.2
        );
    }

    #[test]
    fn solutions_satisfy_subgradient_conditions() {
        let d = toy_problem(60, 4, 0.3, 23);
        let lambda = 0.08;
        let cfg = LassoConfig {
            lambda,
            tol: 1e-9,
            max_iter: 100_000,
        };
        let model = fit_lasso(&d, &cfg, 0).unwrap();
        let ModelParams::Linear(p) = &model.params else {
            unreachable!()
        };
        let std = &model.standardizer;
        let z = std.standardize(d.features()).unwrap();
        let t = std.standardize_target(d.target());
        let (n, k) = (d.n(), d.k());
        for j in 0..k {
            let mut grad = 0.0;
            for i in 0..n {
                let mut pred = 0.0;
                for l in 0..k {
                    pred += z[i * k + l] * p.weights[l];
                }
                grad += z[i * k + j] * (t[i] - pred);
            }
            grad /= n as f64;
            if p.weights[j] != 0.0 {
                assert!(
                    (grad - lambda * p.weights[j].signum()).abs() < 1e-6,
                    "active coordinate {j} violates stationarity: {grad}"
                );
            } else {
                assert!(grad.abs() <= lambda + 1e-6, "inactive coordinate {j}: {grad}");
            }
        }
    }

    #[test]
    fn reports_non_convergence() {
        let d = toy_problem(30, 3, 0.2, 5);
        let cfg = LassoConfig {
            lambda: 0.0,
            tol: 0.0, // unreachable tolerance
            max_iter: 3,
        };
        match fit_lasso(&d, &cfg, 0) {
            Err(RegressError::NotConverged { iterations, .. }) => assert_eq!(iterations, 3),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
