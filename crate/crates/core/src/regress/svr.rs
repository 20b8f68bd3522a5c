//! ε-insensitive support-vector regression with an RBF kernel.
//!
//! The dual is solved by sequential minimal optimization over the doubled
//! variable set u = (α, α*) with the maximal-violating-pair working-set rule
//! (Platt, 1998; Fan et al., 2005). Targets and features are standardized,
//! so the default ε-tube width and C are scale-free.

use serde::{Deserialize, Serialize};

use super::{
    DesignMatrix, FittedRegressor, ModelParams, RegressError, RegressorKind, Standardizer,
    MODEL_FORMAT_VERSION,
};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig<T> {
    pub c: T,
    pub epsilon: T,
    /// RBF width; `None` means 1/k.
    pub gamma: Option<T>,
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for SvrConfig<T> {
    fn default() -> Self {
        SvrConfig {
            c: real(10.0),
            epsilon: real(0.1),
            gamma: None,
            tol: real(1e-4),
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrParams<T> {
    pub c: T,
    pub epsilon: T,
    pub gamma: T,
    /// Standardized support-vector rows, row-major m×k.
    pub support_z: Vec<T>,
    /// Dual coefficients β = α − α* of the support vectors.
    pub beta: Vec<T>,
    pub bias: T,
    pub support_count: usize,
    pub iterations: usize,
    /// Final value of the minimized dual objective.
    pub dual_objective: T,
}

#[inline]
fn rbf_kernel<T: Real>(a: &[T], b: &[T], gamma: T) -> T {
    let mut d2 = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

#[inline]
fn sign_of(s: usize, n: usize) -> f64 {
    if s < n {
        1.0
    } else {
        -1.0
    }
}

pub fn fit_svr<T: Real>(
    data: &DesignMatrix<T>,
    cfg: &SvrConfig<T>,
    seed: u64,
) -> Result<FittedRegressor<T>, RegressError> {
    let std = Standardizer::fit(data)?;
    let z = std.standardize(data.features())?;
    let y = std.standardize_target(data.target());
    let (n, k) = (data.n(), data.k());
    let gamma = cfg.gamma.unwrap_or_else(|| T::one() / real(k as f64));
    let c = cfg.c;
    let eps = cfg.epsilon;

    // dense kernel matrix over the underlying samples
    let mut kernel = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = rbf_kernel(&z[i * k..(i + 1) * k], &z[j * k..(j + 1) * k], gamma);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }

    // doubled variables: s < n are α (t = +1), s ≥ n are α* (t = −1);
    // G_s = t_s (Kβ)_{s mod n} + ε − t_s y_{s mod n}, starting from u = 0
    let m2 = 2 * n;
    let mut u = vec![T::zero(); m2];
    let mut grad = vec![T::zero(); m2];
    for s in 0..m2 {
        let t: T = real(sign_of(s, n));
        grad[s] = eps - t * y[s % n];
    }

    let in_up = |s: usize, u: &[T]| {
        if s < n {
            u[s] < c
        } else {
            u[s] > T::zero()
        }
    };
    let in_low = |s: usize, u: &[T]| {
        if s < n {
            u[s] > T::zero()
        } else {
            u[s] < c
        }
    };

    let mut iterations = 0usize;
    let mut converged = false;
    let snap = c * real(1e-12);
    while iterations < cfg.max_iter {
        iterations += 1;
        // maximal violating pair
        let mut best_up: Option<(usize, T)> = None;
        let mut best_low: Option<(usize, T)> = None;
        for s in 0..m2 {
            let t: T = real(sign_of(s, n));
            let score = -t * grad[s];
            if in_up(s, &u) && best_up.is_none_or(|(_, v)| score > v) {
                best_up = Some((s, score));
            }
            if in_low(s, &u) && best_low.is_none_or(|(_, v)| score < v) {
                best_low = Some((s, score));
            }
        }
        let (Some((i, m_val)), Some((j, mm_val))) = (best_up, best_low) else {
            converged = true;
            break;
        };
        if m_val - mm_val <= cfg.tol {
            converged = true;
            break;
        }

        let (pi, pj) = (i % n, j % n);
        let ti: T = real(sign_of(i, n));
        let tj: T = real(sign_of(j, n));
        let mut eta = kernel[pi * n + pi] + kernel[pj * n + pj]
            - real::<T>(2.0) * kernel[pi * n + pj];
        if eta < real(1e-12) {
            eta = real(1e-12);
        }
        // unconstrained optimum along the feasible pair direction
        let mut lambda = (m_val - mm_val) / eta;
        let cap_i = if i < n { c - u[i] } else { u[i] };
        let cap_j = if j < n { u[j] } else { c - u[j] };
        lambda = lambda.min(cap_i).min(cap_j);

        // move along the feasible direction (Δu_i, Δu_j) = (t_i λ, −t_j λ)
        u[i] += ti * lambda;
        u[j] -= tj * lambda;
        // snap to the box to keep bound membership exact
        for s in [i, j] {
            if u[s] < snap {
                u[s] = T::zero();
            } else if u[s] > c - snap {
                u[s] = c;
            }
        }
        for s in 0..m2 {
            let t: T = real(sign_of(s, n));
            grad[s] += t * lambda * (kernel[(s % n) * n + pi] - kernel[(s % n) * n + pj]);
        }
    }

    if !converged {
        // recompute the final violation for the report
        let mut m_val = T::neg_infinity();
        let mut mm_val = T::infinity();
        for s in 0..m2 {
            let t: T = real(sign_of(s, n));
            let score = -t * grad[s];
            if in_up(s, &u) {
                m_val = m_val.max(score);
            }
            if in_low(s, &u) {
                mm_val = mm_val.min(score);
            }
        }
        return Err(RegressError::NotConverged {
            iterations,
            residual: (m_val - mm_val).to_f64().unwrap_or(f64::NAN),
        });
    }

    // bias from the free variables; fall back to the violation midpoint
    let mut free_sum = T::zero();
    let mut free_count = 0usize;
    let mut m_val = T::neg_infinity();
    let mut mm_val = T::infinity();
    for s in 0..m2 {
        let t: T = real(sign_of(s, n));
        let score = -t * grad[s];
        if u[s] > T::zero() && u[s] < c {
            free_sum += score;
            free_count += 1;
        }
        if in_up(s, &u) {
            m_val = m_val.max(score);
        }
        if in_low(s, &u) {
            mm_val = mm_val.min(score);
        }
    }
    let bias = if free_count > 0 {
        free_sum / real(free_count as f64)
    } else {
        (m_val + mm_val) / real(2.0)
    };

    let beta_full: Vec<T> = (0..n).map(|i| u[i] - u[n + i]).collect();
    let mut dual = T::zero();
    for i in 0..n {
        for j in 0..n {
            dual += beta_full[i] * beta_full[j] * kernel[i * n + j];
        }
    }
    dual /= real(2.0);
    dual += eps * u.iter().copied().sum::<T>();
    for i in 0..n {
        dual -= y[i] * beta_full[i];
    }

    let mut support_z = Vec::new();
    let mut beta = Vec::new();
    for i in 0..n {
        if beta_full[i] != T::zero() {
            support_z.extend_from_slice(&z[i * k..(i + 1) * k]);
            beta.push(beta_full[i]);
        }
    }

    Ok(FittedRegressor {
        format_version: MODEL_FORMAT_VERSION,
        kind: RegressorKind::Svr,
        feature_names: data.features().names().to_vec(),
        standardizer: std,
        seed,
        params: ModelParams::Svr(SvrParams {
            c,
            epsilon: eps,
            gamma,
            support_z,
            support_count: beta.len(),
            beta,
            bias,
            iterations,
            dual_objective: dual,
        }),
    })
}

pub(super) fn predict_std<T: Real>(p: &SvrParams<T>, z: &[T], n_rows: usize, k: usize) -> Vec<T> {
    let m = p.beta.len();
    (0..n_rows)
        .map(|r| {
            let row = &z[r * k..(r + 1) * k];
            let mut f = p.bias;
            for i in 0..m {
                f += p.beta[i] * rbf_kernel(&p.support_z[i * k..(i + 1) * k], row, p.gamma);
            }
            f
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::test_util::toy_problem;
    use crate::regress::FeatureMatrix;

    #[test]
    fn wide_tube_absorbs_everything() {
        // standardized targets live within ±2; ε = 5 swallows them all
        let d = toy_problem(20, 2, 0.1, 3);
        let cfg = SvrConfig {
            epsilon: 5.0,
            ..SvrConfig::default()
        };
        let model = fit_svr(&d, &cfg, 0).unwrap();
        let ModelParams::Svr(p) = &model.params else {
            unreachable!()
        };
        assert_eq!(p.support_count, 0);
        let pred = model.predict(d.features()).unwrap();
        let expect = model.standardizer.destandardize_mean(p.bias);
        for v in pred.mean {
            assert_eq!(v, expect);
        }
    }

    #[test]
    fn duplicate_rows_predict_identically() {
        let base = toy_problem(12, 2, 0.05, 9);
        let mut rows: Vec<Vec<f64>> = (0..base.n()).map(|i| base.features().row(i).to_vec()).collect();
        let mut target = base.target().to_vec();
        rows.extend(rows.clone());
        target.extend(target.clone());
        let d = DesignMatrix::new(
            FeatureMatrix::new(base.features().names().to_vec(), &rows).unwrap(),
            target,
        )
        .unwrap();
        let model = fit_svr(&d, &SvrConfig::default(), 0).unwrap();
        let pred = model.predict(d.features()).unwrap();
        let half = pred.mean.len() / 2;
        for i in 0..half {
            assert_eq!(pred.mean[i].to_bits(), pred.mean[half + i].to_bits());
        }
    }

    #[test]
    fn learns_a_smooth_function() {
        let d = toy_problem(60, 2, 0.0, 21);
        let model = fit_svr(&d, &SvrConfig::default(), 0).unwrap();
        let pred = model.predict(d.features()).unwrap();
        let nse = crate::metrics::nse(d.target(), &pred.mean).unwrap();
        assert!(nse > 0.9, "training fit NSE {nse}");
    }

    #[test]
    fn not_converged_is_reported() {
        let d = toy_problem(40, 2, 0.2, 2);
        let cfg = SvrConfig {
            tol: 0.0,
            max_iter: 5,
            ..SvrConfig::default()
        };
        assert!(matches!(
            fit_svr(&d, &cfg, 0).unwrap_err(),
            RegressError::NotConverged { iterations: 5, .. }
        ));
    }

    // ---- projected-gradient reference solver for the same dual ----

    /// Project v onto { 0 ≤ u ≤ C, Σ t_s u_s = 0 } by bisecting the shift θ.
    fn project(v: &[f64], c: f64, n: usize) -> Vec<f64> {
        let g = |theta: f64| -> f64 {
            v.iter()
                .enumerate()
                .map(|(s, &x)| {
                    let t = sign_of(s, n);
                    t * (x - theta * t).clamp(0.0, c)
                })
                .sum()
        };
        let mut lo = -1e3;
        let mut hi = 1e3;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        v.iter()
            .enumerate()
            .map(|(s, &x)| {
                let t = sign_of(s, n);
                (x - theta * t).clamp(0.0, c)
            })
            .collect()
    }

    #[test]
    fn dual_objective_matches_projected_gradient_oracle() {
        let d = toy_problem(8, 1, 0.3, 5);
        let cfg = SvrConfig {
            tol: 1e-6,
            ..SvrConfig::default()
        };
        let model = fit_svr(&d, &cfg, 0).unwrap();
        let ModelParams::Svr(p) = &model.params else {
            unreachable!()
        };

        // rebuild the (Q, p) data of the doubled dual independently
        let std = &model.standardizer;
        let z = std.standardize(d.features()).unwrap();
        let y = std.standardize_target(d.target());
        let n = d.n();
        let m2 = 2 * n;
        let mut q = vec![0.0f64; m2 * m2];
        for s in 0..m2 {
            for r in 0..m2 {
                let kern = rbf_kernel(&z[(s % n)..=(s % n)], &z[(r % n)..=(r % n)], p.gamma);
                q[s * m2 + r] = sign_of(s, n) * sign_of(r, n) * kern;
            }
        }
        let lin: Vec<f64> = (0..m2)
            .map(|s| p.epsilon - sign_of(s, n) * y[s % n])
            .collect();
        let objective = |u: &[f64]| -> f64 {
            let mut acc = 0.0;
            for s in 0..m2 {
                let mut qu = 0.0;
                for r in 0..m2 {
                    qu += q[s * m2 + r] * u[r];
                }
                acc += 0.5 * u[s] * qu + lin[s] * u[s];
            }
            acc
        };

        // projected gradient to high precision
        let lip: f64 = (0..m2)
            .map(|s| (0..m2).map(|r| q[s * m2 + r].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let step = 1.0 / lip.max(1.0);
        let mut u = vec![0.0f64; m2];
        for _ in 0..200_000 {
            let mut v = u.clone();
            for s in 0..m2 {
                let mut grad = lin[s];
                for r in 0..m2 {
                    grad += q[s * m2 + r] * u[r];
                }
                v[s] -= step * grad;
            }
            let next = project(&v, p.c, n);
            let delta = next
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            u = next;
            if delta < 1e-12 {
                break;
            }
        }

        let gap = (p.dual_objective - objective(&u)).abs();
        assert!(gap < 1e-5, "dual gap {gap}");
    }
}
