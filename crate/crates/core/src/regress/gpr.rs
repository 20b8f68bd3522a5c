//! Gaussian-process regression with an RBF kernel and exact Cholesky
//! inference (Rasmussen & Williams, 2006, ch. 2).
//!
//! k(x, x') = σ_f²·exp(−‖x−x'‖²/2ℓ²) + σ_n²·δ, evaluated on standardized
//! features. A 1e-8 diagonal jitter protects the factorization and is
//! escalated tenfold up to 1e-4 before giving up. Hyperparameters can be
//! tuned by maximizing the log marginal likelihood with a seeded
//! multi-start compass search in log space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{cholesky_in_place, cholesky_solve, forward_solve, log_det};
use super::{
    DesignMatrix, FittedRegressor, ModelParams, RegressError, RegressorKind, Standardizer,
    MODEL_FORMAT_VERSION,
};
use crate::scalar::{real, Real};
use crate::seed::SeedStream;

const BASE_JITTER: f64 = 1e-8;
const MAX_JITTER: f64 = 1e-4;
const OPTIMIZE_STARTS: usize = 8;
const OPTIMIZE_EVALS_PER_START: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprConfig<T> {
    pub signal_var: T,
    /// RBF length scale; `None` means √k, which normalizes typical squared
    /// distances in standardized k-feature space (the same role the 1/k
    /// default width plays for the SVR kernel).
    pub length_scale: Option<T>,
    pub noise_var: T,
    pub optimize: bool,
}

impl<T: Real> Default for GprConfig<T> {
    fn default() -> Self {
        GprConfig {
            signal_var: real(1.0),
            length_scale: None,
            noise_var: real(0.05),
            optimize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprParams<T> {
    pub signal_var: T,
    pub length_scale: T,
    pub noise_var: T,
    pub jitter: T,
    pub optimized: bool,
    pub log_marginal: T,
    /// Standardized training features, row-major n×k.
    pub train_z: Vec<T>,
    pub n: usize,
    /// K⁻¹·y in standardized space.
    pub alpha: Vec<T>,
    /// Lower Cholesky factor of the noisy Gram matrix, row-major n×n.
    pub chol: Vec<T>,
}

#[inline]
fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

#[inline]
fn rbf<T: Real>(d2: T, signal_var: T, length_scale: T) -> T {
    signal_var * (-d2 / (real::<T>(2.0) * length_scale * length_scale)).exp()
}

struct Factorized<T> {
    chol: Vec<T>,
    alpha: Vec<T>,
    jitter: T,
    log_marginal: T,
}

fn factorize<T: Real>(
    z: &[T],
    t: &[T],
    n: usize,
    k: usize,
    signal_var: T,
    length_scale: T,
    noise_var: T,
) -> Result<Factorized<T>, RegressError> {
    let mut gram = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let d2 = sq_dist(&z[i * k..(i + 1) * k], &z[j * k..(j + 1) * k]);
            let v = rbf(d2, signal_var, length_scale);
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    let mut jitter = BASE_JITTER;
    loop {
        let mut kmat = gram.clone();
        let bump = noise_var + real(jitter);
        for i in 0..n {
            kmat[i * n + i] += bump;
        }
        if cholesky_in_place(&mut kmat, n).is_ok() {
            let mut alpha = t.to_vec();
            cholesky_solve(&kmat, n, &mut alpha);
            let fit_term = t.iter().zip(&alpha).map(|(&a, &b)| a * b).sum::<T>();
            let lml = -(fit_term + log_det(&kmat, n) + real::<T>(n as f64) * real(LN_2PI))
                / real(2.0);
            return Ok(Factorized {
                chol: kmat,
                alpha,
                jitter: real(jitter),
                log_marginal: lml,
            });
        }
        if jitter >= MAX_JITTER {
            return Err(RegressError::FactorizationFailure(jitter));
        }
        jitter *= 10.0;
    }
}

const LN_2PI: f64 = 1.8378770664093453;

fn lml_of<T: Real>(z: &[T], t: &[T], n: usize, k: usize, log_hypers: [f64; 3]) -> f64 {
    let [lsf, lls, lsn] = log_hypers;
    match factorize::<T>(
        z,
        t,
        n,
        k,
        real(lsf.exp()),
        real(lls.exp()),
        real(lsn.exp()),
    ) {
        Ok(f) => f.log_marginal.to_f64().unwrap_or(f64::NEG_INFINITY),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Compass search in (ln σ_f², ln ℓ, ln σ_n²); accepts only improvements.
fn refine<T: Real>(
    z: &[T],
    t: &[T],
    n: usize,
    k: usize,
    start: [f64; 3],
    budget: usize,
) -> ([f64; 3], f64) {
    const LO: [f64; 3] = [-9.0, -4.0, -18.5]; // ln bounds
    const HI: [f64; 3] = [7.0, 7.0, 4.5];
    let clamp = |mut x: [f64; 3]| {
        for d in 0..3 {
            x[d] = x[d].clamp(LO[d], HI[d]);
        }
        x
    };
    let mut current = clamp(start);
    let mut best = lml_of::<T>(z, t, n, k, current);
    let mut step = 0.7;
    let mut evals = 1usize;
    while step > 1e-2 && evals < budget {
        let mut improved = false;
        'dims: for dim in 0..3 {
            for dir in [1.0, -1.0] {
                let mut cand = current;
                cand[dim] += dir * step;
                let cand = clamp(cand);
                if cand == current {
                    continue;
                }
                let v = lml_of::<T>(z, t, n, k, cand);
                evals += 1;
                if v > best {
                    current = cand;
                    best = v;
                    improved = true;
                    break 'dims;
                }
                if evals >= budget {
                    break 'dims;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (current, best)
}

pub fn fit_gpr<T: Real>(
    data: &DesignMatrix<T>,
    cfg: &GprConfig<T>,
    seed: u64,
) -> Result<FittedRegressor<T>, RegressError> {
    let std = Standardizer::fit(data)?;
    let z = std.standardize(data.features())?;
    let t = std.standardize_target(data.target());
    let (n, k) = (data.n(), data.k());

    let mut signal_var = cfg.signal_var;
    let mut length_scale = cfg
        .length_scale
        .unwrap_or_else(|| real::<T>(k as f64).sqrt());
    let mut noise_var = cfg.noise_var;

    if cfg.optimize {
        let init = [
            signal_var.to_f64().unwrap().ln(),
            length_scale.to_f64().unwrap().ln(),
            noise_var.to_f64().unwrap().ln(),
        ];
        // first start is the supplied point, so the accepted optimum can
        // never fall below the initial likelihood
        let mut best = refine::<T>(&z, &t, n, k, init, OPTIMIZE_EVALS_PER_START);
        let mut rng = SeedStream::new(seed).rng("gpr/optimize");
        for _ in 1..OPTIMIZE_STARTS {
            let start = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.5..2.0),
                rng.gen_range(-7.0..0.0),
            ];
            let cand = refine::<T>(&z, &t, n, k, start, OPTIMIZE_EVALS_PER_START);
            if cand.1 > best.1 {
                best = cand;
            }
        }
        signal_var = real(best.0[0].exp());
        length_scale = real(best.0[1].exp());
        noise_var = real(best.0[2].exp());
    }

    let f = factorize(&z, &t, n, k, signal_var, length_scale, noise_var)?;
    Ok(FittedRegressor {
        format_version: MODEL_FORMAT_VERSION,
        kind: RegressorKind::Gpr,
        feature_names: data.features().names().to_vec(),
        standardizer: std,
        seed,
        params: ModelParams::Gpr(GprParams {
            signal_var,
            length_scale,
            noise_var,
            jitter: f.jitter,
            optimized: cfg.optimize,
            log_marginal: f.log_marginal,
            train_z: z,
            n,
            alpha: f.alpha,
            chol: f.chol,
        }),
    })
}

/// Posterior mean and variance (standardized units) at standardized rows.
pub(super) fn predict_std<T: Real>(
    p: &GprParams<T>,
    z: &[T],
    n_rows: usize,
    k: usize,
) -> (Vec<T>, Vec<T>) {
    let n = p.n;
    let prior = p.signal_var + p.noise_var;
    let mut mean = Vec::with_capacity(n_rows);
    let mut var = Vec::with_capacity(n_rows);
    let mut kstar = vec![T::zero(); n];
    for r in 0..n_rows {
        let row = &z[r * k..(r + 1) * k];
        for i in 0..n {
            let d2 = sq_dist(row, &p.train_z[i * k..(i + 1) * k]);
            kstar[i] = rbf(d2, p.signal_var, p.length_scale);
        }
        let m = kstar.iter().zip(&p.alpha).map(|(&a, &b)| a * b).sum::<T>();
        // var = σ_f² + σ_n² − ‖L⁻¹ k*‖²
        let mut v = kstar.clone();
        forward_solve(&p.chol, n, &mut v);
        let reduction = v.iter().map(|&x| x * x).sum::<T>();
        mean.push(m);
        var.push((prior - reduction).max(T::zero()));
    }
    (mean, var)
}
