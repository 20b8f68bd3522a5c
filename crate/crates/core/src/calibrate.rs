//! Global-best particle-swarm calibration of the abcd parameters against
//! any subset of the observed water-balance variables.
//!
//! The swarm uses the Clerc constriction coefficients (ω = 0.729,
//! c₁ = c₂ = 1.494), reflecting bound handling, and pre-assigned RNG
//! streams per particle per iteration, so results do not depend on the
//! order in which particle objectives are evaluated.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abcd::{simulate, AbcdInit, AbcdParams, StepRecord};
use crate::metrics::nse;
use crate::scalar::{real, Real};
use crate::seed::SeedStream;
use crate::timeseries::{Column, MonthlyForcing};

/// Objective value assigned to parameter vectors whose simulation fails.
pub const FAILURE_OBJECTIVE: f64 = 1e12;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("forcing lacks observations for calibration target `{0}`")]
    MissingObservation(&'static str),
    #[error("calibration case has no targets")]
    EmptyCase,
    #[error("calibration weight for `{0}` must be positive")]
    NonPositiveWeight(&'static str),
    #[error("cannot parse calibration case `{0}`")]
    BadCase(String),
    #[error("pso bounds invalid: {0}")]
    BadBounds(String),
}

/// A variable the model can be calibrated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetVariable {
    Q,
    Et,
    Sm,
    Gw,
}

impl TargetVariable {
    pub fn name(self) -> &'static str {
        match self {
            TargetVariable::Q => "q",
            TargetVariable::Et => "et",
            TargetVariable::Sm => "sm",
            TargetVariable::Gw => "gw",
        }
    }

    pub fn column(self) -> Column {
        match self {
            TargetVariable::Q => Column::Q,
            TargetVariable::Et => Column::Et,
            TargetVariable::Sm => Column::Sm,
            TargetVariable::Gw => Column::Gw,
        }
    }

    fn pick<T: Real>(self) -> fn(&StepRecord<T>) -> T {
        match self {
            TargetVariable::Q => |r| r.q,
            TargetVariable::Et => |r| r.et,
            TargetVariable::Sm => |r| r.sm,
            TargetVariable::Gw => |r| r.gw,
        }
    }
}

impl fmt::Display for TargetVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which variables to calibrate against and with what weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCase<T> {
    targets: Vec<(TargetVariable, T)>,
}

impl<T: Real> CalibrationCase<T> {
    pub fn new(targets: Vec<(TargetVariable, T)>) -> Result<Self, CalibrateError> {
        if targets.is_empty() {
            return Err(CalibrateError::EmptyCase);
        }
        for (v, w) in &targets {
            if !(*w > T::zero()) {
                return Err(CalibrateError::NonPositiveWeight(v.name()));
            }
        }
        Ok(CalibrationCase { targets })
    }

    /// Equal unit weights over the given variables.
    pub fn uniform(vars: &[TargetVariable]) -> Result<Self, CalibrateError> {
        Self::new(vars.iter().map(|&v| (v, T::one())).collect())
    }

    pub fn q() -> Self {
        Self::uniform(&[TargetVariable::Q]).unwrap()
    }

    pub fn targets(&self) -> &[(TargetVariable, T)] {
        &self.targets
    }

    pub fn check_observations(&self, forcing: &MonthlyForcing<T>) -> Result<(), CalibrateError> {
        for (v, _) in &self.targets {
            if !forcing.has(v.column()) {
                return Err(CalibrateError::MissingObservation(v.name()));
            }
        }
        Ok(())
    }
}

impl<T: Real> FromStr for CalibrationCase<T> {
    type Err = CalibrateError;

    /// Parses `q`, `q+et`, `q+et+sm+gw`, ...
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut vars = Vec::new();
        for part in s.split('+') {
            let v = match part.trim().to_ascii_lowercase().as_str() {
                "q" => TargetVariable::Q,
                "et" => TargetVariable::Et,
                "sm" => TargetVariable::Sm,
                "gw" => TargetVariable::Gw,
                _ => return Err(CalibrateError::BadCase(s.to_string())),
            };
            vars.push(v);
        }
        Self::uniform(&vars)
    }
}

/// Search box per parameter; the initial-storage bounds matter only when
/// `calibrate_init` is on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds<T> {
    pub a: (T, T),
    pub b: (T, T),
    pub c: (T, T),
    pub d: (T, T),
    pub sm0: (T, T),
    pub gw0: (T, T),
}

impl<T: Real> Default for ParamBounds<T> {
    fn default() -> Self {
        ParamBounds {
            a: (real(1e-6), real(1.0)),
            b: (real(1e-3), real(1000.0)),
            c: (real(0.0), real(1.0)),
            d: (real(0.0), real(1.0)),
            // soil store capped like b, groundwater store at 500 mm
            sm0: (real(0.0), real(1000.0)),
            gw0: (real(0.0), real(500.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig<T> {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: T,
    pub cognitive: T,
    pub social: T,
    pub seed: u64,
    pub bounds: ParamBounds<T>,
    pub calibrate_init: bool,
}

impl<T: Real> Default for PsoConfig<T> {
    fn default() -> Self {
        PsoConfig {
            swarm_size: 40,
            iterations: 200,
            inertia: real(0.729),
            cognitive: real(1.494),
            social: real(1.494),
            seed: 0,
            bounds: ParamBounds::default(),
            calibrate_init: false,
        }
    }
}

/// Weighted Σ (1 − NSE) over the scored (post-warm-up) months, one term per
/// calibration target; simulation failure maps to [`FAILURE_OBJECTIVE`].
pub fn objective<T: Real>(
    params: &AbcdParams<T>,
    init: &AbcdInit<T>,
    forcing: &MonthlyForcing<T>,
    warmup_len: usize,
    case: &CalibrationCase<T>,
) -> Result<T, CalibrateError> {
    case.check_observations(forcing)?;
    let large: T = real(FAILURE_OBJECTIVE);
    let Ok(trace) = simulate(params, init, forcing, warmup_len) else {
        return Ok(large);
    };
    let mut acc = T::zero();
    for (var, weight) in case.targets() {
        let sim = trace.scored_column(var.pick());
        let obs = &forcing.column(var.column()).expect("checked above")[warmup_len..];
        match nse(obs, &sim) {
            Ok(v) => acc += *weight * (T::one() - v),
            Err(_) => return Ok(large),
        }
    }
    Ok(acc)
}

/// Result of a swarm run over an arbitrary objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult<T> {
    pub best_position: Vec<T>,
    pub best_value: T,
    /// Global-best objective after each iteration; nonincreasing.
    pub convergence: Vec<T>,
}

fn reflect<T: Real>(mut x: T, lo: T, hi: T, v: &mut T) -> T {
    let two: T = real(2.0);
    let mut guard = 0;
    while x < lo || x > hi {
        if x < lo {
            x = two * lo - x;
        } else {
            x = two * hi - x;
        }
        *v = -*v;
        guard += 1;
        if guard > 100 {
            return x.min(hi).max(lo);
        }
    }
    x
}

/// Global-best PSO over a box. Deterministic under `seed`: each particle's
/// random accelerations are drawn from its own labelled stream before any
/// objective is evaluated, and particle evaluations may run in parallel.
#[allow(clippy::too_many_arguments)]
pub fn minimize<T, F>(
    f: F,
    bounds: &[(T, T)],
    swarm_size: usize,
    iterations: usize,
    inertia: T,
    cognitive: T,
    social: T,
    seed: u64,
) -> Result<PsoResult<T>, CalibrateError>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    let dims = bounds.len();
    if dims == 0 || swarm_size == 0 {
        return Err(CalibrateError::BadBounds("empty search space".into()));
    }
    for (i, (lo, hi)) in bounds.iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(CalibrateError::BadBounds(format!("dimension {i}")));
        }
    }
    let seeds = SeedStream::new(seed);

    let mut positions: Vec<Vec<T>> = (0..swarm_size)
        .map(|p| {
            let mut rng = seeds.rng(&format!("pso/init/p{p}"));
            bounds
                .iter()
                .map(|(lo, hi)| {
                    *lo + (*hi - *lo) * real(rng.gen::<f64>())
                })
                .collect()
        })
        .collect();
    let mut velocities: Vec<Vec<T>> = vec![vec![T::zero(); dims]; swarm_size];

    let mut values: Vec<T> = positions.par_iter().map(|x| f(x)).collect();
    let mut pbest = positions.clone();
    let mut pbest_val = values.clone();
    let mut gbest_idx = 0usize;
    for i in 1..swarm_size {
        if pbest_val[i] < pbest_val[gbest_idx] {
            gbest_idx = i;
        }
    }
    let mut gbest = pbest[gbest_idx].clone();
    let mut gbest_val = pbest_val[gbest_idx];

    let mut convergence = Vec::with_capacity(iterations);
    for it in 0..iterations {
        for p in 0..swarm_size {
            let mut rng = seeds.rng(&format!("pso/it{it}/p{p}"));
            for d in 0..dims {
                let r1: T = real(rng.gen::<f64>());
                let r2: T = real(rng.gen::<f64>());
                let v = inertia * velocities[p][d]
                    + cognitive * r1 * (pbest[p][d] - positions[p][d])
                    + social * r2 * (gbest[d] - positions[p][d]);
                velocities[p][d] = v;
                let mut vd = velocities[p][d];
                positions[p][d] =
                    reflect(positions[p][d] + v, bounds[d].0, bounds[d].1, &mut vd);
                velocities[p][d] = vd;
            }
        }
        values = positions.par_iter().map(|x| f(x)).collect();
        for p in 0..swarm_size {
            if values[p] < pbest_val[p] {
                pbest_val[p] = values[p];
                pbest[p].clone_from(&positions[p]);
            }
        }
        for p in 0..swarm_size {
            if pbest_val[p] < gbest_val {
                gbest_val = pbest_val[p];
                gbest.clone_from(&pbest[p]);
            }
        }
        convergence.push(gbest_val);
    }

    Ok(PsoResult {
        best_position: gbest,
        best_value: gbest_val,
        convergence,
    })
}

/// A calibrated parameter set with its search diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult<T> {
    pub params: AbcdParams<T>,
    pub init: AbcdInit<T>,
    pub best_objective: T,
    pub convergence: Vec<T>,
}

fn decode<T: Real>(x: &[T], calibrate_init: bool) -> Option<(AbcdParams<T>, AbcdInit<T>)> {
    let params = AbcdParams::new(x[0], x[1], x[2], x[3]).ok()?;
    let init = if calibrate_init {
        AbcdInit::new(x[4], x[5]).ok()?
    } else {
        AbcdInit::default()
    };
    Some((params, init))
}

/// Calibrate against `forcing` (warm-up months included at the front and
/// excluded from scoring).
pub fn pso_calibrate<T: Real>(
    forcing: &MonthlyForcing<T>,
    warmup_len: usize,
    case: &CalibrationCase<T>,
    config: &PsoConfig<T>,
) -> Result<CalibrationResult<T>, CalibrateError> {
    case.check_observations(forcing)?;
    let b = &config.bounds;
    let mut box_bounds = vec![b.a, b.b, b.c, b.d];
    if config.calibrate_init {
        box_bounds.push(b.sm0);
        box_bounds.push(b.gw0);
    }
    let calibrate_init = config.calibrate_init;
    let objective_fn = |x: &[T]| -> T {
        match decode(x, calibrate_init) {
            Some((params, init)) => objective(&params, &init, forcing, warmup_len, case)
                .unwrap_or_else(|_| real(FAILURE_OBJECTIVE)),
            None => real(FAILURE_OBJECTIVE),
        }
    };
    let result = minimize(
        objective_fn,
        &box_bounds,
        config.swarm_size,
        config.iterations,
        config.inertia,
        config.cognitive,
        config.social,
        config.seed,
    )?;
    let (params, init) =
        decode(&result.best_position, calibrate_init).expect("best position is inside bounds");
    Ok(CalibrationResult {
        params,
        init,
        best_objective: result.best_value,
        convergence: result.convergence,
    })
}
