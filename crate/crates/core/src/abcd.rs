//! The abcd monthly water-balance model (Thomas, 1981; Alley, 1984).
//!
//! Two storages (soil moisture, groundwater), four parameters. Each month:
//!
//! ```text
//! W  = SM_prev + P                      available water
//! Y  = (W+b)/2a − √(((W+b)/2a)² − bW/a) evapotranspiration opportunity
//! ET = Y · (1 − e^(−PET/b))             actual evapotranspiration
//! SM = Y − ET                           soil-moisture carryover
//! GR = c·(W − Y)      DR = (1−c)·(W − Y)
//! GW = (GW_prev + GR)/(1 + d)           GD = d·GW
//! Q  = DR + GD
//! ```
//!
//! The closure satisfies both storage balances identically:
//! `SM + ET + DR + GR = SM_prev + P` and `GW + GD = GW_prev + GR`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};
use crate::timeseries::{Column, MonthStamp, MonthlyForcing};

#[derive(Debug, Error)]
pub enum AbcdError {
    #[error("parameter {name}={value} outside {bounds}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        bounds: &'static str,
    },
    #[error("initial storage {name}={value} must be nonnegative")]
    NegativeInitialStorage { name: &'static str, value: f64 },
    #[error("non-finite input to abcd step: {0}")]
    NonFiniteInput(&'static str),
    #[error("forcing is missing the pet_mm column")]
    MissingPet,
    #[error("warm-up length {warmup} exceeds forcing length {len}")]
    WarmupTooLong { warmup: usize, len: usize },
}

/// The four model parameters, validated at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbcdParams<T> {
    a: T,
    b: T,
    c: T,
    d: T,
}

impl<T: Real> AbcdParams<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Result<Self, AbcdError> {
        let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
        let check = |ok: bool, name: &'static str, value: T, bounds: &'static str| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(AbcdError::ParamOutOfRange {
                    name,
                    value: f(value),
                    bounds,
                })
            }
        };
        check(a > T::zero() && a <= T::one(), "a", a, "(0, 1]")?;
        check(b > T::zero(), "b", b, "(0, inf)")?;
        check(c >= T::zero() && c <= T::one(), "c", c, "[0, 1]")?;
        check(d >= T::zero() && d <= T::one(), "d", d, "[0, 1]")?;
        Ok(AbcdParams { a, b, c, d })
    }

    pub fn a(&self) -> T {
        self.a
    }
    pub fn b(&self) -> T {
        self.b
    }
    pub fn c(&self) -> T {
        self.c
    }
    pub fn d(&self) -> T {
        self.d
    }
}

/// Initial storages. The default (SM₀ = 100 mm, GW₀ = 2 mm) is harmless
/// under a warm-up of three years or more.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbcdInit<T> {
    pub sm0: T,
    pub gw0: T,
}

impl<T: Real> AbcdInit<T> {
    pub fn new(sm0: T, gw0: T) -> Result<Self, AbcdError> {
        for (name, v) in [("sm0", sm0), ("gw0", gw0)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(AbcdError::NegativeInitialStorage {
                    name,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(AbcdInit { sm0, gw0 })
    }
}

impl<T: Real> Default for AbcdInit<T> {
    fn default() -> Self {
        AbcdInit {
            sm0: real(100.0),
            gw0: real(2.0),
        }
    }
}

/// All fluxes and states of one simulated month (mm or mm/month).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T> {
    pub w: T,
    pub y: T,
    pub et: T,
    pub sm: T,
    pub dr: T,
    pub gr: T,
    pub gw: T,
    pub gd: T,
    pub q: T,
}

/// Evapotranspiration opportunity Y(W): smooth, increasing, bounded by
/// `min(W, b)`. The radicand is clamped at zero against cancellation when
/// W is tiny.
pub fn y_function<T: Real>(w: T, a: T, b: T) -> T {
    let half = (w + b) / (real::<T>(2.0) * a);
    let radicand = (half * half - b * w / a).max(T::zero());
    half - radicand.sqrt()
}

/// Advance the model one month.
pub fn abcd_step<T: Real>(
    params: &AbcdParams<T>,
    sm_prev: T,
    gw_prev: T,
    p: T,
    pet: T,
) -> Result<StepRecord<T>, AbcdError> {
    for (name, v) in [("sm_prev", sm_prev), ("gw_prev", gw_prev), ("p", p), ("pet", pet)] {
        if !v.is_finite() {
            return Err(AbcdError::NonFiniteInput(name));
        }
    }
    let w = sm_prev + p;
    let y = y_function(w, params.a, params.b);
    let et = y * (T::one() - (-pet / params.b).exp());
    let sm = y - et;
    let excess = w - y;
    let gr = params.c * excess;
    let dr = (T::one() - params.c) * excess;
    let gw = (gw_prev + gr) / (T::one() + params.d);
    let gd = params.d * gw;
    Ok(StepRecord {
        w,
        y,
        et,
        sm,
        dr,
        gr,
        gw,
        gd,
        q: dr + gd,
    })
}

/// A full simulation: per-month records plus warm-up bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcdTrace<T> {
    start: MonthStamp,
    warmup_len: usize,
    records: Vec<StepRecord<T>>,
}

impl<T: Real> AbcdTrace<T> {
    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn warmup_len(&self) -> usize {
        self.warmup_len
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[StepRecord<T>] {
        &self.records
    }

    /// Records after the warm-up window, i.e. the ones metrics may see.
    pub fn scored(&self) -> &[StepRecord<T>] {
        &self.records[self.warmup_len.min(self.records.len())..]
    }

    pub fn scored_start(&self) -> MonthStamp {
        self.start.add_months(self.warmup_len as i64)
    }

    pub fn stamp(&self, index: usize) -> MonthStamp {
        self.start.add_months(index as i64)
    }

    pub fn column(&self, pick: fn(&StepRecord<T>) -> T) -> Vec<T> {
        self.records.iter().map(pick).collect()
    }

    pub fn scored_column(&self, pick: fn(&StepRecord<T>) -> T) -> Vec<T> {
        self.scored().iter().map(pick).collect()
    }
}

/// Run the recursion over a forcing. The first `warmup_len` months are kept
/// in the trace but flagged so downstream scoring can skip them.
pub fn simulate<T: Real>(
    params: &AbcdParams<T>,
    init: &AbcdInit<T>,
    forcing: &MonthlyForcing<T>,
    warmup_len: usize,
) -> Result<AbcdTrace<T>, AbcdError> {
    let pet = forcing.column(Column::Pet).ok_or(AbcdError::MissingPet)?;
    if warmup_len > forcing.len() {
        return Err(AbcdError::WarmupTooLong {
            warmup: warmup_len,
            len: forcing.len(),
        });
    }
    let mut records = Vec::with_capacity(forcing.len());
    let mut sm = init.sm0;
    let mut gw = init.gw0;
    for (&p, &pe) in forcing.p().iter().zip(pet) {
        let rec = abcd_step(params, sm, gw, p, pe)?;
        sm = rec.sm;
        gw = rec.gw;
        records.push(rec);
    }
    Ok(AbcdTrace {
        start: forcing.start(),
        warmup_len,
        records,
    })
}
