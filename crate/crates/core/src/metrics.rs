//! Goodness-of-fit metrics and the Moriasi et al. (2015) performance bands.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("observed series is constant; NSE undefined")]
    ConstantObserved,
    #[error("observed series sums to zero; PBIAS undefined")]
    ZeroObservedSum,
    #[error("interval bounds crossed at index {0}")]
    CrossedBounds(usize),
}

fn check_lengths<T>(obs: &[T], sim: &[T]) -> Result<(), MetricsError> {
    if obs.len() != sim.len() {
        return Err(MetricsError::LengthMismatch(obs.len(), sim.len()));
    }
    Ok(())
}

/// Nash–Sutcliffe efficiency: 1 − Σ(Oᵢ−Sᵢ)² / Σ(Oᵢ−Ō)².
pub fn nse<T: Real>(obs: &[T], sim: &[T]) -> Result<T, MetricsError> {
    check_lengths(obs, sim)?;
    if obs.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            need: 2,
            got: obs.len(),
        });
    }
    let n: T = real(obs.len() as f64);
    let mean = obs.iter().copied().sum::<T>() / n;
    let mut num = T::zero();
    let mut den = T::zero();
    for (&o, &s) in obs.iter().zip(sim) {
        num += (o - s) * (o - s);
        den += (o - mean) * (o - mean);
    }
    if den == T::zero() {
        return Err(MetricsError::ConstantObserved);
    }
    Ok(T::one() - num / den)
}

/// Percent bias: Σ(Oᵢ−Sᵢ)/ΣOᵢ × 100. Positive means underprediction.
pub fn pbias<T: Real>(obs: &[T], sim: &[T]) -> Result<T, MetricsError> {
    check_lengths(obs, sim)?;
    if obs.is_empty() {
        return Err(MetricsError::TooFewSamples { need: 1, got: 0 });
    }
    let total = obs.iter().copied().sum::<T>();
    if total == T::zero() {
        return Err(MetricsError::ZeroObservedSum);
    }
    let diff = obs
        .iter()
        .zip(sim)
        .map(|(&o, &s)| o - s)
        .sum::<T>();
    Ok(diff / total * real(100.0))
}

/// Root mean square error.
pub fn rmse<T: Real>(obs: &[T], sim: &[T]) -> Result<T, MetricsError> {
    check_lengths(obs, sim)?;
    if obs.is_empty() {
        return Err(MetricsError::TooFewSamples { need: 1, got: 0 });
    }
    let n: T = real(obs.len() as f64);
    let ss = obs
        .iter()
        .zip(sim)
        .map(|(&o, &s)| (o - s) * (o - s))
        .sum::<T>();
    Ok((ss / n).sqrt())
}

/// Monthly-simulation performance bands on NSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoriasiClass {
    #[serde(rename = "very good")]
    VeryGood,
    #[serde(rename = "good")]
    Good,
    #[serde(rename = "satisfactory")]
    Satisfactory,
    #[serde(rename = "unsatisfactory")]
    Unsatisfactory,
    #[serde(rename = "unacceptable")]
    Unacceptable,
}

impl fmt::Display for MoriasiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MoriasiClass::VeryGood => "very good",
            MoriasiClass::Good => "good",
            MoriasiClass::Satisfactory => "satisfactory",
            MoriasiClass::Unsatisfactory => "unsatisfactory",
            MoriasiClass::Unacceptable => "unacceptable",
        };
        f.write_str(s)
    }
}

/// NSE > 0.8 very good; (0.7, 0.8] good; (0.5, 0.7] satisfactory;
/// [0, 0.5] unsatisfactory; negative unacceptable.
pub fn moriasi_class<T: Real>(nse: T) -> MoriasiClass {
    if nse > real(0.8) {
        MoriasiClass::VeryGood
    } else if nse > real(0.7) {
        MoriasiClass::Good
    } else if nse > real(0.5) {
        MoriasiClass::Satisfactory
    } else if nse >= T::zero() {
        MoriasiClass::Unsatisfactory
    } else {
        MoriasiClass::Unacceptable
    }
}

/// Fraction of observations inside `[lower, upper]`.
pub fn interval_coverage<T: Real>(
    obs: &[T],
    lower: &[T],
    upper: &[T],
) -> Result<T, MetricsError> {
    check_lengths(obs, lower)?;
    check_lengths(obs, upper)?;
    if obs.is_empty() {
        return Err(MetricsError::TooFewSamples { need: 1, got: 0 });
    }
    let mut hits = 0usize;
    for (i, ((&o, &lo), &hi)) in obs.iter().zip(lower).zip(upper).enumerate() {
        if lo > hi {
            return Err(MetricsError::CrossedBounds(i));
        }
        if lo <= o && o <= hi {
            hits += 1;
        }
    }
    Ok(real(hits as f64 / obs.len() as f64))
}

/// Per-variable evaluation summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary<T> {
    pub nse: T,
    pub pbias: T,
    pub rmse: T,
    pub moriasi_class: MoriasiClass,
    pub n: usize,
}

pub fn summarize<T: Real>(obs: &[T], sim: &[T]) -> Result<MetricSummary<T>, MetricsError> {
    let nse_v = nse(obs, sim)?;
    Ok(MetricSummary {
        nse: nse_v,
        pbias: pbias(obs, sim)?,
        rmse: rmse(obs, sim)?,
        moriasi_class: moriasi_class(nse_v),
        n: obs.len(),
    })
}
