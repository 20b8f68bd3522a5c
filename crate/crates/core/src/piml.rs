//! Two-layer physics-informed composition: a first regressor estimates
//! actual evapotranspiration from the water-balance covariates
//! (P_t, SM_{t−1}, PET_t), and a second regressor estimates streamflow from
//! (P_t, ÊT_t, SM_t, SM_{t−1}, GW_t, GW_{t−1}) — the covariate wiring of the
//! abcd model with its empirical equations replaced by learned maps.
//!
//! Lagged storages make the first usable month the second month of a span;
//! prepending context months (e.g. the warm-up) recovers the full span.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regress::{
    DesignMatrix, FeatureMatrix, FittedRegressor, Prediction, RegressError, RegressorKind,
    RegressorSpec,
};
use crate::scalar::Real;
use crate::seed::SeedStream;
use crate::timeseries::{Column, MonthStamp, MonthlyForcing};

pub const PIML_FORMAT_VERSION: u32 = 1;

/// Feature order of the evapotranspiration layer.
pub const ET_FEATURES: [&str; 3] = ["p_mm", "sm_prev_mm", "pet_mm"];
/// Feature order of the streamflow layer.
pub const Q_FEATURES: [&str; 6] = ["p_mm", "et_mm", "sm_mm", "sm_prev_mm", "gw_mm", "gw_prev_mm"];

#[derive(Debug, Error)]
pub enum PimlError {
    #[error("forcing lacks required column `{0}`")]
    MissingObservation(&'static str),
    #[error("alignment: expected {expected} values, got {got}")]
    Alignment { expected: usize, got: usize },
    #[error("need at least two months for lagged covariates, got {0}")]
    TooShort(usize),
    #[error("observed ET+Q benchmark must be positive, got {0}")]
    ZeroBenchmark(f64),
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error("model file io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file json: {0}")]
    Json(#[from] serde_json::Error),
}

fn require<'a, T: Real>(
    forcing: &'a MonthlyForcing<T>,
    column: Column,
    name: &'static str,
) -> Result<&'a [T], PimlError> {
    forcing.column(column).ok_or(PimlError::MissingObservation(name))
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Covariate rows for the ET layer: months 1..n of the span, with SM lagged
/// by one month. Returns the matrix and the stamp of every row.
pub fn et_feature_rows<T: Real>(
    forcing: &MonthlyForcing<T>,
) -> Result<(FeatureMatrix<T>, Vec<MonthStamp>), PimlError> {
    if forcing.len() < 2 {
        return Err(PimlError::TooShort(forcing.len()));
    }
    let p = forcing.p();
    let pet = require(forcing, Column::Pet, "pet")?;
    let sm = require(forcing, Column::Sm, "sm")?;
    let n = forcing.len();
    let rows: Vec<Vec<T>> = (1..n).map(|i| vec![p[i], sm[i - 1], pet[i]]).collect();
    let stamps = (1..n).map(|i| forcing.stamp(i)).collect();
    Ok((FeatureMatrix::new(names(&ET_FEATURES), &rows)?, stamps))
}

/// ET-layer design matrix: covariates plus the observed-ET target.
pub fn build_features_et<T: Real>(
    forcing: &MonthlyForcing<T>,
) -> Result<(DesignMatrix<T>, Vec<MonthStamp>), PimlError> {
    let (features, stamps) = et_feature_rows(forcing)?;
    let et = require(forcing, Column::Et, "et")?;
    Ok((DesignMatrix::new(features, et[1..].to_vec())?, stamps))
}

/// Covariate rows for the Q layer; `et_hat` must hold one value per row
/// (months 1..n), normally the ET layer's predictions.
pub fn q_feature_rows<T: Real>(
    forcing: &MonthlyForcing<T>,
    et_hat: &[T],
) -> Result<(FeatureMatrix<T>, Vec<MonthStamp>), PimlError> {
    if forcing.len() < 2 {
        return Err(PimlError::TooShort(forcing.len()));
    }
    let n = forcing.len();
    if et_hat.len() != n - 1 {
        return Err(PimlError::Alignment {
            expected: n - 1,
            got: et_hat.len(),
        });
    }
    let p = forcing.p();
    let sm = require(forcing, Column::Sm, "sm")?;
    let gw = require(forcing, Column::Gw, "gw")?;
    let rows: Vec<Vec<T>> = (1..n)
        .map(|i| vec![p[i], et_hat[i - 1], sm[i], sm[i - 1], gw[i], gw[i - 1]])
        .collect();
    let stamps = (1..n).map(|i| forcing.stamp(i)).collect();
    Ok((FeatureMatrix::new(names(&Q_FEATURES), &rows)?, stamps))
}

/// Q-layer design matrix: covariates plus the observed-Q target.
pub fn build_features_q<T: Real>(
    forcing: &MonthlyForcing<T>,
    et_hat: &[T],
) -> Result<(DesignMatrix<T>, Vec<MonthStamp>), PimlError> {
    let (features, stamps) = q_feature_rows(forcing, et_hat)?;
    let q = require(forcing, Column::Q, "q")?;
    Ok((DesignMatrix::new(features, q[1..].to_vec())?, stamps))
}

/// What feeds the ET column of the Q layer during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtSource {
    /// The ET layer's in-sample predictions (default): training and
    /// prediction then see the same input distribution.
    Predicted,
    /// The observed ET series, for comparison runs.
    Observed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PimlWiring {
    pub et_features: Vec<String>,
    pub q_features: Vec<String>,
    pub et_kind: RegressorKind,
    pub q_kind: RegressorKind,
    pub layer2_train_et: EtSource,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PimlModel<T> {
    pub format_version: u32,
    pub wiring: PimlWiring,
    pub et_layer: FittedRegressor<T>,
    pub q_layer: FittedRegressor<T>,
}

impl<T: Real> PimlModel<T> {
    pub fn to_json(&self) -> Result<String, PimlError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, PimlError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), PimlError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, PimlError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Train both layers on a forcing span that carries observed ET, SM, GW, Q.
pub fn train_piml<T: Real>(
    train: &MonthlyForcing<T>,
    et_spec: &RegressorSpec<T>,
    q_spec: &RegressorSpec<T>,
    seed: u64,
    layer2_train_et: EtSource,
) -> Result<PimlModel<T>, PimlError> {
    let seeds = SeedStream::new(seed);
    let (et_dm, _) = build_features_et(train)?;
    let et_layer = et_spec.fit(&et_dm, seeds.derive("piml/et"))?;

    let et_column: Vec<T> = match layer2_train_et {
        EtSource::Predicted => et_layer.predict(et_dm.features())?.mean,
        EtSource::Observed => require(train, Column::Et, "et")?[1..].to_vec(),
    };
    let (q_dm, _) = build_features_q(train, &et_column)?;
    let q_layer = q_spec.fit(&q_dm, seeds.derive("piml/q"))?;

    Ok(PimlModel {
        format_version: PIML_FORMAT_VERSION,
        wiring: PimlWiring {
            et_features: names(&ET_FEATURES),
            q_features: names(&Q_FEATURES),
            et_kind: et_spec.kind(),
            q_kind: q_spec.kind(),
            layer2_train_et,
            seed,
        },
        et_layer,
        q_layer,
    })
}

/// Predictions of both layers over a forcing span, aligned to `stamps`.
/// Intervals are available through [`Prediction::interval90`] whenever the
/// corresponding layer is probabilistic (GPR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PimlPrediction<T> {
    pub stamps: Vec<MonthStamp>,
    pub et: Prediction<T>,
    pub q: Prediction<T>,
}

/// Run the composition: layer 1 estimates ET, layer 2 receives it along
/// with the observed exogenous storages and estimates Q.
pub fn predict_piml<T: Real>(
    model: &PimlModel<T>,
    forcing: &MonthlyForcing<T>,
) -> Result<PimlPrediction<T>, PimlError> {
    let (et_features, stamps) = et_feature_rows(forcing)?;
    let et = model.et_layer.predict(&et_features)?;
    let (q_features, _) = q_feature_rows(forcing, &et.mean)?;
    let q = model.q_layer.predict(&q_features)?;
    Ok(PimlPrediction { stamps, et, q })
}

/// Annual water-balance audit against the observed ET+Q benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterBalanceReport<T> {
    pub p_total: T,
    pub et_total: T,
    pub q_total: T,
    pub dsm: T,
    pub dgw: T,
    pub et_plus_q: T,
    pub obs_et_plus_q: T,
    /// Whether the storage change was large enough to enter the deviation.
    pub storage_included: bool,
    pub pct_deviation: T,
}

/// Percent deviation of modeled ET+Q from the observed benchmark. Storage
/// changes are reported but only enter the deviation when |ΔSM|+|ΔGW|
/// reaches `storage_threshold_mm` (negligible-storage convention).
pub fn water_balance<T: Real>(
    p_total: T,
    et_total: T,
    q_total: T,
    obs_et_plus_q: T,
    dsm: T,
    dgw: T,
    storage_threshold_mm: T,
) -> Result<WaterBalanceReport<T>, PimlError> {
    if !(obs_et_plus_q > T::zero()) {
        return Err(PimlError::ZeroBenchmark(
            obs_et_plus_q.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let et_plus_q = et_total + q_total;
    let storage_included = dsm.abs() + dgw.abs() >= storage_threshold_mm;
    let modeled = if storage_included {
        et_plus_q + dsm + dgw
    } else {
        et_plus_q
    };
    let hundred: T = crate::scalar::real(100.0);
    Ok(WaterBalanceReport {
        p_total,
        et_total,
        q_total,
        dsm,
        dgw,
        et_plus_q,
        obs_et_plus_q,
        storage_included,
        pct_deviation: (modeled - obs_et_plus_q) / obs_et_plus_q * hundred,
    })
}
