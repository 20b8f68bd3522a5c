//! A uniform fit/predict regression kit: ridge, lasso, Gaussian-process,
//! ε-support-vector and LSTM regression, all implemented from first
//! principles and deterministic under a seed.
//!
//! Features and target are standardized internally (population moments);
//! a fitted model carries its standardizer, hyperparameters, and seed, and
//! round-trips through JSON bit-exactly.

mod gpr;
mod lasso;
mod linalg;
mod lstm;
mod ridge;
mod svr;

pub use gpr::{fit_gpr, GprConfig, GprParams};
pub use lasso::{fit_lasso, lasso_lambda_max, LassoConfig};
pub use lstm::{fit_lstm, LstmConfig, LstmNet, LstmParams};
pub use ridge::{fit_ridge, RidgeConfig};
pub use svr::{fit_svr, SvrConfig, SvrParams};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Two-sided 90% normal quantile used for prediction intervals.
pub const Z90: f64 = 1.645;

#[derive(Debug, Error)]
pub enum RegressError {
    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("constant feature column `{0}`")]
    ConstantColumn(String),
    #[error("singular system (rank-deficient features with lambda = 0)")]
    SingularSystem,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("kernel factorization failed even with jitter {0:e}")]
    FactorizationFailure(f64),
    #[error("training loss non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("feature mismatch: model expects {expected:?}, got {got:?}")]
    FeatureMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("{rows} rows are too few for {cols} features")]
    TooFewRows { rows: usize, cols: usize },
    #[error("empty design matrix")]
    Empty,
    #[error("model file io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Named feature rows (n × k, row-major), validated finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix<T> {
    names: Vec<String>,
    data: Vec<T>,
    n: usize,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(names: Vec<String>, rows: &[Vec<T>]) -> Result<Self, RegressError> {
        let k = names.len();
        if k == 0 {
            return Err(RegressError::Empty);
        }
        let mut data = Vec::with_capacity(rows.len() * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(RegressError::Shape(format!(
                    "row {i} has {} values, expected {k}",
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(RegressError::NonFinite {
                        row: i,
                        column: names[j].clone(),
                    });
                }
                data.push(*v);
            }
        }
        Ok(FeatureMatrix {
            names,
            data,
            n: rows.len(),
        })
    }

    pub fn from_columns(names: Vec<String>, columns: &[Vec<T>]) -> Result<Self, RegressError> {
        if columns.len() != names.len() {
            return Err(RegressError::Shape(format!(
                "{} columns for {} names",
                columns.len(),
                names.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(RegressError::Shape("ragged columns".into()));
        }
        let rows: Vec<Vec<T>> = (0..n)
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        FeatureMatrix::new(names, &rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[T] {
        let k = self.k();
        &self.data[i * k..(i + 1) * k]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = T> + '_ {
        let k = self.k();
        self.data.iter().copied().skip(j).step_by(k)
    }
}

/// Features plus regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    features: FeatureMatrix<T>,
    target: Vec<T>,
}

impl<T: Real> DesignMatrix<T> {
    pub fn new(features: FeatureMatrix<T>, target: Vec<T>) -> Result<Self, RegressError> {
        if target.len() != features.n() {
            return Err(RegressError::Shape(format!(
                "target has {} values for {} rows",
                target.len(),
                features.n()
            )));
        }
        if target.is_empty() {
            return Err(RegressError::Empty);
        }
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(RegressError::NonFinite {
                row: i,
                column: "<target>".into(),
            });
        }
        Ok(DesignMatrix { features, target })
    }

    pub fn features(&self) -> &FeatureMatrix<T> {
        &self.features
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }

    pub fn k(&self) -> usize {
        self.features.k()
    }
}

/// Per-feature and target first/second moments (population definition, so
/// standardized columns satisfy Σz² = n exactly).
///
/// A constant feature column is rejected; a constant *target* is allowed and
/// keeps unit scale, so degenerate fits still work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub feature_mean: Vec<T>,
    pub feature_sd: Vec<T>,
    pub target_mean: T,
    pub target_sd: T,
}

impl<T: Real> Standardizer<T> {
    pub fn fit(data: &DesignMatrix<T>) -> Result<Self, RegressError> {
        let n: T = real(data.n() as f64);
        let mut feature_mean = Vec::with_capacity(data.k());
        let mut feature_sd = Vec::with_capacity(data.k());
        for j in 0..data.k() {
            let mean = data.features().column(j).sum::<T>() / n;
            let var = data
                .features()
                .column(j)
                .map(|v| (v - mean) * (v - mean))
                .sum::<T>()
                / n;
            let sd = var.sqrt();
            if sd <= T::zero() {
                return Err(RegressError::ConstantColumn(
                    data.features().names()[j].clone(),
                ));
            }
            feature_mean.push(mean);
            feature_sd.push(sd);
        }
        let target_mean = data.target().iter().copied().sum::<T>() / n;
        let var = data
            .target()
            .iter()
            .map(|&v| (v - target_mean) * (v - target_mean))
            .sum::<T>()
            / n;
        let sd = var.sqrt();
        Ok(Standardizer {
            feature_mean,
            feature_sd,
            target_mean,
            target_sd: if sd > T::zero() { sd } else { T::one() },
        })
    }

    pub fn k(&self) -> usize {
        self.feature_mean.len()
    }

    /// Standardize a feature matrix into a flat row-major n×k buffer.
    pub fn standardize(&self, features: &FeatureMatrix<T>) -> Result<Vec<T>, RegressError> {
        if features.k() != self.k() {
            return Err(RegressError::Shape(format!(
                "{} features, standardizer has {}",
                features.k(),
                self.k()
            )));
        }
        let k = self.k();
        let mut out = Vec::with_capacity(features.n() * k);
        for i in 0..features.n() {
            for (j, &v) in features.row(i).iter().enumerate() {
                out.push((v - self.feature_mean[j]) / self.feature_sd[j]);
            }
        }
        let _ = k;
        Ok(out)
    }

    pub fn standardize_target(&self, target: &[T]) -> Vec<T> {
        target
            .iter()
            .map(|&v| (v - self.target_mean) / self.target_sd)
            .collect()
    }

    pub fn destandardize_mean(&self, v: T) -> T {
        self.target_mean + self.target_sd * v
    }

    pub fn target_scale(&self) -> T {
        self.target_sd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Ridge,
    Lasso,
    Gpr,
    Svr,
    Lstm,
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegressorKind::Ridge => "ridge",
            RegressorKind::Lasso => "lasso",
            RegressorKind::Gpr => "gpr",
            RegressorKind::Svr => "svr",
            RegressorKind::Lstm => "lstm",
        };
        f.write_str(s)
    }
}

impl FromStr for RegressorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ridge" => Ok(RegressorKind::Ridge),
            "lasso" => Ok(RegressorKind::Lasso),
            "gpr" => Ok(RegressorKind::Gpr),
            "svr" => Ok(RegressorKind::Svr),
            "lstm" => Ok(RegressorKind::Lstm),
            other => Err(format!("unknown regressor kind `{other}`")),
        }
    }
}

/// Which linear fit produced a weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearMethod {
    Ridge,
    Lasso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams<T> {
    pub method: LinearMethod,
    pub lambda: T,
    /// Slopes in standardized feature/target space (intercept is zero there).
    pub weights: Vec<T>,
    pub iterations: Option<usize>,
}

/// Learned state, one variant per regressor family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ModelParams<T> {
    Linear(LinearParams<T>),
    Gpr(GprParams<T>),
    Svr(SvrParams<T>),
    Lstm(LstmParams<T>),
}

/// A trained regressor: immutable, serializable, reentrant for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRegressor<T> {
    pub format_version: u32,
    pub kind: RegressorKind,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer<T>,
    pub seed: u64,
    pub params: ModelParams<T>,
}

/// Predictions in original target units; `sd` present for probabilistic kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub mean: Vec<T>,
    pub sd: Option<Vec<T>>,
}

impl<T: Real> Prediction<T> {
    /// 90% central interval: mean ± 1.645·sd.
    pub fn interval90(&self) -> Option<(Vec<T>, Vec<T>)> {
        let sd = self.sd.as_ref()?;
        let z: T = real(Z90);
        let lower = self
            .mean
            .iter()
            .zip(sd)
            .map(|(&m, &s)| m - z * s)
            .collect();
        let upper = self
            .mean
            .iter()
            .zip(sd)
            .map(|(&m, &s)| m + z * s)
            .collect();
        Some((lower, upper))
    }
}

impl<T: Real> FittedRegressor<T> {
    /// Predict on new rows. Feature names and count must match training.
    pub fn predict(&self, features: &FeatureMatrix<T>) -> Result<Prediction<T>, RegressError> {
        if features.names() != self.feature_names.as_slice() {
            return Err(RegressError::FeatureMismatch {
                expected: self.feature_names.clone(),
                got: features.names().to_vec(),
            });
        }
        if features.n() == 0 {
            return Ok(Prediction {
                mean: vec![],
                sd: if matches!(self.params, ModelParams::Gpr(_)) {
                    Some(vec![])
                } else {
                    None
                },
            });
        }
        let z = self.standardizer.standardize(features)?;
        let k = features.k();
        let n = features.n();
        match &self.params {
            ModelParams::Linear(p) => {
                let mean = (0..n)
                    .map(|i| {
                        let row = &z[i * k..(i + 1) * k];
                        let m = row
                            .iter()
                            .zip(&p.weights)
                            .map(|(&a, &b)| a * b)
                            .sum::<T>();
                        self.standardizer.destandardize_mean(m)
                    })
                    .collect();
                Ok(Prediction { mean, sd: None })
            }
            ModelParams::Gpr(p) => {
                let (mean_std, var_std) = gpr::predict_std(p, &z, n, k);
                let scale = self.standardizer.target_scale();
                let mean = mean_std
                    .iter()
                    .map(|&m| self.standardizer.destandardize_mean(m))
                    .collect();
                let sd = var_std
                    .iter()
                    .map(|&v| scale * v.max(T::zero()).sqrt())
                    .collect();
                Ok(Prediction {
                    mean,
                    sd: Some(sd),
                })
            }
            ModelParams::Svr(p) => {
                let mean = svr::predict_std(p, &z, n, k)
                    .into_iter()
                    .map(|m| self.standardizer.destandardize_mean(m))
                    .collect();
                Ok(Prediction { mean, sd: None })
            }
            ModelParams::Lstm(p) => {
                let mean = lstm::predict_std(p, &z, n, k)
                    .into_iter()
                    .map(|m| self.standardizer.destandardize_mean(m))
                    .collect();
                Ok(Prediction { mean, sd: None })
            }
        }
    }

    /// De-standardized slopes and intercept, for the linear kinds.
    pub fn linear_coefficients(&self) -> Option<(Vec<T>, T)> {
        let ModelParams::Linear(p) = &self.params else {
            return None;
        };
        let s = &self.standardizer;
        let slopes: Vec<T> = p
            .weights
            .iter()
            .zip(&s.feature_sd)
            .map(|(&w, &sd)| w * s.target_sd / sd)
            .collect();
        let mut intercept = s.target_mean;
        for (b, &m) in slopes.iter().zip(&s.feature_mean) {
            intercept -= *b * m;
        }
        Some((slopes, intercept))
    }

    pub fn to_json(&self) -> Result<String, RegressError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, RegressError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), RegressError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, RegressError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A regressor kind bundled with its hyperparameters; the uniform training
/// entry point used by the CLI and the two-layer composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegressorSpec<T> {
    Ridge(RidgeConfig<T>),
    Lasso(LassoConfig<T>),
    Gpr(GprConfig<T>),
    Svr(SvrConfig<T>),
    Lstm(LstmConfig),
}

impl<T: Real> RegressorSpec<T> {
    pub fn default_for(kind: RegressorKind) -> Self {
        match kind {
            RegressorKind::Ridge => RegressorSpec::Ridge(RidgeConfig::default()),
            RegressorKind::Lasso => RegressorSpec::Lasso(LassoConfig::default()),
            RegressorKind::Gpr => RegressorSpec::Gpr(GprConfig::default()),
            RegressorKind::Svr => RegressorSpec::Svr(SvrConfig::default()),
            RegressorKind::Lstm => RegressorSpec::Lstm(LstmConfig::default()),
        }
    }

    pub fn kind(&self) -> RegressorKind {
        match self {
            RegressorSpec::Ridge(_) => RegressorKind::Ridge,
            RegressorSpec::Lasso(_) => RegressorKind::Lasso,
            RegressorSpec::Gpr(_) => RegressorKind::Gpr,
            RegressorSpec::Svr(_) => RegressorKind::Svr,
            RegressorSpec::Lstm(_) => RegressorKind::Lstm,
        }
    }

    /// Apply a `key=value` hyperparameter override.
    pub fn set_hyper(&mut self, key: &str, value: f64) -> Result<(), String> {
        let kind = self.kind();
        let bad = || format!("unknown hyperparameter `{key}` for {kind}");
        match self {
            RegressorSpec::Ridge(c) => match key {
                "lambda" => c.lambda = real(value),
                _ => return Err(bad()),
            },
            RegressorSpec::Lasso(c) => match key {
                "lambda" => c.lambda = real(value),
                "tol" => c.tol = real(value),
                "max_iter" => c.max_iter = value as usize,
                _ => return Err(bad()),
            },
            RegressorSpec::Gpr(c) => match key {
                "signal_var" => c.signal_var = real(value),
                "length_scale" => c.length_scale = Some(real(value)),
                "noise_var" => c.noise_var = real(value),
                "optimize" => c.optimize = value != 0.0,
                _ => return Err(bad()),
            },
            RegressorSpec::Svr(c) => match key {
                "c" => c.c = real(value),
                "epsilon" => c.epsilon = real(value),
                "gamma" => c.gamma = Some(real(value)),
                "tol" => c.tol = real(value),
                "max_iter" => c.max_iter = value as usize,
                _ => return Err(bad()),
            },
            RegressorSpec::Lstm(c) => match key {
                "window" => c.window = value as usize,
                "hidden" => c.hidden = value as usize,
                "epochs" => c.epochs = value as usize,
                "lr" => c.lr = value,
                _ => return Err(bad()),
            },
        }
        Ok(())
    }

    pub fn fit(&self, data: &DesignMatrix<T>, seed: u64) -> Result<FittedRegressor<T>, RegressError> {
        match self {
            RegressorSpec::Ridge(c) => fit_ridge(data, c, seed),
            RegressorSpec::Lasso(c) => fit_lasso(data, c, seed),
            RegressorSpec::Gpr(c) => fit_gpr(data, c, seed),
            RegressorSpec::Svr(c) => fit_svr(data, c, seed),
            RegressorSpec::Lstm(c) => fit_lstm(data, c, seed),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_matrix_validation() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(FeatureMatrix::new(names.clone(), &[vec![1.0, f64::NAN]]).is_err());
        assert!(FeatureMatrix::new(names.clone(), &[vec![1.0]]).is_err());
        let f = FeatureMatrix::new(names, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(DesignMatrix::new(f.clone(), vec![1.0]).is_err());
        assert!(DesignMatrix::new(f, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn standardizer_rejects_constant_feature_but_not_target() {
        let names = vec!["a".to_string()];
        let f = FeatureMatrix::new(names.clone(), &[vec![2.0], vec![2.0], vec![2.0]]).unwrap();
        let d = DesignMatrix::new(f, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            Standardizer::fit(&d).unwrap_err(),
            RegressError::ConstantColumn(c) if c == "a"
        ));

        let f = FeatureMatrix::new(names, &[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let d = DesignMatrix::new(f, vec![5.0, 5.0, 5.0]).unwrap();
        let s = Standardizer::fit(&d).unwrap();
        assert_eq!(s.target_sd, 1.0);
        assert_eq!(s.target_mean, 5.0);
    }

    #[test]
    fn standardized_columns_have_unit_population_variance() {
        let d = test_util::toy_problem(40, 3, 0.1, 9);
        let s = Standardizer::fit(&d).unwrap();
        let z = s.standardize(d.features()).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = (0..40).map(|i| z[i * 3 + j]).collect();
            let ss: f64 = col.iter().map(|v| v * v).sum();
            assert!((ss - 40.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kind_parsing_roundtrip() {
        for kind in ["ridge", "lasso", "gpr", "svr", "lstm"] {
            let k: RegressorKind = kind.parse().unwrap();
            assert_eq!(k.to_string(), kind);
        }
        assert!("boost".parse::<RegressorKind>().is_err());
    }
}
