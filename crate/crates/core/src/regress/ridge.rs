//! Ridge regression: squared-magnitude coefficient penalty, solved exactly
//! through the normal equations on standardized features.

use serde::{Deserialize, Serialize};

use super::linalg::{cholesky_in_place, cholesky_solve};
use super::{
    DesignMatrix, FittedRegressor, LinearMethod, LinearParams, ModelParams, RegressError,
    RegressorKind, Standardizer, MODEL_FORMAT_VERSION,
};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig<T> {
    pub lambda: T,
}

impl<T: Real> Default for RidgeConfig<T> {
    fn default() -> Self {
        RidgeConfig { lambda: real(1.0) }
    }
}

/// Solve (ZᵀZ + λI) w = Zᵀy on standardized data. The intercept is
/// unpenalized; after standardization it is identically zero.
pub fn fit_ridge<T: Real>(
    data: &DesignMatrix<T>,
    cfg: &RidgeConfig<T>,
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

    // gram matrix + ridge diagonal
    let mut gram = vec![T::zero(); k * k];
    for row in 0..n {
        let zr = &z[row * k..(row + 1) * k];
        for i in 0..k {
            for j in 0..=i {
                gram[i * k + j] += zr[i] * zr[j];
            }
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            gram[i * k + j] = gram[j * k + i];
        }
        gram[i * k + i] += cfg.lambda;
    }
    let mut rhs = vec![T::zero(); k];
    for row in 0..n {
        let zr = &z[row * k..(row + 1) * k];
        for i in 0..k {
            rhs[i] += zr[i] * t[row];
        }
    }

    cholesky_in_place(&mut gram, k).map_err(|_| RegressError::SingularSystem)?;
    cholesky_solve(&gram, k, &mut rhs);

    Ok(FittedRegressor {
        format_version: MODEL_FORMAT_VERSION,
        kind: RegressorKind::Ridge,
        feature_names: data.features().names().to_vec(),
        standardizer: std,
        seed,
        params: ModelParams::Linear(LinearParams {
            method: LinearMethod::Ridge,
            lambda: cfg.lambda,
            weights: rhs,
            iterations: None,
        }),
    })
}
