//! A minimal LSTM regressor: one cell layer plus a linear head, trained
//! sequence-to-one by full-batch backpropagation through time with
//! gradient-norm clipping and Adam-style per-parameter step sizes
//! (Hochreiter & Schmidhuber, 1997; gate order i, f, g, o).
//!
//! Month `t` is predicted from the `window` feature rows ending at `t`;
//! windows that would reach past the start of the series clamp to the
//! first row, so prediction is total over the input span.

use serde::{Deserialize, Serialize};

use super::{
    DesignMatrix, FittedRegressor, ModelParams, RegressError, RegressorKind, Standardizer,
    MODEL_FORMAT_VERSION,
};
use crate::scalar::{real, Real};
use crate::seed::SeedStream;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub window: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            window: 12,
            hidden: 16,
            epochs: 200,
            lr: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams<T> {
    pub window: usize,
    pub hidden: usize,
    pub input_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weights: Vec<T>,
    /// Mean training loss over the first and last ten epochs.
    pub loss_first: T,
    pub loss_last: T,
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// The raw network: weights for the four gates, the recurrence, and the
/// linear head, packed into one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet<T> {
    pub input_dim: usize,
    pub hidden: usize,
    pub theta: Vec<T>,
}

struct StepCache<T> {
    gates: Vec<T>,  // i, f, g, o concatenated (4h)
    cell: Vec<T>,   // c_t
    tanh_c: Vec<T>, // tanh(c_t)
    hidden: Vec<T>, // h_t
}

impl<T: Real> LstmNet<T> {
    pub fn param_count(input_dim: usize, hidden: usize) -> usize {
        4 * hidden * input_dim + 4 * hidden * hidden + 4 * hidden + hidden + 1
    }

    /// Uniform ±0.08 initialization from the seed.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = SeedStream::new(seed).rng("lstm/init");
        let theta = (0..Self::param_count(input_dim, hidden))
            .map(|_| real(rng.gen_range(-0.08..0.08)))
            .collect();
        LstmNet {
            input_dim,
            hidden,
            theta,
        }
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let (k, h) = (self.input_dim, self.hidden);
        let wx_end = 4 * h * k;
        let wh_end = wx_end + 4 * h * h;
        let b_end = wh_end + 4 * h;
        let v_end = b_end + h;
        (wx_end, wh_end, b_end, v_end)
    }

    /// Clamped window row indices for every position of an n-row series.
    pub fn windows_for(n: usize, window: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|t| (0..window).map(|s| (t + 1 + s).saturating_sub(window)).collect())
            .collect()
    }

    fn run_window(&self, z: &[T], k: usize, window: &[usize]) -> (T, Vec<StepCache<T>>) {
        let h = self.hidden;
        let (wx_end, wh_end, b_end, v_end) = self.offsets();
        let wx = &self.theta[..wx_end];
        let wh = &self.theta[wx_end..wh_end];
        let bias = &self.theta[wh_end..b_end];
        let head = &self.theta[b_end..v_end];
        let head_b = self.theta[v_end];

        let mut caches = Vec::with_capacity(window.len());
        let mut h_prev = vec![T::zero(); h];
        let mut c_prev = vec![T::zero(); h];
        for &row in window {
            let x = &z[row * k..(row + 1) * k];
            let mut gates = vec![T::zero(); 4 * h];
            for g in 0..4 * h {
                let mut a = bias[g];
                let wxg = &wx[g * k..(g + 1) * k];
                for (c, &xv) in x.iter().enumerate() {
                    a += wxg[c] * xv;
                }
                let whg = &wh[g * h..(g + 1) * h];
                for (q, &hv) in h_prev.iter().enumerate() {
                    a += whg[q] * hv;
                }
                gates[g] = a;
            }
            for r in 0..h {
                gates[r] = sigmoid(gates[r]); // input gate
                gates[h + r] = sigmoid(gates[h + r]); // forget gate
                gates[2 * h + r] = gates[2 * h + r].tanh(); // candidate
                gates[3 * h + r] = sigmoid(gates[3 * h + r]); // output gate
            }
            let mut cell = vec![T::zero(); h];
            let mut tanh_c = vec![T::zero(); h];
            let mut hid = vec![T::zero(); h];
            for r in 0..h {
                cell[r] = gates[h + r] * c_prev[r] + gates[r] * gates[2 * h + r];
                tanh_c[r] = cell[r].tanh();
                hid[r] = gates[3 * h + r] * tanh_c[r];
            }
            h_prev.clone_from(&hid);
            c_prev.clone_from(&cell);
            caches.push(StepCache {
                gates,
                cell,
                tanh_c,
                hidden: hid,
            });
        }
        let last = caches.last().expect("window is nonempty");
        let mut y = head_b;
        for (r, &hv) in last.hidden.iter().enumerate() {
            y += head[r] * hv;
        }
        (y, caches)
    }

    /// Prediction for one window of row indices into the flat feature
    /// buffer `z` (row-major, `k` features per row).
    pub fn forward(&self, z: &[T], k: usize, window: &[usize]) -> T {
        self.run_window(z, k, window).0
    }

    /// Mean-squared-error loss over all windows and its gradient w.r.t.
    /// every parameter, by backpropagation through time.
    pub fn loss_and_grad(
        &self,
        z: &[T],
        k: usize,
        windows: &[Vec<usize>],
        targets: &[T],
    ) -> (T, Vec<T>) {
        let h = self.hidden;
        let (wx_end, wh_end, b_end, v_end) = self.offsets();
        let wh = &self.theta[wx_end..wh_end];
        let head = &self.theta[b_end..v_end];
        let m: T = real(windows.len() as f64);

        let mut grad = vec![T::zero(); self.theta.len()];
        let mut loss = T::zero();
        for (window, &target) in windows.iter().zip(targets) {
            let (y, caches) = self.run_window(z, k, window);
            let err = y - target;
            loss += err * err;
            let dy = real::<T>(2.0) * err / m;

            let last = caches.last().unwrap();
            grad[v_end] += dy;
            let mut dh: Vec<T> = (0..h).map(|r| dy * head[r]).collect();
            for r in 0..h {
                grad[b_end + r] += dy * last.hidden[r];
            }

            let mut dc = vec![T::zero(); h];
            for t in (0..window.len()).rev() {
                let cache = &caches[t];
                let c_prev: &[T] = if t == 0 { &[] } else { &caches[t - 1].cell };
                let h_prev: &[T] = if t == 0 { &[] } else { &caches[t - 1].hidden };
                let x = &z[window[t] * k..(window[t] + 1) * k];

                let mut da = vec![T::zero(); 4 * h];
                for r in 0..h {
                    let gi = cache.gates[r];
                    let gf = cache.gates[h + r];
                    let gg = cache.gates[2 * h + r];
                    let go = cache.gates[3 * h + r];
                    let d_out = dh[r] * cache.tanh_c[r];
                    let dct = dc[r] + dh[r] * go * (T::one() - cache.tanh_c[r] * cache.tanh_c[r]);
                    let d_in = dct * gg;
                    let d_forget = if t == 0 { T::zero() } else { dct * c_prev[r] };
                    let d_cand = dct * gi;
                    da[r] = d_in * gi * (T::one() - gi);
                    da[h + r] = d_forget * gf * (T::one() - gf);
                    da[2 * h + r] = d_cand * (T::one() - gg * gg);
                    da[3 * h + r] = d_out * go * (T::one() - go);
                    dc[r] = dct * gf; // flows to c_{t-1}
                }
                for g in 0..4 * h {
                    grad[wh_end + g] += da[g];
                    let wx_base = g * k;
                    for (c, &xv) in x.iter().enumerate() {
                        grad[wx_base + c] += da[g] * xv;
                    }
                    if t > 0 {
                        let wh_base = wx_end + g * h;
                        for (q, &hv) in h_prev.iter().enumerate() {
                            grad[wh_base + q] += da[g] * hv;
                        }
                    }
                }
                if t > 0 {
                    for q in 0..h {
                        let mut s = T::zero();
                        for g in 0..4 * h {
                            s += wh[g * h + q] * da[g];
                        }
                        dh[q] = s;
                    }
                }
            }
        }
        (loss / m, grad)
    }
}

pub fn fit_lstm<T: Real>(
    data: &DesignMatrix<T>,
    cfg: &LstmConfig,
    seed: u64,
) -> Result<FittedRegressor<T>, RegressError> {
    if cfg.window == 0 || cfg.hidden == 0 || cfg.epochs == 0 {
        return Err(RegressError::Shape(
            "lstm window, hidden and epochs must be positive".into(),
        ));
    }
    let std = Standardizer::fit(data)?;
    let z = std.standardize(data.features())?;
    let t = std.standardize_target(data.target());
    let (n, k) = (data.n(), data.k());

    let mut net = LstmNet::init(k, cfg.hidden, seed);
    let windows = LstmNet::<T>::windows_for(n, cfg.window);

    // Adam state
    let p = net.theta.len();
    let mut m1 = vec![T::zero(); p];
    let mut m2 = vec![T::zero(); p];
    let (beta1, beta2): (T, T) = (real(0.9), real(0.999));
    let adam_eps: T = real(1e-8);
    let lr: T = real(cfg.lr);

    let mut losses: Vec<T> = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, mut grad) = net.loss_and_grad(&z, k, &windows, &t);
        if !loss.is_finite() {
            return Err(RegressError::NonFiniteLoss { epoch });
        }
        losses.push(loss);

        // clip to unit global norm
        let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
        if norm > T::one() {
            for g in grad.iter_mut() {
                *g /= norm;
            }
        }

        let step: T = real((epoch + 1) as f64);
        let bc1 = T::one() - beta1.powf(step);
        let bc2 = T::one() - beta2.powf(step);
        for i in 0..p {
            m1[i] = beta1 * m1[i] + (T::one() - beta1) * grad[i];
            m2[i] = beta2 * m2[i] + (T::one() - beta2) * grad[i] * grad[i];
            let mhat = m1[i] / bc1;
            let vhat = m2[i] / bc2;
            net.theta[i] -= lr * mhat / (vhat.sqrt() + adam_eps);
        }
    }

    let span = losses.len().min(10);
    let avg = |s: &[T]| s.iter().copied().sum::<T>() / real(s.len() as f64);
    Ok(FittedRegressor {
        format_version: MODEL_FORMAT_VERSION,
        kind: RegressorKind::Lstm,
        feature_names: data.features().names().to_vec(),
        standardizer: std,
        seed,
        params: ModelParams::Lstm(LstmParams {
            window: cfg.window,
            hidden: cfg.hidden,
            input_dim: k,
            epochs: cfg.epochs,
            lr: cfg.lr,
            weights: net.theta,
            loss_first: avg(&losses[..span]),
            loss_last: avg(&losses[losses.len() - span..]),
        }),
    })
}

pub(super) fn predict_std<T: Real>(p: &LstmParams<T>, z: &[T], n_rows: usize, k: usize) -> Vec<T> {
    let net = LstmNet {
        input_dim: p.input_dim,
        hidden: p.hidden,
        theta: p.weights.clone(),
    };
    LstmNet::<T>::windows_for(n_rows, p.window)
        .iter()
        .map(|w| net.forward(z, k, w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::test_util::toy_problem;
    use crate::regress::FeatureMatrix;

    #[test]
    fn window_indices_clamp_at_start() {
        let w = LstmNet::<f64>::windows_for(5, 3);
        assert_eq!(w[0], vec![0, 0, 0]);
        assert_eq!(w[1], vec![0, 0, 1]);
        assert_eq!(w[4], vec![2, 3, 4]);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        // 2 hidden units, 3-step windows, as small as it gets
        let d = toy_problem(7, 2, 0.3, 33);
        let std = Standardizer::fit(&d).unwrap();
        let z = std.standardize(d.features()).unwrap();
        let t = std.standardize_target(d.target());
        let windows = LstmNet::<f64>::windows_for(d.n(), 3);
        let mut net = LstmNet::<f64>::init(2, 2, 77);
        // scale the init up so recurrent-path gradients are well above the
        // central-difference noise floor (~1e-11 at step 1e-5)
        for w in net.theta.iter_mut() {
            *w *= 6.0;
        }

        let (_, grad) = net.loss_and_grad(&z, 2, &windows, &t);
        let step = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..net.theta.len() {
            let keep = net.theta[i];
            net.theta[i] = keep + step;
            let up = net.loss_and_grad(&z, 2, &windows, &t).0;
            net.theta[i] = keep - step;
            let down = net.loss_and_grad(&z, 2, &windows, &t).0;
            net.theta[i] = keep;
            let fd = (up - down) / (2.0 * step);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst:e}");
    }

    #[test]
    fn converges_to_a_constant_target() {
        let rows: Vec<Vec<f64>> = (0..24).map(|i| vec![(i as f64 * 0.7).sin()]).collect();
        let d = DesignMatrix::new(
            FeatureMatrix::new(vec!["x".into()], &rows).unwrap(),
            vec![4.2; 24],
        )
        .unwrap();
        let cfg = LstmConfig {
            window: 4,
            hidden: 4,
            epochs: 300,
            lr: 1e-2,
        };
        let model = fit_lstm(&d, &cfg, 11).unwrap();
        // constant target keeps unit scale, so 1e-2 standardized = 1e-2 raw
        for v in model.predict(d.features()).unwrap().mean {
            assert!((v - 4.2).abs() < 1e-2, "prediction {v}");
        }
    }

    #[test]
    fn same_seed_gives_bit_identical_weights() {
        let d = toy_problem(30, 2, 0.1, 55);
        let cfg = LstmConfig {
            window: 6,
            hidden: 5,
            epochs: 10,
            lr: 1e-2,
        };
        let a = fit_lstm(&d, &cfg, 123).unwrap();
        let b = fit_lstm(&d, &cfg, 123).unwrap();
        let (ModelParams::Lstm(pa), ModelParams::Lstm(pb)) = (&a.params, &b.params) else {
            unreachable!()
        };
        for (x, y) in pa.weights.iter().zip(&pb.weights) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        // and a different seed diverges
        let c = fit_lstm(&d, &cfg, 124).unwrap();
        let ModelParams::Lstm(pc) = &c.params else {
            unreachable!()
        };
        assert!(pa.weights.iter().zip(&pc.weights).any(|(x, y)| x != y));
    }

    #[test]
    fn loss_decreases_on_average() {
        let d = toy_problem(60, 2, 0.1, 8);
        let model = fit_lstm(
            &d,
            &LstmConfig {
                window: 6,
                hidden: 8,
                epochs: 120,
                lr: 1e-2,
            },
            9,
        )
        .unwrap();
        let ModelParams::Lstm(p) = &model.params else {
            unreachable!()
        };
        assert!(
            p.loss_last < p.loss_first,
            "first {} last {}",
            p.loss_first,
            p.loss_last
        );
    }
}
