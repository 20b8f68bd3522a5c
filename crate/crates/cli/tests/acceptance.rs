//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its runtime. Tolerances are pinned here, not tuned.
//!
//! Run with `cargo test -p hydroflux-cli --test acceptance -- --nocapture`
//! to see the per-criterion report.

#![allow(clippy::needless_range_loop)]

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hydroflux::abcd::{abcd_step, simulate, AbcdParams, y_function};
use hydroflux::calibrate::{pso_calibrate, CalibrationCase, PsoConfig};
use hydroflux::metrics::{
    interval_coverage, moriasi_class, nse, pbias, rmse, MoriasiClass,
};
use hydroflux::pet::hargreaves_pet_daily;
use hydroflux::piml::{predict_piml, q_feature_rows, train_piml, water_balance, EtSource};
use hydroflux::regress::{
    fit_gpr, fit_lasso, fit_ridge, fit_svr, DesignMatrix, FeatureMatrix, GprConfig, LassoConfig,
    LstmNet, ModelParams, RegressorSpec, RidgeConfig, Standardizer, SvrConfig,
};
use hydroflux::seed::SeedStream;
use hydroflux::synth::{synth_generate, NoiseSpec, SynthSpec};
use hydroflux::timeseries::{Column, MonthRange};
use rand::Rng;

fn pass(criterion: u32, what: &str, started: Instant) {
    println!(
        "criterion {criterion:02} {what}: PASS ({:.2}s)",
        started.elapsed().as_secs_f64()
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

#[test]
fn criterion_01_step_mass_balance() {
    let started = Instant::now();
    let mut rng = SeedStream::new(1001).rng("acceptance/mass-balance");
    for _ in 0..10_000 {
        let params = AbcdParams::new(
            rng.gen_range(0.01..=1.0),
            rng.gen_range(1.0..1000.0),
            rng.gen_range(0.0..=1.0),
            rng.gen_range(0.0..=1.0),
        )
        .unwrap();
        let sm_prev: f64 = rng.gen_range(0.0..1200.0);
        let gw_prev: f64 = rng.gen_range(0.0..1200.0);
        let p: f64 = rng.gen_range(0.0..1500.0);
        let pet: f64 = rng.gen_range(0.0..400.0);
        let r = abcd_step(&params, sm_prev, gw_prev, p, pet).unwrap();
        let soil = (r.sm + r.et + r.dr + r.gr - sm_prev - p).abs();
        let ground = (r.gw + r.gd - gw_prev - r.gr).abs();
        assert!(soil <= 1e-9, "soil-moisture residual {soil}");
        assert!(ground <= 1e-9, "groundwater residual {ground}");
    }
    assert!(started.elapsed() < Duration::from_secs(5), "runtime bound");
    pass(1, "per-step mass balance <= 1e-9 over 10,000 draws", started);
}

#[test]
fn criterion_02_y_function_properties() {
    let started = Instant::now();
    let mut rng = SeedStream::new(1002).rng("acceptance/y-function");
    for _ in 0..10_000 {
        let a: f64 = rng.gen_range(0.01..=1.0);
        let b: f64 = rng.gen_range(1.0..1000.0);
        let w: f64 = rng.gen_range(0.0..2500.0);
        let y = y_function(w, a, b);
        assert!(y >= -1e-12, "Y negative: {y}");
        assert!(y <= w.min(b) + 1e-9, "Y above min(w, b)");
        // relative step: far out on the asymptote the true slope is ~b^2/w^2,
        // which an absolute step cannot resolve against cancellation noise
        let h = 1e-4 * (1.0 + w);
        let slope = (y_function(w + h, a, b) - y) / h;
        assert!(slope > 0.0 && slope <= 1.0 + 1e-6, "dY/dw = {slope}");
    }
    assert!(started.elapsed() < Duration::from_secs(5), "runtime bound");
    pass(2, "Y bounded by min(w,b) with dY/dw in (0,1]", started);
}

#[test]
fn criterion_03_metric_identities() {
    let started = Instant::now();
    let obs = [1.0, 2.0, 3.0];
    assert_eq!(nse(&obs, &obs).unwrap(), 1.0);
    assert_eq!(pbias(&obs, &obs).unwrap(), 0.0);
    assert_eq!(rmse(&obs, &obs).unwrap(), 0.0);
    assert_eq!(nse(&obs, &[2.0, 2.0, 2.0]).unwrap(), 0.0);
    assert_eq!(nse(&obs, &[1.5, 2.0, 2.5]).unwrap(), 0.75);
    assert_eq!(pbias(&[10.0, 10.0], &[9.0, 9.0]).unwrap(), 10.0);
    assert_eq!(pbias(&[10.0, 10.0], &[11.0, 11.0]).unwrap(), -10.0);
    assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);

    let mut rng = SeedStream::new(1003).rng("acceptance/metrics");
    for _ in 0..500 {
        let n = rng.gen_range(2..60);
        let obs: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..120.0)).collect();
        let sim: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..120.0)).collect();
        let mean = obs.iter().sum::<f64>() / n as f64;
        let den: f64 = obs.iter().map(|o| (o - mean).powi(2)).sum();
        if den < 1e-9 {
            continue;
        }
        let r = rmse(&obs, &sim).unwrap();
        let identity = 1.0 - r * r * n as f64 / den;
        let direct = nse(&obs, &sim).unwrap();
        assert!((identity - direct).abs() < 1e-12);
    }
    pass(3, "NSE/PBIAS/RMSE unit cases and cross-metric identity", started);
}

#[test]
fn criterion_04_moriasi_labels() {
    let started = Instant::now();
    assert_eq!(moriasi_class(0.815), MoriasiClass::VeryGood);
    assert_eq!(moriasi_class(0.827), MoriasiClass::VeryGood);
    assert_eq!(moriasi_class(-1.423), MoriasiClass::Unacceptable);
    assert_eq!(moriasi_class(0.438), MoriasiClass::Unsatisfactory);
    pass(4, "reference NSE values land in their bands", started);
}

#[test]
fn criterion_05_water_balance_arithmetic() {
    let started = Instant::now();
    let benchmark = 1241.667;
    for (modeled, want) in [
        (1218.166, -1.893),
        (1201.257, -3.255),
        (1157.801, -6.754),
    ] {
        let report = water_balance::<f64>(
            1231.783,
            modeled * 0.7,
            modeled * 0.3,
            benchmark,
            -0.045,
            -0.155,
            1.0,
        )
        .unwrap();
        assert!(
            (report.pct_deviation - want).abs() <= 0.005,
            "deviation {} for modeled {modeled}, want {want}",
            report.pct_deviation
        );
    }
    pass(5, "annual-balance deviation arithmetic matches reference values", started);
}

#[test]
fn criterion_06_parameter_recovery() {
    let started = Instant::now();
    let spec = SynthSpec::<f64>::reference(2024);
    let out = synth_generate(&spec).unwrap();
    // 36 warm-up + 288 calibration months; last 72 held out
    let calib = out
        .forcing
        .slice(MonthRange::years(1976, 2002))
        .unwrap();
    let test = out.forcing.slice(MonthRange::years(2003, 2008)).unwrap();

    let config = PsoConfig {
        seed: 7,
        ..PsoConfig::default() // swarm 40, 200 iterations
    };
    let result = pso_calibrate(&calib, 36, &CalibrationCase::q(), &config).unwrap();

    let rel = |got: f64, want: f64| (got - want).abs() / want;
    assert!(rel(result.params.a(), 0.95) < 0.05, "a = {}", result.params.a());
    assert!(rel(result.params.b(), 350.0) < 0.10, "b = {}", result.params.b());
    assert!(rel(result.params.c(), 0.60) < 0.05, "c = {}", result.params.c());
    assert!(rel(result.params.d(), 0.40) < 0.05, "d = {}", result.params.d());

    let trace = simulate(&result.params, &result.init, &out.forcing, 0).unwrap();
    let offset = out.forcing.len() - test.len();
    let sim_q: Vec<f64> = trace.records()[offset..].iter().map(|r| r.q).collect();
    let skill = nse(test.column(Column::Q).unwrap(), &sim_q).unwrap();
    assert!(skill >= 0.99, "held-out NSE {skill}");
    assert!(started.elapsed() < Duration::from_secs(60), "runtime bound");
    pass(
        6,
        "swarm recovers a,c,d within 5% and b within 10%, NSE >= 0.99",
        started,
    );
}

fn fixture_5x2() -> DesignMatrix<f64> {
    let rows = vec![
        vec![0.2, 1.7],
        vec![1.5, -0.3],
        vec![2.9, 0.8],
        vec![-0.7, 2.2],
        vec![1.1, 0.5],
    ];
    DesignMatrix::new(
        FeatureMatrix::new(vec!["x0".into(), "x1".into()], &rows).unwrap(),
        vec![1.0, 0.4, 2.3, -0.8, 0.9],
    )
    .unwrap()
}

fn toy(n: usize, k: usize, noise: f64, seed: u64) -> DesignMatrix<f64> {
    let mut rng = SeedStream::new(seed).rng("acceptance/toy");
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let target: Vec<f64> = rows
        .iter()
        .map(|r| {
            let s: f64 = r.iter().enumerate().map(|(j, v)| (j as f64 + 1.0) * v).sum();
            (0.9f64 * s).sin() + 0.3 * s + noise * rng.gen_range(-1.0..1.0)
        })
        .collect();
    let names = (0..k).map(|j| format!("x{j}")).collect();
    DesignMatrix::new(FeatureMatrix::new(names, &rows).unwrap(), target).unwrap()
}

#[test]
fn criterion_07_regressor_oracles() {
    let started = Instant::now();

    // ridge vs a 50-digit solve of the standardized normal equations
    let ridge = fit_ridge(&fixture_5x2(), &RidgeConfig { lambda: 0.7 }, 0).unwrap();
    let (slopes, intercept) = ridge.linear_coefficients().unwrap();
    assert!((slopes[0] - 0.720_278_354_966_006_7).abs() < 1e-10);
    assert!((slopes[1] - 0.232_681_576_764_465_27).abs() < 1e-10);
    assert!((intercept - -0.188_306_300_195_182_63).abs() < 1e-10);

    // lasso objective vs a coefficient-grid oracle at step 1e-4 (coarse
    // pass + refinement is valid because the objective is convex)
    {
        let d = toy(25, 2, 0.2, 7);
        let lambda = 0.15;
        let std = Standardizer::fit(&d).unwrap();
        let z = std.standardize(d.features()).unwrap();
        let t = std.standardize_target(d.target());
        let n = d.n();
        let objective = |w0: f64, w1: f64| {
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
        let fitted = objective(p.weights[0], p.weights[1]);
        assert!((fitted - best.2).abs() < 1e-6, "lasso gap {}", fitted - best.2);
    }

    // gpr mean and sd vs a 50-digit dense-inverse evaluation
    {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 2.0]).collect();
        let target: Vec<f64> = rows.iter().map(|r| (1.3 * r[0]).sin()).collect();
        let d = DesignMatrix::new(
            FeatureMatrix::new(vec!["x".into()], &rows).unwrap(),
            target,
        )
        .unwrap();
        let model = fit_gpr(
            &d,
            &GprConfig {
                signal_var: 1.2,
                length_scale: Some(0.8),
                noise_var: 0.05,
                optimize: false,
            },
            0,
        )
        .unwrap();
        let stars: Vec<Vec<f64>> = [0.25, 2.1, 3.7, 6.0].iter().map(|&x| vec![x]).collect();
        let pred = model
            .predict(&FeatureMatrix::new(vec!["x".into()], &stars).unwrap())
            .unwrap();
        let want_mean = [
            0.314_290_712_051_738_25,
            0.398_630_445_643_962_1,
            -0.944_836_972_746_643,
            0.164_644_071_214_931_2,
        ];
        let want_sd = [
            0.189_995_339_400_954_98,
            0.186_046_198_098_035_96,
            0.188_207_633_466_449_34,
            0.664_459_533_866_510_2,
        ];
        let sd = pred.sd.unwrap();
        for i in 0..4 {
            assert!((pred.mean[i] - want_mean[i]).abs() < 1e-8);
            assert!((sd[i] - want_sd[i]).abs() < 1e-8);
        }
    }

    // svr dual objective vs a projected-gradient solve of the same dual
    {
        let d = toy(8, 1, 0.3, 5);
        let model = fit_svr(
            &d,
            &SvrConfig {
                tol: 1e-6,
                ..SvrConfig::default()
            },
            0,
        )
        .unwrap();
        let ModelParams::Svr(p) = &model.params else {
            unreachable!()
        };
        let std = &model.standardizer;
        let z = std.standardize(d.features()).unwrap();
        let y = std.standardize_target(d.target());
        let n = d.n();
        let m2 = 2 * n;
        let sign = |s: usize| if s < n { 1.0 } else { -1.0 };
        let kernel =
            |i: usize, j: usize| (-(p.gamma) * (z[i] - z[j]).powi(2)).exp();
        let mut q = vec![0.0f64; m2 * m2];
        for s in 0..m2 {
            for r in 0..m2 {
                q[s * m2 + r] = sign(s) * sign(r) * kernel(s % n, r % n);
            }
        }
        let lin: Vec<f64> = (0..m2).map(|s| p.epsilon - sign(s) * y[s % n]).collect();
        let objective = |u: &[f64]| {
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
        let project = |v: &[f64]| -> Vec<f64> {
            let g = |theta: f64| -> f64 {
                v.iter()
                    .enumerate()
                    .map(|(s, &x)| sign(s) * (x - theta * sign(s)).clamp(0.0, p.c))
                    .sum()
            };
            let (mut lo, mut hi) = (-1e3, 1e3);
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
                .map(|(s, &x)| (x - theta * sign(s)).clamp(0.0, p.c))
                .collect()
        };
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
            let next = project(&v);
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
        assert!(gap < 1e-5, "svr dual gap {gap}");
    }

    // lstm backpropagation-through-time vs central finite differences
    {
        let d = toy(7, 2, 0.3, 33);
        let std = Standardizer::fit(&d).unwrap();
        let z = std.standardize(d.features()).unwrap();
        let t = std.standardize_target(d.target());
        let windows = LstmNet::<f64>::windows_for(d.n(), 3);
        let mut net = LstmNet::<f64>::init(2, 2, 77);
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
            worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6));
        }
        assert!(worst < 1e-4, "lstm gradient relative error {worst:e}");
    }

    pass(
        7,
        "ridge/lasso/gpr/svr/lstm match their independent oracles",
        started,
    );
}

#[test]
fn criterion_08_piml_beats_pure_ml_baseline() {
    let started = Instant::now();
    let mut piml_scores = Vec::new();
    let mut pure_scores = Vec::new();
    for seed in 1..=5u64 {
        let mut spec = SynthSpec::<f64>::reference(seed);
        spec.noise = NoiseSpec::uniform(5.0);
        let out = synth_generate(&spec).unwrap();
        let train = out.forcing.slice(MonthRange::years(1979, 2002)).unwrap();
        let test = out.forcing.slice(MonthRange::years(2003, 2008)).unwrap();
        let obs = &test.column(Column::Q).unwrap()[1..];

        let gpr = RegressorSpec::Gpr(GprConfig::default());
        let model = train_piml(&train, &gpr, &gpr, seed, EtSource::Predicted).unwrap();
        let pred = predict_piml(&model, &test).unwrap();
        piml_scores.push(nse(obs, &pred.q.mean).unwrap());

        // same regressor kind and seed, fed only precipitation and mean
        // temperature, scored on the same months
        let features = |f: &hydroflux::Forcing64| {
            let t_avg: Vec<f64> = f
                .tmax()
                .iter()
                .zip(f.tmin())
                .map(|(a, b)| (a + b) / 2.0)
                .collect();
            FeatureMatrix::from_columns(
                vec!["p_mm".into(), "t_avg_c".into()],
                &[f.p().to_vec(), t_avg],
            )
            .unwrap()
        };
        let dm = DesignMatrix::new(
            features(&train),
            train.column(Column::Q).unwrap().to_vec(),
        )
        .unwrap();
        let pure = gpr.fit(&dm, seed).unwrap();
        let pure_pred = pure.predict(&features(&test)).unwrap();
        pure_scores.push(nse(obs, &pure_pred.mean[1..]).unwrap());
    }
    let piml_median = median(piml_scores.clone());
    let pure_median = median(pure_scores.clone());
    assert!(
        piml_median >= pure_median,
        "median NSE(Q): piml {piml_median:.4} vs pure {pure_median:.4} \
         (piml {piml_scores:?}, pure {pure_scores:?})"
    );
    assert!(started.elapsed() < Duration::from_secs(180), "runtime bound");
    pass(
        8,
        "median test NSE(Q): physics-informed layers >= pure (P, T) baseline",
        started,
    );
}

#[test]
fn criterion_09_gpr_interval_coverage() {
    let started = Instant::now();
    let mut coverages = Vec::new();
    for seed in 1..=5u64 {
        let mut spec = SynthSpec::<f64>::reference(100 + seed);
        spec.noise = NoiseSpec::uniform(5.0);
        let out = synth_generate(&spec).unwrap();
        let train = out.forcing.slice(MonthRange::years(1979, 1988)).unwrap();
        let test = out.forcing.slice(MonthRange::years(1989, 1993)).unwrap();

        let features = |f: &hydroflux::Forcing64| {
            let et = f.column(Column::Et).unwrap()[1..].to_vec();
            q_feature_rows(f, &et).unwrap().0
        };
        let dm = DesignMatrix::new(
            features(&train),
            train.column(Column::Q).unwrap()[1..].to_vec(),
        )
        .unwrap();
        let model = fit_gpr(
            &dm,
            &GprConfig {
                optimize: true,
                ..GprConfig::default()
            },
            seed,
        )
        .unwrap();
        let pred = model.predict(&features(&test)).unwrap();
        let (lower, upper) = pred.interval90().unwrap();
        let obs = &test.column(Column::Q).unwrap()[1..];
        coverages.push(interval_coverage(obs, &lower, &upper).unwrap());
    }
    let m = median(coverages.clone());
    assert!(
        (0.80..=0.98).contains(&m),
        "median coverage {m} ({coverages:?})"
    );
    pass(9, "90% intervals cover 80-98% of held-out months", started);
}

fn run_cli(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_hydroflux"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_identical(dir: &Path, first: &str, second: &str, files: &[&str]) {
    for file in files {
        let a = std::fs::read(dir.join(first).join(file)).unwrap();
        let b = std::fs::read(dir.join(second).join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between {first} and {second}");
    }
}

#[test]
fn criterion_10_subcommand_determinism() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // every subcommand runs once from flags, then again from its own saved
    // config into a fresh directory; numeric outputs must be byte-identical
    run_cli(
        dir,
        &[
            "synth", "--months", "120", "--seed", "9", "--noise", "2", "--out-dir", "synth1",
        ],
    );
    run_cli(dir, &["synth", "--config", "synth1/config.toml", "--out-dir", "synth2"]);
    assert_identical(dir, "synth1", "synth2", &["forcing.csv", "truth.json"]);

    let common = [
        "--forcing",
        "synth1/forcing.csv",
        "--warmup",
        "1976:1978",
        "--train",
        "1979:1983",
        "--test",
        "1984:1985",
    ];

    let mut calibrate = vec!["calibrate"];
    calibrate.extend_from_slice(&common);
    calibrate.extend_from_slice(&[
        "--case", "q", "--swarm", "8", "--iters", "10", "--seed", "4", "--out-dir", "calib1",
    ]);
    run_cli(dir, &calibrate);
    run_cli(dir, &["calibrate", "--config", "calib1/config.toml", "--out-dir", "calib2"]);
    assert_identical(
        dir,
        "calib1",
        "calib2",
        &["best_params.json", "convergence.csv", "eval.json"],
    );

    run_cli(
        dir,
        &[
            "simulate",
            "--forcing",
            "synth1/forcing.csv",
            "--params",
            "calib1/best_params.json",
            "--warmup-months",
            "36",
            "--out-dir",
            "sim1",
        ],
    );
    run_cli(dir, &["simulate", "--config", "sim1/config.toml", "--out-dir", "sim2"]);
    assert_identical(dir, "sim1", "sim2", &["trace.csv"]);

    let mut train_ml = vec!["train-ml"];
    train_ml.extend_from_slice(&common);
    train_ml.extend_from_slice(&[
        "--model", "ridge", "--inputs", "p,t_avg", "--seed", "4", "--out-dir", "ml1",
    ]);
    run_cli(dir, &train_ml);
    run_cli(dir, &["train-ml", "--config", "ml1/config.toml", "--out-dir", "ml2"]);
    assert_identical(
        dir,
        "ml1",
        "ml2",
        &["model.json", "predictions.csv", "eval.json", "plot_data.csv"],
    );

    let mut train_piml = vec!["train-piml"];
    train_piml.extend_from_slice(&common);
    train_piml.extend_from_slice(&[
        "--et-model", "ridge", "--q-model", "ridge", "--seed", "4", "--out-dir", "piml1",
    ]);
    run_cli(dir, &train_piml);
    run_cli(dir, &["train-piml", "--config", "piml1/config.toml", "--out-dir", "piml2"]);
    assert_identical(
        dir,
        "piml1",
        "piml2",
        &[
            "model.json",
            "predictions_et.csv",
            "predictions_q.csv",
            "eval_et.json",
            "eval_q.json",
            "diagnostics.json",
            "plot_data.csv",
        ],
    );

    run_cli(
        dir,
        &[
            "evaluate",
            "--predictions",
            "ml1/predictions.csv",
            "--variable",
            "q",
            "--out-dir",
            "eval1",
        ],
    );
    run_cli(dir, &["evaluate", "--config", "eval1/config.toml", "--out-dir", "eval2"]);
    assert_identical(dir, "eval1", "eval2", &["report.json", "report.txt"]);

    run_cli(
        dir,
        &[
            "water-balance",
            "--observations",
            "synth1/forcing.csv",
            "--pred",
            "piml=piml1/predictions_et.csv,piml1/predictions_q.csv",
            "--period",
            "1984-01:1985-12",
            "--out-dir",
            "wb1",
        ],
    );
    run_cli(dir, &["water-balance", "--config", "wb1/config.toml", "--out-dir", "wb2"]);
    assert_identical(
        dir,
        "wb1",
        "wb2",
        &["water_balance.json", "water_balance.csv"],
    );

    pass(
        10,
        "all seven subcommands rerun byte-identically from saved configs",
        started,
    );
}

#[test]
fn criterion_11_hargreaves_values() {
    let started = Instant::now();
    assert_eq!(hargreaves_pet_daily(20.0f64, 20.0, 30.0).unwrap(), 0.0);
    assert_eq!(hargreaves_pet_daily(-3.0f64, -3.0, 25.0).unwrap(), 0.0);
    let pet: f64 = hargreaves_pet_daily(30.0, 20.0, 30.0).unwrap();
    assert!((pet - 9.338).abs() < 1e-3, "PET {pet}");
    pass(11, "Hargreaves zero-range and hand-arithmetic values", started);
}
