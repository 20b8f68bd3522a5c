//! Subcommand implementations. Each one resolves its inputs (flags beat
//! config file beats defaults), runs the pipeline slice, and writes its
//! artifacts plus the resolved configuration into the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use hydroflux::abcd::{simulate as abcd_simulate, AbcdInit, AbcdParams};
use hydroflux::calibrate::{pso_calibrate, CalibrationCase, PsoConfig};
use hydroflux::metrics::{interval_coverage, summarize, MetricSummary};
use hydroflux::pet::load_daily_csv;
use hydroflux::piml::{predict_piml, train_piml as piml_train, water_balance as wb, EtSource};
use hydroflux::regress::{DesignMatrix, FeatureMatrix, RegressorKind, RegressorSpec};
use hydroflux::synth::{synth_generate, ClimateSpec, NoiseSpec, SynthSpec};
use hydroflux::timeseries::{
    emit_forcing_csv, load_forcing_csv, Column, CsvSchema, MonthRange, MonthStamp, MonthlyForcing,
    SplitSpec,
};
use hydroflux::Forcing64;

use crate::config::{build_id, pick, pick_opt, ExperimentConfig, FORMAT_VERSION};
use crate::io::{
    read_predictions, render_report_table, write_convergence_csv, write_json, write_plot_data,
    write_predictions, write_trace_csv, PlotBlock, PredictionSeries,
};
use crate::CliError;

pub struct Ctx {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub command: &'static str,
}

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct ForcingArgs {
    /// Monthly forcing CSV (`date,p_mm,tmax_c,tmin_c[,pet_mm][,...]`).
    #[arg(long)]
    forcing: Option<PathBuf>,

    /// Daily climate CSV (`date,p_mm,tmax_c,tmin_c[,ra_mj]`), aggregated to
    /// monthly with Hargreaves PET.
    #[arg(long, conflicts_with = "forcing")]
    daily: Option<PathBuf>,

    /// Basin-centroid latitude in degrees, used for the radiation term.
    #[arg(long)]
    latitude: Option<f64>,
}

fn load_forcing(args: &ForcingArgs, cfg: &mut ExperimentConfig) -> Result<Forcing64, CliError> {
    let forcing_path = pick_opt(args.forcing.clone(), cfg.data.forcing.clone());
    let daily_path = pick_opt(args.daily.clone(), cfg.data.daily.clone());
    let latitude = pick(args.latitude, cfg.data.latitude_deg, 22.92);
    cfg.data.latitude_deg = Some(latitude);
    match (forcing_path, daily_path) {
        (Some(path), _) => {
            cfg.data.forcing = Some(path.clone());
            cfg.data.daily = None;
            Ok(load_forcing_csv(&path, &CsvSchema::default())?)
        }
        (None, Some(path)) => {
            cfg.data.daily = Some(path.clone());
            let daily = load_daily_csv::<f64, _>(&path)?;
            Ok(hydroflux::pet::prepare_monthly_forcing(&daily, latitude)?)
        }
        (None, None) => Err(CliError::config(
            "no forcing input: pass --forcing (or --daily) or set [data] in the config",
        )),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Warm-up months, `YYYY-MM:YYYY-MM` (or `YYYY:YYYY`).
    #[arg(long)]
    warmup: Option<String>,
    /// Training window.
    #[arg(long)]
    train: Option<String>,
    /// Test window.
    #[arg(long)]
    test: Option<String>,
}

fn parse_range(text: &str) -> Result<MonthRange, CliError> {
    text.parse()
        .map_err(|e| CliError::config(format!("bad range `{text}`: {e}")))
}

fn resolve_split(args: &SplitArgs, cfg: &mut ExperimentConfig) -> Result<SplitSpec, CliError> {
    let warmup = pick_opt(args.warmup.clone(), cfg.split.warmup.clone());
    let train = pick_opt(args.train.clone(), cfg.split.train.clone())
        .ok_or_else(|| CliError::config("missing --train range"))?;
    let test = pick_opt(args.test.clone(), cfg.split.test.clone())
        .ok_or_else(|| CliError::config("missing --test range"))?;
    cfg.split.warmup = warmup.clone();
    cfg.split.train = Some(train.clone());
    cfg.split.test = Some(test.clone());
    let warmup = warmup.as_deref().map(parse_range).transpose()?;
    Ok(SplitSpec::new(warmup, parse_range(&train)?, parse_range(&test)?)?)
}

#[derive(Debug, Clone, Args)]
pub struct AbcdArgs {
    /// Parameter JSON written by `calibrate` (individual flags override).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    sm0: Option<f64>,
    #[arg(long)]
    gw0: Option<f64>,
}

/// Accepts any JSON carrying `params: {a,b,c,d}` and optionally
/// `init: {sm0,gw0}` — both `calibrate` outputs qualify.
#[derive(serde::Deserialize)]
struct ParamsFile {
    params: AbcdParams<f64>,
    init: Option<AbcdInit<f64>>,
}

fn resolve_abcd(
    args: &AbcdArgs,
    cfg: &mut ExperimentConfig,
) -> Result<(AbcdParams<f64>, AbcdInit<f64>), CliError> {
    let mut from_file: Option<ParamsFile> = None;
    let params_file = pick_opt(args.params.clone(), cfg.abcd.params_file.clone());
    if let Some(path) = &params_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        from_file = Some(
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("bad parameter file: {e}")))?,
        );
    }
    cfg.abcd.params_file = params_file;
    let file_params = from_file.as_ref().map(|r| r.params);
    let file_init = from_file.as_ref().and_then(|r| r.init);
    let defaults = AbcdInit::default();
    let a = pick(args.a, cfg.abcd.a, file_params.map_or(0.9, |p| p.a()));
    let b = pick(args.b, cfg.abcd.b, file_params.map_or(300.0, |p| p.b()));
    let c = pick(args.c, cfg.abcd.c, file_params.map_or(0.5, |p| p.c()));
    let d = pick(args.d, cfg.abcd.d, file_params.map_or(0.3, |p| p.d()));
    let sm0 = pick(args.sm0, cfg.abcd.sm0, file_init.map_or(defaults.sm0, |i| i.sm0));
    let gw0 = pick(args.gw0, cfg.abcd.gw0, file_init.map_or(defaults.gw0, |i| i.gw0));
    cfg.abcd.a = Some(a);
    cfg.abcd.b = Some(b);
    cfg.abcd.c = Some(c);
    cfg.abcd.d = Some(d);
    cfg.abcd.sm0 = Some(sm0);
    cfg.abcd.gw0 = Some(gw0);
    Ok((AbcdParams::new(a, b, c, d)?, AbcdInit::new(sm0, gw0)?))
}

fn parse_hyper_flags(flags: &[String]) -> Result<BTreeMap<String, f64>, CliError> {
    let mut out = BTreeMap::new();
    for flag in flags {
        let (key, value) = flag
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--hyper needs key=value, got `{flag}`")))?;
        let value: f64 = match value.trim() {
            "true" => 1.0,
            "false" => 0.0,
            v => v
                .parse()
                .map_err(|_| CliError::config(format!("bad hyperparameter value `{v}`")))?,
        };
        out.insert(key.trim().to_string(), value);
    }
    Ok(out)
}

fn build_spec(
    kind: RegressorKind,
    file_hyper: &BTreeMap<String, f64>,
    flag_hyper: &BTreeMap<String, f64>,
) -> Result<(RegressorSpec<f64>, BTreeMap<String, f64>), CliError> {
    let mut spec = RegressorSpec::default_for(kind);
    let mut merged = file_hyper.clone();
    merged.extend(flag_hyper.iter().map(|(k, v)| (k.clone(), *v)));
    for (key, value) in &merged {
        spec.set_hyper(key, *value).map_err(CliError::config)?;
    }
    Ok((spec, merged))
}

#[derive(Debug, Serialize)]
struct EvalJson {
    format_version: u32,
    variable: String,
    nse: f64,
    pbias: f64,
    rmse: f64,
    moriasi_class: hydroflux::metrics::MoriasiClass,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    interval_coverage: Option<f64>,
}

impl EvalJson {
    fn new(variable: &str, m: &MetricSummary<f64>, coverage: Option<f64>) -> Self {
        EvalJson {
            format_version: FORMAT_VERSION,
            variable: variable.to_string(),
            nse: m.nse,
            pbias: m.pbias,
            rmse: m.rmse,
            moriasi_class: m.moriasi_class,
            n: m.n,
            interval_coverage: coverage,
        }
    }
}

fn prediction_series(
    stamps: Vec<MonthStamp>,
    observed: Vec<f64>,
    pred: &hydroflux::regress::Prediction<f64>,
) -> PredictionSeries {
    let (lower, upper) = match pred.interval90() {
        Some((l, u)) => (Some(l), Some(u)),
        None => (None, None),
    };
    PredictionSeries {
        stamps,
        observed,
        predicted: pred.mean.clone(),
        lower,
        upper,
    }
}

fn plot_blocks<'a>(variable: &'a str, p: &'a PredictionSeries) -> Vec<PlotBlock<'a>> {
    let mut blocks = vec![
        PlotBlock {
            variable,
            series: "observed",
            stamps: &p.stamps,
            values: &p.observed,
        },
        PlotBlock {
            variable,
            series: "modeled",
            stamps: &p.stamps,
            values: &p.predicted,
        },
    ];
    if let (Some(lower), Some(upper)) = (&p.lower, &p.upper) {
        blocks.push(PlotBlock {
            variable,
            series: "lower90",
            stamps: &p.stamps,
            values: lower,
        });
        blocks.push(PlotBlock {
            variable,
            series: "upper90",
            stamps: &p.stamps,
            values: upper,
        });
    }
    blocks
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of months to generate (>= 48).
    #[arg(long)]
    months: Option<usize>,
    /// First month, `YYYY-MM`.
    #[arg(long)]
    start: Option<String>,
    #[command(flatten)]
    abcd: AbcdArgs,
    /// One observation-noise sd (mm) for et/sm/gw/q at once.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    noise_et: Option<f64>,
    #[arg(long)]
    noise_sm: Option<f64>,
    #[arg(long)]
    noise_gw: Option<f64>,
    #[arg(long)]
    noise_q: Option<f64>,
    #[arg(long)]
    latitude: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TruthFile<'a> {
    format_version: u32,
    build: String,
    spec: &'a SynthSpec<f64>,
}

pub fn synth(ctx: &Ctx, cfg: &mut ExperimentConfig, args: SynthArgs) -> Result<(), CliError> {
    let months = pick(args.months, cfg.synth.months, 396);
    let start_text = pick(args.start.clone(), cfg.synth.start.clone(), "1976-01".into());
    let start: MonthStamp = start_text
        .parse()
        .map_err(|e| CliError::config(format!("bad --start: {e}")))?;
    let reference = SynthSpec::<f64>::reference(ctx.seed);
    let a = pick(args.abcd.a, cfg.synth.a, reference.params.a());
    let b = pick(args.abcd.b, cfg.synth.b, reference.params.b());
    let c = pick(args.abcd.c, cfg.synth.c, reference.params.c());
    let d = pick(args.abcd.d, cfg.synth.d, reference.params.d());
    let sm0 = pick(args.abcd.sm0, cfg.synth.sm0, reference.init.sm0);
    let gw0 = pick(args.abcd.gw0, cfg.synth.gw0, reference.init.gw0);
    let base_noise = args.noise.unwrap_or(0.0);
    let noise = NoiseSpec {
        et_sd: pick(args.noise_et, cfg.synth.noise_et, base_noise),
        sm_sd: pick(args.noise_sm, cfg.synth.noise_sm, base_noise),
        gw_sd: pick(args.noise_gw, cfg.synth.noise_gw, base_noise),
        q_sd: pick(args.noise_q, cfg.synth.noise_q, base_noise),
    };
    let defaults = ClimateSpec::<f64>::default();
    let climate = ClimateSpec {
        p_mean_mm: pick(None, cfg.synth.p_mean, defaults.p_mean_mm),
        p_amplitude_mm: pick(None, cfg.synth.p_amplitude, defaults.p_amplitude_mm),
        p_lognorm_sigma: pick(None, cfg.synth.p_sigma, defaults.p_lognorm_sigma),
        t_mean_c: pick(None, cfg.synth.t_mean, defaults.t_mean_c),
        t_amplitude_c: pick(None, cfg.synth.t_amplitude, defaults.t_amplitude_c),
        latitude_deg: pick(args.latitude, cfg.synth.latitude_deg, defaults.latitude_deg),
        ..defaults
    };
    let spec = SynthSpec {
        months,
        seed: ctx.seed,
        start,
        params: AbcdParams::new(a, b, c, d)?,
        init: AbcdInit::new(sm0, gw0)?,
        climate,
        noise,
    };

    cfg.synth.months = Some(months);
    cfg.synth.start = Some(start_text);
    cfg.synth.a = Some(a);
    cfg.synth.b = Some(b);
    cfg.synth.c = Some(c);
    cfg.synth.d = Some(d);
    cfg.synth.sm0 = Some(sm0);
    cfg.synth.gw0 = Some(gw0);
    cfg.synth.noise_et = Some(noise.et_sd);
    cfg.synth.noise_sm = Some(noise.sm_sd);
    cfg.synth.noise_gw = Some(noise.gw_sd);
    cfg.synth.noise_q = Some(noise.q_sd);
    cfg.synth.p_mean = Some(climate.p_mean_mm);
    cfg.synth.p_amplitude = Some(climate.p_amplitude_mm);
    cfg.synth.p_sigma = Some(climate.p_lognorm_sigma);
    cfg.synth.t_mean = Some(climate.t_mean_c);
    cfg.synth.t_amplitude = Some(climate.t_amplitude_c);
    cfg.synth.latitude_deg = Some(climate.latitude_deg);
    cfg.write_resolved(ctx.command, ctx.seed, &ctx.out_dir)?;

    let out = synth_generate(&spec)?;
    emit_forcing_csv(ctx.out_dir.join("forcing.csv"), &out.forcing)?;
    write_json(
        &ctx.out_dir.join("truth.json"),
        &TruthFile {
            format_version: FORMAT_VERSION,
            build: build_id(),
            spec: &spec,
        },
    )?;
    println!(
        "synth: wrote {} months to {}",
        out.forcing.len(),
        ctx.out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    forcing: ForcingArgs,
    #[command(flatten)]
    abcd: AbcdArgs,
    /// Leading months flagged as warm-up in the trace.
    #[arg(long, default_value_t = 0)]
    warmup_months: usize,
}

pub fn simulate(ctx: &Ctx, cfg: &mut ExperimentConfig, args: SimulateArgs) -> Result<(), CliError> {
    let forcing = load_forcing(&args.forcing, cfg)?;
    let (params, init) = resolve_abcd(&args.abcd, cfg)?;
    cfg.write_resolved(ctx.command, ctx.seed, &ctx.out_dir)?;

    let trace = abcd_simulate(&params, &init, &forcing, args.warmup_months)?;
    write_trace_csv(&ctx.out_dir.join("trace.csv"), &trace)?;
    println!(
        "simulate: {} months ({} warm-up) -> {}",
        trace.len(),
        trace.warmup_len(),
        ctx.out_dir.join("trace.csv").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    forcing: ForcingArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Calibration targets: `q`, `q+et`, or `q+et+sm+gw`.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    swarm: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Also search the initial storages sm0/gw0.
    #[arg(long)]
    calibrate_init: bool,
}

#[derive(Debug, Serialize)]
struct BestParamsFile {
    format_version: u32,
    build: String,
    seed: u64,
    case: String,
    params: AbcdParams<f64>,
    init: AbcdInit<f64>,
    best_objective: f64,
}

pub fn calibrate(ctx: &Ctx, cfg: &mut ExperimentConfig, args: CalibrateArgs) -> Result<(), CliError> {
    let forcing = load_forcing(&args.forcing, cfg)?;
    let split = resolve_split(&args.split, cfg)?;
    let case_text = pick(args.case.clone(), cfg.pso.case.clone(), "q".into());
    let case: CalibrationCase<f64> = case_text.parse()?;

    let mut pso = PsoConfig::<f64>::default();
    pso.swarm_size = pick(args.swarm, cfg.pso.swarm, pso.swarm_size);
    pso.iterations = pick(args.iters, cfg.pso.iterations, pso.iterations);
    pso.inertia = pick(None, cfg.pso.inertia, pso.inertia);
    pso.cognitive = pick(None, cfg.pso.cognitive, pso.cognitive);
    pso.social = pick(None, cfg.pso.social, pso.social);
    pso.calibrate_init = args.calibrate_init || cfg.pso.calibrate_init.unwrap_or(false);
    pso.seed = ctx.seed;

    cfg.pso.case = Some(case_text.clone());
    cfg.pso.swarm = Some(pso.swarm_size);
    cfg.pso.iterations = Some(pso.iterations);
    cfg.pso.inertia = Some(pso.inertia);
    cfg.pso.cognitive = Some(pso.cognitive);
    cfg.pso.social = Some(pso.social);
    cfg.pso.calibrate_init = Some(pso.calibrate_init);
    cfg.write_resolved(ctx.command, ctx.seed, &ctx.out_dir)?;

    // warm-up + training window feed the objective; warm-up months are
    // simulated but never scored
    let calib_start = split
        .warmup
        .map_or(split.train.start, |w| w.start);
    let calib_span = forcing.slice(MonthRange::new(calib_start, split.train.end))?;
    let warmup_len = split.warmup.map_or(0, |w| w.len());
    let result = pso_calibrate(&calib_span, warmup_len, &case, &pso)?;

    write_json(
        &ctx.out_dir.join("best_params.json"),
        &BestParamsFile {
            format_version: FORMAT_VERSION,
            build: build_id(),
            seed: ctx.seed,
            case: case_text,
            params: result.params,
            init: result.init,
            best_objective: result.best_objective,
        },
    )?;
    write_convergence_csv(&ctx.out_dir.join("convergence.csv"), &result.convergence)?;

    // held-out skill per calibration target
    let trace = abcd_simulate(&result.params, &result.init, &forcing, 0)?;
    let offset = split.test.start.months_since(forcing.start()) as usize;
    let len = split.test.len();
    let mut report = BTreeMap::new();
    for (variable, _) in case.targets() {
        let obs = &forcing.column(variable.column()).unwrap()[offset..offset + len];
        let sim: Vec<f64> = trace.records()[offset..offset + len]
            .iter()
            .map(|r| match variable.name() {
                "q" => r.q,
                "et" => r.et,
                "sm" => r.sm,
                _ => r.gw,
            })
            .collect();
        report.insert(
            variable.name().to_string(),
            EvalJson::new(variable.name(), &summarize(obs, &sim)?, None),
        );
    }
    write_json(&ctx.out_dir.join("eval.json"), &report)?;
    println!(
        "calibrate: objective {:.6e}, a={:.4} b={:.2} c={:.4} d={:.4}",
        result.best_objective,
        result.params.a(),
        result.params.b(),
        result.params.c(),
        result.params.d()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train-ml
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrainMlArgs {
    #[command(flatten)]
    forcing: ForcingArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Regressor kind: ridge | lasso | gpr | svr | lstm.
    #[arg(long)]
    model: Option<String>,
    /// Covariates: `p,t_avg` or `p,et`.
    #[arg(long)]
    inputs: Option<String>,
    /// Hyperparameter override, `key=value`; repeatable.
    #[arg(long = "hyper")]
    hyper: Vec<String>,
}

fn ml_features(
    forcing: &MonthlyForcing<f64>,
    inputs: &str,
) -> Result<(FeatureMatrix<f64>, Vec<MonthStamp>), CliError> {
    let stamps: Vec<MonthStamp> = forcing.stamps().collect();
    let p = forcing.p().to_vec();
    let (names, columns): (Vec<String>, Vec<Vec<f64>>) = match inputs {
        "p,t_avg" => {
            let t_avg = forcing
                .tmax()
                .iter()
                .zip(forcing.tmin())
                .map(|(a, b)| (a + b) / 2.0)
                .collect();
            (vec!["p_mm".into(), "t_avg_c".into()], vec![p, t_avg])
        }
        "p,et" => {
            let et = forcing
                .column(Column::Et)
                .ok_or_else(|| CliError::data("inputs p,et need the et_mm column"))?
                .to_vec();
            (vec!["p_mm".into(), "et_mm".into()], vec![p, et])
        }
        other => {
            return Err(CliError::config(format!(
                "unknown --inputs `{other}` (expected `p,t_avg` or `p,et`)"
            )))
        }
    };
    Ok((FeatureMatrix::from_columns(names, &columns)?, stamps))
}

pub fn train_ml(ctx: &Ctx, cfg: &mut ExperimentConfig, args: TrainMlArgs) -> Result<(), CliError> {
    let forcing = load_forcing(&args.forcing, cfg)?;
    let split = resolve_split(&args.split, cfg)?;
    let kind_text = pick(args.model.clone(), cfg.ml.model.clone(), "ridge".into());
    let kind: RegressorKind = kind_text.parse().map_err(CliError::config)?;
    let inputs = pick(args.inputs.clone(), cfg.ml.inputs.clone(), "p,t_avg".into());
    let flag_hyper = parse_hyper_flags(&args.hyper)?;
    let (spec, merged_hyper) = build_spec(kind, &cfg.ml.hyper, &flag_hyper)?;

    cfg.ml.model = Some(kind_text);
    cfg.ml.inputs = Some(inputs.clone());
    cfg.ml.hyper = merged_hyper;
    cfg.write_resolved(ctx.command, ctx.seed, &ctx.out_dir)?;

    let train = forcing.slice(split.train)?;
    let test = forcing.slice(split.test)?;
    let q_train = train
        .column(Column::Q)
        .ok_or_else(|| CliError::data("training window lacks q_mm"))?
        .to_vec();
    let q_test = test
        .column(Column::Q)
        .ok_or_else(|| CliError::data("test window lacks q_mm"))?
        .to_vec();

    let (features, _) = ml_features(&train, &inputs)?;
    let design = DesignMatrix::new(features, q_train)?;
    let model = spec.fit(&design, ctx.seed)?;
    model.save(ctx.out_dir.join("model.json"))?;

    let (test_features, stamps) = ml_features(&test, &inputs)?;
    let pred = model.predict(&test_features)?;
    let series = prediction_series(stamps, q_test, &pred);
    write_predictions(&ctx.out_dir.join("predictions.csv"), &series)?;
    write_plot_data(&ctx.out_dir.join("plot_data.csv"), &plot_blocks("q", &series))?;

    let m = summarize(&series.observed, &series.predicted)?;
    let coverage = match (&series.lower, &series.upper) {
        (Some(l), Some(u)) => Some(interval_coverage(&series.observed, l, u)?),
        _ => None,
    };
    write_json(&ctx.out_dir.join("eval.json"), &EvalJson::new("q", &m, coverage))?;
    println!(
        "train-ml[{kind}]: test NSE {:.3}, PBIAS {:.2}%, RMSE {:.3} ({})",
        m.nse, m.pbias, m.rmse, m.moriasi_class
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train-piml
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrainPimlArgs {
    #[command(flatten)]
    forcing: ForcingArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Layer-1 (evapotranspiration) regressor kind.
    #[arg(long)]
    et_model: Option<String>,
    /// Layer-2 (streamflow) regressor kind.
    #[arg(long)]
    q_model: Option<String>,
    /// ET column used when training layer 2: `predicted` | `observed`.
    #[arg(long)]
    layer2_train_et: Option<String>,
    /// Storage covariates: `observed` | `simulated` (needs abcd params).
    #[arg(long)]
    states: Option<String>,
    #[command(flatten)]
    abcd: AbcdArgs,
    /// Layer-1 hyperparameter override, `key=value`; repeatable.
    #[arg(long = "et-hyper")]
    et_hyper: Vec<String>,
    /// Layer-2 hyperparameter override, `key=value`; repeatable.
    #[arg(long = "q-hyper")]
    q_hyper: Vec<String>,
}

#[derive(Debug, Serialize)]
struct PimlDiagnostics {
    format_version: u32,
    build: String,
    seed: u64,
    et_kind: RegressorKind,
    q_kind: RegressorKind,
    layer2_train_et: EtSource,
    states: String,
    train_months: usize,
    test_months: usize,
    train_nse_et: f64,
    train_nse_q: f64,
}

pub fn train_piml(ctx: &Ctx, cfg: &mut ExperimentConfig, args: TrainPimlArgs) -> Result<(), CliError> {
    let mut forcing = load_forcing(&args.forcing, cfg)?;
    let split = resolve_split(&args.split, cfg)?;
    let et_kind_text = pick(args.et_model.clone(), cfg.piml.et_model.clone(), "svr".into());
    let q_kind_text = pick(args.q_model.clone(), cfg.piml.q_model.clone(), "gpr".into());
    let et_kind: RegressorKind = et_kind_text.parse().map_err(CliError::config)?;
    let q_kind: RegressorKind = q_kind_text.parse().map_err(CliError::config)?;
    let (et_spec, et_merged) = build_spec(et_kind, &cfg.piml.et_hyper, &parse_hyper_flags(&args.et_hyper)?)?;
    let (q_spec, q_merged) = build_spec(q_kind, &cfg.piml.q_hyper, &parse_hyper_flags(&args.q_hyper)?)?;
    let wiring_text = pick(
        args.layer2_train_et.clone(),
        cfg.piml.layer2_train_et.clone(),
        "predicted".into(),
    );
    let layer2_train_et = match wiring_text.as_str() {
        "predicted" => EtSource::Predicted,
        "observed" => EtSource::Observed,
        other => {
            return Err(CliError::config(format!(
                "--layer2-train-et must be predicted|observed, got `{other}`"
            )))
        }
    };
    let states = pick(args.states.clone(), cfg.piml.states.clone(), "observed".into());
    match states.as_str() {
        "observed" => {}
        "simulated" => {
            // substitute the conceptual model's storages for the observed ones
            let (params, init) = resolve_abcd(&args.abcd, cfg)?;
            let trace = abcd_simulate(&params, &init, &forcing, 0)?;
            forcing = forcing
                .with_column(Column::Sm, trace.column(|r| r.sm))?
                .with_column(Column::Gw, trace.column(|r| r.gw))?;
        }
        other => {
            return Err(CliError::config(format!(
                "--states must be observed|simulated, got `{other}`"
            )))
        }
    }

    cfg.piml.et_model = Some(et_kind_text);
    cfg.piml.q_model = Some(q_kind_text);
    cfg.piml.layer2_train_et = Some(wiring_text);
    cfg.piml.states = Some(states.clone());
    cfg.piml.et_hyper = et_merged;
    cfg.piml.q_hyper = q_merged;
    cfg.write_resolved(ctx.command, ctx.seed, &ctx.out_dir)?;

    let train = forcing.slice(split.train)?;
    let model = piml_train(&train, &et_spec, &q_spec, ctx.seed, layer2_train_et)?;
    model.save(ctx.out_dir.join("model.json"))?;

    // in-sample diagnostics
    let train_pred = predict_piml(&model, &train)?;
    let train_nse_et = summarize(
        &train.column(Column::Et).unwrap()[1..],
        &train_pred.et.mean,
    )?
    .nse;
    let train_nse_q = summarize(&train.column(Column::Q).unwrap()[1..], &train_pred.q.mean)?.nse;

    // the month before the test window supplies the storage lag, so the
    // prediction covers every test month
    let context_start = split.test.start.add_months(-1);
    let test_span = if forcing.span().is_some_and(|s| s.contains(context_start)) {
        forcing.slice(MonthRange::new(context_start, split.test.end))?
    } else {
        forcing.slice(split.test)?
    };
    let pred = predict_piml(&model, &test_span)?;
    let offset = pred.stamps[0].months_since(forcing.start()) as usize;
    let n = pred.stamps.len();
    let obs_et = forcing.column(Column::Et).map(|v| v[offset..offset + n].to_vec());
    let obs_q = forcing
        .column(Column::Q)
        .map(|v| v[offset..offset + n].to_vec())
        .ok_or_else(|| CliError::data("test window lacks q_mm"))?;
    let obs_et =
        obs_et.ok_or_else(|| CliError::data("test window lacks et_mm for evaluation"))?;

    let et_series = prediction_series(pred.stamps.clone(), obs_et, &pred.et);
    let q_series = prediction_series(pred.stamps.clone(), obs_q, &pred.q);
    write_predictions(&ctx.out_dir.join("predictions_et.csv"), &et_series)?;
    write_predictions(&ctx.out_dir.join("predictions_q.csv"), &q_series)?;
    let mut blocks = plot_blocks("et", &et_series);
    blocks.extend(plot_blocks("q", &q_series));
    write_plot_data(&ctx.out_dir.join("plot_data.csv"), &blocks)?;

    let m_et = summarize(&et_series.observed, &et_series.predicted)?;
    let m_q = summarize(&q_series.observed, &q_series.predicted)?;
    let cov = |s: &PredictionSeries| match (&s.lower, &s.upper) {
        (Some(l), Some(u)) => interval_coverage(&s.observed, l, u).ok(),
        _ => None,
    };
    write_json(
        &ctx.out_dir.join("eval_et.json"),
        &EvalJson::new("et", &m_et, cov(&et_series)),
    )?;
    write_json(
        &ctx.out_dir.join("eval_q.json"),
        &EvalJson::new("q", &m_q, cov(&q_series)),
    )?;
    write_json(
        &ctx.out_dir.join("diagnostics.json"),
        &PimlDiagnostics {
            format_version: FORMAT_VERSION,
            build: build_id(),
            seed: ctx.seed,
            et_kind,
            q_kind,
            layer2_train_et,
            states,
            train_months: train.len(),
            test_months: n,
            train_nse_et,
            train_nse_q,
        },
    )?;
    println!(
        "train-piml[{et_kind}+{q_kind}]: test NSE(ET) {:.3} ({}), NSE(Q) {:.3} ({})",
        m_et.nse, m_et.moriasi_class, m_q.nse, m_q.moriasi_class
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Prediction CSV (`date,observed,predicted[,lower,upper]`).
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Variable label for the report.
    #[arg(long)]
    variable: Option<String>,
}

pub fn evaluate(ctx: &Ctx, cfg: &mut ExperimentConfig, args: EvaluateArgs) -> Result<(), CliError> {
    let path = pick_opt(args.predictions.clone(), cfg.evaluate.predictions.clone())
        .ok_or_else(|| CliError::config("missing --predictions"))?;
    let variable = pick(args.variable.clone(), cfg.evaluate.variable.clone(), "q".into());
    cfg.evaluate.predictions = Some(path.clone());
    cfg.evaluate.variable = Some(variable.clone());
    cfg.write_resolved(ctx.command, ctx.seed, &ctx.out_dir)?;

    let series = read_predictions(&path)?;
    let m = summarize(&series.observed, &series.predicted)?;
    let coverage = match (&series.lower, &series.upper) {
        (Some(l), Some(u)) => Some(interval_coverage(&series.observed, l, u)?),
        _ => None,
    };
    write_json(
        &ctx.out_dir.join("report.json"),
        &EvalJson::new(&variable, &m, coverage),
    )?;
    let table = render_report_table(&[(variable, m, coverage)]);
    std::fs::write(ctx.out_dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

// ---------------------------------------------------------------------------
// water-balance
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct WaterBalanceArgs {
    /// Observation CSV carrying p_mm, et_mm, q_mm.
    #[arg(long)]
    observations: Option<PathBuf>,
    /// Prediction set `label=et.csv,q.csv`; repeatable.
    #[arg(long = "pred")]
    predictions: Vec<String>,
    /// Accounting period `YYYY-MM:YYYY-MM` (default: the observation span).
    #[arg(long)]
    period: Option<String>,
    /// Storage change below which ΔSM+ΔGW is excluded from the deviation.
    #[arg(long)]
    storage_threshold: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dsm: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dgw: Option<f64>,
}

#[derive(Debug, Serialize)]
struct WaterBalanceRow {
    model: String,
    p_mm: f64,
    et_mm: f64,
    q_mm: f64,
    et_plus_q_mm: f64,
    pct_deviation: f64,
}

#[derive(Debug, Serialize)]
struct WaterBalanceFile {
    format_version: u32,
    build: String,
    period: String,
    dsm_mm: f64,
    dgw_mm: f64,
    storage_included: bool,
    rows: Vec<WaterBalanceRow>,
}

fn sum_over(series: &PredictionSeries, range: MonthRange) -> Result<f64, CliError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (stamp, v) in series.stamps.iter().zip(&series.predicted) {
        if range.contains(*stamp) {
            total += v;
            count += 1;
        }
    }
    if count != range.len() {
        return Err(CliError::data(format!(
            "prediction does not cover {range}: {count} of {} months",
            range.len()
        )));
    }
    Ok(total)
}

pub fn water_balance(
    ctx: &Ctx,
    cfg: &mut ExperimentConfig,
    args: WaterBalanceArgs,
) -> Result<(), CliError> {
    let obs_path = pick_opt(args.observations.clone(), cfg.water_balance.observations.clone())
        .ok_or_else(|| CliError::config("missing --observations"))?;
    let mut preds = args.predictions.clone();
    if preds.is_empty() {
        preds = cfg.water_balance.predictions.clone();
    }
    let threshold = pick(args.storage_threshold, cfg.water_balance.storage_threshold_mm, 1.0);
    let dsm = pick(args.dsm, cfg.water_balance.dsm, 0.0);
    let dgw = pick(args.dgw, cfg.water_balance.dgw, 0.0);

    let obs: Forcing64 = load_forcing_csv(&obs_path, &CsvSchema::default())?;
    let period = match pick_opt(args.period.clone(), cfg.water_balance.period.clone()) {
        Some(text) => parse_range(&text)?,
        None => obs
            .span()
            .ok_or_else(|| CliError::data("empty observation file"))?,
    };

    cfg.water_balance.observations = Some(obs_path);
    cfg.water_balance.predictions = preds.clone();
    cfg.water_balance.period = Some(period.to_string());
    cfg.water_balance.storage_threshold_mm = Some(threshold);
    cfg.water_balance.dsm = Some(dsm);
    cfg.water_balance.dgw = Some(dgw);
    cfg.write_resolved(ctx.command, ctx.seed, &ctx.out_dir)?;

    let offset = period.start.months_since(obs.start());
    if offset < 0 || period.end > obs.span().unwrap().end {
        return Err(CliError::data(format!(
            "period {period} outside observations"
        )));
    }
    let lo = offset as usize;
    let hi = lo + period.len();
    let total = |col: Column, name: &str| -> Result<f64, CliError> {
        Ok(obs
            .column(col)
            .ok_or_else(|| CliError::data(format!("observations lack {name}")))?[lo..hi]
            .iter()
            .sum())
    };
    let p_obs = total(Column::P, "p_mm")?;
    let et_obs = total(Column::Et, "et_mm")?;
    let q_obs = total(Column::Q, "q_mm")?;
    let benchmark = et_obs + q_obs;

    let mut rows = vec![WaterBalanceRow {
        model: "observed".into(),
        p_mm: p_obs,
        et_mm: et_obs,
        q_mm: q_obs,
        et_plus_q_mm: benchmark,
        pct_deviation: 0.0,
    }];
    let mut storage_included = false;
    for entry in &preds {
        let (label, files) = entry
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--pred needs label=et.csv,q.csv, got `{entry}`")))?;
        let (et_file, q_file) = files
            .split_once(',')
            .ok_or_else(|| CliError::config(format!("--pred needs two files, got `{files}`")))?;
        let et_total = sum_over(&read_predictions(Path::new(et_file))?, period)?;
        let q_total = sum_over(&read_predictions(Path::new(q_file))?, period)?;
        let report = wb(p_obs, et_total, q_total, benchmark, dsm, dgw, threshold)?;
        storage_included = report.storage_included;
        rows.push(WaterBalanceRow {
            model: label.to_string(),
            p_mm: p_obs,
            et_mm: et_total,
            q_mm: q_total,
            et_plus_q_mm: report.et_plus_q,
            pct_deviation: report.pct_deviation,
        });
    }

    let file = WaterBalanceFile {
        format_version: FORMAT_VERSION,
        build: build_id(),
        period: period.to_string(),
        dsm_mm: dsm,
        dgw_mm: dgw,
        storage_included,
        rows,
    };
    write_json(&ctx.out_dir.join("water_balance.json"), &file)?;

    let mut w = csv::Writer::from_path(ctx.out_dir.join("water_balance.csv"))?;
    w.write_record(["model", "p_mm", "et_mm", "q_mm", "et_plus_q_mm", "pct_deviation"])?;
    for r in &file.rows {
        w.write_record(&[
            r.model.clone(),
            format!("{:.3}", r.p_mm),
            format!("{:.3}", r.et_mm),
            format!("{:.3}", r.q_mm),
            format!("{:.3}", r.et_plus_q_mm),
            format!("{:.3}", r.pct_deviation),
        ])?;
    }
    w.flush()?;

    for r in &file.rows {
        println!(
            "{:<16} P {:>10.3}  ET {:>10.3}  Q {:>10.3}  ET+Q {:>10.3}  deviation {:>8.3}%",
            r.model, r.p_mm, r.et_mm, r.q_mm, r.et_plus_q_mm, r.pct_deviation
        );
    }
    Ok(())
}
