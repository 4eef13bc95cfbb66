use std::path::{Path, PathBuf};

use astral::certify::{bound_metrics, certify_direct, CertifyConfig};
use astral::nn::{
    train_operator, train_pinn, DenseNet, OperatorConfig, OperatorNet, OperatorSample, OptimizerState, Scheme,
    SplitMetrics, TrainConfig,
};
use astral::norms::energy_norm;
use astral::problems::gen_dataset;
use astral::solver::{reference_solution, solve, DEFAULT_REFERENCE_LEVEL};
use astral::{EllipticProblem, Family, PinnProblem, ScalarField, TensorGrid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::resolve;
use crate::container::{write_dataset, write_json, Checkpoint, Dataset, DatasetInfo};
use crate::table::{aggregate, read_report, sci, write_report, write_rows, ReportRow};
use crate::{CliError, Command, Common};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub family: String,
    #[serde(rename = "J")]
    pub level: u32,
    pub n: usize,
    pub seed: u64,
    /// Dimension of families that exist in both (the manufactured Poisson problem).
    pub dim: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { family: Family::SmoothO.tag().into(), level: 5, n: 8, seed: 0, dim: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Level of the fine grid the references are computed on.
    pub reference_level: u32,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { reference_level: DEFAULT_REFERENCE_LEVEL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyCommandConfig {
    /// Array holding the approximations to certify, or `fem` to solve on the dataset grid.
    pub approximation: String,
    /// Array holding the solutions errors are measured against.
    pub reference: String,
    pub certify: CertifyConfig,
}

impl Default for CertifyCommandConfig {
    fn default() -> Self {
        Self { approximation: "fem".into(), reference: "reference".into(), certify: CertifyConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PinnCommandConfig {
    pub problem_seed: u64,
    /// Level of the grid the coefficient is normalised on.
    #[serde(rename = "J")]
    pub level: u32,
    pub train: TrainConfig,
}

impl Default for PinnCommandConfig {
    fn default() -> Self {
        Self { problem_seed: 0, level: 5, train: TrainConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorCommandConfig {
    pub scheme: Scheme,
    /// Use only the first `n_train` training samples.
    pub n_train: Option<usize>,
    pub reference: String,
    pub operator: OperatorConfig,
}

impl Default for OperatorCommandConfig {
    fn default() -> Self {
        Self { scheme: Scheme::Unsupervised, n_train: None, reference: "reference".into(), operator: OperatorConfig::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub inputs: Vec<PathBuf>,
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen { common, family, level, n } => {
            setup(&common)?;
            let mut cfg: GenConfig = resolve(common.config.as_deref(), &common.set)?;
            if let Some(f) = family {
                cfg.family = f;
            }
            if let Some(j) = level {
                cfg.level = j;
            }
            if let Some(n) = n {
                cfg.n = n;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            gen(&cfg, required_out(&common)?)
        }
        Command::Solve { common, data } => {
            setup(&common)?;
            let cfg: SolveConfig = resolve(common.config.as_deref(), &common.set)?;
            solve_dataset(&cfg, &data, common.out.as_deref().unwrap_or(&data))
        }
        Command::Certify { common, data } => {
            setup(&common)?;
            let cfg: CertifyCommandConfig = resolve(common.config.as_deref(), &common.set)?;
            certify(&cfg, &data, required_out(&common)?)
        }
        Command::TrainPinn { common } => {
            setup(&common)?;
            let mut cfg: PinnCommandConfig = resolve(common.config.as_deref(), &common.set)?;
            if let Some(s) = common.seed {
                cfg.train.seed = s;
            }
            pinn(&cfg, required_out(&common)?)
        }
        Command::TrainOp { common, data, test } => {
            setup(&common)?;
            let mut cfg: OperatorCommandConfig = resolve(common.config.as_deref(), &common.set)?;
            if let Some(s) = common.seed {
                cfg.operator.seed = s;
            }
            operator(&cfg, &data, test.as_deref(), required_out(&common)?)
        }
        Command::Report { common, inputs } => {
            setup(&common)?;
            let mut cfg: ReportConfig = resolve(common.config.as_deref(), &common.set)?;
            cfg.inputs.extend(inputs);
            report(&cfg, required_out(&common)?)
        }
    }
}

fn setup(common: &Common) -> Result<(), CliError> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A global pool can only be installed once per process; later calls keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn required_out(common: &Common) -> Result<&Path, CliError> {
    common.out.as_deref().ok_or_else(|| CliError::Usage("this command needs --out".into()))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn echo_config(dir: &Path, command: &str, cfg: &impl Serialize) -> Result<(), CliError> {
    create_dir(dir)?;
    write_json(&dir.join(format!("config.{command}.json")), cfg)
}

fn parse_family(tag: &str) -> Result<Family, CliError> {
    tag.parse().map_err(|e: astral::Error| CliError::Usage(e.to_string()))
}

pub fn gen(cfg: &GenConfig, out: &Path) -> Result<(), CliError> {
    let family = parse_family(&cfg.family)?;
    let dim = family.dim().unwrap_or(cfg.dim);
    let grid = match dim {
        1 => TensorGrid::interval(cfg.level)?,
        2 => TensorGrid::square(cfg.level)?,
        d => return Err(CliError::Usage(format!("dimension {d} is not supported"))),
    };
    let problems = gen_dataset(family, cfg.seed, cfg.n, grid)?;
    let provenance = [("generator".to_string(), serde_json::to_value(cfg).expect("serialisable"))].into();
    write_dataset(out, family, grid, &problems, &DatasetInfo { master_seed: cfg.seed, provenance })?;
    echo_config(out, "gen", cfg)
}

fn stack(fields: &[ScalarField<f64>]) -> Vec<f64> {
    fields.iter().flat_map(|f| f.values().iter().copied()).collect()
}

pub fn solve_dataset(cfg: &SolveConfig, data: &Path, out: &Path) -> Result<(), CliError> {
    let mut ds = Dataset::open(data)?;
    let problems = ds.problems()?;
    let refs: Vec<ScalarField<f64>> = problems
        .par_iter()
        .map(|p| reference_solution(p, cfg.reference_level))
        .collect::<astral::Result<_>>()?;
    let shape = ds.field_shape()?;
    ds.append("reference", shape, &stack(&refs))?;
    echo_config(out, "solve", cfg)
}

fn reference_fields(ds: &Dataset, problems: &[EllipticProblem<f64>], name: &str) -> Result<Vec<ScalarField<f64>>, CliError> {
    if ds.has(name) {
        return ds.read_fields(name);
    }
    if problems.iter().all(|p| p.exact_solution.is_some()) {
        return Ok(problems.iter().map(|p| p.exact_solution.clone().expect("checked")).collect());
    }
    Err(CliError::Format(format!("dataset {} has no `{name}` array; run `solve` first", ds.dir.display())))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn certify(cfg: &CertifyCommandConfig, data: &Path, out: &Path) -> Result<(), CliError> {
    cfg.certify.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut ds = Dataset::open(data)?;
    let problems = ds.problems()?;
    let reference = reference_fields(&ds, &problems, &cfg.reference)?;
    let shape = ds.field_shape()?;
    let approx = if cfg.approximation == "fem" {
        let v: Vec<ScalarField<f64>> = problems.par_iter().map(solve).collect::<astral::Result<_>>()?;
        ds.append("fem_solution", shape.clone(), &stack(&v))?;
        v
    } else {
        ds.read_fields(&cfg.approximation)?
    };
    let outcomes = problems
        .par_iter()
        .zip(approx.par_iter())
        .map(|(p, v)| certify_direct(v, p, &cfg.certify).map_err(|f| CliError::from(f.error)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut errors = Vec::with_capacity(problems.len());
    let mut norms = Vec::with_capacity(problems.len());
    for ((p, v), u) in problems.iter().zip(&approx).zip(&reference) {
        errors.push(energy_norm(&v.sub(u), &p.a, &p.b_sq)?);
        norms.push(energy_norm(u, &p.a, &p.b_sq)?);
    }
    let bounds: Vec<f64> = outcomes.iter().map(|o| o.report.bound()).collect();
    let dim = ds.manifest.dim;
    let mut y_shape = vec![problems.len(), dim];
    y_shape.extend_from_slice(&shape[1..]);
    let ys: Vec<f64> = outcomes.iter().flat_map(|o| o.certificate.y.flatten()).collect();
    ds.append("certificate_y", y_shape, &ys)?;
    let betas: Vec<f64> = outcomes.iter().map(|o| o.certificate.beta).collect();
    ds.append("certificate_beta", vec![problems.len()], &betas)?;

    create_dir(out)?;
    let rows: Vec<Vec<String>> = (0..problems.len())
        .map(|i| {
            vec![
                i.to_string(),
                sci(errors[i]),
                sci(bounds[i]),
                sci(bounds[i] / errors[i]),
                sci(betas[i]),
                sci(norms[i]),
                outcomes[i].trace.len().to_string(),
            ]
        })
        .collect();
    write_rows(&out.join("certify.csv"), &["sample", "error", "bound", "ratio", "beta", "norm", "iterations"], &rows)?;
    let (rub, corr) = match bound_metrics(&errors, &bounds) {
        Ok(m) => (Some(m.mean_ratio), m.correlation),
        Err(_) => (None, None),
    };
    let row = ReportRow {
        equation: ds.manifest.family.clone(),
        n_train: 0,
        e_test: mean(errors.iter().zip(&norms).map(|(e, n)| e / n)),
        eub_test: mean(bounds.iter().zip(&norms).map(|(b, n)| b / n)),
        rub_test: rub,
        corr_test: corr,
        ..Default::default()
    };
    write_report(&out.join("metrics.csv"), &[row])?;
    echo_config(out, "certify", cfg)
}

fn put_state(ck: &mut Checkpoint, name: &str, state: &OptimizerState<f64>) -> Result<(), CliError> {
    ck.put(&format!("{name}.m"), &state.m)?;
    ck.put(&format!("{name}.v"), &state.v)
}

pub fn pinn(cfg: &PinnCommandConfig, out: &Path) -> Result<(), CliError> {
    cfg.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let grid = TensorGrid::square(cfg.level)?;
    let problem = PinnProblem::sample(cfg.problem_seed, &grid)?;
    create_dir(out)?;
    echo_config(out, "train-pinn", cfg)?;
    let astral_kind = cfg.train.loss.is_astral();
    let write_trace = |trace: &[astral::nn::TraceEntry<f64>]| {
        let rows: Vec<Vec<String>> = trace
            .iter()
            .map(|e| {
                let bound = if astral_kind { sci(e.loss.sqrt()) } else { String::new() };
                vec![e.epoch.to_string(), sci(e.loss), bound, sci(e.energy_error), sci(e.relative_error)]
            })
            .collect();
        write_rows(&out.join("trace.csv"), &["epoch", "loss", "bound", "energy_error", "relative_error"], &rows)
    };
    let run = match train_pinn(&problem, &cfg.train) {
        Ok(r) => r,
        Err(f) => {
            write_trace(&f.trace)?;
            return Err(f.error.into());
        }
    };
    write_trace(&run.trace)?;

    let last = run.trace.last().expect("training logs its final epoch");
    let norm = (last.relative_error > 0.0).then(|| last.energy_error / last.relative_error);
    let bound = astral_kind.then(|| last.loss.sqrt());
    let row = ReportRow {
        equation: format!("pinn_{}", cfg.train.loss.tag()),
        n_train: 0,
        e_train: Some(last.relative_error),
        eub_train: bound.zip(norm).map(|(b, n)| b / n),
        rub_train: bound.map(|b| b / last.energy_error),
        ..Default::default()
    };
    write_report(&out.join("metrics.csv"), &[row])?;

    let mut ck = Checkpoint::create(&out.join("checkpoint"), "pinn", serde_json::to_value(cfg).expect("serialisable"))?;
    let nets: Vec<(String, &DenseNet<f64>)> = std::iter::once(("solution".to_string(), &run.solution))
        .chain(run.flux.iter().enumerate().map(|(i, n)| (format!("flux_{}", i + 1), n)))
        .collect();
    let mut meta = Vec::new();
    for ((name, net), state) in nets.iter().zip(&run.optimizer) {
        ck.put(&format!("{name}.params"), net.params())?;
        ck.put(&format!("{name}.frequencies"), net.frequencies())?;
        put_state(&mut ck, name, state)?;
        meta.push(json!({"name": name, "spec": net.spec(), "step": state.step}));
    }
    ck.manifest.meta = json!({ "networks": meta });
    ck.finish()
}

/// Networks restored from a `train-pinn` checkpoint, in the order solution, flux.
pub fn load_pinn_checkpoint(dir: &Path) -> Result<Vec<(DenseNet<f64>, OptimizerState<f64>)>, CliError> {
    let ck = Checkpoint::open(dir)?;
    let nets = ck.manifest.meta["networks"].as_array().cloned().unwrap_or_default();
    nets.iter()
        .map(|m| {
            let bad = || CliError::Format(format!("{}: malformed network entry", dir.display()));
            let name = m["name"].as_str().ok_or_else(bad)?;
            let spec = serde_json::from_value(m["spec"].clone()).map_err(|_| bad())?;
            let net = DenseNet::from_parts(spec, ck.get(&format!("{name}.frequencies"))?, ck.get(&format!("{name}.params"))?)?;
            let state = OptimizerState {
                step: m["step"].as_u64().ok_or_else(bad)?,
                m: ck.get(&format!("{name}.m"))?,
                v: ck.get(&format!("{name}.v"))?,
            };
            Ok((net, state))
        })
        .collect()
}

fn samples(ds: &Dataset, reference: &str) -> Result<Vec<OperatorSample<f64>>, CliError> {
    let problems = ds.problems()?;
    let refs = match reference_fields(ds, &problems, reference) {
        Ok(r) => r.into_iter().map(Some).collect(),
        Err(_) => vec![None; problems.len()],
    };
    Ok(problems.into_iter().zip(refs).map(|(problem, reference)| OperatorSample { problem, reference }).collect())
}

fn split_columns(m: &Option<SplitMetrics<f64>>) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    match m {
        Some(m) => (Some(m.mean_relative_error), m.mean_relative_bound, m.mean_ratio, m.correlation),
        None => (None, None, None, None),
    }
}

pub fn operator(cfg: &OperatorCommandConfig, data: &Path, test: Option<&Path>, out: &Path) -> Result<(), CliError> {
    cfg.operator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let train_ds = Dataset::open(data)?;
    let mut train = samples(&train_ds, &cfg.reference)?;
    if let Some(n) = cfg.n_train {
        if n > train.len() {
            return Err(CliError::Usage(format!("n_train = {n} exceeds the {} training samples", train.len())));
        }
        train.truncate(n);
    }
    let test = match test {
        Some(t) => samples(&Dataset::open(t)?, &cfg.reference)?,
        None => Vec::new(),
    };
    create_dir(out)?;
    echo_config(out, "train-op", cfg)?;
    let write_trace = |loss: &[f64], cert: &[f64]| {
        let rows: Vec<Vec<String>> = (0..loss.len().max(cert.len()))
            .map(|e| {
                let at = |v: &[f64]| v.get(e).map(|&x| sci(x)).unwrap_or_default();
                vec![e.to_string(), at(loss), at(cert)]
            })
            .collect();
        write_rows(&out.join("trace.csv"), &["epoch", "loss", "certificate_loss"], &rows)
    };
    let run = match train_operator(&train, &test, cfg.scheme, &cfg.operator) {
        Ok(r) => r,
        Err(f) => {
            write_trace(&f.loss_trace, &[])?;
            return Err(f.error.into());
        }
    };
    write_trace(&run.loss_trace, &run.certificate_trace)?;

    let (e_train, eub_train, rub_train, corr_train) = split_columns(&run.metrics.train);
    let (e_test, eub_test, rub_test, corr_test) = split_columns(&run.metrics.test);
    let row = ReportRow {
        equation: train_ds.manifest.family.clone(),
        n_train: train.len(),
        e_train,
        e_test,
        eub_train,
        eub_test,
        rub_train,
        rub_test,
        corr_train,
        corr_test,
    };
    write_report(&out.join("metrics.csv"), &[row])?;

    let mut ck = Checkpoint::create(&out.join("checkpoint"), "operator", serde_json::to_value(cfg).expect("serialisable"))?;
    let nets: Vec<(&str, &OperatorNet<f64>)> =
        std::iter::once(("solution", &run.solution)).chain(run.certificate.as_ref().map(|c| ("certificate", c))).collect();
    let mut meta = Vec::new();
    for ((name, net), state) in nets.iter().zip(&run.optimizer) {
        ck.put(&format!("{name}.params"), net.params())?;
        ck.put(&format!("{name}.shift"), net.shift())?;
        ck.put(&format!("{name}.scale"), net.scale())?;
        put_state(&mut ck, name, state)?;
        meta.push(json!({"name": name, "spec": net.spec(), "step": state.step}));
    }
    ck.manifest.meta = json!({ "networks": meta, "scheme": cfg.scheme, "beta": run.beta, "mode": run.mode });
    ck.finish()
}

/// Networks restored from a `train-op` checkpoint, in the order solution, certificate.
pub fn load_operator_checkpoint(dir: &Path) -> Result<Vec<(OperatorNet<f64>, OptimizerState<f64>)>, CliError> {
    let ck = Checkpoint::open(dir)?;
    let nets = ck.manifest.meta["networks"].as_array().cloned().unwrap_or_default();
    nets.iter()
        .map(|m| {
            let bad = || CliError::Format(format!("{}: malformed network entry", dir.display()));
            let name = m["name"].as_str().ok_or_else(bad)?;
            let spec = serde_json::from_value(m["spec"].clone()).map_err(|_| bad())?;
            let net = OperatorNet::from_parts(
                spec,
                ck.get(&format!("{name}.shift"))?,
                ck.get(&format!("{name}.scale"))?,
                ck.get(&format!("{name}.params"))?,
            )?;
            let state = OptimizerState {
                step: m["step"].as_u64().ok_or_else(bad)?,
                m: ck.get(&format!("{name}.m"))?,
                v: ck.get(&format!("{name}.v"))?,
            };
            Ok((net, state))
        })
        .collect()
}

pub fn report(cfg: &ReportConfig, out: &Path) -> Result<(), CliError> {
    if cfg.inputs.is_empty() {
        return Err(CliError::Usage("report needs at least one metrics file".into()));
    }
    let mut rows = Vec::new();
    for path in &cfg.inputs {
        rows.extend(read_report(path)?);
    }
    create_dir(out)?;
    write_report(&out.join("report.csv"), &aggregate(rows))?;
    echo_config(out, "report", cfg)
}
