use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::{OperatorNet, OperatorSpec};
use super::optim::{OptimizerConfig, OptimizerState, Schedule};
use crate::certify::{certify_direct, pearson, tight_beta, CertifyConfig};
use crate::field::{ScalarField, VectorField};
use crate::majorant::{astral_elliptic_grad, residual_loss_grad, AstralSplit, Certificate, ConstantMode};
use crate::norms::{energy_norm, l2_norm};
use crate::problems::EllipticProblem;
use crate::real::pairwise_sum;
use crate::rng::{role, stream_key, substream};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Regression on reference solutions, direct certification, then regression on certificates.
    Supervised,
    /// Joint solution and flux prediction trained on the boundary-penalised majorant.
    Unsupervised,
    Pino,
}

impl Scheme {
    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Supervised => "supervised",
            Scheme::Unsupervised => "unsupervised",
            Scheme::Pino => "pino",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supervised" => Ok(Scheme::Supervised),
            "unsupervised" => Ok(Scheme::Unsupervised),
            "pino" => Ok(Scheme::Pino),
            _ => Err(Error::param(format!("unknown training scheme `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub schedule: Schedule,
    pub width: usize,
    pub layers: usize,
    pub seed: u64,
    /// Boundary weight of the unsupervised loss.
    pub lambda: f64,
    /// Initial (or fixed) `beta` of the unsupervised loss.
    pub beta: f64,
    /// Train `log beta` as an extra parameter instead of keeping it fixed.
    pub learn_beta: bool,
    /// Residual and boundary weights of the PINO loss.
    pub alpha: f64,
    pub gamma: f64,
    pub mode: ConstantMode,
    pub certify: CertifyConfig,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 8,
            optimizer: OptimizerConfig::adam(2e-3, 1e-2),
            schedule: Schedule { factor: 0.5, period: 50 },
            width: 64,
            layers: 4,
            seed: 0,
            lambda: 1.0,
            beta: 1.0,
            learn_beta: false,
            alpha: 1.0,
            gamma: 1.0,
            mode: ConstantMode::Safe,
            certify: CertifyConfig::default(),
        }
    }
}

impl OperatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.schedule.validate()?;
        self.certify.validate()?;
        if self.batch_size == 0 || self.width == 0 {
            return Err(Error::param("batch size and width must be positive"));
        }
        if !(self.beta > 0.0) || self.lambda < 0.0 || self.alpha < 0.0 || self.gamma < 0.0 {
            return Err(Error::param("beta must be positive and loss weights non-negative"));
        }
        Ok(())
    }
}

/// A problem together with its reference solution on the same grid.
#[derive(Clone, Debug)]
pub struct OperatorSample<T> {
    pub problem: EllipticProblem<T>,
    pub reference: Option<ScalarField<T>>,
}

/// Per-split quality of predicted solutions and bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitMetrics<T> {
    /// `|||v - u|||` per sample.
    pub errors: Vec<T>,
    /// `|||u|||` per sample.
    pub norms: Vec<T>,
    /// Square root of the majorant per sample.
    pub bounds: Option<Vec<T>>,
    pub mean_relative_error: T,
    pub mean_relative_bound: Option<T>,
    pub mean_ratio: Option<T>,
    pub correlation: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorMetrics<T> {
    pub train: Option<SplitMetrics<T>>,
    pub test: Option<SplitMetrics<T>>,
}

#[derive(Clone, Debug)]
pub struct Prediction<T> {
    /// Predicted solution with its boundary values set to zero.
    pub solution: ScalarField<T>,
    pub certificate: Option<Certificate<T>>,
}

#[derive(Clone, Debug)]
pub struct OperatorRun<T> {
    pub scheme: Scheme,
    pub solution: OperatorNet<T>,
    /// Certificate network of the supervised scheme.
    pub certificate: Option<OperatorNet<T>>,
    /// `beta` used by the unsupervised loss at the end of training.
    pub beta: T,
    pub mode: ConstantMode,
    /// Mean loss per epoch of the solution network.
    pub loss_trace: Vec<T>,
    /// Mean loss per epoch of the certificate network.
    pub certificate_trace: Vec<T>,
    /// Directly optimised certificates of the training samples (supervised scheme).
    pub direct: Option<Vec<Certificate<T>>>,
    /// Final optimizer state of the solution network, then of the certificate network.
    pub optimizer: Vec<OptimizerState<T>>,
    pub metrics: OperatorMetrics<T>,
}

#[derive(Debug)]
pub struct OperatorFailure<T> {
    pub error: Error,
    pub loss_trace: Vec<T>,
}

impl<T> From<Error> for OperatorFailure<T> {
    fn from(error: Error) -> Self {
        Self { error, loss_trace: Vec::new() }
    }
}

impl<T> From<OperatorFailure<T>> for Error {
    fn from(f: OperatorFailure<T>) -> Self {
        f.error
    }
}

pub fn input_channels(dim: usize) -> usize {
    if dim == 1 {
        3
    } else {
        5
    }
}

/// Node-major coefficient channels `a11 [a12 a22] b^2 f`.
pub fn operator_inputs<T: Real>(problem: &EllipticProblem<T>) -> Vec<T> {
    let n = problem.grid().len();
    let mut fields: Vec<&[T]> = vec![problem.a.a11().values()];
    if let (Some(a12), Some(a22)) = (problem.a.a12(), problem.a.a22()) {
        fields.push(a12.values());
        fields.push(a22.values());
    }
    fields.push(problem.b_sq.values());
    fields.push(problem.f.values());
    let mut out = Vec::with_capacity(n * fields.len());
    for k in 0..n {
        out.extend(fields.iter().map(|f| f[k]));
    }
    out
}

fn channel<T: Real>(out: &[T], channels: usize, c: usize) -> Vec<T> {
    out.iter().skip(c).step_by(channels).copied().collect()
}

fn zero_boundary<T: Real>(values: &mut [T], boundary: &[usize]) {
    for &b in boundary {
        values[b] = T::zero();
    }
}

fn sqrt_adjoint<T: Real>(s: T) -> T {
    if s > T::zero() {
        T::one() / (T::lit(2.0) * s.sqrt())
    } else {
        T::zero()
    }
}

/// `sqrt(mean of boundary v^2)` and its gradient.
fn boundary_rms_grad<T: Real>(v: &[T], boundary: &[usize]) -> (T, Vec<T>) {
    let nb = T::from_usize_lossy(boundary.len());
    let sq: Vec<T> = boundary.iter().map(|&b| v[b] * v[b]).collect();
    let rms = (pairwise_sum(&sq) / nb).sqrt();
    let mut g = vec![T::zero(); v.len()];
    if rms > T::zero() {
        for &b in boundary {
            g[b] = v[b] / (nb * rms);
        }
    }
    (rms, g)
}

/// Unsupervised loss `sqrt(majorant(P v, y, beta)) + lambda rms(v on the boundary)`
/// where `P` zeroes the boundary values, with adjoints for the packed output and `beta`.
pub fn unsupervised_sample_loss<T: Real>(
    out: &[T],
    problem: &EllipticProblem<T>,
    beta: T,
    lambda: T,
    mode: ConstantMode,
) -> Result<(T, Vec<T>, T)> {
    let grid = *problem.grid();
    let d = problem.dim();
    let co = 1 + d;
    let boundary = grid.boundary_nodes();
    let raw = channel(out, co, 0);
    let mut v = raw.clone();
    zero_boundary(&mut v, &boundary);
    let v = ScalarField::new(grid, v)?;
    let y = VectorField::new((0..d).map(|i| ScalarField::new(grid, channel(out, co, 1 + i))).collect::<Result<_>>()?)?;
    let cert = Certificate::new(y, beta)?;
    let (report, grad) = astral_elliptic_grad(&v, &cert, problem, mode)?;
    let k = sqrt_adjoint(report.total);
    let (rms, grms) = boundary_rms_grad(&raw, &boundary);
    let mut gv: Vec<T> = grad.v.values().iter().map(|&g| k * g).collect();
    zero_boundary(&mut gv, &boundary);
    let mut adj = vec![T::zero(); out.len()];
    for n in 0..grid.len() {
        adj[n * co] = gv[n] + lambda * grms[n];
        for i in 0..d {
            adj[n * co + 1 + i] = k * grad.y.component(i).values()[n];
        }
    }
    Ok((report.total.sqrt() + lambda * rms, adj, k * grad.beta))
}

/// PINO loss of a raw prediction and its gradient.
pub fn pino_sample_loss<T: Real>(
    out: &[T],
    reference: &ScalarField<T>,
    problem: &EllipticProblem<T>,
    alpha: T,
    gamma: T,
) -> Result<(T, Vec<T>)> {
    let grid = *problem.grid();
    let v = ScalarField::new(grid, out.to_vec())?;
    let e = v.sub(reference);
    let w = grid.trapezoid_weights();
    let data = l2_norm(&e);
    let mut g: Vec<T> = (0..grid.len()).map(|n| if data > T::zero() { w[n] * e.values()[n] / data } else { T::zero() }).collect();
    let mut loss = data;
    if alpha > T::zero() {
        let (res, gres) = residual_loss_grad(&v, problem)?;
        let k = alpha * sqrt_adjoint(res);
        loss += alpha * res.sqrt();
        g.iter_mut().zip(gres.values()).for_each(|(a, &b)| *a += k * b);
    }
    let (rms, grms) = boundary_rms_grad(out, &grid.boundary_nodes());
    loss += gamma * rms;
    g.iter_mut().zip(grms).for_each(|(a, b)| *a += gamma * b);
    Ok((loss, g))
}

/// Relative squared L2 misfit `sum_c int (x_c - t_c)^2 / sum_c int t_c^2` over packed channels.
pub fn regression_sample_loss<T: Real>(out: &[T], target: &[T], weights: &[T], channels: usize) -> Result<(T, Vec<T>)> {
    if out.len() != target.len() || out.len() != weights.len() * channels {
        return Err(Error::data("regression target does not match the prediction"));
    }
    let w = |k: usize| weights[k / channels];
    let norm = pairwise_sum(&(0..out.len()).map(|k| w(k) * target[k] * target[k]).collect::<Vec<_>>())
        .max(T::min_positive_value());
    let two = T::lit(2.0);
    let loss = pairwise_sum(&(0..out.len()).map(|k| w(k) * (out[k] - target[k]).powi(2)).collect::<Vec<_>>()) / norm;
    let g = (0..out.len()).map(|k| two * w(k) * (out[k] - target[k]) / norm).collect();
    Ok((loss, g))
}

type SampleLoss<'a, T> = dyn Fn(usize, &[T], T) -> Result<(T, Vec<T>, T)> + Sync + 'a;

/// Mini-batch training of one operator. `loss(i, output, beta)` returns the sample
/// loss, the output adjoint and the derivative with respect to `beta`.
fn fit<T: Real>(
    net: &mut OperatorNet<T>,
    inputs: &[Vec<T>],
    config: &OperatorConfig,
    stream: u64,
    log_beta: &mut Option<T>,
    loss: &SampleLoss<'_, T>,
) -> std::result::Result<(Vec<T>, OptimizerState<T>), OperatorFailure<T>> {
    let mut state = OptimizerState::new(net.num_params());
    let mut beta_state = OptimizerState::new(1);
    let mut trace = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for epoch in 0..config.epochs {
        let lr = config.schedule.rate(config.optimizer.lr(), epoch);
        order.sort_unstable();
        order.shuffle(&mut substream(&[config.seed, stream, role::SHUFFLE, epoch as u64]));
        let mut epoch_losses = Vec::with_capacity(inputs.len());
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&[T]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
            let (outs, tape) = net.forward_tape(&batch).map_err(|e| OperatorFailure { error: e, loss_trace: trace.clone() })?;
            let beta = log_beta.map_or(T::lit(config.beta), |lb| lb.exp());
            let results: Vec<Result<(T, Vec<T>, T)>> =
                chunk.par_iter().zip(outs.par_iter()).map(|(&i, out)| loss(i, out, beta)).collect();
            let mut adjoints = Vec::with_capacity(chunk.len());
            let mut dbeta = Vec::with_capacity(chunk.len());
            let inv = T::one() / T::from_usize_lossy(chunk.len());
            for r in results {
                let (l, adj, db) = r.map_err(|e| OperatorFailure { error: e, loss_trace: trace.clone() })?;
                if !l.is_finite() {
                    return Err(OperatorFailure { error: Error::Divergence { epoch }, loss_trace: trace });
                }
                epoch_losses.push(l);
                adjoints.push(adj.into_iter().map(|a| a * inv).collect::<Vec<_>>());
                dbeta.push(db * inv);
            }
            let grads = net.backward(&tape, &adjoints).map_err(|e| OperatorFailure { error: e, loss_trace: trace.clone() })?;
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(OperatorFailure { error: Error::Divergence { epoch }, loss_trace: trace });
            }
            state
                .step(net.params_mut(), &grads, &config.optimizer, lr)
                .map_err(|e| OperatorFailure { error: e, loss_trace: trace.clone() })?;
            if let Some(lb) = log_beta.as_mut() {
                let g = pairwise_sum(&dbeta) * lb.exp();
                let mut p = [*lb];
                beta_state.step(&mut p, &[g], &config.optimizer, lr).map_err(|e| OperatorFailure { error: e, loss_trace: trace.clone() })?;
                *lb = p[0];
            }
        }
        trace.push(pairwise_sum(&epoch_losses) / T::from_usize_lossy(epoch_losses.len().max(1)));
    }
    Ok((trace, state))
}

fn check_dataset<T: Real>(train: &[OperatorSample<T>], test: &[OperatorSample<T>], need_reference: bool) -> Result<()> {
    let first = train.first().ok_or_else(|| Error::data("empty training set"))?;
    let grid = *first.problem.grid();
    for s in train.iter().chain(test) {
        if *s.problem.grid() != grid {
            return Err(Error::data("all samples must share one grid"));
        }
        if let Some(r) = &s.reference {
            r.check_grid(&grid)?;
        }
    }
    if need_reference && train.iter().any(|s| s.reference.is_none()) {
        return Err(Error::data("this scheme needs reference solutions for every training sample"));
    }
    Ok(())
}

fn spec_for<T: Real>(problem: &EllipticProblem<T>, in_channels: usize, out_channels: usize, config: &OperatorConfig) -> OperatorSpec {
    OperatorSpec {
        dim: problem.dim(),
        nodes: problem.grid().nodes_per_axis(),
        in_channels,
        out_channels,
        width: config.width,
        layers: config.layers,
    }
}

fn with_solution<T: Real>(input: &[T], v: &[T], channels: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(input.len() + v.len());
    for (k, &vk) in v.iter().enumerate() {
        out.extend_from_slice(&input[k * channels..(k + 1) * channels]);
        out.push(vk);
    }
    out
}

impl<T: Real> OperatorRun<T> {
    /// Admissible solutions and, when available, certificates with the tightest `beta`.
    pub fn predict(&self, problems: &[EllipticProblem<T>]) -> Result<Vec<Prediction<T>>> {
        if problems.is_empty() {
            return Ok(Vec::new());
        }
        let inputs: Vec<Vec<T>> = problems.iter().map(operator_inputs).collect();
        let refs: Vec<&[T]> = inputs.iter().map(|x| x.as_slice()).collect();
        let outs = self.solution.forward(&refs)?;
        let co = self.solution.spec().out_channels;
        let mut solutions = Vec::with_capacity(problems.len());
        for (p, out) in problems.iter().zip(&outs) {
            let mut v = channel(out, co, 0);
            zero_boundary(&mut v, &p.grid().boundary_nodes());
            solutions.push(ScalarField::new(*p.grid(), v)?);
        }
        let fluxes: Option<Vec<VectorField<T>>> = match (self.scheme, &self.certificate) {
            (Scheme::Unsupervised, _) => Some(
                problems
                    .iter()
                    .zip(&outs)
                    .map(|(p, out)| {
                        VectorField::new((0..p.dim()).map(|i| ScalarField::new(*p.grid(), channel(out, co, 1 + i))).collect::<Result<_>>()?)
                    })
                    .collect::<Result<_>>()?,
            ),
            (Scheme::Supervised, Some(cnet)) => {
                let ci = self.solution.spec().in_channels;
                let aug: Vec<Vec<T>> =
                    inputs.iter().zip(&solutions).map(|(x, v)| with_solution(x, v.values(), ci)).collect();
                let refs: Vec<&[T]> = aug.iter().map(|x| x.as_slice()).collect();
                let yo = cnet.forward(&refs)?;
                let d = problems[0].dim();
                Some(
                    problems
                        .iter()
                        .zip(&yo)
                        .map(|(p, out)| {
                            VectorField::new((0..d).map(|i| ScalarField::new(*p.grid(), channel(out, d, i))).collect::<Result<_>>()?)
                        })
                        .collect::<Result<_>>()?,
                )
            }
            _ => None,
        };
        let mut preds = Vec::with_capacity(problems.len());
        for (k, (p, v)) in problems.iter().zip(solutions).enumerate() {
            let certificate = match &fluxes {
                Some(ys) => {
                    let split = AstralSplit::new(&v, &ys[k], p, self.mode)?;
                    let beta = tight_beta(&split, p, crate::certify::BetaSolver::ClosedForm);
                    Some(Certificate::new(ys[k].clone(), beta)?)
                }
                None => None,
            };
            preds.push(Prediction { solution: v, certificate });
        }
        Ok(preds)
    }

    /// Errors against references and bounds of the predicted certificates.
    pub fn evaluate(&self, samples: &[OperatorSample<T>]) -> Result<Option<SplitMetrics<T>>> {
        if samples.is_empty() || samples.iter().any(|s| s.reference.is_none()) {
            return Ok(None);
        }
        let problems: Vec<EllipticProblem<T>> = samples.iter().map(|s| s.problem.clone()).collect();
        let preds = self.predict(&problems)?;
        split_metrics(samples, &preds, self.mode).map(Some)
    }
}

pub fn split_metrics<T: Real>(samples: &[OperatorSample<T>], preds: &[Prediction<T>], mode: ConstantMode) -> Result<SplitMetrics<T>> {
    let mut errors = Vec::with_capacity(samples.len());
    let mut norms = Vec::with_capacity(samples.len());
    let mut bounds = Vec::with_capacity(samples.len());
    for (s, pred) in samples.iter().zip(preds) {
        let u = s.reference.as_ref().ok_or_else(|| Error::data("metrics need reference solutions"))?;
        let p = &s.problem;
        errors.push(energy_norm(&pred.solution.sub(u), &p.a, &p.b_sq)?);
        norms.push(energy_norm(u, &p.a, &p.b_sq)?);
        if let Some(c) = &pred.certificate {
            bounds.push(crate::majorant::astral_elliptic(&pred.solution, c, p, mode)?.bound());
        }
    }
    let n = T::from_usize_lossy(samples.len());
    let rel = |x: &[T]| pairwise_sum(&x.iter().zip(&norms).map(|(&e, &u)| e / u).collect::<Vec<_>>()) / n;
    let have_bounds = bounds.len() == samples.len() && !bounds.is_empty();
    Ok(SplitMetrics {
        mean_relative_error: rel(&errors),
        mean_relative_bound: have_bounds.then(|| rel(&bounds)),
        mean_ratio: have_bounds.then(|| {
            pairwise_sum(&bounds.iter().zip(&errors).map(|(&b, &e)| b / e).collect::<Vec<_>>()) / n
        }),
        correlation: if have_bounds { pearson(&errors, &bounds) } else { None },
        bounds: have_bounds.then_some(bounds),
        errors,
        norms,
    })
}

/// Trains a neural operator on `train` and reports metrics on both splits.
pub fn train_operator<T: Real>(
    train: &[OperatorSample<T>],
    test: &[OperatorSample<T>],
    scheme: Scheme,
    config: &OperatorConfig,
) -> std::result::Result<OperatorRun<T>, OperatorFailure<T>> {
    config.validate()?;
    check_dataset(train, test, scheme != Scheme::Unsupervised)?;
    let first = &train[0].problem;
    let d = first.dim();
    let ci = input_channels(d);
    let inputs: Vec<Vec<T>> = train.iter().map(|s| operator_inputs(&s.problem)).collect();
    let out_channels = if scheme == Scheme::Unsupervised { 1 + d } else { 1 };
    let mut net = OperatorNet::new(spec_for(first, ci, out_channels, config), stream_key(&[config.seed, 1]))?;
    net.fit_normalization(&inputs)?;
    let (alpha, gamma, lambda) = (T::lit(config.alpha), T::lit(config.gamma), T::lit(config.lambda));
    let weights = first.grid().trapezoid_weights();
    let mut log_beta = (scheme == Scheme::Unsupervised && config.learn_beta).then(|| T::lit(config.beta.ln()));
    let (loss_trace, state) = match scheme {
        Scheme::Unsupervised => {
            let f = |i: usize, out: &[T], beta: T| unsupervised_sample_loss(out, &train[i].problem, beta, lambda, config.mode);
            fit(&mut net, &inputs, config, 1, &mut log_beta, &f)?
        }
        Scheme::Pino => {
            let f = |i: usize, out: &[T], _: T| {
                let r = train[i].reference.as_ref().expect("checked");
                let (l, g) = pino_sample_loss(out, r, &train[i].problem, alpha, gamma)?;
                Ok((l, g, T::zero()))
            };
            fit(&mut net, &inputs, config, 1, &mut log_beta, &f)?
        }
        Scheme::Supervised => {
            let f = |i: usize, out: &[T], _: T| {
                let r = train[i].reference.as_ref().expect("checked");
                let (l, g) = regression_sample_loss(out, r.values(), &weights, 1)?;
                Ok((l, g, T::zero()))
            };
            fit(&mut net, &inputs, config, 1, &mut log_beta, &f)?
        }
    };
    let beta = log_beta.map_or(T::lit(config.beta), |lb| lb.exp());
    let mut run = OperatorRun {
        scheme,
        solution: net,
        certificate: None,
        beta,
        mode: config.mode,
        loss_trace,
        certificate_trace: Vec::new(),
        direct: None,
        optimizer: vec![state],
        metrics: OperatorMetrics { train: None, test: None },
    };
    if scheme == Scheme::Supervised {
        let problems: Vec<EllipticProblem<T>> = train.iter().map(|s| s.problem.clone()).collect();
        let preds = run.predict(&problems)?;
        let cfg = CertifyConfig { mode: config.mode, ..config.certify };
        let direct: Vec<Certificate<T>> = preds
            .par_iter()
            .zip(train.par_iter())
            .map(|(p, s)| certify_direct(&p.solution, &s.problem, &cfg).map(|o| o.certificate).map_err(Error::from))
            .collect::<Result<_>>()?;
        let aug: Vec<Vec<T>> =
            inputs.iter().zip(&preds).map(|(x, p)| with_solution(x, p.solution.values(), ci)).collect();
        let targets: Vec<Vec<T>> = direct
            .iter()
            .map(|c| {
                let n = c.y.grid().len();
                let mut t = Vec::with_capacity(n * d);
                for k in 0..n {
                    t.extend((0..d).map(|i| c.y.component(i).values()[k]));
                }
                t
            })
            .collect();
        let mut cnet = OperatorNet::new(spec_for(first, ci + 1, d, config), stream_key(&[config.seed, 2]))?;
        cnet.fit_normalization(&aug)?;
        let f = |i: usize, out: &[T], _: T| {
            let (l, g) = regression_sample_loss(out, &targets[i], &weights, d)?;
            Ok((l, g, T::zero()))
        };
        let mut none = None;
        let (trace, state) = fit(&mut cnet, &aug, config, 2, &mut none, &f)?;
        run.certificate_trace = trace;
        run.optimizer.push(state);
        run.certificate = Some(cnet);
        run.direct = Some(direct);
    }
    run.metrics = OperatorMetrics { train: run.evaluate(train)?, test: run.evaluate(test)? };
    Ok(run)
}
