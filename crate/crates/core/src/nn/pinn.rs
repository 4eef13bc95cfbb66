use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dense::{DenseNet, Jets, NetSpec};
use super::optim::{OptimizerConfig, OptimizerState, Schedule};
use crate::certify::{BETA_CAP, BETA_FLOOR};
use crate::field::{QuadratureSet, Rule, TensorGrid};
use crate::majorant::{friedrichs_from_bounds, ConstantMode};
use crate::problems::PinnProblem;
use crate::real::pairwise_sum;
use crate::rng::{counter_uniform, role, stream_key};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Residual,
    VariationalGauss,
    VariationalMc,
    Astral,
    AstralBc,
    Pino,
    L2Supervised,
}

impl LossKind {
    pub const ALL: [LossKind; 7] = [
        LossKind::Residual,
        LossKind::VariationalGauss,
        LossKind::VariationalMc,
        LossKind::Astral,
        LossKind::AstralBc,
        LossKind::Pino,
        LossKind::L2Supervised,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            LossKind::Residual => "residual",
            LossKind::VariationalGauss => "variational_gauss",
            LossKind::VariationalMc => "variational_mc",
            LossKind::Astral => "astral",
            LossKind::AstralBc => "astral_bc",
            LossKind::Pino => "pino",
            LossKind::L2Supervised => "l2_supervised",
        }
    }

    pub fn is_astral(self) -> bool {
        matches!(self, LossKind::Astral | LossKind::AstralBc)
    }

    /// Whether the solution network is multiplied by the boundary mask.
    pub fn masked(self) -> bool {
        !matches!(self, LossKind::AstralBc | LossKind::Pino)
    }

    fn order(self) -> usize {
        match self {
            LossKind::Residual | LossKind::Pino => 2,
            LossKind::L2Supervised => 0,
            _ => 1,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::param(format!("unknown loss kind `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub optimizer: OptimizerConfig,
    pub schedule: Schedule,
    pub epochs: usize,
    /// Gauss points per axis of the training rule.
    pub quad_points: usize,
    /// Replace the fixed Gauss nodes by a fresh stratified sample every epoch:
    /// one uniform point in each cell of a `quad_points x quad_points` lattice.
    /// Ignored by `variational_gauss`, which always uses the fixed nodes.
    pub stratified: bool,
    /// Points per epoch of the Monte Carlo variant.
    pub mc_points: usize,
    /// Gauss points per axis used for logged errors.
    pub eval_points: usize,
    /// Points per edge for boundary penalties.
    pub boundary_points: usize,
    pub log_every: usize,
    pub seed: u64,
    pub features: usize,
    pub width: usize,
    pub depth: usize,
    pub sigma: f64,
    /// Boundary weight of `astral_bc`.
    pub lambda: f64,
    /// Residual and boundary weights of `pino`.
    pub alpha: f64,
    pub gamma: f64,
    pub mode: ConstantMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Astral,
            optimizer: OptimizerConfig::lion(1e-3, 0.0),
            schedule: Schedule { factor: 0.5, period: 500 },
            epochs: 2000,
            quad_points: 16,
            stratified: true,
            mc_points: 256,
            eval_points: 32,
            boundary_points: 16,
            log_every: 50,
            seed: 0,
            features: 50,
            width: 50,
            depth: 3,
            sigma: 1.0,
            lambda: 1.0,
            alpha: 1.0,
            gamma: 1.0,
            mode: ConstantMode::Safe,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.schedule.validate()?;
        if self.quad_points == 0 || self.eval_points == 0 || self.mc_points == 0 || self.boundary_points == 0 {
            return Err(Error::param("point counts must be positive"));
        }
        if self.log_every == 0 {
            return Err(Error::param("logging period must be positive"));
        }
        if self.lambda < 0.0 || self.alpha < 0.0 || self.gamma < 0.0 {
            return Err(Error::param("loss weights must be non-negative"));
        }
        self.net_spec(1, true).validate()
    }

    pub fn net_spec(&self, heads: usize, mask: bool) -> NetSpec {
        NetSpec {
            input_dim: 2,
            features: self.features,
            width: self.width,
            depth: self.depth,
            heads,
            sigma: self.sigma,
            mask,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry<T> {
    pub epoch: usize,
    /// Training loss; for the Astral kinds its square root is the bound.
    pub loss: T,
    pub energy_error: T,
    pub relative_error: T,
}

#[derive(Clone, Debug)]
pub struct PinnRun<T> {
    pub solution: DenseNet<T>,
    /// Flux networks `y_1, y_2` of the Astral kinds.
    pub flux: Vec<DenseNet<T>>,
    pub trace: Vec<TraceEntry<T>>,
    /// Final optimizer state per network, in the order solution, flux.
    pub optimizer: Vec<OptimizerState<T>>,
}

#[derive(Debug)]
pub struct TrainFailure<T> {
    pub error: Error,
    pub trace: Vec<TraceEntry<T>>,
}

impl<T> From<Error> for TrainFailure<T> {
    fn from(error: Error) -> Self {
        Self { error, trace: Vec::new() }
    }
}

impl<T> From<TrainFailure<T>> for Error {
    fn from(f: TrainFailure<T>) -> Self {
        f.error
    }
}

/// Problem data sampled at quadrature points.
struct Samples<T> {
    points: Vec<[T; 2]>,
    w: Vec<T>,
    a: Vec<T>,
    grad_a: Vec<[T; 2]>,
    f: Vec<T>,
    u: Vec<T>,
    grad_u: Vec<[T; 2]>,
}

impl<T: Real> Samples<T> {
    fn new(problem: &PinnProblem<T>, quad: QuadratureSet<T>) -> Self {
        let pts = &quad.points;
        Self {
            a: pts.iter().map(|&p| problem.a(p)).collect(),
            grad_a: pts.iter().map(|&p| problem.grad_a(p)).collect(),
            f: pts.iter().map(|&p| problem.f(p)).collect(),
            u: pts.iter().map(|&p| problem.u(p)).collect(),
            grad_u: pts.iter().map(|&p| problem.grad_u(p)).collect(),
            w: quad.weights,
            points: quad.points,
        }
    }

    fn len(&self) -> usize {
        self.points.len()
    }
}

/// Everything one loss evaluation needs besides the networks.
pub struct PinnObjective<'a, T> {
    problem: &'a PinnProblem<T>,
    config: TrainConfig,
    interior: Samples<T>,
    boundary: Vec<[T; 2]>,
    c_f: T,
}

fn domain<T: Real>() -> TensorGrid<T> {
    TensorGrid::square(3).expect("valid level")
}

fn boundary_points<T: Real>(per_edge: usize) -> Vec<[T; 2]> {
    let mut pts = Vec::with_capacity(4 * per_edge);
    for k in 0..per_edge {
        let t = T::lit((k as f64 + 0.5) / per_edge as f64);
        pts.extend([[t, T::zero()], [t, T::one()], [T::zero(), t], [T::one(), t]]);
    }
    pts
}

fn stratified<T: Real>(n: usize, seed: u64) -> QuadratureSet<T> {
    let inv = 1.0 / n as f64;
    let mut points = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let k = (i * n + j) as u64;
            let x = (i as f64 + counter_uniform(seed, k, 0)) * inv;
            let y = (j as f64 + counter_uniform(seed, k, 1)) * inv;
            points.push([T::lit(x), T::lit(y)]);
        }
    }
    QuadratureSet { points, weights: vec![T::lit(inv * inv); n * n] }
}

fn sqrt_adjoint<T: Real>(s: T) -> T {
    if s > T::zero() {
        T::one() / (T::lit(2.0) * s.sqrt())
    } else {
        T::zero()
    }
}

impl<'a, T: Real> PinnObjective<'a, T> {
    pub fn new(problem: &'a PinnProblem<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let rule = Rule::Gauss(config.quad_points);
        let interior = Samples::new(problem, QuadratureSet::new(&domain(), rule)?);
        let sup_a = interior.a.iter().copied().fold(problem.inf_a(), T::max);
        let c_f = friedrichs_from_bounds(problem.inf_a(), sup_a, 2, config.mode)?;
        Ok(Self { problem, config, interior, boundary: boundary_points(config.boundary_points), c_f })
    }

    pub fn friedrichs_c(&self) -> T {
        self.c_f
    }

    /// Resamples the interior points for the Monte Carlo variant.
    fn refresh(&mut self, epoch: usize) -> Result<()> {
        let seed = stream_key(&[self.config.seed, role::MONTE_CARLO, epoch as u64]);
        if self.config.loss == LossKind::VariationalMc {
            let rule = Rule::MonteCarlo { points: self.config.mc_points, seed };
            self.interior = Samples::new(self.problem, QuadratureSet::new(&domain(), rule)?);
        } else if self.config.stratified && !matches!(self.config.loss, LossKind::L2Supervised | LossKind::VariationalGauss) {
            self.interior = Samples::new(self.problem, stratified(self.config.quad_points, seed));
        }
        Ok(())
    }

    /// Loss and the gradient for every network (solution first, then fluxes).
    pub fn loss_and_grad(&self, solution: &DenseNet<T>, flux: &[DenseNet<T>]) -> Result<(T, Vec<Vec<T>>)> {
        let kind = self.config.loss;
        if kind.is_astral() {
            return self.astral(solution, flux);
        }
        let s = &self.interior;
        let n = s.len();
        let two = T::lit(2.0);
        let order = kind.order();
        let (alpha, gamma) = (T::lit(self.config.alpha), T::lit(self.config.gamma));
        let residual = |j: &Jets<T>, q: usize| {
            let g = j.gradient(q, 0);
            s.a[q] * j.laplacian(q, 0) + s.grad_a[q][0] * g[0] + s.grad_a[q][1] * g[1] + s.f[q]
        };
        let mut loss = T::zero();
        let (_, mut grad) = solution.param_grad(&s.points, order, |j| {
            let mut adj = Jets::zeros_like(j);
            match kind {
                LossKind::Residual => {
                    let r: Vec<T> = (0..n).map(|q| residual(j, q)).collect();
                    loss = pairwise_sum(&(0..n).map(|q| s.w[q] * r[q] * r[q]).collect::<Vec<_>>());
                    for q in 0..n {
                        residual_adjoint(&mut adj, q, two * s.w[q] * r[q], s.a[q], s.grad_a[q]);
                    }
                }
                LossKind::VariationalGauss | LossKind::VariationalMc => {
                    let half = T::lit(0.5);
                    let terms: Vec<T> = (0..n)
                        .map(|q| {
                            let g = j.gradient(q, 0);
                            s.w[q] * (half * s.a[q] * (g[0] * g[0] + g[1] * g[1]) - s.f[q] * j.value(q, 0))
                        })
                        .collect();
                    loss = pairwise_sum(&terms);
                    for q in 0..n {
                        *adj.value_mut(q, 0) = -s.w[q] * s.f[q];
                        for i in 0..2 {
                            *adj.d_mut(q, 0, i) = s.w[q] * s.a[q] * j.d(q, 0, i);
                        }
                    }
                }
                LossKind::L2Supervised => {
                    let e: Vec<T> = (0..n).map(|q| j.value(q, 0) - s.u[q]).collect();
                    loss = pairwise_sum(&(0..n).map(|q| s.w[q] * e[q] * e[q]).collect::<Vec<_>>());
                    for q in 0..n {
                        *adj.value_mut(q, 0) = two * s.w[q] * e[q];
                    }
                }
                LossKind::Pino => {
                    let e: Vec<T> = (0..n).map(|q| j.value(q, 0) - s.u[q]).collect();
                    let data_sq = pairwise_sum(&(0..n).map(|q| s.w[q] * e[q] * e[q]).collect::<Vec<_>>());
                    let r: Vec<T> = (0..n).map(|q| residual(j, q)).collect();
                    let res_sq = pairwise_sum(&(0..n).map(|q| s.w[q] * r[q] * r[q]).collect::<Vec<_>>());
                    loss = data_sq.sqrt() + alpha * res_sq.sqrt();
                    let (kd, kr) = (sqrt_adjoint(data_sq), alpha * sqrt_adjoint(res_sq));
                    for q in 0..n {
                        *adj.value_mut(q, 0) = kd * two * s.w[q] * e[q];
                        residual_adjoint(&mut adj, q, kr * two * s.w[q] * r[q], s.a[q], s.grad_a[q]);
                    }
                }
                LossKind::Astral | LossKind::AstralBc => unreachable!(),
            }
            Ok((loss, adj))
        })?;
        if kind == LossKind::Pino {
            let (rms, g) = self.boundary_rms_grad(solution, gamma)?;
            loss += gamma * rms;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        Ok((loss, vec![grad]))
    }

    /// `weight * sqrt(mean v^2)` over the boundary points and its gradient.
    fn boundary_rms_grad(&self, net: &DenseNet<T>, weight: T) -> Result<(T, Vec<T>)> {
        let nb = T::from_usize_lossy(self.boundary.len());
        let mut rms = T::zero();
        let (_, g) = net.param_grad(&self.boundary, 0, |j| {
            let sq: Vec<T> = (0..j.points()).map(|p| j.value(p, 0) * j.value(p, 0)).collect();
            rms = (pairwise_sum(&sq) / nb).sqrt();
            let mut adj = Jets::zeros_like(j);
            if rms > T::zero() {
                for p in 0..j.points() {
                    *adj.value_mut(p, 0) = weight * j.value(p, 0) / (nb * rms);
                }
            }
            Ok((rms, adj))
        })?;
        Ok((rms, g))
    }

    /// Residual part `A = int C^2 (f + div y)^2`, flux part `B = int |a grad v - y|^2 / a`,
    /// combined at the minimising `beta`.
    fn astral(&self, solution: &DenseNet<T>, flux: &[DenseNet<T>]) -> Result<(T, Vec<Vec<T>>)> {
        if flux.len() != 2 {
            return Err(Error::param("astral training needs two flux networks"));
        }
        let s = &self.interior;
        let n = s.len();
        let two = T::lit(2.0);
        let c2 = self.c_f * self.c_f;
        let jv = solution.jets(&s.points, 1)?;
        let jy = [flux[0].jets(&s.points, 1)?, flux[1].jets(&s.points, 1)?];
        let res: Vec<T> = (0..n).map(|q| s.f[q] + jy[0].d(q, 0, 0) + jy[1].d(q, 0, 1)).collect();
        let gap: Vec<[T; 2]> = (0..n)
            .map(|q| {
                let g = jv.gradient(q, 0);
                [s.a[q] * g[0] - jy[0].value(q, 0), s.a[q] * g[1] - jy[1].value(q, 0)]
            })
            .collect();
        let a_res = pairwise_sum(&(0..n).map(|q| s.w[q] * c2 * res[q] * res[q]).collect::<Vec<_>>());
        let b_flux = pairwise_sum(
            &(0..n)
                .map(|q| s.w[q] * (gap[q][0] * gap[q][0] + gap[q][1] * gap[q][1]) / s.a[q])
                .collect::<Vec<_>>(),
        );
        let beta = if a_res > T::zero() {
            (b_flux / a_res).sqrt().max(T::lit(BETA_FLOOR)).min(T::lit(BETA_CAP))
        } else {
            T::lit(BETA_CAP)
        };
        let (ka, kb) = (T::one() + beta, T::one() + T::one() / beta);
        let total = ka * a_res + kb * b_flux;
        // For the boundary-penalised variant the majorant enters through its square root.
        let (loss, outer) = if self.config.loss == LossKind::AstralBc {
            (total.sqrt(), sqrt_adjoint(total))
        } else {
            (total, T::one())
        };
        let (_, mut gv) = solution.param_grad(&s.points, 1, |j| {
            let mut adj = Jets::zeros_like(j);
            for q in 0..n {
                for i in 0..2 {
                    *adj.d_mut(q, 0, i) = outer * kb * two * s.w[q] * gap[q][i];
                }
            }
            Ok((loss, adj))
        })?;
        let mut grads = Vec::with_capacity(3);
        let mut loss = loss;
        if self.config.loss == LossKind::AstralBc {
            let lambda = T::lit(self.config.lambda);
            let (rms, g) = self.boundary_rms_grad(solution, lambda)?;
            loss += lambda * rms;
            gv.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        grads.push(gv);
        for (i, net) in flux.iter().enumerate() {
            let (_, g) = net.param_grad(&s.points, 1, |j| {
                let mut adj = Jets::zeros_like(j);
                for q in 0..n {
                    *adj.value_mut(q, 0) = -outer * kb * two * s.w[q] * gap[q][i] / s.a[q];
                    *adj.d_mut(q, 0, i) = outer * ka * two * s.w[q] * c2 * res[q];
                }
                Ok((loss, adj))
            })?;
            grads.push(g);
        }
        Ok((loss, grads))
    }

    /// Energy error `(int a |grad(v - u)|^2)^{1/2}` and its ratio to `|||u|||`.
    pub fn energy_error(&self, solution: &DenseNet<T>) -> Result<(T, T)> {
        let rule = Rule::Gauss(self.config.eval_points);
        let s = Samples::new(self.problem, QuadratureSet::new(&domain(), rule)?);
        let j = solution.jets(&s.points, 1)?;
        let mut err = Vec::with_capacity(s.len());
        let mut norm = Vec::with_capacity(s.len());
        for q in 0..s.len() {
            let g = j.gradient(q, 0);
            let (e0, e1) = (g[0] - s.grad_u[q][0], g[1] - s.grad_u[q][1]);
            err.push(s.w[q] * s.a[q] * (e0 * e0 + e1 * e1));
            norm.push(s.w[q] * s.a[q] * (s.grad_u[q][0] * s.grad_u[q][0] + s.grad_u[q][1] * s.grad_u[q][1]));
        }
        let e = pairwise_sum(&err).sqrt();
        Ok((e, e / pairwise_sum(&norm).sqrt()))
    }
}

/// Adds `k * d r / d(jet)` for `r = a lap v + grad a . grad v + f`.
fn residual_adjoint<T: Real>(adj: &mut Jets<T>, q: usize, k: T, a: T, grad_a: [T; 2]) {
    for i in 0..2 {
        *adj.d_mut(q, 0, i) += k * grad_a[i];
        *adj.dd_mut(q, 0, i) += k * a;
    }
}

/// Trains a physics-informed network on a manufactured problem.
pub fn train_pinn<T: Real>(
    problem: &PinnProblem<T>,
    config: &TrainConfig,
) -> std::result::Result<PinnRun<T>, TrainFailure<T>> {
    let mut objective = PinnObjective::new(problem, *config)?;
    let kind = config.loss;
    let mut solution = DenseNet::new(config.net_spec(1, kind.masked()), stream_key(&[config.seed, 0]))?;
    let mut flux: Vec<DenseNet<T>> = if kind.is_astral() {
        (1..=2u64)
            .map(|i| DenseNet::new(config.net_spec(1, false), stream_key(&[config.seed, i])))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut states: Vec<OptimizerState<T>> =
        std::iter::once(&solution).chain(&flux).map(|n| OptimizerState::new(n.num_params())).collect();
    let mut trace = Vec::new();
    let log = |epoch: usize, loss: T, net: &DenseNet<T>, obj: &PinnObjective<T>, trace: &mut Vec<TraceEntry<T>>| {
        let (energy_error, relative_error) = obj.energy_error(net)?;
        trace.push(TraceEntry { epoch, loss, energy_error, relative_error });
        Ok::<(), Error>(())
    };
    for epoch in 0..config.epochs {
        let step = (|| {
            objective.refresh(epoch)?;
            let (loss, grads) = objective.loss_and_grad(&solution, &flux)?;
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            if epoch % config.log_every == 0 {
                log(epoch, loss, &solution, &objective, &mut trace)?;
            }
            let lr = config.schedule.rate(config.optimizer.lr(), epoch);
            for ((net, st), g) in std::iter::once(&mut solution).chain(flux.iter_mut()).zip(&mut states).zip(&grads) {
                st.step(net.params_mut(), g, &config.optimizer, lr)?;
            }
            Ok(())
        })();
        if let Err(error) = step {
            return Err(TrainFailure { error, trace });
        }
    }
    let last = (|| {
        objective.refresh(config.epochs)?;
        let (loss, _) = objective.loss_and_grad(&solution, &flux)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch: config.epochs });
        }
        log(config.epochs, loss, &solution, &objective, &mut trace)
    })();
    if let Err(error) = last {
        return Err(TrainFailure { error, trace });
    }
    Ok(PinnRun { solution, flux, trace, optimizer: states })
}
