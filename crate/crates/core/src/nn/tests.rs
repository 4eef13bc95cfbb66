use super::*;
use crate::field::TensorGrid;
use crate::majorant::ConstantMode;
use crate::problems::{gen_elliptic_1d, gen_elliptic_2d, Family, PinnProblem, SampleKey};
use crate::solver::solve;

fn small_spec(mask: bool) -> NetSpec {
    NetSpec { input_dim: 2, features: 4, width: 6, depth: 2, heads: 1, sigma: 1.0, mask }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn mask_vanishes_on_the_boundary() {
    let net = DenseNet::<f64>::new(small_spec(true), 3).unwrap();
    let out = net.forward(&[[0.0, 0.3], [1.0, 0.3], [0.4, 0.0], [0.4, 1.0], [0.5, 0.5]]);
    for p in 0..4 {
        assert_eq!(out[[p, 0]], 0.0);
    }
    assert!(out[[4, 0]] != 0.0);
}

#[test]
fn zero_weights_give_zero_output() {
    let spec = small_spec(false);
    let net = DenseNet::<f64>::new(spec, 1).unwrap();
    let zero = DenseNet::from_parts(spec, net.frequencies().to_vec(), vec![0.0; spec.num_params()]).unwrap();
    assert!(zero.forward(&[[0.2, 0.7], [0.9, 0.1]]).iter().all(|&v| v == 0.0));
}

#[test]
fn batch_matches_pointwise_and_jets_match_forward() {
    let net = DenseNet::<f64>::new(small_spec(true), 5).unwrap();
    let pts = [[0.1, 0.2], [0.33, 0.8], [0.7, 0.45]];
    let batch = net.forward(&pts);
    let jets = net.jets(&pts, 2).unwrap();
    for (p, &x) in pts.iter().enumerate() {
        let single = net.forward(&[x]);
        assert!((single[[0, 0]] - batch[[p, 0]]).abs() < 1e-14);
        assert!((jets.value(p, 0) - batch[[p, 0]]).abs() < 1e-14);
        assert_eq!(net.input_jet(x, 0).unwrap().value(0, 0), single[[0, 0]]);
    }
}

#[test]
fn jets_match_finite_differences() {
    let net = DenseNet::<f64>::new(small_spec(true), 7).unwrap();
    let x = [0.37, 0.61];
    let j = net.input_jet(x, 2).unwrap();
    let f = |p: [f64; 2]| net.forward(&[p])[[0, 0]];
    let h = 1e-4;
    for i in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[i] += h;
        xm[i] -= h;
        let d = (f(xp) - f(xm)) / (2.0 * h);
        let dd = (f(xp) - 2.0 * f(x) + f(xm)) / (h * h);
        assert!(rel_err(j.d(0, 0, i), d) < 1e-6, "d{i}: {} vs {d}", j.d(0, 0, i));
        assert!(rel_err(j.dd(0, 0, i), dd) < 1e-4, "dd{i}: {} vs {dd}", j.dd(0, 0, i));
    }
    assert!((j.laplacian(0, 0) - j.dd(0, 0, 0) - j.dd(0, 0, 1)).abs() < 1e-12);
}

#[test]
fn depth_zero_network_is_a_fourier_sum() {
    let spec = NetSpec { input_dim: 1, features: 2, width: 1, depth: 0, heads: 1, sigma: 1.0, mask: false };
    let freq = vec![0.5, 1.5];
    // Output = w . [sin(2 pi b x), cos(2 pi b x)] + c.
    let w = [0.3, -0.7, 1.1, 0.2];
    let c = 0.05;
    let mut params = w.to_vec();
    params.push(c);
    let net = DenseNet::from_parts(spec, freq.clone(), params).unwrap();
    let x = 0.23;
    let tau = 2.0 * std::f64::consts::PI;
    let (mut v, mut d, mut dd) = (c, 0.0, 0.0);
    for (k, &b) in freq.iter().enumerate() {
        let t = tau * b;
        v += w[k] * (t * x).sin() + w[2 + k] * (t * x).cos();
        d += t * (w[k] * (t * x).cos() - w[2 + k] * (t * x).sin());
        dd -= t * t * (w[k] * (t * x).sin() + w[2 + k] * (t * x).cos());
    }
    let j = net.input_jet([x, 0.0], 2).unwrap();
    assert!((j.value(0, 0) - v).abs() < 1e-13);
    assert!((j.d(0, 0, 0) - d).abs() < 1e-12);
    assert!((j.dd(0, 0, 0) - dd).abs() < 1e-11);

    // d/dw of sum_p dd(p) is the second derivative of each feature.
    let (_, g) = net
        .param_grad(&[[x, 0.0]], 2, |j| {
            let mut adj = Jets::zeros_like(j);
            *adj.dd_mut(0, 0, 0) = 1.0;
            Ok((j.dd(0, 0, 0), adj))
        })
        .unwrap();
    for (k, &b) in freq.iter().enumerate() {
        let t = tau * b;
        assert!((g[k] + t * t * (t * x).sin()).abs() < 1e-10);
        assert!((g[2 + k] + t * t * (t * x).cos()).abs() < 1e-10);
    }
    assert_eq!(g[4], 0.0);
}

#[test]
fn param_grad_matches_finite_differences() {
    let net = DenseNet::<f64>::new(small_spec(true), 11).unwrap();
    let pts = [[0.2, 0.3], [0.6, 0.9]];
    let objective = |n: &DenseNet<f64>| {
        let j = n.jets(&pts, 2).unwrap();
        (0..2).map(|p| j.value(p, 0).powi(2) + j.d(p, 0, 1) * j.dd(p, 0, 0)).sum::<f64>()
    };
    let (loss, g) = net
        .param_grad(&pts, 2, |j| {
            let mut adj = Jets::zeros_like(j);
            let mut l = 0.0;
            for p in 0..2 {
                l += j.value(p, 0).powi(2) + j.d(p, 0, 1) * j.dd(p, 0, 0);
                *adj.value_mut(p, 0) = 2.0 * j.value(p, 0);
                *adj.d_mut(p, 0, 1) = j.dd(p, 0, 0);
                *adj.dd_mut(p, 0, 0) = j.d(p, 0, 1);
            }
            Ok((l, adj))
        })
        .unwrap();
    assert!((loss - objective(&net)).abs() < 1e-12);
    let h = 1e-6;
    for k in (0..net.num_params()).step_by(7) {
        let mut plus = net.clone();
        let mut minus = net.clone();
        plus.params_mut()[k] += h;
        minus.params_mut()[k] -= h;
        let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
        assert!((g[k] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "param {k}: {} vs {fd}", g[k]);
    }
}

fn tiny_config(loss: LossKind) -> TrainConfig {
    TrainConfig {
        loss,
        quad_points: 4,
        mc_points: 16,
        eval_points: 4,
        boundary_points: 3,
        features: 4,
        width: 5,
        depth: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn every_pinn_loss_has_a_consistent_gradient() {
    let problem = PinnProblem::<f64>::sample(4, &TensorGrid::square(4).unwrap()).unwrap();
    for kind in LossKind::ALL {
        let config = tiny_config(kind);
        let obj = PinnObjective::new(&problem, config).unwrap();
        let solution = DenseNet::new(config.net_spec(1, kind.masked()), 1).unwrap();
        let flux: Vec<DenseNet<f64>> = if kind.is_astral() {
            (2..4).map(|s| DenseNet::new(config.net_spec(1, false), s).unwrap()).collect()
        } else {
            Vec::new()
        };
        let (loss, grads) = obj.loss_and_grad(&solution, &flux).unwrap();
        assert!(loss.is_finite() && loss > 0.0, "{kind}");
        assert_eq!(grads.len(), 1 + flux.len());
        let h = 1e-6;
        for (net_idx, g) in grads.iter().enumerate() {
            for k in (0..g.len()).step_by(13) {
                let eval = |delta: f64| {
                    let mut s = solution.clone();
                    let mut fl = flux.clone();
                    let net = if net_idx == 0 { &mut s } else { &mut fl[net_idx - 1] };
                    net.params_mut()[k] += delta;
                    obj.loss_and_grad(&s, &fl).unwrap().0
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                assert!(
                    (g[k] - fd).abs() <= 1e-5 * fd.abs().max(1e-2),
                    "{kind} net {net_idx} param {k}: {} vs {fd}",
                    g[k]
                );
            }
        }
    }
}

#[test]
fn pinn_training_reduces_the_loss_and_is_deterministic() {
    let problem = PinnProblem::<f64>::sample(2, &TensorGrid::square(4).unwrap()).unwrap();
    let config = TrainConfig { epochs: 60, log_every: 20, optimizer: OptimizerConfig::adam(1e-2, 0.0), ..tiny_config(LossKind::Astral) };
    let a = train_pinn(&problem, &config).unwrap();
    let b = train_pinn(&problem, &config).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.trace.iter().map(|t| t.epoch).collect::<Vec<_>>(), [0, 20, 40, 60]);
    assert!(a.trace.last().unwrap().loss < a.trace[0].loss);
    let zero = train_pinn(&problem, &TrainConfig { epochs: 0, ..config }).unwrap();
    assert_eq!(zero.trace.len(), 1);
}

fn operator_samples(dim: usize, n: usize) -> Vec<OperatorSample<f64>> {
    (0..n)
        .map(|i| {
            let problem = if dim == 1 {
                gen_elliptic_1d(Family::OneD2, SampleKey::new(9, i as u64), TensorGrid::interval(3).unwrap()).unwrap()
            } else {
                gen_elliptic_2d(Family::SmoothB, SampleKey::new(9, i as u64), TensorGrid::square(3).unwrap()).unwrap()
            };
            let reference = Some(solve(&problem).unwrap());
            OperatorSample { problem, reference }
        })
        .collect()
}

fn operator_loss_fd(dim: usize, scheme: Scheme) {
    let samples = operator_samples(dim, 3);
    let p0 = &samples[0].problem;
    let co = match scheme {
        Scheme::Unsupervised => 1 + dim,
        _ => 1,
    };
    let spec = OperatorSpec {
        dim,
        nodes: p0.grid().nodes_per_axis(),
        in_channels: input_channels(dim),
        out_channels: co,
        width: 4,
        layers: 2,
    };
    let inputs: Vec<Vec<f64>> = samples.iter().map(|s| operator_inputs(&s.problem)).collect();
    let mut net = OperatorNet::new(spec, 3).unwrap();
    net.fit_normalization(&inputs).unwrap();
    let refs: Vec<&[f64]> = inputs.iter().map(|x| x.as_slice()).collect();
    let weights = p0.grid().trapezoid_weights();
    let beta = 0.7;
    let loss = |i: usize, out: &[f64]| -> (f64, Vec<f64>, f64) {
        let s = &samples[i];
        match scheme {
            Scheme::Unsupervised => unsupervised_sample_loss(out, &s.problem, beta, 0.5, ConstantMode::Safe).unwrap(),
            Scheme::Pino => {
                let (l, g) = pino_sample_loss(out, s.reference.as_ref().unwrap(), &s.problem, 0.3, 0.5).unwrap();
                (l, g, 0.0)
            }
            Scheme::Supervised => {
                let (l, g) = regression_sample_loss(out, s.reference.as_ref().unwrap().values(), &weights, 1).unwrap();
                (l, g, 0.0)
            }
        }
    };
    let total = |n: &OperatorNet<f64>| -> f64 {
        n.forward(&refs).unwrap().iter().enumerate().map(|(i, o)| loss(i, o).0).sum()
    };
    let (outs, tape) = net.forward_tape(&refs).unwrap();
    let adj: Vec<Vec<f64>> = outs.iter().enumerate().map(|(i, o)| loss(i, o).1).collect();
    let g = net.backward(&tape, &adj).unwrap();
    assert_eq!(g.len(), net.num_params());
    let h = 1e-6;
    for k in (0..g.len()).step_by(17) {
        let mut plus = net.clone();
        let mut minus = net.clone();
        plus.params_mut()[k] += h;
        minus.params_mut()[k] -= h;
        let fd = (total(&plus) - total(&minus)) / (2.0 * h);
        assert!((g[k] - fd).abs() <= 1e-5 * fd.abs().max(1e-2), "{scheme} dim {dim} param {k}: {} vs {fd}", g[k]);
    }
    if scheme == Scheme::Unsupervised {
        let db = loss(0, &outs[0]).2;
        let lb = |b: f64| unsupervised_sample_loss(&outs[0], &samples[0].problem, b, 0.5, ConstantMode::Safe).unwrap().0;
        let fd = (lb(beta + h) - lb(beta - h)) / (2.0 * h);
        assert!((db - fd).abs() <= 1e-5 * fd.abs().max(1e-2), "beta: {db} vs {fd}");
    }
}

#[test]
fn operator_losses_have_consistent_gradients() {
    for dim in [1, 2] {
        for scheme in [Scheme::Supervised, Scheme::Unsupervised, Scheme::Pino] {
            operator_loss_fd(dim, scheme);
        }
    }
}

#[test]
fn unpenalised_boundary_values_get_no_gradient() {
    let samples = operator_samples(1, 1);
    let p = &samples[0].problem;
    let n = p.grid().len();
    let out: Vec<f64> = (0..2 * n).map(|k| ((k * 37 % 11) as f64 - 5.0) / 10.0).collect();
    let (_, adj, _) = unsupervised_sample_loss(&out, p, 1.0, 0.0, ConstantMode::Safe).unwrap();
    for b in p.grid().boundary_nodes() {
        assert_eq!(adj[2 * b], 0.0);
    }
}

#[test]
fn operator_training_is_deterministic() {
    let samples = operator_samples(1, 6);
    let config = OperatorConfig { epochs: 4, batch_size: 4, width: 8, layers: 2, ..OperatorConfig::default() };
    for scheme in [Scheme::Unsupervised, Scheme::Supervised] {
        let a = train_operator(&samples[..4], &samples[4..], scheme, &config).unwrap();
        let b = train_operator(&samples[..4], &samples[4..], scheme, &config).unwrap();
        assert_eq!(a.solution, b.solution);
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.loss_trace.len(), 4);
        let test = a.metrics.test.as_ref().unwrap();
        assert_eq!(test.errors.len(), 2);
        let bounds = test.bounds.as_ref().unwrap();
        for (b, e) in bounds.iter().zip(&test.errors) {
            assert!(b >= e, "bound {b} below error {e}");
        }
    }
}
