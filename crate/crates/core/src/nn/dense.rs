use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::activation::gelu_taylor;
use crate::rng::{role, substream};
use crate::{Error, Real, Result};

/// Shape of a coordinate network: Fourier features, GELU hidden layers, linear heads.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    /// Number of frequency rows; the feature vector has twice as many entries.
    pub features: usize,
    pub width: usize,
    pub depth: usize,
    pub heads: usize,
    /// Standard deviation of the frozen frequency matrix.
    pub sigma: f64,
    /// Multiply head 0 by `prod_i sin(pi x_i)`.
    pub mask: bool,
}

impl NetSpec {
    pub fn new(input_dim: usize, heads: usize, mask: bool) -> Self {
        Self { input_dim, features: 50, width: 50, depth: 3, heads, sigma: 1.0, mask }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.input_dim) {
            return Err(Error::param("networks take one or two input coordinates"));
        }
        if self.features == 0 || self.width == 0 || self.heads == 0 {
            return Err(Error::param("feature count, width and heads must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("feature scale must be positive"));
        }
        Ok(())
    }

    /// `(out, in)` of every linear layer.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.depth + 1);
        let mut fan_in = 2 * self.features;
        for _ in 0..self.depth {
            dims.push((self.width, fan_in));
            fan_in = self.width;
        }
        dims.push((self.heads, fan_in));
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|(o, i)| o * i + o).sum()
    }
}

/// Outputs of a network and their input derivatives at a batch of points.
///
/// Component 0 is the value, components `1..=D` the first derivatives and
/// `D+1..=2D` the unmixed second derivatives. Rows are component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Jets<T> {
    order: usize,
    dim: usize,
    points: usize,
    data: Array2<T>,
}

impl<T: Real> Jets<T> {
    pub fn zeros(order: usize, dim: usize, points: usize, heads: usize) -> Self {
        let k = 1 + order * dim;
        Self { order, dim, points, data: Array2::zeros((k * points, heads)) }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(other.order, other.dim, other.points, other.heads())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn heads(&self) -> usize {
        self.data.ncols()
    }

    #[inline]
    fn row_d(&self, p: usize, i: usize) -> usize {
        debug_assert!(self.order >= 1 && i < self.dim);
        (1 + i) * self.points + p
    }

    #[inline]
    fn row_dd(&self, p: usize, i: usize) -> usize {
        debug_assert!(self.order >= 2 && i < self.dim);
        (1 + self.dim + i) * self.points + p
    }

    #[inline]
    pub fn value(&self, p: usize, h: usize) -> T {
        self.data[[p, h]]
    }

    #[inline]
    pub fn d(&self, p: usize, h: usize, i: usize) -> T {
        self.data[[self.row_d(p, i), h]]
    }

    #[inline]
    pub fn dd(&self, p: usize, h: usize, i: usize) -> T {
        self.data[[self.row_dd(p, i), h]]
    }

    pub fn value_mut(&mut self, p: usize, h: usize) -> &mut T {
        &mut self.data[[p, h]]
    }

    pub fn d_mut(&mut self, p: usize, h: usize, i: usize) -> &mut T {
        let r = self.row_d(p, i);
        &mut self.data[[r, h]]
    }

    pub fn dd_mut(&mut self, p: usize, h: usize, i: usize) -> &mut T {
        let r = self.row_dd(p, i);
        &mut self.data[[r, h]]
    }

    pub fn laplacian(&self, p: usize, h: usize) -> T {
        (0..self.dim).map(|i| self.dd(p, h, i)).sum()
    }

    pub fn gradient(&self, p: usize, h: usize) -> [T; 2] {
        let mut g = [T::zero(); 2];
        for (i, gi) in g.iter_mut().enumerate().take(self.dim) {
            *gi = self.d(p, h, i);
        }
        g
    }
}

struct Tape<T> {
    order: usize,
    points: usize,
    inputs: Vec<Array2<T>>,
    pre: Vec<Array2<T>>,
    mask: Option<Array2<T>>,
}

/// Fully connected coordinate network with frozen Fourier features.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet<T> {
    spec: NetSpec,
    /// `features x input_dim`, row-major.
    frequencies: Vec<T>,
    params: Vec<T>,
}

impl<T: Real> DenseNet<T> {
    /// Gaussian frequencies and Glorot-normal weights with zero biases.
    pub fn new(spec: NetSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = substream(&[seed, role::FEATURES]);
        let frequencies = (0..spec.features * spec.input_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(spec.sigma * z)
            })
            .collect();
        let mut rng = substream(&[seed, role::INIT]);
        let mut params = Vec::with_capacity(spec.num_params());
        for (out, inp) in spec.layer_dims() {
            let std = (2.0 / (out + inp) as f64).sqrt();
            for _ in 0..out * inp {
                let z: f64 = StandardNormal.sample(&mut rng);
                params.push(T::lit(std * z));
            }
            params.extend(std::iter::repeat_n(T::zero(), out));
        }
        Ok(Self { spec, frequencies, params })
    }

    pub fn from_parts(spec: NetSpec, frequencies: Vec<T>, params: Vec<T>) -> Result<Self> {
        spec.validate()?;
        if frequencies.len() != spec.features * spec.input_dim || params.len() != spec.num_params() {
            return Err(Error::data("network arrays do not match the declared shape"));
        }
        if frequencies.iter().chain(&params).any(|x| !x.is_finite()) {
            return Err(Error::data("non-finite network parameters"));
        }
        Ok(Self { spec, frequencies, params })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn frequencies(&self) -> &[T] {
        &self.frequencies
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layer(&self, offset: usize, out: usize, inp: usize) -> (ArrayView2<'_, T>, ArrayView1<'_, T>) {
        let w = ArrayView2::from_shape((out, inp), &self.params[offset..offset + out * inp]).expect("layer shape");
        let b = ArrayView1::from(&self.params[offset + out * inp..offset + out * inp + out]);
        (w, b)
    }

    /// Values at the points, `points x heads`.
    pub fn forward(&self, points: &[[T; 2]]) -> Array2<T> {
        self.run(points, 0).0.data
    }

    pub fn jets(&self, points: &[[T; 2]], order: usize) -> Result<Jets<T>> {
        if order > 2 {
            return Err(Error::param("jets are available up to second order"));
        }
        Ok(self.run(points, order).0)
    }

    /// Value, gradient and unmixed second derivatives at a single point.
    pub fn input_jet(&self, point: [T; 2], order: usize) -> Result<Jets<T>> {
        self.jets(&[point], order)
    }

    /// Loss and parameter gradient. The closure maps the output jets to the loss
    /// and its adjoint with respect to every jet entry.
    pub fn param_grad(
        &self,
        points: &[[T; 2]],
        order: usize,
        loss: impl FnOnce(&Jets<T>) -> Result<(T, Jets<T>)>,
    ) -> Result<(T, Vec<T>)> {
        if order > 2 {
            return Err(Error::param("jets are available up to second order"));
        }
        let (jets, tape) = self.run(points, order);
        let (value, adjoint) = loss(&jets)?;
        if adjoint.data.dim() != jets.data.dim() || adjoint.order != order {
            return Err(Error::data("loss adjoint does not match the network output"));
        }
        Ok((value, self.backward(&tape, adjoint)))
    }

    fn feature_jets(&self, points: &[[T; 2]], order: usize) -> Array2<T> {
        let (np, d, f) = (points.len(), self.spec.input_dim, self.spec.features);
        let k = 1 + order * d;
        let two_pi = T::lit(2.0) * T::PI();
        let mut z = Array2::zeros((k * np, 2 * f));
        for (p, x) in points.iter().enumerate() {
            for j in 0..f {
                let b = &self.frequencies[j * d..(j + 1) * d];
                let theta = two_pi * (0..d).fold(T::zero(), |acc, i| acc + b[i] * x[i]);
                let (s, c) = theta.sin_cos();
                z[[p, j]] = s;
                z[[p, f + j]] = c;
                for i in 0..d {
                    let t = two_pi * b[i];
                    if order >= 1 {
                        z[[(1 + i) * np + p, j]] = c * t;
                        z[[(1 + i) * np + p, f + j]] = -s * t;
                    }
                    if order >= 2 {
                        z[[(1 + d + i) * np + p, j]] = -s * t * t;
                        z[[(1 + d + i) * np + p, f + j]] = -c * t * t;
                    }
                }
            }
        }
        z
    }

    fn mask_jets(&self, points: &[[T; 2]], order: usize) -> Array2<T> {
        let (np, d) = (points.len(), self.spec.input_dim);
        let pi = T::PI();
        let mut m = Array2::zeros(((1 + order * d) * np, 1));
        for (p, x) in points.iter().enumerate() {
            let mut s = [T::one(); 2];
            let mut c = [T::one(); 2];
            for i in 0..d {
                // sin(pi x) through the nearer endpoint so both ends give exact zeros.
                let near = if x[i] > T::lit(0.5) { T::one() - x[i] } else { x[i] };
                s[i] = (pi * near).sin();
                c[i] = (pi * x[i]).cos();
            }
            let value = s[0] * s[1];
            m[[p, 0]] = value;
            for i in 0..d {
                let other = if d == 2 { s[1 - i] } else { T::one() };
                if order >= 1 {
                    m[[(1 + i) * np + p, 0]] = pi * c[i] * other;
                }
                if order >= 2 {
                    m[[(1 + d + i) * np + p, 0]] = -pi * pi * value;
                }
            }
        }
        m
    }

    fn run(&self, points: &[[T; 2]], order: usize) -> (Jets<T>, Tape<T>) {
        let np = points.len();
        let d = self.spec.input_dim;
        let dims = self.spec.layer_dims();
        let mut h = self.feature_jets(points, order);
        let mut tape = Tape { order, points: np, inputs: Vec::new(), pre: Vec::new(), mask: None };
        let mut offset = 0;
        for (l, &(out, inp)) in dims.iter().enumerate() {
            let (w, b) = self.layer(offset, out, inp);
            offset += out * inp + out;
            let mut u = h.dot(&w.t());
            u.slice_mut(s![0..np, ..]).outer_iter_mut().for_each(|mut row| row += &b);
            tape.inputs.push(h);
            if l + 1 < dims.len() {
                h = gelu_forward(&u, np, d, order);
                tape.pre.push(u);
            } else {
                h = u;
            }
        }
        if self.spec.mask {
            let m = self.mask_jets(points, order);
            apply_mask(&mut h, &m, np, d, order);
            tape.mask = Some(m);
        }
        (Jets { order, dim: d, points: np, data: h }, tape)
    }

    fn backward(&self, tape: &Tape<T>, adjoint: Jets<T>) -> Vec<T> {
        let (np, d, order) = (tape.points, self.spec.input_dim, tape.order);
        let mut ubar = adjoint.data;
        if let Some(m) = &tape.mask {
            mask_adjoint(&mut ubar, m, np, d, order);
        }
        let dims = self.spec.layer_dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut off = 0;
        for &(o, i) in &dims {
            offsets.push(off);
            off += o * i + o;
        }
        let mut grads = vec![T::zero(); self.params.len()];
        for l in (0..dims.len()).rev() {
            let (out, inp) = dims[l];
            let gw = ubar.t().dot(&tape.inputs[l]);
            let gb = ubar.slice(s![0..np, ..]).sum_axis(Axis(0));
            let o = offsets[l];
            grads[o..o + out * inp].copy_from_slice(gw.as_slice().expect("standard layout"));
            grads[o + out * inp..o + out * inp + out].copy_from_slice(gb.as_slice().expect("contiguous"));
            if l > 0 {
                let (w, _) = self.layer(o, out, inp);
                let hbar = ubar.dot(&w);
                ubar = gelu_backward(&tape.pre[l - 1], &hbar, np, d, order);
            }
        }
        grads
    }
}

fn gelu_forward<T: Real>(u: &Array2<T>, np: usize, d: usize, order: usize) -> Array2<T> {
    let mut v = Array2::zeros(u.dim());
    for p in 0..np {
        for j in 0..u.ncols() {
            let g = gelu_taylor(u[[p, j]]);
            v[[p, j]] = g.value;
            for i in 0..d * order.min(1) {
                let u1 = u[[(1 + i) * np + p, j]];
                v[[(1 + i) * np + p, j]] = g.d1 * u1;
                if order >= 2 {
                    let u2 = u[[(1 + d + i) * np + p, j]];
                    v[[(1 + d + i) * np + p, j]] = g.d2 * u1 * u1 + g.d1 * u2;
                }
            }
        }
    }
    v
}

fn gelu_backward<T: Real>(u: &Array2<T>, hbar: &Array2<T>, np: usize, d: usize, order: usize) -> Array2<T> {
    let two = T::lit(2.0);
    let mut out = Array2::zeros(u.dim());
    for p in 0..np {
        for j in 0..u.ncols() {
            let g = gelu_taylor(u[[p, j]]);
            let mut acc = hbar[[p, j]] * g.d1;
            for i in 0..d * order.min(1) {
                let (r1, a1, u1) = ((1 + i) * np + p, hbar[[(1 + i) * np + p, j]], u[[(1 + i) * np + p, j]]);
                acc += a1 * g.d2 * u1;
                let mut o1 = a1 * g.d1;
                if order >= 2 {
                    let r2 = (1 + d + i) * np + p;
                    let (b, u2) = (hbar[[r2, j]], u[[r2, j]]);
                    acc += b * (g.d3 * u1 * u1 + g.d2 * u2);
                    o1 += b * two * g.d2 * u1;
                    out[[r2, j]] = b * g.d1;
                }
                out[[r1, j]] = o1;
            }
            out[[p, j]] = acc;
        }
    }
    out
}

/// Replaces head 0 by the jet product with the mask.
fn apply_mask<T: Real>(h: &mut Array2<T>, m: &Array2<T>, np: usize, d: usize, order: usize) {
    let two = T::lit(2.0);
    for p in 0..np {
        let (m0, n0) = (m[[p, 0]], h[[p, 0]]);
        for i in 0..d * order.min(1) {
            let r1 = (1 + i) * np + p;
            let (m1, n1) = (m[[r1, 0]], h[[r1, 0]]);
            if order >= 2 {
                let r2 = (1 + d + i) * np + p;
                h[[r2, 0]] = m[[r2, 0]] * n0 + two * m1 * n1 + m0 * h[[r2, 0]];
            }
            h[[r1, 0]] = m1 * n0 + m0 * n1;
        }
        h[[p, 0]] = m0 * n0;
    }
}

fn mask_adjoint<T: Real>(ubar: &mut Array2<T>, m: &Array2<T>, np: usize, d: usize, order: usize) {
    let two = T::lit(2.0);
    for p in 0..np {
        let m0 = m[[p, 0]];
        let mut n0 = ubar[[p, 0]] * m0;
        for i in 0..d * order.min(1) {
            let r1 = (1 + i) * np + p;
            let (g, m1) = (ubar[[r1, 0]], m[[r1, 0]]);
            n0 += g * m1;
            let mut n1 = g * m0;
            if order >= 2 {
                let r2 = (1 + d + i) * np + p;
                let s = ubar[[r2, 0]];
                n0 += s * m[[r2, 0]];
                n1 += two * s * m1;
                ubar[[r2, 0]] = s * m0;
            }
            ubar[[r1, 0]] = n1;
        }
        ubar[[p, 0]] = n0;
    }
}
