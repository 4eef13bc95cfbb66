use ndarray::{Array2, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{role, substream};
use crate::{Error, Real, Result};

/// Grid-to-grid network whose linear layers act on each axis separately:
/// one `nodes x nodes` matrix per spatial axis and one `width x width`
/// matrix on the channels, followed by a channel bias and ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub dim: usize,
    /// Nodes per axis.
    pub nodes: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    pub layers: usize,
}

impl OperatorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::param("operators act on one- or two-dimensional grids"));
        }
        if self.nodes < 2 || self.in_channels == 0 || self.out_channels == 0 || self.width == 0 {
            return Err(Error::param("operator shape entries must be positive"));
        }
        Ok(())
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.pow(self.dim as u32)
    }

    fn layer_len(&self) -> usize {
        self.dim * self.nodes * self.nodes + self.width * self.width + self.width
    }

    fn lift_len(&self) -> usize {
        self.width * self.in_channels + self.width
    }

    pub fn num_params(&self) -> usize {
        self.lift_len() + self.layers * self.layer_len() + self.out_channels * self.width + self.out_channels
    }
}

/// Separable MLP operator with per-channel input normalisation.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorNet<T> {
    spec: OperatorSpec,
    shift: Vec<T>,
    scale: Vec<T>,
    params: Vec<T>,
}

struct LayerTape<T> {
    input: Array2<T>,
    /// Channel-mixed input before the spatial maps.
    mixed: Array2<T>,
    /// After the first spatial map (two-dimensional grids only).
    partial: Option<Array2<T>>,
    pre: Array2<T>,
}

pub struct OperatorTape<T> {
    batch: usize,
    x: Array2<T>,
    layers: Vec<LayerTape<T>>,
    last: Array2<T>,
}

impl<T: Real> OperatorNet<T> {
    pub fn new(spec: OperatorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = substream(&[seed, role::INIT]);
        let mut normal = |n: usize, std: f64, out: &mut Vec<T>| {
            for _ in 0..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                out.push(T::lit(std * z));
            }
        };
        let (n, w) = (spec.nodes, spec.width);
        let mut params = Vec::with_capacity(spec.num_params());
        normal(w * spec.in_channels, (2.0 / (w + spec.in_channels) as f64).sqrt(), &mut params);
        params.extend(std::iter::repeat_n(T::zero(), w));
        for _ in 0..spec.layers {
            for _ in 0..spec.dim {
                normal(n * n, (1.0 / n as f64).sqrt(), &mut params);
            }
            normal(w * w, (2.0 / w as f64).sqrt(), &mut params);
            params.extend(std::iter::repeat_n(T::zero(), w));
        }
        normal(spec.out_channels * w, (2.0 / (w + spec.out_channels) as f64).sqrt(), &mut params);
        params.extend(std::iter::repeat_n(T::zero(), spec.out_channels));
        Ok(Self { spec, shift: vec![T::zero(); spec.in_channels], scale: vec![T::one(); spec.in_channels], params })
    }

    pub fn from_parts(spec: OperatorSpec, shift: Vec<T>, scale: Vec<T>, params: Vec<T>) -> Result<Self> {
        spec.validate()?;
        if shift.len() != spec.in_channels || scale.len() != spec.in_channels || params.len() != spec.num_params() {
            return Err(Error::data("operator arrays do not match the declared shape"));
        }
        if scale.iter().any(|&s| !(s > T::zero())) || shift.iter().chain(&params).any(|x| !x.is_finite()) {
            return Err(Error::data("invalid operator parameters"));
        }
        Ok(Self { spec, shift, scale, params })
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn shift(&self) -> &[T] {
        &self.shift
    }

    pub fn scale(&self) -> &[T] {
        &self.scale
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

    /// Sets the affine input map to zero mean and unit deviation per channel over `inputs`.
    pub fn fit_normalization(&mut self, inputs: &[Vec<T>]) -> Result<()> {
        let c = self.spec.in_channels;
        let per = self.spec.total_nodes() * c;
        if inputs.is_empty() || inputs.iter().any(|x| x.len() != per) {
            return Err(Error::data("normalisation needs non-empty inputs of the operator's shape"));
        }
        let count = T::from_usize_lossy(inputs.len() * self.spec.total_nodes());
        for ch in 0..c {
            let vals: Vec<T> = inputs.iter().flat_map(|x| x.iter().skip(ch).step_by(c).copied()).collect();
            let mean = crate::real::pairwise_sum(&vals) / count;
            let sq: Vec<T> = vals.iter().map(|&v| (v - mean) * (v - mean)).collect();
            let std = (crate::real::pairwise_sum(&sq) / count).sqrt();
            self.shift[ch] = mean;
            self.scale[ch] = if std > T::lit(1e-12) * (T::one() + mean.abs()) { std } else { T::one() };
        }
        Ok(())
    }

    fn view(&self, offset: usize, rows: usize, cols: usize) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((rows, cols), &self.params[offset..offset + rows * cols]).expect("parameter block")
    }

    /// Outputs per sample, node-major with `out_channels` values per node.
    pub fn forward(&self, inputs: &[&[T]]) -> Result<Vec<Vec<T>>> {
        Ok(self.unpack(&self.run(inputs)?.0, inputs.len()))
    }

    pub fn forward_tape(&self, inputs: &[&[T]]) -> Result<(Vec<Vec<T>>, OperatorTape<T>)> {
        let (y, tape) = self.run(inputs)?;
        Ok((self.unpack(&y, inputs.len()), tape))
    }

    fn unpack(&self, y: &Array2<T>, batch: usize) -> Vec<Vec<T>> {
        let (nt, co) = (self.spec.total_nodes(), self.spec.out_channels);
        (0..batch)
            .map(|b| {
                let mut out = Vec::with_capacity(nt * co);
                for n in 0..nt {
                    out.extend(y.row(n * batch + b).iter().copied());
                }
                out
            })
            .collect()
    }

    /// Applies the spatial matrices to a `(nodes..., batch, width)` block.
    fn spatial(&self, offset: usize, g: &Array2<T>, batch: usize) -> (Option<Array2<T>>, Array2<T>) {
        let (n, w) = (self.spec.nodes, self.spec.width);
        let cols = g.len() / n;
        let gx = ArrayView2::from_shape((n, cols), g.as_slice().expect("standard layout")).expect("shape");
        let sx = self.view(offset, n, n);
        let z1 = sx.dot(&gx).into_shape_with_order((g.nrows(), w)).expect("shape");
        if self.spec.dim == 1 {
            return (None, z1);
        }
        let sy = self.view(offset + n * n, n, n);
        let block = n * batch * w;
        let mut z2 = Vec::with_capacity(z1.len());
        let flat = z1.as_slice().expect("standard layout");
        for i in 0..n {
            let bi = ArrayView2::from_shape((n, batch * w), &flat[i * block..(i + 1) * block]).expect("shape");
            z2.extend(sy.dot(&bi).iter().copied());
        }
        (Some(z1), Array2::from_shape_vec((g.nrows(), w), z2).expect("shape"))
    }

    fn run(&self, inputs: &[&[T]]) -> Result<(Array2<T>, OperatorTape<T>)> {
        let s = self.spec;
        let (nt, ci, w) = (s.total_nodes(), s.in_channels, s.width);
        let batch = inputs.len();
        if batch == 0 || inputs.iter().any(|x| x.len() != nt * ci) {
            return Err(Error::data("operator inputs do not match the declared shape"));
        }
        let mut x = Array2::zeros((nt * batch, ci));
        for (b, inp) in inputs.iter().enumerate() {
            for n in 0..nt {
                for c in 0..ci {
                    x[[n * batch + b, c]] = (inp[n * ci + c] - self.shift[c]) / self.scale[c];
                }
            }
        }
        let mut off = 0;
        let lift = self.view(off, w, ci);
        let mut h = x.dot(&lift.t());
        let bias = ndarray::ArrayView1::from(&self.params[off + w * ci..off + w * ci + w]);
        h += &bias;
        off += s.lift_len();
        let mut layers = Vec::with_capacity(s.layers);
        for _ in 0..s.layers {
            let nn = s.nodes * s.nodes;
            let f = self.view(off + s.dim * nn, w, w);
            let mixed = h.dot(&f.t());
            let (partial, mut pre) = self.spatial(off, &mixed, batch);
            let bias = ndarray::ArrayView1::from(&self.params[off + s.dim * nn + w * w..off + s.layer_len()]);
            pre += &bias;
            let next = pre.mapv(|v| v.max(T::zero()));
            layers.push(LayerTape { input: h, mixed, partial, pre });
            h = next;
            off += s.layer_len();
        }
        let proj = self.view(off, s.out_channels, w);
        let mut y = h.dot(&proj.t());
        let bias = ndarray::ArrayView1::from(&self.params[off + s.out_channels * w..]);
        y += &bias;
        Ok((y, OperatorTape { batch, x, layers, last: h }))
    }

    /// Parameter gradient for the adjoint of every output value.
    pub fn backward(&self, tape: &OperatorTape<T>, out_adjoint: &[Vec<T>]) -> Result<Vec<T>> {
        let s = self.spec;
        let (nt, co, w, n) = (s.total_nodes(), s.out_channels, s.width, s.nodes);
        let batch = tape.batch;
        if out_adjoint.len() != batch || out_adjoint.iter().any(|a| a.len() != nt * co) {
            return Err(Error::data("output adjoint does not match the batch"));
        }
        let mut ybar = Array2::zeros((nt * batch, co));
        for (b, a) in out_adjoint.iter().enumerate() {
            for k in 0..nt {
                for c in 0..co {
                    ybar[[k * batch + b, c]] = a[k * co + c];
                }
            }
        }
        let mut grads = vec![T::zero(); self.params.len()];
        let mut put = |offset: usize, block: &[T]| grads[offset..offset + block.len()].copy_from_slice(block);
        let mut off = s.lift_len() + s.layers * s.layer_len();
        let gp = ybar.t().dot(&tape.last);
        put(off, gp.as_slice().expect("standard layout"));
        put(off + co * w, ybar.sum_axis(Axis(0)).as_slice().expect("contiguous"));
        let mut hbar = ybar.dot(&self.view(off, co, w));
        for layer in tape.layers.iter().rev() {
            off -= s.layer_len();
            let nn = n * n;
            let pbar = ndarray::Zip::from(&hbar).and(&layer.pre).map_collect(|&g, &p| if p > T::zero() { g } else { T::zero() });
            put(off + s.dim * nn + w * w, pbar.sum_axis(Axis(0)).as_slice().expect("contiguous"));
            let sx = self.view(off, n, n);
            // Undo the spatial maps in reverse order.
            let z1bar = if s.dim == 2 {
                let sy = self.view(off + nn, n, n);
                let block = n * batch * w;
                let z1 = layer.partial.as_ref().expect("two-dimensional tape");
                let (pf, zf) = (pbar.as_slice().expect("layout"), z1.as_slice().expect("layout"));
                let mut gsy = Array2::<T>::zeros((n, n));
                let mut out = Vec::with_capacity(pbar.len());
                for i in 0..n {
                    let pb = ArrayView2::from_shape((n, batch * w), &pf[i * block..(i + 1) * block]).expect("shape");
                    let zb = ArrayView2::from_shape((n, batch * w), &zf[i * block..(i + 1) * block]).expect("shape");
                    gsy += &pb.dot(&zb.t());
                    out.extend(sy.t().dot(&pb).iter().copied());
                }
                put(off + nn, gsy.as_slice().expect("layout"));
                Array2::from_shape_vec(pbar.dim(), out).expect("shape")
            } else {
                pbar
            };
            let cols = z1bar.len() / n;
            let zb = ArrayView2::from_shape((n, cols), z1bar.as_slice().expect("layout")).expect("shape");
            let gm = ArrayView2::from_shape((n, cols), layer.mixed.as_slice().expect("layout")).expect("shape");
            put(off, zb.dot(&gm.t()).as_slice().expect("layout"));
            let mbar = sx.t().dot(&zb).into_shape_with_order((layer.mixed.nrows(), w)).expect("shape");
            let f = self.view(off + s.dim * nn, w, w);
            put(off + s.dim * nn, mbar.t().dot(&layer.input).as_slice().expect("layout"));
            hbar = mbar.dot(&f);
        }
        let ci = s.in_channels;
        put(0, hbar.t().dot(&tape.x).as_slice().expect("layout"));
        put(w * ci, hbar.sum_axis(Axis(0)).as_slice().expect("contiguous"));
        Ok(grads)
    }
}
