use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::Optimizer;
use crate::error::{Error, Result};

/// Fully-connected network: ReLU on hidden layers, identity on the output layer.
///
/// With `skip_connections`, every hidden layer whose input and output widths agree adds
/// its input to its activation (a residual block).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    skip: bool,
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
}

/// Gradients (or any other per-parameter quantity) shaped like an [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Grads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Grads {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean over rows and output columns of `w * m * (y - t)^2`.
    Mse,
    /// Cross-entropy between soft targets and the softmax of the outputs; masked-out
    /// columns are excluded from the softmax.
    SoftmaxCrossEntropy,
    /// The targets are per-output loss gradients `g`; the loss is the row mean of
    /// `w * Σ m * g * y`, so a descent step moves `y` against `g`.
    CustomGradient,
}

/// Inputs and targets for one optimizer step, with optional per-row weights and an
/// optional 0/1 mask over output columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub weights: Option<Array1<f64>>,
    pub mask: Option<Array2<f64>>,
}

impl TrainBatch {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::contract(format!(
                "batch has {} input rows but {} target rows",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        Ok(TrainBatch { inputs, targets, weights: None, mask: None })
    }

    /// Builds a batch from row slices.
    pub fn from_rows(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Self> {
        TrainBatch::new(stack(inputs)?, stack(targets)?)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.inputs.nrows() {
            return Err(Error::contract("row weights do not match batch size"));
        }
        self.weights = Some(Array1::from(weights));
        Ok(self)
    }

    pub fn with_mask(mut self, mask: &[Vec<f64>]) -> Result<Self> {
        let mask = stack(mask)?;
        if mask.dim() != self.targets.dim() {
            return Err(Error::contract("mask shape does not match targets"));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

/// Stacks equal-length rows into a matrix.
pub fn stack(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::contract("rows of unequal width"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), width), flat).expect("shape checked"))
}

struct Cache {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// Glorot-uniform weights and zero biases, fully determined by `seed`.
    pub fn new(sizes: &[usize], seed: u64, skip_connections: bool) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config("a network needs at least an input and an output size"));
        }
        if sizes.contains(&0) {
            return Err(Error::config(format!("layer sizes must be positive, got {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            weights.push(Array2::from_shape_fn((n_in, n_out), |_| rng.gen_range(-bound..bound)));
            biases.push(Array1::zeros(n_out));
        }
        Ok(Mlp { sizes: sizes.to_vec(), skip: skip_connections, weights, biases })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn skip_connections(&self) -> bool {
        self.skip
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|p| (p[0] + 1) * p[1]).sum()
    }

    /// Mutable access to each layer's weight matrix and bias.
    pub fn layers_mut(&mut self) -> impl Iterator<Item = (&mut Array2<f64>, &mut Array1<f64>)> {
        self.weights.iter_mut().zip(self.biases.iter_mut())
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::contract("parameter vector has the wrong length"));
        }
        let mut it = params.iter();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|x| *x = *it.next().unwrap());
        }
        Ok(())
    }

    fn residual(&self, layer: usize) -> bool {
        self.skip && layer + 1 < self.weights.len() && self.sizes[layer] == self.sizes[layer + 1] && layer > 0
    }

    fn check_width(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(Error::contract(format!(
                "input width {} does not match network input {}",
                x.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_width(&x.view())?;
        let mut h = x.clone();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = h.dot(w) + b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
                if self.residual(l) {
                    z += &h;
                }
            }
            h = z;
        }
        Ok(h)
    }

    /// Forward pass on a single input row.
    pub fn forward_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
        Ok(self.forward(&x)?.into_raw_vec_and_offset().0)
    }

    fn forward_cache(&self, x: &Array2<f64>) -> (Cache, Array2<f64>) {
        let mut cache = Cache { inputs: Vec::new(), pre: Vec::new() };
        let mut h = x.clone();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = h.dot(w) + b;
            let mut out = z.clone();
            if l < last {
                out.mapv_inplace(|v| v.max(0.0));
                if self.residual(l) {
                    out += &h;
                }
            }
            cache.inputs.push(h);
            cache.pre.push(z);
            h = out;
        }
        (cache, h)
    }

    /// Parameter gradients given `dout = dL/d(output)`.
    fn backward(&self, cache: &Cache, dout: Array2<f64>) -> Grads {
        let layers = self.weights.len();
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        let mut delta = dout;
        for l in (0..layers).rev() {
            // `delta` is dL/d(layer output); turn it into dL/d(pre-activation).
            let residual = self.residual(l);
            let mut dz = if residual { delta.clone() } else { std::mem::take(&mut delta) };
            if l + 1 < layers {
                Zip::from(&mut dz).and(&cache.pre[l]).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let mut gw = Array2::zeros(self.weights[l].raw_dim());
            general_mat_mul(1.0, &cache.inputs[l].t(), &dz, 0.0, &mut gw);
            weights.push(gw);
            biases.push(dz.sum_axis(Axis(0)));
            if l > 0 {
                let mut dh = dz.dot(&self.weights[l].t());
                if residual {
                    dh += &delta;
                }
                delta = dh;
            }
        }
        weights.reverse();
        biases.reverse();
        Grads { weights, biases }
    }

    /// Loss of `batch` under `loss` and its gradient with respect to the outputs.
    fn loss_and_dout(&self, out: &Array2<f64>, batch: &TrainBatch, loss: LossKind) -> (f64, Array2<f64>) {
        let n = out.nrows().max(1) as f64;
        let k = out.ncols().max(1) as f64;
        let row_w = |r: usize| batch.weights.as_ref().map_or(1.0, |w| w[r]);
        let mask = |r: usize, c: usize| batch.mask.as_ref().map_or(1.0, |m| m[[r, c]]);
        let mut dout = Array2::zeros(out.raw_dim());
        let mut total = 0.0;
        for r in 0..out.nrows() {
            let w = row_w(r);
            match loss {
                LossKind::Mse => {
                    for c in 0..out.ncols() {
                        let m = mask(r, c);
                        let e = out[[r, c]] - batch.targets[[r, c]];
                        total += w * m * e * e / (n * k);
                        dout[[r, c]] = 2.0 * w * m * e / (n * k);
                    }
                }
                LossKind::SoftmaxCrossEntropy => {
                    let cols: Vec<usize> = (0..out.ncols()).filter(|&c| mask(r, c) > 0.0).collect();
                    let max = cols.iter().map(|&c| out[[r, c]]).fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + cols.iter().map(|&c| (out[[r, c]] - max).exp()).sum::<f64>().ln();
                    let mass: f64 = cols.iter().map(|&c| batch.targets[[r, c]]).sum();
                    for &c in &cols {
                        let t = batch.targets[[r, c]];
                        let log_p = out[[r, c]] - lse;
                        total -= w * t * log_p / n;
                        dout[[r, c]] = w * (mass * log_p.exp() - t) / n;
                    }
                }
                LossKind::CustomGradient => {
                    for c in 0..out.ncols() {
                        let g = mask(r, c) * batch.targets[[r, c]];
                        total += w * g * out[[r, c]] / n;
                        dout[[r, c]] = w * g / n;
                    }
                }
            }
        }
        (total, dout)
    }

    /// Loss and parameter gradients for `batch`, without updating anything.
    pub fn loss_and_grads(&self, batch: &TrainBatch, loss: LossKind) -> Result<(f64, Grads)> {
        self.check_width(&batch.inputs.view())?;
        if batch.targets.ncols() != self.output_width() {
            return Err(Error::contract("target width does not match network output"));
        }
        let (cache, out) = self.forward_cache(&batch.inputs);
        let (value, dout) = self.loss_and_dout(&out, batch, loss);
        Ok((value, self.backward(&cache, dout)))
    }

    /// Evaluates the loss only.
    pub fn loss(&self, batch: &TrainBatch, loss: LossKind) -> Result<f64> {
        let out = self.forward(&batch.inputs)?;
        Ok(self.loss_and_dout(&out, batch, loss).0)
    }

    /// One optimizer update. Returns the pre-update loss, including the optimizer's L2
    /// term `l2 * ½ Σ θ²` when that is non-zero.
    pub fn train_step(&mut self, batch: &TrainBatch, loss: LossKind, opt: &mut Optimizer, lr: f64) -> Result<f64> {
        let (mut value, mut grads) = self.loss_and_grads(batch, loss)?;
        if opt.l2 != 0.0 {
            let mut sq = 0.0;
            for (g, w) in grads.weights.iter_mut().zip(&self.weights) {
                sq += w.iter().map(|x| x * x).sum::<f64>();
                g.scaled_add(opt.l2, w);
            }
            for (g, b) in grads.biases.iter_mut().zip(&self.biases) {
                sq += b.iter().map(|x| x * x).sum::<f64>();
                g.scaled_add(opt.l2, b);
            }
            value += 0.5 * opt.l2 * sq;
        }
        if !value.is_finite() {
            return Err(Error::Training(format!(
                "non-finite loss {value} ({loss:?}, batch of {} rows, lr {lr})",
                batch.len()
            )));
        }
        opt.apply(self, &grads, lr);
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::optim::Optimizer;
    use ndarray::array;

    #[test]
    fn zero_weights_return_last_bias() {
        let mut net = Mlp::new(&[3, 2], 0, false).unwrap();
        for (w, b) in net.layers_mut() {
            w.fill(0.0);
            b.assign(&array![0.25, -1.5]);
        }
        assert_eq!(net.forward_row(&[1.0, 2.0, 3.0]).unwrap(), vec![0.25, -1.5]);
    }

    #[test]
    fn single_layer_is_affine() {
        let mut net = Mlp::new(&[2, 2], 0, false).unwrap();
        for (w, b) in net.layers_mut() {
            w.assign(&array![[1.0, 2.0], [3.0, 4.0]]);
            b.assign(&array![0.5, -0.5]);
        }
        assert_eq!(net.forward_row(&[1.0, -1.0]).unwrap(), vec![-1.5, -2.5]);
    }

    #[test]
    fn hidden_relu_zeroes_negative_units() {
        let mut net = Mlp::new(&[1, 2, 1], 0, false).unwrap();
        net.weights[0].assign(&array![[1.0, -1.0]]);
        net.weights[1].assign(&array![[1.0], [1.0]]);
        assert_eq!(net.forward_row(&[3.0]).unwrap(), vec![3.0]);
        assert_eq!(net.forward_row(&[-2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn rows_are_independent() {
        let net = Mlp::new(&[4, 8, 3], 5, false).unwrap();
        let x = stack(&[vec![0.1, 0.2, 0.3, 0.4], vec![-1.0, 0.0, 2.0, 1.0]]).unwrap();
        let both = net.forward(&x).unwrap();
        let second = net.forward_row(&[-1.0, 0.0, 2.0, 1.0]).unwrap();
        assert_eq!(both.row(1).to_vec(), second);
    }

    #[test]
    fn construction_rules() {
        assert_eq!(Mlp::new(&[7, 4], 3, false).unwrap(), Mlp::new(&[7, 4], 3, false).unwrap());
        assert_ne!(Mlp::new(&[7, 4], 3, false).unwrap(), Mlp::new(&[7, 4], 4, false).unwrap());
        assert!(Mlp::new(&[7], 0, false).is_err());
        assert!(Mlp::new(&[7, 0, 2], 0, false).is_err());
        let net = Mlp::new(&[17, 400, 400, 2], 0, false).unwrap();
        assert_eq!(net.num_params(), 17 * 400 + 400 + 400 * 400 + 400 + 400 * 2 + 2);
        assert_eq!(net.params().len(), net.num_params());
        let bound = (6.0f64 / 417.0).sqrt();
        assert!(net.weights[0].iter().all(|w| w.abs() <= bound));
        assert!(net.biases.iter().all(|b| b.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let net = Mlp::new(&[3, 2], 0, false).unwrap();
        assert!(net.forward_row(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn perfect_mse_targets_leave_sgd_parameters_unchanged() {
        let mut net = Mlp::new(&[3, 5, 2], 1, false).unwrap();
        let inputs = stack(&[vec![0.5, -0.1, 0.3], vec![1.0, 2.0, -1.0]]).unwrap();
        let targets = net.forward(&inputs).unwrap();
        let batch = TrainBatch::new(inputs, targets).unwrap();
        let before = net.clone();
        let loss = net.train_step(&batch, LossKind::Mse, &mut Optimizer::sgd(), 0.1).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net, before);
    }
}
