//! Generative moment matching network: a feedforward generator trained by
//! minimizing the kernel two-sample discrepancy between generated points and
//! the training pseudo-observations, providing implicit copula samples.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::pseudo_observations;
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::rng::{substream, SeedStream};
use crate::scalar::Real;

/// Gaussian kernel exp(-||u - v||^2 / h).
pub fn gaussian_kernel<F: Real>(u: &[F], v: &[F], h: F) -> Result<F> {
    if u.len() != v.len() {
        return Err(Error::dim(format!("{} vs {} coordinates", u.len(), v.len())));
    }
    if h <= F::zero() {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    Ok((-squared_distance(u, v) / h).exp())
}

/// Mixture of Gaussian kernels over a set of bandwidths.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelMixture<F> {
    bandwidths: Vec<F>,
}

impl<F: Real> KernelMixture<F> {
    pub fn new(bandwidths: Vec<F>) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(Error::invalid("kernel mixture needs at least one bandwidth"));
        }
        if bandwidths.iter().any(|&h| h <= F::zero()) {
            return Err(Error::invalid("kernel bandwidths must be positive"));
        }
        Ok(KernelMixture { bandwidths })
    }

    pub fn bandwidths(&self) -> &[F] {
        &self.bandwidths
    }
}

impl<F: Real> Default for KernelMixture<F> {
    /// The six-bandwidth mixture used for all experiments.
    fn default() -> Self {
        KernelMixture {
            bandwidths: [0.001, 0.01, 0.15, 0.25, 0.50, 0.75]
                .iter()
                .map(|&h| F::of(h))
                .collect(),
        }
    }
}

/// Biased two-sample kernel discrepancy (V-statistic, diagonal included),
/// summed over the mixture components:
/// mean K(A,A) - 2 mean K(A,B) + mean K(B,B).
pub fn mmd2<F: Real>(a: &Matrix<F>, b: &Matrix<F>, km: &KernelMixture<F>) -> Result<F> {
    if a.ncols() != b.ncols() {
        return Err(Error::dim(format!(
            "samples have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::invalid("mmd2 needs non-empty samples"));
    }
    let hs = km.bandwidths();
    let t_aa = mean_kernel_sum(a, a, hs);
    let t_ab = mean_kernel_sum(a, b, hs);
    let t_bb = mean_kernel_sum(b, b, hs);
    Ok(t_aa - F::of(2.0) * t_ab + t_bb)
}

fn mean_kernel_sum<F: Real>(a: &Matrix<F>, b: &Matrix<F>, hs: &[F]) -> F {
    let partials: Vec<F> = (0..a.nrows())
        .into_par_iter()
        .map(|i| {
            let ai = a.row(i);
            let mut s = F::zero();
            for k in 0..b.nrows() {
                let d2 = squared_distance(ai, b.row(k));
                for &h in hs {
                    s = s + (-d2 / h).exp();
                }
            }
            s
        })
        .collect();
    let total: F = partials.into_iter().sum();
    total / (F::from_count(a.nrows()) * F::from_count(b.nrows()))
}

/// Loss value plus gradient with respect to the generated rows `y`.
fn mmd2_value_and_grad<F: Real>(
    u: &Matrix<F>,
    y: &Matrix<F>,
    km: &KernelMixture<F>,
) -> (F, Matrix<F>) {
    let hs = km.bandwidths();
    let d = y.ncols();
    let m_u = u.nrows();
    let m_y = y.nrows();
    let t_uu = mean_kernel_sum(u, u, hs);

    // cross term and its gradient contribution
    struct RowPart<F> {
        kernel_sum: F,
        grad: Vec<F>,
    }
    let cross: Vec<RowPart<F>> = (0..m_y)
        .into_par_iter()
        .map(|l| {
            let yl = y.row(l);
            let mut kernel_sum = F::zero();
            let mut grad = vec![F::zero(); d];
            for k in 0..m_u {
                let uk = u.row(k);
                let d2 = squared_distance(yl, uk);
                let mut w = F::zero();
                for &h in hs {
                    let e = (-d2 / h).exp();
                    kernel_sum = kernel_sum + e;
                    w = w + e / h;
                }
                for (g, (&a, &b)) in grad.iter_mut().zip(yl.iter().zip(uk)) {
                    *g = *g + w * (a - b);
                }
            }
            RowPart { kernel_sum, grad }
        })
        .collect();

    let within: Vec<RowPart<F>> = (0..m_y)
        .into_par_iter()
        .map(|l| {
            let yl = y.row(l);
            let mut kernel_sum = F::zero();
            let mut grad = vec![F::zero(); d];
            for k in 0..m_y {
                if k == l {
                    kernel_sum = kernel_sum + F::from_count(hs.len());
                    continue;
                }
                let yk = y.row(k);
                let d2 = squared_distance(yl, yk);
                let mut w = F::zero();
                for &h in hs {
                    let e = (-d2 / h).exp();
                    kernel_sum = kernel_sum + e;
                    w = w + e / h;
                }
                for (g, (&a, &b)) in grad.iter_mut().zip(yl.iter().zip(yk)) {
                    *g = *g + w * (a - b);
                }
            }
            RowPart { kernel_sum, grad }
        })
        .collect();

    let n_uy = F::from_count(m_u) * F::from_count(m_y);
    let n_yy = F::from_count(m_y) * F::from_count(m_y);
    let t_uy: F = cross.iter().map(|r| r.kernel_sum).sum::<F>() / n_uy;
    let t_yy: F = within.iter().map(|r| r.kernel_sum).sum::<F>() / n_yy;
    let value = t_uu - F::of(2.0) * t_uy + t_yy;

    let four = F::of(4.0);
    let mut grad = Matrix::zeros(m_y, d);
    for l in 0..m_y {
        let row = grad.row_mut(l);
        for (j, g) in row.iter_mut().enumerate() {
            *g = four * cross[l].grad[j] / n_uy - four * within[l].grad[j] / n_yy;
        }
    }
    (value, grad)
}

/// Network shape: input dimension equals output dimension, rectifier hidden
/// activations, logistic-sigmoid output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Architecture {
    pub layer_dims: Vec<usize>,
    pub use_batch_norm: bool,
    pub dropout_rate: f64,
}

impl Architecture {
    /// Architecture with `hidden` layer widths; input and output width `d`.
    pub fn new(d: usize, hidden: &[usize]) -> Result<Self> {
        let mut layer_dims = Vec::with_capacity(hidden.len() + 2);
        layer_dims.push(d);
        layer_dims.extend_from_slice(hidden);
        layer_dims.push(d);
        let arch = Architecture {
            layer_dims,
            use_batch_norm: true,
            dropout_rate: 0.1,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::invalid("architecture needs input and output layers"));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::invalid("layer dimensions must be >= 1"));
        }
        if self.layer_dims.first() != self.layer_dims.last() {
            return Err(Error::invalid("input and output dimensions must match"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout rate must lie in [0,1)"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated")
    }

    pub fn hidden_dims(&self) -> &[usize] {
        &self.layer_dims[1..self.layer_dims.len() - 1]
    }

    /// Label in the `<layers>x<width>` notation, e.g. `1x300`.
    pub fn label(&self) -> String {
        let hidden = self.hidden_dims();
        if hidden.is_empty() {
            return "0x0".to_string();
        }
        format!("{}x{}", hidden.len(), hidden[0])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DenseLayer<F> {
    w: Matrix<F>, // in x out
    b: Vec<F>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BatchNorm<F> {
    gamma: Vec<F>,
    beta: Vec<F>,
    running_mean: Vec<F>,
    running_var: Vec<F>,
}

const BN_EPS: f64 = 1e-3;
const BN_MOMENTUM: f64 = 0.99;

/// Feedforward generator with per-layer batch normalization and dropout.
/// Inference is deterministic (dropout off, running batch-norm statistics)
/// and does not mutate the network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorNetwork<F> {
    architecture: Architecture,
    hidden: Vec<(DenseLayer<F>, Option<BatchNorm<F>>)>,
    output: DenseLayer<F>,
    training_log: Vec<F>,
    best_epoch: Option<usize>,
    pub seed: u64,
}

/// Per-batch caches for backpropagation.
struct LayerCache<F> {
    input: Matrix<F>,
    bn: Option<(Matrix<F>, Vec<F>)>, // (x_hat, inv_std)
    pre_relu: Matrix<F>,
    dropout_mask: Option<Matrix<F>>,
}

struct ForwardCache<F> {
    layers: Vec<LayerCache<F>>,
    output_input: Matrix<F>,
    output: Matrix<F>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    pub epochs: usize,
    /// None = full batch.
    pub batch_size: Option<usize>,
    pub learning_rate: F,
    pub kernel: KernelMixture<F>,
    pub seed: u64,
}

impl<F: Real> Default for TrainConfig<F> {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            batch_size: None,
            learning_rate: F::of(1e-3),
            kernel: KernelMixture::default(),
            seed: 0,
        }
    }
}

impl<F: Real> GeneratorNetwork<F> {
    /// Fresh network with symmetric-uniform fan-in weight initialization,
    /// zero biases, and identity-initialized batch normalization.
    pub fn new(architecture: Architecture, seed: u64) -> Result<Self> {
        architecture.validate()?;
        let mut rng = substream(seed, 0xA11);
        let dims = &architecture.layer_dims;
        let mut hidden = Vec::new();
        for l in 0..dims.len() - 2 {
            let dense = init_dense(dims[l], dims[l + 1], &mut rng);
            let bn = architecture.use_batch_norm.then(|| BatchNorm {
                gamma: vec![F::one(); dims[l + 1]],
                beta: vec![F::zero(); dims[l + 1]],
                running_mean: vec![F::zero(); dims[l + 1]],
                running_var: vec![F::one(); dims[l + 1]],
            });
            hidden.push((dense, bn));
        }
        let output = init_dense(dims[dims.len() - 2], dims[dims.len() - 1], &mut rng);
        Ok(GeneratorNetwork {
            architecture,
            hidden,
            output,
            training_log: Vec::new(),
            best_epoch: None,
            seed,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn training_log(&self) -> &[F] {
        &self.training_log
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    /// Deterministic inference pass: running batch-norm statistics, no
    /// dropout, no mutation.
    pub fn forward_infer(&self, v: &Matrix<F>) -> Result<Matrix<F>> {
        if v.ncols() != self.architecture.input_dim() {
            return Err(Error::dim(format!(
                "input has {} columns, network expects {}",
                v.ncols(),
                self.architecture.input_dim()
            )));
        }
        let mut h = v.clone();
        for (dense, bn) in &self.hidden {
            let mut z = affine(&h, dense);
            if let Some(bn) = bn {
                let eps = F::of(BN_EPS);
                for i in 0..z.nrows() {
                    let row = z.row_mut(i);
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = bn.gamma[j] * (*v - bn.running_mean[j])
                            / (bn.running_var[j] + eps).sqrt()
                            + bn.beta[j];
                    }
                }
            }
            z = z.map(|x| x.max(F::zero()));
            h = z;
        }
        let z = affine(&h, &self.output);
        Ok(z.map(sigmoid))
    }

    /// Training-mode pass: batch statistics (optionally folded into the
    /// running averages) and inverted-scaling dropout when `dropout_rng`
    /// is provided.
    fn forward_train<R: Rng + ?Sized>(
        &mut self,
        v: &Matrix<F>,
        mut dropout_rng: Option<&mut R>,
        update_running: bool,
    ) -> Result<(Matrix<F>, ForwardCache<F>)> {
        if v.nrows() == 0 {
            return Err(Error::invalid(
                "empty batch in train mode: batch statistics undefined",
            ));
        }
        if v.ncols() != self.architecture.input_dim() {
            return Err(Error::dim(format!(
                "input has {} columns, network expects {}",
                v.ncols(),
                self.architecture.input_dim()
            )));
        }
        let rate = F::of(self.architecture.dropout_rate);
        let mut h = v.clone();
        let mut layers = Vec::with_capacity(self.hidden.len());
        for (dense, bn) in &mut self.hidden {
            let input = h;
            let mut z = affine(&input, dense);
            let bn_cache = if let Some(bn) = bn {
                let m = z.nrows();
                let cols = z.ncols();
                let mf = F::from_count(m);
                let eps = F::of(BN_EPS);
                let mut mean = vec![F::zero(); cols];
                let mut var = vec![F::zero(); cols];
                for i in 0..m {
                    for (j, &x) in z.row(i).iter().enumerate() {
                        mean[j] = mean[j] + x;
                    }
                }
                for mj in mean.iter_mut() {
                    *mj = *mj / mf;
                }
                for i in 0..m {
                    for (j, &x) in z.row(i).iter().enumerate() {
                        let d = x - mean[j];
                        var[j] = var[j] + d * d;
                    }
                }
                for vj in var.iter_mut() {
                    *vj = *vj / mf;
                }
                if update_running {
                    let mom = F::of(BN_MOMENTUM);
                    for j in 0..cols {
                        bn.running_mean[j] = mom * bn.running_mean[j] + (F::one() - mom) * mean[j];
                        bn.running_var[j] = mom * bn.running_var[j] + (F::one() - mom) * var[j];
                    }
                }
                let inv_std: Vec<F> =
                    var.iter().map(|&v| F::one() / (v + eps).sqrt()).collect();
                let mut x_hat = Matrix::zeros(m, cols);
                for i in 0..m {
                    for j in 0..cols {
                        x_hat[(i, j)] = (z[(i, j)] - mean[j]) * inv_std[j];
                    }
                }
                for i in 0..m {
                    for j in 0..cols {
                        z[(i, j)] = bn.gamma[j] * x_hat[(i, j)] + bn.beta[j];
                    }
                }
                Some((x_hat, inv_std))
            } else {
                None
            };
            let pre_relu = z.clone();
            let mut out = z.map(|x| x.max(F::zero()));
            let dropout_mask = match dropout_rng.as_deref_mut() {
                Some(rng) if rate > F::zero() => {
                    let keep = F::one() - rate;
                    let mask = Matrix::from_fn(out.nrows(), out.ncols(), |_, _| {
                        if F::uniform_open01(rng) < keep {
                            F::one() / keep
                        } else {
                            F::zero()
                        }
                    });
                    for i in 0..out.nrows() {
                        for j in 0..out.ncols() {
                            out[(i, j)] = out[(i, j)] * mask[(i, j)];
                        }
                    }
                    Some(mask)
                }
                _ => None,
            };
            layers.push(LayerCache {
                input,
                bn: bn_cache,
                pre_relu,
                dropout_mask,
            });
            h = out;
        }
        let output_input = h;
        let z = affine(&output_input, &self.output);
        let y = z.map(sigmoid);
        let cache = ForwardCache {
            layers,
            output_input,
            output: y.clone(),
        };
        Ok((y, cache))
    }

    /// Loss and flattened parameter gradients for one batch; used by the
    /// optimizer and by the finite-difference gradient check.
    pub fn loss_and_grads<R: Rng + ?Sized>(
        &mut self,
        u_batch: &Matrix<F>,
        v: &Matrix<F>,
        km: &KernelMixture<F>,
        dropout_rng: Option<&mut R>,
        update_running: bool,
    ) -> Result<(F, Vec<F>)> {
        let (y, cache) = self.forward_train(v, dropout_rng, update_running)?;
        let (loss, dy) = mmd2_value_and_grad(u_batch, &y, km);
        let grads = self.backward(&cache, &dy);
        Ok((loss, grads))
    }

    /// Training-mode loss without side effects (no running-stat update).
    pub fn training_loss<R: Rng + ?Sized>(
        &mut self,
        u: &Matrix<F>,
        v: &Matrix<F>,
        km: &KernelMixture<F>,
        dropout_rng: Option<&mut R>,
    ) -> Result<F> {
        let (y, _) = self.forward_train(v, dropout_rng, false)?;
        mmd2(u, &y, km)
    }

    fn backward(&self, cache: &ForwardCache<F>, d_output: &Matrix<F>) -> Vec<F> {
        let y = &cache.output;
        let m = y.nrows();
        let mut dz = Matrix::zeros(m, y.ncols());
        for i in 0..m {
            for j in 0..y.ncols() {
                let yi = y[(i, j)];
                dz[(i, j)] = d_output[(i, j)] * yi * (F::one() - yi);
            }
        }
        let dw_out = cache.output_input.t_matmul(&dz);
        let db_out = column_sums(&dz);
        let mut dh = dz.matmul_t(&self.output.w);

        // hidden gradients, reversed
        type BnGrads<F> = Option<(Vec<F>, Vec<F>)>;
        let mut hidden_grads: Vec<(Matrix<F>, Vec<F>, BnGrads<F>)> =
            Vec::with_capacity(self.hidden.len());
        for (l, (dense, bn)) in self.hidden.iter().enumerate().rev() {
            let cache_l = &cache.layers[l];
            if let Some(mask) = &cache_l.dropout_mask {
                for i in 0..dh.nrows() {
                    for j in 0..dh.ncols() {
                        dh[(i, j)] = dh[(i, j)] * mask[(i, j)];
                    }
                }
            }
            for i in 0..dh.nrows() {
                for j in 0..dh.ncols() {
                    if cache_l.pre_relu[(i, j)] <= F::zero() {
                        dh[(i, j)] = F::zero();
                    }
                }
            }
            let (dx, bn_grads) = match (&cache_l.bn, bn) {
                (Some((x_hat, inv_std)), Some(bn)) => {
                    let rows = dh.nrows();
                    let cols = dh.ncols();
                    let mf = F::from_count(rows);
                    let mut dgamma = vec![F::zero(); cols];
                    let mut dbeta = vec![F::zero(); cols];
                    for i in 0..rows {
                        for j in 0..cols {
                            dgamma[j] = dgamma[j] + dh[(i, j)] * x_hat[(i, j)];
                            dbeta[j] = dbeta[j] + dh[(i, j)];
                        }
                    }
                    let mut dx = Matrix::zeros(rows, cols);
                    for j in 0..cols {
                        let mean_d = dbeta[j] / mf;
                        let mean_dx_hat = dgamma[j] / mf;
                        let scale = bn.gamma[j] * inv_std[j];
                        for i in 0..rows {
                            dx[(i, j)] = scale
                                * (dh[(i, j)] - mean_d - x_hat[(i, j)] * mean_dx_hat);
                        }
                    }
                    (dx, Some((dgamma, dbeta)))
                }
                _ => (dh.clone(), None),
            };
            let dw = cache_l.input.t_matmul(&dx);
            let db = column_sums(&dx);
            dh = dx.matmul_t(&dense.w);
            hidden_grads.push((dw, db, bn_grads));
        }
        hidden_grads.reverse();

        // flatten in the params_flat layout
        let mut flat = Vec::new();
        for (dw, db, bn) in &hidden_grads {
            flat.extend_from_slice(dw.data());
            flat.extend_from_slice(db);
            if let Some((dgamma, dbeta)) = bn {
                flat.extend_from_slice(dgamma);
                flat.extend_from_slice(dbeta);
            }
        }
        flat.extend_from_slice(dw_out.data());
        flat.extend_from_slice(&db_out);
        flat
    }

    /// All trainable parameters in a stable order (batch-norm running
    /// statistics are state, not parameters).
    pub fn params_flat(&self) -> Vec<F> {
        let mut flat = Vec::new();
        for (dense, bn) in &self.hidden {
            flat.extend_from_slice(dense.w.data());
            flat.extend_from_slice(&dense.b);
            if let Some(bn) = bn {
                flat.extend_from_slice(&bn.gamma);
                flat.extend_from_slice(&bn.beta);
            }
        }
        flat.extend_from_slice(self.output.w.data());
        flat.extend_from_slice(&self.output.b);
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[F]) {
        let mut at = 0usize;
        let mut take = |n: usize| {
            let s = &flat[at..at + n];
            at += n;
            s.to_vec()
        };
        for (dense, bn) in &mut self.hidden {
            let wlen = dense.w.nrows() * dense.w.ncols();
            let wdata = take(wlen);
            dense.w = rebuild(dense.w.nrows(), dense.w.ncols(), &wdata);
            dense.b = take(dense.b.len());
            if let Some(bn) = bn {
                bn.gamma = take(bn.gamma.len());
                bn.beta = take(bn.beta.len());
            }
        }
        let wlen = self.output.w.nrows() * self.output.w.ncols();
        let wdata = take(wlen);
        self.output.w = rebuild(self.output.w.nrows(), self.output.w.ncols(), &wdata);
        self.output.b = take(self.output.b.len());
        assert_eq!(at, flat.len(), "parameter vector length mismatch");
    }

    /// Train by stochastic gradient descent on the kernel discrepancy with
    /// adaptive moment estimation. Each epoch draws fresh prior noise (one
    /// row per training row in the batch), shuffles rows into batches, and
    /// logs the epoch loss (batch-size-weighted mean of batch losses, all
    /// three kernel terms included). Returns the snapshot with the smallest
    /// logged loss.
    pub fn train(mut self, u_hat: &Matrix<F>, cfg: &TrainConfig<F>) -> Result<Self> {
        let n = u_hat.nrows();
        if n < 2 {
            return Err(Error::invalid("training needs at least 2 rows"));
        }
        if u_hat.ncols() != self.architecture.output_dim() {
            return Err(Error::dim(format!(
                "training data has {} columns, network emits {}",
                u_hat.ncols(),
                self.architecture.output_dim()
            )));
        }
        let batch = cfg.batch_size.unwrap_or(n).clamp(1, n);
        let d_in = self.architecture.input_dim();
        let mut rng = substream(cfg.seed, 0x7ea1);
        let mut adam = AdamState::new(self.params_flat().len(), cfg.learning_rate);

        let mut log: Vec<F> = Vec::with_capacity(cfg.epochs);
        let mut best: Option<(F, GeneratorNetwork<F>)> = None;
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..cfg.epochs {
            // shuffle rows into batches
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            let mut epoch_loss = F::zero();
            for chunk in order.chunks(batch) {
                let u_batch = u_hat.select_rows(chunk);
                let v = Matrix::from_fn(chunk.len(), d_in, |_, _| F::standard_normal(&mut rng));
                let (loss, grads) =
                    self.loss_and_grads(&u_batch, &v, &cfg.kernel, Some(&mut rng), true)?;
                if !loss.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite training loss at epoch {epoch}; lower the learning rate"
                    )));
                }
                let mut params = self.params_flat();
                adam.step(&mut params, &grads);
                self.set_params_flat(&params);
                epoch_loss = epoch_loss + loss * F::from_count(chunk.len());
            }
            let epoch_loss = epoch_loss / F::from_count(n);
            log.push(epoch_loss);
            let improved = best.as_ref().is_none_or(|(b, _)| epoch_loss < *b);
            if improved {
                best = Some((epoch_loss, self.clone()));
            }
        }

        let (_, mut result) = best.unwrap_or((F::infinity(), self.clone()));
        result.training_log = log.clone();
        result.best_epoch = log
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite losses"))
            .map(|(i, _)| i);
        Ok(result)
    }

    /// Generate `n` rows: standard-normal prior through the inference pass;
    /// `post_pobs` replaces columns by their pseudo-observations.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        post_pobs: bool,
        rng: &mut R,
    ) -> Result<Matrix<F>> {
        if n == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        let d_in = self.architecture.input_dim();
        let v = Matrix::from_fn(n, d_in, |_, _| F::standard_normal(rng));
        let y = self.forward_infer(&v)?;
        Ok(if post_pobs { pseudo_observations(&y) } else { y })
    }
}

fn init_dense<F: Real>(fan_in: usize, fan_out: usize, rng: &mut SeedStream) -> DenseLayer<F> {
    let bound = F::one() / F::from_count(fan_in).sqrt();
    let w = Matrix::from_fn(fan_in, fan_out, |_, _| {
        (F::uniform_open01(rng) * F::of(2.0) - F::one()) * bound
    });
    DenseLayer {
        w,
        b: vec![F::zero(); fan_out],
    }
}

fn affine<F: Real>(input: &Matrix<F>, dense: &DenseLayer<F>) -> Matrix<F> {
    let mut z = input.matmul(&dense.w);
    for i in 0..z.nrows() {
        let row = z.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = *v + dense.b[j];
        }
    }
    z
}

fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

fn column_sums<F: Real>(m: &Matrix<F>) -> Vec<F> {
    let mut s = vec![F::zero(); m.ncols()];
    for i in 0..m.nrows() {
        for (j, &v) in m.row(i).iter().enumerate() {
            s[j] = s[j] + v;
        }
    }
    s
}

fn rebuild<F: Real>(nrows: usize, ncols: usize, data: &[F]) -> Matrix<F> {
    let mut m = Matrix::zeros(nrows, ncols);
    for i in 0..nrows {
        for j in 0..ncols {
            m[(i, j)] = data[i * ncols + j];
        }
    }
    m
}

struct AdamState<F> {
    m: Vec<F>,
    v: Vec<F>,
    t: usize,
    lr: F,
}

impl<F: Real> AdamState<F> {
    fn new(len: usize, lr: F) -> Self {
        AdamState {
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [F], grads: &[F]) {
        let b1 = F::of(0.9);
        let b2 = F::of(0.999);
        let eps = F::of(1e-8);
        self.t += 1;
        let t = self.t as i32;
        let c1 = F::one() - b1.powi(t);
        let c2 = F::one() - b2.powi(t);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (F::one() - b1) * grads[i];
            self.v[i] = b2 * self.v[i] + (F::one() - b2) * grads[i] * grads[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] = params[i] - self.lr * mhat / (vhat.sqrt() + eps);
        }
    }
}
