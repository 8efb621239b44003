use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::layers::{activation_pattern, backward_seq, forward_seq, Cache};
use super::resample::area_resample;
use super::spec::{build_layers, Architecture, ModelSpec};
use super::tensor::{FeatureMap, Tensor};
use super::ModelError;
use crate::geodata::ImageTile;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
}

/// Network parameters for a [`ModelSpec`] together with training history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    pub spec: ModelSpec,
    arch: Architecture,
    params: Vec<T>,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 for an untrained model.
    pub best_epoch: usize,
}

impl<T: Scalar> TrainedModel<T> {
    /// Fan-in scaled uniform initialization: weights of a layer with fan-in
    /// `n` are drawn from `U(-sqrt(6/n), sqrt(6/n))`, biases start at zero.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let arch = build_layers(spec);
        let mut params = vec![T::zero(); arch.param_count];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &(off, len, fan_in) in &arch.weight_blocks {
            let limit = (6.0 / fan_in as f64).sqrt();
            for p in &mut params[off..off + len] {
                *p = T::of(rng.gen_range(-limit..limit));
            }
        }
        Ok(Self { spec: spec.clone(), arch, params, history: Vec::new(), best_epoch: 0 })
    }

    pub fn from_params(spec: &ModelSpec, params: Vec<T>) -> Result<Self, ModelError> {
        spec.validate()?;
        let arch = build_layers(spec);
        if params.len() != arch.param_count {
            return Err(ModelError::Shape {
                expected: format!("{} parameters", arch.param_count),
                actual: format!("{} parameters", params.len()),
            });
        }
        Ok(Self { spec: spec.clone(), arch, params, history: Vec::new(), best_epoch: 0 })
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn set_params(&mut self, params: Vec<T>) {
        debug_assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    pub(crate) fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Same model with parameters converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> TrainedModel<U> {
        TrainedModel {
            spec: self.spec.clone(),
            arch: self.arch.clone(),
            params: self.params.iter().map(|p| U::of(p.as_f64())).collect(),
            history: self.history.clone(),
            best_epoch: self.best_epoch,
        }
    }

    fn check_batch(&self, batch: &Tensor<T>) -> Result<(), ModelError> {
        let side = self.spec.input_side;
        let shape = batch.shape();
        if shape.len() != 4 || shape[1] != side || shape[2] != side || shape[3] != 3 {
            return Err(ModelError::Shape {
                expected: format!("(N, {side}, {side}, 3)"),
                actual: format!("{shape:?}"),
            });
        }
        Ok(())
    }

    fn sample(&self, batch: &Tensor<T>, i: usize) -> FeatureMap<T> {
        let side = self.spec.input_side;
        FeatureMap::from_vec(side, side, 3, batch.item(i).to_vec())
    }

    fn logit_of(&self, params: &[T], input: FeatureMap<T>) -> T {
        forward_seq(&self.arch.layers, params, input, None).data[0]
    }

    /// Multi-family scores in `(0, 1)`, one per batch item.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Vec<T>, ModelError> {
        self.check_batch(batch)?;
        Ok((0..batch.batch_len())
            .into_par_iter()
            .map(|i| sigmoid(self.logit_of(&self.params, self.sample(batch, i))))
            .collect())
    }

    /// Mean weighted binary cross-entropy over the batch and its gradient:
    ///
    /// `loss = -(1/N) * sum(pos_weight * y * ln(s) + (1 - y) * ln(1 - s))`
    pub fn backward(&self, batch: &Tensor<T>, labels: &[T], pos_weight: T) -> Result<(T, Vec<T>), ModelError> {
        self.loss_and_grad(&self.params, batch, labels, pos_weight)
    }

    pub(crate) fn loss_and_grad(
        &self,
        params: &[T],
        batch: &Tensor<T>,
        labels: &[T],
        pos_weight: T,
    ) -> Result<(T, Vec<T>), ModelError> {
        self.check_batch(batch)?;
        check_labels(labels, batch.batch_len())?;
        let n = T::of_usize(labels.len());
        // per-sample gradients in parallel, reduced in index order
        let per_sample: Vec<(T, Vec<T>)> = (0..labels.len())
            .into_par_iter()
            .map(|i| {
                let mut caches: Vec<Cache<T>> = Vec::new();
                let out = forward_seq(&self.arch.layers, params, self.sample(batch, i), Some(&mut caches));
                let z = out.data[0];
                let y = labels[i];
                let loss = pos_weight * y * softplus(-z) + (T::one() - y) * softplus(z);
                let s = sigmoid_raw(z);
                let dz = ((T::one() - y) * s - pos_weight * y * (T::one() - s)) / n;
                let mut grads = vec![T::zero(); params.len()];
                backward_seq(&self.arch.layers, params, &caches, FeatureMap::from_vec(1, 1, 1, vec![dz]), &mut grads);
                (loss, grads)
            })
            .collect();
        let mut total = T::zero();
        let mut grads = vec![T::zero(); params.len()];
        for (loss, g) in per_sample {
            total += loss;
            for (a, b) in grads.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok((total / n, grads))
    }

    /// Loss only, for finite-difference checks.
    pub fn loss(&self, params: &[T], batch: &Tensor<T>, labels: &[T], pos_weight: T) -> Result<T, ModelError> {
        self.check_batch(batch)?;
        check_labels(labels, batch.batch_len())?;
        let total: T = (0..labels.len())
            .map(|i| {
                let z = self.logit_of(params, self.sample(batch, i));
                let y = labels[i];
                pos_weight * y * softplus(-z) + (T::one() - y) * softplus(z)
            })
            .sum();
        Ok(total / T::of_usize(labels.len()))
    }

    /// ReLU/max-pool decision fingerprint of every batch item under `params`.
    pub fn activation_pattern(&self, params: &[T], batch: &Tensor<T>) -> Result<Vec<u64>, ModelError> {
        self.check_batch(batch)?;
        Ok((0..batch.batch_len())
            .flat_map(|i| activation_pattern(&self.arch.layers, params, self.sample(batch, i)))
            .collect())
    }

    /// Multi-family resemblance of one tile; higher means more multi-family.
    pub fn predict_score<U: Scalar>(&self, tile: &ImageTile<U>) -> Result<T, ModelError> {
        let input = tile_input::<T, U>(tile, self.spec.input_side)?;
        Ok(sigmoid(self.logit_of(&self.params, input)))
    }

    /// Scores many tiles in parallel, preserving order.
    pub fn predict_scores<U: Scalar>(&self, tiles: &[&ImageTile<U>]) -> Result<Vec<T>, ModelError> {
        tiles.par_iter().map(|t| self.predict_score(*t)).collect()
    }
}

fn check_labels<T: Scalar>(labels: &[T], n: usize) -> Result<(), ModelError> {
    if labels.len() != n {
        return Err(ModelError::Label(format!("{} labels for {n} samples", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != T::zero() && y != T::one()) {
        return Err(ModelError::Label(format!("label {bad} is not 0 or 1")));
    }
    Ok(())
}

/// Resamples a tile to the network input side as a feature map.
pub(crate) fn tile_input<T: Scalar, U: Scalar>(tile: &ImageTile<U>, side: usize) -> Result<FeatureMap<T>, ModelError> {
    if tile.pixels.len() != tile.side_px * tile.side_px * 3 || tile.side_px == 0 {
        return Err(ModelError::Shape {
            expected: format!("{0}x{0}x3 RGB tile", tile.side_px),
            actual: format!("{} values", tile.pixels.len()),
        });
    }
    let converted: Vec<T> = tile.pixels.iter().map(|v| T::of(v.as_f64())).collect();
    Ok(FeatureMap::from_vec(side, side, 3, area_resample(&converted, tile.side_px, side)))
}

/// Stacks tiles into an `(N, side, side, 3)` batch.
pub fn tiles_to_batch<T: Scalar, U: Scalar>(tiles: &[&ImageTile<U>], side: usize) -> Result<Tensor<T>, ModelError> {
    let maps: Vec<FeatureMap<T>> = tiles.par_iter().map(|t| tile_input::<T, U>(t, side)).collect::<Result<_, _>>()?;
    let data = maps.into_iter().flat_map(|m| m.data).collect();
    Tensor::new(vec![tiles.len(), side, side, 3], data)
}

fn softplus<T: Scalar>(x: T) -> T {
    // ln(1 + e^x) without overflow
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid_raw<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Logistic function clamped to the open interval `(0, 1)`.
pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    let s = sigmoid_raw(z);
    let upper = T::one() - T::epsilon();
    let lower = T::min_positive_value();
    s.max(lower).min(upper)
}
