use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{EpochRecord, TrainedModel};
use super::spec::ModelSpec;
use super::tensor::Tensor;
use super::ModelError;
use crate::eval::roc_auc;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Momentum(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Positive-class loss weight; `None` uses negatives/positives of the
    /// training split.
    pub pos_weight: Option<f64>,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.003,
            epochs: 20,
            batch_size: 16,
            seed: 0,
            pos_weight: None,
            optimizer: Optimizer::Momentum(0.9),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut problems = Vec::new();
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be finite and non-negative, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".to_string());
        }
        if let Some(w) = self.pos_weight {
            if !(w > 0.0 && w.is_finite()) {
                problems.push(format!("pos_weight must be positive, got {w}"));
            }
        }
        if let Optimizer::Momentum(m) = self.optimizer {
            if !(0.0..1.0).contains(&m) {
                problems.push(format!("momentum must be in [0, 1), got {m}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Config(problems.join("; ")))
        }
    }
}

/// Images and binary labels of one split.
#[derive(Debug, Clone)]
pub struct LabeledBatch<T> {
    pub inputs: Tensor<T>,
    pub labels: Vec<T>,
}

impl<T: Scalar> LabeledBatch<T> {
    pub fn new(inputs: Tensor<T>, labels: Vec<T>) -> Result<Self, ModelError> {
        if inputs.batch_len() != labels.len() {
            return Err(ModelError::Label(format!("{} labels for {} samples", labels.len(), inputs.batch_len())));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn select(&self, idx: &[usize]) -> (Tensor<T>, Vec<T>) {
        let mut shape = self.inputs.shape().to_vec();
        shape[0] = idx.len();
        let data = idx.iter().flat_map(|&i| self.inputs.item(i).iter().copied()).collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        (Tensor::new(shape, data).expect("selection of a valid tensor"), labels)
    }

    fn bool_labels(&self) -> Vec<bool> {
        self.labels.iter().map(|&y| y == T::one()).collect()
    }
}

/// Mini-batch gradient descent from a seeded initialization, keeping the
/// parameters of the epoch with the best validation AUC (earliest on ties).
pub fn train<T: Scalar>(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    train_set: &LabeledBatch<T>,
    val_set: &LabeledBatch<T>,
) -> Result<TrainedModel<T>, ModelError> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(ModelError::Empty("training and validation splits must be nonempty".into()));
    }
    let mut model = TrainedModel::<T>::init(spec, cfg.seed)?;
    let positives = train_set.labels.iter().filter(|&&y| y == T::one()).count();
    let negatives = train_set.len() - positives;
    let pos_weight = match cfg.pos_weight {
        Some(w) => w,
        None if positives == 0 => 1.0,
        None => negatives as f64 / positives as f64,
    };
    let pos_weight = T::of(pos_weight);
    let lr = T::of(cfg.learning_rate);
    let val_labels = val_set.bool_labels();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut velocity = vec![T::zero(); model.param_count()];
    let mut best: Option<(f64, usize, Vec<T>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = train_set.select(chunk);
            let (loss, grad) = model.backward(&x, &y, pos_weight)?;
            if !loss.is_finite() {
                return Err(ModelError::Divergence { epoch });
            }
            loss_sum += loss.as_f64() * chunk.len() as f64;
            let params = model.params_mut();
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= lr * *g;
                    }
                }
                Optimizer::Momentum(m) => {
                    let m = T::of(m);
                    for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                        *v = m * *v + *g;
                        *p -= lr * *v;
                    }
                }
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(ModelError::Divergence { epoch });
            }
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let scores = model.forward(&val_set.inputs)?;
        let val_auc =
            roc_auc(&scores, &val_labels).map_err(|e| ModelError::Empty(format!("validation split: {e}")))?.as_f64();
        log::info!("epoch {epoch}: loss {train_loss:.6} val_auc {val_auc:.4}");
        model.history.push(EpochRecord { epoch, train_loss, val_auc });
        if best.as_ref().is_none_or(|(auc, _, _)| val_auc > *auc) {
            best = Some((val_auc, epoch, model.params().to_vec()));
        }
    }
    if let Some((_, epoch, params)) = best {
        model.set_params(params);
        model.best_epoch = epoch;
    }
    Ok(model)
}

/// Per-epoch history as CSV with header `epoch,train_loss,val_auc`.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_auc\n");
    for r in history {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_auc));
    }
    out
}
