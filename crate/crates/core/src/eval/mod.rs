//! ROC analysis, confusion matrices and cross-family comparison.

mod metrics;

pub use metrics::{auc, auc_pairwise, confusion, roc_auc, roc_curve, ConfusionMatrix, RocCurve, RocPoint};

use std::fmt::Write as _;

use crate::model::{LabeledBatch, ModelError, TrainedModel};
use crate::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score {0} is not finite")]
    NonFinite(usize),
    #[error("ROC undefined for single-class labels ({positives} positives, {negatives} negatives)")]
    SingleClass { positives: usize, negatives: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One evaluated model.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonEntry<T> {
    pub name: String,
    pub auc: T,
    pub confusion: ConfusionMatrix<T>,
    pub curve: RocCurve<T>,
}

impl<T> ComparisonEntry<T> {
    /// File name the curve is written under.
    pub fn curve_file(&self) -> String {
        format!("roc_{}.csv", self.name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport<T> {
    pub threshold: T,
    pub entries: Vec<ComparisonEntry<T>>,
}

impl<T: Scalar> ComparisonReport<T> {
    /// `family,auc,tp,fp,fn,tn,threshold,curve` CSV, one row per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,auc,tp,fp,fn,tn,threshold,curve\n");
        for e in &self.entries {
            let c = &e.confusion;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.name,
                e.auc,
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                c.threshold,
                e.curve_file()
            );
        }
        out
    }
}

/// Scores each named model on the shared test split. No ordering between
/// entries is implied.
pub fn compare_models<T: Scalar>(
    models: &[(String, &TrainedModel<T>)],
    test: &LabeledBatch<T>,
    threshold: T,
) -> Result<ComparisonReport<T>, EvalError> {
    let labels: Vec<bool> = test.labels.iter().map(|&y| y == T::one()).collect();
    let entries = models
        .iter()
        .map(|(name, model)| {
            let scores = model.forward(&test.inputs)?;
            let curve = roc_curve(&scores, &labels)?;
            Ok(ComparisonEntry {
                name: name.clone(),
                auc: auc(&curve),
                confusion: confusion(&scores, &labels, threshold)?,
                curve,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(ComparisonReport { threshold, entries })
}
