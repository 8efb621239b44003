use std::cmp::Ordering;
use std::fmt::Write as _;

use super::EvalError;
use crate::Scalar;

/// One ROC vertex. `threshold` is the lowest score predicted positive at this
/// vertex; the origin carries `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint<T> {
    pub fpr: T,
    pub tpr: T,
    pub threshold: T,
}

/// Staircase ROC curve ordered by descending threshold. Tied scores form a
/// single step, so a tie group shows up as a diagonal segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve<T> {
    pub points: Vec<RocPoint<T>>,
}

impl<T: Scalar> RocCurve<T> {
    /// `fpr,tpr,threshold` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr,threshold\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold);
        }
        out
    }

    /// TPR at the first vertex with the given FPR, if any.
    pub fn tpr_at(&self, fpr: T) -> Option<T> {
        self.points
            .iter()
            .filter(|p| p.fpr == fpr)
            .map(|p| p.tpr)
            .fold(None, |acc: Option<T>, t| Some(acc.map_or(t, |a| a.max(t))))
    }
}

fn check_inputs<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<(usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass { positives: pos, negatives: neg });
    }
    Ok((pos, neg))
}

pub fn roc_curve<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<RocCurve<T>, EvalError> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));

    let (p, n) = (T::of_usize(pos), T::of_usize(neg));
    let mut points = vec![RocPoint { fpr: T::zero(), tpr: T::zero(), threshold: T::infinity() }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { fpr: T::of_usize(fp) / n, tpr: T::of_usize(tp) / p, threshold });
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc<T: Scalar>(curve: &RocCurve<T>) -> T {
    let half = T::of(0.5);
    curve.points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * half).sum()
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by enumerating every positive/negative pair.
pub fn auc_pairwise<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<T, EvalError> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let positives: Vec<T> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let negatives: Vec<T> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    // twice the credited pairs, to keep half-credit integral
    let mut credit: u64 = 0;
    for &sp in &positives {
        for &sn in &negatives {
            credit += match sp.partial_cmp(&sn) {
                Some(Ordering::Greater) => 2,
                Some(Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(T::of(credit as f64 / (2.0 * pos as f64 * neg as f64)))
}

/// Convenience: AUC of the ROC curve built from `scores`.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<T, EvalError> {
    Ok(auc(&roc_curve(scores, labels)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionMatrix<T> {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub threshold: T,
}

impl<T> ConfusionMatrix<T> {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Counts outcomes when predicting positive iff `score >= threshold`.
pub fn confusion<T: Scalar>(scores: &[T], labels: &[bool], threshold: T) -> Result<ConfusionMatrix<T>, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    let mut m = ConfusionMatrix { tp: 0, fp: 0, fn_: 0, tn: 0, threshold };
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SCORES: [f64; 4] = [0.1, 0.4, 0.35, 0.8];
    const LABELS: [bool; 4] = [false, false, true, true];

    #[test]
    fn worked_example() {
        let curve = roc_curve(&SCORES, &LABELS).unwrap();
        assert_eq!(curve.tpr_at(0.0), Some(0.5));
        assert_eq!(auc(&curve), 0.75);
        assert_eq!(auc_pairwise(&SCORES, &LABELS).unwrap(), 0.75);
        let m = confusion(&SCORES, &LABELS, 0.5).unwrap();
        assert_eq!((m.tp, m.fn_, m.fp, m.tn), (1, 1, 0, 2));
    }

    #[test]
    fn perfect_separation() {
        let s = [0.1, 0.2, 0.8, 0.9];
        let curve = roc_curve(&s, &LABELS).unwrap();
        assert!(curve.points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(auc(&curve), 1.0);
        let reversed: Vec<bool> = LABELS.iter().map(|l| !l).collect();
        assert_eq!(auc_pairwise(&s, &reversed).unwrap(), 0.0);
    }

    #[test]
    fn all_ties() {
        let s = [0.3; 4];
        let curve = roc_curve(&s, &LABELS).unwrap();
        assert_eq!(curve.points.len(), 2);
        assert_eq!((curve.points[1].fpr, curve.points[1].tpr), (1.0, 1.0));
        assert_eq!(auc(&curve), 0.5);
        assert_eq!(auc_pairwise(&[0.4, 0.4], &[true, false]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(roc_curve(&[0.1, 0.2], &[true, true]), Err(EvalError::SingleClass { .. })));
        assert!(auc_pairwise(&[0.1], &[false]).is_err());
        assert!(roc_curve(&[0.1], &[true, false]).is_err());
        assert!(roc_curve(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn confusion_extremes() {
        let m = confusion(&SCORES, &LABELS, 0.0).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (2, 2, 0, 0));
        let m = confusion(&SCORES, &LABELS, 0.8 + 1e-12).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (0, 0, 2, 2));
    }

    #[test]
    fn works_in_single_precision() {
        let s: Vec<f32> = SCORES.iter().map(|&v| v as f32).collect();
        assert_eq!(roc_auc(&s, &LABELS).unwrap(), 0.75f32);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = roc_curve(&SCORES, &LABELS).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "fpr,tpr,threshold");
        assert_eq!(lines[1], "0,0,inf");
        assert_eq!(lines.len(), 6);
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        prop::collection::vec((0u8..20, any::<bool>()), 2..120)
            .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 20.0, l)).unzip())
            .prop_filter("both classes", |(_, l): &(Vec<f64>, Vec<bool>)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
    }

    proptest! {
        #[test]
        fn trapezoid_matches_pairwise((s, l) in scored()) {
            let a = roc_auc(&s, &l).unwrap();
            let b = auc_pairwise(&s, &l).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn curve_is_monotone((s, l) in scored()) {
            let c = roc_curve(&s, &l).unwrap();
            let first = c.points.first().unwrap();
            let last = c.points.last().unwrap();
            prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
            prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            for w in c.points.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
                prop_assert!(w[1].threshold < w[0].threshold);
            }
        }

        #[test]
        fn rank_invariant((s, l) in scored()) {
            let warped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert!((roc_auc(&s, &l).unwrap() - roc_auc(&warped, &l).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn negation_complements(raw in prop::collection::vec((any::<u32>(), any::<bool>()), 2..80)) {
            let mut seen = std::collections::HashSet::new();
            let (s, l): (Vec<f64>, Vec<bool>) = raw
                .into_iter()
                .filter(|(v, _)| seen.insert(*v))
                .map(|(v, b)| (v as f64, b))
                .unzip();
            prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let total = roc_auc(&s, &l).unwrap() + roc_auc(&neg, &l).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn confusion_is_monotone((s, l) in scored(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = confusion(&s, &l, lo).unwrap();
            let b = confusion(&s, &l, hi).unwrap();
            prop_assert!(b.tp <= a.tp && b.fp <= a.fp);
            prop_assert_eq!(a.total(), s.len());
        }
    }
}
