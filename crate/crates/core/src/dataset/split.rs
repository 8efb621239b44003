use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DatasetError;
use crate::apportion::{exact_decimal, largest_remainder, Exact};

pub const DEFAULT_RATIOS: [f64; 3] = [0.64, 0.16, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Val, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitName::Train),
            "val" => Ok(SplitName::Val),
            "test" => Ok(SplitName::Test),
            other => Err(DatasetError::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// Disjoint train/validation/test index sets covering `0..n`, each sorted
/// ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub stratified: bool,
}

impl DatasetSplit {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }

    pub fn indices(&self, name: SplitName) -> &[usize] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }

    /// Split membership of every index in `0..n`.
    pub fn assignment(&self) -> Vec<SplitName> {
        let n = self.train.len() + self.val.len() + self.test.len();
        let mut out = vec![SplitName::Train; n];
        for name in SplitName::ALL {
            for &i in self.indices(name) {
                out[i] = name;
            }
        }
        out
    }
}

fn exact_ratios(ratios: [f64; 3]) -> Result<[Exact; 3], DatasetError> {
    if ratios.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(DatasetError::Config(format!("split ratios must be non-negative, got {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DatasetError::Config(format!("split ratios {ratios:?} sum to {sum}, not 1")));
    }
    let exact = ratios.map(exact_decimal);
    let total: Exact = exact.iter().cloned().sum();
    if total.is_zero() {
        return Err(DatasetError::Config("split ratios are all zero".into()));
    }
    // renormalize so the quotas always sum to n exactly
    Ok(exact.map(|r| r / total))
}

/// Largest-remainder sizes of a three-way split of `n` items.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3], DatasetError> {
    let exact = exact_ratios(ratios)?;
    Ok(sizes_exact(n, &exact))
}

fn sizes_exact(n: usize, ratios: &[Exact; 3]) -> [usize; 3] {
    let nn = Exact::from_integer(n as i128);
    let quotas: Vec<Exact> = ratios.iter().map(|r| r * nn).collect();
    let counts = largest_remainder(&quotas, n as u64);
    [counts[0] as usize, counts[1] as usize, counts[2] as usize]
}

/// Seeded three-way split of `0..n`.
///
/// With `stratify_labels`, every class is apportioned and permuted on its own
/// (classes in ascending label order) and the per-class parts are unioned.
pub fn split(
    n: usize,
    ratios: [f64; 3],
    seed: u64,
    stratify_labels: Option<&[u8]>,
) -> Result<DatasetSplit, DatasetError> {
    let exact = exact_ratios(ratios)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<(Option<u8>, Vec<usize>)> = match stratify_labels {
        None => {
            if n < 3 {
                return Err(DatasetError::Config(format!("need at least 3 items to split, got {n}")));
            }
            vec![(None, (0..n).collect())]
        }
        Some(labels) => {
            if labels.len() != n {
                return Err(DatasetError::Config(format!("{} labels for {n} items", labels.len())));
            }
            let mut classes: Vec<u8> = labels.to_vec();
            classes.sort_unstable();
            classes.dedup();
            classes.into_iter().map(|c| (Some(c), (0..n).filter(|&i| labels[i] == c).collect::<Vec<_>>())).collect()
        }
    };
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (class, mut members) in groups {
        if let Some(class) = class {
            if members.len() < 3 {
                return Err(DatasetError::Stratification { class, count: members.len() });
            }
        }
        let sizes = sizes_exact(members.len(), &exact);
        members.shuffle(&mut rng);
        let mut rest = members.as_slice();
        for (part, size) in parts.iter_mut().zip(sizes) {
            let (head, tail) = rest.split_at(size);
            part.extend_from_slice(head);
            rest = tail;
        }
    }
    for part in &mut parts {
        part.sort_unstable();
    }
    let [train, val, test] = parts;
    Ok(DatasetSplit { train, val, test, ratios, seed, stratified: stratify_labels.is_some() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_sizes() {
        assert_eq!(split_sizes(2800, DEFAULT_RATIOS).unwrap(), [1792, 448, 560]);
        assert_eq!(split_sizes(10, DEFAULT_RATIOS).unwrap(), [6, 2, 2]);
        assert_eq!(split_sizes(280, DEFAULT_RATIOS).unwrap(), [179, 45, 56]);
        assert_eq!(split_sizes(2520, DEFAULT_RATIOS).unwrap(), [1613, 403, 504]);
    }

    #[test]
    fn stratified_paper_dataset() {
        let labels: Vec<u8> = (0..2800).map(|i| u8::from(i % 10 == 0)).collect();
        let s = split(2800, DEFAULT_RATIOS, 7, Some(&labels)).unwrap();
        let pos = |idx: &[usize]| idx.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!([pos(&s.train), pos(&s.val), pos(&s.test)], [179, 45, 56]);
        assert_eq!(s.sizes().iter().sum::<usize>(), 2800);
    }

    #[test]
    fn errors() {
        assert!(matches!(split(10, [0.5, 0.5, 0.5], 0, None), Err(DatasetError::Config(_))));
        assert!(matches!(split(2, DEFAULT_RATIOS, 0, None), Err(DatasetError::Config(_))));
        let labels = [0, 0, 0, 0, 1, 1];
        assert!(matches!(
            split(6, DEFAULT_RATIOS, 0, Some(&labels)),
            Err(DatasetError::Stratification { class: 1, count: 2 })
        ));
        assert!("holdout".parse::<SplitName>().is_err());
    }

    proptest! {
        #[test]
        fn partitions_exactly(n in 3usize..500, seed in any::<u64>(), stratify in any::<bool>(), modulus in 2usize..8) {
            let labels: Vec<u8> = (0..n).map(|i| u8::from(i % modulus == 0)).collect();
            let strat = stratify && labels.iter().filter(|&&l| l == 1).count() >= 3
                && labels.iter().filter(|&&l| l == 0).count() >= 3;
            let s = split(n, DEFAULT_RATIOS, seed, strat.then_some(labels.as_slice())).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            if strat {
                for class in [0u8, 1] {
                    let count = labels.iter().filter(|&&l| l == class).count();
                    for (k, name) in SplitName::ALL.into_iter().enumerate() {
                        let got = s.indices(name).iter().filter(|&&i| labels[i] == class).count() as f64;
                        prop_assert!((got - count as f64 * DEFAULT_RATIOS[k]).abs() <= 1.0);
                    }
                }
            } else {
                prop_assert_eq!(s.sizes(), split_sizes(n, DEFAULT_RATIOS).unwrap());
            }
            prop_assert_eq!(&s, &split(n, DEFAULT_RATIOS, seed, strat.then_some(labels.as_slice())).unwrap());
        }
    }
}
