use std::collections::BTreeMap;

use num_traits::{ToPrimitive, Zero};

use super::{AllocationError, BadMafLevel, EffortTable, LowResponseLevel};
use crate::apportion::{exact_decimal, floor_u64, largest_remainder, Exact};

#[derive(Debug, Clone, PartialEq)]
pub struct TractStat {
    pub tract_id: String,
    pub zipcode: String,
    pub bad_maf: BadMafLevel,
    pub low_response: LowResponseLevel,
    pub population: Option<u64>,
}

/// How a row's effort is divided among the tracts that match it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BucketSplit {
    #[default]
    Equal,
    /// Proportional to `TractStat::population`; every tract needs one.
    Population,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRow {
    pub tract_id: String,
    /// Share of the whole budget assigned to this tract.
    pub effort_fraction: f64,
    pub canvassers: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    pub budget: u64,
    pub rows: Vec<PlanRow>,
}

impl AllocationPlan {
    pub fn total_assigned(&self) -> u64 {
        self.rows.iter().map(|r| r.canvassers).sum()
    }

    /// `tract_id,effort_fraction,canvassers` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tract_id,effort_fraction,canvassers\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.tract_id, format_fraction(r.effort_fraction), r.canvassers));
        }
        out
    }
}

/// Six decimals with trailing zeros trimmed, keeping at least two.
fn format_fraction(v: f64) -> String {
    let mut s = format!("{v:.6}");
    while s.ends_with('0') && s.len() - s.find('.').unwrap_or(0) > 3 {
        s.pop();
    }
    s
}

/// Exact budget share of every tract, in input order.
fn shares(tracts: &[TractStat], table: &EffortTable, split: BucketSplit) -> Result<Vec<Exact>, AllocationError> {
    let rows: Vec<Option<usize>> = tracts.iter().map(|t| table.matching_row(t.bad_maf, t.low_response)).collect();
    let mut bucket_weight: BTreeMap<usize, Exact> = BTreeMap::new();
    let mut weights = Vec::with_capacity(tracts.len());
    for (t, row) in tracts.iter().zip(&rows) {
        let w = match split {
            BucketSplit::Equal => Exact::from_integer(1),
            BucketSplit::Population => {
                let pop = t.population.ok_or_else(|| AllocationError::MissingPopulation(t.tract_id.clone()))?;
                Exact::from_integer(pop as i128)
            }
        };
        if let Some(row) = row {
            *bucket_weight.entry(*row).or_insert_with(Exact::zero) += w;
        }
        weights.push(w);
    }
    Ok(rows
        .iter()
        .zip(weights)
        .map(|(row, w)| match row {
            Some(row) => {
                let total = &bucket_weight[row];
                if total.is_zero() {
                    Exact::zero()
                } else {
                    exact_decimal(table.rows()[*row].effort) * w / total
                }
            }
            None => Exact::zero(),
        })
        .collect())
}

/// Distributes `budget` canvassers over `tracts`.
///
/// Each table row's effort is split across the tracts that first-match it.
/// Integer counts come from largest-remainder rounding of the exact quotas,
/// distributing `floor(sum of quotas)` canvassers in total.
pub fn allocate(
    tracts: &[TractStat],
    table: &EffortTable,
    budget: u64,
    split: BucketSplit,
) -> Result<AllocationPlan, AllocationError> {
    if tracts.is_empty() && budget > 0 {
        return Err(AllocationError::EmptyInput);
    }
    let shares = shares(tracts, table, split)?;
    let budget_exact = Exact::from_integer(budget as i128);
    let quotas: Vec<Exact> = shares.iter().map(|s| s * budget_exact).collect();
    let total: Exact = quotas.iter().cloned().sum();
    let counts = largest_remainder(&quotas, floor_u64(&total));
    let rows = tracts
        .iter()
        .zip(shares.iter().zip(counts))
        .map(|(t, (share, canvassers))| PlanRow {
            tract_id: t.tract_id.clone(),
            effort_fraction: share.to_f64().unwrap_or(0.0),
            canvassers,
        })
        .collect();
    Ok(AllocationPlan { budget, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZipcodeScore {
    pub zipcode: String,
    pub score: f64,
}

/// Orders zipcodes by the summed first-match effort of their tracts, highest
/// first; equal scores fall back to lexicographic order. The head of the list
/// is the area to concentrate on.
pub fn rank_zipcodes(tracts: &[TractStat], table: &EffortTable) -> Vec<ZipcodeScore> {
    let mut sums: BTreeMap<&str, Exact> = BTreeMap::new();
    for t in tracts {
        let effort = table
            .matching_row(t.bad_maf, t.low_response)
            .map_or_else(Exact::zero, |i| exact_decimal(table.rows()[i].effort));
        *sums.entry(t.zipcode.as_str()).or_insert_with(Exact::zero) += effort;
    }
    let mut ranked: Vec<(&str, Exact)> = sums.into_iter().collect();
    // BTreeMap order is lexicographic and the sort is stable
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    ranked
        .into_iter()
        .map(|(zipcode, score)| ZipcodeScore { zipcode: zipcode.to_string(), score: score.to_f64().unwrap_or(0.0) })
        .collect()
}
