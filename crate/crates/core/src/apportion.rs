//! Largest-remainder apportionment over exact rational quotas.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

pub type Exact = Ratio<i128>;

const DECIMAL_GRID: i128 = 1_000_000_000_000;

/// Snaps a decimal configuration value onto a 1e-12 grid so that values such
/// as `0.64` become the exact fraction `16/25` rather than its binary
/// approximation.
pub fn exact_decimal(v: f64) -> Exact {
    Ratio::new((v * DECIMAL_GRID as f64).round() as i128, DECIMAL_GRID)
}

/// Floors every quota, then hands the `total - sum(floors)` leftover units
/// out one each in descending order of fractional part. Equal fractional
/// parts go to the earlier index first.
///
/// `total` must lie between the floor sum and the ceiling sum of the quotas.
pub fn largest_remainder(quotas: &[Exact], total: u64) -> Vec<u64> {
    let floors: Vec<i128> = quotas.iter().map(|q| q.floor().to_integer()).collect();
    let mut counts: Vec<u64> = floors.iter().map(|&f| f.max(0) as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let leftover = total.saturating_sub(assigned) as usize;

    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // stable sort keeps index order among equal remainders
    order.sort_by(|&i, &j| quotas[j].fract().cmp(&quotas[i].fract()));
    for &i in order.iter().take(leftover) {
        counts[i] += 1;
    }
    counts
}

/// Splits `total` proportionally to `weights` (need not be normalized).
pub fn apportion(total: u64, weights: &[Exact]) -> Vec<u64> {
    let sum: Exact = weights.iter().cloned().sum();
    if sum.is_zero() {
        return vec![0; weights.len()];
    }
    let quotas: Vec<Exact> = weights.iter().map(|w| w / sum * Exact::from_integer(total as i128)).collect();
    largest_remainder(&quotas, total)
}

/// Integer part of an exact non-negative value.
pub fn floor_u64(v: &Exact) -> u64 {
    v.floor().to_integer().max(0).to_u64().unwrap_or(u64::MAX)
}
