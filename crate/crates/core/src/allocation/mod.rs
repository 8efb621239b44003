//! Tract risk levels, suggested canvassing effort and budget apportionment.

mod plan;
mod table;
mod tracts;

pub use plan::{allocate, rank_zipcodes, AllocationPlan, BucketSplit, PlanRow, TractStat, ZipcodeScore};
pub use table::{
    bundled_effort_table, default_effort_table, effort_for, text_reading_effort_table, BadMafLevel, EffortRow,
    EffortTable, LowResponseLevel, TABLE1_CSV,
};
pub use tracts::{parse_tract_csv, write_tract_csv, LevelCuts};

#[derive(Debug, thiserror::Error)]
pub enum AllocationError {
    #[error("unknown risk level {0:?}")]
    Level(String),
    #[error("invalid effort table: {0}")]
    Table(String),
    #[error("csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("no tracts to allocate a positive budget over")]
    EmptyInput,
    #[error("tract {0} has no population for population weighting")]
    MissingPopulation(String),
}
