use std::fmt;
use std::str::FromStr;

use super::AllocationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BadMafLevel {
    High,
    Medium,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LowResponseLevel {
    High,
    Low,
}

impl FromStr for BadMafLevel {
    type Err = AllocationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" | "h" => Ok(BadMafLevel::High),
            "medium" | "med" | "m" => Ok(BadMafLevel::Medium),
            "low" | "l" => Ok(BadMafLevel::Low),
            _ => Err(AllocationError::Level(s.to_string())),
        }
    }
}

impl FromStr for LowResponseLevel {
    type Err = AllocationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" | "h" => Ok(LowResponseLevel::High),
            "low" | "l" => Ok(LowResponseLevel::Low),
            _ => Err(AllocationError::Level(s.to_string())),
        }
    }
}

impl fmt::Display for BadMafLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BadMafLevel::High => "High",
            BadMafLevel::Medium => "Medium",
            BadMafLevel::Low => "Low",
        })
    }
}

impl fmt::Display for LowResponseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LowResponseLevel::High => "High",
            LowResponseLevel::Low => "Low",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffortRow {
    pub bad_maf: BadMafLevel,
    pub low_response: LowResponseLevel,
    /// Share of the canvassing budget, in `[0, 1]`.
    pub effort: f64,
}

/// Ordered lookup from risk levels to suggested canvassing effort.
///
/// Rows may repeat a level pair; lookups resolve to the first matching row.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortTable {
    rows: Vec<EffortRow>,
}

/// CSV form of the suggested-effort table shipped with the crate.
pub const TABLE1_CSV: &str = include_str!("../../data/effort_table1.csv");

impl EffortTable {
    pub fn new(rows: Vec<EffortRow>) -> Result<Self, AllocationError> {
        if let Some(row) = rows.iter().find(|r| !(0.0..=1.0).contains(&r.effort)) {
            return Err(AllocationError::Table(format!("effort {} outside [0, 1]", row.effort)));
        }
        let total: f64 = rows.iter().map(|r| r.effort).sum();
        if total > 1.0 + 1e-9 {
            return Err(AllocationError::Table(format!("efforts sum to {total}, above 1")));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[EffortRow] {
        &self.rows
    }

    /// Index of the first row matching the level pair.
    pub fn matching_row(&self, bad_maf: BadMafLevel, low_response: LowResponseLevel) -> Option<usize> {
        self.rows.iter().position(|r| r.bad_maf == bad_maf && r.low_response == low_response)
    }

    /// Parses `bad_maf,low_response,effort` rows. Efforts may be fractions
    /// (`0.5`) or percentages (`50%`).
    pub fn from_csv(text: &str) -> Result<Self, AllocationError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| AllocationError::Csv { line: i + 2, reason: e.to_string() })?;
            if rec.len() != 3 {
                return Err(AllocationError::Csv { line: i + 2, reason: "expected 3 fields".into() });
            }
            let effort = parse_effort(&rec[2])
                .ok_or_else(|| AllocationError::Csv { line: i + 2, reason: format!("bad effort {:?}", &rec[2]) })?;
            rows.push(EffortRow { bad_maf: rec[0].parse()?, low_response: rec[1].parse()?, effort });
        }
        Self::new(rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bad_maf,low_response,effort\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.bad_maf, r.low_response, r.effort));
        }
        out
    }
}

fn parse_effort(s: &str) -> Option<f64> {
    match s.strip_suffix('%') {
        Some(pct) => pct.trim().parse::<f64>().ok().map(|p| p / 100.0),
        None => s.parse().ok(),
    }
}

/// The suggested-effort table verbatim, including its repeated
/// `(High, High)` row.
pub fn default_effort_table() -> EffortTable {
    use BadMafLevel as B;
    use LowResponseLevel as L;
    EffortTable::new(vec![
        EffortRow { bad_maf: B::High, low_response: L::Low, effort: 0.50 },
        EffortRow { bad_maf: B::High, low_response: L::High, effort: 0.20 },
        EffortRow { bad_maf: B::Medium, low_response: L::Low, effort: 0.15 },
        EffortRow { bad_maf: B::High, low_response: L::High, effort: 0.15 },
    ])
    .expect("bundled table is valid")
}

/// Alternative reading in which the 50% row targets tracts that are high on
/// both scores. Every other row is unchanged.
pub fn text_reading_effort_table() -> EffortTable {
    let mut rows = default_effort_table().rows;
    rows[0].low_response = LowResponseLevel::High;
    EffortTable::new(rows).expect("bundled table is valid")
}

/// Looks up a bundled table by name: `default` / `table1` or `text-reading`.
pub fn bundled_effort_table(name: &str) -> Option<EffortTable> {
    match name {
        "default" | "table1" => Some(default_effort_table()),
        "text-reading" => Some(text_reading_effort_table()),
        _ => None,
    }
}

/// Effort of the first row matching the level pair; 0 when none matches.
pub fn effort_for(table: &EffortTable, bad_maf: BadMafLevel, low_response: LowResponseLevel) -> f64 {
    table.matching_row(bad_maf, low_response).map_or(0.0, |i| table.rows[i].effort)
}

#[cfg(test)]
mod tests {
    use super::*;
    use BadMafLevel as B;
    use LowResponseLevel as L;

    #[test]
    fn default_rows_verbatim() {
        let t = default_effort_table();
        let rows = t.rows();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].bad_maf, rows[0].low_response, rows[0].effort), (B::High, L::Low, 0.50));
        assert_eq!((rows[1].bad_maf, rows[1].low_response, rows[1].effort), (B::High, L::High, 0.20));
        assert_eq!((rows[2].bad_maf, rows[2].low_response, rows[2].effort), (B::Medium, L::Low, 0.15));
        assert_eq!((rows[3].bad_maf, rows[3].low_response, rows[3].effort), (B::High, L::High, 0.15));
        let total: f64 = rows.iter().map(|r| r.effort).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lookups_use_first_match() {
        let t = default_effort_table();
        assert_eq!(effort_for(&t, B::High, L::Low), 0.50);
        assert_eq!(effort_for(&t, B::High, L::High), 0.20);
        assert_eq!(effort_for(&t, B::Medium, L::Low), 0.15);
        assert_eq!(effort_for(&t, B::Low, L::Low), 0.0);
        assert_eq!(effort_for(&t, B::Medium, L::High), 0.0);
    }

    #[test]
    fn permuted_duplicates_follow_order() {
        let mut rows = default_effort_table().rows().to_vec();
        rows.swap(1, 3);
        let t = EffortTable::new(rows).unwrap();
        assert_eq!(effort_for(&t, B::High, L::High), 0.15);
    }

    #[test]
    fn bundled_csv_matches_default() {
        assert_eq!(EffortTable::from_csv(TABLE1_CSV).unwrap(), default_effort_table());
        let t = default_effort_table();
        assert_eq!(EffortTable::from_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn text_reading_moves_the_half() {
        let t = text_reading_effort_table();
        assert_eq!(effort_for(&t, B::High, L::High), 0.50);
        assert_eq!(effort_for(&t, B::High, L::Low), 0.0);
        assert!(bundled_effort_table("text-reading").is_some());
        assert!(bundled_effort_table("nope").is_none());
    }

    #[test]
    fn invalid_tables_rejected() {
        let row = EffortRow { bad_maf: B::High, low_response: L::Low, effort: 0.7 };
        assert!(EffortTable::new(vec![row, row]).is_err());
        assert!(EffortTable::new(vec![EffortRow { effort: 1.5, ..row }]).is_err());
        assert!(EffortTable::from_csv("bad_maf,low_response,effort\nHigh,Sideways,0.1\n").is_err());
    }

    #[test]
    fn level_parsing() {
        assert_eq!("medium".parse::<B>().unwrap(), B::Medium);
        assert_eq!(" H ".parse::<L>().unwrap(), L::High);
        assert!("Medium".parse::<L>().is_err());
    }
}
