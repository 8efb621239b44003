//! Tract statistics CSV: `tract_id,zipcode,bad_maf_score,low_response_score`
//! with an optional trailing `population` column. Score columns hold either
//! level names or numbers; numeric columns are cut into levels.

use super::{AllocationError, BadMafLevel, LowResponseLevel, TractStat};

/// Thresholds applied to numeric score columns. `None` derives the cut from
/// the column itself: tertiles for Bad MAF, the median for low response.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LevelCuts {
    /// `(medium_from, high_from)`.
    pub bad_maf: Option<(f64, f64)>,
    pub low_response: Option<f64>,
}

#[derive(Clone)]
enum Score {
    Level(String),
    Numeric(f64),
}

fn score(s: &str) -> Score {
    s.parse::<f64>().map_or_else(|_| Score::Level(s.to_string()), Score::Numeric)
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn numeric_column(scores: &[Score]) -> Vec<f64> {
    let mut v: Vec<f64> = scores
        .iter()
        .filter_map(|s| match s {
            Score::Numeric(x) => Some(*x),
            Score::Level(_) => None,
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn parse_tract_csv(text: &str, cuts: &LevelCuts) -> Result<Vec<TractStat>, AllocationError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| AllocationError::Csv { line: 1, reason: e.to_string() })?.clone();
    let expected = ["tract_id", "zipcode", "bad_maf_score", "low_response_score"];
    let has_population = header.len() == 5 && &header[4] == "population";
    if header.iter().take(4).ne(expected) || !(header.len() == 4 || has_population) {
        return Err(AllocationError::Csv {
            line: 1,
            reason: format!("expected header {}[,population]", expected.join(",")),
        });
    }

    let mut raw = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| AllocationError::Csv { line, reason: e.to_string() })?;
        let population = if has_population && !rec[4].is_empty() {
            Some(
                rec[4]
                    .parse::<u64>()
                    .map_err(|_| AllocationError::Csv { line, reason: format!("bad population {:?}", &rec[4]) })?,
            )
        } else {
            None
        };
        raw.push((rec[0].to_string(), rec[1].to_string(), score(&rec[2]), score(&rec[3]), population));
    }

    let bad_scores: Vec<Score> = raw.iter().map(|r| r.2.clone()).collect();
    let low_scores: Vec<Score> = raw.iter().map(|r| r.3.clone()).collect();
    let bad_cuts = cuts.bad_maf.or_else(|| {
        let col = numeric_column(&bad_scores);
        (!col.is_empty()).then(|| (quantile(&col, 1.0 / 3.0), quantile(&col, 2.0 / 3.0)))
    });
    let low_cut = cuts.low_response.or_else(|| {
        let col = numeric_column(&low_scores);
        (!col.is_empty()).then(|| quantile(&col, 0.5))
    });

    raw.into_iter()
        .map(|(tract_id, zipcode, bad, low, population)| {
            let bad_maf = match bad {
                Score::Level(s) => s.parse()?,
                Score::Numeric(v) => {
                    let (medium, high) = bad_cuts.expect("numeric column has cuts");
                    if v >= high {
                        BadMafLevel::High
                    } else if v >= medium {
                        BadMafLevel::Medium
                    } else {
                        BadMafLevel::Low
                    }
                }
            };
            let low_response = match low {
                Score::Level(s) => s.parse()?,
                Score::Numeric(v) => {
                    if v >= low_cut.expect("numeric column has a cut") {
                        LowResponseLevel::High
                    } else {
                        LowResponseLevel::Low
                    }
                }
            };
            Ok(TractStat { tract_id, zipcode, bad_maf, low_response, population })
        })
        .collect()
}

/// Level-valued CSV for `tracts`.
pub fn write_tract_csv(tracts: &[TractStat]) -> String {
    let with_pop = tracts.iter().any(|t| t.population.is_some());
    let mut out = String::from("tract_id,zipcode,bad_maf_score,low_response_score");
    out.push_str(if with_pop { ",population\n" } else { "\n" });
    for t in tracts {
        out.push_str(&format!("{},{},{},{}", t.tract_id, t.zipcode, t.bad_maf, t.low_response));
        if with_pop {
            out.push(',');
            if let Some(p) = t.population {
                out.push_str(&p.to_string());
            }
        }
        out.push('\n');
    }
    out
}
