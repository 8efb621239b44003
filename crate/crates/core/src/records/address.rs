use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::RecordError;

/// Household classification as recorded by the appraisal district.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OfficialLabel {
    SingleFamily,
    MultiFamily,
}

impl OfficialLabel {
    /// Binary class: 1 for multi-family.
    pub fn as_class(self) -> u8 {
        match self {
            OfficialLabel::SingleFamily => 0,
            OfficialLabel::MultiFamily => 1,
        }
    }

    pub fn is_multi(self) -> bool {
        self == OfficialLabel::MultiFamily
    }
}

impl fmt::Display for OfficialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OfficialLabel::SingleFamily => "single_family",
            OfficialLabel::MultiFamily => "multi_family",
        })
    }
}

/// Category codes treated as multi-family. Everything else is single-family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMap {
    pub multi_codes: BTreeSet<String>,
}

impl Default for CategoryMap {
    fn default() -> Self {
        Self { multi_codes: BTreeSet::from(["B1".to_string()]) }
    }
}

impl CategoryMap {
    pub fn new<I, S>(codes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { multi_codes: codes.into_iter().map(Into::into).collect() }
    }

    pub fn label(&self, code: &str) -> OfficialLabel {
        label_from_category(code, &self.multi_codes)
    }
}

pub fn label_from_category(code: &str, multi_codes: &BTreeSet<String>) -> OfficialLabel {
    if multi_codes.contains(code.trim()) {
        OfficialLabel::MultiFamily
    } else {
        OfficialLabel::SingleFamily
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AddressRecord {
    pub address_id: String,
    pub street_text: String,
    pub official_label: OfficialLabel,
    pub category_code: String,
    /// WGS84 `(lat, lon)` in degrees.
    pub coords: Option<(f64, f64)>,
    pub tract_id: String,
    pub zipcode: String,
}

pub(crate) fn check_coords(lat: f64, lon: f64) -> bool {
    (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    address_id: String,
    street_text: String,
    category_code: String,
    lat: String,
    lon: String,
    tract_id: String,
    zipcode: String,
}

pub const ADDRESS_CSV_HEADER: [&str; 7] =
    ["address_id", "street_text", "category_code", "lat", "lon", "tract_id", "zipcode"];

/// Parses the address CSV. Blank `lat`/`lon` leave the record ungeocoded.
pub fn parse_address_csv(text: &str, categories: &CategoryMap) -> Result<Vec<AddressRecord>, RecordError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| RecordError::Csv { line: 1, reason: e.to_string() })?.clone();
    if headers.iter().collect::<Vec<_>>() != ADDRESS_CSV_HEADER {
        return Err(RecordError::Csv { line: 1, reason: format!("expected header {}", ADDRESS_CSV_HEADER.join(",")) });
    }

    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut duplicates = BTreeSet::new();
    for result in reader.records() {
        let raw = result.map_err(|e| RecordError::Csv {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = raw.position().map_or(0, |p| p.line() as usize);
        let row: Row = raw.deserialize(Some(&headers)).map_err(|e| RecordError::Csv { line, reason: e.to_string() })?;
        let coords = parse_coords(&row.lat, &row.lon, line)?;
        if seen.insert(row.address_id.clone(), line).is_some() {
            duplicates.insert(row.address_id.clone());
        }
        out.push(AddressRecord {
            official_label: categories.label(&row.category_code),
            address_id: row.address_id,
            street_text: row.street_text,
            category_code: row.category_code,
            coords,
            tract_id: row.tract_id,
            zipcode: row.zipcode,
        });
    }
    if !duplicates.is_empty() {
        return Err(RecordError::DuplicateIds(duplicates.into_iter().collect()));
    }
    Ok(out)
}

fn parse_coords(lat: &str, lon: &str, line: usize) -> Result<Option<(f64, f64)>, RecordError> {
    if lat.is_empty() && lon.is_empty() {
        return Ok(None);
    }
    let parse = |s: &str, name: &str| {
        s.parse::<f64>().map_err(|_| RecordError::Coordinate { line, reason: format!("{name} {s:?} is not a number") })
    };
    let (lat, lon) = (parse(lat, "lat")?, parse(lon, "lon")?);
    if !check_coords(lat, lon) {
        return Err(RecordError::Coordinate { line, reason: format!("({lat}, {lon}) outside WGS84 range") });
    }
    Ok(Some((lat, lon)))
}

/// Serializes records in the same schema [`parse_address_csv`] reads.
/// Coordinates use the shortest exact decimal form.
pub fn write_address_csv(records: &[AddressRecord]) -> Result<String, RecordError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in records {
        let (lat, lon) = r.coords.map_or((String::new(), String::new()), |(la, lo)| (la.to_string(), lo.to_string()));
        writer
            .serialize(Row {
                address_id: r.address_id.clone(),
                street_text: r.street_text.clone(),
                category_code: r.category_code.clone(),
                lat,
                lon,
                tract_id: r.tract_id.clone(),
                zipcode: r.zipcode.clone(),
            })
            .map_err(|e| RecordError::Csv { line: 0, reason: e.to_string() })?;
    }
    if records.is_empty() {
        writer.write_record(ADDRESS_CSV_HEADER).map_err(|e| RecordError::Csv { line: 0, reason: e.to_string() })?;
    }
    let bytes = writer.into_inner().map_err(|e| RecordError::Csv { line: 0, reason: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
}
