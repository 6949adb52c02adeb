use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{UnpairedRecord, FEMALE, MALE};
use crate::error::{Error, Result};

/// Columns read from a raw COMPAS CSV (the one-hot ProPublica extract).
///
/// | column | meaning |
/// |---|---|
/// | `Two_yr_Recidivism` | label, 0 or 1 |
/// | `Number_of_Priors` | prior offence count |
/// | `score_factor` | 1 when the COMPAS decile score is not low |
/// | `Age_Above_FourtyFive`, `Age_Below_TwentyFive` | age bands |
/// | `African_American`, `Asian`, `Hispanic`, `Native_American`, `Other` | race one-hot; all zero means Caucasian |
/// | `Female` | 1 for female, 0 for male |
/// | `Misdemeanor` | 1 when the charge degree is a misdemeanor |
pub const COMPAS_COLUMNS: [&str; 12] = [
    "Two_yr_Recidivism",
    "Number_of_Priors",
    "score_factor",
    "Age_Above_FourtyFive",
    "Age_Below_TwentyFive",
    "African_American",
    "Asian",
    "Hispanic",
    "Native_American",
    "Other",
    "Female",
    "Misdemeanor",
];

const RACES: [(&str, &str); 5] = [
    ("African_American", "African American"),
    ("Asian", "Asian"),
    ("Hispanic", "Hispanic"),
    ("Native_American", "Native American"),
    ("Other", "other race"),
];

/// The features that make up one COMPAS sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompasRow {
    pub priors: u32,
    pub score_factor: u32,
    pub under_45: bool,
    pub under_25: bool,
    pub race: String,
    pub sex: String,
    pub misdemeanor: bool,
}

/// `"3 priors, score factor 1, under 45, under 25, African American, male, misdemeanor"`;
/// the age and charge clauses appear only when they apply.
pub fn compas_row_to_text(row: &CompasRow) -> String {
    let mut parts = vec![
        format!("{} priors", row.priors),
        format!("score factor {}", row.score_factor),
    ];
    if row.under_45 {
        parts.push("under 45".into());
    }
    if row.under_25 {
        parts.push("under 25".into());
    }
    parts.push(row.race.clone());
    parts.push(row.sex.clone());
    if row.misdemeanor {
        parts.push("misdemeanor".into());
    }
    parts.join(", ")
}

fn flag(fields: &HashMap<&str, &str>, name: &str) -> Result<bool> {
    match fields.get(name).map(|v| v.trim()) {
        Some("1" | "1.0" | "true" | "yes") => Ok(true),
        Some("0" | "0.0" | "false" | "no") => Ok(false),
        Some(other) => Err(Error::Record(format!(
            "{name}: '{other}' is not a 0/1 flag"
        ))),
        None => Err(Error::Record(format!("missing field {name}"))),
    }
}

fn count(fields: &HashMap<&str, &str>, name: &str) -> Result<u32> {
    let raw = fields
        .get(name)
        .ok_or_else(|| Error::Record(format!("missing field {name}")))?
        .trim();
    raw.parse::<u32>()
        .or_else(|_| {
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && *v >= 0.0)
                .map(|v| v as u32)
                .ok_or(())
        })
        .map_err(|_| Error::Record(format!("{name}: '{raw}' is not a count")))
}

impl CompasRow {
    /// Reads the columns of [`COMPAS_COLUMNS`] (the label excepted).
    pub fn from_fields(fields: &HashMap<&str, &str>) -> Result<Self> {
        let mut race = "Caucasian";
        for (col, name) in RACES {
            if flag(fields, col)? {
                race = name;
            }
        }
        Ok(Self {
            priors: count(fields, "Number_of_Priors")?,
            score_factor: count(fields, "score_factor")?,
            under_45: !flag(fields, "Age_Above_FourtyFive")?,
            under_25: flag(fields, "Age_Below_TwentyFive")?,
            race: race.into(),
            sex: if flag(fields, "Female")? {
                "female"
            } else {
                "male"
            }
            .into(),
            misdemeanor: flag(fields, "Misdemeanor")?,
        })
    }
}

/// Converts a raw COMPAS CSV into unpaired records with subgroup MALE/FEMALE
/// and the two-year recidivism label. Row ids are 1-based data row numbers.
pub fn load_compas_csv(path: &Path) -> Result<Vec<UnpairedRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::data(path, 1, e.to_string()))?
        .clone();
    for col in COMPAS_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::data(path, 1, format!("missing column '{col}'")));
        }
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::data(path, i + 2, e.to_string()))?;
        let line = record.position().map_or(i + 2, |p| p.line() as usize);
        let fields: HashMap<&str, &str> = headers.iter().zip(record.iter()).collect();
        let row =
            CompasRow::from_fields(&fields).map_err(|e| Error::data(path, line, e.to_string()))?;
        let label = usize::from(
            flag(&fields, "Two_yr_Recidivism")
                .map_err(|e| Error::data(path, line, e.to_string()))?,
        );
        out.push(UnpairedRecord {
            id: (i + 1).to_string(),
            subgroup: if row.sex == "female" { FEMALE } else { MALE }.into(),
            text: compas_row_to_text(&row),
            label,
        });
    }
    if out.is_empty() {
        return Err(Error::data(path, 1, "no records"));
    }
    Ok(out)
}
