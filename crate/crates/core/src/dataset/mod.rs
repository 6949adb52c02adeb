//! Paired and unpaired audit datasets.
//!
//! The canonical on-disk schema has one row per text with the columns
//! `pair_id, subgroup, text, label`, as CSV (header required) or JSON lines.
//! Rows sharing a `pair_id` are the two subgroup variants of one pair; a
//! file in which every id is unique is an unpaired dataset.

mod compas;
mod split;
mod synthetic;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use compas::{compas_row_to_text, load_compas_csv, CompasRow, COMPAS_COLUMNS};
pub use split::{split, split_paired, split_unpaired, DatasetSplit};
pub use synthetic::{
    default_templates, generate_null_paired, generate_synthetic_paired, is_gender_word,
    mask_gender_words, Injection, GENDER_PAIRS,
};

use crate::error::{Error, Result};

pub const MALE: &str = "MALE";
pub const FEMALE: &str = "FEMALE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub subgroup: String,
    pub text: String,
    pub label: usize,
}

/// Two subgroup variants of the same input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedRecord {
    pub pair_id: String,
    pub a: Variant,
    pub b: Variant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnpairedRecord {
    pub id: String,
    pub subgroup: String,
    pub text: String,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgroups {
    pub a: String,
    pub b: String,
}

impl Default for Subgroups {
    fn default() -> Self {
        Self {
            a: MALE.into(),
            b: FEMALE.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditDataset {
    Paired {
        subgroups: Subgroups,
        records: Vec<PairedRecord>,
    },
    Unpaired {
        subgroups: Subgroups,
        records: Vec<UnpairedRecord>,
    },
}

impl AuditDataset {
    /// Paired dataset whose subgroup names are taken from the first record.
    pub fn paired(records: Vec<PairedRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Record("no pairs".into()))?;
        let subgroups = Subgroups {
            a: first.a.subgroup.clone(),
            b: first.b.subgroup.clone(),
        };
        if subgroups.a == subgroups.b {
            return Err(Error::Record(
                "both variants carry the same subgroup".into(),
            ));
        }
        if let Some(r) = records
            .iter()
            .find(|r| r.a.subgroup != subgroups.a || r.b.subgroup != subgroups.b)
        {
            return Err(Error::Record(format!(
                "pair '{}' has inconsistent subgroups",
                r.pair_id
            )));
        }
        Ok(AuditDataset::Paired { subgroups, records })
    }

    pub fn subgroups(&self) -> &Subgroups {
        match self {
            AuditDataset::Paired { subgroups, .. } | AuditDataset::Unpaired { subgroups, .. } => {
                subgroups
            }
        }
    }

    /// Number of texts (two per pair).
    pub fn text_count(&self) -> usize {
        match self {
            AuditDataset::Paired { records, .. } => 2 * records.len(),
            AuditDataset::Unpaired { records, .. } => records.len(),
        }
    }

    pub fn is_paired(&self) -> bool {
        matches!(self, AuditDataset::Paired { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    /// `.jsonl` / `.ndjson` map to JSON lines, anything else to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => DataFormat::Jsonl,
            _ => DataFormat::Csv,
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::Csv => "csv",
            DataFormat::Jsonl => "jsonl",
        })
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "jsonl" | "ndjson" => Ok(DataFormat::Jsonl),
            _ => Err(Error::Config(format!("unknown data format '{s}'"))),
        }
    }
}

/// Column (or JSON key) names and subgroup values of an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub pair_id: String,
    pub subgroup: String,
    pub text: String,
    pub label: String,
    pub subgroups: Subgroups,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            pair_id: "pair_id".into(),
            subgroup: "subgroup".into(),
            text: "text".into(),
            label: "label".into(),
            subgroups: Subgroups::default(),
        }
    }
}

/// One validated row with its 1-based line number.
#[derive(Debug, Clone)]
struct Row {
    line: usize,
    id: String,
    subgroup: String,
    text: String,
    label: usize,
}

fn parse_label(raw: &str) -> Option<usize> {
    match raw.trim() {
        "0" | "0.0" => Some(0),
        "1" | "1.0" => Some(1),
        _ => None,
    }
}

fn validate_row(path: &Path, line: usize, fields: [String; 4], schema: &Schema) -> Result<Row> {
    let [id, subgroup, text, label] = fields;
    if id.trim().is_empty() {
        return Err(Error::data(
            path,
            line,
            format!("empty '{}'", schema.pair_id),
        ));
    }
    if subgroup != schema.subgroups.a && subgroup != schema.subgroups.b {
        return Err(Error::data(
            path,
            line,
            format!(
                "subgroup '{subgroup}' is neither '{}' nor '{}'",
                schema.subgroups.a, schema.subgroups.b
            ),
        ));
    }
    if text.trim().is_empty() {
        return Err(Error::data(path, line, "empty text"));
    }
    let label = parse_label(&label)
        .ok_or_else(|| Error::data(path, line, format!("label '{label}' is not 0 or 1")))?;
    Ok(Row {
        line,
        id,
        subgroup,
        text,
        label,
    })
}

fn read_csv_rows(path: &Path, schema: &Schema) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::data(path, 1, e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::data(path, 1, format!("missing column '{name}'")))
    };
    let cols = [
        column(&schema.pair_id)?,
        column(&schema.subgroup)?,
        column(&schema.text)?,
        column(&schema.label)?,
    ];
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::data(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fields = cols.map(|c| record.get(c).unwrap_or("").to_string());
        rows.push(validate_row(path, line, fields, schema)?);
    }
    Ok(rows)
}

fn json_field(
    path: &Path,
    line: usize,
    obj: &serde_json::Map<String, serde_json::Value>,
    key: &str,
) -> Result<String> {
    match obj.get(key) {
        Some(serde_json::Value::String(s)) => Ok(s.clone()),
        Some(serde_json::Value::Number(n)) => Ok(n.to_string()),
        Some(other) => Err(Error::data(
            path,
            line,
            format!("field '{key}' has unsupported value {other}"),
        )),
        None => Err(Error::data(path, line, format!("missing field '{key}'"))),
    }
}

fn read_jsonl_rows(path: &Path, schema: &Schema) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&line).map_err(|e| Error::data(path, line_no, e.to_string()))?;
        let fields = [
            json_field(path, line_no, &obj, &schema.pair_id)?,
            json_field(path, line_no, &obj, &schema.subgroup)?,
            json_field(path, line_no, &obj, &schema.text)?,
            json_field(path, line_no, &obj, &schema.label)?,
        ];
        rows.push(validate_row(path, line_no, fields, schema)?);
    }
    Ok(rows)
}

fn read_rows(path: &Path, format: DataFormat, schema: &Schema) -> Result<Vec<Row>> {
    let rows = match format {
        DataFormat::Csv => read_csv_rows(path, schema)?,
        DataFormat::Jsonl => read_jsonl_rows(path, schema)?,
    };
    if rows.is_empty() {
        return Err(Error::data(path, 1, "no records"));
    }
    Ok(rows)
}

fn pair_rows(path: &Path, rows: Vec<Row>, schema: &Schema) -> Result<Vec<PairedRecord>> {
    let mut slots: Vec<(String, usize, Option<Variant>, Option<Variant>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for row in rows {
        let k = *index.entry(row.id.clone()).or_insert_with(|| {
            slots.push((row.id.clone(), row.line, None, None));
            slots.len() - 1
        });
        let slot = &mut slots[k];
        let target = if row.subgroup == schema.subgroups.a {
            &mut slot.2
        } else {
            &mut slot.3
        };
        if target.is_some() {
            return Err(Error::data(
                path,
                row.line,
                format!(
                    "duplicate pair_id '{}' for subgroup '{}'",
                    row.id, row.subgroup
                ),
            ));
        }
        *target = Some(Variant {
            subgroup: row.subgroup,
            text: row.text,
            label: row.label,
        });
    }
    slots
        .into_iter()
        .map(|(pair_id, line, a, b)| match (a, b) {
            (Some(a), Some(b)) => Ok(PairedRecord { pair_id, a, b }),
            (None, _) => Err(Error::data(
                path,
                line,
                format!("pair '{pair_id}' has no '{}' variant", schema.subgroups.a),
            )),
            (_, None) => Err(Error::data(
                path,
                line,
                format!("pair '{pair_id}' has no '{}' variant", schema.subgroups.b),
            )),
        })
        .collect()
}

/// Loads a paired dataset: exactly one row per `(pair_id, subgroup)`.
pub fn load_paired(path: &Path, format: DataFormat, schema: &Schema) -> Result<Vec<PairedRecord>> {
    let rows = read_rows(path, format, schema)?;
    pair_rows(path, rows, schema)
}

pub fn load_unpaired(
    path: &Path,
    format: DataFormat,
    schema: &Schema,
) -> Result<Vec<UnpairedRecord>> {
    let rows = read_rows(path, format, schema)?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if let Some(first) = seen.insert(row.id.clone(), row.line) {
            return Err(Error::data(
                path,
                row.line,
                format!("duplicate id '{}' (first on line {first})", row.id),
            ));
        }
        out.push(UnpairedRecord {
            id: row.id,
            subgroup: row.subgroup,
            text: row.text,
            label: row.label,
        });
    }
    Ok(out)
}

/// Loads either shape: paired when some id occurs more than once.
pub fn load_dataset(path: &Path, format: DataFormat, schema: &Schema) -> Result<AuditDataset> {
    let rows = read_rows(path, format, schema)?;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in &rows {
        *counts.entry(r.id.as_str()).or_default() += 1;
    }
    let subgroups = schema.subgroups.clone();
    if counts.values().any(|&c| c > 1) {
        let records = pair_rows(path, rows, schema)?;
        Ok(AuditDataset::Paired { subgroups, records })
    } else {
        let records = rows
            .into_iter()
            .map(|r| UnpairedRecord {
                id: r.id,
                subgroup: r.subgroup,
                text: r.text,
                label: r.label,
            })
            .collect();
        Ok(AuditDataset::Unpaired { subgroups, records })
    }
}

#[derive(Serialize)]
struct CanonicalRow<'a> {
    pair_id: &'a str,
    subgroup: &'a str,
    text: &'a str,
    label: usize,
}

fn write_rows<'a>(
    path: &Path,
    format: DataFormat,
    rows: impl Iterator<Item = CanonicalRow<'a>>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    match format {
        DataFormat::Csv => {
            let mut w = csv::Writer::from_writer(file);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        DataFormat::Jsonl => {
            let mut w = BufWriter::new(file);
            for row in rows {
                serde_json::to_writer(&mut w, &row)?;
                w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

/// Writes pairs in the canonical schema, variant A before variant B.
pub fn save_paired(path: &Path, format: DataFormat, records: &[PairedRecord]) -> Result<()> {
    let rows = records.iter().flat_map(|r| {
        [&r.a, &r.b].map(|v| CanonicalRow {
            pair_id: &r.pair_id,
            subgroup: &v.subgroup,
            text: &v.text,
            label: v.label,
        })
    });
    write_rows(path, format, rows)
}

pub fn save_unpaired(path: &Path, format: DataFormat, records: &[UnpairedRecord]) -> Result<()> {
    let rows = records.iter().map(|r| CanonicalRow {
        pair_id: &r.id,
        subgroup: &r.subgroup,
        text: &r.text,
        label: r.label,
    });
    write_rows(path, format, rows)
}

pub fn save_dataset(path: &Path, format: DataFormat, data: &AuditDataset) -> Result<()> {
    match data {
        AuditDataset::Paired { records, .. } => save_paired(path, format, records),
        AuditDataset::Unpaired { records, .. } => save_unpaired(path, format, records),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn two_rows_make_one_pair() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "d.csv",
            "pair_id,subgroup,text,label\n1,MALE,He is cynically false about his childhood.,1\n1,FEMALE,She is cynically false about her childhood.,0\n",
        );
        let pairs = load_paired(&p, DataFormat::Csv, &Schema::default()).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].a.subgroup, MALE);
        assert_eq!(
            pairs[0].b.text,
            "She is cynically false about her childhood."
        );
        assert_eq!((pairs[0].a.label, pairs[0].b.label), (1, 0));
    }

    #[test]
    fn duplicate_pair_variant_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "d.csv",
            "pair_id,subgroup,text,label\n1,MALE,a b,1\n1,FEMALE,a c,0\n1,MALE,a d,1\n",
        );
        let err = load_paired(&p, DataFormat::Csv, &Schema::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert!(msg.contains("duplicate"), "{msg}");
    }

    #[test]
    fn missing_column_and_empty_text_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "pair_id,subgroup,label\n1,MALE,1\n");
        assert!(load_paired(&p, DataFormat::Csv, &Schema::default())
            .unwrap_err()
            .to_string()
            .contains("missing column 'text'"));
        let p = write(&dir, "e.csv", "pair_id,subgroup,text,label\n1,MALE,  ,1\n");
        assert!(load_paired(&p, DataFormat::Csv, &Schema::default())
            .unwrap_err()
            .to_string()
            .contains("line 2: empty text"));
    }

    #[test]
    fn incomplete_pair_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "d.csv",
            "pair_id,subgroup,text,label\n1,MALE,a,1\n1,FEMALE,b,0\n2,MALE,c,1\n",
        );
        let msg = load_paired(&p, DataFormat::Csv, &Schema::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("pair '2' has no 'FEMALE' variant"), "{msg}");
    }

    #[test]
    fn schema_mapping_renames_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.jsonl", "{\"id\": 7, \"gender\": \"m\", \"sentence\": \"he ran\", \"y\": 1}\n\n{\"id\": 7, \"gender\": \"f\", \"sentence\": \"she ran\", \"y\": 0}\n");
        let schema = Schema {
            pair_id: "id".into(),
            subgroup: "gender".into(),
            text: "sentence".into(),
            label: "y".into(),
            subgroups: Subgroups {
                a: "m".into(),
                b: "f".into(),
            },
        };
        let pairs = load_paired(&p, DataFormat::Jsonl, &schema).unwrap();
        assert_eq!(pairs[0].pair_id, "7");
        assert_eq!(pairs[0].b.text, "she ran");
    }

    #[test]
    fn jsonl_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "d.jsonl",
            "{\"pair_id\":\"1\",\"subgroup\":\"MALE\",\"text\":\"x\",\"label\":1}\n{oops\n",
        );
        let msg = load_paired(&p, DataFormat::Jsonl, &Schema::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn round_trip_both_formats() {
        let data =
            generate_synthetic_paired(&default_templates(), 25, Injection::Noise, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (name, fmt) in [("r.csv", DataFormat::Csv), ("r.jsonl", DataFormat::Jsonl)] {
            let p = dir.path().join(name);
            save_paired(&p, fmt, &data).unwrap();
            assert_eq!(load_paired(&p, fmt, &Schema::default()).unwrap(), data);
            let ds = load_dataset(&p, fmt, &Schema::default()).unwrap();
            assert!(ds.is_paired());
        }
    }

    #[test]
    fn unique_ids_load_as_unpaired() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "u.csv", "pair_id,subgroup,text,label\n1,MALE,\"3 priors, score factor 1\",1\n2,FEMALE,\"0 priors, score factor 0\",0\n");
        let ds = load_dataset(&p, DataFormat::Csv, &Schema::default()).unwrap();
        let AuditDataset::Unpaired { records, .. } = &ds else {
            panic!("expected unpaired")
        };
        assert_eq!(records[0].text, "3 priors, score factor 1");
        let q = dir.path().join("u2.csv");
        save_dataset(&q, DataFormat::Csv, &ds).unwrap();
        assert_eq!(
            load_dataset(&q, DataFormat::Csv, &Schema::default()).unwrap(),
            ds
        );
    }

    #[test]
    fn missing_file_is_an_io_error_with_the_path() {
        let err = load_paired(
            Path::new("/no/such/file.csv"),
            DataFormat::Csv,
            &Schema::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/no/such/file.csv"));
    }

    #[test]
    fn geco_scale_pairing() {
        let mut text = String::from("pair_id,subgroup,text,label\n");
        for i in 0..1610 {
            text.push_str(&format!(
                "{i},MALE,he sat {i},1\n{i},FEMALE,she sat {i},0\n"
            ));
        }
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "geco.csv", &text);
        assert_eq!(
            load_paired(&p, DataFormat::Csv, &Schema::default())
                .unwrap()
                .len(),
            1610
        );
    }
}
