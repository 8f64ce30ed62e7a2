//! File formats: labelled CSV input, feature-only CSV, versioned model
//! files, JSON reports and CSV tables.
//!
//! Labels are 1-based in every external format and 0-based in memory.
//! CSV outputs begin with a `# format_version: N` comment line, which the
//! readers here skip.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::SammeModel;
use crate::data::{find_label_conflict, Dataset, FeatureMatrix, Label};
use crate::eliminate::TrainedModel;
use crate::error::{BoostError, Result};
use crate::weak_learn::{PoolSpec, Stump};

pub const FORMAT_VERSION: u32 = 1;

/// Serde adapters that write 0-based labels as 1-based integers.
pub mod one_based {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    fn down<E: Error>(v: usize) -> Result<usize, E> {
        v.checked_sub(1)
            .ok_or_else(|| E::custom("labels are 1-based; found 0"))
    }

    pub mod label {
        use super::*;

        pub fn serialize<S: Serializer>(v: &usize, s: S) -> Result<S::Ok, S::Error> {
            (v + 1).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
            down(usize::deserialize(d)?)
        }
    }

    pub mod labels {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|a| a + 1))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
            Vec::<usize>::deserialize(d)?.into_iter().map(down).collect()
        }
    }

    pub mod label_sets {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Vec<usize>], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|set| set.iter().map(|a| a + 1).collect::<Vec<_>>()))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<usize>>, D::Error> {
            Vec::<Vec<usize>>::deserialize(d)?
                .into_iter()
                .map(|set| set.into_iter().map(down).collect())
                .collect()
        }
    }
}

fn format_err(line: u64, message: impl Into<String>) -> BoostError {
    BoostError::Format {
        line,
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> BoostError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => BoostError::Io(io),
        kind => format_err(line, format!("{kind:?}")),
    }
}

struct RawTable {
    rows: Vec<Vec<f64>>,
    labels: Vec<(u64, String)>,
}

fn read_table<R: Read>(reader: R, require_label: bool) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(format_err(1, "missing header")),
        Some(r) => r.map_err(csv_error)?,
    };
    let header_line = header.position().map(|p| p.line()).unwrap_or(1);
    let names: Vec<&str> = header.iter().collect();
    let has_label = names.last() == Some(&"label");
    let dim = if has_label { names.len() - 1 } else { names.len() };
    let expected = (0..dim).all(|j| names[j] == format!("f{j}"));
    if dim == 0 || !expected || (require_label && !has_label) {
        let want = if require_label { "f0,...,f{d-1},label" } else { "f0,...,f{d-1}[,label]" };
        return Err(format_err(
            header_line,
            format!("missing or malformed header; expected `{want}`"),
        ));
    }

    let mut table = RawTable {
        rows: Vec::new(),
        labels: Vec::new(),
    };
    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != names.len() {
            return Err(format_err(
                line,
                format!("expected {} fields, found {}", names.len(), record.len()),
            ));
        }
        let row = record
            .iter()
            .take(dim)
            .enumerate()
            .map(|(j, s)| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format_err(line, format!("feature f{j} is not a finite real: `{s}`"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        table.rows.push(row);
        if has_label {
            table.labels.push((line, record[dim].to_string()));
        }
    }
    if table.rows.is_empty() {
        return Err(format_err(header_line + 1, "no data rows"));
    }
    Ok(table)
}

/// Parse a labelled CSV. `|A|` is the largest label unless `num_labels`
/// raises it.
pub fn read_dataset<R: Read>(reader: R, num_labels: Option<usize>) -> Result<Dataset> {
    let table = read_table(reader, true)?;
    let mut labels = Vec::with_capacity(table.labels.len());
    for (line, s) in &table.labels {
        match s.parse::<i64>() {
            Ok(v) if v >= 1 => labels.push(v as usize - 1),
            _ => {
                return Err(BoostError::Label {
                    line: *line,
                    message: format!("label must be an integer >= 1, found `{s}`"),
                })
            }
        }
    }
    let lines: Vec<u64> = table.labels.iter().map(|(l, _)| *l).collect();
    let (argmax, max) = labels
        .iter()
        .enumerate()
        .max_by_key(|(i, a)| (**a, std::cmp::Reverse(*i)))
        .map(|(i, a)| (i, a + 1))
        .unwrap_or((0, 0));
    let m = match num_labels {
        Some(m) if m < max => {
            return Err(BoostError::Label {
                line: lines[argmax],
                message: format!("label {max} exceeds the declared label count {m}"),
            })
        }
        Some(m) => m,
        None => max,
    };
    if m < 2 {
        return Err(BoostError::Label {
            line: lines[0],
            message: "at least 2 labels are needed; raise the count with --num-labels".into(),
        });
    }
    let features = FeatureMatrix::from_rows(&table.rows)?;
    if let Some((first, second)) = find_label_conflict(&features, &labels) {
        return Err(BoostError::Consistency {
            line: lines[second],
            message: format!(
                "row repeats the features of line {} with a different label",
                lines[first]
            ),
        });
    }
    Dataset::new(features, labels, m)
}

pub fn load_csv(path: &Path, num_labels: Option<usize>) -> Result<Dataset> {
    read_dataset(File::open(path)?, num_labels)
}

/// Feature rows from a CSV with or without a trailing `label` column.
pub fn read_features<R: Read>(reader: R) -> Result<FeatureMatrix> {
    let table = read_table(reader, false)?;
    FeatureMatrix::from_rows(&table.rows)
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    read_features(File::open(path)?)
}

/// Render a dataset in the input CSV format.
pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_error)?;
    for (x, y) in data.features().rows().zip(data.labels()) {
        let mut record: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        record.push((y + 1).to_string());
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a CSV table preceded by the format-version comment.
pub fn write_table<W: Write, R: Serialize>(mut writer: W, rows: &[R]) -> Result<()> {
    writeln!(writer, "# format_version: {FORMAT_VERSION}")?;
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PredictionRow {
    label: usize,
}

/// Predictions (0-based in memory) as a one-column CSV of 1-based labels.
pub fn write_predictions<W: Write>(writer: W, predictions: &[Label]) -> Result<()> {
    let rows: Vec<PredictionRow> = predictions.iter().map(|a| PredictionRow { label: a + 1 }).collect();
    write_table(writer, &rows)
}

/// Read back a predictions CSV into 0-based labels.
pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<Label>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match record.get(0).and_then(|s| s.parse::<usize>().ok()) {
            Some(v) if v >= 1 => out.push(v - 1),
            _ => {
                return Err(BoostError::Label {
                    line,
                    message: "prediction is not a label >= 1".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Serialize `value` as pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(mut writer: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| BoostError::Numeric(format!("cannot encode JSON: {e}")))?;
    writeln!(writer)?;
    Ok(())
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_json(&mut w, value)?;
    w.flush()?;
    Ok(())
}

/// Any model the CLI can train.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "model", rename_all = "snake_case")]
pub enum AnyModel {
    Tau(TrainedModel),
    Samme(SammeModel),
    Adaboost(SammeModel),
}

impl AnyModel {
    pub fn num_labels(&self) -> usize {
        match self {
            AnyModel::Tau(m) => m.num_labels,
            AnyModel::Samme(m) | AnyModel::Adaboost(m) => m.num_labels,
        }
    }

    pub fn predict_all(&self, features: &FeatureMatrix) -> Result<Vec<Label>> {
        match self {
            AnyModel::Tau(m) => m.predict_all(features),
            AnyModel::Samme(m) | AnyModel::Adaboost(m) => m.predict_all(features),
        }
    }
}

#[derive(Serialize)]
struct ModelEnvelopeRef<'a> {
    format_version: u32,
    #[serde(flatten)]
    model: &'a AnyModel,
}

#[derive(Deserialize)]
struct ModelEnvelope {
    format_version: u32,
    #[serde(flatten)]
    model: AnyModel,
}

pub fn write_model<W: Write>(writer: W, model: &AnyModel) -> Result<()> {
    write_json(
        writer,
        &ModelEnvelopeRef {
            format_version: FORMAT_VERSION,
            model,
        },
    )
}

pub fn read_model<R: Read>(reader: R) -> Result<AnyModel> {
    let value: serde_json::Value = serde_json::from_reader(reader)
        .map_err(|e| BoostError::Model(format!("not a JSON model file: {e}")))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(BoostError::Model(format!(
                "unsupported format_version {v}; this build reads {FORMAT_VERSION}"
            )))
        }
        None => return Err(BoostError::Model("missing format_version".into())),
    }
    let envelope: ModelEnvelope = serde_json::from_value(value)
        .map_err(|e| BoostError::Model(format!("malformed model: {e}")))?;
    debug_assert_eq!(envelope.format_version, FORMAT_VERSION);
    Ok(envelope.model)
}

pub fn save_model(path: &Path, model: &AnyModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    read_model(std::io::BufReader::new(File::open(path)?))
}

/// Directions file: one direction per line, comma-separated coefficients,
/// `#` comments and blank lines ignored.
pub fn read_directions<R: Read>(mut reader: R) -> Result<Vec<Vec<f64>>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .map(|s| match s.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format_err(i as u64 + 1, format!("bad coefficient `{}`", s.trim()))),
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = out.first().map(Vec::len) {
            if first != v.len() {
                return Err(format_err(i as u64 + 1, "directions differ in length"));
            }
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(format_err(1, "no directions"));
    }
    Ok(out)
}

/// `axis`, `directions:<path>` or `constants:<l1>,<l2>,...` (constant
/// hypotheses with the given 1-based labels).
pub fn parse_pool_spec(s: &str) -> Result<PoolSpec> {
    if s == "axis" {
        return Ok(PoolSpec::Axis);
    }
    if let Some(path) = s.strip_prefix("directions:") {
        return Ok(PoolSpec::Directions(read_directions(File::open(path)?)?));
    }
    if let Some(list) = s.strip_prefix("constants:") {
        return list
            .split(',')
            .map(|v| match v.trim().parse::<usize>() {
                Ok(a) if a >= 1 => Ok(Stump::constant(a - 1)),
                _ => Err(BoostError::Contract(format!("bad constant label `{v}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PoolSpec::Fixed);
    }
    Err(BoostError::Contract(format!(
        "unknown pool `{s}`; use `axis`, `directions:<path>` or `constants:<labels>`"
    )))
}
