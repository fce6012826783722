//! Text formats for matrices, realizations, parameters, dilation sequences,
//! curves and distance tables. Every reader accepts the JSON and CSV forms
//! it documents and tells them apart by the first non-blank character.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corr::RealizationSet;
use crate::curves::ManifoldCurve;
use crate::dilation::{DilationSequence, SchurParams};
use crate::error::{Error, Result};
use crate::liegroup::GroupElement;

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown format '{other}'"))),
        }
    }
}

type Rows = Vec<Vec<f64>>;

fn is_json(text: &str) -> bool {
    matches!(text.trim_start().chars().next(), Some('{') | Some('['))
}

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &Rows) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "ragged matrix: row of length {} among rows of length {ncols}",
            bad.len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn parse_csv_rows(text: &str) -> Result<Rows> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: '{f}' is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_csv_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Pretty JSON with arrays of scalars kept on one line.
fn to_json<T: Serialize>(value: &T) -> Result<String> {
    fn scalar(v: &Value) -> bool {
        !matches!(v, Value::Array(_) | Value::Object(_))
    }
    fn put(v: &Value, indent: usize, out: &mut String) -> Result<()> {
        let pad = "  ".repeat(indent + 1);
        match v {
            Value::Array(items) if items.iter().all(scalar) => {
                out.push_str(&serde_json::to_string(v)?);
            }
            Value::Array(items) => {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    out.push_str(&pad);
                    put(item, indent + 1, out)?;
                    out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
            Value::Object(map) => {
                out.push_str("{\n");
                for (k, (key, item)) in map.iter().enumerate() {
                    out.push_str(&pad);
                    out.push_str(&serde_json::to_string(key)?);
                    out.push_str(": ");
                    put(item, indent + 1, out)?;
                    out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
            _ => out.push_str(&serde_json::to_string(v)?),
        }
        Ok(())
    }
    let mut out = String::new();
    put(&serde_json::to_value(value)?, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    entries: Rows,
}

/// A square matrix: CSV rows without header, or `{"n": n, "entries": [[...]]}`.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let m = if is_json(text) {
        let doc: MatrixJson = serde_json::from_str(text)?;
        let m = from_rows(&doc.entries)?;
        if m.nrows() != doc.n {
            return Err(Error::Parse(format!(
                "\"n\" is {} but there are {} rows",
                doc.n,
                m.nrows()
            )));
        }
        m
    } else {
        from_rows(&parse_csv_rows(text)?)?
    };
    if m.nrows() == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    Ok(m)
}

pub fn write_matrix(m: &DMatrix<f64>, format: Format) -> Result<String> {
    let rows = to_rows(m);
    Ok(match format {
        Format::Csv => write_csv_rows(rows.iter().map(Vec::as_slice)),
        Format::Json => to_json(&MatrixJson {
            n: m.nrows(),
            entries: rows,
        })?,
    })
}

/// One realization per CSV row.
pub fn parse_realizations(text: &str) -> Result<RealizationSet> {
    RealizationSet::new(parse_csv_rows(text)?)
}

pub fn write_realizations(set: &RealizationSet) -> String {
    write_csv_rows(set.rows().iter().map(Vec::as_slice))
}

#[derive(Serialize, Deserialize)]
struct ParamsJson {
    n: usize,
    gamma: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    degenerate: Vec<(usize, usize)>,
}

/// Parameters with one-based indices: `{"n": n, "gamma": [[i, j, value], ...]}`,
/// or CSV lines `i,j,value` under the header `i,j,gamma`.
///
/// Entries not listed are zero.
pub fn parse_schur_params(text: &str) -> Result<SchurParams> {
    let (n, triples) = if is_json(text) {
        let doc: ParamsJson = serde_json::from_str(text)?;
        (doc.n, doc.gamma)
    } else {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().unwrap_or_default();
        let n = header
            .split(',')
            .nth(3)
            .and_then(|f| f.trim().strip_prefix("n="))
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse("expected header 'i,j,gamma,n=<size>'".into()))?;
        let rest: Vec<&str> = lines.collect();
        let rows = parse_csv_rows(&rest.join("\n"))?;
        let mut triples = Vec::with_capacity(rows.len());
        for r in rows {
            if r.len() != 3
                || r[0].fract() != 0.0
                || r[1].fract() != 0.0
                || r[0] < 1.0
                || r[1] < 1.0
            {
                return Err(Error::Parse(format!("bad parameter row {r:?}")));
            }
            triples.push((r[0] as usize, r[1] as usize, r[2]));
        }
        (n, triples)
    };
    let mut entries = Vec::with_capacity(triples.len());
    for (i, j, v) in triples {
        if i == 0 || j == 0 {
            return Err(Error::Parse("parameter indices are one-based".into()));
        }
        entries.push((i - 1, j - 1, v));
    }
    SchurParams::from_entries(n, &entries)
}

pub fn write_schur_params(p: &SchurParams, format: Format) -> Result<String> {
    let one_based = |(i, j): (usize, usize)| (i + 1, j + 1);
    Ok(match format {
        Format::Csv => {
            let mut out = format!("i,j,gamma,n={}\n", p.n());
            for (i, j, v) in p.entries() {
                out.push_str(&format!("{},{},{}\n", i + 1, j + 1, v));
            }
            out
        }
        Format::Json => {
            let doc = ParamsJson {
                n: p.n(),
                gamma: p
                    .entries()
                    .into_iter()
                    .map(|(i, j, v)| (i + 1, j + 1, v))
                    .collect(),
                degenerate: p.degenerate().iter().copied().map(one_based).collect(),
            };
            to_json(&doc)?
        }
    })
}

#[derive(Serialize, Deserialize)]
struct SequenceObject {
    dim: usize,
    #[serde(default)]
    complete: Option<usize>,
    matrices: Vec<Rows>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SequenceJson {
    List(Vec<Rows>),
    Object(SequenceObject),
}

impl SequenceObject {
    fn from_sequence(seq: &DilationSequence) -> Self {
        SequenceObject {
            dim: seq.dim(),
            complete: Some(seq.complete()),
            matrices: seq.matrices().iter().map(to_rows).collect(),
        }
    }

    fn into_sequence(self) -> Result<DilationSequence> {
        let matrices = self
            .matrices
            .iter()
            .map(from_rows)
            .collect::<Result<Vec<_>>>()?;
        if let Some(m) = matrices.iter().find(|m| m.nrows() != self.dim) {
            return Err(Error::DimMismatch {
                left: self.dim,
                right: m.nrows(),
            });
        }
        let complete = self.complete.unwrap_or(matrices.len());
        DilationSequence::with_complete(matrices, complete)
    }
}

/// A JSON list of matrices, or `{"dim", "complete", "matrices"}` where
/// `complete` counts the leading full-window matrices.
pub fn parse_sequence(text: &str) -> Result<DilationSequence> {
    match serde_json::from_str::<SequenceJson>(text)? {
        SequenceJson::List(list) => {
            DilationSequence::new(list.iter().map(from_rows).collect::<Result<Vec<_>>>()?)
        }
        SequenceJson::Object(obj) => obj.into_sequence(),
    }
}

pub fn write_sequence(seq: &DilationSequence) -> Result<String> {
    to_json(&SequenceObject::from_sequence(seq))
}

/// Writes `W_0000.csv, W_0001.csv, ...` into `dir`, creating it if needed.
pub fn write_sequence_dir(seq: &DilationSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for (k, w) in seq.matrices().iter().enumerate() {
        write_text(
            &dir.join(format!("W_{k:04}.csv")),
            &write_matrix(w, Format::Csv)?,
        )?;
    }
    Ok(())
}

/// Reads every `*.csv` in `dir`, in file-name order.
pub fn read_sequence_dir(dir: &Path) -> Result<DilationSequence> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let matrices = files
        .iter()
        .map(|f| parse_matrix(&read_text(f)?))
        .collect::<Result<Vec<_>>>()?;
    DilationSequence::new(matrices)
}

/// A curve with what is needed to map it back to its source.
#[derive(Debug, Clone)]
pub struct CurveFile {
    pub curve: ManifoldCurve,
    /// Right factor removed to start at the identity: source `= x_k * translation`.
    pub translation: Option<DMatrix<f64>>,
    /// Reflection applied to bring determinant `-1` points into `SO(n)`.
    pub correction: Option<DMatrix<f64>>,
    /// The full dilation sequence the curve came from.
    pub sequence: Option<DilationSequence>,
}

impl CurveFile {
    pub fn plain(curve: ManifoldCurve) -> Self {
        CurveFile {
            curve,
            translation: None,
            correction: None,
            sequence: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CurveObject {
    #[serde(default)]
    closed: bool,
    points: Vec<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    translation: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correction: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sequence: Option<SequenceObject>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CurveJson {
    List(Vec<Rows>),
    Object(CurveObject),
}

/// `{"closed": bool, "points": [matrices], ...}` or a bare list of matrices.
///
/// Points with determinant `-1` throughout are moved into `SO(n)`; the
/// reflection used is kept in [`CurveFile::correction`].
pub fn parse_curve(text: &str) -> Result<CurveFile> {
    let obj = match serde_json::from_str::<CurveJson>(text)? {
        CurveJson::List(points) => CurveObject {
            closed: false,
            points,
            translation: None,
            correction: None,
            sequence: None,
        },
        CurveJson::Object(obj) => obj,
    };
    let matrices = obj
        .points
        .iter()
        .map(from_rows)
        .collect::<Result<Vec<_>>>()?;
    let (curve, fix) = ManifoldCurve::from_matrices(matrices, obj.closed)?;
    let correction = match (obj.correction, fix) {
        (Some(c), None) => Some(from_rows(&c)?),
        (None, Some(r)) => Some(r.into_matrix()),
        (Some(c), Some(r)) => Some(r.into_matrix() * from_rows(&c)?),
        (None, None) => None,
    };
    Ok(CurveFile {
        curve,
        translation: obj.translation.as_ref().map(from_rows).transpose()?,
        correction,
        sequence: obj
            .sequence
            .map(SequenceObject::into_sequence)
            .transpose()?,
    })
}

pub fn write_curve(file: &CurveFile) -> Result<String> {
    let obj = CurveObject {
        closed: file.curve.is_closed(),
        points: file
            .curve
            .points()
            .iter()
            .map(|p| to_rows(p.matrix()))
            .collect(),
        translation: file.translation.as_ref().map(to_rows),
        correction: file.correction.as_ref().map(to_rows),
        sequence: file.sequence.as_ref().map(SequenceObject::from_sequence),
    };
    to_json(&obj)
}

/// Curve points as CSV: one line per point, the matrix flattened row-major.
pub fn write_curve_csv(curve: &ManifoldCurve) -> String {
    let flat: Vec<Vec<f64>> = curve
        .points()
        .iter()
        .map(|p: &GroupElement| p.matrix().transpose().iter().copied().collect())
        .collect();
    write_csv_rows(flat.iter().map(Vec::as_slice))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct DistanceJson<'a> {
    ids: &'a [String],
    distances: &'a [Vec<f64>],
}

/// CSV with a header row `id,<id_1>,...,<id_n>` and one labelled row per
/// curve, or `{"ids": [...], "distances": [[...]]}`.
pub fn write_distance_matrix(ids: &[String], d: &[Vec<f64>], format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => {
            let mut out = String::from("id");
            for id in ids {
                out.push(',');
                out.push_str(&csv_field(id));
            }
            out.push('\n');
            for (id, row) in ids.iter().zip(d) {
                out.push_str(&csv_field(id));
                for x in row {
                    out.push_str(&format!(",{x}"));
                }
                out.push('\n');
            }
            out
        }
        Format::Json => to_json(&DistanceJson { ids, distances: d })?,
    })
}

/// Reads a table written by [`write_distance_matrix`] in CSV form.
pub fn parse_distance_matrix(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let ids: Vec<String> = reader
        .headers()?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("'{f}' is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((ids, rows))
}
