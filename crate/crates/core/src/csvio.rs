//! CSV encodings for labeled matrices and vectors.
//!
//! A matrix file has a header row `label,<l1>,<l2>,...` followed by one row
//! per label. Numbers are written with 17 significant digits so that a round
//! trip reproduces every entry bit for bit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{GraphPoint, PointSet};
use crate::linalg::{LabeledMatrix, MatrixKind};

const CORNER: &str = "label";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_num(s: &str, row: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {row}: bad number {s:?}")))
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn parse_labels<'a>(cells: impl Iterator<Item = &'a str>) -> Result<Vec<GraphPoint>> {
    cells.map(str::parse).collect()
}

/// Labels must arrive in canonical order; anything else is rejected rather
/// than silently permuted.
fn point_set(labels: Vec<GraphPoint>) -> Result<PointSet> {
    let set = PointSet::new(labels.clone());
    if set.points() != labels.as_slice() {
        return Err(Error::Parse("labels are not sorted and unique".into()));
    }
    Ok(set)
}

pub fn write_matrix(m: &LabeledMatrix) -> Result<String> {
    let mut w = writer();
    let mut header = vec![CORNER.to_string()];
    header.extend(m.labels().labels());
    w.write_record(&header)?;
    for (i, label) in m.labels().labels().into_iter().enumerate() {
        let mut row = vec![label];
        row.extend((0..m.dim()).map(|j| num(m.get(i, j))));
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn read_matrix(text: &str, kind: MatrixKind) -> Result<LabeledMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))??;
    if header.get(0).map(str::trim) != Some(CORNER) {
        return Err(Error::Parse(format!("first header cell must be {CORNER:?}")));
    }
    let labels = parse_labels(header.iter().skip(1))?;
    let n = labels.len();
    let mut entries = DMatrix::<f64>::zeros(n, n);
    let mut rows = 0;
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if i >= n {
            return Err(Error::DimensionMismatch(format!("more than {n} data rows")));
        }
        if rec.len() != n + 1 {
            return Err(Error::DimensionMismatch(format!("row {}: expected {} cells, got {}", i + 1, n + 1, rec.len())));
        }
        let row_label: GraphPoint = rec[0].parse()?;
        if row_label != labels[i] {
            return Err(Error::Parse(format!("row {}: label {} does not match column label {}", i + 1, row_label, labels[i])));
        }
        for j in 0..n {
            entries[(i, j)] = parse_num(&rec[j + 1], i + 1)?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::DimensionMismatch(format!("expected {n} data rows, got {rows}")));
    }
    LabeledMatrix::new(point_set(labels)?, entries, kind)
}

/// One column per vector: header `label,s0,s1,...`, one row per point.
pub fn write_vectors(labels: &PointSet, columns: &[DVector<f64>]) -> Result<String> {
    for c in columns {
        if c.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!("vector of length {} for {} labels", c.len(), labels.len())));
        }
    }
    let mut w = writer();
    let mut header = vec![CORNER.to_string()];
    header.extend((0..columns.len()).map(|k| format!("s{k}")));
    w.write_record(&header)?;
    for (i, label) in labels.labels().into_iter().enumerate() {
        let mut row = vec![label];
        row.extend(columns.iter().map(|c| num(c[i])));
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn read_vectors(text: &str) -> Result<(PointSet, Vec<DVector<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Parse("empty vector file".into()))??;
    if header.get(0).map(str::trim) != Some(CORNER) {
        return Err(Error::Parse(format!("first header cell must be {CORNER:?}")));
    }
    let k = header.len() - 1;
    let mut labels = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != k + 1 {
            return Err(Error::DimensionMismatch(format!("row {}: expected {} cells, got {}", i + 1, k + 1, rec.len())));
        }
        labels.push(rec[0].parse()?);
        for (c, col) in cols.iter_mut().enumerate() {
            col.push(parse_num(&rec[c + 1], i + 1)?);
        }
    }
    Ok((point_set(labels)?, cols.into_iter().map(DVector::from_vec).collect()))
}
