use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::schema::{FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// Typed rows straight from CSV, before binarization.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Schema(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != schema.len()) {
            return Err(Error::Schema(format!(
                "row {i} has {} values, schema has {} features",
                r.len(),
                schema.len()
            )));
        }
        Ok(RawDataset { schema, rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes the dataset back out in the same layout `load_csv` accepts,
    /// with `label_name` as the final header.
    pub fn write_csv(&self, path: &Path, label_name: &str) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file, label_name).map_err(|e| match e {
            Error::Csv(c) if c.is_io_error() => Error::io(path, std::io::Error::other(c)),
            other => other,
        })
    }

    pub fn write_to<W: Write>(&self, writer: W, label_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.names().collect();
        header.push(label_name);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (row, label) in self.rows.iter().zip(&self.labels) {
            record.clear();
            for (v, f) in row.iter().zip(&self.schema.features) {
                record.push(match &f.kind {
                    FeatureKind::Categorical { categories } => categories[*v as usize].clone(),
                    FeatureKind::Continuous { .. } => format!("{v}"),
                });
            }
            record.push(label.to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Reads a comma-separated file whose header lists the schema's features in
/// order followed by a single 0/1 label column.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<RawDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema).map_err(|e| match e {
        Error::Header { detail, .. } => Error::Header {
            path: path.to_path_buf(),
            detail,
        },
        other => other,
    })
}

/// Same as [`load_csv`] over any reader. Data rows are numbered from 1
/// (the header is not counted) in error messages.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let p = schema.len();
    if header.len() != p + 1 {
        return Err(Error::Header {
            path: Default::default(),
            detail: format!("expected {} columns (features + label), found {}", p + 1, header.len()),
        });
    }
    for (i, (got, want)) in header.iter().zip(schema.names()).enumerate() {
        if got != want {
            return Err(Error::Header {
                path: Default::default(),
                detail: format!("column {i} is {got:?}, schema expects {want:?}"),
            });
        }
    }
    let label_name = header.get(p).unwrap_or("label").to_string();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 1;
        let record = record?;
        let mut row = Vec::with_capacity(p);
        for (j, feature) in schema.features.iter().enumerate() {
            let cell = record.get(j).unwrap_or("");
            let value = match &feature.kind {
                FeatureKind::Continuous { .. } => {
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Cell {
                            row: row_no,
                            column: feature.name.clone(),
                            detail: format!("cannot parse {cell:?} as a number"),
                        })?
                }
                FeatureKind::Categorical { .. } => feature.category_index(cell).ok_or_else(|| Error::Cell {
                    row: row_no,
                    column: feature.name.clone(),
                    detail: format!("unknown category {cell:?}"),
                })? as f64,
            };
            row.push(value);
        }
        let label_cell = record.get(p).unwrap_or("");
        let label = match label_cell {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Cell {
                    row: row_no,
                    column: label_name,
                    detail: format!("label must be 0 or 1, found {other:?}"),
                })
            }
        };
        rows.push(row);
        labels.push(label);
    }
    RawDataset::new(schema.clone(), rows, labels)
}
