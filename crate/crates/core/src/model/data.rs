use std::path::Path;

use nalgebra::DVector;

use crate::error::{DroError, Result};

/// Empirical baseline distribution: `n` points in `R^d` with optional labels.
#[derive(Debug, Clone)]
pub struct SampleSet {
    points: Vec<DVector<f64>>,
    labels: Option<Vec<f64>>,
}

impl SampleSet {
    pub fn new(points: Vec<DVector<f64>>, labels: Option<Vec<f64>>) -> Result<Self> {
        let d = points.first().map(|p| p.len()).ok_or(DroError::EmptyData(None))?;
        if d == 0 {
            return Err(DroError::InvalidConfig("points must have at least one feature".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(DroError::Dimension {
                expected: d,
                got: p.len(),
            });
        }
        if let Some(ys) = &labels {
            if ys.len() != points.len() {
                return Err(DroError::Dimension {
                    expected: points.len(),
                    got: ys.len(),
                });
            }
        }
        let finite = points.iter().all(|p| p.iter().all(|v| v.is_finite()))
            && labels.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(DroError::InvalidConfig("data contains NaN or infinite values".into()));
        }
        Ok(Self { points, labels })
    }

    /// Convenience for one-dimensional data.
    pub fn scalar(xs: &[f64], labels: Option<Vec<f64>>) -> Result<Self> {
        Self::new(xs.iter().map(|&x| DVector::from_element(1, x)).collect(), labels)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn d(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DVector<f64> {
        &self.points[i]
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Label of sample `i`, or 0 when the set is unlabeled.
    pub fn label(&self, i: usize) -> f64 {
        self.labels.as_ref().map_or(0.0, |ys| ys[i])
    }
}

/// Which CSV columns to read.
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    /// Name of the label column; `None` for feature-only files.
    pub label: Option<String>,
    /// Feature columns; `None` means every non-label column.
    pub features: Option<Vec<String>>,
}

/// Reads a headered CSV into a [`SampleSet`].
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SampleSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(DroError::EmptyData(Some(path.to_path_buf())));
    }
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| DroError::Data {
            path: path.to_path_buf(),
            row: 1,
            column: name.to_owned(),
            message: "column not found in header".into(),
        })
    };
    let label_col = schema.label.as_deref().map(find).transpose()?;
    let feature_cols: Vec<usize> = match &schema.features {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|c| Some(*c) != label_col).collect(),
    };
    if feature_cols.is_empty() {
        return Err(DroError::InvalidConfig(format!("{}: no feature columns", path.display())));
    }

    let mut points = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for (r, record) in reader.records().enumerate() {
        // header is row 1, first data row is row 2
        let row = r + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != headers.len() {
            return Err(DroError::Data {
                path: path.to_path_buf(),
                row,
                column: "*".into(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let cell = |c: usize| -> Result<f64> {
            let raw = &record[c];
            if raw.is_empty() {
                return Err(DroError::Data {
                    path: path.to_path_buf(),
                    row,
                    column: headers[c].clone(),
                    message: "missing value".into(),
                });
            }
            raw.parse::<f64>().map_err(|_| DroError::Data {
                path: path.to_path_buf(),
                row,
                column: headers[c].clone(),
                message: format!("not a number: {raw:?}"),
            })
        };
        let x: Vec<f64> = feature_cols.iter().map(|&c| cell(c)).collect::<Result<_>>()?;
        points.push(DVector::from_vec(x));
        if let (Some(c), Some(ys)) = (label_col, labels.as_mut()) {
            ys.push(cell(c)?);
        }
    }
    if points.is_empty() {
        return Err(DroError::EmptyData(Some(path.to_path_buf())));
    }
    SampleSet::new(points, labels)
}

fn csv_error(path: &Path, err: csv::Error) -> DroError {
    let row = err.position().map_or(0, |p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => DroError::io(path, source),
        other => DroError::Data {
            path: path.to_path_buf(),
            row,
            column: "*".into(),
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_labeled_file() {
        let f = write("x1,x2,y\n1,2,1\n3,4,-1\n5,6,1\n");
        let schema = CsvSchema {
            label: Some("y".into()),
            features: None,
        };
        let s = load_csv(f.path(), &schema).unwrap();
        assert_eq!((s.n(), s.d()), (3, 2));
        assert_eq!(s.labels().unwrap(), &[1.0, -1.0, 1.0]);
        assert_eq!(s.point(1)[1], 4.0);
    }

    #[test]
    fn feature_only_file_has_no_labels() {
        let f = write("a,b\n1,2\n");
        let s = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert!(s.labels().is_none());
        assert_eq!(s.label(0), 0.0);
    }

    #[test]
    fn missing_cell_names_row_and_column() {
        let f = write("x1,x2,y\n1,2,1\n3,,1\n");
        let schema = CsvSchema {
            label: Some("y".into()),
            features: None,
        };
        match load_csv(f.path(), &schema) {
            Err(DroError::Data { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "x2");
            }
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_empty() {
        let f = write("x\nabc\n");
        assert!(matches!(load_csv(f.path(), &CsvSchema::default()), Err(DroError::Data { .. })));
        let f = write("x\n");
        assert!(matches!(load_csv(f.path(), &CsvSchema::default()), Err(DroError::EmptyData(_))));
        let f = write("");
        assert!(load_csv(f.path(), &CsvSchema::default()).is_err());
    }

    #[test]
    fn ragged_row_rejected() {
        let f = write("x1,x2\n1,2\n3\n");
        assert!(load_csv(f.path(), &CsvSchema::default()).is_err());
    }

    #[test]
    fn sample_set_invariants() {
        assert!(SampleSet::new(vec![], None).is_err());
        let pts = vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![1.0])];
        assert!(SampleSet::new(pts, None).is_err());
        assert!(SampleSet::scalar(&[1.0, 2.0], Some(vec![1.0])).is_err());
    }
}
