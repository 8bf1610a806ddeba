//! Numeric sample tables.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An `n x p` table of samples with one named column per variable.
#[derive(Clone, Debug)]
pub struct Dataset {
    columns: Vec<String>,
    index: HashMap<String, usize>,
    values: DMatrix<f64>,
    correlation: OnceLock<DMatrix<f64>>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if columns.len() != values.ncols() {
            return Err(Error::Dataset(format!(
                "{} column names for {} columns",
                columns.len(),
                values.ncols()
            )));
        }
        let mut index = HashMap::with_capacity(columns.len());
        for (i, c) in columns.iter().enumerate() {
            if index.insert(c.clone(), i).is_some() {
                return Err(Error::Dataset(format!("duplicate column `{c}`")));
            }
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("non-finite value {bad}")));
        }
        Ok(Self {
            columns,
            index,
            values,
            correlation: OnceLock::new(),
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Dataset(format!("no column named `{name}`")))
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.column(i).into_iter().copied()
    }

    /// Pearson correlation matrix, computed once.
    pub fn correlation(&self) -> &DMatrix<f64> {
        self.correlation.get_or_init(|| {
            let n = self.n_rows() as f64;
            let p = self.n_cols();
            let mut centered = self.values.clone();
            for j in 0..p {
                let mean = centered.column(j).sum() / n;
                centered.column_mut(j).add_scalar_mut(-mean);
            }
            let cov = centered.transpose() * &centered;
            let mut corr = DMatrix::zeros(p, p);
            for i in 0..p {
                for j in 0..p {
                    let denom = (cov[(i, i)] * cov[(j, j)]).sqrt();
                    corr[(i, j)] = if i == j {
                        1.0
                    } else if denom > 0.0 {
                        cov[(i, j)] / denom
                    } else {
                        0.0
                    };
                }
            }
            corr
        })
    }

    /// Reads a CSV table with a header row of column names.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let columns: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut data = Vec::new();
        let mut rows = 0;
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != columns.len() {
                return Err(Error::Dataset(format!(
                    "row {} has {} fields, expected {}",
                    r + 2,
                    record.len(),
                    columns.len()
                )));
            }
            for (c, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Dataset(format!(
                        "row {}, column `{}`: `{field}` is not a number",
                        r + 2,
                        columns[c]
                    ))
                })?;
                data.push(v);
            }
            rows += 1;
        }
        let values = DMatrix::from_row_slice(rows, columns.len(), &data);
        Self::new(columns, values)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.columns)?;
        for row in self.values.row_iter() {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let text = "A,B\n1.5,2\n-3,4e-2\n";
        let d = Dataset::from_csv(text.as_bytes()).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.columns(), ["A", "B"]);
        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        let again = Dataset::from_csv(out.as_slice()).unwrap();
        assert_eq!(again.values(), d.values());
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(Dataset::from_csv("A,A\n1,2\n".as_bytes()).is_err());
        assert!(Dataset::from_csv("A,B\n1,x\n".as_bytes()).is_err());
        assert!(Dataset::from_csv("A,B\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn correlation_of_linear_columns() {
        let values = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let d = Dataset::new(vec!["a".into(), "b".into()], values).unwrap();
        assert!((d.correlation()[(0, 1)] - 1.0).abs() < 1e-12);
    }
}
