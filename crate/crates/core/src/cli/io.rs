//! CSV ingestion and emission.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::CliError;
use crate::regression::Dataset;

/// Predictor token that synthesizes a column of ones.
pub const INTERCEPT_TOKEN: &str = "1";
pub const INTERCEPT_NAME: &str = "(intercept)";

/// A numeric table read from CSV, kept as raw strings until columns are
/// chosen so only the used columns have to parse.
pub struct Table {
    pub headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| CliError::data(format!("{}: bad header: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = rdr
            .records()
            .map(|r| {
                r.map(|rec| rec.iter().map(str::to_string).collect())
                    .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { headers, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Resolves a column by header name, falling back to a 0-based index.
    pub fn column_index(&self, key: &str, token: &str) -> Result<usize, CliError> {
        if let Some(i) = self.headers.iter().position(|h| h == token) {
            return Ok(i);
        }
        match token.parse::<usize>() {
            Ok(i) if i < self.headers.len() => Ok(i),
            _ => Err(CliError::config(format!(
                "'{key}': no column named '{token}'"
            ))),
        }
    }

    /// Parses one column; missing or non-numeric cells are data errors that
    /// name the row (1-based, header excluded) and the column.
    pub fn numeric_column(&self, col: usize) -> Result<Vec<f64>, CliError> {
        let name = &self.headers[col];
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let cell = row.get(col).map(String::as_str).unwrap_or("");
                if cell.is_empty() {
                    return Err(CliError::data(format!(
                        "row {}, column '{name}': missing value",
                        r + 1
                    )));
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(CliError::data(format!(
                        "row {}, column '{name}': '{cell}' is not a finite number",
                        r + 1
                    ))),
                }
            })
            .collect()
    }

    /// Stable reorder of the rows by a numeric column.
    pub fn sort_by_column(&mut self, col: usize) -> Result<(), CliError> {
        let keys = self.numeric_column(col)?;
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
        self.rows = order.into_iter().map(|i| self.rows[i].clone()).collect();
        Ok(())
    }

    /// Builds a dataset from comma-separated response and predictor lists.
    pub fn dataset(&self, responses: &str, predictors: &str) -> Result<Dataset, CliError> {
        let n = self.n_rows();
        let resp = split_list(responses);
        let pred = split_list(predictors);
        if resp.is_empty() {
            return Err(CliError::config("'response-cols' is empty"));
        }
        if pred.is_empty() {
            return Err(CliError::config("'predictor-cols' is empty"));
        }
        let mut y = DMatrix::zeros(n, resp.len());
        for (j, tok) in resp.iter().enumerate() {
            let col = self.numeric_column(self.column_index("response-cols", tok)?)?;
            y.column_mut(j).copy_from_slice(&col);
        }
        let mut x = DMatrix::zeros(n, pred.len());
        let mut names = Vec::with_capacity(pred.len());
        for (j, tok) in pred.iter().enumerate() {
            if *tok == INTERCEPT_TOKEN && !self.headers.iter().any(|h| h == tok) {
                x.column_mut(j).fill(1.0);
                names.push(INTERCEPT_NAME.to_string());
            } else {
                let c = self.column_index("predictor-cols", tok)?;
                x.column_mut(j).copy_from_slice(&self.numeric_column(c)?);
                names.push(self.headers[c].clone());
            }
        }
        Dataset::with_names(y, x, names).map_err(CliError::from)
    }
}

pub fn split_list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect()
}

/// Reals with 17 significant digits; non-finite values as `inf`, `-inf`,
/// `NaN`.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A CSV writer to a file, or to stdout when `path` is `None`.
pub fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| {
            CliError::config(format!("'out': cannot create {}: {e}", p.display()))
        })?),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

pub fn write_record<W: Write, I, S>(w: &mut csv::Writer<W>, rec: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(rec)
        .map_err(|e| CliError::config(format!("'out': write failed: {e}")))
}

pub fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<(), CliError> {
    w.flush()
        .map_err(|e| CliError::config(format!("'out': write failed: {e}")))
}
