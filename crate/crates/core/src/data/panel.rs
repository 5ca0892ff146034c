use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::period::Period;
use crate::error::{Error, Result};

/// A T×N panel of time series with explicit missing values (`NaN`).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    names: Vec<String>,
    dates: Vec<Period>,
    columns: Vec<Vec<f64>>,
    categories: Option<Vec<String>>,
    tcodes: Option<Vec<i64>>,
}

fn check_dates(dates: &[Period]) -> Result<()> {
    if dates.iter().all(Period::is_temporal) {
        for (i, w) in dates.windows(2).enumerate() {
            match w[0].compare(&w[1]) {
                Some(std::cmp::Ordering::Less) => {}
                Some(_) => {
                    return Err(Error::Parse {
                        row: i + 1,
                        column: 0,
                        message: format!("dates not strictly increasing: {} then {}", w[0], w[1]),
                    })
                }
                None => {
                    return Err(Error::Parse {
                        row: i + 1,
                        column: 0,
                        message: format!("mixed date formats: {} then {}", w[0], w[1]),
                    })
                }
            }
        }
    } else {
        let mut seen = HashSet::new();
        for (i, d) in dates.iter().enumerate() {
            if !seen.insert(d.to_string()) {
                return Err(Error::Parse {
                    row: i,
                    column: 0,
                    message: format!("duplicate row label `{d}`"),
                });
            }
        }
    }
    Ok(())
}

impl TimeSeriesPanel {
    pub fn new(dates: Vec<Period>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                what: "panel columns",
                expected: names.len(),
                found: columns.len(),
            });
        }
        for c in &columns {
            if c.len() != dates.len() {
                return Err(Error::DimensionMismatch {
                    what: "panel column length",
                    expected: dates.len(),
                    found: c.len(),
                });
            }
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::DuplicateName(n.clone()));
            }
        }
        check_dates(&dates)?;
        Ok(TimeSeriesPanel {
            names,
            dates,
            columns,
            categories: None,
            tcodes: None,
        })
    }

    /// Panel indexed `0..T` from named columns.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let t = columns.first().map_or(0, Vec::len);
        Self::new((0..t as i64).map(Period::Index).collect(), names, columns)
    }

    pub fn with_categories(mut self, categories: Vec<String>) -> Result<Self> {
        if categories.len() != self.names.len() {
            return Err(Error::DimensionMismatch {
                what: "categories",
                expected: self.names.len(),
                found: categories.len(),
            });
        }
        self.categories = Some(categories);
        Ok(self)
    }

    pub fn with_tcodes(mut self, tcodes: Vec<i64>) -> Result<Self> {
        if tcodes.len() != self.names.len() {
            return Err(Error::DimensionMismatch {
                what: "tcodes",
                expected: self.names.len(),
                found: tcodes.len(),
            });
        }
        self.tcodes = Some(tcodes);
        Ok(self)
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> &[Period] {
        &self.dates
    }

    pub fn categories(&self) -> Option<&[String]> {
        self.categories.as_deref()
    }

    pub fn tcodes(&self) -> Option<&[i64]> {
        self.tcodes.as_deref()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingVariable(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.index_of(name)?])
    }

    pub fn category_of(&self, name: &str) -> Result<Option<&str>> {
        let i = self.index_of(name)?;
        Ok(self.categories.as_ref().map(|c| c[i].as_str()))
    }

    /// Appends a column, keeping metadata vectors aligned.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.n_obs() {
            return Err(Error::DimensionMismatch {
                what: "panel column length",
                expected: self.n_obs(),
                found: values.len(),
            });
        }
        if self.names.contains(&name) {
            return Err(Error::DuplicateName(name));
        }
        self.names.push(name);
        self.columns.push(values);
        if let Some(c) = self.categories.as_mut() {
            c.push(String::new());
        }
        if let Some(t) = self.tcodes.as_mut() {
            t.push(1);
        }
        Ok(())
    }

    /// Sub-panel with the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names.iter().map(|n| self.index_of(n)).collect::<Result<_>>()?;
        Ok(TimeSeriesPanel {
            names: idx.iter().map(|&i| self.names[i].clone()).collect(),
            dates: self.dates.clone(),
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            categories: self.categories.as_ref().map(|c| idx.iter().map(|&i| c[i].clone()).collect()),
            tcodes: self.tcodes.as_ref().map(|c| idx.iter().map(|&i| c[i]).collect()),
        })
    }

    /// Rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.n_obs() {
            return Err(Error::param(format!("row range {start}..{end} outside 0..{}", self.n_obs())));
        }
        Ok(TimeSeriesPanel {
            names: self.names.clone(),
            dates: self.dates[start..end].to_vec(),
            columns: self.columns.iter().map(|c| c[start..end].to_vec()).collect(),
            categories: self.categories.clone(),
            tcodes: self.tcodes.clone(),
        })
    }

    pub(crate) fn replace_columns(&self, columns: Vec<Vec<f64>>) -> Self {
        TimeSeriesPanel {
            columns,
            ..self.clone()
        }
    }
}

/// How [`load_csv`] reads a file. The header row is always the first row.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    /// First column holds row labels; otherwise rows are numbered from 0.
    pub date_column: bool,
    /// `None` detects a transform-code row by a first cell starting with
    /// "transform"; `Some` forces the choice.
    pub tcode_row: Option<bool>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            date_column: true,
            tcode_row: None,
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "NaN" | "nan" | "N/A" | "." | "null")
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let cell = cell.trim();
    if is_missing(cell) {
        return Ok(f64::NAN);
    }
    cell.parse::<f64>().map_err(|_| Error::Parse {
        row,
        column,
        message: format!("cannot parse `{cell}` as a number"),
    })
}

/// Reads a panel from delimited text: a header row of names, optional rows
/// of transform codes (`Transform:` in the first cell) and categories
/// (`Category:`), then one row per period. Empty or `NA` cells are missing.
pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<TimeSeriesPanel> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    parse_csv(&text, options)
}

/// [`load_csv`] on in-memory text.
pub fn parse_csv(text: &str, options: &LoadOptions) -> Result<TimeSeriesPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 1,
            column: 0,
            message: e.to_string(),
        })?;
        let cells: Vec<String> = rec.iter().map(|c| c.trim().to_string()).collect();
        records.push((i + 1, cells));
    }
    let (_, header) = records
        .first()
        .cloned()
        .ok_or_else(|| Error::Parse {
            row: 1,
            column: 0,
            message: "empty file".into(),
        })?;
    let offset = usize::from(options.date_column);
    if header.len() <= offset {
        return Err(Error::Parse {
            row: 1,
            column: 0,
            message: "header has no series".into(),
        });
    }
    let names: Vec<String> = header[offset..].to_vec();
    let width = header.len();

    let mut tcodes = None;
    let mut categories = None;
    let mut dates = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row, cells) in records.into_iter().skip(1) {
        if cells.iter().all(|c| c.is_empty()) {
            continue;
        }
        if cells.len() != width {
            return Err(Error::Parse {
                row,
                column: cells.len().min(width),
                message: format!("expected {width} fields, found {}", cells.len()),
            });
        }
        let first = cells[0].to_ascii_lowercase();
        let meta_allowed = dates.is_empty() && options.date_column;
        let tcode_here = tcodes.is_none()
            && dates.is_empty()
            && match options.tcode_row {
                None => options.date_column && first.starts_with("transform"),
                Some(flag) => flag && !(options.date_column && first.starts_with("categor")),
            };
        if tcode_here {
            let mut codes = Vec::with_capacity(names.len());
            for (j, c) in cells[offset..].iter().enumerate() {
                let v = parse_cell(c, row, j + offset)?;
                if !v.is_finite() || v.fract() != 0.0 {
                    return Err(Error::Parse {
                        row,
                        column: j + offset,
                        message: format!("transform code `{c}` is not an integer"),
                    });
                }
                codes.push(v as i64);
            }
            tcodes = Some(codes);
            continue;
        }
        if meta_allowed && first.starts_with("categor") && categories.is_none() {
            categories = Some(cells[offset..].to_vec());
            continue;
        }
        let date = if options.date_column {
            Period::parse(&cells[0])
        } else {
            Period::Index(dates.len() as i64)
        };
        dates.push(date);
        for (j, c) in cells[offset..].iter().enumerate() {
            columns[j].push(parse_cell(c, row, j + offset)?);
        }
    }
    if options.tcode_row == Some(true) && tcodes.is_none() {
        return Err(Error::Parse {
            row: 2,
            column: 0,
            message: "transform-code row expected".into(),
        });
    }
    let mut panel = TimeSeriesPanel::new(dates, names, columns)?;
    if let Some(t) = tcodes {
        panel = panel.with_tcodes(t)?;
    }
    if let Some(c) = categories {
        panel = panel.with_categories(c)?;
    }
    Ok(panel)
}

/// Formats a number in shortest round-trip scientific notation; missing is empty.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

/// Writes a panel in the format read by [`load_csv`].
pub fn write_csv(panel: &TimeSeriesPanel, path: impl AsRef<Path>) -> Result<()> {
    let mut out = File::create(path.as_ref())?;
    out.write_all(to_csv_string(panel)?.as_bytes())?;
    Ok(())
}

pub fn to_csv_string(panel: &TimeSeriesPanel) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["date".to_string()];
    header.extend(panel.names.iter().cloned());
    w.write_record(&header)?;
    if let Some(t) = &panel.tcodes {
        let mut row = vec!["Transform:".to_string()];
        row.extend(t.iter().map(|c| c.to_string()));
        w.write_record(&row)?;
    }
    if let Some(c) = &panel.categories {
        let mut row = vec!["Category:".to_string()];
        row.extend(c.iter().cloned());
        w.write_record(&row)?;
    }
    for t in 0..panel.n_obs() {
        let mut row = vec![panel.dates[t].to_string()];
        row.extend(panel.columns.iter().map(|c| format_number(c[t])));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_numeric_file() {
        let p = parse_csv("date,a,b\n1,1.0,2.0\n2,3.0,4.0\n3,5.0,6.0\n", &LoadOptions::default()).unwrap();
        assert_eq!((p.n_obs(), p.n_series()), (3, 2));
        assert_eq!(p.column("b").unwrap(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn fred_style_tcode_row() {
        let text = "sasdate,RPI,CPI\nTransform:,5,6\n1/1/1959,1.0,2.0\n2/1/1959,1.1,2.1\n,,\n";
        let p = parse_csv(text, &LoadOptions::default()).unwrap();
        assert_eq!(p.tcodes().unwrap(), &[5, 6]);
        assert_eq!(p.n_obs(), 2);
        assert_eq!(p.dates()[1], Period::Date { year: 1959, month: 2, day: 1 });
    }

    #[test]
    fn empty_cell_is_missing() {
        let p = parse_csv("date,a\n1,\n2,3\n", &LoadOptions::default()).unwrap();
        assert!(p.column("a").unwrap()[0].is_nan());
        assert_eq!(p.column("a").unwrap()[1], 3.0);
    }

    #[test]
    fn parse_error_has_location() {
        let err = parse_csv("date,a,b\n1,1,2\n2,x,3\n", &LoadOptions::default()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (3, 1)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = parse_csv("date,a,a\n1,1,2\n", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateName(n) if n == "a"));
    }

    #[test]
    fn decreasing_dates_rejected() {
        assert!(parse_csv("date,a\n2001Q2,1\n2001Q1,2\n", &LoadOptions::default()).is_err());
    }

    #[test]
    fn no_date_column() {
        let opts = LoadOptions {
            date_column: false,
            tcode_row: None,
        };
        let p = parse_csv("a,b\n1,2\n3,4\n", &opts).unwrap();
        assert_eq!(p.dates(), &[Period::Index(0), Period::Index(1)]);
    }

    #[test]
    fn round_trip_with_metadata() {
        let p = TimeSeriesPanel::new(
            vec![Period::parse("2000Q1"), Period::parse("2000Q2")],
            vec!["x".into(), "y".into()],
            vec![vec![0.1, f64::NAN], vec![1e-300, -3.25]],
        )
        .unwrap()
        .with_tcodes(vec![1, 5])
        .unwrap()
        .with_categories(vec!["prices".into(), "output".into()])
        .unwrap();
        let back = parse_csv(&to_csv_string(&p).unwrap(), &LoadOptions::default()).unwrap();
        assert_eq!(back.tcodes(), p.tcodes());
        assert_eq!(back.categories(), p.categories());
        assert_eq!(back.dates(), p.dates());
        assert_eq!(back.column("y").unwrap(), p.column("y").unwrap());
        assert!(back.column("x").unwrap()[1].is_nan());
    }
}
