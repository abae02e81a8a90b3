use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    /// SI unit suffix appended to the header, e.g. `s` gives `t_s`.
    pub unit: Option<String>,
}

impl Column {
    pub fn new(name: &str, unit: Option<&str>) -> Self {
        Self {
            name: name.to_string(),
            unit: unit.map(str::to_string),
        }
    }

    pub fn header(&self) -> String {
        match &self.unit {
            Some(u) => format!("{}_{}", self.name, u),
            None => self.name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Flag(bool),
    Text(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Num(x) => write_float(out, *x),
            Cell::Int(i) => write!(out, "{i}").unwrap(),
            Cell::Flag(b) => out.push_str(if *b { "true" } else { "false" }),
            Cell::Text(s) => out.push_str(s),
        }
    }
}

/// Shortest round-trip scientific notation; `nan`, `inf`, `-inf` otherwise.
pub fn write_float(out: &mut String, x: f64) {
    if x.is_nan() {
        out.push_str("nan");
    } else if x.is_infinite() {
        out.push_str(if x > 0.0 { "inf" } else { "-inf" });
    } else {
        write!(out, "{x:e}").unwrap();
    }
}

/// Rectangular table of named, unit-annotated columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(columns: Vec<Column>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidParameter(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn headers(&self) -> Vec<String> {
        self.columns.iter().map(Column::header).collect()
    }

    pub fn column_index(&self, header: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.header() == header)
    }

    /// Numeric values of one column; non-numeric cells become NaN.
    pub fn numeric_column(&self, header: &str) -> Option<Vec<f64>> {
        let i = self.column_index(header)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[i] {
                    Cell::Num(x) => *x,
                    Cell::Int(v) => *v as f64,
                    _ => f64::NAN,
                })
                .collect(),
        )
    }

    /// Checks that the table is rectangular and that non-finite numbers
    /// only appear when some flag column is present.
    pub fn validate(&self) -> Result<()> {
        let has_flag = self
            .rows
            .first()
            .is_some_and(|r| r.iter().any(|c| matches!(c, Cell::Flag(_))));
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(Error::InvalidParameter(format!("row {i} is ragged")));
            }
            let non_finite = row
                .iter()
                .any(|c| matches!(c, Cell::Num(x) if !x.is_finite()));
            if non_finite && !has_flag {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has non-finite values but the table has no flag column"
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        self.validate()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.headers())?;
        let mut buf = String::new();
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| {
                    buf.clear();
                    c.render(&mut buf);
                    buf.clone()
                })
                .collect();
            w.write_record(&cells)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_and_checks() {
        let mut t = ResultTable::new(vec![
            Column::new("t", Some("s")),
            Column::new("g2", None),
            Column::new("g2_defined", None),
        ]);
        t.push(vec![Cell::Num(1e-9), Cell::Num(0.5), Cell::Flag(true)]).unwrap();
        t.push(vec![Cell::Num(2e-9), Cell::Num(f64::NAN), Cell::Flag(false)]).unwrap();
        assert!(t.push(vec![Cell::Num(0.0)]).is_err());
        let s = t.to_csv_string().unwrap();
        assert_eq!(s, "t_s,g2,g2_defined\n1e-9,5e-1,true\n2e-9,nan,false\n");
        let parsed: f64 = "5e-1".parse().unwrap();
        assert_eq!(parsed, 0.5);

        let mut bad = ResultTable::new(vec![Column::new("x", None)]);
        bad.push(vec![Cell::Num(f64::INFINITY)]).unwrap();
        assert!(bad.validate().is_err());
    }
}
