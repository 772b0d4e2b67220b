//! Result tables and their CSV / markdown renderings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use adjoint_dae::AdjointPath;

use crate::config::Format;
use crate::ReportError;

#[derive(Clone, Debug, PartialEq)]
pub struct RowValues {
    pub estimate: f64,
    pub reference_error: Option<f64>,
    pub effectivity: Option<f64>,
    /// Named estimator contributions, in estimator order.
    pub terms: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Ok(RowValues),
    /// Error message; CSV keeps only the empty numeric fields.
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub problem: String,
    pub dt: f64,
    pub t_end: f64,
    pub method: AdjointPath,
    pub outcome: Outcome,
    pub wall_ms: f64,
}

impl Row {
    pub fn values(&self) -> Option<&RowValues> {
        match &self.outcome {
            Outcome::Ok(v) => Some(v),
            Outcome::Failed(_) => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub rows: Vec<Row>,
}

const FIXED_COLUMNS: [&str; 7] = ["problem", "dt", "T", "method", "estimate", "reference_error", "effectivity"];

fn num(x: f64) -> String {
    // Shortest representation that parses back to the same bits.
    format!("{x:e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl Table {
    pub fn failures(&self) -> impl Iterator<Item = (&Row, &str)> {
        self.rows.iter().filter_map(|r| match &r.outcome {
            Outcome::Failed(msg) => Some((r, msg.as_str())),
            Outcome::Ok(_) => None,
        })
    }

    /// Union of term names over all rows, in first-appearance order.
    pub fn term_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for v in self.rows.iter().filter_map(Row::values) {
            for (name, _) in &v.terms {
                if !names.contains(name) {
                    names.push(name.clone());
                }
            }
        }
        names
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ReportError> {
        if self.rows.is_empty() {
            return Err(ReportError::EmptyTable);
        }
        let terms = self.term_names();
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = FIXED_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(terms.iter().map(|t| format!("term:{t}")))
            .chain(std::iter::once("wall_ms".to_string()))
            .collect();
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.problem.clone(), num(row.dt), num(row.t_end), row.method.to_string()];
            match row.values() {
                Some(v) => {
                    rec.extend([num(v.estimate), opt_num(v.reference_error), opt_num(v.effectivity)]);
                    for t in &terms {
                        rec.push(opt_num(v.terms.iter().find(|(n, _)| n == t).map(|(_, x)| *x)));
                    }
                }
                None => rec.extend(std::iter::repeat(String::new()).take(3 + terms.len())),
            }
            rec.push(num(row.wall_ms));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Parses a table written by [`Table::write_csv`]. Rows with an empty
    /// estimate come back as failures with an empty message.
    pub fn from_csv(text: &str) -> Result<Self, ReportError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        let bad = |msg: String| ReportError::Parse(msg);
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < FIXED_COLUMNS.len() + 1
            || cols[..FIXED_COLUMNS.len()] != FIXED_COLUMNS
            || cols.last() != Some(&"wall_ms")
        {
            return Err(bad(format!("unexpected header {cols:?}")));
        }
        let term_names: Vec<String> = cols[FIXED_COLUMNS.len()..cols.len() - 1]
            .iter()
            .map(|c| c.strip_prefix("term:").map(str::to_string).ok_or_else(|| bad(format!("bad column `{c}`"))))
            .collect::<Result<_, _>>()?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
        let parse_opt = |s: &str| if s.is_empty() { Ok(None) } else { parse(s).map(Some) };

        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let method = match &rec[3] {
                "adjoint-dae" => AdjointPath::Dae,
                "adjoint-ode" => AdjointPath::Ode,
                other => return Err(bad(format!("unknown method `{other}`"))),
            };
            let outcome = match parse_opt(&rec[4])? {
                None => Outcome::Failed(String::new()),
                Some(estimate) => {
                    let mut terms = Vec::new();
                    for (k, name) in term_names.iter().enumerate() {
                        if let Some(x) = parse_opt(&rec[FIXED_COLUMNS.len() + k])? {
                            terms.push((name.clone(), x));
                        }
                    }
                    Outcome::Ok(RowValues {
                        estimate,
                        reference_error: parse_opt(&rec[5])?,
                        effectivity: parse_opt(&rec[6])?,
                        terms,
                    })
                }
            };
            rows.push(Row {
                problem: rec[0].to_string(),
                dt: parse(&rec[1])?,
                t_end: parse(&rec[2])?,
                method,
                outcome,
                wall_ms: parse(&rec[rec.len() - 1])?,
            });
        }
        Ok(Table { rows })
    }

    pub fn write_markdown<W: Write>(&self, mut out: W) -> Result<(), ReportError> {
        if self.rows.is_empty() {
            return Err(ReportError::EmptyTable);
        }
        writeln!(out, "| problem | dt | T | method | Error Estimate | Reference Error | E-Ratio |")?;
        writeln!(out, "|---|---:|---:|---|---:|---:|---:|")?;
        for row in &self.rows {
            let (est, re, eff) = match row.values() {
                Some(v) => (
                    sci5(v.estimate),
                    v.reference_error.map(sci5).unwrap_or_default(),
                    v.effectivity.map(sig5).unwrap_or_default(),
                ),
                None => ("failed".to_string(), String::new(), String::new()),
            };
            writeln!(out, "| {} | {} | {} | {} | {est} | {re} | {eff} |", row.problem, row.dt, row.t_end, row.method)?;
        }
        Ok(())
    }

    pub fn to_markdown(&self) -> Result<String, ReportError> {
        let mut buf = Vec::new();
        self.write_markdown(&mut buf)?;
        Ok(String::from_utf8(buf).expect("markdown output is utf-8"))
    }
}

/// Five significant digits in `d.dddde-XX` form.
pub fn sci5(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.4e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Five significant digits, fixed-point for moderate magnitudes.
pub fn sig5(x: f64) -> String {
    let a = x.abs();
    if !x.is_finite() || a == 0.0 {
        return x.to_string();
    }
    if !(1e-3..1e5).contains(&a) {
        return sci5(x);
    }
    let decimals = (4 - a.log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes the table to `path`, or to stdout when `path` is `None`.
pub fn emit_report(table: &Table, format: Format, path: Option<&Path>) -> Result<(), ReportError> {
    if table.rows.is_empty() {
        return Err(ReportError::EmptyTable);
    }
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Csv => table.write_csv(sink),
        Format::Markdown => table.write_markdown(sink),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: AdjointPath, terms: &[(&str, f64)]) -> Row {
        Row {
            problem: "robertson".into(),
            dt: 1e-3,
            t_end: 10.0,
            method,
            outcome: Outcome::Ok(RowValues {
                estimate: -2.854565e-6 / 3.0,
                reference_error: Some(0.1 + 0.2),
                effectivity: Some(1.0 / 3.0),
                terms: terms.iter().map(|&(n, x)| (n.to_string(), x)).collect(),
            }),
            wall_ms: 12.5,
        }
    }

    #[test]
    fn one_row_is_two_lines() {
        let t = Table { rows: vec![row(AdjointPath::Dae, &[("residual_y", 1e-300)])] };
        let csv = t.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(
            csv.lines().next().unwrap(),
            "problem,dt,T,method,estimate,reference_error,effectivity,term:residual_y,wall_ms"
        );
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut failed = row(AdjointPath::Ode, &[]);
        failed.outcome = Outcome::Failed(String::new());
        let t = Table {
            rows: vec![
                row(AdjointPath::Dae, &[("initial_condition", 0.0), ("constraint_z", -f64::MIN_POSITIVE)]),
                row(AdjointPath::Ode, &[("initial_condition", 5e-324), ("residual_z", std::f64::consts::PI)]),
                failed,
            ],
        };
        let back = Table::from_csv(&t.to_csv().unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.term_names(), ["initial_condition", "constraint_z", "residual_z"]);
    }

    #[test]
    fn empty_table_is_an_error() {
        let t = Table::default();
        assert!(matches!(t.to_csv(), Err(ReportError::EmptyTable)));
        assert!(matches!(t.to_markdown(), Err(ReportError::EmptyTable)));
        assert!(matches!(emit_report(&t, Format::Csv, None), Err(ReportError::EmptyTable)));
    }

    #[test]
    fn markdown_style() {
        assert_eq!(sci5(-2.8545654e-6), "-2.8546e-06");
        assert_eq!(sci5(1.7153e-3), "1.7153e-03");
        assert_eq!(sci5(12345.6), "1.2346e+04");
        assert_eq!(sig5(0.998934), "0.99893");
        assert_eq!(sig5(1.00246), "1.0025");
        let md = Table { rows: vec![row(AdjointPath::Dae, &[])] }.to_markdown().unwrap();
        let header = md.lines().next().unwrap();
        assert!(header.contains("Error Estimate") && header.contains("E-Ratio"));
        assert!(md.lines().nth(2).unwrap().contains("| 0.33333 |"));
    }
}
