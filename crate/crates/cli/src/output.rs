//! CSV artifacts. Numbers are written with 17 significant digits so they
//! parse back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use burgers_pinn::metrics::FieldDump;
use burgers_pinn::optim::TraceRow;
use burgers_pinn::sample::RarRound;
use burgers_pinn::ErrorReport;

use crate::error::{CliError, CliResult};

/// Round-trip formatting of a float.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Accumulates a CSV table in memory.
#[derive(Debug, Clone)]
pub struct Table {
    text: String,
    columns: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Table {
            text,
            columns: header.len(),
        }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut n = 0;
        for (k, cell) in cells.into_iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            self.text.push_str(cell.as_ref());
            n += 1;
        }
        debug_assert_eq!(n, self.columns, "row width");
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_file(path, &self.text)
    }
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// One training stage's trace, labelled with the stage name (`initial`, `rar1`, ...).
pub fn loss_trace<'a>(stages: impl IntoIterator<Item = (&'a str, &'a [TraceRow])>) -> Table {
    let mut t = Table::new(&[
        "stage",
        "phase",
        "iteration",
        "residual_term",
        "boundary_term",
        "initial_term",
        "total",
    ]);
    for (stage, rows) in stages {
        for r in rows {
            t.row([
                stage.to_string(),
                r.phase.name().to_string(),
                r.iteration.to_string(),
                num(r.loss.residual_term),
                num(r.loss.boundary_term),
                num(r.loss.initial_term),
                num(r.loss.total),
            ]);
        }
    }
    t
}

/// Error table: `t,h1_error,residual` per slice for time-dependent reports,
/// a single row of all norms otherwise.
pub fn errors(report: &ErrorReport) -> Table {
    if report.rows.is_empty() {
        let mut t = Table::new(&["l2_error", "h1_seminorm_error", "h1_error", "residual"]);
        t.row([
            num(report.l2_error),
            num(report.h1_seminorm_error),
            num(report.h1_error),
            num(report.residual_l2),
        ]);
        return t;
    }
    let mut t = Table::new(&["t", "h1_error", "residual"]);
    for r in &report.rows {
        t.row([num(r.t), num(r.h1_error), num(r.residual_l2)]);
    }
    t
}

pub fn field(dump: &FieldDump) -> Table {
    let dim = dump.rows.first().map_or(2, |r| r.x.len());
    let names: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.extend(["u_exact", "u_pred", "abs_error"]);
    let mut t = Table::new(&header);
    for r in &dump.rows {
        let mut cells: Vec<String> = r.x.iter().map(|&v| num(v)).collect();
        cells.extend([num(r.u_exact), num(r.u_pred), num(r.abs_error)]);
        t.row(cells);
    }
    t
}

/// `field_t<t>.csv` for a slice, `field.csv` for a stationary dump.
pub fn field_file_name(t: Option<f64>) -> String {
    match t {
        Some(t) => format!("field_t{t}.csv"),
        None => "field.csv".into(),
    }
}

pub fn rar_trace(rounds: &[RarRound]) -> Table {
    let mut t = Table::new(&["round", "interior_size", "mean_residual"]);
    for r in rounds {
        t.row([r.round.to_string(), r.interior_size.to_string(), num(r.mean_residual)]);
    }
    t
}

/// Human-readable summary printed at the end of a run.
pub fn summary(report: &ErrorReport) -> String {
    let mut s = String::new();
    for r in &report.rows {
        let _ = writeln!(s, "t={:<6} h1_error={:.4e} residual={:.4e}", r.t, r.h1_error, r.residual_l2);
    }
    let _ = write!(
        s,
        "l2_error={:.4e} h1_error={:.4e} residual={:.4e}",
        report.l2_error, report.h1_error, report.residual_l2
    );
    if let Some(b) = report.boundary_surrogate {
        let _ = write!(s, " boundary_surrogate={b:.4e}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use burgers_pinn::metrics::FieldRow;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn field_table_layout() {
        let dump = FieldDump {
            t: Some(0.5),
            rows: vec![FieldRow {
                x: vec![0.25, 0.75],
                u_exact: 1.0,
                u_pred: 0.5,
                abs_error: 0.5,
            }],
        };
        let t = field(&dump);
        let mut lines = t.as_str().lines();
        assert_eq!(lines.next(), Some("x1,x2,u_exact,u_pred,abs_error"));
        assert_eq!(lines.next().unwrap().split(',').count(), 5);
        assert_eq!(field_file_name(Some(0.5)), "field_t0.5.csv");
        assert_eq!(field_file_name(Some(1.0)), "field_t1.csv");
        assert!(!t.as_str().contains('\r'));
    }
}
