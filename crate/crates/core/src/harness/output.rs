//! CSV and JSON artifacts.
//!
//! Floats are written with 17 significant digits so every value parses back
//! to the same bits. Missing values are empty fields.

use super::HarnessError;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub const SWEEP_HEADER: [&str; 11] = [
    "p", "sigma", "scenario", "regime", "theory_F", "theory_G", "sim_F", "sim_F_se", "sim_G", "sim_G_se", "runs",
];

pub const ORDER_HEADER: [&str; 7] = [
    "p", "rank", "order", "forgetting", "generalization", "delta_vs_best", "i_star",
];

/// Regime marker of a sweep row; `skipped` rows fall in the near-square band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowRegime {
    Over,
    Under,
    Skipped,
}

impl RowRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowRegime::Over => "over",
            RowRegime::Under => "under",
            RowRegime::Skipped => "skipped",
        }
    }

    fn parse(s: &str) -> Result<Self, HarnessError> {
        match s {
            "over" => Ok(RowRegime::Over),
            "under" => Ok(RowRegime::Under),
            "skipped" => Ok(RowRegime::Skipped),
            other => Err(HarnessError::BadInput(format!("unknown regime '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: usize,
    pub sigma: f64,
    pub scenario: String,
    pub regime: RowRegime,
    pub theory_f: Option<f64>,
    pub theory_g: Option<f64>,
    pub sim_f: Option<f64>,
    pub sim_f_se: Option<f64>,
    pub sim_g: Option<f64>,
    pub sim_g_se: Option<f64>,
    pub runs: usize,
}

impl SweepRow {
    /// `|sim - theory| / se` for forgetting and generalization, where defined.
    pub fn z_scores(&self) -> (Option<f64>, Option<f64>) {
        let z = |sim: Option<f64>, se: Option<f64>, theory: Option<f64>| match (sim, se, theory) {
            (Some(s), Some(e), Some(t)) if e > 0.0 => Some((s - t).abs() / e),
            _ => None,
        };
        (
            z(self.sim_f, self.sim_f_se, self.theory_f),
            z(self.sim_g, self.sim_g_se, self.theory_g),
        )
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::Io(io.to_string()),
        other => HarnessError::BadInput(format!("csv: {other:?}")),
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            format_float(r.sigma),
            r.scenario.clone(),
            r.regime.as_str().to_string(),
            opt(r.theory_f),
            opt(r.theory_g),
            opt(r.sim_f),
            opt(r.sim_f_se),
            opt(r.sim_g),
            opt(r.sim_g_se),
            r.runs.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>, HarnessError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(HarnessError::BadInput(format!("unexpected sweep header {header:?}")));
    }
    let f = |s: &str| -> Result<Option<f64>, HarnessError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| HarnessError::BadInput(format!("bad float '{s}'")))
        }
    };
    let int = |s: &str| -> Result<usize, HarnessError> {
        s.parse().map_err(|_| HarnessError::BadInput(format!("bad integer '{s}'")))
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let rec = record.map_err(csv_err)?;
        rows.push(SweepRow {
            p: int(&rec[0])?,
            sigma: f(&rec[1])?.ok_or_else(|| HarnessError::BadInput("missing sigma".into()))?,
            scenario: rec[2].to_string(),
            regime: RowRegime::parse(&rec[3])?,
            theory_f: f(&rec[4])?,
            theory_g: f(&rec[5])?,
            sim_f: f(&rec[6])?,
            sim_f_se: f(&rec[7])?,
            sim_g: f(&rec[8])?,
            sim_g_se: f(&rec[9])?,
            runs: int(&rec[10])?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub kind: String,
    pub scenario: String,
    pub rows: usize,
    pub skipped: usize,
    pub runs: usize,
    pub master_seed: u64,
    pub max_z_forgetting: Option<f64>,
    pub max_z_generalization: Option<f64>,
}

impl SweepSummary {
    pub fn of(kind: &str, scenario: &str, rows: &[SweepRow], runs: usize, master_seed: u64) -> Self {
        let max = |v: Vec<Option<f64>>| v.into_iter().flatten().fold(None, |m: Option<f64>, z| Some(m.map_or(z, |m| m.max(z))));
        Self {
            kind: kind.to_string(),
            scenario: scenario.to_string(),
            rows: rows.len(),
            skipped: rows.iter().filter(|r| r.regime == RowRegime::Skipped).count(),
            runs,
            master_seed,
            max_z_forgetting: max(rows.iter().map(|r| r.z_scores().0).collect()),
            max_z_generalization: max(rows.iter().map(|r| r.z_scores().1).collect()),
        }
    }

    pub fn max_z(&self) -> Option<f64> {
        match (self.max_z_forgetting, self.max_z_generalization) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRow {
    pub p: usize,
    pub rank: usize,
    /// 1-based task labels.
    pub order: Vec<usize>,
    pub forgetting: f64,
    pub generalization: f64,
    pub delta_vs_best: f64,
    pub i_star: Option<usize>,
}

pub fn format_order(order: &[usize]) -> String {
    order.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_order_csv<W: Write>(rows: &[OrderRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ORDER_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            r.rank.to_string(),
            format_order(&r.order),
            format_float(r.forgetting),
            format_float(r.generalization),
            format_float(r.delta_vs_best),
            r.i_star.map(|k| k.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn read_order_csv<R: Read>(input: R) -> Result<Vec<OrderRow>, HarnessError> {
    let mut reader = csv::Reader::from_reader(input);
    let bad = |s: &str| HarnessError::BadInput(format!("bad field '{s}'"));
    let mut rows = Vec::new();
    for record in reader.records() {
        let rec = record.map_err(csv_err)?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(s));
        rows.push(OrderRow {
            p: int(&rec[0])?,
            rank: int(&rec[1])?,
            order: rec[2].split(',').map(int).collect::<Result<_, _>>()?,
            forgetting: num(&rec[3])?,
            generalization: num(&rec[4])?,
            delta_vs_best: num(&rec[5])?,
            i_star: if rec[6].is_empty() { None } else { Some(int(&rec[6])?) },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(p: usize, theory: Option<f64>, sim: Option<f64>) -> SweepRow {
        SweepRow {
            p,
            sigma: 0.1,
            scenario: "identical".into(),
            regime: if theory.is_some() { RowRegime::Over } else { RowRegime::Skipped },
            theory_f: theory,
            theory_g: theory.map(|t| t * 3.0),
            sim_f: sim,
            sim_f_se: sim.map(|_| 0.01),
            sim_g: sim.map(|s| 1.0 / s),
            sim_g_se: sim.map(|_| 1e-3),
            runs: if sim.is_some() { 300 } else { 0 },
        }
    }

    #[test]
    fn sweep_round_trip() {
        let rows = vec![
            row(60, Some(-0.1 / 3.0), Some(std::f64::consts::PI)),
            row(50, None, None),
            row(100, Some(1e-300), None),
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("p,sigma,scenario,regime,theory_F"));
        assert!(text.ends_with('\n'));
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn summary_z() {
        let rows = vec![row(60, Some(1.0), Some(1.02)), row(50, None, None)];
        let s = SweepSummary::of("sweep-p", "identical", &rows, 300, 1);
        assert_eq!(s.skipped, 1);
        assert!((s.max_z_forgetting.unwrap() - 2.0).abs() < 1e-9);
        assert!(s.max_z().unwrap() > 2.0);
    }

    #[test]
    fn order_round_trip() {
        let rows = vec![OrderRow {
            p: 100,
            rank: 1,
            order: vec![1, 3, 2, 4],
            forgetting: -0.2,
            generalization: 0.7,
            delta_vs_best: 0.0,
            i_star: Some(2),
        }];
        let mut buf = Vec::new();
        write_order_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("\"1,3,2,4\""));
        assert_eq!(read_order_csv(buf.as_slice()).unwrap(), rows);
    }
}
