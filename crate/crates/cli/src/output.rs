//! JSON and CSV artifacts. Every float is written with 17 significant digits
//! so that re-reading reproduces it bit for bit.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use szilard_core::engine::{Certification, CycleResult, FeatureReport, ScanReport};
use szilard_core::qop::DensityMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

pub type ComplexMatrix = Vec<Vec<[f64; 2]>>;

pub fn complex_matrix(rho: &DensityMatrix) -> ComplexMatrix {
    let op = rho.as_operator();
    (0..op.dim())
        .map(|i| {
            (0..op.dim())
                .map(|j| {
                    let z = op.entry(i, j);
                    [z.re, z.im]
                })
                .collect()
        })
        .collect()
}

/// Everything emitted for one sweep point.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub name: String,
    pub sweep_parameter: Option<String>,
    pub sweep_value: Option<f64>,
    pub conforming: bool,
    pub certification: Certification,
    pub cycle: Option<CycleResult>,
    pub features: Option<FeatureReport>,
    pub rho_s_after: Option<ComplexMatrix>,
    pub rho_d_after: Option<ComplexMatrix>,
    pub weight_spectrum: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlotRow {
    pub sweep_value: Option<f64>,
    pub outcome: String,
    pub work: f64,
    pub entropy_change: f64,
}

pub fn plot_rows(records: &[RunRecord]) -> Vec<PlotRow> {
    records
        .iter()
        .filter_map(|r| r.cycle.as_ref().map(|c| (r, c)))
        .flat_map(|(r, c)| {
            c.branches.iter().map(move |b| PlotRow {
                sweep_value: r.sweep_value,
                outcome: b.label.clone(),
                work: b.work,
                entropy_change: b.entropy_change,
            })
        })
        .collect()
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn write_value<W: Write>(out: &mut W, v: &Value, indent: usize) -> std::io::Result<()> {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => write!(out, "null"),
        Value::Bool(b) => write!(out, "{b}"),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) if !n.is_f64() => write!(out, "{u}"),
            (_, Some(i), _) if !n.is_f64() => write!(out, "{i}"),
            (_, _, Some(f)) => write!(out, "{}", fmt_f64(f)),
            _ => write!(out, "{n}"),
        },
        Value::String(s) => write!(out, "{}", serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) => {
            if items.is_empty() {
                return write!(out, "[]");
            }
            let flat = items.iter().all(|i| !i.is_array() && !i.is_object());
            if flat {
                write!(out, "[")?;
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        write!(out, ", ")?;
                    }
                    write_value(out, item, indent)?;
                }
                return write!(out, "]");
            }
            writeln!(out, "[")?;
            for (k, item) in items.iter().enumerate() {
                write!(out, "{}", pad(indent + 1))?;
                write_value(out, item, indent + 1)?;
                writeln!(out, "{}", if k + 1 < items.len() { "," } else { "" })?;
            }
            write!(out, "{}]", pad(indent))
        }
        Value::Object(map) => {
            if map.is_empty() {
                return write!(out, "{{}}");
            }
            writeln!(out, "{{")?;
            for (k, (key, item)) in map.iter().enumerate() {
                write!(out, "{}{}: ", pad(indent + 1), serde_json::to_string(key).expect("keys serialize"))?;
                write_value(out, item, indent + 1)?;
                writeln!(out, "{}", if k + 1 < map.len() { "," } else { "" })?;
            }
            write!(out, "{}}}", pad(indent))
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(out: &mut W, data: &T) -> std::io::Result<()> {
    let value = serde_json::to_value(data).map_err(std::io::Error::other)?;
    write_value(out, &value, 0)?;
    writeln!(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub const RUN_CSV_HEADER: [&str; 17] = [
    "outcome",
    "probability",
    "work",
    "entropy_change",
    "scenario",
    "sweep_parameter",
    "sweep_value",
    "f1_repeatable",
    "f2_entropy_invariant",
    "f3_positive_work",
    "w_coarse",
    "w_avg",
    "heat",
    "w_erasure",
    "w_net_coarse",
    "w_net_avg",
    "error",
];

/// One row per branch; a failed point gets a single row carrying the error.
pub fn write_run_csv<W: Write>(out: W, records: &[RunRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_CSV_HEADER)?;
    for r in records {
        let feats = r.features.as_ref().map(|f| f.triple());
        let flag = |k: usize| feats.map(|t| [t.0, t.1, t.2][k].to_string()).unwrap_or_default();
        let shared = |w: &mut csv::Writer<W>, lead: [String; 4]| -> csv::Result<()> {
            let l = r.cycle.as_ref().map(|c| &c.ledger);
            let mut row: Vec<String> = lead.into();
            row.extend([
                r.name.clone(),
                r.sweep_parameter.clone().unwrap_or_default(),
                opt(r.sweep_value),
                flag(0),
                flag(1),
                flag(2),
                opt(l.map(|l| l.w_coarse)),
                opt(l.map(|l| l.w_avg)),
                opt(l.map(|l| l.heat)),
                opt(l.map(|l| l.w_erasure)),
                opt(l.map(|l| l.w_net_coarse)),
                opt(l.map(|l| l.w_net_avg)),
                r.error.clone().unwrap_or_default(),
            ]);
            w.write_record(&row)
        };
        match &r.cycle {
            Some(c) => {
                for b in &c.branches {
                    let lead = [b.label.clone(), fmt_f64(b.probability), fmt_f64(b.work), fmt_f64(b.entropy_change)];
                    shared(&mut w, lead)?;
                }
            }
            None => shared(&mut w, Default::default())?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_plot_csv<W: Write>(out: W, rows: &[PlotRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep_value", "outcome", "work", "entropy_change"])?;
    for r in rows {
        w.write_record([opt(r.sweep_value), r.outcome.clone(), fmt_f64(r.work), fmt_f64(r.entropy_change)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scan_csv<W: Write>(out: W, report: &ScanReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "family",
        "f1_repeatable",
        "f2_entropy_invariant",
        "f3_positive_work",
        "min_work",
        "ground_outcome_work",
        "repeatable",
        "observable_commutator",
        "order_defect",
        "error",
    ])?;
    for r in &report.records {
        let flag = |k: usize| r.triple.map(|t| [t.0, t.1, t.2][k].to_string()).unwrap_or_default();
        w.write_record([
            r.index.to_string(),
            r.family.to_string(),
            flag(0),
            flag(1),
            flag(2),
            fmt_f64(r.min_work),
            fmt_f64(r.ground_outcome_work),
            r.repeatable.to_string(),
            fmt_f64(r.observable_commutator),
            opt(r.order_defect),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table for the terminal.
pub fn summary_table(records: &[RunRecord]) -> String {
    let mut s = format!(
        "{:<28} {:>14} {:>5} {:>5} {:>5} {:>14} {:>14}\n",
        "scenario", "sweep", "F1", "F2", "F3", "W_avg", "W_net_coarse"
    );
    for r in records {
        let sweep = r.sweep_value.map(|v| format!("{v}")).unwrap_or_else(|| "-".into());
        match (&r.cycle, &r.features) {
            (Some(c), Some(f)) => {
                let (a, b, d) = f.triple();
                s += &format!(
                    "{:<28} {:>14} {:>5} {:>5} {:>5} {:>14.6e} {:>14.6e}\n",
                    r.name, sweep, a, b, d, c.ledger.w_avg, c.ledger.w_net_coarse
                );
            }
            _ => {
                s += &format!("{:<28} {:>14} error: {}\n", r.name, sweep, r.error.as_deref().unwrap_or("?"));
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        for x in [std::f64::consts::PI, 1e-300, 0.3, -7.5e12] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn json_numbers_round_trip() {
        let data = serde_json::json!({"a": [0.1, 2, -3.5e-7], "b": {"c": 1e300, "d": null}, "e": "x"});
        let mut buf = Vec::new();
        write_json(&mut buf, &data).unwrap();
        let back: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, data);
    }
}
