use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use szilard_core::engine::{evaluate_features, impossibility_scan, run_cycle, ScanFamily, ScanReport};

use crate::error::{exit, CliError, CliResult};
use crate::output::{
    complex_matrix, plot_rows, write_json, write_plot_csv, write_run_csv, write_scan_csv, Format, RunRecord,
};
use crate::scenario::SweepPoint;

const INCONSISTENCY_PREFIX: &str = "internal inconsistency";

fn run_point(point: &SweepPoint) -> RunRecord {
    let config = &point.config;
    let mut record = RunRecord {
        name: config.name.clone(),
        sweep_parameter: point.parameter.clone(),
        sweep_value: point.value,
        conforming: config.is_conforming(),
        certification: config.certification().clone(),
        cycle: None,
        features: None,
        rho_s_after: None,
        rho_d_after: None,
        weight_spectrum: None,
        error: None,
    };
    match run_cycle(config) {
        Ok(cycle) => {
            match evaluate_features(&cycle, config) {
                Ok(f) => record.features = Some(f),
                Err(e) => record.error = Some(e.to_string()),
            }
            record.rho_s_after = Some(complex_matrix(&cycle.rho_s_after));
            record.rho_d_after = Some(complex_matrix(&cycle.rho_d_after));
            record.weight_spectrum = Some(cycle.rho_w_after.spectrum());
            record.cycle = Some(cycle);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

fn status(errors: impl Iterator<Item = Option<String>>) -> i32 {
    errors.flatten().fold(exit::OK, |code, e| {
        if e.starts_with(INCONSISTENCY_PREFIX) {
            exit::ASSERTION
        } else if code == exit::OK {
            exit::RUN
        } else {
            code
        }
    })
}

fn open_out(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match out {
        Some(p) => {
            let f = File::create(p).map_err(|source| CliError::Io { path: p.to_path_buf(), source })?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn io_err(out: Option<&Path>, e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> CliError {
    CliError::Io {
        path: out.map(Path::to_path_buf).unwrap_or_else(|| "<stdout>".into()),
        source: std::io::Error::other(e),
    }
}

/// Runs every sweep point (in parallel, emitted in order) and writes the
/// artifact to `out` or stdout. Returns the records and the exit status:
/// nonzero when a hard assertion fired or a run failed.
pub fn run_command(
    points: &[SweepPoint],
    format: Format,
    out: Option<&Path>,
    plot: bool,
) -> CliResult<(Vec<RunRecord>, i32)> {
    let records: Vec<RunRecord> = points.par_iter().map(run_point).collect();
    let mut w = open_out(out)?;
    let written = match (format, plot) {
        (Format::Json, false) => write_json(&mut w, &records).map_err(|e| io_err(out, e)),
        (Format::Json, true) => write_json(&mut w, &plot_rows(&records)).map_err(|e| io_err(out, e)),
        (Format::Csv, false) => write_run_csv(&mut w, &records).map_err(|e| io_err(out, e)),
        (Format::Csv, true) => write_plot_csv(&mut w, &plot_rows(&records)).map_err(|e| io_err(out, e)),
    };
    written?;
    w.flush().map_err(|e| io_err(out, e))?;
    let code = status(records.iter().map(|r| r.error.clone()));
    Ok((records, code))
}

/// Runs the exclusion scan; a three-feature instance or an inconsistency is
/// an assertion failure.
pub fn scan_command(
    family: ScanFamily,
    count: usize,
    seed: u64,
    format: Format,
    out: Option<&Path>,
) -> CliResult<(ScanReport, i32)> {
    let report = impossibility_scan(family, count, seed);
    let mut w = open_out(out)?;
    match format {
        Format::Json => write_json(&mut w, &report).map_err(|e| io_err(out, e))?,
        Format::Csv => write_scan_csv(&mut w, &report).map_err(|e| io_err(out, e))?,
    }
    w.flush().map_err(|e| io_err(out, e))?;
    let mut code = status(report.records.iter().map(|r| r.error.clone()));
    if report.all_three > 0 {
        code = exit::ASSERTION;
    }
    Ok((report, code))
}

pub fn scan_summary(report: &ScanReport) -> String {
    let [m1, m2, m3] = report.pattern_counts;
    format!(
        "scan family={} count={} seed={}: all-three={} errors={} two-feature patterns (missing F1/F2/F3) = {m1}/{m2}/{m3}\n",
        report.family, report.count, report.seed, report.all_three, report.errors
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inconsistency_outranks_run_errors() {
        let e = |s: &str| Some(s.to_string());
        assert_eq!(status([None, None].into_iter()), exit::OK);
        assert_eq!(status([None, e("bad weight")].into_iter()), exit::RUN);
        let mixed = [e("bad weight"), e("internal inconsistency: chain broken"), e("other")];
        assert_eq!(status(mixed.into_iter()), exit::ASSERTION);
    }
}
