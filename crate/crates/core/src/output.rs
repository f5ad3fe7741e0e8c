//! File outputs of a run: `levels.csv`, one `solution_t<idx>.csv` per level,
//! and `report.json`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::driver::{LevelRecord, RunReport, Termination};
use crate::mol::ProblemDef;

pub const LEVELS_FILE: &str = "levels.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats { csv: true, json: true }
    }
}

impl std::str::FromStr for Formats {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut f = Formats { csv: false, json: false };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "csv" => f.csv = true,
                "json" => f.json = true,
                other => return Err(format!("unknown format '{other}' (expected csv or json)")),
            }
        }
        if !f.csv && !f.json {
            return Err("no output format given".into());
        }
        Ok(f)
    }
}

/// Eight significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:.7e}")
}

pub fn solution_file_name(level: usize) -> String {
    format!("solution_t{level}.csv")
}

pub fn write_levels_csv(report: &RunReport, path: &Path) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "n_fin", "refine_iters", "rmse", "cond", "cpu_seconds"])?;
    for rec in &report.levels {
        w.write_record([
            sci(rec.t),
            rec.n_fin.to_string(),
            rec.refine_iters.to_string(),
            rec.rmse.map(sci).unwrap_or_default(),
            sci(rec.cond),
            sci(rec.cpu_seconds),
        ])?;
    }
    w.flush()
}

/// Writes one solution file per level. The exact column is present only when
/// the problem has a closed-form solution.
pub fn write_solution_csvs(report: &RunReport, problem: &ProblemDef, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(report.levels.len());
    for rec in &report.levels {
        let path = dir.join(solution_file_name(rec.level));
        let mut w = csv::Writer::from_path(&path)?;
        match &problem.exact {
            Some(_) => w.write_record(["x", "u_hat", "u_exact"])?,
            None => w.write_record(["x", "u_hat"])?,
        }
        for (&x, &u) in rec.points.iter().zip(&rec.values) {
            match &problem.exact {
                Some(exact) => w.write_record([sci(x), sci(u), sci(exact(x, rec.t))])?,
                None => w.write_record([sci(x), sci(u)])?,
            }
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn write_report_json(report: &RunReport, path: &Path) -> io::Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    fs::write(path, text)
}

pub fn read_report_json(path: &Path) -> io::Result<RunReport> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Writes every requested output into `dir`, creating it if needed.
pub fn write_all(report: &RunReport, problem: &ProblemDef, dir: &Path, formats: Formats) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    if formats.csv {
        write_levels_csv(report, &dir.join(LEVELS_FILE))?;
        write_solution_csvs(report, problem, dir)?;
    }
    if formats.json {
        write_report_json(report, &dir.join(REPORT_FILE))?;
    }
    Ok(())
}

/// Levels whose time matches one of `times`; every level when none match.
fn summary_rows<'r>(report: &'r RunReport, times: &[f64]) -> Vec<&'r LevelRecord> {
    let rows: Vec<_> = times
        .iter()
        .filter_map(|&t| report.level_near(t).filter(|r| (r.t - t).abs() <= 1e-9 * t.abs().max(1.0)))
        .collect();
    if rows.is_empty() {
        report.levels.iter().collect()
    } else {
        rows
    }
}

/// Table of the levels at `times`, falling back to all levels.
pub fn summary_table(report: &RunReport, times: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}  tau={:e}  eps0={}  nu={:e}",
        report.problem, report.config.refine.tau, report.config.eps0, report.nu
    );
    let _ = writeln!(
        out,
        "{:>8} {:>6} {:>6} {:>12} {:>12} {:>10}",
        "t", "N_fin", "iters", "RMSE", "cond", "CPU (s)"
    );
    for rec in summary_rows(report, times) {
        let rmse = rec.rmse.map(|r| format!("{r:.2e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:>8.4} {:>6} {:>6} {:>12} {:>12.2e} {:>10.3}",
            rec.t, rec.n_fin, rec.refine_iters, rmse, rec.cond, rec.cpu_seconds
        );
    }
    if let Termination::Failed { message, .. } = &report.termination {
        let _ = writeln!(out, "run stopped: {message}");
    }
    out
}
