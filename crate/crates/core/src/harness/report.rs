//! Cross-method comparison of finished runs and long-format α/weight CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{multimnist_tasks, Method};
use super::csvio::{read_csv, CsvOut};
use super::runner::{stats_fields, summarize, Stats, SUMMARY_HEADER};
use crate::error::{Error, Result};

/// One line of the comparison table; accuracies in percent.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub task: String,
    pub method: Method,
    pub dev: Option<Stats>,
    pub test: Option<Stats>,
    pub failed: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportOutput {
    pub rows: Vec<TableRow>,
    /// `method/task` cells with no run, plus run directories lacking a summary.
    pub missing: Vec<String>,
    pub alpha_files: Vec<PathBuf>,
    pub text: String,
}

#[derive(Default)]
struct Cell {
    dev: Vec<f64>,
    test: Vec<f64>,
    failed: Vec<u64>,
}

/// Reads every run under `run_dir`, writes `report.csv` and `report.txt`
/// there, and a `seed-<s>/alphas.csv` for each αVIL seed.
pub fn report(run_dir: &Path) -> Result<ReportOutput> {
    let mut runs: Vec<PathBuf> = match fs::read_dir(run_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(Error::io(run_dir, e)),
    };
    runs.sort();

    let mut cells: BTreeMap<(String, Method), Cell> = BTreeMap::new();
    let mut missing = Vec::new();
    let mut alpha_files = Vec::new();
    let mut found = 0;
    for run in &runs {
        let summary = run.join("summary.csv");
        if !summary.is_file() {
            missing.push(format!("{} (no summary.csv)", run.display()));
            continue;
        }
        found += 1;
        let (header, rows) = read_csv(&summary)?;
        if header != SUMMARY_HEADER {
            return Err(Error::Format {
                path: summary,
                offset: 0,
                reason: "unexpected summary header".into(),
            });
        }
        let mut avil = false;
        for r in &rows {
            let bad = |reason: &str| Error::Format {
                path: summary.clone(),
                offset: 0,
                reason: format!("{reason} in row {r:?}"),
            };
            let method: Method = r[0].parse()?;
            avil |= method == Method::Avil;
            let seed: u64 = r[2].parse().map_err(|_| bad("bad seed"))?;
            if r[3] == "failed" {
                // a failed seed counts against every task the run reports
                let tasks: Vec<String> = if method == Method::Multitask {
                    multimnist_tasks().iter().map(|t| t.id.to_string()).collect()
                } else {
                    vec![r[1].clone()]
                };
                for t in tasks {
                    cells.entry((t, method)).or_default().failed.push(seed);
                }
                continue;
            }
            let dev: f64 = r[6].parse().map_err(|_| bad("bad dev accuracy"))?;
            let test: f64 = r[7].parse().map_err(|_| bad("bad test accuracy"))?;
            let cell = cells.entry((r[4].clone(), method)).or_default();
            cell.dev.push(dev);
            cell.test.push(test);
        }
        if avil {
            alpha_files.extend(write_alpha_files(run)?);
        }
    }
    if found == 0 {
        return Err(Error::NoRuns(run_dir.to_path_buf()));
    }

    let mut tasks: Vec<String> = multimnist_tasks().iter().map(|t| t.id.to_string()).collect();
    for (t, _) in cells.keys() {
        if !tasks.contains(t) {
            tasks.push(t.clone());
        }
    }
    tasks.retain(|t| cells.keys().any(|(k, _)| k == t));
    let mut rows = Vec::new();
    for task in &tasks {
        for method in Method::ALL {
            match cells.get(&(task.clone(), method)) {
                Some(c) => rows.push(TableRow {
                    task: task.clone(),
                    method,
                    dev: summarize(&c.dev),
                    test: summarize(&c.test),
                    failed: c.failed.clone(),
                }),
                None => missing.push(format!("{method}/{task}")),
            }
        }
    }

    write_table_csv(&run_dir.join("report.csv"), &rows)?;
    let text = render_text(&rows, &missing);
    let txt = run_dir.join("report.txt");
    fs::write(&txt, &text).map_err(|e| Error::io(&txt, e))?;
    Ok(ReportOutput {
        rows,
        missing,
        alpha_files,
        text,
    })
}

fn write_table_csv(path: &Path, rows: &[TableRow]) -> Result<()> {
    let mut out = CsvOut::create(path)?;
    out.row(&[
        "task",
        "method",
        "seeds",
        "dev_min",
        "dev_max",
        "dev_mean",
        "dev_std_population",
        "test_min",
        "test_max",
        "test_mean",
        "test_std_population",
        "failed_seeds",
        "unit",
    ])?;
    for r in rows {
        let failed: Vec<String> = r.failed.iter().map(u64::to_string).collect();
        let mut rec = vec![r.task.clone(), r.method.to_string(), r.dev.map_or(0, |s| s.n).to_string()];
        rec.extend(stats_fields(r.dev));
        rec.extend(stats_fields(r.test));
        rec.push(failed.join(";"));
        rec.push("percent".into());
        out.row(&rec)?;
    }
    out.finish()
}

fn render_text(rows: &[TableRow], missing: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "accuracy in percent; std is the population standard deviation over seeds");
    let _ = writeln!(
        s,
        "{:<6} {:<11} {:>5} | {:>7} {:>7} {:>7} {:>6} | {:>7} {:>7} {:>7} {:>6}",
        "task", "method", "seeds", "dev min", "max", "mean", "std", "test min", "max", "mean", "std"
    );
    let cols = |st: Option<Stats>| match st {
        Some(x) => format!("{:>7.2} {:>7.2} {:>7.2} {:>6.2}", x.min, x.max, x.mean, x.std),
        None => format!("{:>7} {:>7} {:>7} {:>6}", "-", "-", "-", "-"),
    };
    for r in rows {
        let _ = write!(
            s,
            "{:<6} {:<11} {:>5} | {} | {}",
            r.task,
            r.method.name(),
            r.dev.map_or(0, |x| x.n),
            cols(r.dev),
            cols(r.test)
        );
        if !r.failed.is_empty() {
            let _ = write!(s, "  failed seeds: {:?}", r.failed);
        }
        s.push('\n');
    }
    if !missing.is_empty() {
        let _ = writeln!(s, "missing: {}", missing.join(", "));
    }
    s
}

/// Turns each seed's wide `epochs.csv` into `alphas.csv` with one
/// `(epoch, task, alpha, weight)` row per task and epoch.
fn write_alpha_files(run: &Path) -> Result<Vec<PathBuf>> {
    let mut seed_dirs: Vec<PathBuf> = fs::read_dir(run)
        .map_err(|e| Error::io(run, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("epochs.csv").is_file())
        .collect();
    seed_dirs.sort();
    let mut written = Vec::new();
    for dir in seed_dirs {
        let src = dir.join("epochs.csv");
        let (header, rows) = read_csv(&src)?;
        let tasks: Vec<(String, usize, usize)> = header
            .iter()
            .enumerate()
            .filter_map(|(i, h)| {
                let task = h.strip_prefix("alpha_")?;
                let w = header.iter().position(|x| *x == format!("weight_{task}"))?;
                Some((task.to_string(), i, w))
            })
            .collect();
        if tasks.is_empty() {
            return Err(Error::Format {
                path: src,
                offset: 0,
                reason: "no alpha columns".into(),
            });
        }
        let path = dir.join("alphas.csv");
        let mut out = CsvOut::create(&path)?;
        out.row(&["epoch", "task", "alpha", "weight"])?;
        for r in &rows {
            for (task, a, w) in &tasks {
                out.row(&[r[0].as_str(), task, r[*a].as_str(), r[*w].as_str()])?;
            }
        }
        out.finish()?;
        written.push(path);
    }
    Ok(written)
}
