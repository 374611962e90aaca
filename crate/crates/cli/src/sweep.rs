//! Method × level sweeps with rates against the uniform baselines.

use crate::config::{RunConfig, SweepConfig};
use crate::runner::{ensure_writable, solve, standalone_row};
use adaptive_fv::cases;
use adaptive_fv::io::write_atomic;
use adaptive_fv::metrics::{self, convergence_rate, CsvRow, Method, RunReport};
use adaptive_fv::scheme::SchemeConfig;
use adaptive_fv::unigrid::UniformGrid;
use adaptive_fv::{Result, SolverError};
use std::fmt::Write as _;
use std::path::PathBuf;

pub struct Entry {
    pub cfg: RunConfig,
    pub result: Result<RunReport>,
}

pub struct SweepOutcome {
    pub entries: Vec<Entry>,
    pub table: String,
    pub files: Vec<PathBuf>,
}

impl SweepOutcome {
    pub fn first_error(&self) -> Option<&SolverError> {
        self.entries.iter().find_map(|e| e.result.as_ref().err())
    }
}

/// Rates of `a` against its baseline `fv`. Without errors the
/// perturbation stays empty while the other four are still computed.
fn row_with_rates(a: &RunReport, fv: &RunReport) -> Result<CsvRow> {
    if a.l1.is_some() && fv.l1.is_some() {
        return Ok(CsvRow::new(a, Some(&metrics::rates(a, fv)?)));
    }
    let mut row = standalone_row(a)?;
    if fv.wall_s > 0.0 {
        row.cpu_compression = Some(a.wall_s / fv.wall_s);
        row.overhead = Some(metrics::overhead(a.wall_s, a.sum_leaves(), fv.wall_s, (fv.n_steps * fv.n_cells) as f64)?);
    }
    Ok(row)
}

fn run_all(runs: &[RunConfig], refs: &[(SchemeConfig, UniformGrid)], parallel: bool) -> Vec<Result<RunReport>> {
    let one = |cfg: &RunConfig| {
        let reference = refs.iter().find(|(s, _)| *s == cfg.scheme).map(|(_, g)| g);
        solve(cfg, reference, None)
            .map(|o| o.report)
            .map_err(|e| e.at(|| format!("{} L={}", cfg.method.tag(), cfg.level)))
    };
    if !parallel {
        return runs.iter().map(one).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = runs.iter().map(|cfg| s.spawn(move || one(cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    })
}

fn pct(x: Option<f64>) -> String {
    x.map(|v| format!("{:.1}", 100.0 * v)).unwrap_or_default()
}

fn sci(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4e}")).unwrap_or_default()
}

pub fn sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    ensure_writable(&cfg.out)?;
    let mut refs = Vec::new();
    if let Some(r) = cfg.reference_level {
        for run in &cfg.runs {
            if !refs.iter().any(|(s, _)| *s == run.scheme) {
                refs.push((run.scheme, cases::reference(&cfg.case, r, &run.scheme, &cases::cache_dir())?));
            }
        }
    }
    let results = run_all(&cfg.runs, &refs, cfg.parallel);
    let entries: Vec<Entry> =
        cfg.runs.iter().cloned().zip(results).map(|(cfg, result)| Entry { cfg, result }).collect();

    let mixed = entries.iter().any(|e| e.cfg.scheme != entries[0].cfg.scheme);
    let label = |e: &Entry| {
        if mixed && e.cfg.method == Method::Fv {
            format!("FV[{}]", e.cfg.scheme.name())
        } else {
            e.cfg.method.tag().to_string()
        }
    };
    let baseline = |e: &Entry| {
        entries
            .iter()
            .find(|b| b.cfg.method == Method::Fv && b.cfg.level == e.cfg.level && b.cfg.scheme == e.cfg.scheme)
    };

    let mut rows = Vec::new();
    let mut table = String::new();
    writeln!(
        table,
        "{:<18} {:>2} {:>11} {:>6} {:>7} {:>12} {:>6} {:>12} {:>6} {:>9} {:>6} {:>7}",
        "method", "L", "L1(rho)", "Rate", "Pert.%", "sum C", "%", "sum L", "%", "CPU s", "%", "ovh.%"
    )
    .unwrap();
    for e in &entries {
        let name = label(e);
        let report = match &e.result {
            Ok(r) => r,
            Err(err) => {
                writeln!(table, "{name:<18} {:>2} FAILED: {err}", e.cfg.level).unwrap();
                continue;
            }
        };
        let row = match (e.cfg.method, baseline(e).map(|b| &b.result)) {
            (Method::Fv, _) => standalone_row(report),
            (_, Some(Ok(fv))) => row_with_rates(report, fv),
            _ => standalone_row(report),
        };
        let row = match row {
            Ok(r) => r,
            Err(err) => {
                writeln!(table, "{name:<18} {:>2} FAILED: {err}", e.cfg.level).unwrap();
                continue;
            }
        };
        // observed order against the next coarser tested level
        let prev = entries.iter().rev().find(|p| {
            p.cfg.method == e.cfg.method && p.cfg.scheme == e.cfg.scheme && p.cfg.level < e.cfg.level
        });
        let rate = match (prev.and_then(|p| p.result.as_ref().ok()).and_then(|p| p.l1_rho().map(|x| (x, p.level))), report.l1_rho()) {
            (Some((ep, lp)), Some(ec)) => Some(convergence_rate(ep, ec) / (e.cfg.level - lp) as f64),
            _ => None,
        };
        writeln!(
            table,
            "{name:<18} {:>2} {:>11} {:>6} {:>7} {:>12.0} {:>6} {:>12.0} {:>6} {:>9.3} {:>6} {:>7}",
            e.cfg.level,
            sci(row.l1_rho),
            rate.map(|r| format!("{r:.3}")).unwrap_or_default(),
            if e.cfg.method == Method::Fv { String::new() } else { pct(row.perturbation) },
            row.sum_cells,
            pct(row.memory_compression),
            row.sum_leaves,
            pct(row.mesh_compression),
            row.wall_s,
            pct(row.cpu_compression),
            pct(row.overhead),
        )
        .unwrap();
        rows.push((e.cfg.scheme, row));
    }
    if cfg.parallel {
        table.push_str("note: entries ran concurrently; CPU columns are not comparable\n");
    }

    let mut files = Vec::new();
    let mut schemes: Vec<SchemeConfig> = Vec::new();
    for (s, _) in &rows {
        if !schemes.contains(s) {
            schemes.push(*s);
        }
    }
    for s in schemes {
        let these: Vec<CsvRow> = rows.iter().filter(|(x, _)| *x == s).map(|(_, r)| r.clone()).collect();
        let mut buf = Vec::new();
        metrics::write_csv(&mut buf, &these)?;
        let p = cfg.out.join(format!("sweep_{}_{}.csv", cfg.case.name, s.name()));
        write_atomic(&p, &buf)?;
        files.push(p);
    }
    let p = cfg.out.join(format!("sweep_{}_table.txt", cfg.case.name));
    write_atomic(&p, table.as_bytes())?;
    files.push(p);
    Ok(SweepOutcome { entries, table, files })
}
