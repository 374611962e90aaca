//! Executes one configured run and writes its artifacts.

use crate::config::RunConfig;
use adaptive_fv::amr::{encode_hierarchy, run_amr_observed, AmrParams};
use adaptive_fv::cases;
use adaptive_fv::io::{format_sidecar, write_atomic, write_grid};
use adaptive_fv::metrics::{self, l1_error_amr, l1_error_mr, l1_uniform, CsvRow, Method, RunReport};
use adaptive_fv::mr::{run_mr_observed, MrOptions};
use adaptive_fv::unigrid::{restrict_to_level, run_uniform, UniformGrid};
use adaptive_fv::{Result, SolverError};
use std::path::{Path, PathBuf};

/// Result of one run: its report, the solution on the uniform mesh of the
/// run level, and the files written.
pub struct Outcome {
    pub report: RunReport,
    pub grid: UniformGrid,
    /// File extension and bytes of the method's own data structure, if it
    /// has one beyond the uniform grid.
    pub native: Option<(&'static str, Vec<u8>)>,
    pub artifacts: Vec<PathBuf>,
}

/// Writes a mesh outline whenever the step counter crosses a multiple of
/// `every`. Adaptive runs report several fine steps at once.
struct Dumper<'a> {
    dir: &'a Path,
    stem: String,
    every: usize,
    last: usize,
    written: Vec<PathBuf>,
}

impl Dumper<'_> {
    fn path(&self, step: usize) -> PathBuf {
        self.dir.join(format!("{}_mesh_{step:06}.txt", self.stem))
    }

    fn maybe(&mut self, step: usize, text: impl FnOnce() -> String) -> Result<()> {
        if self.every > 0 && step / self.every > self.last / self.every {
            let p = self.path(step);
            write_atomic(&p, text().as_bytes())?;
            self.written.push(p);
        }
        self.last = step;
        Ok(())
    }

    fn last(&mut self, step: usize, text: String) -> Result<()> {
        let p = self.path(step);
        if !self.written.contains(&p) {
            write_atomic(&p, text.as_bytes())?;
            self.written.push(p);
        }
        Ok(())
    }
}

fn load_reference(cfg: &RunConfig) -> Result<Option<UniformGrid>> {
    match cfg.reference_level {
        Some(r) => cases::reference(&cfg.case, r, &cfg.scheme, &cases::cache_dir()).map(Some),
        None => Ok(None),
    }
}

/// Run the solver and compute errors against `reference` if given. With
/// `dumps` set, mesh outlines are written there per the cadence and the
/// native structure is kept for the caller to store.
pub fn solve(cfg: &RunConfig, reference: Option<&UniformGrid>, dumps: Option<&Path>) -> Result<Outcome> {
    let n = cfg.n_steps()?;
    let (case, level, scheme) = (&cfg.case, cfg.level, &cfg.scheme);
    let mut dumper = Dumper {
        dir: dumps.unwrap_or(Path::new(".")),
        stem: cfg.stem(),
        every: if dumps.is_some() { cfg.dump_every } else { 0 },
        last: 0,
        written: Vec::new(),
    };
    let t = &cfg.thresholds;
    let (report, grid, l1, native) = match cfg.method {
        Method::Fv => {
            let (g, report) = run_uniform(case, level, n, scheme)?;
            let l1 = reference.map(|r| l1_uniform(&g, &restrict_to_level(r, level)?)).transpose()?;
            (report, g, l1, None)
        }
        Method::Mr | Method::Mrlt => {
            let opts = MrOptions { eps: t.eps.unwrap_or(case.mr_eps), lts: cfg.method == Method::Mrlt, norm: t.detail_norm };
            let (tree, report) =
                run_mr_observed(case, level, n, scheme, &opts, &mut |k, tree| dumper.maybe(k, || tree.leaf_outlines()))?;
            if dumps.is_some() {
                dumper.last(n, tree.leaf_outlines())?;
            }
            let l1 = reference.map(|r| l1_error_mr(&tree, r, level)).transpose()?;
            (report, tree.leaf_projection_to_uniform(level)?, l1, dumps.map(|_| ("tree.txt", tree.snapshot_text().into_bytes())))
        }
        Method::Amr | Method::Amrlt => {
            let mut params = AmrParams::from_case(case, cfg.method == Method::Amrlt);
            params.eps_rho = t.eps_rho.unwrap_or(params.eps_rho);
            params.eps_p = t.eps_p.unwrap_or(params.eps_p);
            params.eta = t.eta.unwrap_or(params.eta);
            params.flux_correction = t.flux_correction;
            let (h, report) =
                run_amr_observed(case, level, n, scheme, &params, &mut |k, h| dumper.maybe(k, || h.patch_outlines()))?;
            if dumps.is_some() {
                dumper.last(n, h.patch_outlines())?;
            }
            let l1 = reference.map(|r| l1_error_amr(&h, r)).transpose()?;
            // cells not refined to the run level are injected piecewise constant
            (report, h.to_uniform(h.max_depth)?, l1, dumps.map(|_| ("hier", encode_hierarchy(&h))))
        }
    };
    let mut report = report;
    report.l1 = l1;
    Ok(Outcome { report, grid, native, artifacts: dumper.written })
}

/// CSV row with the compression rates that need no baseline filled in.
pub fn standalone_row(report: &RunReport) -> Result<CsvRow> {
    let mut row = CsvRow::new(report, None);
    row.memory_compression = Some(metrics::memory_compression(report.sum_cells(), report.n_steps, report.n_cells)?);
    row.mesh_compression = Some(metrics::mesh_compression(report.sum_leaves(), report.n_steps, report.n_cells)?);
    Ok(row)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SolverError {
    SolverError::Io(format!("{}: {e}", path.display()))
}

/// Create `dir` and check that files can be written there.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let probe = dir.join(format!(".write-probe-{}", std::process::id()));
    std::fs::write(&probe, b"").map_err(|e| io_err(dir, e))?;
    std::fs::remove_file(&probe).map_err(|e| io_err(&probe, e))?;
    Ok(())
}

/// Write the snapshot of the run-level solution with its config sidecar.
pub fn write_snapshot(cfg: &RunConfig, grid: &UniformGrid) -> Result<Vec<PathBuf>> {
    let snap = cfg.out.join(format!("{}.grid", cfg.stem()));
    write_grid(&snap, grid).map_err(|e| io_err(&snap, e))?;
    let meta = snap.with_extension("grid.meta");
    write_atomic(&meta, format_sidecar(&cfg.to_key_values()).as_bytes()).map_err(|e| io_err(&meta, e))?;
    Ok(vec![snap, meta])
}

/// The `run` subcommand: solve, then write report, snapshot and dumps.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    ensure_writable(&cfg.out)?;
    let reference = load_reference(cfg)?;
    let mut out = solve(cfg, reference.as_ref(), Some(&cfg.out))?;
    let csv_path = cfg.out.join(format!("{}.csv", cfg.stem()));
    let mut buf = Vec::new();
    metrics::write_csv(&mut buf, &[standalone_row(&out.report)?])?;
    write_atomic(&csv_path, &buf).map_err(|e| io_err(&csv_path, e))?;
    out.artifacts.push(csv_path);
    out.artifacts.extend(write_snapshot(cfg, &out.grid)?);
    if let Some((ext, bytes)) = &out.native {
        let p = cfg.out.join(format!("{}.{ext}", cfg.stem()));
        write_atomic(&p, bytes).map_err(|e| io_err(&p, e))?;
        out.artifacts.push(p);
    }
    Ok(out)
}
