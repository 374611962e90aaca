//! Run reports, L1 errors, compression rates, overhead and task timers.

use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::euler::NVAR;
use crate::scheme::SchemeConfig;
use crate::amr::PatchHierarchy;
use crate::mr::MrTree;
use crate::unigrid::{restrict_to_level, UniformGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Fv,
    Mr,
    Mrlt,
    Amr,
    Amrlt,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Fv, Method::Mr, Method::Mrlt, Method::Amr, Method::Amrlt];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::Fv => "FV",
            Method::Mr => "MR",
            Method::Mrlt => "MRLT",
            Method::Amr => "AMR",
            Method::Amrlt => "AMRLT",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fv" => Ok(Method::Fv),
            "mr" => Ok(Method::Mr),
            "mrlt" => Ok(Method::Mrlt),
            "amr" => Ok(Method::Amr),
            "amrlt" => Ok(Method::Amrlt),
            _ => Err(SolverError::Config(format!("unknown method '{s}' (expected fv, mr, mrlt, amr or amrlt)"))),
        }
    }

    pub fn is_mr_family(&self) -> bool {
        matches!(self, Method::Mr | Method::Mrlt)
    }

    pub fn is_amr_family(&self) -> bool {
        matches!(self, Method::Amr | Method::Amrlt)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimerGroup {
    Numerics,
    Adaptation,
    Ghost,
    Transfer,
    Other,
}

impl TimerGroup {
    pub const ALL: [TimerGroup; 5] =
        [TimerGroup::Numerics, TimerGroup::Adaptation, TimerGroup::Ghost, TimerGroup::Transfer, TimerGroup::Other];

    pub fn name(&self) -> &'static str {
        match self {
            TimerGroup::Numerics => "numerics",
            TimerGroup::Adaptation => "adaptation",
            TimerGroup::Ghost => "ghost/boundary",
            TimerGroup::Transfer => "transfer",
            TimerGroup::Other => "other",
        }
    }
}

/// Accumulating wall-clock timers per task group. Regions must not overlap.
#[derive(Clone, Debug, Default)]
pub struct TaskTimers {
    acc: [Duration; 5],
    open: [Option<Instant>; 5],
}

impl TaskTimers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start(&mut self, g: TimerGroup) -> Result<()> {
        let slot = &mut self.open[g as usize];
        if slot.is_some() {
            return Err(SolverError::UnbalancedTimer(g.name()));
        }
        *slot = Some(Instant::now());
        Ok(())
    }

    pub fn stop(&mut self, g: TimerGroup) -> Result<()> {
        match self.open[g as usize].take() {
            Some(t0) => {
                self.acc[g as usize] += t0.elapsed();
                Ok(())
            }
            None => Err(SolverError::UnbalancedTimer(g.name())),
        }
    }

    /// Time a closure under `g`.
    #[inline]
    pub fn time<T>(&mut self, g: TimerGroup, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let r = f();
        self.acc[g as usize] += t0.elapsed();
        r
    }

    pub fn add(&mut self, g: TimerGroup, d: Duration) {
        self.acc[g as usize] += d;
    }

    /// Add the accumulated times of `other`.
    pub fn merge(&mut self, other: &TaskTimers) {
        for (a, b) in self.acc.iter_mut().zip(&other.acc) {
            *a += *b;
        }
    }

    pub fn seconds(&self, g: TimerGroup) -> f64 {
        self.acc[g as usize].as_secs_f64()
    }

    pub fn total(&self) -> f64 {
        self.acc.iter().map(|d| d.as_secs_f64()).sum()
    }

    /// Share of each group in the timed total, in percent.
    pub fn percentages(&self) -> [(TimerGroup, f64); 5] {
        let total = self.total();
        TimerGroup::ALL.map(|g| (g, if total > 0.0 { 100.0 * self.seconds(g) / total } else { 0.0 }))
    }
}

/// Everything measured in one solver run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub method: Method,
    pub case: String,
    pub level: u32,
    pub n_steps: usize,
    /// N_C: cells of the uniform mesh at `level`.
    pub n_cells: usize,
    pub scheme: SchemeConfig,
    pub wall_s: f64,
    pub timers: TaskTimers,
    /// 𝓒ⁿ: all cells of the hierarchy / tree after each step.
    pub cells_per_step: Vec<u64>,
    /// 𝓛ⁿ: leaves (MR) or cells holding finest available data (AMR).
    pub leaves_per_step: Vec<u64>,
    pub max_cfl: f64,
    pub fallbacks: usize,
    pub l1: Option<[f64; NVAR]>,
}

impl RunReport {
    pub fn new(method: Method, case: &str, level: u32, n_steps: usize, n_cells: usize, scheme: SchemeConfig) -> Self {
        RunReport {
            method,
            case: case.to_string(),
            level,
            n_steps,
            n_cells,
            scheme,
            wall_s: 0.0,
            timers: TaskTimers::new(),
            cells_per_step: Vec::with_capacity(n_steps),
            leaves_per_step: Vec::with_capacity(n_steps),
            max_cfl: 0.0,
            fallbacks: 0,
            l1: None,
        }
    }

    pub fn record_step(&mut self, cells: u64, leaves: u64) {
        self.cells_per_step.push(cells);
        self.leaves_per_step.push(leaves);
    }

    pub fn sum_cells(&self) -> f64 {
        self.cells_per_step.iter().map(|&c| c as f64).sum()
    }

    pub fn sum_leaves(&self) -> f64 {
        self.leaves_per_step.iter().map(|&c| c as f64).sum()
    }

    pub fn l1_rho(&self) -> Option<f64> {
        self.l1.map(|e| e[0])
    }
}

/// The five derived rates of an adaptive run against its uniform baseline.
/// All are fractions (multiply by 100 for percent).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub cpu_compression: f64,
    pub memory_compression: f64,
    pub mesh_compression: f64,
    pub perturbation: f64,
    pub overhead: f64,
}

pub fn memory_compression(sum_cells: f64, n_steps: usize, n_cells: usize) -> Result<f64> {
    if n_steps == 0 {
        return Err(SolverError::DivisionDomain("N_I is zero"));
    }
    if n_cells == 0 {
        return Err(SolverError::DivisionDomain("N_C is zero"));
    }
    Ok(sum_cells / n_steps as f64 / n_cells as f64)
}

/// Same formula as memory compression, applied to leaf counts.
pub fn mesh_compression(sum_leaves: f64, n_steps: usize, n_cells: usize) -> Result<f64> {
    memory_compression(sum_leaves, n_steps, n_cells)
}

/// Per-leaf cost relative to the uniform per-cell cost, minus one.
pub fn overhead(cpu_adaptive: f64, sum_leaves: f64, cpu_fv: f64, fv_cell_steps: f64) -> Result<f64> {
    if sum_leaves <= 0.0 {
        return Err(SolverError::DivisionDomain("adaptive leaf sum is zero"));
    }
    if fv_cell_steps <= 0.0 || cpu_fv <= 0.0 {
        return Err(SolverError::DivisionDomain("uniform cost is zero"));
    }
    let gamma_a = cpu_adaptive / sum_leaves;
    let gamma_fv = cpu_fv / fv_cell_steps;
    Ok(gamma_a / gamma_fv - 1.0)
}

pub fn perturbation(l1_fv: f64, l1_adaptive: f64) -> Result<f64> {
    if l1_fv == 0.0 {
        return Err(SolverError::DivisionDomain("uniform L1 error is zero"));
    }
    Ok((l1_fv - l1_adaptive).abs() / l1_fv)
}

pub fn rates(adaptive: &RunReport, fv: &RunReport) -> Result<Rates> {
    if adaptive.case != fv.case || adaptive.level != fv.level || adaptive.n_steps != fv.n_steps {
        return Err(SolverError::Config(format!(
            "rate pair mismatch: {} L={} N_I={} vs {} L={} N_I={}",
            adaptive.case, adaptive.level, adaptive.n_steps, fv.case, fv.level, fv.n_steps
        )));
    }
    if fv.wall_s <= 0.0 {
        return Err(SolverError::DivisionDomain("uniform CPU time is zero"));
    }
    let n_c = fv.n_cells;
    let l1_fv = fv.l1_rho().ok_or(SolverError::DivisionDomain("uniform L1 error missing"))?;
    let l1_a = adaptive.l1_rho().ok_or(SolverError::DivisionDomain("adaptive L1 error missing"))?;
    Ok(Rates {
        cpu_compression: adaptive.wall_s / fv.wall_s,
        memory_compression: memory_compression(adaptive.sum_cells(), adaptive.n_steps, n_c)?,
        mesh_compression: mesh_compression(adaptive.sum_leaves(), adaptive.n_steps, n_c)?,
        perturbation: perturbation(l1_fv, l1_a)?,
        overhead: overhead(adaptive.wall_s, adaptive.sum_leaves(), fv.wall_s, (fv.n_steps * n_c) as f64)?,
    })
}

/// Observed convergence rate between two successive levels.
pub fn convergence_rate(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

/// L1 error of every component between two grids on the same level,
/// weighted by the cell volume Δx^d.
pub fn l1_uniform(a: &UniformGrid, b: &UniformGrid) -> Result<[f64; NVAR]> {
    if a.level != b.level || a.dim() != b.dim() {
        return Err(SolverError::LevelMismatch { have: a.level, need: b.level });
    }
    let vol = a.cell_volume();
    let mut e = [0.0; NVAR];
    for ix in a.block.interior() {
        let d = a.block.get(ix) - b.block.get(ix);
        for c in 0..NVAR {
            e[c] += d[c].abs();
        }
    }
    Ok(e.map(|x| x * vol))
}

/// L1 error of a multiresolution solution: leaves projected to the
/// uniform level `level`, reference restricted to the same level.
pub fn l1_error_mr(tree: &MrTree, reference: &UniformGrid, level: u32) -> Result<[f64; NVAR]> {
    if reference.level < level {
        return Err(SolverError::LevelMismatch { have: reference.level, need: level });
    }
    let p = tree.leaf_projection_to_uniform(level)?;
    l1_uniform(&p, &restrict_to_level(reference, level)?)
}

/// L1 error of an AMR solution: every level's cells not covered by the
/// next level, each weighted by that level's cell volume.
pub fn l1_error_amr(h: &PatchHierarchy, reference: &UniformGrid) -> Result<[f64; NVAR]> {
    h.l1_error(reference)
}

/// One CSV row; rate columns stay empty without a baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub method: String,
    pub case: String,
    #[serde(rename = "L")]
    pub level: u32,
    #[serde(rename = "N_I")]
    pub n_steps: usize,
    pub wall_s: f64,
    pub sum_cells: f64,
    pub sum_leaves: f64,
    pub l1_rho: Option<f64>,
    pub cpu_compression: Option<f64>,
    pub memory_compression: Option<f64>,
    pub mesh_compression: Option<f64>,
    pub perturbation: Option<f64>,
    pub overhead: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "method",
    "case",
    "L",
    "N_I",
    "wall_s",
    "sum_cells",
    "sum_leaves",
    "l1_rho",
    "cpu_compression",
    "memory_compression",
    "mesh_compression",
    "perturbation",
    "overhead",
];

impl CsvRow {
    pub fn new(report: &RunReport, rates: Option<&Rates>) -> Self {
        CsvRow {
            method: report.method.tag().to_string(),
            case: report.case.clone(),
            level: report.level,
            n_steps: report.n_steps,
            wall_s: report.wall_s,
            sum_cells: report.sum_cells(),
            sum_leaves: report.sum_leaves(),
            l1_rho: report.l1_rho(),
            cpu_compression: rates.map(|r| r.cpu_compression),
            memory_compression: rates.map(|r| r.memory_compression),
            mesh_compression: rates.map(|r| r.mesh_compression),
            perturbation: rates.map(|r| r.perturbation),
            overhead: rates.map(|r| r.overhead),
        }
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(|e| SolverError::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| SolverError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| SolverError::Format(e.to_string()))?.clone();
    if headers.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(SolverError::Format(format!("unexpected CSV header {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(|e| SolverError::Format(e.to_string()))).collect()
}
