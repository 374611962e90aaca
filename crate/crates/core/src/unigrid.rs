//! Uniform-mesh finite-volume solver, used as the baseline of every
//! comparison and to produce reference solutions.

use std::time::{Duration, Instant};

use crate::cases::CaseSpec;
use crate::error::{Result, SolverError};
use crate::euler::{ConservedState, GasModel};
use crate::grid::{Block, BoundaryCondition, GHOST};
use crate::metrics::{Method, RunReport, TimerGroup};
use crate::scheme::{self, courant_number, IntegratorKind, SchemeConfig, StepOutput};

/// CFL numbers above this trigger a warning.
pub const CFL_WARN: f64 = 0.9;

/// A square or cubic Cartesian grid with `2^level` cells per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformGrid {
    pub level: u32,
    pub lower: f64,
    pub extent: f64,
    pub t: f64,
    pub gas: GasModel,
    pub block: Block,
}

impl UniformGrid {
    pub fn new(dim: usize, level: u32, lower: f64, extent: f64, gas: GasModel) -> Self {
        let n = 1usize << level;
        UniformGrid { level, lower, extent, t: 0.0, gas, block: Block::new(dim, [n, n, n], GHOST) }
    }

    pub fn from_case(case: &CaseSpec, level: u32) -> Result<Self> {
        Ok(UniformGrid {
            level,
            lower: case.lower,
            extent: case.extent,
            t: 0.0,
            gas: case.gas,
            block: case.init_block(level)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.block.dim
    }

    pub fn n(&self) -> usize {
        self.block.shape[0]
    }

    pub fn dx(&self) -> f64 {
        self.extent / self.n() as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim() as i32)
    }

    pub fn fill_ghosts(&mut self, bc: &BoundaryCondition) {
        self.block.fill_ghosts(bc);
    }

    /// Volume-weighted totals of the conserved quantities.
    pub fn total(&self) -> ConservedState {
        self.block.interior_sum() * self.cell_volume()
    }

    /// Advance by `dt` with the configured integrator.
    pub fn step(&mut self, dt: f64, cfg: &SchemeConfig, bc: &BoundaryCondition) -> Result<StepOutput> {
        let dx = self.dx();
        let gas = self.gas;
        let out = match cfg.integrator {
            IntegratorKind::Rk2 => scheme::step_rk2(&mut self.block, dx, dt, cfg, &gas, &mut |b| {
                b.fill_ghosts(bc);
                Ok(())
            })?,
            IntegratorKind::MusclHancock => {
                self.block.fill_ghosts(bc);
                scheme::step_muscl_hancock(&mut self.block, dx, dt, cfg, &gas)?
            }
        };
        self.t += dt;
        Ok(out)
    }

    pub fn courant(&self, dt: f64) -> Result<f64> {
        courant_number(&self.block, self.dx(), dt, &self.gas)
    }
}

/// Average 2^d fine cells into each coarse cell.
pub fn restrict_block(fine: &Block) -> Block {
    let d = fine.dim;
    let mut shape = fine.shape;
    for s in shape.iter_mut().take(d) {
        *s /= 2;
    }
    let mut coarse = Block::new(d, shape, fine.ghost);
    let w = 1.0 / (1u32 << d) as f64;
    for ix in coarse.interior().collect::<Vec<_>>() {
        let mut s = ConservedState::ZERO;
        for o in child_offsets(d) {
            s += fine.get([2 * ix[0] + o[0], 2 * ix[1] + o[1], 2 * ix[2] + o[2]]);
        }
        coarse.set(ix, s * w);
    }
    coarse
}

/// Offsets of the 2^d children of a cell, x fastest.
pub fn child_offsets(dim: usize) -> impl Iterator<Item = [i64; 3]> {
    (0..1i64 << dim).map(|c| [c & 1, (c >> 1) & 1, (c >> 2) & 1])
}

pub fn restrict_to_level(fine: &UniformGrid, target: u32) -> Result<UniformGrid> {
    if fine.level < target {
        return Err(SolverError::LevelMismatch { have: fine.level, need: target });
    }
    let mut g = fine.clone();
    while g.level > target {
        g.block = restrict_block(&g.block);
        g.level -= 1;
    }
    Ok(g)
}

/// Run the uniform solver for `n_steps` steps of size `t_end / n_steps`.
pub fn run_uniform(
    case: &CaseSpec,
    level: u32,
    n_steps: usize,
    cfg: &SchemeConfig,
) -> Result<(UniformGrid, RunReport)> {
    run_uniform_observed(case, level, n_steps, cfg, &mut |_, _| Ok(()))
}

/// As `run_uniform`, calling `observe(steps_done, grid)` after every step.
/// Time spent in `observe` is excluded from the report.
pub fn run_uniform_observed(
    case: &CaseSpec,
    level: u32,
    n_steps: usize,
    cfg: &SchemeConfig,
    observe: &mut dyn FnMut(usize, &UniformGrid) -> Result<()>,
) -> Result<(UniformGrid, RunReport)> {
    let mut report = RunReport::new(Method::Fv, case.name, level, n_steps, case.n_cells(level), *cfg);
    let t0 = Instant::now();
    let mut grid = report.timers.time(TimerGroup::Other, || UniformGrid::from_case(case, level))?;
    let dt = case.dt(n_steps);
    let n_c = case.n_cells(level) as u64;
    let mut excluded = Duration::ZERO;
    for step in 0..n_steps {
        let cfl = report.timers.time(TimerGroup::Other, || grid.courant(dt))?;
        note_cfl(&mut report, cfl, step);
        let out = report
            .timers
            .time(TimerGroup::Numerics, || grid.step(dt, cfg, &case.bc))
            .map_err(|e| e.at(|| format!("step {step}")))?;
        report.fallbacks += out.fallbacks;
        report.record_step(n_c, n_c);
        let t_obs = Instant::now();
        observe(step + 1, &grid)?;
        excluded += t_obs.elapsed();
    }
    grid.t = case.t_end;
    report.wall_s = (t0.elapsed() - excluded).as_secs_f64();
    Ok((grid, report))
}

pub(crate) fn note_cfl(report: &mut RunReport, cfl: f64, step: usize) {
    if cfl > CFL_WARN && report.max_cfl <= CFL_WARN {
        log::warn!("{} {} L={}: CFL {cfl:.3} exceeds {CFL_WARN} at step {step}", report.method, report.case, report.level);
    }
    report.max_cfl = report.max_cfl.max(cfl);
}
