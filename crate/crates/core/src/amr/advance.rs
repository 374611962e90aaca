//! Recursive level integration with averaging and conservative flux
//! correction at coarse-fine boundaries.

use std::time::Instant;

use rustc_hash::FxHashMap;

use super::hierarchy::{AmrParams, PatchHierarchy};
use crate::cases::CaseSpec;
use crate::error::{Result, SolverError};
use crate::euler::ConservedState;
use crate::metrics::{Method, RunReport, TimerGroup};
use crate::scheme::{courant_number, step_muscl_hancock, IntegratorKind, SchemeConfig};
use crate::unigrid::note_cfl;

/// Correction owed to one uncovered coarse cell across one face.
#[derive(Clone, Copy, Debug)]
struct RegEntry {
    cell: [i64; 3],
    /// +1 if the face is the cell's high face, -1 if its low face.
    sign: f64,
    /// Δt_c F_c minus the time- and area-weighted fine fluxes.
    acc: ConservedState,
    hits: u32,
}

/// Keyed by (axis, side of the fine region, covered coarse cell).
type Register = FxHashMap<(u8, u8, [i64; 3]), RegEntry>;

#[inline]
fn unit(a: usize) -> [i64; 3] {
    let mut e = [0; 3];
    e[a] = 1;
    e
}

#[inline]
fn add(a: [i64; 3], b: [i64; 3], s: i64) -> [i64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

/// The cells of `bx` in its first (`side` 0) or last (`side` 1) layer
/// along `axis`.
fn layer(bx: &super::IBox, axis: usize, side: u8) -> super::IBox {
    let mut l = *bx;
    if side == 0 {
        l.hi[axis] = l.lo[axis] + 1;
    } else {
        l.lo[axis] = l.hi[axis] - 1;
    }
    l
}

impl PatchHierarchy {
    /// Coarse cell across the refinement boundary from covered cell `j`,
    /// wrapped on periodic axes; `None` outside the domain.
    fn across(&self, k: usize, j: [i64; 3], axis: usize, side: u8) -> Option<[i64; 3]> {
        let mut c = add(j, unit(axis), if side == 0 { -1 } else { 1 });
        let n = self.n(k);
        if c[axis] < 0 || c[axis] >= n {
            if !self.bc.is_periodic(axis) {
                return None;
            }
            c[axis] = c[axis].rem_euclid(n);
        }
        Some(c)
    }

    /// Coarse fluxes of level `k` on every face between an uncovered cell
    /// and level `k+1`, weighted by `dt`.
    fn open_register(&self, k: usize, dt: f64) -> Result<Register> {
        let mut reg = Register::default();
        let coarse = &self.levels[k];
        for fp in &self.levels[k + 1].patches {
            let cb = fp.bx.coarsen(self.dim);
            for axis in 0..self.dim {
                for side in 0..2u8 {
                    for j in layer(&cb, axis, side).cells() {
                        let Some(c) = self.across(k, j, axis, side) else { continue };
                        if self.is_covered(k, c) {
                            continue;
                        }
                        let p = coarse.owner(c).ok_or(SolverError::NestingViolation { level: k + 1 })?;
                        let patch = &coarse.patches[p];
                        let fl = patch.fluxes.as_ref().ok_or(SolverError::RegisterMismatch { level: k, cell: c })?;
                        let mut face = patch.local(c);
                        if side == 0 {
                            face[axis] += 1;
                        }
                        let sign = if side == 0 { 1.0 } else { -1.0 };
                        reg.insert(
                            (axis as u8, side, j),
                            RegEntry { cell: c, sign, acc: fl.get(axis, face) * dt, hits: 0 },
                        );
                    }
                }
            }
        }
        Ok(reg)
    }

    /// Subtract the fine fluxes of level `kf` (just advanced by `dt`) on
    /// the faces registered for level `kf - 1`.
    fn add_fine_fluxes(&self, kf: usize, dt: f64, reg: &mut Register) -> Result<()> {
        let k = kf - 1;
        let w = dt / (1u32 << (self.dim - 1)) as f64;
        for fp in &self.levels[kf].patches {
            let fl = fp.fluxes.as_ref().expect("patch updated");
            for axis in 0..self.dim {
                for side in 0..2u8 {
                    for f in layer(&fp.bx, axis, side).cells() {
                        let j = self.parent(f);
                        match reg.get_mut(&(axis as u8, side, j)) {
                            Some(e) => {
                                let mut face = fp.local(f);
                                if side == 1 {
                                    face[axis] += 1;
                                }
                                e.acc -= fl.get(axis, face) * w;
                                e.hits += 1;
                            }
                            None => {
                                if let Some(c) = self.across(k, j, axis, side) {
                                    if !self.is_covered(k, c) {
                                        return Err(SolverError::RegisterMismatch { level: k, cell: c });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Replace the coarse fluxes on refinement boundaries of level `k` by
    /// the accumulated fine ones.
    fn flux_correct(&mut self, k: usize, reg: &Register) -> Result<()> {
        let inv = 1.0 / self.dx(k);
        let lev = &mut self.levels[k];
        for e in reg.values() {
            if e.hits == 0 {
                return Err(SolverError::RegisterMismatch { level: k, cell: e.cell });
            }
            let p = lev.owner(e.cell).ok_or(SolverError::NestingViolation { level: k })?;
            let q = lev.patches[p].get(e.cell) + e.acc * (e.sign * inv);
            lev.patches[p].set(e.cell, q);
        }
        Ok(())
    }

    /// One MUSCL-Hancock step of every patch of level `k`; ghosts must be
    /// filled.
    pub fn update_level(&mut self, k: usize, dt: f64) -> Result<()> {
        let dx = self.dx(k);
        let (cfg, gas) = (self.scheme, self.gas);
        let lev = &mut self.levels[k];
        let mut fallbacks = 0;
        for (i, p) in lev.patches.iter_mut().enumerate() {
            p.old = p.block.interior_values();
            let out = step_muscl_hancock(&mut p.block, dx, dt, &cfg, &gas)
                .map_err(|e| e.at(|| format!("level {k} patch {i} at {:?}", p.bx.lo)))?;
            fallbacks += out.fallbacks;
            p.fluxes = Some(out.fluxes);
        }
        lev.t_old = lev.t;
        lev.t += dt;
        self.fallbacks += fallbacks;
        Ok(())
    }

    fn timed<T>(&mut self, g: TimerGroup, f: impl FnOnce(&mut Self) -> T) -> T {
        let t0 = Instant::now();
        let r = f(self);
        self.timers.add(g, t0.elapsed());
        r
    }

    /// Advance level `k` over one step of level `k-1` (or one root step),
    /// recursing into the finer levels.
    fn advance_level(&mut self, k: usize, regs: &mut Vec<Register>) -> Result<()> {
        let lt = self.params.time_refined;
        let repeats = if k > 0 && lt { 2 } else { 1 };
        for sub in 0..repeats {
            let t = self.levels[k].t;
            self.timed(TimerGroup::Ghost, |h| h.sync_ghosts(k, t))?;
            if k < self.max_depth && (k == 0 || (lt && sub > 0)) {
                self.timed(TimerGroup::Adaptation, |h| h.remesh(k))?;
            }
            let dt = self.dt(k);
            self.timed(TimerGroup::Numerics, |h| h.update_level(k, dt))?;
            if k > 0 && self.params.flux_correction {
                let mut reg = std::mem::take(&mut regs[k - 1]);
                let r = self.timed(TimerGroup::Transfer, |h| h.add_fine_fluxes(k, dt, &mut reg));
                regs[k - 1] = reg;
                r?;
            }
            if k == self.depth() {
                let steps = if lt { 1u64 << (self.max_depth - k) } else { 1 };
                let (c, l) = (self.n_cells() as u64, self.n_leaves() as u64);
                for _ in 0..steps {
                    self.counts.push((c, l));
                }
            }
            if k < self.depth() {
                if self.params.flux_correction {
                    regs[k] = self.timed(TimerGroup::Transfer, |h| h.open_register(k, dt))?;
                }
                self.advance_level(k + 1, regs)?;
                self.timed(TimerGroup::Transfer, |h| -> Result<()> {
                    h.average_down(k)?;
                    if h.params.flux_correction {
                        let reg = std::mem::take(&mut regs[k]);
                        h.flux_correct(k, &reg)?;
                    }
                    Ok(())
                })?;
            }
        }
        Ok(())
    }

    /// One step of level 0: `2^max_depth` finest steps with time
    /// refinement, one otherwise.
    pub fn advance(&mut self) -> Result<()> {
        let mut regs = vec![Register::default(); self.max_depth + 1];
        self.advance_level(0, &mut regs)
    }

    /// Largest Courant number over all patches with each level's step.
    pub fn courant(&self) -> Result<f64> {
        let mut c: f64 = 0.0;
        for (k, lev) in self.levels.iter().enumerate() {
            for p in &lev.patches {
                c = c.max(courant_number(&p.block, self.dx(k), self.dt(k), &self.gas)?);
            }
        }
        Ok(c)
    }
}

/// Base level of the AMR hierarchy for finest level `level`.
pub fn amr_base_level(case: &CaseSpec, level: u32) -> Result<u32> {
    if level == 0 {
        return Err(SolverError::Config("AMR needs a finest level of at least 1".into()));
    }
    Ok(case.amr_base_level.min(level - 1))
}

/// Run the AMR solver to `case.t_end` with `n_steps` finest-level steps.
pub fn run_amr(
    case: &CaseSpec,
    level: u32,
    n_steps: usize,
    cfg: &SchemeConfig,
    params: &AmrParams,
) -> Result<(PatchHierarchy, RunReport)> {
    run_amr_observed(case, level, n_steps, cfg, params, &mut |_, _| Ok(()))
}

/// As `run_amr`, calling `observe(steps_done, hierarchy)` after every root
/// step. Time spent in `observe` is excluded from the report.
pub fn run_amr_observed(
    case: &CaseSpec,
    level: u32,
    n_steps: usize,
    cfg: &SchemeConfig,
    params: &AmrParams,
    observe: &mut dyn FnMut(usize, &PatchHierarchy) -> Result<()>,
) -> Result<(PatchHierarchy, RunReport)> {
    if cfg.integrator != IntegratorKind::MusclHancock {
        return Err(SolverError::Config("the AMR solvers use the MUSCL-Hancock integrator".into()));
    }
    let base = amr_base_level(case, level)?;
    let depth = (level - base) as usize;
    let lt = params.time_refined;
    if lt && n_steps % (1 << depth) != 0 {
        return Err(SolverError::Config(format!(
            "{n_steps} steps are not divisible by the time refinement 2^{depth}"
        )));
    }
    let method = if lt { Method::Amrlt } else { Method::Amr };
    let mut report = RunReport::new(method, case.name, level, n_steps, case.n_cells(level), *cfg);
    let t0 = Instant::now();
    let dt = case.dt(n_steps);
    let mut h = report
        .timers
        .time(TimerGroup::Adaptation, || PatchHierarchy::initial(case, base, depth, *params, *cfg, dt))?;
    let root_steps = if lt { n_steps >> depth } else { n_steps };
    let mut excluded = std::time::Duration::ZERO;
    for s in 0..root_steps {
        let cfl = h.timed(TimerGroup::Other, |h| h.courant())?;
        note_cfl(&mut report, cfl, s);
        h.advance().map_err(|e| e.at(|| format!("root step {s}")))?;
        let t_obs = Instant::now();
        observe((s + 1) * (n_steps / root_steps), &h)?;
        excluded += t_obs.elapsed();
    }
    for (c, l) in h.counts.drain(..) {
        report.record_step(c, l);
    }
    report.fallbacks = h.fallbacks;
    report.timers.merge(&h.timers);
    report.wall_s = (t0.elapsed() - excluded).as_secs_f64();
    Ok((h, report))
}
