//! Levels of disjoint patches, value lookup across levels, ghost
//! synchronization, coarse-to-fine interpolation and averaging.

use super::boxes::{IBox, Mask};
use crate::cases::CaseSpec;
use crate::error::{Result, SolverError};
use crate::euler::{primitives, ConservedState, GasModel, NVAR};
use crate::grid::{Block, BoundaryCondition, GHOST};
use crate::metrics::TaskTimers;
use crate::scheme::{limiter, FluxField, LimiterKind, SchemeConfig};
use crate::unigrid::{child_offsets, restrict_to_level, UniformGrid};

/// Adaptation parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmrParams {
    pub eps_rho: f64,
    pub eps_p: f64,
    /// Minimum ratio of flagged to total cells per new patch.
    pub eta: f64,
    /// Refine in time (AMRLT) instead of stepping every level with the
    /// finest time step.
    pub time_refined: bool,
    pub flux_correction: bool,
}

impl AmrParams {
    pub fn from_case(case: &CaseSpec, time_refined: bool) -> Self {
        AmrParams {
            eps_rho: case.amr_eps_rho,
            eps_p: case.amr_eps_p,
            eta: case.eta_tol,
            time_refined,
            flux_correction: true,
        }
    }
}

/// A box of cells on one level with its ghost layers. Block indices are
/// relative to `bx.lo`.
#[derive(Clone, Debug)]
pub struct Patch {
    pub bx: IBox,
    pub block: Block,
    /// Interior values before the last update, for time interpolation.
    pub(crate) old: Vec<ConservedState>,
    /// Fluxes of the last update.
    pub(crate) fluxes: Option<FluxField>,
}

impl Patch {
    pub fn new(dim: usize, bx: IBox) -> Self {
        Patch { bx, block: Block::new(dim, bx.shape(), GHOST), old: Vec::new(), fluxes: None }
    }

    #[inline]
    pub fn local(&self, g: [i64; 3]) -> [i64; 3] {
        [g[0] - self.bx.lo[0], g[1] - self.bx.lo[1], g[2] - self.bx.lo[2]]
    }

    #[inline]
    pub fn get(&self, g: [i64; 3]) -> ConservedState {
        self.block.get(self.local(g))
    }

    #[inline]
    pub fn set(&mut self, g: [i64; 3], q: ConservedState) {
        let l = self.local(g);
        self.block.set(l, q);
    }

    #[inline]
    fn interior_lin(&self, g: [i64; 3]) -> usize {
        let l = self.local(g);
        let s = self.block.shape;
        l[0] as usize + s[0] * (l[1] as usize + s[1] * l[2] as usize)
    }
}

const NO_PATCH: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct AmrLevel {
    pub patches: Vec<Patch>,
    /// Cells per axis.
    pub n: i64,
    pub t: f64,
    /// Time of `Patch::old`; equals `t` when no bracket is held.
    pub t_old: f64,
    owner: Vec<u32>,
}

impl AmrLevel {
    pub fn new(dim: usize, n: i64, mut boxes: Vec<IBox>, t: f64) -> Self {
        boxes.sort();
        let patches = boxes.into_iter().map(|b| Patch::new(dim, b)).collect();
        let mut lev = AmrLevel { patches, n, t, t_old: t, owner: Vec::new() };
        lev.rebuild_owner(dim);
        lev
    }

    fn rebuild_owner(&mut self, dim: usize) {
        self.owner = vec![NO_PATCH; (self.n as usize).pow(dim as u32)];
        for (p, patch) in self.patches.iter().enumerate() {
            for ix in patch.bx.cells() {
                let l = self.lin(ix);
                debug_assert_eq!(self.owner[l], NO_PATCH, "overlapping patches");
                self.owner[l] = p as u32;
            }
        }
    }

    #[inline]
    fn lin(&self, ix: [i64; 3]) -> usize {
        let n = self.n as usize;
        ix[0] as usize + n * (ix[1] as usize + n * ix[2] as usize)
    }

    /// Patch holding in-domain cell `ix`.
    #[inline]
    pub fn owner(&self, ix: [i64; 3]) -> Option<usize> {
        let o = self.owner[self.lin(ix)];
        (o != NO_PATCH).then_some(o as usize)
    }

    pub fn n_cells(&self) -> usize {
        self.patches.iter().map(|p| p.bx.volume()).sum()
    }

    pub fn boxes(&self) -> Vec<IBox> {
        self.patches.iter().map(|p| p.bx).collect()
    }

    pub fn coverage(&self, dim: usize) -> Mask {
        let mut m = Mask::new(dim, self.n);
        for p in &self.patches {
            m.fill_box(&p.bx, true);
        }
        m
    }

    /// Current value of an in-domain cell known to be covered.
    #[inline]
    pub fn value(&self, ix: [i64; 3]) -> Option<ConservedState> {
        self.owner(ix).map(|p| self.patches[p].get(ix))
    }
}

/// Block-structured hierarchy. Level `k` has `2^(base_level + k)` cells
/// per axis; level 0 covers the domain with one patch.
#[derive(Clone, Debug)]
pub struct PatchHierarchy {
    pub dim: usize,
    pub base_level: u32,
    /// Deepest level index allowed.
    pub max_depth: usize,
    pub lower: f64,
    pub extent: f64,
    pub bc: BoundaryCondition,
    pub gas: GasModel,
    pub params: AmrParams,
    pub scheme: SchemeConfig,
    /// Time step of the deepest allowed level.
    pub dt_finest: f64,
    pub levels: Vec<AmrLevel>,
    pub fallbacks: usize,
    pub(crate) timers: TaskTimers,
    /// (𝓒, 𝓛) for every finest-level step taken.
    pub(crate) counts: Vec<(u64, u64)>,
}

#[inline]
fn shift(ix: [i64; 3], a: usize, s: i64) -> [i64; 3] {
    let mut j = ix;
    j[a] += s;
    j
}

impl PatchHierarchy {
    /// Hierarchy holding only level 0, initialized from the case.
    pub fn base(
        case: &CaseSpec,
        base_level: u32,
        max_depth: usize,
        params: AmrParams,
        scheme: SchemeConfig,
        dt_finest: f64,
    ) -> Result<Self> {
        let dim = case.dim;
        let n = case.cells_per_axis(base_level) as i64;
        let mut lev = AmrLevel::new(dim, n, vec![IBox::domain(dim, n)], 0.0);
        lev.patches[0].block = case.init_block(base_level)?;
        Ok(PatchHierarchy {
            dim,
            base_level,
            max_depth,
            lower: case.lower,
            extent: case.extent,
            bc: case.bc,
            gas: case.gas,
            params,
            scheme,
            dt_finest,
            levels: vec![lev],
            fallbacks: 0,
            timers: TaskTimers::new(),
            counts: Vec::new(),
        })
    }

    /// Base hierarchy refined up to `max_depth` levels with initial data
    /// sampled on every new level.
    pub fn initial(
        case: &CaseSpec,
        base_level: u32,
        max_depth: usize,
        params: AmrParams,
        scheme: SchemeConfig,
        dt_finest: f64,
    ) -> Result<Self> {
        let mut h = Self::base(case, base_level, max_depth, params, scheme, dt_finest)?;
        for _ in 0..max_depth {
            let before = h.levels.len();
            h.sync_ghosts(0, 0.0)?;
            h.remesh_from(0, Some(case))?;
            if h.levels.len() == before {
                break;
            }
        }
        Ok(h)
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level_number(&self, k: usize) -> u32 {
        self.base_level + k as u32
    }

    pub fn n(&self, k: usize) -> i64 {
        1i64 << self.level_number(k)
    }

    pub fn dx(&self, k: usize) -> f64 {
        self.extent / self.n(k) as f64
    }

    pub fn periodic(&self) -> [bool; 3] {
        [0, 1, 2].map(|a| a < self.dim && self.bc.is_periodic(a))
    }

    /// Time step of level `k`.
    pub fn dt(&self, k: usize) -> f64 {
        if self.params.time_refined {
            self.dt_finest * (1u64 << (self.max_depth - k)) as f64
        } else {
            self.dt_finest
        }
    }

    pub(crate) fn time_tol(&self) -> f64 {
        1e-9 * self.dt_finest.max(f64::MIN_POSITIVE)
    }

    /// 𝓒: cells of every patch on every level.
    pub fn n_cells(&self) -> usize {
        self.levels.iter().map(|l| l.n_cells()).sum()
    }

    /// 𝓛: cells not covered by a finer level.
    pub fn n_leaves(&self) -> usize {
        let w = 1usize << self.dim;
        let mut s = 0;
        for k in 0..self.levels.len() {
            s += self.levels[k].n_cells();
            if k + 1 < self.levels.len() {
                s -= self.levels[k + 1].n_cells() / w;
            }
        }
        s
    }

    /// Whether in-domain cell `ix` of level `k` is covered by level `k+1`.
    #[inline]
    pub fn is_covered(&self, k: usize, ix: [i64; 3]) -> bool {
        match self.levels.get(k + 1) {
            Some(f) => f.owner(self.child(ix, [0; 3])).is_some(),
            None => false,
        }
    }

    #[inline]
    pub(crate) fn child(&self, ix: [i64; 3], o: [i64; 3]) -> [i64; 3] {
        let mut c = [0; 3];
        for a in 0..self.dim {
            c[a] = 2 * ix[a] + o[a];
        }
        c
    }

    #[inline]
    pub(crate) fn parent(&self, ix: [i64; 3]) -> [i64; 3] {
        let mut c = [0; 3];
        for a in 0..self.dim {
            c[a] = ix[a].div_euclid(2);
        }
        c
    }

    /// Map an index outside level `k` to the in-domain cell supplying its
    /// value, with the axes along which the state must be mirrored.
    #[inline]
    fn image(&self, k: usize, ix: [i64; 3]) -> ([i64; 3], [bool; 3]) {
        let n = self.n(k);
        let mut j = ix;
        let mut flip = [false; 3];
        for a in 0..self.dim {
            let (i, f) = self.bc.image(a, ix[a], n);
            j[a] = i;
            flip[a] = f;
        }
        (j, flip)
    }

    /// State of cell `ix` of level `k` at time `tau`: same-level data
    /// (interpolated in time if needed), physical boundary images, or
    /// conservative interpolation from coarser levels where `k` has no
    /// patch.
    pub fn value_at(&self, k: usize, ix: [i64; 3], tau: f64) -> Result<ConservedState> {
        let (j, flip) = self.image(k, ix);
        let mut q = self.in_domain_value(k, j, tau)?;
        for (a, &f) in flip.iter().enumerate() {
            if f {
                q = q.reflected(a);
            }
        }
        Ok(q)
    }

    fn in_domain_value(&self, k: usize, j: [i64; 3], tau: f64) -> Result<ConservedState> {
        let lev = &self.levels[k];
        match lev.owner(j) {
            Some(p) => self.time_value(k, p, j, tau),
            None if k == 0 => Err(SolverError::NestingViolation { level: 0 }),
            None => self.interpolate(k - 1, j, tau),
        }
    }

    fn time_value(&self, k: usize, p: usize, j: [i64; 3], tau: f64) -> Result<ConservedState> {
        let lev = &self.levels[k];
        let patch = &lev.patches[p];
        let q = patch.get(j);
        let tol = self.time_tol();
        if (tau - lev.t).abs() <= tol {
            return Ok(q);
        }
        if lev.t_old < lev.t && !patch.old.is_empty() && tau > lev.t_old - tol && tau < lev.t + tol {
            let th = (tau - lev.t_old) / (lev.t - lev.t_old);
            let old = patch.old[patch.interior_lin(j)];
            return Ok(old * (1.0 - th) + q * th);
        }
        Err(SolverError::MissingBracketingStates { level: k, t: tau })
    }

    /// Minmod-limited conservative linear interpolation of fine cell `j`
    /// (level `kc + 1`) from level `kc` at time `tau`.
    pub fn interpolate(&self, kc: usize, j: [i64; 3], tau: f64) -> Result<ConservedState> {
        let jc = self.parent(j);
        let q0 = self.value_at(kc, jc, tau)?;
        let mut q = q0;
        for a in 0..self.dim {
            let qm = self.value_at(kc, shift(jc, a, -1), tau)?;
            let qp = self.value_at(kc, shift(jc, a, 1), tau)?;
            let w = if j[a] - 2 * jc[a] == 1 { 0.25 } else { -0.25 };
            for c in 0..NVAR {
                q[c] += w * limiter(LimiterKind::Minmod, qp[c] - q0[c], q0[c] - qm[c]);
            }
        }
        Ok(if primitives(&q, &self.gas).is_ok() { q } else { q0 })
    }

    /// Fill the ghost cells of every patch of level `k` for time `tau`.
    pub fn sync_ghosts(&mut self, k: usize, tau: f64) -> Result<()> {
        let mut fills = Vec::with_capacity(self.levels[k].patches.len());
        for p in &self.levels[k].patches {
            let mut v = Vec::new();
            for l in p.block.all_cells() {
                if p.block.is_interior(l) {
                    continue;
                }
                let g = [l[0] + p.bx.lo[0], l[1] + p.bx.lo[1], l[2] + p.bx.lo[2]];
                v.push((p.block.lin(l), self.value_at(k, g, tau)?));
            }
            fills.push(v);
        }
        for (p, v) in self.levels[k].patches.iter_mut().zip(fills) {
            for (l, q) in v {
                p.block.data[l] = q;
            }
        }
        Ok(())
    }

    /// Overwrite the cells of level `k` covered by level `k+1` with the
    /// mean of their children.
    pub fn average_down(&mut self, k: usize) -> Result<()> {
        if k + 1 >= self.levels.len() {
            return Ok(());
        }
        let (tc, tf) = (self.levels[k].t, self.levels[k + 1].t);
        if (tc - tf).abs() > self.time_tol() {
            return Err(SolverError::TimeMismatch { fine: tf, coarse: tc });
        }
        let dim = self.dim;
        let w = 1.0 / (1u32 << dim) as f64;
        let (lo, hi) = self.levels.split_at_mut(k + 1);
        let coarse = &mut lo[k];
        let fine = &hi[0];
        for fp in &fine.patches {
            for ic in fp.bx.coarsen(dim).cells() {
                let mut s = ConservedState::ZERO;
                for o in child_offsets(dim) {
                    let c = [2 * ic[0] + o[0], 2 * ic[1] + o[1], if dim == 3 { 2 * ic[2] + o[2] } else { 0 }];
                    s += fp.get(c);
                }
                let p = coarse.owner(ic).ok_or(SolverError::NestingViolation { level: k + 1 })?;
                coarse.patches[p].set(ic, s * w);
            }
        }
        Ok(())
    }

    /// Volume-weighted totals over the cells holding the finest data.
    pub fn composite_total(&self) -> ConservedState {
        let mut tot = ConservedState::ZERO;
        for (k, lev) in self.levels.iter().enumerate() {
            let vol = self.dx(k).powi(self.dim as i32);
            let mut s = ConservedState::ZERO;
            for p in &lev.patches {
                for ix in p.bx.cells() {
                    if !self.is_covered(k, ix) {
                        s += p.get(ix);
                    }
                }
            }
            tot += s * vol;
        }
        tot
    }

    /// Proper nesting: each level's patches lie inside the next coarser
    /// level's cells, at least two coarse cells away from its interior
    /// boundary. Also checks disjointness and alignment.
    pub fn check_nesting(&self) -> Result<()> {
        let cover0 = self.levels[0].coverage(self.dim);
        if cover0.count() != cover0.domain().volume() {
            return Err(SolverError::NestingViolation { level: 0 });
        }
        for k in 1..self.levels.len() {
            let allowed = self.levels[k - 1].coverage(self.dim).erode(2, self.periodic());
            let mut seen = Mask::new(self.dim, self.n(k));
            for p in &self.levels[k].patches {
                let aligned = (0..self.dim).all(|a| p.bx.lo[a] % 2 == 0 && p.bx.hi[a] % 2 == 0);
                if !aligned || !p.bx.coarsen(self.dim).cells().all(|c| allowed.get(c)) {
                    return Err(SolverError::NestingViolation { level: k });
                }
                for ix in p.bx.cells() {
                    if seen.get(ix) {
                        return Err(SolverError::NestingViolation { level: k });
                    }
                    seen.set(ix, true);
                }
            }
        }
        Ok(())
    }

    /// Uniform grid at the resolution of level `k`, holding the finest
    /// available data averaged or injected onto it.
    pub fn to_uniform(&self, k: usize) -> Result<UniformGrid> {
        let lvl = self.level_number(k);
        let mut g = UniformGrid::new(self.dim, lvl, self.lower, self.extent, self.gas);
        g.t = self.levels[0].t;
        for ix in g.block.interior().collect::<Vec<_>>() {
            g.block.set(ix, self.composite_value(k, ix)?);
        }
        Ok(g)
    }

    /// Finest-data value of cell `ix` at level `k`: averaged from finer
    /// levels where covered, piecewise constant from coarser ones.
    fn composite_value(&self, k: usize, ix: [i64; 3]) -> Result<ConservedState> {
        if k < self.levels.len() {
            if let Some(q) = self.levels[k].value(ix) {
                return Ok(q);
            }
        }
        // climb to the finest coarser level holding the cell
        let mut j = ix;
        let mut kk = k;
        while kk > 0 {
            j = self.parent(j);
            kk -= 1;
            if kk < self.levels.len() {
                if let Some(q) = self.levels[kk].value(j) {
                    return Ok(q);
                }
            }
        }
        Err(SolverError::NestingViolation { level: k })
    }

    /// Plain-text outlines of all patches: `level lower-corner...
    /// upper-corner...` in physical coordinates.
    pub fn patch_outlines(&self) -> String {
        let mut out = String::from("# level lower-corner... upper-corner...\n");
        for (k, lev) in self.levels.iter().enumerate() {
            let h = self.dx(k);
            for p in &lev.patches {
                let mut line = format!("{}", self.level_number(k));
                for a in 0..self.dim {
                    line.push_str(&format!(" {}", self.lower + p.bx.lo[a] as f64 * h));
                }
                for a in 0..self.dim {
                    line.push_str(&format!(" {}", self.lower + p.bx.hi[a] as f64 * h));
                }
                line.push('\n');
                out.push_str(&line);
            }
        }
        out
    }

    /// L1 error per component: each level contributes its cells not
    /// covered by the next level, weighted by its cell volume.
    pub fn l1_error(&self, reference: &UniformGrid) -> Result<[f64; NVAR]> {
        let top = self.level_number(self.depth());
        if reference.level < top || reference.dim() != self.dim {
            return Err(SolverError::LevelMismatch { have: reference.level, need: top });
        }
        let mut e = [0.0; NVAR];
        let mut r = reference.clone();
        for k in (0..self.levels.len()).rev() {
            r = restrict_to_level(&r, self.level_number(k))?;
            let vol = self.dx(k).powi(self.dim as i32);
            for p in &self.levels[k].patches {
                for ix in p.bx.cells() {
                    if self.is_covered(k, ix) {
                        continue;
                    }
                    let d = p.get(ix) - r.block.get(ix);
                    for c in 0..NVAR {
                        e[c] += d[c].abs() * vol;
                    }
                }
            }
        }
        Ok(e)
    }
}
