//! Flat evaluation plan for one time step of a set of leaves.
//!
//! Slots `0..n_active` hold the evolving leaves. Further slots hold values
//! the stencils need, appended in dependency order: internal averages
//! (mean of children), virtual cells (prediction from the coarser level),
//! mirrored ghosts at reflective walls, and for local time stepping the
//! frozen or time-interpolated values of leaves outside the active set.
//! Each face is computed once, at the finer of its two sides, and its flux
//! is applied to the owning leaves with area/volume weights so the update
//! is conservative across level jumps. Fluxes owed to leaves outside the
//! active set go to a register instead.

use rustc_hash::FxHashMap;

use super::predict::{child_stencil, Idx};
use super::tree::{child_of, pack, parent_of, unpack, MrTree};
use crate::error::{Result, SolverError};
use crate::euler::{primitives, ConservedState, Primitive};
use crate::scheme::{muscl_face_flux, SchemeConfig};

const NONE: u32 = u32::MAX;

/// Accumulated time-integrated flux corrections per leaf `(level, key)`.
pub(crate) type Register = FxHashMap<(u32, u64), ConservedState>;

#[derive(Clone, Copy, Debug)]
enum Derived {
    Mean { slot: u32, first: u32, n: u8 },
    Combo { slot: u32, first: u32, n: u8 },
    Flip { slot: u32, src: u32, axes: u8 },
    /// `(1 - θ) a + θ b` with θ taken per effective level.
    Lerp { slot: u32, a: u32, b: u32, level: u8 },
}

#[derive(Clone, Copy, Debug)]
struct RegEntry {
    level: u32,
    key: u64,
    w: f64,
}

#[derive(Clone, Copy, Debug)]
struct Face {
    st: [u32; 4],
    axis: u8,
    lo: (u32, f64),
    hi: (u32, f64),
    reg: [Option<RegEntry>; 2],
}

#[derive(Clone, Copy, Debug)]
enum Source {
    Current,
    Old,
}

pub(crate) struct Plan {
    /// Leaves with levels in this inclusive range evolve.
    active: (u32, u32),
    n_active: usize,
    keys: Vec<(u32, Idx)>,
    derived: Vec<Derived>,
    loads: Vec<(u32, Source)>,
    pool: Vec<(u32, f64)>,
    faces: Vec<Face>,
    lookup: Vec<FxHashMap<u64, u32>>,
    /// Leaves below this level share the floor's time step.
    floor: u32,
    pub n_virtual: usize,
}

impl Plan {
    /// Plan for the leaves with levels in `active`. Leaves of finer levels
    /// are read frozen, coarser ones interpolated in time.
    pub fn new(tree: &MrTree, active: (u32, u32), floor: u32) -> Self {
        let levels = tree.max_level as usize + 1;
        let mut plan = Plan {
            active,
            n_active: 0,
            keys: Vec::new(),
            derived: Vec::new(),
            loads: Vec::new(),
            pool: Vec::new(),
            faces: Vec::new(),
            lookup: (0..levels).map(|_| FxHashMap::default()).collect(),
            floor,
            n_virtual: 0,
        };
        for l in active.0..=active.1.min(tree.max_level) {
            for (k, n) in &tree.levels[l as usize] {
                if n.leaf {
                    let s = plan.keys.len() as u32;
                    plan.keys.push((l, unpack(*k)));
                    plan.lookup[l as usize].insert(*k, s);
                }
            }
        }
        plan.n_active = plan.keys.len();
        for s in 0..plan.n_active {
            let (l, ix) = plan.keys[s];
            plan.add_leaf_faces(tree, l, ix);
        }
        plan
    }

    pub fn n_active(&self) -> usize {
        self.n_active
    }

    fn is_active(&self, level: u32) -> bool {
        level >= self.active.0 && level <= self.active.1
    }

    fn push(&mut self, level: u32, ix: Idx) -> u32 {
        let s = self.keys.len() as u32;
        self.keys.push((level, ix));
        s
    }

    /// Slot holding the value of cell `ix` (possibly outside the domain) at
    /// `level`, creating derived slots on demand.
    fn slot_for(&mut self, tree: &MrTree, level: u32, ix: Idx) -> u32 {
        match tree.wrap(level, ix) {
            Some(w) => self.slot_in_domain(tree, level, w),
            None => {
                let n = tree.n_at(level) as i64;
                let mut img = ix;
                let mut axes = 0u8;
                for a in 0..tree.dim {
                    let (j, flip) = tree.bc.image(a, ix[a] as i64, n);
                    img[a] = j as i32;
                    if flip {
                        axes |= 1 << a;
                    }
                }
                let src = self.slot_in_domain(tree, level, img);
                if axes == 0 {
                    return src;
                }
                let s = self.push(level, ix);
                self.derived.push(Derived::Flip { slot: s, src, axes });
                s
            }
        }
    }

    fn slot_in_domain(&mut self, tree: &MrTree, level: u32, ix: Idx) -> u32 {
        let key = pack(ix);
        if let Some(&s) = self.lookup[level as usize].get(&key) {
            return s;
        }
        let s = match tree.get(level, ix) {
            Some(n) if !n.leaf => {
                let nc = 1usize << tree.dim;
                let mut kids = [0u32; 8];
                for (c, k) in kids.iter_mut().enumerate().take(nc) {
                    *k = self.slot_in_domain(tree, level + 1, child_of(ix, c));
                }
                let first = self.pool.len() as u32;
                self.pool.extend(kids[..nc].iter().map(|&k| (k, 1.0 / nc as f64)));
                let s = self.push(level, ix);
                self.derived.push(Derived::Mean { slot: s, first, n: nc as u8 });
                s
            }
            Some(_) => {
                debug_assert!(!self.is_active(level));
                let cur = self.push(level, ix);
                self.loads.push((cur, Source::Current));
                if level > self.active.1 {
                    cur
                } else {
                    // coarser leaf, already advanced past this time
                    let old = self.push(level, ix);
                    self.loads.push((old, Source::Old));
                    let s = self.push(level, ix);
                    let eff = level.max(self.floor) as u8;
                    self.derived.push(Derived::Lerp { slot: s, a: old, b: cur, level: eff });
                    s
                }
            }
            None => {
                let p = parent_of(ix);
                let c = (ix[0] & 1) as usize | ((ix[1] & 1) as usize) << 1 | ((ix[2] & 1) as usize) << 2;
                let st = child_stencil(tree.dim, tree.n_at(level - 1), p, c, &tree.bc);
                let mut terms = [(0u32, 0.0f64); 27];
                for (t, (j, w)) in terms.iter_mut().zip(st.iter()) {
                    *t = (self.slot_in_domain(tree, level - 1, *j), *w);
                }
                let first = self.pool.len() as u32;
                self.pool.extend_from_slice(&terms[..st.len]);
                let s = self.push(level, ix);
                self.n_virtual += 1;
                self.derived.push(Derived::Combo { slot: s, first, n: st.len as u8 });
                s
            }
        };
        self.lookup[level as usize].insert(key, s);
        s
    }

    /// Owner and register entry of the face side `ix` at `level`; `sign`
    /// is -1 for the lower side and +1 for the upper side.
    fn owner(&self, tree: &MrTree, level: u32, ix: Idx, sign: f64) -> ((u32, f64), Option<RegEntry>) {
        let Some(w) = tree.wrap(level, ix) else { return ((NONE, 0.0), None) };
        match tree.get(level, w) {
            Some(n) if n.leaf => {
                let s = self.lookup[level as usize][&pack(w)];
                debug_assert!((s as usize) < self.n_active);
                ((s, sign / tree.dx(level)), None)
            }
            Some(_) => ((NONE, 0.0), None),
            None => {
                // virtual cell: the flux through its face belongs to the coarse parent leaf
                let p = parent_of(w);
                let wt = sign / ((1u32 << (tree.dim - 1)) as f64 * tree.dx(level - 1));
                if self.is_active(level - 1) {
                    ((self.lookup[level as usize - 1][&pack(p)], wt), None)
                } else {
                    ((NONE, 0.0), Some(RegEntry { level: level - 1, key: pack(p), w: wt }))
                }
            }
        }
    }

    /// Faces of the active leaf `ix`: its upper faces and the lower faces
    /// whose neighbor is not a leaf. Faces next to an internal node belong
    /// to the finer level when that level is active; otherwise a coarse
    /// estimate is used now and cancelled later through the register.
    fn add_leaf_faces(&mut self, tree: &MrTree, level: u32, ix: Idx) {
        for axis in 0..tree.dim {
            for side in [1i32, -1] {
                let mut nb = ix;
                nb[axis] += side;
                let mut estimate = false;
                if let Some(w) = tree.wrap(level, nb) {
                    match tree.get(level, w) {
                        Some(n) if n.leaf => {
                            if side == -1 {
                                continue;
                            }
                        }
                        Some(_) => {
                            if self.is_active(level + 1) {
                                continue;
                            }
                            estimate = true;
                        }
                        None => {}
                    }
                }
                let lower = if side == 1 { ix } else { nb };
                let mut face = self.face(tree, level, axis, lower);
                if estimate {
                    let own = if side == 1 { 0 } else { 1 };
                    let w = if own == 0 { face.lo.1 } else { face.hi.1 };
                    face.reg[own] = Some(RegEntry { level, key: pack(ix), w: -w });
                }
                self.faces.push(face);
            }
        }
    }

    /// Face between `lower` and `lower + e_axis` at `level`.
    fn face(&mut self, tree: &MrTree, level: u32, axis: usize, lower: Idx) -> Face {
        let e = |k: i32| {
            let mut j = lower;
            j[axis] += k;
            j
        };
        let st = [
            self.slot_for(tree, level, e(-1)),
            self.slot_for(tree, level, e(0)),
            self.slot_for(tree, level, e(1)),
            self.slot_for(tree, level, e(2)),
        ];
        let (lo, rl) = self.owner(tree, level, e(0), -1.0);
        let (hi, rh) = self.owner(tree, level, e(1), 1.0);
        Face { st, axis: axis as u8, lo, hi, reg: [rl, rh] }
    }

    /// Slot vector with active and loaded values; `old` holds the saved
    /// start-of-step states of coarser leaves.
    pub fn load(&self, tree: &MrTree, old: &[FxHashMap<u64, ConservedState>]) -> Vec<ConservedState> {
        let mut q = vec![ConservedState::ZERO; self.keys.len()];
        for s in 0..self.n_active {
            let (l, ix) = self.keys[s];
            q[s] = tree.get(l, ix).unwrap().q;
        }
        for &(s, src) in &self.loads {
            let (l, ix) = self.keys[s as usize];
            q[s as usize] = match src {
                Source::Current => tree.get(l, ix).unwrap().q,
                Source::Old => old[l as usize][&pack(ix)],
            };
        }
        q
    }

    pub fn store(&self, tree: &mut MrTree, q: &[ConservedState]) {
        for s in 0..self.n_active {
            let (l, ix) = self.keys[s];
            tree.get_mut(l, ix).unwrap().q = q[s];
        }
    }

    /// Remember the active values as start-of-step states.
    pub fn save_old(&self, q: &[ConservedState], old: &mut [FxHashMap<u64, ConservedState>]) {
        for s in 0..self.n_active {
            let (l, ix) = self.keys[s];
            old[l as usize].insert(pack(ix), q[s]);
        }
    }

    /// Recompute every derived slot in dependency order.
    fn fill_derived(&self, q: &mut [ConservedState], theta: &[f64]) {
        for d in &self.derived {
            match *d {
                Derived::Mean { slot, first, n } | Derived::Combo { slot, first, n } => {
                    let mut s = ConservedState::ZERO;
                    for &(k, w) in &self.pool[first as usize..first as usize + n as usize] {
                        s += q[k as usize] * w;
                    }
                    q[slot as usize] = s;
                }
                Derived::Flip { slot, src, axes } => {
                    let mut v = q[src as usize];
                    for a in 0..3 {
                        if axes & (1 << a) != 0 {
                            v = v.reflected(a);
                        }
                    }
                    q[slot as usize] = v;
                }
                Derived::Lerp { slot, a, b, level } => {
                    let th = theta[level as usize];
                    q[slot as usize] = q[a as usize] * (1.0 - th) + q[b as usize] * th;
                }
            }
        }
    }

    /// Primitive values of every slot. Active slots must be physical;
    /// non-physical derived values fall back to their dominant source and
    /// are counted.
    fn primitives(&self, tree: &MrTree, q: &[ConservedState], w: &mut Vec<Primitive>) -> Result<usize> {
        w.clear();
        let mut bad = false;
        for (s, v) in q.iter().enumerate() {
            match primitives(v, &tree.gas) {
                Ok(p) => w.push(p),
                Err(e) => {
                    if s < self.n_active {
                        let (l, ix) = self.keys[s];
                        return Err(e.at(|| format!("leaf {ix:?} on level {l}")));
                    }
                    w.push(Primitive::default());
                    bad = true;
                }
            }
        }
        if bad {
            self.repair(w)
        } else {
            Ok(0)
        }
    }

    fn repair(&self, w: &mut [Primitive]) -> Result<usize> {
        let mut n = 0;
        for d in &self.derived {
            let (slot, src) = match *d {
                Derived::Mean { slot, first, n } | Derived::Combo { slot, first, n } => {
                    // the largest weight marks the parent (or the first child)
                    let terms = &self.pool[first as usize..first as usize + n as usize];
                    (slot, terms.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0)
                }
                Derived::Flip { slot, src, .. } => (slot, src),
                Derived::Lerp { slot, a, .. } => (slot, a),
            };
            if !w[slot as usize].is_physical() {
                let p = w[src as usize];
                if !p.is_physical() {
                    let (l, ix) = self.keys[slot as usize];
                    return Err(SolverError::NonPhysicalState { rho: p.rho(), p: p.p(), location: None }
                        .at(|| format!("derived cell {ix:?} on level {l}")));
                }
                w[slot as usize] = p;
                n += 1;
            }
        }
        Ok(n)
    }

    /// `rhs[s] = -div F` for the active slots. With `reg`, `dt`-weighted
    /// fluxes owed to leaves outside the active set are accumulated there.
    fn rhs(
        &self,
        cfg: &SchemeConfig,
        tree: &MrTree,
        w: &[Primitive],
        rhs: &mut [ConservedState],
        mut reg: Option<(&mut Register, f64)>,
    ) -> usize {
        for r in rhs.iter_mut() {
            *r = ConservedState::ZERO;
        }
        let mut fb = 0;
        for f in &self.faces {
            let st = f.st.map(|s| &w[s as usize]);
            let (flux, fallback) = muscl_face_flux(st, f.axis as usize, cfg, &tree.gas);
            fb += fallback as usize;
            if f.lo.0 != NONE {
                rhs[f.lo.0 as usize] += flux * f.lo.1;
            }
            if f.hi.0 != NONE {
                rhs[f.hi.0 as usize] += flux * f.hi.1;
            }
            if let Some((reg, dt)) = reg.as_mut() {
                for r in f.reg.iter().flatten() {
                    *reg.entry((r.level, r.key)).or_insert(ConservedState::ZERO) += flux * (r.w * *dt);
                }
            }
        }
        fb
    }

    /// One midpoint RK2 step of the active slots:
    /// `Q* = Q + dt/2 L(Q)`, `Q' = Q + dt L(Q*)`. `theta` holds the
    /// per-level interpolation weights of coarser leaves at the start and
    /// at the midpoint of the step. Returns the number of fallbacks.
    pub fn rk2(
        &self,
        tree: &MrTree,
        q: &mut [ConservedState],
        dt: f64,
        cfg: &SchemeConfig,
        theta: [&[f64]; 2],
        reg: Option<&mut Register>,
    ) -> Result<usize> {
        let na = self.n_active;
        let q0: Vec<ConservedState> = q[..na].to_vec();
        let mut w = Vec::with_capacity(q.len());
        let mut r = vec![ConservedState::ZERO; na];
        self.fill_derived(q, theta[0]);
        let mut fb = self.primitives(tree, q, &mut w)?;
        fb += self.rhs(cfg, tree, &w, &mut r, None);
        for s in 0..na {
            q[s] = q0[s] + r[s] * (0.5 * dt);
        }
        self.fill_derived(q, theta[1]);
        fb += self.primitives(tree, q, &mut w)?;
        fb += self.rhs(cfg, tree, &w, &mut r, reg.map(|g| (g, dt)));
        for s in 0..na {
            q[s] = q0[s] + r[s] * dt;
            if let Err(e) = primitives(&q[s], &tree.gas) {
                let (l, ix) = self.keys[s];
                return Err(e.at(|| format!("leaf {ix:?} on level {l}")));
            }
        }
        Ok(fb)
    }
}
