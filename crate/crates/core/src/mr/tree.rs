use rustc_hash::FxHashMap;

use super::predict::{child_stencil, project, Idx};
use crate::error::{Result, SolverError};
use crate::euler::{ConservedState, GasModel, NVAR};
use crate::grid::BoundaryCondition;
use crate::unigrid::{restrict_block, UniformGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub q: ConservedState,
    pub leaf: bool,
    /// Largest scaled detail of the children (internal nodes only).
    pub detail: f64,
    /// Number of children that are themselves internal.
    pub internal_children: u8,
}

impl Node {
    fn leaf(q: ConservedState) -> Self {
        Node { q, leaf: true, detail: 0.0, internal_children: 0 }
    }
}

/// Pack an in-domain index into a hash key.
#[inline]
pub fn pack(ix: Idx) -> u64 {
    ix[0] as u64 | (ix[1] as u64) << 21 | (ix[2] as u64) << 42
}

#[inline]
pub fn unpack(k: u64) -> Idx {
    let m = (1u64 << 21) - 1;
    [(k & m) as i32, ((k >> 21) & m) as i32, ((k >> 42) & m) as i32]
}

#[inline]
pub fn parent_of(ix: Idx) -> Idx {
    [ix[0] >> 1, ix[1] >> 1, ix[2] >> 1]
}

#[inline]
pub fn child_of(ix: Idx, c: usize) -> Idx {
    [2 * ix[0] + (c & 1) as i32, 2 * ix[1] + ((c >> 1) & 1) as i32, 2 * ix[2] + ((c >> 2) & 1) as i32]
}

/// Graded tree of cell averages on a square / cubic domain.
///
/// Grading rule: whenever a node at level ℓ has children, every cell of
/// level ℓ within Chebyshev distance 2 exists. This keeps neighboring
/// leaves within one level of each other and guarantees that the MUSCL
/// stencil of any leaf, and the prediction stencil of any virtual cell it
/// needs, is made of existing nodes.
#[derive(Clone, Debug)]
pub struct MrTree {
    pub dim: usize,
    pub max_level: u32,
    pub eps: f64,
    pub scale: [f64; NVAR],
    pub bc: BoundaryCondition,
    pub gas: GasModel,
    pub lower: f64,
    pub extent: f64,
    pub t: f64,
    pub(crate) levels: Vec<FxHashMap<u64, Node>>,
    n_leaves: usize,
}

/// How details of different components are made comparable with ε.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DetailNorm {
    /// Absolute details.
    #[default]
    Unit,
    /// Details divided by the component's max-norm at t = 0.
    MaxNorm,
}

impl DetailNorm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(DetailNorm::Unit),
            "max" => Ok(DetailNorm::MaxNorm),
            _ => Err(SolverError::Config(format!("unknown detail norm '{s}' (expected unit or max)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DetailNorm::Unit => "unit",
            DetailNorm::MaxNorm => "max",
        }
    }

    pub fn scale(&self, grid: &UniformGrid) -> [f64; NVAR] {
        match self {
            DetailNorm::Unit => [1.0; NVAR],
            DetailNorm::MaxNorm => MrTree::scale_of(grid),
        }
    }
}

impl MrTree {
    /// Per-component max-norm (1 for vanishing components).
    pub fn scale_of(grid: &UniformGrid) -> [f64; NVAR] {
        let mut s = [0.0f64; NVAR];
        for ix in grid.block.interior() {
            let q = grid.block.get(ix);
            for c in 0..NVAR {
                s[c] = s[c].max(q[c].abs());
            }
        }
        s.map(|v| if v > 0.0 { v } else { 1.0 })
    }

    /// Full pyramid over a uniform grid, followed by thresholded coarsening.
    pub fn from_uniform(grid: &UniformGrid, bc: BoundaryCondition, eps: f64, scale: [f64; NVAR]) -> Self {
        let dim = grid.dim();
        let max_level = grid.level;
        let mut levels: Vec<FxHashMap<u64, Node>> = (0..=max_level).map(|_| FxHashMap::default()).collect();
        let mut block = grid.block.clone();
        for l in (0..=max_level).rev() {
            let map = &mut levels[l as usize];
            map.reserve(block.n_interior());
            let leaf = l == max_level;
            let ic = if l + 1 < max_level { 1u8 << dim } else { 0 };
            for ix in block.interior() {
                let q = block.get(ix);
                let node = if leaf { Node::leaf(q) } else { Node { q, leaf: false, detail: 0.0, internal_children: ic } };
                map.insert(pack([ix[0] as i32, ix[1] as i32, ix[2] as i32]), node);
            }
            if l > 0 {
                block = restrict_block(&block);
            }
        }
        let n_leaves = levels[max_level as usize].len();
        let mut tree = MrTree {
            dim,
            max_level,
            eps,
            scale,
            bc,
            gas: grid.gas,
            lower: grid.lower,
            extent: grid.extent,
            t: grid.t,
            levels,
            n_leaves,
        };
        tree.compute_details();
        tree.coarsen();
        tree
    }

    #[inline]
    pub fn n_at(&self, level: u32) -> i32 {
        1 << level
    }

    pub fn dx(&self, level: u32) -> f64 {
        self.extent / self.n_at(level) as f64
    }

    /// Fold an index into the domain across periodic axes; `None` outside a
    /// non-periodic boundary.
    #[inline]
    pub fn wrap(&self, level: u32, mut ix: Idx) -> Option<Idx> {
        let n = self.n_at(level);
        for a in 0..self.dim {
            if ix[a] < 0 || ix[a] >= n {
                if self.bc.is_periodic(a) {
                    ix[a] = ix[a].rem_euclid(n);
                } else {
                    return None;
                }
            }
        }
        Some(ix)
    }

    #[inline]
    pub fn get(&self, level: u32, ix: Idx) -> Option<&Node> {
        self.levels[level as usize].get(&pack(ix))
    }

    #[inline]
    pub(crate) fn get_mut(&mut self, level: u32, ix: Idx) -> Option<&mut Node> {
        self.levels[level as usize].get_mut(&pack(ix))
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn n_nodes(&self) -> usize {
        self.levels.iter().map(|m| m.len()).sum()
    }

    /// In-domain cells within Chebyshev distance `r` of `ix` (wrapped).
    pub(crate) fn neighborhood(&self, level: u32, ix: Idx, r: i32) -> impl Iterator<Item = Idx> + '_ {
        let rz = if self.dim == 3 { r } else { 0 };
        (-rz..=rz).flat_map(move |dz| {
            (-r..=r).flat_map(move |dy| {
                (-r..=r).filter_map(move |dx| self.wrap(level, [ix[0] + dx, ix[1] + dy, ix[2] + dz]))
            })
        })
    }

    /// Leaves sorted by (level, index).
    pub fn sorted_leaves(&self) -> Vec<(u32, Idx)> {
        let mut v = Vec::with_capacity(self.n_leaves);
        for (l, m) in self.levels.iter().enumerate() {
            let mut keys: Vec<Idx> = m.iter().filter(|(_, n)| n.leaf).map(|(k, _)| unpack(*k)).collect();
            keys.sort_by_key(|ix| (ix[2], ix[1], ix[0]));
            v.extend(keys.into_iter().map(|ix| (l as u32, ix)));
        }
        v
    }

    /// All nodes sorted by (level, index).
    pub fn sorted_nodes(&self) -> Vec<(u32, Idx, Node)> {
        let mut v = Vec::with_capacity(self.n_nodes());
        for (l, m) in self.levels.iter().enumerate() {
            let mut keys: Vec<(Idx, Node)> = m.iter().map(|(k, n)| (unpack(*k), *n)).collect();
            keys.sort_by_key(|(ix, _)| (ix[2], ix[1], ix[0]));
            v.extend(keys.into_iter().map(|(ix, n)| (l as u32, ix, n)));
        }
        v
    }

    pub(crate) fn predict_child(&self, level: u32, ix: Idx, c: usize) -> ConservedState {
        let s = child_stencil(self.dim, self.n_at(level), ix, c, &self.bc);
        s.apply(|j| self.get(level, j).expect("prediction stencil outside the graded tree").q)
    }

    /// Split the leaf `ix` at `level`, first splitting whatever coarser
    /// leaves the grading rule requires.
    pub fn split(&mut self, level: u32, ix: Idx) {
        debug_assert!(level < self.max_level);
        match self.get(level, ix) {
            Some(n) if n.leaf => {}
            Some(_) => return,
            None => panic!("split of a missing node {ix:?} at level {level}"),
        }
        if level > 0 {
            let p = parent_of(ix);
            let around: Vec<Idx> = self.neighborhood(level - 1, p, 1).collect();
            for nb in around {
                let leaf = self.get(level - 1, nb).expect("grading violated above a split").leaf;
                if leaf {
                    self.split(level - 1, nb);
                }
            }
        }
        let nc = 1usize << self.dim;
        let mut kids = [ConservedState::ZERO; 8];
        for (c, kid) in kids.iter_mut().enumerate().take(nc) {
            *kid = self.predict_child(level, ix, c);
        }
        let map = &mut self.levels[level as usize + 1];
        for (c, kid) in kids.iter().enumerate().take(nc) {
            map.insert(pack(child_of(ix, c)), Node::leaf(*kid));
        }
        let node = self.get_mut(level, ix).unwrap();
        node.leaf = false;
        node.detail = 0.0;
        node.internal_children = 0;
        if level > 0 {
            self.get_mut(level - 1, parent_of(ix)).unwrap().internal_children += 1;
        }
        self.n_leaves += nc - 1;
    }

    /// Make sure the cell exists, splitting ancestors as needed.
    pub fn ensure_exists(&mut self, level: u32, ix: Idx) {
        if self.get(level, ix).is_some() {
            return;
        }
        let p = parent_of(ix);
        self.ensure_exists(level - 1, p);
        self.split(level - 1, p);
    }

    pub(crate) fn merge(&mut self, level: u32, ix: Idx) {
        let nc = 1usize << self.dim;
        let map = &mut self.levels[level as usize + 1];
        for c in 0..nc {
            map.remove(&pack(child_of(ix, c)));
        }
        let node = self.get_mut(level, ix).unwrap();
        node.leaf = true;
        node.detail = 0.0;
        if level > 0 {
            self.get_mut(level - 1, parent_of(ix)).unwrap().internal_children -= 1;
        }
        self.n_leaves -= nc - 1;
    }

    /// Refresh internal averages bottom-up.
    pub fn project_all(&mut self) {
        let nc = 1usize << self.dim;
        for l in (0..self.max_level).rev() {
            let (lo, hi) = self.levels.split_at_mut(l as usize + 1);
            let fine = &hi[0];
            for (k, node) in lo[l as usize].iter_mut() {
                if node.leaf {
                    continue;
                }
                let ix = unpack(*k);
                let mut s = ConservedState::ZERO;
                for c in 0..nc {
                    s += fine[&pack(child_of(ix, c))].q;
                }
                node.q = s * (1.0 / nc as f64);
            }
        }
    }

    /// Scaled detail of one internal node.
    pub fn detail_of(&self, level: u32, ix: Idx) -> f64 {
        let nc = 1usize << self.dim;
        let mut d = 0.0f64;
        for c in 0..nc {
            let pred = self.predict_child(level, ix, c);
            let actual = self.get(level + 1, child_of(ix, c)).unwrap().q;
            for k in 0..NVAR {
                d = d.max((actual[k] - pred[k]).abs() / self.scale[k]);
            }
        }
        d
    }

    pub fn compute_details(&mut self) {
        for l in 0..self.max_level {
            let keys: Vec<u64> = self.levels[l as usize].iter().filter(|(_, n)| !n.leaf).map(|(k, _)| *k).collect();
            for k in keys {
                let d = self.detail_of(l, unpack(k));
                self.levels[l as usize].get_mut(&k).unwrap().detail = d;
            }
        }
    }

    /// Split every leaf below the finest level whose parent carries a
    /// detail of at least ε.
    pub fn refine(&mut self) -> usize {
        let mut todo = Vec::new();
        for l in 1..self.max_level {
            for (k, n) in &self.levels[l as usize] {
                if n.leaf {
                    let ix = unpack(*k);
                    if self.get(l - 1, parent_of(ix)).unwrap().detail >= self.eps {
                        todo.push((l, ix));
                    }
                }
            }
        }
        let before = self.n_leaves;
        for (l, ix) in todo {
            self.split(l, ix);
        }
        self.n_leaves - before
    }

    /// Whether merging the children of `ix` keeps the tree graded.
    fn can_merge(&self, level: u32, ix: Idx) -> bool {
        self.neighborhood(level, ix, 1).all(|nb| self.get(level, nb).map_or(true, |n| n.internal_children == 0))
    }

    /// Merge sibling groups with details below ε, finest level first.
    /// Details must be current.
    pub fn coarsen(&mut self) -> usize {
        let before = self.n_leaves;
        for l in (0..self.max_level).rev() {
            let mut cands: Vec<Idx> = self.levels[l as usize]
                .iter()
                .filter(|(_, n)| !n.leaf && n.internal_children == 0 && n.detail < self.eps)
                .map(|(k, _)| unpack(*k))
                .collect();
            cands.sort_by_key(|ix| (ix[2], ix[1], ix[0]));
            for ix in cands {
                if self.can_merge(l, ix) {
                    self.merge(l, ix);
                }
            }
        }
        before - self.n_leaves
    }

    /// Check the grading rule and the leaf-level jump between face
    /// neighbors.
    pub fn check_graded(&self) -> std::result::Result<(), String> {
        for l in 0..self.max_level {
            for (k, n) in &self.levels[l as usize] {
                if n.leaf {
                    continue;
                }
                let ix = unpack(*k);
                for nb in self.neighborhood(l, ix, 2) {
                    if self.get(l, nb).is_none() {
                        return Err(format!("internal node {ix:?} at level {l} lacks neighbor {nb:?}"));
                    }
                }
            }
        }
        for (l, ix) in self.sorted_leaves() {
            for a in 0..self.dim {
                for s in [-1, 1] {
                    let mut j = ix;
                    j[a] += s;
                    if let Some(j) = self.wrap(l, j) {
                        if let Some(n) = self.get(l, j) {
                            if !n.leaf {
                                for c in 0..1 << self.dim {
                                    if !self.get(l + 1, child_of(j, c)).unwrap().leaf {
                                        return Err(format!("leaf {ix:?} at {l} next to level {} leaves", l + 2));
                                    }
                                }
                            }
                        } else if self.get(l - 1, parent_of(j)).map_or(true, |p| !p.leaf) {
                            return Err(format!("leaf {ix:?} at {l} next to a leaf two levels coarser"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Internal averages equal child means within `tol`.
    pub fn check_projection(&self, tol: f64) -> bool {
        let nc = 1usize << self.dim;
        (0..self.max_level).all(|l| {
            self.levels[l as usize].iter().filter(|(_, n)| !n.leaf).all(|(k, n)| {
                let ix = unpack(*k);
                let kids: Vec<_> = (0..nc).map(|c| self.get(l + 1, child_of(ix, c)).unwrap().q).collect();
                let m = project(&kids);
                (0..NVAR).all(|c| (m[c] - n.q[c]).abs() <= tol * n.q.abs_max().max(1.0))
            })
        })
    }

    /// Complete uniform grid at `level`: existing nodes are copied, missing
    /// cells are predicted recursively from the level above.
    pub fn leaf_projection_to_uniform(&self, level: u32) -> Result<UniformGrid> {
        if level > self.max_level {
            return Err(SolverError::LevelMismatch { have: self.max_level, need: level });
        }
        let mut g = UniformGrid::new(self.dim, 0, self.lower, self.extent, self.gas);
        g.t = self.t;
        g.block.set([0, 0, 0], self.get(0, [0, 0, 0]).unwrap().q);
        for l in 1..=level {
            let mut fine = UniformGrid::new(self.dim, l, self.lower, self.extent, self.gas);
            fine.t = self.t;
            let n_c = self.n_at(l - 1);
            let map = &self.levels[l as usize];
            for ix in fine.block.interior().collect::<Vec<_>>() {
                let fi = [ix[0] as i32, ix[1] as i32, ix[2] as i32];
                let q = match map.get(&pack(fi)) {
                    Some(n) => n.q,
                    None => {
                        let p = parent_of(fi);
                        let c = (fi[0] & 1) as usize | ((fi[1] & 1) as usize) << 1 | ((fi[2] & 1) as usize) << 2;
                        child_stencil(self.dim, n_c, p, c, &self.bc)
                            .apply(|j| g.block.get([j[0] as i64, j[1] as i64, j[2] as i64]))
                    }
                };
                fine.block.set(ix, q);
            }
            g = fine;
        }
        Ok(g)
    }

    /// Volume-weighted sum of the conserved quantities over the leaves.
    pub fn total(&self) -> ConservedState {
        let mut s = ConservedState::ZERO;
        for (l, m) in self.levels.iter().enumerate() {
            let vol = self.dx(l as u32).powi(self.dim as i32);
            let mut ls = ConservedState::ZERO;
            for n in m.values().filter(|n| n.leaf) {
                ls += n.q;
            }
            s += ls * vol;
        }
        s
    }

    /// Text dump: one `level i j k leaf|internal q...` record per node in
    /// (level, index) order. Floats use shortest round-trip formatting.
    pub fn snapshot_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# mr-tree dim={} L={} t={} eps={}\n", self.dim, self.max_level, self.t, self.eps));
        for (l, ix, n) in self.sorted_nodes() {
            out.push_str(&format!(
                "{l} {} {} {} {}",
                ix[0],
                ix[1],
                ix[2],
                if n.leaf { "leaf" } else { "internal" }
            ));
            for c in 0..NVAR {
                out.push_str(&format!(" {}", n.q[c]));
            }
            out.push('\n');
        }
        out
    }

    /// Plain-text outlines of all leaves: `level x0 y0 [z0] size` in
    /// physical coordinates.
    pub fn leaf_outlines(&self) -> String {
        let mut out = String::from("# level lower-corner... edge\n");
        for (l, ix) in self.sorted_leaves() {
            let h = self.dx(l);
            let mut line = format!("{l}");
            for &i in ix.iter().take(self.dim) {
                line.push_str(&format!(" {}", self.lower + i as f64 * h));
            }
            line.push_str(&format!(" {h}\n"));
            out.push_str(&line);
        }
        out
    }
}
