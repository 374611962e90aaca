//! Scaled-gradient flagging and regridding of the levels above a given one.

use super::boxes::{clip_to, cluster, IBox, Mask};
use super::hierarchy::{AmrLevel, PatchHierarchy};
use crate::cases::CaseSpec;
use crate::error::{Result, SolverError};
use crate::euler::{ConservedState, GasModel};
use crate::unigrid::child_offsets;

/// Flag interior cells of `level` where a forward difference of density
/// or pressure exceeds its threshold, then add a one-cell buffer. Ghosts
/// must be filled.
pub fn flag_cells(
    level: &AmrLevel,
    dim: usize,
    gas: &GasModel,
    eps_rho: f64,
    eps_p: f64,
    periodic: [bool; 3],
) -> Mask {
    let mut m = Mask::new(dim, level.n);
    let offsets: Vec<[i64; 3]> = child_offsets(dim).skip(1).collect();
    let w = |q: ConservedState| (q.rho(), q.pressure(gas));
    for p in &level.patches {
        let b = &p.block;
        for l in b.interior() {
            let (r0, p0) = w(b.get(l));
            let hit = offsets.iter().any(|o| {
                let (r1, p1) = w(b.get([l[0] + o[0], l[1] + o[1], l[2] + o[2]]));
                (r1 - r0).abs() > eps_rho || (p1 - p0).abs() > eps_p
            });
            if hit {
                m.set([l[0] + p.bx.lo[0], l[1] + p.bx.lo[1], l[2] + p.bx.lo[2]], true);
            }
        }
    }
    m.dilate(1, periodic)
}

impl PatchHierarchy {
    /// Rebuild every level above `k0` from fresh flags, top-down, keeping
    /// proper nesting. Level `k0` itself is not modified; its ghosts must
    /// be filled.
    pub fn remesh(&mut self, k0: usize) -> Result<()> {
        self.remesh_from(k0, None)
    }

    /// As `remesh`; cells not present before are sampled from `init`
    /// when given, else interpolated from the new coarser level.
    pub(crate) fn remesh_from(&mut self, k0: usize, init: Option<&CaseSpec>) -> Result<()> {
        let kmax = self.max_depth;
        if k0 >= kmax {
            return Ok(());
        }
        let dim = self.dim;
        let per = self.periodic();
        let top_old = self.depth().min(kmax - 1);
        for l in k0 + 1..=top_old {
            let t = self.levels[l].t;
            self.sync_ghosts(l, t)?;
        }

        // largest regions where level l may be flagged so that level l+1
        // stays two cells inside level l
        let mut allowed = vec![self.levels[k0].coverage(dim).erode(2, per)];
        for l in k0 + 1..kmax {
            let next = allowed[l - 1 - k0].refine().erode(2, per);
            allowed.push(next);
        }

        // boxes of level l+1, in level-l cells
        let mut new_boxes: Vec<Vec<IBox>> = vec![Vec::new(); kmax - k0];
        let mut required: Option<Mask> = None;
        for l in (k0..kmax).rev() {
            let mut flags = if l <= self.depth() {
                flag_cells(&self.levels[l], dim, &self.gas, self.params.eps_rho, self.params.eps_p, per)
            } else {
                Mask::new(dim, self.n(l))
            };
            if let Some(r) = required.take() {
                flags.or(&r);
            }
            let a = &allowed[l - k0];
            flags.and(a);
            if flags.is_empty() {
                continue;
            }
            let boxes = clip_to(cluster(&flags, &flags.domain(), self.params.eta), &flags, a);
            if l > k0 {
                let mut m = Mask::new(dim, self.n(l));
                for b in &boxes {
                    m.fill_box(b, true);
                }
                required = Some(m.dilate(2, per).coarsen());
            }
            new_boxes[l - k0] = boxes;
        }

        let old = self.levels.split_off(k0 + 1);
        for l in k0..kmax {
            let boxes = &new_boxes[l - k0];
            if boxes.is_empty() {
                break;
            }
            let t = self.levels[l].t;
            let fine: Vec<IBox> = boxes.iter().map(|b| b.refine(dim)).collect();
            let mut lev = AmrLevel::new(dim, self.n(l + 1), fine, t);
            let prev = old.get(l - k0);
            let lvl = self.level_number(l + 1);
            for p in 0..lev.patches.len() {
                let bx = lev.patches[p].bx;
                for ix in bx.cells() {
                    let q = match prev.and_then(|o| o.value(ix)) {
                        Some(q) => q,
                        None => match init {
                            Some(case) => case.initial_primitive(case.point(lvl, ix)).to_conserved(&self.gas),
                            None => self.interpolate(l, ix, t)?,
                        },
                    };
                    lev.patches[p].set(ix, q);
                }
            }
            self.levels.push(lev);
        }
        if self.levels.len() > kmax + 1 {
            return Err(SolverError::NestingViolation { level: kmax + 1 });
        }
        Ok(())
    }
}
