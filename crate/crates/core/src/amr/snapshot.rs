//! Binary hierarchy snapshots.
//!
//! Layout, all little-endian: magic `AFVHIER\0`, u32 version, u32 d,
//! u32 base level, f64 γ, f64 lower corner, f64 extent, u32 level count;
//! per level f64 t and u32 patch count; per patch (in lexicographic box
//! order) 3 × u32 lower and 3 × u32 upper corner followed by the d+2
//! conserved components of every cell, x fastest, as in grid snapshots.

use super::boxes::IBox;
use super::hierarchy::PatchHierarchy;
use crate::error::{Result, SolverError};
use crate::euler::{ConservedState, GasModel};
use crate::io::{get_state, put_f64, put_state, put_u32, Reader};

pub const HIERARCHY_MAGIC: &[u8; 8] = b"AFVHIER\0";
const VERSION: u32 = 1;

/// Plain data of a hierarchy: per level its time and patches.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchySnapshot {
    pub dim: usize,
    pub base_level: u32,
    pub gas: GasModel,
    pub lower: f64,
    pub extent: f64,
    pub levels: Vec<(f64, Vec<(IBox, Vec<ConservedState>)>)>,
}

impl PatchHierarchy {
    pub fn snapshot(&self) -> HierarchySnapshot {
        let levels = self
            .levels
            .iter()
            .map(|l| {
                let mut ps: Vec<_> = l.patches.iter().map(|p| (p.bx, p.block.interior_values())).collect();
                ps.sort_by(|a, b| a.0.cmp(&b.0));
                (l.t, ps)
            })
            .collect();
        HierarchySnapshot {
            dim: self.dim,
            base_level: self.base_level,
            gas: self.gas,
            lower: self.lower,
            extent: self.extent,
            levels,
        }
    }
}

pub fn encode_hierarchy(h: &PatchHierarchy) -> Vec<u8> {
    encode_snapshot(&h.snapshot())
}

pub fn encode_snapshot(s: &HierarchySnapshot) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(HIERARCHY_MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, s.dim as u32);
    put_u32(&mut out, s.base_level);
    put_f64(&mut out, s.gas.gamma);
    put_f64(&mut out, s.lower);
    put_f64(&mut out, s.extent);
    put_u32(&mut out, s.levels.len() as u32);
    for (t, patches) in &s.levels {
        put_f64(&mut out, *t);
        put_u32(&mut out, patches.len() as u32);
        for (bx, data) in patches {
            for v in bx.lo.iter().chain(&bx.hi) {
                put_u32(&mut out, *v as u32);
            }
            for q in data {
                put_state(&mut out, q, s.dim);
            }
        }
    }
    out
}

pub fn decode_hierarchy(buf: &[u8]) -> Result<HierarchySnapshot> {
    let bad = |m: String| SolverError::Format(m);
    let mut r = Reader::new(buf);
    if r.bytes(8)? != HIERARCHY_MAGIC {
        return Err(bad("bad hierarchy magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported hierarchy version {version}")));
    }
    let dim = r.u32()? as usize;
    if dim != 2 && dim != 3 {
        return Err(bad(format!("bad dimension {dim}")));
    }
    let base_level = r.u32()?;
    let gamma = r.f64()?;
    let gas = GasModel::new(gamma).map_err(|_| bad(format!("bad gamma {gamma}")))?;
    let lower = r.f64()?;
    let extent = r.f64()?;
    let n_levels = r.u32()?;
    let mut levels = Vec::new();
    for k in 0..n_levels {
        let t = r.f64()?;
        let n_patches = r.u32()?;
        let n = 1i64 << (base_level + k);
        let mut patches = Vec::new();
        for _ in 0..n_patches {
            let mut c = [0i64; 6];
            for v in c.iter_mut() {
                *v = r.u32()? as i64;
            }
            let (lo, hi) = ([c[0], c[1], c[2]], [c[3], c[4], c[5]]);
            let ok = (0..3).all(|a| hi[a] > lo[a]) && (0..dim).all(|a| hi[a] <= n) && (dim..3).all(|a| hi[a] == 1);
            if !ok {
                return Err(bad(format!("bad box {lo:?}..{hi:?} on level {k}")));
            }
            let bx = IBox { lo, hi };
            let data = (0..bx.volume()).map(|_| get_state(&mut r, dim)).collect::<Result<Vec<_>>>()?;
            patches.push((bx, data));
        }
        levels.push((t, patches));
    }
    if !r.done() {
        return Err(bad("trailing bytes after payload".into()));
    }
    Ok(HierarchySnapshot { dim, base_level, gas, lower, extent, levels })
}
