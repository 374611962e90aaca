//! Structured blocks with ghost layers and physical boundary conditions.

use crate::euler::ConservedState;

/// Ghost width required by the MUSCL stencils.
pub const GHOST: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BcKind {
    Outflow,
    Periodic,
    Reflective,
}

/// Boundary kind for the low and high face of every axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryCondition {
    pub faces: [[BcKind; 2]; 3],
}

impl BoundaryCondition {
    pub fn uniform(kind: BcKind) -> Self {
        BoundaryCondition { faces: [[kind; 2]; 3] }
    }

    pub fn outflow() -> Self {
        Self::uniform(BcKind::Outflow)
    }

    pub fn periodic() -> Self {
        Self::uniform(BcKind::Periodic)
    }

    pub fn reflective() -> Self {
        Self::uniform(BcKind::Reflective)
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.faces[axis][0] == BcKind::Periodic
    }

    /// Periodic faces must come in pairs.
    pub fn validate(&self) -> bool {
        self.faces
            .iter()
            .all(|f| (f[0] == BcKind::Periodic) == (f[1] == BcKind::Periodic))
    }

    /// Map an index that may lie outside `0..n` along `axis` to the interior
    /// cell providing its value. The flag is set when the image must be
    /// mirrored (normal momentum negated).
    #[inline]
    pub fn image(&self, axis: usize, i: i64, n: i64) -> (i64, bool) {
        if i < 0 {
            match self.faces[axis][0] {
                BcKind::Outflow => (0, false),
                BcKind::Periodic => (i.rem_euclid(n), false),
                BcKind::Reflective => ((-i - 1).min(n - 1), true),
            }
        } else if i >= n {
            match self.faces[axis][1] {
                BcKind::Outflow => (n - 1, false),
                BcKind::Periodic => (i.rem_euclid(n), false),
                BcKind::Reflective => ((2 * n - 1 - i).max(0), true),
            }
        } else {
            (i, false)
        }
    }
}

/// A box of cells with `ghost` layers on every active axis. Indices are
/// relative to the first interior cell; ghosts have negative indices or
/// indices `>= shape`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub dim: usize,
    pub shape: [usize; 3],
    pub ghost: usize,
    padded: [usize; 3],
    pub data: Vec<ConservedState>,
}

impl Block {
    pub fn new(dim: usize, shape: [usize; 3], ghost: usize) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
        let mut shape = shape;
        let mut padded = [1; 3];
        for a in 0..3 {
            if a < dim {
                padded[a] = shape[a] + 2 * ghost;
            } else {
                shape[a] = 1;
            }
        }
        let len = padded.iter().product();
        Block { dim, shape, ghost, padded, data: vec![ConservedState::ZERO; len] }
    }

    #[inline]
    pub fn ghost_on(&self, axis: usize) -> i64 {
        if axis < self.dim {
            self.ghost as i64
        } else {
            0
        }
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.padded[0],
            _ => self.padded[0] * self.padded[1],
        }
    }

    pub fn padded(&self) -> [usize; 3] {
        self.padded
    }

    #[inline]
    pub fn lin(&self, ix: [i64; 3]) -> usize {
        let g = self.ghost as i64;
        let gz = if self.dim == 3 { g } else { 0 };
        let i = (ix[0] + g) as usize;
        let j = (ix[1] + g) as usize;
        let k = (ix[2] + gz) as usize;
        (k * self.padded[1] + j) * self.padded[0] + i
    }

    #[inline]
    pub fn get(&self, ix: [i64; 3]) -> ConservedState {
        self.data[self.lin(ix)]
    }

    #[inline]
    pub fn set(&mut self, ix: [i64; 3], q: ConservedState) {
        let l = self.lin(ix);
        self.data[l] = q;
    }

    pub fn n_interior(&self) -> usize {
        self.shape.iter().product()
    }

    /// Interior indices in storage order (x fastest).
    pub fn interior(&self) -> impl Iterator<Item = [i64; 3]> {
        let s = self.shape;
        (0..s[2] as i64).flat_map(move |k| {
            (0..s[1] as i64).flat_map(move |j| (0..s[0] as i64).map(move |i| [i, j, k]))
        })
    }

    /// All padded indices (including ghosts) in storage order.
    pub fn all_cells(&self) -> impl Iterator<Item = [i64; 3]> {
        let lo = [-self.ghost_on(0), -self.ghost_on(1), -self.ghost_on(2)];
        let hi = [
            self.shape[0] as i64 + self.ghost_on(0),
            self.shape[1] as i64 + self.ghost_on(1),
            self.shape[2] as i64 + self.ghost_on(2),
        ];
        (lo[2]..hi[2]).flat_map(move |k| {
            (lo[1]..hi[1]).flat_map(move |j| (lo[0]..hi[0]).map(move |i| [i, j, k]))
        })
    }

    pub fn is_interior(&self, ix: [i64; 3]) -> bool {
        (0..3).all(|a| ix[a] >= 0 && ix[a] < self.shape[a] as i64)
    }

    pub fn interior_values(&self) -> Vec<ConservedState> {
        self.interior().map(|ix| self.get(ix)).collect()
    }

    pub fn set_interior_values(&mut self, values: &[ConservedState]) {
        let cells: Vec<_> = self.interior().collect();
        for (ix, q) in cells.into_iter().zip(values) {
            self.set(ix, *q);
        }
    }

    /// Sum of interior states (unscaled by cell volume).
    pub fn interior_sum(&self) -> ConservedState {
        let mut s = ConservedState::ZERO;
        for ix in self.interior() {
            s += self.get(ix);
        }
        s
    }

    /// Fill every ghost cell, corners included, from the interior.
    pub fn fill_ghosts(&mut self, bc: &BoundaryCondition) {
        let g = self.ghost as i64;
        for axis in 0..self.dim {
            let n = self.shape[axis] as i64;
            // Ranges of the other axes: already-filled axes use the padded
            // range so corners are populated.
            let mut lo = [0i64; 3];
            let mut hi = [0i64; 3];
            for b in 0..3 {
                if b < axis {
                    lo[b] = -self.ghost_on(b);
                    hi[b] = self.shape[b] as i64 + self.ghost_on(b);
                } else {
                    lo[b] = 0;
                    hi[b] = self.shape[b] as i64;
                }
            }
            for k in lo[2]..hi[2] {
                for j in lo[1]..hi[1] {
                    for i in lo[0]..hi[0] {
                        let base = [i, j, k];
                        for m in 1..=g {
                            for ghost_pos in [-m, n - 1 + m] {
                                let (src, flip) = bc.image(axis, ghost_pos, n);
                                let mut s = base;
                                s[axis] = src;
                                let mut d = base;
                                d[axis] = ghost_pos;
                                let mut q = self.get(s);
                                if flip {
                                    q = q.reflected(axis);
                                }
                                self.set(d, q);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(dim: usize, n: usize) -> Block {
        let mut b = Block::new(dim, [n, n, n], GHOST);
        for ix in b.interior().collect::<Vec<_>>() {
            let v = (ix[0] + 10 * ix[1] + 100 * ix[2]) as f64;
            b.set(ix, ConservedState::new(1.0 + v, [v, 2.0 * v, 0.0], 10.0 + v));
        }
        b
    }

    #[test]
    fn constant_outflow_ghosts() {
        let mut b = Block::new(2, [4, 4, 1], GHOST);
        let q = ConservedState::new(1.0, [0.5, -0.5, 0.0], 3.0);
        for ix in b.interior().collect::<Vec<_>>() {
            b.set(ix, q);
        }
        b.fill_ghosts(&BoundaryCondition::outflow());
        for ix in b.all_cells().collect::<Vec<_>>() {
            assert_eq!(b.get(ix), q);
        }
    }

    #[test]
    fn periodic_ghost_is_opposite_cell() {
        let mut b = ramp(2, 5);
        b.fill_ghosts(&BoundaryCondition::periodic());
        assert_eq!(b.get([-1, 2, 0]), b.get([4, 2, 0]));
        assert_eq!(b.get([-2, 2, 0]), b.get([3, 2, 0]));
        assert_eq!(b.get([5, 1, 0]), b.get([0, 1, 0]));
        assert_eq!(b.get([2, -1, 0]), b.get([2, 4, 0]));
        assert_eq!(b.get([-1, -1, 0]), b.get([4, 4, 0]));
    }

    #[test]
    fn reflective_ghost_negates_normal_momentum() {
        let mut b = Block::new(2, [3, 3, 1], GHOST);
        for ix in b.interior().collect::<Vec<_>>() {
            b.set(ix, ConservedState::new(1.0, [1.0, 0.25, 0.0], 2.0));
        }
        b.fill_ghosts(&BoundaryCondition::reflective());
        let g = b.get([-1, 1, 0]);
        assert_eq!(g.mom(0), -1.0);
        assert_eq!(g.mom(1), 0.25);
        assert_eq!(g.rho(), 1.0);
        assert_eq!(g.rho_e(), 2.0);
        let g = b.get([1, 3, 0]);
        assert_eq!(g.mom(1), -0.25);
        assert_eq!(g.mom(0), 1.0);
    }

    #[test]
    fn three_d_corners_filled() {
        let mut b = ramp(3, 4);
        b.fill_ghosts(&BoundaryCondition::periodic());
        assert_eq!(b.get([-1, -2, -1]), b.get([3, 2, 3]));
        assert_eq!(b.get([4, 5, -2]), b.get([0, 1, 2]));
    }
}
