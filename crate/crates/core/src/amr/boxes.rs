//! Integer boxes, dense cell masks and signature-based clustering.

/// Half-open integer box `[lo, hi)` on one level. Unused axes span `0..1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IBox {
    pub lo: [i64; 3],
    pub hi: [i64; 3],
}

impl IBox {
    pub fn new(lo: [i64; 3], hi: [i64; 3]) -> Self {
        debug_assert!((0..3).all(|a| hi[a] > lo[a]), "empty box {lo:?}..{hi:?}");
        IBox { lo, hi }
    }

    /// The whole level: `n` cells per active axis.
    pub fn domain(dim: usize, n: i64) -> Self {
        let mut hi = [1; 3];
        for h in hi.iter_mut().take(dim) {
            *h = n;
        }
        IBox { lo: [0; 3], hi }
    }

    pub fn shape(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| (self.hi[a] - self.lo[a]) as usize)
    }

    pub fn volume(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn contains(&self, ix: [i64; 3]) -> bool {
        (0..3).all(|a| ix[a] >= self.lo[a] && ix[a] < self.hi[a])
    }

    pub fn contains_box(&self, o: &IBox) -> bool {
        (0..3).all(|a| o.lo[a] >= self.lo[a] && o.hi[a] <= self.hi[a])
    }

    pub fn intersect(&self, o: &IBox) -> Option<IBox> {
        let lo = [0, 1, 2].map(|a| self.lo[a].max(o.lo[a]));
        let hi = [0, 1, 2].map(|a| self.hi[a].min(o.hi[a]));
        if (0..3).all(|a| hi[a] > lo[a]) {
            Some(IBox { lo, hi })
        } else {
            None
        }
    }

    /// Same region one level finer.
    pub fn refine(&self, dim: usize) -> IBox {
        let mut b = *self;
        for a in 0..dim {
            b.lo[a] *= 2;
            b.hi[a] *= 2;
        }
        b
    }

    /// Smallest box one level coarser covering this one.
    pub fn coarsen(&self, dim: usize) -> IBox {
        let mut b = *self;
        for a in 0..dim {
            b.lo[a] = b.lo[a].div_euclid(2);
            b.hi[a] = (b.hi[a] + 1).div_euclid(2);
        }
        b
    }

    pub fn grow(&self, dim: usize, g: i64) -> IBox {
        let mut b = *self;
        for a in 0..dim {
            b.lo[a] -= g;
            b.hi[a] += g;
        }
        b
    }

    /// Cells in x-fastest order.
    pub fn cells(&self) -> impl Iterator<Item = [i64; 3]> {
        let b = *self;
        (b.lo[2]..b.hi[2])
            .flat_map(move |k| (b.lo[1]..b.hi[1]).flat_map(move |j| (b.lo[0]..b.hi[0]).map(move |i| [i, j, k])))
    }

    /// Split along `axis` so the first part ends before `at`.
    pub fn split(&self, axis: usize, at: i64) -> (IBox, IBox) {
        debug_assert!(at > self.lo[axis] && at < self.hi[axis]);
        let mut a = *self;
        let mut b = *self;
        a.hi[axis] = at;
        b.lo[axis] = at;
        (a, b)
    }
}

/// Dense boolean mask over a level with `n` cells per active axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub dim: usize,
    pub n: i64,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(dim: usize, n: i64) -> Self {
        Mask { dim, n, bits: vec![false; (n as usize).pow(dim as u32)] }
    }

    #[inline]
    fn lin(&self, ix: [i64; 3]) -> usize {
        let n = self.n as usize;
        ix[0] as usize + n * (ix[1] as usize + n * ix[2] as usize)
    }

    /// False for indices outside the level.
    #[inline]
    pub fn get(&self, ix: [i64; 3]) -> bool {
        if (0..self.dim).any(|a| ix[a] < 0 || ix[a] >= self.n) {
            return false;
        }
        self.bits[self.lin(ix)]
    }

    #[inline]
    pub fn set(&mut self, ix: [i64; 3], v: bool) {
        let l = self.lin(ix);
        self.bits[l] = v;
    }

    pub fn fill_box(&mut self, b: &IBox, v: bool) {
        for ix in b.cells() {
            self.set(ix, v);
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn count_in(&self, b: &IBox) -> usize {
        b.cells().filter(|&ix| self.get(ix)).count()
    }

    pub fn and(&mut self, o: &Mask) {
        for (a, b) in self.bits.iter_mut().zip(&o.bits) {
            *a &= *b;
        }
    }

    pub fn or(&mut self, o: &Mask) {
        for (a, b) in self.bits.iter_mut().zip(&o.bits) {
            *a |= *b;
        }
    }

    pub fn domain(&self) -> IBox {
        IBox::domain(self.dim, self.n)
    }

    /// Set every cell within Chebyshev distance `r` of a set cell.
    /// `periodic[a]` wraps the neighborhood along axis `a`.
    pub fn dilate(&self, r: i64, periodic: [bool; 3]) -> Mask {
        let mut out = Mask::new(self.dim, self.n);
        let rz = if self.dim == 3 { r } else { 0 };
        for ix in self.domain().cells() {
            if !self.get(ix) {
                continue;
            }
            for dz in -rz..=rz {
                for dy in -r..=r {
                    for dx in -r..=r {
                        let mut j = [ix[0] + dx, ix[1] + dy, ix[2] + dz];
                        if let Some(w) = wrap(&mut j, self.dim, self.n, periodic) {
                            out.set(w, true);
                        }
                    }
                }
            }
        }
        out
    }

    /// Cells whose whole distance-`r` neighborhood (inside the level,
    /// wrapped on periodic axes) is set.
    pub fn erode(&self, r: i64, periodic: [bool; 3]) -> Mask {
        let mut inv = Mask::new(self.dim, self.n);
        for (a, b) in inv.bits.iter_mut().zip(&self.bits) {
            *a = !*b;
        }
        let grown = inv.dilate(r, periodic);
        let mut out = Mask::new(self.dim, self.n);
        for (o, g) in out.bits.iter_mut().zip(&grown.bits) {
            *o = !*g;
        }
        out
    }

    /// Mask one level coarser: a coarse cell is set if any child is.
    pub fn coarsen(&self) -> Mask {
        let mut out = Mask::new(self.dim, self.n / 2);
        for ix in self.domain().cells() {
            if self.get(ix) {
                out.set([ix[0] / 2, ix[1] / 2, if self.dim == 3 { ix[2] / 2 } else { 0 }], true);
            }
        }
        out
    }

    /// Mask one level finer: every child of a set cell.
    pub fn refine(&self) -> Mask {
        let mut out = Mask::new(self.dim, self.n * 2);
        for ix in out.domain().cells() {
            let p = [ix[0] / 2, ix[1] / 2, if self.dim == 3 { ix[2] / 2 } else { 0 }];
            if self.get(p) {
                out.set(ix, true);
            }
        }
        out
    }
}

/// Fold `ix` into `0..n` on periodic axes; `None` if it leaves the level
/// through a non-periodic side.
#[inline]
pub fn wrap(ix: &mut [i64; 3], dim: usize, n: i64, periodic: [bool; 3]) -> Option<[i64; 3]> {
    for a in 0..dim {
        if ix[a] < 0 || ix[a] >= n {
            if periodic[a] {
                ix[a] = ix[a].rem_euclid(n);
            } else {
                return None;
            }
        }
    }
    Some(*ix)
}

/// Bounding box of the set cells inside `b`.
fn shrink(mask: &Mask, b: &IBox) -> Option<IBox> {
    let mut lo = b.hi;
    let mut hi = b.lo;
    let mut any = false;
    for ix in b.cells() {
        if mask.get(ix) {
            any = true;
            for a in 0..3 {
                lo[a] = lo[a].min(ix[a]);
                hi[a] = hi[a].max(ix[a] + 1);
            }
        }
    }
    any.then_some(IBox { lo, hi })
}

/// Flag counts per slice of `b` along `axis`.
fn signature(mask: &Mask, b: &IBox, axis: usize) -> Vec<usize> {
    let mut s = vec![0usize; b.shape()[axis]];
    for ix in b.cells() {
        if mask.get(ix) {
            s[(ix[axis] - b.lo[axis]) as usize] += 1;
        }
    }
    s
}

/// Split position for `b`, or `None` if it cannot be split.
fn choose_cut(mask: &Mask, b: &IBox) -> Option<(usize, i64)> {
    let dim = mask.dim;
    let sigs: Vec<Vec<usize>> = (0..dim).map(|a| signature(mask, b, a)).collect();
    // 1. largest run of empty slices
    let mut best: Option<(usize, usize, i64)> = None;
    for (a, s) in sigs.iter().enumerate() {
        let mut i = 0;
        while i < s.len() {
            if s[i] == 0 {
                let start = i;
                while i < s.len() && s[i] == 0 {
                    i += 1;
                }
                let len = i - start;
                if best.map_or(true, |(_, l, _)| len > l) {
                    best = Some((a, len, b.lo[a] + start as i64));
                }
            } else {
                i += 1;
            }
        }
    }
    if let Some((a, _, at)) = best {
        return Some((a, at));
    }
    // 2. steepest sign change of the discrete Laplacian
    let mut best: Option<(usize, i64, i64)> = None;
    for (a, s) in sigs.iter().enumerate() {
        if s.len() < 4 {
            continue;
        }
        let lap: Vec<i64> = (1..s.len() - 1).map(|i| s[i - 1] as i64 - 2 * s[i] as i64 + s[i + 1] as i64).collect();
        for i in 0..lap.len() - 1 {
            if lap[i] * lap[i + 1] < 0 {
                let jump = (lap[i + 1] - lap[i]).abs();
                // cut between slices i+1 and i+2
                let at = b.lo[a] + i as i64 + 2;
                if at > b.lo[a] && at < b.hi[a] && best.map_or(true, |(_, j, _)| jump > j) {
                    best = Some((a, jump, at));
                }
            }
        }
    }
    if let Some((a, _, at)) = best {
        return Some((a, at));
    }
    // 3. bisect the longest axis
    let sh = b.shape();
    let a = (0..dim).max_by_key(|&a| (sh[a], std::cmp::Reverse(a)))?;
    (sh[a] > 1).then(|| (a, b.lo[a] + sh[a] as i64 / 2))
}

/// Cover the set cells of `mask` inside `region` with disjoint boxes whose
/// fill ratio is at least `eta`, by recursive signature bisection.
pub fn cluster(mask: &Mask, region: &IBox, eta: f64) -> Vec<IBox> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    if let Some(b) = shrink(mask, region) {
        stack.push(b);
    }
    while let Some(b) = stack.pop() {
        let flagged = mask.count_in(&b);
        if flagged as f64 >= eta * b.volume() as f64 {
            out.push(b);
            continue;
        }
        match choose_cut(mask, &b) {
            Some((a, at)) => {
                let (l, r) = b.split(a, at);
                // right first so the left half is emitted first
                for part in [r, l] {
                    if let Some(s) = shrink(mask, &part) {
                        stack.push(s);
                    }
                }
            }
            None => out.push(b),
        }
    }
    out.sort();
    out
}

/// Split boxes until each lies inside `allowed`, dropping parts without
/// flagged cells. Flagged cells must all be allowed.
pub fn clip_to(boxes: Vec<IBox>, flags: &Mask, allowed: &Mask) -> Vec<IBox> {
    let mut out = Vec::new();
    let mut stack = boxes;
    while let Some(b) = stack.pop() {
        let Some(b) = shrink(flags, &b) else { continue };
        if b.cells().all(|ix| allowed.get(ix)) {
            out.push(b);
            continue;
        }
        let sh = b.shape();
        let a = (0..flags.dim).max_by_key(|&a| (sh[a], std::cmp::Reverse(a))).unwrap();
        debug_assert!(sh[a] > 1, "flagged cell outside the allowed region");
        let (l, r) = b.split(a, b.lo[a] + sh[a] as i64 / 2);
        stack.push(l);
        stack.push(r);
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn box_geometry() {
        let b = IBox::new([1, 2, 0], [5, 3, 1]);
        assert_eq!(b.volume(), 4);
        assert_eq!(b.refine(2), IBox::new([2, 4, 0], [10, 6, 1]));
        assert_eq!(b.refine(2).coarsen(2), b);
        assert_eq!(IBox::new([1, 1, 0], [4, 4, 1]).coarsen(2), IBox::new([0, 0, 0], [2, 2, 1]));
        assert_eq!(b.grow(2, 1), IBox::new([0, 1, 0], [6, 4, 1]));
        assert!(b.intersect(&IBox::new([5, 0, 0], [6, 9, 1])).is_none());
        assert_eq!(b.cells().count(), 4);
    }

    #[test]
    fn single_cell_and_full_mask() {
        let mut m = Mask::new(2, 16);
        m.set([3, 7, 0], true);
        let boxes = cluster(&m, &m.domain(), 0.8);
        assert_eq!(boxes, vec![IBox::new([3, 7, 0], [4, 8, 1])]);
        let mut full = Mask::new(2, 16);
        full.fill_box(&full.domain(), true);
        assert_eq!(cluster(&full, &full.domain(), 0.8), vec![full.domain()]);
        assert!(cluster(&Mask::new(2, 8), &IBox::domain(2, 8), 0.8).is_empty());
    }

    #[test]
    fn distant_cells_get_separate_boxes() {
        let mut m = Mask::new(2, 32);
        m.set([2, 3, 0], true);
        m.set([25, 20, 0], true);
        let boxes = cluster(&m, &m.domain(), 0.8);
        assert_eq!(boxes.len(), 2);
        assert!(boxes.iter().all(|b| b.volume() == 1));
    }

    #[test]
    fn l_shape_is_split_by_the_laplacian() {
        let mut m = Mask::new(2, 16);
        m.fill_box(&IBox::new([0, 0, 0], [16, 4, 1]), true);
        m.fill_box(&IBox::new([0, 4, 0], [4, 16, 1]), true);
        let boxes = cluster(&m, &m.domain(), 0.9);
        assert!(boxes.len() >= 2);
        let covered: usize = boxes.iter().map(|b| m.count_in(b)).sum();
        assert_eq!(covered, m.count());
    }

    #[test]
    fn dilation_and_erosion() {
        let mut m = Mask::new(2, 8);
        m.set([0, 0, 0], true);
        assert_eq!(m.dilate(1, [false; 3]).count(), 4);
        assert_eq!(m.dilate(1, [true; 3]).count(), 9);
        let mut full = Mask::new(2, 8);
        full.fill_box(&IBox::new([2, 2, 0], [6, 6, 1]), true);
        assert_eq!(full.erode(1, [false; 3]).count(), 4);
        let c = full.coarsen();
        assert_eq!(c.count(), 4);
        assert_eq!(c.refine().count(), 16);
    }

    fn random_mask(cells: &[(i64, i64)]) -> Mask {
        let mut m = Mask::new(2, 24);
        for &(i, j) in cells {
            m.set([i, j, 0], true);
        }
        m
    }

    proptest! {
        #[test]
        fn clusters_cover_disjointly_and_efficiently(
            cells in proptest::collection::vec((0i64..24, 0i64..24), 1..60),
            eta in 0.3f64..1.0,
        ) {
            let m = random_mask(&cells);
            let boxes = cluster(&m, &m.domain(), eta);
            let mut seen = Mask::new(2, 24);
            for b in &boxes {
                let f = m.count_in(b);
                prop_assert!(f as f64 >= eta * b.volume() as f64 || f == 1 || b.volume() == 1);
                for ix in b.cells() {
                    prop_assert!(!seen.get(ix));
                    seen.set(ix, true);
                }
            }
            let mut both = m.clone();
            both.and(&seen);
            prop_assert_eq!(both.count(), m.count());
        }

        #[test]
        fn clipping_keeps_flags_inside_allowed(
            cells in proptest::collection::vec((4i64..20, 4i64..20), 1..40),
        ) {
            let m = random_mask(&cells);
            let mut allowed = Mask::new(2, 24);
            allowed.fill_box(&IBox::new([4, 4, 0], [20, 20, 1]), true);
            allowed.fill_box(&IBox::new([10, 10, 0], [12, 12, 1]), false);
            let mut flags = m.clone();
            flags.and(&allowed);
            prop_assume!(!flags.is_empty());
            let boxes = clip_to(cluster(&flags, &flags.domain(), 0.5), &flags, &allowed);
            let mut cov = 0;
            for b in &boxes {
                prop_assert!(b.cells().all(|ix| allowed.get(ix)));
                cov += flags.count_in(b);
            }
            prop_assert_eq!(cov, flags.count());
        }
    }
}
