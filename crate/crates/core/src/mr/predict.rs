//! Cell-average projection and third-order prediction between levels.
//!
//! In 1D the children of cell i are `Q_i ± δ` (left child plus) with the
//! centered `δ = (Q_{i-1} - Q_{i+1}) / 8`; near a non-periodic boundary
//! the one-sided quadratic `δ = ±(3Q_b - 4Q_{b±1} + Q_{b±2}) / 8` is used
//! so no ghost data enters. Multi-dimensional prediction is the tensor
//! product of the 1D rule.

use crate::euler::ConservedState;
use crate::grid::BoundaryCondition;

pub type Idx = [i32; 3];

/// Up to 3^d weighted coarse cells defining one predicted child.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub len: usize,
    pub terms: [(Idx, f64); 27],
}

impl Stencil {
    pub fn iter(&self) -> impl Iterator<Item = &(Idx, f64)> {
        self.terms[..self.len].iter()
    }

    pub fn apply(&self, mut value: impl FnMut(Idx) -> ConservedState) -> ConservedState {
        let mut s = ConservedState::ZERO;
        for (ix, w) in self.iter() {
            s += value(*ix) * *w;
        }
        s
    }
}

/// 1D weights (index, coefficient) of a child of cell `i` in a row of `n`
/// cells; `right` selects the upper child.
fn weights_1d(i: i32, n: i32, periodic: bool, right: bool) -> ([(i32, f64); 3], usize) {
    let mut w = [(i, 1.0), (0, 0.0), (0, 0.0)];
    let sgn = if right { -1.0 } else { 1.0 };
    // δ terms as (index, coefficient)
    let delta: ([(i32, f64); 3], usize) = if n == 1 {
        ([(0, 0.0); 3], 0)
    } else if periodic {
        if n == 2 {
            ([(0, 0.0); 3], 0)
        } else {
            ([((i - 1).rem_euclid(n), 0.125), ((i + 1).rem_euclid(n), -0.125), (0, 0.0)], 2)
        }
    } else if n == 2 {
        ([(0, 0.25), (1, -0.25), (0, 0.0)], 2)
    } else if i == 0 {
        ([(0, 0.375), (1, -0.5), (2, 0.125)], 3)
    } else if i == n - 1 {
        ([(n - 1, -0.375), (n - 2, 0.5), (n - 3, -0.125)], 3)
    } else {
        ([(i - 1, 0.125), (i + 1, -0.125), (0, 0.0)], 2)
    };
    let mut len = 1;
    for &(j, c) in &delta.0[..delta.1] {
        let c = sgn * c;
        if let Some(e) = w[..len].iter_mut().find(|e| e.0 == j) {
            e.1 += c;
        } else {
            w[len] = (j, c);
            len += 1;
        }
    }
    (w, len)
}

/// Prediction stencil for child `child` (bit a = upper half along axis a)
/// of coarse cell `idx` on a level with `n` cells per axis.
pub fn child_stencil(dim: usize, n: i32, idx: Idx, child: usize, bc: &BoundaryCondition) -> Stencil {
    let mut per_axis = [([(0i32, 1.0f64); 3], 1usize); 3];
    for a in 0..dim {
        per_axis[a] = weights_1d(idx[a], n, bc.is_periodic(a), (child >> a) & 1 == 1);
    }
    let mut s = Stencil { len: 0, terms: [([0; 3], 0.0); 27] };
    let (wx, nx) = per_axis[0];
    let (wy, ny) = per_axis[1];
    let (wz, nz) = if dim == 3 { per_axis[2] } else { ([(0, 1.0), (0, 0.0), (0, 0.0)], 1) };
    for &(k, cz) in &wz[..nz] {
        for &(j, cy) in &wy[..ny] {
            for &(i, cx) in &wx[..nx] {
                let w = cx * cy * cz;
                if w != 0.0 {
                    s.terms[s.len] = ([i, j, if dim == 3 { k } else { 0 }], w);
                    s.len += 1;
                }
            }
        }
    }
    s
}

/// Mean of the children: exact cell-average restriction.
pub fn project(children: &[ConservedState]) -> ConservedState {
    let mut s = ConservedState::ZERO;
    for c in children {
        s += *c;
    }
    s * (1.0 / children.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> ConservedState {
        ConservedState([v, 0.0, 0.0, 0.0, 0.0])
    }

    fn predict(dim: usize, n: i32, idx: Idx, child: usize, bc: &BoundaryCondition, f: impl Fn(Idx) -> f64) -> f64 {
        child_stencil(dim, n, idx, child, bc).apply(|ix| scalar(f(ix)))[0]
    }

    #[test]
    fn linear_1d_children() {
        // averages 0.5, 1.5, 2.5 of f(x) = x
        let bc = BoundaryCondition::outflow();
        let f = |ix: Idx| ix[0] as f64 + 0.5;
        assert_relative_eq!(predict(2, 3, [1, 0, 0], 0, &bc, f), 1.25);
        assert_relative_eq!(predict(2, 3, [1, 0, 0], 1, &bc, f), 1.75);
    }

    /// Exact average of x² + xy over the square [x0, x0+h] × [y0, y0+h].
    fn quad_avg(x0: f64, y0: f64, h: f64) -> f64 {
        let ix2 = ((x0 + h).powi(3) - x0.powi(3)) / (3.0 * h);
        let ix = x0 + 0.5 * h;
        let iy = y0 + 0.5 * h;
        ix2 + ix * iy
    }

    #[test]
    fn quadratic_exactness_everywhere() {
        {
            let bc = BoundaryCondition::outflow();
            let n = 6;
            let h = 1.0 / n as f64;
            for i in 0..n {
                for j in 0..n {
                    for child in 0..4 {
                        let p = predict(2, n, [i, j, 0], child, &bc, |ix| quad_avg(ix[0] as f64 * h, ix[1] as f64 * h, h));
                        let cx = (2 * i + (child & 1) as i32) as f64 * 0.5 * h;
                        let cy = (2 * j + ((child >> 1) & 1) as i32) as f64 * 0.5 * h;
                        assert!((p - quad_avg(cx, cy, 0.5 * h)).abs() < 1e-13, "{i} {j} {child}");
                    }
                }
            }
        }
    }

    #[test]
    fn cubic_3d_quadratic_exactness() {
        let bc = BoundaryCondition::outflow();
        let n = 4;
        let h = 1.0 / n as f64;
        // average of x² + yz + z² over a cube
        let avg = |x0: f64, y0: f64, z0: f64, h: f64| {
            let sq = |a: f64| ((a + h).powi(3) - a.powi(3)) / (3.0 * h);
            sq(x0) + (y0 + 0.5 * h) * (z0 + 0.5 * h) + sq(z0)
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for child in 0..8 {
                        let p = predict(3, n, [i, j, k], child, &bc, |ix| {
                            avg(ix[0] as f64 * h, ix[1] as f64 * h, ix[2] as f64 * h, h)
                        });
                        let c = |a: i32, bit: usize| (2 * a + ((child >> bit) & 1) as i32) as f64 * 0.5 * h;
                        assert!((p - avg(c(i, 0), c(j, 1), c(k, 2), 0.5 * h)).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn mean_preserved_and_constants_reproduced() {
        let bc = BoundaryCondition::outflow();
        let pbc = BoundaryCondition::periodic();
        let f = |ix: Idx| ((ix[0] * 7 + ix[1] * 3 + ix[2] * 11) % 5) as f64 + 0.3;
        for dim in [2, 3] {
            for n in [1, 2, 3, 5] {
                for b in [&bc, &pbc] {
                    let idx = [n - 1, 0, if dim == 3 { n / 2 } else { 0 }];
                    let kids: Vec<_> = (0..1 << dim).map(|c| scalar(predict(dim, n, idx, c, b, f))).collect();
                    assert_relative_eq!(project(&kids)[0], f(idx), epsilon = 1e-14);
                    for c in 0..1 << dim {
                        assert_relative_eq!(predict(dim, n, idx, c, b, |_| 2.5), 2.5, epsilon = 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn centered_cross_weights() {
        let s = child_stencil(2, 8, [3, 3, 0], 0, &BoundaryCondition::outflow());
        let w = |i, j| s.iter().find(|e| e.0 == [i, j, 0]).map(|e| e.1).unwrap_or(0.0);
        assert_relative_eq!(w(3, 3), 1.0);
        assert_relative_eq!(w(2, 3), 0.125);
        assert_relative_eq!(w(2, 2), 1.0 / 64.0);
        assert_relative_eq!(w(4, 2), -1.0 / 64.0);
        let s = child_stencil(3, 8, [3, 3, 3], 0, &BoundaryCondition::outflow());
        let corner = s.iter().find(|e| e.0 == [2, 2, 2]).unwrap().1;
        assert_relative_eq!(corner, 1.0 / 512.0);
    }

    #[test]
    fn project_of_children() {
        let kids = [1.0, 2.0, 3.0, 4.0].map(scalar);
        assert_eq!(project(&kids)[0], 2.5);
        assert_eq!(project(&[scalar(1.5); 4])[0], 1.5);
    }
}
