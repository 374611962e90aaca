//! Compressible Euler equations: conserved state, ideal-gas closure, physical
//! fluxes and signal speeds.
//!
//! States always carry three momentum components. In two dimensions the third
//! component is identically zero and no kernel ever reads or writes it, so a
//! single code path serves both dimensions.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Result, SolverError};

/// Number of stored components: density, three momenta, total energy.
pub const NVAR: usize = 5;
pub const RHO: usize = 0;
pub const ENERGY: usize = 4;

/// States with density or pressure below this are rejected.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Cell-averaged conserved variables `(rho, rho v, rho e)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConservedState(pub [f64; NVAR]);

/// Primitive variables `(rho, v, p)` stored in the same layout.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Primitive(pub [f64; NVAR]);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GasModel {
    pub gamma: f64,
}

impl Default for GasModel {
    fn default() -> Self {
        GasModel { gamma: 1.4 }
    }
}

impl GasModel {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(SolverError::Config(format!("gamma must exceed 1, got {gamma}")));
        }
        Ok(GasModel { gamma })
    }
}

impl ConservedState {
    pub const ZERO: ConservedState = ConservedState([0.0; NVAR]);

    pub fn new(rho: f64, mom: [f64; 3], rho_e: f64) -> Self {
        ConservedState([rho, mom[0], mom[1], mom[2], rho_e])
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.0[RHO]
    }

    #[inline]
    pub fn mom(&self, axis: usize) -> f64 {
        self.0[1 + axis]
    }

    #[inline]
    pub fn rho_e(&self) -> f64 {
        self.0[ENERGY]
    }

    /// Pressure from the ideal-gas law; does not check positivity.
    #[inline]
    pub fn pressure(&self, gas: &GasModel) -> f64 {
        let q = &self.0;
        let ke = 0.5 * (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]) / q[0];
        (gas.gamma - 1.0) * (q[4] - ke)
    }

    /// Flip the sign of the momentum normal to `axis` (mirror image).
    pub fn reflected(mut self, axis: usize) -> Self {
        self.0[1 + axis] = -self.0[1 + axis];
        self
    }

    pub fn abs_max(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Primitive {
    pub fn new(rho: f64, vel: [f64; 3], p: f64) -> Self {
        Primitive([rho, vel[0], vel[1], vel[2], p])
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn vel(&self, axis: usize) -> f64 {
        self.0[1 + axis]
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.0[4]
    }

    #[inline]
    pub fn is_physical(&self) -> bool {
        self.0[0] > POSITIVITY_FLOOR && self.0[4] > POSITIVITY_FLOOR
    }

    /// Conservative assembly: `rho e = p / (gamma - 1) + rho |v|^2 / 2`.
    #[inline]
    pub fn to_conserved(&self, gas: &GasModel) -> ConservedState {
        let w = &self.0;
        let v2 = w[1] * w[1] + w[2] * w[2] + w[3] * w[3];
        ConservedState([
            w[0],
            w[0] * w[1],
            w[0] * w[2],
            w[0] * w[3],
            w[4] / (gas.gamma - 1.0) + 0.5 * w[0] * v2,
        ])
    }
}

fn non_physical(rho: f64, p: f64) -> SolverError {
    SolverError::NonPhysicalState { rho, p, location: None }
}

/// Primitive variables of `q`, rejecting vacuum and negative pressure.
#[inline]
pub fn primitives(q: &ConservedState, gas: &GasModel) -> Result<Primitive> {
    let rho = q.rho();
    if !(rho > POSITIVITY_FLOOR) {
        return Err(non_physical(rho, f64::NAN));
    }
    let inv = 1.0 / rho;
    let (u, v, w) = (q.0[1] * inv, q.0[2] * inv, q.0[3] * inv);
    let p = (gas.gamma - 1.0) * (q.0[4] - 0.5 * rho * (u * u + v * v + w * w));
    if !(p > POSITIVITY_FLOOR) {
        return Err(non_physical(rho, p));
    }
    Ok(Primitive([rho, u, v, w, p]))
}

/// Physical flux along `axis` evaluated from primitive variables.
#[inline]
pub fn flux_from_primitive(w: &Primitive, axis: usize, gas: &GasModel) -> ConservedState {
    let rho = w.0[0];
    let un = w.0[1 + axis];
    let p = w.0[4];
    let v2 = w.0[1] * w.0[1] + w.0[2] * w.0[2] + w.0[3] * w.0[3];
    let rho_e = p / (gas.gamma - 1.0) + 0.5 * rho * v2;
    let mass = rho * un;
    let mut f = ConservedState([mass, mass * w.0[1], mass * w.0[2], mass * w.0[3], (rho_e + p) * un]);
    f.0[1 + axis] += p;
    f
}

pub fn physical_flux(q: &ConservedState, axis: usize, gas: &GasModel) -> Result<ConservedState> {
    let w = primitives(q, gas)?;
    // Evaluate directly on conserved quantities so that fluxes of the stored
    // state are not perturbed by a primitive round trip.
    let un = w.vel(axis);
    let p = w.p();
    let mut f = ConservedState([q.0[1 + axis], q.0[1] * un, q.0[2] * un, q.0[3] * un, (q.0[4] + p) * un]);
    f.0[1 + axis] += p;
    Ok(f)
}

#[inline]
pub fn sound_speed(w: &Primitive, gas: &GasModel) -> f64 {
    (gas.gamma * w.p() / w.rho()).sqrt()
}

/// `|v_axis| + c`.
pub fn max_wave_speed(q: &ConservedState, axis: usize, gas: &GasModel) -> Result<f64> {
    let w = primitives(q, gas)?;
    Ok(w.vel(axis).abs() + sound_speed(&w, gas))
}

impl Add for ConservedState {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        let mut r = self;
        r += o;
        r
    }
}

impl Sub for ConservedState {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        let mut r = self;
        r -= o;
        r
    }
}

impl AddAssign for ConservedState {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        for i in 0..NVAR {
            self.0[i] += o.0[i];
        }
    }
}

impl SubAssign for ConservedState {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        for i in 0..NVAR {
            self.0[i] -= o.0[i];
        }
    }
}

impl Mul<f64> for ConservedState {
    type Output = Self;
    #[inline]
    fn mul(self, a: f64) -> Self {
        let mut r = self;
        for v in r.0.iter_mut() {
            *v *= a;
        }
        r
    }
}

impl Mul<ConservedState> for f64 {
    type Output = ConservedState;
    #[inline]
    fn mul(self, q: ConservedState) -> ConservedState {
        q * self
    }
}

impl Neg for ConservedState {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Index<usize> for ConservedState {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ConservedState {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const GAS: GasModel = GasModel { gamma: 1.4 };

    #[test]
    fn stagnant_gas_primitives() {
        let q = ConservedState::new(1.0, [0.0; 3], 2.5);
        let w = primitives(&q, &GAS).unwrap();
        assert_eq!(w.rho(), 1.0);
        assert_eq!(w.vel(0), 0.0);
        assert_relative_eq!(w.p(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_energy_is_rejected() {
        let q = ConservedState::new(1.0, [0.0; 3], 0.0);
        assert!(matches!(primitives(&q, &GAS), Err(SolverError::NonPhysicalState { .. })));
        let q = ConservedState::new(0.0, [0.0; 3], 1.0);
        assert!(primitives(&q, &GAS).is_err());
    }

    #[test]
    fn lax_liu_quadrant_one_energy() {
        let w = Primitive::new(1.0, [0.75, -0.5, 0.0], 1.0);
        let q = w.to_conserved(&GAS);
        assert_relative_eq!(q.rho_e(), 2.90625, epsilon = 1e-14);
        let back = primitives(&q, &GAS).unwrap();
        for i in 0..NVAR {
            assert_relative_eq!(back.0[i], w.0[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn stagnant_flux_is_pressure_only() {
        let q = ConservedState::new(1.0, [0.0; 3], 2.5);
        let f0 = physical_flux(&q, 0, &GAS).unwrap();
        let f1 = physical_flux(&q, 1, &GAS).unwrap();
        let e0 = [0.0, 1.0, 0.0, 0.0, 0.0];
        let e1 = [0.0, 0.0, 1.0, 0.0, 0.0];
        for i in 0..NVAR {
            assert_relative_eq!(f0.0[i], e0[i], epsilon = 1e-15);
            assert_relative_eq!(f1.0[i], e1[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_flux() {
        let q = Primitive::new(2.0, [0.75, 0.5, 0.0], 1.0).to_conserved(&GAS);
        assert_relative_eq!(q.rho_e(), 3.3125, epsilon = 1e-14);
        let f = physical_flux(&q, 0, &GAS).unwrap();
        assert_relative_eq!(f[0], 1.5, epsilon = 1e-14);
        assert_relative_eq!(f[1], 2.125, epsilon = 1e-14);
        assert_relative_eq!(f[2], 0.75, epsilon = 1e-14);
        assert_relative_eq!(f[4], 4.3125 * 0.75, epsilon = 1e-14);
    }

    #[test]
    fn wave_speeds() {
        let q = ConservedState::new(1.0, [0.0; 3], 2.5);
        assert_relative_eq!(max_wave_speed(&q, 0, &GAS).unwrap(), 1.4f64.sqrt(), epsilon = 1e-14);
        let q = Primitive::new(3.0, [-0.75, -0.5, 0.0], 1.0).to_conserved(&GAS);
        assert_relative_eq!(max_wave_speed(&q, 0, &GAS).unwrap(), 0.75 + (1.4f64 / 3.0).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(max_wave_speed(&q, 0, &GAS).unwrap(), 1.433130, epsilon = 1e-6);
        let a = Primitive::new(1.3, [0.0; 3], 0.7).to_conserved(&GAS);
        let b = Primitive::new(5.2, [0.0; 3], 2.8).to_conserved(&GAS);
        assert_relative_eq!(
            max_wave_speed(&a, 1, &GAS).unwrap(),
            max_wave_speed(&b, 1, &GAS).unwrap(),
            epsilon = 1e-14
        );
    }

    fn physical_primitive() -> impl Strategy<Value = Primitive> {
        (0.05f64..10.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, 0.05f64..10.0)
            .prop_map(|(r, u, v, w, p)| Primitive::new(r, [u, v, w], p))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn primitive_round_trip(w in physical_primitive()) {
            let back = primitives(&w.to_conserved(&GAS), &GAS).unwrap();
            for i in 0..NVAR {
                prop_assert!((back.0[i] - w.0[i]).abs() <= 1e-12 * (1.0 + w.0[i].abs()));
            }
        }
    }

    proptest! {
        #[test]
        fn flux_matches_primitive_assembly(w in physical_primitive(), axis in 0usize..3) {
            let q = w.to_conserved(&GAS);
            let f = physical_flux(&q, axis, &GAS).unwrap();
            let g = flux_from_primitive(&w, axis, &GAS);
            for i in 0..NVAR {
                prop_assert!((f.0[i] - g.0[i]).abs() <= 1e-13 * (1.0 + g.0[i].abs()) * 10.0);
            }
        }

        #[test]
        fn flux_permutes_with_axes(w in physical_primitive()) {
            // swap velocity components 0 and 1 together with the axis index
            let swapped = Primitive::new(w.rho(), [w.vel(1), w.vel(0), w.vel(2)], w.p());
            let f = physical_flux(&w.to_conserved(&GAS), 0, &GAS).unwrap();
            let g = physical_flux(&swapped.to_conserved(&GAS), 1, &GAS).unwrap();
            prop_assert!((f[0] - g[0]).abs() < 1e-12);
            prop_assert!((f[1] - g[2]).abs() < 1e-12);
            prop_assert!((f[2] - g[1]).abs() < 1e-12);
            prop_assert!((f[3] - g[3]).abs() < 1e-12);
            prop_assert!((f[4] - g[4]).abs() < 1e-12);
        }
    }
}
