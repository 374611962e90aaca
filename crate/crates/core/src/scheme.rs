//! Single-block numerical kernels: slope limiters, MUSCL reconstruction in
//! primitive variables, the AUSM+ and AUSMDV numerical fluxes, and the two
//! second-order integrators (midpoint RK2 and MUSCL-Hancock).

use crate::error::{Result, SolverError};
use crate::euler::{
    flux_from_primitive, primitives, sound_speed, ConservedState, GasModel, Primitive, NVAR,
};
use crate::grid::Block;

/// Regulariser of the van Albada limiter.
pub const VAN_ALBADA_DELTA: f64 = 1e-12;

const AUSM_PLUS_ALPHA: f64 = 3.0 / 16.0;
const AUSM_PLUS_BETA: f64 = 1.0 / 8.0;
const AUSMDV_K: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FluxKind {
    AusmPlus,
    Ausmdv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LimiterKind {
    VanAlbada,
    Minmod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntegratorKind {
    Rk2,
    MusclHancock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SchemeConfig {
    pub flux: FluxKind,
    pub limiter: LimiterKind,
    pub integrator: IntegratorKind,
}

impl SchemeConfig {
    /// AUSM+ / van Albada / RK2, used by the multiresolution family.
    pub const MR_PRESET: SchemeConfig = SchemeConfig {
        flux: FluxKind::AusmPlus,
        limiter: LimiterKind::VanAlbada,
        integrator: IntegratorKind::Rk2,
    };

    /// AUSMDV / Minmod / MUSCL-Hancock, used by the AMR family.
    pub const AMR_PRESET: SchemeConfig = SchemeConfig {
        flux: FluxKind::Ausmdv,
        limiter: LimiterKind::Minmod,
        integrator: IntegratorKind::MusclHancock,
    };

    pub fn is_paper_preset(&self) -> bool {
        *self == Self::MR_PRESET || *self == Self::AMR_PRESET
    }

    pub fn name(&self) -> &'static str {
        if *self == Self::MR_PRESET {
            "mr-preset"
        } else if *self == Self::AMR_PRESET {
            "amr-preset"
        } else {
            "custom"
        }
    }
}

#[inline]
pub fn limiter(kind: LimiterKind, a: f64, b: f64) -> f64 {
    match kind {
        LimiterKind::Minmod => {
            if a * b <= 0.0 {
                0.0
            } else if a.abs() < b.abs() {
                a
            } else {
                b
            }
        }
        LimiterKind::VanAlbada => {
            if a * b <= 0.0 {
                0.0
            } else {
                a * b * (a + b) / (a * a + b * b + VAN_ALBADA_DELTA)
            }
        }
    }
}

#[inline]
fn limited_slope(kind: LimiterKind, wm: &Primitive, w0: &Primitive, wp: &Primitive) -> Primitive {
    let mut s = Primitive::default();
    for c in 0..NVAR {
        s.0[c] = limiter(kind, w0.0[c] - wm.0[c], wp.0[c] - w0.0[c]);
    }
    s
}

#[inline]
fn shifted(w: &Primitive, slope: &Primitive, factor: f64) -> Primitive {
    let mut r = *w;
    for c in 0..NVAR {
        r.0[c] += factor * slope.0[c];
    }
    r
}

/// Limited linear reconstruction at the face between `w0` and `wp1`.
/// Returns `None` when a reconstructed state loses positivity.
#[inline]
pub(crate) fn reconstruct_face(
    kind: LimiterKind,
    wm1: &Primitive,
    w0: &Primitive,
    wp1: &Primitive,
    wp2: &Primitive,
) -> Option<(Primitive, Primitive)> {
    let sl = limited_slope(kind, wm1, w0, wp1);
    let sr = limited_slope(kind, w0, wp1, wp2);
    let wl = shifted(w0, &sl, 0.5);
    let wr = shifted(wp1, &sr, -0.5);
    if wl.is_physical() && wr.is_physical() {
        Some((wl, wr))
    } else {
        None
    }
}

/// Face states `(qL, qR)` between `q0` and `qp1` from the four-cell stencil.
pub fn muscl_states(
    stencil: [&ConservedState; 4],
    kind: LimiterKind,
    gas: &GasModel,
) -> Result<(ConservedState, ConservedState)> {
    let w: Vec<Primitive> = stencil.iter().map(|q| primitives(q, gas)).collect::<Result<_>>()?;
    match reconstruct_face(kind, &w[0], &w[1], &w[2], &w[3]) {
        Some((wl, wr)) => Ok((wl.to_conserved(gas), wr.to_conserved(gas))),
        None => Err(SolverError::NonPhysicalState { rho: f64::NAN, p: f64::NAN, location: Some("reconstructed face state".into()) }),
    }
}

#[inline]
fn mach_split(m: f64) -> (f64, f64) {
    if m.abs() >= 1.0 {
        (0.5 * (m + m.abs()), 0.5 * (m - m.abs()))
    } else {
        let q = (m * m - 1.0) * (m * m - 1.0);
        (
            0.25 * (m + 1.0) * (m + 1.0) + AUSM_PLUS_BETA * q,
            -0.25 * (m - 1.0) * (m - 1.0) - AUSM_PLUS_BETA * q,
        )
    }
}

#[inline]
fn pressure_split(m: f64) -> (f64, f64) {
    if m.abs() >= 1.0 {
        let s = m.signum();
        (0.5 * (1.0 + s), 0.5 * (1.0 - s))
    } else {
        let q = m * (m * m - 1.0) * (m * m - 1.0);
        (
            0.25 * (m + 1.0) * (m + 1.0) * (2.0 - m) + AUSM_PLUS_ALPHA * q,
            0.25 * (m - 1.0) * (m - 1.0) * (2.0 + m) - AUSM_PLUS_ALPHA * q,
        )
    }
}

#[inline]
fn total_enthalpy(w: &Primitive, gas: &GasModel) -> f64 {
    let v2 = w.0[1] * w.0[1] + w.0[2] * w.0[2] + w.0[3] * w.0[3];
    gas.gamma / (gas.gamma - 1.0) * w.p() / w.rho() + 0.5 * v2
}

/// AUSM+ flux from primitive face states.
#[inline]
pub(crate) fn ausm_plus_prim(wl: &Primitive, wr: &Primitive, axis: usize, gas: &GasModel) -> ConservedState {
    let g = gas.gamma;
    let hl = total_enthalpy(wl, gas);
    let hr = total_enthalpy(wr, gas);
    let ul = wl.vel(axis);
    let ur = wr.vel(axis);
    // interface sound speed from the critical speeds of sound
    let cs_l = (2.0 * (g - 1.0) / (g + 1.0) * hl).sqrt();
    let cs_r = (2.0 * (g - 1.0) / (g + 1.0) * hr).sqrt();
    let ct_l = cs_l * cs_l / cs_l.max(ul);
    let ct_r = cs_r * cs_r / cs_r.max(-ur);
    let c_half = ct_l.min(ct_r);

    let ml = ul / c_half;
    let mr = ur / c_half;
    let (mp, _) = mach_split(ml);
    let (_, mm) = mach_split(mr);
    let (pp, _) = pressure_split(ml);
    let (_, pm) = pressure_split(mr);
    let m_half = mp + mm;
    let p_half = pp * wl.p() + pm * wr.p();

    let m_pos = 0.5 * (m_half + m_half.abs());
    let m_neg = 0.5 * (m_half - m_half.abs());
    let al = c_half * m_pos * wl.rho();
    let ar = c_half * m_neg * wr.rho();
    let mut f = ConservedState([
        al + ar,
        al * wl.0[1] + ar * wr.0[1],
        al * wl.0[2] + ar * wr.0[2],
        al * wl.0[3] + ar * wr.0[3],
        al * hl + ar * hr,
    ]);
    f.0[1 + axis] += p_half;
    f
}

/// AUSMDV flux from primitive face states.
#[inline]
pub(crate) fn ausmdv_prim(wl: &Primitive, wr: &Primitive, axis: usize, gas: &GasModel) -> ConservedState {
    let (rl, rr) = (wl.rho(), wr.rho());
    let (pl, pr) = (wl.p(), wr.p());
    let ul = wl.vel(axis);
    let ur = wr.vel(axis);
    let hl = total_enthalpy(wl, gas);
    let hr = total_enthalpy(wr, gas);
    let cm = sound_speed(wl, gas).max(sound_speed(wr, gas));

    let pol = pl / rl;
    let por = pr / rr;
    let alpha_l = 2.0 * pol / (pol + por);
    let alpha_r = 2.0 * por / (pol + por);

    let (u_plus, p_plus) = if ul.abs() <= cm {
        let m = ul / cm;
        (
            alpha_l * (ul + cm) * (ul + cm) / (4.0 * cm) + (1.0 - alpha_l) * 0.5 * (ul + ul.abs()),
            pl * 0.25 * (m + 1.0) * (m + 1.0) * (2.0 - m),
        )
    } else {
        let up = 0.5 * (ul + ul.abs());
        (up, pl * up / ul)
    };
    let (u_minus, p_minus) = if ur.abs() <= cm {
        let m = ur / cm;
        (
            -alpha_r * (ur - cm) * (ur - cm) / (4.0 * cm) + (1.0 - alpha_r) * 0.5 * (ur - ur.abs()),
            pr * 0.25 * (m - 1.0) * (m - 1.0) * (2.0 + m),
        )
    } else {
        let um = 0.5 * (ur - ur.abs());
        (um, pr * um / ur)
    };

    let mass = u_plus * rl + u_minus * rr;
    let p_half = p_plus + p_minus;
    let upwind = |a: f64, b: f64| 0.5 * (mass * (a + b) - mass.abs() * (b - a));

    // normal momentum: blend of AUSMV and AUSMD
    let mom_v = u_plus * rl * ul + u_minus * rr * ur;
    let mom_d = upwind(ul, ur);
    let s = 0.5 * (AUSMDV_K * (pr - pl).abs() / pl.min(pr)).min(1.0);
    let mom_n = (0.5 + s) * mom_v + (0.5 - s) * mom_d;

    let mut f = ConservedState::ZERO;
    f.0[0] = mass;
    for a in 0..3 {
        f.0[1 + a] = if a == axis { mom_n + p_half } else { upwind(wl.0[1 + a], wr.0[1 + a]) };
    }
    f.0[4] = upwind(hl, hr);
    f
}

#[inline]
pub(crate) fn numerical_flux_prim(
    kind: FluxKind,
    wl: &Primitive,
    wr: &Primitive,
    axis: usize,
    gas: &GasModel,
) -> ConservedState {
    match kind {
        FluxKind::AusmPlus => ausm_plus_prim(wl, wr, axis, gas),
        FluxKind::Ausmdv => ausmdv_prim(wl, wr, axis, gas),
    }
}

pub fn ausm_plus(ql: &ConservedState, qr: &ConservedState, axis: usize, gas: &GasModel) -> Result<ConservedState> {
    Ok(ausm_plus_prim(&primitives(ql, gas)?, &primitives(qr, gas)?, axis, gas))
}

pub fn ausmdv(ql: &ConservedState, qr: &ConservedState, axis: usize, gas: &GasModel) -> Result<ConservedState> {
    Ok(ausmdv_prim(&primitives(ql, gas)?, &primitives(qr, gas)?, axis, gas))
}

/// Second-order face flux from a four-cell primitive stencil. Falls back to
/// first-order states when reconstruction loses positivity; the flag reports
/// the fallback.
#[inline]
pub(crate) fn muscl_face_flux(
    w: [&Primitive; 4],
    axis: usize,
    cfg: &SchemeConfig,
    gas: &GasModel,
) -> (ConservedState, bool) {
    match reconstruct_face(cfg.limiter, w[0], w[1], w[2], w[3]) {
        Some((wl, wr)) => (numerical_flux_prim(cfg.flux, &wl, &wr, axis, gas), false),
        None => (numerical_flux_prim(cfg.flux, w[1], w[2], axis, gas), true),
    }
}

/// Numerical fluxes of one block. `faces[a]` has one more entry than the
/// block along axis `a`; entry `i` is the face between cells `i-1` and `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxField {
    pub dim: usize,
    pub shape: [usize; 3],
    pub faces: [Vec<ConservedState>; 3],
}

impl FluxField {
    pub fn new(dim: usize, shape: [usize; 3]) -> Self {
        let mut faces: [Vec<ConservedState>; 3] = Default::default();
        for (a, f) in faces.iter_mut().enumerate().take(dim) {
            let mut s = shape;
            s[a] += 1;
            *f = vec![ConservedState::ZERO; s.iter().product()];
        }
        FluxField { dim, shape, faces }
    }

    #[inline]
    fn face_lin(&self, axis: usize, ix: [i64; 3]) -> usize {
        let mut s = self.shape;
        s[axis] += 1;
        ((ix[2] as usize) * s[1] + ix[1] as usize) * s[0] + ix[0] as usize
    }

    /// Flux through the lower face (along `axis`) of cell `ix`; `ix[axis]`
    /// may equal `shape[axis]` for the last face.
    #[inline]
    pub fn get(&self, axis: usize, ix: [i64; 3]) -> ConservedState {
        self.faces[axis][self.face_lin(axis, ix)]
    }

    #[inline]
    pub fn set(&mut self, axis: usize, ix: [i64; 3], f: ConservedState) {
        let l = self.face_lin(axis, ix);
        self.faces[axis][l] = f;
    }

    pub fn scale(&mut self, factor: f64) {
        for a in 0..self.dim {
            for f in self.faces[a].iter_mut() {
                *f = *f * factor;
            }
        }
    }
}

/// Outcome of a block update besides the new data.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Fluxes of the final stage (the ones that define the update).
    pub fluxes: FluxField,
    pub fallbacks: usize,
}

fn unit(axis: usize) -> [i64; 3] {
    let mut e = [0; 3];
    e[axis] = 1;
    e
}

fn add(a: [i64; 3], b: [i64; 3], s: i64) -> [i64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn block_primitives(block: &Block, gas: &GasModel) -> Result<Vec<Primitive>> {
    block
        .data
        .iter()
        .enumerate()
        .map(|(l, q)| {
            primitives(q, gas).map_err(|e| e.at(|| format!("padded cell #{l}")))
        })
        .collect()
}

fn interior_primitives_check(block: &Block, gas: &GasModel) -> Result<()> {
    for ix in block.interior() {
        primitives(&block.get(ix), gas).map_err(|e| e.at(|| format!("cell {ix:?}")))?;
    }
    Ok(())
}

/// `-div F` of the interior of `block` with MUSCL face reconstruction.
fn muscl_rhs(
    block: &Block,
    dx: f64,
    cfg: &SchemeConfig,
    gas: &GasModel,
) -> Result<(Vec<ConservedState>, FluxField, usize)> {
    interior_primitives_check(block, gas)?;
    let w = block_primitives(block, gas)?;
    let mut fluxes = FluxField::new(block.dim, block.shape);
    let mut fallbacks = 0;
    for axis in 0..block.dim {
        let st = block.stride(axis);
        let mut hi = block.shape;
        hi[axis] += 1;
        for k in 0..hi[2] as i64 {
            for j in 0..hi[1] as i64 {
                for i in 0..hi[0] as i64 {
                    let c = block.lin([i, j, k]);
                    let (f, fb) = muscl_face_flux(
                        [&w[c - 2 * st], &w[c - st], &w[c], &w[c + st]],
                        axis,
                        cfg,
                        gas,
                    );
                    fallbacks += fb as usize;
                    fluxes.set(axis, [i, j, k], f);
                }
            }
        }
    }
    let rhs = divergence(block, &fluxes, dx);
    Ok((rhs, fluxes, fallbacks))
}

fn divergence(block: &Block, fluxes: &FluxField, dx: f64) -> Vec<ConservedState> {
    let inv = 1.0 / dx;
    block
        .interior()
        .map(|ix| {
            let mut r = ConservedState::ZERO;
            for axis in 0..block.dim {
                let lo = fluxes.get(axis, ix);
                let hi = fluxes.get(axis, add(ix, unit(axis), 1));
                r -= (hi - lo) * inv;
            }
            r
        })
        .collect()
}

/// One midpoint RK2 step of the block: `Q* = Q + dt/2 L(Q)`,
/// `Q^{n+1} = Q + dt L(Q*)`. `fill` must set the ghost cells of the block
/// it is handed and is called before each stage.
pub fn step_rk2(
    block: &mut Block,
    dx: f64,
    dt: f64,
    cfg: &SchemeConfig,
    gas: &GasModel,
    fill: &mut dyn FnMut(&mut Block) -> Result<()>,
) -> Result<StepOutput> {
    fill(block)?;
    let q0 = block.interior_values();
    let (rhs, _, fb1) = muscl_rhs(block, dx, cfg, gas)?;
    let stage: Vec<_> = q0.iter().zip(&rhs).map(|(q, r)| *q + *r * (0.5 * dt)).collect();
    block.set_interior_values(&stage);
    fill(block)?;
    let (rhs, fluxes, fb2) = muscl_rhs(block, dx, cfg, gas)?;
    let next: Vec<_> = q0.iter().zip(&rhs).map(|(q, r)| *q + *r * dt).collect();
    block.set_interior_values(&next);
    interior_primitives_check(block, gas)?;
    Ok(StepOutput { fluxes, fallbacks: fb1 + fb2 })
}

/// One MUSCL-Hancock step. Ghosts must already be filled. The half-step
/// predictor uses the physical flux of the reconstructed face states; the
/// corrector uses the configured numerical flux.
pub fn step_muscl_hancock(
    block: &mut Block,
    dx: f64,
    dt: f64,
    cfg: &SchemeConfig,
    gas: &GasModel,
) -> Result<StepOutput> {
    interior_primitives_check(block, gas)?;
    let w = block_primitives(block, gas)?;
    let dim = block.dim;
    let npad = block.data.len();
    let half = 0.5 * dt / dx;

    // Evolved face states per padded cell: [axis][0 = low face, 1 = high face].
    let mut faces: Vec<[[ConservedState; 2]; 3]> = vec![[[ConservedState::ZERO; 2]; 3]; npad];
    let mut fallbacks = 0;
    let lo = [-1i64, -1, if dim == 3 { -1 } else { 0 }];
    let hi = [
        block.shape[0] as i64 + 1,
        block.shape[1] as i64 + 1,
        if dim == 3 { block.shape[2] as i64 + 1 } else { 1 },
    ];
    for k in lo[2]..hi[2] {
        for j in lo[1]..hi[1] {
            for i in lo[0]..hi[0] {
                let c = block.lin([i, j, k]);
                let q = block.data[c];
                let mut prim_faces = [[Primitive::default(); 2]; 3];
                let mut dq = ConservedState::ZERO;
                for axis in 0..dim {
                    let st = block.stride(axis);
                    let slope = limited_slope(cfg.limiter, &w[c - st], &w[c], &w[c + st]);
                    let mut wm = shifted(&w[c], &slope, -0.5);
                    let mut wp = shifted(&w[c], &slope, 0.5);
                    if !(wm.is_physical() && wp.is_physical()) {
                        fallbacks += 1;
                        wm = w[c];
                        wp = w[c];
                    }
                    dq += flux_from_primitive(&wp, axis, gas) - flux_from_primitive(&wm, axis, gas);
                    prim_faces[axis] = [wm, wp];
                }
                let shift = dq * (-half);
                for axis in 0..dim {
                    for s in 0..2 {
                        faces[c][axis][s] = prim_faces[axis][s].to_conserved(gas) + shift;
                    }
                }
                let _ = q;
            }
        }
    }

    let mut fluxes = FluxField::new(dim, block.shape);
    for axis in 0..dim {
        let st = block.stride(axis);
        let mut hi = block.shape;
        hi[axis] += 1;
        for k in 0..hi[2] as i64 {
            for j in 0..hi[1] as i64 {
                for i in 0..hi[0] as i64 {
                    let c = block.lin([i, j, k]);
                    let l = c - st;
                    let ql = faces[l][axis][1];
                    let qr = faces[c][axis][0];
                    let f = match (primitives(&ql, gas), primitives(&qr, gas)) {
                        (Ok(wl), Ok(wr)) => numerical_flux_prim(cfg.flux, &wl, &wr, axis, gas),
                        _ => {
                            fallbacks += 1;
                            numerical_flux_prim(cfg.flux, &w[l], &w[c], axis, gas)
                        }
                    };
                    fluxes.set(axis, [i, j, k], f);
                }
            }
        }
    }
    let rhs = divergence(block, &fluxes, dx);
    let next: Vec<_> = block.interior().zip(&rhs).map(|(ix, r)| block.get(ix) + *r * dt).collect();
    block.set_interior_values(&next);
    interior_primitives_check(block, gas)?;
    Ok(StepOutput { fluxes, fallbacks })
}

/// Largest per-axis Courant number `dt (|v_a| + c) / dx` over the interior.
pub fn courant_number(block: &Block, dx: f64, dt: f64, gas: &GasModel) -> Result<f64> {
    let mut m = 0.0f64;
    for ix in block.interior() {
        let w = primitives(&block.get(ix), gas)?;
        let c = sound_speed(&w, gas);
        for a in 0..block.dim {
            m = m.max((w.vel(a).abs() + c) * dt / dx);
        }
    }
    Ok(m)
}
