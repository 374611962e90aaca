//! Benchmark definitions: the Lax-Liu configuration #6 four-quadrant
//! Riemann problem and the 3D ellipsoidally expanding shock, with their
//! step schedules and default adaptation parameters.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Result, SolverError};
use crate::euler::{GasModel, Primitive};
use crate::grid::{Block, BoundaryCondition, GHOST};
use crate::io::{decode_grid, encode_grid, format_sidecar, parse_sidecar, write_atomic};
use crate::scheme::SchemeConfig;
use crate::unigrid::{run_uniform, UniformGrid};

pub const REGISTERED: [&str; 2] = ["lax_liu_6", "ellipsoid3d"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseId {
    LaxLiu6,
    Ellipsoid3d,
}

/// Ellipsoid parameters: radius, semi-axis stretchings and rotation angles.
pub const ELLIPSOID_RC: f64 = 3.0 / 5.0;
pub const ELLIPSOID_A: f64 = 1.0 / 3.0;
pub const ELLIPSOID_B: f64 = 1.0;
pub const ELLIPSOID_C: f64 = 3.0;
pub const ELLIPSOID_THETA: f64 = PI / 3.0;
pub const ELLIPSOID_PHI: f64 = PI / 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CaseSpec {
    pub id: CaseId,
    pub name: &'static str,
    pub dim: usize,
    /// Lower corner coordinate, identical on every axis.
    pub lower: f64,
    /// Edge length of the square / cubic domain.
    pub extent: f64,
    pub t_end: f64,
    pub bc: BoundaryCondition,
    pub gas: GasModel,
    pub mr_eps: f64,
    pub amr_eps_rho: f64,
    pub amr_eps_p: f64,
    pub eta_tol: f64,
    /// Level of the AMR base mesh (64² in 2D, 8³ in 3D).
    pub amr_base_level: u32,
    /// Level of the cached desk-scale reference solution.
    pub reference_level: u32,
}

impl CaseSpec {
    pub fn lax_liu_6() -> Self {
        CaseSpec {
            id: CaseId::LaxLiu6,
            name: "lax_liu_6",
            dim: 2,
            lower: 0.0,
            extent: 1.0,
            t_end: 0.25,
            bc: BoundaryCondition::outflow(),
            gas: GasModel::default(),
            mr_eps: 0.0023,
            amr_eps_rho: 0.05,
            amr_eps_p: 0.05,
            eta_tol: 0.8,
            amr_base_level: 6,
            reference_level: 9,
        }
    }

    pub fn ellipsoid3d() -> Self {
        CaseSpec {
            id: CaseId::Ellipsoid3d,
            name: "ellipsoid3d",
            dim: 3,
            lower: -2.0,
            extent: 4.0,
            t_end: 0.28,
            bc: BoundaryCondition::outflow(),
            gas: GasModel::default(),
            mr_eps: 0.013,
            amr_eps_rho: 0.05,
            amr_eps_p: 0.05,
            eta_tol: 0.8,
            amr_base_level: 3,
            reference_level: 7,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "lax_liu_6" => Ok(Self::lax_liu_6()),
            "ellipsoid3d" => Ok(Self::ellipsoid3d()),
            other => Err(SolverError::Config(format!(
                "unknown case '{other}'; registered cases: {}",
                REGISTERED.join(", ")
            ))),
        }
    }

    /// Cells per axis at level `level`.
    pub fn cells_per_axis(&self, level: u32) -> usize {
        1usize << level
    }

    pub fn dx(&self, level: u32) -> f64 {
        self.extent / self.cells_per_axis(level) as f64
    }

    /// Number of uniform fine cells N_C at `level`.
    pub fn n_cells(&self, level: u32) -> usize {
        self.cells_per_axis(level).pow(self.dim as u32)
    }

    /// Default number of time steps N_I at `level`.
    ///
    /// 2D: 160 steps at L=7, doubling per level. 3D: 8, 32, 64, 128 at
    /// L=5..8, extended by halving to L=4 and doubling above L=8.
    pub fn steps(&self, level: u32) -> Result<usize> {
        let bad = || SolverError::Config(format!("no step schedule for {} at level {level}", self.name));
        match self.id {
            CaseId::LaxLiu6 => {
                if !(2..=14).contains(&level) {
                    return Err(bad());
                }
                Ok(if level >= 7 { 160 << (level - 7) } else { 160 >> (7 - level) })
            }
            CaseId::Ellipsoid3d => match level {
                4 => Ok(4),
                5 => Ok(8),
                6..=12 => Ok(32 << (level - 6)),
                _ => Err(bad()),
            },
        }
    }

    pub fn dt(&self, n_steps: usize) -> f64 {
        self.t_end / n_steps as f64
    }

    /// Cell-center coordinate along one axis.
    #[inline]
    pub fn center(&self, level: u32, i: i64) -> f64 {
        self.lower + (i as f64 + 0.5) * self.dx(level)
    }

    /// Initial primitive state at a point.
    pub fn initial_primitive(&self, x: [f64; 3]) -> Primitive {
        match self.id {
            CaseId::LaxLiu6 => lax_liu_6_state(x[0], x[1]),
            CaseId::Ellipsoid3d => {
                let p_in = 0.25 * (self.gas.gamma - 1.0);
                let p_out = 2.5 * (self.gas.gamma - 1.0);
                if ellipsoid_radius(x) < ELLIPSOID_RC {
                    Primitive::new(0.125, [0.0; 3], p_in)
                } else {
                    Primitive::new(1.0, [0.0; 3], p_out)
                }
            }
        }
    }

    /// Initial cell averages by cell-center sampling. The Lax-Liu quadrant
    /// interfaces fall on cell faces for every level ≥ 1.
    pub fn init_block(&self, level: u32) -> Result<Block> {
        if level == 0 && self.id == CaseId::LaxLiu6 {
            return Err(SolverError::BadDomain {
                case: self.name.into(),
                reason: "a single cell straddles the quadrant interfaces".into(),
            });
        }
        let n = self.cells_per_axis(level);
        let mut b = Block::new(self.dim, [n, n, n], GHOST);
        for ix in b.interior().collect::<Vec<_>>() {
            b.set(ix, self.initial_primitive(self.point(level, ix)).to_conserved(&self.gas));
        }
        Ok(b)
    }

    pub fn point(&self, level: u32, ix: [i64; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.center(level, ix[a]);
        }
        x
    }
}

/// Quadrant layout: I upper right, II upper left, III lower left, IV lower right.
pub fn lax_liu_6_state(x1: f64, x2: f64) -> Primitive {
    let (rho, v1, v2) = match (x1 > 0.5, x2 > 0.5) {
        (true, true) => (1.0, 0.75, -0.5),
        (false, true) => (2.0, 0.75, 0.5),
        (false, false) => (1.0, -0.75, 0.5),
        (true, false) => (3.0, -0.75, -0.5),
    };
    Primitive::new(rho, [v1, v2, 0.0], 1.0)
}

/// Rotated coordinates of the ellipsoid frame.
pub fn ellipsoid_rotate(x: [f64; 3]) -> [f64; 3] {
    let (st, ct) = ELLIPSOID_THETA.sin_cos();
    let (sp, cp) = ELLIPSOID_PHI.sin_cos();
    let s = x[0] * st + x[1] * ct;
    [x[0] * ct - x[1] * st, s * cp - x[2] * sp, s * sp + x[2] * cp]
}

pub fn ellipsoid_radius(x: [f64; 3]) -> f64 {
    let r = ellipsoid_rotate(x);
    ((r[0] / ELLIPSOID_A).powi(2) + (r[1] / ELLIPSOID_B).powi(2) + (r[2] / ELLIPSOID_C).powi(2)).sqrt()
}

/// Environment variable naming the reference cache directory.
pub const CACHE_ENV: &str = "ADAPTIVE_FV_CACHE";

/// Cache directory from `CACHE_ENV`, else `.adaptive-fv-cache` in the
/// working directory.
pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".adaptive-fv-cache"))
}

/// Hash identifying a reference run: case, level, step count and scheme.
pub fn reference_hash(case: &CaseSpec, level: u32, cfg: &SchemeConfig) -> Result<String> {
    let key = format!(
        "v1;case={};level={level};steps={};t_end={:e};scheme={cfg:?}",
        case.name,
        case.steps(level)?,
        case.t_end
    );
    Ok(hex::encode(Sha256::digest(key.as_bytes())))
}

/// Path of the cached snapshot; its sidecar has the extension `.meta`.
pub fn reference_path(dir: &Path, case: &CaseSpec, level: u32, cfg: &SchemeConfig) -> Result<PathBuf> {
    let h = reference_hash(case, level, cfg)?;
    Ok(dir.join(format!("{}_L{level}_{}_{}.bin", case.name, cfg.name(), &h[..12])))
}

/// Uniform-mesh solution at `level` with the case's default schedule,
/// read from `dir` if cached, else computed and stored.
pub fn reference(case: &CaseSpec, level: u32, cfg: &SchemeConfig, dir: &Path) -> Result<UniformGrid> {
    let hash = reference_hash(case, level, cfg)?;
    let path = reference_path(dir, case, level, cfg)?;
    let meta = path.with_extension("meta");
    if path.exists() {
        let bytes = std::fs::read(&path)?;
        let side = parse_sidecar(&std::fs::read_to_string(&meta)?)
            .map_err(|e| SolverError::CacheCorrupt(format!("{}: {e}", meta.display())))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        if side.get("config_hash") != Some(&hash) || side.get("payload_sha256") != Some(&digest) {
            return Err(SolverError::CacheCorrupt(format!("{} does not match its sidecar", path.display())));
        }
        return decode_grid(&bytes).map_err(|e| SolverError::CacheCorrupt(format!("{}: {e}", path.display())));
    }
    log::info!("computing {} reference at level {level}", case.name);
    let (g, report) = run_uniform(case, level, case.steps(level)?, cfg)?;
    let bytes = encode_grid(&g);
    let mut side = BTreeMap::new();
    side.insert("case".to_string(), case.name.to_string());
    side.insert("level".to_string(), level.to_string());
    side.insert("steps".to_string(), report.n_steps.to_string());
    side.insert("scheme".to_string(), cfg.name().to_string());
    side.insert("config_hash".to_string(), hash);
    side.insert("payload_sha256".to_string(), hex::encode(Sha256::digest(&bytes)));
    write_atomic(&path, &bytes)?;
    write_atomic(&meta, format_sidecar(&side).as_bytes())?;
    Ok(g)
}
