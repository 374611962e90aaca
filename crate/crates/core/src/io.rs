//! Binary snapshots of uniform grids and key=value sidecar files.
//!
//! Snapshot layout, all little-endian:
//! magic `AFVSNAP\0`, u32 version, u32 d, u32 L, 3 × u32 cells per axis,
//! f64 γ, f64 t, f64 lower corner, f64 domain extent, then for every cell
//! (x fastest) the d+2 conserved components (ρ, ρv, ρe) as f64.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, SolverError};
use crate::euler::{ConservedState, GasModel, ENERGY};
use crate::unigrid::UniformGrid;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"AFVSNAP\0";
pub const SNAPSHOT_VERSION: u32 = 1;

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Cursor over a byte buffer with format errors on truncation.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(SolverError::Format("truncated snapshot".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub(crate) fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

pub(crate) fn put_state(out: &mut Vec<u8>, q: &ConservedState, dim: usize) {
    for c in 0..=dim {
        put_f64(out, q[c]);
    }
    put_f64(out, q[ENERGY]);
}

pub(crate) fn get_state(r: &mut Reader, dim: usize) -> Result<ConservedState> {
    let mut q = ConservedState::ZERO;
    for c in 0..=dim {
        q.0[c] = r.f64()?;
    }
    q.0[ENERGY] = r.f64()?;
    Ok(q)
}

pub fn encode_grid(g: &UniformGrid) -> Vec<u8> {
    let d = g.dim();
    let mut out = Vec::with_capacity(64 + g.block.n_interior() * (d + 2) * 8);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    put_u32(&mut out, SNAPSHOT_VERSION);
    put_u32(&mut out, d as u32);
    put_u32(&mut out, g.level);
    for a in 0..3 {
        put_u32(&mut out, g.block.shape[a] as u32);
    }
    put_f64(&mut out, g.gas.gamma);
    put_f64(&mut out, g.t);
    put_f64(&mut out, g.lower);
    put_f64(&mut out, g.extent);
    for ix in g.block.interior() {
        put_state(&mut out, &g.block.get(ix), d);
    }
    out
}

pub fn decode_grid(buf: &[u8]) -> Result<UniformGrid> {
    let mut r = Reader::new(buf);
    if r.bytes(8)? != SNAPSHOT_MAGIC {
        return Err(SolverError::Format("bad snapshot magic".into()));
    }
    let version = r.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(SolverError::Format(format!("unsupported snapshot version {version}")));
    }
    let d = r.u32()? as usize;
    if d != 2 && d != 3 {
        return Err(SolverError::Format(format!("bad dimension {d}")));
    }
    let level = r.u32()?;
    let shape = [r.u32()?, r.u32()?, r.u32()?];
    let n = 1u32 << level;
    if shape[0] != n || shape[1] != n || shape[2] != if d == 3 { n } else { 1 } {
        return Err(SolverError::Format(format!("shape {shape:?} does not match level {level}")));
    }
    let gamma = r.f64()?;
    let t = r.f64()?;
    let lower = r.f64()?;
    let extent = r.f64()?;
    let gas = GasModel::new(gamma).map_err(|_| SolverError::Format(format!("bad gamma {gamma}")))?;
    let mut g = UniformGrid::new(d, level, lower, extent, gas);
    g.t = t;
    for ix in g.block.interior().collect::<Vec<_>>() {
        let q = get_state(&mut r, d)?;
        g.block.set(ix, q);
    }
    if !r.done() {
        return Err(SolverError::Format("trailing bytes after payload".into()));
    }
    Ok(g)
}

pub fn write_grid(path: &Path, g: &UniformGrid) -> Result<()> {
    write_atomic(path, &encode_grid(g))
}

pub fn read_grid(path: &Path) -> Result<UniformGrid> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_grid(&buf)
}

/// Write through a temporary file and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Render sorted `key=value` lines.
pub fn format_sidecar(entries: &BTreeMap<String, String>) -> String {
    entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Parse `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_sidecar(text: &str) -> Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| SolverError::Config(format!("line {}: expected key=value, got '{line}'", n + 1)))?;
        m.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(m)
}
