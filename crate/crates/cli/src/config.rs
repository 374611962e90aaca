//! Run configuration: a plain `key = value` file merged with command-line
//! overrides.

use adaptive_fv::cases::CaseSpec;
use adaptive_fv::io::parse_sidecar;
use adaptive_fv::metrics::Method;
use adaptive_fv::mr::DetailNorm;
use adaptive_fv::scheme::SchemeConfig;
use adaptive_fv::{Result, SolverError};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub type KeyValues = BTreeMap<String, String>;

const RUN_KEYS: [&str; 15] = [
    "case",
    "method",
    "level",
    "steps",
    "eps",
    "eps_rho",
    "eps_p",
    "eta",
    "detail_norm",
    "flux_correction",
    "scheme",
    "out",
    "dump_every",
    "reference_level",
    "deterministic",
];

const SWEEP_KEYS: [&str; 3] = ["methods", "levels", "parallel"];

fn config_err(msg: impl Into<String>) -> SolverError {
    SolverError::Config(msg.into())
}

/// Parse `key = value` lines. Blank lines and `#` comments, including
/// trailing ones, are skipped; later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<KeyValues> {
    let stripped: String = text.lines().map(|l| format!("{}\n", l.split('#').next().unwrap_or(""))).collect();
    let map = parse_sidecar(&stripped)?;
    if map.contains_key("") {
        return Err(config_err("empty key"));
    }
    Ok(map)
}

pub fn read_key_values(path: &Path) -> Result<KeyValues> {
    let text = std::fs::read_to_string(path).map_err(|e| SolverError::Io(format!("{}: {e}", path.display())))?;
    parse_key_values(&text).map_err(|e| match e {
        SolverError::Config(m) => config_err(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| config_err(format!("{key}: cannot parse '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(config_err(format!("{key}: expected true or false, got '{v}'"))),
    }
}

pub fn parse_scheme(v: &str) -> Result<SchemeConfig> {
    match v {
        "mr-preset" | "mr" => Ok(SchemeConfig::MR_PRESET),
        "amr-preset" | "amr" => Ok(SchemeConfig::AMR_PRESET),
        _ => Err(config_err(format!("unknown scheme '{v}' (expected mr-preset or amr-preset)"))),
    }
}

/// Scheme a method runs with unless overridden.
pub fn default_scheme(m: Method) -> SchemeConfig {
    if m.is_amr_family() {
        SchemeConfig::AMR_PRESET
    } else {
        SchemeConfig::MR_PRESET
    }
}

/// Parameters shared by single runs and sweeps.
#[derive(Clone, Debug)]
pub struct Thresholds {
    pub eps: Option<f64>,
    pub eps_rho: Option<f64>,
    pub eps_p: Option<f64>,
    pub eta: Option<f64>,
    pub detail_norm: DetailNorm,
    pub flux_correction: bool,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub case: CaseSpec,
    pub method: Method,
    pub level: u32,
    pub steps: Option<usize>,
    pub thresholds: Thresholds,
    pub scheme: SchemeConfig,
    pub out: PathBuf,
    /// Mesh dump every this many fine steps; 0 writes only the final one.
    pub dump_every: usize,
    pub reference_level: Option<u32>,
}

impl RunConfig {
    pub fn n_steps(&self) -> Result<usize> {
        match self.steps {
            Some(n) => Ok(n),
            None => self.case.steps(self.level),
        }
    }

    /// File stem shared by all artifacts of this run.
    pub fn stem(&self) -> String {
        format!("{}_{}_L{}", self.case.name, self.method.tag().to_lowercase(), self.level)
    }

    /// Plain-text record of the effective configuration.
    pub fn to_key_values(&self) -> KeyValues {
        let mut m = KeyValues::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("case", self.case.name.to_string());
        put("method", self.method.tag().to_lowercase());
        put("level", self.level.to_string());
        if let Ok(n) = self.n_steps() {
            put("steps", n.to_string());
        }
        put("scheme", self.scheme.name().to_string());
        let t = &self.thresholds;
        if self.method.is_mr_family() {
            put("eps", t.eps.unwrap_or(self.case.mr_eps).to_string());
            put("detail_norm", t.detail_norm.name().to_string());
        }
        if self.method.is_amr_family() {
            put("eps_rho", t.eps_rho.unwrap_or(self.case.amr_eps_rho).to_string());
            put("eps_p", t.eps_p.unwrap_or(self.case.amr_eps_p).to_string());
            put("eta", t.eta.unwrap_or(self.case.eta_tol).to_string());
            put("flux_correction", t.flux_correction.to_string());
        }
        put("out", self.out.display().to_string());
        put("dump_every", self.dump_every.to_string());
        if let Some(r) = self.reference_level {
            put("reference_level", r.to_string());
        }
        put("deterministic", "true".to_string());
        m
    }
}

fn check_keys(map: &KeyValues, allowed: &[&str]) -> Result<()> {
    for k in map.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(config_err(format!("unknown key '{k}' (known: {})", allowed.join(", "))));
        }
    }
    Ok(())
}

fn thresholds(map: &KeyValues) -> Result<Thresholds> {
    let opt = |k: &str| map.get(k).map(|v| parse_num::<f64>(k, v)).transpose();
    let t = Thresholds {
        eps: opt("eps")?,
        eps_rho: opt("eps_rho")?,
        eps_p: opt("eps_p")?,
        eta: opt("eta")?,
        detail_norm: match map.get("detail_norm") {
            Some(v) => DetailNorm::parse(v)?,
            None => DetailNorm::default(),
        },
        flux_correction: match map.get("flux_correction") {
            Some(v) => parse_bool("flux_correction", v)?,
            None => true,
        },
    };
    if let Some(e) = t.eps {
        if !(e >= 0.0) {
            return Err(config_err(format!("eps must be non-negative, got {e}")));
        }
    }
    if let Some(eta) = t.eta {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(config_err(format!("eta must lie in (0, 1], got {eta}")));
        }
    }
    Ok(t)
}

/// Fields common to `run` and `sweep`, everything but method and level.
struct Common {
    case: CaseSpec,
    steps: Option<usize>,
    thresholds: Thresholds,
    scheme: Option<SchemeConfig>,
    out: PathBuf,
    dump_every: usize,
    reference_level: Option<u32>,
}

fn common(map: &KeyValues) -> Result<Common> {
    let case = CaseSpec::by_name(map.get("case").ok_or_else(|| config_err("missing key 'case'"))?)?;
    if let Some(v) = map.get("deterministic") {
        if !parse_bool("deterministic", v)? {
            return Err(config_err("deterministic execution cannot be switched off"));
        }
    }
    let steps = map.get("steps").map(|v| parse_num::<usize>("steps", v)).transpose()?;
    if steps == Some(0) {
        return Err(config_err("steps must be positive"));
    }
    Ok(Common {
        case,
        steps,
        thresholds: thresholds(map)?,
        scheme: map.get("scheme").map(|v| parse_scheme(v)).transpose()?,
        out: PathBuf::from(map.get("out").map(String::as_str).unwrap_or("out")),
        dump_every: map.get("dump_every").map(|v| parse_num("dump_every", v)).transpose()?.unwrap_or(0),
        reference_level: match map.get("reference_level").map(String::as_str) {
            None | Some("none") => None,
            Some(v) => Some(parse_num("reference_level", v)?),
        },
    })
}

fn parse_level(v: &str) -> Result<u32> {
    let l: u32 = parse_num("level", v)?;
    if l == 0 || l > 14 {
        return Err(config_err(format!("level must lie in 1..=14, got {l}")));
    }
    Ok(l)
}

impl RunConfig {
    pub fn from_key_values(map: &KeyValues) -> Result<Self> {
        check_keys(map, &RUN_KEYS)?;
        let c = common(map)?;
        let method = Method::parse(map.get("method").ok_or_else(|| config_err("missing key 'method'"))?)?;
        let level = parse_level(map.get("level").ok_or_else(|| config_err("missing key 'level'"))?)?;
        let t = &c.thresholds;
        let mr_keys = t.eps.is_some() || map.contains_key("detail_norm");
        let amr_keys = t.eps_rho.is_some() || t.eps_p.is_some() || t.eta.is_some() || map.contains_key("flux_correction");
        if mr_keys && !method.is_mr_family() {
            return Err(config_err(format!("eps and detail_norm apply to mr and mrlt, not {}", method.tag())));
        }
        if amr_keys && !method.is_amr_family() {
            return Err(config_err(format!(
                "eps_rho, eps_p, eta and flux_correction apply to amr and amrlt, not {}",
                method.tag()
            )));
        }
        let cfg = RunConfig {
            scheme: c.scheme.unwrap_or_else(|| default_scheme(method)),
            case: c.case,
            method,
            level,
            steps: c.steps,
            thresholds: c.thresholds,
            out: c.out,
            dump_every: c.dump_every,
            reference_level: c.reference_level,
        };
        check_reference_level(&cfg.case, cfg.level, cfg.reference_level)?;
        Ok(cfg)
    }
}

fn check_reference_level(case: &CaseSpec, level: u32, r: Option<u32>) -> Result<()> {
    match r {
        Some(r) if r < level => Err(config_err(format!(
            "reference_level {r} is below the run level {level} for case {}",
            case.name
        ))),
        _ => Ok(()),
    }
}

/// A method × level matrix over one case.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub parallel: bool,
    pub runs: Vec<RunConfig>,
    pub out: PathBuf,
    pub case: CaseSpec,
    /// Level of the reference solution; `None` skips errors and
    /// perturbations.
    pub reference_level: Option<u32>,
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl SweepConfig {
    pub fn from_key_values(map: &KeyValues) -> Result<Self> {
        let mut allowed: Vec<&str> = RUN_KEYS.iter().copied().filter(|k| *k != "method" && *k != "level").collect();
        allowed.extend(SWEEP_KEYS);
        check_keys(map, &allowed)?;
        let c = common(map)?;
        let mut methods = Vec::new();
        for m in split_list(map.get("methods").map(String::as_str).unwrap_or("fv,mr,mrlt,amr,amrlt")) {
            let m = Method::parse(m)?;
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        let mut levels = Vec::new();
        for l in split_list(map.get("levels").ok_or_else(|| config_err("missing key 'levels'"))?) {
            levels.push(parse_level(l)?);
        }
        if methods.is_empty() || levels.is_empty() {
            return Err(config_err("sweep needs at least one method and one level"));
        }
        levels.sort_unstable();
        levels.dedup();
        let reference_level = match map.get("reference_level").map(String::as_str) {
            Some("none") => None,
            Some(_) => c.reference_level,
            None => Some(c.case.reference_level.max(*levels.last().unwrap())),
        };
        let parallel = match map.get("parallel") {
            Some(v) => parse_bool("parallel", v)?,
            None => false,
        };

        // uniform baselines for every scheme the adaptive methods use
        let scheme_of = |m: Method| c.scheme.unwrap_or_else(|| default_scheme(m));
        let mut schemes: Vec<SchemeConfig> = Vec::new();
        for &m in &methods {
            let s = scheme_of(m);
            if !schemes.contains(&s) && (m != Method::Fv || methods.iter().all(|&o| o == Method::Fv)) {
                schemes.push(s);
            }
        }
        let mut runs = Vec::new();
        for &level in &levels {
            check_reference_level(&c.case, level, reference_level)?;
            for &s in &schemes {
                runs.push(RunConfig {
                    case: c.case.clone(),
                    method: Method::Fv,
                    level,
                    steps: c.steps,
                    thresholds: c.thresholds.clone(),
                    scheme: s,
                    out: c.out.clone(),
                    dump_every: c.dump_every,
                    reference_level,
                });
            }
            for &m in methods.iter().filter(|&&m| m != Method::Fv) {
                runs.push(RunConfig {
                    case: c.case.clone(),
                    method: m,
                    level,
                    steps: c.steps,
                    thresholds: c.thresholds.clone(),
                    scheme: scheme_of(m),
                    out: c.out.clone(),
                    dump_every: c.dump_every,
                    reference_level,
                });
            }
        }
        Ok(SweepConfig { parallel, runs, out: c.out, case: c.case, reference_level })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> KeyValues {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn key_value_text() {
        let m = parse_key_values("# run\ncase = lax_liu_6\n\nlevel=5  # coarse\nlevel = 6\n").unwrap();
        assert_eq!(m, kv(&[("case", "lax_liu_6"), ("level", "6")]));
        assert!(parse_key_values("case lax_liu_6").is_err());
        assert!(parse_key_values(" = 3").is_err());
    }

    #[test]
    fn run_config_defaults() {
        let c = RunConfig::from_key_values(&kv(&[("case", "lax_liu_6"), ("method", "amrlt"), ("level", "6")])).unwrap();
        assert_eq!(c.scheme, SchemeConfig::AMR_PRESET);
        assert_eq!(c.n_steps().unwrap(), c.case.steps(6).unwrap());
        assert_eq!(c.stem(), "lax_liu_6_amrlt_L6");
        assert_eq!(c.to_key_values()["eps_rho"], "0.05");
        assert!(!c.to_key_values().contains_key("eps"));
    }

    #[test]
    fn thresholds_must_match_family() {
        let base = [("case", "lax_liu_6"), ("level", "5")];
        let with = |extra: &[(&str, &str)]| {
            let mut m = kv(&base);
            m.extend(kv(extra));
            RunConfig::from_key_values(&m)
        };
        assert!(with(&[("method", "mr"), ("eps", "0.01")]).is_ok());
        assert!(with(&[("method", "amr"), ("eps", "0.01")]).is_err());
        assert!(with(&[("method", "mr"), ("eps_rho", "0.01")]).is_err());
        assert!(with(&[("method", "fv"), ("eta", "0.7")]).is_err());
        assert!(with(&[("method", "amr"), ("eta", "1.5")]).is_err());
        assert!(with(&[("method", "fv"), ("deterministic", "false")]).is_err());
        assert!(with(&[("method", "fv"), ("colour", "red")]).is_err());
        assert!(with(&[("method", "fv"), ("reference_level", "4")]).is_err());
    }

    #[test]
    fn unknown_case_names_registered_ones() {
        let e = RunConfig::from_key_values(&kv(&[("case", "sod"), ("method", "fv"), ("level", "5")])).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("lax_liu_6") && msg.contains("ellipsoid3d"), "{msg}");
    }

    #[test]
    fn sweep_adds_one_baseline_per_scheme() {
        let s = SweepConfig::from_key_values(&kv(&[
            ("case", "lax_liu_6"),
            ("methods", "mr,amr"),
            ("levels", "6,5"),
            ("reference_level", "none"),
        ]))
        .unwrap();
        let tags: Vec<_> = s.runs.iter().map(|r| (r.method.tag(), r.scheme.name(), r.level)).collect();
        assert_eq!(
            tags,
            vec![
                ("FV", "mr-preset", 5),
                ("FV", "amr-preset", 5),
                ("MR", "mr-preset", 5),
                ("AMR", "amr-preset", 5),
                ("FV", "mr-preset", 6),
                ("FV", "amr-preset", 6),
                ("MR", "mr-preset", 6),
                ("AMR", "amr-preset", 6),
            ]
        );
        assert_eq!(s.reference_level, None);
        let fv_only =
            SweepConfig::from_key_values(&kv(&[("case", "lax_liu_6"), ("methods", "fv"), ("levels", "5")])).unwrap();
        assert_eq!(fv_only.runs.len(), 1);
        assert_eq!(fv_only.reference_level, Some(9));
    }
}
