//! Acceptance criteria 1-10. Runs as a plain binary so the PASS/FAIL lines
//! are always printed and the timed runs never overlap with other tests.
//!
//! Reference solutions are cached under `ADAPTIVE_FV_CACHE`, or the cargo
//! target tmp directory when unset; the first run builds them (several
//! minutes), later runs reuse them.

use adaptive_fv::amr::{run_amr, run_amr_observed, AmrParams};
use adaptive_fv::cases::{self, CaseSpec};
use adaptive_fv::euler::{physical_flux, ConservedState, GasModel, Primitive};
use adaptive_fv::grid::BoundaryCondition;
use adaptive_fv::io::encode_grid;
use adaptive_fv::metrics::{
    self, convergence_rate, l1_error_amr, l1_error_mr, l1_uniform, Method, RunReport,
};
use adaptive_fv::mr::{child_stencil, project, run_mr, Idx, MrOptions};
use adaptive_fv::scheme::{ausm_plus, ausmdv, SchemeConfig};
use adaptive_fv::unigrid::{restrict_to_level, run_uniform, UniformGrid};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::path::PathBuf;
use std::time::Instant;

/// Timed runs are repeated and the fastest kept.
const TIMING_REPEATS: usize = 5;

struct Verdicts {
    lines: Vec<(usize, bool, bool)>,
}

impl Verdicts {
    /// Record one criterion. `advisory` marks the machine-dependent CPU
    /// criterion, whose failure is reported but does not fail the target.
    fn record(&mut self, n: usize, title: &str, pass: bool, advisory: bool, detail: &str) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let note = if !pass && advisory { " (machine-dependent, not fatal)" } else { "" };
        println!("criterion {n:>2} {tag} {title}{note}");
        for l in detail.lines() {
            println!("    {l}");
        }
        self.lines.push((n, pass, advisory));
    }
}

fn cache_dir() -> PathBuf {
    match std::env::var_os(cases::CACHE_ENV) {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("reference-cache"),
    }
}

fn max_abs(q: ConservedState) -> f64 {
    q.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

// ---------------------------------------------------------------- 1

fn criterion_1(v: &mut Verdicts) {
    let gas = GasModel::default();
    let mut rng = StdRng::seed_from_u64(20_240_601);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let w = Primitive::new(
            rng.gen_range(0.05..10.0),
            [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)],
            rng.gen_range(0.05..10.0),
        );
        let q = w.to_conserved(&gas);
        for axis in 0..3 {
            let f = physical_flux(&q, axis, &gas).unwrap();
            let scale = max_abs(f).max(1.0);
            for g in [ausm_plus(&q, &q, axis, &gas).unwrap(), ausmdv(&q, &q, axis, &gas).unwrap()] {
                worst = worst.max(max_abs(g - f) / scale);
            }
        }
    }
    let consistent = worst <= 1e-13;

    let mut detail = format!("F(q,q) = f(q): worst relative deviation {worst:.2e} over 1000 states, 3 axes, 2 fluxes\n");
    let mut conserved = true;
    let mut case = CaseSpec::lax_liu_6();
    case.bc = BoundaryCondition::periodic();
    for cfg in [SchemeConfig::MR_PRESET, SchemeConfig::AMR_PRESET] {
        let mut g = UniformGrid::from_case(&case, 6).unwrap();
        let dt = case.dt(case.steps(6).unwrap());
        let mut prev = g.total();
        // scale: the largest component total
        let scale = max_abs(prev);
        let mut drift: f64 = 0.0;
        for _ in 0..40 {
            g.step(dt, &cfg, &case.bc).unwrap();
            let now = g.total();
            drift = drift.max(max_abs(now - prev) / scale);
            prev = now;
        }
        conserved &= drift <= 1e-12;
        detail += &format!("periodic conservation {}: max relative change per step {drift:.2e}\n", cfg.name());
    }
    v.record(1, "flux consistency and periodic conservation", consistent && conserved, false, &detail);
}

// ---------------------------------------------------------------- 2

/// Exact cell average of x^i over [a, b].
fn mono_avg(i: u32, a: f64, b: f64) -> f64 {
    (b.powi(i as i32 + 1) - a.powi(i as i32 + 1)) / ((i as f64 + 1.0) * (b - a))
}

fn criterion_2(v: &mut Verdicts) {
    let bc = BoundaryCondition::outflow();
    let mut rng = StdRng::seed_from_u64(7);
    let mut poly_err: f64 = 0.0;
    for dim in [2usize, 3] {
        // all monomials x^i y^j z^k with i + j + k <= 2
        let mut monos = Vec::new();
        for i in 0..=2u32 {
            for j in 0..=2u32 {
                for k in 0..=2u32 {
                    if i + j + k <= 2 && (dim == 3 || k == 0) {
                        monos.push(([i, j, k], rng.gen_range(-1.0..1.0)));
                    }
                }
            }
        }
        let avg = |lo: [f64; 3], h: f64| -> f64 {
            monos
                .iter()
                .map(|(e, c)| c * (0..3).map(|a| if a < dim { mono_avg(e[a], lo[a], lo[a] + h) } else { 1.0 }).product::<f64>())
                .sum()
        };
        for n in [4i32, 8] {
            let h = 1.0 / n as f64;
            let coarse = |ix: Idx| {
                let v = avg([ix[0] as f64 * h, ix[1] as f64 * h, ix[2] as f64 * h], h);
                ConservedState::new(v, [0.0; 3], 0.0)
            };
            let nz = if dim == 3 { n } else { 1 };
            for k in 0..nz {
                for j in 0..n {
                    for i in 0..n {
                        let idx = [i, j, k];
                        for c in 0..1usize << dim {
                            let pred = child_stencil(dim, n, idx, c, &bc).apply(coarse).rho();
                            let lo = [
                                (2 * i + (c & 1) as i32) as f64 * h / 2.0,
                                (2 * j + ((c >> 1) & 1) as i32) as f64 * h / 2.0,
                                (2 * k + ((c >> 2) & 1) as i32) as f64 * h / 2.0,
                            ];
                            poly_err = poly_err.max((pred - avg(lo, h / 2.0)).abs());
                        }
                    }
                }
            }
        }
    }

    // mean preservation on arbitrary data, periodic and bounded
    let mut mean_err: f64 = 0.0;
    for bc in [BoundaryCondition::outflow(), BoundaryCondition::periodic()] {
        let n = 8;
        let data: Vec<f64> = (0..n * n * n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let coarse = |ix: Idx| {
            let v = data[(ix[0] + n * (ix[1] + n * ix[2])) as usize];
            ConservedState::new(v, [v, -v, 0.5 * v], 3.0 * v)
        };
        for dim in [2usize, 3] {
            for ix in [[0, 0, 0], [3, 5, 0], [7, 1, 6], [7, 7, 7]] {
                let ix = if dim == 2 { [ix[0], ix[1], 0] } else { ix };
                let kids: Vec<_> = (0..1usize << dim).map(|c| child_stencil(dim, n, ix, c, &bc).apply(coarse)).collect();
                mean_err = mean_err.max(max_abs(project(&kids) - coarse(ix)));
            }
        }
    }

    let case = CaseSpec::lax_liu_6();
    let cfg = SchemeConfig::MR_PRESET;
    let (g, _) = run_uniform(&case, 5, 40, &cfg).unwrap();
    let (tree, _) = run_mr(&case, 5, 40, &cfg, &MrOptions::new(0.0, false)).unwrap();
    let p = tree.leaf_projection_to_uniform(5).unwrap();
    let mut cycle_err: f64 = 0.0;
    for ix in g.block.interior() {
        cycle_err = cycle_err.max(max_abs(g.block.get(ix) - p.block.get(ix)));
    }
    let pass = poly_err <= 1e-13 && mean_err <= 1e-13 && cycle_err <= 1e-12;
    let detail = format!(
        "prediction on degree-2 polynomials (2D, 3D, bounded stencils included): max error {poly_err:.2e}\n\
         project(predict(q)) - q: max {mean_err:.2e}\n\
         eps = 0 MR vs uniform, Lax-Liu #6, L=5, 40 steps: max difference {cycle_err:.2e}"
    );
    v.record(2, "MR transform exactness", pass, false, &detail);
}

// ---------------------------------------------------------------- 3

fn criterion_3(v: &mut Verdicts) {
    let mut case = CaseSpec::lax_liu_6();
    case.bc = BoundaryCondition::periodic();
    // 8 steps with the level-6 time step; levels 5 and 6
    let n = 8;
    case.t_end = case.dt(case.steps(6).unwrap()) * n as f64;
    let mut detail = String::new();
    let mut pass = true;
    for lt in [false, true] {
        for correct in [true, false] {
            let mut params = AmrParams::from_case(&case, lt);
            params.flux_correction = correct;
            let mut totals = Vec::new();
            let (h, _) = run_amr_observed(&case, 6, n, &SchemeConfig::AMR_PRESET, &params, &mut |_, h| {
                totals.push(h.composite_total());
                Ok(())
            })
            .unwrap();
            let scale = max_abs(totals[0]);
            let drift = totals.windows(2).map(|w| max_abs(w[1] - w[0]) / scale).fold(0.0, f64::max);
            let name = if lt { "AMRLT" } else { "AMR" };
            let ok = if correct { drift <= 1e-12 } else { drift > 1e-8 };
            pass &= ok && h.depth() == 1;
            detail += &format!(
                "{name} flux correction {}: max relative change per root step {drift:.2e} (need {})\n",
                if correct { "on " } else { "off" },
                if correct { "<= 1e-12" } else { "> 1e-8" }
            );
        }
    }
    v.record(3, "AMR conservation ablation", pass, false, &detail);
}

// ---------------------------------------------------------------- 4-7

struct Run {
    method: Method,
    scheme: SchemeConfig,
    level: u32,
    report: RunReport,
    /// Fastest wall time over the repetitions.
    wall: f64,
}

fn default_scheme(m: Method) -> SchemeConfig {
    if m.is_amr_family() {
        SchemeConfig::AMR_PRESET
    } else {
        SchemeConfig::MR_PRESET
    }
}

/// One run with its L1 error against `reference`.
fn solve(case: &CaseSpec, m: Method, level: u32, cfg: &SchemeConfig, reference: &UniformGrid) -> (RunReport, Vec<u8>) {
    let n = case.steps(level).unwrap();
    let (mut report, l1, bytes) = match m {
        Method::Fv => {
            let (g, r) = run_uniform(case, level, n, cfg).unwrap();
            let l1 = l1_uniform(&g, &restrict_to_level(reference, level).unwrap()).unwrap();
            (r, l1, encode_grid(&g))
        }
        Method::Mr | Method::Mrlt => {
            let opts = MrOptions::new(case.mr_eps, m == Method::Mrlt);
            let (t, r) = run_mr(case, level, n, cfg, &opts).unwrap();
            (r, l1_error_mr(&t, reference, level).unwrap(), t.snapshot_text().into_bytes())
        }
        Method::Amr | Method::Amrlt => {
            let params = AmrParams::from_case(case, m == Method::Amrlt);
            let (h, r) = run_amr(case, level, n, cfg, &params).unwrap();
            (r, l1_error_amr(&h, reference).unwrap(), adaptive_fv::amr::encode_hierarchy(&h))
        }
    };
    report.l1 = Some(l1);
    (report, bytes)
}

fn sweep(case: &CaseSpec, levels: &[u32], ref_level: u32, repeats: usize) -> Vec<Run> {
    let mut refs = Vec::new();
    for cfg in [SchemeConfig::MR_PRESET, SchemeConfig::AMR_PRESET] {
        let t0 = Instant::now();
        let r = cases::reference(case, ref_level, &cfg, &cache_dir()).unwrap();
        println!("    reference {} L={ref_level} {}: {:.1} s", case.name, cfg.name(), t0.elapsed().as_secs_f64());
        refs.push((cfg, r));
    }
    let mut runs = Vec::new();
    for &level in levels {
        let mut entries = vec![(Method::Fv, SchemeConfig::MR_PRESET), (Method::Fv, SchemeConfig::AMR_PRESET)];
        entries.extend([Method::Mr, Method::Mrlt, Method::Amr, Method::Amrlt].map(|m| (m, default_scheme(m))));
        for (m, cfg) in entries {
            let reference = &refs.iter().find(|(s, _)| *s == cfg).unwrap().1;
            let (report, _) = solve(case, m, level, &cfg, reference);
            let mut wall = report.wall_s;
            for _ in 1..repeats {
                wall = wall.min(solve_timing(case, m, level, &cfg));
            }
            runs.push(Run { method: m, scheme: cfg, level, report, wall });
        }
    }
    runs
}

/// Wall time of a run without error evaluation.
fn solve_timing(case: &CaseSpec, m: Method, level: u32, cfg: &SchemeConfig) -> f64 {
    let n = case.steps(level).unwrap();
    match m {
        Method::Fv => run_uniform(case, level, n, cfg).unwrap().1.wall_s,
        Method::Mr | Method::Mrlt => run_mr(case, level, n, cfg, &MrOptions::new(case.mr_eps, m == Method::Mrlt)).unwrap().1.wall_s,
        Method::Amr | Method::Amrlt => {
            run_amr(case, level, n, cfg, &AmrParams::from_case(case, m == Method::Amrlt)).unwrap().1.wall_s
        }
    }
}

fn find<'a>(runs: &'a [Run], m: Method, scheme: SchemeConfig, level: u32) -> &'a Run {
    runs.iter().find(|r| r.method == m && r.scheme == scheme && r.level == level).unwrap()
}

/// Rates of an adaptive run against the FV run of its scheme, timed with
/// the fastest repetitions.
fn rates_of(runs: &[Run], r: &Run) -> metrics::Rates {
    let fv = find(runs, Method::Fv, r.scheme, r.level);
    let mut a = r.report.clone();
    a.wall_s = r.wall;
    let mut f = fv.report.clone();
    f.wall_s = fv.wall;
    metrics::rates(&a, &f).unwrap()
}

fn label(r: &Run) -> String {
    if r.method == Method::Fv {
        format!("FV[{}]", r.scheme.name())
    } else {
        r.method.tag().to_string()
    }
}

const ADAPTIVE: [Method; 4] = [Method::Mr, Method::Mrlt, Method::Amr, Method::Amrlt];

fn criteria_4_to_7(v: &mut Verdicts) {
    let case = CaseSpec::lax_liu_6();
    let levels = [5u32, 6, 7];
    let runs = sweep(&case, &levels, case.reference_level, TIMING_REPEATS);

    let mut table = format!(
        "{:<15} {:>2} {:>11} {:>7} {:>7} {:>7} {:>7} {:>8} {:>7} {:>7}\n",
        "method", "L", "L1(rho)", "rate", "pert%", "mem%", "mesh%", "CPU s", "CPU%", "ovh%"
    );
    for r in &runs {
        let e = r.report.l1_rho().unwrap();
        let rate = (r.level > levels[0])
            .then(|| convergence_rate(find(&runs, r.method, r.scheme, r.level - 1).report.l1_rho().unwrap(), e));
        let rt = (r.method != Method::Fv).then(|| rates_of(&runs, r));
        let pc = |x: Option<f64>| x.map(|x| format!("{:.1}", 100.0 * x)).unwrap_or_default();
        table += &format!(
            "{:<15} {:>2} {:>11.4e} {:>7} {:>7} {:>7} {:>7} {:>8.3} {:>7} {:>7}\n",
            label(r),
            r.level,
            e,
            rate.map(|x| format!("{x:.3}")).unwrap_or_default(),
            pc(rt.map(|x| x.perturbation)),
            pc(rt.map(|x| x.memory_compression)),
            pc(rt.map(|x| x.mesh_compression)),
            r.wall,
            pc(rt.map(|x| x.cpu_compression)),
            pc(rt.map(|x| x.overhead)),
        );
    }
    println!("    Lax-Liu #6 sweep, reference L={}, fastest of {TIMING_REPEATS} timings:", case.reference_level);
    for l in table.lines() {
        println!("    {l}");
    }

    // 4: convergence rates
    let mut pass4 = true;
    let mut d4 = String::new();
    let series: Vec<(Method, SchemeConfig)> = [(Method::Fv, SchemeConfig::MR_PRESET), (Method::Fv, SchemeConfig::AMR_PRESET)]
        .into_iter()
        .chain(ADAPTIVE.map(|m| (m, default_scheme(m))))
        .collect();
    for &(m, s) in &series {
        let e: Vec<f64> = levels.iter().map(|&l| find(&runs, m, s, l).report.l1_rho().unwrap()).collect();
        let rates: Vec<f64> = e.windows(2).map(|w| convergence_rate(w[0], w[1])).collect();
        let ok = rates.iter().all(|r| (0.5..=1.3).contains(r)) && rates.windows(2).all(|w| w[1] >= w[0]);
        pass4 &= ok;
        d4 += &format!(
            "{:<15} rates {} {}\n",
            label(find(&runs, m, s, 5)),
            rates.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" -> "),
            if ok { "ok" } else { "outside [0.5, 1.3] or decreasing" }
        );
    }
    v.record(4, "convergence rates in [0.5, 1.3], non-decreasing with L", pass4, false, &d4);

    // 5: perturbation
    let mut pass5 = true;
    let mut d5 = String::new();
    for m in ADAPTIVE {
        let p: Vec<f64> = levels.iter().map(|&l| rates_of(&runs, find(&runs, m, default_scheme(m), l)).perturbation).collect();
        let ok = p.iter().all(|&x| x < 0.10);
        pass5 &= ok;
        d5 += &format!("{:<6} perturbation % {}\n", m.tag(), p.iter().map(|x| format!("{:.2}", 100.0 * x)).collect::<Vec<_>>().join(", "));
    }
    v.record(5, "accuracy perturbation below 10%", pass5, false, &d5);

    // 6: compression trends
    let mut pass6 = true;
    let mut d6 = String::new();
    for m in ADAPTIVE {
        let rt: Vec<_> = levels.iter().map(|&l| rates_of(&runs, find(&runs, m, default_scheme(m), l))).collect();
        let mesh: Vec<f64> = rt.iter().map(|r| r.mesh_compression).collect();
        let mem: Vec<f64> = rt.iter().map(|r| r.memory_compression).collect();
        let ok = mesh.windows(2).all(|w| w[1] < w[0]) && mem.windows(2).all(|w| w[1] < w[0]);
        pass6 &= ok;
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{:.1}", 100.0 * x)).collect::<Vec<_>>().join(" > ");
        d6 += &format!("{:<6} mesh % {}   memory % {}\n", m.tag(), fmt(&mesh), fmt(&mem));
    }
    let top = *levels.last().unwrap();
    let mr_mesh = rates_of(&runs, find(&runs, Method::Mr, SchemeConfig::MR_PRESET, top)).mesh_compression;
    let amr_mesh = rates_of(&runs, find(&runs, Method::Amr, SchemeConfig::AMR_PRESET, top)).mesh_compression;
    let close = mr_mesh <= amr_mesh + 0.05;
    pass6 &= close;
    d6 += &format!("L={top}: MR mesh {:.1}% vs AMR mesh {:.1}% + 5 points\n", 100.0 * mr_mesh, 100.0 * amr_mesh);
    v.record(6, "compression rates decrease with L; MR mesh near AMR", pass6, false, &d6);

    // 7: CPU trend and overhead
    let mut pass7 = true;
    let mut d7 = String::new();
    for m in ADAPTIVE {
        let rt: Vec<_> = levels.iter().map(|&l| rates_of(&runs, find(&runs, m, default_scheme(m), l))).collect();
        let cpu: Vec<f64> = rt.iter().map(|r| r.cpu_compression).collect();
        let ovh = rt.last().unwrap().overhead;
        let decreasing = cpu.windows(2).all(|w| w[1] < w[0]);
        let below = *cpu.last().unwrap() < 1.0;
        let positive = ovh > 0.0;
        pass7 &= decreasing && below && positive;
        d7 += &format!(
            "{:<6} CPU % {} ({}), overhead at L={top}: {:.1}% ({})\n",
            m.tag(),
            cpu.iter().map(|x| format!("{:.1}", 100.0 * x)).collect::<Vec<_>>().join(" > "),
            if decreasing && below { "ok" } else { "not decreasing or not below 100%" },
            100.0 * ovh,
            if positive { "positive" } else { "not positive" }
        );
    }
    v.record(7, "CPU compression decreases with L, below 100% at the top level, positive overhead", pass7, true, &d7);

    // AMRLT vs AMR accuracy at the top level
    let e_amr = find(&runs, Method::Amr, SchemeConfig::AMR_PRESET, top).report.l1_rho().unwrap();
    let e_lt = find(&runs, Method::Amrlt, SchemeConfig::AMR_PRESET, top).report.l1_rho().unwrap();
    println!("    AMRLT vs AMR L1(rho) at L={top}: {:.2}% apart", 100.0 * (e_lt - e_amr).abs() / e_amr);
}

// ---------------------------------------------------------------- 8

fn criterion_8(v: &mut Verdicts) {
    let mem = metrics::memory_compression(50.3e6, 640, 512 * 512).unwrap();
    let mesh = metrics::mesh_compression(32.4e6, 640, 512 * 512).unwrap();
    let ovh = metrics::overhead(489.3, 180e6, 1420.0, 1280.0 * 1024.0 * 1024.0).unwrap();
    let pass = (100.0 * mem - 30.0).abs() <= 0.1 && (100.0 * mesh - 19.3).abs() <= 0.1 && (100.0 * ovh - 158.0).abs() <= 2.0;
    let detail = format!(
        "memory compression {:.2}% (30.0 +- 0.1), mesh compression {:.2}% (19.3 +- 0.1), overhead {:.1}% (158 +- 2)",
        100.0 * mem,
        100.0 * mesh,
        100.0 * ovh
    );
    v.record(8, "metric formulas", pass, false, &detail);
}

// ---------------------------------------------------------------- 9

fn criterion_9(v: &mut Verdicts) {
    let case = CaseSpec::ellipsoid3d();
    let levels = [4u32, 5];
    let runs = sweep(&case, &levels, case.reference_level, 1);
    let mut pass = true;
    let mut detail = String::new();
    let series: Vec<(Method, SchemeConfig)> = [(Method::Fv, SchemeConfig::MR_PRESET), (Method::Fv, SchemeConfig::AMR_PRESET)]
        .into_iter()
        .chain(ADAPTIVE.map(|m| (m, default_scheme(m))))
        .collect();
    for (m, s) in series {
        let e: Vec<f64> = levels.iter().map(|&l| find(&runs, m, s, l).report.l1_rho().unwrap()).collect();
        let decreasing = e[1] < e[0];
        let pert: Vec<f64> = if m == Method::Fv {
            Vec::new()
        } else {
            levels.iter().map(|&l| rates_of(&runs, find(&runs, m, s, l)).perturbation).collect()
        };
        let small = pert.iter().all(|&p| p < 0.10);
        pass &= decreasing && small;
        detail += &format!(
            "{:<15} L1(rho) {:.4e} -> {:.4e}{}{}\n",
            label(find(&runs, m, s, 4)),
            e[0],
            e[1],
            if pert.is_empty() {
                String::new()
            } else {
                format!(", perturbation % {}", pert.iter().map(|p| format!("{:.2}", 100.0 * p)).collect::<Vec<_>>().join(", "))
            },
            if decreasing && small { "" } else { "  <- fails" }
        );
    }
    v.record(9, "3D ellipsoid: errors decrease, perturbation below 10%", pass, false, &detail);
}

// ---------------------------------------------------------------- 10

fn criterion_10(v: &mut Verdicts) {
    let mut pass = true;
    let mut detail = String::new();
    for (case, level) in [(CaseSpec::lax_liu_6(), 6u32), (CaseSpec::ellipsoid3d(), 4)] {
        let reference = UniformGrid::from_case(&case, level).unwrap();
        for m in Method::ALL {
            let cfg = default_scheme(m);
            let (a, bytes_a) = solve(&case, m, level, &cfg, &reference);
            let (b, bytes_b) = solve(&case, m, level, &cfg, &reference);
            let same = bytes_a == bytes_b
                && a.cells_per_step == b.cells_per_step
                && a.leaves_per_step == b.leaves_per_step
                && a.l1.map(|x| x.map(f64::to_bits)) == b.l1.map(|x| x.map(f64::to_bits));
            pass &= same;
            detail += &format!(
                "{} {} L={level}: {} ({} bytes)\n",
                case.name,
                m.tag(),
                if same { "identical" } else { "DIFFERENT" },
                bytes_a.len()
            );
        }
    }
    v.record(10, "determinism of solver outputs", pass, false, &detail);
}

fn main() {
    // libtest flags such as --nocapture or filters are accepted and ignored
    let list = std::env::args().any(|a| a == "--list");
    if list {
        println!("acceptance: test");
        return;
    }
    let t0 = Instant::now();
    let mut v = Verdicts { lines: Vec::new() };
    criterion_1(&mut v);
    criterion_2(&mut v);
    criterion_3(&mut v);
    criteria_4_to_7(&mut v);
    criterion_8(&mut v);
    criterion_9(&mut v);
    criterion_10(&mut v);
    v.lines.sort_by_key(|l| l.0);
    let fatal: Vec<usize> = v.lines.iter().filter(|l| !l.1 && !l.2).map(|l| l.0).collect();
    let passed = v.lines.iter().filter(|l| l.1).count();
    println!("acceptance: {passed}/{} criteria passed in {:.0} s", v.lines.len(), t0.elapsed().as_secs_f64());
    if !fatal.is_empty() {
        println!("acceptance: FAILED criteria {fatal:?}");
        std::process::exit(1);
    }
}
