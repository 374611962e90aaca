use std::time::Instant;

use rustc_hash::FxHashMap;

use super::plan::{Plan, Register};
use super::tree::{DetailNorm, MrTree};
use crate::cases::CaseSpec;
use crate::error::{Result, SolverError};
use crate::euler::{max_wave_speed, primitives, ConservedState};
use crate::metrics::{Method, RunReport, TimerGroup};
use crate::scheme::{IntegratorKind, SchemeConfig};
use crate::unigrid::{note_cfl, UniformGrid};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvolveStats {
    pub fallbacks: usize,
    /// Virtual cells materialized for the stencils.
    pub n_virtual: usize,
    /// Leaf updates performed.
    pub leaf_updates: usize,
}

fn require_rk2(cfg: &SchemeConfig) -> Result<()> {
    if cfg.integrator != IntegratorKind::Rk2 {
        return Err(SolverError::Config("the multiresolution solvers use the RK2 integrator".into()));
    }
    Ok(())
}

/// Advance every leaf by `dt` with one RK2 step. Internal averages are
/// left stale; call `project_all` afterwards.
pub fn mr_evolve_global(tree: &mut MrTree, dt: f64, cfg: &SchemeConfig) -> Result<EvolveStats> {
    require_rk2(cfg)?;
    let plan = Plan::new(tree, (0, tree.max_level), 0);
    let mut q = plan.load(tree, &[]);
    let fallbacks = plan.rk2(tree, &mut q, dt, cfg, [&[], &[]], None)?;
    plan.store(tree, &q);
    tree.t += dt;
    Ok(EvolveStats { fallbacks, n_virtual: plan.n_virtual, leaf_updates: plan.n_active() })
}

/// Largest macro depth `m` allowed at fine step `k` of `n_steps`: leaves
/// of level ℓ step with `2^(L-max(ℓ, L-m)) dt`, and the cycle must end on
/// a step boundary that divides the remaining schedule.
pub fn macro_depth(tree: &MrTree, k: usize, n_steps: usize) -> u32 {
    let coarsest = (0..=tree.max_level)
        .find(|&l| tree.levels[l as usize].values().any(|n| n.leaf))
        .unwrap_or(tree.max_level);
    let mut m = tree.max_level - coarsest;
    if k > 0 {
        m = m.min(k.trailing_zeros());
    }
    m = m.min(n_steps.trailing_zeros());
    while m > 0 && k + (1 << m) > n_steps {
        m -= 1;
    }
    m
}

struct LtsCtx<'a> {
    cfg: &'a SchemeConfig,
    dt_fine: f64,
    floor: u32,
    old: Vec<FxHashMap<u64, ConservedState>>,
    reg: Register,
    t0: Vec<f64>,
    dts: Vec<f64>,
    seen: Vec<bool>,
    stats: EvolveStats,
}

/// One macro cycle of local time stepping over `2^depth` fine steps of
/// size `dt_fine`. Leaves of level ℓ ≥ L-depth take steps of
/// `2^(L-ℓ) dt_fine`; coarser leaves share the step of level L-depth.
/// Finer levels read coarser leaves interpolated linearly in time between
/// the two ends of the coarse step. Fluxes through coarse-fine faces are
/// summed over the fine substeps and replace the coarse estimate.
pub fn mrlt_evolve(tree: &mut MrTree, dt_fine: f64, depth: u32, cfg: &SchemeConfig) -> Result<EvolveStats> {
    require_rk2(cfg)?;
    let depth = depth.min(tree.max_level);
    let n = tree.max_level as usize + 1;
    let mut ctx = LtsCtx {
        cfg,
        dt_fine,
        floor: tree.max_level - depth,
        old: (0..n).map(|_| FxHashMap::default()).collect(),
        reg: Register::default(),
        t0: vec![0.0; n],
        dts: vec![1.0; n],
        seen: vec![false; n],
        stats: EvolveStats::default(),
    };
    let floor = ctx.floor;
    advance(tree, &mut ctx, floor, 0.0)?;
    tree.t += dt_fine * (1u64 << depth) as f64;
    Ok(ctx.stats)
}

fn advance(tree: &mut MrTree, ctx: &mut LtsCtx, e: u32, t: f64) -> Result<()> {
    let dt = ctx.dt_fine * (1u64 << (tree.max_level - e)) as f64;
    let active = if e == ctx.floor { (0, e) } else { (e, e) };
    let plan = Plan::new(tree, active, ctx.floor);
    if plan.n_active() > 0 {
        let mut q = plan.load(tree, &ctx.old);
        let mid = t + 0.5 * dt;
        let theta = |tau: f64| -> Vec<f64> {
            (0..ctx.t0.len()).map(|c| if (c as u32) < e { (tau - ctx.t0[c]) / ctx.dts[c] } else { 0.0 }).collect()
        };
        let (th0, th1) = (theta(t), theta(mid));
        plan.save_old(&q, &mut ctx.old);
        ctx.stats.fallbacks += plan.rk2(tree, &mut q, dt, ctx.cfg, [&th0, &th1], Some(&mut ctx.reg))?;
        plan.store(tree, &q);
        ctx.stats.leaf_updates += plan.n_active();
        if !ctx.seen[e as usize] {
            ctx.seen[e as usize] = true;
            ctx.stats.n_virtual += plan.n_virtual;
        }
    }
    ctx.t0[e as usize] = t;
    ctx.dts[e as usize] = dt;
    if e < tree.max_level && tree.levels[e as usize + 1..].iter().any(|m| !m.is_empty()) {
        advance(tree, ctx, e + 1, t)?;
        advance(tree, ctx, e + 1, t + 0.5 * dt)?;
    }
    // replace coarse estimates by the fine flux sums
    let mine: Vec<(u32, u64)> = ctx.reg.keys().filter(|(l, _)| *l >= active.0 && *l <= active.1).copied().collect();
    for k in mine {
        let corr = ctx.reg.remove(&k).unwrap();
        let node = tree.levels[k.0 as usize].get_mut(&k.1).expect("register for a missing leaf");
        node.q += corr;
        if let Err(err) = primitives(&node.q, &tree.gas) {
            let ix = super::tree::unpack(k.1);
            return Err(err.at(|| format!("leaf {ix:?} on level {} after flux correction", k.0)));
        }
    }
    Ok(())
}

/// Largest per-axis CFL number over the leaves. Every leaf is measured
/// against the finest spacing, which bounds both global and local steps.
fn tree_courant(tree: &MrTree, dt: f64) -> Result<f64> {
    let ratio = dt / tree.dx(tree.max_level);
    let mut c = 0.0f64;
    for m in &tree.levels {
        for n in m.values().filter(|n| n.leaf) {
            for a in 0..tree.dim {
                c = c.max(max_wave_speed(&n.q, a, &tree.gas)? * ratio);
            }
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MrOptions {
    pub eps: f64,
    /// Local time stepping (MRLT).
    pub lts: bool,
    pub norm: DetailNorm,
}

impl MrOptions {
    pub fn new(eps: f64, lts: bool) -> Self {
        MrOptions { eps, lts, norm: DetailNorm::default() }
    }
}

/// Run MR or MRLT on `case` with finest level `level`.
pub fn run_mr(
    case: &CaseSpec,
    level: u32,
    n_steps: usize,
    cfg: &SchemeConfig,
    opts: &MrOptions,
) -> Result<(MrTree, RunReport)> {
    run_mr_observed(case, level, n_steps, cfg, opts, &mut |_, _| Ok(()))
}

/// As `run_mr`, calling `observe(steps_done, tree)` after every adaptation
/// cycle. Time spent in `observe` is excluded from the report.
pub fn run_mr_observed(
    case: &CaseSpec,
    level: u32,
    n_steps: usize,
    cfg: &SchemeConfig,
    opts: &MrOptions,
    observe: &mut dyn FnMut(usize, &MrTree) -> Result<()>,
) -> Result<(MrTree, RunReport)> {
    require_rk2(cfg)?;
    let MrOptions { eps, lts, norm } = *opts;
    let method = if lts { Method::Mrlt } else { Method::Mr };
    let mut report = RunReport::new(method, case.name, level, n_steps, case.n_cells(level), *cfg);
    let t0 = Instant::now();
    let mut tree = report.timers.time(TimerGroup::Adaptation, || -> Result<MrTree> {
        let g = UniformGrid::from_case(case, level)?;
        let scale = norm.scale(&g);
        Ok(MrTree::from_uniform(&g, case.bc, eps, scale))
    })?;
    let dt = case.dt(n_steps);
    let mut k = 0;
    let mut excluded = std::time::Duration::ZERO;
    while k < n_steps {
        let depth = if lts { macro_depth(&tree, k, n_steps) } else { 0 };
        report.timers.time(TimerGroup::Adaptation, || tree.refine());
        let cfl = report.timers.time(TimerGroup::Other, || tree_courant(&tree, dt))?;
        note_cfl(&mut report, cfl, k);
        let leaves = tree.n_leaves() as u64;
        let nodes = tree.n_nodes() as u64;
        let stats = report
            .timers
            .time(TimerGroup::Numerics, || {
                if lts {
                    mrlt_evolve(&mut tree, dt, depth, cfg)
                } else {
                    mr_evolve_global(&mut tree, dt, cfg)
                }
            })
            .map_err(|e| e.at(|| format!("step {k}")))?;
        report.fallbacks += stats.fallbacks;
        report.timers.time(TimerGroup::Transfer, || tree.project_all());
        report.timers.time(TimerGroup::Adaptation, || {
            tree.compute_details();
            tree.coarsen();
        });
        for _ in 0..1usize << depth {
            report.record_step(nodes + stats.n_virtual as u64, leaves);
        }
        k += 1 << depth;
        let t_obs = Instant::now();
        observe(k, &tree)?;
        excluded += t_obs.elapsed();
    }
    tree.t = case.t_end;
    report.wall_s = (t0.elapsed() - excluded).as_secs_f64();
    Ok((tree, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::{Primitive, NVAR};
    use crate::grid::BoundaryCondition;
    use crate::unigrid::run_uniform;

    fn full_tree(case: &CaseSpec, level: u32) -> MrTree {
        let g = UniformGrid::from_case(case, level).unwrap();
        MrTree::from_uniform(&g, case.bc, 0.0, MrTree::scale_of(&g))
    }

    fn max_diff(tree: &MrTree, g: &UniformGrid) -> f64 {
        let p = tree.leaf_projection_to_uniform(g.level).unwrap();
        let mut m = 0.0f64;
        for ix in g.block.interior() {
            for c in 0..NVAR {
                m = m.max((p.block.get(ix)[c] - g.block.get(ix)[c]).abs());
            }
        }
        m
    }

    #[test]
    fn eps_zero_matches_uniform_solver() {
        let case = CaseSpec::lax_liu_6();
        let cfg = SchemeConfig::MR_PRESET;
        let n = case.steps(5).unwrap();
        let mut tree = full_tree(&case, 5);
        let mut g = UniformGrid::from_case(&case, 5).unwrap();
        for _ in 0..n {
            tree.refine();
            let st = mr_evolve_global(&mut tree, case.dt(n), &cfg).unwrap();
            assert_eq!(st.n_virtual, 0);
            tree.project_all();
            tree.compute_details();
            tree.coarsen();
            g.step(case.dt(n), &cfg, &case.bc).unwrap();
            assert_eq!(tree.n_leaves(), 1 << 10);
            assert!(max_diff(&tree, &g) <= 1e-12);
        }
        let (_, report) = run_mr(&case, 5, n, &cfg, &MrOptions::new(0.0, false)).unwrap();
        assert_eq!(report.sum_leaves(), (n << 10) as f64);
    }

    #[test]
    fn eps_zero_matches_uniform_solver_3d() {
        let case = CaseSpec::ellipsoid3d();
        let cfg = SchemeConfig::MR_PRESET;
        let n = case.steps(4).unwrap();
        let (tree, _) = run_mr(&case, 4, n, &cfg, &MrOptions::new(0.0, false)).unwrap();
        let (g, _) = run_uniform(&case, 4, n, &cfg).unwrap();
        assert!(max_diff(&tree, &g) <= 1e-12);
    }

    #[test]
    fn constant_tree_stays_constant() {
        let case = CaseSpec::lax_liu_6();
        let gas = case.gas;
        let q = Primitive::new(1.3, [0.2, -0.4, 0.0], 0.8).to_conserved(&gas);
        let mut g = UniformGrid::new(2, 5, 0.0, 1.0, gas);
        for ix in g.block.interior().collect::<Vec<_>>() {
            g.block.set(ix, q);
        }
        let mut tree = MrTree::from_uniform(&g, case.bc, 1e-3, MrTree::scale_of(&g));
        assert_eq!(tree.n_leaves(), 1);
        for lts in [false, true] {
            for _ in 0..3 {
                if lts {
                    mrlt_evolve(&mut tree, 1e-3, 2, &SchemeConfig::MR_PRESET).unwrap();
                } else {
                    mr_evolve_global(&mut tree, 1e-3, &SchemeConfig::MR_PRESET).unwrap();
                }
            }
            let v = tree.get(0, [0, 0, 0]).unwrap().q;
            for c in 0..NVAR {
                assert!((v[c] - q[c]).abs() < 1e-14);
            }
        }
    }

    /// Lax-Liu data on a periodic box, adapted with a moderate threshold.
    fn periodic_tree(level: u32) -> MrTree {
        let mut case = CaseSpec::lax_liu_6();
        case.bc = BoundaryCondition::periodic();
        let g = UniformGrid::from_case(&case, level).unwrap();
        MrTree::from_uniform(&g, case.bc, 0.01, MrTree::scale_of(&g))
    }

    fn rel_change(a: ConservedState, b: ConservedState) -> f64 {
        (0..NVAR).map(|c| (a[c] - b[c]).abs() / a.abs_max()).fold(0.0, f64::max)
    }

    #[test]
    fn global_step_conserves_across_levels() {
        let mut tree = periodic_tree(6);
        let dt = 0.25 / 80.0;
        for _ in 0..10 {
            tree.refine();
            let levels: Vec<u32> = tree.sorted_leaves().iter().map(|(l, _)| *l).collect();
            assert!(levels.iter().min() < levels.iter().max());
            let before = tree.total();
            let st = mr_evolve_global(&mut tree, dt, &SchemeConfig::MR_PRESET).unwrap();
            assert!(st.n_virtual > 0);
            assert!(rel_change(before, tree.total()) < 1e-12);
            tree.project_all();
            tree.compute_details();
            tree.coarsen();
            tree.check_graded().unwrap();
        }
    }

    #[test]
    fn local_step_conserves_across_levels() {
        let mut tree = periodic_tree(6);
        let dt = 0.25 / 80.0;
        for _ in 0..4 {
            tree.refine();
            let depth = macro_depth(&tree, 0, 64).min(3);
            assert!(depth > 0);
            let before = tree.total();
            mrlt_evolve(&mut tree, dt, depth, &SchemeConfig::MR_PRESET).unwrap();
            assert!(rel_change(before, tree.total()) < 1e-12);
            tree.project_all();
            tree.compute_details();
            tree.coarsen();
        }
    }

    #[test]
    fn one_level_tree_local_equals_global() {
        // all leaves on level 3 of a level-5 tree
        let case = CaseSpec::lax_liu_6();
        let g = UniformGrid::from_case(&case, 5).unwrap();
        let mut a = MrTree::from_uniform(&g, case.bc, 0.0, MrTree::scale_of(&g));
        for l in [4, 3] {
            let keys: Vec<Idx> =
                a.sorted_nodes().into_iter().filter(|(lv, _, n)| *lv == l && !n.leaf).map(|(_, ix, _)| ix).collect();
            for ix in keys {
                a.merge(l, ix);
            }
        }
        a.check_graded().unwrap();
        assert!(a.sorted_leaves().iter().all(|(l, _)| *l == 3));
        let mut b = a.clone();
        let dt = 1e-3;
        mrlt_evolve(&mut a, dt, 2, &SchemeConfig::MR_PRESET).unwrap();
        mr_evolve_global(&mut b, 4.0 * dt, &SchemeConfig::MR_PRESET).unwrap();
        for ((_, _, x), (_, _, y)) in a.sorted_nodes().iter().zip(b.sorted_nodes().iter()) {
            assert_eq!(x.q, y.q);
        }
    }

    #[test]
    fn hancock_is_rejected() {
        let case = CaseSpec::lax_liu_6();
        assert!(matches!(run_mr(&case, 4, 20, &SchemeConfig::AMR_PRESET, &MrOptions::new(0.01, false)), Err(SolverError::Config(_))));
    }

    #[test]
    fn macro_depth_respects_schedule() {
        let tree = periodic_tree(6);
        let m0 = macro_depth(&tree, 0, 80);
        assert!(m0 >= 1 && 80 % (1 << m0) == 0);
        assert_eq!(macro_depth(&tree, 2, 80), 1);
        assert_eq!(macro_depth(&tree, 79, 80), 0);
    }

    use super::super::predict::Idx;
}
