use std::path::Path;

use halfspace::extension::{
    extend_dirichlet, extend_neumann, fourier_oracle, fractional_laplacian, BoundaryFunction,
    ExtensionKind, FracOrder,
};
use halfspace::field::{Constant, HalfSpaceFunction, PowerFamily, TestFunction};
use halfspace::kernels::{eval_kernel, kernel_normalization, poisson_mass_closed_form};
use halfspace::liouville::{
    moving_sphere_scan, probe_set, tangential_variation, uniqueness_experiment, ProbeDomain,
};
use halfspace::solver::{fit_family, solve};
use halfspace::transform::{default_invariance_probe, invariance_study, MoebiusMap};
use halfspace::{KernelSpec, KernelVariant, Point, WeightExponent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{self, FamilySpec};
use crate::output::{Meta, OutDir};
use crate::CliError;

pub struct Ctx<'a> {
    pub config: Option<&'a Path>,
    pub out: OutDir,
    pub seed: u64,
}

/// What a command reports back: a one-line summary and, when a numerical
/// check did not hold, the reason.
pub struct Outcome {
    pub summary: String,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Self {
            summary,
            failure: None,
        }
    }
}

fn exponent(a: f64) -> Result<WeightExponent, CliError> {
    Ok(WeightExponent::new(a)?)
}

fn kernel_a(v: &KernelVariant) -> serde_json::Value {
    match *v {
        KernelVariant::PoissonType { a } | KernelVariant::GammaD { a } | KernelVariant::GammaN { a } => {
            json!(a)
        }
        _ => serde_json::Value::Null,
    }
}

pub fn kernel_eval(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg: config::KernelEvalConfig = config::load(ctx.config)?;
    let spec = KernelSpec::new(cfg.kernel, cfg.n)?;
    #[derive(Serialize)]
    struct Row {
        point: Vec<f64>,
        value: f64,
    }
    let mut rows = Vec::with_capacity(cfg.points.len());
    for p in &cfg.points {
        if p.len() != cfg.n {
            return Err(CliError::Config(format!("point {p:?} must have {} coordinates", cfg.n)));
        }
        let value = eval_kernel(&spec, &p[..cfg.n - 1], p[cfg.n - 1])?;
        rows.push(Row {
            point: p.clone(),
            value,
        });
    }
    let meta = Meta::new("kernel eval", kernel_a(&cfg.kernel), json!(cfg.n), None, ctx.seed);
    let path = ctx.out.report(
        "kernel_eval.json",
        &meta,
        &json!({ "kernel": spec, "values": rows }),
    )?;
    Ok(Outcome::ok(format!(
        "kernel eval: {} points -> {}",
        rows.len(),
        path.display()
    )))
}

pub fn kernel_norm(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg: config::KernelNormConfig = config::load(ctx.config)?;
    let spec = KernelSpec::new(cfg.kernel, cfg.n)?;
    let computed = kernel_normalization(&spec)?;
    let closed = match cfg.kernel {
        KernelVariant::PoissonType { a } => Some(poisson_mass_closed_form(a, cfg.n)?),
        _ => None,
    };
    let rel = closed.map(|c| (computed - c).abs() / c);
    let meta = Meta::new("kernel norm", kernel_a(&cfg.kernel), json!(cfg.n), None, ctx.seed);
    let path = ctx.out.report(
        "kernel_norm.json",
        &meta,
        &json!({
            "kernel": spec,
            "computed": computed,
            "closed_form": closed,
            "relative_difference": rel,
        }),
    )?;
    Ok(Outcome::ok(format!(
        "kernel norm: {computed:.15} (closed form {}) -> {}",
        closed.map_or("n/a".into(), |c| format!("{c:.15}")),
        path.display()
    )))
}

pub fn verify_invariance(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg: config::InvarianceConfig = config::load(ctx.config)?;
    if cfg.steps.len() < 2 || cfg.steps.iter().any(|h| !(*h > 0.0)) {
        return Err(CliError::Config("need at least two positive steps".into()));
    }
    #[derive(Serialize)]
    struct Case {
        n: usize,
        a: f64,
        function: &'static str,
        logarithmic: bool,
        residual_linf: Vec<f64>,
        rate: f64,
        pass: bool,
    }
    let mut cases = Vec::new();
    let mut all_a = Vec::new();
    for &n in &cfg.dimensions {
        if !(2..=3).contains(&n) {
            return Err(CliError::Config(format!("dimension must be 2 or 3, got {n}")));
        }
        let mut center = cfg.center.clone();
        center.resize(n - 1, 0.0);
        let map = MoebiusMap::at_boundary(&center, cfg.radius)?;
        let probe = default_invariance_probe(&map);
        let exps = cfg
            .exponents
            .clone()
            .unwrap_or_else(|| vec![-0.5, 0.0, 0.5, 2.0 - n as f64]);
        let mut seen = Vec::new();
        for a in exps {
            if seen.contains(&a) {
                continue;
            }
            seen.push(a);
            all_a.push(a);
            let wa = exponent(a)?;
            for f in TestFunction::ALL {
                let study = invariance_study(&f, &map, wa, &probe, &cfg.steps)?;
                cases.push(Case {
                    n,
                    a,
                    function: f.name(),
                    logarithmic: wa.is_special(n),
                    pass: study.rate >= cfg.min_rate,
                    rate: study.rate,
                    residual_linf: study.residual_linf,
                });
            }
        }
    }
    let min_rate = cases.iter().map(|c| c.rate).fold(f64::INFINITY, f64::min);
    let failed = cases.iter().filter(|c| !c.pass).count();
    let meta = Meta::new(
        "verify-invariance",
        json!(all_a),
        json!(cfg.dimensions),
        None,
        ctx.seed,
    );
    let path = ctx.out.report(
        "verify_invariance.json",
        &meta,
        &json!({ "steps": cfg.steps, "min_rate_required": cfg.min_rate, "cases": cases, "min_rate": min_rate }),
    )?;
    for c in &cases {
        println!(
            "n={} a={:+.3} {:<24} rate {:.3} {}",
            c.n,
            c.a,
            c.function,
            c.rate,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    Ok(Outcome {
        summary: format!(
            "verify-invariance: {} cases, min rate {min_rate:.3} -> {}",
            cases.len(),
            path.display()
        ),
        failure: (failed > 0).then(|| format!("{failed} cases below rate {}", cfg.min_rate)),
    })
}

pub fn solve_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg: config::SolveRunConfig = config::load(ctx.config)?;
    let a = exponent(cfg.a)?;
    let grid = cfg.grid.build(cfg.n)?;
    let data = cfg.boundary.build(cfg.a, grid.half_width(), ctx.seed);
    let (u, report) = solve(grid, a, &data, &cfg.solver)?;
    let fit = fit_family(&u)?;
    let variation = tangential_variation(&u);
    let meta = Meta::new("solve", json!(cfg.a), json!(cfg.n), Some(grid), ctx.seed);
    let csv = ctx.out.field("solve.csv", &meta, &u)?;
    let path = ctx.out.report(
        "solve.json",
        &meta,
        &json!({
            "boundary": cfg.boundary,
            "solver": cfg.solver,
            "report": report,
            "fit": fit,
            "tangential_variation": variation,
            "field": csv.file_name().map(|s| s.to_string_lossy().into_owned()),
        }),
    )?;
    Ok(Outcome::ok(format!(
        "solve: {} iterations, c_star={:.6} c2={:.6}, max principle {} -> {}",
        report.iterations,
        fit.c_star,
        fit.c2,
        if report.max_principle_ok { "ok" } else { "violated" },
        path.display()
    )))
}

pub fn extend(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg: config::ExtendConfig = config::load(ctx.config)?;
    let a = exponent(cfg.a)?;
    let n = match &cfg.points.first() {
        Some(p) => p.len(),
        None => return Err(CliError::Config("no points given".into())),
    };
    let f = BoundaryFunction::new(cfg.data.clone(), n)?;
    let pts = cfg
        .points
        .iter()
        .map(|p| Point::new(p))
        .collect::<Result<Vec<_>, _>>()?;
    let values = match cfg.kind {
        ExtensionKind::Dirichlet => extend_dirichlet(&f, a, &pts, &cfg.options)?,
        ExtensionKind::Neumann => extend_neumann(&f, a, &pts, &cfg.options)?,
    };
    let meta = Meta::new("extend", json!(cfg.a), json!(n), None, ctx.seed);
    let path = ctx.out.report(
        "extend.json",
        &meta,
        &json!({ "kind": cfg.kind, "data": cfg.data, "options": cfg.options, "values": values }),
    )?;
    Ok(Outcome::ok(format!(
        "extend: {} points -> {}",
        values.len(),
        path.display()
    )))
}

pub fn fraclap(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg: config::FracLapConfig = config::load(ctx.config)?;
    let s = FracOrder::new(cfg.s)?;
    let dim = match cfg.points.first() {
        Some(p) => p.len(),
        None => return Err(CliError::Config("no points given".into())),
    };
    let f = BoundaryFunction::new(cfg.data.clone(), dim + 1)?;
    #[derive(Serialize)]
    struct Row {
        xprime: Vec<f64>,
        value: f64,
        error_estimate: f64,
        low_confidence: bool,
        oracle: Option<f64>,
        relative_difference: Option<f64>,
    }
    let mut rows = Vec::new();
    for xp in &cfg.points {
        if xp.len() != dim {
            return Err(CliError::Config("points must share one dimension".into()));
        }
        let r = fractional_laplacian(&f, s, xp, &cfg.options)?;
        let oracle = if dim == 1 {
            fourier_oracle(&f, s, xp[0]).ok()
        } else {
            None
        };
        rows.push(Row {
            xprime: xp.clone(),
            value: r.value,
            error_estimate: r.error_estimate,
            low_confidence: r.low_confidence,
            relative_difference: oracle.map(|o| (r.value - o).abs() / o.abs()),
            oracle,
        });
    }
    let low = rows.iter().filter(|r| r.low_confidence).count();
    let meta = Meta::new("fraclap", json!(s.exponent().value()), json!(dim + 1), None, ctx.seed);
    let path = ctx.out.report(
        "fraclap.json",
        &meta,
        &json!({ "s": s, "data": cfg.data, "options": cfg.options, "results": rows }),
    )?;
    for r in &rows {
        println!(
            "x'={:?} value {:.8} oracle {}",
            r.xprime,
            r.value,
            r.oracle.map_or("n/a".into(), |o| format!("{o:.8}"))
        );
    }
    Ok(Outcome {
        summary: format!("fraclap: {} points -> {}", rows.len(), path.display()),
        failure: (low > 0).then(|| format!("{low} low-confidence extrapolations")),
    })
}

fn family(spec: FamilySpec, a: f64) -> Box<dyn HalfSpaceFunction> {
    let p = 1.0 - a;
    match spec {
        FamilySpec::Positive { c } => Box::new(PowerFamily::new(c, p, 1.0)),
        FamilySpec::Negative => Box::new(PowerFamily::new(1.0, p, -1.0)),
        FamilySpec::Logarithmic { c } => Box::new(PowerFamily::new(c, p, 0.0)),
        FamilySpec::Constant { value } => Box::new(Constant(value)),
    }
}

pub fn moving_sphere(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg: config::MovingSphereConfig = config::load(ctx.config)?;
    let a = exponent(cfg.a)?;
    if !(2..=3).contains(&cfg.n) {
        return Err(CliError::Config(format!("n must be 2 or 3, got {}", cfg.n)));
    }
    if matches!(cfg.family, FamilySpec::Logarithmic { .. }) && !a.is_special(cfg.n) {
        return Err(CliError::Config("the logarithmic family needs a = 2 - n".into()));
    }
    let [lo, hi] = cfg.maps.radius_range;
    if !(lo > 0.0 && hi >= lo) || cfg.maps.count == 0 {
        return Err(CliError::Config("radius_range must satisfy 0 < lo <= hi and count > 0".into()));
    }
    let u = family(cfg.family, cfg.a);
    let domain = ProbeDomain {
        n: cfg.n,
        half_width: cfg.probes.half_width,
        height: cfg.probes.height,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut plan = Vec::with_capacity(cfg.maps.count);
    for _ in 0..cfg.maps.count {
        let c: Vec<f64> = (0..cfg.n - 1)
            .map(|_| rng.gen_range(-cfg.maps.center_range..=cfg.maps.center_range))
            .collect();
        let lam = (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp();
        let map = MoebiusMap::at_boundary(&c, lam)?;
        let probes = probe_set(&map, &domain, cfg.probes.per_axis, cfg.probes.quasi);
        plan.push((map, probes));
    }
    let report = moving_sphere_scan(&u, a, &plan, cfg.tolerance)?;
    let meta = Meta::new("moving-sphere", json!(cfg.a), json!(cfg.n), None, ctx.seed);
    let path = ctx.out.report(
        "moving_sphere.json",
        &meta,
        &json!({ "family": cfg.family, "scan": report }),
    )?;
    Ok(Outcome {
        summary: format!(
            "moving-sphere: {} maps, global min {:.3e}, {} violations -> {}",
            report.per_map.len(),
            report.global_min,
            report.violation_count,
            path.display()
        ),
        failure: (report.violation_count > 0)
            .then(|| format!("{} probes with w < -{}", report.violation_count, cfg.tolerance)),
    })
}

pub fn classify(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg: config::ClassifyConfig = config::load(ctx.config)?;
    let a = exponent(cfg.a)?;
    let grid = cfg.grid.build(cfg.n)?;
    let (u, report) = uniqueness_experiment(cfg.scenario, a, grid, &cfg.experiment)?;
    let meta = Meta::new("classify", json!(cfg.a), json!(cfg.n), Some(grid), ctx.seed);
    ctx.out.field("classify.csv", &meta, &u)?;
    let path = ctx.out.report("classify.json", &meta, &report)?;
    Ok(Outcome::ok(format!(
        "classify: c_star={:.6} c2={:.6} fit residual {:.2e}, tangential variation {:.2e} -> {}",
        report.fit.c_star,
        report.fit.c2,
        report.fit.residual,
        report.tangential_variation,
        path.display()
    )))
}
