//! Moving-sphere comparison scans and uniqueness experiments.
//!
//! For a map with centre `x` on the boundary and radius `λ`, the comparison
//! function is `w_{x,λ}(y) = u(y) - u_{x,λ}(y)` outside the ball `B_λ(x)`.
//! The classification results assert `w ≥ 0` for the solution families
//!
//! * `u = 1 + C y_n^{1-a}` with `n - 2 + a > 0`,
//! * `u = y_n^{1-a} - 1` with `a < 2 - n`,
//! * `u = C y_n^{1-a}` (logarithmic transform) with `a = 2 - n`.
//!
//! The normalisations `u > 1/2` or `u ≥ -2` used there are shifts of the
//! general lower bound `u > -C`; the scans work with the shifted forms and do
//! not test the general statement. A scan is a certificate on a finite probe
//! set, not a proof.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::HalfSpaceFunction;
use crate::grid::{HalfSpaceGrid, ScalarField};
use crate::kernels::WeightExponent;
use crate::operator::BoundaryDatum;
use crate::point::Point;
use crate::solver::{fit_family, solve, FamilyFit, SolveConfig, SolveReport};
use crate::transform::{kelvin, MoebiusMap};

/// Values of `w_{x,λ}` on a probe set outside the closed ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonField {
    pub map: MoebiusMap,
    pub a: f64,
    pub points: Vec<Point>,
    pub values: Vec<f64>,
}

impl ComparisonField {
    pub fn new<U: HalfSpaceFunction>(
        u: &U,
        map: MoebiusMap,
        a: WeightExponent,
        probes: &[Point],
    ) -> Result<Self> {
        let t = kelvin(u, map, a);
        let mut values = Vec::with_capacity(probes.len());
        for y in probes {
            if y.dim() != map.dim() {
                return Err(Error::Validation(format!(
                    "probe {y:?} has the wrong dimension"
                )));
            }
            let d = (*y - map.center()).norm();
            if !(d > map.radius()) {
                return Err(Error::Precondition(format!(
                    "probe {y:?} lies in the closed ball of radius {} about {:?}",
                    map.radius(),
                    map.center()
                )));
            }
            let w = u.value(y) - t.eval(y)?;
            if !w.is_finite() {
                return Err(Error::Domain(format!("w is not finite at {y:?}")));
            }
            values.push(w);
        }
        Ok(Self {
            map,
            a: a.value(),
            points: probes.to_vec(),
            values,
        })
    }

    /// Smallest value and where it is attained.
    pub fn minimum(&self) -> Option<(f64, Point)> {
        self.values
            .iter()
            .zip(&self.points)
            .fold(None, |best: Option<(f64, Point)>, (&v, &p)| match best {
                Some((b, _)) if b <= v => best,
                _ => Some((v, p)),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapMinimum {
    pub map: MoebiusMap,
    pub min: f64,
    pub argmin: Option<Point>,
    pub probes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub map_index: usize,
    pub point: Point,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub per_map: Vec<MapMinimum>,
    /// Minimum over `per_map`.
    pub global_min: f64,
    /// Points with `w < -tolerance`, at most [`MAX_RECORDED_VIOLATIONS`].
    pub violations: Vec<Violation>,
    pub violation_count: usize,
    pub tolerance: f64,
}

pub const MAX_RECORDED_VIOLATIONS: usize = 100;

/// Scan each map over its own probe set.
///
/// Maps are processed in parallel and merged in map order.
pub fn moving_sphere_scan<U: HalfSpaceFunction>(
    u: &U,
    a: WeightExponent,
    plan: &[(MoebiusMap, Vec<Point>)],
    tolerance: f64,
) -> Result<ScanReport> {
    if plan.is_empty() {
        return Err(Error::Validation("scan needs at least one map".into()));
    }
    let fields: Vec<Result<ComparisonField>> = crate::par::map_range(plan.len(), |i| {
        ComparisonField::new(u, plan[i].0, a, &plan[i].1)
    });
    let mut per_map = Vec::with_capacity(plan.len());
    let mut violations = Vec::new();
    let mut violation_count = 0;
    for (i, field) in fields.into_iter().enumerate() {
        let field = field?;
        let (min, argmin) = match field.minimum() {
            Some((v, p)) => (v, Some(p)),
            None => (f64::INFINITY, None),
        };
        for (&w, &p) in field.values.iter().zip(&field.points) {
            if w < -tolerance {
                violation_count += 1;
                if violations.len() < MAX_RECORDED_VIOLATIONS {
                    violations.push(Violation {
                        map_index: i,
                        point: p,
                        w,
                    });
                }
            }
        }
        per_map.push(MapMinimum {
            map: field.map,
            min,
            argmin,
            probes: field.points.len(),
        });
    }
    let global_min = per_map.iter().map(|m| m.min).fold(f64::INFINITY, f64::min);
    Ok(ScanReport {
        per_map,
        global_min,
        violations,
        violation_count,
        tolerance,
    })
}

/// Scan every map over one shared probe set; every probe must lie outside
/// every ball.
pub fn moving_sphere_scan_shared<U: HalfSpaceFunction>(
    u: &U,
    a: WeightExponent,
    maps: &[MoebiusMap],
    probes: &[Point],
    tolerance: f64,
) -> Result<ScanReport> {
    let plan: Vec<(MoebiusMap, Vec<Point>)> =
        maps.iter().map(|m| (*m, probes.to_vec())).collect();
    moving_sphere_scan(u, a, &plan, tolerance)
}

/// Box `[-L, L]^{n-1} × (0, H]` from which probes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeDomain {
    pub n: usize,
    pub half_width: f64,
    pub height: f64,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut acc = 0.0;
    let mut f = inv;
    while i > 0 {
        acc += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    acc
}

/// Probes for one map: a tensor lattice with `per_axis` nodes per axis
/// (heights strictly positive) plus `quasi` Halton points, all outside the
/// closed ball.
pub fn probe_set(map: &MoebiusMap, domain: &ProbeDomain, per_axis: usize, quasi: usize) -> Vec<Point> {
    let n = domain.n;
    let l = domain.half_width;
    let h = domain.height;
    let outside = |p: &Point| (*p - map.center()).norm() > map.radius() * (1.0 + 1e-9);
    let mut pts = Vec::new();
    if per_axis >= 2 {
        let t = |k: usize| -l + 2.0 * l * k as f64 / (per_axis - 1) as f64;
        let z = |k: usize| h * (k + 1) as f64 / per_axis as f64;
        let tangential = if n == 2 { per_axis } else { per_axis * per_axis };
        for ti in 0..tangential {
            for k in 0..per_axis {
                let p = if n == 2 {
                    Point::new2(t(ti), z(k))
                } else {
                    Point::new3(t(ti / per_axis), t(ti % per_axis), z(k))
                };
                if outside(&p) {
                    pts.push(p);
                }
            }
        }
    }
    const BASES: [u64; 3] = [2, 3, 5];
    let mut i = 1u64;
    let mut added = 0;
    while added < quasi && i < 1_000_000 {
        let u: Vec<f64> = (0..n).map(|d| radical_inverse(i, BASES[d])).collect();
        i += 1;
        let mut coords = [0.0; 3];
        for d in 0..n - 1 {
            coords[d] = -l + 2.0 * l * u[d];
        }
        coords[n - 1] = h * (1.0 - u[n - 1]).max(1e-6);
        let p = Point::new(&coords[..n]).expect("dimension is 2 or 3");
        if outside(&p) {
            pts.push(p);
            added += 1;
        }
    }
    pts
}

/// `count` radii spaced logarithmically in `[lo, hi]`.
pub fn log_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (count - 1) as f64).exp())
            .collect(),
    }
}

/// `w_{x,λ}(y)` for a fixed `x` and `y` over a list of radii below `|y - x|`.
pub fn lambda_profile<U: HalfSpaceFunction>(
    u: &U,
    a: WeightExponent,
    center: &Point,
    y: &Point,
    radii: &[f64],
) -> Result<Vec<f64>> {
    radii
        .iter()
        .map(|&r| {
            let map = MoebiusMap::new(*center, r)?;
            Ok(ComparisonField::new(u, map, a, std::slice::from_ref(y))?.values[0])
        })
        .collect()
}

/// True when consecutive samples change sign without either being within
/// `eps` of zero.
pub fn has_abrupt_sign_change(samples: &[f64], eps: f64) -> bool {
    samples
        .windows(2)
        .any(|w| w[0] * w[1] < 0.0 && w[0].abs() > eps && w[1].abs() > eps)
}

/// `max_k (max - min over layer k) / (max u - min u)`; 0 for constant fields.
pub fn tangential_variation(u: &ScalarField) -> f64 {
    let g = u.grid();
    let range = u.range();
    if range == 0.0 {
        return 0.0;
    }
    let mv = g.vertical_nodes();
    let mut worst = 0.0f64;
    for k in 0..mv {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in 0..g.layer_len() {
            let v = u.values()[t * mv + k];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        worst = worst.max(hi - lo);
    }
    worst / range
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// Data on every face from `c_star · x_n^{1-a} + c2`.
    Dirichlet { c_star: f64, c2: f64 },
    /// Zero weighted flux at the bottom, `far_value` on the truncation faces.
    Neumann { far_value: f64 },
}

impl Scenario {
    /// `(C*, C₂)` the solution should reproduce.
    pub fn expected(&self) -> (f64, f64) {
        match *self {
            Self::Dirichlet { c_star, c2 } => (c_star, c2),
            Self::Neumann { far_value } => (0.0, far_value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub solve: SolveConfig,
    /// Scan centres per tangential axis, spread over `[-L/2, L/2]`.
    pub scan_centers: usize,
    /// Radii per centre, logarithmic in `[h, L/2]`.
    pub scan_radii: usize,
    pub scan_tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            solve: SolveConfig::default(),
            scan_centers: 3,
            scan_radii: 4,
            scan_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub scenario: Scenario,
    pub a: f64,
    pub n: usize,
    pub grid: HalfSpaceGrid,
    pub expected: (f64, f64),
    pub fit: FamilyFit,
    pub tangential_variation: f64,
    /// Scan of the interpolated discrete solution; discretisation error makes
    /// small negative minima possible.
    pub scan: ScanReport,
    pub solve: SolveReport,
}

/// Solve with data from a family member, then fit, measure tangential
/// variation and scan the interpolated solution.
pub fn uniqueness_experiment(
    scenario: Scenario,
    a: WeightExponent,
    grid: HalfSpaceGrid,
    cfg: &ExperimentConfig,
) -> Result<(ScalarField, UniquenessReport)> {
    let av = a.value();
    let data = match scenario {
        Scenario::Dirichlet { c_star, c2 } => {
            if av >= 1.0 && c_star != 0.0 {
                return Err(Error::Validation(format!(
                    "x_n^(1-a) has no boundary trace for a = {av}"
                )));
            }
            let p = 1.0 - av;
            let fam = move |q: &Point| c_star * q.xn().powf(p) + c2;
            BoundaryDatum::dirichlet(fam, fam)
        }
        Scenario::Neumann { far_value } => {
            if !a.is_neumann_valid(grid.dim()) {
                return Err(Error::Validation(format!(
                    "Neumann constancy needs max(-1, 2-n) < a < 1, got a = {av}, n = {}",
                    grid.dim()
                )));
            }
            BoundaryDatum::zero_flux(move |_| far_value)
        }
    };
    let (u, solve_report) = solve(grid, a, &data, &cfg.solve)?;
    let fit = fit_family(&u)?;
    let variation = tangential_variation(&u);
    let plan = grid_scan_plan(&grid, cfg.scan_centers, cfg.scan_radii)?;
    let scan = moving_sphere_scan(&u, a, &plan, cfg.scan_tolerance)?;
    let report = UniquenessReport {
        scenario,
        a: av,
        n: grid.dim(),
        grid,
        expected: scenario.expected(),
        fit,
        tangential_variation: variation,
        scan,
        solve: solve_report,
    };
    Ok((u, report))
}

/// Maps with centres on a lattice in `[-L/2, L/2]^{n-1}` and radii in
/// `[h, L/2]`, each paired with the grid nodes outside its ball. Every ball
/// lies inside the grid, so every image point can be interpolated.
pub fn grid_scan_plan(
    grid: &HalfSpaceGrid,
    centers_per_axis: usize,
    radii: usize,
) -> Result<Vec<(MoebiusMap, Vec<Point>)>> {
    let l = grid.half_width();
    let rmax = (0.5 * l).min(grid.height());
    let lams = log_radii(grid.spacing(), rmax, radii);
    let c = |k: usize| {
        if centers_per_axis <= 1 {
            0.0
        } else {
            -0.5 * l + l * k as f64 / (centers_per_axis - 1) as f64
        }
    };
    let m = centers_per_axis.max(1);
    let count = if grid.dim() == 2 { m } else { m * m };
    let nodes: Vec<Point> = (0..grid.len()).map(|i| grid.node(i)).collect();
    let mut plan = Vec::new();
    for ci in 0..count {
        let center: Vec<f64> = if grid.dim() == 2 {
            vec![c(ci)]
        } else {
            vec![c(ci / m), c(ci % m)]
        };
        for &lam in &lams {
            let map = MoebiusMap::at_boundary(&center, lam)?;
            let probes: Vec<Point> = nodes
                .iter()
                .filter(|p| (**p - map.center()).norm() > lam * (1.0 + 1e-9))
                .copied()
                .collect();
            plan.push((map, probes));
        }
    }
    Ok(plan)
}
