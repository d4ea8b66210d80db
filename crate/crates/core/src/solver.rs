//! Discrete boundary-value problems for `div(x_n^a ∇u) = 0`.
//!
//! With the Dirichlet nodes eliminated the flux-form system is symmetric
//! positive definite; it is the stationarity condition of the discrete
//! weighted Dirichlet energy `½ Σ_e G_e (Δ_e u)² - (boundary work)`. It is
//! solved matrix-free by (diagonally preconditioned) conjugate gradients with
//! all inner products reduced in a fixed pairwise order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{HalfSpaceGrid, NodeKind, ScalarField};
use crate::kernels::WeightExponent;
use crate::operator::{BoundaryDatum, BoundaryKind, Stencil};
use crate::quadrature::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// Mean of the Dirichlet values on the grid.
    BoundaryMean,
    Zero,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    /// Bound on `‖b - A x‖₂ / ‖b‖₂`.
    pub tolerance: f64,
    /// Defaults to `10 · m_t · m_v`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
    pub initial_guess: InitialGuess,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: None,
            preconditioner: Preconditioner::Diagonal,
            initial_guess: InitialGuess::BoundaryMean,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::Validation(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Validation("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    fn iteration_cap(&self, grid: &HalfSpaceGrid) -> usize {
        self.max_iterations
            .unwrap_or(10 * grid.tangential_nodes() * grid.vertical_nodes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final `‖b - A x‖₂ / ‖b‖₂`.
    pub residual_l2: f64,
    /// Final `‖b - A x‖_∞ / ‖b‖_∞`.
    pub residual_linf: f64,
    /// Relative 2-norm residual after each iteration (index 0 = initial guess).
    pub residual_history: Vec<f64>,
    /// Discrete energy `½ xᵀA x - bᵀx` after each iteration; non-increasing.
    pub energy_history: Vec<f64>,
    pub max_principle_ok: bool,
    pub max_principle_violation: f64,
}

struct System<'a> {
    stencil: Stencil,
    unknowns: Vec<usize>,
    /// Full-grid vector holding Dirichlet values and zeros at unknowns.
    boundary: Vec<f64>,
    data: &'a BoundaryDatum,
}

impl System<'_> {
    fn grid(&self) -> &HalfSpaceGrid {
        self.stencil.grid()
    }

    fn scatter(&self, x: &[f64], full: &mut [f64]) {
        for (&idx, &v) in self.unknowns.iter().zip(x) {
            full[idx] = v;
        }
    }

    /// `A x` with `A = -(edge sums restricted to the unknowns)`.
    fn apply(&self, x: &[f64], scratch: &mut Vec<f64>) -> Vec<f64> {
        scratch.clear();
        scratch.resize(self.grid().len(), 0.0);
        self.scatter(x, scratch);
        let full: &[f64] = scratch;
        crate::par::map_range(self.unknowns.len(), |j| {
            -self.stencil.edge_sum(full, self.unknowns[j])
        })
    }

    fn rhs(&self) -> Vec<f64> {
        let g = *self.grid();
        let h = g.spacing();
        crate::par::map_range(self.unknowns.len(), |j| {
            let idx = self.unknowns[j];
            let mut b = self.stencil.edge_sum(&self.boundary, idx);
            if g.kind(idx) == NodeKind::Bottom {
                b -= h * self.data.bottom(&g.node(idx));
            }
            b
        })
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    pairwise_sum(&prods)
}

fn linf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Solve the truncated problem with the given boundary data.
pub fn solve(
    grid: HalfSpaceGrid,
    a: WeightExponent,
    data: &BoundaryDatum,
    cfg: &SolveConfig,
) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    data.check_exponent(a, grid.dim())?;
    let stencil = Stencil::new(grid, a);

    let mut boundary = vec![0.0; grid.len()];
    let mut unknowns = Vec::new();
    let mut dirichlet_values = Vec::new();
    for (idx, slot) in boundary.iter_mut().enumerate() {
        match data.dirichlet_value(&grid, idx) {
            Some(v) => {
                if !v.is_finite() {
                    return Err(Error::Validation(format!(
                        "non-finite boundary value at {:?}",
                        grid.node(idx)
                    )));
                }
                *slot = v;
                dirichlet_values.push(v);
            }
            None => unknowns.push(idx),
        }
    }
    if dirichlet_values.is_empty() {
        return Err(Error::Validation(
            "at least one Dirichlet face is required".into(),
        ));
    }
    if data.kind() == BoundaryKind::WeightedNeumann {
        for &idx in &unknowns {
            if grid.kind(idx) == NodeKind::Bottom && !data.bottom(&grid.node(idx)).is_finite() {
                return Err(Error::Validation("non-finite boundary flux".into()));
            }
        }
    }

    let system = System {
        stencil,
        unknowns,
        boundary,
        data,
    };
    let b = system.rhs();
    let x0 = match cfg.initial_guess {
        InitialGuess::BoundaryMean => pairwise_sum(&dirichlet_values) / dirichlet_values.len() as f64,
        InitialGuess::Zero => 0.0,
        InitialGuess::Constant(c) => c,
    };
    let mut x = vec![x0; system.unknowns.len()];
    let inv_diag: Vec<f64> = match cfg.preconditioner {
        Preconditioner::Diagonal => system
            .unknowns
            .iter()
            .map(|&i| 1.0 / system.stencil.diagonal(i))
            .collect(),
        Preconditioner::None => vec![1.0; system.unknowns.len()],
    };

    let (iterations, history, energies) = conjugate_gradient(&system, &b, &mut x, &inv_diag, cfg)?;

    let mut values = system.boundary.clone();
    system.scatter(&x, &mut values);
    let field = ScalarField::new(grid, a, values)?;

    let mut scratch = Vec::new();
    let ax = system.apply(&x, &mut scratch);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let bnorm = dot(&b, &b).sqrt();
    let (residual_l2, residual_linf) = if bnorm > 0.0 {
        (dot(&r, &r).sqrt() / bnorm, linf(&r) / linf(&b))
    } else {
        (dot(&r, &r).sqrt(), linf(&r))
    };
    let mp = max_principle_check(&field, data, cfg.tolerance);
    Ok((
        field,
        SolveReport {
            iterations,
            residual_l2,
            residual_linf,
            residual_history: history,
            energy_history: energies,
            max_principle_ok: mp.ok,
            max_principle_violation: mp.worst_violation,
        },
    ))
}

type CgTrace = (usize, Vec<f64>, Vec<f64>);

fn conjugate_gradient(
    system: &System<'_>,
    b: &[f64],
    x: &mut [f64],
    inv_diag: &[f64],
    cfg: &SolveConfig,
) -> Result<CgTrace> {
    let cap = cfg.iteration_cap(system.grid());
    let mut scratch = Vec::new();
    let bnorm = dot(b, b).sqrt();
    let ax = system.apply(x, &mut scratch);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let energy = |x: &[f64], r: &[f64]| {
        // ½ xᵀA x - bᵀx = -½ xᵀ(b + r)
        let s: Vec<f64> = b.iter().zip(r).map(|(bi, ri)| bi + ri).collect();
        -0.5 * dot(x, &s)
    };
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut history = vec![dot(&r, &r).sqrt() / scale];
    let mut energies = vec![energy(x, &r)];
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((0, vec![0.0], vec![0.0]));
    }
    if history[0] <= cfg.tolerance {
        return Ok((0, history, energies));
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=cap {
        let ap = system.apply(&p, &mut scratch);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: *history.last().expect("non-empty"),
                history,
            });
        }
        let alpha = rz / pap;
        for ((xi, pi), (ri, api)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(&ap)) {
            *xi += alpha * pi;
            *ri -= alpha * api;
        }
        let rel = dot(&r, &r).sqrt() / scale;
        history.push(rel);
        energies.push(energy(x, &r));
        if rel <= cfg.tolerance {
            return Ok((it, history, energies));
        }
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(inv_diag) {
            *zi = ri * di;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NonConvergence {
        iterations: cap,
        residual: *history.last().expect("non-empty"),
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub ok: bool,
    /// Largest excursion outside `[min data, max data]` (0 if none).
    pub worst_violation: f64,
    pub data_min: f64,
    pub data_max: f64,
}

/// Check `min(data) - tol ≤ u ≤ max(data) + tol` with
/// `tol = 10 · solver_tolerance · (max data - min data)`.
///
/// Only Dirichlet values enter the bounds.
pub fn max_principle_check(
    u: &ScalarField,
    data: &BoundaryDatum,
    solver_tolerance: f64,
) -> MaxPrincipleReport {
    let g = u.grid();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for idx in 0..g.len() {
        if let Some(v) = data.dirichlet_value(g, idx) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let tol = 10.0 * solver_tolerance * (hi - lo);
    let mut worst = 0.0f64;
    for &v in u.values() {
        worst = worst.max(lo - v).max(v - hi);
    }
    MaxPrincipleReport {
        ok: worst <= tol,
        worst_violation: worst.max(0.0),
        data_min: lo,
        data_max: hi,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyFit {
    pub c_star: f64,
    pub c2: f64,
    /// `max |u - (c_star x_n^{1-a} + c2)| / max |u|`.
    pub residual: f64,
    /// The basis collapsed (`a = 1`); only the constant was fitted.
    pub degenerate: bool,
}

/// Least-squares fit of `u` against `{x_n^{1-a}, 1}` over the grid nodes.
///
/// For `a > 1` the bottom layer is excluded since `x_n^{1-a}` is unbounded
/// there.
pub fn fit_family(u: &ScalarField) -> Result<FamilyFit> {
    let g = u.grid();
    if g.vertical_nodes() < 3 {
        return Err(Error::Precondition("need at least two interior heights".into()));
    }
    let a = u.exponent().value();
    let p = 1.0 - a;
    let mut basis = Vec::with_capacity(g.len());
    let mut vals = Vec::with_capacity(g.len());
    for (idx, &v) in u.values().iter().enumerate() {
        let xn = g.node(idx).xn();
        if a > 1.0 && xn == 0.0 {
            continue;
        }
        basis.push(xn.powf(p));
        vals.push(v);
    }
    let m = vals.len() as f64;
    let mean_b = pairwise_sum(&basis) / m;
    let mean_v = pairwise_sum(&vals) / m;
    let centred_b: Vec<f64> = basis.iter().map(|b| b - mean_b).collect();
    let sbb = dot(&centred_b, &centred_b);
    let sbv = pairwise_sum(
        &centred_b
            .iter()
            .zip(&vals)
            .map(|(b, v)| b * (v - mean_v))
            .collect::<Vec<_>>(),
    );
    let spread = basis.iter().fold(0.0f64, |s, b| s.max((b - mean_b).abs()));
    let degenerate = a == 1.0 || spread <= 1e-12 * mean_b.abs().max(1.0);
    let (c_star, c2) = if degenerate {
        (0.0, mean_v)
    } else {
        let c = sbv / sbb;
        (c, mean_v - c * mean_b)
    };
    let scale = linf(&vals);
    let dev = basis
        .iter()
        .zip(&vals)
        .fold(0.0f64, |m, (b, v)| m.max((v - c_star * b - c2).abs()));
    Ok(FamilyFit {
        c_star,
        c2,
        residual: if scale > 0.0 { dev / scale } else { dev },
        degenerate,
    })
}
