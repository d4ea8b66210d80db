//! Flux-form discretisation of `div(x_n^a ∇u)`.
//!
//! Along a tangential edge in layer `k ≥ 1` the conductance is the weight at
//! the layer, `(k h)^a`. Along the vertical edge `[y₀, y₁]` it is the inverse
//! of the mean of `y^{-a}` over the edge,
//!
//! ```text
//! c(y₀, y₁) = (y₁ - y₀) / ∫_{y₀}^{y₁} y^{-a} dy,
//! ```
//!
//! the conductance that makes the one-dimensional flux exact for the two
//! vertical solutions `1` and `y^{1-a}`. It is finite and positive at the
//! bottom edge for every `a < 1` (equal to `(1-a) h^a`), so `0^a` is never
//! evaluated, and it agrees with the midpoint weight up to `O(h²)` away from
//! the boundary.
//!
//! The bottom layer carries a half control volume `[0, h/2]` whose lateral
//! conductance is the mean of `y^a` over it, `(h/2)^a / (2(1+a))` per unit
//! height `h`; it is used for weighted-Neumann data and for the even
//! reflection across the boundary.

use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::field::HalfSpaceFunction;
use crate::grid::{HalfSpaceGrid, NodeKind, ScalarField};
use crate::kernels::WeightExponent;
use crate::point::Point;
use crate::richardson::richardson;

/// `expm1(t)/t`, continuous at 0.
fn expm1_ratio(t: f64) -> f64 {
    if t.abs() < 1e-12 {
        1.0 + 0.5 * t
    } else {
        t.exp_m1() / t
    }
}

/// `∫_{lo}^{hi} y^{-a} dy` for `0 ≤ lo < hi`; infinite when `lo = 0`, `a ≥ 1`.
pub fn inverse_weight_integral(lo: f64, hi: f64, a: f64) -> f64 {
    debug_assert!(0.0 <= lo && lo < hi);
    if lo == 0.0 {
        return if a < 1.0 {
            hi.powf(1.0 - a) / (1.0 - a)
        } else {
            f64::INFINITY
        };
    }
    let l = (hi / lo).ln();
    lo.powf(1.0 - a) * l * expm1_ratio((1.0 - a) * l)
}

/// Exact-flux conductance of the vertical edge `[lo, hi]`.
pub fn vertical_conductance(lo: f64, hi: f64, a: f64) -> f64 {
    (hi - lo) / inverse_weight_integral(lo, hi, a)
}

/// Mean of `y^a` over `[0, h/2]`, scaled by 1/2 for the half cell: the
/// lateral conductance of the bottom layer.
pub fn bottom_layer_conductance(h: f64, a: f64) -> f64 {
    debug_assert!(a > -1.0);
    (0.5 * h).powf(a) / (2.0 * (1.0 + a))
}

/// Step-`h` flux-form stencil applied to a function at a single point.
/// Requires `y_n ≥ h`.
pub fn weighted_operator_at<F: HalfSpaceFunction + ?Sized>(
    f: &F,
    y: &Point,
    a: WeightExponent,
    h: f64,
) -> f64 {
    let a = a.value();
    let n = y.dim();
    let yn = y.xn();
    let u0 = f.value(y);
    let mut acc = 0.0;
    let wt = yn.powf(a);
    for i in 0..n - 1 {
        let up = f.value(&y.shifted(i, h));
        let dn = f.value(&y.shifted(i, -h));
        acc += wt * (up - u0) - wt * (u0 - dn);
    }
    let up = f.value(&y.shifted(n - 1, h));
    let dn = f.value(&y.shifted(n - 1, -h));
    acc += vertical_conductance(yn, yn + h, a) * (up - u0)
        - vertical_conductance(yn - h, yn, a) * (u0 - dn);
    acc / (h * h)
}

/// Precomputed conductances of a grid.
#[derive(Debug, Clone)]
pub struct Stencil {
    grid: HalfSpaceGrid,
    a: WeightExponent,
    /// `vertical[k]` couples layers `k` and `k+1`.
    vertical: Vec<f64>,
    /// `tangential[k]` for layer `k`; layer 0 holds the half-cell value
    /// (NaN when `a ≤ -1`).
    tangential: Vec<f64>,
}

impl Stencil {
    pub fn new(grid: HalfSpaceGrid, a: WeightExponent) -> Self {
        let h = grid.spacing();
        let av = a.value();
        let mv = grid.vertical_nodes();
        let vertical = (0..mv - 1)
            .map(|k| vertical_conductance(k as f64 * h, (k + 1) as f64 * h, av))
            .collect();
        let tangential = (0..mv)
            .map(|k| {
                if k == 0 {
                    if av > -1.0 {
                        bottom_layer_conductance(h, av)
                    } else {
                        f64::NAN
                    }
                } else {
                    (k as f64 * h).powf(av)
                }
            })
            .collect();
        Self {
            grid,
            a,
            vertical,
            tangential,
        }
    }

    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }

    pub fn exponent(&self) -> WeightExponent {
        self.a
    }

    pub fn vertical(&self, k: usize) -> f64 {
        self.vertical[k]
    }

    pub fn tangential(&self, k: usize) -> f64 {
        self.tangential[k]
    }

    /// `Σ_edges G_e (u_nb - u_i)` at node `idx` (no `1/h²`), over all
    /// neighbours present in the grid. At the bottom layer the downward edge
    /// is absent and the half-cell lateral conductance is used.
    pub fn edge_sum(&self, values: &[f64], idx: usize) -> f64 {
        let g = &self.grid;
        let (_, k) = g.unravel(idx);
        let u0 = values[idx];
        let n = g.dim();
        let wt = self.tangential[k];
        let mut acc = 0.0;
        for axis in 0..n - 1 {
            for dir in [-1, 1] {
                if let Some(j) = g.neighbor(idx, axis, dir) {
                    acc += wt * (values[j] - u0);
                }
            }
        }
        if let Some(j) = g.neighbor(idx, n - 1, 1) {
            acc += self.vertical[k] * (values[j] - u0);
        }
        if k > 0 {
            let j = g.neighbor(idx, n - 1, -1).expect("k > 0");
            acc += self.vertical[k - 1] * (values[j] - u0);
        }
        acc
    }

    /// Sum of the conductances incident to `idx` (the diagonal).
    pub fn diagonal(&self, idx: usize) -> f64 {
        let g = &self.grid;
        let (_, k) = g.unravel(idx);
        let n = g.dim();
        let mut d = 0.0;
        for axis in 0..n - 1 {
            for dir in [-1, 1] {
                if g.neighbor(idx, axis, dir).is_some() {
                    d += self.tangential[k];
                }
            }
        }
        if k + 1 < g.vertical_nodes() {
            d += self.vertical[k];
        }
        if k > 0 {
            d += self.vertical[k - 1];
        }
        d
    }
}

/// Discrete `div(x_n^a ∇u)` at interior nodes; zero on bottom and truncation
/// nodes.
pub fn apply_operator(u: &ScalarField) -> ScalarField {
    let stencil = Stencil::new(*u.grid(), u.exponent());
    apply_with(&stencil, u)
}

pub(crate) fn apply_with(stencil: &Stencil, u: &ScalarField) -> ScalarField {
    let g = *u.grid();
    let h2 = g.spacing() * g.spacing();
    let vals = u.values();
    let out = crate::par::map_range(g.len(), |i| match g.kind(i) {
        NodeKind::Interior => stencil.edge_sum(vals, i) / h2,
        _ => 0.0,
    });
    ScalarField::new(g, u.exponent(), out).expect("finite inputs give finite residuals")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    WeightedNeumann,
}

type BoundaryFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Boundary data of a truncated problem: the bottom face carries either the
/// trace `u(x', 0)` or the weighted flux `lim x_n^a ∂_n u`; lateral and top
/// faces always carry Dirichlet values.
#[derive(Clone)]
pub struct BoundaryDatum {
    kind: BoundaryKind,
    bottom: BoundaryFn,
    lateral_top: BoundaryFn,
    zero_flux: bool,
}

impl std::fmt::Debug for BoundaryDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryDatum")
            .field("kind", &self.kind)
            .field("zero_flux", &self.zero_flux)
            .finish_non_exhaustive()
    }
}

impl BoundaryDatum {
    pub fn dirichlet<B, T>(bottom: B, lateral_top: T) -> Self
    where
        B: Fn(&Point) -> f64 + Send + Sync + 'static,
        T: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: BoundaryKind::Dirichlet,
            bottom: Arc::new(bottom),
            lateral_top: Arc::new(lateral_top),
            zero_flux: false,
        }
    }

    /// Dirichlet data on every face taken from one function.
    pub fn dirichlet_from<F: HalfSpaceFunction + 'static>(f: F) -> Self {
        let f = Arc::new(f);
        let g = Arc::clone(&f);
        Self::dirichlet(move |p| f.value(p), move |p| g.value(p))
    }

    pub fn weighted_neumann<B, T>(flux: B, lateral_top: T) -> Self
    where
        B: Fn(&Point) -> f64 + Send + Sync + 'static,
        T: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: BoundaryKind::WeightedNeumann,
            bottom: Arc::new(flux),
            lateral_top: Arc::new(lateral_top),
            zero_flux: false,
        }
    }

    /// Zero weighted flux at the bottom.
    pub fn zero_flux<T>(lateral_top: T) -> Self
    where
        T: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Self {
            zero_flux: true,
            ..Self::weighted_neumann(|_| 0.0, lateral_top)
        }
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn is_zero_flux(&self) -> bool {
        self.zero_flux
    }

    /// Bottom value (trace or flux) at a boundary point.
    pub fn bottom(&self, p: &Point) -> f64 {
        (self.bottom)(p)
    }

    pub fn lateral_top(&self, p: &Point) -> f64 {
        (self.lateral_top)(p)
    }

    /// Dirichlet value at node `idx`, if the node carries one.
    pub fn dirichlet_value(&self, grid: &HalfSpaceGrid, idx: usize) -> Option<f64> {
        match grid.kind(idx) {
            NodeKind::Truncation => Some(self.lateral_top(&grid.node(idx))),
            NodeKind::Bottom if self.kind == BoundaryKind::Dirichlet => {
                Some(self.bottom(&grid.node(idx)))
            }
            _ => None,
        }
    }

    /// Warn when a Neumann problem is posed outside the window of the
    /// uniqueness result; the discretisation itself only needs `-1 < a < 1`.
    pub(crate) fn check_exponent(&self, a: WeightExponent, n: usize) -> Result<()> {
        if self.kind == BoundaryKind::WeightedNeumann {
            let av = a.value();
            if !(av > -1.0 && av < 1.0) {
                return Err(Error::Validation(format!(
                    "weighted-Neumann data needs -1 < a < 1, got {av}"
                )));
            }
            if !a.is_neumann_valid(n) {
                warn!("a = {av} lies outside max(-1, 2-n) < a < 1 for n = {n}; uniqueness is not guaranteed");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlux {
    /// Bottom node coordinates.
    pub points: Vec<Point>,
    /// `c_{1/2} (u(·, h) - u(·, 0)) / h`.
    pub values: Vec<f64>,
    /// Richardson combination with the estimate from rows `0` and `2`
    /// (exponent `1 + a`).
    pub extrapolated: Vec<f64>,
}

/// One-sided approximation of `lim x_n^a ∂_n u` at every bottom node.
pub fn boundary_flux(u: &ScalarField) -> Result<BoundaryFlux> {
    let g = u.grid();
    let a = u.exponent().value();
    if a >= 1.0 {
        return Err(Error::Validation(format!("boundary flux needs a < 1, got {a}")));
    }
    let h = g.spacing();
    let c1 = vertical_conductance(0.0, h, a) / h;
    let c2 = vertical_conductance(0.0, 2.0 * h, a) / (2.0 * h);
    let vals = u.values();
    let layers = g.layer_len();
    let mut points = Vec::with_capacity(layers);
    let mut values = Vec::with_capacity(layers);
    let mut extrapolated = Vec::with_capacity(layers);
    for l in 0..layers {
        let i0 = l * g.vertical_nodes();
        points.push(g.node(i0));
        let f1 = c1 * (vals[i0 + 1] - vals[i0]);
        let f2 = c2 * (vals[i0 + 2] - vals[i0]);
        values.push(f1);
        // samples ordered coarse to fine
        extrapolated.push(richardson(&[f2, f1], &[1.0 + a]).0);
    }
    Ok(BoundaryFlux {
        points,
        values,
        extrapolated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamResidual {
    /// Max absolute residual of the reflected stencil over the seam layers.
    pub absolute: f64,
    /// The same, divided by `max diagonal · max |u| / h²`.
    pub relative: f64,
}

/// Reflect `u` evenly across `x_n = 0` and apply the `|x_n|^a` flux-form
/// stencil on the layers `-1, 0, 1` of the doubled grid.
///
/// The reflected layer 0 sits in the full cell `[-h/2, h/2]`, whose lateral
/// conductance is twice the half-cell value and whose two vertical edges are
/// mirror images. Requires zero-flux bottom data.
pub fn even_reflection_residual(u: &ScalarField, data: &BoundaryDatum) -> Result<SeamResidual> {
    if data.kind() != BoundaryKind::WeightedNeumann || !data.is_zero_flux() {
        return Err(Error::Precondition(
            "even reflection needs zero weighted-flux bottom data".into(),
        ));
    }
    let a = u.exponent().value();
    if a <= -1.0 || a >= 1.0 {
        return Err(Error::Validation(format!("even reflection needs -1 < a < 1, got {a}")));
    }
    let g = *u.grid();
    let stencil = Stencil::new(g, u.exponent());
    let h2 = g.spacing() * g.spacing();
    let vals = u.values();
    let mut worst = 0.0f64;
    let mut diag = 0.0f64;
    for l in 0..g.layer_len() {
        let i0 = l * g.vertical_nodes();
        if g.kind(i0) != NodeKind::Bottom {
            continue;
        }
        // Layer 0 in the doubled grid: twice the half-cell balance.
        let r0 = 2.0 * stencil.edge_sum(vals, i0) / h2;
        // Layer ±1: the ordinary interior stencil, whose lower neighbour is
        // the reflected layer 0 itself.
        let i1 = i0 + 1;
        let r1 = if g.kind(i1) == NodeKind::Interior {
            stencil.edge_sum(vals, i1) / h2
        } else {
            0.0
        };
        worst = worst.max(r0.abs()).max(r1.abs());
        diag = diag
            .max(2.0 * stencil.diagonal(i0) / h2)
            .max(stencil.diagonal(i1) / h2);
    }
    let scale = diag * vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(SeamResidual {
        absolute: worst,
        relative: if scale > 0.0 { worst / scale } else { worst },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Constant, FnField, PowerFamily};
    use crate::kernels::{eval_kernel_at, KernelSpec};

    fn wa(a: f64) -> WeightExponent {
        WeightExponent::new(a).unwrap()
    }

    #[test]
    fn conductance_limits() {
        // bottom edge: (1 - a) h^a
        for &a in &[-0.5, 0.0, 0.5, 0.9] {
            let h: f64 = 0.1;
            let c = vertical_conductance(0.0, h, a);
            assert!((c - (1.0 - a) * h.powf(a)).abs() < 1e-14);
        }
        assert_eq!(vertical_conductance(0.0, 0.1, 1.0), 0.0);
        // a = 0 gives unit conductance; a = 1 the logarithmic mean
        assert!((vertical_conductance(1.0, 1.5, 0.0) - 1.0).abs() < 1e-15);
        let c = vertical_conductance(1.0, 2.0, 1.0);
        assert!((c - 1.0 / 2f64.ln()).abs() < 1e-14);
        // close to the midpoint weight away from the boundary
        let c = vertical_conductance(1.0, 1.01, 0.5);
        assert!((c - 1.005f64.powf(0.5)).abs() < 1e-5);
    }

    #[test]
    fn weights_positive() {
        for &a in &[-0.9, -0.5, 0.0, 0.5, 0.99, 1.5] {
            let g = HalfSpaceGrid::cube(2, 1.0, 9).unwrap();
            let s = Stencil::new(g, wa(a));
            for k in 1..g.vertical_nodes() {
                assert!(s.tangential(k) > 0.0);
            }
            for k in 1..g.vertical_nodes() - 1 {
                assert!(s.vertical(k) > 0.0);
            }
            assert!(s.tangential(0) > 0.0);
            assert_eq!(s.vertical(0) > 0.0, a < 1.0);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let g = HalfSpaceGrid::cube(3, 1.0, 9).unwrap();
        let u = ScalarField::from_fn(g, wa(0.3), &Constant(2.5)).unwrap();
        assert!(apply_operator(&u).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn family_is_annihilated() {
        let a = 0.5;
        let g = HalfSpaceGrid::cube(2, 1.0, 33).unwrap();
        let u = ScalarField::from_fn(g, wa(a), &PowerFamily::new(1.0, 1.0 - a, 0.0)).unwrap();
        let r = apply_operator(&u);
        let m = r.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(m < 1e-10, "{m}");
    }

    #[test]
    fn gamma_d_residual_is_second_order() {
        let a = 0.5;
        let spec = KernelSpec::gamma_d(a, 3).unwrap();
        let f = FnField(move |p: &Point| eval_kernel_at(&spec, p).unwrap());
        let probe = [Point::new3(0.5, 0.25, 1.0), Point::new3(-0.5, 0.5, 0.75), Point::new3(0.0, 0.0, 1.5)];
        let res = |h: f64| {
            probe
                .iter()
                .map(|p| weighted_operator_at(&f, p, wa(a), h).abs())
                .fold(0.0f64, f64::max)
        };
        let (r1, r2) = (res(1.0 / 16.0), res(1.0 / 32.0));
        let rate = (r1 / r2).log2();
        assert!(rate > 1.8, "{r1} {r2} {rate}");
    }

    #[test]
    fn flux_of_family_and_constant() {
        let a = 0.5;
        let g = HalfSpaceGrid::cube(2, 1.0, 17).unwrap();
        let u = ScalarField::from_fn(g, wa(a), &PowerFamily::new(1.0, 1.0 - a, 0.0)).unwrap();
        let f = boundary_flux(&u).unwrap();
        assert!(f.values.iter().all(|v| (v - (1.0 - a)).abs() < 1e-12));
        assert!(f.extrapolated.iter().all(|v| (v - (1.0 - a)).abs() < 1e-12));
        let c = ScalarField::from_fn(g, wa(a), &Constant(4.0)).unwrap();
        assert!(boundary_flux(&c).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reflection_of_constant_and_precondition() {
        let g = HalfSpaceGrid::cube(2, 1.0, 9).unwrap();
        let u = ScalarField::from_fn(g, wa(0.5), &Constant(1.0)).unwrap();
        let data = BoundaryDatum::zero_flux(|_| 1.0);
        let r = even_reflection_residual(&u, &data).unwrap();
        assert_eq!(r.absolute, 0.0);

        let v = ScalarField::from_fn(g, wa(0.5), &PowerFamily::new(1.0, 0.5, 0.0)).unwrap();
        let flux = BoundaryDatum::weighted_neumann(|_| 0.5, |p: &Point| p.xn().sqrt());
        assert!(matches!(
            even_reflection_residual(&v, &flux),
            Err(Error::Precondition(_))
        ));
    }
}
