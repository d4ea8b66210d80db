//! Extension of boundary data into the half space by kernel quadrature.
//!
//! * Dirichlet data `f` is extended by `u = (P_a ∗ f) / N`, where `N` is the
//!   boundary mass of `P_a`, so constants are reproduced exactly.
//! * Weighted-Neumann data is extended by the unnormalised Riesz-type kernel
//!   `E_{2-a}(x) = |x|^{-(n-2+a)}`; its weighted flux is `-κ f` with `κ` given
//!   by [`neumann_flux_constant`].
//!
//! The fractional Laplacian `(-Δ)^s f`, `s = (1-a)/2`, is recovered as the
//! boundary limit of the weighted flux of the Dirichlet extension and can be
//! compared with a Fourier quadrature of `|ξ|^{2s} f̂`.
//!
//! Convolutions are computed in coordinates centred at the evaluation point:
//! a folded line integral for `n = 2` and polar coordinates for `n = 3`
//! (trapezoid rule in the angle). Breakpoints at `x_n` and `10·x_n` resolve
//! the kernel peak. The integration radius is chosen from the data's decay
//! certificate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::field::FnField;
use crate::kernels::{
    boundary_sphere_measure, kernel_normalization, kernel_value, poisson_mass_closed_form,
    KernelSpec, WeightExponent,
};
use crate::operator::weighted_operator_at;
use crate::point::Point;
use crate::quadrature::{periodic_trapezoid, Integrator};
use crate::richardson::{is_monotone_convergent, richardson};

/// Closed-form description of boundary data on `R^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryShape {
    /// `A · exp(-|y - c|² / w²)`
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `A · exp(1 - 1/(1 - |y - c|²/ρ²))` inside the ball of radius `ρ`.
    Bump {
        amplitude: f64,
        center: Vec<f64>,
        radius: f64,
    },
    /// Constant data; only the normalised Dirichlet extension accepts it.
    Constant { value: f64 },
    /// Multilinear interpolation of samples on a uniform grid, zero outside.
    Sampled {
        origin: Vec<f64>,
        spacing: f64,
        counts: Vec<usize>,
        values: Vec<f64>,
    },
    /// `Σ c_i f_i`
    Combination { terms: Vec<(f64, BoundaryShape)> },
}

/// `|f(y)| ≤ bound · (1 + |y - center|)^{-rate}`, optionally with compact
/// support inside the ball of radius `support` about `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub bound: f64,
    pub rate: f64,
    pub center: Vec<f64>,
    pub support: Option<f64>,
}

/// Decay rate attached to Gaussian certificates.
const GAUSSIAN_RATE: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunction {
    shape: BoundaryShape,
    dim: usize,
    certificate: DecayCertificate,
}

impl BoundaryFunction {
    /// Validate `shape` as data on `R^{n-1}` and derive its certificate.
    pub fn new(shape: BoundaryShape, n: usize) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::Validation(format!("n must be 2 or 3, got {n}")));
        }
        let dim = n - 1;
        validate_shape(&shape, dim)?;
        let certificate = certify(&shape, dim);
        Ok(Self {
            shape,
            dim,
            certificate,
        })
    }

    pub fn gaussian(amplitude: f64, center: &[f64], width: f64) -> Result<Self> {
        Self::new(
            BoundaryShape::Gaussian {
                amplitude,
                center: center.to_vec(),
                width,
            },
            center.len() + 1,
        )
    }

    pub fn bump(amplitude: f64, center: &[f64], radius: f64) -> Result<Self> {
        Self::new(
            BoundaryShape::Bump {
                amplitude,
                center: center.to_vec(),
                radius,
            },
            center.len() + 1,
        )
    }

    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(BoundaryShape::Constant { value }, n)
    }

    /// Replace the derived certificate with a caller-supplied one.
    pub fn with_certificate(mut self, certificate: DecayCertificate) -> Result<Self> {
        if certificate.center.len() != self.dim
            || !(certificate.bound >= 0.0)
            || !(certificate.rate >= 0.0)
        {
            return Err(Error::Validation("malformed decay certificate".into()));
        }
        self.certificate = certificate;
        Ok(self)
    }

    pub fn shape(&self) -> &BoundaryShape {
        &self.shape
    }

    /// Half-space dimension `n`.
    pub fn half_space_dim(&self) -> usize {
        self.dim + 1
    }

    pub fn certificate(&self) -> &DecayCertificate {
        &self.certificate
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        shape_value(&self.shape, y)
    }

    /// `αf + βg`.
    pub fn combine(alpha: f64, f: &Self, beta: f64, g: &Self) -> Result<Self> {
        if f.dim != g.dim {
            return Err(Error::Validation("dimension mismatch".into()));
        }
        Self::new(
            BoundaryShape::Combination {
                terms: vec![(alpha, f.shape.clone()), (beta, g.shape.clone())],
            },
            f.dim + 1,
        )
    }

    /// `y ↦ f(y - shift)`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::Validation("shift has the wrong dimension".into()));
        }
        Self::new(translate_shape(&self.shape, shift), self.dim + 1)
    }

    fn is_constant(&self) -> bool {
        matches!(self.shape, BoundaryShape::Constant { .. })
    }
}

fn validate_shape(shape: &BoundaryShape, dim: usize) -> Result<()> {
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    match shape {
        BoundaryShape::Gaussian {
            amplitude,
            center,
            width,
        } => {
            if center.len() != dim || !finite(center) || !amplitude.is_finite() {
                return Err(Error::Validation("gaussian: bad centre or amplitude".into()));
            }
            if !(*width > 0.0) || !width.is_finite() {
                return Err(Error::Validation(format!("gaussian width must be positive, got {width}")));
            }
        }
        BoundaryShape::Bump {
            amplitude,
            center,
            radius,
        } => {
            if center.len() != dim || !finite(center) || !amplitude.is_finite() {
                return Err(Error::Validation("bump: bad centre or amplitude".into()));
            }
            if !(*radius > 0.0) || !radius.is_finite() {
                return Err(Error::Validation(format!("bump radius must be positive, got {radius}")));
            }
        }
        BoundaryShape::Constant { value } => {
            if !value.is_finite() {
                return Err(Error::Validation("constant must be finite".into()));
            }
        }
        BoundaryShape::Sampled {
            origin,
            spacing,
            counts,
            values,
        } => {
            if origin.len() != dim || counts.len() != dim || !finite(origin) {
                return Err(Error::Validation("sampled: origin/counts dimension mismatch".into()));
            }
            if !(*spacing > 0.0) || !spacing.is_finite() {
                return Err(Error::Validation("sampled: spacing must be positive".into()));
            }
            if counts.iter().any(|&c| c < 2) || counts.iter().product::<usize>() != values.len() {
                return Err(Error::Validation(
                    "sampled: need at least 2 samples per axis and counts matching values".into(),
                ));
            }
            if !finite(values) {
                return Err(Error::Validation("sampled: non-finite sample".into()));
            }
        }
        BoundaryShape::Combination { terms } => {
            if terms.is_empty() {
                return Err(Error::Validation("empty combination".into()));
            }
            for (c, s) in terms {
                if !c.is_finite() {
                    return Err(Error::Validation("non-finite coefficient".into()));
                }
                validate_shape(s, dim)?;
            }
        }
    }
    Ok(())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn certify(shape: &BoundaryShape, dim: usize) -> DecayCertificate {
    match shape {
        BoundaryShape::Gaussian {
            amplitude,
            center,
            width,
        } => {
            // sup_r (1+r)^q e^{-r²/w²} is attained at r² + r = q w²/2
            let q = GAUSSIAN_RATE;
            let r = 0.5 * ((1.0 + 2.0 * q * width * width).sqrt() - 1.0);
            DecayCertificate {
                bound: amplitude.abs() * ((1.0 + r).ln() * q - r * r / (width * width)).exp(),
                rate: q,
                center: center.clone(),
                support: None,
            }
        }
        BoundaryShape::Bump {
            amplitude,
            center,
            radius,
        } => DecayCertificate {
            bound: amplitude.abs() * (1.0 + radius).powf(GAUSSIAN_RATE),
            rate: GAUSSIAN_RATE,
            center: center.clone(),
            support: Some(*radius),
        },
        BoundaryShape::Constant { value } => DecayCertificate {
            bound: value.abs(),
            rate: 0.0,
            center: vec![0.0; dim],
            support: None,
        },
        BoundaryShape::Sampled {
            origin,
            spacing,
            counts,
            values,
        } => {
            let center: Vec<f64> = origin
                .iter()
                .zip(counts)
                .map(|(o, &c)| o + 0.5 * spacing * (c - 1) as f64)
                .collect();
            let half_diag = 0.5
                * spacing
                * counts
                    .iter()
                    .map(|&c| ((c - 1) as f64).powi(2))
                    .sum::<f64>()
                    .sqrt();
            let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            DecayCertificate {
                bound: max * (1.0 + half_diag).powf(GAUSSIAN_RATE),
                rate: GAUSSIAN_RATE,
                center,
                support: Some(half_diag),
            }
        }
        BoundaryShape::Combination { terms } => {
            let parts: Vec<(f64, DecayCertificate)> =
                terms.iter().map(|(c, s)| (*c, certify(s, dim))).collect();
            let center = parts[0].1.center.clone();
            let rate = parts.iter().map(|(_, p)| p.rate).fold(f64::INFINITY, f64::min);
            // Peetre: (1 + |y - c|) ≤ (1 + |y - c_i|)(1 + |c - c_i|)
            let bound = parts
                .iter()
                .map(|(c, p)| c.abs() * p.bound * (1.0 + dist(&center, &p.center)).powf(rate))
                .sum();
            let support = parts
                .iter()
                .map(|(_, p)| p.support.map(|s| s + dist(&center, &p.center)))
                .try_fold(0.0f64, |m, s| s.map(|s| m.max(s)));
            DecayCertificate {
                bound,
                rate,
                center,
                support,
            }
        }
    }
}

fn shape_value(shape: &BoundaryShape, y: &[f64]) -> f64 {
    match shape {
        BoundaryShape::Gaussian {
            amplitude,
            center,
            width,
        } => {
            let d = dist(y, center);
            amplitude * (-(d * d) / (width * width)).exp()
        }
        BoundaryShape::Bump {
            amplitude,
            center,
            radius,
        } => {
            let t = dist(y, center) / radius;
            if t >= 1.0 {
                0.0
            } else {
                amplitude * (1.0 - 1.0 / (1.0 - t * t)).exp()
            }
        }
        BoundaryShape::Constant { value } => *value,
        BoundaryShape::Sampled {
            origin,
            spacing,
            counts,
            values,
        } => sampled_value(origin, *spacing, counts, values, y),
        BoundaryShape::Combination { terms } => {
            terms.iter().map(|(c, s)| c * shape_value(s, y)).sum()
        }
    }
}

fn sampled_value(origin: &[f64], spacing: f64, counts: &[usize], values: &[f64], y: &[f64]) -> f64 {
    let d = origin.len();
    let mut base = [0usize; 2];
    let mut frac = [0.0; 2];
    for i in 0..d {
        let s = (y[i] - origin[i]) / spacing;
        if !(s >= 0.0 && s <= (counts[i] - 1) as f64) {
            return 0.0;
        }
        let k = (s.floor() as usize).min(counts[i] - 2);
        base[i] = k;
        frac[i] = s - k as f64;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut lin = 0;
        for i in 0..d {
            let bit = (corner >> i) & 1;
            w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
            lin = lin * counts[i] + base[i] + bit;
        }
        if w != 0.0 {
            acc += w * values[lin];
        }
    }
    acc
}

fn translate_shape(shape: &BoundaryShape, shift: &[f64]) -> BoundaryShape {
    let moved = |c: &[f64]| c.iter().zip(shift).map(|(a, b)| a + b).collect::<Vec<_>>();
    match shape {
        BoundaryShape::Gaussian {
            amplitude,
            center,
            width,
        } => BoundaryShape::Gaussian {
            amplitude: *amplitude,
            center: moved(center),
            width: *width,
        },
        BoundaryShape::Bump {
            amplitude,
            center,
            radius,
        } => BoundaryShape::Bump {
            amplitude: *amplitude,
            center: moved(center),
            radius: *radius,
        },
        BoundaryShape::Constant { value } => BoundaryShape::Constant { value: *value },
        BoundaryShape::Sampled {
            origin,
            spacing,
            counts,
            values,
        } => BoundaryShape::Sampled {
            origin: moved(origin),
            spacing: *spacing,
            counts: counts.clone(),
            values: values.clone(),
        },
        BoundaryShape::Combination { terms } => BoundaryShape::Combination {
            terms: terms
                .iter()
                .map(|(c, s)| (*c, translate_shape(s, shift)))
                .collect(),
        },
    }
}

/// Fractional order `s ∈ (0, 1)` together with `a = 1 - 2s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FracOrderRepr", into = "FracOrderRepr")]
pub struct FracOrder {
    s: f64,
    a: f64,
}

#[derive(Serialize, Deserialize)]
struct FracOrderRepr {
    s: f64,
}

impl TryFrom<FracOrderRepr> for FracOrder {
    type Error = Error;
    fn try_from(r: FracOrderRepr) -> Result<Self> {
        Self::new(r.s)
    }
}

impl From<FracOrder> for FracOrderRepr {
    fn from(s: FracOrder) -> Self {
        Self { s: s.s }
    }
}

impl FracOrder {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Validation(format!("s must lie in (0, 1), got {s}")));
        }
        Ok(Self { s, a: 1.0 - 2.0 * s })
    }

    pub fn from_exponent(a: WeightExponent) -> Result<Self> {
        let a = a.value();
        if !(a > -1.0 && a < 1.0) {
            return Err(Error::Validation(format!("a must lie in (-1, 1), got {a}")));
        }
        Ok(Self {
            s: (1.0 - a) / 2.0,
            a,
        })
    }

    pub fn s(self) -> f64 {
        self.s
    }

    pub fn exponent(self) -> WeightExponent {
        WeightExponent::new(self.a).expect("a in (-1, 1) is finite")
    }

    /// `d_s = 2^{1-2s} Γ(1-s) / Γ(s)`: `lim y^a ∂_y u = -d_s (-Δ)^s f` for the
    /// mass-one extension `u` of `f`.
    pub fn flux_constant(self) -> f64 {
        let s = self.s;
        2f64.powf(1.0 - 2.0 * s) * gamma(1.0 - s) / gamma(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtensionOptions {
    /// Absolute quadrature target per point.
    pub abs_tol: f64,
    /// Bound on the neglected tail beyond the integration radius.
    pub tail_tol: f64,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            tail_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionValue {
    pub point: Point,
    pub value: f64,
    pub error_estimate: f64,
}

enum Kernel {
    Dirichlet { spec: KernelSpec, mass: f64 },
    Neumann { spec: KernelSpec },
}

impl Kernel {
    fn at(&self, t: f64, xn: f64) -> f64 {
        let r2 = t * t + xn * xn;
        match self {
            Self::Dirichlet { spec, mass } => kernel_value(spec, r2, xn) / mass,
            Self::Neumann { spec } => kernel_value(spec, r2, xn),
        }
    }
}

fn check_points(f: &BoundaryFunction, pts: &[Point]) -> Result<()> {
    for p in pts {
        if p.dim() != f.half_space_dim() {
            return Err(Error::Validation(format!(
                "point {p:?} does not live in dimension {}",
                f.half_space_dim()
            )));
        }
        if !(p.xn() > 0.0) || !p.is_finite() {
            return Err(Error::Domain(format!("extension needs x_n > 0, got {p:?}")));
        }
    }
    Ok(())
}

/// `u = (P_a ∗ f) / N` at each point.
pub fn extend_dirichlet(
    f: &BoundaryFunction,
    a: WeightExponent,
    pts: &[Point],
    opts: &ExtensionOptions,
) -> Result<Vec<ExtensionValue>> {
    if a.value() >= 1.0 {
        return Err(Error::Validation(format!(
            "Dirichlet extension needs a < 1, got {}",
            a.value()
        )));
    }
    let n = f.half_space_dim();
    let spec = KernelSpec::poisson(a.value(), n)?;
    let mass = kernel_normalization(&spec)?;
    if f.certificate.rate <= 0.0 && !f.is_constant() {
        return Err(Error::Validation(
            "decay certificate must have a positive rate".into(),
        ));
    }
    check_points(f, pts)?;
    let kernel = Kernel::Dirichlet { spec, mass };
    evaluate_all(f, &kernel, pts, opts, |d| {
        if f.is_constant() {
            return None;
        }
        let c = &f.certificate;
        let radius = match c.support {
            Some(s) => s,
            None => ((c.bound / opts.tail_tol).powf(1.0 / c.rate) - 1.0).max(0.0),
        };
        Some(radius + d)
    })
}

/// `u = E_{2-a} ∗ f` at each point (no normalisation).
pub fn extend_neumann(
    f: &BoundaryFunction,
    a: WeightExponent,
    pts: &[Point],
    opts: &ExtensionOptions,
) -> Result<Vec<ExtensionValue>> {
    let n = f.half_space_dim();
    let alpha = 2.0 - a.value();
    if !(alpha > 1.0 && alpha < n as f64) {
        return Err(Error::Validation(format!(
            "Neumann extension needs 1 < 2 - a < {n}, got 2 - a = {alpha}"
        )));
    }
    let c = f.certificate.clone();
    if !(c.rate > alpha) && c.support.is_none() {
        return Err(Error::Validation(format!(
            "decay rate {} must exceed 2 - a = {alpha}",
            c.rate
        )));
    }
    check_points(f, pts)?;
    let spec = KernelSpec::riesz(alpha, n)?;
    let kernel = Kernel::Neumann { spec };
    let av = a.value();
    evaluate_all(f, &kernel, pts, opts, |d| {
        Some(match c.support {
            Some(s) => s + d,
            None => {
                // For |y - x'| = ρ ≥ 2d: |f| ≤ B 2^q ρ^{-q} and K ≤ ρ^{-(n-2+a)},
                // so the tail is ≤ B 2^q |S| T^{1-q-a} / (q + a - 1).
                let q = c.rate;
                let scale = c.bound * 2f64.powf(q) * boundary_sphere_measure(n) / (q + av - 1.0);
                let t = (scale / opts.tail_tol).powf(1.0 / (q + av - 1.0));
                t.max(2.0 * d).max(1.0)
            }
        })
    })
}

fn evaluate_all<R>(
    f: &BoundaryFunction,
    kernel: &Kernel,
    pts: &[Point],
    opts: &ExtensionOptions,
    radius: R,
) -> Result<Vec<ExtensionValue>>
where
    R: Fn(f64) -> Option<f64> + Sync,
{
    let results = crate::par::map_range(pts.len(), |i| {
        let p = pts[i];
        let d = dist(p.tangential(), &f.certificate.center);
        convolve(f, kernel, &p, radius(d), opts).map(|(value, err)| ExtensionValue {
            point: p,
            value,
            error_estimate: err,
        })
    });
    results.into_iter().collect()
}

/// Radial integral of `K(t, x_n) · g(t) · t^{n-2}` where `g` sums (n = 2) or
/// integrates over the angle (n = 3) the data on the sphere of radius `t`
/// about `x'`. `radius = None` integrates to infinity.
fn convolve(
    f: &BoundaryFunction,
    kernel: &Kernel,
    x: &Point,
    radius: Option<f64>,
    opts: &ExtensionOptions,
) -> Result<(f64, f64)> {
    let xn = x.xn();
    let xp = x.tangential();
    let n = f.half_space_dim();
    let inner_tol = 0.1 * opts.abs_tol;
    let ring = |t: f64| -> f64 {
        match n {
            2 => f.value(&[xp[0] + t]) + f.value(&[xp[0] - t]),
            _ => {
                if t == 0.0 {
                    return 2.0 * PI * f.value(xp);
                }
                periodic_trapezoid(
                    |th: f64| f.value(&[xp[0] + t * th.cos(), xp[1] + t * th.sin()]),
                    2.0 * PI,
                    inner_tol,
                )
                .value
            }
        }
    };
    let integrand = |t: f64| {
        let jac = if n == 2 { 1.0 } else { t };
        kernel.at(t, xn) * jac * ring(t)
    };
    let mut breaks = vec![0.5 * xn, xn, 3.0 * xn, 10.0 * xn];
    let d = dist(xp, &f.certificate.center);
    let feature = feature_scale(&f.shape);
    for b in [d - 3.0 * feature, d, d + 3.0 * feature] {
        if b > 0.0 {
            breaks.push(b);
        }
    }
    let q = Integrator::new(opts.abs_tol, 0.0).with_max_segments(5000);
    let res = match radius {
        None => q.integrate_to_infinity_with_breaks(integrand, 0.0, &breaks)?,
        Some(r) => {
            let mut b: Vec<f64> = breaks.into_iter().filter(|&v| v < r).collect();
            b.push(0.0);
            b.push(r);
            b.sort_by(f64::total_cmp);
            b.dedup();
            q.integrate_with_breaks(integrand, &b)?
        }
    };
    if !res.converged && res.error > 1e3 * opts.abs_tol.max(1e-12 * res.value.abs()) {
        return Err(Error::Quadrature(format!(
            "extension at {x:?} did not converge (error estimate {:.3e})",
            res.error
        )));
    }
    let tail = if radius.is_some() { opts.tail_tol } else { 0.0 };
    Ok((res.value, res.error + tail))
}

fn feature_scale(shape: &BoundaryShape) -> f64 {
    match shape {
        BoundaryShape::Gaussian { width, .. } => *width,
        BoundaryShape::Bump { radius, .. } => *radius,
        BoundaryShape::Sampled { spacing, counts, .. } => {
            spacing * counts.iter().copied().max().unwrap_or(2) as f64 / 2.0
        }
        BoundaryShape::Constant { .. } => 1.0,
        BoundaryShape::Combination { terms } => feature_scale(&terms[0].1),
    }
}

/// `κ = (n - 2 + a) · N(-a)` with `N(-a)` the boundary mass of `P_{-a}`:
/// the Neumann extension satisfies `lim y^a ∂_y u = -κ f`.
pub fn neumann_flux_constant(a: WeightExponent, n: usize) -> Result<f64> {
    let av = a.value();
    if !(av > -1.0 && av < 1.0) || !(n as f64 - 2.0 + av > 0.0) {
        return Err(Error::Validation(format!(
            "flux constant needs max(-1, 2-n) < a < 1, got a = {av}, n = {n}"
        )));
    }
    Ok((n as f64 - 2.0 + av) * poisson_mass_closed_form(-av, n)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxLimit {
    pub value: f64,
    pub error_estimate: f64,
    /// The extrapolation sequence was not monotone and its error estimate
    /// exceeded the confidence tolerance.
    pub low_confidence: bool,
    /// Samples that entered the extrapolation (coarse to fine).
    pub samples: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluxLimitOptions {
    /// Largest height; samples are taken at `h, h/2, h/4`.
    pub h: f64,
    /// Absolute quadrature target for the underlying extension values.
    pub abs_tol: f64,
    /// Relative error estimate above which a non-monotone sequence is flagged.
    pub confidence_tol: f64,
}

impl Default for FluxLimitOptions {
    fn default() -> Self {
        Self {
            h: 0.05,
            abs_tol: 1e-13,
            confidence_tol: 1e-3,
        }
    }
}

impl FluxLimitOptions {
    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.abs_tol > 0.0) || !(self.confidence_tol > 0.0) {
            return Err(Error::Validation("flux-limit options must be positive".into()));
        }
        Ok(())
    }

    fn extension(&self) -> ExtensionOptions {
        ExtensionOptions {
            abs_tol: self.abs_tol,
            tail_tol: self.abs_tol.min(1e-10),
        }
    }
}

fn extrapolate(samples: [f64; 3], a: f64, confidence_tol: f64) -> (f64, f64, bool) {
    let (value, err) = richardson(&samples, &[1.0 + a, 2.0]);
    let low = !is_monotone_convergent(&samples) && err > confidence_tol * value.abs().max(1e-300);
    (value, err, low)
}

fn heights(h: f64) -> [f64; 3] {
    [h, h / 2.0, h / 4.0]
}

fn column(xprime: &[f64], ys: &[f64; 3]) -> Result<Vec<Point>> {
    ys.iter().map(|&y| Point::from_parts(xprime, y)).collect()
}

/// `(-Δ)^s f(x')` as `-(1/d_s) lim_{y→0} y^a ∂_y u(x', y)` for the mass-one
/// extension `u`.
///
/// The weighted flux is estimated from the difference with the trace,
/// `(1-a)(u(x', y) - f(x')) / y^{1-a}`, whose expansion in `y` has the
/// exponents `1 + a, 2, ...`; two Richardson steps on `y = h, h/2, h/4`
/// remove them.
pub fn fractional_laplacian(
    f: &BoundaryFunction,
    s: FracOrder,
    xprime: &[f64],
    opts: &FluxLimitOptions,
) -> Result<FluxLimit> {
    opts.validate()?;
    let a = s.a;
    let ys = heights(opts.h);
    let pts = column(xprime, &ys)?;
    let u = extend_dirichlet(f, s.exponent(), &pts, &opts.extension())?;
    let f0 = f.value(xprime);
    let mut samples = [0.0; 3];
    for (k, (uv, y)) in u.iter().zip(ys).enumerate() {
        samples[k] = (1.0 - a) * (uv.value - f0) / y.powf(1.0 - a);
    }
    let (flux, err, low) = extrapolate(samples, a, opts.confidence_tol);
    let d = s.flux_constant();
    Ok(FluxLimit {
        value: -flux / d,
        error_estimate: err / d,
        low_confidence: low,
        samples,
    })
}

/// `lim_{y→0} y^a ∂_y u(x', y)` for the Neumann extension `u = E_{2-a} ∗ f`,
/// from `(1-a)(u(y) - u(y/2)) / (y^{1-a}(1 - 2^{a-1}))` at `y = h, h/2, h/4`.
pub fn neumann_boundary_flux(
    f: &BoundaryFunction,
    a: WeightExponent,
    xprime: &[f64],
    opts: &FluxLimitOptions,
) -> Result<FluxLimit> {
    opts.validate()?;
    let av = a.value();
    let ys = heights(opts.h);
    let mut all = ys.to_vec();
    all.push(opts.h / 8.0);
    let pts: Vec<Point> = all
        .iter()
        .map(|&y| Point::from_parts(xprime, y))
        .collect::<Result<_>>()?;
    let u = extend_neumann(f, a, &pts, &opts.extension())?;
    let p = 1.0 - av;
    let mut samples = [0.0; 3];
    for k in 0..3 {
        samples[k] = p * (u[k].value - u[k + 1].value) / (ys[k].powf(p) * (1.0 - 2f64.powf(-p)));
    }
    let (value, err, low) = extrapolate(samples, av, opts.confidence_tol);
    Ok(FluxLimit {
        value,
        error_estimate: err,
        low_confidence: low,
        samples,
    })
}

/// `(-Δ)^s f(x')` for Gaussian data on the line, by quadrature of
/// `(1/π) ∫₀^∞ ξ^{2s} f̂(ξ) cos(ξ (x' - c)) dξ` with
/// `f̂(ξ) = A √π w e^{-w²ξ²/4}`.
pub fn fourier_oracle(f: &BoundaryFunction, s: FracOrder, xprime: f64) -> Result<f64> {
    let (amplitude, c, w) = match &f.shape {
        BoundaryShape::Gaussian {
            amplitude,
            center,
            width,
        } if center.len() == 1 => (*amplitude, center[0], *width),
        BoundaryShape::Gaussian { .. } => {
            return Err(Error::Unsupported(
                "Fourier oracle is implemented for a one-dimensional boundary only".into(),
            ))
        }
        _ => {
            return Err(Error::Unsupported(
                "Fourier oracle needs Gaussian data".into(),
            ))
        }
    };
    let t = xprime - c;
    let p = 2.0 * s.s;
    let ln_pref = 0.5 * PI.ln() + w.ln() - PI.ln();
    let integrand = |xi: f64| {
        if xi == 0.0 {
            return 0.0;
        }
        (ln_pref + p * xi.ln() - 0.25 * w * w * xi * xi).exp() * (xi * t).cos()
    };
    // The Gaussian factor is below 1e-30 past ξ = 17/w.
    let upper = 17.0 / w;
    let mut breaks = vec![0.0, 2.0 / w];
    if t != 0.0 {
        let period = PI / t.abs();
        let mut b = period;
        while b < upper {
            breaks.push(b);
            b += period;
        }
    }
    breaks.push(upper);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let res = Integrator::new(1e-14, 1e-12)
        .with_max_segments(4000)
        .integrate_with_breaks(integrand, &breaks)?;
    if !res.converged {
        return Err(Error::Quadrature(format!(
            "oracle did not converge (error estimate {:.3e})",
            res.error
        )));
    }
    Ok(amplitude * res.value)
}

/// `2^{2s} Γ(s + 1/2) / √π`: the oracle's value for `e^{-t²}` at `t = 0`.
pub fn gaussian_fraclap_at_center(s: FracOrder) -> f64 {
    let s = s.s;
    (2.0 * s * 2f64.ln() + ln_gamma(s + 0.5)).exp() / PI.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionKind {
    Dirichlet,
    Neumann,
}

/// Max over `probes` of `|L u|` for the extension `u`, where `L` is the
/// closure stencil with steps `h` and `h/2` combined as `(4 L_{h/2} - L_h)/3`.
///
/// The stencil's error expands in even powers of the step, so the
/// combination is fourth order. Probes need `x_n ≥ h`.
pub fn extension_residual(
    kind: ExtensionKind,
    f: &BoundaryFunction,
    a: WeightExponent,
    probes: &[Point],
    h: f64,
    opts: &ExtensionOptions,
) -> Result<f64> {
    check_points(f, probes)?;
    if probes.iter().any(|p| p.xn() < h) {
        return Err(Error::Precondition("probes need x_n ≥ h".into()));
    }
    // Validate once so that the pointwise closure cannot fail for parameter
    // reasons.
    let first = probes.first().map(std::slice::from_ref).unwrap_or(&[]);
    let eval = |p: &Point| -> Result<f64> {
        let v = match kind {
            ExtensionKind::Dirichlet => extend_dirichlet(f, a, std::slice::from_ref(p), opts)?,
            ExtensionKind::Neumann => extend_neumann(f, a, std::slice::from_ref(p), opts)?,
        };
        Ok(v[0].value)
    };
    for p in first {
        eval(p)?;
    }
    let field = FnField(|p: &Point| eval(p).unwrap_or(f64::NAN));
    let per_probe = crate::par::map_range(probes.len(), |i| {
        let coarse = weighted_operator_at(&field, &probes[i], a, h);
        let fine = weighted_operator_at(&field, &probes[i], a, h / 2.0);
        (4.0 * fine - coarse) / 3.0
    });
    let mut worst = 0.0f64;
    for r in per_probe {
        if !r.is_finite() {
            return Err(Error::Quadrature("extension evaluation failed on a probe".into()));
        }
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wa(a: f64) -> WeightExponent {
        WeightExponent::new(a).unwrap()
    }

    fn gauss1() -> BoundaryFunction {
        BoundaryFunction::gaussian(1.0, &[0.0], 1.0).unwrap()
    }

    #[test]
    fn constant_data_reproduced() {
        for n in 2..=3 {
            let f = BoundaryFunction::constant(1.0, n).unwrap();
            let pts = [
                Point::from_parts(&vec![0.3; n - 1], 0.2).unwrap(),
                Point::from_parts(&vec![-1.0; n - 1], 2.0).unwrap(),
            ];
            for &a in &[-0.5, 0.0, 0.5] {
                let v = extend_dirichlet(&f, wa(a), &pts, &ExtensionOptions::default()).unwrap();
                for e in v {
                    assert!((e.value - 1.0).abs() < 1e-8, "n={n} a={a} {e:?}");
                }
            }
            assert!(extend_neumann(&f, wa(0.5), &pts, &ExtensionOptions::default()).is_err());
        }
    }

    /// Classical half-plane Poisson integral, summed with a fixed Gauss-Hermite-free
    /// composite Simpson rule on a wide window.
    fn poisson_half_plane(x: f64, y: f64) -> f64 {
        let m = 400_000;
        let (lo, hi) = (-40.0, 40.0);
        let step = (hi - lo) / m as f64;
        let g = |t: f64| y / (PI * ((x - t).powi(2) + y * y)) * (-t * t).exp();
        let mut acc = g(lo) + g(hi);
        for k in 1..m {
            let t = lo + k as f64 * step;
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(t);
        }
        acc * step / 3.0
    }

    #[test]
    fn matches_classical_poisson_integral() {
        let v = extend_dirichlet(&gauss1(), wa(0.0), &[Point::new2(0.0, 1.0)], &ExtensionOptions::default())
            .unwrap()[0]
            .value;
        let oracle = poisson_half_plane(0.0, 1.0);
        assert!((v - oracle).abs() < 1e-8, "{v} vs {oracle}");
    }

    #[test]
    fn boundary_recovery_is_first_order() {
        let pts: Vec<Point> = [0.1, 0.05, 0.025].iter().map(|&y| Point::new2(0.0, y)).collect();
        let v = extend_dirichlet(&gauss1(), wa(0.0), &pts, &ExtensionOptions::default()).unwrap();
        let e: Vec<f64> = v.iter().map(|x| (x.value - 1.0).abs()).collect();
        assert!(e[0] > e[1] && e[1] > e[2]);
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.15, "{ratio}");
        }
    }

    #[test]
    fn validation_errors() {
        let f = gauss1();
        let p = [Point::new2(0.0, 1.0)];
        let o = ExtensionOptions::default();
        assert!(matches!(extend_dirichlet(&f, wa(1.0), &p, &o), Err(Error::Validation(_))));
        assert!(matches!(extend_neumann(&f, wa(-0.5), &p, &o), Err(Error::Validation(_))));
        assert!(matches!(
            extend_dirichlet(&f, wa(0.0), &[Point::new2(0.0, 0.0)], &o),
            Err(Error::Domain(_))
        ));
        let weak = f
            .clone()
            .with_certificate(DecayCertificate {
                bound: 1.0,
                rate: 1.2,
                center: vec![0.0],
                support: None,
            })
            .unwrap();
        assert!(matches!(extend_neumann(&weak, wa(0.5), &p, &o), Err(Error::Validation(_))));
        assert!(FracOrder::new(1.0).is_err() && FracOrder::new(0.0).is_err());
        assert!(BoundaryFunction::gaussian(1.0, &[0.0], 0.0).is_err());
    }

    #[test]
    fn zero_data_gives_zero() {
        let f = BoundaryFunction::gaussian(0.0, &[0.0, 0.0], 1.0).unwrap();
        let v = extend_neumann(&f, wa(0.5), &[Point::new3(0.0, 0.0, 1.0)], &ExtensionOptions::default())
            .unwrap();
        assert_eq!(v[0].value, 0.0);
    }

    #[test]
    fn frac_order_roundtrip() {
        let s = FracOrder::new(0.25).unwrap();
        assert_eq!(s.exponent().value(), 0.5);
        let t = FracOrder::from_exponent(wa(0.5)).unwrap();
        assert_eq!(s, t);
        assert!((FracOrder::new(0.5).unwrap().flux_constant() - 1.0).abs() < 1e-15);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"s":0.25}"#);
        assert!(serde_json::from_str::<FracOrder>(r#"{"s":1.5}"#).is_err());
    }

    #[test]
    fn oracle_limits_and_closed_form() {
        let f = gauss1();
        for &s in &[0.25, 0.5, 0.75] {
            let s = FracOrder::new(s).unwrap();
            let v = fourier_oracle(&f, s, 0.0).unwrap();
            assert!((v - gaussian_fraclap_at_center(s)).abs() < 1e-10, "{v}");
        }
        let half = fourier_oracle(&f, FracOrder::new(0.5).unwrap(), 0.0).unwrap();
        assert!((half - 2.0 / PI.sqrt()).abs() < 1e-10);
        // Reference value from an independent arbitrary-precision quadrature.
        let low = fourier_oracle(&f, FracOrder::new(0.01).unwrap(), 1.0).unwrap();
        assert!((low - 0.355_313_712_909_591_86).abs() < 1e-10, "{low}");
        for &t in &[0.0, 0.5] {
            let low = fourier_oracle(&f, FracOrder::new(0.01).unwrap(), t).unwrap();
            let fv = (-t * t).exp();
            assert!((low - fv).abs() <= 0.02 * fv, "t={t}: {low}");
        }
        let high = fourier_oracle(&f, FracOrder::new(0.99).unwrap(), 0.0).unwrap();
        assert!((high - 2.0).abs() <= 0.04, "{high}");
        let bump = BoundaryFunction::bump(1.0, &[0.0], 1.0).unwrap();
        assert!(matches!(
            fourier_oracle(&bump, FracOrder::new(0.5).unwrap(), 0.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn flux_limit_matches_oracle_at_half() {
        let s = FracOrder::new(0.5).unwrap();
        let r = fractional_laplacian(&gauss1(), s, &[0.0], &FluxLimitOptions::default()).unwrap();
        let oracle = 2.0 / PI.sqrt();
        assert!((r.value - oracle).abs() <= 0.01 * oracle, "{r:?}");
        assert!(!r.low_confidence);
    }

    #[test]
    fn wide_gaussian_tends_to_zero() {
        let s = FracOrder::new(0.5).unwrap();
        let mut prev = f64::INFINITY;
        for &w in &[1.0, 4.0, 16.0] {
            let f = BoundaryFunction::gaussian(1.0, &[0.0], w).unwrap();
            let opts = FluxLimitOptions {
                h: 0.05 * w,
                ..FluxLimitOptions::default()
            };
            let v = fractional_laplacian(&f, s, &[0.0], &opts).unwrap().value;
            assert!(v.abs() < prev);
            prev = v.abs();
        }
        assert!(prev < 0.1);
    }

    #[test]
    fn neumann_flux_constant_matches_limit() {
        let a = wa(0.5);
        let kappa = neumann_flux_constant(a, 3).unwrap();
        let f = BoundaryFunction::gaussian(1.0, &[0.0, 0.0], 1.0).unwrap();
        let r = neumann_boundary_flux(&f, a, &[0.0, 0.0], &FluxLimitOptions::default()).unwrap();
        assert!((-r.value / kappa - 1.0).abs() < 1e-3, "{r:?} κ={kappa}");
    }

    #[test]
    fn sampled_interpolation() {
        let f = BoundaryFunction::new(
            BoundaryShape::Sampled {
                origin: vec![0.0, 0.0],
                spacing: 1.0,
                counts: vec![2, 3],
                values: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            },
            3,
        )
        .unwrap();
        assert_eq!(f.value(&[0.0, 1.0]), 1.0);
        assert_eq!(f.value(&[1.0, 2.0]), 5.0);
        assert!((f.value(&[0.5, 0.5]) - 2.0).abs() < 1e-15);
        assert_eq!(f.value(&[2.0, 0.0]), 0.0);
        assert_eq!(f.certificate().support, Some(0.5 * 5f64.sqrt()));
    }
}
