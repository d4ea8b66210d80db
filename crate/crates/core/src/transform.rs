//! Möbius inversion through spheres centred on the boundary hyperplane and
//! the Kelvin-type transform it induces on functions.
//!
//! For a centre `x` with `x_n = 0` and radius `λ > 0`,
//!
//! ```text
//! y^{x,λ}    = x + λ² (y - x) / |y - x|²
//! u_{x,λ}(y) = (λ / |y - x|)^{n-2+a} · u(y^{x,λ})            (a ≠ 2 - n)
//! u_{x,λ}(y) = u(y^{x,λ}) + ln(λ / |y - x|)                 (a = 2 - n)
//! ```
//!
//! and for every `C²` function `u`
//!
//! ```text
//! div(y_n^a ∇u_{x,λ})(y) = (λ / |y - x|)^{n+2-a} · div(y_n^a ∇u)(y^{x,λ}).
//! ```
//!
//! [`invariance_residual`] measures the two sides of that identity with
//! finite differences; [`flux_invariance_check`] tracks the weighted normal
//! flux of `u_{x,λ}` at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::HalfSpaceFunction;
use crate::kernels::WeightExponent;
use crate::operator::weighted_operator_at;
use crate::point::Point;
use crate::richardson::richardson;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMap {
    center: Point,
    radius: f64,
}

impl MoebiusMap {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if center.xn() != 0.0 {
            return Err(Error::Validation(format!(
                "Möbius centre must lie on the boundary, got x_n = {}",
                center.xn()
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Validation(format!("radius must be positive, got {radius}")));
        }
        if !center.is_finite() {
            return Err(Error::Validation("centre must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    /// Map centred at the boundary point with tangential coordinates `xprime`.
    pub fn at_boundary(xprime: &[f64], radius: f64) -> Result<Self> {
        Self::new(Point::from_parts(xprime, 0.0)?, radius)
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    fn check(&self, y: &Point) -> Result<f64> {
        if y.dim() != self.dim() {
            return Err(Error::Validation(format!(
                "point dimension {} does not match map dimension {}",
                y.dim(),
                self.dim()
            )));
        }
        let d2 = (*y - self.center).norm_sq();
        if d2 == 0.0 {
            return Err(Error::Singularity(format!(
                "evaluation at the centre {:?} of the inversion",
                self.center
            )));
        }
        Ok(d2)
    }

    /// `y^{x,λ}`.
    pub fn invert_point(&self, y: &Point) -> Result<Point> {
        let d2 = self.check(y)?;
        Ok(self.center + (self.radius * self.radius / d2) * (*y - self.center))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformVariant {
    Standard,
    Logarithmic,
}

/// `u_{x,λ}` as a lazily evaluated function.
#[derive(Debug, Clone)]
pub struct TransformedFunction<U> {
    base: U,
    map: MoebiusMap,
    exponent: WeightExponent,
    variant: TransformVariant,
}

/// Kelvin-type transform of `u`; the logarithmic form is chosen exactly when
/// `a = 2 - n`.
pub fn kelvin<U: HalfSpaceFunction>(
    u: U,
    map: MoebiusMap,
    a: WeightExponent,
) -> TransformedFunction<U> {
    let variant = if a.is_special(map.dim()) {
        TransformVariant::Logarithmic
    } else {
        TransformVariant::Standard
    };
    TransformedFunction {
        base: u,
        map,
        exponent: a,
        variant,
    }
}

impl<U: HalfSpaceFunction> TransformedFunction<U> {
    pub fn variant(&self) -> TransformVariant {
        self.variant
    }

    pub fn map(&self) -> &MoebiusMap {
        &self.map
    }

    pub fn base(&self) -> &U {
        &self.base
    }

    pub fn eval(&self, y: &Point) -> Result<f64> {
        let ystar = self.map.invert_point(y)?;
        let ratio = self.map.radius / (*y - self.map.center).norm();
        Ok(match self.variant {
            TransformVariant::Standard => {
                ratio.powf(self.exponent.kelvin_exponent(self.map.dim())) * self.base.value(&ystar)
            }
            TransformVariant::Logarithmic => self.base.value(&ystar) + ratio.ln(),
        })
    }

    /// Closed-form `∂_n u_{x,λ}(y)` from the chain rule, using the base
    /// function's gradient at `y^{x,λ}`.
    pub fn normal_derivative(&self, y: &Point) -> Result<f64> {
        let ystar = self.map.invert_point(y)?;
        let n = self.map.dim();
        let lam = self.map.radius;
        let d = *y - self.map.center;
        let rho2 = d.norm_sq();
        let rho = rho2.sqrt();
        let yn = y.xn();
        let grad = self.base.gradient(&ystar);
        // ∂_n of u(y^{x,λ})
        let inner = lam * lam / rho2 * grad.xn() - 2.0 * lam * lam * yn / (rho2 * rho2) * grad.dot(&d);
        Ok(match self.variant {
            TransformVariant::Standard => {
                let k = self.exponent.kelvin_exponent(n);
                let factor = (lam / rho).powf(k);
                -k * factor * yn / rho2 * self.base.value(&ystar) + factor * inner
            }
            TransformVariant::Logarithmic => inner - yn / rho2,
        })
    }
}

impl<U: HalfSpaceFunction> HalfSpaceFunction for TransformedFunction<U> {
    /// NaN at the map centre.
    fn value(&self, y: &Point) -> f64 {
        self.eval(y).unwrap_or(f64::NAN)
    }
}

/// Factor `(λ/|y - x|)^{n+2-a}` relating the operator on both sides.
pub fn operator_factor(map: &MoebiusMap, a: WeightExponent, y: &Point) -> Result<f64> {
    let d2 = map.check(y)?;
    let n = map.dim() as f64;
    Ok((map.radius / d2.sqrt()).powf(n + 2.0 - a.value()))
}

/// Pointwise `div(y_n^a ∇u_{x,λ})(y) - factor · div(y_n^a ∇u)(y^{x,λ})` with
/// both operators taken by the step-`h` flux-form stencil.
///
/// Every probe must satisfy `y_n ≥ h`, stay off the centre, and its image must
/// also satisfy `y_n ≥ h`.
pub fn invariance_residual<U: HalfSpaceFunction>(
    u: &U,
    map: &MoebiusMap,
    a: WeightExponent,
    probe: &[Point],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Validation(format!("step must be positive, got {h}")));
    }
    let transformed = kelvin(u, *map, a);
    probe
        .iter()
        .map(|y| {
            if y.xn() < h {
                return Err(Error::Domain(format!("probe {y:?} is closer than h to the boundary")));
            }
            let dist = (*y - map.center).norm();
            if dist <= 2.0 * h {
                return Err(Error::Domain(format!("probe {y:?} touches the map centre")));
            }
            let ystar = map.invert_point(y)?;
            if ystar.xn() < h {
                return Err(Error::Domain(format!(
                    "image {ystar:?} of probe {y:?} is closer than h to the boundary"
                )));
            }
            let lhs = weighted_operator_at(&transformed, y, a, h);
            let rhs = operator_factor(map, a, y)? * weighted_operator_at(u, &ystar, a, h);
            Ok(lhs - rhs)
        })
        .collect()
}

/// Probe set for the invariance identity: points at distance `[0.6λ, 1.5λ]`
/// from the centre with `y_n ≥ 0.5λ`, on a regular angular/radial lattice.
pub fn default_invariance_probe(map: &MoebiusMap) -> Vec<Point> {
    let lam = map.radius;
    let c = map.center;
    let mut pts = Vec::new();
    let radii = [0.6, 0.85, 1.1, 1.5];
    match map.dim() {
        2 => {
            for &r in &radii {
                for k in 0..9 {
                    let theta = std::f64::consts::PI * (0.15 + 0.7 * k as f64 / 8.0);
                    let p = c + Point::new2(r * lam * theta.cos(), r * lam * theta.sin());
                    if p.xn() >= 0.5 * lam {
                        pts.push(p);
                    }
                }
            }
        }
        _ => {
            for &r in &radii {
                for k in 0..5 {
                    let theta = std::f64::consts::PI * (0.1 + 0.3 * k as f64 / 4.0);
                    for m in 0..4 {
                        let phi = std::f64::consts::FRAC_PI_2 * m as f64 + 0.3;
                        let s = theta.sin();
                        let p = c + Point::new3(
                            r * lam * s * phi.cos(),
                            r * lam * s * phi.sin(),
                            r * lam * theta.cos(),
                        );
                        if p.xn() >= 0.5 * lam {
                            pts.push(p);
                        }
                    }
                }
            }
        }
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceStudy {
    pub steps: Vec<f64>,
    pub residual_linf: Vec<f64>,
    /// Least-squares slope of `log residual` against `log h`.
    pub rate: f64,
}

/// Residual max-norms under a sequence of steps and the fitted convergence rate.
pub fn invariance_study<U: HalfSpaceFunction>(
    u: &U,
    map: &MoebiusMap,
    a: WeightExponent,
    probe: &[Point],
    steps: &[f64],
) -> Result<InvarianceStudy> {
    if steps.len() < 2 {
        return Err(Error::Validation("need at least two steps for a rate".into()));
    }
    let mut residual_linf = Vec::with_capacity(steps.len());
    for &h in steps {
        let r = invariance_residual(u, map, a, probe, h)?;
        residual_linf.push(r.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let rate = fit_rate(steps, &residual_linf);
    Ok(InvarianceStudy {
        steps: steps.to_vec(),
        residual_linf,
        rate,
    })
}

/// Slope of the least-squares line through `(log h, log e)`.
pub fn fit_rate(steps: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    pub point: Point,
    /// Extrapolated limit of `y_n^a ∂_n u_{x,λ}` from the chain-rule formula.
    pub formula: f64,
    /// Same limit from centred differences of `u_{x,λ}` in `y_n`.
    pub difference: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxCheck {
    pub points: Vec<FluxPoint>,
    /// `max |formula|` over the probe points.
    pub max_flux: f64,
    /// `max |formula - difference|`, the agreement of the two routes.
    pub route_gap: f64,
}

/// Estimate `lim_{y_n→0⁺} y_n^a ∂_n u_{x,λ}(y)` at boundary points.
///
/// Samples at `y_n ∈ {h, h/2, h/4}` are Richardson-extrapolated with
/// exponents `1 + a` and `2 + a`.
pub fn flux_invariance_check<U: HalfSpaceFunction>(
    u: &U,
    map: &MoebiusMap,
    a: WeightExponent,
    boundary_points: &[Point],
    h: f64,
) -> Result<FluxCheck> {
    if a.value() <= -1.0 {
        return Err(Error::Validation(format!("flux check needs a > -1, got {}", a.value())));
    }
    if !(h > 0.0) {
        return Err(Error::Validation(format!("step must be positive, got {h}")));
    }
    let transformed = kelvin(u, *map, a);
    let av = a.value();
    let exps = [1.0 + av, 2.0 + av];
    let mut points = Vec::with_capacity(boundary_points.len());
    for p in boundary_points {
        if p.dim() != map.dim() {
            return Err(Error::Validation("probe dimension mismatch".into()));
        }
        let base = p.with_xn(0.0);
        let tangential_gap = (base - map.center).norm();
        if tangential_gap == 0.0 {
            return Err(Error::Singularity(format!(
                "boundary probe {p:?} coincides with the map centre"
            )));
        }
        let mut formula = [0.0; 3];
        let mut difference = [0.0; 3];
        for (k, yn) in [h, h / 2.0, h / 4.0].into_iter().enumerate() {
            let y = base.with_xn(yn);
            let weight = yn.powf(av);
            formula[k] = weight * transformed.normal_derivative(&y)?;
            let centred = |d: f64| -> Result<f64> {
                let up = transformed.eval(&y.with_xn(yn + d))?;
                let down = transformed.eval(&y.with_xn(yn - d))?;
                Ok((up - down) / (2.0 * d))
            };
            // y^{1-a}-type behaviour is scale invariant, so the step must be a
            // small fraction of y_n and is itself extrapolated.
            let (coarse, fine) = (centred(yn / 16.0)?, centred(yn / 32.0)?);
            difference[k] = weight * (4.0 * fine - coarse) / 3.0;
        }
        let (f0, fe) = richardson(&formula, &exps);
        let (d0, de) = richardson(&difference, &exps);
        points.push(FluxPoint {
            point: base,
            formula: f0,
            difference: d0,
            error_estimate: fe.max(de).max((f0 - d0).abs()),
        });
    }
    let max_flux = points.iter().fold(0.0f64, |m, p| m.max(p.formula.abs()));
    let route_gap = points
        .iter()
        .fold(0.0f64, |m, p| m.max((p.formula - p.difference).abs()));
    Ok(FluxCheck {
        points,
        max_flux,
        route_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Constant, FnField, PowerFamily, TestFunction};

    fn wa(a: f64) -> WeightExponent {
        WeightExponent::new(a).unwrap()
    }

    #[test]
    fn inversion_examples() {
        let m = MoebiusMap::at_boundary(&[0.0], 1.0).unwrap();
        let p = m.invert_point(&Point::new2(0.0, 2.0)).unwrap();
        assert!((p - Point::new2(0.0, 0.5)).norm() < 1e-15);

        let m = MoebiusMap::at_boundary(&[1.0, 0.0], 2.0).unwrap();
        let p = m.invert_point(&Point::new3(1.0, 0.0, 1.0)).unwrap();
        assert!((p - Point::new3(1.0, 0.0, 4.0)).norm() < 1e-15);
        let back = m.invert_point(&p).unwrap();
        assert!((back - Point::new3(1.0, 0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn centre_is_singular() {
        let m = MoebiusMap::at_boundary(&[0.5], 1.0).unwrap();
        assert!(matches!(
            m.invert_point(&Point::new2(0.5, 0.0)),
            Err(Error::Singularity(_))
        ));
        let t = kelvin(Constant(1.0), m, wa(0.3));
        assert!(t.eval(&Point::new2(0.5, 0.0)).is_err());
    }

    #[test]
    fn invalid_maps() {
        assert!(MoebiusMap::new(Point::new2(0.0, 0.1), 1.0).is_err());
        assert!(MoebiusMap::at_boundary(&[0.0], 0.0).is_err());
        assert!(MoebiusMap::at_boundary(&[0.0], -2.0).is_err());
    }

    #[test]
    fn kelvin_of_constant() {
        let m = MoebiusMap::at_boundary(&[0.0, 0.0], 1.0).unwrap();
        let t = kelvin(Constant(1.0), m, wa(0.0));
        assert_eq!(t.variant(), TransformVariant::Standard);
        assert!((t.eval(&Point::new3(0.0, 0.0, 2.0)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn logarithmic_variant() {
        let m = MoebiusMap::at_boundary(&[0.0], 1.0).unwrap();
        let t = kelvin(Constant(0.0), m, wa(0.0));
        assert_eq!(t.variant(), TransformVariant::Logarithmic);
        let e = std::f64::consts::E;
        let y = Point::new2(e * 0.6, e * 0.8);
        assert!((t.eval(&y).unwrap() + 1.0).abs() < 1e-14);
        // a = 2 - n only in the exact sense
        let t = kelvin(Constant(0.0), m, wa(1e-12));
        assert_eq!(t.variant(), TransformVariant::Standard);
    }

    #[test]
    fn kelvin_twice_is_identity() {
        let a = 0.5;
        let m = MoebiusMap::at_boundary(&[0.3], 1.7).unwrap();
        let u = PowerFamily::new(1.0, 1.0 - a, 0.0);
        let once = kelvin(u, m, wa(a));
        let twice = kelvin(once, m, wa(a));
        for y in [Point::new2(0.1, 0.4), Point::new2(2.0, 1.0), Point::new2(-3.0, 0.2)] {
            assert!((twice.eval(&y).unwrap() - u.value(&y)).abs() < 1e-13);
        }
    }

    #[test]
    fn chain_rule_matches_difference() {
        for &(a, n) in &[(0.5, 2usize), (0.0, 2), (-0.5, 3), (-1.0, 3)] {
            let m = if n == 2 {
                MoebiusMap::at_boundary(&[0.2], 1.3).unwrap()
            } else {
                MoebiusMap::at_boundary(&[0.2, -0.1], 1.3).unwrap()
            };
            let t = kelvin(TestFunction::SinExp, m, wa(a));
            let y = if n == 2 { Point::new2(1.0, 0.7) } else { Point::new3(1.0, 0.3, 0.7) };
            let d = 1e-5;
            let fd = (t.eval(&y.shifted(n - 1, d)).unwrap() - t.eval(&y.shifted(n - 1, -d)).unwrap())
                / (2.0 * d);
            let an = t.normal_derivative(&y).unwrap();
            assert!((fd - an).abs() < 1e-8, "a={a} n={n}: {fd} vs {an}");
        }
    }

    #[test]
    fn invariance_converges_for_non_solution() {
        let m = MoebiusMap::at_boundary(&[1.0], 2.0).unwrap();
        let probe = default_invariance_probe(&m);
        let s = invariance_study(&TestFunction::SinExp, &m, wa(0.5), &probe, &[1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0])
            .unwrap();
        assert!(s.rate >= 1.8, "{s:?}");
    }

    #[test]
    fn invariance_for_solution_family() {
        let m = MoebiusMap::at_boundary(&[0.0], 1.0).unwrap();
        let probe = default_invariance_probe(&m);
        let u = PowerFamily::new(1.0, 0.5, 0.0);
        let s = invariance_study(&u, &m, wa(0.5), &probe, &[1.0 / 32.0, 1.0 / 64.0]).unwrap();
        assert!(s.residual_linf[1] < s.residual_linf[0] / 3.0, "{s:?}");
    }

    #[test]
    fn probe_domain_errors() {
        let m = MoebiusMap::at_boundary(&[0.0], 1.0).unwrap();
        let r = invariance_residual(&Constant(1.0), &m, wa(0.0), &[Point::new2(0.5, 0.01)], 0.1);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn flux_of_zero_flux_function_vanishes() {
        let m = MoebiusMap::at_boundary(&[0.0], 1.0).unwrap();
        let u = FnField(|y: &Point| y.get(0).cos());
        let c = flux_invariance_check(&u, &m, wa(0.5), &[Point::new2(2.0, 0.0)], 0.01).unwrap();
        assert!(c.max_flux <= 1e-4, "{c:?}");
        let c = flux_invariance_check(&Constant(1.0), &m, wa(0.5), &[Point::new2(2.0, 0.0)], 0.01).unwrap();
        assert!(c.max_flux < 1e-8, "{c:?}");
    }

    #[test]
    fn nonzero_flux_is_reported() {
        let a = 0.5;
        let m = MoebiusMap::at_boundary(&[0.0], 1.0).unwrap();
        let u = PowerFamily::new(1.0, 1.0 - a, 0.0);
        let c = flux_invariance_check(&u, &m, wa(a), &[Point::new2(2.0, 0.0)], 0.01).unwrap();
        // (λ/|x' - x|)^{n-a} (1 - a)
        let expected = 2f64.powf(-1.5) * 0.5;
        assert!((c.points[0].formula - expected).abs() < 1e-6, "{c:?}");
        assert!((c.points[0].difference - expected).abs() < 1e-5, "{c:?}");
    }

    #[test]
    fn flux_probe_at_centre_is_singular() {
        let m = MoebiusMap::at_boundary(&[0.0], 1.0).unwrap();
        let r = flux_invariance_check(&Constant(1.0), &m, wa(0.5), &[Point::new2(0.0, 0.0)], 0.01);
        assert!(matches!(r, Err(Error::Singularity(_))));
    }
}
