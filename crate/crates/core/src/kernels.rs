//! Closed-form half-space kernels.
//!
//! With `r² = |x'|² + x_n²`:
//!
//! | variant            | value                              |
//! |--------------------|------------------------------------|
//! | `PoissonType(a)`   | `x_n^{1-a} / r^{n-a}`              |
//! | `RieszType(α)`     | `1 / r^{n-α}`                      |
//! | `Gluck(α, β)`      | `x_n^β / r^{n-α}`                  |
//! | `GammaD(a)`        | `x_n^{1-a} / r^{n-a}`              |
//! | `GammaN(a)`        | `1 / r^{n-2+a}`                    |
//!
//! `PoissonType` and `GammaD` share a formula; the former is the convolution
//! kernel of the Dirichlet extension (argument `x' - y`), the latter the
//! singular solution centred at the origin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::quadrature::Integrator;

/// The exponent `a` of the weight `x_n^a`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct WeightExponent(f64);

impl WeightExponent {
    pub fn new(a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::Validation(format!("weight exponent must be finite, got {a}")));
        }
        Ok(Self(a))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `P_a` has finite boundary mass.
    pub fn is_integrable(self) -> bool {
        self.0 < 1.0
    }

    /// Window `max{-1, 2-n} < a < 1` of the zero-flux uniqueness result.
    pub fn is_neumann_valid(self, n: usize) -> bool {
        let lo = (-1.0f64).max(2.0 - n as f64);
        lo < self.0 && self.0 < 1.0
    }

    /// `a = 2 - n`, where the Kelvin factor degenerates and the logarithmic
    /// transform is used. Exact comparison.
    pub fn is_special(self, n: usize) -> bool {
        self.0 == 2.0 - n as f64
    }

    /// Exponent `1 - a` of the non-constant one-dimensional solution.
    pub fn family_exponent(self) -> f64 {
        1.0 - self.0
    }

    /// Kelvin exponent `n - 2 + a`.
    pub fn kelvin_exponent(self, n: usize) -> f64 {
        n as f64 - 2.0 + self.0
    }
}

impl TryFrom<f64> for WeightExponent {
    type Error = Error;
    fn try_from(a: f64) -> Result<Self> {
        Self::new(a)
    }
}

impl From<WeightExponent> for f64 {
    fn from(a: WeightExponent) -> f64 {
        a.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelVariant {
    PoissonType { a: f64 },
    RieszType { alpha: f64 },
    Gluck { alpha: f64, beta: f64 },
    GammaD { a: f64 },
    GammaN { a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub variant: KernelVariant,
    pub n: usize,
}

impl KernelSpec {
    pub fn new(variant: KernelVariant, n: usize) -> Result<Self> {
        let spec = Self { variant, n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn poisson(a: f64, n: usize) -> Result<Self> {
        Self::new(KernelVariant::PoissonType { a }, n)
    }

    pub fn riesz(alpha: f64, n: usize) -> Result<Self> {
        Self::new(KernelVariant::RieszType { alpha }, n)
    }

    pub fn gluck(alpha: f64, beta: f64, n: usize) -> Result<Self> {
        Self::new(KernelVariant::Gluck { alpha, beta }, n)
    }

    pub fn gamma_d(a: f64, n: usize) -> Result<Self> {
        Self::new(KernelVariant::GammaD { a }, n)
    }

    pub fn gamma_n(a: f64, n: usize) -> Result<Self> {
        Self::new(KernelVariant::GammaN { a }, n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.n) {
            return Err(Error::Validation(format!("n must be 2 or 3, got {}", self.n)));
        }
        let n = self.n as f64;
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be finite")))
            }
        };
        match self.variant {
            KernelVariant::PoissonType { a } => {
                finite(a, "a")?;
                if a >= 1.0 {
                    return Err(Error::Validation(format!(
                        "PoissonType requires a < 1, got {a}"
                    )));
                }
            }
            KernelVariant::RieszType { alpha } => {
                finite(alpha, "alpha")?;
                if !(alpha > 1.0 && alpha < n) {
                    return Err(Error::Validation(format!(
                        "RieszType requires alpha in (1, {n}), got {alpha}"
                    )));
                }
            }
            KernelVariant::Gluck { alpha, beta } => {
                finite(alpha, "alpha")?;
                finite(beta, "beta")?;
                if beta < 0.0 {
                    return Err(Error::Validation(format!("Gluck requires beta >= 0, got {beta}")));
                }
                let s = alpha + beta;
                if !(s > 0.0 && s < n - beta) {
                    return Err(Error::Validation(format!(
                        "Gluck requires 0 < alpha + beta < n - beta, got alpha={alpha}, beta={beta}, n={n}"
                    )));
                }
            }
            KernelVariant::GammaD { a } | KernelVariant::GammaN { a } => finite(a, "a")?,
        }
        Ok(())
    }
}

/// Evaluate the kernel at `(x', x_n)`.
pub fn eval_kernel(spec: &KernelSpec, xprime: &[f64], xn: f64) -> Result<f64> {
    spec.validate()?;
    if xprime.len() != spec.n - 1 {
        return Err(Error::Validation(format!(
            "tangential point has {} coordinates, expected {}",
            xprime.len(),
            spec.n - 1
        )));
    }
    if !(xn > 0.0) || !xn.is_finite() {
        return Err(Error::Domain(format!("x_n must be positive, got {xn}")));
    }
    let r2 = xprime.iter().map(|v| v * v).sum::<f64>() + xn * xn;
    Ok(kernel_value(spec, r2, xn))
}

/// Kernel from `|x'|² + x_n²` and `x_n`, without validation.
pub(crate) fn kernel_value(spec: &KernelSpec, r2: f64, xn: f64) -> f64 {
    let n = spec.n as f64;
    match spec.variant {
        KernelVariant::PoissonType { a } | KernelVariant::GammaD { a } => {
            xn.powf(1.0 - a) * r2.powf(-(n - a) / 2.0)
        }
        KernelVariant::RieszType { alpha } => r2.powf(-(n - alpha) / 2.0),
        KernelVariant::Gluck { alpha, beta } => xn.powf(beta) * r2.powf(-(n - alpha) / 2.0),
        KernelVariant::GammaN { a } => r2.powf(-(n - 2.0 + a) / 2.0),
    }
}

/// Evaluate at a half-space point.
pub fn eval_kernel_at(spec: &KernelSpec, x: &Point) -> Result<f64> {
    if x.dim() != spec.n {
        return Err(Error::Validation(format!(
            "point dimension {} does not match kernel dimension {}",
            x.dim(),
            spec.n
        )));
    }
    eval_kernel(spec, x.tangential(), x.xn())
}

/// Measure of the unit sphere in `R^{n-1}` (2 for `n = 2`, `2π` for `n = 3`).
pub(crate) fn boundary_sphere_measure(n: usize) -> f64 {
    match n {
        2 => 2.0,
        3 => 2.0 * PI,
        _ => {
            let d = (n - 1) as f64;
            2.0 * PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0)
        }
    }
}

/// `∫_{R^{n-1}} P_a(y', 1) dy'`, the boundary mass of the Poisson-type kernel.
///
/// The integral is reduced to a radial one and the half line is sent to
/// `[0, 1)` with `r = z/(1 - z)` before adaptive integration. Other kernels
/// have infinite mass and are rejected.
pub fn kernel_normalization(spec: &KernelSpec) -> Result<f64> {
    spec.validate()?;
    match spec.variant {
        KernelVariant::PoissonType { a } => {
            let n = spec.n;
            let q = Integrator::new(1e-14, 1e-13).with_max_segments(4000);
            let radial = |r: f64| (1.0 + r * r).powf(-(n as f64 - a) / 2.0) * r.powi(n as i32 - 2);
            let res = q.integrate_to_infinity_with_breaks(radial, 0.0, &[1.0])?;
            if !res.converged {
                return Err(Error::Quadrature(format!(
                    "normalization did not converge (estimate {:.3e})",
                    res.error
                )));
            }
            Ok(boundary_sphere_measure(n) * res.value)
        }
        KernelVariant::RieszType { .. } => Err(Error::NonNormalizable(
            "RieszType kernel has infinite boundary mass".into(),
        )),
        other => Err(Error::NonNormalizable(format!(
            "normalization is defined for PoissonType only, got {other:?}"
        ))),
    }
}

/// Closed form of the same mass,
/// `π^{(n-1)/2} Γ((1-a)/2) / Γ((n-a)/2)`.
pub fn poisson_mass_closed_form(a: f64, n: usize) -> Result<f64> {
    if a >= 1.0 {
        return Err(Error::NonNormalizable(format!("a = {a} >= 1")));
    }
    let n = n as f64;
    Ok((0.5 * (n - 1.0) * PI.ln() + ln_gamma((1.0 - a) / 2.0) - ln_gamma((n - a) / 2.0)).exp())
}

/// Max over `points` of `|x_n^b E_{a, 1-a-b}(x) - Γ_d(x)|`.
pub fn kernel_identity_gluck(a: WeightExponent, b: f64, n: usize, points: &[Point]) -> Result<f64> {
    let a = a.value();
    let gluck = KernelSpec::gluck(a, 1.0 - a - b, n)?;
    let gamma_d = KernelSpec::gamma_d(a, n)?;
    let mut worst = 0.0f64;
    for p in points {
        let lhs = p.xn().powf(b) * eval_kernel_at(&gluck, p)?;
        let rhs = eval_kernel_at(&gamma_d, p)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
