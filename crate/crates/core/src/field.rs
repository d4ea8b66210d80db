//! Scalar functions on the half space and a small library of test functions.

use crate::point::Point;

/// A scalar function on (an open subset of) the half space.
pub trait HalfSpaceFunction: Send + Sync {
    fn value(&self, y: &Point) -> f64;

    /// Gradient; centred differences unless overridden.
    fn gradient(&self, y: &Point) -> Point {
        let h = 1e-5 * (1.0 + y.norm());
        let mut g = Point::origin(y.dim());
        for i in 0..y.dim() {
            let d = (self.value(&y.shifted(i, h)) - self.value(&y.shifted(i, -h))) / (2.0 * h);
            g = g.with(i, d);
        }
        g
    }
}

impl<T: HalfSpaceFunction + ?Sized> HalfSpaceFunction for &T {
    fn value(&self, y: &Point) -> f64 {
        (**self).value(y)
    }
    fn gradient(&self, y: &Point) -> Point {
        (**self).gradient(y)
    }
}

impl<T: HalfSpaceFunction + ?Sized> HalfSpaceFunction for Box<T> {
    fn value(&self, y: &Point) -> f64 {
        (**self).value(y)
    }
    fn gradient(&self, y: &Point) -> Point {
        (**self).gradient(y)
    }
}

impl<T: HalfSpaceFunction + ?Sized> HalfSpaceFunction for std::sync::Arc<T> {
    fn value(&self, y: &Point) -> f64 {
        (**self).value(y)
    }
    fn gradient(&self, y: &Point) -> Point {
        (**self).gradient(y)
    }
}

/// Wraps a closure; the gradient falls back to differences.
#[derive(Clone, Copy)]
pub struct FnField<F>(pub F);

impl<F> HalfSpaceFunction for FnField<F>
where
    F: Fn(&Point) -> f64 + Send + Sync,
{
    fn value(&self, y: &Point) -> f64 {
        (self.0)(y)
    }
}

/// A function with a hand-written gradient.
pub struct WithGradient<F, G> {
    pub f: F,
    pub grad: G,
}

impl<F, G> HalfSpaceFunction for WithGradient<F, G>
where
    F: Fn(&Point) -> f64 + Send + Sync,
    G: Fn(&Point) -> Point + Send + Sync,
{
    fn value(&self, y: &Point) -> f64 {
        (self.f)(y)
    }
    fn gradient(&self, y: &Point) -> Point {
        (self.grad)(y)
    }
}

/// `c·y_n^p + d`, the one-dimensional family (with `p = 1 - a`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFamily {
    pub coeff: f64,
    pub exponent: f64,
    pub offset: f64,
}

impl PowerFamily {
    pub fn new(coeff: f64, exponent: f64, offset: f64) -> Self {
        Self {
            coeff,
            exponent,
            offset,
        }
    }
}

impl HalfSpaceFunction for PowerFamily {
    fn value(&self, y: &Point) -> f64 {
        self.coeff * y.xn().powf(self.exponent) + self.offset
    }
    fn gradient(&self, y: &Point) -> Point {
        let d = self.coeff * self.exponent * y.xn().powf(self.exponent - 1.0);
        Point::origin(y.dim()).with_xn(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl HalfSpaceFunction for Constant {
    fn value(&self, _y: &Point) -> f64 {
        self.0
    }
    fn gradient(&self, y: &Point) -> Point {
        Point::origin(y.dim())
    }
}

/// Smooth functions that do not solve the weighted equation; used to check
/// identities that must hold for every `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// `sin(y₁)·e^{y_n} + y_n²`
    SinExp,
    /// `y₁²·y_n + cos(y_n)` (plus `y₂` for `n = 3`)
    Polynomial,
    /// `1 / (1 + |y - (0.3, .., 1.5)|²)`
    Rational,
}

impl TestFunction {
    pub const ALL: [TestFunction; 3] = [Self::SinExp, Self::Polynomial, Self::Rational];

    pub fn name(self) -> &'static str {
        match self {
            Self::SinExp => "sin(y1)*exp(yn)+yn^2",
            Self::Polynomial => "y1^2*yn+cos(yn)+y2",
            Self::Rational => "1/(1+|y-c|^2)",
        }
    }
}

impl HalfSpaceFunction for TestFunction {
    fn value(&self, y: &Point) -> f64 {
        let y1 = y.get(0);
        let yn = y.xn();
        match self {
            Self::SinExp => y1.sin() * yn.exp() + yn * yn,
            Self::Polynomial => {
                let extra = if y.dim() == 3 { y.get(1) } else { 0.0 };
                y1 * y1 * yn + yn.cos() + extra
            }
            Self::Rational => {
                let mut c = Point::origin(y.dim()).with(0, 0.3).with_xn(1.5);
                if y.dim() == 3 {
                    c = c.with(1, -0.2);
                }
                1.0 / (1.0 + (*y - c).norm_sq())
            }
        }
    }

    fn gradient(&self, y: &Point) -> Point {
        let y1 = y.get(0);
        let yn = y.xn();
        let n = y.dim();
        match self {
            Self::SinExp => Point::origin(n)
                .with(0, y1.cos() * yn.exp())
                .with_xn(y1.sin() * yn.exp() + 2.0 * yn),
            Self::Polynomial => {
                let mut g = Point::origin(n).with(0, 2.0 * y1 * yn);
                if n == 3 {
                    g = g.with(1, 1.0);
                }
                g.with_xn(y1 * y1 - yn.sin())
            }
            Self::Rational => {
                let mut c = Point::origin(n).with(0, 0.3).with_xn(1.5);
                if n == 3 {
                    c = c.with(1, -0.2);
                }
                let d = *y - c;
                let q = 1.0 + d.norm_sq();
                (-2.0 / (q * q)) * d
            }
        }
    }
}
