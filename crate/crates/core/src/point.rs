use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `R^n` for `n ∈ {2, 3}`; the last coordinate is the normal one.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: [f64; 3],
    dim: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if !(2..=3).contains(&coords.len()) {
            return Err(Error::Validation(format!(
                "dimension must be 2 or 3, got {}",
                coords.len()
            )));
        }
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            coords: c,
            dim: coords.len(),
        })
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Self {
            coords: [x, y, 0.0],
            dim: 2,
        }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Self {
            coords: [x, y, z],
            dim: 3,
        }
    }

    /// Point with tangential part `tangential` and normal coordinate `xn`.
    pub fn from_parts(tangential: &[f64], xn: f64) -> Result<Self> {
        let mut c = tangential.to_vec();
        c.push(xn);
        Self::new(&c)
    }

    /// Origin of `R^n`.
    pub fn origin(dim: usize) -> Self {
        debug_assert!((2..=3).contains(&dim));
        Self {
            coords: [0.0; 3],
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn get(&self, i: usize) -> f64 {
        debug_assert!(i < self.dim);
        self.coords[i]
    }

    /// Normal coordinate `x_n`.
    pub fn xn(&self) -> f64 {
        self.coords[self.dim - 1]
    }

    /// The tangential part `x'`.
    pub fn tangential(&self) -> &[f64] {
        &self.coords[..self.dim - 1]
    }

    pub fn with(&self, i: usize, value: f64) -> Self {
        let mut p = *self;
        p.coords[i] = value;
        p
    }

    pub fn shifted(&self, i: usize, delta: f64) -> Self {
        let mut p = *self;
        p.coords[i] += delta;
        p
    }

    pub fn with_xn(&self, xn: f64) -> Self {
        self.with(self.dim - 1, xn)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coords().iter().zip(other.coords()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Squared norm of the tangential part.
    pub fn tangential_norm_sq(&self) -> f64 {
        self.tangential().iter().map(|v| v * v).sum()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|v| v.is_finite())
    }
}

impl Add for Point {
    type Output = Point;
    fn add(mut self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..3 {
            self.coords[i] += rhs.coords[i];
        }
        self
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(mut self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..3 {
            self.coords[i] -= rhs.coords[i];
        }
        self
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, mut rhs: Point) -> Point {
        for c in rhs.coords.iter_mut() {
            *c *= self;
        }
        rhs
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(&v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.coords().to_vec()
    }
}
