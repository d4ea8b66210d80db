//! Truncated vertex-centred grids on the half space and fields living on them.
//!
//! Nodes sit at `x_i = -L + i·h` along each tangential axis and at `x_n = k·h`
//! vertically, so the bottom row lies exactly on the boundary hyperplane.
//! Storage is row-major over `(x₁, [x₂,] x_n)` with `x_n` fastest.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::HalfSpaceFunction;
use crate::kernels::WeightExponent;
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceGrid {
    n: usize,
    half_width: f64,
    height: f64,
    tangential_nodes: usize,
    vertical_nodes: usize,
    h: f64,
}

/// Where a node sits relative to the boundary faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    /// `x_n = 0` with tangential index strictly inside.
    Bottom,
    /// Lateral or top truncation face (including the bottom corners).
    Truncation,
}

impl HalfSpaceGrid {
    /// Grid on `[-L, L]^{n-1} × [0, H]` with `tangential_nodes` per tangential
    /// axis; the vertical count follows from `H / h`, which must be integral.
    pub fn new(n: usize, half_width: f64, height: f64, tangential_nodes: usize) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::Validation(format!("n must be 2 or 3, got {n}")));
        }
        if !(half_width > 0.0 && height > 0.0) || !half_width.is_finite() || !height.is_finite() {
            return Err(Error::Validation("grid extents must be positive and finite".into()));
        }
        if tangential_nodes < 3 {
            return Err(Error::Validation(format!(
                "need at least 3 tangential nodes, got {tangential_nodes}"
            )));
        }
        let h = 2.0 * half_width / (tangential_nodes - 1) as f64;
        let steps = height / h;
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Validation(format!(
                "height {height} is not a multiple of the spacing {h}"
            )));
        }
        let vertical_nodes = rounded as usize + 1;
        if vertical_nodes < 3 {
            return Err(Error::Validation(format!(
                "need at least 3 vertical nodes, got {vertical_nodes}"
            )));
        }
        Ok(Self {
            n,
            half_width,
            height,
            tangential_nodes,
            vertical_nodes,
            h,
        })
    }

    /// Grid with `nodes` per axis on `[-L, L]^{n-1} × [0, 2L]`.
    pub fn cube(n: usize, half_width: f64, nodes: usize) -> Result<Self> {
        Self::new(n, half_width, 2.0 * half_width, nodes)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn tangential_nodes(&self) -> usize {
        self.tangential_nodes
    }

    pub fn vertical_nodes(&self) -> usize {
        self.vertical_nodes
    }

    /// Nodes per horizontal layer.
    pub fn layer_len(&self) -> usize {
        self.tangential_nodes.pow(self.n as u32 - 1)
    }

    pub fn len(&self) -> usize {
        self.layer_len() * self.vertical_nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index of tangential multi-index `t` (length `n-1`) and layer `k`.
    pub fn index(&self, t: &[usize], k: usize) -> usize {
        let mut lin = 0;
        for &ti in t {
            lin = lin * self.tangential_nodes + ti;
        }
        lin * self.vertical_nodes + k
    }

    /// Inverse of [`HalfSpaceGrid::index`]: `(tangential indices, k)`.
    pub fn unravel(&self, idx: usize) -> ([usize; 2], usize) {
        let k = idx % self.vertical_nodes;
        let mut lin = idx / self.vertical_nodes;
        let mut t = [0usize; 2];
        for d in (0..self.n - 1).rev() {
            t[d] = lin % self.tangential_nodes;
            lin /= self.tangential_nodes;
        }
        (t, k)
    }

    pub fn node(&self, idx: usize) -> Point {
        let (t, k) = self.unravel(idx);
        let mut c = [0.0; 3];
        for d in 0..self.n - 1 {
            c[d] = -self.half_width + t[d] as f64 * self.h;
        }
        c[self.n - 1] = k as f64 * self.h;
        Point::new(&c[..self.n]).expect("grid dimension is 2 or 3")
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        let (t, k) = self.unravel(idx);
        let lateral = t[..self.n - 1]
            .iter()
            .any(|&ti| ti == 0 || ti == self.tangential_nodes - 1);
        if lateral || k == self.vertical_nodes - 1 {
            NodeKind::Truncation
        } else if k == 0 {
            NodeKind::Bottom
        } else {
            NodeKind::Interior
        }
    }

    /// Neighbour along `axis` (tangential axes first, then the vertical one)
    /// in direction `dir = ±1`, if inside the grid.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: isize) -> Option<usize> {
        let (mut t, mut k) = self.unravel(idx);
        if axis == self.n - 1 {
            let nk = k as isize + dir;
            if nk < 0 || nk >= self.vertical_nodes as isize {
                return None;
            }
            k = nk as usize;
        } else {
            let nt = t[axis] as isize + dir;
            if nt < 0 || nt >= self.tangential_nodes as isize {
                return None;
            }
            t[axis] = nt as usize;
        }
        Some(self.index(&t[..self.n - 1], k))
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.n
            && p.tangential().iter().all(|v| v.abs() <= self.half_width + 1e-12)
            && p.xn() >= -1e-12
            && p.xn() <= self.height + 1e-12
    }

    /// Same extents, spacing halved.
    pub fn refined(&self) -> Result<Self> {
        Self::new(
            self.n,
            self.half_width,
            self.height,
            2 * (self.tangential_nodes - 1) + 1,
        )
    }
}

/// Node values of `u` paired with the weight exponent they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: HalfSpaceGrid,
    a: WeightExponent,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: HalfSpaceGrid, a: WeightExponent, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Validation(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, a, values })
    }

    pub fn zeros(grid: HalfSpaceGrid, a: WeightExponent) -> Self {
        Self {
            grid,
            a,
            values: vec![0.0; grid.len()],
        }
    }

    /// Sample `f` at every node.
    pub fn from_fn<F: HalfSpaceFunction>(grid: HalfSpaceGrid, a: WeightExponent, f: &F) -> Result<Self> {
        let values = crate::par::map_range(grid.len(), |i| f.value(&grid.node(i)));
        Self::new(grid, a, values)
    }

    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }

    pub fn exponent(&self) -> WeightExponent {
        self.a
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    /// `self - other`; both fields must share grid and exponent.
    pub fn difference(&self, other: &ScalarField) -> Result<ScalarField> {
        if self.a != other.a {
            return Err(Error::Validation(format!(
                "cannot combine fields with exponents {} and {}",
                self.a.value(),
                other.a.value()
            )));
        }
        if self.grid != other.grid {
            return Err(Error::Validation("cannot combine fields on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x - y).collect();
        Ok(ScalarField {
            grid: self.grid,
            a: self.a,
            values,
        })
    }

    /// Multilinear interpolation at a point inside the grid box.
    pub fn interpolate(&self, p: &Point) -> Result<f64> {
        let g = &self.grid;
        if !g.contains(p) {
            return Err(Error::Domain(format!("{p:?} lies outside the grid")));
        }
        let n = g.n;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for d in 0..n {
            let (origin, count) = if d == n - 1 {
                (0.0, g.vertical_nodes)
            } else {
                (-g.half_width, g.tangential_nodes)
            };
            let s = ((p.get(d) - origin) / g.h).clamp(0.0, (count - 1) as f64);
            let i = (s.floor() as usize).min(count - 2);
            base[d] = i;
            frac[d] = s - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut t = [0usize; 2];
            let mut k = 0;
            for d in 0..n {
                let bit = (corner >> d) & 1;
                w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
                if d == n - 1 {
                    k = base[d] + bit;
                } else {
                    t[d] = base[d] + bit;
                }
            }
            if w != 0.0 {
                acc += w * self.values[g.index(&t[..n - 1], k)];
            }
        }
        Ok(acc)
    }

    /// CSV with header `x1,...,xn,u` and one node per row in storage order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.grid.n;
        let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).chain(["u".into()]).collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.node(i);
            let mut line = String::new();
            for c in p.coords() {
                line.push_str(&format!("{c:?},"));
            }
            line.push_str(&format!("{v:?}"));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Read values written by [`ScalarField::write_csv`] for a known grid;
    /// lines starting with `#` are skipped.
    pub fn read_csv<R: BufRead>(grid: HalfSpaceGrid, a: WeightExponent, r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .filter(|l| !matches!(l, Ok(s) if s.starts_with('#')));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))??;
        let cols = grid.n + 1;
        if header.split(',').count() != cols {
            return Err(Error::Parse(format!("expected {cols} columns, header is {header:?}")));
        }
        let mut values = Vec::with_capacity(grid.len());
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols {
                return Err(Error::Parse(format!("row {row}: expected {cols} columns")));
            }
            let idx = values.len();
            if idx >= grid.len() {
                return Err(Error::Parse("more rows than grid nodes".into()));
            }
            let node = grid.node(idx);
            for (d, f) in fields[..grid.n].iter().enumerate() {
                let c: f64 = f
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
                if (c - node.get(d)).abs() > 1e-9 * (1.0 + c.abs()) {
                    return Err(Error::Parse(format!("row {row}: coordinates do not match grid")));
                }
            }
            let v: f64 = fields[grid.n]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            values.push(v);
        }
        Self::new(grid, a, values)
    }
}

/// Multilinear interpolant; NaN outside the grid.
impl HalfSpaceFunction for ScalarField {
    fn value(&self, y: &Point) -> f64 {
        self.interpolate(y).unwrap_or(f64::NAN)
    }
}
