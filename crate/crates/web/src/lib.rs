//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a flat `Float64Array`; shapes are documented per
//! function. Invalid parameters raise a JavaScript exception.

use halfspace::extension::{
    fourier_oracle, fractional_laplacian, BoundaryFunction, FluxLimitOptions, FracOrder,
};
use halfspace::field::{HalfSpaceFunction, PowerFamily};
use halfspace::kernels::{eval_kernel, kernel_normalization, KernelSpec};
use halfspace::transform::{kelvin, MoebiusMap};
use halfspace::{Point, WeightExponent};
use wasm_bindgen::prelude::*;

fn js(e: halfspace::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Mass-one `P_a(x₁, x_n)` in `n = 2` at `count` points of `[-extent, extent]`.
#[wasm_bindgen]
pub fn kernel_profile(a: f64, xn: f64, extent: f64, count: usize) -> Result<Vec<f64>, JsError> {
    let spec = KernelSpec::poisson(a, 2).map_err(js)?;
    let mass = kernel_normalization(&spec).map_err(js)?;
    let step = if count > 1 { 2.0 * extent / (count - 1) as f64 } else { 0.0 };
    (0..count)
        .map(|i| {
            let x = -extent + step * i as f64;
            eval_kernel(&spec, &[x], xn).map(|v| v / mass).map_err(js)
        })
        .collect()
}

/// `(-Δ)^s` of `e^{-x²}` at each `x`, as `[limit₀, oracle₀, limit₁, oracle₁, ...]`.
#[wasm_bindgen]
pub fn fraclap_curve(s: f64, xs: Vec<f64>) -> Result<Vec<f64>, JsError> {
    let order = FracOrder::new(s).map_err(js)?;
    let f = BoundaryFunction::gaussian(1.0, &[0.0], 1.0).map_err(js)?;
    let opts = FluxLimitOptions::default();
    let mut out = Vec::with_capacity(2 * xs.len());
    for x in xs {
        out.push(fractional_laplacian(&f, order, &[x], &opts).map_err(js)?.value);
        out.push(fourier_oracle(&f, order, x).map_err(js)?);
    }
    Ok(out)
}

/// `w = u - u_{x,λ}` for `u = c·y_n^{1-a} + d` in `n = 2`, sampled on an
/// `nx × ny` lattice of `[-extent, extent] × (0, extent]`, row-major with the
/// height as the slow index. Points in the closed ball are `NaN`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn moving_sphere_slice(
    a: f64,
    c: f64,
    d: f64,
    center: f64,
    lambda: f64,
    extent: f64,
    nx: usize,
    ny: usize,
) -> Result<Vec<f64>, JsError> {
    let wa = WeightExponent::new(a).map_err(js)?;
    let map = MoebiusMap::at_boundary(&[center], lambda).map_err(js)?;
    let u = PowerFamily::new(c, 1.0 - a, d);
    let t = kelvin(u, map, wa);
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = extent * (j + 1) as f64 / ny as f64;
        for i in 0..nx {
            let x = -extent + 2.0 * extent * i as f64 / (nx.max(2) - 1) as f64;
            let p = Point::new2(x, y);
            if (p - map.center()).norm() <= lambda {
                out.push(f64::NAN);
            } else {
                out.push(u.value(&p) - t.eval(&p).map_err(js)?);
            }
        }
    }
    Ok(out)
}
