//! Adaptive Gauss–Kronrod quadrature, an infinite-interval map, and a periodic
//! trapezoidal rule.
//!
//! Every sum over subinterval contributions goes through [`pairwise_sum`] so
//! the result does not depend on the order in which intervals were refined.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [-1, 1] (non-negative half, descending). Odd indices
// are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_558,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Sum with a fixed binary-tree reduction order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
    pub evaluations: usize,
    /// False when the interval budget ran out before the tolerance was met.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest error first; ties broken by position for determinism.
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// One 21-point Kronrod panel. Returns (value, error estimate).
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    let mut resabs = WGK[10] * fc.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let hl = half.abs();
    let value = resk * half;
    resabs *= hl;
    resasc *= hl;
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err)
}

/// Globally adaptive Gauss–Kronrod integrator.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_segments: 2000,
        }
    }
}

impl Integrator {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_max_segments(mut self, max_segments: usize) -> Self {
        self.max_segments = max_segments;
        self
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<QuadResult> {
        self.integrate_with_breaks(f, &[a, b])
    }

    /// Integrate over consecutive panels `[breaks[i], breaks[i+1]]`, refining
    /// globally. Breakpoints should sit on known kinks or near-singularities.
    pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breaks: &[f64],
    ) -> Result<QuadResult> {
        if breaks.len() < 2 {
            return Err(Error::Quadrature("need at least two breakpoints".into()));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::Quadrature("non-finite integration bound".into()));
        }
        if breaks.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Quadrature("breakpoints must be non-decreasing".into()));
        }
        let mut heap = BinaryHeap::new();
        let mut evaluations = 0;
        for w in breaks.windows(2) {
            if w[1] == w[0] {
                continue;
            }
            let (value, error) = gk21(&f, w[0], w[1]);
            evaluations += 21;
            heap.push(Segment {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
        if heap.is_empty() {
            return Ok(QuadResult {
                value: 0.0,
                error: 0.0,
                evaluations,
                converged: true,
            });
        }

        let totals = |heap: &BinaryHeap<Segment>| {
            let mut segs: Vec<Segment> = heap.iter().copied().collect();
            segs.sort_by(|x, y| x.a.total_cmp(&y.a));
            let values: Vec<f64> = segs.iter().map(|s| s.value).collect();
            let errors: Vec<f64> = segs.iter().map(|s| s.error).collect();
            (pairwise_sum(&values), pairwise_sum(&errors))
        };

        let mut value: f64 = heap.iter().map(|s| s.value).sum();
        let mut error: f64 = heap.iter().map(|s| s.error).sum();
        loop {
            if !value.is_finite() {
                return Err(Error::Quadrature("integrand produced a non-finite value".into()));
            }
            let target = self.abs_tol.max(self.rel_tol * value.abs());
            if error <= target {
                let (v, e) = totals(&heap);
                return Ok(QuadResult {
                    value: v,
                    error: e,
                    evaluations,
                    converged: true,
                });
            }
            if heap.len() >= self.max_segments {
                let (v, e) = totals(&heap);
                return Ok(QuadResult {
                    value: v,
                    error: e,
                    evaluations,
                    converged: false,
                });
            }
            let worst = heap.pop().expect("heap is non-empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Interval is at machine resolution; keep it and stop refining.
                heap.push(Segment {
                    error: 0.0,
                    ..worst
                });
                let (v, e) = totals(&heap);
                return Ok(QuadResult {
                    value: v,
                    error: e + worst.error,
                    evaluations,
                    converged: worst.error <= target,
                });
            }
            let (v1, e1) = gk21(&f, worst.a, mid);
            let (v2, e2) = gk21(&f, mid, worst.b);
            evaluations += 42;
            value += v1 + v2 - worst.value;
            error += e1 + e2 - worst.error;
            heap.push(Segment {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Segment {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
            // Re-sum occasionally so running totals do not drift.
            if heap.len() % 64 == 0 {
                let (v, e) = totals(&heap);
                value = v;
                error = e;
            }
        }
    }

    /// Integrate `f` over `[a, ∞)` through the map `x = a + z/(1 - z)`,
    /// `z ∈ [0, 1)`, which sends the half line onto a bounded interval.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> Result<QuadResult> {
        self.integrate_to_infinity_with_breaks(f, a, &[])
    }

    /// As [`Integrator::integrate_to_infinity`], with extra breakpoints given
    /// in the original variable (each must exceed `a`).
    pub fn integrate_to_infinity_with_breaks<F: Fn(f64) -> f64>(
        &self,
        f: F,
        a: f64,
        breaks: &[f64],
    ) -> Result<QuadResult> {
        let mapped = |z: f64| {
            if z >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - z;
            let x = a + z / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let mut zs = vec![0.0];
        for &b in breaks {
            let t = b - a;
            if t > 0.0 && t.is_finite() {
                zs.push(t / (1.0 + t));
            }
        }
        zs.push(1.0);
        zs.sort_by(f64::total_cmp);
        zs.dedup();
        self.integrate_with_breaks(mapped, &zs)
    }
}

/// Trapezoidal rule for a `period`-periodic integrand on `[0, period)`,
/// doubling the node count until successive estimates agree to `tol`
/// (absolute or relative, whichever is looser). Converges geometrically for
/// analytic periodic integrands.
pub fn periodic_trapezoid<F: Fn(f64) -> f64>(f: F, period: f64, tol: f64) -> QuadResult {
    let mut m = 16usize;
    let mut samples: Vec<f64> = (0..m).map(|k| f(period * k as f64 / m as f64)).collect();
    let mut prev = period * pairwise_sum(&samples) / m as f64;
    let mut evaluations = m;
    loop {
        let mids: Vec<f64> = (0..m)
            .map(|k| f(period * (k as f64 + 0.5) / m as f64))
            .collect();
        evaluations += m;
        let mut merged = Vec::with_capacity(2 * m);
        for (s, t) in samples.iter().zip(&mids) {
            merged.push(*s);
            merged.push(*t);
        }
        samples = merged;
        m *= 2;
        let current = period * pairwise_sum(&samples) / m as f64;
        let diff = (current - prev).abs();
        let converged = diff <= tol.max(tol * current.abs());
        if converged || m >= 1 << 14 {
            return QuadResult {
                value: current,
                error: diff,
                evaluations,
                converged,
            };
        }
        prev = current;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kronrod_weights_sum_to_two() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_panel_is_exact_for_degree_31() {
        let (v, _) = gk21(&|x: f64| x.powi(30) + x.powi(31), -1.0, 1.0);
        assert!((v - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_integrals() {
        let q = Integrator::new(1e-13, 1e-13);
        let r = q.integrate(f64::sin, 0.0, PI).unwrap();
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-13);
        let r = q.integrate(|x| (-x * x).exp(), -8.0, 8.0).unwrap();
        assert!((r.value - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let q = Integrator::new(1e-11, 1e-11);
        let r = q.integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn half_line() {
        let q = Integrator::new(1e-12, 1e-12);
        let r = q.integrate_to_infinity(|x| 1.0 / (1.0 + x * x), 0.0).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-11, "{r:?}");
        let r = q
            .integrate_to_infinity_with_breaks(|x| (-x).exp(), 1.0, &[2.0, 5.0])
            .unwrap();
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn periodic_rule_is_spectral() {
        let r = periodic_trapezoid(|t| (t.cos()).exp(), 2.0 * PI, 1e-14);
        // 2π I_0(1)
        assert!((r.value - 2.0 * PI * 1.266_065_877_752_008_4).abs() < 1e-13);
        assert!(r.evaluations <= 64);
    }

    #[test]
    fn pairwise_matches_naive_for_small() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 4950.0);
    }

    #[test]
    fn rejects_bad_bounds() {
        let q = Integrator::default();
        assert!(q.integrate(|x| x, 0.0, f64::INFINITY).is_err());
        assert!(q.integrate_with_breaks(|x| x, &[1.0, 0.0]).is_err());
    }
}
