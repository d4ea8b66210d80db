//! Richardson extrapolation of a sequence `F(h), F(h/2), F(h/4), ...` to `h → 0`.

/// Extrapolate samples taken at `h, h/2, h/4, ...` assuming
/// `F(h) = F₀ + c₁ h^{p₁} + c₂ h^{p₂} + ...` with `exponents = [p₁, p₂, ...]`.
///
/// Uses as many elimination steps as there are samples minus one (extra
/// exponents are ignored). Returns the extrapolated value and the difference
/// between the last two tableau diagonals as an error estimate.
pub fn richardson(samples: &[f64], exponents: &[f64]) -> (f64, f64) {
    assert!(!samples.is_empty(), "need at least one sample");
    let mut row: Vec<f64> = samples.to_vec();
    let mut previous_best = row[0];
    let steps = (samples.len() - 1).min(exponents.len());
    for p in exponents.iter().take(steps) {
        previous_best = *row.last().expect("non-empty");
        let factor = 2f64.powf(*p);
        row = row
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
    }
    let best = *row.last().expect("non-empty");
    let error = if steps == 0 { f64::INFINITY } else { (best - previous_best).abs() };
    (best, error)
}

/// True when successive differences of `samples` shrink monotonically,
/// i.e. the sequence behaves like a converging expansion.
pub fn is_monotone_convergent(samples: &[f64]) -> bool {
    let diffs: Vec<f64> = samples.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    diffs.windows(2).all(|d| d[1] <= d[0] * (1.0 + 1e-12) + 1e-15)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn removes_known_powers() {
        let f = |h: f64| 3.0 + 2.0 * h.powf(1.5) - 0.7 * h * h;
        let s = [f(0.1), f(0.05), f(0.025)];
        let (v, _) = richardson(&s, &[1.5, 2.0]);
        assert!((v - 3.0).abs() < 1e-13, "{v}");
    }

    #[test]
    fn single_step() {
        let f = |h: f64| 1.0 + h;
        let (v, e) = richardson(&[f(0.2), f(0.1)], &[1.0]);
        assert!((v - 1.0).abs() < 1e-14);
        assert!(e > 0.0);
    }

    #[test]
    fn monotone_detection() {
        assert!(is_monotone_convergent(&[1.0, 0.5, 0.25]));
        assert!(!is_monotone_convergent(&[1.0, 0.9, 0.2]));
    }
}
