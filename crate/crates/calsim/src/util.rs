//! Small shared numeric helpers: factorials and binomials, trapezoid
//! weights on a uniform time grid, hyperbolic-cotangent and complementary
//! error functions, and grid-norm utilities used by tests and diffs.

/// n! as an f64.  Exact through n = 20; above that the result is the
/// correctly rounded double (we never need more than a few tens).
pub fn factorial(n: u32) -> f64 {
    let mut acc = 1.0f64;
    for k in 2..=n as u64 {
        acc *= k as f64;
    }
    acc
}

/// Binomial coefficient C(n, k) as an exact u64.
///
/// Evaluated with the multiplicative formula, dividing at each step so the
/// intermediates stay integral; panics on overflow only far beyond the
/// multi-index counts this crate ever produces.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 1..=k {
        // acc * (n - k + i) is divisible by i at every step.
        acc = acc
            .checked_mul(n - k + i)
            .expect("binomial overflow: argument far out of supported range")
            / i;
    }
    acc
}

/// Composite trapezoid weights for the uniform grid t_i = i * dt,
/// i = 0..=n_steps: dt/2 at both endpoints, dt in the interior.
/// A zero-length interval (n_steps = 0) integrates to zero.
pub fn trapezoid_weights(n_steps: usize, dt: f64) -> Vec<f64> {
    if n_steps == 0 {
        return vec![0.0];
    }
    let mut w = vec![dt; n_steps + 1];
    w[0] = 0.5 * dt;
    w[n_steps] = 0.5 * dt;
    w
}

/// Hyperbolic cotangent with a large-argument clamp: for x > 30 the value
/// is returned as exactly 1.0 (coth(30) - 1 < 2e-26, below f64 resolution),
/// avoiding overflow in exp for extreme thermal arguments.
pub fn coth(x: f64) -> f64 {
    if x > 30.0 {
        1.0
    } else {
        1.0 / x.tanh()
    }
}

/// Complementary error function via the classic rational Chebyshev fit
/// (fractional error below 1.2e-7 everywhere).  Used only for mass-outside-
/// window warnings, where single precision is ample.
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// L2 norm of a grid function with uniform cell volume `cell`:
/// sqrt(cell * sum a_i^2).
pub fn l2_norm(a: &[f64], cell: f64) -> f64 {
    (cell * a.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// L2 norm of the difference of two grid functions on the same grid.
pub fn l2_diff(a: &[f64], b: &[f64], cell: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "grid size mismatch in l2_diff");
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    (cell * sum).sqrt()
}

/// Maximum absolute entry-wise difference of two grid functions.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "grid size mismatch in max_abs_diff");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials() {
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(1), 1.0);
        assert_eq!(factorial(5), 120.0);
        assert_eq!(factorial(10), 3_628_800.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(5, 7), 0);
        assert_eq!(binomial(12, 3), 220);
        // multi-index count C(r*D + n - 1, n) at r*D = 40, n = 5
        assert_eq!(binomial(44, 5), 1_086_008);
    }

    #[test]
    fn trapezoid_weight_sums() {
        let w = trapezoid_weights(4, 0.25);
        assert_eq!(w.len(), 5);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0], 0.125);
        assert_eq!(w[2], 0.25);
        assert_eq!(w[4], 0.125);
        assert_eq!(trapezoid_weights(0, 0.1), vec![0.0]);
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        // trapezoid rule is exact on degree-1 integrands
        let n = 17;
        let dt = 0.3;
        let w = trapezoid_weights(n, dt);
        let integral: f64 = (0..=n).map(|i| w[i] * (2.0 + 3.0 * (i as f64) * dt)).sum();
        let t = n as f64 * dt;
        let exact = 2.0 * t + 1.5 * t * t;
        assert!((integral - exact).abs() < 1e-12 * exact.abs());
    }

    #[test]
    fn coth_limits() {
        assert_eq!(coth(31.0), 1.0);
        // small-x behaviour: coth(x) ~ 1/x + x/3
        let x = 1e-4;
        assert!((coth(x) - (1.0 / x + x / 3.0)).abs() < 1e-8);
        // a mid-range spot value: coth(1) = (e^2+1)/(e^2-1)
        let e2 = (2.0f64).exp();
        assert!((coth(1.0) - (e2 + 1.0) / (e2 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn erfc_reference_points() {
        // reference values to well beyond the fit's 1.2e-7 tolerance
        let cases = [
            (0.0, 1.0),
            (0.5, 0.4795001221869535),
            (1.0, 0.15729920705028513),
            (2.0, 0.004677734981063127),
            (-1.0, 2.0 - 0.15729920705028513),
        ];
        for (x, want) in cases {
            assert!(
                (erfc(x) - want).abs() < 3e-7,
                "erfc({x}) = {} want {want}",
                erfc(x)
            );
        }
    }

    #[test]
    fn grid_norms() {
        let a = [1.0, 2.0, 2.0];
        let b = [1.0, 0.0, 0.0];
        assert!((l2_norm(&a, 0.5) - (0.5f64 * 9.0).sqrt()).abs() < 1e-15);
        assert!((l2_diff(&a, &b, 2.0) - 4.0).abs() < 1e-15);
        assert_eq!(max_abs_diff(&a, &b), 2.0);
    }
}
