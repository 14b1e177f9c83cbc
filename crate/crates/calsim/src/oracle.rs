//! Brute-force reference computations used to validate the fast paths:
//! explicit Wick pairings, direct time-ordered simplex sums (deterministic
//! and Monte Carlo), and closed-form propagation of complex Gaussians in
//! quadratic potentials.  Everything here favors obviousness over speed and
//! is exercised by the test suite rather than production runs.

use crate::wavefunction::Gaussian1d;
use crate::C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest even order accepted by the pairing enumerators; 12 points
/// already produce 10395 pairings, far beyond what any test needs.
pub const MAX_WICK_POINTS: usize = 12;

/// All perfect pairings of {0, .., m-1}, each as a list of (low, high)
/// index pairs.  The count is (m-1)!! = 1, 3, 15, ... for m = 2, 4, 6, ...
///
/// Panics for odd m, m = 0, or m > [`MAX_WICK_POINTS`].
pub fn wick_pairings(m: usize) -> Vec<Vec<(usize, usize)>> {
    assert!(m > 0 && m % 2 == 0, "need a positive even point count");
    assert!(m <= MAX_WICK_POINTS, "pairing enumeration capped at {MAX_WICK_POINTS} points");
    let mut out = Vec::new();
    let mut unpaired: Vec<usize> = (0..m).collect();
    let mut current = Vec::with_capacity(m / 2);
    build_pairings(&mut unpaired, &mut current, &mut out);
    out
}

fn build_pairings(
    unpaired: &mut Vec<usize>,
    current: &mut Vec<(usize, usize)>,
    out: &mut Vec<Vec<(usize, usize)>>,
) {
    if unpaired.is_empty() {
        out.push(current.clone());
        return;
    }
    // always pair the smallest unpaired index: each pairing is built once
    let first = unpaired[0];
    for pos in 1..unpaired.len() {
        let partner = unpaired[pos];
        let mut rest: Vec<usize> = unpaired
            .iter()
            .copied()
            .filter(|&i| i != first && i != partner)
            .collect();
        current.push((first, partner));
        build_pairings(&mut rest, current, out);
        current.pop();
    }
}

/// Sum over all perfect pairings of products of pair kernels:
/// ```text
///   sum_{pairings} prod_{(a,b), a<b} kernel(times[a], times[b])
/// ```
/// computed by explicit enumeration.
pub fn wick_sum(times: &[f64], kernel: &dyn Fn(f64, f64) -> C64) -> C64 {
    let pairings = wick_pairings(times.len());
    let mut total = C64::new(0.0, 0.0);
    for pairing in &pairings {
        let mut product = C64::new(1.0, 0.0);
        for &(a, b) in pairing {
            product *= kernel(times[a], times[b]);
        }
        total += product;
    }
    total
}

/// The same pairing sum through the first-point recursion
/// ```text
///   L(s) = sum_{k >= 1} kernel(s[0], s[k]) L(s \ {s[0], s[k]})
/// ```
/// which is how the moment identity is usually proved.
pub fn wick_sum_recursive(times: &[f64], kernel: &dyn Fn(f64, f64) -> C64) -> C64 {
    assert!(times.len() % 2 == 0, "need an even point count");
    if times.is_empty() {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for k in 1..times.len() {
        let rest: Vec<f64> = times
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != 0 && i != k)
            .map(|(_, &s)| s)
            .collect();
        total += kernel(times[0], times[k]) * wick_sum_recursive(&rest, kernel);
    }
    total
}

/// Direct evaluation of a symmetrized time-ordered sum on a shared grid:
/// ```text
///   sum_{i_1 <= ... <= i_n} (prod_r w_{i_r}) (1 / prod_j m_j!)
///                           sum_{sigma} prod_r factors[sigma(r)][i_r]
/// ```
/// where the m_j are the multiplicities of repeated indices in the tuple.
/// With those run factorials in place this equals the factorized product
/// `prod_r (sum_i w_i factors[r][i])` exactly (up to roundoff), which is
/// the discrete form of the simplex product identity.
pub fn brute_simplex_integral(factors: &[&[C64]], weights: &[f64]) -> C64 {
    let n = factors.len();
    assert!(n >= 1, "need at least one factor");
    assert!(n <= 4, "tuple enumeration capped at 4 factors");
    for f in factors {
        assert_eq!(f.len(), weights.len(), "factors must share the grid");
    }
    let perms = permutations(n);
    let mut tuple = vec![0usize; n];
    let mut total = C64::new(0.0, 0.0);
    sum_ordered_tuples(factors, weights, &perms, &mut tuple, 0, 0, &mut total);
    total
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    permute(&mut items, 0, &mut out);
    out
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

fn sum_ordered_tuples(
    factors: &[&[C64]],
    weights: &[f64],
    perms: &[Vec<usize>],
    tuple: &mut Vec<usize>,
    depth: usize,
    min_index: usize,
    total: &mut C64,
) {
    let n = factors.len();
    if depth == n {
        // weight product and run multiplicities of the weakly ordered tuple
        let mut w = 1.0;
        let mut runs = 1.0;
        let mut run_len = 1u32;
        for r in 0..n {
            w *= weights[tuple[r]];
            if r > 0 {
                if tuple[r] == tuple[r - 1] {
                    run_len += 1;
                } else {
                    run_len = 1;
                }
            }
            runs *= run_len as f64;
        }
        let mut sym = C64::new(0.0, 0.0);
        for perm in perms {
            let mut product = C64::new(1.0, 0.0);
            for r in 0..n {
                product *= factors[perm[r]][tuple[r]];
            }
            sym += product;
        }
        *total += (w / runs) * sym;
        return;
    }
    for i in min_index..weights.len() {
        tuple[depth] = i;
        sum_ordered_tuples(factors, weights, perms, tuple, depth + 1, i, total);
    }
}

/// Monte-Carlo estimate of a time-ordered simplex integral
/// ```text
///   int_{0 <= s_1 <= ... <= s_n <= t} prod_r factors[r](s_r) ds
/// ```
/// by sorting uniform samples of the cube [0, t]^n (simplex volume
/// t^n / n!).  Returns (estimate, standard error of the mean magnitude).
pub fn mc_simplex_integral(
    factors: &[&dyn Fn(f64) -> C64],
    t: f64,
    samples: usize,
    seed: u64,
) -> (C64, f64) {
    let n = factors.len();
    assert!(n >= 1 && samples >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = vec![0.0f64; n];
    let mut mean = C64::new(0.0, 0.0);
    let mut sum_sq = 0.0;
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        for slot in times.iter_mut() {
            *slot = rng.random::<f64>() * t;
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut product = C64::new(1.0, 0.0);
        for (r, f) in factors.iter().enumerate() {
            product *= f(times[r]);
        }
        mean += product;
        values.push(product);
    }
    mean /= samples as f64;
    for v in &values {
        sum_sq += (v - mean).norm_sqr();
    }
    let volume = t.powi(n as i32) / crate::util::factorial(n as u32);
    let stderr = (sum_sq / (samples as f64 - 1.0) / samples as f64).sqrt() * volume;
    (mean * volume, stderr)
}

/// Closed-form evolution of one complex Gaussian for time `t` in the
/// quadratic potential omega^2 x^2 / 2 (omega = 0 is free motion).
///
/// With C = cos(omega t), S = sin(omega t) the width parameter, scalar,
/// and classical center evolve as
/// ```text
///   A(t) = omega (A0 C - omega S) / (omega C + A0 S)
///   M    = (omega C + A0 S) / omega          (spreading factor)
///   x_c  = x0 C + (k0 / omega) S,  k_c = k0 C - omega x0 S
///   S_cl = (k0^2 - omega^2 x0^2) sin(2 omega t)/(4 omega)
///          - x0 k0 (1 - cos(2 omega t))/2
/// ```
/// and the evolved state is coefficient * M^{-1/2} exp(i S_cl / eps) with
/// the new width, center, and momentum.  The square-root branch is tracked
/// continuously from M(0) = 1 (M never vanishes for Im A0 > 0), so the
/// overall phase is the physical one at any t, not just mod pi.
pub fn evolve_quadratic(g: &Gaussian1d, omega: f64, eps: f64, t: f64) -> Gaussian1d {
    let (x0, k0, a0) = (g.center, g.momentum, g.width);
    let (a_t, m, x_c, k_c, s_cl);
    let mut m_arg = 0.0;
    if omega.abs() < 1e-12 {
        // free motion: M = 1 + A0 t stays in the closed upper half plane,
        // so the principal argument is already the continuous one
        a_t = a0 / (C64::new(1.0, 0.0) + a0 * t);
        m = C64::new(1.0, 0.0) + a0 * t;
        m_arg = m.arg();
        x_c = x0 + k0 * t;
        k_c = k0;
        s_cl = 0.5 * k0 * k0 * t;
    } else {
        let (s, c) = (omega * t).sin_cos();
        let denom = omega * c + a0 * s;
        a_t = omega * (a0 * c - omega * s) / denom;
        m = denom / omega;
        x_c = x0 * c + (k0 / omega) * s;
        k_c = k0 * c - omega * x0 * s;
        s_cl = (k0 * k0 - omega * omega * x0 * x0) * (2.0 * omega * t).sin() / (4.0 * omega)
            - x0 * k0 * (1.0 - (2.0 * omega * t).cos()) / 2.0;
        // accumulate arg M along the path in steps small enough that each
        // increment is far from the +-pi wrap
        let n_sub = ((omega * t).abs() / 0.5).ceil().max(1.0) as usize;
        let mut prev = C64::new(1.0, 0.0);
        for j in 1..=n_sub {
            let tj = t * j as f64 / n_sub as f64;
            let (sj, cj) = (omega * tj).sin_cos();
            let mj = (omega * cj + a0 * sj) / omega;
            m_arg += (mj / prev).arg();
            prev = mj;
        }
    }
    let m_inv_sqrt = C64::from_polar(m.norm().powf(-0.5), -0.5 * m_arg);
    Gaussian1d {
        coefficient: g.coefficient * m_inv_sqrt * (C64::new(0.0, 1.0) * s_cl / eps).exp(),
        center: x_c,
        momentum: k_c,
        width: a_t,
    }
}

/// Evaluate the quadratic-potential evolution of a Gaussian mixture at x.
pub fn quadratic_wavefunction(
    components: &[Gaussian1d],
    omega: f64,
    eps: f64,
    t: f64,
    x: f64,
) -> C64 {
    components
        .iter()
        .map(|g| evolve_quadratic(g, omega, eps, t).evaluate(eps, x))
        .sum()
}
