//! Ohmic bath discretization and the bath two-point correlation function.
//!
//! The continuous ohmic spectral density with exponential cutoff is sampled
//! into a finite set of modes whose frequencies equidistribute the spectral
//! weight; the resulting two-point correlation function is tabulated on the
//! shared propagation time grid as a Hermitian Toeplitz matrix and
//! compressed by a truncated eigendecomposition.

use crate::linalg::{self, LinalgError};
use crate::util::coth;
use crate::C64;

/// Physical parameters of the discretized ohmic bath.
#[derive(Debug, Clone, PartialEq)]
pub struct BathParameters {
    /// Number of explicit bath modes (L).
    pub modes: usize,
    /// Frequency cutoff: the highest sampled mode frequency.
    pub omega_max: f64,
    /// Exponential decay scale of the spectral density.
    pub omega_c: f64,
    /// Inverse temperature.
    pub beta: f64,
    /// Dimensionless system-bath coupling strength (0 switches the bath off).
    pub coupling: f64,
    /// Semiclassical scale; enters both the mode couplings and the thermal
    /// occupation argument.
    pub epsilon: f64,
}

/// Errors from bath construction and compression.
#[derive(Debug, thiserror::Error)]
pub enum BathError {
    #[error("invalid bath parameter {name} = {value}: {requirement}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("eigendecomposition failed: {0}")]
    Decomposition(#[from] LinalgError),
    #[error(
        "eigenpair {index} failed the residual check: ||Av - lambda v|| = {residual:.3e} > {bound:.3e}"
    )]
    ResidualCheck {
        index: usize,
        residual: f64,
        bound: f64,
    },
}

/// Discrete spectral modes: frequencies, couplings, and the scales needed
/// to evaluate the correlation function.
#[derive(Debug, Clone)]
pub struct SpectralModes {
    pub omegas: Vec<f64>,
    pub couplings: Vec<f64>,
    pub epsilon: f64,
    pub beta: f64,
}

/// Sample the ohmic spectral density into `params.modes` explicit modes.
///
/// Frequencies follow the inverse of the cumulative spectral measure,
/// ```text
///   omega_l = -omega_c ln(1 - (l/L)(1 - exp(-omega_max/omega_c))),
/// ```
/// so that the highest mode lands exactly on the cutoff, and couplings
/// carry equal spectral weight per mode:
/// ```text
///   c_l = epsilon * omega_l * sqrt(xi * omega_c/L * (1 - exp(-omega_max/omega_c))).
/// ```
pub fn ohmic_modes(params: &BathParameters) -> Result<SpectralModes, BathError> {
    let check = |name: &'static str, value: f64, ok: bool, requirement: &'static str| {
        if ok {
            Ok(())
        } else {
            Err(BathError::InvalidParameter {
                name,
                value,
                requirement,
            })
        }
    };
    check("modes", params.modes as f64, params.modes >= 1, "must be >= 1")?;
    check(
        "omega_max",
        params.omega_max,
        params.omega_max > 0.0 && params.omega_max.is_finite(),
        "must be positive and finite",
    )?;
    check(
        "omega_c",
        params.omega_c,
        params.omega_c > 0.0 && params.omega_c.is_finite(),
        "must be positive and finite",
    )?;
    check(
        "beta",
        params.beta,
        params.beta > 0.0 && params.beta.is_finite(),
        "must be positive and finite",
    )?;
    check(
        "coupling",
        params.coupling,
        params.coupling >= 0.0 && params.coupling.is_finite(),
        "must be non-negative and finite",
    )?;
    check(
        "epsilon",
        params.epsilon,
        params.epsilon > 0.0 && params.epsilon.is_finite(),
        "must be positive and finite",
    )?;

    let l_total = params.modes as f64;
    let depth = 1.0 - (-params.omega_max / params.omega_c).exp();
    let coupling_scale = (params.coupling * params.omega_c / l_total * depth).sqrt();
    let mut omegas = Vec::with_capacity(params.modes);
    let mut couplings = Vec::with_capacity(params.modes);
    for l in 1..=params.modes {
        let fraction = l as f64 / l_total;
        let omega = if l == params.modes {
            // analytically exact; avoids the last ulp of log/exp roundtrip
            params.omega_max
        } else {
            -params.omega_c * (1.0 - fraction * depth).ln()
        };
        omegas.push(omega);
        couplings.push(params.epsilon * omega * coupling_scale);
    }
    Ok(SpectralModes {
        omegas,
        couplings,
        epsilon: params.epsilon,
        beta: params.beta,
    })
}

/// The quadratic potential shift induced by completing the square against
/// the bath: sum_l c_l^2 / (2 omega_l^2).  Equals
/// epsilon^2 xi omega_c (1 - exp(-omega_max/omega_c)) / 2 in closed form.
pub fn quadratic_shift(modes: &SpectralModes) -> f64 {
    modes
        .omegas
        .iter()
        .zip(&modes.couplings)
        .map(|(w, c)| c * c / (2.0 * w * w))
        .sum()
}

impl SpectralModes {
    /// The stationary two-point correlation function at time separation
    /// `delta_tau`:
    /// ```text
    ///   B(dt) = 1/2 sum_l c_l^2/(eps omega_l)
    ///           * (coth(beta eps omega_l / 2) cos(omega_l dt) - i sin(omega_l dt)).
    /// ```
    /// Hermitian in its argument: B(-dt) = conj(B(dt)).
    pub fn correlation(&self, delta_tau: f64) -> C64 {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (w, c) in self.omegas.iter().zip(&self.couplings) {
            let weight = 0.5 * c * c / (self.epsilon * w);
            let thermal = coth(0.5 * self.beta * self.epsilon * w);
            let (sin, cos) = (w * delta_tau).sin_cos();
            re += weight * thermal * cos;
            im -= weight * sin;
        }
        C64::new(re, im)
    }
}

/// The correlation function tabulated on the uniform time grid
/// t_i = i dt, i = 0..=n_steps, as a Hermitian Toeplitz matrix with
/// entries M[j][k] = B((k - j) dt).  Only the first row of lags is stored.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    n_steps: usize,
    dt: f64,
    lags: Vec<C64>,
}

/// Tabulate the correlation matrix for `n_steps` propagation steps of
/// size `dt` (matrix dimension n_steps + 1).
pub fn correlation_matrix(modes: &SpectralModes, n_steps: usize, dt: f64) -> CorrelationMatrix {
    let lags = (0..=n_steps)
        .map(|l| modes.correlation(l as f64 * dt))
        .collect();
    CorrelationMatrix { n_steps, dt, lags }
}

impl CorrelationMatrix {
    /// Matrix dimension (number of time nodes).
    pub fn dim(&self) -> usize {
        self.n_steps + 1
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Correlation values at non-negative lags: `lags()[l]` = B(l dt).
    pub fn lags(&self) -> &[C64] {
        &self.lags
    }

    /// Matrix entry M[j][k] = B((k - j) dt); Hermiticity and Toeplitz
    /// structure hold by construction.
    pub fn entry(&self, j: usize, k: usize) -> C64 {
        if k >= j {
            self.lags[k - j]
        } else {
            self.lags[j - k].conj()
        }
    }

    /// Materialize the dense row-major matrix.
    pub fn dense(&self) -> Vec<C64> {
        let n = self.dim();
        let mut a = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for k in 0..n {
                a[j * n + k] = self.entry(j, k);
            }
        }
        a
    }

    /// Frobenius norm, evaluated exactly from the lag profile.
    pub fn frobenius_norm(&self) -> f64 {
        let n = self.dim();
        let mut acc = n as f64 * self.lags[0].norm_sqr();
        for l in 1..n {
            acc += 2.0 * (n - l) as f64 * self.lags[l].norm_sqr();
        }
        acc.sqrt()
    }
}

/// Truncated eigendecomposition of the correlation matrix, retaining the
/// `rank` eigenpairs of largest |eigenvalue|.
#[derive(Debug, Clone)]
pub struct LowRankKernel {
    /// Number of retained eigenpairs.
    pub rank: usize,
    /// Retained eigenvalues, sorted by descending |lambda|.
    pub lambdas: Vec<f64>,
    /// Retained eigenvectors; `vectors[m][i]` belongs to time node i.
    pub vectors: Vec<Vec<C64>>,
    /// Exact Frobenius norm of the discarded part:
    /// sqrt(sum of discarded lambda^2).
    pub frobenius_error: f64,
    /// Frobenius norm of the full matrix (for relative error reporting).
    pub matrix_frobenius: f64,
    /// All eigenvalues of the matrix, sorted by descending |lambda|.
    pub spectrum: Vec<f64>,
    pub n_steps: usize,
    pub dt: f64,
}

/// Relative residual bound for retained eigenpairs:
/// ||A v - lambda v|| <= RESIDUAL_RTOL * ||A||_F must hold for each.
pub const RESIDUAL_RTOL: f64 = 1e-10;

/// Eigen-decompose the correlation matrix and keep the `rank` dominant
/// eigenpairs by |lambda| (ties broken deterministically by ascending
/// eigenvalue index).  Every retained pair is verified against the
/// residual bound [`RESIDUAL_RTOL`].
pub fn low_rank_decompose(
    matrix: &CorrelationMatrix,
    rank: usize,
) -> Result<LowRankKernel, BathError> {
    let n = matrix.dim();
    if rank == 0 || rank > n {
        return Err(BathError::RankOutOfRange { rank, max: n });
    }
    let dense = matrix.dense();
    let eig = linalg::eigh(dense.clone(), n)?;

    // order eigen-indices by descending magnitude, deterministic tie-break
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.values()[j]
            .abs()
            .partial_cmp(&eig.values()[i].abs())
            .expect("NaN eigenvalue")
            .then(i.cmp(&j))
    });

    let matrix_frobenius = matrix.frobenius_norm();
    let bound = RESIDUAL_RTOL * matrix_frobenius;
    let mut lambdas = Vec::with_capacity(rank);
    let mut vectors = Vec::with_capacity(rank);
    for (m, &idx) in order.iter().take(rank).enumerate() {
        let lambda = eig.values()[idx];
        let v = eig.eigenvector(idx);
        // residual check: the eigensolver must have actually converged
        let mut residual2 = 0.0f64;
        for r in 0..n {
            let mut av = C64::new(0.0, 0.0);
            for c in 0..n {
                av += dense[r * n + c] * v[c];
            }
            residual2 += (av - lambda * v[r]).norm_sqr();
        }
        let residual = residual2.sqrt();
        if residual > bound {
            return Err(BathError::ResidualCheck {
                index: m,
                residual,
                bound,
            });
        }
        lambdas.push(lambda);
        vectors.push(v);
    }
    let frobenius_error = order
        .iter()
        .skip(rank)
        .map(|&idx| eig.values()[idx] * eig.values()[idx])
        .sum::<f64>()
        .sqrt();
    let spectrum = order.iter().map(|&idx| eig.values()[idx]).collect();

    Ok(LowRankKernel {
        rank,
        lambdas,
        vectors,
        frobenius_error,
        matrix_frobenius,
        spectrum,
        n_steps: matrix.n_steps,
        dt: matrix.dt,
    })
}

impl LowRankKernel {
    /// Entry (j, k) of the reconstructed matrix sum_m lambda_m v_m v_m^H.
    pub fn reconstruct_entry(&self, j: usize, k: usize) -> C64 {
        self.lambdas
            .iter()
            .zip(&self.vectors)
            .map(|(l, v)| *l * v[j] * v[k].conj())
            .sum()
    }

    /// Directly measured Frobenius distance between the reconstruction and
    /// the exact matrix; agrees with `frobenius_error` up to roundoff
    /// (Eckart-Young for the Hermitian eigendecomposition).
    pub fn reconstruction_error(&self, matrix: &CorrelationMatrix) -> f64 {
        let n = matrix.dim();
        let mut acc = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                acc += (self.reconstruct_entry(j, k) - matrix.entry(j, k)).norm_sqr();
            }
        }
        acc.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_scale_params() -> BathParameters {
        BathParameters {
            modes: 400,
            omega_max: 10.0,
            omega_c: 2.5,
            beta: 5.0,
            coupling: 1.6,
            epsilon: 1.0 / 64.0,
        }
    }

    fn small_params() -> BathParameters {
        BathParameters {
            modes: 40,
            omega_max: 10.0,
            omega_c: 2.5,
            beta: 5.0,
            coupling: 1.6,
            epsilon: 1.0 / 16.0,
        }
    }

    #[test]
    fn top_mode_lands_on_cutoff() {
        let modes = ohmic_modes(&paper_scale_params()).unwrap();
        let last = *modes.omegas.last().unwrap();
        assert!(
            (last - 10.0).abs() <= 1e-12 * 10.0,
            "omega_L = {last} != omega_max"
        );
    }

    #[test]
    fn frequencies_strictly_increasing_and_positive() {
        let modes = ohmic_modes(&paper_scale_params()).unwrap();
        assert!(modes.omegas[0] > 0.0);
        for w in modes.omegas.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn quadratic_shift_closed_form() {
        let params = paper_scale_params();
        let modes = ohmic_modes(&params).unwrap();
        let direct = quadratic_shift(&modes);
        let depth = 1.0 - (-params.omega_max / params.omega_c).exp();
        let closed = params.epsilon * params.epsilon * params.coupling * params.omega_c * depth
            / 2.0;
        assert!(
            (direct - closed).abs() < 1e-14 * closed,
            "direct {direct} vs closed {closed}"
        );
    }

    #[test]
    fn zero_coupling_kills_correlation() {
        let mut params = paper_scale_params();
        params.coupling = 0.0;
        let modes = ohmic_modes(&params).unwrap();
        assert!(modes.couplings.iter().all(|c| *c == 0.0));
        let b = modes.correlation(0.37);
        assert_eq!(b, C64::new(0.0, 0.0));
    }

    #[test]
    fn correlation_at_zero_lag() {
        // classical limit of the zero-lag value is xi omega_c (1 - e^-4)/beta
        let params = paper_scale_params();
        let modes = ohmic_modes(&params).unwrap();
        let b0 = modes.correlation(0.0);
        assert_eq!(b0.im, 0.0, "zero-lag correlation must be purely real");
        let classical =
            params.coupling * params.omega_c * (1.0 - (-4.0f64).exp()) / params.beta;
        assert!(b0.re > classical, "quantum value exceeds classical limit");
        assert!(
            (b0.re - classical).abs() < 0.05 * classical,
            "b0 = {} vs classical {classical}",
            b0.re
        );
    }

    #[test]
    fn correlation_is_hermitian_in_time() {
        let modes = ohmic_modes(&small_params()).unwrap();
        for &tau in &[0.1, 0.55, 2.3] {
            let plus = modes.correlation(tau);
            let minus = modes.correlation(-tau);
            assert!((plus - minus.conj()).norm() < 1e-15 * plus.norm().max(1.0));
        }
    }

    #[test]
    fn matrix_structure() {
        let modes = ohmic_modes(&small_params()).unwrap();
        let m = correlation_matrix(&modes, 12, 0.05);
        assert_eq!(m.dim(), 13);
        for j in 0..m.dim() {
            // real diagonal
            assert_eq!(m.entry(j, j).im, 0.0);
            for k in 0..m.dim() {
                // Hermitian
                assert_eq!(m.entry(j, k), m.entry(k, j).conj());
                // Toeplitz: matches the directly evaluated correlation
                let direct = modes.correlation((k as f64 - j as f64) * 0.05);
                assert!((m.entry(j, k) - direct).norm() < 1e-14 * direct.norm().max(1.0));
            }
        }
        // Frobenius norm from lags vs dense
        let dense = m.dense();
        let direct: f64 = dense.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!((m.frobenius_norm() - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn eigenvalues_nonnegative_up_to_roundoff() {
        // the thermal correlation matrix is positive semidefinite
        let modes = ohmic_modes(&small_params()).unwrap();
        let m = correlation_matrix(&modes, 60, 0.05);
        let kernel = low_rank_decompose(&m, m.dim()).unwrap();
        let top = kernel.spectrum[0];
        assert!(top > 0.0);
        for l in &kernel.spectrum {
            assert!(*l > -1e-10 * top, "negative eigenvalue {l} (top {top})");
        }
    }

    #[test]
    fn full_rank_reconstructs() {
        let modes = ohmic_modes(&small_params()).unwrap();
        let m = correlation_matrix(&modes, 40, 0.05);
        let kernel = low_rank_decompose(&m, m.dim()).unwrap();
        assert_eq!(kernel.frobenius_error, 0.0);
        let direct = kernel.reconstruction_error(&m);
        assert!(
            direct <= 1e-10 * kernel.matrix_frobenius,
            "full-rank reconstruction error {direct:.3e}"
        );
    }

    #[test]
    fn truncation_error_matches_discarded_spectrum() {
        let modes = ohmic_modes(&small_params()).unwrap();
        let m = correlation_matrix(&modes, 50, 0.05);
        let mut previous = f64::INFINITY;
        for rank in [1, 2, 5, 10, 25, 51] {
            let kernel = low_rank_decompose(&m, rank).unwrap();
            // descending magnitude ordering of retained eigenvalues
            for w in kernel.lambdas.windows(2) {
                assert!(w[0].abs() >= w[1].abs());
            }
            let direct = kernel.reconstruction_error(&m);
            assert!(
                (direct - kernel.frobenius_error).abs() <= 1e-10 * kernel.matrix_frobenius,
                "rank {rank}: direct {direct:.3e} vs spectral {:.3e}",
                kernel.frobenius_error
            );
            // monotone improvement with rank
            assert!(
                kernel.frobenius_error <= previous + 1e-14 * kernel.matrix_frobenius,
                "error not monotone at rank {rank}"
            );
            previous = kernel.frobenius_error;
        }
    }

    #[test]
    fn retained_vectors_orthonormal() {
        let modes = ohmic_modes(&small_params()).unwrap();
        let m = correlation_matrix(&modes, 30, 0.05);
        let kernel = low_rank_decompose(&m, 6).unwrap();
        for a in 0..kernel.rank {
            for b in 0..=a {
                let dot: C64 = (0..m.dim())
                    .map(|i| kernel.vectors[a][i].conj() * kernel.vectors[b][i])
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn parameter_validation() {
        let mut p = small_params();
        p.modes = 0;
        assert!(matches!(
            ohmic_modes(&p),
            Err(BathError::InvalidParameter { name: "modes", .. })
        ));
        let mut p = small_params();
        p.beta = -1.0;
        assert!(matches!(
            ohmic_modes(&p),
            Err(BathError::InvalidParameter { name: "beta", .. })
        ));
        let mut p = small_params();
        p.coupling = f64::NAN;
        assert!(ohmic_modes(&p).is_err());
    }

    #[test]
    fn rank_bounds() {
        let modes = ohmic_modes(&small_params()).unwrap();
        let m = correlation_matrix(&modes, 10, 0.05);
        assert!(matches!(
            low_rank_decompose(&m, 0),
            Err(BathError::RankOutOfRange { .. })
        ));
        assert!(matches!(
            low_rank_decompose(&m, 12),
            Err(BathError::RankOutOfRange { .. })
        ));
    }
}
