//! Dense Hermitian eigendecomposition and a small real linear solver,
//! written from scratch in the classic EISPACK organization: complex
//! Householder reduction to tridiagonal form, a diagonal phase similarity
//! that makes the subdiagonal real, implicit-shift QL iteration with full
//! eigenvector accumulation, and back-transformation of selected
//! eigenvectors through the stored reflectors.
//!
//! Eigenvectors are back-transformed lazily, one column at a time, so a
//! low-rank truncation of a large matrix never pays for the columns it
//! discards.

use crate::C64;

/// Errors from decompositions and linear solves.
#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix storage length {len} does not match dimension {n}x{n}")]
    DimensionMismatch { len: usize, n: usize },
    #[error(
        "matrix is not Hermitian: max |A - A^H| entry {max_asymmetry:.3e} exceeds {tolerance:.3e}"
    )]
    NotHermitian { max_asymmetry: f64, tolerance: f64 },
    #[error("QL iteration failed to converge for eigenvalue index {index}")]
    NoConvergence { index: usize },
    #[error("linear system is singular (pivot {pivot:.3e} in column {column})")]
    Singular { pivot: f64, column: usize },
}

/// Eigendecomposition of a dense Hermitian matrix.
///
/// `values` is sorted ascending.  The factored form (Householder
/// reflectors, subdiagonal phases, and the tridiagonal eigenvector matrix)
/// is retained so that [`HermitianEigen::eigenvector`] can materialize any
/// single eigenvector in O(n^2).
pub struct HermitianEigen {
    n: usize,
    /// Ascending eigenvalues.
    values: Vec<f64>,
    /// Worked matrix: column k holds the Householder vector v_k in rows
    /// k+1..n after the reduction.
    reflectors: Vec<C64>,
    /// Reflector scalings: H_k = I - betas[k] v_k v_k^H.
    betas: Vec<f64>,
    /// Diagonal phase similarity making the subdiagonal real.
    phases: Vec<C64>,
    /// Eigenvectors of the real tridiagonal problem, column-major.
    z: Vec<f64>,
    /// values[i] belongs to tridiagonal eigenvector column perm[i].
    perm: Vec<usize>,
}

impl HermitianEigen {
    /// Eigenvalues in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Materialize the eigenvector belonging to `values()[index]`.
    ///
    /// The vector is unit-norm up to roundoff; its overall phase is an
    /// artifact of the reduction but is deterministic for a given matrix.
    pub fn eigenvector(&self, index: usize) -> Vec<C64> {
        let n = self.n;
        let col = self.perm[index];
        // Undo the phase similarity, then the Householder reflectors in
        // reverse order of their construction.
        let mut y: Vec<C64> = (0..n)
            .map(|i| self.phases[i] * self.z[col * n + i])
            .collect();
        for k in (0..n.saturating_sub(1)).rev() {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let mut dot = C64::new(0.0, 0.0);
            for i in k + 1..n {
                dot += self.reflectors[i * n + k].conj() * y[i];
            }
            let s = beta * dot;
            for i in k + 1..n {
                y[i] -= s * self.reflectors[i * n + k];
            }
        }
        y
    }
}

/// Relative tolerance for the input Hermiticity check.
const HERMITICITY_RTOL: f64 = 1e-10;

/// Eigen-decompose a dense Hermitian matrix given as row-major entries of
/// length n*n.  The matrix is consumed (the reduction works in place).
pub fn eigh(mut a: Vec<C64>, n: usize) -> Result<HermitianEigen, LinalgError> {
    if a.len() != n * n {
        return Err(LinalgError::DimensionMismatch { len: a.len(), n });
    }
    if n == 0 {
        return Ok(HermitianEigen {
            n,
            values: vec![],
            reflectors: vec![],
            betas: vec![],
            phases: vec![],
            z: vec![],
            perm: vec![],
        });
    }

    // Reject non-Hermitian input up front: every consumer relies on real
    // eigenvalues and a unitary eigenbasis.
    let mut scale = 0.0f64;
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            let x = a[i * n + j];
            let y = a[j * n + i];
            scale = scale.max(x.norm());
            asym = asym.max((x - y.conj()).norm());
        }
    }
    let tol = HERMITICITY_RTOL * scale.max(f64::MIN_POSITIVE);
    if asym > tol {
        return Err(LinalgError::NotHermitian {
            max_asymmetry: asym,
            tolerance: tol,
        });
    }

    // --- Householder reduction to tridiagonal form -----------------------
    // After step k the trailing block is the reduced matrix, column k below
    // the subdiagonal stores v_k, and e[k] holds the (complex) subdiagonal.
    let mut e = vec![C64::new(0.0, 0.0); n];
    let mut betas = vec![0.0f64; n];
    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        if m == 1 {
            // A single trailing element needs no reflector; the phase
            // similarity below absorbs its argument.
            e[k] = a[(k + 1) * n + k];
            continue;
        }
        let mut nx2 = 0.0f64;
        for i in k + 1..n {
            nx2 += a[i * n + k].norm_sqr();
        }
        if nx2 == 0.0 {
            continue; // column already reduced
        }
        let nx = nx2.sqrt();
        let x0 = a[(k + 1) * n + k];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        // alpha = -phase(x0) * |x| avoids cancellation in v_0 = x_0 - alpha.
        let alpha = -phase * nx;
        e[k] = alpha;
        a[(k + 1) * n + k] = x0 - alpha;
        let v: Vec<C64> = (0..m).map(|i| a[(k + 1 + i) * n + k]).collect();
        let vn2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vn2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vn2;
        betas[k] = beta;

        // Rank-2 Hermitian update of the trailing block:
        //   p = beta B v,  K = beta (v^H p)/2,  w = p - K v,
        //   B <- B - v w^H - w v^H.
        // Full storage is maintained (both triangles), keeping every inner
        // loop contiguous; the update formula preserves Hermiticity to the
        // last bit.
        let mut p = vec![C64::new(0.0, 0.0); m];
        for i in 0..m {
            let row = &a[(k + 1 + i) * n + (k + 1)..(k + 1 + i) * n + n];
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..m {
                acc += row[j] * v[j];
            }
            p[i] = beta * acc;
        }
        let vhp: f64 = (0..m).map(|i| (v[i].conj() * p[i]).re).sum();
        let kcoef = 0.5 * beta * vhp;
        let w: Vec<C64> = (0..m).map(|i| p[i] - kcoef * v[i]).collect();
        for i in 0..m {
            let vi = a[(k + 1 + i) * n + k];
            let wi = w[i];
            let row = &mut a[(k + 1 + i) * n + (k + 1)..(k + 1 + i) * n + n];
            for j in 0..m {
                row[j] -= vi * w[j].conj() + wi * v[j].conj();
            }
        }
    }

    // --- Phase similarity: complex tridiagonal -> real symmetric ---------
    let mut phases = vec![C64::new(1.0, 0.0); n];
    let mut d = vec![0.0f64; n];
    let mut er = vec![0.0f64; n];
    for i in 0..n {
        d[i] = a[i * n + i].re;
    }
    for k in 0..n.saturating_sub(1) {
        let mag = e[k].norm();
        er[k] = mag;
        phases[k + 1] = if mag > 0.0 {
            phases[k] * (e[k] / mag)
        } else {
            phases[k]
        };
    }

    // --- QL iteration with eigenvector accumulation ----------------------
    let mut z = vec![0.0f64; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(&mut d, &mut er, &mut z, n)?;

    // Ascending eigenvalue order, deterministic tie-break by column index.
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("NaN eigenvalue").then(i.cmp(&j)));
    let values: Vec<f64> = perm.iter().map(|&i| d[i]).collect();

    Ok(HermitianEigen {
        n,
        values,
        reflectors: a,
        betas,
        phases,
        z,
        perm,
    })
}

/// Implicit-shift QL iteration on a real symmetric tridiagonal matrix with
/// eigenvector accumulation (EISPACK tql2 lineage).  `d` holds the diagonal
/// and is replaced by the (unordered) eigenvalues; `e[i]` is the subdiagonal
/// coupling i and i+1 (`e[n-1]` is scratch); `z` is column-major n x n,
/// initialized by the caller, and accumulates the rotations.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<(), LinalgError> {
    if n <= 1 {
        return Ok(());
    }
    // Running matrix-scale bound for the negligibility test.  The purely
    // local criterion |e[m]| <= eps (|d[m]| + |d[m+1]|) never triggers when
    // a graded spectrum pushes neighbouring d's to the roundoff floor (a
    // smooth-kernel Gram matrix does exactly that), so subdiagonals are
    // also deflated once they are negligible against the largest scale
    // seen so far — the EISPACK safeguard.
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut iter = 0usize;
        loop {
            // Find the first negligible subdiagonal at or after l.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd.max(tst1) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LinalgError::NoConvergence { index: l });
            }
            // Wilkinson-style shift from the 2x2 block at l.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Recover from underflow by deflating and restarting.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // Apply the rotation to eigenvector columns i and i+1.
                let (lo, hi) = z.split_at_mut((i + 1) * n);
                let ca = &mut lo[i * n..];
                let cb = &mut hi[..n];
                for k in 0..n {
                    f = cb[k];
                    cb[k] = s * ca[k] + c * f;
                    ca[k] = c * ca[k] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Solve a dense real linear system A x = b by Gaussian elimination with
/// partial pivoting.  A is row-major n x n and is consumed.
pub fn solve_real(mut a: Vec<f64>, n: usize, mut b: Vec<f64>) -> Result<Vec<f64>, LinalgError> {
    if a.len() != n * n || b.len() != n {
        return Err(LinalgError::DimensionMismatch { len: a.len(), n });
    }
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let mag = a[row * n + col].abs();
            if mag > best {
                best = mag;
                piv = row;
            }
        }
        if best == 0.0 {
            return Err(LinalgError::Singular {
                pivot: best,
                column: col,
            });
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let inv = 1.0 / a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in col + 1..n {
            acc -= a[col * n + j] * x[j];
        }
        x[col] = acc / a[col * n + col];
    }
    Ok(x)
}
