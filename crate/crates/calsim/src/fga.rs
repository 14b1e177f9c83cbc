//! Frozen-Gaussian trajectory machinery: phase-space sampling grids, RK4
//! propagation of the classical variables together with the complex
//! variational block that feeds the evolving amplitude, and the per-axis
//! overlap / envelope factors from which each trajectory's wavepacket
//! contribution is assembled.
//!
//! Per trajectory the integrated state is
//! ```text
//!   P' = -grad V~(Q)        Q' = P        S' = |P|^2/2 - V~(Q)
//!   MQ' = MP                MP' = -MQ H(Q)
//!   a'  = (a/2) tr( Z^{-1} (MP - i MQ H(Q)) ),   Z = MQ + i MP
//! ```
//! with MQ(0) = I, MP(0) = -i I (so Z(0) = 2I) and a(0) = 2^{D/2}; H is the
//! Hessian of the effective potential.  The amplitude ODE is d/dt of
//! (det Z)^{1/2} in disguise: integrating it avoids tracking the square
//! root's branch.

use crate::potentials::EffectivePotential;
use crate::C64;

/// Trajectories entering |det Z| below this are aborted as singular.
pub const SINGULAR_Z_ABS: f64 = 1e-12;

/// Errors from grid construction and trajectory propagation.
#[derive(Debug, thiserror::Error)]
pub enum FgaError {
    #[error("invalid grid axis: {reason} (min {min}, max {max}, step {step})")]
    InvalidAxis {
        min: f64,
        max: f64,
        step: f64,
        reason: &'static str,
    },
    #[error("|det Z| = {abs_det:.3e} fell below {SINGULAR_Z_ABS:.0e} at step {step}")]
    SingularZ { step: usize, abs_det: f64 },
    #[error("non-finite state encountered at step {step}")]
    NonFinite { step: usize },
}

// ---------------------------------------------------------------------------
// phase-space grids
// ---------------------------------------------------------------------------

/// One uniform grid axis: nodes min + i*step for i in 0..count.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    min: f64,
    max: f64,
    step: f64,
    count: usize,
}

impl GridAxis {
    /// Build an axis whose endpoints are separated by an integer number of
    /// steps (validated to a relative 1e-9).
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self, FgaError> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(FgaError::InvalidAxis {
                min,
                max,
                step,
                reason: "step must be positive and finite",
            });
        }
        if !(max >= min) || !min.is_finite() || !max.is_finite() {
            return Err(FgaError::InvalidAxis {
                min,
                max,
                step,
                reason: "need finite max >= min",
            });
        }
        let span = max - min;
        let steps = (span / step).round();
        let tol = 1e-9 * span.abs().max(1.0);
        if (steps * step - span).abs() > tol {
            return Err(FgaError::InvalidAxis {
                min,
                max,
                step,
                reason: "span is not an integer number of steps",
            });
        }
        Ok(GridAxis {
            min,
            max,
            step,
            count: steps as usize + 1,
        })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.count);
        self.min + i as f64 * self.step
    }

    /// Trapezoid-style quadrature weight: step in the interior, step/2 at
    /// the endpoints (a single-node axis gets the neutral weight 1).
    pub fn weight(&self, i: usize) -> f64 {
        if self.count == 1 {
            1.0
        } else if i == 0 || i == self.count - 1 {
            0.5 * self.step
        } else {
            self.step
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }
}

/// Tensor-product sampling grid over initial phase space: all momentum axes
/// followed by all position axes, the last axis varying fastest.
#[derive(Debug, Clone)]
pub struct PhaseSpaceGrid {
    p_axes: Vec<GridAxis>,
    q_axes: Vec<GridAxis>,
}

impl PhaseSpaceGrid {
    pub fn new(p_axes: Vec<GridAxis>, q_axes: Vec<GridAxis>) -> Self {
        assert_eq!(p_axes.len(), q_axes.len(), "need one p axis per q axis");
        assert!(!p_axes.is_empty(), "grid needs at least one dimension");
        PhaseSpaceGrid { p_axes, q_axes }
    }

    pub fn dimension(&self) -> usize {
        self.p_axes.len()
    }

    pub fn p_axes(&self) -> &[GridAxis] {
        &self.p_axes
    }

    pub fn q_axes(&self) -> &[GridAxis] {
        &self.q_axes
    }

    /// Total number of phase-space nodes.
    pub fn node_count(&self) -> usize {
        self.p_axes
            .iter()
            .chain(&self.q_axes)
            .map(|a| a.count())
            .product()
    }

    /// Decode a flat node index into (p, q, weight).
    pub fn node(&self, index: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let d = self.dimension();
        let mut p = vec![0.0; d];
        let mut q = vec![0.0; d];
        let mut weight = 1.0;
        let mut rest = index;
        // decode from the fastest (last) axis backwards
        for slot in (0..2 * d).rev() {
            let axis = if slot < d {
                &self.p_axes[slot]
            } else {
                &self.q_axes[slot - d]
            };
            let i = rest % axis.count();
            rest /= axis.count();
            weight *= axis.weight(i);
            let value = axis.node(i);
            if slot < d {
                p[slot] = value;
            } else {
                q[slot - d] = value;
            }
        }
        debug_assert_eq!(rest, 0, "node index out of range");
        (p, q, weight)
    }

    /// Sum of all node weights (equals the phase-space volume of the
    /// sampling window).
    pub fn total_weight(&self) -> f64 {
        self.p_axes
            .iter()
            .chain(&self.q_axes)
            .map(|a| (0..a.count()).map(|i| a.weight(i)).sum::<f64>())
            .product()
    }
}

// ---------------------------------------------------------------------------
// trajectory state and propagation
// ---------------------------------------------------------------------------

/// The full per-trajectory state: classical pair, action, evolving
/// amplitude, and the complex variational block (row-major D x D).
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub action: f64,
    pub amplitude: C64,
    /// MQ: derivative block initialized to the identity.
    pub dq_block: Vec<C64>,
    /// MP: derivative block initialized to -i I.
    pub dp_block: Vec<C64>,
    pub time: f64,
}

impl TrajectoryState {
    /// Standard initial data at phase-space point (p, q):
    /// S = 0, a = 2^{D/2}, MQ = I, MP = -i I.
    pub fn initial(p: &[f64], q: &[f64]) -> Self {
        assert_eq!(p.len(), q.len());
        let d = p.len();
        let mut dq_block = vec![C64::new(0.0, 0.0); d * d];
        let mut dp_block = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            dq_block[i * d + i] = C64::new(1.0, 0.0);
            dp_block[i * d + i] = C64::new(0.0, -1.0);
        }
        TrajectoryState {
            p: p.to_vec(),
            q: q.to_vec(),
            action: 0.0,
            amplitude: C64::new(2.0f64.powi(d as i32).sqrt(), 0.0),
            dq_block,
            dp_block,
            time: 0.0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.p.len()
    }
}

/// det(MQ + i MP) of a state.
pub fn det_z(state: &TrajectoryState) -> C64 {
    let d = state.dimension();
    let mut lu: Vec<C64> = (0..d * d)
        .map(|i| state.dq_block[i] + C64::new(0.0, 1.0) * state.dp_block[i])
        .collect();
    let mut piv = vec![0usize; d];
    let mut sign = 1.0;
    if !complex_lu(&mut lu, d, &mut sign, &mut piv) {
        return C64::new(0.0, 0.0);
    }
    let mut det = C64::new(sign, 0.0);
    for i in 0..d {
        det *= lu[i * d + i];
    }
    det
}

/// Classical energy |P|^2/2 + V~(Q) of a trajectory state.
pub fn classical_energy(state: &TrajectoryState, potential: &EffectivePotential) -> f64 {
    0.5 * state.p.iter().map(|v| v * v).sum::<f64>() + potential.value(&state.q)
}

/// In-place LU factorization with partial pivoting for tiny complex
/// matrices; fills the pivot permutation and returns false when exactly
/// singular.
fn complex_lu(a: &mut [C64], d: usize, sign: &mut f64, piv: &mut [usize]) -> bool {
    for (i, slot) in piv.iter_mut().enumerate() {
        *slot = i;
    }
    for col in 0..d {
        let mut best = col;
        let mut mag = a[col * d + col].norm_sqr();
        for row in col + 1..d {
            let m = a[row * d + col].norm_sqr();
            if m > mag {
                mag = m;
                best = row;
            }
        }
        if mag == 0.0 {
            return false;
        }
        if best != col {
            for j in 0..d {
                a.swap(col * d + j, best * d + j);
            }
            piv.swap(col, best);
            *sign = -*sign;
        }
        let inv = C64::new(1.0, 0.0) / a[col * d + col];
        for row in col + 1..d {
            let f = a[row * d + col] * inv;
            a[row * d + col] = f;
            for j in col + 1..d {
                let sub = f * a[col * d + j];
                a[row * d + j] -= sub;
            }
        }
    }
    true
}

/// Solve one right-hand side through an LU factorization.
fn lu_solve(lu: &[C64], piv: &[usize], d: usize, b: &[C64], x: &mut [C64]) {
    for i in 0..d {
        x[i] = b[piv[i]];
    }
    for i in 0..d {
        for j in 0..i {
            let sub = lu[i * d + j] * x[j];
            x[i] -= sub;
        }
    }
    for i in (0..d).rev() {
        for j in i + 1..d {
            let sub = lu[i * d + j] * x[j];
            x[i] -= sub;
        }
        x[i] /= lu[i * d + i];
    }
}

/// Time derivative of a [`TrajectoryState`] (same shape, reused buffers).
#[derive(Debug, Clone)]
struct Derivative {
    p: Vec<f64>,
    q: Vec<f64>,
    action: f64,
    amplitude: C64,
    dq_block: Vec<C64>,
    dp_block: Vec<C64>,
}

impl Derivative {
    fn zeros(d: usize) -> Self {
        Derivative {
            p: vec![0.0; d],
            q: vec![0.0; d],
            action: 0.0,
            amplitude: C64::new(0.0, 0.0),
            dq_block: vec![C64::new(0.0, 0.0); d * d],
            dp_block: vec![C64::new(0.0, 0.0); d * d],
        }
    }
}

/// Scratch buffers shared by every right-hand-side evaluation.
struct RhsScratch {
    grad: Vec<f64>,
    hess: Vec<f64>,
    lu: Vec<C64>,
    w: Vec<C64>,
    piv: Vec<usize>,
    rhs_col: Vec<C64>,
    sol_col: Vec<C64>,
}

impl RhsScratch {
    fn new(dim: usize) -> Self {
        RhsScratch {
            grad: vec![0.0; dim],
            hess: vec![0.0; dim * dim],
            lu: vec![C64::new(0.0, 0.0); dim * dim],
            w: vec![C64::new(0.0, 0.0); dim * dim],
            piv: vec![0; dim],
            rhs_col: vec![C64::new(0.0, 0.0); dim],
            sol_col: vec![C64::new(0.0, 0.0); dim],
        }
    }
}

/// Evaluate the right-hand side at `state` into `out`; returns |det Z|.
///
/// Fails with `SingularZ` when |det Z| drops below [`SINGULAR_Z_ABS`].
fn rhs(
    state: &TrajectoryState,
    potential: &EffectivePotential,
    step: usize,
    scratch: &mut RhsScratch,
    out: &mut Derivative,
) -> Result<f64, FgaError> {
    let d = state.dimension();
    potential.gradient(&state.q, &mut scratch.grad);
    potential.hessian(&state.q, &mut scratch.hess);

    // Z = MQ + i MP (straight into the LU buffer) and W = MP - i MQ H
    for i in 0..d {
        for j in 0..d {
            let idx = i * d + j;
            scratch.lu[idx] = state.dq_block[idx] + C64::new(0.0, 1.0) * state.dp_block[idx];
            let mut mqh = C64::new(0.0, 0.0);
            for k in 0..d {
                mqh += state.dq_block[i * d + k] * scratch.hess[k * d + j];
            }
            scratch.w[idx] = state.dp_block[idx] - C64::new(0.0, 1.0) * mqh;
            out.dp_block[idx] = -mqh; // MP' = -MQ H
        }
    }
    let mut sign = 1.0;
    let ok = complex_lu(&mut scratch.lu, d, &mut sign, &mut scratch.piv);
    let abs_det = if ok {
        let mut det = C64::new(sign, 0.0);
        for i in 0..d {
            det *= scratch.lu[i * d + i];
        }
        det.norm()
    } else {
        0.0
    };
    if abs_det < SINGULAR_Z_ABS {
        return Err(FgaError::SingularZ { step, abs_det });
    }

    // trace(Z^{-1} W): solve for the diagonal entries column by column
    let mut trace = C64::new(0.0, 0.0);
    for c in 0..d {
        for r in 0..d {
            scratch.rhs_col[r] = scratch.w[r * d + c];
        }
        lu_solve(
            &scratch.lu,
            &scratch.piv,
            d,
            &scratch.rhs_col,
            &mut scratch.sol_col,
        );
        trace += scratch.sol_col[c];
    }

    for i in 0..d {
        out.p[i] = -scratch.grad[i];
        out.q[i] = state.p[i];
    }
    out.action = 0.5 * state.p.iter().map(|v| v * v).sum::<f64>() - potential.value(&state.q);
    out.amplitude = 0.5 * state.amplitude * trace;
    out.dq_block.copy_from_slice(&state.dp_block); // MQ' = MP
    Ok(abs_det)
}

/// Reusable integrator: owns every scratch buffer so propagating many
/// trajectories allocates nothing per step.
pub struct TrajectoryIntegrator {
    dim: usize,
    scratch: RhsScratch,
    k1: Derivative,
    k2: Derivative,
    k3: Derivative,
    k4: Derivative,
    tmp: TrajectoryState,
}

impl TrajectoryIntegrator {
    pub fn new(dim: usize) -> Self {
        let zero_state = TrajectoryState::initial(&vec![0.0; dim], &vec![0.0; dim]);
        TrajectoryIntegrator {
            dim,
            scratch: RhsScratch::new(dim),
            k1: Derivative::zeros(dim),
            k2: Derivative::zeros(dim),
            k3: Derivative::zeros(dim),
            k4: Derivative::zeros(dim),
            tmp: zero_state,
        }
    }

    /// One classical RK4 step of size `dt`; returns |det Z| at the
    /// incoming state.
    pub fn step(
        &mut self,
        state: &mut TrajectoryState,
        potential: &EffectivePotential,
        dt: f64,
        step_index: usize,
    ) -> Result<f64, FgaError> {
        debug_assert_eq!(state.dimension(), self.dim);
        let abs_det =
            rhs(state, potential, step_index, &mut self.scratch, &mut self.k1)?;
        write_stage(&mut self.tmp, state, &self.k1, 0.5 * dt);
        rhs(&self.tmp, potential, step_index, &mut self.scratch, &mut self.k2)?;
        write_stage(&mut self.tmp, state, &self.k2, 0.5 * dt);
        rhs(&self.tmp, potential, step_index, &mut self.scratch, &mut self.k3)?;
        write_stage(&mut self.tmp, state, &self.k3, dt);
        rhs(&self.tmp, potential, step_index, &mut self.scratch, &mut self.k4)?;

        let d = self.dim;
        let w = dt / 6.0;
        for i in 0..d {
            state.p[i] += w * (self.k1.p[i] + 2.0 * self.k2.p[i] + 2.0 * self.k3.p[i] + self.k4.p[i]);
            state.q[i] += w * (self.k1.q[i] + 2.0 * self.k2.q[i] + 2.0 * self.k3.q[i] + self.k4.q[i]);
        }
        state.action +=
            w * (self.k1.action + 2.0 * self.k2.action + 2.0 * self.k3.action + self.k4.action);
        state.amplitude += w
            * (self.k1.amplitude
                + 2.0 * self.k2.amplitude
                + 2.0 * self.k3.amplitude
                + self.k4.amplitude);
        for idx in 0..d * d {
            state.dq_block[idx] += w
                * (self.k1.dq_block[idx]
                    + 2.0 * self.k2.dq_block[idx]
                    + 2.0 * self.k3.dq_block[idx]
                    + self.k4.dq_block[idx]);
            state.dp_block[idx] += w
                * (self.k1.dp_block[idx]
                    + 2.0 * self.k2.dp_block[idx]
                    + 2.0 * self.k3.dp_block[idx]
                    + self.k4.dp_block[idx]);
        }
        state.time += dt;
        Ok(abs_det)
    }

    /// Propagate `initial` for `n_steps` steps of size `dt`, recording the
    /// position at every time node (axis-major, `q_samples[d][i]`).
    pub fn evolve(
        &mut self,
        initial: &TrajectoryState,
        potential: &EffectivePotential,
        dt: f64,
        n_steps: usize,
    ) -> Result<TrajectoryHistory, FgaError> {
        let d = initial.dimension();
        debug_assert_eq!(d, self.dim);
        let mut state = initial.clone();
        let mut q_samples: Vec<Vec<f64>> =
            (0..d).map(|_| Vec::with_capacity(n_steps + 1)).collect();
        for (axis, samples) in q_samples.iter_mut().enumerate() {
            samples.push(state.q[axis]);
        }
        let mut min_abs_det_z = f64::INFINITY;
        for step in 0..n_steps {
            let abs_det = self.step(&mut state, potential, dt, step)?;
            min_abs_det_z = min_abs_det_z.min(abs_det);
            if !state.action.is_finite() || state.q.iter().any(|v| !v.is_finite()) {
                return Err(FgaError::NonFinite { step });
            }
            for (axis, samples) in q_samples.iter_mut().enumerate() {
                samples.push(state.q[axis]);
            }
        }
        min_abs_det_z = min_abs_det_z.min(det_z(&state).norm());
        Ok(TrajectoryHistory {
            q_samples,
            final_state: state,
            min_abs_det_z,
        })
    }
}

/// tmp = base + scale * k
fn write_stage(tmp: &mut TrajectoryState, base: &TrajectoryState, k: &Derivative, scale: f64) {
    let d = base.dimension();
    tmp.p.clear();
    tmp.p.extend_from_slice(&base.p);
    tmp.q.clear();
    tmp.q.extend_from_slice(&base.q);
    tmp.dq_block.clear();
    tmp.dq_block.extend_from_slice(&base.dq_block);
    tmp.dp_block.clear();
    tmp.dp_block.extend_from_slice(&base.dp_block);
    for i in 0..d {
        tmp.p[i] += scale * k.p[i];
        tmp.q[i] += scale * k.q[i];
    }
    tmp.action = base.action + scale * k.action;
    tmp.amplitude = base.amplitude + scale * k.amplitude;
    for idx in 0..d * d {
        tmp.dq_block[idx] += scale * k.dq_block[idx];
        tmp.dp_block[idx] += scale * k.dp_block[idx];
    }
    tmp.time = base.time + scale;
}

/// Result of propagating one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryHistory {
    /// Positions at every time node, axis-major: `q_samples[d][i]`.
    pub q_samples: Vec<Vec<f64>>,
    pub final_state: TrajectoryState,
    /// Smallest |det Z| seen along the way (diagnostic).
    pub min_abs_det_z: f64,
}

// ---------------------------------------------------------------------------
// wavepacket factors
// ---------------------------------------------------------------------------

/// Overall scalar in front of every trajectory contribution:
/// (2 pi eps)^{-3 D / 2}.
pub fn hk_prefactor(eps: f64, dim: usize) -> f64 {
    (2.0 * std::f64::consts::PI * eps).powf(-1.5 * dim as f64)
}

/// Quadrature overlap of the trajectory's initial frozen Gaussian with the
/// initial state along one axis:
/// ```text
///   G_d = sum_y w_y exp(-(y - q_d)^2/(2 eps) - i p_d (y - q_d)/eps) psi0_d(y)
/// ```
pub fn axis_overlap(eps: f64, p_d: f64, q_d: f64, nodes: &[f64], weights: &[f64], psi0: &[C64]) -> C64 {
    debug_assert_eq!(nodes.len(), weights.len());
    debug_assert_eq!(nodes.len(), psi0.len());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..nodes.len() {
        let dy = nodes[i] - q_d;
        let gauss = (-dy * dy / (2.0 * eps)).exp();
        let (sin, cos) = (-p_d * dy / eps).sin_cos();
        acc += weights[i] * gauss * C64::new(cos, sin) * psi0[i];
    }
    acc
}

/// Final-time envelope of the trajectory's frozen Gaussian on the x-nodes
/// of one axis:
/// ```text
///   F_d(x) = exp(-(x - Q_d)^2/(2 eps) + i P_d (x - Q_d)/eps)
/// ```
pub fn axis_envelope(eps: f64, p_final: f64, q_final: f64, x_nodes: &[f64], out: &mut [C64]) {
    debug_assert_eq!(x_nodes.len(), out.len());
    for (o, &x) in out.iter_mut().zip(x_nodes) {
        let dx = x - q_final;
        let gauss = (-dx * dx / (2.0 * eps)).exp();
        let (sin, cos) = (p_final * dx / eps).sin_cos();
        *o = gauss * C64::new(cos, sin);
    }
}
