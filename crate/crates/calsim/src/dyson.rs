//! Factorized assembly of the influence expansion.  Each trajectory carries
//! primitive coupling integrals (one per retained bath mode and axis), a
//! second-order pair sum, and even-order moment factors; weighted products
//! of those scalars accumulate per-field wavepacket sums whose pairwise
//! products assemble the reduced density on the output grid.
//!
//! The stored field set for truncation depth `nbar` is every pair (N, m)
//! with |N| = n <= nbar over the rank*dimension coupling slots and even
//! m <= 2(nbar - n); assembly consumes exactly that set, so a wider run can
//! be re-assembled at any narrower depth or retained rank and reproduce the
//! narrower run bit for bit.

use std::collections::HashMap;

use crate::C64;

/// Errors from the expansion machinery.
#[derive(Debug, thiserror::Error)]
pub enum DysonError {
    #[error("moment order must be even, got {m}")]
    OddMoment { m: u32 },
    #[error("assembly requested {requested} {what}, run stored {available}")]
    AssemblyBounds {
        what: &'static str,
        requested: usize,
        available: usize,
    },
}

// ---------------------------------------------------------------------------
// multi-indices
// ---------------------------------------------------------------------------

/// A multi-index over the coupling slots: total order n and the nonzero
/// (slot, count) pairs in ascending slot order.  Slot s pairs retained
/// mode s / D with axis s mod D.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    order: u32,
    entries: Vec<(usize, u32)>,
}

impl MultiIndex {
    /// |N|, the total number of coupling insertions.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Nonzero (slot, count) pairs, ascending by slot.
    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    /// N! = product of count! over the slots.
    pub fn factorial(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, c)| crate::util::factorial(c))
            .product()
    }

    /// Largest occupied slot, or None for the empty index.
    pub fn max_slot(&self) -> Option<usize> {
        self.entries.last().map(|&(s, _)| s)
    }
}

/// All weak compositions of `order` into `n_slots` slots, in ascending
/// lexicographic order of the composition vector.  There are
/// C(n_slots + order - 1, order) of them; for order 0 the single empty
/// index is returned regardless of the slot count.
pub fn multi_indices(n_slots: usize, order: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    if order == 0 {
        out.push(MultiIndex {
            order: 0,
            entries: Vec::new(),
        });
        return out;
    }
    if n_slots == 0 {
        return out;
    }
    let mut entries: Vec<(usize, u32)> = Vec::new();
    compose(n_slots, order, 0, &mut entries, &mut out);
    out
}

fn compose(
    n_slots: usize,
    remaining: u32,
    slot: usize,
    entries: &mut Vec<(usize, u32)>,
    out: &mut Vec<MultiIndex>,
) {
    if slot == n_slots - 1 {
        // last slot takes whatever is left
        if remaining > 0 {
            entries.push((slot, remaining));
        }
        out.push(MultiIndex {
            order: entries.iter().map(|&(_, c)| c).sum(),
            entries: entries.clone(),
        });
        if remaining > 0 {
            entries.pop();
        }
        return;
    }
    for value in 0..=remaining {
        if value > 0 {
            entries.push((slot, value));
        }
        compose(n_slots, remaining - value, slot + 1, entries, out);
        if value > 0 {
            entries.pop();
        }
    }
}

// ---------------------------------------------------------------------------
// field layout
// ---------------------------------------------------------------------------

/// One stored field: a multi-index and an even moment order m.
#[derive(Debug, Clone)]
pub struct FieldKey {
    pub multi_index: MultiIndex,
    pub moment: u32,
    inv_factorial: f64,
}

/// The ordered table of stored fields for a run: n ascending, multi-index
/// lexicographic, moment ascending.
#[derive(Debug, Clone)]
pub struct DysonLayout {
    nbar: u32,
    rank: usize,
    dimension: usize,
    fields: Vec<FieldKey>,
}

impl DysonLayout {
    pub fn new(nbar: u32, rank: usize, dimension: usize) -> Self {
        let mut fields = Vec::new();
        for n in 0..=nbar {
            for mi in multi_indices(rank * dimension, n) {
                let inv_factorial = 1.0 / mi.factorial();
                for m in (0..=2 * (nbar - n)).step_by(2) {
                    fields.push(FieldKey {
                        multi_index: mi.clone(),
                        moment: m,
                        inv_factorial,
                    });
                }
            }
        }
        DysonLayout {
            nbar,
            rank,
            dimension,
            fields,
        }
    }

    pub fn nbar(&self) -> u32 {
        self.nbar
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn field_count(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[FieldKey] {
        &self.fields
    }

    /// Per-trajectory scalar of every stored field:
    /// ```text
    ///   out[f] = amplitude * (1/N!) prod_slots I_slot^{N_slot} * moments[m/2]
    /// ```
    /// where `primitives[slot]` are the coupling integrals and `moments`
    /// the even moment factors from [`moment_factors`].
    pub fn field_scalars(&self, primitives: &[C64], moments: &[C64], amplitude: C64, out: &mut [C64]) {
        debug_assert_eq!(primitives.len(), self.rank * self.dimension);
        debug_assert!(moments.len() > self.nbar as usize);
        debug_assert_eq!(out.len(), self.fields.len());
        for (slot, field) in self.fields.iter().enumerate() {
            let mut product = C64::new(field.inv_factorial, 0.0);
            for &(s, c) in field.multi_index.entries() {
                product *= primitives[s].powu(c);
            }
            out[slot] = amplitude * product * moments[(field.moment / 2) as usize];
        }
    }
}

// ---------------------------------------------------------------------------
// per-trajectory scalars
// ---------------------------------------------------------------------------

/// Primitive coupling integrals of one trajectory:
/// ```text
///   out[j*D + d] = sum_i tw[i] vectors[j][i] q_samples[d][i]
/// ```
/// (trapezoid-in-time contraction of each retained temporal mode with each
/// position component).
pub fn primitive_integrals(
    time_weights: &[f64],
    q_samples: &[Vec<f64>],
    vectors: &[Vec<C64>],
    out: &mut [C64],
) {
    let dim = q_samples.len();
    debug_assert_eq!(out.len(), vectors.len() * dim);
    for (j, v) in vectors.iter().enumerate() {
        debug_assert_eq!(v.len(), time_weights.len());
        for (d, q) in q_samples.iter().enumerate() {
            debug_assert_eq!(q.len(), time_weights.len());
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..time_weights.len() {
                acc += time_weights[i] * q[i] * v[i];
            }
            out[j * dim + d] = acc;
        }
    }
}

/// Second-order pair sum of one trajectory against the full correlation
/// kernel, using its Toeplitz lag structure:
/// ```text
///   J2 = - sum_{l >= 0} B(l dt) C_l,   C_l = sum_d sum_i u_d[i] u_d[i+l]
/// ```
/// with u_d[i] = tw[i] q_d[i] and the l = 0 term halved (the one-sided
/// time-ordered double sum with half-weight diagonal).
pub fn pair_sum_exact(time_weights: &[f64], q_samples: &[Vec<f64>], lags: &[C64]) -> C64 {
    let n = time_weights.len();
    debug_assert_eq!(lags.len(), n);
    let mut j2 = C64::new(0.0, 0.0);
    for q in q_samples {
        debug_assert_eq!(q.len(), n);
        let u: Vec<f64> = (0..n).map(|i| time_weights[i] * q[i]).collect();
        for (l, lag) in lags.iter().enumerate() {
            let mut c_l = 0.0;
            for i in 0..n - l {
                c_l += u[i] * u[i + l];
            }
            if l == 0 {
                c_l *= 0.5;
            }
            j2 -= lag * c_l;
        }
    }
    j2
}

/// The same pair sum through the retained low-rank modes, in O(N r D):
/// ```text
///   J2 = - sum_m lambda_m sum_d sum_k conj(g[k]) (G[k] - g[k]/2)
/// ```
/// with g[i] = tw[i] v_m[i] q_d[i] and G the inclusive prefix sum of g.
/// At full retained rank this agrees with [`pair_sum_exact`] to roundoff.
pub fn pair_sum_lowrank(
    time_weights: &[f64],
    q_samples: &[Vec<f64>],
    lambdas: &[f64],
    vectors: &[Vec<C64>],
) -> C64 {
    let n = time_weights.len();
    let mut j2 = C64::new(0.0, 0.0);
    for (m, v) in vectors.iter().enumerate() {
        debug_assert_eq!(v.len(), n);
        let mut mode_sum = C64::new(0.0, 0.0);
        for q in q_samples {
            let mut prefix = C64::new(0.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                let g = time_weights[i] * q[i] * v[i];
                prefix += g;
                acc += g.conj() * (prefix - 0.5 * g);
            }
            mode_sum += acc;
        }
        j2 -= lambdas[m] * mode_sum;
    }
    j2
}

/// The even moment factor J^(m) = (J2)^{m/2} / (m/2)!; odd orders are
/// rejected.
pub fn moment_factor(pair_sum: C64, m: u32) -> Result<C64, DysonError> {
    if m % 2 != 0 {
        return Err(DysonError::OddMoment { m });
    }
    let half = m / 2;
    Ok(pair_sum.powu(half) / crate::util::factorial(half))
}

/// All even moment factors J^(0), J^(2), ..., J^(2 nbar), indexed by m/2.
pub fn moment_factors(pair_sum: C64, nbar: u32) -> Vec<C64> {
    (0..=nbar)
        .map(|half| moment_factor(pair_sum, 2 * half).expect("even order"))
        .collect()
}

// ---------------------------------------------------------------------------
// accumulation and assembly
// ---------------------------------------------------------------------------

/// Field-major running sums over trajectories: `data[f * n_x + ix]` holds
/// the f-th field summed on the flattened output grid.
#[derive(Debug, Clone)]
pub struct FieldAccumulator {
    field_count: usize,
    n_x: usize,
    data: Vec<C64>,
    trajectories: u64,
}

impl FieldAccumulator {
    pub fn new(field_count: usize, n_x: usize) -> Self {
        FieldAccumulator {
            field_count,
            n_x,
            data: vec![C64::new(0.0, 0.0); field_count * n_x],
            trajectories: 0,
        }
    }

    pub fn field_count(&self) -> usize {
        self.field_count
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn trajectories(&self) -> u64 {
        self.trajectories
    }

    pub fn field(&self, f: usize) -> &[C64] {
        &self.data[f * self.n_x..(f + 1) * self.n_x]
    }

    /// Rank-one update: every field gains its scalar times the shared
    /// spatial envelope of the trajectory.
    pub fn accumulate(&mut self, scalars: &[C64], envelope: &[C64]) {
        assert_eq!(scalars.len(), self.field_count);
        assert_eq!(envelope.len(), self.n_x);
        for (f, &s) in scalars.iter().enumerate() {
            let row = &mut self.data[f * self.n_x..(f + 1) * self.n_x];
            for (slot, &e) in row.iter_mut().zip(envelope) {
                *slot += s * e;
            }
        }
        self.trajectories += 1;
    }

    /// Fold another accumulator (same layout) into this one.
    pub fn merge(&mut self, other: &FieldAccumulator) {
        assert_eq!(self.field_count, other.field_count);
        assert_eq!(self.n_x, other.n_x);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        self.trajectories += other.trajectories;
    }
}

/// Truncation controls for assembly: expansion depth and retained-rank
/// filter, each at most what the accumulator's layout stored.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    pub nbar: u32,
    pub rank_limit: usize,
}

/// Assembled density on the flattened output grid, before any imaginary
/// residue is dropped.
#[derive(Debug, Clone)]
pub struct AssembledDensity {
    /// Real part of the assembled density, point by point.
    pub values: Vec<f64>,
    /// Largest |imaginary part| over the grid (should be roundoff).
    pub imag_residue: f64,
    /// Largest |density| over the grid (for relative residue reporting).
    pub max_abs: f64,
}

/// Assemble the reduced density from the per-field sums:
/// ```text
///   rho(x) = sum_{n <= nbar} sum_{|N| = n, support < rank_limit*D}
///            lambda^N N! sum_{m1 + m2 <= 2(nbar - n), even}
///            field(N, m1)(x) conj(field(N, m2)(x))
/// ```
/// The iteration order is deterministic (n ascending, multi-index
/// lexicographic, then m1, m2 ascending), so narrowing nbar or rank_limit
/// reproduces a direct narrower run exactly.
pub fn assemble_density(
    layout: &DysonLayout,
    acc: &FieldAccumulator,
    lambdas: &[f64],
    options: AssemblyOptions,
) -> Result<AssembledDensity, DysonError> {
    if options.nbar > layout.nbar {
        return Err(DysonError::AssemblyBounds {
            what: "expansion orders",
            requested: options.nbar as usize,
            available: layout.nbar as usize,
        });
    }
    if options.rank_limit > layout.rank {
        return Err(DysonError::AssemblyBounds {
            what: "retained modes",
            requested: options.rank_limit,
            available: layout.rank,
        });
    }
    assert_eq!(acc.field_count(), layout.field_count());
    let dim = layout.dimension;

    // index the stored fields once
    let mut index: HashMap<(&MultiIndex, u32), usize> = HashMap::new();
    for (f, key) in layout.fields.iter().enumerate() {
        index.insert((&key.multi_index, key.moment), f);
    }

    let n_x = acc.n_x();
    let mut rho = vec![C64::new(0.0, 0.0); n_x];
    for n in 0..=options.nbar {
        for mi in multi_indices(layout.rank * dim, n) {
            if let Some(max_slot) = mi.max_slot() {
                if max_slot >= options.rank_limit * dim {
                    continue;
                }
            }
            // lambda^N N!
            let mut coeff = mi.factorial();
            for &(slot, count) in mi.entries() {
                coeff *= lambdas[slot / dim].powi(count as i32);
            }
            let m_budget = 2 * (options.nbar - n);
            for m1 in (0..=m_budget).step_by(2) {
                for m2 in (0..=m_budget - m1).step_by(2) {
                    let f1 = index[&(&mi, m1)];
                    let f2 = index[&(&mi, m2)];
                    let row1 = acc.field(f1);
                    let row2 = acc.field(f2);
                    for ix in 0..n_x {
                        rho[ix] += coeff * row1[ix] * row2[ix].conj();
                    }
                }
            }
        }
    }

    let mut imag_residue = 0.0f64;
    let mut max_abs = 0.0f64;
    for v in &rho {
        imag_residue = imag_residue.max(v.im.abs());
        max_abs = max_abs.max(v.norm());
    }
    Ok(AssembledDensity {
        values: rho.iter().map(|v| v.re).collect(),
        imag_residue,
        max_abs,
    })
}
