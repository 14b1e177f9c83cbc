//! Model potentials with analytic values, gradients, and Hessians: an
//! isotropic harmonic well, a one-dimensional symmetric double well, a
//! smoothed two-slit barrier in two dimensions, and user-supplied
//! callables.  The bath-induced quadratic shift wraps any of them into the
//! effective potential the trajectories actually feel.

use std::sync::Arc;

/// Errors from potential construction or dimension mismatches.
#[derive(Debug, thiserror::Error)]
pub enum PotentialError {
    #[error("potential {name} requires dimension {required}, got {got}")]
    DimensionMismatch {
        name: &'static str,
        required: usize,
        got: usize,
    },
    #[error("invalid double-slit parameter {name} = {value}: {requirement}")]
    InvalidSlitParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
}

/// Quintic smoothstep on [0, 1]: t^3 (10 - 15 t + 6 t^2).
///
/// The unique quintic with f(0) = f'(0) = f''(0) = 0, f(1) = 1,
/// f'(1) = f''(1) = 0, so piecewise constructions glued with it are C^2.
pub fn smoothstep(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// First derivative of [`smoothstep`]: 30 t^2 (1 - t)^2.
pub fn smoothstep_d1(t: f64) -> f64 {
    let u = 1.0 - t;
    30.0 * t * t * u * u
}

/// Second derivative of [`smoothstep`]: 60 t (1 - t)(1 - 2 t).
pub fn smoothstep_d2(t: f64) -> f64 {
    60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}

/// Geometry of the smoothed two-slit barrier.
///
/// The barrier is the product `height * A(x1) * T(x2)`: `A` is an even
/// transverse profile that equals 1 on the solid wall, drops to 0 across a
/// smoothing band of width `edge`, stays 0 over each slit opening of width
/// `slit_width`, and returns to 1 outside; `T` is the longitudinal profile
/// of the slab, 1 in its core, falling to 0 across an `edge`-wide band so
/// that the potential vanishes for |x2| >= `half_thickness`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleSlitParams {
    /// Barrier height (the global maximum of the potential).
    pub height: f64,
    /// Half-width of the central solid wall between the two slits.
    pub core_half_width: f64,
    /// Half-thickness of the barrier slab along x2.
    pub half_thickness: f64,
    /// Width of each slit opening.
    pub slit_width: f64,
    /// Width of every smoothing band.
    pub edge: f64,
}

impl Default for DoubleSlitParams {
    fn default() -> Self {
        DoubleSlitParams {
            height: 10.0,
            core_half_width: 0.35,
            half_thickness: 0.15,
            slit_width: 0.05,
            edge: 0.05,
        }
    }
}

impl DoubleSlitParams {
    /// Transverse coordinate of each slit center: the midpoint of the
    /// opening, `core_half_width + edge + slit_width/2`.
    pub fn slit_center(&self) -> f64 {
        self.core_half_width + self.edge + 0.5 * self.slit_width
    }

    /// Check the geometric constraints (positive widths, the ramp fitting
    /// inside the slab, the slit fitting outside the core).
    pub fn validate(&self) -> Result<(), PotentialError> {
        let check = |name: &'static str, value: f64, ok: bool, requirement: &'static str| {
            if ok {
                Ok(())
            } else {
                Err(PotentialError::InvalidSlitParameter {
                    name,
                    value,
                    requirement,
                })
            }
        };
        check("height", self.height, self.height > 0.0, "must be positive")?;
        check(
            "core_half_width",
            self.core_half_width,
            self.core_half_width > 0.0,
            "must be positive",
        )?;
        check("edge", self.edge, self.edge > 0.0, "must be positive")?;
        check(
            "slit_width",
            self.slit_width,
            self.slit_width >= 0.0,
            "must be non-negative",
        )?;
        check(
            "half_thickness",
            self.half_thickness,
            self.half_thickness >= self.edge,
            "must be at least the smoothing edge width",
        )?;
        Ok(())
    }

    /// Transverse profile A(x) with first and second derivatives.
    fn transverse(&self, x: f64) -> (f64, f64, f64) {
        let s = if x < 0.0 { -1.0 } else { 1.0 };
        let u = x.abs();
        let a = self.core_half_width;
        let b = self.edge;
        let w = self.slit_width;
        let (v, dv_du, d2v) = if u <= a {
            (1.0, 0.0, 0.0)
        } else if u <= a + b {
            // falling edge into the slit
            let t = (a + b - u) / b;
            (smoothstep(t), -smoothstep_d1(t) / b, smoothstep_d2(t) / (b * b))
        } else if u <= a + b + w {
            (0.0, 0.0, 0.0)
        } else if u <= a + 2.0 * b + w {
            // rising edge out of the slit
            let t = (u - (a + b + w)) / b;
            (smoothstep(t), smoothstep_d1(t) / b, smoothstep_d2(t) / (b * b))
        } else {
            (1.0, 0.0, 0.0)
        };
        (v, s * dv_du, d2v)
    }

    /// Longitudinal slab profile T(y) with first and second derivatives.
    fn longitudinal(&self, y: f64) -> (f64, f64, f64) {
        let s = if y < 0.0 { -1.0 } else { 1.0 };
        let u = y.abs();
        let d = self.half_thickness;
        let b = self.edge;
        let (v, dv_du, d2v) = if u <= d - b {
            (1.0, 0.0, 0.0)
        } else if u <= d {
            let t = (d - u) / b;
            (smoothstep(t), -smoothstep_d1(t) / b, smoothstep_d2(t) / (b * b))
        } else {
            (0.0, 0.0, 0.0)
        };
        (v, s * dv_du, d2v)
    }
}

/// User-supplied potential callables (tabulated models, test fixtures).
pub struct CustomPotential {
    pub dimension: usize,
    pub value: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub gradient: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub hessian: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
}

impl std::fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomPotential")
            .field("dimension", &self.dimension)
            .finish_non_exhaustive()
    }
}

/// The supported potential families.
#[derive(Debug, Clone)]
pub enum Potential {
    /// |x|^2 / 2 in any dimension.
    Harmonic,
    /// x^2 (2 x^2 - 1): symmetric wells at x = +-1/2, one-dimensional.
    DoubleWell,
    /// Smoothed two-slit barrier, two-dimensional.
    DoubleSlit(DoubleSlitParams),
    /// User-supplied callables.
    Custom(Arc<CustomPotential>),
}

/// A potential paired with its validated dimension.
#[derive(Debug, Clone)]
pub struct PotentialModel {
    potential: Potential,
    dimension: usize,
}

impl PotentialModel {
    pub fn new(potential: Potential, dimension: usize) -> Result<Self, PotentialError> {
        let name_req: Option<(&'static str, usize)> = match &potential {
            Potential::Harmonic => None,
            Potential::DoubleWell => Some(("double well", 1)),
            Potential::DoubleSlit(params) => {
                params.validate()?;
                Some(("double slit", 2))
            }
            Potential::Custom(c) => Some(("custom", c.dimension)),
        };
        if let Some((name, required)) = name_req {
            if dimension != required {
                return Err(PotentialError::DimensionMismatch {
                    name,
                    required,
                    got: dimension,
                });
            }
        }
        if dimension == 0 {
            return Err(PotentialError::DimensionMismatch {
                name: "any potential",
                required: 1,
                got: 0,
            });
        }
        Ok(PotentialModel {
            potential,
            dimension,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        match &self.potential {
            Potential::Harmonic => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            Potential::DoubleWell => {
                let q = x[0];
                q * q * (2.0 * q * q - 1.0)
            }
            Potential::DoubleSlit(p) => {
                let (a, _, _) = p.transverse(x[0]);
                let (t, _, _) = p.longitudinal(x[1]);
                p.height * a * t
            }
            Potential::Custom(c) => (c.value)(x),
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dimension);
        debug_assert_eq!(out.len(), self.dimension);
        match &self.potential {
            Potential::Harmonic => out.copy_from_slice(x),
            Potential::DoubleWell => {
                let q = x[0];
                out[0] = -2.0 * q + 8.0 * q * q * q;
            }
            Potential::DoubleSlit(p) => {
                let (a, da, _) = p.transverse(x[0]);
                let (t, dt, _) = p.longitudinal(x[1]);
                out[0] = p.height * da * t;
                out[1] = p.height * a * dt;
            }
            Potential::Custom(c) => (c.gradient)(x, out),
        }
    }

    /// Row-major dimension x dimension Hessian.
    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dimension;
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(out.len(), d * d);
        match &self.potential {
            Potential::Harmonic => {
                out.fill(0.0);
                for i in 0..d {
                    out[i * d + i] = 1.0;
                }
            }
            Potential::DoubleWell => {
                let q = x[0];
                out[0] = -2.0 + 24.0 * q * q;
            }
            Potential::DoubleSlit(p) => {
                let (a, da, d2a) = p.transverse(x[0]);
                let (t, dt, d2t) = p.longitudinal(x[1]);
                out[0] = p.height * d2a * t;
                out[1] = p.height * da * dt;
                out[2] = out[1];
                out[3] = p.height * a * d2t;
            }
            Potential::Custom(c) => (c.hessian)(x, out),
        }
    }
}

/// A potential plus the bath-induced quadratic shift: the trajectories
/// evolve under `V(x) + shift * |x|^2`.
#[derive(Debug, Clone)]
pub struct EffectivePotential {
    model: PotentialModel,
    quadratic_shift: f64,
}

impl EffectivePotential {
    pub fn new(model: PotentialModel, quadratic_shift: f64) -> Self {
        EffectivePotential {
            model,
            quadratic_shift,
        }
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension()
    }

    pub fn quadratic_shift(&self) -> f64 {
        self.quadratic_shift
    }

    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.model.value(x) + self.quadratic_shift * x.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.model.gradient(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o += 2.0 * self.quadratic_shift * xi;
        }
    }

    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        self.model.hessian(x, out);
        let d = self.model.dimension();
        for i in 0..d {
            out[i * d + i] += 2.0 * self.quadratic_shift;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_real;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn smoothstep_endpoint_conditions() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep_d1(0.0), 0.0);
        assert_eq!(smoothstep_d1(1.0), 0.0);
        assert_eq!(smoothstep_d2(0.0), 0.0);
        assert_eq!(smoothstep_d2(1.0), 0.0);
        // monotone on [0, 1]
        for i in 0..=100 {
            assert!(smoothstep_d1(i as f64 / 100.0) >= 0.0);
        }
    }

    /// Independent derivation of the smoothstep coefficients: solve the 6x6
    /// linear system for the quintic with the C^2 endpoint conditions and
    /// compare against the closed form used by the implementation.
    #[test]
    fn smoothstep_coefficients_from_linear_system() {
        // unknowns a0..a5 of f(t) = sum a_k t^k
        // rows: f(0)=0, f'(0)=0, f''(0)=0, f(1)=1, f'(1)=0, f''(1)=0
        let mut a = vec![0.0f64; 36];
        let b = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        a[0] = 1.0; // f(0): a0
        a[6 + 1] = 1.0; // f'(0): a1
        a[12 + 2] = 2.0; // f''(0): 2 a2
        for k in 0..6 {
            a[18 + k] = 1.0; // f(1)
            a[24 + k] = k as f64; // f'(1)
            a[30 + k] = (k * k) as f64 - k as f64; // f''(1): k(k-1)
        }
        let coeffs = solve_real(a, 6, b).unwrap();
        let want = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
        for (got, want) in coeffs.iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "coeffs {coeffs:?}");
        }
        // and the closed form matches the polynomial at interior points
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let poly: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * t.powi(k as i32))
                .sum();
            assert!((smoothstep(t) - poly).abs() < 1e-13);
        }
    }

    #[test]
    fn smoothstep_derivatives_by_finite_difference() {
        // step sizes balance truncation against rounding per derivative order
        let h1 = 1e-6;
        let h2 = 1e-4;
        for i in 1..10 {
            let t = i as f64 / 10.0;
            let fd1 = (smoothstep(t + h1) - smoothstep(t - h1)) / (2.0 * h1);
            assert!((fd1 - smoothstep_d1(t)).abs() < 1e-7);
            let fd2 =
                (smoothstep(t + h2) - 2.0 * smoothstep(t) + smoothstep(t - h2)) / (h2 * h2);
            assert!((fd2 - smoothstep_d2(t)).abs() < 1e-5);
        }
    }

    #[test]
    fn double_well_shape() {
        let model = PotentialModel::new(Potential::DoubleWell, 1).unwrap();
        // minima at +-1/2 with depth -1/8, local max 0 at the origin
        assert_eq!(model.value(&[0.0]), 0.0);
        assert!((model.value(&[0.5]) + 0.125).abs() < 1e-15);
        assert!((model.value(&[-0.5]) + 0.125).abs() < 1e-15);
        let mut g = [0.0];
        model.gradient(&[0.5], &mut g);
        assert!(g[0].abs() < 1e-15);
        model.gradient(&[-0.5], &mut g);
        assert!(g[0].abs() < 1e-15);
        let mut h = [0.0];
        model.hessian(&[0.5], &mut h);
        assert!((h[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn harmonic_any_dimension() {
        let model = PotentialModel::new(Potential::Harmonic, 3).unwrap();
        let x = [1.0, -2.0, 0.5];
        assert!((model.value(&x) - 0.5 * (1.0 + 4.0 + 0.25)).abs() < 1e-15);
        let mut g = [0.0; 3];
        model.gradient(&x, &mut g);
        assert_eq!(g, x);
        let mut h = [0.0; 9];
        model.hessian(&x, &mut h);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h[i * 3 + j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    fn fd_checks(model: &PotentialModel, points: &[Vec<f64>], tol_g: f64, tol_h: f64) {
        let d = model.dimension();
        let h = 1e-5;
        for x in points {
            let mut grad = vec![0.0; d];
            model.gradient(x, &mut grad);
            let mut hess = vec![0.0; d * d];
            model.hessian(x, &mut hess);
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (model.value(&xp) - model.value(&xm)) / (2.0 * h);
                assert!(
                    (fd - grad[i]).abs() < tol_g * (1.0 + grad[i].abs()),
                    "gradient mismatch at {x:?} axis {i}: fd {fd} vs {got}",
                    got = grad[i]
                );
                let mut gp = vec![0.0; d];
                let mut gm = vec![0.0; d];
                model.gradient(&xp, &mut gp);
                model.gradient(&xm, &mut gm);
                for j in 0..d {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    assert!(
                        (fd - hess[i * d + j]).abs() < tol_h * (1.0 + hess[i * d + j].abs()),
                        "hessian mismatch at {x:?} ({i},{j}): fd {fd} vs {got}",
                        got = hess[i * d + j]
                    );
                }
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dw = PotentialModel::new(Potential::DoubleWell, 1).unwrap();
        let pts: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random_range(-1.2..1.2)]).collect();
        fd_checks(&dw, &pts, 1e-8, 1e-7);

        let ds = PotentialModel::new(Potential::DoubleSlit(DoubleSlitParams::default()), 2)
            .unwrap();
        // random points plus points inside every smoothing band
        let mut pts: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                vec![
                    rng.random_range(-0.7..0.7),
                    rng.random_range(-0.2..0.2),
                ]
            })
            .collect();
        for x1 in [0.1, 0.37, 0.425, 0.47, 0.52, -0.37, -0.47] {
            for x2 in [0.0, 0.05, 0.11, 0.13, -0.12, 0.2] {
                pts.push(vec![x1, x2]);
            }
        }
        fd_checks(&ds, &pts, 1e-5, 1e-4);
    }

    #[test]
    fn double_slit_invariants() {
        let params = DoubleSlitParams::default();
        let q1 = params.slit_center();
        assert!((q1 - 0.425).abs() < 1e-15);
        let model = PotentialModel::new(Potential::DoubleSlit(params.clone()), 2).unwrap();

        // height at the solid center, zero at the slit centers
        assert!((model.value(&[0.0, 0.0]) - params.height).abs() < 1e-13);
        assert_eq!(model.value(&[q1, 0.0]), 0.0);
        assert_eq!(model.value(&[-q1, 0.0]), 0.0);

        // vanishes outside the slab
        for x1 in [-1.0, 0.0, 0.3, 0.425, 2.0] {
            assert_eq!(model.value(&[x1, params.half_thickness]), 0.0);
            assert_eq!(model.value(&[x1, -0.3]), 0.0);
        }

        // even in x1, and the height is the global maximum
        let mut max = f64::MIN;
        for i in -60..=60 {
            for j in -20..=20 {
                let x = [i as f64 * 0.02, j as f64 * 0.01];
                let v = model.value(&x);
                let mirrored = model.value(&[-x[0], x[1]]);
                assert!((v - mirrored).abs() < 1e-14);
                assert!(v >= 0.0);
                max = max.max(v);
            }
        }
        assert!((max - params.height).abs() < 1e-13);
    }

    #[test]
    fn double_slit_is_c2_at_knots() {
        let params = DoubleSlitParams::default();
        let model = PotentialModel::new(Potential::DoubleSlit(params.clone()), 2).unwrap();
        let a = params.core_half_width;
        let b = params.edge;
        let w = params.slit_width;
        let knots_x1 = [a, a + b, a + b + w, a + 2.0 * b + w];
        let knots_x2 = [params.half_thickness - b, params.half_thickness];
        let eps = 1e-9;
        let d = 2;
        for &k1 in &knots_x1 {
            for &x2 in &[0.0, 0.06] {
                for sign in [1.0, -1.0] {
                    let lo = [sign * k1 - eps, x2];
                    let hi = [sign * k1 + eps, x2];
                    let (mut hl, mut hh) = (vec![0.0; d * d], vec![0.0; d * d]);
                    model.hessian(&lo, &mut hl);
                    model.hessian(&hi, &mut hh);
                    for (l, h) in hl.iter().zip(&hh) {
                        // second derivatives are Lipschitz across the knot
                        assert!(
                            (l - h).abs() < 1e-4 * params.height / (b * b),
                            "hessian jump at x1 knot {k1}"
                        );
                    }
                }
            }
        }
        for &k2 in &knots_x2 {
            let lo = [0.2, k2 - eps];
            let hi = [0.2, k2 + eps];
            let (mut hl, mut hh) = (vec![0.0; d * d], vec![0.0; d * d]);
            model.hessian(&lo, &mut hl);
            model.hessian(&hi, &mut hh);
            for (l, h) in hl.iter().zip(&hh) {
                assert!((l - h).abs() < 1e-4 * params.height / (b * b));
            }
        }
    }

    #[test]
    fn effective_potential_shift() {
        let model = PotentialModel::new(Potential::Harmonic, 2).unwrap();
        let eff = EffectivePotential::new(model, 0.25);
        let x = [1.0, 2.0];
        // (|x|^2)/2 + 0.25 |x|^2 = 0.75 |x|^2
        assert!((eff.value(&x) - 0.75 * 5.0).abs() < 1e-14);
        let mut g = [0.0; 2];
        eff.gradient(&x, &mut g);
        assert!((g[0] - 1.5).abs() < 1e-14);
        assert!((g[1] - 3.0).abs() < 1e-14);
        let mut h = [0.0; 4];
        eff.hessian(&x, &mut h);
        assert!((h[0] - 1.5).abs() < 1e-14);
        assert!((h[3] - 1.5).abs() < 1e-14);
        assert_eq!(h[1], 0.0);
    }

    #[test]
    fn custom_potential_passthrough() {
        let custom = CustomPotential {
            dimension: 1,
            value: Box::new(|x: &[f64]| x[0].powi(4)),
            gradient: Box::new(|x: &[f64], out: &mut [f64]| out[0] = 4.0 * x[0].powi(3)),
            hessian: Box::new(|x: &[f64], out: &mut [f64]| out[0] = 12.0 * x[0] * x[0]),
        };
        let model = PotentialModel::new(Potential::Custom(Arc::new(custom)), 1).unwrap();
        assert!((model.value(&[2.0]) - 16.0).abs() < 1e-14);
        let mut g = [0.0];
        model.gradient(&[2.0], &mut g);
        assert!((g[0] - 32.0).abs() < 1e-14);
        fd_checks(&model, &[vec![0.7], vec![-1.3]], 1e-7, 1e-6);
    }

    #[test]
    fn dimension_validation() {
        assert!(matches!(
            PotentialModel::new(Potential::DoubleWell, 2),
            Err(PotentialError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            PotentialModel::new(Potential::DoubleSlit(DoubleSlitParams::default()), 1),
            Err(PotentialError::DimensionMismatch { .. })
        ));
        assert!(PotentialModel::new(Potential::Harmonic, 0).is_err());
        let mut bad = DoubleSlitParams::default();
        bad.half_thickness = 0.01; // thinner than the smoothing edge
        assert!(matches!(
            PotentialModel::new(Potential::DoubleSlit(bad), 2),
            Err(PotentialError::InvalidSlitParameter { .. })
        ));
    }
}
