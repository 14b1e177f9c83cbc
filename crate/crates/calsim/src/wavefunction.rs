//! Initial wavefunctions, represented as tensor products of per-axis
//! factors.  Every built-in factor is normalized to unit L2 norm in closed
//! form, and the Gaussian ones expose their complex-Gaussian components so
//! closed-form propagation oracles can evolve the same state analytically.

use crate::C64;

/// A single complex Gaussian on one axis:
/// ```text
///   g(x) = coefficient * exp( i [ A (x-center)^2 / 2 + momentum (x-center) ] / eps )
/// ```
/// with Im(A) > 0 for normalizability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1d {
    pub coefficient: C64,
    pub center: f64,
    pub momentum: f64,
    /// Complex width parameter A.
    pub width: C64,
}

impl Gaussian1d {
    /// Evaluate the Gaussian at `x` for semiclassical scale `eps`.
    pub fn evaluate(&self, eps: f64, x: f64) -> C64 {
        let dx = x - self.center;
        let phase = 0.5 * self.width * dx * dx + self.momentum * dx;
        self.coefficient * (C64::new(0.0, 1.0) * phase / eps).exp()
    }
}

/// One axis factor of an initial wavefunction.
#[derive(Debug, Clone)]
pub enum AxisState {
    /// Two-lobe packet seated in the symmetric double well: lobes of
    /// half-width-parameter 4 eps at x = +-1/2 with relative weight 4/5,
    /// normalized exactly.
    WellPair { epsilon: f64 },
    /// Ground state of the unit harmonic well:
    /// (pi eps)^{-1/4} exp(-x^2/(2 eps)).
    GroundGaussian { epsilon: f64 },
    /// Symmetric pair of slit-aligned lobes (width parameter 8 eps at
    /// x = +-center) carrying the transverse drift phase
    /// exp(i momentum x / (4 eps)).
    SlitPair {
        epsilon: f64,
        center: f64,
        momentum: f64,
    },
    /// Single approach lobe (width parameter 8 eps at x = center) carrying
    /// the longitudinal drift phase exp(i momentum x / (4 eps)).
    SlitLobe {
        epsilon: f64,
        center: f64,
        momentum: f64,
    },
    /// Tabulated samples on a uniform grid x0 + i dx, linearly
    /// interpolated, zero outside the table.
    Table { x0: f64, dx: f64, values: Vec<C64> },
}

impl AxisState {
    /// Evaluate the axis factor at `x`.
    pub fn evaluate(&self, x: f64) -> C64 {
        match self {
            AxisState::WellPair { epsilon } => {
                let eps = *epsilon;
                let norm = 5.0 / (41.0 + 40.0 * (-1.0 / (8.0 * eps)).exp()).sqrt()
                    / (2.0 * std::f64::consts::PI * eps).powf(0.25);
                let right = (-(x - 0.5) * (x - 0.5) / (4.0 * eps)).exp();
                let left = (-(x + 0.5) * (x + 0.5) / (4.0 * eps)).exp();
                C64::new(norm * (right + 0.8 * left), 0.0)
            }
            AxisState::GroundGaussian { epsilon } => {
                let eps = *epsilon;
                let norm = (std::f64::consts::PI * eps).powf(-0.25);
                C64::new(norm * (-x * x / (2.0 * eps)).exp(), 0.0)
            }
            AxisState::SlitPair {
                epsilon,
                center,
                momentum,
            } => {
                let eps = *epsilon;
                let q = *center;
                let norm = 1.0
                    / (4.0 * (std::f64::consts::PI * eps).sqrt()
                        * (1.0 + (-q * q / (4.0 * eps)).exp()))
                    .sqrt();
                let lobes = (-(x - q) * (x - q) / (8.0 * eps)).exp()
                    + (-(x + q) * (x + q) / (8.0 * eps)).exp();
                let phase = C64::new(0.0, momentum * x / (4.0 * eps)).exp();
                norm * lobes * phase
            }
            AxisState::SlitLobe {
                epsilon,
                center,
                momentum,
            } => {
                let eps = *epsilon;
                let norm = (4.0 * std::f64::consts::PI * eps).powf(-0.25);
                let lobe = (-(x - center) * (x - center) / (8.0 * eps)).exp();
                let phase = C64::new(0.0, momentum * x / (4.0 * eps)).exp();
                norm * lobe * phase
            }
            AxisState::Table { x0, dx, values } => {
                let pos = (x - x0) / dx;
                if pos < 0.0 {
                    return C64::new(0.0, 0.0);
                }
                let i = pos.floor() as usize;
                if i + 1 >= values.len() {
                    if i + 1 == values.len() && (pos - i as f64).abs() < 1e-12 {
                        return values[i];
                    }
                    return C64::new(0.0, 0.0);
                }
                let frac = pos - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// The complex-Gaussian components of this factor, if it is a finite
    /// sum of Gaussians (everything except `Table`).
    pub fn gaussian_components(&self) -> Option<Vec<Gaussian1d>> {
        let i = C64::new(0.0, 1.0);
        match self {
            AxisState::WellPair { epsilon } => {
                let eps = *epsilon;
                let norm = 5.0 / (41.0 + 40.0 * (-1.0 / (8.0 * eps)).exp()).sqrt()
                    / (2.0 * std::f64::consts::PI * eps).powf(0.25);
                // exp(-(x-c)^2/(4 eps)) = exp(i A (x-c)^2/(2 eps)), A = i/2
                Some(vec![
                    Gaussian1d {
                        coefficient: C64::new(norm, 0.0),
                        center: 0.5,
                        momentum: 0.0,
                        width: 0.5 * i,
                    },
                    Gaussian1d {
                        coefficient: C64::new(0.8 * norm, 0.0),
                        center: -0.5,
                        momentum: 0.0,
                        width: 0.5 * i,
                    },
                ])
            }
            AxisState::GroundGaussian { epsilon } => {
                let eps = *epsilon;
                let norm = (std::f64::consts::PI * eps).powf(-0.25);
                Some(vec![Gaussian1d {
                    coefficient: C64::new(norm, 0.0),
                    center: 0.0,
                    momentum: 0.0,
                    width: i,
                }])
            }
            AxisState::SlitPair {
                epsilon,
                center,
                momentum,
            } => {
                let eps = *epsilon;
                let q = *center;
                let k = momentum / 4.0;
                let norm = 1.0
                    / (4.0 * (std::f64::consts::PI * eps).sqrt()
                        * (1.0 + (-q * q / (4.0 * eps)).exp()))
                    .sqrt();
                // exp(i k x / eps) = exp(i k (x-c)/eps) * exp(i k c/eps)
                Some(vec![
                    Gaussian1d {
                        coefficient: norm * (i * k * q / eps).exp(),
                        center: q,
                        momentum: k,
                        width: 0.25 * i,
                    },
                    Gaussian1d {
                        coefficient: norm * (-i * k * q / eps).exp(),
                        center: -q,
                        momentum: k,
                        width: 0.25 * i,
                    },
                ])
            }
            AxisState::SlitLobe {
                epsilon,
                center,
                momentum,
            } => {
                let eps = *epsilon;
                let k = momentum / 4.0;
                let norm = (4.0 * std::f64::consts::PI * eps).powf(-0.25);
                Some(vec![Gaussian1d {
                    coefficient: norm * (i * k * center / eps).exp(),
                    center: *center,
                    momentum: k,
                    width: 0.25 * i,
                }])
            }
            AxisState::Table { .. } => None,
        }
    }
}

/// A tensor-product initial wavefunction, one [`AxisState`] per dimension.
#[derive(Debug, Clone)]
pub struct InitialWavefunction {
    axes: Vec<AxisState>,
}

impl InitialWavefunction {
    pub fn from_axes(axes: Vec<AxisState>) -> Self {
        assert!(!axes.is_empty(), "wavefunction needs at least one axis");
        InitialWavefunction { axes }
    }

    /// Two-lobe double-well packet, one-dimensional.
    pub fn well_pair(epsilon: f64) -> Self {
        Self::from_axes(vec![AxisState::WellPair { epsilon }])
    }

    /// Product of harmonic ground Gaussians in `dimension` dimensions.
    pub fn harmonic_ground(epsilon: f64, dimension: usize) -> Self {
        Self::from_axes(vec![AxisState::GroundGaussian { epsilon }; dimension])
    }

    /// Two-dimensional product: double-well pair along axis 1, ground
    /// Gaussian along axis 2.
    pub fn well_pair_ground_product(epsilon: f64) -> Self {
        Self::from_axes(vec![
            AxisState::WellPair { epsilon },
            AxisState::GroundGaussian { epsilon },
        ])
    }

    /// Double-slit approach state: symmetric slit-aligned pair along axis 1
    /// centered at +-q1 with transverse drift p1, approach lobe along axis
    /// 2 centered at q2 with longitudinal drift p2.
    pub fn double_slit(epsilon: f64, q1: f64, q2: f64, p1: f64, p2: f64) -> Self {
        Self::from_axes(vec![
            AxisState::SlitPair {
                epsilon,
                center: q1,
                momentum: p1,
            },
            AxisState::SlitLobe {
                epsilon,
                center: q2,
                momentum: p2,
            },
        ])
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AxisState] {
        &self.axes
    }

    pub fn axis(&self, d: usize) -> &AxisState {
        &self.axes[d]
    }

    /// Evaluate the product wavefunction at a point.
    pub fn evaluate(&self, x: &[f64]) -> C64 {
        debug_assert_eq!(x.len(), self.axes.len());
        self.axes
            .iter()
            .zip(x)
            .map(|(axis, xi)| axis.evaluate(*xi))
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Quadrature L2 norm of an axis factor on a wide fine grid.
    fn axis_norm(axis: &AxisState, lo: f64, hi: f64, n: usize) -> f64 {
        let dx = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * dx;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * axis.evaluate(x).norm_sqr();
        }
        (acc * dx).sqrt()
    }

    #[test]
    fn built_in_states_have_unit_norm() {
        struct Case {
            label: &'static str,
            axis: AxisState,
            window: f64,
        }
        let cases = [
            Case {
                label: "well pair eps=1/64",
                axis: AxisState::WellPair { epsilon: 1.0 / 64.0 },
                window: 2.0,
            },
            Case {
                label: "well pair eps=1/16",
                axis: AxisState::WellPair { epsilon: 1.0 / 16.0 },
                window: 3.0,
            },
            Case {
                label: "ground gaussian",
                axis: AxisState::GroundGaussian { epsilon: 1.0 / 64.0 },
                window: 2.0,
            },
            Case {
                label: "slit pair",
                axis: AxisState::SlitPair {
                    epsilon: 1.0 / 16.0,
                    center: 0.425,
                    momentum: 0.0,
                },
                window: 4.0,
            },
            Case {
                label: "slit pair with drift",
                axis: AxisState::SlitPair {
                    epsilon: 1.0 / 16.0,
                    center: 0.425,
                    momentum: 3.0,
                },
                window: 4.0,
            },
            Case {
                label: "slit lobe",
                axis: AxisState::SlitLobe {
                    epsilon: 1.0 / 16.0,
                    center: -1.0,
                    momentum: 8.0,
                },
                window: 4.0,
            },
        ];
        for case in cases {
            let norm = axis_norm(&case.axis, -case.window, case.window, 6000);
            assert!(
                (norm - 1.0).abs() < 1e-10,
                "{}: norm = {norm}",
                case.label
            );
        }
    }

    #[test]
    fn gaussian_components_reproduce_the_state() {
        let axes = [
            AxisState::WellPair { epsilon: 1.0 / 64.0 },
            AxisState::GroundGaussian { epsilon: 1.0 / 16.0 },
            AxisState::SlitPair {
                epsilon: 1.0 / 16.0,
                center: 0.425,
                momentum: 2.5,
            },
            AxisState::SlitLobe {
                epsilon: 1.0 / 16.0,
                center: -1.0,
                momentum: 8.0,
            },
        ];
        let eps_of = |axis: &AxisState| match axis {
            AxisState::WellPair { epsilon }
            | AxisState::GroundGaussian { epsilon }
            | AxisState::SlitPair { epsilon, .. }
            | AxisState::SlitLobe { epsilon, .. } => *epsilon,
            AxisState::Table { .. } => unreachable!(),
        };
        for axis in &axes {
            let eps = eps_of(axis);
            let comps = axis.gaussian_components().expect("components");
            for i in -40..=40 {
                let x = i as f64 * 0.05;
                let direct = axis.evaluate(x);
                let from_comps: C64 = comps.iter().map(|g| g.evaluate(eps, x)).sum();
                assert!(
                    (direct - from_comps).norm() < 1e-13,
                    "mismatch at x = {x}: {direct} vs {from_comps}"
                );
            }
        }
    }

    #[test]
    fn product_evaluation() {
        let psi = InitialWavefunction::well_pair_ground_product(1.0 / 64.0);
        assert_eq!(psi.dimension(), 2);
        let x = [0.4, -0.1];
        let direct = psi.evaluate(&x);
        let product = psi.axis(0).evaluate(0.4) * psi.axis(1).evaluate(-0.1);
        assert!((direct - product).norm() < 1e-15);
    }

    #[test]
    fn double_slit_constructor_defaults() {
        let psi = InitialWavefunction::double_slit(1.0 / 16.0, 0.425, -1.0, 0.0, 8.0);
        assert_eq!(psi.dimension(), 2);
        // peak of |psi| along axis 2 sits at the packet center
        let at_center = psi.axis(1).evaluate(-1.0).norm();
        let off = psi.axis(1).evaluate(-0.4).norm();
        assert!(at_center > off);
        // axis-1 factor is symmetric in magnitude
        let a = psi.axis(0).evaluate(0.425).norm();
        let b = psi.axis(0).evaluate(-0.425).norm();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn table_interpolation() {
        let eps = 1.0 / 16.0;
        let reference = AxisState::GroundGaussian { epsilon: eps };
        let x0 = -2.0;
        let dx = 1e-3;
        let n = 4001usize;
        let values: Vec<C64> = (0..n).map(|i| reference.evaluate(x0 + i as f64 * dx)).collect();
        let table = AxisState::Table { x0, dx, values };
        for i in -15..=15 {
            let x = i as f64 * 0.1 + 0.0005; // off-node points
            let got = table.evaluate(x);
            let want = reference.evaluate(x);
            // linear interpolation carries O(|psi''| dx^2 / 8) error
            assert!((got - want).norm() < 1e-5, "at {x}: {got} vs {want}");
        }
        // outside the table the state vanishes
        assert_eq!(table.evaluate(-3.0), C64::new(0.0, 0.0));
        assert_eq!(table.evaluate(2.5), C64::new(0.0, 0.0));
    }

    #[test]
    fn table_has_no_gaussian_components() {
        let table = AxisState::Table {
            x0: 0.0,
            dx: 1.0,
            values: vec![C64::new(1.0, 0.0); 2],
        };
        assert!(table.gaussian_components().is_none());
    }
}
