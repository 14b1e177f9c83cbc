//! End-to-end run pipeline: build the bath and its low-rank compression,
//! sweep the phase-space grid of frozen-Gaussian trajectories in parallel
//! with deterministic reduction, assemble the influence expansion into the
//! reduced density, and write the density and metadata files.  Also hosts
//! the report operations behind the non-`run` CLI subcommands.

use std::path::{Path, PathBuf};

use crate::bath::{
    correlation_matrix, low_rank_decompose, ohmic_modes, quadratic_shift, BathError,
    BathParameters, LowRankKernel,
};
use crate::config::{ConfigError, InitialKind, PairKernelRoute, PotentialKind, RunConfig};
use crate::dyson::{
    assemble_density, moment_factors, pair_sum_exact, pair_sum_lowrank, primitive_integrals,
    AssemblyOptions, DysonError, DysonLayout, FieldAccumulator,
};
use crate::fga::{
    axis_envelope, axis_overlap, hk_prefactor, FgaError, GridAxis, PhaseSpaceGrid,
    TrajectoryIntegrator, TrajectoryState,
};
use crate::output::{write_density, write_meta, OutputError};
use crate::pool::{ordered_parallel_reduce, DEFAULT_BLOCK_SIZE};
use crate::potentials::{EffectivePotential, Potential, PotentialModel};
use crate::util::erfc;
use crate::wavefunction::InitialWavefunction;
use crate::C64;

/// Fraction of a component's phase-space mass outside the sampling window
/// above which a truncation warning is emitted.
pub const WINDOW_MASS_WARN: f64 = 1e-3;

/// Default memory budget when the configuration does not set one.
pub const DEFAULT_MEMORY_BUDGET_MB: u64 = 4096;

/// Anything that can go wrong over a full run, partitioned by exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("setup: {0}")]
    Setup(String),
    #[error("bath: {0}")]
    Bath(#[from] BathError),
    #[error("trajectory: {0}")]
    Trajectory(#[from] FgaError),
    #[error("assembly: {0}")]
    Assembly(#[from] DysonError),
    #[error("output: {0}")]
    Output(#[from] OutputError),
    #[error(
        "estimated working set {needed_mb} MB exceeds the memory budget {budget_mb} MB \
         (shrink the field table or the output grid, or raise execution.memory_budget_mb)"
    )]
    Memory { needed_mb: u64, budget_mb: u64 },
}

impl RunError {
    /// Process exit code: 2 configuration, 3 numeric/runtime, 4 memory.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => 2,
            RunError::Memory { .. } => 4,
            _ => 3,
        }
    }
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Setup(format!("cannot read {}: {e}", path.display())))?;
    Ok(crate::config::parse_config(&text)?)
}

// ---------------------------------------------------------------------------
// prepared state
// ---------------------------------------------------------------------------

/// Everything derived from the configuration that the sweep needs.
struct Prepared {
    potential: EffectivePotential,
    /// Kernel compression; present only when the expansion is active.
    kernel: Option<LowRankKernel>,
    /// Correlation lags for the exact pair-sum route.
    lags: Vec<C64>,
    layout: DysonLayout,
    effective_nbar: u32,
    phase_grid: PhaseSpaceGrid,
    x_axes: Vec<GridAxis>,
    x_nodes: Vec<Vec<f64>>,
    n_x: usize,
    /// Initial-state tables on the overlap quadrature grids, per axis.
    y_nodes: Vec<Vec<f64>>,
    y_weights: Vec<Vec<f64>>,
    psi_tables: Vec<Vec<C64>>,
    time_weights: Vec<f64>,
    warnings: Vec<String>,
}

fn build_potential(config: &RunConfig) -> Result<EffectivePotential, RunError> {
    let base = match &config.potential {
        PotentialKind::Harmonic => Potential::Harmonic,
        PotentialKind::DoubleWell => Potential::DoubleWell,
        PotentialKind::DoubleSlit(p) => Potential::DoubleSlit(p.clone()),
    };
    let model = PotentialModel::new(base, config.dimension)
        .map_err(|e| RunError::Setup(e.to_string()))?;
    let shift = if config.bath.xi > 0.0 {
        let modes = ohmic_modes(&bath_parameters(config))?;
        quadratic_shift(&modes)
    } else {
        0.0
    };
    Ok(EffectivePotential::new(model, shift))
}

fn bath_parameters(config: &RunConfig) -> BathParameters {
    BathParameters {
        modes: config.bath.modes,
        omega_max: config.bath.omega_max,
        omega_c: config.bath.omega_c,
        beta: config.bath.beta,
        coupling: config.bath.xi,
        epsilon: config.epsilon,
    }
}

fn build_initial(config: &RunConfig) -> InitialWavefunction {
    let eps = config.epsilon;
    match &config.initial {
        InitialKind::WellPair => InitialWavefunction::well_pair(eps),
        InitialKind::HarmonicGround => {
            InitialWavefunction::harmonic_ground(eps, config.dimension)
        }
        InitialKind::WellPairGroundProduct => {
            InitialWavefunction::well_pair_ground_product(eps)
        }
        InitialKind::DoubleSlit { q1, q2, p1, p2 } => {
            InitialWavefunction::double_slit(eps, *q1, *q2, *p1, *p2)
        }
    }
}

fn axes_from(
    mins: &[f64],
    maxs: &[f64],
    steps: &[f64],
    what: &str,
) -> Result<Vec<GridAxis>, RunError> {
    mins.iter()
        .zip(maxs)
        .zip(steps)
        .map(|((&lo, &hi), &step)| {
            GridAxis::new(lo, hi, step)
                .map_err(|e| RunError::Setup(format!("{what} axis: {e}")))
        })
        .collect()
}

/// Phase-space window coverage check: for every complex-Gaussian component
/// of the initial state, estimate the coherent-state (Husimi) mass outside
/// the sampling window on each axis and warn when it exceeds
/// [`WINDOW_MASS_WARN`].
fn window_warnings(config: &RunConfig, initial: &InitialWavefunction) -> Vec<String> {
    let eps = config.epsilon;
    let mut warnings = Vec::new();
    for (d, axis) in initial.axes().iter().enumerate() {
        let Some(components) = axis.gaussian_components() else {
            continue;
        };
        for (c_index, g) in components.iter().enumerate() {
            let a = g.width.im;
            if !(a > 0.0) {
                continue;
            }
            // coherent-state marginals of the component
            let sigma_q = (eps * (1.0 + a) / (2.0 * a)).sqrt();
            let sigma_p = (eps * (1.0 + a) / 2.0).sqrt();
            let outside = |center: f64, lo: f64, hi: f64, sigma: f64| {
                0.5 * (erfc((center - lo) / (std::f64::consts::SQRT_2 * sigma))
                    + erfc((hi - center) / (std::f64::consts::SQRT_2 * sigma)))
            };
            let q_out = outside(g.center, config.grid.q_min[d], config.grid.q_max[d], sigma_q);
            let p_out = outside(
                g.momentum,
                config.grid.p_min[d],
                config.grid.p_max[d],
                sigma_p,
            );
            if q_out > WINDOW_MASS_WARN {
                warnings.push(format!(
                    "axis {} component {}: {:.2e} of its mass lies outside the q window \
                     [{}, {}]",
                    d + 1,
                    c_index + 1,
                    q_out,
                    config.grid.q_min[d],
                    config.grid.q_max[d]
                ));
            }
            if p_out > WINDOW_MASS_WARN {
                warnings.push(format!(
                    "axis {} component {}: {:.2e} of its mass lies outside the p window \
                     [{}, {}]",
                    d + 1,
                    c_index + 1,
                    p_out,
                    config.grid.p_min[d],
                    config.grid.p_max[d]
                ));
            }
        }
    }
    warnings
}

fn prepare(config: &RunConfig, workers: usize) -> Result<Prepared, RunError> {
    let d = config.dimension;
    let potential = build_potential(config)?;
    let initial = build_initial(config);

    // expansion bookkeeping: a switched-off bath collapses to the closed run
    let bath_active = config.bath.xi > 0.0;
    let effective_nbar = if bath_active { config.dyson.nbar } else { 0 };
    let effective_rank = if effective_nbar > 0 { config.dyson.rank } else { 0 };
    let layout = DysonLayout::new(effective_nbar, effective_rank, d);

    // grids
    let p_axes = axes_from(&config.grid.p_min, &config.grid.p_max, &config.grid.dp, "p")?;
    let q_axes = axes_from(&config.grid.q_min, &config.grid.q_max, &config.grid.dq, "q")?;
    let phase_grid = PhaseSpaceGrid::new(p_axes, q_axes);
    let x_axes = axes_from(&config.grid.x_min, &config.grid.x_max, &config.grid.dx, "x")?;
    let x_nodes: Vec<Vec<f64>> = x_axes.iter().map(|a| a.nodes()).collect();
    let n_x: usize = x_axes.iter().map(|a| a.count()).product();
    let y_axes = axes_from(&config.grid.y_min, &config.grid.y_max, &config.grid.dy, "y")?;

    // memory guard before anything large is allocated: the stored fields
    // dominate (one main accumulator plus up to ~3 block partials in flight
    // per worker), with the dense eigensolve workspace next.
    let field_bytes = (layout.field_count() * n_x * 16) as u64;
    let copies = 2 + 3 * workers as u64;
    let eig_bytes = if effective_nbar > 0 {
        3 * ((config.time.n_steps + 1) * (config.time.n_steps + 1) * 16) as u64
    } else {
        0
    };
    let needed = field_bytes * copies + eig_bytes;
    let budget_mb = config
        .execution
        .memory_budget_mb
        .unwrap_or(DEFAULT_MEMORY_BUDGET_MB);
    if needed > budget_mb.saturating_mul(1024 * 1024) {
        return Err(RunError::Memory {
            needed_mb: needed.div_ceil(1024 * 1024),
            budget_mb,
        });
    }

    // bath kernel (only when the expansion is active)
    let (kernel, lags) = if effective_nbar > 0 {
        let modes = ohmic_modes(&bath_parameters(config))?;
        let matrix = correlation_matrix(&modes, config.time.n_steps, config.time.dt);
        let lags = matrix.lags().to_vec();
        let kernel = low_rank_decompose(&matrix, effective_rank)?;
        (Some(kernel), lags)
    } else {
        (None, Vec::new())
    };

    // initial-state tables on the overlap quadrature grids
    let mut y_nodes = Vec::with_capacity(d);
    let mut y_weights = Vec::with_capacity(d);
    let mut psi_tables = Vec::with_capacity(d);
    for (axis_index, axis) in y_axes.iter().enumerate() {
        let nodes = axis.nodes();
        let weights: Vec<f64> = (0..axis.count()).map(|i| axis.weight(i)).collect();
        let table: Vec<C64> = nodes
            .iter()
            .map(|&y| initial.axis(axis_index).evaluate(y))
            .collect();
        y_nodes.push(nodes);
        y_weights.push(weights);
        psi_tables.push(table);
    }

    let warnings = window_warnings(config, &initial);
    Ok(Prepared {
        potential,
        kernel,
        lags,
        layout,
        effective_nbar,
        phase_grid,
        x_axes,
        x_nodes,
        n_x,
        y_nodes,
        y_weights,
        psi_tables,
        time_weights: crate::util::trapezoid_weights(config.time.n_steps, config.time.dt),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// the trajectory sweep
// ---------------------------------------------------------------------------

/// Per-worker scratch for the sweep.
struct SweepScratch {
    integrator: TrajectoryIntegrator,
    primitives: Vec<C64>,
    scalars: Vec<C64>,
    env_axis: Vec<Vec<C64>>,
    env_flat: Vec<C64>,
    odometer: Vec<usize>,
}

/// The accumulated sweep of one configuration: everything needed to
/// assemble densities at any expansion order and retained rank up to the
/// configured ones.
pub struct SweepResult {
    pub config: RunConfig,
    pub layout: DysonLayout,
    pub accumulator: FieldAccumulator,
    /// Retained eigenvalues (empty for closed runs).
    pub lambdas: Vec<f64>,
    pub x_axes: Vec<GridAxis>,
    pub effective_nbar: u32,
    /// Smallest |det Z| seen over all trajectories (caustic diagnostic).
    pub min_abs_det_z: f64,
    pub warnings: Vec<String>,
}

/// Propagate every phase-space node and accumulate the per-field sums.
pub fn sweep(config: &RunConfig, workers: usize) -> Result<SweepResult, RunError> {
    let prep = prepare(config, workers)?;
    let d = config.dimension;
    let eps = config.epsilon;
    let dt = config.time.dt;
    let n_steps = config.time.n_steps;
    let field_count = prep.layout.field_count();
    let prefactor = hk_prefactor(eps, d);
    let route = config.dyson.pair_kernel;
    let nbar = prep.effective_nbar;
    let x_counts: Vec<usize> = prep.x_axes.iter().map(|a| a.count()).collect();
    let (lambdas, vectors): (&[f64], &[Vec<C64>]) = match &prep.kernel {
        Some(k) => (&k.lambdas, &k.vectors),
        None => (&[], &[]),
    };

    let mut main_acc = FieldAccumulator::new(field_count, prep.n_x);
    let mut min_abs_det_z = f64::INFINITY;
    ordered_parallel_reduce(
        prep.phase_grid.node_count(),
        DEFAULT_BLOCK_SIZE,
        workers,
        |_worker| SweepScratch {
            integrator: TrajectoryIntegrator::new(d),
            primitives: vec![C64::new(0.0, 0.0); vectors.len() * d],
            scalars: vec![C64::new(0.0, 0.0); field_count],
            env_axis: x_counts.iter().map(|&n| vec![C64::new(0.0, 0.0); n]).collect(),
            env_flat: vec![C64::new(0.0, 0.0); prep.n_x],
            odometer: vec![0usize; d],
        },
        |scratch, range| -> Result<(FieldAccumulator, f64), RunError> {
            let mut acc = FieldAccumulator::new(field_count, prep.n_x);
            let mut block_min = f64::INFINITY;
            for index in range {
                let (p, q, weight) = prep.phase_grid.node(index);
                let start = TrajectoryState::initial(&p, &q);
                let history = scratch
                    .integrator
                    .evolve(&start, &prep.potential, dt, n_steps)?;
                block_min = block_min.min(history.min_abs_det_z);

                // initial-state overlap, one factor per axis
                let mut overlap = C64::new(1.0, 0.0);
                for axis in 0..d {
                    overlap *= axis_overlap(
                        eps,
                        p[axis],
                        q[axis],
                        &prep.y_nodes[axis],
                        &prep.y_weights[axis],
                        &prep.psi_tables[axis],
                    );
                }
                let phase = C64::from_polar(1.0, history.final_state.action / eps);
                let amplitude =
                    weight * prefactor * history.final_state.amplitude * phase * overlap;

                // influence factors
                let moments = if nbar > 0 {
                    primitive_integrals(
                        &prep.time_weights,
                        &history.q_samples,
                        vectors,
                        &mut scratch.primitives,
                    );
                    let pair = match route {
                        PairKernelRoute::Exact => {
                            pair_sum_exact(&prep.time_weights, &history.q_samples, &prep.lags)
                        }
                        PairKernelRoute::LowRank => pair_sum_lowrank(
                            &prep.time_weights,
                            &history.q_samples,
                            lambdas,
                            vectors,
                        ),
                    };
                    moment_factors(pair, nbar)
                } else {
                    vec![C64::new(1.0, 0.0)]
                };
                prep.layout.field_scalars(
                    &scratch.primitives,
                    &moments,
                    amplitude,
                    &mut scratch.scalars,
                );

                // final-time envelope on the output grid, per axis then flat
                for axis in 0..d {
                    axis_envelope(
                        eps,
                        history.final_state.p[axis],
                        history.final_state.q[axis],
                        &prep.x_nodes[axis],
                        &mut scratch.env_axis[axis],
                    );
                }
                scratch.odometer.fill(0);
                for slot in 0..prep.n_x {
                    let mut v = scratch.env_axis[0][scratch.odometer[0]];
                    for axis in 1..d {
                        v *= scratch.env_axis[axis][scratch.odometer[axis]];
                    }
                    scratch.env_flat[slot] = v;
                    for axis in (0..d).rev() {
                        scratch.odometer[axis] += 1;
                        if scratch.odometer[axis] < x_counts[axis] {
                            break;
                        }
                        scratch.odometer[axis] = 0;
                    }
                }

                acc.accumulate(&scratch.scalars, &scratch.env_flat);
            }
            Ok((acc, block_min))
        },
        |(partial, block_min)| {
            main_acc.merge(&partial);
            min_abs_det_z = min_abs_det_z.min(block_min);
            Ok(())
        },
    )?;

    Ok(SweepResult {
        config: config.clone(),
        layout: prep.layout,
        accumulator: main_acc,
        lambdas: lambdas.to_vec(),
        x_axes: prep.x_axes,
        effective_nbar: nbar,
        min_abs_det_z,
        warnings: prep.warnings,
    })
}

// ---------------------------------------------------------------------------
// assembly and density grids
// ---------------------------------------------------------------------------

/// A real density on the output grid, with assembly diagnostics.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub axes: Vec<GridAxis>,
    /// Row-major values, last axis fastest.
    pub values: Vec<f64>,
    /// Largest |imaginary part| dropped during assembly.
    pub imag_residue: f64,
    /// Largest |density| on the grid.
    pub max_abs: f64,
}

impl DensityGrid {
    /// Trapezoid-quadrature integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        let counts: Vec<usize> = self.axes.iter().map(|a| a.count()).collect();
        let d = self.axes.len();
        let mut odometer = vec![0usize; d];
        let mut total = 0.0;
        for &value in &self.values {
            let mut w = 1.0;
            for axis in 0..d {
                w *= self.axes[axis].weight(odometer[axis]);
            }
            total += w * value;
            for axis in (0..d).rev() {
                odometer[axis] += 1;
                if odometer[axis] < counts[axis] {
                    break;
                }
                odometer[axis] = 0;
            }
        }
        total
    }

    /// Trapezoid-quadrature L2 norm of the difference with another density
    /// on the same grid.
    pub fn l2_diff(&self, other: &DensityGrid) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "grid mismatch");
        let counts: Vec<usize> = self.axes.iter().map(|a| a.count()).collect();
        let d = self.axes.len();
        let mut odometer = vec![0usize; d];
        let mut total = 0.0;
        for (va, vb) in self.values.iter().zip(&other.values) {
            let mut w = 1.0;
            for axis in 0..d {
                w *= self.axes[axis].weight(odometer[axis]);
            }
            let diff = va - vb;
            total += w * diff * diff;
            for axis in (0..d).rev() {
                odometer[axis] += 1;
                if odometer[axis] < counts[axis] {
                    break;
                }
                odometer[axis] = 0;
            }
        }
        total.sqrt()
    }
}

/// Assemble the density from a finished sweep, optionally narrowed to a
/// lower expansion order and retained rank than the sweep was run with.
pub fn assemble(
    sweep: &SweepResult,
    nbar: u32,
    rank_limit: usize,
) -> Result<DensityGrid, RunError> {
    let assembled = assemble_density(
        &sweep.layout,
        &sweep.accumulator,
        &sweep.lambdas,
        AssemblyOptions { nbar, rank_limit },
    )?;
    Ok(DensityGrid {
        axes: sweep.x_axes.clone(),
        values: assembled.values,
        imag_residue: assembled.imag_residue,
        max_abs: assembled.max_abs,
    })
}

/// Assemble at the full configured expansion order and rank.
pub fn assemble_full(sweep: &SweepResult) -> Result<DensityGrid, RunError> {
    assemble(sweep, sweep.effective_nbar, sweep.layout.rank())
}

// ---------------------------------------------------------------------------
// the run operation
// ---------------------------------------------------------------------------

/// Everything a finished run leaves behind.
pub struct RunArtifacts {
    pub run_id: String,
    pub density: DensityGrid,
    pub density_path: PathBuf,
    pub meta_path: PathBuf,
    pub trajectories: u64,
    pub integral: f64,
    pub min_abs_det_z: f64,
    pub warnings: Vec<String>,
}

/// The deterministic `# key=value` header of the output files: run
/// statistics first, then the canonical configuration echo.  Worker count
/// and timing never appear, so reruns are byte-identical.
fn run_header(sweep: &SweepResult, density: &DensityGrid, integral: f64) -> Vec<(String, String)> {
    let mut header: Vec<(String, String)> = vec![
        ("run.id".into(), sweep.config.run_id()),
        ("run.trajectories".into(), sweep.accumulator.trajectories().to_string()),
        // A sweep either completes every trajectory or aborts with a
        // numeric error, so the dropped count is always zero; the key is
        // kept so downstream tooling can rely on its presence.
        ("run.dropped".into(), "0".to_string()),
        ("run.fields".into(), sweep.layout.field_count().to_string()),
        ("run.effective_nbar".into(), sweep.effective_nbar.to_string()),
        ("run.integral".into(), format!("{integral:.16e}")),
        ("run.imag_residue".into(), format!("{:.16e}", density.imag_residue)),
        ("run.max_density".into(), format!("{:.16e}", density.max_abs)),
        ("run.min_abs_det_z".into(), format!("{:.16e}", sweep.min_abs_det_z)),
    ];
    header.extend(sweep.config.canonical_echo());
    header
}

/// Run a configuration end to end and write `<label>.csv` and
/// `<label>.meta` into the output directory (or `output_override`).
pub fn execute(
    config: &RunConfig,
    workers: usize,
    output_override: Option<&Path>,
) -> Result<RunArtifacts, RunError> {
    let sweep_result = sweep(config, workers)?;
    let density = assemble_full(&sweep_result)?;
    let integral = density.integral();

    let directory: PathBuf = match output_override {
        Some(path) => path.to_path_buf(),
        None => PathBuf::from(&config.output.directory),
    };
    std::fs::create_dir_all(&directory)
        .map_err(|e| RunError::Setup(format!("cannot create {}: {e}", directory.display())))?;
    let density_path = directory.join(format!("{}.csv", config.output.label));
    let meta_path = directory.join(format!("{}.meta", config.output.label));
    let header = run_header(&sweep_result, &density, integral);
    write_density(&density_path, &header, &density.axes, &density.values)?;
    write_meta(&meta_path, &header)?;

    Ok(RunArtifacts {
        run_id: config.run_id(),
        trajectories: sweep_result.accumulator.trajectories(),
        integral,
        min_abs_det_z: sweep_result.min_abs_det_z,
        warnings: sweep_result.warnings.clone(),
        density,
        density_path,
        meta_path,
    })
}

// ---------------------------------------------------------------------------
// report operations (bath / lowrank / verify)
// ---------------------------------------------------------------------------

/// Textual report on the discretized bath: mode range, couplings, the
/// induced quadratic shift, and the correlation function at a few lags.
pub fn bath_report(config: &RunConfig) -> Result<String, RunError> {
    use std::fmt::Write;
    if config.bath.xi <= 0.0 {
        return Ok("bath: switched off (xi = 0); runs are closed-system\n".to_string());
    }
    let modes = ohmic_modes(&bath_parameters(config))?;
    let shift = quadratic_shift(&modes);
    let l = modes.omegas.len();
    let mut text = String::new();
    let _ = writeln!(text, "bath: {l} modes, xi = {}", config.bath.xi);
    let _ = writeln!(
        text,
        "  omega_1 = {:.6}, omega_L = {:.6} (cutoff {})",
        modes.omegas[0],
        modes.omegas[l - 1],
        config.bath.omega_max
    );
    let _ = writeln!(
        text,
        "  c_1 = {:.6e}, c_L = {:.6e}",
        modes.couplings[0],
        modes.couplings[l - 1]
    );
    let _ = writeln!(text, "  quadratic potential shift = {shift:.10e}");
    for tau in [0.0, config.time.dt, 10.0 * config.time.dt, config.time.t_final] {
        let b = modes.correlation(tau);
        let _ = writeln!(text, "  B({tau:.6}) = {:.10e} {:+.10e} i", b.re, b.im);
    }
    Ok(text)
}

/// Error-versus-rank study of the correlation-matrix compression: one
/// eigendecomposition, then the exact discarded-tail norm for each rank.
pub fn lowrank_report(config: &RunConfig, ranks: &[usize]) -> Result<String, RunError> {
    use std::fmt::Write;
    if config.bath.xi <= 0.0 {
        return Ok("lowrank: bath switched off (xi = 0); nothing to compress\n".to_string());
    }
    if ranks.is_empty() {
        return Err(RunError::Setup("no ranks requested".into()));
    }
    let modes = ohmic_modes(&bath_parameters(config))?;
    let matrix = correlation_matrix(&modes, config.time.n_steps, config.time.dt);
    let max_rank = *ranks.iter().max().unwrap();
    let kernel = low_rank_decompose(&matrix, max_rank.min(matrix.dim()))?;
    let total = kernel.matrix_frobenius;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "correlation matrix: {n} x {n}, ||B||_F = {total:.10e}",
        n = matrix.dim()
    );
    let _ = writeln!(text, "  rank    tail ||B - B_r||_F    relative");
    for &r in ranks {
        if r == 0 || r > matrix.dim() {
            let _ = writeln!(text, "  {r:<6}  out of range 1..={}", matrix.dim());
            continue;
        }
        // exact discarded-tail norm from the spectrum
        let tail: f64 = kernel.spectrum[r..].iter().map(|l| l * l).sum::<f64>().sqrt();
        let _ = writeln!(text, "  {r:<6}  {tail:.10e}      {:.3e}", tail / total);
    }
    Ok(text)
}

/// Quick built-in self-checks: pairing counts, the factorized moment
/// identity, compression exactness at full rank, and the closed-form
/// harmonic trajectory.  Returns the report and whether every check passed.
pub fn verify_report() -> (String, bool) {
    use std::fmt::Write;
    let mut text = String::new();
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        let _ = writeln!(text, "{} {name}{detail}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    };

    // pairing counts match the double factorial
    let counts: Vec<usize> = [2u32, 4, 6]
        .iter()
        .map(|&m| crate::oracle::wick_pairings(m as usize).len())
        .collect();
    check(
        "pairing counts (1, 3, 15)",
        counts == vec![1, 3, 15],
        format!(": got {counts:?}"),
    );

    // factorized moments against the ordered-tuple sum on a small grid
    let n = 12usize;
    let dt = 0.1;
    let tw = crate::util::trapezoid_weights(n, dt);
    let q: Vec<Vec<f64>> = vec![(0..=n).map(|i| (0.3 * i as f64).sin() + 0.2).collect()];
    let lags: Vec<C64> = (0..=n)
        .map(|l| C64::new((-0.5 * l as f64 * dt).exp(), -0.1 * (l as f64 * dt).sin()))
        .collect();
    let pair = pair_sum_exact(&tw, &q, &lags);
    let brute = {
        // direct time-ordered double sum
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..=n {
            for j in 0..=i {
                let w = if i == j { 0.5 } else { 1.0 };
                acc -= w * tw[i] * tw[j] * q[0][i] * q[0][j] * lags[i - j];
            }
        }
        acc
    };
    check(
        "pair sum against the direct double sum",
        (pair - brute).norm() < 1e-12 * brute.norm().max(1.0),
        format!(": |diff| = {:.3e}", (pair - brute).norm()),
    );

    // full-rank compression reproduces the matrix
    let params = BathParameters {
        modes: 40,
        omega_max: 10.0,
        omega_c: 2.5,
        beta: 5.0,
        coupling: 1.0,
        epsilon: 0.25,
    };
    let compress_ok = match ohmic_modes(&params) {
        Ok(modes) => {
            let matrix = correlation_matrix(&modes, 24, 0.05);
            match low_rank_decompose(&matrix, matrix.dim()) {
                Ok(kernel) => {
                    let err = kernel.reconstruction_error(&matrix);
                    check(
                        "full-rank compression reproduces the kernel",
                        err < 1e-10 * kernel.matrix_frobenius,
                        format!(": residual = {err:.3e}"),
                    );
                    true
                }
                Err(e) => {
                    check("full-rank compression reproduces the kernel", false, format!(": {e}"));
                    false
                }
            }
        }
        Err(e) => {
            check("full-rank compression reproduces the kernel", false, format!(": {e}"));
            false
        }
    };
    let _ = compress_ok;

    // closed-form harmonic trajectory
    let potential = EffectivePotential::new(
        PotentialModel::new(Potential::Harmonic, 1).expect("harmonic model"),
        0.0,
    );
    let mut integrator = TrajectoryIntegrator::new(1);
    let start = TrajectoryState::initial(&[0.7], &[-0.4]);
    let t = 1.5;
    let steps = 600;
    let traj_ok = match integrator.evolve(&start, &potential, t / steps as f64, steps) {
        Ok(history) => {
            let s = &history.final_state;
            let q_want = -0.4 * t.cos() + 0.7 * t.sin();
            let p_want = 0.7 * t.cos() + 0.4 * t.sin();
            let amp_want = C64::from_polar(2f64.sqrt(), -0.5 * t);
            (s.q[0] - q_want).abs() < 1e-9
                && (s.p[0] - p_want).abs() < 1e-9
                && (s.amplitude - amp_want).norm() < 1e-9
        }
        Err(_) => false,
    };
    check(
        "harmonic trajectory matches the closed form",
        traj_ok,
        String::new(),
    );

    (text, all_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::oracle::quadratic_wavefunction;
    use crate::wavefunction::AxisState;

    /// A small closed harmonic run: eps = 1/16, ground state, t = 0.5.
    fn closed_harmonic_ini(dir: &str) -> String {
        format!(
            r#"
[system]
dimension = 1
epsilon = 0.0625

[potential]
kind = harmonic

[initial]
kind = harmonic_ground

[bath]
modes = 0
omega_max = 0
omega_c = 0
beta = 0
xi = 0.0

[grid]
p_min = -1.5
p_max = 1.5
dp = 0.125
q_min = -1.5
q_max = 1.5
dq = 0.125
x_min = -2
x_max = 2
dx = 0.0625

[time]
t_final = 0.5
dt = 0.01

[dyson]
nbar = 0
rank = 0

[output]
directory = {dir}
label = closed-harmonic
"#
        )
    }

    /// A small open run: harmonic + weak bath, first-order expansion.
    fn open_harmonic_ini(dir: &str) -> String {
        closed_harmonic_ini(dir)
            .replace("modes = 0", "modes = 40")
            .replace("omega_max = 0", "omega_max = 10")
            .replace("omega_c = 0", "omega_c = 2.5")
            .replace("beta = 0", "beta = 5")
            .replace("xi = 0.0", "xi = 0.4")
            .replace("nbar = 0", "nbar = 1")
            .replace("rank = 0", "rank = 4")
    }

    #[test]
    fn closed_harmonic_ground_state_is_stationary() {
        let config = parse_config(&closed_harmonic_ini("unused")).unwrap();
        let result = sweep(&config, 1).unwrap();
        let density = assemble_full(&result).unwrap();

        // the ground state is stationary: the density stays |psi_0|^2
        let eps = config.epsilon;
        let reference = AxisState::GroundGaussian { epsilon: eps };
        let exact: Vec<f64> = density.axes[0]
            .nodes()
            .iter()
            .map(|&x| reference.evaluate(x).norm_sqr())
            .collect();
        let mut err2 = 0.0;
        let mut norm2 = 0.0;
        for i in 0..exact.len() {
            let w = density.axes[0].weight(i);
            err2 += w * (density.values[i] - exact[i]).powi(2);
            norm2 += w * exact[i] * exact[i];
        }
        let rel = (err2 / norm2).sqrt();
        assert!(rel < 2e-2, "relative L2 error {rel}");
        let integral = density.integral();
        assert!((integral - 1.0).abs() < 2e-2, "integral {integral}");
        assert!(density.imag_residue < 1e-12 * density.max_abs.max(1.0));
    }

    #[test]
    fn closed_run_matches_moving_packet_oracle() {
        // off-center two-lobe state in the harmonic well: the packet
        // genuinely sloshes, and the closed-form propagation is exact
        let ini = closed_harmonic_ini("unused")
            .replace("kind = harmonic_ground", "kind = well_pair")
            .replace("t_final = 0.5", "t_final = 0.8");
        let config = parse_config(&ini).unwrap();

        let result = sweep(&config, 1).unwrap();
        let density = assemble_full(&result).unwrap();

        // oracle: evolve the same Gaussian components in closed form
        let eps = config.epsilon;
        let comps = AxisState::WellPair { epsilon: eps }
            .gaussian_components()
            .unwrap();
        let t = config.time.t_final;
        let nodes = density.axes[0].nodes();
        let exact: Vec<f64> = nodes
            .iter()
            .map(|&x| quadratic_wavefunction(&comps, 1.0, eps, t, x).norm_sqr())
            .collect();
        let start: Vec<f64> = nodes
            .iter()
            .map(|&x| quadratic_wavefunction(&comps, 1.0, eps, 0.0, x).norm_sqr())
            .collect();
        let mut err2 = 0.0;
        let mut norm2 = 0.0;
        let mut moved2 = 0.0;
        for i in 0..exact.len() {
            let w = density.axes[0].weight(i);
            err2 += w * (density.values[i] - exact[i]).powi(2);
            norm2 += w * exact[i] * exact[i];
            moved2 += w * (exact[i] - start[i]).powi(2);
        }
        let rel = (err2 / norm2).sqrt();
        assert!(rel < 3e-2, "relative L2 error vs closed form: {rel}");
        // guard against the check degenerating into a stationary state
        assert!(
            moved2.sqrt() > 0.3 * norm2.sqrt(),
            "the reference density barely moved"
        );
    }

    #[test]
    fn sweep_is_bitwise_worker_independent() {
        let config = parse_config(
            &closed_harmonic_ini("unused")
                .replace("dp = 0.125", "dp = 0.25")
                .replace("dq = 0.125", "dq = 0.25")
                .replace("t_final = 0.5", "t_final = 0.1"),
        )
        .unwrap();
        let one = sweep(&config, 1).unwrap();
        let three = sweep(&config, 3).unwrap();
        assert_eq!(one.accumulator.trajectories(), three.accumulator.trajectories());
        for f in 0..one.layout.field_count() {
            let a = one.accumulator.field(f);
            let b = three.accumulator.field(f);
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        assert_eq!(one.min_abs_det_z.to_bits(), three.min_abs_det_z.to_bits());
    }

    #[test]
    fn switched_off_bath_collapses_to_one_field() {
        // nbar > 0 with xi = 0 must behave exactly like a closed run
        let ini = closed_harmonic_ini("unused")
            .replace("nbar = 0", "nbar = 3")
            .replace("rank = 0", "rank = 5")
            .replace("dp = 0.125", "dp = 0.5")
            .replace("dq = 0.125", "dq = 0.5")
            .replace("t_final = 0.5", "t_final = 0.1");
        let config = parse_config(&ini).unwrap();
        let result = sweep(&config, 1).unwrap();
        assert_eq!(result.effective_nbar, 0);
        assert_eq!(result.layout.field_count(), 1);
        assert!(result.lambdas.is_empty());
    }

    #[test]
    fn open_run_stays_normalized_and_real() {
        let dir = tempfile::tempdir().unwrap();
        let ini = open_harmonic_ini(dir.path().to_str().unwrap())
            .replace("dp = 0.125", "dp = 0.25")
            .replace("dq = 0.125", "dq = 0.25");
        let config = parse_config(&ini).unwrap();
        let artifacts = execute(&config, 2, None).unwrap();
        // weak coupling, short time: the expansion barely shifts the norm
        assert!(
            (artifacts.integral - 1.0).abs() < 5e-2,
            "integral {}",
            artifacts.integral
        );
        assert!(
            artifacts.density.imag_residue < 1e-10 * artifacts.density.max_abs,
            "imag residue {}",
            artifacts.density.imag_residue
        );
        assert!(artifacts.density_path.exists());
        assert!(artifacts.meta_path.exists());

        // the files read back and diff to zero against themselves
        let file = crate::output::read_density(&artifacts.density_path).unwrap();
        assert_eq!(file.values.len(), artifacts.density.values.len());
        assert_eq!(file.header_value("run.id"), Some(artifacts.run_id.as_str()));
        let report = crate::output::diff_density(&file, &file).unwrap();
        assert_eq!(report.l2, 0.0);
    }

    #[test]
    fn narrowed_assembly_matches_narrow_sweep() {
        // sweep at nbar = 2, assemble at nbar = 1, compare with a direct
        // nbar = 1 sweep: the stored-field convention makes them identical
        let dir = tempfile::tempdir().unwrap();
        let wide_ini = open_harmonic_ini(dir.path().to_str().unwrap())
            .replace("nbar = 1", "nbar = 2")
            .replace("dp = 0.25", "dp = 0.5")
            .replace("dq = 0.25", "dq = 0.5")
            .replace("dp = 0.125", "dp = 0.5")
            .replace("dq = 0.125", "dq = 0.5")
            .replace("t_final = 0.5", "t_final = 0.2");
        let wide_cfg = parse_config(&wide_ini).unwrap();
        let narrow_cfg = parse_config(&wide_ini.replace("nbar = 2", "nbar = 1")).unwrap();

        let wide = sweep(&wide_cfg, 1).unwrap();
        let narrow = sweep(&narrow_cfg, 1).unwrap();
        let from_wide = assemble(&wide, 1, wide.layout.rank()).unwrap();
        let direct = assemble_full(&narrow).unwrap();
        for (a, b) in from_wide.values.iter().zip(&direct.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn memory_guard_refuses_oversized_runs() {
        let ini = open_harmonic_ini("unused")
            .replace("nbar = 1", "nbar = 5")
            .replace("rank = 4", "rank = 12")
            .replace("dx = 0.0625", "dx = 0.0001")
            + "\n[execution]\nmemory_budget_mb = 8\n";
        let config = parse_config(&ini).unwrap();
        match sweep(&config, 4) {
            Err(RunError::Memory { needed_mb, budget_mb }) => {
                assert_eq!(budget_mb, 8);
                assert!(needed_mb > 8);
            }
            Err(other) => panic!("expected the memory guard, got {other}"),
            Ok(_) => panic!("expected the memory guard, got a finished sweep"),
        }
        assert_eq!(
            RunError::Memory { needed_mb: 9, budget_mb: 8 }.exit_code(),
            4
        );
    }

    #[test]
    fn window_warnings_fire_for_clipped_states() {
        // shift the q window away from the packet: warnings must appear
        let ini = closed_harmonic_ini("unused")
            .replace("q_min = -1.5", "q_min = 0.5")
            .replace("t_final = 0.5", "t_final = 0.1");
        let config = parse_config(&ini).unwrap();
        let result = sweep(&config, 1).unwrap();
        assert!(
            result.warnings.iter().any(|w| w.contains("q window")),
            "warnings: {:?}",
            result.warnings
        );
        // well-covered windows stay silent
        let happy = parse_config(&closed_harmonic_ini("unused")).unwrap();
        assert!(prepare(&happy, 1).unwrap().warnings.is_empty());
    }

    #[test]
    fn reports_render() {
        let dir = tempfile::tempdir().unwrap();
        let config = parse_config(&open_harmonic_ini(dir.path().to_str().unwrap())).unwrap();
        let bath = bath_report(&config).unwrap();
        assert!(bath.contains("40 modes"));
        assert!(bath.contains("quadratic potential shift"));
        let lowrank = lowrank_report(&config, &[1, 2, 4]).unwrap();
        assert!(lowrank.contains("rank"));
        // rank 4 tail is no larger than rank 1 tail
        let closed = parse_config(&closed_harmonic_ini("unused")).unwrap();
        assert!(bath_report(&closed).unwrap().contains("switched off"));

        let (verify_text, ok) = verify_report();
        assert!(ok, "verify self-checks failed:\n{verify_text}");
        assert_eq!(verify_text.matches("PASS").count(), 4);
    }

    #[test]
    fn exit_codes_partition_errors() {
        let config_err: RunError = ConfigError::MissingSection("time".into()).into();
        assert_eq!(config_err.exit_code(), 2);
        assert_eq!(RunError::Setup("x".into()).exit_code(), 2);
        let numeric: RunError = FgaError::NonFinite { step: 3 }.into();
        assert_eq!(numeric.exit_code(), 3);
        assert_eq!(
            RunError::Memory { needed_mb: 1, budget_mb: 0 }.exit_code(),
            4
        );
    }
}
