//! Run configuration: a small INI dialect (sections, `key = value`, `#`/`;`
//! comments, comma-separated per-axis vectors with scalar broadcast) parsed
//! into a validated [`RunConfig`], plus the canonical key=value echo that
//! output metadata and the run identifier are derived from.

use crate::potentials::DoubleSlitParams;

/// Configuration-stage errors; these map to the configuration exit code.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("missing key '{key}' in section [{section}]")]
    MissingKey { section: String, key: String },
    #[error("[{section}] {key}: {message}")]
    Invalid {
        section: String,
        key: String,
        message: String,
    },
}

// ---------------------------------------------------------------------------
// INI document
// ---------------------------------------------------------------------------

/// A parsed INI document preserving section and key order.
#[derive(Debug, Clone, Default)]
pub struct IniDocument {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl IniDocument {
    /// Parse INI text: `[section]` headers, `key = value` entries, blank
    /// lines and `#`/`;` comment lines ignored.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = IniDocument::default();
        let mut current: Option<usize> = None;
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError::Parse {
                    line,
                    message: "unterminated section header".into(),
                })?;
                let name = name.trim().to_string();
                if name.is_empty() {
                    return Err(ConfigError::Parse {
                        line,
                        message: "empty section name".into(),
                    });
                }
                doc.sections.push((name, Vec::new()));
                current = Some(doc.sections.len() - 1);
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(ConfigError::Parse {
                line,
                message: format!("expected 'key = value', got '{trimmed}'"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    message: "empty key".into(),
                });
            }
            let section = current.ok_or(ConfigError::Parse {
                line,
                message: "key outside of any [section]".into(),
            })?;
            doc.sections[section].1.push((key, value));
        }
        Ok(doc)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .filter(|(name, _)| name == section)
            .flat_map(|(_, entries)| entries.iter())
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.iter().any(|(name, _)| name == section)
    }
}

// ---------------------------------------------------------------------------
// typed configuration
// ---------------------------------------------------------------------------

/// Which confining potential the system moves in.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Harmonic,
    DoubleWell,
    DoubleSlit(DoubleSlitParams),
}

/// Which initial state the run starts from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialKind {
    /// 1-D two-lobe packet in the double well.
    WellPair,
    /// Product of harmonic ground states (any dimension).
    HarmonicGround,
    /// 2-D product: well pair on axis 1, harmonic ground on axis 2.
    WellPairGroundProduct,
    /// 2-D slit approach state centered at (q1, q2) with drift (p1, p2).
    DoubleSlit { q1: f64, q2: f64, p1: f64, p2: f64 },
}

/// Harmonic-bath parameters as configured (xi = 0 switches the bath off).
#[derive(Debug, Clone, PartialEq)]
pub struct BathSection {
    pub modes: usize,
    pub omega_max: f64,
    pub omega_c: f64,
    pub beta: f64,
    pub xi: f64,
}

/// Per-axis sampling and output windows.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    pub dp: Vec<f64>,
    pub q_min: Vec<f64>,
    pub q_max: Vec<f64>,
    pub dq: Vec<f64>,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub dx: Vec<f64>,
    /// Overlap-quadrature windows; when absent they default to the q
    /// window padded by 6 sqrt(eps) with step min(dq, sqrt(eps)/4).
    pub y_min: Vec<f64>,
    pub y_max: Vec<f64>,
    pub dy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSection {
    pub t_final: f64,
    pub dt: f64,
    /// Derived: t_final / dt, validated to be integral.
    pub n_steps: usize,
}

/// How the trajectory pair sum is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKernelRoute {
    Exact,
    LowRank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DysonSection {
    pub nbar: u32,
    pub rank: usize,
    pub pair_kernel: PairKernelRoute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionSection {
    pub workers: Option<usize>,
    pub memory_budget_mb: Option<u64>,
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dimension: usize,
    pub epsilon: f64,
    pub potential: PotentialKind,
    pub initial: InitialKind,
    pub bath: BathSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub dyson: DysonSection,
    pub output: OutputSection,
    pub execution: ExecutionSection,
}

// -- parsing helpers --------------------------------------------------------

fn invalid(section: &str, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        section: section.into(),
        key: key.into(),
        message: message.into(),
    }
}

fn require<'a>(doc: &'a IniDocument, section: &str, key: &str) -> Result<&'a str, ConfigError> {
    if !doc.has_section(section) {
        return Err(ConfigError::MissingSection(section.into()));
    }
    doc.get(section, key).ok_or(ConfigError::MissingKey {
        section: section.into(),
        key: key.into(),
    })
}

fn parse_f64(doc: &IniDocument, section: &str, key: &str) -> Result<f64, ConfigError> {
    let raw = require(doc, section, key)?;
    raw.parse()
        .map_err(|_| invalid(section, key, format!("'{raw}' is not a number")))
}

fn parse_usize(doc: &IniDocument, section: &str, key: &str) -> Result<usize, ConfigError> {
    let raw = require(doc, section, key)?;
    raw.parse()
        .map_err(|_| invalid(section, key, format!("'{raw}' is not a non-negative integer")))
}

fn parse_opt_f64(
    doc: &IniDocument,
    section: &str,
    key: &str,
    default: f64,
) -> Result<f64, ConfigError> {
    match doc.get(section, key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| invalid(section, key, format!("'{raw}' is not a number"))),
        None => Ok(default),
    }
}

/// Comma-separated per-axis vector, broadcasting a single value.
fn parse_vector(
    doc: &IniDocument,
    section: &str,
    key: &str,
    dimension: usize,
) -> Result<Vec<f64>, ConfigError> {
    let raw = require(doc, section, key)?;
    let parts: Result<Vec<f64>, _> = raw.split(',').map(|p| p.trim().parse::<f64>()).collect();
    let parts =
        parts.map_err(|_| invalid(section, key, format!("'{raw}' is not a number list")))?;
    if parts.len() == 1 {
        Ok(vec![parts[0]; dimension])
    } else if parts.len() == dimension {
        Ok(parts)
    } else {
        Err(invalid(
            section,
            key,
            format!("expected 1 or {dimension} values, got {}", parts.len()),
        ))
    }
}

fn parse_opt_vector(
    doc: &IniDocument,
    section: &str,
    key: &str,
    dimension: usize,
) -> Result<Option<Vec<f64>>, ConfigError> {
    if doc.get(section, key).is_none() {
        return Ok(None);
    }
    parse_vector(doc, section, key, dimension).map(Some)
}

/// Parse and validate a full run configuration from INI text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc = IniDocument::parse(text)?;

    // [system]
    let dimension = parse_usize(&doc, "system", "dimension")?;
    if !(1..=3).contains(&dimension) {
        return Err(invalid("system", "dimension", "supported dimensions are 1..3"));
    }
    let epsilon = parse_f64(&doc, "system", "epsilon")?;
    if !(epsilon > 0.0) {
        return Err(invalid("system", "epsilon", "must be positive"));
    }

    // [potential]
    let potential = match require(&doc, "potential", "kind")? {
        "harmonic" => PotentialKind::Harmonic,
        "double_well" => PotentialKind::DoubleWell,
        "double_slit" => {
            let defaults = DoubleSlitParams::default();
            let params = DoubleSlitParams {
                height: parse_opt_f64(&doc, "potential", "height", defaults.height)?,
                core_half_width: parse_opt_f64(
                    &doc,
                    "potential",
                    "core_half_width",
                    defaults.core_half_width,
                )?,
                half_thickness: parse_opt_f64(
                    &doc,
                    "potential",
                    "half_thickness",
                    defaults.half_thickness,
                )?,
                slit_width: parse_opt_f64(&doc, "potential", "slit_width", defaults.slit_width)?,
                edge: parse_opt_f64(&doc, "potential", "edge", defaults.edge)?,
            };
            params
                .validate()
                .map_err(|e| invalid("potential", "kind", e.to_string()))?;
            PotentialKind::DoubleSlit(params)
        }
        other => {
            return Err(invalid(
                "potential",
                "kind",
                format!("unknown potential '{other}' (harmonic, double_well, double_slit)"),
            ))
        }
    };

    // [initial]
    let initial = match require(&doc, "initial", "kind")? {
        "well_pair" => InitialKind::WellPair,
        "harmonic_ground" => InitialKind::HarmonicGround,
        "well_pair_ground_product" => InitialKind::WellPairGroundProduct,
        "double_slit" => InitialKind::DoubleSlit {
            q1: parse_f64(&doc, "initial", "q1")?,
            q2: parse_f64(&doc, "initial", "q2")?,
            p1: parse_f64(&doc, "initial", "p1")?,
            p2: parse_f64(&doc, "initial", "p2")?,
        },
        other => {
            return Err(invalid(
                "initial",
                "kind",
                format!(
                    "unknown initial state '{other}' (well_pair, harmonic_ground, \
                     well_pair_ground_product, double_slit)"
                ),
            ))
        }
    };
    // dimensional consistency
    let initial_dim = match &initial {
        InitialKind::WellPair => Some(1),
        InitialKind::HarmonicGround => None,
        InitialKind::WellPairGroundProduct => Some(2),
        InitialKind::DoubleSlit { .. } => Some(2),
    };
    if let Some(d) = initial_dim {
        if d != dimension {
            return Err(invalid(
                "initial",
                "kind",
                format!("this initial state is {d}-dimensional, system.dimension = {dimension}"),
            ));
        }
    }
    if matches!(initial, InitialKind::DoubleSlit { .. })
        != matches!(potential, PotentialKind::DoubleSlit(_))
    {
        return Err(invalid(
            "initial",
            "kind",
            "the slit initial state and the slit potential must be used together",
        ));
    }

    // [bath]
    let bath = BathSection {
        modes: parse_usize(&doc, "bath", "modes")?,
        omega_max: parse_f64(&doc, "bath", "omega_max")?,
        omega_c: parse_f64(&doc, "bath", "omega_c")?,
        beta: parse_f64(&doc, "bath", "beta")?,
        xi: parse_f64(&doc, "bath", "xi")?,
    };
    if bath.xi < 0.0 {
        return Err(invalid("bath", "xi", "must be non-negative"));
    }
    if bath.xi > 0.0 {
        if bath.modes == 0 {
            return Err(invalid("bath", "modes", "must be positive when xi > 0"));
        }
        if !(bath.omega_max > 0.0) || !(bath.omega_c > 0.0) || !(bath.beta > 0.0) {
            return Err(invalid(
                "bath",
                "omega_max",
                "omega_max, omega_c, beta must be positive when xi > 0",
            ));
        }
    }

    // [grid]
    let eps_pad = 6.0 * epsilon.sqrt();
    let q_min = parse_vector(&doc, "grid", "q_min", dimension)?;
    let q_max = parse_vector(&doc, "grid", "q_max", dimension)?;
    let dq = parse_vector(&doc, "grid", "dq", dimension)?;
    let default_dy: Vec<f64> = dq
        .iter()
        .map(|&step| step.min(epsilon.sqrt() / 4.0))
        .collect();
    let y_min = parse_opt_vector(&doc, "grid", "y_min", dimension)?
        .unwrap_or_else(|| q_min.iter().map(|&v| v - eps_pad).collect());
    let y_max = parse_opt_vector(&doc, "grid", "y_max", dimension)?
        .unwrap_or_else(|| q_max.iter().map(|&v| v + eps_pad).collect());
    let grid = GridSection {
        p_min: parse_vector(&doc, "grid", "p_min", dimension)?,
        p_max: parse_vector(&doc, "grid", "p_max", dimension)?,
        dp: parse_vector(&doc, "grid", "dp", dimension)?,
        q_min,
        q_max,
        dq,
        x_min: parse_vector(&doc, "grid", "x_min", dimension)?,
        x_max: parse_vector(&doc, "grid", "x_max", dimension)?,
        dx: parse_vector(&doc, "grid", "dx", dimension)?,
        y_min,
        y_max,
        dy: parse_opt_vector(&doc, "grid", "dy", dimension)?.unwrap_or(default_dy),
    };
    for (name, steps) in [("dp", &grid.dp), ("dq", &grid.dq), ("dx", &grid.dx), ("dy", &grid.dy)] {
        if steps.iter().any(|&s| !(s > 0.0)) {
            return Err(invalid("grid", name, "steps must be positive"));
        }
    }

    // [time]
    let t_final = parse_f64(&doc, "time", "t_final")?;
    let dt = parse_f64(&doc, "time", "dt")?;
    if !(t_final >= 0.0) || !(dt > 0.0) {
        return Err(invalid("time", "dt", "need t_final >= 0 and dt > 0"));
    }
    let steps = (t_final / dt).round();
    if (steps * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(invalid(
            "time",
            "dt",
            format!("t_final = {t_final} is not an integer number of steps of {dt}"),
        ));
    }
    let time = TimeSection {
        t_final,
        dt,
        n_steps: steps as usize,
    };

    // [dyson]
    let nbar = parse_usize(&doc, "dyson", "nbar")? as u32;
    let rank = parse_usize(&doc, "dyson", "rank")?;
    let pair_kernel = match doc.get("dyson", "pair_kernel").unwrap_or("exact") {
        "exact" => PairKernelRoute::Exact,
        "lowrank" => PairKernelRoute::LowRank,
        other => {
            return Err(invalid(
                "dyson",
                "pair_kernel",
                format!("unknown route '{other}' (exact, lowrank)"),
            ))
        }
    };
    if bath.xi > 0.0 && nbar > 0 {
        if rank == 0 {
            return Err(invalid("dyson", "rank", "must be positive when nbar > 0 and xi > 0"));
        }
        if rank > time.n_steps + 1 {
            return Err(invalid(
                "dyson",
                "rank",
                format!("at most n_steps + 1 = {} modes exist", time.n_steps + 1),
            ));
        }
    }
    let dyson = DysonSection { nbar, rank, pair_kernel };

    // [output]
    let output = OutputSection {
        directory: require(&doc, "output", "directory")?.to_string(),
        label: doc.get("output", "label").unwrap_or("run").to_string(),
    };

    // [execution] (optional)
    let execution = ExecutionSection {
        workers: match doc.get("execution", "workers") {
            Some(raw) => Some(raw.parse().map_err(|_| {
                invalid("execution", "workers", format!("'{raw}' is not a positive integer"))
            })?),
            None => None,
        },
        memory_budget_mb: match doc.get("execution", "memory_budget_mb") {
            Some(raw) => Some(raw.parse().map_err(|_| {
                invalid(
                    "execution",
                    "memory_budget_mb",
                    format!("'{raw}' is not a positive integer"),
                )
            })?),
            None => None,
        },
    };
    if execution.workers == Some(0) {
        return Err(invalid("execution", "workers", "must be at least 1"));
    }

    Ok(RunConfig {
        dimension,
        epsilon,
        potential,
        initial,
        bath,
        grid,
        time,
        dyson,
        output,
        execution,
    })
}

// ---------------------------------------------------------------------------
// canonical echo and run id
// ---------------------------------------------------------------------------

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// The canonical ordered key=value listing of everything that defines
    /// the physics of the run.  Output location and execution settings are
    /// deliberately excluded so reruns on different machines or worker
    /// counts share an identifier.
    pub fn canonical_echo(&self) -> Vec<(String, String)> {
        let mut echo: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| echo.push((k.to_string(), v));
        push("system.dimension", self.dimension.to_string());
        push("system.epsilon", self.epsilon.to_string());
        match &self.potential {
            PotentialKind::Harmonic => push("potential.kind", "harmonic".into()),
            PotentialKind::DoubleWell => push("potential.kind", "double_well".into()),
            PotentialKind::DoubleSlit(p) => {
                push("potential.kind", "double_slit".into());
                push("potential.height", p.height.to_string());
                push("potential.core_half_width", p.core_half_width.to_string());
                push("potential.half_thickness", p.half_thickness.to_string());
                push("potential.slit_width", p.slit_width.to_string());
                push("potential.edge", p.edge.to_string());
            }
        }
        match &self.initial {
            InitialKind::WellPair => push("initial.kind", "well_pair".into()),
            InitialKind::HarmonicGround => push("initial.kind", "harmonic_ground".into()),
            InitialKind::WellPairGroundProduct => {
                push("initial.kind", "well_pair_ground_product".into())
            }
            InitialKind::DoubleSlit { q1, q2, p1, p2 } => {
                push("initial.kind", "double_slit".into());
                push("initial.q1", q1.to_string());
                push("initial.q2", q2.to_string());
                push("initial.p1", p1.to_string());
                push("initial.p2", p2.to_string());
            }
        }
        push("bath.modes", self.bath.modes.to_string());
        push("bath.omega_max", self.bath.omega_max.to_string());
        push("bath.omega_c", self.bath.omega_c.to_string());
        push("bath.beta", self.bath.beta.to_string());
        push("bath.xi", self.bath.xi.to_string());
        push("grid.p_min", join(&self.grid.p_min));
        push("grid.p_max", join(&self.grid.p_max));
        push("grid.dp", join(&self.grid.dp));
        push("grid.q_min", join(&self.grid.q_min));
        push("grid.q_max", join(&self.grid.q_max));
        push("grid.dq", join(&self.grid.dq));
        push("grid.x_min", join(&self.grid.x_min));
        push("grid.x_max", join(&self.grid.x_max));
        push("grid.dx", join(&self.grid.dx));
        push("grid.y_min", join(&self.grid.y_min));
        push("grid.y_max", join(&self.grid.y_max));
        push("grid.dy", join(&self.grid.dy));
        push("time.t_final", self.time.t_final.to_string());
        push("time.dt", self.time.dt.to_string());
        push("time.steps", self.time.n_steps.to_string());
        push("dyson.nbar", self.dyson.nbar.to_string());
        push("dyson.rank", self.dyson.rank.to_string());
        push(
            "dyson.pair_kernel",
            match self.dyson.pair_kernel {
                PairKernelRoute::Exact => "exact".into(),
                PairKernelRoute::LowRank => "lowrank".into(),
            },
        );
        push("output.label", self.output.label.clone());
        echo
    }

    /// Stable identifier of the physics of the run: FNV-1a (64-bit) over
    /// the canonical echo.
    pub fn run_id(&self) -> String {
        let mut hash: u64 = 0xcbf29ce484222325;
        for (k, v) in self.canonical_echo() {
            for byte in k.bytes().chain([b'=']).chain(v.bytes()).chain([b'\n']) {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        }
        format!("{hash:016x}")
    }
}
