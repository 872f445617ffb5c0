use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bgk_core::diagnostics::observe;
use bgk_core::dynamics::{build_targets, simulate_with, Mixture, MixtureState, Scheme, SimulationConfig};
use bgk_core::{
    auto_bounds, eval_frequency, maxwellian, BgkError, Distribution, FrequencyModel, NewtonConfig, Species, Vec3,
    VelocityGrid,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, GridSpec, InitialCondition, ModelSpec, RunConfig, TimeStep};
use crate::output::TimeseriesWriter;
use crate::snapshot::{read_snapshot, write_snapshot, Snapshot};

/// Failure of a CLI command, one category per exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<BgkError> for CliError {
    fn from(e: BgkError) -> Self {
        match e {
            BgkError::Config(_) | BgkError::Shape { .. } => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(RunConfig::parse(&text)?)
}

/// A validated config turned into an initial state and a stepping plan.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub state: MixtureState,
    pub sim: SimulationConfig,
    pub steps: usize,
}

fn load_field(base: &Path, file: &Path) -> Result<Snapshot, CliError> {
    let path = base.join(file);
    read_snapshot(&path)
        .map_err(|e| CliError::io(&path, e))?
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn resolve_grid(cfg: &RunConfig, tabulated: &[(usize, Snapshot)]) -> Result<VelocityGrid, CliError> {
    match &cfg.grid {
        GridSpec::Explicit { v_min, v_max, counts } => Ok(VelocityGrid::new(*v_min, *v_max, *counts)?),
        GridSpec::Auto { .. } if !tabulated.is_empty() => Ok(tabulated[0].1.grid()?),
        GridSpec::Auto { widths, nodes } => {
            let mut cases: Vec<(Vec3, f64, f64)> = Vec::new();
            for s in &cfg.species {
                match &s.initial {
                    InitialCondition::Maxwellian { u, temperature, .. } => cases.push((*u, *temperature, s.mass)),
                    InitialCondition::TwoMaxwellianSum { components } => {
                        cases.extend(components.iter().map(|c| (c.u, c.temperature, s.mass)))
                    }
                    InitialCondition::TabulatedField { .. } => unreachable!("tabulated species select the file grid"),
                }
            }
            let (lo, hi) = auto_bounds(&cases, *widths)?;
            Ok(VelocityGrid::new(lo, hi, [*nodes; 3])?)
        }
    }
}

pub fn prepare(config: &RunConfig, base: &Path) -> Result<Prepared, CliError> {
    config.validate()?;
    let mut tabulated = Vec::new();
    for (i, s) in config.species.iter().enumerate() {
        if let InitialCondition::TabulatedField { file } = &s.initial {
            tabulated.push((i, load_field(base, file)?));
        }
    }
    let grid = resolve_grid(config, &tabulated)?;
    for (i, snap) in &tabulated {
        if !snap.matches(&grid) {
            return Err(CliError::Config(format!(
                "species {} ({}): tabulated field grid does not match the run grid",
                i + 1,
                config.species[*i].name
            )));
        }
    }

    let n = config.num_species();
    let mut tab = tabulated.into_iter().peekable();
    let mut distributions = Vec::with_capacity(n);
    for (i, s) in config.species.iter().enumerate() {
        let who = |e: BgkError| CliError::Config(format!("species {} ({}): {e}", i + 1, s.name));
        let f = match &s.initial {
            InitialCondition::Maxwellian { n, u, temperature } => {
                maxwellian(*n, *u, *temperature, s.mass, &grid).map_err(who)?
            }
            InitialCondition::TwoMaxwellianSum { components: [a, b] } => {
                let fa = maxwellian(a.n, a.u, a.temperature, s.mass, &grid).map_err(who)?;
                let fb = maxwellian(b.n, b.u, b.temperature, s.mass, &grid).map_err(who)?;
                Distribution::new(fa.values().iter().zip(fb.values()).map(|(x, y)| x + y).collect()).map_err(who)?
            }
            InitialCondition::TabulatedField { .. } => {
                let (_, snap) = tab.next().expect("one snapshot per tabulated species");
                Distribution::new(snap.values).map_err(who)?
            }
        };
        distributions.push(f);
    }

    let mut matrix = vec![Vec::with_capacity(n); n];
    let mut entries: Vec<_> = config.frequencies.iter().collect();
    entries.sort_by_key(|f| f.pair);
    for f in entries {
        let [k, j] = f.pair;
        let model = match &f.model {
            ModelSpec::Constant { nu0 } => FrequencyModel::Constant { nu0: *nu0 },
            ModelSpec::SoftPowerLaw { nu0, gamma } => FrequencyModel::SoftPowerLaw { nu0: *nu0, gamma: *gamma },
            ModelSpec::CoulombLike { nu0 } => FrequencyModel::CoulombLike { nu0: *nu0 },
            ModelSpec::Tabulated { file } => {
                let snap = load_field(base, file)?;
                if !snap.matches(&grid) {
                    return Err(CliError::Config(format!(
                        "frequency ({k},{j}): tabulated grid does not match the run grid"
                    )));
                }
                FrequencyModel::Tabulated { values: snap.values }
            }
        };
        let field = eval_frequency(&model, &grid).map_err(|e| CliError::Config(format!("frequency ({k},{j}): {e}")))?;
        matrix[k - 1].push(field);
    }

    let species = config
        .species
        .iter()
        .map(|s| Species::new(s.name.clone(), s.mass))
        .collect::<Result<Vec<_>, _>>()?;
    let mixture = Arc::new(Mixture::new(grid, species, matrix)?);
    let scheme = Scheme::from(config.time.scheme);
    let t_final = config.time.t_final;
    let dt = match config.time.dt {
        TimeStep::Fixed(dt) => {
            let factor = dt * mixture.max_total_frequency();
            if scheme == Scheme::ExplicitEuler && factor > 1.0 {
                return Err(CliError::Config(format!(
                    "explicit Euler needs dt * max sum_j nu_ij <= 1, got {factor} (dt = {dt})"
                )));
            }
            dt
        }
        TimeStep::Auto => {
            let limit = mixture.default_explicit_dt();
            if t_final > 0.0 {
                t_final / (t_final / limit).ceil()
            } else {
                limit
            }
        }
    };
    let sim = SimulationConfig {
        dt,
        t_final,
        scheme,
        newton: NewtonConfig::from(&config.newton),
        record_every: config.output.every,
    };
    let steps = sim.num_steps().map_err(CliError::config)?;
    let state = MixtureState::new(mixture, distributions, 0.0)?;
    Ok(Prepared {
        config: config.clone(),
        state,
        sim,
        steps,
    })
}

fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn prepare_file(path: &Path) -> Result<Prepared, CliError> {
    prepare(&load_config(path)?, &base_dir(path))
}

/// Normalized config followed by the resolved grid and time step as comments.
pub fn check_config(path: &Path) -> Result<String, CliError> {
    let p = prepare_file(path)?;
    let g = p.state.grid();
    let mut out = p.config.to_toml();
    out.push_str(&format!(
        "\n# resolved grid: v_min = {:?}, v_max = {:?}, counts = {:?}\n# resolved time: dt = {:?}, steps = {}\n",
        g.v_min(),
        g.v_max(),
        g.counts(),
        p.sim.dt,
        p.steps
    ));
    Ok(out)
}

#[derive(Debug, Serialize)]
struct TargetRow {
    pair: [usize; 2],
    lambda0: f64,
    lambda1: Vec3,
    lambda2: f64,
    residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
}

#[derive(Debug, Serialize)]
struct TargetReport {
    t: f64,
    target: Vec<TargetRow>,
}

/// Targets of the initial state, one `[[target]]` table per ordered pair.
pub fn solve_target(path: &Path) -> Result<String, CliError> {
    let p = prepare_file(path)?;
    let targets = build_targets(&p.state, &p.sim.newton)?;
    let n = p.state.num_species();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let lam = targets.multipliers(i, j);
            let (residual, iterations) = if i == j {
                (targets.diagonal_residual(i), None)
            } else {
                let pair = targets.pair(i, j).expect("every off-diagonal pair is solved");
                (pair.residual, Some(pair.iterations))
            };
            rows.push(TargetRow {
                pair: [i + 1, j + 1],
                lambda0: lam.l0,
                lambda1: lam.l1,
                lambda2: lam.l2,
                residual,
                iterations,
            });
        }
    }
    let report = TargetReport {
        t: p.state.t,
        target: rows,
    };
    Ok(toml::to_string(&report).expect("target report serializes"))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: usize,
    pub timeseries: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

/// Simulate and stream the time series; `output` replaces `output.timeseries`.
/// Warnings attached to records go to `log`.
pub fn run(path: &Path, output: Option<&Path>, log: &mut dyn Write) -> Result<RunSummary, CliError> {
    let p = prepare_file(path)?;
    let csv_path = output.map(Path::to_path_buf).unwrap_or_else(|| p.config.output.timeseries.clone());
    let file = File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    let mut writer =
        TimeseriesWriter::new(BufWriter::new(file), p.state.num_species()).map_err(|e| CliError::io(&csv_path, e))?;
    let keep_final = p.config.output.snapshot;
    let mut last: Option<MixtureState> = None;
    let newton = p.sim.newton;
    let records = simulate_with(&p.state, &p.sim, |state, targets| {
        let rec = observe(state, targets, &newton)?;
        for w in &rec.warnings {
            let _ = writeln!(log, "warning: t = {}: {w}", rec.t);
        }
        writer.write(&rec).map_err(|e| CliError::io(&csv_path, e))?;
        if keep_final {
            last = Some(state.clone());
        }
        Ok::<_, CliError>(())
    })?
    .len();
    drop(writer);

    let mut snapshots = Vec::new();
    if let Some(state) = last {
        let dir = csv_path.parent().map(Path::to_path_buf).unwrap_or_default();
        for (s, f) in p.config.species.iter().zip(state.distributions()) {
            let target = dir.join(format!("{}_{}.bin", p.config.output.snapshot_prefix, s.name));
            write_snapshot(&target, &Snapshot::from_field(state.grid(), f.values()))
                .map_err(|e| CliError::io(&target, e))?;
            snapshots.push(target);
        }
    }
    Ok(RunSummary {
        records,
        timeseries: csv_path,
        snapshots,
    })
}
