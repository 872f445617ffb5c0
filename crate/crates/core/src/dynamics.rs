//! Space-homogeneous relaxation of an N-species mixture:
//! `d f_i / dt = sum_j nu_ij (M_ij - f_i)`.
//!
//! Targets are rebuilt from the current state at the start of every step:
//! one single-species solve per species and one pair solve per unordered
//! pair of distinct species.

use std::sync::Arc;

use crate::diagnostics::{observe, DiagnosticsRecord};
use crate::dual::{solve_mixed_target, solve_single_target, NewtonConfig};
use crate::error::{check_len, BgkError, Result};
use crate::grid::VelocityGrid;
use crate::kinetics::{
    eval_exp_lambda, lambda_from_macros, macroscopic_moments, mixed_moment_vector, norm2,
    weighted_moments, Distribution, FrequencyField, MixedMultipliers, Multipliers, Species,
};

/// Static description of a mixture: grid, species and the N x N frequency matrix.
#[derive(Debug, Clone)]
pub struct Mixture {
    grid: VelocityGrid,
    species: Vec<Species>,
    frequencies: Vec<Vec<FrequencyField>>,
    /// `sum_j nu_ij(v)` per species.
    total_frequency: Vec<Vec<f64>>,
}

impl Mixture {
    pub fn new(
        grid: VelocityGrid,
        species: Vec<Species>,
        frequencies: Vec<Vec<FrequencyField>>,
    ) -> Result<Self> {
        let n = species.len();
        if n == 0 {
            return Err(BgkError::Config("mixture needs at least one species".into()));
        }
        if frequencies.len() != n || frequencies.iter().any(|row| row.len() != n) {
            return Err(BgkError::Config(format!(
                "frequency matrix must be {n} x {n}"
            )));
        }
        for row in &frequencies {
            for field in row {
                check_len(grid.len(), field.len())?;
            }
        }
        let total_frequency = frequencies
            .iter()
            .map(|row| {
                (0..grid.len())
                    .map(|node| row.iter().map(|f| f.values()[node]).sum())
                    .collect()
            })
            .collect();
        Ok(Self {
            grid,
            species,
            frequencies,
            total_frequency,
        })
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.species[i].mass
    }

    pub fn frequency(&self, i: usize, j: usize) -> &FrequencyField {
        &self.frequencies[i][j]
    }

    pub fn total_frequency(&self, i: usize) -> &[f64] {
        &self.total_frequency[i]
    }

    /// Largest `sum_j nu_ij(v)` over species and nodes.
    pub fn max_total_frequency(&self) -> f64 {
        self.total_frequency
            .iter()
            .flatten()
            .cloned()
            .fold(0.0, f64::max)
    }

    /// `0.1 / max_v sum_j nu_ij`, a comfortable explicit step.
    pub fn default_explicit_dt(&self) -> f64 {
        0.1 / self.max_total_frequency()
    }
}

#[derive(Debug, Clone)]
pub struct MixtureState {
    pub t: f64,
    distributions: Vec<Distribution>,
    mixture: Arc<Mixture>,
}

impl MixtureState {
    pub fn new(mixture: Arc<Mixture>, distributions: Vec<Distribution>, t: f64) -> Result<Self> {
        if distributions.len() != mixture.len() {
            return Err(BgkError::Config(format!(
                "{} distributions for {} species",
                distributions.len(),
                mixture.len()
            )));
        }
        for f in &distributions {
            check_len(mixture.grid().len(), f.len())?;
        }
        Ok(Self {
            t,
            distributions,
            mixture,
        })
    }

    pub fn mixture(&self) -> &Arc<Mixture> {
        &self.mixture
    }

    pub fn grid(&self) -> &VelocityGrid {
        self.mixture.grid()
    }

    pub fn distributions(&self) -> &[Distribution] {
        &self.distributions
    }

    pub fn distribution(&self, i: usize) -> &Distribution {
        &self.distributions[i]
    }

    pub fn num_species(&self) -> usize {
        self.distributions.len()
    }
}

/// Result of one cross-species pair solve.
#[derive(Debug, Clone)]
pub struct PairTarget {
    pub i: usize,
    pub j: usize,
    pub multipliers: MixedMultipliers,
    /// Relative constraint residual reported by the solver.
    pub residual: f64,
    pub iterations: usize,
}

/// All targets `M_ij` of a state.
#[derive(Debug, Clone)]
pub struct TargetSet {
    n: usize,
    targets: Vec<Distribution>,
    multipliers: Vec<Multipliers>,
    diagonal_residuals: Vec<f64>,
    pairs: Vec<PairTarget>,
}

impl TargetSet {
    pub fn num_species(&self) -> usize {
        self.n
    }

    pub fn target(&self, i: usize, j: usize) -> &Distribution {
        &self.targets[i * self.n + j]
    }

    /// Multipliers generating `M_ij`; for `i != j` these are the pair's mass
    /// multiplier for species `i` with the shared momentum/energy block.
    pub fn multipliers(&self, i: usize, j: usize) -> &Multipliers {
        &self.multipliers[i * self.n + j]
    }

    pub fn diagonal_residual(&self, i: usize) -> f64 {
        self.diagonal_residuals[i]
    }

    /// Pair solutions ordered `(0,1), (0,2), ..., (1,2), ...`.
    pub fn pairs(&self) -> &[PairTarget] {
        &self.pairs
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairTarget> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pairs.iter().find(|p| p.i == a && p.j == b)
    }
}

fn pair_guess(state: &MixtureState, i: usize, j: usize) -> Result<MixedMultipliers> {
    let mix = state.mixture();
    let g = mix.grid();
    let a = macroscopic_moments(state.distribution(i), mix.mass(i), g)?;
    let b = macroscopic_moments(state.distribution(j), mix.mass(j), g)?;
    let rho = a.rho + b.rho;
    let u = [0, 1, 2].map(|k| (a.q[k] + b.q[k]) / rho);
    let temperature = (2.0 * (a.energy + b.energy) - rho * norm2(u)) / (3.0 * (a.n + b.n));
    let la = lambda_from_macros(a.n, u, temperature, mix.mass(i))?;
    let lb = lambda_from_macros(b.n, u, temperature, mix.mass(j))?;
    Ok(MixedMultipliers::new(la.l0, lb.l0, la.l1, la.l2))
}

/// Solve every target of `state`. With `warm`, each solve starts from the
/// corresponding multipliers of a previous target set; otherwise from the
/// constant-frequency Maxwellians of the plain macros.
pub fn build_targets_warm(
    state: &MixtureState,
    cfg: &NewtonConfig,
    warm: Option<&TargetSet>,
) -> Result<TargetSet> {
    let mix = state.mixture();
    let g = mix.grid();
    let n = state.num_species();
    let ctx = |i: usize, j: usize| format!(" for pair ({},{}) at t = {}", i + 1, j + 1, state.t);

    let mut multipliers = vec![Multipliers::new(0.0, [0.0; 3], -1.0); n * n];
    let mut diagonal_residuals = vec![0.0; n];
    for i in 0..n {
        let f = state.distribution(i);
        let m = mix.mass(i);
        let nu = mix.frequency(i, i);
        let guess = match warm {
            Some(w) => *w.multipliers(i, i),
            None => {
                let mac = macroscopic_moments(f, m, g)?;
                lambda_from_macros(mac.n, mac.u, mac.temperature, m)?
            }
        };
        let rho = weighted_moments(f, nu, m, g)?;
        let (lam, report) = solve_single_target(&rho, nu, m, g, cfg, Some(guess))
            .map_err(|e| e.with_context(ctx(i, i)))?;
        multipliers[i * n + i] = lam;
        diagonal_residuals[i] = report.final_grad_norm;
    }

    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let guess = match warm.and_then(|w| w.pair(i, j)) {
                Some(p) => p.multipliers,
                None => pair_guess(state, i, j)?,
            };
            let (nu_ij, nu_ji) = (mix.frequency(i, j), mix.frequency(j, i));
            let rho_bar = mixed_moment_vector(
                state.distribution(i),
                state.distribution(j),
                nu_ij,
                nu_ji,
                mix.mass(i),
                mix.mass(j),
                g,
            )?;
            let (lam, report) = solve_mixed_target(
                &rho_bar,
                nu_ij,
                nu_ji,
                mix.mass(i),
                mix.mass(j),
                g,
                cfg,
                Some(guess),
            )
            .map_err(|e| e.with_context(ctx(i, j)))?;
            multipliers[i * n + j] = lam.first();
            multipliers[j * n + i] = lam.second();
            pairs.push(PairTarget {
                i,
                j,
                multipliers: lam,
                residual: report.final_grad_norm,
                iterations: report.iterations,
            });
        }
    }

    let mut targets = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            targets.push(eval_exp_lambda(&multipliers[i * n + j], mix.mass(i), g)?);
        }
    }
    Ok(TargetSet {
        n,
        targets,
        multipliers,
        diagonal_residuals,
        pairs,
    })
}

pub fn build_targets(state: &MixtureState, cfg: &NewtonConfig) -> Result<TargetSet> {
    build_targets_warm(state, cfg, None)
}

/// `Q_i(v) = sum_j nu_ij(v) (M_ij(v) - f_i(v))` for every species.
pub fn bgk_rhs(state: &MixtureState, targets: &TargetSet) -> Result<Vec<Vec<f64>>> {
    let n = state.num_species();
    if targets.num_species() != n {
        return Err(BgkError::Config(format!(
            "target set has {} species, state has {n}",
            targets.num_species()
        )));
    }
    let mix = state.mixture();
    (0..n)
        .map(|i| {
            let f = state.distribution(i).values();
            let mut q = vec![0.0; f.len()];
            for j in 0..n {
                let nu = mix.frequency(i, j).values();
                let target = targets.target(i, j).values();
                check_len(f.len(), target.len())?;
                for node in 0..f.len() {
                    q[node] += nu[node] * (target[node] - f[node]);
                }
            }
            Ok(q)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// `f <- f + dt Q`; positivity needs `dt sum_j nu_ij <= 1`.
    ExplicitEuler,
    /// `f <- (f + dt sum_j nu_ij M_ij) / (1 + dt sum_j nu_ij)` with frozen targets.
    SemiImplicit,
}

/// Advance one step with targets already built for `state`.
pub fn step_with_targets(
    state: &MixtureState,
    targets: &TargetSet,
    dt: f64,
    scheme: Scheme,
) -> Result<MixtureState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(BgkError::Config(format!("time step must be positive, got {dt}")));
    }
    let mix = state.mixture();
    let n = state.num_species();
    let mut next = Vec::with_capacity(n);
    for i in 0..n {
        let f = state.distribution(i).values();
        let total = mix.total_frequency(i);
        if scheme == Scheme::ExplicitEuler {
            let (node, worst) = total
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (k, &s)| if s > acc.1 { (k, s) } else { acc });
            if dt * worst > 1.0 {
                return Err(BgkError::StepSize {
                    t: state.t,
                    species: i + 1,
                    node,
                    factor: dt * worst,
                });
            }
        }
        // sum_j nu_ij M_ij
        let mut gain = vec![0.0; f.len()];
        for j in 0..n {
            let nu = mix.frequency(i, j).values();
            for (node, &m) in targets.target(i, j).values().iter().enumerate() {
                gain[node] += nu[node] * m;
            }
        }
        let values: Vec<f64> = match scheme {
            Scheme::ExplicitEuler => f
                .iter()
                .zip(&gain)
                .zip(total)
                .map(|((&x, &g), &s)| x * (1.0 - dt * s) + dt * g)
                .collect(),
            Scheme::SemiImplicit => f
                .iter()
                .zip(&gain)
                .zip(total)
                .map(|((&x, &g), &s)| (x + dt * g) / (1.0 + dt * s))
                .collect(),
        };
        next.push(Distribution::from_values_unchecked(values));
    }
    Ok(MixtureState {
        t: state.t + dt,
        distributions: next,
        mixture: Arc::clone(mix),
    })
}

/// Build targets for `state` and advance one step.
pub fn step(state: &MixtureState, dt: f64, scheme: Scheme, cfg: &NewtonConfig) -> Result<MixtureState> {
    let targets = build_targets(state, cfg)?;
    step_with_targets(state, &targets, dt, scheme)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub newton: NewtonConfig,
    /// Record every `record_every` steps; the final time is always recorded.
    pub record_every: usize,
}

impl SimulationConfig {
    /// Number of steps; `t_final` must be a whole multiple of `dt`.
    pub fn num_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(BgkError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(BgkError::Config(format!(
                "t_final must be nonnegative, got {}",
                self.t_final
            )));
        }
        if self.record_every == 0 {
            return Err(BgkError::Config("record cadence must be at least 1 step".into()));
        }
        let steps = (self.t_final / self.dt).round();
        if (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(self.dt) {
            return Err(BgkError::Config(format!(
                "t_final = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// Run `initial` to `t_final`, calling `observer` at the recording cadence
/// with the state and the targets built for it. An observer error stops the
/// run; records already observed have been handed to the observer.
pub fn simulate_with<R, E: From<BgkError>>(
    initial: &MixtureState,
    cfg: &SimulationConfig,
    mut observer: impl FnMut(&MixtureState, &TargetSet) -> std::result::Result<R, E>,
) -> std::result::Result<Vec<R>, E> {
    let steps = cfg.num_steps()?;
    cfg.newton.validate()?;
    let t0 = initial.t;
    let mut state = initial.clone();
    let mut records = Vec::new();
    let mut previous: Option<TargetSet> = None;
    for k in 0..=steps {
        let targets = build_targets_warm(&state, &cfg.newton, previous.as_ref())?;
        if k % cfg.record_every == 0 || k == steps {
            records.push(observer(&state, &targets)?);
        }
        if k == steps {
            break;
        }
        let mut next = step_with_targets(&state, &targets, cfg.dt, cfg.scheme)?;
        next.t = t0 + (k + 1) as f64 * cfg.dt;
        state = next;
        previous = Some(targets);
    }
    Ok(records)
}

/// [`simulate_with`] recording the standard diagnostics.
pub fn simulate(initial: &MixtureState, cfg: &SimulationConfig) -> Result<Vec<DiagnosticsRecord>> {
    simulate_with(initial, cfg, |s, t| observe(s, t, &cfg.newton))
}
