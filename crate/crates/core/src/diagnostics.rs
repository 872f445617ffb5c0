//! Observables certifying conservation, entropy decay and the structure of
//! equilibria along a run.

use crate::dual::{entropy_density, solve_single_target, NewtonConfig};
use crate::dynamics::{MixtureState, TargetSet};
use crate::error::{check_len, BgkError, Result};
use crate::grid::{Vec3, VelocityGrid};
use crate::kinetics::{
    eval_exp_lambda, lambda_from_macros, macroscopic_moments, norm2, weighted_moments,
    Distribution, FrequencyField,
};

/// Floor applied to distribution values entering a logarithm.
pub const POSITIVITY_FLOOR: f64 = 1e-300;
/// Fraction of floored nodes above which a record carries a warning.
pub const FLOOR_WARNING_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesDiagnostics {
    pub n: f64,
    pub rho: f64,
    pub u: Vec3,
    pub temperature: f64,
    pub equilibrium_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDiagnostics {
    pub i: usize,
    pub j: usize,
    /// Relative constraint residual of the pair solve.
    pub residual: f64,
    /// `int nu_ij ln M_ij (M_ij - f_i) + int nu_ji ln M_ji (M_ji - f_j)`.
    pub identity: f64,
    /// Mean velocity of `M_ij` minus that of `M_ji`, by quadrature.
    pub velocity_mismatch: f64,
    /// Temperature of `M_ij` minus that of `M_ji`, by quadrature.
    pub temperature_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub species: Vec<SpeciesDiagnostics>,
    pub total_momentum: Vec3,
    pub total_energy: f64,
    pub entropy: f64,
    pub dissipation: f64,
    pub pairs: Vec<PairDiagnostics>,
    /// Fraction of nodes clamped to [`POSITIVITY_FLOOR`] in the dissipation.
    pub floored_fraction: f64,
    pub warnings: Vec<String>,
}

/// `sum_i int h(f_i) dv`, `h(z) = z ln z - z`.
pub fn total_entropy(state: &MixtureState) -> f64 {
    let g = state.grid();
    state
        .distributions()
        .iter()
        .map(|f| g.weight() * f.values().iter().map(|&x| entropy_density(x)).sum::<f64>())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    /// `sum_ij int nu_ij ln f_i (M_ij - f_i) dv`; nonpositive for valid targets.
    pub value: f64,
    pub floored_fraction: f64,
}

pub fn dissipation(state: &MixtureState, targets: &TargetSet) -> Result<Dissipation> {
    let mix = state.mixture();
    let g = mix.grid();
    let n = state.num_species();
    let mut value = 0.0;
    let mut floored = 0usize;
    for i in 0..n {
        let f = state.distribution(i).values();
        let logs: Vec<f64> = f
            .iter()
            .map(|&x| {
                if x < POSITIVITY_FLOOR {
                    floored += 1;
                }
                x.max(POSITIVITY_FLOOR).ln()
            })
            .collect();
        for j in 0..n {
            let nu = mix.frequency(i, j).values();
            let m = targets.target(i, j).values();
            check_len(f.len(), m.len())?;
            let s: f64 = (0..f.len()).map(|k| nu[k] * logs[k] * (m[k] - f[k])).sum();
            value += g.weight() * s;
        }
    }
    Ok(Dissipation {
        value,
        floored_fraction: floored as f64 / (n * g.len()) as f64,
    })
}

/// The pair identity `int nu_ij ln M_ij (M_ij - f_i) + int nu_ji ln M_ji (M_ji - f_j)`,
/// zero whenever the pair constraints hold. `ln M` is taken from the multipliers.
pub fn pair_identity(state: &MixtureState, targets: &TargetSet, i: usize, j: usize) -> f64 {
    let mix = state.mixture();
    let g = mix.grid();
    let term = |a: usize, b: usize| {
        let lam = targets.multipliers(a, b);
        let m = mix.mass(a);
        let nu = mix.frequency(a, b).values();
        let f = state.distribution(a).values();
        let t = targets.target(a, b).values();
        let s: f64 = g
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, &v)| nu[k] * m * lam.reduced_exponent(v) * (t[k] - f[k]))
            .sum();
        g.weight() * s
    };
    term(i, j) + term(j, i)
}

/// Relative L1 distance from `f` to the Maxwellian with the same discrete
/// density, momentum and energy.
pub fn equilibrium_gap(f: &Distribution, m: f64, grid: &VelocityGrid) -> Result<f64> {
    equilibrium_gap_with(f, m, grid, &NewtonConfig::default())
}

pub fn equilibrium_gap_with(
    f: &Distribution,
    m: f64,
    grid: &VelocityGrid,
    cfg: &NewtonConfig,
) -> Result<f64> {
    let mac = macroscopic_moments(f, m, grid)?;
    if !(mac.temperature > 0.0) {
        return Err(BgkError::Degenerate("distribution has zero temperature".into()));
    }
    let one = FrequencyField::constant(1.0, grid)?;
    let rho = weighted_moments(f, &one, m, grid)?;
    let guess = lambda_from_macros(mac.n, mac.u, mac.temperature, m)?;
    let (lam, _) = solve_single_target(&rho, &one, m, grid, cfg, Some(guess))?;
    let maxwellian = eval_exp_lambda(&lam, m, grid)?;
    Ok(f.l1_distance(&maxwellian, grid)? / grid.integrate(f.values())?)
}

/// Quadrature mean velocity and temperature of the pair targets.
fn pair_mismatch(state: &MixtureState, targets: &TargetSet, i: usize, j: usize) -> Result<(f64, f64)> {
    let mix = state.mixture();
    let g = mix.grid();
    let a = macroscopic_moments(targets.target(i, j), mix.mass(i), g)?;
    let b = macroscopic_moments(targets.target(j, i), mix.mass(j), g)?;
    let du = [0, 1, 2].map(|k| a.u[k] - b.u[k]);
    Ok((norm2(du).sqrt(), a.temperature - b.temperature))
}

/// Snapshot every diagnostic for `state` and the targets built from it.
pub fn observe(state: &MixtureState, targets: &TargetSet, cfg: &NewtonConfig) -> Result<DiagnosticsRecord> {
    let mix = state.mixture();
    let g = mix.grid();
    let mut species = Vec::with_capacity(state.num_species());
    let mut total_momentum = [0.0; 3];
    let mut total_energy = 0.0;
    for (i, f) in state.distributions().iter().enumerate() {
        let mac = macroscopic_moments(f, mix.mass(i), g)?;
        for k in 0..3 {
            total_momentum[k] += mac.q[k];
        }
        total_energy += mac.energy;
        species.push(SpeciesDiagnostics {
            n: mac.n,
            rho: mac.rho,
            u: mac.u,
            temperature: mac.temperature,
            equilibrium_gap: equilibrium_gap_with(f, mix.mass(i), g, cfg)?,
        });
    }
    let mut pairs = Vec::new();
    for p in targets.pairs() {
        let (du, dt) = pair_mismatch(state, targets, p.i, p.j)?;
        pairs.push(PairDiagnostics {
            i: p.i,
            j: p.j,
            residual: p.residual,
            identity: pair_identity(state, targets, p.i, p.j),
            velocity_mismatch: du,
            temperature_mismatch: dt,
        });
    }
    let diss = dissipation(state, targets)?;
    let mut warnings = Vec::new();
    if diss.floored_fraction > FLOOR_WARNING_FRACTION {
        warnings.push(format!(
            "{:.2}% of nodes clamped to the positivity floor in the dissipation",
            100.0 * diss.floored_fraction
        ));
    }
    Ok(DiagnosticsRecord {
        t: state.t,
        species,
        total_momentum,
        total_energy,
        entropy: total_entropy(state),
        dissipation: diss.value,
        pairs,
        floored_fraction: diss.floored_fraction,
        warnings,
    })
}

/// Largest relative drifts over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationSummary {
    /// Per species `max_t |rho_i(t) - rho_i(0)| / rho_i(0)`.
    pub mass: Vec<f64>,
    /// Per component `max_t |q_a(t) - q_a(0)| / q_scale`, where `q_scale` is
    /// `|q(0)|`, or `sqrt(2 rho_tot E_tot)` at `t = 0` when `q(0) = 0`.
    pub momentum: Vec3,
    /// `max_t |E(t) - E(0)| / E(0)`.
    pub energy: f64,
}

impl ConservationSummary {
    pub fn max_drift(&self) -> f64 {
        self.mass
            .iter()
            .chain(self.momentum.iter())
            .chain(std::iter::once(&self.energy))
            .cloned()
            .fold(0.0, f64::max)
    }
}

pub fn conservation_report(series: &[DiagnosticsRecord]) -> Result<ConservationSummary> {
    let Some(first) = series.first() else {
        return Err(BgkError::Degenerate("empty diagnostics series".into()));
    };
    if series.len() < 2 {
        return Err(BgkError::Degenerate(
            "conservation needs at least two records".into(),
        ));
    }
    let rho_total: f64 = first.species.iter().map(|s| s.rho).sum();
    let q_norm = norm2(first.total_momentum).sqrt();
    let q_scale = if q_norm > 0.0 {
        q_norm
    } else {
        (2.0 * rho_total * first.total_energy).sqrt()
    };
    let mut summary = ConservationSummary {
        mass: vec![0.0; first.species.len()],
        momentum: [0.0; 3],
        energy: 0.0,
    };
    for rec in series {
        for (k, (s, s0)) in rec.species.iter().zip(&first.species).enumerate() {
            summary.mass[k] = summary.mass[k].max((s.rho - s0.rho).abs() / s0.rho);
        }
        for a in 0..3 {
            summary.momentum[a] = summary.momentum[a]
                .max((rec.total_momentum[a] - first.total_momentum[a]).abs() / q_scale);
        }
        summary.energy = summary
            .energy
            .max((rec.total_energy - first.total_energy).abs() / first.total_energy);
    }
    Ok(summary)
}
