//! Species data, grid fields, collision-frequency models, exponential targets
//! and their (plain and frequency-weighted) moments.
//!
//! Exponential targets use the collision invariants scaled by the particle
//! mass, `a(v) = m (1, v, |v|^2)`, so a target reads
//! `exp(m (l0 + l1 . v + l2 |v|^2))` and is integrable iff `l2 < 0`.

use std::f64::consts::PI;

use crate::error::{check_len, BgkError, Result};
use crate::grid::{Vec3, VelocityGrid};

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm2(a: Vec3) -> f64 {
    dot(a, a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    pub mass: f64,
}

impl Species {
    pub fn new(name: impl Into<String>, mass: f64) -> Result<Self> {
        let name = name.into();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(BgkError::Config(format!(
                "species '{name}': mass must be positive, got {mass}"
            )));
        }
        Ok(Self { name, mass })
    }
}

/// Nonnegative, not identically zero number density on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    values: Vec<f64>,
}

impl Distribution {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mut any_positive = false;
        for (i, &v) in values.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(BgkError::Degenerate(format!(
                    "distribution value {v} at node {i} is not a finite nonnegative number"
                )));
            }
            any_positive |= v > 0.0;
        }
        if !any_positive {
            return Err(BgkError::Degenerate(
                "distribution vanishes identically".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Caller guarantees the invariants (used for fields produced by
    /// positivity-preserving updates).
    pub(crate) fn from_values_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }

    /// `sum_nodes weight * |self - other|`.
    pub fn l1_distance(&self, other: &Distribution, grid: &VelocityGrid) -> Result<f64> {
        check_len(grid.len(), self.len())?;
        check_len(grid.len(), other.len())?;
        Ok(grid.weight()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// Velocity dependence of a collision frequency `nu_kj(v)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencyModel {
    Constant { nu0: f64 },
    /// `nu0 (1 + |v|^2)^(gamma/2)`
    SoftPowerLaw { nu0: f64, gamma: f64 },
    /// `nu0 (1 + |v|^2)^(-3/2)`
    CoulombLike { nu0: f64 },
    /// One value per grid node.
    Tabulated { values: Vec<f64> },
}

impl FrequencyModel {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(BgkError::Config(format!("{name} must be positive, got {x}")))
            }
        };
        match self {
            FrequencyModel::Constant { nu0 } | FrequencyModel::CoulombLike { nu0 } => {
                positive("nu0", *nu0)
            }
            FrequencyModel::SoftPowerLaw { nu0, gamma } => {
                positive("nu0", *nu0)?;
                if *gamma >= 0.0 && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(BgkError::Config(format!(
                        "gamma must be nonnegative, got {gamma}"
                    )))
                }
            }
            FrequencyModel::Tabulated { values } => {
                for (i, &v) in values.iter().enumerate() {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(BgkError::Config(format!(
                            "tabulated frequency {v} at node {i} is not strictly positive"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn value_at(&self, v: Vec3) -> f64 {
        let s = 1.0 + norm2(v);
        match *self {
            FrequencyModel::Constant { nu0 } => nu0,
            FrequencyModel::SoftPowerLaw { nu0, gamma } => nu0 * s.powf(0.5 * gamma),
            FrequencyModel::CoulombLike { nu0 } => nu0 * s.powf(-1.5),
            FrequencyModel::Tabulated { .. } => {
                panic!("tabulated frequencies have no closed form; use eval_frequency")
            }
        }
    }
}

/// A collision frequency sampled on the grid; strictly positive everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyField {
    model: FrequencyModel,
    values: Vec<f64>,
}

impl FrequencyField {
    pub fn model(&self) -> &FrequencyModel {
        &self.model
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Constant field of value `nu0`.
    pub fn constant(nu0: f64, grid: &VelocityGrid) -> Result<Self> {
        eval_frequency(&FrequencyModel::Constant { nu0 }, grid)
    }
}

pub fn eval_frequency(model: &FrequencyModel, grid: &VelocityGrid) -> Result<FrequencyField> {
    model.validate()?;
    let values = match model {
        FrequencyModel::Tabulated { values } => {
            check_len(grid.len(), values.len())?;
            values.clone()
        }
        m => grid.sample(|v| m.value_at(v)),
    };
    if let Some(i) = values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(BgkError::Config(format!(
            "frequency {} at node {i} is not strictly positive and finite",
            values[i]
        )));
    }
    Ok(FrequencyField {
        model: model.clone(),
        values,
    })
}

/// Lagrange multipliers of a single exponential target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multipliers {
    pub l0: f64,
    pub l1: Vec3,
    pub l2: f64,
}

impl Multipliers {
    pub fn new(l0: f64, l1: Vec3, l2: f64) -> Self {
        Self { l0, l1, l2 }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.l0, self.l1[0], self.l1[1], self.l1[2], self.l2]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], [a[1], a[2], a[3]], a[4])
    }

    pub fn check_domain(&self) -> Result<()> {
        if self.l2 < 0.0 && self.to_array().iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(BgkError::Domain(format!(
                "need finite multipliers with l2 < 0, got {:?}",
                self.to_array()
            )))
        }
    }

    /// `l0 + l1 . v + l2 |v|^2` (the exponent divided by the mass).
    pub fn reduced_exponent(&self, v: Vec3) -> f64 {
        self.l0 + dot(self.l1, v) + self.l2 * norm2(v)
    }
}

/// Multipliers of a cross-species target pair: separate mass multipliers,
/// shared momentum and energy multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedMultipliers {
    pub l0_first: f64,
    pub l0_second: f64,
    pub l1: Vec3,
    pub l2: f64,
}

impl MixedMultipliers {
    pub fn new(l0_first: f64, l0_second: f64, l1: Vec3, l2: f64) -> Self {
        Self {
            l0_first,
            l0_second,
            l1,
            l2,
        }
    }

    pub fn first(&self) -> Multipliers {
        Multipliers::new(self.l0_first, self.l1, self.l2)
    }

    pub fn second(&self) -> Multipliers {
        Multipliers::new(self.l0_second, self.l1, self.l2)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.l0_first,
            self.l0_second,
            self.l1[0],
            self.l1[1],
            self.l1[2],
            self.l2,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], [a[2], a[3], a[4]], a[5])
    }

    pub fn check_domain(&self) -> Result<()> {
        self.first().check_domain()?;
        self.second().check_domain()
    }
}

/// `int nu m (1, v, |v|^2) g dv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentVector5 {
    pub m0: f64,
    pub m1: Vec3,
    pub m2: f64,
}

impl MomentVector5 {
    pub fn to_array(&self) -> [f64; 5] {
        [self.m0, self.m1[0], self.m1[1], self.m1[2], self.m2]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            m0: a[0],
            m1: [a[1], a[2], a[3]],
            m2: a[4],
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Right-hand side of the cross-species constraints: each species' weighted
/// mass, plus the pair's summed weighted momentum and energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedMomentVector6 {
    pub m0_first: f64,
    pub m0_second: f64,
    pub m1: Vec3,
    pub m2: f64,
}

impl MixedMomentVector6 {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.m0_first,
            self.m0_second,
            self.m1[0],
            self.m1[1],
            self.m1[2],
            self.m2,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            m0_first: a[0],
            m0_second: a[1],
            m1: [a[2], a[3], a[4]],
            m2: a[5],
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Macroscopic quantities of one species. Temperature carries energy units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Macros {
    /// Number density `int g dv`.
    pub n: f64,
    /// Mass density `int m g dv`.
    pub rho: f64,
    /// Momentum density `int m v g dv`.
    pub q: Vec3,
    /// Energy density `int m |v|^2 / 2 g dv`.
    pub energy: f64,
    pub u: Vec3,
    pub temperature: f64,
}

/// Density, mean velocity and temperature of a Maxwellian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellianParams {
    pub n: f64,
    pub u: Vec3,
    pub temperature: f64,
}

/// Raw sums `sum w_i g_i (1, v, |v|^2)`, optionally with a frequency weight.
pub(crate) fn raw_moments(values: &[f64], nu: Option<&[f64]>, grid: &VelocityGrid) -> [f64; 5] {
    let mut acc = [0.0; 5];
    for (i, (&v, &g)) in grid.nodes().iter().zip(values).enumerate() {
        let wg = match nu {
            Some(nu) => nu[i] * g,
            None => g,
        };
        acc[0] += wg;
        acc[1] += wg * v[0];
        acc[2] += wg * v[1];
        acc[3] += wg * v[2];
        acc[4] += wg * norm2(v);
    }
    acc.map(|a| a * grid.weight())
}

/// Evaluate `exp(m (l0 + l1 . v + l2 |v|^2))` on the grid.
pub fn eval_exp_lambda(lam: &Multipliers, m: f64, grid: &VelocityGrid) -> Result<Distribution> {
    lam.check_domain()?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(BgkError::Domain(format!("mass must be positive, got {m}")));
    }
    let values = grid.sample(|v| (m * lam.reduced_exponent(v)).exp());
    if values.iter().any(|x| x.is_infinite()) {
        return Err(BgkError::Overflow("exponential target"));
    }
    Distribution::new(values).map_err(|_| {
        BgkError::Degenerate("exponential target underflows on every node".into())
    })
}

/// Maxwellian with density `n`, velocity `u`, temperature `t` sampled on the grid.
pub fn maxwellian(n: f64, u: Vec3, t: f64, m: f64, grid: &VelocityGrid) -> Result<Distribution> {
    eval_exp_lambda(&lambda_from_macros(n, u, t, m)?, m, grid)
}

pub fn macroscopic_moments(f: &Distribution, m: f64, grid: &VelocityGrid) -> Result<Macros> {
    check_len(grid.len(), f.len())?;
    let raw = raw_moments(f.values(), None, grid);
    let n = raw[0];
    if !(n > 0.0) {
        return Err(BgkError::Degenerate(
            "distribution carries no mass on the grid".into(),
        ));
    }
    let rho = m * n;
    let q = [m * raw[1], m * raw[2], m * raw[3]];
    let energy = 0.5 * m * raw[4];
    let u = q.map(|x| x / rho);
    // (1/3) int m |v-u|^2 g / int g, clamped against roundoff
    let temperature = ((2.0 * energy - norm2(q) / rho) / (3.0 * n)).max(0.0);
    Ok(Macros {
        n,
        rho,
        q,
        energy,
        u,
        temperature,
    })
}

pub fn weighted_moments(
    f: &Distribution,
    nu: &FrequencyField,
    m: f64,
    grid: &VelocityGrid,
) -> Result<MomentVector5> {
    check_len(grid.len(), f.len())?;
    check_len(grid.len(), nu.len())?;
    let raw = raw_moments(f.values(), Some(nu.values()), grid);
    Ok(MomentVector5::from_array(raw.map(|x| m * x)))
}

#[allow(clippy::too_many_arguments)]
pub fn mixed_moment_vector(
    f1: &Distribution,
    f2: &Distribution,
    nu12: &FrequencyField,
    nu21: &FrequencyField,
    m1: f64,
    m2: f64,
    grid: &VelocityGrid,
) -> Result<MixedMomentVector6> {
    let a = weighted_moments(f1, nu12, m1, grid)?;
    let b = weighted_moments(f2, nu21, m2, grid)?;
    Ok(MixedMomentVector6 {
        m0_first: a.m0,
        m0_second: b.m0,
        m1: [0, 1, 2].map(|i| a.m1[i] + b.m1[i]),
        m2: a.m2 + b.m2,
    })
}

/// Multipliers of the Maxwellian `n (m / 2 pi T)^{3/2} exp(-m |v-u|^2 / 2T)`.
pub fn lambda_from_macros(n: f64, u: Vec3, t: f64, m: f64) -> Result<Multipliers> {
    for (name, x) in [("density", n), ("temperature", t), ("mass", m)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(BgkError::Domain(format!("{name} must be positive, got {x}")));
        }
    }
    let l0 = (n * (m / (2.0 * PI * t)).powf(1.5)).ln() / m - norm2(u) / (2.0 * t);
    Ok(Multipliers::new(l0, u.map(|x| x / t), -0.5 / t))
}

/// Inverse of [`lambda_from_macros`].
pub fn macros_from_lambda(lam: &Multipliers, m: f64) -> Result<MaxwellianParams> {
    lam.check_domain()?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(BgkError::Domain(format!("mass must be positive, got {m}")));
    }
    let temperature = -0.5 / lam.l2;
    let u = lam.l1.map(|x| -x / (2.0 * lam.l2));
    let n = (m * (lam.l0 + norm2(u) / (2.0 * temperature))).exp()
        * (2.0 * PI * temperature / m).powf(1.5);
    Ok(MaxwellianParams { n, u, temperature })
}
