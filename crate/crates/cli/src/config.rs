//! TOML run configuration.
//!
//! ```toml
//! [[species]]
//! name = "ion"
//! mass = 1.0
//! initial = { kind = "maxwellian", n = 1.0, u = [0.0, 0.0, 0.0], T = 1.0 }
//!
//! [[frequency]]
//! pair = [1, 1]
//! model = { kind = "constant", nu0 = 1.0 }
//!
//! [time]
//! t_final = 1.0
//! ```
//!
//! Parsing fills every default in, so serializing a parsed config gives the
//! normalized document echoed by `check-config`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use bgk_core::dynamics::Scheme;
use bgk_core::grid::{DEFAULT_NODES_PER_AXIS, DEFAULT_WIDTHS, MIN_NODES_PER_AXIS};
use bgk_core::{NewtonConfig, Vec3};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub species: Vec<SpeciesSpec>,
    #[serde(rename = "frequency")]
    pub frequencies: Vec<FrequencySpec>,
    #[serde(default)]
    pub grid: GridSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub newton: NewtonSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub name: String,
    pub mass: f64,
    pub initial: InitialCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxwellianSpec {
    pub n: f64,
    pub u: Vec3,
    #[serde(rename = "T")]
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Maxwellian {
        n: f64,
        u: Vec3,
        #[serde(rename = "T")]
        temperature: f64,
    },
    TwoMaxwellianSum {
        components: [MaxwellianSpec; 2],
    },
    /// Snapshot file; a relative path is taken from the config file's directory.
    TabulatedField {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySpec {
    /// 1-based `(k, j)`.
    pub pair: [usize; 2],
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Constant { nu0: f64 },
    SoftPowerLaw { nu0: f64, gamma: f64 },
    CoulombLike { nu0: f64 },
    Tabulated { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Bounds from the initial macros, `widths` thermal widths around each
    /// species; ignored in favour of the file grid when any species is tabulated.
    Auto {
        #[serde(default = "default_widths")]
        widths: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    Explicit {
        v_min: Vec3,
        v_max: Vec3,
        counts: [usize; 3],
    },
}

fn default_widths() -> f64 {
    DEFAULT_WIDTHS
}

fn default_nodes() -> usize {
    DEFAULT_NODES_PER_AXIS
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto {
            widths: DEFAULT_WIDTHS,
            nodes: DEFAULT_NODES_PER_AXIS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    /// `0.1 / max sum_j nu_ij`, shrunk so that `t_final` is a whole number of steps.
    Auto,
}

impl Serialize for TimeStep {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TimeStep::Fixed(x) => s.serialize_f64(*x),
            TimeStep::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for TimeStep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = TimeStep;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"auto\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> Result<TimeStep, E> {
                Ok(TimeStep::Fixed(x))
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> Result<TimeStep, E> {
                Ok(TimeStep::Fixed(x as f64))
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> Result<TimeStep, E> {
                Ok(TimeStep::Fixed(x as f64))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> Result<TimeStep, E> {
                if s == "auto" {
                    Ok(TimeStep::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(s), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    #[default]
    ExplicitEuler,
    SemiImplicit,
}

impl From<SchemeSpec> for Scheme {
    fn from(s: SchemeSpec) -> Self {
        match s {
            SchemeSpec::ExplicitEuler => Scheme::ExplicitEuler,
            SchemeSpec::SemiImplicit => Scheme::SemiImplicit,
        }
    }
}

fn default_dt() -> TimeStep {
    TimeStep::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default = "default_dt")]
    pub dt: TimeStep,
    pub t_final: f64,
    #[serde(default)]
    pub scheme: SchemeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSpec {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub min_step: f64,
    pub ridge: f64,
}

impl Default for NewtonSpec {
    fn default() -> Self {
        NewtonConfig::default().into()
    }
}

impl From<NewtonConfig> for NewtonSpec {
    fn from(c: NewtonConfig) -> Self {
        NewtonSpec {
            grad_tol: c.grad_tol,
            max_iter: c.max_iter,
            armijo: c.armijo_c,
            backtrack: c.backtrack_factor,
            min_step: c.min_step,
            ridge: c.hessian_ridge,
        }
    }
}

impl From<&NewtonSpec> for NewtonConfig {
    fn from(s: &NewtonSpec) -> Self {
        NewtonConfig {
            grad_tol: s.grad_tol,
            max_iter: s.max_iter,
            armijo_c: s.armijo,
            backtrack_factor: s.backtrack,
            min_step: s.min_step,
            hessian_ridge: s.ridge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Record cadence in steps; the final time is always recorded.
    pub every: usize,
    pub timeseries: PathBuf,
    /// Dump every species at the final time next to the time series.
    pub snapshot: bool,
    pub snapshot_prefix: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            every: 1,
            timeseries: PathBuf::from("timeseries.csv"),
            snapshot: false,
            snapshot_prefix: "snapshot".into(),
        }
    }
}

fn positive(what: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be positive and finite, got {x}")))
    }
}

fn finite3(what: &str, v: Vec3) -> Result<(), ConfigError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be finite, got {v:?}")))
    }
}

fn check_maxwellian(who: &str, n: f64, u: Vec3, t: f64) -> Result<(), ConfigError> {
    positive(&format!("{who}: n"), n)?;
    positive(&format!("{who}: T"), t)?;
    finite3(&format!("{who}: u"), u)
}

fn safe_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl RunConfig {
    /// Parse and validate; no file is touched.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string().trim_end().replace('\n', " | ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.species.len();
        if n == 0 {
            return Err(invalid("at least one [[species]] is required"));
        }
        let mut names = BTreeSet::new();
        for (i, s) in self.species.iter().enumerate() {
            let who = format!("species {} ({})", i + 1, s.name);
            if !safe_name(&s.name) {
                return Err(invalid(format!("{who}: name must be nonempty ASCII letters, digits, '-' or '_'")));
            }
            if !names.insert(s.name.as_str()) {
                return Err(invalid(format!("duplicate species name {:?}", s.name)));
            }
            positive(&format!("{who}: mass"), s.mass)?;
            match &s.initial {
                InitialCondition::Maxwellian { n, u, temperature } => check_maxwellian(&who, *n, *u, *temperature)?,
                InitialCondition::TwoMaxwellianSum { components } => {
                    for c in components {
                        check_maxwellian(&who, c.n, c.u, c.temperature)?;
                    }
                }
                InitialCondition::TabulatedField { .. } => {}
            }
        }

        let mut seen = BTreeSet::new();
        for f in &self.frequencies {
            let [k, j] = f.pair;
            if !(1..=n).contains(&k) || !(1..=n).contains(&j) {
                return Err(invalid(format!("frequency pair ({k},{j}) is out of range for {n} species")));
            }
            if !seen.insert((k, j)) {
                return Err(invalid(format!("duplicate collision frequency for pair ({k},{j})")));
            }
            let who = format!("frequency ({k},{j})");
            match &f.model {
                ModelSpec::Constant { nu0 } | ModelSpec::CoulombLike { nu0 } => positive(&format!("{who}: nu0"), *nu0)?,
                ModelSpec::SoftPowerLaw { nu0, gamma } => {
                    positive(&format!("{who}: nu0"), *nu0)?;
                    if !(*gamma >= 0.0 && gamma.is_finite()) {
                        return Err(invalid(format!("{who}: gamma must be nonnegative, got {gamma}")));
                    }
                }
                ModelSpec::Tabulated { .. } => {}
            }
        }
        for k in 1..=n {
            for j in 1..=n {
                if !seen.contains(&(k, j)) {
                    return Err(invalid(format!("missing collision frequency for pair ({k},{j})")));
                }
            }
        }

        match &self.grid {
            GridSpec::Auto { widths, nodes } => {
                positive("grid.widths", *widths)?;
                if *nodes < MIN_NODES_PER_AXIS {
                    return Err(invalid(format!("grid.nodes must be at least {MIN_NODES_PER_AXIS}, got {nodes}")));
                }
            }
            GridSpec::Explicit { v_min, v_max, counts } => {
                finite3("grid.v_min", *v_min)?;
                finite3("grid.v_max", *v_max)?;
                for a in 0..3 {
                    if v_min[a] >= v_max[a] {
                        return Err(invalid(format!("grid bounds empty on axis {a}: {} >= {}", v_min[a], v_max[a])));
                    }
                    if counts[a] < MIN_NODES_PER_AXIS {
                        return Err(invalid(format!(
                            "grid.counts must be at least {MIN_NODES_PER_AXIS} per axis, got {counts:?}"
                        )));
                    }
                }
            }
        }

        if !(self.time.t_final >= 0.0 && self.time.t_final.is_finite()) {
            return Err(invalid(format!("time.t_final must be nonnegative, got {}", self.time.t_final)));
        }
        if let TimeStep::Fixed(dt) = self.time.dt {
            positive("time.dt", dt)?;
        }
        NewtonConfig::from(&self.newton)
            .validate()
            .map_err(|e| invalid(format!("newton: {e}")))?;
        if self.output.every == 0 {
            return Err(invalid("output.every must be at least 1"));
        }
        if !safe_name(&self.output.snapshot_prefix) {
            return Err(invalid("output.snapshot_prefix must be nonempty ASCII letters, digits, '-' or '_'"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
[[species]]
name = "a"
mass = 1.0
initial = { kind = "maxwellian", n = 1.0, u = [0.0, 0.0, 0.0], T = 1.0 }

[[frequency]]
pair = [1, 1]
model = { kind = "constant", nu0 = 1.0 }

[time]
t_final = 1.0
"#;

    const TWO: &str = r#"
[[species]]
name = "light"
mass = 1.0
initial = { kind = "maxwellian", n = 1.0, u = [1.0, 0.0, 0.0], T = 1.0 }

[[species]]
name = "heavy"
mass = 2.0
initial = { kind = "two_maxwellian_sum", components = [
    { n = 0.5, u = [-1.0, 0.0, 0.0], T = 1.0 },
    { n = 0.5, u = [0.5, 0.0, 0.0], T = 2.0 },
] }

[[frequency]]
pair = [1, 1]
model = { kind = "constant", nu0 = 1.0 }

[[frequency]]
pair = [1, 2]
model = { kind = "coulomb_like", nu0 = 1.0 }

[[frequency]]
pair = [2, 2]
model = { kind = "soft_power_law", nu0 = 1.0, gamma = 1.0 }

[time]
dt = 0.05
t_final = 1.0
scheme = "semi_implicit"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.grid, GridSpec::Auto { widths: 6.0, nodes: 32 });
        assert_eq!(cfg.time.dt, TimeStep::Auto);
        assert_eq!(cfg.time.scheme, SchemeSpec::ExplicitEuler);
        assert_eq!(NewtonConfig::from(&cfg.newton), NewtonConfig::default());
        let echo = cfg.to_toml();
        assert!(echo.contains("widths = 6.0"), "{echo}");
        assert!(echo.contains("nodes = 32"), "{echo}");
        assert!(echo.contains("dt = \"auto\""), "{echo}");
        assert_eq!(RunConfig::parse(&echo).unwrap(), cfg);
    }

    #[test]
    fn missing_pair_is_named() {
        let err = RunConfig::parse(TWO).unwrap_err();
        assert_eq!(err, invalid("missing collision frequency for pair (2,1)"));
        let fixed = format!("{TWO}\n[[frequency]]\npair = [2, 1]\nmodel = {{ kind = \"constant\", nu0 = 0.5 }}\n");
        let cfg = RunConfig::parse(&fixed).unwrap();
        assert_eq!(cfg.time.dt, TimeStep::Fixed(0.05));
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse(&MINIMAL.replace("[[species]]", "[[speceis]]")).unwrap_err();
        assert!(err.to_string().contains("speceis"), "{err}");
        let err = RunConfig::parse(&MINIMAL.replace("T = 1.0", "T = 1.0, tempreature = 2.0")).unwrap_err();
        assert!(err.to_string().contains("tempreature"), "{err}");
        let err = RunConfig::parse(&format!("{MINIMAL}\n[output]\nevry = 2\n")).unwrap_err();
        assert!(err.to_string().contains("evry"), "{err}");
        assert!(!err.to_string().contains('\n'));
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to, needle) in [
            ("mass = 1.0", "mass = 0.0", "mass"),
            ("nu0 = 1.0", "nu0 = -1.0", "nu0"),
            ("T = 1.0", "T = 0.0", "T"),
            ("pair = [1, 1]", "pair = [1, 2]", "(1,2)"),
            ("t_final = 1.0", "t_final = -1.0", "t_final"),
            ("name = \"a\"", "name = \"a/b\"", "name"),
        ] {
            let err = RunConfig::parse(&MINIMAL.replace(from, to)).unwrap_err();
            assert!(err.to_string().contains(needle), "{from} -> {err}");
        }
        let err = RunConfig::parse(&format!("{MINIMAL}\n[grid]\nkind = \"auto\"\nnodes = 4\n")).unwrap_err();
        assert!(err.to_string().contains("nodes"));
        let err = RunConfig::parse(&MINIMAL.replace("t_final = 1.0", "t_final = 1.0\ndt = \"soon\"")).unwrap_err();
        assert!(err.to_string().contains("auto"), "{err}");
    }
}
