//! Scenario files: a library scenario, a seeded random engine or an explicit
//! configuration, with an optional one-parameter sweep.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use szilard_core::engine::{random_config, scenario_library, EngineConfig, ScanFamily, ScenarioParams};
use szilard_core::qop::thermal_state;
use szilard_core::random::instance_rng;
use szilard_core::thermo::ThermoContext;

use crate::error::{CliError, CliResult};
use crate::explicit::ExplicitSpec;
use crate::output::Format;

/// Command-line or environment values that take precedence over the file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol_s: Option<f64>,
    pub k_b: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub format: Option<Format>,
    pub path: Option<PathBuf>,
    /// Emit `(sweep value, outcome, W_x, ΔS_W)` rows only.
    #[serde(default)]
    pub plot: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Option<Vec<toml::Value>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    name: Option<String>,
    scenario: Option<String>,
    #[serde(default)]
    non_conforming: bool,
    #[serde(default)]
    params: toml::Table,
    sweep: Option<SweepSpec>,
    #[serde(default)]
    output: OutputSpec,
    explicit: Option<ExplicitSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomParams {
    #[serde(default = "mixed")]
    family: ScanFamily,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    index: u64,
    /// Replace the drawn system state by the thermal state of `H_S`.
    #[serde(default)]
    thermal: bool,
}

fn mixed() -> ScanFamily {
    ScanFamily::Mixed
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub parameter: Option<String>,
    pub value: Option<f64>,
    pub config: EngineConfig,
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub name: String,
    pub points: Vec<SweepPoint>,
    pub output: OutputSpec,
}

const INTEGER_FIELDS: [&str; 6] = ["N", "n", "d", "dim_r", "seed", "index"];

/// First line whose key is `field`, 1-based.
fn field_line(src: &str, field: &str) -> Option<usize> {
    src.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(field).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

struct Ctx<'a> {
    path: &'a Path,
    src: &'a str,
}

impl Ctx<'_> {
    fn invalid(&self, field: &str, message: impl Into<String>) -> CliError {
        CliError::Validation {
            path: self.path.to_path_buf(),
            field: field.to_string(),
            line: field_line(self.src, field),
            message: message.into(),
        }
    }

    /// Splits `field: message` argument errors raised by the engine.
    fn engine(&self, e: szilard_core::Error) -> CliError {
        match &e {
            szilard_core::Error::Argument(msg) => match msg.split_once(": ") {
                Some((field, rest)) if !field.contains(' ') => self.invalid(field, rest),
                _ => self.invalid("params", msg.clone()),
            },
            _ => CliError::Engine(e),
        }
    }

    /// Serde messages name the offending key in backticks.
    fn serde(&self, default_field: &str, e: impl std::fmt::Display) -> CliError {
        let msg = e.to_string();
        let field = msg.split('`').nth(1).filter(|f| !f.contains(' ')).unwrap_or(default_field).to_string();
        self.invalid(&field, msg.trim().to_string())
    }
}

fn sweep_values(spec: &SweepSpec, ctx: &Ctx<'_>) -> CliResult<Vec<toml::Value>> {
    let integer = INTEGER_FIELDS.contains(&spec.parameter.as_str());
    let values = match (&spec.values, spec.start, spec.stop, spec.steps) {
        (Some(v), None, None, None) => v.clone(),
        (None, Some(a), Some(b), Some(n)) => {
            if n < 2 {
                return Err(ctx.invalid("steps", "a range needs at least 2 steps"));
            }
            (0..n)
                .map(|i| {
                    let x = a + (b - a) * i as f64 / (n - 1) as f64;
                    if integer && x.fract() == 0.0 {
                        toml::Value::Integer(x as i64)
                    } else {
                        toml::Value::Float(x)
                    }
                })
                .collect()
        }
        _ => return Err(ctx.invalid("sweep", "give either `values` or all of `start`, `stop` and `steps`")),
    };
    if values.is_empty() {
        return Err(ctx.invalid("values", "sweep has no values"));
    }
    Ok(values)
}

fn numeric(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

/// Reads a scenario file into one certified configuration per sweep point.
pub fn parse_scenario(path: &Path, overrides: &Overrides) -> CliResult<Batch> {
    let src = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_scenario_str(&src, path, overrides)
}

pub fn parse_scenario_str(src: &str, path: &Path, overrides: &Overrides) -> CliResult<Batch> {
    let ctx = Ctx { path, src };
    let raw: RawFile =
        toml::from_str(src).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    let name = raw.name.clone().or_else(|| raw.scenario.clone()).unwrap_or_else(|| "explicit".to_string());

    let points = match (&raw.scenario, &raw.explicit) {
        (Some(_), Some(_)) => return Err(ctx.invalid("explicit", "give either `scenario` or `[explicit]`, not both")),
        (None, None) => return Err(ctx.invalid("scenario", "missing; name a library scenario or give `[explicit]`")),
        (None, Some(spec)) => {
            if raw.sweep.is_some() {
                return Err(ctx.invalid("sweep", "only library and random scenarios can be swept"));
            }
            let mut config = spec.build(&name, raw.non_conforming).map_err(|e| ctx.invalid(&e.field, e.message))?;
            apply_overrides(&mut config, overrides, &ctx)?;
            vec![SweepPoint { parameter: None, value: None, config }]
        }
        (Some(scenario), None) => {
            if raw.non_conforming {
                return Err(ctx.invalid("non_conforming", "only applies to explicit configurations"));
            }
            let tables: Vec<(Option<f64>, toml::Table)> = match &raw.sweep {
                None => vec![(None, raw.params.clone())],
                Some(spec) => sweep_values(spec, &ctx)?
                    .into_iter()
                    .map(|v| {
                        let mut t = raw.params.clone();
                        let x = numeric(&v);
                        t.insert(spec.parameter.clone(), v);
                        (x, t)
                    })
                    .collect(),
            };
            let parameter = raw.sweep.as_ref().map(|s| s.parameter.clone());
            tables
                .into_iter()
                .map(|(value, table)| {
                    let config = build_named(scenario, &name, table, overrides, &ctx)?;
                    Ok(SweepPoint { parameter: parameter.clone(), value, config })
                })
                .collect::<CliResult<Vec<_>>>()?
        }
    };
    Ok(Batch { name, points, output: raw.output })
}

fn build_named(
    scenario: &str,
    name: &str,
    table: toml::Table,
    overrides: &Overrides,
    ctx: &Ctx<'_>,
) -> CliResult<EngineConfig> {
    if scenario == "random" {
        let mut p: RandomParams = toml::Value::Table(table).try_into().map_err(|e| ctx.serde("params", e))?;
        if let Some(seed) = overrides.seed {
            p.seed = seed;
        }
        let mut rng = instance_rng(p.seed, p.index);
        let (mut config, _) = random_config(p.family, &mut rng).map_err(|e| ctx.engine(e))?;
        if p.thermal {
            let tau = thermal_state(&config.h_s, config.thermo.beta()).map_err(CliError::Engine)?;
            config = config.with_rho_s(tau).map_err(CliError::Engine)?;
        }
        config.name = name.to_string();
        apply_overrides(&mut config, overrides, ctx)?;
        return Ok(config);
    }
    let mut params: ScenarioParams = toml::Value::Table(table).try_into().map_err(|e| ctx.serde("params", e))?;
    if let Some(t) = overrides.tol_s {
        params.tol_s = Some(t);
    }
    if let Some(k) = overrides.k_b {
        params.k_b = k;
    }
    let mut config = scenario_library(scenario, &params).map_err(|e| ctx.engine(e))?;
    config.name = name.to_string();
    Ok(config)
}

fn apply_overrides(config: &mut EngineConfig, overrides: &Overrides, ctx: &Ctx<'_>) -> CliResult<()> {
    if let Some(t) = overrides.tol_s {
        if !(t.is_finite() && t >= 0.0) {
            return Err(ctx.invalid("tol_s", format!("must be non-negative, got {t}")));
        }
        config.tolerances.entropy = Some(t);
    }
    if let Some(k) = overrides.k_b {
        config.thermo =
            ThermoContext::new(config.thermo.temperature(), k).map_err(|e| ctx.invalid("k_b", e.to_string()))?;
    }
    Ok(())
}
