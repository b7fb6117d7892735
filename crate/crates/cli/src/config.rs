//! Flat `section.key = value` run configuration.
//!
//! ```text
//! # comment
//! model.lambda = 1.2
//! model.alpha = 0.0
//! domain.bc = dirichlet
//! profile.kind = cosine
//! profile.a0 = 0.2
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use delay_hopf::dde_sim::BumpShape;
use delay_hopf::domain::{transform_parameters, BoundaryCondition, Profile, Raw};

use crate::error::{CliError, CliResult};

const KEYS: &[&str] = &[
    "model.lambda",
    "model.alpha",
    "model.tau",
    "model.d",
    "model.a",
    "model.r",
    "domain.length",
    "domain.n_cells",
    "domain.bc",
    "profile.kind",
    "profile.value",
    "profile.a0",
    "profile.a1",
    "profile.k",
    "profile.values",
    "hopf.n_max",
    "simulate.tau_factor",
    "simulate.t_end",
    "simulate.t_end_delays",
    "simulate.steps_per_delay",
    "simulate.epsilon",
    "simulate.bump",
    "simulate.bump_k",
    "simulate.observe_every",
    "sweep.offsets",
    "sweep.lambdas",
    "output.dir",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub lambda: Option<f64>,
    pub alpha: f64,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub length: f64,
    pub n_cells: usize,
    pub bc: BoundaryCondition,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimDelay {
    Absolute(f64),
    /// Multiple of `tau_0` at the configured `lambda`.
    Factor(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimHorizon {
    Absolute(f64),
    Delays(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub delay: Option<SimDelay>,
    pub horizon: SimHorizon,
    pub steps_per_delay: usize,
    pub epsilon: f64,
    pub bump: BumpShape,
    pub observe_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid {
    /// `lambda = lambda_* + offset`.
    Offsets(Vec<f64>),
    Lambdas(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub domain: DomainSpec,
    pub profile: Profile,
    pub n_max: usize,
    pub sim: SimSpec,
    pub sweep: SweepGrid,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn lambda(&self) -> CliResult<f64> {
        self.model
            .lambda
            .ok_or_else(|| CliError::Config("this command needs model.lambda (or model.d)".into()))
    }
}

fn parse_f64(key: &str, raw: &str) -> CliResult<f64> {
    let bad = || CliError::Config(format!("{key}: cannot read '{raw}' as a number"));
    let s = raw.trim();
    let v = if let Some(rest) = s.strip_suffix("*pi") {
        rest.trim().parse::<f64>().map_err(|_| bad())? * PI
    } else if let Some(rest) = s.strip_prefix("pi/") {
        PI / rest.trim().parse::<f64>().map_err(|_| bad())?
    } else if s == "pi" {
        PI
    } else {
        s.parse::<f64>().map_err(|_| bad())?
    };
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(v)
}

fn parse_usize(key: &str, raw: &str) -> CliResult<usize> {
    raw.trim()
        .parse::<usize>()
        .map_err(|_| CliError::Config(format!("{key}: expected a non-negative integer, got '{raw}'")))
}

fn parse_list(key: &str, raw: &str) -> CliResult<Vec<f64>> {
    let list: Vec<f64> = raw
        .split(',')
        .map(|s| parse_f64(key, s))
        .collect::<CliResult<_>>()?;
    if list.is_empty() {
        return Err(CliError::Config(format!("{key}: empty list")));
    }
    Ok(list)
}

/// Key-value pairs with line numbers; rejects unknown and repeated keys.
fn tokenize(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {}: expected 'section.key = value'", no + 1)));
        };
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("line {}: unknown key '{key}'", no + 1)));
        }
        if value.is_empty() {
            return Err(CliError::Config(format!("line {}: '{key}' has no value", no + 1)));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: '{key}' assigned twice", no + 1)));
        }
    }
    Ok(map)
}

struct Table(BTreeMap<String, String>);

impl Table {
    fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.0.get(key).map(|v| parse_f64(key, v)).transpose()
    }
    fn usize(&self, key: &str) -> CliResult<Option<usize>> {
        self.0.get(key).map(|v| parse_usize(key, v)).transpose()
    }
    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }
    fn forbid(&self, keys: &[&str], reason: &str) -> CliResult<()> {
        match keys.iter().find(|k| self.has(k)) {
            Some(k) => Err(CliError::Config(format!("'{k}' {reason}"))),
            None => Ok(()),
        }
    }
}

fn model(t: &Table) -> CliResult<Model> {
    let transformed = ["model.lambda", "model.alpha", "model.tau"].iter().any(|k| t.has(k));
    let raw = ["model.d", "model.a", "model.r"].iter().any(|k| t.has(k));
    match (transformed, raw) {
        (true, true) => Err(CliError::Config(
            "give either model.lambda/alpha/tau or model.d/a/r, not both".into(),
        )),
        (false, false) => Err(CliError::Config(
            "model section missing: give model.lambda/alpha/tau or model.d/a/r".into(),
        )),
        (true, false) => {
            let alpha = t
                .f64("model.alpha")?
                .ok_or_else(|| CliError::Config("model.alpha is required".into()))?;
            let lambda = t.f64("model.lambda")?;
            if let Some(l) = lambda {
                if !(l > 0.0) {
                    return Err(CliError::Config(format!("model.lambda must be positive, got {l}")));
                }
            }
            let tau = t.f64("model.tau")?;
            if let Some(tau) = tau {
                if !(tau >= 0.0) {
                    return Err(CliError::Config(format!("model.tau must be non-negative, got {tau}")));
                }
            }
            Ok(Model { lambda, alpha, tau })
        }
        (false, true) => {
            let get = |k: &str| {
                t.f64(k)?
                    .ok_or_else(|| CliError::Config(format!("{k} is required with the raw parameterization")))
            };
            let p = transform_parameters(Raw {
                d: get("model.d")?,
                a: get("model.a")?,
                r: get("model.r")?,
            })
            .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Model {
                lambda: Some(p.lambda),
                alpha: p.alpha,
                tau: Some(p.tau),
            })
        }
    }
}

fn domain(t: &Table) -> CliResult<DomainSpec> {
    let bc = match t.str("domain.bc").unwrap_or("dirichlet") {
        "dirichlet" => BoundaryCondition::Dirichlet,
        "noflux" | "no-flux" | "neumann" => BoundaryCondition::NoFlux,
        other => return Err(CliError::Config(format!("domain.bc: unknown boundary condition '{other}'"))),
    };
    Ok(DomainSpec {
        length: t.f64("domain.length")?.unwrap_or(PI),
        n_cells: t.usize("domain.n_cells")?.unwrap_or(100),
        bc,
    })
}

fn profile(t: &Table) -> CliResult<Profile> {
    let kind = t.str("profile.kind").unwrap_or("constant");
    let harmonic = ["profile.a0", "profile.a1", "profile.k"];
    match kind {
        "constant" => {
            t.forbid(&harmonic, "is not used by profile.kind = constant")?;
            t.forbid(&["profile.values"], "is not used by profile.kind = constant")?;
            Ok(Profile::Constant(t.f64("profile.value")?.unwrap_or(1.0)))
        }
        "cosine" | "sine" => {
            t.forbid(&["profile.value", "profile.values"], "is not used by a harmonic profile")?;
            let a0 = t.f64("profile.a0")?.unwrap_or(0.0);
            let a1 = t.f64("profile.a1")?.unwrap_or(1.0);
            let k = t.f64("profile.k")?.unwrap_or(1.0);
            Ok(if kind == "cosine" {
                Profile::Cosine { a0, a1, k }
            } else {
                Profile::Sine { a0, a1, k }
            })
        }
        "table" => {
            t.forbid(&harmonic, "is not used by profile.kind = table")?;
            t.forbid(&["profile.value"], "is not used by profile.kind = table")?;
            let values = t
                .str("profile.values")
                .ok_or_else(|| CliError::Config("profile.values is required for a table profile".into()))?;
            Ok(Profile::Tabulated(parse_list("profile.values", values)?))
        }
        other => Err(CliError::Config(format!("profile.kind: unknown kind '{other}'"))),
    }
}

fn sim(t: &Table, model: &Model) -> CliResult<SimSpec> {
    let factor = t.f64("simulate.tau_factor")?;
    let delay = match (model.tau, factor) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either model.tau or simulate.tau_factor, not both".into(),
            ))
        }
        (Some(tau), None) => Some(SimDelay::Absolute(tau)),
        (None, Some(f)) if f > 0.0 => Some(SimDelay::Factor(f)),
        (None, Some(f)) => return Err(CliError::Config(format!("simulate.tau_factor must be positive, got {f}"))),
        (None, None) => None,
    };
    let horizon = match (t.f64("simulate.t_end")?, t.f64("simulate.t_end_delays")?) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either simulate.t_end or simulate.t_end_delays, not both".into(),
            ))
        }
        (Some(v), None) => SimHorizon::Absolute(v),
        (None, Some(v)) => SimHorizon::Delays(v),
        (None, None) => SimHorizon::Delays(60.0),
    };
    let bump = match t.str("simulate.bump").unwrap_or("uniform") {
        "uniform" => {
            t.forbid(&["simulate.bump_k"], "is only used with simulate.bump = sine")?;
            BumpShape::Uniform
        }
        "sine" => BumpShape::Sine {
            k: t.f64("simulate.bump_k")?.unwrap_or(1.0),
        },
        other => return Err(CliError::Config(format!("simulate.bump: unknown shape '{other}'"))),
    };
    let observe_every = t.usize("simulate.observe_every")?.unwrap_or(100);
    if observe_every == 0 {
        return Err(CliError::Config("simulate.observe_every must be at least 1".into()));
    }
    Ok(SimSpec {
        delay,
        horizon,
        steps_per_delay: t.usize("simulate.steps_per_delay")?.unwrap_or(40),
        epsilon: t.f64("simulate.epsilon")?.unwrap_or(0.01),
        bump,
        observe_every,
    })
}

fn sweep(t: &Table) -> CliResult<SweepGrid> {
    match (t.str("sweep.offsets"), t.str("sweep.lambdas")) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "give either sweep.offsets or sweep.lambdas, not both".into(),
        )),
        (Some(v), None) => Ok(SweepGrid::Offsets(parse_list("sweep.offsets", v)?)),
        (None, Some(v)) => Ok(SweepGrid::Lambdas(parse_list("sweep.lambdas", v)?)),
        (None, None) => Ok(SweepGrid::Offsets(vec![0.04, 0.02, 0.01])),
    }
}

pub fn parse(text: &str) -> CliResult<RunConfig> {
    let t = Table(tokenize(text)?);
    let model = model(&t)?;
    Ok(RunConfig {
        domain: domain(&t)?,
        profile: profile(&t)?,
        n_max: t.usize("hopf.n_max")?.unwrap_or(2),
        sim: sim(&t, &model)?,
        sweep: sweep(&t)?,
        out_dir: t.str("output.dir").map(PathBuf::from),
        model,
    })
}

pub fn load(path: &std::path::Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse(&text)
}
