//! Text form of [`RunConfig`]: one `section.key = value` pair per line,
//! `#` starts a comment. Keys not set take the values of
//! [`RunConfig::reference_rest`]. [`LoopConfig`] uses the same syntax for
//! point-model loops.
//!
//! | key | unit |
//! |-----|------|
//! | `grid.nx`, `grid.ny`, `grid.nz` | cells |
//! | `grid.lx`, `grid.ly`, `grid.lz` | m |
//! | `grid.cfl_safety` | fraction of the Courant limit |
//! | `material.model` | `hysteretic`, `linear` or `vacuum` |
//! | `material.eps_r` | relative permittivity (linear model) |
//! | `material.sigma` | S/m |
//! | `material.omega_rpm` | rev/min |
//! | `material.radius`, `material.center_x`, `material.center_y` | m |
//! | `material.transition_width` | m |
//! | `hysteresis.alpha`, `.beta` (m/V), `.xi` (m²/C), `.kappa`, `.theta` | |
//! | `source.frequency` | Hz |
//! | `source.amplitude` | A/m² |
//! | `source.ramp_cycles` | drive periods |
//! | `source.wall_layers` | cells |
//! | `run.duration` (s), `run.periods` or `run.revolutions` | exactly one |
//! | `run.scheme` | `semi_implicit` or `lagged_explicit` |
//! | `run.probe_stride`, `run.diag_stride` | steps |
//! | `probes.<name>` | `x, y, z` in m |
//! | `output.prefix` | file-name stem |
//! | `output.final_snapshot` | `true` or `false` |

use std::fmt::Write as _;
use std::str::FromStr;

use crate::cavity::{consistency_report, Duration, MaterialModel, RunConfig};
use crate::point::ChannelParams;
use crate::rotating::Scheme;
use crate::{Error, Result};

const DURATION_KEYS: [&str; 3] = ["run.duration", "run.periods", "run.revolutions"];

fn value_err(key: &str, reason: impl Into<String>) -> Error {
    Error::ConfigValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| value_err(key, format!("cannot parse `{v}` as a {}", std::any::type_name::<T>())))
}

fn finite(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(value_err(key, "must be finite"))
    }
}

fn point(key: &str, v: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(value_err(key, format!("expected `x, y, z`, got `{v}`")));
    }
    Ok([finite(key, parts[0])?, finite(key, parts[1])?, finite(key, parts[2])?])
}

/// Sets one key. Probe keys add or replace a probe of that name.
pub fn set(cfg: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    let v = value.trim();
    match key {
        "grid.nx" => cfg.grid.cells[0] = num(key, v)?,
        "grid.ny" => cfg.grid.cells[1] = num(key, v)?,
        "grid.nz" => cfg.grid.cells[2] = num(key, v)?,
        "grid.lx" => cfg.grid.lengths[0] = finite(key, v)?,
        "grid.ly" => cfg.grid.lengths[1] = finite(key, v)?,
        "grid.lz" => cfg.grid.lengths[2] = finite(key, v)?,
        "grid.cfl_safety" => cfg.grid.cfl_safety = finite(key, v)?,
        "material.model" => {
            cfg.material.model = match v {
                "hysteretic" => MaterialModel::Hysteretic,
                "linear" => MaterialModel::Linear,
                "vacuum" => MaterialModel::Vacuum,
                _ => return Err(value_err(key, format!("unknown model `{v}`"))),
            }
        }
        "material.eps_r" => cfg.material.eps_r = finite(key, v)?,
        "material.sigma" => cfg.material.sigma = finite(key, v)?,
        "material.omega_rpm" => cfg.material.omega_rpm = finite(key, v)?,
        "material.radius" => cfg.material.radius = finite(key, v)?,
        "material.center_x" => cfg.material.center[0] = finite(key, v)?,
        "material.center_y" => cfg.material.center[1] = finite(key, v)?,
        "material.transition_width" => cfg.material.transition_width = finite(key, v)?,
        "hysteresis.alpha" => cfg.hysteresis.alpha = finite(key, v)?,
        "hysteresis.beta" => cfg.hysteresis.beta = finite(key, v)?,
        "hysteresis.xi" => cfg.hysteresis.xi = finite(key, v)?,
        "hysteresis.kappa" => cfg.hysteresis.kappa = finite(key, v)?,
        "hysteresis.theta" => cfg.hysteresis.theta = finite(key, v)?,
        "source.frequency" => cfg.source.frequency = finite(key, v)?,
        "source.amplitude" => cfg.source.amplitude = finite(key, v)?,
        "source.ramp_cycles" => cfg.source.ramp_cycles = finite(key, v)?,
        "source.wall_layers" => cfg.source.wall_layers = num(key, v)?,
        "run.duration" => cfg.run.duration = Duration::Seconds(finite(key, v)?),
        "run.periods" => cfg.run.duration = Duration::Periods(finite(key, v)?),
        "run.revolutions" => cfg.run.duration = Duration::Revolutions(finite(key, v)?),
        "run.scheme" => {
            cfg.run.scheme = match v {
                "semi_implicit" => Scheme::SemiImplicit,
                "lagged_explicit" => Scheme::LaggedExplicit,
                _ => return Err(value_err(key, format!("unknown scheme `{v}`"))),
            }
        }
        "run.probe_stride" => cfg.run.probe_stride = num(key, v)?,
        "run.diag_stride" => cfg.run.diag_stride = num(key, v)?,
        "output.prefix" => cfg.output.prefix = v.to_string(),
        "output.final_snapshot" => cfg.output.final_snapshot = num(key, v)?,
        _ => {
            let Some(name) = key.strip_prefix("probes.") else {
                return Err(value_err(key, "unknown key"));
            };
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(value_err(key, "probe names use letters, digits, `_` and `-`"));
            }
            let p = point(key, v)?;
            match cfg.probes.iter_mut().find(|(n, _)| n == name) {
                Some(slot) => slot.1 = p,
                None => cfg.probes.push((name.to_string(), p)),
            }
        }
    }
    Ok(())
}

/// Calls `f` on each `key = value` line, rejecting malformed lines and
/// keys given twice.
fn for_each_pair(text: &str, mut f: impl FnMut(&str, &str) -> Result<()>) -> Result<()> {
    let mut seen: Vec<String> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigSyntax {
                line: n + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        if seen.iter().any(|k| k == key) {
            return Err(Error::ConfigSyntax {
                line: n + 1,
                reason: format!("`{key}` set twice"),
            });
        }
        if DURATION_KEYS.contains(&key) {
            if let Some(other) = seen.iter().find(|k| DURATION_KEYS.contains(&k.as_str())) {
                return Err(Error::ConfigSyntax {
                    line: n + 1,
                    reason: format!("`{key}` conflicts with `{other}`; give exactly one run length"),
                });
            }
        }
        f(key, value)?;
        seen.push(key.to_string());
    }
    Ok(())
}

/// Parses a whole file. Probes listed in the file replace the default
/// probe set.
pub fn parse(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::reference_rest();
    let mut probes_cleared = false;
    for_each_pair(text, |key, value| {
        if key.starts_with("probes.") && !probes_cleared {
            cfg.probes.clear();
            probes_cleared = true;
        }
        set(&mut cfg, key, value)
    })?;
    Ok(cfg)
}

fn split_assignment(assignment: &str) -> Result<(&str, &str)> {
    let Some((key, value)) = assignment.split_once('=') else {
        return Err(value_err(assignment, "override must look like `key=value`"));
    };
    Ok((key.trim(), value))
}

/// Applies a `key=value` override on top of a parsed configuration.
pub fn apply_override(cfg: &mut RunConfig, assignment: &str) -> Result<()> {
    let (key, value) = split_assignment(assignment)?;
    set(cfg, key, value)
}

/// Canonical text for `cfg`; [`parse`] reads it back to an equal value.
pub fn to_text(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    let f = |x: f64| format!("{x:?}");
    kv("grid.nx", cfg.grid.cells[0].to_string());
    kv("grid.ny", cfg.grid.cells[1].to_string());
    kv("grid.nz", cfg.grid.cells[2].to_string());
    kv("grid.lx", f(cfg.grid.lengths[0]));
    kv("grid.ly", f(cfg.grid.lengths[1]));
    kv("grid.lz", f(cfg.grid.lengths[2]));
    kv("grid.cfl_safety", f(cfg.grid.cfl_safety));
    let m = &cfg.material;
    kv("material.model", m.model.name().to_string());
    kv("material.eps_r", f(m.eps_r));
    kv("material.sigma", f(m.sigma));
    kv("material.omega_rpm", f(m.omega_rpm));
    kv("material.radius", f(m.radius));
    kv("material.center_x", f(m.center[0]));
    kv("material.center_y", f(m.center[1]));
    kv("material.transition_width", f(m.transition_width));
    let h = &cfg.hysteresis;
    kv("hysteresis.alpha", f(h.alpha));
    kv("hysteresis.beta", f(h.beta));
    kv("hysteresis.xi", f(h.xi));
    kv("hysteresis.kappa", f(h.kappa));
    kv("hysteresis.theta", f(h.theta));
    let src = &cfg.source;
    kv("source.frequency", f(src.frequency));
    kv("source.amplitude", f(src.amplitude));
    kv("source.ramp_cycles", f(src.ramp_cycles));
    kv("source.wall_layers", src.wall_layers.to_string());
    match cfg.run.duration {
        Duration::Seconds(x) => kv("run.duration", f(x)),
        Duration::Periods(x) => kv("run.periods", f(x)),
        Duration::Revolutions(x) => kv("run.revolutions", f(x)),
    }
    kv("run.scheme", cfg.run.scheme.name().to_string());
    kv("run.probe_stride", cfg.run.probe_stride.to_string());
    kv("run.diag_stride", cfg.run.diag_stride.to_string());
    for (name, p) in &cfg.probes {
        kv(
            &format!("probes.{name}"),
            format!("{}, {}, {}", f(p[0]), f(p[1]), f(p[2])),
        );
    }
    kv("output.prefix", cfg.output.prefix.clone());
    kv("output.final_snapshot", cfg.output.final_snapshot.to_string());
    s
}

/// Resolved configuration followed by derived quantities as comments.
pub fn metadata_sidecar(cfg: &RunConfig) -> Result<String> {
    let mut s = format!("# ferrocavity {}\n", env!("CARGO_PKG_VERSION"));
    s.push_str(&to_text(cfg));
    for line in consistency_report(cfg)?.lines() {
        let _ = writeln!(s, "# {line}");
    }
    Ok(s)
}

/// Point-model loop experiment: a sinusoidal field applied to the `pe`
/// channel from the zero state.
///
/// | key | unit |
/// |-----|------|
/// | `loop.amplitude` | V/m |
/// | `loop.frequency` | Hz |
/// | `loop.periods` | drive periods |
/// | `loop.steps_per_period` | samples |
/// | `hysteresis.*` | as for runs |
/// | `output.prefix` | file-name stem |
#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub amplitude: f64,
    pub frequency: f64,
    pub periods: f64,
    pub steps_per_period: usize,
    pub hysteresis: ChannelParams,
    pub prefix: String,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            amplitude: 2.0e6,
            frequency: 250.0,
            periods: 4.0,
            steps_per_period: 2000,
            hysteresis: ChannelParams::ferroelectric(),
            prefix: "loop".to_string(),
        }
    }
}

impl LoopConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "loop.amplitude" => self.amplitude = finite(key, v)?,
            "loop.frequency" => self.frequency = finite(key, v)?,
            "loop.periods" => self.periods = finite(key, v)?,
            "loop.steps_per_period" => self.steps_per_period = num(key, v)?,
            "hysteresis.alpha" => self.hysteresis.alpha = finite(key, v)?,
            "hysteresis.beta" => self.hysteresis.beta = finite(key, v)?,
            "hysteresis.xi" => self.hysteresis.xi = finite(key, v)?,
            "hysteresis.kappa" => self.hysteresis.kappa = finite(key, v)?,
            "hysteresis.theta" => self.hysteresis.theta = finite(key, v)?,
            "output.prefix" => self.prefix = v.to_string(),
            _ => return Err(value_err(key, "unknown key")),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for_each_pair(text, |key, value| cfg.set(key, value))?;
        Ok(cfg)
    }

    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = split_assignment(assignment)?;
        self.set(key, value)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(value_err(key, format!("must be > 0, got {v}")))
            }
        };
        positive("loop.frequency", self.frequency)?;
        positive("loop.periods", self.periods)?;
        if self.steps_per_period == 0 {
            return Err(value_err("loop.steps_per_period", "must be >= 1"));
        }
        self.hysteresis.validate()
    }
}
