//! Derived time scales of a run configuration.

use std::f64::consts::TAU;

use super::RunConfig;
use crate::{PhysicalConstants, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    /// Rotation rate, rad/s.
    pub omega: f64,
    /// Drive periods per revolution; `None` at rest.
    pub cycles_per_revolution: Option<f64>,
    /// Time step, s.
    pub dt: f64,
    pub steps_per_period: f64,
    /// `None` at rest.
    pub steps_per_revolution: Option<f64>,
    /// `(ΩR/c)²`.
    pub rotation_parameter: f64,
    /// Lowest resonance of the empty box, Hz.
    pub lowest_mode: f64,
    /// Drive frequency over the lowest resonance.
    pub drive_over_mode: f64,
    /// Steps the configured duration takes.
    pub steps: u64,
}

impl ConsistencyReport {
    /// `key=value` lines, one per quantity.
    pub fn lines(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or("inf".to_string(), |v| format!("{v:.6}"));
        vec![
            format!("omega_rad_s={:.6}", self.omega),
            format!("cycles_per_revolution={}", opt(self.cycles_per_revolution)),
            format!("dt_s={:.6e}", self.dt),
            format!("steps_per_period={:.3}", self.steps_per_period),
            format!("steps_per_revolution={}", opt(self.steps_per_revolution)),
            format!("rotation_parameter={:.6e}", self.rotation_parameter),
            format!("lowest_mode_hz={:.6e}", self.lowest_mode),
            format!("drive_over_mode={:.6e}", self.drive_over_mode),
            format!("steps={}", self.steps),
        ]
    }
}

/// Lowest resonance `(c/2)·sqrt(1/a² + 1/b²)` of a box whose two longest
/// edges are `a` and `b`.
pub fn lowest_box_mode(lengths: [f64; 3], c: f64) -> f64 {
    let mut l = lengths;
    l.sort_by(|a, b| b.total_cmp(a));
    0.5 * c * (l[0].powi(-2) + l[1].powi(-2)).sqrt()
}

pub fn consistency_report(cfg: &RunConfig) -> Result<ConsistencyReport> {
    let consts = PhysicalConstants::SI;
    let g = cfg.grid.build()?;
    let omega = cfg.material.omega();
    let f = cfg.source.frequency;
    let revolution = (omega != 0.0).then(|| TAU / omega.abs());
    let f110 = lowest_box_mode(cfg.grid.lengths, consts.c);
    Ok(ConsistencyReport {
        omega,
        cycles_per_revolution: revolution.map(|t| t * f),
        dt: g.dt,
        steps_per_period: 1.0 / (f * g.dt),
        steps_per_revolution: revolution.map(|t| t / g.dt),
        rotation_parameter: (omega * cfg.material.radius / consts.c).powi(2),
        lowest_mode: f110,
        drive_over_mode: f / f110,
        steps: cfg.steps(&g)?,
    })
}
