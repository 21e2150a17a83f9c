use super::TraceRecord;
use crate::{Error, Result};

/// Standard descriptors of one closed hysteresis cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoopMetrics {
    /// max |P| over the cycle.
    pub p_sat: f64,
    /// Mean |P| at the E = 0 crossings.
    pub p_remanent: f64,
    /// Mean |E| at the P = 0 crossings.
    pub e_coercive: f64,
    /// ∮ E dP over the cycle, J/m³.
    pub loop_area: f64,
}

/// Relative mismatch between start and end of a cycle above which the
/// cycle is not considered closed.
const CLOSURE_TOL: f64 = 1e-2;

pub fn loop_metrics(trace: &TraceRecord) -> Result<LoopMetrics> {
    loop_metrics_from(&trace.electric(), &trace.polarization())
}

/// Metrics of the last full cycle of the (drive, response) series, where a
/// cycle runs between consecutive maxima of the drive.
pub fn loop_metrics_from(e: &[f64], p: &[f64]) -> Result<LoopMetrics> {
    if e.len() != p.len() {
        return Err(Error::NoClosedCycle("series lengths differ".into()));
    }
    let flat = |v: &[f64]| v.iter().all(|&x| x == v.first().copied().unwrap_or(0.0));
    if flat(e) && flat(p) {
        let p0 = p.first().copied().unwrap_or(0.0);
        let e0 = e.first().copied().unwrap_or(0.0);
        return Ok(LoopMetrics {
            p_sat: p0.abs(),
            p_remanent: if e0 == 0.0 { p0.abs() } else { 0.0 },
            e_coercive: if p0 == 0.0 { e0.abs() } else { 0.0 },
            loop_area: 0.0,
        });
    }
    let maxima = drive_maxima(e);
    if maxima.len() < 2 {
        return Err(Error::NoClosedCycle(format!(
            "need two drive maxima, found {}",
            maxima.len()
        )));
    }
    let (a, b) = (maxima[maxima.len() - 2], maxima[maxima.len() - 1]);
    let (ec, pc) = (&e[a..=b], &p[a..=b]);
    let p_range =
        pc.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - pc.iter().cloned().fold(f64::INFINITY, f64::min);
    if (pc[pc.len() - 1] - pc[0]).abs() > CLOSURE_TOL * p_range.max(f64::MIN_POSITIVE) {
        return Err(Error::NoClosedCycle(format!(
            "response drifts by {:e} over the last cycle (range {:e})",
            pc[pc.len() - 1] - pc[0],
            p_range
        )));
    }
    let p_sat = pc.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let p_remanent = mean_abs_at_crossings(ec, pc);
    let e_coercive = mean_abs_at_crossings(pc, ec);
    let loop_area = ec
        .windows(2)
        .zip(pc.windows(2))
        .map(|(ew, pw)| 0.5 * (ew[0] + ew[1]) * (pw[1] - pw[0]))
        .sum();
    Ok(LoopMetrics {
        p_sat,
        p_remanent,
        e_coercive,
        loop_area,
    })
}

/// Indices where the drive turns from rising to falling.
fn drive_maxima(e: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut last_dir = 0i8;
    let mut last_rise_end = 0usize;
    for k in 1..e.len() {
        let d = crate::numeric::sgn(e[k] - e[k - 1]);
        if d == 0 {
            continue;
        }
        if d < 0 && last_dir > 0 {
            out.push(last_rise_end);
        }
        if d > 0 {
            last_rise_end = k;
        }
        last_dir = d;
    }
    out
}

/// Mean |y| where `x` changes sign, linearly interpolated.
fn mean_abs_at_crossings(x: &[f64], y: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for k in 1..x.len() {
        let (x0, x1) = (x[k - 1], x[k]);
        let crosses = (x0 < 0.0 && x1 >= 0.0) || (x0 > 0.0 && x1 <= 0.0);
        if crosses {
            let w = x0 / (x0 - x1);
            sum += (y[k - 1] + w * (y[k] - y[k - 1])).abs();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn zero_drive_gives_zero_metrics() {
        let z = vec![0.0; 50];
        assert_eq!(loop_metrics_from(&z, &z).unwrap(), LoopMetrics::default());
    }

    #[test]
    fn open_trace_is_rejected() {
        let e: Vec<f64> = (0..100).map(|k| k as f64).collect();
        assert!(matches!(loop_metrics_from(&e, &e), Err(Error::NoClosedCycle(_))));
    }

    #[test]
    fn ellipse_metrics_match_analytic_values() {
        // E = cos s, P = 0.5 sin(s + π/2 − φ)... use P = a cos(s − φ).
        let n = 20_000;
        let (a, phi) = (0.3, 0.4_f64);
        let s: Vec<f64> = (0..=3 * n).map(|k| TAU * k as f64 / n as f64).collect();
        let e: Vec<f64> = s.iter().map(|s| s.cos()).collect();
        let p: Vec<f64> = s.iter().map(|s| a * (s - phi).cos()).collect();
        let m = loop_metrics_from(&e, &p).unwrap();
        assert!((m.p_sat - a).abs() < 1e-6);
        // E = 0 at s = π/2: |P| = a sin φ
        assert!((m.p_remanent - a * phi.sin()).abs() < 1e-6);
        // P = 0 at s = φ + π/2: |E| = sin φ
        assert!((m.e_coercive - phi.sin()).abs() < 1e-6);
        // ∮E dP = π · 1 · a · sin φ
        assert!((m.loop_area - std::f64::consts::PI * a * phi.sin()).abs() < 1e-6);
    }
}
