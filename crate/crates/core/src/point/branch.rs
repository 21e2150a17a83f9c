//! Closed-form solution of a single channel along a monotone drive branch.
//!
//! With the Ψ sign and the drive direction held, the response obeys the
//! linear equation `dr/dd = η(α f(d) + b ξ r)`, where `b` is the sign of
//! the response term in Ψ and `η` folds together the Ψ prefactor, the
//! channel's coupling factor and `κ S_Ψ + θ S_d`. Its solution is
//!
//! ```text
//! r(d) = r0 e^{η b ξ (d − d0)} + η α ∫_{d0}^{d} f(υ) e^{η b ξ (d − υ)} dυ
//! ```

use super::{integrate, psi, shape_fn, Channel, ChannelParams};
use crate::numeric::sgn;
use crate::{Error, PhysicalConstants, Result};

const QUAD_TOL: f64 = 1e-10;
/// Sub-intervals scanned per monotone segment when looking for Ψ zeros.
const SCAN: usize = 64;

/// (Ψ prefactor, coupling factor, sign of the response term).
fn channel_factors(ch: Channel, consts: &PhysicalConstants) -> (f64, f64, f64) {
    match ch {
        Channel::Pe => (consts.eps0, 1.0, -1.0),
        Channel::Ph => (-1.0, -1.0 / consts.c, -1.0),
        Channel::Mh => (-1.0, 1.0, 1.0),
        Channel::Me => (consts.eps0, -consts.c, 1.0),
    }
}

/// Response at drive `e` on the branch that starts at `(e0, p0)` with the
/// given held Ψ sign and drive direction.
pub fn branch_solution(
    e: f64,
    e0: f64,
    p0: f64,
    s_psi: i8,
    s_drive: i8,
    params: &ChannelParams,
    consts: &PhysicalConstants,
) -> Result<f64> {
    if !(e.is_finite() && e0.is_finite() && p0.is_finite()) {
        return Err(Error::NonFinite("branch endpoints"));
    }
    if e == e0 {
        return Ok(p0);
    }
    if sgn(e - e0) != s_drive {
        return Err(Error::BranchDirection { s_drive, e0, e });
    }
    let (pre, coupling, b) = channel_factors(params.channel, consts);
    let eta = pre * coupling * (params.kappa * f64::from(s_psi) + params.theta * f64::from(s_drive));
    if eta == 0.0 {
        return Ok(p0);
    }
    let rate = eta * b * params.xi;
    let integral = integrate(|u| shape_fn(u, params.beta) * (rate * (e - u)).exp(), e0, e, QUAD_TOL)?;
    Ok(p0 * (rate * (e - e0)).exp() + eta * params.alpha * integral)
}

/// Response along a sampled drive path, treated as piecewise linear, from
/// the initial point `(e_start, p_start)`. Returns one response value per
/// path sample; `path[0]` is reached from `e_start` first.
///
/// Each monotone piece is solved in closed form; zeros of Ψ inside a piece
/// are located by bisection and the branch restarted there. A point sitting
/// on Ψ = 0 leaves on the branch whose Ψ sign follows the drive.
pub fn oracle_along_path(
    params: &ChannelParams,
    consts: &PhysicalConstants,
    e_start: f64,
    p_start: f64,
    path: &[f64],
) -> Result<Vec<f64>> {
    params.validate()?;
    let (pre, _, _) = channel_factors(params.channel, consts);
    let mut out = Vec::with_capacity(path.len());
    let (mut e, mut p) = (e_start, p_start);
    for &target in path {
        if !target.is_finite() {
            return Err(Error::NonFinite("oracle path sample"));
        }
        p = along_segment(params, consts, pre, e, p, target)?;
        e = target;
        out.push(p);
    }
    Ok(out)
}

fn along_segment(
    params: &ChannelParams,
    consts: &PhysicalConstants,
    pre: f64,
    mut e0: f64,
    mut p0: f64,
    target: f64,
) -> Result<f64> {
    let s_drive = sgn(target - e0);
    if s_drive == 0 {
        return Ok(p0);
    }
    let entry_sign = |e: f64, p: f64| {
        let s = sgn(psi(params, e, p, consts));
        if s == 0 {
            sgn(pre) * s_drive
        } else {
            s
        }
    };
    // Each restart happens on a genuine Ψ zero; the cap guards against
    // pathological chatter.
    for _ in 0..1000 {
        let s_psi = entry_sign(e0, p0);
        let solve = |e: f64| branch_solution(e, e0, p0, s_psi, s_drive, params, consts);
        let held = |e: f64, p: f64| sgn(psi(params, e, p, consts)) != -s_psi;
        let mut prev = e0;
        let mut crossing = None;
        for k in 1..=SCAN {
            let e = if k == SCAN {
                target
            } else {
                e0 + (target - e0) * k as f64 / SCAN as f64
            };
            if !held(e, solve(e)?) {
                crossing = Some((prev, e));
                break;
            }
            prev = e;
        }
        let Some((mut lo, mut hi)) = crossing else {
            return solve(target);
        };
        let tol = 1e-13 * (target - e0).abs().max(e0.abs());
        while (hi - lo).abs() > tol {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if held(mid, solve(mid)?) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        p0 = solve(hi)?;
        e0 = hi;
        if e0 == target {
            return Ok(p0);
        }
    }
    Err(Error::NotConverged("branch oracle restarted too often".into()))
}
