//! Zero-dimensional generalized Coleman–Hodgdon hysteresis.
//!
//! A single material point carries an electric polarization `P` and a
//! magnetization `M`, each measured along the soft direction of its channel.
//! Four channels couple drive to response:
//!
//! | channel | drive | response | Ψ |
//! |---------|-------|----------|---|
//! | `pe` | E | P | `+ε0(α f(E) − ξ P)` |
//! | `ph` | H | P | `−(α f(H) − ξ P)` |
//! | `mh` | H | M | `−(α f(H) + ξ M)` |
//! | `me` | E | M | `+ε0(α f(E) + ξ M)` |
//!
//! with `f(z) = tanh(β z)` and per-channel susceptibility
//! `X = Ψ [κ sgn(Ψ) + θ sgn(drive rate)]`. The inertial evolution is
//!
//! ```text
//! dP/dt = X_pe dE/dt − (1/c) X_ph dH/dt
//! dM/dt = X_mh dH/dt − c X_me dE/dt
//! ```
//!
//! Because the right-hand side is homogeneous of degree one in the drive
//! rates the (drive, response) locus is independent of how fast the drive
//! path is traversed.

mod branch;
mod drive;
mod metrics;
mod quadrature;
mod trace;

pub use branch::{branch_solution, oracle_along_path};
pub use drive::{Drive, FnDrive, PiecewiseLinear, Sinusoid, ZeroDrive};
pub use metrics::{loop_metrics, loop_metrics_from, LoopMetrics};
pub use quadrature::integrate;
pub use trace::{BranchEvent, BranchEventKind, TraceRecord, TraceRow};

use crate::numeric::sgn;
use crate::{Error, PhysicalConstants, Result};

/// One of the four magneto-electric coupling channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    /// Electric polarization driven by the electric field.
    Pe,
    /// Electric polarization driven by the magnetic field.
    Ph,
    /// Magnetization driven by the electric field.
    Me,
    /// Magnetization driven by the magnetic field.
    Mh,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Pe, Channel::Ph, Channel::Me, Channel::Mh];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Pe => "pe",
            Channel::Ph => "ph",
            Channel::Me => "me",
            Channel::Mh => "mh",
        }
    }

    fn electric_drive(self) -> bool {
        matches!(self, Channel::Pe | Channel::Me)
    }
}

/// Hysteresis constants for one channel.
///
/// `beta` is in m/V for electrically driven channels and m/A for
/// magnetically driven ones. `xi` is paired with the response so that
/// `xi * response` is dimensionless (m²/C against P, m/A against M).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub channel: Channel,
    pub alpha: f64,
    pub beta: f64,
    pub xi: f64,
    pub kappa: f64,
    pub theta: f64,
}

impl ChannelParams {
    pub fn new(channel: Channel, alpha: f64, beta: f64, xi: f64, kappa: f64, theta: f64) -> Result<Self> {
        let p = Self {
            channel,
            alpha,
            beta,
            xi,
            kappa,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    /// The ferroelectric parameter set used for the cavity experiment:
    /// α = 3.6e4, β = 2.0e-6 m/V, ξ = 1.3e5 m²/C, κ = θ = 0.5.
    pub fn ferroelectric() -> Self {
        Self {
            channel: Channel::Pe,
            alpha: 3.6e4,
            beta: 2.0e-6,
            xi: 1.3e5,
            kappa: 0.5,
            theta: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("xi", self.xi)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        for (name, v) in [("kappa", self.kappa), ("theta", self.theta)] {
            if !v.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Saturation response `α/ξ`, the Ψ = 0 fixed point as `f → 1`.
    pub fn saturation(&self) -> f64 {
        self.alpha / self.xi
    }
}

/// The set of active channels; `None` means the channel is absent.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChannelSet {
    pub pe: Option<ChannelParams>,
    pub ph: Option<ChannelParams>,
    pub me: Option<ChannelParams>,
    pub mh: Option<ChannelParams>,
}

impl ChannelSet {
    pub fn new(
        pe: Option<ChannelParams>,
        ph: Option<ChannelParams>,
        me: Option<ChannelParams>,
        mh: Option<ChannelParams>,
    ) -> Result<Self> {
        let set = Self { pe, ph, me, mh };
        for (slot, p) in set.iter_slots() {
            if let Some(p) = p {
                p.validate()?;
                if p.channel != slot {
                    return Err(Error::param(
                        "channel",
                        format!("{} parameters placed in the {} slot", p.channel.name(), slot.name()),
                    ));
                }
            }
        }
        Ok(set)
    }

    /// Purely ferroelectric medium.
    pub fn pe_only(pe: ChannelParams) -> Result<Self> {
        Self::new(Some(pe), None, None, None)
    }

    fn iter_slots(&self) -> [(Channel, Option<ChannelParams>); 4] {
        [
            (Channel::Pe, self.pe),
            (Channel::Ph, self.ph),
            (Channel::Me, self.me),
            (Channel::Mh, self.mh),
        ]
    }

    fn get(&self, ch: Channel) -> Option<&ChannelParams> {
        match ch {
            Channel::Pe => self.pe.as_ref(),
            Channel::Ph => self.ph.as_ref(),
            Channel::Me => self.me.as_ref(),
            Channel::Mh => self.mh.as_ref(),
        }
    }
}

/// State of a material point: drive fields, responses and time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointState {
    /// Electric field along the soft direction, V/m.
    pub e: f64,
    /// Magnetic field along the soft direction, A/m.
    pub h: f64,
    /// Electric polarization, C/m².
    pub p: f64,
    /// Magnetization, A/m.
    pub m: f64,
    /// Time, s.
    pub t: f64,
}

/// Branch bookkeeping for one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchState {
    pub psi: f64,
    pub s_psi: i8,
    pub s_drive: i8,
}

impl BranchState {
    pub fn new(psi: f64, drive_rate: f64) -> Self {
        Self {
            psi,
            s_psi: sgn(psi),
            s_drive: sgn(drive_rate),
        }
    }
}

/// Drive rates held constant over one [`step_inertial`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DriveRates {
    /// dE/dt, V/(m·s).
    pub e: f64,
    /// dH/dt, A/(m·s).
    pub h: f64,
}

/// `tanh(beta * z)`.
#[inline]
pub fn shape_fn(z: f64, beta: f64) -> f64 {
    (beta * z).tanh()
}

/// Branch function Ψ for `params.channel`, with the sign pattern of the
/// table in the module docs. `response` is P for pe/ph and M for me/mh.
#[inline]
pub fn psi(params: &ChannelParams, drive: f64, response: f64, consts: &PhysicalConstants) -> f64 {
    let f = params.alpha * shape_fn(drive, params.beta);
    match params.channel {
        Channel::Pe => consts.eps0 * (f - params.xi * response),
        Channel::Ph => -(f - params.xi * response),
        Channel::Mh => -(f + params.xi * response),
        Channel::Me => consts.eps0 * (f + params.xi * response),
    }
}

/// Scalar susceptibility `κ|Ψ| + θ s Ψ`.
#[inline]
pub fn susceptibility(params: &ChannelParams, psi_val: f64, drive_rate_sign: i8) -> f64 {
    params.kappa * psi_val.abs() + params.theta * f64::from(drive_rate_sign) * psi_val
}

/// Advances the point by `dt` with the drive fields changing linearly at
/// the given rates.
pub fn step_inertial(
    state: PointState,
    rates: DriveRates,
    dt: f64,
    channels: &ChannelSet,
    consts: &PhysicalConstants,
) -> Result<PointState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be finite and > 0, got {dt}")));
    }
    for (what, v) in [
        ("drive rate dE/dt", rates.e),
        ("drive rate dH/dt", rates.h),
        ("state E", state.e),
        ("state H", state.h),
        ("state P", state.p),
        ("state M", state.m),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(what));
        }
    }
    let path = LinearPath {
        t0: state.t,
        e0: state.e,
        h0: state.h,
        rates,
    };
    let mut events = Vec::new();
    let mut out = Integrator::new(&path, channels, consts).advance(state, state.t + dt, &mut events);
    out.e = state.e + rates.e * dt;
    out.h = state.h + rates.h * dt;
    Ok(out)
}

/// Drives a point from the zero state (or `initial`) along `drive` for
/// `duration`, recording one row per step.
pub fn run_drive<D: Drive + ?Sized>(
    drive: &D,
    duration: f64,
    dt: f64,
    channels: &ChannelSet,
    consts: &PhysicalConstants,
) -> Result<TraceRecord> {
    let start = PointState {
        e: drive.electric(0.0),
        h: drive.magnetic(0.0),
        ..PointState::default()
    };
    run_drive_from(drive, start, duration, dt, channels, consts)
}

pub fn run_drive_from<D: Drive + ?Sized>(
    drive: &D,
    start: PointState,
    duration: f64,
    dt: f64,
    channels: &ChannelSet,
    consts: &PhysicalConstants,
) -> Result<TraceRecord> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be finite and > 0, got {dt}")));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::param(
            "duration",
            format!("must be finite and >= 0, got {duration}"),
        ));
    }
    let path = DrivePath {
        drive,
        t_offset: start.t,
    };
    let integrator = Integrator::new(&path, channels, consts);
    // Tolerate rounding in duration/dt so no zero-length final step appears.
    let steps = (duration / dt * (1.0 - 1e-12)).ceil() as u64;
    let mut trace = TraceRecord::default();
    let mut state = start;
    trace.rows.push(integrator.row(&state, 0));
    let mut prev_drive = 0i8;
    for n in 1..=steps {
        let t1 = start.t + (n as f64 * dt).min(duration);
        let t0 = state.t;
        state = integrator.advance(state, t1, &mut trace.events);
        state.e = drive.electric(t1 - start.t);
        state.h = drive.magnetic(t1 - start.t);
        let s_drive = sgn(drive.electric_rate(0.5 * (t0 + t1) - start.t));
        if s_drive != prev_drive && s_drive != 0 && prev_drive != 0 {
            trace.events.push(BranchEvent {
                t: t0,
                e: drive.electric(t0 - start.t),
                p: trace.rows.last().map_or(0.0, |r| r.p),
                kind: BranchEventKind::DriveSign {
                    from: prev_drive,
                    to: s_drive,
                },
            });
        }
        if s_drive != 0 {
            prev_drive = s_drive;
        }
        if !(state.p.is_finite() && state.m.is_finite()) {
            return Err(Error::NonFinite("polarization diverged"));
        }
        trace.rows.push(integrator.row(&state, s_drive));
    }
    Ok(trace)
}

/// Integrates a point along a sampled electric-field history, treating the
/// field as piecewise linear between samples.
pub fn run_history(
    times: &[f64],
    e_values: &[f64],
    initial_p: f64,
    channels: &ChannelSet,
    consts: &PhysicalConstants,
) -> Result<Vec<f64>> {
    if times.len() != e_values.len() {
        return Err(Error::param("history", "times and values differ in length"));
    }
    let mut out = Vec::with_capacity(times.len());
    let Some((&t0, &e0)) = times.first().zip(e_values.first()) else {
        return Ok(out);
    };
    let mut state = PointState {
        e: e0,
        p: initial_p,
        t: t0,
        ..PointState::default()
    };
    out.push(state.p);
    for w in 1..times.len() {
        let dt = times[w] - times[w - 1];
        if dt == 0.0 && e_values[w] == e_values[w - 1] {
            out.push(state.p);
            continue;
        }
        let rate = (e_values[w] - e_values[w - 1]) / dt;
        state = step_inertial(state, DriveRates { e: rate, h: 0.0 }, dt, channels, consts)?;
        state.e = e_values[w];
        state.t = times[w];
        out.push(state.p);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Integrator internals

/// Drive fields and their rates as functions of absolute time.
trait Path {
    fn eval(&self, t: f64) -> [f64; 4];
}

struct LinearPath {
    t0: f64,
    e0: f64,
    h0: f64,
    rates: DriveRates,
}

impl Path for LinearPath {
    fn eval(&self, t: f64) -> [f64; 4] {
        let s = t - self.t0;
        [
            self.e0 + self.rates.e * s,
            self.h0 + self.rates.h * s,
            self.rates.e,
            self.rates.h,
        ]
    }
}

struct DrivePath<'a, D: ?Sized> {
    drive: &'a D,
    t_offset: f64,
}

impl<D: Drive + ?Sized> Path for DrivePath<'_, D> {
    fn eval(&self, t: f64) -> [f64; 4] {
        let s = t - self.t_offset;
        [
            self.drive.electric(s),
            self.drive.magnetic(s),
            self.drive.electric_rate(s),
            self.drive.magnetic_rate(s),
        ]
    }
}

/// Signs held fixed across one RK4 sub-step.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HeldSigns {
    psi: [i8; 4],
    e_rate: i8,
    h_rate: i8,
}

const MAX_EVENTS_PER_STEP: usize = 16;

struct Integrator<'a, P: ?Sized> {
    path: &'a P,
    channels: &'a ChannelSet,
    consts: &'a PhysicalConstants,
}

impl<'a, P: Path + ?Sized> Integrator<'a, P> {
    fn new(path: &'a P, channels: &'a ChannelSet, consts: &'a PhysicalConstants) -> Self {
        Self { path, channels, consts }
    }

    fn psis(&self, e: f64, h: f64, p: f64, m: f64) -> [Option<f64>; 4] {
        Channel::ALL.map(|ch| {
            self.channels.get(ch).map(|cp| {
                let drive = if ch.electric_drive() { e } else { h };
                let response = if matches!(ch, Channel::Pe | Channel::Ph) { p } else { m };
                psi(cp, drive, response, self.consts)
            })
        })
    }

    fn row(&self, s: &PointState, s_drive: i8) -> TraceRow {
        let psis = self.psis(s.e, s.h, s.p, s.m);
        let primary = psis[0].or(psis[3]).unwrap_or(0.0);
        TraceRow {
            t: s.t,
            e: s.e,
            p: s.p,
            h: s.h,
            m: s.m,
            s_psi: sgn(primary),
            s_drive,
        }
    }

    /// `rate_t` is where the drive rates are sampled; it stays strictly
    /// inside the sub-step so a kink at a step boundary is not seen.
    fn rhs(&self, t: f64, rate_t: f64, p: f64, m: f64, signs: &HeldSigns) -> (f64, f64) {
        let [e, h, _, _] = self.path.eval(t);
        let [_, _, e_rate, h_rate] = self.path.eval(rate_t);
        let psis = self.psis(e, h, p, m);
        let mut dp = 0.0;
        let mut dm = 0.0;
        for (idx, ch) in Channel::ALL.into_iter().enumerate() {
            let (Some(cp), Some(psi_v)) = (self.channels.get(ch), psis[idx]) else {
                continue;
            };
            let s_rate = if ch.electric_drive() {
                signs.e_rate
            } else {
                signs.h_rate
            };
            let x = psi_v * (cp.kappa * f64::from(signs.psi[idx]) + cp.theta * f64::from(s_rate));
            match ch {
                Channel::Pe => dp += x * e_rate,
                Channel::Ph => dp -= x * h_rate / self.consts.c,
                Channel::Mh => dm += x * h_rate,
                Channel::Me => dm -= self.consts.c * x * e_rate,
            }
        }
        (dp, dm)
    }

    fn rk4(&self, y: &PointState, h: f64, signs: &HeldSigns) -> PointState {
        let t = y.t;
        let nudge = 1e-12 * h;
        let mid = t + 0.5 * h;
        let (k1p, k1m) = self.rhs(t, t + nudge, y.p, y.m, signs);
        let (k2p, k2m) = self.rhs(mid, mid, y.p + 0.5 * h * k1p, y.m + 0.5 * h * k1m, signs);
        let (k3p, k3m) = self.rhs(mid, mid, y.p + 0.5 * h * k2p, y.m + 0.5 * h * k2m, signs);
        let (k4p, k4m) = self.rhs(t + h, t + h - nudge, y.p + h * k3p, y.m + h * k3m, signs);
        let [e, hh, _, _] = self.path.eval(t + h);
        PointState {
            e,
            h: hh,
            p: y.p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
            m: y.m + h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m),
            t: t + h,
        }
    }

    fn current_psi_signs(&self, y: &PointState) -> [i8; 4] {
        let [e, h, _, _] = self.path.eval(y.t);
        self.psis(e, h, y.p, y.m).map(|v| v.map_or(0, sgn))
    }

    /// Index of a channel whose Ψ sign at `y` contradicts the held sign.
    fn flipped(&self, y: &PointState, held: &HeldSigns) -> Option<usize> {
        let now = self.current_psi_signs(y);
        (0..4).find(|&i| held.psi[i] != 0 && now[i] == -held.psi[i])
    }

    /// Resolves Ψ signs at the start of a sub-step. A channel sitting
    /// exactly on Ψ = 0 takes the sign Ψ acquires over a trial step.
    fn resolve_signs(&self, y: &PointState, h: f64, e_rate: i8, h_rate: i8) -> HeldSigns {
        let mut held = HeldSigns {
            psi: self.current_psi_signs(y),
            e_rate,
            h_rate,
        };
        if held.psi.contains(&0) {
            let trial = self.rk4(y, h, &held);
            let after = self.current_psi_signs(&trial);
            for (s, a) in held.psi.iter_mut().zip(after) {
                if *s == 0 {
                    *s = a;
                }
            }
        }
        held
    }

    fn drive_signs(&self, t0: f64, t1: f64) -> (i8, i8) {
        let [_, _, er, hr] = self.path.eval(0.5 * (t0 + t1));
        (sgn(er), sgn(hr))
    }

    /// Earliest zero of either drive rate strictly inside (t0, t1).
    fn drive_rate_zero(&self, t0: f64, t1: f64) -> Option<f64> {
        let [_, _, ea, ha] = self.path.eval(t0);
        let [_, _, eb, hb] = self.path.eval(t1);
        let mut best: Option<f64> = None;
        for (ra, rb, idx) in [(ea, eb, 2usize), (ha, hb, 3usize)] {
            if ra * rb < 0.0 {
                let (mut lo, mut hi) = (t0, t1);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let rm = self.path.eval(mid)[idx];
                    if rm * ra > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                best = Some(best.map_or(hi, |b: f64| b.min(hi)));
            }
        }
        best
    }

    fn advance(&self, mut y: PointState, t_end: f64, events: &mut Vec<BranchEvent>) -> PointState {
        let span = t_end - y.t;
        if span <= 0.0 {
            return y;
        }
        while y.t < t_end {
            let seg_end = match self.drive_rate_zero(y.t, t_end) {
                Some(tz) if tz > y.t && tz < t_end => tz,
                _ => t_end,
            };
            let (e_rate, h_rate) = self.drive_signs(y.t, seg_end);
            let n = self.substeps(y.t, seg_end);
            let t0 = y.t;
            for k in 1..=n {
                let t1 = if k == n {
                    seg_end
                } else {
                    t0 + (seg_end - t0) * k as f64 / n as f64
                };
                y = self.advance_fixed_drive(y, t1, e_rate, h_rate, span, events);
            }
        }
        y
    }

    /// Number of RK4 sub-steps keeping the drive change per sub-step small
    /// against both the relaxation scale and the shape-function scale.
    /// The drive is monotone on `[t0, t1]`, so the endpoint change bounds it.
    fn substeps(&self, t0: f64, t1: f64) -> usize {
        const MAX_STAGE: f64 = 0.05;
        let [e0, h0, _, _] = self.path.eval(t0);
        let [e1, h1, _, _] = self.path.eval(t1);
        let mut worst: f64 = 0.0;
        for ch in Channel::ALL {
            let Some(cp) = self.channels.get(ch) else { continue };
            let delta = if ch.electric_drive() {
                (e1 - e0).abs()
            } else {
                (h1 - h0).abs()
            };
            let gain = match ch {
                Channel::Pe => self.consts.eps0,
                Channel::Ph => 1.0 / self.consts.c,
                Channel::Mh => 1.0,
                Channel::Me => self.consts.c * self.consts.eps0,
            };
            let stiff = (cp.kappa.abs() + cp.theta.abs()) * gain * cp.xi;
            worst = worst.max(stiff * delta).max(cp.beta * delta);
        }
        ((worst / MAX_STAGE).ceil() as usize).clamp(1, 1 << 20)
    }

    fn advance_fixed_drive(
        &self,
        mut y: PointState,
        t_end: f64,
        e_rate: i8,
        h_rate: i8,
        span: f64,
        events: &mut Vec<BranchEvent>,
    ) -> PointState {
        let tol = 1e-9 * span;
        for _ in 0..MAX_EVENTS_PER_STEP {
            let h = t_end - y.t;
            if h <= 0.0 {
                return y;
            }
            let held = self.resolve_signs(&y, h, e_rate, h_rate);
            let full = self.rk4(&y, h, &held);
            let Some(_) = self.flipped(&full, &held) else {
                return full;
            };
            // Bracket the first Ψ sign change: `lo` keeps the held signs,
            // `hi` has crossed.
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if self.flipped(&self.rk4(&y, mid, &held), &held).is_some() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let crossed = self.rk4(&y, hi, &held);
            let idx = self.flipped(&crossed, &held).unwrap_or(0);
            events.push(BranchEvent {
                t: crossed.t,
                e: crossed.e,
                p: crossed.p,
                kind: BranchEventKind::PsiSign {
                    channel: Channel::ALL[idx],
                    from: held.psi[idx],
                    to: -held.psi[idx],
                },
            });
            y = crossed;
        }
        let held = self.resolve_signs(&y, t_end - y.t, e_rate, h_rate);
        self.rk4(&y, t_end - y.t, &held)
    }
}
