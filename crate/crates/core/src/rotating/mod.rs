//! Constitutive kernel for a ferroelectric cylinder spinning rigidly about
//! its soft (z) axis.
//!
//! Only `Pz`, `Mx` and `My` are evolved: with zero initial polarization the
//! remaining components stay zero. The medium is blended into the vacuum by
//! a radial bump weight that multiplies the hysteretic sources and the
//! conductivity; the fields themselves are never weighted.
//!
//! Co-moving ("hatted") combinations, to first order in `rΩ/c`:
//!
//! ```text
//! ê3 = Ez − Ω (x Bx + y By)
//! P̂3 = Pz − (Ω/c²)(x Mx + y My)
//! Ê3 = dEz/dt − Ω (x dBx/dt + y dBy/dt) + Ω (x ∂y − y ∂x) Ez
//! ```
//!
//! and, with `adv f = Ω (y ∂x − x ∂y) f`,
//!
//! ```text
//! dPz/dt = adv Pz + Ψ̂ (κ sgn(Ψ̂) Ê3 + θ |Ê3|),   Ψ̂ = ε0 (α tanh(β ê3) − ξ P̂3)
//! dMx/dt = adv Mx + x Ω ε0 (κ |Ψ| dEz/dt + θ Ψ |dEz/dt|)
//! dMy/dt = adv My + y Ω ε0 (κ |Ψ| dEz/dt + θ Ψ |dEz/dt|)
//! ```
//!
//! where the magnetization sources use the un-hatted `Ψ = α tanh(β Ez) − ξ Pz`.

use ndarray::Array3;

use crate::grid::{Component, GridSpec};
use crate::numeric::{illinois, sgn, smoothstep};
use crate::point::{shape_fn, ChannelParams};
use crate::{Error, PhysicalConstants, Result};

/// Largest admissible `(ΩR/c)²`; the kinematics drop terms of that order.
pub const MAX_ROTATION_PARAMETER: f64 = 1e-3;

/// What fills the cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MediumKind {
    /// Rotating hysteretic ferroelectric.
    Hysteretic(ChannelParams),
    /// Linear dielectric at rest, `D = ε0 εr E`.
    Linear { eps_r: f64 },
    /// Empty cavity.
    Vacuum,
}

/// Geometry and constants of the cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSpec {
    pub kind: MediumKind,
    /// Bulk conductivity, S/m.
    pub sigma: f64,
    /// Rotation rate, rad/s.
    pub omega: f64,
    /// Cylinder radius, m.
    pub radius: f64,
    /// Axis position (x, y), m.
    pub center: [f64; 2],
    /// Half-width of the bump transition, m.
    pub transition_width: f64,
}

impl MaterialSpec {
    pub fn validate(&self, consts: &PhysicalConstants) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::param(
                "material.radius",
                format!("must be > 0, got {}", self.radius),
            ));
        }
        if !(self.transition_width.is_finite() && self.transition_width > 0.0) {
            return Err(Error::param(
                "material.transition_width",
                format!("must be > 0, got {}", self.transition_width),
            ));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::param(
                "material.sigma",
                format!("must be >= 0, got {}", self.sigma),
            ));
        }
        if !self.omega.is_finite() {
            return Err(Error::param("material.omega", "must be finite"));
        }
        let rot = (self.omega * self.radius / consts.c).powi(2);
        if rot > MAX_ROTATION_PARAMETER {
            return Err(Error::param(
                "material.omega",
                format!("(ΩR/c)² = {rot:.3e} exceeds {MAX_ROTATION_PARAMETER:e}"),
            ));
        }
        match self.kind {
            MediumKind::Hysteretic(p) => {
                p.validate()?;
                if p.kappa < p.theta.abs() {
                    return Err(Error::param(
                        "hysteresis.kappa",
                        format!(
                            "need kappa >= |theta| for a monotone branch solve, got {} and {}",
                            p.kappa, p.theta
                        ),
                    ));
                }
            }
            MediumKind::Linear { eps_r } => {
                if !(eps_r.is_finite() && eps_r >= 1.0) {
                    return Err(Error::param("material.eps_r", format!("must be >= 1, got {eps_r}")));
                }
                if self.omega != 0.0 {
                    return Err(Error::param(
                        "material.omega",
                        "the linear material is only modelled at rest",
                    ));
                }
            }
            MediumKind::Vacuum => {}
        }
        Ok(())
    }
}

/// C¹ radial bump: 1 for `r ≤ R − w`, 0 for `r ≥ R + w`, `3s² − 2s³` in
/// between with `s = (R + w − r)/(2w)`.
pub fn bump_weight(r: f64, radius: f64, width: f64) -> f64 {
    if r >= radius + width {
        return 0.0;
    }
    if r <= radius - width {
        return 1.0;
    }
    // Written as ½ + (R − r)/(2w) so that r = R lands on ½ exactly.
    smoothstep(0.5 + (radius - r) / (2.0 * width))
}

/// Per-sub-lattice weights and moment arms of the cylinder on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMap {
    pub spec: MaterialSpec,
    pub grid: GridSpec,
    /// Bump weights at the Ex, Ey, Ez sites.
    pub w_ex: Array3<f64>,
    pub w_ey: Array3<f64>,
    pub w_ez: Array3<f64>,
    /// Bump weights at the Hx, Hy sites.
    pub w_hx: Array3<f64>,
    pub w_hy: Array3<f64>,
}

impl MaterialMap {
    pub fn build(spec: MaterialSpec, g: &GridSpec, consts: &PhysicalConstants) -> Result<Self> {
        spec.validate(consts)?;
        let weights = |c: Component| {
            Array3::from_shape_fn(c.shape(g), |(i, j, k)| match spec.kind {
                MediumKind::Vacuum => 0.0,
                _ => {
                    let [x, y] = spec.arm(g.position(c, [i, j, k]));
                    bump_weight(x.hypot(y), spec.radius, spec.transition_width)
                }
            })
        };
        Ok(Self {
            spec,
            grid: *g,
            w_ex: weights(Component::Ex),
            w_ey: weights(Component::Ey),
            w_ez: weights(Component::Ez),
            w_hx: weights(Component::Hx),
            w_hy: weights(Component::Hy),
        })
    }

    /// Weights on the sub-lattice of `c`; zero arrays for Hz.
    pub fn weight(&self, c: Component) -> Array3<f64> {
        match c {
            Component::Ex => self.w_ex.clone(),
            Component::Ey => self.w_ey.clone(),
            Component::Ez => self.w_ez.clone(),
            Component::Hx => self.w_hx.clone(),
            Component::Hy => self.w_hy.clone(),
            Component::Hz => self.grid.zeros(Component::Hz),
        }
    }

    /// Moment arm `(x, y)` from the axis of sub-lattice site `idx`.
    pub fn arm(&self, c: Component, idx: [usize; 3]) -> [f64; 2] {
        self.spec.arm(self.grid.position(c, idx))
    }

    /// Largest radius with non-zero weight.
    pub fn support_radius(&self) -> f64 {
        self.spec.radius + self.spec.transition_width
    }
}

impl MaterialSpec {
    fn arm(&self, p: [f64; 3]) -> [f64; 2] {
        [p[0] - self.center[0], p[1] - self.center[1]]
    }
}

/// `Ω (y ∂x − x ∂y) f` on the sub-lattice of `c`, with `weight` the bump
/// weight on that sub-lattice.
///
/// Differences are centred where both neighbours carry weight and
/// one-sided where only one does; sites with zero weight get zero.
pub fn advect_phi(
    field: &Array3<f64>,
    c: Component,
    omega: f64,
    g: &GridSpec,
    center: [f64; 2],
    weight: &Array3<f64>,
) -> Result<Array3<f64>> {
    g.check(c, field)?;
    g.check(c, weight)?;
    let mut out = Array3::zeros(field.raw_dim());
    if omega == 0.0 {
        return Ok(out);
    }
    let shape = field.shape().to_vec();
    let diff = |idx: [usize; 3], axis: usize, h: f64| -> f64 {
        let inside = |m: isize| -> Option<usize> {
            if m < 0 || m as usize >= shape[axis] {
                return None;
            }
            let mut q = idx;
            q[axis] = m as usize;
            (weight[q] > 0.0).then_some(m as usize)
        };
        let at = |m: usize| {
            let mut q = idx;
            q[axis] = m;
            field[q]
        };
        let m = idx[axis] as isize;
        match (inside(m - 1), inside(m + 1)) {
            (Some(lo), Some(hi)) => (at(hi) - at(lo)) / (2.0 * h),
            (None, Some(hi)) => (at(hi) - at(idx[axis])) / h,
            (Some(lo), None) => (at(idx[axis]) - at(lo)) / h,
            (None, None) => 0.0,
        }
    };
    for ((i, j, k), o) in out.indexed_iter_mut() {
        let idx = [i, j, k];
        if weight[idx] == 0.0 {
            continue;
        }
        let p = g.position(c, idx);
        let (x, y) = (p[0] - center[0], p[1] - center[1]);
        *o = omega * (y * diff(idx, 0, g.dx) - x * diff(idx, 1, g.dy));
    }
    Ok(out)
}

/// `ê3 = Ez − Ω (x Bx + y By)`.
#[inline]
pub fn hat_e3(ez: f64, bx: f64, by: f64, arm: [f64; 2], omega: f64) -> f64 {
    ez - omega * (arm[0] * bx + arm[1] * by)
}

/// `P̂3 = Pz − (Ω/c²)(x Mx + y My)`.
#[inline]
pub fn hat_p3(pz: f64, mx: f64, my: f64, arm: [f64; 2], omega: f64, consts: &PhysicalConstants) -> f64 {
    pz - omega / (consts.c * consts.c) * (arm[0] * mx + arm[1] * my)
}

/// `Ê3 = dEz/dt − Ω (x dBx/dt + y dBy/dt) − adv Ez`, where `adv_ez` is
/// `Ω (y ∂x − x ∂y) Ez` from [`advect_phi`].
#[inline]
pub fn e3_rate(edot_z: f64, bdot_x: f64, bdot_y: f64, adv_ez: f64, arm: [f64; 2], omega: f64) -> f64 {
    edot_z - omega * (arm[0] * bdot_x + arm[1] * bdot_y) - adv_ez
}

/// Array form of [`hat_e3`] and [`hat_p3`]. `bx`, `by`, `mx`, `my` must
/// already be interpolated to the Ez sites.
#[allow(clippy::too_many_arguments)]
pub fn hat_fields(
    ez: &Array3<f64>,
    bx: &Array3<f64>,
    by: &Array3<f64>,
    pz: &Array3<f64>,
    mx: &Array3<f64>,
    my: &Array3<f64>,
    map: &MaterialMap,
    consts: &PhysicalConstants,
) -> Result<(Array3<f64>, Array3<f64>)> {
    let g = &map.grid;
    for a in [ez, bx, by, pz, mx, my] {
        g.check(Component::Ez, a)?;
    }
    let omega = map.spec.omega;
    let mut e3 = Array3::zeros(ez.raw_dim());
    let mut p3 = Array3::zeros(ez.raw_dim());
    for ((i, j, k), e) in e3.indexed_iter_mut() {
        let q = [i, j, k];
        let arm = map.arm(Component::Ez, q);
        *e = hat_e3(ez[q], bx[q], by[q], arm, omega);
        p3[q] = hat_p3(pz[q], mx[q], my[q], arm, omega, consts);
    }
    Ok((e3, p3))
}

/// `Ψ̂ = ε0 (α tanh(β ê3) − ξ P̂3)`.
#[inline]
pub fn psi_hat(e3: f64, p3: f64, params: &ChannelParams, consts: &PhysicalConstants) -> f64 {
    consts.eps0 * (params.alpha * shape_fn(e3, params.beta) - params.xi * p3)
}

/// Result of the per-cell branch solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EzRateSolution {
    /// dEz/dt, V/(m·s).
    pub edot: f64,
    /// Co-moving rate Ê3, V/(m·s).
    pub e3_rate: f64,
    /// Consistent sign of Ê3.
    pub s_e: i8,
    /// Branch susceptibility used, F/m (already weighted).
    pub chi: f64,
}

/// Branch susceptibility `w (κ s_Ψ + θ s_E) Ψ̂`.
#[inline]
pub fn branch_chi(psi: f64, s_psi: i8, s_e: i8, weight: f64, params: &ChannelParams) -> f64 {
    weight * psi * (params.kappa * f64::from(s_psi) + params.theta * f64::from(s_e))
}

/// Solves `ε0 (Ê3 − K) = R − χ(sgn Ê3) Ê3` for one cell, where `R` is
/// `(∇×H)z − σ Ez − adv Pz − jz` and `K` the known part of `Ê3`
/// (`Ê3 = dEz/dt + K`).
///
/// `ε0 Ê3 + χ(sgn Ê3) Ê3` is increasing and vanishes at zero when
/// `χ ≥ 0` on both branches, so the consistent branch is
/// `sgn(R + ε0 K)`.
pub fn solve_ez_rate(
    rhs: f64,
    known: f64,
    psi: f64,
    s_psi: i8,
    weight: f64,
    params: &ChannelParams,
    consts: &PhysicalConstants,
) -> Result<EzRateSolution> {
    let drive = rhs + consts.eps0 * known;
    let s_e = sgn(drive);
    let chi = branch_chi(psi, s_psi, s_e, weight, params);
    if chi < 0.0 {
        return Err(Error::NegativeSusceptibility(chi));
    }
    let e3_rate = drive / (consts.eps0 + chi);
    Ok(EzRateSolution {
        edot: e3_rate - known,
        e3_rate,
        s_e,
        chi,
    })
}

/// `|β ê3|` beyond which `tanh` is ±1 to double precision.
const FLAT_SHAPE: f64 = 20.0;

/// Change of `P̂3` as `ê3` moves linearly from `e3` by `de`.
///
/// Where `|β ê3| ≥ FLAT_SHAPE` the shape function is constant and the
/// branch equation is linear, so those stretches are solved in closed
/// form. The rest is integrated by classical RK4 with sub-steps that keep
/// each stage's change small against both the relaxation scale
/// `1/(ε0 ξ (κ + θ))` and the shape scale `1/β`.
pub fn branch_increment(
    e3: f64,
    p3: f64,
    de: f64,
    weight: f64,
    params: &ChannelParams,
    consts: &PhysicalConstants,
) -> f64 {
    if de == 0.0 || weight == 0.0 {
        return 0.0;
    }
    let flat = FLAT_SHAPE / params.beta.abs();
    let end = e3 + de;
    let mut cuts = vec![e3];
    for edge in [-flat, flat] {
        if (edge - e3) * (edge - end) < 0.0 {
            cuts.push(edge);
        }
    }
    cuts.push(end);
    if de < 0.0 {
        cuts[1..].sort_by(|a, b| b.total_cmp(a));
    } else {
        cuts[1..].sort_by(|a, b| a.total_cmp(b));
    }
    let mut p = p3;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b == a {
            continue;
        }
        p = if (0.5 * (a + b)).abs() >= flat {
            flat_branch(a, p, b - a, weight, params, consts)
        } else {
            rk4_branch(a, p, b - a, weight, params, consts)
        };
    }
    p - p3
}

/// Exact branch solution with `tanh(β ê3)` pinned at ±1.
fn flat_branch(e3: f64, p3: f64, de: f64, weight: f64, params: &ChannelParams, consts: &PhysicalConstants) -> f64 {
    let fixed = params.alpha * shape_fn(e3, params.beta) / params.xi;
    let psi = psi_hat(e3, p3, params, consts);
    let gain = weight * (params.kappa * psi.signum() + params.theta * de.signum());
    if psi == 0.0 || gain == 0.0 {
        return p3;
    }
    p3 + (p3 - fixed) * (-gain * consts.eps0 * params.xi * de).exp_m1()
}

fn rk4_branch(e3: f64, p3: f64, de: f64, weight: f64, params: &ChannelParams, consts: &PhysicalConstants) -> f64 {
    const MAX_STAGE: f64 = 0.05;
    let s = de.signum();
    let slope = |e: f64, p: f64| {
        let psi = psi_hat(e, p, params, consts);
        weight * (params.kappa * psi.abs() + params.theta * s * psi)
    };
    let stiff = consts.eps0 * params.xi * (params.kappa.abs() + params.theta.abs()) * weight;
    let n = ((stiff.max(params.beta) * de.abs() / MAX_STAGE).ceil() as usize).clamp(1, 1 << 16);
    let h = de / n as f64;
    let mut p = p3;
    for k in 0..n {
        let e = e3 + h * k as f64;
        let k1 = slope(e, p);
        let k2 = slope(e + 0.5 * h, p + 0.5 * h * k1);
        let k3 = slope(e + 0.5 * h, p + 0.5 * h * k2);
        let k4 = slope(e + h, p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    p
}

/// Relative residual the per-step rate solve reaches.
pub const RATE_SOLVE_TOL: f64 = 1e-13;

/// Step-integrated form of [`solve_ez_rate`]: finds the co-moving rate
/// `Ê3` with `ε0 (Ê3 − K) = R − ΔP̂(Ê3)/dt`, where `ΔP̂` is the exact
/// branch increment of the weighted `pe` channel as `ê3` moves linearly
/// from `e3_0` by `dt·Ê3`, starting from `p3_0`. Unlike a single
/// susceptibility frozen at the start of the step, this follows `Ψ̂`
/// through zero inside the step.
///
/// `u ↦ ε0 u + ΔP̂(u)/dt` is increasing and zero at zero for `κ ≥ |θ|`, so
/// the root lies between 0 and `(R + ε0 K)/ε0`. Returns `(Ê3, ΔP̂)`.
#[allow(clippy::too_many_arguments)]
pub fn solve_ez_rate_along_step(
    rhs: f64,
    known: f64,
    e3_0: f64,
    p3_0: f64,
    weight: f64,
    dt: f64,
    params: &ChannelParams,
    consts: &PhysicalConstants,
) -> Result<(f64, f64)> {
    let drive = rhs + consts.eps0 * known;
    if drive == 0.0 || weight == 0.0 {
        return Ok((drive / consts.eps0, 0.0));
    }
    let increment = |u: f64| Ok::<_, Error>(branch_increment(e3_0, p3_0, u * dt, weight, params, consts));
    // In the sign-normalised variable v = sgn(drive)·u the residual rises
    // from −|drive| at v = 0 to >= 0 at the vacuum rate.
    let sign = drive.signum();
    let residual = |v: f64| -> Result<f64> { Ok(consts.eps0 * v + sign * increment(sign * v)? / dt - drive.abs()) };
    let top = drive.abs() / consts.eps0;
    // Seed with the susceptibility frozen at the start of the step, then
    // widen geometrically until the root is bracketed.
    let psi0 = psi_hat(e3_0, p3_0, params, consts);
    let s_psi = match sgn(psi0) {
        0 => sgn(drive),
        s => s,
    };
    let chi0 = branch_chi(psi0, s_psi, sgn(drive), weight, params).max(0.0);
    let v0 = drive.abs() / (consts.eps0 + chi0);
    let r0 = residual(v0)?;
    let f_tol = RATE_SOLVE_TOL * drive.abs();
    if r0.abs() <= f_tol {
        return Ok((sign * v0, increment(sign * v0)?));
    }
    let mut lo = (0.0, -drive.abs());
    let mut hi;
    let mut widen = 1.0 / 1024.0;
    if r0 < 0.0 {
        lo = (v0, r0);
        loop {
            let v = (v0 * (1.0 + widen)).min(top);
            let r = residual(v)?;
            if r >= 0.0 || v == top {
                hi = (v, r);
                break;
            }
            lo = (v, r);
            widen *= 4.0;
        }
    } else {
        hi = (v0, r0);
        while widen < 1.0 {
            let v = v0 * (1.0 - widen);
            let r = residual(v)?;
            if r <= 0.0 {
                lo = (v, r);
                break;
            }
            hi = (v, r);
            widen *= 4.0;
        }
    }
    let root = sign
        * illinois(residual, lo, hi, f_tol, 200)?
            .ok_or_else(|| Error::NotConverged(format!("Ez rate solve with drive {drive:e}")))?;
    Ok((root, increment(root)?))
}

/// Magnetization source per unit moment arm,
/// `Ω ε0 (κ |Ψ| dEz/dt + θ Ψ |dEz/dt|)` with `Ψ = α tanh(β Ez) − ξ Pz`.
#[inline]
pub fn magnetization_source(
    ez: f64,
    pz: f64,
    edot: f64,
    omega: f64,
    params: &ChannelParams,
    consts: &PhysicalConstants,
) -> f64 {
    let psi = params.alpha * shape_fn(ez, params.beta) - params.xi * pz;
    omega * consts.eps0 * (params.kappa * psi.abs() * edot + params.theta * psi * edot.abs())
}

/// Per-cell polarization state and branch bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumState {
    /// C/m² at Ez sites.
    pub pz: Array3<f64>,
    /// A/m at Hx sites, time level n+½.
    pub mx: Array3<f64>,
    /// A/m at Hy sites, time level n+½.
    pub my: Array3<f64>,
    /// Magnetization one step earlier (n−½).
    pub mx_prev: Array3<f64>,
    pub my_prev: Array3<f64>,
    /// Ψ̂ sign held during the last step.
    pub s_psi: Array3<i8>,
    /// Branch sign of Ê3 chosen in the last step.
    pub s_e: Array3<i8>,
    /// dEz/dt of the last step.
    pub last_edot: Array3<f64>,
}

impl MediumState {
    pub fn zeros(g: &GridSpec) -> Self {
        let ez = Component::Ez.shape(g);
        Self {
            pz: g.zeros(Component::Ez),
            mx: g.zeros(Component::Hx),
            my: g.zeros(Component::Hy),
            mx_prev: g.zeros(Component::Hx),
            my_prev: g.zeros(Component::Hy),
            s_psi: Array3::zeros(ez),
            s_e: Array3::zeros(ez),
            last_edot: g.zeros(Component::Ez),
        }
    }
}

/// Time-integration variant of the Ez/Pz update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Rate solved with the polarization increment integrated exactly
    /// along the step.
    #[default]
    SemiImplicit,
    /// Susceptibility frozen at the start of the step ([`solve_ez_rate`]),
    /// so it lags the polarization by one step.
    LaggedExplicit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::SemiImplicit => "semi_implicit",
            Scheme::LaggedExplicit => "lagged_explicit",
        }
    }
}

/// Ez-site arrays for one [`update_ez_pz`] call. In-plane B and M are
/// already interpolated to the Ez sites.
pub struct EzSiteInputs<'a> {
    /// `(∇×H)z − w σ Ez − w adv Pz − jz`.
    pub rhs: &'a Array3<f64>,
    /// Known part `K` of `Ê3`.
    pub known: &'a Array3<f64>,
    /// `w adv Pz`.
    pub adv_pz: &'a Array3<f64>,
    /// B and M at time level n.
    pub b_now: [&'a Array3<f64>; 2],
    pub m_now: [&'a Array3<f64>; 2],
}

/// Advances Ez and Pz over one step inside the hysteretic medium and
/// returns the magnetization source per unit arm at the Ez sites (time
/// level n+½). Cells with zero weight get the plain vacuum update.
pub fn update_ez_pz(
    ez: &mut Array3<f64>,
    medium: &mut MediumState,
    inputs: &EzSiteInputs<'_>,
    map: &MaterialMap,
    params: &ChannelParams,
    scheme: Scheme,
    consts: &PhysicalConstants,
) -> Result<Array3<f64>> {
    let g = &map.grid;
    let dt = g.dt;
    let omega = map.spec.omega;
    let mut source = g.zeros(Component::Ez);
    for ((i, j, k), e) in ez.indexed_iter_mut() {
        let q = [i, j, k];
        let w = map.w_ez[q];
        let rhs = inputs.rhs[q];
        let known = inputs.known[q];
        if w == 0.0 {
            *e += dt * rhs / consts.eps0;
            continue;
        }
        let arm = map.arm(Component::Ez, q);
        let e0 = *e;
        let p0 = medium.pz[q];
        let e3_0 = hat_e3(e0, inputs.b_now[0][q], inputs.b_now[1][q], arm, omega);
        let p3_0 = hat_p3(p0, inputs.m_now[0][q], inputs.m_now[1][q], arm, omega, consts);
        let psi0 = psi_hat(e3_0, p3_0, params, consts);
        let (edot, chi, e3r, s_e, s_psi) = match scheme {
            Scheme::SemiImplicit => {
                let (e3r, dp3) = solve_ez_rate_along_step(rhs, known, e3_0, p3_0, w, dt, params, consts)?;
                let chi = if e3r != 0.0 { dp3 / (dt * e3r) } else { 0.0 };
                let s_psi = sgn(psi_hat(e3_0 + dt * e3r, p3_0 + dp3, params, consts));
                (e3r - known, chi, e3r, sgn(e3r), s_psi)
            }
            Scheme::LaggedExplicit => {
                let s_psi = match sgn(psi0) {
                    0 => sgn(rhs + consts.eps0 * known),
                    s => s,
                };
                let sol = solve_ez_rate(rhs, known, psi0, s_psi, w, params, consts)?;
                (sol.edot, sol.chi, sol.e3_rate, sol.s_e, s_psi)
            }
        };
        let pdot = inputs.adv_pz[q] + chi * e3r;
        let e_mid = e0 + 0.5 * dt * edot;
        let p_mid = p0 + 0.5 * dt * pdot;
        source[q] = w * magnetization_source(e_mid, p_mid, edot, omega, params, consts);
        *e = e0 + dt * edot;
        medium.pz[q] = p0 + dt * pdot;
        medium.s_e[q] = s_e;
        medium.s_psi[q] = s_psi;
        medium.last_edot[q] = edot;
    }
    Ok(source)
}
