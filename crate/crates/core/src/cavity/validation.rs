//! Checks of the lattice against closed-form answers: the lowest cavity
//! resonance, energy conservation, and the field inside a dielectric
//! cylinder in a uniform transverse field.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

use super::Simulation;
use crate::grid::{apply_pec, div_b, max_abs, GridSpec};
use crate::rotating::{bump_weight, MaterialMap, MaterialSpec, MediumKind, Scheme};
use crate::{Error, PhysicalConstants, Result};

/// Fewest steps a resonance scan accepts.
pub const MIN_SCAN_STEPS: usize = 1024;

/// Half-width, in unpadded bins, of the window a peak must dominate.
const PEAK_GUARD_BINS: usize = 4;
/// Weakest reported peak relative to the strongest.
const PEAK_FLOOR: f64 = 1e-8;

/// Spectral peaks of an empty-cavity ring-down.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceScan {
    /// Peak frequencies in increasing order, Hz.
    pub peaks: Vec<f64>,
    /// Bin width of the unpadded record, Hz.
    pub resolution: f64,
}

impl ResonanceScan {
    pub fn lowest(&self) -> Option<f64> {
        self.peaks.first().copied()
    }
}

/// Energy and divergence behaviour of a source-free run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    /// max |W(n) − W(0)| / W(0).
    pub relative_drift: f64,
    /// max over the run of max|div B| · dx / max|B|.
    pub div_b_ratio: f64,
}

/// Interior field of a dielectric cylinder in a uniform applied field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticCheck {
    /// Mean |E| over fully-weighted nodes divided by the applied field.
    pub ratio: f64,
    /// `2/(εr + 1)`.
    pub expected: f64,
    pub iterations: usize,
}

fn empty_cavity(g: &GridSpec, seed: u64) -> Result<Simulation> {
    let spec = MaterialSpec {
        kind: MediumKind::Vacuum,
        sigma: 0.0,
        omega: 0.0,
        radius: g.min_spacing(),
        center: [0.5 * g.lx, 0.5 * g.ly],
        transition_width: g.min_spacing(),
    };
    let map = MaterialMap::build(spec, g, &PhysicalConstants::SI)?;
    let mut sim = Simulation::new(*g, map, None, Scheme::SemiImplicit);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for a in sim.fields.e.arrays_mut() {
        a.mapv_inplace(|_| rng.random_range(-1.0..1.0));
    }
    apply_pec(&mut sim.fields.e, g);
    Ok(sim)
}

/// Rings down random initial E in the empty cavity for `steps` steps and
/// returns the periodogram peaks of Ez at an off-symmetry site.
pub fn resonance_scan(g: &GridSpec, steps: usize, seed: u64) -> Result<ResonanceScan> {
    if steps < MIN_SCAN_STEPS {
        return Err(Error::param(
            "steps",
            format!("{steps} steps cannot resolve a spectrum; need at least {MIN_SCAN_STEPS}"),
        ));
    }
    let mut sim = empty_cavity(g, seed)?;
    let site = [g.nx / 3, g.ny / 4, g.nz / 2];
    let mut trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        sim.step()?;
        trace.push(sim.fields.e.z[site]);
    }
    let mean = trace.iter().sum::<f64>() / steps as f64;
    let n_fft = (4 * steps).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = trace
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let hann = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (steps - 1) as f64).cos();
            Complex::new((v - mean) * hann, 0.0)
        })
        .collect();
    buf.resize(n_fft, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    let power: Vec<f64> = buf[..n_fft / 2].iter().map(|z| z.norm_sqr()).collect();
    let bin = 1.0 / (n_fft as f64 * g.dt);
    // Skip the main lobe of any residual static field.
    let first = 4 * n_fft / steps;
    let top = power[first..].iter().cloned().fold(0.0, f64::max);
    // A peak is the largest value within a few resolution cells, which
    // rejects the window's side lobes, and stands clear of rounding noise.
    let guard = PEAK_GUARD_BINS * n_fft / steps;
    let mut peaks = Vec::new();
    for i in first.max(1)..power.len() - 1 {
        let c = power[i];
        if c < PEAK_FLOOR * top {
            continue;
        }
        let lo = i.saturating_sub(guard);
        let hi = (i + guard + 1).min(power.len());
        if power[lo..hi].iter().any(|&v| v > c) || power[lo..i].contains(&c) {
            continue;
        }
        let (l, c, r) = (power[i - 1].ln(), c.ln(), power[i + 1].ln());
        let denom = l - 2.0 * c + r;
        let shift = if denom != 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
        peaks.push((i as f64 + shift) * bin);
    }
    Ok(ResonanceScan {
        peaks,
        resolution: 1.0 / (steps as f64 * g.dt),
    })
}

/// Runs random initial E source-free for `steps` steps and reports the
/// worst energy drift and divergence of B.
pub fn energy_drift(g: &GridSpec, steps: usize, seed: u64) -> Result<EnergyCheck> {
    let mut sim = empty_cavity(g, seed)?;
    // Start from a consistent leapfrog pair.
    sim.step()?;
    let w0 = sim.energy();
    let mut drift: f64 = 0.0;
    let mut div_ratio: f64 = 0.0;
    let h = g.min_spacing();
    for _ in 0..steps {
        sim.step()?;
        drift = drift.max((sim.energy() - w0).abs() / w0);
        let bmax = sim.fields.b.max_abs();
        if bmax > 0.0 {
            div_ratio = div_ratio.max(max_abs(&div_b(&sim.fields.b, g)?) * h / bmax);
        }
    }
    Ok(EnergyCheck {
        relative_drift: drift,
        div_b_ratio: div_ratio,
    })
}

/// Tolerance of the conjugate-gradient solve, relative to the initial
/// residual.
const CG_TOL: f64 = 1e-10;

/// Potential problem `∇·(ε ∇φ) = 0` on a square node lattice of spacing
/// `spacing` around the cylinder of `spec`, with `φ = −E0 x` on a far
/// boundary and `ε = 1 + w(εr − 1)` sampled at edge midpoints from the
/// same bump the cavity uses.
pub fn static_dielectric_check(eps_r: f64, spec: &MaterialSpec, spacing: f64) -> Result<StaticCheck> {
    if !(eps_r.is_finite() && eps_r >= 1.0) {
        return Err(Error::param("eps_r", format!("must be >= 1, got {eps_r}")));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::param("spacing", format!("must be > 0, got {spacing}")));
    }
    let (radius, width) = (spec.radius, spec.transition_width);
    // Far boundary at about twenty radii; the dipole correction there is
    // below 0.3% of the applied field.
    let half = ((20.0 * (radius + width)) / spacing).ceil() as usize;
    let n = 2 * half + 1;
    let coord = |i: usize| (i as f64 - half as f64) * spacing;
    let eps = |x: f64, y: f64| 1.0 + bump_weight(x.hypot(y), radius, width) * (eps_r - 1.0);
    // eps on the edge from (i, j) to (i+1, j) and from (i, j) to (i, j+1).
    let ex = Array2::from_shape_fn((n - 1, n), |(i, j)| eps(coord(i) + 0.5 * spacing, coord(j)));
    let ey = Array2::from_shape_fn((n, n - 1), |(i, j)| eps(coord(i), coord(j) + 0.5 * spacing));
    let e0 = 1.0;
    let boundary = |i: usize, j: usize| i == 0 || j == 0 || i == n - 1 || j == n - 1;

    // Operator with the Dirichlet nodes eliminated: (A φ)_ij = Σ ε_e (φ_ij − φ_nb).
    let apply = |phi: &Array2<f64>, out: &mut Array2<f64>| {
        for i in 0..n {
            for j in 0..n {
                if boundary(i, j) {
                    out[[i, j]] = 0.0;
                    continue;
                }
                let p = phi[[i, j]];
                let mut s = ex[[i, j]] * (p - phi[[i + 1, j]]) + ex[[i - 1, j]] * (p - phi[[i - 1, j]]);
                s += ey[[i, j]] * (p - phi[[i, j + 1]]) + ey[[i, j - 1]] * (p - phi[[i, j - 1]]);
                out[[i, j]] = s;
            }
        }
    };
    let diag = Array2::from_shape_fn((n, n), |(i, j)| {
        if boundary(i, j) {
            1.0
        } else {
            ex[[i, j]] + ex[[i - 1, j]] + ey[[i, j]] + ey[[i, j - 1]]
        }
    });
    // Split φ = φ_b + u with φ_b carrying the boundary values and u = 0 on
    // the boundary; solve A u = −A φ_b on the interior.
    let phi_b = Array2::from_shape_fn((n, n), |(i, j)| if boundary(i, j) { -e0 * coord(i) } else { 0.0 });
    let mut r = Array2::zeros((n, n));
    apply(&phi_b, &mut r);
    r.mapv_inplace(|v: f64| -v);
    let mut u = Array2::<f64>::zeros((n, n));
    let mut z = &r / &diag;
    let mut p = z.clone();
    let mut ap = Array2::zeros((n, n));
    let mut rz = (&r * &z).sum();
    let r0 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max_iter = 20 * n;
    let mut iterations = 0;
    let mut converged = r0 == 0.0;
    while !converged && iterations < max_iter {
        apply(&p, &mut ap);
        let alpha = rz / (&p * &ap).sum();
        u.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        iterations += 1;
        if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= CG_TOL * r0 {
            converged = true;
            break;
        }
        z = &r / &diag;
        let rz_new = (&r * &z).sum();
        p = &z + &(rz_new / rz * &p);
        rz = rz_new;
    }
    if !converged {
        return Err(Error::NotConverged(format!(
            "static dielectric solve: residual above {CG_TOL:e} after {iterations} iterations"
        )));
    }
    let phi = phi_b + u;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            if bump_weight(coord(i).hypot(coord(j)), radius, width) < 1.0 {
                continue;
            }
            let gx = 0.5 * (phi[[i + 1, j]] - phi[[i - 1, j]]) / spacing;
            let gy = 0.5 * (phi[[i, j + 1]] - phi[[i, j - 1]]) / spacing;
            sum += gx.hypot(gy);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::param(
            "material.radius",
            "no lattice node lies fully inside the cylinder",
        ));
    }
    Ok(StaticCheck {
        ratio: sum / count as f64 / e0,
        expected: 2.0 / (eps_r + 1.0),
        iterations,
    })
}
