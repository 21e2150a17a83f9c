//! The driven cavity: a conducting box holding a (possibly rotating)
//! cylinder, excited by divergence-free wall currents.
//!
//! State at the start of step `n → n+1`: E and Pz at level n, B, M and H at
//! level n+½, plus B and M at n−½. One step
//!
//! 1. forms ∇×H and the source current at n+½,
//! 2. advances Ex, Ey explicitly, and Ez together with Pz through the
//!    per-cell branch solve inside the medium,
//! 3. pins tangential E on the walls,
//! 4. advances B by Faraday's law and M by its rotation-induced sources,
//! 5. rebuilds `H = B/μ0 + M` (Hz carries no magnetization).

mod probe;
mod report;
mod source;
mod validation;

pub use probe::{
    read_diagnostics, write_diagnostics, DiagnosticRow, Probe, ProbeRow, ProbeTrace, DIAGNOSTICS_HEADER, PROBE_HEADER,
};
pub use report::{consistency_report, ConsistencyReport};
pub use source::{Source, SourceSpec};
pub use validation::{energy_drift, resonance_scan, static_dielectric_check, EnergyCheck, ResonanceScan, StaticCheck};

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ndarray::{Array3, Zip};

use crate::grid::{
    apply_pec, avg_from_ez_sites, avg_to_ez_sites, curl_e_into, curl_h_into, div_b, div_d, field_energy, max_abs,
    snapshot::write_snapshot, Component, FieldArrays, GridSpec, Placement, VecField,
};
use crate::point::ChannelParams;
use crate::rotating::{
    advect_phi, update_ez_pz, EzSiteInputs, MaterialMap, MaterialSpec, MediumKind, MediumState, Scheme,
};
use crate::{Error, PhysicalConstants, Result};

/// Multiple of the drive scale beyond which a run is declared unstable.
pub const INSTABILITY_FACTOR: f64 = 1e9;

/// Lattice section of a run configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub cells: [usize; 3],
    /// Cavity edge lengths, m.
    pub lengths: [f64; 3],
    pub cfl_safety: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec> {
        GridSpec::new(self.cells, self.lengths, self.cfl_safety)
    }
}

/// Which constitutive law fills the cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialModel {
    Hysteretic,
    Linear,
    Vacuum,
}

impl MaterialModel {
    pub fn name(self) -> &'static str {
        match self {
            MaterialModel::Hysteretic => "hysteretic",
            MaterialModel::Linear => "linear",
            MaterialModel::Vacuum => "vacuum",
        }
    }
}

/// Material section of a run configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialConfig {
    pub model: MaterialModel,
    /// Relative permittivity of the linear material.
    pub eps_r: f64,
    /// Conductivity, S/m.
    pub sigma: f64,
    /// Rotation rate, revolutions per minute.
    pub omega_rpm: f64,
    /// Cylinder radius, m.
    pub radius: f64,
    /// Axis position (x, y), m.
    pub center: [f64; 2],
    /// Half-width of the bump transition, m.
    pub transition_width: f64,
}

impl MaterialConfig {
    /// Rotation rate in rad/s.
    pub fn omega(&self) -> f64 {
        self.omega_rpm * std::f64::consts::TAU / 60.0
    }
}

/// Length of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Duration {
    Seconds(f64),
    /// Drive periods.
    Periods(f64),
    /// Revolutions of the cylinder.
    Revolutions(f64),
}

/// Run-control section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub duration: Duration,
    pub scheme: Scheme,
    /// Steps between probe samples.
    pub probe_stride: usize,
    /// Steps between diagnostics samples.
    pub diag_stride: usize,
}

/// Output section.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// File-name stem for everything a run writes.
    pub prefix: String,
    /// Write a binary snapshot of the final state.
    pub final_snapshot: bool,
}

/// A complete, deterministic description of a cavity run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub material: MaterialConfig,
    pub hysteresis: ChannelParams,
    pub source: SourceSpec,
    pub run: RunSettings,
    /// Named probe positions, m.
    pub probes: Vec<(String, [f64; 3])>,
    pub output: OutputConfig,
}

impl RunConfig {
    /// The cylinder at rest in the cavity with the ferroelectric parameter
    /// set, driven at 250 Hz for one second.
    pub fn reference_rest() -> Self {
        Self {
            grid: GridConfig {
                cells: [20, 20, 8],
                lengths: [5.45, 5.45, 2.18],
                cfl_safety: 0.5,
            },
            material: MaterialConfig {
                model: MaterialModel::Hysteretic,
                eps_r: 1.0,
                sigma: 2.6e-4,
                omega_rpm: 0.0,
                radius: 1.36,
                center: [2.725, 2.725],
                transition_width: 0.2725,
            },
            hysteresis: ChannelParams::ferroelectric(),
            source: SourceSpec {
                frequency: 250.0,
                amplitude: DEFAULT_AMPLITUDE,
                ramp_cycles: 2.0,
                wall_layers: 2,
            },
            run: RunSettings {
                duration: Duration::Periods(10.0),
                scheme: Scheme::SemiImplicit,
                probe_stride: 1,
                diag_stride: 100,
            },
            probes: vec![("inner".to_string(), [2.45, 2.45, 1.36])],
            output: OutputConfig {
                prefix: "run".to_string(),
                final_snapshot: false,
            },
        }
    }

    /// The rest configuration with the cylinder turning at 1497 rpm for
    /// one revolution.
    pub fn reference_rotating() -> Self {
        let mut c = Self::reference_rest();
        c.material.omega_rpm = 1497.0;
        c.run.duration = Duration::Revolutions(1.0);
        c
    }

    /// `self` with frequency and rotation rate both multiplied by `k`,
    /// keeping the cycles per revolution fixed. The amplitude is divided
    /// by `k` so the inductive vacuum field the source drives is unchanged.
    pub fn scaled(&self, k: f64) -> Self {
        let mut c = self.clone();
        c.source.frequency *= k;
        c.source.amplitude /= k;
        c.material.omega_rpm *= k;
        c
    }

    pub fn material_spec(&self) -> MaterialSpec {
        let m = &self.material;
        MaterialSpec {
            kind: match m.model {
                MaterialModel::Hysteretic => MediumKind::Hysteretic(self.hysteresis),
                MaterialModel::Linear => MediumKind::Linear { eps_r: m.eps_r },
                MaterialModel::Vacuum => MediumKind::Vacuum,
            },
            sigma: m.sigma,
            omega: m.omega(),
            radius: m.radius,
            center: m.center,
            transition_width: m.transition_width,
        }
    }

    /// Run length in seconds.
    pub fn duration_seconds(&self) -> Result<f64> {
        let secs = match self.run.duration {
            Duration::Seconds(s) => s,
            Duration::Periods(p) => p / self.source.frequency,
            Duration::Revolutions(r) => {
                let omega = self.material.omega();
                if omega == 0.0 {
                    return Err(Error::ConfigValue {
                        key: "run.revolutions".into(),
                        reason: "needs a non-zero material.omega_rpm".into(),
                    });
                }
                r * std::f64::consts::TAU / omega.abs()
            }
        };
        if !(secs.is_finite() && secs >= 0.0) {
            return Err(Error::ConfigValue {
                key: "run.duration".into(),
                reason: format!("must be finite and >= 0, got {secs}"),
            });
        }
        Ok(secs)
    }

    /// Number of time steps the run takes.
    pub fn steps(&self, g: &GridSpec) -> Result<u64> {
        Ok((self.duration_seconds()? / g.dt * (1.0 - 1e-12)).ceil() as u64)
    }

    /// Checks every section and builds the lattice.
    pub fn validate(&self) -> Result<GridSpec> {
        let g = self.grid.build()?;
        let consts = PhysicalConstants::SI;
        let map = MaterialMap::build(self.material_spec(), &g, &consts)?;
        Source::build(self.source, &g, Some(&map))?;
        self.duration_seconds()?;
        if self.run.probe_stride == 0 || self.run.diag_stride == 0 {
            return Err(Error::ConfigValue {
                key: "run.probe_stride".into(),
                reason: "strides must be >= 1".into(),
            });
        }
        for (name, p) in &self.probes {
            Probe::new(name, *p, &g)?;
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return Err(Error::ConfigValue {
                key: "output.prefix".into(),
                reason: "must be a non-empty file-name stem".into(),
            });
        }
        Ok(g)
    }
}

/// Default peak source current density at 250 Hz, A/m². In the empty
/// cavity it gives |Ez| ≈ 8e6 V/m at the probe, deep in saturation.
pub const DEFAULT_AMPLITUDE: f64 = 7.0e10;

/// Complete simulation state.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub grid: GridSpec,
    pub map: MaterialMap,
    pub source: Option<Source>,
    pub scheme: Scheme,
    pub consts: PhysicalConstants,
    /// E at level n; B and H at n+½.
    pub fields: FieldArrays,
    /// B at n−½.
    pub b_prev: VecField,
    pub medium: MediumState,
    pub step_count: u64,
    pub time: f64,
    /// Where to write a snapshot if the run aborts.
    pub snapshot_dir: Option<PathBuf>,
    abort_scale: f64,
    curl_e: VecField,
    curl_h: VecField,
}

impl Simulation {
    pub fn new(grid: GridSpec, map: MaterialMap, source: Option<Source>, scheme: Scheme) -> Self {
        let drive = source.as_ref().map_or(1.0, |s| s.spec.amplitude).max(1.0);
        let eta0 = PhysicalConstants::SI.eta0();
        let lmax = grid.lx.max(grid.ly).max(grid.lz);
        Self {
            map,
            source,
            scheme,
            consts: PhysicalConstants::SI,
            fields: FieldArrays::zeros(&grid),
            b_prev: VecField::zeros(&grid, Placement::Faces),
            medium: MediumState::zeros(&grid),
            step_count: 0,
            time: 0.0,
            snapshot_dir: None,
            // E scale of the drive: current density times impedance times size.
            abort_scale: INSTABILITY_FACTOR * (drive * eta0 * lmax).max(1.0),
            curl_e: VecField::zeros(&grid, Placement::Faces),
            curl_h: VecField::zeros(&grid, Placement::Edges),
            grid,
        }
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let g = cfg.validate()?;
        let map = MaterialMap::build(cfg.material_spec(), &g, &PhysicalConstants::SI)?;
        let source = Source::build(cfg.source, &g, Some(&map))?;
        Ok(Self::new(g, map, Some(source), cfg.run.scheme))
    }

    fn hysteresis(&self) -> Option<ChannelParams> {
        match self.map.spec.kind {
            MediumKind::Hysteretic(p) => Some(p),
            _ => None,
        }
    }

    /// Advances the state by one time step.
    pub fn step(&mut self) -> Result<()> {
        let g = self.grid;
        let dt = g.dt;
        let eps0 = self.consts.eps0;
        let sigma = self.map.spec.sigma;
        let t_half = self.time + 0.5 * dt;
        let j = self.source.as_ref().map(|s| s.current(t_half));

        curl_h_into(&self.fields.h, &g, &mut self.curl_h);
        let ch = &self.curl_h;
        let e = &mut self.fields.e;

        let eps_at = |w: f64| match self.map.spec.kind {
            MediumKind::Linear { eps_r } => eps0 * (1.0 + w * (eps_r - 1.0)),
            _ => eps0,
        };
        // Ex, Ey: plain Ampère with conductivity and source.
        for (comp, (field, (curl, w))) in [
            (0usize, (&mut e.x, (&ch.x, &self.map.w_ex))),
            (1usize, (&mut e.y, (&ch.y, &self.map.w_ey))),
        ] {
            let jc = j.as_ref().map(|j| if comp == 0 { &j.x } else { &j.y });
            Zip::indexed(field).and(curl).and(w).for_each(|q, f, &c, &w| {
                let js = jc.map_or(0.0, |a| a[q]);
                *f += dt / eps_at(w) * (c - w * sigma * *f - js);
            });
        }

        let mut m_source = None;
        match self.map.spec.kind {
            MediumKind::Hysteretic(params) => {
                let src = self.ez_hysteretic(&params, j.as_ref().map(|j| &j.z))?;
                m_source = Some(src);
            }
            _ => {
                let e = &mut self.fields.e;
                Zip::indexed(&mut e.z)
                    .and(&ch.z)
                    .and(&self.map.w_ez)
                    .for_each(|q, f, &c, &w| {
                        let js = j.as_ref().map_or(0.0, |j| j.z[q]);
                        *f += dt / eps_at(w) * (c - w * sigma * *f - js);
                    });
            }
        }
        apply_pec(&mut self.fields.e, &g);

        // Faraday.
        curl_e_into(&self.fields.e, &g, &mut self.curl_e);
        std::mem::swap(&mut self.b_prev, &mut self.fields.b);
        self.fields.b.clone_from(&self.b_prev);
        self.fields.b.add_scaled(-dt, &self.curl_e);

        if let Some(src) = m_source {
            self.update_magnetization(&src)?;
        }
        let mu0 = self.consts.mu0;
        let (b, h, med) = (&self.fields.b, &mut self.fields.h, &self.medium);
        Zip::from(&mut h.x)
            .and(&b.x)
            .and(&med.mx)
            .for_each(|h, &b, &m| *h = b / mu0 + m);
        Zip::from(&mut h.y)
            .and(&b.y)
            .and(&med.my)
            .for_each(|h, &b, &m| *h = b / mu0 + m);
        Zip::from(&mut h.z).and(&b.z).for_each(|h, &b| *h = b / mu0);

        self.step_count += 1;
        self.time = self.step_count as f64 * dt;
        self.check_stability()
    }

    /// Ez/Pz update inside the hysteretic medium; returns the
    /// magnetization source per unit arm at the Ez sites.
    fn ez_hysteretic(&mut self, params: &ChannelParams, jz: Option<&Array3<f64>>) -> Result<Array3<f64>> {
        let g = self.grid;
        let dt = g.dt;
        let omega = self.map.spec.omega;
        let sigma = self.map.spec.sigma;
        let center = self.map.spec.center;
        let w = &self.map.w_ez;
        let (b, bp) = (&self.fields.b, &self.b_prev);
        let med = &self.medium;

        let to_ez = |a: &Array3<f64>, c: Component| avg_to_ez_sites(a, c, &g);
        let mid = |a: &Array3<f64>, b: &Array3<f64>| (a + b) * 0.5;
        let bx_now = to_ez(&mid(&b.x, &bp.x), Component::Hx)?;
        let by_now = to_ez(&mid(&b.y, &bp.y), Component::Hy)?;
        let mx_now = to_ez(&mid(&med.mx, &med.mx_prev), Component::Hx)?;
        let my_now = to_ez(&mid(&med.my, &med.my_prev), Component::Hy)?;

        let ez = &self.fields.e.z;
        let mut adv_pz = advect_phi(&med.pz, Component::Ez, omega, &g, center, w)?;
        Zip::from(&mut adv_pz).and(w).for_each(|a, &w| *a *= w);
        let adv_ez = advect_phi(ez, Component::Ez, omega, &g, center, w)?;

        let mut known = g.zeros(Component::Ez);
        let mut rhs = g.zeros(Component::Ez);
        if omega != 0.0 {
            let bdx = to_ez(&((&b.x - &bp.x) / dt), Component::Hx)?;
            let bdy = to_ez(&((&b.y - &bp.y) / dt), Component::Hy)?;
            for ((i, j, k), kv) in known.indexed_iter_mut() {
                let q = [i, j, k];
                let [x, y] = self.map.arm(Component::Ez, q);
                *kv = -omega * (x * bdx[q] + y * bdy[q]) - adv_ez[q];
            }
        }
        Zip::indexed(&mut rhs)
            .and(&self.curl_h.z)
            .and(ez)
            .and(w)
            .and(&adv_pz)
            .for_each(|q, r, &c, &e, &w, &a| {
                *r = c - w * sigma * e - a - jz.map_or(0.0, |j| j[q]);
            });
        let inputs = EzSiteInputs {
            rhs: &rhs,
            known: &known,
            adv_pz: &adv_pz,
            b_now: [&bx_now, &by_now],
            m_now: [&mx_now, &my_now],
        };
        update_ez_pz(
            &mut self.fields.e.z,
            &mut self.medium,
            &inputs,
            &self.map,
            params,
            self.scheme,
            &self.consts,
        )
    }

    fn update_magnetization(&mut self, source: &Array3<f64>) -> Result<()> {
        let g = self.grid;
        let omega = self.map.spec.omega;
        if omega == 0.0 {
            return Ok(());
        }
        let center = self.map.spec.center;
        for (c, comp_axis) in [(Component::Hx, 0usize), (Component::Hy, 1usize)] {
            let (m, w) = match c {
                Component::Hx => (&self.medium.mx, &self.map.w_hx),
                _ => (&self.medium.my, &self.map.w_hy),
            };
            let adv = advect_phi(m, c, omega, &g, center, w)?;
            let s = avg_from_ez_sites(source, c, &g)?;
            let mut rate = g.zeros(c);
            for ((i, j, k), r) in rate.indexed_iter_mut() {
                let q = [i, j, k];
                if w[q] == 0.0 {
                    continue;
                }
                let arm = self.map.arm(c, q)[comp_axis];
                *r = w[q] * adv[q] + arm * s[q];
            }
            let (m, m_prev) = match c {
                Component::Hx => (&mut self.medium.mx, &mut self.medium.mx_prev),
                _ => (&mut self.medium.my, &mut self.medium.my_prev),
            };
            m_prev.clone_from(m);
            m.scaled_add(g.dt, &rate);
        }
        Ok(())
    }

    fn check_stability(&self) -> Result<()> {
        let e = &self.fields.e;
        let eta0 = self.consts.eta0();
        let bad = if !(e.all_finite() && self.fields.h.all_finite() && self.medium.pz.iter().all(|v| v.is_finite())) {
            Some("non-finite field value".to_string())
        } else {
            let emax = e.max_abs();
            let hmax = self.fields.h.max_abs() * eta0;
            (emax.max(hmax) > self.abort_scale).then(|| {
                format!(
                    "field magnitude {:.3e} exceeds {:.3e}",
                    emax.max(hmax),
                    self.abort_scale
                )
            })
        };
        let Some(reason) = bad else { return Ok(()) };
        let snapshot = self.snapshot_dir.as_ref().and_then(|dir| {
            let path = dir.join(format!("abort_step{}.snap", self.step_count));
            self.write_snapshot(&path).ok().map(|_| path)
        });
        Err(Error::NumericalAbort {
            step: self.step_count,
            time: self.time,
            reason,
            snapshot,
        })
    }

    /// Writes E, B, H and the medium arrays in the binary snapshot format.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let f = &self.fields;
        let s_psi = self.medium.s_psi.mapv(f64::from);
        let s_e = self.medium.s_e.mapv(f64::from);
        write_snapshot(
            path,
            &self.grid,
            self.time,
            &[
                ("Ex", &f.e.x),
                ("Ey", &f.e.y),
                ("Ez", &f.e.z),
                ("Bx", &f.b.x),
                ("By", &f.b.y),
                ("Bz", &f.b.z),
                ("Hx", &f.h.x),
                ("Hy", &f.h.y),
                ("Hz", &f.h.z),
                ("Pz", &self.medium.pz),
                ("Mx", &self.medium.mx),
                ("My", &self.medium.my),
                ("s_psi", &s_psi),
                ("s_e", &s_e),
            ],
        )
    }

    /// Leapfrog-invariant field energy at level n, J.
    pub fn energy(&self) -> f64 {
        field_energy(&self.fields.e, &self.b_prev, &self.fields.b, &self.grid, &self.consts)
    }

    pub fn max_div_b(&self) -> f64 {
        div_b(&self.fields.b, &self.grid)
            .map(|d| max_abs(&d))
            .unwrap_or(f64::NAN)
    }

    /// max |div D| over nodes whose six adjacent edges all lie outside the
    /// medium.
    pub fn max_div_d(&self) -> f64 {
        let g = &self.grid;
        let mut d = self.fields.e.clone();
        for a in d.arrays_mut() {
            a.mapv_inplace(|v| v * self.consts.eps0);
        }
        d.z += &self.medium.pz;
        let Ok(div) = div_d(&d, g) else { return f64::NAN };
        let (wx, wy, wz) = (&self.map.w_ex, &self.map.w_ey, &self.map.w_ez);
        let mut worst: f64 = 0.0;
        for ((i, j, k), &v) in div.indexed_iter() {
            if i == 0 || j == 0 || k == 0 || i == g.nx || j == g.ny || k == g.nz {
                continue;
            }
            let vacuum = wx[[i - 1, j, k]] == 0.0
                && wx[[i, j, k]] == 0.0
                && wy[[i, j - 1, k]] == 0.0
                && wy[[i, j, k]] == 0.0
                && wz[[i, j, k - 1]] == 0.0
                && wz[[i, j, k]] == 0.0;
            if vacuum {
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    pub fn diagnostics(&self) -> DiagnosticRow {
        DiagnosticRow {
            t: self.time,
            energy: self.energy(),
            max_div_b: self.max_div_b(),
            max_div_d: self.max_div_d(),
        }
    }

    /// Samples all components at a probe, with B, H and M averaged over
    /// the two adjacent half levels so every column refers to `self.time`.
    pub fn sample(&self, probe: &Probe) -> ProbeRow {
        let g = &self.grid;
        let f = &self.fields;
        let at = |a: &Array3<f64>, c: Component| probe::at(a, c, g, probe);
        let both = |now: &Array3<f64>, prev: &Array3<f64>, c: Component| 0.5 * (at(now, c) + at(prev, c));
        let mu0 = self.consts.mu0;
        let bx = both(&f.b.x, &self.b_prev.x, Component::Hx);
        let by = both(&f.b.y, &self.b_prev.y, Component::Hy);
        let bz = both(&f.b.z, &self.b_prev.z, Component::Hz);
        let mx = both(&self.medium.mx, &self.medium.mx_prev, Component::Hx);
        let my = both(&self.medium.my, &self.medium.my_prev, Component::Hy);
        ProbeRow {
            t: self.time,
            e: [at(&f.e.x, Component::Ex), at(&f.e.y, Component::Ey), f.e.z[probe.site]],
            h: [bx / mu0 + mx, by / mu0 + my, bz / mu0],
            b: [bx, by, bz],
            pz: self.medium.pz[probe.site],
            mx,
            my,
        }
    }

    /// Medium parameters, if the cylinder is hysteretic.
    pub fn channel(&self) -> Option<ChannelParams> {
        self.hysteresis()
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub traces: Vec<ProbeTrace>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub steps: u64,
    pub final_time: f64,
    /// Files written, if an output directory was given.
    pub files: Vec<PathBuf>,
}

/// Runs `cfg` to completion. With `out_dir` set, writes one CSV per probe,
/// the diagnostics CSV and a metadata sidecar there.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    let mut sim = Simulation::from_config(cfg)?;
    sim.snapshot_dir = out_dir.map(Path::to_path_buf);
    let steps = cfg.steps(&sim.grid)?;
    let probes: Vec<Probe> = cfg
        .probes
        .iter()
        .map(|(n, p)| Probe::new(n, *p, &sim.grid))
        .collect::<Result<_>>()?;
    let mut traces: Vec<ProbeTrace> = probes
        .iter()
        .map(|p| ProbeTrace {
            probe: p.clone(),
            rows: Vec::new(),
        })
        .collect();
    let mut diagnostics = vec![sim.diagnostics()];
    for n in 1..=steps {
        sim.step()?;
        if n % cfg.run.probe_stride as u64 == 0 || n == steps {
            for (trace, p) in traces.iter_mut().zip(&probes) {
                trace.rows.push(sim.sample(p));
            }
        }
        if n % cfg.run.diag_stride as u64 == 0 || n == steps {
            diagnostics.push(sim.diagnostics());
        }
    }
    let mut out = RunOutput {
        traces,
        diagnostics,
        steps,
        final_time: sim.time,
        files: Vec::new(),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let prefix = &cfg.output.prefix;
        for trace in &out.traces {
            let path = dir.join(format!("{prefix}_{}.csv", trace.probe.name));
            trace.write_csv(BufWriter::new(File::create(&path)?))?;
            out.files.push(path);
        }
        let path = dir.join(format!("{prefix}_diagnostics.csv"));
        write_diagnostics(BufWriter::new(File::create(&path)?), &out.diagnostics)?;
        out.files.push(path);
        let path = dir.join(format!("{prefix}_meta.cfg"));
        std::fs::write(&path, crate::config::metadata_sidecar(cfg)?)?;
        out.files.push(path);
        if cfg.output.final_snapshot {
            let path = dir.join(format!("{prefix}_final.snap"));
            sim.write_snapshot(&path)?;
            out.files.push(path);
        }
    }
    Ok(out)
}
