//! One pass/fail line per acceptance criterion. Runs as a plain binary
//! (no libtest harness) so the report reads top to bottom.
//!
//! Criteria that fail are reported, not hidden: the process still exits 0
//! so the rest of the test suite runs. Set `ACCEPTANCE_STRICT=1` to exit 1
//! when any line fails.

use std::time::{Duration as Elapsed, Instant};

use ferrocavity::cavity::{
    consistency_report, energy_drift, resonance_scan, run, static_dielectric_check, Duration, ProbeTrace, RunConfig,
};
use ferrocavity::grid::GridSpec;
use ferrocavity::point::{
    loop_metrics, oracle_along_path, run_drive, run_history, ChannelParams, ChannelSet, Sinusoid,
};
use ferrocavity::rotating::Scheme;
use ferrocavity::PhysicalConstants;

const K: PhysicalConstants = PhysicalConstants::SI;

const ORACLE_TOL: f64 = 1e-6;
const SATURATION_TOL: f64 = 5e-3;
const RATE_TOL: f64 = 1e-6;
const RESONANCE_TOL: f64 = 0.02;
const DIV_B_TOL: f64 = 1e-12;
const ENERGY_TOL: f64 = 1e-9;
const ENERGY_STEPS: usize = 100_000;
const RESONANCE_STEPS: usize = 38_000;
const STATIC_TOL: f64 = 0.05;
const REST_ORACLE_TOL: f64 = 0.01;
const NOISE_MULTIPLE: f64 = 1e3;
const LINEARITY_TOL: f64 = 0.05;
const LOOP_CHANGE_TOL: f64 = 0.01;
const SCHEME_TOL: f64 = 5e-3;
const OMEGA_TOL: f64 = 5e-3;
const CYCLES_TOL: f64 = 5e-3;
const SCALE: f64 = 1e4;

const POINT_BUDGET: Elapsed = Elapsed::from_secs(1);
const YEE_BUDGET: Elapsed = Elapsed::from_secs(120);
const REST_BUDGET: Elapsed = Elapsed::from_secs(300);

struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, name: &str, pass: bool, detail: String) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn peak(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// max |a − b| over max |b|.
fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / peak(b)
}

fn pe() -> (ChannelParams, ChannelSet) {
    let p = ChannelParams::ferroelectric();
    (p, ChannelSet::pe_only(p).unwrap())
}

fn branch_oracle(r: &mut Report) {
    let (p, set) = pe();
    let start = Instant::now();
    let drive = Sinusoid::new(2.0e6, 250.0);
    let trace = run_drive(&drive, 4.0 * drive.period(), drive.period() / 2000.0, &set, &K).unwrap();
    let e = trace.electric();
    let exact = oracle_along_path(&p, &K, e[0], 0.0, &e).unwrap();
    let dev = rel_dev(&trace.polarization(), &exact);
    let took = start.elapsed();
    r.line(
        "branch oracle",
        dev <= ORACLE_TOL && took < POINT_BUDGET,
        format!("max rel deviation {dev:.2e} (tol {ORACLE_TOL:e}), {took:.2?}"),
    );
}

fn saturation(r: &mut Report) {
    let (p, set) = pe();
    let start = Instant::now();
    let drive = Sinusoid::new(2.0e6, 250.0);
    let trace = run_drive(&drive, 5.0 * drive.period(), drive.period() / 2000.0, &set, &K).unwrap();
    let m = loop_metrics(&trace).unwrap();
    let target = p.saturation();
    let dev = m.p_sat / target - 1.0;
    let took = start.elapsed();
    r.line(
        "saturation at 2e6 V/m",
        dev.abs() <= SATURATION_TOL && took < POINT_BUDGET,
        format!(
            "max|P| {:.5} vs alpha/xi {target:.5} C/m^2 ({:+.2}%), {took:.2?}",
            m.p_sat,
            100.0 * dev
        ),
    );
}

fn rate_independence(r: &mut Report) {
    let (_, set) = pe();
    let n = 2000.0;
    let slow = Sinusoid::new(2.0e6, 250.0);
    let fast = Sinusoid::new(2.0e6, 25.0e3);
    let a = run_drive(&slow, 3.0 * slow.period(), slow.period() / n, &set, &K).unwrap();
    let b = run_drive(&fast, 3.0 * fast.period(), fast.period() / n, &set, &K).unwrap();
    let dev = rel_dev(&a.polarization(), &b.polarization());
    let (mut frozen, mut moved) = (0, 0);
    for w in a.rows.windows(2) {
        let (x, y) = (&w[0], &w[1]);
        if x.s_psi != 0 && x.s_psi == y.s_psi && y.s_drive != 0 && x.s_psi * y.s_drive < 0 {
            frozen += 1;
            if x.p != y.p {
                moved += 1;
            }
        }
    }
    r.line(
        "rate independence",
        dev <= RATE_TOL && frozen > 0 && moved == 0,
        format!("250 Hz vs 25 kHz max rel deviation {dev:.2e}; {moved} of {frozen} frozen steps moved"),
    );
}

fn yee(r: &mut Report) {
    let g = GridSpec::reference(0.5).unwrap();
    let start = Instant::now();
    let scan = resonance_scan(&g, RESONANCE_STEPS, 1).unwrap();
    let f110 = 0.5 * K.c * 2f64.sqrt() / 5.45;
    let lowest = scan.lowest().unwrap_or(f64::NAN);
    let off = lowest / f110 - 1.0;
    let energy = energy_drift(&g, ENERGY_STEPS, 2).unwrap();
    let took = start.elapsed();
    let pass = off.abs() <= RESONANCE_TOL
        && energy.div_b_ratio <= DIV_B_TOL
        && energy.relative_drift <= ENERGY_TOL
        && took < YEE_BUDGET;
    r.line(
        "Yee validation",
        pass,
        format!(
            "lowest peak {:.4} MHz vs {:.4} MHz ({:+.2}%); div B ratio {:.1e}; energy drift {:.1e} over {ENERGY_STEPS} steps; {took:.1?}",
            lowest / 1e6,
            f110 / 1e6,
            100.0 * off,
            energy.div_b_ratio,
            energy.relative_drift
        ),
    );
}

fn static_dielectric(r: &mut Report) {
    let spec = RunConfig::reference_rest().material_spec();
    let c = static_dielectric_check(4.0, &spec, 5.45 / 20.0).unwrap();
    let off = c.ratio / c.expected - 1.0;
    r.line(
        "static dielectric cylinder",
        off.abs() <= STATIC_TOL,
        format!(
            "interior ratio {:.4} vs {:.4} ({:+.2}%)",
            c.ratio,
            c.expected,
            100.0 * off
        ),
    );
}

fn rotating_config() -> RunConfig {
    RunConfig::reference_rotating().scaled(SCALE)
}

/// The scaled run at rest over exactly the rotating run's duration.
fn rest_config() -> RunConfig {
    let rot = rotating_config();
    let mut c = rot.clone();
    c.material.omega_rpm = 0.0;
    c.run.duration = Duration::Seconds(rot.duration_seconds().unwrap());
    c
}

fn rest_equivalence(r: &mut Report, rest: &ProbeTrace, took: Elapsed) {
    let (_, set) = pe();
    let magnetized = rest.rows.iter().filter(|x| x.mx != 0.0 || x.my != 0.0).count();
    let mut t = vec![0.0];
    t.extend(rest.column(|x| x.t));
    let mut e = vec![0.0];
    e.extend(rest.column(|x| x.e[2]));
    let oracle = run_history(&t, &e, 0.0, &set, &K).unwrap();
    let dev = rel_dev(&rest.column(|x| x.pz), &oracle[1..]);
    r.line(
        "rest cavity equivalence",
        magnetized == 0 && dev <= REST_ORACLE_TOL && took < REST_BUDGET,
        format!(
            "{magnetized} rows with nonzero Mx/My; probe Pz vs point oracle {dev:.2e} (tol {REST_ORACLE_TOL}); {} steps in {took:.1?}",
            rest.rows.len()
        ),
    );
}

fn rotating_surrogate(r: &mut Report, rest: &ProbeTrace) {
    let full = rotating_config();
    let mut half = full.clone();
    half.material.omega_rpm *= 0.5;
    let outcome = |cfg: &RunConfig| run(cfg, None).map(|o| o.traces.into_iter().next().unwrap());
    let (a, b) = (outcome(&full), outcome(&half));
    let detail = match (&a, &b) {
        (Ok(a), Ok(b)) => {
            let mx = peak(&a.column(|x| x.mx));
            let floor = f64::EPSILON * peak(&a.column(|x| x.h[0]));
            let ratio = mx / peak(&b.column(|x| x.mx));
            let change = rel_dev(&a.column(|x| x.pz), &rest.column(|x| x.pz));
            let pass =
                mx > NOISE_MULTIPLE * floor && (ratio / 2.0 - 1.0).abs() <= LINEARITY_TOL && change < LOOP_CHANGE_TOL;
            r.line(
                "rotating surrogate",
                pass,
                format!(
                    "peak Mx {mx:.3e} A/m ({:.1e} x noise floor); full/half Omega ratio {ratio:.4}; Pz loop change {change:.2e}",
                    mx / floor
                ),
            );
            return;
        }
        _ => {
            let say = |o: &Result<ProbeTrace, ferrocavity::Error>| match o {
                Ok(_) => "completed".to_string(),
                Err(e) => e.to_string(),
            };
            format!("full Omega run: {}; half Omega run: {}", say(&a), say(&b))
        }
    };
    r.line("rotating surrogate", false, detail);
}

fn scheme_cross_check(r: &mut Report, rest: &ProbeTrace) {
    let mut cfg = rest_config();
    cfg.run.scheme = Scheme::LaggedExplicit;
    let lag = run(&cfg, None).unwrap().traces.remove(0);
    let dez = rel_dev(&lag.column(|x| x.e[2]), &rest.column(|x| x.e[2]));
    let dpz = rel_dev(&lag.column(|x| x.pz), &rest.column(|x| x.pz));
    r.line(
        "scheme cross-check",
        dez <= SCHEME_TOL && dpz <= SCHEME_TOL,
        format!("lagged vs semi-implicit: Ez {dez:.2e}, Pz {dpz:.2e} (tol {SCHEME_TOL:e})"),
    );
}

fn consistency(r: &mut Report) {
    let rep = consistency_report(&RunConfig::reference_rotating()).unwrap();
    let cycles = rep.cycles_per_revolution.unwrap_or(f64::NAN);
    r.line(
        "consistency report",
        (rep.omega - 156.77).abs() <= OMEGA_TOL && (cycles - 10.02).abs() <= CYCLES_TOL,
        format!("Omega {:.4} rad/s, {cycles:.4} drive cycles per revolution", rep.omega),
    );
}

fn main() {
    let mut r = Report { failed: 0, total: 0 };
    branch_oracle(&mut r);
    saturation(&mut r);
    rate_independence(&mut r);
    yee(&mut r);
    static_dielectric(&mut r);

    let start = Instant::now();
    let rest = run(&rest_config(), None).unwrap().traces.remove(0);
    rest_equivalence(&mut r, &rest, start.elapsed());
    rotating_surrogate(&mut r, &rest);
    scheme_cross_check(&mut r, &rest);
    consistency(&mut r);

    println!("{} of {} criteria passed", r.total - r.failed, r.total);
    if r.failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
