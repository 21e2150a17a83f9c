use std::fs::File;
use std::io::BufReader;

use ferrocavity::cavity::{
    read_diagnostics, resonance_scan, run, static_dielectric_check, Duration, ProbeTrace, RunConfig,
    DIAGNOSTICS_HEADER, PROBE_HEADER,
};
use ferrocavity::config;
use ferrocavity::grid::GridSpec;

fn short_rotating(steps: f64) -> RunConfig {
    let mut cfg = RunConfig::reference_rotating().scaled(1e4);
    let dt = cfg.grid.build().unwrap().dt;
    cfg.run.duration = Duration::Seconds(steps * dt);
    cfg.run.diag_stride = 20;
    cfg.probes.push(("corner".into(), [1.0, 4.0, 0.5]));
    cfg
}

#[test]
fn run_writes_csvs_that_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short_rotating(120.0);
    cfg.output.prefix = "rot".into();
    cfg.output.final_snapshot = true;
    let out = run(&cfg, Some(dir.path())).unwrap();
    let names: Vec<String> = out
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        [
            "rot_inner.csv",
            "rot_corner.csv",
            "rot_diagnostics.csv",
            "rot_meta.cfg",
            "rot_final.snap"
        ]
    );

    let text = std::fs::read_to_string(dir.path().join("rot_inner.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), PROBE_HEADER);
    let rows = ProbeTrace::read_rows(BufReader::new(File::open(dir.path().join("rot_inner.csv")).unwrap())).unwrap();
    assert_eq!(rows, out.traces[0].rows);

    let text = std::fs::read_to_string(dir.path().join("rot_diagnostics.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), DIAGNOSTICS_HEADER);
    let diags = read_diagnostics(BufReader::new(
        File::open(dir.path().join("rot_diagnostics.csv")).unwrap(),
    ))
    .unwrap();
    assert_eq!(diags, out.diagnostics);
}

#[test]
fn metadata_sidecar_resolves_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_rotating(10.0);
    run(&cfg, Some(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("run_meta.cfg")).unwrap();
    assert!(text.contains("omega_rad_s="));
    let back = config::parse(&text).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn divergence_stays_at_rounding_level_in_a_driven_rotating_run() {
    let out = run(&short_rotating(400.0), None).unwrap();
    let dx = 5.45 / 20.0;
    let bmax = out
        .traces
        .iter()
        .flat_map(|t| &t.rows)
        .fold(0.0f64, |m, r| m.max(r.b[0].abs()).max(r.b[1].abs()));
    assert!(bmax > 0.0);
    for d in &out.diagnostics {
        assert!(d.max_div_b * dx <= 1e-10 * bmax.max(1e-30), "{d:?}");
    }
    let dmax = out.diagnostics.iter().map(|d| d.max_div_d).fold(0.0f64, f64::max);
    let emax = out
        .traces
        .iter()
        .flat_map(|t| &t.rows)
        .fold(0.0f64, |m, r| m.max(r.e[2].abs()));
    assert!(dmax * dx <= 1e-10 * 8.854e-12 * emax, "{dmax:e} vs {emax:e}");
}

#[test]
fn rotation_induces_magnetization_at_the_probe() {
    let out = run(&short_rotating(400.0), None).unwrap();
    let peak = out.traces[0].rows.iter().fold(0.0f64, |m, r| m.max(r.mx.abs()));
    assert!(peak > 0.0);
    // Hz never picks up magnetization.
    assert!(out.traces[0].rows.iter().all(|r| r.h[2] == r.b[2] / 1.25663706212e-6));
}

#[test]
fn coarse_scan_sees_the_lowest_mode() {
    let g = GridSpec::reference(0.5).unwrap();
    let scan = resonance_scan(&g, 12_000, 1).unwrap();
    let f = scan.lowest().unwrap();
    assert!((f / 38.90e6 - 1.0).abs() < 0.02, "{f}");
}

#[test]
fn dielectric_cylinder_screens_its_interior() {
    let spec = RunConfig::reference_rest().material_spec();
    let c = static_dielectric_check(4.0, &spec, 5.45 / 20.0).unwrap();
    assert!((c.ratio / c.expected - 1.0).abs() < 0.05, "{c:?}");
}
