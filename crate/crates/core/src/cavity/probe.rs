//! Point probes and the CSV records written by a cavity run.

use std::io::{BufRead, Write};

use crate::grid::{sample, Component, GridSpec};
use crate::{Error, Result};

pub const PROBE_HEADER: &str = "t,Ex,Ey,Ez,Hx,Hy,Hz,Bx,By,Bz,Pz,Mx,My";
pub const DIAGNOSTICS_HEADER: &str = "t,energy,max_divB,max_divD";

/// A probe snapped to the nearest Ez site.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    /// Requested position, m.
    pub requested: [f64; 3],
    /// Ez-site index the probe is snapped to.
    pub site: [usize; 3],
    /// Physical position of that site, m.
    pub position: [f64; 3],
}

impl Probe {
    pub fn new(name: &str, requested: [f64; 3], g: &GridSpec) -> Result<Self> {
        if !g.contains(requested) {
            return Err(Error::ConfigValue {
                key: format!("probes.{name}"),
                reason: format!("{requested:?} lies outside the cavity"),
            });
        }
        let shape = Component::Ez.shape(g);
        let off = Component::Ez.offset();
        let h = g.spacing();
        let site = [0, 1, 2].map(|a| {
            let u = (requested[a] - g.origin[a]) / h[a] - off[a];
            (u.round().max(0.0) as usize).min(shape[a] - 1)
        });
        Ok(Self {
            name: name.to_string(),
            requested,
            site,
            position: g.position(Component::Ez, site),
        })
    }
}

/// All recorded components at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProbeRow {
    pub t: f64,
    pub e: [f64; 3],
    pub h: [f64; 3],
    pub b: [f64; 3],
    pub pz: f64,
    pub mx: f64,
    pub my: f64,
}

impl ProbeRow {
    fn values(&self) -> [f64; 13] {
        [
            self.t, self.e[0], self.e[1], self.e[2], self.h[0], self.h[1], self.h[2], self.b[0], self.b[1], self.b[2],
            self.pz, self.mx, self.my,
        ]
    }

    fn from_values(v: &[f64]) -> Self {
        Self {
            t: v[0],
            e: [v[1], v[2], v[3]],
            h: [v[4], v[5], v[6]],
            b: [v[7], v[8], v[9]],
            pz: v[10],
            mx: v[11],
            my: v[12],
        }
    }
}

/// Time series recorded by one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrace {
    pub probe: Probe,
    pub rows: Vec<ProbeRow>,
}

impl ProbeTrace {
    pub fn column(&self, f: impl Fn(&ProbeRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(w, PROBE_HEADER, self.rows.iter().map(|r| r.values().to_vec()))
    }

    pub fn read_rows<R: BufRead>(r: R) -> Result<Vec<ProbeRow>> {
        Ok(read_rows(r, PROBE_HEADER)?
            .iter()
            .map(|v| ProbeRow::from_values(v))
            .collect())
    }
}

/// One diagnostics sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiagnosticRow {
    pub t: f64,
    /// Leapfrog-invariant field energy, J.
    pub energy: f64,
    /// max |div B| over cell centres, T/m.
    pub max_div_b: f64,
    /// max |div D| over vacuum nodes, C/m³.
    pub max_div_d: f64,
}

pub fn write_diagnostics<W: Write>(w: W, rows: &[DiagnosticRow]) -> Result<()> {
    write_rows(
        w,
        DIAGNOSTICS_HEADER,
        rows.iter().map(|r| vec![r.t, r.energy, r.max_div_b, r.max_div_d]),
    )
}

pub fn read_diagnostics<R: BufRead>(r: R) -> Result<Vec<DiagnosticRow>> {
    Ok(read_rows(r, DIAGNOSTICS_HEADER)?
        .iter()
        .map(|v| DiagnosticRow {
            t: v[0],
            energy: v[1],
            max_div_b: v[2],
            max_div_d: v[3],
        })
        .collect())
}

fn write_rows<W: Write>(mut w: W, header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    writeln!(w, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: BufRead>(r: R, header: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = r.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim() != header {
        return Err(Error::ConfigSyntax {
            line: 1,
            reason: format!("expected header `{header}`, found `{first}`"),
        });
    }
    let width = header.split(',').count();
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| Error::ConfigSyntax {
            line: n + 2,
            reason: e.to_string(),
        })?;
        if vals.len() != width {
            return Err(Error::ConfigSyntax {
                line: n + 2,
                reason: format!("expected {width} columns, found {}", vals.len()),
            });
        }
        out.push(vals);
    }
    Ok(out)
}

/// Trilinear sample of a sub-lattice array at a probe's position.
pub(crate) fn at(values: &ndarray::Array3<f64>, c: Component, g: &GridSpec, probe: &Probe) -> f64 {
    sample(values, c, g, probe.position)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_probe_snaps_to_expected_site() {
        let g = GridSpec::reference(0.5).unwrap();
        let p = Probe::new("inner", [2.45, 2.45, 1.36], &g).unwrap();
        assert_eq!(p.site, [9, 9, 4]);
        assert!((p.position[2] - 4.5 * 0.2725).abs() < 1e-12);
        assert!(Probe::new("out", [6.0, 1.0, 1.0], &g).is_err());
    }

    proptest! {
        #[test]
        fn probe_csv_round_trips(vals in prop::collection::vec(prop::num::f64::NORMAL, 13 * 3)) {
            let g = GridSpec::reference(0.5).unwrap();
            let probe = Probe::new("p", [1.0, 1.0, 1.0], &g).unwrap();
            let rows: Vec<ProbeRow> = vals.chunks(13).map(ProbeRow::from_values).collect();
            let trace = ProbeTrace { probe, rows: rows.clone() };
            let mut buf = Vec::new();
            trace.write_csv(&mut buf).unwrap();
            let back = ProbeTrace::read_rows(buf.as_slice()).unwrap();
            prop_assert_eq!(back, rows);
        }
    }

    #[test]
    fn diagnostics_round_trip() {
        let rows = vec![DiagnosticRow {
            t: 1.0,
            energy: 2.5e-3,
            max_div_b: 0.0,
            max_div_d: 1e-30,
        }];
        let mut buf = Vec::new();
        write_diagnostics(&mut buf, &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(DIAGNOSTICS_HEADER));
        assert_eq!(read_diagnostics(buf.as_slice()).unwrap(), rows);
    }
}
