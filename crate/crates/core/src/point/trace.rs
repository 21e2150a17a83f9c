use std::io::{BufRead, Write};

use super::Channel;
use crate::{Error, Result};

pub const TRACE_HEADER: &str = "t,E,P,H,M,s_psi,s_drive";

/// One sample of a point-model run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub e: f64,
    pub p: f64,
    pub h: f64,
    pub m: f64,
    pub s_psi: i8,
    pub s_drive: i8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchEventKind {
    /// Ψ of a channel changed sign.
    PsiSign { channel: Channel, from: i8, to: i8 },
    /// The electric drive rate changed sign.
    DriveSign { from: i8, to: i8 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEvent {
    pub t: f64,
    pub e: f64,
    pub p: f64,
    pub kind: BranchEventKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceRecord {
    pub rows: Vec<TraceRow>,
    pub events: Vec<BranchEvent>,
}

impl TraceRecord {
    pub fn electric(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e).collect()
    }

    pub fn polarization(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.p).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// Writes the CSV form: header plus one row per sample, floats with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                r.t, r.e, r.p, r.h, r.m, r.s_psi, r.s_drive
            )?;
        }
        Ok(())
    }

    /// Reads rows written by [`TraceRecord::write_csv`]. Events are not
    /// part of the CSV form.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != TRACE_HEADER {
            return Err(Error::ConfigSyntax {
                line: 1,
                reason: format!("unexpected trace header `{header}`"),
            });
        }
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| Error::ConfigSyntax { line: idx + 2, reason };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(bad(format!("expected 7 columns, found {}", cols.len())));
            }
            let f = |i: usize| cols[i].trim().parse::<f64>().map_err(|e| bad(e.to_string()));
            let s = |i: usize| cols[i].trim().parse::<i8>().map_err(|e| bad(e.to_string()));
            rows.push(TraceRow {
                t: f(0)?,
                e: f(1)?,
                p: f(2)?,
                h: f(3)?,
                m: f(4)?,
                s_psi: s(5)?,
                s_drive: s(6)?,
            });
        }
        Ok(Self {
            rows,
            events: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_preserves_every_bit(vals in proptest::collection::vec(
            (any::<f64>().prop_filter("finite", |v| v.is_finite()), -1i8..=1, -1i8..=1), 1..20)
        ) {
            let trace = TraceRecord {
                rows: vals.iter().map(|&(v, a, b)| TraceRow {
                    t: v, e: -v, p: v * 0.5, h: v, m: 0.0, s_psi: a, s_drive: b,
                }).collect(),
                events: vec![],
            };
            let mut buf = Vec::new();
            trace.write_csv(&mut buf).unwrap();
            let back = TraceRecord::read_csv(&buf[..]).unwrap();
            prop_assert_eq!(back, trace);
        }
    }

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        TraceRecord::default().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,E,P,H,M,s_psi,s_drive\n");
    }
}
