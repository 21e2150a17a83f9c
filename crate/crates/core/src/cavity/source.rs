//! Divergence-free wall currents.
//!
//! The current pattern is the discrete curl of a face-centred potential
//! `(Ax(y, z), Ay(x, z), 0)`. Each component is a signed bump across the
//! `wall_layers` cells next to a side wall, times a plateau in z. The curl
//! is a set of closed loops inside those side bands: Jz runs up along the
//! inner edge of every band, turns towards the wall near the floor and
//! ceiling and returns along the wall. Nothing flows over the cylinder,
//! which spans the full height, and the discrete divergence vanishes
//! identically.

use std::f64::consts::TAU;

use crate::grid::{curl_h, GridSpec, Placement, VecField};
use crate::numeric::smoothstep;
use crate::rotating::MaterialMap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    /// Drive frequency, Hz.
    pub frequency: f64,
    /// Peak current density, A/m².
    pub amplitude: f64,
    /// Length of the smooth start-up ramp, in drive periods.
    pub ramp_cycles: f64,
    /// Cells next to each wall that carry current.
    pub wall_layers: usize,
}

impl SourceSpec {
    pub fn validate(&self, g: &GridSpec) -> Result<()> {
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::param(
                "source.frequency",
                format!("must be > 0, got {}", self.frequency),
            ));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::param(
                "source.amplitude",
                format!("must be >= 0, got {}", self.amplitude),
            ));
        }
        if !(self.ramp_cycles.is_finite() && self.ramp_cycles >= 0.0) {
            return Err(Error::param(
                "source.ramp_cycles",
                format!("must be >= 0, got {}", self.ramp_cycles),
            ));
        }
        let min_cells = g.nx.min(g.ny).min(g.nz);
        if self.wall_layers == 0 || 2 * self.wall_layers >= min_cells {
            return Err(Error::param(
                "source.wall_layers",
                format!(
                    "must lie in 1..{} for this grid, got {}",
                    min_cells.div_ceil(2),
                    self.wall_layers
                ),
            ));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    /// `amplitude · s(t) · sin(2π f t)` with `s` a C¹ ramp over
    /// `ramp_cycles` periods.
    pub fn envelope(&self, t: f64) -> f64 {
        let ramp = if self.ramp_cycles > 0.0 {
            smoothstep(t * self.frequency / self.ramp_cycles)
        } else {
            1.0
        };
        self.amplitude * ramp * (TAU * self.frequency * t).sin()
    }
}

/// A source with its precomputed unit pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub spec: SourceSpec,
    /// Edge-centred pattern, normalized to unit peak magnitude.
    pub pattern: VecField,
}

impl Source {
    /// Builds the pattern and rejects it if it touches the medium.
    pub fn build(spec: SourceSpec, g: &GridSpec, map: Option<&MaterialMap>) -> Result<Self> {
        spec.validate(g)?;
        let layers = spec.wall_layers as f64;
        // Signed bump across the band next to each side wall, in cells:
        // negative at the low wall, positive at the high wall.
        let band = |s: f64, n: usize| {
            let (sign, d) = if s < 0.5 * n as f64 {
                (-1.0, s)
            } else {
                (1.0, n as f64 - s)
            };
            if d >= layers {
                0.0
            } else {
                sign * smoothstep(d.min(layers - d) / (0.5 * layers))
            }
        };
        let plateau = |s: f64, n: usize| smoothstep(s.min(n as f64 - s) / layers);
        let mut a = VecField::zeros(g, Placement::Faces);
        for ((_, j, k), v) in a.x.indexed_iter_mut() {
            *v = -band(j as f64 + 0.5, g.ny) * plateau(k as f64 + 0.5, g.nz);
        }
        for ((i, _, k), v) in a.y.indexed_iter_mut() {
            *v = band(i as f64 + 0.5, g.nx) * plateau(k as f64 + 0.5, g.nz);
        }
        let mut pattern = curl_h(&a, g)?;
        let peak = pattern.max_abs();
        if peak == 0.0 {
            return Err(Error::param(
                "source.wall_layers",
                "source pattern vanishes on this grid",
            ));
        }
        for arr in pattern.arrays_mut() {
            arr.mapv_inplace(|v| v / peak);
        }
        if let Some(map) = map {
            for (j, w) in pattern.arrays().into_iter().zip([&map.w_ex, &map.w_ey, &map.w_ez]) {
                let overlap = j.iter().zip(w.iter()).any(|(&jv, &wv)| jv != 0.0 && wv > 0.0);
                if overlap {
                    return Err(Error::param(
                        "source.wall_layers",
                        "source current overlaps the medium; reduce wall_layers or the cylinder radius",
                    ));
                }
            }
        }
        Ok(Self { spec, pattern })
    }

    /// Current density at time `t`, A/m².
    pub fn current(&self, t: f64) -> VecField {
        let a = self.spec.envelope(t);
        let mut out = self.pattern.clone();
        for arr in out.arrays_mut() {
            arr.mapv_inplace(|v| v * a);
        }
        out
    }

    /// Distance from the side walls within which current flows, m.
    pub fn reach(&self, g: &GridSpec) -> f64 {
        self.spec.wall_layers as f64 * g.dx.max(g.dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{div_d, max_abs};

    fn spec() -> SourceSpec {
        SourceSpec {
            frequency: 2.5e6,
            amplitude: 3.0,
            ramp_cycles: 2.0,
            wall_layers: 2,
        }
    }

    #[test]
    fn starts_from_zero() {
        let g = GridSpec::reference(0.5).unwrap();
        let s = Source::build(spec(), &g, None).unwrap();
        assert_eq!(s.current(0.0).max_abs(), 0.0);
    }

    #[test]
    fn current_is_divergence_free() {
        let g = GridSpec::reference(0.5).unwrap();
        let s = Source::build(spec(), &g, None).unwrap();
        for t in [1.0e-7, 3.3e-7, 1.1e-6] {
            let j = s.current(t);
            let d = div_d(&j, &g).unwrap();
            assert!(max_abs(&d) <= 1e-14 * j.max_abs() / g.min_spacing());
        }
    }

    #[test]
    fn full_strength_after_ramp() {
        let g = GridSpec::reference(0.5).unwrap();
        let sp = spec();
        let s = Source::build(sp, &g, None).unwrap();
        let t = (sp.ramp_cycles + 0.25) / sp.frequency;
        let j = s.current(t);
        assert!((j.max_abs() - sp.amplitude).abs() < 1e-12);
        assert!((sp.envelope(t) - sp.amplitude).abs() < 1e-12);
    }

    #[test]
    fn current_stays_in_the_side_bands() {
        let g = GridSpec::reference(0.5).unwrap();
        let s = Source::build(spec(), &g, None).unwrap();
        let reach = s.reach(&g);
        let l = [g.lx, g.ly];
        for (c, arr) in Placement::Edges.components().into_iter().zip(s.pattern.arrays()) {
            for ((i, j, k), &v) in arr.indexed_iter() {
                if v == 0.0 {
                    continue;
                }
                let p = g.position(c, [i, j, k]);
                let wall = (0..2).map(|a| p[a].min(l[a] - p[a])).fold(f64::INFINITY, f64::min);
                assert!(wall <= reach + 1e-12, "{c:?} {:?}", [i, j, k]);
            }
        }
    }

    #[test]
    fn vertical_current_is_symmetric_and_rises_on_the_inner_edge() {
        let g = GridSpec::reference(0.5).unwrap();
        let s = Source::build(spec(), &g, None).unwrap();
        let jz = &s.pattern.z;
        for ((i, j, k), &v) in jz.indexed_iter() {
            assert!((v - jz[[j, i, k]]).abs() < 1e-15);
            assert!((v - jz[[g.nx - i, j, k]]).abs() < 1e-15);
        }
        let inner = spec().wall_layers;
        assert!(jz[[inner, g.ny / 2, g.nz / 2]] > 0.0);
    }

    #[test]
    fn reference_cylinder_is_untouched() {
        let g = GridSpec::reference(0.5).unwrap();
        let cfg = super::super::RunConfig::reference_rest();
        let map = MaterialMap::build(cfg.material_spec(), &g, &crate::PhysicalConstants::SI).unwrap();
        assert!(Source::build(cfg.source, &g, Some(&map)).is_ok());
        let mut wide = cfg.material_spec();
        wide.radius = 2.0;
        let map = MaterialMap::build(wide, &g, &crate::PhysicalConstants::SI).unwrap();
        assert!(Source::build(cfg.source, &g, Some(&map)).is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        let g = GridSpec::reference(0.5).unwrap();
        assert!(Source::build(
            SourceSpec {
                wall_layers: 0,
                ..spec()
            },
            &g,
            None
        )
        .is_err());
        assert!(Source::build(
            SourceSpec {
                wall_layers: 4,
                ..spec()
            },
            &g,
            None
        )
        .is_err());
        assert!(Source::build(
            SourceSpec {
                frequency: -1.0,
                ..spec()
            },
            &g,
            None
        )
        .is_err());
    }
}
