//! Staggered (Yee) lattice on a rectangular perfectly conducting box.
//!
//! Index conventions, with `(i, j, k)` the integer node coordinates:
//!
//! | component | position | shape |
//! |-----------|----------|-------|
//! | Ex | (i+½, j, k) | (nx, ny+1, nz+1) |
//! | Ey | (i, j+½, k) | (nx+1, ny, nz+1) |
//! | Ez | (i, j, k+½) | (nx+1, ny+1, nz) |
//! | Hx | (i, j+½, k+½) | (nx+1, ny, nz) |
//! | Hy | (i+½, j, k+½) | (nx, ny+1, nz) |
//! | Hz | (i+½, j+½, k) | (nx, ny, nz+1) |
//!
//! Tangential E components on the walls sit exactly on the walls, so the
//! conducting-wall condition is a plain assignment. Normal B lives on the
//! walls as well and is never touched by the curl of a wall-compliant E.
//! Divergence of B is taken at cell centres, divergence of D at nodes.

pub mod snapshot;

use ndarray::{s, Array3, Zip};

use crate::numeric::pairwise_sum;
use crate::{Error, PhysicalConstants, Result};

/// One of the six staggered field components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Ex,
    Ey,
    Ez,
    Hx,
    Hy,
    Hz,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Ex,
        Component::Ey,
        Component::Ez,
        Component::Hx,
        Component::Hy,
        Component::Hz,
    ];

    /// Offset of the sub-lattice from the nodes, in cells.
    pub fn offset(self) -> [f64; 3] {
        match self {
            Component::Ex => [0.5, 0.0, 0.0],
            Component::Ey => [0.0, 0.5, 0.0],
            Component::Ez => [0.0, 0.0, 0.5],
            Component::Hx => [0.0, 0.5, 0.5],
            Component::Hy => [0.5, 0.0, 0.5],
            Component::Hz => [0.5, 0.5, 0.0],
        }
    }

    pub fn shape(self, g: &GridSpec) -> [usize; 3] {
        let off = self.offset();
        let n = [g.nx, g.ny, g.nz];
        [0, 1, 2].map(|a| if off[a] == 0.0 { n[a] + 1 } else { n[a] })
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Ex => "Ex",
            Component::Ey => "Ey",
            Component::Ez => "Ez",
            Component::Hx => "Hx",
            Component::Hy => "Hy",
            Component::Hz => "Hz",
        }
    }
}

/// Lattice geometry and time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dt: f64,
    /// Coordinates of the cavity corner, m.
    pub origin: [f64; 3],
}

impl GridSpec {
    /// Uniform lattice over `[0, l]` with `dt` at `cfl_safety` of the
    /// Courant limit.
    pub fn new(n: [usize; 3], l: [f64; 3], cfl_safety: f64) -> Result<Self> {
        for (name, v) in [("grid.nx", n[0]), ("grid.ny", n[1]), ("grid.nz", n[2])] {
            if v < 2 {
                return Err(Error::param(name, format!("need at least 2 cells, got {v}")));
            }
        }
        for (name, v) in [("grid.lx", l[0]), ("grid.ly", l[1]), ("grid.lz", l[2])] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
            return Err(Error::param(
                "grid.cfl_safety",
                format!("must lie in (0, 1], got {cfl_safety}"),
            ));
        }
        let mut g = Self {
            nx: n[0],
            ny: n[1],
            nz: n[2],
            lx: l[0],
            ly: l[1],
            lz: l[2],
            dx: l[0] / n[0] as f64,
            dy: l[1] / n[1] as f64,
            dz: l[2] / n[2] as f64,
            dt: 0.0,
            origin: [0.0; 3],
        };
        g.dt = cfl_safety * g.cfl_limit(&PhysicalConstants::SI);
        Ok(g)
    }

    /// The 20 × 20 × 8 lattice over the 5.45 m × 5.45 m × 2.18 m cavity.
    pub fn reference(cfl_safety: f64) -> Result<Self> {
        Self::new([20, 20, 8], [5.45, 5.45, 2.18], cfl_safety)
    }

    /// Courant limit `1/(c sqrt(1/dx² + 1/dy² + 1/dz²))`.
    pub fn cfl_limit(&self, consts: &PhysicalConstants) -> f64 {
        1.0 / (consts.c * (self.dx.powi(-2) + self.dy.powi(-2) + self.dz.powi(-2)).sqrt())
    }

    pub fn spacing(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    pub fn cells(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    pub fn min_spacing(&self) -> f64 {
        self.dx.min(self.dy).min(self.dz)
    }

    /// Physical position of sub-lattice site `idx` of component `c`.
    pub fn position(&self, c: Component, idx: [usize; 3]) -> [f64; 3] {
        let off = c.offset();
        let h = self.spacing();
        [0, 1, 2].map(|a| self.origin[a] + (idx[a] as f64 + off[a]) * h[a])
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let l = [self.lx, self.ly, self.lz];
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] <= self.origin[a] + l[a])
    }

    pub fn zeros(&self, c: Component) -> Array3<f64> {
        Array3::zeros(c.shape(self))
    }

    pub(crate) fn check(&self, c: Component, a: &Array3<f64>) -> Result<()> {
        let expected = c.shape(self);
        let d = a.dim();
        let found = [d.0, d.1, d.2];
        if found != expected {
            return Err(Error::ShapeMismatch {
                what: c.name(),
                expected,
                found,
            });
        }
        Ok(())
    }
}

/// Which dual lattice a vector field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Cell edges: the E sub-lattices.
    Edges,
    /// Cell faces: the H sub-lattices.
    Faces,
}

impl Placement {
    pub fn components(self) -> [Component; 3] {
        match self {
            Placement::Edges => [Component::Ex, Component::Ey, Component::Ez],
            Placement::Faces => [Component::Hx, Component::Hy, Component::Hz],
        }
    }
}

/// Three staggered component arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct VecField {
    pub x: Array3<f64>,
    pub y: Array3<f64>,
    pub z: Array3<f64>,
}

impl VecField {
    pub fn zeros(g: &GridSpec, at: Placement) -> Self {
        let [cx, cy, cz] = at.components();
        Self {
            x: g.zeros(cx),
            y: g.zeros(cy),
            z: g.zeros(cz),
        }
    }

    pub fn check(&self, g: &GridSpec, at: Placement) -> Result<()> {
        let [cx, cy, cz] = at.components();
        g.check(cx, &self.x)?;
        g.check(cy, &self.y)?;
        g.check(cz, &self.z)
    }

    pub fn arrays(&self) -> [&Array3<f64>; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn arrays_mut(&mut self) -> [&mut Array3<f64>; 3] {
        [&mut self.x, &mut self.y, &mut self.z]
    }

    pub fn max_abs(&self) -> f64 {
        self.arrays().iter().map(|a| max_abs(a)).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// Pairwise sum of squares over all three components.
    pub fn sum_sq(&self) -> f64 {
        self.arrays().iter().map(|a| sum_products(a, a)).sum()
    }

    /// Pairwise sum of the component-wise products with `other`.
    pub fn dot(&self, other: &VecField) -> f64 {
        sum_products(&self.x, &other.x) + sum_products(&self.y, &other.y) + sum_products(&self.z, &other.z)
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &VecField) {
        for (a, b) in self.arrays_mut().into_iter().zip(other.arrays()) {
            a.scaled_add(factor, b);
        }
    }
}

pub fn max_abs(a: &Array3<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn sum_products(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    let prod: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x * y).collect();
    pairwise_sum(&prod)
}

/// The E and B state plus the derived H.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldArrays {
    /// Edge-centred electric field, V/m.
    pub e: VecField,
    /// Face-centred magnetic flux density, T.
    pub b: VecField,
    /// Face-centred magnetic field, A/m.
    pub h: VecField,
}

impl FieldArrays {
    pub fn zeros(g: &GridSpec) -> Self {
        Self {
            e: VecField::zeros(g, Placement::Edges),
            b: VecField::zeros(g, Placement::Faces),
            h: VecField::zeros(g, Placement::Faces),
        }
    }
}

/// Discrete curl of an edge field, collocated with the faces.
pub fn curl_e(e: &VecField, g: &GridSpec) -> Result<VecField> {
    e.check(g, Placement::Edges)?;
    let mut out = VecField::zeros(g, Placement::Faces);
    curl_e_into(e, g, &mut out);
    Ok(out)
}

/// As [`curl_e`], writing into a preallocated face field.
pub fn curl_e_into(e: &VecField, g: &GridSpec, out: &mut VecField) {
    let (dx, dy, dz) = (g.dx, g.dy, g.dz);
    Zip::from(&mut out.x)
        .and(e.z.slice(s![.., 1.., ..]))
        .and(e.z.slice(s![.., ..-1, ..]))
        .and(e.y.slice(s![.., .., 1..]))
        .and(e.y.slice(s![.., .., ..-1]))
        .for_each(|o, &zp, &zm, &yp, &ym| *o = (zp - zm) / dy - (yp - ym) / dz);
    Zip::from(&mut out.y)
        .and(e.x.slice(s![.., .., 1..]))
        .and(e.x.slice(s![.., .., ..-1]))
        .and(e.z.slice(s![1.., .., ..]))
        .and(e.z.slice(s![..-1, .., ..]))
        .for_each(|o, &xp, &xm, &zp, &zm| *o = (xp - xm) / dz - (zp - zm) / dx);
    Zip::from(&mut out.z)
        .and(e.y.slice(s![1.., .., ..]))
        .and(e.y.slice(s![..-1, .., ..]))
        .and(e.x.slice(s![.., 1.., ..]))
        .and(e.x.slice(s![.., ..-1, ..]))
        .for_each(|o, &yp, &ym, &xp, &xm| *o = (yp - ym) / dx - (xp - xm) / dy);
}

/// Discrete curl of a face field, collocated with the edges. Edges lying
/// on a wall get zero: they carry tangential E, which the wall pins.
pub fn curl_h(h: &VecField, g: &GridSpec) -> Result<VecField> {
    h.check(g, Placement::Faces)?;
    let mut out = VecField::zeros(g, Placement::Edges);
    curl_h_into(h, g, &mut out);
    Ok(out)
}

/// As [`curl_h`], writing into a preallocated edge field. Wall entries of
/// `out` are left untouched.
pub fn curl_h_into(h: &VecField, g: &GridSpec, out: &mut VecField) {
    let (nx, ny, nz) = (g.nx, g.ny, g.nz);
    let (dx, dy, dz) = (g.dx, g.dy, g.dz);
    Zip::from(out.x.slice_mut(s![.., 1..ny, 1..nz]))
        .and(h.z.slice(s![.., 1.., 1..nz]))
        .and(h.z.slice(s![.., ..-1, 1..nz]))
        .and(h.y.slice(s![.., 1..ny, 1..]))
        .and(h.y.slice(s![.., 1..ny, ..-1]))
        .for_each(|o, &zp, &zm, &yp, &ym| *o = (zp - zm) / dy - (yp - ym) / dz);
    Zip::from(out.y.slice_mut(s![1..nx, .., 1..nz]))
        .and(h.x.slice(s![1..nx, .., 1..]))
        .and(h.x.slice(s![1..nx, .., ..-1]))
        .and(h.z.slice(s![1.., .., 1..nz]))
        .and(h.z.slice(s![..-1, .., 1..nz]))
        .for_each(|o, &xp, &xm, &zp, &zm| *o = (xp - xm) / dz - (zp - zm) / dx);
    Zip::from(out.z.slice_mut(s![1..nx, 1..ny, ..]))
        .and(h.y.slice(s![1.., 1..ny, ..]))
        .and(h.y.slice(s![..-1, 1..ny, ..]))
        .and(h.x.slice(s![1..nx, 1.., ..]))
        .and(h.x.slice(s![1..nx, ..-1, ..]))
        .for_each(|o, &yp, &ym, &xp, &xm| *o = (yp - ym) / dx - (xp - xm) / dy);
}

/// Divergence of a face field at cell centres, shape (nx, ny, nz).
pub fn div_b(b: &VecField, g: &GridSpec) -> Result<Array3<f64>> {
    b.check(g, Placement::Faces)?;
    let mut out = Array3::zeros((g.nx, g.ny, g.nz));
    let (dx, dy, dz) = (g.dx, g.dy, g.dz);
    Zip::from(&mut out)
        .and(b.x.slice(s![1.., .., ..]))
        .and(b.x.slice(s![..-1, .., ..]))
        .and(b.y.slice(s![.., 1.., ..]))
        .and(b.y.slice(s![.., ..-1, ..]))
        .and(b.z.slice(s![.., .., 1..]))
        .for_each(|o, &xp, &xm, &yp, &ym, &zp| *o = (xp - xm) / dx + (yp - ym) / dy + zp / dz);
    Zip::from(&mut out)
        .and(b.z.slice(s![.., .., ..-1]))
        .for_each(|o, &zm| *o -= zm / dz);
    Ok(out)
}

/// Divergence of an edge field at the interior nodes, shape
/// (nx+1, ny+1, nz+1) with zero on the wall nodes.
pub fn div_d(d: &VecField, g: &GridSpec) -> Result<Array3<f64>> {
    d.check(g, Placement::Edges)?;
    let (nx, ny, nz) = (g.nx, g.ny, g.nz);
    let (dx, dy, dz) = (g.dx, g.dy, g.dz);
    let mut out = Array3::zeros((nx + 1, ny + 1, nz + 1));
    Zip::from(out.slice_mut(s![1..nx, 1..ny, 1..nz]))
        .and(d.x.slice(s![1.., 1..ny, 1..nz]))
        .and(d.x.slice(s![..-1, 1..ny, 1..nz]))
        .and(d.y.slice(s![1..nx, 1.., 1..nz]))
        .and(d.y.slice(s![1..nx, ..-1, 1..nz]))
        .and(d.z.slice(s![1..nx, 1..ny, 1..]))
        .for_each(|o, &xp, &xm, &yp, &ym, &zp| *o = (xp - xm) / dx + (yp - ym) / dy + zp / dz);
    Zip::from(out.slice_mut(s![1..nx, 1..ny, 1..nz]))
        .and(d.z.slice(s![1..nx, 1..ny, ..-1]))
        .for_each(|o, &zm| *o -= zm / dz);
    Ok(out)
}

/// Zeroes the tangential E components on all six walls. Idempotent.
pub fn apply_pec(e: &mut VecField, g: &GridSpec) {
    let (nx, ny, nz) = (g.nx, g.ny, g.nz);
    for j in [0, ny] {
        e.x.slice_mut(s![.., j, ..]).fill(0.0);
        e.z.slice_mut(s![.., j, ..]).fill(0.0);
    }
    for k in [0, nz] {
        e.x.slice_mut(s![.., .., k]).fill(0.0);
        e.y.slice_mut(s![.., .., k]).fill(0.0);
    }
    for i in [0, nx] {
        e.y.slice_mut(s![i, .., ..]).fill(0.0);
        e.z.slice_mut(s![i, .., ..]).fill(0.0);
    }
}

/// Interpolates an Hx- or Hy-site array to the Ez sites.
///
/// Hx shares its x and z coordinates with Ez and is offset by half a cell
/// in y, so the interior average is over the two y-neighbours; the first
/// and last rows are linearly extrapolated. Hy is handled the same way in
/// x. Affine fields are reproduced exactly.
pub fn avg_to_ez_sites(values: &Array3<f64>, from: Component, g: &GridSpec) -> Result<Array3<f64>> {
    g.check(from, values)?;
    let axis = match from {
        Component::Hx => 1,
        Component::Hy => 0,
        other => {
            return Err(Error::param(
                "from",
                format!("{} is not an in-plane face component", other.name()),
            ))
        }
    };
    let mut out = g.zeros(Component::Ez);
    let n = values.shape()[axis];
    for (idx, o) in out.indexed_iter_mut() {
        let at = |m: usize| {
            let mut q = [idx.0, idx.1, idx.2];
            q[axis] = m;
            values[q]
        };
        let m = [idx.0, idx.1, idx.2][axis];
        *o = if m == 0 {
            1.5 * at(0) - 0.5 * at(1)
        } else if m == n {
            1.5 * at(n - 1) - 0.5 * at(n - 2)
        } else {
            0.5 * (at(m - 1) + at(m))
        };
    }
    Ok(out)
}

/// Two-point average of an Ez-site array onto the Hx or Hy sites.
pub fn avg_from_ez_sites(values: &Array3<f64>, to: Component, g: &GridSpec) -> Result<Array3<f64>> {
    g.check(Component::Ez, values)?;
    let out = match to {
        Component::Hx => (&values.slice(s![.., 1.., ..]) + &values.slice(s![.., ..-1, ..])) * 0.5,
        Component::Hy => (&values.slice(s![1.., .., ..]) + &values.slice(s![..-1, .., ..])) * 0.5,
        other => {
            return Err(Error::param(
                "to",
                format!("{} is not an in-plane face component", other.name()),
            ))
        }
    };
    Ok(out)
}

/// Trilinear interpolation of a sub-lattice array at a physical point,
/// clamped to the sub-lattice extent.
pub fn sample(values: &Array3<f64>, c: Component, g: &GridSpec, p: [f64; 3]) -> f64 {
    let off = c.offset();
    let h = g.spacing();
    let shape = values.shape();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let u = ((p[a] - g.origin[a]) / h[a] - off[a]).clamp(0.0, (shape[a] - 1) as f64);
        let i0 = (u.floor() as usize).min(shape[a].saturating_sub(2));
        base[a] = i0;
        frac[a] = if shape[a] > 1 { u - i0 as f64 } else { 0.0 };
    }
    let mut acc = 0.0;
    for corner in 0..8 {
        let mut w = 1.0;
        let mut q = base;
        for a in 0..3 {
            let hi = (corner >> a) & 1 == 1;
            if hi {
                if shape[a] == 1 {
                    w = 0.0;
                    break;
                }
                q[a] += 1;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if w != 0.0 {
            acc += w * values[q];
        }
    }
    acc
}

/// Leapfrog-invariant electromagnetic energy
/// `½ Σ (ε0 E^n·E^n + B^{n−½}·B^{n+½}/μ0) dV`, J. Exactly conserved by
/// the source-free Yee update with conducting walls.
pub fn field_energy(
    e: &VecField,
    b_prev: &VecField,
    b_next: &VecField,
    g: &GridSpec,
    consts: &PhysicalConstants,
) -> f64 {
    0.5 * g.cell_volume() * (consts.eps0 * e.sum_sq() + b_prev.dot(b_next) / consts.mu0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> GridSpec {
        GridSpec::new([4, 5, 3], [1.0, 1.5, 0.6], 0.5).unwrap()
    }

    fn random_field(g: &GridSpec, at: Placement, seed: u64) -> VecField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = VecField::zeros(g, at);
        for a in f.arrays_mut() {
            a.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        }
        f
    }

    #[test]
    fn reference_grid_geometry() {
        let g = GridSpec::reference(0.5).unwrap();
        assert!((g.dx - 0.2725).abs() < 1e-15 && (g.dz - 0.2725).abs() < 1e-15);
        assert!((g.dt - 2.624e-10).abs() / 2.624e-10 < 1e-3);
        assert_eq!(Component::Ez.shape(&g), [21, 21, 8]);
        assert_eq!(Component::Hx.shape(&g), [21, 20, 8]);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(GridSpec::new([1, 4, 4], [1.0; 3], 0.5).is_err());
        assert!(GridSpec::new([4, 4, 4], [1.0, -1.0, 1.0], 0.5).is_err());
        assert!(GridSpec::new([4, 4, 4], [1.0; 3], 1.5).is_err());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = small();
        let e = VecField::zeros(&GridSpec::new([4, 4, 4], [1.0; 3], 0.5).unwrap(), Placement::Edges);
        assert!(matches!(curl_e(&e, &g), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn uniform_fields_have_zero_curl() {
        let g = small();
        let mut e = VecField::zeros(&g, Placement::Edges);
        let mut h = VecField::zeros(&g, Placement::Faces);
        for (k, a) in e.arrays_mut().into_iter().enumerate() {
            a.fill(1.0 + k as f64);
        }
        for (k, a) in h.arrays_mut().into_iter().enumerate() {
            a.fill(2.0 - k as f64);
        }
        assert_eq!(curl_e(&e, &g).unwrap().max_abs(), 0.0);
        assert_eq!(curl_h(&h, &g).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn curl_e_matches_naive_loops() {
        let g = small();
        let e = random_field(&g, Placement::Edges, 1);
        let c = curl_e(&e, &g).unwrap();
        let (nx, ny, nz) = (g.nx, g.ny, g.nz);
        for i in 0..=nx {
            for j in 0..ny {
                for k in 0..nz {
                    let v = (e.z[[i, j + 1, k]] - e.z[[i, j, k]]) / g.dy - (e.y[[i, j, k + 1]] - e.y[[i, j, k]]) / g.dz;
                    assert_eq!(c.x[[i, j, k]], v);
                }
            }
        }
        for i in 0..nx {
            for j in 0..=ny {
                for k in 0..nz {
                    let v = (e.x[[i, j, k + 1]] - e.x[[i, j, k]]) / g.dz - (e.z[[i + 1, j, k]] - e.z[[i, j, k]]) / g.dx;
                    assert_eq!(c.y[[i, j, k]], v);
                }
            }
        }
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..=nz {
                    let v = (e.y[[i + 1, j, k]] - e.y[[i, j, k]]) / g.dx - (e.x[[i, j + 1, k]] - e.x[[i, j, k]]) / g.dy;
                    assert_eq!(c.z[[i, j, k]], v);
                }
            }
        }
    }

    #[test]
    fn curl_h_matches_naive_loops() {
        let g = small();
        let h = random_field(&g, Placement::Faces, 2);
        let c = curl_h(&h, &g).unwrap();
        let (nx, ny, nz) = (g.nx, g.ny, g.nz);
        for ((i, j, k), &got) in c.x.indexed_iter() {
            let want = if j == 0 || j == ny || k == 0 || k == nz {
                0.0
            } else {
                (h.z[[i, j, k]] - h.z[[i, j - 1, k]]) / g.dy - (h.y[[i, j, k]] - h.y[[i, j, k - 1]]) / g.dz
            };
            assert_eq!(got, want);
        }
        for ((i, j, k), &got) in c.y.indexed_iter() {
            let want = if i == 0 || i == nx || k == 0 || k == nz {
                0.0
            } else {
                (h.x[[i, j, k]] - h.x[[i, j, k - 1]]) / g.dz - (h.z[[i, j, k]] - h.z[[i - 1, j, k]]) / g.dx
            };
            assert_eq!(got, want);
        }
        for ((i, j, k), &got) in c.z.indexed_iter() {
            let want = if i == 0 || i == nx || j == 0 || j == ny {
                0.0
            } else {
                (h.y[[i, j, k]] - h.y[[i - 1, j, k]]) / g.dx - (h.x[[i, j, k]] - h.x[[i, j - 1, k]]) / g.dy
            };
            assert_eq!(got, want);
        }
    }

    #[test]
    fn divergence_of_curl_vanishes() {
        let g = small();
        let e = random_field(&g, Placement::Edges, 3);
        let h = random_field(&g, Placement::Faces, 4);
        let db = div_b(&curl_e(&e, &g).unwrap(), &g).unwrap();
        let dd = div_d(&curl_h(&h, &g).unwrap(), &g).unwrap();
        let scale = 1.0 / g.min_spacing().powi(2);
        assert!(max_abs(&db) < 1e-13 * scale);
        assert!(max_abs(&dd) < 1e-13 * scale);
    }

    #[test]
    fn uniform_b_has_zero_divergence() {
        let g = small();
        let mut b = VecField::zeros(&g, Placement::Faces);
        b.x.fill(3.0);
        b.z.fill(-1.0);
        assert_eq!(max_abs(&div_b(&b, &g).unwrap()), 0.0);
    }

    #[test]
    fn pec_zeroes_walls_only_and_is_idempotent() {
        let g = small();
        let mut e = VecField::zeros(&g, Placement::Edges);
        for a in e.arrays_mut() {
            a.fill(1.0);
        }
        apply_pec(&mut e, &g);
        let once = e.clone();
        apply_pec(&mut e, &g);
        assert_eq!(e, once);
        assert_eq!(e.z[[0, 2, 1]], 0.0);
        assert_eq!(e.z[[2, 0, 1]], 0.0);
        assert_eq!(e.z[[2, 2, 0]], 1.0); // normal to the z walls
        assert_eq!(e.x[[0, 2, 1]], 1.0); // normal to the x walls
        assert_eq!(e.x[[1, 0, 1]], 0.0);
        assert_eq!(e.y[[1, 1, g.nz]], 0.0);
        assert_eq!(e.z[[1, 1, 1]], 1.0);
    }

    #[test]
    fn faraday_with_pec_keeps_normal_b_zero() {
        let g = small();
        let mut e = random_field(&g, Placement::Edges, 5);
        apply_pec(&mut e, &g);
        let db = curl_e(&e, &g).unwrap();
        for i in [0, g.nx] {
            assert!(db.x.slice(s![i, .., ..]).iter().all(|&v| v == 0.0));
        }
        for j in [0, g.ny] {
            assert!(db.y.slice(s![.., j, ..]).iter().all(|&v| v == 0.0));
        }
        for k in [0, g.nz] {
            assert!(db.z.slice(s![.., .., k]).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn averaging_reproduces_affine_fields() {
        let g = small();
        let f = |p: [f64; 3]| 0.3 + 1.7 * p[0] - 2.1 * p[1] + 0.4 * p[2];
        for c in [Component::Hx, Component::Hy] {
            let src = Array3::from_shape_fn(c.shape(&g), |(i, j, k)| f(g.position(c, [i, j, k])));
            let avg = avg_to_ez_sites(&src, c, &g).unwrap();
            for ((i, j, k), &v) in avg.indexed_iter() {
                let want = f(g.position(Component::Ez, [i, j, k]));
                assert!((v - want).abs() < 1e-12, "{c:?} at {i},{j},{k}");
            }
            let ez = Array3::from_shape_fn(Component::Ez.shape(&g), |(i, j, k)| {
                f(g.position(Component::Ez, [i, j, k]))
            });
            let back = avg_from_ez_sites(&ez, c, &g).unwrap();
            for ((i, j, k), &v) in back.indexed_iter() {
                assert!((v - f(g.position(c, [i, j, k]))).abs() < 1e-12);
            }
        }
        let one = Array3::from_elem(Component::Hx.shape(&g), 2.5);
        assert!(avg_to_ez_sites(&one, Component::Hx, &g)
            .unwrap()
            .iter()
            .all(|&v| v == 2.5));
        assert!(avg_to_ez_sites(&one, Component::Ez, &g).is_err());
    }

    #[test]
    fn averaging_matches_naive_loops() {
        let g = small();
        let h = random_field(&g, Placement::Faces, 6);
        let a = avg_to_ez_sites(&h.x, Component::Hx, &g).unwrap();
        for i in 0..=g.nx {
            for k in 0..g.nz {
                for j in 1..g.ny {
                    assert_eq!(a[[i, j, k]], 0.5 * (h.x[[i, j - 1, k]] + h.x[[i, j, k]]));
                }
                assert_eq!(a[[i, 0, k]], 1.5 * h.x[[i, 0, k]] - 0.5 * h.x[[i, 1, k]]);
            }
        }
        let b = avg_to_ez_sites(&h.y, Component::Hy, &g).unwrap();
        for j in 0..=g.ny {
            for k in 0..g.nz {
                for i in 1..g.nx {
                    assert_eq!(b[[i, j, k]], 0.5 * (h.y[[i - 1, j, k]] + h.y[[i, j, k]]));
                }
            }
        }
    }

    #[test]
    fn sampling_is_exact_for_affine_fields() {
        let g = small();
        let f = |p: [f64; 3]| 1.0 - 0.5 * p[0] + 2.0 * p[1] + 3.0 * p[2];
        for c in Component::ALL {
            let arr = Array3::from_shape_fn(c.shape(&g), |(i, j, k)| f(g.position(c, [i, j, k])));
            let p = [0.41, 0.77, 0.33];
            assert!((sample(&arr, c, &g, p) - f(p)).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn curl_converges_at_second_order() {
        // E = (0, 0, sin(πx/lx)): (curl E)_y = −(π/lx) cos(πx/lx).
        let err = |n: usize| {
            let g = GridSpec::new([n, 4, 4], [1.0, 1.0, 1.0], 0.5).unwrap();
            let mut e = VecField::zeros(&g, Placement::Edges);
            for ((i, j, k), v) in e.z.indexed_iter_mut() {
                let p = g.position(Component::Ez, [i, j, k]);
                *v = (std::f64::consts::PI * p[0]).sin();
            }
            let c = curl_e(&e, &g).unwrap();
            assert_eq!(c.x.iter().fold(0.0_f64, |m, v| m.max(v.abs())), 0.0);
            assert_eq!(c.z.iter().fold(0.0_f64, |m, v| m.max(v.abs())), 0.0);
            c.y.indexed_iter().fold(0.0_f64, |m, ((i, j, k), &v)| {
                let p = g.position(Component::Hy, [i, j, k]);
                let exact = -std::f64::consts::PI * (std::f64::consts::PI * p[0]).cos();
                m.max((v - exact).abs())
            })
        };
        let errs: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| err(n)).collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
        }
    }

    #[test]
    fn leapfrog_energy_is_invariant() {
        let k = PhysicalConstants::SI;
        let g = small();
        let mut e = random_field(&g, Placement::Edges, 7);
        apply_pec(&mut e, &g);
        let mut b = VecField::zeros(&g, Placement::Faces);
        let mut b_prev = b.clone();
        let mut ce = VecField::zeros(&g, Placement::Faces);
        let mut ch = VecField::zeros(&g, Placement::Edges);
        // Prime B^{1/2}.
        curl_e_into(&e, &g, &mut ce);
        b.add_scaled(-g.dt, &ce);
        let w0 = field_energy(&e, &b_prev, &b, &g, &k);
        for _ in 0..2000 {
            let h = VecField {
                x: &b.x / k.mu0,
                y: &b.y / k.mu0,
                z: &b.z / k.mu0,
            };
            curl_h_into(&h, &g, &mut ch);
            e.add_scaled(g.dt / k.eps0, &ch);
            apply_pec(&mut e, &g);
            curl_e_into(&e, &g, &mut ce);
            b_prev.clone_from(&b);
            b.add_scaled(-g.dt, &ce);
        }
        let w1 = field_energy(&e, &b_prev, &b, &g, &k);
        assert!(((w1 - w0) / w0).abs() < 1e-12, "{w0} {w1}");
    }
}
