//! Second fundamental forms and null expansions of closed surfaces.

use serde::{Deserialize, Serialize};

use super::PointGeometry;
use crate::data::InitialDataSet;
use crate::error::{Error, Result};
use crate::tensor::{Sym2, Sym3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalOrientation {
    /// Increasing `r`, or increasing `u` on level sets.
    TowardInfinity,
    /// Out of the domain.
    Outer,
    /// Into the domain.
    Inner,
}

/// Surface quantities at one sample, in a tangent basis with metric `induced`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SurfaceSample {
    pub induced: Sym2,
    pub ii: Sym2,
    pub k_tan: Sym2,
    pub h: f64,
    pub tr_k: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub chi_plus: Sym2,
    pub chi_minus: Sym2,
    /// Area carried by the sample in the quadrature.
    pub weight: f64,
}

impl SurfaceSample {
    pub fn from_forms(induced: Sym2, ii: Sym2, k_tan: Sym2, weight: f64) -> Result<Self> {
        let inv = induced
            .inverse()
            .ok_or_else(|| Error::DegenerateSurface(format!("induced metric {:?} is singular", induced.0)))?;
        let h = ii.trace_with(&inv);
        let tr_k = k_tan.trace_with(&inv);
        let chi_plus = Sym2(std::array::from_fn(|c| ii.0[c] + k_tan.0[c]));
        let chi_minus = Sym2(std::array::from_fn(|c| ii.0[c] - k_tan.0[c]));
        Ok(SurfaceSample {
            induced,
            ii,
            k_tan,
            h,
            tr_k,
            theta_plus: h + tr_k,
            theta_minus: h - tr_k,
            chi_plus,
            chi_minus,
            weight,
        })
    }

    pub fn chi_plus_norm(&self) -> f64 {
        self.chi_plus.norm_sq(&self.induced.inverse().expect("checked at construction")).sqrt()
    }

    /// Traces of `χ±`, computed from the tensors rather than from `H ± Tr k`.
    pub fn chi_traces(&self) -> (f64, f64) {
        let inv = self.induced.inverse().expect("checked at construction");
        (self.chi_plus.trace_with(&inv), self.chi_minus.trace_with(&inv))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceGeometry {
    pub samples: Vec<SurfaceSample>,
    pub area: f64,
}

impl SurfaceGeometry {
    pub fn new(samples: Vec<SurfaceSample>) -> Self {
        let area = samples.iter().map(|s| s.weight).sum();
        SurfaceGeometry { samples, area }
    }

    pub fn integrate(&self, f: impl Fn(&SurfaceSample) -> f64) -> f64 {
        self.samples.iter().map(|s| f(s) * s.weight).sum()
    }

    pub fn sup(&self, f: impl Fn(&SurfaceSample) -> f64) -> f64 {
        self.samples.iter().map(|s| f(s).abs()).fold(0.0, f64::max)
    }
}

/// `+1` when the chosen normal points toward increasing `r` on radial layer `i`.
pub fn radial_sign(orientation: NormalOrientation, i: usize, n_r: usize) -> f64 {
    let outer = if i == 0 { -1.0 } else { 1.0 };
    match orientation {
        NormalOrientation::TowardInfinity => 1.0,
        NormalOrientation::Outer => outer,
        NormalOrientation::Inner => {
            debug_assert!(i == 0 || i + 1 == n_r);
            -outer
        }
    }
}

/// Forms of the coordinate plane `x^axis = const` through a point; the normal is
/// `sign · ∇x^a / |∇x^a|`, so `II_bc = −sign · Γ^a_bc / √g^{aa}` on the two
/// remaining axes taken in increasing order.
pub fn plane_forms(g: &Sym3, k: &Sym3, pg: &PointGeometry, axis: usize, sign: f64) -> (Sym2, Sym2, Sym2) {
    let [b, c] = tangent_axes(axis);
    let s = -sign / pg.ginv.get(axis, axis).sqrt();
    let tan = |t: &Sym3| Sym2([t.get(b, b), t.get(b, c), t.get(c, c)]);
    (tan(g), tan(&pg.gamma[axis]).scale(s), tan(k))
}

pub fn tangent_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Forms of the coordinate torus `r = const`.
pub fn torus_forms(g: &Sym3, k: &Sym3, pg: &PointGeometry, sign: f64) -> (Sym2, Sym2, Sym2) {
    plane_forms(g, k, pg, 0, sign)
}

/// Geometry of the coordinate torus through radial node layer `i`.
pub fn coordinate_torus(data: &InitialDataSet, pgs: &[PointGeometry], i: usize, sign: f64) -> Result<SurfaceGeometry> {
    let grid = &data.grid;
    let cell = grid.h_xi() * grid.h_theta();
    let mut samples = Vec::with_capacity(grid.n_xi * grid.n_theta);
    for j in 0..grid.n_xi {
        for l in 0..grid.n_theta {
            let n = grid.index(i, j, l);
            let (induced, ii, k_tan) = torus_forms(&data.g[n], &data.k[n], &pgs[n], sign);
            let weight = induced.det().max(0.0).sqrt() * cell;
            samples.push(SurfaceSample::from_forms(induced, ii, k_tan, weight)?);
        }
    }
    Ok(SurfaceGeometry::new(samples))
}

/// Coordinate torus at an arbitrary radius on the radial backend, by cubic
/// Lagrange interpolation of the nodal forms.
pub fn coordinate_torus_at(data: &InitialDataSet, pgs: &[PointGeometry], r: f64, sign: f64) -> Result<SurfaceGeometry> {
    let grid = &data.grid;
    if !grid.is_radial() {
        return Err(Error::DomainError("interpolated tori need the radial backend".into()));
    }
    if r < grid.r_min || r > grid.r_max {
        return Err(Error::DomainError(format!("r = {r} outside the grid")));
    }
    let x = (r - grid.r_min) / grid.h_r();
    let base = (x.floor() as isize - 1).clamp(0, grid.n_r as isize - 4) as usize;
    let mut acc = [[0.0; 3]; 3];
    for m in 0..4 {
        let node = base + m;
        let mut w = 1.0;
        for q in 0..4 {
            if q != m {
                w *= (x - (base + q) as f64) / (m as f64 - q as f64);
            }
        }
        let (a, b, c) = torus_forms(&data.g[node], &data.k[node], &pgs[node], sign);
        for (slot, form) in acc.iter_mut().zip([a, b, c]) {
            for t in 0..3 {
                slot[t] += w * form.0[t];
            }
        }
    }
    let induced = Sym2(acc[0]);
    let weight = induced.det().max(0.0).sqrt() * grid.torus_area();
    Ok(SurfaceGeometry::new(vec![SurfaceSample::from_forms(induced, Sym2(acc[1]), Sym2(acc[2]), weight)?]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_geometry;
    use crate::grid::Grid;
    use crate::models::{build_model, ModelSpec};

    #[test]
    fn kottler_tori_are_mots() {
        let grid = Grid::torus(1.0, 3.0, 21, 8, 8);
        let data = build_model(&ModelSpec::kottler(), &grid).unwrap();
        let pgs = point_geometry(&data).unwrap();
        for i in [0, 7, 20] {
            let s = coordinate_torus(&data, &pgs, i, 1.0).unwrap();
            for p in &s.samples {
                assert!((p.h - 2.0).abs() < 1e-8, "H = {}", p.h);
                assert!((p.tr_k + 2.0).abs() < 1e-12);
                assert!(p.theta_plus.abs() < 1e-8 && (p.theta_minus - 4.0).abs() < 1e-8);
                assert!(p.chi_plus_norm() < 1e-8);
            }
            let r = grid.r(i);
            assert!((s.area - r * r).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_product_torus_is_totally_geodesic() {
        let grid = Grid::torus(1.0, 2.0, 10, 8, 8);
        let n = grid.len();
        let comps = InitialDataSet::default_components(&grid, &[]);
        let data = InitialDataSet::new(grid, vec![Sym3::IDENTITY; n], vec![Sym3::ZERO; n], comps).unwrap();
        let pgs = point_geometry(&data).unwrap();
        let s = coordinate_torus(&data, &pgs, 4, 1.0).unwrap();
        let (h, t, c) = (s.sup(|p| p.h), s.sup(|p| p.theta_plus), s.sup(|p| p.chi_plus_norm()));
        assert!(h < 1e-12 && t < 1e-12 && c < 1e-12, "{h} {t} {c}");
    }

    #[test]
    fn interpolated_torus_matches_nodes() {
        let grid = Grid::radial(1.2, 4.0, 200);
        let data = build_model(&ModelSpec::pp_wave(1.2), &grid).unwrap();
        let pgs = point_geometry(&data).unwrap();
        let node = coordinate_torus(&data, &pgs, 50, 1.0).unwrap().samples[0];
        let at = coordinate_torus_at(&data, &pgs, grid.r(50), 1.0).unwrap().samples[0];
        assert!((node.h - at.h).abs() < 1e-12);
    }
}
