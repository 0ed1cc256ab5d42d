//! Sampled initial data `(g, k)` and pointwise derivative jets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{d1_order4, d2_order4};
use crate::grid::Grid;
use crate::models::ModelSpec;
use crate::tensor::Sym3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// `θ₊ ≥ 0` with respect to the outer normal of the domain.
    OuterPlus,
    /// `θ₊ ≤ 0` with respect to the inner normal.
    InnerMinus,
    /// Truncation torus in the asymptotic end.
    AsymptoticTorus,
}

impl BoundaryKind {
    /// Plus components take the outer normal as `υ`, minus components the inner one.
    pub fn is_plus(self) -> bool {
        !matches!(self, BoundaryKind::InnerMinus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryComponent {
    pub id: usize,
    pub kind: BoundaryKind,
    pub genus: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DerivativeMode {
    #[default]
    FiniteDifference,
    /// Exact derivatives from the closed-form source, when there is one.
    Analytic,
}

/// Decay satisfied by `k + g` in the radial direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayClass {
    Standard,
    /// `k_rr + g_rr = O(r⁻⁵)` only.
    WeakenedRadial,
}

/// Metric and extrinsic curvature with the derivatives needed for curvature
/// and momentum at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct Jet {
    pub g: Sym3,
    pub dg: [Sym3; 3],
    pub ddg: [[Sym3; 3]; 3],
    pub k: Sym3,
    pub dk: [Sym3; 3],
}

#[derive(Debug, Clone)]
pub struct InitialDataSet {
    pub grid: Grid,
    pub g: Vec<Sym3>,
    pub k: Vec<Sym3>,
    pub boundary_components: Vec<BoundaryComponent>,
    pub analytic_source: Option<ModelSpec>,
    pub derivative_mode: DerivativeMode,
    pub decay: DecayClass,
}

impl InitialDataSet {
    pub fn new(grid: Grid, g: Vec<Sym3>, k: Vec<Sym3>, boundary_components: Vec<BoundaryComponent>) -> Result<Self> {
        grid.validate()?;
        let data = InitialDataSet {
            grid,
            g,
            k,
            boundary_components,
            analytic_source: None,
            derivative_mode: DerivativeMode::FiniteDifference,
            decay: DecayClass::Standard,
        };
        data.validate()?;
        Ok(data)
    }

    /// Components implied by the grid: inner torus (0), outer torus (1), one per box.
    pub fn default_components(grid: &Grid, box_kinds: &[BoundaryKind]) -> Vec<BoundaryComponent> {
        let mut out = vec![
            BoundaryComponent { id: 0, kind: BoundaryKind::InnerMinus, genus: 1 },
            BoundaryComponent { id: 1, kind: BoundaryKind::AsymptoticTorus, genus: 1 },
        ];
        for b in 0..grid.excisions.len() {
            let kind = box_kinds.get(b).copied().unwrap_or(BoundaryKind::OuterPlus);
            out.push(BoundaryComponent { id: Grid::box_component(b), kind, genus: 0 });
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if self.g.len() != n || self.k.len() != n {
            return Err(Error::InvalidGrid(format!(
                "field length mismatch: grid {n}, g {}, k {}",
                self.g.len(),
                self.k.len()
            )));
        }
        if let Some(node) = self.g.iter().position(|g| g.inverse_spd().is_none()) {
            return Err(Error::SingularMetric { node });
        }
        let expected = 2 + self.grid.excisions.len();
        if self.boundary_components.len() != expected {
            return Err(Error::InvalidSpec(format!(
                "{} boundary components listed, grid implies {expected}",
                self.boundary_components.len()
            )));
        }
        for (i, c) in self.boundary_components.iter().enumerate() {
            if c.id != i {
                return Err(Error::InvalidSpec(format!("component ids must be 0..{expected} in order")));
            }
            if c.kind == BoundaryKind::OuterPlus && c.id != 1 && c.genus != 0 {
                return Err(Error::InvalidSpec(format!("component {} is OuterPlus with genus {}", c.id, c.genus)));
            }
        }
        Ok(())
    }

    pub fn component(&self, id: usize) -> Result<&BoundaryComponent> {
        self.boundary_components.get(id).ok_or(Error::UnknownComponent(id))
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    /// Restrict to radial nodes `0..n_keep`.
    pub fn truncated(&self, n_keep: usize) -> Result<Self> {
        let grid = self.grid.truncated(n_keep);
        let keep = grid.len();
        let mut out = self.clone();
        out.grid = grid;
        out.g.truncate(keep);
        out.k.truncate(keep);
        out.grid.validate()?;
        Ok(out)
    }

    /// Derivative jet at node `n`, analytic when requested and available.
    pub fn jet(&self, n: usize) -> Jet {
        if let (DerivativeMode::Analytic, Some(spec)) = (self.derivative_mode, &self.analytic_source) {
            return spec.jet(self.grid.coords(self.grid.unindex(n)));
        }
        self.fd_jet(n)
    }

    /// Fourth-order finite-difference jet at node `n`.
    pub fn fd_jet(&self, n: usize) -> Jet {
        let grid = &self.grid;
        let idx = grid.unindex(n);
        let dims = grid.dims();
        let h = grid.spacings();
        let active: Vec<usize> = if grid.is_radial() { vec![0] } else { vec![0, 1, 2] };
        let at = |field: &[Sym3], offs: [isize; 3]| -> Sym3 {
            let i = (idx[0] as isize + offs[0]) as usize;
            let j = grid.wrap(1, idx[1] as isize + offs[1]);
            let l = grid.wrap(2, idx[2] as isize + offs[2]);
            field[grid.index(i, j, l)]
        };
        let shift = |a: usize, o: isize| {
            let mut s = [0isize; 3];
            s[a] = o;
            s
        };
        let mut jet = Jet { g: self.g[n], k: self.k[n], ..Default::default() };
        for &a in &active {
            let st = d1_order4(idx[a], dims[a], a > 0);
            let mut dg = Sym3::ZERO;
            let mut dk = Sym3::ZERO;
            for (o, w) in st.iter() {
                dg = dg + at(&self.g, shift(a, o)) * w;
                dk = dk + at(&self.k, shift(a, o)) * w;
            }
            jet.dg[a] = dg * (1.0 / h[a]);
            jet.dk[a] = dk * (1.0 / h[a]);

            let st2 = d2_order4(idx[a], dims[a], a > 0);
            let mut ddg = Sym3::ZERO;
            for (o, w) in st2.iter() {
                ddg = ddg + at(&self.g, shift(a, o)) * w;
            }
            jet.ddg[a][a] = ddg * (1.0 / (h[a] * h[a]));
        }
        for &a in &active {
            for &b in &active {
                if b <= a {
                    continue;
                }
                let sa = d1_order4(idx[a], dims[a], a > 0);
                let sb = d1_order4(idx[b], dims[b], b > 0);
                let mut acc = Sym3::ZERO;
                for (oa, wa) in sa.iter() {
                    for (ob, wb) in sb.iter() {
                        let mut s = shift(a, oa);
                        s[b] = ob;
                        acc = acc + at(&self.g, s) * (wa * wb);
                    }
                }
                let v = acc * (1.0 / (h[a] * h[b]));
                jet.ddg[a][b] = v;
                jet.ddg[b][a] = v;
            }
        }
        jet
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelSpec};

    #[test]
    fn fd_jet_matches_analytic_on_perturbed_model() {
        let grid = Grid::torus(1.0, 2.0, 41, 24, 24);
        let spec = ModelSpec::perturbed_kottler(0.3, 3.0, [1, 1]);
        let data = build_model(&spec, &grid).unwrap();
        let n = grid.index(20, 5, 7);
        let fd = data.fd_jet(n);
        let ex = spec.jet(grid.coords(grid.unindex(n)));
        for a in 0..3 {
            assert!((fd.dg[a] - ex.dg[a]).max_abs() < 1e-4, "dg[{a}]");
            for b in 0..3 {
                assert!((fd.ddg[a][b] - ex.ddg[a][b]).max_abs() < 1e-3 * (1.0 + ex.ddg[a][b].max_abs()), "ddg[{a}][{b}]");
            }
        }
    }

    #[test]
    fn rejects_indefinite_metric() {
        let grid = Grid::radial(1.0, 2.0, 10);
        let mut g = vec![Sym3::IDENTITY; 10];
        g[4] = Sym3::diag(1.0, -1.0, 1.0);
        let comps = InitialDataSet::default_components(&grid, &[]);
        let err = InitialDataSet::new(grid, g, vec![Sym3::ZERO; 10], comps).unwrap_err();
        assert_eq!(err, Error::SingularMetric { node: 4 });
    }
}
