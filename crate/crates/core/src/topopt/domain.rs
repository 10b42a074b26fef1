use serde::{Deserialize, Serialize};

use crate::designspace::{DesignImage, BORE_FRAC, OUTER_RADIUS_FRAC};
use crate::error::{Error, Result};

/// Role of an element in the optimization domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Design,
    /// Rim ring, density pinned to 1.
    RimNondesign,
    /// Hub annulus; all of its nodes are clamped.
    HubFixed,
    /// Outside the disc or inside the bore; excluded from the mesh.
    Void,
}

impl ElementKind {
    /// Physical density of non-design elements.
    pub fn pinned_density(self) -> Option<f64> {
        match self {
            ElementKind::Design => None,
            ElementKind::RimNondesign | ElementKind::HubFixed => Some(1.0),
            ElementKind::Void => Some(0.0),
        }
    }
}

/// Geometry and load parameters of the wheel domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSpec {
    /// Elements per side.
    pub grid: usize,
    pub hub_radius_frac: f64,
    pub rim_inner_radius_frac: f64,
    /// Total magnitude of the radially inward rim load.
    pub normal_magnitude: f64,
    /// Tangential load as a fraction of the normal load.
    pub shear_ratio: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            grid: 64,
            hub_radius_frac: 0.32,
            rim_inner_radius_frac: 0.8,
            normal_magnitude: 1.0,
            shear_ratio: 0.0,
        }
    }
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 4 {
            return Err(Error::validation(format!("grid must be at least 4, got {}", self.grid)));
        }
        let (h, r) = (self.hub_radius_frac, self.rim_inner_radius_frac);
        if !(h > 0.0 && h < r && r < OUTER_RADIUS_FRAC) {
            return Err(Error::validation(format!(
                "need 0 < hub ({h}) < rim inner ({r}) < {OUTER_RADIUS_FRAC}"
            )));
        }
        if !self.normal_magnitude.is_finite() || !self.shear_ratio.is_finite() {
            return Err(Error::validation("loads must be finite"));
        }
        Ok(())
    }
}

/// Rectangular lattice of unit Q4 elements with per-element roles, supports and loads.
///
/// Element `(ex, ey)` has index `ey * nelx + ex` and matches image pixel `(ex, ey)`.
/// Node `(i, j)` has index `j * (nelx + 1) + i`, DOFs `2 * node` and `2 * node + 1`.
#[derive(Clone, Debug)]
pub struct WheelDomain {
    nelx: usize,
    nely: usize,
    kinds: Vec<ElementKind>,
    fixed: Vec<bool>,
    loads: Vec<f64>,
}

impl WheelDomain {
    pub fn from_parts(
        nelx: usize,
        nely: usize,
        kinds: Vec<ElementKind>,
        fixed: Vec<bool>,
        loads: Vec<f64>,
    ) -> Result<Self> {
        let ndof = 2 * (nelx + 1) * (nely + 1);
        if kinds.len() != nelx * nely {
            return Err(Error::dimension(nelx * nely, kinds.len()));
        }
        if fixed.len() != ndof || loads.len() != ndof {
            return Err(Error::dimension(ndof, fixed.len().min(loads.len())));
        }
        Ok(Self {
            nelx,
            nely,
            kinds,
            fixed,
            loads,
        })
    }

    /// Annular wheel: void outside the disc and in the bore, clamped hub, pinned rim,
    /// radial plus tangential load on the outer boundary nodes.
    pub fn wheel(spec: &DomainSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.grid;
        let half = n as f64 / 2.0;
        let bore = BORE_FRAC * spec.hub_radius_frac;
        let kind_at = |ex: isize, ey: isize| -> ElementKind {
            if ex < 0 || ey < 0 || ex >= n as isize || ey >= n as isize {
                return ElementKind::Void;
            }
            let dx = ex as f64 + 0.5 - half;
            let dy = ey as f64 + 0.5 - half;
            let r = (dx * dx + dy * dy).sqrt() / half;
            if r > OUTER_RADIUS_FRAC || r < bore {
                ElementKind::Void
            } else if r < spec.hub_radius_frac {
                ElementKind::HubFixed
            } else if r >= spec.rim_inner_radius_frac {
                ElementKind::RimNondesign
            } else {
                ElementKind::Design
            }
        };
        let mut kinds = Vec::with_capacity(n * n);
        for ey in 0..n {
            for ex in 0..n {
                kinds.push(kind_at(ex as isize, ey as isize));
            }
        }
        let nn = n + 1;
        let mut fixed = vec![false; 2 * nn * nn];
        let mut loads = vec![0.0; 2 * nn * nn];
        let mut boundary = Vec::new();
        for j in 0..nn {
            for i in 0..nn {
                let adj = [(-1, -1), (0, -1), (-1, 0), (0, 0)]
                    .map(|(a, b)| kind_at(i as isize + a, j as isize + b));
                let node = j * nn + i;
                if adj.contains(&ElementKind::HubFixed) {
                    fixed[2 * node] = true;
                    fixed[2 * node + 1] = true;
                }
                let outer_void = |(a, b): (isize, isize)| {
                    let dx = i as f64 + a as f64 + 0.5 - half;
                    let dy = j as f64 + b as f64 + 0.5 - half;
                    (dx * dx + dy * dy).sqrt() / half > spec.rim_inner_radius_frac
                        && kind_at(i as isize + a, j as isize + b) == ElementKind::Void
                };
                if adj.contains(&ElementKind::RimNondesign)
                    && [(-1, -1), (0, -1), (-1, 0), (0, 0)].into_iter().any(outer_void)
                {
                    boundary.push(node);
                }
            }
        }
        if !boundary.is_empty() {
            let per = spec.normal_magnitude / boundary.len() as f64;
            for &node in &boundary {
                let x = (node % nn) as f64 - half;
                let y = (node / nn) as f64 - half;
                let r = (x * x + y * y).sqrt();
                let (ux, uy) = (x / r, y / r);
                loads[2 * node] = -per * ux - spec.shear_ratio * per * uy;
                loads[2 * node + 1] = -per * uy + spec.shear_ratio * per * ux;
            }
        }
        Self::from_parts(n, n, kinds, fixed, loads)
    }

    /// Small rectangular stand-in for a sector of the wheel: the bottom row is
    /// clamped hub, the top row is pinned rim carrying a compressive load plus
    /// `shear_ratio` times as much tangential load.
    pub fn wheel_slice(nelx: usize, nely: usize, shear_ratio: f64) -> Self {
        let nn = nelx + 1;
        let ndof = 2 * nn * (nely + 1);
        let mut kinds = vec![ElementKind::Design; nelx * nely];
        for ex in 0..nelx {
            kinds[ex] = ElementKind::HubFixed;
            kinds[(nely - 1) * nelx + ex] = ElementKind::RimNondesign;
        }
        let mut fixed = vec![false; ndof];
        for node in 0..2 * nn {
            fixed[2 * node] = true;
            fixed[2 * node + 1] = true;
        }
        let mut loads = vec![0.0; ndof];
        let per = 1.0 / nn as f64;
        for i in 0..nn {
            let node = nely * nn + i;
            loads[2 * node] = shear_ratio * per;
            loads[2 * node + 1] = -per;
        }
        Self::from_parts(nelx, nely, kinds, fixed, loads).expect("consistent sizes")
    }

    /// Full-design cantilever: left edge clamped, load `-tip_load` in y at the
    /// lower-right corner.
    pub fn cantilever(nelx: usize, nely: usize, tip_load: f64) -> Self {
        let nn = nelx + 1;
        let ndof = 2 * nn * (nely + 1);
        let mut fixed = vec![false; ndof];
        for j in 0..=nely {
            fixed[2 * j * nn] = true;
            fixed[2 * j * nn + 1] = true;
        }
        let mut loads = vec![0.0; ndof];
        loads[2 * nelx + 1] = -tip_load;
        Self::from_parts(nelx, nely, vec![ElementKind::Design; nelx * nely], fixed, loads)
            .expect("consistent sizes")
    }

    /// Half MBB beam: symmetry on the left edge, roller at the lower-right corner,
    /// unit downward load at the upper-left corner.
    pub fn mbb(nelx: usize, nely: usize) -> Self {
        let nn = nelx + 1;
        let ndof = 2 * nn * (nely + 1);
        let mut fixed = vec![false; ndof];
        for j in 0..=nely {
            fixed[2 * j * nn] = true;
        }
        fixed[2 * nelx + 1] = true;
        let mut loads = vec![0.0; ndof];
        loads[2 * (nely * nn) + 1] = -1.0;
        Self::from_parts(nelx, nely, vec![ElementKind::Design; nelx * nely], fixed, loads)
            .expect("consistent sizes")
    }

    pub fn nelx(&self) -> usize {
        self.nelx
    }

    pub fn nely(&self) -> usize {
        self.nely
    }

    pub fn n_elements(&self) -> usize {
        self.nelx * self.nely
    }

    pub fn n_dofs(&self) -> usize {
        2 * (self.nelx + 1) * (self.nely + 1)
    }

    pub fn kinds(&self) -> &[ElementKind] {
        &self.kinds
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn with_loads(mut self, loads: Vec<f64>) -> Result<Self> {
        if loads.len() != self.n_dofs() {
            return Err(Error::dimension(self.n_dofs(), loads.len()));
        }
        self.loads = loads;
        Ok(self)
    }

    pub fn design_elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == ElementKind::Design)
            .map(|(e, _)| e)
    }

    pub fn n_design(&self) -> usize {
        self.design_elements().count()
    }

    /// Element centre in element units.
    pub fn element_center(&self, e: usize) -> (f64, f64) {
        ((e % self.nelx) as f64 + 0.5, (e / self.nelx) as f64 + 0.5)
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (ex, ey) = (e % self.nelx, e / self.nelx);
        let nn = self.nelx + 1;
        let n0 = ey * nn + ex;
        [n0, n0 + 1, n0 + nn + 1, n0 + nn]
    }

    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let n = self.element_nodes(e);
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    /// Per-element field of a square image whose size is an integer multiple of the
    /// grid, by box averaging.
    pub fn sample_image(&self, image: &DesignImage) -> Result<Vec<f64>> {
        let s = image.size();
        if self.nelx != self.nely || s % self.nelx != 0 {
            return Err(Error::dimension(
                format!("image size multiple of {}", self.nelx),
                s,
            ));
        }
        let f = s / self.nelx;
        let norm = 1.0 / (f * f) as f64;
        Ok((0..self.n_elements())
            .map(|e| {
                let (ex, ey) = (e % self.nelx, e / self.nelx);
                let mut acc = 0.0;
                for y in ey * f..(ey + 1) * f {
                    for x in ex * f..(ex + 1) * f {
                        acc += image.get(x, y);
                    }
                }
                acc * norm
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wheel_masks_partition_and_loads_balance_radially() {
        let spec = DomainSpec {
            grid: 32,
            shear_ratio: 0.0,
            ..DomainSpec::default()
        };
        let d = WheelDomain::wheel(&spec).unwrap();
        let count = |k| d.kinds().iter().filter(|&&x| x == k).count();
        assert!(count(ElementKind::Design) > 0);
        assert!(count(ElementKind::RimNondesign) > 0);
        assert!(count(ElementKind::HubFixed) > 0);
        assert_eq!(
            count(ElementKind::Design)
                + count(ElementKind::RimNondesign)
                + count(ElementKind::HubFixed)
                + count(ElementKind::Void),
            32 * 32
        );
        assert!(d.fixed().iter().any(|&f| f));
        let mag: f64 = d
            .loads()
            .chunks(2)
            .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
            .sum();
        assert!((mag - 1.0).abs() < 1e-12);
        // Symmetric layout: net force vanishes.
        let fx: f64 = d.loads().iter().step_by(2).sum();
        let fy: f64 = d.loads().iter().skip(1).step_by(2).sum();
        assert!(fx.abs() < 1e-12 && fy.abs() < 1e-12);
    }

    #[test]
    fn shear_produces_torque() {
        let spec = DomainSpec {
            grid: 32,
            shear_ratio: 0.3,
            ..DomainSpec::default()
        };
        let d = WheelDomain::wheel(&spec).unwrap();
        let nn = 33;
        let torque: f64 = (0..nn * nn)
            .map(|node| {
                let x = (node % nn) as f64 - 16.0;
                let y = (node / nn) as f64 - 16.0;
                x * d.loads()[2 * node + 1] - y * d.loads()[2 * node]
            })
            .sum();
        assert!(torque > 0.0);
    }

    #[test]
    fn invalid_spec_rejected() {
        let spec = DomainSpec {
            hub_radius_frac: 0.9,
            ..DomainSpec::default()
        };
        assert!(matches!(WheelDomain::wheel(&spec), Err(Error::Validation(_))));
    }
}
