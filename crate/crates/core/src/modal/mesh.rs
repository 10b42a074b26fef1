use serde::{Deserialize, Serialize};

use super::element::CORNERS;
use crate::error::{Error, Result};
use crate::solid::VoxelSolid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Young's modulus, MPa.
    pub e: f64,
    pub nu: f64,
    /// Density, tonne/mm³.
    pub rho: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            e: 73_500.0,
            nu: 0.33,
            rho: 2.692e-9,
        }
    }
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0 && self.nu > 0.0 && self.nu < 0.5 && self.rho > 0.0) {
            return Err(Error::validation(format!("invalid material {self:?}")));
        }
        Ok(())
    }

    pub fn shear_modulus(&self) -> f64 {
        self.e / (2.0 * (1.0 + self.nu))
    }
}

/// Hexahedral mesh with one cube element per occupied voxel.
#[derive(Clone, Debug)]
pub struct HexMesh {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 8]>,
    pub pitch: f64,
    pub material: Material,
}

impl HexMesh {
    pub fn n_dofs(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn volume(&self) -> f64 {
        self.elements.len() as f64 * self.pitch.powi(3)
    }

    pub fn translated(&self, d: [f64; 3]) -> Self {
        let mut m = self.clone();
        for n in &mut m.nodes {
            for k in 0..3 {
                n[k] += d[k];
            }
        }
        m
    }
}

/// Nodes are numbered in increasing lattice order (z, then y, then x);
/// elements follow voxel order.
pub fn mesh_from_voxels(solid: &VoxelSolid, material: Material) -> Result<HexMesh> {
    material.validate()?;
    let (labels, n_comp) = solid.components();
    if n_comp != 1 {
        let mut sizes = vec![0usize; n_comp];
        for &l in labels.iter().filter(|&&l| l != u32::MAX) {
            sizes[l as usize] += 1;
        }
        return Err(Error::Structural(format!(
            "solid must be one connected component; found {n_comp} with voxel counts {sizes:?}"
        )));
    }
    let g = &solid.grid;
    let (nx, ny) = (g.dims[0] + 1, g.dims[1] + 1);
    let lattice = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
    let mut used = vec![false; nx * ny * (g.dims[2] + 1)];
    for idx in 0..solid.occupied.len() {
        if solid.occupied[idx] {
            let [i, j, k] = g.coords(idx);
            for c in CORNERS {
                used[lattice(i + c[0], j + c[1], k + c[2])] = true;
            }
        }
    }
    let mut id = vec![usize::MAX; used.len()];
    let mut nodes = Vec::new();
    for (l, &u) in used.iter().enumerate() {
        if u {
            id[l] = nodes.len();
            let (i, j, k) = (l % nx, (l / nx) % ny, l / (nx * ny));
            nodes.push([
                g.origin[0] + i as f64 * g.pitch,
                g.origin[1] + j as f64 * g.pitch,
                g.origin[2] + k as f64 * g.pitch,
            ]);
        }
    }
    let elements = (0..solid.occupied.len())
        .filter(|&idx| solid.occupied[idx])
        .map(|idx| {
            let [i, j, k] = g.coords(idx);
            CORNERS.map(|c| id[lattice(i + c[0], j + c[1], k + c[2])])
        })
        .collect();
    Ok(HexMesh {
        nodes,
        elements,
        pitch: g.pitch,
        material,
    })
}
