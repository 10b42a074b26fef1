//! Free-free modal analysis of voxel wheels with trilinear hexahedra.

mod assemble;
mod classify;
mod eigen;
mod element;
mod mesh;

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

pub use assemble::{assemble, lower_pattern, Assembled, MassKind};
pub use classify::{axial_fraction, nodal_masses, pick_lateral};
pub use eigen::{solve_pencil, EigenPairs, EigenSettings};
pub use element::{elasticity, hex8_lumped_mass, hex8_mass, hex8_stiffness, CORNERS};
pub use mesh::{mesh_from_voxels, HexMesh, Material};

use crate::error::{Error, Result};
use crate::solid::VoxelSolid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModalSettings {
    pub eigen: EigenSettings,
    pub mass: MassKind,
    /// A mode is rigid when its frequency is below this fraction of the
    /// highest computed frequency.
    pub rigid_ratio: f64,
    /// Only nodes inside this radius count towards the axial fraction.
    pub lateral_radius_mm: f64,
}

impl Default for ModalSettings {
    fn default() -> Self {
        Self {
            eigen: EigenSettings::default(),
            mass: MassKind::Consistent,
            rigid_ratio: 1e-3,
            lateral_radius_mm: 184.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModalResult {
    pub frequencies_hz: Vec<f64>,
    pub n_rigid: usize,
    pub lateral_index: usize,
    pub lateral_frequency_hz: f64,
    pub mass_kg: f64,
    pub axial_fractions: Vec<f64>,
    pub residuals: Vec<f64>,
    pub n_dofs: usize,
    /// Mass-normalized shapes, one per frequency; not serialized.
    #[serde(skip)]
    pub mode_shapes: Vec<Vec<f64>>,
}

pub fn frequency_hz(lambda: f64) -> f64 {
    lambda.max(0.0).sqrt() / (2.0 * std::f64::consts::PI)
}

/// `k = (2πf)² m`.
pub fn stiffness_from(f_hz: f64, m_kg: f64) -> Result<f64> {
    if !(m_kg > 0.0) || !(f_hz >= 0.0) {
        return Err(Error::validation("stiffness needs f >= 0 and m > 0"));
    }
    Ok((2.0 * std::f64::consts::PI * f_hz).powi(2) * m_kg)
}

/// Inverse of [`stiffness_from`].
pub fn frequency_from(k: f64, m_kg: f64) -> Result<f64> {
    if !(m_kg > 0.0) || !(k >= 0.0) {
        return Err(Error::validation("frequency needs k >= 0 and m > 0"));
    }
    Ok((k / m_kg).sqrt() / (2.0 * std::f64::consts::PI))
}

/// Counts leading modes below `ratio` times the highest computed frequency.
pub fn count_rigid(freqs: &[f64], ratio: f64) -> usize {
    let top = freqs.last().copied().unwrap_or(0.0);
    freqs.iter().take_while(|&&f| f < ratio * top).count()
}

pub fn solve_free_free(mesh: &HexMesh, settings: &ModalSettings) -> Result<ModalResult> {
    let asm = assemble(mesh, settings.mass);
    let pairs = solve_pencil(&asm, &settings.eigen)?;
    let frequencies_hz: Vec<f64> = pairs.values.iter().map(|&l| frequency_hz(l)).collect();
    let n_rigid = count_rigid(&frequencies_hz, settings.rigid_ratio);
    let masses = nodal_masses(mesh);
    let axial_fractions: Vec<f64> = pairs
        .vectors
        .iter()
        .map(|u| axial_fraction(mesh, &masses, u, settings.lateral_radius_mm))
        .collect();
    let lateral_index = pick_lateral(&axial_fractions, n_rigid);
    Ok(ModalResult {
        lateral_frequency_hz: frequencies_hz[lateral_index],
        frequencies_hz,
        n_rigid,
        lateral_index,
        mass_kg: mesh.volume() * mesh.material.rho * 1000.0,
        axial_fractions,
        residuals: pairs.residuals,
        n_dofs: mesh.n_dofs(),
        mode_shapes: pairs.vectors,
    })
}

pub fn analyze_solid(solid: &VoxelSolid, material: Material, settings: &ModalSettings) -> Result<ModalResult> {
    let mesh = mesh_from_voxels(solid, material)?;
    solve_free_free(&mesh, settings)
}
