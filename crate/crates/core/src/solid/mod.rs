//! Voxel wheel construction from a spoke sketch and two revolved cross-sections.

mod mesh;
mod ops;
mod section;
mod voxel;


pub use mesh::{export_mesh, TriMesh};
pub use ops::{
    add_rim, build_wheel, catmull_rom_closed, drill_lug_holes, extrude_cut, lug_centres, mass, revolve_profile,
    BuildReport, WheelBuildSpec, MAX_PITCH_MM,
};
pub use section::{CrossSection, SectionKind};
pub use voxel::{label_components, VoxelGrid, VoxelSolid};
