//! Free-free modal analysis of voxel solids: a slender rod checked against the
//! closed-form axial frequency, and an L-shaped block showing the six rigid modes.
//!
//! cargo run --example free_free_modes -- [n_cells]

use wheelforge::modal::{axial_fraction, mesh_from_voxels, nodal_masses, solve_free_free, Material, ModalSettings};
use wheelforge::solid::{VoxelGrid, VoxelSolid};

fn block(dims: [usize; 3], pitch: f64, keep: impl Fn(usize, usize, usize) -> bool) -> VoxelSolid {
    let mut s = VoxelSolid::empty(VoxelGrid {
        dims,
        pitch,
        origin: [0.0; 3],
    });
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                s.occupied[i + dims[0] * (j + dims[1] * k)] = keep(i, j, k);
            }
        }
    }
    s
}

fn main() -> wheelforge::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(40);
    let mat = Material::default();
    let length = 500.0;
    let mut settings = ModalSettings::default();
    settings.eigen.n_modes = 30;

    let rod = mesh_from_voxels(&block([n, 1, 1], length / n as f64, |_, _, _| true), mat)?;
    let res = solve_free_free(&rod, &settings)?;
    let exact = (mat.e / mat.rho).sqrt() / (2.0 * length);
    println!("rod: {} elements, first axial mode expected at {exact:.1} Hz", n);
    for (i, f) in res.frequencies_hz.iter().enumerate().skip(res.n_rigid) {
        let u = &res.mode_shapes[i];
        let along_x: f64 = u.iter().step_by(3).map(|v| v * v).sum::<f64>() / u.iter().map(|v| v * v).sum::<f64>();
        if along_x > 0.9 {
            println!("  axial mode {} at {f:.1} Hz ({:+.2}%)", i + 1, 100.0 * (f - exact) / exact);
            break;
        }
    }

    settings.eigen.n_modes = 12;
    let solid = block([8, 6, 2], 5.0, |i, j, _| i < 3 || j < 2);
    let mesh = mesh_from_voxels(&solid, mat)?;
    let res = solve_free_free(&mesh, &settings)?;
    println!("L-block: {} dofs, {:.3} kg, {} rigid modes", mesh.n_dofs(), mesh.volume() * mat.rho * 1e3, res.n_rigid);
    let masses = nodal_masses(&mesh);
    for (i, (f, u)) in res.frequencies_hz.iter().zip(&res.mode_shapes).enumerate() {
        let a = axial_fraction(&mesh, &masses, u, f64::INFINITY);
        println!("  mode {:>2}  {f:>10.3} Hz  out-of-plane fraction {a:.2}", i + 1);
    }
    Ok(())
}
