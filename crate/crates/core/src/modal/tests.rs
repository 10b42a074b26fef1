use super::*;
use crate::solid::{VoxelGrid, VoxelSolid};

fn block(nx: usize, ny: usize, nz: usize, pitch: f64) -> VoxelSolid {
    let grid = VoxelGrid {
        dims: [nx, ny, nz],
        pitch,
        origin: [0.0; 3],
    };
    let mut s = VoxelSolid::empty(grid);
    s.occupied.iter_mut().for_each(|o| *o = true);
    s
}

fn disc(r_cells: usize, nz: usize, pitch: f64) -> VoxelSolid {
    let n = 2 * r_cells;
    let grid = VoxelGrid {
        dims: [n, n, nz],
        pitch,
        origin: [-(r_cells as f64) * pitch, -(r_cells as f64) * pitch, 0.0],
    };
    let mut s = VoxelSolid::empty(grid.clone());
    for idx in 0..s.occupied.len() {
        let [i, j, k] = grid.coords(idx);
        let c = grid.center(i, j, k);
        s.occupied[idx] = c[0].hypot(c[1]) <= r_cells as f64 * pitch;
    }
    s
}

fn al() -> Material {
    Material::default()
}

#[test]
fn mesh_counts() {
    let m = mesh_from_voxels(&block(1, 1, 1, 1.0), al()).unwrap();
    assert_eq!((m.nodes.len(), m.elements.len()), (8, 1));
    let m = mesh_from_voxels(&block(2, 1, 1, 1.0), al()).unwrap();
    assert_eq!(m.nodes.len(), 12);
    let m = mesh_from_voxels(&block(3, 3, 3, 1.0), al()).unwrap();
    assert_eq!(m.nodes.len(), 64);
    // Node numbering is lexicographic: first node at the origin, last at the far corner.
    assert_eq!(m.nodes[0], [0.0; 3]);
    assert_eq!(m.nodes[63], [3.0; 3]);

    let mut two = block(3, 1, 1, 1.0);
    two.occupied[1] = false;
    let err = mesh_from_voxels(&two, al()).unwrap_err().to_string();
    assert!(err.contains("[1, 1]"), "{err}");
    assert!(mesh_from_voxels(&block(1, 1, 1, 1.0), Material { nu: 0.5, ..al() }).is_err());
}

/// Element stiffness by 3-point Gauss on the reference cube [-1, 1]³.
fn reference_stiffness(e: f64, nu: f64, h: f64) -> Vec<f64> {
    let d = elasticity(e, nu);
    let sign = |c: usize| if c == 1 { 1.0 } else { -1.0 };
    let pts = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let wts = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let jac = h / 2.0;
    let mut k = vec![0.0; 576];
    for (a, &x) in pts.iter().enumerate() {
        for (b, &y) in pts.iter().enumerate() {
            for (c, &z) in pts.iter().enumerate() {
                let w = wts[a] * wts[b] * wts[c] * jac * jac * jac;
                let mut bm = vec![vec![0.0; 24]; 6];
                for (n, cn) in CORNERS.iter().enumerate() {
                    let (sx, sy, sz) = (sign(cn[0]), sign(cn[1]), sign(cn[2]));
                    let dx = sx * (1.0 + sy * y) * (1.0 + sz * z) / 8.0 / jac;
                    let dy = sy * (1.0 + sx * x) * (1.0 + sz * z) / 8.0 / jac;
                    let dz = sz * (1.0 + sx * x) * (1.0 + sy * y) / 8.0 / jac;
                    bm[0][3 * n] = dx;
                    bm[1][3 * n + 1] = dy;
                    bm[2][3 * n + 2] = dz;
                    bm[3][3 * n] = dy;
                    bm[3][3 * n + 1] = dx;
                    bm[4][3 * n + 1] = dz;
                    bm[4][3 * n + 2] = dy;
                    bm[5][3 * n] = dz;
                    bm[5][3 * n + 2] = dx;
                }
                for i in 0..24 {
                    for j in 0..24 {
                        let mut s = 0.0;
                        for p in 0..6 {
                            for q in 0..6 {
                                s += bm[p][i] * d[p][q] * bm[q][j];
                            }
                        }
                        k[i * 24 + j] += w * s;
                    }
                }
            }
        }
    }
    k
}

#[test]
fn element_stiffness_matches_reference() {
    let (e, nu, h) = (73_500.0, 0.33, 4.0);
    let k = hex8_stiffness(e, nu, h);
    let r = reference_stiffness(e, nu, h);
    let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in k.iter().zip(&r) {
        assert!((a - b).abs() <= 1e-12 * scale);
    }
    // Consistent mass sums to the element mass per direction.
    let m = hex8_mass(2.0, 3.0);
    let total: f64 = (0..8).flat_map(|a| (0..8).map(move |b| (a, b))).map(|(a, b)| m[(3 * a) * 24 + 3 * b]).sum();
    assert!((total - 54.0).abs() < 1e-12);
}

#[test]
fn rigid_motions_are_in_the_null_space_and_mass_is_exact() {
    let mut s = disc(6, 3, 5.0);
    s.occupied[0] = false;
    let mesh = mesh_from_voxels(&s, al()).unwrap();
    let asm = assemble(&mesh, MassKind::Consistent);
    let n = mesh.n_dofs();
    let kmax = asm.k.max_abs();
    let mut y = vec![0.0; n];
    for dir in 0..3 {
        let u: Vec<f64> = (0..n).map(|i| if i % 3 == dir { 1.0 } else { 0.0 }).collect();
        asm.k.mul_vec(&u, &mut y);
        assert!(y.iter().all(|v| v.abs() <= 1e-9 * kmax));
        asm.m.mul_vec(&u, &mut y);
        let m: f64 = u.iter().zip(&y).map(|(a, b)| a * b).sum();
        let exact = mesh.material.rho * mesh.volume();
        assert!((m - exact).abs() <= 1e-9 * exact);
    }
    // Rotation about z.
    let u: Vec<f64> = (0..n)
        .map(|i| {
            let p = mesh.nodes[i / 3];
            match i % 3 {
                0 => -p[1],
                1 => p[0],
                _ => 0.0,
            }
        })
        .collect();
    asm.k.mul_vec(&u, &mut y);
    assert!(y.iter().all(|v| v.abs() <= 1e-9 * kmax * 30.0));
    // Symmetry.
    for r in 0..n {
        for p in asm.k.row_ptr[r]..asm.k.row_ptr[r + 1] {
            let c = asm.k.col_idx[p];
            let q = (asm.k.row_ptr[c]..asm.k.row_ptr[c + 1]).find(|&q| asm.k.col_idx[q] == r).unwrap();
            assert_eq!(asm.k.values[p], asm.k.values[q]);
        }
    }
}

fn rod_settings(n_modes: usize) -> ModalSettings {
    ModalSettings {
        eigen: EigenSettings {
            n_modes,
            ..EigenSettings::default()
        },
        ..ModalSettings::default()
    }
}

#[test]
fn free_free_rod_longitudinal_frequency() {
    let (len, cells) = (400.0, 40);
    let mesh = mesh_from_voxels(&block(cells, 1, 1, len / cells as f64), al()).unwrap();
    let res = solve_free_free(&mesh, &rod_settings(40)).unwrap();
    assert_eq!(res.n_rigid, 6);
    assert!(res.frequencies_hz[5] / res.frequencies_hz[6] < 1e-3);
    // Longitudinal mode: the elastic mode with the largest x share.
    let masses = nodal_masses(&mesh);
    let share = |u: &[f64]| {
        let (mut ax, mut all) = (0.0, 0.0);
        for (i, m) in masses.iter().enumerate() {
            ax += m * u[3 * i] * u[3 * i];
            all += m * (u[3 * i].powi(2) + u[3 * i + 1].powi(2) + u[3 * i + 2].powi(2));
        }
        ax / all
    };
    let idx = (6..res.frequencies_hz.len())
        .max_by(|&a, &b| share(&res.mode_shapes[a]).total_cmp(&share(&res.mode_shapes[b])))
        .unwrap();
    let m = mesh.material;
    let exact = (m.e / m.rho).sqrt() / (2.0 * len);
    let f = res.frequencies_hz[idx];
    assert!((f - exact).abs() / exact < 0.02, "{f} vs {exact}");
}

#[test]
fn scaling_laws_and_orthonormality() {
    let mesh = mesh_from_voxels(&block(8, 3, 2, 5.0), al()).unwrap();
    let s = rod_settings(12);
    let base = solve_free_free(&mesh, &s).unwrap();
    assert_eq!(base.n_rigid, 6);

    let heavy = HexMesh {
        material: Material { rho: 4.0 * al().rho, ..al() },
        ..mesh.clone()
    };
    let h = solve_free_free(&heavy, &s).unwrap();
    let stiff = HexMesh {
        material: Material { e: 4.0 * al().e, ..al() },
        ..mesh.clone()
    };
    let st = solve_free_free(&stiff, &s).unwrap();
    let moved = solve_free_free(&mesh.translated([100.0, -50.0, 7.0]), &s).unwrap();
    for i in 6..12 {
        let f = base.frequencies_hz[i];
        assert!((h.frequencies_hz[i] - 0.5 * f).abs() <= 1e-9 * f);
        assert!((st.frequencies_hz[i] - 2.0 * f).abs() <= 1e-9 * f);
        assert!((moved.frequencies_hz[i] - f).abs() <= 1e-9 * f);
    }
    let asm = assemble(&mesh, MassKind::Consistent);
    let mut mv = vec![0.0; mesh.n_dofs()];
    for i in 0..12 {
        asm.m.mul_vec(&base.mode_shapes[i], &mut mv);
        for j in 0..12 {
            let g: f64 = base.mode_shapes[j].iter().zip(&mv).map(|(a, b)| a * b).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((g - expect).abs() < 1e-8, "{i} {j} {g}");
        }
    }
}

#[test]
fn lumped_mass_is_close_to_consistent() {
    let mesh = mesh_from_voxels(&block(10, 2, 2, 5.0), al()).unwrap();
    let mut s = rod_settings(10);
    let c = solve_free_free(&mesh, &s).unwrap();
    s.mass = MassKind::Lumped;
    let l = solve_free_free(&mesh, &s).unwrap();
    assert_eq!(l.n_rigid, 6);
    let rel = (l.frequencies_hz[6] - c.frequencies_hz[6]).abs() / c.frequencies_hz[6];
    assert!(rel < 0.1, "{rel}");
}

#[test]
fn stiffness_relation() {
    assert!((stiffness_from(1.0 / (2.0 * std::f64::consts::PI), 1.0).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(stiffness_from(0.0, 3.0).unwrap(), 0.0);
    assert!(stiffness_from(10.0, 0.0).is_err());
    let k = stiffness_from(437.5, 12.3).unwrap();
    assert!((frequency_from(k, 12.3).unwrap() - 437.5).abs() < 1e-12 * 437.5);
}

#[test]
fn axial_fraction_of_test_vectors() {
    let mesh = mesh_from_voxels(&disc(4, 1, 5.0), al()).unwrap();
    let masses = nodal_masses(&mesh);
    let n = mesh.n_dofs();
    let axial: Vec<f64> = (0..n).map(|i| if i % 3 == 2 { 1.0 } else { 0.0 }).collect();
    assert_eq!(axial_fraction(&mesh, &masses, &axial, 1e9), 1.0);
    let radial: Vec<f64> = (0..n)
        .map(|i| {
            let p = mesh.nodes[i / 3];
            match i % 3 {
                0 => p[0],
                1 => p[1],
                _ => 0.0,
            }
        })
        .collect();
    assert_eq!(axial_fraction(&mesh, &masses, &radial, 1e9), 0.0);
    assert_eq!(pick_lateral(&[0.0, 0.0, 0.3, 0.9, 0.5], 2), 3);
    let ambiguous: Vec<f64> = (0..15).map(|i| if i == 7 || i == 12 { 0.9 } else { 0.1 }).collect();
    assert_eq!(pick_lateral(&ambiguous, 6), 10);
}

#[test]
fn reference_wheel_modes() {
    use crate::contour::{extract_contours, ContourConfig};
    use crate::designspace::{synth_reference, ReferenceParams};
    use crate::solid::{build_wheel, CrossSection, WheelBuildSpec};
    let img = synth_reference(&ReferenceParams::default(), 64, "ref").unwrap();
    let (sketch, _) = extract_contours(&img, &ContourConfig::default()).unwrap();
    let spec = WheelBuildSpec {
        voxel_pitch_mm: 6.0,
        ..WheelBuildSpec::default()
    };
    let (solid, _) = build_wheel(&sketch, &CrossSection::default_spoke(), &CrossSection::default_rim(), &spec).unwrap();
    let res = analyze_solid(&solid, al(), &ModalSettings::default()).unwrap();
    assert_eq!(res.n_rigid, 6);
    assert!(res.frequencies_hz.windows(2).all(|w| w[0] <= w[1]));
    assert!(res.axial_fractions[res.lateral_index] > 0.9);
    assert!(res.lateral_frequency_hz > 300.0 && res.lateral_frequency_hz < 5000.0);
    let k = stiffness_from(res.lateral_frequency_hz, res.mass_kg).unwrap();
    assert!(k > 0.0);
}
