use super::mesh::HexMesh;

/// Nodal (lumped) masses: each element gives an eighth of its mass to each node.
pub fn nodal_masses(mesh: &HexMesh) -> Vec<f64> {
    let me = mesh.material.rho * mesh.pitch.powi(3) / 8.0;
    let mut m = vec![0.0; mesh.nodes.len()];
    for el in &mesh.elements {
        for &a in el {
            m[a] += me;
        }
    }
    m
}

/// Mass-weighted share of a nodal vector's energy in the axial (z) component,
/// over nodes with radius below `r_max`.
pub fn axial_fraction(mesh: &HexMesh, masses: &[f64], u: &[f64], r_max: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, p) in mesh.nodes.iter().enumerate() {
        if p[0].hypot(p[1]) >= r_max {
            continue;
        }
        let (ux, uy, uz) = (u[3 * i], u[3 * i + 1], u[3 * i + 2]);
        num += masses[i] * uz * uz;
        den += masses[i] * (ux * ux + uy * uy + uz * uz);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Picks the elastic mode with the largest axial fraction. When the two best
/// are within 5% of each other the 11th mode overall is used instead.
pub fn pick_lateral(fractions: &[f64], n_rigid: usize) -> usize {
    let mut elastic: Vec<usize> = (n_rigid..fractions.len()).collect();
    if elastic.is_empty() {
        return fractions.len().saturating_sub(1);
    }
    elastic.sort_by(|&a, &b| fractions[b].total_cmp(&fractions[a]).then(a.cmp(&b)));
    let best = elastic[0];
    if let Some(&second) = elastic.get(1) {
        let (f1, f2) = (fractions[best], fractions[second]);
        if f1 > 0.0 && (f1 - f2) / f1 < 0.05 && fractions.len() > 10 {
            return 10;
        }
    }
    best
}
