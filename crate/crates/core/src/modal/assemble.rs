use rayon::prelude::*;

use super::element::{hex8_lumped_mass, hex8_mass, hex8_stiffness};
use super::mesh::HexMesh;
use crate::error::Result;
use crate::linalg::{CholeskyPattern, CsrMatrix};

/// Stiffness and mass on a shared symmetric CSR pattern (both triangles stored).
#[derive(Clone, Debug)]
pub struct Assembled {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassKind {
    #[default]
    Consistent,
    Lumped,
}

fn pattern(mesh: &HexMesh) -> (Vec<usize>, Vec<usize>) {
    let nn = mesh.nodes.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nn];
    for el in &mesh.elements {
        for &a in el {
            adj[a].extend_from_slice(el);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let n = 3 * nn;
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for a in &adj {
        for _ in 0..3 {
            for &b in a {
                col_idx.extend_from_slice(&[3 * b, 3 * b + 1, 3 * b + 2]);
            }
            row_ptr.push(col_idx.len());
        }
    }
    (row_ptr, col_idx)
}

pub fn assemble(mesh: &HexMesh, mass: MassKind) -> Assembled {
    let (row_ptr, col_idx) = pattern(mesh);
    let n = mesh.n_dofs();
    let mat = mesh.material;
    let ke = hex8_stiffness(mat.e, mat.nu, mesh.pitch);
    let me = match mass {
        MassKind::Consistent => hex8_mass(mat.rho, mesh.pitch),
        MassKind::Lumped => hex8_lumped_mass(mat.rho, mesh.pitch),
    };
    // Per-row accumulation in element order keeps the sum order fixed, so the
    // parallel result is bitwise identical to a serial one.
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); mesh.nodes.len()];
    for (e, el) in mesh.elements.iter().enumerate() {
        for (a, &node) in el.iter().enumerate() {
            incident[node].push((e, a));
        }
    }
    let mut kv = vec![0.0; col_idx.len()];
    let mut mv = vec![0.0; col_idx.len()];
    let node_span = |node: usize| row_ptr[3 * node]..row_ptr[3 * node + 3];
    let mut chunks_k: Vec<&mut [f64]> = Vec::with_capacity(mesh.nodes.len());
    let mut chunks_m: Vec<&mut [f64]> = Vec::with_capacity(mesh.nodes.len());
    {
        let (mut rk, mut rm) = (&mut kv[..], &mut mv[..]);
        for node in 0..mesh.nodes.len() {
            let len = node_span(node).len();
            let (a, b) = rk.split_at_mut(len);
            let (c, d) = rm.split_at_mut(len);
            chunks_k.push(a);
            chunks_m.push(c);
            rk = b;
            rm = d;
        }
    }
    chunks_k
        .into_par_iter()
        .zip(chunks_m)
        .enumerate()
        .for_each(|(node, (ck, cm))| {
            let base = row_ptr[3 * node];
            for &(e, a) in &incident[node] {
                let el = &mesh.elements[e];
                for c in 0..3 {
                    let r = 3 * node + c;
                    let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
                    let li = 3 * a + c;
                    for (b, &nb) in el.iter().enumerate() {
                        let start = cols.partition_point(|&x| x < 3 * nb);
                        for d in 0..3 {
                            let lj = 3 * b + d;
                            let pos = row_ptr[r] - base + start + d;
                            ck[pos] += ke[li * 24 + lj];
                            cm[pos] += me[li * 24 + lj];
                        }
                    }
                }
            }
        });
    let k = CsrMatrix {
        n,
        row_ptr: row_ptr.clone(),
        col_idx: col_idx.clone(),
        values: kv,
    };
    let m = CsrMatrix {
        n,
        row_ptr,
        col_idx,
        values: mv,
    };
    Assembled { k, m }
}

/// Lower-triangle CSC pattern of a symmetric CSR matrix and the positions of
/// its entries in the CSR value array.
pub fn lower_pattern(a: &CsrMatrix) -> Result<(CholeskyPattern, Vec<usize>)> {
    // Column c of the lower triangle equals row c restricted to col >= c.
    let mut col_ptr = vec![0];
    let mut row_idx = Vec::new();
    let mut src = Vec::new();
    for r in 0..a.n {
        for p in a.row_ptr[r]..a.row_ptr[r + 1] {
            if a.col_idx[p] >= r {
                row_idx.push(a.col_idx[p]);
                src.push(p);
            }
        }
        col_ptr.push(row_idx.len());
    }
    Ok((CholeskyPattern::from_lower_csc(a.n, col_ptr, row_idx)?, src))
}
