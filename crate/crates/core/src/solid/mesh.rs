use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::voxel::VoxelSolid;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub watertight: bool,
}

// Face corners (unit cube offsets) ordered counter-clockwise seen from outside.
const FACES: [([isize; 3], [[usize; 3]; 4]); 6] = [
    ([-1, 0, 0], [[0, 0, 0], [0, 0, 1], [0, 1, 1], [0, 1, 0]]),
    ([1, 0, 0], [[1, 0, 0], [1, 1, 0], [1, 1, 1], [1, 0, 1]]),
    ([0, -1, 0], [[0, 0, 0], [1, 0, 0], [1, 0, 1], [0, 0, 1]]),
    ([0, 1, 0], [[0, 1, 0], [0, 1, 1], [1, 1, 1], [1, 1, 0]]),
    ([0, 0, -1], [[0, 0, 0], [0, 1, 0], [1, 1, 0], [1, 0, 0]]),
    ([0, 0, 1], [[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]),
];

/// Triangulates the boundary faces of the occupancy grid.
pub fn export_mesh(solid: &VoxelSolid) -> Result<TriMesh> {
    if solid.count() == 0 {
        return Err(Error::validation("cannot mesh an empty solid"));
    }
    let g = &solid.grid;
    let mut index: HashMap<[usize; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vid = |c: [usize; 3], vertices: &mut Vec<[f64; 3]>| -> u32 {
        *index.entry(c).or_insert_with(|| {
            vertices.push([
                g.origin[0] + c[0] as f64 * g.pitch,
                g.origin[1] + c[1] as f64 * g.pitch,
                g.origin[2] + c[2] as f64 * g.pitch,
            ]);
            (vertices.len() - 1) as u32
        })
    };
    for idx in 0..solid.occupied.len() {
        if !solid.occupied[idx] {
            continue;
        }
        let [i, j, k] = g.coords(idx);
        for (n, corners) in FACES.iter() {
            if solid.get_signed(i as isize + n[0], j as isize + n[1], k as isize + n[2]) {
                continue;
            }
            let v = corners.map(|o| vid([i + o[0], j + o[1], k + o[2]], &mut vertices));
            triangles.push([v[0], v[1], v[2]]);
            triangles.push([v[0], v[2], v[3]]);
        }
    }
    // Closed and consistently oriented iff every directed edge has its reverse.
    let mut directed: HashMap<(u32, u32), i64> = HashMap::new();
    for t in &triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            *directed.entry((a, b)).or_default() += 1;
        }
    }
    let watertight = directed
        .iter()
        .all(|(&(a, b), &c)| directed.get(&(b, a)).copied().unwrap_or(0) == c);
    Ok(TriMesh {
        vertices,
        triangles,
        watertight,
    })
}

impl TriMesh {
    pub fn surface_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let x = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
                0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
            })
            .sum()
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = HashSet::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn to_stl_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(84 + 50 * self.triangles.len());
        let mut header = [0u8; 80];
        let tag = b"wheelforge voxel mesh, units mm";
        header[..tag.len()].copy_from_slice(tag);
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.triangles.len() as u32).to_le_bytes());
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i as usize]);
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt().max(f64::MIN_POSITIVE);
            for x in n.iter().map(|x| x / len).chain(a).chain(b).chain(c) {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
            out.extend_from_slice(&0u16.to_le_bytes());
        }
        out
    }

    pub fn write_stl(&self, path: &Path) -> Result<()> {
        crate::util::write_atomic(path, &self.to_stl_bytes())
    }
}
