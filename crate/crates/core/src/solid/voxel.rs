use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Regular voxel lattice; voxel `(i, j, k)` has centre `origin + (idx + 0.5) * pitch`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    pub pitch: f64,
    pub origin: [f64; 3],
}

impl VoxelGrid {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.pitch,
            self.origin[1] + (j as f64 + 0.5) * self.pitch,
            self.origin[2] + (k as f64 + 0.5) * self.pitch,
        ]
    }

    /// Grid centred on the z axis covering radius `r_max` and `z ∈ [z0, z1]`.
    pub fn cylinder(r_max: f64, z0: f64, z1: f64, pitch: f64) -> Self {
        let n = (2.0 * r_max / pitch).ceil() as usize;
        let nz = ((z1 - z0) / pitch).ceil() as usize;
        let half = n as f64 * pitch / 2.0;
        Self {
            dims: [n, n, nz],
            pitch,
            origin: [-half, -half, z0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelSolid {
    pub grid: VoxelGrid,
    pub occupied: Vec<bool>,
}

impl VoxelSolid {
    pub fn empty(grid: VoxelGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            occupied: vec![false; n],
        }
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.grid.pitch.powi(3)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupied[self.grid.index(i, j, k)]
    }

    /// Occupancy with out-of-grid treated as empty.
    pub fn get_signed(&self, i: isize, j: isize, k: isize) -> bool {
        let d = self.grid.dims;
        if i < 0 || j < 0 || k < 0 || i >= d[0] as isize || j >= d[1] as isize || k >= d[2] as isize {
            return false;
        }
        self.get(i as usize, j as usize, k as usize)
    }

    /// Clears every voxel whose centre satisfies `pred`; returns how many were removed.
    pub fn clear_where(&mut self, mut pred: impl FnMut([f64; 3]) -> bool) -> usize {
        let mut removed = 0;
        for idx in 0..self.occupied.len() {
            if self.occupied[idx] {
                let [i, j, k] = self.grid.coords(idx);
                if pred(self.grid.center(i, j, k)) {
                    self.occupied[idx] = false;
                    removed += 1;
                }
            }
        }
        removed
    }

    /// 6-connected component labels (`u32::MAX` for empty voxels) and the count.
    pub fn components(&self) -> (Vec<u32>, usize) {
        label_components(&self.grid, &self.occupied)
    }
}

pub fn label_components(grid: &VoxelGrid, mask: &[bool]) -> (Vec<u32>, usize) {
    let mut label = vec![u32::MAX; mask.len()];
    let d = grid.dims;
    let mut n = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] != u32::MAX {
            continue;
        }
        label[start] = n;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let [i, j, k] = grid.coords(idx);
            let mut visit = |ii: usize, jj: usize, kk: usize| {
                let m = grid.index(ii, jj, kk);
                if mask[m] && label[m] == u32::MAX {
                    label[m] = n;
                    queue.push_back(m);
                }
            };
            if i > 0 {
                visit(i - 1, j, k);
            }
            if i + 1 < d[0] {
                visit(i + 1, j, k);
            }
            if j > 0 {
                visit(i, j - 1, k);
            }
            if j + 1 < d[1] {
                visit(i, j + 1, k);
            }
            if k > 0 {
                visit(i, j, k - 1);
            }
            if k + 1 < d[2] {
                visit(i, j, k + 1);
            }
        }
        n += 1;
    }
    (label, n as usize)
}
