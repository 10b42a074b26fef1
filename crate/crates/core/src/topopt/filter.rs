/// Linear cone density filter on a rectangular element grid.
#[derive(Clone, Debug)]
pub struct DensityFilter {
    /// Normalized weights per element: `(neighbour, w / Σw)`.
    rows: Vec<Vec<(u32, f64)>>,
}

impl DensityFilter {
    pub fn new(nelx: usize, nely: usize, r_min: f64) -> Self {
        let reach = r_min.ceil() as isize;
        let mut rows = Vec::with_capacity(nelx * nely);
        for ey in 0..nely as isize {
            for ex in 0..nelx as isize {
                let mut row = Vec::new();
                let mut sum = 0.0;
                for dy in -reach..=reach {
                    for dx in -reach..=reach {
                        let (x, y) = (ex + dx, ey + dy);
                        if x < 0 || y < 0 || x >= nelx as isize || y >= nely as isize {
                            continue;
                        }
                        let w = r_min - ((dx * dx + dy * dy) as f64).sqrt();
                        if w > 0.0 {
                            row.push(((y as usize * nelx + x as usize) as u32, w));
                            sum += w;
                        }
                    }
                }
                for entry in &mut row {
                    entry.1 /= sum;
                }
                rows.push(row);
            }
        }
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j as usize]).sum())
            .collect()
    }

    /// Transposed application, used to pull sensitivities back to raw densities.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len()];
        for (row, &gi) in self.rows.iter().zip(g) {
            for &(j, w) in row {
                out[j as usize] += w * gi;
            }
        }
        out
    }
}

/// Threshold projection with `η` as the threshold and `β` as the sharpness.
pub fn project(x: f64, beta: f64, eta: f64) -> f64 {
    let a = (beta * eta).tanh();
    (a + (beta * (x - eta)).tanh()) / (a + (beta * (1.0 - eta)).tanh())
}

pub fn project_derivative(x: f64, beta: f64, eta: f64) -> f64 {
    let a = (beta * eta).tanh();
    let t = (beta * (x - eta)).tanh();
    beta * (1.0 - t * t) / (a + (beta * (1.0 - eta)).tanh())
}
