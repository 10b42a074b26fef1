//! Bilinear quadrilateral (Q4) element on a unit square, plane stress, unit thickness.

/// Element stiffness for `E = 1`, DOFs ordered `[u0x, u0y, u1x, u1y, ...]` with
/// nodes counter-clockwise from the lower-left corner.
pub fn q4_stiffness(nu: f64) -> [[f64; 8]; 8] {
    let g = 1.0 / 3f64.sqrt();
    let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let c = 1.0 / (1.0 - nu * nu);
    let d = [
        [c, c * nu, 0.0],
        [c * nu, c, 0.0],
        [0.0, 0.0, c * (1.0 - nu) / 2.0],
    ];
    let mut k = [[0.0; 8]; 8];
    for &(xi, eta) in &[(-g, -g), (g, -g), (g, g), (-g, g)] {
        // Unit square: x = (xi + 1) / 2, so d/dx = 2 d/dxi and detJ = 1/4.
        let mut b = [[0.0; 8]; 3];
        for (a, &(xa, ya)) in corners.iter().enumerate() {
            let dx = 2.0 * 0.25 * xa * (1.0 + eta * ya);
            let dy = 2.0 * 0.25 * ya * (1.0 + xi * xa);
            b[0][2 * a] = dx;
            b[1][2 * a + 1] = dy;
            b[2][2 * a] = dy;
            b[2][2 * a + 1] = dx;
        }
        let mut db = [[0.0; 8]; 3];
        for r in 0..3 {
            for j in 0..8 {
                db[r][j] = (0..3).map(|s| d[r][s] * b[s][j]).sum();
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                k[i][j] += 0.25 * (0..3).map(|r| b[r][i] * db[r][j]).sum::<f64>();
            }
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    // Closed-form Q4 matrix from the classical 88-line SIMP code.
    fn closed_form(nu: f64) -> [[f64; 8]; 8] {
        let k = [
            0.5 - nu / 6.0,
            0.125 + nu / 8.0,
            -0.25 - nu / 12.0,
            -0.125 + 3.0 * nu / 8.0,
            -0.25 + nu / 12.0,
            -0.125 - nu / 8.0,
            nu / 6.0,
            0.125 - 3.0 * nu / 8.0,
        ];
        let idx = [
            [0, 1, 2, 3, 4, 5, 6, 7],
            [1, 0, 7, 6, 5, 4, 3, 2],
            [2, 7, 0, 5, 6, 3, 4, 1],
            [3, 6, 5, 0, 7, 2, 1, 4],
            [4, 5, 6, 7, 0, 1, 2, 3],
            [5, 4, 3, 2, 1, 0, 7, 6],
            [6, 3, 4, 1, 2, 7, 0, 5],
            [7, 2, 1, 4, 3, 6, 5, 0],
        ];
        let s = 1.0 / (1.0 - nu * nu);
        let mut out = [[0.0; 8]; 8];
        for i in 0..8 {
            for j in 0..8 {
                out[i][j] = s * k[idx[i][j]];
            }
        }
        out
    }

    #[test]
    fn matches_closed_form() {
        let a = q4_stiffness(0.3);
        let b = closed_form(0.3);
        for i in 0..8 {
            for j in 0..8 {
                assert!((a[i][j] - b[i][j]).abs() < 1e-12, "{i},{j}");
            }
        }
    }

    #[test]
    fn rigid_translation_is_in_nullspace() {
        let k = q4_stiffness(0.3);
        for row in &k {
            let fx: f64 = (0..4).map(|a| row[2 * a]).sum();
            let fy: f64 = (0..4).map(|a| row[2 * a + 1]).sum();
            assert!(fx.abs() < 1e-12 && fy.abs() < 1e-12);
        }
    }
}
