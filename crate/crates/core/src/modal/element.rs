//! Trilinear hexahedron on an axis-aligned cube.

/// Corner offsets in local node order.
pub const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Isotropic elasticity matrix in Voigt order xx, yy, zz, xy, yz, zx.
pub fn elasticity(e: f64, nu: f64) -> [[f64; 6]; 6] {
    let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let mut d = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            d[i][j] = lam;
        }
        d[i][i] = lam + 2.0 * mu;
        d[i + 3][i + 3] = mu;
    }
    d
}

fn shape_gradients(xi: [f64; 3]) -> [[f64; 3]; 8] {
    let mut g = [[0.0; 3]; 8];
    for (a, c) in CORNERS.iter().enumerate() {
        let f: [f64; 3] = std::array::from_fn(|d| if c[d] == 1 { xi[d] } else { 1.0 - xi[d] });
        let df: [f64; 3] = std::array::from_fn(|d| if c[d] == 1 { 1.0 } else { -1.0 });
        g[a] = [df[0] * f[1] * f[2], f[0] * df[1] * f[2], f[0] * f[1] * df[2]];
    }
    g
}

/// 24×24 stiffness of a cube of side `h` (2×2×2 Gauss), DOFs ordered node-major.
pub fn hex8_stiffness(e: f64, nu: f64, h: f64) -> Vec<f64> {
    let d = elasticity(e, nu);
    let gp = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let mut k = vec![0.0; 576];
    for &x in &gp {
        for &y in &gp {
            for &z in &gp {
                let g = shape_gradients([x, y, z]);
                // B is 6×24; physical gradients are g / h.
                let mut b = [[0.0; 24]; 6];
                for a in 0..8 {
                    let [gx, gy, gz] = g[a].map(|v| v / h);
                    b[0][3 * a] = gx;
                    b[1][3 * a + 1] = gy;
                    b[2][3 * a + 2] = gz;
                    b[3][3 * a] = gy;
                    b[3][3 * a + 1] = gx;
                    b[4][3 * a + 1] = gz;
                    b[4][3 * a + 2] = gy;
                    b[5][3 * a] = gz;
                    b[5][3 * a + 2] = gx;
                }
                let w = 0.125 * h * h * h;
                let mut db = [[0.0; 24]; 6];
                for i in 0..6 {
                    for j in 0..24 {
                        db[i][j] = (0..6).map(|l| d[i][l] * b[l][j]).sum();
                    }
                }
                for i in 0..24 {
                    for j in 0..24 {
                        k[i * 24 + j] += w * (0..6).map(|l| b[l][i] * db[l][j]).sum::<f64>();
                    }
                }
            }
        }
    }
    for i in 0..24 {
        for j in i + 1..24 {
            let x = 0.5 * (k[i * 24 + j] + k[j * 24 + i]);
            k[i * 24 + j] = x;
            k[j * 24 + i] = x;
        }
    }
    k
}

/// 24×24 consistent mass of a cube of side `h` and density `rho`.
pub fn hex8_mass(rho: f64, h: f64) -> Vec<f64> {
    let m = rho * h * h * h;
    let mut out = vec![0.0; 576];
    for (a, ca) in CORNERS.iter().enumerate() {
        for (b, cb) in CORNERS.iter().enumerate() {
            // Product of 1D integrals: 1/3 for equal ends, 1/6 otherwise.
            let s: f64 = (0..3).map(|d| if ca[d] == cb[d] { 1.0 / 3.0 } else { 1.0 / 6.0 }).product();
            for c in 0..3 {
                out[(3 * a + c) * 24 + 3 * b + c] = m * s;
            }
        }
    }
    out
}

/// Lumped (row-sum) mass: each node carries an eighth of the element mass.
pub fn hex8_lumped_mass(rho: f64, h: f64) -> Vec<f64> {
    let m = rho * h * h * h / 8.0;
    let mut out = vec![0.0; 576];
    for i in 0..24 {
        out[i * 24 + i] = m;
    }
    out
}
