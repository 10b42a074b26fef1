use serde::{Deserialize, Serialize};

use super::section::CrossSection;
use super::voxel::{label_components, VoxelGrid, VoxelSolid};
use crate::contour::{point_in_polygon, ContourSet, Point};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WheelBuildSpec {
    pub rim_diameter_mm: f64,
    /// Rim width as a J code, e.g. `"7.5j"` (inches).
    pub rim_width_code: String,
    pub hub_radius_mm: f64,
    pub lug_circle_radius_mm: f64,
    pub lug_hole_radius_mm: f64,
    pub n_lugs: usize,
    pub voxel_pitch_mm: f64,
}

impl Default for WheelBuildSpec {
    fn default() -> Self {
        Self {
            rim_diameter_mm: 457.2,
            rim_width_code: "7.5j".into(),
            hub_radius_mm: 75.0,
            lug_circle_radius_mm: 57.15,
            lug_hole_radius_mm: 7.0,
            n_lugs: 5,
            voxel_pitch_mm: 4.0,
        }
    }
}

pub const MAX_PITCH_MM: f64 = 6.0;

impl WheelBuildSpec {
    pub fn rim_width_mm(&self) -> Result<f64> {
        let code = self.rim_width_code.trim().to_ascii_lowercase();
        let num = code
            .strip_suffix('j')
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|w| *w > 0.0)
            .ok_or_else(|| Error::validation(format!("rim width code {:?} is not of the form <inches>j", self.rim_width_code)))?;
        Ok(num * 25.4)
    }

    pub fn validate(&self) -> Result<()> {
        self.rim_width_mm()?;
        if !(self.voxel_pitch_mm > 0.0 && self.voxel_pitch_mm <= MAX_PITCH_MM) {
            return Err(Error::validation(format!(
                "voxel pitch must be in (0, {MAX_PITCH_MM}] mm, got {}",
                self.voxel_pitch_mm
            )));
        }
        if !(self.rim_diameter_mm > 0.0) || self.n_lugs == 0 {
            return Err(Error::validation("rim diameter must be positive and n_lugs at least 1"));
        }
        if !(self.lug_hole_radius_mm >= 0.0) || self.lug_circle_radius_mm + self.lug_hole_radius_mm >= self.hub_radius_mm {
            return Err(Error::validation("lug holes must lie inside the hub radius"));
        }
        Ok(())
    }

    /// Lattice covering the wheel envelope.
    pub fn grid(&self) -> Result<VoxelGrid> {
        self.validate()?;
        Ok(VoxelGrid::cylinder(self.rim_diameter_mm / 2.0, 0.0, self.rim_width_mm()?, self.voxel_pitch_mm))
    }
}

/// Voxels whose centre `(r, z)` lies inside the profile.
pub fn revolve_profile(cs: &CrossSection, grid: &VoxelGrid) -> VoxelSolid {
    let mut s = VoxelSolid::empty(grid.clone());
    let Some((lo, hi)) = cs.bounds() else {
        return s;
    };
    let [nx, ny, nz] = grid.dims;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = grid.center(i, j, k);
                let r = c[0].hypot(c[1]);
                if r < lo[0] || r > hi[0] || c[2] < lo[1] || c[2] > hi[1] {
                    continue;
                }
                if cs.contains(r, c[2]) {
                    s.occupied[grid.index(i, j, k)] = true;
                }
            }
        }
    }
    s
}

/// Closed uniform Catmull-Rom curve through `ctrl` (closing duplicate ignored),
/// sampled at `per_segment` points per control segment.
pub fn catmull_rom_closed(ctrl: &[Point], per_segment: usize) -> Vec<Point> {
    let mut p = ctrl;
    if p.len() > 1 && p.first() == p.last() {
        p = &p[..p.len() - 1];
    }
    let m = p.len();
    if m < 3 {
        return p.to_vec();
    }
    let mut out = Vec::with_capacity(m * per_segment);
    for i in 0..m {
        let (p0, p1, p2, p3) = (p[(i + m - 1) % m], p[i], p[(i + 1) % m], p[(i + 2) % m]);
        for s in 0..per_segment {
            let t = s as f64 / per_segment as f64;
            let (t2, t3) = (t * t, t * t * t);
            let f = |a: f64, b: f64, c: f64, d: f64| {
                0.5 * (2.0 * b + (c - a) * t + (2.0 * a - 5.0 * b + 4.0 * c - d) * t2 + (3.0 * b - a - 3.0 * c + d) * t3)
            };
            out.push([f(p0[0], p1[0], p2[0], p3[0]), f(p0[1], p1[1], p2[1], p3[1])]);
        }
    }
    out
}

/// Clears, through the full height, every voxel column inside a closed curve.
pub fn extrude_cut(solid: &mut VoxelSolid, sketch: &ContourSet) -> usize {
    let curves: Vec<(Vec<Point>, [f64; 4])> = sketch
        .groups
        .iter()
        .filter(|g| g.closed)
        .map(|g| {
            let c = catmull_rom_closed(&g.points, 4);
            let bb = c.iter().fold([f64::MAX, f64::MAX, f64::MIN, f64::MIN], |b, p| {
                [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])]
            });
            (c, bb)
        })
        .collect();
    if curves.is_empty() {
        return 0;
    }
    let g = solid.grid.clone();
    let mut removed = 0;
    for j in 0..g.dims[1] {
        for i in 0..g.dims[0] {
            let c = g.center(i, j, 0);
            let q = [c[0], c[1]];
            let hit = curves.iter().any(|(poly, bb)| {
                q[0] >= bb[0] && q[0] <= bb[2] && q[1] >= bb[1] && q[1] <= bb[3] && point_in_polygon(q, poly)
            });
            if hit {
                for k in 0..g.dims[2] {
                    let idx = g.index(i, j, k);
                    if solid.occupied[idx] {
                        solid.occupied[idx] = false;
                        removed += 1;
                    }
                }
            }
        }
    }
    removed
}

/// Lug hole centres at `k * 360° / n_lugs`, starting on the +y axis.
pub fn lug_centres(spec: &WheelBuildSpec) -> Vec<[f64; 2]> {
    (0..spec.n_lugs)
        .map(|k| {
            let a = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::TAU / spec.n_lugs as f64;
            [spec.lug_circle_radius_mm * a.cos(), spec.lug_circle_radius_mm * a.sin()]
        })
        .collect()
}

pub fn drill_lug_holes(solid: &mut VoxelSolid, spec: &WheelBuildSpec) -> usize {
    let centres = lug_centres(spec);
    let r2 = spec.lug_hole_radius_mm * spec.lug_hole_radius_mm;
    if r2 == 0.0 {
        return 0;
    }
    solid.clear_where(|c| centres.iter().any(|h| (c[0] - h[0]).powi(2) + (c[1] - h[1]).powi(2) <= r2))
}

/// Union with the revolved rim. Returns the number of connected components of the result.
pub fn add_rim(solid: &mut VoxelSolid, rim: &CrossSection) -> usize {
    let r = revolve_profile(rim, &solid.grid);
    for (a, b) in solid.occupied.iter_mut().zip(&r.occupied) {
        *a |= *b;
    }
    label_components(&solid.grid, &solid.occupied).1
}

/// Mass in kg for a density given in tonne/mm³.
pub fn mass(solid: &VoxelSolid, density: f64) -> f64 {
    solid.count() as f64 * solid.grid.pitch.powi(3) * density * 1000.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub pitch_mm: f64,
    pub volume_spoke_mm3: f64,
    pub volume_after_cut_mm3: f64,
    pub volume_after_drill_mm3: f64,
    pub volume_final_mm3: f64,
    pub voxels: usize,
    pub components: usize,
    pub connected: bool,
    pub warnings: Vec<String>,
}

/// Revolve spoke, cut the sketch, drill the lugs, join the rim.
pub fn build_wheel(
    sketch: &ContourSet,
    spoke: &CrossSection,
    rim: &CrossSection,
    spec: &WheelBuildSpec,
) -> Result<(VoxelSolid, BuildReport)> {
    let grid = spec.grid()?;
    let mut solid = revolve_profile(spoke, &grid);
    let volume_spoke_mm3 = solid.volume();
    extrude_cut(&mut solid, sketch);
    let volume_after_cut_mm3 = solid.volume();
    drill_lug_holes(&mut solid, spec);
    let volume_after_drill_mm3 = solid.volume();
    let components = add_rim(&mut solid, rim);
    let mut warnings = Vec::new();
    if components != 1 {
        warnings.push(format!("wheel solid has {components} connected components"));
    }
    let report = BuildReport {
        pitch_mm: grid.pitch,
        volume_spoke_mm3,
        volume_after_cut_mm3,
        volume_after_drill_mm3,
        volume_final_mm3: solid.volume(),
        voxels: solid.count(),
        components,
        connected: components == 1,
        warnings,
    };
    Ok((solid, report))
}
