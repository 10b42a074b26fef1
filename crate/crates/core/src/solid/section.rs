use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::point_in_polygon;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Spoke,
    Rim,
}

/// Closed `(r, z)` polyline in millimetres. An empty section is allowed and
/// revolves to an empty solid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    kind: SectionKind,
    points: Vec<[f64; 2]>,
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: [f64; 2], q: [f64; 2], r: [f64; 2], o: f64| {
        o == 0.0 && r[0] >= p[0].min(q[0]) && r[0] <= p[0].max(q[0]) && r[1] >= p[1].min(q[1]) && r[1] <= p[1].max(q[1])
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

impl CrossSection {
    pub fn new(kind: SectionKind, points: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Ok(Self { kind, points });
        }
        if points.len() < 4 || points.first() != points.last() {
            return Err(Error::validation("cross-section must be a closed polyline (first point repeated last)"));
        }
        if let Some(p) = points.iter().find(|p| !(p[0] >= 0.0) || !p[1].is_finite()) {
            return Err(Error::validation(format!("cross-section point {p:?} has negative or invalid radius")));
        }
        let n = points.len() - 1;
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_cross(points[i], points[i + 1], points[j], points[j + 1]) {
                    return Err(Error::validation(format!("cross-section self-intersects at segments {i} and {j}")));
                }
            }
        }
        Ok(Self { kind, points })
    }

    pub fn kind(&self) -> SectionKind {
        self.kind
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, r: f64, z: f64) -> bool {
        !self.points.is_empty() && point_in_polygon([r, z], &self.points)
    }

    pub fn bounds(&self) -> Option<([f64; 2], [f64; 2])> {
        let mut it = self.points.iter();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| {
            ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
        }))
    }

    /// Reads `r_mm,z_mm` records with a header row.
    pub fn read_csv(path: &Path, kind: SectionKind) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let get = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::validation(format!("bad cross-section record in {}", path.display())))
            };
            points.push([get(0)?, get(1)?]);
        }
        Self::new(kind, points)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["r_mm", "z_mm"])?;
        for p in &self.points {
            w.write_record([p[0].to_string(), p[1].to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
        crate::util::write_atomic(path, &bytes)
    }

    /// Tapered hub-and-spoke slab: hub between the bore and 75 mm, thinning
    /// towards the rim seat at 210 mm.
    pub fn default_spoke() -> Self {
        let pts = vec![
            [35.0, 110.0],
            [75.0, 110.0],
            [210.0, 150.0],
            [210.0, 178.0],
            [75.0, 178.0],
            [35.0, 178.0],
            [35.0, 110.0],
        ];
        Self::new(SectionKind::Spoke, pts).expect("default spoke section is valid")
    }

    /// 14 mm rim wall with flanges at both bead seats and a drop centre.
    pub fn default_rim() -> Self {
        let pts = vec![
            [200.0, 0.0],
            [228.6, 0.0],
            [228.6, 12.0],
            [214.0, 16.0],
            [214.0, 55.0],
            [198.0, 70.0],
            [198.0, 110.0],
            [214.0, 125.0],
            [214.0, 174.5],
            [228.6, 178.5],
            [228.6, 190.5],
            [200.0, 190.5],
            [200.0, 125.0],
            [184.0, 110.0],
            [184.0, 70.0],
            [200.0, 55.0],
            [200.0, 0.0],
        ];
        Self::new(SectionKind::Rim, pts).expect("default rim section is valid")
    }
}
