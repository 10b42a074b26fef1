use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointGroup {
    pub points: Vec<Point>,
    pub closed: bool,
}

fn dist2(a: Point, b: Point) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

/// Greedy nearest-neighbour ordering. Starts from the first point, repeatedly
/// moves to the closest remaining point (lowest input index on ties) and starts
/// a new group whenever that jump is at least `threshold`.
pub fn sort_and_group(points: &[Point], threshold: f64) -> Vec<PointGroup> {
    if points.is_empty() {
        return Vec::new();
    }
    let cell = threshold.max(1.0);
    let (mut minx, mut miny, mut maxx, mut maxy) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in points {
        minx = minx.min(p[0]);
        miny = miny.min(p[1]);
        maxx = maxx.max(p[0]);
        maxy = maxy.max(p[1]);
    }
    let gw = ((maxx - minx) / cell).floor() as usize + 1;
    let gh = ((maxy - miny) / cell).floor() as usize + 1;
    let cell_of = |p: Point| {
        let cx = (((p[0] - minx) / cell).floor() as usize).min(gw - 1);
        let cy = (((p[1] - miny) / cell).floor() as usize).min(gh - 1);
        (cx, cy)
    };
    // Each bucket holds remaining indices in ascending order.
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); gw * gh];
    for (i, &p) in points.iter().enumerate() {
        let (cx, cy) = cell_of(p);
        grid[cy * gw + cx].push(i);
    }
    let remove = |grid: &mut Vec<Vec<usize>>, i: usize| {
        let (cx, cy) = cell_of(points[i]);
        let b = &mut grid[cy * gw + cx];
        let pos = b.binary_search(&i).expect("point is in its bucket");
        b.remove(pos);
    };

    let mut groups = Vec::new();
    let mut current = vec![points[0]];
    remove(&mut grid, 0);
    let mut cur = 0;
    let t2 = threshold * threshold;
    for _ in 1..points.len() {
        let p = points[cur];
        let (cx, cy) = cell_of(p);
        let mut best: Option<(f64, usize)> = None;
        let max_ring = gw.max(gh);
        for ring in 0..=max_ring {
            if let Some((d, _)) = best {
                // Cells in this ring are at least (ring - 1) * cell away.
                let lb = (ring as f64 - 1.0) * cell;
                if ring > 0 && lb > 0.0 && d < lb * lb {
                    break;
                }
            }
            let r = ring as isize;
            for dy in -r..=r {
                let y = cy as isize + dy;
                if y < 0 || y >= gh as isize {
                    continue;
                }
                let step = if dy.abs() == r { 1 } else { (2 * r).max(1) as usize };
                let mut dx = -r;
                while dx <= r {
                    let x = cx as isize + dx;
                    if x >= 0 && x < gw as isize {
                        for &j in &grid[y as usize * gw + x as usize] {
                            let d = dist2(p, points[j]);
                            let better = match best {
                                None => true,
                                Some((bd, bj)) => d < bd || (d == bd && j < bj),
                            };
                            if better {
                                best = Some((d, j));
                            }
                        }
                    }
                    dx += step as isize;
                }
            }
        }
        let (d, j) = best.expect("points remain");
        remove(&mut grid, j);
        if d >= t2 {
            groups.push(PointGroup {
                points: std::mem::take(&mut current),
                closed: false,
            });
        }
        current.push(points[j]);
        cur = j;
    }
    groups.push(PointGroup {
        points: current,
        closed: false,
    });
    groups
}

/// Keeps every k-th point by group size; groups of 3 or fewer points are noise.
pub fn decimate(group: &PointGroup) -> Option<PointGroup> {
    let n = group.points.len();
    let step = match n {
        0..=3 => return None,
        4..=19 => 1,
        20..=99 => 6,
        _ => 12,
    };
    Some(PointGroup {
        points: group.points.iter().step_by(step).copied().collect(),
        closed: group.closed,
    })
}

/// Centroid of all points of all groups.
pub fn centroid(groups: &[PointGroup]) -> Point {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for g in groups {
        for p in &g.points {
            sx += p[0];
            sy += p[1];
            n += 1;
        }
    }
    if n == 0 {
        [0.0, 0.0]
    } else {
        [sx / n as f64, sy / n as f64]
    }
}

/// Subtracts the joint centroid, scales by `scale * mm_per_px` and flips y so
/// the result is in a y-up frame.
pub fn center_and_scale(groups: &mut [PointGroup], scale: f64, mm_per_px: f64) {
    let c = centroid(groups);
    let k = scale * mm_per_px;
    for g in groups.iter_mut() {
        for p in &mut g.points {
            *p = [(p[0] - c[0]) * k, -(p[1] - c[1]) * k];
        }
    }
}

fn distinct(points: &[Point]) -> usize {
    let mut v: Vec<(u64, u64)> = points.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Closes each group by repeating its first point. Groups with fewer than three
/// distinct points cannot bound an area and are dropped.
pub fn close_curves(groups: Vec<PointGroup>) -> Vec<PointGroup> {
    groups
        .into_iter()
        .filter(|g| distinct(&g.points) >= 3)
        .map(|mut g| {
            if g.points.first() != g.points.last() {
                let first = g.points[0];
                g.points.push(first);
            }
            g.closed = true;
            g
        })
        .collect()
}

/// Shoelace area of a polygon, ignoring a repeated closing vertex.
pub fn enclosed_area(points: &[Point]) -> f64 {
    let mut p = points;
    if p.len() > 1 && p.first() == p.last() {
        p = &p[..p.len() - 1];
    }
    super::antialias::polygon_area(p).abs()
}

/// Even-odd point-in-polygon test; a repeated closing vertex is harmless.
pub fn point_in_polygon(q: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > q[1]) != (b[1] > q[1]) {
            let x = a[0] + (q[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if q[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
