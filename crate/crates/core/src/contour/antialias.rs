//! Pixel → polygon → pixel resampling: marching squares at the 0.5 level, corner
//! restoration on straight runs, and even-odd polygon fill with supersampling.

use std::collections::HashMap;

use super::raster::Raster;
use crate::error::{Error, Result};

type Pt = [f64; 2];

const SUB: usize = 4;

/// Iso-0.5 contour loops of `img` (zero outside), in continuous pixel
/// coordinates where pixel `(i, j)` covers `[i, i+1] × [j, j+1]`.
pub fn iso_loops(img: &Raster) -> Vec<Vec<Pt>> {
    let segs = marching_squares(img);
    let loops = link(&segs);
    loops.into_iter().map(|l| sharpen(merge_collinear(l))).collect()
}

fn inside(v: f64) -> bool {
    v >= 0.5
}

/// Crossing point on the edge between two sample points, computed from the
/// canonically ordered pair so both adjacent cells get identical bits.
fn crossing(a: (isize, isize), va: f64, b: (isize, isize), vb: f64) -> Pt {
    let ((p, vp), (q, vq)) = if a <= b { ((a, va), (b, vb)) } else { ((b, vb), (a, va)) };
    let t = if vq != vp { (0.5 - vp) / (vq - vp) } else { 0.5 };
    [
        p.0 as f64 + 0.5 + t * (q.0 - p.0) as f64,
        p.1 as f64 + 0.5 + t * (q.1 - p.1) as f64,
    ]
}

fn marching_squares(img: &Raster) -> Vec<(Pt, Pt)> {
    let mut segs = Vec::new();
    let (w, h) = (img.width as isize, img.height as isize);
    // Cell (cx, cy) has sample corners at pixel centres cx..cx+1, cy..cy+1.
    for cy in -1..h {
        for cx in -1..w {
            let c = [(cx, cy), (cx + 1, cy), (cx + 1, cy + 1), (cx, cy + 1)];
            let v = c.map(|(x, y)| img.get_or_zero(x, y));
            let code = v.iter().enumerate().fold(0u8, |acc, (i, &vv)| acc | ((inside(vv) as u8) << i));
            if code == 0 || code == 15 {
                continue;
            }
            let e = |i: usize| {
                let j = (i + 1) % 4;
                crossing(c[i], v[i], c[j], v[j])
            };
            // Edges: 0 top (c0-c1), 1 right (c1-c2), 2 bottom (c2-c3), 3 left (c3-c0).
            // Segments are oriented with the inside on the left in a y-down frame.
            let center = v.iter().sum::<f64>() / 4.0;
            let pairs: &[(usize, usize)] = match code {
                1 => &[(0, 3)],
                2 => &[(1, 0)],
                3 => &[(1, 3)],
                4 => &[(2, 1)],
                5 => {
                    if inside(center) {
                        &[(2, 3), (0, 1)]
                    } else {
                        &[(0, 3), (2, 1)]
                    }
                }
                6 => &[(2, 0)],
                7 => &[(2, 3)],
                8 => &[(3, 2)],
                9 => &[(0, 2)],
                10 => {
                    if inside(center) {
                        &[(3, 0), (1, 2)]
                    } else {
                        &[(1, 0), (3, 2)]
                    }
                }
                11 => &[(1, 2)],
                12 => &[(3, 1)],
                13 => &[(0, 1)],
                14 => &[(3, 0)],
                _ => unreachable!(),
            };
            for &(a, b) in pairs {
                segs.push((e(a), e(b)));
            }
        }
    }
    segs
}

fn key(p: Pt) -> (u64, u64) {
    (p[0].to_bits(), p[1].to_bits())
}

/// Chains oriented segments into closed loops.
fn link(segs: &[(Pt, Pt)]) -> Vec<Vec<Pt>> {
    let mut by_start: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, s) in segs.iter().enumerate() {
        by_start.entry(key(s.0)).or_default().push(i);
    }
    let mut used = vec![false; segs.len()];
    let mut loops = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        let mut l = Vec::new();
        let mut cur = start;
        loop {
            used[cur] = true;
            l.push(segs[cur].0);
            let next = by_start
                .get(&key(segs[cur].1))
                .and_then(|c| c.iter().copied().find(|&i| !used[i]));
            match next {
                Some(n) => cur = n,
                None => break,
            }
        }
        if l.len() >= 3 {
            loops.push(l);
        }
    }
    loops
}

fn merge_collinear(l: Vec<Pt>) -> Vec<Pt> {
    let n = l.len();
    if n < 4 {
        return l;
    }
    let keep: Vec<Pt> = (0..n)
        .filter(|&i| {
            let a = l[(i + n - 1) % n];
            let b = l[i];
            let c = l[(i + 1) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            cross.abs() > 1e-12
        })
        .map(|i| l[i])
        .collect();
    if keep.len() >= 3 {
        keep
    } else {
        l
    }
}

fn axis_len(a: Pt, b: Pt) -> Option<(bool, f64)> {
    if a[1] == b[1] {
        Some((true, (b[0] - a[0]).abs()))
    } else if a[0] == b[0] {
        Some((false, (b[1] - a[1]).abs()))
    } else {
        None
    }
}

/// Replaces half-pixel diagonal chamfers between two perpendicular straight runs
/// of at least two pixels with the sharp corner they cut off.
fn sharpen(l: Vec<Pt>) -> Vec<Pt> {
    let n = l.len();
    if n < 4 {
        return l;
    }
    let mut out: Vec<Pt> = Vec::with_capacity(n);
    let mut skip = vec![false; n];
    let mut corner: Vec<Option<Pt>> = vec![None; n];
    for i in 0..n {
        let (p0, p1, p2, p3) = (l[(i + n - 1) % n], l[i], l[(i + 1) % n], l[(i + 2) % n]);
        let diag = ((p2[0] - p1[0]).abs() - 0.5).abs() < 1e-12 && ((p2[1] - p1[1]).abs() - 0.5).abs() < 1e-12;
        if !diag {
            continue;
        }
        if let (Some((h0, len0)), Some((h1, len1))) = (axis_len(p0, p1), axis_len(p2, p3)) {
            if h0 != h1 && len0 >= 2.0 && len1 >= 2.0 && !skip[i] && !skip[(i + 1) % n] && corner[(i + 1) % n].is_none() {
                let c = if h0 { [p2[0], p1[1]] } else { [p1[0], p2[1]] };
                corner[i] = Some(c);
                skip[(i + 1) % n] = true;
            }
        }
    }
    for i in 0..n {
        if skip[i] && corner[i].is_none() {
            continue;
        }
        out.push(corner[i].unwrap_or(l[i]));
    }
    merge_collinear(out)
}

/// Signed shoelace area (positive for counter-clockwise in a y-up frame).
pub fn polygon_area(p: &[Pt]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Fraction of each output pixel covered by the even-odd interior of `loops`,
/// where loops are in source-pixel units and the output is `factor` times finer.
pub fn rasterize_loops(loops: &[Vec<Pt>], width: usize, height: usize, factor: usize) -> Raster {
    let (ow, oh) = (width * factor, height * factor);
    let mut out = Raster::zeros(ow, oh);
    let edges: Vec<(Pt, Pt)> = loops
        .iter()
        .flat_map(|l| (0..l.len()).map(move |i| (l[i], l[(i + 1) % l.len()])))
        .filter(|(a, b)| a[1] != b[1])
        .collect();
    // Bucket edges by the source rows they span.
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); height + 2];
    for (k, (a, b)) in edges.iter().enumerate() {
        let lo = a[1].min(b[1]).floor().max(0.0) as usize;
        let hi = (a[1].max(b[1]).ceil() as usize).min(height + 1);
        for r in rows.iter_mut().take(hi + 1).skip(lo) {
            r.push(k);
        }
    }
    let inv = 1.0 / factor as f64;
    let w_sub = 1.0 / (SUB * SUB) as f64;
    let mut xs: Vec<f64> = Vec::new();
    for oy in 0..oh {
        for sy in 0..SUB {
            let y = (oy as f64 + (sy as f64 + 0.5) / SUB as f64) * inv;
            xs.clear();
            let bucket = (y.floor() as usize).min(height + 1);
            for &k in &rows[bucket] {
                let (a, b) = edges[k];
                let (y0, y1) = (a[1].min(b[1]), a[1].max(b[1]));
                if y >= y0 && y < y1 {
                    xs.push(a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                }
            }
            xs.sort_by(|a, b| a.total_cmp(b));
            for span in xs.chunks_exact(2) {
                let (x0, x1) = (span[0] * factor as f64, span[1] * factor as f64);
                // Subsample columns with centres in [x0, x1).
                let first = ((x0 * SUB as f64 - 0.5).ceil().max(0.0)) as usize;
                let last = (x1 * SUB as f64 - 0.5).ceil().max(0.0) as usize;
                for s in first..last.min(ow * SUB) {
                    out.data[oy * ow + s / SUB] += w_sub;
                }
            }
        }
    }
    for v in &mut out.data {
        *v = v.min(1.0);
    }
    out
}

/// Upsamples by `factor ∈ {2, 4, 8}` through the polygon outline of the 0.5 level.
pub fn antialias_upsample(img: &Raster, factor: usize) -> Result<Raster> {
    if ![2, 4, 8].contains(&factor) {
        return Err(Error::validation(format!("upsampling factor must be 2, 4 or 8, got {factor}")));
    }
    let loops = iso_loops(img);
    Ok(rasterize_loops(&loops, img.width, img.height, factor))
}
