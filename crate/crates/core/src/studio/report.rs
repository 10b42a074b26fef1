use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::artifacts::{write_csv_rows, CandidateRecord, MapMeta};
use super::workspace::{Stage, Workspace};
use crate::designspace::{to_gray8, DesignSet};
use crate::error::{Error, Result};
use crate::util::write_json;

const CANVAS: u32 = 512;
const MARGIN: f64 = 16.0;
const PANEL_COLS: usize = 3;
const PANEL_ROWS: usize = 2;

/// Contents of a report bundle, written as `index.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportIndex {
    pub scatter_by_cluster: String,
    pub scatter_by_frequency: String,
    /// One panel per cluster id, in order.
    pub cluster_panels: Vec<String>,
    pub gradcam_gallery: Option<String>,
    pub shortlist_csv: String,
    pub frequency_legend_csv: String,
    /// Highest-stiffness design.
    pub top_candidate: Option<String>,
}

#[derive(Serialize)]
struct LegendRow {
    group: usize,
    low_hz: f64,
    high_hz: f64,
    r: u8,
    g: u8,
    b: u8,
}

#[derive(Serialize)]
struct ShortlistRow<'a> {
    rank: usize,
    id: &'a str,
    frequency_hz: f64,
    mass_kg: f64,
    stiffness: f64,
    cluster: usize,
    frequency_group: usize,
    shortlisted: bool,
}

/// Writes the static report of a completed explain stage into `out`.
pub fn export_report(ws: &Workspace, out: &Path) -> Result<ReportIndex> {
    ws.require(Stage::Explain)?;
    let corpus = ws.corpus()?;
    let records = ws.candidates()?;
    let meta = ws.map_meta()?;
    render_report(&corpus, &records, &meta, &ws.stage_dir(Stage::Explain).join("gradcam"), out)
}

/// Fixed qualitative palette, cycled for more than 20 clusters.
pub fn cluster_color(c: usize) -> [u8; 3] {
    const P: [[u8; 3]; 20] = [
        [31, 119, 180],
        [255, 127, 14],
        [44, 160, 44],
        [214, 39, 40],
        [148, 103, 189],
        [140, 86, 75],
        [227, 119, 194],
        [127, 127, 127],
        [188, 189, 34],
        [23, 190, 207],
        [174, 199, 232],
        [255, 187, 120],
        [152, 223, 138],
        [255, 152, 150],
        [197, 176, 213],
        [196, 156, 148],
        [247, 182, 210],
        [199, 199, 199],
        [219, 219, 141],
        [158, 218, 229],
    ];
    P[c % P.len()]
}

/// Blue-to-red ramp over `k` ordered frequency groups.
pub fn group_color(g: usize, k: usize) -> [u8; 3] {
    let t = if k <= 1 { 0.0 } else { g as f64 / (k - 1) as f64 };
    let lerp = |a: f64, b: f64| ((a + (b - a) * t) * 255.0).round() as u8;
    [lerp(0.1, 0.85), lerp(0.3, 0.15), lerp(0.85, 0.1)]
}

pub(crate) fn render_report(
    corpus: &DesignSet,
    records: &[CandidateRecord],
    meta: &MapMeta,
    gradcam_dir: &Path,
    out: &Path,
) -> Result<ReportIndex> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let k_freq = meta.frequency_ranges.len();

    scatter(records, |r| cluster_color(r.cluster)).save(out.join("scatter_cluster.png"))?;
    scatter(records, |r| group_color(r.frequency_group, k_freq)).save(out.join("scatter_frequency.png"))?;

    let n_clusters = records.iter().map(|r| r.cluster + 1).max().unwrap_or(0);
    let mut by_rank: Vec<&CandidateRecord> = records.iter().collect();
    by_rank.sort_by_key(|r| r.rank);
    let mut panels = Vec::new();
    for c in 0..n_clusters {
        let members: Vec<&CandidateRecord> = by_rank
            .iter()
            .copied()
            .filter(|r| r.cluster == c)
            .take(PANEL_COLS * PANEL_ROWS)
            .collect();
        let name = format!("cluster_{c:02}.png");
        cluster_panel(corpus, &members)?.save(out.join(&name))?;
        panels.push(name);
    }

    let gallery = gradcam_gallery(&by_rank, gradcam_dir)?;
    let gallery_name = match gallery {
        Some(img) => {
            img.save(out.join("gradcam_gallery.png"))?;
            Some("gradcam_gallery.png".to_string())
        }
        None => None,
    };

    let rows: Vec<ShortlistRow> = by_rank
        .iter()
        .map(|r| ShortlistRow {
            rank: r.rank,
            id: &r.id,
            frequency_hz: r.frequency_hz,
            mass_kg: r.mass_kg,
            stiffness: r.stiffness,
            cluster: r.cluster,
            frequency_group: r.frequency_group,
            shortlisted: r.shortlisted,
        })
        .collect();
    write_csv_rows(&out.join("shortlist.csv"), &rows)?;
    let legend: Vec<LegendRow> = meta
        .frequency_ranges
        .iter()
        .enumerate()
        .map(|(g, r)| {
            let [cr, cg, cb] = group_color(g, k_freq);
            LegendRow {
                group: g,
                low_hz: r[0],
                high_hz: r[1],
                r: cr,
                g: cg,
                b: cb,
            }
        })
        .collect();
    write_csv_rows(&out.join("frequency_legend.csv"), &legend)?;

    let index = ReportIndex {
        scatter_by_cluster: "scatter_cluster.png".into(),
        scatter_by_frequency: "scatter_frequency.png".into(),
        cluster_panels: panels,
        gradcam_gallery: gallery_name,
        shortlist_csv: "shortlist.csv".into(),
        frequency_legend_csv: "frequency_legend.csv".into(),
        top_candidate: by_rank.first().map(|r| r.id.clone()),
    };
    write_json(&out.join("index.json"), &index)?;
    Ok(index)
}

fn scatter(records: &[CandidateRecord], color: impl Fn(&CandidateRecord) -> [u8; 3]) -> RgbImage {
    let mut img = RgbImage::from_pixel(CANVAS, CANVAS, Rgb([255, 255, 255]));
    if records.is_empty() {
        return img;
    }
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for r in records {
        u0 = u0.min(r.u);
        u1 = u1.max(r.u);
        v0 = v0.min(r.v);
        v1 = v1.max(r.v);
    }
    let span = (u1 - u0).max(v1 - v0).max(1e-12);
    let scale = (CANVAS as f64 - 2.0 * MARGIN) / span;
    for r in records {
        let x = MARGIN + (r.u - u0) * scale;
        // v grows upward
        let y = CANVAS as f64 - MARGIN - (r.v - v0) * scale;
        let c = Rgb(color(r));
        for dy in -2i64..=2 {
            for dx in -2i64..=2 {
                let px = x.round() as i64 + dx;
                let py = y.round() as i64 + dy;
                if (0..CANVAS as i64).contains(&px) && (0..CANVAS as i64).contains(&py) {
                    img.put_pixel(px as u32, py as u32, c);
                }
            }
        }
    }
    img
}

fn cluster_panel(corpus: &DesignSet, members: &[&CandidateRecord]) -> Result<RgbImage> {
    let side = corpus.items().first().map_or(1, |d| d.size()) as u32;
    let mut img = RgbImage::from_pixel(side * PANEL_COLS as u32, side * PANEL_ROWS as u32, Rgb([255, 255, 255]));
    for (slot, r) in members.iter().enumerate() {
        let (design, _) = corpus
            .get(&r.id)
            .ok_or_else(|| Error::validation(format!("candidate `{}` is not in the corpus", r.id)))?;
        let gray = to_gray8(design);
        let ox = (slot % PANEL_COLS) as u32 * side;
        let oy = (slot / PANEL_COLS) as u32 * side;
        for (x, y, p) in gray.enumerate_pixels() {
            img.put_pixel(ox + x, oy + y, Rgb([p.0[0]; 3]));
        }
    }
    Ok(img)
}

fn gradcam_gallery(by_rank: &[&CandidateRecord], dir: &Path) -> Result<Option<RgbImage>> {
    let mut tiles = Vec::new();
    for r in by_rank {
        let p = dir.join(format!("{}_overlay.png", r.id));
        if p.exists() {
            tiles.push(image::open(&p)?.to_rgb8());
        }
    }
    let Some(first) = tiles.first() else {
        return Ok(None);
    };
    let (w, h) = first.dimensions();
    let mut img = RgbImage::new(w * tiles.len() as u32, h);
    for (i, t) in tiles.iter().enumerate() {
        image::imageops::replace(&mut img, t, (i as u32 * w) as i64, 0);
    }
    Ok(Some(img))
}
