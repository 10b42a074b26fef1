//! Image to outline conversion: crop, antialias, edge detection, point ordering,
//! decimation and scaling into closed millimetre curves.

mod antialias;
mod edges;
mod group;
mod raster;


use std::path::Path;

use serde::{Deserialize, Serialize};

pub use antialias::{antialias_upsample, iso_loops, polygon_area, rasterize_loops};
pub use edges::{gradient_field, gradient_magnitude, remove_rim_hub_edges, thin_edges, EdgeMap, Kernel};
pub use group::{
    center_and_scale, centroid, close_curves, decimate, enclosed_area, point_in_polygon, sort_and_group, Point,
    PointGroup,
};
pub use raster::{content_bbox, crop_tight, crop_to_content, BBox, Raster};

use crate::designspace::DesignImage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Pixels,
    Millimeters,
}

impl Units {
    fn label(self) -> &'static str {
        match self {
            Units::Pixels => "px",
            Units::Millimeters => "mm",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub source_id: String,
    pub units: Units,
    pub groups: Vec<PointGroup>,
}

impl ContourSet {
    pub fn point_count(&self) -> usize {
        self.groups.iter().map(|g| g.points.len()).sum()
    }

    /// Writes a `units,<u>` row followed by `group_id,seq,x,y` records.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        w.write_record(["units", self.units.label()])?;
        w.write_record(["group_id", "seq", "x", "y"])?;
        for (g, grp) in self.groups.iter().enumerate() {
            for (s, p) in grp.points.iter().enumerate() {
                w.write_record([g.to_string(), s.to_string(), p[0].to_string(), p[1].to_string()])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
        crate::util::write_atomic(path, &bytes)
    }

    pub fn read_csv(path: &Path, source_id: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut records = r.records();
        let units = match records.next().transpose()? {
            Some(rec) if rec.get(0) == Some("units") => match rec.get(1) {
                Some("mm") => Units::Millimeters,
                Some("px") => Units::Pixels,
                other => return Err(Error::validation(format!("unknown units {other:?}"))),
            },
            _ => return Err(Error::validation("contour csv must start with a units row")),
        };
        records.next().transpose()?;
        let mut groups: Vec<PointGroup> = Vec::new();
        for rec in records {
            let rec = rec?;
            let field = |i: usize| -> Result<&str> {
                rec.get(i).ok_or_else(|| Error::validation("short contour csv record"))
            };
            let parse_err = |e: &dyn std::fmt::Display| Error::validation(format!("bad contour csv value: {e}"));
            let g: usize = field(0)?.parse().map_err(|e| parse_err(&e))?;
            let x: f64 = field(2)?.parse().map_err(|e| parse_err(&e))?;
            let y: f64 = field(3)?.parse().map_err(|e| parse_err(&e))?;
            while groups.len() <= g {
                groups.push(PointGroup {
                    points: Vec::new(),
                    closed: false,
                });
            }
            groups[g].points.push([x, y]);
        }
        for g in &mut groups {
            g.closed = g.points.len() > 1 && g.points.first() == g.points.last();
        }
        Ok(Self {
            source_id: source_id.to_string(),
            units,
            groups,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub upsample: usize,
    pub kernel: Kernel,
    /// Gradient threshold; `None` means half the maximum magnitude.
    pub edge_threshold: Option<f64>,
    /// Thin edges to one pixel before ordering them.
    pub thin: bool,
    pub group_threshold: f64,
    pub scale: f64,
    /// Physical size of the cropped outline's width.
    pub wheel_diameter_mm: f64,
    /// Edge removal radii as fractions of the cropped half-width.
    pub hub_cut_frac: f64,
    pub rim_cut_frac: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            upsample: 4,
            kernel: Kernel::Sobel,
            edge_threshold: None,
            thin: true,
            group_threshold: 5.0,
            scale: 0.97,
            wheel_diameter_mm: 457.2,
            hub_cut_frac: 0.23,
            rim_cut_frac: 0.92,
        }
    }
}

/// Intermediate products of [`extract_contours`], kept for inspection.
#[derive(Clone, Debug)]
pub struct ContourTrace {
    pub cropped: Raster,
    pub upsampled: Raster,
    pub edges: EdgeMap,
    pub raw_groups: Vec<PointGroup>,
    pub mm_per_px: f64,
}

pub fn extract_contours(img: &DesignImage, cfg: &ContourConfig) -> Result<(ContourSet, ContourTrace)> {
    if !(cfg.hub_cut_frac >= 0.0 && cfg.hub_cut_frac < cfg.rim_cut_frac) {
        return Err(Error::validation("hub_cut_frac must be non-negative and below rim_cut_frac"));
    }
    let cropped = crop_to_content(&Raster::from_image(img))?;
    let upsampled = antialias_upsample(&cropped, cfg.upsample)?;
    let mut edges = gradient_magnitude(&upsampled, cfg.kernel, cfg.edge_threshold);
    let half = upsampled.width as f64 / 2.0;
    remove_rim_hub_edges(&mut edges, cfg.hub_cut_frac * half, cfg.rim_cut_frac * half);
    if cfg.thin {
        thin_edges(&mut edges);
    }
    let raw_groups = sort_and_group(&edges.points(), cfg.group_threshold);
    let mut groups: Vec<PointGroup> = raw_groups.iter().filter_map(decimate).collect();
    let mm_per_px = cfg.wheel_diameter_mm / upsampled.width as f64;
    center_and_scale(&mut groups, cfg.scale, mm_per_px);
    let groups = close_curves(groups);
    let set = ContourSet {
        source_id: img.id().to_string(),
        units: Units::Millimeters,
        groups,
    };
    Ok((
        set,
        ContourTrace {
            cropped,
            upsampled,
            edges,
            raw_groups,
            mm_per_px,
        },
    ))
}
