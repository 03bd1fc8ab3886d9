//! Coordinates CSV, one SVG heatmap per venue on a shared color scale, and a
//! manifest echoing every parameter.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::density::{density_grid, DensityFrame, Grid};
use super::tsne::{EmbeddedPoint, TsneParams, TsneRun};

pub const COORDINATES_FILE: &str = "projection.csv";
pub const MANIFEST_FILE: &str = "projection_manifest.json";
const CELL_PX: usize = 8;
const LOW_COLOR: [u8; 3] = [0xff, 0xff, 0xff];
const HIGH_COLOR: [u8; 3] = [0x08, 0x30, 0x6b];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub params: TsneParams,
    pub learning_rate: f64,
    pub kl_after_exaggeration: f64,
    pub kl_final: f64,
}

impl RunInfo {
    pub fn new(params: &TsneParams, run: &TsneRun) -> Self {
        RunInfo {
            params: params.clone(),
            learning_rate: run.learning_rate,
            kl_after_exaggeration: run.kl_after_exaggeration,
            kl_final: run.kl_final,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenuePanel {
    pub venue: String,
    pub points: usize,
    pub file: String,
    pub total_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub points: usize,
    pub run: Option<RunInfo>,
    pub frame: Option<DensityFrame>,
    /// Color scale shared by all panels: (min, max) density.
    pub color_scale: (f64, f64),
    pub panels: Vec<VenuePanel>,
}

pub fn heatmap_file_name(venue: &str) -> String {
    let safe: String = venue.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    format!("heatmap_{safe}.svg")
}

fn color(value: f64, max: f64) -> String {
    let t = if max > 0.0 { (value / max).clamp(0.0, 1.0) } else { 0.0 };
    let c: Vec<u8> = (0..3)
        .map(|i| (LOW_COLOR[i] as f64 + t * (HIGH_COLOR[i] as f64 - LOW_COLOR[i] as f64)).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heatmap SVG; `max` fixes the top of the color scale.
pub fn render_svg(venue: &str, grid: &Grid, max: f64) -> String {
    let r = grid.resolution;
    let side = r * CELL_PX;
    let legend_h = 24;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{h}" viewBox="0 0 {side} {h}">"#,
        h = side + legend_h
    );
    let _ = writeln!(s, "<title>{}</title>", escape(venue));
    for row in 0..r {
        for col in 0..r {
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{CELL_PX}" height="{CELL_PX}" fill="{}"/>"#,
                col * CELL_PX,
                (r - 1 - row) * CELL_PX,
                color(grid.at(row, col), max)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<defs><linearGradient id="scale"><stop offset="0" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs>"#,
        color(0.0, 1.0),
        color(1.0, 1.0)
    );
    let _ = writeln!(s, r#"<rect x="0" y="{}" width="{side}" height="8" fill="url(#scale)"/>"#, side + 2);
    let _ = writeln!(
        s,
        r#"<text x="0" y="{}" font-size="10" font-family="sans-serif">{} | 0 to {max}</text>"#,
        side + legend_h - 2,
        escape(venue)
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn write(path: &Path, contents: &[u8]) -> io::Result<()> {
    fs::write(path, contents)
}

/// Write `projection.csv`, the per-venue heatmaps and the manifest into
/// `dir`. Output is a pure function of the inputs.
pub fn export(
    dir: &Path,
    points: &[EmbeddedPoint],
    resolution: usize,
    run: Option<RunInfo>,
) -> io::Result<ExportManifest> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["idea_ref", "venue", "x", "y"])?;
    for p in points {
        w.write_record([p.idea_ref.as_str(), p.venue.as_str(), &p.x.to_string(), &p.y.to_string()])?;
    }
    write(&dir.join(COORDINATES_FILE), &w.into_inner().map_err(|e| e.into_error())?)?;

    let frame = DensityFrame::from_points(points, resolution);
    let mut by_venue: BTreeMap<&str, Vec<EmbeddedPoint>> = BTreeMap::new();
    for p in points {
        by_venue.entry(p.venue.as_str()).or_default().push(p.clone());
    }
    let grids: Vec<(&str, usize, Grid)> = match &frame {
        Some(f) => by_venue.iter().map(|(v, pts)| (*v, pts.len(), density_grid(pts, f))).collect(),
        None => Vec::new(),
    };
    let max = grids.iter().map(|(_, _, g)| g.max()).fold(0.0, f64::max);
    let mut panels = Vec::new();
    for (venue, count, grid) in &grids {
        let file = heatmap_file_name(venue);
        write(&dir.join(&file), render_svg(venue, grid, max).as_bytes())?;
        panels.push(VenuePanel { venue: venue.to_string(), points: *count, file, total_density: grid.total() });
    }
    let manifest = ExportManifest { points: points.len(), run, frame, color_scale: (0.0, max), panels };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    json.push('\n');
    write(&dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}
