//! Gaussian-kernel density grids on a frame shared by all venues.

use serde::{Deserialize, Serialize};

use super::tsne::EmbeddedPoint;

/// Bounding box and kernel bandwidth computed once from the pooled points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityFrame {
    pub resolution: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub bandwidth: (f64, f64),
    /// Every pooled point sits at the same location.
    pub degenerate: bool,
}

/// Row-major `resolution x resolution` values; row 0 is the lowest y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn zeros(resolution: usize) -> Self {
        Grid { resolution, values: vec![0.0; resolution * resolution] }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// (row, col) of the largest value, first in row-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best / self.resolution, best % self.resolution)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn scott(values: &[f64], span: f64) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let h = sd * n.powf(-1.0 / 6.0);
    if h > 0.0 {
        h
    } else {
        span / 10.0
    }
}

impl DensityFrame {
    /// `None` for an empty point set.
    pub fn from_points(points: &[EmbeddedPoint], resolution: usize) -> Option<Self> {
        if points.is_empty() || resolution == 0 {
            return None;
        }
        let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
        let x_range = range(xs.iter().copied());
        let y_range = range(ys.iter().copied());
        let degenerate = points.iter().all(|p| p.x == points[0].x && p.y == points[0].y);
        Some(DensityFrame {
            resolution,
            x_range,
            y_range,
            bandwidth: (scott(&xs, x_range.1 - x_range.0), scott(&ys, y_range.1 - y_range.0)),
            degenerate,
        })
    }

    fn center(&self, range: (f64, f64), i: usize) -> f64 {
        range.0 + (i as f64 + 0.5) * (range.1 - range.0) / self.resolution as f64
    }
}

/// Sum of unnormalized Gaussian kernels at each cell center. Grids of
/// disjoint point subsets under one frame add up to the grid of the union.
/// In a degenerate frame each point contributes 1 to the center cell.
pub fn density_grid(points: &[EmbeddedPoint], frame: &DensityFrame) -> Grid {
    let r = frame.resolution;
    let mut grid = Grid::zeros(r);
    if frame.degenerate {
        grid.values[(r / 2) * r + r / 2] = points.len() as f64;
        return grid;
    }
    let (hx, hy) = frame.bandwidth;
    let cx: Vec<f64> = (0..r).map(|c| frame.center(frame.x_range, c)).collect();
    let cy: Vec<f64> = (0..r).map(|c| frame.center(frame.y_range, c)).collect();
    for (row, &y) in cy.iter().enumerate() {
        for (col, &x) in cx.iter().enumerate() {
            grid.values[row * r + col] =
                points.iter().map(|p| (-0.5 * (((p.x - x) / hx).powi(2) + ((p.y - y) / hy).powi(2))).exp()).sum();
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(venue: &str, x: f64, y: f64) -> EmbeddedPoint {
        EmbeddedPoint { idea_ref: String::new(), venue: venue.into(), x, y }
    }

    #[test]
    fn single_point_is_single_cell() {
        let pts = [pt("A", 3.0, -1.0)];
        let frame = DensityFrame::from_points(&pts, 9).unwrap();
        assert!(frame.degenerate);
        let g = density_grid(&pts, &frame);
        assert_eq!(g.argmax(), (4, 4));
        assert_eq!(g.total(), 1.0);
    }

    #[test]
    fn peak_near_cluster_and_empty_venue_is_zero() {
        let pts = [pt("A", 0.0, 0.0), pt("A", 0.1, 0.0), pt("A", 10.0, 10.0)];
        let frame = DensityFrame::from_points(&pts, 10).unwrap();
        let g = density_grid(&pts, &frame);
        assert_eq!(g.argmax(), (0, 0));
        assert!(g.values.iter().all(|&v| v >= 0.0));
        assert_eq!(density_grid(&[], &frame).total(), 0.0);
    }

    #[test]
    fn grids_are_additive() {
        let pts: Vec<EmbeddedPoint> =
            (0..20).map(|i| pt(if i % 3 == 0 { "A" } else { "B" }, (i as f64).sin() * 5.0, i as f64 * 0.3)).collect();
        let frame = DensityFrame::from_points(&pts, 16).unwrap();
        let pooled = density_grid(&pts, &frame);
        let a: Vec<_> = pts.iter().filter(|p| p.venue == "A").cloned().collect();
        let b: Vec<_> = pts.iter().filter(|p| p.venue == "B").cloned().collect();
        let (ga, gb) = (density_grid(&a, &frame), density_grid(&b, &frame));
        for i in 0..pooled.values.len() {
            assert!((ga.values[i] + gb.values[i] - pooled.values[i]).abs() < 1e-9);
        }
    }
}
