//! Locate a translated 2D profile from its axis marginals: `W2^2` of each
//! marginal is convex in the matching shift component.

use serde::{Deserialize, Serialize};

use super::common::{linspace, require, second_differences, strict_local_minima};
use crate::error::Result;
use crate::grid::{make_density, Convention, Density, Grid, GridFn};
use crate::invert::{evaluate_objective, MismatchSpec};
use crate::models::{flow_translate, project_axes, FlowParams};
use crate::transport1d::w2_1d;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectLocateConfig {
    pub n: usize,
    pub half_width: f64,
    pub centers: Vec<[f64; 2]>,
    pub width: f64,
    pub truth: [f64; 2],
    pub scan_max: f64,
    pub scan_points: usize,
}

impl Default for ProjectLocateConfig {
    fn default() -> Self {
        Self {
            n: 128,
            half_width: 12.0,
            centers: vec![[-2.0, -1.0], [1.5, 2.0]],
            width: 0.8,
            truth: [1.2, -0.7],
            scan_max: 3.5,
            scan_points: 81,
        }
    }
}

impl ProjectLocateConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.n >= 16 && self.n.is_multiple_of(2), || "n must be even and at least 16".into())?;
        require(self.width > 0.0 && !self.centers.is_empty(), || "need a positive width and at least one center".into())?;
        let reach = self.centers.iter().flatten().map(|c| c.abs()).fold(0.0, f64::max) + self.scan_max + 8.0 * self.width;
        require(reach < self.half_width, || format!("shifted profile leaves the domain (reach {reach})"))?;
        require(self.truth.iter().all(|t| t.abs() <= self.scan_max), || "truth must lie in the scan range".into())?;
        require(self.scan_points >= 3, || "need at least 3 scan points".into())
    }

    pub fn profile(&self) -> Result<Density> {
        let l = self.half_width;
        let grid = Grid::new_2d([-l, -l], [l, l], [self.n, self.n], Convention::Periodic)?;
        let w2 = 2.0 * self.width * self.width;
        let f = GridFn::from_fn(&grid, |x, y| {
            self.centers.iter().map(|c| (-((x - c[0]).powi(2) + (y - c[1]).powi(2)) / w2).exp()).sum::<f64>()
        });
        make_density(&f, 1.0, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisScanRow {
    pub axis: usize,
    pub offset: f64,
    pub w2_sq: f64,
    pub l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocateSummary {
    pub truth: [f64; 2],
    pub located: [f64; 2],
    pub max_error: f64,
    pub w2_local_minima: [usize; 2],
    pub l2_local_minima: [usize; 2],
    pub w2_min_second_difference: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocateResult {
    pub scans: Vec<AxisScanRow>,
    pub summary: LocateSummary,
}

/// Vertex of the parabola through three equally spaced samples.
fn parabolic_vertex(t: [f64; 3], v: [f64; 3]) -> f64 {
    let h = t[1] - t[0];
    let den = v[0] - 2.0 * v[1] + v[2];
    if den <= 0.0 {
        return t[1];
    }
    t[1] + 0.5 * h * (v[0] - v[2]) / den
}

pub fn project_locate(cfg: &ProjectLocateConfig) -> Result<LocateResult> {
    cfg.validate()?;
    let phi = cfg.profile()?;
    let data = flow_translate(&phi, &FlowParams::shift(&cfg.truth))?;
    let offsets = linspace(-cfg.scan_max, cfg.scan_max, cfg.scan_points);
    let mut scans = Vec::new();
    let mut located = [0.0; 2];
    let mut w2_minima = [0; 2];
    let mut l2_minima = [0; 2];
    let mut w2_curv = [0.0; 2];
    for axis in 0..2 {
        let target = project_axes(&data, axis)?;
        let base = project_axes(&phi, axis)?;
        let mut w2v = Vec::with_capacity(offsets.len());
        let mut l2v = Vec::with_capacity(offsets.len());
        for &t in &offsets {
            let moved = flow_translate(&base, &FlowParams::shift(&[t]))?;
            let w2_sq = w2_1d(&moved, &target)?;
            let l2 = 2.0 * evaluate_objective(&MismatchSpec::L2, moved.base(), target.base())?;
            scans.push(AxisScanRow { axis, offset: t, w2_sq, l2 });
            w2v.push(w2_sq);
            l2v.push(l2);
        }
        let k = (0..w2v.len()).min_by(|&a, &b| w2v[a].total_cmp(&w2v[b])).unwrap_or(0);
        let k = k.clamp(1, w2v.len() - 2);
        located[axis] = parabolic_vertex(
            [offsets[k - 1], offsets[k], offsets[k + 1]],
            [w2v[k - 1], w2v[k], w2v[k + 1]],
        );
        w2_minima[axis] = strict_local_minima(&w2v).len();
        l2_minima[axis] = strict_local_minima(&l2v).len();
        w2_curv[axis] = second_differences(&w2v).into_iter().fold(f64::INFINITY, f64::min);
    }
    let max_error = (0..2).map(|a| (located[a] - cfg.truth[a]).abs()).fold(0.0, f64::max);
    Ok(LocateResult {
        scans,
        summary: LocateSummary {
            truth: cfg.truth,
            located,
            max_error,
            w2_local_minima: w2_minima,
            l2_local_minima: l2_minima,
            w2_min_second_difference: w2_curv,
        },
    })
}
