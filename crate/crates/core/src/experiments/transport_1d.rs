//! Inverse transport: recover the shift of a bimodal profile under `W2` and
//! `L2`, with the misfit scanned along the shift.

use serde::{Deserialize, Serialize};

use super::common::{linspace, require, second_differences, strict_local_minima};
use crate::error::Result;
use crate::grid::{make_density, Convention, Density, Grid, GridFn};
use crate::invert::{evaluate_objective, run_inversion, FlowModel, ForwardModel, InversionConfig, MismatchSpec, Termination};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Transport1dConfig {
    pub n: usize,
    pub half_width: f64,
    pub centers: Vec<f64>,
    pub width: f64,
    /// Uniform background relative to the peak (keeps Fourier shifts positive).
    pub background: f64,
    pub truth_shift: f64,
    pub scan_max: f64,
    pub scan_points: usize,
    pub starts: Vec<f64>,
    pub metrics: Vec<MismatchSpec>,
    pub inversion: InversionConfig,
}

impl Default for Transport1dConfig {
    fn default() -> Self {
        Self {
            n: 512,
            half_width: 12.0,
            centers: vec![-1.5, 1.5],
            width: 0.5,
            background: 1e-6,
            truth_shift: 2.0,
            scan_max: 6.0,
            scan_points: 121,
            starts: vec![-5.0, -2.0, 4.5, 5.5],
            metrics: vec![MismatchSpec::W2, MismatchSpec::L2],
            inversion: InversionConfig { max_iter: 100, ..InversionConfig::default() },
        }
    }
}

impl Transport1dConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.n >= 16 && self.n.is_multiple_of(2), || "n must be even and at least 16".into())?;
        require(self.width > 0.0 && !self.centers.is_empty(), || "need a positive width and at least one center".into())?;
        require(self.background > 0.0, || "background must be positive".into())?;
        let reach = self.centers.iter().map(|c| c.abs()).fold(0.0, f64::max) + self.scan_max + 8.0 * self.width;
        require(reach < self.half_width, || format!("shifted profile leaves the domain (reach {reach})"))?;
        require(self.truth_shift.abs() <= self.scan_max, || "truth_shift must lie in the scan range".into())?;
        require(self.scan_points >= 3, || "need at least 3 scan points".into())?;
        require(self.starts.iter().all(|s| s.abs() <= self.scan_max), || "starts must lie in the scan range".into())?;
        require(!self.metrics.is_empty(), || "need at least one metric".into())?;
        for m in &self.metrics {
            m.validate()?;
        }
        self.inversion.validate()
    }

    pub fn profile(&self) -> Result<Density> {
        let l = self.half_width;
        let grid = Grid::new_1d(-l, l, self.n, Convention::Periodic)?;
        let w2 = 2.0 * self.width * self.width;
        let f = GridFn::from_fn(&grid, |x, _| self.centers.iter().map(|c| (-(x - c).powi(2) / w2).exp()).sum::<f64>());
        let c = self.background * f.max();
        make_density(&f.map(|v| v + c), 1.0, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub shift: f64,
    /// Objective per metric, in `metrics` order.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionRow {
    pub metric: String,
    pub start: f64,
    pub recovered: f64,
    pub error: f64,
    pub iterations: usize,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricScanDiagnostics {
    pub metric: String,
    pub local_minima: usize,
    pub min_second_difference: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transport1dResult {
    pub scan: Vec<ScanRow>,
    pub inversions: Vec<InversionRow>,
    pub diagnostics: Vec<MetricScanDiagnostics>,
}

pub fn transport_1d(cfg: &Transport1dConfig) -> Result<Transport1dResult> {
    cfg.validate()?;
    let model = FlowModel::new(cfg.profile()?)?;
    let data = model.forward(&[cfg.truth_shift])?;
    let shifts = linspace(-cfg.scan_max, cfg.scan_max, cfg.scan_points);
    let scan = par::map(&shifts, |&a| -> Result<ScanRow> {
        let pred = model.forward(&[a])?;
        let values = cfg.metrics.iter().map(|m| evaluate_objective(m, &pred, &data)).collect::<Result<Vec<_>>>()?;
        Ok(ScanRow { shift: a, values })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let diagnostics = cfg
        .metrics
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let v: Vec<f64> = scan.iter().map(|r| r.values[j]).collect();
            MetricScanDiagnostics {
                metric: m.label(),
                local_minima: strict_local_minima(&v).len(),
                min_second_difference: second_differences(&v).into_iter().fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    let jobs: Vec<(&MismatchSpec, f64)> = cfg.metrics.iter().flat_map(|m| cfg.starts.iter().map(move |&s| (m, s))).collect();
    let inversions = par::map(&jobs, |&(m, s)| -> Result<InversionRow> {
        let tr = run_inversion(&model, m, &data, &[s], &cfg.inversion)?;
        let recovered = tr.final_m[0];
        Ok(InversionRow {
            metric: m.label(),
            start: s,
            recovered,
            error: (recovered - cfg.truth_shift).abs(),
            iterations: tr.rows.len().saturating_sub(1),
            termination: tr.termination,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Transport1dResult { scan, inversions, diagnostics })
}
