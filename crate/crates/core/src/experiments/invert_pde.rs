//! Quantitative photoacoustic inversion for the absorption `σ`, plus the
//! spectra of the first gradient at a far initial guess.

use serde::{Deserialize, Serialize};

use super::common::{amplitude_decay_slope, high_frequency_fraction, require, spectrum_rows, SpectrumRow};
use super::suite::{noisy_data, run_suite, BoxFeature, Bump, BumpProfile, SuiteResult};
use crate::error::Result;
use crate::grid::{Convention, Grid, GridFn};
use crate::invert::{gradient_wrt_model, ForwardModel, InversionConfig, MismatchSpec, PatModel};
use crate::models::DiffusionProblem;
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientStudyConfig {
    pub enabled: bool,
    /// Piecewise-constant truth by default; `None` picks the default for `dim`.
    pub truth: Option<BumpProfile>,
    /// Constant initial guess.
    pub m0: f64,
    /// Radius band for the slope fit, as fractions of the largest radius.
    pub band: [f64; 2],
}

impl Default for GradientStudyConfig {
    fn default() -> Self {
        Self { enabled: true, truth: None, m0: 0.2, band: [0.02, 0.5] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertPdeConfig {
    /// 1 or 2; the domain is `[0, 1]^dim`.
    pub dim: usize,
    /// Nodes per axis.
    pub n: usize,
    pub gamma: f64,
    pub kappa: f64,
    /// Constant boundary source.
    pub source: f64,
    /// Smooth truth by default; `None` picks the default for `dim`.
    pub truth: Option<BumpProfile>,
    pub floor: f64,
    pub m0: f64,
    pub noise_levels: Vec<f64>,
    pub metrics: Vec<MismatchSpec>,
    pub inversion: InversionConfig,
    pub gradient_study: GradientStudyConfig,
}

impl Default for InvertPdeConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 512,
            gamma: 0.02,
            kappa: 1.0,
            source: 1.0,
            truth: None,
            floor: 1e-3,
            m0: 0.15,
            noise_levels: vec![0.0, 0.12],
            metrics: vec![MismatchSpec::L2, MismatchSpec::W2, MismatchSpec::DotHs { s: -1.0 }, MismatchSpec::SurrogateHm1],
            inversion: InversionConfig { max_iter: 100, ..InversionConfig::default() },
            gradient_study: GradientStudyConfig::default(),
        }
    }
}

fn bump(center: &[f64], var: f64, amp: f64) -> Bump {
    Bump { center: center.to_vec(), var, amp }
}

fn boxed(center: &[f64], half_width: f64, amp: f64) -> BoxFeature {
    BoxFeature { center: center.to_vec(), half_width, amp }
}

pub fn default_smooth_truth(dim: usize) -> BumpProfile {
    let bumps = if dim == 1 {
        vec![bump(&[0.3], 0.0025, 0.2), bump(&[0.7], 0.001, 0.1)]
    } else {
        vec![bump(&[0.3, 0.4], 0.005, 0.2), bump(&[0.7, 0.6], 0.002, 0.1)]
    };
    BumpProfile { background: 0.1, bumps, boxes: vec![] }
}

pub fn default_box_truth(dim: usize) -> BumpProfile {
    let boxes = if dim == 1 {
        vec![boxed(&[0.3], 0.1, 0.2), boxed(&[0.7], 0.05, 0.1)]
    } else {
        vec![boxed(&[0.3, 0.3], 0.1, 0.2), boxed(&[0.65, 0.7], 0.08, 0.1)]
    };
    BumpProfile { background: 0.1, bumps: vec![], boxes }
}

impl InvertPdeConfig {
    /// Desk-scale 2D setup: 64^2 nodes, 10% noise, metrics that run on
    /// non-periodic data.
    pub fn pat_2d() -> Self {
        Self {
            dim: 2,
            n: 64,
            noise_levels: vec![0.0, 0.1],
            metrics: vec![MismatchSpec::L2, MismatchSpec::DotHs { s: -1.0 }, MismatchSpec::SurrogateHm1],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.dim == 1 || self.dim == 2, || "dim must be 1 or 2".into())?;
        require(self.n >= 8, || "n must be at least 8".into())?;
        require(self.gamma > 0.0 && self.kappa > 0.0, || "gamma and kappa must be positive".into())?;
        require(self.source.is_finite(), || "source must be finite".into())?;
        self.truth().validate(self.dim)?;
        require(self.truth().background > 0.0, || "absorption truth needs a positive background".into())?;
        require(self.floor > 0.0 && self.m0 > self.floor, || "need 0 < floor < m0".into())?;
        require(!self.noise_levels.is_empty(), || "need at least one noise level".into())?;
        require(self.noise_levels.iter().all(|l| (0.0..1.0).contains(l)), || "noise levels must lie in [0, 1)".into())?;
        require(!self.metrics.is_empty(), || "need at least one metric".into())?;
        for m in &self.metrics {
            m.validate()?;
        }
        let gs = &self.gradient_study;
        if gs.enabled {
            self.gradient_truth().validate(self.dim)?;
            require(self.gradient_truth().background > 0.0, || "gradient truth needs a positive background".into())?;
            require(gs.m0 > self.floor, || "gradient_study.m0 must exceed the floor".into())?;
            require(0.0 < gs.band[0] && gs.band[0] < gs.band[1] && gs.band[1] <= 1.0, || "band must satisfy 0 < lo < hi <= 1".into())?;
        }
        self.inversion.validate()
    }

    pub fn truth(&self) -> BumpProfile {
        self.truth.clone().unwrap_or_else(|| default_smooth_truth(self.dim))
    }

    pub fn gradient_truth(&self) -> BumpProfile {
        self.gradient_study.truth.clone().unwrap_or_else(|| default_box_truth(self.dim))
    }

    pub fn grid(&self) -> Result<Grid> {
        match self.dim {
            1 => Grid::new_1d(0.0, 1.0, self.n, Convention::Endpoint),
            _ => Grid::new_2d([0.0, 0.0], [1.0, 1.0], [self.n, self.n], Convention::Endpoint),
        }
    }

    pub fn model(&self, sigma: GridFn) -> Result<PatModel> {
        let h = GridFn::constant(sigma.grid(), self.source);
        PatModel::new(DiffusionProblem::new(self.gamma, self.kappa, h, sigma)?, self.floor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientSummary {
    pub metric: String,
    /// Slope of the shell-averaged amplitude `|ĝ|` over the band.
    pub amplitude_slope: f64,
    pub hf_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct GradientEntry {
    pub metric: MismatchSpec,
    pub outcome: std::result::Result<(GradientSummary, GridFn, Vec<SpectrumRow>), String>,
}

#[derive(Clone, Debug)]
pub struct GradientStudy {
    pub truth: GridFn,
    pub data: GridFn,
    pub entries: Vec<GradientEntry>,
}

impl GradientStudy {
    pub fn summary(&self, metric: &MismatchSpec) -> Option<&GradientSummary> {
        self.entries.iter().find(|e| e.metric == *metric).and_then(|e| e.outcome.as_ref().ok().map(|o| &o.0))
    }
}

#[derive(Clone, Debug)]
pub struct InvertPdeResult {
    pub problem: DiffusionProblem,
    pub suite: SuiteResult,
    pub gradients: Option<GradientStudy>,
}

/// First gradient at the constant guess `cfg.gradient_study.m0` against
/// noiseless data of the gradient truth.
pub fn gradient_study(cfg: &InvertPdeConfig) -> Result<GradientStudy> {
    let grid = cfg.grid()?;
    let gt = cfg.gradient_truth();
    let truth = GridFn::from_fn(&grid, |x, y| gt.eval(x, y));
    let model = cfg.model(truth.clone())?;
    let data = model.forward(truth.values())?;
    let m0 = GridFn::constant(&grid, cfg.gradient_study.m0);
    let [lo, hi] = cfg.gradient_study.band;
    let entries = par::map(&cfg.metrics, |metric| {
        let outcome = (|| -> Result<(GradientSummary, GridFn, Vec<SpectrumRow>)> {
            let gr = gradient_wrt_model(&model, metric, &m0, &data)?;
            let rows = spectrum_rows(&gr)?;
            let summary = GradientSummary {
                metric: metric.label(),
                amplitude_slope: amplitude_decay_slope(&gr, lo, hi)?,
                hf_fraction: high_frequency_fraction(&gr)?,
            };
            Ok((summary, gr, rows))
        })()
        .map_err(|e| e.to_string());
        GradientEntry { metric: *metric, outcome }
    });
    Ok(GradientStudy { truth, data, entries })
}

pub fn invert_pde(cfg: &InvertPdeConfig, seed: u64) -> Result<InvertPdeResult> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let tp = cfg.truth();
    let truth = GridFn::from_fn(&grid, |x, y| tp.eval(x, y));
    let model = cfg.model(truth.clone())?;
    let clean = model.forward(truth.values())?;
    let data = noisy_data(&clean, &cfg.noise_levels, seed)?;
    let m0 = vec![cfg.m0; grid.len()];
    let suite = run_suite(&model, &truth, data, &cfg.metrics, &m0, &cfg.inversion)?;
    let gradients = if cfg.gradient_study.enabled { Some(gradient_study(cfg)?) } else { None };
    Ok(InvertPdeResult { problem: model.problem, suite, gradients })
}
