//! 1D deconvolution on `[-ℓ, ℓ]` under several metrics and noise levels.

use serde::{Deserialize, Serialize};

use super::common::require;
use super::suite::{noisy_data, run_suite, BumpProfile, SuiteResult};
use crate::error::Result;
use crate::grid::{mass, Convention, Grid, GridFn};
use crate::invert::{ConvolutionModel, ForwardModel, InversionConfig, MismatchSpec};
use crate::models::KernelSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeconvolveConfig {
    pub n: usize,
    pub half_width: f64,
    pub kernel: KernelSpec,
    pub truth: BumpProfile,
    pub noise_levels: Vec<f64>,
    pub metrics: Vec<MismatchSpec>,
    /// Lower bound kept by step clipping (transport metrics need `m >= 0`).
    pub lower_bound: f64,
    pub inversion: InversionConfig,
}

impl Default for DeconvolveConfig {
    fn default() -> Self {
        Self {
            n: 512,
            half_width: 8.0,
            kernel: KernelSpec::laplace(1.0),
            truth: BumpProfile::default(),
            noise_levels: vec![0.0, 0.02, 0.1],
            metrics: vec![MismatchSpec::L2, MismatchSpec::DotHs { s: -1.0 }, MismatchSpec::W2],
            lower_bound: 0.0,
            inversion: InversionConfig { max_iter: 200, ..InversionConfig::default() },
        }
    }
}

impl DeconvolveConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.n >= 16, || "n must be at least 16".into())?;
        require(self.half_width > 0.0, || "half_width must be positive".into())?;
        let _ = self.kernel.evaluator(1)?;
        self.truth.validate(1)?;
        require(!self.noise_levels.is_empty(), || "need at least one noise level".into())?;
        require(self.noise_levels.iter().all(|l| (0.0..1.0).contains(l)), || "noise levels must lie in [0, 1)".into())?;
        require(!self.metrics.is_empty(), || "need at least one metric".into())?;
        for m in &self.metrics {
            m.validate()?;
        }
        require(self.lower_bound >= 0.0, || "lower_bound must be nonnegative".into())?;
        self.inversion.validate()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new_1d(-self.half_width, self.half_width, self.n, Convention::Endpoint)
    }
}

pub fn deconvolve(cfg: &DeconvolveConfig, seed: u64) -> Result<SuiteResult> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let model = ConvolutionModel::new(grid.clone(), cfg.kernel.clone())?.with_lower_bound(cfg.lower_bound);
    let truth = GridFn::from_fn(&grid, |x, y| cfg.truth.eval(x, y));
    let clean = model.forward(truth.values())?;
    let data = noisy_data(&clean, &cfg.noise_levels, seed)?;
    // flat start carrying the data mass
    let ones = vec![1.0; grid.len()];
    let c = mass(&clean) / mass(&model.forward(&ones)?);
    let m0: Vec<f64> = ones.iter().map(|v| v * c).collect();
    run_suite(&model, &truth, data, &cfg.metrics, &m0, &cfg.inversion)
}
