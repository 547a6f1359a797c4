//! Truth, noisy data, and one inversion per (noise level, metric).

use serde::{Deserialize, Serialize};

use super::common::{high_frequency_fraction, l2_distance, require};
use crate::error::Result;
use crate::grid::{add_noise, Density, GridFn, NoiseSpec};
use crate::invert::{run_inversion, ForwardModel, InversionConfig, InversionTrace, MismatchSpec, Termination};
use crate::par;

/// `background + Σ amp · exp(-|x - center|^2 / (2 var))` plus box indicators
/// `amp · 1[max_a |x_a - center_a| < half_width]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BumpProfile {
    pub background: f64,
    pub bumps: Vec<Bump>,
    pub boxes: Vec<BoxFeature>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxFeature {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub amp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: Vec<f64>,
    pub var: f64,
    pub amp: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self {
            background: 0.05,
            bumps: vec![
                Bump { center: vec![-2.0], var: 0.4, amp: 1.0 },
                Bump { center: vec![1.5], var: 0.2, amp: 0.6 },
            ],
            boxes: vec![],
        }
    }
}

impl BumpProfile {
    pub fn validate(&self, dim: usize) -> Result<()> {
        require(self.background >= 0.0, || "profile background must be nonnegative".into())?;
        require(!self.bumps.is_empty() || !self.boxes.is_empty(), || "profile needs at least one feature".into())?;
        for b in &self.bumps {
            require(b.center.len() == dim, || format!("bump center must have {dim} components"))?;
            require(b.var > 0.0 && b.amp >= 0.0, || "bumps need var > 0 and amp >= 0".into())?;
        }
        for b in &self.boxes {
            require(b.center.len() == dim, || format!("box center must have {dim} components"))?;
            require(b.half_width > 0.0 && b.amp >= 0.0, || "boxes need half_width > 0 and amp >= 0".into())?;
        }
        Ok(())
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.background
            + self
                .bumps
                .iter()
                .map(|b| {
                    let mut r2 = (x - b.center[0]).powi(2);
                    if b.center.len() == 2 {
                        r2 += (y - b.center[1]).powi(2);
                    }
                    b.amp * (-r2 / (2.0 * b.var)).exp()
                })
                .sum::<f64>()
            + self
                .boxes
                .iter()
                .filter(|b| b.center.iter().zip([x, y]).all(|(c, p)| (p - c).abs() < b.half_width))
                .map(|b| b.amp)
                .sum::<f64>()
    }
}

/// Summary of one inversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub noise: f64,
    pub metric: String,
    /// `||f(m) - g||^2 / ||g||^2` against the data used for the inversion.
    pub relative_misfit: f64,
    /// `||f(m) - g|| / ||g||`.
    pub relative_misfit_norm: f64,
    /// `||m - m*|| / ||m*||`.
    pub relative_error: f64,
    pub hf_fraction: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub final_objective: f64,
}

#[derive(Clone, Debug)]
pub struct Variant {
    pub noise: f64,
    pub metric: MismatchSpec,
    pub outcome: std::result::Result<(VariantSummary, GridFn, InversionTrace), String>,
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub truth: GridFn,
    /// Data per noise level, in input order.
    pub data: Vec<(f64, GridFn)>,
    pub variants: Vec<Variant>,
}

impl SuiteResult {
    pub fn summary(&self, noise: f64, metric: &MismatchSpec) -> Option<&VariantSummary> {
        self.variants
            .iter()
            .find(|v| v.noise == noise && v.metric == *metric)
            .and_then(|v| v.outcome.as_ref().ok().map(|o| &o.0))
    }
}

/// Noisy copies of `clean`, one per level, seeded by position.
pub fn noisy_data(clean: &GridFn, levels: &[f64], seed: u64) -> Result<Vec<(f64, GridFn)>> {
    let d = Density::new(clean.clone())?;
    levels
        .iter()
        .enumerate()
        .map(|(i, &lvl)| {
            let spec = NoiseSpec::new(lvl, seed.wrapping_mul(1_000_003).wrapping_add(i as u64))?;
            Ok((lvl, add_noise(&d, spec)?.into_gridfn()))
        })
        .collect()
}

/// Run every (noise, metric) inversion from `m0`, in parallel across variants.
pub fn run_suite(
    model: &dyn ForwardModel,
    truth: &GridFn,
    data: Vec<(f64, GridFn)>,
    metrics: &[MismatchSpec],
    m0: &[f64],
    cfg: &InversionConfig,
) -> Result<SuiteResult> {
    let jobs: Vec<(usize, &MismatchSpec)> = (0..data.len()).flat_map(|i| metrics.iter().map(move |m| (i, m))).collect();
    let grid = model.param_grid().cloned();
    let variants = par::map(&jobs, |&(i, metric)| {
        let (noise, g) = (data[i].0, &data[i].1);
        let outcome = (|| -> Result<(VariantSummary, GridFn, InversionTrace)> {
            let tr = run_inversion(model, metric, g, m0, cfg)?;
            let recon = GridFn::new(grid.clone().unwrap_or_else(|| truth.grid().clone()), tr.final_m.clone())?;
            let pred = model.forward(&tr.final_m)?;
            let gn = g.norm_l2();
            let r = l2_distance(&pred, g)? / gn;
            let summary = VariantSummary {
                noise,
                metric: metric.label(),
                relative_misfit: r * r,
                relative_misfit_norm: r,
                relative_error: l2_distance(&recon, truth)? / truth.norm_l2(),
                hf_fraction: high_frequency_fraction(&recon)?,
                iterations: tr.rows.len().saturating_sub(1),
                termination: tr.termination,
                final_objective: tr.final_objective(),
            };
            Ok((summary, recon, tr))
        })()
        .map_err(|e| e.to_string());
        Variant { noise, metric: *metric, outcome }
    });
    Ok(SuiteResult { truth: truth.clone(), data, variants })
}

/// Label used for per-variant artifact names.
pub fn variant_tag(noise: f64, metric: &MismatchSpec) -> String {
    format!("{}_noise{}", metric.label(), noise)
}
