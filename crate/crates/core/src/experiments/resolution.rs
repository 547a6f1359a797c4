//! Reconstruction error versus noise level for the diagonal model, one study
//! per `(alpha, beta, s)` case.

use serde::{Deserialize, Serialize};

use super::common::require;
use crate::error::Result;
use crate::par;
use crate::sobolev::{resolution_study_on, ResolutionStudy, StudyDomain};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionCase {
    pub alpha: f64,
    pub beta: f64,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionConfig {
    pub cases: Vec<ResolutionCase>,
    pub noise_levels: Vec<f64>,
    pub trials: usize,
    pub domain: StudyDomain,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        let case = |s| ResolutionCase { alpha: 1.0, beta: 1.0, s };
        Self {
            cases: vec![case(0.0), case(-1.0), case(1.0)],
            noise_levels: (0..13).map(|k| 10f64.powf(-4.0 + 0.25 * k as f64)).collect(),
            trials: 20,
            domain: StudyDomain::default(),
        }
    }
}

impl ResolutionConfig {
    pub fn validate(&self) -> Result<()> {
        require(!self.cases.is_empty(), || "need at least one case".into())?;
        for c in &self.cases {
            require(c.alpha > 0.0 && c.beta > 0.0, || "alpha and beta must be positive".into())?;
            require(c.alpha + c.beta - c.s > 0.0, || "need alpha + beta - s > 0".into())?;
        }
        require(self.noise_levels.len() >= 2, || "need at least two noise levels".into())?;
        require(self.noise_levels.iter().all(|d| *d > 0.0 && d.is_finite()), || "noise levels must be positive".into())?;
        require(self.trials > 0, || "need at least one trial".into())
    }
}

pub fn resolution(cfg: &ResolutionConfig, seed: u64) -> Result<Vec<(ResolutionCase, ResolutionStudy)>> {
    cfg.validate()?;
    let indexed: Vec<(usize, ResolutionCase)> = cfg.cases.iter().copied().enumerate().collect();
    par::map(&indexed, |&(i, c)| {
        let st = resolution_study_on(c.alpha, c.beta, c.s, &cfg.noise_levels, cfg.trials, seed.wrapping_add(i as u64), cfg.domain)?;
        Ok((c, st))
    })
    .into_iter()
    .collect()
}
