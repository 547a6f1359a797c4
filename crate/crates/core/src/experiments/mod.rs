//! Config-driven experiment drivers that write CSV/JSON artifacts and a
//! manifest.
//!
//! Every run writes `summary.json` and `manifest.json` under the output
//! directory. The manifest lists each artifact with its SHA-256, the
//! canonical config hash, the seed and the per-step status.

pub mod common;
pub mod deconvolve;
pub mod gaussian_expansion;
pub mod invert_pde;
pub mod landscape;
pub mod project_locate;
pub mod resolution;
pub mod suite;
pub mod transport_1d;
pub mod w2_compute;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::{sha256_hex, ArtifactRecord, ArtifactWriter};
use common::{spectrum_rows, StepRecord, Steps};
use deconvolve::{deconvolve, DeconvolveConfig};
use gaussian_expansion::{gaussian_expansion, GaussianExpansionConfig};
use invert_pde::{invert_pde, InvertPdeConfig};
use landscape::{landscape_scan, LandscapeConfig};
use project_locate::{project_locate, ProjectLocateConfig};
use resolution::{resolution, ResolutionConfig};
use suite::{variant_tag, SuiteResult};
use transport_1d::{transport_1d, Transport1dConfig};
use w2_compute::{monge_ampere_check, point_source_study, W2ComputeConfig};

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Deconvolve,
    InvertPde,
    Landscape,
    ResolutionStudy,
    #[serde(rename = "transport-1d")]
    Transport1d,
    W2Compute,
    GaussianExpansion,
    ProjectLocate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Deconvolve,
        ExperimentKind::InvertPde,
        ExperimentKind::Landscape,
        ExperimentKind::ResolutionStudy,
        ExperimentKind::Transport1d,
        ExperimentKind::W2Compute,
        ExperimentKind::GaussianExpansion,
        ExperimentKind::ProjectLocate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Deconvolve => "deconvolve",
            ExperimentKind::InvertPde => "invert-pde",
            ExperimentKind::Landscape => "landscape",
            ExperimentKind::ResolutionStudy => "resolution-study",
            ExperimentKind::Transport1d => "transport-1d",
            ExperimentKind::W2Compute => "w2-compute",
            ExperimentKind::GaussianExpansion => "gaussian-expansion",
            ExperimentKind::ProjectLocate => "project-locate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            Error::InvalidInput(format!("unknown experiment `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

/// Parameter block of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "params", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Deconvolve(DeconvolveConfig),
    InvertPde(InvertPdeConfig),
    Landscape(LandscapeConfig),
    ResolutionStudy(ResolutionConfig),
    #[serde(rename = "transport-1d")]
    Transport1d(Transport1dConfig),
    W2Compute(W2ComputeConfig),
    GaussianExpansion(GaussianExpansionConfig),
    ProjectLocate(ProjectLocateConfig),
}

impl ExperimentConfig {
    pub fn default_for(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Deconvolve => Self::Deconvolve(Default::default()),
            ExperimentKind::InvertPde => Self::InvertPde(Default::default()),
            ExperimentKind::Landscape => Self::Landscape(Default::default()),
            ExperimentKind::ResolutionStudy => Self::ResolutionStudy(Default::default()),
            ExperimentKind::Transport1d => Self::Transport1d(Default::default()),
            ExperimentKind::W2Compute => Self::W2Compute(Default::default()),
            ExperimentKind::GaussianExpansion => Self::GaussianExpansion(Default::default()),
            ExperimentKind::ProjectLocate => Self::ProjectLocate(Default::default()),
        }
    }

    /// Parse a parameter block for `kind`; missing fields take defaults and
    /// unknown fields are rejected.
    pub fn from_json(kind: ExperimentKind, text: &str) -> Result<Self> {
        fn p<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
            Ok(serde_json::from_str(text)?)
        }
        let cfg = match kind {
            ExperimentKind::Deconvolve => Self::Deconvolve(p(text)?),
            ExperimentKind::InvertPde => Self::InvertPde(p(text)?),
            ExperimentKind::Landscape => Self::Landscape(p(text)?),
            ExperimentKind::ResolutionStudy => Self::ResolutionStudy(p(text)?),
            ExperimentKind::Transport1d => Self::Transport1d(p(text)?),
            ExperimentKind::W2Compute => Self::W2Compute(p(text)?),
            ExperimentKind::GaussianExpansion => Self::GaussianExpansion(p(text)?),
            ExperimentKind::ProjectLocate => Self::ProjectLocate(p(text)?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::Deconvolve(_) => ExperimentKind::Deconvolve,
            Self::InvertPde(_) => ExperimentKind::InvertPde,
            Self::Landscape(_) => ExperimentKind::Landscape,
            Self::ResolutionStudy(_) => ExperimentKind::ResolutionStudy,
            Self::Transport1d(_) => ExperimentKind::Transport1d,
            Self::W2Compute(_) => ExperimentKind::W2Compute,
            Self::GaussianExpansion(_) => ExperimentKind::GaussianExpansion,
            Self::ProjectLocate(_) => ExperimentKind::ProjectLocate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Deconvolve(c) => c.validate(),
            Self::InvertPde(c) => c.validate(),
            Self::Landscape(c) => c.validate(),
            Self::ResolutionStudy(c) => c.validate(),
            Self::Transport1d(c) => c.validate(),
            Self::W2Compute(c) => c.validate(),
            Self::GaussianExpansion(c) => c.validate(),
            Self::ProjectLocate(c) => c.validate(),
        }
    }

    /// Canonical JSON: every field written out, defaults included.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn sha256(&self) -> Result<String> {
        Ok(sha256_hex(self.canonical_json()?.as_bytes()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub config_sha256: String,
    /// Resolved config, defaults included.
    pub config: Value,
    pub versions: BTreeMap<String, String>,
    pub artifacts: Vec<ArtifactRecord>,
    pub steps: Vec<StepRecord>,
}

impl Manifest {
    pub fn ok(&self) -> bool {
        self.steps.iter().all(|s| s.ok)
    }

    pub fn failed_steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().filter(|s| !s.ok)
    }
}

pub fn component_versions() -> BTreeMap<String, String> {
    let v = env!("CARGO_PKG_VERSION").to_string();
    ["grid_core", "sobolev", "transport1d", "transport_nd", "models", "invert", "cli"]
        .into_iter()
        .map(|c| (c.to_string(), v.clone()))
        .chain([("otmatch".to_string(), v.clone())])
        .collect()
}

/// Run `cfg` and write its artifacts under `out`. Invalid configs fail
/// before any compute; failures after that are recorded as manifest steps.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<Manifest> {
    cfg.validate()?;
    let mut w = ArtifactWriter::new(out)?;
    let mut steps = Steps::default();
    let kind = cfg.kind();
    let result = match cfg {
        ExperimentConfig::Deconvolve(c) => run_deconvolve(c, seed, &mut w, &mut steps),
        ExperimentConfig::InvertPde(c) => run_invert_pde(c, seed, &mut w, &mut steps),
        ExperimentConfig::Landscape(c) => run_landscape(c, &mut w),
        ExperimentConfig::ResolutionStudy(c) => run_resolution(c, seed, &mut w),
        ExperimentConfig::Transport1d(c) => run_transport_1d(c, &mut w),
        ExperimentConfig::W2Compute(c) => run_w2_compute(c, seed, &mut w, &mut steps),
        ExperimentConfig::GaussianExpansion(c) => run_gaussian_expansion(c, &mut w),
        ExperimentConfig::ProjectLocate(c) => run_project_locate(c, &mut w),
    };
    let summary = steps.record(kind.name(), result).unwrap_or(Value::Null);
    w.json("summary.json", &summary)?;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        experiment: kind,
        seed,
        config_sha256: cfg.sha256()?,
        config: serde_json::to_value(cfg)?,
        versions: component_versions(),
        artifacts: w.artifacts().to_vec(),
        steps: steps.records,
    };
    w.json("manifest.json", &manifest)?;
    Ok(manifest)
}

fn write_suite(r: &SuiteResult, w: &mut ArtifactWriter, steps: &mut Steps) -> Result<Value> {
    w.gridfn("truth.csv", &r.truth)?;
    for (lvl, d) in &r.data {
        w.gridfn(&format!("data/noise{lvl}.csv"), d)?;
    }
    let mut summaries = Vec::new();
    for v in &r.variants {
        let tag = variant_tag(v.noise, &v.metric);
        match &v.outcome {
            Ok((s, recon, tr)) => {
                w.gridfn(&format!("recon/{tag}.csv"), recon)?;
                w.trace(&format!("traces/{tag}.csv"), tr)?;
                w.records(&format!("spectra/{tag}.csv"), &spectrum_rows(recon)?)?;
                summaries.push(s.clone());
                steps.records.push(StepRecord { name: format!("invert {tag}"), ok: true, error: None });
            }
            Err(e) => steps.records.push(StepRecord { name: format!("invert {tag}"), ok: false, error: Some(e.clone()) }),
        }
    }
    w.records("variants.csv", &summaries)?;
    Ok(json!({ "variants": summaries }))
}

fn run_deconvolve(c: &DeconvolveConfig, seed: u64, w: &mut ArtifactWriter, steps: &mut Steps) -> Result<Value> {
    let r = deconvolve(c, seed)?;
    write_suite(&r, w, steps)
}

fn run_invert_pde(c: &InvertPdeConfig, seed: u64, w: &mut ArtifactWriter, steps: &mut Steps) -> Result<Value> {
    let r = invert_pde(c, seed)?;
    w.diffusion_problem("problem", &r.problem)?;
    let mut summary = write_suite(&r.suite, w, steps)?;
    if let Some(st) = &r.gradients {
        w.gridfn("gradients/truth.csv", &st.truth)?;
        w.gridfn("gradients/data.csv", &st.data)?;
        let mut rows = Vec::new();
        for e in &st.entries {
            let label = e.metric.label();
            match &e.outcome {
                Ok((s, gr, spec)) => {
                    w.gridfn(&format!("gradients/{label}.csv"), gr)?;
                    w.records(&format!("gradients/spectrum_{label}.csv"), spec)?;
                    rows.push(s.clone());
                    steps.records.push(StepRecord { name: format!("gradient {label}"), ok: true, error: None });
                }
                Err(err) => steps.records.push(StepRecord { name: format!("gradient {label}"), ok: false, error: Some(err.clone()) }),
            }
        }
        w.records("gradients/summary.csv", &rows)?;
        summary["gradients"] = serde_json::to_value(&rows)?;
    }
    Ok(summary)
}

fn run_landscape(c: &LandscapeConfig, w: &mut ArtifactWriter) -> Result<Value> {
    let r = landscape_scan(c)?;
    w.records("surface.csv", &r.surface)?;
    w.records("diagonal.csv", &r.diagonal)?;
    Ok(json!({ "diagnostics": r.diagnostics }))
}

fn run_resolution(c: &ResolutionConfig, seed: u64, w: &mut ArtifactWriter) -> Result<Value> {
    let studies = resolution(c, seed)?;
    let mut out = Vec::new();
    for (i, (case, st)) in studies.iter().enumerate() {
        w.records(&format!("case{i}.csv"), &st.rows)?;
        w.json(&format!("case{i}.json"), &st.summary)?;
        out.push(json!({ "case": case, "summary": st.summary }));
    }
    Ok(json!({ "cases": out }))
}

fn run_transport_1d(c: &Transport1dConfig, w: &mut ArtifactWriter) -> Result<Value> {
    let r = transport_1d(c)?;
    // one column per metric
    let mut csv = String::from("shift");
    for m in &c.metrics {
        csv.push(',');
        csv.push_str(&m.label());
    }
    csv.push('\n');
    for row in &r.scan {
        csv.push_str(&row.shift.to_string());
        for v in &row.values {
            csv.push(',');
            csv.push_str(&v.to_string());
        }
        csv.push('\n');
    }
    w.bytes("scan.csv", csv.as_bytes())?;
    w.records("inversions.csv", &r.inversions)?;
    Ok(json!({ "diagnostics": r.diagnostics, "inversions": r.inversions }))
}

fn run_w2_compute(c: &W2ComputeConfig, seed: u64, w: &mut ArtifactWriter, steps: &mut Steps) -> Result<Value> {
    let rows = point_source_study(&c.point_source, seed)?;
    w.records("point_source.csv", &rows)?;
    let max_err = |k: &str| rows.iter().filter(|r| r.kernel == k).map(|r| r.abs_error).fold(0.0, f64::max);
    let mut summary = json!({
        "point_source_max_abs_error": { "laplace": max_err("laplace"), "inverse_distance": max_err("inverse_distance") },
    });
    if c.monge_ampere.enabled {
        if let Some(ma) = steps.record("monge-ampere", monge_ampere_check(&c.monge_ampere, seed)) {
            w.records("monge_ampere.csv", &ma)?;
            summary["monge_ampere"] = serde_json::to_value(&ma)?;
        }
    }
    Ok(summary)
}

fn run_gaussian_expansion(c: &GaussianExpansionConfig, w: &mut ArtifactWriter) -> Result<Value> {
    let r = gaussian_expansion(c)?;
    w.records("expansion.csv", &r.rows)?;
    Ok(json!({ "summary": r.summary }))
}

fn run_project_locate(c: &ProjectLocateConfig, w: &mut ArtifactWriter) -> Result<Value> {
    let r = project_locate(c)?;
    w.records("scans.csv", &r.scans)?;
    Ok(json!({ "summary": r.summary }))
}
