//! Projected steepest descent with Armijo backtracking.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metric::{data_kernel, evaluate_objective_with, MetricOptions, MismatchSpec};
use super::model::ForwardModel;
use crate::error::{Error, Result};
use crate::grid::GridFn;

/// Initial trial step of each line search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum StepPolicy {
    Fixed { step: f64 },
    /// Previous accepted step times `growth`.
    Previous { initial: f64, growth: f64 },
    /// Barzilai-Borwein (long) step, `initial` on the first iteration.
    BarzilaiBorwein { initial: f64 },
}

impl StepPolicy {
    fn first(&self) -> f64 {
        match *self {
            StepPolicy::Fixed { step } => step,
            StepPolicy::Previous { initial, .. } | StepPolicy::BarzilaiBorwein { initial } => initial,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    pub max_iter: usize,
    /// Stop when the gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop when the objective falls below this.
    pub objective_tol: f64,
    pub c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub min_step: f64,
    pub step: StepPolicy,
    /// Keep `m_k` every this many iterations (0 disables snapshots).
    pub snapshot_every: usize,
    pub metric: MetricOptions,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-10,
            objective_tol: 0.0,
            c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            min_step: 1e-20,
            step: StepPolicy::BarzilaiBorwein { initial: 1.0 },
            snapshot_every: 0,
            metric: MetricOptions::default(),
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(Error::InvalidInput(format!("Armijo c1 must lie in (0, 1), got {}", self.c1)));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidInput(format!("backtrack factor must lie in (0, 1), got {}", self.backtrack)));
        }
        let s = self.step.first();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("initial step must be positive, got {s}")));
        }
        if let StepPolicy::Previous { growth, .. } = self.step {
            if !(growth >= 1.0 && growth.is_finite()) {
                return Err(Error::InvalidInput(format!("step growth must be >= 1, got {growth}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradTol,
    ObjectiveTol,
    MaxIter,
    StepUnderflow,
    LineSearchFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    /// Step accepted to reach this iterate (0 for the start).
    pub step: f64,
    /// Norm of the descent direction (the projected gradient for
    /// mass-normalized metrics).
    pub gradnorm: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub final_m: Vec<f64>,
    pub termination: Termination,
    /// The descent direction is the plain gradient; the inverse model
    /// Hessian prefactor of the continuous update is not applied.
    pub hessian_prefactor_omitted: bool,
}

impl InversionTrace {
    pub fn final_objective(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// Objective and its Riesz gradient in the parameter inner product.
pub fn objective_and_gradient(
    model: &dyn ForwardModel,
    spec: &MismatchSpec,
    m: &[f64],
    g: &GridFn,
    opts: &MetricOptions,
) -> Result<(f64, Vec<f64>)> {
    let f = model.forward(m)?;
    let (value, kernel) = data_kernel(spec, &f, g, opts)?;
    Ok((value, model.adjoint(m, &kernel)?))
}

/// Gradient of `Φ(f(m), g)` for a field model, as a field on the parameter
/// grid.
pub fn gradient_wrt_model(model: &dyn ForwardModel, spec: &MismatchSpec, m: &GridFn, g: &GridFn) -> Result<GridFn> {
    let grid = model
        .param_grid()
        .ok_or_else(|| Error::InvalidInput("model parameters are not a field".into()))?;
    m.grid().ensure_same(grid)?;
    let (_, grad) = objective_and_gradient(model, spec, m.values(), g, &MetricOptions::default())?;
    GridFn::new(grid.clone(), grad)
}

pub fn objective_at(model: &dyn ForwardModel, spec: &MismatchSpec, m: &[f64], g: &GridFn, opts: &MetricOptions) -> Result<f64> {
    evaluate_objective_with(spec, &model.forward(m)?, g, opts)
}

fn wdot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum()
}

/// Steepest-descent direction. For mass-normalized metrics the component
/// along `q = f'(m)^*[1]` is removed, so a step leaves `∫ f(m)` unchanged to
/// first order; the objective is blind to that direction.
fn descent_direction(
    model: &dyn ForwardModel,
    spec: &MismatchSpec,
    m: &[f64],
    grad: Vec<f64>,
    w: &[f64],
    opts: &MetricOptions,
) -> Result<Vec<f64>> {
    if !(opts.normalize && spec.needs_normalization()) || model.preserves_mass() {
        return Ok(grad);
    }
    let ones = GridFn::constant(model.data_grid(), 1.0);
    let q = model.adjoint(m, &ones)?;
    let qq = wdot(&q, &q, w);
    if !(qq > 0.0) {
        return Ok(grad);
    }
    let c = wdot(&grad, &q, w) / qq;
    Ok(grad.iter().zip(&q).map(|(a, b)| a - c * b).collect())
}

/// For homogeneous models under a mass-normalized metric, rescale `m` so the
/// prediction carries the data mass. The objective cannot see this scale, and
/// without pinning it the clipping at a lower bound lets it drift.
fn pin_scale(model: &dyn ForwardModel, spec: &MismatchSpec, m: &mut [f64], target: f64, opts: &MetricOptions) -> Result<()> {
    if !(opts.normalize && spec.needs_normalization() && model.homogeneous()) {
        return Ok(());
    }
    let have = crate::grid::mass(&model.forward(m)?);
    if have > 0.0 && target > 0.0 {
        let c = target / have;
        m.iter_mut().for_each(|v| *v *= c);
        model.clip(m);
    }
    Ok(())
}

pub fn run_inversion(
    model: &dyn ForwardModel,
    spec: &MismatchSpec,
    g: &GridFn,
    m0: &[f64],
    cfg: &InversionConfig,
) -> Result<InversionTrace> {
    cfg.validate()?;
    spec.validate()?;
    if m0.len() != model.param_len() {
        return Err(Error::InvalidInput(format!("{} initial parameters for a model with {}", m0.len(), model.param_len())));
    }
    g.grid().ensure_same(model.data_grid())?;
    let start = Instant::now();
    let w = model.param_weights();
    let mut m = m0.to_vec();
    model.clip(&mut m);
    let target_mass = crate::grid::mass(g);
    pin_scale(model, spec, &mut m, target_mass, &cfg.metric)?;
    let (mut phi, grad) = objective_and_gradient(model, spec, &m, g, &cfg.metric)?;
    let mut grad = descent_direction(model, spec, &m, grad, &w, &cfg.metric)?;
    let mut gnorm = wdot(&grad, &grad, &w).sqrt();
    let mut rows = vec![TraceRow { iter: 0, objective: phi, step: 0.0, gradnorm: gnorm, wall_seconds: 0.0 }];
    let mut snapshots = Vec::new();
    if cfg.snapshot_every > 0 {
        snapshots.push((0, m.clone()));
    }
    let mut last_step = cfg.step.first();
    let mut bb: Option<f64> = None;
    let mut termination = Termination::MaxIter;
    for iter in 1..=cfg.max_iter {
        if phi <= cfg.objective_tol {
            termination = Termination::ObjectiveTol;
            break;
        }
        if gnorm <= cfg.grad_tol {
            termination = Termination::GradTol;
            break;
        }
        let mut step = match cfg.step {
            StepPolicy::Fixed { step } => step,
            StepPolicy::Previous { growth, .. } => last_step * growth,
            StepPolicy::BarzilaiBorwein { initial } => bb.unwrap_or(initial),
        };
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            if step < cfg.min_step {
                break;
            }
            let mut trial: Vec<f64> = m.iter().zip(&grad).map(|(a, d)| a - step * d).collect();
            model.clip(&mut trial);
            let dm: Vec<f64> = trial.iter().zip(&m).map(|(a, b)| a - b).collect();
            // projected Armijo: sufficient decrease against the actual move
            let decrease = -wdot(&grad, &dm, &w);
            if let Ok(val) = objective_at(model, spec, &trial, g, &cfg.metric) {
                if val.is_finite() && val <= phi - cfg.c1 * decrease && decrease > 0.0 {
                    accepted = Some((trial, val, step));
                    break;
                }
            }
            step *= cfg.backtrack;
        }
        let Some((mut trial, _, step)) = accepted else {
            termination = if step < cfg.min_step { Termination::StepUnderflow } else { Termination::LineSearchFailure };
            break;
        };
        if pin_scale(model, spec, &mut trial, target_mass, &cfg.metric).is_err() {
            termination = Termination::LineSearchFailure;
            break;
        }
        let next = objective_and_gradient(model, spec, &trial, g, &cfg.metric)
            .and_then(|(v, gr)| Ok((v, descent_direction(model, spec, &trial, gr, &w, &cfg.metric)?)));
        let (val, new_grad) = match next {
            Ok(r) => r,
            Err(_) => {
                termination = Termination::LineSearchFailure;
                break;
            }
        };
        let s: Vec<f64> = trial.iter().zip(&m).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = wdot(&s, &y, &w);
        bb = if sy > 0.0 { Some(wdot(&s, &s, &w) / sy) } else { None };
        last_step = step;
        m = trial;
        phi = val;
        grad = new_grad;
        gnorm = wdot(&grad, &grad, &w).sqrt();
        rows.push(TraceRow { iter, objective: phi, step, gradnorm: gnorm, wall_seconds: start.elapsed().as_secs_f64() });
        if cfg.snapshot_every > 0 && iter % cfg.snapshot_every == 0 {
            snapshots.push((iter, m.clone()));
        }
        if iter == cfg.max_iter {
            termination = if phi <= cfg.objective_tol {
                Termination::ObjectiveTol
            } else if gnorm <= cfg.grad_tol {
                Termination::GradTol
            } else {
                Termination::MaxIter
            };
        }
    }
    Ok(InversionTrace { rows, snapshots, final_m: m, termination, hessian_prefactor_omitted: true })
}
