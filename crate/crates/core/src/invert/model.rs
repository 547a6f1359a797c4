//! Forward models seen by the optimizer: flat parameter vectors, a data
//! grid, and adjoints returning Riesz representatives in the parameter
//! inner product.

use crate::error::{Error, Result};
use crate::fourier;
use crate::grid::{Density, Grid, GridFn};
use crate::models::{convolve, pat_forward_field, pat_gradient_adjoint, DiffusionProblem, KernelSpec};
use crate::sobolev::{apply_diagonal, DiagonalOperator};

pub trait ForwardModel: Sync {
    fn data_grid(&self) -> &Grid;

    /// Grid of the parameter field, when the parameters are one.
    fn param_grid(&self) -> Option<&Grid>;

    fn param_len(&self) -> usize;

    /// Weights of the parameter inner product.
    fn param_weights(&self) -> Vec<f64>;

    fn forward(&self, m: &[f64]) -> Result<GridFn>;

    /// Riesz representative of `δm ↦ ⟨f'(m) δm, r⟩` (data quadrature).
    fn adjoint(&self, m: &[f64], r: &GridFn) -> Result<Vec<f64>>;

    /// Projection onto admissible parameters, applied after every step.
    fn clip(&self, _m: &mut [f64]) {}

    /// Whether `f(c m) = c f(m)` for `c > 0`.
    fn homogeneous(&self) -> bool {
        false
    }

    /// Whether `∫ f(m)` is the same for every `m`.
    fn preserves_mass(&self) -> bool {
        false
    }

    /// Whether random test directions should have zero mean (field models).
    fn zero_mean_directions(&self) -> bool {
        self.param_grid().is_some()
    }
}

fn field(grid: &Grid, m: &[f64]) -> Result<GridFn> {
    GridFn::new(grid.clone(), m.to_vec())
}

/// `f(m) = A m` with the diagonal symbol `<ξ>^{-α}` on a periodic grid.
#[derive(Clone, Debug)]
pub struct DiagonalModel {
    pub grid: Grid,
    pub op: DiagonalOperator,
}

impl DiagonalModel {
    pub fn new(grid: Grid, alpha: f64) -> Result<Self> {
        grid.ensure_periodic()?;
        Ok(Self { grid, op: DiagonalOperator::new(alpha) })
    }
}

impl ForwardModel for DiagonalModel {
    fn homogeneous(&self) -> bool {
        true
    }
    fn data_grid(&self) -> &Grid {
        &self.grid
    }
    fn param_grid(&self) -> Option<&Grid> {
        Some(&self.grid)
    }
    fn param_len(&self) -> usize {
        self.grid.len()
    }
    fn param_weights(&self) -> Vec<f64> {
        self.grid.weights()
    }
    fn forward(&self, m: &[f64]) -> Result<GridFn> {
        apply_diagonal(&self.op, &field(&self.grid, m)?)
    }
    fn adjoint(&self, _m: &[f64], r: &GridFn) -> Result<Vec<f64>> {
        Ok(apply_diagonal(&self.op, r)?.into_values())
    }
}

/// Finite-interval convolution `f(m) = K * m`, optionally clipped at a
/// nonnegative floor.
#[derive(Clone, Debug)]
pub struct ConvolutionModel {
    pub grid: Grid,
    pub kernel: KernelSpec,
    pub lower: Option<f64>,
}

impl ConvolutionModel {
    pub fn new(grid: Grid, kernel: KernelSpec) -> Result<Self> {
        let _ = kernel.evaluator(grid.dim())?;
        Ok(Self { grid, kernel, lower: None })
    }

    pub fn with_lower_bound(mut self, lower: f64) -> Self {
        self.lower = Some(lower);
        self
    }
}

impl ForwardModel for ConvolutionModel {
    fn homogeneous(&self) -> bool {
        true
    }
    fn data_grid(&self) -> &Grid {
        &self.grid
    }
    fn param_grid(&self) -> Option<&Grid> {
        Some(&self.grid)
    }
    fn param_len(&self) -> usize {
        self.grid.len()
    }
    fn param_weights(&self) -> Vec<f64> {
        self.grid.weights()
    }
    fn forward(&self, m: &[f64]) -> Result<GridFn> {
        convolve(&field(&self.grid, m)?, &self.kernel, false)
    }
    fn adjoint(&self, _m: &[f64], r: &GridFn) -> Result<Vec<f64>> {
        Ok(convolve(r, &self.kernel, true)?.into_values())
    }
    fn clip(&self, m: &mut [f64]) {
        if let Some(lo) = self.lower {
            m.iter_mut().for_each(|v| *v = v.max(lo));
        }
    }
}

/// Rigid translation `f(a) = φ(· - a)` of a fixed periodic profile; the
/// parameters are the shift components.
#[derive(Clone, Debug)]
pub struct FlowModel {
    pub phi: Density,
    dphi: Vec<Vec<f64>>,
}

impl FlowModel {
    pub fn new(phi: Density) -> Result<Self> {
        let grid = phi.grid();
        grid.ensure_periodic()?;
        let dphi = (0..grid.dim())
            .map(|a| fourier::derivative(grid, phi.values(), a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { phi, dphi })
    }

    fn shift_of(&self, m: &[f64]) -> Result<[f64; 2]> {
        let d = self.phi.grid().dim();
        if m.len() != d {
            return Err(Error::InvalidInput(format!("flow model expects {d} shift components, got {}", m.len())));
        }
        Ok([m[0], if d == 2 { m[1] } else { 0.0 }])
    }
}

impl ForwardModel for FlowModel {
    fn data_grid(&self) -> &Grid {
        self.phi.grid()
    }
    fn param_grid(&self) -> Option<&Grid> {
        None
    }
    fn param_len(&self) -> usize {
        self.phi.grid().dim()
    }
    fn param_weights(&self) -> Vec<f64> {
        vec![1.0; self.param_len()]
    }
    fn preserves_mass(&self) -> bool {
        true
    }
    fn forward(&self, m: &[f64]) -> Result<GridFn> {
        let a = self.shift_of(m)?;
        let grid = self.phi.grid();
        GridFn::new(grid.clone(), fourier::shift(grid, self.phi.values(), a)?)
    }
    fn adjoint(&self, m: &[f64], r: &GridFn) -> Result<Vec<f64>> {
        let a = self.shift_of(m)?;
        let grid = self.phi.grid();
        self.dphi
            .iter()
            .map(|d| {
                let moved = GridFn::new(grid.clone(), fourier::shift(grid, d, a)?)?;
                Ok(-moved.dot(r)?)
            })
            .collect()
    }
}

/// Photoacoustic data `σ u(σ)` as a function of the absorption `σ`.
#[derive(Clone, Debug)]
pub struct PatModel {
    pub problem: DiffusionProblem,
    pub floor: f64,
}

impl PatModel {
    pub fn new(problem: DiffusionProblem, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(Error::InvalidInput(format!("absorption floor must be positive, got {floor}")));
        }
        Ok(Self { problem, floor })
    }

    fn at(&self, m: &[f64]) -> Result<DiffusionProblem> {
        self.problem.with_sigma(field(self.problem.grid(), m)?)
    }
}

impl ForwardModel for PatModel {
    fn data_grid(&self) -> &Grid {
        self.problem.grid()
    }
    fn param_grid(&self) -> Option<&Grid> {
        Some(self.problem.grid())
    }
    fn param_len(&self) -> usize {
        self.problem.grid().len()
    }
    fn param_weights(&self) -> Vec<f64> {
        self.problem.grid().weights()
    }
    fn forward(&self, m: &[f64]) -> Result<GridFn> {
        pat_forward_field(&self.at(m)?)
    }
    fn adjoint(&self, m: &[f64], r: &GridFn) -> Result<Vec<f64>> {
        Ok(pat_gradient_adjoint(&self.at(m)?, r)?.into_values())
    }
    fn clip(&self, m: &mut [f64]) {
        m.iter_mut().for_each(|v| *v = v.max(self.floor));
    }
}
