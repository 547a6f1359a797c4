//! Robin diffusion model `-∇·(γ∇u) + σu = 0`, `γ ∂_n u + κu = h`, and the
//! PAT datum `σu` with its adjoint-state gradient.
//!
//! Second-order centred differences with ghost-node Robin closure, scaled by
//! the trapezoid weights so the system matrix is symmetric. Axis closures
//! add independently, so a corner carries the contribution of both edges.

use crate::error::{Error, Result};
use crate::grid::{Density, Grid, GridFn};
use crate::linalg::SymBanded;

pub const DEFAULT_GAMMA: f64 = 0.02;
pub const DEFAULT_KAPPA: f64 = 1.0;
pub const DEFAULT_SOURCE: f64 = 1.0;
/// Acceptable relative residual of the direct solve.
pub const SOLVE_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionProblem {
    grid: Grid,
    gamma: f64,
    kappa: f64,
    /// Boundary data `h`; only boundary samples are read.
    source: GridFn,
    sigma: GridFn,
}

impl DiffusionProblem {
    pub fn new(gamma: f64, kappa: f64, source: GridFn, sigma: GridFn) -> Result<Self> {
        let grid = sigma.grid().clone();
        if grid.is_periodic() {
            return Err(Error::GridMismatch("diffusion model needs the endpoint convention".into()));
        }
        grid.ensure_same(source.grid())?;
        if !(gamma > 0.0) || !(kappa > 0.0) {
            return Err(Error::InvalidInput(format!("need gamma, kappa > 0, got {gamma}, {kappa}")));
        }
        if source.min() < 0.0 {
            return Err(Error::InvalidInput("boundary source must be nonnegative".into()));
        }
        if !(sigma.min() > 0.0) {
            return Err(Error::NonpositiveWeight(sigma.min()));
        }
        Ok(Self { grid, gamma, kappa, source, sigma })
    }

    /// Defaults `γ = 0.02`, `κ = 1`, `h = 1`.
    pub fn with_defaults(sigma: GridFn) -> Result<Self> {
        let h = GridFn::constant(sigma.grid(), DEFAULT_SOURCE);
        Self::new(DEFAULT_GAMMA, DEFAULT_KAPPA, h, sigma)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn source(&self) -> &GridFn {
        &self.source
    }

    pub fn sigma(&self) -> &GridFn {
        &self.sigma
    }

    pub fn with_sigma(&self, sigma: GridFn) -> Result<Self> {
        Self::new(self.gamma, self.kappa, self.source.clone(), sigma)
    }

    pub fn with_source(&self, source: GridFn) -> Result<Self> {
        Self::new(self.gamma, self.kappa, source, self.sigma.clone())
    }

    /// Symmetric system matrix `M(σ)` and right side `b` with `M u = b`.
    fn assemble(&self) -> (SymBanded, Vec<f64>) {
        let g = &self.grid;
        let (nx, ny) = (g.n(0), g.n(1));
        let d2 = g.dim() == 2;
        let wx = g.axis_weights(0);
        let wy = if d2 { g.axis_weights(1) } else { vec![1.0] };
        let mut m = SymBanded::zeros(g.len(), if d2 { nx } else { 1 });
        let mut rhs = vec![0.0; g.len()];
        let w = g.weights();
        for k in 0..g.len() {
            m.add(k, k, w[k] * self.sigma.values()[k]);
        }
        // x-direction stiffness and closure, weighted by the y cell length.
        let cx = self.gamma / g.h(0);
        for j in 0..ny {
            for i in 0..nx - 1 {
                let (a, b) = (g.index(i, j), g.index(i + 1, j));
                m.add(a, a, cx * wy[j]);
                m.add(b, b, cx * wy[j]);
                m.add(a, b, -cx * wy[j]);
            }
            for i in [0, nx - 1] {
                let k = g.index(i, j);
                m.add(k, k, self.kappa * wy[j]);
                rhs[k] += self.source.values()[k] * wy[j];
            }
        }
        if d2 {
            let cy = self.gamma / g.h(1);
            for i in 0..nx {
                for j in 0..ny - 1 {
                    let (a, b) = (g.index(i, j), g.index(i, j + 1));
                    m.add(a, a, cy * wx[i]);
                    m.add(b, b, cy * wx[i]);
                    m.add(a, b, -cy * wx[i]);
                }
                for j in [0, ny - 1] {
                    let k = g.index(i, j);
                    m.add(k, k, self.kappa * wx[i]);
                    rhs[k] += self.source.values()[k] * wx[i];
                }
            }
        }
        (m, rhs)
    }
}

fn solve_checked(m: &SymBanded, b: &[f64]) -> Result<Vec<f64>> {
    let x = m.cholesky().map_err(|e| Error::SolverFailure(e.to_string()))?.solve(b);
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bn > 0.0 {
        let r = m.mul_vec(&x);
        let rn = r.iter().zip(b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        if rn > SOLVE_RTOL * bn * 1e2 {
            return Err(Error::SolverFailure(format!("relative residual {:e}", rn / bn)));
        }
    }
    Ok(x)
}

pub fn diffusion_solve(p: &DiffusionProblem) -> Result<GridFn> {
    let (m, b) = p.assemble();
    GridFn::new(p.grid.clone(), solve_checked(&m, &b)?)
}

/// `f(σ) = σ u(σ)`.
pub fn pat_forward(p: &DiffusionProblem) -> Result<Density> {
    let u = diffusion_solve(p)?;
    let f = u.zip_map(&p.sigma, |u, s| (u * s).max(0.0))?;
    if f.max() == 0.0 {
        return Err(Error::AllZeroInput);
    }
    Density::new(f)
}

/// Same as [`pat_forward`] but as a plain field (allowed to vanish).
pub fn pat_forward_field(p: &DiffusionProblem) -> Result<GridFn> {
    let u = diffusion_solve(p)?;
    u.zip_map(&p.sigma, |u, s| u * s)
}

/// Riesz representative (quadrature inner product) of `δσ ↦ ⟨f'(σ)δσ, w⟩`:
/// `u w - u q` with `M(σ) q = W (σ w)`.
pub fn pat_gradient_adjoint(p: &DiffusionProblem, w: &GridFn) -> Result<GridFn> {
    p.grid.ensure_same(w.grid())?;
    let (m, b) = p.assemble();
    let chol = m.cholesky().map_err(|e| Error::SolverFailure(e.to_string()))?;
    let u = chol.solve(&b);
    let wq = p.grid.weights();
    let rhs: Vec<f64> = (0..u.len()).map(|k| wq[k] * p.sigma.values()[k] * w.values()[k]).collect();
    let q = chol.solve(&rhs);
    let out = (0..u.len()).map(|k| u[k] * w.values()[k] - u[k] * q[k]).collect();
    GridFn::new(p.grid.clone(), out)
}

/// Closed-form 1D solution on `[0, 1]` with constant `σ` and equal data
/// `h` at both ends: `u = A cosh(k (x - 1/2))`, `k = sqrt(σ/γ)`.
pub fn closed_form_1d(gamma: f64, kappa: f64, sigma: f64, h: f64, x: f64) -> f64 {
    let k = (sigma / gamma).sqrt();
    let a = h / (gamma * k * (0.5 * k).sinh() + kappa * (0.5 * k).cosh());
    a * (k * (x - 0.5)).cosh()
}
