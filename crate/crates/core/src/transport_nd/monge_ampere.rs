//! 2D Monge-Ampère solver for the Brenier potential, its adjoint, and the
//! resulting `W2` gradient kernel.
//!
//! The potential is `u = |x|^2/2 + b·x + v` with `v` periodic on the grid
//! and `T = x + b + ∇v`. The solver keeps `b = 0`, the optimal map on the
//! torus; any other `b` also pushes `f` to `g` but at a higher cost.

use serde::{Deserialize, Serialize};

use super::periodic::{grad, hessian, inverse_laplacian, solve_divergence, PeriodicInterp, Tensor};
use crate::error::{Error, Result};
use crate::grid::{Density, Grid, GridFn};
use crate::par;

/// Adjoint CG tolerance.
pub const ADJOINT_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Damping `θ ∈ (0, 1]` of the fixed-point update.
    pub damping: f64,
    /// Hessian eigenvalues are clamped from below to this value.
    pub clamp: f64,
    /// Floor on interpolated target values, relative to `max g`.
    pub target_floor: f64,
}

impl Default for MaConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 2000, damping: 1.0, clamp: 1e-6, target_floor: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaDiagnostics {
    pub iterations: usize,
    pub residual_linf: f64,
    pub damping: f64,
    pub clamped_nodes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MongeAmpereSolution {
    /// Mean-zero convex potential.
    pub u: GridFn,
    /// Periodic part `v`.
    pub v: GridFn,
    pub b: [f64; 2],
    pub tx: GridFn,
    pub ty: GridFn,
    /// `L∞` norm of `det(D^2 u) g(∇u) - f` (unit-mass densities).
    pub residual: f64,
    pub diagnostics: MaDiagnostics,
    pub converged: bool,
    hess: [Vec<f64>; 3],
    g_at_t: Vec<f64>,
}

impl MongeAmpereSolution {
    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// `(u_xx, u_yy, u_xy)` at the nodes.
    pub fn hessian(&self) -> &[Vec<f64>; 3] {
        &self.hess
    }

    /// Smallest Hessian eigenvalue over the grid.
    pub fn min_hessian_eigenvalue(&self) -> f64 {
        (0..self.hess[0].len())
            .map(|k| eig2([self.hess[0][k], self.hess[2][k], self.hess[1][k]]).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// `Σ |x - T(x)|^2 f w` for the unit-mass source.
    pub fn transport_cost(&self, f: &Density) -> f64 {
        let grid = self.grid();
        let w = grid.weights();
        let m = f.mass();
        (0..grid.len())
            .map(|k| {
                let [x, y] = grid.point(k);
                let dx = x - self.tx.values()[k];
                let dy = y - self.ty.values()[k];
                (dx * dx + dy * dy) * f.values()[k] / m * w[k]
            })
            .sum()
    }
}

/// Eigenvalues `(min, max)` of `[[a, b], [b, c]]` given as `[a, b, c]`.
fn eig2(t: Tensor) -> (f64, f64) {
    let m = 0.5 * (t[0] + t[2]);
    let r = (0.25 * (t[0] - t[2]).powi(2) + t[1] * t[1]).sqrt();
    (m - r, m + r)
}

/// Clamp the eigenvalues of a symmetric 2x2 matrix from below.
fn clamp_tensor(t: Tensor, floor: f64) -> (Tensor, bool) {
    let (l1, l2) = eig2(t);
    if l1 >= floor {
        return (t, false);
    }
    let (a, b, c) = (t[0], t[1], t[2]);
    // Unit eigenvector of the smaller eigenvalue.
    let (ex, ey) = if b.abs() > 1e-300 {
        let (x, y) = (l1 - c, b);
        let n = (x * x + y * y).sqrt();
        (x / n, y / n)
    } else if a <= c {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let (fx, fy) = (-ey, ex);
    let l1c = floor;
    let l2c = l2.max(floor);
    (
        [
            l1c * ex * ex + l2c * fx * fx,
            l1c * ex * ey + l2c * fx * fy,
            l1c * ey * ey + l2c * fy * fy,
        ],
        true,
    )
}

fn check_inputs(f: &Density, g: &Density) -> Result<()> {
    let grid = f.grid();
    grid.ensure_periodic()?;
    if grid.dim() != 2 {
        return Err(Error::GridMismatch("Monge-Ampère solver needs a 2D grid".into()));
    }
    grid.ensure_same(g.grid())?;
    let (a, b) = (f.mass(), g.mass());
    if (a - b).abs() > 1e-10 * a.max(b).max(1.0) {
        return Err(Error::MassMismatch(format!("source mass {a} vs target mass {b}")));
    }
    if f.base().min() <= 0.0 || g.base().min() <= 0.0 {
        return Err(Error::DegenerateTarget(f.base().min().min(g.base().min())));
    }
    Ok(())
}

struct State {
    v: Vec<f64>,
    b: [f64; 2],
    hess: [Vec<f64>; 3],
    tx: Vec<f64>,
    ty: Vec<f64>,
    gt: Vec<f64>,
    residual: f64,
}

fn evaluate(grid: &Grid, v: Vec<f64>, b: [f64; 2], fv: &[f64], gi: &PeriodicInterp, gfloor: f64) -> Result<State> {
    let n = grid.len();
    let [vxx, vyy, vxy] = hessian(grid, &v)?;
    let (gx, gy) = grad(grid, &v)?;
    let hess = [
        vxx.iter().map(|a| 1.0 + a).collect::<Vec<_>>(),
        vyy.iter().map(|a| 1.0 + a).collect::<Vec<_>>(),
        vxy,
    ];
    let tx: Vec<f64> = (0..n).map(|k| grid.point(k)[0] + b[0] + gx[k]).collect();
    let ty: Vec<f64> = (0..n).map(|k| grid.point(k)[1] + b[1] + gy[k]).collect();
    let samples = par::map_range(n, |k| gi.eval(tx[k], ty[k]));
    let gt: Vec<f64> = samples.iter().map(|s| s.0.max(gfloor)).collect();
    let det: Vec<f64> = (0..n).map(|k| hess[0][k] * hess[1][k] - hess[2][k] * hess[2][k]).collect();
    let residual = (0..n).map(|k| (det[k] * gt[k] - fv[k]).abs()).fold(0.0, f64::max);
    Ok(State { v, b, hess, tx, ty, gt, residual })
}

/// Damped Benamou-Froese fixed point
/// `Δu ← ((Δu)^2 + 2θ (f / g(∇u) - det D^2 u))^{1/2}` on unit-mass copies of
/// `f` and `g`.
pub fn solve_monge_ampere_2d(f: &Density, g: &Density, tol: f64, max_iter: usize) -> Result<MongeAmpereSolution> {
    solve_monge_ampere_2d_with(f, g, &MaConfig { tol, max_iter, ..MaConfig::default() })
}

pub fn solve_monge_ampere_2d_with(f: &Density, g: &Density, cfg: &MaConfig) -> Result<MongeAmpereSolution> {
    check_inputs(f, g)?;
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::InvalidInput(format!("damping must lie in (0, 1], got {}", cfg.damping)));
    }
    let grid = f.grid().clone();
    let n = grid.len();
    let fv: Vec<f64> = f.values().iter().map(|v| v / f.mass()).collect();
    let gv: Vec<f64> = g.values().iter().map(|v| v / g.mass()).collect();
    let gi = PeriodicInterp::new(&grid, &gv)?;
    let gfloor = cfg.target_floor * gv.iter().cloned().fold(0.0, f64::max);

    let mut st = evaluate(&grid, vec![0.0; n], [0.0, 0.0], &fv, &gi, gfloor)?;
    let mut best: Option<(f64, usize)> = None;
    let mut best_state: Option<State> = None;
    let mut clamped = 0;
    let mut iterations = 0;
    let theta = cfg.damping;
    while st.residual >= cfg.tol && iterations < cfg.max_iter {
        iterations += 1;
        clamped = 0;
        let mut rhs = Vec::with_capacity(n);
        for k in 0..n {
            let (h, c) = clamp_tensor([st.hess[0][k], st.hess[2][k], st.hess[1][k]], cfg.clamp);
            clamped += c as usize;
            let lap = h[0] + h[2];
            let det = h[0] * h[2] - h[1] * h[1];
            let s2 = lap * lap + 2.0 * theta * (fv[k] / st.gt[k] - det);
            rhs.push(s2.max(0.0).sqrt() - 2.0);
        }
        let mean = rhs.iter().sum::<f64>() / n as f64;
        rhs.iter_mut().for_each(|r| *r -= mean);
        let v = inverse_laplacian(&grid, &rhs)?;
        let next = evaluate(&grid, v, st.b, &fv, &gi, gfloor)?;
        if !next.residual.is_finite() {
            break;
        }
        let prev = std::mem::replace(&mut st, next);
        if best.is_none_or(|(r, _)| prev.residual < r) {
            best = Some((prev.residual, iterations - 1));
            best_state = Some(prev);
        }
    }
    let converged = st.residual < cfg.tol;
    let (final_state, final_iter) = if converged || best.is_none_or(|(r, _)| st.residual <= r) {
        (st, iterations)
    } else {
        (best_state.unwrap(), best.unwrap().1)
    };
    let sol = package(&grid, final_state, final_iter, theta, clamped, converged)?;
    if converged {
        Ok(sol)
    } else {
        Err(Error::NoConvergence(Box::new(sol)))
    }
}

fn package(grid: &Grid, st: State, iterations: usize, damping: f64, clamped: usize, converged: bool) -> Result<MongeAmpereSolution> {
    let n = grid.len();
    let mut u: Vec<f64> = (0..n)
        .map(|k| {
            let [x, y] = grid.point(k);
            0.5 * (x * x + y * y) + st.b[0] * x + st.b[1] * y + st.v[k]
        })
        .collect();
    let mean = u.iter().sum::<f64>() / n as f64;
    u.iter_mut().for_each(|v| *v -= mean);
    Ok(MongeAmpereSolution {
        u: GridFn::new(grid.clone(), u)?,
        v: GridFn::new(grid.clone(), st.v)?,
        b: st.b,
        tx: GridFn::new(grid.clone(), st.tx)?,
        ty: GridFn::new(grid.clone(), st.ty)?,
        residual: st.residual,
        diagnostics: MaDiagnostics { iterations, residual_linf: st.residual, damping, clamped_nodes: clamped },
        converged,
        hess: st.hess,
        g_at_t: st.gt,
    })
}

/// `∫ |g(T) det DT - f| dx` with `DT` differentiated from the map fields
/// themselves (unit-mass densities).
pub fn push_forward_l1(sol: &MongeAmpereSolution, f: &Density, g: &Density) -> Result<f64> {
    let grid = sol.grid();
    let n = grid.len();
    let disp_x: Vec<f64> = (0..n).map(|k| sol.tx.values()[k] - grid.point(k)[0] - sol.b[0]).collect();
    let disp_y: Vec<f64> = (0..n).map(|k| sol.ty.values()[k] - grid.point(k)[1] - sol.b[1]).collect();
    let (axx, axy) = grad(grid, &disp_x)?;
    let (ayx, ayy) = grad(grid, &disp_y)?;
    let gv: Vec<f64> = g.values().iter().map(|v| v / g.mass()).collect();
    let gi = PeriodicInterp::new(grid, &gv)?;
    let w = grid.weights();
    Ok((0..n)
        .map(|k| {
            let j = (1.0 + axx[k]) * (1.0 + ayy[k]) - axy[k] * ayx[k];
            let gt = gi.eval(sol.tx.values()[k], sol.ty.values()[k]).0;
            (gt * j - f.values()[k] / f.mass()).abs() * w[k]
        })
        .sum())
}

/// Adjoint of the linearized Monge-Ampère equation in divergence form,
/// `∇·(g(T) cof(D^2 u) ∇ψ) = ∇·((x - T) f)`, with the linear part of `ψ`
/// fixed to `-b·x`. Returned mean-zero.
pub fn solve_adjoint_ma_2d(sol: &MongeAmpereSolution, f: &Density, g: &Density) -> Result<GridFn> {
    adjoint_with_report(sol, f, g).map(|(psi, _)| psi)
}

pub(crate) fn adjoint_with_report(
    sol: &MongeAmpereSolution,
    f: &Density,
    g: &Density,
) -> Result<(GridFn, crate::linalg::CgReport)> {
    let grid = sol.grid();
    grid.ensure_same(f.grid())?;
    grid.ensure_same(g.grid())?;
    let n = grid.len();
    let h = &sol.hess;
    let coeff: Vec<Tensor> =
        (0..n).map(|k| [sol.g_at_t[k] * h[1][k], -sol.g_at_t[k] * h[2][k], sol.g_at_t[k] * h[0][k]]).collect();
    let b = sol.b;
    let mut qx = Vec::with_capacity(n);
    let mut qy = Vec::with_capacity(n);
    for k in 0..n {
        let [x, y] = grid.point(k);
        let fk = f.values()[k] / f.mass();
        let c = coeff[k];
        qx.push((x - sol.tx.values()[k]) * fk + c[0] * b[0] + c[1] * b[1]);
        qy.push((y - sol.ty.values()[k]) * fk + c[1] * b[0] + c[2] * b[1]);
    }
    let r: Vec<f64> = super::periodic::div(grid, &qx, &qy)?.into_iter().map(|v| -v).collect();
    let scale = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let (psi_p, rep) = if scale == 0.0 {
        (vec![0.0; n], crate::linalg::CgReport { iterations: 0, relative_residual: 0.0 })
    } else {
        solve_divergence(grid, &coeff, &r, ADJOINT_RTOL)?
    };
    let mut psi: Vec<f64> = (0..n)
        .map(|k| {
            let [x, y] = grid.point(k);
            psi_p[k] - b[0] * x - b[1] * y
        })
        .collect();
    let mean = psi.iter().sum::<f64>() / n as f64;
    psi.iter_mut().for_each(|v| *v -= mean);
    Ok((GridFn::new(grid.clone(), psi)?, rep))
}

/// Kernel `|x - T(x)|^2 / 2 + ψ(x)` from an existing solution.
pub fn w2_kernel_from(sol: &MongeAmpereSolution, f: &Density, g: &Density) -> Result<GridFn> {
    let psi = solve_adjoint_ma_2d(sol, f, g)?;
    let grid = sol.grid();
    let vals = (0..grid.len())
        .map(|k| {
            let [x, y] = grid.point(k);
            let dx = x - sol.tx.values()[k];
            let dy = y - sol.ty.values()[k];
            0.5 * (dx * dx + dy * dy) + psi.values()[k]
        })
        .collect();
    GridFn::new(grid.clone(), vals)
}

/// Data-space `W2` gradient kernel of `½ W2^2(·, g)` at `f`.
pub fn w2_gradient_2d(f: &Density, g: &Density, tol: f64) -> Result<GridFn> {
    let sol = solve_monge_ampere_2d(f, g, tol, MaConfig::default().max_iter)?;
    w2_kernel_from(&sol, f, g)
}

/// `W2^2` of the unit-mass copies, with the solution.
pub fn w2_2d(f: &Density, g: &Density, tol: f64, max_iter: usize) -> Result<(f64, MongeAmpereSolution)> {
    let sol = solve_monge_ampere_2d(f, g, tol, max_iter)?;
    Ok((sol.transport_cost(f), sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_density, Convention};

    fn grid(n: usize) -> Grid {
        Grid::new_2d([-1.0, -1.0], [1.0, 1.0], [n, n], Convention::Periodic).unwrap()
    }

    fn bump(g: &Grid, cx: f64, cy: f64, s: f64) -> Density {
        make_density(
            &GridFn::from_fn(g, |x, y| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp() + 0.2),
            1.0,
            0.0,
        )
        .unwrap()
    }

    fn wave(g: &Grid, a: f64, p: f64) -> Density {
        use std::f64::consts::PI;
        make_density(
            &GridFn::from_fn(g, |x, y| 1.0 + a * (PI * x + p).sin() * (PI * y).cos() + 0.5 * a * (PI * (x + y) - p).cos()),
            1.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn identity_for_equal_densities() {
        let g = grid(32);
        let f = bump(&g, 0.1, -0.1, 0.3);
        let sol = solve_monge_ampere_2d(&f, &f, 1e-10, 50).unwrap();
        let h = g.h(0);
        for k in 0..g.len() {
            let [x, y] = g.point(k);
            assert!((sol.tx.values()[k] - x).abs() < h && (sol.ty.values()[k] - y).abs() < h);
        }
        let psi = solve_adjoint_ma_2d(&sol, &f, &f).unwrap();
        assert!(psi.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn clamp_tensor_floors_eigenvalues() {
        let (t, c) = clamp_tensor([1.0, 2.0, 1.0], 0.1);
        assert!(c);
        let (l1, l2) = eig2(t);
        assert!((l1 - 0.1).abs() < 1e-12 && (l2 - 3.0).abs() < 1e-12);
        assert!(!clamp_tensor([2.0, 0.0, 1.0], 0.1).1);
    }

    #[test]
    fn converges_on_smooth_pair() {
        let g = grid(32);
        let f = wave(&g, 0.3, 0.0);
        let h = wave(&g, 0.35, 0.7);
        let sol = solve_monge_ampere_2d(&f, &h, 1e-7, 2000).unwrap();
        assert!(sol.residual < 1e-7);
        assert!(sol.min_hessian_eigenvalue() > 0.0);
        let pf = push_forward_l1(&sol, &f, &h).unwrap();
        assert!(pf < 1e-6, "{pf:e}");
    }
}
