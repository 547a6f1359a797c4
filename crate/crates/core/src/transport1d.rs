//! Exact 1D optimal transport between densities that are piecewise constant
//! on the grid cells: CDFs, quantiles, the monotone map, `W2^2`, and the
//! first variation of `½ W2^2` in the source density.

use crate::error::{Error, Result};
use crate::grid::{Density, Grid};

/// Relative mass difference tolerated between source and target.
pub const MASS_TOL: f64 = 1e-10;
/// Target cells below this fraction of the peak count as empty.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Cumulative distribution at the cell edges of a 1D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Cdf {
    grid: Grid,
    edges: Vec<f64>,
    values: Vec<f64>,
    density: Vec<f64>,
}

impl Cdf {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// `F` at the `n + 1` cell edges; `0` at `lo` and exactly `1` at `hi`.
    pub fn edge_values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear evaluation of `F`.
    pub fn eval(&self, x: f64) -> f64 {
        let e = &self.edges;
        if x <= e[0] {
            return 0.0;
        }
        if x >= e[e.len() - 1] {
            return 1.0;
        }
        let c = e.partition_point(|&v| v <= x) - 1;
        let t = (x - e[c]) / (e[c + 1] - e[c]);
        self.values[c] + t * (self.values[c + 1] - self.values[c])
    }

    /// `F` at the grid nodes.
    pub fn node_values(&self) -> Vec<f64> {
        self.grid.coords(0).iter().map(|&x| self.eval(x)).collect()
    }

    /// Cell holding the open probability interval around `p` (requires a
    /// cell of positive mass to the right of level `p`).
    fn cell_at(&self, p: f64) -> usize {
        let j = self.values.partition_point(|&v| v < p);
        j.clamp(1, self.values.len() - 1) - 1
    }

    fn invert_in(&self, c: usize, p: f64) -> f64 {
        let (f0, f1) = (self.values[c], self.values[c + 1]);
        let (e0, e1) = (self.edges[c], self.edges[c + 1]);
        if f1 > f0 {
            e0 + (p - f0) / (f1 - f0) * (e1 - e0)
        } else {
            e0
        }
    }
}

fn require_1d(grid: &Grid) -> Result<()> {
    if grid.dim() != 1 {
        return Err(Error::GridMismatch("1D transport needs a 1D grid".into()));
    }
    Ok(())
}

/// Running cell-mass quadrature normalized so the last value is exactly 1.
pub fn cdf_of(f: &Density) -> Result<Cdf> {
    let grid = f.grid().clone();
    require_1d(&grid)?;
    let w = grid.axis_weights(0);
    let edges = grid.cell_edges(0);
    let mut values = Vec::with_capacity(w.len() + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for (v, w) in f.values().iter().zip(&w) {
        acc += v * w;
        values.push(acc);
    }
    for v in values.iter_mut() {
        *v /= acc;
    }
    *values.last_mut().unwrap() = 1.0;
    let density = f.values().iter().map(|v| v / acc).collect();
    Ok(Cdf { grid, edges, values, density })
}

/// `G^{-1}(p) = inf { x : G(x) >= p }`; flat stretches of `G` resolve to
/// their left end.
pub fn quantile_of(g: &Cdf, p: &[f64]) -> Result<Vec<f64>> {
    p.iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("probability level {p} outside [0, 1]")));
            }
            let j = g.values.partition_point(|&v| v < p);
            if j == 0 {
                return Ok(g.edges[0]);
            }
            Ok(g.invert_in(j - 1, p))
        })
        .collect()
}

/// Monotone map sampled at the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportMap1D {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
}

fn check_pair(f: &Density, g: &Density) -> Result<()> {
    require_1d(f.grid())?;
    f.grid().ensure_same(g.grid())?;
    let (a, b) = (f.mass(), g.mass());
    if (a - b).abs() > MASS_TOL * a.max(b).max(1.0) {
        return Err(Error::MassMismatch(format!("source mass {a} vs target mass {b}")));
    }
    Ok(())
}

/// `T = G^{-1} ∘ F` at the nodes.
pub fn optimal_map_1d(f: &Density, g: &Density) -> Result<TransportMap1D> {
    check_pair(f, g)?;
    let (fc, gc) = (cdf_of(f)?, cdf_of(g)?);
    let x = f.grid().coords(0);
    let levels = fc.node_values();
    let t = quantile_of(&gc, &levels)?;
    Ok(TransportMap1D { x, t })
}

/// Stretch of probability levels on which both quantile functions are
/// linear: `x(p)` runs `xa -> xb` inside source cell `fcell`, `T` runs
/// `ya -> yb` inside a single target cell.
#[derive(Clone, Copy, Debug)]
struct Piece {
    pa: f64,
    pb: f64,
    xa: f64,
    xb: f64,
    ya: f64,
    yb: f64,
    fcell: usize,
}

fn pieces(fc: &Cdf, gc: &Cdf) -> Vec<Piece> {
    let mut levels: Vec<f64> = fc.values.iter().chain(gc.values.iter()).cloned().collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    levels
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (pa, pb) = (w[0], w[1]);
            let pm = 0.5 * (pa + pb);
            let (fcell, gcell) = (fc.cell_at(pm), gc.cell_at(pm));
            Piece {
                pa,
                pb,
                xa: fc.invert_in(fcell, pa),
                xb: fc.invert_in(fcell, pb),
                ya: gc.invert_in(gcell, pa),
                yb: gc.invert_in(gcell, pb),
                fcell,
            }
        })
        .collect()
}

/// `W2^2(f, g)`, exact for cellwise-constant densities: the integral of
/// `|F^{-1} - G^{-1}|^2` over `[0, 1]`, scaled by the common mass.
pub fn w2_1d(f: &Density, g: &Density) -> Result<f64> {
    check_pair(f, g)?;
    let (fc, gc) = (cdf_of(f)?, cdf_of(g)?);
    let sum: f64 = pieces(&fc, &gc)
        .iter()
        .map(|q| {
            let (da, db) = (q.xa - q.ya, q.xb - q.yb);
            (q.pb - q.pa) * (da * da + da * db + db * db) / 3.0
        })
        .sum();
    Ok(sum * f.mass())
}

fn check_target(gc: &Cdf) -> Result<()> {
    let peak = gc.density.iter().cloned().fold(0.0, f64::max);
    let first = gc.density.iter().position(|&v| v > 0.0).unwrap_or(0);
    let last = gc.density.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    if let Some(v) = gc.density[first..=last].iter().find(|&&v| v < DEGENERATE_TOL * peak) {
        return Err(Error::DegenerateTarget(*v));
    }
    Ok(())
}

/// First variation of `½ W2^2(·, g)` at `f`, as cell averages of
/// `K(x) = (x - T(x))^2 / 2 - p(+∞) + p(x)`, with
/// `p(x) = ∫^x (y - T(y)) f(y) / g(T(y)) dy`. The additive constant is left
/// as computed; callers project it away.
pub fn w2_gradient_1d(f: &Density, g: &Density) -> Result<crate::grid::GridFn> {
    check_pair(f, g)?;
    let (fc, gc) = (cdf_of(f)?, cdf_of(g)?);
    check_target(&gc)?;
    let ps = pieces(&fc, &gc);
    let n = f.grid().n(0);
    let edges = &fc.edges;

    // Per source cell: sub-intervals [xa, xb] with T running ya -> yb.
    let mut segs: Vec<Vec<(f64, f64, f64, f64)>> = vec![Vec::new(); n];
    let mut p_inf = 0.0;
    for q in &ps {
        segs[q.fcell].push((q.xa, q.xb, q.ya, q.yb));
        p_inf += (q.yb - q.ya) * 0.5 * ((q.xa - q.ya) + (q.xb - q.yb));
    }
    for (c, s) in segs.iter_mut().enumerate() {
        if s.is_empty() {
            let t = quantile_of(&gc, &[fc.values[c]])?[0];
            s.push((edges[c], edges[c + 1], t, t));
        }
    }

    let t_lo = segs[0][0].2;
    let mut k_edge = 0.5 * (edges[0] - t_lo).powi(2) - p_inf;
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let (a, b) = (edges[c], edges[c + 1]);
        let mut inner = 0.0;
        let mut rise = 0.0;
        for &(xa, xb, ya, yb) in &segs[c] {
            let len = xb - xa;
            if len <= 0.0 {
                continue;
            }
            let tm = 0.5 * (ya + yb);
            let xm = 0.5 * (xa + xb);
            let d = |x: f64, t: f64| x - t;
            // (b - y)(y - T) is quadratic on the sub-interval: Simpson is exact.
            inner += len / 6.0
                * ((b - xa) * d(xa, ya) + 4.0 * (b - xm) * d(xm, tm) + (b - xb) * d(xb, yb));
            rise += len * 0.5 * (d(xa, ya) + d(xb, yb));
        }
        out.push(k_edge + inner / (b - a));
        k_edge += rise;
    }
    crate::grid::GridFn::new(f.grid().clone(), out)
}
