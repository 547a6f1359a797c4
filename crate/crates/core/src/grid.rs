//! Uniform grids, sampled fields, densities, quadrature, noise and spectra.
//!
//! Every node owns a cell. On a periodic grid the nodes sit at cell centres
//! `lo + (i + 1/2) h` with `h = (hi - lo) / n`; on an endpoint grid the nodes
//! are `lo + i h` with `h = (hi - lo) / (n - 1)` and each node owns its dual
//! cell clipped to the domain, so the cell lengths are the trapezoid weights.
//! Fields are read as piecewise constant on these cells wherever an exact
//! integral is needed (CDFs, transport maps).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;

/// Sampling convention shared by both axes of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Periodic,
    Endpoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    n: [usize; 2],
    convention: Convention,
}

/// Serialized form of a grid (the JSON sidecar of a field CSV).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
    pub convention: Convention,
}

impl Grid {
    pub fn new_1d(lo: f64, hi: f64, n: usize, convention: Convention) -> Result<Self> {
        Self::build(1, [lo, 0.0], [hi, 1.0], [n, 1], convention)
    }

    pub fn new_2d(lo: [f64; 2], hi: [f64; 2], n: [usize; 2], convention: Convention) -> Result<Self> {
        Self::build(2, lo, hi, n, convention)
    }

    fn build(dim: usize, lo: [f64; 2], hi: [f64; 2], n: [usize; 2], convention: Convention) -> Result<Self> {
        for axis in 0..dim {
            if n[axis] < 4 {
                return Err(Error::InvalidInput(format!("grid needs n >= 4 per axis, got {}", n[axis])));
            }
            if !(hi[axis] > lo[axis]) || !lo[axis].is_finite() || !hi[axis].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "grid bounds must satisfy lo < hi, got [{}, {}]",
                    lo[axis], hi[axis]
                )));
            }
        }
        Ok(Self { dim, lo, hi, n, convention })
    }

    pub fn from_meta(meta: &GridMeta) -> Result<Self> {
        let dim = meta.n.len();
        if meta.lo.len() != dim || meta.hi.len() != dim {
            return Err(Error::InvalidInput("grid metadata arrays differ in length".into()));
        }
        match dim {
            1 => Self::new_1d(meta.lo[0], meta.hi[0], meta.n[0], meta.convention),
            2 => Self::new_2d(
                [meta.lo[0], meta.lo[1]],
                [meta.hi[0], meta.hi[1]],
                [meta.n[0], meta.n[1]],
                meta.convention,
            ),
            d => Err(Error::InvalidInput(format!("unsupported grid dimension {d}"))),
        }
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            lo: self.lo[..self.dim].to_vec(),
            hi: self.hi[..self.dim].to_vec(),
            n: self.n[..self.dim].to_vec(),
            convention: self.convention,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn is_periodic(&self) -> bool {
        self.convention == Convention::Periodic
    }

    /// Samples along `axis` (1 for the unused axis of a 1D grid).
    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn h(&self, axis: usize) -> f64 {
        match self.convention {
            Convention::Periodic => self.length(axis) / self.n[axis] as f64,
            Convention::Endpoint => self.length(axis) / (self.n[axis] - 1) as f64,
        }
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let h = self.h(axis);
        match self.convention {
            Convention::Periodic => self.lo[axis] + (i as f64 + 0.5) * h,
            Convention::Endpoint => self.lo[axis] + i as f64 * h,
        }
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|i| self.coord(axis, i)).collect()
    }

    /// Cell edges along `axis`: `n + 1` increasing values spanning `[lo, hi]`.
    pub fn cell_edges(&self, axis: usize) -> Vec<f64> {
        let n = self.n[axis];
        let h = self.h(axis);
        let (lo, hi) = (self.lo[axis], self.hi[axis]);
        match self.convention {
            Convention::Periodic => (0..=n)
                .map(|i| if i == n { hi } else { lo + i as f64 * h })
                .collect(),
            Convention::Endpoint => {
                let mut e = Vec::with_capacity(n + 1);
                e.push(lo);
                for i in 0..n - 1 {
                    e.push(lo + (i as f64 + 0.5) * h);
                }
                e.push(hi);
                e
            }
        }
    }

    /// Quadrature weights along one axis (cell lengths).
    pub fn axis_weights(&self, axis: usize) -> Vec<f64> {
        let n = self.n[axis];
        let h = self.h(axis);
        match self.convention {
            Convention::Periodic => vec![h; n],
            Convention::Endpoint => (0..n)
                .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
                .collect(),
        }
    }

    /// Quadrature weight of every node, in storage order.
    pub fn weights(&self) -> Vec<f64> {
        let wx = self.axis_weights(0);
        if self.dim == 1 {
            return wx;
        }
        let wy = self.axis_weights(1);
        let mut w = Vec::with_capacity(self.len());
        for &b in &wy {
            for &a in &wx {
                w.push(a * b);
            }
        }
        w
    }

    /// Storage index of node `(i, j)`; x varies fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n[0] + i
    }

    /// Physical coordinates of the node with storage index `k`.
    pub fn point(&self, k: usize) -> [f64; 2] {
        let i = k % self.n[0];
        let j = k / self.n[0];
        let y = if self.dim == 2 { self.coord(1, j) } else { 0.0 };
        [self.coord(0, i), y]
    }

    /// Reinterpret endpoint samples as one period of a periodic grid with the
    /// same spacing. Values are not touched; only the spectral convention
    /// changes. Periodic grids are returned unchanged.
    pub fn periodized(&self) -> Grid {
        match self.convention {
            Convention::Periodic => self.clone(),
            Convention::Endpoint => {
                let mut hi = self.hi;
                for axis in 0..self.dim {
                    hi[axis] = self.hi[axis] + self.h(axis);
                }
                Grid { hi, convention: Convention::Periodic, ..self.clone() }
            }
        }
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.n == other.n
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.meta(), other.meta())));
        }
        Ok(())
    }

    pub(crate) fn ensure_periodic(&self) -> Result<()> {
        if !self.is_periodic() {
            return Err(Error::GridMismatch("operation requires the periodic convention".into()));
        }
        Ok(())
    }
}

/// Scalar field sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFn {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    /// Sample `f(x, y)` at every node (`y = 0` on 1D grids).
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.point(k);
                f(x, y)
            })
            .collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid, new values (length-checked).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &GridFn, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn sub(&self, other: &GridFn) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Quadrature inner product.
    pub fn dot(&self, other: &GridFn) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let w = self.grid.weights();
        Ok(self.values.iter().zip(&other.values).zip(&w).map(|((a, b), w)| a * b * w).sum())
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).expect("same grid").sqrt()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Quadrature mean `mass / |Omega|`.
    pub fn mean(&self) -> f64 {
        let area: f64 = (0..self.grid.dim()).map(|a| self.grid.length(a)).product();
        mass(self) / area
    }

    /// Reinterpret on the periodized grid (see [`Grid::periodized`]).
    pub fn periodized(&self) -> GridFn {
        GridFn { grid: self.grid.periodized(), values: self.values.clone() }
    }
}

/// Quadrature of `f` over the domain: midpoint rule on periodic grids,
/// trapezoid rule on endpoint grids.
pub fn mass(f: &GridFn) -> f64 {
    let w = f.grid.weights();
    f.values.iter().zip(&w).map(|(v, w)| v * w).sum()
}

/// Nonnegative field with its total mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    base: GridFn,
    mass: f64,
}

impl Density {
    /// Wrap a nonnegative field with positive mass.
    pub fn new(base: GridFn) -> Result<Self> {
        if let Some(v) = base.values.iter().find(|&&v| v < 0.0) {
            return Err(Error::InvalidInput(format!("density has negative sample {v:e}")));
        }
        let m = mass(&base);
        if !(m > 0.0) {
            return Err(Error::AllZeroInput);
        }
        Ok(Self { base, mass: m })
    }

    pub fn base(&self) -> &GridFn {
        &self.base
    }

    pub fn grid(&self) -> &Grid {
        &self.base.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.base.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn into_gridfn(self) -> GridFn {
        self.base
    }

    /// Rescaled copy with the given total mass.
    pub fn with_mass(&self, target: f64) -> Result<Self> {
        if !(target > 0.0) {
            return Err(Error::InvalidInput(format!("target mass must be positive, got {target}")));
        }
        let c = target / self.mass;
        Density::new(self.base.scale(c))
    }

    pub fn normalized(&self) -> Result<Self> {
        self.with_mass(1.0)
    }
}

/// Relative density floor used when none is supplied.
pub const DEFAULT_FLOOR: f64 = 1e-10;

/// Clamp negatives to zero, add `floor * max(f)`, and rescale to `target_mass`.
pub fn make_density(f: &GridFn, target_mass: f64, floor: f64) -> Result<Density> {
    if floor < 0.0 {
        return Err(Error::InvalidInput(format!("floor must be nonnegative, got {floor}")));
    }
    let clamped = f.map(|v| v.max(0.0));
    let m = mass(&clamped);
    if !(m > 0.0) {
        return Err(Error::AllZeroInput);
    }
    let shift = floor * clamped.max();
    let lifted = clamped.map(|v| v + shift);
    Density::new(lifted)?.with_mass(target_mass)
}

/// Multiplicative uniform noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&level) {
            return Err(Error::InvalidInput(format!("noise level must lie in [0, 1), got {level}")));
        }
        Ok(Self { level, seed })
    }
}

/// `g_i (1 + level u_i)` with `u_i ~ U[-1, 1]`, renormalized to the mass of `g`.
pub fn add_noise(g: &Density, spec: NoiseSpec) -> Result<Density> {
    if !(0.0..1.0).contains(&spec.level) {
        return Err(Error::InvalidInput(format!("noise level must lie in [0, 1), got {}", spec.level)));
    }
    if spec.level == 0.0 {
        return Ok(g.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noisy: Vec<f64> = g
        .values()
        .iter()
        .map(|&v| v * (1.0 + spec.level * rng.random_range(-1.0..=1.0)))
        .collect();
    Density::new(g.base.with_values(noisy)?)?.with_mass(g.mass)
}

/// One frequency shell of a spectrum report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Shell {
    /// Shell radius `|xi|`.
    pub radius: f64,
    /// Energy `sum |f_hat|^2 dxi` over the modes in the shell.
    pub energy: f64,
    pub modes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub shells: Vec<Shell>,
}

impl SpectrumReport {
    pub fn total_energy(&self) -> f64 {
        self.shells.iter().map(|s| s.energy).sum()
    }

    /// Fraction of energy in shells with radius above `cut`.
    pub fn energy_fraction_above(&self, cut: f64) -> f64 {
        let total = self.total_energy();
        if total == 0.0 {
            return 0.0;
        }
        self.shells.iter().filter(|s| s.radius > cut).map(|s| s.energy).sum::<f64>() / total
    }

    pub fn max_radius(&self) -> f64 {
        self.shells.iter().map(|s| s.radius).fold(0.0, f64::max)
    }

    /// Least-squares slope of `log(energy per mode)` against `log |xi|` over
    /// shells with radius in `[lo, hi]`.
    pub fn decay_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .shells
            .iter()
            .filter(|s| s.radius >= lo && s.radius <= hi && s.radius > 0.0 && s.energy > 0.0)
            .map(|s| (s.radius.ln(), (s.energy / s.modes as f64).ln()))
            .collect();
        crate::stats::linear_fit(&pts).map(|fit| fit.slope)
    }
}

/// Discrete Fourier energy per frequency shell, normalized so that the shell
/// energies sum to `||f||_{L2}^2`. 1D shells pair `+k` with `-k`; 2D shells
/// bin `|xi|` by the coarsest frequency spacing.
pub fn spectrum_report(f: &GridFn) -> Result<SpectrumReport> {
    let grid = f.grid();
    grid.ensure_periodic()?;
    let spec = fourier::forward(grid, f.values())?;
    let scale = fourier::parseval_weight(grid);
    let xi_x = fourier::wavenumbers(grid, 0);
    let xi_y = if grid.dim() == 2 { fourier::wavenumbers(grid, 1) } else { vec![0.0] };
    let dxi = (0..grid.dim())
        .map(|a| 2.0 * std::f64::consts::PI / grid.length(a))
        .fold(f64::INFINITY, f64::min);
    let nbins = {
        let rmax = (xi_x.iter().map(|x| x * x).fold(0.0, f64::max)
            + xi_y.iter().map(|y| y * y).fold(0.0, f64::max))
        .sqrt();
        (rmax / dxi).round() as usize + 1
    };
    let mut energy = vec![0.0; nbins];
    let mut modes = vec![0usize; nbins];
    let mut radius_sum = vec![0.0; nbins];
    for (j, &ky) in xi_y.iter().enumerate() {
        for (i, &kx) in xi_x.iter().enumerate() {
            let c = spec[j * xi_x.len() + i];
            let r = (kx * kx + ky * ky).sqrt();
            let b = (r / dxi).round() as usize;
            energy[b] += c.norm_sqr() * scale;
            modes[b] += 1;
            radius_sum[b] += r;
        }
    }
    let shells = (0..nbins)
        .filter(|&b| modes[b] > 0)
        .map(|b| Shell { radius: radius_sum[b] / modes[b] as f64, energy: energy[b], modes: modes[b] })
        .collect();
    Ok(SpectrumReport { shells })
}
