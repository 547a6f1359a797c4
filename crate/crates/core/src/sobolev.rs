//! Spectral Sobolev norms, the preconditioner `(I - Δ)^{s/2}`, the diagonal
//! smoothing operator `<ξ>^{-α}` and its inverses, and the resolution study.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;
use crate::grid::{Convention, Density, Grid, GridFn};
use crate::par;
use crate::stats::{loglog_fit, LinearFit};

/// Relative size of the zero mode above which a homogeneous negative-order
/// seminorm refuses the input.
pub const ZERO_MODE_TOL: f64 = 1e-10;
/// Smallest admissible symbol magnitude in [`hs_normal_solve`].
pub const SYMBOL_FLOOR: f64 = 1e-14;

/// Mode table of a periodic grid.
#[derive(Clone, Debug)]
pub struct FrequencyGrid {
    xi: Vec<(f64, f64)>,
    abs: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(grid: &Grid) -> Result<Self> {
        grid.ensure_periodic()?;
        let xi = fourier::frequency_pairs(grid);
        let abs = xi.iter().map(|(x, y)| (x * x + y * y).sqrt()).collect();
        Ok(Self { xi, abs })
    }

    pub fn xi(&self) -> &[(f64, f64)] {
        &self.xi
    }

    /// `|xi|` per slot; exactly zero at slot 0 only.
    pub fn abs(&self) -> &[f64] {
        &self.abs
    }

    /// `<xi> = sqrt(1 + |xi|^2)` per slot.
    pub fn bracket(&self) -> Vec<f64> {
        self.abs.iter().map(|a| (1.0 + a * a).sqrt()).collect()
    }

    /// `<xi>^p`, or `|xi|^p` with the zero mode set to 0 when homogeneous.
    pub fn power(&self, p: f64, homogeneous: bool) -> Vec<f64> {
        self.abs
            .iter()
            .map(|&a| {
                if homogeneous {
                    if a == 0.0 {
                        0.0
                    } else {
                        a.powf(p)
                    }
                } else {
                    (1.0 + a * a).powf(0.5 * p)
                }
            })
            .collect()
    }
}

/// `A` with symbol `<xi>^{-alpha}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalOperator {
    pub alpha: f64,
}

impl DiagonalOperator {
    pub fn new(alpha: f64) -> Self {
        Self { alpha }
    }

    pub fn symbol(&self, abs_xi: f64) -> f64 {
        (1.0 + abs_xi * abs_xi).powf(-0.5 * self.alpha)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SobolevSpec {
    pub s: f64,
    pub homogeneous: bool,
    /// Optional weight; when present the mismatch is the weighted one.
    pub weight: Option<Density>,
}

impl SobolevSpec {
    pub fn hs(s: f64) -> Self {
        Self { s, homogeneous: false, weight: None }
    }

    pub fn dot_hs(s: f64) -> Self {
        Self { s, homogeneous: true, weight: None }
    }

    pub fn weighted(s: f64, omega: Density) -> Self {
        Self { s, homogeneous: false, weight: Some(omega) }
    }
}

fn check_zero_mode(r: &GridFn, spec: &[Complex64]) -> Result<()> {
    let mean = spec[0].re / r.grid().len() as f64;
    let norm = r.norm_l2();
    if mean.abs() > ZERO_MODE_TOL * norm {
        return Err(Error::MassMismatch(format!(
            "homogeneous negative-order norm needs zero mean, got mean {mean:e} (L2 norm {norm:e})"
        )));
    }
    Ok(())
}

/// `½ ∫ w(ξ) |f̂ - ĝ|^2 dξ` with `w = <ξ>^{2s}` or `|ξ|^{2s}`; dispatches to
/// [`weighted_hs_mismatch`] when `spec.weight` is set.
pub fn hs_mismatch(f: &GridFn, g: &GridFn, spec: &SobolevSpec) -> Result<f64> {
    if let Some(w) = &spec.weight {
        return weighted_hs_mismatch(f, g, spec.s, w);
    }
    let d = f.sub(g)?;
    sobolev_norm_sq(&d, spec.s, spec.homogeneous).map(|n| 0.5 * n)
}

/// `||r||^2` in `H^s` or `Ḣ^s`.
pub fn sobolev_norm_sq(r: &GridFn, s: f64, homogeneous: bool) -> Result<f64> {
    let grid = r.grid();
    let freq = FrequencyGrid::new(grid)?;
    let spec = fourier::forward(grid, r.values())?;
    if homogeneous && s < 0.0 {
        check_zero_mode(r, &spec)?;
    }
    let w = freq.power(2.0 * s, homogeneous);
    let sum: f64 = spec.iter().zip(&w).map(|(c, w)| w * c.norm_sqr()).sum();
    Ok(sum * fourier::parseval_weight(grid))
}

/// `½ || ω · P_s(f - g) ||^2_{L2}` with `P_s` the multiplier `<ξ>^s`.
pub fn weighted_hs_mismatch(f: &GridFn, g: &GridFn, s: f64, omega: &Density) -> Result<f64> {
    let v = weighted_residual(f, g, s, omega)?;
    Ok(0.5 * v.dot(&v)?)
}

/// `ω · P_s(f - g)`, shared with the gradient in module `invert`.
pub(crate) fn weighted_residual(f: &GridFn, g: &GridFn, s: f64, omega: &Density) -> Result<GridFn> {
    f.grid().ensure_same(omega.grid())?;
    let wmin = omega.base().min();
    if !(wmin > 0.0) {
        return Err(Error::NonpositiveWeight(wmin));
    }
    let d = f.sub(g)?;
    let p = precondition(&d, s, false)?;
    p.zip_map(omega.base(), |a, w| a * w)
}

/// Spectral multiplier `<ξ>^s` (or `|ξ|^s` with the zero mode removed).
pub fn precondition(r: &GridFn, s: f64, homogeneous: bool) -> Result<GridFn> {
    let grid = r.grid();
    let freq = FrequencyGrid::new(grid)?;
    let mut spec = fourier::forward(grid, r.values())?;
    if homogeneous && s < 0.0 {
        check_zero_mode(r, &spec)?;
    }
    for (c, w) in spec.iter_mut().zip(freq.power(s, homogeneous)) {
        *c *= w;
    }
    r.with_values(fourier::inverse(grid, spec))
}

pub fn apply_diagonal(a: &DiagonalOperator, m: &GridFn) -> Result<GridFn> {
    precondition(m, -a.alpha, false)
}

/// Per-mode solution of the `H^s` normal equation
/// `(Â <ξ>^{2s} Â) m̂ = Â <ξ>^{2s} ĝ`.
pub fn hs_normal_solve(a: &DiagonalOperator, g: &GridFn, s: f64) -> Result<GridFn> {
    let grid = g.grid();
    let freq = FrequencyGrid::new(grid)?;
    let mut spec = fourier::forward(grid, g.values())?;
    for (c, &k) in spec.iter_mut().zip(freq.abs()) {
        let sym = a.symbol(k);
        if sym.abs() < SYMBOL_FLOOR {
            return Err(Error::SingularSymbol(sym));
        }
        let w = (1.0 + k * k).powf(s);
        *c *= (sym * w) / (sym * w * sym);
    }
    g.with_values(fourier::inverse(grid, spec))
}

/// `<ξ>^α` below the cutoff, zero at or above it.
pub fn truncated_inverse(g: &GridFn, a: &DiagonalOperator, xi_c: f64) -> Result<GridFn> {
    if !(xi_c > 0.0) {
        return Err(Error::InvalidInput(format!("cutoff must be positive, got {xi_c}")));
    }
    let grid = g.grid();
    let freq = FrequencyGrid::new(grid)?;
    let table: Vec<f64> = freq
        .abs()
        .iter()
        .map(|&k| if k < xi_c { 1.0 / a.symbol(k) } else { 0.0 })
        .collect();
    g.with_values(fourier::apply_table(grid, g.values(), &table)?)
}

/// One row of the resolution study table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResolutionRow {
    pub delta: f64,
    pub error: f64,
    pub xi_c: f64,
    pub trial: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResolutionSummary {
    pub slope: f64,
    pub theory_slope: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolutionStudy {
    pub rows: Vec<ResolutionRow>,
    pub summary: ResolutionSummary,
}

/// Domain used by [`resolution_study`]: a periodic interval of length
/// `length`, resolved up to `oversample` times the largest cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyDomain {
    pub length: f64,
    pub oversample: f64,
}

impl Default for StudyDomain {
    fn default() -> Self {
        Self { length: 8.0 * std::f64::consts::PI, oversample: 6.0 }
    }
}

/// Random real field with spectral amplitude `amp(|ξ|)` and uniform phases.
/// The zero mode is `amp(0)` and the Nyquist mode is left empty.
fn random_phase_field(grid: &Grid, amp: impl Fn(f64) -> f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = grid.n(0);
    let xi = fourier::wavenumbers(grid, 0);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    spec[0] = Complex64::new(amp(0.0), 0.0);
    for k in 1..n.div_ceil(2) {
        let th = rng.random_range(0.0..std::f64::consts::TAU);
        let c = Complex64::from_polar(amp(xi[k].abs()), th);
        spec[k] = c;
        spec[n - k] = c.conj();
    }
    fourier::inverse(grid, spec)
}

/// Error of the cutoff reconstruction `R_c g_δ` against `m` as `δ` varies,
/// with `<ξ_c> = (δ / ||m||_{H^β})^{-1/(α+β-s)}`.
pub fn resolution_study(
    alpha: f64,
    beta: f64,
    s: f64,
    noise_levels: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ResolutionStudy> {
    resolution_study_on(alpha, beta, s, noise_levels, trials, seed, StudyDomain::default())
}

pub fn resolution_study_on(
    alpha: f64,
    beta: f64,
    s: f64,
    noise_levels: &[f64],
    trials: usize,
    seed: u64,
    domain: StudyDomain,
) -> Result<ResolutionStudy> {
    let rate = alpha + beta - s;
    if !(rate > 0.0) {
        return Err(Error::InvalidInput(format!("need alpha + beta - s > 0, got {rate}")));
    }
    if noise_levels.is_empty() || trials == 0 {
        return Err(Error::InvalidInput("need at least one noise level and one trial".into()));
    }
    if let Some(d) = noise_levels.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::InvalidInput(format!("noise levels must lie in (0, 1), got {d}")));
    }
    let dmin = noise_levels.iter().cloned().fold(f64::INFINITY, f64::min);
    let xi_c = |delta: f64| {
        let b = delta.powf(-1.0 / rate);
        (b * b - 1.0).max(0.0).sqrt()
    };
    let xi_needed = domain.oversample * xi_c(dmin).max(1.0);
    let n_min = (xi_needed * domain.length / std::f64::consts::PI).ceil() as usize;
    let n = n_min.next_power_of_two().max(64);
    let grid = Grid::new_1d(0.0, domain.length, n, Convention::Periodic)?;
    let op = DiagonalOperator::new(alpha);

    let per_trial = par::map_range(trials, |t| -> Result<Vec<ResolutionRow>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let raw = GridFn::new(
            grid.clone(),
            random_phase_field(&grid, |k| (1.0 + k * k).powf(-0.5 * (beta + 0.51)), &mut rng),
        )?;
        let m = raw.scale(1.0 / sobolev_norm_sq(&raw, beta, false)?.sqrt());
        let data = apply_diagonal(&op, &m)?;
        let mut rows = Vec::with_capacity(noise_levels.len());
        for &delta in noise_levels {
            let raw_noise = GridFn::new(
                grid.clone(),
                random_phase_field(&grid, |k| (1.0 + k * k).powf(-0.5 * (s + 0.5)), &mut rng),
            )?;
            let noise = raw_noise.scale(delta / sobolev_norm_sq(&raw_noise, s, false)?.sqrt());
            let noisy = data.zip_map(&noise, |a, b| a + b)?;
            let cut = xi_c(delta);
            let rec = truncated_inverse(&noisy, &op, cut)?;
            rows.push(ResolutionRow { delta, error: rec.sub(&m)?.norm_l2(), xi_c: cut, trial: t });
        }
        Ok(rows)
    });
    let mut rows = Vec::with_capacity(trials * noise_levels.len());
    for r in per_trial {
        rows.extend(r?);
    }
    let fit = fit_rows(&rows).ok_or_else(|| Error::InvalidInput("noise levels must be distinct".into()))?;
    Ok(ResolutionStudy {
        rows,
        summary: ResolutionSummary { slope: fit.slope, theory_slope: beta / rate, r2: fit.r2 },
    })
}

/// Log-log fit of the trial-averaged error against `δ`.
fn fit_rows(rows: &[ResolutionRow]) -> Option<LinearFit> {
    let mut deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    deltas.dedup();
    let means: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let e: Vec<f64> = rows.iter().filter(|r| r.delta == d).map(|r| r.error).collect();
            e.iter().sum::<f64>() / e.len() as f64
        })
        .collect();
    loglog_fit(&deltas, &means)
}
