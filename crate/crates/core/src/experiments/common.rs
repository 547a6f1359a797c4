//! Helpers shared by the experiment drivers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{spectrum_report, Convention, Grid, GridFn};

/// Record of one pipeline step in the manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub name: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Default)]
pub struct Steps {
    pub records: Vec<StepRecord>,
}

impl Steps {
    /// Run `f`, recording success or the error message.
    pub fn run<T>(&mut self, name: impl Into<String>, f: impl FnOnce() -> Result<T>) -> Option<T> {
        let name = name.into();
        match f() {
            Ok(v) => {
                self.records.push(StepRecord { name, ok: true, error: None });
                Some(v)
            }
            Err(e) => {
                self.records.push(StepRecord { name, ok: false, error: Some(e.to_string()) });
                None
            }
        }
    }

    pub fn record<T>(&mut self, name: impl Into<String>, r: Result<T>) -> Option<T> {
        self.run(name, || r)
    }
}

/// Even reflection of an endpoint-grid field onto a periodic grid of twice
/// the length, so spectra are not polluted by a wrap-around jump.
pub fn even_extension(f: &GridFn) -> Result<GridFn> {
    let g = f.grid();
    if g.is_periodic() {
        return Ok(f.clone());
    }
    let reflect = |n: usize| -> Vec<usize> { (0..n).chain((1..n - 1).rev()).collect() };
    let ix = reflect(g.n(0));
    let lo0 = g.lo(0);
    if g.dim() == 1 {
        let pg = Grid::new_1d(lo0, lo0 + ix.len() as f64 * g.h(0), ix.len(), Convention::Periodic)?;
        let v = ix.iter().map(|&i| f.values()[i]).collect();
        return GridFn::new(pg, v);
    }
    let iy = reflect(g.n(1));
    let pg = Grid::new_2d(
        [lo0, g.lo(1)],
        [lo0 + ix.len() as f64 * g.h(0), g.lo(1) + iy.len() as f64 * g.h(1)],
        [ix.len(), iy.len()],
        Convention::Periodic,
    )?;
    let mut v = Vec::with_capacity(ix.len() * iy.len());
    for &j in &iy {
        for &i in &ix {
            v.push(f.values()[g.index(i, j)]);
        }
    }
    GridFn::new(pg, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub radius: f64,
    pub energy: f64,
    pub modes: usize,
}

/// Shell spectrum of the even extension of `f`.
pub fn spectrum_rows(f: &GridFn) -> Result<Vec<SpectrumRow>> {
    let sp = spectrum_report(&even_extension(f)?)?;
    Ok(sp.shells.iter().map(|s| SpectrumRow { radius: s.radius, energy: s.energy, modes: s.modes }).collect())
}

/// Energy fraction in the top half of the resolved spectrum.
pub fn high_frequency_fraction(f: &GridFn) -> Result<f64> {
    let sp = spectrum_report(&even_extension(f)?)?;
    Ok(sp.energy_fraction_above(sp.max_radius() / 2.0))
}

/// Log-log slope of the shell-averaged spectral amplitude over radii in
/// `[lo, hi]` times the largest resolved radius.
pub fn amplitude_decay_slope(f: &GridFn, lo: f64, hi: f64) -> Result<f64> {
    let sp = spectrum_report(&even_extension(f)?)?;
    let r = sp.max_radius();
    sp.decay_slope(lo * r, hi * r)
        .map(|s| 0.5 * s)
        .ok_or_else(|| Error::InvalidInput("too few spectral shells for a slope fit".into()))
}

/// `||a - b||_{L2}` in the grid quadrature.
pub fn l2_distance(a: &GridFn, b: &GridFn) -> Result<f64> {
    Ok(a.sub(b)?.norm_l2())
}

/// Indices of strict interior local minima.
pub fn strict_local_minima(v: &[f64]) -> Vec<usize> {
    (1..v.len().saturating_sub(1)).filter(|&i| v[i] < v[i - 1] && v[i] < v[i + 1]).collect()
}

pub fn second_differences(v: &[f64]) -> Vec<f64> {
    v.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minima_and_differences() {
        let v = [3.0, 1.0, 2.0, 0.5, 0.6, 0.6, 1.0];
        assert_eq!(strict_local_minima(&v), vec![1, 3]);
        let q: Vec<f64> = linspace(-2.0, 2.0, 9).iter().map(|t| t * t).collect();
        assert!(second_differences(&q).iter().all(|d| (d - 0.5).abs() < 1e-12));
    }

    #[test]
    fn even_extension_keeps_energy_smooth() {
        let g = Grid::new_1d(0.0, 1.0, 65, Convention::Endpoint).unwrap();
        let f = GridFn::from_fn(&g, |x, _| (3.0 * x).exp());
        let e = even_extension(&f).unwrap();
        assert_eq!(e.grid().n(0), 128);
        assert_eq!(e.values()[64], f.values()[64]);
        assert_eq!(e.values()[65], f.values()[63]);
        // the reflected field is continuous, so its spectrum decays faster
        // than |xi|^{-1} in amplitude
        assert!(amplitude_decay_slope(&f, 0.05, 0.5).unwrap() < -1.5);
        let g2 = Grid::new_2d([0.0, 0.0], [1.0, 2.0], [5, 4], Convention::Endpoint).unwrap();
        let f2 = GridFn::from_fn(&g2, |x, y| x + 10.0 * y);
        let e2 = even_extension(&f2).unwrap();
        assert_eq!((e2.grid().n(0), e2.grid().n(1)), (8, 6));
        assert_eq!(e2.values()[e2.grid().index(5, 4)], f2.values()[g2.index(3, 2)]);
    }
}
