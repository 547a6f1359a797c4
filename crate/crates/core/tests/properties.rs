//! Invariants checked on random inputs.

use proptest::prelude::*;

use otmatch::experiments::deconvolve::DeconvolveConfig;
use otmatch::experiments::{ExperimentConfig, ExperimentKind};
use otmatch::grid::{add_noise, make_density, mass, Convention, Density, Grid, GridFn, NoiseSpec};
use otmatch::invert::{evaluate_objective, run_inversion, ConvolutionModel, ForwardModel, InversionConfig, MismatchSpec};
use otmatch::models::KernelSpec;
use otmatch::transport1d::w2_1d;
use otmatch::transport_nd::{w2_gaussian, GaussianParams};

const METRICS: [MismatchSpec; 7] = [
    MismatchSpec::L2,
    MismatchSpec::Hs { s: 1.0 },
    MismatchSpec::Hs { s: -1.0 },
    MismatchSpec::DotHs { s: -1.0 },
    MismatchSpec::WeightedHs { s: -1.0 },
    MismatchSpec::W2,
    MismatchSpec::SurrogateHm1,
];

/// Up to three Gaussian bumps `(centre, width, weight)`.
fn mixture() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, 0.3..1.2f64, 0.1..1.0f64), 1..=3)
}

fn sample(g: &Grid, parts: &[(f64, f64, f64)], shift: f64) -> GridFn {
    GridFn::from_fn(g, |x, _| parts.iter().map(|&(c, s, w)| w * (-(x - shift - c).powi(2) / (2.0 * s * s)).exp()).sum::<f64>())
}

fn line() -> Grid {
    Grid::new_1d(-10.0, 10.0, 801, Convention::Endpoint).unwrap()
}

fn density(parts: &[(f64, f64, f64)], shift: f64) -> Density {
    make_density(&sample(&line(), parts, shift), 1.0, 1e-8).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_metric_vanishes_on_equal_data(parts in mixture()) {
        let f = density(&parts, 0.0).into_gridfn();
        for spec in METRICS {
            let v = evaluate_objective(&spec, &f, &f).unwrap();
            prop_assert!(v.abs() < 1e-12, "{spec:?}: {v:e}");
        }
    }

    #[test]
    fn every_metric_is_nonnegative(a in mixture(), b in mixture()) {
        let f = density(&a, 0.0).into_gridfn();
        let g = density(&b, 0.0).into_gridfn();
        for spec in METRICS {
            let v = evaluate_objective(&spec, &f, &g).unwrap();
            prop_assert!(v >= 0.0, "{spec:?}: {v:e}");
        }
    }

    #[test]
    fn w2_1d_is_symmetric(a in mixture(), b in mixture()) {
        let (f, g) = (density(&a, 0.0), density(&b, 0.0));
        let fg = w2_1d(&f, &g).unwrap();
        let gf = w2_1d(&g, &f).unwrap();
        prop_assert!((fg - gf).abs() <= 1e-10 * fg.max(1e-12), "{fg} vs {gf}");
    }

    #[test]
    fn w2_1d_of_a_node_shift_is_its_square(parts in mixture(), k in -40i32..=40) {
        let h = line().h(0);
        let a = k as f64 * h;
        let w = w2_1d(&density(&parts, 0.0), &density(&parts, a)).unwrap();
        prop_assert!((w - a * a).abs() <= 1e-6 * (a * a).max(1e-4), "{w} vs {}", a * a);
    }

    #[test]
    fn make_density_hits_the_target_mass(parts in mixture(), target in 0.1..10.0f64, floor in 0.0..1e-3f64) {
        let d = make_density(&sample(&line(), &parts, 0.0), target, floor).unwrap();
        prop_assert!((d.mass() - target).abs() <= 1e-12 * target);
        prop_assert!(d.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn noise_keeps_mass_and_sign(parts in mixture(), level in 0.0..0.5f64, seed in any::<u64>()) {
        let d = density(&parts, 0.0);
        let noisy = add_noise(&d, NoiseSpec::new(level, seed).unwrap()).unwrap();
        prop_assert!((noisy.mass() - d.mass()).abs() <= 1e-12);
        prop_assert!(noisy.values().iter().all(|&v| v > 0.0));
        let again = add_noise(&d, NoiseSpec::new(level, seed).unwrap()).unwrap();
        prop_assert_eq!(noisy.values(), again.values());
    }

    #[test]
    fn w2_gaussian_is_bitwise_symmetric(m in prop::array::uniform2(-2.0..2.0f64), n in prop::array::uniform2(-2.0..2.0f64),
                                        p in prop::array::uniform3(-1.0..1.0f64), q in prop::array::uniform3(-1.0..1.0f64)) {
        let spd = |c: [f64; 3]| nalgebra::DMatrix::from_row_slice(2, 2, &[1.0 + c[0] * c[0], c[1], c[1], 1.0 + c[2] * c[2]]);
        let a = GaussianParams::new(&m, spd(p));
        let b = GaussianParams::new(&n, spd(q));
        prop_assert_eq!(w2_gaussian(&a, &b).unwrap(), w2_gaussian(&b, &a).unwrap());
        prop_assert_eq!(w2_gaussian(&a, &a).unwrap(), 0.0);
        let d2 = (m[0] - n[0]).powi(2) + (m[1] - n[1]).powi(2);
        prop_assert!(w2_gaussian(&a, &b).unwrap() >= d2 - 1e-12);
    }

    #[test]
    fn deconvolve_config_round_trips(n in 16usize..1024, lvl in prop::collection::vec(0.0..0.9f64, 1..4), iters in 1usize..1000) {
        let mut inner = DeconvolveConfig { n, noise_levels: lvl, ..DeconvolveConfig::default() };
        inner.inversion.max_iter = iters;
        let cfg = ExperimentConfig::Deconvolve(inner);
        let text = cfg.canonical_json().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.sha256().unwrap(), cfg.sha256().unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn descent_objective_never_increases(parts in mixture(), spec_ix in 0usize..3) {
        let spec = [MismatchSpec::L2, MismatchSpec::DotHs { s: -1.0 }, MismatchSpec::W2][spec_ix];
        let g = Grid::new_1d(-6.0, 6.0, 97, Convention::Endpoint).unwrap();
        let model = ConvolutionModel::new(g.clone(), KernelSpec::laplace(1.0)).unwrap();
        let truth = sample(&g, &parts, 0.0).map(|v| v + 0.05);
        let data = model.forward(truth.values()).unwrap();
        let m0 = vec![mass(&truth) / 12.0; g.len()];
        let cfg = InversionConfig { max_iter: 15, ..InversionConfig::default() };
        let tr = run_inversion(&model, &spec, &data, &m0, &cfg).unwrap();
        for w in tr.rows.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective * (1.0 + 1e-12), "{spec:?}: {} -> {}", w[0].objective, w[1].objective);
        }
    }
}

#[test]
fn every_default_config_round_trips() {
    for kind in ExperimentKind::ALL {
        let cfg = ExperimentConfig::default_for(kind);
        cfg.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&cfg.canonical_json().unwrap()).unwrap();
        assert_eq!(back, cfg, "{kind}");
    }
}
