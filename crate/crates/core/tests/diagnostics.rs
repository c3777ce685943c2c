mod common;

use std::f64::consts::PI;

use mfgcn::coupling::CouplingSpec;
use mfgcn::diagnostics::{
    backward_decay_probe, certificate_check, default_lambda_grid, discrete_heat_gap, fit_exponential_decay,
    fp_decay_probe, lasry_lions_functional, turnpike_report, CertificateMode, Drift, Source,
};
use mfgcn::ergodic::{estimate_stationary, stationary_proxy, StationaryParams};
use mfgcn::noise::{NoiseTree, TreeRecipe};
use mfgcn::solver::{solve_mfg_tree, SolveParams, Terminal, TreeSolver};
use mfgcn::torus::{DensityField, Grid, SignedMeasure, ValueField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn mode(g: Grid, k: f64) -> SignedMeasure {
    SignedMeasure::centered_from(g, g.nodes().iter().map(|x| (2.0 * PI * k * x).cos()).collect()).unwrap()
}

fn modal_rate(g: Grid, k: f64) -> f64 {
    let h = g.h();
    2.0 / (h * h) * (1.0 - (2.0 * PI * k * h).cos())
}

#[test]
fn noisy_exponential_fit() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let s: Vec<(f64, f64)> = (0..100)
        .map(|i| {
            let t = i as f64 * 0.1;
            (t, 3.0 * (-0.5 * t).exp() * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
        })
        .collect();
    let f = fit_exponential_decay(&s, (0.0, 10.0)).unwrap();
    assert!((0.45..=0.55).contains(&f.rate), "{}", f.rate);
    assert!(f.r2 > 0.99 && f.r2 <= 1.0);
}

#[test]
fn two_modes_decay_between_their_rates() {
    let g = Grid::new(32).unwrap();
    let mu = mode(g, 1.0).add(&mode(g, 2.0));
    let early = fp_decay_probe(&Drift::Zero, &mu, 0.3, 1e-4, (0.0, 0.02)).unwrap();
    let late = fp_decay_probe(&Drift::Zero, &mu, 0.3, 1e-4, (0.2, 0.3)).unwrap();
    let (r1, r2) = (modal_rate(g, 1.0), modal_rate(g, 2.0));
    assert!(early.fit.rate > r1 && early.fit.rate < r2);
    assert!((late.fit.rate - r1).abs() < 0.02 * r1);
    assert!(late.fit.rate < early.fit.rate);
}

#[test]
fn backward_probe_recovers_modal_rate() {
    let g = Grid::new(32).unwrap();
    let cos = ValueField::from_fn(g, |x| (2.0 * PI * x).cos());
    let rep = backward_decay_probe(&Drift::Zero, &Source::Zero, &cos, 0.2, 1e-4, 10.0).unwrap();
    let gap = discrete_heat_gap(g);
    assert!((rep.fit.rate - gap).abs() < 0.02 * gap, "{} vs {gap}", rep.fit.rate);
    assert!((rep.constant - 1.0).abs() < 1e-12);
}

#[test]
fn zero_coupling_turnpike_rate_is_the_heat_gap() {
    let g = Grid::new(32).unwrap();
    let c = CouplingSpec::zero(g);
    let r = TreeRecipe { sigma: 0.5, epoch_len: 0.5, dt: 1e-3, max_epochs: 4 };
    let p = SolveParams::default();
    let sp = StationaryParams { ladder: vec![1.0], anchors: (DensityField::uniform(g), common::sin_density(g, 0.5)), tol: 1e-3 };
    let stat = estimate_stationary(&c, &r, &sp, &p).unwrap();
    let tree = r.tree(1.0).unwrap();
    let sol = TreeSolver::new(&c, &tree, p).unwrap().solve(&common::sin_density(g, 0.5), &Terminal::Coupling).unwrap();
    let proxy = stationary_proxy(&c, &tree, &stat, &p).unwrap();
    let rep = turnpike_report(&sol, &proxy).unwrap();
    let gap = discrete_heat_gap(g);
    assert!((rep.fit.rate - gap).abs() < 0.1 * gap, "{} vs {gap}", rep.fit.rate);

    // Started on the proxy itself, nothing moves.
    let still = turnpike_report(&proxy, &proxy).unwrap();
    assert!(still.m_distance.iter().all(|d| *d < 1e-14));
}

#[test]
fn duality_bookkeeping() {
    let g = Grid::new(32).unwrap();
    let tree = NoiseTree::build(0.5, 1.0, 2, 500).unwrap();
    let p = SolveParams::picard(1e-12);
    let c = common::standard_coupling(g);
    let a = solve_mfg_tree(&c, &tree, &common::sin_density(g, 0.8), &Terminal::Coupling, &p).unwrap();
    let same = lasry_lions_functional(&c, &a, &a).unwrap();
    assert!(same.bracket.iter().chain(&same.dissipation).all(|v| *v == 0.0));

    let zero = CouplingSpec::zero(g);
    let z1 = solve_mfg_tree(&zero, &tree, &common::sin_density(g, 0.8), &Terminal::Coupling, &p).unwrap();
    let z2 = solve_mfg_tree(&zero, &tree, &DensityField::uniform(g), &Terminal::Coupling, &p).unwrap();
    let rep = lasry_lions_functional(&zero, &z1, &z2).unwrap();
    assert!(rep.holds(1e-6));
    assert!(rep.bracket.iter().all(|b| b.abs() < 1e-15));

    let b = solve_mfg_tree(&c, &tree, &DensityField::uniform(g), &Terminal::Coupling, &p).unwrap();
    let rep = lasry_lions_functional(&c, &a, &b).unwrap();
    assert!(rep.holds(1e-6));
    assert!(rep.bracket.windows(2).all(|w| w[1] <= w[0] + 1e-15 * (1.0 + rep.magnitude)));

    let other_tree = NoiseTree::build(0.5, 1.0, 1, 1000).unwrap();
    let mismatch = solve_mfg_tree(&c, &other_tree, &DensityField::uniform(g), &Terminal::Coupling, &p).unwrap();
    assert!(lasry_lions_functional(&c, &a, &mismatch).is_err());
}

#[test]
fn synthetic_certificate_holds() {
    let horizon = 6.0;
    let t: Vec<f64> = (0..=120).map(|i| i as f64 * 0.05).collect();
    let alpha: Vec<f64> = t.iter().map(|s| (-s).exp() + (-(horizon - s)).exp()).collect();
    let rep = certificate_check(&t, &alpha, &alpha, &alpha, CertificateMode::Finite, &default_lambda_grid()).unwrap();
    assert!(rep.holds, "{rep:?}");
    assert!(rep.c0.is_finite() && rep.c0 < 10.0);
    assert!(rep.conclusion_margin >= 0.0);
    assert!((rep.conclusion_rate - 1.0).abs() < 0.05);
    let disc = certificate_check(&t, &alpha, &alpha, &alpha, CertificateMode::Discounted { delta: 0.1 }, &default_lambda_grid())
        .unwrap();
    assert!(disc.hypotheses.iter().all(|h| h.margin.is_finite()));
}

#[test]
fn certificate_rejects_bad_input() {
    let t = [0.0, 1.0, 2.0];
    assert!(certificate_check(&t, &[1.0, f64::NAN, 1.0], &[1.0; 3], &[1.0; 3], CertificateMode::Finite, &default_lambda_grid()).is_err());
    assert!(certificate_check(&t, &[1.0; 2], &[1.0; 3], &[1.0; 3], CertificateMode::Finite, &default_lambda_grid()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_is_scale_equivariant(rate in 0.1f64..5.0, amp in 0.1f64..10.0, k in 1e-3f64..1e3) {
        let s: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 * 0.05, amp * (-rate * i as f64 * 0.05).exp())).collect();
        let scaled: Vec<(f64, f64)> = s.iter().map(|(t, v)| (*t, k * v)).collect();
        let (a, b) = (fit_exponential_decay(&s, (0.0, 2.0)).unwrap(), fit_exponential_decay(&scaled, (0.0, 2.0)).unwrap());
        prop_assert!((a.rate - b.rate).abs() < 1e-9 * (1.0 + a.rate));
        prop_assert!((b.amplitude / a.amplitude - k).abs() < 1e-9 * k);
        prop_assert!((0.0..=1.0).contains(&a.r2));
    }

    #[test]
    fn fp_probe_keeps_centering(r in prop::collection::vec(-1.0f64..1.0, 16), amp in 0.0f64..2.0) {
        let g = Grid::new(16).unwrap();
        let mu = SignedMeasure::centered_from(g, r).unwrap();
        let v = ValueField::from_fn(g, |x| amp * (2.0 * PI * x).sin());
        let rep = fp_decay_probe(&Drift::Static(v), &mu, 0.05, 1e-3, (0.0, 0.05)).unwrap();
        prop_assert!(rep.max_total < 1e-12);
        prop_assert!(rep.norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}
