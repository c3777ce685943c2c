mod common;

use approx::assert_abs_diff_eq;
use mfgcn::discounted::{solve_discounted, truncation_horizon, DiscountCaps, DiscountedSolution};
use mfgcn::noise::TreeRecipe;
use mfgcn::solver::SolveParams;
use mfgcn::torus::{DensityField, Grid, GridFunction};

fn recipe() -> TreeRecipe {
    TreeRecipe { sigma: 0.3, epoch_len: 2.0, dt: 2e-2, max_epochs: 4 }
}

#[test]
fn flat_cost_has_closed_form() {
    let g = Grid::new(16).unwrap();
    let c = common::decoupled(g, |_| 0.7);
    let caps = DiscountCaps { t_cap: 80.0, truncation_tol: 1e-8 };
    for delta in [0.5, 0.3] {
        let s = solve_discounted(&c, &recipe(), delta, &DensityField::uniform(g), &SolveParams::default(), &caps)
            .unwrap();
        let want = 0.7 * (1.0 - (-delta * s.t_max).exp());
        // The discount term is explicit, so each step multiplies by 1 - delta dt.
        let steps = s.base.tree().total_steps() as i32;
        let dt = s.base.tree().dt();
        let discrete = 0.7 * (1.0 - (1.0 - delta * dt).powi(steps));
        for v in s.scaled_value().values() {
            assert_abs_diff_eq!(*v, discrete, epsilon = 1e-12);
            assert!((v - want).abs() <= s.truncation_error_bound + 1e-2 * delta);
        }
    }
}

#[test]
fn scaled_value_respects_the_cost_bound() {
    let g = Grid::new(16).unwrap();
    let c = common::standard_coupling(g);
    let caps = DiscountCaps { t_cap: 40.0, truncation_tol: 1e-6 };
    let bound = DiscountedSolution::cost_bound(&c);
    for delta in [1.0, 0.5, 0.25] {
        let s = solve_discounted(&c, &recipe(), delta, &common::sin_density(g, 0.5), &SolveParams::picard(1e-10), &caps)
            .unwrap();
        assert!(s.scaled_value().max_abs() <= bound + 1e-9);
    }
}

#[test]
fn truncation_horizon_caps() {
    let caps = DiscountCaps { t_cap: 50.0, truncation_tol: 1e-6 };
    let (t, capped) = truncation_horizon(1.0, &caps);
    assert_abs_diff_eq!(t, 1e6f64.ln(), epsilon = 1e-12);
    assert!(!capped);
    assert_eq!(truncation_horizon(0.01, &caps), (50.0, true));
}

#[test]
fn rates_outside_the_unit_interval_are_rejected() {
    let g = Grid::new(16).unwrap();
    let c = common::standard_coupling(g);
    for delta in [0.0, -0.1, 1.5, f64::NAN] {
        assert!(solve_discounted(&c, &recipe(), delta, &DensityField::uniform(g), &SolveParams::default(), &DiscountCaps::default())
            .is_err());
    }
}
