//! Discounted values `delta u^delta` for a shrinking discount rate, next to
//! the horizon-difference estimate they approach.

use std::f64::consts::PI;

use mfgcn::coupling::CouplingSpec;
use mfgcn::discounted::{solve_discounted, DiscountCaps};
use mfgcn::ergodic::lambda_horizon_difference;
use mfgcn::noise::TreeRecipe;
use mfgcn::solver::SolveParams;
use mfgcn::torus::{DensityField, Grid, ValueField};

fn main() -> mfgcn::Result<()> {
    env_logger::init();
    let grid = Grid::new(32)?;
    let a = ValueField::from_fn(grid, |x| 0.2 * (2.0 * PI * x).cos());
    let c = CouplingSpec::new(a, vec![0.0, 1.0], ValueField::zeros(grid), vec![0.0, 1.0])?;
    let recipe = TreeRecipe { sigma: 0.5, epoch_len: 4.0 / 3.0, dt: 2e-3, max_epochs: 6 };
    let m0 = DensityField::uniform(grid);
    let p = SolveParams::picard(1e-11);
    let caps = DiscountCaps { t_cap: 40.0, truncation_tol: 1e-7 };
    for delta in [1.0, 0.5] {
        let s = solve_discounted(&c, &recipe, delta, &m0, &p, &caps)?;
        println!(
            "delta {delta:4}  t_max {:6.2}  mean delta u = {:+.6e}  truncation bound {:.1e}{}",
            s.t_max,
            s.scaled_value().mean(),
            s.truncation_error_bound,
            if s.capped { " (capped)" } else { "" }
        );
    }
    let hd = lambda_horizon_difference(&c, &recipe, &[4.0, 8.0], &m0, &p)?;
    println!("horizon difference      = {:+.6e}", hd.lambda_hat);
    Ok(())
}
