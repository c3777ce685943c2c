//! The three estimators of the ergodic constant on a small tree, plus the
//! single-path value from the cell problem when the noise is switched off.

use std::f64::consts::PI;

use mfgcn::coupling::CouplingSpec;
use mfgcn::discounted::DiscountCaps;
use mfgcn::ergodic::{estimate_lambda, ErgodicMethod, ErgodicParams, StationaryParams};
use mfgcn::noise::TreeRecipe;
use mfgcn::solver::SolveParams;
use mfgcn::torus::{DensityField, Grid, ValueField};

fn main() -> mfgcn::Result<()> {
    env_logger::init();
    let grid = Grid::new(32)?;
    let a = ValueField::from_fn(grid, |x| 0.2 * (2.0 * PI * x).cos());
    let c = CouplingSpec::new(a, vec![0.0, 1.0], ValueField::zeros(grid), vec![0.0, 1.0])?;
    let m0 = DensityField::from_profile(grid, |x| 1.0 + 0.8 * (2.0 * PI * x).sin())?;
    let ep = ErgodicParams {
        ladder: vec![4.0, 8.0],
        m0: m0.clone(),
        deltas: vec![1.0, 0.5],
        caps: DiscountCaps { t_cap: 40.0, truncation_tol: 1e-7 },
        stationary: StationaryParams { ladder: vec![8.0], anchors: (DensityField::uniform(grid), m0), tol: 1e-6 },
    };
    let p = SolveParams::picard(1e-11);
    for (sigma, max_epochs) in [(0.5, 6), (0.0, 0)] {
        let recipe = TreeRecipe { sigma, epoch_len: 4.0 / 3.0, dt: 2e-3, max_epochs };
        println!("sigma = {sigma}");
        for m in [ErgodicMethod::HorizonDifference, ErgodicMethod::Discounted, ErgodicMethod::StationaryFormula] {
            let e = estimate_lambda(&c, &recipe, m, &ep, &p)?;
            println!("  {m:?}: {:+.6e} (last change {:.1e})", e.lambda_hat, e.extrapolation_residual);
        }
    }
    Ok(())
}
