//! Normalized correctors for two initial measures and their monotone pairing.

use std::f64::consts::PI;

use mfgcn::coupling::CouplingSpec;
use mfgcn::ergodic::{corrector_pairing, estimate_correctors, lambda_horizon_difference, Normalization};
use mfgcn::noise::TreeRecipe;
use mfgcn::solver::SolveParams;
use mfgcn::torus::{DensityField, Grid, ValueField};

fn main() -> mfgcn::Result<()> {
    env_logger::init();
    let grid = Grid::new(32)?;
    let a = ValueField::from_fn(grid, |x| 0.2 * (2.0 * PI * x).cos());
    let c = CouplingSpec::new(a, vec![0.0, 1.0], ValueField::zeros(grid), vec![0.0, 1.0])?;
    let recipe = TreeRecipe { sigma: 0.5, epoch_len: 1.0, dt: 2e-3, max_epochs: 6 };
    let p = SolveParams::picard(1e-11);
    let m1 = DensityField::from_profile(grid, |x| 1.0 + 0.8 * (2.0 * PI * x).sin())?;
    let m2 = DensityField::from_profile(grid, |x| 1.0 + 0.5 * (4.0 * PI * x).cos())?;
    let ladder = [2.0, 4.0, 6.0];
    let lambda = lambda_horizon_difference(&c, &recipe, &[4.0, 6.0], &m1, &p)?.lambda_hat;
    let ests = estimate_correctors(&c, &recipe, &[m1.clone(), m2.clone()], &ladder, lambda, &Normalization::standard(grid), 1e-6, &p)?;
    for (name, e) in ["m1", "m2"].iter().zip(&ests) {
        println!("{name}: ladder gaps {:?}, stabilized {}, sup|chi| {:.3e}", e.gaps, e.stabilized, e.chi.max_abs());
    }
    println!("constant c = {:+.6e}", ests[0].constant);
    println!("pairing int (chi1 - chi2) d(m1 - m2) = {:+.3e}", corrector_pairing(&ests[0].chi, &ests[1].chi, &m1, &m2));
    Ok(())
}
