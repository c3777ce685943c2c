//! Duality bookkeeping between two solutions started from different measures.

use std::f64::consts::PI;

use mfgcn::coupling::CouplingSpec;
use mfgcn::diagnostics::lasry_lions_functional;
use mfgcn::noise::NoiseTree;
use mfgcn::solver::{solve_mfg_tree, SolveParams, Terminal};
use mfgcn::torus::{DensityField, Grid, ValueField};

fn main() -> mfgcn::Result<()> {
    env_logger::init();
    let grid = Grid::new(32)?;
    let a = ValueField::from_fn(grid, |x| 0.2 * (2.0 * PI * x).cos());
    let c = CouplingSpec::new(a, vec![0.0, 1.0], ValueField::zeros(grid), vec![0.0, 1.0])?;
    let tree = NoiseTree::build(0.5, 2.0, 4, 250)?;
    let p = SolveParams::picard(1e-12);
    let s1 = solve_mfg_tree(&c, &tree, &DensityField::from_profile(grid, |x| 1.0 + 0.8 * (2.0 * PI * x).sin())?, &Terminal::Coupling, &p)?;
    let s2 = solve_mfg_tree(&c, &tree, &DensityField::uniform(grid), &Terminal::Coupling, &p)?;
    let rep = lasry_lions_functional(&c, &s1, &s2)?;
    let n = rep.times.len() - 1;
    for k in (0..=n).step_by(n / 8) {
        println!("t = {:4.2}  bracket {:+.4e}  coupling {:.4e}  dissipation {:.4e}", rep.times[k], rep.bracket[k], rep.coupling[k], rep.dissipation[k]);
    }
    println!("identity residual {:.2e}, largest increase {:.2e}, holds {}", rep.identity_residual, rep.max_increase, rep.holds(1e-6));
    Ok(())
}
