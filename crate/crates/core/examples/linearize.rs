//! Finite differences of the value at time zero against the linearized
//! system, and the derivative bound over a few random directions.

use std::f64::consts::PI;

use mfgcn::coupling::CouplingSpec;
use mfgcn::linearized::{derivative_bound_check, derivative_check};
use mfgcn::noise::NoiseTree;
use mfgcn::solver::{solve_mfg_tree, SolveParams, Terminal};
use mfgcn::torus::{DensityField, Grid, SignedMeasure, ValueField};
use rand::{Rng, SeedableRng};

fn main() -> mfgcn::Result<()> {
    env_logger::init();
    let grid = Grid::new(32)?;
    let a = ValueField::from_fn(grid, |x| 0.2 * (2.0 * PI * x).cos());
    let c = CouplingSpec::new(a.clone(), vec![0.0, 1.0], a, vec![0.0, 1.0])?;
    let tree = NoiseTree::build(0.5, 2.0, 2, 200)?;
    let p = SolveParams::picard(1e-13);
    let m0 = DensityField::from_profile(grid, |x| 1.0 + 0.8 * (2.0 * PI * x).sin())?;
    let rho = SignedMeasure::centered_from(grid, grid.nodes().iter().map(|x| (2.0 * PI * x).cos()).collect())?;
    let rep = derivative_check(&c, &tree, &m0, &rho, &[0.04, 0.02, 0.01], &p)?;
    println!("errors {:?}", rep.errors);
    println!("halving ratios {:?}, slope {:.3}", rep.halving_ratios, rep.slope);

    let base = solve_mfg_tree(&c, &tree, &m0, &Terminal::Coupling, &p)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let dirs: Vec<SignedMeasure> = std::iter::once(Ok(rho))
        .chain((0..4).map(|_| SignedMeasure::centered_from(grid, (0..grid.n()).map(|_| rng.gen_range(-1.0..1.0)).collect())))
        .collect::<mfgcn::Result<_>>()?;
    let bound = derivative_bound_check(&base, &c, &dirs, 2.0)?;
    println!("sup|z0| / ||rho|| = {:?}; C = {:.3}; holds {}", bound.ratios, bound.constant, bound.holds);
    Ok(())
}
