//! Solves the standard monotone game on a six-epoch tree and prints the
//! residual history and the expected distance to uniform over time.

use std::f64::consts::PI;

use mfgcn::coupling::CouplingSpec;
use mfgcn::noise::NoiseTree;
use mfgcn::solver::{solve_mfg_tree, Damping, SolveParams, Terminal};
use mfgcn::torus::{wasserstein1, DensityField, Grid, ValueField};

fn main() -> mfgcn::Result<()> {
    env_logger::init();
    let grid = Grid::new(32)?;
    let a = ValueField::from_fn(grid, |x| 0.2 * (2.0 * PI * x).cos());
    let c = CouplingSpec::new(a, vec![0.0, 1.0], ValueField::zeros(grid), vec![0.0, 1.0])?;
    let tree = NoiseTree::build(0.5, 8.0, 6, 667)?;
    let m0 = DensityField::from_profile(grid, |x| 1.0 + 0.8 * (2.0 * PI * x).sin())?;
    let params = SolveParams {
        tol: 1e-7,
        damping: Damping::Picard,
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let sol = solve_mfg_tree(&c, &tree, &m0, &Terminal::Coupling, &params)?;
    println!("converged {} in {} iterations ({:.1?})", sol.converged, sol.iterations, start.elapsed());
    for (k, r) in sol.residuals.iter().enumerate() {
        println!("  iter {k:3}  residual {r:.3e}");
    }
    let uni = DensityField::uniform(grid);
    for i in (0..=tree.total_steps()).step_by(tree.fine_steps() / 2) {
        let d = sol.m.expect_at(i, |m| wasserstein1(m, &uni).unwrap());
        println!("  t = {:6.3}  E d1(m_t, uniform) = {d:.3e}", tree.time(i));
    }
    Ok(())
}
