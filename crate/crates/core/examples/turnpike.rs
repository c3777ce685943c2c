//! Distance of a finite-horizon solution to the stationary proxy over time.

use std::f64::consts::PI;

use mfgcn::coupling::CouplingSpec;
use mfgcn::diagnostics::{discrete_heat_gap, turnpike_report};
use mfgcn::ergodic::{estimate_stationary, stationary_proxy, StationaryParams};
use mfgcn::noise::TreeRecipe;
use mfgcn::solver::{SolveParams, Terminal, TreeSolver};
use mfgcn::torus::{DensityField, Grid, ValueField};

fn main() -> mfgcn::Result<()> {
    env_logger::init();
    let grid = Grid::new(32)?;
    let a = ValueField::from_fn(grid, |x| 0.2 * (2.0 * PI * x).cos());
    let c = CouplingSpec::new(a, vec![0.0, 1.0], ValueField::zeros(grid), vec![0.0, 1.0])?;
    let recipe = TreeRecipe { sigma: 0.5, epoch_len: 0.5, dt: 1e-3, max_epochs: 4 };
    let p = SolveParams::picard(1e-12);
    let m0 = DensityField::from_profile(grid, |x| 1.0 + 0.8 * (2.0 * PI * x).sin())?;
    let sp = StationaryParams { ladder: vec![2.0], anchors: (DensityField::uniform(grid), m0.clone()), tol: 1e-6 };
    let stat = estimate_stationary(&c, &recipe, &sp, &p)?;
    let tree = recipe.tree(2.0)?;
    let sol = TreeSolver::new(&c, &tree, p)?.solve(&m0, &Terminal::Coupling)?;
    let proxy = stationary_proxy(&c, &tree, &stat, &p)?;
    let rep = turnpike_report(&sol, &proxy)?;
    for k in (0..rep.times.len()).step_by(rep.times.len() / 10) {
        println!("t = {:5.2}  E d1 = {:.3e}  E|Du - Du_bar| = {:.3e}", rep.times[k], rep.m_distance[k], rep.du_distance[k]);
    }
    println!(
        "fitted rate {:.2} on {:?} (r2 {:.4}); heat gap {:.2}; contrast {:.1e}",
        rep.fit.rate,
        rep.fit.window,
        rep.fit.r2,
        discrete_heat_gap(grid),
        rep.contrast
    );
    Ok(())
}
