//! Monotonicity certificates and the Lipschitz bound of a few couplings.

use std::f64::consts::PI;

use mfgcn::coupling::{monotonicity_certificate, CouplingSpec};
use mfgcn::torus::{Grid, ValueField};

fn main() -> mfgcn::Result<()> {
    let grid = Grid::new(32)?;
    let a = ValueField::from_fn(grid, |x| 0.2 * (2.0 * PI * x).cos());
    let cases = [
        ("local only", vec![0.0]),
        ("first mode", vec![0.0, 1.0]),
        ("three modes", vec![0.5, 1.0, 0.25, 0.1]),
        ("negative mode", vec![0.0, -0.5]),
    ];
    for (name, eigs) in cases {
        let monotone = CouplingSpec::new(a.clone(), eigs.clone(), a.clone(), vec![]).is_ok();
        let c = CouplingSpec::new_allow_non_monotone(a.clone(), eigs, a.clone(), vec![])?;
        let rep = monotonicity_certificate(&c, 64, 1);
        println!("{name:14} accepted {monotone:5}  min quadratic form {:+.3e}", rep.min_quadratic_form);
    }
    Ok(())
}
