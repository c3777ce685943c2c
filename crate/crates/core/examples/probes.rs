//! Forward and backward decay probes for the linear operators behind the
//! turnpike estimate.

use std::f64::consts::PI;

use mfgcn::diagnostics::{backward_decay_probe, discrete_heat_gap, fp_decay_probe, Drift, Source};
use mfgcn::torus::{Grid, SignedMeasure, ValueField};

fn main() -> mfgcn::Result<()> {
    env_logger::init();
    let grid = Grid::new(32)?;
    let gap = discrete_heat_gap(grid);
    let mu = SignedMeasure::centered_from(grid, grid.nodes().iter().map(|x| (2.0 * PI * x).cos()).collect())?;
    println!("discrete heat gap {gap:.3}");
    let drifts = [
        ("none", Drift::Zero),
        ("2 sin", Drift::Static(ValueField::from_fn(grid, |x| 2.0 * (2.0 * PI * x).sin()))),
        ("1.5", Drift::Static(ValueField::constant(grid, 1.5))),
    ];
    for (name, d) in &drifts {
        let f = fp_decay_probe(d, &mu, 0.5, 1e-4, (0.05, 0.3))?;
        let terminal = ValueField::from_fn(grid, |x| (2.0 * PI * x).cos());
        let free = backward_decay_probe(d, &Source::Zero, &terminal, 0.5, 1e-4, gap / 2.0)?;
        let forced = backward_decay_probe(
            d,
            &Source::Oscillating(ValueField::from_fn(grid, |x| (4.0 * PI * x).sin()), 3.0),
            &terminal,
            0.5,
            1e-4,
            gap / 2.0,
        )?;
        println!(
            "drift {name:6}: forward rate {:.2} (r2 {:.4}), backward rate {:.2}, C = {:.3} free, {:.3} forced",
            f.fit.rate, f.fit.r2, free.fit.rate, free.constant, forced.constant
        );
    }
    Ok(())
}
