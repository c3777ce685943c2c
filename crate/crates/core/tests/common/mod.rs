//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use mfgcn::coupling::CouplingSpec;
use mfgcn::torus::{DensityField, Grid, GridFunction, ValueField};
use nalgebra::{DMatrix, DVector};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// `a = 0.2 cos 2 pi x` with kernel eigenvalues `(0, 1)` on both sides.
pub fn standard_coupling(g: Grid) -> CouplingSpec {
    let a = ValueField::from_fn(g, |x| 0.2 * (2.0 * PI * x).cos());
    CouplingSpec::new(a, vec![0.0, 1.0], ValueField::zeros(g), vec![0.0, 1.0]).unwrap()
}

pub fn decoupled(g: Grid, a: impl Fn(f64) -> f64) -> CouplingSpec {
    CouplingSpec::new(ValueField::from_fn(g, a), vec![], ValueField::zeros(g), vec![]).unwrap()
}

pub fn sin_density(g: Grid, amp: f64) -> DensityField {
    DensityField::from_profile(g, |x| 1.0 + amp * (2.0 * PI * x).sin()).unwrap()
}

pub fn bump_density(g: Grid, center: f64, width: f64, floor: f64) -> DensityField {
    DensityField::from_profile(g, |x| {
        let d = (x - center).abs();
        let d = d.min(1.0 - d);
        (-(d * d) / (2.0 * width * width)).exp() + floor
    })
    .unwrap()
}

/// Stationary decoupled system `lam - chi'' + chi'^2 / 2 = a`,
/// `-m'' - (m chi')' = 0` on a fine periodic grid, solved by Newton on
/// `(chi, lam)` with central differences and `chi(0) = 0`. The density is then
/// `exp(-chi)` normalized, the zero-flux solution of the second equation.
pub struct CellSolution {
    pub lambda: f64,
    pub chi: Vec<f64>,
    pub m: Vec<f64>,
    pub newton_steps: usize,
}

pub fn newton_cell(a: impl Fn(f64) -> f64, n: usize) -> CellSolution {
    let h = 1.0 / n as f64;
    let av: Vec<f64> = (0..n).map(|j| a(j as f64 * h)).collect();
    let mut chi = vec![0.0; n];
    let mut lam = av.iter().sum::<f64>() / n as f64;
    let mut steps = 0;
    for it in 0..50 {
        steps = it + 1;
        let mut res = DVector::zeros(n + 1);
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        for j in 0..n {
            let (l, r) = ((j + n - 1) % n, (j + 1) % n);
            let d1 = (chi[r] - chi[l]) / (2.0 * h);
            let d2 = (chi[r] - 2.0 * chi[j] + chi[l]) / (h * h);
            res[j] = lam - d2 + 0.5 * d1 * d1 - av[j];
            jac[(j, j)] += 2.0 / (h * h);
            jac[(j, r)] += -1.0 / (h * h) + d1 / (2.0 * h);
            jac[(j, l)] += -1.0 / (h * h) - d1 / (2.0 * h);
            jac[(j, n)] = 1.0;
        }
        res[n] = chi[0];
        jac[(n, 0)] = 1.0;
        let step = jac.lu().solve(&(-&res)).expect("nonsingular Newton system");
        for j in 0..n {
            chi[j] += step[j];
        }
        lam += step[n];
        if step.amax() < 1e-14 {
            break;
        }
    }
    let w: Vec<f64> = chi.iter().map(|c| (-c).exp()).collect();
    let z = w.iter().sum::<f64>() * h;
    CellSolution {
        lambda: lam,
        chi,
        m: w.iter().map(|v| v / z).collect(),
        newton_steps: steps,
    }
}

fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Optimal transport between the grid measures `h m1` and `h m2` with circular
/// ground cost, by linear programming over all couplings.
pub fn lp_wasserstein1(m1: &DensityField, m2: &DensityField) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let g = m1.grid();
    let (n, h) = (g.n(), g.h());
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| p.add_var(circle_dist(g.x(i), g.x(j)), (0.0, f64::INFINITY)))
                .collect()
        })
        .collect();
    for i in 0..n {
        let row: Vec<_> = (0..n).map(|j| (vars[i][j], 1.0)).collect();
        p.add_constraint(row.as_slice(), ComparisonOp::Eq, h * m1.values()[i]);
        let col: Vec<_> = (0..n).map(|j| (vars[j][i], 1.0)).collect();
        p.add_constraint(col.as_slice(), ComparisonOp::Eq, h * m2.values()[i]);
    }
    p.solve().expect("feasible transport problem").objective()
}

/// Smallest eigenvalue of `-2 d^2/dx^2 + a` by inverse iteration, the
/// linearized (Hopf-Cole) form of the same cell problem.
pub fn hopf_cole_lambda(a: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut op = DMatrix::zeros(n, n);
    for j in 0..n {
        op[(j, j)] = 4.0 / (h * h) + a(j as f64 * h);
        op[(j, (j + 1) % n)] -= 2.0 / (h * h);
        op[(j, (j + n - 1) % n)] -= 2.0 / (h * h);
    }
    let eig = nalgebra::SymmetricEigen::new(op);
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}
