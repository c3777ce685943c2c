//! Linearized system around a solved equilibrium and measure-derivative checks.
//!
//! The linear pair is the exact derivative of the discrete scheme in
//! [`crate::solver`], so finite differences of the nonlinear solver converge to
//! it at first order in the perturbation size.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{CouplingSpec, Which};
use crate::error::{MfgError, Result};
use crate::noise::{NoiseTree, TreeField};
use crate::solver::{
    average_raw, drift_coeffs, transport_adjoint, Frame, MfgTreeSolution, Scheme, SolveParams,
    Terminal, TreeSolver, Traj,
};
use crate::torus::{spline_shift, DensityField, GridFunction, SignedMeasure, ValueField};

#[derive(Debug, Clone)]
pub struct LinearizedSolution {
    pub z: TreeField<ValueField>,
    pub rho: TreeField<SignedMeasure>,
    pub base: MfgTreeSolution,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl LinearizedSolution {
    pub fn z0(&self) -> &ValueField {
        self.z.root_initial()
    }

    /// Largest `|h sum rho|` over all nodes and times.
    pub fn max_total_mass(&self) -> f64 {
        self.rho
            .nodes()
            .iter()
            .flatten()
            .map(|r| r.total().abs())
            .fold(0.0, f64::max)
    }
}

struct Linearization<'a> {
    c: &'a CouplingSpec,
    tree: &'a NoiseTree,
    scheme: Scheme,
    u: Traj,
    m: Traj,
    delta: f64,
    fixed_terminal: bool,
}

impl<'a> Linearization<'a> {
    fn backward(&self, rho: &Traj) -> Result<Traj> {
        let tree = self.tree;
        let h = self.scheme.grid().h();
        let dt = self.scheme.dt();
        let n = self.scheme.grid().n();
        let mut z: Traj = vec![Vec::new(); tree.num_nodes()];
        for depth in (0..=tree.epochs()).rev() {
            let ids: Vec<usize> = tree.nodes_at_depth(depth).collect();
            let done: Vec<Vec<Vec<f64>>> = ids
                .par_iter()
                .map(|&node| {
                    let steps = tree.node_steps(node);
                    let mut s = vec![Vec::new(); steps + 1];
                    s[steps] = match tree.children(node) {
                        None if self.fixed_terminal => vec![0.0; n],
                        None => self
                            .c
                            .flat_derivative_raw(Which::Terminal, &rho[node][steps])
                            .into_values(),
                        Some((up, down)) => average_raw(&z[up][0], &z[down][0], h, tree.increment()),
                    };
                    for k in (0..steps).rev() {
                        let src = self.c.flat_derivative_raw(Which::Running, &rho[node][k]);
                        let (a, b) = drift_coeffs(&self.u[node][k + 1], h);
                        let zn = &s[k + 1];
                        let mut out: Vec<f64> = (0..n)
                            .map(|j| {
                                let dm = (zn[j] - zn[(j + n - 1) % n]) / h;
                                let dp = (zn[(j + 1) % n] - zn[j]) / h;
                                let lz = a[j] * dm + b[j] * dp;
                                zn[j] + dt * (src.values()[j] - lz - self.delta * zn[j])
                            })
                            .collect();
                        self.scheme.diffuse(&mut out);
                        s[k] = out;
                    }
                    s
                })
                .collect();
            for (node, s) in ids.into_iter().zip(done) {
                z[node] = s;
            }
        }
        Ok(z)
    }

    fn forward(&self, z: &Traj, rho0: &[f64]) -> Result<Traj> {
        let tree = self.tree;
        let h = self.scheme.grid().h();
        let dt = self.scheme.dt();
        let n = self.scheme.grid().n();
        let mut rho: Traj = vec![Vec::new(); tree.num_nodes()];
        for depth in 0..=tree.epochs() {
            let ids: Vec<usize> = tree.nodes_at_depth(depth).collect();
            let done: Vec<Vec<Vec<f64>>> = ids
                .par_iter()
                .map(|&node| {
                    let start = match tree.parent(node) {
                        None => rho0.to_vec(),
                        Some(p) => {
                            let end = rho[p].last().expect("parent filled");
                            spline_shift(end, h, tree.kick(node))
                        }
                    };
                    let steps = tree.node_steps(node);
                    let mut s = Vec::with_capacity(steps + 1);
                    s.push(start);
                    for k in 0..steps {
                        let u = &self.u[node][k + 1];
                        let zn = &z[node][k + 1];
                        let (a, b) = drift_coeffs(u, h);
                        let mut da = vec![0.0; n];
                        let mut db = vec![0.0; n];
                        for j in 0..n {
                            let l = (j + n - 1) % n;
                            let r = (j + 1) % n;
                            if u[j] - u[l] > 0.0 {
                                da[j] = (zn[j] - zn[l]) / h;
                            }
                            if u[r] - u[j] < 0.0 {
                                db[j] = (zn[r] - zn[j]) / h;
                            }
                        }
                        let mut r_t = s[k].clone();
                        self.scheme.diffuse(&mut r_t);
                        let mut m_t = self.m[node][k].clone();
                        self.scheme.diffuse(&mut m_t);
                        let main = transport_adjoint(&r_t, &a, &b, dt, h);
                        let pert = transport_adjoint(&m_t, &da, &db, dt, h);
                        s.push((0..n).map(|j| main[j] + pert[j] - m_t[j]).collect());
                    }
                    s
                })
                .collect();
            for (node, s) in ids.into_iter().zip(done) {
                rho[node] = s;
            }
        }
        Ok(rho)
    }
}

/// Solves the linearized system around `base` with initial perturbation `rho0`.
/// The terminal condition follows the base: coupling terminal costs are
/// differentiated, fixed terminal fields give `z_T = 0`.
pub fn solve_linearized(
    base: &MfgTreeSolution,
    c: &CouplingSpec,
    rho0: &SignedMeasure,
    terminal: &Terminal,
    delta: f64,
) -> Result<LinearizedSolution> {
    if base.frame != Frame::Physical {
        return Err(MfgError::Param("linearization needs a physical-frame base".into()));
    }
    if rho0.grid() != c.grid() {
        return Err(MfgError::GridMismatch(c.grid().n(), rho0.grid().n()));
    }
    if rho0.total().abs() > 1e-8 {
        return Err(MfgError::NotCentered(rho0.total()));
    }
    if !base.converged {
        warn!("linearizing around an unconverged base solution");
    }
    let tree = base.tree();
    let params = base.params;
    let raw = |f: &TreeField<ValueField>| -> Traj {
        f.nodes()
            .iter()
            .map(|s| s.iter().map(|v| v.values().to_vec()).collect())
            .collect()
    };
    let lin = Linearization {
        c,
        tree,
        scheme: Scheme::new(c.grid(), tree.dt(), params.cfl_factor)?,
        u: raw(&base.u),
        m: base
            .m
            .nodes()
            .iter()
            .map(|s| s.iter().map(|v| v.values().to_vec()).collect())
            .collect(),
        delta,
        fixed_terminal: matches!(terminal, Terminal::Fields(_)),
    };
    let h = c.grid().h();
    let n = c.grid().n();
    let zeros: Traj = (0..tree.num_nodes())
        .map(|node| vec![vec![0.0; n]; tree.node_steps(node) + 1])
        .collect();
    let mut rho_bar = lin.forward(&zeros, rho0.values())?;
    let mut z_prev = zeros;
    let mut residuals = Vec::new();
    let mut converged = false;
    let scale = 1.0 + rho0.l1();
    for iter in 0..params.max_iters {
        let z = lin.backward(&rho_bar)?;
        let rho_new = lin.forward(&z, rho0.values())?;
        let beta = params.damping.weight(iter);
        let mut res: f64 = 0.0;
        for node in 0..rho_bar.len() {
            for k in 0..rho_bar[node].len() {
                let mut d = 0.0;
                for j in 0..n {
                    let v = (1.0 - beta) * rho_bar[node][k][j] + beta * rho_new[node][k][j];
                    d += (v - rho_bar[node][k][j]).abs();
                    rho_bar[node][k][j] = v;
                }
                let dz = z[node][k]
                    .iter()
                    .zip(&z_prev[node][k])
                    .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
                res = res.max(h * d + dz);
            }
        }
        residuals.push(res);
        z_prev = z;
        if res <= params.tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("linearized iteration stopped at residual {:.3e}", residuals.last().unwrap());
    }
    let grid = c.grid();
    let z = z_prev
        .into_iter()
        .map(|s| s.into_iter().map(|v| ValueField::from_raw(grid, v)).collect())
        .collect();
    let rho = rho_bar
        .into_iter()
        .map(|s| {
            s.into_iter()
                .map(|v| SignedMeasure::zeros(grid).with_values(v))
                .collect()
        })
        .collect();
    Ok(LinearizedSolution {
        z: TreeField::from_nodes(tree.clone(), z)?,
        rho: TreeField::from_nodes(tree.clone(), rho)?,
        base: base.clone(),
        residuals,
        converged,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub epsilons: Vec<f64>,
    /// `max_x |(u0(m0 + eps rho0) - u0(m0)) / eps - z0|` per epsilon.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log e` against `log eps`.
    pub slope: f64,
    /// `e(2 eps) / e(eps)` for every consecutive halving found in the list.
    pub halving_ratios: Vec<f64>,
    pub z0_sup: f64,
    pub converged: bool,
}

/// Finite differences of the nonlinear solver against the linearized solve.
pub fn derivative_check(
    c: &CouplingSpec,
    tree: &NoiseTree,
    m0: &DensityField,
    rho0: &SignedMeasure,
    epsilons: &[f64],
    params: &SolveParams,
) -> Result<DerivativeReport> {
    let solver = TreeSolver::new(c, tree, *params)?;
    let base = solver.solve(m0, &Terminal::Coupling)?;
    let lin = solve_linearized(&base, c, rho0, &Terminal::Coupling, 0.0)?;
    let z0 = lin.z0().values();
    let mut converged = base.converged && lin.converged;
    let mut errors = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let m_eps = m0.perturbed(eps, rho0)?;
        let sol = solver.solve(&m_eps, &Terminal::Coupling)?;
        converged &= sol.converged;
        let e = sol
            .u0()
            .values()
            .iter()
            .zip(base.u0().values())
            .zip(z0)
            .map(|((a, b), z)| ((a - b) / eps - z).abs())
            .fold(0.0, f64::max);
        errors.push(e);
    }
    let mut halving_ratios = Vec::new();
    for (i, &e1) in epsilons.iter().enumerate() {
        for (j, &e2) in epsilons.iter().enumerate() {
            if i != j && ((e1 / e2) - 2.0).abs() < 1e-9 && errors[j] > 0.0 {
                halving_ratios.push(errors[i] / errors[j]);
            }
        }
    }
    Ok(DerivativeReport {
        epsilons: epsilons.to_vec(),
        slope: log_log_slope(epsilons, &errors),
        errors,
        halving_ratios,
        z0_sup: lin.z0().max_abs(),
        converged,
    })
}

fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// `sup|z0| / ||rho0||` for each direction, in input order.
    pub ratios: Vec<f64>,
    /// Constant calibrated on the first direction, times the safety factor.
    pub constant: f64,
    pub holds: bool,
}

/// Checks `sup|z0| <= C ||rho0||` (discrete `H^{-1}` norm) with `C` calibrated
/// on the first direction.
pub fn derivative_bound_check(
    base: &MfgTreeSolution,
    c: &CouplingSpec,
    directions: &[SignedMeasure],
    safety: f64,
) -> Result<BoundReport> {
    if directions.is_empty() {
        return Err(MfgError::Param("no directions supplied".into()));
    }
    let mut ratios = Vec::with_capacity(directions.len());
    for rho in directions {
        let lin = solve_linearized(base, c, rho, &Terminal::Coupling, 0.0)?;
        ratios.push(lin.z0().max_abs() / rho.dual_norm());
    }
    let constant = safety * ratios[0];
    Ok(BoundReport {
        holds: ratios.iter().all(|r| *r <= constant),
        ratios,
        constant,
    })
}

/// Approximates `delta U / delta m (., m0, y_j)` by a centered column at cell `j`.
pub fn measure_derivative_column(
    base: &MfgTreeSolution,
    c: &CouplingSpec,
    j: usize,
) -> Result<ValueField> {
    let rho = SignedMeasure::dirac_column(c.grid(), j);
    Ok(solve_linearized(base, c, &rho, &Terminal::Coupling, 0.0)?.z0().clone())
}
