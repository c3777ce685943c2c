//! Within-epoch HJ and Fokker-Planck steps, branch rules at common-noise kicks
//! and the forward-backward fixed point on the noise tree.
//!
//! One time step of length `dt` with `A = I - dt Delta_h`:
//!
//! ```text
//! u_k     = A^{-1} ( u_{k+1} + dt (f(m_k) - H(D u_{k+1}) - delta u_{k+1}) )
//! m_{k+1} = (I - dt L_{k+1}^T) A^{-1} m_k
//! ```
//!
//! where `H` is the Godunov Hamiltonian and `L_{k+1} z = a D^- z + b D^+ z`
//! its linearization at `u_{k+1}`. The transport step is the exact adjoint of
//! the linearized HJ step, which keeps the discrete duality pairing exact.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingSpec, Which};
use crate::error::{MfgError, Result};
use crate::torus::{
    spline_shift, DensityField, Grid, GridFunction, ImplicitDiffusion, Translate, ValueField,
};
use crate::noise::{NoiseTree, TreeField};

pub const DEFAULT_CFL: f64 = 0.5;

/// Raw per-node trajectories, `node -> slice -> samples`.
pub(crate) type Traj = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Damping {
    /// Weights `2 / (k + 2)`.
    FictitiousPlay,
    Picard,
    Fixed(f64),
}

impl Damping {
    pub fn weight(&self, iter: usize) -> f64 {
        match self {
            Damping::FictitiousPlay => 2.0 / (iter as f64 + 2.0),
            Damping::Picard => 1.0,
            Damping::Fixed(theta) => *theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    pub max_iters: usize,
    pub tol: f64,
    pub damping: Damping,
    pub cfl_factor: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            max_iters: 200,
            tol: 1e-7,
            damping: Damping::FictitiousPlay,
            cfl_factor: DEFAULT_CFL,
        }
    }
}

impl SolveParams {
    pub fn picard(tol: f64) -> Self {
        SolveParams {
            tol,
            damping: Damping::Picard,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(MfgError::Param(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(MfgError::Param("max_iters must be at least 1".into()));
        }
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return Err(MfgError::Param(format!(
                "cfl_factor must lie in (0, 1], got {}",
                self.cfl_factor
            )));
        }
        if let Damping::Fixed(t) = self.damping {
            if !(t > 0.0 && t <= 1.0) {
                return Err(MfgError::Param(format!("damping weight {t} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[inline]
fn godunov(dp: f64, dm: f64) -> f64 {
    let a = dm.max(0.0);
    let b = dp.min(0.0);
    0.5 * (a * a + b * b)
}

/// Discrete Hamiltonian `H(D^+ u, D^- u)` at every node.
pub(crate) fn hamiltonian_raw(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|j| {
            let dp = (u[(j + 1) % n] - u[j]) / h;
            let dm = (u[j] - u[(j + n - 1) % n]) / h;
            godunov(dp, dm)
        })
        .collect()
}

/// Upwind drift coefficients `a = max(D^- u, 0)`, `b = min(D^+ u, 0)`.
pub(crate) fn drift_coeffs(u: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for j in 0..n {
        a[j] = ((u[j] - u[(j + n - 1) % n]) / h).max(0.0);
        b[j] = ((u[(j + 1) % n] - u[j]) / h).min(0.0);
    }
    (a, b)
}

/// `v - dt L^T v` for the upwind transport with coefficients `(a, b)`.
pub(crate) fn transport_adjoint(v: &[f64], a: &[f64], b: &[f64], dt: f64, h: f64) -> Vec<f64> {
    let n = v.len();
    let c = dt / h;
    (0..n)
        .map(|j| {
            let l = (j + n - 1) % n;
            let r = (j + 1) % n;
            v[j] - c * (v[j] * a[j] - v[r] * a[r] + v[l] * b[l] - v[j] * b[j])
        })
        .collect()
}

/// Fixed-`dt` stepping operators on one grid.
#[derive(Debug, Clone)]
pub struct Scheme {
    grid: Grid,
    dt: f64,
    cfl_factor: f64,
    diffusion: ImplicitDiffusion,
}

impl Scheme {
    pub fn new(grid: Grid, dt: f64, cfl_factor: f64) -> Result<Self> {
        Ok(Scheme {
            grid,
            dt,
            cfl_factor,
            diffusion: ImplicitDiffusion::new(grid, 1.0, dt)?,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub(crate) fn diffuse(&self, v: &mut [f64]) {
        self.diffusion.apply_in_place(v);
    }

    pub(crate) fn check_cfl(&self, u: &[f64]) -> Result<()> {
        let h = self.grid.h();
        let n = u.len();
        let mut g: f64 = 0.0;
        for j in 0..n {
            g = g.max(((u[(j + 1) % n] - u[j]) / h).abs());
        }
        let limit = self.cfl_factor * h / (g + 1.0);
        if self.dt > limit {
            return Err(MfgError::Cfl { dt: self.dt, limit });
        }
        Ok(())
    }

    pub(crate) fn hj_raw(&self, u_next: &[f64], f_now: &[f64], delta: f64) -> Result<Vec<f64>> {
        self.check_cfl(u_next)?;
        let h = self.grid.h();
        let ham = hamiltonian_raw(u_next, h);
        let mut out: Vec<f64> = (0..u_next.len())
            .map(|j| u_next[j] + self.dt * (f_now[j] - ham[j] - delta * u_next[j]))
            .collect();
        self.diffuse(&mut out);
        Ok(out)
    }

    pub(crate) fn fp_raw(&self, m_now: &[f64], u_drift: &[f64]) -> Result<Vec<f64>> {
        self.check_cfl(u_drift)?;
        let mut tmp = m_now.to_vec();
        self.diffuse(&mut tmp);
        let (a, b) = drift_coeffs(u_drift, self.grid.h());
        Ok(transport_adjoint(&tmp, &a, &b, self.dt, self.grid.h()))
    }

    pub fn hj_step(&self, u_next: &ValueField, f_now: &ValueField, delta: f64) -> Result<ValueField> {
        same_grid(self.grid, u_next.grid())?;
        same_grid(self.grid, f_now.grid())?;
        Ok(ValueField::from_raw(
            self.grid,
            self.hj_raw(u_next.values(), f_now.values(), delta)?,
        ))
    }

    pub fn fp_step(&self, m_now: &DensityField, u_drift: &ValueField) -> Result<DensityField> {
        same_grid(self.grid, m_now.grid())?;
        same_grid(self.grid, u_drift.grid())?;
        if m_now.min() < -1e-14 {
            return Err(MfgError::NegativeDensity(m_now.min()));
        }
        Ok(DensityField::from_raw(
            self.grid,
            self.fp_raw(m_now.values(), u_drift.values())?,
        ))
    }
}

fn same_grid(a: Grid, b: Grid) -> Result<()> {
    if a != b {
        return Err(MfgError::GridMismatch(a.n(), b.n()));
    }
    Ok(())
}

/// One backward step of the HJ equation with the default CFL guard.
pub fn hj_backward_step(
    u_next: &ValueField,
    f_now: &ValueField,
    dt: f64,
    delta: f64,
) -> Result<ValueField> {
    Scheme::new(u_next.grid(), dt, DEFAULT_CFL)?.hj_step(u_next, f_now, delta)
}

/// One forward Fokker-Planck step driven by the upwind gradient of `u_drift`.
pub fn fp_forward_step(m_now: &DensityField, u_drift: &ValueField, dt: f64) -> Result<DensityField> {
    Scheme::new(m_now.grid(), dt, DEFAULT_CFL)?.fp_step(m_now, u_drift)
}

/// Value just before a kick of size `s`: the average of the two continuations
/// read back in pre-kick coordinates.
pub fn branch_average_backward(u_plus: &ValueField, u_minus: &ValueField, s: f64) -> ValueField {
    average_raw(u_plus.values(), u_minus.values(), u_plus.grid().h(), s)
        .pipe(|v| ValueField::from_raw(u_plus.grid(), v))
}

pub(crate) fn average_raw(up: &[f64], down: &[f64], h: f64, s: f64) -> Vec<f64> {
    let a = if s == 0.0 { up.to_vec() } else { spline_shift(up, h, -s) };
    let b = if s == 0.0 { down.to_vec() } else { spline_shift(down, h, s) };
    a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Density right after a kick `s`.
pub fn branch_push_forward(m: &DensityField, s: f64) -> DensityField {
    m.translate(s)
}

trait Pipe: Sized {
    fn pipe<R>(self, f: impl FnOnce(Self) -> R) -> R {
        f(self)
    }
}
impl<T> Pipe for T {}

#[derive(Debug, Clone)]
pub enum Terminal {
    /// `u_T = g(., m_T)`.
    Coupling,
    /// One fixed field per leaf, in leaf order.
    Fields(Vec<ValueField>),
}

/// Coordinates in which the tree is integrated. In the shifted frame fields are
/// never moved at kicks; the coupling is evaluated through the cumulative shift
/// instead. Both produce the same physical solution up to interpolation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Physical,
    Shifted,
}

#[derive(Debug, Clone)]
pub struct MfgTreeSolution {
    pub u: TreeField<ValueField>,
    pub m: TreeField<DensityField>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Iterations where the residual grew by more than 5% after burn-in.
    pub residual_increases: usize,
    pub discount: f64,
    pub frame: Frame,
    pub params: SolveParams,
}

impl MfgTreeSolution {
    pub fn tree(&self) -> &NoiseTree {
        self.u.tree()
    }

    pub fn grid(&self) -> Grid {
        self.u.root_initial().grid()
    }

    /// `u` at time zero (the root's first slice).
    pub fn u0(&self) -> &ValueField {
        self.u.root_initial()
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Largest one-sided difference of `u` over all nodes and times.
    pub fn max_gradient(&self) -> f64 {
        let h = self.grid().h();
        let mut g: f64 = 0.0;
        for slices in self.u.nodes() {
            for u in slices {
                let v = u.values();
                let n = v.len();
                for j in 0..n {
                    g = g.max(((v[(j + 1) % n] - v[j]) / h).abs());
                }
            }
        }
        g
    }

    /// Maps a shifted-frame solution back to physical coordinates.
    pub fn to_physical(&self) -> MfgTreeSolution {
        if self.frame == Frame::Physical {
            return self.clone();
        }
        let tree = self.tree().clone();
        let u = self
            .u
            .nodes()
            .iter()
            .enumerate()
            .map(|(node, s)| s.iter().map(|v| v.translate(tree.node_shift(node))).collect())
            .collect();
        let m = self
            .m
            .nodes()
            .iter()
            .enumerate()
            .map(|(node, s)| s.iter().map(|v| v.translate(tree.node_shift(node))).collect())
            .collect();
        MfgTreeSolution {
            u: TreeField::from_nodes(tree.clone(), u).expect("same layout"),
            m: TreeField::from_nodes(tree, m).expect("same layout"),
            frame: Frame::Physical,
            ..self.clone()
        }
    }
}

/// Forward-backward fixed point on a noise tree.
pub struct TreeSolver<'a> {
    coupling: &'a CouplingSpec,
    tree: NoiseTree,
    params: SolveParams,
    scheme: Scheme,
    discount: f64,
    frame: Frame,
}

impl<'a> TreeSolver<'a> {
    pub fn new(coupling: &'a CouplingSpec, tree: &NoiseTree, params: SolveParams) -> Result<Self> {
        params.validate()?;
        Ok(TreeSolver {
            coupling,
            tree: tree.clone(),
            params,
            scheme: Scheme::new(coupling.grid(), tree.dt(), params.cfl_factor)?,
            discount: 0.0,
            frame: Frame::Physical,
        })
    }

    pub fn discount(mut self, delta: f64) -> Self {
        self.discount = delta;
        self
    }

    pub fn frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn tree(&self) -> &NoiseTree {
        &self.tree
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    fn check_inputs(&self, m0: &DensityField, terminal: &Terminal) -> Result<()> {
        same_grid(self.coupling.grid(), m0.grid())?;
        DensityField::new(m0.grid(), m0.values().to_vec())?;
        if let Terminal::Fields(fields) = terminal {
            let leaves = self.tree.leaves().len();
            if fields.len() != leaves {
                return Err(MfgError::Length {
                    expected: leaves,
                    got: fields.len(),
                });
            }
            for f in fields {
                same_grid(self.coupling.grid(), f.grid())?;
            }
        }
        Ok(())
    }

    /// Solves starting from the heat flow of `m0` as the population guess.
    pub fn solve(&self, m0: &DensityField, terminal: &Terminal) -> Result<MfgTreeSolution> {
        self.check_inputs(m0, terminal)?;
        let n = m0.grid().n();
        let zero = self.zero_traj(n);
        let guess = self.forward(&zero, m0.values())?;
        self.iterate(m0, terminal, guess)
    }

    /// Solves starting from a supplied population trajectory.
    pub fn solve_from(
        &self,
        m0: &DensityField,
        terminal: &Terminal,
        guess: &TreeField<DensityField>,
    ) -> Result<MfgTreeSolution> {
        self.check_inputs(m0, terminal)?;
        if guess.tree() != &self.tree {
            return Err(MfgError::Param("initial guess lives on a different tree".into()));
        }
        let raw = guess
            .nodes()
            .iter()
            .map(|s| s.iter().map(|m| m.values().to_vec()).collect())
            .collect();
        self.iterate(m0, terminal, raw)
    }

    /// A guess equal to `m` at every node and time.
    pub fn constant_guess(&self, m: &DensityField) -> TreeField<DensityField> {
        let data = (0..self.tree.num_nodes())
            .map(|node| vec![m.clone(); self.tree.node_steps(node) + 1])
            .collect();
        TreeField::from_nodes(self.tree.clone(), data).expect("layout")
    }

    fn zero_traj(&self, n: usize) -> Traj {
        (0..self.tree.num_nodes())
            .map(|node| vec![vec![0.0; n]; self.tree.node_steps(node) + 1])
            .collect()
    }

    fn iterate(&self, m0: &DensityField, terminal: &Terminal, mut mbar: Traj) -> Result<MfgTreeSolution> {
        let h = m0.grid().h();
        let mut u_prev = self.zero_traj(m0.grid().n());
        let mut residuals = Vec::new();
        let mut increases = 0;
        let mut converged = false;
        let mut u = u_prev.clone();
        for iter in 0..self.params.max_iters {
            u = self.backward(&mbar, terminal)?;
            let m_br = self.forward(&u, m0.values())?;
            let beta = self.params.damping.weight(iter);
            let mut res: f64 = 0.0;
            for node in 0..mbar.len() {
                for k in 0..mbar[node].len() {
                    let old = &mut mbar[node][k];
                    let new = &m_br[node][k];
                    let mut dm = 0.0;
                    for j in 0..old.len() {
                        let v = (1.0 - beta) * old[j] + beta * new[j];
                        dm += (v - old[j]).abs();
                        old[j] = v;
                    }
                    let du = u[node][k]
                        .iter()
                        .zip(&u_prev[node][k])
                        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
                    res = res.max(h * dm + du);
                }
            }
            debug!("fixed point iteration {iter}: residual {res:.3e}");
            if iter >= 3 {
                if let Some(prev) = residuals.last() {
                    if res > 1.05 * prev {
                        increases += 1;
                        warn!("residual rose from {prev:.3e} to {res:.3e} at iteration {iter}");
                    }
                }
            }
            residuals.push(res);
            u_prev = std::mem::take(&mut u);
            u = u_prev.clone();
            if res <= self.params.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            warn!(
                "fixed point stopped after {} iterations at residual {:.3e}",
                residuals.len(),
                residuals.last().copied().unwrap_or(f64::NAN)
            );
        }
        let grid = m0.grid();
        let to_values = |t: Traj| -> Vec<Vec<ValueField>> {
            t.into_iter()
                .map(|s| s.into_iter().map(|v| ValueField::from_raw(grid, v)).collect())
                .collect()
        };
        let to_density = |t: Traj| -> Vec<Vec<DensityField>> {
            t.into_iter()
                .map(|s| s.into_iter().map(|v| DensityField::from_raw(grid, v)).collect())
                .collect()
        };
        Ok(MfgTreeSolution {
            u: TreeField::from_nodes(self.tree.clone(), to_values(u))?,
            m: TreeField::from_nodes(self.tree.clone(), to_density(mbar))?,
            iterations: residuals.len(),
            residuals,
            converged,
            residual_increases: increases,
            discount: self.discount,
            frame: self.frame,
            params: self.params,
        })
    }

    fn running_cost(&self, node: usize, m: &[f64]) -> Vec<f64> {
        self.cost(node, m, Which::Running, None)
    }

    fn cost(&self, node: usize, m: &[f64], which: Which, fixed: Option<&ValueField>) -> Vec<f64> {
        let h = self.scheme.grid.h();
        match self.frame {
            Frame::Physical => match fixed {
                Some(f) => f.values().to_vec(),
                None => self.coupling.eval_raw(which, m).into_values(),
            },
            Frame::Shifted => {
                let w = self.tree.node_shift(node);
                let phys = match fixed {
                    Some(f) => f.values().to_vec(),
                    None => {
                        let moved = DensityField::from_raw(self.scheme.grid, m.to_vec()).translate(w);
                        self.coupling.eval_raw(which, moved.values()).into_values()
                    }
                };
                if w == 0.0 {
                    phys
                } else {
                    spline_shift(&phys, h, -w)
                }
            }
        }
    }

    fn terminal_value(&self, node: usize, m: &[f64], terminal: &Terminal) -> Vec<f64> {
        match terminal {
            Terminal::Coupling => self.cost(node, m, Which::Terminal, None),
            Terminal::Fields(fields) => {
                let leaf = node - self.tree.leaves().start;
                self.cost(node, m, Which::Terminal, Some(&fields[leaf]))
            }
        }
    }

    pub(crate) fn backward(&self, mbar: &Traj, terminal: &Terminal) -> Result<Traj> {
        let tree = &self.tree;
        let h = self.scheme.grid.h();
        let mut u: Traj = vec![Vec::new(); tree.num_nodes()];
        for depth in (0..=tree.epochs()).rev() {
            let ids: Vec<usize> = tree.nodes_at_depth(depth).collect();
            let done: Vec<Vec<Vec<f64>>> = ids
                .par_iter()
                .map(|&node| -> Result<Vec<Vec<f64>>> {
                    let steps = tree.node_steps(node);
                    let mut slices = vec![Vec::new(); steps + 1];
                    slices[steps] = match tree.children(node) {
                        None => self.terminal_value(node, &mbar[node][steps], terminal),
                        Some((up, down)) => {
                            let s = match self.frame {
                                Frame::Physical => tree.increment(),
                                Frame::Shifted => 0.0,
                            };
                            average_raw(&u[up][0], &u[down][0], h, s)
                        }
                    };
                    for k in (0..steps).rev() {
                        let f = self.running_cost(node, &mbar[node][k]);
                        slices[k] = self.scheme.hj_raw(&slices[k + 1], &f, self.discount)?;
                    }
                    Ok(slices)
                })
                .collect::<Result<_>>()?;
            for (node, slices) in ids.into_iter().zip(done) {
                u[node] = slices;
            }
        }
        Ok(u)
    }

    pub(crate) fn forward(&self, u: &Traj, m0: &[f64]) -> Result<Traj> {
        let tree = &self.tree;
        let grid = self.scheme.grid;
        let mut m: Traj = vec![Vec::new(); tree.num_nodes()];
        for depth in 0..=tree.epochs() {
            let ids: Vec<usize> = tree.nodes_at_depth(depth).collect();
            let done: Vec<Vec<Vec<f64>>> = ids
                .par_iter()
                .map(|&node| -> Result<Vec<Vec<f64>>> {
                    let start = match tree.parent(node) {
                        None => m0.to_vec(),
                        Some(p) => {
                            let end = m[p].last().expect("parent filled");
                            match self.frame {
                                Frame::Physical => DensityField::from_raw(grid, end.clone())
                                    .translate(tree.kick(node))
                                    .values()
                                    .to_vec(),
                                Frame::Shifted => end.clone(),
                            }
                        }
                    };
                    let steps = tree.node_steps(node);
                    let mut slices = Vec::with_capacity(steps + 1);
                    slices.push(start);
                    for k in 0..steps {
                        let next = self.scheme.fp_raw(&slices[k], &u[node][k + 1])?;
                        slices.push(next);
                    }
                    Ok(slices)
                })
                .collect::<Result<_>>()?;
            for (node, slices) in ids.into_iter().zip(done) {
                m[node] = slices;
            }
        }
        Ok(m)
    }
}

/// Solves the finite-horizon problem on `tree`.
pub fn solve_mfg_tree(
    c: &CouplingSpec,
    tree: &NoiseTree,
    m0: &DensityField,
    terminal: &Terminal,
    p: &SolveParams,
) -> Result<MfgTreeSolution> {
    TreeSolver::new(c, tree, *p)?.solve(m0, terminal)
}

/// Deterministic trajectories on a single time line.
#[derive(Debug, Clone)]
pub struct DeterministicSolution {
    pub u: Vec<ValueField>,
    pub m: Vec<DensityField>,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Plain forward-backward iteration without common noise, on `steps` steps of
/// size `horizon / steps`.
pub fn solve_deterministic(
    c: &CouplingSpec,
    horizon: f64,
    steps: usize,
    m0: &DensityField,
    terminal: Option<&ValueField>,
    p: &SolveParams,
) -> Result<DeterministicSolution> {
    p.validate()?;
    let grid = c.grid();
    let scheme = Scheme::new(grid, horizon / steps as f64, p.cfl_factor)?;
    let h = grid.h();
    let n = grid.n();
    let march = |u: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let mut m = vec![m0.values().to_vec()];
        for k in 0..steps {
            let next = scheme.fp_raw(&m[k], &u[k + 1])?;
            m.push(next);
        }
        Ok(m)
    };
    let mut u = vec![vec![0.0; n]; steps + 1];
    let mut mbar = march(&u)?;
    let mut residuals = Vec::new();
    let mut converged = false;
    for iter in 0..p.max_iters {
        let mut new_u = vec![Vec::new(); steps + 1];
        new_u[steps] = match terminal {
            Some(g) => g.values().to_vec(),
            None => c.eval_raw(Which::Terminal, &mbar[steps]).into_values(),
        };
        for k in (0..steps).rev() {
            let f = c.eval_raw(Which::Running, &mbar[k]).into_values();
            new_u[k] = scheme.hj_raw(&new_u[k + 1], &f, 0.0)?;
        }
        let m_br = march(&new_u)?;
        let beta = p.damping.weight(iter);
        let mut res: f64 = 0.0;
        for k in 0..=steps {
            let mut dm = 0.0;
            for j in 0..n {
                let v = (1.0 - beta) * mbar[k][j] + beta * m_br[k][j];
                dm += (v - mbar[k][j]).abs();
                mbar[k][j] = v;
            }
            let du = new_u[k]
                .iter()
                .zip(&u[k])
                .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
            res = res.max(h * dm + du);
        }
        u = new_u;
        residuals.push(res);
        if res <= p.tol {
            converged = true;
            break;
        }
    }
    Ok(DeterministicSolution {
        u: u.into_iter().map(|v| ValueField::from_raw(grid, v)).collect(),
        m: mbar.into_iter().map(|v| DensityField::from_raw(grid, v)).collect(),
        residuals,
        converged,
    })
}
