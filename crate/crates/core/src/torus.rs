//! Periodic grid on the unit circle, finite-difference stencils, shifts and
//! the Wasserstein-1 distance.
//!
//! Values are nodal samples at `x_j = j h`. Densities are cell averages over
//! `[x_j - h/2, x_j + h/2]` and carry unit mass `h * sum(values) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

/// Smallest admissible cell count.
pub const MIN_CELLS: usize = 8;

const MASS_TOL: f64 = 1e-10;
const NEG_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(MfgError::Grid(format!(
                "need at least {MIN_CELLS} cells, got {n}"
            )));
        }
        Ok(Grid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n != other.n {
            return Err(MfgError::GridMismatch(self.n, other.n));
        }
        Ok(())
    }
}

/// Common access to the three grid function types.
pub trait GridFunction: Clone + Send + Sync {
    fn grid(&self) -> Grid;
    fn values(&self) -> &[f64];
    /// Rebuilds a field of the same kind from raw samples. Used by the linear
    /// operators, which preserve the defining invariant of each kind.
    fn with_values(&self, values: Vec<f64>) -> Self;
}

macro_rules! grid_function {
    ($t:ty) => {
        impl GridFunction for $t {
            fn grid(&self) -> Grid {
                self.grid
            }
            fn values(&self) -> &[f64] {
                &self.values
            }
            fn with_values(&self, values: Vec<f64>) -> Self {
                debug_assert_eq!(values.len(), self.grid.n);
                Self {
                    grid: self.grid,
                    values,
                }
            }
        }
    };
}

/// Nodal grid function (value function, corrector slice, potential).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueField {
    grid: Grid,
    values: Vec<f64>,
}

/// Nonnegative cell averages of a probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
}

/// Cell averages of a signed measure, typically centered (zero total mass).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedMeasure {
    grid: Grid,
    values: Vec<f64>,
}

grid_function!(ValueField);
grid_function!(DensityField);
grid_function!(SignedMeasure);

fn check_len(grid: &Grid, values: &[f64]) -> Result<()> {
    if values.len() != grid.n {
        return Err(MfgError::Length {
            expected: grid.n,
            got: values.len(),
        });
    }
    Ok(())
}

impl ValueField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, &values)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(MfgError::Field(format!("non-finite value {v}")));
        }
        Ok(ValueField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ValueField {
            grid,
            values: vec![c; grid.n],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        ValueField {
            grid,
            values: grid.nodes().into_iter().map(f).collect(),
        }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        ValueField { grid, values }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.grid.n as f64
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    /// Copy with the mean removed.
    pub fn centered(&self) -> Self {
        let m = self.mean();
        self.with_values(self.values.iter().map(|v| v - m).collect())
    }

    pub fn axpy(&self, a: f64, other: &ValueField) -> Self {
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        )
    }
}

impl DensityField {
    /// Validates nonnegativity and unit mass.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, &values)?;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min >= -NEG_TOL) {
            return Err(MfgError::Field(format!("negative density value {min:.3e}")));
        }
        let mass = grid.h() * values.iter().sum::<f64>();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(MfgError::Field(format!("density mass {mass} is not 1")));
        }
        Ok(DensityField { grid, values })
    }

    pub fn uniform(grid: Grid) -> Self {
        DensityField {
            grid,
            values: vec![1.0; grid.n],
        }
    }

    /// Samples a nonnegative profile at the nodes and rescales to unit mass.
    pub fn from_profile(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let raw: Vec<f64> = grid.nodes().into_iter().map(f).collect();
        Self::normalized(grid, raw)
    }

    pub fn normalized(grid: Grid, raw: Vec<f64>) -> Result<Self> {
        check_len(&grid, &raw)?;
        if raw.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(MfgError::Field("profile must be finite and nonnegative".into()));
        }
        let mass = grid.h() * raw.iter().sum::<f64>();
        if mass <= 0.0 {
            return Err(MfgError::Field("profile has zero mass".into()));
        }
        Ok(DensityField {
            grid,
            values: raw.into_iter().map(|v| v / mass).collect(),
        })
    }

    /// All mass in cell `j`.
    pub fn point_mass(grid: Grid, j: usize) -> Self {
        let mut values = vec![0.0; grid.n];
        values[j % grid.n] = grid.n as f64;
        DensityField { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        DensityField { grid, values }
    }

    pub fn mass(&self) -> f64 {
        self.grid.h() * self.values.iter().sum::<f64>()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `self - other` as a centered signed measure.
    pub fn difference(&self, other: &DensityField) -> Result<SignedMeasure> {
        self.grid.check_same(&other.grid)?;
        Ok(SignedMeasure {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// `self + eps * rho`, rejected if any cell turns negative.
    pub fn perturbed(&self, eps: f64, rho: &SignedMeasure) -> Result<DensityField> {
        self.grid.check_same(&rho.grid)?;
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(&rho.values)
            .map(|(m, r)| m + eps * r)
            .collect();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -NEG_TOL {
            return Err(MfgError::NegativeDensity(min));
        }
        DensityField::new(self.grid, values)
    }

    /// Convex combination `(1 - w) self + w other`.
    pub fn blend(&self, w: f64, other: &DensityField) -> DensityField {
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect(),
        )
    }
}

impl SignedMeasure {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, &values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MfgError::Field("non-finite signed measure".into()));
        }
        Ok(SignedMeasure { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        SignedMeasure {
            grid,
            values: vec![0.0; grid.n],
        }
    }

    /// Raw samples with their mean removed.
    pub fn centered_from(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, &values)?;
        let mean = values.iter().sum::<f64>() / grid.n as f64;
        Self::new(grid, values.into_iter().map(|v| v - mean).collect())
    }

    /// Column of mass `1/h` in cell `j` minus the uniform density.
    pub fn dirac_column(grid: Grid, j: usize) -> Self {
        let mut values = vec![-1.0; grid.n];
        values[j % grid.n] += grid.n as f64;
        SignedMeasure { grid, values }
    }

    pub fn total(&self) -> f64 {
        self.grid.h() * self.values.iter().sum::<f64>()
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.with_values(self.values.iter().map(|v| a * v).collect())
    }

    pub fn add(&self, other: &SignedMeasure) -> Self {
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn l1(&self) -> f64 {
        self.grid.h() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn l2(&self) -> f64 {
        l2_norm(self.grid.h(), &self.values)
    }

    /// Discrete negative Sobolev norm with Fourier weights `(1 + (2 pi k)^2)^-1`.
    pub fn dual_norm(&self) -> f64 {
        let n = self.grid.n;
        let h = self.grid.h();
        let mut acc = 0.0;
        for k in 1..=n / 2 {
            let w = 2.0 * std::f64::consts::PI * k as f64;
            let (mut c, mut s) = (0.0, 0.0);
            for (j, v) in self.values.iter().enumerate() {
                let x = w * j as f64 * h;
                c += h * v * x.cos();
                s += h * v * x.sin();
            }
            let mult = if 2 * k == n { 1.0 } else { 2.0 };
            acc += mult * (c * c + s * s) / (1.0 + w * w);
        }
        acc.sqrt()
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, b| a.max(b.abs()))
}

pub(crate) fn l2_norm(h: f64, v: &[f64]) -> f64 {
    (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// `(u_{j+1} - 2 u_j + u_{j-1}) / h^2` with periodic wrap.
pub fn laplacian(u: &ValueField) -> ValueField {
    let mut out = vec![0.0; u.grid.n];
    laplacian_into(&u.values, u.grid.h(), &mut out);
    u.with_values(out)
}

pub(crate) fn laplacian_into(u: &[f64], h: f64, out: &mut [f64]) {
    let n = u.len();
    let inv = 1.0 / (h * h);
    for j in 0..n {
        let l = u[(j + n - 1) % n];
        let r = u[(j + 1) % n];
        out[j] = (r - 2.0 * u[j] + l) * inv;
    }
}

/// Forward and backward one-sided differences.
pub fn gradient_upwind(u: &ValueField) -> (ValueField, ValueField) {
    let n = u.grid.n;
    let mut dp = vec![0.0; n];
    let mut dm = vec![0.0; n];
    upwind_into(&u.values, u.grid.h(), &mut dp, &mut dm);
    (u.with_values(dp), u.with_values(dm))
}

pub(crate) fn upwind_into(u: &[f64], h: f64, dplus: &mut [f64], dminus: &mut [f64]) {
    let n = u.len();
    for j in 0..n {
        dplus[j] = (u[(j + 1) % n] - u[j]) / h;
        dminus[j] = (u[j] - u[(j + n - 1) % n]) / h;
    }
}

/// Symmetric circulant tridiagonal system `off*x_{j-1} + diag*x_j + off*x_{j+1} = b_j`,
/// factored once and solved by Thomas elimination with a Sherman-Morrison
/// correction for the corner entries.
#[derive(Debug, Clone)]
pub(crate) struct CyclicTridiag {
    off: f64,
    gamma: f64,
    cp: Vec<f64>,
    inv_den: Vec<f64>,
    z: Vec<f64>,
    z_factor: f64,
}

impl CyclicTridiag {
    pub(crate) fn new(n: usize, diag: f64, off: f64) -> Self {
        assert!(n >= 3);
        let gamma = -diag;
        let mut bb = vec![diag; n];
        bb[0] = diag - gamma;
        bb[n - 1] = diag - off * off / gamma;
        let mut cp = vec![0.0; n];
        let mut inv_den = vec![0.0; n];
        inv_den[0] = 1.0 / bb[0];
        cp[0] = off * inv_den[0];
        for i in 1..n {
            let den = bb[i] - off * cp[i - 1];
            inv_den[i] = 1.0 / den;
            cp[i] = off * inv_den[i];
        }
        let mut this = CyclicTridiag {
            off,
            gamma,
            cp,
            inv_den,
            z: Vec::new(),
            z_factor: 0.0,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = off;
        this.thomas(&mut u);
        this.z_factor = 1.0 + u[0] + off * u[n - 1] / gamma;
        this.z = u;
        this
    }

    fn thomas(&self, r: &mut [f64]) {
        let n = r.len();
        r[0] *= self.inv_den[0];
        for i in 1..n {
            r[i] = (r[i] - self.off * r[i - 1]) * self.inv_den[i];
        }
        for i in (0..n - 1).rev() {
            r[i] -= self.cp[i] * r[i + 1];
        }
    }

    pub(crate) fn solve_in_place(&self, r: &mut [f64]) {
        let n = r.len();
        debug_assert_eq!(n, self.z.len());
        self.thomas(r);
        let fact = (r[0] + self.off * r[n - 1] / self.gamma) / self.z_factor;
        for (ri, zi) in r.iter_mut().zip(&self.z) {
            *ri -= fact * zi;
        }
    }
}

/// Backward-Euler diffusion operator `(I - nu dt Delta_h)^{-1}` on a fixed grid.
#[derive(Debug, Clone)]
pub struct ImplicitDiffusion {
    solver: CyclicTridiag,
    identity: bool,
}

impl ImplicitDiffusion {
    pub fn new(grid: Grid, nu: f64, dt: f64) -> Result<Self> {
        if !(nu >= 0.0) || !(dt > 0.0) || !nu.is_finite() || !dt.is_finite() {
            return Err(MfgError::Param(format!(
                "diffusion needs nu >= 0 and dt > 0 (nu = {nu}, dt = {dt})"
            )));
        }
        let r = nu * dt / (grid.h() * grid.h());
        Ok(ImplicitDiffusion {
            solver: CyclicTridiag::new(grid.n, 1.0 + 2.0 * r, -r),
            identity: r == 0.0,
        })
    }

    pub(crate) fn apply_in_place(&self, v: &mut [f64]) {
        if !self.identity {
            self.solver.solve_in_place(v);
        }
    }

    pub fn apply<F: GridFunction>(&self, field: &F) -> F {
        let mut v = field.values().to_vec();
        self.apply_in_place(&mut v);
        field.with_values(v)
    }
}

/// One backward-Euler step of `d/dt v = nu Delta v`.
pub fn implicit_diffusion_step<F: GridFunction>(field: &F, nu: f64, dt: f64) -> Result<F> {
    Ok(ImplicitDiffusion::new(field.grid(), nu, dt)?.apply(field))
}

/// Periodic cubic spline evaluated at the uniformly shifted points `x_j - s`.
pub(crate) fn spline_shift(values: &[f64], h: f64, s: f64) -> Vec<f64> {
    let n = values.len();
    let q = -s / h;
    let k = q.floor();
    let t = q - k;
    let k = k.rem_euclid(n as f64) as usize % n;
    if t < 1e-12 || t > 1.0 - 1e-12 {
        let k = if t > 0.5 { (k + 1) % n } else { k };
        return (0..n).map(|j| values[(j + k) % n]).collect();
    }
    let mut m = vec![0.0; n];
    let c = 6.0 / (h * h);
    for j in 0..n {
        m[j] = c * (values[(j + 1) % n] - 2.0 * values[j] + values[(j + n - 1) % n]);
    }
    CyclicTridiag::new(n, 4.0, 1.0).solve_in_place(&mut m);
    let a = 1.0 - t;
    let ca = h * h / 6.0 * (a * a * a - a);
    let cb = h * h / 6.0 * (t * t * t - t);
    (0..n)
        .map(|j| {
            let i = (j + k) % n;
            let i1 = (i + 1) % n;
            a * values[i] + t * values[i1] + ca * m[i] + cb * m[i1]
        })
        .collect()
}

/// Moves the content of every cell by `s`, splitting it between the two cells
/// it overlaps. Conservative and nonnegative.
pub(crate) fn linear_redistribution(values: &[f64], h: f64, s: f64) -> Vec<f64> {
    let n = values.len();
    let q = s / h;
    let k = q.floor();
    let t = q - k;
    let k = k.rem_euclid(n as f64) as usize % n;
    let mut out = vec![0.0; n];
    for (i, v) in values.iter().enumerate() {
        out[(i + k) % n] += (1.0 - t) * v;
        out[(i + k + 1) % n] += t * v;
    }
    out
}

/// Fields that can be moved along the circle: `translate(f, s)(x) = f(x - s)`.
pub trait Translate: Sized {
    fn translate(&self, s: f64) -> Self;
}

impl Translate for ValueField {
    fn translate(&self, s: f64) -> Self {
        if s == 0.0 {
            return self.clone();
        }
        self.with_values(spline_shift(&self.values, self.grid.h(), s))
    }
}

impl Translate for SignedMeasure {
    fn translate(&self, s: f64) -> Self {
        if s == 0.0 {
            return self.clone();
        }
        self.with_values(spline_shift(&self.values, self.grid.h(), s))
    }
}

impl Translate for DensityField {
    /// Spline interpolation of the cell averages, which is conservative and the
    /// exact adjoint of the value shift. Where it would undershoot zero the
    /// result is blended with the linear redistribution just enough to stay
    /// nonnegative.
    fn translate(&self, s: f64) -> Self {
        if s == 0.0 {
            return self.clone();
        }
        let h = self.grid.h();
        let mut out = spline_shift(&self.values, h, s);
        let min = out.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            let lin = linear_redistribution(&self.values, h, s);
            let mut w: f64 = 0.0;
            for (o, l) in out.iter().zip(&lin) {
                if *o < 0.0 {
                    w = w.max(-o / (l - o));
                }
            }
            for (o, l) in out.iter_mut().zip(&lin) {
                *o = ((1.0 - w) * *o + w * l).max(0.0);
            }
        }
        self.with_values(out)
    }
}

pub fn translate<F: Translate>(field: &F, s: f64) -> F {
    field.translate(s)
}

/// Wasserstein-1 distance on the circle between two grid measures with atoms
/// at the nodes.
pub fn wasserstein1(m1: &DensityField, m2: &DensityField) -> Result<f64> {
    m1.grid.check_same(&m2.grid)?;
    Ok(circle_w1(&m1.values, &m2.values, m1.grid.h()))
}

pub(crate) fn circle_w1(a: &[f64], b: &[f64], h: f64) -> f64 {
    let mut acc = 0.0;
    let g: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            acc += h * (x - y);
            acc
        })
        .collect();
    let mut sorted = g.clone();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[(sorted.len() - 1) / 2];
    h * g.iter().map(|v| (v - med).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn eig(h: f64) -> f64 {
        (2.0 / (h * h)) * (1.0 - (2.0 * PI * h).cos())
    }

    #[test]
    fn grid_rejects_tiny() {
        assert!(Grid::new(4).is_err());
        let g = grid(32);
        assert_eq!(g.h() * g.n() as f64, 1.0);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let u = ValueField::constant(grid(16), 3.5);
        assert!(laplacian(&u).max_abs() == 0.0);
    }

    #[test]
    fn laplacian_eigenfunctions() {
        let g = grid(32);
        for f in [|x: f64| (2.0 * PI * x).cos(), |x: f64| (2.0 * PI * x).sin()] {
            let u = ValueField::from_fn(g, f);
            let lu = laplacian(&u);
            let lam = eig(g.h());
            for j in 0..32 {
                assert!((lu.values()[j] + lam * u.values()[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sawtooth_gradients() {
        let g = grid(8);
        let u = ValueField::from_fn(g, |x| x);
        let (dp, dm) = gradient_upwind(&u);
        for j in 0..8 {
            let want_p = if j == 7 { -7.0 } else { 1.0 };
            let want_m = if j == 0 { -7.0 } else { 1.0 };
            assert!((dp.values()[j] - want_p).abs() < 1e-12);
            assert!((dm.values()[j] - want_m).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_solver_matches_dense_product() {
        let n = 11;
        let sys = CyclicTridiag::new(n, 2.7, -0.8);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 0.1 * i as f64).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = 2.7 * x[i] - 0.8 * x[(i + 1) % n] - 0.8 * x[(i + n - 1) % n];
        }
        sys.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn diffusion_damps_cos_mode_at_discrete_rate() {
        let g = grid(32);
        let u = ValueField::from_fn(g, |x| (2.0 * PI * x).cos());
        let (nu, dt) = (0.7, 0.01);
        let out = implicit_diffusion_step(&u, nu, dt).unwrap();
        let factor = 1.0 / (1.0 + nu * dt * eig(g.h()));
        for j in 0..32 {
            assert!((out.values()[j] - factor * u.values()[j]).abs() < 1e-13);
        }
        let c = implicit_diffusion_step(&ValueField::constant(g, 2.0), nu, dt).unwrap();
        assert!(c.values().iter().all(|v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn diffusion_keeps_mass_and_sign() {
        let g = grid(16);
        let m = DensityField::point_mass(g, 3);
        let out = implicit_diffusion_step(&m, 1.0, 0.05).unwrap();
        assert!((out.mass() - 1.0).abs() < 1e-14);
        assert!(out.min() >= -1e-14);
    }

    #[test]
    fn integer_shift_is_rotation() {
        let g = grid(16);
        let u = ValueField::from_fn(g, |x| (2.0 * PI * x).sin() + x * x);
        let v = u.translate(3.0 * g.h());
        for j in 0..16 {
            assert_eq!(v.values()[j], u.values()[(j + 13) % 16]);
        }
        let m = DensityField::from_profile(g, |x| 1.0 + x).unwrap();
        let r = m.translate(-2.0 * g.h());
        for j in 0..16 {
            assert_eq!(r.values()[j], m.values()[(j + 2) % 16]);
        }
    }

    #[test]
    fn density_round_trip() {
        let g = grid(64);
        let m = DensityField::from_profile(g, |x| 1.0 + 0.5 * (2.0 * PI * x).cos()).unwrap();
        for s in [0.013, 0.3, -0.271] {
            let back = m.translate(s).translate(-s);
            for j in 0..64 {
                assert!((back.values()[j] - m.values()[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn density_translate_of_point_mass_stays_nonnegative() {
        let g = grid(16);
        let m = DensityField::point_mass(g, 5);
        let t = m.translate(0.37 * g.h());
        assert!(t.min() >= 0.0);
        assert!((t.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn antipodal_point_masses() {
        let g = grid(8);
        let a = DensityField::point_mass(g, 0);
        let b = DensityField::point_mass(g, 4);
        assert!((wasserstein1(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn w1_grid_mismatch() {
        let a = DensityField::uniform(grid(8));
        let b = DensityField::uniform(grid(16));
        assert!(matches!(wasserstein1(&a, &b), Err(MfgError::GridMismatch(8, 16))));
    }

    #[test]
    fn dirac_column_is_centered() {
        let r = SignedMeasure::dirac_column(grid(32), 7);
        assert!(r.total().abs() < 1e-14);
    }
}
