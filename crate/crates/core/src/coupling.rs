//! Couplings `f(x, m) = a(x) + sum_k lam_k [c_k(m) cos(2 pi k x) + s_k(m) sin(2 pi k x)]`
//! with nonnegative eigenvalues, and the same form for the terminal cost `g`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{MfgError, Result};
use crate::torus::{DensityField, Grid, GridFunction, SignedMeasure, ValueField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Running,
    Terminal,
}

#[derive(Debug, Clone)]
pub struct CouplingSpec {
    a: ValueField,
    lam: Vec<f64>,
    b: ValueField,
    mu: Vec<f64>,
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
}

impl CouplingSpec {
    /// Monotone coupling; every eigenvalue must be nonnegative.
    pub fn new(a: ValueField, lam: Vec<f64>, b: ValueField, mu: Vec<f64>) -> Result<Self> {
        if let Some(v) = lam.iter().chain(&mu).find(|v| !(**v >= 0.0)) {
            return Err(MfgError::Coupling(format!(
                "kernel eigenvalue {v} is negative; the coupling would not be monotone"
            )));
        }
        Self::new_allow_non_monotone(a, lam, b, mu)
    }

    /// Same as [`CouplingSpec::new`] but accepts negative eigenvalues. Meant
    /// for exercising the monotonicity certificate.
    pub fn new_allow_non_monotone(
        a: ValueField,
        lam: Vec<f64>,
        b: ValueField,
        mu: Vec<f64>,
    ) -> Result<Self> {
        let grid = a.grid();
        if b.grid() != grid {
            return Err(MfgError::GridMismatch(grid.n(), b.grid().n()));
        }
        if lam.iter().chain(&mu).any(|v| !v.is_finite()) {
            return Err(MfgError::Coupling("non-finite kernel eigenvalue".into()));
        }
        let modes = lam.len().max(mu.len());
        if modes > 0 && modes - 1 > grid.n() / 4 {
            return Err(MfgError::Coupling(format!(
                "mode cutoff {} exceeds n/4 = {}",
                modes - 1,
                grid.n() / 4
            )));
        }
        let nodes = grid.nodes();
        let cos = (0..modes)
            .map(|k| nodes.iter().map(|x| (2.0 * PI * k as f64 * x).cos()).collect())
            .collect();
        let sin = (0..modes)
            .map(|k| nodes.iter().map(|x| (2.0 * PI * k as f64 * x).sin()).collect())
            .collect();
        Ok(CouplingSpec {
            a,
            lam,
            b,
            mu,
            cos,
            sin,
        })
    }

    /// No potential, no interaction.
    pub fn zero(grid: Grid) -> Self {
        Self::new(ValueField::zeros(grid), vec![], ValueField::zeros(grid), vec![]).unwrap()
    }

    pub fn grid(&self) -> Grid {
        self.a.grid()
    }

    pub fn potential(&self, which: Which) -> &ValueField {
        match which {
            Which::Running => &self.a,
            Which::Terminal => &self.b,
        }
    }

    pub fn eigenvalues(&self, which: Which) -> &[f64] {
        match which {
            Which::Running => &self.lam,
            Which::Terminal => &self.mu,
        }
    }

    pub fn mode_cutoff(&self) -> usize {
        self.lam.len().max(self.mu.len()).saturating_sub(1)
    }

    /// True when both kernels vanish and the game decouples.
    pub fn is_decoupled(&self) -> bool {
        self.lam.iter().chain(&self.mu).all(|v| *v == 0.0)
    }

    /// Lipschitz constant of `m -> f(., m)` in sup norm with respect to `d_1`.
    pub fn lipschitz_constant(&self, which: Which) -> f64 {
        self.eigenvalues(which)
            .iter()
            .enumerate()
            .map(|(k, l)| 2.0 * PI * k as f64 * l.abs())
            .sum()
    }

    /// Kernel `delta f / delta m (x, m, y)` as a function of `x - y`.
    pub fn kernel(&self, which: Which, z: f64) -> f64 {
        self.eigenvalues(which)
            .iter()
            .enumerate()
            .map(|(k, l)| l * (2.0 * PI * k as f64 * z).cos())
            .sum()
    }

    /// Adds `sum_k eig_k [c_k(v) cos + s_k(v) sin]` to `out`, with midpoint
    /// quadrature for the Fourier coefficients.
    fn add_interaction(&self, which: Which, v: &[f64], out: &mut [f64]) {
        let h = self.grid().h();
        for (k, l) in self.eigenvalues(which).iter().enumerate() {
            if *l == 0.0 {
                continue;
            }
            let (ct, st) = (&self.cos[k], &self.sin[k]);
            let mut c = 0.0;
            let mut s = 0.0;
            for j in 0..v.len() {
                c += v[j] * ct[j];
                s += v[j] * st[j];
            }
            c *= h * l;
            s *= h * l;
            for j in 0..out.len() {
                out[j] += c * ct[j] + s * st[j];
            }
        }
    }

    pub fn eval(&self, which: Which, m: &DensityField) -> Result<ValueField> {
        if m.grid() != self.grid() {
            return Err(MfgError::GridMismatch(self.grid().n(), m.grid().n()));
        }
        Ok(self.eval_raw(which, m.values()))
    }

    pub(crate) fn eval_raw(&self, which: Which, m: &[f64]) -> ValueField {
        let mut out = self.potential(which).values().to_vec();
        self.add_interaction(which, m, &mut out);
        self.a.with_values(out)
    }

    /// `<delta f / delta m (., m), rho>` for a centered signed measure.
    pub fn apply_flat_derivative(&self, rho: &SignedMeasure, which: Which) -> Result<ValueField> {
        if rho.grid() != self.grid() {
            return Err(MfgError::GridMismatch(self.grid().n(), rho.grid().n()));
        }
        let total = rho.total();
        if total.abs() > 1e-8 {
            return Err(MfgError::NotCentered(total));
        }
        Ok(self.flat_derivative_raw(which, rho.values()))
    }

    pub(crate) fn flat_derivative_raw(&self, which: Which, rho: &[f64]) -> ValueField {
        let mut out = vec![0.0; rho.len()];
        self.add_interaction(which, rho, &mut out);
        self.a.with_values(out)
    }
}

pub fn eval_f(c: &CouplingSpec, m: &DensityField) -> Result<ValueField> {
    c.eval(Which::Running, m)
}

pub fn eval_g(c: &CouplingSpec, m: &DensityField) -> Result<ValueField> {
    c.eval(Which::Terminal, m)
}

pub fn apply_flat_derivative(
    c: &CouplingSpec,
    rho: &SignedMeasure,
    which: Which,
) -> Result<ValueField> {
    c.apply_flat_derivative(rho, which)
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub min_quadratic_form: f64,
    pub witness: SignedMeasure,
    pub kernel: Which,
}

fn quadratic_form(c: &CouplingSpec, which: Which, mu: &[f64]) -> f64 {
    let grid = c.grid();
    let h = grid.h();
    let n = grid.n();
    let table: Vec<f64> = (0..n).map(|d| c.kernel(which, grid.x(d))).collect();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += table[(i + n - j) % n] * mu[j];
        }
        acc += mu[i] * row;
    }
    h * h * acc
}

/// Minimum of `h^2 sum_ij K(x_i - x_j) mu_i mu_j` over centered measures with
/// `h sum mu^2 = 1`: every pure Fourier mode, then `trials` Gaussian draws.
pub fn monotonicity_certificate(c: &CouplingSpec, trials: usize, seed: u64) -> MonotonicityReport {
    let grid = c.grid();
    let n = grid.n();
    let h = grid.h();
    let normalize = |v: Vec<f64>| -> Vec<f64> {
        let mean = v.iter().sum::<f64>() / n as f64;
        let v: Vec<f64> = v.into_iter().map(|x| x - mean).collect();
        let norm = (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        if norm > 0.0 {
            v.into_iter().map(|x| x / norm).collect()
        } else {
            v
        }
    };
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for k in 1..=n / 2 {
        let w = 2.0 * PI * k as f64;
        candidates.push(normalize(grid.nodes().iter().map(|x| (w * x).cos()).collect()));
        if 2 * k != n {
            candidates.push(normalize(grid.nodes().iter().map(|x| (w * x).sin()).collect()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        candidates.push(normalize(v));
    }
    let mut best = (f64::INFINITY, vec![0.0; n], Which::Running);
    for which in [Which::Running, Which::Terminal] {
        if c.eigenvalues(which).is_empty() {
            continue;
        }
        for v in &candidates {
            let q = quadratic_form(c, which, v);
            if q < best.0 {
                best = (q, v.clone(), which);
            }
        }
    }
    if best.0 == f64::INFINITY {
        best.0 = 0.0;
    }
    MonotonicityReport {
        min_quadratic_form: best.0,
        witness: SignedMeasure::new(grid, best.1).expect("finite witness"),
        kernel: best.2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, lam: Vec<f64>) -> CouplingSpec {
        let g = Grid::new(n).unwrap();
        CouplingSpec::new(ValueField::zeros(g), lam.clone(), ValueField::zeros(g), lam).unwrap()
    }

    #[test]
    fn decoupled_returns_potential() {
        let g = Grid::new(16).unwrap();
        let a = ValueField::from_fn(g, |x| (2.0 * PI * x).cos());
        let c = CouplingSpec::new(a.clone(), vec![0.0, 0.0], a.clone(), vec![]).unwrap();
        let m = DensityField::point_mass(g, 3);
        assert_eq!(eval_f(&c, &m).unwrap(), a);
    }

    #[test]
    fn uniform_measure_sees_only_lambda0() {
        let c = spec(32, vec![0.3, 1.0, 0.5]);
        let f = eval_f(&c, &DensityField::uniform(c.grid())).unwrap();
        assert!(f.values().iter().all(|v| (v - 0.3).abs() < 1e-14));
    }

    #[test]
    fn point_mass_gives_shifted_cosine() {
        let c = spec(32, vec![0.0, 1.0]);
        let g = c.grid();
        let f = eval_g(&c, &DensityField::point_mass(g, 5)).unwrap();
        let y0 = g.x(5);
        for j in 0..32 {
            let want = (2.0 * PI * (g.x(j) - y0)).cos();
            assert!((f.values()[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_eigenvalue_rejected() {
        let g = Grid::new(16).unwrap();
        let z = ValueField::zeros(g);
        let err = CouplingSpec::new(z.clone(), vec![0.0, -1.0], z, vec![]).unwrap_err();
        assert!(err.to_string().contains("monotone"));
    }

    #[test]
    fn too_many_modes_rejected() {
        let g = Grid::new(16).unwrap();
        let z = ValueField::zeros(g);
        assert!(CouplingSpec::new(z.clone(), vec![0.0; 6], z, vec![]).is_err());
    }

    #[test]
    fn flat_derivative_requires_centering() {
        let c = spec(16, vec![0.0, 1.0]);
        let rho = SignedMeasure::new(c.grid(), vec![1.0; 16]).unwrap();
        assert!(matches!(
            c.apply_flat_derivative(&rho, Which::Running),
            Err(MfgError::NotCentered(_))
        ));
    }

    #[test]
    fn certificate_flags_negative_mode() {
        let g = Grid::new(32).unwrap();
        let z = ValueField::zeros(g);
        let c = CouplingSpec::new_allow_non_monotone(z.clone(), vec![0.0, -1.0], z, vec![]).unwrap();
        let r = monotonicity_certificate(&c, 10, 1);
        assert!(r.min_quadratic_form <= -0.4);
        let w = r.witness.values();
        let pc: f64 = (0..32).map(|j| w[j] * (2.0 * PI * g.x(j)).cos()).sum::<f64>() / 4.0;
        let ps: f64 = (0..32).map(|j| w[j] * (2.0 * PI * g.x(j)).sin()).sum::<f64>() / 4.0;
        let norm2: f64 = w.iter().map(|v| v * v).sum::<f64>();
        assert!((pc * pc + ps * ps) / norm2 > 0.99);
    }

    #[test]
    fn certificate_valid_and_zero() {
        let r = monotonicity_certificate(&spec(32, vec![1.0, 0.5]), 100, 7);
        assert!(r.min_quadratic_form >= -1e-12);
        let r = monotonicity_certificate(&spec(32, vec![0.0, 0.0]), 20, 7);
        assert_eq!(r.min_quadratic_form, 0.0);
    }
}
