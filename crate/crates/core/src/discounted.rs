//! Discounted problem on a truncated horizon with `u(t_max) = 0`.

use serde::Serialize;

use crate::coupling::{CouplingSpec, Which};
use crate::error::{MfgError, Result};
use crate::noise::TreeRecipe;
use crate::solver::{MfgTreeSolution, SolveParams, Terminal, TreeSolver};
use crate::torus::{DensityField, GridFunction, ValueField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscountCaps {
    /// Longest horizon ever integrated.
    pub t_cap: f64,
    /// Target for `exp(-delta t_max)`.
    pub truncation_tol: f64,
}

impl Default for DiscountCaps {
    fn default() -> Self {
        DiscountCaps {
            t_cap: 200.0,
            truncation_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscountedSolution {
    pub base: MfgTreeSolution,
    pub delta: f64,
    pub t_max: f64,
    /// `sup|f| exp(-delta t_max) / delta`.
    pub truncation_error_bound: f64,
    /// True when `t_cap` cut the horizon short of the requested tolerance.
    pub capped: bool,
}

impl DiscountedSolution {
    /// `delta u^delta` at time zero.
    pub fn scaled_value(&self) -> ValueField {
        let u = self.base.u0();
        u.with_values(u.values().iter().map(|v| self.delta * v).collect())
    }

    /// Upper bound on `sup |f(., m)|` over all probability measures.
    pub fn cost_bound(c: &CouplingSpec) -> f64 {
        let a = c.potential(Which::Running).max_abs();
        a + c.eigenvalues(Which::Running).iter().map(|l| 2.0 * l.abs()).sum::<f64>()
    }
}

pub fn truncation_horizon(delta: f64, caps: &DiscountCaps) -> (f64, bool) {
    let wanted = (1.0 / caps.truncation_tol).ln() / delta;
    if wanted > caps.t_cap {
        (caps.t_cap, true)
    } else {
        (wanted, false)
    }
}

pub fn solve_discounted(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    delta: f64,
    m0: &DensityField,
    p: &SolveParams,
    caps: &DiscountCaps,
) -> Result<DiscountedSolution> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(MfgError::Param(format!("discount rate {delta} outside (0, 1]")));
    }
    let (t_max, capped) = truncation_horizon(delta, caps);
    if capped {
        log::warn!("discount {delta}: horizon capped at {t_max}, truncation error is larger");
    }
    let tree = recipe.tree(t_max)?;
    let zero = vec![ValueField::zeros(c.grid()); tree.leaves().len()];
    let base = TreeSolver::new(c, &tree, *p)?
        .discount(delta)
        .solve(m0, &Terminal::Fields(zero))?;
    Ok(DiscountedSolution {
        base,
        delta,
        t_max,
        truncation_error_bound: DiscountedSolution::cost_bound(c) * (-delta * t_max).exp() / delta,
        capped,
    })
}
