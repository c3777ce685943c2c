//! Stationary regime, ergodic constant, master-equation values and corrector.
//!
//! `U(-T, x, m)` is the time-zero value of the horizon-`T` game started from
//! `m` with the coupling terminal cost. For large `T` it behaves like
//! `lambda T + chi(x, m) + c`.

use log::{info, warn};
use serde::Serialize;

use crate::coupling::{CouplingSpec, Which};
use crate::discounted::{solve_discounted, DiscountCaps};
use crate::error::{MfgError, Result};
use crate::noise::{NoiseTree, TreeRecipe};
use crate::solver::{hamiltonian_raw, MfgTreeSolution, SolveParams, Terminal, TreeSolver};
use crate::torus::{wasserstein1, DensityField, GridFunction, ValueField};

/// Solves the horizon-`T` game from `m` with the coupling terminal cost.
pub fn solve_horizon(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    horizon: f64,
    m: &DensityField,
    p: &SolveParams,
) -> Result<MfgTreeSolution> {
    if !(horizon > 0.0) {
        return Err(MfgError::Param(format!("horizon must be positive, got {horizon}")));
    }
    let tree = recipe.tree(horizon)?;
    let sol = TreeSolver::new(c, &tree, *p)?.solve(m, &Terminal::Coupling)?;
    if !sol.converged {
        warn!("horizon {horizon}: fixed point not converged ({:.3e})", sol.final_residual());
    }
    Ok(sol)
}

/// `U(-T, ., m)`.
pub fn evaluate_master(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    horizon: f64,
    m: &DensityField,
    p: &SolveParams,
) -> Result<ValueField> {
    Ok(solve_horizon(c, recipe, horizon, m, p)?.u0().clone())
}

/// `(node, local slice)` pairs used as the horizon midpoint. When the midpoint
/// falls on a kick the pre-kick slices are used, so every sample has relaxed
/// for a full epoch.
pub fn midpoint_slices(tree: &NoiseTree) -> (f64, Vec<(usize, usize)>) {
    let total = tree.total_steps();
    let mid = total / 2;
    let f = tree.fine_steps();
    if tree.epochs() > 0 && mid > 0 && mid % f == 0 {
        let depth = mid / f - 1;
        (tree.time(mid), tree.nodes_at_depth(depth).map(|n| (n, f)).collect())
    } else {
        (tree.time(mid), tree.active_nodes(mid).collect())
    }
}

/// `(first step, last step, nodes)` of the averaging window: the epoch holding
/// the midpoint sample on a tree, `[T/4, T/2]` on a single line.
fn rate_window(tree: &NoiseTree) -> (usize, usize, Vec<usize>) {
    let (_, slices) = midpoint_slices(tree);
    if tree.epochs() == 0 {
        let total = tree.total_steps();
        (total / 4, (total / 2).max(total / 4 + 1), vec![0])
    } else {
        (0, tree.fine_steps(), slices.into_iter().map(|(n, _)| n).collect())
    }
}

fn forward_gradient(u: &ValueField) -> ValueField {
    let v = u.values();
    let n = v.len();
    let h = u.grid().h();
    u.with_values((0..n).map(|j| (v[(j + 1) % n] - v[j]) / h).collect())
}

#[derive(Debug, Clone)]
pub struct StationaryParams {
    pub ladder: Vec<f64>,
    pub anchors: (DensityField, DensityField),
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct StationaryEstimate {
    /// `(probability, density)` at the midpoint, one per active node.
    pub mu_bar: Vec<(f64, DensityField)>,
    /// Forward-difference gradients of `u` at the same slices.
    pub v_bar: Vec<(f64, ValueField)>,
    /// Mean-free values at the same slices.
    pub u_bar: Vec<(f64, ValueField)>,
    /// `int (f(x, m_t) - H(D u_t)) dx` averaged over the window, per node. On a
    /// tree the window is a full epoch, since the stationary regime repeats
    /// with the kicks.
    pub cost_rate: Vec<(f64, f64)>,
    pub horizon: f64,
    pub midpoint: f64,
    /// Time window over which `cost_rate` is averaged.
    pub window: (f64, f64),
    pub anchor_gap: f64,
    /// Distance between averaged midpoint densities of consecutive horizons.
    pub ladder_gaps: Vec<f64>,
    pub stabilized: bool,
}

impl StationaryEstimate {
    /// Noise-averaged midpoint density.
    pub fn mean_density(&self) -> DensityField {
        let g = self.mu_bar[0].1.grid();
        let mut acc = vec![0.0; g.n()];
        for (p, m) in &self.mu_bar {
            for (a, v) in acc.iter_mut().zip(m.values()) {
                *a += p * v;
            }
        }
        DensityField::normalized(g, acc).expect("mixture of densities")
    }

    /// Noise-averaged mean-free midpoint value.
    pub fn mean_value(&self) -> ValueField {
        let g = self.u_bar[0].1.grid();
        let mut acc = vec![0.0; g.n()];
        for (p, u) in &self.u_bar {
            for (a, v) in acc.iter_mut().zip(u.values()) {
                *a += p * v;
            }
        }
        ValueField::from_raw(g, acc)
    }
}

struct Midpoint {
    mu: Vec<(f64, DensityField)>,
    u: Vec<(f64, ValueField)>,
    time: f64,
}

fn midpoint(sol: &MfgTreeSolution) -> Midpoint {
    let tree = sol.tree();
    let (time, slices) = midpoint_slices(tree);
    Midpoint {
        mu: slices
            .iter()
            .map(|&(n, k)| (tree.node_prob(n), sol.m.node(n)[k].clone()))
            .collect(),
        u: slices
            .iter()
            .map(|&(n, k)| (tree.node_prob(n), sol.u.node(n)[k].clone()))
            .collect(),
        time,
    }
}

fn averaged(mu: &[(f64, DensityField)]) -> DensityField {
    let g = mu[0].1.grid();
    let mut acc = vec![0.0; g.n()];
    for (p, m) in mu {
        for (a, v) in acc.iter_mut().zip(m.values()) {
            *a += p * v;
        }
    }
    DensityField::normalized(g, acc).expect("mixture of densities")
}

/// Midpoint samples of growing horizons from two anchors, accepted once both
/// the anchor gap and the change between consecutive horizons drop below `tol`.
pub fn estimate_stationary(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    sp: &StationaryParams,
    p: &SolveParams,
) -> Result<StationaryEstimate> {
    if sp.ladder.is_empty() || sp.ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MfgError::Param("horizon ladder must be nonempty and increasing".into()));
    }
    let mut prev: Option<DensityField> = None;
    let mut ladder_gaps = Vec::new();
    let mut last = None;
    for &horizon in &sp.ladder {
        let s1 = solve_horizon(c, recipe, horizon, &sp.anchors.0, p)?;
        let s2 = solve_horizon(c, recipe, horizon, &sp.anchors.1, p)?;
        let m1 = midpoint(&s1);
        let m2 = midpoint(&s2);
        let mut anchor_gap = 0.0;
        for ((p1, a), (_, b)) in m1.mu.iter().zip(&m2.mu) {
            anchor_gap += p1 * wasserstein1(a, b)?;
        }
        let avg = averaged(&m1.mu);
        if let Some(before) = &prev {
            ladder_gaps.push(wasserstein1(before, &avg)?);
        }
        let stabilized =
            anchor_gap <= sp.tol && ladder_gaps.last().map_or(sp.ladder.len() == 1, |g| *g <= sp.tol);
        info!("stationary ladder T = {horizon}: anchor gap {anchor_gap:.3e}");
        prev = Some(avg);
        last = Some((horizon, m1, s1, anchor_gap, stabilized));
        if stabilized {
            break;
        }
    }
    let (horizon, mid, sol, anchor_gap, stabilized) = last.expect("nonempty ladder");
    if !stabilized {
        warn!("stationary ladder exhausted: anchor gap {anchor_gap:.3e}, ladder gaps {ladder_gaps:?}");
    }
    let h = c.grid().h();
    let tree = sol.tree();
    let (w0, w1, slices) = rate_window(tree);
    let cost_rate = slices
        .iter()
        .map(|&node| {
            let mut acc = 0.0;
            for k in w0..w1 {
                let f = c.eval_raw(Which::Running, sol.m.node(node)[k].values());
                let ham = hamiltonian_raw(sol.u.node(node)[k + 1].values(), h);
                acc += f.values().iter().zip(&ham).map(|(a, b)| h * (a - b)).sum::<f64>();
            }
            (tree.node_prob(node), acc / (w1 - w0) as f64)
        })
        .collect();
    let window = (
        tree.time(tree.node_start(slices[0]) + w0),
        tree.time(tree.node_start(slices[0]) + w1),
    );
    Ok(StationaryEstimate {
        v_bar: mid.u.iter().map(|(p, u)| (*p, forward_gradient(u))).collect(),
        u_bar: mid.u.iter().map(|(p, u)| (*p, u.centered())).collect(),
        mu_bar: mid.mu,
        cost_rate,
        horizon,
        midpoint: mid.time,
        window,
        anchor_gap,
        ladder_gaps,
        stabilized,
    })
}

/// The game on `tree` started from the averaged stationary density with the
/// stationary value as terminal field on every leaf.
pub fn stationary_proxy(
    c: &CouplingSpec,
    tree: &NoiseTree,
    stat: &StationaryEstimate,
    p: &SolveParams,
) -> Result<MfgTreeSolution> {
    let terminal = Terminal::Fields(vec![stat.mean_value(); tree.leaves().len()]);
    TreeSolver::new(c, tree, *p)?.solve(&stat.mean_density(), &terminal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErgodicMethod {
    HorizonDifference,
    Discounted,
    StationaryFormula,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicEstimate {
    pub lambda_hat: f64,
    pub method: ErgodicMethod,
    /// Change of the estimate between the last two refinement levels.
    pub extrapolation_residual: f64,
    /// Horizon, smallest discount or midpoint time, depending on the method.
    pub window: f64,
}

#[derive(Debug, Clone)]
pub struct ErgodicParams {
    /// At least two horizons for the difference quotient.
    pub ladder: Vec<f64>,
    pub m0: DensityField,
    pub deltas: Vec<f64>,
    pub caps: DiscountCaps,
    pub stationary: StationaryParams,
}

fn mean(u: &ValueField) -> f64 {
    u.mean()
}

/// `(int u0^{T'} - int u0^{T}) / (T' - T)` over the last two ladder entries.
pub fn lambda_horizon_difference(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    ladder: &[f64],
    m0: &DensityField,
    p: &SolveParams,
) -> Result<ErgodicEstimate> {
    if ladder.len() < 2 || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MfgError::Param("horizon difference needs two increasing horizons".into()));
    }
    let means: Vec<f64> = ladder
        .iter()
        .map(|&t| Ok(mean(&evaluate_master(c, recipe, t, m0, p)?)))
        .collect::<Result<_>>()?;
    let q: Vec<f64> = (1..ladder.len())
        .map(|i| (means[i] - means[i - 1]) / (ladder[i] - ladder[i - 1]))
        .collect();
    let lambda_hat = *q.last().unwrap();
    Ok(ErgodicEstimate {
        lambda_hat,
        method: ErgodicMethod::HorizonDifference,
        extrapolation_residual: if q.len() > 1 {
            (q[q.len() - 1] - q[q.len() - 2]).abs()
        } else {
            f64::NAN
        },
        window: *ladder.last().unwrap(),
    })
}

/// `int delta u^delta_0` at the smallest discount rate of the grid.
pub fn lambda_discounted(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    deltas: &[f64],
    m0: &DensityField,
    caps: &DiscountCaps,
    p: &SolveParams,
) -> Result<ErgodicEstimate> {
    if deltas.is_empty() {
        return Err(MfgError::Param("empty discount grid".into()));
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let vals: Vec<f64> = sorted
        .iter()
        .map(|&d| Ok(solve_discounted(c, recipe, d, m0, p, caps)?.scaled_value().mean()))
        .collect::<Result<_>>()?;
    let k = vals.len();
    Ok(ErgodicEstimate {
        lambda_hat: vals[k - 1],
        method: ErgodicMethod::Discounted,
        extrapolation_residual: if k > 1 { (vals[k - 1] - vals[k - 2]).abs() } else { f64::NAN },
        window: sorted[k - 1],
    })
}

/// `E[int (f(x, mu_bar) - H(D u_bar)) dx]` at the stationary midpoint.
pub fn lambda_stationary_formula(stat: &StationaryEstimate) -> ErgodicEstimate {
    let lambda_hat = stat.cost_rate.iter().map(|(p, r)| p * r).sum();
    ErgodicEstimate {
        lambda_hat,
        method: ErgodicMethod::StationaryFormula,
        extrapolation_residual: stat.ladder_gaps.last().copied().unwrap_or(f64::NAN),
        window: stat.midpoint,
    }
}

pub fn estimate_lambda(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    method: ErgodicMethod,
    ep: &ErgodicParams,
    p: &SolveParams,
) -> Result<ErgodicEstimate> {
    match method {
        ErgodicMethod::HorizonDifference => lambda_horizon_difference(c, recipe, &ep.ladder, &ep.m0, p),
        ErgodicMethod::Discounted => lambda_discounted(c, recipe, &ep.deltas, &ep.m0, &ep.caps, p),
        ErgodicMethod::StationaryFormula => {
            Ok(lambda_stationary_formula(&estimate_stationary(c, recipe, &ep.stationary, p)?))
        }
    }
}

/// Anchor removing the additive constant of the corrector.
#[derive(Debug, Clone)]
pub struct Normalization {
    pub x_ref: usize,
    pub m_ref: DensityField,
}

impl Normalization {
    pub fn standard(grid: crate::torus::Grid) -> Self {
        Normalization {
            x_ref: 0,
            m_ref: DensityField::uniform(grid),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrectorEstimate {
    /// `U(-T, ., m) - U(-T, x_ref, m_ref)` at the largest horizon.
    #[serde(skip)]
    pub chi: ValueField,
    /// Sup distance between consecutive ladder entries.
    pub gaps: Vec<f64>,
    pub stabilized: bool,
    /// `U(-T, x_ref, m_ref) - lambda T` at the largest horizon.
    pub constant: f64,
}

/// Normalized correctors for several measures; the reference solves are shared.
pub fn estimate_correctors(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    ms: &[DensityField],
    ladder: &[f64],
    lambda_hat: f64,
    norm: &Normalization,
    stab_tol: f64,
    p: &SolveParams,
) -> Result<Vec<CorrectorEstimate>> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MfgError::Param("corrector ladder must be nonempty and increasing".into()));
    }
    if norm.x_ref >= c.grid().n() {
        return Err(MfgError::Param(format!("x_ref cell {} out of range", norm.x_ref)));
    }
    let refs: Vec<f64> = ladder
        .iter()
        .map(|&t| Ok(evaluate_master(c, recipe, t, &norm.m_ref, p)?.values()[norm.x_ref]))
        .collect::<Result<_>>()?;
    let t_last = *ladder.last().unwrap();
    let constant = refs.last().unwrap() - lambda_hat * t_last;
    ms.iter()
        .map(|m| {
            let mut chis: Vec<ValueField> = Vec::with_capacity(ladder.len());
            for (&t, r) in ladder.iter().zip(&refs) {
                let u = evaluate_master(c, recipe, t, m, p)?;
                chis.push(u.with_values(u.values().iter().map(|v| v - r).collect()));
            }
            let gaps: Vec<f64> = chis
                .windows(2)
                .map(|w| w[1].axpy(-1.0, &w[0]).max_abs())
                .collect();
            let stabilized = gaps.last().map_or(false, |g| *g <= stab_tol);
            if !stabilized {
                warn!("corrector did not stabilize: gaps {gaps:?}");
            }
            Ok(CorrectorEstimate {
                chi: chis.pop().unwrap(),
                gaps,
                stabilized,
                constant,
            })
        })
        .collect()
}

pub fn estimate_corrector(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    m: &DensityField,
    ladder: &[f64],
    lambda_hat: f64,
    norm: &Normalization,
    stab_tol: f64,
    p: &SolveParams,
) -> Result<CorrectorEstimate> {
    Ok(estimate_correctors(c, recipe, std::slice::from_ref(m), ladder, lambda_hat, norm, stab_tol, p)?
        .pop()
        .unwrap())
}

/// `int (chi(., m1) - chi(., m2)) d(m1 - m2)`.
pub fn corrector_pairing(chi1: &ValueField, chi2: &ValueField, m1: &DensityField, m2: &DensityField) -> f64 {
    let h = m1.grid().h();
    chi1.values()
        .iter()
        .zip(chi2.values())
        .zip(m1.values().iter().zip(m2.values()))
        .map(|((a, b), (p, q))| h * (a - b) * (p - q))
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct MasterDecayReport {
    pub horizons: Vec<f64>,
    /// `sup_{x, m} |[U(-2T) (m) - U(-2T)(m')] - [U(-T)(m) - U(-T)(m')]|` per horizon,
    /// with `m'` the first entry of the test set.
    pub sup_changes: Vec<f64>,
}

pub fn master_difference_decay(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    test_set: &[DensityField],
    horizons: &[f64],
    p: &SolveParams,
) -> Result<MasterDecayReport> {
    if test_set.len() < 2 {
        return Err(MfgError::Param("test set needs a reference and at least one measure".into()));
    }
    for &t in horizons {
        let (a, b) = (recipe.tree(t)?, recipe.tree(2.0 * t)?);
        if a.epochs() > 0 && (a.epoch_len() - b.epoch_len()).abs() > 1e-9 {
            return Err(MfgError::Param(format!(
                "horizons {t} and {} get epoch lengths {} and {}; differences would mix tree discretizations",
                2.0 * t,
                a.epoch_len(),
                b.epoch_len()
            )));
        }
    }
    let mut sup_changes = Vec::with_capacity(horizons.len());
    for &t in horizons {
        let diff_at = |horizon: f64| -> Result<Vec<ValueField>> {
            let r = evaluate_master(c, recipe, horizon, &test_set[0], p)?;
            test_set[1..]
                .iter()
                .map(|m| Ok(evaluate_master(c, recipe, horizon, m, p)?.axpy(-1.0, &r)))
                .collect()
        };
        let short = diff_at(t)?;
        let long = diff_at(2.0 * t)?;
        let s = short
            .iter()
            .zip(&long)
            .map(|(a, b)| b.axpy(-1.0, a).max_abs())
            .fold(0.0, f64::max);
        sup_changes.push(s);
    }
    Ok(MasterDecayReport {
        horizons: horizons.to_vec(),
        sup_changes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryReport {
    pub horizons: Vec<f64>,
    pub times: Vec<f64>,
    /// `gaps[i][k]`: largest per-leaf sup gap at `times[k]` for `horizons[i]`.
    pub gaps: Vec<Vec<f64>>,
    pub sup_gap: Vec<f64>,
    /// `sup_gap[i + 1] / sup_gap[i]`.
    pub ratios: Vec<f64>,
}

/// Compares `u^T_t - lambda (T - t)` with `chi(., mbar_t) + c` along the
/// reference flow `mbar`. The reference flow is the population of the
/// `t_ref + max(t_grid)` game, which follows the corrector feedback up to an
/// error decaying in the remaining horizon, and `chi + c` is tabulated as
/// `U(-t_ref, ., mbar_t) - lambda t_ref`. Probe times must sit on epoch
/// boundaries.
pub fn corollary_probe(
    c: &CouplingSpec,
    recipe: &TreeRecipe,
    m0: &DensityField,
    t_grid: &[f64],
    ladder: &[f64],
    lambda_hat: f64,
    t_ref: f64,
    p: &SolveParams,
) -> Result<CorollaryReport> {
    let t_hi = t_grid.iter().cloned().fold(0.0, f64::max);
    if ladder.iter().any(|&t| t < t_hi) {
        return Err(MfgError::Param("every ladder horizon must cover the time grid".into()));
    }
    let long = solve_horizon(c, recipe, t_ref + t_hi, m0, p)?;
    let lt = long.tree().clone();
    // Off the epoch grid the tabulating solve would kick at a different phase
    // than the flow it is compared with.
    if lt.epochs() > 0 {
        let el = lt.epoch_len();
        if let Some(t) = t_grid.iter().find(|t| ((*t / el) - (*t / el).round()).abs() > 1e-9) {
            return Err(MfgError::Param(format!("probe time {t} is not a multiple of the epoch length {el}")));
        }
    }
    // chi + c tabulated on every (time, node) pair of the reference flow.
    let mut table: Vec<Vec<(usize, ValueField)>> = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let i = (t / lt.dt()).round() as usize;
        let mut row = Vec::new();
        for (node, k) in lt.active_nodes(i) {
            let u = evaluate_master(c, recipe, t_ref, &long.m.node(node)[k], p)?;
            row.push((node, u.with_values(u.values().iter().map(|v| v - lambda_hat * t_ref).collect())));
        }
        table.push(row);
    }
    let mut gaps = Vec::with_capacity(ladder.len());
    for &horizon in ladder {
        let sol = solve_horizon(c, recipe, horizon, m0, p)?;
        let tree = sol.tree();
        if (tree.dt() - lt.dt()).abs() > 1e-12 * lt.dt()
            || (tree.epochs() > 0 && (tree.epoch_len() - lt.epoch_len()).abs() > 1e-9)
        {
            return Err(MfgError::Param(
                "probe horizons must share the epoch length and step of the reference flow".into(),
            ));
        }
        let mut row = Vec::with_capacity(t_grid.len());
        for (&t, tab) in t_grid.iter().zip(&table) {
            let i = (t / tree.dt()).round() as usize;
            let mut worst: f64 = 0.0;
            for ((node, k), (ref_node, chi)) in tree.active_nodes(i).zip(tab) {
                debug_assert_eq!(node, *ref_node);
                let u = &sol.u.node(node)[k];
                let shift = lambda_hat * (horizon - tree.time(i));
                let g = u
                    .values()
                    .iter()
                    .zip(chi.values())
                    .map(|(a, b)| (a - shift - b).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(g);
            }
            row.push(worst);
        }
        gaps.push(row);
    }
    let sup_gap: Vec<f64> = gaps.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).collect();
    let ratios = sup_gap.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(CorollaryReport {
        horizons: ladder.to_vec(),
        times: t_grid.to_vec(),
        gaps,
        sup_gap,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::Grid;
    use std::f64::consts::PI;

    fn recipe(sigma: f64) -> TreeRecipe {
        TreeRecipe {
            sigma,
            epoch_len: 0.5,
            dt: 0.01,
            max_epochs: 4,
        }
    }

    #[test]
    fn flat_cost_all_methods() {
        let g = Grid::new(16).unwrap();
        let c0 = 0.7;
        let c = CouplingSpec::new(ValueField::constant(g, c0), vec![], ValueField::zeros(g), vec![]).unwrap();
        let p = SolveParams::picard(1e-11);
        let m0 = DensityField::uniform(g);
        let r = recipe(0.3);
        let hd = lambda_horizon_difference(&c, &r, &[1.0, 2.0], &m0, &p).unwrap();
        assert!((hd.lambda_hat - c0).abs() < 1e-10);
        let sp = StationaryParams {
            ladder: vec![1.0],
            anchors: (m0.clone(), DensityField::from_profile(g, |x| 1.0 + 0.5 * (2.0 * PI * x).cos()).unwrap()),
            tol: 1e-3,
        };
        let st = lambda_stationary_formula(&estimate_stationary(&c, &r, &sp, &p).unwrap());
        assert!((st.lambda_hat - c0).abs() < 1e-12);
    }

    #[test]
    fn zero_data_master_and_corrector() {
        let g = Grid::new(16).unwrap();
        let c = CouplingSpec::zero(g);
        let p = SolveParams::picard(1e-11);
        let m = DensityField::from_profile(g, |x| 1.0 + 0.3 * (2.0 * PI * x).sin()).unwrap();
        assert_eq!(evaluate_master(&c, &recipe(0.3), 1.0, &m, &p).unwrap().max_abs(), 0.0);
        let chi = estimate_corrector(&c, &recipe(0.3), &m, &[0.5, 1.0], 0.0, &Normalization::standard(g), 1e-4, &p)
            .unwrap();
        assert_eq!(chi.chi.max_abs(), 0.0);
        assert!(chi.stabilized);
    }

    #[test]
    fn midpoint_before_kick() {
        let t = NoiseTree::build(0.5, 2.0, 4, 5).unwrap();
        let (time, slices) = midpoint_slices(&t);
        assert!((time - 1.0).abs() < 1e-12);
        assert_eq!(slices, vec![(1, 5), (2, 5)]);
        let t = NoiseTree::build(0.5, 2.0, 3, 4).unwrap();
        let (_, slices) = midpoint_slices(&t);
        assert_eq!(slices.len(), 2);
        assert_eq!(slices[0], (1, 2));
    }
}
