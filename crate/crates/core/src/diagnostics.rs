//! Decay fits, turnpike and duality reports, linear decay probes and the
//! exponential-decay certificate.

use serde::Serialize;

use crate::coupling::{CouplingSpec, Which};
use crate::error::{MfgError, Result};
use crate::noise::{NoiseTree, TreeField};
use crate::solver::{drift_coeffs, hamiltonian_raw, transport_adjoint, Frame, MfgTreeSolution, Scheme};
use crate::torus::{l2_norm, spline_shift, wasserstein1, Grid, GridFunction, ImplicitDiffusion, SignedMeasure, ValueField};

const LOG_FLOOR: f64 = 1e-14;
/// Distances below this are treated as unresolved when choosing fit windows.
pub const RESOLUTION_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted rate, clamped at zero.
    pub rate: f64,
    /// Fitted value at `t = 0`.
    pub amplitude: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if syy > 0.0 && sxx > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, my - slope * mx, r2)
}

/// Least squares on `log(max(value, 1e-14))` over samples with `t` in `window`.
pub fn fit_exponential_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .map(|(t, v)| (*t, v.max(LOG_FLOOR).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(MfgError::Param(format!(
            "decay window [{}, {}] holds {} samples",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(MfgError::Param("non-finite value in decay series".into()));
    }
    let (slope, intercept, r2) = linear_fit(&pts);
    Ok(DecayFit {
        rate: (-slope).max(0.0),
        amplitude: intercept.exp(),
        r2,
        window,
    })
}

/// Fits `A (exp(-w t) + exp(-w (T - t)))` in log space by a scan over `w`.
pub fn fit_two_sided_decay(series: &[(f64, f64)], horizon: f64, window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .map(|(t, v)| (*t, v.max(LOG_FLOOR).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(MfgError::Param("two-sided window too short".into()));
    }
    let k = pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=4000 {
        let w = 1e-3 * 10f64.powf(i as f64 * 6.0 / 4000.0);
        let shape: Vec<f64> = pts
            .iter()
            .map(|(t, _)| ((-w * t).exp() + (-w * (horizon - t)).exp()).ln())
            .collect();
        let log_a = pts.iter().zip(&shape).map(|(p, s)| p.1 - s).sum::<f64>() / k;
        let sse: f64 = pts.iter().zip(&shape).map(|(p, s)| (p.1 - s - log_a).powi(2)).sum();
        if sse < best.0 {
            best = (sse, w, log_a);
        }
    }
    Ok(DecayFit {
        rate: best.1,
        amplitude: best.2.exp(),
        r2: if syy > 0.0 { (1.0 - best.0 / syy).clamp(0.0, 1.0) } else { 1.0 },
        window,
    })
}

fn check_pair(a: &MfgTreeSolution, b: &MfgTreeSolution) -> Result<()> {
    if a.tree() != b.tree() || a.grid() != b.grid() {
        return Err(MfgError::Param("solutions live on different trees or grids".into()));
    }
    if a.frame != Frame::Physical || b.frame != Frame::Physical {
        return Err(MfgError::Param("solutions must be in the physical frame".into()));
    }
    Ok(())
}

fn forward_diff(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|j| (v[(j + 1) % n] - v[j]) / h).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TurnpikeReport {
    pub times: Vec<f64>,
    /// `E[d1(m_t, proxy_t)]`.
    pub m_distance: Vec<f64>,
    /// `E[||D u_t - D proxy_t||_L2]`.
    pub du_distance: Vec<f64>,
    /// One-sided fit over the initial layer that is resolved above round-off.
    pub fit: DecayFit,
    /// `max(d(0), d(T)) / d(T / 2)` for the density distance.
    pub contrast: f64,
}

/// Distances between a solution and a stationary proxy on the same tree.
pub fn turnpike_report(sol: &MfgTreeSolution, proxy: &MfgTreeSolution) -> Result<TurnpikeReport> {
    check_pair(sol, proxy)?;
    let tree = sol.tree();
    let h = sol.grid().h();
    let total = tree.total_steps();
    if total < 4 {
        return Err(MfgError::Param("horizon window too short for a turnpike report".into()));
    }
    let mut times = Vec::with_capacity(total + 1);
    let mut m_distance = Vec::with_capacity(total + 1);
    let mut du_distance = Vec::with_capacity(total + 1);
    for i in 0..=total {
        let mut dm = 0.0;
        let mut du = 0.0;
        for (node, k) in tree.active_nodes(i) {
            let p = tree.node_prob(node);
            dm += p * wasserstein1(&sol.m.node(node)[k], &proxy.m.node(node)[k])?;
            let a = forward_diff(sol.u.node(node)[k].values(), h);
            let b = forward_diff(proxy.u.node(node)[k].values(), h);
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            du += p * l2_norm(h, &d);
        }
        times.push(tree.time(i));
        m_distance.push(dm);
        du_distance.push(du);
    }
    let series: Vec<(f64, f64)> = times.iter().cloned().zip(m_distance.iter().cloned()).collect();
    // The initial layer up to the first unresolved sample; once the distance
    // sits at round-off the log-linear fit only sees noise.
    let cut = m_distance
        .iter()
        .position(|d| *d < RESOLUTION_FLOOR)
        .unwrap_or(total / 2)
        .clamp(3.min(total / 2), total / 2);
    let fit = fit_exponential_decay(&series, (0.0, times[cut]))?;
    let mid = m_distance[total / 2].max(LOG_FLOOR);
    Ok(TurnpikeReport {
        contrast: m_distance[0].max(m_distance[total]) / mid,
        times,
        m_distance,
        du_distance,
        fit,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    /// `E||(u1 - u2) - mean||^2`.
    pub alpha: Vec<f64>,
    /// `E||D(u1 - u2)||^2`.
    pub beta: Vec<f64>,
    /// `E||m1 - m2||^2`.
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LasryLionsReport {
    pub times: Vec<f64>,
    /// `E[int (u1 - u2)(m1 - m2)]` at every global time index.
    pub bracket: Vec<f64>,
    /// Cumulative coupling contribution `sum dt E<f(m1) - f(m2), A^{-1}(m1 - m2)>`.
    pub coupling: Vec<f64>,
    /// Cumulative Hamiltonian convexity gaps weighted by both densities.
    pub dissipation: Vec<f64>,
    /// `1/2 sum dt E[int |D(u1 - u2)|^2 (m1 + m2)]` with forward differences.
    pub quadratic_dissipation: f64,
    /// `bracket(0) - bracket(T) - coupling(T) - dissipation(T)`.
    pub identity_residual: f64,
    /// Largest step-to-step growth of the bracket (should be <= 0).
    pub max_increase: f64,
    pub magnitude: f64,
    pub series: DecaySeries,
}

impl LasryLionsReport {
    /// Allowed slack `tol (1 + magnitude)`.
    pub fn holds(&self, tol: f64) -> bool {
        let slack = tol * (1.0 + self.magnitude);
        self.max_increase <= slack && self.identity_residual.abs() <= slack && self.bracket[0] >= -slack
    }
}

/// Discrete duality bookkeeping between two solutions that differ only in `m0`.
pub fn lasry_lions_functional(
    c: &CouplingSpec,
    sol1: &MfgTreeSolution,
    sol2: &MfgTreeSolution,
) -> Result<LasryLionsReport> {
    check_pair(sol1, sol2)?;
    if sol1.discount != sol2.discount {
        return Err(MfgError::Param("solutions use different discount rates".into()));
    }
    let tree = sol1.tree();
    let grid = sol1.grid();
    let h = grid.h();
    let n = grid.n();
    let dt = tree.dt();
    let scheme = Scheme::new(grid, dt, sol1.params.cfl_factor)?;
    let total = tree.total_steps();
    let mut coupling_inc = vec![0.0; total];
    let mut dissip_inc = vec![0.0; total];
    let mut quad = 0.0;
    for node in 0..tree.num_nodes() {
        let p = tree.node_prob(node);
        let start = tree.node_start(node);
        for k in 0..tree.node_steps(node) {
            let (u1n, u2n) = (sol1.u.node(node)[k + 1].values(), sol2.u.node(node)[k + 1].values());
            let (m1, m2) = (sol1.m.node(node)[k].values(), sol2.m.node(node)[k].values());
            let mut t1 = m1.to_vec();
            let mut t2 = m2.to_vec();
            scheme.diffuse(&mut t1);
            scheme.diffuse(&mut t2);
            let f1 = c.eval_raw(Which::Running, m1);
            let f2 = c.eval_raw(Which::Running, m2);
            let h1 = hamiltonian_raw(u1n, h);
            let h2 = hamiltonian_raw(u2n, h);
            let (a1, b1) = drift_coeffs(u1n, h);
            let (a2, b2) = drift_coeffs(u2n, h);
            let (d1m, d1p) = (backward_diff(u1n, h), forward_diff(u1n, h));
            let (d2m, d2p) = (backward_diff(u2n, h), forward_diff(u2n, h));
            let mut cp = 0.0;
            let mut ds = 0.0;
            let mut q = 0.0;
            for j in 0..n {
                cp += h * (f1.values()[j] - f2.values()[j]) * (t1[j] - t2[j]);
                // Convexity gaps of the Godunov Hamiltonian at each solution.
                let g1 = h2[j] - h1[j] - a1[j] * (d2m[j] - d1m[j]) - b1[j] * (d2p[j] - d1p[j]);
                let g2 = h1[j] - h2[j] - a2[j] * (d1m[j] - d2m[j]) - b2[j] * (d1p[j] - d2p[j]);
                ds += h * (g1 * t1[j] + g2 * t2[j]);
                q += h * 0.5 * (d1p[j] - d2p[j]).powi(2) * (m1[j] + m2[j]);
            }
            coupling_inc[start + k] += p * dt * cp;
            dissip_inc[start + k] += p * dt * ds;
            quad += p * dt * q;
        }
    }
    let mut times = Vec::with_capacity(total + 1);
    let mut bracket = Vec::with_capacity(total + 1);
    let mut alpha = Vec::with_capacity(total + 1);
    let mut beta = Vec::with_capacity(total + 1);
    let mut gamma = Vec::with_capacity(total + 1);
    for i in 0..=total {
        let (mut b, mut al, mut be, mut ga) = (0.0, 0.0, 0.0, 0.0);
        for (node, k) in tree.active_nodes(i) {
            let p = tree.node_prob(node);
            let du: Vec<f64> = sol1.u.node(node)[k]
                .values()
                .iter()
                .zip(sol2.u.node(node)[k].values())
                .map(|(x, y)| x - y)
                .collect();
            let dm: Vec<f64> = sol1.m.node(node)[k]
                .values()
                .iter()
                .zip(sol2.m.node(node)[k].values())
                .map(|(x, y)| x - y)
                .collect();
            let mean = du.iter().sum::<f64>() / n as f64;
            b += p * h * du.iter().zip(&dm).map(|(x, y)| x * y).sum::<f64>();
            al += p * h * du.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
            be += p * h * forward_diff(&du, h).iter().map(|x| x * x).sum::<f64>();
            ga += p * h * dm.iter().map(|x| x * x).sum::<f64>();
        }
        times.push(tree.time(i));
        bracket.push(b);
        alpha.push(al);
        beta.push(be);
        gamma.push(ga);
    }
    let cum = |inc: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0];
        for v in inc {
            out.push(out.last().unwrap() + v);
        }
        out
    };
    let coupling = cum(&coupling_inc);
    let dissipation = cum(&dissip_inc);
    let identity_residual = bracket[0] - bracket[total] - coupling[total] - dissipation[total];
    let max_increase = bracket.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let magnitude = bracket
        .iter()
        .chain(&coupling)
        .chain(&dissipation)
        .fold(0.0_f64, |a, b| a.max(b.abs()));
    Ok(LasryLionsReport {
        series: DecaySeries {
            times: times.clone(),
            alpha,
            beta,
            gamma,
        },
        times,
        bracket,
        coupling,
        dissipation,
        quadratic_dissipation: quad,
        identity_residual,
        max_increase,
        magnitude,
    })
}

fn backward_diff(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|j| (v[j] - v[(j + n - 1) % n]) / h).collect()
}

/// Velocity field of a linear probe.
#[derive(Debug, Clone)]
pub enum Drift {
    Zero,
    /// Time-independent samples `V(x_j)`.
    Static(ValueField),
    /// One field per node and time slice on a noise tree.
    Tree(TreeField<ValueField>),
}

fn upwind_split(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|x| x.max(0.0)).collect(), v.iter().map(|x| x.min(0.0)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: DecayFit,
    /// Largest `|h sum mu_t|` seen.
    pub max_total: f64,
}

/// Evolves `d_t mu = Lap mu + div(mu V)` and fits the decay of `E||mu_t||_L2`.
/// For a static or zero drift the path is a single line of `horizon / dt` steps.
pub fn fp_decay_probe(
    drift: &Drift,
    mu0: &SignedMeasure,
    horizon: f64,
    dt: f64,
    window: (f64, f64),
) -> Result<ProbeReport> {
    if mu0.total().abs() > 1e-10 {
        return Err(MfgError::NotCentered(mu0.total()));
    }
    let grid = mu0.grid();
    let h = grid.h();
    let n = grid.n();
    let (times, norms, max_total) = match drift {
        Drift::Zero | Drift::Static(_) => {
            let v = match drift {
                Drift::Static(v) => v.values().to_vec(),
                _ => vec![0.0; n],
            };
            check_cfl(&v, h, dt)?;
            let (a, b) = upwind_split(&v);
            let diff = ImplicitDiffusion::new(grid, 1.0, dt)?;
            let steps = (horizon / dt).round() as usize;
            let mut mu = mu0.values().to_vec();
            let mut times = vec![0.0];
            let mut norms = vec![l2_norm(h, &mu)];
            let mut max_total: f64 = mu0.total().abs();
            for k in 0..steps {
                diff.apply_in_place(&mut mu);
                mu = transport_adjoint(&mu, &a, &b, dt, h);
                times.push((k + 1) as f64 * dt);
                norms.push(l2_norm(h, &mu));
                max_total = max_total.max((h * mu.iter().sum::<f64>()).abs());
            }
            (times, norms, max_total)
        }
        Drift::Tree(field) => tree_fp_probe(field, mu0)?,
    };
    let series: Vec<(f64, f64)> = times.iter().cloned().zip(norms.iter().cloned()).collect();
    Ok(ProbeReport {
        fit: fit_exponential_decay(&series, window)?,
        times,
        norms,
        max_total,
    })
}

fn check_cfl(v: &[f64], h: f64, dt: f64) -> Result<()> {
    let vmax = v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let limit = h / (vmax + 1.0);
    if dt > limit {
        return Err(MfgError::Cfl { dt, limit });
    }
    Ok(())
}

fn tree_fp_probe(field: &TreeField<ValueField>, mu0: &SignedMeasure) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let tree: &NoiseTree = field.tree();
    let grid = mu0.grid();
    let h = grid.h();
    let dt = tree.dt();
    let diff = ImplicitDiffusion::new(grid, 1.0, dt)?;
    let mut mu: Vec<Vec<Vec<f64>>> = vec![Vec::new(); tree.num_nodes()];
    for node in 0..tree.num_nodes() {
        let start = match tree.parent(node) {
            None => mu0.values().to_vec(),
            Some(p) => spline_shift(mu[p].last().unwrap(), h, tree.kick(node)),
        };
        let mut s = vec![start];
        for k in 0..tree.node_steps(node) {
            let v = field.node(node)[k + 1].values();
            check_cfl(v, h, dt)?;
            let (a, b) = upwind_split(v);
            let mut next = s[k].clone();
            diff.apply_in_place(&mut next);
            s.push(transport_adjoint(&next, &a, &b, dt, h));
        }
        mu[node] = s;
    }
    let mut times = Vec::new();
    let mut norms = Vec::new();
    let mut max_total: f64 = 0.0;
    for i in 0..=tree.total_steps() {
        let mut e = 0.0;
        for (node, k) in tree.active_nodes(i) {
            let m = &mu[node][k];
            e += tree.node_prob(node) * l2_norm(h, m);
            max_total = max_total.max((h * m.iter().sum::<f64>()).abs());
        }
        times.push(tree.time(i));
        norms.push(e);
    }
    Ok((times, norms, max_total))
}

/// Source term of the backward probe.
#[derive(Debug, Clone)]
pub enum Source {
    Zero,
    Static(ValueField),
    /// `A(x) cos(omega t)`.
    Oscillating(ValueField, f64),
}

impl Source {
    fn at(&self, n: usize, t: f64) -> Vec<f64> {
        match self {
            Source::Zero => vec![0.0; n],
            Source::Static(a) => a.values().to_vec(),
            Source::Oscillating(a, w) => a.values().iter().map(|v| v * (w * t).cos()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BackwardProbeReport {
    pub times: Vec<f64>,
    /// `||v(t) - mean v(t)||_L2`.
    pub norms: Vec<f64>,
    pub source_norms: Vec<f64>,
    /// Decay in backward time `T - t`.
    pub fit: DecayFit,
    /// Smallest `C` making the decay inequality hold at rate `lambda`.
    pub constant: f64,
    pub lambda: f64,
}

/// Integrates `dv = (-Lap v + V.Dv + A) dt` backwards from `terminal` and
/// measures the smallest `C` with
/// `||v~(t0)|| <= C (exp(-lambda (t - t0)) ||v~(t)|| + int_t0^t exp(-lambda (s - t0)) ||A(s)|| ds)`.
pub fn backward_decay_probe(
    v_field: &Drift,
    source: &Source,
    terminal: &ValueField,
    horizon: f64,
    dt: f64,
    lambda: f64,
) -> Result<BackwardProbeReport> {
    let grid = terminal.grid();
    let h = grid.h();
    let n = grid.n();
    let v = match v_field {
        Drift::Zero => vec![0.0; n],
        Drift::Static(v) => v.values().to_vec(),
        Drift::Tree(_) => {
            return Err(MfgError::Param("backward probe takes a static drift".into()));
        }
    };
    check_cfl(&v, h, dt)?;
    let (a, b) = upwind_split(&v);
    let diff = ImplicitDiffusion::new(grid, 1.0, dt)?;
    let steps = (horizon / dt).round() as usize;
    let mut vals = vec![Vec::new(); steps + 1];
    vals[steps] = terminal.values().to_vec();
    for k in (0..steps).rev() {
        let next = &vals[k + 1];
        let src = Source::at(source, n, k as f64 * dt);
        let dm = backward_diff(next, h);
        let dp = forward_diff(next, h);
        let mut out: Vec<f64> = (0..n)
            .map(|j| next[j] - dt * (a[j] * dm[j] + b[j] * dp[j] + src[j]))
            .collect();
        diff.apply_in_place(&mut out);
        vals[k] = out;
    }
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let norms: Vec<f64> = vals
        .iter()
        .map(|u| {
            let m = u.iter().sum::<f64>() / n as f64;
            let c: Vec<f64> = u.iter().map(|x| x - m).collect();
            l2_norm(h, &c)
        })
        .collect();
    let source_norms: Vec<f64> = times.iter().map(|&t| l2_norm(h, &source.at(n, t))).collect();
    // Mean-zero parts below this are round-off of the mean and carry no decay
    // information.
    let scale = vals.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    let floor = RESOLUTION_FLOOR * scale.max(f64::MIN_POSITIVE);
    let back: Vec<(f64, f64)> = times.iter().map(|t| horizon - t).zip(norms.iter().cloned()).collect();
    let resolved = back.iter().rev().take_while(|(_, v)| *v >= floor).count();
    let cut = if resolved >= 2 { back[steps + 1 - resolved].0 } else { horizon };
    let fit = fit_exponential_decay(&back, (0.0, cut))?;
    // Minimal constant over all resolved pairs t0 <= t.
    let mut constant: f64 = 0.0;
    for i in (0..=steps).filter(|&i| norms[i] >= floor) {
        let mut integral = 0.0;
        for j in i..=steps {
            if j > i {
                let w0 = (-lambda * (times[j - 1] - times[i])).exp() * source_norms[j - 1];
                let w1 = (-lambda * (times[j] - times[i])).exp() * source_norms[j];
                integral += 0.5 * dt * (w0 + w1);
            }
            let rhs = (-lambda * (times[j] - times[i])).exp() * norms[j] + integral;
            constant = constant.max(if rhs > 0.0 { norms[i] / rhs } else { f64::INFINITY });
        }
    }
    Ok(BackwardProbeReport {
        times,
        norms,
        source_norms,
        fit,
        constant,
        lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMode {
    Finite,
    Discounted { delta: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisMargin {
    pub name: &'static str,
    /// Smallest `C0` for which the hypothesis holds at the chosen rate.
    pub required_c0: f64,
    /// Relative slack at the reported `C0`; nonnegative when it holds.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub c0: f64,
    pub lambda: f64,
    pub hypotheses: Vec<HypothesisMargin>,
    pub failed: Vec<&'static str>,
    pub conclusion_rate: f64,
    pub conclusion_constant: f64,
    pub conclusion_margin: f64,
    pub holds: bool,
}

/// Rates scanned by the certificate search.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=40).map(|i| 0.05 * i as f64).collect()
}

struct Series<'a> {
    t: &'a [f64],
    alpha: &'a [f64],
    beta: &'a [f64],
    gamma: &'a [f64],
    /// Cumulative trapezoid integral of beta.
    ib: Vec<f64>,
}

impl<'a> Series<'a> {
    fn int_beta(&self, i: usize, j: usize) -> f64 {
        self.ib[j] - self.ib[i]
    }
}

/// `(lhs, rhs without C0)` pairs over the sampled grid.
type Pairs = Vec<(f64, f64)>;

fn required(pairs: &Pairs) -> f64 {
    pairs.iter().fold(0.0_f64, |acc, (l, r)| {
        if *l <= 0.0 {
            acc
        } else if *r <= 0.0 {
            f64::INFINITY
        } else {
            acc.max(l / r)
        }
    })
}

fn margin(pairs: &Pairs, c0: f64) -> f64 {
    pairs
        .iter()
        .map(|(l, r)| {
            let rhs = c0 * r;
            let scale = l.abs() + rhs.abs();
            if scale == 0.0 {
                0.0
            } else if rhs.is_nan() {
                -1.0
            } else {
                (rhs - l) / scale
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn hypothesis_pairs(s: &Series, mode: CertificateMode, lambda: f64) -> Vec<(&'static str, Pairs)> {
    let n = s.t.len();
    let mut b1 = Pairs::new();
    let mut b2 = Pairs::new();
    let mut b3 = Pairs::new();
    let mut b4 = Pairs::new();
    for i in 0..n {
        b4.push((s.alpha[i], s.beta[i]));
        let mut gmax: f64 = 0.0;
        for j in i..n {
            gmax = gmax.max(s.gamma[j]);
            let e = (-lambda * (s.t[j] - s.t[i])).exp();
            let ib = s.int_beta(i, j);
            b2.push((s.gamma[j], e * s.gamma[i] + ib));
            if mode == CertificateMode::Finite {
                b1.push((ib, (s.alpha[i] * s.gamma[i]).sqrt() + (s.alpha[j] * s.gamma[j]).sqrt()));
                b3.push((s.alpha[i], e * s.alpha[j] + ib + gmax));
            }
        }
    }
    match mode {
        CertificateMode::Finite => vec![("B1", b1), ("B2", b2), ("B3", b3), ("B4", b4)],
        CertificateMode::Discounted { delta } => {
            let mut b5 = Pairs::new();
            let mut b6 = Pairs::new();
            for i in 0..n {
                let mut tail_d = 0.0;
                let mut tail_l = 0.0;
                let mut sup: f64 = s.gamma[i];
                for j in i + 1..n {
                    let dtj = s.t[j] - s.t[j - 1];
                    let fd = |k: usize| (-delta * s.t[k]).exp() * s.beta[k];
                    let fl = |k: usize| (-lambda * (s.t[k] - s.t[i])).exp() * s.beta[k];
                    tail_d += 0.5 * dtj * (fd(j - 1) + fd(j));
                    tail_l += 0.5 * dtj * (fl(j - 1) + fl(j));
                    sup = sup.max((-lambda * (s.t[j] - s.t[i])).exp() * s.gamma[j]);
                }
                b5.push((tail_d, (-delta * s.t[i]).exp() * (s.alpha[i] * s.gamma[i]).sqrt()));
                b6.push((s.alpha[i], tail_l + sup));
            }
            vec![("B2", b2), ("B4", b4), ("B5", b5), ("B6", b6)]
        }
    }
}

/// Searches the smallest `C0` and the largest rate `lambda` (within a factor two
/// of the best `C0`) for which the sampled series satisfy the hypotheses, then
/// fits the conclusion's decay.
pub fn certificate_check(
    times: &[f64],
    alpha: &[f64],
    beta: &[f64],
    gamma: &[f64],
    mode: CertificateMode,
    lambda_grid: &[f64],
) -> Result<CertificateReport> {
    let n = times.len();
    if n < 3 || alpha.len() != n || beta.len() != n || gamma.len() != n {
        return Err(MfgError::Length {
            expected: n,
            got: alpha.len().min(beta.len()).min(gamma.len()),
        });
    }
    if times
        .iter()
        .chain(alpha)
        .chain(beta)
        .chain(gamma)
        .any(|v| !v.is_finite())
    {
        return Err(MfgError::Param("non-finite certificate input".into()));
    }
    if lambda_grid.is_empty() {
        return Err(MfgError::Param("empty rate grid".into()));
    }
    let mut ib = vec![0.0];
    for k in 1..n {
        ib.push(ib[k - 1] + 0.5 * (times[k] - times[k - 1]) * (beta[k] + beta[k - 1]));
    }
    let s = Series {
        t: times,
        alpha,
        beta,
        gamma,
        ib,
    };
    let scan: Vec<(f64, f64)> = lambda_grid
        .iter()
        .map(|&l| {
            let req = hypothesis_pairs(&s, mode, l)
                .iter()
                .map(|(_, p)| required(p))
                .fold(0.0, f64::max);
            (l, req)
        })
        .collect();
    let best = scan.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let lambda = if best.is_finite() {
        scan.iter()
            .filter(|(_, r)| *r <= 2.0 * best)
            .map(|p| p.0)
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        lambda_grid[0]
    };
    let pairs = hypothesis_pairs(&s, mode, lambda);
    let c0 = pairs.iter().map(|(_, p)| required(p)).fold(0.0, f64::max);
    let mut hypotheses = Vec::new();
    let mut failed = Vec::new();
    for (name, p) in &pairs {
        let req = required(p);
        if !req.is_finite() {
            failed.push(*name);
        }
        hypotheses.push(HypothesisMargin {
            name,
            required_c0: req,
            margin: if c0.is_finite() { margin(p, c0) } else { f64::NAN },
        });
    }
    // Conclusion: alpha + gamma against the decay envelope.
    let total: Vec<f64> = alpha.iter().zip(gamma).map(|(a, g)| a + g).collect();
    let horizon = times[n - 1] - times[0];
    let series: Vec<(f64, f64)> = times.iter().map(|t| t - times[0]).zip(total.iter().cloned()).collect();
    let (rate, envelope): (f64, Box<dyn Fn(f64) -> f64>) = match mode {
        CertificateMode::Finite => {
            let fit = fit_two_sided_decay(&series, horizon, (0.0, horizon))?;
            let boundary = alpha[n - 1] + gamma[0];
            let r = fit.rate;
            (r, Box::new(move |t| ((-r * t).exp() + (-r * (horizon - t)).exp()) * boundary))
        }
        CertificateMode::Discounted { .. } => {
            let fit = fit_exponential_decay(&series, (0.0, horizon))?;
            let boundary = gamma[0];
            let r = fit.rate;
            (r, Box::new(move |t| (-r * t).exp() * boundary))
        }
    };
    let concl: Pairs = series.iter().map(|(t, v)| (*v, envelope(*t))).collect();
    let conclusion_constant = required(&concl);
    let conclusion_margin = if conclusion_constant.is_finite() {
        margin(&concl, conclusion_constant)
    } else {
        f64::NAN
    };
    Ok(CertificateReport {
        holds: failed.is_empty() && c0.is_finite() && rate > 0.0 && conclusion_constant.is_finite(),
        c0,
        lambda,
        hypotheses,
        failed,
        conclusion_rate: rate,
        conclusion_constant,
        conclusion_margin,
    })
}

/// Spectral gap of the periodic discrete Laplacian, `(2 / h^2)(1 - cos 2 pi h)`.
pub fn discrete_heat_gap(grid: Grid) -> f64 {
    let h = grid.h();
    2.0 / (h * h) * (1.0 - (2.0 * std::f64::consts::PI * h).cos())
}
