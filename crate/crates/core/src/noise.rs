//! Binomial common-noise tree.
//!
//! The horizon is split into `K` epochs of length `Delta`. At the end of each
//! epoch (including the horizon itself) the common noise kicks by
//! `+-sqrt(2 sigma Delta)` with probability one half each. A node at depth `e`
//! owns the time indices `e F ..= (e + 1) F`, its first slice being the state
//! just after the kick. Depth-`K` nodes (when `K >= 1`) are zero-length and only
//! hold the state at the horizon.
//!
//! Nodes are stored breadth first: depth `e` occupies ids `2^e - 1 .. 2^{e+1} - 1`.
//! Bit `1` in the path word means an upward kick.

use std::ops::Range;

use serde::Serialize;

use crate::error::{MfgError, Result};

pub const MAX_EPOCHS: usize = 14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseTree {
    sigma: f64,
    horizon: f64,
    epochs: usize,
    fine_steps: usize,
    epoch_len: f64,
    dt: f64,
    increment: f64,
}

impl NoiseTree {
    /// With `sigma = 0` the tree collapses to a single branch; the requested
    /// epochs are folded into one so that `dt` is unchanged.
    pub fn build(sigma: f64, horizon: f64, epochs: usize, fine_steps: usize) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(MfgError::Tree(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(MfgError::Tree(format!("horizon must be positive, got {horizon}")));
        }
        if fine_steps == 0 {
            return Err(MfgError::Tree("fine_steps must be at least 1".into()));
        }
        if epochs > MAX_EPOCHS {
            return Err(MfgError::Tree(format!(
                "{epochs} epochs exceed the cap of {MAX_EPOCHS}"
            )));
        }
        let (epochs, fine_steps) = if sigma == 0.0 {
            (0, fine_steps * epochs.max(1))
        } else {
            (epochs, fine_steps)
        };
        let epoch_len = horizon / epochs.max(1) as f64;
        let increment = if epochs == 0 {
            0.0
        } else {
            (2.0 * sigma * epoch_len).sqrt()
        };
        Ok(NoiseTree {
            sigma,
            horizon,
            epochs,
            fine_steps,
            epoch_len,
            dt: epoch_len / fine_steps as f64,
            increment,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn epochs(&self) -> usize {
        self.epochs
    }
    pub fn fine_steps(&self) -> usize {
        self.fine_steps
    }
    pub fn epoch_len(&self) -> f64 {
        self.epoch_len
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    /// Size of one kick, `sqrt(2 sigma Delta)`.
    pub fn increment(&self) -> f64 {
        self.increment
    }

    pub fn num_nodes(&self) -> usize {
        (1usize << (self.epochs + 1)) - 1
    }

    pub fn nodes_at_depth(&self, depth: usize) -> Range<usize> {
        assert!(depth <= self.epochs);
        (1usize << depth) - 1..(1usize << (depth + 1)) - 1
    }

    pub fn leaves(&self) -> Range<usize> {
        self.nodes_at_depth(self.epochs)
    }

    pub fn depth(&self, node: usize) -> usize {
        (usize::BITS - 1 - (node + 1).leading_zeros()) as usize
    }

    /// Position of the node within its depth, i.e. its path word.
    pub fn path(&self, node: usize) -> usize {
        node + 1 - (1usize << self.depth(node))
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.depth(node) == self.epochs
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        (node > 0).then(|| (node - 1) / 2)
    }

    /// `(up, down)` child ids.
    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        (!self.is_leaf(node)).then(|| (2 * node + 2, 2 * node + 1))
    }

    /// Kick received when entering `node` (zero at the root).
    pub fn kick(&self, node: usize) -> f64 {
        match node {
            0 => 0.0,
            _ if node % 2 == 0 => self.increment,
            _ => -self.increment,
        }
    }

    pub fn node_prob(&self, node: usize) -> f64 {
        0.5_f64.powi(self.depth(node) as i32)
    }

    /// Cumulative shift `sqrt(2 sigma Delta) * sum(+-1)` along the path.
    pub fn node_shift(&self, node: usize) -> f64 {
        let depth = self.depth(node) as i64;
        let ups = self.path(node).count_ones() as i64;
        self.increment * (2 * ups - depth) as f64
    }

    /// Number of fine steps integrated inside the node.
    pub fn node_steps(&self, node: usize) -> usize {
        if self.epochs == 0 || self.depth(node) < self.epochs {
            self.fine_steps
        } else {
            0
        }
    }

    /// Global index of the node's first time slice.
    pub fn node_start(&self, node: usize) -> usize {
        self.depth(node) * self.fine_steps
    }

    pub fn total_steps(&self) -> usize {
        self.fine_steps * self.epochs.max(1)
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    /// Depth of the nodes holding global time index `i`; at kick times the
    /// post-kick node is chosen.
    pub fn active_depth(&self, index: usize) -> usize {
        assert!(index <= self.total_steps());
        if self.epochs == 0 {
            0
        } else {
            (index / self.fine_steps).min(self.epochs)
        }
    }

    /// `(node, local slice)` pairs holding global index `i`, left to right.
    pub fn active_nodes(&self, index: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let depth = self.active_depth(index);
        let local = index - depth * self.fine_steps;
        self.nodes_at_depth(depth).map(move |node| (node, local))
    }

    pub fn child_shifts(&self, node: usize) -> Result<(f64, f64)> {
        if node >= self.num_nodes() {
            return Err(MfgError::Tree(format!("node {node} out of range")));
        }
        if self.is_leaf(node) {
            return Err(MfgError::Tree(format!("node {node} is a leaf")));
        }
        Ok((self.increment, -self.increment))
    }
}

/// Builds trees for arbitrary horizons with a common epoch length and step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeRecipe {
    pub sigma: f64,
    pub epoch_len: f64,
    pub dt: f64,
    pub max_epochs: usize,
}

impl TreeRecipe {
    /// Epoch count is `horizon / epoch_len` rounded, at least one; when it
    /// would exceed `max_epochs` the epochs are stretched instead.
    pub fn tree(&self, horizon: f64) -> Result<NoiseTree> {
        if !(self.epoch_len > 0.0) || !(self.dt > 0.0) {
            return Err(MfgError::Tree(format!(
                "epoch length {} and dt {} must be positive",
                self.epoch_len, self.dt
            )));
        }
        let epochs = ((horizon / self.epoch_len).round() as usize)
            .min(self.max_epochs.min(MAX_EPOCHS))
            .max(1);
        let fine_steps = ((horizon / epochs as f64 / self.dt).round() as usize).max(1);
        NoiseTree::build(self.sigma, horizon, epochs, fine_steps)
    }
}

/// `sum_leaf prob * value`, summed left to right.
pub fn expect_over_leaves(tree: &NoiseTree, leaf_values: &[f64]) -> Result<f64> {
    expect_at_depth(tree, tree.epochs(), leaf_values)
}

pub fn expect_at_depth(tree: &NoiseTree, depth: usize, values: &[f64]) -> Result<f64> {
    let nodes = tree.nodes_at_depth(depth);
    if values.len() != nodes.len() {
        return Err(MfgError::Length {
            expected: nodes.len(),
            got: values.len(),
        });
    }
    let p = 0.5_f64.powi(depth as i32);
    Ok(values.iter().fold(0.0, |acc, v| acc + p * v))
}

pub fn child_shifts(tree: &NoiseTree, node: usize) -> Result<(f64, f64)> {
    tree.child_shifts(node)
}

/// Per-node trajectories: `data[node][k]` is the slice at global index
/// `node_start(node) + k`.
#[derive(Debug, Clone)]
pub struct TreeField<T> {
    tree: NoiseTree,
    data: Vec<Vec<T>>,
}

impl<T> TreeField<T> {
    pub fn from_nodes(tree: NoiseTree, data: Vec<Vec<T>>) -> Result<Self> {
        if data.len() != tree.num_nodes() {
            return Err(MfgError::Length {
                expected: tree.num_nodes(),
                got: data.len(),
            });
        }
        for (node, slices) in data.iter().enumerate() {
            if slices.len() != tree.node_steps(node) + 1 {
                return Err(MfgError::Length {
                    expected: tree.node_steps(node) + 1,
                    got: slices.len(),
                });
            }
        }
        Ok(TreeField { tree, data })
    }

    pub fn tree(&self) -> &NoiseTree {
        &self.tree
    }

    pub fn node(&self, node: usize) -> &[T] {
        &self.data[node]
    }

    pub fn nodes(&self) -> &[Vec<T>] {
        &self.data
    }

    pub fn root_initial(&self) -> &T {
        &self.data[0][0]
    }

    /// `(prob, slice)` for every node active at global index `i`.
    pub fn at_index(&self, index: usize) -> Vec<(f64, &T)> {
        self.tree
            .active_nodes(index)
            .map(|(node, k)| (self.tree.node_prob(node), &self.data[node][k]))
            .collect()
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> TreeField<U> {
        TreeField {
            tree: self.tree.clone(),
            data: self
                .data
                .iter()
                .map(|slices| slices.iter().map(&f).collect())
                .collect(),
        }
    }

    /// Exact expectation of `f` over the nodes active at global index `i`.
    pub fn expect_at(&self, index: usize, f: impl Fn(&T) -> f64) -> f64 {
        self.at_index(index)
            .into_iter()
            .fold(0.0, |acc, (p, v)| acc + p * f(v))
    }
}
