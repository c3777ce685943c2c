//! Experiment configuration: TOML text with defaults, validated before any solve.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coupling::CouplingSpec;
use crate::discounted::DiscountCaps;
use crate::noise::{NoiseTree, TreeRecipe, MAX_EPOCHS};
use crate::solver::{Damping, SolveParams, DEFAULT_CFL};
use crate::torus::{DensityField, Grid, SignedMeasure, ValueField};

/// Largest tree depth used when a task stretches horizons (at most 1024 leaves).
pub const LADDER_EPOCH_CAP: usize = 10;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

/// Either inline samples or a named shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Samples(Vec<f64>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma: f64,
    /// Epochs on the base horizon; later horizons keep the same epoch length.
    pub epochs: usize,
    /// Overrides `solver.dt` when present.
    pub fine_steps: Option<usize>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            sigma: 0.5,
            epochs: 4,
            fine_steps: None,
        }
    }
}

/// `potential` presets: `zero`, `constant`, `cos`, `sin`, `cos2` (scaled by
/// `amplitude`) or `n` inline samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSide {
    pub potential: Profile,
    pub amplitude: f64,
    pub kernel_eigs: Vec<f64>,
}

impl Default for CouplingSide {
    fn default() -> Self {
        CouplingSide {
            potential: Profile::Named("zero".into()),
            amplitude: 0.2,
            kernel_eigs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub dt: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub damping: Damping,
    pub cfl_factor: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dt: 2e-3,
            tol: 1e-7,
            max_iters: 200,
            damping: Damping::FictitiousPlay,
            cfl_factor: DEFAULT_CFL,
        }
    }
}

/// Densities: `uniform`, `sin` / `cos` (`1 + amplitude * mode`), `bump`
/// (periodic Gaussian of `width` at `center` over a floor of `amplitude`) or
/// inline samples, normalized to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySpec {
    pub shape: Profile,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec {
            shape: Profile::Named("sin".into()),
            amplitude: 0.5,
            center: 0.5,
            width: 0.1,
        }
    }
}

impl DensitySpec {
    pub fn named(shape: &str, amplitude: f64) -> Self {
        DensitySpec {
            shape: Profile::Named(shape.into()),
            amplitude,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HorizonSection {
    pub t: f64,
}

impl Default for HorizonSection {
    fn default() -> Self {
        HorizonSection { t: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErgodicSection {
    pub ladder: Vec<f64>,
    pub stationary_tol: f64,
    /// Second anchor of the stationary search; the first is `initial`.
    pub anchor: DensitySpec,
}

impl Default for ErgodicSection {
    fn default() -> Self {
        ErgodicSection {
            ladder: vec![4.0, 8.0],
            stationary_tol: 1e-3,
            anchor: DensitySpec::named("uniform", 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscountSection {
    pub delta_grid: Vec<f64>,
    pub t_cap: f64,
    pub truncation_tol: f64,
    /// Tree depth cap for the long truncated horizons.
    pub max_epochs: usize,
}

impl Default for DiscountSection {
    fn default() -> Self {
        let caps = DiscountCaps::default();
        DiscountSection {
            delta_grid: vec![0.2, 0.1, 0.05],
            t_cap: caps.t_cap,
            truncation_tol: caps.truncation_tol,
            max_epochs: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearizeSection {
    /// Cell of the centered Dirac column.
    pub cell: usize,
    pub epsilons: Vec<f64>,
    /// Direction of the finite-difference check, centered before use.
    pub direction: DensitySpec,
    /// Random directions for the bound check.
    pub directions: usize,
    pub safety: f64,
}

impl Default for LinearizeSection {
    fn default() -> Self {
        LinearizeSection {
            cell: 0,
            epsilons: vec![0.04, 0.02, 0.01],
            direction: DensitySpec::named("cos", 0.5),
            directions: 10,
            safety: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectorSection {
    pub ladder: Vec<f64>,
    pub x_ref: usize,
    pub stab_tol: f64,
    /// Second measure for the monotonicity pairing; the first is `initial`.
    pub other: DensitySpec,
}

impl Default for CorrectorSection {
    fn default() -> Self {
        CorrectorSection {
            ladder: vec![2.0, 4.0, 8.0],
            x_ref: 0,
            stab_tol: 1e-4,
            other: DensitySpec {
                shape: Profile::Named("bump".into()),
                amplitude: 0.1,
                center: 0.3,
                width: 0.1,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MasterSection {
    /// `T` values compared with `2T`.
    pub horizons: Vec<f64>,
    /// Test measures besides `initial`; the reference `m'` is uniform.
    pub test_set: Vec<DensitySpec>,
    pub probe_times: Vec<f64>,
    pub probe_ladder: Vec<f64>,
    pub t_ref: f64,
    /// Epoch length for this task; every horizon must be a multiple of it.
    pub epoch_len: Option<f64>,
}

impl Default for MasterSection {
    fn default() -> Self {
        MasterSection {
            horizons: vec![3.0, 6.0],
            test_set: vec![CorrectorSection::default().other],
            probe_times: vec![0.0, 1.0],
            probe_ladder: vec![4.0, 8.0],
            t_ref: 4.0,
            epoch_len: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Allows negative kernel eigenvalues (monotonicity-violation experiments).
    pub test_mode: bool,
    pub output: Option<PathBuf>,
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub f: CouplingSide,
    pub g: CouplingSide,
    pub solver: SolverSection,
    pub initial: DensitySpec,
    pub horizon: HorizonSection,
    pub ergodic: ErgodicSection,
    pub discount: DiscountSection,
    pub linearize: LinearizeSection,
    pub corrector: CorrectorSection,
    pub master: MasterSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            test_mode: false,
            output: None,
            grid: GridSection::default(),
            noise: NoiseSection::default(),
            f: CouplingSide::default(),
            g: CouplingSide::default(),
            solver: SolverSection::default(),
            initial: DensitySpec::default(),
            horizon: HorizonSection::default(),
            ergodic: ErgodicSection::default(),
            discount: DiscountSection::default(),
            linearize: LinearizeSection::default(),
            corrector: CorrectorSection::default(),
            master: MasterSection::default(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn increasing(key: &str, v: &[f64], min_len: usize) -> Result<(), ConfigError> {
    if v.len() < min_len {
        return Err(invalid(key, format!("needs at least {min_len} entries")));
    }
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(key, "entries must be positive and increasing"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        Grid::new(self.grid.n).map_err(|e| invalid("grid.n", e.to_string()))?;
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(invalid("noise.sigma", "must be finite and nonnegative"));
        }
        if self.noise.epochs > MAX_EPOCHS {
            return Err(invalid(
                "noise.epochs",
                format!("{} exceeds the tree cap of {MAX_EPOCHS}", self.noise.epochs),
            ));
        }
        if self.noise.fine_steps == Some(0) {
            return Err(invalid("noise.fine_steps", "must be at least 1"));
        }
        positive("solver.dt", self.solver.dt)?;
        positive("solver.tol", self.solver.tol)?;
        self.solve_params()
            .validate()
            .map_err(|e| invalid("solver", e.to_string()))?;
        positive("horizon.t", self.horizon.t)?;
        for (key, side) in [("f", &self.f), ("g", &self.g)] {
            if !self.test_mode {
                if let Some(v) = side.kernel_eigs.iter().find(|v| **v < 0.0) {
                    return Err(invalid(
                        &format!("{key}.kernel_eigs"),
                        format!("eigenvalue {v} is negative; the coupling would not be monotone (set test_mode to allow)"),
                    ));
                }
            }
        }
        self.coupling()?;
        self.initial_density()?;
        density(self.grid(), &self.ergodic.anchor, "ergodic.anchor")?;
        increasing("ergodic.ladder", &self.ergodic.ladder, 1)?;
        positive("ergodic.stationary_tol", self.ergodic.stationary_tol)?;
        if self.discount.delta_grid.is_empty()
            || self.discount.delta_grid.iter().any(|d| !(*d > 0.0 && *d <= 1.0))
        {
            return Err(invalid("discount.delta_grid", "rates must lie in (0, 1]"));
        }
        positive("discount.t_cap", self.discount.t_cap)?;
        positive("discount.truncation_tol", self.discount.truncation_tol)?;
        if self.discount.max_epochs == 0 || self.discount.max_epochs > LADDER_EPOCH_CAP {
            return Err(invalid("discount.max_epochs", format!("must lie in 1..={LADDER_EPOCH_CAP}")));
        }
        if self.linearize.cell >= self.grid.n {
            return Err(invalid("linearize.cell", "outside the grid"));
        }
        if self.linearize.epsilons.is_empty() || self.linearize.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("linearize.epsilons", "must be a nonempty list of positive values"));
        }
        if self.linearize.directions == 0 {
            return Err(invalid("linearize.directions", "must be at least 1"));
        }
        positive("linearize.safety", self.linearize.safety)?;
        self.linearize_direction()?;
        increasing("corrector.ladder", &self.corrector.ladder, 1)?;
        if self.corrector.x_ref >= self.grid.n {
            return Err(invalid("corrector.x_ref", "outside the grid"));
        }
        positive("corrector.stab_tol", self.corrector.stab_tol)?;
        density(self.grid(), &self.corrector.other, "corrector.other")?;
        increasing("master.horizons", &self.master.horizons, 1)?;
        increasing("master.probe_ladder", &self.master.probe_ladder, 2)?;
        positive("master.t_ref", self.master.t_ref)?;
        if let Some(e) = self.master.epoch_len {
            positive("master.epoch_len", e)?;
        }
        if self.master.probe_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("master.probe_times", "times must be nonnegative"));
        }
        for (i, d) in self.master.test_set.iter().enumerate() {
            density(self.grid(), d, &format!("master.test_set[{i}]"))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.grid.n).expect("validated grid")
    }

    pub fn solve_params(&self) -> SolveParams {
        SolveParams {
            max_iters: self.solver.max_iters,
            tol: self.solver.tol,
            damping: self.solver.damping,
            cfl_factor: self.solver.cfl_factor,
        }
    }

    /// Epochs actually used: none without common noise.
    fn epochs(&self) -> usize {
        if self.noise.sigma == 0.0 {
            0
        } else {
            self.noise.epochs
        }
    }

    pub fn dt(&self) -> f64 {
        match self.noise.fine_steps {
            Some(f) => self.horizon.t / self.epochs().max(1) as f64 / f as f64,
            None => self.solver.dt,
        }
    }

    /// The tree on the base horizon.
    pub fn tree(&self) -> Result<NoiseTree, ConfigError> {
        let epochs = self.epochs();
        let fine = match self.noise.fine_steps {
            Some(f) => f,
            None => ((self.horizon.t / epochs.max(1) as f64 / self.solver.dt).round() as usize).max(1),
        };
        NoiseTree::build(self.noise.sigma, self.horizon.t, epochs, fine)
            .map_err(|e| invalid("noise", e.to_string()))
    }

    /// Trees for other horizons with the base epoch length.
    pub fn recipe(&self) -> TreeRecipe {
        let epochs = self.epochs();
        TreeRecipe {
            sigma: self.noise.sigma,
            epoch_len: if epochs == 0 {
                f64::MAX
            } else {
                self.horizon.t / epochs as f64
            },
            dt: self.dt(),
            max_epochs: LADDER_EPOCH_CAP,
        }
    }

    pub fn master_recipe(&self) -> TreeRecipe {
        match self.master.epoch_len {
            Some(e) if self.epochs() > 0 => TreeRecipe {
                epoch_len: e,
                ..self.recipe()
            },
            _ => self.recipe(),
        }
    }

    pub fn discount_recipe(&self) -> TreeRecipe {
        TreeRecipe {
            max_epochs: self.discount.max_epochs,
            ..self.recipe()
        }
    }

    pub fn discount_caps(&self) -> DiscountCaps {
        DiscountCaps {
            t_cap: self.discount.t_cap,
            truncation_tol: self.discount.truncation_tol,
        }
    }

    pub fn coupling(&self) -> Result<CouplingSpec, ConfigError> {
        let g = self.grid();
        let a = potential(g, &self.f, "f.potential")?;
        let b = potential(g, &self.g, "g.potential")?;
        let lam = self.f.kernel_eigs.clone();
        let mu = self.g.kernel_eigs.clone();
        let built = if self.test_mode {
            CouplingSpec::new_allow_non_monotone(a, lam, b, mu)
        } else {
            CouplingSpec::new(a, lam, b, mu)
        };
        built.map_err(|e| invalid("f.kernel_eigs", e.to_string()))
    }

    pub fn initial_density(&self) -> Result<DensityField, ConfigError> {
        density(self.grid(), &self.initial, "initial")
    }

    pub fn anchor_density(&self) -> Result<DensityField, ConfigError> {
        density(self.grid(), &self.ergodic.anchor, "ergodic.anchor")
    }

    /// The finite-difference direction, centered.
    pub fn linearize_direction(&self) -> Result<SignedMeasure, ConfigError> {
        let g = self.grid();
        let raw = profile_values(g, &self.linearize.direction, "linearize.direction")?;
        SignedMeasure::centered_from(g, raw).map_err(|e| invalid("linearize.direction", e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form with the output path removed, so
    /// relocating a run keeps its hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn potential(g: Grid, side: &CouplingSide, key: &str) -> Result<ValueField, ConfigError> {
    let amp = side.amplitude;
    match &side.potential {
        Profile::Samples(v) => {
            ValueField::new(g, v.clone()).map_err(|e| invalid(key, e.to_string()))
        }
        Profile::Named(name) => Ok(match name.as_str() {
            "zero" => ValueField::zeros(g),
            "constant" => ValueField::constant(g, amp),
            "cos" => ValueField::from_fn(g, |x| amp * (2.0 * PI * x).cos()),
            "sin" => ValueField::from_fn(g, |x| amp * (2.0 * PI * x).sin()),
            "cos2" => ValueField::from_fn(g, |x| amp * (4.0 * PI * x).cos()),
            other => return Err(invalid(key, format!("unknown preset `{other}`"))),
        }),
    }
}

fn circle_dist(x: f64, c: f64) -> f64 {
    let d = (x - c).rem_euclid(1.0);
    d.min(1.0 - d)
}

fn profile_values(g: Grid, d: &DensitySpec, key: &str) -> Result<Vec<f64>, ConfigError> {
    let amp = d.amplitude;
    let nodes = g.nodes();
    match &d.shape {
        Profile::Samples(v) => {
            if v.len() != g.n() {
                return Err(invalid(key, format!("expected {} samples, got {}", g.n(), v.len())));
            }
            Ok(v.clone())
        }
        Profile::Named(name) => Ok(match name.as_str() {
            "uniform" => vec![1.0; g.n()],
            "sin" => nodes.iter().map(|x| 1.0 + amp * (2.0 * PI * x).sin()).collect(),
            "cos" => nodes.iter().map(|x| 1.0 + amp * (2.0 * PI * x).cos()).collect(),
            "bump" => {
                if !(d.width > 0.0) {
                    return Err(invalid(key, "bump width must be positive"));
                }
                nodes
                    .iter()
                    .map(|x| amp + (-(circle_dist(*x, d.center) / d.width).powi(2) / 2.0).exp())
                    .collect()
            }
            other => return Err(invalid(key, format!("unknown shape `{other}`"))),
        }),
    }
}

pub fn density(g: Grid, d: &DensitySpec, key: &str) -> Result<DensityField, ConfigError> {
    let raw = profile_values(g, d, key)?;
    DensityField::normalized(g, raw).map_err(|e| invalid(key, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("[grid]\nn = 32\n").unwrap();
        assert_eq!(c.noise.sigma, 0.5);
        assert_eq!(c.noise.epochs, 4);
        assert_eq!(c.solver.dt, 2e-3);
        assert_eq!(c.solver.tol, 1e-7);
        assert_eq!(c.solver.damping, Damping::FictitiousPlay);
    }

    #[test]
    fn rejects_deep_tree() {
        let e = parse_config("[noise]\nepochs = 20\n").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { ref key, .. } if key == "noise.epochs"), "{e}");
    }

    #[test]
    fn rejects_negative_eigenvalue_unless_test_mode() {
        let text = "[f]\nkernel_eigs = [0.0, -1.0]\n";
        let e = parse_config(text).unwrap_err();
        assert!(e.to_string().contains("monotone"), "{e}");
        let ok = parse_config(&format!("test_mode = true\n{text}")).unwrap();
        assert_eq!(ok.f.kernel_eigs, vec![0.0, -1.0]);
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = parse_config("seed = 1\n\n[grid]\nn = 32\nsize = 4\n").unwrap_err();
        match e {
            ConfigError::Parse { line, .. } => assert_eq!(line, 5),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn damping_variants_parse() {
        let c = parse_config("[solver]\ndamping = \"picard\"\n").unwrap();
        assert_eq!(c.solver.damping, Damping::Picard);
        let c = parse_config("[solver]\ndamping = { fixed = 0.5 }\n").unwrap();
        assert_eq!(c.solver.damping, Damping::Fixed(0.5));
    }

    #[test]
    fn hash_ignores_output_but_not_seed() {
        let a = parse_config("seed = 1\n").unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn inline_samples_checked_for_length() {
        let e = parse_config("[grid]\nn = 8\n[initial]\nshape = [1.0, 2.0]\n").unwrap_err();
        assert!(e.to_string().contains("expected 8 samples"), "{e}");
    }

    #[test]
    fn fine_steps_override_dt() {
        let c = parse_config("[noise]\nepochs = 2\nfine_steps = 50\n[horizon]\nt = 2.0\n").unwrap();
        assert!((c.dt() - 0.02).abs() < 1e-15);
        assert_eq!(c.tree().unwrap().total_steps(), 100);
    }
}
