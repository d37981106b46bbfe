//! Declarative experiment definitions: a flat TOML format, ingestion of
//! external matrices and populations, and the named presets.
//!
//! Scenario files are deliberately flat and diff-friendly: a handful of
//! sections (`model`, `matrix`, `initial`, `control`, `integration`, `mc`)
//! with scalar and array values, no includes. Population vectors may be raw
//! census counts; they are normalized to fractions at build time and the
//! factor is reported.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{
    ControlError, ControlPolicy, DeltaFloor, InteractionMode, MobilityMode, SigmaStrategy,
};
use crate::dynamics::{DynamicsError, MacroState, ModelParams};
use crate::graph::{
    parse_delimited_matrix, transpose_rows, GraphError, TransitionMatrix, EXACT_COLUMN_TOL,
    INGEST_COLUMN_TOL,
};
use crate::integrate::IntegrationConfig;

/// Reference five-node network and data shared by the `test1`/`test2`/`fig*`
/// presets.
pub mod five_node {
    use crate::graph::{TransitionMatrix, EXACT_COLUMN_TOL};

    pub const P_ROWS: [[f64; 5]; 5] = [
        [0.2, 0.5, 0.15, 0.1, 0.1],
        [0.2, 0.2, 0.45, 0.4, 0.2],
        [0.2, 0.1, 0.05, 0.2, 0.5],
        [0.2, 0.1, 0.1, 0.15, 0.1],
        [0.2, 0.1, 0.25, 0.15, 0.1],
    ];
    pub const RHO0: [f64; 5] = [0.35, 0.1, 0.3, 0.05, 0.2];
    pub const M0: [f64; 5] = [2.0, 4.0, 0.1, 1.0, 1.5];
    /// Exchange-model loss parameters of the `test1` presets.
    pub const NU1_EXCHANGE: [f64; 5] = [0.25, 0.5, 0.15, 0.2, 0.75];
    /// Exchange-model gain parameters of the `test1` presets.
    pub const NU2_EXCHANGE: [f64; 5] = [0.8, 0.5, 0.75, 0.1, 0.6];
    /// Infection-healing parameters of the `test2` presets.
    pub const NU1_HEALING: f64 = 0.15;
    pub const NU2_HEALING: f64 = 0.9;

    pub fn matrix() -> TransitionMatrix {
        let rows: Vec<Vec<f64>> = P_ROWS.iter().map(|r| r.to_vec()).collect();
        TransitionMatrix::from_rows(&rows, EXACT_COLUMN_TOL).expect("reference matrix is valid")
    }

    pub fn rows() -> Vec<Vec<f64>> {
        P_ROWS.iter().map(|r| r.to_vec()).collect()
    }
}

/// Vendored twelve-province Lombardy mobility network and census fractions.
pub mod lombardy {
    use crate::graph::parse_delimited_matrix;

    pub const MOBILITY_TEXT: &str = include_str!("../data/lombardy_mobility.txt");
    pub const POPULATION_TEXT: &str = include_str!("../data/lombardy_population.txt");
    /// Index of the province seeded with a high initial mean load.
    pub const SEEDED_NODE: usize = 5;

    pub fn matrix_rows() -> Vec<Vec<f64>> {
        parse_delimited_matrix(MOBILITY_TEXT).expect("vendored matrix parses")
    }

    pub fn population_fractions() -> Vec<f64> {
        parse_delimited_matrix(POPULATION_TEXT)
            .expect("vendored population parses")
            .into_iter()
            .map(|row| row[0])
            .collect()
    }

    /// Initial means: background 1/6 everywhere, 6 in the seeded province.
    pub fn initial_means() -> Vec<f64> {
        let mut m = vec![1.0 / 6.0; 12];
        m[SEEDED_NODE] = 6.0;
        m
    }
}

#[derive(Debug)]
pub enum ScenarioError {
    Io { path: PathBuf, source: std::io::Error },
    Parse { msg: String },
    Validation { key: &'static str, msg: String },
    UnknownPreset { name: String },
    Graph(GraphError),
    Dynamics(DynamicsError),
    Control(ControlError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            Self::Parse { msg } => write!(f, "scenario parse error: {msg}"),
            Self::Validation { key, msg } => write!(f, "scenario field `{key}`: {msg}"),
            Self::UnknownPreset { name } => write!(f, "unknown preset {name:?}"),
            Self::Graph(e) => write!(f, "matrix: {e}"),
            Self::Dynamics(e) => write!(f, "model: {e}"),
            Self::Control(e) => write!(f, "control: {e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<GraphError> for ScenarioError {
    fn from(e: GraphError) -> Self {
        Self::Graph(e)
    }
}

impl From<DynamicsError> for ScenarioError {
    fn from(e: DynamicsError) -> Self {
        Self::Dynamics(e)
    }
}

impl From<ControlError> for ScenarioError {
    fn from(e: ControlError) -> Self {
        Self::Control(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantCfg {
    Exchange,
    InfectionHealing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub variant: VariantCfg,
    pub nu1: Vec<f64>,
    pub nu2: Vec<f64>,
    pub chi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl ModelSection {
    pub fn to_params(&self) -> Result<ModelParams, ScenarioError> {
        let p = match self.variant {
            VariantCfg::Exchange => {
                let mu = self.mu.ok_or(ScenarioError::Validation {
                    key: "model.mu",
                    msg: "required for the exchange variant".into(),
                })?;
                ModelParams::exchange(self.nu1.clone(), self.nu2.clone(), self.chi, mu)
            }
            VariantCfg::InfectionHealing => {
                let sigma = self.sigma.ok_or(ScenarioError::Validation {
                    key: "model.sigma",
                    msg: "required for the infection-healing variant".into(),
                })?;
                let gamma = self.gamma.ok_or(ScenarioError::Validation {
                    key: "model.gamma",
                    msg: "required for the infection-healing variant".into(),
                })?;
                ModelParams::infection_healing(self.nu1.clone(), self.nu2.clone(), self.chi, sigma, gamma)
            }
        }?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    #[default]
    ColumnStochastic,
    RowStochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default)]
    pub orientation: Orientation,
}

impl MatrixSource {
    pub fn inline(rows: Vec<Vec<f64>>) -> Self {
        Self { inline: Some(rows), file: None, orientation: Orientation::ColumnStochastic }
    }

    /// Loads and validates the matrix. Inline matrices are held to the exact
    /// column tolerance; file matrices to the looser ingestion tolerance,
    /// since printed decimals carry truncation drift.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<TransitionMatrix, ScenarioError> {
        let (rows, tol) = match (&self.inline, &self.file) {
            (Some(rows), None) => (rows.clone(), EXACT_COLUMN_TOL),
            (None, Some(file)) => {
                let path = match base_dir {
                    Some(dir) if Path::new(file).is_relative() => dir.join(file),
                    _ => PathBuf::from(file),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
                (parse_delimited_matrix(&text)?, INGEST_COLUMN_TOL)
            }
            _ => {
                return Err(ScenarioError::Validation {
                    key: "matrix",
                    msg: "give exactly one of `inline` or `file`".into(),
                })
            }
        };
        let rows = match self.orientation {
            Orientation::ColumnStochastic => rows,
            Orientation::RowStochastic => transpose_rows(&rows),
        };
        Ok(TransitionMatrix::from_rows(&rows, tol)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Mass fractions, or raw population counts to be normalized.
    pub rho: Vec<f64>,
    /// Initial mean load per node.
    pub m: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MobilityCfg {
    #[default]
    Off,
    Feedback,
    FullSuppression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionCfg {
    #[default]
    Off,
    Feedback,
    ExplicitLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaCfg {
    Named(DeltaName),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaName {
    MatrixMin,
    MatrixMinPositive,
}

impl Default for DeltaCfg {
    fn default() -> Self {
        Self::Named(DeltaName::MatrixMin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KSigmaCfg {
    IntervalLower,
    #[default]
    IntervalUpper,
    Explicit,
}

fn default_q() -> f64 {
    2.0
}

fn default_relaxed_scale() -> f64 {
    2.5e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub mobility: MobilityCfg,
    #[serde(default)]
    pub interaction: InteractionCfg,
    /// With `interaction = "feedback"`, suspend the interaction control
    /// after this time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_until: Option<f64>,
    #[serde(default)]
    pub delta: DeltaCfg,
    #[serde(default)]
    pub k_sigma: KSigmaCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_sigma_value: Option<f64>,
    #[serde(default = "default_relaxed_scale")]
    pub relaxed_scale: f64,
    #[serde(default)]
    pub relaxed_constant: bool,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            q: default_q(),
            mobility: MobilityCfg::Off,
            interaction: InteractionCfg::Off,
            interaction_until: None,
            delta: DeltaCfg::default(),
            k_sigma: KSigmaCfg::default(),
            k_sigma_value: None,
            relaxed_scale: default_relaxed_scale(),
            relaxed_constant: false,
        }
    }
}

impl ControlSection {
    pub fn to_policy(&self) -> Result<ControlPolicy, ScenarioError> {
        let mobility_mode = match self.mobility {
            MobilityCfg::Off => MobilityMode::Off,
            MobilityCfg::Feedback => MobilityMode::Feedback,
            MobilityCfg::FullSuppression => MobilityMode::FullSuppression,
        };
        let interaction_mode = match (self.interaction, self.interaction_until) {
            (InteractionCfg::Off, _) => InteractionMode::Off,
            (InteractionCfg::Feedback, None) => InteractionMode::Feedback,
            (InteractionCfg::Feedback, Some(t_bar)) => {
                if !(t_bar >= 0.0) {
                    return Err(ScenarioError::Validation {
                        key: "control.interaction_until",
                        msg: format!("must be >= 0, got {t_bar}"),
                    });
                }
                InteractionMode::FeedbackUntil(t_bar)
            }
            (InteractionCfg::ExplicitLaw, None) => InteractionMode::ExplicitLaw,
            (InteractionCfg::ExplicitLaw, Some(_)) => {
                return Err(ScenarioError::Validation {
                    key: "control.interaction_until",
                    msg: "not meaningful with the explicit law".into(),
                })
            }
        };
        let delta = match self.delta {
            DeltaCfg::Named(DeltaName::MatrixMin) => DeltaFloor::MatrixMin,
            DeltaCfg::Named(DeltaName::MatrixMinPositive) => DeltaFloor::MatrixMinPositive,
            DeltaCfg::Value(v) => DeltaFloor::Fixed(v),
        };
        let sigma_strategy = match (self.k_sigma, self.k_sigma_value) {
            (KSigmaCfg::IntervalLower, _) => SigmaStrategy::IntervalLower,
            (KSigmaCfg::IntervalUpper, _) => SigmaStrategy::IntervalUpper,
            (KSigmaCfg::Explicit, Some(k)) => SigmaStrategy::Explicit(k),
            (KSigmaCfg::Explicit, None) => {
                return Err(ScenarioError::Validation {
                    key: "control.k_sigma_value",
                    msg: "required when k_sigma = \"explicit\"".into(),
                })
            }
        };
        Ok(ControlPolicy {
            q: self.q,
            mobility_mode,
            interaction_mode,
            delta,
            sigma_strategy,
            relaxed_scale: self.relaxed_scale,
            relaxed_constant: self.relaxed_constant,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self { dt: 1e-2, t_end: 100.0, record_every: 10 }
    }
}

impl IntegrationSection {
    pub fn to_config(&self) -> IntegrationConfig {
        IntegrationConfig { dt: self.dt, t_end: self.t_end, record_every: self.record_every }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub agents: usize,
    pub seed: u64,
    /// Uniform noise amplitude on the interaction rules; zero disables noise.
    pub noise: f64,
    pub replicas: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self { agents: 100_000, seed: 0, noise: 0.0, replicas: 1 }
    }
}

/// A fully declarative experiment: model, network, data, policy, numerics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSection,
    pub matrix: MatrixSource,
    pub initial: InitialSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
}

/// Everything needed to run a scenario, with inputs validated and
/// populations normalized.
pub struct RunSetup {
    pub matrix: TransitionMatrix,
    pub params: ModelParams,
    pub y0: MacroState,
    pub policy: ControlPolicy,
    /// Sum of the raw `initial.rho` entries; fractions were obtained by
    /// dividing by it.
    pub normalization: f64,
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse { msg: e.to_string() })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// Validates everything and assembles the runnable pieces.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<RunSetup, ScenarioError> {
        let matrix = self.matrix.resolve(base_dir)?;
        let n = matrix.n();
        let params = self.model.to_params()?;
        if params.n() != n {
            return Err(ScenarioError::Validation {
                key: "model.nu1",
                msg: format!("length {} does not match the {n}-node matrix", params.n()),
            });
        }
        if self.initial.rho.len() != n {
            return Err(ScenarioError::Validation {
                key: "initial.rho",
                msg: format!("length {} does not match the {n}-node matrix", self.initial.rho.len()),
            });
        }
        if self.initial.m.len() != n {
            return Err(ScenarioError::Validation {
                key: "initial.m",
                msg: format!("length {} does not match the {n}-node matrix", self.initial.m.len()),
            });
        }
        if self.initial.rho.iter().any(|&r| r < 0.0 || !r.is_finite()) {
            return Err(ScenarioError::Validation {
                key: "initial.rho",
                msg: "entries must be finite and nonnegative".into(),
            });
        }
        if self.initial.m.iter().any(|&m| m < 0.0 || !m.is_finite()) {
            return Err(ScenarioError::Validation {
                key: "initial.m",
                msg: "entries must be finite and nonnegative".into(),
            });
        }
        let normalization: f64 = self.initial.rho.iter().sum();
        if !(normalization > 0.0) {
            return Err(ScenarioError::Validation {
                key: "initial.rho",
                msg: "total population must be positive".into(),
            });
        }
        let mut warnings = Vec::new();
        if (normalization - 1.0).abs() > 1e-9 {
            warnings.push(format!(
                "initial.rho summed to {normalization}; normalized to fractions by that factor"
            ));
        }
        let rho: Vec<f64> = self.initial.rho.iter().map(|r| r / normalization).collect();
        let y0 = MacroState::from_means(rho, &self.initial.m, 0.0)?;
        let policy = self.control.to_policy()?;
        if let Some(mc) = &self.mc {
            if mc.agents == 0 {
                return Err(ScenarioError::Validation {
                    key: "mc.agents",
                    msg: "must be positive".into(),
                });
            }
            if mc.replicas == 0 {
                return Err(ScenarioError::Validation {
                    key: "mc.replicas",
                    msg: "must be positive".into(),
                });
            }
            if mc.noise < 0.0 {
                return Err(ScenarioError::Validation {
                    key: "mc.noise",
                    msg: "must be nonnegative".into(),
                });
            }
        }
        Ok(RunSetup { matrix, params, y0, policy, normalization, warnings })
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    let scenario = Scenario::parse(&text)?;
    // Surface validation problems at load time, with the file's directory
    // for relative matrix paths.
    scenario.build(path.parent())?;
    Ok(scenario)
}

pub const PRESET_NAMES: [&str; 11] = [
    "test1_uncontrolled",
    "test1_mobility_only",
    "test1_mobility_suppression",
    "test1_early_stop",
    "test1_full",
    "test2_uncontrolled",
    "test2_full_control",
    "lombardy_uncontrolled",
    "lombardy_relaxed",
    "fig1_nu_equal",
    "fig2_rhoic",
];

pub fn preset_description(name: &str) -> &'static str {
    match name {
        "test1_uncontrolled" => "five-node exchange model, no control: exponential spread",
        "test1_mobility_only" => "exchange model with feedback mobility control only",
        "test1_mobility_suppression" => "exchange model under total quarantine (u_chi = 1)",
        "test1_early_stop" => "exchange model, interaction control suspended after t = 30",
        "test1_full" => "exchange model with feedback control on mobility and interactions",
        "test2_uncontrolled" => "five-node infection-healing model, no control",
        "test2_full_control" => "infection-healing model, feedback mobility + eradicating interaction control",
        "lombardy_uncontrolled" => "twelve-province commuter network, no control",
        "lombardy_relaxed" => "twelve-province network under the relaxed (low-cost) infection control",
        "fig1_nu_equal" => "neutral exchange parameters: every mean settles at the conserved total",
        "fig2_rhoic" => "no mobility: means grow or vanish by the sign of rho - rho_c per node",
        _ => "",
    }
}

/// Builds one of the named presets.
pub fn preset(name: &str) -> Result<Scenario, ScenarioError> {
    let five_node_matrix = MatrixSource::inline(five_node::rows());
    let exchange_model = ModelSection {
        variant: VariantCfg::Exchange,
        nu1: five_node::NU1_EXCHANGE.to_vec(),
        nu2: five_node::NU2_EXCHANGE.to_vec(),
        chi: 1.0,
        mu: Some(1.0),
        sigma: None,
        gamma: None,
    };
    let healing_model = ModelSection {
        variant: VariantCfg::InfectionHealing,
        nu1: vec![five_node::NU1_HEALING; 5],
        nu2: vec![five_node::NU2_HEALING; 5],
        chi: 1.0,
        mu: None,
        sigma: Some(1.0),
        gamma: Some(1.0),
    };
    let five_node_initial =
        InitialSection { rho: five_node::RHO0.to_vec(), m: five_node::M0.to_vec() };
    let t1_integration = IntegrationSection { dt: 1e-2, t_end: 100.0, record_every: 10 };
    let t2_integration = IntegrationSection { dt: 1e-2, t_end: 50.0, record_every: 10 };

    let scenario = match name {
        "test1_uncontrolled" => Scenario {
            name: name.into(),
            model: exchange_model,
            matrix: five_node_matrix,
            initial: five_node_initial,
            control: ControlSection::default(),
            integration: t1_integration,
            mc: Some(McSection::default()),
        },
        "test1_mobility_only" => Scenario {
            name: name.into(),
            model: exchange_model,
            matrix: five_node_matrix,
            initial: five_node_initial,
            control: ControlSection { mobility: MobilityCfg::Feedback, ..Default::default() },
            integration: t1_integration,
            mc: None,
        },
        "test1_mobility_suppression" => Scenario {
            name: name.into(),
            model: exchange_model,
            matrix: five_node_matrix,
            initial: five_node_initial,
            control: ControlSection { mobility: MobilityCfg::FullSuppression, ..Default::default() },
            integration: t1_integration,
            mc: None,
        },
        "test1_early_stop" => Scenario {
            name: name.into(),
            model: exchange_model,
            matrix: five_node_matrix,
            initial: five_node_initial,
            control: ControlSection {
                interaction: InteractionCfg::Feedback,
                interaction_until: Some(30.0),
                ..Default::default()
            },
            integration: t1_integration,
            mc: None,
        },
        "test1_full" => Scenario {
            name: name.into(),
            model: exchange_model,
            matrix: five_node_matrix,
            initial: five_node_initial,
            control: ControlSection {
                mobility: MobilityCfg::Feedback,
                interaction: InteractionCfg::Feedback,
                ..Default::default()
            },
            integration: t1_integration,
            mc: None,
        },
        "test2_uncontrolled" => Scenario {
            name: name.into(),
            model: healing_model,
            matrix: five_node_matrix,
            initial: five_node_initial,
            control: ControlSection::default(),
            integration: t2_integration,
            mc: Some(McSection::default()),
        },
        "test2_full_control" => Scenario {
            name: name.into(),
            model: healing_model,
            matrix: five_node_matrix,
            initial: five_node_initial,
            control: ControlSection {
                mobility: MobilityCfg::Feedback,
                interaction: InteractionCfg::Feedback,
                ..Default::default()
            },
            integration: t2_integration,
            mc: None,
        },
        "lombardy_uncontrolled" => Scenario {
            name: name.into(),
            model: lombardy_model(),
            matrix: MatrixSource::inline(lombardy::matrix_rows()),
            initial: InitialSection {
                rho: lombardy::population_fractions(),
                m: lombardy::initial_means(),
            },
            control: ControlSection::default(),
            integration: t2_integration,
            mc: None,
        },
        "lombardy_relaxed" => Scenario {
            name: name.into(),
            model: lombardy_model(),
            matrix: MatrixSource::inline(lombardy::matrix_rows()),
            initial: InitialSection {
                rho: lombardy::population_fractions(),
                m: lombardy::initial_means(),
            },
            control: ControlSection {
                interaction: InteractionCfg::ExplicitLaw,
                ..Default::default()
            },
            integration: t2_integration,
            mc: None,
        },
        "fig1_nu_equal" => Scenario {
            name: name.into(),
            model: ModelSection {
                variant: VariantCfg::Exchange,
                nu1: vec![0.5; 5],
                nu2: vec![0.5; 5],
                chi: 1.0,
                mu: Some(1.0),
                sigma: None,
                gamma: None,
            },
            matrix: five_node_matrix,
            initial: five_node_initial,
            control: ControlSection::default(),
            integration: IntegrationSection { dt: 1e-2, t_end: 200.0, record_every: 10 },
            mc: Some(McSection::default()),
        },
        "fig2_rhoic" => Scenario {
            name: name.into(),
            model: ModelSection {
                variant: VariantCfg::InfectionHealing,
                nu1: vec![five_node::NU1_HEALING; 5],
                nu2: vec![five_node::NU2_HEALING; 5],
                chi: 0.0,
                mu: None,
                sigma: Some(1.0),
                gamma: Some(1.0),
            },
            matrix: five_node_matrix,
            initial: five_node_initial,
            control: ControlSection::default(),
            integration: t2_integration,
            mc: None,
        },
        _ => return Err(ScenarioError::UnknownPreset { name: name.into() }),
    };
    Ok(scenario)
}

fn lombardy_model() -> ModelSection {
    ModelSection {
        variant: VariantCfg::InfectionHealing,
        nu1: vec![five_node::NU1_HEALING; 12],
        nu2: vec![five_node::NU2_HEALING; 12],
        chi: 1.0,
        mu: None,
        sigma: Some(1.0),
        gamma: Some(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds_and_validates() {
        for name in PRESET_NAMES {
            let s = preset(name).unwrap();
            assert_eq!(s.name, name);
            let setup = s.build(None).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(setup.matrix.is_irreducible(), "{name}");
            assert!((setup.y0.total_mass() - 1.0).abs() < 1e-12);
            assert!(!preset_description(name).is_empty());
        }
        assert!(matches!(preset("nope"), Err(ScenarioError::UnknownPreset { .. })));
    }

    #[test]
    fn preset_specifics() {
        let early = preset("test1_early_stop").unwrap();
        assert_eq!(
            early.control.to_policy().unwrap().interaction_mode,
            InteractionMode::FeedbackUntil(30.0)
        );
        let rhoic = preset("fig2_rhoic").unwrap();
        assert_eq!(rhoic.model.chi, 0.0);
        let relaxed = preset("lombardy_relaxed").unwrap();
        let policy = relaxed.control.to_policy().unwrap();
        assert_eq!(policy.interaction_mode, InteractionMode::ExplicitLaw);
        assert_eq!(policy.relaxed_scale, 2.5e-5);
        let neutral = preset("fig1_nu_equal").unwrap();
        assert_eq!(neutral.model.nu1, neutral.model.nu2);
    }

    #[test]
    fn lombardy_columns_sum_to_one_after_ingestion() {
        let setup = preset("lombardy_uncontrolled").unwrap().build(None).unwrap();
        let p = &setup.matrix;
        assert_eq!(p.n(), 12);
        for j in 0..12 {
            let sum: f64 = (0..12).map(|i| p.get(i, j)).sum();
            assert!((sum - 1.0).abs() < 1e-9, "column {j}: {sum}");
        }
        // Seeded province mean.
        assert!((setup.y0.mom[lombardy::SEEDED_NODE] - 0.0229591510831975 * 6.0).abs() < 1e-15);
    }

    #[test]
    fn toml_round_trip_is_field_for_field() {
        for name in PRESET_NAMES {
            let s = preset(name).unwrap();
            let text = s.to_toml_string();
            let reparsed = Scenario::parse(&text).unwrap();
            assert_eq!(s, reparsed, "{name}");
            // And serializing the reparse changes nothing.
            assert_eq!(text, reparsed.to_toml_string(), "{name}");
        }
    }

    #[test]
    fn census_counts_are_normalized_with_a_logged_factor() {
        let mut s = preset("test1_uncontrolled").unwrap();
        s.initial.rho = vec![3500.0, 1000.0, 3000.0, 500.0, 2000.0];
        let setup = s.build(None).unwrap();
        assert_eq!(setup.normalization, 10_000.0);
        assert!((setup.y0.rho[0] - 0.35).abs() < 1e-15);
        assert_eq!(setup.warnings.len(), 1);
    }

    #[test]
    fn parse_errors_carry_position_and_validation_errors_carry_the_key() {
        let err = Scenario::parse("name = \"x\"\n[model\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line"), "{msg}");

        let mut s = preset("test1_uncontrolled").unwrap();
        s.initial.m.pop();
        match s.build(None) {
            Err(ScenarioError::Validation { key, .. }) => assert_eq!(key, "initial.m"),
            other => panic!("unexpected: {:?}", other.err()),
        }

        let mut s = preset("test1_uncontrolled").unwrap();
        s.matrix = MatrixSource::inline(vec![vec![0.5; 5]; 5]);
        assert!(matches!(s.build(None), Err(ScenarioError::Graph(_))));
    }

    #[test]
    fn missing_matrix_row_is_a_shape_error() {
        let mut rows = five_node::rows();
        rows.pop();
        let mut s = preset("test1_uncontrolled").unwrap();
        s.matrix = MatrixSource::inline(rows);
        assert!(s.build(None).is_err());
    }
}
