//! Simulation and control of kinetic load dynamics on strongly connected
//! mobility networks.
//!
//! Agents sit on the nodes of a graph, migrate through a column-stochastic
//! transition matrix, and exchange a nonnegative scalar load in pairwise
//! interactions. The crate integrates the macroscopic (mass, first moment)
//! equations of two interaction models (symmetric exchange, and infection
//! with autonomous healing), applies per-node feedback controls on mobility
//! and on interactions, cross-checks everything against a particle Monte
//! Carlo, and reports stability diagnostics such as reproduction-number
//! brackets.
//!
//! Modules follow the pipeline: [`graph`] (transition matrices and
//! stationary masses), [`dynamics`] (macroscopic right-hand sides),
//! [`control`] (feedback laws and policies), [`integrate`] (RK4 driver and
//! trajectory diagnostics), [`spectral`] (critical densities and
//! reproduction numbers), [`mc`] (the particle oracle), [`scenario`]
//! (declarative experiments and presets), [`output`] (CSV and manifests),
//! and [`cli`].

pub mod cli;
pub mod control;
pub mod dynamics;
pub mod graph;
pub mod integrate;
pub mod mc;
pub mod output;
pub mod scenario;
pub mod spectral;

pub use control::{ControlLaw, ControlPolicy, ControlSignal, Controller};
pub use dynamics::{MacroState, ModelParams, ModelVariant};
pub use graph::{StationaryDensity, TransitionMatrix};
pub use integrate::{integrate, IntegrationConfig, TailVerdict, Trajectory};
pub use mc::ParticleEnsemble;
pub use scenario::{load_scenario, preset, Scenario};
