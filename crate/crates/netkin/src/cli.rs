//! Command-line interface: scenario resolution, command dispatch, and the
//! exit-code contract (0 ok, 1 validation failure, 2 runtime failure).

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::control::{Controller, GlobalMeanLaw, TargetedMeanLaw};
use crate::dynamics::{ModelVariant, MEAN_FLOOR};
use crate::graph::{parse_delimited_matrix, transpose_rows, TransitionMatrix};
use crate::integrate::{integrate, IntegrationConfig, Trajectory};
use crate::mc::{simulate_ensemble, McRun, NoiseModel, ParticleEnsemble};
use crate::output::{mc_csv, trajectory_csv, write_atomic, RunManifest};
use crate::scenario::{
    load_scenario, preset, preset_description, DeltaCfg, DeltaName, KSigmaCfg, RunSetup, Scenario,
    PRESET_NAMES,
};
use crate::spectral::{instantaneous_r0_bounds, r0_bounds_controlled, r0_bounds_uncontrolled};

#[derive(Debug)]
pub enum CliError {
    /// Bad inputs: missing or malformed scenario, matrix, or flags.
    Validation(String),
    /// Failures while running: integration aborts, IO on outputs.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(msg) => write!(f, "error=validation msg={msg:?}"),
            Self::Runtime(msg) => write!(f, "error=runtime msg={msg:?}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

fn validation(e: impl fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "netkin", version, about = "Kinetic load dynamics and feedback control on mobility networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Built-in scenario name (see `preset-list`).
    #[arg(long, global = true)]
    pub preset: Option<String>,

    /// Scenario file path (TOML).
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,

    /// Override the integration step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,

    /// Override the integration horizon.
    #[arg(long = "t-end", global = true)]
    pub t_end: Option<f64>,

    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Override the Monte Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Fixed mobility clamp floor (overrides the matrix-derived delta).
    #[arg(long, global = true)]
    pub delta: Option<f64>,

    /// Take delta as the smallest positive matrix entry instead of the
    /// smallest entry.
    #[arg(long = "delta-positive-min", global = true)]
    pub delta_positive_min: bool,

    /// Infection penalization strategy: lower, upper, or explicit:<k>.
    #[arg(long = "k-sigma-strategy", global = true)]
    pub k_sigma_strategy: Option<String>,

    /// Suppress the stdout summary (files are still written).
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a transition-matrix file.
    Validate {
        /// Plain-text delimited matrix, one row per line.
        #[arg(long)]
        matrix: PathBuf,
        /// The file stores rows summing to one; transpose on load.
        #[arg(long)]
        row_stochastic: bool,
        /// Column-sum tolerance before rejection.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Print the stationary mass distribution of a matrix or scenario.
    Stationary {
        /// Matrix file; defaults to the scenario's matrix.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        row_stochastic: bool,
        /// Total mass to distribute.
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
    },
    /// Integrate the macroscopic system; write trajectory CSV + manifest.
    Simulate,
    /// Run the Monte Carlo particle simulator.
    SimulateMc {
        #[arg(long)]
        agents: Option<usize>,
        /// Uniform noise amplitude on the interaction rules.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        /// Concurrent replica jobs.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Reproduction-number bounds along the trajectory plus the asymptotic
    /// bracket (infection-healing model).
    R0,
    /// Twin runs comparing one global interaction control against its
    /// per-node decomposition (exchange model).
    CompareGlobalLocal {
        /// Penalization for the network-mean objective; defaults to the
        /// minimal coefficient that keeps the initial control admissible.
        #[arg(long)]
        k: Option<f64>,
    },
    /// List built-in presets.
    PresetList,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::PresetList => {
            for name in PRESET_NAMES {
                println!("{name}: {}", preset_description(name));
            }
            Ok(())
        }
        Command::Validate { matrix, row_stochastic, tol } => cmd_validate(matrix, *row_stochastic, *tol),
        Command::Stationary { matrix, row_stochastic, mass } => {
            cmd_stationary(cli, matrix.as_deref(), *row_stochastic, *mass)
        }
        Command::Simulate => cmd_simulate(cli),
        Command::SimulateMc { agents, noise, replicas, workers } => {
            cmd_simulate_mc(cli, *agents, *noise, *replicas, *workers)
        }
        Command::R0 => cmd_r0(cli),
        Command::CompareGlobalLocal { k } => cmd_compare_global_local(cli, *k),
    }
}

fn load_matrix_file(path: &Path, row_stochastic: bool, tol: f64) -> Result<TransitionMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = parse_delimited_matrix(&text).map_err(validation)?;
    if row_stochastic {
        rows = transpose_rows(&rows);
    }
    TransitionMatrix::from_rows(&rows, tol).map_err(validation)
}

fn cmd_validate(path: &Path, row_stochastic: bool, tol: f64) -> Result<(), CliError> {
    let m = load_matrix_file(path, row_stochastic, tol)?;
    println!(
        "ok=true n={} irreducible={} min_entry={} metzler_row_bound={}",
        m.n(),
        m.is_irreducible(),
        m.min_entry(),
        m.satisfies_metzler_condition()
    );
    Ok(())
}

/// Resolves the scenario from `--preset`/`--scenario` and applies the global
/// overrides.
fn resolve_scenario(cli: &Cli) -> Result<(Scenario, Option<PathBuf>), CliError> {
    let mut scenario = match (&cli.preset, &cli.scenario) {
        (Some(name), None) => preset(name).map_err(validation)?,
        (None, Some(path)) => load_scenario(path).map_err(validation)?,
        (Some(_), Some(_)) => {
            return Err(CliError::Validation("give either --preset or --scenario, not both".into()))
        }
        (None, None) => {
            return Err(CliError::Validation("a scenario is required: --preset <name> or --scenario <file>".into()))
        }
    };
    let base_dir = cli.scenario.as_deref().and_then(Path::parent).map(Path::to_path_buf);
    if let Some(dt) = cli.dt {
        scenario.integration.dt = dt;
    }
    if let Some(t_end) = cli.t_end {
        scenario.integration.t_end = t_end;
    }
    if let Some(delta) = cli.delta {
        scenario.control.delta = DeltaCfg::Value(delta);
    } else if cli.delta_positive_min {
        scenario.control.delta = DeltaCfg::Named(DeltaName::MatrixMinPositive);
    }
    if let Some(strategy) = &cli.k_sigma_strategy {
        match strategy.as_str() {
            "lower" => scenario.control.k_sigma = KSigmaCfg::IntervalLower,
            "upper" => scenario.control.k_sigma = KSigmaCfg::IntervalUpper,
            s if s.starts_with("explicit:") => {
                let k: f64 = s["explicit:".len()..]
                    .parse()
                    .map_err(|e| CliError::Validation(format!("bad --k-sigma-strategy value: {e}")))?;
                scenario.control.k_sigma = KSigmaCfg::Explicit;
                scenario.control.k_sigma_value = Some(k);
            }
            other => {
                return Err(CliError::Validation(format!(
                    "bad --k-sigma-strategy {other:?}: use lower, upper, or explicit:<k>"
                )))
            }
        }
    }
    if let Some(seed) = cli.seed {
        scenario.mc.get_or_insert_with(Default::default).seed = seed;
    }
    Ok((scenario, base_dir))
}

fn build_setup(scenario: &Scenario, base_dir: Option<&Path>) -> Result<RunSetup, CliError> {
    scenario.build(base_dir).map_err(validation)
}

fn out_dir(cli: &Cli) -> Result<PathBuf, CliError> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn cmd_stationary(
    cli: &Cli,
    matrix: Option<&Path>,
    row_stochastic: bool,
    mass: f64,
) -> Result<(), CliError> {
    let m = match matrix {
        Some(path) => load_matrix_file(path, row_stochastic, 1e-9)?,
        None => {
            let (scenario, base_dir) = resolve_scenario(cli)?;
            build_setup(&scenario, base_dir.as_deref())?.matrix
        }
    };
    let d = m.stationary_density(mass).map_err(validation)?;
    println!("node,rho_inf");
    for (i, v) in d.values().iter().enumerate() {
        println!("{},{v}", i + 1);
    }
    Ok(())
}

fn run_trajectory(setup: &RunSetup, cfg: &IntegrationConfig) -> Result<(Trajectory, Vec<String>), CliError> {
    let controller = Controller::bind(setup.policy.clone(), &setup.matrix, &setup.params, &setup.y0)
        .map_err(validation)?;
    let mut warnings = setup.warnings.clone();
    warnings.extend(controller.notes().iter().cloned());
    let traj = integrate(&setup.matrix, &setup.params, &controller, &setup.y0, cfg).map_err(runtime)?;
    warnings.extend(traj.warnings.iter().cloned());
    Ok((traj, warnings))
}

fn print_summary(traj: &Trajectory, quiet: bool) {
    if quiet {
        return;
    }
    let last = traj.final_state();
    let controls = traj.final_controls();
    let means = traj.means_at(traj.len() - 1);
    println!("t = {}", last.t);
    println!("node,rho,m,uchi,uint");
    for i in 0..last.n() {
        let m = means[i].map_or(String::new(), |m| format!("{m}"));
        println!("{},{},{},{},{}", i + 1, last.rho[i], m, controls.u_chi[i], controls.u_interaction[i]);
    }
    println!(
        "total_mass = {}, total_mom = {}, max_mass_drift = {:e}",
        last.total_mass(),
        last.total_moment(),
        traj.max_mass_drift()
    );
}

fn cmd_simulate(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let (scenario, base_dir) = resolve_scenario(cli)?;
    let setup = build_setup(&scenario, base_dir.as_deref())?;
    let cfg = scenario.integration.to_config();
    let (traj, warnings) = run_trajectory(&setup, &cfg)?;
    let dir = out_dir(cli)?;
    let csv_path = dir.join(format!("{}_trajectory.csv", scenario.name));
    write_atomic(&csv_path, &trajectory_csv(&traj)).map_err(runtime)?;
    let manifest = RunManifest {
        scenario_name: scenario.name.clone(),
        command: "simulate".into(),
        wall_ms: started.elapsed().as_millis(),
        outputs: vec![csv_path],
        warnings,
        chi_floor_overrides: traj.chi_floor_overrides,
        resolved_scenario: scenario.to_toml_string(),
    };
    manifest.write(&dir).map_err(runtime)?;
    print_summary(&traj, cli.quiet);
    Ok(())
}

fn cmd_simulate_mc(
    cli: &Cli,
    agents: Option<usize>,
    noise: Option<f64>,
    replicas: Option<usize>,
    workers: usize,
) -> Result<(), CliError> {
    let started = Instant::now();
    let (scenario, base_dir) = resolve_scenario(cli)?;
    let setup = build_setup(&scenario, base_dir.as_deref())?;
    let mut mc = scenario.mc.unwrap_or_default();
    if let Some(a) = agents {
        mc.agents = a;
    }
    if let Some(c) = noise {
        mc.noise = c;
    }
    if let Some(r) = replicas {
        mc.replicas = r;
    }
    if mc.agents == 0 || mc.replicas == 0 {
        return Err(CliError::Validation("agents and replicas must be positive".into()));
    }
    let cfg = scenario.integration.to_config();
    let controller = Controller::bind(setup.policy.clone(), &setup.matrix, &setup.params, &setup.y0)
        .map_err(validation)?;
    let noise_model = NoiseModel::from_amplitude(mc.noise);

    let worker_count = workers.max(1).min(mc.replicas);
    let mut results: Vec<Option<Result<McRun, CliError>>> = (0..mc.replicas).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk_start in (0..mc.replicas).step_by(worker_count) {
            handles.clear();
            for replica in chunk_start..(chunk_start + worker_count).min(mc.replicas) {
                let setup = &setup;
                let controller = &controller;
                let cfg = &cfg;
                handles.push((replica, scope.spawn(move || {
                    let seed = mc.seed.wrapping_add(replica as u64);
                    let mut ens = ParticleEnsemble::from_macro(
                        &setup.y0.rho,
                        &setup.y0.mom.iter().zip(&setup.y0.rho).map(|(w, r)| if *r > 0.0 { w / r } else { 0.0 }).collect::<Vec<f64>>(),
                        mc.agents,
                        seed,
                    )
                    .map_err(runtime)?;
                    simulate_ensemble(&setup.matrix, &setup.params, controller, &mut ens, noise_model, cfg)
                        .map_err(runtime)
                })));
            }
            for (replica, handle) in handles.drain(..) {
                results[replica] = Some(handle.join().expect("worker panicked"));
            }
        }
    });

    let dir = out_dir(cli)?;
    let mut outputs = Vec::new();
    for (replica, result) in results.into_iter().enumerate() {
        let run = result.expect("all replicas ran")?;
        let suffix = if mc.replicas > 1 { format!("_r{replica}") } else { String::new() };
        let path = dir.join(format!("{}_mc{suffix}.csv", scenario.name));
        write_atomic(&path, &mc_csv(&run.times, &run.estimates, &run.controls)).map_err(runtime)?;
        if !cli.quiet {
            let last = run.estimates.last().unwrap();
            let total_mom: f64 = last.mom.iter().sum();
            println!(
                "replica {replica}: seed {} -> total_mom(t_end) = {total_mom}",
                mc.seed.wrapping_add(replica as u64)
            );
        }
        outputs.push(path);
    }
    let mut scenario_with_mc = scenario.clone();
    scenario_with_mc.mc = Some(mc);
    let manifest = RunManifest {
        scenario_name: scenario.name.clone(),
        command: "simulate-mc".into(),
        wall_ms: started.elapsed().as_millis(),
        outputs,
        warnings: setup.warnings.clone(),
        chi_floor_overrides: 0,
        resolved_scenario: scenario_with_mc.to_toml_string(),
    };
    manifest.write(&dir).map_err(runtime)?;
    Ok(())
}

fn cmd_r0(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let (scenario, base_dir) = resolve_scenario(cli)?;
    let setup = build_setup(&scenario, base_dir.as_deref())?;
    if setup.params.variant != ModelVariant::InfectionHealing {
        return Err(CliError::Validation(
            "reproduction-number analysis needs an infection-healing scenario".into(),
        ));
    }
    let cfg = scenario.integration.to_config();
    let (traj, warnings) = run_trajectory(&setup, &cfg)?;

    let mut csv = String::from("t,r0_lower,r0_upper\n");
    for idx in 0..traj.len() {
        let sig = &traj.controls[idx];
        let (lo, hi) =
            instantaneous_r0_bounds(&traj.states[idx].rho, &setup.params, &sig.u_chi, &sig.u_interaction)
                .map_err(runtime)?;
        csv.push_str(&format!("{},{lo},{hi}\n", traj.times[idx]));
    }
    // Asymptotic line: stationary masses of the final controlled matrix at
    // the final controls.
    let final_sig = traj.final_controls();
    let p_inf = setup.matrix.controlled(&final_sig.u_chi).map_err(runtime)?;
    let rho_inf = p_inf.stationary_density(setup.y0.total_mass()).map_err(runtime)?;
    let bounds = if final_sig.u_chi.iter().all(|&u| u == 0.0)
        && final_sig.u_interaction.iter().all(|&u| u == 0.0)
    {
        r0_bounds_uncontrolled(&setup.matrix, &rho_inf, &setup.params).map_err(runtime)?
    } else {
        r0_bounds_controlled(&rho_inf, &setup.params, &final_sig.u_chi, &final_sig.u_interaction)
            .map_err(runtime)?
    };
    csv.push_str(&format!("asymptotic,{},{}\n", bounds.lower, bounds.upper));

    let dir = out_dir(cli)?;
    let path = dir.join(format!("{}_r0.csv", scenario.name));
    write_atomic(&path, &csv).map_err(runtime)?;
    if !cli.quiet {
        println!("asymptotic bracket: [{}, {}]", bounds.lower, bounds.upper);
    }
    let manifest = RunManifest {
        scenario_name: scenario.name.clone(),
        command: "r0".into(),
        wall_ms: started.elapsed().as_millis(),
        outputs: vec![path],
        warnings,
        chi_floor_overrides: traj.chi_floor_overrides,
        resolved_scenario: scenario.to_toml_string(),
    };
    manifest.write(&dir).map_err(runtime)?;
    Ok(())
}

fn cmd_compare_global_local(cli: &Cli, k: Option<f64>) -> Result<(), CliError> {
    let started = Instant::now();
    let (scenario, base_dir) = resolve_scenario(cli)?;
    let setup = build_setup(&scenario, base_dir.as_deref())?;
    if setup.params.variant != ModelVariant::Exchange {
        return Err(CliError::Validation("the comparison needs an exchange-model scenario".into()));
    }
    let q = setup.policy.q;
    // Minimal admissible coefficient at t = 0: the initial global control is
    // the positive part of the objective's derivative, normalized to one.
    let k = k.unwrap_or_else(|| {
        let total0: f64 = setup.y0.total_moment();
        let positive: f64 = (0..setup.params.n())
            .map(|i| (setup.params.nu2[i] - setup.params.nu1[i]).max(0.0) * setup.y0.mom[i])
            .sum();
        let candidate = total0.max(0.0).powf(q - 1.0) * setup.params.mu * positive;
        if candidate > 0.0 {
            candidate
        } else {
            1.0
        }
    });
    if !(k > 0.0) {
        return Err(CliError::Validation(format!("penalization k = {k} must be positive")));
    }
    let cfg = scenario.integration.to_config();
    let global_law = GlobalMeanLaw { params: setup.params.clone(), k, q };
    let targeted_law = TargetedMeanLaw { params: setup.params.clone(), k, q };
    let global_traj =
        integrate(&setup.matrix, &setup.params, &global_law, &setup.y0, &cfg).map_err(runtime)?;
    let targeted_traj =
        integrate(&setup.matrix, &setup.params, &targeted_law, &setup.y0, &cfg).map_err(runtime)?;

    let n = setup.params.n();
    let mut csv = String::from("t,u_global");
    for i in 1..=n {
        csv.push_str(&format!(",utilde_{i}"));
    }
    csv.push_str(",total_mom_global,total_mom_targeted,decomposition_residual\n");
    let mut max_residual = 0.0f64;
    for idx in 0..global_traj.len() {
        let t = global_traj.times[idx];
        let u_global = global_traj.controls[idx].u_interaction[0];
        let targeted = &targeted_traj.controls[idx].u_interaction;
        // Identity check on the targeted run's state: the raw global value
        // must equal the sum of its raw per-node parts.
        let gc = crate::control::global_u_mu(&targeted_traj.states[idx], &setup.params, k, q)
            .map_err(runtime)?;
        let residual = (gc.global - gc.per_node.iter().sum::<f64>()).abs();
        max_residual = max_residual.max(residual);
        csv.push_str(&format!("{t},{u_global}"));
        for &u in targeted {
            csv.push_str(&format!(",{u}"));
        }
        csv.push_str(&format!(
            ",{},{},{residual}\n",
            global_traj.diagnostics[idx].total_moment, targeted_traj.diagnostics[idx].total_moment
        ));
    }
    let dir = out_dir(cli)?;
    let path = dir.join(format!("{}_compare.csv", scenario.name));
    write_atomic(&path, &csv).map_err(runtime)?;
    if !cli.quiet {
        println!(
            "k = {k}, max |u - sum(u~)| = {max_residual:e}, final totals: global {}, targeted {}",
            global_traj.diagnostics.last().unwrap().total_moment,
            targeted_traj.diagnostics.last().unwrap().total_moment
        );
    }
    let manifest = RunManifest {
        scenario_name: scenario.name.clone(),
        command: "compare-global-local".into(),
        wall_ms: started.elapsed().as_millis(),
        outputs: vec![path],
        warnings: setup.warnings.clone(),
        chi_floor_overrides: 0,
        resolved_scenario: scenario.to_toml_string(),
    };
    manifest.write(&dir).map_err(runtime)?;
    Ok(())
}

// Means are needed by print_summary through Trajectory::means_at, which
// masks below this; re-exported here so the CLI surface documents it.
pub const CLI_MEAN_FLOOR: f64 = MEAN_FLOOR;
