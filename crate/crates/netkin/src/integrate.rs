//! Fixed-step classical Runge-Kutta integration of the coupled
//! (mass, first moment) system with state-feedback controls.
//!
//! Controls are recomputed at every internal stage and the controlled
//! transition matrix is rebuilt from them, so the feedback is a function of
//! the instantaneous stage state, not held over steps.

use std::fmt;

use crate::control::{ControlLaw, ControlSignal};
use crate::dynamics::{
    rhs_mass, rhs_moment_exchange, rhs_moment_infection_healing, DynamicsError, MacroState,
    ModelParams, ModelVariant, MEAN_FLOOR,
};
use crate::graph::{GraphError, TransitionMatrix};

/// Mass drift beyond this aborts the run as a step-size problem.
pub const MASS_DRIFT_LIMIT: f64 = 1e-9;
/// Components more negative than this abort; anything in (-limit, 0) is
/// clipped to zero as roundoff.
pub const NEGATIVE_CLIP_LIMIT: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrateError {
    BadConfig { msg: String },
    NegativeStateBlowup { t: f64, node: usize, value: f64 },
    NonFiniteState { t: f64 },
    StepSizeTooLarge { t: f64, drift: f64 },
    TrajectoryTooShort { needed: f64, got: f64 },
    Graph(GraphError),
    Dynamics(DynamicsError),
}

impl fmt::Display for IntegrateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadConfig { msg } => write!(f, "bad integration config: {msg}"),
            Self::NegativeStateBlowup { t, node, value } => {
                write!(f, "state component {value} at node {node}, t = {t} is negative beyond roundoff")
            }
            Self::NonFiniteState { t } => write!(f, "non-finite state at t = {t}"),
            Self::StepSizeTooLarge { t, drift } => {
                write!(f, "total mass drifted by {drift} at t = {t}; reduce dt")
            }
            Self::TrajectoryTooShort { needed, got } => {
                write!(f, "trajectory spans {got}, classification needs at least {needed}")
            }
            Self::Graph(e) => write!(f, "{e}"),
            Self::Dynamics(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for IntegrateError {}

impl From<GraphError> for IntegrateError {
    fn from(e: GraphError) -> Self {
        Self::Graph(e)
    }
}

impl From<DynamicsError> for IntegrateError {
    fn from(e: DynamicsError) -> Self {
        Self::Dynamics(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_end: f64,
    /// A sample is recorded every this many steps (plus the final step).
    pub record_every: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self { dt: 1e-2, t_end: 100.0, record_every: 10 }
    }
}

/// Per-sample scalar diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDiagnostics {
    pub total_mass: f64,
    pub total_moment: f64,
    pub min_component: f64,
}

/// Recorded samples of one integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MacroState>,
    pub controls: Vec<ControlSignal>,
    pub diagnostics: Vec<SampleDiagnostics>,
    /// Preflight and bind-time notes surfaced by the run.
    pub warnings: Vec<String>,
    /// Evaluations where the mobility floor overrode a negative raw law.
    pub chi_floor_overrides: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &MacroState {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    pub fn final_controls(&self) -> &ControlSignal {
        self.controls.last().expect("trajectory has at least the initial sample")
    }

    /// Mean loads at one sample, masked where the node is empty.
    pub fn means_at(&self, idx: usize) -> Vec<Option<f64>> {
        crate::dynamics::derived_means(&self.states[idx], MEAN_FLOOR)
    }

    /// Series of one node's mean load, zero where masked.
    pub fn mean_series(&self, node: usize) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| if s.rho[node] >= MEAN_FLOOR { s.mom[node] / s.rho[node] } else { 0.0 })
            .collect()
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.diagnostics.first().map_or(0.0, |d| d.total_mass);
        self.diagnostics.iter().map(|d| (d.total_mass - m0).abs()).fold(0.0, f64::max)
    }
}

fn moment_rhs(
    state: &MacroState,
    p_eff: &TransitionMatrix,
    params: &ModelParams,
    u_interaction: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    match params.variant {
        ModelVariant::Exchange => rhs_moment_exchange(state, p_eff, params, u_interaction),
        ModelVariant::InfectionHealing => {
            rhs_moment_infection_healing(state, p_eff, params, u_interaction)
        }
    }
}

/// Advances the coupled system with classical RK4 from `y0` to `t_end`.
///
/// Components that dip into `(NEGATIVE_CLIP_LIMIT, 0)` after a step are
/// clipped to zero; more negative values, non-finite values, and total-mass
/// drift beyond [`MASS_DRIFT_LIMIT`] abort the run.
pub fn integrate<C: ControlLaw>(
    p: &TransitionMatrix,
    params: &ModelParams,
    law: &C,
    y0: &MacroState,
    cfg: &IntegrationConfig,
) -> Result<Trajectory, IntegrateError> {
    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
        return Err(IntegrateError::BadConfig { msg: format!("dt = {}", cfg.dt) });
    }
    if !(cfg.t_end > 0.0) || !cfg.t_end.is_finite() {
        return Err(IntegrateError::BadConfig { msg: format!("t_end = {}", cfg.t_end) });
    }
    if cfg.record_every == 0 {
        return Err(IntegrateError::BadConfig { msg: "record_every = 0".into() });
    }

    let n = y0.n();
    let n_steps = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let mut warnings = Vec::new();
    let interaction_rate = match params.variant {
        ModelVariant::Exchange => params.mu,
        ModelVariant::InfectionHealing => params.sigma.max(params.gamma),
    };
    if interaction_rate * cfg.dt > 0.1 {
        warnings.push(format!(
            "dt = {} is large against the interaction frequency {}; keep dt <= {:.3e} for a resolved fast scale",
            cfg.dt,
            interaction_rate,
            0.1 / interaction_rate
        ));
    }

    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps / cfg.record_every + 2),
        states: Vec::with_capacity(n_steps / cfg.record_every + 2),
        controls: Vec::with_capacity(n_steps / cfg.record_every + 2),
        diagnostics: Vec::with_capacity(n_steps / cfg.record_every + 2),
        warnings,
        chi_floor_overrides: 0,
    };

    let mass0 = y0.total_mass();
    let mut state = y0.clone();
    let mobility_inert = law.mobility_inert();

    let eval_rhs = |s: &MacroState,
                        overrides: &mut usize|
     -> Result<(Vec<f64>, Vec<f64>, ControlSignal), IntegrateError> {
        let (sig, stats) = law.eval(s, p);
        *overrides += stats.chi_floor_overrides;
        let controlled;
        let p_eff = if mobility_inert || sig.u_chi.iter().all(|&u| u == 0.0) {
            p
        } else {
            controlled = p.controlled(&sig.u_chi)?;
            &controlled
        };
        let drho = rhs_mass(s, p_eff, params.chi)?;
        let dmom = moment_rhs(s, p_eff, params, &sig.u_interaction)?;
        Ok((drho, dmom, sig))
    };

    let record =
        |traj: &mut Trajectory, s: &MacroState, sig: ControlSignal| {
            let min_component = s
                .rho
                .iter()
                .chain(&s.mom)
                .copied()
                .fold(f64::INFINITY, f64::min);
            traj.times.push(s.t);
            traj.states.push(s.clone());
            traj.controls.push(sig);
            traj.diagnostics.push(SampleDiagnostics {
                total_mass: s.total_mass(),
                total_moment: s.total_moment(),
                min_component,
            });
        };

    let mut overrides = 0usize;
    let (_, _, sig0) = eval_rhs(&state, &mut overrides)?;
    record(&mut traj, &state, sig0);

    let half = 0.5 * cfg.dt;
    for step in 1..=n_steps {
        let t = state.t;
        let (k1r, k1m, _) = eval_rhs(&state, &mut overrides)?;
        let s2 = advanced(&state, &k1r, &k1m, half, t + half);
        let (k2r, k2m, _) = eval_rhs(&s2, &mut overrides)?;
        let s3 = advanced(&state, &k2r, &k2m, half, t + half);
        let (k3r, k3m, _) = eval_rhs(&s3, &mut overrides)?;
        let s4 = advanced(&state, &k3r, &k3m, cfg.dt, t + cfg.dt);
        let (k4r, k4m, _) = eval_rhs(&s4, &mut overrides)?;

        let w = cfg.dt / 6.0;
        for i in 0..n {
            state.rho[i] += w * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
            state.mom[i] += w * (k1m[i] + 2.0 * k2m[i] + 2.0 * k3m[i] + k4m[i]);
        }
        state.t = step as f64 * cfg.dt;

        for i in 0..n {
            for v in [&mut state.rho[i], &mut state.mom[i]] {
                if !v.is_finite() {
                    return Err(IntegrateError::NonFiniteState { t: state.t });
                }
                if *v < 0.0 {
                    if *v < NEGATIVE_CLIP_LIMIT {
                        return Err(IntegrateError::NegativeStateBlowup {
                            t: state.t,
                            node: i,
                            value: *v,
                        });
                    }
                    *v = 0.0;
                }
            }
        }
        let drift = (state.total_mass() - mass0).abs();
        if drift > MASS_DRIFT_LIMIT {
            return Err(IntegrateError::StepSizeTooLarge { t: state.t, drift });
        }

        if step % cfg.record_every == 0 || step == n_steps {
            let (_, _, sig) = eval_rhs(&state, &mut overrides)?;
            record(&mut traj, &state, sig);
        }
    }
    traj.chi_floor_overrides = overrides;
    Ok(traj)
}

fn advanced(base: &MacroState, drho: &[f64], dmom: &[f64], h: f64, t: f64) -> MacroState {
    let rho = base.rho.iter().zip(drho).map(|(y, d)| y + h * d).collect();
    let mom = base.mom.iter().zip(dmom).map(|(y, d)| y + h * d).collect();
    MacroState { rho, mom, t }
}

/// Qualitative behavior of one node's mean-load tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailVerdict {
    ConvergedToZero,
    ConvergedToValue,
    Growing,
    Oscillating,
}

impl fmt::Display for TailVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConvergedToZero => write!(f, "converged-to-zero"),
            Self::ConvergedToValue => write!(f, "converged-to-value"),
            Self::Growing => write!(f, "growing"),
            Self::Oscillating => write!(f, "oscillating"),
        }
    }
}

/// Relative tail variation below which a level tail counts as converged.
const FLAT_RELVAR: f64 = 0.05;
/// Fraction of same-sign increments required to call a trend monotone.
const MONOTONE_FRACTION: f64 = 0.9;

/// Classifies each node's mean-load tail over the final `window` time units.
///
/// `tol` plays two roles: tails whose level stays below it are
/// converged-to-zero outright, and it thresholds the normalized tail slope
/// (per unit time) that separates trends from plateaus. A sustained downward
/// trend also counts as converged-to-zero; these dynamics decay
/// exponentially once they decay at all.
pub fn convergence_report(
    traj: &Trajectory,
    window: f64,
    tol: f64,
) -> Result<Vec<TailVerdict>, IntegrateError> {
    let span = traj.times.last().copied().unwrap_or(0.0) - traj.times.first().copied().unwrap_or(0.0);
    if span < 2.0 * window {
        return Err(IntegrateError::TrajectoryTooShort { needed: 2.0 * window, got: span });
    }
    let t_end = *traj.times.last().unwrap();
    let start = traj.times.iter().position(|&t| t >= t_end - window).unwrap_or(0);
    let n = traj.states[0].n();
    let times = &traj.times[start..];

    let mut verdicts = Vec::with_capacity(n);
    for node in 0..n {
        let series: Vec<f64> = traj.mean_series(node)[start..].to_vec();
        verdicts.push(classify_tail(times, &series, tol));
    }
    Ok(verdicts)
}

fn classify_tail(times: &[f64], series: &[f64], tol: f64) -> TailVerdict {
    let level = series.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if level <= tol {
        return TailVerdict::ConvergedToZero;
    }
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let relvar = (hi - lo) / level;

    // Least-squares slope, normalized by the level: an exponential tail
    // e^{lambda t} reports roughly lambda.
    let n = series.len() as f64;
    let t_mean = times.iter().sum::<f64>() / n;
    let x_mean = series.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, &x) in times.iter().zip(series) {
        num += (t - t_mean) * (x - x_mean);
        den += (t - t_mean) * (t - t_mean);
    }
    let rate = if den > 0.0 { num / den / level } else { 0.0 };

    let mut ups = 0usize;
    let mut downs = 0usize;
    for pair in series.windows(2) {
        if pair[1] > pair[0] {
            ups += 1;
        } else if pair[1] < pair[0] {
            downs += 1;
        }
    }
    let increments = (ups + downs).max(1) as f64;

    if rate > tol && ups as f64 / increments >= MONOTONE_FRACTION {
        TailVerdict::Growing
    } else if rate < -tol && downs as f64 / increments >= MONOTONE_FRACTION {
        TailVerdict::ConvergedToZero
    } else if relvar <= FLAT_RELVAR {
        TailVerdict::ConvergedToValue
    } else {
        TailVerdict::Oscillating
    }
}

/// Checks the integrated migration-flux envelope along a recorded trajectory:
/// for every sampled `t > t1`,
/// `-w_i(t1) < chi * int_{t1}^t [(P^u w)_i - w_i] ds
///           < w_i(t1) (1/r(t) + alpha_i - 1)`,
/// with `w = rho m` and the controlled matrix rebuilt from the recorded
/// mobility controls. Returns, per node, whether both inequalities held at
/// every sample.
pub fn moment_flux_envelope_check(
    traj: &Trajectory,
    p: &TransitionMatrix,
    chi: f64,
    alpha: &[f64],
    r: impl Fn(f64) -> f64,
    t1: f64,
) -> Result<Vec<bool>, IntegrateError> {
    let n = traj.states.first().map_or(0, MacroState::n);
    if alpha.len() != n {
        return Err(IntegrateError::BadConfig {
            msg: format!("alpha has length {}, state has {n} nodes", alpha.len()),
        });
    }
    let start = match traj.times.iter().position(|&t| t >= t1) {
        Some(i) => i,
        None => {
            return Err(IntegrateError::TrajectoryTooShort {
                needed: t1,
                got: traj.times.last().copied().unwrap_or(0.0),
            })
        }
    };
    let w_ref: Vec<f64> = traj.states[start].mom.clone();
    let mut ok = vec![true; n];
    let mut acc = vec![0.0; n];
    let mut prev_flux: Option<Vec<f64>> = None;
    let mut prev_t = traj.times[start];
    for idx in start..traj.len() {
        let s = &traj.states[idx];
        let p_eff = p.controlled(&traj.controls[idx].u_chi)?;
        let mut flux = vec![0.0; n];
        p_eff.apply_into(&s.mom, &mut flux);
        for i in 0..n {
            flux[i] -= s.mom[i];
        }
        if let Some(prev) = prev_flux {
            let h = traj.times[idx] - prev_t;
            for i in 0..n {
                acc[i] += 0.5 * h * (prev[i] + flux[i]);
            }
            let bound = r(traj.times[idx]);
            for i in 0..n {
                let integral = chi * acc[i];
                if integral <= -w_ref[i] || integral >= w_ref[i] * (1.0 / bound + alpha[i] - 1.0) {
                    ok[i] = false;
                }
            }
        }
        prev_t = traj.times[idx];
        prev_flux = Some(flux);
    }
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Uncontrolled;
    use crate::dynamics::ModelParams;
    use crate::scenario::five_node;

    fn setup() -> (TransitionMatrix, ModelParams, MacroState) {
        let p = five_node::matrix();
        let params = ModelParams::exchange(
            five_node::NU1_EXCHANGE.to_vec(),
            five_node::NU2_EXCHANGE.to_vec(),
            1.0,
            1.0,
        )
        .unwrap();
        let y0 = MacroState::from_means(five_node::RHO0.to_vec(), &five_node::M0, 0.0).unwrap();
        (p, params, y0)
    }

    #[test]
    fn uncontrolled_masses_converge_to_stationary_density() {
        let (p, params, y0) = setup();
        let cfg = IntegrationConfig { dt: 1e-2, t_end: 200.0, record_every: 100 };
        let traj = integrate(&p, &params, &Uncontrolled, &y0, &cfg).unwrap();
        let stat = p.stationary_density(1.0).unwrap();
        let last = traj.final_state();
        for (got, want) in last.rho.iter().zip(stat.values()) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        assert!(traj.max_mass_drift() < 1e-9);
    }

    #[test]
    fn neutral_exchange_means_share_the_conserved_total() {
        // nu1 = nu2 = 1/2: every mean converges to the initial network total.
        let (p, _, y0) = setup();
        let params = ModelParams::exchange(vec![0.5; 5], vec![0.5; 5], 1.0, 1.0).unwrap();
        let cfg = IntegrationConfig { dt: 1e-2, t_end: 200.0, record_every: 100 };
        let traj = integrate(&p, &params, &Uncontrolled, &y0, &cfg).unwrap();
        let total0: f64 = y0.total_moment();
        assert!((total0 - 1.48).abs() < 1e-12);
        for m in traj.means_at(traj.len() - 1) {
            assert!((m.unwrap() - 1.48).abs() < 1e-3);
        }
        // Total first moment conserved along the way.
        for d in &traj.diagnostics {
            assert!((d.total_moment - total0).abs() < 1e-8);
        }
    }

    #[test]
    fn dissipative_exchange_total_moment_is_nonincreasing() {
        let (p, _, y0) = setup();
        let params = ModelParams::exchange(vec![0.8; 5], vec![0.3; 5], 1.0, 1.0).unwrap();
        let cfg = IntegrationConfig { dt: 1e-2, t_end: 50.0, record_every: 10 };
        let traj = integrate(&p, &params, &Uncontrolled, &y0, &cfg).unwrap();
        for pair in traj.diagnostics.windows(2) {
            assert!(pair[1].total_moment <= pair[0].total_moment + 1e-12);
        }
    }

    #[test]
    fn step_halving_converges_at_fourth_order() {
        let (p, params, y0) = setup();
        let run = |dt: f64| {
            let cfg = IntegrationConfig { dt, t_end: 10.0, record_every: usize::MAX - 1 };
            let traj = integrate(&p, &params, &Uncontrolled, &y0, &cfg).unwrap();
            traj.final_state().clone()
        };
        let a = run(0.1);
        let b = run(0.05);
        let c = run(0.025);
        let e1: f64 = a
            .rho
            .iter()
            .chain(&a.mom)
            .zip(b.rho.iter().chain(&b.mom))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let e2: f64 = b
            .rho
            .iter()
            .chain(&b.mom)
            .zip(c.rho.iter().chain(&c.mom))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let ratio = e1 / e2;
        assert!((12.0..=20.0).contains(&ratio), "halving ratio {ratio}");
    }

    #[test]
    fn bad_config_is_rejected() {
        let (p, params, y0) = setup();
        for cfg in [
            IntegrationConfig { dt: 0.0, t_end: 1.0, record_every: 1 },
            IntegrationConfig { dt: 0.1, t_end: -1.0, record_every: 1 },
            IntegrationConfig { dt: 0.1, t_end: 1.0, record_every: 0 },
        ] {
            assert!(matches!(
                integrate(&p, &params, &Uncontrolled, &y0, &cfg),
                Err(IntegrateError::BadConfig { .. })
            ));
        }
    }

    #[test]
    fn stiffness_preflight_warns() {
        let (p, _, y0) = setup();
        let params = ModelParams::exchange(vec![0.5; 5], vec![0.5; 5], 1.0, 100.0).unwrap();
        let cfg = IntegrationConfig { dt: 1e-2, t_end: 1.0, record_every: 10 };
        let traj = integrate(&p, &params, &Uncontrolled, &y0, &cfg).unwrap();
        assert_eq!(traj.warnings.len(), 1);
        let small = IntegrationConfig { dt: 1e-4, t_end: 0.1, record_every: 10 };
        let traj = integrate(&p, &params, &Uncontrolled, &y0, &small).unwrap();
        assert!(traj.warnings.is_empty());
    }

    #[test]
    fn tail_classification_on_synthetic_series() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
        let constant: Vec<f64> = times.iter().map(|_| 2.0).collect();
        assert_eq!(classify_tail(&times, &constant, 1e-6), TailVerdict::ConvergedToValue);
        let tiny: Vec<f64> = times.iter().map(|_| 1e-9).collect();
        assert_eq!(classify_tail(&times, &tiny, 1e-6), TailVerdict::ConvergedToZero);
        let growing: Vec<f64> = times.iter().map(|&t| (0.05 * t).exp()).collect();
        assert_eq!(classify_tail(&times, &growing, 1e-3), TailVerdict::Growing);
        let decaying: Vec<f64> = times.iter().map(|&t| 5.0 * (-0.05 * t).exp()).collect();
        assert_eq!(classify_tail(&times, &decaying, 1e-3), TailVerdict::ConvergedToZero);
        let oscillating: Vec<f64> = times.iter().map(|&t| 2.0 + (0.8 * t).sin()).collect();
        assert_eq!(classify_tail(&times, &oscillating, 1e-3), TailVerdict::Oscillating);
    }

    #[test]
    fn convergence_report_needs_enough_trajectory() {
        let (p, params, y0) = setup();
        let cfg = IntegrationConfig { dt: 1e-2, t_end: 10.0, record_every: 10 };
        let traj = integrate(&p, &params, &Uncontrolled, &y0, &cfg).unwrap();
        assert!(matches!(
            convergence_report(&traj, 8.0, 1e-6),
            Err(IntegrateError::TrajectoryTooShort { .. })
        ));
        let verdicts = convergence_report(&traj, 2.0, 1e-3).unwrap();
        assert_eq!(verdicts.len(), 5);
    }

    #[test]
    fn flux_envelope_check_runs_on_a_neutral_trajectory() {
        let (p, _, y0) = setup();
        let params = ModelParams::exchange(vec![0.5; 5], vec![0.5; 5], 1.0, 1.0).unwrap();
        let cfg = IntegrationConfig { dt: 1e-2, t_end: 60.0, record_every: 10 };
        let traj = integrate(&p, &params, &Uncontrolled, &y0, &cfg).unwrap();
        // With conserved totals and bounded flux, generous envelopes hold.
        let alpha = vec![50.0; 5];
        let ok = moment_flux_envelope_check(&traj, &p, 1.0, &alpha, |t| 1.0 + t, 10.0).unwrap();
        assert!(ok.iter().all(|&b| b), "{ok:?}");
        // A hostile envelope (alpha barely above 1, r huge) must fail for
        // nodes whose moment still rises after the reference time.
        let tight = vec![1.0001; 5];
        let bad = moment_flux_envelope_check(&traj, &p, 1.0, &tight, |_| 1e12, 1.0).unwrap();
        assert!(bad.iter().any(|&b| !b));
    }
}
