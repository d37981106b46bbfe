//! Feedback control laws on mobility and in-node interactions.
//!
//! All laws come from instantaneous minimization of `psi(rho_i m_i)` plus a
//! quadratic control cost with penalization `k`, where `psi(x) = x^q / q`.
//! The raw law values are clamped into `[0, 1]`; the mobility control
//! additionally gets a floor `delta` taken from the smallest entry of the
//! transition matrix.
//!
//! The penalization coefficients decide how aggressive a law is:
//!
//! * mobility: `k_i = rho_i^{q-1}(t) m_i^{q-1}(0) chi m_I(0) (1 - P_ii)`
//!   with `I` the node of largest initial mean;
//! * exchange interactions: the minimal admissible
//!   `k_i = rho_i^{q+1}(t) m_i^q(0) mu (nu2_i - nu1_i)`, under which the
//!   clamped control is exactly `min((m_i(t)/m_i(0))^q, 1)`; interactions
//!   stop while `m_i(t) >= m_i(0)`;
//! * infection interactions: any `k_i` in the admissible band
//!   `[rho^{q+1} m^q nu2 sigma, rho^{q+1} m^q nu2 sigma / (1 - rho_c)]`.
//!   The band's lower end gives full suppression (`u = 1`), the upper end
//!   gives `u = 1 - rho_c`, which caps the effective infection rate at the
//!   healing rate and so eradicates the disease.

use std::fmt;

use crate::dynamics::{derived_means, MacroState, ModelParams, ModelVariant, MEAN_FLOOR};
use crate::graph::TransitionMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum ControlError {
    InvalidExponent { q: f64 },
    NonpositivePenalization { node: usize, value: f64 },
    ZeroChi,
    InvalidDelta { value: f64 },
    WrongVariant { expected: ModelVariant, got: ModelVariant },
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
}

impl fmt::Display for ControlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidExponent { q } => write!(f, "cost exponent q = {q} must be > 1"),
            Self::NonpositivePenalization { node, value } => {
                write!(f, "penalization {value} at node {node} must be positive")
            }
            Self::ZeroChi => write!(f, "chi = 0: mobility control is undefined, disable it"),
            Self::InvalidDelta { value } => write!(f, "clamp floor delta = {value} outside [0, 1)"),
            Self::WrongVariant { expected, got } => {
                write!(f, "control law needs the {expected} model, got {got}")
            }
            Self::DimensionMismatch { what, expected, got } => {
                write!(f, "{what}: expected length {expected}, got {got}")
            }
        }
    }
}

impl std::error::Error for ControlError {}

/// Marginal cost `psi'(x) = x^{q-1}` of the objective `psi(x) = x^q / q`.
///
/// `psi'(0) = 0` for every `q > 1`, so an unloaded node is never controlled.
pub fn psi_prime(x: f64, q: f64) -> Result<f64, ControlError> {
    if !(q > 1.0) {
        return Err(ControlError::InvalidExponent { q });
    }
    Ok(psi_prime_unchecked(x, q))
}

#[inline]
fn psi_prime_unchecked(x: f64, q: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x.powf(q - 1.0)
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Net incoming load `(P w)_i - w_i` for `w = rho m`.
fn load_flux(state: &MacroState, p: &TransitionMatrix) -> Vec<f64> {
    let mut flux = vec![0.0; state.n()];
    p.apply_into(&state.mom, &mut flux);
    for (fx, w) in flux.iter_mut().zip(&state.mom) {
        *fx -= w;
    }
    flux
}

/// Raw (unclamped) mobility law
/// `u_i = psi'(rho_i m_i) (chi / k_i) [(P w)_i - w_i]`.
///
/// Entries with `k_i = +inf` denote nodes whose mobility control is vacuous
/// and evaluate to zero; nonpositive `k_i` is an error.
pub fn u_chi_unclamped(
    state: &MacroState,
    p: &TransitionMatrix,
    chi: f64,
    k_chi: &[f64],
    q: f64,
) -> Result<Vec<f64>, ControlError> {
    check_q(q)?;
    check_len("k_chi", state.n(), k_chi.len())?;
    let flux = load_flux(state, p);
    let mut out = vec![0.0; state.n()];
    for i in 0..state.n() {
        if k_chi[i].is_infinite() {
            continue;
        }
        if !(k_chi[i] > 0.0) {
            return Err(ControlError::NonpositivePenalization { node: i, value: k_chi[i] });
        }
        out[i] = psi_prime_unchecked(state.mom[i], q) * chi / k_chi[i] * flux[i];
    }
    Ok(out)
}

/// Mobility feedback control, clamped to `[delta, 1]` per node.
pub fn feedback_u_chi(
    state: &MacroState,
    p: &TransitionMatrix,
    chi: f64,
    k_chi: &[f64],
    q: f64,
    delta: f64,
) -> Result<Vec<f64>, ControlError> {
    if !(0.0..1.0).contains(&delta) {
        return Err(ControlError::InvalidDelta { value: delta });
    }
    let raw = u_chi_unclamped(state, p, chi, k_chi, q)?;
    Ok(raw.into_iter().map(|u| u.max(delta).min(1.0)).collect())
}

/// Raw (unclamped) exchange-interaction law
/// `u_i = psi'(rho_i m_i) (mu / k_i) (nu2_i - nu1_i) rho_i (rho_i m_i)`.
pub fn u_mu_unclamped(
    state: &MacroState,
    params: &ModelParams,
    k_mu: &[f64],
    q: f64,
) -> Result<Vec<f64>, ControlError> {
    check_q(q)?;
    expect_variant(params, ModelVariant::Exchange)?;
    check_len("k_mu", state.n(), k_mu.len())?;
    let mut out = vec![0.0; state.n()];
    for i in 0..state.n() {
        // Where nu2 <= nu1 the raw law is <= 0 and the penalization is never
        // used; an infinite k encodes exactly that.
        if state.mom[i] <= 0.0 || k_mu[i].is_infinite() {
            continue;
        }
        if !(k_mu[i] > 0.0) {
            return Err(ControlError::NonpositivePenalization { node: i, value: k_mu[i] });
        }
        out[i] = psi_prime_unchecked(state.mom[i], q) * params.mu / k_mu[i]
            * (params.nu2[i] - params.nu1[i])
            * state.rho[i]
            * state.mom[i];
    }
    Ok(out)
}

/// Exchange-interaction feedback control, clamped to `[0, 1]`.
pub fn feedback_u_mu(
    state: &MacroState,
    params: &ModelParams,
    k_mu: &[f64],
    q: f64,
) -> Result<Vec<f64>, ControlError> {
    Ok(u_mu_unclamped(state, params, k_mu, q)?.into_iter().map(clamp01).collect())
}

/// Penalization choice for the infection-interaction law.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaKChoice {
    /// Lower end of the admissible band: full suppression, `u = 1`.
    IntervalLower,
    /// Upper end: `u = 1 - rho_c`, the cheapest eradicating control.
    IntervalUpper,
    /// Caller-supplied per-node penalization coefficients.
    Explicit(Vec<f64>),
}

/// Infection-interaction feedback control, clamped to `[0, 1]`.
///
/// The band-end strategies are evaluated through their closed forms rather
/// than by dividing out `k_i(t)`, which cancels exactly. Nodes with critical
/// mass fraction `rho_c >= 1` need no control (healing already dominates)
/// and get zero.
pub fn feedback_u_sigma(
    state: &MacroState,
    params: &ModelParams,
    q: f64,
    k: &SigmaKChoice,
) -> Result<Vec<f64>, ControlError> {
    check_q(q)?;
    expect_variant(params, ModelVariant::InfectionHealing)?;
    check_len("params", state.n(), params.n())?;
    let n = state.n();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let infective = params.sigma * params.nu2[i];
        if infective <= 0.0 || state.mom[i] <= 0.0 || state.rho[i] < MEAN_FLOOR {
            continue;
        }
        out[i] = match k {
            SigmaKChoice::IntervalLower => 1.0,
            SigmaKChoice::IntervalUpper => {
                let rho_c = params.gamma * params.nu1[i] / infective;
                if rho_c >= 1.0 {
                    0.0
                } else {
                    1.0 - rho_c
                }
            }
            SigmaKChoice::Explicit(ks) => {
                check_len("k_sigma", n, ks.len())?;
                if !(ks[i] > 0.0) {
                    return Err(ControlError::NonpositivePenalization { node: i, value: ks[i] });
                }
                clamp01(
                    psi_prime_unchecked(state.mom[i], q) * params.sigma / ks[i]
                        * params.nu2[i]
                        * state.rho[i]
                        * state.mom[i],
                )
            }
        };
    }
    Ok(out)
}

/// Time-constant relaxed infection control
/// `u_i = min(max(0, k~_i * scale), 1)` with
/// `k~_i = (rho_i(0) m_i(0))^q sigma nu2_i`.
pub fn relaxed_u_sigma(
    state_at_0: &MacroState,
    params: &ModelParams,
    q: f64,
    scale: f64,
) -> Result<Vec<f64>, ControlError> {
    Ok(relaxed_k_tilde(state_at_0, params, q)?
        .into_iter()
        .map(|kt| clamp01(kt * scale))
        .collect())
}

/// The relaxed law's per-node coefficients `k~_i = (rho_i(0) m_i(0))^q sigma nu2_i`.
pub fn relaxed_k_tilde(
    state_at_0: &MacroState,
    params: &ModelParams,
    q: f64,
) -> Result<Vec<f64>, ControlError> {
    check_q(q)?;
    expect_variant(params, ModelVariant::InfectionHealing)?;
    check_len("params", state_at_0.n(), params.n())?;
    Ok((0..state_at_0.n())
        .map(|i| {
            let w0 = state_at_0.mom[i].max(0.0);
            w0.powf(q) * params.sigma * params.nu2[i]
        })
        .collect())
}

/// Global interaction control for the network mean and its per-node
/// decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalControl {
    /// Single network-wide control value (unclamped).
    pub global: f64,
    /// Targeted per-node controls (unclamped); these sum to `global`.
    pub per_node: Vec<f64>,
}

/// Control of the network mean `sum_i rho_i m_i` by a single uniform
/// interaction reduction, `u = psi'(sum w) (mu / k) sum_j (nu2_j - nu1_j) w_j`,
/// together with the targeted decomposition
/// `u~_i = psi'(sum w) (mu / k) (nu2_i - nu1_i) w_i`, so `u = sum_i u~_i`.
pub fn global_u_mu(
    state: &MacroState,
    params: &ModelParams,
    k: f64,
    q: f64,
) -> Result<GlobalControl, ControlError> {
    check_q(q)?;
    expect_variant(params, ModelVariant::Exchange)?;
    check_len("params", state.n(), params.n())?;
    if !(k > 0.0) {
        return Err(ControlError::NonpositivePenalization { node: 0, value: k });
    }
    let total: f64 = state.total_moment();
    let weight = psi_prime_unchecked(total, q) * params.mu / k;
    let per_node: Vec<f64> = (0..state.n())
        .map(|i| weight * (params.nu2[i] - params.nu1[i]) * state.mom[i])
        .collect();
    // The global value goes through the summed objective derivative, not
    // through the per-node terms, so the decomposition identity stays a
    // meaningful check.
    let bracket: f64 = (0..state.n())
        .map(|i| (params.nu2[i] - params.nu1[i]) * state.mom[i])
        .sum();
    let global = weight * bracket;
    Ok(GlobalControl { global, per_node })
}

/// Plain-mean variants of the feedback laws, with `psi` applied to `m_i`
/// instead of `rho_i m_i`. Used to compare objectives: weighted over plain
/// equals `rho_i^q` wherever both are defined.
pub fn plain_mean_u_chi_unclamped(
    state: &MacroState,
    p: &TransitionMatrix,
    chi: f64,
    k_chi: &[f64],
    q: f64,
) -> Result<Vec<f64>, ControlError> {
    check_q(q)?;
    check_len("k_chi", state.n(), k_chi.len())?;
    let flux = load_flux(state, p);
    let means = derived_means(state, MEAN_FLOOR);
    let mut out = vec![0.0; state.n()];
    for i in 0..state.n() {
        let Some(m) = means[i] else { continue };
        if k_chi[i].is_infinite() {
            continue;
        }
        if !(k_chi[i] > 0.0) {
            return Err(ControlError::NonpositivePenalization { node: i, value: k_chi[i] });
        }
        // The mean objective sees the migration term through d m_i, which
        // carries a 1/rho_i relative to the first-moment flux.
        out[i] = psi_prime_unchecked(m, q) * chi / k_chi[i] * flux[i] / state.rho[i];
    }
    Ok(out)
}

pub fn plain_mean_u_mu_unclamped(
    state: &MacroState,
    params: &ModelParams,
    k_mu: &[f64],
    q: f64,
) -> Result<Vec<f64>, ControlError> {
    check_q(q)?;
    expect_variant(params, ModelVariant::Exchange)?;
    check_len("k_mu", state.n(), k_mu.len())?;
    let means = derived_means(state, MEAN_FLOOR);
    let mut out = vec![0.0; state.n()];
    for i in 0..state.n() {
        let Some(m) = means[i] else { continue };
        if k_mu[i].is_infinite() {
            continue;
        }
        if !(k_mu[i] > 0.0) {
            return Err(ControlError::NonpositivePenalization { node: i, value: k_mu[i] });
        }
        out[i] = psi_prime_unchecked(m, q) * params.mu / k_mu[i]
            * (params.nu2[i] - params.nu1[i])
            * state.mom[i];
    }
    Ok(out)
}

/// Mobility penalization coefficients, or a marker that mobility control is
/// vacuous on this graph.
#[derive(Debug, Clone, PartialEq)]
pub enum MobilityPenalization {
    /// Per-node coefficients; `+inf` marks nodes with no mobility leverage
    /// (their raw control evaluates to zero).
    PerNode(Vec<f64>),
    /// No node has mobility leverage (for instance a single-node graph).
    Disabled,
}

/// Minimal admissible mobility penalization,
/// `k_i = rho_i^{q-1}(t) m_i^{q-1}(0) chi m_I(0) (1 - P_ii)`,
/// `I = argmax_j m_j(0)` (ties broken by lowest index).
pub fn penalization_k_chi(
    m0: &[f64],
    state: &MacroState,
    p: &TransitionMatrix,
    chi: f64,
    q: f64,
) -> Result<MobilityPenalization, ControlError> {
    check_q(q)?;
    check_len("m0", state.n(), m0.len())?;
    if chi == 0.0 {
        return Err(ControlError::ZeroChi);
    }
    let top = m0
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
    let m_top = top.1.max(0.0);
    let mut any_live = false;
    let k: Vec<f64> = (0..state.n())
        .map(|i| {
            let v = state.rho[i].max(0.0).powf(q - 1.0)
                * m0[i].max(0.0).powf(q - 1.0)
                * chi
                * m_top
                * (1.0 - p.get(i, i));
            if v > 0.0 {
                any_live = true;
                v
            } else {
                f64::INFINITY
            }
        })
        .collect();
    if any_live {
        Ok(MobilityPenalization::PerNode(k))
    } else {
        Ok(MobilityPenalization::Disabled)
    }
}

/// Minimal admissible exchange penalization,
/// `k_i = rho_i^{q+1}(t) m_i^q(0) mu (nu2_i - nu1_i)`, evaluated with the
/// current mass and the frozen initial mean.
///
/// Where `nu2_i <= nu1_i` the law needs no penalization; those entries are
/// `+inf` so the raw control evaluates to zero there.
pub fn penalization_k_mu(
    m0: &[f64],
    state: &MacroState,
    params: &ModelParams,
    q: f64,
) -> Result<Vec<f64>, ControlError> {
    check_q(q)?;
    expect_variant(params, ModelVariant::Exchange)?;
    check_len("m0", state.n(), m0.len())?;
    Ok((0..state.n())
        .map(|i| {
            let dnu = params.nu2[i] - params.nu1[i];
            let v = state.rho[i].max(0.0).powf(q + 1.0) * m0[i].max(0.0).powf(q) * params.mu * dnu;
            if v > 0.0 {
                v
            } else {
                f64::INFINITY
            }
        })
        .collect())
}

fn check_q(q: f64) -> Result<(), ControlError> {
    if q > 1.0 {
        Ok(())
    } else {
        Err(ControlError::InvalidExponent { q })
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), ControlError> {
    if expected == got {
        Ok(())
    } else {
        Err(ControlError::DimensionMismatch { what, expected, got })
    }
}

fn expect_variant(params: &ModelParams, expected: ModelVariant) -> Result<(), ControlError> {
    if params.variant == expected {
        Ok(())
    } else {
        Err(ControlError::WrongVariant { expected, got: params.variant })
    }
}

// ---------------------------------------------------------------------------
// Policy and its bound evaluator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityMode {
    Off,
    Feedback,
    /// `u_chi = 1` everywhere: total quarantine. Deliberately degenerate; it
    /// disconnects the graph.
    FullSuppression,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionMode {
    Off,
    Feedback,
    /// Feedback until the given time, zero afterwards.
    FeedbackUntil(f64),
    /// The relaxed law of [`relaxed_u_sigma`] / [`relaxed_k_tilde`]
    /// (infection-healing model only).
    ExplicitLaw,
}

/// How the mobility clamp floor `delta` is taken from the matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaFloor {
    /// Smallest entry of `P` (zero on sparse graphs, making the floor moot).
    MatrixMin,
    /// Smallest strictly positive entry of `P`.
    MatrixMinPositive,
    Fixed(f64),
}

/// Policy-level penalization choice for the infection law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaStrategy {
    IntervalLower,
    IntervalUpper,
    /// One explicit coefficient used uniformly across nodes.
    Explicit(f64),
}

/// Which controls are active and how their coefficients are chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPolicy {
    pub q: f64,
    pub mobility_mode: MobilityMode,
    pub interaction_mode: InteractionMode,
    pub delta: DeltaFloor,
    pub sigma_strategy: SigmaStrategy,
    /// Scale of the relaxed law when `interaction_mode` is `ExplicitLaw`.
    pub relaxed_scale: f64,
    /// Apply the relaxed law as a frozen constant vector instead of as a
    /// feedback with explicit penalization `k~_i * scale`.
    pub relaxed_constant: bool,
}

impl Default for ControlPolicy {
    fn default() -> Self {
        Self {
            q: 2.0,
            mobility_mode: MobilityMode::Off,
            interaction_mode: InteractionMode::Off,
            delta: DeltaFloor::MatrixMin,
            sigma_strategy: SigmaStrategy::IntervalUpper,
            relaxed_scale: 2.5e-5,
            relaxed_constant: false,
        }
    }
}

/// Controls emitted at one time instant, each component in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    pub u_chi: Vec<f64>,
    pub u_interaction: Vec<f64>,
    pub t: f64,
}

impl ControlSignal {
    pub fn zero(n: usize, t: f64) -> Self {
        Self { u_chi: vec![0.0; n], u_interaction: vec![0.0; n], t }
    }
}

/// Counters a law reports alongside each evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    /// Nodes where the raw mobility law was negative and the `delta` floor
    /// overrode it (load would have dropped by welcoming migrants).
    pub chi_floor_overrides: usize,
}

/// A state-feedback control law the integrator can query at every stage.
pub trait ControlLaw {
    fn eval(&self, state: &MacroState, p: &TransitionMatrix) -> (ControlSignal, EvalStats);

    /// True when the law can never emit a nonzero mobility control, letting
    /// the integrator skip rebuilding the controlled matrix.
    fn mobility_inert(&self) -> bool {
        false
    }

    /// True when the law always emits the zero signal, letting drivers skip
    /// evaluating it (and assembling the state it feeds on) altogether.
    fn inert(&self) -> bool {
        false
    }
}

/// No control at all.
pub struct Uncontrolled;

impl ControlLaw for Uncontrolled {
    fn eval(&self, state: &MacroState, _p: &TransitionMatrix) -> (ControlSignal, EvalStats) {
        (ControlSignal::zero(state.n(), state.t), EvalStats::default())
    }

    fn mobility_inert(&self) -> bool {
        true
    }

    fn inert(&self) -> bool {
        true
    }
}

/// A [`ControlPolicy`] bound to a matrix, model, and initial state.
///
/// Binding resolves everything that is frozen at time zero: the clamp floor,
/// the initial means entering the penalization formulas, the per-node
/// infection strategy, and the relaxed-law coefficients. Evaluation is then
/// a pure function of the instantaneous state.
#[derive(Debug)]
pub struct Controller {
    policy: ControlPolicy,
    params: ModelParams,
    n: usize,
    delta: f64,
    /// Initial means, zero where the initial mass is below the floor.
    m0: Vec<f64>,
    /// Per-node infection control under the bound strategy, `None` for
    /// the explicit-coefficient path.
    sigma_fixed: Option<Vec<f64>>,
    sigma_explicit: Option<SigmaKChoice>,
    relaxed_k: Vec<f64>,
    relaxed_const: Vec<f64>,
    notes: Vec<String>,
}

impl Controller {
    pub fn bind(
        policy: ControlPolicy,
        p: &TransitionMatrix,
        params: &ModelParams,
        y0: &MacroState,
    ) -> Result<Self, ControlError> {
        check_q(policy.q)?;
        let n = y0.n();
        check_len("params", n, params.n())?;
        let mut notes = Vec::new();

        let delta = match policy.delta {
            DeltaFloor::MatrixMin => p.min_entry(),
            DeltaFloor::MatrixMinPositive => p.min_positive_entry().unwrap_or(0.0),
            DeltaFloor::Fixed(d) => d,
        };
        if !(0.0..1.0).contains(&delta) {
            return Err(ControlError::InvalidDelta { value: delta });
        }

        let m0: Vec<f64> = derived_means(y0, MEAN_FLOOR)
            .into_iter()
            .map(|m| m.unwrap_or(0.0))
            .collect();

        if policy.mobility_mode == MobilityMode::Feedback && params.chi == 0.0 {
            return Err(ControlError::ZeroChi);
        }
        if policy.mobility_mode == MobilityMode::Feedback {
            if let MobilityPenalization::Disabled = penalization_k_chi(&m0, y0, p, params.chi, policy.q)? {
                notes.push("mobility control is vacuous on this graph; emitting the floor".into());
            }
        }

        let mut sigma_fixed = None;
        let mut sigma_explicit = None;
        let mut relaxed_k = vec![f64::INFINITY; n];
        let mut relaxed_const = vec![0.0; n];
        let interaction_on = !matches!(policy.interaction_mode, InteractionMode::Off);
        if interaction_on && params.variant == ModelVariant::InfectionHealing {
            match policy.interaction_mode {
                InteractionMode::ExplicitLaw => {
                    let ktilde = relaxed_k_tilde(y0, params, policy.q)?;
                    relaxed_const = ktilde.iter().map(|kt| clamp01(kt * policy.relaxed_scale)).collect();
                    relaxed_k = ktilde
                        .iter()
                        .map(|kt| {
                            let k = kt * policy.relaxed_scale;
                            if k > 0.0 {
                                k
                            } else {
                                f64::INFINITY
                            }
                        })
                        .collect();
                }
                _ => match policy.sigma_strategy {
                    SigmaStrategy::IntervalLower => sigma_explicit = Some(SigmaKChoice::IntervalLower),
                    SigmaStrategy::IntervalUpper => {
                        for i in 0..n {
                            let inf = params.sigma * params.nu2[i];
                            if inf > 0.0 && params.gamma * params.nu1[i] / inf >= 1.0 {
                                notes.push(format!(
                                    "node {}: critical mass fraction >= 1, healing already dominates; interaction control set to zero",
                                    i + 1
                                ));
                            }
                        }
                        sigma_explicit = Some(SigmaKChoice::IntervalUpper);
                    }
                    SigmaStrategy::Explicit(k) => {
                        if !(k > 0.0) {
                            return Err(ControlError::NonpositivePenalization { node: 0, value: k });
                        }
                        sigma_explicit = Some(SigmaKChoice::Explicit(vec![k; n]));
                    }
                },
            }
        }
        if interaction_on && params.variant == ModelVariant::Exchange {
            for i in 0..n {
                if params.nu2[i] > params.nu1[i] && m0[i] <= 0.0 {
                    // The frozen bound is void; any positive load saturates
                    // the control immediately.
                    notes.push(format!(
                        "node {}: zero initial mean with nu2 > nu1; interaction control saturates on any load",
                        i + 1
                    ));
                }
            }
        }
        if let InteractionMode::ExplicitLaw = policy.interaction_mode {
            expect_variant(params, ModelVariant::InfectionHealing)?;
            if policy.relaxed_constant {
                sigma_fixed = Some(relaxed_const.clone());
            }
        }

        Ok(Self {
            policy,
            params: params.clone(),
            n,
            delta,
            m0,
            sigma_fixed,
            sigma_explicit,
            relaxed_k,
            relaxed_const,
            notes,
        })
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The constant relaxed-law control vector (zero unless bound with
    /// `ExplicitLaw`).
    pub fn relaxed_constant_controls(&self) -> &[f64] {
        &self.relaxed_const
    }

    fn interaction_active(&self, t: f64) -> bool {
        match self.policy.interaction_mode {
            InteractionMode::Off => false,
            InteractionMode::Feedback | InteractionMode::ExplicitLaw => true,
            InteractionMode::FeedbackUntil(t_bar) => t <= t_bar,
        }
    }

    fn eval_u_chi(&self, state: &MacroState, p: &TransitionMatrix) -> (Vec<f64>, usize) {
        match self.policy.mobility_mode {
            MobilityMode::Off => (vec![0.0; self.n], 0),
            MobilityMode::FullSuppression => (vec![1.0; self.n], 0),
            MobilityMode::Feedback => {
                let k = match penalization_k_chi(&self.m0, state, p, self.params.chi, self.policy.q) {
                    Ok(MobilityPenalization::PerNode(k)) => k,
                    Ok(MobilityPenalization::Disabled) => vec![f64::INFINITY; self.n],
                    Err(_) => vec![f64::INFINITY; self.n],
                };
                let raw = u_chi_unclamped(state, p, self.params.chi, &k, self.policy.q)
                    .unwrap_or_else(|_| vec![0.0; self.n]);
                let overrides = raw.iter().filter(|&&u| u < 0.0 && self.delta > 0.0).count();
                (raw.into_iter().map(|u| u.max(self.delta).min(1.0)).collect(), overrides)
            }
        }
    }

    fn eval_u_interaction(&self, state: &MacroState) -> Vec<f64> {
        if !self.interaction_active(state.t) {
            return vec![0.0; self.n];
        }
        match self.params.variant {
            ModelVariant::Exchange => {
                // Minimal-penalization law in closed form: u = (m/m0)^q,
                // clamped; a void bound (m0 = 0) saturates on any load.
                let q = self.policy.q;
                (0..self.n)
                    .map(|i| {
                        if self.params.nu2[i] <= self.params.nu1[i]
                            || state.mom[i] <= 0.0
                            || state.rho[i] < MEAN_FLOOR
                        {
                            0.0
                        } else if self.m0[i] <= 0.0 {
                            1.0
                        } else {
                            let m = state.mom[i] / state.rho[i];
                            clamp01((m / self.m0[i]).powf(q))
                        }
                    })
                    .collect()
            }
            ModelVariant::InfectionHealing => {
                if let Some(fixed) = &self.sigma_fixed {
                    return fixed.clone();
                }
                let choice = match &self.sigma_explicit {
                    Some(c) => c.clone(),
                    None => SigmaKChoice::Explicit(self.relaxed_k.clone()),
                };
                feedback_u_sigma(state, &self.params, self.policy.q, &choice)
                    .unwrap_or_else(|_| vec![0.0; self.n])
            }
        }
    }
}

impl ControlLaw for Controller {
    fn eval(&self, state: &MacroState, p: &TransitionMatrix) -> (ControlSignal, EvalStats) {
        let (u_chi, overrides) = self.eval_u_chi(state, p);
        let u_interaction = self.eval_u_interaction(state);
        (
            ControlSignal { u_chi, u_interaction, t: state.t },
            EvalStats { chi_floor_overrides: overrides },
        )
    }

    fn mobility_inert(&self) -> bool {
        self.policy.mobility_mode == MobilityMode::Off
    }

    fn inert(&self) -> bool {
        self.policy.mobility_mode == MobilityMode::Off
            && self.policy.interaction_mode == InteractionMode::Off
    }
}

/// Uniform global-mean control law: the single value from [`global_u_mu`],
/// clamped and applied to every node's interactions. No mobility control.
pub struct GlobalMeanLaw {
    pub params: ModelParams,
    pub k: f64,
    pub q: f64,
}

impl ControlLaw for GlobalMeanLaw {
    fn eval(&self, state: &MacroState, _p: &TransitionMatrix) -> (ControlSignal, EvalStats) {
        let n = state.n();
        let u = global_u_mu(state, &self.params, self.k, self.q)
            .map(|gc| clamp01(gc.global))
            .unwrap_or(0.0);
        (
            ControlSignal { u_chi: vec![0.0; n], u_interaction: vec![u; n], t: state.t },
            EvalStats::default(),
        )
    }

    fn mobility_inert(&self) -> bool {
        true
    }
}

/// Targeted per-node decomposition of the global-mean law: node `i` gets its
/// own clamped share of the same objective. No mobility control.
pub struct TargetedMeanLaw {
    pub params: ModelParams,
    pub k: f64,
    pub q: f64,
}

impl ControlLaw for TargetedMeanLaw {
    fn eval(&self, state: &MacroState, _p: &TransitionMatrix) -> (ControlSignal, EvalStats) {
        let n = state.n();
        let u = global_u_mu(state, &self.params, self.k, self.q)
            .map(|gc| gc.per_node.into_iter().map(clamp01).collect())
            .unwrap_or_else(|_| vec![0.0; n]);
        (
            ControlSignal { u_chi: vec![0.0; n], u_interaction: u, t: state.t },
            EvalStats::default(),
        )
    }

    fn mobility_inert(&self) -> bool {
        true
    }
}
