//! Macroscopic right-hand sides in first-moment form.
//!
//! State is the pair (mass fraction rho_i, first moment rho_i m_i) per node.
//! Integrating the first moment instead of the mean keeps the equations
//! regular when a node empties; means are recovered afterwards via
//! [`derived_means`].

use std::fmt;

use crate::graph::TransitionMatrix;

/// Below this mass fraction a node's mean load is reported as undefined.
pub const MEAN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    /// Gain and loss of load inside one symmetric binary interaction.
    Exchange,
    /// Gain by binary interaction, loss by an autonomous healing process.
    InfectionHealing,
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exchange => write!(f, "exchange"),
            Self::InfectionHealing => write!(f, "infection-healing"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsError {
    WrongVariant { expected: ModelVariant, got: ModelVariant },
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    OutOfRange { what: &'static str, value: f64 },
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WrongVariant { expected, got } => {
                write!(f, "operation needs the {expected} model, got {got}")
            }
            Self::DimensionMismatch { what, expected, got } => {
                write!(f, "{what}: expected length {expected}, got {got}")
            }
            Self::OutOfRange { what, value } => write!(f, "{what} = {value} out of range"),
        }
    }
}

impl std::error::Error for DynamicsError {}

/// Interaction and migration rates for one of the two models.
///
/// `mu` is consulted only by the exchange variant, `sigma`/`gamma` only by
/// the infection-healing variant; the unused fields are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub variant: ModelVariant,
    /// Per-node loss exchange parameter, in [0, 1].
    pub nu1: Vec<f64>,
    /// Per-node gain exchange parameter, in [0, 1].
    pub nu2: Vec<f64>,
    /// Migration frequency.
    pub chi: f64,
    /// Binary-interaction frequency (exchange model).
    pub mu: f64,
    /// Infection frequency (infection-healing model).
    pub sigma: f64,
    /// Healing frequency (infection-healing model).
    pub gamma: f64,
}

impl ModelParams {
    pub fn exchange(nu1: Vec<f64>, nu2: Vec<f64>, chi: f64, mu: f64) -> Result<Self, DynamicsError> {
        let p = Self { variant: ModelVariant::Exchange, nu1, nu2, chi, mu, sigma: 0.0, gamma: 0.0 };
        p.validated()
    }

    pub fn infection_healing(
        nu1: Vec<f64>,
        nu2: Vec<f64>,
        chi: f64,
        sigma: f64,
        gamma: f64,
    ) -> Result<Self, DynamicsError> {
        let p = Self { variant: ModelVariant::InfectionHealing, nu1, nu2, chi, mu: 0.0, sigma, gamma };
        p.validated()
    }

    fn validated(self) -> Result<Self, DynamicsError> {
        if self.nu2.len() != self.nu1.len() {
            return Err(DynamicsError::DimensionMismatch {
                what: "nu2",
                expected: self.nu1.len(),
                got: self.nu2.len(),
            });
        }
        for (name, rate) in [("chi", self.chi), ("mu", self.mu), ("sigma", self.sigma), ("gamma", self.gamma)] {
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(DynamicsError::OutOfRange { what: name, value: rate });
            }
        }
        for &v in self.nu1.iter().chain(&self.nu2) {
            if !(0.0..=1.0).contains(&v) {
                return Err(DynamicsError::OutOfRange { what: "exchange parameter", value: v });
            }
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.nu1.len()
    }

    pub fn expect_variant(&self, expected: ModelVariant) -> Result<(), DynamicsError> {
        if self.variant == expected {
            Ok(())
        } else {
            Err(DynamicsError::WrongVariant { expected, got: self.variant })
        }
    }
}

/// Per-node mass fractions and first moments at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub rho: Vec<f64>,
    /// First moment rho_i m_i per node.
    pub mom: Vec<f64>,
    pub t: f64,
}

impl MacroState {
    pub fn new(rho: Vec<f64>, mom: Vec<f64>, t: f64) -> Result<Self, DynamicsError> {
        if mom.len() != rho.len() {
            return Err(DynamicsError::DimensionMismatch {
                what: "mom",
                expected: rho.len(),
                got: mom.len(),
            });
        }
        Ok(Self { rho, mom, t })
    }

    /// Builds the state from mass fractions and mean loads.
    pub fn from_means(rho: Vec<f64>, means: &[f64], t: f64) -> Result<Self, DynamicsError> {
        let mom = rho.iter().zip(means).map(|(r, m)| r * m).collect();
        Self::new(rho, mom, t)
    }

    pub fn n(&self) -> usize {
        self.rho.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.iter().sum()
    }

    pub fn total_moment(&self) -> f64 {
        self.mom.iter().sum()
    }
}

/// Mass flow `d rho/dt = chi (P_eff - I) rho`; the component sum vanishes
/// exactly because `P_eff` is column-stochastic.
pub fn rhs_mass(
    state: &MacroState,
    p_eff: &TransitionMatrix,
    chi: f64,
) -> Result<Vec<f64>, DynamicsError> {
    if p_eff.n() != state.n() {
        return Err(DynamicsError::DimensionMismatch {
            what: "matrix",
            expected: state.n(),
            got: p_eff.n(),
        });
    }
    let mut out = vec![0.0; state.n()];
    p_eff.apply_into(&state.rho, &mut out);
    for (o, r) in out.iter_mut().zip(&state.rho) {
        *o = chi * (*o - r);
    }
    Ok(out)
}

/// First-moment flow of the exchange model,
/// `chi [ (P_eff w)_i - w_i ] + mu (1 - u_i) (nu2_i - nu1_i) rho_i w_i`
/// with `w_i = rho_i m_i`. The quadratic term is evaluated as
/// `rho_i * mom_i`, never through the mean.
pub fn rhs_moment_exchange(
    state: &MacroState,
    p_eff: &TransitionMatrix,
    params: &ModelParams,
    u_mu: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    params.expect_variant(ModelVariant::Exchange)?;
    check_len("u_mu", state.n(), u_mu.len())?;
    check_len("params", state.n(), params.n())?;
    let mut out = vec![0.0; state.n()];
    p_eff.apply_into(&state.mom, &mut out);
    for i in 0..state.n() {
        let migration = params.chi * (out[i] - state.mom[i]);
        let interaction = params.mu
            * (1.0 - u_mu[i])
            * (params.nu2[i] - params.nu1[i])
            * state.rho[i]
            * state.mom[i];
        out[i] = migration + interaction;
    }
    Ok(out)
}

/// First-moment flow of the infection-healing model,
/// `chi [ (P_eff w)_i - w_i ] + sigma (1 - u_i) nu2_i rho_i w_i - gamma nu1_i w_i`.
pub fn rhs_moment_infection_healing(
    state: &MacroState,
    p_eff: &TransitionMatrix,
    params: &ModelParams,
    u_sigma: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    params.expect_variant(ModelVariant::InfectionHealing)?;
    check_len("u_sigma", state.n(), u_sigma.len())?;
    check_len("params", state.n(), params.n())?;
    let mut out = vec![0.0; state.n()];
    p_eff.apply_into(&state.mom, &mut out);
    for i in 0..state.n() {
        let migration = params.chi * (out[i] - state.mom[i]);
        let infection =
            params.sigma * (1.0 - u_sigma[i]) * params.nu2[i] * state.rho[i] * state.mom[i];
        let healing = params.gamma * params.nu1[i] * state.mom[i];
        out[i] = migration + infection - healing;
    }
    Ok(out)
}

/// Mean loads `m_i = mom_i / rho_i`, masked (`None`) where `rho_i` is below
/// `mean_floor`.
pub fn derived_means(state: &MacroState, mean_floor: f64) -> Vec<Option<f64>> {
    state
        .rho
        .iter()
        .zip(&state.mom)
        .map(|(&r, &w)| if r >= mean_floor { Some(w / r) } else { None })
        .collect()
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), DynamicsError> {
    if expected == got {
        Ok(())
    } else {
        Err(DynamicsError::DimensionMismatch { what, expected, got })
    }
}
