//! Critical densities, linearized stability, and reproduction-number bounds
//! for the infection-healing model.

use std::fmt;

use crate::dynamics::{ModelParams, ModelVariant};
use crate::graph::{StationaryDensity, TransitionMatrix};

/// Stationary masses below this are treated as degenerate (an irreducible
/// chain has a strictly positive stationary vector).
const POSITIVE_MASS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralError {
    WrongVariant { got: ModelVariant },
    ZeroDenominator,
    HeterogeneousParams { what: &'static str },
    DegenerateStationaryMass { node: usize, value: f64 },
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
}

impl fmt::Display for SpectralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WrongVariant { got } => {
                write!(f, "reproduction-number analysis needs the infection-healing model, got {got}")
            }
            Self::ZeroDenominator => {
                write!(f, "chi and gamma*nu1 both vanish: no recovery or migration time scale")
            }
            Self::HeterogeneousParams { what } => {
                write!(f, "{what} must be constant across nodes for the bracket")
            }
            Self::DegenerateStationaryMass { node, value } => {
                write!(f, "stationary mass {value} at node {node} is not strictly positive")
            }
            Self::DimensionMismatch { what, expected, got } => {
                write!(f, "{what}: expected length {expected}, got {got}")
            }
        }
    }
}

impl std::error::Error for SpectralError {}

/// Per-node critical mass fractions `rho_c_i = gamma nu1_i / (sigma nu2_i)`.
///
/// A node holding more than its critical fraction has its infection term
/// dominate healing. Nodes with `nu2_i = 0` cannot be infected at all and
/// are flagged `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalDensities {
    pub rho_c: Vec<Option<f64>>,
}

pub fn critical_densities(params: &ModelParams) -> Result<CriticalDensities, SpectralError> {
    expect_infection(params)?;
    let rho_c = (0..params.n())
        .map(|i| {
            let inf = params.sigma * params.nu2[i];
            if inf > 0.0 {
                Some(params.gamma * params.nu1[i] / inf)
            } else {
                None
            }
        })
        .collect();
    Ok(CriticalDensities { rho_c })
}

/// Bracket on the basic reproduction number, from the row sums of the
/// next-generation quotient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct R0Bounds {
    pub lower: f64,
    pub upper: f64,
    /// The per-node row sums whose extrema give the bounds.
    pub row_sums: Vec<f64>,
}

impl R0Bounds {
    fn from_row_sums(row_sums: Vec<f64>) -> Self {
        let lower = row_sums.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = row_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { lower, upper, row_sums }
    }
}

fn constant_param(values: &[f64], what: &'static str) -> Result<f64, SpectralError> {
    let first = values[0];
    if values.iter().any(|&v| v != first) {
        return Err(SpectralError::HeterogeneousParams { what });
    }
    Ok(first)
}

fn expect_infection(params: &ModelParams) -> Result<(), SpectralError> {
    if params.variant != ModelVariant::InfectionHealing {
        return Err(SpectralError::WrongVariant { got: params.variant });
    }
    Ok(())
}

fn positive_masses(rho_inf: &StationaryDensity) -> Result<&[f64], SpectralError> {
    for (i, &r) in rho_inf.values().iter().enumerate() {
        if r < POSITIVE_MASS_FLOOR {
            return Err(SpectralError::DegenerateStationaryMass { node: i, value: r });
        }
    }
    Ok(rho_inf.values())
}

/// Uncontrolled bracket, from the verbatim quotient entries
/// `beta_ij = chi P_ij rho_j / ((chi + gamma nu1) rho_i)
///          + sigma nu2 rho_i delta_ij / (chi + gamma nu1)`
/// evaluated at the stationary masses. Because `P rho = rho` there, the row
/// sums collapse to `(chi + sigma nu2 rho_i) / (chi + gamma nu1)`, so the
/// extrema bracket the number between the least and most massive nodes.
pub fn r0_bounds_uncontrolled(
    p: &TransitionMatrix,
    rho_inf: &StationaryDensity,
    params: &ModelParams,
) -> Result<R0Bounds, SpectralError> {
    expect_infection(params)?;
    let nu1 = constant_param(&params.nu1, "nu1")?;
    let nu2 = constant_param(&params.nu2, "nu2")?;
    let n = params.n();
    if p.n() != n {
        return Err(SpectralError::DimensionMismatch { what: "matrix", expected: n, got: p.n() });
    }
    let rho = positive_masses(rho_inf)?;
    if rho.len() != n {
        return Err(SpectralError::DimensionMismatch { what: "rho_inf", expected: n, got: rho.len() });
    }
    let denom = params.chi + params.gamma * nu1;
    if denom <= 0.0 {
        return Err(SpectralError::ZeroDenominator);
    }
    let row_sums = (0..n)
        .map(|i| {
            let migration: f64 =
                (0..n).map(|j| params.chi * p.get(i, j) * rho[j] / (denom * rho[i])).sum();
            migration + params.sigma * nu2 * rho[i] / denom
        })
        .collect();
    Ok(R0Bounds::from_row_sums(row_sums))
}

/// Controlled bracket from the per-node quotients
/// `(chi (1-u_chi_i) + sigma (1-u_sigma_i) nu2 rho_i)
///  / (chi (1-u_chi_i) + gamma nu1)`
/// at the asymptotic controls.
pub fn r0_bounds_controlled(
    rho_inf: &StationaryDensity,
    params: &ModelParams,
    u_chi_inf: &[f64],
    u_sigma_inf: &[f64],
) -> Result<R0Bounds, SpectralError> {
    expect_infection(params)?;
    let nu1 = constant_param(&params.nu1, "nu1")?;
    let nu2 = constant_param(&params.nu2, "nu2")?;
    let rho = positive_masses(rho_inf)?;
    let n = rho.len();
    for (what, v) in [("u_chi_inf", u_chi_inf), ("u_sigma_inf", u_sigma_inf)] {
        if v.len() != n {
            return Err(SpectralError::DimensionMismatch { what, expected: n, got: v.len() });
        }
    }
    let row_sums = (0..n)
        .map(|i| {
            let mobility = params.chi * (1.0 - u_chi_inf[i]);
            let denom = mobility + params.gamma * nu1;
            if denom <= 0.0 {
                return Err(SpectralError::ZeroDenominator);
            }
            Ok((mobility + params.sigma * (1.0 - u_sigma_inf[i]) * nu2 * rho[i]) / denom)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(R0Bounds::from_row_sums(row_sums))
}

/// The same per-node quotients evaluated at an instantaneous state and
/// control, for reporting the bracket along a trajectory.
pub fn instantaneous_r0_bounds(
    rho_now: &[f64],
    params: &ModelParams,
    u_chi: &[f64],
    u_sigma: &[f64],
) -> Result<(f64, f64), SpectralError> {
    expect_infection(params)?;
    let nu1 = constant_param(&params.nu1, "nu1")?;
    let nu2 = constant_param(&params.nu2, "nu2")?;
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for i in 0..rho_now.len() {
        let mobility = params.chi * (1.0 - u_chi[i]);
        let denom = mobility + params.gamma * nu1;
        if denom <= 0.0 {
            return Err(SpectralError::ZeroDenominator);
        }
        let q = (mobility + params.sigma * (1.0 - u_sigma[i]) * nu2 * rho_now[i]) / denom;
        lower = lower.min(q);
        upper = upper.max(q);
    }
    Ok((lower, upper))
}

/// Spectral radius of the next-generation quotient matrix, as an optional
/// sharper diagnostic inside the bracket. Power iteration on the nonnegative
/// matrix `B D^{-1}` with
/// `B = chi R^{-1} P R + sigma nu2 R`, `D = (chi + gamma nu1) I`.
pub fn bd_spectral_radius(
    p: &TransitionMatrix,
    rho_inf: &StationaryDensity,
    params: &ModelParams,
) -> Result<f64, SpectralError> {
    expect_infection(params)?;
    let nu1 = constant_param(&params.nu1, "nu1")?;
    let nu2 = constant_param(&params.nu2, "nu2")?;
    let rho = positive_masses(rho_inf)?;
    let n = rho.len();
    let denom = params.chi + params.gamma * nu1;
    if denom <= 0.0 {
        return Err(SpectralError::ZeroDenominator);
    }
    let entry = |i: usize, j: usize| {
        let mut b = params.chi * p.get(i, j) * rho[j] / rho[i];
        if i == j {
            b += params.sigma * nu2 * rho[i];
        }
        b / denom
    };
    let mut v = vec![1.0 / n as f64; n];
    let mut radius = 0.0;
    for _ in 0..100_000 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                w[i] += entry(i, j) * v[j];
            }
        }
        let norm: f64 = w.iter().map(|x| x.abs()).sum();
        if norm == 0.0 {
            return Ok(0.0);
        }
        for x in &mut w {
            *x /= norm;
        }
        if (norm - radius).abs() < 1e-13 * norm.max(1.0) {
            return Ok(norm);
        }
        radius = norm;
        v = w;
    }
    Ok(radius)
}
