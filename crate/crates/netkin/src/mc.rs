//! Microscopic Monte Carlo simulation of the kinetic dynamics.
//!
//! Agents carry a node label and a nonnegative load. Migration is a jump
//! process through the transition matrix; binary interactions follow a
//! per-step splitting: each agent enters the interaction pool of its node
//! with probability `rate * local_mass * dt`, the pool is paired up, and
//! both members of a pair apply the update rule. An agent interacts at most
//! once per substep, which makes the expected first-moment drift match the
//! macroscopic equations exactly for mean-zero noise.
//!
//! Per-agent Bernoulli trials are realized as an exact binomial count
//! followed by a uniform subset draw, which is the same process law at a
//! fraction of the random-number cost when event probabilities are small.
//!
//! With the default zero noise the rules are deterministic given the RNG
//! stream, and a fixed seed reproduces a run bit for bit.

use std::fmt;

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;

use crate::dynamics::{ModelParams, ModelVariant};
use crate::graph::TransitionMatrix;

/// Per-step event probabilities above this are refused; first-order
/// splitting is no longer accurate there.
pub const EVENT_PROBABILITY_GUARD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum McError {
    EmptyEnsemble,
    StepTooLarge { process: &'static str, probability: f64 },
    BadNoise { amplitude: f64, max: f64 },
    WrongVariant { expected: ModelVariant, got: ModelVariant },
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    BadInitialState { msg: String },
}

impl fmt::Display for McError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyEnsemble => write!(f, "ensemble has no agents"),
            Self::StepTooLarge { process, probability } => {
                write!(f, "{process} event probability {probability} exceeds {EVENT_PROBABILITY_GUARD}; reduce dt")
            }
            Self::BadNoise { amplitude, max } => {
                write!(f, "noise amplitude {amplitude} exceeds {max}; loads could go negative")
            }
            Self::WrongVariant { expected, got } => {
                write!(f, "step needs the {expected} model, got {got}")
            }
            Self::DimensionMismatch { what, expected, got } => {
                write!(f, "{what}: expected length {expected}, got {got}")
            }
            Self::BadInitialState { msg } => write!(f, "bad initial state: {msg}"),
        }
    }
}

impl std::error::Error for McError {}

/// Noise on the interaction rules. Mean zero either way; the first moments
/// are unaffected, so the default is no noise at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// Uniform on `[-amplitude, amplitude]`.
    Uniform { amplitude: f64 },
}

impl NoiseModel {
    pub fn from_amplitude(c: f64) -> Self {
        if c > 0.0 {
            Self::Uniform { amplitude: c }
        } else {
            Self::None
        }
    }

    fn amplitude(&self) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Uniform { amplitude } => *amplitude,
        }
    }

    /// The support must keep post-interaction loads nonnegative.
    fn check(&self, max: f64) -> Result<(), McError> {
        let c = self.amplitude();
        if c > max + 1e-15 {
            return Err(McError::BadNoise { amplitude: c, max });
        }
        Ok(())
    }

    #[inline]
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Uniform { amplitude } => rng.gen_range(-amplitude..=*amplitude),
        }
    }
}

/// Fixed population of agents, each holding a node label and a load.
pub struct ParticleEnsemble {
    nodes: Vec<u32>,
    loads: Vec<f64>,
    n_nodes: usize,
    total_mass: f64,
    seed: u64,
    rng: ChaCha8Rng,
    /// Agent ids per node, maintained across moves.
    buckets: Vec<Vec<u32>>,
    /// Agent -> index inside its bucket.
    slot: Vec<u32>,
    /// Scratch permutation for ensemble-wide subset draws.
    perm: Vec<u32>,
    /// Scratch for the ids picked in one step.
    picked: Vec<u32>,
}

impl fmt::Debug for ParticleEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParticleEnsemble")
            .field("agents", &self.loads.len())
            .field("nodes", &self.n_nodes)
            .field("seed", &self.seed)
            .finish()
    }
}

impl ParticleEnsemble {
    /// Distributes `n_agents` over nodes proportionally to `rho0` (largest
    /// remainders break ties) and gives every agent in node `i` the load
    /// `m0[i]`, so the initial empirical moments match the macroscopic state
    /// up to rounding of the counts.
    pub fn from_macro(rho0: &[f64], m0: &[f64], n_agents: usize, seed: u64) -> Result<Self, McError> {
        if n_agents == 0 {
            return Err(McError::EmptyEnsemble);
        }
        let n = rho0.len();
        if m0.len() != n {
            return Err(McError::DimensionMismatch { what: "m0", expected: n, got: m0.len() });
        }
        let total_mass: f64 = rho0.iter().sum();
        if !(total_mass > 0.0) {
            return Err(McError::BadInitialState { msg: "total mass must be positive".into() });
        }
        if rho0.iter().any(|&r| r < 0.0) || m0.iter().any(|&m| m < 0.0) {
            return Err(McError::BadInitialState { msg: "negative mass or mean".into() });
        }
        let ideal: Vec<f64> = rho0.iter().map(|r| r / total_mass * n_agents as f64).collect();
        let mut counts: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let ra = ideal[a] - ideal[a].floor();
            let rb = ideal[b] - ideal[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for i in 0..n_agents - assigned {
            counts[order[i % n]] += 1;
        }
        let mut nodes = Vec::with_capacity(n_agents);
        let mut loads = Vec::with_capacity(n_agents);
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut slot = Vec::with_capacity(n_agents);
        for (i, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                let a = nodes.len() as u32;
                nodes.push(i as u32);
                loads.push(m0[i]);
                slot.push(buckets[i].len() as u32);
                buckets[i].push(a);
            }
        }
        Ok(Self {
            nodes,
            loads,
            n_nodes: n,
            total_mass,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buckets,
            slot,
            perm: (0..n_agents as u32).collect(),
            picked: Vec::new(),
        })
    }

    pub fn n_agents(&self) -> usize {
        self.loads.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn node_of(&self, agent: usize) -> usize {
        self.nodes[agent] as usize
    }

    fn binomial(&mut self, n: usize, p: f64) -> usize {
        if p <= 0.0 || n == 0 {
            return 0;
        }
        Binomial::new(n as u64, p.min(1.0)).expect("valid probability").sample(&mut self.rng)
            as usize
    }

    /// Uniform `k`-subset of all agents, into the `picked` scratch buffer.
    fn pick_global(&mut self, k: usize) {
        let n = self.perm.len();
        self.picked.clear();
        for j in 0..k {
            let r = self.rng.gen_range(j..n);
            self.perm.swap(j, r);
            self.picked.push(self.perm[j]);
        }
    }

    /// Uniform `k`-subset of one bucket, left shuffled in its first `k`
    /// slots (consecutive entries form the interaction pairs).
    fn pick_in_bucket(&mut self, node: usize, k: usize) {
        let len = self.buckets[node].len();
        for j in 0..k {
            let r = self.rng.gen_range(j..len);
            self.buckets[node].swap(j, r);
            let (a, b) = (self.buckets[node][j], self.buckets[node][r]);
            self.slot[a as usize] = j as u32;
            self.slot[b as usize] = r as u32;
        }
    }

    /// An odd pool would drop its last member, biasing the pair count low by
    /// `P(k odd)/2`; completing it with probability 1/2 against a uniform
    /// non-pool partner restores the exact expectation `n p / 2`.
    fn complete_odd_pool(&mut self, node: usize, k: usize) -> Option<(usize, usize)> {
        let members = self.buckets[node].len();
        if k % 2 == 0 || k >= members || !self.rng.gen::<bool>() {
            return None;
        }
        let partner = self.rng.gen_range(k..members);
        Some((self.buckets[node][k - 1] as usize, self.buckets[node][partner] as usize))
    }

    fn move_agent(&mut self, agent: usize, to: usize) {
        let from = self.nodes[agent] as usize;
        if from == to {
            return;
        }
        let s = self.slot[agent] as usize;
        self.buckets[from].swap_remove(s);
        if let Some(&moved) = self.buckets[from].get(s) {
            self.slot[moved as usize] = s as u32;
        }
        self.slot[agent] = self.buckets[to].len() as u32;
        self.buckets[to].push(agent as u32);
        self.nodes[agent] = to as u32;
    }

    /// Each agent independently redraws its node from the current node's
    /// column with probability `chi * dt`.
    pub fn step_migration(
        &mut self,
        p_eff: &TransitionMatrix,
        chi: f64,
        dt: f64,
    ) -> Result<(), McError> {
        if p_eff.n() != self.n_nodes {
            return Err(McError::DimensionMismatch {
                what: "matrix",
                expected: self.n_nodes,
                got: p_eff.n(),
            });
        }
        let jump_p = chi * dt;
        if jump_p > EVENT_PROBABILITY_GUARD {
            return Err(McError::StepTooLarge { process: "migration", probability: jump_p });
        }
        if jump_p == 0.0 {
            return Ok(());
        }
        let k = self.binomial(self.n_agents(), jump_p);
        if k == 0 {
            return Ok(());
        }
        let cdfs: Vec<Vec<f64>> = (0..self.n_nodes).map(|j| p_eff.column_cdf(j)).collect();
        self.pick_global(k);
        for idx in 0..k {
            let a = self.picked[idx] as usize;
            let cdf = &cdfs[self.nodes[a] as usize];
            let u = self.rng.gen::<f64>();
            let target = cdf.partition_point(|&c| c < u).min(self.n_nodes - 1);
            self.move_agent(a, target);
        }
        Ok(())
    }

    /// Symmetric binary exchange inside each node at frequency
    /// `mu (1 - u_mu_i) * local_mass`:
    /// `v' = (1 - nu1 + eta) v + nu2 v*` and symmetrically for the partner.
    pub fn step_exchange(
        &mut self,
        params: &ModelParams,
        u_mu: &[f64],
        noise: NoiseModel,
        dt: f64,
    ) -> Result<(), McError> {
        expect_variant(params, ModelVariant::Exchange)?;
        self.check_dims(params, u_mu, "u_mu")?;
        let max_nu1 = params.nu1.iter().copied().fold(0.0, f64::max);
        noise.check(1.0 - max_nu1)?;
        if params.mu == 0.0 || u_mu.iter().all(|&u| u >= 1.0) {
            return Ok(());
        }
        let n_agents = self.nodes.len() as f64;
        for i in 0..self.n_nodes {
            let members = self.buckets[i].len();
            let local_mass = members as f64 / n_agents * self.total_mass;
            let p_join = params.mu * (1.0 - u_mu[i]) * local_mass * dt;
            if p_join > EVENT_PROBABILITY_GUARD {
                return Err(McError::StepTooLarge { process: "exchange", probability: p_join });
            }
            if p_join <= 0.0 || members < 2 {
                continue;
            }
            let k = self.binomial(members, p_join);
            if k == 0 {
                continue;
            }
            self.pick_in_bucket(i, k);
            let mut j = 0;
            while j + 1 < k {
                let (a, b) =
                    (self.buckets[i][j] as usize, self.buckets[i][j + 1] as usize);
                let (va, vb) = (self.loads[a], self.loads[b]);
                let (ea, eb) = (noise.draw(&mut self.rng), noise.draw(&mut self.rng));
                self.loads[a] = (1.0 - params.nu1[i] + ea) * va + params.nu2[i] * vb;
                self.loads[b] = (1.0 - params.nu1[i] + eb) * vb + params.nu2[i] * va;
                j += 2;
            }
            if let Some((a, b)) = self.complete_odd_pool(i, k) {
                let (va, vb) = (self.loads[a], self.loads[b]);
                let (ea, eb) = (noise.draw(&mut self.rng), noise.draw(&mut self.rng));
                self.loads[a] = (1.0 - params.nu1[i] + ea) * va + params.nu2[i] * vb;
                self.loads[b] = (1.0 - params.nu1[i] + eb) * vb + params.nu2[i] * va;
            }
        }
        Ok(())
    }

    /// Infection (pairwise gain at frequency `sigma (1 - u_sigma_i) *
    /// local_mass`) followed by healing (each agent independently at
    /// frequency `gamma`):
    /// infection `v' = v + nu2 v* + eta' v`, healing `v'' = (1 - nu1 + eta'') v`.
    pub fn step_infection_healing(
        &mut self,
        params: &ModelParams,
        u_sigma: &[f64],
        noise: NoiseModel,
        dt: f64,
    ) -> Result<(), McError> {
        expect_variant(params, ModelVariant::InfectionHealing)?;
        self.check_dims(params, u_sigma, "u_sigma")?;
        let max_nu1 = params.nu1.iter().copied().fold(0.0, f64::max);
        noise.check((1.0 - max_nu1).min(1.0))?;
        let heal_p = params.gamma * dt;
        if heal_p > EVENT_PROBABILITY_GUARD {
            return Err(McError::StepTooLarge { process: "healing", probability: heal_p });
        }
        let n_agents = self.nodes.len() as f64;
        if params.sigma > 0.0 && u_sigma.iter().any(|&u| u < 1.0) {
            for i in 0..self.n_nodes {
                let members = self.buckets[i].len();
                let local_mass = members as f64 / n_agents * self.total_mass;
                let p_join = params.sigma * (1.0 - u_sigma[i]) * local_mass * dt;
                if p_join > EVENT_PROBABILITY_GUARD {
                    return Err(McError::StepTooLarge { process: "infection", probability: p_join });
                }
                if p_join <= 0.0 || members < 2 {
                    continue;
                }
                let k = self.binomial(members, p_join);
                if k == 0 {
                    continue;
                }
                self.pick_in_bucket(i, k);
                let mut j = 0;
                while j + 1 < k {
                    let (a, b) =
                        (self.buckets[i][j] as usize, self.buckets[i][j + 1] as usize);
                    let (va, vb) = (self.loads[a], self.loads[b]);
                    let (ea, eb) = (noise.draw(&mut self.rng), noise.draw(&mut self.rng));
                    self.loads[a] = va + params.nu2[i] * vb + ea * va;
                    self.loads[b] = vb + params.nu2[i] * va + eb * vb;
                    j += 2;
                }
                if let Some((a, b)) = self.complete_odd_pool(i, k) {
                    let (va, vb) = (self.loads[a], self.loads[b]);
                    let (ea, eb) = (noise.draw(&mut self.rng), noise.draw(&mut self.rng));
                    self.loads[a] = va + params.nu2[i] * vb + ea * va;
                    self.loads[b] = vb + params.nu2[i] * va + eb * vb;
                }
            }
        }
        if heal_p > 0.0 {
            let k = self.binomial(self.n_agents(), heal_p);
            if k > 0 {
                self.pick_global(k);
                for idx in 0..k {
                    let a = self.picked[idx] as usize;
                    let i = self.nodes[a] as usize;
                    let e = noise.draw(&mut self.rng);
                    self.loads[a] *= 1.0 - params.nu1[i] + e;
                }
            }
        }
        Ok(())
    }

    /// Empirical masses and first moments with their standard errors.
    pub fn moments(&self) -> MomentEstimate {
        let n = self.n_nodes;
        let n_agents = self.loads.len() as f64;
        let mut counts = vec![0usize; n];
        let mut sums = vec![0.0; n];
        let mut sq = vec![0.0; n];
        for (&node, &v) in self.nodes.iter().zip(&self.loads) {
            let i = node as usize;
            counts[i] += 1;
            sums[i] += v;
            sq[i] += v * v;
        }
        let scale = self.total_mass / n_agents;
        let rho: Vec<f64> = counts.iter().map(|&c| c as f64 * scale).collect();
        let mom: Vec<f64> = sums.iter().map(|&s| s * scale).collect();
        let rho_se = counts
            .iter()
            .map(|&c| {
                let p = c as f64 / n_agents;
                (p * (1.0 - p) / n_agents).sqrt() * self.total_mass
            })
            .collect();
        // Treat x_a = v_a * [agent a in node i]: its sample deviation over
        // the whole ensemble gives the error of the moment estimate.
        let mom_se = (0..n)
            .map(|i| {
                let ex = sums[i] / n_agents;
                let exx = sq[i] / n_agents;
                let var = (exx - ex * ex).max(0.0);
                (var / n_agents).sqrt() * self.total_mass
            })
            .collect();
        let mean = (0..n)
            .map(|i| if counts[i] > 0 { Some(sums[i] / counts[i] as f64) } else { None })
            .collect();
        let mean_se = (0..n)
            .map(|i| {
                if counts[i] > 1 {
                    let c = counts[i] as f64;
                    let m = sums[i] / c;
                    let var = ((sq[i] - c * m * m) / (c - 1.0)).max(0.0);
                    Some((var / c).sqrt())
                } else {
                    None
                }
            })
            .collect();
        MomentEstimate { rho, mom, mean, rho_se, mom_se, mean_se }
    }

    fn check_dims(&self, params: &ModelParams, u: &[f64], what: &'static str) -> Result<(), McError> {
        if params.n() != self.n_nodes {
            return Err(McError::DimensionMismatch {
                what: "params",
                expected: self.n_nodes,
                got: params.n(),
            });
        }
        if u.len() != self.n_nodes {
            return Err(McError::DimensionMismatch { what, expected: self.n_nodes, got: u.len() });
        }
        Ok(())
    }
}

/// Sampled output of a particle run.
#[derive(Debug, Clone)]
pub struct McRun {
    pub times: Vec<f64>,
    pub estimates: Vec<MomentEstimate>,
    pub controls: Vec<crate::control::ControlSignal>,
}

/// Advances an ensemble to `t_end` with the first-order splitting
/// migrate / interact (/ heal), recording empirical moments on the sampling
/// grid. Feedback controls are evaluated once per step on the empirical
/// moments and the controlled matrix drives that step's migration.
pub fn simulate_ensemble<C: crate::control::ControlLaw>(
    p: &TransitionMatrix,
    params: &ModelParams,
    law: &C,
    ens: &mut ParticleEnsemble,
    noise: NoiseModel,
    cfg: &crate::integrate::IntegrationConfig,
) -> Result<McRun, McError> {
    use crate::dynamics::MacroState;

    let n_steps = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let inert = law.inert();
    let mut run = McRun { times: Vec::new(), estimates: Vec::new(), controls: Vec::new() };
    for step in 0..=n_steps {
        let t = step as f64 * cfg.dt;
        let record = step % cfg.record_every == 0 || step == n_steps;
        // An inert law never looks at the state; skip the O(N) moment pass
        // except at recording times.
        let sig = if inert {
            if record {
                run.times.push(t);
                run.estimates.push(ens.moments());
                run.controls.push(crate::control::ControlSignal::zero(ens.n_nodes(), t));
            }
            crate::control::ControlSignal::zero(ens.n_nodes(), t)
        } else {
            let est = ens.moments();
            let state = MacroState { rho: est.rho.clone(), mom: est.mom.clone(), t };
            let (sig, _) = law.eval(&state, p);
            if record {
                run.times.push(t);
                run.estimates.push(est);
                run.controls.push(sig.clone());
            }
            sig
        };
        if step == n_steps {
            break;
        }
        let controlled;
        let p_eff = if sig.u_chi.iter().all(|&u| u == 0.0) {
            p
        } else {
            controlled = p.controlled(&sig.u_chi).map_err(|_| McError::BadInitialState {
                msg: "control outside [0,1]".into(),
            })?;
            &controlled
        };
        ens.step_migration(p_eff, params.chi, cfg.dt)?;
        match params.variant {
            ModelVariant::Exchange => {
                ens.step_exchange(params, &sig.u_interaction, noise, cfg.dt)?
            }
            ModelVariant::InfectionHealing => {
                ens.step_infection_healing(params, &sig.u_interaction, noise, cfg.dt)?
            }
        }
    }
    Ok(run)
}

/// Empirical macroscopic estimates with per-node standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub rho: Vec<f64>,
    pub mom: Vec<f64>,
    pub mean: Vec<Option<f64>>,
    pub rho_se: Vec<f64>,
    pub mom_se: Vec<f64>,
    pub mean_se: Vec<Option<f64>>,
}

fn expect_variant(params: &ModelParams, expected: ModelVariant) -> Result<(), McError> {
    if params.variant == expected {
        Ok(())
    } else {
        Err(McError::WrongVariant { expected, got: params.variant })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::five_node;

    #[test]
    fn from_macro_reproduces_the_initial_moments() {
        let ens =
            ParticleEnsemble::from_macro(&five_node::RHO0, &five_node::M0, 10_000, 1).unwrap();
        let est = ens.moments();
        for i in 0..5 {
            assert!((est.rho[i] - five_node::RHO0[i]).abs() < 1e-4);
            assert!((est.mean[i].unwrap() - five_node::M0[i]).abs() < 1e-12);
        }
        assert_eq!(ens.n_agents(), 10_000);
    }

    #[test]
    fn moments_of_tiny_ensembles() {
        // All agents in node 1 with load 2.
        let ens = ParticleEnsemble::from_macro(&[1.0, 0.0], &[2.0, 0.0], 8, 3).unwrap();
        let est = ens.moments();
        assert_eq!(est.rho, vec![1.0, 0.0]);
        assert_eq!(est.mean[0], Some(2.0));
        assert_eq!(est.mean[1], None);
        // Two agents with loads 0 and 4 average to 2.
        let mut ens = ParticleEnsemble::from_macro(&[1.0], &[2.0], 2, 3).unwrap();
        ens.loads[0] = 0.0;
        ens.loads[1] = 4.0;
        let est = ens.moments();
        assert_eq!(est.mean[0], Some(2.0));
    }

    #[test]
    fn bucket_bookkeeping_survives_moves() {
        let p = five_node::matrix();
        let mut ens =
            ParticleEnsemble::from_macro(&five_node::RHO0, &five_node::M0, 5000, 13).unwrap();
        for _ in 0..50 {
            ens.step_migration(&p, 1.0, 0.05).unwrap();
        }
        // Buckets and node labels must agree exactly.
        let mut counted = 0;
        for (i, bucket) in ens.buckets.iter().enumerate() {
            for &a in bucket {
                assert_eq!(ens.nodes[a as usize] as usize, i);
                assert_eq!(ens.buckets[i][ens.slot[a as usize] as usize], a);
                counted += 1;
            }
        }
        assert_eq!(counted, ens.n_agents());
    }

    #[test]
    fn no_migration_without_rate_or_with_identity() {
        let p = five_node::matrix();
        let mut ens =
            ParticleEnsemble::from_macro(&five_node::RHO0, &five_node::M0, 1000, 7).unwrap();
        let before = ens.nodes.clone();
        ens.step_migration(&p, 0.0, 0.01).unwrap();
        assert_eq!(ens.nodes, before);
        let id = TransitionMatrix::identity(5);
        ens.step_migration(&id, 1.0, 0.01).unwrap();
        assert_eq!(ens.nodes, before);
    }

    #[test]
    fn step_guards_reject_large_probabilities() {
        let p = five_node::matrix();
        let mut ens =
            ParticleEnsemble::from_macro(&five_node::RHO0, &five_node::M0, 100, 7).unwrap();
        assert!(matches!(
            ens.step_migration(&p, 1.0, 0.2),
            Err(McError::StepTooLarge { process: "migration", .. })
        ));
        let params = ModelParams::exchange(vec![0.25; 5], vec![0.8; 5], 1.0, 50.0).unwrap();
        assert!(matches!(
            ens.step_exchange(&params, &[0.0; 5], NoiseModel::None, 0.01),
            Err(McError::StepTooLarge { process: "exchange", .. })
        ));
    }

    #[test]
    fn neutral_exchange_conserves_pair_totals() {
        let params = ModelParams::exchange(vec![0.5; 2], vec![0.5; 2], 1.0, 1.0).unwrap();
        let mut ens = ParticleEnsemble::from_macro(&[0.5, 0.5], &[2.0, 1.0], 10_000, 11).unwrap();
        let total0: f64 = ens.loads.iter().sum();
        for _ in 0..200 {
            ens.step_exchange(&params, &[0.0, 0.0], NoiseModel::None, 0.05).unwrap();
        }
        let total: f64 = ens.loads.iter().sum();
        assert!((total - total0).abs() < 1e-9 * total0, "{total} vs {total0}");
        assert!(ens.loads.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn full_interaction_control_freezes_loads() {
        let params = ModelParams::exchange(vec![0.25; 5], vec![0.8; 5], 1.0, 1.0).unwrap();
        let mut ens =
            ParticleEnsemble::from_macro(&five_node::RHO0, &five_node::M0, 1000, 5).unwrap();
        let before = ens.loads.clone();
        ens.step_exchange(&params, &[1.0; 5], NoiseModel::None, 0.05).unwrap();
        assert_eq!(ens.loads, before);
    }

    #[test]
    fn gain_only_and_heal_all_extremes() {
        // gamma = 0, zero noise: loads never decrease.
        let params = ModelParams::infection_healing(vec![0.5; 2], vec![0.5; 2], 1.0, 1.0, 0.0).unwrap();
        let mut ens = ParticleEnsemble::from_macro(&[0.6, 0.4], &[1.0, 2.0], 2000, 9).unwrap();
        let before = ens.loads.clone();
        for _ in 0..50 {
            ens.step_infection_healing(&params, &[0.0; 2], NoiseModel::None, 0.05).unwrap();
        }
        for (v, b) in ens.loads.iter().zip(&before) {
            assert!(v >= b);
        }
        // sigma = 0, nu1 = 1: a healing event zeroes the load; eventually all do.
        let params = ModelParams::infection_healing(vec![1.0; 2], vec![0.5; 2], 1.0, 0.0, 1.0).unwrap();
        for _ in 0..2000 {
            ens.step_infection_healing(&params, &[0.0; 2], NoiseModel::None, 0.05).unwrap();
        }
        assert!(ens.loads.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_reproduces_bit_identical_trajectories() {
        let p = five_node::matrix();
        let params = ModelParams::exchange(
            five_node::NU1_EXCHANGE.to_vec(),
            five_node::NU2_EXCHANGE.to_vec(),
            1.0,
            1.0,
        )
        .unwrap();
        let run = || {
            let mut ens =
                ParticleEnsemble::from_macro(&five_node::RHO0, &five_node::M0, 2000, 42).unwrap();
            for _ in 0..100 {
                ens.step_migration(&p, 1.0, 0.02).unwrap();
                ens.step_exchange(&params, &[0.0; 5], NoiseModel::Uniform { amplitude: 0.2 }, 0.02)
                    .unwrap();
            }
            ens.moments()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_amplitude_is_validated_against_the_rules() {
        let params = ModelParams::exchange(vec![0.25; 5], vec![0.8; 5], 1.0, 1.0).unwrap();
        let mut ens =
            ParticleEnsemble::from_macro(&five_node::RHO0, &five_node::M0, 100, 7).unwrap();
        assert!(matches!(
            ens.step_exchange(&params, &[0.0; 5], NoiseModel::Uniform { amplitude: 0.8 }, 0.01),
            Err(McError::BadNoise { .. })
        ));
        assert!(ens
            .step_exchange(&params, &[0.0; 5], NoiseModel::Uniform { amplitude: 0.74 }, 0.01)
            .is_ok());
        assert!(ens.loads.iter().all(|&v| v >= 0.0));
    }
}
