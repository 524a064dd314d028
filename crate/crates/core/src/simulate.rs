//! Monte Carlo counterparts of the analytic pipeline.
//!
//! [`simulate_chain`] samples the birth–death process directly from `T±`.
//! [`simulate_agents`] keeps `Z` explicit strategy labels and replays the
//! imitation story: random focal and partner, payoffs from freshly drawn
//! groups, all-or-none coin flip for the fixed agents. Both are sequential
//! and fully determined by the seed.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{imitation_probability, FitnessTable, PopulationModel};
use crate::error::{CrdError, Result};
use crate::game::{payoff_cooperator, payoff_defector, Strategy};

/// Name of the generator recorded in every simulation artifact.
pub const GENERATOR: &str = "ChaCha8Rng";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: PopulationModel,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Groups sampled per fitness estimate in the agent-based simulator.
    pub group_samples: u32,
}

impl SimulationConfig {
    pub fn new(
        model: PopulationModel,
        steps: u64,
        burn_in: u64,
        seed: u64,
        group_samples: u32,
    ) -> Result<Self> {
        let cfg = Self {
            model,
            steps,
            burn_in,
            seed,
            group_samples,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Burn-in of 1% of the steps.
    pub fn with_default_burn_in(model: PopulationModel, steps: u64, seed: u64) -> Result<Self> {
        Self::new(model, steps, steps / 100, seed, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(CrdError::Config("steps must be positive".into()));
        }
        if self.burn_in >= self.steps {
            return Err(CrdError::Config(format!(
                "burn-in {} must be smaller than steps {}",
                self.burn_in, self.steps
            )));
        }
        if self.group_samples == 0 {
            return Err(CrdError::Config("group samples G must be at least 1".into()));
        }
        Ok(())
    }
}

/// Visit frequencies of `k = 0..=Z` after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub occupancy: Vec<f64>,
    pub steps_counted: u64,
    pub seed: u64,
    pub generator: String,
}

impl EmpiricalDistribution {
    fn from_counts(counts: &[u64], seed: u64) -> Self {
        let total: u64 = counts.iter().sum();
        Self {
            occupancy: counts.iter().map(|&c| c as f64 / total as f64).collect(),
            steps_counted: total,
            seed,
            generator: GENERATOR.to_string(),
        }
    }
}

/// Half the L1 distance between two distributions.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Samples the cooperator count from the exact `T±` rates, starting at `⌊Z/2⌋`.
pub fn simulate_chain(cfg: &SimulationConfig) -> Result<EmpiricalDistribution> {
    cfg.validate()?;
    let m = &cfg.model;
    if m.mutation_rate() == 0.0 {
        return Err(CrdError::Reducible("mutation rate mu = 0".into()));
    }
    let table = FitnessTable::new(m);
    let rates: Vec<(f64, f64)> = (0..=m.population_size()).map(|k| table.rates(k, m)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = vec![0u64; rates.len()];
    let mut k = m.population_size() as usize / 2;
    for step in 0..cfg.steps {
        let (up, down) = rates[k];
        let u: f64 = rng.gen();
        if u < up {
            k += 1;
        } else if u < up + down {
            k -= 1;
        }
        if step >= cfg.burn_in {
            counts[k] += 1;
        }
    }
    Ok(EmpiricalDistribution::from_counts(&counts, cfg.seed))
}

/// Explicit population of strategy labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentPopulation {
    cooperates: Vec<bool>,
    cooperators: u32,
}

impl AgentPopulation {
    /// The first `k` of `z` individuals cooperate.
    pub fn with_cooperators(z: u32, k: u32) -> Self {
        let k = k.min(z);
        Self {
            cooperates: (0..z).map(|i| i < k).collect(),
            cooperators: k,
        }
    }

    pub fn size(&self) -> u32 {
        self.cooperates.len() as u32
    }

    pub fn cooperators(&self) -> u32 {
        self.cooperators
    }

    pub fn strategy(&self, individual: usize) -> Strategy {
        if self.cooperates[individual] {
            Strategy::Cooperate
        } else {
            Strategy::Defect
        }
    }

    fn set(&mut self, individual: usize, cooperate: bool) {
        if self.cooperates[individual] != cooperate {
            self.cooperates[individual] = cooperate;
            if cooperate {
                self.cooperators += 1;
            } else {
                self.cooperators -= 1;
            }
        }
    }

    /// Mean payoff of `focal` over `samples` freshly drawn groups, and the
    /// standard error of that mean.
    ///
    /// Each group holds the focal, `N − a − 1` co-players drawn without
    /// replacement from the other `Z − 1` individuals and the `a` fixed
    /// agents, who all cooperate together with probability `p`.
    pub fn estimate_fitness<R: Rng + ?Sized>(
        &self,
        focal: usize,
        m: &PopulationModel,
        samples: u32,
        rng: &mut R,
    ) -> (f64, f64) {
        let others = self.cooperates.len() - 1;
        let partners = m.adaptive_seats() as usize - 1;
        let own = self.cooperates[focal];
        let mut stats = RunningMean::default();
        for _ in 0..samples {
            let mut cooperators = u32::from(own);
            for idx in index::sample(rng, others, partners) {
                let who = if idx >= focal { idx + 1 } else { idx };
                cooperators += u32::from(self.cooperates[who]);
            }
            stats.push(group_payoff(own, cooperators, m, rng));
        }
        stats.finish()
    }
}

fn group_payoff<R: Rng + ?Sized>(
    focal_cooperates: bool,
    adaptive_cooperators: u32,
    m: &PopulationModel,
    rng: &mut R,
) -> f64 {
    let hybrid = m.hybrid();
    let agents_cooperate = rng.gen_bool(hybrid.coop_probability());
    let total = adaptive_cooperators + if agents_cooperate { hybrid.agent_count() } else { 0 };
    let payoff = if focal_cooperates {
        payoff_cooperator(total, m.game())
    } else {
        payoff_defector(total, m.game())
    };
    payoff.expect("group composition is within the game's bounds")
}

#[derive(Debug, Default)]
struct RunningMean {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMean {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Mean and standard error; the error is zero for a single sample.
    fn finish(&self) -> (f64, f64) {
        if self.n < 2 {
            return (self.mean, 0.0);
        }
        let variance = self.m2 / (self.n - 1) as f64;
        (self.mean, (variance / self.n as f64).sqrt())
    }
}

/// Agent-based run: one focal update per step, starting at `⌊Z/2⌋` cooperators.
pub fn simulate_agents(cfg: &SimulationConfig) -> Result<EmpiricalDistribution> {
    cfg.validate()?;
    let m = &cfg.model;
    let z = m.population_size();
    if z < m.adaptive_seats() {
        return Err(CrdError::Config(format!(
            "population size Z={z} cannot fill the N-a={} adaptive seats",
            m.adaptive_seats()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut population = AgentPopulation::with_cooperators(z, z / 2);
    let mut counts = vec![0u64; z as usize + 1];
    let size = z as usize;
    for step in 0..cfg.steps {
        let focal = rng.gen_range(0..size);
        let own = population.cooperates[focal];
        if rng.gen::<f64>() < m.mutation_rate() {
            population.set(focal, !own);
        } else {
            let mut partner = rng.gen_range(0..size - 1);
            if partner >= focal {
                partner += 1;
            }
            let theirs = population.cooperates[partner];
            if theirs != own {
                let (f_self, _) = population.estimate_fitness(focal, m, cfg.group_samples, &mut rng);
                let (f_other, _) =
                    population.estimate_fitness(partner, m, cfg.group_samples, &mut rng);
                let adopt = imitation_probability(f_other - f_self, m.selection_strength());
                if rng.gen::<f64>() < adopt {
                    population.set(focal, theirs);
                }
            }
        }
        if step >= cfg.burn_in {
            counts[population.cooperators() as usize] += 1;
        }
    }
    Ok(EmpiricalDistribution::from_counts(&counts, cfg.seed))
}

/// Monte Carlo estimate of the fitness of `strategy` in state `k` from
/// `samples` hypergeometric group draws. Returns the mean and its standard error.
pub fn estimate_fitness_sampled(
    k: u32,
    strategy: Strategy,
    m: &PopulationModel,
    samples: u32,
    seed: u64,
) -> Result<(f64, f64)> {
    let z = m.population_size();
    let valid = match strategy {
        Strategy::Cooperate => (1..=z).contains(&k),
        Strategy::Defect => k < z,
    };
    if !valid {
        return Err(CrdError::Domain(format!(
            "no {strategy:?} player exists in state k={k} of a population of {z}"
        )));
    }
    if samples == 0 {
        return Err(CrdError::Domain("samples must be positive".into()));
    }
    let focal_cooperates = strategy == Strategy::Cooperate;
    // the urn the co-players are drawn from
    let (urn_c, urn_d) = if focal_cooperates { (k - 1, z - k) } else { (k, z - k - 1) };
    let partners = m.adaptive_seats() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = RunningMean::default();
    for _ in 0..samples {
        let (mut c_left, mut d_left) = (urn_c, urn_d);
        let mut cooperators = u32::from(focal_cooperates);
        for _ in 0..partners {
            let draw = rng.gen_range(0..c_left + d_left);
            if draw < c_left {
                c_left -= 1;
                cooperators += 1;
            } else {
                d_left -= 1;
            }
        }
        stats.push(group_payoff(focal_cooperates, cooperators, m, &mut rng));
    }
    Ok(stats.finish())
}
