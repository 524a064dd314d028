//! Payoffs of the one-shot collective risk dilemma.
//!
//! A group of `N` players each either pays `c·b` (cooperate) or nothing
//! (defect). If fewer than `M` players cooperate, everyone loses what is left
//! of their endowment with probability `r`. In hybrid groups `a` of the `N`
//! seats are taken by fixed agents who, with probability `p`, all cooperate
//! together and otherwise all defect.

use serde::{Deserialize, Serialize};

use crate::error::{CrdError, Result};

/// One instance of the dilemma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    group_size: u32,
    threshold: u32,
    risk: f64,
    endowment: f64,
    cost_fraction: f64,
}

impl GameParams {
    pub fn new(
        group_size: u32,
        threshold: u32,
        risk: f64,
        endowment: f64,
        cost_fraction: f64,
    ) -> Result<Self> {
        if group_size == 0 {
            return Err(CrdError::Config("group size N must be positive".into()));
        }
        if threshold == 0 || threshold > group_size {
            return Err(CrdError::Config(format!(
                "threshold M={threshold} must satisfy 1 <= M <= N={group_size}"
            )));
        }
        check_probability("risk r", risk)?;
        check_probability("cost fraction c", cost_fraction)?;
        if !(endowment > 0.0 && endowment.is_finite()) {
            return Err(CrdError::Config(format!(
                "endowment b={endowment} must be positive"
            )));
        }
        Ok(Self {
            group_size,
            threshold,
            risk,
            endowment,
            cost_fraction,
        })
    }

    pub fn group_size(&self) -> u32 {
        self.group_size
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn risk(&self) -> f64 {
        self.risk
    }

    pub fn endowment(&self) -> f64 {
        self.endowment
    }

    pub fn cost_fraction(&self) -> f64 {
        self.cost_fraction
    }

    /// Contribution paid by a cooperator, `c·b`.
    pub fn cost(&self) -> f64 {
        self.cost_fraction * self.endowment
    }
}

/// The fixed agents seated in every group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridPolicy {
    agent_count: u32,
    coop_probability: f64,
}

impl HybridPolicy {
    /// `agent_count` must leave at least one adaptive seat in a group of `game`.
    pub fn new(agent_count: u32, coop_probability: f64, game: &GameParams) -> Result<Self> {
        if agent_count >= game.group_size {
            return Err(CrdError::Config(format!(
                "agent count a={agent_count} must be at most N-1={} (no adaptive slot left)",
                game.group_size - 1
            )));
        }
        check_probability("cooperation probability p", coop_probability)?;
        Ok(Self {
            agent_count,
            coop_probability,
        })
    }

    /// Groups made only of adaptive players.
    pub fn none() -> Self {
        Self {
            agent_count: 0,
            coop_probability: 0.0,
        }
    }

    pub fn agent_count(&self) -> u32 {
        self.agent_count
    }

    pub fn coop_probability(&self) -> f64 {
        self.coop_probability
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Cooperate,
    Defect,
}

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(CrdError::Config(format!("{name}={value} must lie in [0, 1]")))
    }
}

/// Unit step with `θ(0) = 1`.
pub fn heaviside(x: i64) -> u8 {
    u8::from(x >= 0)
}

/// Payoff of a defector in a group holding `cooperators` cooperators.
pub fn payoff_defector(cooperators: u32, game: &GameParams) -> Result<f64> {
    if cooperators > game.group_size {
        return Err(CrdError::Domain(format!(
            "cooperator count j={cooperators} exceeds group size N={}",
            game.group_size
        )));
    }
    Ok(defector_payoff_unchecked(cooperators, game))
}

/// Payoff of a cooperator; `cooperators` includes the focal player.
pub fn payoff_cooperator(cooperators: u32, game: &GameParams) -> Result<f64> {
    if cooperators == 0 {
        return Err(CrdError::Domain(
            "a cooperator cannot be in a group with zero cooperators".into(),
        ));
    }
    Ok(payoff_defector(cooperators, game)? - game.cost())
}

fn defector_payoff_unchecked(cooperators: u32, game: &GameParams) -> f64 {
    let met = heaviside(i64::from(cooperators) - i64::from(game.threshold));
    game.endowment * (1.0 - game.risk + game.risk * f64::from(met))
}

fn payoff_unchecked(strategy: Strategy, cooperators: u32, game: &GameParams) -> f64 {
    match strategy {
        Strategy::Defect => defector_payoff_unchecked(cooperators, game),
        Strategy::Cooperate => defector_payoff_unchecked(cooperators, game) - game.cost(),
    }
}

/// Expected payoff in a hybrid group where `adaptive_cooperators` of the
/// `N - a` adaptive members cooperate (the focal player included when it
/// plays C). The `a` fixed agents add `a` cooperators with probability `p`
/// and none otherwise.
pub fn expected_payoff(
    strategy: Strategy,
    adaptive_cooperators: u32,
    hybrid: &HybridPolicy,
    game: &GameParams,
) -> Result<f64> {
    let adaptive_seats = game.group_size.saturating_sub(hybrid.agent_count);
    if adaptive_cooperators > adaptive_seats {
        return Err(CrdError::Domain(format!(
            "adaptive cooperator count i={adaptive_cooperators} exceeds N-a={adaptive_seats}"
        )));
    }
    if strategy == Strategy::Cooperate && adaptive_cooperators == 0 {
        return Err(CrdError::Domain(
            "a cooperator cannot be in a group with zero adaptive cooperators".into(),
        ));
    }
    Ok(expected_payoff_unchecked(
        strategy,
        adaptive_cooperators,
        hybrid,
        game,
    ))
}

pub(crate) fn expected_payoff_unchecked(
    strategy: Strategy,
    adaptive_cooperators: u32,
    hybrid: &HybridPolicy,
    game: &GameParams,
) -> f64 {
    let p = hybrid.coop_probability;
    let with_agents = payoff_unchecked(strategy, adaptive_cooperators + hybrid.agent_count, game);
    let without = payoff_unchecked(strategy, adaptive_cooperators, game);
    p * with_agents + (1.0 - p) * without
}
