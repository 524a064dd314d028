//! Social learning in the adaptive population.
//!
//! Fitness is the payoff of a strategy averaged over every way of drawing
//! the other `N - a - 1` adaptive group members from the remaining `Z - 1`
//! individuals. Strategies spread by pairwise imitation through a Fermi
//! function, with mutation to the opposite strategy at rate `mu`.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{CrdError, Result};
use crate::game::{check_probability, expected_payoff_unchecked, GameParams, HybridPolicy, Strategy};

/// Form of the birth–death rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionForm {
    /// Mutation enters additively next to the imitation term, so every
    /// state can be left and the chain is irreducible for `mu > 0`.
    #[default]
    Corrected,
    /// Imitation term only. `k = 0` and `k = Z` are absorbing; kept for
    /// inspection of the printed rates.
    Literal,
}

/// Adaptive population of `Z` social learners playing in hybrid groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationModel {
    population_size: u32,
    mutation_rate: f64,
    selection_strength: f64,
    game: GameParams,
    hybrid: HybridPolicy,
    #[serde(default)]
    transition_form: TransitionForm,
}

impl PopulationModel {
    pub fn new(
        population_size: u32,
        mutation_rate: f64,
        selection_strength: f64,
        game: GameParams,
        hybrid: HybridPolicy,
    ) -> Result<Self> {
        if population_size < 2 {
            return Err(CrdError::Config(format!(
                "population size Z={population_size} must be at least 2"
            )));
        }
        if hybrid.agent_count() >= game.group_size() {
            return Err(CrdError::Config(format!(
                "agent count a={} must be at most N-1={}",
                hybrid.agent_count(),
                game.group_size() - 1
            )));
        }
        let adaptive = game.group_size() - hybrid.agent_count();
        if population_size < adaptive {
            return Err(CrdError::Config(format!(
                "population size Z={population_size} is smaller than the N-a={adaptive} adaptive seats of a group"
            )));
        }
        check_probability("mutation rate mu", mutation_rate)?;
        if !(selection_strength >= 0.0 && selection_strength.is_finite()) {
            return Err(CrdError::Config(format!(
                "selection strength beta={selection_strength} must be finite and non-negative"
            )));
        }
        Ok(Self {
            population_size,
            mutation_rate,
            selection_strength,
            game,
            hybrid,
            transition_form: TransitionForm::Corrected,
        })
    }

    pub fn with_transition_form(mut self, form: TransitionForm) -> Self {
        self.transition_form = form;
        self
    }

    pub fn population_size(&self) -> u32 {
        self.population_size
    }

    pub fn mutation_rate(&self) -> f64 {
        self.mutation_rate
    }

    pub fn selection_strength(&self) -> f64 {
        self.selection_strength
    }

    pub fn game(&self) -> &GameParams {
        &self.game
    }

    pub fn hybrid(&self) -> &HybridPolicy {
        &self.hybrid
    }

    pub fn transition_form(&self) -> TransitionForm {
        self.transition_form
    }

    /// Number of adaptive seats in a group, `N - a`.
    pub fn adaptive_seats(&self) -> u32 {
        self.game.group_size() - self.hybrid.agent_count()
    }

    fn check_state(&self, k: u32) -> Result<()> {
        if k > self.population_size {
            return Err(CrdError::Domain(format!(
                "state k={k} exceeds population size Z={}",
                self.population_size
            )));
        }
        Ok(())
    }
}

/// `ln C(n, r)`, or negative infinity when `r` lies outside `0..=n`.
pub fn log_binomial(n: u64, r: i64) -> f64 {
    if r < 0 || r as u64 > n {
        return f64::NEG_INFINITY;
    }
    let r = r as u64;
    ln_factorial(n) - ln_factorial(r) - ln_factorial(n - r)
}

/// Probability of `hits` marked items when drawing `draws` items without
/// replacement from `total` items of which `marked` are marked.
pub fn hypergeometric_weight(total: u64, marked: u64, draws: u64, hits: i64) -> f64 {
    let ln = log_binomial(marked, hits)
        + log_binomial(total - marked.min(total), draws as i64 - hits)
        - log_binomial(total, draws as i64);
    if ln == f64::NEG_INFINITY {
        0.0
    } else {
        ln.exp()
    }
}

/// Fitness of a cooperator when `k` cooperators are present. Zero at `k = 0`.
pub fn fitness_cooperator(k: u32, m: &PopulationModel) -> Result<f64> {
    m.check_state(k)?;
    Ok(cooperator_fitness_unchecked(k, m))
}

/// Fitness of a defector when `k` cooperators are present. Zero at `k = Z`.
pub fn fitness_defector(k: u32, m: &PopulationModel) -> Result<f64> {
    m.check_state(k)?;
    Ok(defector_fitness_unchecked(k, m))
}

fn cooperator_fitness_unchecked(k: u32, m: &PopulationModel) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let z = u64::from(m.population_size);
    let partners = u64::from(m.adaptive_seats() - 1);
    // Co-players come from the Z-1 others, k-1 of whom cooperate.
    weighted_mean((0..=partners).map(|i| {
        let w = hypergeometric_weight(z - 1, u64::from(k) - 1, partners, i as i64);
        (w, move || expected_payoff_unchecked(Strategy::Cooperate, i as u32 + 1, &m.hybrid, &m.game))
    }))
}

fn defector_fitness_unchecked(k: u32, m: &PopulationModel) -> f64 {
    if k == m.population_size {
        return 0.0;
    }
    let z = u64::from(m.population_size);
    let partners = u64::from(m.adaptive_seats() - 1);
    weighted_mean((0..=partners).map(|i| {
        let w = hypergeometric_weight(z - 1, u64::from(k), partners, i as i64);
        (w, move || expected_payoff_unchecked(Strategy::Defect, i as u32, &m.hybrid, &m.game))
    }))
}

/// `Σ w·v / Σ w`, skipping zero-weight terms. Dividing by the computed
/// weight total keeps a constant integrand exact.
pub(crate) fn weighted_mean<F: FnOnce() -> f64>(terms: impl Iterator<Item = (f64, F)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (w, value) in terms {
        if w > 0.0 {
            num += w * value();
            den += w;
        }
    }
    num / den
}

/// Fermi imitation probability `1 / (1 + exp(-beta * delta))`, where
/// `delta` is the fitness of the imitated player minus the focal's.
pub fn imitation_probability(delta: f64, beta: f64) -> f64 {
    let x = beta * delta;
    if x.is_nan() {
        // beta = 0 with an infinite delta
        return 0.5;
    }
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cooperator and defector fitness for every state of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessTable {
    cooperator: Vec<f64>,
    defector: Vec<f64>,
}

impl FitnessTable {
    pub fn new(m: &PopulationModel) -> Self {
        let states = 0..=m.population_size;
        Self {
            cooperator: states.clone().map(|k| cooperator_fitness_unchecked(k, m)).collect(),
            defector: states.map(|k| defector_fitness_unchecked(k, m)).collect(),
        }
    }

    pub fn cooperator(&self) -> &[f64] {
        &self.cooperator
    }

    pub fn defector(&self) -> &[f64] {
        &self.defector
    }

    /// `(T+(k), T-(k))` from the cached fitness values.
    pub fn rates(&self, k: u32, m: &PopulationModel) -> (f64, f64) {
        let idx = k as usize;
        rates_from_fitness(k, self.cooperator[idx], self.defector[idx], m)
    }
}

fn rates_from_fitness(k: u32, f_c: f64, f_d: f64, m: &PopulationModel) -> (f64, f64) {
    let z = f64::from(m.population_size);
    let kf = f64::from(k);
    let mu = m.mutation_rate;
    let beta = m.selection_strength;
    let mutation = match m.transition_form {
        TransitionForm::Corrected => mu,
        TransitionForm::Literal => 0.0,
    };
    let up = if k == m.population_size {
        0.0
    } else {
        let adopt = imitation_probability(f_c - f_d, beta);
        (z - kf) / z * ((1.0 - mu) * (kf / (z - 1.0)) * adopt + mutation)
    };
    let down = if k == 0 {
        0.0
    } else {
        let adopt = imitation_probability(f_d - f_c, beta);
        kf / z * ((1.0 - mu) * ((z - kf) / (z - 1.0)) * adopt + mutation)
    };
    (up, down)
}

/// Probability that the number of cooperators rises by one in a single step.
pub fn transition_up(k: u32, m: &PopulationModel) -> Result<f64> {
    m.check_state(k)?;
    let f_c = cooperator_fitness_unchecked(k, m);
    let f_d = defector_fitness_unchecked(k, m);
    Ok(rates_from_fitness(k, f_c, f_d, m).0)
}

/// Probability that the number of cooperators falls by one in a single step.
pub fn transition_down(k: u32, m: &PopulationModel) -> Result<f64> {
    m.check_state(k)?;
    let f_c = cooperator_fitness_unchecked(k, m);
    let f_d = defector_fitness_unchecked(k, m);
    Ok(rates_from_fitness(k, f_c, f_d, m).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use super::Strategy;
    use proptest::strategy::Strategy as _;

    fn model(
        z: u32,
        mu: f64,
        beta: f64,
        (n, m, r, c): (u32, u32, f64, f64),
        a: u32,
        p: f64,
    ) -> PopulationModel {
        let g = GameParams::new(n, m, r, 1.0, c).unwrap();
        let h = HybridPolicy::new(a, p, &g).unwrap();
        PopulationModel::new(z, mu, beta, g, h).unwrap()
    }

    #[test]
    fn log_binomial_examples() {
        assert!((log_binomial(5, 2) - 10f64.ln()).abs() < 1e-14);
        assert_eq!(log_binomial(5, 7), f64::NEG_INFINITY);
        assert_eq!(log_binomial(5, -1), f64::NEG_INFINITY);
        assert_eq!(log_binomial(0, 0), 0.0);
        // far beyond u128 factorial range
        let ln = log_binomial(10_000, 5_000);
        assert!(ln.is_finite() && ln > 6000.0);
    }

    #[test]
    fn model_validation() {
        let g = GameParams::new(6, 3, 0.5, 1.0, 0.1).unwrap();
        let h = HybridPolicy::new(1, 0.5, &g).unwrap();
        assert!(PopulationModel::new(1, 0.01, 2.0, g, h).is_err());
        assert!(PopulationModel::new(4, 0.01, 2.0, g, h).is_err());
        assert!(PopulationModel::new(5, 0.01, 2.0, g, h).is_ok());
        assert!(PopulationModel::new(100, 0.01, -1.0, g, h).is_err());
        assert!(PopulationModel::new(100, 1.01, 2.0, g, h).is_err());
    }

    #[test]
    fn fitness_boundary_examples() {
        let m = model(20, 0.01, 2.0, (6, 3, 0.5, 0.1), 2, 0.3);
        let h = *m.hybrid();
        let g = *m.game();
        let top = fitness_cooperator(20, &m).unwrap();
        let expect = expected_payoff_unchecked(Strategy::Cooperate, 4, &h, &g);
        assert!((top - expect).abs() < 1e-12);
        let bottom = fitness_defector(0, &m).unwrap();
        let expect = expected_payoff_unchecked(Strategy::Defect, 0, &h, &g);
        assert!((bottom - expect).abs() < 1e-12);
        assert_eq!(fitness_cooperator(0, &m).unwrap(), 0.0);
        assert_eq!(fitness_defector(20, &m).unwrap(), 0.0);
        assert!(fitness_cooperator(21, &m).is_err());

        // two adaptive seats: the lone cooperator always meets a defector
        let pair = model(20, 0.01, 2.0, (6, 3, 0.5, 0.1), 4, 0.25);
        let (h, g) = (*pair.hybrid(), *pair.game());
        let lone_c = fitness_cooperator(1, &pair).unwrap();
        assert!((lone_c - expected_payoff_unchecked(Strategy::Cooperate, 1, &h, &g)).abs() < 1e-12);
        let lone_d = fitness_defector(19, &pair).unwrap();
        assert!((lone_d - expected_payoff_unchecked(Strategy::Defect, 1, &h, &g)).abs() < 1e-12);
    }

    #[test]
    fn fermi_examples() {
        assert_eq!(imitation_probability(0.0, 7.0), 0.5);
        assert_eq!(imitation_probability(3.0, 0.0), 0.5);
        assert!((imitation_probability(0.5, 2.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(imitation_probability(1e6, 1e6), 1.0);
        assert_eq!(imitation_probability(-1e6, 1e6), 0.0);
        assert_eq!(imitation_probability(f64::INFINITY, 0.0), 0.5);
    }

    #[test]
    fn transition_boundaries() {
        let m = model(50, 0.03, 2.0, (6, 3, 0.9, 0.1), 1, 0.5);
        assert_eq!(transition_up(50, &m).unwrap(), 0.0);
        assert!((transition_up(0, &m).unwrap() - 0.03).abs() < 1e-15);
        assert_eq!(transition_down(0, &m).unwrap(), 0.0);
        assert!((transition_down(50, &m).unwrap() - 0.03).abs() < 1e-15);

        let lit = m.with_transition_form(TransitionForm::Literal);
        assert_eq!(transition_up(0, &lit).unwrap(), 0.0);
        assert_eq!(transition_down(50, &lit).unwrap(), 0.0);
    }

    #[test]
    fn neutral_selection_transitions() {
        let m = model(30, 0.1, 0.0, (6, 3, 0.9, 0.1), 2, 0.5);
        for k in 0..=30u32 {
            let z = 30.0;
            let kf = f64::from(k);
            let up = (z - kf) / z * (0.9 * kf / (z - 1.0) * 0.5 + 0.1);
            let down = kf / z * (0.9 * (z - kf) / (z - 1.0) * 0.5 + 0.1);
            assert!((transition_up(k, &m).unwrap() - up).abs() < 1e-15);
            assert!((transition_down(k, &m).unwrap() - down).abs() < 1e-15);
        }
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let m = model(40, 0.01, 2.0, (6, 3, 0.5, 0.1), 1, 0.7);
        let table = FitnessTable::new(&m);
        for k in 0..=40 {
            let (up, down) = table.rates(k, &m);
            assert_eq!(up, transition_up(k, &m).unwrap());
            assert_eq!(down, transition_down(k, &m).unwrap());
        }
    }

    fn any_model() -> impl proptest::strategy::Strategy<Value = PopulationModel> {
        (2u32..=10)
            .prop_flat_map(|n| {
                (
                    Just(n),
                    1..=n,
                    0..n,
                    0.0..=1.0f64,
                    0.0..=1.0f64,
                    0.0..=1.0f64,
                    0.0..=1.0f64,
                    0.0..10.0f64,
                    0u32..80,
                )
            })
            .prop_map(|(n, m, a, p, r, c, mu, beta, extra)| {
                let g = GameParams::new(n, m, r, 1.0, c).unwrap();
                let h = HybridPolicy::new(a, p, &g).unwrap();
                let z = (n - a).max(2) + extra;
                PopulationModel::new(z, mu, beta, g, h).unwrap()
            })
    }

    proptest! {
        #[test]
        fn rates_are_probabilities(m in any_model()) {
            let table = FitnessTable::new(&m);
            let z = m.population_size();
            for k in 0..=z {
                let (up, down) = table.rates(k, &m);
                prop_assert!((0.0..=1.0).contains(&up));
                prop_assert!((0.0..=1.0).contains(&down));
                prop_assert!(up + down <= 1.0 + 1e-15);
                if m.mutation_rate() > 0.0 {
                    prop_assert!(k == z || up > 0.0);
                    prop_assert!(k == 0 || down > 0.0);
                }
            }
            prop_assert_eq!(table.rates(z, &m).0, 0.0);
            prop_assert_eq!(table.rates(0, &m).1, 0.0);
        }

        #[test]
        fn sampling_weights_sum_to_one(m in any_model()) {
            let z = u64::from(m.population_size());
            let partners = u64::from(m.adaptive_seats() - 1);
            for k in 0..=z {
                if k >= 1 {
                    let s: f64 = (0..=partners)
                        .map(|i| hypergeometric_weight(z - 1, k - 1, partners, i as i64))
                        .sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
                if k < z {
                    let s: f64 = (0..=partners)
                        .map(|i| hypergeometric_weight(z - 1, k, partners, i as i64))
                        .sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn fermi_complement(d in -50.0..50.0f64, beta in 0.0..20.0f64) {
            let s = imitation_probability(d, beta) + imitation_probability(-d, beta);
            prop_assert!((s - 1.0).abs() < 1e-15);
        }

        #[test]
        fn fermi_scale_invariance(d in -5.0..5.0f64, beta in 0.0..10.0f64, s in 0.1..10.0f64) {
            let a = imitation_probability(d, beta);
            let b = imitation_probability(d / s, beta * s);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
