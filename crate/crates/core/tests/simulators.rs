//! Statistical checks of the Monte Carlo simulators against the analytic results.

mod common;

use common::*;
use hybrid_crd::dynamics::{fitness_cooperator, fitness_defector};
use hybrid_crd::markov::stationary_product_form;
use hybrid_crd::simulate::{
    estimate_fitness_sampled, simulate_agents, simulate_chain, total_variation, AgentPopulation,
    SimulationConfig,
};
use hybrid_crd::Strategy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;

fn mirror_tv(v: &[f64]) -> f64 {
    let m: Vec<f64> = v.iter().rev().copied().collect();
    total_variation(v, &m)
}

#[test]
fn pure_mutation_chain_is_binomial() {
    let pt = Point { mu: 1.0, ..Point::baseline() };
    let cfg = SimulationConfig::new(pt.model(), 1_000_000, 10_000, SEED, 1).unwrap();
    let e = simulate_chain(&cfg).unwrap();
    let binomial: Vec<f64> = (0..=100).map(|k| exact_binomial(100, k) / 2f64.powi(100)).collect();
    assert!(total_variation(&e.occupancy, &binomial) < 0.02);
}

#[test]
fn neutral_chain_is_symmetric() {
    // mu = 0.1 so that 1e7 steps cross between the two halves often
    let pt = Point { beta: 0.0, mu: 0.1, r: 0.9, a: 1, p: 0.5, ..Point::baseline() };
    let cfg = SimulationConfig::new(pt.model(), 10_000_000, 100_000, SEED, 1).unwrap();
    assert!(mirror_tv(&simulate_chain(&cfg).unwrap().occupancy) < 0.02);
}

#[test]
fn chain_matches_analytic_distribution_at_a_hybrid_point() {
    let pt = Point { a: 2, p: 0.5, r: 0.9, ..Point::baseline() };
    let analytic = stationary_product_form(&pt.model()).unwrap();
    let cfg = SimulationConfig::new(pt.model(), 10_000_000, 100_000, SEED, 1).unwrap();
    let e = simulate_chain(&cfg).unwrap();
    assert!(total_variation(&e.occupancy, analytic.probabilities()) < 0.02);
}

#[test]
fn chain_error_shrinks_with_run_length() {
    let pt = Point::baseline();
    let analytic = stationary_product_form(&pt.model()).unwrap();
    let tv_at = |steps| {
        let cfg = SimulationConfig::new(pt.model(), steps, 10_000, SEED, 1).unwrap();
        total_variation(&simulate_chain(&cfg).unwrap().occupancy, analytic.probabilities())
    };
    assert!(tv_at(1_000_000) < tv_at(100_000));
}

#[test]
fn agent_fitness_estimates_match_the_analytic_fitness() {
    let pt = Point { z: 20, n: 6, m: 3, a: 2, p: 0.5, r: 0.9, ..Point::baseline() };
    let m = pt.model();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for k in [1u32, 5, 10, 15, 19] {
        let pop = AgentPopulation::with_cooperators(20, k);
        // individual 0 cooperates, individual 19 defects
        let (c_est, c_se) = pop.estimate_fitness(0, &m, 10_000, &mut rng);
        let (d_est, d_se) = pop.estimate_fitness(19, &m, 10_000, &mut rng);
        let fc = fitness_cooperator(k, &m).unwrap();
        let fd = fitness_defector(k, &m).unwrap();
        assert!((c_est - fc).abs() <= 3.0 * c_se + 1e-12, "k={k}: {c_est} vs {fc} (se {c_se})");
        assert!((d_est - fd).abs() <= 3.0 * d_se + 1e-12, "k={k}: {d_est} vs {fd} (se {d_se})");
    }
}

#[test]
fn payoff_flat_game_gives_symmetric_agent_occupancy() {
    let pt = Point { z: 20, c: 0.0, r: 0.0, a: 1, p: 0.5, mu: 0.1, ..Point::baseline() };
    let cfg = SimulationConfig::new(pt.model(), 4_000_000, 40_000, SEED, 1).unwrap();
    assert!(mirror_tv(&simulate_agents(&cfg).unwrap().occupancy) < 0.02);
}

#[test]
fn defecting_agents_match_smaller_groups_in_simulation() {
    let hybrid = Point { z: 20, n: 6, m: 2, a: 1, p: 0.0, mu: 0.05, ..Point::baseline() };
    let plain = Point { n: 5, a: 0, ..hybrid };
    let run = |pt: Point, seed| {
        let cfg = SimulationConfig::new(pt.model(), 1_000_000, 10_000, seed, 10).unwrap();
        simulate_agents(&cfg).unwrap().occupancy
    };
    assert!(total_variation(&run(hybrid, SEED), &run(plain, SEED + 1)) < 0.03);
}

#[test]
fn sampled_fitness_within_three_standard_errors() {
    let pt = Point { z: 12, n: 5, m: 3, a: 2, p: 0.5, r: 0.9, ..Point::baseline() };
    let m = pt.model();
    let (est, se) = estimate_fitness_sampled(6, Strategy::Cooperate, &m, 100_000, SEED).unwrap();
    let exact = fitness_cooperator(6, &m).unwrap();
    assert!(se > 0.0);
    assert!((est - exact).abs() <= 3.0 * se);
}

#[test]
fn sampled_fitness_is_unbiased_across_seeds() {
    let pt = Point { z: 12, n: 5, m: 3, a: 2, p: 0.5, r: 0.9, ..Point::baseline() };
    let m = pt.model();
    let exact = fitness_defector(4, &m).unwrap();
    let estimates: Vec<f64> = (0..200u64)
        .map(|s| estimate_fitness_sampled(4, Strategy::Defect, &m, 200, s).unwrap().0)
        .collect();
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - exact).abs() <= 3.0 * (var / n).sqrt());
}

#[test]
fn agent_simulation_rejects_impossible_groups() {
    use hybrid_crd::{GameParams, HybridPolicy, PopulationModel};
    let g = GameParams::new(6, 3, 0.5, 1.0, 0.1).unwrap();
    let h = HybridPolicy::new(0, 0.0, &g).unwrap();
    assert!(PopulationModel::new(5, 0.01, 2.0, g, h).is_err());
}

#[test]
fn runs_are_bit_reproducible() {
    let pt = Point { z: 30, a: 1, p: 0.4, ..Point::baseline() };
    let cfg = SimulationConfig::new(pt.model(), 200_000, 2_000, 7, 3).unwrap();
    assert_eq!(simulate_chain(&cfg).unwrap(), simulate_chain(&cfg).unwrap());
    assert_eq!(simulate_agents(&cfg).unwrap(), simulate_agents(&cfg).unwrap());
}
