//! Built-in self-checks: the structural equivalences of the hybrid game,
//! solver agreement, detailed balance and forced values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{log_binomial, PopulationModel, TransitionForm};
use crate::error::{CrdError, Result};
use crate::markov::{
    average_group_success, build_transition_matrix, stationary_eigen, stationary_product_form,
    StationaryDistribution,
};
use crate::simulate::total_variation;
use crate::sweep::ParamSet;

pub const IDENTITY_TOLERANCE: f64 = 1e-12;
pub const AGREEMENT_TOLERANCE: f64 = 1e-10;
pub const FORCED_SUCCESS_TOLERANCE: f64 = 1e-14;
pub const MIN_DISTINCT_TV: f64 = 0.01;
/// Seed of the randomized parameter sample.
pub const SAMPLE_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation (or, for the distinctness check, the
    /// smallest observed distance).
    pub residual: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub transition_form: TransitionForm,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Default parameters with the given overrides.
pub fn baseline_point(update: impl FnOnce(&mut ParamSet)) -> ParamSet {
    let mut p = ParamSet::default();
    update(&mut p);
    p
}

fn model(params: ParamSet, form: TransitionForm) -> Result<PopulationModel> {
    Ok(params.to_model()?.with_transition_form(form))
}

/// Product form, or the eigen route when the chain is reducible.
fn solve(m: &PopulationModel) -> Result<StationaryDistribution> {
    match stationary_product_form(m) {
        Err(CrdError::Reducible(_)) => stationary_eigen(m),
        other => other,
    }
}

pub fn max_abs_difference(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Randomized, reproducible sample of valid models (Z ≤ 120).
pub fn random_models(count: usize, seed: u64) -> Vec<PopulationModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(2..=10u32);
            let a = rng.gen_range(0..n);
            let params = ParamSet {
                N: n,
                M: rng.gen_range(1..=n),
                a,
                p: rng.gen(),
                r: rng.gen(),
                c: rng.gen(),
                b: 1.0,
                Z: rng.gen_range((n - a).max(2)..=120),
                mu: 10f64.powf(rng.gen_range(-3.0..0.0)),
                beta: rng.gen_range(0.0..10.0),
            };
            params.to_model().expect("sampled parameters are valid")
        })
        .collect()
}

struct Check {
    name: &'static str,
    threshold: f64,
    /// `true` when the residual has to exceed the threshold.
    lower_bound: bool,
}

impl Check {
    fn evaluate(self, outcome: Result<(f64, String)>) -> CheckResult {
        match outcome {
            Ok((residual, detail)) => CheckResult {
                name: self.name,
                passed: if self.lower_bound {
                    residual > self.threshold
                } else {
                    residual < self.threshold
                },
                residual,
                threshold: self.threshold,
                detail,
            },
            Err(err) => CheckResult {
                name: self.name,
                passed: false,
                residual: f64::NAN,
                threshold: self.threshold,
                detail: err.to_string(),
            },
        }
    }
}

fn upper(name: &'static str, threshold: f64) -> Check {
    Check { name, threshold, lower_bound: false }
}

/// Largest pointwise gap between pairs of parameter points.
fn equivalence(pairs: &[(ParamSet, ParamSet)], form: TransitionForm) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for (lhs, rhs) in pairs {
        let a = solve(&model(*lhs, form)?)?;
        let b = solve(&model(*rhs, form)?)?;
        worst = worst.max(max_abs_difference(a.probabilities(), b.probabilities()));
    }
    Ok((worst, format!("{} pairs compared", pairs.len())))
}

pub fn fig5a_pairs() -> Vec<(ParamSet, ParamSet)> {
    let base = |n, a| baseline_point(|p| {
        p.N = n;
        p.a = a;
        p.M = 2;
        p.p = 0.0;
    });
    vec![(base(6, 1), base(5, 0)), (base(7, 2), base(5, 0))]
}

pub fn fig5b_pairs() -> Vec<(ParamSet, ParamSet)> {
    let hybrid = baseline_point(|p| {
        p.N = 6;
        p.a = 2;
        p.M = 4;
        p.p = 1.0;
    });
    let plain = baseline_point(|p| {
        p.N = 4;
        p.a = 0;
        p.M = 2;
    });
    vec![(hybrid, plain)]
}

pub fn fig5c_points() -> Vec<ParamSet> {
    [(1, 1.0), (2, 0.5), (4, 0.25)]
        .into_iter()
        .map(|(a, prob)| baseline_point(|p| {
            p.a = a;
            p.p = prob;
        }))
        .collect()
}

/// Smallest pairwise total-variation distance between the fig5C points.
pub fn fig5c_min_distance(form: TransitionForm) -> Result<f64> {
    let dists = fig5c_points()
        .into_iter()
        .map(|p| solve(&model(p, form)?))
        .collect::<Result<Vec<_>>>()?;
    let mut min = f64::INFINITY;
    for i in 0..dists.len() {
        for j in i + 1..dists.len() {
            min = min.min(total_variation(dists[i].probabilities(), dists[j].probabilities()));
        }
    }
    Ok(min)
}

pub fn run_validation(form: TransitionForm) -> ValidationReport {
    let sample = random_models(100, SAMPLE_SEED);
    let mut checks = Vec::new();

    checks.push(upper("fig5A_equivalence", AGREEMENT_TOLERANCE).evaluate(equivalence(&fig5a_pairs(), form)));
    checks.push(upper("fig5B_equivalence", AGREEMENT_TOLERANCE).evaluate(equivalence(&fig5b_pairs(), form)));
    checks.push(
        Check { name: "fig5C_non_equivalence", threshold: MIN_DISTINCT_TV, lower_bound: true }
            .evaluate(fig5c_min_distance(form).map(|d| (d, "smallest pairwise TV distance".into()))),
    );

    checks.push(upper("detailed_balance", IDENTITY_TOLERANCE).evaluate((|| {
        let mut worst = 0.0f64;
        for m in &sample {
            let d = stationary_product_form(&m.with_transition_form(form))?;
            worst = worst.max(d.detailed_balance_residual());
        }
        Ok((worst, format!("{} random models", sample.len())))
    })()));

    checks.push(upper("method_agreement", AGREEMENT_TOLERANCE).evaluate((|| {
        let mut worst = 0.0f64;
        for m in sample.iter().take(25) {
            let m = m.with_transition_form(form);
            let s = build_transition_matrix(&m);
            let a = stationary_product_form(&m)?;
            let b = stationary_eigen(&m)?;
            worst = worst
                .max(max_abs_difference(a.probabilities(), b.probabilities()))
                .max(s.stationarity_residual(a.probabilities()))
                .max(s.stationarity_residual(b.probabilities()));
        }
        Ok((worst, "product form vs eigen, and ‖PS − P‖₁, on 25 random models".into()))
    })()));

    checks.push(upper("forced_success", FORCED_SUCCESS_TOLERANCE).evaluate((|| {
        let mut worst = 0.0f64;
        for m in 1..=5u32 {
            for r in [0.0, 0.3, 0.9, 1.0] {
                let params = baseline_point(|p| {
                    p.M = m;
                    p.a = m;
                    p.p = 1.0;
                    p.r = r;
                });
                let md = model(params, form)?;
                let d = solve(&md)?;
                worst = worst.max((average_group_success(&d, &md)? - 1.0).abs());
            }
        }
        Ok((worst, "a = M, p = 1 over M in 1..=5 and four risks".into()))
    })()));

    checks.push(upper("pure_mutation_binomial", AGREEMENT_TOLERANCE).evaluate((|| {
        let md = model(baseline_point(|p| p.mu = 1.0), form)?;
        let d = solve(&md)?;
        let z = md.population_size();
        let binomial: Vec<f64> = (0..=z)
            .map(|k| (log_binomial(u64::from(z), i64::from(k)) - f64::from(z) * 2f64.ln()).exp())
            .collect();
        Ok((max_abs_difference(d.probabilities(), &binomial), "mu = 1 against Binomial(Z, 1/2)".into()))
    })()));

    checks.push(upper("neutral_symmetry", IDENTITY_TOLERANCE).evaluate((|| {
        let md = model(baseline_point(|p| {
            p.beta = 0.0;
            p.a = 2;
            p.p = 0.3;
            p.r = 0.9;
        }), form)?;
        let d = solve(&md)?;
        let probs = d.probabilities();
        let mirrored: Vec<f64> = probs.iter().rev().copied().collect();
        Ok((max_abs_difference(probs, &mirrored), "beta = 0, P(k) against P(Z − k)".into()))
    })()));

    checks.push(
        Check { name: "full_support", threshold: 0.0, lower_bound: true }.evaluate((|| {
            let md = model(ParamSet::default(), form)?;
            let s = build_transition_matrix(&md);
            let n = s.dimension();
            // every state must be enterable from both neighbours' side
            let min_rate = s.up()[..n - 1]
                .iter()
                .chain(&s.down()[1..])
                .copied()
                .fold(f64::INFINITY, f64::min);
            let d = solve(&md)?;
            let min_prob = d.probabilities().iter().copied().fold(f64::INFINITY, f64::min);
            Ok((
                min_rate.min(min_prob),
                format!("default point: smallest T± {min_rate:e}, smallest P(k) {min_prob:e}"),
            ))
        })()),
    );

    ValidationReport { transition_form: form, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrected_rates_pass_every_check() {
        let report = run_validation(TransitionForm::Corrected);
        assert!(report.checks.len() >= 6);
        for c in &report.checks {
            assert!(c.passed, "{} failed: {} ({})", c.name, c.residual, c.detail);
        }
    }

    #[test]
    fn literal_rates_fail_balance_and_support() {
        let report = run_validation(TransitionForm::Literal);
        let by_name = |n: &str| report.checks.iter().find(|c| c.name == n).unwrap();
        assert!(!by_name("detailed_balance").passed);
        assert!(!by_name("full_support").passed);
        assert!(!report.all_passed());
    }

    #[test]
    fn sample_is_reproducible() {
        assert_eq!(random_models(10, 1), random_models(10, 1));
        assert_ne!(random_models(10, 1), random_models(10, 2));
    }
}
