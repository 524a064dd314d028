//! The birth–death chain over the number of cooperators `k = 0..=Z`, its
//! stationary distribution and the population-level metrics derived from it.

use serde::{Deserialize, Serialize};

use crate::dynamics::{hypergeometric_weight, weighted_mean, FitnessTable, PopulationModel};
use crate::error::{CrdError, Result};
use crate::game::heaviside;

/// L1 change between successive power-iteration vectors that counts as converged.
pub const POWER_ITERATION_TOLERANCE: f64 = 1e-13;
/// Upper bound on squarings of the lazy matrix (`2^64` chain steps).
pub const POWER_ITERATION_CAP: usize = 64;

/// Row-stochastic tridiagonal matrix stored by diagonals, indexed by row `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    down: Vec<f64>,
    stay: Vec<f64>,
    up: Vec<f64>,
}

impl TransitionMatrix {
    pub fn dimension(&self) -> usize {
        self.stay.len()
    }

    /// `p_{k,k-1}`; zero in row 0.
    pub fn down(&self) -> &[f64] {
        &self.down
    }

    /// `p_{k,k}`.
    pub fn stay(&self) -> &[f64] {
        &self.stay
    }

    /// `p_{k,k+1}`; zero in row `Z`.
    pub fn up(&self) -> &[f64] {
        &self.up
    }

    /// Row vector times matrix, `x S`.
    pub fn apply_left(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_left_into(x, &mut out);
        out
    }

    fn apply_left_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dimension();
        for j in 0..n {
            let mut v = x[j] * self.stay[j];
            if j > 0 {
                v += x[j - 1] * self.up[j - 1];
            }
            if j + 1 < n {
                v += x[j + 1] * self.down[j + 1];
            }
            out[j] = v;
        }
    }

    /// `‖x S − x‖₁`.
    pub fn stationarity_residual(&self, x: &[f64]) -> f64 {
        self.apply_left(x)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// `max_k |x(k) p_{k,k+1} − x(k+1) p_{k+1,k}|`.
    pub fn detailed_balance_residual(&self, x: &[f64]) -> f64 {
        (0..self.dimension().saturating_sub(1))
            .map(|k| (x[k] * self.up[k] - x[k + 1] * self.down[k + 1]).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of a row sum from one.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.dimension())
            .map(|k| (self.down[k] + self.stay[k] + self.up[k] - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `p_{k,k±1} = T±(k)`, `p_{k,k} = 1 − p_{k,k−1} − p_{k,k+1}`.
pub fn build_transition_matrix(m: &PopulationModel) -> TransitionMatrix {
    let table = FitnessTable::new(m);
    let n = m.population_size() as usize + 1;
    let mut down = Vec::with_capacity(n);
    let mut up = Vec::with_capacity(n);
    for k in 0..=m.population_size() {
        let (plus, minus) = table.rates(k, m);
        up.push(plus);
        down.push(minus);
    }
    // rounding can push this a hair below zero when mu = 1
    let stay = down.iter().zip(&up).map(|(d, u)| (1.0 - d - u).max(0.0)).collect();
    TransitionMatrix { down, stay, up }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    ProductForm,
    Eigen,
}

/// Long-run probability of each cooperator count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    probabilities: Vec<f64>,
    method: SolverMethod,
    normalization_residual: f64,
    detailed_balance_residual: f64,
}

impl StationaryDistribution {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn method(&self) -> SolverMethod {
        self.method
    }

    pub fn normalization_residual(&self) -> f64 {
        self.normalization_residual
    }

    pub fn detailed_balance_residual(&self) -> f64 {
        self.detailed_balance_residual
    }

    /// Population size `Z` the distribution was computed for.
    pub fn population_size(&self) -> usize {
        self.probabilities.len() - 1
    }

    fn from_vector(probabilities: Vec<f64>, method: SolverMethod, s: &TransitionMatrix) -> Self {
        let total: f64 = probabilities.iter().sum();
        Self {
            detailed_balance_residual: s.detailed_balance_residual(&probabilities),
            normalization_residual: (total - 1.0).abs(),
            probabilities,
            method,
        }
    }
}

fn require_mutation(m: &PopulationModel) -> Result<()> {
    if m.mutation_rate() == 0.0 {
        return Err(CrdError::Reducible("mutation rate mu = 0".into()));
    }
    Ok(())
}

/// Closed-form birth–death solution `P(k) ∝ Π_{j≤k} T+(j−1)/T−(j)`,
/// accumulated in log space.
pub fn stationary_product_form(m: &PopulationModel) -> Result<StationaryDistribution> {
    require_mutation(m)?;
    let s = build_transition_matrix(m);
    let n = s.dimension();
    let mut log_weights = Vec::with_capacity(n);
    log_weights.push(0.0);
    for j in 1..n {
        let (forward, backward) = (s.up[j - 1], s.down[j]);
        if forward <= 0.0 || backward <= 0.0 {
            return Err(CrdError::Reducible(format!(
                "zero transition rate between states {} and {j}",
                j - 1
            )));
        }
        let prev = log_weights[j - 1];
        log_weights.push(prev + forward.ln() - backward.ln());
    }
    let peak = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probabilities: Vec<f64> = log_weights.iter().map(|w| (w - peak).exp()).collect();
    let total: f64 = probabilities.iter().sum();
    probabilities.iter_mut().for_each(|x| *x /= total);
    Ok(StationaryDistribution::from_vector(
        probabilities,
        SolverMethod::ProductForm,
        &s,
    ))
}

/// Left eigenvector for eigenvalue one by the power method on the lazy
/// chain `L = (I + S) / 2`, started from the uniform vector.
///
/// The chain can be metastable, with a spectral gap far below the
/// tolerance, so single steps `x ← x L` are not used. Instead `L` is squared
/// repeatedly and the iterate is `x₀ L^(2^j)`; the run stops once two
/// successive iterates differ by less than the tolerance in L1. Cost is
/// `O(Z³)` per squaring.
///
/// With the literal rates the chain is reducible and the limit depends on
/// the starting vector.
pub fn stationary_eigen(m: &PopulationModel) -> Result<StationaryDistribution> {
    require_mutation(m)?;
    let s = build_transition_matrix(m);
    let x = power_iteration(&s, POWER_ITERATION_TOLERANCE, POWER_ITERATION_CAP)?;
    Ok(StationaryDistribution::from_vector(x, SolverMethod::Eigen, &s))
}

pub(crate) fn power_iteration(
    s: &TransitionMatrix,
    tolerance: f64,
    max_squarings: usize,
) -> Result<Vec<f64>> {
    let n = s.dimension();
    // row-major dense lazy matrix
    let mut power = vec![0.0; n * n];
    for k in 0..n {
        power[k * n + k] = 0.5 * (1.0 + s.stay[k]);
        if k > 0 {
            power[k * n + k - 1] = 0.5 * s.down[k];
        }
        if k + 1 < n {
            power[k * n + k + 1] = 0.5 * s.up[k];
        }
    }
    let start = vec![1.0 / n as f64; n];
    let mut x = vector_times(&start, &power, n);
    let mut scratch = vec![0.0; n * n];
    let mut change = f64::INFINITY;
    for _ in 0..max_squarings {
        square_into(&power, &mut scratch, n);
        std::mem::swap(&mut power, &mut scratch);
        let next = vector_times(&start, &power, n);
        change = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if change < tolerance {
            return Ok(x);
        }
    }
    Err(CrdError::NoConvergence {
        iterations: max_squarings,
        residual: change,
    })
}

fn vector_times(x: &[f64], a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        for (o, aij) in out.iter_mut().zip(&a[i * n..(i + 1) * n]) {
            *o += xi * aij;
        }
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v = (*v / total).max(0.0));
    out
}

/// `out = a · a`, each row renormalised to sum to one.
fn square_into(a: &[f64], out: &mut [f64], n: usize) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for (o, akj) in row.iter_mut().zip(&a[k * n..(k + 1) * n]) {
                *o += aik * akj;
            }
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
}

/// Stationary mean of the cooperator fraction `k / Z`.
pub fn average_cooperation(d: &StationaryDistribution) -> f64 {
    let z = d.population_size() as f64;
    d.probabilities
        .iter()
        .enumerate()
        .map(|(k, p)| p * k as f64 / z)
        .sum()
}

/// Probability that a group drawn in state `k` reaches the threshold.
pub fn group_success_at_state(k: u32, m: &PopulationModel) -> Result<f64> {
    if k > m.population_size() {
        return Err(CrdError::Domain(format!(
            "state k={k} exceeds population size Z={}",
            m.population_size()
        )));
    }
    let z = u64::from(m.population_size());
    let seats = u64::from(m.adaptive_seats());
    let a = i64::from(m.hybrid().agent_count());
    let threshold = i64::from(m.game().threshold());
    let p = m.hybrid().coop_probability();
    Ok(weighted_mean((0..=seats as i64).map(|h| {
        let w = hypergeometric_weight(z, u64::from(k), seats, h);
        (w, move || {
            p * f64::from(heaviside(h + a - threshold))
                + (1.0 - p) * f64::from(heaviside(h - threshold))
        })
    })))
}

/// Stationary mean of the group success probability.
pub fn average_group_success(d: &StationaryDistribution, m: &PopulationModel) -> Result<f64> {
    if d.population_size() != m.population_size() as usize {
        return Err(CrdError::Domain(format!(
            "distribution has {} states but the model has Z+1={}",
            d.probabilities.len(),
            m.population_size() + 1
        )));
    }
    let mut total = 0.0;
    for (k, p) in d.probabilities.iter().enumerate() {
        total += p * group_success_at_state(k as u32, m)?;
    }
    Ok(total)
}
