//! Test-only oracles, written independently of the library's numerical path:
//! exact integer binomials instead of log-factorials, explicit enumeration
//! of group compositions, and a dense LU solve of `π S = π`.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Plain parameter bundle for the oracles.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub z: u32,
    pub mu: f64,
    pub beta: f64,
    pub b: f64,
    pub c: f64,
    pub n: u32,
    pub m: u32,
    pub a: u32,
    pub p: f64,
    pub r: f64,
}

impl Point {
    pub fn baseline() -> Self {
        Self { z: 100, mu: 0.01, beta: 2.0, b: 1.0, c: 0.1, n: 6, m: 3, a: 0, p: 0.0, r: 0.5 }
    }

    pub fn model(&self) -> hybrid_crd::PopulationModel {
        use hybrid_crd::{GameParams, HybridPolicy, PopulationModel};
        let g = GameParams::new(self.n, self.m, self.r, self.b, self.c).unwrap();
        let h = HybridPolicy::new(self.a, self.p, &g).unwrap();
        PopulationModel::new(self.z, self.mu, self.beta, g, h).unwrap()
    }
}

pub fn exact_binomial(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc as f64
}

/// Payoff of the focal player given the total number of cooperators in its group.
fn payoff(focal_cooperates: bool, total_cooperators: u32, pt: &Point) -> f64 {
    let kept = if total_cooperators >= pt.m { pt.b } else { pt.b * (1.0 - pt.r) };
    if focal_cooperates { kept - pt.c * pt.b } else { kept }
}

fn agent_mixture(focal_cooperates: bool, adaptive_cooperators: u32, pt: &Point) -> f64 {
    pt.p * payoff(focal_cooperates, adaptive_cooperators + pt.a, pt)
        + (1.0 - pt.p) * payoff(focal_cooperates, adaptive_cooperators, pt)
}

fn for_each_subset(items: &[bool], start: usize, picked: u32, left: usize, f: &mut impl FnMut(u32)) {
    if left == 0 {
        f(picked);
        return;
    }
    for i in start..=items.len() - left {
        for_each_subset(items, i + 1, picked + u32::from(items[i]), left - 1, f);
    }
}

/// Fitness by enumerating every set of co-players drawn from the other
/// `Z - 1` labelled individuals and both outcomes of the agents' coin.
pub fn enumerated_fitness(k: u32, focal_cooperates: bool, pt: &Point) -> f64 {
    let others: Vec<bool> = if focal_cooperates {
        (0..pt.z - 1).map(|i| i < k - 1).collect()
    } else {
        (0..pt.z - 1).map(|i| i < k).collect()
    };
    let size = (pt.n - pt.a - 1) as usize;
    let (mut total, mut count) = (0.0, 0u64);
    for_each_subset(&others, 0, 0, size, &mut |co| {
        let own = u32::from(focal_cooperates);
        total += pt.p * payoff(focal_cooperates, own + co + pt.a, pt)
            + (1.0 - pt.p) * payoff(focal_cooperates, own + co, pt);
        count += 1;
    });
    total / count as f64
}

/// Fitness by the hypergeometric sum with exact integer binomials.
pub fn exact_fitness(k: u32, focal_cooperates: bool, pt: &Point) -> f64 {
    let (z, k) = (i64::from(pt.z), i64::from(k));
    let partners = i64::from(pt.n - pt.a) - 1;
    let norm = exact_binomial(z - 1, partners);
    (0..=partners)
        .map(|i| {
            let (w, own) = if focal_cooperates {
                (exact_binomial(k - 1, i) * exact_binomial(z - k, partners - i), 1)
            } else {
                (exact_binomial(k, i) * exact_binomial(z - k - 1, partners - i), 0)
            };
            w / norm * agent_mixture(focal_cooperates, i as u32 + own, pt)
        })
        .sum()
}

fn fermi(delta: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (-beta * delta).exp())
}

/// `(T+(k), T-(k))` recomputed step by step.
pub fn oracle_rates(k: u32, pt: &Point) -> (f64, f64) {
    let (z, kf) = (f64::from(pt.z), f64::from(k));
    let fc = if k >= 1 { exact_fitness(k, true, pt) } else { 0.0 };
    let fd = if k < pt.z { exact_fitness(k, false, pt) } else { 0.0 };
    let up = (z - kf) / z * ((1.0 - pt.mu) * kf / (z - 1.0) * fermi(fc - fd, pt.beta) + pt.mu);
    let down = kf / z * ((1.0 - pt.mu) * (z - kf) / (z - 1.0) * fermi(fd - fc, pt.beta) + pt.mu);
    (up, down)
}

pub fn dense_matrix(pt: &Point) -> DMatrix<f64> {
    let n = pt.z as usize + 1;
    let mut s = DMatrix::zeros(n, n);
    for k in 0..n {
        let (up, down) = oracle_rates(k as u32, pt);
        if k + 1 < n {
            s[(k, k + 1)] = up;
        }
        if k > 0 {
            s[(k, k - 1)] = down;
        }
        s[(k, k)] = 1.0 - up - down;
    }
    s
}

/// Solves `π S = π`, `Σ π = 1` with a dense LU factorisation.
pub fn dense_stationary(pt: &Point) -> Vec<f64> {
    let s = dense_matrix(pt);
    let n = s.nrows();
    let mut a = s.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let x = a.lu().solve(&rhs).expect("non-singular system");
    x.iter().copied().collect()
}

pub fn oracle_cooperation(dist: &[f64]) -> f64 {
    let z = (dist.len() - 1) as f64;
    dist.iter().enumerate().map(|(k, p)| p * k as f64 / z).sum()
}

/// Group success per state by the hypergeometric sum with exact binomials.
pub fn oracle_success_at(k: u32, pt: &Point) -> f64 {
    let (z, k) = (i64::from(pt.z), i64::from(k));
    let seats = i64::from(pt.n - pt.a);
    let norm = exact_binomial(z, seats);
    (0..=seats)
        .map(|h| {
            let w = exact_binomial(k, h) * exact_binomial(z - k, seats - h) / norm;
            let met_with = if h + i64::from(pt.a) >= i64::from(pt.m) { 1.0 } else { 0.0 };
            let met_without = if h >= i64::from(pt.m) { 1.0 } else { 0.0 };
            w * (pt.p * met_with + (1.0 - pt.p) * met_without)
        })
        .sum()
}

pub fn oracle_success(dist: &[f64], pt: &Point) -> f64 {
    dist.iter()
        .enumerate()
        .map(|(k, p)| p * oracle_success_at(k as u32, pt))
        .sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
