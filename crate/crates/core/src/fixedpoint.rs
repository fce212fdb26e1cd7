//! Population dynamics for the recursive distributional equations
//! `X = Σ U_i X^i` (Gamma(2) fixed point for k = 2) and `Y = U (Y¹ + Y²)`
//! (exponential fixed point).
//!
//! A distribution is represented by a pool of samples. One iteration builds a
//! new pool of the same size by pushing resampled members through the map.
//! The pool mean is a neutral direction of both maps: it is preserved in
//! expectation but random-walks by about `σ/√m` per iteration.

use thiserror::Error;

use crate::analysis::sorted;
use crate::rng::{IndexSource, RngStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixedPointError {
    #[error("pool must hold at least 2 samples, got {0}")]
    TooSmall(usize),
    #[error("pool sample {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("only one-dimensional pools are supported here, got d = {0}")]
    NotScalar(usize),
    #[error("pools have dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("pools have sizes {0} and {1}")]
    SizeMismatch(usize, usize),
    #[error("means differ by {0} after recentering")]
    MeanMismatch(f64),
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("unsupported Wasserstein order {0}")]
    Order(u32),
}

/// A population of real d-vectors, stored point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePool {
    dim: usize,
    data: Vec<f64>,
}

impl SamplePool {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self, FixedPointError> {
        assert!(dim > 0, "dimension must be positive");
        assert_eq!(data.len() % dim, 0, "ragged pool");
        let m = data.len() / dim;
        if m < 2 {
            return Err(FixedPointError::TooSmall(m));
        }
        Ok(SamplePool { dim, data })
    }

    pub fn scalar(data: Vec<f64>) -> Result<Self, FixedPointError> {
        Self::new(data, 1)
    }

    /// `m` draws from `sampler`, one scalar each.
    pub fn from_sampler(
        m: usize,
        rng: &mut RngStream,
        mut sampler: impl FnMut(&mut RngStream) -> f64,
    ) -> Result<Self, FixedPointError> {
        Self::scalar((0..m).map(|_| sampler(rng)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean(&self) -> Vec<f64> {
        let m = self.len() as f64;
        let mut acc = vec![0.0; self.dim];
        for p in self.data.chunks_exact(self.dim) {
            for (a, x) in acc.iter_mut().zip(p) {
                *a += x;
            }
        }
        acc.iter().map(|a| a / m).collect()
    }

    pub fn std_dev(&self) -> Vec<f64> {
        let mean = self.mean();
        let m = self.len() as f64;
        let mut acc = vec![0.0; self.dim];
        for p in self.data.chunks_exact(self.dim) {
            for j in 0..self.dim {
                acc[j] += (p[j] - mean[j]).powi(2);
            }
        }
        acc.iter().map(|a| (a / (m - 1.0)).sqrt()).collect()
    }

    fn scalar_only(&self) -> Result<(), FixedPointError> {
        if self.dim != 1 {
            return Err(FixedPointError::NotScalar(self.dim));
        }
        Ok(())
    }

    pub fn sorted_values(&self) -> Result<Vec<f64>, FixedPointError> {
        self.scalar_only()?;
        Ok(sorted(&self.data))
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn shift(&mut self, offset: &[f64]) {
        assert_eq!(offset.len(), self.dim);
        for p in self.data.chunks_exact_mut(self.dim) {
            for (x, o) in p.iter_mut().zip(offset) {
                *x += o;
            }
        }
    }
}

/// One step of `X ← Σ_{i=1..k} U_i X^{(i)}`, parents drawn uniformly with
/// replacement, `U_i` i.i.d. Uniform[0,1], one `U_i` per parent shared across
/// coordinates.
pub fn iterate_pool(
    pool: &SamplePool,
    k: usize,
    rng: &mut RngStream,
) -> Result<SamplePool, FixedPointError> {
    if k < 2 {
        return Err(FixedPointError::InvalidK(k));
    }
    let m = pool.len();
    let d = pool.dim;
    let mut out = vec![0.0; m * d];
    for dst in out.chunks_exact_mut(d) {
        for _ in 0..k {
            let parent = pool.point(rng.draw_index(m));
            let u = rng.uniform();
            for (o, x) in dst.iter_mut().zip(parent) {
                *o += u * x;
            }
        }
    }
    SamplePool::new(out, d)
}

/// [`iterate_pool`] followed by the factor `2/k`, which makes the map
/// mean-preserving for every `k` (and is the identity rescaling for `k = 2`).
pub fn iterate_pool_mean_preserving(
    pool: &SamplePool,
    k: usize,
    rng: &mut RngStream,
) -> Result<SamplePool, FixedPointError> {
    let mut next = iterate_pool(pool, k, rng)?;
    if k != 2 {
        next.scale(2.0 / k as f64);
    }
    Ok(next)
}

/// One step of `Y ← U (Y¹ + Y²)` with a single `U` per new sample.
pub fn iterate_exp_pool(
    pool: &SamplePool,
    rng: &mut RngStream,
) -> Result<SamplePool, FixedPointError> {
    pool.scalar_only()?;
    if let Some((index, &value)) = pool.data.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(FixedPointError::Negative { index, value });
    }
    let m = pool.len();
    let out = (0..m)
        .map(|_| {
            let y1 = pool.data[rng.draw_index(m)];
            let y2 = pool.data[rng.draw_index(m)];
            rng.uniform() * (y1 + y2)
        })
        .collect();
    SamplePool::scalar(out)
}

/// ℓ₁ or ℓ₂ distance between the empirical measures of two scalar pools.
///
/// For equal sizes this is the sorted coupling
/// `(1/m Σ |p₍ᵢ₎ − q₍ᵢ₎|^order)^{1/order}`. For unequal sizes the two
/// empirical quantile functions are integrated over the merged breakpoints,
/// which is the same distance computed exactly.
pub fn wasserstein(p: &SamplePool, q: &SamplePool, order: u32) -> Result<f64, FixedPointError> {
    if !(order == 1 || order == 2) {
        return Err(FixedPointError::Order(order));
    }
    let ps = p.sorted_values()?;
    let qs = q.sorted_values()?;
    let cost = |a: f64, b: f64| (a - b).abs().powi(order as i32);
    let total = if ps.len() == qs.len() {
        ps.iter().zip(&qs).map(|(a, b)| cost(*a, *b)).sum::<f64>() / ps.len() as f64
    } else {
        let (np, nq) = (ps.len() as f64, qs.len() as f64);
        let (mut i, mut j) = (0usize, 0usize);
        let mut u = 0.0;
        let mut acc = 0.0;
        while i < ps.len() && j < qs.len() {
            let next_p = (i + 1) as f64 / np;
            let next_q = (j + 1) as f64 / nq;
            let next = next_p.min(next_q);
            acc += (next - u) * cost(ps[i], qs[j]);
            u = next;
            if next_p <= next {
                i += 1;
            }
            if next_q <= next {
                j += 1;
            }
        }
        acc
    };
    Ok(total.powf(1.0 / order as f64))
}

/// Output of [`contraction_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    /// Mean squared difference under the maintained coupling, `d_0 ..= d_T`.
    pub coupled: Vec<f64>,
    /// Squared ℓ₂ between the empirical measures (sorted coupling) at each step.
    pub empirical: Vec<f64>,
}

impl ContractionReport {
    /// `d_{t+1} / d_t` for the coupled distances.
    pub fn ratios(&self) -> Vec<f64> {
        self.coupled.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// `(d_T / d_0)^{1/T}`.
    pub fn geometric_mean_ratio(&self) -> f64 {
        let t = self.coupled.len() - 1;
        if t == 0 || self.coupled[0] == 0.0 {
            return 0.0;
        }
        (self.coupled[t] / self.coupled[0]).powf(1.0 / t as f64)
    }
}

/// Evolves two scalar pools under `X ← U₁X¹ + U₂X²` with shared randomness.
///
/// `q` is first shifted to the mean of `p`, and both pools are sorted so the
/// initial index coupling is the optimal one. Each step then uses the same
/// parent indices and the same `U₁, U₂` for both pools, so the pair
/// `(p_i, q_i)` stays a coupling and `d_t = mean (p_i − q_i)²` bounds
/// `ℓ₂²(p, q)` from above. The map contracts this quantity by
/// `E[U₁²] + E[U₂²] = 2/3` per step in expectation.
pub fn contraction_estimate(
    p: &SamplePool,
    q: &SamplePool,
    iterations: usize,
    rng: &mut RngStream,
) -> Result<ContractionReport, FixedPointError> {
    if p.dim != q.dim {
        return Err(FixedPointError::DimensionMismatch(p.dim, q.dim));
    }
    p.scalar_only()?;
    if p.len() != q.len() {
        return Err(FixedPointError::SizeMismatch(p.len(), q.len()));
    }
    let m = p.len();
    let mut a = p.sorted_values()?;
    let mut b = q.sorted_values()?;
    let mean_a = a.iter().sum::<f64>() / m as f64;
    let mean_b = b.iter().sum::<f64>() / m as f64;
    let shift = mean_a - mean_b;
    b.iter_mut().for_each(|x| *x += shift);
    let mean_b = b.iter().sum::<f64>() / m as f64;
    let gap = (mean_a - mean_b).abs();
    if gap > 1e-9 * mean_a.abs().max(1.0) {
        return Err(FixedPointError::MeanMismatch(gap));
    }

    let coupled_dist = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
    };
    let empirical_dist = |a: &[f64], b: &[f64]| coupled_dist(&sorted(a), &sorted(b));

    let mut report = ContractionReport {
        coupled: vec![coupled_dist(&a, &b)],
        empirical: vec![coupled_dist(&a, &b)],
    };
    let mut na = vec![0.0; m];
    let mut nb = vec![0.0; m];
    for _ in 0..iterations {
        for i in 0..m {
            let i1 = rng.draw_index(m);
            let u1 = rng.uniform();
            let i2 = rng.draw_index(m);
            let u2 = rng.uniform();
            na[i] = u1 * a[i1] + u2 * a[i2];
            nb[i] = u1 * b[i1] + u2 * b[i2];
        }
        std::mem::swap(&mut a, &mut na);
        std::mem::swap(&mut b, &mut nb);
        report.coupled.push(coupled_dist(&a, &b));
        report.empirical.push(empirical_dist(&a, &b));
    }
    Ok(report)
}
