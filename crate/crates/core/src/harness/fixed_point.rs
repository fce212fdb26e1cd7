//! The four population-dynamics experiments behind `zurn fixed-point`.
//!
//! 1. Gamma(2,1) stationarity under the k = 2 map, by repeated two-sample KS
//!    tests against fresh Gamma(2,1) samples.
//! 2. Convergence of a Uniform[0,2] pool to Exp(1) under `Y = U(Y¹+Y²)`,
//!    judged against a noise floor from Exp(1)-started pools evolved the same
//!    number of iterations (they share the neutral drift of the pool mean).
//! 3. Coupled contraction of the squared ℓ₂ distance (theory 2/3 per step).
//! 4. The mean-preserving k = 3 map: its stationary pool is rejected by a KS
//!    test against the moment-fitted Gamma law.

use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Gamma as GammaLaw};

use crate::analysis::{
    ks_critical, ks_pvalue, ks_statistic, ks_two_sample, sorted, two_sample_size,
};
use crate::fixedpoint::{
    contraction_estimate, iterate_exp_pool, iterate_pool, iterate_pool_mean_preserving,
    wasserstein, ContractionReport, SamplePool,
};
use crate::oracle::{limit_cdf, LimitFamily};
use crate::rng::RngStream;

use super::{ExperimentConfig, HarnessError};

// Stream indices for the fixed-point experiments; realizations use 0..M.
const STATIONARITY_STREAMS: u64 = 1 << 40;
const W2_TRACE_STREAM: u64 = 2 << 40;
const EXP_STREAM: u64 = 3 << 40;
const EXP_FLOOR_STREAMS: u64 = 4 << 40;
const CONTRACTION_STREAM: u64 = 5 << 40;
const K3_STREAM: u64 = 6 << 40;

const GAMMA_TRACE_ITERATIONS: usize = 20;

fn gamma2(rng: &mut RngStream) -> f64 {
    Gamma::new(2.0, 1.0).expect("valid shape").sample(rng)
}

fn exp1(rng: &mut RngStream) -> f64 {
    Exp1.sample(rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityTrial {
    pub ks: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub stationarity: Vec<StationarityTrial>,
    pub stationarity_alpha: f64,
    pub stationarity_min_pass_rate: f64,
    /// W₂ from an iterated Gamma(2,1) pool to a fresh Gamma(2,1) pool, per iteration.
    pub gamma_w2_trace: Vec<f64>,
    /// W₂ between two fresh Gamma(2,1) pools of the same size.
    pub gamma_w2_floor: f64,
    /// KS distance to Exp(1) of the Uniform[0,2]-started pool, per iteration.
    pub exp_ks_trace: Vec<f64>,
    /// RMS two-sample KS between pairs of Exp(1)-started pools after the same iterations.
    pub exp_floor: f64,
    /// Two-sample KS between two fresh Exp(1) pools (no iteration), for reference.
    pub exp_iid_floor: f64,
    pub exp_floor_factor: f64,
    pub contraction: ContractionReport,
    pub contraction_range: (f64, f64),
    pub k3_ks: f64,
    pub k3_critical: f64,
    pub k3_shape: f64,
    pub k3_scale: f64,
}

impl FixedPointReport {
    pub fn stationarity_pass_rate(&self) -> f64 {
        let ok = self
            .stationarity
            .iter()
            .filter(|t| t.p_value >= self.stationarity_alpha)
            .count();
        ok as f64 / self.stationarity.len().max(1) as f64
    }

    pub fn stationarity_pass(&self) -> bool {
        self.stationarity_pass_rate() >= self.stationarity_min_pass_rate
    }

    pub fn exp_final_ks(&self) -> f64 {
        *self.exp_ks_trace.last().expect("at least the initial pool")
    }

    pub fn exp_pass(&self) -> bool {
        self.exp_final_ks() <= self.exp_floor_factor * self.exp_floor
    }

    pub fn contraction_ratio(&self) -> f64 {
        self.contraction.geometric_mean_ratio()
    }

    pub fn contraction_pass(&self) -> bool {
        let r = self.contraction_ratio();
        r >= self.contraction_range.0 && r <= self.contraction_range.1
    }

    pub fn k3_rejected(&self) -> bool {
        self.k3_ks > self.k3_critical
    }
}

fn evolve(
    mut pool: SamplePool,
    iterations: usize,
    rng: &mut RngStream,
    step: impl Fn(&SamplePool, &mut RngStream) -> Result<SamplePool, crate::fixedpoint::FixedPointError>,
) -> Result<SamplePool, HarnessError> {
    for _ in 0..iterations {
        pool = step(&pool, rng)?;
    }
    Ok(pool)
}

fn stationarity_trial(
    cfg: &ExperimentConfig,
    trial: u64,
) -> Result<StationarityTrial, HarnessError> {
    let mut rng = RngStream::new(cfg.seed, STATIONARITY_STREAMS + trial);
    let pool = SamplePool::from_sampler(cfg.stationarity_pool_size, &mut rng, gamma2)?;
    let pool = evolve(pool, cfg.stationarity_iterations, &mut rng, |p, r| {
        iterate_pool(p, 2, r)
    })?;
    let reference = sorted(
        &(0..cfg.stationarity_reference_size)
            .map(|_| gamma2(&mut rng))
            .collect::<Vec<_>>(),
    );
    let ks = ks_two_sample(&pool.sorted_values()?, &reference).expect("non-empty sorted samples");
    let n_eff = two_sample_size(cfg.stationarity_pool_size, cfg.stationarity_reference_size);
    Ok(StationarityTrial {
        ks,
        p_value: ks_pvalue(ks, n_eff),
    })
}

fn exp_floor_replicate(cfg: &ExperimentConfig, rep: u64) -> Result<f64, HarnessError> {
    let mut rng = RngStream::new(cfg.seed, EXP_FLOOR_STREAMS + rep);
    let mut pools = Vec::with_capacity(2);
    for _ in 0..2 {
        let p = SamplePool::from_sampler(cfg.pool_size, &mut rng, exp1)?;
        pools.push(evolve(p, cfg.exp_iterations, &mut rng, iterate_exp_pool)?.sorted_values()?);
    }
    Ok(ks_two_sample(&pools[0], &pools[1]).expect("non-empty sorted samples"))
}

/// Runs all four experiments with the sizes and thresholds in `cfg`.
pub fn run_fixed_point_suite(cfg: &ExperimentConfig) -> Result<FixedPointReport, HarnessError> {
    let m = cfg.pool_size;
    if m < 2 || cfg.stationarity_pool_size < 2 {
        return Err(HarnessError::Config("pool sizes must be at least 2".into()));
    }
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;

    let stationarity = workers.install(|| {
        (0..cfg.stationarity_trials as u64)
            .into_par_iter()
            .map(|t| stationarity_trial(cfg, t))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut rng = RngStream::new(cfg.seed, W2_TRACE_STREAM);
    let mut pool = SamplePool::from_sampler(m, &mut rng, gamma2)?;
    let fresh_a = SamplePool::from_sampler(m, &mut rng, gamma2)?;
    let fresh_b = SamplePool::from_sampler(m, &mut rng, gamma2)?;
    let gamma_w2_floor = wasserstein(&fresh_a, &fresh_b, 2)?;
    let mut gamma_w2_trace = vec![wasserstein(&pool, &fresh_a, 2)?];
    for _ in 0..GAMMA_TRACE_ITERATIONS {
        pool = iterate_pool(&pool, 2, &mut rng)?;
        gamma_w2_trace.push(wasserstein(&pool, &fresh_a, 2)?);
    }

    let exp_ks = |p: &SamplePool| -> Result<f64, HarnessError> {
        let s = p.sorted_values()?;
        Ok(ks_statistic(&s, |x| {
            limit_cdf(x, LimitFamily::ExpSigned(1.0)).expect("unit scale")
        })
        .expect("valid cdf"))
    };
    let mut rng = RngStream::new(cfg.seed, EXP_STREAM);
    let mut pool = SamplePool::from_sampler(m, &mut rng, |r| 2.0 * r.uniform())?;
    let mut exp_ks_trace = vec![exp_ks(&pool)?];
    for _ in 0..cfg.exp_iterations {
        pool = iterate_exp_pool(&pool, &mut rng)?;
        exp_ks_trace.push(exp_ks(&pool)?);
    }
    let floors = workers.install(|| {
        (0..cfg.exp_floor_replicates.max(1) as u64)
            .into_par_iter()
            .map(|r| exp_floor_replicate(cfg, r))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let exp_floor = (floors.iter().map(|f| f * f).sum::<f64>() / floors.len() as f64).sqrt();
    let iid_a = SamplePool::from_sampler(m, &mut rng, exp1)?.sorted_values()?;
    let iid_b = SamplePool::from_sampler(m, &mut rng, exp1)?.sorted_values()?;
    let exp_iid_floor = ks_two_sample(&iid_a, &iid_b).expect("non-empty sorted samples");

    let mut rng = RngStream::new(cfg.seed, CONTRACTION_STREAM);
    let p = SamplePool::from_sampler(m, &mut rng, gamma2)?;
    let q = SamplePool::from_sampler(m, &mut rng, |r| 2.0 * exp1(r))?;
    let contraction = contraction_estimate(&p, &q, cfg.contraction_iterations, &mut rng)?;

    let mut rng = RngStream::new(cfg.seed, K3_STREAM);
    let pool = SamplePool::from_sampler(m, &mut rng, exp1)?;
    let pool = evolve(pool, cfg.k3_iterations, &mut rng, |p, r| {
        iterate_pool_mean_preserving(p, 3, r)
    })?;
    let mean = pool.mean()[0];
    let sd = pool.std_dev()[0];
    let (k3_shape, k3_scale) = ((mean / sd).powi(2), sd * sd / mean);
    let fitted = GammaLaw::new(k3_shape, 1.0 / k3_scale).expect("positive moments");
    let k3_ks = ks_statistic(&pool.sorted_values()?, |x| fitted.cdf(x)).expect("valid cdf");
    let k3_critical = ks_critical(cfg.k3_alpha, m as f64);

    Ok(FixedPointReport {
        stationarity,
        stationarity_alpha: cfg.stationarity_alpha,
        stationarity_min_pass_rate: cfg.stationarity_min_pass_rate,
        gamma_w2_trace,
        gamma_w2_floor,
        exp_ks_trace,
        exp_floor,
        exp_iid_floor,
        exp_floor_factor: cfg.exp_floor_factor,
        contraction,
        contraction_range: (cfg.contraction_min_ratio, cfg.contraction_max_ratio),
        k3_ks,
        k3_critical,
        k3_shape,
        k3_scale,
    })
}
