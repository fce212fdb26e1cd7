//! Statistics on urn output: `A_n` traces, normalized samples, KS tests
//! against the limit laws, moment fits, empirical characteristic functions
//! and sign/coupling diagnostics.
//!
//! All normalizations by `A_n` use the realization's own `A_n` (quenched).

use std::cmp::Ordering;
use std::f64::consts::PI;

use num::complex::Complex64;
use thiserror::Error;

use crate::oracle::LimitFamily;
use crate::urn::{Coord, UrnState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample is not sorted ascending at position {0}")]
    NotSorted(usize),
    #[error("cdf returned {value} at x = {x}, outside [0, 1]")]
    CdfOutOfRange { x: f64, value: f64 },
    #[error("coordinate {0} has zero mean; the sign is undefined")]
    ZeroMean(usize),
    #[error("coordinate {coord} has A_n = {value}, too small to normalize by")]
    DegenerateA { coord: usize, value: f64 },
    #[error("expected dimension {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("coupling scale a({0}) is zero")]
    DegenerateScale(usize),
}

/// `A_n = S_n / (n(n+1))` per coordinate.
pub fn compute_a<C: Coord>(urn: &UrnState<C>) -> Vec<f64> {
    urn.a_n()
}

/// `A_n` recorded at a sequence of ball counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ATrace {
    pub checkpoints: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

impl ATrace {
    pub fn record<C: Coord>(&mut self, urn: &UrnState<C>) {
        debug_assert!(self.checkpoints.last().is_none_or(|&last| last < urn.n()));
        self.checkpoints.push(urn.n());
        self.values.push(compute_a(urn));
    }

    /// Latest value, the running estimate of the limit `A`.
    pub fn last(&self) -> Option<&[f64]> {
        self.values.last().map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// label / n
    ByN,
    /// label(j) / (n · A_n(j))
    ByNA,
}

/// Real d-vectors obtained by rescaling urn labels.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSample {
    dim: usize,
    values: Vec<f64>,
    normalization: Normalization,
}

impl NormalizedSample {
    pub fn from_raw(values: Vec<f64>, dim: usize, normalization: Normalization) -> Self {
        assert!(dim > 0 && values.len().is_multiple_of(dim), "ragged sample");
        NormalizedSample {
            dim,
            values,
            normalization,
        }
    }

    /// Every label divided by the current ball count.
    pub fn by_n<C: Coord>(urn: &UrnState<C>) -> Self {
        let n = urn.n() as f64;
        let values = urn.flat_coords().iter().map(|x| x.to_f64() / n).collect();
        Self::from_raw(values, urn.dim(), Normalization::ByN)
    }

    /// Every label divided by `n · A_n`, coordinate-wise, using this urn's `A_n`.
    pub fn by_na<C: Coord>(urn: &UrnState<C>) -> Result<Self, AnalysisError> {
        Self::by_na_range(urn, 0..urn.n())
    }

    /// As [`by_na`](Self::by_na) restricted to balls `range` (0-based).
    pub fn by_na_range<C: Coord>(
        urn: &UrnState<C>,
        range: std::ops::Range<usize>,
    ) -> Result<Self, AnalysisError> {
        let n = urn.n() as f64;
        let a = compute_a(urn);
        let mut scale = Vec::with_capacity(a.len());
        for (coord, &v) in a.iter().enumerate() {
            if v == 0.0 || !v.is_finite() {
                return Err(AnalysisError::DegenerateA { coord, value: v });
            }
            scale.push(n * v);
        }
        let d = urn.dim();
        let values = urn.flat_coords()[range.start * d..range.end * d]
            .iter()
            .enumerate()
            .map(|(i, x)| x.to_f64() / scale[i % d])
            .collect();
        Ok(Self::from_raw(values, d, Normalization::ByNA))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.points().map(|p| p[j]).collect()
    }
}

/// Sorts a copy ascending with a total order on floats.
pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// One-sample two-sided KS statistic `sup |F̂_m − F|`, evaluated on both
/// sides of every step of the empirical CDF.
pub fn ks_statistic<F>(sample: &[f64], cdf: F) -> Result<f64, AnalysisError>
where
    F: Fn(f64) -> f64,
{
    if sample.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let m = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        if i > 0 && sample[i - 1] > x {
            return Err(AnalysisError::NotSorted(i));
        }
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(AnalysisError::CdfOutOfRange { x, value: f });
        }
        let above = (i + 1) as f64 / m - f;
        let below = f - i as f64 / m;
        d = d.max(above).max(below);
    }
    Ok(d)
}

/// KS statistic of a sample against one of the limit laws.
pub fn ks_against(sample: &[f64], family: LimitFamily) -> Result<f64, AnalysisError> {
    let s = sorted(sample);
    ks_statistic(&s, |x| {
        crate::oracle::limit_cdf(x, family).expect("nonzero scale")
    })
}

/// Two-sample KS statistic between two sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    for s in [a, b] {
        if let Some(i) = (1..s.len()).find(|&i| s[i - 1] > s[i]) {
            return Err(AnalysisError::NotSorted(i));
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = match a[i].total_cmp(&b[j]) {
            Ordering::Less | Ordering::Equal => a[i],
            Ordering::Greater => b[j],
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // theta-function form converges fast for small λ
        let c = PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| {
                let odd = (2 * k - 1) as f64;
                (-odd * odd * c).exp()
            })
            .sum();
        return (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Stephens' finite-sample scaling `√n + 0.12 + 0.11/√n`.
fn effective_scale(n_eff: f64) -> f64 {
    let r = n_eff.sqrt();
    r + 0.12 + 0.11 / r
}

/// Approximate p-value of a KS statistic with effective size `n_eff`
/// (`m` for one sample, `ab/(a+b)` for two samples).
pub fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    kolmogorov_survival(d * effective_scale(n_eff))
}

/// Critical KS statistic at significance `alpha`.
pub fn ks_critical(alpha: f64, n_eff: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 5.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / effective_scale(n_eff)
}

/// Effective size of a two-sample test.
pub fn two_sample_size(a: usize, b: usize) -> f64 {
    (a as f64 * b as f64) / (a as f64 + b as f64)
}

/// Moment-matched limit-law parameters for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitFit {
    /// `a` such that the draw law is `a·Exp(1)`.
    pub exp_scale: f64,
    /// `a` such that the added-ball law is `a·Gamma(2,1)`.
    pub gamma_scale: f64,
    pub sign: i8,
}

impl LimitFit {
    pub fn exp_family(&self) -> LimitFamily {
        LimitFamily::ExpSigned(self.exp_scale)
    }

    pub fn gamma_family(&self) -> LimitFamily {
        LimitFamily::Gamma2(self.gamma_scale)
    }
}

pub fn fit_values(values: &[f64], coord: usize) -> Result<LimitFit, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean == 0.0 || !mean.is_finite() {
        return Err(AnalysisError::ZeroMean(coord));
    }
    Ok(LimitFit {
        exp_scale: mean,
        gamma_scale: mean / 2.0,
        sign: if mean > 0.0 { 1 } else { -1 },
    })
}

/// Fits `a·Exp(1)` and `a·Gamma(2,1)` to each coordinate by its mean.
pub fn fit_limits(sample: &NormalizedSample) -> Result<Vec<LimitFit>, AnalysisError> {
    (0..sample.dim())
        .map(|j| fit_values(&sample.coordinate(j), j))
        .collect()
}

/// `(1/m) Σ exp(i⟨t, x_j⟩)` over the points of `sample` (flat, `dim` per point).
pub fn empirical_cf(sample: &[f64], dim: usize, t: &[f64]) -> Complex64 {
    assert_eq!(t.len(), dim, "t has the wrong dimension");
    assert!(
        !sample.is_empty() && sample.len().is_multiple_of(dim),
        "ragged or empty sample"
    );
    let m = (sample.len() / dim) as f64;
    let sum = sample
        .chunks_exact(dim)
        .map(|x| {
            let phase: f64 = x.iter().zip(t).map(|(x, t)| x * t).sum();
            Complex64::new(phase.cos(), phase.sin())
        })
        .fold(Complex64::new(0.0, 0.0), |acc, z| acc + z);
    sum / m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignConcentration {
    pub fraction: f64,
    /// `A_n(coord)` was exactly zero; `fraction` counts positives instead.
    pub zero_a_fallback: bool,
}

/// Fraction of balls whose coordinate shares the sign of `A_n(coord)`;
/// zero labels count as one half.
pub fn sign_concentration<C: Coord>(urn: &UrnState<C>, coord: usize) -> SignConcentration {
    let target = urn.sum_s()[coord].signum();
    let zero_a_fallback = target == 0;
    let want = if zero_a_fallback { 1 } else { target };
    let score: f64 = urn
        .labels()
        .map(|l| match l[coord].signum() {
            0 => 0.5,
            s if s == want => 1.0,
            _ => 0.0,
        })
        .sum();
    SignConcentration {
        fraction: score / urn.n() as f64,
        zero_a_fallback,
    }
}

/// Median of `|y1 − y2| / (|y1| + |y2| + ε)` with `y_j = x(j)/a(j)`.
///
/// Near zero when both coordinates are multiples of one shared scalar.
pub fn coordinate_coupling(sample: &NormalizedSample, a: [f64; 2]) -> Result<f64, AnalysisError> {
    const EPS: f64 = 1e-12;
    if sample.dim() != 2 {
        return Err(AnalysisError::Dimension {
            expected: 2,
            found: sample.dim(),
        });
    }
    if sample.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    for (j, &v) in a.iter().enumerate() {
        if v == 0.0 || !v.is_finite() {
            return Err(AnalysisError::DegenerateScale(j));
        }
    }
    let mut stats: Vec<f64> = sample
        .points()
        .map(|p| {
            let y1 = p[0] / a[0];
            let y2 = p[1] / a[1];
            (y1 - y2).abs() / (y1.abs() + y2.abs() + EPS)
        })
        .collect();
    stats.sort_unstable_by(f64::total_cmp);
    let m = stats.len();
    Ok(if m % 2 == 1 {
        stats[m / 2]
    } else {
        0.5 * (stats[m / 2 - 1] + stats[m / 2])
    })
}

/// Mean and standard error of the mean, reduced in slice order.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{ForcedDraws, RngStream};
    use crate::urn::Label;

    fn urn1(labels: &[i64]) -> UrnState {
        let init: Vec<Label> = labels.iter().map(|&v| Label::scalar(v)).collect();
        UrnState::new(&init, 1).unwrap()
    }

    #[test]
    fn compute_a_examples() {
        assert_eq!(compute_a(&urn1(&[1, 1])), vec![1.0 / 3.0]);
        assert_eq!(compute_a(&urn1(&[-1, 1])), vec![0.0]);
        let mut u = urn1(&[1, 1]);
        u.step(&mut ForcedDraws::new(vec![0, 1]), 2).unwrap();
        assert_eq!(compute_a(&u), vec![4.0 / 12.0]);
    }

    #[test]
    fn trace_matches_stepwise_values() {
        let mut u = urn1(&[1, 1]);
        let mut r = RngStream::new(0, 0);
        let mut trace = ATrace::default();
        u.run(40, &mut r, 2, &(3..=42).collect::<Vec<_>>(), |s| {
            trace.record(s)
        })
        .unwrap();
        assert_eq!(trace.checkpoints, (3..=42).collect::<Vec<_>>());

        let mut v = urn1(&[1, 1]);
        let mut r = RngStream::new(0, 0);
        for values in &trace.values {
            v.step(&mut r, 2).unwrap();
            assert_eq!(values, &compute_a(&v));
        }
        assert_eq!(trace.last(), Some(compute_a(&u).as_slice()));

        // an all-zero urn stays at A = 0
        let mut z = urn1(&[0, 0]);
        let mut trace = ATrace::default();
        z.run(10, &mut r, 2, &[12], |s| trace.record(s)).unwrap();
        assert_eq!(trace.last(), Some(&[0.0][..]));
    }

    #[test]
    fn ks_on_exact_quantiles() {
        // quantiles F⁻¹((i − 0.5)/m) of Exp(1) give exactly 0.5/m
        let m = 200;
        let xs: Vec<f64> = (1..=m)
            .map(|i| -(1.0 - (i as f64 - 0.5) / m as f64).ln())
            .collect();
        let d = ks_statistic(&xs, |x| 1.0 - (-x).exp()).unwrap();
        assert!((d - 0.5 / m as f64).abs() < 1e-12);
    }

    #[test]
    fn ks_single_point_at_median() {
        let d = ks_statistic(&[2f64.ln()], |x| 1.0 - (-x).exp()).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_errors() {
        assert_eq!(ks_statistic(&[], |_| 0.5), Err(AnalysisError::EmptySample));
        assert_eq!(
            ks_statistic(&[1.0, 0.0], |_| 0.5),
            Err(AnalysisError::NotSorted(1))
        );
        assert!(matches!(
            ks_statistic(&[1.0], |_| 1.5),
            Err(AnalysisError::CdfOutOfRange { .. })
        ));
    }

    #[test]
    fn ks_invariant_under_monotone_transform() {
        let mut r = RngStream::new(4, 4);
        let xs = sorted(&(0..500).map(|_| r.uniform()).collect::<Vec<_>>());
        let d1 = ks_statistic(&xs, |x| x).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(3) * 7.0 + 1.0).collect();
        let d2 = ks_statistic(&ys, |y| ((y - 1.0) / 7.0).cbrt()).unwrap();
        assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn ks_two_sample_basic() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert!((ks_two_sample(&[0.0, 2.0], &[1.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_distribution_values() {
        // classical asymptotic critical values
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        // both series agree where they meet
        let lo = kolmogorov_survival(1.0 - 1e-12);
        let hi = kolmogorov_survival(1.0);
        assert!((lo - hi).abs() < 1e-10);
        let c = ks_critical(0.01, 1e12);
        assert!((c * 1e6 - 1.6276).abs() < 1e-3);
    }

    #[test]
    fn fit_examples() {
        let f = fit_values(&[1.0, 1.0], 0).unwrap();
        assert_eq!((f.exp_scale, f.gamma_scale, f.sign), (1.0, 0.5, 1));
        let f = fit_values(&[-2.0], 0).unwrap();
        assert_eq!(f.sign, -1);
        assert_eq!(crate::oracle::limit_cdf(0.1, f.exp_family()).unwrap(), 1.0);
        assert_eq!(fit_values(&[1.0, -1.0], 3), Err(AnalysisError::ZeroMean(3)));
    }

    #[test]
    fn empirical_cf_trivial_cases() {
        let xs = [0.3, -1.2, 4.0, 2.0];
        assert_eq!(empirical_cf(&xs, 2, &[0.0, 0.0]), Complex64::new(1.0, 0.0));
        let zeros = [0.0; 6];
        assert_eq!(
            empirical_cf(&zeros, 3, &[1.0, 2.0, 3.0]),
            Complex64::new(1.0, 0.0)
        );
        assert!(empirical_cf(&xs, 1, &[1.7]).norm() <= 1.0 + 1e-15);
    }

    #[test]
    fn sign_concentration_examples() {
        let s = sign_concentration(&urn1(&[1, 1, 2]), 0);
        assert_eq!(
            s,
            SignConcentration {
                fraction: 1.0,
                zero_a_fallback: false
            }
        );
        let s = sign_concentration(&urn1(&[-1, 1]), 0);
        assert_eq!(
            s,
            SignConcentration {
                fraction: 0.5,
                zero_a_fallback: true
            }
        );
        let s = sign_concentration(&urn1(&[-3, 0, 1]), 0);
        assert_eq!(s.fraction, 1.5 / 3.0);
    }

    #[test]
    fn coupling_zero_for_shared_scalar() {
        let a = [0.5, -2.0];
        let vals: Vec<f64> = [0.3, 1.0, 2.5, 4.0]
            .iter()
            .flat_map(|g| [g * a[0], g * a[1]])
            .collect();
        let s = NormalizedSample::from_raw(vals, 2, Normalization::ByN);
        assert!(coordinate_coupling(&s, a).unwrap() < 1e-12);
        assert_eq!(
            coordinate_coupling(&s, [0.0, 1.0]),
            Err(AnalysisError::DegenerateScale(0))
        );
    }

    #[test]
    fn by_na_uses_own_a() {
        let u = urn1(&[1, 1]);
        let s = NormalizedSample::by_na(&u).unwrap();
        // n·A_n = 2/3
        assert_eq!(s.values(), &[1.5, 1.5]);
        assert!(NormalizedSample::by_na(&urn1(&[-1, 1])).is_err());
        assert_eq!(NormalizedSample::by_n(&u).values(), &[0.5, 0.5]);
    }
}
