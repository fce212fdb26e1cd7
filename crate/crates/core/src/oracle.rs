//! Exact ground truth: annealed moment recursion, mean of the sum, the lower
//! bound on `E[A_n²]`, and the limit laws `a·Exp(1)` and `a·Gamma(2,1)`.

use std::f64::consts::PI;

use num::complex::Complex64;
use num::{BigInt, BigRational, One};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use thiserror::Error;

use crate::urn::{Coord, UrnState};

/// Largest `n` accepted by [`moment_recursion_exact`].
pub const EXACT_MODE_MAX_N: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("target n = {n} is below tau0 = {tau0}")]
    BeforeStart { n: usize, tau0: usize },
    #[error("tau0 must be positive")]
    ZeroTau0,
    #[error("exact mode supports n <= {EXACT_MODE_MAX_N}, got {0}")]
    ExactRange(usize),
    #[error("scale parameter is zero; the limit law is a point mass")]
    DegenerateScale,
    #[error("growth bound violated at n = {n}: {which} = {value} > {bound}")]
    BoundViolated {
        n: usize,
        which: &'static str,
        value: f64,
        bound: f64,
    },
}

/// Annealed `(E[R_n], E[Q_n])` for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPair {
    pub r: f64,
    pub q: f64,
}

impl MomentPair {
    /// Starting moments of a deterministic initial urn, one coordinate.
    pub fn from_urn<C: Coord>(urn: &UrnState<C>, coord: usize) -> Self {
        MomentPair {
            r: urn.r_f64(coord),
            q: urn.q_f64(coord),
        }
    }

    /// One application of the recursion matrix at ball count `m`.
    fn advance(self, m: usize) -> Self {
        let m = m as f64;
        let inv = 1.0 / m;
        let inv2 = inv * inv;
        MomentPair {
            r: (1.0 + 4.0 * inv + 2.0 * inv2) * self.r + 2.0 * inv * self.q,
            q: 2.0 * inv2 * self.r + (1.0 + 2.0 * inv) * self.q,
        }
    }
}

/// `E[R_n], E[Q_n]` from the moments at `tau0`, applying the 2×2 matrix for
/// `m = tau0 .. n-1`.
pub fn moment_recursion(
    tau0: usize,
    start: MomentPair,
    n: usize,
) -> Result<MomentPair, OracleError> {
    if tau0 == 0 {
        return Err(OracleError::ZeroTau0);
    }
    if n < tau0 {
        return Err(OracleError::BeforeStart { n, tau0 });
    }
    Ok((tau0..n).fold(start, |p, m| p.advance(m)))
}

/// The same recursion, evaluated along every `n` in `tau0..=n_max`.
pub fn moment_trajectory(
    tau0: usize,
    start: MomentPair,
    n_max: usize,
) -> Result<Vec<MomentPair>, OracleError> {
    if tau0 == 0 {
        return Err(OracleError::ZeroTau0);
    }
    if n_max < tau0 {
        return Err(OracleError::BeforeStart { n: n_max, tau0 });
    }
    let mut out = Vec::with_capacity(n_max - tau0 + 1);
    let mut p = start;
    out.push(p);
    for m in tau0..n_max {
        p = p.advance(m);
        out.push(p);
    }
    Ok(out)
}

/// Exact rational moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub r: BigRational,
    pub q: BigRational,
}

impl ExactMoments {
    pub fn from_integers(r: i64, q: i64) -> Self {
        ExactMoments {
            r: BigRational::from_integer(BigInt::from(r)),
            q: BigRational::from_integer(BigInt::from(q)),
        }
    }
}

/// Rational-arithmetic version of [`moment_recursion`], for `n <= 200`.
pub fn moment_recursion_exact(
    tau0: usize,
    start: ExactMoments,
    n: usize,
) -> Result<ExactMoments, OracleError> {
    if tau0 == 0 {
        return Err(OracleError::ZeroTau0);
    }
    if n < tau0 {
        return Err(OracleError::BeforeStart { n, tau0 });
    }
    if n > EXACT_MODE_MAX_N {
        return Err(OracleError::ExactRange(n));
    }
    let one = BigRational::one();
    let mut cur = start;
    for m in tau0..n {
        let inv = BigRational::new(BigInt::one(), BigInt::from(m));
        let inv2 = &inv * &inv;
        let two = BigRational::from_integer(BigInt::from(2));
        let four = BigRational::from_integer(BigInt::from(4));
        let r = (&one + &four * &inv + &two * &inv2) * &cur.r + &two * &inv * &cur.q;
        let q = &two * &inv2 * &cur.r + (&one + &two * &inv) * &cur.q;
        cur = ExactMoments { r, q };
    }
    Ok(cur)
}

/// Constant used for the growth bounds `E[R_n] <= C n⁴`, `E[Q_n] <= 2C n³`.
///
/// `R_{tau0}` when positive, otherwise `Q_{tau0}`.
pub fn bound_constant(start: MomentPair) -> f64 {
    if start.r > 0.0 {
        start.r
    } else {
        start.q
    }
}

/// Walks the recursion up to `n_max` asserting both growth bounds at every
/// step. Returns the constant used.
pub fn check_growth_bounds(
    tau0: usize,
    start: MomentPair,
    n_max: usize,
) -> Result<f64, OracleError> {
    let c = bound_constant(start);
    let traj = moment_trajectory(tau0, start, n_max)?;
    for (offset, p) in traj.iter().enumerate() {
        let n = (tau0 + offset) as f64;
        let r_bound = c * n.powi(4);
        let q_bound = 2.0 * c * n.powi(3);
        let at = tau0 + offset;
        if p.r > r_bound {
            return Err(OracleError::BoundViolated {
                n: at,
                which: "E[R_n]",
                value: p.r,
                bound: r_bound,
            });
        }
        if p.q > q_bound {
            return Err(OracleError::BoundViolated {
                n: at,
                which: "E[Q_n]",
                value: p.q,
                bound: q_bound,
            });
        }
    }
    Ok(c)
}

/// `E[S_n] = n(n+1) / (tau0(tau0+1)) · S_tau0`.
pub fn annealed_mean_sum(s_tau0: &[f64], tau0: usize, n: usize) -> Vec<f64> {
    let scale = (n as f64 * (n as f64 + 1.0)) / (tau0 as f64 * (tau0 as f64 + 1.0));
    s_tau0.iter().map(|s| s * scale).collect()
}

/// `∏_{k ≥ tau0} (1 − 2/(k+2)²) · a_tau0_sq`.
///
/// The infinite product is evaluated in closed form from
/// `∏_{j ≥ 1} (1 − x²/j²) = sin(πx)/(πx)` at `x = √2`, divided by the
/// finite head `∏_{j=1}^{tau0+1} (1 − 2/j²)`. No truncation is involved.
pub fn a_second_moment_lower_bound(a_tau0_sq: f64, tau0: usize) -> f64 {
    if a_tau0_sq == 0.0 {
        return 0.0;
    }
    a_tau0_sq * tail_product(tau0 + 2)
}

/// `∏_{j ≥ first} (1 − 2/j²)` for `first >= 2`.
fn tail_product(first: usize) -> f64 {
    debug_assert!(first >= 2);
    let x = std::f64::consts::SQRT_2;
    let full = (PI * x).sin() / (PI * x);
    let head: f64 = (1..first)
        .map(|j| {
            let j = j as f64;
            1.0 - 2.0 / (j * j)
        })
        .product();
    full / head
}

/// The two scale families of limit laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitFamily {
    /// `a · Exp(1)`: law of a normalized draw.
    ExpSigned(f64),
    /// `a · Gamma(2, 1)`: law of a normalized added ball.
    Gamma2(f64),
}

impl LimitFamily {
    pub fn scale(&self) -> f64 {
        match *self {
            LimitFamily::ExpSigned(a) | LimitFamily::Gamma2(a) => a,
        }
    }

    /// Survival function of the unit law at `y >= 0`.
    fn unit_survival(&self, y: f64) -> f64 {
        match self {
            LimitFamily::ExpSigned(_) => (-y).exp(),
            LimitFamily::Gamma2(_) => (1.0 + y) * (-y).exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LimitFamily::ExpSigned(a) => {
                let e: f64 = Exp1.sample(rng);
                a * e
            }
            LimitFamily::Gamma2(a) => {
                let g: f64 = Gamma::new(2.0, 1.0).expect("valid shape").sample(rng);
                a * g
            }
        }
    }
}

/// Exact CDF of `a·Exp(1)` or `a·Gamma(2,1)`; negative `a` mirrors the support.
pub fn limit_cdf(x: f64, family: LimitFamily) -> Result<f64, OracleError> {
    let a = family.scale();
    if a == 0.0 {
        return Err(OracleError::DegenerateScale);
    }
    let y = x / a;
    let value = if a > 0.0 {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - family.unit_survival(y)
        }
    } else if x >= 0.0 {
        1.0
    } else {
        // P(a·G <= x) = P(G >= x/a)
        family.unit_survival(y)
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Characteristic function of `G·a`, `G ~ Gamma(2,1)`: `(1 − i⟨t, a⟩)^{-2}`.
pub fn gamma_cf(t: &[f64], a: &[f64]) -> Complex64 {
    assert_eq!(t.len(), a.len(), "t and a must have the same dimension");
    let dot: f64 = t.iter().zip(a).map(|(t, a)| t * a).sum();
    let base = Complex64::new(1.0, -dot);
    (base * base).inv()
}
