//! Urn state and the draw-k-add-sum dynamics.
//!
//! Labels live in one flat append-only array, `d` coordinates per ball, in
//! addition order. The first `tau0` balls are the initial configuration in
//! input order. Running sums `S_n` (sum of labels) and `Q_n` (sum of squared
//! labels) are kept per coordinate and updated incrementally.
//!
//! Coordinates are generic over [`Coord`]: `i64` with checked arithmetic
//! (overflow is an error, never wraparound) or [`BigInt`] for the
//! arbitrary-precision mode. Random indices are drawn before any label
//! arithmetic, so a realization replayed with `BigInt` after an `i64`
//! overflow consumes the same random stream and yields the same urn.

use std::fmt;

use num::{BigInt, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::rng::IndexSource;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UrnError {
    #[error("initial configuration is empty")]
    EmptyInitial,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("label {index} has {found} coordinates, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("integer overflow at ball {step}, coordinate {coord}")]
    Overflow { step: usize, coord: usize },
    #[error("checkpoint {n} outside ({lo}, {hi}] or not strictly increasing")]
    BadCheckpoint { n: usize, lo: usize, hi: usize },
}

/// One coordinate of a label.
pub trait Coord: Clone + fmt::Debug + fmt::Display + PartialEq + Send + Sync + 'static {
    fn zero() -> Self;
    fn from_i64(v: i64) -> Self;
    fn checked_add(&self, rhs: &Self) -> Option<Self>;
    fn checked_square(&self) -> Option<Self>;
    fn to_f64(&self) -> f64;
    /// -1, 0 or 1.
    fn signum(&self) -> i32;
    fn magnitude_f64(&self) -> f64 {
        self.to_f64().abs()
    }
}

impl Coord for i64 {
    #[inline]
    fn zero() -> Self {
        0
    }
    #[inline]
    fn from_i64(v: i64) -> Self {
        v
    }
    #[inline]
    fn checked_add(&self, rhs: &Self) -> Option<Self> {
        i64::checked_add(*self, *rhs)
    }
    #[inline]
    fn checked_square(&self) -> Option<Self> {
        self.checked_mul(*self)
    }
    #[inline]
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    #[inline]
    fn signum(&self) -> i32 {
        i64::signum(*self) as i32
    }
}

impl Coord for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn checked_add(&self, rhs: &Self) -> Option<Self> {
        Some(self + rhs)
    }
    fn checked_square(&self) -> Option<Self> {
        Some(self * self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn signum(&self) -> i32 {
        if self.is_positive() {
            1
        } else if self.is_negative() {
            -1
        } else {
            0
        }
    }
}

/// A ball label: an integer vector of the urn's dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Label(pub Vec<i64>);

impl Label {
    pub fn scalar(v: i64) -> Self {
        Label(vec![v])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<i64>> for Label {
    fn from(v: Vec<i64>) -> Self {
        Label(v)
    }
}

#[derive(Clone, Debug)]
pub struct UrnState<C: Coord = i64> {
    dim: usize,
    tau0: usize,
    coords: Vec<C>,
    sum_s: Vec<C>,
    sum_q: Vec<C>,
    scratch: Vec<usize>,
}

impl<C: Coord> UrnState<C> {
    pub fn new(initial: &[Label], dim: usize) -> Result<Self, UrnError> {
        if dim == 0 {
            return Err(UrnError::ZeroDimension);
        }
        if initial.is_empty() {
            return Err(UrnError::EmptyInitial);
        }
        let mut urn = UrnState {
            dim,
            tau0: initial.len(),
            coords: Vec::with_capacity(initial.len() * dim),
            sum_s: vec![C::zero(); dim],
            sum_q: vec![C::zero(); dim],
            scratch: Vec::new(),
        };
        for (index, label) in initial.iter().enumerate() {
            if label.dim() != dim {
                return Err(UrnError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: label.dim(),
                });
            }
            urn.coords.extend(label.0.iter().map(|&v| C::from_i64(v)));
        }
        for i in 0..urn.tau0 {
            urn.accumulate(i, i + 1)?;
        }
        Ok(urn)
    }

    /// Adds ball `i` into the running sums. `step` is only used for errors.
    fn accumulate(&mut self, i: usize, step: usize) -> Result<(), UrnError> {
        for j in 0..self.dim {
            let x = &self.coords[i * self.dim + j];
            let overflow = UrnError::Overflow { step, coord: j };
            let sq = x.checked_square().ok_or(overflow.clone())?;
            self.sum_s[j] = self.sum_s[j].checked_add(x).ok_or(overflow.clone())?;
            self.sum_q[j] = self.sum_q[j].checked_add(&sq).ok_or(overflow)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau0(&self) -> usize {
        self.tau0
    }

    /// Current number of balls.
    pub fn n(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Label of ball `i` (0-based, addition order).
    pub fn label(&self, i: usize) -> &[C] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> impl ExactSizeIterator<Item = &[C]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// All coordinates, ball-major.
    pub fn flat_coords(&self) -> &[C] {
        &self.coords
    }

    pub fn sum_s(&self) -> &[C] {
        &self.sum_s
    }

    pub fn sum_q(&self) -> &[C] {
        &self.sum_q
    }

    /// `R_n = S_n²` for one coordinate, exact.
    pub fn r_exact(&self, coord: usize) -> Option<C> {
        self.sum_s[coord].checked_square()
    }

    pub fn r_f64(&self, coord: usize) -> f64 {
        let s = self.sum_s[coord].to_f64();
        s * s
    }

    pub fn q_f64(&self, coord: usize) -> f64 {
        self.sum_q[coord].to_f64()
    }

    /// `A_n = S_n / (n (n+1))` per coordinate.
    pub fn a_n(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.sum_s
            .iter()
            .map(|s| s.to_f64() / (n * (n + 1.0)))
            .collect()
    }

    pub fn draw_index<R: IndexSource>(&self, src: &mut R) -> usize {
        src.draw_index(self.n())
    }

    /// A uniformly drawn label; the urn is not modified.
    pub fn sample_draw<R: IndexSource>(&self, src: &mut R) -> &[C] {
        self.label(self.draw_index(src))
    }

    /// Draws `k` balls with replacement and appends their coordinate-wise sum.
    ///
    /// On overflow the urn is left unchanged.
    pub fn step<R: IndexSource>(&mut self, src: &mut R, k: usize) -> Result<&[C], UrnError> {
        if k < 2 {
            return Err(UrnError::InvalidK(k));
        }
        let n = self.n();
        let step = n + 1;
        self.scratch.clear();
        for _ in 0..k {
            self.scratch.push(src.draw_index(n));
        }
        let old_len = self.coords.len();
        for j in 0..self.dim {
            let mut acc = C::zero();
            for &idx in &self.scratch {
                match acc.checked_add(&self.coords[idx * self.dim + j]) {
                    Some(v) => acc = v,
                    None => {
                        self.coords.truncate(old_len);
                        return Err(UrnError::Overflow { step, coord: j });
                    }
                }
            }
            self.coords.push(acc);
        }
        let saved = (self.sum_s.clone(), self.sum_q.clone());
        if let Err(e) = self.accumulate(n, step) {
            self.coords.truncate(old_len);
            (self.sum_s, self.sum_q) = saved;
            return Err(e);
        }
        Ok(self.label(n))
    }

    /// Performs `additions` steps, calling `recorder` after each step whose
    /// resulting ball count is in `checkpoints`.
    pub fn run<R, F>(
        &mut self,
        additions: usize,
        src: &mut R,
        k: usize,
        checkpoints: &[usize],
        mut recorder: F,
    ) -> Result<(), UrnError>
    where
        R: IndexSource,
        F: FnMut(&UrnState<C>),
    {
        let lo = self.n();
        let hi = lo + additions;
        let mut prev = lo;
        for &c in checkpoints {
            if c <= prev || c > hi {
                return Err(UrnError::BadCheckpoint { n: c, lo, hi });
            }
            prev = c;
        }
        let mut next = checkpoints.iter().copied().peekable();
        for _ in 0..additions {
            self.step(src, k)?;
            if next.peek() == Some(&self.n()) {
                next.next();
                recorder(self);
            }
        }
        Ok(())
    }

    /// Recomputes `S_n` and `Q_n` from the labels; `None` on overflow.
    pub fn rescan_sums(&self) -> Option<(Vec<C>, Vec<C>)> {
        let mut s = vec![C::zero(); self.dim];
        let mut q = vec![C::zero(); self.dim];
        for label in self.labels() {
            for (j, x) in label.iter().enumerate() {
                s[j] = s[j].checked_add(x)?;
                q[j] = q[j].checked_add(&x.checked_square()?)?;
            }
        }
        Some((s, q))
    }

    /// Largest absolute coordinate over all balls, as `f64`.
    pub fn max_magnitude(&self) -> f64 {
        self.coords
            .iter()
            .map(Coord::magnitude_f64)
            .fold(0.0, f64::max)
    }
}

impl UrnState<i64> {
    /// Re-expresses an `i64` urn with arbitrary-precision coordinates.
    pub fn to_bigint(&self) -> UrnState<BigInt> {
        UrnState {
            dim: self.dim,
            tau0: self.tau0,
            coords: self.coords.iter().map(|&v| BigInt::from(v)).collect(),
            sum_s: self.sum_s.iter().map(|&v| BigInt::from(v)).collect(),
            sum_q: self.sum_q.iter().map(|&v| BigInt::from(v)).collect(),
            scratch: Vec::new(),
        }
    }
}
