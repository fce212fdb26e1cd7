//! Running many independent urn realizations.
//!
//! Realization `r` always uses `RngStream::new(seed, r)`, and results are
//! collected in realization order, so outputs do not depend on the number of
//! worker threads.

use num::BigInt;
use rayon::prelude::*;

use crate::rng::RngStream;
use crate::urn::{Coord, Label, UrnError, UrnState};

use super::{ExperimentConfig, HarnessError};

/// Observes one realization.
///
/// The methods are generic over the coordinate type so the same probe serves
/// the `i64` run and the `BigInt` replay.
pub trait Probe {
    type Output: Send;

    fn checkpoint<C: Coord>(&mut self, _urn: &UrnState<C>) {}

    fn finish<C: Coord>(self, urn: &UrnState<C>) -> Self::Output;
}

/// Everything needed to replay a realization.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub initial: Vec<Label>,
    pub dim: usize,
    pub k: usize,
    pub additions: usize,
    pub checkpoints: Vec<usize>,
    pub seed: u64,
    pub bigint: bool,
}

impl RunSpec {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        RunSpec {
            initial: cfg.labels(),
            dim: cfg.dim(),
            k: cfg.k,
            additions: cfg.additions,
            checkpoints: cfg.checkpoints.clone(),
            seed: cfg.seed,
            bigint: cfg.bigint,
        }
    }

    fn run_typed<C: Coord, P: Probe>(
        &self,
        index: u64,
        mut probe: P,
    ) -> Result<P::Output, UrnError> {
        let mut urn: UrnState<C> = UrnState::new(&self.initial, self.dim)?;
        let mut rng = RngStream::new(self.seed, index);
        urn.run(self.additions, &mut rng, self.k, &self.checkpoints, |u| {
            probe.checkpoint(u)
        })?;
        Ok(probe.finish(&urn))
    }

    /// Runs realization `index` with `i64` labels; on overflow, replays it with
    /// `BigInt` labels when the bigint mode is enabled.
    pub fn run_one<P: Probe>(
        &self,
        index: u64,
        make: impl Fn() -> P,
    ) -> Result<P::Output, UrnError> {
        match self.run_typed::<i64, P>(index, make()) {
            Err(UrnError::Overflow { .. }) if self.bigint => {
                self.run_typed::<BigInt, P>(index, make())
            }
            other => other,
        }
    }
}

/// Runs realizations `0..count` on `threads` workers (0 = all cores).
pub fn run_many<P, F>(
    spec: &RunSpec,
    count: usize,
    threads: usize,
    make: F,
) -> Result<Vec<Result<P::Output, UrnError>>, HarnessError>
where
    P: Probe,
    F: Fn(u64) -> P + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|r| spec.run_one(r, || make(r)))
            .collect()
    }))
}
