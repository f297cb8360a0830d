//! Parallel ensembles. Members are independent and each derives its own
//! seeds from `(master_seed, role, index)`, so results do not depend on the
//! thread count or scheduling.

use rabi_core::estimator::{aggregate_info_gain, info_gain_member, InfoGainConfig, InfoGainCurve};
use rayon::prelude::*;

use crate::error::RunError;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "RABI_THREADS";

pub fn thread_pool() -> Result<rayon::ThreadPool, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| RunError::Threads(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| RunError::Threads(e.to_string()))
}

/// Same result as [`rabi_core::estimator::info_gain_ensemble`], with members
/// spread over `pool`.
pub fn info_gain_parallel(cfg: &InfoGainConfig, pool: &rayon::ThreadPool) -> Result<InfoGainCurve, RunError> {
    if cfg.ensemble_size < 2 {
        return Err(rabi_core::Error::InvalidParameter { name: "ensemble_size", reason: "must be >= 2" }.into());
    }
    let members = pool.install(|| {
        (0..cfg.ensemble_size as u64).into_par_iter().map(|i| info_gain_member(cfg, i)).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(aggregate_info_gain(cfg.snapshot_times(), &members))
}
