//! Thread-count control. Library code parallelizes with rayon over atoms and
//! always reduces in atom order, so results do not depend on the pool size.

use rayon::ThreadPoolBuilder;

use crate::error::{Error, Result};

/// Environment variable capping worker threads; `0` or unset means automatic.
pub const THREADS_ENV: &str = "INDEP_DECOMP_THREADS";

pub fn thread_cap_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("{THREADS_ENV} must be a nonnegative integer, got `{s}`"))),
        _ => Ok(0),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (`0` = rayon default).
pub fn with_thread_cap<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Solver(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
