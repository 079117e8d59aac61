//! Optional data parallelism controlled by `QANET_THREADS`.
//!
//! Unset or 0 runs everything on the calling thread. Results are always
//! collected in input order so output files do not depend on the setting.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const THREADS_VAR: &str = "QANET_THREADS";

pub fn threads() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(0),
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("{THREADS_VAR} must be a non-negative integer, got {v:?}"))),
    }
}

fn pool(n: usize) -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
    })
}

/// Maps `f` over `items`, in parallel when more than one thread is allowed.
pub fn map<T, U, F>(items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    let n = threads()?;
    if n <= 1 {
        items.iter().map(f).collect()
    } else {
        pool(n).install(|| items.par_iter().map(f).collect::<Vec<_>>())
            .into_iter()
            .collect()
    }
}
