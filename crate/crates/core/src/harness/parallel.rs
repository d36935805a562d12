use rayon::prelude::*;

use crate::error::{Error, Result};

/// Apply `f` to every item, on up to `jobs` threads. Output order follows
/// input order regardless of `jobs`.
pub fn run_all<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}
