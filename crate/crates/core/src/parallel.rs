//! Order-preserving parallel map. Thread count comes from `QKERNEL_THREADS`
//! when set; every output slot is computed from immutable inputs, so the
//! result does not depend on scheduling.

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;
    use std::sync::OnceLock;

    fn pool() -> &'static rayon::ThreadPool {
        static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
        POOL.get_or_init(|| {
            let threads = std::env::var("QKERNEL_THREADS")
                .ok()
                .and_then(|v| v.trim().parse::<usize>().ok())
                .filter(|&n| n > 0)
                .unwrap_or(0);
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("failed to build thread pool")
        })
    }

    pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        pool().install(|| (0..n).into_par_iter().map(&f).collect())
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

pub use imp::map_indexed;

/// Like [`map_indexed`] but stops at the first error (in index order).
pub fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}
