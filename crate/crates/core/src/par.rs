//! Data-parallel helpers. With the `parallel` feature (default) these fan out
//! over the rayon pool; without it they run sequentially. Results are always
//! collected in input order so downstream reductions are deterministic.

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.par_iter().map(f).collect()
    }

    pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }

    pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        F: Fn(&T) -> R,
    {
        items.iter().map(f).collect()
    }

    pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
    where
        F: Fn(usize) -> R,
    {
        (0..n).map(f).collect()
    }

    pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
    where
        F: Fn(usize, &mut [T]),
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

pub use imp::*;

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
