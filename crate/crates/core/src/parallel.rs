//! Replicate-parallel maps whose results never depend on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Replicates handed to the pool at once by [`ordered_fold`].
pub const CHUNK: usize = 64;

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// `f(0), .., f(n−1)` evaluated on `threads` workers (0 = all cores), in
/// index order.
pub fn ordered_map<T, F>(threads: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    pool(threads)?.install(|| (0..n as u64).into_par_iter().map(&f).collect())
}

/// Folds `f(0), .., f(n−1)` into `acc` strictly in index order while
/// evaluating chunks of [`CHUNK`] replicates in parallel.
pub fn ordered_fold<T, A, F, G>(threads: usize, n: usize, mut acc: A, f: F, mut fold: G) -> Result<A>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
    G: FnMut(&mut A, T),
{
    let pool = pool(threads)?;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let part: Result<Vec<T>> =
            pool.install(|| (start as u64..end as u64).into_par_iter().map(&f).collect());
        for item in part? {
            fold(&mut acc, item);
        }
        start = end;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = ordered_map(3, 200, |i| Ok(i * i)).unwrap();
        assert!(v.iter().enumerate().all(|(i, &x)| x == (i * i) as u64));
        let s = ordered_fold(2, 150, Vec::new(), |i| Ok(i), |a: &mut Vec<u64>, x| a.push(x)).unwrap();
        assert_eq!(s, (0..150).collect::<Vec<_>>());
    }

    #[test]
    fn errors_propagate() {
        let r: Result<Vec<u64>> = ordered_map(1, 10, |i| {
            if i == 7 {
                Err(Error::Diverged { step: 7 })
            } else {
                Ok(i)
            }
        });
        assert!(r.is_err());
    }
}
