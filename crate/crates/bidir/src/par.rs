//! Data-parallel helpers. With the `parallel` feature (default) the work is
//! fanned out over rayon; without it the same entry points run serially, so
//! callers never branch on the feature themselves. Reductions are chunked
//! deterministically so results are identical in both modes.

/// Chunk size for deterministic parallel reductions.
pub const REDUCE_CHUNK: usize = 16;

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Always-serial reference path, kept callable for benchmarks comparing the
/// two implementations.
pub fn map_indexed_seq<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Sum per-index contributions into an accumulator vector of fixed size.
/// Chunks are folded serially and chunk results combined in order, so the
/// floating-point result does not depend on thread scheduling.
pub fn sum_indexed(n: usize, width: usize, f: impl Fn(usize, &mut [f64]) + Sync) -> Vec<f64> {
    let chunks: Vec<Vec<f64>> = {
        let starts: Vec<usize> = (0..n).step_by(REDUCE_CHUNK).collect();
        map_indexed(starts.len(), |ci| {
            let mut acc = vec![0.0; width];
            let start = starts[ci];
            for i in start..(start + REDUCE_CHUNK).min(n) {
                f(i, &mut acc);
            }
            acc
        })
    };
    let mut total = vec![0.0; width];
    for c in chunks {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_matches_seq() {
        let a = map_indexed(100, |i| i * i);
        let b = map_indexed_seq(100, |i| i * i);
        assert_eq!(a, b);
    }

    #[test]
    fn sum_is_deterministic() {
        let f = |i: usize, acc: &mut [f64]| {
            acc[0] += (i as f64).sin();
            acc[1] += 1.0 / (i as f64 + 1.0);
        };
        let a = sum_indexed(1000, 2, f);
        let b = sum_indexed(1000, 2, f);
        assert_eq!(a, b);
    }
}
