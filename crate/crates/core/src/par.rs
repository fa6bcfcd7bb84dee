//! Data-parallel map over trial indices.
//!
//! With the `parallel` feature the work is spread over the current rayon
//! pool; without it (or with [`Execution::Sequential`]) a plain iterator is
//! used. Output order always follows the index order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

/// `(0..n).map(f).collect()`, possibly in parallel. `min_chunk` bounds the
/// number of consecutive indices handed to one worker.
pub fn map_indices<T, F>(execution: Execution, n: u64, min_chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            let n = usize::try_from(n).expect("trial count fits in usize");
            (0..n)
                .into_par_iter()
                .with_min_len(min_chunk.max(1))
                .map(|i| f(i as u64))
                .collect()
        }
        _ => {
            let _ = min_chunk;
            (0..n).map(f).collect()
        }
    }
}

/// Whether this build can actually run in parallel.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let f = |i: u64| i.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 7;
        let a = map_indices(Execution::Parallel, 10_000, 64, f);
        let b = map_indices(Execution::Sequential, 10_000, 64, f);
        assert_eq!(a, b);
    }
}
