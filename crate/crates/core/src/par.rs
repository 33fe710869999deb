//! Execution policy for the data-parallel loops.
//!
//! With the `rayon` feature (default) `Exec::Parallel` fans work out over the
//! global rayon pool; without it every policy runs sequentially. Results are
//! always returned in input order, so both policies produce identical output.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "rayon") && self == Exec::Parallel
    }
}

#[cfg(feature = "rayon")]
pub fn map<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Exec::Parallel => items.par_iter().map(f).collect(),
        Exec::Sequential => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "rayon"))]
pub fn map<T, U, F>(_exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Same as [`map`] over an index range.
pub fn map_range<U, F>(exec: Exec, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "rayon")]
    {
        use rayon::prelude::*;
        if exec == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_and_keep_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(Exec::Sequential, &xs, |x| x * x);
        let b = map(Exec::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(map_range(Exec::Parallel, 5, |i| i), vec![0, 1, 2, 3, 4]);
    }
}
