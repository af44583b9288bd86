//! Sequential / data-parallel execution switch.
//!
//! Every batch evaluation in the crate (sample points, random tuples,
//! holonomy loops) goes through [`Exec::map`]. With the `parallel` feature
//! disabled the parallel variant degrades to the sequential one.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Apply `f` to every item, preserving order.
    pub fn map<T, U, F>(self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Send + Sync,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.into_par_iter().map(f).collect(),
            _ => items.into_iter().map(f).collect(),
        }
    }

    /// Map over `0..len`.
    pub fn map_range<U, F>(self, len: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Send + Sync,
    {
        self.map((0..len).collect(), f)
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree_and_keep_order() {
        let f = |i: usize| (i * i) as f64;
        let a = Exec::Sequential.map_range(100, f);
        let b = Exec::Parallel.map_range(100, f);
        assert_eq!(a, b);
        assert_eq!(a[7], 49.0);
    }
}
