//! Index-keyed data-parallel map.
//!
//! With the `parallel` feature (default) work is spread over the current rayon
//! pool; without it, or inside [`force_sequential`], the map runs on the
//! calling thread. Either way the output vector is ordered by index, so any
//! reduction done afterwards is independent of the worker count.

use std::cell::Cell;

thread_local! {
    static SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Run `f` with every [`map_indexed`] call on this thread forced onto the
/// sequential path.
pub fn force_sequential<R>(f: impl FnOnce() -> R) -> R {
    struct Reset(bool);
    impl Drop for Reset {
        fn drop(&mut self) {
            SEQUENTIAL.with(|s| s.set(self.0));
        }
    }
    let prev = SEQUENTIAL.with(|s| s.replace(true));
    let _reset = Reset(prev);
    f()
}

/// True when [`map_indexed`] would currently fan out to rayon.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !SEQUENTIAL.with(|s| s.get())
}

/// `(0..len).map(f).collect()`, possibly in parallel.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    (0..len).map(f).collect()
}

/// Map over a slice, preserving order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    map_indexed(items.len(), |i| f(&items[i]))
}
