//! Minimal reverse-mode autodiff engine: tape, parameter store, Adam.
//!
//! Everything runs in f64. Parallel kernels use fixed-size batch chunks with
//! ordered reductions, so results do not depend on the thread count.

pub mod adam;
pub mod conv;
pub mod gradcheck;
pub mod params;
pub mod tape;

pub use adam::Adam;
pub use params::{ParamGroup, ParamStore};
pub use tape::{Arr, Gradients, Tape, Var};

/// Tape plus a per-tape cache of parameter leaf nodes, so each parameter is
/// inserted (copied) at most once per forward build.
pub struct NetGraph<'s> {
    pub tape: Tape,
    store: &'s ParamStore,
    bound: Vec<Option<Var>>,
}

impl<'s> NetGraph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        NetGraph {
            tape: Tape::new(),
            store,
            bound: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    /// Leaf node for parameter `pid`, inserting it on first use.
    pub fn param(&mut self, pid: usize) -> Var {
        if let Some(v) = self.bound[pid] {
            return v;
        }
        let v = self.tape.param(pid, self.store.value(pid).clone());
        self.bound[pid] = Some(v);
        v
    }

    pub fn constant(&mut self, value: Arr) -> Var {
        self.tape.constant(value)
    }
}
