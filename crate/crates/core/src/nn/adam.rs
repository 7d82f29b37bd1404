//! Adam optimizer over one parameter group.

use std::collections::HashMap;

use super::params::{ParamGroup, ParamStore};
use super::tape::Arr;

pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    /// Parameter ids this optimizer owns, in store order.
    pids: Vec<usize>,
    m: Vec<Arr>,
    v: Vec<Arr>,
}

impl Adam {
    pub fn new(store: &ParamStore, group: ParamGroup, beta1: f64, beta2: f64, eps: f64) -> Self {
        let pids = store.ids_in_group(group);
        let m = pids
            .iter()
            .map(|&p| Arr::zeros(store.value(p).raw_dim()))
            .collect();
        let v = pids
            .iter()
            .map(|&p| Arr::zeros(store.value(p).raw_dim()))
            .collect();
        Adam {
            beta1,
            beta2,
            eps,
            step: 0,
            pids,
            m,
            v,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn pids(&self) -> &[usize] {
        &self.pids
    }

    /// One update over the owned group. Missing gradients are treated as zero
    /// (moment decay still applies).
    pub fn apply(&mut self, store: &mut ParamStore, grads: &HashMap<usize, Arr>, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (slot, &pid) in self.pids.iter().enumerate() {
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            match grads.get(&pid) {
                Some(g) => {
                    m.zip_mut_with(g, |mi, &gi| *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi);
                    v.zip_mut_with(g, |vi, &gi| {
                        *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi
                    });
                }
                None => {
                    m.mapv_inplace(|mi| self.beta1 * mi);
                    v.mapv_inplace(|vi| self.beta2 * vi);
                }
            }
            let param = store.value_mut(pid);
            ndarray::Zip::from(&mut *param)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &mi, &vi| {
                    let m_hat = mi / bc1;
                    let v_hat = vi / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
                });
        }
    }

    /// Moment arrays for checkpointing, keyed by parameter id.
    pub fn state(&self) -> impl Iterator<Item = (usize, &Arr, &Arr)> {
        self.pids
            .iter()
            .zip(self.m.iter())
            .zip(self.v.iter())
            .map(|((&pid, m), v)| (pid, m, v))
    }

    pub fn restore(&mut self, step: u64, mut lookup: impl FnMut(usize) -> Option<(Arr, Arr)>) {
        self.step = step;
        for (slot, &pid) in self.pids.iter().enumerate() {
            if let Some((m, v)) = lookup(pid) {
                assert_eq!(m.shape(), self.m[slot].shape(), "adam moment shape mismatch");
                assert_eq!(v.shape(), self.v[slot].shape(), "adam moment shape mismatch");
                self.m[slot] = m;
                self.v[slot] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::zeros_init;
    use ndarray::arr1;

    #[test]
    fn zero_gradient_leaves_fresh_params_unchanged() {
        let mut store = ParamStore::new();
        let pid = store.add("w", ParamGroup::Generator, arr1(&[1.0, -2.0]).into_dyn());
        let mut adam = Adam::new(&store, ParamGroup::Generator, 0.5, 0.999, 1e-8);
        adam.apply(&mut store, &HashMap::new(), 1e-3);
        assert_eq!(store.value(pid), &arr1(&[1.0, -2.0]).into_dyn());
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        // With bias correction, |delta| of the first Adam step is ~lr.
        let mut store = ParamStore::new();
        let pid = store.add("w", ParamGroup::Generator, zeros_init(&[1]));
        let mut adam = Adam::new(&store, ParamGroup::Generator, 0.9, 0.999, 1e-12);
        let mut grads = HashMap::new();
        grads.insert(pid, arr1(&[0.3]).into_dyn());
        adam.apply(&mut store, &grads, 0.01);
        let got = store.value(pid)[[0]];
        assert!((got + 0.01).abs() < 1e-6, "got {got}");
    }
}
