//! Central-difference gradient verification.
//!
//! Used by unit tests and the acceptance suite to compare analytic tape
//! gradients against finite differences on small double-precision networks.

use std::collections::HashMap;

use super::params::ParamStore;
use super::tape::Arr;

pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// (param name, flat coordinate, analytic, numeric) of the worst case.
    pub worst: Option<(String, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Relative error with a small absolute floor so near-zero gradient pairs
/// compare absolutely instead of blowing up.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Compare analytic gradients against central differences.
///
/// `eval` must recompute the scalar loss from the (perturbed) store. Every
/// `stride`-th coordinate of each listed parameter is probed; missing entries
/// in `analytic` are treated as exact zeros (e.g. behind a stop-gradient).
pub fn check_grads<F>(
    store: &mut ParamStore,
    analytic: &HashMap<usize, Arr>,
    pids: &[usize],
    stride: usize,
    mut eval: F,
) -> GradCheckReport
where
    F: FnMut(&ParamStore) -> f64,
{
    assert!(stride >= 1);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        worst: None,
    };

    for &pid in pids {
        let len = store.value(pid).len();
        for k in (0..len).step_by(stride) {
            let orig = store.value(pid).as_slice().unwrap()[k];
            let h = 1e-5 * orig.abs().max(1.0);

            store.value_mut(pid).as_slice_mut().unwrap()[k] = orig + h;
            let f_plus = eval(store);
            store.value_mut(pid).as_slice_mut().unwrap()[k] = orig - h;
            let f_minus = eval(store);
            store.value_mut(pid).as_slice_mut().unwrap()[k] = orig;

            let numeric = (f_plus - f_minus) / (2.0 * h);
            let analytic_g = analytic
                .get(&pid)
                .map(|g| g.as_slice().unwrap()[k])
                .unwrap_or(0.0);

            let err = rel_err(analytic_g, numeric);
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((
                    store.entry(pid).name.clone(),
                    k,
                    analytic_g,
                    numeric,
                ));
            }
        }
    }
    report
}
