//! Gaussian kernel density estimation and Jensen-Shannon divergence between
//! two samples, in bits (base-2 logarithms, so the value is bounded by 1).

use crate::error::{Error, Result};

/// Number of evaluation points for the shared density grid.
const GRID_POINTS: usize = 2048;
/// Grid margin in units of the larger bandwidth.
const GRID_MARGIN: f64 = 4.0;

pub struct Kde1d {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl Kde1d {
    /// Scott's rule bandwidth: sigma * n^(-1/5).
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::DegenerateSample(
                "kernel density estimate needs at least 2 samples".into(),
            ));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let sigma = var.sqrt();
        if !(sigma.is_finite()) || sigma <= 0.0 {
            return Err(Error::DegenerateSample(
                "zero-spread sample, bandwidth undefined".into(),
            ));
        }
        Ok(Kde1d {
            samples: samples.to_vec(),
            bandwidth: sigma * n.powf(-0.2),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        self.samples
            .iter()
            .map(|&xi| {
                let z = (x - xi) / h;
                (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            * norm
    }
}

/// Base-2 Jensen-Shannon divergence between kernel density estimates of two
/// samples, integrated on a uniform grid spanning both samples plus a
/// bandwidth margin. Result lies in [0, 1].
pub fn js_divergence(samples_a: &[f64], samples_b: &[f64]) -> Result<f64> {
    if samples_a.len() < 30 || samples_b.len() < 30 {
        return Err(Error::DegenerateSample(format!(
            "js_divergence needs at least 30 samples per side, got {} and {}",
            samples_a.len(),
            samples_b.len()
        )));
    }
    let ka = Kde1d::new(samples_a)?;
    let kb = Kde1d::new(samples_b)?;
    let h = ka.bandwidth().max(kb.bandwidth());

    let min = samples_a
        .iter()
        .chain(samples_b)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let max = samples_a
        .iter()
        .chain(samples_b)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = min - GRID_MARGIN * h;
    let hi = max + GRID_MARGIN * h;
    let dx = (hi - lo) / (GRID_POINTS - 1) as f64;

    let mut p: Vec<f64> = Vec::with_capacity(GRID_POINTS);
    let mut q: Vec<f64> = Vec::with_capacity(GRID_POINTS);
    for i in 0..GRID_POINTS {
        let x = lo + i as f64 * dx;
        p.push(ka.density(x));
        q.push(kb.density(x));
    }

    // Normalize on the grid so truncation error cannot push the bound.
    let trapz = |f: &[f64]| -> f64 {
        let inner: f64 = f[1..f.len() - 1].iter().sum();
        (inner + 0.5 * (f[0] + f[f.len() - 1])) * dx
    };
    let (zp, zq) = (trapz(&p), trapz(&q));
    for v in p.iter_mut() {
        *v /= zp;
    }
    for v in q.iter_mut() {
        *v /= zq;
    }

    let mut integrand = Vec::with_capacity(GRID_POINTS);
    for i in 0..GRID_POINTS {
        let m = 0.5 * (p[i] + q[i]);
        let term_p = if p[i] > 0.0 { p[i] * (p[i] / m).log2() } else { 0.0 };
        let term_q = if q[i] > 0.0 { q[i] * (q[i] / m).log2() } else { 0.0 };
        integrand.push(0.5 * (term_p + term_q));
    }
    Ok(trapz(&integrand).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_distr::Normal;

    #[test]
    fn identical_samples_have_zero_divergence() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let d = js_divergence(&xs, &xs).unwrap();
        assert!(d <= 1e-6, "got {d}");
    }

    #[test]
    fn disjoint_supports_saturate_at_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..500).map(|_| n.sample(&mut rng) - 100.0).collect();
        let b: Vec<f64> = (0..500).map(|_| n.sample(&mut rng) + 100.0).collect();
        let d = js_divergence(&a, &b).unwrap();
        assert!((d - 1.0).abs() <= 1e-3, "got {d}");
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let xs = vec![1.0; 10];
        assert!(js_divergence(&xs, &xs).is_err());
    }

    #[test]
    fn zero_spread_is_an_error() {
        let xs = vec![1.0; 40];
        let ys: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert!(matches!(
            js_divergence(&xs, &ys),
            Err(crate::error::Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n0 = Normal::new(0.0, 1.0).unwrap();
        let n1 = Normal::new(0.7, 1.3).unwrap();
        let a: Vec<f64> = (0..300).map(|_| n0.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..300).map(|_| n1.sample(&mut rng)).collect();
        let dab = js_divergence(&a, &b).unwrap();
        let dba = js_divergence(&b, &a).unwrap();
        assert!((dab - dba).abs() < 1e-12);
    }
}
