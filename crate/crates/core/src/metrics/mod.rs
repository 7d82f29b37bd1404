//! Evaluation metrics: image-moment attribute measurements, correlation
//! coefficients, density divergences, and the output-variance probe.

pub mod kde;
pub mod moments;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use kde::js_divergence;
pub use moments::{measure_glyph_rotation, measure_rotation, measure_size};

/// Pearson product-moment correlation.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::UndefinedCorrelation(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 3 paired samples, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "zero variance in one of the series".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut ranks = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    pearson_r(&rank(xs), &rank(ys))
}

/// Mean-over-pixels variance across a set of images (population variance).
pub fn pixel_variance_mean(images: &[Array2<f64>]) -> f64 {
    assert!(!images.is_empty());
    let n = images.len() as f64;
    let shape = images[0].raw_dim();
    let mut mean = Array2::<f64>::zeros(shape.clone());
    for img in images {
        mean += img;
    }
    mean /= n;
    let mut var = Array2::<f64>::zeros(shape);
    for img in images {
        var += &(img - &mean).mapv(|v| v * v);
    }
    var /= n;
    var.mean().unwrap()
}

/// Output variance across synthetic references that share the attribute of
/// interest: for each real input, the mean pixel variance of
/// `combine(reference_i, real)` across references, averaged over real inputs.
pub fn v_rest<F>(mut combine: F, reals: &[Array2<f64>], references: &[Array2<f64>]) -> f64
where
    F: FnMut(&Array2<f64>, &Array2<f64>) -> Array2<f64>,
{
    assert!(!reals.is_empty() && references.len() >= 2);
    let mut total = 0.0;
    for real in reals {
        let outputs: Vec<Array2<f64>> = references.iter().map(|r| combine(r, real)).collect();
        total += pixel_variance_mean(&outputs);
    }
    total / reals.len() as f64
}
