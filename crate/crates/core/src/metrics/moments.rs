//! Image-moment attribute measurements.
//!
//! Intensities are shifted from [-1, 1] to [0, 1] before any moment is
//! computed, so background pixels carry zero mass. Axis convention: x is the
//! column index increasing rightward, y is the row index increasing upward,
//! angles counter-clockwise from the +x axis.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::util::wrap_half_turn;

/// Minimum total mass (one full-intensity pixel = 1.0) for a measurement.
const MASS_EPS: f64 = 1e-3;
/// Threshold on normalized second moments below which orientation is
/// considered undefined.
const MOMENT_EPS: f64 = 1e-9;

pub struct CentralMoments {
    pub mass: f64,
    pub centroid_x: f64,
    pub centroid_y: f64,
    /// Variance along x (un-normalized, mass-weighted).
    pub mu20: f64,
    /// Variance along y.
    pub mu02: f64,
    pub mu11: f64,
}

pub fn central_moments(img: &ArrayView2<f64>) -> Result<CentralMoments> {
    let h = img.shape()[0];
    let mut mass = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for ((row, col), &p) in img.indexed_iter() {
        let w = (p + 1.0) / 2.0;
        let x = col as f64;
        let y = (h - 1 - row) as f64;
        mass += w;
        sx += w * x;
        sy += w * y;
    }
    if mass < MASS_EPS {
        return Err(Error::UndefinedOrientation(format!(
            "image mass {mass:.2e} below threshold"
        )));
    }
    let (cx, cy) = (sx / mass, sy / mass);
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    for ((row, col), &p) in img.indexed_iter() {
        let w = (p + 1.0) / 2.0;
        let dx = col as f64 - cx;
        let dy = (h - 1 - row) as f64 - cy;
        mu20 += w * dx * dx;
        mu02 += w * dy * dy;
        mu11 += w * dx * dy;
    }
    Ok(CentralMoments {
        mass,
        centroid_x: cx,
        centroid_y: cy,
        mu20,
        mu02,
        mu11,
    })
}

/// Principal-axis orientation in degrees, range (-90, 90].
/// 0 means the dominant axis is horizontal.
pub fn measure_rotation(img: &ArrayView2<f64>) -> Result<f64> {
    let m = central_moments(img)?;
    let (n20, n02, n11) = (m.mu20 / m.mass, m.mu02 / m.mass, m.mu11 / m.mass);
    if n20.abs() < MOMENT_EPS && n02.abs() < MOMENT_EPS && n11.abs() < MOMENT_EPS {
        return Err(Error::UndefinedOrientation(
            "all second central moments vanish".into(),
        ));
    }
    let theta = 0.5 * (2.0 * n11).atan2(n20 - n02);
    Ok(wrap_half_turn(theta.to_degrees()))
}

/// Rotation of an upright glyph, range (-90, 90].
///
/// Digit skeletons are taller than wide, so their principal axis is vertical
/// at zero rotation; this reports the deviation of that axis from vertical,
/// which tracks the renderer's rotation parameter directly.
pub fn measure_glyph_rotation(img: &ArrayView2<f64>) -> Result<f64> {
    Ok(wrap_half_turn(measure_rotation(img)? - 90.0))
}

/// Radius of gyration in pixels: RMS distance of mass from the centroid.
pub fn measure_size(img: &ArrayView2<f64>) -> Result<f64> {
    let m = central_moments(img)?;
    Ok(((m.mu20 + m.mu02) / m.mass).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn blank(n: usize) -> Array2<f64> {
        Array2::from_elem((n, n), -1.0)
    }

    #[test]
    fn horizontal_row_measures_zero_degrees() {
        let mut img = blank(16);
        for col in 2..14 {
            img[[8, col]] = 1.0;
        }
        let rot = measure_rotation(&img.view()).unwrap();
        assert!(rot.abs() < 1e-9, "got {rot}");
    }

    #[test]
    fn vertical_column_measures_ninety_degrees() {
        let mut img = blank(16);
        for row in 2..14 {
            img[[row, 8]] = 1.0;
        }
        let rot = measure_rotation(&img.view()).unwrap();
        assert!((rot - 90.0).abs() < 1e-9, "got {rot}");
        // and the glyph convention reads it as upright
        let grot = measure_glyph_rotation(&img.view()).unwrap();
        assert!(grot.abs() < 1e-9, "got {grot}");
    }

    #[test]
    fn main_diagonal_measures_forty_five_magnitude() {
        // pixels (i, i) descend to the right; with y up that is -45 degrees
        let mut img = blank(16);
        for i in 0..16 {
            img[[i, i]] = 1.0;
        }
        let rot = measure_rotation(&img.view()).unwrap();
        assert!((rot + 45.0).abs() < 1e-9, "got {rot}");

        let mut anti = blank(16);
        for i in 0..16 {
            anti[[15 - i, i]] = 1.0;
        }
        let rot = measure_rotation(&anti.view()).unwrap();
        assert!((rot - 45.0).abs() < 1e-9, "got {rot}");
    }

    #[test]
    fn single_pixel_has_zero_size_and_no_orientation() {
        let mut img = blank(16);
        img[[5, 7]] = 1.0;
        assert!(measure_size(&img.view()).unwrap().abs() < 1e-12);
        assert!(matches!(
            measure_rotation(&img.view()),
            Err(Error::UndefinedOrientation(_))
        ));
    }

    #[test]
    fn blank_image_has_undefined_orientation() {
        let img = blank(16);
        assert!(matches!(
            measure_rotation(&img.view()),
            Err(Error::UndefinedOrientation(_))
        ));
    }

    #[test]
    fn translation_leaves_size_unchanged() {
        let draw = |r0: usize, c0: usize| {
            let mut img = blank(32);
            for r in 0..8 {
                for c in 0..5 {
                    img[[r0 + r, c0 + c]] = 1.0;
                }
            }
            img
        };
        let a = measure_size(&draw(4, 6).view()).unwrap();
        let b = measure_size(&draw(17, 20).view()).unwrap();
        assert!((a - b).abs() / a < 0.01, "{a} vs {b}");
    }
}
