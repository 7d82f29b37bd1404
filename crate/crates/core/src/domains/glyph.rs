//! Procedural digit glyphs: seven-segment skeletons drawn as anti-aliased
//! capsule strokes, with optional handwriting-style perturbations.
//!
//! Coordinates are math convention: x right, y up, origin at the image
//! center, rotation counter-clockwise. Background is -1, ink is +1.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{AttributeVector, DomainSpec, Perturbation};
use crate::error::{Error, Result};

/// Glyph box width as a fraction of its height.
const GLYPH_ASPECT: f64 = 0.55;
/// Glyph height in units of the image side, at size_scale = 1.
const BASE_HEIGHT_FRAC: f64 = 0.5;
/// Anti-aliasing ramp width, pixels.
const AA: f64 = 1.0;
/// A pixel counts as lit above this value.
const LIT_THRESHOLD: f64 = -0.9;
/// Minimum number of lit pixels for a usable render.
const MIN_LIT: usize = 4;

/// Segment endpoints in glyph units (height 1, width GLYPH_ASPECT, centered).
/// Order: top, top-right, bottom-right, bottom, bottom-left, top-left, middle.
const SEGMENTS: [((f64, f64), (f64, f64)); 7] = {
    const W: f64 = GLYPH_ASPECT / 2.0;
    [
        ((-W, 0.5), (W, 0.5)),
        ((W, 0.5), (W, 0.0)),
        ((W, 0.0), (W, -0.5)),
        ((-W, -0.5), (W, -0.5)),
        ((-W, 0.0), (-W, -0.5)),
        ((-W, 0.5), (-W, 0.0)),
        ((-W, 0.0), (W, 0.0)),
    ]
};

/// Active segments per digit class, as bit masks over SEGMENTS.
const DIGIT_SEGMENTS: [u8; 10] = [
    0b0111111, // 0
    0b0000110, // 1
    0b1011011, // 2
    0b1001111, // 3
    0b1100110, // 4
    0b1101101, // 5
    0b1111101, // 6
    0b0000111, // 7
    0b1111111, // 8
    0b1101111, // 9
];

fn dist_to_segment(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (px - a.0, py - a.1);
    let len_sq = abx * abx + aby * aby;
    let t = if len_sq > 0.0 {
        ((apx * abx + apy * aby) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * abx, a.1 + t * aby);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Smooth low-frequency displacement field used for the elastic warp.
struct Warp {
    amp: f64,
    fx: f64,
    fy: f64,
    phase_x: f64,
    phase_y: f64,
}

impl Warp {
    fn sample<R: Rng>(amp: f64, image_size: usize, rng: &mut R) -> Self {
        let base_freq = 1.0 / (0.4 * image_size as f64);
        Warp {
            amp,
            fx: base_freq * rng.random_range(0.7..1.3),
            fy: base_freq * rng.random_range(0.7..1.3),
            phase_x: rng.random_range(0.0..std::f64::consts::TAU),
            phase_y: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    fn displace(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = self.amp * (std::f64::consts::TAU * self.fy * y + self.phase_x).sin();
        let dy = self.amp * (std::f64::consts::TAU * self.fx * x + self.phase_y).sin();
        (x + dx, y + dy)
    }
}

/// One stroke ready for rasterization: pixel-space endpoints and radius.
struct Stroke {
    a: (f64, f64),
    b: (f64, f64),
    radius: f64,
}

/// Rasterize `params` into a `[-1, 1]` grayscale image.
///
/// Deterministic in `(params, spec, seed)`. For the synthetic style the seed
/// is unused; for the handwritten proxy style it drives the stroke jitter,
/// stroke-width noise, and elastic warp.
pub fn render(params: &AttributeVector, spec: &DomainSpec, seed: u64) -> Result<Array2<f64>> {
    let n = spec.image_size;
    let glyph_h = params.size_scale * BASE_HEIGHT_FRAC * n as f64;
    let theta = params.rotation_deg.to_radians();
    let (sin_t, cos_t) = theta.sin_cos();

    let perturb = match spec.style {
        super::DomainStyle::SyntheticSans => Perturbation::none(),
        super::DomainStyle::RealProxyHandwritten => spec.perturbation.clone(),
        super::DomainStyle::ExternalIdx => {
            return Err(Error::Config(
                "cannot render glyphs for an external_idx domain".into(),
            ))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, perturb.jitter_px.max(1e-12)).unwrap();
    let stroke_noise = Normal::new(0.0, perturb.stroke_sigma.max(1e-12)).unwrap();
    let warp = Warp::sample(perturb.warp_px, n, &mut rng);

    let mask = DIGIT_SEGMENTS[params.class_id as usize];
    let mut strokes = Vec::with_capacity(7);
    for (i, (a, b)) in SEGMENTS.iter().enumerate() {
        // consume the rng for every segment so active-set changes do not
        // reshuffle the noise of the remaining segments
        let ja = (jitter.sample(&mut rng), jitter.sample(&mut rng));
        let jb = (jitter.sample(&mut rng), jitter.sample(&mut rng));
        let width_factor = stroke_noise.sample(&mut rng).exp();
        if mask & (1 << i) == 0 {
            continue;
        }
        let place = |p: (f64, f64), j: (f64, f64)| -> (f64, f64) {
            let gx = p.0 * glyph_h;
            let gy = p.1 * glyph_h;
            let rx = cos_t * gx - sin_t * gy + params.offset_xy.0;
            let ry = sin_t * gx + cos_t * gy + params.offset_xy.1;
            let jx = if perturb.jitter_px > 0.0 { j.0 } else { 0.0 };
            let jy = if perturb.jitter_px > 0.0 { j.1 } else { 0.0 };
            (rx + jx, ry + jy)
        };
        let radius = (params.stroke_width / 2.0)
            * if perturb.stroke_sigma > 0.0 {
                width_factor
            } else {
                1.0
            };
        strokes.push(Stroke {
            a: place(*a, ja),
            b: place(*b, jb),
            radius,
        });
    }

    let center = (n as f64) / 2.0;
    let mut img = Array2::<f64>::from_elem((n, n), -1.0);
    let mut lit = 0usize;
    for row in 0..n {
        for col in 0..n {
            let x = col as f64 + 0.5 - center;
            let y = center - (row as f64 + 0.5);
            let (qx, qy) = if perturb.warp_px > 0.0 {
                warp.displace(x, y)
            } else {
                (x, y)
            };
            let mut coverage: f64 = 0.0;
            for s in &strokes {
                let d = dist_to_segment(qx, qy, s.a, s.b);
                let c = (0.5 + (s.radius - d) / AA).clamp(0.0, 1.0);
                coverage = coverage.max(c);
            }
            let v = -1.0 + 2.0 * coverage;
            if v > LIT_THRESHOLD {
                lit += 1;
            }
            img[[row, col]] = v;
        }
    }

    if lit < MIN_LIT {
        return Err(Error::DegenerateRender { lit, min: MIN_LIT });
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{AttributeVector, DomainSpec, DomainStyle, Perturbation};

    fn spec() -> DomainSpec {
        DomainSpec::synthetic_default(32)
    }

    fn params(class: u8) -> AttributeVector {
        AttributeVector {
            class_id: class,
            rotation_deg: 0.0,
            size_scale: 1.0,
            stroke_width: 1.8,
            offset_xy: (0.0, 0.0),
        }
    }

    #[test]
    fn render_is_deterministic() {
        let s = spec();
        let p = params(3);
        let a = render(&p, &s, 11).unwrap();
        let b = render(&p, &s, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_classes_render_non_blank() {
        let s = spec();
        for class in 0..10 {
            let img = render(&params(class), &s, 0).unwrap();
            let lit = img.iter().filter(|&&v| v > -0.9).count();
            assert!(
                lit as f64 >= 0.01 * (32.0 * 32.0),
                "class {class} has {lit} lit pixels"
            );
            assert!(img.iter().all(|v| (-1.0..=1.0).contains(v) && v.is_finite()));
        }
    }

    #[test]
    fn tiny_glyph_is_degenerate() {
        let s = spec();
        let mut p = params(1);
        p.size_scale = 0.005;
        p.stroke_width = 0.05;
        match render(&p, &s, 0) {
            Err(Error::DegenerateRender { .. }) => {}
            other => panic!("expected degenerate render, got {other:?}"),
        }
    }

    #[test]
    fn real_proxy_with_zero_perturbation_matches_synthetic() {
        let mut clean = spec();
        clean.style = DomainStyle::RealProxyHandwritten;
        clean.perturbation = Perturbation::none();
        let synth = spec();
        let p = params(7);
        assert_eq!(
            render(&p, &clean, 5).unwrap(),
            render(&p, &synth, 5).unwrap()
        );
    }

    #[test]
    fn perturbed_render_differs_from_clean() {
        let proxy = DomainSpec::real_proxy_default(32);
        let p = params(7);
        let a = render(&p, &proxy, 5).unwrap();
        let b = render(&p, &spec(), 5).unwrap();
        assert_ne!(a, b);
        // different seeds give different perturbations
        let c = render(&p, &proxy, 6).unwrap();
        assert_ne!(a, c);
    }
}
