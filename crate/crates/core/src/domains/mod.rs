//! Image domains: procedural glyph rendering with known generative
//! parameters, demonstration-triplet sampling, and IDX archive ingestion.

pub mod glyph;
pub mod idx;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::derive_seed;

pub use idx::IdxArchive;

/// Ground-truth generative parameters of a procedural glyph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector {
    /// Digit class, 0..=9.
    pub class_id: u8,
    /// Counter-clockwise rotation about the image center, degrees.
    pub rotation_deg: f64,
    /// Multiplier on the base glyph height.
    pub size_scale: f64,
    /// Stroke width, pixels.
    pub stroke_width: f64,
    /// Glyph displacement from the image center, pixels (x right, y up).
    pub offset_xy: (f64, f64),
}

impl AttributeVector {
    pub fn get(&self, attr: AttributeName) -> f64 {
        match attr {
            AttributeName::Class => self.class_id as f64,
            AttributeName::Rotation => self.rotation_deg,
            AttributeName::Size => self.size_scale,
            AttributeName::Stroke => self.stroke_width,
            AttributeName::OffsetX => self.offset_xy.0,
            AttributeName::OffsetY => self.offset_xy.1,
        }
    }

    pub fn set(&mut self, attr: AttributeName, value: f64) {
        match attr {
            AttributeName::Class => self.class_id = value as u8,
            AttributeName::Rotation => self.rotation_deg = value,
            AttributeName::Size => self.size_scale = value,
            AttributeName::Stroke => self.stroke_width = value,
            AttributeName::OffsetX => self.offset_xy.0 = value,
            AttributeName::OffsetY => self.offset_xy.1 = value,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rotation_deg.is_finite()
            && self.size_scale.is_finite()
            && self.stroke_width.is_finite()
            && self.offset_xy.0.is_finite()
            && self.offset_xy.1.is_finite()
    }
}

/// Named glyph attribute; the attribute of interest is one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeName {
    Class,
    Rotation,
    Size,
    Stroke,
    OffsetX,
    OffsetY,
}

impl AttributeName {
    pub const ALL: [AttributeName; 6] = [
        AttributeName::Class,
        AttributeName::Rotation,
        AttributeName::Size,
        AttributeName::Stroke,
        AttributeName::OffsetX,
        AttributeName::OffsetY,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AttributeName::Class => "class",
            AttributeName::Rotation => "rotation",
            AttributeName::Size => "size",
            AttributeName::Stroke => "stroke",
            AttributeName::OffsetX => "offset_x",
            AttributeName::OffsetY => "offset_y",
        }
    }
}

impl std::str::FromStr for AttributeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttributeName::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown attribute name '{s}'")))
    }
}

/// Closed sampling intervals per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttributeRanges {
    pub class: (u8, u8),
    pub rotation_deg: (f64, f64),
    pub size_scale: (f64, f64),
    pub stroke_width: (f64, f64),
    pub offset_x: (f64, f64),
    pub offset_y: (f64, f64),
}

impl Default for AttributeRanges {
    fn default() -> Self {
        AttributeRanges {
            class: (0, 9),
            rotation_deg: (-40.0, 40.0),
            size_scale: (0.6, 1.3),
            stroke_width: (1.4, 2.2),
            offset_x: (-1.5, 1.5),
            offset_y: (-1.5, 1.5),
        }
    }
}

impl AttributeRanges {
    pub fn range_of(&self, attr: AttributeName) -> (f64, f64) {
        match attr {
            AttributeName::Class => (self.class.0 as f64, self.class.1 as f64),
            AttributeName::Rotation => self.rotation_deg,
            AttributeName::Size => self.size_scale,
            AttributeName::Stroke => self.stroke_width,
            AttributeName::OffsetX => self.offset_x,
            AttributeName::OffsetY => self.offset_y,
        }
    }

    pub fn contains(&self, params: &AttributeVector) -> Result<()> {
        for attr in AttributeName::ALL {
            let (lo, hi) = self.range_of(attr);
            let v = params.get(attr);
            if !(lo..=hi).contains(&v) {
                return Err(Error::OutOfRange {
                    name: attr.as_str().into(),
                    value: v,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> AttributeVector {
        let uniform = |rng: &mut R, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        };
        let class = if self.class.0 == self.class.1 {
            self.class.0
        } else {
            rng.random_range(self.class.0..=self.class.1)
        };
        AttributeVector {
            class_id: class,
            rotation_deg: uniform(rng, self.rotation_deg),
            size_scale: uniform(rng, self.size_scale),
            stroke_width: uniform(rng, self.stroke_width),
            offset_xy: (uniform(rng, self.offset_x), uniform(rng, self.offset_y)),
        }
    }
}

/// Rendering style of a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainStyle {
    SyntheticSans,
    RealProxyHandwritten,
    ExternalIdx,
}

/// Perturbation strengths for the handwritten proxy style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Perturbation {
    /// Std-dev of per-endpoint stroke jitter, pixels.
    pub jitter_px: f64,
    /// Log-normal sigma of per-stroke width noise.
    pub stroke_sigma: f64,
    /// Amplitude of the smooth elastic warp, pixels.
    pub warp_px: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation {
            jitter_px: 0.5,
            stroke_sigma: 0.18,
            warp_px: 0.7,
        }
    }
}

impl Perturbation {
    pub fn none() -> Self {
        Perturbation {
            jitter_px: 0.0,
            stroke_sigma: 0.0,
            warp_px: 0.0,
        }
    }
}

/// Full description of one image domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub name: String,
    pub style: DomainStyle,
    #[serde(default)]
    pub ranges: AttributeRanges,
    pub image_size: usize,
    #[serde(default)]
    pub perturbation: Perturbation,
}

impl DomainSpec {
    pub fn synthetic_default(image_size: usize) -> Self {
        DomainSpec {
            name: "synth".into(),
            style: DomainStyle::SyntheticSans,
            ranges: AttributeRanges::default(),
            image_size,
            perturbation: Perturbation::none(),
        }
    }

    pub fn real_proxy_default(image_size: usize) -> Self {
        DomainSpec {
            name: "real".into(),
            style: DomainStyle::RealProxyHandwritten,
            ranges: AttributeRanges::default(),
            image_size,
            perturbation: Perturbation::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < 16 {
            return Err(Error::Config(format!(
                "image_size {} below the minimum of 16",
                self.image_size
            )));
        }
        if self.image_size % 4 != 0 {
            return Err(Error::Config(format!(
                "image_size {} must be divisible by 4 (two stride-2 stages)",
                self.image_size
            )));
        }
        for attr in AttributeName::ALL {
            let (lo, hi) = self.ranges.range_of(attr);
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::Config(format!(
                    "invalid range for {}: [{lo}, {hi}]",
                    attr.as_str()
                )));
            }
        }
        Ok(())
    }
}

/// A single model-facing image, with its generative parameters when known.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphImage {
    pub pixels: Array2<f64>,
    pub source_params: Option<AttributeVector>,
}

impl GlyphImage {
    pub fn assert_valid(&self) {
        debug_assert!(
            self.pixels
                .iter()
                .all(|v| v.is_finite() && (-1.0..=1.0).contains(v)),
            "glyph image pixels outside [-1, 1]"
        );
    }
}

/// A demonstration triplet: (b1, b3) share the attribute of interest,
/// (b2, b3) share every other attribute.
#[derive(Debug, Clone)]
pub struct SyntheticTriplet {
    pub b1: GlyphImage,
    pub b2: GlyphImage,
    pub b3: GlyphImage,
    pub aoi: AttributeName,
}

impl SyntheticTriplet {
    /// Verify the exact parameter-sharing contract.
    pub fn check_contract(&self) -> Result<()> {
        let (p1, p2, p3) = match (
            &self.b1.source_params,
            &self.b2.source_params,
            &self.b3.source_params,
        ) {
            (Some(p1), Some(p2), Some(p3)) => (p1, p2, p3),
            _ => {
                return Err(Error::TripletContract(
                    "triplet member lacks source parameters".into(),
                ))
            }
        };
        if p1.get(self.aoi) != p3.get(self.aoi) {
            return Err(Error::TripletContract(format!(
                "b1 and b3 differ on the attribute of interest {}",
                self.aoi.as_str()
            )));
        }
        for attr in AttributeName::ALL {
            if attr == self.aoi {
                continue;
            }
            if p2.get(attr) != p3.get(attr) {
                return Err(Error::TripletContract(format!(
                    "b2 and b3 differ on non-AoI attribute {}",
                    attr.as_str()
                )));
            }
        }
        Ok(())
    }
}

/// Render one glyph. Pure in `(params, spec, seed)`.
pub fn render_glyph(params: &AttributeVector, spec: &DomainSpec, seed: u64) -> Result<GlyphImage> {
    spec.ranges.contains(params)?;
    let pixels = glyph::render(params, spec, seed)?;
    Ok(GlyphImage {
        pixels,
        source_params: Some(*params),
    })
}

/// Sample one demonstration triplet from a synthetic domain.
///
/// b3 is drawn uniformly; b1 copies only the AoI of b3 (everything else
/// redrawn independently); b2 copies everything except the AoI.
pub fn sample_triplet(
    seed: u64,
    spec: &DomainSpec,
    aoi: AttributeName,
) -> Result<SyntheticTriplet> {
    let (lo, hi) = spec.ranges.range_of(aoi);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Config(format!(
            "attribute {} not covered by domain ranges",
            aoi.as_str()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x7269706c]));
    let p3 = spec.ranges.sample(&mut rng);
    let mut p1 = spec.ranges.sample(&mut rng);
    p1.set(aoi, p3.get(aoi));
    let mut p2 = p3;
    p2.set(aoi, spec.ranges.sample(&mut rng).get(aoi));

    let render_seed = |tag: u64| derive_seed(seed, &[0x72656e64, tag]);
    let triplet = SyntheticTriplet {
        b1: render_glyph(&p1, spec, render_seed(1))?,
        b2: render_glyph(&p2, spec, render_seed(2))?,
        b3: render_glyph(&p3, spec, render_seed(3))?,
        aoi,
    };
    debug_assert!(triplet.check_contract().is_ok());
    Ok(triplet)
}

/// Sample one real-domain image.
///
/// The handwritten proxy style renders a perturbed glyph with known
/// parameters; the external style draws uniformly from a loaded archive
/// (parameters absent).
pub fn sample_real(seed: u64, spec: &DomainSpec, archive: Option<&IdxArchive>) -> Result<GlyphImage> {
    match spec.style {
        DomainStyle::RealProxyHandwritten => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x7265616c]));
            let params = spec.ranges.sample(&mut rng);
            render_glyph(&params, spec, derive_seed(seed, &[0x7265616c, 1]))
        }
        DomainStyle::ExternalIdx => {
            let archive = archive.ok_or_else(|| {
                Error::State("external_idx domain sampled before an archive was loaded".into())
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x7265616c]));
            let idx = rng.random_range(0..archive.len());
            Ok(archive.image(idx))
        }
        DomainStyle::SyntheticSans => Err(Error::Config(
            "sample_real requires a real_proxy_handwritten or external_idx domain".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::moments;

    #[test]
    fn triplet_sharing_contract_holds() {
        let spec = DomainSpec::synthetic_default(32);
        for seed in 0..50 {
            let t = sample_triplet(seed, &spec, AttributeName::Rotation).unwrap();
            t.check_contract().unwrap();
            let p1 = t.b1.source_params.unwrap();
            let p3 = t.b3.source_params.unwrap();
            assert_eq!(p1.rotation_deg, p3.rotation_deg);
        }
    }

    #[test]
    fn collapsed_ranges_make_b2_and_b3_identical() {
        let mut spec = DomainSpec::synthetic_default(32);
        spec.ranges.class = (5, 5);
        spec.ranges.size_scale = (1.0, 1.0);
        spec.ranges.stroke_width = (1.8, 1.8);
        spec.ranges.offset_x = (0.0, 0.0);
        spec.ranges.offset_y = (0.0, 0.0);
        // only rotation (the AoI) varies
        let t = sample_triplet(9, &spec, AttributeName::Rotation).unwrap();
        // b2 and b3 share everything but the AoI; with all non-AoI ranges
        // collapsed they differ only in rotation, which b2 redraws.
        let p2 = t.b2.source_params.unwrap();
        let p3 = t.b3.source_params.unwrap();
        assert_eq!(p2.class_id, p3.class_id);
        assert_eq!(p2.size_scale, p3.size_scale);

        // collapse the AoI range as well: b2 == b3 bit for bit
        spec.ranges.rotation_deg = (10.0, 10.0);
        let t = sample_triplet(9, &spec, AttributeName::Rotation).unwrap();
        assert_eq!(t.b2.pixels, t.b3.pixels);
    }

    #[test]
    fn aoi_values_of_b1_b2_are_independent() {
        let spec = DomainSpec::synthetic_default(32);
        let n = 10_000;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for seed in 0..n as u64 {
            let t = sample_triplet(seed, &spec, AttributeName::Rotation).unwrap();
            xs.push(t.b1.source_params.unwrap().rotation_deg);
            ys.push(t.b2.source_params.unwrap().rotation_deg);
        }
        let r = crate::metrics::pearson_r(&xs, &ys).unwrap();
        assert!(r.abs() < 0.05, "correlation too high: {r}");
    }

    #[test]
    fn real_proxy_rotations_span_the_range() {
        let spec = DomainSpec::real_proxy_default(32);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for seed in 0..1000 {
            let img = sample_real(seed, &spec, None).unwrap();
            let rot = moments::measure_glyph_rotation(&img.pixels.view()).unwrap();
            lo = lo.min(rot);
            hi = hi.max(rot);
        }
        assert!(hi - lo > 60.0, "span {} too small", hi - lo);
    }

    #[test]
    fn sample_real_requires_archive_for_external_domain() {
        let mut spec = DomainSpec::real_proxy_default(32);
        spec.style = DomainStyle::ExternalIdx;
        match sample_real(0, &spec, None) {
            Err(Error::State(_)) => {}
            other => panic!("expected state error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_params_are_rejected() {
        let spec = DomainSpec::synthetic_default(32);
        let params = AttributeVector {
            class_id: 3,
            rotation_deg: 80.0,
            size_scale: 1.0,
            stroke_width: 1.8,
            offset_xy: (0.0, 0.0),
        };
        match render_glyph(&params, &spec, 0) {
            Err(Error::OutOfRange { name, .. }) => assert_eq!(name, "rotation"),
            other => panic!("expected range error, got {other:?}"),
        }
    }
}
