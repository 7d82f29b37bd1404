//! IDX image/label archives (the MNIST container format), bit-exact:
//! big-endian headers, image magic 0x00000803, label magic 0x00000801,
//! unsigned-byte payloads.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder};
use ndarray::Array2;

use super::GlyphImage;
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    path: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(Error::DataFormat {
                path: self.path.into(),
                offset: self.pos as u64,
                reason: format!("truncated while reading {what}"),
            });
        }
        let v = BigEndian::read_u32(&self.bytes[self.pos..self.pos + 4]);
        self.pos += 4;
        Ok(v)
    }

    fn payload(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::DataFormat {
                path: self.path.into(),
                offset: self.bytes.len() as u64,
                reason: format!(
                    "truncated {what}: expected {len} payload bytes, have {}",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::DataFormat {
                path: self.path.into(),
                offset: self.pos as u64,
                reason: format!("{} trailing bytes after payload", self.bytes.len() - self.pos),
            });
        }
        Ok(())
    }
}

/// Parse raw IDX image bytes into row-major u8 images.
pub fn parse_idx_images(path: &str, bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let mut r = Reader { path, bytes, pos: 0 };
    let magic = r.u32("image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::DataFormat {
            path: path.into(),
            offset: 0,
            reason: format!("bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        });
    }
    let count = r.u32("image count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let payload = r.payload(count * rows * cols, "image payload")?;
    r.expect_end()?;
    let images = payload
        .chunks_exact(rows * cols)
        .map(|c| c.to_vec())
        .collect();
    Ok((rows, cols, images))
}

/// Parse raw IDX label bytes.
pub fn parse_idx_labels(path: &str, bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader { path, bytes, pos: 0 };
    let magic = r.u32("label magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::DataFormat {
            path: path.into(),
            offset: 0,
            reason: format!("bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        });
    }
    let count = r.u32("label count")? as usize;
    let payload = r.payload(count, "label payload")?;
    r.expect_end()?;
    Ok(payload.to_vec())
}

/// Bilinear resize of a grayscale image (no corner alignment).
fn resize(src: &Array2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (h, w) = (src.shape()[0], src.shape()[1]);
    if (h, w) == (out_h, out_w) {
        return src.clone();
    }
    let taps = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let s = (i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5;
                let lo = s.floor();
                let frac = s - lo;
                let lo_i = (lo.max(0.0) as usize).min(n_in - 1);
                let hi_i = ((lo as isize + 1).max(0) as usize).min(n_in - 1);
                (lo_i, hi_i, frac)
            })
            .collect()
    };
    let ty = taps(out_h, h);
    let tx = taps(out_w, w);
    Array2::from_shape_fn((out_h, out_w), |(i, j)| {
        let (y0, y1, fy) = ty[i];
        let (x0, x1, fx) = tx[j];
        let top = src[[y0, x0]] * (1.0 - fx) + src[[y0, x1]] * fx;
        let bot = src[[y1, x0]] * (1.0 - fx) + src[[y1, x1]] * fx;
        top * (1.0 - fy) + bot * fy
    })
}

/// A labeled image collection loaded from an IDX pair, rescaled to the
/// working resolution and mapped linearly from [0, 255] to [-1, 1].
pub struct IdxArchive {
    images: Vec<Array2<f64>>,
    labels: Vec<u8>,
}

impl std::fmt::Debug for IdxArchive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "IdxArchive({} images)", self.images.len())
    }
}

impl IdxArchive {
    pub fn load(
        images_path: impl AsRef<Path>,
        labels_path: impl AsRef<Path>,
        image_size: usize,
    ) -> Result<Self> {
        let ipath = images_path.as_ref().display().to_string();
        let lpath = labels_path.as_ref().display().to_string();
        let ibytes = fs::read(images_path.as_ref()).map_err(|e| Error::io(&ipath, e))?;
        let lbytes = fs::read(labels_path.as_ref()).map_err(|e| Error::io(&lpath, e))?;

        let (rows, cols, raw_images) = parse_idx_images(&ipath, &ibytes)?;
        let labels = parse_idx_labels(&lpath, &lbytes)?;
        if raw_images.len() != labels.len() {
            return Err(Error::DataFormat {
                path: lpath,
                offset: 4,
                reason: format!(
                    "label count {} does not match image count {}",
                    labels.len(),
                    raw_images.len()
                ),
            });
        }

        let images = raw_images
            .into_iter()
            .map(|raw| {
                let img = Array2::from_shape_fn((rows, cols), |(i, j)| {
                    raw[i * cols + j] as f64 / 255.0 * 2.0 - 1.0
                });
                resize(&img, image_size, image_size).mapv(|v| v.clamp(-1.0, 1.0))
            })
            .collect();
        Ok(IdxArchive { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, idx: usize) -> GlyphImage {
        GlyphImage {
            pixels: self.images[idx].clone(),
            source_params: None,
        }
    }

    pub fn label(&self, idx: usize) -> u8 {
        self.labels[idx]
    }
}

fn quantize(v: f64) -> u8 {
    (((v + 1.0) / 2.0 * 255.0).round()).clamp(0.0, 255.0) as u8
}

/// Write [-1, 1] images as an IDX image file (8-bit grayscale).
pub fn write_idx_images(path: impl AsRef<Path>, images: &[Array2<f64>]) -> Result<()> {
    let pstr = path.as_ref().display().to_string();
    let (rows, cols) = match images.first() {
        Some(img) => (img.shape()[0], img.shape()[1]),
        None => (0, 0),
    };
    let mut buf = Vec::with_capacity(16 + images.len() * rows * cols);
    buf.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(images.len() as u32).to_be_bytes());
    buf.extend_from_slice(&(rows as u32).to_be_bytes());
    buf.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        assert_eq!(img.shape(), [rows, cols], "inconsistent image shapes");
        for v in img.iter() {
            buf.push(quantize(*v));
        }
    }
    let mut f = fs::File::create(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&pstr, e))?;
    Ok(())
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let pstr = path.as_ref().display().to_string();
    let mut buf = Vec::with_capacity(8 + labels.len());
    buf.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    buf.extend_from_slice(labels);
    let mut f = fs::File::create(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&pstr, e))?;
    Ok(())
}
