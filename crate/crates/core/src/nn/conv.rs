//! Convolution and resampling kernels used by the tape ops.
//!
//! Convolutions are im2col + matrix multiply, parallelized over fixed-size
//! batch chunks so results are bit-identical regardless of thread count
//! (per-sample outputs are independent and weight-gradient partials are
//! reduced in chunk order).

use ndarray::linalg::general_mat_mul;
use ndarray::parallel::prelude::*;
use ndarray::{Array1, Array2, Array4, ArrayView2, ArrayView3, ArrayView4, Axis};

/// Batch chunk size for parallel conv kernels. Fixed (not derived from the
/// thread count) so reductions have a stable order.
const CHUNK: usize = 8;

pub fn conv_out_size(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    assert!(
        input + 2 * pad >= kernel,
        "conv input {input} too small for kernel {kernel} with pad {pad}"
    );
    (input + 2 * pad - kernel) / stride + 1
}

/// Gather kernel patches of one sample into a `(C*kh*kw, OH*OW)` matrix.
/// Out-of-bounds taps read as zero.
fn im2col(x: ArrayView3<f64>, kh: usize, kw: usize, stride: usize, pad: usize, cols: &mut Array2<f64>) {
    let (c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let oh = conv_out_size(h, kh, stride, pad);
    let ow = conv_out_size(w, kw, stride, pad);
    debug_assert_eq!(cols.shape(), [c_in * kh * kw, oh * ow]);

    for c in 0..c_in {
        let plane = x.index_axis(Axis(0), c);
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (c * kh + ki) * kw + kj;
                let mut out_row = cols.row_mut(row);
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        for ox in 0..ow {
                            out_row[oy * ow + ox] = 0.0;
                        }
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        out_row[oy * ow + ox] = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            plane[[iy as usize, ix as usize]]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add a `(C*kh*kw, OH*OW)` gradient matrix back onto one sample.
fn col2im(
    cols: ArrayView2<f64>,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    dx: &mut ndarray::ArrayViewMut3<f64>,
) {
    let (c_in, h, w) = (dx.shape()[0], dx.shape()[1], dx.shape()[2]);
    let oh = conv_out_size(h, kh, stride, pad);
    let ow = conv_out_size(w, kw, stride, pad);

    for c in 0..c_in {
        let mut plane = dx.index_axis_mut(Axis(0), c);
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (c * kh + ki) * kw + kj;
                let col_row = cols.row(row);
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        plane[[iy as usize, ix as usize]] += col_row[oy * ow + ox];
                    }
                }
            }
        }
    }
}

/// `y[n] = W · im2col(x[n]) + b`, shapes `x (N,Cin,H,W)`, `w (Cout,Cin,kh,kw)`.
pub fn conv2d_forward(
    x: ArrayView4<f64>,
    w: ArrayView4<f64>,
    b: &Array1<f64>,
    stride: usize,
    pad: usize,
) -> Array4<f64> {
    let (n, c_in, h, width) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (c_out, wc_in, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    assert_eq!(c_in, wc_in, "conv channel mismatch");
    assert_eq!(b.len(), c_out);
    let oh = conv_out_size(h, kh, stride, pad);
    let ow = conv_out_size(width, kw, stride, pad);

    let w2 = w
        .to_shape((c_out, c_in * kh * kw))
        .expect("weight reshape")
        .to_owned();
    let mut out = Array4::<f64>::zeros((n, c_out, oh, ow));

    out.axis_chunks_iter_mut(Axis(0), CHUNK)
        .into_par_iter()
        .zip(x.axis_chunks_iter(Axis(0), CHUNK).into_par_iter())
        .for_each(|(mut out_chunk, x_chunk)| {
            let mut cols = Array2::<f64>::zeros((c_in * kh * kw, oh * ow));
            for (mut out_s, x_s) in out_chunk
                .axis_iter_mut(Axis(0))
                .zip(x_chunk.axis_iter(Axis(0)))
            {
                im2col(x_s, kh, kw, stride, pad, &mut cols);
                let mut out2 = out_s
                    .view_mut()
                    .into_shape_with_order((c_out, oh * ow))
                    .expect("output reshape");
                general_mat_mul(1.0, &w2.view(), &cols.view(), 0.0, &mut out2);
                for co in 0..c_out {
                    let bias = b[co];
                    out2.row_mut(co).mapv_inplace(|v| v + bias);
                }
            }
        });

    out
}

/// Gradients of `conv2d_forward` w.r.t. input, weights and bias.
pub fn conv2d_backward(
    x: ArrayView4<f64>,
    w: ArrayView4<f64>,
    dout: ArrayView4<f64>,
    stride: usize,
    pad: usize,
) -> (Array4<f64>, Array4<f64>, Array1<f64>) {
    let (n, c_in, h, width) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (c_out, _, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    let oh = conv_out_size(h, kh, stride, pad);
    let ow = conv_out_size(width, kw, stride, pad);
    debug_assert_eq!(dout.shape(), [n, c_out, oh, ow]);

    let k = c_in * kh * kw;
    let w2 = w.to_shape((c_out, k)).expect("weight reshape").to_owned();
    let mut dx = Array4::<f64>::zeros((n, c_in, h, width));

    // Per-chunk weight/bias gradient partials, reduced serially in chunk order.
    let partials: Vec<(Array2<f64>, Array1<f64>)> = dx
        .axis_chunks_iter_mut(Axis(0), CHUNK)
        .into_par_iter()
        .zip(x.axis_chunks_iter(Axis(0), CHUNK).into_par_iter())
        .zip(dout.axis_chunks_iter(Axis(0), CHUNK).into_par_iter())
        .map(|((mut dx_chunk, x_chunk), dout_chunk)| {
            let mut cols = Array2::<f64>::zeros((k, oh * ow));
            let mut dcols = Array2::<f64>::zeros((k, oh * ow));
            let mut dw_part = Array2::<f64>::zeros((c_out, k));
            let mut db_part = Array1::<f64>::zeros(c_out);

            for ((mut dx_s, x_s), dout_s) in dx_chunk
                .axis_iter_mut(Axis(0))
                .zip(x_chunk.axis_iter(Axis(0)))
                .zip(dout_chunk.axis_iter(Axis(0)))
            {
                let dout2 = dout_s
                    .into_shape_with_order((c_out, oh * ow))
                    .expect("dout reshape");
                im2col(x_s, kh, kw, stride, pad, &mut cols);
                general_mat_mul(1.0, &dout2, &cols.t(), 1.0, &mut dw_part);
                general_mat_mul(1.0, &w2.t(), &dout2, 0.0, &mut dcols);
                col2im(dcols.view(), kh, kw, stride, pad, &mut dx_s);
                for co in 0..c_out {
                    db_part[co] += dout2.row(co).sum();
                }
            }
            (dw_part, db_part)
        })
        .collect();

    let mut dw2 = Array2::<f64>::zeros((c_out, k));
    let mut db = Array1::<f64>::zeros(c_out);
    for (dw_part, db_part) in partials {
        dw2 += &dw_part;
        db += &db_part;
    }
    let dw = dw2
        .into_shape_with_order((c_out, c_in, kh, kw))
        .expect("dw reshape");
    (dx, dw, db)
}

/// Interpolation taps for 2x bilinear upsampling without corner alignment:
/// source coordinate of output index `i` is `i/2 - 0.25`, clamped at edges.
/// Returns `(lo, hi, w_hi)` per output index.
fn bilinear2x_taps(n_in: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * n_in)
        .map(|i| {
            let src = (i as f64 + 0.5) / 2.0 - 0.5;
            let lo = src.floor();
            let w_hi = src - lo;
            let lo_i = (lo.max(0.0) as usize).min(n_in - 1);
            let hi_i = ((lo as isize + 1).max(0) as usize).min(n_in - 1);
            (lo_i, hi_i, w_hi)
        })
        .collect()
}

pub fn upsample2x_forward(x: ArrayView4<f64>) -> Array4<f64> {
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let taps_y = bilinear2x_taps(h);
    let taps_x = bilinear2x_taps(w);
    let mut out = Array4::<f64>::zeros((n, c, 2 * h, 2 * w));
    for bn in 0..n {
        for bc in 0..c {
            let plane = x.index_axis(Axis(0), bn);
            let plane = plane.index_axis(Axis(0), bc);
            let mut out_plane = out.index_axis_mut(Axis(0), bn);
            let mut out_plane = out_plane.index_axis_mut(Axis(0), bc);
            for (oy, &(y0, y1, wy)) in taps_y.iter().enumerate() {
                for (ox, &(x0, x1, wx)) in taps_x.iter().enumerate() {
                    let top = plane[[y0, x0]] * (1.0 - wx) + plane[[y0, x1]] * wx;
                    let bot = plane[[y1, x0]] * (1.0 - wx) + plane[[y1, x1]] * wx;
                    out_plane[[oy, ox]] = top * (1.0 - wy) + bot * wy;
                }
            }
        }
    }
    out
}

pub fn upsample2x_backward(dout: ArrayView4<f64>, in_h: usize, in_w: usize) -> Array4<f64> {
    let (n, c) = (dout.shape()[0], dout.shape()[1]);
    let taps_y = bilinear2x_taps(in_h);
    let taps_x = bilinear2x_taps(in_w);
    let mut dx = Array4::<f64>::zeros((n, c, in_h, in_w));
    for bn in 0..n {
        for bc in 0..c {
            let dplane = dout.index_axis(Axis(0), bn);
            let dplane = dplane.index_axis(Axis(0), bc);
            let mut dx_plane = dx.index_axis_mut(Axis(0), bn);
            let mut dx_plane = dx_plane.index_axis_mut(Axis(0), bc);
            for (oy, &(y0, y1, wy)) in taps_y.iter().enumerate() {
                for (ox, &(x0, x1, wx)) in taps_x.iter().enumerate() {
                    let g = dplane[[oy, ox]];
                    dx_plane[[y0, x0]] += g * (1.0 - wy) * (1.0 - wx);
                    dx_plane[[y0, x1]] += g * (1.0 - wy) * wx;
                    dx_plane[[y1, x0]] += g * wy * (1.0 - wx);
                    dx_plane[[y1, x1]] += g * wy * wx;
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array4};

    #[test]
    fn conv_identity_kernel_passes_through() {
        // 1x1 kernel with weight 1 and zero bias is the identity.
        let x = Array4::from_shape_fn((2, 1, 4, 4), |(n, _, i, j)| (n * 16 + i * 4 + j) as f64);
        let w = Array4::from_elem((1, 1, 1, 1), 1.0);
        let b = arr1(&[0.0]);
        let y = conv2d_forward(x.view(), w.view(), &b, 1, 0);
        assert_eq!(y, x);
    }

    #[test]
    fn conv_matches_direct_sum() {
        // Compare against a naive triple loop on a small case.
        let x = Array4::from_shape_fn((1, 2, 5, 5), |(_, c, i, j)| {
            ((c * 25 + i * 5 + j) as f64 * 0.1).sin()
        });
        let w = Array4::from_shape_fn((3, 2, 3, 3), |(o, c, i, j)| {
            ((o * 18 + c * 9 + i * 3 + j) as f64 * 0.07).cos()
        });
        let b = arr1(&[0.1, -0.2, 0.3]);
        let y = conv2d_forward(x.view(), w.view(), &b, 2, 1);
        let oh = conv_out_size(5, 3, 2, 1);
        assert_eq!(y.shape(), [1, 3, oh, oh]);

        for co in 0..3 {
            for oy in 0..oh {
                for ox in 0..oh {
                    let mut acc = b[co];
                    for c in 0..2 {
                        for ki in 0..3 {
                            for kj in 0..3 {
                                let iy = (oy * 2 + ki) as isize - 1;
                                let ix = (ox * 2 + kj) as isize - 1;
                                if iy >= 0 && iy < 5 && ix >= 0 && ix < 5 {
                                    acc += x[[0, c, iy as usize, ix as usize]]
                                        * w[[co, c, ki, kj]];
                                }
                            }
                        }
                    }
                    assert!((y[[0, co, oy, ox]] - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn upsample_constant_stays_constant() {
        let x = Array4::from_elem((1, 1, 4, 4), 0.7);
        let y = upsample2x_forward(x.view());
        assert_eq!(y.shape(), [1, 1, 8, 8]);
        for v in y.iter() {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn upsample_backward_is_adjoint() {
        // <up(x), g> == <x, up^T(g)> for random x, g.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = Array4::from_shape_fn((2, 3, 4, 5), |_| rng.random::<f64>() - 0.5);
        let g = Array4::from_shape_fn((2, 3, 8, 10), |_| rng.random::<f64>() - 0.5);
        let up = upsample2x_forward(x.view());
        let down = upsample2x_backward(g.view(), 4, 5);
        let lhs: f64 = (&up * &g).sum();
        let rhs: f64 = (&x * &down).sum();
        assert!((lhs - rhs).abs() < 1e-10, "lhs={lhs} rhs={rhs}");
    }
}
