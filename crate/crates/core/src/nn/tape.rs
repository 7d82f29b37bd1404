//! Reverse-mode automatic differentiation on a flat tape.
//!
//! Ops evaluate eagerly as they are inserted, so the node list is already in
//! topological order and `backward` is a single reverse sweep. Values are
//! dynamic-dimension `f64` arrays; double precision keeps finite-difference
//! gradient checks meaningful and checkpoints bit-exact.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayD, Axis, IxDyn, Slice};

use super::conv;

pub type Arr = ArrayD<f64>;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

struct Node {
    value: Arr,
    op: Op,
    requires_grad: bool,
}

enum Op {
    Constant,
    Param(usize),
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: usize,
    },
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    InstanceNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        // saved statistics, per (sample, channel)
        mean: Array2<f64>,
        inv_std: Array2<f64>,
    },
    Relu {
        x: Var,
    },
    LeakyRelu {
        x: Var,
        alpha: f64,
    },
    Tanh {
        x: Var,
    },
    Upsample2x {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Affine {
        x: Var,
        mul: f64,
    },
    Abs {
        x: Var,
    },
    Square {
        x: Var,
    },
    MeanAll {
        x: Var,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    SliceAxis {
        x: Var,
        axis: usize,
        start: usize,
        end: usize,
    },
    Reshape {
        x: Var,
    },
    StopGrad,
    /// clamp(x + noise, -1, 1); gradient passes where unclamped.
    ClampedAdd {
        x: Var,
        noise: Arr,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        softmax: Array2<f64>,
    },
}

/// Per-node gradients produced by `Tape::backward`.
pub struct Gradients {
    grads: Vec<Option<Arr>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Arr> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Arr {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = &self.nodes[v.0].value;
        assert_eq!(val.len(), 1, "expected scalar node");
        *val.iter().next().unwrap()
    }

    fn push(&mut self, value: Arr, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn constant(&mut self, value: Arr) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Insert a parameter leaf. `pid` identifies the parameter in the store
    /// that owns it; gradients are collected per pid after `backward`.
    pub fn param(&mut self, pid: usize, value: Arr) -> Var {
        self.push(value, Op::Param(pid), true)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Var {
        let xv = self.value(x).view().into_dimensionality().expect("conv2d: x must be 4-d");
        let wv = self.value(w).view().into_dimensionality().expect("conv2d: w must be 4-d");
        let bv: Array1<f64> = self
            .value(b)
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .expect("conv2d: b must be 1-d")
            .to_owned();
        let out = conv::conv2d_forward(xv, wv, &bv, stride, pad).into_dyn();
        let req = self.requires(x) || self.requires(w) || self.requires(b);
        self.push(out, Op::Conv2d { x, w, b, stride, pad }, req)
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xv = self
            .value(x)
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("linear: x must be 2-d");
        let wv = self
            .value(w)
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("linear: w must be 2-d");
        let bv = self
            .value(b)
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .expect("linear: b must be 1-d");
        assert_eq!(xv.shape()[1], wv.shape()[1], "linear: feature dim mismatch");
        assert_eq!(wv.shape()[0], bv.len(), "linear: bias dim mismatch");
        let mut out = xv.dot(&wv.t());
        out += &bv;
        let req = self.requires(x) || self.requires(w) || self.requires(b);
        self.push(out.into_dyn(), Op::Linear { x, w, b }, req)
    }

    pub fn instance_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let xv = self
            .value(x)
            .view()
            .into_dimensionality::<ndarray::Ix4>()
            .expect("instance_norm: x must be 4-d");
        let g = self
            .value(gamma)
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .expect("instance_norm: gamma must be 1-d")
            .to_owned();
        let bt = self
            .value(beta)
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .expect("instance_norm: beta must be 1-d")
            .to_owned();
        let (n, c, h, w) = (xv.shape()[0], xv.shape()[1], xv.shape()[2], xv.shape()[3]);
        assert_eq!(g.len(), c);
        let m = (h * w) as f64;

        let mut mean = Array2::<f64>::zeros((n, c));
        let mut inv_std = Array2::<f64>::zeros((n, c));
        let mut out = xv.to_owned();
        for bn in 0..n {
            for bc in 0..c {
                let plane = xv.index_axis(Axis(0), bn);
                let plane = plane.index_axis(Axis(0), bc);
                let mu = plane.sum() / m;
                let var = plane.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m;
                let is = 1.0 / (var + eps).sqrt();
                mean[[bn, bc]] = mu;
                inv_std[[bn, bc]] = is;
                let mut out_plane = out.index_axis_mut(Axis(0), bn);
                let mut out_plane = out_plane.index_axis_mut(Axis(0), bc);
                out_plane.mapv_inplace(|v| (v - mu) * is * g[bc] + bt[bc]);
            }
        }
        let req = self.requires(x) || self.requires(gamma) || self.requires(beta);
        self.push(
            out.into_dyn(),
            Op::InstanceNorm {
                x,
                gamma,
                beta,
                mean,
                inv_std,
            },
            req,
        )
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| v.max(0.0));
        let req = self.requires(x);
        self.push(out, Op::Relu { x }, req)
    }

    pub fn leaky_relu(&mut self, x: Var, alpha: f64) -> Var {
        let out = self.value(x).mapv(|v| if v > 0.0 { v } else { alpha * v });
        let req = self.requires(x);
        self.push(out, Op::LeakyRelu { x, alpha }, req)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(f64::tanh);
        let req = self.requires(x);
        self.push(out, Op::Tanh { x }, req)
    }

    pub fn upsample2x(&mut self, x: Var) -> Var {
        let xv = self
            .value(x)
            .view()
            .into_dimensionality::<ndarray::Ix4>()
            .expect("upsample2x: x must be 4-d");
        let out = conv::upsample2x_forward(xv).into_dyn();
        let req = self.requires(x);
        self.push(out, Op::Upsample2x { x }, req)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "add: shape mismatch");
        let out = self.value(a) + self.value(b);
        let req = self.requires(a) || self.requires(b);
        self.push(out, Op::Add { a, b }, req)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "sub: shape mismatch");
        let out = self.value(a) - self.value(b);
        let req = self.requires(a) || self.requires(b);
        self.push(out, Op::Sub { a, b }, req)
    }

    pub fn affine(&mut self, x: Var, mul: f64, add: f64) -> Var {
        let out = self.value(x).mapv(|v| v * mul + add);
        let req = self.requires(x);
        self.push(out, Op::Affine { x, mul }, req)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(f64::abs);
        let req = self.requires(x);
        self.push(out, Op::Abs { x }, req)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| v * v);
        let req = self.requires(x);
        self.push(out, Op::Square { x }, req)
    }

    /// Mean over all elements, producing a 0-d scalar node.
    pub fn mean_all(&mut self, x: Var) -> Var {
        let m = self.value(x).sum() / self.value(x).len() as f64;
        let req = self.requires(x);
        self.push(Arr::from_elem(IxDyn(&[]), m), Op::MeanAll { x }, req)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let out = ndarray::concatenate(Axis(axis), &views).expect("concat: incompatible shapes");
        let req = parts.iter().any(|p| self.requires(*p));
        self.push(
            out,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            req,
        )
    }

    pub fn slice_axis(&mut self, x: Var, axis: usize, start: usize, end: usize) -> Var {
        let out = self
            .value(x)
            .slice_axis(Axis(axis), Slice::from(start..end))
            .to_owned();
        let req = self.requires(x);
        self.push(out, Op::SliceAxis { x, axis, start, end }, req)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        let out = self
            .value(x)
            .to_shape(IxDyn(shape))
            .expect("reshape: element count mismatch")
            .to_owned();
        let req = self.requires(x);
        self.push(out, Op::Reshape { x }, req)
    }

    /// Identity in the forward pass; blocks all gradient flow in backward.
    pub fn stop_grad(&mut self, x: Var) -> Var {
        let out = self.value(x).clone();
        self.push(out, Op::StopGrad, false)
    }

    /// clamp(x + noise, -1, 1). Used for instance noise on images.
    pub fn add_clamped_noise(&mut self, x: Var, noise: Arr) -> Var {
        assert_eq!(self.value(x).shape(), noise.shape(), "noise shape mismatch");
        let out = ndarray::Zip::from(self.value(x))
            .and(&noise)
            .map_collect(|&v, &n| (v + n).clamp(-1.0, 1.0));
        let req = self.requires(x);
        self.push(out, Op::ClampedAdd { x, noise }, req)
    }

    /// Mean cross-entropy between row-wise softmax of `logits` and integer labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Var {
        let lv = self
            .value(logits)
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("softmax_cross_entropy: logits must be 2-d");
        let (n, k) = (lv.shape()[0], lv.shape()[1]);
        assert_eq!(labels.len(), n, "label count mismatch");
        let mut softmax = Array2::<f64>::zeros((n, k));
        let mut loss = 0.0;
        for i in 0..n {
            let row = lv.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..k {
                let e = (row[j] - max).exp();
                softmax[[i, j]] = e;
                denom += e;
            }
            softmax.row_mut(i).mapv_inplace(|v| v / denom);
            loss += denom.ln() + max - row[labels[i]];
        }
        loss /= n as f64;
        let req = self.requires(logits);
        self.push(
            Arr::from_elem(IxDyn(&[]), loss),
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                softmax,
            },
            req,
        )
    }

    /// Reverse sweep from a scalar root. Returns per-node gradients.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(
            self.value(root).len(),
            1,
            "backward root must be a scalar node"
        );
        let mut grads: Vec<Option<Arr>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Arr::from_elem(self.value(root).raw_dim(), 1.0));

        for idx in (0..=root.0).rev() {
            if !self.nodes[idx].requires_grad && !matches!(self.nodes[idx].op, Op::Param(_)) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads);
            // Param and leaf gradients stay; interior grads could be dropped,
            // but keeping them is useful for tests probing d(loss)/d(input).
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    /// Collect gradients of parameter leaves, summed per parameter id.
    pub fn param_grads(&self, grads: &Gradients) -> HashMap<usize, Arr> {
        let mut out: HashMap<usize, Arr> = HashMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Param(pid) = node.op {
                if let Some(g) = &grads.grads[idx] {
                    out.entry(pid)
                        .and_modify(|acc| *acc += g)
                        .or_insert_with(|| g.clone());
                }
            }
        }
        out
    }

    fn accum(&self, grads: &mut [Option<Arr>], target: Var, g: Arr) {
        if !self.nodes[target.0].requires_grad && !matches!(self.nodes[target.0].op, Op::Param(_)) {
            return;
        }
        match &mut grads[target.0] {
            Some(acc) => *acc += &g,
            slot @ None => *slot = Some(g),
        }
    }

    fn backprop_node(&self, idx: usize, g: &Arr, grads: &mut [Option<Arr>]) {
        match &self.nodes[idx].op {
            Op::Constant | Op::Param(_) | Op::StopGrad => {}
            Op::Conv2d { x, w, b, stride, pad } => {
                let xv = self.value(*x).view().into_dimensionality().unwrap();
                let wv = self.value(*w).view().into_dimensionality().unwrap();
                let gv = g.view().into_dimensionality().unwrap();
                let (dx, dw, db) = conv::conv2d_backward(xv, wv, gv, *stride, *pad);
                self.accum(grads, *x, dx.into_dyn());
                self.accum(grads, *w, dw.into_dyn());
                self.accum(grads, *b, db.into_dyn());
            }
            Op::Linear { x, w, b } => {
                let xv = self
                    .value(*x)
                    .view()
                    .into_dimensionality::<ndarray::Ix2>()
                    .unwrap();
                let wv = self
                    .value(*w)
                    .view()
                    .into_dimensionality::<ndarray::Ix2>()
                    .unwrap();
                let gv = g.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                let dx = gv.dot(&wv);
                let dw = gv.t().dot(&xv);
                let db = gv.sum_axis(Axis(0));
                self.accum(grads, *x, dx.into_dyn());
                self.accum(grads, *w, dw.into_dyn());
                self.accum(grads, *b, db.into_dyn());
            }
            Op::InstanceNorm {
                x,
                gamma,
                beta,
                mean,
                inv_std,
            } => {
                let xv = self
                    .value(*x)
                    .view()
                    .into_dimensionality::<ndarray::Ix4>()
                    .unwrap();
                let gv = g.view().into_dimensionality::<ndarray::Ix4>().unwrap();
                let gamma_v = self
                    .value(*gamma)
                    .view()
                    .into_dimensionality::<ndarray::Ix1>()
                    .unwrap();
                let (n, c, h, w) = (xv.shape()[0], xv.shape()[1], xv.shape()[2], xv.shape()[3]);
                let m = (h * w) as f64;
                let mut dx = ndarray::Array4::<f64>::zeros((n, c, h, w));
                let mut dgamma = Array1::<f64>::zeros(c);
                let mut dbeta = Array1::<f64>::zeros(c);
                for bn in 0..n {
                    for bc in 0..c {
                        let mu = mean[[bn, bc]];
                        let is = inv_std[[bn, bc]];
                        let x_plane = xv.index_axis(Axis(0), bn);
                        let x_plane = x_plane.index_axis(Axis(0), bc);
                        let g_plane = gv.index_axis(Axis(0), bn);
                        let g_plane = g_plane.index_axis(Axis(0), bc);

                        let mut sum_dy = 0.0;
                        let mut sum_dy_xhat = 0.0;
                        for (xi, gi) in x_plane.iter().zip(g_plane.iter()) {
                            let xhat = (xi - mu) * is;
                            sum_dy += gi;
                            sum_dy_xhat += gi * xhat;
                        }
                        dbeta[bc] += sum_dy;
                        dgamma[bc] += sum_dy_xhat;

                        let gam = gamma_v[bc];
                        let mut dx_plane = dx.index_axis_mut(Axis(0), bn);
                        let mut dx_plane = dx_plane.index_axis_mut(Axis(0), bc);
                        for ((xi, gi), di) in x_plane
                            .iter()
                            .zip(g_plane.iter())
                            .zip(dx_plane.iter_mut())
                        {
                            let xhat = (xi - mu) * is;
                            *di = gam * is / m * (m * gi - sum_dy - xhat * sum_dy_xhat);
                        }
                    }
                }
                self.accum(grads, *x, dx.into_dyn());
                self.accum(grads, *gamma, dgamma.into_dyn());
                self.accum(grads, *beta, dbeta.into_dyn());
            }
            Op::Relu { x } => {
                let dx = ndarray::Zip::from(self.value(*x))
                    .and(g)
                    .map_collect(|&v, &gi| if v > 0.0 { gi } else { 0.0 });
                self.accum(grads, *x, dx);
            }
            Op::LeakyRelu { x, alpha } => {
                let a = *alpha;
                let dx = ndarray::Zip::from(self.value(*x))
                    .and(g)
                    .map_collect(|&v, &gi| if v > 0.0 { gi } else { a * gi });
                self.accum(grads, *x, dx);
            }
            Op::Tanh { x } => {
                let y = &self.nodes[idx].value;
                let dx = ndarray::Zip::from(y)
                    .and(g)
                    .map_collect(|&yv, &gi| gi * (1.0 - yv * yv));
                self.accum(grads, *x, dx);
            }
            Op::Upsample2x { x } => {
                let in_shape = self.value(*x).shape().to_vec();
                let gv = g.view().into_dimensionality::<ndarray::Ix4>().unwrap();
                let dx = conv::upsample2x_backward(gv, in_shape[2], in_shape[3]);
                self.accum(grads, *x, dx.into_dyn());
            }
            Op::Add { a, b } => {
                self.accum(grads, *a, g.clone());
                self.accum(grads, *b, g.clone());
            }
            Op::Sub { a, b } => {
                self.accum(grads, *a, g.clone());
                self.accum(grads, *b, g.mapv(|v| -v));
            }
            Op::Affine { x, mul } => {
                self.accum(grads, *x, g.mapv(|v| v * mul));
            }
            Op::Abs { x } => {
                let dx = ndarray::Zip::from(self.value(*x))
                    .and(g)
                    .map_collect(|&v, &gi| gi * v.signum() * if v == 0.0 { 0.0 } else { 1.0 });
                self.accum(grads, *x, dx);
            }
            Op::Square { x } => {
                let dx = ndarray::Zip::from(self.value(*x))
                    .and(g)
                    .map_collect(|&v, &gi| 2.0 * v * gi);
                self.accum(grads, *x, dx);
            }
            Op::MeanAll { x } => {
                let scale = *g.iter().next().unwrap() / self.value(*x).len() as f64;
                let dx = Arr::from_elem(self.value(*x).raw_dim(), scale);
                self.accum(grads, *x, dx);
            }
            Op::Concat { parts, axis } => {
                let mut offset = 0;
                for p in parts {
                    let len = self.value(*p).shape()[*axis];
                    let dx = g
                        .slice_axis(Axis(*axis), Slice::from(offset..offset + len))
                        .to_owned();
                    self.accum(grads, *p, dx);
                    offset += len;
                }
            }
            Op::SliceAxis { x, axis, start, end } => {
                let mut dx = Arr::zeros(self.value(*x).raw_dim());
                dx.slice_axis_mut(Axis(*axis), Slice::from(*start..*end))
                    .assign(g);
                self.accum(grads, *x, dx);
            }
            Op::Reshape { x } => {
                let dx = g
                    .to_shape(self.value(*x).raw_dim())
                    .expect("reshape backward")
                    .to_owned();
                self.accum(grads, *x, dx);
            }
            Op::ClampedAdd { x, noise } => {
                let dx = ndarray::Zip::from(self.value(*x))
                    .and(noise)
                    .and(g)
                    .map_collect(|&v, &n, &gi| {
                        let s = v + n;
                        if s > -1.0 && s < 1.0 {
                            gi
                        } else {
                            0.0
                        }
                    });
                self.accum(grads, *x, dx);
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                softmax,
            } => {
                let scale = *g.iter().next().unwrap() / labels.len() as f64;
                let mut dl = softmax.clone();
                for (i, &lab) in labels.iter().enumerate() {
                    dl[[i, lab]] -= 1.0;
                }
                dl.mapv_inplace(|v| v * scale);
                self.accum(grads, *logits, dl.into_dyn());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_grads;
    use crate::nn::params::{gaussian_init, ones_init, zeros_init, ParamGroup, ParamStore};
    use ndarray::{arr1, arr2};
    use rand::SeedableRng;

    /// Exercise every op in one graph and compare analytic gradients with
    /// central differences.
    #[test]
    fn all_ops_pass_finite_difference_check() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut store = ParamStore::new();
        let g = ParamGroup::Generator;
        let conv_w = store.add("conv.w", g, gaussian_init(&[2, 2, 3, 3], 0.4, &mut rng));
        let conv_b = store.add("conv.b", g, gaussian_init(&[2], 0.2, &mut rng));
        let gamma = store.add("in.gamma", g, ones_init(&[2]));
        let beta = store.add("in.beta", g, zeros_init(&[2]));
        let lin_w = store.add("lin.w", g, gaussian_init(&[3, 200], 0.1, &mut rng));
        let lin_b = store.add("lin.b", g, gaussian_init(&[3], 0.1, &mut rng));

        let x_data = gaussian_init(&[2, 2, 5, 5], 0.8, &mut rng);
        let noise = gaussian_init(&[2, 2, 5, 5], 0.05, &mut rng);

        let eval = |store: &ParamStore,
                    x_data: &Arr,
                    noise: &Arr|
         -> (f64, Option<(Tape, Var)>) {
            let mut t = Tape::new();
            let x0 = t.constant(x_data.clone());
            // force gradient tracking through the input path
            let zero = t.constant(Arr::zeros(x_data.raw_dim()));
            let x = t.add(x0, zero);
            let w = t.param(conv_w, store.value(conv_w).clone());
            let b = t.param(conv_b, store.value(conv_b).clone());
            let ga = t.param(gamma, store.value(gamma).clone());
            let be = t.param(beta, store.value(beta).clone());
            let lw = t.param(lin_w, store.value(lin_w).clone());
            let lb = t.param(lin_b, store.value(lin_b).clone());

            let noisy = t.add_clamped_noise(x, noise.clone());
            let c = t.conv2d(noisy, w, b, 1, 1);
            let n = t.instance_norm(c, ga, be, 1e-5);
            let lr = t.leaky_relu(n, 0.2);
            let up = t.upsample2x(lr);
            let th = t.tanh(up);
            let flat = t.reshape(th, &[2, 200]);
            let lin = t.linear(flat, lw, lb);
            let r = t.relu(lin);
            let aff = t.affine(r, 1.5, -0.1);
            let sl_a = t.slice_axis(aff, 1, 0, 2);
            let sl_b = t.slice_axis(aff, 1, 1, 3);
            let cat = t.concat(&[sl_a, sl_b], 1);
            let scaled = t.affine(cat, 0.7, 0.05);
            let diff = t.sub(cat, scaled);
            let ab = t.abs(diff);
            let sq = t.square(cat);
            let sum = t.add(ab, sq);
            let m1 = t.mean_all(sum);
            let ce = t.softmax_cross_entropy(lin, &[0, 2]);
            let loss = t.add(m1, ce);
            let v = t.scalar(loss);
            (v, Some((t, loss)))
        };

        let (_, built) = eval(&store, &x_data, &noise);
        let (tape, loss) = built.unwrap();
        let grads = tape.backward(loss);
        let analytic = tape.param_grads(&grads);

        let pids: Vec<usize> = (0..store.len()).collect();
        let report = check_grads(&mut store, &analytic, &pids, 1, |s| {
            eval(s, &x_data, &noise).0
        });
        assert!(
            report.passes(1e-4),
            "max rel err {} at {:?}",
            report.max_rel_err,
            report.worst
        );
        assert!(report.checked > 600);
    }

    #[test]
    fn conv_stride2_padded_gradcheck() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let g = ParamGroup::Generator;
        let w = store.add("w", g, gaussian_init(&[3, 2, 4, 4], 0.3, &mut rng));
        let b = store.add("b", g, gaussian_init(&[3], 0.2, &mut rng));
        let x_data = gaussian_init(&[3, 2, 6, 6], 0.7, &mut rng);

        let eval = |store: &ParamStore| -> (f64, Option<(Tape, Var)>) {
            let mut t = Tape::new();
            let x = t.constant(x_data.clone());
            let wv = t.param(w, store.value(w).clone());
            let bv = t.param(b, store.value(b).clone());
            let c = t.conv2d(x, wv, bv, 2, 1);
            let sq = t.square(c);
            let loss = t.mean_all(sq);
            (t.scalar(loss), Some((t, loss)))
        };

        let (_, built) = eval(&store);
        let (tape, loss) = built.unwrap();
        let grads = tape.backward(loss);
        let analytic = tape.param_grads(&grads);
        let report = check_grads(&mut store, &analytic, &[w, b], 1, |s| eval(s).0);
        assert!(
            report.passes(1e-4),
            "max rel err {} at {:?}",
            report.max_rel_err,
            report.worst
        );
    }

    #[test]
    fn stop_grad_blocks_flow() {
        let mut t = Tape::new();
        let p = t.param(0, arr1(&[2.0, -1.0]).into_dyn());
        let s = t.stop_grad(p);
        let sq = t.square(s);
        let loss = t.mean_all(sq);
        let grads = t.backward(loss);
        assert!(t.param_grads(&grads).is_empty());
    }

    #[test]
    fn linear_gradients_match_by_hand() {
        // f = mean(x W^T + b), x is 1x2, W is 1x2 -> df/dW = x, df/db = 1.
        let mut t = Tape::new();
        let x = t.constant(arr2(&[[3.0, -2.0]]).into_dyn());
        let w = t.param(0, arr2(&[[0.5, 0.25]]).into_dyn());
        let b = t.param(1, arr1(&[0.1]).into_dyn());
        let y = t.linear(x, w, b);
        let loss = t.mean_all(y);
        let grads = t.backward(loss);
        let pg = t.param_grads(&grads);
        let dw = pg.get(&0).unwrap();
        let db = pg.get(&1).unwrap();
        assert_eq!(dw.shape(), [1, 2]);
        assert!((dw[[0, 0]] - 3.0).abs() < 1e-12);
        assert!((dw[[0, 1]] + 2.0).abs() < 1e-12);
        assert!((db[[0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shared_node_gradients_accumulate() {
        // loss = mean(p + p) -> dloss/dp = 2/len
        let mut t = Tape::new();
        let p = t.param(0, arr1(&[1.0, 2.0]).into_dyn());
        let s = t.add(p, p);
        let loss = t.mean_all(s);
        let grads = t.backward(loss);
        let pg = t.param_grads(&grads);
        let dp = pg.get(&0).unwrap();
        assert!((dp[[0]] - 1.0).abs() < 1e-12);
        assert!((dp[[1]] - 1.0).abs() < 1e-12);
    }
}
