use super::kernels;
use super::tensor::{Scalar, Tensor};
use super::TensorError;

/// Handle to a node in a [`Graph`].
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        pad: usize,
    },
    Relu {
        input: NodeId,
    },
    Linear {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    Add {
        lhs: NodeId,
        rhs: NodeId,
    },
    ConcatChannels {
        parts: Vec<NodeId>,
    },
    BilinearResize {
        input: NodeId,
    },
    L1Mean {
        lhs: NodeId,
        rhs: NodeId,
    },
    AxisDiff {
        input: NodeId,
        axis: usize,
    },
    Scale {
        input: NodeId,
        factor: f64,
    },
    Reshape {
        input: NodeId,
    },
    DecoderRows {
        features: NodeId,
        coords: NodeId,
    },
    ViewsFromChannels {
        input: NodeId,
        n_views: usize,
    },
}

struct Node<T: Scalar> {
    t: Tensor<T>,
    op: Op,
}

/// Append-only computation tape. Node indices are topologically ordered by
/// construction, so one reverse sweep propagates gradients.
///
/// Graphs are cheap to build and are meant to live for a single forward
/// (and optional backward) pass; parameters are bound as leaves each pass.
pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    /// Inserts a tensor as a graph input. Gradients flow into it only when
    /// `requires_grad` is set on the tensor.
    pub fn leaf(&mut self, t: Tensor<T>) -> NodeId {
        self.push(t, Op::Leaf)
    }

    pub fn data(&self, id: NodeId) -> &[T] {
        self.nodes[id.0].t.data()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].t.shape()
    }

    pub fn grad(&self, id: NodeId) -> Option<&[T]> {
        self.nodes[id.0].t.grad()
    }

    /// Moves the node's tensor out of the graph (data and grad).
    pub fn take(&mut self, id: NodeId) -> Tensor<T> {
        std::mem::replace(&mut self.nodes[id.0].t, Tensor::zeros(vec![0]))
    }

    pub fn clear_grads(&mut self) {
        for n in &mut self.nodes {
            n.t.grad = None;
        }
    }

    fn push(&mut self, t: Tensor<T>, op: Op) -> NodeId {
        self.nodes.push(Node { t, op });
        NodeId(self.nodes.len() - 1)
    }

    fn push_result(
        &mut self,
        shape: Vec<usize>,
        data: Vec<T>,
        requires_grad: bool,
        op: Op,
    ) -> NodeId {
        let mut t = Tensor::new(shape, data).expect("op produced inconsistent shape");
        t.requires_grad = requires_grad;
        self.push(t, op)
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id.0].t.requires_grad
    }

    fn rank3(&self, id: NodeId, op: &'static str) -> Result<(usize, usize, usize), TensorError> {
        match self.shape(id) {
            [c, h, w] => Ok((*c, *h, *w)),
            other => Err(TensorError::ShapeMismatch {
                op,
                details: format!("expected a [channels, height, width] tensor, got {other:?}"),
            }),
        }
    }

    /// Same-size 2D convolution with zero padding; `kernel` is
    /// `[c_out, c_in, k, k]` with odd `k` and `pad == (k - 1) / 2`.
    pub fn conv2d(
        &mut self,
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        pad: usize,
    ) -> Result<NodeId, TensorError> {
        let (c_in, h, w) = self.rank3(input, "conv2d")?;
        let kshape = self.shape(kernel).to_vec();
        let [c_out, kc_in, kh, kw] = kshape[..] else {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                details: format!("kernel must be rank 4, got {kshape:?}"),
            });
        };
        if kc_in != c_in {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                details: format!("kernel expects {kc_in} input channels, input has {c_in}"),
            });
        }
        if kh != kw || kh % 2 == 0 {
            return Err(TensorError::InvalidArgument {
                op: "conv2d",
                details: format!("kernel spatial size must be odd and square, got {kh}x{kw}"),
            });
        }
        if pad != (kh - 1) / 2 {
            return Err(TensorError::InvalidArgument {
                op: "conv2d",
                details: format!("pad must be (k-1)/2 = {} for k = {kh}, got {pad}", (kh - 1) / 2),
            });
        }
        if self.shape(bias) != [c_out] {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                details: format!(
                    "bias shape {:?} does not match {c_out} output channels",
                    self.shape(bias)
                ),
            });
        }
        let mut out = vec![T::zero(); c_out * h * w];
        kernels::conv2d_forward(
            self.data(input),
            c_in,
            h,
            w,
            self.data(kernel),
            c_out,
            kh,
            pad,
            self.data(bias),
            &mut out,
        );
        let rg = self.requires(input) || self.requires(kernel) || self.requires(bias);
        Ok(self.push_result(
            vec![c_out, h, w],
            out,
            rg,
            Op::Conv2d {
                input,
                kernel,
                bias,
                pad,
            },
        ))
    }

    /// Elementwise `max(0, x)`.
    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let data = self
            .data(input)
            .iter()
            .map(|v| v.max(T::zero()))
            .collect();
        let shape = self.shape(input).to_vec();
        let rg = self.requires(input);
        self.push_result(shape, data, rg, Op::Relu { input })
    }

    /// Affine map `weight * x + bias`; `x` may be a single vector `[n]` or a
    /// batch of rows `[p, n]`.
    pub fn linear(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    ) -> Result<NodeId, TensorError> {
        let xshape = self.shape(input).to_vec();
        let (p, n) = match xshape[..] {
            [n] => (1, n),
            [p, n] => (p, n),
            _ => {
                return Err(TensorError::ShapeMismatch {
                    op: "linear",
                    details: format!("input must be rank 1 or 2, got {xshape:?}"),
                })
            }
        };
        let [m, wn] = self.shape(weight)[..] else {
            return Err(TensorError::ShapeMismatch {
                op: "linear",
                details: format!("weight must be rank 2, got {:?}", self.shape(weight)),
            });
        };
        if wn != n {
            return Err(TensorError::ShapeMismatch {
                op: "linear",
                details: format!("weight expects {wn} inputs, got {n}"),
            });
        }
        if self.shape(bias) != [m] {
            return Err(TensorError::ShapeMismatch {
                op: "linear",
                details: format!("bias shape {:?}, expected [{m}]", self.shape(bias)),
            });
        }
        let mut out = vec![T::zero(); p * m];
        kernels::linear_forward(self.data(input), p, n, self.data(weight), m, self.data(bias), &mut out);
        let out_shape = if xshape.len() == 1 { vec![m] } else { vec![p, m] };
        let rg = self.requires(input) || self.requires(weight) || self.requires(bias);
        Ok(self.push_result(out_shape, out, rg, Op::Linear { input, weight, bias }))
    }

    /// Elementwise sum of two tensors of identical shape.
    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, TensorError> {
        if self.shape(lhs) != self.shape(rhs) {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                details: format!("{:?} vs {:?}", self.shape(lhs), self.shape(rhs)),
            });
        }
        let data = self
            .data(lhs)
            .iter()
            .zip(self.data(rhs))
            .map(|(a, b)| *a + *b)
            .collect();
        let shape = self.shape(lhs).to_vec();
        let rg = self.requires(lhs) || self.requires(rhs);
        Ok(self.push_result(shape, data, rg, Op::Add { lhs, rhs }))
    }

    /// Concatenates `[c_i, h, w]` tensors along the channel dimension in
    /// list order.
    pub fn concat_channels(&mut self, parts: &[NodeId]) -> Result<NodeId, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat_channels",
                details: "no parts given".into(),
            });
        }
        let (_, h, w) = self.rank3(parts[0], "concat_channels")?;
        let mut total_c = 0;
        for &p in parts {
            let (c, ph, pw) = self.rank3(p, "concat_channels")?;
            if (ph, pw) != (h, w) {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_channels",
                    details: format!("spatial extents {ph}x{pw} differ from {h}x{w}"),
                });
            }
            total_c += c;
        }
        let mut data = Vec::with_capacity(total_c * h * w);
        for &p in parts {
            data.extend_from_slice(self.data(p));
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        Ok(self.push_result(
            vec![total_c, h, w],
            data,
            rg,
            Op::ConcatChannels {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Align-corners bilinear resize of a `[c, h, w]` tensor.
    pub fn bilinear_resize(
        &mut self,
        input: NodeId,
        h2: usize,
        w2: usize,
    ) -> Result<NodeId, TensorError> {
        let (c, h, w) = self.rank3(input, "bilinear_resize")?;
        if h2 == 0 || w2 == 0 {
            return Err(TensorError::InvalidArgument {
                op: "bilinear_resize",
                details: format!("target extent {h2}x{w2} must be at least 1x1"),
            });
        }
        let mut out = vec![T::zero(); c * h2 * w2];
        kernels::bilinear_forward(self.data(input), c, h, w, h2, w2, &mut out);
        let rg = self.requires(input);
        Ok(self.push_result(vec![c, h2, w2], out, rg, Op::BilinearResize { input }))
    }

    /// Mean absolute difference, reduced to a scalar. The subgradient at
    /// zero difference is zero.
    pub fn l1_mean(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, TensorError> {
        if self.shape(lhs) != self.shape(rhs) {
            return Err(TensorError::ShapeMismatch {
                op: "l1_mean",
                details: format!("{:?} vs {:?}", self.shape(lhs), self.shape(rhs)),
            });
        }
        if self.data(lhs).is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "l1_mean",
                details: "cannot reduce an empty tensor".into(),
            });
        }
        let mut acc = 0.0f64;
        for (a, b) in self.data(lhs).iter().zip(self.data(rhs)) {
            acc += (*a - *b).abs().as_f64();
        }
        let mean = T::from_f64(acc / self.data(lhs).len() as f64);
        let rg = self.requires(lhs) || self.requires(rhs);
        Ok(self.push_result(Vec::new(), vec![mean], rg, Op::L1Mean { lhs, rhs }))
    }

    /// Forward difference along `axis`: output extent shrinks by one.
    pub fn axis_diff(&mut self, input: NodeId, axis: usize) -> Result<NodeId, TensorError> {
        let shape = self.shape(input).to_vec();
        if axis >= shape.len() {
            return Err(TensorError::InvalidArgument {
                op: "axis_diff",
                details: format!("axis {axis} out of range for shape {shape:?}"),
            });
        }
        if shape[axis] < 2 {
            return Err(TensorError::InvalidArgument {
                op: "axis_diff",
                details: format!("axis {axis} has extent {} < 2", shape[axis]),
            });
        }
        let (outer, n, inner) = split3(&shape, axis);
        let mut out_shape = shape.clone();
        out_shape[axis] = n - 1;
        let x = self.data(input);
        let mut out = vec![T::zero(); outer * (n - 1) * inner];
        for o in 0..outer {
            for i in 0..n - 1 {
                let src0 = (o * n + i) * inner;
                let src1 = (o * n + i + 1) * inner;
                let dst = (o * (n - 1) + i) * inner;
                for j in 0..inner {
                    out[dst + j] = x[src1 + j] - x[src0 + j];
                }
            }
        }
        let rg = self.requires(input);
        Ok(self.push_result(out_shape, out, rg, Op::AxisDiff { input, axis }))
    }

    /// Multiplies every element by a constant.
    pub fn scale(&mut self, input: NodeId, factor: f64) -> NodeId {
        let f = T::from_f64(factor);
        let data = self.data(input).iter().map(|v| *v * f).collect();
        let shape = self.shape(input).to_vec();
        let rg = self.requires(input);
        self.push_result(shape, data, rg, Op::Scale { input, factor })
    }

    /// Reinterprets the tensor with a new shape of equal element count.
    pub fn reshape(&mut self, input: NodeId, shape: Vec<usize>) -> Result<NodeId, TensorError> {
        let numel: usize = shape.iter().product();
        if numel != self.data(input).len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                details: format!(
                    "cannot view {} elements as {shape:?}",
                    self.data(input).len()
                ),
            });
        }
        let data = self.data(input).to_vec();
        let rg = self.requires(input);
        Ok(self.push_result(shape, data, rg, Op::Reshape { input }))
    }

    /// Builds decoder input rows from a feature map and a per-row
    /// coordinate matrix.
    ///
    /// `features` is `[d, h, w]`; `coords` is `[p, q]` with `p` a multiple
    /// of `h * w`, ordered angular-major then row-major over pixels. Output
    /// row `a * h * w + i * w + j` is `[features[:, i, j], coords[row, :]]`.
    pub fn decoder_rows(
        &mut self,
        features: NodeId,
        coords: NodeId,
    ) -> Result<NodeId, TensorError> {
        let (d, h, w) = self.rank3(features, "decoder_rows")?;
        let [p, q] = self.shape(coords)[..] else {
            return Err(TensorError::ShapeMismatch {
                op: "decoder_rows",
                details: format!("coords must be rank 2, got {:?}", self.shape(coords)),
            });
        };
        let hw = h * w;
        if hw == 0 || p % hw != 0 {
            return Err(TensorError::ShapeMismatch {
                op: "decoder_rows",
                details: format!("{p} coordinate rows do not tile {h}x{w} pixels"),
            });
        }
        let reps = p / hw;
        let fm = self.data(features);
        let co = self.data(coords);
        let stride = d + q;
        let mut out = vec![T::zero(); p * stride];
        // Tiled copy: transposing [d, hw] feature planes into row-major rows.
        const TILE: usize = 128;
        for a in 0..reps {
            let base_row = a * hw;
            let mut t0 = 0;
            while t0 < hw {
                let t1 = (t0 + TILE).min(hw);
                for ch in 0..d {
                    let plane = &fm[ch * hw..(ch + 1) * hw];
                    for pix in t0..t1 {
                        out[(base_row + pix) * stride + ch] = plane[pix];
                    }
                }
                t0 = t1;
            }
        }
        for r in 0..p {
            out[r * stride + d..(r + 1) * stride].copy_from_slice(&co[r * q..(r + 1) * q]);
        }
        let rg = self.requires(features) || self.requires(coords);
        Ok(self.push_result(
            vec![p, stride],
            out,
            rg,
            Op::DecoderRows { features, coords },
        ))
    }

    /// Reorders `[n_views * c, h, w]` channel planes into `[n_views, h, w, c]`.
    pub fn views_from_channels(
        &mut self,
        input: NodeId,
        n_views: usize,
    ) -> Result<NodeId, TensorError> {
        let (cc, h, w) = self.rank3(input, "views_from_channels")?;
        if n_views == 0 || cc % n_views != 0 {
            return Err(TensorError::ShapeMismatch {
                op: "views_from_channels",
                details: format!("{cc} channels do not split into {n_views} views"),
            });
        }
        let c = cc / n_views;
        let x = self.data(input);
        let hw = h * w;
        let mut out = vec![T::zero(); cc * hw];
        for a in 0..n_views {
            for ch in 0..c {
                let plane = &x[(a * c + ch) * hw..(a * c + ch + 1) * hw];
                for pix in 0..hw {
                    out[(a * hw + pix) * c + ch] = plane[pix];
                }
            }
        }
        let rg = self.requires(input);
        Ok(self.push_result(
            vec![n_views, h, w, c],
            out,
            rg,
            Op::ViewsFromChannels { input, n_views },
        ))
    }

    /// Reverse-mode sweep from a scalar loss. Gradients accumulate
    /// additively into every leaf with `requires_grad`; leaves that do not
    /// influence the loss end up with explicit zero gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), TensorError> {
        if self.nodes[loss.0].t.numel() != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: self.shape(loss).to_vec(),
            });
        }
        // Every tracked node gets a buffer up front so unreached leaves
        // report zeros rather than None.
        for n in &mut self.nodes {
            if n.t.requires_grad && n.t.grad.is_none() {
                n.t.grad = Some(vec![T::zero(); n.t.numel()]);
            }
        }
        if !self.nodes[loss.0].t.requires_grad {
            return Ok(());
        }
        if let Some(g) = &mut self.nodes[loss.0].t.grad {
            g[0] += T::one();
        }
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].t.requires_grad {
                continue;
            }
            let op = self.nodes[i].op.clone();
            if matches!(op, Op::Leaf) {
                continue;
            }
            // Intermediate gradients are consumed exactly once: every use
            // of node i sits later on the tape and has already accumulated.
            let g = match self.nodes[i].t.grad.take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(i, &op, &g);
        }
        Ok(())
    }

    fn grad_buf(&mut self, id: NodeId) -> Option<&mut [T]> {
        let n = &mut self.nodes[id.0].t;
        if n.requires_grad {
            n.grad.as_deref_mut()
        } else {
            None
        }
    }

    fn propagate(&mut self, out_idx: usize, op: &Op, g: &[T]) {
        match *op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                kernel,
                bias,
                pad,
            } => {
                let [c_in, h, w] = self.shape(input)[..] else { unreachable!() };
                let [c_out, _, k, _] = self.shape(kernel)[..] else { unreachable!() };
                let need_i = self.requires(input);
                let need_k = self.requires(kernel);
                let need_b = self.requires(bias);
                let mut gi = if need_i { Some(vec![T::zero(); c_in * h * w]) } else { None };
                let mut gk = if need_k {
                    Some(vec![T::zero(); c_out * c_in * k * k])
                } else {
                    None
                };
                let mut gb = if need_b { Some(vec![T::zero(); c_out]) } else { None };
                kernels::conv2d_backward(
                    self.data(input),
                    c_in,
                    h,
                    w,
                    self.data(kernel),
                    c_out,
                    k,
                    pad,
                    g,
                    gi.as_deref_mut(),
                    gk.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                if let Some(gi) = gi {
                    accumulate(self.grad_buf(input), &gi);
                }
                if let Some(gk) = gk {
                    accumulate(self.grad_buf(kernel), &gk);
                }
                if let Some(gb) = gb {
                    accumulate(self.grad_buf(bias), &gb);
                }
            }
            Op::Relu { input } => {
                let dg: Vec<T> = self
                    .data(input)
                    .iter()
                    .zip(g)
                    .map(|(x, gv)| if *x > T::zero() { *gv } else { T::zero() })
                    .collect();
                accumulate(self.grad_buf(input), &dg);
            }
            Op::Linear {
                input,
                weight,
                bias,
            } => {
                let xshape = self.shape(input);
                let (p, n) = match xshape[..] {
                    [n] => (1, n),
                    [p, n] => (p, n),
                    _ => unreachable!(),
                };
                let m = self.shape(weight)[0];
                let need_x = self.requires(input);
                let need_w = self.requires(weight);
                let need_b = self.requires(bias);
                let mut gx = if need_x { Some(vec![T::zero(); p * n]) } else { None };
                let mut gw = if need_w { Some(vec![T::zero(); m * n]) } else { None };
                let mut gb = if need_b { Some(vec![T::zero(); m]) } else { None };
                kernels::linear_backward(
                    self.data(input),
                    p,
                    n,
                    self.data(weight),
                    m,
                    g,
                    gx.as_deref_mut(),
                    gw.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                if let Some(gx) = gx {
                    accumulate(self.grad_buf(input), &gx);
                }
                if let Some(gw) = gw {
                    accumulate(self.grad_buf(weight), &gw);
                }
                if let Some(gb) = gb {
                    accumulate(self.grad_buf(bias), &gb);
                }
            }
            Op::Add { lhs, rhs } => {
                accumulate(self.grad_buf(lhs), g);
                accumulate(self.grad_buf(rhs), g);
            }
            Op::ConcatChannels { ref parts } => {
                let hw = {
                    let s = self.shape(NodeId(out_idx));
                    s[1] * s[2]
                };
                let mut offset = 0;
                for &p in parts {
                    let c = self.shape(p)[0];
                    let len = c * hw;
                    let slice = &g[offset..offset + len];
                    accumulate(self.grad_buf(p), slice);
                    offset += len;
                }
            }
            Op::BilinearResize { input } => {
                let [c, h, w] = self.shape(input)[..] else { unreachable!() };
                let [_, h2, w2] = self.shape(NodeId(out_idx))[..] else { unreachable!() };
                let mut gi = vec![T::zero(); c * h * w];
                kernels::bilinear_backward(g, c, h, w, h2, w2, &mut gi);
                accumulate(self.grad_buf(input), &gi);
            }
            Op::L1Mean { lhs, rhs } => {
                let n = self.data(lhs).len();
                let inv = T::from_f64(1.0 / n as f64);
                let gs = g[0];
                let signs: Vec<T> = self
                    .data(lhs)
                    .iter()
                    .zip(self.data(rhs))
                    .map(|(a, b)| {
                        if *a > *b {
                            gs * inv
                        } else if *a < *b {
                            -(gs * inv)
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                accumulate(self.grad_buf(lhs), &signs);
                let neg: Vec<T> = signs.iter().map(|v| -*v).collect();
                accumulate(self.grad_buf(rhs), &neg);
            }
            Op::AxisDiff { input, axis } => {
                let shape = self.shape(input).to_vec();
                let (outer, n, inner) = split3(&shape, axis);
                let mut gi = vec![T::zero(); outer * n * inner];
                for o in 0..outer {
                    for i in 0..n - 1 {
                        let src = (o * (n - 1) + i) * inner;
                        let d0 = (o * n + i) * inner;
                        let d1 = (o * n + i + 1) * inner;
                        for j in 0..inner {
                            let gv = g[src + j];
                            gi[d1 + j] += gv;
                            gi[d0 + j] -= gv;
                        }
                    }
                }
                accumulate(self.grad_buf(input), &gi);
            }
            Op::Scale { input, factor } => {
                let f = T::from_f64(factor);
                let dg: Vec<T> = g.iter().map(|v| *v * f).collect();
                accumulate(self.grad_buf(input), &dg);
            }
            Op::Reshape { input } => {
                accumulate(self.grad_buf(input), g);
            }
            Op::DecoderRows { features, coords } => {
                let [d, h, w] = self.shape(features)[..] else { unreachable!() };
                let [p, q] = self.shape(coords)[..] else { unreachable!() };
                let hw = h * w;
                let reps = p / hw;
                let stride = d + q;
                if self.requires(features) {
                    let mut gf = vec![T::zero(); d * hw];
                    for a in 0..reps {
                        for pix in 0..hw {
                            let row = &g[(a * hw + pix) * stride..][..d];
                            for (ch, gv) in row.iter().enumerate() {
                                gf[ch * hw + pix] += *gv;
                            }
                        }
                    }
                    accumulate(self.grad_buf(features), &gf);
                }
                if self.requires(coords) {
                    let mut gc = vec![T::zero(); p * q];
                    for r in 0..p {
                        gc[r * q..(r + 1) * q].copy_from_slice(&g[r * stride + d..(r + 1) * stride]);
                    }
                    accumulate(self.grad_buf(coords), &gc);
                }
            }
            Op::ViewsFromChannels { input, n_views } => {
                let [cc, h, w] = self.shape(input)[..] else { unreachable!() };
                let c = cc / n_views;
                let hw = h * w;
                let mut gi = vec![T::zero(); cc * hw];
                for a in 0..n_views {
                    for ch in 0..c {
                        let plane = &mut gi[(a * c + ch) * hw..(a * c + ch + 1) * hw];
                        for (pix, pv) in plane.iter_mut().enumerate() {
                            *pv += g[(a * hw + pix) * c + ch];
                        }
                    }
                }
                accumulate(self.grad_buf(input), &gi);
            }
        }
    }
}

fn accumulate<T: Scalar>(dst: Option<&mut [T]>, src: &[T]) {
    if let Some(dst) = dst {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += *s;
        }
    }
}

/// Splits a shape at `axis` into (outer, axis extent, inner) products.
fn split3(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}
