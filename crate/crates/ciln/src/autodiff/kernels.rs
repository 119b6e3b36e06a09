//! Raw numeric kernels behind the graph operations.
//!
//! Every kernel fixes its per-element summation order so that results are
//! bit-identical across runs and independent of batching. Reductions use a
//! fixed four-lane split (see [`dot4`]) where throughput matters.

use super::tensor::Scalar;

/// Dot product with four interleaved accumulator lanes. The lane split is
/// part of the kernel contract: it keeps results deterministic while
/// letting the compiler vectorize the loop.
pub fn dot4<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [T::zero(); 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let ra = ca.remainder();
    let rb = cb.remainder();
    for (qa, qb) in ca.zip(cb) {
        for i in 0..4 {
            lanes[i] = lanes[i] + qa[i] * qb[i];
        }
    }
    let mut s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (x, y) in ra.iter().zip(rb) {
        s = s + *x * *y;
    }
    s
}

/// Same-size 2D convolution with zero padding.
///
/// `input` is `[c_in, h, w]`, `kernel` is `[c_out, c_in, k, k]` with odd
/// `k` and `pad == (k - 1) / 2`, `out` is `[c_out, h, w]`. Each output
/// element accumulates in fixed `(c_in, ky, kx)` order on top of the bias,
/// which makes interior outputs exactly translation-equivariant.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_forward<T: Scalar>(
    input: &[T],
    c_in: usize,
    h: usize,
    w: usize,
    kernel: &[T],
    c_out: usize,
    k: usize,
    pad: usize,
    bias: &[T],
    out: &mut [T],
) {
    let hw = h * w;
    for co in 0..c_out {
        let out_plane = &mut out[co * hw..(co + 1) * hw];
        out_plane.iter_mut().for_each(|v| *v = bias[co]);
        for ci in 0..c_in {
            let in_plane = &input[ci * hw..(ci + 1) * hw];
            let kbase = (co * c_in + ci) * k * k;
            for ky in 0..k {
                let dy = ky as isize - pad as isize;
                for kx in 0..k {
                    let wgt = kernel[kbase + ky * k + kx];
                    let dx = kx as isize - pad as isize;
                    let (y0, y1) = valid_range(h, dy);
                    let (x0, x1) = valid_range(w, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let src_row = (y as isize + dy) as usize;
                        let s = &in_plane[src_row * w..][(x0 as isize + dx) as usize
                            ..(x1 as isize + dx) as usize];
                        let d = &mut out_plane[y * w..][x0..x1];
                        for (dv, sv) in d.iter_mut().zip(s) {
                            *dv = *dv + wgt * *sv;
                        }
                    }
                }
            }
        }
    }
}

fn valid_range(extent: usize, delta: isize) -> (usize, usize) {
    let lo = (-delta).max(0) as usize;
    let hi = (extent as isize - delta.max(0)).max(0) as usize;
    (lo, hi)
}

/// Gradients of [`conv2d_forward`] with respect to input, kernel and bias.
/// Buffers are accumulated into, not overwritten.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Scalar>(
    input: &[T],
    c_in: usize,
    h: usize,
    w: usize,
    kernel: &[T],
    c_out: usize,
    k: usize,
    pad: usize,
    grad_out: &[T],
    grad_input: Option<&mut [T]>,
    grad_kernel: Option<&mut [T]>,
    grad_bias: Option<&mut [T]>,
) {
    let hw = h * w;
    if let Some(gb) = grad_bias {
        for co in 0..c_out {
            let mut acc = T::zero();
            for v in &grad_out[co * hw..(co + 1) * hw] {
                acc += *v;
            }
            gb[co] += acc;
        }
    }
    if let Some(gk) = grad_kernel {
        for co in 0..c_out {
            let g_plane = &grad_out[co * hw..(co + 1) * hw];
            for ci in 0..c_in {
                let in_plane = &input[ci * hw..(ci + 1) * hw];
                let kbase = (co * c_in + ci) * k * k;
                for ky in 0..k {
                    let dy = ky as isize - pad as isize;
                    for kx in 0..k {
                        let dx = kx as isize - pad as isize;
                        let (y0, y1) = valid_range(h, dy);
                        let (x0, x1) = valid_range(w, dx);
                        if x0 >= x1 {
                            continue;
                        }
                        let mut acc = T::zero();
                        for y in y0..y1 {
                            let src_row = (y as isize + dy) as usize;
                            let s = &in_plane[src_row * w..][(x0 as isize + dx) as usize
                                ..(x1 as isize + dx) as usize];
                            let g = &g_plane[y * w..][x0..x1];
                            acc += dot4(g, s);
                        }
                        gk[kbase + ky * k + kx] += acc;
                    }
                }
            }
        }
    }
    if let Some(gi) = grad_input {
        for ci in 0..c_in {
            let gi_plane = &mut gi[ci * hw..(ci + 1) * hw];
            for co in 0..c_out {
                let g_plane = &grad_out[co * hw..(co + 1) * hw];
                let kbase = (co * c_in + ci) * k * k;
                for ky in 0..k {
                    let dy = ky as isize - pad as isize;
                    for kx in 0..k {
                        let wgt = kernel[kbase + ky * k + kx];
                        let dx = kx as isize - pad as isize;
                        let (y0, y1) = valid_range(h, dy);
                        let (x0, x1) = valid_range(w, dx);
                        if x0 >= x1 {
                            continue;
                        }
                        for y in y0..y1 {
                            let src_row = (y as isize + dy) as usize;
                            let d = &mut gi_plane[src_row * w..][(x0 as isize + dx) as usize
                                ..(x1 as isize + dx) as usize];
                            let g = &g_plane[y * w..][x0..x1];
                            for (dv, gv) in d.iter_mut().zip(g) {
                                *dv = *dv + wgt * *gv;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Batched affine map: `x` is `[p, n]`, `weight` is `[m, n]` row-major,
/// `bias` is `[m]`, `out` is `[p, m]` with
/// `out[r][j] = bias[j] + sum_k x[r][k] * weight[j][k]`, `k` ascending.
///
/// A single row (`p == 1`) runs through the identical code path, so batched
/// and per-point evaluation produce bit-identical values.
pub fn linear_forward<T: Scalar>(
    x: &[T],
    p: usize,
    n: usize,
    weight: &[T],
    m: usize,
    bias: &[T],
    out: &mut [T],
) {
    // Transposed weight buffer: contiguous in the output dimension so the
    // inner loop vectorizes while keeping k-ascending accumulation order.
    let mut wt = vec![T::zero(); n * m];
    for j in 0..m {
        for kk in 0..n {
            wt[kk * m + j] = weight[j * n + kk];
        }
    }
    for r in 0..p {
        let row = &x[r * n..(r + 1) * n];
        let out_row = &mut out[r * m..(r + 1) * m];
        out_row.copy_from_slice(bias);
        for (kk, xv) in row.iter().enumerate() {
            let wrow = &wt[kk * m..(kk + 1) * m];
            for (ov, wv) in out_row.iter_mut().zip(wrow) {
                *ov = *ov + *xv * *wv;
            }
        }
    }
}

/// Gradients of [`linear_forward`]. Buffers are accumulated into.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward<T: Scalar>(
    x: &[T],
    p: usize,
    n: usize,
    weight: &[T],
    m: usize,
    grad_out: &[T],
    grad_x: Option<&mut [T]>,
    grad_weight: Option<&mut [T]>,
    grad_bias: Option<&mut [T]>,
) {
    if let Some(gx) = grad_x {
        for r in 0..p {
            let g_row = &grad_out[r * m..(r + 1) * m];
            let gx_row = &mut gx[r * n..(r + 1) * n];
            for (j, gv) in g_row.iter().enumerate() {
                let wrow = &weight[j * n..(j + 1) * n];
                for (dv, wv) in gx_row.iter_mut().zip(wrow) {
                    *dv = *dv + *gv * *wv;
                }
            }
        }
    }
    if let Some(gw) = grad_weight {
        for r in 0..p {
            let g_row = &grad_out[r * m..(r + 1) * m];
            let x_row = &x[r * n..(r + 1) * n];
            for (j, gv) in g_row.iter().enumerate() {
                let gw_row = &mut gw[j * n..(j + 1) * n];
                for (dv, xv) in gw_row.iter_mut().zip(x_row) {
                    *dv = *dv + *gv * *xv;
                }
            }
        }
    }
    if let Some(gb) = grad_bias {
        for r in 0..p {
            let g_row = &grad_out[r * m..(r + 1) * m];
            for (bv, gv) in gb.iter_mut().zip(g_row) {
                *bv = *bv + *gv;
            }
        }
    }
}

/// Align-corners sampling positions along one axis: target index `i` maps
/// to source coordinate `i * (src - 1) / (dst - 1)`, so corner samples map
/// to corner samples at every size. A single-sample extent maps to 0.
pub struct AxisTable {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    pub frac: Vec<f64>,
}

pub fn axis_table(src: usize, dst: usize) -> AxisTable {
    let mut lo = Vec::with_capacity(dst);
    let mut hi = Vec::with_capacity(dst);
    let mut frac = Vec::with_capacity(dst);
    let scale = if dst > 1 && src > 1 {
        (src - 1) as f64 / (dst - 1) as f64
    } else {
        0.0
    };
    for i in 0..dst {
        let pos = i as f64 * scale;
        let i0 = (pos.floor() as usize).min(src - 1);
        let i1 = (i0 + 1).min(src - 1);
        lo.push(i0);
        hi.push(i1);
        frac.push(pos - i0 as f64);
    }
    AxisTable { lo, hi, frac }
}

/// Align-corners bilinear resize of `[c, h, w]` planes to `[c, h2, w2]`.
pub fn bilinear_forward<T: Scalar>(
    input: &[T],
    c: usize,
    h: usize,
    w: usize,
    h2: usize,
    w2: usize,
    out: &mut [T],
) {
    let ty = axis_table(h, h2);
    let tx = axis_table(w, w2);
    let one = T::one();
    for ch in 0..c {
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        let out_plane = &mut out[ch * h2 * w2..(ch + 1) * h2 * w2];
        for i in 0..h2 {
            let fy = T::from_f64(ty.frac[i]);
            let r0 = &plane[ty.lo[i] * w..ty.lo[i] * w + w];
            let r1 = &plane[ty.hi[i] * w..ty.hi[i] * w + w];
            let out_row = &mut out_plane[i * w2..(i + 1) * w2];
            for (j, ov) in out_row.iter_mut().enumerate() {
                let fx = T::from_f64(tx.frac[j]);
                let (x0, x1) = (tx.lo[j], tx.hi[j]);
                let top = (one - fx) * r0[x0] + fx * r0[x1];
                let bot = (one - fx) * r1[x0] + fx * r1[x1];
                *ov = (one - fy) * top + fy * bot;
            }
        }
    }
}

/// Gradient of [`bilinear_forward`] with respect to the input, accumulated.
pub fn bilinear_backward<T: Scalar>(
    grad_out: &[T],
    c: usize,
    h: usize,
    w: usize,
    h2: usize,
    w2: usize,
    grad_input: &mut [T],
) {
    let ty = axis_table(h, h2);
    let tx = axis_table(w, w2);
    let one = T::one();
    for ch in 0..c {
        let g_plane = &grad_out[ch * h2 * w2..(ch + 1) * h2 * w2];
        let gi_plane = &mut grad_input[ch * h * w..(ch + 1) * h * w];
        for i in 0..h2 {
            let fy = T::from_f64(ty.frac[i]);
            let (y0, y1) = (ty.lo[i], ty.hi[i]);
            for j in 0..w2 {
                let fx = T::from_f64(tx.frac[j]);
                let (x0, x1) = (tx.lo[j], tx.hi[j]);
                let g = g_plane[i * w2 + j];
                gi_plane[y0 * w + x0] += (one - fy) * (one - fx) * g;
                gi_plane[y0 * w + x1] += (one - fy) * fx * g;
                gi_plane[y1 * w + x0] += fy * (one - fx) * g;
                gi_plane[y1 * w + x1] += fy * fx * g;
            }
        }
    }
}
