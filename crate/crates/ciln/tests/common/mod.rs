//! Shared test support: the finite-difference gradient oracle and small
//! builders. The oracle only evaluates forward passes, so it stays
//! independent of the reverse-mode code paths it checks.

#![allow(dead_code)]

use ciln::rng::SplitRng;
use ciln::{Graph, NodeId, Scalar, Tensor};

/// Result of comparing analytic gradients against central differences.
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst: String,
}

/// Relative error with scale floors: elements far below the tensor's (or
/// the whole check's) gradient scale are compared in absolute terms
/// relative to those scales, so exact-zero gradients are not divided by
/// finite-difference noise.
fn rel_err(a: f64, n: f64, tensor_scale: f64, global_scale: f64) -> f64 {
    let denom = a
        .abs()
        .max(n.abs())
        .max(1e-3 * tensor_scale)
        .max(1e-4 * global_scale)
        .max(1e-12);
    (a - n).abs() / denom
}

/// Checks `d loss / d input` for every tracked input tensor against central
/// finite differences of the forward pass (double precision).
///
/// `build` must construct the loss from the given leaves alone so that the
/// perturbed re-evaluations see the change.
pub fn finite_diff_check(
    inputs: &[Tensor<f64>],
    h: f64,
    build: impl Fn(&mut Graph<f64>, &[NodeId]) -> NodeId,
) -> GradCheck {
    let eval = |tensors: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = tensors.iter().map(|t| {
            let mut t = t.clone();
            t.requires_grad = false;
            g.leaf(t)
        }).collect();
        let loss = build(&mut g, &ids);
        assert_eq!(g.data(loss).len(), 1, "loss must be scalar");
        g.data(loss)[0]
    };

    // Analytic pass.
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let loss = build(&mut g, &ids);
    g.backward(loss).unwrap();

    let mut check = GradCheck {
        max_rel_err: 0.0,
        worst: String::new(),
    };
    for (ti, input) in inputs.iter().enumerate() {
        if !input.requires_grad {
            continue;
        }
        let analytic = g.grad(ids[ti]).expect("tracked leaf has grad").to_vec();
        let mut numeric = vec![0.0f64; analytic.len()];
        for ei in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[ti].data_mut()[ei] += h;
            let mut minus = inputs.to_vec();
            minus[ti].data_mut()[ei] -= h;
            numeric[ei] = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        let scale = analytic
            .iter()
            .chain(numeric.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        for ei in 0..analytic.len() {
            let e = rel_err(analytic[ei], numeric[ei], scale);
            if e > check.max_rel_err {
                check.max_rel_err = e;
                check.worst = format!(
                    "input {ti} elem {ei}: analytic {} vs numeric {}",
                    analytic[ei], numeric[ei]
                );
            }
        }
    }
    check
}

/// Uniform tensor in [-1, 1]. Values within `margin` of zero are pushed
/// outward so finite differences never straddle a relu kink.
pub fn rand_tensor(rng: &mut SplitRng, shape: Vec<usize>, margin: f64) -> Tensor<f64> {
    let numel: usize = shape.iter().product();
    let data = (0..numel)
        .map(|_| {
            let mut v = rng.uniform(-1.0, 1.0);
            if v.abs() < margin {
                v = margin * if v >= 0.0 { 1.0 } else { -1.0 };
            }
            v
        })
        .collect();
    Tensor::new(shape, data).unwrap().tracked()
}

/// Random sign-projection target: a tensor of +/-5 entries. Using it as the
/// second argument of `l1_mean` turns any output into a scalar whose
/// gradient is a random sign pattern, with no absolute-value kinks nearby.
pub fn sign_target(rng: &mut SplitRng, shape: Vec<usize>) -> Tensor<f64> {
    let numel: usize = shape.iter().product();
    let data = (0..numel)
        .map(|_| if rng.next_u64() & 1 == 0 { 5.0 } else { -5.0 })
        .collect();
    Tensor::new(shape, data).unwrap()
}

pub fn f32_tensor<T: Scalar>(shape: Vec<usize>, data: Vec<f32>) -> Tensor<T> {
    Tensor::new(shape, data.into_iter().map(T::from_f32).collect()).unwrap()
}
