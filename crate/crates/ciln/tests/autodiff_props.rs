//! Gradient and structure properties of the tensor engine.
//!
//! Every differentiable operation is checked against central finite
//! differences in double precision over 20 seeded trials, using a random
//! sign projection to reduce outputs to a scalar.

mod common;

use ciln::rng::SplitRng;
use ciln::{Graph, NodeId, Tensor};
use common::{finite_diff_check, rand_tensor, sign_target};

const H: f64 = 1e-4;
const OP_TOL: f64 = 1e-4;
const TRIALS: u64 = 20;

fn run_trials(name: &str, mut case: impl FnMut(&mut SplitRng) -> f64) {
    let mut worst = 0.0f64;
    let mut worst_trial = 0;
    for trial in 0..TRIALS {
        let mut rng = SplitRng::new(0xC11).split(trial);
        let err = case(&mut rng);
        if err > worst {
            worst = err;
            worst_trial = trial;
        }
    }
    assert!(
        worst < OP_TOL,
        "{name}: max relative gradient error {worst:.3e} (trial {worst_trial}) over {TRIALS} trials"
    );
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    run_trials("conv2d", |rng| {
        let x = rand_tensor(rng, vec![2, 5, 6], 0.0);
        let k = rand_tensor(rng, vec![3, 2, 3, 3], 0.0);
        let b = rand_tensor(rng, vec![3], 0.0);
        let r = sign_target(rng, vec![3, 5, 6]);
        let check = finite_diff_check(&[x, k, b, r], H, |g, ids| {
            let y = g.conv2d(ids[0], ids[1], ids[2], 1).unwrap();
            g.l1_mean(y, ids[3]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn conv2d_1x1_gradients_match_finite_differences() {
    run_trials("conv2d_1x1", |rng| {
        let x = rand_tensor(rng, vec![3, 4, 4], 0.0);
        let k = rand_tensor(rng, vec![2, 3, 1, 1], 0.0);
        let b = rand_tensor(rng, vec![2], 0.0);
        let r = sign_target(rng, vec![2, 4, 4]);
        let check = finite_diff_check(&[x, k, b, r], H, |g, ids| {
            let y = g.conv2d(ids[0], ids[1], ids[2], 0).unwrap();
            g.l1_mean(y, ids[3]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn linear_gradients_match_finite_differences() {
    run_trials("linear", |rng| {
        let x = rand_tensor(rng, vec![4, 5], 0.0);
        let w = rand_tensor(rng, vec![3, 5], 0.0);
        let b = rand_tensor(rng, vec![3], 0.0);
        let r = sign_target(rng, vec![4, 3]);
        let check = finite_diff_check(&[x, w, b, r], H, |g, ids| {
            let y = g.linear(ids[0], ids[1], ids[2]).unwrap();
            g.l1_mean(y, ids[3]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn relu_gradients_match_finite_differences() {
    run_trials("relu", |rng| {
        // keep activations away from the kink by the draw margin
        let x = rand_tensor(rng, vec![3, 4, 2], 10.0 * H);
        let r = sign_target(rng, vec![3, 4, 2]);
        let check = finite_diff_check(&[x, r], H, |g, ids| {
            let y = g.relu(ids[0]);
            g.l1_mean(y, ids[1]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn add_gradients_match_finite_differences() {
    run_trials("add", |rng| {
        let a = rand_tensor(rng, vec![4, 3], 0.0);
        let b = rand_tensor(rng, vec![4, 3], 0.0);
        let r = sign_target(rng, vec![4, 3]);
        let check = finite_diff_check(&[a, b, r], H, |g, ids| {
            let y = g.add(ids[0], ids[1]).unwrap();
            g.l1_mean(y, ids[2]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn concat_channels_gradients_match_finite_differences() {
    run_trials("concat_channels", |rng| {
        let a = rand_tensor(rng, vec![2, 3, 4], 0.0);
        let b = rand_tensor(rng, vec![1, 3, 4], 0.0);
        let c = rand_tensor(rng, vec![3, 3, 4], 0.0);
        let r = sign_target(rng, vec![6, 3, 4]);
        let check = finite_diff_check(&[a, b, c, r], H, |g, ids| {
            let y = g.concat_channels(&ids[0..3]).unwrap();
            g.l1_mean(y, ids[3]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn bilinear_resize_gradients_match_finite_differences() {
    run_trials("bilinear_resize", |rng| {
        let x = rand_tensor(rng, vec![2, 4, 5], 0.0);
        let r = sign_target(rng, vec![2, 7, 3]);
        let check = finite_diff_check(&[x, r], H, |g, ids| {
            let y = g.bilinear_resize(ids[0], 7, 3).unwrap();
            g.l1_mean(y, ids[1]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn l1_mean_gradients_match_finite_differences() {
    run_trials("l1_mean", |rng| {
        // a and b drawn from disjoint ranges so |a - b| has no kinks
        let mut a = rand_tensor(rng, vec![3, 4], 0.0);
        a.data_mut().iter_mut().for_each(|v| *v += 2.0);
        let b = rand_tensor(rng, vec![3, 4], 0.0);
        let check = finite_diff_check(&[a, b], H, |g, ids| {
            g.l1_mean(ids[0], ids[1]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn axis_diff_gradients_match_finite_differences() {
    run_trials("axis_diff", |rng| {
        let x = rand_tensor(rng, vec![3, 4, 2], 0.0);
        let r = sign_target(rng, vec![3, 3, 2]);
        let check = finite_diff_check(&[x, r], H, |g, ids| {
            let y = g.axis_diff(ids[0], 1).unwrap();
            g.l1_mean(y, ids[1]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn scale_and_reshape_gradients_match_finite_differences() {
    run_trials("scale+reshape", |rng| {
        let x = rand_tensor(rng, vec![2, 6], 0.0);
        let r = sign_target(rng, vec![3, 4]);
        let check = finite_diff_check(&[x, r], H, |g, ids| {
            let y = g.scale(ids[0], 1.7);
            let y = g.reshape(y, vec![3, 4]).unwrap();
            g.l1_mean(y, ids[1]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn decoder_rows_gradients_match_finite_differences() {
    run_trials("decoder_rows", |rng| {
        let fm = rand_tensor(rng, vec![3, 2, 2], 0.0);
        let coords = rand_tensor(rng, vec![8, 4], 0.0);
        let r = sign_target(rng, vec![8, 7]);
        let check = finite_diff_check(&[fm, coords, r], H, |g, ids| {
            let y = g.decoder_rows(ids[0], ids[1]).unwrap();
            g.l1_mean(y, ids[2]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn views_from_channels_gradients_match_finite_differences() {
    run_trials("views_from_channels", |rng| {
        let x = rand_tensor(rng, vec![6, 3, 2], 0.0);
        let r = sign_target(rng, vec![2, 3, 2, 3]);
        let check = finite_diff_check(&[x, r], H, |g, ids| {
            let y = g.views_from_channels(ids[0], 2).unwrap();
            g.l1_mean(y, ids[1]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn composite_residual_block_gradients_match_finite_differences() {
    // conv-relu-conv plus skip, then relu: the shape used by the extractor.
    run_trials("residual_block", |rng| {
        let x = rand_tensor(rng, vec![2, 4, 4], 0.0);
        let k1 = rand_tensor(rng, vec![2, 2, 3, 3], 0.0);
        let b1 = rand_tensor(rng, vec![2], 0.0);
        let k2 = rand_tensor(rng, vec![2, 2, 3, 3], 0.0);
        let b2 = rand_tensor(rng, vec![2], 0.0);
        let r = sign_target(rng, vec![2, 4, 4]);
        let check = finite_diff_check(&[x, k1, b1, k2, b2, r], H, |g, ids| {
            let c1 = g.conv2d(ids[0], ids[1], ids[2], 1).unwrap();
            let a1 = g.relu(c1);
            let c2 = g.conv2d(a1, ids[3], ids[4], 1).unwrap();
            let s = g.add(c2, ids[0]).unwrap();
            let y = g.relu(s);
            g.l1_mean(y, ids[5]).unwrap()
        });
        check.max_rel_err
    });
}

#[test]
fn conv2d_is_translation_equivariant_on_interiors() {
    let mut rng = SplitRng::new(9);
    let (c, h, w, k) = (2usize, 10usize, 12usize, 3usize);
    let x = rand_tensor(&mut rng, vec![c, h, w], 0.0);
    let kern = rand_tensor(&mut rng, vec![2, c, k, k], 0.0);
    let bias = rand_tensor(&mut rng, vec![2], 0.0);

    let forward = |input: &Tensor<f64>| -> Vec<f64> {
        let mut g = Graph::new();
        let xi = g.leaf(input.clone());
        let ki = g.leaf(kern.clone());
        let bi = g.leaf(bias.clone());
        let y = g.conv2d(xi, ki, bi, 1).unwrap();
        g.data(y).to_vec()
    };

    let base = forward(&x);
    for (dy, dx) in [(1usize, 0usize), (0, 1), (2, 1), (1, 2)] {
        // shift input by (dy, dx) with zero fill
        let mut shifted = Tensor::zeros(vec![c, h, w]);
        for ch in 0..c {
            for y in dy..h {
                for xx in dx..w {
                    shifted.data_mut()[ch * h * w + y * w + xx] =
                        x.data()[ch * h * w + (y - dy) * w + (xx - dx)];
                }
            }
        }
        let out = forward(&shifted.tracked());
        // crop a margin of k pixels and compare exactly
        for ch in 0..2 {
            for y in k..h - k {
                for xx in k..w - k {
                    let a = out[ch * h * w + y * w + xx];
                    let b = base[ch * h * w + (y - dy) * w + (xx - dx)];
                    assert_eq!(a, b, "mismatch at ch {ch} y {y} x {xx} shift ({dy},{dx})");
                }
            }
        }
    }
}

#[test]
fn forward_outputs_stay_finite_on_finite_inputs() {
    for trial in 0..10u64 {
        let mut rng = SplitRng::new(0xF1).split(trial);
        let x = rand_tensor(&mut rng, vec![3, 6, 6], 0.0);
        let k = rand_tensor(&mut rng, vec![4, 3, 3, 3], 0.0);
        let b = rand_tensor(&mut rng, vec![4], 0.0);
        let mut g = Graph::new();
        let ids: Vec<NodeId> = [x, k, b].into_iter().map(|t| g.leaf(t)).collect();
        let y = g.conv2d(ids[0], ids[1], ids[2], 1).unwrap();
        let y = g.relu(y);
        let y = g.bilinear_resize(y, 9, 4).unwrap();
        let y = g.scale(y, -2.5);
        let d = g.axis_diff(y, 2).unwrap();
        assert!(g.data(d).iter().all(|v| v.is_finite()));
    }
}
