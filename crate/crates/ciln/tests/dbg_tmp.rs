mod common;
use ciln::rng::SplitRng;
use ciln::{Graph, NodeId};
use common::{finite_diff_check, rand_tensor, sign_target};

#[test]
fn dbg_linear_trial4() {
    let mut rng = SplitRng::new(0xC11).split(4);
    let rng = &mut rng;
    let x = rand_tensor(rng, vec![4, 5], 0.0);
    let w = rand_tensor(rng, vec![3, 5], 0.0);
    let b = rand_tensor(rng, vec![3], 0.0);
    let r = sign_target(rng, vec![4, 3]);
    let mut g = Graph::new();
    let ids: Vec<NodeId> = [x.clone(), w.clone(), b.clone()].into_iter().map(|t| g.leaf(t)).collect();
    let y = g.linear(ids[0], ids[1], ids[2]).unwrap();
    println!("y: {:?}", g.data(y));
    println!("r: {:?}", r.data());
    let check = finite_diff_check(&[x, w, b, r], 1e-4, |g, ids| {
        let y = g.linear(ids[0], ids[1], ids[2]).unwrap();
        g.l1_mean(y, ids[3]).unwrap()
    });
    println!("ERR {:.3e} worst {}", check.max_rel_err, check.worst);
}
