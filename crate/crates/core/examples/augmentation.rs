//! Hybrid augmentation views and DropEdge on a ring graph.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_link::augment::{drop_edge, sample_hybrid, view_rngs};
use robust_link::tensor::Tensor;

fn main() -> robust_link::Result<()> {
    let n = 40;
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).map(|(a, b)| (a.min(b), a.max(b))).collect();
    let x = Tensor::ones(n, 8);

    let (mut r1, mut r2) = view_rngs(11);
    for step in 0..4 {
        let t1 = sample_hybrid(2, &mut r1);
        let t2 = sample_hybrid(2, &mut r2);
        let (e1, x1) = t1.apply(&edges, &x, &mut r1);
        let (e2, x2) = t2.apply(&edges, &x, &mut r2);
        println!("step {step}");
        println!("  view 1 {:?}: {} edges, feature mass {:.0}", t1.ops, e1.len(), x1.sum());
        println!("  view 2 {:?}: {} edges, feature mass {:.0}", t2.ops, e2.len(), x2.sum());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in [0.0, 0.2, 0.5] {
        let kept = drop_edge(&edges, p, &mut rng)?;
        println!("dropedge p={p}: kept {}/{}", kept.len(), edges.len());
    }
    Ok(())
}
