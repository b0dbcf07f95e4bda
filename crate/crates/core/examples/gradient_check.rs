//! Central finite differences against the tape's reverse pass for a small
//! two-layer expression with a sparse aggregation and a BCE head.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_link::autodiff::Tape;
use robust_link::tensor::{SparseAdjacency, Tensor};

fn loss(adj: &Rc<SparseAdjacency>, x: &Tensor, w: &Tensor) -> robust_link::Result<(f64, Tensor)> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.param(w.clone());
    let h = tape.matmul(xv, wv)?;
    let h = tape.spmm(adj.clone(), h, None)?;
    let h = tape.elu(h, 1.0)?;
    let s = tape.row_sum(h)?;
    let labels = Rc::new((0..x.rows()).map(|i| (i % 2) as f64).collect());
    let per_row = tape.bce_with_logits(s, labels)?;
    let l = tape.mean(per_row)?;
    let g = tape.backward(l);
    Ok((tape.value(l).item(), g.get_or_zeros(wv)))
}

fn main() -> robust_link::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 0), (0, 4)];
    let adj = Rc::new(SparseAdjacency::from_undirected(8, &edges)?);
    let x = Tensor::random_normal(8, 5, 1.0, &mut rng);
    let w = Tensor::random_normal(5, 3, 0.5, &mut rng);

    let (_, analytic) = loss(&adj, &x, &w)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..w.len() {
        let mut plus = w.clone();
        plus.data_mut()[k] += h;
        let mut minus = w.clone();
        minus.data_mut()[k] -= h;
        let numeric = (loss(&adj, &x, &plus)?.0 - loss(&adj, &x, &minus)?.0) / (2.0 * h);
        let a = analytic.data()[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
        println!("w[{k:2}]  analytic {a:+.8}  numeric {numeric:+.8}  rel {rel:.2e}");
    }
    println!("max relative error {worst:.2e}");
    Ok(())
}
