#![allow(dead_code)]

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_link::autodiff::{Tape, Var};
use robust_link::encoder::{Arch, EncoderConfig, ModelParams};
use robust_link::graph::{Edge, Graph, QuerySet};
use robust_link::tensor::{SparseAdjacency, Tensor};
use robust_link::Result;

pub const FD_STEP: f64 = 1e-5;

/// `|a − f| / (|f| + 1e-8)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (numeric.abs() + 1e-8)
}

fn scalarize(tape: &mut Tape, out: Var) -> Result<Var> {
    if tape.value(out).shape() == (1, 1) {
        Ok(out)
    } else {
        tape.sum(out)
    }
}

/// Worst relative error between the tape gradient of `sum(f(inputs))` and
/// central differences over every input entry. Detached values recorded at
/// the base point are replayed during the perturbed evaluations.
pub fn fd_max_rel_err<F>(inputs: &[Tensor], f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let out = scalarize(&mut tape, out)?;
    let grads = tape.backward(out);
    let frozen = tape.detached_values().to_vec();

    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::replaying(frozen.clone());
        let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let out = scalarize(&mut tape, out)?;
        Ok(tape.value(out).item())
    };

    let mut worst: f64 = 0.0;
    for (k, var) in vars.iter().enumerate() {
        let g = grads.get_or_zeros(*var);
        for e in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[e] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[e] -= FD_STEP;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(g.data()[e], numeric));
        }
    }
    Ok(worst)
}

/// [`fd_max_rel_err`] over every parameter tensor of a model.
pub fn fd_model_rel_err<F>(params: &ModelParams, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &robust_link::encoder::BoundParams) -> Result<Var>,
{
    let tensors: Vec<Tensor> = params.tensors().into_iter().cloned().collect();
    fd_max_rel_err(&tensors, |tape, vars| {
        let mut p = params.clone();
        for (slot, v) in p.tensors_mut().into_iter().zip(vars) {
            *slot = tape.value(*v).clone();
        }
        // Re-bind so the tape sees the parameters as the given vars.
        let mut bound = p.bind(tape, false);
        let n_w = bound.weights.len();
        let n_s = bound.attn_self.len();
        bound.weights = vars[..n_w].to_vec();
        bound.attn_self = vars[n_w..n_w + n_s].to_vec();
        bound.attn_nbr = vars[n_w + n_s..].to_vec();
        f(tape, &bound)
    })
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

/// Values in `[-2, 2]` kept at least `gap` away from zero.
pub fn away_from_zero(rows: usize, cols: usize, gap: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.random_range(gap..2.0);
            if rng.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

pub const FIXTURE_EDGES: [Edge; 10] = [
    (0, 1),
    (0, 2),
    (1, 2),
    (1, 3),
    (2, 4),
    (3, 5),
    (4, 5),
    (4, 6),
    (5, 7),
    (6, 7),
];

/// 8-node graph with random features.
pub fn fixture8() -> Graph {
    Graph::new(uniform(8, 5, -1.0, 1.0, 99), FIXTURE_EDGES).unwrap()
}

pub fn fixture_queries() -> QuerySet {
    QuerySet {
        pos: vec![(0, 1), (2, 4), (5, 7), (1, 3)],
        neg: vec![(0, 7), (3, 6), (1, 6), (2, 5)],
    }
}

pub fn small_params(arch: Arch, layers: usize, seed: u64) -> ModelParams {
    ModelParams::init(&EncoderConfig::new(arch, layers, 4), 5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

pub fn fixture_adj() -> Rc<SparseAdjacency> {
    Rc::new(SparseAdjacency::from_undirected(8, &FIXTURE_EDGES).unwrap())
}

pub type OpFn = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

/// Random upstream weighting so every op sees a non-uniform output gradient.
fn weigh(tape: &mut Tape, v: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.value(v).shape();
    let w = tape.constant(uniform(r, c, -1.0, 1.0, seed));
    tape.mul(v, w)
}

/// Every differentiable tape op with inputs inside its smooth domain.
pub fn op_cases() -> Vec<(&'static str, Vec<Tensor>, OpFn)> {
    let m = |seed| uniform(4, 3, -2.0, 2.0, seed);
    let pos = |seed| uniform(4, 3, 0.1, 2.0, seed);
    let col = |seed| uniform(6, 1, -2.0, 2.0, seed);
    let adj = fixture_adj();
    let w_adj = fixture_adj();
    let slots = w_adj.n_slots();
    let segs = Rc::new(vec![0, 0, 1, 1, 1, 2]);
    let labels = Rc::new(vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    vec![
        (
            "matmul",
            vec![m(1), uniform(3, 2, -2.0, 2.0, 2)],
            Box::new(|t, v| {
                let o = t.matmul(v[0], v[1])?;
                weigh(t, o, 3)
            }),
        ),
        (
            "spmm",
            vec![uniform(8, 3, -2.0, 2.0, 4)],
            Box::new(move |t, v| {
                let o = t.spmm(adj.clone(), v[0], None)?;
                weigh(t, o, 5)
            }),
        ),
        (
            "spmm_weighted",
            vec![uniform(8, 3, -2.0, 2.0, 6), uniform(slots, 1, 0.1, 2.0, 7)],
            Box::new(move |t, v| {
                let o = t.spmm(w_adj.clone(), v[0], Some(v[1]))?;
                weigh(t, o, 8)
            }),
        ),
        ("add", vec![m(9), m(10)], Box::new(|t, v| { let o = t.add(v[0], v[1])?; weigh(t, o, 11) })),
        ("sub", vec![m(12), m(13)], Box::new(|t, v| { let o = t.sub(v[0], v[1])?; weigh(t, o, 14) })),
        ("mul", vec![m(15), m(16)], Box::new(|t, v| { let o = t.mul(v[0], v[1])?; weigh(t, o, 17) })),
        ("scale", vec![m(18)], Box::new(|t, v| { let o = t.scale(v[0], -1.7)?; weigh(t, o, 19) })),
        ("add_scalar", vec![m(20)], Box::new(|t, v| { let o = t.add_scalar(v[0], 0.3)?; weigh(t, o, 21) })),
        ("exp", vec![m(22)], Box::new(|t, v| { let o = t.exp(v[0])?; weigh(t, o, 23) })),
        ("log", vec![pos(24)], Box::new(|t, v| { let o = t.log(v[0])?; weigh(t, o, 25) })),
        ("sigmoid", vec![m(26)], Box::new(|t, v| { let o = t.sigmoid(v[0])?; weigh(t, o, 27) })),
        (
            "clamp",
            vec![uniform(4, 3, -0.9, 0.9, 28)],
            Box::new(|t, v| { let o = t.clamp(v[0], -1.0, 1.0)?; weigh(t, o, 29) }),
        ),
        ("relu", vec![away_from_zero(4, 3, 0.05, 30)], Box::new(|t, v| { let o = t.relu(v[0])?; weigh(t, o, 31) })),
        (
            "leaky_relu",
            vec![away_from_zero(4, 3, 0.05, 32)],
            Box::new(|t, v| { let o = t.leaky_relu(v[0], 0.2)?; weigh(t, o, 33) }),
        ),
        ("elu", vec![away_from_zero(4, 3, 0.05, 34)], Box::new(|t, v| { let o = t.elu(v[0], 1.0)?; weigh(t, o, 35) })),
        ("square", vec![m(36)], Box::new(|t, v| { let o = t.square(v[0])?; weigh(t, o, 37) })),
        ("sqrt", vec![pos(38)], Box::new(|t, v| { let o = t.sqrt(v[0])?; weigh(t, o, 39) })),
        ("sum", vec![m(40)], Box::new(|t, v| { let w = weigh(t, v[0], 41)?; let s = t.sum(w)?; t.square(s) })),
        ("mean", vec![m(42)], Box::new(|t, v| { let w = weigh(t, v[0], 43)?; let s = t.mean(w)?; t.square(s) })),
        ("row_sum", vec![m(44)], Box::new(|t, v| { let o = t.row_sum(v[0])?; weigh(t, o, 45) })),
        ("rowwise_l2", vec![m(46)], Box::new(|t, v| { let o = t.rowwise_l2(v[0])?; weigh(t, o, 47) })),
        ("normalize_rows", vec![m(48)], Box::new(|t, v| { let o = t.normalize_rows(v[0])?; weigh(t, o, 49) })),
        ("softmax_vector", vec![col(50)], Box::new(|t, v| { let o = t.softmax_vector(v[0])?; weigh(t, o, 51) })),
        (
            "segment_softmax",
            vec![col(52)],
            Box::new(move |t, v| { let o = t.segment_softmax(v[0], segs.clone())?; weigh(t, o, 53) }),
        ),
        (
            "gather_rows",
            vec![m(54)],
            Box::new(|t, v| { let o = t.gather_rows(v[0], Rc::new(vec![3, 0, 0, 2]))?; weigh(t, o, 55) }),
        ),
        (
            "concat_rows",
            vec![m(56), uniform(2, 3, -2.0, 2.0, 57)],
            Box::new(|t, v| { let o = t.concat_rows(v[0], v[1])?; weigh(t, o, 58) }),
        ),
        (
            "bce_with_logits",
            vec![col(59)],
            Box::new(move |t, v| { let o = t.bce_with_logits(v[0], labels.clone())?; weigh(t, o, 60) }),
        ),
    ]
}

/// A 2-block SBM with its clean or noisy split.
pub fn small_sbm(n: usize, eps: f64, seed: u64) -> (Graph, robust_link::noise::NoisySplit) {
    use robust_link::graph::{generate_sbm, split_edges, SbmConfig, SplitRatios};
    use robust_link::noise::{inject_bilateral, NoiseSpec};
    let g = generate_sbm(&SbmConfig::new(n, 2, 0.3, 0.01, 16), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let split = split_edges(&g, SplitRatios::default(), &mut ChaCha8Rng::seed_from_u64(seed + 1)).unwrap();
    let noisy = inject_bilateral(&g, &split, NoiseSpec::bilateral(eps, seed + 2)).unwrap();
    (g, noisy)
}

/// Short training run on [`small_sbm`].
pub fn quick_train(
    g: &Graph,
    noisy: &robust_link::noise::NoisySplit,
    mode: robust_link::objectives::Mode,
    epochs: usize,
    seed: u64,
) -> robust_link::trainer::TrainOutcome {
    use robust_link::objectives::ObjectiveConfig;
    use robust_link::trainer::{train, RunSpec, TrainConfig};
    let run = RunSpec {
        graph: g,
        noisy,
        encoder: EncoderConfig::new(Arch::Gcn, 2, 32),
        objective: ObjectiveConfig::with_mode(mode),
        train: TrainConfig {
            epochs,
            lr: 0.01,
            patience: epochs,
            eval_every: 5,
            ..Default::default()
        },
        seed,
    };
    train(&run).unwrap()
}
