mod common;

use std::collections::HashSet;

use robust_link::encoder::{Arch, EncoderConfig};
use robust_link::metrics::auc;
use robust_link::objectives::{Mode, ObjectiveConfig};
use robust_link::optim::Adam;
use robust_link::tensor::Tensor;
use robust_link::trainer::{scheduler_alpha, train, RunSpec, SchedulerKind, TrainConfig};

use common::{quick_train, small_sbm};

#[test]
fn scheduler_examples() {
    use SchedulerKind::*;
    assert!(scheduler_alpha(Sin, 0.0, 0.0).abs() < 1e-15);
    assert!((scheduler_alpha(Sin, 0.0, 1.0) - 1.0).abs() < 1e-15);
    assert!((scheduler_alpha(Cos, 0.0, 0.0) - 1.0).abs() < 1e-15);
    assert!(scheduler_alpha(Cos, 0.0, 1.0).abs() < 1e-15);
    assert!((scheduler_alpha(Linear, 1.0, 0.4) - 0.4).abs() < 1e-15);
    assert_eq!(scheduler_alpha(Constant, 0.3, 0.9), 0.3);
    assert!((scheduler_alpha(Exp, 2.0, 1.0) - 1.0).abs() < 1e-12);
    assert_eq!(scheduler_alpha(Exp, 2.0, 0.0), 0.0);
    assert!("cosine".parse::<SchedulerKind>().is_err());
}

#[test]
fn adam_matches_hand_stepped_quadratic() {
    // f(w) = (w − 3)², g = 2(w − 3)
    let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
    let mut w_ref = 0.5f64;
    let (mut m, mut v) = (0.0f64, 0.0f64);
    let mut w = Tensor::scalar(0.5);
    let mut opt = Adam::new(lr);
    for t in 1..=10 {
        let g = 2.0 * (w_ref - 3.0);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t));
        let v_hat = v / (1.0 - b2.powi(t));
        w_ref -= lr * m_hat / (v_hat.sqrt() + eps);

        let grad = Tensor::scalar(2.0 * (w.item() - 3.0));
        opt.step(vec![&mut w], &[grad]).unwrap();
        assert!((w.item() - w_ref).abs() < 1e-12, "step {t}");
    }
    assert_eq!(opt.steps(), 10);
}

#[test]
fn adam_rejects_mismatched_shapes() {
    let mut w = Tensor::zeros(2, 2);
    let mut opt = Adam::new(0.1);
    assert!(opt.step(vec![&mut w], &[Tensor::zeros(1, 2)]).is_err());
    assert!(opt.step(vec![&mut w], &[]).is_err());
}

fn common_neighbour_auc(g: &robust_link::graph::Graph, noisy: &robust_link::noise::NoisySplit) -> f64 {
    let mut nb = vec![HashSet::new(); g.n_nodes()];
    for &(i, j) in &noisy.obs_noisy {
        nb[i].insert(j);
        nb[j].insert(i);
    }
    let q = &noisy.base.test;
    let counts: Vec<f64> = q.edges().iter().map(|&(i, j)| nb[i].intersection(&nb[j]).count() as f64).collect();
    auc(&counts, &q.labels()).unwrap()
}

fn same_block_auc(g: &robust_link::graph::Graph, noisy: &robust_link::noise::NoisySplit) -> f64 {
    let n = g.n_nodes();
    let q = &noisy.base.test;
    let same: Vec<f64> = q.edges().iter().map(|&(i, j)| f64::from(u8::from(i * 2 / n == j * 2 / n))).collect();
    auc(&same, &q.labels()).unwrap()
}

#[test]
fn standard_training_matches_the_common_neighbour_oracle_on_a_two_block_sbm() {
    let (g, noisy) = small_sbm(200, 0.0, 40);
    let out = quick_train(&g, &noisy, Mode::Standard, 300, 0);
    let test = out.model.test_auc(&g, &noisy).unwrap();
    // A logistic model on one count feature ranks exactly as the count does.
    let oracle = common_neighbour_auc(&g, &noisy);
    let block = same_block_auc(&g, &noisy);
    println!("two-block sbm: model {test:.4}, common-neighbour oracle {oracle:.4}, true-block score {block:.4}");
    assert!(test > oracle - 0.03, "model {test} vs oracle {oracle}");
    assert!(test > 0.7);
    assert!(out.history.iter().all(|h| h.loss.is_finite()));
}

#[test]
fn reported_model_is_the_best_validation_epoch() {
    let (g, noisy) = small_sbm(120, 0.2, 41);
    let out = quick_train(&g, &noisy, Mode::Standard, 40, 1);
    let best = out
        .history
        .iter()
        .filter_map(|h| h.valid_auc.map(|a| (h.epoch, a)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    assert_eq!(out.model.best_epoch, best.0);
    assert_eq!(out.model.best_valid_auc, best.1);
}

fn run_spec<'a>(
    g: &'a robust_link::graph::Graph,
    noisy: &'a robust_link::noise::NoisySplit,
    mode: Mode,
    lr: f64,
) -> RunSpec<'a> {
    RunSpec {
        graph: g,
        noisy,
        encoder: EncoderConfig::new(Arch::Sage, 2, 16),
        objective: ObjectiveConfig::with_mode(mode),
        train: TrainConfig {
            epochs: 15,
            lr,
            patience: 15,
            eval_every: 1,
            ..Default::default()
        },
        seed: 9,
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let mut w = vec![Tensor::from_vec(2, 2, vec![0.1, -0.4, 2.0, 0.0]).unwrap(), Tensor::scalar(-1.5)];
    let before = w.clone();
    let mut opt = Adam::new(0.0);
    for k in 0..50 {
        let grads = [Tensor::full(2, 2, k as f64 - 7.0), Tensor::scalar(3.0)];
        opt.step(w.iter_mut().collect(), &grads).unwrap();
    }
    assert_eq!(w, before);
    // A run config must still carry a positive rate.
    let (g, noisy) = small_sbm(80, 0.2, 42);
    assert!(train(&run_spec(&g, &noisy, Mode::Standard, 0.0)).is_err());
}

#[test]
fn identical_seeds_give_identical_histories_in_every_mode() {
    let (g, noisy) = small_sbm(80, 0.2, 43);
    for mode in [Mode::Standard, Mode::Gib, Mode::Dropedge, Mode::RgibSsl, Mode::RgibRep] {
        let a = train(&run_spec(&g, &noisy, mode, 0.01)).unwrap();
        let b = train(&run_spec(&g, &noisy, mode, 0.01)).unwrap();
        assert_eq!(a.history, b.history, "{mode}");
        let bits = |h: &[robust_link::trainer::EpochLog]| h.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.history), bits(&b.history));
        assert!(a.history.iter().all(|h| h.loss.is_finite()), "{mode}");
    }
}

#[test]
fn inconsistent_configs_are_rejected() {
    let (g, noisy) = small_sbm(80, 0.0, 44);
    let mut spec = run_spec(&g, &noisy, Mode::Standard, 0.01);
    spec.train.patience = 100;
    assert!(train(&spec).is_err());
    let mut spec = run_spec(&g, &noisy, Mode::RgibRep, 0.01);
    spec.objective.tau = 1.0;
    assert!(train(&spec).is_err());
}
