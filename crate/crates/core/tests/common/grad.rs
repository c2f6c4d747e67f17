//! Finite-difference checks of every tape op and of the full network, in
//! f64. Each check returns the largest relative error over its instances.

use avil::datasets::{SampleBatch, TaskSpec};
use avil::fixtures::{prototype_sets, PrototypeSpec};
use avil::model::{LossTerm, MultiHeadModel, TaskModel};
use avil::tensor::gradcheck::check_gradient;
use avil::tensor::{Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INSTANCES: u64 = 10;
const STEP: f64 = 1e-5;
/// Op-level relative tolerance.
pub const OP_TOL: f64 = 1e-5;
/// Tolerance for the composed network at step 1e-4.
pub const NET_TOL: f64 = 1e-3;

/// Builds the scalar loss from leaves holding the given inputs.
type Build<'a> = dyn Fn(&mut Tape<f64>, &[Var]) -> Var + 'a;

fn leaves(tape: &mut Tape<f64>, shapes: &[Vec<usize>], flat: &[f64]) -> Vec<Var> {
    let mut at = 0;
    shapes
        .iter()
        .map(|s| {
            let n: usize = s.iter().product();
            let t = Tensor::new(s, flat[at..at + n].to_vec()).unwrap().tracked();
            at += n;
            tape.leaf(t)
        })
        .collect()
}

fn check(shapes: &[Vec<usize>], flat: &[f64], build: &Build<'_>) -> f64 {
    let mut tape = Tape::new();
    let vars = leaves(&mut tape, shapes, flat);
    let loss = build(&mut tape, &vars);
    tape.backward(loss).unwrap();
    let mut analytic = Vec::with_capacity(flat.len());
    for (v, s) in vars.iter().zip(shapes) {
        match tape.grad(*v) {
            Some(g) => analytic.extend_from_slice(g),
            None => analytic.extend(std::iter::repeat(0.0).take(s.iter().product())),
        }
    }
    let report = check_gradient(
        |p| {
            let mut t = Tape::new();
            let vars = leaves(&mut t, shapes, p);
            let l = build(&mut t, &vars);
            t.value(l).item().unwrap()
        },
        flat,
        &analytic,
        STEP,
        1e-6,
        None,
    );
    report.max_relative_error
}

/// Reduces `v` to a scalar through a fixed random linear map.
fn project(tape: &mut Tape<f64>, v: Var, r: &[f64]) -> Var {
    let flat = tape.reshape(v, &[1, r.len()]).unwrap();
    let w = tape.leaf(Tensor::new(&[r.len(), 1], r.to_vec()).unwrap());
    let b = tape.leaf(Tensor::new(&[1], vec![0.0]).unwrap());
    let y = tape.linear(flat, w, b).unwrap();
    tape.sum(y).unwrap()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Values at least 0.05 away from zero, so no perturbation crosses a kink.
fn off_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

pub fn linear_gradients() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, i, o) = (rng.gen_range(1..5), rng.gen_range(1..6), rng.gen_range(1..5));
        let shapes = vec![vec![b, i], vec![i, o], vec![o]];
        let flat = uniform(&mut rng, b * i + i * o + o);
        let r = uniform(&mut rng, b * o);
        worst = worst.max(check(&shapes, &flat, &|t, v| {
            let y = t.linear(v[0], v[1], v[2]).unwrap();
            project(t, y, &r)
        }));
    }
    worst
}

pub fn conv2d_gradients() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (n, cin, cout, k) = (rng.gen_range(1..3), rng.gen_range(1..3), rng.gen_range(1..4), rng.gen_range(1..4));
        let (h, w) = (k + rng.gen_range(0..4), k + rng.gen_range(0..4));
        let shapes = vec![vec![n, cin, h, w], vec![cout, cin, k, k], vec![cout]];
        let flat = uniform(&mut rng, n * cin * h * w + cout * cin * k * k + cout);
        let r = uniform(&mut rng, n * cout * (h - k + 1) * (w - k + 1));
        worst = worst.max(check(&shapes, &flat, &|t, v| {
            let y = t.conv2d(v[0], v[1], v[2]).unwrap();
            project(t, y, &r)
        }));
    }
    worst
}

pub fn maxpool_gradients() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let (n, c, h, w) = (rng.gen_range(1..3), rng.gen_range(1..3), 2 * rng.gen_range(1..4), 2 * rng.gen_range(1..4));
        let len = n * c * h * w;
        // distinct values spaced 0.01 apart keep every window's argmax stable
        let mut ranks: Vec<usize> = (0..len).collect();
        ranks.shuffle(&mut rng);
        let flat: Vec<f64> = ranks.iter().map(|&k| k as f64 * 0.01 - 0.3).collect();
        let r = uniform(&mut rng, len / 4);
        worst = worst.max(check(&[vec![n, c, h, w]], &flat, &|t, v| {
            let y = t.maxpool2(v[0]).unwrap();
            project(t, y, &r)
        }));
    }
    worst
}

pub fn relu_gradients() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let n = rng.gen_range(1..20);
        let flat = off_zero(&mut rng, n);
        let r = uniform(&mut rng, n);
        worst = worst.max(check(&[vec![n]], &flat, &|t, v| {
            let y = t.relu(v[0]).unwrap();
            project(t, y, &r)
        }));
    }
    worst
}

pub fn cross_entropy_gradients() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let (b, c) = (rng.gen_range(1..6), rng.gen_range(2..11));
        let flat: Vec<f64> = (0..b * c).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let labels: Vec<usize> = (0..b).map(|_| rng.gen_range(0..c)).collect();
        worst = worst.max(check(&[vec![b, c]], &flat, &|t, v| {
            t.cross_entropy_mean(v[0], &labels).unwrap()
        }));
    }
    worst
}

pub fn glue_op_gradients() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let (a, b) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let shapes = vec![vec![a, b], vec![a, b]];
        let flat = uniform(&mut rng, 2 * a * b);
        let r = uniform(&mut rng, a * b);
        let k = rng.gen_range(-2.0..2.0);
        worst = worst.max(check(&shapes, &flat, &|t, v| {
            let y = t.add(v[0], v[1]).unwrap();
            project(t, y, &r)
        }));
        worst = worst.max(check(&shapes[..1], &flat[..a * b], &|t, v| {
            let y = t.scale(v[0], k).unwrap();
            project(t, y, &r)
        }));
        worst = worst.max(check(&shapes[..1], &flat[..a * b], &|t, v| {
            let y = t.reshape(v[0], &[b, a]).unwrap();
            let y = t.scale(y, k).unwrap();
            t.sum(y).unwrap()
        }));
    }
    worst
}

pub fn network_gradient() -> f64 {
    let tasks = [TaskSpec::top_left(), TaskSpec::bottom_right()];
    let ids: Vec<_> = tasks.iter().map(|t| t.id.clone()).collect();
    let (set, _) = prototype_sets(&PrototypeSpec {
        train: 6,
        dev: 1,
        ..Default::default()
    });
    let batch = SampleBatch::<f64>::gather(&set, &(0..6).collect::<Vec<_>>()).unwrap();
    let tl = batch.labels(tasks[0].column).to_vec();
    let br = batch.labels(tasks[1].column).to_vec();
    let model = MultiHeadModel::<f64>::new(&ids, 9).unwrap();
    let terms = [
        LossTerm { task: 0, labels: &tl, weight: 0.7 },
        LossTerm { task: 1, labels: &br, weight: 0.3 },
    ];
    let analytic = model.loss_and_grad(&batch.images, &terms).unwrap().grad;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut idx: Vec<usize> = Vec::new();
    for entry in model.layout() {
        let r = entry.range();
        idx.extend((0..4).map(|_| rng.gen_range(r.clone())));
    }
    let base = model.params().to_vec();
    let report = check_gradient(
        |p| {
            let mut m = model.clone();
            m.params_mut().copy_from_slice(p);
            let lg = m.loss_and_grad(&batch.images, &terms).unwrap();
            0.7 * lg.losses[0] + 0.3 * lg.losses[1]
        },
        &base,
        &analytic,
        1e-4,
        1e-6,
        Some(&idx),
    );
    report.max_relative_error
}
