//! Independent oracles shared by the core integration tests and the
//! acceptance suite. Everything here recomputes the quantity under test from
//! first principles instead of calling the code being checked.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use advcausal_core::attacks::{run_attack, AttackConfig, AttackKind, Objective, WorstBatch};
use advcausal_core::autodiff::{Tape, Var};
use advcausal_core::causal::{finite_diff_theta, interventional_expectation, weighted_jacobians};
use advcausal_core::defenses::{adml_loss, AdmlLossOptions, Perturbed};
use advcausal_core::models::{
    cross_entropy, cross_entropy_value, Activation, Classifier, ClassifierSpec, TrainingStage,
};
use advcausal_core::rng::{derive, rng_from, Rng};
use advcausal_core::{Tensor, PROB_FLOOR};
use rand::Rng as _;
use serde::Deserialize;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_ABS_FLOOR: f64 = 1e-7;

// ---------------------------------------------------------------- helpers

pub fn rand_tensor(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product::<usize>().max(1);
    let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Uniform draw in `[lo, hi]` that keeps at least `gap` away from every kink.
fn away_from(rng: &mut Rng, lo: f64, hi: f64, kinks: &[f64], gap: f64) -> f64 {
    loop {
        let v = rng.random_range(lo..hi);
        if kinks.iter().all(|k| (v - k).abs() > gap) {
            return v;
        }
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `W u + b` for a row-major `(d, dim)` weight.
pub fn linear_logits(w: &[f64], b: &[f64], u: &[f64]) -> Vec<f64> {
    let dim = u.len();
    b.iter()
        .enumerate()
        .map(|(j, bj)| bj + (0..dim).map(|k| w[j * dim + k] * u[k]).sum::<f64>())
        .collect()
}

/// Closed-form softmax Jacobian of a linear model: `J = diag(f) W − f fᵀ W`.
pub fn linear_softmax_jacobian(w: &[f64], b: &[f64], u: &[f64]) -> Vec<f64> {
    let dim = u.len();
    let d = b.len();
    let f = softmax(&linear_logits(w, b, u));
    let mut mix = vec![0.0; dim];
    for l in 0..d {
        for k in 0..dim {
            mix[k] += f[l] * w[l * dim + k];
        }
    }
    let mut j = vec![0.0; d * dim];
    for r in 0..d {
        for k in 0..dim {
            j[r * dim + k] = f[r] * (w[r * dim + k] - mix[k]);
        }
    }
    j
}

pub fn linear_model(d: usize, dim: usize, w: Vec<f64>, b: Vec<f64>) -> Classifier {
    let spec = ClassifierSpec {
        input_dim: dim,
        hidden_dims: vec![],
        num_classes: d,
        activation: Activation::Relu,
        init_seed: 0,
    };
    let params = vec![Tensor::new(vec![d, dim], w).unwrap(), Tensor::new(vec![d], b).unwrap()];
    Classifier::from_parts(spec, params, TrainingStage::Initialized).unwrap()
}

pub fn random_mlp(rng: &mut Rng, dim: usize, hidden: &[usize], d: usize) -> Classifier {
    let spec = ClassifierSpec {
        input_dim: dim,
        hidden_dims: hidden.to_vec(),
        num_classes: d,
        activation: Activation::Relu,
        init_seed: rng.random(),
    };
    let mut model = Classifier::init(spec).unwrap();
    // Nonzero biases so the fixture is not symmetric around the origin.
    for p in model.params_mut() {
        if p.shape().len() == 1 {
            for v in p.data_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
        }
    }
    model
}

pub fn checksum(model: &Classifier) -> Vec<u64> {
    model.params().iter().flat_map(|p| p.data().iter().map(|v| v.to_bits())).collect()
}

fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// First coordinate where analytic and numeric gradients disagree.
pub fn first_mismatch(analytic: &[f64], numeric: &[f64]) -> Option<(usize, f64, f64)> {
    analytic.iter().zip(numeric).enumerate().find_map(|(i, (&a, &n))| {
        let err = (a - n).abs();
        let scale = a.abs().max(n.abs());
        let ok = err <= FD_ABS_FLOOR || err / scale < FD_REL_TOL;
        (!ok).then_some((i, a, n))
    })
}

// ------------------------------------------------------- gradient oracle

type Build = fn(&mut Tape, &[Var]) -> Var;

struct PrimitiveCase {
    name: &'static str,
    gen: fn(&mut Rng) -> Vec<Tensor>,
    build: Build,
}

fn shape2(rng: &mut Rng) -> (usize, usize) {
    (rng.random_range(1..5), rng.random_range(1..5))
}

fn gen_pair(rng: &mut Rng) -> Vec<Tensor> {
    let (n, m) = shape2(rng);
    vec![rand_tensor(rng, &[n, m], -2.0, 2.0), rand_tensor(rng, &[n, m], -2.0, 2.0)]
}

fn gen_one(rng: &mut Rng) -> Vec<Tensor> {
    let (n, m) = shape2(rng);
    vec![rand_tensor(rng, &[n, m], -2.0, 2.0)]
}

fn gen_kinked(rng: &mut Rng, kinks: &[f64]) -> Vec<Tensor> {
    let (n, m) = shape2(rng);
    let data = (0..n * m).map(|_| away_from(rng, -2.0, 2.0, kinks, 1e-3)).collect();
    vec![Tensor::new(vec![n, m], data).unwrap()]
}

fn primitive_cases() -> Vec<PrimitiveCase> {
    vec![
        PrimitiveCase {
            name: "matmul",
            gen: |rng| {
                let (n, k) = shape2(rng);
                let m = rng.random_range(1..5);
                vec![rand_tensor(rng, &[n, k], -2.0, 2.0), rand_tensor(rng, &[k, m], -2.0, 2.0)]
            },
            build: |t, v| t.matmul(v[0], v[1]).unwrap(),
        },
        PrimitiveCase {
            name: "transpose",
            gen: gen_one,
            build: |t, v| t.transpose(v[0]).unwrap(),
        },
        PrimitiveCase {
            name: "add",
            gen: gen_pair,
            build: |t, v| t.add(v[0], v[1]).unwrap(),
        },
        PrimitiveCase {
            name: "add_bias",
            gen: |rng| {
                let (n, m) = shape2(rng);
                vec![rand_tensor(rng, &[n, m], -2.0, 2.0), rand_tensor(rng, &[m], -2.0, 2.0)]
            },
            build: |t, v| t.add(v[0], v[1]).unwrap(),
        },
        PrimitiveCase {
            name: "sub",
            gen: gen_pair,
            build: |t, v| t.sub(v[0], v[1]).unwrap(),
        },
        PrimitiveCase {
            name: "mul",
            gen: gen_pair,
            build: |t, v| t.mul(v[0], v[1]).unwrap(),
        },
        PrimitiveCase {
            name: "mul_self",
            gen: gen_one,
            build: |t, v| t.mul(v[0], v[0]).unwrap(),
        },
        PrimitiveCase {
            name: "scale",
            gen: gen_one,
            build: |t, v| t.scale(v[0], -1.7),
        },
        PrimitiveCase {
            name: "neg",
            gen: gen_one,
            build: |t, v| t.neg(v[0]),
        },
        PrimitiveCase {
            name: "relu",
            gen: |rng| gen_kinked(rng, &[0.0]),
            build: |t, v| t.relu(v[0]),
        },
        PrimitiveCase {
            name: "softmax",
            gen: gen_one,
            build: |t, v| t.softmax(v[0]).unwrap(),
        },
        PrimitiveCase {
            name: "log",
            gen: |rng| {
                let (n, m) = shape2(rng);
                vec![rand_tensor(rng, &[n, m], 0.1, 3.0)]
            },
            build: |t, v| t.log(v[0]).unwrap(),
        },
        PrimitiveCase {
            name: "sum",
            gen: gen_one,
            build: |t, v| t.sum(v[0]),
        },
        PrimitiveCase {
            name: "mean",
            gen: gen_one,
            build: |t, v| t.mean(v[0]),
        },
        PrimitiveCase {
            name: "sign",
            gen: |rng| gen_kinked(rng, &[0.0]),
            build: |t, v| t.sign(v[0]),
        },
        PrimitiveCase {
            name: "clamp",
            gen: |rng| gen_kinked(rng, &[-0.5, 0.8]),
            build: |t, v| t.clamp(v[0], -0.5, 0.8).unwrap(),
        },
        PrimitiveCase {
            name: "gather",
            gen: |rng| {
                let n = rng.random_range(1..5);
                vec![rand_tensor(rng, &[n, 4], -2.0, 2.0)]
            },
            build: |t, v| {
                let n = t.value(v[0]).rows();
                let idx: Vec<usize> = (0..n).map(|i| (3 * i + 1) % 4).collect();
                t.gather(v[0], &idx).unwrap()
            },
        },
    ]
}

/// `Σ r ⊙ op(inputs)` for a fixed random `r`, so every output coordinate matters.
fn contracted(build: Build, inputs: &[Tensor], r: &Tensor, trainable: bool) -> (Tape, Vec<Var>, Var) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone(), trainable)).collect();
    let out = build(&mut tape, &vars);
    let rv = tape.constant(r.clone());
    let prod = tape.mul(out, rv).unwrap();
    let loss = tape.sum(prod);
    (tape, vars, loss)
}

#[derive(Debug)]
pub struct GradientFailure {
    pub fixture: String,
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Checks `per_primitive` random fixtures of every primitive plus `mlp_fixtures`
/// composed CE-of-MLP losses. Returns the number of fixtures and any failures.
pub fn gradient_suite(seed: u64, per_primitive: usize, mlp_fixtures: usize) -> (usize, Vec<GradientFailure>) {
    let mut rng = rng_from(seed);
    let mut failures = Vec::new();
    let mut count = 0;
    for case in primitive_cases() {
        for f in 0..per_primitive {
            count += 1;
            let inputs = (case.gen)(&mut rng);
            let out_shape = {
                let mut tape = Tape::new();
                let vars: Vec<Var> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
                let out = (case.build)(&mut tape, &vars);
                tape.value(out).shape().to_vec()
            };
            let r = rand_tensor(&mut rng, &out_shape, -1.0, 1.0);
            let (tape, vars, loss) = contracted(case.build, &inputs, &r, true);
            let grads = tape.backward(loss).unwrap();
            for (k, input) in inputs.iter().enumerate() {
                let analytic = grads.get_or_zeros(vars[k], input.numel());
                let eval = |flat: &[f64]| {
                    let mut moved = inputs.clone();
                    moved[k] = Tensor::new(input.shape().to_vec(), flat.to_vec()).unwrap();
                    let (t, _, l) = contracted(case.build, &moved, &r, false);
                    t.value(l).item()
                };
                let numeric = central_diff(&eval, input.data());
                if let Some((coordinate, a, n)) = first_mismatch(&analytic, &numeric) {
                    failures.push(GradientFailure {
                        fixture: format!("{}#{f} input {k}", case.name),
                        coordinate,
                        analytic: a,
                        numeric: n,
                    });
                }
            }
        }
    }
    for f in 0..mlp_fixtures {
        count += 1;
        let dim = rng.random_range(1..5);
        let d = rng.random_range(2..5);
        let hidden: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(2..6)).collect();
        let model = random_mlp(&mut rng, dim, &hidden, d);
        let n = rng.random_range(1..5);
        let x = rand_tensor(&mut rng, &[n, dim], 0.0, 1.0);
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..d)).collect();

        let mut tape = Tape::new();
        let params = model.bind(&mut tape, true);
        let xv = tape.leaf(x.clone(), true);
        let probs = model.probs_var(&mut tape, &params, xv).unwrap();
        let loss = cross_entropy(&mut tape, probs, &y).unwrap();
        let grads = tape.backward(loss).unwrap();

        let loss_at = |m: &Classifier, x: &Tensor| cross_entropy_value(&m.predict_proba(x).unwrap(), &y).unwrap();
        for (k, p) in model.params().iter().enumerate() {
            let analytic = grads.get_or_zeros(params[k], p.numel());
            let eval = |flat: &[f64]| {
                let mut ps = model.params().to_vec();
                ps[k] = Tensor::new(p.shape().to_vec(), flat.to_vec()).unwrap();
                let m = Classifier::from_parts(model.spec().clone(), ps, model.stage()).unwrap();
                loss_at(&m, &x)
            };
            let numeric = central_diff(&eval, p.data());
            if let Some((coordinate, a, n)) = first_mismatch(&analytic, &numeric) {
                failures.push(GradientFailure {
                    fixture: format!("mlp#{f} param {k}"),
                    coordinate,
                    analytic: a,
                    numeric: n,
                });
            }
        }
        let analytic = grads.get_or_zeros(xv, x.numel());
        let eval = |flat: &[f64]| loss_at(&model, &Tensor::new(x.shape().to_vec(), flat.to_vec()).unwrap());
        let numeric = central_diff(&eval, x.data());
        if let Some((coordinate, a, n)) = first_mismatch(&analytic, &numeric) {
            failures.push(GradientFailure {
                fixture: format!("mlp#{f} input"),
                coordinate,
                analytic: a,
                numeric: n,
            });
        }
    }
    (count, failures)
}

// ------------------------------------------------------------ attack fuzz

#[derive(Debug, Default)]
pub struct FuzzOutcome {
    pub invocations: usize,
    pub ball_violations: usize,
    pub range_violations: usize,
    pub nondeterministic: usize,
    pub model_mutations: usize,
    pub errors: usize,
}

pub const FUZZ_KINDS: [AttackKind; 4] = [AttackKind::Fgsm, AttackKind::Bim, AttackKind::Pgd, AttackKind::CwInf];

/// One randomized (model, input, config) attack invocation, run twice.
pub fn fuzz_once(rng: &mut Rng, out: &mut FuzzOutcome) {
    let dim = rng.random_range(1..6);
    let d = rng.random_range(2..5);
    let hidden: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(1..6)).collect();
    let model = random_mlp(rng, dim, &hidden, d);
    let n = rng.random_range(1..5);
    // Boundary values show up often so clipping is exercised.
    let data = (0..n * dim)
        .map(|_| match rng.random_range(0..6) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..=1.0),
        })
        .collect();
    let x = Tensor::new(vec![n, dim], data).unwrap();
    let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..d)).collect();
    let kind = FUZZ_KINDS[rng.random_range(0..4)];
    let gamma = match rng.random_range(0..5) {
        0 => 0.0,
        1 => rng.random_range(0.5..2.0),
        _ => rng.random_range(0.0..0.3),
    };
    let cfg = AttackConfig {
        gamma,
        steps: rng.random_range(1..8),
        step_size: if rng.random_bool(0.5) { Some(rng.random_range(1e-3..0.5)) } else { None },
        random_start: rng.random_bool(0.5),
        objective: if rng.random_bool(0.5) { Objective::Ce } else { Objective::Cw },
        kappa: rng.random_range(0.0..2.0),
        seed: rng.random(),
    };
    let before = checksum(&model);
    out.invocations += 1;
    let first = match run_attack(kind, &model, &x, &y, &cfg) {
        Ok(a) => a,
        Err(_) => {
            out.errors += 1;
            return;
        }
    };
    let again = run_attack(kind, &model, &x, &y, &cfg).unwrap();
    if checksum(&model) != before {
        out.model_mutations += 1;
    }
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    if bits(&first) != bits(&again) {
        out.nondeterministic += 1;
    }
    let mut ball = false;
    let mut range = false;
    for (a, c) in first.data().iter().zip(x.data()) {
        ball |= (a - c).abs() > gamma + 1e-9;
        range |= !(0.0..=1.0).contains(a);
    }
    out.ball_violations += ball as usize;
    out.range_violations += range as usize;
}

pub fn attack_fuzz(seed: u64, invocations: usize) -> FuzzOutcome {
    let mut rng = rng_from(seed);
    let mut out = FuzzOutcome::default();
    for _ in 0..invocations {
        fuzz_once(&mut rng, &mut out);
    }
    out
}

// ----------------------------------------------------- PGD vs grid search

pub const GRID_RESOLUTION: f64 = 0.005;

fn ce_linear(w: &[f64], b: &[f64], u: &[f64], y: usize) -> f64 {
    -softmax(&linear_logits(w, b, u))[y].max(PROB_FLOOR).ln()
}

/// Max CE over the clipped l∞ ball, by exhaustive grid search.
pub fn grid_max_ce(w: &[f64], b: &[f64], x: &[f64], y: usize, gamma: f64) -> f64 {
    let steps = (2.0 * gamma / GRID_RESOLUTION).round() as i64;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        for j in 0..=steps {
            let u = [
                (x[0] - gamma + i as f64 * GRID_RESOLUTION).clamp(0.0, 1.0),
                (x[1] - gamma + j as f64 * GRID_RESOLUTION).clamp(0.0, 1.0),
            ];
            best = best.max(ce_linear(w, b, &u, y));
        }
    }
    best
}

/// Worst ratio `CE(pgd) / CE(grid max)` over the points of one 2-input
/// logistic fixture.
pub fn pgd_grid_ratio(seed: u64, points: usize) -> f64 {
    let mut rng = rng_from(derive(seed, &[0x9D]));
    let w: Vec<f64> = (0..4).map(|_| rng.random_range(-6.0..6.0)).collect();
    let b: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = linear_model(2, 2, w.clone(), b.clone());
    let x = rand_tensor(&mut rng, &[points, 2], 0.0, 1.0);
    let y: Vec<usize> = (0..points).map(|_| rng.random_range(0..2)).collect();
    let cfg = AttackConfig {
        steps: 20,
        ..AttackConfig::evaluation(0.1, seed)
    };
    let adv = run_attack(AttackKind::Pgd, &model, &x, &y, &cfg).unwrap();
    (0..points)
        .map(|i| ce_linear(&w, &b, adv.row(i), y[i]) / grid_max_ce(&w, &b, x.row(i), y[i], 0.1))
        .fold(f64::INFINITY, f64::min)
}

// ------------------------------------------------------- causal oracles

/// Worst batch assembled by hand; `x + t` is the attacked point.
pub fn manual_worst(dim: usize, x: &[f64], t: &[f64], y: &[usize]) -> WorstBatch {
    let n = y.len();
    WorstBatch {
        indices: (0..n).collect(),
        input_dim: dim,
        x: x.to_vec(),
        y: y.to_vec(),
        t: t.to_vec(),
        attacked_class: vec![0; n],
        confidence: vec![0.5; n],
    }
}

/// Largest `|term − (−(1/p − 1)·J)|` over random linear-softmax fixtures, and
/// whether every `p = 1` term was exactly zero.
pub fn theta_analytic_error(seed: u64, fixtures: usize) -> (f64, bool) {
    let mut rng = rng_from(seed);
    let mut worst_err: f64 = 0.0;
    let mut zero_at_one = true;
    for _ in 0..fixtures {
        let d = rng.random_range(2..6);
        let dim = rng.random_range(1..5);
        let w: Vec<f64> = (0..d * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = linear_model(d, dim, w.clone(), b.clone());
        let n = rng.random_range(1..6);
        let x: Vec<f64> = (0..n * dim).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-0.1..0.1)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..d)).collect();
        let p: Vec<f64> = (0..n)
            .map(|i| if i % 3 == 0 { 1.0 } else { rng.random_range(0.01..1.0) })
            .collect();
        let worst = manual_worst(dim, &x, &t, &y);
        let terms = weighted_jacobians(&worst, &model, &p).unwrap();
        for i in 0..n {
            let u: Vec<f64> = (0..dim).map(|k| x[i * dim + k] + t[i * dim + k]).collect();
            let j = linear_softmax_jacobian(&w, &b, &u);
            let scale = -(1.0 / p[i] - 1.0);
            for (got, want) in terms[i].data().iter().zip(&j) {
                worst_err = worst_err.max((got - scale * want).abs());
            }
            if p[i] == 1.0 {
                zero_at_one &= terms[i].data().iter().all(|&v| v == 0.0);
            }
        }
    }
    (worst_err, zero_at_one)
}

/// The three-sample fixture: identity logits on `x + t` give the class
/// distributions (1/4, 1/2, 1/4), (1/3, 1/3, 1/3) and (2/5, 2/5, 1/5).
pub struct IeFixture {
    pub model: Classifier,
    pub x: Tensor,
    pub t: Tensor,
    pub y: Vec<usize>,
    pub p: Vec<f64>,
    /// Worked by hand: `2e₁ − f₁`, `4e₀ − 3f₂`, `e₂`, averaged.
    pub expected: [f64; 3],
}

pub fn ie_fixture() -> IeFixture {
    let ln2 = std::f64::consts::LN_2;
    let model = linear_model(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], vec![0.0; 3]);
    let x = Tensor::from_rows(&[&[0.1, 0.2, 0.3], &[0.5, 0.5, 0.5], &[0.4, 0.4, 0.0]]).unwrap();
    let t = Tensor::from_rows(&[&[-0.1, ln2 - 0.2, -0.3], &[-0.5, -0.5, -0.5], &[ln2 - 0.4, ln2 - 0.4, 0.0]]).unwrap();
    IeFixture {
        model,
        x,
        t,
        y: vec![1, 0, 2],
        p: vec![0.5, 0.25, 1.0],
        expected: [11.0 / 12.0, 1.0 / 6.0, -1.0 / 12.0],
    }
}

pub fn ie_fixture_error() -> f64 {
    let f = ie_fixture();
    let got = interventional_expectation(&f.model, &f.x, &f.y, &f.t, &f.p).unwrap();
    got.iter().zip(&f.expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// When `f(x + t)` is exactly the one-hot label, the expectation must equal the
/// empirical class distribution whatever the propensities are.
pub fn ie_degenerate_exact() -> bool {
    // Logit gaps of 1000 underflow every off-class exponential to zero.
    let w = vec![1000.0, 0.0, 0.0, 1000.0, -1000.0, -1000.0];
    let model = linear_model(3, 2, w, vec![0.0, 0.0, 999.0]);
    // Class 0 where u = (1, 0), class 1 where u = (0, 1), class 2 at the origin.
    let x = Tensor::from_rows(&[&[0.9, 0.0], &[0.0, 0.9], &[0.05, 0.0], &[0.9, 0.0], &[0.0, 0.0]]).unwrap();
    let t = Tensor::from_rows(&[&[0.1, 0.0], &[0.0, 0.1], &[-0.05, 0.0], &[0.1, 0.0], &[0.0, 0.0]]).unwrap();
    let y = vec![0, 1, 2, 0, 2];
    let probs = model.predict_proba(&x.zip_map(&t, |a, b| a + b).unwrap()).unwrap();
    for (i, &c) in y.iter().enumerate() {
        let one_hot: Vec<f64> = (0..3).map(|j| (j == c) as u8 as f64).collect();
        assert_eq!(probs.row(i), one_hot.as_slice(), "fixture row {i} is not one-hot");
    }
    let p = vec![0.3, 0.7, 1.0, 0.05, 0.5];
    let got = interventional_expectation(&model, &x, &y, &t, &p).unwrap();
    got == vec![2.0 / 5.0, 1.0 / 5.0, 2.0 / 5.0]
}

/// Relative error `‖fd − analytic‖ / ‖analytic‖` of the finite-difference
/// derivative against `mean_i (1 − 1/p_i) · J(x_i + t_i) · t_i/‖t_i‖`.
pub fn finite_diff_relative_error(seed: u64, epsilon: f64) -> f64 {
    let mut rng = rng_from(seed);
    let d = rng.random_range(2..5);
    let dim = rng.random_range(1..4);
    let w: Vec<f64> = (0..d * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let b: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
    let model = linear_model(d, dim, w.clone(), b.clone());
    let n = rng.random_range(1..6);
    let x = rand_tensor(&mut rng, &[n, dim], 0.1, 0.9);
    let t = rand_tensor(&mut rng, &[n, dim], -0.1, 0.1);
    let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..d)).collect();
    let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let fd = finite_diff_theta(&model, &x, &y, &t, epsilon, &p).unwrap();

    let mut analytic = vec![0.0; d];
    for i in 0..n {
        let ti = t.row(i);
        let norm = ti.iter().map(|v| v * v).sum::<f64>().sqrt();
        let u: Vec<f64> = x.row(i).iter().zip(ti).map(|(a, b)| a + b).collect();
        let j = linear_softmax_jacobian(&w, &b, &u);
        for r in 0..d {
            let dir: f64 = (0..dim).map(|k| j[r * dim + k] * ti[k] / norm).sum();
            analytic[r] += (1.0 - 1.0 / p[i]) * dir / n as f64;
        }
    }
    let diff = fd.iter().zip(&analytic).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / scale
}

// --------------------------------------------------- fine-tuning fixture

#[derive(Debug, Deserialize)]
pub struct SplitRows {
    pub x: Vec<Vec<f64>>,
    pub t: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

#[derive(Debug, Deserialize)]
pub struct AdmlFixture {
    pub num_classes: usize,
    pub input_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub d1: SplitRows,
    pub d2: SplitRows,
    /// Hand-derived balancing ratios of the flipped D2 rows, in row order.
    pub tau: Vec<f64>,
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn load_adml_fixture(name: &str) -> AdmlFixture {
    let text = std::fs::read_to_string(fixtures_dir().join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn rows(m: &[Vec<f64>]) -> Tensor {
    let refs: Vec<&[f64]> = m.iter().map(|r| r.as_slice()).collect();
    Tensor::from_rows(&refs).unwrap()
}

fn ce_floor(probs: &[f64], y: usize) -> f64 {
    -probs[y].max(PROB_FLOOR).ln()
}

pub struct AdmlCheck {
    pub l_a: f64,
    pub l_b: f64,
    pub total: f64,
    pub expected_l_a: f64,
    pub expected_l_b: f64,
    pub treated: usize,
    pub taus_seen: Vec<f64>,
}

/// Evaluates `adml_loss` on the fixture and the same objective by hand.
pub fn adml_fixture_check(fx: &AdmlFixture) -> AdmlCheck {
    let model = linear_model(fx.num_classes, fx.input_dim, fx.weight.clone(), fx.bias.clone());
    let (x1, t1, x2, t2) = (rows(&fx.d1.x), rows(&fx.d1.t), rows(&fx.d2.x), rows(&fx.d2.t));
    let mut tape = Tape::new();
    let params = model.bind(&mut tape, true);
    let terms = adml_loss(
        &mut tape,
        &model,
        &params,
        Perturbed { x: &x1, y: &fx.d1.y, t: &t1 },
        Perturbed { x: &x2, y: &fx.d2.y, t: &t2 },
        AdmlLossOptions::default(),
    )
    .unwrap();

    let probs = |x: &[f64], t: &[f64]| {
        let u: Vec<f64> = x.iter().zip(t).map(|(a, b)| a + b).collect();
        softmax(&linear_logits(&fx.weight, &fx.bias, &u))
    };
    let zeros = vec![0.0; fx.input_dim];
    let n1 = fx.d1.y.len() as f64;
    let expected_l_a = (0..fx.d1.y.len())
        .map(|i| ce_floor(&probs(&fx.d1.x[i], &fx.d1.t[i]), fx.d1.y[i]))
        .sum::<f64>()
        / n1;

    let mut taus_seen = Vec::new();
    let mut sum_b = 0.0;
    for i in 0..fx.d2.y.len() {
        let pa = probs(&fx.d2.x[i], &fx.d2.t[i]);
        let top = pa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let attacked = pa.iter().position(|&v| v == top).unwrap();
        if attacked == fx.d2.y[i] {
            continue;
        }
        let tau = fx.tau[taus_seen.len()];
        taus_seen.push(tau);
        let clean = probs(&fx.d2.x[i], &zeros);
        sum_b += tau * ce_floor(&pa, fx.d2.y[i]) + ce_floor(&clean, fx.d2.y[i]);
    }
    let expected_l_b = if taus_seen.is_empty() { 0.0 } else { sum_b / taus_seen.len() as f64 };
    AdmlCheck {
        l_a: terms.l_a,
        l_b: terms.l_b,
        total: tape.value(terms.total).item(),
        expected_l_a,
        expected_l_b,
        treated: terms.treated,
        taus_seen,
    }
}
