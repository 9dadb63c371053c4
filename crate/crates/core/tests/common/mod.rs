//! Reference implementations for integration tests. Everything here works on
//! plain nested vectors and never touches the tape or the crate's transforms.
#![allow(dead_code)]

use std::f64::consts::PI;

use steinmetz::data::{Dataset, Labels, Meta};
use steinmetz::harness::loss_and_gradients;
use steinmetz::models::{init_params, Model, NetworkKind, NetworkSpec, Task};
use steinmetz::rng::Rng;
use steinmetz::tensor::Tensor;

pub type Rows = Vec<Vec<f64>>;

pub fn random_tensor(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| rng.uniform_range(-1.0, 1.0))
        .collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

pub fn to_rows(t: &Tensor) -> Rows {
    t.row_iter().map(|r| r.to_vec()).collect()
}

/// Random dataset for `task` with `m` examples of width `dn` and `k` outputs.
pub fn small_dataset(task: Task, m: usize, dn: usize, k: usize, seed: u64) -> Dataset {
    let mut rng = Rng::seed_from_u64(seed);
    let re = random_tensor(&mut rng, m, dn);
    let im = random_tensor(&mut rng, m, dn);
    let labels = match task {
        Task::Classification => Labels::Classes((0..m).map(|_| rng.below(k) as u32).collect()),
        Task::ComplexRegression => Labels::Complex(random_tensor(&mut rng, m, 2 * k)),
    };
    Dataset::new(re, im, labels, Meta::new(m, dn, k, task, "synthetic")).unwrap()
}

/// Hilbert transform by explicit O(n²) DFT with the multiplier
/// 1 at DC and Nyquist, −i below Nyquist, +i above.
pub fn oracle_hilbert(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let (mut sr, mut si) = (vec![0.0; n], vec![0.0; n]);
    for b in 0..n {
        for (t, &v) in z.iter().enumerate() {
            let a = -2.0 * PI * (b * t) as f64 / n as f64;
            sr[b] += v * a.cos();
            si[b] += v * a.sin();
        }
        let (r, i) = (sr[b], si[b]);
        if b != 0 && 2 * b != n {
            let s = if 2 * b < n { 1.0 } else { -1.0 };
            sr[b] = s * i;
            si[b] = -s * r;
        }
    }
    (0..n)
        .map(|t| {
            (0..n)
                .map(|b| {
                    let a = 2.0 * PI * (b * t) as f64 / n as f64;
                    sr[b] * a.cos() - si[b] * a.sin()
                })
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

fn param(model: &Model, name: &str) -> Rows {
    to_rows(
        model
            .param(name)
            .unwrap_or_else(|| panic!("missing {name}")),
    )
}

fn dense(x: &[f64], w: &Rows, b: &Rows) -> Vec<f64> {
    w.iter()
        .zip(&b[0])
        .map(|(row, bias)| row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + bias)
        .collect()
}

fn layer(model: &Model, name: &str, x: &[f64]) -> Vec<f64> {
    dense(
        x,
        &param(model, &format!("{name}.weight")),
        &param(model, &format!("{name}.bias")),
    )
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|a| a.max(0.0)).collect()
}

fn center(v: Vec<f64>) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.into_iter().map(|a| a - mean).collect()
}

fn complex_layer(model: &Model, name: &str, re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let wr = param(model, &format!("{name}.weight_re"));
    let wi = param(model, &format!("{name}.weight_im"));
    let br = &param(model, &format!("{name}.bias_re"))[0];
    let bi = &param(model, &format!("{name}.bias_im"))[0];
    let dot = |w: &Vec<f64>, x: &[f64]| w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    (0..wr.len())
        .map(|j| {
            (
                dot(&wr[j], re) - dot(&wi[j], im) + br[j],
                dot(&wr[j], im) + dot(&wi[j], re) + bi[j],
            )
        })
        .unzip()
}

/// Prediction and latent pair for one example.
pub fn oracle_forward(model: &Model, x_re: &[f64], x_im: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let spec = model.spec();
    match spec.kind {
        NetworkKind::Steinmetz | NetworkKind::Analytic => {
            let zr = center(relu(layer(
                model,
                "realfc2",
                &relu(layer(model, "realfc1", x_re)),
            )));
            let zi = center(relu(layer(
                model,
                "imagfc2",
                &relu(layer(model, "imagfc1", x_im)),
            )));
            let joint: Vec<f64> = zr.iter().chain(&zi).copied().collect();
            (layer(model, "regressor", &joint), zr, zi)
        }
        NetworkKind::Rvnn => {
            let x: Vec<f64> = x_re.iter().chain(x_im).copied().collect();
            let latent = relu(layer(model, "fc2", &relu(layer(model, "fc1", &x))));
            let pred = layer(model, "fc3", &latent);
            let l = spec.latent_dim;
            (pred, latent[..l].to_vec(), latent[l..].to_vec())
        }
        NetworkKind::Cvnn => {
            let (a, b) = complex_layer(model, "fc1", x_re, x_im);
            let (a, b) = (relu(a), relu(b));
            let (lr, li) = complex_layer(model, "fc2", &a, &b);
            let (lr, li) = (relu(lr), relu(li));
            let (yr, yi) = complex_layer(model, "fc3", &lr, &li);
            let pred = match spec.task {
                Task::Classification => yr
                    .iter()
                    .zip(&yi)
                    .map(|(r, i)| (r * r + i * i + 1e-12).sqrt())
                    .collect(),
                Task::ComplexRegression => yr.iter().chain(&yi).copied().collect(),
            };
            (pred, lr, li)
        }
    }
}

/// Training objective on the listed examples, computed without the tape.
pub fn oracle_objective(model: &Model, ds: &Dataset, idx: &[usize], beta: f64) -> f64 {
    let (mut task, mut penalty) = (0.0, 0.0);
    let mut task_terms = 0usize;
    for &i in idx {
        let (pred, zr, zi) = oracle_forward(model, ds.features_re.row(i), ds.features_im.row(i));
        match &ds.labels {
            Labels::Classes(c) => {
                let max = pred.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + pred.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                task += lse - pred[c[i] as usize];
                task_terms += 1;
            }
            Labels::Complex(t) => {
                task += pred
                    .iter()
                    .zip(t.row(i))
                    .map(|(p, y)| (p - y).powi(2))
                    .sum::<f64>();
                task_terms += pred.len();
            }
        }
        let h = oracle_hilbert(&zr);
        penalty += h.iter().zip(&zi).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / zr.len() as f64;
    }
    let task = task / task_terms as f64;
    if model.spec().kind == NetworkKind::Analytic {
        task + beta * penalty / idx.len() as f64
    } else {
        task
    }
}

/// Model with random weights and biases so no unit starts exactly at a kink.
pub fn random_model(kind: NetworkKind, task: Task, seed: u64) -> Model {
    let spec = NetworkSpec {
        kind,
        input_dim: 6,
        latent_dim: 4,
        output_dim: 3,
        task,
    };
    let mut model = init_params(&spec, seed).unwrap();
    let mut rng = Rng::seed_from_u64(seed ^ 0xB1A5);
    for p in model.params_mut() {
        for v in p.value.data_mut() {
            *v += rng.uniform_range(-0.5, 0.5);
        }
    }
    model
}

/// Central-difference check (h = 1e-5) of the tape gradients of the training
/// objective against [`oracle_objective`], on a batch of two random examples
/// with dN = 6, lN = 4, k = 3. Relative error is `|a − b| / max(|a|, |b|, 1)`.
pub fn fd_check_model(kind: NetworkKind, task: Task, seed: u64, beta: f64) -> Result<(), String> {
    const H: f64 = 1e-5;
    let mut model = random_model(kind, task, seed);
    let ds = small_dataset(task, 2, 6, 3, seed.wrapping_add(100));
    let idx = [0, 1];
    let (value, grads) = loss_and_gradients(&model, &ds, &idx, beta).map_err(|e| e.to_string())?;
    let reference = oracle_objective(&model, &ds, &idx, beta);
    if (value - reference).abs() > 1e-12 * value.abs().max(1.0) {
        return Err(format!(
            "{kind} {task:?} seed {seed}: objective {value} vs {reference}"
        ));
    }
    for (p, grad) in grads.iter().enumerate() {
        for j in 0..grad.len() {
            let orig = model.params()[p].value.data()[j];
            model.params_mut()[p].value.data_mut()[j] = orig + H;
            let up = oracle_objective(&model, &ds, &idx, beta);
            model.params_mut()[p].value.data_mut()[j] = orig - H;
            let down = oracle_objective(&model, &ds, &idx, beta);
            model.params_mut()[p].value.data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * H);
            let g = grad.data()[j];
            if (fd - g).abs() / fd.abs().max(g.abs()).max(1.0) > 1e-5 {
                return Err(format!(
                    "{kind} {task:?} seed {seed}: {}[{j}] tape {g} vs fd {fd}",
                    model.params()[p].name
                ));
            }
        }
    }
    Ok(())
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0),
        "{what}: {a} vs {b} (tol {tol})"
    );
}
