//! Training, evaluation, run reports and the experiment recipes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::data::{self, ChannelSpec, Dataset, Domain, Labels};
use crate::diagnostics::{self, MagPhaseError};
use crate::error::{Error, Result};
use crate::losses;
use crate::models::{self, Model, NetworkKind, NetworkSpec, Task};
use crate::optim::{Adam, TrainConfig};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: NetworkKind,
    pub latent_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Scale of complex normal noise added to the training features.
    #[serde(default)]
    pub noise_eta: f64,
    /// Also corrupt the test features with the same noise scale.
    #[serde(default)]
    pub noise_test: bool,
}

/// Everything needed to reproduce a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub optim: TrainConfig,
    pub data: DataConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.optim.validate()?;
        if self.model.latent_dim == 0 || !self.model.latent_dim.is_multiple_of(2) {
            return Err(Error::invalid(
                "model.latent_dim",
                "must be positive and even",
            ));
        }
        if !(self.data.noise_eta >= 0.0 && self.data.noise_eta.is_finite()) {
            return Err(Error::invalid("data.noise_eta", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean Hilbert penalty over the epoch; analytic networks only.
    pub penalty_value: Option<f64>,
    /// Test accuracy (%) for classification, test MSE for regression.
    pub test_metric: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub epochs: Vec<EpochRecord>,
}

/// Network spec for a dataset: `dN`, `k` and the task come from its metadata.
pub fn spec_for(kind: NetworkKind, latent_dim: usize, ds: &Dataset) -> NetworkSpec {
    NetworkSpec {
        kind,
        input_dim: ds.meta.dn,
        latent_dim,
        output_dim: ds.meta.k,
        task: ds.meta.task,
    }
}

fn check_compatible(spec: &NetworkSpec, ds: &Dataset, which: &str) -> Result<()> {
    if spec.input_dim != ds.meta.dn || spec.output_dim != ds.meta.k || spec.task != ds.meta.task {
        return Err(Error::data(format!(
            "{which} dataset (dN={}, k={}, task={:?}) does not match network (dN={}, k={}, task={:?})",
            ds.meta.dn, ds.meta.k, ds.meta.task, spec.input_dim, spec.output_dim, spec.task
        )));
    }
    Ok(())
}

struct BatchLoss {
    total: Var,
    penalty: Option<f64>,
}

fn batch_loss(
    model: &Model,
    tape: &mut Tape,
    params: &models::BoundParams,
    ds: &Dataset,
    idx: &[usize],
    beta: f64,
) -> Result<BatchLoss> {
    let x_re = tape.leaf(ds.features_re.select_rows(idx));
    let x_im = tape.leaf(ds.features_im.select_rows(idx));
    let out = model.forward(tape, params, x_re, x_im)?;
    let task = match &ds.labels {
        Labels::Classes(c) => {
            let labels: Vec<usize> = idx.iter().map(|&i| c[i] as usize).collect();
            losses::cross_entropy(tape, out.pred, &labels)?
        }
        Labels::Complex(t) => {
            let target = tape.leaf(t.select_rows(idx));
            losses::mse(tape, out.pred, target)?
        }
    };
    if model.spec().kind == NetworkKind::Analytic {
        let penalty = losses::hilbert_penalty(tape, out.latent_re, out.latent_im)?;
        let penalty_value = tape.value(penalty).item()?;
        let total = losses::total_loss(tape, task, penalty, beta)?;
        Ok(BatchLoss {
            total,
            penalty: Some(penalty_value),
        })
    } else {
        Ok(BatchLoss {
            total: task,
            penalty: None,
        })
    }
}

/// Objective value and parameter gradients on the listed examples.
pub fn loss_and_gradients(
    model: &Model,
    ds: &Dataset,
    idx: &[usize],
    beta: f64,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let params = model.bind(&mut tape);
    let loss = batch_loss(model, &mut tape, &params, ds, idx, beta)?;
    let grads = tape.backward(loss.total)?;
    let value = tape.value(loss.total).item()?;
    Ok((
        value,
        params
            .vars
            .iter()
            .zip(model.params())
            .map(|(&v, p)| grads.get_or_zeros(v, &p.value))
            .collect(),
    ))
}

/// Trains `spec` on `train` with Adam; data is reshuffled every epoch from the
/// `"shuffle"` substream of the seed.
pub fn train(
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    train: &Dataset,
    test: Option<&Dataset>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_compatible(spec, train, "training")?;
    if let Some(t) = test {
        check_compatible(spec, t, "test")?;
    }
    let mut model = models::init_params(spec, cfg.seed)?;
    let mut adam = Adam::new(cfg, model.params());
    let mut shuffle = Rng::substream(cfg.seed, "shuffle");
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let order = shuffle.permutation(train.len());
        let (mut loss_sum, mut penalty_sum) = (0.0, 0.0);
        let mut has_penalty = false;
        for batch in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let params = model.bind(&mut tape);
            let loss = batch_loss(&model, &mut tape, &params, train, batch, cfg.beta)?;
            let grads = tape.backward(loss.total)?;
            let grads: Vec<Tensor> = params
                .vars
                .iter()
                .zip(model.params())
                .map(|(&v, p)| grads.get_or_zeros(v, &p.value))
                .collect();
            adam.step(model.params_mut(), &grads)?;

            let weight = batch.len() as f64;
            loss_sum += weight * tape.value(loss.total).item()?;
            if let Some(p) = loss.penalty {
                has_penalty = true;
                penalty_sum += weight * p;
            }
        }
        let n = train.len() as f64;
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            penalty_value: has_penalty.then(|| penalty_sum / n),
            test_metric: test.map(|t| task_metric(&model, t)).transpose()?,
        });
    }
    Ok(TrainOutcome {
        model,
        epochs: records,
    })
}

/// Accuracy (%) for classification, MSE over `[re | im]` outputs for regression.
pub fn task_metric(model: &Model, ds: &Dataset) -> Result<f64> {
    let out = model.infer(&ds.features_re, &ds.features_im)?;
    match &ds.labels {
        Labels::Classes(_) => diagnostics::accuracy(&out.pred, &ds.class_ids().expect("classes")),
        Labels::Complex(t) => Ok(mean_squared_error(&out.pred, t)),
    }
}

fn mean_squared_error(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.len().max(1) as f64
}

/// Task metric plus latent diagnostics of a model on a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mag_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degenerate_phases: Option<usize>,
    pub orthogonality: f64,
    #[serde(rename = "norm_J")]
    pub norm_j: f64,
    #[serde(rename = "norm_S")]
    pub norm_s: f64,
    /// Hilbert penalty of the latents (Steinmetz family only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hilbert_penalty: Option<f64>,
}

pub fn evaluate(model: &Model, ds: &Dataset) -> Result<EvalReport> {
    check_compatible(model.spec(), ds, "evaluation")?;
    let out = model.infer(&ds.features_re, &ds.features_im)?;
    let ortho = diagnostics::latent_orthogonality(&out.latent_re, &out.latent_im)?;
    let (norm_j, norm_s) = if ds.len() >= 2 {
        let c = diagnostics::covariance_comparison(&out.latent_re, &out.latent_im, 2.0, 2.0)?;
        (c.norm_j, c.norm_s)
    } else {
        (0.0, 0.0)
    };
    let hilbert_penalty = if model.spec().kind.is_steinmetz_family() {
        Some(losses::hilbert_penalty_value(
            &out.latent_re,
            &out.latent_im,
        )?)
    } else {
        None
    };
    let mut report = EvalReport {
        accuracy: None,
        mse: None,
        mag_mse: None,
        phase_mse: None,
        degenerate_phases: None,
        orthogonality: ortho.mean_abs_cosine,
        norm_j,
        norm_s,
        hilbert_penalty,
    };
    match &ds.labels {
        Labels::Classes(_) => {
            report.accuracy = Some(diagnostics::accuracy(
                &out.pred,
                &ds.class_ids().expect("classes"),
            )?);
        }
        Labels::Complex(t) => {
            let MagPhaseError {
                mag_mse,
                phase_mse,
                degenerate_phases,
            } = diagnostics::mag_phase_mse(&out.pred, t)?;
            report.mse = Some(mean_squared_error(&out.pred, t));
            report.mag_mse = Some(mag_mse);
            report.phase_mse = Some(phase_mse);
            report.degenerate_phases = Some(degenerate_phases);
        }
    }
    Ok(report)
}

/// Loads a CVDS dataset, DFT-encoding it first when it holds raw real signals.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let ds = data::load_cvds(path)?;
    if ds.meta.domain == Domain::Real {
        data::dft_encode(&ds)
    } else {
        Ok(ds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEcho {
    pub train: String,
    pub test: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub network: NetworkSpec,
    pub parameter_count: usize,
    pub datasets: DatasetEcho,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub final_metrics: Option<EvalReport>,
    pub wall_clock_seconds: f64,
}

/// Runs a training config end to end and writes `report.json` and `model.ckpt` into `out_dir`.
pub fn run_training(config: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let mut train_ds = load_dataset(&config.data.train)?;
    let mut test_ds = config.data.test.as_deref().map(load_dataset).transpose()?;
    let eta = config.data.noise_eta;
    if eta > 0.0 {
        train_ds = data::add_complex_noise(&train_ds, eta, config.optim.seed)?;
        if config.data.noise_test {
            let test_seed = config.optim.seed ^ 0x7E57;
            test_ds = test_ds
                .map(|t| data::add_complex_noise(&t, eta, test_seed))
                .transpose()?;
        }
    }
    let spec = spec_for(config.model.kind, config.model.latent_dim, &train_ds);
    spec.validate()?;
    let outcome = train(&spec, &config.optim, &train_ds, test_ds.as_ref())?;
    let final_metrics = test_ds
        .as_ref()
        .map(|t| evaluate(&outcome.model, t))
        .transpose()?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    models::save_checkpoint(
        &out_dir.join("model.ckpt"),
        &outcome.model,
        config.optim.seed,
        config.optim.epochs,
    )?;
    let report = RunReport {
        config: config.clone(),
        network: spec,
        parameter_count: outcome.model.parameter_count(),
        datasets: DatasetEcho {
            train: train_ds.meta.provenance.clone(),
            test: test_ds.as_ref().map(|t| t.meta.provenance.clone()),
        },
        seed: config.optim.seed,
        epochs: outcome.epochs,
        final_metrics,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join("report.json"), &report)?;
    Ok(report)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// The reproducible experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recipe {
    #[serde(rename = "cvmnist500")]
    CvMnist500,
    #[serde(rename = "noise-sweep")]
    NoiseSweep,
    #[serde(rename = "channel-id")]
    ChannelId,
}

impl Recipe {
    pub fn name(self) -> &'static str {
        match self {
            Recipe::CvMnist500 => "cvmnist500",
            Recipe::NoiseSweep => "noise-sweep",
            Recipe::ChannelId => "channel-id",
        }
    }

    /// Default options: hyperparameters follow the published per-dataset table;
    /// epoch budgets are chosen for single-core runtimes.
    pub fn defaults(self) -> ExperimentOptions {
        match self {
            Recipe::CvMnist500 => ExperimentOptions {
                seed: 0,
                seeds: 5,
                latent_dim: 64,
                epochs: 100,
                batch_size: 32,
                learning_rate: 1e-3,
                beta: 1e-3,
                train_size: 500,
                test_size: 1000,
                etas: vec![0.0],
                data: Some(PathBuf::from("data/mnist5k")),
            },
            Recipe::NoiseSweep => ExperimentOptions {
                seed: 0,
                seeds: 1,
                latent_dim: 64,
                epochs: 30,
                batch_size: 32,
                learning_rate: 1e-3,
                beta: 1e-3,
                train_size: 2000,
                test_size: 1000,
                etas: vec![0.0, 0.5, 1.0, 1.5, 2.0],
                data: Some(PathBuf::from("data/mnist5k")),
            },
            Recipe::ChannelId => ExperimentOptions {
                seed: 0,
                seeds: 5,
                latent_dim: 64,
                epochs: 100,
                batch_size: 32,
                learning_rate: 1e-4,
                beta: 1e-4,
                train_size: 1000,
                test_size: 1000,
                etas: vec![0.0],
                data: None,
            },
        }
    }
}

impl std::str::FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cvmnist500" => Ok(Recipe::CvMnist500),
            "noise-sweep" => Ok(Recipe::NoiseSweep),
            "channel-id" => Ok(Recipe::ChannelId),
            other => Err(Error::invalid(
                "recipe",
                format!("unknown recipe `{other}` (expected cvmnist500, noise-sweep, channel-id)"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Base seed; run `i` uses `seed + i`. The data split uses the base seed.
    pub seed: u64,
    pub seeds: usize,
    pub latent_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta: f64,
    pub train_size: usize,
    pub test_size: usize,
    /// Noise scales; only the noise sweep uses more than one.
    pub etas: Vec<f64>,
    /// CVDS directory of raw real images (not used by `channel-id`).
    pub data: Option<PathBuf>,
}

impl ExperimentOptions {
    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            beta: self.beta,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::invalid("seeds", "need at least one seed"));
        }
        if self.train_size == 0 || self.test_size == 0 {
            return Err(Error::invalid(
                "train_size",
                "train and test sizes must be positive",
            ));
        }
        if self.etas.is_empty() {
            return Err(Error::invalid("etas", "need at least one noise scale"));
        }
        self.train_config(self.seed).validate()
    }
}

/// Metrics of one trained network in an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub kind: NetworkKind,
    pub seed: u64,
    pub eta: f64,
    pub metrics: EvalReport,
    pub final_train_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl Cell {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std, values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub recipe: Recipe,
    pub options: ExperimentOptions,
    pub columns: Vec<NetworkKind>,
    pub rows: Vec<TableRow>,
    pub runs: Vec<RunResult>,
}

impl ResultTable {
    pub fn row(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn cell(&self, label: &str, kind: NetworkKind) -> Option<&Cell> {
        let col = self.columns.iter().position(|&k| k == kind)?;
        self.row(label).map(|r| &r.cells[col])
    }

    /// Plain-text table: one row per metric, one column per architecture, `mean ± std`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<28}", self.recipe.name());
        for k in &self.columns {
            let _ = write!(out, " | {:>22}", k.name().to_uppercase());
        }
        out.push('\n');
        out.push_str(&"-".repeat(28 + 25 * self.columns.len()));
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<28}", row.label);
            for c in &row.cells {
                let _ = write!(out, " | {:>22}", format!("{:.4} ± {:.4}", c.mean, c.std));
            }
            out.push('\n');
        }
        out
    }
}

fn run_jobs<T: Send, R: Send>(jobs: Vec<T>, f: impl Fn(T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    if threads <= 1 || jobs.len() <= 1 {
        return jobs.into_iter().map(&f).collect();
    }
    let f = &f;
    let mut slots: Vec<Option<Result<R>>> = (0..jobs.len()).map(|_| None).collect();
    let mut pending: Vec<(usize, T)> = jobs.into_iter().enumerate().collect();
    while !pending.is_empty() {
        let wave: Vec<(usize, T)> = pending.drain(..threads.min(pending.len())).collect();
        let results: Vec<(usize, Result<R>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .into_iter()
                .map(|(i, job)| scope.spawn(move || (i, f(job))))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("experiment worker panicked"))
                .collect()
        });
        for (i, r) in results {
            slots[i] = Some(r);
        }
    }
    slots
        .into_iter()
        .map(|s| s.expect("every job ran"))
        .collect()
}

/// Splits the image set into disjoint train/test subsets with the `"split"` substream.
fn image_split(opts: &ExperimentOptions) -> Result<(Dataset, Dataset)> {
    let path = opts
        .data
        .as_ref()
        .ok_or_else(|| Error::data("this recipe needs an image dataset; pass --data <CVDS dir>"))?;
    if !path.join("meta.json").exists() {
        return Err(Error::data(format!(
            "expected a CVDS dataset at {} (meta.json, features_re.bin, labels.bin); \
             see scripts/mnist_to_cvds.py",
            path.display()
        )));
    }
    let all = load_dataset(path)?;
    if all.task() != Task::Classification {
        return Err(Error::data(format!(
            "{} is not a classification dataset",
            path.display()
        )));
    }
    let need = opts.train_size + opts.test_size;
    if all.len() < need {
        return Err(Error::data(format!(
            "{} holds {} examples, the recipe needs {need}",
            path.display(),
            all.len()
        )));
    }
    let order = Rng::substream(opts.seed, "split").permutation(all.len());
    let train = all.select(&order[..opts.train_size])?;
    let test = all.select(&order[opts.train_size..need])?;
    Ok((train, test))
}

fn channel_split(opts: &ExperimentOptions) -> Result<(Dataset, Dataset)> {
    let spec = ChannelSpec::default();
    let train = data::gen_channel_dataset(&spec, opts.train_size, splitmix_label(opts.seed, 1))?;
    let test = data::gen_channel_dataset(&spec, opts.test_size, splitmix_label(opts.seed, 2))?;
    Ok((train, test))
}

fn splitmix_label(seed: u64, label: u64) -> u64 {
    crate::rng::splitmix64(seed.wrapping_mul(31).wrapping_add(label))
}

/// Runs a recipe: every architecture, every seed (and every η for the noise sweep).
pub fn run_experiment(recipe: Recipe, opts: &ExperimentOptions) -> Result<ResultTable> {
    opts.validate()?;
    let (train_ds, test_ds) = match recipe {
        Recipe::CvMnist500 | Recipe::NoiseSweep => image_split(opts)?,
        Recipe::ChannelId => channel_split(opts)?,
    };
    let etas: Vec<f64> = match recipe {
        Recipe::NoiseSweep => opts.etas.clone(),
        _ => vec![0.0],
    };
    let noisy_sets = etas
        .iter()
        .map(|&eta| data::add_complex_noise(&train_ds, eta, opts.seed))
        .collect::<Result<Vec<_>>>()?;

    let mut jobs = Vec::new();
    for (e, &eta) in etas.iter().enumerate() {
        for i in 0..opts.seeds {
            for kind in NetworkKind::ALL {
                jobs.push((e, eta, opts.seed + i as u64, kind));
            }
        }
    }
    let runs = run_jobs(jobs, |(e, eta, seed, kind)| {
        let train_set = &noisy_sets[e];
        let spec = spec_for(kind, opts.latent_dim, train_set);
        let outcome = train(&spec, &opts.train_config(seed), train_set, None)?;
        Ok(RunResult {
            kind,
            seed,
            eta,
            metrics: evaluate(&outcome.model, &test_ds)?,
            final_train_loss: outcome.epochs.last().map(|r| r.train_loss),
        })
    })?;

    let columns = NetworkKind::ALL.to_vec();
    let mut rows = Vec::new();
    let mut add_row = |label: String, eta: f64, metric: &dyn Fn(&EvalReport) -> Option<f64>| {
        let cells: Option<Vec<Cell>> = columns
            .iter()
            .map(|&kind| {
                let values: Option<Vec<f64>> = runs
                    .iter()
                    .filter(|r| r.kind == kind && r.eta == eta)
                    .map(|r| metric(&r.metrics))
                    .collect();
                values.map(Cell::from_values)
            })
            .collect();
        if let Some(cells) = cells {
            rows.push(TableRow { label, cells });
        }
    };
    match recipe {
        Recipe::CvMnist500 => {
            add_row("test accuracy (%)".into(), 0.0, &|m| m.accuracy);
            add_row("latent orthogonality".into(), 0.0, &|m| {
                Some(m.orthogonality)
            });
        }
        Recipe::NoiseSweep => {
            for &eta in &etas {
                add_row(format!("accuracy (%) eta={eta}"), eta, &|m| m.accuracy);
            }
        }
        Recipe::ChannelId => {
            add_row("magnitude MSE".into(), 0.0, &|m| m.mag_mse);
            add_row("phase MSE".into(), 0.0, &|m| m.phase_mse);
            add_row("latent orthogonality".into(), 0.0, &|m| {
                Some(m.orthogonality)
            });
        }
    }
    Ok(ResultTable {
        recipe,
        options: opts.clone(),
        columns,
        rows,
        runs,
    })
}
