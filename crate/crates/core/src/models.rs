//! The four architectures: a real-valued MLP on concatenated channels (RVNN),
//! a complex-valued MLP (CVNN), the Steinmetz network with separate real and
//! imaginary subnetworks feeding a shared head, and the analytic network,
//! which is a Steinmetz network trained with the Hilbert consistency penalty.
//!
//! Dense layers store weights as `[out, in]` and biases as `[1, out]`.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Rvnn,
    Cvnn,
    Steinmetz,
    Analytic,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 4] = [
        NetworkKind::Rvnn,
        NetworkKind::Cvnn,
        NetworkKind::Steinmetz,
        NetworkKind::Analytic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Rvnn => "rvnn",
            NetworkKind::Cvnn => "cvnn",
            NetworkKind::Steinmetz => "steinmetz",
            NetworkKind::Analytic => "analytic",
        }
    }

    /// Steinmetz and analytic networks share one forward pass.
    pub fn is_steinmetz_family(self) -> bool {
        matches!(self, NetworkKind::Steinmetz | NetworkKind::Analytic)
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NetworkKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("kind", format!("unknown architecture `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    ComplexRegression,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    /// Complex input length `dN`.
    pub input_dim: usize,
    /// Latent width `lN` of each of the real and imaginary latents.
    pub latent_dim: usize,
    /// Number of classes, or number of complex outputs for regression.
    pub output_dim: usize,
    pub task: Task,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim", "must be positive"));
        }
        if self.latent_dim == 0 || !self.latent_dim.is_multiple_of(2) {
            return Err(Error::invalid(
                "latent_dim",
                format!("must be positive and even, got {}", self.latent_dim),
            ));
        }
        if self.output_dim == 0 {
            return Err(Error::invalid("output_dim", "must be positive"));
        }
        Ok(())
    }

    /// Width of the prediction matrix: `k` logits or `2k` stacked `[re | im]` outputs.
    pub fn output_width(&self) -> usize {
        match self.task {
            Task::Classification => self.output_dim,
            Task::ComplexRegression => 2 * self.output_dim,
        }
    }

    /// Parameter names and shapes in declaration order, with the fan-in of weights.
    pub fn layout(&self) -> Vec<ParamSlot> {
        let (d, l, out) = (self.input_dim, self.latent_dim, self.output_width());
        let mut slots = Vec::new();
        let mut dense = |name: &str, fan_in: usize, fan_out: usize| {
            slots.push(ParamSlot::weight(format!("{name}.weight"), fan_out, fan_in));
            slots.push(ParamSlot::bias(format!("{name}.bias"), fan_out));
        };
        match self.kind {
            NetworkKind::Steinmetz | NetworkKind::Analytic => {
                dense("realfc1", d, l);
                dense("realfc2", l, l);
                dense("imagfc1", d, l);
                dense("imagfc2", l, l);
                dense("regressor", 2 * l, out);
            }
            NetworkKind::Rvnn => {
                dense("fc1", 2 * d, l);
                dense("fc2", l, 2 * l);
                dense("fc3", 2 * l, out);
            }
            NetworkKind::Cvnn => {
                for (name, fan_in, fan_out) in
                    [("fc1", d, l), ("fc2", l, l), ("fc3", l, self.output_dim)]
                {
                    slots.push(ParamSlot::weight(
                        format!("{name}.weight_re"),
                        fan_out,
                        fan_in,
                    ));
                    slots.push(ParamSlot::weight(
                        format!("{name}.weight_im"),
                        fan_out,
                        fan_in,
                    ));
                    slots.push(ParamSlot::bias(format!("{name}.bias_re"), fan_out));
                    slots.push(ParamSlot::bias(format!("{name}.bias_im"), fan_out));
                }
            }
        }
        slots
    }

    pub fn parameter_count(&self) -> usize {
        self.layout().iter().map(|s| s.rows * s.cols).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSlot {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// `Some(fan_in)` for weights, `None` for biases.
    pub fan_in: Option<usize>,
}

impl ParamSlot {
    fn weight(name: String, rows: usize, cols: usize) -> Self {
        Self {
            name,
            rows,
            cols,
            fan_in: Some(cols),
        }
    }

    fn bias(name: String, cols: usize) -> Self {
        Self {
            name,
            rows: 1,
            cols,
            fan_in: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    spec: NetworkSpec,
    params: Vec<Param>,
}

/// Weights uniform in `±1/√fan_in`, biases zero, drawn from the `"init"` substream of `seed`.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> Result<Model> {
    spec.validate()?;
    let mut rng = Rng::substream(seed, "init");
    let params = spec
        .layout()
        .into_iter()
        .map(|slot| {
            let n = slot.rows * slot.cols;
            let data = match slot.fan_in {
                Some(fan_in) => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    (0..n).map(|_| rng.uniform_range(-bound, bound)).collect()
                }
                None => vec![0.0; n],
            };
            Param {
                name: slot.name,
                value: Tensor::from_parts(vec![slot.rows, slot.cols], data),
            }
        })
        .collect();
    Ok(Model {
        spec: spec.clone(),
        params,
    })
}

impl Model {
    /// Assembles a model from explicit parameters, checking names and shapes against the layout.
    pub fn from_params(spec: NetworkSpec, params: Vec<Param>) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        if layout.len() != params.len() {
            return Err(Error::data(format!(
                "{} architecture has {} parameter tensors, got {}",
                spec.kind,
                layout.len(),
                params.len()
            )));
        }
        for (slot, p) in layout.iter().zip(&params) {
            if slot.name != p.name || p.value.shape() != [slot.rows, slot.cols] {
                return Err(Error::data(format!(
                    "parameter `{}` {:?} does not match expected `{}` [{}, {}]",
                    p.name,
                    p.value.shape(),
                    slot.name,
                    slot.rows,
                    slot.cols
                )));
            }
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.value)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params
            .iter_mut()
            .find(|p| p.name == name)
            .map(|p| &mut p.value)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Places every parameter on the tape, in layout order.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            vars: self
                .params
                .iter()
                .map(|p| tape.leaf(p.value.clone()))
                .collect(),
        }
    }

    /// Runs the architecture's forward pass on the tape.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &BoundParams,
        x_re: Var,
        x_im: Var,
    ) -> Result<Forward> {
        check_inputs(&self.spec, tape, x_re, x_im)?;
        match self.spec.kind {
            NetworkKind::Steinmetz | NetworkKind::Analytic => {
                let (pred, latent) = steinmetz_forward(self, tape, params, x_re, x_im)?;
                Ok(Forward {
                    pred,
                    latent_re: latent.z_re,
                    latent_im: latent.z_im,
                })
            }
            NetworkKind::Rvnn => {
                let (pred, latent) = rvnn_forward(self, tape, params, x_re, x_im)?;
                let (latent_re, latent_im) = tape.split(latent, self.spec.latent_dim)?;
                Ok(Forward {
                    pred,
                    latent_re,
                    latent_im,
                })
            }
            NetworkKind::Cvnn => cvnn_forward(self, tape, params, x_re, x_im),
        }
    }

    /// Forward pass on plain tensors, without gradients.
    pub fn infer(&self, x_re: &Tensor, x_im: &Tensor) -> Result<Inference> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape);
        let re = tape.leaf(x_re.clone());
        let im = tape.leaf(x_im.clone());
        let out = self.forward(&mut tape, &params, re, im)?;
        Ok(Inference {
            pred: tape.value(out.pred).clone(),
            latent_re: tape.value(out.latent_re).clone(),
            latent_im: tape.value(out.latent_im).clone(),
        })
    }
}

/// Tape handles for a model's parameters, in layout order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub vars: Vec<Var>,
}

impl BoundParams {
    fn dense(&self, index: usize) -> Dense {
        Dense {
            weight: self.vars[2 * index],
            bias: self.vars[2 * index + 1],
        }
    }

    fn complex(&self, index: usize) -> ComplexDense {
        let v = &self.vars[4 * index..4 * index + 4];
        ComplexDense {
            weight_re: v[0],
            weight_im: v[1],
            bias_re: v[2],
            bias_im: v[3],
        }
    }
}

/// Tape outputs of a forward pass.
///
/// For the RVNN the latents are the two halves of its joint `2lN` latent; for
/// the CVNN they are the real and imaginary parts of the `fc2` activation.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub pred: Var,
    pub latent_re: Var,
    pub latent_im: Var,
}

/// Mean-centered Steinmetz latents `z_re = g(x_re)`, `z_im = f(x_im)`.
#[derive(Clone, Copy, Debug)]
pub struct LatentPair {
    pub z_re: Var,
    pub z_im: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub pred: Tensor,
    pub latent_re: Tensor,
    pub latent_im: Tensor,
}

#[derive(Clone, Copy)]
pub struct Dense {
    pub weight: Var,
    pub bias: Var,
}

impl Dense {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let y = tape.matmul_nt(x, self.weight)?;
        tape.add_row(y, self.bias)
    }
}

#[derive(Clone, Copy)]
pub struct ComplexDense {
    pub weight_re: Var,
    pub weight_im: Var,
    pub bias_re: Var,
    pub bias_im: Var,
}

impl ComplexDense {
    /// `(W_R + iW_I)(x_re + i·x_im) + (b_R + i·b_I)` on real pairs.
    pub fn apply(&self, tape: &mut Tape, x_re: Var, x_im: Var) -> Result<(Var, Var)> {
        let rr = tape.matmul_nt(x_re, self.weight_re)?;
        let ii = tape.matmul_nt(x_im, self.weight_im)?;
        let y_re = tape.sub(rr, ii)?;
        let y_re = tape.add_row(y_re, self.bias_re)?;

        let ir = tape.matmul_nt(x_im, self.weight_re)?;
        let ri = tape.matmul_nt(x_re, self.weight_im)?;
        let y_im = tape.add(ir, ri)?;
        let y_im = tape.add_row(y_im, self.bias_im)?;
        Ok((y_re, y_im))
    }
}

/// Independent ReLU on the real and imaginary parts.
pub fn crelu(tape: &mut Tape, re: Var, im: Var) -> (Var, Var) {
    (tape.relu(re), tape.relu(im))
}

fn check_inputs(spec: &NetworkSpec, tape: &Tape, x_re: Var, x_im: Var) -> Result<()> {
    let (re, im) = (tape.value(x_re), tape.value(x_im));
    let (rows, cols) = re.expect_matrix("network input")?;
    if re.shape() != im.shape() {
        return Err(Error::shape(format!(
            "real input {:?} and imaginary input {:?} differ",
            re.shape(),
            im.shape()
        )));
    }
    if cols != spec.input_dim {
        return Err(Error::shape(format!(
            "input has {cols} columns but the network expects dN = {}",
            spec.input_dim
        )));
    }
    debug_assert!(rows > 0 || re.is_empty());
    Ok(())
}

fn require_kind(model: &Model, ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "{what} called on a {} model",
            model.spec.kind
        )))
    }
}

/// `ŷ = h([g(x_re) | f(x_im)])` with both latents mean-centered per sample.
pub fn steinmetz_forward(
    model: &Model,
    tape: &mut Tape,
    params: &BoundParams,
    x_re: Var,
    x_im: Var,
) -> Result<(Var, LatentPair)> {
    require_kind(
        model,
        model.spec.kind.is_steinmetz_family(),
        "steinmetz_forward",
    )?;
    check_inputs(&model.spec, tape, x_re, x_im)?;
    let branch = |tape: &mut Tape, x: Var, first: Dense, second: Dense| -> Result<Var> {
        let h = first.apply(tape, x)?;
        let h = tape.relu(h);
        let h = second.apply(tape, h)?;
        let h = tape.relu(h);
        tape.mean_center_rows(h)
    };
    let z_re = branch(tape, x_re, params.dense(0), params.dense(1))?;
    let z_im = branch(tape, x_im, params.dense(2), params.dense(3))?;
    let joint = tape.concat(z_re, z_im)?;
    let pred = params.dense(4).apply(tape, joint)?;
    Ok((pred, LatentPair { z_re, z_im }))
}

/// Joint processing of `[x_re | x_im]`; returns the prediction and the `2lN` latent.
pub fn rvnn_forward(
    model: &Model,
    tape: &mut Tape,
    params: &BoundParams,
    x_re: Var,
    x_im: Var,
) -> Result<(Var, Var)> {
    require_kind(model, model.spec.kind == NetworkKind::Rvnn, "rvnn_forward")?;
    check_inputs(&model.spec, tape, x_re, x_im)?;
    let x = tape.concat(x_re, x_im)?;
    let h = params.dense(0).apply(tape, x)?;
    let h = tape.relu(h);
    let latent = params.dense(1).apply(tape, h)?;
    let latent = tape.relu(latent);
    let pred = params.dense(2).apply(tape, latent)?;
    Ok((pred, latent))
}

/// Complex MLP with CReLU activations. Classification returns per-class
/// magnitudes of the `fc3` output; regression returns `[re | im]`.
pub fn cvnn_forward(
    model: &Model,
    tape: &mut Tape,
    params: &BoundParams,
    x_re: Var,
    x_im: Var,
) -> Result<Forward> {
    require_kind(model, model.spec.kind == NetworkKind::Cvnn, "cvnn_forward")?;
    check_inputs(&model.spec, tape, x_re, x_im)?;
    let (h_re, h_im) = params.complex(0).apply(tape, x_re, x_im)?;
    let (h_re, h_im) = crelu(tape, h_re, h_im);
    let (l_re, l_im) = params.complex(1).apply(tape, h_re, h_im)?;
    let (l_re, l_im) = crelu(tape, l_re, l_im);
    let (y_re, y_im) = params.complex(2).apply(tape, l_re, l_im)?;
    let pred = match model.spec.task {
        Task::Classification => tape.magnitude(y_re, y_im)?,
        Task::ComplexRegression => tape.concat(y_re, y_im)?,
    };
    Ok(Forward {
        pred,
        latent_re: l_re,
        latent_im: l_im,
    })
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"SNNCKPT1";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    spec: NetworkSpec,
    seed: u64,
    epoch: usize,
    params: Vec<ParamHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub seed: u64,
    pub epoch: usize,
}

/// Writes `SNNCKPT1`, a little-endian `u64` header length, the JSON header,
/// then every parameter as little-endian `f64` in layout order.
pub fn save_checkpoint(path: &Path, model: &Model, seed: u64, epoch: usize) -> Result<()> {
    let header = CheckpointHeader {
        spec: model.spec.clone(),
        seed,
        epoch,
        params: model
            .params
            .iter()
            .map(|p| ParamHeader {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|source| Error::Json {
        context: "checkpoint header".into(),
        source,
    })?;
    let mut bytes = Vec::with_capacity(16 + json.len() + 8 * model.parameter_count());
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for p in &model.params {
        for v in p.value.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::data(format!(
            "{} is not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(16..16 + header_len)
        .ok_or_else(|| Error::data("checkpoint header truncated"))?;
    let header: CheckpointHeader = serde_json::from_slice(body).map_err(|source| Error::Json {
        context: format!("checkpoint header of {}", path.display()),
        source,
    })?;
    let mut blob = &bytes[16 + header_len..];
    let mut params = Vec::with_capacity(header.params.len());
    for p in header.params {
        let n: usize = p.shape.iter().product();
        if blob.len() < 8 * n {
            return Err(Error::data(format!(
                "checkpoint blob for `{}` truncated",
                p.name
            )));
        }
        let data = blob[..8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        blob = &blob[8 * n..];
        let value = Tensor::new(p.shape, data)
            .map_err(|e| Error::data(format!("parameter `{}`: {e}", p.name)))?;
        params.push(Param {
            name: p.name,
            value,
        });
    }
    if !blob.is_empty() {
        return Err(Error::data(format!(
            "checkpoint has {} trailing bytes",
            blob.len()
        )));
    }
    Ok(Checkpoint {
        model: Model::from_params(header.spec, params)?,
        seed: header.seed,
        epoch: header.epoch,
    })
}
