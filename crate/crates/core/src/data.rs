//! Datasets: the CVDS on-disk format, DFT feature encoding, additive complex
//! normal noise, and the synthetic channel-identification generator.
//!
//! A CVDS dataset is a directory holding
//!
//! * `meta.json`: `M`, `dN`, `k`, `task`, `dtype` (`"f64"`), `endianness`
//!   (`"little"`), plus optional `provenance` and `domain` (`"complex"` or
//!   `"real"`);
//! * `features_re.bin` and `features_im.bin`: row-major `M×dN` little-endian
//!   `f64`. Real-domain datasets omit `features_im.bin`;
//! * `labels.bin`: class ids as little-endian `u32`, or for regression an
//!   `M×2k` little-endian `f64` matrix with rows `[re₀..re_{k−1}, im₀..im_{k−1}]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Task;
use crate::rng::Rng;
use crate::signal::{self, ComplexVector};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Complex,
    /// Raw real-valued signals, awaiting [`dft_encode`].
    Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "dN")]
    pub dn: usize,
    pub k: usize,
    pub task: Task,
    pub dtype: String,
    pub endianness: String,
    #[serde(default)]
    pub provenance: String,
    #[serde(default)]
    pub domain: Domain,
}

impl Meta {
    pub fn new(m: usize, dn: usize, k: usize, task: Task, provenance: impl Into<String>) -> Self {
        Self {
            m,
            dn,
            k,
            task,
            dtype: "f64".into(),
            endianness: "little".into(),
            provenance: provenance.into(),
            domain: Domain::Complex,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    Classes(Vec<u32>),
    /// `M×2k` stacked `[re | im]` targets.
    Complex(Tensor),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes(c) => c.len(),
            Labels::Complex(t) => t.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, indices: &[usize]) -> Self {
        match self {
            Labels::Classes(c) => Labels::Classes(indices.iter().map(|&i| c[i]).collect()),
            Labels::Complex(t) => Labels::Complex(t.select_rows(indices)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features_re: Tensor,
    pub features_im: Tensor,
    pub labels: Labels,
    pub meta: Meta,
}

impl Dataset {
    /// Builds a dataset and checks that all parts agree with `meta`.
    pub fn new(
        features_re: Tensor,
        features_im: Tensor,
        labels: Labels,
        meta: Meta,
    ) -> Result<Self> {
        let ds = Self {
            features_re,
            features_im,
            labels,
            meta,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let Meta { m, dn, k, task, .. } = self.meta;
        if m == 0 {
            return Err(Error::data(
                "dataset must hold at least one example (M ≥ 1)",
            ));
        }
        for (name, t) in [
            ("features_re", &self.features_re),
            ("features_im", &self.features_im),
        ] {
            if t.shape() != [m, dn] {
                return Err(Error::data(format!(
                    "{name} has shape {:?}, meta declares M={m}, dN={dn}",
                    t.shape()
                )));
            }
        }
        match (&self.labels, task) {
            (Labels::Classes(c), Task::Classification) => {
                if c.len() != m {
                    return Err(Error::data(format!("{} labels for M={m}", c.len())));
                }
                if let Some(bad) = c.iter().find(|&&l| l as usize >= k) {
                    return Err(Error::data(format!("label {bad} out of range for k={k}")));
                }
            }
            (Labels::Complex(t), Task::ComplexRegression) => {
                if t.shape() != [m, 2 * k] {
                    return Err(Error::data(format!(
                        "targets have shape {:?}, expected [{m}, {}]",
                        t.shape(),
                        2 * k
                    )));
                }
            }
            _ => {
                return Err(Error::data(format!(
                    "label kind does not match task {task:?}"
                )))
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.meta.m
    }

    pub fn is_empty(&self) -> bool {
        self.meta.m == 0
    }

    pub fn task(&self) -> Task {
        self.meta.task
    }

    /// The listed examples, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::data(format!(
                "example index {bad} out of range for M={}",
                self.len()
            )));
        }
        let mut meta = self.meta.clone();
        meta.m = indices.len();
        Dataset::new(
            self.features_re.select_rows(indices),
            self.features_im.select_rows(indices),
            self.labels.select(indices),
            meta,
        )
    }

    pub fn class_ids(&self) -> Option<Vec<usize>> {
        match &self.labels {
            Labels::Classes(c) => Some(c.iter().map(|&l| l as usize).collect()),
            Labels::Complex(_) => None,
        }
    }
}

fn read_blob(dir: &Path, name: &str, expected_rows: usize, row_bytes: usize) -> Result<Vec<u8>> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::data(format!("missing file {}", path.display())),
        _ => Error::io(&path, e),
    })?;
    let expected = expected_rows * row_bytes;
    if bytes.len() != expected {
        if row_bytes > 0 && bytes.len() % row_bytes == 0 {
            return Err(Error::data(format!(
                "header mismatch in {name}: meta.json declares M={expected_rows} but the blob holds {} rows",
                bytes.len() / row_bytes
            )));
        }
        return Err(Error::data(format!(
            "length mismatch in {name}: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    Ok(bytes)
}

fn decode_f64(field: &str, bytes: &[u8], shape: Vec<usize>) -> Result<Tensor> {
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Tensor::new(shape, data).map_err(|e| Error::data(format!("{field}: {e}")))
}

fn encode_f64(t: &Tensor) -> Vec<u8> {
    t.data().iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Reads a CVDS directory. Real-domain datasets get an all-zero imaginary part.
pub fn load_cvds(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join("meta.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::data(format!("missing file {}", meta_path.display()))
        }
        _ => Error::io(&meta_path, e),
    })?;
    let meta: Meta = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("meta.json in {}: {e}", dir.display())))?;
    if meta.dtype != "f64" {
        return Err(Error::data(format!(
            "meta.json dtype `{}` unsupported, expected f64",
            meta.dtype
        )));
    }
    if meta.endianness != "little" {
        return Err(Error::data(format!(
            "meta.json endianness `{}` unsupported, expected little",
            meta.endianness
        )));
    }
    let (m, dn, k) = (meta.m, meta.dn, meta.k);
    let re = read_blob(dir, "features_re.bin", m, dn * 8)?;
    let features_re = decode_f64("features_re", &re, vec![m, dn])?;
    let features_im = match meta.domain {
        Domain::Complex => {
            let im = read_blob(dir, "features_im.bin", m, dn * 8)?;
            decode_f64("features_im", &im, vec![m, dn])?
        }
        Domain::Real => Tensor::zeros(m, dn),
    };
    let labels = match meta.task {
        Task::Classification => {
            let bytes = read_blob(dir, "labels.bin", m, 4)?;
            Labels::Classes(
                bytes
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                    .collect(),
            )
        }
        Task::ComplexRegression => {
            let bytes = read_blob(dir, "labels.bin", m, 2 * k * 8)?;
            Labels::Complex(decode_f64("labels", &bytes, vec![m, 2 * k])?)
        }
    };
    Dataset::new(features_re, features_im, labels, meta)
}

pub fn save_cvds(ds: &Dataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    };
    let meta = serde_json::to_string_pretty(&ds.meta).map_err(|source| Error::Json {
        context: "meta.json".into(),
        source,
    })?;
    write("meta.json", meta.as_bytes())?;
    write("features_re.bin", &encode_f64(&ds.features_re))?;
    if ds.meta.domain == Domain::Complex {
        write("features_im.bin", &encode_f64(&ds.features_im))?;
    }
    let labels = match &ds.labels {
        Labels::Classes(c) => c.iter().flat_map(|l| l.to_le_bytes()).collect(),
        Labels::Complex(t) => encode_f64(t),
    };
    write("labels.bin", &labels)
}

/// Replaces every real feature row by its `dN`-point DFT.
pub fn dft_encode(ds: &Dataset) -> Result<Dataset> {
    if ds.features_im.max_abs() != 0.0 {
        return Err(Error::data(
            "dft_encode expects real-valued rows (non-zero imaginary features found)",
        ));
    }
    let (m, dn) = (ds.meta.m, ds.meta.dn);
    let mut re = Vec::with_capacity(m * dn);
    let mut im = Vec::with_capacity(m * dn);
    for row in ds.features_re.row_iter().take(m) {
        let spectrum = signal::dft(&ComplexVector::from_real(row)?);
        re.extend(spectrum.re);
        im.extend(spectrum.im);
    }
    let mut meta = ds.meta.clone();
    meta.domain = Domain::Complex;
    meta.provenance = format!("dft({})", ds.meta.provenance);
    Dataset::new(
        Tensor::matrix(m, dn, re)?,
        Tensor::matrix(m, dn, im)?,
        ds.labels.clone(),
        meta,
    )
}

/// Draws `n` standard complex normal samples: real and imaginary parts independent `N(0, 1/2)`.
pub fn complex_normal(rng: &mut Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n).map(|_| (s * rng.normal(), s * rng.normal())).unzip()
}

/// `x' = x + η·w` with `w ~ CN(0, I)`, drawn from the `"noise"` substream of `seed`.
pub fn add_complex_noise(ds: &Dataset, eta: f64, seed: u64) -> Result<Dataset> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::invalid(
            "eta",
            "noise scale must be non-negative and finite",
        ));
    }
    if eta == 0.0 {
        return Ok(ds.clone());
    }
    let mut rng = Rng::substream(seed, "noise");
    let (w_re, w_im) = complex_normal(&mut rng, ds.features_re.len());
    let mut re = ds.features_re.clone();
    let mut im = ds.features_im.clone();
    for (x, w) in re.data_mut().iter_mut().zip(&w_re) {
        *x += eta * w;
    }
    for (x, w) in im.data_mut().iter_mut().zip(&w_im) {
        *x += eta * w;
    }
    let mut meta = ds.meta.clone();
    meta.provenance = format!("{} + {eta}·CN(0,I) [seed {seed}]", ds.meta.provenance);
    Dataset::new(re, im, ds.labels.clone(), meta)
}

/// Parameters of the synthetic nonlinear channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Circularity: the input is `√(1−ρ²)·x̄ + iρ·x̃`.
    pub rho: f64,
    /// Complex FIR taps `(re, im)`, newest sample first.
    pub taps: Vec<(f64, f64)>,
    /// Coefficient `c` of the memoryless nonlinearity `y = t + c·t²`.
    pub nl_coeff: (f64, f64),
    pub snr_db: f64,
    /// Length of the input window, `dN`.
    pub seq_len: usize,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            rho: std::f64::consts::FRAC_1_SQRT_2,
            taps: vec![
                (0.432, 0.297),
                (0.349, -0.074),
                (0.202, 0.166),
                (0.112, 0.094),
                (0.051, 0.036),
            ],
            nl_coeff: (0.15, 0.10),
            snr_db: 5.0,
            seq_len: 5,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid("rho", "must lie in [0, 1]"));
        }
        if self.taps.is_empty() || self.taps.iter().all(|&(r, i)| r == 0.0 && i == 0.0) {
            return Err(Error::invalid("taps", "need at least one non-zero tap"));
        }
        if self.seq_len == 0 {
            return Err(Error::invalid("seq_len", "must be positive"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::invalid("snr_db", "must be finite"));
        }
        Ok(())
    }
}

/// Channel-identification dataset of `m` windows.
///
/// A complex input stream `s[n] = √(1−ρ²)·x̄[n] + iρ·x̃[n]` is filtered by
/// the FIR taps, passed through `y = t + c·t²`, and corrupted by circular
/// complex Gaussian noise. Each example is the window
/// `[s[n], s[n−1], …, s[n−dN+1]]` with the noisy `y[n]` as its target. The
/// noise realization is rescaled so that the empirical signal-to-noise ratio
/// of the generated set equals `snr_db` exactly.
pub fn gen_channel_dataset(spec: &ChannelSpec, m: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let dn = spec.seq_len;
    let history = dn.max(spec.taps.len()) - 1;
    let len = m + history;
    let mut rng = Rng::substream(seed, "channel");
    let real_scale = (1.0 - spec.rho * spec.rho).sqrt();
    let (stream_re, stream_im): (Vec<f64>, Vec<f64>) = (0..len)
        .map(|_| (real_scale * rng.normal(), spec.rho * rng.normal()))
        .unzip();

    let mut feat_re = Vec::with_capacity(m * dn);
    let mut feat_im = Vec::with_capacity(m * dn);
    let mut clean = Vec::with_capacity(m);
    for n in history..len {
        for j in 0..dn {
            feat_re.push(stream_re[n - j]);
            feat_im.push(stream_im[n - j]);
        }
        let (mut t_re, mut t_im) = (0.0, 0.0);
        for (j, &(h_re, h_im)) in spec.taps.iter().enumerate() {
            let (s_re, s_im) = (stream_re[n - j], stream_im[n - j]);
            t_re += h_re * s_re - h_im * s_im;
            t_im += h_re * s_im + h_im * s_re;
        }
        let (sq_re, sq_im) = (t_re * t_re - t_im * t_im, 2.0 * t_re * t_im);
        let (c_re, c_im) = spec.nl_coeff;
        clean.push((
            t_re + c_re * sq_re - c_im * sq_im,
            t_im + c_re * sq_im + c_im * sq_re,
        ));
    }

    let signal_power = clean.iter().map(|(r, i)| r * r + i * i).sum::<f64>() / m as f64;
    let (w_re, w_im) = complex_normal(&mut rng, m);
    let raw_power = w_re
        .iter()
        .zip(&w_im)
        .map(|(r, i)| r * r + i * i)
        .sum::<f64>()
        / m as f64;
    let target_power = signal_power / 10f64.powf(spec.snr_db / 10.0);
    let noise_scale = if raw_power > 0.0 {
        (target_power / raw_power).sqrt()
    } else {
        0.0
    };
    let mut targets = Vec::with_capacity(2 * m);
    targets.extend(clean.iter().zip(&w_re).map(|(c, w)| c.0 + noise_scale * w));
    let imag: Vec<f64> = clean
        .iter()
        .zip(&w_im)
        .map(|(c, w)| c.1 + noise_scale * w)
        .collect();
    // rows are [re | im]; with k = 1 that is an interleave
    let targets: Vec<f64> = targets
        .into_iter()
        .zip(imag)
        .flat_map(|(r, i)| [r, i])
        .collect();

    let meta = Meta::new(
        m,
        dn,
        1,
        Task::ComplexRegression,
        format!(
            "channel(rho={}, snr_db={}, seed={seed})",
            spec.rho, spec.snr_db
        ),
    );
    Dataset::new(
        Tensor::matrix(m, dn, feat_re)?,
        Tensor::matrix(m, dn, feat_im)?,
        Labels::Complex(Tensor::matrix(m, 2, targets)?),
        meta,
    )
}

/// Empirical SNR in dB of noisy targets against the noise-free channel output.
pub fn measured_snr_db(clean: &[(f64, f64)], noisy: &[(f64, f64)]) -> f64 {
    let signal: f64 = clean.iter().map(|(r, i)| r * r + i * i).sum();
    let noise: f64 = clean
        .iter()
        .zip(noisy)
        .map(|(c, y)| (y.0 - c.0).powi(2) + (y.1 - c.1).powi(2))
        .sum();
    10.0 * (signal / noise).log10()
}

/// Noise-free channel output for each window of a channel dataset.
pub fn channel_clean_output(spec: &ChannelSpec, ds: &Dataset) -> Vec<(f64, f64)> {
    (0..ds.len())
        .map(|row| {
            let (re, im) = (ds.features_re.row(row), ds.features_im.row(row));
            let (mut t_re, mut t_im) = (0.0, 0.0);
            for (j, &(h_re, h_im)) in spec.taps.iter().enumerate().take(re.len()) {
                t_re += h_re * re[j] - h_im * im[j];
                t_im += h_re * im[j] + h_im * re[j];
            }
            let (sq_re, sq_im) = (t_re * t_re - t_im * t_im, 2.0 * t_re * t_im);
            let (c_re, c_im) = spec.nl_coeff;
            (
                t_re + c_re * sq_re - c_im * sq_im,
                t_im + c_re * sq_im + c_im * sq_re,
            )
        })
        .collect()
}
