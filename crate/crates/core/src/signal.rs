//! Discrete Fourier and Hilbert transforms.
//!
//! The Hilbert transform used for training is the spectral one: take the DFT,
//! rotate positive-frequency bins by −90° and negative-frequency bins by +90°,
//! leave the DC and Nyquist bins untouched, and invert. [`dht_cotangent`]
//! computes the same map in the time domain with a cotangent kernel. The two
//! agree exactly on signals with no DC or Nyquist content, and the cotangent
//! form annihilates those two bins.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Tolerance for the imaginary residue left by the inverse transform of a
/// Hermitian spectrum, relative to the signal scale.
const IMAG_RESIDUE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::shape(format!(
                "real part has {} entries, imaginary part {}",
                re.len(),
                im.len()
            )));
        }
        if re.is_empty() {
            return Err(Error::contract("complex vector must have length ≥ 1"));
        }
        if re.iter().chain(&im).any(|v| !v.is_finite()) {
            return Err(Error::data("complex vector has non-finite entries"));
        }
        Ok(Self { re, im })
    }

    pub fn from_real(re: &[f64]) -> Result<Self> {
        Self::new(re.to_vec(), vec![0.0; re.len()])
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re.iter().chain(&self.im).map(|v| v * v).sum()
    }
}

/// Forward DFT, `X[b] = Σₙ x[n]·e^{−i2πbn/N}`.
///
/// Power-of-two lengths go through the radix-2 FFT, all others through
/// [`dft_direct`].
pub fn dft(x: &ComplexVector) -> ComplexVector {
    transform(x, Direction::Forward)
}

/// Inverse DFT with the `1/N` normalization.
pub fn idft(x: &ComplexVector) -> ComplexVector {
    transform(x, Direction::Inverse)
}

/// Forward DFT by direct O(n²) summation, for any length.
pub fn dft_direct(x: &ComplexVector) -> ComplexVector {
    direct(x, Direction::Forward)
}

/// Inverse DFT by direct summation.
pub fn idft_direct(x: &ComplexVector) -> ComplexVector {
    direct(x, Direction::Inverse)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

fn transform(x: &ComplexVector, dir: Direction) -> ComplexVector {
    let n = x.len();
    if n.is_power_of_two() {
        let mut out = x.clone();
        fft_in_place(&mut out.re, &mut out.im, dir);
        if dir == Direction::Inverse {
            let scale = 1.0 / n as f64;
            out.re
                .iter_mut()
                .chain(out.im.iter_mut())
                .for_each(|v| *v *= scale);
        }
        out
    } else {
        direct(x, dir)
    }
}

fn direct(x: &ComplexVector, dir: Direction) -> ComplexVector {
    let n = x.len();
    let twiddles = Twiddles::new(n, dir);
    let mut out = ComplexVector::zeros(n);
    for b in 0..n {
        let (mut acc_re, mut acc_im) = (0.0, 0.0);
        // j tracks b·k mod n
        let mut j = 0;
        for k in 0..n {
            let (c, s) = (twiddles.cos[j], twiddles.sin[j]);
            acc_re += x.re[k] * c - x.im[k] * s;
            acc_im += x.re[k] * s + x.im[k] * c;
            j += b;
            if j >= n {
                j -= n;
            }
        }
        out.re[b] = acc_re;
        out.im[b] = acc_im;
    }
    if dir == Direction::Inverse {
        let scale = 1.0 / n as f64;
        out.re
            .iter_mut()
            .chain(out.im.iter_mut())
            .for_each(|v| *v *= scale);
    }
    out
}

/// `e^{±i2πj/N}` for `j` in `0..N`, with the exponent reduced mod `N`.
struct Twiddles {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Twiddles {
    fn new(n: usize, dir: Direction) -> Self {
        let sign = dir.sign();
        let (cos, sin) = (0..n)
            .map(|j| {
                let angle = 2.0 * PI * j as f64 / n as f64;
                (angle.cos(), sign * angle.sin())
            })
            .unzip();
        Self { n, cos, sin }
    }

    #[inline]
    fn at(&self, j: usize) -> (f64, f64) {
        let j = j % self.n;
        (self.cos[j], self.sin[j])
    }
}

/// Iterative radix-2 Cooley–Tukey: bit-reversal permutation, then butterflies.
/// Output is in natural order and unnormalized.
fn fft_in_place(re: &mut [f64], im: &mut [f64], dir: Direction) {
    let n = re.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let twiddles = Twiddles::new(n, dir);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let (wr, wi) = twiddles.at(k * stride);
                let (a, b) = (start + k, start + k + half);
                let tr = re[b] * wr - im[b] * wi;
                let ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len <<= 1;
    }
}

/// The spectral Hilbert multiplier: `1` at DC and (for even `n`) Nyquist,
/// `−i` on positive frequencies, `+i` on negative frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct HilbertMultiplier {
    n: usize,
    multipliers: Vec<(f64, f64)>,
}

impl HilbertMultiplier {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::contract(format!(
                "Hilbert transform needs a positive even length, got {n}"
            )));
        }
        let half = n / 2;
        let multipliers = (0..n)
            .map(|b| match b {
                0 => (1.0, 0.0),
                b if b == half => (1.0, 0.0),
                b if b < half => (0.0, -1.0),
                _ => (0.0, 1.0),
            })
            .collect();
        Ok(Self { n, multipliers })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn multipliers(&self) -> &[(f64, f64)] {
        &self.multipliers
    }

    /// Multiplies a spectrum bin-wise, optionally by the conjugate multiplier.
    fn apply(&self, spectrum: &mut ComplexVector, conjugate: bool) {
        for (b, &(mr, mi)) in self.multipliers.iter().enumerate() {
            let mi = if conjugate { -mi } else { mi };
            let (xr, xi) = (spectrum.re[b], spectrum.im[b]);
            spectrum.re[b] = xr * mr - xi * mi;
            spectrum.im[b] = xr * mi + xi * mr;
        }
    }
}

fn check_real_input(z: &[f64]) -> Result<()> {
    if z.is_empty() || !z.len().is_multiple_of(2) {
        return Err(Error::contract(format!(
            "Hilbert transform needs a positive even length, got {}",
            z.len()
        )));
    }
    if let Some(pos) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::data(format!(
            "non-finite sample {} at index {pos}",
            z[pos]
        )));
    }
    Ok(())
}

fn spectral_hilbert(z: &[f64], conjugate: bool) -> Result<Vec<f64>> {
    check_real_input(z)?;
    let multiplier = HilbertMultiplier::new(z.len())?;
    let mut spectrum = dft(&ComplexVector {
        re: z.to_vec(),
        im: vec![0.0; z.len()],
    });
    multiplier.apply(&mut spectrum, conjugate);
    let out = idft(&spectrum);
    let scale = z.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let residue = out.im.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(
        residue <= IMAG_RESIDUE_TOL * scale,
        "Hilbert transform left imaginary residue {residue:e}"
    );
    Ok(out.re)
}

/// Discrete Hilbert transform of a real even-length signal via the spectral multiplier.
pub fn hilbert_freq(z: &[f64]) -> Result<Vec<f64>> {
    spectral_hilbert(z, false)
}

/// Transpose of the linear map [`hilbert_freq`].
///
/// The map is a real circulant matrix; its transpose is the circulant whose
/// multiplier is the complex conjugate of the forward one. Off DC and Nyquist
/// this is `−ℋ`; on those two bins it is the identity.
pub fn hilbert_freq_transpose(z: &[f64]) -> Result<Vec<f64>> {
    spectral_hilbert(z, true)
}

/// Time-domain discrete Hilbert transform with a cotangent kernel,
/// `ℋ{x}[n] = (2/N)·Σ_{u ≢ n (mod 2)} x[u]·cot((n − u)π/N)`.
///
/// Agrees with [`hilbert_freq`] on signals without DC or Nyquist content.
pub fn dht_cotangent(x: &[f64]) -> Result<Vec<f64>> {
    check_real_input(x)?;
    let n = x.len();
    let scale = 2.0 / n as f64;
    // cot(jπ/N) for odd offsets j; even offsets never occur.
    let kernel: Vec<f64> = (0..n)
        .map(|j| {
            if j % 2 == 1 {
                1.0 / (j as f64 * PI / n as f64).tan()
            } else {
                0.0
            }
        })
        .collect();
    Ok((0..n)
        .map(|out_idx| {
            let start = 1 - out_idx % 2;
            scale
                * (start..n)
                    .step_by(2)
                    .map(|u| x[u] * kernel[(out_idx + n - u) % n])
                    .sum::<f64>()
        })
        .collect())
}

/// Analytic signal `x + i·ℋ{x}`.
pub fn analytic_signal(x: &[f64]) -> Result<ComplexVector> {
    let h = hilbert_freq(x)?;
    Ok(ComplexVector {
        re: x.to_vec(),
        im: h,
    })
}
