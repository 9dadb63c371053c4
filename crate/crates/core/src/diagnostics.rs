//! Evaluation metrics and latent-space diagnostics.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Percentage of rows whose argmax equals the label. Ties go to the lowest class index.
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    if logits.rows() != labels.len() {
        return Err(Error::shape(format!(
            "{} prediction rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::data("accuracy of an empty batch"));
    }
    let correct = logits
        .row_iter()
        .zip(labels)
        .filter(|(row, &label)| argmax(row) == label)
        .count();
    Ok(100.0 * correct as f64 / labels.len() as f64)
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// `θ̂ − θ` wrapped to `(−π, π]`.
pub fn wrapped_angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MagPhaseError {
    pub mag_mse: f64,
    pub phase_mse: f64,
    /// Complex values with zero magnitude, whose phase was taken as 0.
    pub degenerate_phases: usize,
}

/// Magnitude and wrapped-phase mean squared errors of `[re | im]` rows.
pub fn mag_phase_mse(pred: &Tensor, target: &Tensor) -> Result<MagPhaseError> {
    pred.expect_same_shape(target, "mag_phase_mse")?;
    let width = pred.cols();
    if !width.is_multiple_of(2) || pred.is_empty() {
        return Err(Error::shape(format!(
            "mag_phase_mse needs non-empty [re | im] rows, got width {width}"
        )));
    }
    let k = width / 2;
    let mut degenerate = 0;
    let mut phase = |re: f64, im: f64| {
        if re == 0.0 && im == 0.0 {
            degenerate += 1;
            0.0
        } else {
            im.atan2(re)
        }
    };
    let (mut mag_sum, mut phase_sum) = (0.0, 0.0);
    for (p, t) in pred.row_iter().zip(target.row_iter()) {
        for j in 0..k {
            let (pr, pi, tr, ti) = (p[j], p[k + j], t[j], t[k + j]);
            mag_sum += (pr.hypot(pi) - tr.hypot(ti)).powi(2);
            phase_sum += wrapped_angle_diff(phase(pr, pi), phase(tr, ti)).powi(2);
        }
    }
    let n = (pred.rows() * k) as f64;
    Ok(MagPhaseError {
        mag_mse: mag_sum / n,
        phase_mse: phase_sum / n,
        degenerate_phases: degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Orthogonality {
    /// Mean of `|⟨z_re, z_im⟩| / (‖z_re‖·‖z_im‖)` over usable rows.
    pub mean_abs_cosine: f64,
    /// Rows skipped because one of the latents was all zero.
    pub zero_rows: usize,
}

pub fn latent_orthogonality(z_re: &Tensor, z_im: &Tensor) -> Result<Orthogonality> {
    z_re.expect_same_shape(z_im, "latent_orthogonality")?;
    let (mut total, mut used, mut skipped) = (0.0, 0usize, 0usize);
    for (a, b) in z_re.row_iter().zip(z_im.row_iter()).take(z_re.rows()) {
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            skipped += 1;
            continue;
        }
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        total += (dot.abs() / (na * nb)).min(1.0);
        used += 1;
    }
    Ok(Orthogonality {
        mean_abs_cosine: if used == 0 { 0.0 } else { total / used as f64 },
        zero_rows: skipped,
    })
}

/// Row-wise mixed norm `(Σᵢ (Σⱼ |aᵢⱼ|^q)^{p/q})^{1/p}`.
pub fn lpq_norm(a: &Tensor, p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::contract(format!(
            "L_pq norm needs p, q ≥ 1, got p={p}, q={q}"
        )));
    }
    let total: f64 = a
        .row_iter()
        .take(a.rows())
        .map(|row| {
            let inner: f64 = row.iter().map(|v| v.abs().powf(q)).sum();
            inner.powf(p / q)
        })
        .sum();
    Ok(total.powf(1.0 / p))
}

/// Sample covariance blocks of the real and imaginary latents.
#[derive(Clone, Debug, PartialEq)]
pub struct CovBlocks {
    pub k_rr: Tensor,
    pub k_ii: Tensor,
    pub k_ri: Tensor,
}

impl CovBlocks {
    /// Estimates the blocks with `1/(n−1)` normalization.
    pub fn estimate(z_re: &Tensor, z_im: &Tensor) -> Result<Self> {
        let (n, _) = z_re.expect_matrix("covariance")?;
        let (n2, _) = z_im.expect_matrix("covariance")?;
        if n != n2 {
            return Err(Error::shape(format!(
                "{n} real rows vs {n2} imaginary rows"
            )));
        }
        if n < 2 {
            return Err(Error::data(
                "covariance needs a batch of at least 2 samples",
            ));
        }
        let re = center_columns(z_re);
        let im = center_columns(z_im);
        let scale = 1.0 / (n - 1) as f64;
        let cov =
            |a: &Tensor, b: &Tensor| -> Result<Tensor> { Ok(a.matmul_tn(b)?.map(|v| v * scale)) };
        Ok(Self {
            k_rr: cov(&re, &re)?,
            k_ii: cov(&im, &im)?,
            k_ri: cov(&re, &im)?,
        })
    }

    /// `[[K_RR, K_RI], [K_RIᵀ, K_II]]`, optionally with the cross blocks zeroed.
    pub fn joint(&self, with_cross: bool) -> Result<Tensor> {
        let cross = if with_cross {
            self.k_ri.clone()
        } else {
            Tensor::zeros(self.k_ri.rows(), self.k_ri.cols())
        };
        let top = self.k_rr.concat_cols(&cross)?;
        let bottom = cross.transpose()?.concat_cols(&self.k_ii)?;
        let (rows, cols) = (top.rows() + bottom.rows(), top.cols());
        let mut data = top.into_data();
        data.extend(bottom.into_data());
        Tensor::matrix(rows, cols, data)
    }
}

fn center_columns(t: &Tensor) -> Tensor {
    let (n, c) = (t.rows(), t.cols());
    let mut means = vec![0.0; c];
    for row in t.row_iter().take(n) {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut out = t.clone();
    for row in out.data_mut().chunks_mut(c.max(1)) {
        for (v, m) in row.iter_mut().zip(&means) {
            *v -= m;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceComparison {
    /// Norm of the full covariance, cross blocks included.
    pub norm_j: f64,
    /// Norm with the cross-covariance blocks zeroed.
    pub norm_s: f64,
    pub ratio: f64,
}

pub fn covariance_comparison(
    z_re: &Tensor,
    z_im: &Tensor,
    p: f64,
    q: f64,
) -> Result<CovarianceComparison> {
    let blocks = CovBlocks::estimate(z_re, z_im)?;
    let norm_j = lpq_norm(&blocks.joint(true)?, p, q)?;
    let norm_s = lpq_norm(&blocks.joint(false)?, p, q)?;
    let ratio = if norm_s > 0.0 {
        norm_j / norm_s
    } else {
        f64::INFINITY
    };
    Ok(CovarianceComparison {
        norm_j,
        norm_s,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn accuracy_counts() {
        let logits = m(&[
            vec![0.9, 0.1],
            vec![0.2, 0.8],
            vec![0.6, 0.4],
            vec![0.3, 0.7],
        ]);
        assert_eq!(accuracy(&logits, &[0, 1, 0, 1]).unwrap(), 100.0);
        assert_eq!(accuracy(&logits, &[1, 0, 1, 0]).unwrap(), 0.0);
        assert_eq!(accuracy(&logits, &[0, 1, 0, 0]).unwrap(), 75.0);
    }

    #[test]
    fn argmax_tie_goes_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }

    #[test]
    fn mag_phase_examples() {
        let t = m(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let e = mag_phase_mse(&t, &t).unwrap();
        assert_eq!((e.mag_mse, e.phase_mse), (0.0, 0.0));

        // rotate each target by +π/2: (re, im) → (−im, re)
        let rotated = m(&[vec![0.0, 1.0], vec![-2.0, 0.0]]);
        let e = mag_phase_mse(&rotated, &t).unwrap();
        assert!(e.mag_mse.abs() < 1e-15);
        assert!((e.phase_mse - (PI / 2.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn phase_wraps_around() {
        let a = PI - 0.1;
        let b = -PI + 0.1;
        let pred = m(&[vec![a.cos(), a.sin()]]);
        let target = m(&[vec![b.cos(), b.sin()]]);
        let e = mag_phase_mse(&pred, &target).unwrap();
        assert!((e.phase_mse - 0.04).abs() < 1e-12, "{}", e.phase_mse);
        assert!((wrapped_angle_diff(PI, -PI)).abs() < 1e-15);
        assert!((wrapped_angle_diff(-PI / 2.0, PI) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_prediction_phase_is_counted() {
        let pred = m(&[vec![0.0, 0.0]]);
        let target = m(&[vec![0.0, 1.0]]);
        let e = mag_phase_mse(&pred, &target).unwrap();
        assert_eq!(e.degenerate_phases, 1);
        assert!((e.phase_mse - (PI / 2.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn orthogonality_parallel_vectors() {
        let z = m(&[vec![1.0, -2.0, 0.5, 0.5]]);
        let neg = z.map(|v| -v);
        assert!((latent_orthogonality(&z, &z).unwrap().mean_abs_cosine - 1.0).abs() < 1e-15);
        assert!((latent_orthogonality(&z, &neg).unwrap().mean_abs_cosine - 1.0).abs() < 1e-15);
        let zero = Tensor::zeros(1, 4);
        let o = latent_orthogonality(&z, &zero).unwrap();
        assert_eq!(o.zero_rows, 1);
    }

    #[test]
    fn lpq_examples() {
        let eye = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((lpq_norm(&eye, 2.0, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let a = m(&[vec![3.0, 4.0], vec![0.0, 0.0]]);
        assert!((lpq_norm(&a, 2.0, 2.0).unwrap() - 5.0).abs() < 1e-15);
        let ones = m(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!((lpq_norm(&ones, 1.0, 2.0).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(lpq_norm(&ones, 0.5, 2.0), Err(Error::Contract(_))));
    }

    #[test]
    fn covariance_identical_latents_strictly_larger() {
        let z = m(&[
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![-1.0, 1.0],
            vec![0.5, -3.0],
        ]);
        let c = covariance_comparison(&z, &z, 2.0, 2.0).unwrap();
        assert!(c.norm_j > c.norm_s);
        assert!(matches!(
            covariance_comparison(&m(&[vec![1.0, 2.0]]), &m(&[vec![1.0, 2.0]]), 2.0, 2.0),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn covariance_blocks_symmetric() {
        let re = m(&[vec![1.0, 2.0], vec![0.0, -1.0], vec![3.0, 0.5]]);
        let im = m(&[vec![0.2, 1.0], vec![-1.0, 0.0], vec![0.4, 2.0]]);
        let b = CovBlocks::estimate(&re, &im).unwrap();
        assert_eq!(b.k_rr, b.k_rr.transpose().unwrap());
        assert_eq!(b.k_ii, b.k_ii.transpose().unwrap());
        assert!(b.k_rr.get(0, 0) >= 0.0 && b.k_rr.get(1, 1) >= 0.0);
        // var of [1, 0, 3] with 1/(n−1)
        assert!((b.k_rr.get(0, 0) - 7.0 / 3.0).abs() < 1e-12);
    }
}
