//! Task losses and the Hilbert consistency penalty, as tape operations.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::signal;
use crate::tensor::Tensor;

/// Mean cross-entropy of `logits` `[b, k]` against class ids.
pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    tape.cross_entropy(logits, labels)
}

/// Mean over all entries of `(pred − target)²`.
pub fn mse(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    let diff = tape.sub(pred, target)?;
    let sq = tape.mul(diff, diff)?;
    Ok(tape.mean(sq))
}

/// Batch average of the per-sample mean squared error between `ℋ{z_re}` and `z_im`.
///
/// The gradient flows into both latents.
pub fn hilbert_penalty(tape: &mut Tape, z_re: Var, z_im: Var) -> Result<Var> {
    check_latent_width(tape.value(z_re))?;
    let shifted = tape.hilbert_rows(z_re)?;
    mse(tape, shifted, z_im)
}

/// `task + β·penalty`.
pub fn total_loss(tape: &mut Tape, task: Var, penalty: Var, beta: f64) -> Result<Var> {
    if !(beta >= 0.0) {
        return Err(Error::contract(format!(
            "β must be non-negative, got {beta}"
        )));
    }
    let weighted = tape.scale(penalty, beta);
    tape.add(task, weighted)
}

/// Value of [`hilbert_penalty`] on plain tensors.
pub fn hilbert_penalty_value(z_re: &Tensor, z_im: &Tensor) -> Result<f64> {
    check_latent_width(z_re)?;
    z_re.expect_same_shape(z_im, "hilbert_penalty")?;
    let mut total = 0.0;
    for (re, im) in z_re.row_iter().zip(z_im.row_iter()) {
        let h = signal::hilbert_freq(re)?;
        total += h.iter().zip(im).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(total / z_re.len().max(1) as f64)
}

fn check_latent_width(z: &Tensor) -> Result<()> {
    let cols = z.cols();
    if cols == 0 || !cols.is_multiple_of(2) {
        return Err(Error::contract(format!(
            "Hilbert penalty needs an even latent width, got {cols}"
        )));
    }
    Ok(())
}
