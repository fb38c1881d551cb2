use crate::error::{Error, Result};

/// Slanted triangular learning rate: linear warmup to `peak_lr` over the
/// first `warmup_fraction · total_steps` steps, then linear decay to zero.
pub fn stlr(step: usize, total_steps: usize, warmup_fraction: f64, peak_lr: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::invalid("schedule needs at least one step"));
    }
    if step > total_steps {
        return Err(Error::invalid(format!("step {step} beyond {total_steps} total steps")));
    }
    if !(warmup_fraction > 0.0 && warmup_fraction < 1.0) {
        return Err(Error::invalid(format!("warmup fraction {warmup_fraction} outside (0, 1)")));
    }
    let total = total_steps as f64;
    let w = warmup_fraction * total;
    let s = step as f64;
    Ok(if s <= w {
        peak_lr * (s / w)
    } else {
        peak_lr * ((total - s) / (total - w))
    })
}

/// Linear scaling rule: `base_lr · new_batch / base_batch`.
pub fn scale_lr(base_lr: f64, base_batch: usize, new_batch: usize) -> f64 {
    base_lr * new_batch as f64 / base_batch as f64
}
