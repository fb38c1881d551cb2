use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::sigmoid;

/// Probabilities are kept this far from 0 and 1 before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    WeightedBce,
    Focal,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::WeightedBce => "wbce",
            LossKind::Focal => "focal",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wbce" | "weighted-bce" | "weighted_bce" => Ok(LossKind::WeightedBce),
            "focal" => Ok(LossKind::Focal),
            other => Err(Error::invalid(format!("unknown loss {other:?}"))),
        }
    }
}

/// Loss settings applied per target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub kind: LossKind,
    pub pos_weight: f64,
    pub gamma: f64,
}

impl Objective {
    /// Loss of one target with logit `z` and label `y`, and its derivative
    /// with respect to `z`.
    pub fn loss_and_grad(&self, z: f64, y: f64) -> (f64, f64) {
        let p = sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let w = self.pos_weight;
        let (lp, lq) = (p.ln(), (1.0 - p).ln());
        match self.kind {
            LossKind::WeightedBce => {
                let loss = -(w * y * lp + (1.0 - y) * lq);
                let grad = -w * y * (1.0 - p) + (1.0 - y) * p;
                (loss, grad)
            }
            LossKind::Focal => {
                let g = self.gamma;
                let q = 1.0 - p;
                let loss = -(w * y * q.powf(g) * lp + (1.0 - y) * p.powf(g) * lq);
                let grad_pos = w * (g * p * q.powf(g) * lp - q.powf(g + 1.0));
                let grad_neg = -g * p.powf(g) * q * lq + p.powf(g + 1.0);
                (loss, y * grad_pos + (1.0 - y) * grad_neg)
            }
        }
    }

    pub fn loss(&self, probabilities: &[f64], labels: &[f64]) -> Result<f64> {
        match self.kind {
            LossKind::WeightedBce => weighted_bce(probabilities, labels, self.pos_weight),
            LossKind::Focal => focal_loss(probabilities, labels, self.gamma, self.pos_weight),
        }
    }
}

fn check(probabilities: &[f64], labels: &[f64]) -> Result<()> {
    if probabilities.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} probabilities for {} labels",
            probabilities.len(),
            labels.len()
        )));
    }
    if probabilities.is_empty() {
        return Err(Error::invalid("loss over an empty batch"));
    }
    Ok(())
}

/// Mean of `−[w·y·ln p + (1−y)·ln(1−p)]`.
pub fn weighted_bce(probabilities: &[f64], labels: &[f64], pos_weight: f64) -> Result<f64> {
    check(probabilities, labels)?;
    let sum: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(pos_weight * y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / probabilities.len() as f64)
}

/// Mean of `−[w·y·(1−p)^γ·ln p + (1−y)·p^γ·ln(1−p)]`.
pub fn focal_loss(probabilities: &[f64], labels: &[f64], gamma: f64, pos_weight: f64) -> Result<f64> {
    check(probabilities, labels)?;
    if gamma < 0.0 {
        return Err(Error::invalid(format!("focal gamma {gamma} is negative")));
    }
    let sum: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(pos_weight * y * (1.0 - p).powf(gamma) * p.ln() + (1.0 - y) * p.powf(gamma) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / probabilities.len() as f64)
}

/// `negatives / positives`.
pub fn pos_weight_from_counts(positives: usize, negatives: usize) -> Result<f64> {
    if positives == 0 {
        return Err(Error::invalid("positive-class weight needs at least one positive"));
    }
    Ok(negatives as f64 / positives as f64)
}

/// `ln(positives / negatives)`: a zero-weight classifier with this bias
/// predicts the positive base rate.
pub fn init_output_bias(positives: usize, negatives: usize) -> Result<f64> {
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid(format!(
            "output bias needs both classes ({positives} positive, {negatives} negative)"
        )));
    }
    Ok((positives as f64 / negatives as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_examples() {
        let ln2 = 2f64.ln();
        assert!((weighted_bce(&[0.5], &[1.0], 1.0).unwrap() - ln2).abs() < 1e-12);
        assert!((weighted_bce(&[0.5], &[1.0], 9.0).unwrap() - 9.0 * ln2).abs() < 1e-12);
        assert!(weighted_bce(&[0.5], &[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn focal_example() {
        let v = focal_loss(&[0.9], &[1.0], 2.0, 1.0).unwrap();
        assert!((v - 0.01 * -(0.9f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn weights_and_bias() {
        assert_eq!(pos_weight_from_counts(10, 90).unwrap(), 9.0);
        assert_eq!(pos_weight_from_counts(50, 50).unwrap(), 1.0);
        assert!(pos_weight_from_counts(0, 5).is_err());
        assert_eq!(init_output_bias(50, 50).unwrap(), 0.0);
        assert!((init_output_bias(18, 82).unwrap() - (18f64 / 82.0).ln()).abs() < 1e-15);
        assert!(init_output_bias(3, 0).is_err());
    }

    #[test]
    fn objective_matches_batch_loss() {
        for kind in [LossKind::WeightedBce, LossKind::Focal] {
            let o = Objective {
                kind,
                pos_weight: 3.0,
                gamma: 2.0,
            };
            for (z, y) in [(0.3, 1.0), (-1.2, 0.0), (2.0, 0.0)] {
                let (l, _) = o.loss_and_grad(z, y);
                assert!((l - o.loss(&[sigmoid(z)], &[y]).unwrap()).abs() < 1e-12);
            }
        }
    }
}
