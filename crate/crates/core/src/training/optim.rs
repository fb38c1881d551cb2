use crate::model::Parameters;

/// Adam with decoupled weight decay. Decay touches only tensors whose kind
/// [decays](crate::model::ParamKind::decays).
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Parameters,
    v: Parameters,
}

impl AdamW {
    pub fn new(params: &Parameters, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            weight_decay,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut Parameters, grads: &Parameters, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut()));
        for ((p, g), (m, v)) in tensors {
            let decay = if p.kind.decays() { 1.0 - lr * wd } else { 1.0 };
            for (((x, &gi), mi), vi) in p.data.iter_mut().zip(g.data).zip(m.data.iter_mut()).zip(v.data.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *x = *x * decay - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, ModelConfig};

    fn params() -> Parameters {
        let c = ModelConfig {
            layers: 1,
            heads: 1,
            width: 4,
            ff_width: 4,
            max_positions: 4,
            vocab_size: 5,
            ..ModelConfig::default()
        };
        init_model(&c, 9).unwrap()
    }

    #[test]
    fn zero_gradient_only_decays_weights() {
        let mut p = params();
        p.classifier_b = 0.7;
        let before = p.clone();
        let mut opt = AdamW::new(&p, 0.9, 0.999, 1e-6, 0.01);
        opt.step(&mut p, &before.zeros_like(), 0.1);
        assert_eq!(p.classifier_b, 0.7);
        assert_eq!(p.layers[0].ln1_g, before.layers[0].ln1_g);
        assert_eq!(p.layers[0].wq, &before.layers[0].wq * (1.0 - 0.1 * 0.01));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.classifier_b = 5.0;
        let mut opt = AdamW::new(&p, 0.9, 0.999, 0.0, 0.0);
        opt.step(&mut p, &g, 0.01);
        assert!((p.classifier_b - (before.classifier_b - 0.01)).abs() < 1e-15);
    }
}
