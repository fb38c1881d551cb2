use ndarray::{Array1, Array2};
use rand::Rng as _;

use super::config::{HeadVariant, ModelConfig};
use crate::corpus::GENRE_COUNT;
use crate::error::Result;
use crate::rng::sub_rng;

/// How a tensor is treated by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Norm,
    Embedding,
}

impl ParamKind {
    /// Decoupled weight decay applies to weights and embeddings only.
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::Weight | ParamKind::Embedding)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Weight matrices are stored input-major: `y = x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub config: ModelConfig,
    pub token_emb: Array2<f64>,
    pub position_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub final_ln_g: Array1<f64>,
    pub final_ln_b: Array1<f64>,
    /// Pooled head only.
    pub pooler_w: Option<Array2<f64>>,
    pub pooler_b: Option<Array1<f64>>,
    /// Genre-concat head only: `GENRE_COUNT × genre_width`.
    pub genre_w: Option<Array2<f64>>,
    pub genre_b: Option<Array1<f64>>,
    pub classifier_w: Array1<f64>,
    pub classifier_b: f64,
}

pub struct TensorRef<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
}

impl Parameters {
    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.width;
        let f = config.ff_width;
        let layer = || LayerParams {
            ln1_g: Array1::zeros(d),
            ln1_b: Array1::zeros(d),
            wq: Array2::zeros((d, d)),
            bq: Array1::zeros(d),
            wk: Array2::zeros((d, d)),
            bk: Array1::zeros(d),
            wv: Array2::zeros((d, d)),
            bv: Array1::zeros(d),
            wo: Array2::zeros((d, d)),
            bo: Array1::zeros(d),
            ln2_g: Array1::zeros(d),
            ln2_b: Array1::zeros(d),
            w1: Array2::zeros((d, f)),
            b1: Array1::zeros(f),
            w2: Array2::zeros((f, d)),
            b2: Array1::zeros(d),
        };
        let pooled = config.head == HeadVariant::Pooled;
        let genre = config.head == HeadVariant::GenreConcat;
        Ok(Self {
            config: config.clone(),
            token_emb: Array2::zeros((config.vocab_size, d)),
            position_emb: Array2::zeros((config.max_positions, d)),
            layers: (0..config.layers).map(|_| layer()).collect(),
            final_ln_g: Array1::zeros(d),
            final_ln_b: Array1::zeros(d),
            pooler_w: pooled.then(|| Array2::zeros((d, d))),
            pooler_b: pooled.then(|| Array1::zeros(d)),
            genre_w: genre.then(|| Array2::zeros((GENRE_COUNT, config.genre_width))),
            genre_b: genre.then(|| Array1::zeros(config.genre_width)),
            classifier_w: Array1::zeros(config.classifier_width()),
            classifier_b: 0.0,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config).expect("config already validated")
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        fn push_to<'a>(out: &mut Vec<TensorRef<'a>>, name: String, kind: ParamKind, shape: &[usize], data: &'a [f64]) {
            out.push(TensorRef {
                name,
                kind,
                shape: shape.to_vec(),
                data,
            })
        }
        macro_rules! push {
            ($($arg:expr),+) => { push_to(&mut out, $($arg),+) };
        }
        push!("token_emb".into(), ParamKind::Embedding, self.token_emb.shape(), slice(&self.token_emb));
        push!("position_emb".into(), ParamKind::Embedding, self.position_emb.shape(), slice(&self.position_emb));
        for (i, l) in self.layers.iter().enumerate() {
            let n = |s: &str| format!("layer{i}.{s}");
            push!(n("ln1_g"), ParamKind::Norm, l.ln1_g.shape(), slice(&l.ln1_g));
            push!(n("ln1_b"), ParamKind::Norm, l.ln1_b.shape(), slice(&l.ln1_b));
            push!(n("wq"), ParamKind::Weight, l.wq.shape(), slice(&l.wq));
            push!(n("bq"), ParamKind::Bias, l.bq.shape(), slice(&l.bq));
            push!(n("wk"), ParamKind::Weight, l.wk.shape(), slice(&l.wk));
            push!(n("bk"), ParamKind::Bias, l.bk.shape(), slice(&l.bk));
            push!(n("wv"), ParamKind::Weight, l.wv.shape(), slice(&l.wv));
            push!(n("bv"), ParamKind::Bias, l.bv.shape(), slice(&l.bv));
            push!(n("wo"), ParamKind::Weight, l.wo.shape(), slice(&l.wo));
            push!(n("bo"), ParamKind::Bias, l.bo.shape(), slice(&l.bo));
            push!(n("ln2_g"), ParamKind::Norm, l.ln2_g.shape(), slice(&l.ln2_g));
            push!(n("ln2_b"), ParamKind::Norm, l.ln2_b.shape(), slice(&l.ln2_b));
            push!(n("w1"), ParamKind::Weight, l.w1.shape(), slice(&l.w1));
            push!(n("b1"), ParamKind::Bias, l.b1.shape(), slice(&l.b1));
            push!(n("w2"), ParamKind::Weight, l.w2.shape(), slice(&l.w2));
            push!(n("b2"), ParamKind::Bias, l.b2.shape(), slice(&l.b2));
        }
        push!("final_ln_g".into(), ParamKind::Norm, self.final_ln_g.shape(), slice(&self.final_ln_g));
        push!("final_ln_b".into(), ParamKind::Norm, self.final_ln_b.shape(), slice(&self.final_ln_b));
        if let (Some(w), Some(b)) = (&self.pooler_w, &self.pooler_b) {
            push!("pooler_w".into(), ParamKind::Weight, w.shape(), slice(w));
            push!("pooler_b".into(), ParamKind::Bias, b.shape(), slice(b));
        }
        if let (Some(w), Some(b)) = (&self.genre_w, &self.genre_b) {
            push!("genre_w".into(), ParamKind::Weight, w.shape(), slice(w));
            push!("genre_b".into(), ParamKind::Bias, b.shape(), slice(b));
        }
        push!("classifier_w".into(), ParamKind::Weight, self.classifier_w.shape(), slice(&self.classifier_w));
        push!("classifier_b".into(), ParamKind::Bias, &[1], std::slice::from_ref(&self.classifier_b));
        out
    }

    /// Same order and names as [`Parameters::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        fn push_to<'a>(out: &mut Vec<TensorMut<'a>>, name: String, kind: ParamKind, shape: Vec<usize>, data: &'a mut [f64]) {
            out.push(TensorMut {
                name,
                kind,
                shape,
                data,
            })
        }
        macro_rules! push {
            ($($arg:expr),+) => { push_to(&mut out, $($arg),+) };
        }
        let Parameters {
            token_emb,
            position_emb,
            layers,
            final_ln_g,
            final_ln_b,
            pooler_w,
            pooler_b,
            genre_w,
            genre_b,
            classifier_w,
            classifier_b,
            ..
        } = self;
        push!("token_emb".into(), ParamKind::Embedding, token_emb.shape().to_vec(), slice_mut(token_emb));
        push!("position_emb".into(), ParamKind::Embedding, position_emb.shape().to_vec(), slice_mut(position_emb));
        for (i, l) in layers.iter_mut().enumerate() {
            let n = |s: &str| format!("layer{i}.{s}");
            let LayerParams {
                ln1_g,
                ln1_b,
                wq,
                bq,
                wk,
                bk,
                wv,
                bv,
                wo,
                bo,
                ln2_g,
                ln2_b,
                w1,
                b1,
                w2,
                b2,
            } = l;
            push!(n("ln1_g"), ParamKind::Norm, ln1_g.shape().to_vec(), slice_mut(ln1_g));
            push!(n("ln1_b"), ParamKind::Norm, ln1_b.shape().to_vec(), slice_mut(ln1_b));
            push!(n("wq"), ParamKind::Weight, wq.shape().to_vec(), slice_mut(wq));
            push!(n("bq"), ParamKind::Bias, bq.shape().to_vec(), slice_mut(bq));
            push!(n("wk"), ParamKind::Weight, wk.shape().to_vec(), slice_mut(wk));
            push!(n("bk"), ParamKind::Bias, bk.shape().to_vec(), slice_mut(bk));
            push!(n("wv"), ParamKind::Weight, wv.shape().to_vec(), slice_mut(wv));
            push!(n("bv"), ParamKind::Bias, bv.shape().to_vec(), slice_mut(bv));
            push!(n("wo"), ParamKind::Weight, wo.shape().to_vec(), slice_mut(wo));
            push!(n("bo"), ParamKind::Bias, bo.shape().to_vec(), slice_mut(bo));
            push!(n("ln2_g"), ParamKind::Norm, ln2_g.shape().to_vec(), slice_mut(ln2_g));
            push!(n("ln2_b"), ParamKind::Norm, ln2_b.shape().to_vec(), slice_mut(ln2_b));
            push!(n("w1"), ParamKind::Weight, w1.shape().to_vec(), slice_mut(w1));
            push!(n("b1"), ParamKind::Bias, b1.shape().to_vec(), slice_mut(b1));
            push!(n("w2"), ParamKind::Weight, w2.shape().to_vec(), slice_mut(w2));
            push!(n("b2"), ParamKind::Bias, b2.shape().to_vec(), slice_mut(b2));
        }
        push!("final_ln_g".into(), ParamKind::Norm, final_ln_g.shape().to_vec(), slice_mut(final_ln_g));
        push!("final_ln_b".into(), ParamKind::Norm, final_ln_b.shape().to_vec(), slice_mut(final_ln_b));
        if let (Some(w), Some(b)) = (pooler_w, pooler_b) {
            push!("pooler_w".into(), ParamKind::Weight, w.shape().to_vec(), slice_mut(w));
            push!("pooler_b".into(), ParamKind::Bias, b.shape().to_vec(), slice_mut(b));
        }
        if let (Some(w), Some(b)) = (genre_w, genre_b) {
            push!("genre_w".into(), ParamKind::Weight, w.shape().to_vec(), slice_mut(w));
            push!("genre_b".into(), ParamKind::Bias, b.shape().to_vec(), slice_mut(b));
        }
        push!("classifier_w".into(), ParamKind::Weight, classifier_w.shape().to_vec(), slice_mut(classifier_w));
        push!("classifier_b".into(), ParamKind::Bias, vec![1], std::slice::from_mut(classifier_b));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Parameters, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data.iter_mut().zip(b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

fn slice<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are stored in standard layout")
}

fn slice_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are stored in standard layout")
}

/// Seeded initialization. Projections and embeddings are drawn uniformly
/// with standard deviation `1/√fan_in`; norms start at scale 1, offset 0;
/// biases (including the classifier bias) start at 0.
pub fn init_model(config: &ModelConfig, seed: u64) -> Result<Parameters> {
    let mut p = Parameters::zeros(config)?;
    let mut rng = sub_rng(seed, "model/init");
    let d = config.width;
    for t in p.tensors_mut() {
        match t.kind {
            ParamKind::Norm if t.name.ends_with("_g") => t.data.fill(1.0),
            ParamKind::Norm | ParamKind::Bias => {}
            ParamKind::Weight | ParamKind::Embedding => {
                let fan_in = if t.kind == ParamKind::Embedding { d } else { t.shape[0] };
                let a = (3.0 / fan_in as f64).sqrt();
                for x in t.data.iter_mut() {
                    *x = rng.random_range(-a..a);
                }
            }
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::GenreMode;

    fn tiny() -> ModelConfig {
        ModelConfig {
            layers: 1,
            heads: 2,
            width: 8,
            ff_width: 16,
            max_positions: 16,
            vocab_size: 12,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn same_seed_identical() {
        assert_eq!(init_model(&tiny(), 5).unwrap(), init_model(&tiny(), 5).unwrap());
        assert_ne!(init_model(&tiny(), 5).unwrap(), init_model(&tiny(), 6).unwrap());
    }

    #[test]
    fn norms_and_biases_initialized() {
        let p = init_model(&tiny(), 1).unwrap();
        assert!(p.layers[0].ln1_g.iter().all(|&g| g == 1.0));
        assert!(p.layers[0].bq.iter().all(|&b| b == 0.0));
        assert_eq!(p.classifier_b, 0.0);
        assert!(p.all_finite());
    }

    #[test]
    fn view_orders_match() {
        let mut p = init_model(
            &ModelConfig {
                head: HeadVariant::GenreConcat,
                genre_mode: GenreMode::Vector,
                genre_width: 3,
                ..tiny()
            },
            2,
        )
        .unwrap();
        let names: Vec<String> = p.tensors().into_iter().map(|t| t.name).collect();
        let names_mut: Vec<String> = p.tensors_mut().into_iter().map(|t| t.name).collect();
        assert_eq!(names, names_mut);
        assert!(names.contains(&"genre_w".to_string()));
        assert_eq!(p.classifier_w.len(), 11);
    }

    #[test]
    fn invalid_config_rejected() {
        let c = ModelConfig { width: 7, ..tiny() };
        assert!(init_model(&c, 0).is_err());
    }
}
