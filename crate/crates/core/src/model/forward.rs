use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng as _;

use super::config::{HeadVariant, PoolerActivation};
use super::params::Parameters;
use crate::encoding::{EncodedInput, GenreVector, PAD};
use crate::error::{Error, Result};
use crate::rng::{rng, Rng};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout off; deterministic.
    Eval,
    /// Dropout masks drawn from a generator seeded with `seed`.
    Train { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub target_positions: Vec<usize>,
    pub cls_position: usize,
    /// `[layer][head]` matrices of shape `query × key`, present only when
    /// requested.
    pub attention: Option<Vec<Vec<Array2<f64>>>>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

struct LayerCache {
    ln1: LnCache,
    h1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    ln2: LnCache,
    h2: Array2<f64>,
    u: Array2<f64>,
    a: Array2<f64>,
    ff_mask: Option<Array2<f64>>,
}

struct TargetCache {
    position: usize,
    state: Array1<f64>,
    /// Pooler pre-activation.
    z: Option<Array1<f64>>,
    feature: Array1<f64>,
    mask: Option<Array1<f64>>,
}

/// Intermediate values needed by [`backward`].
pub struct ForwardCache {
    ids: Vec<usize>,
    emb_mask: Option<Array2<f64>>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    targets: Vec<TargetCache>,
    /// Genre input and its pre-activation projection.
    genre: Option<(Array1<f64>, Array1<f64>)>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let n = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.axis_iter_mut(Axis(0)).zip(rstd.iter_mut()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / n;
        *r = 1.0 / (var + LN_EPS).sqrt();
        let rs = *r;
        row.mapv_inplace(|v| v * rs);
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, rstd })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    c: &LnCache,
    g: &Array1<f64>,
    dg: &mut Array1<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    *dg += &(dy * &c.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let n = dy.ncols() as f64;
    let dxhat = dy * g;
    let mut dx = Array2::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let dh = dxhat.row(i);
        let xh = c.xhat.row(i);
        let sum = dh.sum();
        let dot = dh.dot(&xh);
        let r = c.rstd[i] / n;
        for j in 0..dy.ncols() {
            dx[[i, j]] = r * (n * dh[j] - sum - xh[j] * dot);
        }
    }
    dx
}

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044715 * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * u * u)
}

fn dropout_mask(rng: Option<&mut Rng>, p: f64, shape: (usize, usize)) -> Option<Array2<f64>> {
    let rng = rng?;
    if p == 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(Array2::from_shape_fn(shape, |_| if rng.random::<f64>() < p { 0.0 } else { keep }))
}

fn dropout_vec(rng: Option<&mut Rng>, p: f64, n: usize) -> Option<Array1<f64>> {
    dropout_mask(rng, p, (1, n)).map(|m| m.row(0).to_owned())
}

fn check_input(params: &Parameters, input: &EncodedInput, genre: Option<&GenreVector>) -> Result<()> {
    let c = &params.config;
    if input.is_empty() {
        return Err(Error::Shape("empty input".into()));
    }
    if input.len() > c.max_positions {
        return Err(Error::Shape(format!(
            "input length {} exceeds max positions {}",
            input.len(),
            c.max_positions
        )));
    }
    if let Some(&bad) = input.ids.iter().find(|&&id| id as usize >= c.vocab_size) {
        return Err(Error::Shape(format!("token id {bad} outside vocabulary of {}", c.vocab_size)));
    }
    if input.ids.get(input.cls_position) == Some(&PAD) {
        return Err(Error::Shape("classification position is padding".into()));
    }
    match (c.head == HeadVariant::GenreConcat, genre.is_some()) {
        (true, false) => Err(Error::invalid("the genre-concat head needs a genre vector")),
        (false, true) => Err(Error::invalid(format!("the {} head takes no genre vector", c.head))),
        _ => Ok(()),
    }
}

fn run(
    params: &Parameters,
    input: &EncodedInput,
    genre: Option<&GenreVector>,
    mode: Mode,
    keep_attention: bool,
) -> Result<(ForwardOutput, ForwardCache)> {
    check_input(params, input, genre)?;
    let c = &params.config;
    let p = c.dropout;
    let mut drng = match mode {
        Mode::Eval => None,
        Mode::Train { seed } => Some(rng(seed)),
    };
    let t = input.len();
    let d = c.width;
    let dh = c.head_width();
    let scale = 1.0 / (dh as f64).sqrt();
    let key_mask = input.key_mask();
    let ids: Vec<usize> = input.ids.iter().map(|&i| i as usize).collect();

    let mut x = Array2::zeros((t, d));
    for (i, &id) in ids.iter().enumerate() {
        let mut row = x.row_mut(i);
        row += &params.token_emb.row(id);
        row += &params.position_emb.row(i);
    }
    let emb_mask = dropout_mask(drng.as_mut(), p, (t, d));
    if let Some(m) = &emb_mask {
        x *= m;
    }

    let mut layer_caches = Vec::with_capacity(c.layers);
    let mut attention = keep_attention.then(Vec::new);
    for lp in &params.layers {
        let (h1, ln1) = layer_norm(&x, &lp.ln1_g, &lp.ln1_b);
        let q = h1.dot(&lp.wq) + &lp.bq;
        let k = h1.dot(&lp.wk) + &lp.bk;
        let v = h1.dot(&lp.wv) + &lp.bv;
        let mut ctx = Array2::zeros((t, d));
        let mut probs = Vec::with_capacity(c.heads);
        for h in 0..c.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut sc = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            for mut row in sc.axis_iter_mut(Axis(0)) {
                let max = row
                    .iter()
                    .zip(&key_mask)
                    .filter(|(_, &m)| m)
                    .map(|(v, _)| *v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (v, &m) in row.iter_mut().zip(&key_mask) {
                    *v = if m { (*v - max).exp() } else { 0.0 };
                    sum += *v;
                }
                row /= sum;
            }
            ctx.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
            probs.push(sc);
        }
        let mut o = ctx.dot(&lp.wo) + &lp.bo;
        let attn_mask = dropout_mask(drng.as_mut(), p, (t, d));
        if let Some(m) = &attn_mask {
            o *= m;
        }
        x += &o;
        let (h2, ln2) = layer_norm(&x, &lp.ln2_g, &lp.ln2_b);
        let u = h2.dot(&lp.w1) + &lp.b1;
        let a = u.mapv(gelu);
        let mut f = a.dot(&lp.w2) + &lp.b2;
        let ff_mask = dropout_mask(drng.as_mut(), p, (t, d));
        if let Some(m) = &ff_mask {
            f *= m;
        }
        x += &f;
        if let Some(att) = attention.as_mut() {
            att.push(probs.clone());
        }
        layer_caches.push(LayerCache {
            ln1,
            h1,
            q,
            k,
            v,
            probs,
            ctx,
            attn_mask,
            ln2,
            h2,
            u,
            a,
            ff_mask,
        });
    }
    let (xf, lnf) = layer_norm(&x, &params.final_ln_g, &params.final_ln_b);

    let genre_cache = match (&params.genre_w, &params.genre_b, genre) {
        (Some(w), Some(b), Some(g)) => {
            let gv = ArrayView1::from(&g[..]);
            let z = gv.dot(w) + b;
            Some((gv.to_owned(), z))
        }
        _ => None,
    };

    let positions = input.target_positions();
    let mut logits = Vec::with_capacity(positions.len());
    let mut targets = Vec::with_capacity(positions.len());
    for &pos in &positions {
        let state = xf.row(pos).to_owned();
        let (z, mut feature) = match c.head {
            HeadVariant::Sequence => (None, state.clone()),
            HeadVariant::Pooled => {
                let w = params.pooler_w.as_ref().expect("pooled head has pooler");
                let b = params.pooler_b.as_ref().expect("pooled head has pooler");
                let z = state.dot(w) + b;
                let act = match c.pooler_activation {
                    PoolerActivation::Tanh => z.mapv(f64::tanh),
                    PoolerActivation::Identity => z.clone(),
                };
                (Some(z), act)
            }
            HeadVariant::GenreConcat => {
                let (_, gz) = genre_cache.as_ref().expect("checked genre vector");
                let r = gz.mapv(|v| v.max(0.0));
                let mut f = Array1::zeros(d + r.len());
                f.slice_mut(s![..d]).assign(&state);
                f.slice_mut(s![d..]).assign(&r);
                (None, f)
            }
        };
        let mask = dropout_vec(drng.as_mut(), p, feature.len());
        if let Some(m) = &mask {
            feature *= m;
        }
        logits.push(feature.dot(&params.classifier_w) + params.classifier_b);
        targets.push(TargetCache {
            position: pos,
            state,
            z,
            feature,
            mask,
        });
    }
    let probabilities = logits.iter().map(|&l| sigmoid(l)).collect();
    Ok((
        ForwardOutput {
            logits,
            probabilities,
            target_positions: positions,
            cls_position: input.cls_position,
            attention,
        },
        ForwardCache {
            ids,
            emb_mask,
            layers: layer_caches,
            lnf,
            targets,
            genre: genre_cache,
        },
    ))
}

/// Probabilities for every target of `input`.
pub fn forward(
    params: &Parameters,
    input: &EncodedInput,
    genre: Option<&GenreVector>,
    mode: Mode,
) -> Result<ForwardOutput> {
    run(params, input, genre, mode, false).map(|(o, _)| o)
}

/// As [`forward`], retaining attention weights of every layer and head.
pub fn forward_with_attention(
    params: &Parameters,
    input: &EncodedInput,
    genre: Option<&GenreVector>,
    mode: Mode,
) -> Result<ForwardOutput> {
    run(params, input, genre, mode, true).map(|(o, _)| o)
}

/// Forward pass that keeps what [`backward`] needs.
pub fn forward_train(
    params: &Parameters,
    input: &EncodedInput,
    genre: Option<&GenreVector>,
    mode: Mode,
) -> Result<(ForwardOutput, ForwardCache)> {
    run(params, input, genre, mode, false)
}

/// Accumulates into `grads` the gradient of a loss whose derivatives with
/// respect to the output logits are `dlogits`.
pub fn backward(params: &Parameters, cache: &ForwardCache, dlogits: &[f64], grads: &mut Parameters) {
    assert_eq!(dlogits.len(), cache.targets.len(), "one logit gradient per target");
    let c = &params.config;
    let d = c.width;
    let dh = c.head_width();
    let scale = 1.0 / (dh as f64).sqrt();
    let t = cache.ids.len();

    let mut dxf = Array2::<f64>::zeros((t, d));
    let mut dgenre_r: Option<Array1<f64>> = None;
    for (tc, &dl) in cache.targets.iter().zip(dlogits) {
        grads.classifier_b += dl;
        grads.classifier_w.scaled_add(dl, &tc.feature);
        let mut dfeat = &params.classifier_w * dl;
        if let Some(m) = &tc.mask {
            dfeat *= m;
        }
        let dstate = match c.head {
            HeadVariant::Sequence => dfeat,
            HeadVariant::Pooled => {
                let z = tc.z.as_ref().expect("pooled cache");
                let dz = match c.pooler_activation {
                    PoolerActivation::Tanh => dfeat * &z.mapv(|v| 1.0 - v.tanh().powi(2)),
                    PoolerActivation::Identity => dfeat,
                };
                let w = params.pooler_w.as_ref().expect("pooler");
                let gw = grads.pooler_w.as_mut().expect("pooler grads");
                for i in 0..d {
                    gw.row_mut(i).scaled_add(tc.state[i], &dz);
                }
                *grads.pooler_b.as_mut().expect("pooler grads") += &dz;
                w.dot(&dz)
            }
            HeadVariant::GenreConcat => {
                let dr = dfeat.slice(s![d..]).to_owned();
                match dgenre_r.as_mut() {
                    Some(acc) => *acc += &dr,
                    None => dgenre_r = Some(dr),
                }
                dfeat.slice(s![..d]).to_owned()
            }
        };
        let mut row = dxf.row_mut(tc.position);
        row += &dstate;
    }
    if let (Some(dr), Some((g, z))) = (dgenre_r, &cache.genre) {
        let dz = dr * &z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let gw = grads.genre_w.as_mut().expect("genre grads");
        for (i, &gi) in g.iter().enumerate() {
            gw.row_mut(i).scaled_add(gi, &dz);
        }
        *grads.genre_b.as_mut().expect("genre grads") += &dz;
    }

    let mut dx = layer_norm_backward(
        &dxf,
        &cache.lnf,
        &params.final_ln_g,
        &mut grads.final_ln_g,
        &mut grads.final_ln_b,
    );

    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let lp = &params.layers[li];
        let gl = &mut grads.layers[li];
        // feed-forward sublayer
        let mut df = dx.clone();
        if let Some(m) = &lc.ff_mask {
            df *= m;
        }
        gl.w2 += &lc.a.t().dot(&df);
        gl.b2 += &df.sum_axis(Axis(0));
        let da = df.dot(&lp.w2.t());
        let du = da * &lc.u.mapv(gelu_grad);
        gl.w1 += &lc.h2.t().dot(&du);
        gl.b1 += &du.sum_axis(Axis(0));
        let dh2 = du.dot(&lp.w1.t());
        dx += &layer_norm_backward(&dh2, &lc.ln2, &lp.ln2_g, &mut gl.ln2_g, &mut gl.ln2_b);

        // attention sublayer
        let mut d_o = dx.clone();
        if let Some(m) = &lc.attn_mask {
            d_o *= m;
        }
        gl.wo += &lc.ctx.t().dot(&d_o);
        gl.bo += &d_o.sum_axis(Axis(0));
        let dctx = d_o.dot(&lp.wo.t());
        let mut dq = Array2::zeros((t, d));
        let mut dk = Array2::zeros((t, d));
        let mut dv = Array2::zeros((t, d));
        for (h, pm) in lc.probs.iter().enumerate() {
            let cols = s![.., h * dh..(h + 1) * dh];
            let dctx_h = dctx.slice(cols);
            let dp = dctx_h.dot(&lc.v.slice(cols).t());
            dv.slice_mut(cols).assign(&pm.t().dot(&dctx_h));
            let mut ds = pm * &dp;
            for (mut row, prow) in ds.axis_iter_mut(Axis(0)).zip(pm.axis_iter(Axis(0))) {
                let dot = row.sum();
                row.zip_mut_with(&prow, |v, &pv| *v -= pv * dot);
            }
            ds *= scale;
            dq.slice_mut(cols).assign(&ds.dot(&lc.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&lc.q.slice(cols)));
        }
        let h1t = lc.h1.t();
        gl.wq += &h1t.dot(&dq);
        gl.wk += &h1t.dot(&dk);
        gl.wv += &h1t.dot(&dv);
        gl.bq += &dq.sum_axis(Axis(0));
        gl.bk += &dk.sum_axis(Axis(0));
        gl.bv += &dv.sum_axis(Axis(0));
        let dh1 = dq.dot(&lp.wq.t()) + dk.dot(&lp.wk.t()) + dv.dot(&lp.wv.t());
        dx += &layer_norm_backward(&dh1, &lc.ln1, &lp.ln1_g, &mut gl.ln1_g, &mut gl.ln1_b);
    }

    if let Some(m) = &cache.emb_mask {
        dx *= m;
    }
    for (i, &id) in cache.ids.iter().enumerate() {
        let row = dx.row(i);
        grads.token_emb.row_mut(id).scaled_add(1.0, &row);
        grads.position_emb.row_mut(i).scaled_add(1.0, &row);
    }
}
