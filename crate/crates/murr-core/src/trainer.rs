//! Training: contrastive loss over triples, L2 regularization of replayed
//! document representations toward their frozen anchors, the combined
//! session loss, Adam, replay buffer management and the five session
//! updating strategies.

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Triple};
use crate::encoder::{dot, EncoderDims, EncoderModel, ForwardPass};
use crate::io_util::{self, CountingReader};
use crate::{derive_seed, Error, Result, Scalar};

pub const REPLAY_MAGIC: &[u8; 8] = b"MURRRPL1";

/// A training triple with resolved texts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingTriple {
    pub query: String,
    pub pos: String,
    pub neg: String,
}

/// Resolve id triples against the corpus.
pub fn resolve_triples(corpus: &Corpus, triples: &[Triple]) -> Result<Vec<TrainingTriple>> {
    let texts: std::collections::BTreeMap<&str, &str> =
        corpus.documents.iter().map(|d| (d.doc_id.as_str(), d.text.as_str())).collect();
    let queries: std::collections::BTreeMap<&str, &str> =
        corpus.queries.iter().map(|q| (q.query_id.as_str(), q.text.as_str())).collect();
    triples
        .iter()
        .map(|t| {
            let query = queries
                .get(t.query_id.as_str())
                .ok_or_else(|| Error::Validation(format!("unknown query {}", t.query_id)))?;
            let pos = texts
                .get(t.pos_doc_id.as_str())
                .ok_or_else(|| Error::Validation(format!("unknown doc {}", t.pos_doc_id)))?;
            let neg = texts
                .get(t.neg_doc_id.as_str())
                .ok_or_else(|| Error::Validation(format!("unknown doc {}", t.neg_doc_id)))?;
            if t.pos_doc_id == t.neg_doc_id {
                return Err(Error::Validation(format!(
                    "triple for {} has pos == neg ({})",
                    t.query_id, t.pos_doc_id
                )));
            }
            Ok(TrainingTriple { query: query.to_string(), pos: pos.to_string(), neg: neg.to_string() })
        })
        .collect()
}

/// A retained triple plus the document vectors frozen by the model that
/// finished its origin session.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayItem<F: Scalar> {
    pub triple: TrainingTriple,
    pub origin_session: u32,
    pub pos_anchor: Vec<F>,
    pub neg_anchor: Vec<F>,
}

/// Union of the retained items of all past sessions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplaySet<F: Scalar> {
    pub items: Vec<ReplayItem<F>>,
}

impl<F: Scalar> ReplaySet<F> {
    pub fn new() -> Self {
        Self { items: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn extend(&mut self, items: Vec<ReplayItem<F>>) {
        self.items.extend(items);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(REPLAY_MAGIC)?;
        let d_out = self.items.first().map(|i| i.pos_anchor.len()).unwrap_or(0);
        io_util::write_u32(&mut w, self.items.len() as u32)?;
        io_util::write_u32(&mut w, d_out as u32)?;
        for item in &self.items {
            io_util::write_u32(&mut w, item.origin_session)?;
            io_util::write_string(&mut w, &item.triple.query)?;
            io_util::write_string(&mut w, &item.triple.pos)?;
            io_util::write_string(&mut w, &item.triple.neg)?;
            for &v in &item.pos_anchor {
                io_util::write_f64(&mut w, v.to_real())?;
            }
            for &v in &item.neg_anchor {
                io_util::write_f64(&mut w, v.to_real())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = CountingReader::new(BufReader::new(std::fs::File::open(path)?));
        r.read_magic(REPLAY_MAGIC)?;
        let count = r.read_u32()? as usize;
        let d_out = r.read_u32()? as usize;
        let mut items = Vec::with_capacity(count);
        for _ in 0..count {
            let origin_session = r.read_u32()?;
            let query = r.read_string()?;
            let pos = r.read_string()?;
            let neg = r.read_string()?;
            let pos_anchor = r.read_f64_vec(d_out)?.into_iter().map(F::from_real).collect();
            let neg_anchor = r.read_f64_vec(d_out)?.into_iter().map(F::from_real).collect();
            items.push(ReplayItem {
                triple: TrainingTriple { query, pos, neg },
                origin_session,
                pos_anchor,
                neg_anchor,
            });
        }
        Ok(Self { items })
    }
}

/// Simple random sample without replacement of `min(k, n)` triples, with
/// document anchors encoded by the just-trained session model.
pub fn sample_replay<F: Scalar>(
    triples: &[TrainingTriple],
    model: &EncoderModel<F>,
    origin_session: u32,
    k: usize,
    seed: u64,
) -> Vec<ReplayItem<F>> {
    let take = k.min(triples.len());
    if take == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, triples.len(), take).into_vec();
    idx.sort_unstable();
    idx.into_iter()
        .map(|i| {
            let t = &triples[i];
            ReplayItem {
                triple: t.clone(),
                origin_session,
                pos_anchor: model.encode(&t.pos),
                neg_anchor: model.encode(&t.neg),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Losses and gradients

/// Flat gradient vector aligned with `EncoderModel::theta`.
pub type Gradients<F> = Vec<F>;

fn softplus<F: Scalar>(x: F) -> F {
    // log(1 + e^x), computed without overflow for either sign
    if x > F::zero() {
        x + (F::one() + (-x).exp()).ln()
    } else {
        (F::one() + x.exp()).ln()
    }
}

fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Accumulate d(loss)/d(theta) given d(loss)/d(output) for one encoded text.
fn backprop_encode<F: Scalar>(
    model: &EncoderModel<F>,
    tokens: &[usize],
    fwd: &ForwardPass<F>,
    d_out: &[F],
    grad: &mut [F],
) {
    let d = model.dims;
    let w2_off = d.w2_range().start;
    let b2_off = d.b2_range().start;
    let w1_off = d.w1_range().start;
    let b1_off = d.b1_range().start;

    let mut d_hidden = vec![F::zero(); d.d_h];
    let w2 = model.w2();
    for (i, &g) in d_out.iter().enumerate() {
        grad[b2_off + i] = grad[b2_off + i] + g;
        let start = w2_off + i * d.d_h;
        let grow = &mut grad[start..start + d.d_h];
        let wrow = &w2[i * d.d_h..(i + 1) * d.d_h];
        for (((gj, &hj), dj), &wj) in
            grow.iter_mut().zip(&fwd.hidden).zip(&mut d_hidden).zip(wrow)
        {
            *gj = *gj + g * hj;
            *dj = *dj + wj * g;
        }
    }

    let mut d_pre = vec![F::zero(); d.d_h];
    for j in 0..d.d_h {
        d_pre[j] = d_hidden[j] * (F::one() - fwd.hidden[j] * fwd.hidden[j]);
    }

    let w1 = model.w1();
    let mut d_pooled = vec![F::zero(); d.d_emb];
    for (j, &g) in d_pre.iter().enumerate() {
        grad[b1_off + j] = grad[b1_off + j] + g;
        let start = w1_off + j * d.d_emb;
        let grow = &mut grad[start..start + d.d_emb];
        let wrow = &w1[j * d.d_emb..(j + 1) * d.d_emb];
        for (((gk, &pk), dk), &wk) in
            grow.iter_mut().zip(&fwd.pooled).zip(&mut d_pooled).zip(wrow)
        {
            *gk = *gk + g * pk;
            *dk = *dk + wk * g;
        }
    }

    if !tokens.is_empty() {
        let inv = F::from_real(1.0 / tokens.len() as f64);
        for &t in tokens {
            let row = t * d.d_emb;
            let grow = &mut grad[row..row + d.d_emb];
            for (gk, &pk) in grow.iter_mut().zip(&d_pooled) {
                *gk = *gk + pk * inv;
            }
        }
    }
}

/// A triple pre-tokenized once so training steps skip string work.
struct TokTriple {
    q: Vec<usize>,
    p: Vec<usize>,
    n: Vec<usize>,
}

impl TokTriple {
    fn new<F: Scalar>(model: &EncoderModel<F>, t: &TrainingTriple) -> Self {
        Self { q: model.tokenize(&t.query), p: model.tokenize(&t.pos), n: model.tokenize(&t.neg) }
    }
}

fn contrastive_into<F: Scalar>(
    model: &EncoderModel<F>,
    triples: &[&TokTriple],
    grad: &mut [F],
) -> F {
    let inv = F::from_real(1.0 / triples.len() as f64);
    let mut loss = F::zero();
    for t in triples {
        let (q_tok, p_tok, n_tok) = (&t.q, &t.p, &t.n);
        let q = model.forward(q_tok);
        let p = model.forward(p_tok);
        let n = model.forward(n_tok);
        let s_pos = dot(&q.output, &p.output);
        let s_neg = dot(&q.output, &n.output);
        let margin = s_neg - s_pos;
        loss = loss + softplus(margin) * inv;
        let g = sigmoid(margin) * inv;
        let dq: Vec<F> = n.output.iter().zip(&p.output).map(|(&nv, &pv)| g * (nv - pv)).collect();
        let dp: Vec<F> = q.output.iter().map(|&qv| -g * qv).collect();
        let dn: Vec<F> = q.output.iter().map(|&qv| g * qv).collect();
        backprop_encode(model, q_tok, &q, &dq, grad);
        backprop_encode(model, p_tok, &p, &dp, grad);
        backprop_encode(model, n_tok, &n, &dn, grad);
    }
    loss
}

/// Mean softplus(f(q,d-) - f(q,d+)) over the batch, with analytic gradients.
pub fn contrastive_loss<F: Scalar>(
    model: &EncoderModel<F>,
    batch: &[TrainingTriple],
) -> (F, Gradients<F>) {
    assert!(!batch.is_empty(), "contrastive_loss: empty batch");
    let mut grad = vec![F::zero(); model.dims.n_params()];
    let toks: Vec<TokTriple> = batch.iter().map(|t| TokTriple::new(model, t)).collect();
    let refs: Vec<&TokTriple> = toks.iter().collect();
    let loss = contrastive_into(model, &refs, &mut grad);
    (loss, grad)
}

/// A replay item with the two document texts pre-tokenized.
struct TokReplay<'a, F: Scalar> {
    pos_tok: Vec<usize>,
    neg_tok: Vec<usize>,
    pos_anchor: &'a [F],
    neg_anchor: &'a [F],
}

impl<'a, F: Scalar> TokReplay<'a, F> {
    fn new(model: &EncoderModel<F>, item: &'a ReplayItem<F>) -> Self {
        Self {
            pos_tok: model.tokenize(&item.triple.pos),
            neg_tok: model.tokenize(&item.triple.neg),
            pos_anchor: &item.pos_anchor,
            neg_anchor: &item.neg_anchor,
        }
    }
}

fn regularization_into<F: Scalar>(
    model: &EncoderModel<F>,
    items: &[&TokReplay<'_, F>],
    scale: F,
    grad: &mut [F],
) -> F {
    // 1/(2|batch|) sum of unsquared L2 distances to the anchors; the
    // gradient at a zero difference is the zero subgradient.
    let inv = F::from_real(1.0 / (2.0 * items.len() as f64));
    let mut loss = F::zero();
    for item in items {
        for (tokens, anchor) in
            [(&item.pos_tok, item.pos_anchor), (&item.neg_tok, item.neg_anchor)]
        {
            let fwd = model.forward(tokens);
            let diff: Vec<F> = fwd.output.iter().zip(anchor).map(|(&a, &b)| a - b).collect();
            let norm = dot(&diff, &diff).sqrt();
            loss = loss + norm * inv;
            if norm > F::zero() {
                let coef = scale * inv / norm;
                let dv: Vec<F> = diff.iter().map(|&x| x * coef).collect();
                backprop_encode(model, tokens, &fwd, &dv, grad);
            }
        }
    }
    loss
}

/// Mean anchored L2 drift of the replayed document representations, with
/// analytic gradients.
pub fn regularization_loss<F: Scalar>(
    model: &EncoderModel<F>,
    batch: &[ReplayItem<F>],
) -> (F, Gradients<F>) {
    assert!(!batch.is_empty(), "regularization_loss: empty batch");
    let mut grad = vec![F::zero(); model.dims.n_params()];
    let toks: Vec<TokReplay<'_, F>> = batch.iter().map(|i| TokReplay::new(model, i)).collect();
    let refs: Vec<&TokReplay<'_, F>> = toks.iter().collect();
    let loss = regularization_into(model, &refs, F::one(), &mut grad);
    (loss, grad)
}

/// Combined session loss: contrastive over session and replay triples
/// together, plus `alpha` times the regularization over the replay items.
pub fn total_loss<F: Scalar>(
    model: &EncoderModel<F>,
    session_batch: &[TrainingTriple],
    replay_batch: &[ReplayItem<F>],
    alpha: F,
) -> (F, Gradients<F>) {
    let mut grad = vec![F::zero(); model.dims.n_params()];
    let mut toks: Vec<TokTriple> =
        session_batch.iter().map(|t| TokTriple::new(model, t)).collect();
    toks.extend(replay_batch.iter().map(|r| TokTriple::new(model, &r.triple)));
    assert!(!toks.is_empty(), "total_loss: empty batch");
    let refs: Vec<&TokTriple> = toks.iter().collect();
    let mut loss = contrastive_into(model, &refs, &mut grad);
    if !replay_batch.is_empty() && alpha > F::zero() {
        let rtoks: Vec<TokReplay<'_, F>> =
            replay_batch.iter().map(|i| TokReplay::new(model, i)).collect();
        let rrefs: Vec<&TokReplay<'_, F>> = rtoks.iter().collect();
        loss = loss + alpha * regularization_into(model, &rrefs, alpha, &mut grad);
    }
    (loss, grad)
}

// ---------------------------------------------------------------------------
// Adam

#[derive(Debug, Clone)]
pub struct AdamState<F: Scalar> {
    m: Vec<F>,
    v: Vec<F>,
    t: u64,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(n_params: usize, beta1: F, beta2: F, epsilon: F) -> Self {
        Self { m: vec![F::zero(); n_params], v: vec![F::zero(); n_params], t: 0, beta1, beta2, epsilon }
    }
}

/// One Adam update with bias correction. Non-finite gradients abort with a
/// diagnostic so the session can be reported as failed.
pub fn adam_step<F: Scalar>(
    state: &mut AdamState<F>,
    theta: &mut [F],
    grad: &[F],
    lr: F,
) -> Result<()> {
    assert_eq!(theta.len(), state.m.len(), "adam state does not match parameters");
    assert_eq!(theta.len(), grad.len());
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Training(format!(
            "non-finite gradient at parameter {i} on step {}",
            state.t + 1
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = F::one() - state.beta1.powi(t);
    let bc2 = F::one() - state.beta2.powi(t);
    for i in 0..theta.len() {
        let g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (F::one() - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (F::one() - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        theta[i] = theta[i] - lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Strategies and session training

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SameModel,
    LmNoReplay,
    CfNoReplay,
    MurrLm,
    MurrCf,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::SameModel,
        Strategy::LmNoReplay,
        Strategy::CfNoReplay,
        Strategy::MurrLm,
        Strategy::MurrCf,
    ];

    pub fn ident(&self) -> &'static str {
        match self {
            Strategy::SameModel => "same_model",
            Strategy::LmNoReplay => "lm_no_replay",
            Strategy::CfNoReplay => "cf_no_replay",
            Strategy::MurrLm => "murr_lm",
            Strategy::MurrCf => "murr_cf",
        }
    }

    /// Whether replay items participate in training after session 0.
    pub fn uses_replay(&self) -> bool {
        matches!(self, Strategy::MurrLm | Strategy::MurrCf)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.ident())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "same_model" => Ok(Strategy::SameModel),
            "lm_no_replay" => Ok(Strategy::LmNoReplay),
            "cf_no_replay" => Ok(Strategy::CfNoReplay),
            "murr_lm" => Ok(Strategy::MurrLm),
            "murr_cf" => Ok(Strategy::MurrCf),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?} (expected one of same_model, lm_no_replay, cf_no_replay, murr_lm, murr_cf)"
            ))),
        }
    }
}

/// Reference hyperparameters used by the original full-scale experiments,
/// recorded for comparison; the desk-scale defaults below are tuned for the
/// small encoder.
pub mod reference_scale {
    pub const STEPS: usize = 20_000;
    pub const BATCH_SIZE: usize = 256;
    pub const LEARNING_RATE: f64 = 3e-6;
    pub const REPLAY_K: usize = 200;
    pub const ALPHA: f64 = 0.01;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Regularization strength.
    pub alpha: f64,
    /// Replay triples retained per session.
    pub replay_k: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            alpha: 0.01,
            replay_k: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size: must be >= 1".into()));
        }
        if self.alpha < 0.0 {
            return Err(Error::Config("alpha: must be >= 0".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate: must be > 0".into()));
        }
        Ok(())
    }
}

/// Train the session-`session` model under `strategy`.
///
/// Initialization: `base_model` for session 0 and for the LM strategies,
/// the previous session's model otherwise. `same_model` past session 0
/// returns the previous model untouched. Batches are drawn by shuffling the
/// union of session triples and (for the MURR strategies) replay items; the
/// regularization term of a batch covers exactly the replay items present
/// in it.
pub fn train_session<F: Scalar>(
    strategy: Strategy,
    session: usize,
    prev_model: &EncoderModel<F>,
    base_model: &EncoderModel<F>,
    session_triples: &[TrainingTriple],
    replay_set: &ReplaySet<F>,
    config: &TrainConfig,
) -> Result<EncoderModel<F>> {
    config.validate()?;
    if strategy == Strategy::SameModel && session > 0 {
        return Ok(prev_model.clone());
    }
    let init = if session == 0 {
        base_model
    } else {
        match strategy {
            Strategy::LmNoReplay | Strategy::MurrLm => base_model,
            _ => prev_model,
        }
    };
    let mut model = init.clone();
    model.version = format!("{}-s{session}", strategy.ident());

    let use_replay = session > 0 && strategy.uses_replay();
    let replay: &[ReplayItem<F>] = if use_replay { &replay_set.items } else { &[] };
    let n_items = session_triples.len() + replay.len();
    if config.steps == 0 || n_items == 0 {
        if n_items == 0 {
            log::warn!("session {session}: no training data; returning initialization");
        }
        return Ok(model);
    }

    let alpha = F::from_real(config.alpha);
    let lr = F::from_real(config.learning_rate);
    let mut adam = AdamState::new(
        model.dims.n_params(),
        F::from_real(config.adam_beta1),
        F::from_real(config.adam_beta2),
        F::from_real(config.adam_epsilon),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n_items).collect();
    let mut cursor = n_items; // forces a shuffle before the first batch

    let use_reg = use_replay && !replay.is_empty() && config.alpha > 0.0;
    let reg_batch_size = config.batch_size.min(replay.len());
    // tokenization is model-independent, so it can be hoisted out of the loop
    let session_toks: Vec<TokTriple> =
        session_triples.iter().map(|t| TokTriple::new(&model, t)).collect();
    let replay_toks: Vec<TokTriple> =
        replay.iter().map(|r| TokTriple::new(&model, &r.triple)).collect();
    let replay_reg_toks: Vec<TokReplay<'_, F>> =
        replay.iter().map(|r| TokReplay::new(&model, r)).collect();
    for step in 0..config.steps {
        // contrastive batch: epoch-shuffled walk over session ∪ replay triples
        let mut con_batch: Vec<&TokTriple> = Vec::new();
        for _ in 0..config.batch_size.min(n_items) {
            if cursor == n_items {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let idx = order[cursor];
            cursor += 1;
            if idx < session_toks.len() {
                con_batch.push(&session_toks[idx]);
            } else {
                con_batch.push(&replay_toks[idx - session_toks.len()]);
            }
        }
        let mut grad = vec![F::zero(); model.dims.n_params()];
        let loss_c = contrastive_into(&model, &con_batch, &mut grad);
        // regularization batch: drawn fresh every step, so the anchor pull
        // stays present even when replay items are a small fraction of the
        // union; averaging inside the batch matches the full-set objective
        // in expectation
        let mut loss_r = F::zero();
        if use_reg {
            let picks = rand::seq::index::sample(&mut rng, replay.len(), reg_batch_size);
            let reg_batch: Vec<&TokReplay<'_, F>> =
                picks.iter().map(|i| &replay_reg_toks[i]).collect();
            loss_r = regularization_into(&model, &reg_batch, alpha, &mut grad);
        }
        if step % 200 == 0 {
            log::debug!(
                "session {session} ({strategy}) step {step}: contrastive {loss_c} anchored drift {loss_r}"
            );
        }
        adam_step(&mut adam, &mut model.theta, &grad, lr)
            .map_err(|e| Error::Training(format!("session {session} ({strategy}): {e}")))?;
    }
    Ok(model)
}

/// Train the frozen base checkpoint from a fixed-seed random initialization
/// on a mixed-domain triple set; the desk-scale analog of starting from a
/// retrieval-prepared language model.
pub fn pretrain_base<F: Scalar>(
    dims: EncoderDims,
    triples: &[TrainingTriple],
    config: &TrainConfig,
) -> Result<EncoderModel<F>> {
    let init = EncoderModel::init(dims, "base", derive_seed(config.seed, 0xba5e));
    train_session(
        Strategy::CfNoReplay,
        0,
        &init,
        &init,
        triples,
        &ReplaySet::new(),
        config,
    )
    .map(|mut m| {
        m.version = "base".into();
        m
    })
}
