//! Small tied dual encoder: hashed bag-of-tokens embedding, one tanh hidden
//! layer, linear projection into the retrieval space. Queries and documents
//! share the same parameters and are scored by dot product.

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io_util::{self, CountingReader};
use crate::{Result, Scalar};

pub const MODEL_MAGIC: &[u8; 8] = b"MURRMDL1";

/// FNV-1a 64-bit constants; tokenization must be bit-identical across
/// platforms and implementations.
pub const HASH_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const HASH_PRIME: u64 = 0x0000_0100_0000_01b3;

fn hash_token(token: &str) -> u64 {
    let mut h = HASH_OFFSET_BASIS;
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(HASH_PRIME);
    }
    h
}

/// Lowercase, split on non-alphanumeric runs, hash each token into `[0, vocab)`.
pub fn tokenize(text: &str, vocab: usize) -> Vec<usize> {
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| (hash_token(t) % vocab as u64) as usize)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderDims {
    pub vocab: usize,
    pub d_emb: usize,
    pub d_h: usize,
    pub d_out: usize,
}

impl Default for EncoderDims {
    fn default() -> Self {
        Self { vocab: 4096, d_emb: 64, d_h: 64, d_out: 32 }
    }
}

impl EncoderDims {
    pub fn n_params(&self) -> usize {
        self.vocab * self.d_emb + self.d_h * self.d_emb + self.d_h + self.d_out * self.d_h + self.d_out
    }

    // flat parameter layout: Emb, W1, b1, W2, b2
    pub fn emb_range(&self) -> std::ops::Range<usize> {
        0..self.vocab * self.d_emb
    }
    pub fn w1_range(&self) -> std::ops::Range<usize> {
        let start = self.emb_range().end;
        start..start + self.d_h * self.d_emb
    }
    pub fn b1_range(&self) -> std::ops::Range<usize> {
        let start = self.w1_range().end;
        start..start + self.d_h
    }
    pub fn w2_range(&self) -> std::ops::Range<usize> {
        let start = self.b1_range().end;
        start..start + self.d_out * self.d_h
    }
    pub fn b2_range(&self) -> std::ops::Range<usize> {
        let start = self.w2_range().end;
        start..start + self.d_out
    }
}

/// The dual encoder. All parameters live in one flat vector in the layout
/// Emb | W1 | b1 | W2 | b2, which keeps the optimizer and the
/// finite-difference checks simple.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel<F: Scalar> {
    pub version: String,
    pub dims: EncoderDims,
    pub theta: Vec<F>,
}

impl<F: Scalar> EncoderModel<F> {
    /// Random initialization: uniform in ±1/sqrt(fan_in) per tensor.
    pub fn init(dims: EncoderDims, version: impl Into<String>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![F::zero(); dims.n_params()];
        let mut fill = |range: std::ops::Range<usize>, scale: f64, theta: &mut Vec<F>| {
            for v in &mut theta[range] {
                *v = F::from_real(rng.gen_range(-scale..scale));
            }
        };
        fill(dims.emb_range(), 1.0 / (dims.d_emb as f64).sqrt(), &mut theta);
        fill(dims.w1_range(), 1.0 / (dims.d_emb as f64).sqrt(), &mut theta);
        fill(dims.w2_range(), 1.0 / (dims.d_h as f64).sqrt(), &mut theta);
        // biases start at zero
        Self { version: version.into(), dims, theta }
    }

    pub fn emb(&self) -> &[F] {
        &self.theta[self.dims.emb_range()]
    }
    pub fn w1(&self) -> &[F] {
        &self.theta[self.dims.w1_range()]
    }
    pub fn b1(&self) -> &[F] {
        &self.theta[self.dims.b1_range()]
    }
    pub fn w2(&self) -> &[F] {
        &self.theta[self.dims.w2_range()]
    }
    pub fn b2(&self) -> &[F] {
        &self.theta[self.dims.b2_range()]
    }

    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        tokenize(text, self.dims.vocab)
    }

    pub fn encode(&self, text: &str) -> Vec<F> {
        self.encode_tokens(&self.tokenize(text))
    }

    pub fn encode_tokens(&self, tokens: &[usize]) -> Vec<F> {
        self.forward(tokens).output
    }

    /// Forward pass keeping the intermediates the backward pass needs.
    pub fn forward(&self, tokens: &[usize]) -> ForwardPass<F> {
        let d = self.dims;
        let emb = self.emb();
        let mut x = vec![F::zero(); d.d_emb];
        if !tokens.is_empty() {
            for &t in tokens {
                debug_assert!(t < d.vocab);
                let row = &emb[t * d.d_emb..(t + 1) * d.d_emb];
                for (xi, &e) in x.iter_mut().zip(row) {
                    *xi = *xi + e;
                }
            }
            let inv = F::from_real(1.0 / tokens.len() as f64);
            for xi in &mut x {
                *xi = *xi * inv;
            }
        }
        let w1 = self.w1();
        let b1 = self.b1();
        let mut hidden = vec![F::zero(); d.d_h];
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &w1[j * d.d_emb..(j + 1) * d.d_emb];
            *h = (b1[j] + dot(row, &x)).tanh();
        }
        let w2 = self.w2();
        let b2 = self.b2();
        let mut output = vec![F::zero(); d.d_out];
        for (i, o) in output.iter_mut().enumerate() {
            let row = &w2[i * d.d_h..(i + 1) * d.d_h];
            *o = b2[i] + dot(row, &hidden);
        }
        ForwardPass { pooled: x, hidden, output }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(MODEL_MAGIC)?;
        io_util::write_string(&mut w, &self.version)?;
        io_util::write_u32(&mut w, self.dims.vocab as u32)?;
        io_util::write_u32(&mut w, self.dims.d_emb as u32)?;
        io_util::write_u32(&mut w, self.dims.d_h as u32)?;
        io_util::write_u32(&mut w, self.dims.d_out as u32)?;
        for &v in &self.theta {
            io_util::write_f64(&mut w, v.to_real())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = CountingReader::new(BufReader::new(std::fs::File::open(path)?));
        r.read_magic(MODEL_MAGIC)?;
        let version = r.read_string()?;
        let dims = EncoderDims {
            vocab: r.read_u32()? as usize,
            d_emb: r.read_u32()? as usize,
            d_h: r.read_u32()? as usize,
            d_out: r.read_u32()? as usize,
        };
        if dims.vocab == 0 || dims.d_emb == 0 || dims.d_h == 0 || dims.d_out == 0 {
            return Err(r.format_err("zero dimension in header"));
        }
        let raw = r.read_f64_vec(dims.n_params())?;
        let theta = raw.into_iter().map(F::from_real).collect();
        Ok(Self { version, dims, theta })
    }
}

pub struct ForwardPass<F> {
    /// Mean of embedding rows over the token ids.
    pub pooled: Vec<F>,
    /// tanh(W1 x + b1)
    pub hidden: Vec<F>,
    /// W2 h + b2
    pub output: Vec<F>,
}

/// Dot-product similarity between a query vector and a document vector.
pub fn similarity<F: Scalar>(q: &[F], d: &[F]) -> F {
    assert_eq!(q.len(), d.len(), "similarity: dimension mismatch {} vs {}", q.len(), d.len());
    dot(q, d)
}

/// Four-lane accumulation: breaks the floating-point dependency chain so the
/// loop pipelines; scoring and the training hot path both sit on this.
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = [F::zero(); 4];
    let mut chunks_a = a.chunks_exact(4);
    let mut chunks_b = b.chunks_exact(4);
    for (ca, cb) in chunks_a.by_ref().zip(chunks_b.by_ref()) {
        for l in 0..4 {
            acc[l] = acc[l] + ca[l] * cb[l];
        }
    }
    let mut tail = F::zero();
    for (&x, &y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        tail = tail + x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_normalizes_case_and_punctuation() {
        assert_eq!(tokenize("Hello, world", 4096), tokenize("hello world", 4096));
        assert_eq!(tokenize("Hello, world", 4096).len(), 2);
        assert!(tokenize("", 4096).is_empty());
        assert!(tokenize("  ,.;  ", 4096).is_empty());
    }

    #[test]
    fn token_ids_bounded_by_vocab() {
        for text in ["a b c", "the quick brown fox", "числа 123 mixed"] {
            for v in [7usize, 64, 4096] {
                assert!(tokenize(text, v).into_iter().all(|t| t < v));
            }
        }
    }

    #[test]
    fn hash_is_pinned() {
        // frozen reference values for the committed FNV-1a constants
        assert_eq!(hash_token(""), HASH_OFFSET_BASIS);
        assert_eq!(hash_token("a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn encode_is_pure_and_sized() {
        let model = EncoderModel::<f64>::init(EncoderDims::default(), "t", 0);
        let a = model.encode("some query text");
        let b = model.encode("some query text");
        assert_eq!(a, b);
        assert_eq!(a.len(), 32);
    }

    #[test]
    fn empty_text_uses_zero_pooled_input() {
        let model = EncoderModel::<f64>::init(EncoderDims::default(), "t", 1);
        let got = model.encode("");
        let d = model.dims;
        // expected: W2 tanh(b1) + b2
        let h: Vec<f64> = model.b1().iter().map(|b| b.tanh()).collect();
        let mut expect = model.b2().to_vec();
        for i in 0..d.d_out {
            for j in 0..d.d_h {
                expect[i] += model.w2()[i * d.d_h + j] * h[j];
            }
        }
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn similarity_hand_values() {
        assert_eq!(similarity(&[1.0, 0.0], &[1.0, 0.0]), 1.0);
        assert_eq!(similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(similarity(&[1.0, 2.0], &[3.0, -1.0]), 1.0);
    }

    #[test]
    fn similarity_is_homogeneous() {
        let model = EncoderModel::<f64>::init(EncoderDims::default(), "t", 3);
        let q = model.encode("alpha beta gamma");
        let d = model.encode("delta epsilon");
        let a = 3.7;
        let aq: Vec<f64> = q.iter().map(|v| a * v).collect();
        let lhs = similarity(&aq, &d);
        let rhs = a * similarity(&q, &d);
        assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let model = EncoderModel::<f64>::init(
            EncoderDims { vocab: 64, d_emb: 8, d_h: 6, d_out: 4 },
            "murr_cf-s2",
            9,
        );
        model.save(&path).unwrap();
        let loaded = EncoderModel::<f64>::load(&path).unwrap();
        assert_eq!(model, loaded);

        // wrong magic is rejected with an offset
        std::fs::write(&path, b"NOTMAGIC rest").unwrap();
        assert!(EncoderModel::<f64>::load(&path).is_err());

        // truncation is a format error
        model.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        let err = EncoderModel::<f64>::load(&path).unwrap_err();
        assert!(err.to_string().contains("offset"), "{err}");
    }

    #[test]
    fn f32_instantiation_tracks_f64() {
        let dims = EncoderDims { vocab: 32, d_emb: 4, d_h: 4, d_out: 3 };
        let m64 = EncoderModel::<f64>::init(dims, "t", 5);
        let m32 = EncoderModel::<f32> {
            version: "t".into(),
            dims,
            theta: m64.theta.iter().map(|&v| v as f32).collect(),
        };
        let v64 = m64.encode("shared scalar kernel");
        let v32 = m32.encode("shared scalar kernel");
        for (a, b) in v64.iter().zip(&v32) {
            assert!((a - *b as f64).abs() < 1e-5);
        }
    }
}
