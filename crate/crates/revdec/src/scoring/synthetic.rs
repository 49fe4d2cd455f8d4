//! Seeded synthetic posterior source.
//!
//! Rows are produced by a counter-based generator, so every (frame, context)
//! query is a pure function of the spec: no mutable state, no query-order
//! dependence, bit-identical across runs and threads.
//!
//! Row recipe, all in the scalar type `S`:
//!
//! 1. key = mix(mix(mix(seed ^ ROW_SALT) ^ frame) ^ ctx_hash) ^ cum_salt[frame]
//!    where `ctx_hash` folds the last `context_order` tokens and `cum_salt`
//!    accumulates instability swaps (below).
//! 2. For token j, draw u_j in (0,1) from mix(key ^ j), set e_j = -ln u_j
//!    (a positive exponential variate) and w_j = e_j ^ concentration.
//! 3. Normalize w to a distribution, then move `blank_bias` of the total
//!    mass onto the blank entry: p' = (1 - bias) * p + bias * [j == blank].
//! 4. Renormalize defensively and return ln p'.
//!
//! Instability: each frame f flips an independent Bernoulli(instability)
//! coin keyed on (seed, f); on success a per-frame salt is XORed into the
//! keys of every frame >= f, discontinuously re-ranking later rows. That is
//! the mechanism that makes a streaming top-1 change its mind.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{self, Scalar};
use crate::vocab::{FrameIndex, TokenId, Vocabulary};

use super::{context_tail, ScoringError, ScoringSource};

const ROW_SALT: u64 = 0x9e6c_63d0_876a_68ee;
const SWAP_EVENT_SALT: u64 = 0xa076_1d64_78bd_642f;
const SWAP_KEY_SALT: u64 = 0xe703_7ed1_a0b4_28db;
const CTX_HASH_SEED: u64 = 0x243f_6a88_85a3_08d3;

/// splitmix64 finalizer: the single mixing primitive behind every draw.
fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw strictly inside (0, 1): 53 high bits, offset by half an ulp.
fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

fn context_hash(tail: &[TokenId]) -> u64 {
    let mut h = CTX_HASH_SEED;
    for &t in tail {
        h = mix(h ^ (t as u64).wrapping_add(1));
    }
    h
}

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticSpecError {
    #[error("vocab_size must be >= 2, got {0}")]
    VocabTooSmall(usize),
    #[error("instability must be in [0,1], got {0}")]
    InstabilityOutOfRange(f64),
    #[error("blank_bias must be in [0,1], got {0}")]
    BlankBiasOutOfRange(f64),
    #[error("concentration must be in [0,100], got {0}")]
    ConcentrationOutOfRange(f64),
}

/// Full description of a synthetic stream. Equal specs produce bit-identical
/// sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSourceSpec {
    pub seed: u64,
    pub vocab_size: usize,
    pub frame_count: usize,
    /// Number of trailing context tokens the distribution conditions on.
    pub context_order: usize,
    /// Peakiness of each row; 0 disables shaping and yields uniform rows.
    pub concentration: f64,
    /// Per-frame probability of a ranking swap affecting all later frames.
    pub instability: f64,
    /// Fraction of each row's mass moved onto the blank token.
    pub blank_bias: f64,
}

impl Default for SyntheticSourceSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            vocab_size: 6,
            frame_count: 8,
            context_order: 2,
            concentration: 5.0,
            instability: 0.3,
            blank_bias: 0.5,
        }
    }
}

impl SyntheticSourceSpec {
    pub fn validate(&self) -> Result<(), SyntheticSpecError> {
        if self.vocab_size < 2 {
            return Err(SyntheticSpecError::VocabTooSmall(self.vocab_size));
        }
        if !(0.0..=1.0).contains(&self.instability) || self.instability.is_nan() {
            return Err(SyntheticSpecError::InstabilityOutOfRange(self.instability));
        }
        if !(0.0..=1.0).contains(&self.blank_bias) || self.blank_bias.is_nan() {
            return Err(SyntheticSpecError::BlankBiasOutOfRange(self.blank_bias));
        }
        if !(0.0..=100.0).contains(&self.concentration) || self.concentration.is_nan() {
            return Err(SyntheticSpecError::ConcentrationOutOfRange(self.concentration));
        }
        Ok(())
    }
}

/// Deterministic synthetic posterior stream.
#[derive(Debug, Clone)]
pub struct SyntheticSource<S> {
    spec: SyntheticSourceSpec,
    vocab: Vocabulary,
    /// cum_salt[f] = XOR of the salts of all swap events at frames <= f.
    cum_salt: Vec<u64>,
    _marker: std::marker::PhantomData<S>,
}

impl<S: Scalar> SyntheticSource<S> {
    pub fn new(spec: SyntheticSourceSpec) -> Result<Self, SyntheticSpecError> {
        spec.validate()?;
        let vocab = Vocabulary::synthetic(spec.vocab_size);
        let mut cum_salt = vec![0u64; spec.frame_count + 1];
        for f in 1..=spec.frame_count {
            let coin = unit_open(mix(spec.seed ^ SWAP_EVENT_SALT ^ f as u64));
            let salt = if coin < spec.instability {
                mix(spec.seed ^ SWAP_KEY_SALT ^ f as u64)
            } else {
                0
            };
            cum_salt[f] = cum_salt[f - 1] ^ salt;
        }
        Ok(Self { spec, vocab, cum_salt, _marker: std::marker::PhantomData })
    }

    pub fn spec(&self) -> &SyntheticSourceSpec {
        &self.spec
    }

    /// Frames at which a ranking swap fires. Exposed for tests and tooling.
    pub fn swap_frames(&self) -> Vec<FrameIndex> {
        (1..=self.spec.frame_count)
            .filter(|&f| self.cum_salt[f] != self.cum_salt[f - 1])
            .collect()
    }

    fn row(&self, frame: FrameIndex, tail: &[TokenId]) -> Vec<S> {
        let n = self.spec.vocab_size;
        let key = mix(mix(mix(self.spec.seed ^ ROW_SALT) ^ frame as u64) ^ context_hash(tail))
            ^ self.cum_salt[frame];

        let conc: S = scalar::from_f64(self.spec.concentration);
        let mut weights: Vec<S> = Vec::with_capacity(n);
        let mut total = S::zero();
        for j in 0..n {
            let u: S = scalar::from_f64(unit_open(mix(key ^ j as u64)));
            let w = (-u.ln()).powf(conc);
            total = total + w;
            weights.push(w);
        }

        let bias: S = scalar::from_f64(self.spec.blank_bias);
        let keep = S::one() - bias;
        let blank = self.vocab.blank_id() as usize;
        let mut sum = S::zero();
        for (j, w) in weights.iter_mut().enumerate() {
            let mut p = keep * (*w / total);
            if j == blank {
                p = p + bias;
            }
            *w = p;
            sum = sum + p;
        }
        weights.iter().map(|&p| (p / sum).ln()).collect()
    }
}

impl<S: Scalar> ScoringSource<S> for SyntheticSource<S> {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn frame_count(&self) -> usize {
        self.spec.frame_count
    }

    fn context_order(&self) -> usize {
        self.spec.context_order
    }

    fn score_next(&self, frame: FrameIndex, context: &[TokenId]) -> Result<Vec<S>, ScoringError> {
        if frame == 0 || frame > self.spec.frame_count {
            return Err(ScoringError::FrameOutOfRange { frame, frame_count: self.spec.frame_count });
        }
        debug_assert!(
            !context.contains(&self.vocab.blank_id()),
            "context must not contain the blank token"
        );
        Ok(self.row(frame, context_tail(context, self.spec.context_order)))
    }
}
