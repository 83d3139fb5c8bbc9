//! Binary symmetric channel: error-pattern sampling, Eb/N0 mapping, and
//! reproducible random streams.
//!
//! Streams are ChaCha8 keyed by `seed` with the ChaCha stream counter set to
//! `stream_id`. Error word `j` of a stream always occupies the keystream
//! window starting at 32-bit word `j * 2n` (one `u64` per bit), so any word can
//! be regenerated on its own and the partition of word indices across workers
//! never changes the sampled patterns.

use libm::erfc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::BitWord;

/// Name recorded in reports for the generator construction above.
pub const GENERATOR: &str = "chacha8-word-indexed";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("probability {0} outside the open interval (0, 1)")]
    Probability(f64),
    #[error("code rate {0} outside (0, 1]")]
    Rate(f64),
    #[error("split count must be at least 1")]
    EmptySplit,
}

/// Independent Bernoulli flips on `n` positions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BernoulliParams {
    n: usize,
    prob: f64,
}

impl BernoulliParams {
    pub fn new(n: usize, prob: f64) -> Result<Self, ChannelError> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(ChannelError::Probability(prob));
        }
        Ok(BernoulliParams { n, prob })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }
}

/// Draws one error pattern: bit `i` is set iff the `i`-th uniform draw is below `prob`.
pub fn sample_error<R: Rng + ?Sized>(params: &BernoulliParams, rng: &mut R) -> BitWord {
    let mut w = BitWord::zeros(params.n);
    for (li, limb) in w.limbs_mut().iter_mut().enumerate() {
        let lo = li * 64;
        let hi = (lo + 64).min(params.n);
        for b in 0..hi - lo {
            if rng.random::<f64>() < params.prob {
                *limb |= 1 << b;
            }
        }
    }
    w
}

/// A keyed, splittable random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    base: ChaCha8Rng,
    next_word: u64,
}

impl PartialEq for RandomStream {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.stream_id == other.stream_id
            && self.next_word == other.next_word
    }
}

/// Serializable identity of a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamInfo {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(seed);
        base.set_stream(stream_id);
        RandomStream {
            seed,
            stream_id,
            base,
            next_word: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn info(&self) -> StreamInfo {
        StreamInfo {
            seed: self.seed,
            stream_id: self.stream_id,
        }
    }

    /// Index of the next word `sample_error` will return.
    pub fn position(&self) -> u64 {
        self.next_word
    }

    /// Substreams with ids `stream_id + 1 ..= stream_id + count`.
    pub fn split(&self, count: usize) -> Result<Vec<RandomStream>, ChannelError> {
        if count == 0 {
            return Err(ChannelError::EmptySplit);
        }
        Ok((1..=count as u64)
            .map(|j| RandomStream::new(self.seed, self.stream_id + j))
            .collect())
    }

    /// Generator positioned at the start of word `index` for length-`n` words.
    fn rng_at(&self, index: u64, n: usize) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_word_pos(index as u128 * 2 * n as u128);
        rng
    }

    /// Word `index` of this stream, independent of the cursor.
    pub fn word_at(&self, index: u64, params: &BernoulliParams) -> BitWord {
        sample_error(params, &mut self.rng_at(index, params.n))
    }

    /// Words `start .. start + count` in order, after a single seek.
    pub fn words(
        &self,
        params: BernoulliParams,
        start: u64,
        count: u64,
    ) -> impl Iterator<Item = BitWord> {
        let mut rng = self.rng_at(start, params.n);
        (0..count).map(move |_| sample_error(&params, &mut rng))
    }

    /// Moves the cursor past `count` words without generating them.
    pub fn advance(&mut self, count: u64) {
        self.next_word += count;
    }

    /// Next word at the cursor; advances the cursor by one.
    pub fn sample_error(&mut self, params: &BernoulliParams) -> BitWord {
        let w = self.word_at(self.next_word, params);
        self.next_word += 1;
        w
    }
}

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Cross-over probability of hard-decision BPSK over AWGN at `ebn0_db` per
/// information bit with code rate `rate`: `Q(sqrt(2 R Eb/N0))`.
pub fn snr_to_p(ebn0_db: f64, rate: f64) -> Result<f64, ChannelError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(ChannelError::Rate(rate));
    }
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    Ok(gaussian_tail((2.0 * rate * ebn0).sqrt()))
}
