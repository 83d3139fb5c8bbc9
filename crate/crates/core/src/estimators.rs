//! Monte-Carlo and importance-sampling WER estimators.
//!
//! Every engine draws error words at some cross-over probability `q`, decodes
//! them, and tallies failing words by Hamming weight. The likelihood ratio
//! `W(i;p,q)` depends on a word only through its weight, so the per-weight
//! failure counts are a sufficient statistic: estimates, relative errors and
//! the `q` update are all computed from integer counts. Merging shards is then
//! integer addition and cannot depend on the order or number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{BernoulliParams, ChannelError, RandomStream, GENERATOR};
use crate::decoders::{Decoder, DecoderError};
use crate::exact::q_bounds;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("probability {0} outside the open interval (0, 1)")]
    Probability(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(
        "no decoding errors in {words} words while estimating q (last q = {q}); \
         try a larger q0 or more words per iteration"
    )]
    EmptyBatches { words: u64, q: f64 },
    #[error("cannot merge reports: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

fn check_prob(x: f64) -> Result<(), EstimatorError> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(EstimatorError::Probability(x))
    }
}

/// `ln W(i;p,q) = i ln(p/q) + (n-i) ln((1-p)/(1-q))`, no validation.
pub fn ln_weight_function(i: usize, p: f64, q: f64, n: usize) -> f64 {
    let a = if i == 0 {
        0.0
    } else {
        i as f64 * (p.ln() - q.ln())
    };
    let b = if i == n {
        0.0
    } else {
        (n - i) as f64 * ((-p).ln_1p() - (-q).ln_1p())
    };
    a + b
}

/// Likelihood ratio of a weight-`i` pattern under Bernoulli(`p`) versus Bernoulli(`q`).
pub fn weight_function(i: usize, p: f64, q: f64, n: usize) -> Result<f64, EstimatorError> {
    check_prob(p)?;
    check_prob(q)?;
    if i > n {
        return Err(EstimatorError::Config(format!(
            "weight {i} exceeds n = {n}"
        )));
    }
    Ok(ln_weight_function(i, p, q, n).exp())
}

/// Words needed by plain Monte Carlo for relative error `kappa`: `ceil(1/(kappa^2 wer))`.
pub fn required_samples(kappa: f64, wer: f64) -> u64 {
    (1.0 / (kappa * kappa * wer)).ceil() as u64
}

/// Stop conditions shared by all engines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub target_kappa: f64,
    pub min_words: u64,
    pub max_words: u64,
    pub target_error_count: Option<u64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            target_kappa: 0.1,
            min_words: 1_000,
            max_words: 1_000_000_000,
            target_error_count: None,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.target_kappa.is_nan() || self.target_kappa <= 0.0 {
            return Err(EstimatorError::Config(
                "target kappa must be positive".into(),
            ));
        }
        if self.min_words == 0 || self.max_words == 0 {
            return Err(EstimatorError::Config(
                "word limits must be positive".into(),
            ));
        }
        if self.min_words > self.max_words {
            return Err(EstimatorError::Config(format!(
                "min_words {} exceeds max_words {}",
                self.min_words, self.max_words
            )));
        }
        if self.target_error_count == Some(0) {
            return Err(EstimatorError::Config(
                "error target must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Parameters of the embedded `q` estimation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ISConfig {
    pub q0: f64,
    /// Number of `q` updates.
    pub l: usize,
    pub words_per_iteration: u64,
}

impl ISConfig {
    pub fn new(q0: f64) -> Self {
        ISConfig {
            q0,
            l: 1,
            words_per_iteration: 1_000,
        }
    }

    fn validate(&self) -> Result<(), EstimatorError> {
        check_prob(self.q0)?;
        if self.words_per_iteration == 0 {
            return Err(EstimatorError::Config(
                "words per iteration must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How word generation is split. Each round draws `batch` words, dealt to
/// `workers` threads as contiguous index ranges; stop rules are checked between
/// rounds. Words are indexed within the stream, so the worker count never
/// changes a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sharding {
    pub workers: usize,
    pub batch: u64,
}

impl Default for Sharding {
    fn default() -> Self {
        Sharding {
            workers: 1,
            batch: 1_000,
        }
    }
}

impl Sharding {
    fn validate(&self) -> Result<(), EstimatorError> {
        if self.workers == 0 || self.batch == 0 {
            return Err(EstimatorError::Config(
                "workers and batch must be positive".into(),
            ));
        }
        Ok(())
    }

    fn round(&self) -> u64 {
        self.batch
    }
}

/// Failing-word counts by weight over a block of generated words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorTally {
    pub words: u64,
    pub by_weight: Vec<u64>,
}

impl ErrorTally {
    pub fn new(n: usize) -> Self {
        ErrorTally {
            words: 0,
            by_weight: vec![0; n + 1],
        }
    }

    pub fn errors(&self) -> u64 {
        self.by_weight.iter().sum()
    }

    pub fn merge(&mut self, other: &ErrorTally) {
        self.words += other.words;
        for (a, b) in self.by_weight.iter_mut().zip(&other.by_weight) {
            *a += b;
        }
    }

    /// `(S1, S2) = (sum I W, sum I W^2)` for samples drawn at `q`.
    pub fn weighted_sums(&self, p: f64, q: f64) -> (f64, f64) {
        let n = self.by_weight.len() - 1;
        self.by_weight
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .fold((0.0, 0.0), |(s1, s2), (i, &c)| {
                let w = ln_weight_function(i, p, q, n).exp();
                (s1 + c as f64 * w, s2 + c as f64 * w * w)
            })
    }
}

/// Decodes words `start .. start + count` of `stream` drawn at `q`.
pub fn tally_words(
    decoder: &Decoder,
    stream: &RandomStream,
    q: f64,
    start: u64,
    count: u64,
    workers: usize,
) -> Result<ErrorTally, EstimatorError> {
    let n = decoder.n();
    let params = BernoulliParams::new(n, q)?;
    let workers = workers.max(1) as u64;
    let per = count / workers;
    let extra = count % workers;
    let ranges: Vec<(u64, u64)> = (0..workers)
        .map(|w| {
            let offset = w * per + w.min(extra);
            let len = per + u64::from(w < extra);
            (start + offset, len)
        })
        .filter(|r| r.1 > 0)
        .collect();
    let shard = |&(from, len): &(u64, u64)| -> Result<ErrorTally, EstimatorError> {
        let mut t = ErrorTally::new(n);
        for z in stream.words(params, from, len) {
            if decoder.indicator(&z)? {
                t.by_weight[z.weight()] += 1;
            }
        }
        t.words = len;
        Ok(t)
    };
    let parts: Vec<ErrorTally> = if ranges.len() == 1 {
        vec![shard(&ranges[0])?]
    } else {
        ranges.par_iter().map(shard).collect::<Result<_, _>>()?
    };
    let mut total = ErrorTally::new(n);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mc,
    IsBasic,
    IsFixed,
    IsInvariant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    TargetKappa,
    ErrorTarget,
    MaxWords,
    Merged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightTally {
    pub weight: usize,
    pub count: u64,
    /// `count * W(weight;p,q)`.
    pub weighted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub n: usize,
    pub p: f64,
    pub wer: f64,
    /// Estimated relative error; `None` when no error was observed.
    pub kappa: Option<f64>,
    /// All words drawn, including those spent estimating `q`.
    pub words_generated: u64,
    /// Words entering the WER estimate.
    pub estimation_words: u64,
    pub errors: u64,
    pub q_used: f64,
    pub q_trace: Vec<f64>,
    pub q_clamped: bool,
    pub stop_reason: StopReason,
    pub generator: String,
    pub seed: u64,
    pub stream_ids: Vec<u64>,
    pub workers: usize,
    pub per_weight: Vec<WeightTally>,
}

impl EstimateReport {
    /// Builds the estimate from the tally of words drawn at `q`.
    #[allow(clippy::too_many_arguments)]
    fn from_tally(
        method: Method,
        p: f64,
        q: f64,
        tally: &ErrorTally,
        words_generated: u64,
        stop_reason: StopReason,
        stream: &RandomStream,
        workers: usize,
    ) -> Self {
        let n = tally.by_weight.len() - 1;
        let (wer, kappa) = point_estimate(method, p, q, tally);
        let per_weight = tally
            .by_weight
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| WeightTally {
                weight: i,
                count: c,
                weighted: c as f64 * ln_weight_function(i, p, q, n).exp(),
            })
            .collect();
        EstimateReport {
            method,
            n,
            p,
            wer,
            kappa,
            words_generated,
            estimation_words: tally.words,
            errors: tally.errors(),
            q_used: q,
            q_trace: Vec::new(),
            q_clamped: false,
            stop_reason,
            generator: GENERATOR.to_string(),
            seed: stream.seed(),
            stream_ids: vec![stream.stream_id()],
            workers,
            per_weight,
        }
    }

    /// Per-weight failure counts as a tally (weights without failures are zero).
    pub fn tally(&self) -> ErrorTally {
        let mut t = ErrorTally::new(self.n);
        t.words = self.estimation_words;
        for w in &self.per_weight {
            t.by_weight[w.weight] = w.count;
        }
        t
    }

    pub fn kappa_defined(&self) -> bool {
        self.kappa.is_some()
    }
}

/// Plain MC uses `sqrt((1-P)/(P N))`; IS uses the sample variance of `I W`.
fn point_estimate(method: Method, p: f64, q: f64, tally: &ErrorTally) -> (f64, Option<f64>) {
    let nw = tally.words as f64;
    if tally.words == 0 {
        return (0.0, None);
    }
    let errors = tally.errors();
    if method == Method::Mc {
        let wer = errors as f64 / nw;
        let kappa = (errors > 0).then(|| ((1.0 - wer) / (wer * nw)).sqrt());
        return (wer, kappa);
    }
    let (s1, s2) = tally.weighted_sums(p, q);
    let wer = s1 / nw;
    let kappa = (errors > 0 && wer > 0.0).then(|| {
        let var = (s2 / nw - wer * wer).max(0.0);
        (var / nw).sqrt() / wer
    });
    (wer, kappa)
}

fn stop_check(
    stop: &StopRule,
    estimation_words: u64,
    total_words: u64,
    errors: u64,
    kappa: Option<f64>,
) -> Option<StopReason> {
    if stop.target_error_count.is_some_and(|t| errors >= t) {
        return Some(StopReason::ErrorTarget);
    }
    if estimation_words >= stop.min_words && kappa.is_some_and(|k| k <= stop.target_kappa) {
        return Some(StopReason::TargetKappa);
    }
    if total_words >= stop.max_words {
        return Some(StopReason::MaxWords);
    }
    None
}

/// Draws rounds at fixed `q` until `done` says stop. The stream cursor
/// advances past every consumed word.
fn run_rounds(
    decoder: &Decoder,
    q: f64,
    stop: &StopRule,
    words_before: u64,
    stream: &mut RandomStream,
    sharding: &Sharding,
    mut kappa_of: impl FnMut(&ErrorTally) -> Option<f64>,
) -> Result<(ErrorTally, StopReason), EstimatorError> {
    let mut tally = ErrorTally::new(decoder.n());
    loop {
        let budget = stop.max_words.saturating_sub(words_before + tally.words);
        if budget == 0 {
            return Ok((tally, StopReason::MaxWords));
        }
        let count = sharding.round().min(budget);
        let part = tally_words(
            decoder,
            stream,
            q,
            stream.position(),
            count,
            sharding.workers,
        )?;
        stream.advance(count);
        tally.merge(&part);
        let kappa = kappa_of(&tally);
        if let Some(reason) = stop_check(
            stop,
            tally.words,
            words_before + tally.words,
            tally.errors(),
            kappa,
        ) {
            return Ok((tally, reason));
        }
    }
}

/// Standard Monte Carlo at the channel cross-over `p`.
pub fn run_mc(
    decoder: &Decoder,
    p: f64,
    stop: &StopRule,
    stream: &mut RandomStream,
    sharding: &Sharding,
) -> Result<EstimateReport, EstimatorError> {
    check_prob(p)?;
    stop.validate()?;
    sharding.validate()?;
    let origin = stream.clone();
    let (tally, reason) = run_rounds(decoder, p, stop, 0, stream, sharding, |t| {
        point_estimate(Method::Mc, p, p, t).1
    })?;
    Ok(EstimateReport::from_tally(
        Method::Mc,
        p,
        p,
        &tally,
        tally.words,
        reason,
        &origin,
        sharding.workers,
    ))
}

/// `q` update from the failures of one batch drawn at `q_prev`:
/// `(1/n) sum I wt W^2 / sum I W^2`. `None` if the batch has no failures.
pub fn update_q(tally: &ErrorTally, p: f64, q_prev: f64) -> Option<f64> {
    let n = tally.by_weight.len() - 1;
    // Log-domain weights, shifted by their maximum before exponentiation.
    let terms: Vec<(usize, f64)> = tally
        .by_weight
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| {
            (
                i,
                (c as f64).ln() + 2.0 * ln_weight_function(i, p, q_prev, n),
            )
        })
        .collect();
    let m = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if terms.is_empty() || !m.is_finite() {
        return None;
    }
    let weights: Vec<(usize, f64)> = terms.iter().map(|&(i, x)| (i, (x - m).exp())).collect();
    weighted_mean_weight(&weights, n)
}

/// `(1/n) sum_i i w_i / sum_i w_i` over `(weight, w)` pairs.
pub fn weighted_mean_weight(weights: &[(usize, f64)], n: usize) -> Option<f64> {
    let (num, den) = weights
        .iter()
        .fold((0.0, 0.0), |(a, b), &(i, w)| (a + i as f64 * w, b + w));
    (den > 0.0).then(|| num / (den * n as f64))
}

/// Outcome of the `q` estimation phase.
#[derive(Clone, Debug, PartialEq)]
pub struct QEstimate {
    pub q: f64,
    pub trace: Vec<f64>,
    pub words: u64,
    pub clamped: bool,
    pub empty_batches: u64,
}

/// Runs `cfg.l` updates of `q`. A batch without failures keeps `q` and is
/// redrawn; after 10 such batches in a row `q` doubles (clamped).
pub fn estimate_q(
    decoder: &Decoder,
    p: f64,
    cfg: &ISConfig,
    max_words: u64,
    stream: &mut RandomStream,
    sharding: &Sharding,
) -> Result<QEstimate, EstimatorError> {
    check_prob(p)?;
    cfg.validate()?;
    sharding.validate()?;
    let n = decoder.n();
    let (lo, hi) = q_bounds(n);
    let mut est = QEstimate {
        q: cfg.q0,
        trace: Vec::new(),
        words: 0,
        clamped: false,
        empty_batches: 0,
    };
    let mut empty_run = 0u32;
    let mut stalled_at_top = 0u32;
    while est.trace.len() < cfg.l {
        if est.words + cfg.words_per_iteration > max_words || stalled_at_top >= 10 {
            return Err(EstimatorError::EmptyBatches {
                words: est.words,
                q: est.q,
            });
        }
        let batch = tally_words(
            decoder,
            stream,
            est.q,
            stream.position(),
            cfg.words_per_iteration,
            sharding.workers,
        )?;
        stream.advance(cfg.words_per_iteration);
        est.words += cfg.words_per_iteration;
        match update_q(&batch, p, est.q) {
            Some(next) => {
                let bounded = next.clamp(lo, hi);
                est.clamped |= bounded != next;
                est.q = bounded;
                est.trace.push(bounded);
                empty_run = 0;
                stalled_at_top = 0;
            }
            None => {
                est.empty_batches += 1;
                empty_run += 1;
                if est.q >= hi {
                    stalled_at_top += 1;
                }
                if empty_run == 10 {
                    let doubled = (2.0 * est.q).min(hi);
                    est.clamped |= doubled != 2.0 * est.q;
                    est.q = doubled;
                    empty_run = 0;
                }
            }
        }
    }
    Ok(est)
}

/// Importance sampling at a fixed biased cross-over `q`.
pub fn run_is_at(
    decoder: &Decoder,
    p: f64,
    q: f64,
    stop: &StopRule,
    stream: &mut RandomStream,
    sharding: &Sharding,
) -> Result<EstimateReport, EstimatorError> {
    check_prob(p)?;
    check_prob(q)?;
    stop.validate()?;
    sharding.validate()?;
    let origin = stream.clone();
    let (tally, reason) = run_rounds(decoder, q, stop, 0, stream, sharding, |t| {
        point_estimate(Method::IsFixed, p, q, t).1
    })?;
    Ok(EstimateReport::from_tally(
        Method::IsFixed,
        p,
        q,
        &tally,
        tally.words,
        reason,
        &origin,
        sharding.workers,
    ))
}

/// Two-phase IS: estimate `q` with `cfg`, then estimate the WER at that `q`.
/// `min_words` applies to the second phase; `max_words` bounds both phases.
pub fn run_is_basic(
    decoder: &Decoder,
    p: f64,
    cfg: &ISConfig,
    stop: &StopRule,
    stream: &mut RandomStream,
    sharding: &Sharding,
) -> Result<EstimateReport, EstimatorError> {
    stop.validate()?;
    let origin = stream.clone();
    let qe = estimate_q(decoder, p, cfg, stop.max_words, stream, sharding)?;
    let q = qe.q;
    let (tally, reason) = run_rounds(decoder, q, stop, qe.words, stream, sharding, |t| {
        point_estimate(Method::IsBasic, p, q, t).1
    })?;
    let mut report = EstimateReport::from_tally(
        Method::IsBasic,
        p,
        q,
        &tally,
        qe.words + tally.words,
        reason,
        &origin,
        sharding.workers,
    );
    report.q_trace = qe.trace;
    report.q_clamped = qe.clamped;
    Ok(report)
}

/// Runs [`run_is_basic`] over `p_list` in order, each point on its own stream
/// `(seed, index)`. The first point starts from `cfg.q0`; later points start
/// from the previous point's final `q`.
pub fn sweep_is_basic(
    decoder: &Decoder,
    p_list: &[f64],
    cfg: &ISConfig,
    stop: &StopRule,
    seed: u64,
    sharding: &Sharding,
) -> Result<Vec<EstimateReport>, EstimatorError> {
    let mut out = Vec::with_capacity(p_list.len());
    let mut q0 = cfg.q0;
    for (k, &p) in p_list.iter().enumerate() {
        let mut stream = RandomStream::new(seed, k as u64);
        let point_cfg = ISConfig { q0, ..*cfg };
        let report = run_is_basic(decoder, p, &point_cfg, stop, &mut stream, sharding)?;
        q0 = report.q_used;
        out.push(report);
    }
    Ok(out)
}

/// One sample set at `q = (t+1)/n`, re-weighted for every `p` in `p_list`.
/// The stop rule is evaluated at the smallest `p`.
pub fn run_is_invariant(
    decoder: &Decoder,
    t: usize,
    p_list: &[f64],
    stop: &StopRule,
    stream: &mut RandomStream,
    sharding: &Sharding,
) -> Result<Vec<EstimateReport>, EstimatorError> {
    if p_list.is_empty() {
        return Err(EstimatorError::Config("empty p list".into()));
    }
    for &p in p_list {
        check_prob(p)?;
    }
    stop.validate()?;
    sharding.validate()?;
    let n = decoder.n();
    if t >= n {
        return Err(EstimatorError::Config(format!(
            "t = {t} must be below n = {n}"
        )));
    }
    let (_, hi) = q_bounds(n);
    let raw_q = (t + 1) as f64 / n as f64;
    let q = raw_q.min(hi);
    let p_min = p_list.iter().copied().fold(f64::INFINITY, f64::min);
    let origin = stream.clone();
    let (tally, reason) = run_rounds(decoder, q, stop, 0, stream, sharding, |tl| {
        point_estimate(Method::IsInvariant, p_min, q, tl).1
    })?;
    Ok(p_list
        .iter()
        .map(|&p| {
            let mut r = EstimateReport::from_tally(
                Method::IsInvariant,
                p,
                q,
                &tally,
                tally.words,
                reason,
                &origin,
                sharding.workers,
            );
            r.q_clamped = q != raw_q;
            r
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TEstimate {
    pub t: usize,
    pub q_hat: f64,
    pub words: u64,
    pub trace: Vec<f64>,
    /// `n p` is not small, so `q_hat ~ (t+1)/n` may not hold.
    pub np_warning: bool,
}

/// Estimates the error-correcting capability from the `q` estimation phase:
/// `t = max(0, round(n q) - 1)` with halves rounded up.
pub fn estimate_t(
    decoder: &Decoder,
    p: f64,
    cfg: &ISConfig,
    stream: &mut RandomStream,
    sharding: &Sharding,
) -> Result<TEstimate, EstimatorError> {
    cfg.validate()?;
    let n = decoder.n();
    // Room for the requested updates plus enough empty batches to double q
    // from q0 up to the top of the bracket.
    let doublings = (1.0 / cfg.q0).log2().ceil().max(0.0) as u64 + 2;
    let budget = cfg.words_per_iteration * (cfg.l as u64 + 10 * doublings + 10);
    let qe = estimate_q(decoder, p, cfg, budget, stream, sharding)?;
    let t = ((n as f64 * qe.q + 0.5).floor() as i64 - 1).max(0) as usize;
    Ok(TEstimate {
        t,
        q_hat: qe.q,
        words: qe.words,
        trace: qe.trace,
        np_warning: n as f64 * p > 0.1,
    })
}

/// Combines reports of the same configuration drawn on different streams.
pub fn merge_reports(reports: &[EstimateReport]) -> Result<EstimateReport, EstimatorError> {
    let first = reports
        .first()
        .ok_or_else(|| EstimatorError::Mismatch("nothing to merge".into()))?;
    if reports.len() == 1 {
        return Ok(first.clone());
    }
    for r in &reports[1..] {
        if r.method != first.method
            || r.n != first.n
            || r.p.to_bits() != first.p.to_bits()
            || r.q_used.to_bits() != first.q_used.to_bits()
            || r.q_trace != first.q_trace
        {
            return Err(EstimatorError::Mismatch(format!(
                "{:?} at p={}, q={} vs {:?} at p={}, q={}",
                first.method, first.p, first.q_used, r.method, r.p, r.q_used
            )));
        }
    }
    let mut tally = ErrorTally::new(first.n);
    let mut words_generated = 0;
    let mut stream_ids = Vec::new();
    let mut workers = 0;
    for r in reports {
        tally.merge(&r.tally());
        words_generated += r.words_generated;
        stream_ids.extend_from_slice(&r.stream_ids);
        workers += r.workers;
    }
    stream_ids.sort_unstable();
    let (wer, kappa) = point_estimate(first.method, first.p, first.q_used, &tally);
    let per_weight = tally
        .by_weight
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| WeightTally {
            weight: i,
            count: c,
            weighted: c as f64 * ln_weight_function(i, first.p, first.q_used, first.n).exp(),
        })
        .collect();
    Ok(EstimateReport {
        wer,
        kappa,
        words_generated,
        estimation_words: tally.words,
        errors: tally.errors(),
        q_clamped: reports.iter().any(|r| r.q_clamped),
        stop_reason: StopReason::Merged,
        stream_ids,
        workers,
        per_weight,
        q_trace: first.q_trace.clone(),
        generator: first.generator.clone(),
        ..first.clone()
    })
}
