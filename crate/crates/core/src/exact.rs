//! Exact analysis from the per-weight error profile.
//!
//! For a decoder, `N_err(i)` counts the weight-`i` patterns that decode to a
//! word error. With `P_p(e;i) = N_err(i) p^i (1-p)^(n-i)` every quantity here
//! (WER, IS-estimator variance and its derivatives, the optimal biased
//! cross-over probability) is a finite sum over weights.
//!
//! Products are evaluated in the log domain; counts are kept as exact big
//! integers so bounded-distance profiles of long codes stay representable.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::decoders::{Decoder, DecoderError};
use crate::estimators::ln_weight_function;
use crate::gf2::BitWord;
use crate::optimize::golden_section_min;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error(
        "enumeration cap exceeded: n = {n} needs 2^{n} patterns, full enumeration is limited to n <= {max_n}"
    )]
    CapExceeded { n: usize, max_n: usize },
    #[error("weight scan budget of {budget} patterns exhausted before weight {weight}")]
    ScanBudget { budget: u64, weight: usize },
    #[error("probability {0} outside the open interval (0, 1)")]
    Probability(f64),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("profile has no error patterns; the decoder never fails")]
    NoErrors,
    #[error(transparent)]
    Decoder(#[from] DecoderError),
}

/// Enumeration limits.
#[derive(Clone, Copy, Debug)]
pub struct EnumerationCaps {
    /// Largest `n` enumerated over all `2^n` patterns.
    pub full_max_n: usize,
    /// Largest total pattern count of a low-weight scan.
    pub scan_budget: u64,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        EnumerationCaps {
            full_max_n: 24,
            scan_budget: 1 << 26,
        }
    }
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for j in 0..k {
        acc *= BigUint::from(n - j);
        acc /= BigUint::from(j + 1);
    }
    acc
}

/// Natural log of a big integer; `-inf` for zero.
fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map(f64::ln).unwrap_or(f64::INFINITY);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `N_err(i)` for `i = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorProfile {
    n: usize,
    counts: Vec<BigUint>,
    t_effective: usize,
    decoder: String,
    ln_counts: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProfileJson {
    n: usize,
    counts: Vec<Value>,
    t_effective: usize,
    decoder: String,
}

impl ErrorProfile {
    pub fn from_counts(
        n: usize,
        counts: Vec<BigUint>,
        decoder: impl Into<String>,
    ) -> Result<Self, ExactError> {
        if counts.len() != n + 1 {
            return Err(ExactError::InvalidProfile(format!(
                "expected {} counts, got {}",
                n + 1,
                counts.len()
            )));
        }
        if !counts[0].is_zero() {
            return Err(ExactError::InvalidProfile(
                "the zero pattern cannot cause an error".into(),
            ));
        }
        for (i, c) in counts.iter().enumerate() {
            if *c > binomial(n, i) {
                return Err(ExactError::InvalidProfile(format!(
                    "N_err({i}) = {c} exceeds C({n},{i})"
                )));
            }
        }
        let t_effective = counts
            .iter()
            .position(|c| !c.is_zero())
            .map_or(n, |first| first - 1);
        let ln_counts = counts.iter().map(ln_big).collect();
        Ok(ErrorProfile {
            n,
            counts,
            t_effective,
            decoder: decoder.into(),
            ln_counts,
        })
    }

    pub fn from_u64_counts(
        n: usize,
        counts: &[u64],
        decoder: impl Into<String>,
    ) -> Result<Self, ExactError> {
        Self::from_counts(
            n,
            counts.iter().map(|&c| BigUint::from(c)).collect(),
            decoder,
        )
    }

    /// Profile of a decoder that fails exactly above weight `t`.
    pub fn bounded_distance(n: usize, t: usize) -> Self {
        let counts = (0..=n)
            .map(|i| {
                if i > t {
                    binomial(n, i)
                } else {
                    BigUint::zero()
                }
            })
            .collect();
        Self::from_counts(n, counts, format!("bounded_distance(t={t})"))
            .expect("binomial counts are valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    /// Largest `w` with `N_err(i) = 0` for all `i <= w` (`n` if the decoder never fails).
    pub fn t_effective(&self) -> usize {
        self.t_effective
    }

    pub fn decoder(&self) -> &str {
        &self.decoder
    }

    pub fn has_errors(&self) -> bool {
        self.t_effective < self.n
    }

    /// Weights with a nonzero count.
    pub fn active_weights(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.n).filter(|&i| !self.counts[i].is_zero())
    }

    /// `ln P_p(e;i)`, `-inf` where the count is zero.
    pub fn ln_error_prob(&self, i: usize, p: f64) -> f64 {
        let lc = self.ln_counts[i];
        if lc == f64::NEG_INFINITY {
            return lc;
        }
        lc + i as f64 * p.ln() + (self.n - i) as f64 * (-p).ln_1p()
    }

    /// `P_p(e;i)` for every weight.
    pub fn error_probs(&self, p: f64) -> Vec<f64> {
        (0..=self.n)
            .map(|i| self.ln_error_prob(i, p).exp())
            .collect()
    }

    /// JSON object `{n, counts, t_effective, decoder}`. Counts that do not fit
    /// a `u64` are written as decimal strings.
    pub fn to_json(&self) -> Value {
        let counts: Vec<Value> = self
            .counts
            .iter()
            .map(|c| match c.to_u64() {
                Some(v) => json!(v),
                None => json!(c.to_string()),
            })
            .collect();
        serde_json::to_value(ProfileJson {
            n: self.n,
            counts,
            t_effective: self.t_effective,
            decoder: self.decoder.clone(),
        })
        .expect("profile serializes")
    }

    pub fn from_json(v: &Value) -> Result<Self, ExactError> {
        let raw: ProfileJson = serde_json::from_value(v.clone())
            .map_err(|e| ExactError::InvalidProfile(e.to_string()))?;
        let counts = raw
            .counts
            .iter()
            .map(|c| match c {
                Value::Number(n) => n.as_u64().map(BigUint::from),
                Value::String(s) => s.parse::<BigUint>().ok(),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| {
                ExactError::InvalidProfile("counts must be non-negative integers".into())
            })?;
        let profile = Self::from_counts(raw.n, counts, raw.decoder)?;
        if profile.t_effective != raw.t_effective {
            return Err(ExactError::InvalidProfile(format!(
                "t_effective {} disagrees with counts ({})",
                raw.t_effective, profile.t_effective
            )));
        }
        Ok(profile)
    }
}

/// Exact profile of `decoder`: closed form for bounded-distance decoders,
/// otherwise exhaustive evaluation of `I(z)` over all `2^n` patterns.
pub fn error_profile(decoder: &Decoder) -> Result<ErrorProfile, ExactError> {
    error_profile_with_caps(decoder, EnumerationCaps::default())
}

pub fn error_profile_with_caps(
    decoder: &Decoder,
    caps: EnumerationCaps,
) -> Result<ErrorProfile, ExactError> {
    let n = decoder.n();
    if let Some(t) = decoder.bounded_distance_t() {
        return Ok(ErrorProfile::bounded_distance(n, t));
    }
    if n > caps.full_max_n || n > 40 {
        return Err(ExactError::CapExceeded {
            n,
            max_n: caps.full_max_n,
        });
    }
    let total = 1u64 << n;
    let shards = 64u64.min(total);
    let per = total.div_ceil(shards);
    let partial: Result<Vec<Vec<u64>>, DecoderError> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut counts = vec![0u64; n + 1];
            for mask in s * per..((s + 1) * per).min(total) {
                let z = BitWord::from_u64(n, mask);
                if decoder.indicator(&z)? {
                    counts[mask.count_ones() as usize] += 1;
                }
            }
            Ok(counts)
        })
        .collect();
    let mut counts = vec![0u64; n + 1];
    for part in partial? {
        for (c, x) in counts.iter_mut().zip(part) {
            *c += x;
        }
    }
    ErrorProfile::from_u64_counts(n, &counts, decoder.describe())
}

/// Visits all `w`-subsets of `0..n` as sorted index slices, lexicographically.
fn for_each_subset(n: usize, w: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if w > n {
        return;
    }
    let mut idx: Vec<usize> = (0..w).collect();
    loop {
        if !f(&idx) {
            return;
        }
        let mut i = w;
        while i > 0 && idx[i - 1] == n - w + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..w {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Smallest weight with a failing pattern, minus one, found by scanning
/// weights in increasing order. Returns `n` if no weight fails.
pub fn scan_effective_t(decoder: &Decoder, caps: EnumerationCaps) -> Result<usize, ExactError> {
    let n = decoder.n();
    let mut spent = 0u64;
    for w in 1..=n {
        let c = binomial(n, w).to_u64().unwrap_or(u64::MAX);
        if spent.saturating_add(c) > caps.scan_budget {
            return Err(ExactError::ScanBudget {
                budget: caps.scan_budget,
                weight: w,
            });
        }
        spent += c;
        let mut failed = false;
        let mut err = None;
        for_each_subset(n, w, |idx| {
            let z = BitWord::from_positions(n, idx).expect("indices in range");
            match decoder.indicator(&z) {
                Ok(true) => failed = true,
                Ok(false) => {}
                Err(e) => err = Some(e),
            }
            !failed && err.is_none()
        });
        if let Some(e) = err {
            return Err(e.into());
        }
        if failed {
            return Ok(w - 1);
        }
    }
    Ok(n)
}

fn check_prob(x: f64) -> Result<(), ExactError> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(ExactError::Probability(x))
    }
}

/// `ln(W(i;p,q) P_p(e;i))` for each active weight, paired with `i`.
fn ln_weighted_terms(profile: &ErrorProfile, p: f64, q: f64) -> Vec<(usize, f64)> {
    let n = profile.n();
    profile
        .active_weights()
        .map(|i| {
            (
                i,
                ln_weight_function(i, p, q, n) + profile.ln_error_prob(i, p),
            )
        })
        .collect()
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `P(e) = sum_i N_err(i) p^i (1-p)^(n-i)`.
pub fn exact_wer(profile: &ErrorProfile, p: f64) -> Result<f64, ExactError> {
    check_prob(p)?;
    Ok(profile.error_probs(p).iter().sum())
}

/// `E_q[I W^2] = sum_i W(i;p,q) P_p(e;i)`: the part of the variance that depends on `q`.
pub fn second_moment(profile: &ErrorProfile, p: f64, q: f64) -> Result<f64, ExactError> {
    check_prob(p)?;
    check_prob(q)?;
    Ok(ln_weighted_terms(profile, p, q)
        .iter()
        .map(|(_, x)| x.exp())
        .sum())
}

/// Per-weight variance sum as published: `(1/N) sum_i (W_i P_i - P_i^2)`.
///
/// Exceeds [`true_variance`] by `((sum P_i)^2 - sum P_i^2) / N` because the
/// per-weight error events are treated as uncorrelated; both share the same
/// `q`-dependent term, hence the same derivative and minimizer.
pub fn paper_variance(
    profile: &ErrorProfile,
    p: f64,
    q: f64,
    samples: u64,
) -> Result<f64, ExactError> {
    let m2 = second_moment(profile, p, q)?;
    let sq: f64 = profile.error_probs(p).iter().map(|x| x * x).sum();
    Ok((m2 - sq) / samples as f64)
}

/// Variance of the IS estimator with `samples` words drawn at cross-over `q`:
/// `(E_q[I W^2] - P(e)^2) / N`.
pub fn true_variance(
    profile: &ErrorProfile,
    p: f64,
    q: f64,
    samples: u64,
) -> Result<f64, ExactError> {
    let m2 = second_moment(profile, p, q)?;
    let pe: f64 = profile.error_probs(p).iter().sum();
    Ok((m2 - pe * pe) / samples as f64)
}

/// `d/dq var = -(1/N) sum_i (i - nq)/(q(1-q)) W_i P_i`.
pub fn variance_derivative(
    profile: &ErrorProfile,
    p: f64,
    q: f64,
    samples: u64,
) -> Result<f64, ExactError> {
    check_prob(p)?;
    check_prob(q)?;
    let n = profile.n() as f64;
    let s: f64 = ln_weighted_terms(profile, p, q)
        .iter()
        .map(|&(i, x)| (i as f64 - n * q) / (q * (1.0 - q)) * x.exp())
        .sum();
    Ok(-s / samples as f64)
}

/// `d^2/dq^2 var = (1/N) sum_i W_i P_i xi(q,i) / (q(1-q))^2`.
pub fn variance_second_derivative(
    profile: &ErrorProfile,
    p: f64,
    q: f64,
    samples: u64,
) -> Result<f64, ExactError> {
    check_prob(p)?;
    check_prob(q)?;
    let n = profile.n();
    let d = (q * (1.0 - q)).powi(2);
    let s: f64 = ln_weighted_terms(profile, p, q)
        .iter()
        .map(|&(i, x)| x.exp() * xi(n, q, i) / d)
        .sum();
    Ok(s / samples as f64)
}

/// `xi(q,i) = (i - nq)^2 + nq^2 - i(2q - 1)`; the sign of the `i`-th term of
/// the second derivative.
///
/// Evaluated as `n(n+1)(q - i/n)^2 + i(n-i)/n`, the same quadratic written as a
/// sum of nonnegative terms, which avoids cancellation where `xi` is small.
pub fn xi(n: usize, q: f64, i: usize) -> f64 {
    let (nf, fi) = (n as f64, i as f64);
    nf * (nf + 1.0) * (q - fi / nf).powi(2) + fi * (n - i) as f64 / nf
}

/// Discriminant of `xi` as a quadratic in `q`: `4 i (n+1) (i - n)`.
pub fn xi_discriminant(n: usize, i: usize) -> i128 {
    let (n, i) = (n as i128, i as i128);
    4 * i * (n + 1) * (i - n)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityCertificate {
    pub holds: bool,
    pub worst_q: f64,
    pub worst_i: usize,
    pub worst_xi: f64,
}

/// Evaluates `xi(q,i)` for all `i in 0..=n` and `q` in the grid.
pub fn convexity_certificate(n: usize, q_grid: &[f64]) -> ConvexityCertificate {
    let mut cert = ConvexityCertificate {
        holds: true,
        worst_q: f64::NAN,
        worst_i: 0,
        worst_xi: f64::INFINITY,
    };
    for &q in q_grid {
        for i in 0..=n {
            let v = xi(n, q, i);
            if v < cert.worst_xi {
                cert.worst_xi = v;
                cert.worst_q = q;
                cert.worst_i = i;
            }
            if v < 0.0 || !(q > 0.0 && q < 1.0) {
                cert.holds = false;
            }
        }
    }
    cert
}

/// `[1/(10n), 1 - 1/(10n)]`.
pub fn q_bounds(n: usize) -> (f64, f64) {
    let eps = 1.0 / (10.0 * n as f64);
    (eps, 1.0 - eps)
}

/// Right-hand side of the optimality condition:
/// `(1/n) sum_i i W(i;p,q) P_p(e;i) / sum_i W(i;p,q) P_p(e;i)`.
pub fn optimality_rhs(profile: &ErrorProfile, p: f64, q: f64) -> Result<f64, ExactError> {
    check_prob(p)?;
    check_prob(q)?;
    let terms = ln_weighted_terms(profile, p, q);
    if terms.is_empty() {
        return Err(ExactError::NoErrors);
    }
    let m = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let (num, den) = terms.iter().fold((0.0, 0.0), |(a, b), &(i, x)| {
        let w = (x - m).exp();
        (a + i as f64 * w, b + w)
    });
    Ok(num / (den * profile.n() as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub q: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The iterate hit the `[1/(10n), 1 - 1/(10n)]` bracket.
    pub clamped: bool,
    /// Iteration did not converge and `q` comes from [`argmin_q`].
    pub fell_back: bool,
}

/// Solves `q = RHS(q)` by damped iteration `q <- (q + RHS(q)) / 2` starting at
/// `(t_effective + 1) / n`.
pub fn fixed_point_q(profile: &ErrorProfile, p: f64) -> Result<FixedPoint, ExactError> {
    check_prob(p)?;
    if !profile.has_errors() {
        return Err(ExactError::NoErrors);
    }
    let n = profile.n();
    let (lo, hi) = q_bounds(n);
    let alpha = 0.5;
    let mut clamped = false;
    let mut q = (profile.t_effective() + 1) as f64 / n as f64;
    if q > hi {
        q = hi;
        clamped = true;
    }
    for it in 1..=10_000 {
        let rhs = optimality_rhs(profile, p, q)?;
        let mut next = (1.0 - alpha) * q + alpha * rhs;
        if next > hi || next < lo {
            next = next.clamp(lo, hi);
            clamped = true;
        }
        let delta = (next - q).abs();
        q = next;
        if delta <= 1e-10 {
            if !clamped {
                q = newton_polish(profile, p, q, lo, hi)?;
            }
            return Ok(FixedPoint {
                q,
                iterations: it,
                converged: true,
                clamped,
                fell_back: false,
            });
        }
    }
    Ok(FixedPoint {
        q: argmin_q(profile, p)?,
        iterations: 10_000,
        converged: false,
        clamped,
        fell_back: true,
    })
}

/// A few Newton steps on the variance derivative, each kept only if it shrinks
/// `|d var/dq|` without leaving `[lo, hi]`. Stopping the damped iteration at a
/// step of 1e-10 leaves a residual of that order in `q`; this removes it.
fn newton_polish(
    profile: &ErrorProfile,
    p: f64,
    mut q: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, ExactError> {
    let mut g = variance_derivative(profile, p, q, 1)?;
    for _ in 0..5 {
        let h = variance_second_derivative(profile, p, q, 1)?;
        if h.is_nan() || h <= 0.0 || g == 0.0 {
            break;
        }
        let next = q - g / h;
        if !(lo..=hi).contains(&next) {
            break;
        }
        let g_next = variance_derivative(profile, p, next, 1)?;
        if g_next.abs() >= g.abs() {
            break;
        }
        q = next;
        g = g_next;
    }
    Ok(q)
}

/// Minimizer of [`true_variance`] over `[1/(10n), 1 - 1/(10n)]` by golden
/// section. The search runs on `ln E_q[I W^2]`, which differs from the variance
/// by a `q`-independent shift and a monotone map, so the minimizer is the same
/// while cancellation against `P(e)^2` is avoided.
pub fn argmin_q(profile: &ErrorProfile, p: f64) -> Result<f64, ExactError> {
    check_prob(p)?;
    if !profile.has_errors() {
        return Err(ExactError::NoErrors);
    }
    let (lo, hi) = q_bounds(profile.n());
    let objective = |q: f64| log_sum_exp(ln_weighted_terms(profile, p, q).into_iter().map(|t| t.1));
    let m = golden_section_min(objective, lo, hi, 1e-10);
    // Near the minimum the objective is flat to within rounding, which limits
    // the search to about 1e-8. Bisect on the sign of the analytic derivative
    // in a small bracket around the result to resolve it further.
    let (mut a, mut b) = ((m - 1e-6).max(lo), (m + 1e-6).min(hi));
    let slope = |q: f64| variance_derivative(profile, p, q, 1);
    if slope(a)? < 0.0 && slope(b)? > 0.0 {
        for _ in 0..64 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if slope(mid)? < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        return Ok(0.5 * (a + b));
    }
    Ok(m)
}

/// `(t + 1) / n`, with a flag when it lands on the unusable boundary `q = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxQ {
    pub q: f64,
    pub at_boundary: bool,
}

pub fn q_approx(t: usize, n: usize) -> Result<ApproxQ, ExactError> {
    if t >= n {
        return Err(ExactError::InvalidProfile(format!(
            "t = {t} must be below n = {n}"
        )));
    }
    Ok(ApproxQ {
        q: (t + 1) as f64 / n as f64,
        at_boundary: t + 1 == n,
    })
}

/// Dominant-term variance, keeping only weight `t + 1`:
/// `(W_{t+1} P_{t+1} - P_{t+1}^2) / N`.
pub fn approx_variance(
    profile: &ErrorProfile,
    p: f64,
    q: f64,
    samples: u64,
) -> Result<f64, ExactError> {
    check_prob(p)?;
    check_prob(q)?;
    let t = profile.t_effective();
    if t >= profile.n() {
        return Ok(0.0);
    }
    let i = t + 1;
    let ln_p = profile.ln_error_prob(i, p);
    let w_p = (ln_weight_function(i, p, q, profile.n()) + ln_p).exp();
    let pi = ln_p.exp();
    Ok((w_p - pi * pi) / samples as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub q: f64,
    pub paper_variance: f64,
    pub true_variance: f64,
    pub derivative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceCurve {
    pub points: Vec<CurvePoint>,
    pub argmin_q: f64,
    pub fixed_point_q: FixedPoint,
}

pub fn variance_curve(
    profile: &ErrorProfile,
    p: f64,
    samples: u64,
    q_grid: &[f64],
) -> Result<VarianceCurve, ExactError> {
    let points = q_grid
        .iter()
        .map(|&q| {
            Ok(CurvePoint {
                q,
                paper_variance: paper_variance(profile, p, q, samples)?,
                true_variance: true_variance(profile, p, q, samples)?,
                derivative: variance_derivative(profile, p, q, samples)?,
            })
        })
        .collect::<Result<Vec<_>, ExactError>>()?;
    Ok(VarianceCurve {
        points,
        argmin_q: argmin_q(profile, p)?,
        fixed_point_q: fixed_point_q(profile, p)?,
    })
}
