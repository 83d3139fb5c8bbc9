//! Brute-force oracles and shared fixtures for the integration tests.
//!
//! Everything here works pattern by pattern over all `2^n` error words, using
//! only the decoder's indicator, so it is independent of the per-weight
//! closed forms it is checked against.

#![allow(dead_code)]

use fastsim::codes::{parse_alist, parse_matrix_file, LinearCode};
use fastsim::decoders::Decoder;
use fastsim::gf2::{BitMatrix, BitWord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LDPC12: &str = include_str!("../../fixtures/ldpc12.alist");
pub const BCH15_5: &str = include_str!("../../fixtures/bch15_5.txt");

pub fn ldpc12() -> LinearCode {
    parse_alist(LDPC12).unwrap()
}

pub fn bch15_5() -> LinearCode {
    parse_matrix_file(BCH15_5).unwrap()
}

/// Systematic `[I_5 | A]` parity-check matrix with `A` drawn from a fixed seed.
pub fn random_code_10_5() -> LinearCode {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let rows = (0..5)
        .map(|r| {
            let bits: Vec<bool> = (0..10)
                .map(|c| if c < 5 { c == r } else { rng.random::<bool>() })
                .collect();
            BitWord::from_bits(bits)
        })
        .collect();
    LinearCode::from_parity_check(BitMatrix::from_rows(rows).unwrap())
        .unwrap()
        .with_name("random(10,5)")
}

/// Neumaier-compensated sum.
#[derive(Default, Clone, Copy)]
pub struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Moments of the single-word IS estimator `I(z) W(z)` under Bernoulli(`q`).
pub struct Moments {
    /// `E_q[I W]`, which is the WER at `p`.
    pub first: f64,
    /// `E_q[(I W)^2]`.
    pub second: f64,
    /// `P_p(e; i)` accumulated per weight.
    pub per_weight: Vec<f64>,
}

impl Moments {
    /// `var_q[I W]` for one sample.
    pub fn variance(&self) -> f64 {
        self.second - self.first * self.first
    }
}

/// Indicator of every pattern, indexed by its bit mask.
pub fn indicator_table(decoder: &Decoder) -> Vec<bool> {
    let n = decoder.n();
    assert!(n <= 24, "brute force limited to n <= 24");
    (0..1u64 << n)
        .map(|m| decoder.indicator(&BitWord::from_u64(n, m)).unwrap())
        .collect()
}

/// Sums `f(z;q) (I W)^k` over every pattern with `W = f(z;p) / f(z;q)`.
pub fn brute_force_moments(table: &[bool], n: usize, p: f64, q: f64) -> Moments {
    let mut first = Sum::default();
    let mut second = Sum::default();
    let mut per_weight = vec![Sum::default(); n + 1];
    for (mask, &fails) in table.iter().enumerate() {
        if !fails {
            continue;
        }
        let w = (mask as u64).count_ones() as i32;
        let rest = n as i32 - w;
        let fp = p.powi(w) * (1.0 - p).powi(rest);
        let fq = q.powi(w) * (1.0 - q).powi(rest);
        let weight = fp / fq;
        first.add(fq * weight);
        second.add(fq * weight * weight);
        per_weight[w as usize].add(fp);
    }
    Moments {
        first: first.value(),
        second: second.value(),
        per_weight: per_weight.iter().map(Sum::value).collect(),
    }
}

/// Smallest failing weight minus one, from the full indicator table.
pub fn brute_force_t(table: &[bool]) -> usize {
    let min_fail = table
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(m, _)| (m as u64).count_ones() as usize)
        .min()
        .expect("decoder fails somewhere");
    min_fail - 1
}

/// Plain golden-section minimizer.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-12 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) <= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}
