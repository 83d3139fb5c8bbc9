//! Decoding-failure indicators `I(z)`.
//!
//! Every decoder answers one question: with the all-zero codeword sent and `z`
//! received, does decoding produce a word error?

use thiserror::Error;

use crate::codes::LinearCode;
use crate::gf2::BitWord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecoderError {
    #[error("received word has length {found}, code length is {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(
        "syndrome table needs n <= {max_n} and m <= {max_m} (got n = {n}, m = {m}); \
         use a bounded-distance decoder for larger codes"
    )]
    TableTooLarge {
        n: usize,
        m: usize,
        max_n: usize,
        max_m: usize,
    },
    #[error("bounded-distance capability t = {t} exceeds n = {n}")]
    CapabilityTooLarge { t: usize, n: usize },
    #[error("bit-flip decoder needs max_iters >= 1")]
    ZeroIterations,
}

/// Size limits for the coset-leader table.
#[derive(Clone, Copy, Debug)]
pub struct TableCaps {
    pub max_n: usize,
    pub max_m: usize,
}

impl Default for TableCaps {
    fn default() -> Self {
        TableCaps {
            max_n: 24,
            max_m: 20,
        }
    }
}

#[derive(Clone, Debug)]
struct SyndromeTable {
    /// Column `i` of `H` packed as an m-bit mask.
    columns: Vec<u64>,
    /// Minimum-weight coset leader per syndrome, as an n-bit mask.
    leaders: Vec<u64>,
}

impl SyndromeTable {
    fn syndrome(&self, z: u64) -> usize {
        let mut s = 0u64;
        let mut bits = z;
        while bits != 0 {
            s ^= self.columns[bits.trailing_zeros() as usize];
            bits &= bits - 1;
        }
        s as usize
    }
}

#[derive(Clone, Debug)]
struct Tanner {
    var_checks: Vec<Vec<usize>>,
    check_vars: Vec<Vec<usize>>,
    max_iters: usize,
}

#[derive(Clone, Debug)]
enum Kind {
    SyndromeTable(SyndromeTable),
    BoundedDistance { t: usize },
    BitFlip(Tanner),
}

/// Result of running the bit-flip decoder on one word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitFlipOutcome {
    pub word: BitWord,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct Decoder {
    code: LinearCode,
    kind: Kind,
    t_declared: Option<usize>,
}

/// Visits all `w`-subsets of `0..n` in lexicographic order as bit masks.
pub(crate) fn for_each_combination(n: usize, w: usize, mut f: impl FnMut(u64) -> bool) {
    if w > n {
        return;
    }
    let mut idx: Vec<usize> = (0..w).collect();
    loop {
        let mask = idx.iter().fold(0u64, |acc, &i| acc | 1 << i);
        if !f(mask) {
            return;
        }
        // Rightmost index that can still move right.
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

impl Decoder {
    /// Syndrome decoding with a full coset-leader table, default size caps.
    pub fn syndrome_table(code: &LinearCode) -> Result<Self, DecoderError> {
        Self::syndrome_table_with_caps(code, TableCaps::default())
    }

    /// Leaders are filled by increasing weight; within a weight, position
    /// tuples are visited lexicographically and the first pattern wins.
    pub fn syndrome_table_with_caps(
        code: &LinearCode,
        caps: TableCaps,
    ) -> Result<Self, DecoderError> {
        let (n, m) = (code.n(), code.m());
        if n > caps.max_n || m > caps.max_m || n > 63 || m > 63 {
            return Err(DecoderError::TableTooLarge {
                n,
                m,
                max_n: caps.max_n,
                max_m: caps.max_m,
            });
        }
        let columns: Vec<u64> = (0..n).map(|c| code.h().column(c).to_u64()).collect();
        let mut table = SyndromeTable {
            columns,
            leaders: vec![u64::MAX; 1 << m],
        };
        let reachable = 1usize << (n - code.k());
        let mut filled = 0usize;
        let mut first_non_leader = None;
        for w in 0..=n {
            for_each_combination(n, w, |mask| {
                let s = table.syndrome(mask);
                if table.leaders[s] == u64::MAX {
                    table.leaders[s] = mask;
                    filled += 1;
                } else if first_non_leader.is_none() {
                    first_non_leader = Some(w);
                }
                !(filled == reachable && first_non_leader.is_some())
            });
            if filled == reachable && first_non_leader.is_some() {
                break;
            }
        }
        let t = first_non_leader.map(|w| w.saturating_sub(1));
        Ok(Decoder {
            code: code.clone(),
            kind: Kind::SyndromeTable(table),
            t_declared: t,
        })
    }

    /// Success exactly on patterns of weight at most `t`.
    pub fn bounded_distance(code: &LinearCode, t: usize) -> Result<Self, DecoderError> {
        if t > code.n() {
            return Err(DecoderError::CapabilityTooLarge { t, n: code.n() });
        }
        Ok(Decoder {
            code: code.clone(),
            kind: Kind::BoundedDistance { t },
            t_declared: Some(t),
        })
    }

    /// Hard-decision parallel bit flipping. A bit flips when strictly more of
    /// its checks are unsatisfied than satisfied; ties keep the bit.
    pub fn bit_flip(code: &LinearCode, max_iters: usize) -> Result<Self, DecoderError> {
        if max_iters == 0 {
            return Err(DecoderError::ZeroIterations);
        }
        let h = code.h();
        let check_vars: Vec<Vec<usize>> = h.rows().iter().map(BitWord::support).collect();
        let mut var_checks = vec![Vec::new(); code.n()];
        for (c, vars) in check_vars.iter().enumerate() {
            for &v in vars {
                var_checks[v].push(c);
            }
        }
        Ok(Decoder {
            code: code.clone(),
            kind: Kind::BitFlip(Tanner {
                var_checks,
                check_vars,
                max_iters,
            }),
            t_declared: None,
        })
    }

    pub fn code(&self) -> &LinearCode {
        &self.code
    }

    pub fn n(&self) -> usize {
        self.code.n()
    }

    /// Error-correcting capability when known from construction.
    pub fn t_declared(&self) -> Option<usize> {
        self.t_declared
    }

    pub fn bounded_distance_t(&self) -> Option<usize> {
        match self.kind {
            Kind::BoundedDistance { t } => Some(t),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            Kind::SyndromeTable(_) => "syndrome_table".to_string(),
            Kind::BoundedDistance { t } => format!("bounded_distance(t={t})"),
            Kind::BitFlip(g) => format!("bit_flip(max_iters={})", g.max_iters),
        }
    }

    /// `I(z)`: true iff decoding `z` yields a word error.
    pub fn indicator(&self, z: &BitWord) -> Result<bool, DecoderError> {
        if z.len() != self.n() {
            return Err(DecoderError::LengthMismatch {
                expected: self.n(),
                found: z.len(),
            });
        }
        Ok(match &self.kind {
            Kind::SyndromeTable(table) => {
                let mask = z.to_u64();
                table.leaders[table.syndrome(mask)] != mask
            }
            Kind::BoundedDistance { t } => z.weight() > *t,
            Kind::BitFlip(g) => !run_bit_flip(g, z).word.is_zero(),
        })
    }

    /// Runs the bit-flip iterations and reports the final word. `None` for
    /// other decoder kinds.
    pub fn bit_flip_decode(&self, z: &BitWord) -> Option<BitFlipOutcome> {
        match &self.kind {
            Kind::BitFlip(g) if z.len() == self.n() => Some(run_bit_flip(g, z)),
            _ => None,
        }
    }
}

fn run_bit_flip(g: &Tanner, z: &BitWord) -> BitFlipOutcome {
    let mut word = z.clone();
    let mut unsat = vec![false; g.check_vars.len()];
    for iter in 0..g.max_iters {
        let mut any = false;
        for (c, vars) in g.check_vars.iter().enumerate() {
            let parity = vars.iter().filter(|&&v| word.get(v)).count() % 2 == 1;
            unsat[c] = parity;
            any |= parity;
        }
        if !any {
            return BitFlipOutcome {
                word,
                iterations: iter,
                converged: true,
            };
        }
        let flips: Vec<usize> = g
            .var_checks
            .iter()
            .enumerate()
            .filter(|(_, checks)| {
                let bad = checks.iter().filter(|&&c| unsat[c]).count();
                2 * bad > checks.len()
            })
            .map(|(v, _)| v)
            .collect();
        if flips.is_empty() {
            // Fixed point with a non-zero syndrome: later iterations change nothing.
            return BitFlipOutcome {
                word,
                iterations: iter,
                converged: false,
            };
        }
        for v in flips {
            word.flip(v);
        }
    }
    let converged = g
        .check_vars
        .iter()
        .all(|vars| vars.iter().filter(|&&v| word.get(v)).count() % 2 == 0);
    BitFlipOutcome {
        word,
        iterations: g.max_iters,
        converged,
    }
}
