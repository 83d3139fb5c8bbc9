//! Linear block codes described by their parity-check matrix.
//!
//! Only `H` is needed: simulation always transmits the all-zero codeword, so
//! no generator matrix or encoder exists here.

use std::fmt::Write as _;

use thiserror::Error;

use crate::gf2::{BitMatrix, BitWord, Gf2Error};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid code: {0}")]
    Invalid(String),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> CodeError {
    CodeError::Parse {
        line,
        msg: msg.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearCode {
    h: BitMatrix,
    k: usize,
    t_known: Option<usize>,
    d_min_known: Option<usize>,
    name: String,
}

impl LinearCode {
    /// Wraps a parity-check matrix. `k` is `n - rank(H)`.
    pub fn from_parity_check(h: BitMatrix) -> Result<Self, CodeError> {
        let n = h.num_cols();
        let rank = h.rank();
        if rank == 0 || rank >= n {
            return Err(CodeError::Invalid(format!(
                "rank(H) = {rank} gives k = {}, need 0 < k < n = {n}",
                n - rank
            )));
        }
        Ok(LinearCode {
            k: n - rank,
            name: format!("custom({n},{})", n - rank),
            h,
            t_known: None,
            d_min_known: None,
        })
    }

    /// Attaches a declared error-correcting capability and/or minimum distance.
    pub fn with_known(
        mut self,
        t_known: Option<usize>,
        d_min_known: Option<usize>,
    ) -> Result<Self, CodeError> {
        if let Some(d) = d_min_known {
            if d == 0 || d > self.n() {
                return Err(CodeError::Invalid(format!(
                    "d_min = {d} outside 1..={}",
                    self.n()
                )));
            }
        }
        if let (Some(t), Some(d)) = (t_known, d_min_known) {
            if t > (d - 1).div_ceil(2) {
                return Err(CodeError::Invalid(format!(
                    "t = {t} exceeds ceil((d_min - 1) / 2) for d_min = {d}"
                )));
            }
        }
        if let Some(t) = t_known {
            if t > self.n() {
                return Err(CodeError::Invalid(format!(
                    "t = {t} exceeds n = {}",
                    self.n()
                )));
            }
        }
        self.t_known = t_known;
        self.d_min_known = d_min_known;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn h(&self) -> &BitMatrix {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.h.num_cols()
    }

    /// Number of parity checks (rows of `H`, not necessarily independent).
    pub fn m(&self) -> usize {
        self.h.num_rows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }

    pub fn t_known(&self) -> Option<usize> {
        self.t_known
    }

    pub fn d_min_known(&self) -> Option<usize> {
        self.d_min_known
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn syndrome(&self, z: &BitWord) -> Result<BitWord, CodeError> {
        Ok(self.h.syndrome(z)?)
    }

    pub fn is_codeword(&self, z: &BitWord) -> Result<bool, CodeError> {
        Ok(self.syndrome(z)?.is_zero())
    }
}

/// Hamming code with `r` parity bits: `n = 2^r - 1`, `k = n - r`.
///
/// Column `j` of `H` is the binary expansion of `j + 1`, most significant bit
/// in row 0.
pub fn make_hamming(r: usize) -> Result<LinearCode, CodeError> {
    if !(2..=16).contains(&r) {
        return Err(CodeError::Invalid(format!(
            "Hamming r = {r} outside 2..=16"
        )));
    }
    let n = (1usize << r) - 1;
    let mut h = BitMatrix::zeros(r, n)?;
    for col in 0..n {
        let v = col + 1;
        for row in 0..r {
            if (v >> (r - 1 - row)) & 1 == 1 {
                h.set(row, col, true)?;
            }
        }
    }
    LinearCode::from_parity_check(h)?
        .with_known(Some(1), Some(3))
        .map(|c| c.with_name(format!("hamming({n},{})", n - r)))
}

/// Repetition code of odd length `n`; row `j` of `H` checks bit 0 against bit `j + 1`.
pub fn make_repetition(n: usize) -> Result<LinearCode, CodeError> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(CodeError::Invalid(format!(
            "repetition length must be odd and >= 3, got {n}"
        )));
    }
    let mut h = BitMatrix::zeros(n - 1, n)?;
    for j in 0..n - 1 {
        h.set(j, 0, true)?;
        h.set(j, j + 1, true)?;
    }
    LinearCode::from_parity_check(h)?
        .with_known(Some((n - 1) / 2), Some(n))
        .map(|c| c.with_name(format!("repetition({n})")))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-blank line as (1-based line number, integers).
    fn next_ints(&mut self, what: &str) -> Result<(usize, Vec<usize>), CodeError> {
        for (i, line) in self.inner.by_ref() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let ints = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>()
                        .map_err(|_| parse_err(line_no, format!("expected integer, found {tok:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            return Ok((line_no, ints));
        }
        Err(parse_err(
            0,
            format!("unexpected end of input, expected {what}"),
        ))
    }

    fn rest_is_blank(&mut self) -> Option<usize> {
        self.inner
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .map(|(i, _)| i + 1)
    }
}

fn expect_len(line: usize, v: &[usize], len: usize, what: &str) -> Result<(), CodeError> {
    if v.len() != len {
        return Err(parse_err(
            line,
            format!("{what}: expected {len} values, found {}", v.len()),
        ));
    }
    Ok(())
}

/// Reads one index list: `degree` indices in `1..=bound`, then zero padding.
/// Lines carrying exactly `degree` entries (no padding) are accepted too.
fn read_index_list(
    line: usize,
    v: &[usize],
    degree: usize,
    max_degree: usize,
    bound: usize,
) -> Result<Vec<usize>, CodeError> {
    if v.len() != max_degree && v.len() != degree {
        return Err(parse_err(
            line,
            format!(
                "expected {max_degree} entries (or {degree} unpadded), found {}",
                v.len()
            ),
        ));
    }
    let (idx, pad) = v.split_at(degree.min(v.len()));
    if let Some(&bad) = idx.iter().find(|&&x| x == 0 || x > bound) {
        return Err(parse_err(line, format!("index {bad} outside 1..={bound}")));
    }
    if pad.iter().any(|&x| x != 0) {
        return Err(parse_err(line, "non-zero entry in padding"));
    }
    let mut seen = idx.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != idx.len() {
        return Err(parse_err(line, "duplicate index"));
    }
    Ok(idx.iter().map(|x| x - 1).collect())
}

/// Parses a sparse parity-check matrix in alist format.
pub fn parse_alist(text: &str) -> Result<LinearCode, CodeError> {
    let mut lines = Lines::new(text);
    let (l1, dims) = lines.next_ints("dimensions")?;
    expect_len(l1, &dims, 2, "header")?;
    let (n, m) = (dims[0], dims[1]);
    if n == 0 || m == 0 {
        return Err(parse_err(l1, "dimensions must be positive"));
    }
    let (l2, maxes) = lines.next_ints("maximum degrees")?;
    expect_len(l2, &maxes, 2, "maximum degrees")?;
    let (max_col, max_row) = (maxes[0], maxes[1]);

    let (l3, col_deg) = lines.next_ints("column degrees")?;
    expect_len(l3, &col_deg, n, "column degrees")?;
    if let Some(&d) = col_deg.iter().find(|&&d| d > max_col || d > m) {
        return Err(parse_err(
            l3,
            format!("column degree {d} exceeds maximum {max_col}"),
        ));
    }
    let (l4, row_deg) = lines.next_ints("row degrees")?;
    expect_len(l4, &row_deg, m, "row degrees")?;
    if let Some(&d) = row_deg.iter().find(|&&d| d > max_row || d > n) {
        return Err(parse_err(
            l4,
            format!("row degree {d} exceeds maximum {max_row}"),
        ));
    }
    let col_sum: usize = col_deg.iter().sum();
    let row_sum: usize = row_deg.iter().sum();
    if col_sum != row_sum {
        return Err(parse_err(
            l4,
            format!("column-degree sum {col_sum} differs from row-degree sum {row_sum}"),
        ));
    }

    let mut h = BitMatrix::zeros(m, n)?;
    for (c, &deg) in col_deg.iter().enumerate() {
        let (line, v) = lines.next_ints("column index list")?;
        for r in read_index_list(line, &v, deg, max_col, m)? {
            h.set(r, c, true)?;
        }
    }
    for (r, &deg) in row_deg.iter().enumerate() {
        let (line, v) = lines.next_ints("row index list")?;
        let cols = read_index_list(line, &v, deg, max_row, n)?;
        if let Some(&c) = cols.iter().find(|&&c| !h.get(r, c)) {
            return Err(parse_err(
                line,
                format!(
                    "row {} lists column {} which the column section does not",
                    r + 1,
                    c + 1
                ),
            ));
        }
        // Degree counts already agree with the column section, so membership
        // in one direction implies equality.
    }
    if let Some(line) = lines.rest_is_blank() {
        return Err(parse_err(line, "trailing data after row lists"));
    }
    Ok(LinearCode::from_parity_check(h)?.with_name(format!("alist({n}x{m})")))
}

/// Canonical alist text: zero-padded, single-space separated, trailing newline.
pub fn serialize_alist(code: &LinearCode) -> String {
    let h = code.h();
    let (m, n) = (h.num_rows(), h.num_cols());
    let cols: Vec<Vec<usize>> = (0..n)
        .map(|c| (0..m).filter(|&r| h.get(r, c)).map(|r| r + 1).collect())
        .collect();
    let rows: Vec<Vec<usize>> = h
        .rows()
        .iter()
        .map(|r| r.support().into_iter().map(|c| c + 1).collect())
        .collect();
    let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = rows.iter().map(Vec::len).max().unwrap_or(0);

    let join =
        |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    let _ = writeln!(out, "{n} {m}");
    let _ = writeln!(out, "{max_col} {max_row}");
    let _ = writeln!(out, "{}", join(&mut cols.iter().map(Vec::len)));
    let _ = writeln!(out, "{}", join(&mut rows.iter().map(Vec::len)));
    for (list, width) in cols
        .iter()
        .map(|c| (c, max_col))
        .chain(rows.iter().map(|r| (r, max_row)))
    {
        let padded = list
            .iter()
            .copied()
            .chain(std::iter::repeat_n(0, width - list.len()));
        let _ = writeln!(out, "{}", join(&mut padded.into_iter()));
    }
    out
}

/// Parses rows of `0`/`1` symbols; spaces between symbols are optional.
pub fn parse_matrix_file(text: &str) -> Result<LinearCode, CodeError> {
    let mut rows = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut bits = Vec::new();
        for ch in trimmed.chars().filter(|c| !c.is_whitespace()) {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(parse_err(line_no, format!("non-binary symbol {other:?}")));
                }
            }
        }
        match width {
            None => width = Some(bits.len()),
            Some(w) if w != bits.len() => {
                return Err(parse_err(
                    line_no,
                    format!("row has {} columns, expected {w}", bits.len()),
                ));
            }
            _ => {}
        }
        rows.push(BitWord::from_bits(bits));
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no matrix rows"));
    }
    let h = BitMatrix::from_rows(rows)?;
    let (m, n) = (h.num_rows(), h.num_cols());
    Ok(LinearCode::from_parity_check(h)?.with_name(format!("matrix({n}x{m})")))
}
