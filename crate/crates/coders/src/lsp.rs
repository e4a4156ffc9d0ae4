//! Longest-string-pattern (LSP) sequences.
//!
//! For a lag l, a response takes part in a recurring pattern of length l
//! when it equals the response l items later. The l-pattern sequence scores
//! every item of a response vector by the length of the patterned stretch
//! it belongs to; items outside any recurring pattern score 1. The LSP
//! sequence is the elementwise maximum of the l-pattern sequences over
//! l = 1..=l_max.
//!
//! Invariable careless responding (straightlining, repeating short
//! patterns) drives these scores from small values to the length of the
//! careless tail, which is the shift the changepoint test picks up.

use crate::data::ResponseMatrix;
use crate::error::{Error, Result};

/// Scores each position of `x` against a recurring pattern of length `l`.
///
/// A streak of successful comparisons between positions k and k+l is
/// credited to the positions where the comparisons started. A streak that
/// is still open at the end of the vector is resolved optimistically: if
/// at least one full pattern repetition was seen (streak >= l), the whole
/// remaining stretch including the final l items is credited with its
/// total length; a shorter open streak is truncated instead, and the final
/// l items, which have no comparison partner, fall back to 1.
pub fn l_pattern(x: &[u8], l: usize) -> Result<Vec<u32>> {
    let p = x.len();
    if p < 2 {
        return Err(Error::Dimension(format!("need at least 2 responses, found {p}")));
    }
    if l < 1 || l > p - 1 {
        return Err(Error::Config(format!("pattern length {l} outside 1..={}", p - 1)));
    }
    let mut out = vec![0u32; p];
    let mut streak: u32 = 1;
    let mut start: usize = 0;
    for k in 0..=(p - l - 1) {
        if x[k] == x[k + l] {
            streak += 1;
        } else {
            out[start..=k].fill(streak);
            start = k + 1;
            streak = 1;
        }
    }
    if streak as usize >= l {
        out[start..p].fill(streak + l as u32 - 1);
    } else if streak > 1 {
        out[start..=(p - l - 1)].fill(streak - 1);
        out[(p - l)..p].fill(1);
    } else {
        out[(p - l)..p].fill(1);
    }
    Ok(out)
}

/// Elementwise maximum of the l-pattern sequences for l = 1..=l_max.
pub fn lsp_sequence(x: &[u8], l_max: usize) -> Result<Vec<u32>> {
    let p = x.len();
    if p < 2 {
        return Err(Error::Dimension(format!("need at least 2 responses, found {p}")));
    }
    if l_max < 1 || l_max > p - 1 {
        return Err(Error::Config(format!("l_max {l_max} outside 1..={}", p - 1)));
    }
    let mut best = l_pattern(x, 1)?;
    for l in 2..=l_max {
        let lp = l_pattern(x, l)?;
        for (b, v) in best.iter_mut().zip(lp) {
            *b = (*b).max(v);
        }
    }
    Ok(best)
}

/// LSP sequences for every respondent.
///
/// Rows are scored independently; `l_max` defaults to the largest
/// per-item category count, capped at p-1 so short surveys stay valid.
pub fn lsp_matrix(m: &ResponseMatrix, l_max: Option<usize>) -> Result<Vec<Vec<u32>>> {
    let default = m.categories().iter().copied().max().unwrap_or(1) as usize;
    let l_max = l_max.unwrap_or_else(|| default.clamp(1, m.p() - 1));
    m.rows().map(|row| lsp_sequence(row, l_max)).collect()
}
