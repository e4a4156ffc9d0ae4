//! Classical whole-respondent careless-responding screeners.
//!
//! These produce one score per respondent and a cutoff-based flag; unlike
//! the changepoint detector they say nothing about where carelessness
//! starts. They serve as baselines and as cheap pre-checks.

use crate::data::{Keying, ResponseMatrix, SurveyDesign};
use crate::error::{Error, Result};

/// Flagging cutoffs. A respondent is flagged when
/// longstring > `longstring`, reliability < `reliability`, or the
/// sign-reversed antonym score < `antonym`. Undefined scores never flag.
#[derive(Debug, Clone)]
pub struct ScreenerCutoffs {
    pub longstring: u32,
    pub reliability: f64,
    pub antonym: f64,
    /// Inter-item correlation at or below which a pair counts as antonyms.
    pub antonym_pair_threshold: f64,
}

impl Default for ScreenerCutoffs {
    fn default() -> Self {
        ScreenerCutoffs {
            longstring: 6,
            reliability: 0.3,
            antonym: -0.03,
            antonym_pair_threshold: -0.60,
        }
    }
}

/// Length of the longest run of identical consecutive responses.
pub fn longstring_row(x: &[u8]) -> u32 {
    let mut best = 1u32;
    let mut run = 1u32;
    for w in x.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            run = 1;
        }
        best = best.max(run);
    }
    best
}

/// Longstring index for every respondent.
pub fn longstring_index(m: &ResponseMatrix) -> Vec<u32> {
    m.rows().map(longstring_row).collect()
}

pub fn longstring_flags(scores: &[u32], cutoff: u32) -> Vec<bool> {
    scores.iter().map(|&s| s > cutoff).collect()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Response value in construct direction: negatively keyed items are
/// mirrored to L_j + 1 - x. Missing answers (0) stay 0.
fn keyed_value(x: u8, keying: Keying, l: u8) -> f64 {
    match keying {
        Keying::Positive => f64::from(x),
        Keying::Negative => {
            if x == 0 {
                0.0
            } else {
                f64::from(l) + 1.0 - f64::from(x)
            }
        }
    }
}

/// Split-half consistency per respondent.
///
/// Within each construct, items are split by within-construct presentation
/// order into odd and even halves and averaged (in construct direction, so
/// keying cannot cancel the halves). The two half-score vectors across
/// constructs are correlated and the correlation is stepped up with the
/// Spearman-Brown correction 2r / (1 + r).
///
/// `None` marks respondents with zero variance in either half-score
/// vector; such respondents are never flagged. Constructs with fewer than
/// two items are skipped; at least two usable constructs are required.
pub fn personal_reliability(m: &ResponseMatrix, d: &SurveyDesign) -> Result<Vec<Option<f64>>> {
    if d.p() != m.p() {
        return Err(Error::Dimension(format!(
            "design covers {} items but data has {}",
            d.p(),
            m.p()
        )));
    }
    let usable: Vec<Vec<usize>> =
        d.items_by_construct().into_iter().filter(|items| items.len() >= 2).collect();
    if usable.len() < 2 {
        return Err(Error::Design(
            "personal reliability needs at least two constructs with two or more items".into(),
        ));
    }
    let cats = m.categories();
    let keying = d.keying();
    let scores = m
        .rows()
        .map(|row| {
            let mut odd = Vec::with_capacity(usable.len());
            let mut even = Vec::with_capacity(usable.len());
            for items in &usable {
                let mut sums = [0.0f64; 2];
                let mut counts = [0usize; 2];
                for (pos, &j) in items.iter().enumerate() {
                    let half = pos % 2;
                    sums[half] += keyed_value(row[j], keying[j], cats[j]);
                    counts[half] += 1;
                }
                odd.push(sums[0] / counts[0] as f64);
                even.push(sums[1] / counts[1] as f64);
            }
            pearson(&odd, &even).map(|r| 2.0 * r / (1.0 + r))
        })
        .collect();
    Ok(scores)
}

pub fn reliability_flags(scores: &[Option<f64>], cutoff: f64) -> Vec<bool> {
    scores.iter().map(|s| s.is_some_and(|v| v < cutoff)).collect()
}

/// Antonym scores: `None` when fewer than two qualifying pairs exist.
#[derive(Debug, Clone)]
pub struct AntonymScores {
    /// Qualifying item pairs (0-based), most negative correlation first.
    pub pairs: Vec<(usize, usize)>,
    /// Sign-reversed per-respondent correlations over the pairs.
    pub scores: Option<Vec<Option<f64>>>,
}

/// Psychometric antonyms on raw responses.
///
/// Item pairs whose sample correlation is at or below the threshold are
/// collected; per respondent, the first and second pair members are
/// correlated across pairs and the sign is reversed, so attentive
/// respondents score high. Raw responses are used on purpose: the
/// negative keying is exactly what creates antonym pairs.
pub fn psychometric_antonym(m: &ResponseMatrix, pair_threshold: f64) -> Result<AntonymScores> {
    let p = m.p();
    let n = m.n();
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..n).map(|i| f64::from(m.get(i, j))).collect())
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for j1 in 0..p {
        for j2 in (j1 + 1)..p {
            if let Some(r) = pearson(&cols[j1], &cols[j2]) {
                if r <= pair_threshold {
                    pairs.push((r, j1, j2));
                }
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let pair_idx: Vec<(usize, usize)> = pairs.iter().map(|&(_, a, b)| (a, b)).collect();
    if pair_idx.len() < 2 {
        return Ok(AntonymScores { pairs: pair_idx, scores: None });
    }
    let scores = m
        .rows()
        .map(|row| {
            let first: Vec<f64> = pair_idx.iter().map(|&(a, _)| f64::from(row[a])).collect();
            let second: Vec<f64> = pair_idx.iter().map(|&(_, b)| f64::from(row[b])).collect();
            pearson(&first, &second).map(|r| -r)
        })
        .collect();
    Ok(AntonymScores { pairs: pair_idx, scores: Some(scores) })
}

pub fn antonym_flags(scores: &[Option<f64>], cutoff: f64) -> Vec<bool> {
    scores.iter().map(|s| s.is_some_and(|v| v < cutoff)).collect()
}
