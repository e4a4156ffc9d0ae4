//! Self-normalized changepoint test for short multivariate series.
//!
//! For a p x d series Y and a candidate changepoint k, the test contrasts
//! the mean before k with the mean from k on,
//!
//! ```text
//! D_p(k) = ((k-1)(p-k+1) / p^(3/2)) * (mean(Y[1..k-1]) - mean(Y[k..p])),
//! ```
//!
//! and normalizes by V_p(k) = L_p(k) + R_p(k), the sum of within-segment
//! cumulative contrasts on either side of k:
//!
//! ```text
//! L_p(k) = sum_{i=1}^{k-2} [i^2 (k-1-i)^2 / (p^2 (k-1)^2)]
//!          * (mean(Y[1..i]) - mean(Y[i+1..k-1])) (..)^T
//! R_p(k) = sum_{i=k+1}^{p} [(p-i+1)^2 (i-k)^2 / (p^2 w)]
//!          * (mean(Y[i..p]) - mean(Y[k..i-1])) (..)^T
//! ```
//!
//! with T_p(k) = D_p(k)^T V_p(k)^{-1} D_p(k). The statistic SN_p is the
//! maximum of T_p(k) over k = 2..=p; it is compared against a tabulated
//! critical value and the maximizing k is the estimated onset.
//!
//! Self-normalization avoids any long-run variance estimate, which keeps
//! the test usable on the short, strongly dependent series produced per
//! respondent. The right-segment weight w defaults to (p-k+1)^2, the
//! mirror image of the left segment; w = (k-1)^2 is available as a
//! configuration switch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Condition-number bound above which a normalizer counts as singular.
const CONDITION_LIMIT: f64 = 1e12;

/// A p x d series with d in {1, 2}, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    values: Vec<f64>,
    p: usize,
    d: usize,
}

impl Series {
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::check_finite(&values)?;
        Ok(Series { p: values.len(), d: 1, values })
    }

    /// Interleaves two coordinates of equal length.
    pub fn bivariate(first: &[f64], second: &[f64]) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::Dimension(format!(
                "coordinate lengths differ: {} vs {}",
                first.len(),
                second.len()
            )));
        }
        let mut values = Vec::with_capacity(2 * first.len());
        for (a, b) in first.iter().zip(second) {
            values.push(*a);
            values.push(*b);
        }
        Self::check_finite(&values)?;
        Ok(Series { p: first.len(), d: 2, values })
    }

    fn check_finite(values: &[f64]) -> Result<()> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("series contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Value at item j (0-based) and coordinate c.
    pub fn at(&self, j: usize, c: usize) -> f64 {
        self.values[j * self.d + c]
    }
}

/// What to do at a k whose normalizer V_p(k) is singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SingularPolicy {
    /// Skip that k; SN_p is the maximum over the remaining candidates.
    Exclude,
    /// Add the given ridge to the diagonal of V_p(k) before inverting.
    Ridge(f64),
}

/// Denominator of the right-segment weight in R_p(k).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightVarianceWeight {
    /// (p-k+1)^2, mirroring the left segment. Default.
    Symmetric,
    /// (k-1)^2, the left segment length, kept for auditability.
    LeftSegment,
}

#[derive(Debug, Clone)]
pub struct SnTestConfig {
    /// Significance level; must be one of the tabulated levels.
    pub alpha: f64,
    /// Standard deviation of the jitter callers add to discrete coordinates.
    pub noise_sd: f64,
    /// Seed for that jitter.
    pub seed: u64,
    pub singular_policy: SingularPolicy,
    pub right_weight: RightVarianceWeight,
}

impl Default for SnTestConfig {
    fn default() -> Self {
        SnTestConfig {
            alpha: 0.001,
            noise_sd: 0.01,
            seed: 0,
            singular_policy: SingularPolicy::Exclude,
            right_weight: RightVarianceWeight::Symmetric,
        }
    }
}

/// Outcome of the test on one series.
#[derive(Debug, Clone)]
pub struct ChangepointResult {
    /// max_k T_p(k); `None` when every candidate was excluded.
    pub sn: Option<f64>,
    /// Smallest k attaining the maximum (1-based item index).
    pub argmax: Option<usize>,
    /// Estimated onset; set only when flagged.
    pub onset: Option<usize>,
    pub flagged: bool,
    /// Critical value the statistic was compared against.
    pub critical: f64,
    /// T_p(k) for k = 2..=p; `None` marks an excluded candidate.
    pub trace: Vec<Option<f64>>,
    /// Number of excluded candidates.
    pub excluded: usize,
}

impl ChangepointResult {
    /// k value for index i of the trace.
    pub fn trace_k(i: usize) -> usize {
        i + 2
    }

    /// True when no candidate k had an invertible normalizer.
    pub fn degenerate(&self) -> bool {
        self.sn.is_none()
    }
}

/// Mean of coordinates over the 1-based inclusive item range a..=b.
pub fn segment_mean(y: &Series, a: usize, b: usize) -> Result<Vec<f64>> {
    if a < 1 || b > y.p() || a > b {
        return Err(Error::Dimension(format!(
            "segment {a}..={b} invalid for a series of length {}",
            y.p()
        )));
    }
    let len = (b - a + 1) as f64;
    let mut m = vec![0.0; y.d()];
    for j in (a - 1)..b {
        for (c, mc) in m.iter_mut().enumerate() {
            *mc += y.at(j, c);
        }
    }
    for mc in &mut m {
        *mc /= len;
    }
    Ok(m)
}

/// Tabulated critical values for SN_p.
///
/// Levels 0.01, 0.005 and 0.001 are available for d = 1 and d = 2. Any
/// other combination is an error rather than an extrapolation.
pub fn critical_value(alpha: f64, d: usize) -> Result<f64> {
    const TABLE: [(usize, f64, f64); 6] = [
        (1, 0.01, 68.6),
        (1, 0.005, 84.6),
        (1, 0.001, 121.9),
        (2, 0.01, 117.7),
        (2, 0.005, 135.3),
        (2, 0.001, 192.5),
    ];
    TABLE
        .iter()
        .find(|(dd, a, _)| *dd == d && (a - alpha).abs() < 1e-12)
        .map(|(_, _, k)| *k)
        .ok_or(Error::UntabulatedCriticalValue { alpha, d })
}

/// Adds zero-mean Gaussian noise to a copy of `values`.
///
/// The detector applies this to the discrete LSP coordinate so that the
/// normalizer matrices stay invertible; `noise_sd = 0` returns the input
/// unchanged.
pub fn inject_jitter(values: &[f64], noise_sd: f64, seed: u64) -> Result<Vec<f64>> {
    if noise_sd < 0.0 || !noise_sd.is_finite() {
        return Err(Error::Config(format!("noise_sd must be finite and >= 0, got {noise_sd}")));
    }
    if noise_sd == 0.0 {
        return Ok(values.to_vec());
    }
    let normal = Normal::new(0.0, noise_sd)
        .map_err(|e| Error::Config(format!("bad jitter distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(values.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

struct Prefix {
    sums: Vec<[f64; 2]>,
    d: usize,
}

impl Prefix {
    fn new(y: &Series) -> Self {
        let mut sums = vec![[0.0f64; 2]; y.p() + 1];
        for j in 0..y.p() {
            for c in 0..y.d() {
                sums[j + 1][c] = sums[j][c] + y.at(j, c);
            }
        }
        Prefix { sums, d: y.d() }
    }

    /// Mean over 1-based inclusive a..=b.
    fn mean(&self, a: usize, b: usize) -> [f64; 2] {
        let len = (b - a + 1) as f64;
        let mut m = [0.0; 2];
        for c in 0..self.d {
            m[c] = (self.sums[b][c] - self.sums[a - 1][c]) / len;
        }
        m
    }
}

fn accumulate(v: &mut [[f64; 2]; 2], w: f64, x: &[f64; 2], ymean: &[f64; 2], d: usize) {
    let mut diff = [0.0; 2];
    for c in 0..d {
        diff[c] = x[c] - ymean[c];
    }
    for r in 0..d {
        for c in 0..d {
            v[r][c] += w * diff[r] * diff[c];
        }
    }
}

/// D^T V^{-1} D, or `None` when V is singular under the exclude policy.
fn quad_form(dv: &[f64; 2], v: &[[f64; 2]; 2], d: usize, policy: SingularPolicy) -> Option<f64> {
    match d {
        1 => {
            let mut a = v[0][0];
            if let SingularPolicy::Ridge(eps) = policy {
                a += eps;
            }
            if !a.is_finite() || a <= 0.0 {
                return None;
            }
            Some(dv[0] * dv[0] / a)
        }
        2 => {
            let (mut a, b, mut c) = (v[0][0], v[0][1], v[1][1]);
            if let SingularPolicy::Ridge(eps) = policy {
                a += eps;
                c += eps;
            }
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                return None;
            }
            let half_tr = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            let lambda_max = half_tr + disc;
            let lambda_min = half_tr - disc;
            if !(lambda_max > 0.0) || !(lambda_min > lambda_max / CONDITION_LIMIT) {
                return None;
            }
            let det = a * c - b * b;
            Some((dv[0] * dv[0] * c - 2.0 * dv[0] * dv[1] * b + dv[1] * dv[1] * a) / det)
        }
        _ => unreachable!("series dimension is checked at construction"),
    }
}

fn trace_impl(
    y: &Series,
    policy: SingularPolicy,
    weight: RightVarianceWeight,
) -> Vec<Option<f64>> {
    let p = y.p();
    let d = y.d();
    let pf = p as f64;
    let norm = pf * pf.sqrt();
    let prefix = Prefix::new(y);
    let mut out = Vec::with_capacity(p - 1);
    for k in 2..=p {
        let left = prefix.mean(1, k - 1);
        let right = prefix.mean(k, p);
        let scale = ((k - 1) as f64) * ((p - k + 1) as f64) / norm;
        let mut dv = [0.0; 2];
        for c in 0..d {
            dv[c] = scale * (left[c] - right[c]);
        }

        let mut v = [[0.0f64; 2]; 2];
        let left_len = (k - 1) as f64;
        let denom_left = pf * pf * left_len * left_len;
        for i in 1..=k.saturating_sub(2) {
            let w = (i as f64).powi(2) * ((k - 1 - i) as f64).powi(2) / denom_left;
            accumulate(&mut v, w, &prefix.mean(1, i), &prefix.mean(i + 1, k - 1), d);
        }
        let right_seg = match weight {
            RightVarianceWeight::Symmetric => ((p - k + 1) as f64).powi(2),
            RightVarianceWeight::LeftSegment => left_len * left_len,
        };
        let denom_right = pf * pf * right_seg;
        for i in (k + 1)..=p {
            let w = ((p - i + 1) as f64).powi(2) * ((i - k) as f64).powi(2) / denom_right;
            accumulate(&mut v, w, &prefix.mean(i, p), &prefix.mean(k, i - 1), d);
        }

        out.push(quad_form(&dv, &v, d, policy));
    }
    out
}

/// T_p(k) for one candidate k (1-based, 2 <= k <= p).
pub fn sn_statistic(
    y: &Series,
    k: usize,
    policy: SingularPolicy,
    weight: RightVarianceWeight,
) -> Result<Option<f64>> {
    if y.p() < 4 {
        return Err(Error::Dimension(format!("series of length {} too short for the test", y.p())));
    }
    if k < 2 || k > y.p() {
        return Err(Error::Dimension(format!("candidate k={k} outside 2..={}", y.p())));
    }
    Ok(trace_impl(y, policy, weight)[k - 2])
}

/// Runs the test on one series: computes the full trace, maximizes it,
/// and compares against the tabulated critical value.
pub fn detect_changepoint(y: &Series, cfg: &SnTestConfig) -> Result<ChangepointResult> {
    if y.p() < 4 {
        return Err(Error::Dimension(format!("series of length {} too short for the test", y.p())));
    }
    let critical = critical_value(cfg.alpha, y.d())?;
    let trace = trace_impl(y, cfg.singular_policy, cfg.right_weight);
    let excluded = trace.iter().filter(|t| t.is_none()).count();
    let mut sn: Option<f64> = None;
    let mut argmax: Option<usize> = None;
    for (i, t) in trace.iter().enumerate() {
        if let Some(t) = *t {
            if sn.is_none_or(|best| t > best) {
                sn = Some(t);
                argmax = Some(ChangepointResult::trace_k(i));
            }
        }
    }
    let flagged = sn.is_some_and(|s| s > critical);
    Ok(ChangepointResult {
        sn,
        argmax,
        onset: if flagged { argmax } else { None },
        flagged,
        critical,
        trace,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cfg(alpha: f64) -> SnTestConfig {
        SnTestConfig { alpha, ..SnTestConfig::default() }
    }

    #[test]
    fn segment_mean_basics() {
        let y = Series::univariate(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(segment_mean(&y, 1, 4).unwrap(), vec![2.5]);
        assert_eq!(segment_mean(&y, 2, 2).unwrap(), vec![2.0]);
        let c = Series::univariate(vec![7.0; 5]).unwrap();
        assert_eq!(segment_mean(&c, 1, 5).unwrap(), vec![7.0]);
        assert!(segment_mean(&y, 0, 2).is_err());
        assert!(segment_mean(&y, 3, 2).is_err());
        assert!(segment_mean(&y, 1, 5).is_err());
    }

    #[test]
    fn critical_values_tabulated() {
        assert_eq!(critical_value(0.01, 1).unwrap(), 68.6);
        assert_eq!(critical_value(0.005, 1).unwrap(), 84.6);
        assert_eq!(critical_value(0.001, 1).unwrap(), 121.9);
        assert_eq!(critical_value(0.01, 2).unwrap(), 117.7);
        assert_eq!(critical_value(0.005, 2).unwrap(), 135.3);
        assert_eq!(critical_value(0.001, 2).unwrap(), 192.5);
        assert!(critical_value(0.05, 1).is_err());
        assert!(critical_value(0.01, 3).is_err());
    }

    #[test]
    fn constant_series_is_degenerate() {
        let y = Series::univariate(vec![3.0; 20]).unwrap();
        let r = detect_changepoint(&y, &cfg(0.01)).unwrap();
        assert!(r.degenerate());
        assert!(!r.flagged);
        assert_eq!(r.excluded, 19);
    }

    #[test]
    fn ridge_defines_constant_series() {
        let y = Series::univariate(vec![3.0; 20]).unwrap();
        let mut c = cfg(0.01);
        c.singular_policy = SingularPolicy::Ridge(1e-10);
        let r = detect_changepoint(&y, &c).unwrap();
        assert_eq!(r.sn, Some(0.0));
        assert!(!r.flagged);
    }

    #[test]
    fn noiseless_step_is_singular_at_the_step() {
        let mut v = vec![0.0; 10];
        v.extend(vec![1.0; 10]);
        let y = Series::univariate(v).unwrap();
        let r = detect_changepoint(&y, &cfg(0.01)).unwrap();
        // k = 11 is trace index 9; both segments are internally constant there.
        assert!(r.trace[9].is_none());
        assert!(r.excluded >= 1);
    }

    #[test]
    fn shifted_series_is_flagged_near_the_shift() {
        let mut rng = crate::seed::rng(99, "shift-test", 0);
        let p = 300;
        let true_k = 150; // 1-based first item of the shifted segment
        let values: Vec<f64> = (0..p)
            .map(|j| {
                let noise: f64 = rng.sample(rand_distr::StandardNormal);
                if j + 1 >= true_k {
                    noise + 3.0
                } else {
                    noise
                }
            })
            .collect();
        let y = Series::univariate(values).unwrap();
        let r = detect_changepoint(&y, &cfg(0.01)).unwrap();
        assert!(r.flagged);
        let k = r.onset.unwrap();
        assert!((148..=152).contains(&k), "onset {k}");
        for t in r.trace.iter().flatten() {
            assert!(*t >= -1e-9, "negative statistic {t}");
        }
    }

    #[test]
    fn short_series_rejected() {
        for len in 2..4 {
            let y = Series::univariate((0..len).map(f64::from).collect()).unwrap();
            assert!(detect_changepoint(&y, &cfg(0.01)).is_err(), "length {len}");
        }
    }

    #[test]
    fn non_finite_series_rejected() {
        assert!(Series::univariate(vec![1.0, f64::NAN, 2.0]).is_err());
    }

    #[test]
    fn jitter_zero_sd_is_identity() {
        let v = vec![1.0, 2.0, 3.0];
        assert_eq!(inject_jitter(&v, 0.0, 7).unwrap(), v);
        assert!(inject_jitter(&v, -0.1, 7).is_err());
    }

    #[test]
    fn jitter_is_deterministic_and_scaled() {
        let v = vec![0.0; 10_000];
        let a = inject_jitter(&v, 0.01, 42).unwrap();
        let b = inject_jitter(&v, 0.01, 42).unwrap();
        assert_eq!(a, b);
        let c = inject_jitter(&v, 0.01, 43).unwrap();
        assert_ne!(a, c);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        let var = a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (a.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((0.0095..=0.0105).contains(&sd), "sample sd {sd}");
    }

    #[test]
    fn untabulated_alpha_is_an_error() {
        let y = Series::univariate(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(detect_changepoint(&y, &cfg(0.05)).is_err());
    }
}
