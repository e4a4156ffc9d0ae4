//! Brute-force reference implementations the test suites compare against.
//!
//! Both oracles are written window-first from the definitions, not as
//! streaming scans, so they share no structure with the library code.

/// Pattern score per position via explicit enumeration of maximal
/// period-`l` windows.
///
/// A window [u, w] is l-periodic when x[i] == x[i+l] for every i in
/// [u, w-l]. For each maximal window that closes before the end of the
/// vector, positions u..=w-l+1 receive the number of compared pairs plus
/// one. A window touching the end is truncated: if it spans at least
/// 2l-1 positions the whole window receives its covered length,
/// otherwise positions up to p-l-1 receive one less than the pair count
/// and the trailing l positions stay at one.
pub fn oracle_l_pattern(x: &[u8], l: usize) -> Vec<u32> {
    let p = x.len();
    assert!(l >= 1 && l < p, "pattern length {l} out of range for {p} items");
    let periodic = |u: usize, w: usize| (u..=(w - l)).all(|i| x[i] == x[i + l]);
    let mut out = vec![1u32; p];
    for u in 0..p {
        for w in (u + l)..p {
            let maximal = periodic(u, w)
                && (u == 0 || !periodic(u - 1, w))
                && (w == p - 1 || !periodic(u, w + 1));
            if !maximal {
                continue;
            }
            let matches = w - l - u + 1;
            if w < p - 1 {
                for slot in &mut out[u..=(w - l + 1)] {
                    *slot = (matches + 1) as u32;
                }
            } else if matches + 1 >= l {
                for slot in &mut out[u..p] {
                    *slot = (p - u) as u32;
                }
            } else {
                for slot in &mut out[u..=(p - l - 1)] {
                    *slot = matches as u32;
                }
            }
        }
    }
    out
}

/// Direct evaluation of the self-normalized statistic trace from the
/// segment-mean definitions; `points[j]` is the d-vector at item j+1.
///
/// Entries are `None` where the normalizer is numerically singular
/// (condition above 1e12), matching the exclude policy.
pub fn oracle_trace(points: &[Vec<f64>], symmetric_right: bool) -> Vec<Option<f64>> {
    let p = points.len();
    let d = points[0].len();
    assert!(p >= 4 && d >= 1 && d <= 2);
    let mean = |a: usize, b: usize| -> Vec<f64> {
        let mut m = vec![0.0; d];
        for row in &points[(a - 1)..b] {
            for (mc, v) in m.iter_mut().zip(row) {
                *mc += v;
            }
        }
        let len = (b - a + 1) as f64;
        m.iter().map(|v| v / len).collect()
    };
    (2..=p)
        .map(|k| {
            let left = mean(1, k - 1);
            let right = mean(k, p);
            let scale = ((k - 1) * (p - k + 1)) as f64 / (p as f64).powf(1.5);
            let dvec: Vec<f64> =
                left.iter().zip(&right).map(|(l, r)| scale * (l - r)).collect();

            let mut v = [[0.0f64; 2]; 2];
            if k > 2 {
                for i in 1..=(k - 2) {
                    let w = ((i * (k - 1 - i)) as f64).powi(2)
                        / ((p as f64).powi(2) * ((k - 1) as f64).powi(2));
                    let a = mean(1, i);
                    let b = mean(i + 1, k - 1);
                    for r in 0..d {
                        for c in 0..d {
                            v[r][c] += w * (a[r] - b[r]) * (a[c] - b[c]);
                        }
                    }
                }
            }
            if k < p {
                let denom = if symmetric_right {
                    ((p - k + 1) as f64).powi(2)
                } else {
                    ((k - 1) as f64).powi(2)
                };
                for i in (k + 1)..=p {
                    let w = (((p - i + 1) * (i - k)) as f64).powi(2)
                        / ((p as f64).powi(2) * denom);
                    let a = mean(i, p);
                    let b = mean(k, i - 1);
                    for r in 0..d {
                        for c in 0..d {
                            v[r][c] += w * (a[r] - b[r]) * (a[c] - b[c]);
                        }
                    }
                }
            }

            if d == 1 {
                if v[0][0] <= 0.0 {
                    return None;
                }
                return Some(dvec[0] * dvec[0] / v[0][0]);
            }
            let (a, b, c) = (v[0][0], v[0][1], v[1][1]);
            let half_trace = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            let (lo, hi) = (half_trace - disc, half_trace + disc);
            if !(lo > hi.abs() / 1e12) {
                return None;
            }
            let det = a * c - b * b;
            let (x, y) = (dvec[0], dvec[1]);
            Some((c * x * x - 2.0 * b * x * y + a * y * y) / det)
        })
        .collect()
}
