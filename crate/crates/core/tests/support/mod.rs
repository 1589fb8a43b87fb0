//! Independent oracles shared by the integration tests. Everything here
//! deliberately re-derives results through a different route than the
//! library: library rationals instead of integer cross-multiplication,
//! direct eigendecomposition instead of whitening + SVD, naive per-pair
//! loops instead of blocked matrix products, plain recursion instead of
//! dynamic programming, and numerical quadrature instead of the incomplete
//! beta function.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num::rational::Ratio;
use num::Zero;

/// Brute-force PHOC bits via `num::rational` interval arithmetic: for every
/// (position, level, region) triple test the half-width overlap rule, with
/// the maximal-overlap fallback when no region qualifies.
pub fn phoc_oracle(word: &str, charset: &[char], levels: &[usize]) -> Vec<bool> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len() as i64;
    let dim: usize = charset.len() * levels.iter().sum::<usize>();
    let mut bits = vec![false; dim];
    let overlap = |k: i64, level: i64, r: i64| -> Ratio<i64> {
        let char_lo = Ratio::new(k, n);
        let char_hi = Ratio::new(k + 1, n);
        let reg_lo = Ratio::new(r, level);
        let reg_hi = Ratio::new(r + 1, level);
        let lo = char_lo.max(reg_lo);
        let hi = char_hi.min(reg_hi);
        if hi > lo {
            hi - lo
        } else {
            Ratio::zero()
        }
    };
    for (k, c) in chars.iter().enumerate() {
        let Some(ci) = charset.iter().position(|x| x == c) else {
            continue;
        };
        let half_char = Ratio::new(1i64, 2 * n);
        let mut offset = 0usize;
        for &level in levels {
            let l = level as i64;
            let qualifying: Vec<usize> = (0..l)
                .filter(|&r| overlap(k as i64, l, r) >= half_char)
                .map(|r| r as usize)
                .collect();
            let regions = if qualifying.is_empty() {
                let best = (0..l).map(|r| overlap(k as i64, l, r)).max().unwrap();
                (0..l)
                    .filter(|&r| overlap(k as i64, l, r) == best)
                    .map(|r| r as usize)
                    .collect()
            } else {
                qualifying
            };
            for r in regions {
                bits[(offset + r) * charset.len() + ci] = true;
            }
            offset += level;
        }
    }
    bits
}

/// Every word of length 1..=max_len over the given alphabet.
pub fn all_words(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut words: Vec<String> = vec![String::new()];
    let mut out = Vec::new();
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &words {
            for &c in alphabet {
                let mut s = w.clone();
                s.push(c);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        words = next;
    }
    out
}

/// Canonical correlations by direct eigendecomposition of the regularized
/// generalized eigenproblem: eigenvalues of
/// (Cxx + lI)^-1 Cxy (Cyy + lI)^-1 Cyx are the squared correlations.
pub fn cca_correlations_oracle(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
    p: usize,
) -> Vec<f64> {
    let d = x.nrows();
    let n = x.ncols();
    let scale = 1.0 / (n as f64 - 1.0);
    let mean_x = x.column_mean();
    let mean_y = y.column_mean();
    let mut xc = x.clone();
    let mut yc = y.clone();
    for j in 0..n {
        let mut c = xc.column_mut(j);
        c -= &mean_x;
        let mut c = yc.column_mut(j);
        c -= &mean_y;
    }
    let mut cxx = (&xc * xc.transpose()) * scale;
    let mut cyy = (&yc * yc.transpose()) * scale;
    for i in 0..d {
        cxx[(i, i)] += lambda;
        cyy[(i, i)] += lambda;
    }
    let cxy = (&xc * yc.transpose()) * scale;
    let cxx_inv = cxx.try_inverse().expect("regularized Cxx invertible");
    let cyy_inv = cyy.try_inverse().expect("regularized Cyy invertible");
    let m = cxx_inv * &cxy * cyy_inv * cxy.transpose();
    let eigen = m.complex_eigenvalues();
    let mut rho: Vec<f64> = eigen
        .iter()
        .map(|z| {
            assert!(
                z.im.abs() < 1e-9,
                "generalized eigenvalue unexpectedly complex: {z}"
            );
            z.re.max(0.0).sqrt()
        })
        .collect();
    rho.sort_by(|a, b| b.total_cmp(a));
    rho.truncate(p);
    rho
}

/// Plain cosine over float slices; callers guarantee nonzero inputs.
pub fn cosine_naive(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    dot / (nx * ny)
}

/// O(m^2) hub penalties: full pairwise cosine table, sort, take k.
pub fn rk_oracle(columns: &[Vec<f64>], k: usize) -> Vec<f64> {
    let m = columns.len();
    let k_eff = k.min(m.saturating_sub(1));
    let mut rk = vec![0.0; m];
    if k_eff == 0 {
        return rk;
    }
    for j in 0..m {
        let mut sims: Vec<f64> = (0..m)
            .filter(|&i| i != j)
            .map(|i| cosine_naive(&columns[i], &columns[j]))
            .collect();
        sims.sort_by(|a, b| b.total_cmp(a));
        rk[j] = sims[..k_eff].iter().sum::<f64>() / k_eff as f64;
    }
    rk
}

/// Exhaustive scoring oracle: every candidate scored with naive loops, then
/// sorted by descending score with ascending-index tie-break.
pub fn ranking_oracle(
    query: &[f64],
    columns: &[Vec<f64>],
    rk: &[f64],
    k: usize,
    csls: bool,
) -> Vec<(usize, f64)> {
    let m = columns.len();
    let sims: Vec<f64> = (0..m).map(|j| cosine_naive(query, &columns[j])).collect();
    let scores: Vec<f64> = if csls {
        let k_eff = k.min(m);
        let mut sorted = sims.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let rq = if k_eff == 0 {
            0.0
        } else {
            sorted[..k_eff].iter().sum::<f64>() / k_eff as f64
        };
        (0..m).map(|j| 2.0 * sims[j] - rq - rk[j]).collect()
    } else {
        sims
    };
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Exponential-time recursive Levenshtein: explores every edit script.
pub fn levenshtein_oracle(s: &[char], t: &[char]) -> usize {
    if s.is_empty() {
        return t.len();
    }
    if t.is_empty() {
        return s.len();
    }
    let sub = levenshtein_oracle(&s[1..], &t[1..]) + usize::from(s[0] != t[0]);
    let del = levenshtein_oracle(&s[1..], t) + 1;
    let ins = levenshtein_oracle(s, &t[1..]) + 1;
    sub.min(del).min(ins)
}

/// Recursive weighted edit cost over all scripts.
pub fn weighted_oracle(
    s: &[char],
    t: &[char],
    sub: &dyn Fn(char, char) -> f64,
    ins: &dyn Fn(char) -> f64,
    del: &dyn Fn(char) -> f64,
) -> f64 {
    if s.is_empty() {
        return t.iter().map(|&c| ins(c)).sum();
    }
    if t.is_empty() {
        return s.iter().map(|&c| del(c)).sum();
    }
    let a = weighted_oracle(&s[1..], &t[1..], sub, ins, del) + sub(s[0], t[0]);
    let b = weighted_oracle(&s[1..], t, sub, ins, del) + del(s[0]);
    let c = weighted_oracle(s, &t[1..], sub, ins, del) + ins(t[0]);
    a.min(b).min(c)
}

/// Two-sided Student-t p-value by adaptive Simpson quadrature of the density
/// tail, mapped to a finite interval with x = |t| + u/(1-u).
pub fn t_two_sided_p_oracle(t: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let a = t.abs();
    let log_norm = ln_gamma((df + 1.0) / 2.0)
        - ln_gamma(df / 2.0)
        - 0.5 * (df * std::f64::consts::PI).ln();
    let pdf = |x: f64| (log_norm - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let integrand = |u: f64| {
        let one_minus = 1.0 - u;
        let x = a + u / one_minus;
        pdf(x) / (one_minus * one_minus)
    };
    // Stop just short of u = 1; the remaining tail is far below tolerance.
    let tail = adaptive_simpson(&integrand, 0.0, 1.0 - 1e-12, 1e-13, 60);
    (2.0 * tail).min(1.0)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, c, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    c: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson_step(f, a, c, d, fa, fc, fd, left, tol / 2.0, depth - 1)
        + simpson_step(f, c, b, e, fc, fb, fe, right, tol / 2.0, depth - 1)
}
