//! Candidate scoring and ranking: cosine similarity and CSLS with
//! precomputed hub penalties.
//!
//! CSLS(x, y) = 2 cos(x, y) - r_k(x) - r_k(y), where r_k is the mean cosine
//! similarity to the k nearest neighbours. Note the orientation: cos here is
//! a *similarity* and candidates are ranked by descending score; hub vectors
//! (large r_k) are demoted. The penalty r_k of every candidate is computed
//! against the other candidates; the penalty of a query is computed against
//! the candidate set, the only reference set available at query time.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Occurrence;
use crate::phoc::{self, PhocConfig, PhocError};
use crate::subspace::{CcaError, CcaModel};

/// Default neighbour count for CSLS hub penalties.
pub const DEFAULT_K: usize = 20;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("cosine is undefined for a zero-norm vector")]
    ZeroVector,
    #[error("query projects to the zero vector and cannot be ranked")]
    ZeroQuery,
    #[error("cannot build an index over an empty candidate set")]
    EmptyCandidates,
    #[error("vocabulary ({vocab}) and matrix columns ({cols}) disagree")]
    VocabMismatch { vocab: usize, cols: usize },
    #[error("candidate column {0} does not exist or is excluded from ranking")]
    BadCandidate(usize),
    #[error("query dimension {got} does not match index dimension {expected}")]
    QueryDimension { got: usize, expected: usize },
    #[error(transparent)]
    Encode(#[from] PhocError),
    #[error(transparent)]
    Projection(#[from] CcaError),
}

/// Ranking metric for the vector path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Cosine,
    Csls,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "csls" => Ok(Metric::Csls),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Cosine => write!(f, "cosine"),
            Metric::Csls => write!(f, "csls"),
        }
    }
}

/// Cosine similarity x.y / (|x||y|).
pub fn cosine(x: &[f64], y: &[f64]) -> Result<f64, RankError> {
    assert_eq!(x.len(), y.len(), "cosine arguments must have equal length");
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    if nx == 0.0 || ny == 0.0 {
        return Err(RankError::ZeroVector);
    }
    Ok(dot / (nx.sqrt() * ny.sqrt()))
}

/// Immutable search index: projected and length-normalized candidate matrix,
/// precomputed hub penalties, vocabulary and postings.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    projected: DMatrix<f64>,
    rk: Vec<f64>,
    k: usize,
    vocab: Vec<String>,
    postings: Vec<Vec<Occurrence>>,
    valid: Vec<bool>,
}

impl SearchIndex {
    /// Number of candidates (columns), including excluded zero-norm ones.
    pub fn len(&self) -> usize {
        self.projected.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        self.projected.nrows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn postings(&self, j: usize) -> &[Occurrence] {
        &self.postings[j]
    }

    pub fn hub_penalties(&self) -> &[f64] {
        &self.rk
    }

    pub fn is_ranked(&self, j: usize) -> bool {
        self.valid[j]
    }

    pub fn projected(&self) -> &DMatrix<f64> {
        &self.projected
    }

    /// Assemble from already-validated parts (used by the index loader).
    pub(crate) fn from_parts(
        projected: DMatrix<f64>,
        rk: Vec<f64>,
        k: usize,
        vocab: Vec<String>,
        postings: Vec<Vec<Occurrence>>,
    ) -> Self {
        let p = projected.nrows();
        let valid = (0..projected.ncols())
            .map(|j| sequential_norm(&projected.as_slice()[j * p..(j + 1) * p]) > 0.0)
            .collect();
        Self {
            projected,
            rk,
            k,
            vocab,
            postings,
            valid,
        }
    }

    /// Similarities of a unit query against every column, as plain in-order
    /// dot products. Sequential summation keeps scores bit-reproducible by
    /// any straightforward reimplementation, so rankings (including
    /// tie-breaks) are stable across scoring routes.
    fn similarities(&self, query_unit: &DVector<f64>) -> Vec<f64> {
        let p = self.projected.nrows();
        let data = self.projected.as_slice();
        let q = query_unit.as_slice();
        (0..self.projected.ncols())
            .map(|j| sequential_dot(&data[j * p..(j + 1) * p], q))
            .collect()
    }

    /// Mean cosine similarity from a unit-norm query to its k nearest
    /// candidates; the query-side CSLS penalty.
    pub fn query_penalty(&self, query_unit: &DVector<f64>) -> f64 {
        let sims = self.similarities(query_unit);
        let n_valid = self.valid.iter().filter(|v| **v).count();
        let k_eff = self.k.min(n_valid);
        top_k_mean(
            sims.iter()
                .zip(&self.valid)
                .filter(|(_, ok)| **ok)
                .map(|(s, _)| *s),
            k_eff,
        )
    }

    /// CSLS score of one candidate: 2 cos(q, c_j) - r_k(q) - r_k(c_j).
    /// The query-side penalty is recomputed on every call; batch scoring via
    /// [`rank_projected`] computes it once per query.
    pub fn csls(&self, query: &DVector<f64>, j: usize) -> Result<f64, RankError> {
        if j >= self.len() || !self.valid[j] {
            return Err(RankError::BadCandidate(j));
        }
        let unit = normalize_query(self, query)?;
        let rq = self.query_penalty(&unit);
        let sim = self.similarities(&unit)[j];
        Ok(2.0 * sim - rq - self.rk[j])
    }
}

/// Build a search index over PHOC-as-real candidate columns.
///
/// With a model the columns are projected through Wy first; without one the
/// raw vectors are used. Columns are length-normalized; zero-norm columns
/// (e.g. tokens with no in-charset characters) are flagged and excluded from
/// ranking. Hub penalties are computed by exact top-k over all pairwise
/// cosine similarities, self excluded.
pub fn build_index(
    model: Option<&CcaModel>,
    candidates: &DMatrix<f64>,
    vocab: Vec<String>,
    postings: Vec<Vec<Occurrence>>,
    k: usize,
) -> Result<SearchIndex, RankError> {
    let m = candidates.ncols();
    if m == 0 {
        return Err(RankError::EmptyCandidates);
    }
    if vocab.len() != m || postings.len() != m {
        return Err(RankError::VocabMismatch {
            vocab: vocab.len().min(postings.len()),
            cols: m,
        });
    }
    let mut projected = match model {
        Some(model) => model.project_candidates(candidates)?,
        None => candidates.clone(),
    };
    let mut valid = vec![true; m];
    let mut excluded = 0usize;
    let p = projected.nrows();
    for j in 0..m {
        let column = &mut projected.as_mut_slice()[j * p..(j + 1) * p];
        let norm = sequential_norm(column);
        if norm > 0.0 {
            for v in column {
                *v /= norm;
            }
        } else {
            valid[j] = false;
            excluded += 1;
        }
    }
    if excluded > 0 {
        log::warn!("{excluded} zero-norm candidates excluded from ranking");
    }
    let rk = candidate_penalties(&projected, &valid, k);
    Ok(SearchIndex {
        projected,
        rk,
        k,
        vocab,
        postings,
        valid,
    })
}

/// Exact hub penalties: for each valid column, the mean cosine similarity to
/// its k nearest other valid columns. Computed blockwise with a dense
/// matrix product; each output slot is independent, so parallel execution is
/// deterministic.
fn candidate_penalties(projected: &DMatrix<f64>, valid: &[bool], k: usize) -> Vec<f64> {
    let m = projected.ncols();
    let n_valid = valid.iter().filter(|v| **v).count();
    let k_eff = k.min(n_valid.saturating_sub(1));
    let mut rk = vec![0.0f64; m];
    if k_eff == 0 {
        return rk;
    }
    // One transposed copy so each block multiply takes the fast gemm path.
    let transposed = projected.transpose();
    const BLOCK: usize = 128;
    rk.par_chunks_mut(BLOCK).enumerate().for_each(|(bi, out)| {
        let j0 = bi * BLOCK;
        let cols = out.len();
        let sims = &transposed * projected.columns(j0, cols);
        for (jj, slot) in out.iter_mut().enumerate() {
            let j = j0 + jj;
            if !valid[j] {
                continue;
            }
            let column = sims.column(jj);
            *slot = top_k_mean(
                column
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != j && valid[*i])
                    .map(|(_, s)| *s),
                k_eff,
            );
        }
    });
    rk
}

/// Mean of the k largest values; 0 when k is 0.
fn top_k_mean(values: impl Iterator<Item = f64>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut heap: BinaryHeap<Reverse<OrdF64>> = BinaryHeap::with_capacity(k + 1);
    for v in values {
        if heap.len() < k {
            heap.push(Reverse(OrdF64(v)));
        } else if v > heap.peek().unwrap().0 .0 {
            heap.pop();
            heap.push(Reverse(OrdF64(v)));
        }
    }
    let n = heap.len();
    if n == 0 {
        return 0.0;
    }
    heap.into_iter().map(|Reverse(OrdF64(v))| v).sum::<f64>() / n as f64
}

#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn normalize_query(index: &SearchIndex, query: &DVector<f64>) -> Result<DVector<f64>, RankError> {
    if query.len() != index.dimension() {
        return Err(RankError::QueryDimension {
            got: query.len(),
            expected: index.dimension(),
        });
    }
    let norm = sequential_norm(query.as_slice());
    if norm == 0.0 {
        return Err(RankError::ZeroQuery);
    }
    Ok(query / norm)
}

/// Plain left-to-right dot product. Scoring sticks to sequential summation
/// (no unrolling or blocking) so scores are reproducible bit for bit by a
/// naive reimplementation; only the O(m^2) penalty precompute uses blocked
/// matrix products, and it is checked to a 1e-9 tolerance instead.
fn sequential_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn sequential_norm(v: &[f64]) -> f64 {
    sequential_dot(v, v).sqrt()
}

/// Score every rankable candidate against a projected query vector and
/// return (column, score) sorted by descending score, ties broken by
/// ascending vocabulary index.
pub fn rank_projected(
    index: &SearchIndex,
    query: &DVector<f64>,
    metric: Metric,
) -> Result<Vec<(usize, f64)>, RankError> {
    let unit = normalize_query(index, query)?;
    let sims = index.similarities(&unit);
    let mut scored: Vec<(usize, f64)> = match metric {
        Metric::Cosine => sims
            .iter()
            .enumerate()
            .filter(|(j, _)| index.valid[*j])
            .map(|(j, s)| (j, *s))
            .collect(),
        Metric::Csls => {
            let n_valid = index.valid.iter().filter(|v| **v).count();
            let k_eff = index.k.min(n_valid);
            let rq = top_k_mean(
                sims.iter()
                    .zip(&index.valid)
                    .filter(|(_, ok)| **ok)
                    .map(|(s, _)| *s),
                k_eff,
            );
            sims.iter()
                .enumerate()
                .filter(|(j, _)| index.valid[*j])
                .map(|(j, s)| (j, 2.0 * s - rq - index.rk[j]))
                .collect()
        }
    };
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored)
}

/// One ranked search result.
#[derive(Debug, Clone)]
pub struct SearchHit {
    pub index: usize,
    pub token: String,
    pub score: f64,
    pub occurrences: Vec<Occurrence>,
}

impl SearchHit {
    /// The line-delimited record emitted for one hit: token, score, metric
    /// name and occurrence list. Shared by the CLI so its output is
    /// byte-identical to direct library calls.
    pub fn to_record(&self, metric_name: &str) -> String {
        #[derive(serde::Serialize)]
        struct Record<'a> {
            token: &'a str,
            score: f64,
            metric: &'a str,
            occurrences: &'a [Occurrence],
        }
        serde_json::to_string(&Record {
            token: &self.token,
            score: self.score,
            metric: metric_name,
            occurrences: &self.occurrences,
        })
        .expect("record serialization cannot fail")
    }
}

/// Encode a query word, project it, and rank all candidates; the top_n hits
/// are returned with their occurrence lists. Pass the model the index was
/// built with (None for a raw PHOC index).
pub fn search(
    query: &str,
    index: &SearchIndex,
    model: Option<&CcaModel>,
    config: &PhocConfig,
    metric: Metric,
    top_n: usize,
) -> Result<Vec<SearchHit>, RankError> {
    let bits = phoc::encode(query, config)?;
    let reals = bits.to_f64();
    let projected = match model {
        Some(model) => model.project_query(&reals)?,
        None => DVector::from_vec(reals),
    };
    let ranked = rank_projected(index, &projected, metric)?;
    Ok(ranked
        .into_iter()
        .take(top_n)
        .map(|(j, score)| SearchHit {
            index: j,
            token: index.vocab[j].clone(),
            score,
            occurrences: index.postings[j].clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plain_index(columns: &[Vec<f64>], k: usize) -> SearchIndex {
        let d = columns[0].len();
        let m = columns.len();
        let mat = DMatrix::from_fn(d, m, |r, c| columns[c][r]);
        let vocab = (0..m).map(|i| format!("w{i}")).collect();
        let postings = vec![Vec::new(); m];
        build_index(None, &mat, vocab, postings, k).unwrap()
    }

    #[test]
    fn cosine_analytic_values() {
        let v = [0.3, -0.7, 0.2];
        assert_abs_diff_eq!(cosine(&v, &v).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(RankError::ZeroVector)
        ));
    }

    #[test]
    fn degenerate_and_zero_k_indexes() {
        let single = plain_index(&[vec![1.0, 0.0]], 20);
        assert_eq!(single.hub_penalties(), &[0.0]);

        let idx = plain_index(
            &[vec![1.0, 0.0], vec![0.8, 0.6], vec![0.0, 1.0]],
            0,
        );
        assert_eq!(idx.hub_penalties(), &[0.0, 0.0, 0.0]);
        let q = DVector::from_vec(vec![0.9, 0.1]);
        let cos_rank = rank_projected(&idx, &q, Metric::Cosine).unwrap();
        let csls_rank = rank_projected(&idx, &q, Metric::Csls).unwrap();
        let order_cos: Vec<usize> = cos_rank.iter().map(|(j, _)| *j).collect();
        let order_csls: Vec<usize> = csls_rank.iter().map(|(j, _)| *j).collect();
        assert_eq!(order_cos, order_csls);
        for ((_, a), (_, b)) in cos_rank.iter().zip(&csls_rank) {
            assert_abs_diff_eq!(2.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_norm_candidates_are_excluded() {
        let idx = plain_index(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]], 2);
        assert!(idx.is_ranked(0));
        assert!(!idx.is_ranked(1));
        let q = DVector::from_vec(vec![1.0, 1.0]);
        let ranked = rank_projected(&idx, &q, Metric::Cosine).unwrap();
        assert_eq!(ranked.len(), 2);
        assert!(ranked.iter().all(|(j, _)| *j != 1));
        assert!(matches!(idx.csls(&q, 1), Err(RankError::BadCandidate(1))));
    }

    #[test]
    fn csls_demotes_the_hub() {
        // H sits between A and B (at 0, 8 and 20 degrees), so it is the
        // nearest neighbour of both and carries the largest penalty. The
        // query at 13 degrees has cosine argmax H, but CSLS flips B on top.
        let angle = |deg: f64| {
            let r = deg.to_radians();
            vec![r.cos(), r.sin()]
        };
        let idx = plain_index(&[angle(0.0), angle(20.0), angle(8.0)], 2);
        let (a, b, h) = (0, 1, 2);
        let rk = idx.hub_penalties();
        assert!(rk[h] > rk[a] && rk[h] > rk[b], "H must carry the top penalty");

        let q = DVector::from_vec(angle(13.0));
        let by_cos = rank_projected(&idx, &q, Metric::Cosine).unwrap();
        let by_csls = rank_projected(&idx, &q, Metric::Csls).unwrap();
        assert_eq!(by_cos[0].0, h, "cosine prefers the hub");
        assert_eq!(by_csls[0].0, b, "CSLS prefers the true neighbour");
        let pos = |ranking: &[(usize, f64)], j: usize| {
            ranking.iter().position(|(c, _)| *c == j).unwrap()
        };
        assert!(
            pos(&by_csls, h) > pos(&by_cos, h),
            "CSLS must demote the hub relative to cosine"
        );
    }

    #[test]
    fn constant_penalty_shift_keeps_ranking() {
        let cols: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64 / 10.0;
                vec![t.cos(), t.sin(), (1.0 - t).sqrt()]
            })
            .collect();
        let idx = plain_index(&cols, 3);
        let q = DVector::from_vec(vec![0.7, 0.2, 0.4]);
        let base = rank_projected(&idx, &q, Metric::Csls).unwrap();
        let mut shifted = idx.clone();
        for v in &mut shifted.rk {
            *v += 0.25;
        }
        let moved = rank_projected(&shifted, &q, Metric::Csls).unwrap();
        let order: Vec<usize> = base.iter().map(|(j, _)| *j).collect();
        let order_shifted: Vec<usize> = moved.iter().map(|(j, _)| *j).collect();
        assert_eq!(order, order_shifted);
    }

    #[test]
    fn query_scale_invariance() {
        let cols: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![(i as f64).sin() + 1.5, (i as f64).cos() + 1.5])
            .collect();
        let idx = plain_index(&cols, 3);
        let q = DVector::from_vec(vec![0.4, 0.9]);
        let scaled = &q * 37.5;
        for metric in [Metric::Cosine, Metric::Csls] {
            let a = rank_projected(&idx, &q, metric).unwrap();
            let b = rank_projected(&idx, &scaled, metric).unwrap();
            let oa: Vec<usize> = a.iter().map(|(j, _)| *j).collect();
            let ob: Vec<usize> = b.iter().map(|(j, _)| *j).collect();
            assert_eq!(oa, ob);
        }
    }

    #[test]
    fn exact_match_ranks_first_under_identity() {
        let config = PhocConfig::new("abcdefgh", &[1, 2], true).unwrap();
        let words = ["abad", "bach", "cafe", "dach"];
        let cols: Vec<Vec<f64>> = words
            .iter()
            .map(|w| phoc::encode(w, &config).unwrap().to_f64())
            .collect();
        let d = cols[0].len();
        let mat = DMatrix::from_fn(d, cols.len(), |r, c| cols[c][r]);
        let vocab: Vec<String> = words.iter().map(|s| s.to_string()).collect();
        let postings = vec![Vec::new(); words.len()];
        let idx = build_index(None, &mat, vocab, postings, 2).unwrap();
        let hits = search("cafe", &idx, None, &config, Metric::Cosine, 2).unwrap();
        assert_eq!(hits[0].token, "cafe");
        assert_abs_diff_eq!(hits[0].score, 1.0, epsilon = 1e-12);
        // top_n larger than the vocabulary returns everything.
        let all = search("cafe", &idx, None, &config, Metric::Cosine, 99).unwrap();
        assert_eq!(all.len(), words.len());
        assert!(matches!(
            search("zzz", &idx, None, &config, Metric::Cosine, 3),
            Err(RankError::Encode(_))
        ));
    }
}
