//! Retrieval evaluation: random page folds, mean average precision per
//! method, paired t-tests, and per-method query timing.
//!
//! Per fold the protocol trains CCA on the training pages' (gold, ocr)
//! pairs, indexes the test pages' candidates, issues every distinct gold
//! word on the test pages as a query, and marks as relevant the candidate
//! tokens whose gold transcription equals the query. Queries with no
//! relevant candidate are excluded. Relevance is case-sensitive string
//! equality over unique tokens (occurrence-level relevance is a flag).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::Hash;
use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::corpus::{self, AlignmentRecord, Candidate};
use crate::editdist;
use crate::phoc::{self, PhocConfig};
use crate::ranking::{self, Metric, SearchIndex};
use crate::subspace::{self, CcaModel, TrainingPairSet};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("relevant set is empty; filter such queries upstream")]
    EmptyRelevantSet,
    #[error("paired samples have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two paired samples, got {0}")]
    TooFewSamples(usize),
    #[error("methods list is empty")]
    NoMethods,
    #[error("need at least two pages for a train/test split, got {0}")]
    TooFewPages(usize),
    #[error("{0} dangling alignment references, e.g. {1}")]
    DanglingAlignments(usize, String),
    #[error("test pages without alignment records: {0:?}")]
    UnalignedTestPages(Vec<String>),
    #[error("fold {fold}: too few encodable training pairs ({pairs})")]
    TooFewTrainingPairs { fold: usize, pairs: usize },
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Cca(#[from] subspace::CcaError),
    #[error(transparent)]
    Rank(#[from] ranking::RankError),
}

/// Retrieval method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Edit,
    Cosine,
    Csls,
    CcaCosine,
    CcaCsls,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Edit,
        Method::Cosine,
        Method::Csls,
        Method::CcaCosine,
        Method::CcaCsls,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Edit => "edit",
            Method::Cosine => "cosine",
            Method::Csls => "csls",
            Method::CcaCosine => "cca+cosine",
            Method::CcaCsls => "cca+csls",
        }
    }

    fn uses_cca(&self) -> bool {
        matches!(self, Method::CcaCosine | Method::CcaCsls)
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edit" => Ok(Method::Edit),
            "cosine" => Ok(Method::Cosine),
            "csls" => Ok(Method::Csls),
            "cca+cosine" => Ok(Method::CcaCosine),
            "cca+csls" => Ok(Method::CcaCsls),
            other => Err(format!(
                "unknown method {other:?} (expected edit, cosine, csls, cca+cosine, cca+csls)"
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// One train/test split of pages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train_pages: Vec<String>,
    pub test_pages: Vec<String>,
}

/// A seeded list of random half/half page splits.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub seed: u64,
}

impl FoldPlan {
    pub const DEFAULT_FOLDS: usize = 20;

    /// `fold_count` random splits of the given pages, half for training and
    /// half for testing (training gets the smaller half when odd).
    pub fn random(pages: &[String], fold_count: usize, seed: u64) -> Result<Self, EvalError> {
        let mut unique: Vec<String> = pages.to_vec();
        unique.sort();
        unique.dedup();
        if unique.len() < 2 {
            return Err(EvalError::TooFewPages(unique.len()));
        }
        let mut folds = Vec::with_capacity(fold_count);
        for fold in 0..fold_count {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xf01d << 16) ^ fold as u64);
            let mut shuffled = unique.clone();
            shuffled.shuffle(&mut rng);
            let cut = shuffled.len() / 2;
            let mut train_pages: Vec<String> = shuffled[..cut].to_vec();
            let mut test_pages: Vec<String> = shuffled[cut..].to_vec();
            train_pages.sort();
            test_pages.sort();
            folds.push(Fold {
                train_pages,
                test_pages,
            });
        }
        Ok(Self { folds, seed })
    }
}

/// Mean over the relevant hits of precision at each hit's rank. Returns 0
/// when no relevant item appears in the ranking at all.
pub fn average_precision<T: Eq + Hash>(
    ranking: &[T],
    relevant: &HashSet<T>,
) -> Result<f64, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::EmptyRelevantSet);
    }
    let mut hits = 0usize;
    let mut precision_sum = 0.0f64;
    for (rank0, item) in ranking.iter().enumerate() {
        if relevant.contains(item) {
            hits += 1;
            precision_sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    if hits == 0 {
        return Ok(0.0);
    }
    Ok(precision_sum / hits as f64)
}

/// Two-sided paired t-test result.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub reject: bool,
    /// Constant nonzero differences: zero variance forces p to 0.
    pub degenerate: bool,
}

/// Two-sided paired t-test with n-1 degrees of freedom. Identical samples
/// give t = 0, p = 1; constant nonzero differences are degenerate (p = 0,
/// flagged) rather than silently NaN.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples(n));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(TTestResult {
            t: 0.0,
            p: 1.0,
            reject: false,
            degenerate: false,
        });
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        return Ok(TTestResult {
            t: f64::INFINITY.copysign(mean),
            p: 0.0,
            reject: true,
            degenerate: true,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let p = student_t_two_sided_p(t, (n - 1) as f64);
    Ok(TTestResult {
        t,
        p,
        reject: p < 0.05,
        degenerate: false,
    })
}

/// Two-sided p-value of Student's t via the regularized incomplete beta
/// function: p = I_{df/(df+t^2)}(df/2, 1/2).
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Evaluation knobs shared across folds.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub phoc: PhocConfig,
    pub lambda: f64,
    /// Projection dimension; `None` keeps every direction the fold's data
    /// can support (min(d, pairs - 1)).
    pub p: Option<usize>,
    pub k: usize,
    /// Score occurrences instead of unique tokens.
    pub occurrence_relevance: bool,
}

impl ProtocolConfig {
    pub fn new(phoc: PhocConfig) -> Self {
        Self {
            phoc,
            lambda: 1e-3,
            p: None,
            k: ranking::DEFAULT_K,
            occurrence_relevance: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub fold_map: Vec<f64>,
    pub mean_map: f64,
    pub sd_map: f64,
    /// Mean wall-clock seconds per fold spent ranking the full query set.
    /// Excluded from the deterministic record stream.
    #[serde(skip)]
    pub mean_query_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TTestEntry {
    pub a: Method,
    pub b: Method,
    #[serde(flatten)]
    pub result: TTestResult,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub methods: Vec<MethodSummary>,
    pub t_tests: Vec<TTestEntry>,
    pub folds_run: usize,
    pub folds_skipped: usize,
    pub queries_evaluated: usize,
    pub queries_excluded: usize,
    /// Fraction of alignment pairs whose OCR reading differs from the gold
    /// transcription; the x-coordinate for plot data.
    pub noise_rate: f64,
}

struct FoldOutcome {
    map_per_method: Vec<f64>,
    seconds_per_method: Vec<f64>,
    queries: usize,
    excluded: usize,
}

/// Run the full protocol over the fold plan. See the module docs for the
/// per-fold procedure.
pub fn run_protocol(
    candidates: &[Candidate],
    alignments: &[AlignmentRecord],
    methods: &[Method],
    plan: &FoldPlan,
    cfg: &ProtocolConfig,
) -> Result<EvalReport, EvalError> {
    let mut unique_methods: Vec<Method> = Vec::new();
    for &m in methods {
        if !unique_methods.contains(&m) {
            unique_methods.push(m);
        }
    }
    if unique_methods.is_empty() {
        return Err(EvalError::NoMethods);
    }
    let dangling = corpus::validate_alignments(candidates, alignments);
    if !dangling.is_empty() {
        return Err(EvalError::DanglingAlignments(
            dangling.len(),
            dangling[0].clone(),
        ));
    }
    let aligned_pages: BTreeSet<&str> =
        alignments.iter().map(|a| a.page_id.as_str()).collect();
    let mut unaligned: Vec<String> = Vec::new();
    for fold in &plan.folds {
        for page in &fold.test_pages {
            if !aligned_pages.contains(page.as_str()) && !unaligned.contains(page) {
                unaligned.push(page.clone());
            }
        }
    }
    if !unaligned.is_empty() {
        return Err(EvalError::UnalignedTestPages(unaligned));
    }

    let outcomes: Vec<Result<Option<FoldOutcome>, EvalError>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(fold_no, fold)| run_fold(fold_no, fold, candidates, alignments, &unique_methods, cfg))
        .collect();

    let mut per_method_maps: Vec<Vec<f64>> = vec![Vec::new(); unique_methods.len()];
    let mut per_method_secs: Vec<Vec<f64>> = vec![Vec::new(); unique_methods.len()];
    let mut folds_run = 0usize;
    let mut folds_skipped = 0usize;
    let mut queries_evaluated = 0usize;
    let mut queries_excluded = 0usize;
    for outcome in outcomes {
        match outcome? {
            None => folds_skipped += 1,
            Some(fold) => {
                folds_run += 1;
                queries_evaluated += fold.queries;
                queries_excluded += fold.excluded;
                for (i, v) in fold.map_per_method.iter().enumerate() {
                    per_method_maps[i].push(*v);
                }
                for (i, v) in fold.seconds_per_method.iter().enumerate() {
                    per_method_secs[i].push(*v);
                }
            }
        }
    }

    let summaries: Vec<MethodSummary> = unique_methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let maps = &per_method_maps[i];
            let mean_map = mean(maps);
            MethodSummary {
                method,
                fold_map: maps.clone(),
                mean_map,
                sd_map: sample_sd(maps, mean_map),
                mean_query_seconds: mean(&per_method_secs[i]),
            }
        })
        .collect();

    let mut t_tests = Vec::new();
    if folds_run >= 2 {
        for i in 0..summaries.len() {
            for j in (i + 1)..summaries.len() {
                let result = paired_t_test(&summaries[i].fold_map, &summaries[j].fold_map)?;
                t_tests.push(TTestEntry {
                    a: summaries[i].method,
                    b: summaries[j].method,
                    result,
                });
            }
        }
    }

    let differing = alignments
        .iter()
        .filter(|a| a.ocr_text != a.gold_text)
        .count();
    let noise_rate = if alignments.is_empty() {
        0.0
    } else {
        differing as f64 / alignments.len() as f64
    };

    Ok(EvalReport {
        methods: summaries,
        t_tests,
        folds_run,
        folds_skipped,
        queries_evaluated,
        queries_excluded,
        noise_rate,
    })
}

fn run_fold(
    fold_no: usize,
    fold: &Fold,
    candidates: &[Candidate],
    alignments: &[AlignmentRecord],
    methods: &[Method],
    cfg: &ProtocolConfig,
) -> Result<Option<FoldOutcome>, EvalError> {
    let d = cfg.phoc.dimension();
    let train_pages: BTreeSet<&str> = fold.train_pages.iter().map(|s| s.as_str()).collect();
    let test_pages: BTreeSet<&str> = fold.test_pages.iter().map(|s| s.as_str()).collect();

    // Fit CCA on the training pages' pairs when any method needs it.
    let model: Option<CcaModel> = if methods.iter().any(Method::uses_cca) {
        let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for record in alignments {
            if !train_pages.contains(record.page_id.as_str()) {
                continue;
            }
            let (Ok(gold), Ok(ocr)) = (
                phoc::encode(&record.gold_text, &cfg.phoc),
                phoc::encode(&record.ocr_text, &cfg.phoc),
            ) else {
                continue;
            };
            pairs.push((gold.to_f64(), ocr.to_f64()));
        }
        if pairs.len() < 2 {
            return Err(EvalError::TooFewTrainingPairs {
                fold: fold_no,
                pairs: pairs.len(),
            });
        }
        let p = cfg
            .p
            .unwrap_or_else(|| subspace::default_projection_dim(d, pairs.len()));
        let set = TrainingPairSet::from_columns(&pairs)?;
        Some(subspace::fit(&set, cfg.lambda, p)?.model)
    } else {
        None
    };

    // Index the test pages' candidates.
    let test_candidates: Vec<Candidate> = candidates
        .iter()
        .filter(|c| test_pages.contains(c.page_id.as_str()))
        .cloned()
        .collect();
    if test_candidates.is_empty() {
        log::warn!("fold {fold_no}: no candidates on test pages, skipping");
        return Ok(None);
    }
    let (vocab, postings) = corpus::build_vocab(&test_candidates)?;
    let m = vocab.len();
    let mut reals = DMatrix::<f64>::zeros(d, m);
    for (j, token) in vocab.iter().enumerate() {
        if let Ok(bits) = phoc::encode(token, &cfg.phoc) {
            reals.set_column(j, &DVector::from_vec(bits.to_f64()));
        }
    }
    let needs_raw = methods
        .iter()
        .any(|m| matches!(m, Method::Cosine | Method::Csls));
    let needs_cca_index = methods.iter().any(Method::uses_cca);
    let raw_k = if methods.contains(&Method::Csls) { cfg.k } else { 0 };
    let cca_k = if methods.contains(&Method::CcaCsls) { cfg.k } else { 0 };
    let index_raw: Option<SearchIndex> = if needs_raw || methods.contains(&Method::Edit) {
        Some(ranking::build_index(
            None,
            &reals,
            vocab.clone(),
            postings.clone(),
            raw_k,
        )?)
    } else {
        None
    };
    let index_cca: Option<SearchIndex> = if needs_cca_index {
        Some(ranking::build_index(
            model.as_ref(),
            &reals,
            vocab.clone(),
            postings.clone(),
            cca_k,
        )?)
    } else {
        None
    };

    // The ranked universe: tokens rankable by the vector path. The edit
    // baseline scans the same universe so methods stay comparable.
    let reference_index = index_raw.as_ref().or(index_cca.as_ref()).unwrap();
    let ranked_universe: Vec<usize> =
        (0..m).filter(|&j| reference_index.is_ranked(j)).collect();
    let ranked_tokens: Vec<String> = ranked_universe
        .iter()
        .map(|&j| vocab[j].clone())
        .collect();

    // Gold transcriptions per token on the test pages.
    let token_column: BTreeMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(j, t)| (t.as_str(), j))
        .collect();
    let mut golds_of_token: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
    let mut occurrence_gold: BTreeMap<(usize, &str, u32), &str> = BTreeMap::new();
    for record in alignments {
        if !test_pages.contains(record.page_id.as_str()) {
            continue;
        }
        let Some(&j) = token_column.get(record.ocr_text.as_str()) else {
            continue;
        };
        golds_of_token
            .entry(j)
            .or_default()
            .insert(record.gold_text.as_str());
        occurrence_gold.insert(
            (j, record.page_id.as_str(), record.word_id),
            record.gold_text.as_str(),
        );
    }

    // Every distinct gold word on the test pages, encodable and with at
    // least one relevant ranked token, becomes a query.
    let distinct_golds: BTreeSet<&str> = alignments
        .iter()
        .filter(|r| test_pages.contains(r.page_id.as_str()))
        .map(|r| r.gold_text.as_str())
        .collect();
    let mut queries: Vec<(&str, HashSet<usize>)> = Vec::new();
    let mut excluded = 0usize;
    for gold in distinct_golds {
        if phoc::encode(gold, &cfg.phoc).is_err() {
            excluded += 1;
            continue;
        }
        let relevant: HashSet<usize> = ranked_universe
            .iter()
            .copied()
            .filter(|j| {
                golds_of_token
                    .get(j)
                    .is_some_and(|golds| golds.contains(gold))
            })
            .collect();
        if relevant.is_empty() {
            excluded += 1;
            continue;
        }
        queries.push((gold, relevant));
    }
    if queries.is_empty() {
        log::warn!("fold {fold_no}: no valid queries, skipping");
        return Ok(None);
    }

    let mut map_per_method = Vec::with_capacity(methods.len());
    let mut seconds_per_method = Vec::with_capacity(methods.len());
    for method in methods {
        let (index, metric) = match method {
            Method::Edit => (None, None),
            Method::Cosine => (index_raw.as_ref(), Some(Metric::Cosine)),
            Method::Csls => (index_raw.as_ref(), Some(Metric::Csls)),
            Method::CcaCosine => (index_cca.as_ref(), Some(Metric::Cosine)),
            Method::CcaCsls => (index_cca.as_ref(), Some(Metric::Csls)),
        };
        let mut ap_sum = 0.0f64;
        let mut elapsed = 0.0f64;
        for (gold, relevant) in &queries {
            let started = Instant::now();
            let ranking_cols: Vec<usize> = match method {
                Method::Edit => editdist::rank_by_edit_distance(gold, &ranked_tokens, m)
                    .into_iter()
                    .map(|(i, _)| ranked_universe[i])
                    .collect(),
                _ => {
                    let index = index.unwrap();
                    let bits = phoc::encode(gold, &cfg.phoc).expect("query checked encodable");
                    let reals = bits.to_f64();
                    let projected = match (method.uses_cca(), &model) {
                        (true, Some(model)) => model.project_query(&reals)?,
                        _ => DVector::from_vec(reals),
                    };
                    ranking::rank_projected(index, &projected, metric.unwrap())?
                        .into_iter()
                        .map(|(j, _)| j)
                        .collect()
                }
            };
            elapsed += started.elapsed().as_secs_f64();
            let ap = if cfg.occurrence_relevance {
                occurrence_ap(&ranking_cols, relevant, &postings, &occurrence_gold, gold)?
            } else {
                average_precision(&ranking_cols, relevant)?
            };
            ap_sum += ap;
        }
        map_per_method.push(ap_sum / queries.len() as f64);
        seconds_per_method.push(elapsed);
    }

    Ok(Some(FoldOutcome {
        map_per_method,
        seconds_per_method,
        queries: queries.len(),
        excluded,
    }))
}

/// Occurrence-level AP: each ranked token expands to its occurrences in
/// posting order; an occurrence is relevant when its own gold transcription
/// equals the query.
fn occurrence_ap(
    ranking_cols: &[usize],
    relevant_tokens: &HashSet<usize>,
    postings: &[Vec<corpus::Occurrence>],
    occurrence_gold: &BTreeMap<(usize, &str, u32), &str>,
    gold: &str,
) -> Result<f64, EvalError> {
    let mut expanded: Vec<(usize, usize)> = Vec::new();
    let mut relevant: HashSet<(usize, usize)> = HashSet::new();
    for &j in ranking_cols {
        for (o, occ) in postings[j].iter().enumerate() {
            expanded.push((j, o));
            if relevant_tokens.contains(&j)
                && occurrence_gold.get(&(j, occ.page.as_str(), occ.word)) == Some(&gold)
            {
                relevant.insert((j, o));
            }
        }
    }
    if relevant.is_empty() {
        // The token was relevant through some occurrence, but those
        // occurrences may sit on pages with differing golds; fall back to 0.
        return Ok(0.0);
    }
    average_precision(&expanded, &relevant)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_sd(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt()
}

impl EvalReport {
    /// Human-readable tables (includes the non-deterministic timing column).
    pub fn render_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(
            out,
            "{:<12} {:>9} {:>8} {:>12}",
            "method", "mAP (%)", "s.d.", "time (s)"
        )
        .unwrap();
        for m in &self.methods {
            writeln!(
                out,
                "{:<12} {:>9.2} {:>8.2} {:>12.3}",
                m.method.name(),
                100.0 * m.mean_map,
                100.0 * m.sd_map,
                m.mean_query_seconds
            )
            .unwrap();
        }
        if !self.t_tests.is_empty() {
            writeln!(out).unwrap();
            writeln!(
                out,
                "{:<26} {:>10} {:>12} {:>8}",
                "pair", "t", "p", "reject"
            )
            .unwrap();
            for entry in &self.t_tests {
                writeln!(
                    out,
                    "{:<26} {:>10.4} {:>12.3e} {:>8}",
                    format!("{} vs {}", entry.a.name(), entry.b.name()),
                    entry.result.t,
                    entry.result.p,
                    if entry.result.reject { "yes" } else { "no" }
                )
                .unwrap();
            }
        }
        writeln!(
            out,
            "\nfolds run: {}, skipped: {}; queries: {}, excluded: {}; noise rate: {:.4}",
            self.folds_run,
            self.folds_skipped,
            self.queries_evaluated,
            self.queries_excluded,
            self.noise_rate
        )
        .unwrap();
        out
    }

    /// Deterministic line-delimited records (no timing).
    pub fn write_records<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct ProtocolRecord<'a> {
            record: &'a str,
            folds_run: usize,
            folds_skipped: usize,
            queries_evaluated: usize,
            queries_excluded: usize,
            noise_rate: f64,
        }
        #[derive(Serialize)]
        struct SummaryRecord<'a> {
            record: &'a str,
            #[serde(flatten)]
            summary: &'a MethodSummary,
        }
        #[derive(Serialize)]
        struct TTestRecord<'a> {
            record: &'a str,
            #[serde(flatten)]
            entry: &'a TTestEntry,
        }
        writeln!(
            w,
            "{}",
            serde_json::to_string(&ProtocolRecord {
                record: "protocol",
                folds_run: self.folds_run,
                folds_skipped: self.folds_skipped,
                queries_evaluated: self.queries_evaluated,
                queries_excluded: self.queries_excluded,
                noise_rate: self.noise_rate,
            })?
        )?;
        for summary in &self.methods {
            writeln!(
                w,
                "{}",
                serde_json::to_string(&SummaryRecord {
                    record: "method",
                    summary
                })?
            )?;
        }
        for entry in &self.t_tests {
            writeln!(
                w,
                "{}",
                serde_json::to_string(&TTestRecord {
                    record: "t_test",
                    entry
                })?
            )?;
        }
        Ok(())
    }

    /// Wall-clock timing per method (not deterministic across runs).
    pub fn write_timing<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "method\tmean_query_seconds")?;
        for m in &self.methods {
            writeln!(w, "{}\t{:.6}", m.method.name(), m.mean_query_seconds)?;
        }
        Ok(())
    }

    /// (noise-rate, method, mAP) rows for external plotting; append rows
    /// from runs at different noise rates to build a series.
    pub fn write_plot_data<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for m in &self.methods {
            writeln!(
                w,
                "{:.6}\t{}\t{:.6}",
                self.noise_rate,
                m.method.name(),
                m.mean_map
            )?;
        }
        Ok(())
    }
}
