//! Levenshtein and weighted edit distances; the accuracy/speed baseline.
//!
//! Strings are compared as code-point sequences (no grapheme clustering), so
//! e.g. "ß" vs "ss" costs two edits. Transpositions are not a primitive edit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EditError {
    #[error("cost table contains a negative cost for {0}")]
    NegativeCost(String),
    #[error("cost table assigns nonzero cost to the identity substitution {0:?}")]
    NonzeroIdentity(char),
    #[error("confusion estimation needs at least one aligned pair")]
    NoPairs,
}

/// Number of single-character insertions, deletions and substitutions needed
/// to transform `s` into `t`. Standard dynamic program with two-row memory.
pub fn levenshtein(s: &str, t: &str) -> usize {
    let s: Vec<char> = s.chars().collect();
    let t: Vec<char> = t.chars().collect();
    if s.is_empty() {
        return t.len();
    }
    if t.is_empty() {
        return s.len();
    }
    let mut prev: Vec<usize> = (0..=t.len()).collect();
    let mut cur = vec![0usize; t.len() + 1];
    for (i, &sc) in s.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &tc) in t.iter().enumerate() {
            let sub = prev[j] + usize::from(sc != tc);
            let del = prev[j + 1] + 1;
            let ins = cur[j] + 1;
            cur[j + 1] = sub.min(del).min(ins);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[t.len()]
}

/// Per-event edit costs. Substitution costs are keyed by the ordered pair
/// (from, to); unlisted events fall back to the default costs. Identity
/// substitutions always cost zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    substitution: BTreeMap<(char, char), f64>,
    insertion: BTreeMap<char, f64>,
    deletion: BTreeMap<char, f64>,
    default_substitution: f64,
    default_insertion: f64,
    default_deletion: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            substitution: BTreeMap::new(),
            insertion: BTreeMap::new(),
            deletion: BTreeMap::new(),
            default_substitution: 1.0,
            default_insertion: 1.0,
            default_deletion: 1.0,
        }
    }
}

impl CostTable {
    pub fn new(
        substitution: BTreeMap<(char, char), f64>,
        insertion: BTreeMap<char, f64>,
        deletion: BTreeMap<char, f64>,
        defaults: (f64, f64, f64),
    ) -> Result<Self, EditError> {
        for (&(a, b), &c) in &substitution {
            if c < 0.0 {
                return Err(EditError::NegativeCost(format!("sub {a:?}->{b:?}")));
            }
            if a == b && c != 0.0 {
                return Err(EditError::NonzeroIdentity(a));
            }
        }
        for (&c, &v) in insertion.iter().chain(deletion.iter()) {
            if v < 0.0 {
                return Err(EditError::NegativeCost(format!("{c:?}")));
            }
        }
        let (ds, di, dd) = defaults;
        if ds < 0.0 || di < 0.0 || dd < 0.0 {
            return Err(EditError::NegativeCost("default".into()));
        }
        Ok(Self {
            substitution,
            insertion,
            deletion,
            default_substitution: ds,
            default_insertion: di,
            default_deletion: dd,
        })
    }

    pub fn substitution_cost(&self, from: char, to: char) -> f64 {
        if from == to {
            return 0.0;
        }
        *self
            .substitution
            .get(&(from, to))
            .unwrap_or(&self.default_substitution)
    }

    pub fn insertion_cost(&self, c: char) -> f64 {
        *self.insertion.get(&c).unwrap_or(&self.default_insertion)
    }

    pub fn deletion_cost(&self, c: char) -> f64 {
        *self.deletion.get(&c).unwrap_or(&self.default_deletion)
    }

    /// Plain-text (event, cost) listing for inspection; events sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "default\tsub={}\tins={}\tdel={}",
            self.default_substitution, self.default_insertion, self.default_deletion
        )
        .unwrap();
        for (&(a, b), c) in &self.substitution {
            writeln!(out, "sub\t{a}\t{b}\t{c}").unwrap();
        }
        for (&a, c) in &self.insertion {
            writeln!(out, "ins\t{a}\t{c}").unwrap();
        }
        for (&a, c) in &self.deletion {
            writeln!(out, "del\t{a}\t{c}").unwrap();
        }
        out
    }
}

/// Minimal total cost of an edit script transforming `s` into `t`.
/// With the default table this equals [`levenshtein`].
pub fn weighted_levenshtein(s: &str, t: &str, costs: &CostTable) -> f64 {
    let s: Vec<char> = s.chars().collect();
    let t: Vec<char> = t.chars().collect();
    let mut prev = vec![0.0f64; t.len() + 1];
    for j in 0..t.len() {
        prev[j + 1] = prev[j] + costs.insertion_cost(t[j]);
    }
    let mut cur = vec![0.0f64; t.len() + 1];
    for &sc in &s {
        cur[0] = prev[0] + costs.deletion_cost(sc);
        for (j, &tc) in t.iter().enumerate() {
            let sub = prev[j] + costs.substitution_cost(sc, tc);
            let del = prev[j + 1] + costs.deletion_cost(sc);
            let ins = cur[j] + costs.insertion_cost(tc);
            cur[j + 1] = sub.min(del).min(ins);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[t.len()]
}

/// Exhaustive scan of the vocabulary, ranked by ascending Levenshtein
/// distance to the query; ties broken by ascending vocabulary index.
/// Returns (vocabulary index, distance) pairs.
pub fn rank_by_edit_distance(
    query: &str,
    vocab: &[String],
    top_n: usize,
) -> Vec<(usize, usize)> {
    let mut ranked: Vec<(usize, usize)> = vocab
        .iter()
        .enumerate()
        .map(|(i, token)| (i, levenshtein(query, token)))
        .collect();
    ranked.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked.truncate(top_n);
    ranked
}

/// Estimate per-event edit costs from aligned (ocr, gold) pairs.
///
/// Each pair is aligned by a minimal unit-cost script transforming the OCR
/// reading into its gold text (the correction direction, so a substitution
/// event (a, b) means "a was read where b was written"). Event counts are
/// turned into costs by negative log relative frequency with add-one
/// smoothing, rescaled so the maximum (the unseen-event cost) is 1. Pairs
/// with no edits contribute no mass; if nothing was observed at all the
/// uniform default table is returned.
pub fn estimate_confusion_matrix<S: AsRef<str>>(
    pairs: &[(S, S)],
) -> Result<CostTable, EditError> {
    if pairs.is_empty() {
        return Err(EditError::NoPairs);
    }
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Event {
        Sub(char, char),
        Ins(char),
        Del(char),
    }
    let mut counts: BTreeMap<Event, u64> = BTreeMap::new();
    for (ocr, gold) in pairs {
        for event in align_events(ocr.as_ref(), gold.as_ref()) {
            *counts.entry(event).or_insert(0) += 1;
        }
    }
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Ok(CostTable::default());
    }
    let kinds = counts.len() as u64;
    // Add-one smoothing over the observed event vocabulary plus one slot for
    // every unseen event.
    let denom = (total + kinds + 1) as f64;
    let unseen_cost = -(1.0 / denom).ln();
    let cost_of = |count: u64| -((count + 1) as f64 / denom).ln() / unseen_cost;
    let mut substitution = BTreeMap::new();
    let mut insertion = BTreeMap::new();
    let mut deletion = BTreeMap::new();
    for (event, count) in counts {
        let cost = cost_of(count);
        match event {
            Event::Sub(a, b) => {
                substitution.insert((a, b), cost);
            }
            Event::Ins(c) => {
                insertion.insert(c, cost);
            }
            Event::Del(c) => {
                deletion.insert(c, cost);
            }
        }
    }
    return CostTable::new(substitution, insertion, deletion, (1.0, 1.0, 1.0));

    /// One minimal unit-cost script from `from` to `to`, with a fixed
    /// preference order (match/substitute, then delete, then insert).
    fn align_events(from: &str, to: &str) -> Vec<Event> {
        let f: Vec<char> = from.chars().collect();
        let t: Vec<char> = to.chars().collect();
        let rows = f.len() + 1;
        let cols = t.len() + 1;
        let mut dp = vec![0usize; rows * cols];
        for i in 1..rows {
            dp[i * cols] = i;
        }
        for j in 1..cols {
            dp[j] = j;
        }
        for i in 1..rows {
            for j in 1..cols {
                let sub = dp[(i - 1) * cols + j - 1] + usize::from(f[i - 1] != t[j - 1]);
                let del = dp[(i - 1) * cols + j] + 1;
                let ins = dp[i * cols + j - 1] + 1;
                dp[i * cols + j] = sub.min(del).min(ins);
            }
        }
        let mut events = Vec::new();
        let (mut i, mut j) = (f.len(), t.len());
        while i > 0 || j > 0 {
            let here = dp[i * cols + j];
            if i > 0 && j > 0 {
                let diag = dp[(i - 1) * cols + j - 1];
                if f[i - 1] == t[j - 1] && diag == here {
                    i -= 1;
                    j -= 1;
                    continue;
                }
                if diag + 1 == here {
                    events.push(Event::Sub(f[i - 1], t[j - 1]));
                    i -= 1;
                    j -= 1;
                    continue;
                }
            }
            if i > 0 && dp[(i - 1) * cols + j] + 1 == here {
                events.push(Event::Del(f[i - 1]));
                i -= 1;
                continue;
            }
            events.push(Event::Ins(t[j - 1]));
            j -= 1;
        }
        events
    }
}
