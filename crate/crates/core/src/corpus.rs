//! OCR token ingestion, vocabulary construction, and index persistence.
//!
//! Input formats are UTF-8 TSV with a fixed header (see `docs/format.md`).
//! The binary `.nlx` index is little-endian throughout, carries a whole-file
//! SHA-256 checksum, and round-trips bit-exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::phoc::{self, PhocConfig, PhocError};
use crate::ranking::SearchIndex;
use crate::subspace::CcaModel;

pub const INDEX_MAGIC: [u8; 4] = *b"NLX1";
pub const INDEX_VERSION: u32 = 1;
pub const MODEL_MAGIC: [u8; 4] = *b"NLXM";

pub const TOKENS_HEADER: &str = "page_id\tword_id\ttext\tx0\ty0\tx1\ty1\tconfidence";
pub const ALIGNMENTS_HEADER: &str = "page_id\tword_id\tocr_text\tgold_text";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("could not read input: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing or malformed header line, expected {expected:?}")]
    BadHeader { expected: &'static str },
    #[error("candidate list is empty")]
    EmptyCorpus,
}

#[derive(Debug, Error)]
pub enum IndexIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not an index file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("file is truncated")]
    Truncated,
    #[error("checksum mismatch: file is corrupt")]
    ChecksumMismatch,
    #[error("inconsistent index contents: {0}")]
    Format(String),
    #[error(transparent)]
    Config(#[from] PhocError),
}

/// One OCR word occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub page_id: String,
    pub word_id: u32,
    pub text: String,
    pub bbox: BoundingBox,
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundingBox {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

/// Ground-truth transcription for one candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentRecord {
    pub page_id: String,
    pub word_id: u32,
    pub ocr_text: String,
    pub gold_text: String,
}

/// Where a vocabulary token occurs; the candidate minus its text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Occurrence {
    pub page: String,
    pub word: u32,
    #[serde(rename = "box")]
    pub bbox: [i32; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Occurrence {
    fn of(c: &Candidate) -> Self {
        Self {
            page: c.page_id.clone(),
            word: c.word_id,
            bbox: [c.bbox.x0, c.bbox.y0, c.bbox.x1, c.bbox.y1],
            confidence: c.confidence,
        }
    }
}

/// A syntactically bad input line; the line was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Result of parsing a token stream: candidates in input order plus the
/// per-line error report. A nonzero error count is surfaced to the caller;
/// the candidates themselves are usable regardless.
#[derive(Debug, Default)]
pub struct ParsedTokens {
    pub candidates: Vec<Candidate>,
    pub errors: Vec<LineError>,
}

/// Parse the tab-separated token stream (header: page_id, word_id, text,
/// x0, y0, x1, y1, confidence). Malformed lines are collected with their
/// line numbers and skipped. An empty stream yields an empty list.
pub fn parse_tokens<R: BufRead>(reader: R) -> Result<ParsedTokens, CorpusError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        None => return Ok(ParsedTokens::default()),
        Some(line) => line?,
    };
    if header != TOKENS_HEADER {
        return Err(CorpusError::BadHeader {
            expected: TOKENS_HEADER,
        });
    }
    let mut out = ParsedTokens::default();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        match parse_candidate_line(&line) {
            Ok(candidate) => out.candidates.push(candidate),
            Err(message) => out.errors.push(LineError {
                line: line_no,
                message,
            }),
        }
    }
    Ok(out)
}

fn parse_candidate_line(line: &str) -> Result<Candidate, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 fields, found {}", fields.len()));
    }
    let page_id = fields[0].to_string();
    let word_id: u32 = fields[1]
        .parse()
        .map_err(|_| format!("bad word_id {:?}", fields[1]))?;
    let text = fields[2].to_string();
    if text.is_empty() {
        return Err("empty text".to_string());
    }
    let mut coords = [0i32; 4];
    for (i, slot) in coords.iter_mut().enumerate() {
        *slot = fields[3 + i]
            .parse()
            .map_err(|_| format!("bad coordinate {:?}", fields[3 + i]))?;
    }
    let [x0, y0, x1, y1] = coords;
    if x0 >= x1 || y0 >= y1 {
        return Err(format!(
            "degenerate box ({x0},{y0})-({x1},{y1}): x0 < x1 and y0 < y1 required"
        ));
    }
    let confidence = if fields[7].is_empty() {
        None
    } else {
        let value: f64 = fields[7]
            .parse()
            .map_err(|_| format!("bad confidence {:?}", fields[7]))?;
        if !(0.0..=100.0).contains(&value) {
            return Err(format!("confidence {value} outside [0, 100]"));
        }
        Some(value)
    };
    Ok(Candidate {
        page_id,
        word_id,
        text,
        bbox: BoundingBox { x0, y0, x1, y1 },
        confidence,
    })
}

/// Parsed alignment records plus per-line errors, like [`parse_tokens`].
#[derive(Debug, Default)]
pub struct ParsedAlignments {
    pub records: Vec<AlignmentRecord>,
    pub errors: Vec<LineError>,
}

/// Parse the alignment stream (header: page_id, word_id, ocr_text, gold_text).
pub fn parse_alignments<R: BufRead>(reader: R) -> Result<ParsedAlignments, CorpusError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        None => return Ok(ParsedAlignments::default()),
        Some(line) => line?,
    };
    if header != ALIGNMENTS_HEADER {
        return Err(CorpusError::BadHeader {
            expected: ALIGNMENTS_HEADER,
        });
    }
    let mut out = ParsedAlignments::default();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed = if fields.len() != 4 {
            Err(format!("expected 4 fields, found {}", fields.len()))
        } else if fields[3].is_empty() {
            Err("empty gold_text".to_string())
        } else {
            match fields[1].parse::<u32>() {
                Ok(word_id) => Ok(AlignmentRecord {
                    page_id: fields[0].to_string(),
                    word_id,
                    ocr_text: fields[2].to_string(),
                    gold_text: fields[3].to_string(),
                }),
                Err(_) => Err(format!("bad word_id {:?}", fields[1])),
            }
        };
        match parsed {
            Ok(record) => out.records.push(record),
            Err(message) => out.errors.push(LineError {
                line: line_no,
                message,
            }),
        }
    }
    Ok(out)
}

/// Check that every alignment record refers to an existing candidate with
/// the same OCR text; returns a description of each dangling reference.
pub fn validate_alignments(
    candidates: &[Candidate],
    alignments: &[AlignmentRecord],
) -> Vec<String> {
    let by_key: BTreeMap<(&str, u32), &Candidate> = candidates
        .iter()
        .map(|c| ((c.page_id.as_str(), c.word_id), c))
        .collect();
    let mut dangling = Vec::new();
    for record in alignments {
        match by_key.get(&(record.page_id.as_str(), record.word_id)) {
            None => dangling.push(format!(
                "{}:{} has no matching candidate",
                record.page_id, record.word_id
            )),
            Some(c) if c.text != record.ocr_text => dangling.push(format!(
                "{}:{} ocr_text {:?} does not match candidate text {:?}",
                record.page_id, record.word_id, record.ocr_text, c.text
            )),
            Some(_) => {}
        }
    }
    dangling
}

/// Deduplicate candidates into a lexicographically sorted vocabulary with
/// per-token occurrence lists in input order.
pub fn build_vocab(
    candidates: &[Candidate],
) -> Result<(Vec<String>, Vec<Vec<Occurrence>>), CorpusError> {
    if candidates.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut map: BTreeMap<&str, Vec<Occurrence>> = BTreeMap::new();
    for c in candidates {
        map.entry(&c.text).or_default().push(Occurrence::of(c));
    }
    let mut vocab = Vec::with_capacity(map.len());
    let mut postings = Vec::with_capacity(map.len());
    for (token, occs) in map {
        vocab.push(token.to_string());
        postings.push(occs);
    }
    Ok((vocab, postings))
}

/// Everything needed to serve queries, as persisted in a `.nlx` file.
#[derive(Debug, Clone)]
pub struct IndexFile {
    pub config: PhocConfig,
    pub model: CcaModel,
    /// Packed PHOC bits, one row of ceil(dim/8) bytes per vocabulary token.
    pub phoc_rows: Vec<u8>,
    pub index: SearchIndex,
}

impl IndexFile {
    /// Encode the vocabulary, project it (identity when no model is given),
    /// and precompute hub penalties. Tokens that cannot be encoded get
    /// all-zero rows and are excluded from ranking.
    pub fn build(
        config: PhocConfig,
        model: Option<CcaModel>,
        candidates: &[Candidate],
        k: usize,
    ) -> Result<Self, BuildError> {
        let (vocab, postings) = build_vocab(candidates)?;
        let d = config.dimension();
        if let Some(m) = &model {
            if m.input_dimension() != d {
                return Err(BuildError::ModelDimension {
                    model: m.input_dimension(),
                    config: d,
                });
            }
        }
        let row_bytes = d.div_ceil(8);
        let mut phoc_rows = vec![0u8; vocab.len() * row_bytes];
        let mut reals = DMatrix::<f64>::zeros(d, vocab.len());
        let mut unencodable = 0usize;
        for (j, token) in vocab.iter().enumerate() {
            match phoc::encode(token, &config) {
                Ok(bits) => {
                    phoc_rows[j * row_bytes..(j + 1) * row_bytes]
                        .copy_from_slice(bits.as_bytes());
                    reals.set_column(j, &DVector::from_vec(bits.to_f64()));
                }
                Err(_) => unencodable += 1,
            }
        }
        if unencodable > 0 {
            log::warn!("{unencodable} tokens could not be encoded; stored as zero rows");
        }
        let index =
            crate::ranking::build_index(model.as_ref(), &reals, vocab, postings, k)?;
        let model = model.unwrap_or_else(|| CcaModel::identity(d));
        Ok(Self {
            config,
            model,
            phoc_rows,
            index,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexIoError> {
        let body = self.encode_body();
        let mut file = std::fs::File::create(path)?;
        file.write_all(&INDEX_MAGIC)?;
        file.write_all(&INDEX_VERSION.to_le_bytes())?;
        file.write_all(&(body.len() as u64).to_le_bytes())?;
        let digest = Sha256::digest(&body);
        file.write_all(&digest)?;
        file.write_all(&body)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexIoError> {
        let raw = std::fs::read(path)?;
        if raw.len() < 4 {
            return Err(IndexIoError::Truncated);
        }
        if raw[..4] != INDEX_MAGIC {
            return Err(IndexIoError::BadMagic);
        }
        if raw.len() < 48 {
            return Err(IndexIoError::Truncated);
        }
        let version = u32::from_le_bytes(raw[4..8].try_into().unwrap());
        if version != INDEX_VERSION {
            return Err(IndexIoError::VersionMismatch {
                found: version,
                expected: INDEX_VERSION,
            });
        }
        let body_len = u64::from_le_bytes(raw[8..16].try_into().unwrap()) as usize;
        let stored_digest = &raw[16..48];
        let body = &raw[48..];
        if body.len() < body_len {
            return Err(IndexIoError::Truncated);
        }
        if body.len() > body_len {
            return Err(IndexIoError::Format(format!(
                "{} trailing bytes after body",
                body.len() - body_len
            )));
        }
        let digest = Sha256::digest(body);
        if digest.as_slice() != stored_digest {
            return Err(IndexIoError::ChecksumMismatch);
        }
        Self::decode_body(body)
    }

    fn encode_body(&self) -> Vec<u8> {
        let mut w = Vec::new();
        let config_text = self.config.to_text();
        put_block(&mut w, config_text.as_bytes());

        // Model: d, p, lambda, mean_x, mean_y, Wx, Wy (column-major f64).
        let d = self.model.input_dimension();
        let p = self.model.projection_dimension();
        put_u32(&mut w, d as u32);
        put_u32(&mut w, p as u32);
        put_f64(&mut w, self.model.lambda());
        for v in self.model.mean_x().iter() {
            put_f64(&mut w, *v);
        }
        for v in self.model.mean_y().iter() {
            put_f64(&mut w, *v);
        }
        for v in self.model.wx().as_slice() {
            put_f64(&mut w, *v);
        }
        for v in self.model.wy().as_slice() {
            put_f64(&mut w, *v);
        }

        // Packed PHOC matrix.
        let m = self.index.len();
        put_u32(&mut w, m as u32);
        w.extend_from_slice(&self.phoc_rows);

        // Projected candidate matrix (column-major f64).
        put_u32(&mut w, self.index.dimension() as u32);
        put_u32(&mut w, m as u32);
        for v in self.index.projected().as_slice() {
            put_f64(&mut w, *v);
        }

        // Hub penalties and k.
        put_u32(&mut w, m as u32);
        for v in self.index.hub_penalties() {
            put_f64(&mut w, *v);
        }
        put_u32(&mut w, self.index.k() as u32);

        // Vocabulary.
        put_u32(&mut w, m as u32);
        for token in self.index.vocab() {
            put_block(&mut w, token.as_bytes());
        }

        // Postings, in vocabulary order.
        for j in 0..m {
            let occs = self.index.postings(j);
            put_u32(&mut w, occs.len() as u32);
            for occ in occs {
                put_block(&mut w, occ.page.as_bytes());
                put_u32(&mut w, occ.word);
                for c in occ.bbox {
                    w.extend_from_slice(&c.to_le_bytes());
                }
                match occ.confidence {
                    Some(v) => {
                        w.push(1);
                        put_f64(&mut w, v);
                    }
                    None => {
                        w.push(0);
                        put_f64(&mut w, 0.0);
                    }
                }
            }
        }
        w
    }

    fn decode_body(body: &[u8]) -> Result<Self, IndexIoError> {
        let mut r = Reader { buf: body, pos: 0 };
        let config_text = String::from_utf8(r.block()?.to_vec())
            .map_err(|e| IndexIoError::Format(format!("config not UTF-8: {e}")))?;
        let config = PhocConfig::from_text(&config_text)?;

        let d = r.u32()? as usize;
        let p = r.u32()? as usize;
        let lambda = r.f64()?;
        if d != config.dimension() {
            return Err(IndexIoError::Format(format!(
                "model dimension {d} != config dimension {}",
                config.dimension()
            )));
        }
        let mean_x = DVector::from_iterator(d, r.f64_iter(d)?);
        let mean_y = DVector::from_iterator(d, r.f64_iter(d)?);
        let wx = DMatrix::from_iterator(d, p, r.f64_iter(d * p)?);
        let wy = DMatrix::from_iterator(d, p, r.f64_iter(d * p)?);
        let model = CcaModel::from_parts(wx, wy, mean_x, mean_y, lambda);

        let m = r.u32()? as usize;
        let row_bytes = d.div_ceil(8);
        let phoc_rows = r.take(m * row_bytes)?.to_vec();

        let proj_p = r.u32()? as usize;
        let proj_m = r.u32()? as usize;
        if proj_p != p || proj_m != m {
            return Err(IndexIoError::Format(format!(
                "projected matrix is {proj_p}x{proj_m}, expected {p}x{m}"
            )));
        }
        let projected = DMatrix::from_iterator(p, m, r.f64_iter(p * m)?);

        let rk_len = r.u32()? as usize;
        if rk_len != m {
            return Err(IndexIoError::Format(format!(
                "penalty vector has {rk_len} entries, expected {m}"
            )));
        }
        let rk: Vec<f64> = r.f64_iter(m)?.collect();
        let k = r.u32()? as usize;

        let vocab_len = r.u32()? as usize;
        if vocab_len != m {
            return Err(IndexIoError::Format(format!(
                "vocabulary has {vocab_len} entries, expected {m}"
            )));
        }
        let mut vocab = Vec::with_capacity(m);
        for _ in 0..m {
            let token = String::from_utf8(r.block()?.to_vec())
                .map_err(|e| IndexIoError::Format(format!("token not UTF-8: {e}")))?;
            vocab.push(token);
        }

        let mut postings = Vec::with_capacity(m);
        for _ in 0..m {
            let count = r.u32()? as usize;
            let mut occs = Vec::with_capacity(count);
            for _ in 0..count {
                let page = String::from_utf8(r.block()?.to_vec())
                    .map_err(|e| IndexIoError::Format(format!("page id not UTF-8: {e}")))?;
                let word = r.u32()?;
                let mut bbox = [0i32; 4];
                for slot in &mut bbox {
                    *slot = i32::from_le_bytes(r.take(4)?.try_into().unwrap());
                }
                let flag = r.take(1)?[0];
                let value = r.f64()?;
                occs.push(Occurrence {
                    page,
                    word,
                    bbox,
                    confidence: (flag == 1).then_some(value),
                });
            }
            postings.push(occs);
        }
        if r.pos != body.len() {
            return Err(IndexIoError::Format(format!(
                "{} unread bytes at end of body",
                body.len() - r.pos
            )));
        }
        let index = SearchIndex::from_parts(projected, rk, k, vocab, postings);
        Ok(Self {
            config,
            model,
            phoc_rows,
            index,
        })
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Rank(#[from] crate::ranking::RankError),
    #[error("model expects dimension {model} but config produces {config}")]
    ModelDimension { model: usize, config: usize },
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(w: &mut Vec<u8>, v: f64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_block(w: &mut Vec<u8>, bytes: &[u8]) {
    put_u32(w, bytes.len() as u32);
    w.extend_from_slice(bytes);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexIoError> {
        if self.pos + n > self.buf.len() {
            return Err(IndexIoError::Truncated);
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, IndexIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, IndexIoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_iter(&mut self, n: usize) -> Result<impl Iterator<Item = f64> + 'a, IndexIoError> {
        let bytes = self.take(n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap())))
    }

    fn block(&mut self) -> Result<&'a [u8], IndexIoError> {
        let len = self.u32()? as usize;
        self.take(len)
    }
}

/// Persist a trained model on its own (`.nlxm`): same layout as the model
/// section of an index file, with magic, version, length and checksum.
pub fn save_model(model: &CcaModel, path: &Path) -> Result<(), IndexIoError> {
    let mut body = Vec::new();
    put_u32(&mut body, model.input_dimension() as u32);
    put_u32(&mut body, model.projection_dimension() as u32);
    put_f64(&mut body, model.lambda());
    for v in model.mean_x().iter() {
        put_f64(&mut body, *v);
    }
    for v in model.mean_y().iter() {
        put_f64(&mut body, *v);
    }
    for v in model.wx().as_slice() {
        put_f64(&mut body, *v);
    }
    for v in model.wy().as_slice() {
        put_f64(&mut body, *v);
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&MODEL_MAGIC)?;
    file.write_all(&INDEX_VERSION.to_le_bytes())?;
    file.write_all(&(body.len() as u64).to_le_bytes())?;
    file.write_all(&Sha256::digest(&body))?;
    file.write_all(&body)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<CcaModel, IndexIoError> {
    let raw = std::fs::read(path)?;
    if raw.len() < 4 {
        return Err(IndexIoError::Truncated);
    }
    if raw[..4] != MODEL_MAGIC {
        return Err(IndexIoError::BadMagic);
    }
    if raw.len() < 48 {
        return Err(IndexIoError::Truncated);
    }
    let version = u32::from_le_bytes(raw[4..8].try_into().unwrap());
    if version != INDEX_VERSION {
        return Err(IndexIoError::VersionMismatch {
            found: version,
            expected: INDEX_VERSION,
        });
    }
    let body_len = u64::from_le_bytes(raw[8..16].try_into().unwrap()) as usize;
    let body = &raw[48..];
    if body.len() != body_len {
        return Err(IndexIoError::Truncated);
    }
    if Sha256::digest(body).as_slice() != &raw[16..48] {
        return Err(IndexIoError::ChecksumMismatch);
    }
    let mut r = Reader { buf: body, pos: 0 };
    let d = r.u32()? as usize;
    let p = r.u32()? as usize;
    let lambda = r.f64()?;
    let mean_x = DVector::from_iterator(d, r.f64_iter(d)?);
    let mean_y = DVector::from_iterator(d, r.f64_iter(d)?);
    let wx = DMatrix::from_iterator(d, p, r.f64_iter(d * p)?);
    let wy = DMatrix::from_iterator(d, p, r.f64_iter(d * p)?);
    if r.pos != body.len() {
        return Err(IndexIoError::Format("trailing bytes in model file".into()));
    }
    Ok(CcaModel::from_parts(wx, wy, mean_x, mean_y, lambda))
}
