//! Pyramidal histogram of characters (PHOC) word encoding.
//!
//! A word is divided into `level` equal regions at each pyramid level; a bit
//! is set for character `c` in region `r` of level `l` when some occurrence
//! of `c` overlaps region `r` by at least half the character's own width.
//! The final vector is the concatenation of all level segments, so the level
//! list `[1, 2, 4, 8]` over a 96-character set yields 96 * 15 = 1440 bits.
//!
//! All interval comparisons are carried out in exact integer arithmetic
//! (cross-multiplication); the frequent exactly-50% overlaps must not depend
//! on floating-point rounding.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Pyramid levels of the default configuration.
pub const DEFAULT_LEVELS: [usize; 4] = [1, 2, 4, 8];

/// Default 96-character set: ASCII letters and digits, German and Polish
/// diacritics, and common punctuation. The exact membership is a library
/// constant, not a property of any particular corpus.
pub const DEFAULT_CHARSET: &str = "abcdefghijklmnopqrstuvwxyz\
ABCDEFGHIJKLMNOPQRSTUVWXYZ\
0123456789\
äöüÄÖÜß\
ąćęłńóśźż\
ĄĆĘŁŃÓŚŹŻ\
.,;:!?-'\"";

#[derive(Debug, Error)]
pub enum PhocError {
    #[error("charset must be non-empty")]
    EmptyCharset,
    #[error("charset contains duplicate character {0:?}")]
    DuplicateChar(char),
    #[error("charset may not contain control characters ({0:?})")]
    ControlChar(char),
    #[error("levels must be strictly positive and strictly increasing, got {0:?}")]
    BadLevels(Vec<usize>),
    #[error("cannot encode an empty word")]
    EmptyWord,
    #[error("word {0:?} contains no in-charset characters")]
    NoEncodableChars(String),
    #[error("character position {k} out of range for word length {n}")]
    PositionOutOfRange { k: usize, n: usize },
    #[error("malformed config document: {0}")]
    BadConfigText(String),
}

/// Character set, pyramid levels, and case handling for PHOC encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhocConfig {
    charset: Vec<char>,
    char_index: HashMap<char, usize>,
    levels: Vec<usize>,
    case_sensitive: bool,
}

impl PhocConfig {
    pub fn new(charset: &str, levels: &[usize], case_sensitive: bool) -> Result<Self, PhocError> {
        let chars: Vec<char> = charset.chars().collect();
        if chars.is_empty() {
            return Err(PhocError::EmptyCharset);
        }
        let mut char_index = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if c.is_control() {
                return Err(PhocError::ControlChar(c));
            }
            if char_index.insert(c, i).is_some() {
                return Err(PhocError::DuplicateChar(c));
            }
        }
        let increasing = levels.windows(2).all(|w| w[0] < w[1]);
        if levels.is_empty() || levels[0] == 0 || !increasing {
            return Err(PhocError::BadLevels(levels.to_vec()));
        }
        Ok(Self {
            charset: chars,
            char_index,
            levels: levels.to_vec(),
            case_sensitive,
        })
    }

    /// The 96-character, four-level configuration (1440-bit vectors).
    pub fn default_96() -> Self {
        Self::new(DEFAULT_CHARSET, &DEFAULT_LEVELS, true)
            .expect("default charset is valid")
    }

    pub fn charset(&self) -> &[char] {
        &self.charset
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn case_sensitive(&self) -> bool {
        self.case_sensitive
    }

    /// Total bit length of an encoded word: |charset| * sum(levels).
    pub fn dimension(&self) -> usize {
        self.charset.len() * self.levels.iter().sum::<usize>()
    }

    /// Bit position of (level index, region, charset index) in the layout.
    /// Level-major, then region within level, then charset order.
    pub fn bit_offset(&self, level_idx: usize, region: usize, char_idx: usize) -> usize {
        let preceding: usize = self.levels[..level_idx].iter().sum();
        (preceding + region) * self.charset.len() + char_idx
    }

    fn lookup(&self, c: char) -> Option<usize> {
        if self.case_sensitive {
            self.char_index.get(&c).copied()
        } else {
            // Fold to a single lowercase code point where possible; characters
            // with multi-codepoint lowercase forms are looked up as-is.
            let mut lower = c.to_lowercase();
            let folded = match (lower.next(), lower.next()) {
                (Some(l), None) => l,
                _ => c,
            };
            self.char_index
                .get(&folded)
                .or_else(|| self.char_index.get(&c))
                .copied()
        }
    }

    /// Render as the small text document embedded in index files.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "nlx-phoc-config v1").unwrap();
        let levels: Vec<String> = self.levels.iter().map(|l| l.to_string()).collect();
        writeln!(out, "levels {}", levels.join(",")).unwrap();
        writeln!(out, "case_sensitive {}", self.case_sensitive).unwrap();
        let charset: String = self.charset.iter().collect();
        writeln!(out, "charset {charset}").unwrap();
        out
    }

    /// Parse the text document produced by [`PhocConfig::to_text`].
    pub fn from_text(text: &str) -> Result<Self, PhocError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != "nlx-phoc-config v1" {
            return Err(PhocError::BadConfigText(format!(
                "unexpected header {header:?}"
            )));
        }
        let mut levels: Option<Vec<usize>> = None;
        let mut case_sensitive: Option<bool> = None;
        let mut charset: Option<String> = None;
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(' ')
                .ok_or_else(|| PhocError::BadConfigText(format!("bad line {line:?}")))?;
            match key {
                "levels" => {
                    let parsed: Result<Vec<usize>, _> =
                        value.split(',').map(|v| v.trim().parse()).collect();
                    levels = Some(parsed.map_err(|e| {
                        PhocError::BadConfigText(format!("bad levels {value:?}: {e}"))
                    })?);
                }
                "case_sensitive" => {
                    case_sensitive = Some(value.trim().parse().map_err(|_| {
                        PhocError::BadConfigText(format!("bad case flag {value:?}"))
                    })?);
                }
                "charset" => charset = Some(value.to_string()),
                other => {
                    return Err(PhocError::BadConfigText(format!("unknown key {other:?}")))
                }
            }
        }
        let charset = charset.ok_or_else(|| PhocError::BadConfigText("missing charset".into()))?;
        let levels = levels.ok_or_else(|| PhocError::BadConfigText("missing levels".into()))?;
        let case = case_sensitive
            .ok_or_else(|| PhocError::BadConfigText("missing case_sensitive".into()))?;
        Self::new(&charset, &levels, case)
    }
}

/// Closed interval [lo_num/den, hi_num/den] with an exact shared denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occupancy {
    pub lo_num: u64,
    pub hi_num: u64,
    pub den: u64,
}

impl Occupancy {
    pub fn lo(&self) -> f64 {
        self.lo_num as f64 / self.den as f64
    }

    pub fn hi(&self) -> f64 {
        self.hi_num as f64 / self.den as f64
    }
}

/// Normalized occupancy of the zero-based `k`th character of an `n`-character
/// word: the interval [k/n, (k+1)/n].
pub fn occupancy(k: usize, n: usize) -> Result<Occupancy, PhocError> {
    if n == 0 || k >= n {
        return Err(PhocError::PositionOutOfRange { k, n });
    }
    Ok(Occupancy {
        lo_num: k as u64,
        hi_num: k as u64 + 1,
        den: n as u64,
    })
}

/// Regions of `level` that character `k` of an `n`-character word belongs to.
///
/// A character belongs to every region overlapping at least half of the
/// character's own occupancy; an exact 50/50 split belongs to both adjacent
/// regions. When the word is so short that no region reaches the half-width
/// threshold (level > 2n), the regions of maximal overlap are used instead,
/// so every character lands in at least one region at every level.
pub fn assign_regions(k: usize, n: usize, level: usize) -> Result<Vec<usize>, PhocError> {
    if n == 0 || k >= n {
        return Err(PhocError::PositionOutOfRange { k, n });
    }
    if level == 0 {
        return Err(PhocError::BadLevels(vec![level]));
    }
    let (k, n, level) = (k as u64, n as u64, level as u64);
    // Intervals expressed over the common denominator n * level:
    //   character: [k*level, (k+1)*level]
    //   region r:  [r*n, (r+1)*n]
    // The half-width test  |overlap| >= 1/(2n)  becomes  2*overlap_num >= level.
    let overlap_num = |r: u64| -> u64 {
        let lo = (k * level).max(r * n);
        let hi = ((k + 1) * level).min((r + 1) * n);
        hi.saturating_sub(lo)
    };
    let mut regions: Vec<usize> = (0..level)
        .filter(|&r| 2 * overlap_num(r) >= level)
        .map(|r| r as usize)
        .collect();
    if regions.is_empty() {
        let best = (0..level).map(overlap_num).max().unwrap_or(0);
        regions = (0..level)
            .filter(|&r| overlap_num(r) == best)
            .map(|r| r as usize)
            .collect();
    }
    Ok(regions)
}

/// Fixed-length binary word embedding, packed eight bits per byte
/// (least-significant bit first within each byte).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhocVector {
    bits: Vec<u8>,
    len: usize,
}

impl PhocVector {
    fn zeros(len: usize) -> Self {
        Self {
            bits: vec![0u8; len.div_ceil(8)],
            len,
        }
    }

    /// Reconstruct from packed bytes (as stored in index files).
    pub fn from_packed(bits: Vec<u8>, len: usize) -> Self {
        assert_eq!(bits.len(), len.div_ceil(8), "packed length mismatch");
        Self { bits, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.bits[i / 8] & (1 << (i % 8)) != 0
    }

    fn set(&mut self, i: usize) {
        self.bits[i / 8] |= 1 << (i % 8);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Packed byte view, padded to a byte boundary; the index-file row format.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    /// Bits widened to {0.0, 1.0}; the representation handed to CCA.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len).map(|i| f64::from(u8::from(self.get(i)))).collect()
    }
}

/// Encode a word into its PHOC vector.
///
/// Out-of-charset characters still occupy positions (they count toward the
/// word length and shift their neighbours' occupancies) but set no bits.
/// The word is taken as a sequence of code points with no normalization.
pub fn encode(word: &str, config: &PhocConfig) -> Result<PhocVector, PhocError> {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return Err(PhocError::EmptyWord);
    }
    let n = chars.len();
    let mut vector = PhocVector::zeros(config.dimension());
    let mut any = false;
    for (k, &c) in chars.iter().enumerate() {
        let Some(char_idx) = config.lookup(c) else {
            continue;
        };
        any = true;
        for (level_idx, &level) in config.levels.iter().enumerate() {
            for region in assign_regions(k, n, level)? {
                vector.set(config.bit_offset(level_idx, region, char_idx));
            }
        }
    }
    if !any {
        return Err(PhocError::NoEncodableChars(word.to_string()));
    }
    Ok(vector)
}
