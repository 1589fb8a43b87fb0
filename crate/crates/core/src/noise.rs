//! Synthetic OCR corruption: a per-character substitution/deletion/insertion
//! channel plus a page-oriented corpus generator emitting the token and
//! alignment TSV formats.
//!
//! The default profile is calibrated so that roughly 60% of corrupted samples
//! of common German words stay within edit distance 2 of their source.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{ALIGNMENTS_HEADER, TOKENS_HEADER};
use crate::editdist::levenshtein;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("substitution and deletion rates sum to {0}, more than one event per slot")]
    RatesExceedSlot(f64),
    #[error("channel alphabet is empty")]
    EmptyAlphabet,
    #[error("lexicon is empty")]
    EmptyLexicon,
}

/// Per-character weighted substitution targets.
#[derive(Debug, Clone, Default)]
pub struct ConfusionWeights {
    by_source: BTreeMap<char, Vec<(char, f64)>>,
    marginal: Vec<(char, f64)>,
}

impl ConfusionWeights {
    /// Build from (source, target, weight) triples, dropping targets outside
    /// the alphabet and sources with no remaining targets.
    pub fn new(entries: &[(char, char, f64)], alphabet: &[char]) -> Self {
        let allowed: std::collections::BTreeSet<char> = alphabet.iter().copied().collect();
        let mut by_source: BTreeMap<char, Vec<(char, f64)>> = BTreeMap::new();
        let mut marginal: BTreeMap<char, f64> = BTreeMap::new();
        for &(src, dst, w) in entries {
            if w <= 0.0 || !allowed.contains(&dst) || src == dst {
                continue;
            }
            by_source.entry(src).or_default().push((dst, w));
            *marginal.entry(dst).or_insert(0.0) += w;
        }
        Self {
            by_source,
            marginal: marginal.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.by_source.is_empty()
    }

    fn targets(&self, source: char) -> Option<&[(char, f64)]> {
        self.by_source.get(&source).map(|v| v.as_slice())
    }
}

/// Seeded character-level corruption channel. Pure: the corruption of a word
/// is a deterministic function of (word, channel); the event at position k
/// depends only on (word, seed, k).
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    pub sub_rate: f64,
    pub del_rate: f64,
    pub ins_rate: f64,
    pub alphabet: Vec<char>,
    pub confusion: Option<ConfusionWeights>,
    pub seed: u64,
}

impl NoiseChannel {
    pub fn new(
        sub_rate: f64,
        del_rate: f64,
        ins_rate: f64,
        alphabet: Vec<char>,
        confusion: Option<ConfusionWeights>,
        seed: u64,
    ) -> Result<Self, NoiseError> {
        for rate in [sub_rate, del_rate, ins_rate] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(NoiseError::RateOutOfRange(rate));
            }
        }
        if sub_rate + del_rate > 1.0 {
            return Err(NoiseError::RatesExceedSlot(sub_rate + del_rate));
        }
        if alphabet.is_empty() {
            return Err(NoiseError::EmptyAlphabet);
        }
        Ok(Self {
            sub_rate,
            del_rate,
            ins_rate,
            alphabet,
            confusion,
            seed,
        })
    }

    /// Noiseless channel over the given alphabet.
    pub fn clean(alphabet: Vec<char>, seed: u64) -> Self {
        Self::new(0.0, 0.0, 0.0, alphabet, None, seed).expect("zero rates are valid")
    }

    /// The calibrated default profile: confusion-weighted substitutions plus
    /// occasional deletions and insertions, tuned to the 55-65% band of
    /// samples within edit distance 2.
    pub fn ocr_default(alphabet: Vec<char>, seed: u64) -> Result<Self, NoiseError> {
        let confusion = ConfusionWeights::new(&default_confusion_entries(), &alphabet);
        Self::new(
            0.32,
            0.09,
            0.09,
            alphabet,
            (!confusion.is_empty()).then_some(confusion),
            seed,
        )
    }

    /// Heavier variant of the default profile.
    pub fn ocr_heavy(alphabet: Vec<char>, seed: u64) -> Result<Self, NoiseError> {
        let confusion = ConfusionWeights::new(&default_confusion_entries(), &alphabet);
        Self::new(
            0.42,
            0.13,
            0.13,
            alphabet,
            (!confusion.is_empty()).then_some(confusion),
            seed,
        )
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut channel = self.clone();
        channel.seed = seed;
        channel
    }

    fn substitute(&self, c: char, rng: &mut ChaCha8Rng) -> char {
        if let Some(confusion) = &self.confusion {
            if let Some(targets) = confusion.targets(c) {
                return weighted_pick(targets, rng);
            }
        }
        // Uniform over the alphabet excluding the character itself.
        let pool: Vec<char> = self.alphabet.iter().copied().filter(|&a| a != c).collect();
        if pool.is_empty() {
            return c;
        }
        pool[rng.gen_range(0..pool.len())]
    }

    fn insert_char(&self, rng: &mut ChaCha8Rng) -> char {
        if let Some(confusion) = &self.confusion {
            if !confusion.marginal.is_empty() {
                return weighted_pick(&confusion.marginal, rng);
            }
        }
        self.alphabet[rng.gen_range(0..self.alphabet.len())]
    }
}

fn weighted_pick(weights: &[(char, f64)], rng: &mut ChaCha8Rng) -> char {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut draw = rng.gen::<f64>() * total;
    for &(c, w) in weights {
        draw -= w;
        if draw <= 0.0 {
            return c;
        }
    }
    weights.last().map(|(c, _)| *c).unwrap()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix(mut state: u64) -> u64 {
    state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn position_rng(seed: u64, word_hash: u64, position: u64) -> ChaCha8Rng {
    let mixed = splitmix(seed ^ splitmix(word_hash ^ splitmix(position)));
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Corrupt one word. Each character slot independently deletes, substitutes
/// or keeps its character, then independently inserts one character after it.
pub fn corrupt(word: &str, channel: &NoiseChannel) -> String {
    let word_hash = fnv1a(word.as_bytes());
    let mut out = String::with_capacity(word.len() + 2);
    for (k, c) in word.chars().enumerate() {
        let mut rng = position_rng(channel.seed, word_hash, k as u64);
        let slot: f64 = rng.gen();
        if slot < channel.del_rate {
            // deleted
        } else if slot < channel.del_rate + channel.sub_rate {
            out.push(channel.substitute(c, &mut rng));
        } else {
            out.push(c);
        }
        let ins: f64 = rng.gen();
        if ins < channel.ins_rate {
            out.push(channel.insert_char(&mut rng));
        }
    }
    out
}

/// The two corpus input files produced by [`generate_corpus`].
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub tokens_tsv: String,
    pub alignments_tsv: String,
}

/// Lay out `pages` pages of `words_per_page` words drawn from the lexicon by
/// frequency, corrupt each occurrence independently, and emit the token and
/// alignment TSV documents. Boxes are placed on a simple grid; every token
/// gets an alignment record. Deterministic given the channel seed; pages use
/// derived seeds, so their contents are independent of generation order.
pub fn generate_corpus(
    lexicon: &[(String, u32)],
    pages: usize,
    words_per_page: usize,
    channel: &NoiseChannel,
) -> Result<GeneratedCorpus, NoiseError> {
    if lexicon.is_empty() {
        return Err(NoiseError::EmptyLexicon);
    }
    let cumulative: Vec<u64> = lexicon
        .iter()
        .scan(0u64, |acc, (_, f)| {
            *acc += u64::from(*f).max(1);
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();

    let mut tokens = String::from(TOKENS_HEADER);
    tokens.push('\n');
    let mut alignments = String::from(ALIGNMENTS_HEADER);
    alignments.push('\n');

    use std::fmt::Write as _;
    for page in 0..pages {
        let page_id = format!("p{:03}", page + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(channel.seed ^ (page as u64 + 1)));
        for word_id in 0..words_per_page {
            let draw = rng.gen_range(0..total);
            let pick = cumulative.partition_point(|&c| c <= draw);
            let gold = &lexicon[pick].0;

            let occurrence_seed = rng.gen::<u64>();
            let mut ocr = String::new();
            for attempt in 0..16u64 {
                let per_occurrence = channel.with_seed(splitmix(occurrence_seed ^ attempt));
                ocr = corrupt(gold, &per_occurrence);
                if !ocr.is_empty() {
                    break;
                }
            }
            if ocr.is_empty() {
                ocr = gold.clone();
            }

            let col = word_id % 10;
            let row = word_id / 10;
            let x0 = 40 + (col as i32) * 190;
            let y0 = 60 + (row as i32) * 28;
            let width = (14 * ocr.chars().count() as i32).clamp(12, 180);
            let (x1, y1) = (x0 + width, y0 + 22);
            let distance = levenshtein(gold, &ocr) as f64;
            let confidence =
                (97.0 - 11.0 * distance - rng.gen_range(0.0..4.0)).clamp(3.0, 99.0);

            writeln!(
                tokens,
                "{page_id}\t{word_id}\t{ocr}\t{x0}\t{y0}\t{x1}\t{y1}\t{confidence:.1}"
            )
            .unwrap();
            writeln!(alignments, "{page_id}\t{word_id}\t{ocr}\t{gold}").unwrap();
        }
    }
    Ok(GeneratedCorpus {
        tokens_tsv: tokens,
        alignments_tsv: alignments,
    })
}

/// Common OCR confusions for Latin-script German text, as (gold, read, weight).
fn default_confusion_entries() -> Vec<(char, char, f64)> {
    vec![
        ('e', 'c', 3.0),
        ('e', 'o', 1.0),
        ('c', 'e', 2.0),
        ('c', 'o', 1.0),
        ('i', 'l', 3.0),
        ('i', 'j', 1.0),
        ('l', 'i', 3.0),
        ('l', 't', 2.0),
        ('t', 'f', 2.0),
        ('t', 'l', 1.0),
        ('f', 't', 2.0),
        ('f', 's', 1.0),
        ('n', 'm', 2.0),
        ('n', 'u', 2.0),
        ('m', 'n', 2.0),
        ('m', 'w', 1.0),
        ('u', 'n', 2.0),
        ('u', 'v', 1.0),
        ('u', 'ü', 1.0),
        ('a', 'o', 2.0),
        ('a', 'ä', 1.0),
        ('o', 'a', 2.0),
        ('o', 'ö', 1.0),
        ('o', 'c', 1.0),
        ('s', 'f', 1.0),
        ('s', 'z', 1.0),
        ('z', 's', 1.0),
        ('r', 'n', 1.0),
        ('r', 'v', 1.0),
        ('h', 'b', 2.0),
        ('h', 'n', 1.0),
        ('b', 'h', 2.0),
        ('b', 'd', 1.0),
        ('d', 'b', 1.0),
        ('d', 'o', 1.0),
        ('g', 'q', 1.0),
        ('g', 'y', 1.0),
        ('k', 'h', 1.0),
        ('w', 'v', 2.0),
        ('v', 'w', 2.0),
        ('v', 'u', 1.0),
        ('ä', 'a', 2.0),
        ('ä', 'ü', 1.0),
        ('ö', 'o', 2.0),
        ('ü', 'u', 2.0),
        ('ü', 'ä', 1.0),
        ('ß', 'b', 2.0),
        ('ß', 's', 1.0),
        ('B', 'R', 1.0),
        ('B', 'E', 1.0),
        ('D', 'O', 1.0),
        ('E', 'F', 1.0),
        ('F', 'E', 1.0),
        ('G', 'C', 1.0),
        ('I', 'l', 1.0),
        ('K', 'R', 1.0),
        ('O', 'D', 1.0),
        ('P', 'F', 1.0),
        ('R', 'K', 1.0),
        ('S', 'Z', 1.0),
        ('U', 'V', 1.0),
        ('V', 'U', 1.0),
        ('W', 'V', 1.0),
        ('Z', 'S', 1.0),
    ]
}
