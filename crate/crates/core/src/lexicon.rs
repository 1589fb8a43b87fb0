//! Built-in German word list with rough frequency weights, used by the
//! corpus generator when no lexicon file is supplied. The mix leans toward
//! content words (including long compounds) so that synthetic pages resemble
//! archival prose rather than a function-word soup.

use std::collections::BTreeSet;
use std::io::BufRead;

/// (word, frequency weight) entries. Weights are relative draw frequencies.
pub const DEFAULT_LEXICON: &[(&str, u32)] = &[
    ("der", 240),
    ("die", 230),
    ("und", 210),
    ("das", 150),
    ("von", 130),
    ("den", 120),
    ("mit", 110),
    ("nicht", 100),
    ("auf", 95),
    ("ist", 90),
    ("dem", 85),
    ("ein", 80),
    ("eine", 78),
    ("des", 75),
    ("als", 70),
    ("auch", 68),
    ("aus", 65),
    ("bei", 62),
    ("nach", 60),
    ("sich", 58),
    ("über", 55),
    ("wurde", 52),
    ("werden", 50),
    ("haben", 48),
    ("sind", 46),
    ("waren", 44),
    ("durch", 42),
    ("gegen", 40),
    ("unter", 38),
    ("zwischen", 36),
    ("Jahr", 55),
    ("Zeit", 54),
    ("Stadt", 50),
    ("Land", 48),
    ("Leben", 46),
    ("Krieg", 46),
    ("Volk", 42),
    ("Haus", 42),
    ("Hand", 40),
    ("Welt", 40),
    ("Mann", 38),
    ("Frau", 38),
    ("Kind", 36),
    ("Arbeit", 36),
    ("Recht", 34),
    ("Macht", 34),
    ("Staat", 34),
    ("Partei", 32),
    ("Regierung", 32),
    ("Gesetz", 30),
    ("Bericht", 30),
    ("Zeitung", 30),
    ("Brief", 28),
    ("Seite", 28),
    ("Bild", 26),
    ("Wort", 26),
    ("Name", 26),
    ("Platz", 24),
    ("Straße", 24),
    ("Gemeinde", 24),
    ("Familie", 24),
    ("Geschichte", 24),
    ("Bewegung", 22),
    ("Mitglied", 22),
    ("Verein", 22),
    ("Schule", 22),
    ("Kirche", 22),
    ("Gruppe", 20),
    ("Lager", 20),
    ("Polizei", 20),
    ("Behörde", 20),
    ("Verwaltung", 20),
    ("Bevölkerung", 20),
    ("Gesellschaft", 19),
    ("Wirtschaft", 19),
    ("Industrie", 18),
    ("Ausland", 18),
    ("Presse", 18),
    ("Artikel", 18),
    ("Nummer", 17),
    ("Ausgabe", 17),
    ("Verlag", 16),
    ("Druck", 16),
    ("Sache", 16),
    ("Frage", 16),
    ("Antwort", 16),
    ("Stelle", 15),
    ("Stunde", 15),
    ("Woche", 15),
    ("Monat", 15),
    ("Anfang", 14),
    ("Ende", 14),
    ("Folge", 14),
    ("Grund", 14),
    ("Ziel", 14),
    ("Weg", 14),
    ("Ort", 13),
    ("Raum", 13),
    ("Teil", 13),
    ("Zahl", 13),
    ("Reihe", 13),
    ("Punkt", 12),
    ("Linie", 12),
    ("Form", 12),
    ("Art", 12),
    ("Fall", 12),
    ("Lage", 12),
    ("Lösung", 12),
    ("Aufgabe", 12),
    ("Leitung", 11),
    ("Ordnung", 11),
    ("Stellung", 11),
    ("Verhältnis", 11),
    ("Bedeutung", 11),
    ("Entwicklung", 11),
    ("Erklärung", 10),
    ("Versammlung", 10),
    ("Veranstaltung", 10),
    ("Unterstützung", 10),
    ("Veröffentlichung", 9),
    ("Zusammenarbeit", 9),
    ("Reichsregierung", 8),
    ("Staatsbürger", 8),
    ("Kriegsgefangene", 8),
    ("Nationalsozialismus", 7),
    ("Nationalsozialistische", 7),
    ("Konzentrationslager", 7),
    ("Judenverfolgung", 7),
    ("Auswanderung", 8),
    ("Einwanderung", 8),
    ("Flüchtlinge", 9),
    ("Widerstand", 10),
    ("Besatzung", 10),
    ("Propaganda", 10),
    ("Dokument", 12),
    ("Sammlung", 12),
    ("Archiv", 12),
    ("Bibliothek", 11),
    ("Museum", 10),
    ("Universität", 10),
    ("Professor", 9),
    ("Student", 9),
    ("Lehrer", 10),
    ("Schüler", 10),
    ("Arzt", 10),
    ("Anwalt", 9),
    ("Richter", 9),
    ("Zeuge", 9),
    ("Prozess", 10),
    ("Urteil", 10),
    ("Strafe", 9),
    ("Gefängnis", 9),
    ("Freiheit", 11),
    ("Gerechtigkeit", 8),
    ("Wahrheit", 10),
    ("Hoffnung", 10),
    ("Angst", 10),
    ("Not", 10),
    ("Hunger", 9),
    ("Armut", 8),
    ("Krankheit", 9),
    ("Tod", 11),
    ("Opfer", 11),
    ("Täter", 9),
    ("Schuld", 10),
    ("Verantwortung", 9),
    ("Erinnerung", 10),
    ("Zeugnis", 9),
    ("Aussage", 10),
    ("Deutschland", 16),
    ("Berlin", 14),
    ("München", 12),
    ("Hamburg", 11),
    ("Wien", 11),
    ("Warschau", 10),
    ("Amsterdam", 9),
    ("London", 10),
    ("Paris", 10),
    ("Europa", 12),
    ("Amerika", 11),
    ("Polen", 11),
    ("Frankreich", 10),
    ("England", 10),
    ("Österreich", 9),
    ("sagen", 14),
    ("sagte", 14),
    ("machen", 13),
    ("gehen", 13),
    ("kommen", 13),
    ("kam", 12),
    ("sehen", 12),
    ("geben", 12),
    ("gab", 11),
    ("stehen", 11),
    ("stand", 11),
    ("finden", 11),
    ("fand", 10),
    ("bleiben", 10),
    ("blieb", 10),
    ("bringen", 10),
    ("brachte", 10),
    ("sollte", 10),
    ("konnte", 11),
    ("musste", 10),
    ("wollte", 10),
    ("groß", 12),
    ("große", 12),
    ("großen", 11),
    ("klein", 10),
    ("kleine", 10),
    ("neu", 10),
    ("neue", 11),
    ("neuen", 11),
    ("alt", 9),
    ("alte", 9),
    ("alten", 9),
    ("gut", 10),
    ("gute", 9),
    ("lang", 9),
    ("lange", 10),
    ("hoch", 9),
    ("hohe", 8),
    ("deutsch", 10),
    ("deutsche", 12),
    ("deutschen", 13),
    ("jüdisch", 9),
    ("jüdische", 11),
    ("jüdischen", 12),
    ("politisch", 9),
    ("politische", 10),
    ("politischen", 10),
    ("wichtig", 9),
    ("wichtige", 8),
    ("möglich", 9),
    ("eigene", 8),
    ("einzelne", 8),
    ("besondere", 8),
    ("öffentliche", 8),
    ("internationale", 7),
];

/// The built-in lexicon as owned pairs.
pub fn default_lexicon() -> Vec<(String, u32)> {
    DEFAULT_LEXICON
        .iter()
        .map(|&(w, f)| (w.to_string(), f))
        .collect()
}

/// Sorted set of characters appearing in the given words; a compact PHOC
/// charset for synthetic corpora.
pub fn charset_of(lexicon: &[(String, u32)]) -> String {
    let set: BTreeSet<char> = lexicon.iter().flat_map(|(w, _)| w.chars()).collect();
    set.into_iter().collect()
}

/// Parse a lexicon file: one `word<TAB>frequency` entry per line, `#` lines
/// and blank lines ignored.
pub fn load_lexicon<R: BufRead>(reader: R) -> std::io::Result<Vec<(String, u32)>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (word, freq) = match trimmed.split_once('\t') {
            Some((w, f)) => (
                w.to_string(),
                f.trim().parse::<u32>().map_err(|e| {
                    std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("bad frequency {f:?}: {e}"),
                    )
                })?,
            ),
            None => (trimmed.to_string(), 1),
        };
        if !word.is_empty() {
            out.push((word, freq));
        }
    }
    Ok(out)
}
