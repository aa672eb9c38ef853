//! Corpus ingestion: canonical JSON tables and minimal wiki-table markup in,
//! typed [`TableRecord`]s out.
//!
//! Only tables whose page title starts with "List of ..." are kept — those
//! titles have a simple enough structure that the subject and constraints
//! can be parsed with a preposition split alone. Columns are then typed:
//! exactly one subject column (header/title stem match, with a ranking-column
//! fallback), numeric columns (>= 80% numeric cells after unit stripping),
//! and categorical columns (everything else).

use crate::error::{Error, Result};
use crate::model::{Column, ColumnKind, TableMeta, TableRecord};
use crate::text::{normalize, stem, stem_tokens};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

/// Prepositions that split a "List of ..." title into subject and
/// constraint segments. The first "of" (the one in "List of") bounds the
/// subject; each later segment becomes a constraint.
const SPLIT_PREPOSITIONS: [&str; 5] = ["of", "in", "by", "at", "from"];

/// Leading articles dropped from subject and constraint segments.
const ARTICLES: [&str; 3] = ["the", "a", "an"];

/// An untyped table as parsed from an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTable {
    pub page_title: String,
    pub caption: Option<String>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub sortable: bool,
}

/// Subject phrase and constraints mined from a "List of ..." page title.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TitleMeta {
    pub subject_phrase: String,
    pub constraints: Vec<String>,
    /// The first "by ..." segment, when present.
    pub ranking_criterion: Option<String>,
}

/// Lowercase unit tokens recognized when deciding whether a cell is numeric.
#[derive(Debug, Clone)]
pub struct UnitsDictionary {
    tokens: BTreeSet<String>,
    max_len: usize,
}

impl UnitsDictionary {
    pub fn new<I, S>(tokens: I) -> UnitsDictionary
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens: BTreeSet<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        let max_len = tokens.iter().map(|t| t.len()).max().unwrap_or(0);
        UnitsDictionary { tokens, max_len }
    }

    /// Plain-text file, one token per line, '#' comments.
    pub fn load(path: &Path) -> Result<UnitsDictionary> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_text(&text))
    }

    pub fn from_text(text: &str) -> UnitsDictionary {
        Self::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        )
    }

    /// Built-in default covering common length/weight/currency/percent units.
    pub fn default_units() -> UnitsDictionary {
        Self::new([
            "m", "km", "cm", "mm", "mi", "ft", "yd", "in", "kg", "g", "mg", "lb", "lbs", "t",
            "st", "oz", "%", "$", "€", "£", "¥", "usd", "eur", "gbp", "km2", "km²", "m2", "m²",
            "sqmi", "ha", "mph", "km/h", "kph", "hp", "kw", "mw", "gw", "kwh", "gwh", "s", "ms",
            "min", "h", "hrs", "pts",
        ])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|s| s.as_str())
    }

    /// Longest dictionary prefix of `s`, as a byte length.
    fn prefix_len(&self, s: &str) -> usize {
        for len in (1..=self.max_len.min(s.len())).rev() {
            if s.is_char_boundary(len) && self.tokens.contains(&s[..len]) {
                return len;
            }
        }
        0
    }

    /// Longest dictionary suffix of `s`, as a byte length.
    fn suffix_len(&self, s: &str) -> usize {
        for len in (1..=self.max_len.min(s.len())).rev() {
            let split = s.len() - len;
            if s.is_char_boundary(split) && self.tokens.contains(&s[split..]) {
                return len;
            }
        }
        0
    }
}

impl Default for UnitsDictionary {
    fn default() -> Self {
        Self::default_units()
    }
}

/// Splits a "List of ..." page title into subject phrase and constraints.
/// Titles not starting with "List of" are rejected (returns None).
pub fn parse_title(title: &str) -> Option<TitleMeta> {
    let words: Vec<&str> = title.split_whitespace().collect();
    if words.len() < 3
        || !words[0].eq_ignore_ascii_case("list")
        || !words[1].eq_ignore_ascii_case("of")
    {
        return None;
    }

    let rest = &words[2..];
    let is_prep = |w: &str| SPLIT_PREPOSITIONS.iter().any(|p| w.eq_ignore_ascii_case(p));

    // segments: subject tokens, then (preposition, tokens) pairs
    let mut segments: Vec<(Option<String>, Vec<&str>)> = vec![(None, Vec::new())];
    for &word in rest {
        if is_prep(word) {
            segments.push((Some(word.to_lowercase()), Vec::new()));
        } else {
            segments.last_mut().unwrap().1.push(word);
        }
    }

    let strip_articles = |tokens: &[&str]| -> Vec<String> {
        let mut out: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
        while out
            .first()
            .map(|t| ARTICLES.iter().any(|a| t.eq_ignore_ascii_case(a)))
            .unwrap_or(false)
        {
            out.remove(0);
        }
        out
    };

    let subject_tokens = strip_articles(&segments[0].1);
    if subject_tokens.is_empty() {
        return None;
    }

    let mut constraints = Vec::new();
    let mut ranking_criterion = None;
    for (prep, tokens) in &segments[1..] {
        let tokens = strip_articles(tokens);
        if tokens.is_empty() {
            continue;
        }
        let segment = tokens.join(" ");
        if prep.as_deref() == Some("by") && ranking_criterion.is_none() {
            ranking_criterion = Some(segment.clone());
        }
        constraints.push(segment);
    }

    Some(TitleMeta {
        subject_phrase: subject_tokens.join(" "),
        constraints,
        ranking_criterion,
    })
}

/// Is a single cell numeric once unit tokens, thousands separators, bracket
/// footnotes, and range punctuation are stripped?
fn is_numeric_cell(cell: &str, units: &UnitsDictionary) -> bool {
    let mut s = cell.trim().to_lowercase();
    if s.is_empty() {
        return false;
    }
    // drop [..] footnote markers
    while let (Some(open), Some(close)) = (s.find('['), s.find(']')) {
        if close <= open {
            break;
        }
        s.replace_range(open..=close, "");
    }
    s = s.replace(',', "");
    s = s.replace(['–', '—'], "-");

    let mut residues = 0usize;
    for token in s.split_whitespace() {
        if units.contains(token) {
            continue;
        }
        let mut t = token;
        let p = units.prefix_len(t);
        t = &t[p..];
        let q = units.suffix_len(t);
        t = &t[..t.len() - q];
        if t.is_empty() {
            continue;
        }
        if !parses_as_number_or_range(t) {
            return false;
        }
        residues += 1;
    }
    residues > 0
}

fn parses_as_number(t: &str) -> bool {
    !t.is_empty() && t.parse::<f64>().is_ok()
}

fn parses_as_number_or_range(t: &str) -> bool {
    if parses_as_number(t) {
        return true;
    }
    // "2010-2015" style ranges; split on an interior dash
    if let Some(pos) = t[1..].find('-').map(|p| p + 1) {
        return parses_as_number(&t[..pos]) && parses_as_number(&t[pos + 1..]);
    }
    false
}

/// True iff at least 80% of the non-empty cells are numeric.
pub fn is_numeric_column<S: AsRef<str>>(cells: &[S], units: &UnitsDictionary) -> bool {
    let mut non_empty = 0u64;
    let mut numeric = 0u64;
    for cell in cells {
        if cell.as_ref().trim().is_empty() {
            continue;
        }
        non_empty += 1;
        if is_numeric_cell(cell.as_ref(), units) {
            numeric += 1;
        }
    }
    // integer comparison keeps the 80% boundary exact (4/5 counts)
    non_empty > 0 && 5 * numeric >= 4 * non_empty
}

fn column_cells(raw: &RawTable, col: usize) -> Vec<&str> {
    raw.rows.iter().map(|r| r[col].as_str()).collect()
}

/// Outcome of subject-column identification: the column index plus the
/// subject string to use for the table (the matched title token when a
/// header matched, the whole subject phrase otherwise).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectChoice {
    pub column: usize,
    pub subject: String,
    pub header_matched: bool,
}

/// Finds the subject column: first column whose stemmed header shares a
/// stemmed token with the subject phrase. Without a match, falls back to the
/// column right of the leftmost numeric (ranking) column, or column 0.
pub fn identify_subject_column(
    raw: &RawTable,
    meta: &TitleMeta,
    units: &UnitsDictionary,
) -> SubjectChoice {
    let subject_words: Vec<String> = meta
        .subject_phrase
        .split_whitespace()
        .map(|w| w.to_string())
        .collect();
    let subject_stems: Vec<String> = subject_words.iter().map(|w| stem(w)).collect();

    for (col, header) in raw.headers.iter().enumerate() {
        for header_token in stem_tokens(header) {
            if let Some(pos) = subject_stems.iter().position(|s| *s == header_token) {
                return SubjectChoice {
                    column: col,
                    subject: subject_words[pos].clone(),
                    header_matched: true,
                };
            }
        }
    }

    // fallback: the column to the right of the leftmost numeric rank column
    let rank_col = (0..raw.headers.len())
        .find(|&col| !raw.rows.is_empty() && is_numeric_column(&column_cells(raw, col), units));
    let column = match rank_col {
        Some(rank) if rank + 1 < raw.headers.len() => rank + 1,
        _ => 0,
    };
    SubjectChoice {
        column,
        subject: meta.subject_phrase.clone(),
        header_matched: false,
    }
}

/// A non-fatal ingestion event, reported on the warnings stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub table_id: String,
    pub reason: String,
}

/// Types one raw table into a TableRecord, or None when the page title is
/// rejected (non-"List of" pages are out of scope).
pub fn type_table(id: &str, raw: &RawTable, units: &UnitsDictionary) -> Option<TableRecord> {
    let title = if raw.page_title.trim().is_empty() {
        raw.caption.clone().unwrap_or_default()
    } else {
        raw.page_title.clone()
    };
    let meta = parse_title(&title)?;
    if raw.headers.is_empty() {
        return None;
    }

    let choice = identify_subject_column(raw, &meta, units);
    let columns: Vec<Column> = raw
        .headers
        .iter()
        .enumerate()
        .map(|(col, header)| {
            let cells: Vec<String> = raw.rows.iter().map(|r| r[col].clone()).collect();
            let kind = if col == choice.column {
                ColumnKind::Subject
            } else if !cells.is_empty() && is_numeric_column(&cells, units) {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            };
            Column {
                header: header.clone(),
                kind,
                cells,
            }
        })
        .collect();

    Some(TableRecord {
        id: id.to_string(),
        subject: choice.subject,
        subject_col: choice.column,
        columns,
        metadata: TableMeta {
            constraints: meta.constraints.iter().map(|c| normalize(c)).collect(),
            ranking_criterion: meta.ranking_criterion.as_deref().map(normalize),
            page_title: title,
        },
    })
}

/// Canonical corpus JSON entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub page_title: String,
    pub caption: Option<String>,
    pub sortable: bool,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CorpusEntry {
    pub fn to_raw(&self) -> RawTable {
        RawTable {
            page_title: self.page_title.clone(),
            caption: self.caption.clone(),
            headers: self.headers.clone(),
            rows: self.rows.clone(),
            sortable: self.sortable,
        }
    }

    pub fn from_raw(id: String, raw: &RawTable) -> CorpusEntry {
        CorpusEntry {
            id,
            page_title: raw.page_title.clone(),
            caption: raw.caption.clone(),
            sortable: raw.sortable,
            headers: raw.headers.clone(),
            rows: raw.rows.clone(),
        }
    }
}

/// Parses canonical corpus JSON and validates row arity against headers.
pub fn parse_corpus_json(text: &str, location: &str) -> Result<Vec<CorpusEntry>> {
    let entries: Vec<CorpusEntry> = serde_json::from_str(text).map_err(|e| Error::Schema {
        location: location.to_string(),
        message: e.to_string(),
    })?;
    for entry in &entries {
        for (i, row) in entry.rows.iter().enumerate() {
            if row.len() != entry.headers.len() {
                return Err(Error::Schema {
                    location: format!("{location}, table {}", entry.id),
                    message: format!(
                        "row {i} has {} cells but there are {} headers",
                        row.len(),
                        entry.headers.len()
                    ),
                });
            }
        }
    }
    Ok(entries)
}

/// Types a whole corpus, in parallel, dropping title-rejected tables. The
/// result is sorted by table id so the output is independent of scheduling.
pub fn type_corpus(entries: &[CorpusEntry], units: &UnitsDictionary) -> Vec<TableRecord> {
    let mut records: Vec<TableRecord> = entries
        .par_iter()
        .filter_map(|e| type_table(&e.id, &e.to_raw(), units))
        .collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    records
}

/// Corpus format accepted by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Json,
    Wikitext,
}

/// Loads a corpus file and returns typed records plus any non-fatal
/// warnings (wikitext blocks skipped, ...).
pub fn load_corpus(
    path: &Path,
    format: CorpusFormat,
    units: &UnitsDictionary,
) -> Result<(Vec<TableRecord>, Vec<Warning>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let location = path.display().to_string();
    let (entries, warnings) = match format {
        CorpusFormat::Json => (parse_corpus_json(&text, &location)?, Vec::new()),
        CorpusFormat::Wikitext => {
            let parsed = crate::wikitext::parse_wikitable(&text);
            let entries = parsed
                .tables
                .iter()
                .enumerate()
                .map(|(i, raw)| CorpusEntry::from_raw(wikitext_table_id(&location, raw, i), raw))
                .collect();
            (entries, parsed.warnings)
        }
    };
    Ok((type_corpus(&entries, units), warnings))
}

fn wikitext_table_id(source: &str, raw: &RawTable, index: usize) -> String {
    let base = Path::new(source)
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "wikitext".to_string());
    let title = raw
        .caption
        .as_deref()
        .filter(|c| !c.trim().is_empty())
        .unwrap_or(&raw.page_title);
    let slug: String = normalize(title)
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '-' })
        .collect();
    if slug.is_empty() {
        format!("{base}.t{index:04}")
    } else {
        format!("{base}.{slug}.t{index:04}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_title_accepts_list_of() {
        let meta = parse_title("List of Tallest Buildings in the United States").unwrap();
        assert_eq!(meta.subject_phrase, "Tallest Buildings");
        assert_eq!(meta.constraints, vec!["United States"]);
        assert_eq!(meta.ranking_criterion, None);

        let meta = parse_title("List of Universities in the United States").unwrap();
        assert_eq!(meta.subject_phrase, "Universities");
        assert_eq!(meta.constraints, vec!["United States"]);
    }

    #[test]
    fn parse_title_rejects_other_shapes() {
        assert_eq!(parse_title("Largest cities of Europe"), None);
        assert_eq!(parse_title("List of"), None);
        assert_eq!(parse_title(""), None);
        assert_eq!(parse_title("List of in the"), None);
    }

    #[test]
    fn parse_title_handles_multiple_prepositions() {
        let meta = parse_title("List of Countries by Population").unwrap();
        assert_eq!(meta.subject_phrase, "Countries");
        assert_eq!(meta.constraints, vec!["Population"]);
        assert_eq!(meta.ranking_criterion.as_deref(), Some("Population"));

        let meta = parse_title("List of Rivers of Europe by Length").unwrap();
        assert_eq!(meta.subject_phrase, "Rivers");
        assert_eq!(meta.constraints, vec!["Europe", "Length"]);
        assert_eq!(meta.ranking_criterion.as_deref(), Some("Length"));
    }

    #[test]
    fn parse_title_is_idempotent_on_subject() {
        // subject phrase of an accepted title contains no split preposition
        let meta = parse_title("List of Ministers of France in Exile").unwrap();
        for token in meta.subject_phrase.split_whitespace() {
            assert!(!SPLIT_PREPOSITIONS
                .iter()
                .any(|p| token.eq_ignore_ascii_case(p)));
        }
    }

    #[test]
    fn numeric_column_detection() {
        let units = UnitsDictionary::default_units();
        assert!(is_numeric_column(&["828m", "632m", "601m"], &units));
        assert!(!is_numeric_column(&["UAE", "China", "Saudi Arabia"], &units));
        // threshold boundary: 4 of 5 non-empty cells, exactly 80%
        assert!(is_numeric_column(&["12", "8", "n/a", "3", "7"], &units));
        // one more failure dips below the threshold
        assert!(!is_numeric_column(&["12", "8", "n/a", "n/a", "3"], &units));
        // spelled-out numbers stay non-numeric
        assert!(!is_numeric_column(&["twelve", "eight", "three"], &units));
        // years parse as plain integers
        assert!(is_numeric_column(&["1972", "1983", "2004"], &units));
        // separators, currency, footnotes, ranges
        assert!(is_numeric_column(&["6,650 km", "$1,234", "541 m[1]", "2010–2015"], &units));
        // empty cells are not counted in the denominator
        assert!(is_numeric_column(&["5", "", "7"], &units));
        assert!(!is_numeric_column(&["", ""], &units));
    }

    fn table(headers: &[&str], rows: &[&[&str]]) -> RawTable {
        RawTable {
            page_title: String::new(),
            caption: None,
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|c| c.to_string()).collect())
                .collect(),
            sortable: true,
        }
    }

    #[test]
    fn subject_column_by_header_match() {
        let units = UnitsDictionary::default_units();
        let meta = parse_title("List of Tallest Buildings").unwrap();
        let raw = table(
            &["Building", "City", "Country", "Height"],
            &[&["Burj Khalifa", "Dubai", "UAE", "828m"]],
        );
        let choice = identify_subject_column(&raw, &meta, &units);
        assert_eq!(choice.column, 0);
        assert_eq!(choice.subject, "Buildings");
        assert!(choice.header_matched);

        let meta = parse_title("List of Universities in Ohio").unwrap();
        let raw = table(&["Universities", "State"], &[&["OSU", "Ohio"]]);
        let choice = identify_subject_column(&raw, &meta, &units);
        assert_eq!(choice.column, 0);
        assert_eq!(choice.subject, "Universities");
    }

    #[test]
    fn subject_column_fallback_without_match() {
        let units = UnitsDictionary::default_units();
        let meta = parse_title("List of Tallest Buildings").unwrap();
        // "name" case: no stem match; leftmost numeric column is Height (last),
        // with nothing to its right, so the fallback is column 0
        let raw = table(
            &["Name", "City", "Height"],
            &[&["One WTC", "New York", "541m"], &["Willis Tower", "Chicago", "442m"]],
        );
        let choice = identify_subject_column(&raw, &meta, &units);
        assert_eq!(choice.column, 0);
        assert_eq!(choice.subject, "Tallest Buildings");
        assert!(!choice.header_matched);

        // rank-first layout: column right of the leftmost numeric column
        let raw = table(
            &["Rank", "Name", "Age", "Prefecture"],
            &[&["1", "A", "112", "Tokyo"], &["2", "B", "111", "Osaka"]],
        );
        let meta = parse_title("List of Oldest People in Japan").unwrap();
        let choice = identify_subject_column(&raw, &meta, &units);
        assert_eq!(choice.column, 1);
        assert_eq!(choice.subject, "Oldest People");
    }

    #[test]
    fn type_table_partitions_columns() {
        let units = UnitsDictionary::default_units();
        let mut raw = table(
            &["Building", "City", "Country", "Height"],
            &[
                &["Burj Khalifa", "Dubai", "UAE", "828m"],
                &["Shanghai Tower", "Shanghai", "China", "632m"],
                &["Abraj Al-Bait Clock Tower", "Mecca", "Saudi Arabia", "601m"],
            ],
        );
        raw.page_title = "List of Tallest Buildings".to_string();
        let record = type_table("t1", &raw, &units).unwrap();
        assert_eq!(record.subject, "Buildings");
        assert_eq!(record.subject_col, 0);
        let kinds: Vec<ColumnKind> = record.columns.iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ColumnKind::Subject,
                ColumnKind::Categorical,
                ColumnKind::Categorical,
                ColumnKind::Numeric
            ]
        );
        // exactly one subject column
        assert_eq!(
            record
                .columns
                .iter()
                .filter(|c| c.kind == ColumnKind::Subject)
                .count(),
            1
        );
        assert_eq!(record.metadata.constraints, Vec::<String>::new());
    }

    #[test]
    fn type_table_rejecting_title_drops_table() {
        let units = UnitsDictionary::default_units();
        let mut raw = table(&["City", "Country"], &[&["Paris", "France"]]);
        raw.page_title = "Largest cities of Europe".to_string();
        assert!(type_table("t1", &raw, &units).is_none());
    }

    #[test]
    fn type_table_spelled_out_numbers_stay_categorical() {
        let units = UnitsDictionary::default_units();
        let mut raw = table(
            &["Name", "Age", "Country"],
            &[
                &["A", "one hundred twelve", "France"],
                &["B", "one hundred eleven", "Japan"],
            ],
        );
        raw.page_title = "List of Oldest People".to_string();
        let record = type_table("t1", &raw, &units).unwrap();
        let age = record.columns.iter().find(|c| c.header == "Age").unwrap();
        assert_eq!(age.kind, ColumnKind::Categorical);
    }

    #[test]
    fn caption_stands_in_for_missing_page_title() {
        let units = UnitsDictionary::default_units();
        let mut raw = table(&["Building", "Height"], &[&["One WTC", "541m"]]);
        raw.caption = Some("List of Tallest Buildings in the United States".to_string());
        let record = type_table("t1", &raw, &units).unwrap();
        assert_eq!(record.metadata.constraints, vec!["united states"]);

        // page title wins when both are present
        raw.page_title = "List of Tallest Buildings in China".to_string();
        let record = type_table("t1", &raw, &units).unwrap();
        assert_eq!(record.metadata.constraints, vec!["china"]);
    }

    #[test]
    fn corpus_json_schema_validation() {
        let good = r#"[{"id":"a","page_title":"List of X in Y","caption":null,"sortable":true,"headers":["H"],"rows":[["v"]]}]"#;
        assert_eq!(parse_corpus_json(good, "test").unwrap().len(), 1);

        let ragged = r#"[{"id":"a","page_title":"t","caption":null,"sortable":true,"headers":["H"],"rows":[["v","w"]]}]"#;
        assert!(matches!(
            parse_corpus_json(ragged, "test"),
            Err(Error::Schema { .. })
        ));

        assert!(parse_corpus_json("not json", "test").is_err());
    }

    #[test]
    fn empty_corpus_loads_empty() {
        let units = UnitsDictionary::default_units();
        let records = type_corpus(&[], &units);
        assert!(records.is_empty());
    }
}
