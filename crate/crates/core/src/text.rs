//! String normalization, tokenizing, and the fixed suffix-stripping stemmer.
//!
//! Every value, constraint, and subject comparison in the pipeline goes
//! through [`normalize`] so that wiki cells that differ only in casing or
//! spacing collapse to one canonical form. Matching of subjects additionally
//! goes through [`stem`] (plural stripping only; headers and title nouns are
//! simple enough that a full morphological analyzer would buy nothing and
//! cost determinism).

/// Canonical form: trimmed, internal whitespace runs collapsed to one space,
/// case-folded.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.trim().chars() {
        if ch.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        for lower in ch.to_lowercase() {
            out.push(lower);
        }
    }
    out
}

/// Trim and collapse whitespace runs, keeping the original case. Used for
/// display strings (cells, headers) where casing matters.
pub fn normalize_spacing(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercased alphanumeric tokens, in order.
pub fn tokenize(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Fixed suffix-stripping stemmer: plural "-ies" / "-es" / "-s" rules only.
///
/// "universities" -> "university", "buildings" -> "building",
/// "boxes" -> "box". Words of length 3 or less are left alone.
pub fn stem(token: &str) -> String {
    let t = token.to_lowercase();
    let n = t.len();
    if n > 4 && t.ends_with("ies") {
        return format!("{}y", &t[..n - 3]);
    }
    if n > 3 && (t.ends_with("ses") || t.ends_with("xes") || t.ends_with("zes"))
        || n > 4 && (t.ends_with("ches") || t.ends_with("shes"))
    {
        return t[..n - 2].to_string();
    }
    if n > 3 && t.ends_with('s') && !t.ends_with("ss") {
        return t[..n - 1].to_string();
    }
    t
}

/// Stemmed token set of a phrase.
pub fn stem_tokens(phrase: &str) -> Vec<String> {
    tokenize(phrase).iter().map(|t| stem(t)).collect()
}

/// Last whitespace token of the normalized phrase — the head noun under the
/// head-final heuristic ("Tallest Buildings" -> "buildings").
pub fn head_noun(phrase: &str) -> String {
    let norm = normalize(phrase);
    norm.rsplit(' ').next().unwrap_or_default().to_string()
}

/// Stem of the head noun; the key used for subject equality.
pub fn subject_stem(phrase: &str) -> String {
    stem(&head_noun(phrase))
}
