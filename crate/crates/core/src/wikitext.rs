//! Minimal wiki-table markup parser.
//!
//! Extracts top-level `{| ... |}` blocks whose class attribute contains
//! "wikitable". Header cells come from `!` rows, data cells from `|` rows,
//! captions from `|+`. Inline links `[[X|Y]]` reduce to Y and `[[X]]` to X;
//! templates, refs, and HTML tags are stripped. Malformed blocks
//! (unterminated, ragged rows, missing headers) are skipped with a warning
//! record rather than failing the whole input. This is deliberately not a
//! full MediaWiki implementation.

use crate::ingest::{RawTable, Warning};

/// Parse result: extracted tables plus warnings for skipped blocks.
#[derive(Debug, Clone, Default)]
pub struct WikitextParse {
    pub tables: Vec<RawTable>,
    pub warnings: Vec<Warning>,
}

/// Extracts all wikitable blocks from a markup fragment.
pub fn parse_wikitable(markup: &str) -> WikitextParse {
    let mut out = WikitextParse::default();
    let lines: Vec<&str> = markup.lines().collect();
    let mut i = 0usize;
    let mut block_index = 0usize;

    while i < lines.len() {
        let trimmed = lines[i].trim_start();
        if !trimmed.starts_with("{|") {
            i += 1;
            continue;
        }
        let block_id = format!("block{block_index}");
        block_index += 1;

        // find the matching |} tracking nesting depth
        let mut depth = 1i32;
        let mut end = None;
        for (j, line) in lines.iter().enumerate().skip(i + 1) {
            let t = line.trim_start();
            if t.starts_with("{|") {
                depth += 1;
            } else if t.starts_with("|}") {
                depth -= 1;
                if depth == 0 {
                    end = Some(j);
                    break;
                }
            }
        }
        let Some(end) = end else {
            out.warnings.push(Warning {
                table_id: block_id,
                reason: "unterminated table block".to_string(),
            });
            break;
        };

        let attrs = trimmed[2..].trim();
        let class = extract_class(attrs);
        if class.contains("wikitable") {
            match parse_block(&lines[i + 1..end], class.contains("sortable")) {
                Ok(table) => out.tables.push(table),
                Err(reason) => out.warnings.push(Warning {
                    table_id: block_id,
                    reason,
                }),
            }
        }
        i = end + 1;
    }
    out
}

fn extract_class(attrs: &str) -> String {
    for quote in ['"', '\''] {
        if let Some(start) = attrs.find("class=") {
            let rest = &attrs[start + "class=".len()..];
            if let Some(rest) = rest.strip_prefix(quote) {
                if let Some(end) = rest.find(quote) {
                    return rest[..end].to_lowercase();
                }
            }
        }
    }
    // unquoted class=foo
    if let Some(start) = attrs.find("class=") {
        let rest = &attrs[start + "class=".len()..];
        return rest
            .split_whitespace()
            .next()
            .unwrap_or("")
            .to_lowercase();
    }
    String::new()
}

fn parse_block(lines: &[&str], sortable: bool) -> Result<RawTable, String> {
    let mut caption = None;
    let mut headers: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut in_body = false;
    let mut nested = 0i32;

    let flush = |current: &mut Vec<String>, rows: &mut Vec<Vec<String>>| {
        if !current.is_empty() {
            rows.push(std::mem::take(current));
        }
    };

    for line in lines {
        let t = line.trim_start();
        // skip nested table bodies wholesale
        if t.starts_with("{|") {
            nested += 1;
            continue;
        }
        if nested > 0 {
            if t.starts_with("|}") {
                nested -= 1;
            }
            continue;
        }

        if let Some(rest) = t.strip_prefix("|+") {
            caption = Some(clean_cell(rest));
        } else if t.starts_with("|-") {
            flush(&mut current, &mut rows);
            in_body = true;
        } else if let Some(rest) = t.strip_prefix('!') {
            let cells = split_cells(rest, "!!");
            if in_body && !headers.is_empty() {
                // row-scoped header cell (e.g. a rank column)
                current.extend(cells);
            } else {
                headers.extend(cells);
            }
        } else if let Some(rest) = t.strip_prefix('|') {
            in_body = true;
            current.extend(split_cells(rest, "||"));
        }
        // bare continuation lines outside any cell marker are ignored
    }
    flush(&mut current, &mut rows);

    if headers.is_empty() {
        return Err("no header row".to_string());
    }
    for (idx, row) in rows.iter().enumerate() {
        if row.len() != headers.len() {
            return Err(format!(
                "ragged row {idx}: {} cells vs {} headers",
                row.len(),
                headers.len()
            ));
        }
    }
    Ok(RawTable {
        page_title: String::new(),
        caption,
        headers,
        rows,
        sortable,
    })
}

fn split_cells(text: &str, separator: &str) -> Vec<String> {
    text.split(separator).map(clean_cell).collect()
}

/// Normalizes one raw cell: attribute prefix, links, templates, refs, HTML
/// tags, and bold/italic markers are resolved or stripped.
fn clean_cell(raw: &str) -> String {
    let mut s = raw.trim().to_string();

    // cell attributes: `style="..." | content` — split at the first pipe
    // outside a link, when the prefix looks like attributes
    if let Some(pos) = find_attr_pipe(&s) {
        s = s[pos + 1..].trim().to_string();
    }

    s = strip_delimited(&s, "{{", "}}");
    s = strip_refs(&s);
    s = resolve_links(&s);
    s = strip_tags(&s);
    s = s.replace("'''", "").replace("''", "");
    s = s.replace("&nbsp;", " ");
    crate::text::normalize_spacing(&s)
}

fn find_attr_pipe(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut link_depth = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        if s[i..].starts_with("[[") {
            link_depth += 1;
            i += 2;
            continue;
        }
        if s[i..].starts_with("]]") {
            link_depth = link_depth.saturating_sub(1);
            i += 2;
            continue;
        }
        if bytes[i] == b'|' && link_depth == 0 {
            return if s[..i].contains('=') { Some(i) } else { None };
        }
        i += 1;
    }
    None
}

fn strip_delimited(s: &str, open: &str, close: &str) -> String {
    let mut out = s.to_string();
    while let Some(start) = out.find(open) {
        match out[start + open.len()..].find(close) {
            Some(rel) => {
                let end = start + open.len() + rel + close.len();
                out.replace_range(start..end, "");
            }
            None => break,
        }
    }
    out
}

fn strip_refs(s: &str) -> String {
    let mut out = s.to_string();
    while let Some(start) = out.find("<ref") {
        if let Some(self_close) = out[start..].find("/>") {
            let end_tag = out[start..].find("</ref>");
            if end_tag.is_none_or(|e| self_close < e) {
                out.replace_range(start..start + self_close + 2, "");
                continue;
            }
        }
        match out[start..].find("</ref>") {
            Some(rel) => out.replace_range(start..start + rel + "</ref>".len(), ""),
            None => {
                out.truncate(start);
                break;
            }
        }
    }
    out
}

fn resolve_links(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find("[[") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("]]") {
            Some(end) => {
                let inner = &after[..end];
                let text = inner.rsplit('|').next().unwrap_or(inner);
                out.push_str(text);
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                return out;
            }
        }
    }
    out.push_str(rest);
    out
}

fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for ch in s.chars() {
        match ch {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            c if !in_tag => out.push(c),
            _ => {}
        }
    }
    out
}

/// Serializes a RawTable back to markup. Round-trips with
/// [`parse_wikitable`] for plain cell content; used by fixtures and tests.
pub fn to_wikitext(table: &RawTable) -> String {
    let class = if table.sortable {
        "wikitable sortable"
    } else {
        "wikitable"
    };
    let mut out = format!("{{| class=\"{class}\"\n");
    if let Some(caption) = &table.caption {
        out.push_str(&format!("|+ {caption}\n"));
    }
    out.push_str(&format!("! {}\n", table.headers.join(" !! ")));
    for row in &table.rows {
        out.push_str("|-\n");
        out.push_str(&format!("| {}\n", row.join(" || ")));
    }
    out.push_str("|}\n");
    out
}
