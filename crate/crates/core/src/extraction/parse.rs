//! Parsing of the numbered five-section feature response.
//!
//! A section starts at a header line such as `2. Keywords:`, `**Thesis:**`
//! or `### 4. Key concepts`. Numbered headers must carry the section's own
//! ordinal (1 summary, 2 keywords, 3 questions, 4 concepts, 5 thesis), and
//! each section is recognized once, so numbered list items inside a section
//! are not mistaken for headers. Text before the first header is ignored.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Section {
    Summary,
    Keywords,
    Questions,
    KeyConcepts,
    Thesis,
}

impl Section {
    pub const ALL: [Section; 5] =
        [Section::Summary, Section::Keywords, Section::Questions, Section::KeyConcepts, Section::Thesis];

    fn ordinal(self) -> u32 {
        self as u32 + 1
    }

    fn label_key(self) -> &'static str {
        match self {
            Section::Summary => "summary",
            Section::Keywords => "keyword",
            Section::Questions => "question",
            Section::KeyConcepts => "concept",
            Section::Thesis => "thesis",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Section::Summary => "summary",
            Section::Keywords => "keywords",
            Section::Questions => "questions",
            Section::KeyConcepts => "key_concepts",
            Section::Thesis => "thesis",
        }
    }

    /// Nominal item count and tolerated range for list sections.
    fn count_bounds(self) -> Option<(usize, usize, usize)> {
        match self {
            Section::Keywords => Some((10, 1, 20)),
            Section::Questions => Some((5, 1, 10)),
            Section::KeyConcepts => Some((5, 1, 10)),
            _ => None,
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("empty response")]
    Empty,
    #[error("missing section {0}")]
    MissingSection(Section),
    #[error("section {section} has {count} items, outside {min}..={max}")]
    Count { section: Section, count: usize, min: usize, max: usize },
    #[error("expected 3 queries, found {0}")]
    TooFewQueries(usize),
}

/// The five fields read from a feature response.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedFeatures {
    pub summary: String,
    pub keywords: Vec<String>,
    pub questions: Vec<String>,
    pub key_concepts: Vec<String>,
    pub thesis: String,
    /// Count deviations from the nominal 10 / 5 / 5.
    pub warnings: Vec<String>,
}

fn strip_decoration(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || c == '*' || c == '_' || c == '#')
}

/// Splits a leading `3.`, `3)` or `(3)` marker off `s`.
fn split_number(s: &str) -> (Option<u32>, &str) {
    let body = s.strip_prefix('(').unwrap_or(s);
    let digits = body.len() - body.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 || digits > 3 {
        return (None, s);
    }
    let rest = &body[digits..];
    let Some(after) = rest.strip_prefix(['.', ')', ':']) else {
        return (None, s);
    };
    if !after.is_empty() && !after.starts_with(char::is_whitespace) && !after.starts_with(['*', '_']) {
        return (None, s);
    }
    (body[..digits].parse().ok(), after)
}

/// Recognizes a header line, returning its section and any inline content.
fn header(line: &str, seen: &[Section]) -> Option<(Section, String)> {
    let s = line.trim().trim_start_matches(|c: char| c == '#' || c == '*' || c.is_whitespace());
    let (number, s) = split_number(s);
    let s = s.trim_start_matches(|c: char| c == '*' || c == '_' || c.is_whitespace());
    let (label, inline, has_colon) = match s.find(':') {
        Some(i) => (strip_decoration(&s[..i]), strip_decoration(&s[i + 1..]), true),
        None => (strip_decoration(s), "", false),
    };
    let bullet = line.trim_start().starts_with(['-', '•', '+']);
    if bullet && !has_colon {
        return None;
    }
    let lower = label.to_lowercase();
    let words = lower.split_whitespace().count();
    if words == 0 || words > if has_colon { 6 } else { 3 } {
        return None;
    }
    // keys match at the start of a word, so "tomosynthesis" is not a header
    let section = lower
        .split(|c: char| !c.is_alphanumeric())
        .find_map(|word| Section::ALL.into_iter().find(|sec| word.starts_with(sec.label_key())))?;
    if seen.contains(&section) {
        return None;
    }
    match number {
        Some(n) if n != section.ordinal() => return None,
        None if !has_colon && words > 2 => return None,
        _ => {}
    }
    Some((section, inline.to_string()))
}

/// Removes a bullet or number marker and surrounding quotes from a list item.
pub(crate) fn clean_item(line: &str) -> String {
    let s = line.trim();
    let s = s.strip_prefix(|c: char| matches!(c, '-' | '*' | '•' | '+' | '–')).unwrap_or(s).trim_start();
    let (_, s) = split_number(s);
    let s = strip_decoration(s);
    let s = s.trim_end_matches([',', ';']);
    let s = strip_quotes(s);
    s.to_string()
}

pub(crate) fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    for (open, close) in [('"', '"'), ('\'', '\''), ('“', '”'), ('`', '`')] {
        if s.len() >= open.len_utf8() + close.len_utf8() && s.starts_with(open) && s.ends_with(close) {
            return s[open.len_utf8()..s.len() - close.len_utf8()].trim();
        }
    }
    s
}

fn list_items(lines: &[String], comma_fallback: bool) -> Vec<String> {
    let mut items: Vec<String> = lines.iter().map(|l| clean_item(l)).filter(|l| !l.is_empty()).collect();
    if comma_fallback && items.len() == 1 && items[0].contains([',', ';']) {
        items =
            items[0].split([',', ';']).map(|p| strip_quotes(p.trim()).to_string()).filter(|p| !p.is_empty()).collect();
    }
    items
}

fn prose(lines: &[String]) -> String {
    lines.join("\n").trim().to_string()
}

/// Parses a five-section feature response. Item counts outside the
/// tolerated ranges are errors; deviations from the nominal counts inside
/// them become warnings, or errors when `strict` is set.
pub fn parse_feature_response_with(raw: &str, strict: bool) -> Result<ParsedFeatures, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut seen: Vec<Section> = Vec::new();
    let mut bodies: Vec<Vec<String>> = vec![Vec::new(); 5];
    let mut current: Option<Section> = None;
    for line in raw.lines() {
        if let Some((section, inline)) = header(line, &seen) {
            seen.push(section);
            current = Some(section);
            if !inline.is_empty() {
                bodies[section as usize].push(inline);
            }
            continue;
        }
        if let Some(section) = current {
            bodies[section as usize].push(line.to_string());
        }
    }

    let mut out = ParsedFeatures::default();
    for section in Section::ALL {
        let body = &bodies[section as usize];
        match section {
            Section::Summary => out.summary = prose(body),
            Section::Thesis => out.thesis = prose(body),
            Section::Keywords => out.keywords = list_items(body, true),
            Section::Questions => out.questions = list_items(body, false),
            Section::KeyConcepts => out.key_concepts = list_items(body, true),
        }
    }
    for section in Section::ALL {
        let empty = match section {
            Section::Summary => out.summary.is_empty(),
            Section::Thesis => out.thesis.is_empty(),
            Section::Keywords => out.keywords.is_empty(),
            Section::Questions => out.questions.is_empty(),
            Section::KeyConcepts => out.key_concepts.is_empty(),
        };
        if empty {
            return Err(ParseError::MissingSection(section));
        }
    }
    for (section, count) in [
        (Section::Keywords, out.keywords.len()),
        (Section::Questions, out.questions.len()),
        (Section::KeyConcepts, out.key_concepts.len()),
    ] {
        let (nominal, min, max) = section.count_bounds().expect("list section");
        if count == nominal {
            continue;
        }
        if strict || count < min || count > max {
            let (min, max) = if strict { (nominal, nominal) } else { (min, max) };
            return Err(ParseError::Count { section, count, min, max });
        }
        out.warnings.push(format!("{section}: expected {nominal} items, got {count}"));
    }
    Ok(out)
}

/// [`parse_feature_response_with`] in tolerant mode.
pub fn parse_feature_response(raw: &str) -> Result<ParsedFeatures, ParseError> {
    parse_feature_response_with(raw, false)
}

/// Reads the first three queries from a query-match response.
pub fn parse_query_matches(raw: &str) -> Result<[String; 3], ParseError> {
    let queries: Vec<String> = raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.ends_with(':'))
        .map(clean_item)
        .filter(|l| !l.is_empty())
        .take(3)
        .collect();
    let n = queries.len();
    queries.try_into().map_err(|_| ParseError::TooFewQueries(n))
}
