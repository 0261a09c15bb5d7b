//! Chain-of-thought text handling: step segmentation, final-answer
//! extraction, and answer normalization.
//!
//! Segmentation splits on newlines and on sentence-final punctuation
//! followed by whitespace, stripping numbered-list markers ("Step 3:",
//! "3. ") from the step text. Normalization lowercases, removes spaces and
//! thousands-separator commas, strips one trailing unit token, and parses
//! integers, decimals, `a/b`, and `\frac{a}{b}` into exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use once_cell::sync::Lazy;
use regex::Regex;

/// One segmented reasoning step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    /// Step text with any list marker stripped and surrounding space trimmed.
    pub text: String,
    /// Byte range of the raw segment (marker included) in the input.
    pub span: (usize, usize),
}

/// Ordered list of segmented steps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepList {
    pub steps: Vec<Step>,
}

impl StepList {
    pub fn texts(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.text.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }
}

/// Result of scanning a generation for its final answer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnswerExtraction {
    /// Extracted answer text, if any.
    pub answer: Option<String>,
    /// True when the answer came from a `\boxed{...}`; false for the
    /// last-number-in-final-line fallback.
    pub from_box: bool,
    /// An opening `\boxed{` without a matching close was seen.
    pub unbalanced_box: bool,
}

/// An answer string in comparable form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedAnswer {
    pub raw: String,
    /// Lowercased, space/comma-free, unit-stripped form.
    pub canonical: String,
    /// Exact rational value when the canonical form is numeric.
    pub numeric: Option<BigRational>,
}

/// Unit tokens stripped from the tail of an answer.
pub const DEFAULT_UNITS: &[&str] = &[
    "dollars", "$", "%", "degrees", "cm", "m", "kg", "hours", "minutes",
];

static STEP_MARKER: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)^step\s*\d+\s*[:.)]\s*").expect("static regex"));
static NUM_MARKER: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\d+\s*[.:)]\s+").expect("static regex"));
static LAST_NUMBER: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"[-+]?\d[\d,]*(?:\.\d+)?").expect("static regex"));

/// Split raw chain-of-thought text into steps.
///
/// Boundaries are newlines and `[.?!]` followed by whitespace; a numbered
/// marker at the start of a segment is skipped before boundary scanning so
/// that "3. solve" stays one step.
pub fn segment_steps(text: &str) -> StepList {
    let bytes = text.as_bytes();
    let mut steps = Vec::new();
    let mut pos = 0;

    while pos < bytes.len() {
        // skip leading whitespace of the next segment
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            break;
        }
        let seg_start = pos;

        // a leading list marker must not trip the sentence-boundary scan
        let after_marker = marker_end(&text[seg_start..]).map(|n| seg_start + n);
        let mut cursor = after_marker.unwrap_or(seg_start);

        let mut seg_end = bytes.len();
        while cursor < bytes.len() {
            let b = bytes[cursor];
            if b == b'\n' {
                seg_end = cursor;
                break;
            }
            if matches!(b, b'.' | b'?' | b'!')
                && cursor + 1 < bytes.len()
                && bytes[cursor + 1].is_ascii_whitespace()
            {
                seg_end = cursor + 1;
                break;
            }
            if matches!(b, b'.' | b'?' | b'!') && cursor + 1 == bytes.len() {
                seg_end = cursor + 1;
                break;
            }
            cursor += 1;
        }
        if seg_end == bytes.len() && cursor >= bytes.len() {
            seg_end = bytes.len();
        }

        let raw = text[seg_start..seg_end].trim_end();
        let raw_end = seg_start + raw.len();
        if !raw.is_empty() {
            let cleaned = strip_marker(raw).trim();
            if !cleaned.is_empty() {
                steps.push(Step {
                    text: cleaned.to_string(),
                    span: (seg_start, raw_end - seg_start),
                });
            }
        }
        pos = seg_end.max(pos + 1);
    }

    StepList { steps }
}

/// Byte length of a list marker at the start of `s`, if present and
/// followed by content.
fn marker_end(s: &str) -> Option<usize> {
    let m = STEP_MARKER.find(s).or_else(|| NUM_MARKER.find(s))?;
    if s[m.end()..].trim().is_empty() {
        None
    } else {
        Some(m.end())
    }
}

fn strip_marker(s: &str) -> &str {
    match marker_end(s) {
        Some(n) => &s[n..],
        None => s,
    }
}

/// Extract the final answer from generated text.
///
/// The contents of the last balanced `\boxed{...}` win; without one, the
/// last number in the final non-empty line is used. Unbalanced boxes are
/// flagged and treated as absent.
pub fn extract_boxed_answer(text: &str) -> AnswerExtraction {
    let mut last_balanced: Option<String> = None;
    let mut unbalanced = false;

    let mut search = 0;
    while let Some(found) = text[search..].find("\\boxed") {
        let at = search + found;
        let mut i = at + "\\boxed".len();
        let bytes = text.as_bytes();
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'{' {
            match balanced_content(text, i) {
                Some((content, _end)) => last_balanced = Some(content.to_string()),
                None => unbalanced = true,
            }
        }
        search = at + "\\boxed".len();
    }

    if let Some(answer) = last_balanced {
        return AnswerExtraction {
            answer: Some(answer),
            from_box: true,
            unbalanced_box: unbalanced,
        };
    }

    // fallback: last number in the final non-empty line
    let fallback = text
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .and_then(|line| {
            LAST_NUMBER
                .find_iter(line)
                .last()
                .map(|m| m.as_str().to_string())
        });

    AnswerExtraction {
        answer: fallback,
        from_box: false,
        unbalanced_box: unbalanced,
    }
}

/// Content between the brace opening at byte `open` and its balanced close.
fn balanced_content(text: &str, open: usize) -> Option<(&str, usize)> {
    debug_assert_eq!(text.as_bytes()[open], b'{');
    let mut depth = 0usize;
    for (i, b) in text.bytes().enumerate().skip(open) {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((&text[open + 1..i], i));
                }
            }
            _ => {}
        }
    }
    None
}

/// Normalize an answer string with the default unit list.
pub fn normalize_answer(raw: &str) -> NormalizedAnswer {
    normalize_answer_with_units(raw, &[])
}

/// Normalize an answer string; `extra_units` extends [`DEFAULT_UNITS`].
pub fn normalize_answer_with_units(raw: &str, extra_units: &[String]) -> NormalizedAnswer {
    let mut s: String = raw.trim().to_lowercase();
    s.retain(|c| !c.is_whitespace());
    s = strip_digit_commas(&s);
    s = strip_unit(&s, extra_units);

    // leading '+' and trailing '.0' are dropped from numeric forms
    if let Some(rest) = s.strip_prefix('+') {
        if parse_numeric_literal(rest).is_some() {
            s = rest.to_string();
        }
    }
    if is_integer_with_zero_fraction(&s) {
        s.truncate(s.find('.').expect("checked dot"));
    }

    let numeric = parse_numeric_literal(&s);
    NormalizedAnswer {
        raw: raw.to_string(),
        canonical: s,
        numeric,
    }
}

fn strip_digit_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    for (i, &c) in chars.iter().enumerate() {
        if c == ','
            && i > 0
            && i + 1 < chars.len()
            && chars[i - 1].is_ascii_digit()
            && chars[i + 1].is_ascii_digit()
        {
            continue;
        }
        out.push(c);
    }
    out
}

fn strip_unit(s: &str, extra_units: &[String]) -> String {
    let mut units: Vec<&str> = DEFAULT_UNITS
        .iter()
        .copied()
        .chain(extra_units.iter().map(|u| u.as_str()))
        .collect();
    units.sort_by_key(|u| std::cmp::Reverse(u.len()));

    for unit in units {
        if let Some(rest) = s.strip_suffix(unit) {
            if rest.is_empty() {
                continue;
            }
            let alphabetic = unit.chars().all(|c| c.is_ascii_alphabetic());
            let prev = rest.chars().last().expect("non-empty remainder");
            if !alphabetic || prev.is_ascii_digit() || prev == '.' {
                return rest.to_string();
            }
        }
    }
    s.to_string()
}

fn is_integer_with_zero_fraction(s: &str) -> bool {
    static RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^[-+]?\d+\.0+$").expect("static regex"));
    RE.is_match(s)
}

static INT_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^[-+]?\d+$").expect("static regex"));
static DEC_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^[-+]?(\d*)\.(\d+)$").expect("static regex"));
static FRAC_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^([-+]?\d+)/(\d+)$").expect("static regex"));
static LATEX_FRAC_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^([-+])?\\frac\{([-+]?\d+)\}\{([-+]?\d+)\}$").expect("static regex"));

/// Parse a cleaned numeric literal into an exact rational.
///
/// Recognizes integers, decimals, `a/b`, and `\frac{a}{b}`; returns `None`
/// for anything else (including zero denominators).
pub fn parse_numeric_literal(s: &str) -> Option<BigRational> {
    if INT_RE.is_match(s) {
        let n: BigInt = s.parse().ok()?;
        return Some(BigRational::from_integer(n));
    }
    if let Some(c) = DEC_RE.captures(s) {
        let whole = c.get(1).map_or("", |m| m.as_str());
        let frac = c.get(2).expect("regex group").as_str();
        let negative = s.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), frac);
        let mantissa: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().ok()?
        };
        let denom = BigInt::from(10u32).pow(frac.len() as u32);
        let mut value = BigRational::new(mantissa, denom);
        if negative {
            value = -value;
        }
        return Some(value);
    }
    if let Some(c) = FRAC_RE.captures(s) {
        let num: BigInt = c[1].parse().ok()?;
        let den: BigInt = c[2].parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    if let Some(c) = LATEX_FRAC_RE.captures(s) {
        let num: BigInt = c[2].parse().ok()?;
        let den: BigInt = c[3].parse().ok()?;
        if den.is_zero() {
            return None;
        }
        let mut value = BigRational::new(num, den);
        if c.get(1).is_some_and(|m| m.as_str() == "-") {
            value = -value;
        }
        return Some(value);
    }
    None
}

impl NormalizedAnswer {
    /// Equivalence used for final-answer grading: canonical strings equal,
    /// or exact rational equality, or within 1e-6 relative distance.
    pub fn matches(&self, other: &NormalizedAnswer) -> bool {
        if self.canonical == other.canonical && !self.canonical.is_empty() {
            return true;
        }
        match (&self.numeric, &other.numeric) {
            (Some(a), Some(b)) => {
                if a == b {
                    return true;
                }
                relative_gap(a, b) <= 1e-6
            }
            _ => false,
        }
    }

    /// Relative distance |a-b| / max(1, |b|) when both sides are numeric,
    /// with `other` as the reference.
    pub fn relative_distance(&self, other: &NormalizedAnswer) -> Option<f64> {
        match (&self.numeric, &other.numeric) {
            (Some(a), Some(b)) => Some(relative_gap(a, b)),
            _ => None,
        }
    }
}

fn relative_gap(a: &BigRational, b: &BigRational) -> f64 {
    let diff = (a - b).abs();
    let scale = b.abs().max(BigRational::one());
    (diff / scale).to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_newline_delimited_sentences() {
        let s = segment_steps("Let x=2.\nThen x+1=3.");
        assert_eq!(s.texts(), vec!["Let x=2.", "Then x+1=3."]);
    }

    #[test]
    fn strips_step_markers() {
        let s = segment_steps("Step 1: define x. Step 2: solve.");
        assert_eq!(s.texts(), vec!["define x.", "solve."]);
    }

    #[test]
    fn numeric_marker_does_not_split_as_sentence() {
        let s = segment_steps("1. define x\n2. solve for x");
        assert_eq!(s.texts(), vec!["define x", "solve for x"]);
    }

    #[test]
    fn empty_text_yields_no_steps() {
        assert!(segment_steps("").is_empty());
        assert!(segment_steps("   \n\n  ").is_empty());
    }

    #[test]
    fn decimal_points_do_not_split() {
        let s = segment_steps("The rate is 2.5 per hour. Done.");
        assert_eq!(s.texts(), vec!["The rate is 2.5 per hour.", "Done."]);
    }

    #[test]
    fn spans_cover_raw_segments() {
        let text = "Step 1: define x. Step 2: solve.";
        let s = segment_steps(text);
        assert_eq!(&text[s.steps[0].span.0..s.steps[0].span.0 + s.steps[0].span.1],
            "Step 1: define x.");
        assert_eq!(&text[s.steps[1].span.0..s.steps[1].span.0 + s.steps[1].span.1],
            "Step 2: solve.");
        // ordered and non-overlapping, gaps are whitespace
        assert!(s.steps[0].span.0 + s.steps[0].span.1 <= s.steps[1].span.0);
        let gap = &text[s.steps[0].span.0 + s.steps[0].span.1..s.steps[1].span.0];
        assert!(gap.chars().all(char::is_whitespace));
    }

    #[test]
    fn extracts_last_boxed() {
        let e = extract_boxed_answer("first \\boxed{41} then so \\boxed{42}.");
        assert_eq!(e.answer.as_deref(), Some("42"));
        assert!(e.from_box);
        assert!(!e.unbalanced_box);
    }

    #[test]
    fn nested_braces_preserved() {
        let e = extract_boxed_answer("\\boxed{\\frac{1}{2}}");
        assert_eq!(e.answer.as_deref(), Some("\\frac{1}{2}"));
    }

    #[test]
    fn fallback_to_last_number_in_final_line() {
        let e = extract_boxed_answer("we compute 3 + 4\nanswer is 7");
        assert_eq!(e.answer.as_deref(), Some("7"));
        assert!(!e.from_box);
    }

    #[test]
    fn unbalanced_box_flagged_and_falls_back() {
        let e = extract_boxed_answer("\\boxed{oops\nanswer is 9");
        assert_eq!(e.answer.as_deref(), Some("9"));
        assert!(e.unbalanced_box);
        assert!(!e.from_box);
    }

    #[test]
    fn no_answer_anywhere() {
        let e = extract_boxed_answer("no numbers here");
        assert_eq!(e.answer, None);
    }

    #[test]
    fn normalizes_thousands_separators() {
        let n = normalize_answer("1,000");
        assert_eq!(n.canonical, "1000");
        assert_eq!(n.numeric, Some(BigRational::from_integer(1000.into())));
    }

    #[test]
    fn fraction_and_decimal_agree() {
        let a = normalize_answer("\\frac{1}{2}");
        let b = normalize_answer("0.5");
        assert_eq!(a.numeric, b.numeric);
        assert!(a.matches(&b));
    }

    #[test]
    fn unit_tokens_stripped() {
        assert_eq!(normalize_answer("12 dollars").canonical, "12");
        assert_eq!(normalize_answer("45 degrees").canonical, "45");
        assert_eq!(normalize_answer("30%").canonical, "30");
        // unit requires a numeric head: words keep their tail
        assert_eq!(normalize_answer("problem").canonical, "problem");
    }

    #[test]
    fn integer_cleanup() {
        assert_eq!(normalize_answer("+5").canonical, "5");
        assert_eq!(normalize_answer("12.0").canonical, "12");
        assert_eq!(normalize_answer("12.50").canonical, "12.50");
    }

    #[test]
    fn thirds_are_not_decimals() {
        let third = normalize_answer("1/3");
        let approx = normalize_answer("0.3333");
        assert!(!third.matches(&approx));
    }

    #[test]
    fn normalization_is_idempotent() {
        for raw in ["1,000", "12 dollars", "\\frac{1}{2}", "0.5", "+5", "Hello World", "3/4"] {
            let once = normalize_answer(raw);
            let twice = normalize_answer(&once.canonical);
            assert_eq!(once.canonical, twice.canonical, "raw={raw}");
            assert_eq!(once.numeric, twice.numeric, "raw={raw}");
        }
    }

    #[test]
    fn relative_distance_uses_reference_scale() {
        let a = normalize_answer("48");
        let b = normalize_answer("50");
        let d = a.relative_distance(&b).expect("both numeric");
        assert!((d - 0.04).abs() < 1e-12);
    }
}
