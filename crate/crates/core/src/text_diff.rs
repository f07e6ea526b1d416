//! Turning recognized blobs into text, and scoring OCR output against a
//! ground-truth transcription with Myers' O(ND) diff.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::Blob;

pub const DEFAULT_SPACE_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecognizedText {
    pub lines: Vec<String>,
}

impl RecognizedText {
    pub fn joined(&self) -> String {
        self.lines.join("\n")
    }
}

impl fmt::Display for RecognizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

/// Groups blobs into text lines.
///
/// Two blobs share a line when their vertical extents overlap by at least
/// half the smaller height; lines are the transitive closure of that
/// relation. Lines are ordered by mean top edge, blobs within a line by x.
pub fn order_blobs_into_lines(blobs: &[Blob]) -> Vec<Vec<Blob>> {
    let n = blobs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&blobs[i], &blobs[j]);
            let overlap = a.bottom().min(b.bottom()) as i64 - a.y.max(b.y) as i64;
            if overlap > 0 && 2 * overlap >= a.h.min(b.h) as i64 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut groups: HashMap<usize, Vec<Blob>> = HashMap::new();
    for (i, blob) in blobs.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(blob.clone());
    }
    let mut lines: Vec<Vec<Blob>> = groups.into_values().collect();
    for line in &mut lines {
        line.sort_by_key(|b| (b.x, b.y, b.id));
    }
    let mean_top = |line: &[Blob]| line.iter().map(|b| b.y as f64).sum::<f64>() / line.len() as f64;
    lines.sort_by(|a, b| {
        mean_top(a)
            .total_cmp(&mean_top(b))
            .then_with(|| (a[0].x, a[0].id).cmp(&(b[0].x, b[0].id)))
    });
    lines
}

fn median_width(lines: &[Vec<Blob>]) -> f64 {
    let mut widths: Vec<u32> = lines.iter().flatten().map(|b| b.w).collect();
    if widths.is_empty() {
        return 0.0;
    }
    widths.sort_unstable();
    let mid = widths.len() / 2;
    if widths.len() % 2 == 1 {
        widths[mid] as f64
    } else {
        (widths[mid - 1] as f64 + widths[mid] as f64) / 2.0
    }
}

/// Spells out each line from per-blob predictions.
///
/// A single space separates consecutive blobs whose horizontal gap exceeds
/// `space_factor` times the page's median blob width.
pub fn render_text(
    lines: &[Vec<Blob>],
    predictions: &HashMap<u32, char>,
    space_factor: f64,
) -> Result<RecognizedText> {
    let threshold = space_factor * median_width(lines);
    let mut out = Vec::with_capacity(lines.len());
    for line in lines {
        let mut text = String::new();
        let mut prev: Option<&Blob> = None;
        for blob in line {
            let c = *predictions.get(&blob.id).ok_or_else(|| {
                Error::InvalidArgument(format!("blob {} has no prediction", blob.id))
            })?;
            if let Some(p) = prev {
                let gap = blob.x as f64 - p.right() as f64;
                if gap > threshold {
                    text.push(' ');
                }
            }
            text.push(c);
            prev = Some(blob);
        }
        out.push(text);
    }
    Ok(RecognizedText { lines: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditKind {
    Equal,
    Delete,
    Insert,
}

/// One run of a string edit script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edit {
    Equal(String),
    Delete(String),
    Insert(String),
}

impl Edit {
    pub fn kind(&self) -> EditKind {
        match self {
            Edit::Equal(_) => EditKind::Equal,
            Edit::Delete(_) => EditKind::Delete,
            Edit::Insert(_) => EditKind::Insert,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Edit::Equal(s) | Edit::Delete(s) | Edit::Insert(s) => s,
        }
    }
}

/// Shortest edit script between two sequences, one entry per element,
/// in order.
pub fn diff_sequences<T: PartialEq>(a: &[T], b: &[T]) -> Vec<EditKind> {
    let (n, m) = (a.len() as isize, b.len() as isize);
    let max = n + m;
    let off = max + 1;
    let idx = |k: isize| (k + off) as usize;
    let mut v = vec![0isize; (2 * max + 3) as usize];
    // trace[d][k + d] = v[k] before step d, for k in -d..=d
    let mut trace: Vec<Vec<isize>> = Vec::new();

    'search: for d in 0..=max {
        trace.push((-d..=d).map(|k| v[idx(k)]).collect());
        for k in (-d..=d).step_by(2) {
            let mut x = if k == -d || (k != d && v[idx(k - 1)] < v[idx(k + 1)]) {
                v[idx(k + 1)]
            } else {
                v[idx(k - 1)] + 1
            };
            let mut y = x - k;
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[idx(k)] = x;
            if x >= n && y >= m {
                break 'search;
            }
        }
    }

    let mut ops = Vec::with_capacity((n + m) as usize);
    let (mut x, mut y) = (n, m);
    for (d, snapshot) in trace.iter().enumerate().rev() {
        let d = d as isize;
        if d == 0 {
            while x > 0 && y > 0 {
                ops.push(EditKind::Equal);
                x -= 1;
                y -= 1;
            }
            break;
        }
        let at = |k: isize| snapshot[(k + d) as usize];
        let k = x - y;
        let prev_k = if k == -d || (k != d && at(k - 1) < at(k + 1)) {
            k + 1
        } else {
            k - 1
        };
        let prev_x = at(prev_k);
        let prev_y = prev_x - prev_k;
        while x > prev_x && y > prev_y {
            ops.push(EditKind::Equal);
            x -= 1;
            y -= 1;
        }
        ops.push(if x == prev_x {
            EditKind::Insert
        } else {
            EditKind::Delete
        });
        x = prev_x;
        y = prev_y;
    }
    ops.reverse();
    ops
}

/// Character-level Myers diff, coalesced into runs.
pub fn myers_diff(a: &str, b: &str) -> Vec<Edit> {
    let ac: Vec<char> = a.chars().collect();
    let bc: Vec<char> = b.chars().collect();
    let mut script: Vec<Edit> = Vec::new();
    let (mut i, mut j) = (0, 0);
    for op in diff_sequences(&ac, &bc) {
        let c = match op {
            EditKind::Equal => {
                i += 1;
                j += 1;
                ac[i - 1]
            }
            EditKind::Delete => {
                i += 1;
                ac[i - 1]
            }
            EditKind::Insert => {
                j += 1;
                bc[j - 1]
            }
        };
        match script.last_mut() {
            Some(last) if last.kind() == op => match last {
                Edit::Equal(s) | Edit::Delete(s) | Edit::Insert(s) => s.push(c),
            },
            _ => script.push(match op {
                EditKind::Equal => Edit::Equal(c.to_string()),
                EditKind::Delete => Edit::Delete(c.to_string()),
                EditKind::Insert => Edit::Insert(c.to_string()),
            }),
        }
    }
    script
}

/// Total length of the `Equal` runs, in characters.
pub fn matched_len(script: &[Edit]) -> usize {
    script
        .iter()
        .filter_map(|e| match e {
            Edit::Equal(s) => Some(s.chars().count()),
            _ => None,
        })
        .sum()
}

/// Applies a script to `a`, checking that its `Equal`/`Delete` runs match.
pub fn apply_script(a: &str, script: &[Edit]) -> Result<String> {
    let mut rest = a;
    let mut out = String::new();
    for edit in script {
        match edit {
            Edit::Equal(s) | Edit::Delete(s) => {
                rest = rest.strip_prefix(s.as_str()).ok_or_else(|| {
                    Error::InvalidArgument(format!("script expects {s:?} in the source text"))
                })?;
                if let Edit::Equal(s) = edit {
                    out.push_str(s);
                }
            }
            Edit::Insert(s) => out.push_str(s),
        }
    }
    if !rest.is_empty() {
        return Err(Error::InvalidArgument("script leaves source text unconsumed".into()));
    }
    Ok(out)
}

/// Character and word match statistics of OCR output against an original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub chars_original: usize,
    pub chars_ocr: usize,
    pub words_original: usize,
    pub words_ocr: usize,
    pub matched_chars: usize,
    pub matched_words: usize,
    pub char_match_pct: f64,
    pub word_match_pct: f64,
    pub char_match_display: String,
    pub word_match_display: String,
}

/// `matched / total * 100` truncated (not rounded) to two decimals.
///
/// Computed on integers so e.g. 57/100 prints "57.00", not "56.99".
pub fn truncated_pct(matched: usize, total: usize) -> String {
    if total == 0 {
        return "0.00".to_string();
    }
    let hundredths = matched as u128 * 10_000 / total as u128;
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

fn pct(matched: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        matched as f64 / total as f64 * 100.0
    }
}

/// Scores `ocr` against `original`. Percentages use the original's counts as
/// denominators, so the comparison is deliberately asymmetric.
pub fn compare_texts(original: &str, ocr: &str) -> Result<DiffReport> {
    let chars_original = original.chars().count();
    if chars_original == 0 {
        return Err(Error::EmptyOriginal);
    }
    let chars_ocr = ocr.chars().count();
    let matched_chars = matched_len(&myers_diff(original, ocr));

    let words_a: Vec<&str> = original.split_whitespace().collect();
    let words_b: Vec<&str> = ocr.split_whitespace().collect();
    let matched_words = diff_sequences(&words_a, &words_b)
        .iter()
        .filter(|&&op| op == EditKind::Equal)
        .count();

    Ok(DiffReport {
        chars_original,
        chars_ocr,
        words_original: words_a.len(),
        words_ocr: words_b.len(),
        matched_chars,
        matched_words,
        char_match_pct: pct(matched_chars, chars_original),
        word_match_pct: pct(matched_words, words_a.len()),
        char_match_display: truncated_pct(matched_chars, chars_original),
        word_match_display: truncated_pct(matched_words, words_a.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lcs_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
        let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                dp[i][j] = if a[i - 1] == b[j - 1] {
                    dp[i - 1][j - 1] + 1
                } else {
                    dp[i - 1][j].max(dp[i][j - 1])
                };
            }
        }
        dp[a.len()][b.len()]
    }

    fn blob(id: u32, x: u32, y: u32, w: u32, h: u32) -> Blob {
        Blob {
            id,
            x,
            y,
            w,
            h,
            label: None,
        }
    }

    #[test]
    fn lines_single_and_same_row() {
        let lines = order_blobs_into_lines(&[blob(0, 5, 5, 10, 10)]);
        assert_eq!(lines.len(), 1);
        let lines = order_blobs_into_lines(&[blob(0, 30, 0, 20, 20), blob(1, 0, 0, 20, 20)]);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].iter().map(|b| b.id).collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn lines_disjoint_rows() {
        let lines = order_blobs_into_lines(&[blob(0, 0, 50, 10, 10), blob(1, 40, 0, 10, 10)]);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0][0].id, 1);
        assert_eq!(lines[1][0].id, 0);
    }

    #[test]
    fn lines_need_half_overlap() {
        // overlap 4 of min height 10: separate lines
        let apart = order_blobs_into_lines(&[blob(0, 0, 0, 10, 10), blob(1, 20, 6, 10, 10)]);
        assert_eq!(apart.len(), 2);
        // overlap 5: same line
        let together = order_blobs_into_lines(&[blob(0, 0, 0, 10, 10), blob(1, 20, 5, 10, 10)]);
        assert_eq!(together.len(), 1);
    }

    fn preds(pairs: &[(u32, char)]) -> HashMap<u32, char> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn spacing_rule() {
        let p = preds(&[(0, 'a'), (1, 'b')]);
        let tight = vec![vec![blob(0, 0, 0, 20, 20), blob(1, 22, 0, 20, 20)]];
        assert_eq!(render_text(&tight, &p, 0.5).unwrap().joined(), "ab");
        let loose = vec![vec![blob(0, 0, 0, 20, 20), blob(1, 35, 0, 20, 20)]];
        assert_eq!(render_text(&loose, &p, 0.5).unwrap().joined(), "a b");
        let two = vec![vec![blob(0, 0, 0, 20, 20)], vec![blob(1, 0, 40, 20, 20)]];
        assert_eq!(render_text(&two, &p, 0.5).unwrap().joined(), "a\nb");
    }

    #[test]
    fn missing_prediction_is_reported() {
        let lines = vec![vec![blob(7, 0, 0, 5, 5)]];
        assert!(render_text(&lines, &HashMap::new(), 0.5).is_err());
    }

    #[test]
    fn diff_examples() {
        assert_eq!(myers_diff("", "abc"), vec![Edit::Insert("abc".into())]);
        assert_eq!(myers_diff("abc", "abc"), vec![Edit::Equal("abc".into())]);
        assert_eq!(myers_diff("abc", ""), vec![Edit::Delete("abc".into())]);
        assert!(myers_diff("", "").is_empty());
        let script = myers_diff("abc", "axc");
        assert_eq!(matched_len(&script), 2);
        assert_eq!(lcs_oracle(b"abc", b"axc"), 2);
        assert_eq!(apply_script("abc", &script).unwrap(), "axc");
    }

    #[test]
    fn diff_classic_pair() {
        let script = myers_diff("ABCABBA", "CBABAC");
        assert_eq!(matched_len(&script), 4);
        let edits = script.iter().filter(|e| e.kind() != EditKind::Equal).map(|e| e.text().chars().count()).sum::<usize>();
        assert_eq!(edits, 5);
    }

    #[test]
    fn truncation_matches_reported_rates() {
        assert_eq!(truncated_pct(52, 61), "85.24");
        assert_eq!(truncated_pct(54, 61), "88.52");
        assert_eq!(truncated_pct(57, 100), "57.00");
        assert_eq!(truncated_pct(340, 351), "96.86");
        assert_eq!(truncated_pct(61, 61), "100.00");
    }

    #[test]
    fn identical_texts_score_full() {
        let words: Vec<String> = (0..61).map(|i| format!("w{:03}", i)).collect();
        let mut text = words.join(" ");
        // pad to 351 characters without adding words
        while text.chars().count() < 351 {
            text.push('x');
        }
        let r = compare_texts(&text, &text).unwrap();
        assert_eq!((r.matched_chars, r.matched_words), (351, 61));
        assert_eq!(r.char_match_display, "100.00");
        assert_eq!(r.word_match_display, "100.00");
    }

    #[test]
    fn compare_is_asymmetric() {
        let a = compare_texts("THE CAT", "THE CAT SAT").unwrap();
        let b = compare_texts("THE CAT SAT", "THE CAT").unwrap();
        assert_eq!(a.word_match_display, "100.00");
        assert_eq!(b.word_match_display, "66.66");
    }

    #[test]
    fn newlines_are_characters_and_whitespace() {
        let r = compare_texts("AB\nCD", "AB CD").unwrap();
        assert_eq!(r.matched_chars, 4);
        assert_eq!(r.matched_words, 2);
    }

    #[test]
    fn empty_original_rejected() {
        assert!(matches!(compare_texts("", "x"), Err(Error::EmptyOriginal)));
    }

    #[test]
    fn report_json_fields() {
        let r = compare_texts("AB", "AC").unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in [
            "chars_original",
            "chars_ocr",
            "words_original",
            "words_ocr",
            "matched_chars",
            "matched_words",
            "char_match_pct",
            "word_match_pct",
            "char_match_display",
            "word_match_display",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    proptest! {
        #[test]
        fn matched_length_is_lcs(a in "[abc]{0,12}", b in "[abc]{0,12}") {
            let script = myers_diff(&a, &b);
            let ac: Vec<char> = a.chars().collect();
            let bc: Vec<char> = b.chars().collect();
            prop_assert_eq!(matched_len(&script), lcs_oracle(&ac, &bc));
            prop_assert_eq!(apply_script(&a, &script).unwrap(), b);
        }

        #[test]
        fn self_compare_is_full(x in "[A-Z ]{0,30}[A-Z]") {
            let r = compare_texts(&x, &x).unwrap();
            prop_assert_eq!(r.char_match_display, "100.00");
            prop_assert_eq!(r.word_match_display, "100.00");
        }

        #[test]
        fn report_bounds(a in "[ab \n]{1,20}", b in "[ab \n]{0,20}") {
            let r = compare_texts(&a, &b).unwrap();
            prop_assert!(r.matched_chars <= r.chars_original.min(r.chars_ocr));
            prop_assert!(r.matched_words <= r.words_original.min(r.words_ocr));
            prop_assert!((0.0..=100.0).contains(&r.char_match_pct));
            prop_assert!((0.0..=100.0).contains(&r.word_match_pct));
        }
    }
}
