//! Word-level error rate, text normalization, corpus pooling, and
//! controlled hypothesis corruption.
//!
//! WER is reported on a 0–100 scale: `100 * (S + D + I) / N` where `N` is
//! the reference word count. Corpus WER pools edits and words across
//! utterances (`100 * sum(edits) / sum(words)`), it is never averaged per
//! utterance.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WerError {
    /// Corpus pooling over a collection where no pair has reference words.
    #[error("no measurable reference words in corpus ({pairs} pairs, all empty or flagged)")]
    EmptyCorpus { pairs: usize },
    #[error("corruption target {target} outside [0, 100]")]
    TargetOutOfRange { target: f64 },
    #[error("corruption requires a non-empty reference")]
    EmptyReference,
}

/// Text normalization applied before word-level comparison.
///
/// The default case-folds, strips punctuation (anything neither
/// alphanumeric nor whitespace), and tokenizes on whitespace. Every WER in
/// this workspace is computed under one pinned policy so results are
/// reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub case_fold: bool,
    pub strip_punctuation: bool,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        NormalizationPolicy {
            case_fold: true,
            strip_punctuation: true,
        }
    }
}

/// Normalizes raw text into a word sequence under `policy`.
///
/// Deterministic, idempotent, and total: empty input yields an empty
/// sequence, and no produced word is the empty string.
pub fn normalize_text(raw: &str, policy: &NormalizationPolicy) -> Vec<String> {
    let mut text = String::with_capacity(raw.len());
    for ch in raw.chars() {
        if policy.strip_punctuation && !(ch.is_alphanumeric() || ch.is_whitespace()) {
            continue;
        }
        if policy.case_fold {
            text.extend(ch.to_lowercase());
        } else {
            text.push(ch);
        }
    }
    text.split_whitespace().map(|w| w.to_string()).collect()
}

/// A normalized reference/hypothesis word-sequence pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptPair {
    pub reference: Vec<String>,
    pub hypothesis: Vec<String>,
}

impl TranscriptPair {
    /// Builds a pair from already-normalized word sequences.
    pub fn new(reference: Vec<String>, hypothesis: Vec<String>) -> Self {
        TranscriptPair {
            reference,
            hypothesis,
        }
    }

    /// Normalizes raw strings under `policy` and builds the pair.
    pub fn from_raw(reference: &str, hypothesis: &str, policy: &NormalizationPolicy) -> Self {
        TranscriptPair {
            reference: normalize_text(reference, policy),
            hypothesis: normalize_text(hypothesis, policy),
        }
    }
}

/// Per-utterance edit counts from a minimal word-level alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_words: usize,
}

impl WerBreakdown {
    pub fn edits(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// WER on the 0–100 scale, or `None` for the undefined-denominator
    /// case (empty reference, non-empty hypothesis). Flagged utterances
    /// are excluded from corpus pooling.
    pub fn wer(&self) -> Option<f64> {
        if self.reference_words == 0 {
            if self.edits() == 0 {
                Some(0.0)
            } else {
                None
            }
        } else {
            Some(100.0 * self.edits() as f64 / self.reference_words as f64)
        }
    }

    /// True when the reference was empty but the hypothesis was not.
    pub fn is_undefined(&self) -> bool {
        self.reference_words == 0 && self.edits() > 0
    }
}

/// Computes the minimal-edit alignment between reference and hypothesis.
///
/// Ties are broken deterministically, preferring a substitution over an
/// insertion+deletion pair, then deletion over insertion. An empty
/// reference against a non-empty hypothesis counts every hypothesis word
/// as an insertion; the breakdown is then flagged (`is_undefined`).
pub fn wer(pair: &TranscriptPair) -> WerBreakdown {
    let r = &pair.reference;
    let h = &pair.hypothesis;
    let n = r.len();
    let m = h.len();

    // dp[i][j]: minimal edits aligning r[..i] with h[..j].
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        dp[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub_cost = if r[i - 1] == h[j - 1] { 0 } else { 1 };
            let diag = dp[i - 1][j - 1] + sub_cost;
            let del = dp[i - 1][j] + 1;
            let ins = dp[i][j - 1] + 1;
            dp[i][j] = diag.min(del).min(ins);
        }
    }

    // Trace back, preferring diagonal moves on ties.
    let (mut i, mut j) = (n, m);
    let mut out = WerBreakdown {
        reference_words: n,
        ..WerBreakdown::default()
    };
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub_cost = if r[i - 1] == h[j - 1] { 0 } else { 1 };
            if dp[i][j] == dp[i - 1][j - 1] + sub_cost {
                out.substitutions += sub_cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[i][j] == dp[i - 1][j] + 1 {
            out.deletions += 1;
            i -= 1;
        } else {
            out.insertions += 1;
            j -= 1;
        }
    }
    out
}

/// Pools a collection of breakdowns into a corpus WER.
///
/// Flagged (undefined-denominator) breakdowns are excluded. Errors when no
/// remaining pair has reference words, i.e. there is nothing to measure.
pub fn corpus_wer(pairs: &[WerBreakdown]) -> Result<f64, WerError> {
    let mut edits = 0usize;
    let mut words = 0usize;
    for b in pairs.iter().filter(|b| !b.is_undefined()) {
        edits += b.edits();
        words += b.reference_words;
    }
    if words == 0 {
        return Err(WerError::EmptyCorpus { pairs: pairs.len() });
    }
    Ok(100.0 * edits as f64 / words as f64)
}

/// Outcome of [`corrupt_to_target`]: the hypothesis plus the requested and
/// achieved edit counts, so callers can detect target deviation.
#[derive(Debug, Clone)]
pub struct Corruption {
    pub hypothesis: Vec<String>,
    pub requested_edits: usize,
    pub achieved_edits: usize,
}

impl Corruption {
    /// Absolute deviation from the requested edit count.
    pub fn deviation(&self) -> usize {
        self.requested_edits.abs_diff(self.achieved_edits)
    }
}

/// Corrupts `reference` so the result measures close to `target_wer`.
///
/// The edit budget is `round(target_wer * N / 100)`, spent on
/// substitutions, deletions, and insertions with equal probability.
/// Inserted and substituted words are synthetic tokens absent from the
/// reference vocabulary, which keeps edits from cancelling each other in
/// the alignment. The construction is verified with [`wer`]; if op
/// interactions leave the measurement more than one edit off target, it
/// falls back to pure substitutions, which are exact. Deterministic given
/// `seed`.
pub fn corrupt_to_target(
    reference: &[String],
    target_wer: f64,
    seed: u64,
) -> Result<Corruption, WerError> {
    if !(0.0..=100.0).contains(&target_wer) || !target_wer.is_finite() {
        return Err(WerError::TargetOutOfRange { target: target_wer });
    }
    if reference.is_empty() {
        return Err(WerError::EmptyReference);
    }

    let n = reference.len();
    let budget = (target_wer * n as f64 / 100.0).round() as usize;
    if budget == 0 {
        return Ok(Corruption {
            hypothesis: reference.to_vec(),
            requested_edits: 0,
            achieved_edits: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut junk = JunkWords::new(reference);

    // Pick distinct reference positions to substitute or delete, and gaps
    // to insert junk after. Insertions may repeat a gap.
    let mut ops: Vec<Op> = Vec::with_capacity(budget);
    let mut free: Vec<usize> = (0..n).collect();
    for _ in 0..budget {
        let kind = rng.random_range(0..3u8);
        let op = match kind {
            0 | 1 if !free.is_empty() => {
                let pos = free.swap_remove(rng.random_range(0..free.len()));
                if kind == 0 {
                    Op::Substitute(pos)
                } else {
                    Op::Delete(pos)
                }
            }
            _ => Op::InsertAfter(rng.random_range(0..=n)),
        };
        ops.push(op);
    }

    let hypothesis = apply_ops(reference, &ops, &mut junk);
    let achieved = wer(&TranscriptPair::new(reference.to_vec(), hypothesis.clone())).edits();
    if achieved.abs_diff(budget) <= 1 {
        return Ok(Corruption {
            hypothesis,
            requested_edits: budget,
            achieved_edits: achieved,
        });
    }

    // Fallback: substituting `budget` distinct positions with junk yields
    // exactly `budget` edits (budget <= N always holds for targets <= 100).
    let mut subs: Vec<usize> = rand::seq::index::sample(&mut rng, n, budget.min(n)).into_vec();
    subs.sort_unstable();
    let ops: Vec<Op> = subs.into_iter().map(Op::Substitute).collect();
    let hypothesis = apply_ops(reference, &ops, &mut junk);
    let achieved = wer(&TranscriptPair::new(reference.to_vec(), hypothesis.clone())).edits();
    Ok(Corruption {
        hypothesis,
        requested_edits: budget,
        achieved_edits: achieved,
    })
}

enum Op {
    Substitute(usize),
    Delete(usize),
    InsertAfter(usize),
}

fn apply_ops(reference: &[String], ops: &[Op], junk: &mut JunkWords) -> Vec<String> {
    let n = reference.len();
    let mut replaced: Vec<Option<Option<String>>> = vec![None; n]; // None = keep
    let mut inserts: Vec<Vec<String>> = vec![Vec::new(); n + 1];
    for op in ops {
        match op {
            Op::Substitute(p) => replaced[*p] = Some(Some(junk.next())),
            Op::Delete(p) => replaced[*p] = Some(None),
            Op::InsertAfter(g) => inserts[*g].push(junk.next()),
        }
    }
    let mut out = Vec::with_capacity(n + ops.len());
    out.extend(inserts[0].iter().cloned());
    for (i, word) in reference.iter().enumerate() {
        match &replaced[i] {
            None => out.push(word.clone()),
            Some(Some(sub)) => out.push(sub.clone()),
            Some(None) => {}
        }
        out.extend(inserts[i + 1].iter().cloned());
    }
    out
}

/// Generator of synthetic tokens guaranteed absent from the reference.
struct JunkWords {
    forbidden: Vec<String>,
    counter: usize,
}

impl JunkWords {
    fn new(reference: &[String]) -> Self {
        JunkWords {
            forbidden: reference.to_vec(),
            counter: 0,
        }
    }

    fn next(&mut self) -> String {
        loop {
            let w = format!("zz{}", self.counter);
            self.counter += 1;
            if !self.forbidden.iter().any(|f| f == &w) {
                return w;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(|w| w.to_string()).collect()
    }

    /// Plain two-row distance DP, independent of the traceback path the
    /// implementation uses.
    fn oracle_distance(r: &[String], h: &[String]) -> usize {
        let mut prev: Vec<usize> = (0..=h.len()).collect();
        let mut curr = vec![0usize; h.len() + 1];
        for i in 1..=r.len() {
            curr[0] = i;
            for j in 1..=h.len() {
                let cost = usize::from(r[i - 1] != h[j - 1]);
                curr[j] = (prev[j - 1] + cost).min(prev[j] + 1).min(curr[j - 1] + 1);
            }
            core::mem::swap(&mut prev, &mut curr);
        }
        prev[h.len()]
    }

    #[test]
    fn normalize_folds_case_and_strips_punctuation() {
        let policy = NormalizationPolicy::default();
        assert_eq!(normalize_text("Hello, World!", &policy), words("hello world"));
        assert_eq!(normalize_text("", &policy), Vec::<String>::new());
        assert_eq!(normalize_text("a  b\tc", &policy), words("a b c"));
    }

    #[test]
    fn normalize_respects_disabled_policy_knobs() {
        let keep = NormalizationPolicy {
            case_fold: false,
            strip_punctuation: false,
        };
        assert_eq!(normalize_text("Hello, World!", &keep), words("Hello, World!"));
    }

    #[test]
    fn wer_identity_is_zero() {
        let b = wer(&TranscriptPair::new(words("a b c"), words("a b c")));
        assert_eq!(b.edits(), 0);
        assert_eq!(b.wer(), Some(0.0));
    }

    #[test]
    fn wer_all_deletions() {
        let b = wer(&TranscriptPair::new(words("hello world"), vec![]));
        assert_eq!(b.deletions, 2);
        assert_eq!(b.wer(), Some(100.0));
    }

    #[test]
    fn wer_single_substitution() {
        // Full 3x3 edit lattice: one mismatch in the middle.
        let b = wer(&TranscriptPair::new(words("a b c"), words("a x c")));
        assert_eq!(b.substitutions, 1);
        assert_eq!(b.deletions, 0);
        assert_eq!(b.insertions, 0);
        let w = b.wer().unwrap();
        assert!((w - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn wer_prefers_substitution_over_insert_delete() {
        let b = wer(&TranscriptPair::new(words("a"), words("b")));
        assert_eq!(b.substitutions, 1);
        assert_eq!(b.deletions, 0);
        assert_eq!(b.insertions, 0);
    }

    #[test]
    fn wer_empty_reference_is_flagged() {
        let b = wer(&TranscriptPair::new(vec![], words("some text")));
        assert_eq!(b.insertions, 2);
        assert_eq!(b.wer(), None);
        assert!(b.is_undefined());

        let empty = wer(&TranscriptPair::new(vec![], vec![]));
        assert_eq!(empty.wer(), Some(0.0));
        assert!(!empty.is_undefined());
    }

    #[test]
    fn corpus_wer_pools_edits_over_words() {
        let a = wer(&TranscriptPair::new(words("a b"), words("a x")));
        let b = wer(&TranscriptPair::new(words("c d"), words("c d")));
        assert_eq!(corpus_wer(&[a, b]).unwrap(), 25.0);

        let c = WerBreakdown {
            substitutions: 3,
            reference_words: 10,
            ..WerBreakdown::default()
        };
        let d = WerBreakdown {
            reference_words: 90,
            ..WerBreakdown::default()
        };
        assert_eq!(corpus_wer(&[c, d]).unwrap(), 3.0);
    }

    #[test]
    fn corpus_wer_excludes_flagged_and_errors_when_empty() {
        let flagged = wer(&TranscriptPair::new(vec![], words("x")));
        assert!(matches!(
            corpus_wer(&[flagged]),
            Err(WerError::EmptyCorpus { pairs: 1 })
        ));

        let real = wer(&TranscriptPair::new(words("a b c"), words("a x c")));
        let pooled = corpus_wer(&[flagged, real]).unwrap();
        assert!((pooled - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn corrupt_target_zero_returns_reference() {
        let r = words("a b c d");
        let c = corrupt_to_target(&r, 0.0, 7).unwrap();
        assert_eq!(c.hypothesis, r);
        assert_eq!(c.achieved_edits, 0);
    }

    #[test]
    fn corrupt_single_word_full_target() {
        let r = words("only");
        let c = corrupt_to_target(&r, 100.0, 3).unwrap();
        let b = wer(&TranscriptPair::new(r, c.hypothesis.clone()));
        assert_eq!(b.wer(), Some(100.0));
        assert_eq!(c.achieved_edits, 1);
    }

    #[test]
    fn corrupt_lands_near_target_on_long_reference() {
        let r: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
        let c = corrupt_to_target(&r, 10.0, 7).unwrap();
        let measured = wer(&TranscriptPair::new(r, c.hypothesis.clone()))
            .wer()
            .unwrap();
        assert!((9.0..=11.0).contains(&measured), "measured {measured}");
    }

    #[test]
    fn corrupt_rejects_bad_inputs() {
        let r = words("a");
        assert!(matches!(
            corrupt_to_target(&r, 101.0, 0),
            Err(WerError::TargetOutOfRange { .. })
        ));
        assert!(matches!(
            corrupt_to_target(&[], 10.0, 0),
            Err(WerError::EmptyReference)
        ));
    }

    #[test]
    fn corrupt_is_deterministic() {
        let r: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
        let a = corrupt_to_target(&r, 25.0, 42).unwrap();
        let b = corrupt_to_target(&r, 25.0, 42).unwrap();
        assert_eq!(a.hypothesis, b.hypothesis);
        let c = corrupt_to_target(&r, 25.0, 43).unwrap();
        assert_ne!(a.hypothesis, c.hypothesis);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in "\\PC{0,60}") {
            let policy = NormalizationPolicy::default();
            let once = normalize_text(&raw, &policy);
            let again = normalize_text(&once.join(" "), &policy);
            prop_assert_eq!(once, again);
        }

        #[test]
        fn wer_matches_distance_oracle(
            r in proptest::collection::vec(0..5u8, 0..=8),
            h in proptest::collection::vec(0..5u8, 0..=8),
        ) {
            let r: Vec<String> = r.iter().map(|w| format!("w{w}")).collect();
            let h: Vec<String> = h.iter().map(|w| format!("w{w}")).collect();
            let b = wer(&TranscriptPair::new(r.clone(), h.clone()));
            prop_assert_eq!(b.edits(), oracle_distance(&r, &h));
        }

        #[test]
        fn wer_swap_exchanges_deletions_and_insertions(
            r in proptest::collection::vec(0..5u8, 0..=8),
            h in proptest::collection::vec(0..5u8, 0..=8),
        ) {
            let r: Vec<String> = r.iter().map(|w| format!("w{w}")).collect();
            let h: Vec<String> = h.iter().map(|w| format!("w{w}")).collect();
            let fwd = wer(&TranscriptPair::new(r.clone(), h.clone()));
            let rev = wer(&TranscriptPair::new(h, r));
            prop_assert_eq!(fwd.substitutions, rev.substitutions);
            prop_assert_eq!(fwd.deletions, rev.insertions);
            prop_assert_eq!(fwd.insertions, rev.deletions);
            prop_assert_eq!(fwd.edits(), rev.edits());
        }

        #[test]
        fn corpus_wer_of_singleton_equals_pair_wer(
            r in proptest::collection::vec(0..5u8, 1..=8),
            h in proptest::collection::vec(0..5u8, 0..=8),
        ) {
            let r: Vec<String> = r.iter().map(|w| format!("w{w}")).collect();
            let h: Vec<String> = h.iter().map(|w| format!("w{w}")).collect();
            let b = wer(&TranscriptPair::new(r, h));
            prop_assert_eq!(corpus_wer(&[b]).unwrap(), b.wer().unwrap());
        }

        #[test]
        fn corrupt_lands_within_one_edit(
            n in 20usize..120,
            target in 0.0f64..100.0,
            seed in 0u64..1000,
        ) {
            let r: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let c = corrupt_to_target(&r, target, seed).unwrap();
            let measured = wer(&TranscriptPair::new(r.clone(), c.hypothesis.clone())).edits();
            let budget = (target * n as f64 / 100.0).round() as usize;
            prop_assert!(measured.abs_diff(budget) <= 1,
                "budget {budget}, measured {measured}, n {n}");
        }
    }
}
