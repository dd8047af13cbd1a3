//! The offline labeling pipeline: per-utterance WER against the base
//! model's replayed hypotheses, interval-based invocation labels,
//! confidence-grade assignment, class balancing, and emission of the three
//! training output formats with their loss masks.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::{ConfidenceLevel, LevelBins, level_from_probability};
use crate::corpus::{Language, Utterance};
use crate::route::BaseModelOutput;
use crate::wer::{TranscriptPair, wer};

/// Three-way invocation decision token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvocationLabel {
    No,
    Yes,
    Uncertain,
}

impl InvocationLabel {
    pub const ALL: [InvocationLabel; 3] = [
        InvocationLabel::No,
        InvocationLabel::Yes,
        InvocationLabel::Uncertain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InvocationLabel::No => "no",
            InvocationLabel::Yes => "yes",
            InvocationLabel::Uncertain => "uncertain",
        }
    }
}

impl fmt::Display for InvocationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for InvocationLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "no" => Ok(InvocationLabel::No),
            "yes" => Ok(InvocationLabel::Yes),
            "uncertain" => Ok(InvocationLabel::Uncertain),
            other => Err(alloc::format!("unknown invocation label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabelError {
    #[error("agnostic interval bounds must satisfy 0 <= no_upper < yes_lower, got {no_upper}/{yes_lower}")]
    BadBounds { no_upper: f64, yes_lower: f64 },
    #[error("half width must be positive, got {half_width}")]
    BadHalfWidth { half_width: f64 },
    #[error("wer must be a non-negative number, got {wer}")]
    BadWer { wer: f64 },
    #[error("no interval center configured for language {language}")]
    UnknownLanguage { language: Language },
    #[error("cannot balance with an empty class: no={no}, yes={yes}, uncertain={uncertain}")]
    EmptyClass { no: usize, yes: usize, uncertain: usize },
    #[error("balance ratio components must be positive, got {0}:{1}:{2}")]
    BadRatio(f64, f64, f64),
}

/// WER intervals that assign invocation labels.
///
/// The agnostic mode uses one fixed partition for every language:
/// `[0, no_upper]` is `no`, `(no_upper, yes_lower]` is `uncertain`, and
/// everything above is `yes` (defaults 2 and 10). The language-specific
/// mode centers the uncertain band on each language's best-backend WER
/// `i`, as `(i - half_width, i + half_width]` with a default half width
/// of 2.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum IntervalPolicy {
    LanguageAgnostic {
        no_upper: f64,
        yes_lower: f64,
    },
    LanguageSpecific {
        centers: BTreeMap<Language, f64>,
        half_width: f64,
    },
}

impl IntervalPolicy {
    pub fn agnostic(no_upper: f64, yes_lower: f64) -> Result<Self, LabelError> {
        if !(0.0 <= no_upper && no_upper < yes_lower) {
            return Err(LabelError::BadBounds {
                no_upper,
                yes_lower,
            });
        }
        Ok(IntervalPolicy::LanguageAgnostic {
            no_upper,
            yes_lower,
        })
    }

    pub fn language_specific(
        centers: BTreeMap<Language, f64>,
        half_width: f64,
    ) -> Result<Self, LabelError> {
        if !(half_width > 0.0) {
            return Err(LabelError::BadHalfWidth { half_width });
        }
        Ok(IntervalPolicy::LanguageSpecific {
            centers,
            half_width,
        })
    }
}

impl Default for IntervalPolicy {
    fn default() -> Self {
        IntervalPolicy::LanguageAgnostic {
            no_upper: 2.0,
            yes_lower: 10.0,
        }
    }
}

/// Maps a WER to its invocation label under `policy`.
///
/// Interval boundaries follow the bracket notation exactly: upper bounds
/// belong to the lower label, so e.g. WER 2.0 is `no` and 10.0 is
/// `uncertain` under the default agnostic bounds.
pub fn assign_label(
    wer: f64,
    language: &Language,
    policy: &IntervalPolicy,
) -> Result<InvocationLabel, LabelError> {
    if !(wer >= 0.0) || !wer.is_finite() {
        return Err(LabelError::BadWer { wer });
    }
    let label = match policy {
        IntervalPolicy::LanguageAgnostic {
            no_upper,
            yes_lower,
        } => {
            if wer <= *no_upper {
                InvocationLabel::No
            } else if wer <= *yes_lower {
                InvocationLabel::Uncertain
            } else {
                InvocationLabel::Yes
            }
        }
        IntervalPolicy::LanguageSpecific {
            centers,
            half_width,
        } => {
            let center = centers
                .get(language)
                .ok_or_else(|| LabelError::UnknownLanguage {
                    language: language.clone(),
                })?;
            if wer <= center - half_width {
                InvocationLabel::No
            } else if wer <= center + half_width {
                InvocationLabel::Uncertain
            } else {
                InvocationLabel::Yes
            }
        }
    };
    Ok(label)
}

/// One pipeline artifact row: the labeling evidence for an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub utterance_id: String,
    pub language_true: Language,
    pub language_pseudo: Language,
    pub wer: f64,
    pub label: InvocationLabel,
    pub confidence_level: ConfidenceLevel,
    pub posterior_probability: f64,
}

/// A label record bundled with the texts and language confidence needed
/// to emit training formats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledUtterance {
    pub record: LabelRecord,
    pub reference: Vec<String>,
    pub hypothesis: Vec<String>,
    pub language_confidence: f64,
}

/// Why a corpus row was not turned into a label record. Skip variants are
/// logged and dropped; `Label` signals a configuration problem and aborts.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error("missing reference transcript")]
    MissingReference,
    #[error("replay output carries no hypothesis")]
    MissingHypothesis,
    #[error("replay output carries no posterior signal")]
    MissingPosterior,
    #[error(transparent)]
    Label(#[from] LabelError),
}

impl BuildError {
    /// Skippable problems are data gaps; the rest are configuration
    /// errors that should abort the pipeline.
    pub fn is_skip(&self) -> bool {
        !matches!(self, BuildError::Label(_))
    }
}

/// Builds the label record for one utterance from the replayed base
/// output: WER against the reference, interval label, and confidence
/// grade with wrong-pseudo-LID forcing grade `D`.
pub fn build_record(
    utterance: &Utterance,
    base: &BaseModelOutput,
    policy: &IntervalPolicy,
    bins: &LevelBins,
) -> Result<LabeledUtterance, BuildError> {
    if utterance.reference.is_empty() {
        return Err(BuildError::MissingReference);
    }
    let hypothesis = base
        .hypothesis
        .as_ref()
        .ok_or(BuildError::MissingHypothesis)?;
    let probability = base
        .posterior_probability()
        .ok_or(BuildError::MissingPosterior)?;

    let breakdown = wer(&TranscriptPair::new(
        utterance.reference.clone(),
        hypothesis.clone(),
    ));
    let measured = breakdown.wer().expect("non-empty reference");
    let label = assign_label(measured, &utterance.language, policy)?;
    let lid_correct = base.language_pred == utterance.language;
    let confidence_level = level_from_probability(probability, lid_correct, bins);

    Ok(LabeledUtterance {
        record: LabelRecord {
            utterance_id: utterance.id.clone(),
            language_true: utterance.language.clone(),
            language_pseudo: base.language_pred.clone(),
            wer: measured,
            label,
            confidence_level,
            posterior_probability: probability,
        },
        reference: utterance.reference.clone(),
        hypothesis: hypothesis.clone(),
        language_confidence: base.language_confidence,
    })
}

/// Named segments of a training example; the loss mask lists the segments
/// whose tokens contribute to the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    LanguageTag,
    LanguageConfidence,
    Transcription,
    DecisionToken,
    ConfidenceToken,
}

/// Which of the three training output formats a record uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskFormat {
    No,
    Yes,
    Uncertain,
}

impl From<InvocationLabel> for TaskFormat {
    fn from(label: InvocationLabel) -> Self {
        match label {
            InvocationLabel::No => TaskFormat::No,
            InvocationLabel::Yes => TaskFormat::Yes,
            InvocationLabel::Uncertain => TaskFormat::Uncertain,
        }
    }
}

/// The loss mask each format pins:
///
/// - `no`: ground-truth transcription plus all special tokens
/// - `yes`: special tokens only, no transcription emitted
/// - `uncertain`: special tokens only; the pseudo transcription is
///   present as context but masked out of the loss
pub fn loss_mask_for(format: TaskFormat) -> Vec<SegmentKind> {
    match format {
        TaskFormat::No => vec![
            SegmentKind::LanguageTag,
            SegmentKind::LanguageConfidence,
            SegmentKind::Transcription,
            SegmentKind::DecisionToken,
        ],
        TaskFormat::Yes => vec![
            SegmentKind::LanguageTag,
            SegmentKind::LanguageConfidence,
            SegmentKind::DecisionToken,
        ],
        TaskFormat::Uncertain => vec![
            SegmentKind::LanguageTag,
            SegmentKind::LanguageConfidence,
            SegmentKind::DecisionToken,
            SegmentKind::ConfidenceToken,
        ],
    }
}

/// One formatted training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub utterance_id: String,
    pub task_format: TaskFormat,
    pub language: Language,
    pub language_confidence: f64,
    pub decision_token: InvocationLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcription: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_token: Option<ConfidenceLevel>,
    pub loss_mask: Vec<SegmentKind>,
}

impl TrainingRecord {
    fn from_labeled(l: &LabeledUtterance) -> Self {
        let format = TaskFormat::from(l.record.label);
        let transcription = match format {
            TaskFormat::No => Some(l.reference.join(" ")),
            TaskFormat::Yes => None,
            // Pseudo label: the base model's own hypothesis.
            TaskFormat::Uncertain => Some(l.hypothesis.join(" ")),
        };
        let confidence_token = match format {
            TaskFormat::Uncertain => Some(l.record.confidence_level),
            _ => None,
        };
        TrainingRecord {
            utterance_id: l.record.utterance_id.clone(),
            task_format: format,
            language: l.record.language_true.clone(),
            language_confidence: l.language_confidence,
            decision_token: l.record.label,
            transcription,
            confidence_token,
            loss_mask: loss_mask_for(format),
        }
    }

    /// Checks the format invariants: field presence and loss mask both
    /// match the record's task format.
    pub fn conforms(&self) -> bool {
        let mask_ok = self.loss_mask == loss_mask_for(self.task_format);
        let fields_ok = match self.task_format {
            TaskFormat::No => self.transcription.is_some() && self.confidence_token.is_none(),
            TaskFormat::Yes => self.transcription.is_none() && self.confidence_token.is_none(),
            TaskFormat::Uncertain => {
                self.transcription.is_some() && self.confidence_token.is_some()
            }
        };
        mask_ok && fields_ok
    }
}

/// Target class proportions `no : yes : uncertain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceRatio {
    pub no: f64,
    pub yes: f64,
    pub uncertain: f64,
}

impl BalanceRatio {
    pub fn new(no: f64, yes: f64, uncertain: f64) -> Result<Self, LabelError> {
        if !(no > 0.0 && yes > 0.0 && uncertain > 0.0) {
            return Err(LabelError::BadRatio(no, yes, uncertain));
        }
        Ok(BalanceRatio { no, yes, uncertain })
    }
}

impl Default for BalanceRatio {
    fn default() -> Self {
        BalanceRatio {
            no: 1.0,
            yes: 1.5,
            uncertain: 1.5,
        }
    }
}

impl core::str::FromStr for BalanceRatio {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(alloc::format!("expected a:b:c, got {s:?}"));
        }
        let parse = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| alloc::format!("bad ratio component {p:?}: {e}"))
        };
        BalanceRatio::new(parse(parts[0])?, parse(parts[1])?, parse(parts[2])?)
            .map_err(|e| alloc::format!("{e}"))
    }
}

/// Balanced training manifest in corpus order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub records: Vec<TrainingRecord>,
}

impl TrainingManifest {
    /// Record counts as `(no, yes, uncertain)`.
    pub fn class_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for r in &self.records {
            match r.task_format {
                TaskFormat::No => counts.0 += 1,
                TaskFormat::Yes => counts.1 += 1,
                TaskFormat::Uncertain => counts.2 += 1,
            }
        }
        counts
    }
}

/// Subsamples classes to the closest achievable ratio (never duplicates)
/// and emits the training formats. Deterministic given `seed`; output
/// preserves input order.
pub fn balance_manifest(
    labeled: &[LabeledUtterance],
    ratio: &BalanceRatio,
    seed: u64,
) -> Result<TrainingManifest, LabelError> {
    let mut by_class: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, l) in labeled.iter().enumerate() {
        let slot = match l.record.label {
            InvocationLabel::No => 0,
            InvocationLabel::Yes => 1,
            InvocationLabel::Uncertain => 2,
        };
        by_class[slot].push(i);
    }
    let counts = (by_class[0].len(), by_class[1].len(), by_class[2].len());
    if counts.0 == 0 || counts.1 == 0 || counts.2 == 0 {
        return Err(LabelError::EmptyClass {
            no: counts.0,
            yes: counts.1,
            uncertain: counts.2,
        });
    }

    let weights = [ratio.no, ratio.yes, ratio.uncertain];
    let scale = (0..3)
        .map(|k| by_class[k].len() as f64 / weights[k])
        .fold(f64::INFINITY, f64::min);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = Vec::new();
    for k in 0..3 {
        let want = ((weights[k] * scale).round() as usize).min(by_class[k].len());
        let chosen = rand::seq::index::sample(&mut rng, by_class[k].len(), want);
        keep.extend(chosen.iter().map(|j| by_class[k][j]));
    }
    keep.sort_unstable();

    Ok(TrainingManifest {
        records: keep
            .into_iter()
            .map(|i| TrainingRecord::from_labeled(&labeled[i]))
            .collect(),
    })
}
