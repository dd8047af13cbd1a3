//! Confidence measures over base-model posteriors and the conjunctive
//! fusion rule that resolves `uncertain` invocation tokens.
//!
//! Three signals are combined:
//!
//! - average posterior probability: `(1/T) * sum_t max_c y[t][c]`
//! - entropy score: `-(1/(T*C)) * sum_t sum_c y[t][c] * ln(y[t][c])`,
//!   natural log, `0 * ln 0 = 0`
//! - an ordinal transcription-confidence grade `A > B > C > D`
//!
//! Fusion invokes a backend only when all three signals look bad at once:
//! probability strictly below `P`, entropy strictly above `E`, and grade
//! strictly below the grade threshold. Equality at any threshold accepts.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Language;

/// Row sums may drift from 1 by at most this much.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfidenceError {
    #[error("posterior matrix needs at least 1 row and 2 columns, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },
    #[error("posterior matrix has {expected} cells for {rows}x{cols}, got {got}")]
    BadLength {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("posterior entry {value} at row {row} outside [0, 1]")]
    EntryOutOfRange { row: usize, value: f64 },
    #[error("posterior row {row} sums to {sum}, expected 1 within {ROW_SUM_TOLERANCE}")]
    RowNotStochastic { row: usize, sum: f64 },
    #[error("threshold {name} = {value} outside its valid range")]
    BadThreshold { name: &'static str, value: f64 },
    #[error("level bins must satisfy 0 <= C floor < B floor < A floor <= 1, got {a}/{b}/{c}")]
    BadBins { a: f64, b: f64, c: f64 },
}

/// A `T x C` row-stochastic matrix of per-frame (or per-token) class
/// posteriors. Validated on construction, so the measures over it are
/// total functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRows", into = "MatrixRows")]
pub struct PosteriorMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

/// Serialization shape: a plain list of rows.
#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct MatrixRows(Vec<Vec<f64>>);

impl TryFrom<MatrixRows> for PosteriorMatrix {
    type Error = ConfidenceError;

    fn try_from(rows: MatrixRows) -> Result<Self, ConfidenceError> {
        PosteriorMatrix::from_rows(rows.0)
    }
}

impl From<PosteriorMatrix> for MatrixRows {
    fn from(m: PosteriorMatrix) -> MatrixRows {
        MatrixRows(m.rows().map(|r| r.to_vec()).collect())
    }
}

impl PosteriorMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, ConfidenceError> {
        if rows < 1 || cols < 2 {
            return Err(ConfidenceError::BadShape { rows, cols });
        }
        if values.len() != rows * cols {
            return Err(ConfidenceError::BadLength {
                rows,
                cols,
                expected: rows * cols,
                got: values.len(),
            });
        }
        for (t, row) in values.chunks_exact(cols).enumerate() {
            let mut sum = 0.0;
            for &y in row {
                if !(0.0..=1.0).contains(&y) || !y.is_finite() {
                    return Err(ConfidenceError::EntryOutOfRange { row: t, value: y });
                }
                sum += y;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(ConfidenceError::RowNotStochastic { row: t, sum });
            }
        }
        Ok(PosteriorMatrix { values, rows, cols })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ConfidenceError> {
        let t = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        let mut values = Vec::with_capacity(t * c);
        for row in &rows {
            if row.len() != c {
                return Err(ConfidenceError::BadLength {
                    rows: t,
                    cols: c,
                    expected: t * c,
                    got: rows.iter().map(Vec::len).sum(),
                });
            }
            values.extend_from_slice(row);
        }
        PosteriorMatrix::new(t, c, values)
    }

    pub fn frame_count(&self) -> usize {
        self.rows
    }

    pub fn class_count(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }
}

/// Average of the per-row maximum posterior. Lies in `[1/C, 1]`.
pub fn posterior_probability(m: &PosteriorMatrix) -> f64 {
    let sum: f64 = m
        .rows()
        .map(|row| row.iter().cloned().fold(0.0f64, f64::max))
        .sum();
    sum / m.frame_count() as f64
}

/// Entropy score normalized by `T * C`, in nats.
pub fn entropy(m: &PosteriorMatrix) -> f64 {
    let mut acc = 0.0;
    for row in m.rows() {
        for &y in row {
            if y > 0.0 {
                acc += y * libm::log(y);
            }
        }
    }
    -acc / (m.frame_count() * m.class_count()) as f64
}

/// Ordinal transcription-confidence grade, `A` highest through `D` lowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConfidenceLevel {
    A,
    B,
    C,
    D,
}

impl ConfidenceLevel {
    /// Rank with `A` greatest; used for the ordering `A > B > C > D`.
    fn rank(self) -> u8 {
        match self {
            ConfidenceLevel::A => 3,
            ConfidenceLevel::B => 2,
            ConfidenceLevel::C => 1,
            ConfidenceLevel::D => 0,
        }
    }

    pub const ALL: [ConfidenceLevel; 4] = [
        ConfidenceLevel::A,
        ConfidenceLevel::B,
        ConfidenceLevel::C,
        ConfidenceLevel::D,
    ];
}

impl PartialOrd for ConfidenceLevel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ConfidenceLevel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl fmt::Display for ConfidenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Fusion thresholds: probability floor `P`, entropy ceiling `E` (nats),
/// and the grade threshold. Defaults are the pinned operating point
/// `(0.96, 0.0015, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionThresholds {
    pub probability_floor: f64,
    pub entropy_ceiling: f64,
    pub level_threshold: ConfidenceLevel,
}

impl FusionThresholds {
    pub fn new(
        probability_floor: f64,
        entropy_ceiling: f64,
        level_threshold: ConfidenceLevel,
    ) -> Result<Self, ConfidenceError> {
        if !(0.0..=1.0).contains(&probability_floor) || !probability_floor.is_finite() {
            return Err(ConfidenceError::BadThreshold {
                name: "probability_floor",
                value: probability_floor,
            });
        }
        if entropy_ceiling < 0.0 || !entropy_ceiling.is_finite() {
            return Err(ConfidenceError::BadThreshold {
                name: "entropy_ceiling",
                value: entropy_ceiling,
            });
        }
        Ok(FusionThresholds {
            probability_floor,
            entropy_ceiling,
            level_threshold,
        })
    }
}

impl Default for FusionThresholds {
    fn default() -> Self {
        FusionThresholds {
            probability_floor: 0.96,
            entropy_ceiling: 0.0015,
            level_threshold: ConfidenceLevel::B,
        }
    }
}

/// The three signals for one utterance, ready for fusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSummary {
    pub posterior_probability: f64,
    pub entropy: f64,
    pub transcription_confidence: ConfidenceLevel,
}

impl ConfidenceSummary {
    pub fn from_matrix(m: &PosteriorMatrix, transcription_confidence: ConfidenceLevel) -> Self {
        ConfidenceSummary {
            posterior_probability: posterior_probability(m),
            entropy: entropy(m),
            transcription_confidence,
        }
    }
}

/// Outcome of the fusion rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionVerdict {
    Invoke,
    Accept,
}

/// Conjunctive fusion: invoke only when the probability falls strictly
/// below `P`, the entropy strictly exceeds `E`, and the grade is strictly
/// lower than the grade threshold. All inequalities are strict, so
/// boundary values accept.
pub fn fuse(summary: &ConfidenceSummary, thresholds: &FusionThresholds) -> FusionVerdict {
    let low_probability = summary.posterior_probability < thresholds.probability_floor;
    let high_entropy = summary.entropy > thresholds.entropy_ceiling;
    let low_grade = summary.transcription_confidence < thresholds.level_threshold;
    if low_probability && high_entropy && low_grade {
        FusionVerdict::Invoke
    } else {
        FusionVerdict::Accept
    }
}

/// Probability bins mapping the base model's posterior probability to a
/// grade: `A` at or above `a_floor`, `B` at or above `b_floor`, `C` at or
/// above `c_floor`, `D` below. Default floors are `0.98 / 0.96 / 0.90`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelBins {
    pub a_floor: f64,
    pub b_floor: f64,
    pub c_floor: f64,
}

impl LevelBins {
    pub fn new(a_floor: f64, b_floor: f64, c_floor: f64) -> Result<Self, ConfidenceError> {
        let ordered = 0.0 <= c_floor && c_floor < b_floor && b_floor < a_floor && a_floor <= 1.0;
        if !ordered {
            return Err(ConfidenceError::BadBins {
                a: a_floor,
                b: b_floor,
                c: c_floor,
            });
        }
        Ok(LevelBins {
            a_floor,
            b_floor,
            c_floor,
        })
    }
}

impl Default for LevelBins {
    fn default() -> Self {
        LevelBins {
            a_floor: 0.98,
            b_floor: 0.96,
            c_floor: 0.90,
        }
    }
}

/// Grades a posterior probability. A wrong pseudo language prediction
/// forces the lowest grade regardless of probability.
pub fn level_from_probability(p: f64, lid_correct: bool, bins: &LevelBins) -> ConfidenceLevel {
    if !lid_correct {
        return ConfidenceLevel::D;
    }
    if p >= bins.a_floor {
        ConfidenceLevel::A
    } else if p >= bins.b_floor {
        ConfidenceLevel::B
    } else if p >= bins.c_floor {
        ConfidenceLevel::C
    } else {
        ConfidenceLevel::D
    }
}

/// Global thresholds plus per-language overrides, as loaded from the
/// engine configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub global: FusionThresholds,
    pub overrides: BTreeMap<Language, FusionThresholds>,
}

impl ThresholdTable {
    pub fn resolve(&self, language: &Language) -> &FusionThresholds {
        self.overrides.get(language).unwrap_or(&self.global)
    }
}

impl From<FusionThresholds> for ThresholdTable {
    fn from(global: FusionThresholds) -> Self {
        ThresholdTable {
            global,
            overrides: BTreeMap::new(),
        }
    }
}

impl fmt::Display for FusionVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Parses a grade from its letter, accepting either case.
impl core::str::FromStr for ConfidenceLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "A" | "a" => Ok(ConfidenceLevel::A),
            "B" | "b" => Ok(ConfidenceLevel::B),
            "C" | "c" => Ok(ConfidenceLevel::C),
            "D" | "d" => Ok(ConfidenceLevel::D),
            other => Err(alloc::format!("unknown confidence level {other:?}")),
        }
    }
}
