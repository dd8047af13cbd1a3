//! Corpus primitives shared by the labeling pipeline, backends, and
//! evaluation: language tags and utterance metadata.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// A language tag such as `de` or `en`.
///
/// Tags are compared case-sensitively; corpora and configuration are
/// expected to agree on lowercase ISO 639-1 codes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Language(String);

impl Language {
    pub fn new(tag: impl Into<String>) -> Self {
        Language(tag.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Language {
    fn from(tag: &str) -> Self {
        Language::new(tag)
    }
}

/// One utterance of an evaluation or labeling corpus.
///
/// The reference transcript is stored as a normalized word sequence; audio
/// itself is never touched, utterances are referenced by id against
/// pre-registered stores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub language: Language,
    /// Normalized reference transcript; may be empty when the corpus has
    /// no ground truth for this utterance.
    pub reference: Vec<String>,
    /// Audio duration used for cost accounting. Defaults to 1.0 so that
    /// cost totals reduce to invocation counts unless real durations are
    /// supplied.
    pub audio_seconds: f64,
}

impl Utterance {
    pub fn new(id: impl Into<String>, language: Language, reference: Vec<String>) -> Self {
        Utterance {
            id: id.into(),
            language,
            reference,
            audio_seconds: 1.0,
        }
    }
}

/// An ordered collection of utterances. Order is significant: every run
/// that iterates a corpus does so in corpus order, which is what makes
/// seeded evaluations reproducible.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
}

impl Corpus {
    pub fn new(utterances: Vec<Utterance>) -> Self {
        Corpus { utterances }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter()
    }

    /// Distinct languages present, in sorted order.
    pub fn languages(&self) -> Vec<Language> {
        let mut langs: Vec<Language> = self.utterances.iter().map(|u| u.language.clone()).collect();
        langs.sort();
        langs.dedup();
        langs
    }
}
