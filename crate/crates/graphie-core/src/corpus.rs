//! Corpus data model: tokens, sentences, documents, tag schemes and
//! vocabularies.
//!
//! Tokens arrive pre-tokenized. Tag sequences are stored as ids against
//! a [`TagScheme`]; raw files may violate BIO well-formedness, which
//! the evaluator repairs during span extraction.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};

pub type TagId = usize;

/// Reserved vocabulary rows.
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Whether graph nodes for a document are words or sentences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Word,
    Sentence,
}

impl std::fmt::Display for UnitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UnitKind::Word => write!(f, "word"),
            UnitKind::Sentence => write!(f, "sentence"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub surface: String,
    /// Character ids derived from the surface via the char vocabulary.
    pub chars: Vec<usize>,
    /// Word id under the word vocabulary (with lowercase fallback).
    pub word_id: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub tags: Option<Vec<TagId>>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Page plus pixel box; y grows downward from a top-left origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub page: usize,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn validate(&self, what: &str) -> Result<()> {
        if !(self.x0 < self.x1 && self.y0 < self.y1) {
            return Err(Error::Validation(format!(
                "degenerate box {what}: ({}, {}, {}, {})",
                self.x0, self.y0, self.x1, self.y1
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Per-sentence layout info (layout corpora only).
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutBox {
    pub box_id: String,
    pub bbox: BoundingBox,
    pub page_width: f64,
    pub page_height: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EgoUser {
    pub user_id: String,
    pub is_center: bool,
}

/// Ego-network structure: users own sentences (tweets); edges are the
/// raw directed followed-by links between user indices.
#[derive(Clone, Debug, PartialEq)]
pub struct EgoPayload {
    pub users: Vec<EgoUser>,
    /// For each sentence, the index of the user who posted it.
    pub sentence_user: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DocumentPayload {
    None,
    /// Aligned 1:1 with sentences.
    Layout(Vec<LayoutBox>),
    Ego(EgoPayload),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
    pub unit_kind: UnitKind,
    pub payload: DocumentPayload,
}

impl Document {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.sentences.iter().enumerate() {
            if s.tokens.is_empty() {
                return Err(Error::Validation(format!(
                    "document '{}': sentence {i} is empty",
                    self.doc_id
                )));
            }
            if let Some(tags) = &s.tags {
                if tags.len() != s.tokens.len() {
                    return Err(Error::Validation(format!(
                        "document '{}': sentence {i} has {} tags for {} tokens",
                        self.doc_id,
                        tags.len(),
                        s.tokens.len()
                    )));
                }
            }
        }
        match &self.payload {
            DocumentPayload::Layout(boxes) => {
                if boxes.len() != self.sentences.len() {
                    return Err(Error::Validation(format!(
                        "document '{}': {} boxes for {} sentences",
                        self.doc_id,
                        boxes.len(),
                        self.sentences.len()
                    )));
                }
            }
            DocumentPayload::Ego(p) => {
                if p.sentence_user.len() != self.sentences.len() {
                    return Err(Error::Validation(format!(
                        "document '{}': {} user links for {} sentences",
                        self.doc_id,
                        p.sentence_user.len(),
                        self.sentences.len()
                    )));
                }
                if let Some(&u) = p.sentence_user.iter().find(|&&u| u >= p.users.len()) {
                    return Err(Error::Validation(format!(
                        "document '{}': sentence links to unknown user index {u}",
                        self.doc_id
                    )));
                }
            }
            DocumentPayload::None => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Document::token_count).sum()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.documents.iter().flat_map(|d| d.sentences.iter())
    }
}

// ---------------------------------------------------------------------------
// Tag scheme
// ---------------------------------------------------------------------------

/// Entity labels with the derived BIO tag set {O} + {B-l, I-l}.
/// Tag ids are contiguous: O is 0, label i owns ids 1+2i (B) and
/// 2+2i (I). Ids are stored explicitly in model files, never
/// re-derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagScheme {
    labels: Vec<String>,
}

pub const OUTSIDE_TAG: TagId = 0;

/// Structural reading of a tag id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TagRole {
    Outside,
    Begin(usize),
    Inside(usize),
}

impl TagScheme {
    pub fn from_labels(labels: Vec<String>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l == "O" {
                return Err(Error::Validation(format!("invalid entity label '{l}'")));
            }
            if seen.insert(l.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate entity label '{l}'")));
            }
        }
        Ok(TagScheme { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn tag_count(&self) -> usize {
        1 + 2 * self.labels.len()
    }

    pub fn role(&self, id: TagId) -> Result<TagRole> {
        if id == 0 {
            return Ok(TagRole::Outside);
        }
        let label = (id - 1) / 2;
        if label >= self.labels.len() {
            return Err(Error::Contract(format!("tag id {id} out of range")));
        }
        Ok(if id % 2 == 1 {
            TagRole::Begin(label)
        } else {
            TagRole::Inside(label)
        })
    }

    pub fn tag_name(&self, id: TagId) -> Result<String> {
        Ok(match self.role(id)? {
            TagRole::Outside => "O".to_string(),
            TagRole::Begin(l) => format!("B-{}", self.labels[l]),
            TagRole::Inside(l) => format!("I-{}", self.labels[l]),
        })
    }

    pub fn tag_id(&self, name: &str) -> Option<TagId> {
        if name == "O" {
            return Some(0);
        }
        let (kind, label) = name.split_once('-')?;
        let li = self.labels.iter().position(|l| l == label)?;
        match kind {
            "B" => Some(1 + 2 * li),
            "I" => Some(2 + 2 * li),
            _ => None,
        }
    }

    pub fn begin_id(&self, label: usize) -> TagId {
        1 + 2 * label
    }

    pub fn inside_id(&self, label: usize) -> TagId {
        2 + 2 * label
    }
}

/// Collects labels from raw tag strings in first-seen order.
pub fn scheme_from_tag_strings<'a>(tags: impl Iterator<Item = &'a str>) -> Result<TagScheme> {
    let mut labels: Vec<String> = Vec::new();
    for t in tags {
        if t == "O" {
            continue;
        }
        let Some((kind, label)) = t.split_once('-') else {
            return Err(Error::Validation(format!("unknown tag string '{t}'")));
        };
        if kind != "B" && kind != "I" {
            return Err(Error::Validation(format!("unknown tag string '{t}'")));
        }
        if !labels.iter().any(|l| l == label) {
            labels.push(label.to_string());
        }
    }
    TagScheme::from_labels(labels)
}

// ---------------------------------------------------------------------------
// Vocabularies
// ---------------------------------------------------------------------------

/// Word and character vocabularies with reserved PAD (0) and UNK (1)
/// rows. Word lookup is case-sensitive with a lowercase fallback
/// before UNK; characters are taken from training surfaces, unseen
/// ones map to the UNK char.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Vocabularies {
    words: Vec<String>,
    chars: Vec<char>,
    #[serde(skip)]
    word_index: HashMap<String, usize>,
    #[serde(skip)]
    char_index: HashMap<char, usize>,
}

impl PartialEq for Vocabularies {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words && self.chars == other.chars
    }
}

impl Vocabularies {
    /// Builds from training surfaces, in first-seen order.
    pub fn build<'a>(surfaces: impl Iterator<Item = &'a str>) -> Self {
        let mut v = Vocabularies {
            words: vec!["<pad>".into(), "<unk>".into()],
            chars: vec!['\u{0}', '\u{1}'],
            word_index: HashMap::new(),
            char_index: HashMap::new(),
        };
        v.rehydrate();
        for s in surfaces {
            if !v.word_index.contains_key(s) {
                v.word_index.insert(s.to_string(), v.words.len());
                v.words.push(s.to_string());
            }
            for c in s.chars() {
                if let std::collections::hash_map::Entry::Vacant(e) = v.char_index.entry(c) {
                    e.insert(v.chars.len());
                    v.chars.push(c);
                }
            }
        }
        v
    }

    /// Rebuilds the lookup maps after deserialization.
    pub fn rehydrate(&mut self) {
        self.word_index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        self.char_index = self.chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn char_count(&self) -> usize {
        self.chars.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Case-sensitive lookup, then lowercased, then UNK.
    pub fn word_id(&self, surface: &str) -> usize {
        if let Some(&i) = self.word_index.get(surface) {
            return i;
        }
        let lower = surface.to_lowercase();
        if lower != surface {
            if let Some(&i) = self.word_index.get(&lower) {
                return i;
            }
        }
        UNK_ID
    }

    pub fn char_ids(&self, surface: &str) -> Vec<usize> {
        surface
            .chars()
            .map(|c| self.char_index.get(&c).copied().unwrap_or(UNK_ID))
            .collect()
    }

    /// Materializes a token with ids under these vocabularies.
    pub fn token(&self, surface: &str) -> Result<Token> {
        if surface.is_empty() {
            return Err(Error::Validation("empty token surface".into()));
        }
        Ok(Token {
            word_id: self.word_id(surface),
            chars: self.char_ids(surface),
            surface: surface.to_string(),
        })
    }
}
