//! Input formats: column-format tagged corpora, layout JSON, ego
//! network JSON, pretrained embeddings and stopword lists.
//!
//! All loaders are pure functions over file contents and preserve
//! token, sentence and document order exactly as found in the file.

use serde::Deserialize;
use std::collections::HashSet;
use std::path::Path;

use crate::corpus::{
    scheme_from_tag_strings, BoundingBox, Corpus, Document, DocumentPayload, EgoPayload, EgoUser,
    LayoutBox, Sentence, TagScheme, UnitKind, Vocabularies,
};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::tensor::{Scalar, Tensor};

/// Where tag ids and vocabulary ids come from: built from the data
/// being loaded (training) or reused from an existing model.
pub enum VocabSource<'a> {
    BuildFromData,
    Existing(&'a TagScheme, &'a Vocabularies),
}

#[derive(Debug)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub scheme: TagScheme,
    pub vocabs: Vocabularies,
}

// ---------------------------------------------------------------------------
// Column-format tagged corpus
// ---------------------------------------------------------------------------

struct RawSentence {
    surfaces: Vec<String>,
    tags: Option<Vec<String>>,
    first_line: usize,
}

struct RawDoc {
    sentences: Vec<RawSentence>,
}

/// Parses whitespace-separated columns: token in column 1, BIO tag in
/// the last column, blank line = sentence boundary, a line starting
/// with `-DOCSTART-` = document boundary.
fn parse_tagged_text(text: &str, strict: bool) -> Result<Vec<RawDoc>> {
    let mut docs: Vec<RawDoc> = Vec::new();
    let mut cur_doc: Vec<RawSentence> = Vec::new();
    let mut cur: Vec<(String, Option<String>, usize, usize)> = Vec::new(); // surface, tag, cols, line

    let flush_sentence =
        |cur: &mut Vec<(String, Option<String>, usize, usize)>, cur_doc: &mut Vec<RawSentence>| -> Result<()> {
            if cur.is_empty() {
                return Ok(());
            }
            let first_line = cur[0].3;
            let cols0 = cur[0].2;
            if let Some(bad) = cur.iter().find(|(_, _, c, _)| *c != cols0) {
                return Err(Error::parse(
                    bad.3,
                    format!("ragged columns: expected {cols0}, got {}", bad.2),
                ));
            }
            let tags = if cols0 >= 2 {
                Some(cur.iter().map(|(_, t, _, _)| t.clone().unwrap()).collect())
            } else {
                None
            };
            cur_doc.push(RawSentence {
                surfaces: cur.drain(..).map(|(s, _, _, _)| s).collect(),
                tags,
                first_line,
            });
            Ok(())
        };

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.starts_with("-DOCSTART-") {
            flush_sentence(&mut cur, &mut cur_doc)?;
            if !cur_doc.is_empty() {
                docs.push(RawDoc {
                    sentences: std::mem::take(&mut cur_doc),
                });
            }
            continue;
        }
        if trimmed.is_empty() {
            flush_sentence(&mut cur, &mut cur_doc)?;
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        let surface = cols[0].to_string();
        let tag = if cols.len() >= 2 {
            Some(cols[cols.len() - 1].to_string())
        } else {
            None
        };
        cur.push((surface, tag, cols.len().min(2), lineno));
    }
    flush_sentence(&mut cur, &mut cur_doc)?;
    if !cur_doc.is_empty() {
        docs.push(RawDoc { sentences: cur_doc });
    }
    if docs.is_empty() && strict {
        return Err(Error::parse(0, "empty corpus (strict mode)"));
    }
    Ok(docs)
}

fn resolve_tags(
    raw: &RawSentence,
    scheme: &TagScheme,
) -> Result<Option<Vec<usize>>> {
    let Some(tags) = &raw.tags else {
        return Ok(None);
    };
    let mut out = Vec::with_capacity(tags.len());
    for (off, t) in tags.iter().enumerate() {
        let id = scheme.tag_id(t).ok_or_else(|| {
            Error::parse(raw.first_line + off, format!("unknown tag string '{t}'"))
        })?;
        out.push(id);
    }
    Ok(Some(out))
}

fn finalize_tagged(docs: Vec<RawDoc>, source: VocabSource) -> Result<LoadedCorpus> {
    let (scheme, vocabs) = match source {
        VocabSource::BuildFromData => {
            let scheme = scheme_from_tag_strings(
                docs.iter()
                    .flat_map(|d| d.sentences.iter())
                    .flat_map(|s| s.tags.iter().flatten())
                    .map(String::as_str),
            )?;
            let vocabs = Vocabularies::build(
                docs.iter()
                    .flat_map(|d| d.sentences.iter())
                    .flat_map(|s| s.surfaces.iter())
                    .map(String::as_str),
            );
            (scheme, vocabs)
        }
        VocabSource::Existing(s, v) => (s.clone(), v.clone()),
    };

    let mut corpus = Corpus::default();
    for (di, raw) in docs.into_iter().enumerate() {
        let mut sentences = Vec::with_capacity(raw.sentences.len());
        for rs in &raw.sentences {
            let tokens = rs
                .surfaces
                .iter()
                .map(|s| vocabs.token(s))
                .collect::<Result<Vec<_>>>()?;
            sentences.push(Sentence {
                tokens,
                tags: resolve_tags(rs, &scheme)?,
            });
        }
        let doc = Document {
            doc_id: format!("doc{di}"),
            sentences,
            unit_kind: UnitKind::Word,
            payload: DocumentPayload::None,
        };
        doc.validate()?;
        corpus.documents.push(doc);
    }
    Ok(LoadedCorpus {
        corpus,
        scheme,
        vocabs,
    })
}

pub fn parse_tagged_corpus(text: &str, strict: bool, source: VocabSource) -> Result<LoadedCorpus> {
    finalize_tagged(parse_tagged_text(text, strict)?, source)
}

pub fn load_tagged_corpus(path: &Path, strict: bool, source: VocabSource) -> Result<LoadedCorpus> {
    let text = std::fs::read_to_string(path)?;
    parse_tagged_corpus(&text, strict, source)
}

/// Writes token/tag columns: one `surface tag` line per token, blank
/// line between sentences, `-DOCSTART- O` line before each document.
pub fn write_tagged_corpus(corpus: &Corpus, scheme: &TagScheme) -> Result<String> {
    let mut out = String::new();
    for doc in &corpus.documents {
        out.push_str("-DOCSTART- O\n\n");
        for s in &doc.sentences {
            for (i, tok) in s.tokens.iter().enumerate() {
                match &s.tags {
                    Some(tags) => {
                        out.push_str(&format!("{} {}\n", tok.surface, scheme.tag_name(tags[i])?))
                    }
                    None => out.push_str(&format!("{}\n", tok.surface)),
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Layout JSON
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct LayoutBoxJson {
    id: String,
    text: String,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    #[serde(default)]
    tags: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct LayoutPageJson {
    page: usize,
    width: f64,
    height: f64,
    boxes: Vec<LayoutBoxJson>,
}

#[derive(Deserialize)]
struct LayoutDocJson {
    doc_id: String,
    pages: Vec<LayoutPageJson>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

struct RawLayoutDoc {
    doc_id: String,
    boxes: Vec<(LayoutBox, Vec<String>, Option<Vec<String>>)>, // box, tokens, tags
}

fn parse_layout_docs(text: &str) -> Result<Vec<RawLayoutDoc>> {
    let parsed: OneOrMany<LayoutDocJson> = serde_json::from_str(text)?;
    let mut out = Vec::new();
    for doc in parsed.into_vec() {
        let mut boxes = Vec::new();
        for page in &doc.pages {
            if page.width <= 0.0 || page.height <= 0.0 {
                return Err(Error::Validation(format!(
                    "document '{}' page {}: non-positive page dimensions",
                    doc.doc_id, page.page
                )));
            }
            for b in &page.boxes {
                let bbox = BoundingBox {
                    page: page.page,
                    x0: b.x0,
                    y0: b.y0,
                    x1: b.x1,
                    y1: b.y1,
                };
                bbox.validate(&b.id)?;
                let tokens: Vec<String> =
                    b.text.split_whitespace().map(str::to_string).collect();
                if tokens.is_empty() {
                    return Err(Error::Validation(format!(
                        "box '{}': empty text",
                        b.id
                    )));
                }
                if let Some(tags) = &b.tags {
                    if tags.len() != tokens.len() {
                        return Err(Error::Validation(format!(
                            "box '{}': {} tags for {} tokens",
                            b.id,
                            tags.len(),
                            tokens.len()
                        )));
                    }
                }
                boxes.push((
                    LayoutBox {
                        box_id: b.id.clone(),
                        bbox,
                        page_width: page.width,
                        page_height: page.height,
                    },
                    tokens,
                    b.tags.clone(),
                ));
            }
        }
        out.push(RawLayoutDoc {
            doc_id: doc.doc_id,
            boxes,
        });
    }
    Ok(out)
}

pub fn parse_layout_corpus(text: &str, source: VocabSource) -> Result<LoadedCorpus> {
    let raw = parse_layout_docs(text)?;
    let (scheme, vocabs) = match source {
        VocabSource::BuildFromData => {
            let scheme = scheme_from_tag_strings(
                raw.iter()
                    .flat_map(|d| d.boxes.iter())
                    .flat_map(|(_, _, t)| t.iter().flatten())
                    .map(String::as_str),
            )?;
            let vocabs = Vocabularies::build(
                raw.iter()
                    .flat_map(|d| d.boxes.iter())
                    .flat_map(|(_, toks, _)| toks.iter())
                    .map(String::as_str),
            );
            (scheme, vocabs)
        }
        VocabSource::Existing(s, v) => (s.clone(), v.clone()),
    };

    let mut corpus = Corpus::default();
    for d in raw {
        let mut sentences = Vec::new();
        let mut payload = Vec::new();
        for (lb, tokens, tags) in d.boxes {
            let toks = tokens
                .iter()
                .map(|s| vocabs.token(s))
                .collect::<Result<Vec<_>>>()?;
            let tag_ids = match tags {
                None => None,
                Some(ts) => Some(
                    ts.iter()
                        .map(|t| {
                            scheme.tag_id(t).ok_or_else(|| {
                                Error::Validation(format!(
                                    "box '{}': unknown tag string '{t}'",
                                    lb.box_id
                                ))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
            };
            sentences.push(Sentence {
                tokens: toks,
                tags: tag_ids,
            });
            payload.push(lb);
        }
        let doc = Document {
            doc_id: d.doc_id,
            sentences,
            unit_kind: UnitKind::Sentence,
            payload: DocumentPayload::Layout(payload),
        };
        doc.validate()?;
        corpus.documents.push(doc);
    }
    Ok(LoadedCorpus {
        corpus,
        scheme,
        vocabs,
    })
}

pub fn load_layout_corpus(path: &Path, source: VocabSource) -> Result<LoadedCorpus> {
    let text = std::fs::read_to_string(path)?;
    parse_layout_corpus(&text, source)
}

// ---------------------------------------------------------------------------
// Ego network JSON
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct TweetJson {
    tokens: Vec<String>,
    #[serde(default)]
    tags: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct UserJson {
    id: String,
    tweets: Vec<TweetJson>,
}

#[derive(Deserialize)]
struct EgoNetJson {
    net_id: String,
    center: String,
    users: Vec<UserJson>,
    edges: Vec<(String, String)>,
}

pub fn parse_ego_corpus(text: &str, source: VocabSource) -> Result<LoadedCorpus> {
    let nets: Vec<EgoNetJson> = serde_json::from_str::<OneOrMany<EgoNetJson>>(text)?.into_vec();

    let (scheme, vocabs) = match source {
        VocabSource::BuildFromData => {
            let scheme = scheme_from_tag_strings(
                nets.iter()
                    .flat_map(|n| n.users.iter())
                    .flat_map(|u| u.tweets.iter())
                    .flat_map(|t| t.tags.iter().flatten())
                    .map(String::as_str),
            )?;
            let vocabs = Vocabularies::build(
                nets.iter()
                    .flat_map(|n| n.users.iter())
                    .flat_map(|u| u.tweets.iter())
                    .flat_map(|t| t.tokens.iter())
                    .map(String::as_str),
            );
            (scheme, vocabs)
        }
        VocabSource::Existing(s, v) => (s.clone(), v.clone()),
    };

    let mut corpus = Corpus::default();
    for net in nets {
        let mut users = Vec::new();
        let mut sentences = Vec::new();
        let mut sentence_user = Vec::new();
        for (ui, u) in net.users.iter().enumerate() {
            if u.tweets.is_empty() {
                return Err(Error::Validation(format!(
                    "network '{}': user '{}' has no tweets",
                    net.net_id, u.id
                )));
            }
            users.push(EgoUser {
                user_id: u.id.clone(),
                is_center: u.id == net.center,
            });
            for tw in &u.tweets {
                let toks = tw
                    .tokens
                    .iter()
                    .map(|s| vocabs.token(s))
                    .collect::<Result<Vec<_>>>()?;
                let tag_ids = match &tw.tags {
                    None => None,
                    Some(ts) => {
                        if ts.len() != tw.tokens.len() {
                            return Err(Error::Validation(format!(
                                "network '{}': user '{}': {} tags for {} tokens",
                                net.net_id,
                                u.id,
                                ts.len(),
                                tw.tokens.len()
                            )));
                        }
                        Some(
                            ts.iter()
                                .map(|t| {
                                    scheme.tag_id(t).ok_or_else(|| {
                                        Error::Validation(format!(
                                            "network '{}': unknown tag string '{t}'",
                                            net.net_id
                                        ))
                                    })
                                })
                                .collect::<Result<Vec<_>>>()?,
                        )
                    }
                };
                sentences.push(Sentence {
                    tokens: toks,
                    tags: tag_ids,
                });
                sentence_user.push(ui);
            }
        }
        let user_index = |id: &str| -> Result<usize> {
            users
                .iter()
                .position(|u| u.user_id == id)
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "network '{}': edge references unknown user '{id}'",
                        net.net_id
                    ))
                })
        };
        let mut edges = Vec::new();
        for (a, b) in &net.edges {
            edges.push((user_index(a)?, user_index(b)?));
        }
        let doc = Document {
            doc_id: net.net_id,
            sentences,
            unit_kind: UnitKind::Sentence,
            payload: DocumentPayload::Ego(EgoPayload {
                users,
                sentence_user,
                edges,
            }),
        };
        doc.validate()?;
        corpus.documents.push(doc);
    }
    Ok(LoadedCorpus {
        corpus,
        scheme,
        vocabs,
    })
}

pub fn load_ego_corpus(path: &Path, source: VocabSource) -> Result<LoadedCorpus> {
    let text = std::fs::read_to_string(path)?;
    parse_ego_corpus(&text, source)
}

// ---------------------------------------------------------------------------
// Pretrained embeddings
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default)]
pub struct EmbeddingCoverage {
    pub hits: usize,
    pub words: usize,
}

impl EmbeddingCoverage {
    pub fn hit_rate(&self) -> f64 {
        if self.words == 0 {
            0.0
        } else {
            self.hits as f64 / self.words as f64
        }
    }
}

/// Loads `word v1 .. vd` lines into a (vocab x d) matrix. Rows for
/// in-vocabulary words are copied (exact surface first, then
/// lowercase); anything else is initialized uniformly in +-0.05.
/// The PAD row stays zero.
pub fn parse_embeddings<F: Scalar>(
    text: &str,
    vocabs: &Vocabularies,
    rng: &mut Stream,
) -> Result<(Tensor<F>, EmbeddingCoverage)> {
    let mut dim: Option<usize> = None;
    let mut table: std::collections::HashMap<&str, Vec<f64>> = std::collections::HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts
            .next()
            .ok_or_else(|| Error::parse(lineno, "missing word"))?;
        let vals: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("bad number '{p}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.is_empty() {
            return Err(Error::parse(lineno, "no vector values"));
        }
        match dim {
            None => dim = Some(vals.len()),
            Some(d) if d != vals.len() => {
                return Err(Error::parse(
                    lineno,
                    format!("inconsistent dimension: expected {d}, got {}", vals.len()),
                ));
            }
            _ => {}
        }
        table.entry(word).or_insert(vals);
    }
    let d = dim.ok_or_else(|| Error::parse(0, "empty embeddings file"))?;

    let v = vocabs.word_count();
    let mut data = vec![F::zero(); v * d];
    let mut cov = EmbeddingCoverage::default();
    for (wi, surface) in vocabs.words().iter().enumerate() {
        if wi == crate::corpus::PAD_ID {
            continue; // stays zero
        }
        let looked = table
            .get(surface.as_str())
            .or_else(|| table.get(surface.to_lowercase().as_str()));
        let real_word = wi >= 2;
        if real_word {
            cov.words += 1;
        }
        match looked {
            Some(vals) if real_word => {
                cov.hits += 1;
                for (j, &x) in vals.iter().enumerate() {
                    data[wi * d + j] = F::from_f64(x);
                }
            }
            _ => {
                for j in 0..d {
                    data[wi * d + j] = F::from_f64(rng.uniform(-0.05, 0.05));
                }
            }
        }
    }
    Ok((Tensor::matrix(v, d, data)?, cov))
}

pub fn load_embeddings<F: Scalar>(
    path: &Path,
    vocabs: &Vocabularies,
    rng: &mut Stream,
) -> Result<(Tensor<F>, EmbeddingCoverage)> {
    let text = std::fs::read_to_string(path)?;
    parse_embeddings(&text, vocabs, rng)
}

// ---------------------------------------------------------------------------
// Stopwords
// ---------------------------------------------------------------------------

/// Newline-separated stopword list; matching is lowercase.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    Ok(parse_stopwords(&std::fs::read_to_string(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    #[test]
    fn empty_file_non_strict_gives_empty_corpus() {
        let l = parse_tagged_corpus("", false, VocabSource::BuildFromData).unwrap();
        assert!(l.corpus.documents.is_empty());
        assert!(parse_tagged_corpus("", true, VocabSource::BuildFromData).is_err());
    }

    #[test]
    fn two_line_file_parses_to_one_sentence() {
        let text = "Washington B-LOC\nvisited O\n\n";
        let l = parse_tagged_corpus(text, false, VocabSource::BuildFromData).unwrap();
        assert_eq!(l.corpus.documents.len(), 1);
        let doc = &l.corpus.documents[0];
        assert_eq!(doc.sentences.len(), 1);
        assert_eq!(doc.sentences[0].tokens.len(), 2);
        assert_eq!(doc.sentences[0].tokens[0].surface, "Washington");
        let tags = doc.sentences[0].tags.as_ref().unwrap();
        assert_eq!(l.scheme.tag_name(tags[0]).unwrap(), "B-LOC");
        assert_eq!(tags[1], 0);
    }

    #[test]
    fn docstart_splits_documents() {
        let text = "a O\n\n-DOCSTART- O\n\nb O\n";
        let l = parse_tagged_corpus(text, false, VocabSource::BuildFromData).unwrap();
        assert_eq!(l.corpus.documents.len(), 2);
        assert_eq!(l.corpus.documents[0].sentences.len(), 1);
        assert_eq!(l.corpus.documents[1].sentences.len(), 1);
    }

    #[test]
    fn ragged_columns_error_carries_line_number() {
        let text = "a O\nb\n";
        let err = parse_tagged_corpus(text, false, VocabSource::BuildFromData).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_tag_under_existing_scheme_is_an_error() {
        let scheme = TagScheme::from_labels(vec!["PER".into()]).unwrap();
        let vocabs = Vocabularies::build(["x"].into_iter());
        let err = parse_tagged_corpus(
            "x B-LOC\n",
            false,
            VocabSource::Existing(&scheme, &vocabs),
        )
        .unwrap_err();
        assert!(err.to_string().contains("B-LOC"), "{err}");
    }

    #[test]
    fn writer_round_trips_token_and_tag_columns() {
        let text = "Washington B-LOC\nvisited O\n\nhome O\n\n-DOCSTART- O\n\nother B-PER\n";
        let l = parse_tagged_corpus(text, false, VocabSource::BuildFromData).unwrap();
        let written = write_tagged_corpus(&l.corpus, &l.scheme).unwrap();
        let re = parse_tagged_corpus(
            &written,
            false,
            VocabSource::Existing(&l.scheme, &l.vocabs),
        )
        .unwrap();
        assert_eq!(l.corpus, re.corpus);
    }

    #[test]
    fn layout_single_box_parses_with_payload() {
        let text = r#"{"doc_id": "d", "pages": [{"page": 0, "width": 100, "height": 50,
            "boxes": [{"id": "b1", "text": "John Smith", "x0": 1, "y0": 2, "x1": 20, "y1": 6,
                       "tags": ["B-NAME", "I-NAME"]}]}]}"#;
        let l = parse_layout_corpus(text, VocabSource::BuildFromData).unwrap();
        let doc = &l.corpus.documents[0];
        assert_eq!(doc.sentences.len(), 1);
        assert_eq!(doc.sentences[0].tokens.len(), 2);
        match &doc.payload {
            DocumentPayload::Layout(boxes) => {
                assert_eq!(boxes[0].box_id, "b1");
                assert_eq!(boxes[0].bbox.x1, 20.0);
            }
            _ => panic!("expected layout payload"),
        }
    }

    #[test]
    fn layout_empty_pages_gives_zero_sentences() {
        let text = r#"{"doc_id": "d", "pages": []}"#;
        let l = parse_layout_corpus(text, VocabSource::BuildFromData).unwrap();
        assert_eq!(l.corpus.documents[0].sentences.len(), 0);
    }

    #[test]
    fn layout_degenerate_box_is_rejected() {
        let text = r#"{"doc_id": "d", "pages": [{"page": 0, "width": 10, "height": 10,
            "boxes": [{"id": "bad", "text": "x", "x0": 5, "y0": 0, "x1": 5, "y1": 2}]}]}"#;
        let err = parse_layout_corpus(text, VocabSource::BuildFromData).unwrap_err();
        assert!(err.to_string().contains("bad"), "{err}");
    }

    #[test]
    fn layout_tag_length_mismatch_names_box() {
        let text = r#"{"doc_id": "d", "pages": [{"page": 0, "width": 10, "height": 10,
            "boxes": [{"id": "b9", "text": "a b", "x0": 0, "y0": 0, "x1": 2, "y1": 2,
                       "tags": ["O"]}]}]}"#;
        let err = parse_layout_corpus(text, VocabSource::BuildFromData).unwrap_err();
        assert!(err.to_string().contains("b9"), "{err}");
    }

    #[test]
    fn ego_network_parses_users_and_edges() {
        let text = r#"{"net_id": "n1", "center": "u1",
            "users": [{"id": "u1", "tweets": [{"tokens": ["hi"], "tags": ["O"]}]},
                      {"id": "u2", "tweets": [{"tokens": ["yo"]}]}],
            "edges": [["u1", "u2"]]}"#;
        let l = parse_ego_corpus(text, VocabSource::BuildFromData).unwrap();
        let doc = &l.corpus.documents[0];
        assert_eq!(doc.sentences.len(), 2);
        match &doc.payload {
            DocumentPayload::Ego(p) => {
                assert_eq!(p.users.len(), 2);
                assert!(p.users[0].is_center);
                assert!(!p.users[1].is_center);
                assert_eq!(p.edges, vec![(0, 1)]);
            }
            _ => panic!("expected ego payload"),
        }
    }

    #[test]
    fn ego_single_user_no_edges_is_valid() {
        let text = r#"{"net_id": "n", "center": "u", "users":
            [{"id": "u", "tweets": [{"tokens": ["a"]}]}], "edges": []}"#;
        let l = parse_ego_corpus(text, VocabSource::BuildFromData).unwrap();
        match &l.corpus.documents[0].payload {
            DocumentPayload::Ego(p) => assert!(p.edges.is_empty()),
            _ => panic!(),
        }
    }

    #[test]
    fn ego_edge_to_unknown_user_is_rejected() {
        let text = r#"{"net_id": "n", "center": "u1", "users":
            [{"id": "u1", "tweets": [{"tokens": ["a"]}]}], "edges": [["u1", "u3"]]}"#;
        let err = parse_ego_corpus(text, VocabSource::BuildFromData).unwrap_err();
        assert!(err.to_string().contains("u3"), "{err}");
    }

    #[test]
    fn embeddings_copy_hits_and_report_coverage() {
        let vocabs = Vocabularies::build(["cat"].into_iter());
        let mut rng = Stream::new(0, Purpose::Init);
        let (m, cov): (Tensor<f64>, _) =
            parse_embeddings("cat 0.1 0.2\n", &vocabs, &mut rng).unwrap();
        assert_eq!(m.shape(), &[3, 2]);
        let cat_row = &m.data()[4..6];
        assert_eq!(cat_row, &[0.1, 0.2]);
        assert_eq!(cov.hits, 1);
        assert_eq!(cov.words, 1);
        assert!((cov.hit_rate() - 1.0).abs() < 1e-12);
        // PAD row stays zero
        assert_eq!(&m.data()[0..2], &[0.0, 0.0]);
    }

    #[test]
    fn embeddings_dimension_mismatch_names_line() {
        let vocabs = Vocabularies::build(["a"].into_iter());
        let mut rng = Stream::new(0, Purpose::Init);
        let err = parse_embeddings::<f64>("a 1 2\nb 1 2 3\n", &vocabs, &mut rng).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn empty_vocab_reports_zero_coverage() {
        let vocabs = Vocabularies::build([].into_iter());
        let mut rng = Stream::new(0, Purpose::Init);
        let (_, cov) = parse_embeddings::<f64>("a 1 2\n", &vocabs, &mut rng).unwrap();
        assert_eq!(cov.hits, 0);
        assert_eq!(cov.words, 0);
        assert_eq!(cov.hit_rate(), 0.0);
    }

    #[test]
    fn stopwords_are_lowercased() {
        let s = parse_stopwords("The\nhe\n\n");
        assert!(s.contains("the"));
        assert!(s.contains("he"));
        assert_eq!(s.len(), 2);
    }
}
