//! Controlled skill ontology.
//!
//! A [`Lexicon`] is a list of [`Concept`]s, each realized by one or more
//! [`SurfaceForm`]s. Forms are token sequences and are globally disjoint: a
//! token sequence names at most one concept, so rewriting a concept with a
//! different form of the same concept never changes which competencies a text
//! expresses.
//!
//! The on-disk format is line oriented:
//!
//! ```text
//! [concept machine_learning]
//! name = Machine Learning
//! canonical = machine learning
//! synonym = statistical learning
//! acronym = ml
//! title = predictive modeler
//! ```
//!
//! Keys `synonym`, `acronym` and `title` may repeat. Form values are
//! tokenized on load; `#` starts a comment line.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;
use crate::text::{is_normalized, tokenize};

const DEFAULT_LEXICON: &str = include_str!("../data/default.lexicon");

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    Canonical,
    Synonym,
    Acronym,
    RoleTitleVariant,
}

impl FormKind {
    pub const ALL: [FormKind; 4] = [
        FormKind::Canonical,
        FormKind::Synonym,
        FormKind::Acronym,
        FormKind::RoleTitleVariant,
    ];

    /// Key used in the lexicon document.
    pub fn tag(self) -> &'static str {
        match self {
            FormKind::Canonical => "canonical",
            FormKind::Synonym => "synonym",
            FormKind::Acronym => "acronym",
            FormKind::RoleTitleVariant => "title",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl fmt::Display for FormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceForm {
    pub tokens: Vec<String>,
    pub kind: FormKind,
}

impl SurfaceForm {
    /// Builds a form from free text, tokenizing it.
    pub fn new(kind: FormKind, text: &str) -> Self {
        Self {
            tokens: tokenize(text),
            kind,
        }
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub name: String,
    pub forms: Vec<SurfaceForm>,
}

impl Concept {
    pub fn canonical(&self) -> Option<&SurfaceForm> {
        self.forms.iter().find(|f| f.kind == FormKind::Canonical)
    }

    /// Indices into `forms` of every form of `kind`, in document order.
    pub fn form_indices(&self, kind: FormKind) -> Vec<usize> {
        self.forms
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Position of a form inside a lexicon: concept index and form index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FormRef {
    pub concept: usize,
    pub form: usize,
}

/// A form occurrence found by [`Lexicon::scan`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FormMatch {
    pub start: usize,
    pub end: usize,
    pub form: FormRef,
}

/// One violated lexicon invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    DuplicateConceptId {
        concept: ConceptId,
    },
    MissingCanonical {
        concept: ConceptId,
    },
    MultipleCanonical {
        concept: ConceptId,
        count: usize,
    },
    EmptyForm {
        concept: ConceptId,
    },
    UnnormalizedToken {
        concept: ConceptId,
        token: String,
    },
    DuplicateFormInConcept {
        concept: ConceptId,
        form: String,
    },
    DuplicateFormAcrossConcepts {
        form: String,
        first: ConceptId,
        second: ConceptId,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateConceptId { concept } => {
                write!(f, "concept id `{concept}` is defined more than once")
            }
            Diagnostic::MissingCanonical { concept } => {
                write!(f, "concept `{concept}` has no canonical form")
            }
            Diagnostic::MultipleCanonical { concept, count } => {
                write!(
                    f,
                    "concept `{concept}` has {count} canonical forms, expected 1"
                )
            }
            Diagnostic::EmptyForm { concept } => {
                write!(f, "concept `{concept}` has a form with no tokens")
            }
            Diagnostic::UnnormalizedToken { concept, token } => {
                write!(f, "concept `{concept}` has unnormalized token `{token}`")
            }
            Diagnostic::DuplicateFormInConcept { concept, form } => {
                write!(f, "concept `{concept}` lists form `{form}` twice")
            }
            Diagnostic::DuplicateFormAcrossConcepts {
                form,
                first,
                second,
            } => {
                write!(
                    f,
                    "form `{form}` is claimed by both `{first}` and `{second}`"
                )
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("lexicon integrity: {}", join_diagnostics(.0))]
    Integrity(Vec<Diagnostic>),
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Immutable skill lexicon with a reverse index from token sequence to form.
#[derive(Clone, Debug)]
pub struct Lexicon {
    concepts: Vec<Concept>,
    reverse_index: HashMap<Vec<String>, FormRef>,
    id_index: HashMap<ConceptId, usize>,
    max_form_len: usize,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.concepts == other.concepts
    }
}

impl Lexicon {
    /// Builds the indexes without checking invariants. When a token sequence
    /// or id repeats, the first occurrence wins; [`Lexicon::validate`] reports
    /// the rest.
    pub fn from_concepts(concepts: Vec<Concept>) -> Self {
        let mut reverse_index = HashMap::new();
        let mut id_index = HashMap::new();
        let mut max_form_len = 0;
        for (ci, concept) in concepts.iter().enumerate() {
            id_index.entry(concept.id.clone()).or_insert(ci);
            for (fi, form) in concept.forms.iter().enumerate() {
                max_form_len = max_form_len.max(form.tokens.len());
                reverse_index.entry(form.tokens.clone()).or_insert(FormRef {
                    concept: ci,
                    form: fi,
                });
            }
        }
        Self {
            concepts,
            reverse_index,
            id_index,
            max_form_len,
        }
    }

    /// Parses a lexicon document, checking syntax only.
    pub fn parse(source: &str) -> Result<Self, LexiconError> {
        parse_document(source).map(Self::from_concepts)
    }

    /// Parses and validates a lexicon document.
    pub fn load(source: &str) -> Result<Self, LexiconError> {
        let lexicon = Self::parse(source)?;
        let diagnostics = lexicon.validate();
        if diagnostics.is_empty() {
            Ok(lexicon)
        } else {
            Err(LexiconError::Integrity(diagnostics))
        }
    }

    /// The shipped 60-concept lexicon.
    pub fn builtin() -> Self {
        Self::load(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    /// Source text of the shipped lexicon.
    pub fn builtin_document() -> &'static str {
        DEFAULT_LEXICON
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concept(&self, index: usize) -> &Concept {
        &self.concepts[index]
    }

    pub fn index_of(&self, id: &ConceptId) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn get(&self, id: &ConceptId) -> Option<&Concept> {
        self.index_of(id).map(|i| &self.concepts[i])
    }

    pub fn form(&self, form: FormRef) -> &SurfaceForm {
        &self.concepts[form.concept].forms[form.form]
    }

    pub fn reverse_index_len(&self) -> usize {
        self.reverse_index.len()
    }

    pub fn max_form_len(&self) -> usize {
        self.max_form_len
    }

    /// Exact lookup of a token sequence.
    pub fn lookup<S: AsRef<str>>(&self, tokens: &[S]) -> Option<FormRef> {
        let key: Vec<String> = tokens.iter().map(|t| t.as_ref().to_owned()).collect();
        self.reverse_index.get(&key).copied()
    }

    /// The concept whose form equals `tokens` exactly, if any.
    pub fn resolve<S: AsRef<str>>(&self, tokens: &[S]) -> Option<&ConceptId> {
        self.lookup(tokens).map(|r| &self.concepts[r.concept].id)
    }

    /// Left-to-right greedy longest-match segmentation of `tokens` into
    /// lexicon forms. Tokens not covered by any form are skipped.
    pub fn scan(&self, tokens: &[String]) -> Vec<FormMatch> {
        let mut matches = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let longest = self.max_form_len.min(tokens.len() - i);
            let hit = (1..=longest).rev().find_map(|len| {
                self.reverse_index
                    .get(&tokens[i..i + len])
                    .map(|r| (len, *r))
            });
            match hit {
                Some((len, form)) => {
                    matches.push(FormMatch {
                        start: i,
                        end: i + len,
                        form,
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
        matches
    }

    /// Checks every invariant and returns one diagnostic per violation.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let mut ids: HashMap<&ConceptId, ()> = HashMap::new();
        let mut owners: HashMap<&[String], &ConceptId> = HashMap::new();
        for concept in &self.concepts {
            if ids.insert(&concept.id, ()).is_some() {
                diags.push(Diagnostic::DuplicateConceptId {
                    concept: concept.id.clone(),
                });
            }
            let canon = concept
                .forms
                .iter()
                .filter(|f| f.kind == FormKind::Canonical)
                .count();
            match canon {
                0 => diags.push(Diagnostic::MissingCanonical {
                    concept: concept.id.clone(),
                }),
                1 => {}
                n => diags.push(Diagnostic::MultipleCanonical {
                    concept: concept.id.clone(),
                    count: n,
                }),
            }
            for form in &concept.forms {
                if form.tokens.is_empty() {
                    diags.push(Diagnostic::EmptyForm {
                        concept: concept.id.clone(),
                    });
                    continue;
                }
                if let Some(bad) = form.tokens.iter().find(|t| !is_normalized(t)) {
                    diags.push(Diagnostic::UnnormalizedToken {
                        concept: concept.id.clone(),
                        token: bad.clone(),
                    });
                }
                match owners.get(form.tokens.as_slice()) {
                    Some(owner) if **owner == concept.id => {
                        diags.push(Diagnostic::DuplicateFormInConcept {
                            concept: concept.id.clone(),
                            form: form.text(),
                        })
                    }
                    Some(owner) => diags.push(Diagnostic::DuplicateFormAcrossConcepts {
                        form: form.text(),
                        first: (*owner).clone(),
                        second: concept.id.clone(),
                    }),
                    None => {
                        owners.insert(&form.tokens, &concept.id);
                    }
                }
            }
        }
        diags
    }

    /// Pairs `(inner, outer)` where form `inner` occurs as a contiguous token
    /// window inside the longer form `outer`. Not an invariant violation, but
    /// such a lexicon lets keyword matching credit a concept through another
    /// form.
    pub fn embedded_forms(&self) -> Vec<(String, String)> {
        let all: Vec<&SurfaceForm> = self.concepts.iter().flat_map(|c| &c.forms).collect();
        let mut out = Vec::new();
        for outer in &all {
            for inner in &all {
                let (o, i) = (&outer.tokens, &inner.tokens);
                if i.len() < o.len()
                    && !i.is_empty()
                    && o.windows(i.len()).any(|w| w == i.as_slice())
                {
                    out.push((inner.text(), outer.text()));
                }
            }
        }
        out
    }

    /// Serializes to the lexicon document format.
    pub fn to_document(&self) -> String {
        let mut out = String::from("# frictionlab lexicon\n");
        for concept in &self.concepts {
            out.push_str(&format!(
                "\n[concept {}]\nname = {}\n",
                concept.id, concept.name
            ));
            for form in &concept.forms {
                out.push_str(&format!("{} = {}\n", form.kind.tag(), form.text()));
            }
        }
        out
    }

    /// Content hash of the serialized lexicon.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_document().as_bytes())
    }
}

/// Parses and validates a lexicon document.
pub fn load_lexicon(source: &str) -> Result<Lexicon, LexiconError> {
    Lexicon::load(source)
}

fn parse_document(source: &str) -> Result<Vec<Concept>, LexiconError> {
    let mut concepts: Vec<Concept> = Vec::new();
    let mut name_seen = false;
    let finish = |concepts: &[Concept], name_seen: bool, line: usize| match concepts.last() {
        Some(c) if !name_seen => Err(LexiconError::Schema {
            line,
            message: format!("concept `{}` has no `name`", c.id),
        }),
        _ => Ok(()),
    };
    for (lineno, raw) in source.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let inner = rest.strip_suffix(']').ok_or_else(|| LexiconError::Schema {
                line: line_no,
                message: "unterminated block header".into(),
            })?;
            let id = inner
                .strip_prefix("concept")
                .map(str::trim)
                .filter(|id| !id.is_empty() && !id.contains(char::is_whitespace))
                .ok_or_else(|| LexiconError::Schema {
                    line: line_no,
                    message: format!("expected `[concept <id>]`, found `{line}`"),
                })?;
            finish(&concepts, name_seen, line_no)?;
            concepts.push(Concept {
                id: ConceptId::new(id),
                name: String::new(),
                forms: Vec::new(),
            });
            name_seen = false;
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| LexiconError::Schema {
            line: line_no,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let concept = concepts.last_mut().ok_or_else(|| LexiconError::Schema {
            line: line_no,
            message: format!("`{key}` outside of a concept block"),
        })?;
        if key == "name" {
            if name_seen {
                return Err(LexiconError::Schema {
                    line: line_no,
                    message: format!("concept `{}` has two names", concept.id),
                });
            }
            concept.name = value.to_owned();
            name_seen = true;
            continue;
        }
        let kind = FormKind::from_tag(key).ok_or_else(|| LexiconError::Schema {
            line: line_no,
            message: format!("unknown key `{key}`"),
        })?;
        let form = SurfaceForm::new(kind, value);
        if form.tokens.is_empty() {
            return Err(LexiconError::Schema {
                line: line_no,
                message: format!("empty `{key}` form in concept `{}`", concept.id),
            });
        }
        concept.forms.push(form);
    }
    finish(&concepts, name_seen, source.lines().count())?;
    Ok(concepts)
}
