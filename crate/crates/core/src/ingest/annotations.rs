//! NSRR-style scored-event documents.
//!
//! ```xml
//! <PSGAnnotation><ScoredEvents>
//!   <ScoredEvent>
//!     <EventType>Stages|Stages</EventType>
//!     <EventConcept>Stage 4 sleep|4</EventConcept>
//!     <Start>600</Start><Duration>30</Duration>
//!   </ScoredEvent>
//! </ScoredEvents></PSGAnnotation>
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Stage;

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("malformed annotation document: {0}")]
    Markup(String),
    #[error("scored event #{index}: missing <{field}>")]
    MissingField { index: usize, field: &'static str },
    #[error("scored event #{index}: invalid {field} {text:?}")]
    InvalidNumber {
        index: usize,
        field: &'static str,
        text: String,
    },
    #[error("scored event #{index}: negative {field} {value}")]
    Negative {
        index: usize,
        field: &'static str,
        value: f64,
    },
    #[error("invalid concept map: {0}")]
    ConceptMap(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Stage,
    Arousal,
    ApneaObstructive,
    ApneaCentral,
    ApneaMixed,
    Hypopnea,
    Desaturation,
    Other,
}

impl EventKind {
    pub fn is_respiratory(self) -> bool {
        matches!(
            self,
            EventKind::ApneaObstructive
                | EventKind::ApneaCentral
                | EventKind::ApneaMixed
                | EventKind::Hypopnea
        )
    }
}

/// Stage as scored, before N4 is folded into N3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnnotatedStage {
    W,
    N1,
    N2,
    N3,
    N4,
    #[serde(rename = "REM")]
    Rem,
}

impl AnnotatedStage {
    pub fn merged(self) -> Stage {
        match self {
            AnnotatedStage::W => Stage::W,
            AnnotatedStage::N1 => Stage::N1,
            AnnotatedStage::N2 => Stage::N2,
            AnnotatedStage::N3 | AnnotatedStage::N4 => Stage::N3,
            AnnotatedStage::Rem => Stage::Rem,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEvent {
    pub kind: EventKind,
    pub start: f64,
    pub duration: f64,
    pub stage: Option<AnnotatedStage>,
    pub concept: String,
}

impl ScoredEvent {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Target {
    kind: EventKind,
    stage: Option<AnnotatedStage>,
}

/// Concept-string to event-kind table.
#[derive(Debug, Clone)]
pub struct ConceptMap {
    entries: HashMap<String, Target>,
}

#[derive(Deserialize)]
struct ConceptFile {
    concepts: HashMap<String, String>,
}

impl ConceptMap {
    /// The shipped table covering the common NSRR vocabularies.
    pub fn builtin() -> Self {
        Self::from_toml(include_str!("../../data/concept_map.toml"))
            .expect("shipped concept map parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, AnnotationError> {
        let file: ConceptFile =
            toml::from_str(text).map_err(|e| AnnotationError::ConceptMap(e.to_string()))?;
        let mut entries = HashMap::new();
        for (concept, target) in file.concepts {
            let t = parse_target(&target)
                .ok_or_else(|| AnnotationError::ConceptMap(format!("unknown kind '{target}'")))?;
            entries.insert(concept.trim().to_lowercase(), t);
        }
        Ok(ConceptMap { entries })
    }

    fn lookup(&self, concept: &str) -> Target {
        let full = concept.trim().to_lowercase();
        let head = full.split('|').next().unwrap_or("").trim().to_string();
        self.entries
            .get(&head)
            .or_else(|| self.entries.get(&full))
            .copied()
            .unwrap_or(Target {
                kind: EventKind::Other,
                stage: None,
            })
    }
}

fn parse_target(s: &str) -> Option<Target> {
    let s = s.trim();
    if let Some(stage) = s.strip_prefix("stage:") {
        let stage = match stage.trim().to_ascii_uppercase().as_str() {
            "W" => AnnotatedStage::W,
            "N1" => AnnotatedStage::N1,
            "N2" => AnnotatedStage::N2,
            "N3" => AnnotatedStage::N3,
            "N4" => AnnotatedStage::N4,
            "REM" => AnnotatedStage::Rem,
            _ => return None,
        };
        return Some(Target {
            kind: EventKind::Stage,
            stage: Some(stage),
        });
    }
    let kind = match s {
        "arousal" => EventKind::Arousal,
        "apnea_obstructive" => EventKind::ApneaObstructive,
        "apnea_central" => EventKind::ApneaCentral,
        "apnea_mixed" => EventKind::ApneaMixed,
        "hypopnea" => EventKind::Hypopnea,
        "desaturation" => EventKind::Desaturation,
        "other" => EventKind::Other,
        _ => return None,
    };
    Some(Target { kind, stage: None })
}

/// Parse every `<ScoredEvent>` element of an annotation document.
pub fn parse_annotations(document: &str, map: &ConceptMap) -> Result<Vec<ScoredEvent>, AnnotationError> {
    let doc = roxmltree::Document::parse(document)
        .map_err(|e| AnnotationError::Markup(e.to_string()))?;
    let mut events = Vec::new();
    for (index, node) in doc
        .descendants()
        .filter(|n| n.has_tag_name("ScoredEvent"))
        .enumerate()
    {
        let child = |name: &str| {
            node.children()
                .find(|c| c.has_tag_name(name))
                .map(|c| c.text().unwrap_or("").trim().to_string())
        };
        let concept = child("EventConcept").ok_or(AnnotationError::MissingField {
            index,
            field: "EventConcept",
        })?;
        let number = |field: &'static str| -> Result<f64, AnnotationError> {
            let text = child(field).ok_or(AnnotationError::MissingField { index, field })?;
            let v: f64 = text.parse().map_err(|_| AnnotationError::InvalidNumber {
                index,
                field,
                text: text.clone(),
            })?;
            if !v.is_finite() {
                return Err(AnnotationError::InvalidNumber { index, field, text });
            }
            if v < 0.0 {
                return Err(AnnotationError::Negative {
                    index,
                    field,
                    value: v,
                });
            }
            Ok(v)
        };
        let start = number("Start")?;
        let duration = number("Duration")?;
        let target = map.lookup(&concept);
        events.push(ScoredEvent {
            kind: target.kind,
            start,
            duration,
            stage: target.stage,
            concept,
        });
    }
    Ok(events)
}
