//! Layout annotations: concept, labeled component boxes and optional
//! spatial relations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in normalized [0,1] coordinates, top-left / bottom-right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub x_tl: f64,
    pub y_tl: f64,
    pub x_br: f64,
    pub y_br: f64,
}

impl Box2 {
    pub fn new(x_tl: f64, y_tl: f64, x_br: f64, y_br: f64) -> Self {
        Self { x_tl, y_tl, x_br, y_br }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_tl < self.x_br && self.y_tl < self.y_br) {
            return Err(Error::argument(format!(
                "invalid box: top-left ({}, {}) must precede bottom-right ({}, {})",
                self.x_tl, self.y_tl, self.x_br, self.y_br
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x_br - self.x_tl) * (self.y_br - self.y_tl)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_tl && x <= self.x_br && y >= self.y_tl && y <= self.y_br
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_tl + self.x_br) / 2.0, (self.y_tl + self.y_br) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub label: String,
    /// [x_tl, y_tl, x_br, y_br] normalized to [0,1].
    pub box_: Box2,
}

// JSON schema uses "box": [x_tl, y_tl, x_br, y_br]
#[derive(Serialize, Deserialize)]
struct ComponentWire {
    label: String,
    #[serde(rename = "box")]
    box_: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutAnnotation {
    pub id: String,
    pub concept: String,
    pub components: Vec<Component>,
    /// (label_a, label_b, relation)
    pub relations: Vec<(String, String, String)>,
}

#[derive(Serialize, Deserialize)]
struct LayoutWire {
    id: String,
    concept: String,
    components: Vec<ComponentWire>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    relations: Vec<(String, String, String)>,
}

impl LayoutAnnotation {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::argument("layout has no components"));
        }
        let mut labels: BTreeSet<&str> = BTreeSet::new();
        for c in &self.components {
            if c.label.is_empty() {
                return Err(Error::argument("component label must be non-empty"));
            }
            c.box_.validate()?;
            labels.insert(&c.label);
        }
        // relations reference known labels and form no directed cycle
        let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (a, b, _) in &self.relations {
            for l in [a, b] {
                if !labels.contains(l.as_str()) {
                    return Err(Error::argument(format!(
                        "relation references unknown label {l:?}"
                    )));
                }
            }
            adjacency.entry(a).or_default().push(b);
        }
        // DFS cycle check
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        fn visit<'a>(
            node: &'a str,
            adjacency: &BTreeMap<&'a str, Vec<&'a str>>,
            state: &mut BTreeMap<&'a str, u8>,
        ) -> bool {
            match state.get(node) {
                Some(1) => return false, // back edge
                Some(2) => return true,
                _ => {}
            }
            state.insert(node, 1);
            for next in adjacency.get(node).into_iter().flatten() {
                if !visit(next, adjacency, state) {
                    return false;
                }
            }
            state.insert(node, 2);
            true
        }
        for &node in adjacency.keys() {
            if !visit(node, &adjacency, &mut state) {
                return Err(Error::argument("relations form a directed cycle"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: LayoutWire = serde_json::from_str(text)
            .map_err(|e| Error::argument(format!("layout json: {e}")))?;
        let layout = Self {
            id: wire.id,
            concept: wire.concept,
            components: wire
                .components
                .into_iter()
                .map(|c| Component {
                    label: c.label,
                    box_: Box2::new(c.box_[0], c.box_[1], c.box_[2], c.box_[3]),
                })
                .collect(),
            relations: wire.relations,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn to_json(&self) -> String {
        let wire = LayoutWire {
            id: self.id.clone(),
            concept: self.concept.clone(),
            components: self
                .components
                .iter()
                .map(|c| ComponentWire {
                    label: c.label.clone(),
                    box_: [c.box_.x_tl, c.box_.y_tl, c.box_.x_br, c.box_.y_br],
                })
                .collect(),
            relations: self.relations.clone(),
        };
        serde_json::to_string_pretty(&wire).expect("layout serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout_json() -> &'static str {
        r#"{
            "id": "g1",
            "concept": "fire in a house",
            "components": [
                {"label": "house", "box": [0.1, 0.1, 0.9, 0.9]},
                {"label": "fire", "box": [0.3, 0.4, 0.7, 0.8]}
            ],
            "relations": [["fire", "house", "inside"]]
        }"#
    }

    #[test]
    fn parse_and_round_trip() {
        let l = LayoutAnnotation::from_json(layout_json()).unwrap();
        assert_eq!(l.components.len(), 2);
        assert_eq!(l.relations.len(), 1);
        let back = LayoutAnnotation::from_json(&l.to_json()).unwrap();
        assert_eq!(l, back);
    }

    #[test]
    fn invalid_box_rejected() {
        let bad = r#"{"id":"x","concept":"c","components":[{"label":"a","box":[0.5,0.1,0.5,0.9]}]}"#;
        assert!(LayoutAnnotation::from_json(bad).is_err());
    }

    #[test]
    fn unknown_relation_label_rejected() {
        let bad = r#"{"id":"x","concept":"c",
            "components":[{"label":"a","box":[0.0,0.0,1.0,1.0]}],
            "relations":[["a","ghost","left-of"]]}"#;
        assert!(LayoutAnnotation::from_json(bad).is_err());
    }

    #[test]
    fn relation_cycle_rejected() {
        let bad = r#"{"id":"x","concept":"c",
            "components":[{"label":"a","box":[0.0,0.0,0.5,1.0]},{"label":"b","box":[0.5,0.0,1.0,1.0]}],
            "relations":[["a","b","left-of"],["b","a","left-of"]]}"#;
        assert!(LayoutAnnotation::from_json(bad).is_err());
    }
}
