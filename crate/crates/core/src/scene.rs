//! Perceived experimental settings.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub category: String,
    pub saliency: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub label: String,
    pub from: String,
    pub to: String,
}

/// A grounded observation such as `shines(bulb)` or `equal(energy, before, after)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Observation {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        Observation { predicate: predicate.to_string(), args: args.iter().map(|a| a.to_string()).collect() }
    }

    /// Whether the observation is about `entity` (its first argument).
    pub fn about(&self, entity: &str) -> bool {
        self.args.first().is_some_and(|a| a == entity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub name: String,
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    pub observations: Vec<Observation>,
}

impl SceneGraph {
    pub fn new(name: &str) -> Self {
        SceneGraph { name: name.to_string(), entities: Vec::new(), relations: Vec::new(), observations: Vec::new() }
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// Entities related to `id` by any relation, in relation order.
    pub fn neighbours(&self, id: &str) -> Vec<&str> {
        let mut out = Vec::new();
        for r in &self.relations {
            let other = if r.from == id {
                &r.to
            } else if r.to == id {
                &r.from
            } else {
                continue;
            };
            if !out.contains(&other.as_str()) {
                out.push(other.as_str());
            }
        }
        out
    }

    pub fn observations_of(&self, entity: &str) -> impl Iterator<Item = &Observation> {
        let entity = entity.to_string();
        self.observations.iter().filter(move |o| o.about(&entity))
    }
}
