//! Dynamic set cover with frequency bound `r`: sets become vertices,
//! elements become hyperedges over the sets containing them. The vertices of
//! a maximal matching cover every element and number at most `r · OPT`,
//! since the matched elements need pairwise distinct sets in any cover.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::dynamic::{BatchReport, Engine, EngineConfig, EngineError};
use crate::types::{EdgeId, Hyperedge, VertexId};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SetCoverError {
    #[error("element {0} belongs to no set")]
    ElementInNoSet(u64),
    #[error("element {element} belongs to {sets} sets, frequency bound is {rank}")]
    TooManySets { element: u64, sets: usize, rank: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Maps set names to vertex ids in first-seen order.
#[derive(Clone, Debug, Default)]
pub struct SetRegistry {
    ids: FxHashMap<String, VertexId>,
    names: Vec<String>,
}

impl SetRegistry {
    pub fn intern(&mut self, name: &str) -> VertexId {
        if let Some(&v) = self.ids.get(name) {
            return v;
        }
        let v = VertexId(self.names.len() as u64);
        self.ids.insert(name.to_string(), v);
        self.names.push(name.to_string());
        v
    }

    pub fn name(&self, v: VertexId) -> &str {
        &self.names[v.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Static instance: element id → names of the sets containing it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SetCoverInstance {
    pub membership: BTreeMap<u64, Vec<String>>,
}

impl SetCoverInstance {
    /// One hyperedge per element (id = element id) over its sets.
    pub fn to_hypergraph(&self, registry: &mut SetRegistry) -> Result<Vec<Hyperedge>, SetCoverError> {
        self.membership
            .iter()
            .map(|(&x, sets)| element_edge(registry, x, sets))
            .collect()
    }

    /// Largest number of sets any element belongs to.
    pub fn frequency(&self) -> usize {
        self.membership.values().map(Vec::len).max().unwrap_or(0)
    }
}

fn element_edge(registry: &mut SetRegistry, element: u64, sets: &[String]) -> Result<Hyperedge, SetCoverError> {
    Hyperedge::new(EdgeId(element), sets.iter().map(|s| registry.intern(s)))
        .map_err(|_| SetCoverError::ElementInNoSet(element))
}

pub struct DynamicSetCover {
    engine: Engine,
    registry: SetRegistry,
}

impl DynamicSetCover {
    pub fn new(rank: usize, seed: u64) -> Result<Self, SetCoverError> {
        Ok(DynamicSetCover {
            engine: Engine::new(EngineConfig::new(rank, seed))?,
            registry: SetRegistry::default(),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn registry(&self) -> &SetRegistry {
        &self.registry
    }

    pub fn insert_elements(&mut self, elements: &[(u64, Vec<String>)]) -> Result<BatchReport, SetCoverError> {
        let rank = self.engine.config().rank;
        let mut edges = Vec::with_capacity(elements.len());
        for (x, sets) in elements {
            let e = element_edge(&mut self.registry, *x, sets)?;
            if e.rank() > rank {
                return Err(SetCoverError::TooManySets {
                    element: *x,
                    sets: e.rank(),
                    rank,
                });
            }
            edges.push(e);
        }
        Ok(self.engine.insert_edges(edges)?)
    }

    pub fn delete_elements(&mut self, elements: &[u64]) -> Result<BatchReport, SetCoverError> {
        let ids: Vec<EdgeId> = elements.iter().copied().map(EdgeId).collect();
        Ok(self.engine.delete_edges(&ids)?)
    }

    /// Vertex ids of all matched sets, ascending.
    pub fn cover_ids(&self) -> Vec<VertexId> {
        let mut out: Vec<VertexId> = self
            .engine
            .matched_edges()
            .into_iter()
            .flat_map(|m| {
                self.engine
                    .structure()
                    .record(m)
                    .expect("matched edge is stored")
                    .edge
                    .vertices()
                    .to_vec()
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Names of the covering sets, sorted.
    pub fn cover(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .cover_ids()
            .into_iter()
            .map(|v| self.registry.name(v).to_string())
            .collect();
        names.sort();
        names
    }

    /// Whether every live element has a set in the current cover.
    pub fn is_valid_cover(&self) -> bool {
        let s = self.engine.structure();
        s.edge_ids().into_iter().all(|e| {
            s.record(e)
                .expect("listed edge is stored")
                .edge
                .vertices()
                .iter()
                .any(|v| s.is_matched(*v).is_some())
        })
    }
}
