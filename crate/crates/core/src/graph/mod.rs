//! Collaborative unified graph: users, items and knowledge-graph entities in
//! one id space, joined by a reserved "interact" relation.
//!
//! Node ids are laid out as `[users | items | unaligned entities]`. An item
//! that is aligned to a KG entity *is* that entity's node.

mod sample;

use std::collections::BTreeMap;

pub use sample::{route_count, sample_neighborhood, ChainRoute, NeighborhoodSample};

use crate::error::{Error, Result};

pub type NodeId = u32;
pub type RelationId = u32;

/// A KG edge over entity ids (not yet merged into the node space).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: u32,
    pub relation: RelationId,
    pub tail: u32,
}

impl Triple {
    pub fn new(head: u32, relation: RelationId, tail: u32) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    User,
    Item,
    Entity,
}

/// Sizes of the id spaces that feed a [`UnifiedGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeSpace {
    pub users: usize,
    pub items: usize,
    pub entities: usize,
    /// KG relations only; the interact relation is allocated after them.
    pub relations: usize,
}

#[derive(Debug, Clone)]
pub struct UnifiedGraph {
    space: NodeSpace,
    entity_node: Vec<NodeId>,
    roles: Vec<NodeRole>,
    offsets: Vec<usize>,
    edges: Vec<(RelationId, NodeId)>,
}

impl UnifiedGraph {
    pub fn space(&self) -> NodeSpace {
        self.space
    }

    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    /// KG relations plus the interact relation.
    pub fn relation_count(&self) -> usize {
        self.space.relations + 1
    }

    pub fn interact_relation(&self) -> RelationId {
        self.space.relations as RelationId
    }

    pub fn user_node(&self, user: u32) -> NodeId {
        debug_assert!((user as usize) < self.space.users);
        user
    }

    pub fn item_node(&self, item: u32) -> NodeId {
        debug_assert!((item as usize) < self.space.items);
        (self.space.users as u32) + item
    }

    pub fn entity_node(&self, entity: u32) -> NodeId {
        self.entity_node[entity as usize]
    }

    pub fn role(&self, node: NodeId) -> NodeRole {
        self.roles[node as usize]
    }

    /// Adjacency of `node`, sorted by `(relation, neighbor)`.
    pub fn neighbors(&self, node: NodeId) -> Result<&[(RelationId, NodeId)]> {
        if (node as usize) >= self.node_count() {
            return Err(Error::Graph(format!(
                "node {node} out of range (graph has {} nodes)",
                self.node_count()
            )));
        }
        Ok(self.adjacency(node))
    }

    pub(crate) fn adjacency(&self, node: NodeId) -> &[(RelationId, NodeId)] {
        let n = node as usize;
        &self.edges[self.offsets[n]..self.offsets[n + 1]]
    }

    pub fn has_edge(&self, from: NodeId, relation: RelationId, to: NodeId) -> bool {
        (from as usize) < self.node_count()
            && self.adjacency(from).binary_search(&(relation, to)).is_ok()
    }

    /// Number of stored directed edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Merges positive user–item interactions with KG triples through the
/// item→entity alignment.
///
/// Interactions are `(user index, item index)`; triples use entity indices.
/// Every edge is stored in both directions, deduplicated, and each adjacency
/// list is sorted.
pub fn build_unified_graph(
    space: NodeSpace,
    interactions: &[(u32, u32)],
    triples: &[Triple],
    alignment: &BTreeMap<u32, u32>,
) -> Result<UnifiedGraph> {
    let mut entity_node = vec![NodeId::MAX; space.entities];
    for (&item, &entity) in alignment {
        if item as usize >= space.items {
            return Err(Error::Graph(format!(
                "alignment names item {item}, but only {} items exist",
                space.items
            )));
        }
        if entity as usize >= space.entities {
            return Err(Error::Graph(format!(
                "item {item} is aligned to nonexistent entity {entity} ({} entities)",
                space.entities
            )));
        }
        let slot = &mut entity_node[entity as usize];
        if *slot != NodeId::MAX {
            return Err(Error::Graph(format!(
                "item {item} is aligned to entity {entity}, which is already aligned to item {}",
                *slot as usize - space.users
            )));
        }
        *slot = (space.users + item as usize) as NodeId;
    }

    let mut roles = Vec::with_capacity(space.users + space.items + space.entities);
    roles.resize(space.users, NodeRole::User);
    roles.resize(space.users + space.items, NodeRole::Item);
    for slot in entity_node.iter_mut() {
        if *slot == NodeId::MAX {
            *slot = roles.len() as NodeId;
            roles.push(NodeRole::Entity);
        }
    }

    let interact = space.relations as RelationId;
    let mut directed: Vec<(NodeId, RelationId, NodeId)> =
        Vec::with_capacity(2 * (interactions.len() + triples.len()));
    for &(user, item) in interactions {
        if user as usize >= space.users || item as usize >= space.items {
            return Err(Error::Graph(format!(
                "interaction ({user}, {item}) outside {} users × {} items",
                space.users, space.items
            )));
        }
        let (u, v) = (user, (space.users as u32) + item);
        directed.push((u, interact, v));
        directed.push((v, interact, u));
    }
    for t in triples {
        if t.head as usize >= space.entities || t.tail as usize >= space.entities {
            return Err(Error::Graph(format!(
                "triple ({}, {}, {}) references an entity ≥ {}",
                t.head, t.relation, t.tail, space.entities
            )));
        }
        if t.relation as usize >= space.relations {
            return Err(Error::Graph(format!(
                "triple ({}, {}, {}) has relation ≥ {}",
                t.head, t.relation, t.tail, space.relations
            )));
        }
        let (h, r, tl) = (
            entity_node[t.head as usize],
            t.relation,
            entity_node[t.tail as usize],
        );
        directed.push((h, r, tl));
        directed.push((tl, r, h));
    }
    directed.sort_unstable();
    directed.dedup();

    let mut offsets = vec![0usize; roles.len() + 1];
    for &(from, _, _) in &directed {
        offsets[from as usize + 1] += 1;
    }
    for i in 0..roles.len() {
        offsets[i + 1] += offsets[i];
    }
    let edges = directed.into_iter().map(|(_, r, to)| (r, to)).collect();

    Ok(UnifiedGraph {
        space,
        entity_node,
        roles,
        offsets,
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(users: usize, items: usize, entities: usize, relations: usize) -> NodeSpace {
        NodeSpace {
            users,
            items,
            entities,
            relations,
        }
    }

    #[test]
    fn minimal_graph_stores_interaction_both_ways() {
        let g = build_unified_graph(space(1, 1, 0, 0), &[(0, 0)], &[], &BTreeMap::new()).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.interact_relation(), 0);
        assert_eq!(g.neighbors(0).unwrap(), &[(0, 1)]);
        assert_eq!(g.neighbors(1).unwrap(), &[(0, 0)]);
    }

    #[test]
    fn aligned_item_merges_with_entity() {
        // u0 = node 0, i0/e0 = node 1, e1 = node 2; r0 = 0, interact = 1.
        let alignment = BTreeMap::from([(0, 0)]);
        let g = build_unified_graph(
            space(1, 1, 2, 1),
            &[(0, 0)],
            &[Triple::new(0, 0, 1)],
            &alignment,
        )
        .unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.entity_node(0), g.item_node(0));
        assert_eq!(g.entity_node(1), 2);
        let interact = g.interact_relation();
        assert_eq!(interact, 1);
        assert_eq!(g.neighbors(0).unwrap(), &[(interact, 1)]);
        assert_eq!(g.neighbors(1).unwrap(), &[(0, 2), (interact, 0)]);
        assert_eq!(g.neighbors(2).unwrap(), &[(0, 1)]);
        assert_eq!(g.role(2), NodeRole::Entity);
    }

    #[test]
    fn duplicates_and_self_loops_are_stored_once() {
        let t = Triple::new(0, 0, 1);
        let g = build_unified_graph(
            space(0, 0, 2, 1),
            &[],
            &[t, t, Triple::new(1, 0, 1)],
            &BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(g.neighbors(0).unwrap(), &[(0, 1)]);
        assert_eq!(g.neighbors(1).unwrap(), &[(0, 0), (0, 1)]);
    }

    #[test]
    fn isolated_and_out_of_range_nodes() {
        let g = build_unified_graph(space(2, 1, 0, 0), &[(0, 0)], &[], &BTreeMap::new()).unwrap();
        assert!(g.neighbors(1).unwrap().is_empty());
        assert!(g.neighbors(3).is_err());
    }

    #[test]
    fn bad_alignment_names_the_item() {
        let err = build_unified_graph(
            space(1, 2, 1, 0),
            &[],
            &[],
            &BTreeMap::from([(1, 5)]),
        )
        .unwrap_err();
        assert!(err.to_string().contains("item 1"), "{err}");

        let err = build_unified_graph(
            space(1, 2, 1, 0),
            &[],
            &[],
            &BTreeMap::from([(0, 0), (1, 0)]),
        )
        .unwrap_err();
        assert!(err.to_string().contains("item 1"), "{err}");
    }

    #[test]
    fn storage_is_symmetric() {
        let triples: Vec<Triple> = (0..20)
            .map(|i| Triple::new(i % 7, i % 3, (i * 5 + 1) % 9))
            .collect();
        let interactions: Vec<(u32, u32)> = (0..15).map(|i| (i % 4, (i * 3) % 5)).collect();
        let alignment = BTreeMap::from([(0, 2), (1, 4), (3, 8)]);
        let g = build_unified_graph(space(4, 5, 9, 3), &interactions, &triples, &alignment)
            .unwrap();
        for h in 0..g.node_count() as NodeId {
            for &(r, t) in g.neighbors(h).unwrap() {
                assert!(g.has_edge(t, r, h), "missing reverse of ({h}, {r}, {t})");
            }
            let adj = g.neighbors(h).unwrap();
            assert!(adj.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
