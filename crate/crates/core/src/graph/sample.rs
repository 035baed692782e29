use rand::Rng;

use super::{NodeId, RelationId, UnifiedGraph};

/// A root-anchored path `[node, relation, node, …, relation, node]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainRoute {
    elements: Vec<u32>,
}

impl ChainRoute {
    /// `elements` must have odd length ≥ 3.
    pub fn new(elements: Vec<u32>) -> Self {
        assert!(
            elements.len() >= 3 && elements.len() % 2 == 1,
            "chain route needs 2·depth+1 elements, got {}",
            elements.len()
        );
        ChainRoute { elements }
    }

    pub fn elements(&self) -> &[u32] {
        &self.elements
    }

    pub fn depth(&self) -> usize {
        self.elements.len() / 2
    }

    pub fn root(&self) -> NodeId {
        self.elements[0]
    }

    pub fn first_hop(&self) -> NodeId {
        self.elements[2]
    }

    pub fn terminal(&self) -> NodeId {
        self.elements[self.elements.len() - 1]
    }

    /// `(from, relation, to)` hops in order.
    pub fn hops(&self) -> impl Iterator<Item = (NodeId, RelationId, NodeId)> + '_ {
        self.elements
            .windows(3)
            .step_by(2)
            .map(|w| (w[0], w[1], w[2]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodSample {
    pub root: NodeId,
    /// Ordered by depth, then by sampling order within the layer.
    pub routes: Vec<ChainRoute>,
    pub layer_size: usize,
    pub max_depth: usize,
}

impl NeighborhoodSample {
    pub fn empty(root: NodeId, layer_size: usize, max_depth: usize) -> Self {
        NeighborhoodSample {
            root,
            routes: Vec::new(),
            layer_size,
            max_depth,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }
}

/// Expected route count for a non-isolated root.
pub fn route_count(depth: usize, size: usize) -> usize {
    (1..=depth).map(|d| size.pow(d as u32)).sum()
}

/// Grows a sampling tree of fan-out `size` and depth `depth` from `root`,
/// drawing neighbors uniformly with replacement, and returns every
/// root-to-node path as a route.
///
/// `exclude` names a `(user node, item node)` pair whose interact edge is
/// never traversed in either direction. `depth == 0` or `size == 0` yields no
/// routes.
pub fn sample_neighborhood<R: Rng + ?Sized>(
    graph: &UnifiedGraph,
    root: NodeId,
    depth: usize,
    size: usize,
    rng: &mut R,
    exclude: Option<(NodeId, NodeId)>,
) -> NeighborhoodSample {
    assert!(
        (root as usize) < graph.node_count(),
        "root {root} out of range"
    );
    let mut sample = NeighborhoodSample::empty(root, size, depth);
    if depth == 0 || size == 0 {
        return sample;
    }
    let interact = graph.interact_relation();
    let banned = |node: NodeId| -> Option<(RelationId, NodeId)> {
        let (a, b) = exclude?;
        if node == a {
            Some((interact, b))
        } else if node == b {
            Some((interact, a))
        } else {
            None
        }
    };

    if graph.adjacency(root).is_empty()
        || (graph.adjacency(root).len() == 1 && banned(root) == Some(graph.adjacency(root)[0]))
    {
        return sample;
    }

    let mut routes: Vec<ChainRoute> = Vec::with_capacity(route_count(depth, size));
    // Layer 0 is the bare root; later layers index into `routes`.
    let mut frontier: Vec<Option<usize>> = vec![None];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * size);
        for parent in frontier {
            let (node, prefix): (NodeId, &[u32]) = match parent {
                None => (root, std::slice::from_ref(&sample.root)),
                Some(i) => (routes[i].terminal(), routes[i].elements()),
            };
            let adjacency = graph.adjacency(node);
            let skip = banned(node).and_then(|e| adjacency.binary_search(&e).ok());
            let available = adjacency.len() - usize::from(skip.is_some());
            debug_assert!(available > 0, "non-root frontier node reached via an edge");
            let mut prefix = prefix.to_vec();
            let base_len = prefix.len();
            let mut children = Vec::with_capacity(size);
            for _ in 0..size {
                let mut k = rng.random_range(0..available);
                if let Some(s) = skip {
                    if k >= s {
                        k += 1;
                    }
                }
                let (relation, neighbor) = adjacency[k];
                prefix.truncate(base_len);
                prefix.push(relation);
                prefix.push(neighbor);
                children.push(ChainRoute {
                    elements: prefix.clone(),
                });
            }
            for child in children {
                next.push(Some(routes.len()));
                routes.push(child);
            }
        }
        frontier = next;
    }
    sample.routes = routes;
    sample
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::SeedableRng;

    use super::*;
    use crate::graph::{build_unified_graph, NodeSpace, Triple};
    use crate::rng::Rng as ChaCha;

    fn toy_graph() -> UnifiedGraph {
        let triples: Vec<Triple> = (0..12)
            .map(|i| Triple::new(i % 6, i % 2, (i * 5 + 2) % 8))
            .collect();
        let interactions = vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 0)];
        let alignment = BTreeMap::from([(0, 0), (1, 1), (2, 2)]);
        build_unified_graph(
            NodeSpace {
                users: 4,
                items: 3,
                entities: 8,
                relations: 2,
            },
            &interactions,
            &triples,
            &alignment,
        )
        .unwrap()
    }

    #[test]
    fn isolated_root_has_no_routes() {
        let g = toy_graph();
        let mut rng = ChaCha::seed_from_u64(0);
        // user 3 has no interactions
        let s = sample_neighborhood(&g, 3, 2, 4, &mut rng, None);
        assert!(s.is_empty());
    }

    #[test]
    fn single_neighbor_is_drawn_with_replacement() {
        let g = toy_graph();
        let mut rng = ChaCha::seed_from_u64(1);
        let s = sample_neighborhood(&g, 2, 1, 3, &mut rng, None);
        assert_eq!(s.routes.len(), 3);
        let expected = ChainRoute::new(vec![2, g.interact_relation(), g.item_node(0)]);
        assert!(s.routes.iter().all(|r| *r == expected));
    }

    #[test]
    fn two_layers_of_two_give_six_routes() {
        let g = toy_graph();
        let mut rng = ChaCha::seed_from_u64(2);
        let s = sample_neighborhood(&g, 0, 2, 2, &mut rng, None);
        assert_eq!(s.routes.len(), 6);
        assert_eq!(s.routes.iter().filter(|r| r.depth() == 1).count(), 2);
        assert_eq!(s.routes.iter().filter(|r| r.depth() == 2).count(), 4);
    }

    #[test]
    fn count_law_validity_and_determinism() {
        let g = toy_graph();
        for depth in 1..=3 {
            for size in 1..=4 {
                for root in 0..g.node_count() as NodeId {
                    let seed = (depth * 31 + size * 7) as u64 + root as u64;
                    let a = sample_neighborhood(&g, root, depth, size, &mut ChaCha::seed_from_u64(seed), None);
                    let b = sample_neighborhood(&g, root, depth, size, &mut ChaCha::seed_from_u64(seed), None);
                    assert_eq!(a, b);
                    let expected = if g.adjacency(root).is_empty() {
                        0
                    } else {
                        route_count(depth, size)
                    };
                    assert_eq!(a.routes.len(), expected);
                    for d in 1..=depth {
                        let n = a.routes.iter().filter(|r| r.depth() == d).count();
                        assert_eq!(n, if expected == 0 { 0 } else { size.pow(d as u32) });
                    }
                    for route in &a.routes {
                        assert_eq!(route.root(), root);
                        for (from, rel, to) in route.hops() {
                            assert!(g.has_edge(from, rel, to));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn excluded_edge_is_never_walked() {
        let g = toy_graph();
        let (u, v) = (g.user_node(0), g.item_node(0));
        let interact = g.interact_relation();
        for seed in 0..50 {
            let s = sample_neighborhood(&g, u, 3, 3, &mut ChaCha::seed_from_u64(seed), Some((u, v)));
            assert_eq!(s.routes.len(), route_count(3, 3));
            for route in &s.routes {
                for hop in route.hops() {
                    assert_ne!(hop, (u, interact, v));
                    assert_ne!(hop, (v, interact, u));
                }
            }
        }
        // user 2's only edge is to item 0: excluding it isolates the root
        let s = sample_neighborhood(&g, 2, 2, 2, &mut ChaCha::seed_from_u64(0), Some((2, v)));
        assert!(s.is_empty());
    }
}
