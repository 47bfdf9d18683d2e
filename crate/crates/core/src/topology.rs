//! Graph structure over direct links: adjacency, connected components,
//! articulation points, helper sets, and frontier sets.
//!
//! Everything here is a pure derivation from a [`NetworkState`] snapshot and
//! iterates in ascending-id order, so results are deterministic.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::channel::{has_direct_link, pairwise_snr, HelperSet};
use crate::model::{LinkParams, NetworkState, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("anchor {0} is dead or absent from the graph")]
    DeadAnchor(NodeId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is still alive")]
    NodeStillAlive(NodeId),
    #[error("failure position is unknown; inject a failure first")]
    FailurePositionUnknown,
}

/// Undirected direct-link graph over the alive nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    adj: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl AdjacencyGraph {
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.keys().copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.adj.contains_key(&id)
    }

    pub fn neighbors(&self, id: NodeId) -> Option<&BTreeSet<NodeId>> {
        self.adj.get(&id)
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adj.get(&a).is_some_and(|n| n.contains(&b))
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(|n| n.len()).sum::<usize>() / 2
    }

    /// Undirected edges, each reported once with the smaller id first.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj
            .iter()
            .flat_map(|(&a, nbrs)| nbrs.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    /// Builds a graph from an explicit edge list (test and oracle helper).
    pub fn from_edges(nodes: impl IntoIterator<Item = NodeId>, edges: &[(NodeId, NodeId)]) -> Self {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> =
            nodes.into_iter().map(|n| (n, BTreeSet::new())).collect();
        for &(a, b) in edges {
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
        Self { adj }
    }

    /// The graph with `removed` deleted (used by the brute-force articulation
    /// oracle in tests).
    pub fn without_node(&self, removed: NodeId) -> Self {
        let mut adj = self.adj.clone();
        adj.remove(&removed);
        for n in adj.values_mut() {
            n.remove(&removed);
        }
        Self { adj }
    }
}

/// A maximal direct-link connected component. Labels are assigned in
/// ascending order of each component's smallest member id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub label: usize,
    pub members: BTreeSet<NodeId>,
}

/// The members of one cluster that were direct neighbors of the failed node
/// immediately before it failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierSet {
    pub cluster_label: usize,
    pub members: BTreeSet<NodeId>,
}

/// Direct-link adjacency over the alive nodes: edge {i, j} iff the link
/// predicate holds in both directions.
pub fn build_adjacency(state: &NetworkState, params: &LinkParams) -> AdjacencyGraph {
    let alive: Vec<_> = state.alive_nodes().collect();
    let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> =
        alive.iter().map(|n| (n.id, BTreeSet::new())).collect();
    for (i, a) in alive.iter().enumerate() {
        for b in alive.iter().skip(i + 1) {
            let forward = has_direct_link(a, b, params).expect("both alive");
            let backward = has_direct_link(b, a, params).expect("both alive");
            if forward && backward {
                adj.get_mut(&a.id).expect("present").insert(b.id);
                adj.get_mut(&b.id).expect("present").insert(a.id);
            }
        }
    }
    AdjacencyGraph { adj }
}

/// Connected components of `g`, optionally merged through `extra_edges`
/// (established CC bridges). Unknown endpoints in `extra_edges` are ignored.
pub fn connected_components_with(
    g: &AdjacencyGraph,
    extra_edges: &[(NodeId, NodeId)],
) -> Vec<Cluster> {
    let mut extra: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for &(a, b) in extra_edges {
        if g.contains(a) && g.contains(b) {
            extra.entry(a).or_default().insert(b);
            extra.entry(b).or_default().insert(a);
        }
    }
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    let mut clusters = Vec::new();
    for start in g.node_ids() {
        if seen.contains(&start) {
            continue;
        }
        let mut members = BTreeSet::new();
        let mut queue = vec![start];
        seen.insert(start);
        while let Some(v) = queue.pop() {
            members.insert(v);
            let direct = g.neighbors(v).into_iter().flatten();
            let bridged = extra.get(&v).into_iter().flatten();
            for &u in direct.chain(bridged) {
                if seen.insert(u) {
                    queue.push(u);
                }
            }
        }
        clusters.push(Cluster {
            label: clusters.len(),
            members,
        });
    }
    clusters
}

pub fn connected_components(g: &AdjacencyGraph) -> Vec<Cluster> {
    connected_components_with(g, &[])
}

/// True when every node of `g` is in a single component of direct links
/// joined with `extra_edges`.
pub fn is_connected(g: &AdjacencyGraph, extra_edges: &[(NodeId, NodeId)]) -> bool {
    connected_components_with(g, extra_edges).len() <= 1
}

/// Classical articulation points: the nodes whose removal increases the
/// number of connected components. Iterative lowlink DFS.
pub fn articulation_points(g: &AdjacencyGraph) -> BTreeSet<NodeId> {
    let ids: Vec<NodeId> = g.node_ids().collect();
    let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let neigh: Vec<Vec<usize>> = ids
        .iter()
        .map(|&id| {
            g.neighbors(id)
                .expect("present")
                .iter()
                .map(|n| index[n])
                .collect()
        })
        .collect();

    let n = ids.len();
    let mut disc = vec![0usize; n];
    let mut low = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut cut = vec![false; n];
    let mut timer = 0usize;

    for root in 0..n {
        if visited[root] {
            continue;
        }
        // frame: (vertex, parent, next neighbor index)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        let mut root_children = 0usize;
        visited[root] = true;
        timer += 1;
        disc[root] = timer;
        low[root] = timer;

        while let Some(frame) = stack.last_mut() {
            let (v, parent, ni) = (frame.0, frame.1, frame.2);
            if ni < neigh[v].len() {
                frame.2 += 1;
                let u = neigh[v][ni];
                if Some(u) == parent {
                    continue;
                }
                if !visited[u] {
                    visited[u] = true;
                    timer += 1;
                    disc[u] = timer;
                    low[u] = timer;
                    if v == root {
                        root_children += 1;
                    }
                    stack.push((u, Some(v), 0));
                } else {
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                stack.pop();
                if let Some(&mut (p, _, _)) = stack.last_mut() {
                    low[p] = low[p].min(low[v]);
                    if p != root && low[v] >= disc[p] {
                        cut[p] = true;
                    }
                }
            }
        }
        if root_children >= 2 {
            cut[root] = true;
        }
    }

    ids.iter()
        .zip(cut)
        .filter_map(|(&id, c)| c.then_some(id))
        .collect()
}

/// Members of the direct-link component containing `id`.
pub fn component_members_of(g: &AdjacencyGraph, id: NodeId) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::from([id]);
    let mut stack = vec![id];
    while let Some(v) = stack.pop() {
        for &u in g.neighbors(v).into_iter().flatten() {
            if seen.insert(u) {
                stack.push(u);
            }
        }
    }
    seen
}

/// The alive nodes that had a direct link to `failed` immediately before it
/// failed, judged from the dead node's recorded position and power.
pub fn former_neighbors(
    state: &NetworkState,
    failed: NodeId,
    params: &LinkParams,
) -> Result<BTreeSet<NodeId>, TopologyError> {
    let failed_node = state.node(failed).ok_or(TopologyError::UnknownNode(failed))?;
    if failed_node.alive {
        return Err(TopologyError::NodeStillAlive(failed));
    }
    let mut out = BTreeSet::new();
    for node in state.alive_nodes() {
        let forward = pairwise_snr(failed_node, node, params) >= params.tau;
        let backward = pairwise_snr(node, failed_node, params) >= params.tau;
        if forward && backward {
            out.insert(node.id);
        }
    }
    Ok(out)
}

/// The anchor plus all of its current direct-link neighbors.
pub fn helpers(g: &AdjacencyGraph, anchor: NodeId) -> Result<HelperSet, TopologyError> {
    let neighbors = g.neighbors(anchor).ok_or(TopologyError::DeadAnchor(anchor))?;
    let mut members = neighbors.clone();
    members.insert(anchor);
    HelperSet::new(anchor, members).map_err(|_| TopologyError::DeadAnchor(anchor))
}

/// For every cluster, the members that had a direct link to `failed`
/// immediately before the failure. A cluster holding no former neighbor gets
/// its member nearest to the failure position as a synthetic frontier.
pub fn frontiers(
    state: &NetworkState,
    failed: NodeId,
    clusters: &[Cluster],
    params: &LinkParams,
) -> Result<Vec<FrontierSet>, TopologyError> {
    let failed_pos = state
        .failed_pos()
        .ok_or(TopologyError::FailurePositionUnknown)?;
    let former = former_neighbors(state, failed, params)?;

    let mut out = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let mut members: BTreeSet<NodeId> =
            cluster.members.intersection(&former).copied().collect();
        if members.is_empty() {
            // nearest member stands in; ascending iteration keeps ties on the
            // lowest id
            let nearest = cluster
                .members
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let da = state.node(a).expect("member").pos.distance(failed_pos);
                    let db = state.node(b).expect("member").pos.distance(failed_pos);
                    da.partial_cmp(&db).expect("finite")
                })
                .expect("clusters are non-empty");
            members.insert(nearest);
        }
        out.push(FrontierSet {
            cluster_label: cluster.label,
            members,
        });
    }
    Ok(out)
}
