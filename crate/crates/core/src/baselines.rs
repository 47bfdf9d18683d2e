//! Baseline recovery algorithms producing the same report shape as the CC
//! engine: RIM (every neighbor of the failed node moves inward, with cascaded
//! link restoration), LeDiR (the smallest cluster relocates behind a lead
//! node), and Cooperative Bridges (static CC repair only, no movement).

use std::collections::{BTreeMap, BTreeSet};

use crate::channel::{direct_range, has_direct_link};
use crate::model::{LinkParams, NetworkState, NodeId};
use crate::recovery::{
    static_cc_repair, CcBridge, MoveLog, RecoveryError, RecoveryReport, RunLimits,
};
use crate::topology::{
    build_adjacency, connected_components, former_neighbors, frontiers, is_connected,
    AdjacencyGraph,
};

/// Distance slack treated as "arrived" to stop floating-point creep toward a
/// target radius.
const ARRIVAL_EPS: f64 = 1e-9;

/// Overshoot applied when closing a broken link so the restored distance
/// falls strictly inside the range boundary.
const RESTORE_SLACK: f64 = 1e-6;

/// Range of the symmetric link between two nodes: the weaker transmitter
/// binds.
fn link_range(power_a: f64, power_b: f64, params: &LinkParams) -> f64 {
    direct_range(power_a.min(power_b), params)
}

fn linked(state: &NetworkState, a: NodeId, b: NodeId, params: &LinkParams) -> bool {
    let (Some(na), Some(nb)) = (state.node(a), state.node(b)) else {
        return false;
    };
    has_direct_link(na, nb, params).unwrap_or(false)
        && has_direct_link(nb, na, params).unwrap_or(false)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RimGoal {
    /// Converge to within half the direct range of the failure position.
    Inward,
    /// Chase the named node until the direct link to it is restored.
    Follow(NodeId),
}

/// RIM: every former 1-hop neighbor of the failed node moves toward the
/// failure position until within R/2 of it; any node losing a direct link to
/// a relocated neighbor follows that neighbor until the link is restored,
/// cascading until the network is quiescent. Success is judged on direct
/// links only.
pub fn run_rim(
    state: &mut NetworkState,
    params: &LinkParams,
    limits: &RunLimits,
) -> Result<RecoveryReport, RecoveryError> {
    let step = limits.step();
    let mut log = MoveLog::default();
    let mut ticks = 0u64;

    let Some(failed) = state.failed_node().map(|n| n.id) else {
        let g = build_adjacency(state, params);
        return Ok(RecoveryReport::from_log(
            is_connected(&g, &[]),
            &log,
            0,
            vec![],
            vec![],
        ));
    };
    let failed_pos = state.failed_pos().ok_or(RecoveryError::NoFailureInjected)?;

    let mut goals: BTreeMap<NodeId, RimGoal> = former_neighbors(state, failed, params)?
        .into_iter()
        .map(|id| (id, RimGoal::Inward))
        .collect();

    loop {
        let g_before = build_adjacency(state, params);
        let active: Vec<(NodeId, RimGoal)> = goals.iter().map(|(&k, &v)| (k, v)).collect();
        let mut moved_any = false;
        let mut moved_now: BTreeSet<NodeId> = BTreeSet::new();

        for (mover, goal) in active {
            let node = state.node(mover).ok_or(RecoveryError::UnknownNode(mover))?;
            match goal {
                RimGoal::Inward => {
                    let radius = direct_range(node.power, params) / 2.0;
                    let d = node.pos.distance(failed_pos);
                    if d <= radius + ARRIVAL_EPS {
                        goals.remove(&mover);
                        continue;
                    }
                    let to = node.pos.step_toward(failed_pos, step.min(d - radius))?;
                    let dist = node.pos.distance(to);
                    state.set_position(mover, to)?;
                    log.record(mover, dist);
                    moved_any = true;
                    moved_now.insert(mover);
                }
                RimGoal::Follow(target) => {
                    if linked(state, mover, target, params) {
                        goals.remove(&mover);
                        continue;
                    }
                    let node = state.node(mover).expect("checked above");
                    let target_node = state
                        .node(target)
                        .ok_or(RecoveryError::UnknownNode(target))?;
                    let range = link_range(node.power, target_node.power, params);
                    let d = node.pos.distance(target_node.pos);
                    let hop = step.min(d - range + RESTORE_SLACK);
                    let to = node.pos.step_toward(target_node.pos, hop)?;
                    let dist = node.pos.distance(to);
                    state.set_position(mover, to)?;
                    log.record(mover, dist);
                    moved_any = true;
                    moved_now.insert(mover);
                }
            }
        }

        if moved_any {
            ticks += 1;
            if ticks >= limits.max_ticks {
                return Ok(RecoveryReport::from_log(false, &log, ticks, vec![], vec![]));
            }
            // cascade: a broken link whose far endpoint just moved pulls the
            // near endpoint after it
            let g_after = build_adjacency(state, params);
            for (u, v) in g_before.edges() {
                if g_after.has_edge(u, v) {
                    continue;
                }
                for (stay, moved) in [(u, v), (v, u)] {
                    if moved_now.contains(&moved) && !goals.contains_key(&stay) {
                        goals.insert(stay, RimGoal::Follow(moved));
                    }
                }
            }
        }

        if goals.is_empty() {
            break;
        }
    }

    let g = build_adjacency(state, params);
    Ok(RecoveryReport::from_log(
        is_connected(&g, &[]),
        &log,
        ticks,
        vec![],
        vec![],
    ))
}

/// Hop-count shortest-path tree rooted at `root`, restricted to `members`.
/// Returns each non-root member's parent; deterministic through ascending
/// neighbor order.
fn bfs_parents(
    g: &AdjacencyGraph,
    root: NodeId,
    members: &BTreeSet<NodeId>,
) -> BTreeMap<NodeId, NodeId> {
    let mut parent = BTreeMap::new();
    let mut queue = std::collections::VecDeque::from([root]);
    let mut seen = BTreeSet::from([root]);
    while let Some(v) = queue.pop_front() {
        for &u in g.neighbors(v).into_iter().flatten() {
            if members.contains(&u) && seen.insert(u) {
                parent.insert(u, v);
                queue.push_back(u);
            }
        }
    }
    parent
}

/// LeDiR: the smallest cluster relocates. Its member nearest the failure
/// position moves exactly there; the remaining members follow their
/// shortest-path-tree parent (tree frozen at phase start) whenever the link
/// to it breaks. Success is judged on direct links only.
pub fn run_ledir(
    state: &mut NetworkState,
    params: &LinkParams,
    limits: &RunLimits,
) -> Result<RecoveryReport, RecoveryError> {
    let step = limits.step();
    let mut log = MoveLog::default();
    let mut ticks = 0u64;

    let g0 = build_adjacency(state, params);
    let clusters = connected_components(&g0);
    if clusters.len() <= 1 {
        return Ok(RecoveryReport::from_log(true, &log, 0, vec![], vec![]));
    }
    let failed_pos = state.failed_pos().ok_or(RecoveryError::NoFailureInjected)?;

    let small = clusters
        .iter()
        .min_by_key(|c| (c.members.len(), c.label))
        .expect("at least two clusters");
    let lead = small
        .members
        .iter()
        .copied()
        .min_by(|&a, &b| {
            let da = state.node(a).expect("member").pos.distance(failed_pos);
            let db = state.node(b).expect("member").pos.distance(failed_pos);
            da.partial_cmp(&db).expect("finite")
        })
        .expect("non-empty cluster");
    let parents = bfs_parents(&g0, lead, &small.members);

    let mut lead_active = true;
    let mut followers: BTreeMap<NodeId, NodeId> = BTreeMap::new();

    loop {
        let mut moved_any = false;

        if lead_active {
            let pos = state.node(lead).expect("lead exists").pos;
            let d = pos.distance(failed_pos);
            if d <= ARRIVAL_EPS {
                lead_active = false;
            } else {
                let to = pos.step_toward(failed_pos, step)?;
                let dist = pos.distance(to);
                state.set_position(lead, to)?;
                log.record(lead, dist);
                moved_any = true;
            }
        }

        let chasing: Vec<(NodeId, NodeId)> = followers.iter().map(|(&k, &v)| (k, v)).collect();
        for (follower, target) in chasing {
            if linked(state, follower, target, params) {
                followers.remove(&follower);
                continue;
            }
            let node = state
                .node(follower)
                .ok_or(RecoveryError::UnknownNode(follower))?;
            let target_node = state
                .node(target)
                .ok_or(RecoveryError::UnknownNode(target))?;
            let range = link_range(node.power, target_node.power, params);
            let d = node.pos.distance(target_node.pos);
            let hop = step.min(d - range + RESTORE_SLACK);
            let to = node.pos.step_toward(target_node.pos, hop)?;
            let dist = node.pos.distance(to);
            state.set_position(follower, to)?;
            log.record(follower, dist);
            moved_any = true;
        }

        if moved_any {
            ticks += 1;
            if ticks >= limits.max_ticks {
                return Ok(RecoveryReport::from_log(false, &log, ticks, vec![], vec![]));
            }
        }

        // tree members whose parent link broke start chasing it
        for (&member, &parent) in &parents {
            if !followers.contains_key(&member) && !linked(state, member, parent, params) {
                followers.insert(member, parent);
            }
        }

        if !lead_active && followers.is_empty() {
            break;
        }
    }

    let g = build_adjacency(state, params);
    Ok(RecoveryReport::from_log(
        is_connected(&g, &[]),
        &log,
        ticks,
        vec![],
        vec![],
    ))
}

/// Cooperative Bridges: purely static. Every component pair gets one attempt
/// at a CC bridge between its frontiers; success means the component graph
/// with all found bridges is connected. No node ever moves.
pub fn run_coop_bridges(
    state: &mut NetworkState,
    params: &LinkParams,
    _limits: &RunLimits,
) -> Result<RecoveryReport, RecoveryError> {
    let g = build_adjacency(state, params);
    let clusters = connected_components(&g);
    if clusters.len() <= 1 {
        return Ok(RecoveryReport::from_log(
            true,
            &MoveLog::default(),
            0,
            vec![],
            vec![],
        ));
    }
    let failed = state
        .failed_node()
        .ok_or(RecoveryError::NoFailureInjected)?
        .id;
    let fronts = frontiers(state, failed, &clusters, params)?;

    let mut bridges: Vec<CcBridge> = Vec::new();
    let mut meta: Vec<usize> = (0..clusters.len()).collect();
    fn find(meta: &mut Vec<usize>, i: usize) -> usize {
        if meta[i] != i {
            let root = find(meta, meta[i]);
            meta[i] = root;
        }
        meta[i]
    }
    for i in 0..fronts.len() {
        for j in (i + 1)..fronts.len() {
            if let Some(bridge) =
                static_cc_repair(state, &fronts[i].members, &fronts[j].members, params)?
            {
                bridges.push(bridge);
                let (ri, rj) = (find(&mut meta, i), find(&mut meta, j));
                meta[ri] = rj;
            }
        }
    }
    let root0 = find(&mut meta, 0);
    let success = (1..clusters.len()).all(|i| find(&mut meta, i) == root0);
    Ok(RecoveryReport::from_log(
        success,
        &MoveLog::default(),
        0,
        bridges,
        vec![],
    ))
}
