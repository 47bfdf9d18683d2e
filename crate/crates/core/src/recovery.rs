//! The C3RUN recovery state machine.
//!
//! After a cut-vertex failure partitions the network, recovery proceeds
//! pairwise over the surviving components: try a static CC bridge between the
//! two frontiers; if none exists, both sides' chosen movers walk toward the
//! failure position; when the movers can no longer advance without splitting
//! their own clusters, their helpers advance one by one; then the static
//! repair is retried; finally a growing block of each cluster is translated
//! toward the failure position until the sides link up. Every committed move
//! keeps each component internally connected, so recovery never creates a new
//! partition.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::channel::{
    bidirectional_cc, cc_snr, pairwise_snr, snr_at_distance, ChannelError, HelperSet,
};
use crate::model::{LinkParams, ModelError, NetworkState, NodeId, Point};
use crate::topology::{
    build_adjacency, component_members_of, connected_components, connected_components_with,
    former_neighbors, frontiers, helpers, AdjacencyGraph, Cluster, FrontierSet, TopologyError,
};

#[derive(Debug, Error, PartialEq)]
pub enum RecoveryError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is already dead")]
    NodeAlreadyDead(NodeId),
    #[error("no failure has been injected")]
    NoFailureInjected,
    #[error("cannot choose a mover from an empty frontier")]
    EmptyFrontier,
    #[error("recovery stalled at tick {tick}: nothing can move")]
    Stalled { tick: u64 },
    #[error("partition invariant violated at tick {tick}: a component split")]
    PartitionInvariantViolated { tick: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Phases of one pairwise repair round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RecoveryPhase {
    Idle,
    StaticCc,
    MoverAdvance,
    HelperAdvance,
    StaticCcRetry,
    BlockAdvance,
    Done,
    Failed,
}

/// A bidirectional CC bridge between two clusters, recorded with the helper
/// sets that established it. Whenever a bridge is consulted for connectivity
/// it is re-verified against current positions and current helper sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CcBridge {
    side_a: HelperSet,
    side_b: HelperSet,
}

impl CcBridge {
    pub fn new(side_a: HelperSet, side_b: HelperSet) -> Self {
        Self { side_a, side_b }
    }

    pub fn anchor_a(&self) -> NodeId {
        self.side_a.anchor()
    }

    pub fn anchor_b(&self) -> NodeId {
        self.side_b.anchor()
    }

    pub fn side_a(&self) -> &HelperSet {
        &self.side_a
    }

    pub fn side_b(&self) -> &HelperSet {
        &self.side_b
    }
}

/// Per-node cumulative path lengths plus the committed tick counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MoveLog {
    distances: BTreeMap<NodeId, f64>,
}

impl MoveLog {
    pub fn record(&mut self, id: NodeId, dist: f64) {
        if dist > 0.0 {
            *self.distances.entry(id).or_insert(0.0) += dist;
        }
    }

    pub fn nodes_moved(&self) -> usize {
        self.distances.values().filter(|&&d| d > 0.0).count()
    }

    pub fn total_distance(&self) -> f64 {
        self.distances.values().sum()
    }

    pub fn distance_of(&self, id: NodeId) -> f64 {
        self.distances.get(&id).copied().unwrap_or(0.0)
    }
}

/// Execution knobs shared by every recovery algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunLimits {
    pub speed_m_per_s: f64,
    pub tick_s: f64,
    pub max_ticks: u64,
    /// Ticks charged for failure detection, added to every report.
    pub detection_delay_ticks: u64,
    pub record_trace: bool,
    /// Re-verify the no-new-partition invariant after every committed tick.
    pub check_invariants: bool,
}

impl RunLimits {
    pub fn step(&self) -> f64 {
        self.speed_m_per_s * self.tick_s
    }
}

impl Default for RunLimits {
    fn default() -> Self {
        Self {
            speed_m_per_s: 1.0,
            tick_s: 1.0,
            max_ticks: 10_000,
            detection_delay_ticks: 0,
            record_trace: false,
            check_invariants: false,
        }
    }
}

/// One node's committed move within a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeMove {
    pub id: NodeId,
    pub to: Point,
}

/// Trace record for one committed simulation tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickTrace {
    pub tick: u64,
    pub phase: RecoveryPhase,
    pub anchors: Option<(NodeId, NodeId)>,
    pub moves: Vec<NodeMove>,
}

/// Outcome of one recovery run, shared by C3RUN and the baselines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub success: bool,
    pub nodes_moved: usize,
    pub total_distance_m: f64,
    pub recovery_ticks: u64,
    pub bridges: Vec<CcBridge>,
    pub trace: Vec<TickTrace>,
}

impl RecoveryReport {
    pub(crate) fn from_log(
        success: bool,
        log: &MoveLog,
        ticks: u64,
        bridges: Vec<CcBridge>,
        trace: Vec<TickTrace>,
    ) -> Self {
        Self {
            success,
            nodes_moved: log.nodes_moved(),
            total_distance_m: log.total_distance(),
            recovery_ticks: ticks,
            bridges,
            trace,
        }
    }
}

/// Result of injecting a failure.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureAssessment {
    pub is_cut_vertex: bool,
    pub clusters: Vec<Cluster>,
    pub frontiers: Vec<FrontierSet>,
}

/// Outcome of one movement attempt within a phase.
#[derive(Debug, Clone, PartialEq)]
pub enum MoveOutcome {
    Advanced { moved: Vec<NodeId> },
    Blocked,
    Bridged { bridge: Option<CcBridge>, moved: Vec<NodeId> },
}

/// Marks `failed` dead, records the failure position, and reports the
/// post-failure clusters and their frontiers. The node is a cut-vertex
/// exactly when more than one cluster survives.
pub fn assess_failure(
    state: &mut NetworkState,
    failed: NodeId,
    params: &LinkParams,
) -> Result<FailureAssessment, RecoveryError> {
    let node = state.node(failed).ok_or(RecoveryError::UnknownNode(failed))?;
    if !node.alive {
        return Err(RecoveryError::NodeAlreadyDead(failed));
    }
    state.mark_failed(failed)?;
    let g = build_adjacency(state, params);
    let clusters = connected_components(&g);
    let fronts = frontiers(state, failed, &clusters, params)?;
    Ok(FailureAssessment {
        is_cut_vertex: clusters.len() > 1,
        clusters,
        frontiers: fronts,
    })
}

/// True when every member of `members` is mutually reachable over direct
/// links, with `overrides` applied as hypothetical positions.
pub(crate) fn members_connected(
    state: &NetworkState,
    params: &LinkParams,
    members: &BTreeSet<NodeId>,
    overrides: &[(NodeId, Point)],
) -> bool {
    let n = members.len();
    if n <= 1 {
        return true;
    }
    let over: BTreeMap<NodeId, Point> = overrides.iter().copied().collect();
    let nodes: Vec<(Point, f64)> = members
        .iter()
        .map(|&id| {
            let node = state.node(id).expect("member exists");
            (over.get(&id).copied().unwrap_or(node.pos), node.power)
        })
        .collect();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if seen[j] {
                continue;
            }
            let d = nodes[i].0.distance(nodes[j].0);
            let fwd = snr_at_distance(nodes[i].1, d, params) >= params.tau;
            let rev = snr_at_distance(nodes[j].1, d, params) >= params.tau;
            if fwd && rev {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

/// Bridge edges that still hold: both anchors alive and the CC link verified
/// in both directions with current positions and current helper sets.
pub(crate) fn valid_bridge_edges(
    state: &NetworkState,
    params: &LinkParams,
    g: &AdjacencyGraph,
    bridges: &[CcBridge],
) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    for bridge in bridges {
        let (Ok(sa), Ok(sb)) = (
            helpers(g, bridge.anchor_a()),
            helpers(g, bridge.anchor_b()),
        ) else {
            continue;
        };
        if !sa.is_disjoint(&sb) {
            // the anchors now share a neighbor, hence sit in one component
            edges.push((bridge.anchor_a(), bridge.anchor_b()));
            continue;
        }
        if bidirectional_cc(&sa, &sb, state, params).unwrap_or(false) {
            edges.push((bridge.anchor_a(), bridge.anchor_b()));
        }
    }
    edges
}

/// How two anchors turned out to be linked.
#[derive(Debug, Clone, PartialEq)]
enum PairLink {
    /// Already in one component of direct links plus valid bridges.
    Connected,
    /// A fresh bidirectional CC link between the anchors' helper sets.
    NewBridge(CcBridge),
}

impl PairLink {
    fn into_bridge(self) -> Option<CcBridge> {
        match self {
            PairLink::Connected => None,
            PairLink::NewBridge(b) => Some(b),
        }
    }
}

fn pair_link(
    state: &NetworkState,
    params: &LinkParams,
    anchor_a: NodeId,
    anchor_b: NodeId,
    bridges: &[CcBridge],
) -> Result<Option<PairLink>, RecoveryError> {
    let g = build_adjacency(state, params);
    let edges = valid_bridge_edges(state, params, &g, bridges);
    let comps = connected_components_with(&g, &edges);
    let label_of = |id: NodeId| {
        comps
            .iter()
            .find(|c| c.members.contains(&id))
            .map(|c| c.label)
            .ok_or(RecoveryError::UnknownNode(id))
    };
    if label_of(anchor_a)? == label_of(anchor_b)? {
        return Ok(Some(PairLink::Connected));
    }
    let sa = helpers(&g, anchor_a)?;
    let sb = helpers(&g, anchor_b)?;
    if bidirectional_cc(&sa, &sb, state, params)? {
        return Ok(Some(PairLink::NewBridge(CcBridge::new(sa, sb))));
    }
    Ok(None)
}

/// Evaluates every anchor pair across the two frontiers with current helper
/// sets and returns the bridge with the largest min-direction SNR, or `None`
/// when no pair satisfies the bidirectional CC constraint. Ties fall to the
/// smallest anchor ids.
pub fn static_cc_repair(
    state: &NetworkState,
    frontier_a: &BTreeSet<NodeId>,
    frontier_b: &BTreeSet<NodeId>,
    params: &LinkParams,
) -> Result<Option<CcBridge>, RecoveryError> {
    let g = build_adjacency(state, params);
    let mut best: Option<(f64, CcBridge)> = None;
    for &a in frontier_a {
        let sa = helpers(&g, a)?;
        let node_a = state.node(a).ok_or(RecoveryError::UnknownNode(a))?;
        for &b in frontier_b {
            let sb = helpers(&g, b)?;
            // genuine frontiers of different components never overlap; for
            // hand-built states where they do (the anchors are already within
            // direct range) each side keeps only its exclusive members
            let (sa_eff, sb_eff) = if sa.is_disjoint(&sb) {
                (sa.clone(), sb)
            } else {
                let ma: BTreeSet<NodeId> = sa
                    .members()
                    .difference(sb.members())
                    .copied()
                    .chain([a])
                    .collect();
                let mb: BTreeSet<NodeId> = sb
                    .members()
                    .difference(sa.members())
                    .copied()
                    .chain([b])
                    .collect();
                (HelperSet::new(a, ma)?, HelperSet::new(b, mb)?)
            };
            let node_b = state.node(b).ok_or(RecoveryError::UnknownNode(b))?;
            let forward = cc_snr(&sa_eff, node_b, state, params)?;
            let reverse = cc_snr(&sb_eff, node_a, state, params)?;
            if forward >= params.tau && reverse >= params.tau {
                let margin = forward.min(reverse);
                if best.as_ref().is_none_or(|(m, _)| margin > *m) {
                    best = Some((margin, CcBridge::new(sa_eff, sb_eff)));
                }
            }
        }
    }
    Ok(best.map(|(_, b)| b))
}

/// Picks the frontier node whose helper set collects the largest SNR sum
/// toward the opposite frontier; ties fall to the lowest id.
pub fn choose_mover(
    state: &NetworkState,
    own_frontier: &BTreeSet<NodeId>,
    opposite_frontier: &BTreeSet<NodeId>,
    params: &LinkParams,
) -> Result<NodeId, RecoveryError> {
    let g = build_adjacency(state, params);
    let mut best: Option<(f64, NodeId)> = None;
    for &i in own_frontier {
        let set = helpers(&g, i)?;
        let mut score = 0.0;
        for &j in opposite_frontier {
            let receiver = state.node(j).ok_or(RecoveryError::UnknownNode(j))?;
            score += cc_snr(&set, receiver, state, params)?;
        }
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, i));
        }
    }
    best.map(|(_, i)| i).ok_or(RecoveryError::EmptyFrontier)
}

/// Advances `mover` one step toward the failure position. The move commits
/// only if the mover's own cluster stays internally connected; otherwise the
/// mover is blocked in place. Bridging to `opposite_anchor` is re-checked
/// before and after the move.
pub fn mover_tick(
    state: &mut NetworkState,
    mover: NodeId,
    opposite_anchor: NodeId,
    params: &LinkParams,
    bridges: &[CcBridge],
    step: f64,
    log: &mut MoveLog,
) -> Result<MoveOutcome, RecoveryError> {
    if let Some(link) = pair_link(state, params, mover, opposite_anchor, bridges)? {
        return Ok(MoveOutcome::Bridged {
            bridge: link.into_bridge(),
            moved: vec![],
        });
    }
    let failed_pos = state.failed_pos().ok_or(RecoveryError::NoFailureInjected)?;
    let cur = state
        .node(mover)
        .ok_or(RecoveryError::UnknownNode(mover))?
        .pos;
    let hyp = cur.step_toward(failed_pos, step)?;
    if hyp == cur {
        return Ok(MoveOutcome::Blocked);
    }
    let g = build_adjacency(state, params);
    let cluster = component_members_of(&g, mover);
    if !members_connected(state, params, &cluster, &[(mover, hyp)]) {
        return Ok(MoveOutcome::Blocked);
    }
    let dist = cur.distance(hyp);
    state.set_position(mover, hyp)?;
    log.record(mover, dist);
    match pair_link(state, params, mover, opposite_anchor, bridges)? {
        Some(link) => Ok(MoveOutcome::Bridged {
            bridge: link.into_bridge(),
            moved: vec![mover],
        }),
        None => Ok(MoveOutcome::Advanced {
            moved: vec![mover],
        }),
    }
}

/// Helper-movement phase for one side: the mover's helpers, ordered by
/// descending SNR contribution toward the opposite anchor, advance toward the
/// failure position one at a time. A helper retires when its next step would
/// leave the mover's direct range or split the cluster.
#[derive(Debug, Clone)]
pub struct HelperPhase {
    queue: VecDeque<NodeId>,
}

impl HelperPhase {
    /// Freezes the helper order from the mover's current helper set.
    pub fn new(
        state: &NetworkState,
        params: &LinkParams,
        mover: NodeId,
        opposite_anchor: NodeId,
    ) -> Result<Self, RecoveryError> {
        let g = build_adjacency(state, params);
        let set = helpers(&g, mover)?;
        let opposite = state
            .node(opposite_anchor)
            .ok_or(RecoveryError::UnknownNode(opposite_anchor))?;
        let mut list: Vec<NodeId> = set
            .members()
            .iter()
            .copied()
            .filter(|&h| h != mover)
            .collect();
        list.sort_by(|&x, &y| {
            let sx = pairwise_snr(state.node(x).expect("member"), opposite, params);
            let sy = pairwise_snr(state.node(y).expect("member"), opposite, params);
            sy.partial_cmp(&sx).expect("finite").then(x.cmp(&y))
        });
        Ok(Self {
            queue: list.into(),
        })
    }

    pub fn exhausted(&self) -> bool {
        self.queue.is_empty()
    }

    /// One tick: the active helper steps toward the failure position,
    /// retiring (and handing over to the next helper within the same tick)
    /// when it cannot. Returns `Blocked` once every helper has retired.
    #[allow(clippy::too_many_arguments)]
    pub fn tick(
        &mut self,
        state: &mut NetworkState,
        params: &LinkParams,
        mover: NodeId,
        opposite_anchor: NodeId,
        bridges: &[CcBridge],
        step: f64,
        log: &mut MoveLog,
    ) -> Result<MoveOutcome, RecoveryError> {
        if let Some(link) = pair_link(state, params, mover, opposite_anchor, bridges)? {
            return Ok(MoveOutcome::Bridged {
                bridge: link.into_bridge(),
                moved: vec![],
            });
        }
        let failed_pos = state.failed_pos().ok_or(RecoveryError::NoFailureInjected)?;
        loop {
            let Some(&helper) = self.queue.front() else {
                return Ok(MoveOutcome::Blocked);
            };
            let helper_node = state
                .node(helper)
                .ok_or(RecoveryError::UnknownNode(helper))?;
            let mover_node = state.node(mover).ok_or(RecoveryError::UnknownNode(mover))?;
            let cur = helper_node.pos;
            let hyp = cur.step_toward(failed_pos, step)?;
            let mut retire = hyp == cur;
            if !retire {
                // must stay within direct range of the mover's current position
                let d = hyp.distance(mover_node.pos);
                let fwd = snr_at_distance(helper_node.power, d, params) >= params.tau;
                let rev = snr_at_distance(mover_node.power, d, params) >= params.tau;
                retire = !(fwd && rev);
            }
            if !retire {
                let g = build_adjacency(state, params);
                let cluster = component_members_of(&g, helper);
                retire = !members_connected(state, params, &cluster, &[(helper, hyp)]);
            }
            if retire {
                self.queue.pop_front();
                continue;
            }
            let dist = cur.distance(hyp);
            state.set_position(helper, hyp)?;
            log.record(helper, dist);
            return match pair_link(state, params, mover, opposite_anchor, bridges)? {
                Some(link) => Ok(MoveOutcome::Bridged {
                    bridge: link.into_bridge(),
                    moved: vec![helper],
                }),
                None => Ok(MoveOutcome::Advanced {
                    moved: vec![helper],
                }),
            };
        }
    }
}

/// One tick of the expanding-block phase for one side: translate every block
/// member one step toward the failure position if the whole cluster stays
/// connected, otherwise absorb the adjacent node nearest the failure position
/// and retry within the same tick. A block equal to the whole cluster always
/// commits.
#[allow(clippy::too_many_arguments)]
pub fn block_phase_tick(
    state: &mut NetworkState,
    params: &LinkParams,
    block: &mut BTreeSet<NodeId>,
    anchor: NodeId,
    opposite_anchor: NodeId,
    bridges: &[CcBridge],
    step: f64,
    log: &mut MoveLog,
) -> Result<MoveOutcome, RecoveryError> {
    if let Some(link) = pair_link(state, params, anchor, opposite_anchor, bridges)? {
        return Ok(MoveOutcome::Bridged {
            bridge: link.into_bridge(),
            moved: vec![],
        });
    }
    let failed_pos = state.failed_pos().ok_or(RecoveryError::NoFailureInjected)?;
    let g = build_adjacency(state, params);
    let cluster = component_members_of(&g, anchor);

    loop {
        let mut overrides = Vec::with_capacity(block.len());
        for &m in block.iter() {
            let pos = state.node(m).ok_or(RecoveryError::UnknownNode(m))?.pos;
            overrides.push((m, pos.step_toward(failed_pos, step)?));
        }
        if *block == cluster || members_connected(state, params, &cluster, &overrides) {
            let mut moved = Vec::new();
            for (id, to) in overrides {
                let from = state.node(id).expect("member").pos;
                let dist = from.distance(to);
                if dist > 0.0 {
                    state.set_position(id, to)?;
                    log.record(id, dist);
                    moved.push(id);
                }
            }
            return match pair_link(state, params, anchor, opposite_anchor, bridges)? {
                Some(link) => Ok(MoveOutcome::Bridged {
                    bridge: link.into_bridge(),
                    moved,
                }),
                None => Ok(MoveOutcome::Advanced { moved }),
            };
        }
        // absorb the block neighbor nearest the failure position, lowest id on ties
        let candidate = cluster
            .iter()
            .copied()
            .filter(|c| !block.contains(c))
            .filter(|&c| block.iter().any(|&b| g.has_edge(b, c)))
            .min_by(|&x, &y| {
                let dx = state.node(x).expect("member").pos.distance(failed_pos);
                let dy = state.node(y).expect("member").pos.distance(failed_pos);
                dx.partial_cmp(&dy).expect("finite")
            });
        match candidate {
            Some(c) => {
                block.insert(c);
            }
            None => {
                // cluster is connected, so a strict subset always has an
                // adjacent outsider; reaching here means block == cluster
                return Err(RecoveryError::Stalled { tick: 0 });
            }
        }
    }
}

enum RoundOutcome {
    Bridge(Option<CcBridge>),
    Connected,
    TickLimit,
}

enum TickEnd {
    Continue,
    Connected,
    TickLimit,
}

struct Engine<'a> {
    state: &'a mut NetworkState,
    params: &'a LinkParams,
    limits: &'a RunLimits,
    step: f64,
    ticks: u64,
    log: MoveLog,
    bridges: Vec<CcBridge>,
    trace: Vec<TickTrace>,
    former: BTreeSet<NodeId>,
    failed_pos: Point,
}

impl<'a> Engine<'a> {
    fn run(mut self) -> Result<RecoveryReport, RecoveryError> {
        loop {
            let g = build_adjacency(self.state, self.params);
            let edges = valid_bridge_edges(self.state, self.params, &g, &self.bridges);
            let comps = connected_components_with(&g, &edges);
            if comps.len() <= 1 {
                return Ok(self.finish(true));
            }
            if self.ticks >= self.limits.max_ticks {
                return Ok(self.finish(false));
            }
            let (fa, fb) = self.pick_pair(&comps);
            match self.repair_pair(&fa, &fb)? {
                RoundOutcome::Bridge(Some(bridge)) => self.bridges.push(bridge),
                RoundOutcome::Bridge(None) => {}
                RoundOutcome::Connected => return Ok(self.finish(true)),
                RoundOutcome::TickLimit => return Ok(self.finish(false)),
            }
        }
    }

    fn finish(self, success: bool) -> RecoveryReport {
        RecoveryReport::from_log(success, &self.log, self.ticks, self.bridges, self.trace)
    }

    /// Frontier of one current component: the surviving former neighbors of
    /// the failed node, or the member nearest the failure position when none
    /// remain in this component.
    fn frontier_of(&self, cluster: &Cluster) -> BTreeSet<NodeId> {
        let mut members: BTreeSet<NodeId> =
            cluster.members.intersection(&self.former).copied().collect();
        if members.is_empty() {
            let nearest = cluster
                .members
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let da = self
                        .state
                        .node(a)
                        .expect("member")
                        .pos
                        .distance(self.failed_pos);
                    let db = self
                        .state
                        .node(b)
                        .expect("member")
                        .pos
                        .distance(self.failed_pos);
                    da.partial_cmp(&db).expect("finite")
                })
                .expect("clusters are non-empty");
            members.insert(nearest);
        }
        members
    }

    /// The two components whose frontiers come nearest; ties fall to the
    /// smaller cluster labels.
    fn pick_pair(&self, comps: &[Cluster]) -> (BTreeSet<NodeId>, BTreeSet<NodeId>) {
        let fronts: Vec<BTreeSet<NodeId>> =
            comps.iter().map(|c| self.frontier_of(c)).collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..comps.len() {
            for j in (i + 1)..comps.len() {
                let mut min_d = f64::INFINITY;
                for &a in &fronts[i] {
                    let pa = self.state.node(a).expect("member").pos;
                    for &b in &fronts[j] {
                        let pb = self.state.node(b).expect("member").pos;
                        min_d = min_d.min(pa.distance(pb));
                    }
                }
                if best.is_none_or(|(d, _, _)| min_d < d) {
                    best = Some((min_d, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("at least two components");
        (fronts[i].clone(), fronts[j].clone())
    }

    fn pre_tick_snapshot(&self) -> Option<Vec<BTreeSet<NodeId>>> {
        self.limits.check_invariants.then(|| {
            let g = build_adjacency(self.state, self.params);
            connected_components(&g)
                .into_iter()
                .map(|c| c.members)
                .collect()
        })
    }

    /// Commits one tick: advances the clock, records the trace, verifies that
    /// no pre-tick component split, and checks global connectivity and the
    /// tick budget.
    fn commit_tick(
        &mut self,
        phase: RecoveryPhase,
        anchors: (NodeId, NodeId),
        moved: Vec<NodeId>,
        pre: Option<Vec<BTreeSet<NodeId>>>,
    ) -> Result<TickEnd, RecoveryError> {
        self.ticks += 1;
        if self.limits.record_trace {
            let moves = moved
                .iter()
                .map(|&id| NodeMove {
                    id,
                    to: self.state.node(id).expect("mover exists").pos,
                })
                .collect();
            self.trace.push(TickTrace {
                tick: self.ticks,
                phase,
                anchors: Some(anchors),
                moves,
            });
        }
        if let Some(components) = pre {
            for members in &components {
                if !members_connected(self.state, self.params, members, &[]) {
                    return Err(RecoveryError::PartitionInvariantViolated { tick: self.ticks });
                }
            }
        }
        let g = build_adjacency(self.state, self.params);
        let edges = valid_bridge_edges(self.state, self.params, &g, &self.bridges);
        if connected_components_with(&g, &edges).len() <= 1 {
            return Ok(TickEnd::Connected);
        }
        if self.ticks >= self.limits.max_ticks {
            return Ok(TickEnd::TickLimit);
        }
        Ok(TickEnd::Continue)
    }

    fn repair_pair(
        &mut self,
        frontier_a: &BTreeSet<NodeId>,
        frontier_b: &BTreeSet<NodeId>,
    ) -> Result<RoundOutcome, RecoveryError> {
        // step 1 of the round: static CC repair over all anchor pairs
        if let Some(bridge) = static_cc_repair(self.state, frontier_a, frontier_b, self.params)? {
            return Ok(RoundOutcome::Bridge(Some(bridge)));
        }

        let mover_a = choose_mover(self.state, frontier_a, frontier_b, self.params)?;
        let mover_b = choose_mover(self.state, frontier_b, frontier_a, self.params)?;
        let anchors = (mover_a, mover_b);

        // movers advance simultaneously until both are pinned by their clusters
        let mut blocked = [false, false];
        loop {
            let pre = self.pre_tick_snapshot();
            let mut tick_moves: Vec<NodeId> = Vec::new();
            let mut bridged: Option<Option<CcBridge>> = None;
            for (idx, (mover, opposite)) in
                [(mover_a, mover_b), (mover_b, mover_a)].into_iter().enumerate()
            {
                if blocked[idx] {
                    continue;
                }
                match mover_tick(
                    self.state,
                    mover,
                    opposite,
                    self.params,
                    &self.bridges,
                    self.step,
                    &mut self.log,
                )? {
                    MoveOutcome::Advanced { moved } => tick_moves.extend(moved),
                    MoveOutcome::Blocked => blocked[idx] = true,
                    MoveOutcome::Bridged { bridge, moved } => {
                        tick_moves.extend(moved);
                        bridged = Some(bridge);
                        break;
                    }
                }
            }
            if let Some(outcome) = self.close_tick(
                RecoveryPhase::MoverAdvance,
                anchors,
                tick_moves,
                pre,
                &mut bridged,
            )? {
                return Ok(outcome);
            }
            if let Some(bridge) = bridged {
                return Ok(RoundOutcome::Bridge(bridge));
            }
            if blocked == [true, true] {
                break;
            }
        }

        // helpers advance one by one on both sides
        let mut queue_a = HelperPhase::new(self.state, self.params, mover_a, mover_b)?;
        let mut queue_b = HelperPhase::new(self.state, self.params, mover_b, mover_a)?;
        loop {
            let pre = self.pre_tick_snapshot();
            let mut tick_moves: Vec<NodeId> = Vec::new();
            let mut bridged: Option<Option<CcBridge>> = None;
            for (queue, mover, opposite) in [
                (&mut queue_a, mover_a, mover_b),
                (&mut queue_b, mover_b, mover_a),
            ] {
                if queue.exhausted() {
                    continue;
                }
                match queue.tick(
                    self.state,
                    self.params,
                    mover,
                    opposite,
                    &self.bridges,
                    self.step,
                    &mut self.log,
                )? {
                    MoveOutcome::Advanced { moved } => tick_moves.extend(moved),
                    MoveOutcome::Blocked => {}
                    MoveOutcome::Bridged { bridge, moved } => {
                        tick_moves.extend(moved);
                        bridged = Some(bridge);
                        break;
                    }
                }
            }
            if let Some(outcome) = self.close_tick(
                RecoveryPhase::HelperAdvance,
                anchors,
                tick_moves,
                pre,
                &mut bridged,
            )? {
                return Ok(outcome);
            }
            if let Some(bridge) = bridged {
                return Ok(RoundOutcome::Bridge(bridge));
            }
            if queue_a.exhausted() && queue_b.exhausted() {
                break;
            }
        }

        // static repair retry with the post-movement geometry
        if let Some(bridge) = static_cc_repair(self.state, frontier_a, frontier_b, self.params)? {
            return Ok(RoundOutcome::Bridge(Some(bridge)));
        }

        // expanding blocks translate both clusters toward the failure position
        let g = build_adjacency(self.state, self.params);
        let mut block_a = helpers(&g, mover_a)?.members().clone();
        let mut block_b = helpers(&g, mover_b)?.members().clone();
        loop {
            let pre = self.pre_tick_snapshot();
            let mut tick_moves: Vec<NodeId> = Vec::new();
            let mut bridged: Option<Option<CcBridge>> = None;
            for (block, anchor, opposite) in [
                (&mut block_a, mover_a, mover_b),
                (&mut block_b, mover_b, mover_a),
            ] {
                match block_phase_tick(
                    self.state,
                    self.params,
                    block,
                    anchor,
                    opposite,
                    &self.bridges,
                    self.step,
                    &mut self.log,
                )? {
                    MoveOutcome::Advanced { moved } => tick_moves.extend(moved),
                    MoveOutcome::Blocked => {}
                    MoveOutcome::Bridged { bridge, moved } => {
                        tick_moves.extend(moved);
                        bridged = Some(bridge);
                        break;
                    }
                }
            }
            if tick_moves.is_empty() && bridged.is_none() {
                return Err(RecoveryError::Stalled { tick: self.ticks });
            }
            if let Some(outcome) = self.close_tick(
                RecoveryPhase::BlockAdvance,
                anchors,
                tick_moves,
                pre,
                &mut bridged,
            )? {
                return Ok(outcome);
            }
            if let Some(bridge) = bridged {
                return Ok(RoundOutcome::Bridge(bridge));
            }
        }
    }

    /// Commits a tick when anything moved and folds the tick-end conditions
    /// into the round outcome. Global connectivity beats a pair bridge, and a
    /// pair bridge beats the tick limit (the outer loop re-evaluates).
    fn close_tick(
        &mut self,
        phase: RecoveryPhase,
        anchors: (NodeId, NodeId),
        tick_moves: Vec<NodeId>,
        pre: Option<Vec<BTreeSet<NodeId>>>,
        bridged: &mut Option<Option<CcBridge>>,
    ) -> Result<Option<RoundOutcome>, RecoveryError> {
        if tick_moves.is_empty() {
            return Ok(None);
        }
        match self.commit_tick(phase, anchors, tick_moves, pre)? {
            TickEnd::Connected => Ok(Some(RoundOutcome::Connected)),
            TickEnd::Continue => Ok(None),
            TickEnd::TickLimit => match bridged.take() {
                Some(bridge) => Ok(Some(RoundOutcome::Bridge(bridge))),
                None => Ok(Some(RoundOutcome::TickLimit)),
            },
        }
    }
}

/// Runs the full recovery on a state with an injected failure. A failure that
/// did not partition the network succeeds immediately with zero metrics; a
/// run that exhausts the tick budget reports `success = false`.
pub fn run_recovery(
    state: &mut NetworkState,
    params: &LinkParams,
    limits: &RunLimits,
) -> Result<RecoveryReport, RecoveryError> {
    let g = build_adjacency(state, params);
    if connected_components(&g).len() <= 1 {
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
    let failed_pos = state.failed_pos().ok_or(RecoveryError::NoFailureInjected)?;
    let former = former_neighbors(state, failed, params)?;
    let engine = Engine {
        step: limits.step(),
        ticks: 0,
        log: MoveLog::default(),
        bridges: vec![],
        trace: vec![],
        former,
        failed_pos,
        state,
        params,
        limits,
    };
    engine.run()
}
