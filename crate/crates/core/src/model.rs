//! Planar geometry, node identity, and the shared link parameters used by
//! every other module.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("step must be non-negative, got {0}")]
    NegativeStep(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("coordinates must be finite, got ({0}, {1})")]
    NonFinitePoint(f64, f64),
    #[error("duplicate node id {0}")]
    DuplicateNodeId(NodeId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
}

/// Identifier of a UAV node, unique within a [`NetworkState`].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A position in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance to `other`, in meters.
    pub fn distance(&self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    /// The point reached by moving at most `step` meters from `self` straight
    /// toward `target`. Never overshoots: if `target` is closer than `step`
    /// (or equal to `self`), returns `target` (respectively `self`) exactly.
    pub fn step_toward(&self, target: Point, step: f64) -> Result<Point, ModelError> {
        if step < 0.0 {
            return Err(ModelError::NegativeStep(step));
        }
        let d = self.distance(target);
        if d == 0.0 {
            return Ok(*self);
        }
        if step >= d {
            return Ok(target);
        }
        let t = step / d;
        Ok(Point::new(
            self.x + (target.x - self.x) * t,
            self.y + (target.y - self.y) * t,
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// One mobile node: identity, planar position, liveness, transmit power
/// (linear units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavNode {
    pub id: NodeId,
    pub pos: Point,
    pub alive: bool,
    pub power: f64,
}

impl UavNode {
    pub fn new(id: NodeId, pos: Point, power: f64) -> Result<Self, ModelError> {
        if !pos.is_finite() {
            return Err(ModelError::NonFinitePoint(pos.x, pos.y));
        }
        if power <= 0.0 {
            return Err(ModelError::NonPositive {
                name: "power",
                value: power,
            });
        }
        Ok(Self {
            id,
            pos,
            alive: true,
            power,
        })
    }
}

/// Radio constants shared by the whole network: path-loss exponent, noise
/// power, SNR decode threshold, and the minimum effective distance used to
/// clamp co-located pairs away from the 1/d^alpha singularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub alpha: f64,
    pub noise: f64,
    pub tau: f64,
    pub d_min: f64,
}

impl LinkParams {
    pub fn new(alpha: f64, noise: f64, tau: f64, d_min: f64) -> Result<Self, ModelError> {
        for (name, value) in [
            ("alpha", alpha),
            ("noise", noise),
            ("tau", tau),
            ("d_min", d_min),
        ] {
            if value <= 0.0 {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        Ok(Self {
            alpha,
            noise,
            tau,
            d_min,
        })
    }
}

impl Default for LinkParams {
    /// Free-space exponent, unit noise, and tau calibrated so a unit-power
    /// direct link reaches exactly 50 m (tau = 1/2500).
    fn default() -> Self {
        Self {
            alpha: 2.0,
            noise: 1.0,
            tau: 4.0e-4,
            d_min: 0.1,
        }
    }
}

/// The evolving world: every node (dead ones keep their last position) plus
/// the position of the failed cut-vertex once a failure has been injected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    nodes: Vec<UavNode>,
    failed_pos: Option<Point>,
}

impl NetworkState {
    /// Builds a state from `nodes`, which must carry unique ids. Nodes are
    /// kept sorted by id so every derived iteration order is deterministic.
    pub fn new(mut nodes: Vec<UavNode>) -> Result<Self, ModelError> {
        nodes.sort_by_key(|n| n.id);
        for w in nodes.windows(2) {
            if w[0].id == w[1].id {
                return Err(ModelError::DuplicateNodeId(w[0].id));
            }
        }
        Ok(Self {
            nodes,
            failed_pos: None,
        })
    }

    pub fn nodes(&self) -> &[UavNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&UavNode> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn alive_nodes(&self) -> impl Iterator<Item = &UavNode> {
        self.nodes.iter().filter(|n| n.alive)
    }

    pub fn failed_pos(&self) -> Option<Point> {
        self.failed_pos
    }

    /// The injected failure, i.e. the first dead node. The simulator injects
    /// at most one failure per run.
    pub fn failed_node(&self) -> Option<&UavNode> {
        self.nodes.iter().find(|n| !n.alive)
    }

    /// Marks `id` dead and records its position as the failure position.
    pub fn mark_failed(&mut self, id: NodeId) -> Result<(), ModelError> {
        let idx = self
            .nodes
            .binary_search_by_key(&id, |n| n.id)
            .map_err(|_| ModelError::UnknownNode(id))?;
        self.nodes[idx].alive = false;
        self.failed_pos = Some(self.nodes[idx].pos);
        Ok(())
    }

    pub fn set_position(&mut self, id: NodeId, pos: Point) -> Result<(), ModelError> {
        let idx = self
            .nodes
            .binary_search_by_key(&id, |n| n.id)
            .map_err(|_| ModelError::UnknownNode(id))?;
        self.nodes[idx].pos = pos;
        Ok(())
    }
}
