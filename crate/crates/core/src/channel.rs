//! Direct-link and cooperative-communication (CC) link predicates.
//!
//! A receiver decodes a sender when the received SNR,
//! `power / (d^alpha * noise)`, meets the threshold `tau` (distances below
//! `d_min` are clamped). A CC link sums the SNRs of a sender and its helper
//! nodes transmitting the same packet, which extends reach: k equal-power
//! co-located transmitters cover `k^(1/alpha)` times the single-node range.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LinkParams, NetworkState, NodeId, UavNode};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("node {0} is dead")]
    DeadNode(NodeId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("helper set must contain its anchor {0}")]
    AnchorNotInMembers(NodeId),
    #[error("receiver {0} is inside the sender set")]
    ReceiverInSenderSet(NodeId),
    #[error("helper sets overlap on node {0}")]
    OverlappingHelperSets(NodeId),
}

/// A sender together with the neighbors relaying its packet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperSet {
    anchor: NodeId,
    members: BTreeSet<NodeId>,
}

impl HelperSet {
    /// `members` must contain `anchor`.
    pub fn new(anchor: NodeId, members: BTreeSet<NodeId>) -> Result<Self, ChannelError> {
        if !members.contains(&anchor) {
            return Err(ChannelError::AnchorNotInMembers(anchor));
        }
        Ok(Self { anchor, members })
    }

    pub fn singleton(anchor: NodeId) -> Self {
        Self {
            anchor,
            members: BTreeSet::from([anchor]),
        }
    }

    pub fn anchor(&self) -> NodeId {
        self.anchor
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.contains(&id)
    }

    pub fn is_disjoint(&self, other: &HelperSet) -> bool {
        self.members.is_disjoint(&other.members)
    }
}

/// The SNR threshold at which a direct link holds at exactly `range` meters:
/// `power / (range^alpha * noise)`. Used to calibrate `tau` from a nominal
/// transmission range.
pub fn tau_from_range(
    power: f64,
    noise: f64,
    alpha: f64,
    range: f64,
) -> Result<f64, ChannelError> {
    for (name, value) in [
        ("power", power),
        ("noise", noise),
        ("alpha", alpha),
        ("range", range),
    ] {
        if value <= 0.0 {
            return Err(ChannelError::NonPositive { name, value });
        }
    }
    Ok(power / (range.powf(alpha) * noise))
}

/// The distance at which a single transmitter of `power` meets `params.tau`.
pub fn direct_range(power: f64, params: &LinkParams) -> f64 {
    (power / (params.tau * params.noise)).powf(1.0 / params.alpha)
}

pub(crate) fn snr_at_distance(power: f64, d: f64, params: &LinkParams) -> f64 {
    let d_eff = d.max(params.d_min);
    power / (d_eff.powf(params.alpha) * params.noise)
}

/// Average SNR at `receiver` from `sender` under the deterministic
/// path-loss-only channel.
pub fn pairwise_snr(sender: &UavNode, receiver: &UavNode, params: &LinkParams) -> f64 {
    debug_assert_ne!(sender.id, receiver.id);
    snr_at_distance(sender.power, sender.pos.distance(receiver.pos), params)
}

/// True when `receiver` decodes `sender` alone, i.e. `pairwise_snr >= tau`.
/// Both nodes must be alive.
pub fn has_direct_link(
    sender: &UavNode,
    receiver: &UavNode,
    params: &LinkParams,
) -> Result<bool, ChannelError> {
    for n in [sender, receiver] {
        if !n.alive {
            return Err(ChannelError::DeadNode(n.id));
        }
    }
    Ok(pairwise_snr(sender, receiver, params) >= params.tau)
}

/// Total SNR at `receiver` from every member of `senders` transmitting the
/// same packet.
pub fn cc_snr(
    senders: &HelperSet,
    receiver: &UavNode,
    state: &NetworkState,
    params: &LinkParams,
) -> Result<f64, ChannelError> {
    if senders.contains(receiver.id) {
        return Err(ChannelError::ReceiverInSenderSet(receiver.id));
    }
    let mut total = 0.0;
    for &id in senders.members() {
        let node = state.node(id).ok_or(ChannelError::UnknownNode(id))?;
        if !node.alive {
            return Err(ChannelError::DeadNode(id));
        }
        total += pairwise_snr(node, receiver, params);
    }
    Ok(total)
}

/// True when the summed SNR from `senders` at `receiver` meets `tau`.
pub fn has_cc_link(
    senders: &HelperSet,
    receiver: &UavNode,
    state: &NetworkState,
    params: &LinkParams,
) -> Result<bool, ChannelError> {
    Ok(cc_snr(senders, receiver, state, params)? >= params.tau)
}

/// True when a CC link holds in both directions between the two sets'
/// anchors: `i`'s members reach `j.anchor` and `j`'s members reach
/// `i.anchor`. The sets must be disjoint.
pub fn bidirectional_cc(
    i: &HelperSet,
    j: &HelperSet,
    state: &NetworkState,
    params: &LinkParams,
) -> Result<bool, ChannelError> {
    if let Some(&shared) = i.members().intersection(j.members()).next() {
        return Err(ChannelError::OverlappingHelperSets(shared));
    }
    let anchor_i = state
        .node(i.anchor())
        .ok_or(ChannelError::UnknownNode(i.anchor()))?;
    let anchor_j = state
        .node(j.anchor())
        .ok_or(ChannelError::UnknownNode(j.anchor()))?;
    Ok(has_cc_link(i, anchor_j, state, params)? && has_cc_link(j, anchor_i, state, params)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Point;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn node(id: u32, x: f64, y: f64) -> UavNode {
        UavNode::new(NodeId(id), Point::new(x, y), 1.0).unwrap()
    }

    fn state_of(nodes: Vec<UavNode>) -> NetworkState {
        NetworkState::new(nodes).unwrap()
    }

    #[test]
    fn tau_from_range_closed_forms() {
        assert_relative_eq!(tau_from_range(1.0, 1.0, 2.0, 50.0).unwrap(), 1.0 / 2500.0);
        assert_relative_eq!(tau_from_range(2.0, 1.0, 2.0, 50.0).unwrap(), 2.0 / 2500.0);
        assert_relative_eq!(tau_from_range(1.0, 1.0, 3.0, 10.0).unwrap(), 1.0 / 1000.0);
    }

    #[test]
    fn tau_from_range_rejects_non_positive() {
        assert!(tau_from_range(0.0, 1.0, 2.0, 50.0).is_err());
        assert!(tau_from_range(1.0, -1.0, 2.0, 50.0).is_err());
        assert!(tau_from_range(1.0, 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn default_tau_matches_50m_calibration() {
        let params = LinkParams::default();
        assert_eq!(tau_from_range(1.0, 1.0, 2.0, 50.0).unwrap(), params.tau);
        assert_relative_eq!(direct_range(1.0, &params), 50.0, max_relative = 1e-12);
    }

    #[test]
    fn pairwise_snr_closed_forms() {
        let params = LinkParams::default();
        let s = node(0, 0.0, 0.0);
        assert_relative_eq!(
            pairwise_snr(&s, &node(1, 25.0, 0.0), &params),
            1.0 / 625.0
        );
        assert_relative_eq!(
            pairwise_snr(&s, &node(1, 50.0, 0.0), &params),
            1.0 / 2500.0
        );
        assert_relative_eq!(
            pairwise_snr(&s, &node(1, 100.0, 0.0), &params),
            1.0 / 10000.0
        );
    }

    #[test]
    fn direct_link_boundary() {
        let params = LinkParams::default();
        let s = node(0, 0.0, 0.0);
        assert!(has_direct_link(&s, &node(1, 50.0, 0.0), &params).unwrap());
        assert!(!has_direct_link(&s, &node(1, 50.001, 0.0), &params).unwrap());
        // co-located nodes are clamped to d_min and always link
        assert!(has_direct_link(&s, &node(1, 0.0, 0.0), &params).unwrap());
    }

    #[test]
    fn direct_link_rejects_dead_node() {
        let params = LinkParams::default();
        let s = node(0, 0.0, 0.0);
        let mut r = node(1, 10.0, 0.0);
        r.alive = false;
        assert_eq!(
            has_direct_link(&s, &r, &params).unwrap_err(),
            ChannelError::DeadNode(NodeId(1))
        );
    }

    #[test]
    fn cc_snr_sums_transmitters() {
        let params = LinkParams::default();
        // sender and one helper both 70 m from the receiver
        let state = state_of(vec![node(0, 0.0, 0.0), node(1, 0.0, 140.0), node(2, 0.0, 70.0)]);
        let senders = HelperSet::new(NodeId(0), BTreeSet::from([NodeId(0), NodeId(1)])).unwrap();
        let receiver = state.node(NodeId(2)).unwrap();
        assert_relative_eq!(
            cc_snr(&senders, receiver, &state, &params).unwrap(),
            2.0 / 4900.0
        );
    }

    #[test]
    fn cc_snr_asymmetric_distances() {
        let params = LinkParams::default();
        // sender at d=80, helper at d=60
        let state = state_of(vec![node(0, -80.0, 0.0), node(1, -60.0, 0.0), node(2, 0.0, 0.0)]);
        let senders = HelperSet::new(NodeId(0), BTreeSet::from([NodeId(0), NodeId(1)])).unwrap();
        let receiver = state.node(NodeId(2)).unwrap();
        assert_relative_eq!(
            cc_snr(&senders, receiver, &state, &params).unwrap(),
            1.0 / 6400.0 + 1.0 / 3600.0
        );
    }

    #[test]
    fn cc_snr_singleton_reduces_to_pairwise() {
        let params = LinkParams::default();
        let state = state_of(vec![node(0, 0.0, 0.0), node(1, 100.0, 0.0)]);
        let senders = HelperSet::singleton(NodeId(0));
        let receiver = state.node(NodeId(1)).unwrap();
        assert_relative_eq!(
            cc_snr(&senders, receiver, &state, &params).unwrap(),
            1.0 / 10000.0
        );
    }

    #[test]
    fn cc_snr_rejects_receiver_in_set() {
        let params = LinkParams::default();
        let state = state_of(vec![node(0, 0.0, 0.0), node(1, 10.0, 0.0)]);
        let senders = HelperSet::new(NodeId(0), BTreeSet::from([NodeId(0), NodeId(1)])).unwrap();
        let receiver = state.node(NodeId(1)).unwrap();
        assert_eq!(
            cc_snr(&senders, receiver, &state, &params).unwrap_err(),
            ChannelError::ReceiverInSenderSet(NodeId(1))
        );
    }

    #[test]
    fn cc_link_boundary_two_transmitters() {
        let params = LinkParams::default();
        let state = state_of(vec![node(0, 0.0, 0.0), node(1, 0.0, 140.0), node(2, 0.0, 70.0)]);
        let senders = HelperSet::new(NodeId(0), BTreeSet::from([NodeId(0), NodeId(1)])).unwrap();
        let receiver = state.node(NodeId(2)).unwrap();
        // 2/4900 >= 4e-4
        assert!(has_cc_link(&senders, receiver, &state, &params).unwrap());

        let state = state_of(vec![node(0, 0.0, 0.0), node(1, 0.0, 142.0), node(2, 0.0, 71.0)]);
        let senders = HelperSet::new(NodeId(0), BTreeSet::from([NodeId(0), NodeId(1)])).unwrap();
        let receiver = state.node(NodeId(2)).unwrap();
        // 2/5041 < 4e-4
        assert!(!has_cc_link(&senders, receiver, &state, &params).unwrap());
    }

    #[test]
    fn direct_link_implies_cc_link() {
        let params = LinkParams::default();
        let state = state_of(vec![node(0, 0.0, 0.0), node(1, 50.0, 0.0)]);
        let senders = HelperSet::singleton(NodeId(0));
        let receiver = state.node(NodeId(1)).unwrap();
        assert!(has_cc_link(&senders, receiver, &state, &params).unwrap());
    }

    #[test]
    fn bidirectional_cc_symmetric_pair() {
        let params = LinkParams::default();
        let state = state_of(vec![
            node(0, -35.0, 0.0),
            node(1, -36.0, 0.0),
            node(2, 35.0, 0.0),
            node(3, 36.0, 0.0),
        ]);
        let side_a = HelperSet::new(NodeId(0), BTreeSet::from([NodeId(0), NodeId(1)])).unwrap();
        let side_b = HelperSet::new(NodeId(2), BTreeSet::from([NodeId(2), NodeId(3)])).unwrap();
        // each direction: 1/4900 + 1/5041 ~= 4.0245e-4 >= tau
        assert!(bidirectional_cc(&side_a, &side_b, &state, &params).unwrap());
    }

    #[test]
    fn bidirectional_cc_fails_at_80m_singletons() {
        let params = LinkParams::default();
        let state = state_of(vec![node(0, -40.0, 0.0), node(1, 40.0, 0.0)]);
        let a = HelperSet::singleton(NodeId(0));
        let b = HelperSet::singleton(NodeId(1));
        assert!(!bidirectional_cc(&a, &b, &state, &params).unwrap());
    }

    #[test]
    fn bidirectional_cc_direct_range_anchors() {
        let params = LinkParams::default();
        let state = state_of(vec![node(0, 0.0, 0.0), node(1, 49.0, 0.0)]);
        let a = HelperSet::singleton(NodeId(0));
        let b = HelperSet::singleton(NodeId(1));
        assert!(bidirectional_cc(&a, &b, &state, &params).unwrap());
    }

    #[test]
    fn bidirectional_cc_rejects_overlap() {
        let params = LinkParams::default();
        let state = state_of(vec![node(0, 0.0, 0.0), node(1, 10.0, 0.0)]);
        let a = HelperSet::new(NodeId(0), BTreeSet::from([NodeId(0), NodeId(1)])).unwrap();
        let b = HelperSet::new(NodeId(1), BTreeSet::from([NodeId(1)])).unwrap();
        assert_eq!(
            bidirectional_cc(&a, &b, &state, &params).unwrap_err(),
            ChannelError::OverlappingHelperSets(NodeId(1))
        );
    }

    #[test]
    fn helper_set_requires_anchor_membership() {
        assert_eq!(
            HelperSet::new(NodeId(0), BTreeSet::from([NodeId(1)])).unwrap_err(),
            ChannelError::AnchorNotInMembers(NodeId(0))
        );
    }

    #[test]
    fn cc_range_extension_boundary() {
        // two co-located unit-power transmitters reach sqrt(2) * 50 m
        let params = LinkParams::default();
        for (d, expect) in [(70.7106, true), (70.7108, false)] {
            let state = state_of(vec![node(0, 0.0, 0.0), node(1, 0.0, 0.0), node(2, d, 0.0)]);
            let senders =
                HelperSet::new(NodeId(0), BTreeSet::from([NodeId(0), NodeId(1)])).unwrap();
            let receiver = state.node(NodeId(2)).unwrap();
            assert_eq!(
                has_cc_link(&senders, receiver, &state, &params).unwrap(),
                expect,
                "d = {d}"
            );
        }
    }

    proptest! {
        // adding a helper never decreases the total SNR
        #[test]
        fn cc_snr_monotone_in_helpers(
            hx in -200.0..200.0f64, hy in -200.0..200.0f64,
            rx in 60.0..200.0f64,
        ) {
            let params = LinkParams::default();
            let state = state_of(vec![
                node(0, 0.0, 0.0),
                node(1, hx, hy),
                node(2, rx, 0.0),
            ]);
            let receiver = state.node(NodeId(2)).unwrap();
            let alone = cc_snr(&HelperSet::singleton(NodeId(0)), receiver, &state, &params).unwrap();
            let with_helper = cc_snr(
                &HelperSet::new(NodeId(0), BTreeSet::from([NodeId(0), NodeId(1)])).unwrap(),
                receiver,
                &state,
                &params,
            ).unwrap();
            prop_assert!(with_helper >= alone);
        }

        // moving a transmitter strictly closer (above d_min) strictly raises SNR
        #[test]
        fn pairwise_snr_strictly_increases_when_closer(
            d in 1.0..500.0f64, shrink in 0.01..0.9f64,
        ) {
            let params = LinkParams::default();
            let r = node(9, 0.0, 0.0);
            let far = node(0, d, 0.0);
            let near = node(0, d * (1.0 - shrink), 0.0);
            prop_assert!(pairwise_snr(&near, &r, &params) > pairwise_snr(&far, &r, &params));
        }

        // with tau calibrated to range R, the direct-link predicate is exactly
        // the distance test d <= R
        #[test]
        fn range_equivalence(
            range in 5.0..200.0f64,
            d in 0.5..400.0f64,
            power in 0.1..10.0f64,
            alpha in 1.5..4.0f64,
        ) {
            let tau = tau_from_range(power, 1.0, alpha, range).unwrap();
            let params = LinkParams::new(alpha, 1.0, tau, 0.1).unwrap();
            let mut s = node(0, 0.0, 0.0);
            let mut r = node(1, d, 0.0);
            s.power = power;
            r.power = power;
            let linked = has_direct_link(&s, &r, &params).unwrap();
            if (d - range).abs() > 1e-9 {
                prop_assert_eq!(linked, d <= range);
            }
        }
    }
}
