use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::message::{MemberEntry, NeighborEntry, SensorId, TriggerRecord, TxId};
use crate::geometry::{Axial, HexFrame, Point, PortionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Free,
    Slave,
    Snapped,
    StoppedPending,
    Hybrid,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Free => "free",
            Role::Slave => "slave",
            Role::Snapped => "snapped",
            Role::StoppedPending => "stopped-pending",
            Role::Hybrid => "hybrid",
        }
    }
}

/// Timers a sensor may arm. At most one instance of each ID is live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimerId {
    Discovery,
    AckSip(Axial),
    IasWait(Axial),
    Claim,
    Stopped,
    Offer,
    PushTx(TxId),
    SubstWait,
    SubstArrival,
    Pull,
    PullWait,
    Trigger(Axial),
}

/// Why the sensor is currently moving; decides how an arrival is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Purpose {
    /// Traveling toward a snap position, stopping at the claim distance.
    SnapApproach,
    /// Won the claim, covering the last stretch to the center.
    SnapFinal,
    /// Pushed toward another hexagon. `last` is false for the leg that ends
    /// where the route enters an intermediate hexagon.
    PushLeg { last: bool },
    /// Accepted a role exchange mid-route, heading to the snap position.
    SubstDivert,
    /// Elected substitute heading to its former owner's snap position.
    SubstTakeover,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoverPhase {
    Approaching,
    Claiming,
}

/// A sensor that acknowledged a SIP and is moving to fill a position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mover {
    pub target: Point,
    pub frame: HexFrame,
    pub tile: Axial,
    pub sip_from: SensorId,
    pub phase: MoverPhase,
}

/// A pushed sensor on its way to another hexagon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traveler {
    pub dest_center: Point,
    pub dest_id: SensorId,
    pub tx: TxId,
    /// Snapped sensor of an intermediate hexagon proposed a role exchange to.
    pub subst_with: Option<(SensorId, Point)>,
    pub subst_accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SipTx {
    pub candidate: SensorId,
    pub acked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferTx {
    pub to: SensorId,
    pub tx: TxId,
    pub my_card: u32,
    pub their_card: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inbound {
    pub from: SensorId,
    pub deadline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullState {
    pub hole: Axial,
    pub hop: u32,
}

/// What a snapped sensor does once its tile has been handed to a
/// substitute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AfterHandoff {
    /// Fill a position in the older portion.
    Snap {
        target: Point,
        frame: HexFrame,
        tile: Axial,
        sip_from: SensorId,
    },
    /// Continue a push transaction, either for the older portion (merge) or
    /// in place of a traveler that proposed a role exchange.
    Travel {
        dest_center: Point,
        dest_id: SensorId,
        tx: TxId,
        frame: HexFrame,
    },
    /// Nothing left to lead: ask the older portion for a hexagon to join.
    Rejoin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handoff {
    pub after: AfterHandoff,
    pub substitute: Option<SensorId>,
    /// Substitution initiated by a traveler's Subst: the traveler becomes
    /// the substitute and no fallback to other slaves is attempted.
    pub via_subst: bool,
}

/// Duties of a sensor holding a tile center (snapped or hybrid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnappedState {
    pub frame: HexFrame,
    pub tile: Axial,
    pub center: Point,
    pub arrived: bool,
    pub discovering: bool,
    /// Neighbor tiles expected to answer the current discovery round.
    pub awaiting_reply: BTreeSet<Axial>,
    pub slaves: BTreeMap<SensorId, MemberEntry>,
    pub free: BTreeMap<SensorId, MemberEntry>,
    pub nbr_snapped: BTreeMap<Axial, NeighborEntry>,
    /// Neighbors whose virtual cardinality has not been heard yet. An IAS
    /// or PositionTaken carries none, so no offer goes to them until an
    /// InfoSnapped or CardinalityInfo does.
    pub card_unknown: BTreeSet<Axial>,
    pub vp: BTreeSet<Axial>,
    pub sips: BTreeMap<Axial, SipTx>,
    pub tried: BTreeMap<Axial, BTreeSet<SensorId>>,
    pub inbound: BTreeMap<TxId, Inbound>,
    pub offer: Option<OfferTx>,
    /// Neighbors that silently refused an offer, with the (own, their)
    /// cardinalities at the time. Cleared when either value changes.
    pub offer_blocked: BTreeMap<SensorId, (u32, u32)>,
    pub trigger_queue: Vec<TriggerRecord>,
    pub pull: Option<PullState>,
    pub pull_wait_armed: bool,
    pub pull_wait_elapsed: bool,
    pub pull_exhausted: BTreeSet<Axial>,
    pub last_advertised: Option<u32>,
    pub handoff: Option<Handoff>,
    /// Senders from newer portions already answered with a fresh IAS.
    pub reannounced_for: BTreeSet<SensorId>,
}

impl SnappedState {
    pub fn new(frame: HexFrame, tile: Axial) -> Self {
        Self {
            frame,
            tile,
            center: frame.center(tile),
            arrived: false,
            discovering: false,
            awaiting_reply: BTreeSet::new(),
            slaves: BTreeMap::new(),
            free: BTreeMap::new(),
            nbr_snapped: BTreeMap::new(),
            card_unknown: BTreeSet::new(),
            vp: BTreeSet::new(),
            sips: BTreeMap::new(),
            tried: BTreeMap::new(),
            inbound: BTreeMap::new(),
            offer: None,
            offer_blocked: BTreeMap::new(),
            trigger_queue: Vec::new(),
            pull: None,
            pull_wait_armed: false,
            pull_wait_elapsed: false,
            pull_exhausted: BTreeSet::new(),
            last_advertised: None,
            handoff: None,
            reannounced_for: BTreeSet::new(),
        }
    }

    /// Slaves physically inside the hexagon and still commanded.
    pub fn real_card(&self) -> u32 {
        self.slaves.len() as u32
    }

    /// Cardinality counting accepted inbound pushes as already concluded.
    /// Outbound slaves leave `slaves` when dispatched.
    pub fn virtual_card(&self) -> u32 {
        self.real_card() + self.inbound.len() as u32
    }

    pub fn portion(&self) -> PortionId {
        self.frame.portion()
    }

    pub fn neighbor_by_id(&self, id: SensorId) -> Option<&NeighborEntry> {
        self.nbr_snapped.values().find(|n| n.id == id)
    }

    pub fn forget_member(&mut self, id: SensorId) {
        self.slaves.remove(&id);
        self.free.remove(&id);
    }
}

/// Full per-sensor protocol state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorState {
    pub id: SensorId,
    pub role: Role,
    pub position: Point,
    pub energy: f64,
    /// Portion this sensor honors (the oldest it has heard of).
    pub portion: Option<PortionId>,
    /// Lattice of the honored portion.
    pub frame: Option<HexFrame>,
    pub owner: Option<SensorId>,
    pub owner_center: Option<Point>,
    pub heard_any: bool,
    pub ord: i64,
    pub base_ord: i64,
    pub tx_counter: u32,
    pub claim_ts: Option<f64>,
    pub mover: Option<Mover>,
    pub traveler: Option<Traveler>,
    pub purpose: Option<Purpose>,
    /// Snapped sensors heard in the honored portion, by tile.
    pub heard_snapped: BTreeMap<Axial, (SensorId, Point)>,
    /// Pending takeover after a MoveToSubst: the profile to install.
    pub takeover: Option<(
        SensorId,
        super::message::Neighborhood,
        i64,
        Vec<TriggerRecord>,
    )>,
    pub snapped: Option<SnappedState>,
}

impl SensorState {
    pub fn new(id: SensorId, position: Point, energy: f64) -> Self {
        Self {
            id,
            role: Role::Free,
            position,
            energy,
            portion: None,
            frame: None,
            owner: None,
            owner_center: None,
            heard_any: false,
            ord: id as i64,
            base_ord: id as i64,
            tx_counter: 0,
            claim_ts: None,
            mover: None,
            traveler: None,
            purpose: None,
            heard_snapped: BTreeMap::new(),
            takeover: None,
            snapped: None,
        }
    }

    pub fn next_tx(&mut self) -> TxId {
        self.tx_counter += 1;
        ((self.id as u64) << 32) | self.tx_counter as u64
    }

    /// Tile center if the sensor currently holds one.
    pub fn snapped_center(&self) -> Option<Point> {
        self.snapped.as_ref().map(|s| s.center)
    }

    pub fn is_engaged(&self) -> bool {
        self.mover.is_some() || self.traveler.is_some() || self.takeover.is_some()
    }
}
