//! The 22 message types exchanged by sensors.
//!
//! Payload field names follow the message summary table, in snake_case.
//! Variants that carry a `receiver_id` are unicast; everything else is a
//! broadcast.

use serde::{Deserialize, Serialize};

use crate::geometry::{Axial, HexFrame, Point, PortionId};

pub type SensorId = u32;
pub type TxId = u64;

/// A pending hole trigger as held in a sensor's priority queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerRecord {
    pub hole: Point,
    /// Sensor that detected the hole.
    pub origin: SensorId,
    /// Order value of the sender this record was accepted from.
    pub sender_ord: i64,
    /// Hop counter carried by the accepted message.
    pub horizon: u32,
    pub deadline: f64,
    /// Tile distance from the holder to the hole.
    pub distance: u32,
}

/// What a snapped sensor knows about one adjacent snapped sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub id: SensorId,
    pub tile: Axial,
    pub center: Point,
    pub virtual_cardinality: u32,
    pub ord: i64,
    /// Instant after which `ord` falls back to the neighbor's ID.
    pub ord_expiry: f64,
}

/// Slave or free member of L(p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub id: SensorId,
    pub position: Point,
    pub energy: f64,
}

/// Snapped-role profile handed over in a role exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub frame: HexFrame,
    pub tile: Axial,
    pub position: Point,
    pub base_order_value: i64,
    pub neighbors: Vec<NeighborEntry>,
    pub slaves: Vec<MemberEntry>,
    pub free: Vec<MemberEntry>,
    pub vacant: Vec<Axial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "payload")]
pub enum Body {
    IAS {
        coordinates: Point,
        starter_timestamp: f64,
        /// Lattice of the sender's portion; receivers need the orientation
        /// to localize themselves against Hex(sender).
        frame: HexFrame,
    },
    InfoSnapped {
        coordinates: Point,
        virtual_cardinality: u32,
    },
    InfoSlave {
        coordinates: Point,
        energy_level: f64,
    },
    InfoFree {
        coordinates: Point,
    },
    SIP {
        receiver_id: SensorId,
        target_position: Point,
    },
    AckSIP {
        receiver_id: SensorId,
    },
    ClaimPosition {
        coordinates: Point,
        timestamp: f64,
    },
    PositionTaken {
        coordinates: Point,
    },
    InfoStopped {
        coordinates: Point,
    },
    IAYS {
        receiver_id: SensorId,
    },
    CardinalityInfo {
        virtual_cardinality: u32,
    },
    Offer {
        receiver_id: SensorId,
        virtual_cardinality: u32,
        transaction_id: TxId,
    },
    AckOffer {
        receiver_id: SensorId,
    },
    MoveTo {
        receiver_id: SensorId,
        destination_coordinates: Point,
        destination_snapped_id: SensorId,
        transaction_id: TxId,
    },
    InfoArrived {
        receiver_id: SensorId,
        transaction_id: TxId,
        energy_level: f64,
    },
    HoleInfo {
        hop_counter: i32,
        order_value: i64,
        hole_coordinates: Point,
        timeout: f64,
    },
    Subst {
        receiver_id: SensorId,
        energy_level: f64,
        destination_coordinates: Point,
        /// Push transaction the traveler is serving, so an exchanged
        /// snapped sensor can finish it.
        transaction_id: TxId,
        destination_snapped_id: SensorId,
    },
    AckSubst {
        receiver_id: SensorId,
    },
    SubstArrival {
        receiver_id: SensorId,
    },
    ProfilePacket {
        receiver_id: SensorId,
        order_value: i64,
        priority_queue: Vec<TriggerRecord>,
        neighborhood_information: Neighborhood,
    },
    MoveToSubst {
        receiver_id: SensorId,
        order_value: i64,
        priority_queue: Vec<TriggerRecord>,
        neighborhood_information: Neighborhood,
    },
    Retirement {
        hole_coordinates: Point,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    IAS,
    InfoSnapped,
    InfoSlave,
    InfoFree,
    SIP,
    AckSIP,
    ClaimPosition,
    PositionTaken,
    InfoStopped,
    IAYS,
    CardinalityInfo,
    Offer,
    AckOffer,
    MoveTo,
    InfoArrived,
    HoleInfo,
    Subst,
    AckSubst,
    SubstArrival,
    ProfilePacket,
    MoveToSubst,
    Retirement,
}

impl Variant {
    pub const ALL: [Variant; 22] = [
        Variant::IAS,
        Variant::InfoSnapped,
        Variant::InfoSlave,
        Variant::InfoFree,
        Variant::SIP,
        Variant::AckSIP,
        Variant::ClaimPosition,
        Variant::PositionTaken,
        Variant::InfoStopped,
        Variant::IAYS,
        Variant::CardinalityInfo,
        Variant::Offer,
        Variant::AckOffer,
        Variant::MoveTo,
        Variant::InfoArrived,
        Variant::HoleInfo,
        Variant::Subst,
        Variant::AckSubst,
        Variant::SubstArrival,
        Variant::ProfilePacket,
        Variant::MoveToSubst,
        Variant::Retirement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::IAS => "IAS",
            Variant::InfoSnapped => "InfoSnapped",
            Variant::InfoSlave => "InfoSlave",
            Variant::InfoFree => "InfoFree",
            Variant::SIP => "SIP",
            Variant::AckSIP => "AckSIP",
            Variant::ClaimPosition => "ClaimPosition",
            Variant::PositionTaken => "PositionTaken",
            Variant::InfoStopped => "InfoStopped",
            Variant::IAYS => "IAYS",
            Variant::CardinalityInfo => "CardinalityInfo",
            Variant::Offer => "Offer",
            Variant::AckOffer => "AckOffer",
            Variant::MoveTo => "MoveTo",
            Variant::InfoArrived => "InfoArrived",
            Variant::HoleInfo => "HoleInfo",
            Variant::Subst => "Subst",
            Variant::AckSubst => "AckSubst",
            Variant::SubstArrival => "SubstArrival",
            Variant::ProfilePacket => "ProfilePacket",
            Variant::MoveToSubst => "MoveToSubst",
            Variant::Retirement => "Retirement",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Body {
    pub fn variant(&self) -> Variant {
        match self {
            Body::IAS { .. } => Variant::IAS,
            Body::InfoSnapped { .. } => Variant::InfoSnapped,
            Body::InfoSlave { .. } => Variant::InfoSlave,
            Body::InfoFree { .. } => Variant::InfoFree,
            Body::SIP { .. } => Variant::SIP,
            Body::AckSIP { .. } => Variant::AckSIP,
            Body::ClaimPosition { .. } => Variant::ClaimPosition,
            Body::PositionTaken { .. } => Variant::PositionTaken,
            Body::InfoStopped { .. } => Variant::InfoStopped,
            Body::IAYS { .. } => Variant::IAYS,
            Body::CardinalityInfo { .. } => Variant::CardinalityInfo,
            Body::Offer { .. } => Variant::Offer,
            Body::AckOffer { .. } => Variant::AckOffer,
            Body::MoveTo { .. } => Variant::MoveTo,
            Body::InfoArrived { .. } => Variant::InfoArrived,
            Body::HoleInfo { .. } => Variant::HoleInfo,
            Body::Subst { .. } => Variant::Subst,
            Body::AckSubst { .. } => Variant::AckSubst,
            Body::SubstArrival { .. } => Variant::SubstArrival,
            Body::ProfilePacket { .. } => Variant::ProfilePacket,
            Body::MoveToSubst { .. } => Variant::MoveToSubst,
            Body::Retirement { .. } => Variant::Retirement,
        }
    }

    /// Unicast destination, `None` for broadcasts.
    pub fn receiver(&self) -> Option<SensorId> {
        match *self {
            Body::SIP { receiver_id, .. }
            | Body::AckSIP { receiver_id }
            | Body::IAYS { receiver_id }
            | Body::Offer { receiver_id, .. }
            | Body::AckOffer { receiver_id }
            | Body::MoveTo { receiver_id, .. }
            | Body::InfoArrived { receiver_id, .. }
            | Body::Subst { receiver_id, .. }
            | Body::AckSubst { receiver_id }
            | Body::SubstArrival { receiver_id }
            | Body::ProfilePacket { receiver_id, .. }
            | Body::MoveToSubst { receiver_id, .. } => Some(receiver_id),
            _ => None,
        }
    }
}

/// A message on the air: sender, the tiling portion the sender speaks for,
/// and the payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    #[serde(rename = "id")]
    pub sender: SensorId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub portion: Option<PortionId>,
    #[serde(flatten)]
    pub body: Body,
}

impl Message {
    pub fn variant(&self) -> Variant {
        self.body.variant()
    }

    pub fn receiver(&self) -> Option<SensorId> {
        self.body.receiver()
    }

    pub fn is_broadcast(&self) -> bool {
        self.receiver().is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unicast_iff_receiver_field() {
        let p = Point::new(1.0, 2.0);
        let ias = Body::IAS {
            coordinates: p,
            starter_timestamp: 0.0,
            frame: HexFrame::new(p, 0.0, 5.0, 0.0, 1),
        };
        assert_eq!(ias.receiver(), None);
        let sip = Body::SIP {
            receiver_id: 9,
            target_position: p,
        };
        assert_eq!(sip.receiver(), Some(9));
        let hole = Body::HoleInfo {
            hop_counter: 0,
            order_value: 0,
            hole_coordinates: p,
            timeout: 10.0,
        };
        assert_eq!(hole.receiver(), None);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.as_str()), Some(v));
        }
    }

    #[test]
    fn wire_field_names() {
        let m = Message {
            sender: 3,
            portion: None,
            body: Body::Offer {
                receiver_id: 4,
                virtual_cardinality: 2,
                transaction_id: 77,
            },
        };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"id":3,"variant":"Offer","payload":{"receiver_id":4,"virtual_cardinality":2,"transaction_id":77}}"#
        );
        let back: Message = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
