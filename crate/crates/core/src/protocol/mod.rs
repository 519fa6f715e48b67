//! Per-sensor coordination state machine.
//!
//! Every handler is a deterministic function of `(state, input, now,
//! context)`; side effects (messages, motion, timers) are returned as
//! [`Effects`] for the simulator to apply.

mod merge;
pub mod message;
mod pull;
mod push;
mod snap;
pub mod state;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use message::{
    Body, MemberEntry, Message, NeighborEntry, Neighborhood, SensorId, TriggerRecord, TxId, Variant,
};
pub use state::{Role, SensorState, SnappedState, TimerId};

use crate::geometry::{Point, Polygon};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// `{|S(p)| > |S(q)|+1} ∨ {|S(p)| = |S(q)|+1 ∧ ord(p) > ord(q)}`, evaluated
/// on virtual cardinalities.
pub fn moving_condition(card_p: u32, card_q: u32, ord_p: i64, ord_q: i64) -> bool {
    card_p > card_q + 1 || (card_p == card_q + 1 && ord_p > ord_q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    /// Joules per meter traveled.
    pub move_per_m: f64,
    pub tx: f64,
    pub rx: f64,
    pub initial: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            move_per_m: 1.0,
            tx: 0.01,
            rx: 0.005,
            initial: 1e4,
        }
    }
}

/// Radio, motion and timing parameters shared by all sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub r_s: f64,
    pub r_tx: f64,
    pub speed: f64,
    /// 99th-percentile one-hop delivery latency of the medium.
    pub t_msg: f64,
    pub energy: EnergyModel,
    /// Role-exchange hysteresis as a fraction of battery capacity.
    pub subst_hysteresis: f64,
    /// Largest hop counter a hole trigger is extended to.
    pub max_hop: u32,
}

impl ProtocolParams {
    pub fn new(r_s: f64, r_tx: f64, speed: f64, t_msg: f64) -> Self {
        Self {
            r_s,
            r_tx,
            speed,
            t_msg,
            energy: EnergyModel::default(),
            subst_hysteresis: 0.05,
            max_hop: 8,
        }
    }

    /// Claim distance: a disk of this radius around a center fits in the
    /// hexagon.
    pub fn stop_distance(&self) -> f64 {
        SQRT3 * self.r_s / 2.0
    }

    pub fn discovery_window(&self) -> f64 {
        3.0 * self.t_msg
    }

    pub fn ack_sip_timeout(&self) -> f64 {
        2.0 * self.t_msg
    }

    pub fn claim_timeout(&self) -> f64 {
        4.0 * self.t_msg
    }

    /// Wait for the IAS of a sensor that acknowledged a SIP from `distance`
    /// meters away. Covers the approach, the claim window, and a possible
    /// hand-off by a hybrid sensor.
    pub fn ias_timeout(&self, distance: f64) -> f64 {
        (distance + 2.0 * self.r_s) / self.speed + self.claim_timeout() + 4.0 * self.t_msg
    }

    pub fn iays_timeout(&self) -> f64 {
        2.0 * self.t_msg
    }

    /// How long a claim loser waits for the winner's IAS.
    pub fn winner_ias_timeout(&self) -> f64 {
        self.stop_distance() / self.speed + self.claim_timeout() + 4.0 * self.t_msg
    }

    pub fn offer_timeout(&self) -> f64 {
        4.0 * self.t_msg
    }

    pub fn push_tx_timeout(&self) -> f64 {
        2.0 * SQRT3 * self.r_s / self.speed + 4.0 * self.t_msg
    }

    pub fn subst_timeout(&self) -> f64 {
        2.0 * self.t_msg
    }

    /// Wait for a substitute to cover `distance` meters to the snap position.
    pub fn subst_arrival_timeout(&self, distance: f64) -> f64 {
        distance / self.speed + 4.0 * self.t_msg
    }

    /// Hole trigger timeout for hop counter `h`: `(h+1)·2·R_s/v`.
    pub fn t_out(&self, h: u32) -> f64 {
        (h as f64 + 1.0) * 2.0 * self.r_s / self.speed
    }

    pub fn motion_cost(&self, meters: f64) -> f64 {
        meters * self.energy.move_per_m
    }
}

/// Read-only knowledge shared by every sensor: parameters and the AoI.
#[derive(Debug, Clone)]
pub struct Context {
    pub params: ProtocolParams,
    pub aoi: Arc<Polygon>,
}

impl Context {
    pub fn new(params: ProtocolParams, aoi: Polygon) -> Self {
        Self {
            params,
            aoi: Arc::new(aoi),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    /// The starter instant came up; `theta` is the orientation a new portion
    /// would use.
    StarterFire {
        theta: f64,
    },
    Message(Message),
    Timer(TimerId),
    /// The current motion reached its target (or stop distance).
    Arrived,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MotionCmd {
    Go { target: Point, stop_at: f64 },
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimerCmd {
    Set(TimerId, f64),
    Cancel(TimerId),
}

/// Observations recorded in traces that are not visible as messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "note", rename_all = "snake_case")]
pub enum Note {
    OfferDeclined { from: SensorId, tx: TxId },
    PullStarted { hole: Point },
    PullAbandoned { hole: Point },
    NeighborLost { neighbor: SensorId },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Effects {
    pub outbound: Vec<Message>,
    pub motions: Vec<MotionCmd>,
    pub timers: Vec<TimerCmd>,
    pub notes: Vec<Note>,
}

impl Effects {
    fn set_timer(&mut self, id: TimerId, at: f64) {
        self.timers.push(TimerCmd::Set(id, at));
    }

    fn cancel_timer(&mut self, id: TimerId) {
        self.timers.push(TimerCmd::Cancel(id));
    }

    fn go(&mut self, target: Point, stop_at: f64) {
        self.motions.push(MotionCmd::Go { target, stop_at });
    }

    fn stop(&mut self) {
        self.motions.push(MotionCmd::Stop);
    }
}

/// New state plus effects of one handler invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct HandlerOutput {
    pub state: SensorState,
    pub effects: Effects,
}

/// Pure entry point: the input state is left untouched.
pub fn handle(state: &SensorState, input: &Input, now: f64, ctx: &Context) -> HandlerOutput {
    let mut next = state.clone();
    let effects = next.step(input, now, ctx);
    HandlerOutput {
        state: next,
        effects,
    }
}

impl SensorState {
    /// Apply one input in place.
    pub fn step(&mut self, input: &Input, now: f64, ctx: &Context) -> Effects {
        let mut out = Effects::default();
        match input {
            Input::StarterFire { theta } => self.starter_fire(*theta, now, ctx, &mut out),
            Input::Arrived => self.on_arrived(now, ctx, &mut out),
            Input::Timer(t) => self.on_timer(*t, now, ctx, &mut out),
            Input::Message(m) => {
                self.heard_any = true;
                if m.receiver().is_some_and(|r| r != self.id) {
                    return out;
                }
                self.on_message(m, now, ctx, &mut out);
            }
        }
        out
    }

    fn send(&self, out: &mut Effects, portion: Option<crate::geometry::PortionId>, body: Body) {
        out.outbound.push(Message {
            sender: self.id,
            portion,
            body,
        });
    }

    /// Send on behalf of the held tile's portion.
    fn send_duty(&self, out: &mut Effects, body: Body) {
        let portion = self.snapped.as_ref().map(|s| s.portion()).or(self.portion);
        self.send(out, portion, body);
    }

    /// Send on behalf of the honored portion.
    fn send_member(&self, out: &mut Effects, body: Body) {
        self.send(out, self.portion, body);
    }

    fn on_arrived(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        match self.purpose.take() {
            Some(state::Purpose::SnapApproach) => self.mover_reached_claim_distance(now, ctx, out),
            Some(state::Purpose::SnapFinal) => self.snapped_arrived(now, ctx, out),
            Some(state::Purpose::PushLeg { last }) => self.traveler_leg_done(last, now, ctx, out),
            Some(state::Purpose::SubstDivert) => self.traveler_reached_subst(now, ctx, out),
            Some(state::Purpose::SubstTakeover) => self.substitute_arrived(now, ctx, out),
            None => {}
        }
    }

    fn on_timer(&mut self, t: TimerId, now: f64, ctx: &Context, out: &mut Effects) {
        match t {
            TimerId::Discovery => self.discovery_done(now, ctx, out),
            TimerId::AckSip(tile) => self.ack_sip_expired(tile, now, ctx, out),
            TimerId::IasWait(tile) => self.ias_wait_expired(tile, now, ctx, out),
            TimerId::Claim => self.claim_expired(now, ctx, out),
            TimerId::Stopped => self.stopped_expired(now, ctx, out),
            TimerId::Offer => self.offer_expired(now, ctx, out),
            TimerId::PushTx(tx) => self.push_tx_expired(tx, now, ctx, out),
            TimerId::SubstWait => self.subst_wait_expired(now, ctx, out),
            TimerId::SubstArrival => self.subst_arrival_expired(now, ctx, out),
            TimerId::Pull => self.pull_expired(now, ctx, out),
            TimerId::PullWait => self.pull_wait_expired(now, ctx, out),
            TimerId::Trigger(hole) => self.trigger_expired(hole, now, ctx, out),
        }
    }

    fn on_message(&mut self, m: &Message, now: f64, ctx: &Context, out: &mut Effects) {
        use std::cmp::Ordering;
        let duty = self.snapped.as_ref().map(|s| s.portion());
        let as_duty = match (m.portion, self.portion) {
            (None, _) => duty.is_some(),
            (Some(_), None) => {
                if matches!(m.body, Body::IAS { .. }) {
                    self.adopt_portion(m, now, ctx, out);
                    return;
                }
                false
            }
            (Some(sp), Some(hp)) => {
                if Some(sp) == duty {
                    true
                } else {
                    match sp.cmp_age(&hp) {
                        Ordering::Equal => false,
                        Ordering::Less => {
                            if matches!(m.body, Body::IAS { .. }) {
                                self.merge_with_older(m, now, ctx, out);
                            }
                            return;
                        }
                        Ordering::Greater => {
                            if matches!(m.body, Body::IAS { .. }) {
                                self.newer_portion_heard(m, now, ctx, out);
                            }
                            return;
                        }
                    }
                }
            }
        };
        self.dispatch(m, as_duty, now, ctx, out);
    }

    fn dispatch(&mut self, m: &Message, as_duty: bool, now: f64, ctx: &Context, out: &mut Effects) {
        let from = m.sender;
        match &m.body {
            Body::IAS {
                coordinates, frame, ..
            } => {
                if as_duty {
                    self.snapped_on_ias(from, *coordinates, now, ctx, out);
                } else {
                    self.member_on_ias(from, *coordinates, *frame, now, ctx, out);
                }
            }
            Body::InfoSnapped {
                coordinates,
                virtual_cardinality,
            } => {
                if as_duty {
                    self.on_info_snapped(from, *coordinates, *virtual_cardinality, now, ctx, out);
                }
            }
            Body::InfoSlave {
                coordinates,
                energy_level,
            } => {
                if as_duty {
                    self.on_info_slave(from, *coordinates, *energy_level, now, ctx, out);
                } else if let Some(sn) = self.snapped.as_mut() {
                    sn.forget_member(from);
                }
            }
            Body::InfoFree { coordinates } => {
                if as_duty {
                    self.on_info_free(from, *coordinates, now, ctx, out);
                } else if let Some(sn) = self.snapped.as_mut() {
                    sn.forget_member(from);
                }
            }
            Body::InfoStopped { coordinates } => {
                if self.snapped.is_some() {
                    self.on_info_stopped(from, *coordinates, now, ctx, out);
                }
            }
            Body::SIP {
                target_position, ..
            } => self.member_on_sip(from, *target_position, m.portion, now, ctx, out),
            Body::AckSIP { .. } => {
                if as_duty {
                    self.on_ack_sip(from, now, ctx, out);
                }
            }
            Body::ClaimPosition {
                coordinates,
                timestamp,
            } => self.on_claim_position(from, *coordinates, *timestamp, now, ctx, out),
            Body::PositionTaken { coordinates } => {
                self.on_position_taken(from, *coordinates, m.portion, now, ctx, out)
            }
            Body::IAYS { .. } => self.on_iays(from, now, ctx, out),
            Body::CardinalityInfo {
                virtual_cardinality,
            } => {
                if as_duty {
                    self.on_cardinality_info(from, *virtual_cardinality, now, ctx, out);
                }
            }
            Body::Offer {
                virtual_cardinality,
                transaction_id,
                ..
            } => {
                if as_duty {
                    self.handle_offer(from, *virtual_cardinality, *transaction_id, now, ctx, out);
                }
            }
            Body::AckOffer { .. } => {
                if as_duty {
                    self.on_ack_offer(from, now, ctx, out);
                }
            }
            Body::MoveTo {
                destination_coordinates,
                destination_snapped_id,
                transaction_id,
                ..
            } => self.on_move_to(
                from,
                *destination_coordinates,
                *destination_snapped_id,
                *transaction_id,
                m.portion,
                now,
                ctx,
                out,
            ),
            Body::InfoArrived {
                transaction_id,
                energy_level,
                ..
            } => {
                if self.snapped.is_some() {
                    self.on_info_arrived(from, *transaction_id, *energy_level, now, ctx, out);
                }
            }
            Body::HoleInfo {
                hop_counter,
                order_value,
                hole_coordinates,
                timeout,
            } => {
                if as_duty {
                    self.handle_holeinfo(
                        from,
                        *hop_counter,
                        *order_value,
                        *hole_coordinates,
                        *timeout,
                        now,
                        ctx,
                        out,
                    );
                }
            }
            Body::Subst {
                energy_level,
                destination_coordinates,
                transaction_id,
                destination_snapped_id,
                ..
            } => {
                if as_duty {
                    self.on_subst(
                        from,
                        *energy_level,
                        *destination_coordinates,
                        *transaction_id,
                        *destination_snapped_id,
                        now,
                        ctx,
                        out,
                    );
                }
            }
            Body::AckSubst { .. } => self.on_ack_subst(from, now, ctx, out),
            Body::SubstArrival { .. } => self.on_subst_arrival(from, now, ctx, out),
            Body::ProfilePacket {
                order_value,
                priority_queue,
                neighborhood_information,
                ..
            } => self.on_profile_packet(
                from,
                *order_value,
                priority_queue,
                neighborhood_information,
                now,
                ctx,
                out,
            ),
            Body::MoveToSubst {
                order_value,
                priority_queue,
                neighborhood_information,
                ..
            } => self.on_move_to_subst(
                from,
                *order_value,
                priority_queue,
                neighborhood_information,
                now,
                ctx,
                out,
            ),
            Body::Retirement { hole_coordinates } => {
                if as_duty {
                    self.on_retirement(from, *hole_coordinates, now, ctx, out);
                }
            }
        }
    }

    fn set_role(&mut self, role: Role) {
        self.role = role;
    }
}
