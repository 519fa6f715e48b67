//! Push activity: offers between adjacent snapped sensors, moving slaves to
//! the receiving hexagon, and role exchanges along the way.

use super::message::{Body, MemberEntry, NeighborEntry, SensorId, TxId};
use super::state::{AfterHandoff, Inbound, OfferTx, Purpose, Role, SensorState, TimerId, Traveler};
use super::{moving_condition, Context, Effects, Note};
use crate::geometry::{HexFrame, Point};

/// Distance a traveler goes past a hexagon boundary so it ends up strictly
/// inside.
const ENTRY_MARGIN: f64 = 0.1;

/// Order value of a neighbor, falling back to its ID once the last trigger
/// it announced has expired.
pub(super) fn effective_ord(n: &NeighborEntry, now: f64) -> i64 {
    if now < n.ord_expiry {
        n.ord
    } else {
        n.id as i64
    }
}

/// Point just inside the hexagon around `center` on the way from `from`.
fn inside_entry(frame: &HexFrame, from: Point, center: Point) -> Point {
    let e = frame.entry_point(from, center);
    let rest = e.dist(center);
    if rest <= ENTRY_MARGIN {
        center
    } else {
        e.toward(center, ENTRY_MARGIN)
    }
}

impl SensorState {
    pub(super) fn advertise_cardinality(&mut self, out: &mut Effects) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        if !sn.arrived {
            return;
        }
        let v = sn.virtual_card();
        if sn.last_advertised != Some(v) {
            sn.last_advertised = Some(v);
            self.send_duty(
                out,
                Body::CardinalityInfo {
                    virtual_cardinality: v,
                },
            );
        }
    }

    pub(super) fn on_cardinality_info(
        &mut self,
        from: SensorId,
        card: u32,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let Some(n) = sn.nbr_snapped.values_mut().find(|n| n.id == from) else {
            return;
        };
        let tile = n.tile;
        if n.virtual_cardinality != card || sn.card_unknown.remove(&tile) {
            n.virtual_cardinality = card;
            sn.offer_blocked.remove(&from);
        }
        self.reassess(now, ctx, out);
    }

    /// Offer a slave to the best neighbor satisfying the moving condition.
    pub(super) fn try_offer(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        let ord = self.ord;
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        if !sn.arrived
            || sn.discovering
            || !sn.vp.is_empty()
            || !sn.sips.is_empty()
            || sn.offer.is_some()
            || sn.handoff.is_some()
            || sn.real_card() == 0
        {
            return;
        }
        let my = sn.virtual_card();
        let hole = sn.trigger_queue.first().map(|r| sn.frame.tile_of(r.hole));
        let candidates = sn.nbr_snapped.values().filter(|n| {
            !sn.card_unknown.contains(&n.tile)
                && moving_condition(my, n.virtual_cardinality, ord, effective_ord(n, now))
                && sn.offer_blocked.get(&n.id) != Some(&(my, n.virtual_cardinality))
        });
        let pick = match hole {
            Some(h) => candidates.min_by_key(|n| (n.tile.distance(h), n.id)),
            None => candidates.min_by_key(|n| (n.virtual_cardinality, n.id)),
        };
        let Some(n) = pick else {
            return;
        };
        let (to, their) = (n.id, n.virtual_cardinality);
        let tx = self.next_tx();
        let sn = self.snapped.as_mut().expect("checked above");
        sn.offer = Some(OfferTx {
            to,
            tx,
            my_card: my,
            their_card: their,
        });
        self.send_duty(
            out,
            Body::Offer {
                receiver_id: to,
                virtual_cardinality: my,
                transaction_id: tx,
            },
        );
        out.set_timer(TimerId::Offer, now + ctx.params.offer_timeout());
    }

    /// Accept iff the moving condition still holds against the current
    /// virtual cardinality; refusals are silent.
    pub(super) fn handle_offer(
        &mut self,
        from: SensorId,
        card_p: u32,
        tx: TxId,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let ord = self.ord;
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let ord_p = sn
            .neighbor_by_id(from)
            .map(|n| effective_ord(n, now))
            .unwrap_or(from as i64);
        if !sn.arrived || sn.handoff.is_some() || sn.neighbor_by_id(from).is_none() {
            // Not in a position to take part in a push yet; the offer
            // times out on the other side.
            return;
        }
        if let Some(n) = sn.nbr_snapped.values_mut().find(|n| n.id == from) {
            n.virtual_cardinality = card_p;
            let tile = n.tile;
            sn.card_unknown.remove(&tile);
        }
        if !moving_condition(card_p, sn.virtual_card(), ord_p, ord) {
            out.notes.push(Note::OfferDeclined { from, tx });
            return;
        }
        let deadline = now + ctx.params.push_tx_timeout();
        sn.inbound.insert(tx, Inbound { from, deadline });
        if let Some(n) = sn.nbr_snapped.values_mut().find(|n| n.id == from) {
            n.virtual_cardinality = card_p.saturating_sub(1);
        }
        self.send_duty(out, Body::AckOffer { receiver_id: from });
        out.set_timer(TimerId::PushTx(tx), deadline);
        self.advertise_cardinality(out);
    }

    pub(super) fn on_ack_offer(
        &mut self,
        from: SensorId,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let own_energy = self.energy;
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let Some(offer) = sn.offer.take_if(|o| o.to == from) else {
            return;
        };
        out.cancel_timer(TimerId::Offer);
        let Some(dest) = sn.neighbor_by_id(from).map(|n| n.center) else {
            return;
        };
        let p = &ctx.params;
        let best = sn
            .slaves
            .values()
            .max_by(|a, b| {
                let va = a.energy - p.motion_cost(a.position.dist(dest));
                let vb = b.energy - p.motion_cost(b.position.dist(dest));
                va.total_cmp(&vb).then(b.id.cmp(&a.id))
            })
            .cloned();
        let Some(slave) = best else {
            return;
        };
        if let Some(n) = sn.nbr_snapped.values_mut().find(|n| n.id == from) {
            n.virtual_cardinality = offer.their_card + 1;
        }
        let frame = sn.frame;
        let threshold = own_energy + p.subst_hysteresis * p.energy.initial;
        if slave.energy - p.motion_cost(slave.position.dist(sn.center)) > threshold {
            // The slave has more to spare: it takes over here and this
            // sensor makes the trip.
            let after = AfterHandoff::Travel {
                dest_center: dest,
                dest_id: from,
                tx: offer.tx,
                frame,
            };
            self.begin_handoff(after, Some(slave.id), false, now, ctx, out);
            return;
        }
        sn.slaves.remove(&slave.id);
        self.send_duty(
            out,
            Body::MoveTo {
                receiver_id: slave.id,
                destination_coordinates: dest,
                destination_snapped_id: from,
                transaction_id: offer.tx,
            },
        );
        self.advertise_cardinality(out);
        self.reassess(now, ctx, out);
    }

    /// No AckOffer: the neighbor refused or is gone. Stop offering to it at
    /// these cardinalities and re-check the neighborhood.
    pub(super) fn offer_expired(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let Some(o) = sn.offer.take() else {
            return;
        };
        sn.offer_blocked.insert(o.to, (o.my_card, o.their_card));
        if sn.handoff.is_none() && !sn.discovering {
            self.start_discovery(now, ctx, out);
        }
    }

    pub(super) fn push_tx_expired(&mut self, tx: TxId, now: f64, ctx: &Context, out: &mut Effects) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        if sn.inbound.remove(&tx).is_none() {
            return;
        }
        self.advertise_cardinality(out);
        self.reassess(now, ctx, out);
    }

    pub(super) fn on_move_to(
        &mut self,
        from: SensorId,
        dest: Point,
        dest_id: SensorId,
        tx: TxId,
        portion: Option<crate::geometry::PortionId>,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        if self.role == Role::Hybrid {
            if portion.is_some() && portion == self.portion && self.owner == Some(from) {
                let Some(frame) = self.frame else {
                    return;
                };
                let after = AfterHandoff::Travel {
                    dest_center: dest,
                    dest_id,
                    tx,
                    frame,
                };
                self.begin_handoff(after, None, false, now, ctx, out);
            }
            return;
        }
        if self.role != Role::Slave || self.owner != Some(from) || self.is_engaged() {
            return;
        }
        let Some(frame) = self.frame else {
            return;
        };
        self.start_travel(dest, dest_id, tx, frame, ctx, out);
    }

    /// Head for the destination hexagon. If the route enters a hexagon whose
    /// snapped sensor is known, stop there first to propose a role exchange.
    pub(super) fn start_travel(
        &mut self,
        dest: Point,
        dest_id: SensorId,
        tx: TxId,
        frame: HexFrame,
        ctx: &Context,
        out: &mut Effects,
    ) {
        self.set_role(Role::Free);
        self.owner = None;
        self.owner_center = None;
        let target = inside_entry(&frame, self.position, dest);
        let start_tile = frame.tile_of(self.position);
        let dest_tile = frame.tile_of(dest);
        let mut via = None;
        let len = self.position.dist(target);
        let steps = (len / 0.25).ceil() as usize;
        for k in 1..steps {
            let p = self.position.toward(target, len * k as f64 / steps as f64);
            let t = frame.tile_of(p);
            if t == start_tile || t == dest_tile {
                continue;
            }
            if let Some(&(id, c)) = self.heard_snapped.get(&t) {
                via = Some((id, c));
            }
            break;
        }
        let _ = ctx;
        self.traveler = Some(Traveler {
            dest_center: dest,
            dest_id,
            tx,
            subst_with: via,
            subst_accepted: false,
        });
        match via {
            Some((_, c)) => {
                self.purpose = Some(Purpose::PushLeg { last: false });
                out.go(inside_entry(&frame, self.position, c), 0.0);
            }
            None => {
                self.purpose = Some(Purpose::PushLeg { last: true });
                out.go(target, 0.0);
            }
        }
    }

    pub(super) fn traveler_leg_done(
        &mut self,
        last: bool,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(tr) = self.traveler.clone() else {
            return;
        };
        if !last {
            if let Some((id, _)) = tr.subst_with {
                self.send_member(
                    out,
                    Body::Subst {
                        receiver_id: id,
                        energy_level: self.energy,
                        destination_coordinates: tr.dest_center,
                        transaction_id: tr.tx,
                        destination_snapped_id: tr.dest_id,
                    },
                );
                out.set_timer(TimerId::SubstWait, now + ctx.params.subst_timeout());
                return;
            }
        }
        if !last {
            self.final_leg(out);
            return;
        }
        self.traveler = None;
        self.send_member(
            out,
            Body::InfoArrived {
                receiver_id: tr.dest_id,
                transaction_id: tr.tx,
                energy_level: self.energy,
            },
        );
        self.set_role(Role::Slave);
        self.owner = Some(tr.dest_id);
        self.owner_center = Some(tr.dest_center);
    }

    fn final_leg(&mut self, out: &mut Effects) {
        let Some(tr) = self.traveler.as_mut() else {
            return;
        };
        tr.subst_with = None;
        tr.subst_accepted = false;
        let dest = tr.dest_center;
        let Some(frame) = self.frame else {
            return;
        };
        self.purpose = Some(Purpose::PushLeg { last: true });
        out.go(inside_entry(&frame, self.position, dest), 0.0);
    }

    pub(super) fn subst_wait_expired(&mut self, _now: f64, _ctx: &Context, out: &mut Effects) {
        if self
            .traveler
            .as_ref()
            .is_some_and(|t| t.subst_with.is_some())
        {
            self.final_leg(out);
        }
    }

    pub(super) fn on_info_arrived(
        &mut self,
        from: SensorId,
        tx: TxId,
        energy: f64,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let origin = sn
            .inbound
            .remove(&tx)
            .and_then(|i| sn.neighbor_by_id(i.from).map(|n| n.center));
        out.cancel_timer(TimerId::PushTx(tx));
        let position = origin.map_or(sn.center, |o| inside_entry(&sn.frame, o, sn.center));
        sn.free.remove(&from);
        sn.slaves.insert(
            from,
            MemberEntry {
                id: from,
                position,
                energy,
            },
        );
        for set in sn.tried.values_mut() {
            set.remove(&from);
        }
        self.advertise_cardinality(out);
        self.reassess(now, ctx, out);
    }

    /// A traveler crossing this hexagon proposes to take over the tile.
    #[allow(clippy::too_many_arguments)]
    pub(super) fn on_subst(
        &mut self,
        from: SensorId,
        energy: f64,
        dest: Point,
        tx: TxId,
        dest_id: SensorId,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let own = self.energy;
        let p = &ctx.params;
        let Some(sn) = self.snapped.as_ref() else {
            return;
        };
        let busy = !sn.arrived
            || sn.discovering
            || sn.handoff.is_some()
            || sn.offer.is_some()
            || sn.pull.is_some()
            || !sn.sips.is_empty()
            || self.role == Role::Hybrid;
        if busy || energy <= own + p.subst_hysteresis * p.energy.initial {
            return;
        }
        let after = AfterHandoff::Travel {
            dest_center: dest,
            dest_id,
            tx,
            frame: sn.frame,
        };
        self.send_duty(out, Body::AckSubst { receiver_id: from });
        self.begin_handoff(after, Some(from), true, now, ctx, out);
    }

    pub(super) fn on_ack_subst(
        &mut self,
        from: SensorId,
        _now: f64,
        _ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(tr) = self.traveler.as_mut() else {
            return;
        };
        if tr.subst_with.is_some_and(|(id, _)| id == from) {
            tr.subst_accepted = true;
            out.cancel_timer(TimerId::SubstWait);
        }
    }

    pub(super) fn on_profile_packet(
        &mut self,
        from: SensorId,
        ord: i64,
        queue: &[super::message::TriggerRecord],
        nbh: &super::message::Neighborhood,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let expected = self
            .traveler
            .as_ref()
            .is_some_and(|t| t.subst_with.is_some_and(|(id, _)| id == from));
        if !expected {
            return;
        }
        out.cancel_timer(TimerId::SubstWait);
        self.traveler = None;
        self.takeover = Some((from, nbh.clone(), ord, queue.to_vec()));
        self.purpose = Some(Purpose::SubstDivert);
        out.go(nbh.position, 0.0);
        let _ = (now, ctx);
    }

    pub(super) fn traveler_reached_subst(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        self.substitute_arrived(now, ctx, out);
    }
}
