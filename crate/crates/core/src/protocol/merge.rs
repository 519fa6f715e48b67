//! Merging of tiling portions, role exchanges, and retirement.

use super::message::{Body, Message, Neighborhood, SensorId, TriggerRecord};
use super::state::{AfterHandoff, Handoff, Purpose, Role, SensorState, SnappedState, TimerId};
use super::{Context, Effects};
use crate::geometry::{Point, PortionId};

impl SensorState {
    /// First IAS heard by a sensor that belongs to no portion yet.
    pub(super) fn adopt_portion(
        &mut self,
        m: &Message,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Body::IAS {
            coordinates, frame, ..
        } = &m.body
        else {
            return;
        };
        self.portion = Some(frame.portion());
        self.frame = Some(*frame);
        self.member_on_ias(m.sender, *coordinates, *frame, now, ctx, out);
    }

    /// IAS from a portion older than the honored one: drop the current
    /// affiliation and relocalize against the older lattice. A snapped
    /// sensor keeps its tile as a hybrid until it can hand it off.
    pub(super) fn merge_with_older(
        &mut self,
        m: &Message,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Body::IAS {
            coordinates, frame, ..
        } = &m.body
        else {
            return;
        };
        if self.snapped.is_some() {
            if self.role == Role::Snapped {
                self.end_pull(now, ctx, out);
                self.set_role(Role::Hybrid);
            }
        } else {
            if self.mover.take().is_some() {
                out.cancel_timer(TimerId::Claim);
                self.claim_ts = None;
                out.stop();
            }
            if self.traveler.take().is_some() {
                out.cancel_timer(TimerId::SubstWait);
                out.stop();
            }
            if self.takeover.take().is_some() {
                out.stop();
            }
            if self.role == Role::StoppedPending {
                out.cancel_timer(TimerId::Stopped);
            }
            self.purpose = None;
            self.set_role(Role::Free);
        }
        self.owner = None;
        self.owner_center = None;
        self.heard_snapped.clear();
        self.portion = Some(frame.portion());
        self.frame = Some(*frame);
        self.member_on_ias(m.sender, *coordinates, *frame, now, ctx, out);
        if self.role == Role::Hybrid {
            self.reassess(now, ctx, out);
        }
    }

    /// A newer portion is nearby: make sure its sensors hear about ours.
    pub(super) fn newer_portion_heard(
        &mut self,
        m: &Message,
        _now: f64,
        _ctx: &Context,
        out: &mut Effects,
    ) {
        if self.role != Role::Snapped {
            return;
        }
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        if !sn.arrived || !sn.reannounced_for.insert(m.sender) {
            return;
        }
        let body = Body::IAS {
            coordinates: sn.center,
            starter_timestamp: sn.frame.starter_ts,
            frame: sn.frame,
        };
        self.send_duty(out, body);
    }

    /// A snap position of the older portion is offered to this hybrid.
    pub(super) fn hybrid_on_sip(
        &mut self,
        from: SensorId,
        target: Point,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(frame) = self.frame else {
            return;
        };
        let Some(tile) = frame.lattice_tile(target) else {
            return;
        };
        if self.snapped.as_ref().is_some_and(|s| s.handoff.is_some()) {
            return;
        }
        self.send_member(out, Body::AckSIP { receiver_id: from });
        let after = AfterHandoff::Snap {
            target,
            frame,
            tile,
            sip_from: from,
        };
        self.begin_handoff(after, None, false, now, ctx, out);
    }

    /// Once a hybrid has no transaction under way in the newer portion it
    /// hands its tile to a slave, or retires it when no slave is left, and
    /// joins the older portion. Each substitute in turn hears the older
    /// portion and repeats this, so the newer portion drains away.
    pub(super) fn dissolve_if_idle(&mut self, now: f64, ctx: &Context, out: &mut Effects) -> bool {
        if self.role != Role::Hybrid {
            return false;
        }
        let Some(sn) = self.snapped.as_ref() else {
            return false;
        };
        if !sn.inbound.is_empty()
            || !sn.sips.is_empty()
            || sn.offer.is_some()
            || sn.handoff.is_some()
        {
            return false;
        }
        self.begin_handoff(AfterHandoff::Rejoin, None, false, now, ctx, out);
        true
    }

    pub(super) fn profile(&self) -> Option<Neighborhood> {
        let sn = self.snapped.as_ref()?;
        Some(Neighborhood {
            frame: sn.frame,
            tile: sn.tile,
            position: sn.center,
            base_order_value: self.base_ord,
            neighbors: sn.nbr_snapped.values().cloned().collect(),
            slaves: sn.slaves.values().cloned().collect(),
            free: sn.free.values().cloned().collect(),
            vacant: sn.vp.iter().copied().collect(),
        })
    }

    /// Hand the tile to a substitute before leaving. `preferred` names the
    /// substitute; otherwise the most energetic slave is chosen. With no
    /// slave left the tile is retired.
    pub(super) fn begin_handoff(
        &mut self,
        after: AfterHandoff,
        preferred: Option<SensorId>,
        via_subst: bool,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        if let Some(o) = sn.offer.take() {
            let _ = o;
            out.cancel_timer(TimerId::Offer);
        }
        let sub = preferred.or_else(|| {
            sn.slaves
                .values()
                .max_by(|a, b| a.energy.total_cmp(&b.energy).then(b.id.cmp(&a.id)))
                .map(|m| m.id)
        });
        let Some(sub) = sub else {
            sn.handoff = None;
            let center = sn.center;
            self.send_duty(
                out,
                Body::Retirement {
                    hole_coordinates: center,
                },
            );
            self.leave_tile(after, now, ctx, out);
            return;
        };
        let dist = sn
            .slaves
            .get(&sub)
            .map_or(2.0 * ctx.params.r_s, |m| m.position.dist(sn.center));
        sn.slaves.remove(&sub);
        sn.handoff = Some(Handoff {
            after,
            substitute: Some(sub),
            via_subst,
        });
        let nbh = self.profile().expect("snapped");
        let queue = self
            .snapped
            .as_ref()
            .map(|s| s.trigger_queue.clone())
            .unwrap_or_default();
        let body = if via_subst {
            Body::ProfilePacket {
                receiver_id: sub,
                order_value: self.ord,
                priority_queue: queue,
                neighborhood_information: nbh,
            }
        } else {
            Body::MoveToSubst {
                receiver_id: sub,
                order_value: self.ord,
                priority_queue: queue,
                neighborhood_information: nbh,
            }
        };
        self.send_duty(out, body);
        out.set_timer(
            TimerId::SubstArrival,
            now + ctx
                .params
                .subst_arrival_timeout(dist.max(2.0 * ctx.params.r_s)),
        );
    }

    /// Give up the tile and carry out the pending action.
    fn leave_tile(&mut self, after: AfterHandoff, now: f64, ctx: &Context, out: &mut Effects) {
        for t in [
            TimerId::Discovery,
            TimerId::Offer,
            TimerId::Pull,
            TimerId::PullWait,
            TimerId::SubstArrival,
        ] {
            out.cancel_timer(t);
        }
        self.snapped = None;
        self.ord = self.base_ord;
        match after {
            AfterHandoff::Snap {
                target,
                frame,
                tile,
                sip_from,
            } => self.begin_approach(target, frame, tile, sip_from, ctx, out),
            AfterHandoff::Travel {
                dest_center,
                dest_id,
                tx,
                frame,
            } => {
                if self.frame.is_none() {
                    self.frame = Some(frame);
                }
                self.start_travel(dest_center, dest_id, tx, frame, ctx, out);
            }
            AfterHandoff::Rejoin => {
                self.set_role(Role::StoppedPending);
                self.send_member(
                    out,
                    Body::InfoStopped {
                        coordinates: self.position,
                    },
                );
                out.set_timer(TimerId::Stopped, now + ctx.params.iays_timeout());
            }
        }
    }

    pub(super) fn on_subst_arrival(
        &mut self,
        from: SensorId,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let Some(h) = sn.handoff.take_if(|h| h.substitute == Some(from)) else {
            return;
        };
        self.leave_tile(h.after, now, ctx, out);
    }

    pub(super) fn subst_arrival_expired(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let Some(h) = sn.handoff.take() else {
            return;
        };
        if h.via_subst {
            // The traveler never showed up; keep the tile.
            self.reassess(now, ctx, out);
            return;
        }
        self.begin_handoff(h.after, None, false, now, ctx, out);
    }

    /// Elected to replace the snapped sensor `from`.
    pub(super) fn on_move_to_subst(
        &mut self,
        from: SensorId,
        ord: i64,
        queue: &[TriggerRecord],
        nbh: &Neighborhood,
        _now: f64,
        _ctx: &Context,
        out: &mut Effects,
    ) {
        if self.role != Role::Slave || self.owner != Some(from) || self.is_engaged() {
            return;
        }
        self.takeover = Some((from, nbh.clone(), ord, queue.to_vec()));
        self.purpose = Some(Purpose::SubstTakeover);
        out.go(nbh.position, 0.0);
    }

    pub(super) fn substitute_arrived(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        let Some((from, nbh, ord, queue)) = self.takeover.take() else {
            return;
        };
        self.send(
            out,
            Some(nbh.frame.portion()),
            Body::SubstArrival { receiver_id: from },
        );
        self.install_profile(from, nbh, ord, queue, now, ctx, out);
    }

    fn install_profile(
        &mut self,
        predecessor: SensorId,
        nbh: Neighborhood,
        ord: i64,
        queue: Vec<TriggerRecord>,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let frame = nbh.frame;
        let mut sn = SnappedState::new(frame, nbh.tile);
        sn.nbr_snapped = nbh.neighbors.into_iter().map(|n| (n.tile, n)).collect();
        sn.slaves = nbh
            .slaves
            .into_iter()
            .filter(|m| m.id != self.id)
            .map(|m| (m.id, m))
            .collect();
        sn.free = nbh
            .free
            .into_iter()
            .filter(|m| m.id != self.id && m.id != predecessor)
            .map(|m| (m.id, m))
            .collect();
        sn.vp = nbh.vacant.into_iter().collect();
        sn.trigger_queue = queue;
        for r in &sn.trigger_queue {
            out.set_timer(TimerId::Trigger(frame.tile_of(r.hole)), r.deadline);
        }
        let portion: PortionId = frame.portion();
        self.portion = Some(portion);
        self.frame = Some(frame);
        self.owner = None;
        self.owner_center = None;
        self.snapped = Some(sn);
        self.set_role(Role::Snapped);
        self.ord = ord;
        self.refresh_ord(now);
        self.snapped_arrived(now, ctx, out);
    }

    pub(super) fn on_retirement(
        &mut self,
        from: SensorId,
        hole: Point,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let Some(t) = sn.frame.lattice_tile(hole) else {
            return;
        };
        if sn.nbr_snapped.get(&t).is_some_and(|n| n.id == from) {
            sn.nbr_snapped.remove(&t);
            sn.card_unknown.remove(&t);
            sn.offer_blocked.remove(&from);
            if sn.frame.tile_overlaps(t, &ctx.aoi) {
                sn.vp.insert(t);
                sn.pull_exhausted.remove(&t);
            }
            self.reassess(now, ctx, out);
        }
    }
}
