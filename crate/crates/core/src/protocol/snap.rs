//! Snap activity: starters, neighbor discovery, SIP transactions, and
//! contention for snap positions.

use super::message::{Body, MemberEntry, NeighborEntry, SensorId};
use super::state::{Mover, MoverPhase, Purpose, Role, SensorState, SipTx, SnappedState, TimerId};
use super::{Context, Effects, Note};
use crate::geometry::{point_in_hex, Axial, HexFrame, Point, PortionId};

/// Adjacent tiles of `sn` whose hexagon overlaps the AoI.
pub(super) fn wanted_neighbors(sn: &SnappedState, ctx: &Context) -> Vec<Axial> {
    sn.tile
        .neighbors()
        .into_iter()
        .filter(|t| sn.frame.tile_overlaps(*t, &ctx.aoi))
        .collect()
}

pub(super) fn record_neighbor(
    sn: &mut SnappedState,
    tile: Axial,
    id: SensorId,
    card: Option<u32>,
) -> bool {
    let center = sn.frame.center(tile);
    let fresh = NeighborEntry {
        id,
        tile,
        center,
        virtual_cardinality: 0,
        ord: id as i64,
        ord_expiry: 0.0,
    };
    let mut changed = false;
    match sn.nbr_snapped.get_mut(&tile) {
        Some(entry) if entry.id == id => {}
        Some(entry) => {
            *entry = fresh;
            sn.card_unknown.insert(tile);
        }
        None => {
            sn.nbr_snapped.insert(tile, fresh);
            sn.card_unknown.insert(tile);
        }
    }
    if let Some(c) = card {
        let entry = sn.nbr_snapped.get_mut(&tile).expect("inserted above");
        changed = entry.virtual_cardinality != c || sn.card_unknown.remove(&tile);
        entry.virtual_cardinality = c;
    }
    if changed {
        sn.offer_blocked.remove(&id);
    }
    sn.vp.remove(&tile);
    sn.awaiting_reply.remove(&tile);
    changed
}

/// Drop the SIP transaction for `tile`, if any, with its timers.
fn close_sip(sn: &mut SnappedState, tile: Axial, out: &mut Effects) {
    if sn.sips.remove(&tile).is_some() {
        out.cancel_timer(TimerId::AckSip(tile));
        out.cancel_timer(TimerId::IasWait(tile));
        sn.tried.remove(&tile);
    }
}

fn untry(sn: &mut SnappedState, id: SensorId) {
    for set in sn.tried.values_mut() {
        set.remove(&id);
    }
}

/// Closest unengaged member of L(p) to `tile`, ties to the lower ID.
pub(super) fn best_candidate(sn: &SnappedState, tile: Axial) -> Option<SensorId> {
    let target = sn.frame.center(tile);
    let tried = sn.tried.get(&tile);
    sn.slaves
        .values()
        .chain(sn.free.values())
        .filter(|m| !sn.sips.values().any(|s| s.candidate == m.id))
        .filter(|m| !tried.is_some_and(|t| t.contains(&m.id)))
        .min_by(|a, b| {
            a.position
                .dist(target)
                .total_cmp(&b.position.dist(target))
                .then(a.id.cmp(&b.id))
        })
        .map(|m| m.id)
}

impl SensorState {
    pub(super) fn starter_fire(&mut self, theta: f64, now: f64, ctx: &Context, out: &mut Effects) {
        if self.role != Role::Free || self.heard_any || self.is_engaged() {
            return;
        }
        let frame = HexFrame::new(self.position, theta, ctx.params.r_s, now, self.id);
        self.portion = Some(frame.portion());
        self.frame = Some(frame);
        self.snapped = Some(SnappedState::new(frame, Axial::ORIGIN));
        self.set_role(Role::Snapped);
        self.snapped_arrived(now, ctx, out);
    }

    /// Reached the tile center: announce and start neighbor discovery.
    pub(super) fn snapped_arrived(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        sn.arrived = true;
        self.position = sn.center;
        let wanted = wanted_neighbors(sn, ctx);
        sn.vp = wanted
            .into_iter()
            .filter(|t| !sn.nbr_snapped.contains_key(t))
            .collect();
        self.start_discovery(now, ctx, out);
    }

    /// Broadcast IAS and collect replies for one discovery window. Known
    /// neighbors that stay silent are treated as gone.
    pub(super) fn start_discovery(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        sn.discovering = true;
        sn.awaiting_reply = sn.nbr_snapped.keys().copied().collect();
        let body = Body::IAS {
            coordinates: sn.center,
            starter_timestamp: sn.frame.starter_ts,
            frame: sn.frame,
        };
        self.send_duty(out, body);
        out.set_timer(TimerId::Discovery, now + ctx.params.discovery_window());
    }

    pub(super) fn discovery_done(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        sn.discovering = false;
        let silent: Vec<Axial> = std::mem::take(&mut sn.awaiting_reply).into_iter().collect();
        let wanted = wanted_neighbors(sn, ctx);
        for t in silent {
            if let Some(n) = sn.nbr_snapped.remove(&t) {
                sn.card_unknown.remove(&t);
                out.notes.push(Note::NeighborLost { neighbor: n.id });
                sn.offer_blocked.remove(&n.id);
                if wanted.contains(&t) {
                    sn.vp.insert(t);
                    sn.pull_exhausted.remove(&t);
                }
            }
        }
        // The IAS carried no cardinality; neighbors learn it here.
        self.advertise_cardinality(out);
        self.reassess(now, ctx, out);
    }

    /// Snapped-side handling of an IAS from the same portion.
    pub(super) fn snapped_on_ias(
        &mut self,
        from: SensorId,
        coords: Point,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        // Still on the way to the center: the tile is held but the holder
        // cannot take part in pushes yet.
        let reply = if sn.arrived {
            Body::InfoSnapped {
                coordinates: sn.center,
                virtual_cardinality: sn.virtual_card(),
            }
        } else {
            Body::PositionTaken {
                coordinates: sn.center,
            }
        };
        sn.forget_member(from);
        if let Some(t) = sn.frame.lattice_tile(coords) {
            if t.is_adjacent(sn.tile) {
                record_neighbor(sn, t, from, None);
                close_sip(sn, t, out);
            }
        }
        self.send_duty(out, reply);
        self.reassess(now, ctx, out);
    }

    /// Free, slave, stopped and hybrid sensors localizing against an IAS.
    pub(super) fn member_on_ias(
        &mut self,
        from: SensorId,
        coords: Point,
        frame: HexFrame,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        if self.frame.is_none() {
            self.frame = Some(frame);
        }
        if let Some(t) = frame.lattice_tile(coords) {
            self.heard_snapped.insert(t, (from, coords));
        }
        if let Some(m) = &self.mover {
            if m.target.approx_eq(coords) {
                self.position_lost(from, coords, now, ctx, out);
            }
            return;
        }
        if self.traveler.is_some() || self.takeover.is_some() {
            return;
        }
        match self.role {
            Role::Slave => {
                let same_tile = self.owner_center.is_some_and(|c| c.approx_eq(coords));
                if self.owner == Some(from) || same_tile {
                    self.owner = Some(from);
                    self.owner_center = Some(coords);
                    self.send_member(
                        out,
                        Body::InfoSlave {
                            coordinates: self.position,
                            energy_level: self.energy,
                        },
                    );
                }
            }
            Role::Free | Role::StoppedPending | Role::Hybrid => {
                if point_in_hex(self.position, coords, &frame) {
                    if self.role != Role::Hybrid {
                        if self.role == Role::StoppedPending {
                            out.cancel_timer(TimerId::Stopped);
                        }
                        self.set_role(Role::Slave);
                    }
                    self.owner = Some(from);
                    self.owner_center = Some(coords);
                    self.send_member(
                        out,
                        Body::InfoSlave {
                            coordinates: self.position,
                            energy_level: self.energy,
                        },
                    );
                } else {
                    self.send_member(
                        out,
                        Body::InfoFree {
                            coordinates: self.position,
                        },
                    );
                }
            }
            Role::Snapped => {}
        }
    }

    pub(super) fn on_info_snapped(
        &mut self,
        from: SensorId,
        coords: Point,
        card: u32,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        sn.forget_member(from);
        if let Some(t) = sn.frame.lattice_tile(coords) {
            if t.is_adjacent(sn.tile) {
                record_neighbor(sn, t, from, Some(card));
                close_sip(sn, t, out);
            }
        }
        self.reassess(now, ctx, out);
    }

    pub(super) fn on_info_slave(
        &mut self,
        from: SensorId,
        coords: Point,
        energy: f64,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        if point_in_hex(coords, sn.center, &sn.frame) {
            sn.free.remove(&from);
            sn.slaves.insert(
                from,
                MemberEntry {
                    id: from,
                    position: coords,
                    energy,
                },
            );
            untry(sn, from);
        } else {
            sn.forget_member(from);
        }
        self.reassess(now, ctx, out);
    }

    pub(super) fn on_info_free(
        &mut self,
        from: SensorId,
        coords: Point,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let energy = sn
            .slaves
            .remove(&from)
            .map(|m| m.energy)
            .unwrap_or(ctx.params.energy.initial);
        sn.free.insert(
            from,
            MemberEntry {
                id: from,
                position: coords,
                energy,
            },
        );
        untry(sn, from);
        self.reassess(now, ctx, out);
    }

    pub(super) fn on_info_stopped(
        &mut self,
        from: SensorId,
        coords: Point,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let energy = ctx.params.energy.initial;
        let entry = MemberEntry {
            id: from,
            position: coords,
            energy,
        };
        untry(sn, from);
        if point_in_hex(coords, sn.center, &sn.frame) {
            sn.free.remove(&from);
            sn.slaves.insert(from, entry);
            self.send_duty(out, Body::IAYS { receiver_id: from });
        } else {
            sn.slaves.remove(&from);
            sn.free.insert(from, entry);
        }
        self.reassess(now, ctx, out);
    }

    /// SIP addressed to this sensor.
    pub(super) fn member_on_sip(
        &mut self,
        from: SensorId,
        target: Point,
        portion: Option<PortionId>,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        if self.role == Role::Hybrid {
            if portion.is_some() && portion == self.portion {
                self.hybrid_on_sip(from, target, now, ctx, out);
            }
            return;
        }
        if self.snapped.is_some() || self.is_engaged() {
            return;
        }
        match self.role {
            Role::Free => {}
            Role::Slave if self.owner == Some(from) => {}
            _ => return,
        }
        if portion.is_some() && portion != self.portion {
            return;
        }
        let Some(frame) = self.frame else {
            return;
        };
        let Some(tile) = frame.lattice_tile(target) else {
            return;
        };
        self.send_member(out, Body::AckSIP { receiver_id: from });
        self.begin_approach(target, frame, tile, from, ctx, out);
    }

    pub(super) fn begin_approach(
        &mut self,
        target: Point,
        frame: HexFrame,
        tile: Axial,
        sip_from: SensorId,
        ctx: &Context,
        out: &mut Effects,
    ) {
        self.mover = Some(Mover {
            target,
            frame,
            tile,
            sip_from,
            phase: MoverPhase::Approaching,
        });
        self.set_role(Role::Free);
        self.owner = None;
        self.owner_center = None;
        self.purpose = Some(Purpose::SnapApproach);
        out.go(target, ctx.params.stop_distance());
    }

    pub(super) fn on_ack_sip(
        &mut self,
        from: SensorId,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let Some((&tile, _)) = sn
            .sips
            .iter()
            .find(|(_, s)| s.candidate == from && !s.acked)
        else {
            return;
        };
        let target = sn.frame.center(tile);
        let from_pos = sn
            .slaves
            .get(&from)
            .or_else(|| sn.free.get(&from))
            .map(|m| m.position)
            .unwrap_or(sn.center);
        if let Some(s) = sn.sips.get_mut(&tile) {
            s.acked = true;
        }
        sn.forget_member(from);
        out.cancel_timer(TimerId::AckSip(tile));
        out.set_timer(
            TimerId::IasWait(tile),
            now + ctx.params.ias_timeout(from_pos.dist(target)),
        );
        self.reassess(now, ctx, out);
    }

    /// No AckSIP and no IAS for the position in time.
    pub(super) fn ack_sip_expired(
        &mut self,
        tile: Axial,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        match sn.sips.get(&tile) {
            Some(SipTx {
                candidate,
                acked: false,
            }) => {
                let c = *candidate;
                sn.sips.remove(&tile);
                sn.tried.entry(tile).or_default().insert(c);
            }
            _ => return,
        }
        self.reassess(now, ctx, out);
    }

    /// Acknowledged, but the IAS never came.
    pub(super) fn ias_wait_expired(
        &mut self,
        tile: Axial,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        match sn.sips.get(&tile) {
            Some(SipTx {
                candidate,
                acked: true,
            }) => {
                let c = *candidate;
                sn.sips.remove(&tile);
                sn.tried.entry(tile).or_default().insert(c);
            }
            _ => return,
        }
        self.reassess(now, ctx, out);
    }

    pub(super) fn mover_reached_claim_distance(
        &mut self,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(m) = self.mover.as_mut() else {
            return;
        };
        m.phase = MoverPhase::Claiming;
        let coords = m.target;
        self.claim_ts = Some(now);
        self.send_member(
            out,
            Body::ClaimPosition {
                coordinates: coords,
                timestamp: now,
            },
        );
        out.set_timer(TimerId::Claim, now + ctx.params.claim_timeout());
    }

    pub(super) fn on_claim_position(
        &mut self,
        from: SensorId,
        coords: Point,
        ts: f64,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        if let Some(sn) = &self.snapped {
            if sn.center.approx_eq(coords) {
                // A late claimant: tell it the position is held.
                self.send_duty(
                    out,
                    Body::PositionTaken {
                        coordinates: coords,
                    },
                );
            }
            return;
        }
        let Some(m) = &self.mover else {
            return;
        };
        if !m.target.approx_eq(coords) {
            return;
        }
        match m.phase {
            MoverPhase::Approaching => self.stop_and_report(now, ctx, out),
            MoverPhase::Claiming => {
                let mine = self.claim_ts.unwrap_or(now);
                let they_win = ts < mine || (ts == mine && from < self.id);
                if they_win {
                    out.cancel_timer(TimerId::Claim);
                    self.mover = None;
                    self.claim_ts = None;
                    self.set_role(Role::StoppedPending);
                    out.set_timer(TimerId::Stopped, now + ctx.params.winner_ias_timeout());
                }
            }
        }
    }

    pub(super) fn on_position_taken(
        &mut self,
        from: SensorId,
        coords: Point,
        portion: Option<PortionId>,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        if let Some(sn) = self.snapped.as_mut() {
            if portion.is_none() || portion == Some(sn.portion()) {
                if let Some(t) = sn.frame.lattice_tile(coords) {
                    if t.is_adjacent(sn.tile) {
                        sn.forget_member(from);
                        record_neighbor(sn, t, from, None);
                        close_sip(sn, t, out);
                        self.reassess(now, ctx, out);
                    }
                }
            }
            return;
        }
        if let Some(f) = self.frame {
            if let Some(t) = f.lattice_tile(coords) {
                self.heard_snapped.insert(t, (from, coords));
            }
        }
        if self
            .mover
            .as_ref()
            .is_some_and(|m| m.target.approx_eq(coords))
        {
            self.position_lost(from, coords, now, ctx, out);
        }
    }

    /// Someone else holds the mover's target.
    fn position_lost(
        &mut self,
        from: SensorId,
        coords: Point,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let Some(m) = &self.mover else {
            return;
        };
        match m.phase {
            MoverPhase::Approaching => self.stop_and_report(now, ctx, out),
            MoverPhase::Claiming => {
                out.cancel_timer(TimerId::Claim);
                self.mover = None;
                self.claim_ts = None;
                self.set_role(Role::Slave);
                self.owner = Some(from);
                self.owner_center = Some(coords);
            }
        }
    }

    /// Contention noticed before reaching the claim distance.
    fn stop_and_report(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        out.stop();
        self.purpose = None;
        self.mover = None;
        self.claim_ts = None;
        self.set_role(Role::StoppedPending);
        self.send_member(
            out,
            Body::InfoStopped {
                coordinates: self.position,
            },
        );
        out.set_timer(TimerId::Stopped, now + ctx.params.iays_timeout());
    }

    pub(super) fn claim_expired(&mut self, _now: f64, _ctx: &Context, out: &mut Effects) {
        let Some(m) = self.mover.take_if(|m| m.phase == MoverPhase::Claiming) else {
            return;
        };
        self.claim_ts = None;
        self.send_member(
            out,
            Body::PositionTaken {
                coordinates: m.target,
            },
        );
        self.portion = Some(m.frame.portion());
        self.frame = Some(m.frame);
        self.snapped = Some(SnappedState::new(m.frame, m.tile));
        self.owner = None;
        self.owner_center = None;
        self.set_role(Role::Snapped);
        self.purpose = Some(Purpose::SnapFinal);
        out.go(m.target, 0.0);
    }

    pub(super) fn on_iays(&mut self, from: SensorId, _now: f64, _ctx: &Context, out: &mut Effects) {
        if self.role != Role::StoppedPending {
            return;
        }
        out.cancel_timer(TimerId::Stopped);
        self.set_role(Role::Slave);
        self.owner = Some(from);
        self.owner_center = self
            .heard_snapped
            .values()
            .find(|(id, _)| *id == from)
            .map(|(_, c)| *c);
    }

    pub(super) fn stopped_expired(&mut self, _now: f64, _ctx: &Context, _out: &mut Effects) {
        if self.role == Role::StoppedPending {
            self.set_role(Role::Free);
        }
    }

    /// Re-run the snapped sensor's decision loop: snap while possible, then
    /// pull for unfillable vacancies or push surplus slaves.
    pub(super) fn reassess(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        if !sn.arrived || sn.discovering || sn.handoff.is_some() {
            return;
        }
        if self.dissolve_if_idle(now, ctx, out) {
            return;
        }
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let open: Vec<Axial> = sn
            .vp
            .iter()
            .filter(|t| !sn.sips.contains_key(t))
            .copied()
            .collect();
        let mut sips = Vec::new();
        for t in open {
            if let Some(c) = best_candidate(sn, t) {
                sn.sips.insert(
                    t,
                    SipTx {
                        candidate: c,
                        acked: false,
                    },
                );
                sips.push((t, c, sn.frame.center(t)));
            }
        }
        for (t, c, target) in sips {
            self.send_duty(
                out,
                Body::SIP {
                    receiver_id: c,
                    target_position: target,
                },
            );
            out.set_timer(TimerId::AckSip(t), now + ctx.params.ack_sip_timeout());
        }
        let sn = self.snapped.as_ref().expect("checked above");
        if !sn.sips.is_empty() {
            return;
        }
        if sn.vp.is_empty() {
            self.end_pull(now, ctx, out);
        } else {
            self.consider_pull(now, ctx, out);
        }
        self.advertise_cardinality(out);
        self.try_offer(now, ctx, out);
    }
}
