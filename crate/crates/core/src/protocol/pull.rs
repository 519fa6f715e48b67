//! Pull activity: hole triggers that lower order values toward a vacancy so
//! that redundant sensors cascade into it.

use super::message::{Body, SensorId, TriggerRecord};
use super::state::{PullState, Role, SensorState, TimerId};
use super::{Context, Effects, Note};
use crate::geometry::{Axial, Point};

impl SensorState {
    /// Drop expired trigger records and recompute the order value.
    pub(super) fn refresh_ord(&mut self, now: f64) {
        let base = self.base_ord;
        let Some(sn) = self.snapped.as_mut() else {
            self.ord = base;
            return;
        };
        let frame = sn.frame;
        sn.trigger_queue.retain(|r| r.deadline > now);
        sn.trigger_queue.sort_by(|a, b| {
            a.distance
                .cmp(&b.distance)
                .then(a.sender_ord.cmp(&b.sender_ord))
                .then(frame.tile_of(a.hole).cmp(&frame.tile_of(b.hole)))
        });
        self.ord = sn.trigger_queue.first().map_or(base, |r| r.sender_ord + 1);
    }

    /// Vacancies remain that no member of L(p) can fill.
    pub(super) fn consider_pull(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        if self.role == Role::Hybrid {
            return;
        }
        let ord = self.ord;
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        // Triggers are only processed by snapped neighbors; with none in
        // range a pull cannot reach anyone.
        if sn.pull.is_some() || !sn.inbound.is_empty() || sn.nbr_snapped.is_empty() {
            return;
        }
        let Some(hole) = sn
            .vp
            .iter()
            .find(|t| !sn.pull_exhausted.contains(t))
            .copied()
        else {
            return;
        };
        let my = sn.virtual_card();
        let push_coming = sn.nbr_snapped.values().any(|n| {
            super::moving_condition(
                n.virtual_cardinality,
                my,
                super::push::effective_ord(n, now),
                ord,
            )
        });
        if push_coming && !sn.pull_wait_elapsed {
            if !sn.pull_wait_armed {
                sn.pull_wait_armed = true;
                out.set_timer(TimerId::PullWait, now + ctx.params.t_out(0));
            }
            return;
        }
        self.start_pull(hole, now, ctx, out);
    }

    fn start_pull(&mut self, hole: Axial, now: f64, ctx: &Context, out: &mut Effects) {
        let id = self.id;
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let hole_pt = sn.frame.center(hole);
        let timeout = ctx.params.t_out(0);
        sn.pull = Some(PullState { hole, hop: 0 });
        sn.trigger_queue
            .retain(|r| sn.frame.tile_of(r.hole) != hole);
        sn.trigger_queue.push(TriggerRecord {
            hole: hole_pt,
            origin: id,
            sender_ord: -1,
            horizon: 0,
            deadline: now + timeout,
            distance: 1,
        });
        out.notes.push(Note::PullStarted { hole: hole_pt });
        out.set_timer(TimerId::Pull, now + timeout);
        self.refresh_ord(now);
        self.send_duty(
            out,
            Body::HoleInfo {
                hop_counter: 0,
                order_value: self.ord,
                hole_coordinates: hole_pt,
                timeout,
            },
        );
    }

    /// Nobody came within the horizon: extend it by one hop.
    pub(super) fn pull_expired(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        let id = self.id;
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let Some(pull) = sn.pull.as_mut() else {
            return;
        };
        if !sn.vp.contains(&pull.hole) {
            self.end_pull(now, ctx, out);
            return;
        }
        if sn.sips.contains_key(&pull.hole) {
            // A sensor is already on its way into the hole; wait for it.
            out.set_timer(TimerId::Pull, now + ctx.params.t_out(pull.hop));
            return;
        }
        pull.hop += 1;
        let (hole, hop) = (pull.hole, pull.hop);
        let hole_pt = sn.frame.center(hole);
        if hop > ctx.params.max_hop {
            sn.pull = None;
            sn.pull_exhausted.insert(hole);
            sn.trigger_queue.retain(|r| r.origin != id);
            out.notes.push(Note::PullAbandoned { hole: hole_pt });
            self.refresh_ord(now);
            self.reassess(now, ctx, out);
            return;
        }
        let timeout = ctx.params.t_out(hop);
        for r in sn.trigger_queue.iter_mut().filter(|r| r.origin == id) {
            r.deadline = now + timeout;
            r.horizon = hop;
        }
        out.set_timer(TimerId::Pull, now + timeout);
        self.refresh_ord(now);
        self.send_duty(
            out,
            Body::HoleInfo {
                hop_counter: hop as i32,
                order_value: self.ord,
                hole_coordinates: hole_pt,
                timeout,
            },
        );
    }

    pub(super) fn end_pull(&mut self, now: f64, _ctx: &Context, out: &mut Effects) {
        let id = self.id;
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        if sn.pull.take().is_some() {
            out.cancel_timer(TimerId::Pull);
        }
        if sn.pull_wait_armed {
            out.cancel_timer(TimerId::PullWait);
        }
        sn.pull_wait_armed = false;
        sn.pull_wait_elapsed = false;
        if sn.vp.is_empty() {
            sn.pull_exhausted.clear();
        }
        sn.trigger_queue.retain(|r| r.origin != id);
        self.refresh_ord(now);
    }

    pub(super) fn pull_wait_expired(&mut self, now: f64, ctx: &Context, out: &mut Effects) {
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        if !sn.pull_wait_armed {
            return;
        }
        sn.pull_wait_armed = false;
        sn.pull_wait_elapsed = true;
        self.reassess(now, ctx, out);
    }

    #[allow(clippy::too_many_arguments)]
    pub(super) fn handle_holeinfo(
        &mut self,
        from: SensorId,
        h: i32,
        ord_msg: i64,
        hole: Point,
        timeout: f64,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        if h < 0 {
            return;
        }
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        if let Some(n) = sn.nbr_snapped.values_mut().find(|n| n.id == from) {
            n.ord = ord_msg;
            n.ord_expiry = now + timeout;
        }
        if !sn.arrived {
            return;
        }
        let hole_tile = sn.frame.tile_of(hole);
        if hole_tile == sn.tile {
            return;
        }
        let frame = sn.frame;
        let existing = sn
            .trigger_queue
            .iter()
            .position(|r| frame.tile_of(r.hole) == hole_tile);
        let accept = match existing {
            None => true,
            Some(i) => {
                let r = &sn.trigger_queue[i];
                r.origin != self.id
                    && (r.deadline <= now
                        || ord_msg < r.sender_ord
                        || (ord_msg == r.sender_ord && h as u32 > r.horizon))
            }
        };
        if !accept {
            return;
        }
        if let Some(i) = existing {
            sn.trigger_queue.remove(i);
        }
        let deadline = now + timeout;
        sn.trigger_queue.push(TriggerRecord {
            hole,
            origin: from,
            sender_ord: ord_msg,
            horizon: h as u32,
            deadline,
            distance: sn.tile.distance(hole_tile),
        });
        out.set_timer(TimerId::Trigger(hole_tile), deadline);
        self.refresh_ord(now);
        if h > 0 {
            self.send_duty(
                out,
                Body::HoleInfo {
                    hop_counter: h - 1,
                    order_value: ord_msg + 1,
                    hole_coordinates: hole,
                    timeout: ctx.params.t_out(h as u32 - 1),
                },
            );
        }
        self.reassess(now, ctx, out);
    }

    pub(super) fn trigger_expired(
        &mut self,
        hole: Axial,
        now: f64,
        ctx: &Context,
        out: &mut Effects,
    ) {
        let id = self.id;
        let Some(sn) = self.snapped.as_mut() else {
            return;
        };
        let frame = sn.frame;
        sn.trigger_queue
            .retain(|r| r.origin == id || frame.tile_of(r.hole) != hole || r.deadline > now);
        self.refresh_ord(now);
        self.reassess(now, ctx, out);
    }
}
