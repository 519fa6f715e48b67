//! Hand-placed micro scenarios shared by the integration tests.

#![allow(dead_code)]

use pnp_core::engine::{InitialSensor, MediumModel, SimSetup, StarterAt};
use pnp_core::geometry::{Point, Polygon};
use pnp_core::protocol::{ProtocolParams, SensorId};
use pnp_core::scenario::ID_BASE;

pub const R_S: f64 = 5.0;
pub const R_TX: f64 = 11.0;

/// Sensor IDs in placement order.
pub fn id(i: usize) -> SensorId {
    ID_BASE + i as SensorId
}

fn p(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

fn scale(v: Point, k: f64) -> Point {
    Point::new(v.x * k, v.y * k)
}

pub fn setup(aoi: Polygon, positions: &[Point], max_hop: u32) -> SimSetup {
    let medium = MediumModel::default();
    let mut params = ProtocolParams::new(R_S, R_TX, 1.0, medium.t_msg());
    params.max_hop = max_hop;
    let energy = params.energy.initial;
    SimSetup {
        params,
        aoi,
        medium,
        sensors: positions
            .iter()
            .enumerate()
            .map(|(i, &position)| InitialSensor {
                id: id(i),
                position,
                energy,
            })
            .collect(),
        failures: Vec::new(),
        max_time: 2000.0,
        snapshot_interval: 5.0,
        starter_window: 0.0,
        starters: Some(vec![StarterAt {
            id: id(0),
            time: 0.0,
            theta: 0.0,
        }]),
    }
}

/// A small triangle around the corner shared by the starter's tile and
/// its neighbors at bearings 30° and 90°. Only those three tiles overlap it.
pub fn corner_aoi() -> Polygon {
    let v = p(2.5, 4.330127018922193);
    let toward = |c: Point| {
        let d = c - v;
        v + scale(d, 1.0 / d.norm())
    };
    Polygon::new(vec![
        toward(p(0.0, 0.0)),
        toward(p(7.5, 4.330127018922193)),
        toward(p(0.0, 8.660254037844386)),
    ])
    .expect("valid triangle")
}

/// Two snapped sensors send different sensors to the same vacant center.
///
/// The starter P sends 1 to the tile above it (S) and 2 to the tile at
/// bearing 30° (X). Sensor 2 starts far away. Once 1 settles in S, its
/// slave 3 (out of P's range) is sent to X as well and claims first; 2 is
/// caught inside X's hexagon short of the claim distance.
pub fn claim_contention() -> SimSetup {
    let x = p(7.5, 4.330127018922193);
    let dir = p(-0.5, -0.8660254037844386);
    setup(
        corner_aoi(),
        &[p(0.0, 0.0), p(0.5, 3.9), x + scale(dir, 15.0), p(2.0, 12.2)],
        3,
    )
}

/// Two snapped sensors offer a slave to the same empty neighbor at once.
///
/// P (starter, two slaves) sends 3 to Z above it and 6 to Q at bearing 30°.
/// Sensor 6 starts farther out, so P is still waiting on that snap when Z
/// settles and collects 4 and 5 as slaves. When Q finally announces itself
/// with no slaves, P and Z both offer. Q holds the highest order value, so
/// only the first offer it receives stays valid.
pub fn two_offerers() -> SimSetup {
    setup(
        corner_aoi(),
        &[
            p(0.0, 0.0),
            p(-2.0, -2.0),
            p(0.0, -3.0),
            p(0.3, 7.2),
            p(-2.0, 10.0),
            p(1.0, 11.0),
            p(6.1, -0.89),
        ],
        3,
    )
}

/// A column of four tiles A, B, C, D along bearing 90°. The starter sits in
/// D with two slaves; one settles C, which then fills B with a free sensor
/// that D cannot hear. B finds A vacant with nothing to pull from its
/// direct neighbor, so its trigger has to travel two hops to reach D.
pub fn pull_cascade() -> SimSetup {
    let h = 8.660254037844386;
    let aoi = Polygon::rectangle(-1.0, -3.0, 1.0, 3.0 * h + 3.0);
    setup(
        aoi,
        &[p(0.0, 3.0 * h), p(0.0, 22.0), p(1.0, 27.0), p(0.5, 10.0)],
        3,
    )
}

/// Message variants each sensor sent, in order, one line per sensor.
pub fn variant_lines(trace: &pnp_core::engine::Trace) -> String {
    use pnp_core::engine::TraceEvent;
    use std::collections::BTreeMap;
    let mut seqs: BTreeMap<SensorId, Vec<&'static str>> = BTreeMap::new();
    for r in &trace.records {
        if let TraceEvent::Send { msg, .. } = &r.event {
            seqs.entry(msg.sender)
                .or_default()
                .push(msg.variant().as_str());
        }
    }
    seqs.iter()
        .map(|(id, v)| format!("{id}: {}\n", v.join(" ")))
        .collect()
}

/// Variants sent by `sender`, in order.
pub fn sent_by(trace: &pnp_core::engine::Trace, sender: SensorId) -> Vec<&'static str> {
    use pnp_core::engine::TraceEvent;
    trace
        .records
        .iter()
        .filter_map(|r| match &r.event {
            TraceEvent::Send { msg, .. } if msg.sender == sender => Some(msg.variant().as_str()),
            _ => None,
        })
        .collect()
}

/// True when `needle` occurs in `hay` in order, not necessarily adjacent.
pub fn is_subsequence(needle: &[&str], hay: &[&str]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Distance from `p` to the nearest point of the lattice spanned from
/// `origin` by two spacing vectors at `theta + 30°` and `theta + 90°`,
/// found by solving for fractional lattice coordinates and trying the
/// surrounding integer pairs.
pub fn lattice_deviation(p: Point, origin: Point, theta: f64, side: f64) -> f64 {
    let s = 3f64.sqrt() * side;
    let a = Point::new(
        s * (theta + 30f64.to_radians()).cos(),
        s * (theta + 30f64.to_radians()).sin(),
    );
    let b = Point::new(
        s * (theta + 90f64.to_radians()).cos(),
        s * (theta + 90f64.to_radians()).sin(),
    );
    let d = p - origin;
    let det = a.x * b.y - a.y * b.x;
    let u = (d.x * b.y - d.y * b.x) / det;
    let v = (a.x * d.y - a.y * d.x) / det;
    let mut best = f64::INFINITY;
    for du in -1..=2 {
        for dv in -1..=2 {
            let i = u.floor() + du as f64;
            let j = v.floor() + dv as f64;
            let q = origin + scale(a, i) + scale(b, j);
            best = best.min(q.dist(p));
        }
    }
    best
}
