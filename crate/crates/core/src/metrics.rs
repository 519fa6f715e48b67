//! Run metrics computed from a trace alone.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{Trace, TraceEvent};
use crate::geometry::{CoverageGrid, HexFrame, Point, PortionId};
use crate::protocol::{Body, Note, Role, SensorId, Variant};
use crate::scenario::MetricsConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub n_sensors: usize,
    pub coverage_time: Option<f64>,
    pub termination_time: Option<f64>,
    pub end_time: f64,
    pub messages_total: u64,
    pub messages_per_sensor: f64,
    pub messages_by_variant: BTreeMap<String, u64>,
    pub deliveries: u64,
    pub snap_positions: usize,
    pub snap_conflicts: usize,
    pub snap_conflicts_per_position: f64,
    pub push_conflicts: usize,
    pub final_slaves: usize,
    pub push_conflicts_per_slave: f64,
    pub pull_triggers: usize,
    pub final_coverage: f64,
    pub final_snapped: usize,
    pub final_hybrid: usize,
    pub final_portion_count: usize,
    /// Largest distance from an anchored sensor to the nearest center of
    /// the oldest surviving lattice.
    pub max_lattice_deviation: f64,
    pub total_distance_traveled: f64,
    pub energy_spent: f64,
}

/// Earliest `t` such that `(t, t + window]` holds no send and no motion.
/// Activity never resumes once the event queue has drained, so a drained
/// trace counts as silent forever after its end.
pub fn detect_termination(trace: &Trace, window: f64) -> Option<f64> {
    let mut spans: Vec<(f64, f64)> = Vec::new();
    let mut moving: BTreeMap<SensorId, f64> = BTreeMap::new();
    for r in &trace.records {
        match &r.event {
            TraceEvent::Send { .. } => spans.push((r.t, r.t)),
            TraceEvent::MoveStart { id, .. } => {
                moving.insert(*id, r.t);
            }
            TraceEvent::MoveEnd { id, .. } => {
                if let Some(s) = moving.remove(id) {
                    spans.push((s, r.t));
                }
            }
            _ => {}
        }
    }
    let end = trace.end_time();
    for (_, s) in moving {
        spans.push((s, end));
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut last = 0.0f64;
    for (s, e) in spans {
        if s > last + window {
            return Some(last);
        }
        last = last.max(e);
    }
    let horizon = if trace.drained() { f64::INFINITY } else { end };
    (last + window <= horizon).then_some(last)
}

fn key(p: Point) -> (i64, i64) {
    ((p.x * 1e3).round() as i64, (p.y * 1e3).round() as i64)
}

#[derive(Default)]
struct PositionLog {
    claimants: BTreeSet<SensorId>,
    sip_issuers: BTreeSet<SensorId>,
    taken: bool,
}

/// Conflicts summed over positions, and the number of distinct positions
/// ever held. A position conflicts once per extra sensor claiming it, or
/// per extra snapped sensor that offered it before it was taken.
pub fn count_snap_conflicts(trace: &Trace) -> (usize, usize) {
    let mut log: BTreeMap<(i64, i64), PositionLog> = BTreeMap::new();
    let mut held: BTreeSet<(i64, i64)> = BTreeSet::new();
    for r in &trace.records {
        let TraceEvent::Send { msg, .. } = &r.event else {
            continue;
        };
        match &msg.body {
            Body::ClaimPosition { coordinates, .. } => {
                log.entry(key(*coordinates))
                    .or_default()
                    .claimants
                    .insert(msg.sender);
            }
            Body::SIP {
                target_position, ..
            } => {
                let e = log.entry(key(*target_position)).or_default();
                if !e.taken {
                    e.sip_issuers.insert(msg.sender);
                }
            }
            Body::PositionTaken { coordinates } => {
                log.entry(key(*coordinates)).or_default().taken = true;
            }
            Body::IAS { coordinates, .. } => {
                held.insert(key(*coordinates));
            }
            _ => {}
        }
    }
    let conflicts = log
        .values()
        .map(|e| {
            e.claimants
                .len()
                .saturating_sub(1)
                .max(e.sip_issuers.len().saturating_sub(1))
        })
        .sum();
    (conflicts, held.len())
}

/// Offers refused by the receiver's moving-condition re-check, and the
/// number of slaves at the end of the run.
pub fn count_push_conflicts(trace: &Trace) -> (usize, usize) {
    let declined = trace
        .records
        .iter()
        .filter(|r| {
            matches!(
                r.event,
                TraceEvent::Note {
                    note: Note::OfferDeclined { .. },
                    ..
                }
            )
        })
        .count();
    // Every sensor that served as a slave at some point of the run.
    let slaves = trace
        .records
        .iter()
        .filter_map(|r| match r.event {
            TraceEvent::Role {
                id,
                to: Role::Slave,
                ..
            } => Some(id),
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .len();
    (declined, slaves)
}

fn final_roles(trace: &Trace) -> BTreeMap<SensorId, (Role, bool)> {
    trace
        .records
        .iter()
        .rev()
        .find_map(|r| match &r.event {
            TraceEvent::Snapshot { sensors } => {
                Some(sensors.iter().map(|s| (s.id, (s.role, s.alive))).collect())
            }
            _ => None,
        })
        .unwrap_or_default()
}

#[derive(Clone, Copy)]
struct Anchor {
    center: Point,
    frame: HexFrame,
    portion: PortionId,
}

/// Sensors holding a tile center over time, with the coverage they give.
struct Anchors {
    map: BTreeMap<SensorId, Anchor>,
    grid: CoverageGrid,
}

impl Anchors {
    fn set(&mut self, id: SensorId, a: Anchor) {
        if let Some(old) = self.map.insert(id, a) {
            self.grid.remove(old.center);
        }
        self.grid.add(a.center);
    }

    fn drop(&mut self, id: SensorId) {
        if let Some(old) = self.map.remove(&id) {
            self.grid.remove(old.center);
        }
    }
}

pub fn report(trace: &Trace, cfg: &MetricsConfig) -> RunReport {
    let setup = &trace.header.setup;
    let grid = CoverageGrid::new(&setup.aoi, setup.params.r_s, cfg.resolution)
        .expect("validated AoI and resolution");
    let mut anchors = Anchors {
        map: BTreeMap::new(),
        grid,
    };
    let mut coverage_time = None;
    let mut by_variant: BTreeMap<String, u64> = Variant::ALL
        .iter()
        .map(|v| (v.as_str().to_string(), 0))
        .collect();
    let mut total = 0u64;
    let mut pulls = 0usize;
    let mut deliveries = 0;
    let mut energy = 0.0;
    let mut distance = 0.0;
    for r in &trace.records {
        match &r.event {
            TraceEvent::Send { msg, .. } => {
                total += 1;
                *by_variant
                    .entry(msg.variant().as_str().to_string())
                    .or_default() += 1;
                if let Body::IAS {
                    coordinates, frame, ..
                } = &msg.body
                {
                    anchors.set(
                        msg.sender,
                        Anchor {
                            center: *coordinates,
                            frame: *frame,
                            portion: frame.portion(),
                        },
                    );
                }
            }
            TraceEvent::Role { id, to, .. } => {
                if !matches!(to, Role::Snapped | Role::Hybrid) {
                    anchors.drop(*id);
                }
            }
            TraceEvent::Failure { id } => anchors.drop(*id),
            TraceEvent::Note {
                note: Note::PullStarted { .. },
                ..
            } => pulls += 1,
            TraceEvent::End {
                deliveries: d,
                energy_spent,
                distance: dist,
                ..
            } => {
                deliveries = *d;
                energy = *energy_spent;
                distance = *dist;
            }
            _ => {}
        }
        if coverage_time.is_none() && anchors.grid.fraction() >= cfg.coverage_threshold {
            coverage_time = Some(r.t);
        }
    }
    let roles = final_roles(trace);
    let role_of = |id: &SensorId| roles.get(id).map(|x| x.0);
    let final_snapped = anchors
        .map
        .keys()
        .filter(|id| role_of(id) == Some(Role::Snapped))
        .count();
    let final_hybrid = anchors
        .map
        .keys()
        .filter(|id| role_of(id) == Some(Role::Hybrid))
        .count();
    let portions: BTreeSet<(u64, SensorId)> = anchors
        .map
        .values()
        .map(|a| (a.portion.starter_ts.to_bits(), a.portion.starter_id))
        .collect();
    let oldest = anchors
        .map
        .values()
        .min_by(|a, b| a.portion.cmp_age(&b.portion))
        .map(|a| a.frame);
    let max_dev = match oldest {
        Some(f) => anchors
            .map
            .values()
            .map(|a| a.center.dist(f.center(f.tile_of(a.center))))
            .fold(0.0, f64::max),
        None => 0.0,
    };
    let (snap_conflicts, snap_positions) = count_snap_conflicts(trace);
    let (push_conflicts, final_slaves) = count_push_conflicts(trace);
    let n = setup.sensors.len();
    RunReport {
        seed: trace.header.seed,
        n_sensors: n,
        coverage_time,
        termination_time: detect_termination(trace, cfg.quiescence_window),
        end_time: trace.end_time(),
        messages_total: total,
        messages_per_sensor: total as f64 / n.max(1) as f64,
        messages_by_variant: by_variant,
        deliveries,
        snap_positions,
        snap_conflicts,
        snap_conflicts_per_position: ratio(snap_conflicts, snap_positions),
        push_conflicts,
        final_slaves,
        push_conflicts_per_slave: ratio(push_conflicts, final_slaves),
        pull_triggers: pulls,
        final_coverage: anchors.grid.fraction(),
        final_snapped,
        final_hybrid,
        final_portion_count: portions.len(),
        max_lattice_deviation: max_dev,
        total_distance_traveled: distance,
        energy_spent: energy,
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Column order of the aggregate table.
pub const CSV_COLUMNS: [&str; 19] = [
    "seed",
    "n_sensors",
    "coverage_time",
    "termination_time",
    "end_time",
    "messages_total",
    "messages_per_sensor",
    "snap_positions",
    "snap_conflicts",
    "snap_conflicts_per_position",
    "push_conflicts",
    "final_slaves",
    "push_conflicts_per_slave",
    "pull_triggers",
    "final_coverage",
    "final_snapped",
    "final_portion_count",
    "total_distance_traveled",
    "energy_spent",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunReport {
    pub fn csv_row(&self) -> String {
        [
            self.seed.to_string(),
            self.n_sensors.to_string(),
            opt(self.coverage_time),
            opt(self.termination_time),
            self.end_time.to_string(),
            self.messages_total.to_string(),
            self.messages_per_sensor.to_string(),
            self.snap_positions.to_string(),
            self.snap_conflicts.to_string(),
            self.snap_conflicts_per_position.to_string(),
            self.push_conflicts.to_string(),
            self.final_slaves.to_string(),
            self.push_conflicts_per_slave.to_string(),
            self.pull_triggers.to_string(),
            self.final_coverage.to_string(),
            self.final_snapped.to_string(),
            self.final_portion_count.to_string(),
            self.total_distance_traveled.to_string(),
            self.energy_spent.to_string(),
        ]
        .join(",")
    }

    pub fn terminated(&self) -> bool {
        self.termination_time.is_some()
    }
}

pub fn csv_table(reports: &[RunReport]) -> String {
    let mut s = CSV_COLUMNS.join(",");
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, InitialSensor, MediumModel, SimSetup, TraceHeader, TraceRecord};
    use crate::geometry::Polygon;
    use crate::protocol::ProtocolParams;

    fn empty_trace(records: Vec<TraceRecord>) -> Trace {
        Trace {
            header: TraceHeader {
                seed: 0,
                setup: SimSetup {
                    params: ProtocolParams::new(5.0, 11.0, 1.0, 0.045),
                    aoi: Polygon::rectangle(0.0, 0.0, 10.0, 10.0),
                    medium: MediumModel::default(),
                    sensors: vec![],
                    failures: vec![],
                    max_time: 1000.0,
                    snapshot_interval: 5.0,
                    starter_window: 11.0,
                    starters: None,
                },
            },
            records,
        }
    }

    fn send_at(t: f64) -> TraceRecord {
        TraceRecord {
            t,
            event: TraceEvent::Send {
                to: None,
                msg: crate::protocol::Message {
                    sender: 1,
                    portion: None,
                    body: Body::CardinalityInfo {
                        virtual_cardinality: 0,
                    },
                },
            },
        }
    }

    fn end(t: f64, drained: bool) -> TraceRecord {
        TraceRecord {
            t,
            event: TraceEvent::End {
                drained,
                deliveries: 0,
                energy_spent: 0.0,
                distance: 0.0,
            },
        }
    }

    #[test]
    fn termination_after_last_activity() {
        let t = empty_trace(vec![send_at(1.0), send_at(5.0), end(5.0, true)]);
        assert_eq!(detect_termination(&t, 60.0), Some(5.0));
    }

    #[test]
    fn termination_needs_a_full_window() {
        let recs: Vec<_> = (0..100)
            .map(|k| send_at(k as f64 * 30.0))
            .chain([end(2970.0, false)])
            .collect();
        assert_eq!(detect_termination(&empty_trace(recs), 60.0), None);
    }

    #[test]
    fn early_gap_counts() {
        let t = empty_trace(vec![send_at(1.0), send_at(100.0), end(100.0, true)]);
        assert_eq!(detect_termination(&t, 60.0), Some(1.0));
    }

    #[test]
    fn single_sensor_terminates_after_discovery() {
        let setup = SimSetup {
            sensors: vec![InitialSensor {
                id: 1000,
                position: Point::new(5.0, 5.0),
                energy: 1e4,
            }],
            ..empty_trace(vec![]).header.setup
        };
        let trace = simulate(&setup, 3);
        let rep = report(&trace, &MetricsConfig::default());
        let last_send = trace
            .records
            .iter()
            .rev()
            .find(|r| matches!(r.event, TraceEvent::Send { .. }))
            .unwrap()
            .t;
        assert_eq!(rep.termination_time, Some(last_send));
        assert_eq!(rep.messages_total, 2);
        assert_eq!(rep.snap_conflicts, 0);
        assert_eq!(rep.push_conflicts, 0);
        assert_eq!(rep.final_portion_count, 1);
        // One disk on a 10×10 square.
        assert!((rep.final_coverage - 0.7854).abs() < 0.01);
    }

    #[test]
    fn report_is_pure() {
        let setup = SimSetup {
            sensors: (0..6)
                .map(|i| InitialSensor {
                    id: 1000 + i,
                    position: Point::new(3.0 + i as f64, 4.0),
                    energy: 1e4,
                })
                .collect(),
            aoi: Polygon::rectangle(0.0, 0.0, 30.0, 30.0),
            ..empty_trace(vec![]).header.setup
        };
        let trace = simulate(&setup, 1);
        let a = report(&trace, &MetricsConfig::default());
        let b = report(&trace, &MetricsConfig::default());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(
            a.messages_total as usize,
            trace
                .records
                .iter()
                .filter(|r| matches!(r.event, TraceEvent::Send { .. }))
                .count()
        );
    }
}
