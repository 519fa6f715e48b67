//! Deterministic discrete-event simulator driving the per-sensor state
//! machines over a broadcast medium.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Polygon};
use crate::protocol::{
    Context, Effects, Input, Message, MotionCmd, Note, ProtocolParams, Role, SensorId, SensorState,
    TimerCmd, TimerId,
};

/// RNG substreams. Each dimension of randomness draws from its own stream
/// so that changing one never perturbs another.
pub mod streams {
    pub const PLACEMENT: u64 = 1;
    pub const STARTER: u64 = 2;
    pub const ORIENTATION: u64 = 3;
    pub const MEDIUM: u64 = 4;
}

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Loss and retransmission abstraction of the layers below the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumModel {
    pub base_latency: f64,
    pub jitter: f64,
    /// Drop probability of a single transmission attempt.
    pub loss: f64,
    pub retries: u32,
}

impl Default for MediumModel {
    fn default() -> Self {
        Self {
            base_latency: 0.01,
            jitter: 0.005,
            loss: 0.0,
            retries: 3,
        }
    }
}

impl MediumModel {
    /// Worst-case one-hop latency: every retransmission used plus full
    /// jitter.
    pub fn t_msg(&self) -> f64 {
        self.base_latency * (1.0 + self.retries as f64) + self.jitter
    }

    pub fn delivery_probability(&self) -> f64 {
        1.0 - self.loss.powi(self.retries as i32 + 1)
    }

    /// Delay of one delivery, or `None` if every attempt is lost.
    pub fn sample_delay(&self, rng: &mut impl Rng) -> Option<f64> {
        let mut k = 0;
        if self.loss > 0.0 {
            while rng.gen::<f64>() < self.loss {
                k += 1;
                if k > self.retries {
                    return None;
                }
            }
        }
        let jitter = if self.jitter > 0.0 {
            rng.gen::<f64>() * self.jitter
        } else {
            0.0
        };
        Some(self.base_latency + jitter + k as f64 * self.base_latency)
    }
}

/// Everything the simulator needs for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetup {
    pub params: ProtocolParams,
    pub aoi: Polygon,
    pub medium: MediumModel,
    pub sensors: Vec<InitialSensor>,
    pub failures: Vec<FailureAt>,
    pub max_time: f64,
    pub snapshot_interval: f64,
    /// Starter instants are drawn uniformly over `[0, starter_window)`.
    pub starter_window: f64,
    /// Fixed starter schedule. When set, only the listed sensors try to
    /// start a tiling, at the given instants and orientations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starters: Option<Vec<StarterAt>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarterAt {
    pub id: SensorId,
    pub time: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSensor {
    pub id: SensorId,
    pub position: Point,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureAt {
    pub id: SensorId,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub seed: u64,
    pub setup: SimSetup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSnapshot {
    pub id: SensorId,
    pub position: Point,
    pub role: Role,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    Send {
        to: Option<SensorId>,
        msg: Message,
    },
    Role {
        id: SensorId,
        from: Role,
        to: Role,
    },
    MoveStart {
        id: SensorId,
        from: Point,
        to: Point,
    },
    MoveEnd {
        id: SensorId,
        at: Point,
        completed: bool,
    },
    Failure {
        id: SensorId,
    },
    Note {
        id: SensorId,
        #[serde(flatten)]
        note: Note,
    },
    Snapshot {
        sensors: Vec<SensorSnapshot>,
    },
    End {
        /// No event was left pending: nothing can ever happen again.
        drained: bool,
        deliveries: u64,
        energy_spent: f64,
        distance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("empty trace")]
    Empty,
}

impl Trace {
    /// One JSON document per line: the header, then every record.
    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Trace, TraceIoError> {
        let mut lines = r.lines().enumerate();
        let header = loop {
            let Some((i, line)) = lines.next() else {
                return Err(TraceIoError::Empty);
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            break serde_json::from_str(&line).map_err(|source| TraceIoError::Parse {
                line: i + 1,
                source,
            })?;
        };
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(&line).map_err(|source| TraceIoError::Parse {
                    line: i + 1,
                    source,
                })?,
            );
        }
        Ok(Trace { header, records })
    }

    /// Time of the last record.
    pub fn end_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    pub fn drained(&self) -> bool {
        matches!(
            self.records.last(),
            Some(TraceRecord {
                event: TraceEvent::End { drained: true, .. },
                ..
            })
        )
    }
}

#[derive(Debug, Clone)]
enum EventKind {
    Deliver {
        to: usize,
        msg: Message,
    },
    Timer {
        node: usize,
        id: TimerId,
        generation: u64,
    },
    Arrive {
        node: usize,
        generation: u64,
    },
    Starter {
        node: usize,
        theta: f64,
    },
    Failure {
        node: usize,
    },
    Snapshot,
}

#[derive(Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct Motion {
    origin: Point,
    end: Point,
    depart: f64,
}

struct Node {
    state: SensorState,
    alive: bool,
    motion: Option<Motion>,
    motion_gen: u64,
    timers: BTreeMap<TimerId, u64>,
    /// Position at the last energy settlement.
    settled: Point,
}

struct Sim<'a> {
    setup: &'a SimSetup,
    ctx: Context,
    nodes: Vec<Node>,
    index: BTreeMap<SensorId, usize>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    timer_gen: u64,
    pending_real: usize,
    medium_rng: ChaCha8Rng,
    records: Vec<TraceRecord>,
    deliveries: u64,
    energy_spent: f64,
    distance: f64,
    /// Every scheduled delivery as (index of the send record, receiver).
    #[cfg(test)]
    audit: Vec<(usize, SensorId)>,
}

impl Sim<'_> {
    fn schedule(&mut self, time: f64, kind: EventKind) {
        if !matches!(kind, EventKind::Snapshot) {
            self.pending_real += 1;
        }
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn record(&mut self, t: f64, event: TraceEvent) {
        self.records.push(TraceRecord { t, event });
    }

    fn position_at(&self, i: usize, now: f64) -> Point {
        let n = &self.nodes[i];
        match n.motion {
            Some(m) if n.alive => {
                let len = m.origin.dist(m.end);
                let d = ((now - m.depart) * self.ctx.params.speed).clamp(0.0, len);
                m.origin.toward(m.end, d)
            }
            _ => n.state.position,
        }
    }

    /// Bring the node's stored position and energy up to `now`.
    fn sync(&mut self, i: usize, now: f64) {
        let p = self.position_at(i, now);
        let per_m = self.ctx.params.energy.move_per_m;
        let n = &mut self.nodes[i];
        let d = n.settled.dist(p);
        n.settled = p;
        n.state.position = p;
        n.state.energy -= d * per_m;
        self.energy_spent += d * per_m;
        self.distance += d;
    }

    fn halt(&mut self, i: usize, now: f64, completed: bool) {
        if self.nodes[i].motion.take().is_some() {
            self.nodes[i].motion_gen += 1;
            let at = self.nodes[i].state.position;
            let id = self.nodes[i].state.id;
            self.record(now, TraceEvent::MoveEnd { id, at, completed });
        }
    }

    fn step(&mut self, i: usize, input: Input, now: f64) {
        self.sync(i, now);
        let before = self.nodes[i].state.role;
        let fx = self.nodes[i].state.step(&input, now, &self.ctx);
        let after = self.nodes[i].state.role;
        let id = self.nodes[i].state.id;
        if before != after {
            self.record(
                now,
                TraceEvent::Role {
                    id,
                    from: before,
                    to: after,
                },
            );
        }
        self.apply(i, fx, now);
    }

    fn apply(&mut self, i: usize, fx: Effects, now: f64) {
        let id = self.nodes[i].state.id;
        for note in fx.notes {
            self.record(now, TraceEvent::Note { id, note });
        }
        for t in fx.timers {
            match t {
                TimerCmd::Set(tid, at) => {
                    self.timer_gen += 1;
                    let generation = self.timer_gen;
                    self.nodes[i].timers.insert(tid, generation);
                    self.schedule(
                        at.max(now),
                        EventKind::Timer {
                            node: i,
                            id: tid,
                            generation,
                        },
                    );
                }
                TimerCmd::Cancel(tid) => {
                    self.nodes[i].timers.remove(&tid);
                }
            }
        }
        for m in fx.motions {
            match m {
                MotionCmd::Stop => self.halt(i, now, false),
                MotionCmd::Go { target, stop_at } => {
                    self.halt(i, now, false);
                    let from = self.nodes[i].state.position;
                    let len = from.dist(target);
                    let travel = (len - stop_at).max(0.0);
                    let end = from.toward(target, travel);
                    let generation = self.nodes[i].motion_gen;
                    if travel > 0.0 {
                        self.nodes[i].motion = Some(Motion {
                            origin: from,
                            end,
                            depart: now,
                        });
                        self.record(now, TraceEvent::MoveStart { id, from, to: end });
                    }
                    let eta = now + travel / self.ctx.params.speed;
                    self.schedule(
                        eta,
                        EventKind::Arrive {
                            node: i,
                            generation,
                        },
                    );
                }
            }
        }
        for msg in fx.outbound {
            self.transmit(i, msg, now);
        }
    }

    fn transmit(&mut self, i: usize, msg: Message, now: f64) {
        let to = msg.receiver();
        self.record(
            now,
            TraceEvent::Send {
                to,
                msg: msg.clone(),
            },
        );
        self.nodes[i].state.energy -= self.ctx.params.energy.tx;
        self.energy_spent += self.ctx.params.energy.tx;
        let origin = self.nodes[i].state.position;
        let r_tx = self.ctx.params.r_tx;
        let targets: Vec<usize> = match to {
            Some(r) => self.index.get(&r).copied().into_iter().collect(),
            None => (0..self.nodes.len()).filter(|&j| j != i).collect(),
        };
        for j in targets {
            if !self.nodes[j].alive || self.position_at(j, now).dist(origin) > r_tx {
                continue;
            }
            if let Some(delay) = self.setup.medium.sample_delay(&mut self.medium_rng) {
                #[cfg(test)]
                self.audit.push((self.records.len() - 1, self.nodes[j].state.id));
                self.schedule(
                    now + delay,
                    EventKind::Deliver {
                        to: j,
                        msg: msg.clone(),
                    },
                );
            }
        }
    }

    fn snapshot(&mut self, now: f64) {
        let sensors = (0..self.nodes.len())
            .map(|i| SensorSnapshot {
                id: self.nodes[i].state.id,
                position: self.position_at(i, now),
                role: self.nodes[i].state.role,
                alive: self.nodes[i].alive,
            })
            .collect();
        self.record(now, TraceEvent::Snapshot { sensors });
    }

    fn run(&mut self) -> f64 {
        let mut now = 0.0;
        let mut drained = true;
        while let Some(ev) = self.queue.pop() {
            if ev.time > self.setup.max_time {
                drained = false;
                break;
            }
            now = ev.time;
            match ev.kind {
                EventKind::Snapshot => {
                    self.snapshot(now);
                    if self.pending_real > 0 {
                        self.schedule(now + self.setup.snapshot_interval, EventKind::Snapshot);
                    }
                    continue;
                }
                _ => self.pending_real -= 1,
            }
            match ev.kind {
                EventKind::Deliver { to, msg } => {
                    if self.nodes[to].alive {
                        self.deliveries += 1;
                        self.nodes[to].state.energy -= self.ctx.params.energy.rx;
                        self.energy_spent += self.ctx.params.energy.rx;
                        self.step(to, Input::Message(msg), now);
                    }
                }
                EventKind::Timer {
                    node,
                    id,
                    generation,
                } => {
                    if self.nodes[node].alive
                        && self.nodes[node].timers.get(&id) == Some(&generation)
                    {
                        self.nodes[node].timers.remove(&id);
                        self.step(node, Input::Timer(id), now);
                    }
                }
                EventKind::Arrive { node, generation } => {
                    if self.nodes[node].alive && self.nodes[node].motion_gen == generation {
                        self.sync(node, now);
                        self.halt(node, now, true);
                        self.step(node, Input::Arrived, now);
                    }
                }
                EventKind::Starter { node, theta } => {
                    if self.nodes[node].alive {
                        self.step(node, Input::StarterFire { theta }, now);
                    }
                }
                EventKind::Failure { node } => {
                    if self.nodes[node].alive {
                        self.sync(node, now);
                        self.halt(node, now, false);
                        self.nodes[node].alive = false;
                        self.nodes[node].timers.clear();
                        let id = self.nodes[node].state.id;
                        self.record(now, TraceEvent::Failure { id });
                    }
                }
                EventKind::Snapshot => unreachable!(),
            }
        }
        if drained {
            self.snapshot(now);
        } else {
            now = self.setup.max_time;
            for i in 0..self.nodes.len() {
                if self.nodes[i].alive {
                    self.sync(i, now);
                }
            }
            self.snapshot(now);
        }
        self.record(
            now,
            TraceEvent::End {
                drained,
                deliveries: self.deliveries,
                energy_spent: self.energy_spent,
                distance: self.distance,
            },
        );
        now
    }
}

/// Run one simulation. Identical `(setup, seed)` yield identical traces.
pub fn simulate(setup: &SimSetup, seed: u64) -> Trace {
    let mut sim = Sim::new(setup, seed);
    sim.run();
    sim.into_trace(seed)
}

impl<'a> Sim<'a> {
    fn new(setup: &'a SimSetup, seed: u64) -> Self {
        let ctx = Context::new(setup.params, setup.aoi.clone());
        let nodes: Vec<Node> = setup
            .sensors
            .iter()
            .map(|s| Node {
                state: SensorState::new(s.id, s.position, s.energy),
                alive: true,
                motion: None,
                motion_gen: 0,
                timers: BTreeMap::new(),
                settled: s.position,
            })
            .collect();
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.state.id, i))
            .collect();
        let mut sim = Sim {
            setup,
            ctx,
            nodes,
            index,
            queue: BinaryHeap::new(),
            seq: 0,
            timer_gen: 0,
            pending_real: 0,
            medium_rng: substream(seed, streams::MEDIUM),
            records: Vec::new(),
            deliveries: 0,
            energy_spent: 0.0,
            distance: 0.0,
            #[cfg(test)]
            audit: Vec::new(),
        };
        let mut starter_rng = substream(seed, streams::STARTER);
        let mut theta_rng = substream(seed, streams::ORIENTATION);
        match &setup.starters {
            Some(list) => {
                for s in list {
                    if let Some(&node) = sim.index.get(&s.id) {
                        sim.schedule(
                            s.time,
                            EventKind::Starter {
                                node,
                                theta: s.theta,
                            },
                        );
                    }
                }
            }
            None => {
                for i in 0..sim.nodes.len() {
                    let t = if setup.starter_window > 0.0 {
                        starter_rng.gen_range(0.0..setup.starter_window)
                    } else {
                        0.0
                    };
                    let theta = theta_rng.gen_range(0.0..std::f64::consts::FRAC_PI_3);
                    sim.schedule(t, EventKind::Starter { node: i, theta });
                }
            }
        }
        for f in &setup.failures {
            if let Some(&i) = sim.index.get(&f.id) {
                sim.schedule(f.time, EventKind::Failure { node: i });
            }
        }
        sim.schedule(0.0, EventKind::Snapshot);
        sim
    }

    fn into_trace(self, seed: u64) -> Trace {
        Trace {
            header: TraceHeader {
                seed,
                setup: self.setup.clone(),
            },
            records: self.records,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(sensors: Vec<Point>) -> SimSetup {
        let params = ProtocolParams::new(5.0, 11.0, 1.0, MediumModel::default().t_msg());
        SimSetup {
            params,
            aoi: Polygon::rectangle(0.0, 0.0, 80.0, 80.0),
            medium: MediumModel::default(),
            sensors: sensors
                .into_iter()
                .enumerate()
                .map(|(i, p)| InitialSensor {
                    id: 1000 + i as u32,
                    position: p,
                    energy: 1e4,
                })
                .collect(),
            failures: vec![],
            max_time: 5000.0,
            snapshot_interval: 5.0,
            starter_window: 11.0,
            starters: None,
        }
    }

    #[test]
    fn delivery_probability_with_retries() {
        let m = MediumModel {
            loss: 0.3,
            retries: 3,
            ..MediumModel::default()
        };
        assert!((m.delivery_probability() - 0.9919).abs() < 1e-4);
        let mut rng = substream(1, streams::MEDIUM);
        let n = 200_000;
        let ok = (0..n)
            .filter(|_| m.sample_delay(&mut rng).is_some())
            .count();
        assert!((ok as f64 / n as f64 - 0.9919).abs() < 0.002);
    }

    #[test]
    fn delay_within_bounds() {
        let m = MediumModel::default();
        let mut rng = substream(3, streams::MEDIUM);
        for _ in 0..1000 {
            let d = m.sample_delay(&mut rng).unwrap();
            assert!(d >= m.base_latency && d <= m.base_latency + m.jitter);
        }
    }

    #[test]
    fn range_cutoff() {
        let s = setup(vec![
            Point::new(40.0, 40.0),
            Point::new(50.9, 40.0),
            Point::new(51.1, 40.0),
        ]);
        let mut s = s;
        s.max_time = 0.0;
        s.starter_window = 0.0;
        // At t=0 everyone fires; the first starter's IAS reaches only the
        // sensor at 10.9 m.
        let trace = simulate(&s, 1);
        let first_ias = trace
            .records
            .iter()
            .find_map(|r| match &r.event {
                TraceEvent::Send { msg, .. } => Some(msg.sender),
                _ => None,
            })
            .unwrap();
        assert_eq!(first_ias, 1000);
    }

    #[test]
    fn single_sensor_quiesces() {
        let trace = simulate(&setup(vec![Point::new(40.0, 40.0)]), 9);
        let sends: Vec<_> = trace
            .records
            .iter()
            .filter_map(|r| match &r.event {
                TraceEvent::Send { msg, .. } => Some(msg.variant()),
                _ => None,
            })
            .collect();
        use crate::protocol::Variant;
        assert_eq!(sends, vec![Variant::IAS, Variant::CardinalityInfo]);
        assert!(trace.drained());
        match trace.records.last().unwrap().event {
            TraceEvent::End { deliveries, .. } => assert_eq!(deliveries, 0),
            _ => panic!("missing end record"),
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let pts = (0..20)
            .map(|i| Point::new(30.0 + (i % 5) as f64 * 2.0, 30.0 + (i / 5) as f64 * 2.0))
            .collect();
        let s = setup(pts);
        assert_eq!(simulate(&s, 4).to_jsonl(), simulate(&s, 4).to_jsonl());
    }

    #[test]
    fn trace_round_trip() {
        let s = setup(vec![Point::new(40.0, 40.0), Point::new(42.0, 40.0)]);
        let t = simulate(&s, 2);
        let text = t.to_jsonl();
        let back = Trace::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back.to_jsonl(), text);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Positions of every sensor just before record `upto`, rebuilt
        /// from the initial placement and the motion records alone.
        fn positions(trace: &Trace, upto: usize, t: f64) -> BTreeMap<SensorId, Point> {
            let v = trace.header.setup.params.speed;
            let mut pos: BTreeMap<SensorId, Point> =
                trace.header.setup.sensors.iter().map(|s| (s.id, s.position)).collect();
            let mut moving: BTreeMap<SensorId, (f64, Point, Point)> = BTreeMap::new();
            for r in &trace.records[..upto] {
                match &r.event {
                    TraceEvent::MoveStart { id, from, to } => {
                        moving.insert(*id, (r.t, *from, *to));
                    }
                    TraceEvent::MoveEnd { id, at, .. } => {
                        moving.remove(id);
                        pos.insert(*id, *at);
                    }
                    _ => {}
                }
            }
            for (id, (t0, from, to)) in moving {
                let len = from.dist(to);
                let k = ((t - t0) * v / len).clamp(0.0, 1.0);
                pos.insert(id, from + (to - from).scale(k));
            }
            pos
        }

        fn cluster() -> impl Strategy<Value = Vec<Point>> {
            prop::collection::vec((30.0..50.0f64, 30.0..50.0f64), 2..25)
                .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn range_honesty(pts in cluster(), seed in 0u64..1000) {
                let mut s = setup(pts);
                s.max_time = 300.0;
                let mut sim = Sim::new(&s, seed);
                sim.run();
                let audit = std::mem::take(&mut sim.audit);
                let trace = sim.into_trace(seed);
                let r_tx = s.params.r_tx;
                for (idx, to) in audit {
                    let rec = &trace.records[idx];
                    let TraceEvent::Send { msg, .. } = &rec.event else {
                        panic!("audit points at a non-send record");
                    };
                    let pos = positions(&trace, idx, rec.t);
                    let d = pos[&msg.sender].dist(pos[&to]);
                    prop_assert!(d <= r_tx + 1e-9, "delivery over {d} m");
                }
            }

            #[test]
            fn kinematics(pts in cluster(), seed in 0u64..1000) {
                let mut s = setup(pts);
                s.max_time = 300.0;
                let trace = simulate(&s, seed);
                let v = s.params.speed;
                let mut open: BTreeMap<SensorId, (f64, Point, Point)> = BTreeMap::new();
                for r in &trace.records {
                    match &r.event {
                        TraceEvent::MoveStart { id, from, to } => {
                            open.insert(*id, (r.t, *from, *to));
                        }
                        TraceEvent::MoveEnd { id, at, .. } => {
                            let (t0, from, to) = open.remove(id).expect("end without start");
                            let len = from.dist(to);
                            let k = ((r.t - t0) * v / len).min(1.0);
                            let want = Point::new(from.x + (to.x - from.x) * k, from.y + (to.y - from.y) * k);
                            prop_assert!(at.dist(want) < 1e-9);
                        }
                        _ => {}
                    }
                }
            }

            #[test]
            fn replay_is_identical(pts in cluster(), seed in 0u64..1000) {
                let mut s = setup(pts);
                s.max_time = 300.0;
                prop_assert_eq!(simulate(&s, seed).to_jsonl(), simulate(&s, seed).to_jsonl());
            }

            #[test]
            fn time_never_runs_backwards(pts in cluster(), seed in 0u64..1000) {
                let mut s = setup(pts);
                s.max_time = 300.0;
                let trace = simulate(&s, seed);
                prop_assert!(trace.records.windows(2).all(|w| w[0].t <= w[1].t));
            }
        }
    }
}
