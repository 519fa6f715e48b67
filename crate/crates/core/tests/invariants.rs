//! Property tests over geometry, handlers, whole runs and reports.

mod common;

use std::collections::BTreeMap;

use pnp_core::engine::{simulate, Trace, TraceEvent};
use pnp_core::geometry::{adjacent_centers, owning_center, point_in_hex, Axial, HexFrame, Point, Polygon};
use pnp_core::metrics;
use pnp_core::protocol::{self, Body, Context, Input, Message, ProtocolParams, Role, SensorState, TimerId};
use pnp_core::scenario::{self, Distribution, MetricsConfig, ScenarioConfig};
use proptest::prelude::*;

fn frame() -> impl Strategy<Value = HexFrame> {
    (-50.0..50.0f64, -50.0..50.0f64, 0.0..std::f64::consts::FRAC_PI_3, 0.5..10.0f64)
        .prop_map(|(x, y, th, side)| HexFrame::new(Point::new(x, y), th, side, 0.0, 1))
}

fn point() -> impl Strategy<Value = Point> {
    (-200.0..200.0f64, -200.0..200.0f64).prop_map(|(x, y)| Point::new(x, y))
}

proptest! {
    #[test]
    fn every_point_has_exactly_one_hexagon(f in frame(), p in point()) {
        let c = owning_center(p, &f);
        prop_assert!(point_in_hex(p, c, &f));
        for n in adjacent_centers(c, &f) {
            prop_assert!(!point_in_hex(p, n, &f));
        }
        // Nothing outside the first ring can hold it either.
        prop_assert!(p.dist(c) <= f.side + 1e-9);
    }

    #[test]
    fn adjacency_is_symmetric(f in frame(), q in -30i32..30, r in -30i32..30) {
        let c = f.center(Axial::new(q, r));
        for n in adjacent_centers(c, &f) {
            prop_assert!(adjacent_centers(n, &f).iter().any(|m| m.dist(c) < 1e-6));
            prop_assert!((n.dist(c) - 3f64.sqrt() * f.side).abs() < 1e-6);
        }
    }

    #[test]
    fn neighbors_within_radio_range(r_s in 0.5..20.0f64, extra in 0.0..5.0f64, th in 0.0..1.0f64) {
        let r_tx = 3f64.sqrt() * r_s + extra;
        let f = HexFrame::new(Point::new(0.0, 0.0), th, r_s, 0.0, 1);
        for n in adjacent_centers(f.origin, &f) {
            prop_assert!(n.dist(f.origin) <= r_tx + 1e-9);
        }
    }
}

/// A pool of inputs a sensor near the origin tile could plausibly see.
fn input(me: u32) -> impl Strategy<Value = Input> {
    let f = HexFrame::new(Point::new(0.0, 0.0), 0.2, 5.0, 0.5, 1000);
    let older = HexFrame::new(Point::new(1.0, 2.0), 0.7, 5.0, 0.1, 1003);
    let tile = (-2i32..=2, -2i32..=2).prop_map(|(q, r)| Axial::new(q, r));
    let from = 1000u32..1008;
    let near = (-15.0..15.0f64, -15.0..15.0f64).prop_map(|(x, y)| Point::new(x, y));
    let body = prop_oneof![
        (tile.clone(), any::<bool>()).prop_map(move |(t, old)| {
            let fr = if old { older } else { f };
            Body::IAS { coordinates: fr.center(t), starter_timestamp: fr.starter_ts, frame: fr }
        }),
        (tile.clone(), 0u32..4).prop_map(move |(t, c)| Body::InfoSnapped { coordinates: f.center(t), virtual_cardinality: c }),
        near.clone().prop_map(|p| Body::InfoSlave { coordinates: p, energy_level: 9000.0 }),
        near.clone().prop_map(|p| Body::InfoFree { coordinates: p }),
        tile.clone().prop_map(move |t| Body::SIP { receiver_id: me, target_position: f.center(t) }),
        Just(Body::AckSIP { receiver_id: me }),
        (tile.clone(), 0.0..10.0f64).prop_map(move |(t, ts)| Body::ClaimPosition { coordinates: f.center(t), timestamp: ts }),
        tile.clone().prop_map(move |t| Body::PositionTaken { coordinates: f.center(t) }),
        near.clone().prop_map(|p| Body::InfoStopped { coordinates: p }),
        Just(Body::IAYS { receiver_id: me }),
        (0u32..5).prop_map(|c| Body::CardinalityInfo { virtual_cardinality: c }),
        (0u32..5, 0u64..4).prop_map(move |(c, tx)| Body::Offer { receiver_id: me, virtual_cardinality: c, transaction_id: tx }),
        Just(Body::AckOffer { receiver_id: me }),
        (tile.clone(), 1000u32..1008, 0u64..4).prop_map(move |(t, d, tx)| Body::MoveTo {
            receiver_id: me,
            destination_coordinates: f.center(t),
            destination_snapped_id: d,
            transaction_id: tx,
        }),
        (0u64..4).prop_map(move |tx| Body::InfoArrived { receiver_id: me, transaction_id: tx, energy_level: 9000.0 }),
        (tile.clone(), 0i32..4, 0i64..2000).prop_map(move |(t, h, o)| Body::HoleInfo {
            hop_counter: h,
            order_value: o,
            hole_coordinates: f.center(t),
            timeout: 10.0,
        }),
        tile.prop_map(move |t| Body::Retirement { hole_coordinates: f.center(t) }),
    ];
    let timer = prop_oneof![
        Just(TimerId::Discovery),
        Just(TimerId::Claim),
        Just(TimerId::Stopped),
        Just(TimerId::Offer),
        Just(TimerId::SubstWait),
        Just(TimerId::SubstArrival),
        Just(TimerId::Pull),
        Just(TimerId::PullWait),
        (0u64..4).prop_map(TimerId::PushTx),
    ];
    prop_oneof![
        1 => (0.0..1.0f64).prop_map(|theta| Input::StarterFire { theta }),
        1 => Just(Input::Arrived),
        1 => timer.prop_map(Input::Timer),
        4 => (from, body, any::<bool>()).prop_map(move |(sender, body, tagged)| {
            let portion = tagged.then(|| f.portion());
            Input::Message(Message { sender, portion, body })
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Handlers are functions of (state, input, now): the same call twice
    /// gives the same result, and the input state is left alone.
    #[test]
    fn handlers_are_pure(
        start in (-3.0..3.0f64, -3.0..3.0f64),
        inputs in prop::collection::vec(input(1000), 1..40),
    ) {
        let ctx = Context::new(ProtocolParams::new(5.0, 11.0, 1.0, 0.045), Polygon::rectangle(-30.0, -30.0, 30.0, 30.0));
        let mut state = SensorState::new(1000, Point::new(start.0, start.1), 1e4);
        for (k, inp) in inputs.iter().enumerate() {
            let now = k as f64 * 0.7;
            let before = state.clone();
            let a = protocol::handle(&state, inp, now, &ctx);
            let b = protocol::handle(&state, inp, now, &ctx);
            prop_assert_eq!(&state, &before);
            prop_assert_eq!(&a, &b);
            state = a.state;
        }
    }
}

fn small(n: usize, side: f64, dist: Distribution) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(
        vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]],
        n,
        dist,
    );
    c.max_time = 3000.0;
    c
}

fn distribution() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        Just(Distribution::UniformRandom),
        Just(Distribution::Cluster { center: [15.0, 15.0], radius: 4.0 }),
        Just(Distribution::BoundaryCluster { edge: None, depth: 4.0 }),
    ]
}

fn runs() -> impl Strategy<Value = (ScenarioConfig, u64)> {
    (15usize..45, distribution(), 0u64..10_000).prop_map(|(n, d, seed)| (small(n, 30.0, d), seed))
}

/// Announcements of an already held position by anyone but its holder.
/// A sensor holds the position it last announced with PositionTaken or
/// IAS, for as long as it stays alive and snapped (or hybrid).
fn claim_violations(trace: &Trace) -> Vec<String> {
    let key = |p: Point| ((p.x * 1e4).round() as i64, (p.y * 1e4).round() as i64);
    let mut role: BTreeMap<u32, Role> = BTreeMap::new();
    let mut dead: BTreeMap<u32, bool> = BTreeMap::new();
    let mut holds: BTreeMap<u32, (i64, i64)> = BTreeMap::new();
    let mut holder: BTreeMap<(i64, i64), u32> = BTreeMap::new();
    let mut bad = Vec::new();
    for r in &trace.records {
        match &r.event {
            TraceEvent::Role { id, to, .. } => {
                role.insert(*id, *to);
            }
            TraceEvent::Failure { id } => {
                dead.insert(*id, true);
            }
            TraceEvent::Send { msg, .. } => {
                let (c, claim) = match msg.body {
                    Body::PositionTaken { coordinates } => (coordinates, true),
                    Body::IAS { coordinates, .. } => (coordinates, false),
                    _ => continue,
                };
                let k = key(c);
                if let Some(&h) = holder.get(&k) {
                    let live = h != msg.sender
                        && !dead.get(&h).copied().unwrap_or(false)
                        && holds.get(&h) == Some(&k)
                        && matches!(role.get(&h), Some(Role::Snapped | Role::Hybrid));
                    if live && claim {
                        bad.push(format!("{} took {c:?} from live holder {h} at {}", msg.sender, r.t));
                    }
                }
                holder.insert(k, msg.sender);
                holds.insert(msg.sender, k);
            }
            _ => {}
        }
    }
    bad
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_winner_per_claimed_position((cfg, seed) in runs()) {
        let trace = scenario::run(&cfg, seed).unwrap();
        let bad = claim_violations(&trace);
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }

    #[test]
    fn report_is_a_function_of_the_trace((cfg, seed) in runs()) {
        let trace = scenario::run(&cfg, seed).unwrap();
        let a = metrics::report(&trace, &cfg.metrics);
        let back = Trace::read_jsonl(trace.to_jsonl().as_bytes()).unwrap();
        let b = metrics::report(&back, &cfg.metrics);
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

        let sends = trace.records.iter().filter(|r| matches!(r.event, TraceEvent::Send { .. })).count();
        prop_assert_eq!(a.messages_total as usize, sends);
        prop_assert_eq!(a.messages_by_variant.values().sum::<u64>(), a.messages_total);
    }

    #[test]
    fn covered_and_quiet_means_one_portion((cfg, seed) in runs()) {
        let trace = scenario::run(&cfg, seed).unwrap();
        let r = metrics::report(&trace, &MetricsConfig::default());
        if r.terminated() && r.final_coverage >= 0.99 {
            prop_assert_eq!(r.final_portion_count, 1);
            prop_assert!(r.max_lattice_deviation < 1e-3);
        }
    }

    #[test]
    fn placement_stays_inside_and_repeats(
        preset in prop::sample::select(vec!["random80", "boundary80", "center80", "narrows"]),
        n in 1usize..300,
        seed in any::<u64>(),
    ) {
        let cfg = ScenarioConfig::preset(preset, n).unwrap();
        let aoi = cfg.polygon().unwrap();
        let a = scenario::generate_initial(&cfg, seed).unwrap();
        prop_assert_eq!(a.len(), n);
        prop_assert!(a.iter().all(|s| aoi.contains(s.position)));
        prop_assert_eq!(a, scenario::generate_initial(&cfg, seed).unwrap());
    }
}

#[test]
fn micro_scenarios_have_no_claim_violations() {
    for s in [common::claim_contention(), common::two_offerers(), common::pull_cascade()] {
        assert!(claim_violations(&simulate(&s, 1)).is_empty());
    }
}
