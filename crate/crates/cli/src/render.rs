//! SVG panels of a deployment at chosen instants, rebuilt from a trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use pnp_core::engine::{Trace, TraceEvent};
use pnp_core::geometry::{HexFrame, Point};
use pnp_core::protocol::{Body, Role, SensorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Layer {
    Aoi,
    Tiling,
    Sensors,
    Disks,
    Arrows,
}

impl Layer {
    pub const ALL: [Layer; 5] = [Layer::Aoi, Layer::Tiling, Layer::Sensors, Layer::Disks, Layer::Arrows];
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub times: Vec<f64>,
    /// Canvas width in pixels; the height follows the AoI aspect ratio.
    pub width: u32,
    pub layers: BTreeSet<Layer>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RenderError {
    #[error("no layers selected")]
    NoLayers,
    #[error("no times requested")]
    NoTimes,
    #[error("time {t} lies outside the trace span [0, {end}]")]
    OutOfSpan { t: f64, end: f64 },
    #[error("canvas width must be positive")]
    ZeroWidth,
}

impl RenderSpec {
    pub fn validate(&self, trace: &Trace) -> Result<(), RenderError> {
        if self.layers.is_empty() {
            return Err(RenderError::NoLayers);
        }
        if self.times.is_empty() {
            return Err(RenderError::NoTimes);
        }
        if self.width == 0 {
            return Err(RenderError::ZeroWidth);
        }
        let end = trace.end_time();
        if let Some(&t) = self.times.iter().find(|&&t| !(0.0..=end).contains(&t)) {
            return Err(RenderError::OutOfSpan { t, end });
        }
        Ok(())
    }
}

struct Motion {
    t0: f64,
    from: Point,
    to: Point,
}

struct Sensor {
    pos: Point,
    role: Role,
    alive: bool,
    motion: Option<Motion>,
    anchor: Option<(Point, HexFrame)>,
}

/// Sensor states at `t`, replaying the trace from the start.
fn state_at(trace: &Trace, t: f64) -> BTreeMap<SensorId, Sensor> {
    let setup = &trace.header.setup;
    let mut s: BTreeMap<SensorId, Sensor> = setup
        .sensors
        .iter()
        .map(|x| {
            (
                x.id,
                Sensor {
                    pos: x.position,
                    role: Role::Free,
                    alive: true,
                    motion: None,
                    anchor: None,
                },
            )
        })
        .collect();
    for r in trace.records.iter().take_while(|r| r.t <= t) {
        match &r.event {
            TraceEvent::MoveStart { id, from, to } => {
                if let Some(x) = s.get_mut(id) {
                    x.pos = *from;
                    x.motion = Some(Motion {
                        t0: r.t,
                        from: *from,
                        to: *to,
                    });
                }
            }
            TraceEvent::MoveEnd { id, at, .. } => {
                if let Some(x) = s.get_mut(id) {
                    x.pos = *at;
                    x.motion = None;
                }
            }
            TraceEvent::Role { id, to, .. } => {
                if let Some(x) = s.get_mut(id) {
                    x.role = *to;
                    if !matches!(to, Role::Snapped | Role::Hybrid) {
                        x.anchor = None;
                    }
                }
            }
            TraceEvent::Failure { id } => {
                if let Some(x) = s.get_mut(id) {
                    x.alive = false;
                    x.motion = None;
                    x.anchor = None;
                }
            }
            TraceEvent::Send { msg, .. } => {
                if let Body::IAS {
                    coordinates, frame, ..
                } = &msg.body
                {
                    if let Some(x) = s.get_mut(&msg.sender) {
                        x.anchor = Some((*coordinates, *frame));
                    }
                }
            }
            _ => {}
        }
    }
    let speed = setup.params.speed;
    for x in s.values_mut() {
        if let Some(m) = &x.motion {
            let d = m.from.dist(m.to);
            let k = if d > 0.0 { ((t - m.t0) * speed / d).min(1.0) } else { 1.0 };
            x.pos = m.from + (m.to - m.from).scale(k);
        }
    }
    s
}

fn role_color(role: Role) -> &'static str {
    match role {
        Role::Snapped => "#1f5fbf",
        Role::Hybrid => "#8a2be2",
        Role::Slave => "#2e8b57",
        Role::StoppedPending => "#d2691e",
        Role::Free => "#888888",
    }
}

/// One SVG document for instant `t`.
pub fn render_at(trace: &Trace, spec: &RenderSpec, t: f64) -> String {
    let setup = &trace.header.setup;
    let r_s = setup.params.r_s;
    let (lo, hi) = setup.aoi.bbox();
    let margin = r_s;
    let (x0, y0) = (lo.x - margin, lo.y - margin);
    let (w, h) = (hi.x - lo.x + 2.0 * margin, hi.y - lo.y + 2.0 * margin);
    let k = spec.width as f64 / w;
    let height = (h * k).round() as u32;
    // SVG y grows downward.
    let px = |p: Point| ((p.x - x0) * k, (y0 + h - p.y) * k);

    let state = state_at(trace, t);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" viewBox="0 0 {} {height}">"#,
        spec.width, spec.width
    );
    let _ = writeln!(out, r#"<title>t = {t:.2} s</title>"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let poly = |pts: &[Point]| {
        pts.iter()
            .map(|&p| {
                let (a, b) = px(p);
                format!("{a:.2},{b:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    if spec.layers.contains(&Layer::Aoi) {
        let _ = writeln!(
            out,
            r##"<polygon class="aoi" points="{}" fill="#f4f4f4" stroke="black" stroke-width="1.5"/>"##,
            poly(setup.aoi.vertices())
        );
    }
    let live = || state.iter().filter(|(_, s)| s.alive);
    if spec.layers.contains(&Layer::Disks) {
        for (_, s) in live() {
            let (a, b) = px(s.pos);
            let _ = writeln!(
                out,
                r##"<circle class="disk" cx="{a:.2}" cy="{b:.2}" r="{:.2}" fill="#1f5fbf" fill-opacity="0.06" stroke="none"/>"##,
                r_s * k
            );
        }
    }
    if spec.layers.contains(&Layer::Tiling) {
        for (_, s) in live() {
            if let Some((c, f)) = s.anchor {
                let _ = writeln!(
                    out,
                    r##"<polygon class="hex" points="{}" fill="none" stroke="#999999" stroke-width="0.8"/>"##,
                    poly(&f.hex_vertices(c))
                );
            }
        }
    }
    if spec.layers.contains(&Layer::Arrows) {
        for (_, s) in live() {
            if let Some(m) = &s.motion {
                let (a, b) = px(s.pos);
                let (c, d) = px(m.to);
                let _ = writeln!(
                    out,
                    r##"<line class="arrow" x1="{a:.2}" y1="{b:.2}" x2="{c:.2}" y2="{d:.2}" stroke="#cc3333" stroke-width="1"/>"##
                );
                let _ = writeln!(
                    out,
                    r##"<circle class="arrow-head" cx="{c:.2}" cy="{d:.2}" r="1.5" fill="#cc3333"/>"##
                );
            }
        }
    }
    if spec.layers.contains(&Layer::Sensors) {
        for (id, s) in &state {
            let (a, b) = px(s.pos);
            let (fill, role) = if s.alive {
                (role_color(s.role), s.role.as_str())
            } else {
                ("black", "dead")
            };
            let _ = writeln!(
                out,
                r#"<circle class="sensor {role}" data-id="{id}" cx="{a:.2}" cy="{b:.2}" r="2.5" fill="{fill}"/>"#
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One SVG per requested time, in request order.
pub fn render(trace: &Trace, spec: &RenderSpec) -> Result<Vec<String>, RenderError> {
    spec.validate(trace)?;
    Ok(spec.times.iter().map(|&t| render_at(trace, spec, t)).collect())
}

/// `n` instants spread evenly from the start to the end of the trace.
pub fn even_times(trace: &Trace, n: usize) -> Vec<f64> {
    let end = trace.end_time();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pnp_core::scenario::{self, ScenarioConfig};

    fn trace() -> Trace {
        let cfg = ScenarioConfig::preset("center80", 30).unwrap();
        scenario::run(&cfg, 1).unwrap()
    }

    fn spec(times: Vec<f64>) -> RenderSpec {
        RenderSpec {
            times,
            width: 400,
            layers: Layer::ALL.into_iter().collect(),
        }
    }

    #[test]
    fn one_svg_per_time() {
        let tr = trace();
        let out = render(&tr, &spec(even_times(&tr, 4))).unwrap();
        assert_eq!(out.len(), 4);
        for s in &out {
            assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
            assert_eq!(s.matches("class=\"sensor").count(), 30);
        }
    }

    #[test]
    fn initial_panel_has_no_tiling() {
        let tr = trace();
        let out = render(&tr, &spec(vec![0.0])).unwrap();
        assert!(!out[0].contains("class=\"hex\""));
        assert_eq!(out[0].matches("sensor free").count(), 30);
    }

    #[test]
    fn final_panel_shows_tiles() {
        let tr = trace();
        let out = render(&tr, &spec(vec![tr.end_time()])).unwrap();
        assert!(out[0].contains("class=\"hex\""));
    }

    #[test]
    fn deterministic_and_pure() {
        let tr = trace();
        let before = tr.to_jsonl();
        let s = spec(vec![0.0, 10.0]);
        assert_eq!(render(&tr, &s).unwrap(), render(&tr, &s).unwrap());
        assert_eq!(tr.to_jsonl(), before);
    }

    #[test]
    fn rejects_bad_specs() {
        let tr = trace();
        let mut s = spec(vec![0.0]);
        s.layers.clear();
        assert_eq!(render(&tr, &s), Err(RenderError::NoLayers));
        let end = tr.end_time();
        assert_eq!(
            render(&tr, &spec(vec![end + 1.0])),
            Err(RenderError::OutOfSpan { t: end + 1.0, end })
        );
        assert_eq!(render(&tr, &spec(vec![-1.0])), Err(RenderError::OutOfSpan { t: -1.0, end }));
    }
}
