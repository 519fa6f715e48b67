//! Scenario configuration, presets, and initial sensor placement.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{self, FailureAt, InitialSensor, MediumModel, SimSetup, Trace};
use crate::geometry::{GeometryError, Point, Polygon};
use crate::protocol::{EnergyModel, ProtocolParams, SensorId};

/// IDs are offset from the placement index so that a device ID can never
/// collide with the small order values that hole triggers assign.
pub const ID_BASE: SensorId = 1000;

pub const PRESETS: [&str; 4] = ["random80", "boundary80", "center80", "narrows"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Distribution {
    UniformRandom,
    Cluster {
        center: [f64; 2],
        radius: f64,
    },
    /// Uniform over the band within `depth` of the boundary; `edge` picks a
    /// single polygon edge (vertex `edge` to `edge+1`), otherwise all edges.
    BoundaryCluster {
        #[serde(default)]
        edge: Option<usize>,
        depth: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureSpec {
    /// Placement index of the sensor.
    pub sensor: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub coverage_threshold: f64,
    pub resolution: f64,
    pub quiescence_window: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            coverage_threshold: 0.99,
            resolution: 0.25,
            quiescence_window: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub aoi: Vec<[f64; 2]>,
    pub n_sensors: usize,
    #[serde(default = "defaults::r_s")]
    pub r_s: f64,
    #[serde(default = "defaults::r_tx")]
    pub r_tx: f64,
    #[serde(default = "defaults::speed")]
    pub speed: f64,
    #[serde(default = "defaults::distribution")]
    pub distribution: Distribution,
    #[serde(default)]
    pub medium: MediumModel,
    #[serde(default)]
    pub energy: EnergyModel,
    #[serde(default)]
    pub failures: Vec<FailureSpec>,
    #[serde(default = "defaults::seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "defaults::max_time")]
    pub max_time: f64,
    #[serde(default = "defaults::snapshot_interval")]
    pub snapshot_interval: f64,
    /// Defaults to `r_tx / speed`.
    #[serde(default)]
    pub starter_window: Option<f64>,
    /// Defaults to one more than the AoI diameter in tile spacings.
    #[serde(default)]
    pub max_hop: Option<u32>,
    #[serde(default = "defaults::subst_hysteresis")]
    pub subst_hysteresis: f64,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

mod defaults {
    use super::Distribution;

    pub fn r_s() -> f64 {
        5.0
    }
    pub fn r_tx() -> f64 {
        11.0
    }
    pub fn speed() -> f64 {
        1.0
    }
    pub fn distribution() -> Distribution {
        Distribution::UniformRandom
    }
    pub fn seeds() -> Vec<u64> {
        vec![1]
    }
    pub fn max_time() -> f64 {
        20_000.0
    }
    pub fn snapshot_interval() -> f64 {
        5.0
    }
    pub fn subst_hysteresis() -> f64 {
        0.05
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{s}: {}", self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: Box<toml::de::Error>,
    },
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown preset `{0}` (expected one of: random80, boundary80, center80, narrows)")]
    UnknownPreset(String),
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlacementError {
    #[error("distribution region does not intersect the AoI")]
    EmptyRegion,
}

fn square80() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [80.0, 0.0], [80.0, 80.0], [0.0, 80.0]]
}

/// Two 40×40 squares joined by an 8 m wide, 20 m long corridor.
pub fn narrows_outline() -> Vec<[f64; 2]> {
    vec![
        [0.0, 0.0],
        [40.0, 0.0],
        [40.0, 16.0],
        [60.0, 16.0],
        [60.0, 0.0],
        [100.0, 0.0],
        [100.0, 40.0],
        [60.0, 40.0],
        [60.0, 24.0],
        [40.0, 24.0],
        [40.0, 40.0],
        [0.0, 40.0],
    ]
}

impl ScenarioConfig {
    pub fn new(aoi: Vec<[f64; 2]>, n_sensors: usize, distribution: Distribution) -> Self {
        Self {
            aoi,
            n_sensors,
            r_s: defaults::r_s(),
            r_tx: defaults::r_tx(),
            speed: defaults::speed(),
            distribution,
            medium: MediumModel::default(),
            energy: EnergyModel::default(),
            failures: Vec::new(),
            seeds: defaults::seeds(),
            max_time: defaults::max_time(),
            snapshot_interval: defaults::snapshot_interval(),
            starter_window: None,
            max_hop: None,
            subst_hysteresis: defaults::subst_hysteresis(),
            metrics: MetricsConfig::default(),
        }
    }

    pub fn preset(name: &str, n_sensors: usize) -> Result<Self, ConfigError> {
        let cfg = match name {
            "random80" => Self::new(square80(), n_sensors, Distribution::UniformRandom),
            "boundary80" => Self::new(
                square80(),
                n_sensors,
                Distribution::BoundaryCluster {
                    edge: None,
                    depth: 5.0,
                },
            ),
            "center80" => Self::new(
                square80(),
                n_sensors,
                Distribution::Cluster {
                    center: [40.0, 40.0],
                    radius: 5.0,
                },
            ),
            "narrows" => Self::new(
                narrows_outline(),
                n_sensors,
                Distribution::Cluster {
                    center: [20.0, 20.0],
                    radius: 5.0,
                },
            ),
            other => return Err(ConfigError::UnknownPreset(other.to_string())),
        };
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str, path: &str) -> Result<(Self, Vec<Diagnostic>), ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            source: Box::new(e),
        })?;
        let diags = cfg.validate();
        if diags.iter().any(|d| d.severity == Severity::Error) {
            return Err(ConfigError::Invalid(diags));
        }
        Ok((cfg, diags))
    }

    pub fn polygon(&self) -> Result<Polygon, GeometryError> {
        Polygon::new(self.aoi.iter().map(|&[x, y]| Point::new(x, y)).collect())
    }

    /// All problems found, errors and warnings alike.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        let mut err = |m: String| {
            d.push(Diagnostic {
                severity: Severity::Error,
                message: m,
            })
        };
        if let Err(e) = self.polygon() {
            err(format!("aoi: {e}"));
        }
        if self.n_sensors == 0 {
            err("n_sensors must be at least 1".into());
        }
        for (name, v) in [
            ("r_s", self.r_s),
            ("r_tx", self.r_tx),
            ("speed", self.speed),
        ] {
            if !(v.is_finite() && v > 0.0) {
                err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.max_time.is_finite() && self.max_time >= 0.0) {
            err(format!(
                "max_time must be non-negative, got {}",
                self.max_time
            ));
        }
        if !(self.snapshot_interval > 0.0) {
            err("snapshot_interval must be positive".into());
        }
        if !(0.0..1.0).contains(&self.medium.loss) {
            err(format!(
                "medium.loss must be in [0,1), got {}",
                self.medium.loss
            ));
        }
        if self.medium.base_latency < 0.0 || self.medium.jitter < 0.0 {
            err("medium latencies must be non-negative".into());
        }
        if self.metrics.resolution <= 0.0 {
            err("metrics.resolution must be positive".into());
        }
        if self.metrics.quiescence_window <= 0.0 {
            err("metrics.quiescence_window must be positive".into());
        }
        for f in &self.failures {
            if f.sensor >= self.n_sensors {
                err(format!(
                    "failure references sensor {} but only {} sensors exist",
                    f.sensor, self.n_sensors
                ));
            }
            if f.time < 0.0 {
                err(format!("failure time {} is negative", f.time));
            }
        }
        match &self.distribution {
            Distribution::Cluster { radius, .. } if *radius <= 0.0 => {
                err("cluster radius must be positive".into())
            }
            Distribution::BoundaryCluster { depth, .. } if *depth <= 0.0 => {
                err("boundary depth must be positive".into())
            }
            Distribution::BoundaryCluster { edge: Some(e), .. } if *e >= self.aoi.len() => {
                err(format!("boundary edge {e} out of range"))
            }
            _ => {}
        }
        if self.seeds.is_empty() {
            err("seeds must not be empty".into());
        }
        let need = 3f64.sqrt() * self.r_s;
        if self.r_tx < need {
            d.push(Diagnostic {
                severity: Severity::Warning,
                message: format!(
                    "r_tx = {} is below sqrt(3)*r_s = {:.2}; adjacent snapped sensors may not hear each other",
                    self.r_tx, need
                ),
            });
        }
        d
    }

    /// Hop bound for hole triggers: enough to reach across the AoI.
    pub fn derived_max_hop(&self) -> u32 {
        if let Some(h) = self.max_hop {
            return h;
        }
        let Ok(poly) = self.polygon() else {
            return 8;
        };
        let (lo, hi) = poly.bbox();
        let diam = lo.dist(hi);
        (diam / (3f64.sqrt() * self.r_s)).ceil() as u32 + 1
    }

    pub fn params(&self) -> ProtocolParams {
        let mut p = ProtocolParams::new(self.r_s, self.r_tx, self.speed, self.medium.t_msg());
        p.energy = self.energy;
        p.subst_hysteresis = self.subst_hysteresis;
        p.max_hop = self.derived_max_hop();
        p
    }

    pub fn setup(&self, seed: u64) -> Result<SimSetup, PlacementError> {
        let aoi = self.polygon().expect("validated config");
        let sensors = generate_initial(self, seed)?;
        let failures = self
            .failures
            .iter()
            .map(|f| FailureAt {
                id: ID_BASE + f.sensor as SensorId,
                time: f.time,
            })
            .collect();
        Ok(SimSetup {
            params: self.params(),
            aoi,
            medium: self.medium,
            sensors,
            failures,
            max_time: self.max_time,
            snapshot_interval: self.snapshot_interval,
            starter_window: self.starter_window.unwrap_or(self.r_tx / self.speed),
            starters: None,
        })
    }
}

pub fn load_config(
    path: impl AsRef<Path>,
) -> Result<(ScenarioConfig, Vec<Diagnostic>), ConfigError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: shown.clone(),
        source,
    })?;
    ScenarioConfig::from_toml_str(&text, &shown)
}

const MAX_ATTEMPTS: usize = 1_000_000;

/// Initial positions per the configured distribution, inside the AoI.
pub fn generate_initial(
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<Vec<InitialSensor>, PlacementError> {
    let aoi = cfg.polygon().expect("validated config");
    let mut rng = engine::substream(seed, engine::streams::PLACEMENT);
    let (lo, hi) = aoi.bbox();
    let mut out = Vec::with_capacity(cfg.n_sensors);
    for i in 0..cfg.n_sensors {
        let mut placed = None;
        for _ in 0..MAX_ATTEMPTS {
            let p = match &cfg.distribution {
                Distribution::UniformRandom => {
                    Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y))
                }
                Distribution::Cluster { center, radius } => {
                    let r = radius * rng.gen::<f64>().sqrt();
                    let a = rng.gen_range(0.0..2.0 * PI);
                    Point::new(center[0], center[1]) + Point::from_polar(r, a)
                }
                Distribution::BoundaryCluster { .. } => {
                    Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y))
                }
            };
            if !aoi.contains(p) {
                continue;
            }
            if let Distribution::BoundaryCluster { edge, depth } = &cfg.distribution {
                let d = match edge {
                    None => aoi.boundary_distance(p),
                    Some(e) => {
                        let v = aoi.vertices();
                        segment_distance(p, v[*e], v[(*e + 1) % v.len()])
                    }
                };
                if d > *depth {
                    continue;
                }
            }
            placed = Some(p);
            break;
        }
        let position = placed.ok_or(PlacementError::EmptyRegion)?;
        out.push(InitialSensor {
            id: ID_BASE + i as SensorId,
            position,
            energy: cfg.energy.initial,
        });
    }
    Ok(out)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab.scale(t))
}

/// Place sensors and simulate.
pub fn run(cfg: &ScenarioConfig, seed: u64) -> Result<Trace, PlacementError> {
    Ok(engine::simulate(&cfg.setup(seed)?, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_paper_defaults() {
        let (cfg, diags) = ScenarioConfig::from_toml_str(
            "n_sensors = 10\naoi = [[0,0],[80,0],[80,80],[0,80]]\n",
            "t.toml",
        )
        .unwrap();
        assert!(diags.is_empty());
        assert_eq!((cfg.r_s, cfg.r_tx, cfg.speed), (5.0, 11.0, 1.0));
    }

    #[test]
    fn short_radio_range_warns() {
        let (_, diags) = ScenarioConfig::from_toml_str(
            "n_sensors = 10\nr_tx = 8\naoi = [[0,0],[80,0],[80,80],[0,80]]\n",
            "t.toml",
        )
        .unwrap();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
        assert!(diags[0].message.contains("8.66"));
    }

    #[test]
    fn two_vertex_polygon_rejected() {
        let e = ScenarioConfig::from_toml_str("n_sensors = 10\naoi = [[0,0],[80,0]]\n", "t.toml");
        assert!(matches!(e, Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn unknown_key_rejected() {
        let e = ScenarioConfig::from_toml_str(
            "n_sensors = 10\nbogus = 1\naoi = [[0,0],[80,0],[80,80],[0,80]]\n",
            "t.toml",
        );
        let msg = e.unwrap_err().to_string();
        assert!(msg.contains("bogus"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn cluster_placement_within_radius() {
        let cfg = ScenarioConfig::preset("center80", 300).unwrap();
        let s = generate_initial(&cfg, 5).unwrap();
        assert_eq!(s.len(), 300);
        let c = Point::new(40.0, 40.0);
        assert!(s.iter().all(|x| x.position.dist(c) <= 5.0));
    }

    #[test]
    fn uniform_placement_inside_square() {
        let cfg = ScenarioConfig::preset("random80", 200).unwrap();
        let aoi = cfg.polygon().unwrap();
        let s = generate_initial(&cfg, 5).unwrap();
        assert!(s.iter().all(|x| aoi.contains(x.position)));
    }

    #[test]
    fn narrows_cluster_in_one_square() {
        let cfg = ScenarioConfig::preset("narrows", 150).unwrap();
        let s = generate_initial(&cfg, 2).unwrap();
        assert!(s.iter().all(|x| x.position.x < 40.0));
        let aoi = cfg.polygon().unwrap();
        assert!(aoi.contains(Point::new(50.0, 20.0)));
        assert!(!aoi.contains(Point::new(50.0, 30.0)));
    }

    #[test]
    fn boundary_band() {
        let cfg = ScenarioConfig::preset("boundary80", 200).unwrap();
        let aoi = cfg.polygon().unwrap();
        let s = generate_initial(&cfg, 3).unwrap();
        assert!(s.iter().all(|x| aoi.boundary_distance(x.position) <= 5.0));
    }

    #[test]
    fn cluster_outside_aoi_is_error() {
        let mut cfg = ScenarioConfig::preset("random80", 3).unwrap();
        cfg.distribution = Distribution::Cluster {
            center: [500.0, 500.0],
            radius: 1.0,
        };
        assert_eq!(generate_initial(&cfg, 1), Err(PlacementError::EmptyRegion));
    }

    #[test]
    fn placement_is_deterministic() {
        let cfg = ScenarioConfig::preset("random80", 50).unwrap();
        assert_eq!(
            generate_initial(&cfg, 9).unwrap(),
            generate_initial(&cfg, 9).unwrap()
        );
        assert_ne!(
            generate_initial(&cfg, 9).unwrap(),
            generate_initial(&cfg, 10).unwrap()
        );
    }

    #[test]
    fn max_hop_spans_the_square() {
        let cfg = ScenarioConfig::preset("center80", 10).unwrap();
        // diagonal 113.1 m over 8.66 m spacing
        assert_eq!(cfg.derived_max_hop(), 15);
    }
}
