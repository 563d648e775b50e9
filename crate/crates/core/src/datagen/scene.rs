//! Resolution-independent street-scene geometry.
//!
//! Coordinates are normalized: `u` runs left→right and `v` top→bottom, both
//! in `[0, 1]`. The road is a triangle from a vanishing point on the horizon
//! to two bottom corners; sidewalks flank it; everything else is background.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const NUM_CLASSES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum SegClass {
    Background = 0,
    Road = 1,
    Sidewalk = 2,
    Vehicle = 3,
    Pedestrian = 4,
    Cyclist = 5,
}

impl SegClass {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        use SegClass::*;
        [Background, Road, Sidewalk, Vehicle, Pedestrian, Cyclist]
            .get(id as usize)
            .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadGeometry {
    pub horizon: f64,
    pub vanish_u: f64,
    pub bottom_center: f64,
    pub bottom_half_width: f64,
    /// Sidewalk width at the bottom edge, each side.
    pub sidewalk_width: f64,
}

impl RoadGeometry {
    /// Depth parameter: 0 on the horizon, 1 at the bottom edge.
    pub fn depth(&self, v: f64) -> f64 {
        (v - self.horizon) / (1.0 - self.horizon)
    }

    fn edge(&self, v: f64, bottom_u: f64) -> f64 {
        self.vanish_u + self.depth(v) * (bottom_u - self.vanish_u)
    }

    /// Horizontal extent of the road on row `v`, if the row is below the horizon.
    pub fn road_span(&self, v: f64) -> Option<(f64, f64)> {
        (v > self.horizon).then(|| {
            (
                self.edge(v, self.bottom_center - self.bottom_half_width),
                self.edge(v, self.bottom_center + self.bottom_half_width),
            )
        })
    }

    /// Outer sidewalk edges on row `v`.
    pub fn sidewalk_span(&self, v: f64) -> Option<(f64, f64)> {
        let outer = self.bottom_half_width + self.sidewalk_width;
        (v > self.horizon).then(|| {
            (
                self.edge(v, self.bottom_center - outer),
                self.edge(v, self.bottom_center + outer),
            )
        })
    }

    pub fn class_at(&self, u: f64, v: f64) -> SegClass {
        match (self.road_span(v), self.sidewalk_span(v)) {
            (Some((l, r)), _) if u >= l && u < r => SegClass::Road,
            (_, Some((l, r))) if u >= l && u < r => SegClass::Sidewalk,
            _ => SegClass::Background,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentKind {
    Vehicle,
    Pedestrian,
    Cyclist,
}

impl AgentKind {
    pub fn class(self) -> SegClass {
        match self {
            AgentKind::Vehicle => SegClass::Vehicle,
            AgentKind::Pedestrian => SegClass::Pedestrian,
            AgentKind::Cyclist => SegClass::Cyclist,
        }
    }

    /// Pedestrians and cyclists can trigger a warning.
    pub fn is_vulnerable(self) -> bool {
        !matches!(self, AgentKind::Vehicle)
    }
}

/// An axis-aligned agent box plus appearance parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub kind: AgentKind,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    /// Main color (shirt or car body).
    pub color: [f64; 3],
    /// Secondary color (trousers, skin, windows).
    pub accent: [f64; 3],
    /// Pose in `[-1, 1]` (stride or lean).
    pub pose: f64,
    pub facing_left: bool,
}

impl Agent {
    /// Ground-contact segment: `(x0, x1)` on row `y1`.
    pub fn footprint(&self) -> (f64, f64, f64) {
        (self.x0, self.x1, self.y1)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x0 && u < self.x1 && v >= self.y0 && v < self.y1
    }

    fn overlaps(&self, other: &Agent, pad: f64) -> bool {
        self.x0 < other.x1 + pad
            && other.x0 < self.x1 + pad
            && self.y0 < other.y1 + pad
            && other.y0 < self.y1 + pad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub sky: [f64; 3],
    pub road: [f64; 3],
    pub sidewalk: [f64; 3],
    pub ground: [f64; 3],
    /// Skyline buildings as `(u0, u1, top_v, color)`.
    pub buildings: Vec<(f64, f64, f64, [f64; 3])>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub road: RoadGeometry,
    /// Agents in drawing order (far to near).
    pub agents: Vec<Agent>,
    pub palette: Palette,
    pub noise_amplitude: f64,
    pub noise_seed: u64,
}

impl Scene {
    /// Warning iff some pedestrian or cyclist footprint meets the road.
    pub fn warning(&self) -> u8 {
        self.agents
            .iter()
            .filter(|a| a.kind.is_vulnerable())
            .any(|a| footprint_on_road(&self.road, a))
            .into()
    }

    /// Per-pixel class, agents painted over the ground layout.
    pub fn class_at(&self, u: f64, v: f64) -> SegClass {
        for a in self.agents.iter().rev() {
            if a.contains(u, v) && super::render::agent_covers(a, u, v) {
                return a.kind.class();
            }
        }
        self.road.class_at(u, v)
    }
}

pub fn footprint_on_road(road: &RoadGeometry, agent: &Agent) -> bool {
    let (x0, x1, v) = agent.footprint();
    match road.road_span(v) {
        Some((l, r)) => x0 < r && x1 > l,
        None => false,
    }
}

/// Distribution parameters of the scene generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub horizon: (f64, f64),
    pub vanish_offset: f64,
    pub center_offset: f64,
    pub half_width: (f64, f64),
    pub sidewalk_width: (f64, f64),
    /// Agent height relative to its depth below the horizon.
    pub person_scale: (f64, f64),
    /// Depth range for pedestrians and cyclists.
    pub person_depth: (f64, f64),
    pub max_vehicles: usize,
    pub max_people: usize,
    /// Probability that a safe scene has no pedestrian or cyclist at all.
    pub empty_fraction: f64,
    pub cyclist_fraction: f64,
    /// Clearance between a footprint and the road edge, keeping labels
    /// unambiguous.
    pub edge_margin: f64,
    pub noise_amplitude: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            horizon: (0.30, 0.40),
            vanish_offset: 0.15,
            center_offset: 0.15,
            half_width: (0.22, 0.38),
            sidewalk_width: (0.15, 0.30),
            person_scale: (0.85, 1.05),
            person_depth: (0.40, 0.82),
            max_vehicles: 2,
            max_people: 3,
            empty_fraction: 0.15,
            cyclist_fraction: 0.25,
            edge_margin: 0.02,
            noise_amplitude: 0.03,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64, max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && min <= lo && lo <= hi && hi <= max) {
        return Err(Error::Config(format!(
            "scene parameter {name} = ({lo}, {hi}) must satisfy {min} <= lo <= hi <= {max}"
        )));
    }
    Ok(())
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        check_range("horizon", self.horizon, 0.1, 0.6)?;
        check_range("half_width", self.half_width, 0.05, 0.5)?;
        check_range("sidewalk_width", self.sidewalk_width, 0.02, 0.5)?;
        check_range("person_scale", self.person_scale, 0.2, 1.2)?;
        check_range("person_depth", self.person_depth, 0.1, 0.95)?;
        check_range("vanish_offset", (0.0, self.vanish_offset), 0.0, 0.3)?;
        check_range("center_offset", (0.0, self.center_offset), 0.0, 0.3)?;
        check_range("empty_fraction", (0.0, self.empty_fraction), 0.0, 1.0)?;
        check_range("cyclist_fraction", (0.0, self.cyclist_fraction), 0.0, 1.0)?;
        check_range("edge_margin", (0.0, self.edge_margin), 0.0, 0.2)?;
        check_range("noise_amplitude", (0.0, self.noise_amplitude), 0.0, 0.5)?;
        if self.max_people == 0 {
            return Err(Error::Config("max_people must be at least 1".into()));
        }
        // the nearest, tallest person must fit between the top edge and the feet
        let (hz_lo, _) = self.horizon;
        let worst_top = hz_lo + self.person_depth.1 * (1.0 - hz_lo - self.person_scale.1);
        if worst_top < 0.0 {
            return Err(Error::Config(format!(
                "people up to scale {} at depth {} leave the image top",
                self.person_scale.1, self.person_depth.1
            )));
        }
        if self.edge_margin >= self.half_width.0 {
            return Err(Error::Config("edge_margin leaves no room on the road".into()));
        }
        Ok(())
    }
}

const MAX_ATTEMPTS: usize = 200;

fn jitter_color(rng: &mut Rng, base: [f64; 3], amount: f64) -> [f64; 3] {
    base.map(|c| (c + rng.range(-amount, amount)).clamp(0.0, 1.0))
}

fn random_color(rng: &mut Rng) -> [f64; 3] {
    [rng.uniform(), rng.uniform(), rng.uniform()]
}

fn sample_palette(rng: &mut Rng, horizon: f64) -> Palette {
    let road_tone = rng.range(0.22, 0.38);
    let walk_tone = rng.range(0.55, 0.72);
    let mut buildings = Vec::new();
    let mut u = -rng.range(0.0, 0.1);
    while u < 1.0 {
        let w = rng.range(0.06, 0.2);
        let top = horizon - rng.range(0.05, horizon - 0.02);
        let tone = rng.range(0.3, 0.7);
        let color = jitter_color(rng, [tone + 0.08, tone, tone - 0.06], 0.06);
        buildings.push((u, u + w, top, color));
        u += w;
    }
    Palette {
        sky: jitter_color(rng, [0.62, 0.74, 0.92], 0.05),
        road: jitter_color(rng, [road_tone, road_tone, road_tone + 0.02], 0.02),
        sidewalk: jitter_color(rng, [walk_tone, walk_tone - 0.02, walk_tone - 0.05], 0.03),
        ground: jitter_color(rng, [0.35, 0.45, 0.28], 0.08),
        buildings,
    }
}

struct Placer<'a> {
    params: &'a SceneParams,
    road: RoadGeometry,
    agents: Vec<Agent>,
}

impl Placer<'_> {
    fn person(&self, rng: &mut Rng, kind: AgentKind, on_road: bool) -> Option<Agent> {
        let p = self.params;
        let depth = rng.range(p.person_depth.0, p.person_depth.1);
        let v = self.road.horizon + depth * (1.0 - self.road.horizon);
        let height = rng.range(p.person_scale.0, p.person_scale.1) * depth;
        // width in u units; the image is twice as wide as it is tall
        let aspect = match kind {
            AgentKind::Cyclist => rng.range(0.36, 0.44),
            _ => rng.range(0.18, 0.22),
        };
        let width = height * aspect;
        let (l, r) = self.road.road_span(v)?;
        let m = p.edge_margin;
        let x0 = if on_road {
            // footprint center strictly inside the road
            let lo = (l + m).max(width / 2.0);
            let hi = (r - m).min(1.0 - width / 2.0);
            if lo >= hi {
                return None;
            }
            rng.range(lo, hi) - width / 2.0
        } else {
            let (sl, sr) = self.road.sidewalk_span(v)?;
            let left = rng.bernoulli(0.5);
            // mostly on the sidewalk, close to the curb
            let (lo, hi) = if left {
                ((sl - 0.3 * width).max(0.0), l - m - width)
            } else {
                (r + m, (sr - 0.7 * width).min(1.0 - width))
            };
            if lo >= hi {
                return None;
            }
            rng.range(lo, hi)
        };
        let agent = Agent {
            kind,
            x0,
            y0: v - height,
            x1: x0 + width,
            y1: v,
            color: random_color(rng),
            accent: match kind {
                AgentKind::Cyclist => jitter_color(rng, [0.15, 0.15, 0.18], 0.1),
                _ => jitter_color(rng, [0.2, 0.2, 0.3], 0.15),
            },
            pose: rng.range(-1.0, 1.0),
            facing_left: rng.bernoulli(0.5),
        };
        (agent.y0 >= 0.0 && footprint_on_road(&self.road, &agent) == on_road).then_some(agent)
    }

    fn vehicle(&self, rng: &mut Rng) -> Option<Agent> {
        let depth = rng.range(0.15, 0.7);
        let v = self.road.horizon + depth * (1.0 - self.road.horizon);
        let height = rng.range(0.45, 0.6) * depth;
        let width = height * rng.range(0.65, 0.8);
        let (l, r) = self.road.road_span(v)?;
        if r - l <= width {
            return None;
        }
        let x0 = rng.range(l, r - width);
        Some(Agent {
            kind: AgentKind::Vehicle,
            x0,
            y0: v - height,
            x1: x0 + width,
            y1: v,
            color: random_color(rng),
            accent: jitter_color(rng, [0.15, 0.2, 0.25], 0.05),
            pose: 0.0,
            facing_left: false,
        })
        .filter(|a| a.x0 >= 0.0 && a.x1 <= 1.0 && a.y0 >= 0.0)
    }

    fn try_add(&mut self, rng: &mut Rng, make: impl Fn(&Self, &mut Rng) -> Option<Agent>) -> bool {
        for _ in 0..MAX_ATTEMPTS {
            if let Some(a) = make(self, rng) {
                if self.agents.iter().all(|o| !a.overlaps(o, 0.01)) {
                    self.agents.push(a);
                    return true;
                }
            }
        }
        false
    }
}

/// Samples one scene whose warning label equals `warning`.
pub fn sample_scene(params: &SceneParams, warning: bool, rng: &mut Rng) -> Result<Scene> {
    for _ in 0..MAX_ATTEMPTS {
        let horizon = rng.range(params.horizon.0, params.horizon.1);
        let road = RoadGeometry {
            horizon,
            vanish_u: 0.5 + rng.range(-params.vanish_offset, params.vanish_offset),
            bottom_center: 0.5 + rng.range(-params.center_offset, params.center_offset),
            bottom_half_width: rng.range(params.half_width.0, params.half_width.1),
            sidewalk_width: rng.range(params.sidewalk_width.0, params.sidewalk_width.1),
        };
        let palette = sample_palette(rng, horizon);
        let mut placer = Placer {
            params,
            road,
            agents: Vec::new(),
        };

        let n_people = if warning {
            1 + rng.below(params.max_people)
        } else if rng.bernoulli(params.empty_fraction) {
            0
        } else {
            1 + rng.below(params.max_people)
        };
        let mut ok = true;
        for k in 0..n_people {
            let kind = if rng.bernoulli(params.cyclist_fraction) {
                AgentKind::Cyclist
            } else {
                AgentKind::Pedestrian
            };
            let on_road = warning && (k == 0 || rng.bernoulli(0.3));
            ok &= placer.try_add(rng, |p, r| p.person(r, kind, on_road));
        }
        if !ok {
            continue;
        }
        let n_vehicles = rng.below(params.max_vehicles + 1);
        for _ in 0..n_vehicles {
            // a crowded road may have no room; fewer vehicles is fine
            placer.try_add(rng, |p, r| p.vehicle(r));
        }
        let mut agents = placer.agents;
        agents.sort_by(|a, b| a.y1.total_cmp(&b.y1));
        let scene = Scene {
            road,
            agents,
            palette,
            noise_amplitude: params.noise_amplitude,
            noise_seed: rng.next_u64(),
        };
        debug_assert_eq!(scene.warning() == 1, warning);
        return Ok(scene);
    }
    Err(Error::Config(format!(
        "could not place agents for a {} scene after {MAX_ATTEMPTS} layouts; geometry is infeasible",
        if warning { "warning" } else { "safe" }
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_request() {
        let p = SceneParams::default();
        let mut rng = Rng::new(4);
        for i in 0..200 {
            let want = i % 3 == 0;
            let s = sample_scene(&p, want, &mut rng).unwrap();
            assert_eq!(s.warning(), want as u8);
            for a in &s.agents {
                assert!(a.x0 >= 0.0 && a.x1 <= 1.0 && a.y0 >= 0.0 && a.y1 <= 1.0, "{a:?}");
            }
        }
    }

    #[test]
    fn both_sidewalk_and_road_pedestrians_occur() {
        let p = SceneParams::default();
        let mut rng = Rng::new(9);
        let (mut on, mut off) = (0, 0);
        for i in 0..100 {
            let s = sample_scene(&p, i % 2 == 0, &mut rng).unwrap();
            for a in s.agents.iter().filter(|a| a.kind == AgentKind::Pedestrian) {
                if footprint_on_road(&s.road, a) {
                    on += 1;
                } else {
                    off += 1;
                }
            }
        }
        assert!(on > 10 && off > 10, "on {on} off {off}");
    }

    #[test]
    fn infeasible_params_are_config_errors() {
        let p = SceneParams {
            horizon: (0.5, 0.4),
            ..Default::default()
        };
        assert!(matches!(p.validate(), Err(Error::Config(_))));
        let p = SceneParams {
            person_scale: (1.1, 1.2),
            person_depth: (0.9, 0.95),
            horizon: (0.1, 0.1),
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(SceneParams::default().validate().is_ok());
    }

    #[test]
    fn road_layout_classes() {
        let road = RoadGeometry {
            horizon: 0.4,
            vanish_u: 0.5,
            bottom_center: 0.5,
            bottom_half_width: 0.3,
            sidewalk_width: 0.1,
        };
        assert_eq!(road.class_at(0.5, 0.2), SegClass::Background);
        assert_eq!(road.class_at(0.5, 0.99), SegClass::Road);
        assert_eq!(road.class_at(0.15, 0.99), SegClass::Sidewalk);
        assert_eq!(road.class_at(0.02, 0.99), SegClass::Background);
        let (l, r) = road.road_span(1.0).unwrap();
        assert!((l - 0.2).abs() < 1e-12 && (r - 0.8).abs() < 1e-12);
    }
}
