//! Rasterization of [`Scene`]s at any resolution.

use super::scene::{Agent, AgentKind, Scene, SegClass};
use crate::rng::Rng;
use crate::tensor::Tensor;

const SKIN: [f64; 3] = [0.80, 0.62, 0.50];
const TIRE: [f64; 3] = [0.06, 0.06, 0.07];
const LAMP: [f64; 3] = [0.95, 0.85, 0.45];
const MARKING: [f64; 3] = [0.88, 0.88, 0.82];

fn in_box(a: f64, b: f64, a0: f64, a1: f64, b0: f64, b1: f64) -> bool {
    a >= a0 && a < a1 && b >= b0 && b < b1
}

fn ellipse(a: f64, b: f64, ca: f64, cb: f64, ra: f64, rb: f64) -> f64 {
    ((a - ca) / ra).powi(2) + ((b - cb) / rb).powi(2)
}

fn pedestrian(agent: &Agent, a: f64, b: f64) -> Option<[f64; 3]> {
    if ellipse(a, b, 0.5, 0.075, 0.16, 0.075) <= 1.0 {
        return Some(SKIN);
    }
    if in_box(a, b, 0.22, 0.78, 0.15, 0.56) {
        return Some(agent.color);
    }
    let arm_len = 0.50 + 0.05 * agent.pose.abs();
    if in_box(a, b, 0.08, 0.22, 0.17, arm_len) || in_box(a, b, 0.78, 0.92, 0.17, arm_len) {
        return Some(agent.color.map(|c| c * 0.85));
    }
    if b >= 0.56 && b < 1.0 {
        let t = (b - 0.56) / 0.44;
        let d = 0.12 * agent.pose * t;
        if in_box(a, b, 0.25 - d, 0.47 - d, 0.56, 1.0) || in_box(a, b, 0.53 + d, 0.75 + d, 0.56, 1.0) {
            return Some(agent.accent);
        }
    }
    None
}

fn cyclist(agent: &Agent, a: f64, b: f64) -> Option<[f64; 3]> {
    let a = if agent.facing_left { 1.0 - a } else { a };
    for ca in [0.2, 0.8] {
        let d = ellipse(a, b, ca, 0.8, 0.225, 0.18);
        if (0.55..=1.0).contains(&d) || d < 0.08 {
            return Some(TIRE);
        }
    }
    if ellipse(a, b, 0.56, 0.07, 0.1, 0.07) <= 1.0 {
        return Some(SKIN);
    }
    let frame = agent.color.map(|c| 1.0 - c);
    if in_box(a, b, 0.25, 0.75, 0.6, 0.66) || in_box(a, b, 0.47, 0.53, 0.6, 0.82) {
        return Some(frame);
    }
    if in_box(a, b, 0.38, 0.6, 0.12, 0.5) {
        return Some(agent.color);
    }
    let lean = 0.03 * agent.pose;
    if in_box(a, b, 0.6, 0.8, 0.2 + lean, 0.27 + lean) || in_box(a, b, 0.76, 0.8, 0.27, 0.62) {
        return Some(agent.color.map(|c| c * 0.85));
    }
    if in_box(a, b, 0.42, 0.56, 0.5, 0.8) {
        return Some(agent.accent);
    }
    None
}

fn vehicle(agent: &Agent, a: f64, b: f64) -> Option<[f64; 3]> {
    if in_box(a, b, 0.08, 0.3, 0.8, 1.0) || in_box(a, b, 0.7, 0.92, 0.8, 1.0) {
        return Some(TIRE);
    }
    if in_box(a, b, 0.03, 0.12, 0.5, 0.6) || in_box(a, b, 0.88, 0.97, 0.5, 0.6) {
        return Some(LAMP);
    }
    if in_box(a, b, 0.0, 1.0, 0.4, 0.85) {
        return Some(agent.color);
    }
    if in_box(a, b, 0.18, 0.82, 0.15, 0.38) {
        return Some(agent.accent);
    }
    if in_box(a, b, 0.12, 0.88, 0.1, 0.4) {
        return Some(agent.color);
    }
    None
}

/// Color of the agent at normalized image point `(u, v)`, if it is covered.
pub fn agent_paint(agent: &Agent, u: f64, v: f64) -> Option<[f64; 3]> {
    if !agent.contains(u, v) {
        return None;
    }
    let a = (u - agent.x0) / (agent.x1 - agent.x0);
    let b = (v - agent.y0) / (agent.y1 - agent.y0);
    match agent.kind {
        AgentKind::Pedestrian => pedestrian(agent, a, b),
        AgentKind::Cyclist => cyclist(agent, a, b),
        AgentKind::Vehicle => vehicle(agent, a, b),
    }
}

pub(crate) fn agent_covers(agent: &Agent, u: f64, v: f64) -> bool {
    agent_paint(agent, u, v).is_some()
}

fn ground_color(scene: &Scene, u: f64, v: f64) -> [f64; 3] {
    let road = &scene.road;
    let pal = &scene.palette;
    let base = match road.class_at(u, v) {
        SegClass::Road => {
            let depth = road.depth(v);
            let center = road.vanish_u + depth * (road.bottom_center - road.vanish_u);
            let half = 0.002 + 0.008 * depth;
            if (u - center).abs() < half && (depth.ln() * 6.0).rem_euclid(1.0) < 0.5 {
                MARKING
            } else {
                pal.road
            }
        }
        SegClass::Sidewalk => {
            let (l, r) = road.road_span(v).unwrap_or((0.5, 0.5));
            let curb = 0.004 + 0.01 * road.depth(v);
            if (u - l).abs() < curb || (u - r).abs() < curb {
                pal.sidewalk.map(|c| (c + 0.15).min(1.0))
            } else {
                pal.sidewalk
            }
        }
        _ if v < road.horizon => pal
            .buildings
            .iter()
            .find(|(u0, u1, top, _)| u >= *u0 && u < *u1 && v >= *top)
            .map(|b| b.3)
            .unwrap_or(pal.sky),
        _ => pal.ground,
    };
    let shade = 0.9 + 0.1 * v;
    base.map(|c| c * shade)
}

/// Noise-free color at a normalized point.
pub fn color_at(scene: &Scene, u: f64, v: f64) -> [f64; 3] {
    scene
        .agents
        .iter()
        .rev()
        .find_map(|a| agent_paint(a, u, v))
        .unwrap_or_else(|| ground_color(scene, u, v))
}

/// RGB image `[3, height, width]` in `[0, 1]`, averaged over `supersample²`
/// points per pixel, plus Gaussian texture noise.
pub fn render_image(scene: &Scene, width: usize, height: usize, supersample: usize) -> Tensor {
    let ss = supersample.max(1);
    let plane = width * height;
    let mut data = vec![0.0; 3 * plane];
    let mut noise = Rng::derive(scene.noise_seed, ((width as u64) << 32) | height as u64);
    let inv = 1.0 / (ss * ss) as f64;
    for y in 0..height {
        for x in 0..width {
            let mut acc = [0.0; 3];
            for sy in 0..ss {
                for sx in 0..ss {
                    let u = (x as f64 + (sx as f64 + 0.5) / ss as f64) / width as f64;
                    let v = (y as f64 + (sy as f64 + 0.5) / ss as f64) / height as f64;
                    let c = color_at(scene, u, v);
                    for k in 0..3 {
                        acc[k] += c[k];
                    }
                }
            }
            for (k, a) in acc.iter().enumerate() {
                let n = scene.noise_amplitude * noise.normal();
                data[k * plane + y * width + x] = (a * inv + n).clamp(0.0, 1.0);
            }
        }
    }
    Tensor::new(vec![3, height, width], data).expect("consistent image buffer")
}

/// Class id of every pixel center, row-major.
pub fn render_labels(scene: &Scene, width: usize, height: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let u = (x as f64 + 0.5) / width as f64;
            let v = (y as f64 + 0.5) / height as f64;
            out.push(scene.class_at(u, v).id());
        }
    }
    out
}

/// Luminance (0.299 R + 0.587 G + 0.114 B) of a `[3, H, W]` image.
pub fn to_gray(image: &Tensor) -> Vec<f64> {
    let plane = image.shape()[1] * image.shape()[2];
    let d = image.data();
    (0..plane)
        .map(|i| 0.299 * d[i] + 0.587 * d[plane + i] + 0.114 * d[2 * plane + i])
        .collect()
}
