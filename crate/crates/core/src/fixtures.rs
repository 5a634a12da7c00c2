//! Seeded random instances for tests and benchmarks.

use crate::crf::{CrfParams, LabelSet};
use crate::maxflow::FlowNetwork;
use crate::metrics::LabelMap;
use crate::mvfield::{Motion, MotionField};
use crate::synth::NoiseSource;

/// Field of independent vectors with magnitude uniform in [0, max_mag) and
/// uniform orientation.
pub fn random_field(width: usize, height: usize, max_mag: f64, seed: u64) -> MotionField {
    let mut rng = NoiseSource::new(seed);
    let mv = (0..width * height)
        .map(|_| {
            let m = max_mag * rng.uniform();
            let t = std::f64::consts::TAU * rng.uniform();
            Motion::new(m * t.cos(), m * t.sin())
        })
        .collect();
    MotionField::new(width, height, mv).expect("positive dimensions")
}

/// A small CRF instance: random field around the motion threshold, `k`
/// distinct orientations and random weights.
pub fn random_problem(
    width: usize,
    height: usize,
    k: usize,
    seed: u64,
) -> (MotionField, LabelSet, CrfParams) {
    let mut rng = NoiseSource::new(seed ^ 0x9e37_79b9_7f4a_7c15);
    let field = random_field(width, height, 3.0, seed);
    let mut orientations: Vec<f64> = Vec::with_capacity(k);
    while orientations.len() < k {
        // 1 degree grid keeps orientations distinct and exactly representable
        let t = (rng.uniform() * 360.0).floor() - 179.0;
        if !orientations.contains(&t) {
            orientations.push(t);
        }
    }
    let params = CrfParams {
        tau: 1.0,
        c1: 10.0 + 90.0 * rng.uniform(),
        c2: 10.0 + 90.0 * rng.uniform(),
        c3: 0.5 * rng.uniform(),
    };
    (
        field,
        LabelSet::new(orientations).expect("distinct"),
        params,
    )
}

/// Network with `inner` non-terminal nodes (source 0, sink `inner + 1`);
/// each ordered pair gets an arc with probability `density`, capacity
/// uniform in [0, 10).
pub fn random_network(inner: usize, density: f64, seed: u64) -> FlowNetwork {
    let mut rng = NoiseSource::new(seed);
    let n = inner + 2;
    let (s, t) = (0, n - 1);
    let mut net = FlowNetwork::new(n, s, t);
    for u in 0..n {
        for v in 0..n {
            if u == v || v == s || u == t {
                continue;
            }
            if rng.uniform() < density {
                net.add_edge(u, v, 10.0 * rng.uniform(), 0.0);
            }
        }
    }
    net
}

/// Label map with independent labels in `0..=max_label`.
pub fn random_label_map(width: usize, height: usize, max_label: u32, seed: u64) -> LabelMap {
    let mut rng = NoiseSource::new(seed);
    let labels = (0..width * height)
        .map(|_| (rng.uniform() * (max_label + 1) as f64) as u32)
        .collect();
    LabelMap::new(width, height, labels).expect("dimensions match")
}
