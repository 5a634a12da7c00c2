//! Synthetic motion fields with known flow ground truth.
//!
//! A scene is a grid with non-overlapping flow primitives (straight lanes and
//! circular rings), optional random background motion, and Gaussian noise on
//! the vector components.
//!
//! Randomness comes from ChaCha8 seeded with the scene seed. Per node, in
//! row-major order, the generator draws exactly three uniforms: one for the
//! background direction and two for a Box-Muller normal pair used as the
//! (dx, dy) noise. The draw sequence does not depend on the scene contents.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::LabelMap;
use crate::mvfield::{Motion, MotionField};

/// Axis-aligned rectangle of uniform motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    /// Degrees.
    pub orientation: f64,
    /// Pixels per frame.
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    /// Counter-clockwise in the (x, y) coordinates of the grid.
    Ccw,
    Cw,
}

/// Annulus of motion tangent to circles around `(cx, cy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ring {
    pub cx: f64,
    pub cy: f64,
    pub inner: f64,
    pub outer: f64,
    pub direction: Rotation,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Lane(Lane),
    Ring(Ring),
}

impl Primitive {
    fn contains(&self, x: usize, y: usize) -> bool {
        match self {
            Primitive::Lane(l) => x >= l.x && x < l.x + l.w && y >= l.y && y < l.y + l.h,
            Primitive::Ring(r) => {
                let d = (x as f64 - r.cx).hypot(y as f64 - r.cy);
                d >= r.inner && d <= r.outer
            }
        }
    }

    fn motion_at(&self, x: usize, y: usize) -> Motion {
        match self {
            Primitive::Lane(l) => {
                let t = l.orientation.to_radians();
                Motion::new(l.magnitude * t.cos(), l.magnitude * t.sin())
            }
            Primitive::Ring(r) => {
                let (rx, ry) = (x as f64 - r.cx, y as f64 - r.cy);
                let d = rx.hypot(ry);
                let (tx, ty) = match r.direction {
                    Rotation::Ccw => (-ry / d, rx / d),
                    Rotation::Cw => (ry / d, -rx / d),
                };
                Motion::new(r.magnitude * tx, r.magnitude * ty)
            }
        }
    }
}

/// A complete synthetic scene description.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub primitives: Vec<Primitive>,
    /// Standard deviation of the per-component noise, pixels/frame.
    pub noise_std: f64,
    /// Magnitude of randomly oriented motion outside the primitives.
    pub background_level: f64,
    pub seed: u64,
}

/// TOML form: scalar keys plus `[[lane]]` and `[[ring]]` tables. Ground-truth
/// IDs follow lanes first, then rings, each in file order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    width: usize,
    height: usize,
    #[serde(default)]
    noise: f64,
    #[serde(default)]
    background: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    lane: Vec<Lane>,
    #[serde(default)]
    ring: Vec<Ring>,
}

impl SceneSpec {
    pub fn new(width: usize, height: usize) -> Self {
        SceneSpec {
            width,
            height,
            primitives: Vec::new(),
            noise_std: 0.0,
            background_level: 0.0,
            seed: 0,
        }
    }

    pub fn with_lane(mut self, lane: Lane) -> Self {
        self.primitives.push(Primitive::Lane(lane));
        self
    }

    pub fn with_ring(mut self, ring: Ring) -> Self {
        self.primitives.push(Primitive::Ring(ring));
        self
    }

    pub fn with_noise(mut self, std: f64) -> Self {
        self.noise_std = std;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SceneFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let primitives = file
            .lane
            .into_iter()
            .map(Primitive::Lane)
            .chain(file.ring.into_iter().map(Primitive::Ring))
            .collect();
        let spec = SceneSpec {
            width: file.width,
            height: file.height,
            primitives,
            noise_std: file.noise,
            background_level: file.background,
            seed: file.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidScene(
                "grid dimensions must be positive".into(),
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidScene(format!(
                "noise std {} must be >= 0",
                self.noise_std
            )));
        }
        if !(self.background_level.is_finite() && self.background_level >= 0.0) {
            return Err(Error::InvalidScene("background level must be >= 0".into()));
        }
        let (w, h) = (self.width as f64, self.height as f64);
        for (i, p) in self.primitives.iter().enumerate() {
            match p {
                Primitive::Lane(l) => {
                    if l.w == 0 || l.h == 0 || l.x + l.w > self.width || l.y + l.h > self.height {
                        return Err(Error::InvalidScene(format!(
                            "lane {i} is empty or out of bounds"
                        )));
                    }
                    if !l.orientation.is_finite()
                        || !(l.magnitude.is_finite() && l.magnitude >= 0.0)
                    {
                        return Err(Error::InvalidScene(format!("lane {i} has bad motion")));
                    }
                }
                Primitive::Ring(r) => {
                    if !(r.inner > 0.0 && r.outer >= r.inner) {
                        return Err(Error::InvalidScene(format!(
                            "ring {i} needs 0 < inner <= outer"
                        )));
                    }
                    if r.cx - r.outer < 0.0
                        || r.cy - r.outer < 0.0
                        || r.cx + r.outer > w - 1.0
                        || r.cy + r.outer > h - 1.0
                    {
                        return Err(Error::InvalidScene(format!("ring {i} leaves the grid")));
                    }
                    if !(r.magnitude.is_finite() && r.magnitude >= 0.0) {
                        return Err(Error::InvalidScene(format!("ring {i} has bad magnitude")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Gaussian pairs by Box-Muller over a ChaCha8 stream.
pub(crate) struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub(crate) fn new(seed: u64) -> Self {
        NoiseSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub(crate) fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub(crate) fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

/// Renders the scene. Ground truth labels primitive `i` as `i + 1`.
pub fn generate(spec: &SceneSpec) -> Result<(MotionField, LabelMap)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut owner: Vec<u32> = vec![0; w * h];
    for y in 0..h {
        for x in 0..w {
            for (i, p) in spec.primitives.iter().enumerate() {
                if p.contains(x, y) {
                    let node = y * w + x;
                    if owner[node] != 0 {
                        return Err(Error::PrimitiveOverlap {
                            first: owner[node] as usize - 1,
                            second: i,
                        });
                    }
                    owner[node] = i as u32 + 1;
                }
            }
        }
    }

    let mut noise = NoiseSource::new(spec.seed);
    let mut mv = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let node = y * w + x;
            let bg_dir = TAU * noise.uniform();
            let (nx, ny) = noise.normal_pair();
            let base = match owner[node] {
                0 => Motion::new(
                    spec.background_level * bg_dir.cos(),
                    spec.background_level * bg_dir.sin(),
                ),
                id => spec.primitives[id as usize - 1].motion_at(x, y),
            };
            mv.push(Motion::new(
                base.dx + spec.noise_std * nx,
                base.dy + spec.noise_std * ny,
            ));
        }
    }
    Ok((MotionField::new(w, h, mv)?, LabelMap::new(w, h, owner)?))
}

/// Two horizontal lanes moving in opposite directions, separated by a
/// background gap. Used by tests and benchmarks.
pub fn two_lane_scene(
    width: usize,
    height: usize,
    magnitude: f64,
    noise: f64,
    seed: u64,
) -> SceneSpec {
    let lane_h = height / 3;
    let gap = (height - 2 * lane_h) / 3;
    SceneSpec::new(width, height)
        .with_lane(Lane {
            x: 0,
            y: gap,
            w: width,
            h: lane_h,
            orientation: 0.0,
            magnitude,
        })
        .with_lane(Lane {
            x: 0,
            y: 2 * gap + lane_h,
            w: width,
            h: lane_h,
            orientation: 180.0,
            magnitude,
        })
        .with_noise(noise)
        .with_seed(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_lane_without_noise_is_uniform() {
        let spec = SceneSpec::new(5, 4).with_lane(Lane {
            x: 0,
            y: 0,
            w: 5,
            h: 4,
            orientation: 0.0,
            magnitude: 4.0,
        });
        let (field, gt) = generate(&spec).unwrap();
        assert!(field.vectors().iter().all(|m| *m == Motion::new(4.0, 0.0)));
        assert!(gt.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn empty_scene_is_still_background() {
        let (field, gt) = generate(&SceneSpec::new(3, 3)).unwrap();
        assert!(field.vectors().iter().all(|m| *m == Motion::ZERO));
        assert!(gt.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn ring_motion_is_tangent() {
        let ring = Ring {
            cx: 10.0,
            cy: 9.0,
            inner: 4.0,
            outer: 8.0,
            direction: Rotation::Ccw,
            magnitude: 3.0,
        };
        let (field, gt) = generate(&SceneSpec::new(21, 19).with_ring(ring)).unwrap();
        let mut members = 0;
        for y in 0..19 {
            for x in 0..21 {
                let node = y * 21 + x;
                if gt.labels()[node] == 0 {
                    continue;
                }
                members += 1;
                let m = field.vectors()[node];
                let (rx, ry) = (x as f64 - 10.0, y as f64 - 9.0);
                let radial = (m.dx * rx + m.dy * ry) / rx.hypot(ry);
                assert!(radial.abs() < 1e-9, "node ({x},{y}) radial {radial}");
                assert!((m.magnitude() - 3.0).abs() < 1e-9);
                // ccw: cross product r x v positive
                assert!(rx * m.dy - ry * m.dx > 0.0);
            }
        }
        assert!(members > 100);
    }

    #[test]
    fn overlap_and_bounds_rejected() {
        let lane = Lane {
            x: 0,
            y: 0,
            w: 4,
            h: 2,
            orientation: 0.0,
            magnitude: 1.0,
        };
        let spec = SceneSpec::new(6, 6)
            .with_lane(lane)
            .with_lane(Lane { y: 1, ..lane });
        assert!(matches!(
            generate(&spec),
            Err(Error::PrimitiveOverlap {
                first: 0,
                second: 1
            })
        ));
        let spec = SceneSpec::new(3, 3).with_lane(lane);
        assert!(matches!(generate(&spec), Err(Error::InvalidScene(_))));
        assert!(generate(&SceneSpec::new(3, 3).with_noise(-1.0)).is_err());
    }

    #[test]
    fn toml_scene() {
        let text = r#"
            width = 12
            height = 8
            noise = 0.25
            seed = 9

            [[lane]]
            x = 0
            y = 0
            w = 12
            h = 2
            orientation = 90.0
            magnitude = 2.0

            [[ring]]
            cx = 5.0
            cy = 5.0
            inner = 1.0
            outer = 2.0
            direction = "cw"
            magnitude = 1.5
        "#;
        let spec = SceneSpec::from_toml(text).unwrap();
        assert_eq!(spec.primitives.len(), 2);
        assert_eq!(spec.seed, 9);
        let (_, gt) = generate(&spec).unwrap();
        assert_eq!(gt.segment_ids(), vec![1, 2]);
        assert!(SceneSpec::from_toml("width = 3\nheight = 3\nbogus = 1\n").is_err());
    }

    #[test]
    fn noise_statistics_are_plausible() {
        let spec = SceneSpec::new(100, 100).with_noise(0.5).with_seed(3);
        let (field, _) = generate(&spec).unwrap();
        let n = field.len() as f64;
        let mean: f64 = field.vectors().iter().map(|m| m.dx).sum::<f64>() / n;
        let var: f64 = field
            .vectors()
            .iter()
            .map(|m| (m.dx - mean).powi(2))
            .sum::<f64>()
            / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 0.5).abs() < 0.02, "std {}", var.sqrt());
    }

    proptest! {
        #[test]
        fn generation_is_reproducible(seed in any::<u64>(), noise in 0f64..2.0) {
            let spec = two_lane_scene(20, 12, 3.0, noise, seed);
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            prop_assert_eq!(a.0.to_mvf1(), b.0.to_mvf1());
            prop_assert_eq!(a.1, b.1);
        }
    }
}
