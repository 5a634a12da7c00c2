//! Circular statistics on orientations measured in degrees.
//!
//! All orientations live in the half-open interval (-180, 180]; -180 and 180
//! denote the same direction and are both reported as 180.

/// Resultant lengths below this are treated as having no mean direction.
pub const MIN_RESULTANT: f64 = 1e-9;

/// Wraps any finite angle into (-180, 180].
pub fn wrap_degrees(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Angle between two orientations, in [0, 180].
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (wrap_degrees(a) - wrap_degrees(b)).abs();
    d.min(360.0 - d)
}

/// Orientation of the vector (dx, dy) in degrees, wrapped into (-180, 180].
/// The zero vector has orientation 0.
pub fn orientation_of(dx: f64, dy: f64) -> f64 {
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    wrap_degrees(dy.atan2(dx).to_degrees())
}

/// Accumulates unit vectors for an unweighted circular mean.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct CircularMean {
    sum_cos: f64,
    sum_sin: f64,
    count: usize,
}

impl CircularMean {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, deg: f64) {
        let rad = deg.to_radians();
        self.sum_cos += rad.cos();
        self.sum_sin += rad.sin();
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Length of the summed unit vectors.
    pub fn resultant(&self) -> f64 {
        self.sum_cos.hypot(self.sum_sin)
    }

    /// Direction of the resultant, or `None` when it is shorter than
    /// [`MIN_RESULTANT`] (empty input or perfectly opposed orientations).
    pub fn mean(&self) -> Option<f64> {
        if self.resultant() < MIN_RESULTANT {
            None
        } else {
            Some(orientation_of(self.sum_cos, self.sum_sin))
        }
    }
}

impl FromIterator<f64> for CircularMean {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CircularMean::new();
        for deg in iter {
            acc.push(deg);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_identifies_antipodes() {
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(540.0), 180.0);
        assert_eq!(wrap_degrees(-190.0), 170.0);
        assert_eq!(wrap_degrees(190.0), -170.0);
        assert_eq!(wrap_degrees(0.0), 0.0);
        assert_eq!(wrap_degrees(-1e-20), 0.0);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(angular_distance(30.0, 40.0), 10.0);
        assert_eq!(angular_distance(170.0, -170.0), 20.0);
        assert_eq!(angular_distance(90.0, -90.0), 180.0);
        assert_eq!(angular_distance(180.0, -180.0), 0.0);
    }

    #[test]
    fn orientation_examples() {
        assert_eq!(orientation_of(0.0, 0.0), 0.0);
        assert_eq!(orientation_of(1.0, 0.0), 0.0);
        assert_eq!(orientation_of(0.0, 2.0), 90.0);
        assert_eq!(orientation_of(-1.0, 0.0), 180.0);
        assert_eq!(orientation_of(0.0, -3.0), -90.0);
    }

    #[test]
    fn circular_mean_examples() {
        let m: CircularMean = [10.0, 20.0].into_iter().collect();
        assert!((m.mean().unwrap() - 15.0).abs() < 1e-9);
        let m: CircularMean = [170.0, -170.0].into_iter().collect();
        assert!(angular_distance(m.mean().unwrap(), 180.0) < 1e-9);
        let m: CircularMean = [0.0, 90.0].into_iter().collect();
        assert!((m.mean().unwrap() - 45.0).abs() < 1e-9);
        let m: CircularMean = [0.0, 180.0].into_iter().collect();
        assert_eq!(m.mean(), None);
        assert_eq!(CircularMean::new().mean(), None);
    }

    proptest! {
        #[test]
        fn wrap_range(a in -1e4f64..1e4) {
            let w = wrap_degrees(a);
            prop_assert!(w > -180.0 && w <= 180.0);
        }

        #[test]
        fn distance_is_a_circle_metric(a in -720f64..720.0, b in -720f64..720.0, c in -720f64..720.0) {
            let dab = angular_distance(a, b);
            prop_assert!((0.0..=180.0).contains(&dab));
            prop_assert_eq!(dab, angular_distance(b, a));
            prop_assert_eq!(angular_distance(a, a), 0.0);
            prop_assert!((angular_distance(a + 360.0, b) - dab).abs() < 1e-9);
            prop_assert!(angular_distance(a, c) <= dab + angular_distance(b, c) + 1e-9);
        }

        #[test]
        fn reversed_vector_is_antipodal(dx in -50f64..50.0, dy in -50f64..50.0) {
            prop_assume!(dx != 0.0 || dy != 0.0);
            let fwd = orientation_of(dx, dy);
            let back = orientation_of(-dx, -dy);
            prop_assert!((angular_distance(fwd, back) - 180.0).abs() < 1e-9);
            prop_assert!((wrap_degrees(fwd + 180.0) - back).abs() < 1e-9
                || (wrap_degrees(fwd + 180.0) - back).abs() > 359.0);
        }
    }
}
