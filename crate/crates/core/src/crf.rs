//! Grid CRF over a motion field: orientation labels plus one background
//! label, a thresholded unary term and a feature-weighted Potts pairwise term.

use serde::{Deserialize, Serialize};

use crate::angle::{angular_distance, wrap_degrees};
use crate::error::{Error, Result};
use crate::mvfield::MotionField;

/// Label index; 0 is background, `k >= 1` supports orientation `k - 1` of the
/// label set.
pub type Label = usize;

pub const BACKGROUND: Label = 0;

/// Step between coarse orientation labels, in degrees.
pub const COARSE_STEP_DEG: f64 = 10.0;

/// Potential parameters.
///
/// `tau` is the magnitude below which a vector counts as background motion
/// (pixels/frame). `c1` is the cost of labeling a moving node background,
/// `c2` the cost of giving a still node an orientation, and `c3` scales the
/// pairwise penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrfParams {
    pub tau: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for CrfParams {
    fn default() -> Self {
        CrfParams {
            tau: 1.0,
            c1: 90.0,
            c2: 90.0,
            c3: 0.25,
        }
    }
}

impl CrfParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau", self.tau),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Orientations supported by the non-background labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    orientations: Vec<f64>,
}

impl LabelSet {
    /// Wraps every orientation into (-180, 180] and rejects duplicates.
    pub fn new(orientations: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut out: Vec<f64> = Vec::new();
        for deg in orientations {
            if !deg.is_finite() {
                return Err(Error::InvalidLabels(format!(
                    "non-finite orientation {deg}"
                )));
            }
            let deg = wrap_degrees(deg);
            if out.contains(&deg) {
                return Err(Error::InvalidLabels(format!("duplicate orientation {deg}")));
            }
            out.push(deg);
        }
        Ok(LabelSet { orientations: out })
    }

    /// The 36 coarse orientations -170, -160, ..., 170, 180.
    pub fn coarse() -> Self {
        let orientations = (1..=36)
            .map(|i| -180.0 + i as f64 * COARSE_STEP_DEG)
            .collect();
        LabelSet { orientations }
    }

    pub fn orientations(&self) -> &[f64] {
        &self.orientations
    }

    /// Total label count including background.
    pub fn num_labels(&self) -> usize {
        self.orientations.len() + 1
    }

    /// Orientation supported by `label`, or `None` for background.
    pub fn orientation(&self, label: Label) -> Option<f64> {
        if label == BACKGROUND {
            None
        } else {
            Some(self.orientations[label - 1])
        }
    }
}

/// One label per grid node, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl Labeling {
    pub fn constant(width: usize, height: usize, label: Label) -> Self {
        Labeling {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn background(width: usize, height: usize) -> Self {
        Self::constant(width, height, BACKGROUND)
    }

    pub fn from_vec(width: usize, height: usize, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} labels", width * height),
                found: format!("{} labels", labels.len()),
            });
        }
        Ok(Labeling {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [Label] {
        &mut self.labels
    }

    pub fn get(&self, node: usize) -> Label {
        self.labels[node]
    }

    pub fn into_vec(self) -> Vec<Label> {
        self.labels
    }
}

/// Undirected 4-neighbour edges of a `width x height` grid, each once, in
/// row-major order of the first endpoint (right neighbour before the one
/// below).
pub fn grid_edges(width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..height).flat_map(move |y| {
        (0..width).flat_map(move |x| {
            let u = y * width + x;
            let right = (x + 1 < width).then_some((u, u + 1));
            let down = (y + 1 < height).then_some((u, u + width));
            right.into_iter().chain(down)
        })
    })
}

/// 4-neighbours of `node` in left, right, up, down order.
pub fn grid_neighbors(width: usize, height: usize, node: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (node % width, node / width);
    [
        (x > 0).then(|| node - 1),
        (x + 1 < width).then(|| node + 1),
        (y > 0).then(|| node - width),
        (y + 1 < height).then(|| node + width),
    ]
    .into_iter()
    .flatten()
}

/// A CRF instance: field features, label set and parameters on the
/// 4-connected grid.
#[derive(Debug, Clone)]
pub struct CrfProblem<'f> {
    field: &'f MotionField,
    labels: LabelSet,
    params: CrfParams,
}

impl<'f> CrfProblem<'f> {
    pub fn new(field: &'f MotionField, labels: LabelSet, params: CrfParams) -> Result<Self> {
        params.validate()?;
        Ok(CrfProblem {
            field,
            labels,
            params,
        })
    }

    pub fn field(&self) -> &'f MotionField {
        self.field
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn params(&self) -> &CrfParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.field.width()
    }

    pub fn height(&self) -> usize {
        self.field.height()
    }

    pub fn num_nodes(&self) -> usize {
        self.field.len()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.num_labels()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> {
        grid_edges(self.width(), self.height())
    }

    pub fn unary(&self, node: usize, label: Label) -> f64 {
        let p = &self.params;
        let moving = self.field.magnitude(node) >= p.tau;
        match (self.labels.orientation(label), moving) {
            (None, false) => 0.0,
            (None, true) => p.c1,
            (Some(_), false) => p.c2,
            (Some(theta), true) => angular_distance(self.field.orientation(node), theta),
        }
    }

    /// Penalty paid by an edge whose endpoints take different labels.
    pub fn edge_weight(&self, u: usize, v: usize) -> f64 {
        let d = angular_distance(self.field.orientation(u), self.field.orientation(v));
        self.params.c3 * (360.0 - d)
    }

    pub fn pairwise(&self, u: usize, v: usize, label_u: Label, label_v: Label) -> f64 {
        if label_u == label_v {
            0.0
        } else {
            self.edge_weight(u, v)
        }
    }

    fn check_labeling(&self, labeling: &Labeling) -> Result<()> {
        if labeling.width() != self.width() || labeling.height() != self.height() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width(), self.height()),
                found: format!("{}x{}", labeling.width(), labeling.height()),
            });
        }
        if let Some(l) = labeling.labels().iter().find(|&&l| l >= self.num_labels()) {
            return Err(Error::InvalidLabels(format!(
                "label {l} outside 0..{}",
                self.num_labels()
            )));
        }
        Ok(())
    }

    /// Total energy: unary terms in node order, then pairwise terms in
    /// [`grid_edges`] order, each undirected edge once.
    pub fn energy(&self, labeling: &Labeling) -> Result<f64> {
        self.check_labeling(labeling)?;
        let x = labeling.labels();
        let mut e = 0.0;
        for (u, &l) in x.iter().enumerate() {
            e += self.unary(u, l);
        }
        for (u, v) in self.edges() {
            e += self.pairwise(u, v, x[u], x[v]);
        }
        Ok(e)
    }

    /// Precomputed unary costs and edge weights for repeated evaluation.
    pub fn tables(&self) -> PotentialTables {
        let k = self.num_labels();
        let n = self.num_nodes();
        let mut unary = Vec::with_capacity(n * k);
        for u in 0..n {
            unary.extend((0..k).map(|l| self.unary(u, l)));
        }
        let edges: Vec<(usize, usize, f64)> = self
            .edges()
            .map(|(u, v)| (u, v, self.edge_weight(u, v)))
            .collect();
        PotentialTables {
            num_labels: k,
            unary,
            edges,
        }
    }
}

/// Dense unary table (node-major) and weighted edge list of a problem.
#[derive(Debug, Clone)]
pub struct PotentialTables {
    num_labels: usize,
    unary: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
}

impl PotentialTables {
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn num_nodes(&self) -> usize {
        self.unary.len() / self.num_labels
    }

    pub fn unary(&self, node: usize, label: Label) -> f64 {
        self.unary[node * self.num_labels + label]
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Same summation order as [`CrfProblem::energy`], so both agree bit for
    /// bit.
    pub fn energy(&self, labels: &[Label]) -> f64 {
        let mut e = 0.0;
        for (u, &l) in labels.iter().enumerate() {
            e += self.unary(u, l);
        }
        for &(u, v, w) in &self.edges {
            if labels[u] != labels[v] {
                e += w;
            }
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvfield::Motion;
    use proptest::prelude::*;

    fn polar(mag: f64, deg: f64) -> Motion {
        let r = deg.to_radians();
        Motion::new(mag * r.cos(), mag * r.sin())
    }

    fn params(tau: f64, c1: f64, c2: f64, c3: f64) -> CrfParams {
        CrfParams { tau, c1, c2, c3 }
    }

    #[test]
    fn coarse_labels() {
        let set = LabelSet::coarse();
        assert_eq!(set.num_labels(), 37);
        assert_eq!(set.orientations()[0], -170.0);
        assert_eq!(set.orientations()[17], 0.0);
        assert_eq!(set.orientations()[35], 180.0);
        assert_eq!(set.orientation(BACKGROUND), None);
        assert_eq!(set.orientation(18), Some(0.0));
    }

    #[test]
    fn label_set_wraps_and_rejects_duplicates() {
        let set = LabelSet::new([-180.0, 370.0]).unwrap();
        assert_eq!(set.orientations(), &[180.0, 10.0]);
        assert!(LabelSet::new([180.0, -180.0]).is_err());
        assert!(LabelSet::new([f64::NAN]).is_err());
        assert_eq!(LabelSet::new([]).unwrap().num_labels(), 1);
    }

    #[test]
    fn params_validation() {
        assert!(CrfParams::default().validate().is_ok());
        assert!(params(-1.0, 0.0, 0.0, 0.0).validate().is_err());
        assert!(params(1.0, f64::INFINITY, 0.0, 0.0).validate().is_err());
    }

    #[test]
    fn grid_topology() {
        let edges: Vec<_> = grid_edges(3, 2).collect();
        assert_eq!(
            edges,
            vec![(0, 1), (0, 3), (1, 2), (1, 4), (2, 5), (3, 4), (4, 5)]
        );
        // interior / edge / corner degree
        let degree = |w, h, n| grid_neighbors(w, h, n).count();
        assert_eq!(degree(3, 3, 4), 4);
        assert_eq!(degree(3, 3, 1), 3);
        assert_eq!(degree(3, 3, 0), 2);
        assert_eq!(
            grid_neighbors(3, 3, 4).collect::<Vec<_>>(),
            vec![3, 5, 1, 7]
        );
    }

    #[test]
    fn unary_cases() {
        let field = MotionField::new(
            3,
            1,
            vec![polar(0.3, 77.0), Motion::new(2.0, 0.0), polar(2.0, 40.0)],
        )
        .unwrap();
        let labels = LabelSet::new([30.0]).unwrap();
        let p = CrfProblem::new(&field, labels, params(1.0, 90.0, 45.0, 1.0)).unwrap();
        assert_eq!(p.unary(0, BACKGROUND), 0.0);
        assert_eq!(p.unary(0, 1), 45.0);
        assert_eq!(p.unary(1, BACKGROUND), 90.0);
        assert!((p.unary(2, 1) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_cases() {
        let field =
            MotionField::new(2, 1, vec![Motion::new(1.0, 0.0), Motion::new(-1.0, 0.0)]).unwrap();
        let p = CrfProblem::new(
            &field,
            LabelSet::new([0.0, 180.0]).unwrap(),
            params(1.0, 90.0, 90.0, 0.5),
        )
        .unwrap();
        assert_eq!(p.pairwise(0, 1, 1, 1), 0.0);
        assert_eq!(p.pairwise(0, 1, 1, 2), 90.0);
        let same = MotionField::uniform(2, 1, Motion::new(3.0, 0.0)).unwrap();
        let p = CrfProblem::new(
            &same,
            LabelSet::new([0.0]).unwrap(),
            params(1.0, 90.0, 90.0, 1.0),
        )
        .unwrap();
        assert_eq!(p.pairwise(0, 1, 0, 1), 360.0);
    }

    #[test]
    fn energy_examples() {
        let still = MotionField::uniform(2, 1, Motion::new(0.1, 0.0)).unwrap();
        let p = CrfProblem::new(&still, LabelSet::coarse(), CrfParams::default()).unwrap();
        assert_eq!(p.energy(&Labeling::background(2, 1)).unwrap(), 0.0);

        let moving = MotionField::uniform(2, 1, Motion::new(2.0, 0.0)).unwrap();
        let p = CrfProblem::new(
            &moving,
            LabelSet::new([0.0]).unwrap(),
            params(1.0, 90.0, 90.0, 1.0),
        )
        .unwrap();
        // unary 0 + unary 90 + pairwise 360
        let lab = Labeling::from_vec(2, 1, vec![1, BACKGROUND]).unwrap();
        assert_eq!(p.energy(&lab).unwrap(), 450.0);
        assert_eq!(
            p.energy(&lab).unwrap().to_bits(),
            p.tables().energy(lab.labels()).to_bits()
        );

        assert!(matches!(
            p.energy(&Labeling::background(1, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(p.energy(&Labeling::constant(2, 1, 5)).is_err());
    }

    fn problem_strategy() -> impl Strategy<Value = (MotionField, LabelSet, CrfParams, Vec<usize>)> {
        (1usize..4, 1usize..4, 1usize..4).prop_flat_map(|(w, h, k)| {
            (
                prop::collection::vec((0f64..3.0, -180f64..180.0), w * h),
                prop::collection::vec(-180f64..180.0, k),
                (0f64..2.0, 0f64..180.0, 0f64..180.0, 0f64..1.0),
                prop::collection::vec(0usize..k + 1, w * h),
            )
                .prop_filter_map(
                    "distinct labels",
                    move |(mv, thetas, (tau, c1, c2, c3), lab)| {
                        let field =
                            MotionField::new(w, h, mv.iter().map(|&(m, t)| polar(m, t)).collect())
                                .ok()?;
                        let set = LabelSet::new(thetas).ok()?;
                        Some((field, set, params(tau, c1, c2, c3), lab))
                    },
                )
        })
    }

    proptest! {
        #[test]
        fn potential_ranges((field, set, prm, lab) in problem_strategy()) {
            let p = CrfProblem::new(&field, set, prm).unwrap();
            for u in 0..p.num_nodes() {
                for l in 0..p.num_labels() {
                    let c = p.unary(u, l);
                    prop_assert!(c >= 0.0);
                    if l != BACKGROUND && field.magnitude(u) >= prm.tau {
                        prop_assert!(c <= 180.0);
                    }
                }
            }
            for (u, v) in p.edges() {
                let w = p.pairwise(u, v, 0, 1);
                prop_assert!(w >= 180.0 * prm.c3 - 1e-9 && w <= 360.0 * prm.c3 + 1e-9);
            }
            let labeling = Labeling::from_vec(field.width(), field.height(), lab).unwrap();
            let e = p.energy(&labeling).unwrap();
            prop_assert_eq!(e.to_bits(), p.tables().energy(labeling.labels()).to_bits());
            prop_assert_eq!(e.to_bits(), p.energy(&labeling).unwrap().to_bits());
        }

        #[test]
        fn unused_labels_do_not_change_energy((field, set, prm, lab) in problem_strategy(), extra in -180f64..180.0) {
            let mut more = set.orientations().to_vec();
            more.push(extra);
            prop_assume!(LabelSet::new(more.clone()).is_ok());
            let base = CrfProblem::new(&field, set, prm).unwrap();
            let wider = CrfProblem::new(&field, LabelSet::new(more).unwrap(), prm).unwrap();
            let labeling = Labeling::from_vec(field.width(), field.height(), lab).unwrap();
            prop_assert_eq!(base.energy(&labeling).unwrap(), wider.energy(&labeling).unwrap());
        }
    }
}
