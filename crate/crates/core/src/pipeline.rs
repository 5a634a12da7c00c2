//! Coarse-to-fine flow segmentation.
//!
//! 1. Coarse stage: CRF over 36 orientations in 10 degree steps plus
//!    background, minimized by alpha-expansion and split into 4-connected
//!    segments.
//! 2. Fine stage: one label per coarse segment larger than the size
//!    threshold, oriented at that segment's circular mean, solved again.
//! 3. Merge: adjacent fine segments are merged greedily while the mean
//!    orientation difference across their shared boundary is below the
//!    merge threshold.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::angle::{angular_distance, CircularMean};
use crate::crf::{
    grid_edges, grid_neighbors, CrfParams, CrfProblem, Label, LabelSet, Labeling, BACKGROUND,
};
use crate::error::{Error, Result};
use crate::expansion::{minimize, SolverReport};
use crate::metrics::{LabelMap, StageSeconds};
use crate::mvfield::MotionField;

/// Orientations closer than this collapse into one fine label.
pub const FINE_DEDUP_DEG: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub params: CrfParams,
    /// Minimum coarse segment size (exclusive) for contributing a fine label.
    /// `None` selects `max(16, ceil(0.1% of nodes))`.
    pub size_thresh: Option<usize>,
    /// Degrees; adjacent segments merge while their boundary gradient is
    /// strictly below this.
    pub merge_thresh: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            params: CrfParams::default(),
            size_thresh: None,
            merge_thresh: 45.0,
        }
    }
}

impl PipelineConfig {
    pub fn size_threshold(&self, num_nodes: usize) -> usize {
        self.size_thresh
            .unwrap_or_else(|| 16.max(num_nodes.div_ceil(1000)))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.size_thresh == Some(0) {
            return Err(Error::InvalidParameter(
                "size_thresh must be at least 1".into(),
            ));
        }
        if !(self.merge_thresh > 0.0 && self.merge_thresh <= 180.0) {
            return Err(Error::InvalidParameter(format!(
                "merge_thresh must lie in (0, 180], got {}",
                self.merge_thresh
            )));
        }
        Ok(())
    }
}

/// A 4-connected component of equal non-background labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: usize,
    pub label: Label,
    /// Member nodes, ascending.
    pub nodes: Vec<usize>,
    /// Circular mean of member orientations; `None` when undefined.
    pub mean_orientation: Option<f64>,
}

impl Segment {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }
}

/// Unweighted circular mean of the field orientation over `nodes`.
/// Nodes with exactly zero motion have no orientation and are skipped.
pub fn mean_orientation(nodes: &[usize], field: &MotionField) -> Result<f64> {
    let acc: CircularMean = nodes
        .iter()
        .filter(|&&u| field.magnitude(u) > 0.0)
        .map(|&u| field.orientation(u))
        .collect();
    acc.mean().ok_or(Error::DegenerateMean(acc.resultant()))
}

/// Splits a labeling into 4-connected segments of equal non-background
/// label, numbered in row-major order of their first node.
pub fn segments_of(labeling: &Labeling, field: &MotionField) -> Vec<Segment> {
    let (w, h) = (labeling.width(), labeling.height());
    let labels = labeling.labels();
    let mut seen = vec![false; labels.len()];
    let mut segments = Vec::new();
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if seen[start] || labels[start] == BACKGROUND {
            continue;
        }
        let label = labels[start];
        let mut nodes = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(u) = stack.pop() {
            nodes.push(u);
            for v in grid_neighbors(w, h, u) {
                if !seen[v] && labels[v] == label {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        nodes.sort_unstable();
        let mean_orientation = mean_orientation(&nodes, field).ok();
        segments.push(Segment {
            id: segments.len(),
            label,
            nodes,
            mean_orientation,
        });
    }
    segments
}

/// Output of one CRF stage.
#[derive(Debug, Clone)]
pub struct StageResult {
    pub label_set: LabelSet,
    pub report: SolverReport,
    pub segments: Vec<Segment>,
}

impl StageResult {
    pub fn labeling(&self) -> &Labeling {
        &self.report.labeling
    }
}

fn solve_stage(field: &MotionField, label_set: LabelSet, params: CrfParams) -> Result<StageResult> {
    let problem = CrfProblem::new(field, label_set.clone(), params)?;
    let report = minimize(&problem, None)?;
    let segments = segments_of(&report.labeling, field);
    Ok(StageResult {
        label_set,
        report,
        segments,
    })
}

pub fn coarse_segment(field: &MotionField, config: &PipelineConfig) -> Result<StageResult> {
    config.validate()?;
    solve_stage(field, LabelSet::coarse(), config.params)
}

/// Fine orientations from the coarse segments larger than the size
/// threshold, in segment order. A segment without a defined mean falls back
/// to the orientation of its coarse label.
pub fn fine_orientations(
    coarse: &[Segment],
    coarse_labels: &LabelSet,
    size_thresh: usize,
) -> Result<LabelSet> {
    let mut orientations: Vec<f64> = Vec::new();
    for seg in coarse.iter().filter(|s| s.size() > size_thresh) {
        let theta = match seg.mean_orientation {
            Some(t) => t,
            None => coarse_labels.orientation(seg.label).ok_or_else(|| {
                Error::InvalidLabels("segment carries the background label".into())
            })?,
        };
        if orientations
            .iter()
            .all(|&o| angular_distance(o, theta) >= FINE_DEDUP_DEG)
        {
            orientations.push(theta);
        }
    }
    if orientations.is_empty() {
        return Err(Error::NoQualifyingSegments(size_thresh));
    }
    LabelSet::new(orientations)
}

pub fn refine(
    field: &MotionField,
    coarse: &StageResult,
    config: &PipelineConfig,
) -> Result<StageResult> {
    config.validate()?;
    let size_thresh = config.size_threshold(field.len());
    let labels = fine_orientations(&coarse.segments, &coarse.label_set, size_thresh)?;
    solve_stage(field, labels, config.params)
}

/// Per node, the largest orientation difference to any 4-neighbour.
pub fn orientation_gradient(field: &MotionField) -> Vec<f64> {
    let (w, h) = (field.width(), field.height());
    (0..field.len())
        .map(|u| {
            grid_neighbors(w, h, u)
                .map(|v| angular_distance(field.orientation(u), field.orientation(v)))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// A final flow: one or more merged fine segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    /// 1-based, in row-major order of the first node.
    pub id: u32,
    pub nodes: Vec<usize>,
    /// Circular mean over the merged mask.
    pub orientation: Option<f64>,
    /// IDs of the fine segments merged into this flow, ascending.
    pub segments: Vec<usize>,
}

impl Flow {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }
}

/// One accepted merge step, identified by the first node of each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeStep {
    pub first: usize,
    pub second: usize,
    pub mean_gradient: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeOutcome {
    pub flows: Vec<Flow>,
    pub steps: Vec<MergeStep>,
}

/// Mean orientation difference across the shared boundary of every adjacent
/// region pair, keyed by region id pair (low, high). `region` maps nodes to
/// region ids.
fn boundary_gradients(
    field: &MotionField,
    region: &[Option<usize>],
) -> BTreeMap<(usize, usize), (f64, usize)> {
    let mut stats: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for (u, v) in grid_edges(field.width(), field.height()) {
        if let (Some(a), Some(b)) = (region[u], region[v]) {
            if a != b {
                let key = (a.min(b), a.max(b));
                let d = angular_distance(field.orientation(u), field.orientation(v));
                let e = stats.entry(key).or_insert((0.0, 0));
                e.0 += d;
                e.1 += 1;
            }
        }
    }
    stats
}

/// Greedy region merging on the region adjacency graph.
///
/// Regions are identified by their smallest node index, which makes the
/// result independent of how the input segments are numbered. Each round
/// merges the adjacent pair with the smallest mean boundary gradient (ties:
/// smaller combined size, then smaller id pair) and recomputes all boundary
/// statistics.
pub fn merge(segments: &[Segment], field: &MotionField, config: &PipelineConfig) -> MergeOutcome {
    let mut region: Vec<Option<usize>> = vec![None; field.len()];
    // region id -> (member nodes, member segment ids)
    let mut members: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for seg in segments {
        let Some(&key) = seg.nodes.iter().min() else {
            continue;
        };
        for &u in &seg.nodes {
            region[u] = Some(key);
        }
        members.insert(key, (seg.nodes.clone(), vec![seg.id]));
    }

    let mut steps = Vec::new();
    loop {
        let stats = boundary_gradients(field, &region);
        let best = stats
            .iter()
            .map(|(&(a, b), &(sum, count))| {
                let size = members[&a].0.len() + members[&b].0.len();
                (sum / count as f64, size, a, b)
            })
            .min_by(|x, y| {
                x.0.total_cmp(&y.0)
                    .then(x.1.cmp(&y.1))
                    .then((x.2, x.3).cmp(&(y.2, y.3)))
            });
        let Some((mean, _, a, b)) = best else { break };
        if mean >= config.merge_thresh {
            break;
        }
        // a < b, so the merged region keeps id a
        let (nodes_b, segs_b) = members.remove(&b).expect("region present");
        for &u in &nodes_b {
            region[u] = Some(a);
        }
        let entry = members.get_mut(&a).expect("region present");
        entry.0.extend(nodes_b);
        entry.1.extend(segs_b);
        steps.push(MergeStep {
            first: a,
            second: b,
            mean_gradient: mean,
        });
    }

    let flows = members
        .into_values()
        .enumerate()
        .map(|(i, (mut nodes, mut segs))| {
            nodes.sort_unstable();
            segs.sort_unstable();
            let orientation = mean_orientation(&nodes, field).ok();
            Flow {
                id: i as u32 + 1,
                nodes,
                orientation,
                segments: segs,
            }
        })
        .collect();
    MergeOutcome { flows, steps }
}

/// Everything produced by one pipeline run.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub width: usize,
    pub height: usize,
    pub size_thresh: usize,
    pub coarse: StageResult,
    /// `None` when no coarse segment qualified for refinement.
    pub fine: Option<StageResult>,
    pub merge: MergeOutcome,
    pub timings: StageSeconds,
}

impl FlowResult {
    pub fn flows(&self) -> &[Flow] {
        &self.merge.flows
    }

    pub fn num_flows(&self) -> usize {
        self.merge.flows.len()
    }

    /// Flow IDs per node, 0 for background.
    pub fn label_map(&self) -> LabelMap {
        let mut labels = vec![0u32; self.width * self.height];
        for flow in self.flows() {
            for &u in &flow.nodes {
                labels[u] = flow.id;
            }
        }
        LabelMap::new(self.width, self.height, labels).expect("dimensions match")
    }

    /// `flow_id,size,orientation_deg` rows.
    pub fn flows_csv(&self) -> String {
        let mut out = String::from("flow_id,size,orientation_deg\n");
        for f in self.flows() {
            let theta = f.orientation.map(|t| format!("{t:.6}")).unwrap_or_default();
            writeln!(out, "{},{},{}", f.id, f.size(), theta).unwrap();
        }
        out
    }
}

/// Label indices of a stage as a label map (background 0).
pub fn labeling_map(labeling: &Labeling) -> LabelMap {
    let labels = labeling.labels().iter().map(|&l| l as u32).collect();
    LabelMap::new(labeling.width(), labeling.height(), labels).expect("dimensions match")
}

/// Runs coarse segmentation, refinement and merging.
pub fn run(field: &MotionField, config: &PipelineConfig) -> Result<FlowResult> {
    config.validate()?;
    let t0 = Instant::now();
    let coarse = coarse_segment(field, config)?;
    let t1 = Instant::now();
    let fine = match refine(field, &coarse, config) {
        Ok(stage) => Some(stage),
        Err(Error::NoQualifyingSegments(_)) => None,
        Err(e) => return Err(e),
    };
    let t2 = Instant::now();
    let merged = fine
        .as_ref()
        .map(|f| merge(&f.segments, field, config))
        .unwrap_or_default();
    let t3 = Instant::now();
    Ok(FlowResult {
        width: field.width(),
        height: field.height(),
        size_thresh: config.size_threshold(field.len()),
        coarse,
        fine,
        merge: merged,
        timings: StageSeconds {
            coarse: (t1 - t0).as_secs_f64(),
            refine: (t2 - t1).as_secs_f64(),
            merge: (t3 - t2).as_secs_f64(),
            total: (t3 - t0).as_secs_f64(),
        },
    })
}
