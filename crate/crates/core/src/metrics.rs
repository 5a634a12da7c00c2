//! Segmentation scoring against ground truth and timing tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;

use crate::error::{Error, Result};

/// Integer label per grid node, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch {
                expected: "positive dimensions".into(),
                found: format!("{width}x{height}"),
            });
        }
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} labels", width * height),
                found: format!("{} labels", labels.len()),
            });
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn background(width: usize, height: usize) -> Self {
        LabelMap {
            width,
            height,
            labels: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Distinct non-zero labels, ascending.
    pub fn segment_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn num_segments(&self) -> usize {
        self.segment_ids().len()
    }

    fn check_same_dims(&self, other: &LabelMap) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                found: format!("{}x{}", other.width, other.height),
            });
        }
        Ok(())
    }
}

/// Overlap counts between the non-zero labels of two maps.
#[derive(Debug, Clone)]
pub struct OverlapMatrix {
    pub rows: Vec<u32>,
    pub cols: Vec<u32>,
    pub counts: Vec<Vec<u64>>,
}

pub fn overlap_matrix(a: &LabelMap, b: &LabelMap) -> Result<OverlapMatrix> {
    a.check_same_dims(b)?;
    let rows = a.segment_ids();
    let cols = b.segment_ids();
    let row_of: BTreeMap<u32, usize> = rows.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let col_of: BTreeMap<u32, usize> = cols.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
    for (&la, &lb) in a.labels.iter().zip(&b.labels) {
        if la != 0 && lb != 0 {
            counts[row_of[&la]][col_of[&lb]] += 1;
        }
    }
    Ok(OverlapMatrix { rows, cols, counts })
}

/// One-to-one correspondence from labels of `a` to labels of `b` maximizing
/// total overlap. Pairs without overlap are dropped. Sorted by `a` label.
pub fn match_segments(a: &LabelMap, b: &LabelMap) -> Result<Vec<(u32, u32)>> {
    let m = overlap_matrix(a, b)?;
    if m.rows.is_empty() || m.cols.is_empty() {
        return Ok(Vec::new());
    }
    // the solver needs rows <= columns
    let transpose = m.rows.len() > m.cols.len();
    let (nr, nc) = if transpose {
        (m.cols.len(), m.rows.len())
    } else {
        (m.rows.len(), m.cols.len())
    };
    let weights = Matrix::from_fn(nr, nc, |(r, c)| {
        let w = if transpose {
            m.counts[c][r]
        } else {
            m.counts[r][c]
        };
        w as i64
    });
    let (_, assignment) = kuhn_munkres(&weights);
    let mut pairs: Vec<(u32, u32)> = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| if transpose { (c, r) } else { (r, c) })
        .filter(|&(i, j)| m.counts[i][j] > 0)
        .map(|(i, j)| (m.rows[i], m.cols[j]))
        .collect();
    pairs.sort_unstable();
    Ok(pairs)
}

/// Intersection and union node counts under the optimal correspondence.
pub fn jaccard_counts(a: &LabelMap, b: &LabelMap) -> Result<(u64, u64)> {
    let pairs: BTreeMap<u32, u32> = match_segments(a, b)?.into_iter().collect();
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&la, &lb) in a.labels.iter().zip(&b.labels) {
        if la != 0 || lb != 0 {
            union += 1;
        }
        if la != 0 && lb != 0 && pairs.get(&la) == Some(&lb) {
            inter += 1;
        }
    }
    Ok((inter, union))
}

/// Intersection over union of matched non-zero nodes. Two all-background
/// maps score 1.
pub fn jaccard(a: &LabelMap, b: &LabelMap) -> Result<f64> {
    let (inter, union) = jaccard_counts(a, b)?;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Per-stage wall-clock seconds for one sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageSeconds {
    pub coarse: f64,
    pub refine: f64,
    pub merge: f64,
    pub total: f64,
}

/// Rendered timing table, one row per sequence in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingTable {
    rows: Vec<(String, StageSeconds)>,
}

const TIMING_COLUMNS: [&str; 5] = ["sequence", "coarse_s", "refine_s", "merge_s", "total_s"];

pub fn timing_report<'a, I>(results: I) -> TimingTable
where
    I: IntoIterator<Item = (&'a str, StageSeconds)>,
{
    TimingTable {
        rows: results
            .into_iter()
            .map(|(name, t)| (name.to_string(), t))
            .collect(),
    }
}

impl TimingTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = TIMING_COLUMNS.join(",");
        out.push('\n');
        for (name, t) in &self.rows {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6}",
                csv_field(name),
                t.coarse,
                t.refine,
                t.merge,
                t.total
            )
            .unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|(n, _)| n.len())
            .chain([TIMING_COLUMNS[0].len()])
            .max()
            .unwrap_or(8);
        let mut out = format!(
            "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}\n",
            TIMING_COLUMNS[0],
            TIMING_COLUMNS[1],
            TIMING_COLUMNS[2],
            TIMING_COLUMNS[3],
            TIMING_COLUMNS[4]
        );
        for (name, t) in &self.rows {
            writeln!(
                out,
                "{:<width$}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}",
                name, t.coarse, t.refine, t.merge, t.total
            )
            .unwrap();
        }
        out
    }
}

/// One row of the per-sequence evaluation CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub sequence: String,
    pub jaccard: f64,
    pub n_flows_pred: usize,
    pub n_flows_gt: usize,
    pub time_total_s: Option<f64>,
}

pub const EVAL_CSV_HEADER: &str = "sequence,jaccard,n_flows_pred,n_flows_gt,time_total_s";

impl EvalRow {
    pub fn evaluate(
        sequence: &str,
        pred: &LabelMap,
        gt: &LabelMap,
        time_total_s: Option<f64>,
    ) -> Result<Self> {
        Ok(EvalRow {
            sequence: sequence.to_string(),
            jaccard: jaccard(gt, pred)?,
            n_flows_pred: pred.num_segments(),
            n_flows_gt: gt.num_segments(),
            time_total_s,
        })
    }

    pub fn to_csv_line(&self) -> String {
        let time = self
            .time_total_s
            .map(|t| format!("{t:.6}"))
            .unwrap_or_default();
        format!(
            "{},{:.6},{},{},{}",
            csv_field(&self.sequence),
            self.jaccard,
            self.n_flows_pred,
            self.n_flows_gt,
            time
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
