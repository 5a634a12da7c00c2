//! Mean motion-vector fields built from per-frame block motion vectors.
//!
//! The grid resolution is one node per 4x4-pixel block. Larger codec
//! partitions (up to a 16x16 macroblock) are replicated onto every 4x4 block
//! they cover, and the per-frame grids are averaged component-wise over time.
//!
//! Two ASCII formats are supported:
//!
//! * `MVF1 <width> <height>` followed by `width * height` lines `<dx> <dy>`
//!   in row-major order (a mean field).
//! * `FMV1 <width> <height> <frame_count>` followed by one record per line,
//!   `<frame> <block_x> <block_y> <block_w> <block_h> <dx> <dy>`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::angle::orientation_of;
use crate::error::{Error, Result};

/// A 2-D motion vector in pixels per frame.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct Motion {
    pub dx: f64,
    pub dy: f64,
}

impl Motion {
    pub const ZERO: Motion = Motion { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        Motion { dx, dy }
    }

    pub fn magnitude(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    /// Orientation in degrees, (-180, 180]; zero for the zero vector.
    pub fn orientation(&self) -> f64 {
        orientation_of(self.dx, self.dy)
    }
}

/// One motion vector covering a `block_w x block_h` run of 4x4 blocks in a
/// single frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMotionRecord {
    pub frame: usize,
    pub block_x: usize,
    pub block_y: usize,
    pub block_w: usize,
    pub block_h: usize,
    pub motion: Motion,
}

/// A dense per-frame grid of motion vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrid {
    width: usize,
    height: usize,
    cells: Vec<Motion>,
}

impl FrameGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        FrameGrid {
            width,
            height,
            cells: vec![Motion::ZERO; width * height],
        }
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<Motion>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} cells", width * height),
                found: format!("{} cells", cells.len()),
            });
        }
        Ok(FrameGrid {
            width,
            height,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[Motion] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> Motion {
        self.cells[y * self.width + x]
    }
}

/// Mean motion-vector field with derived magnitude and orientation channels.
///
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    width: usize,
    height: usize,
    mv: Vec<Motion>,
    magnitude: Vec<f64>,
    orientation: Vec<f64>,
}

impl MotionField {
    pub fn new(width: usize, height: usize, mv: Vec<Motion>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch {
                expected: "positive width and height".into(),
                found: format!("{width}x{height}"),
            });
        }
        if mv.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} vectors for {width}x{height}", width * height),
                found: format!("{} vectors", mv.len()),
            });
        }
        if let Some(i) = mv
            .iter()
            .position(|m| !m.dx.is_finite() || !m.dy.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "non-finite motion vector at node {i}"
            )));
        }
        let magnitude = mv.iter().map(Motion::magnitude).collect();
        let orientation = mv.iter().map(Motion::orientation).collect();
        Ok(MotionField {
            width,
            height,
            mv,
            magnitude,
            orientation,
        })
    }

    /// A field with the same vector at every node.
    pub fn uniform(width: usize, height: usize, motion: Motion) -> Result<Self> {
        MotionField::new(width, height, vec![motion; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.mv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mv.is_empty()
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn vectors(&self) -> &[Motion] {
        &self.mv
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitude
    }

    pub fn orientations(&self) -> &[f64] {
        &self.orientation
    }

    pub fn magnitude(&self, node: usize) -> f64 {
        self.magnitude[node]
    }

    pub fn orientation(&self, node: usize) -> f64 {
        self.orientation[node]
    }

    /// Serializes to the MVF1 text format. Values use the shortest decimal
    /// representation that parses back to the same `f64`.
    pub fn to_mvf1(&self) -> String {
        let mut out = String::with_capacity(16 + self.mv.len() * 12);
        writeln!(out, "MVF1 {} {}", self.width, self.height).unwrap();
        for m in &self.mv {
            // -0.0 prints as "-0", which still round-trips
            writeln!(out, "{} {}", m.dx, m.dy).unwrap();
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_mvf1()).map_err(|e| Error::io(path, e))
    }
}

/// Replicates block records onto the 4x4 grid, one dense grid per frame.
///
/// Cells that no record covers stay at zero motion.
pub fn replicate(
    records: &[BlockMotionRecord],
    width: usize,
    height: usize,
    frame_count: usize,
) -> Result<Vec<FrameGrid>> {
    if frame_count == 0 {
        return Err(Error::InvalidParameter(
            "frame_count must be at least 1".into(),
        ));
    }
    let mut frames = vec![FrameGrid::zeros(width, height); frame_count];
    let mut owner: Vec<Option<usize>> = vec![None; width * height * frame_count];

    for (i, rec) in records.iter().enumerate() {
        let legal = |s: usize| matches!(s, 1 | 2 | 4);
        if !legal(rec.block_w) || !legal(rec.block_h) {
            return Err(Error::InvalidExtent {
                record: i,
                w: rec.block_w,
                h: rec.block_h,
            });
        }
        if rec.frame >= frame_count {
            return Err(Error::FrameOutOfRange {
                record: i,
                frame: rec.frame,
                frame_count,
            });
        }
        if rec.block_x + rec.block_w > width || rec.block_y + rec.block_h > height {
            return Err(Error::OutOfBounds {
                record: i,
                x: rec.block_x,
                y: rec.block_y,
                w: rec.block_w,
                h: rec.block_h,
                width,
                height,
            });
        }
        let grid = &mut frames[rec.frame];
        for y in rec.block_y..rec.block_y + rec.block_h {
            for x in rec.block_x..rec.block_x + rec.block_w {
                let cell = y * width + x;
                let slot = &mut owner[rec.frame * width * height + cell];
                if slot.is_some() {
                    return Err(Error::Overlap {
                        record: i,
                        frame: rec.frame,
                        x,
                        y,
                    });
                }
                *slot = Some(i);
                grid.cells[cell] = rec.motion;
            }
        }
    }
    Ok(frames)
}

/// Component-wise arithmetic mean over frames.
///
/// Magnitude and orientation are derived from the mean vector, not averaged
/// separately.
pub fn temporal_mean(frames: &[FrameGrid]) -> Result<MotionField> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidParameter("temporal mean needs at least one frame".into()))?;
    let (width, height) = (first.width, first.height);
    if let Some((i, f)) = frames
        .iter()
        .enumerate()
        .find(|(_, f)| f.width != width || f.height != height)
    {
        return Err(Error::DimensionMismatch {
            expected: format!("{width}x{height}"),
            found: format!("{}x{} in frame {i}", f.width, f.height),
        });
    }
    let n = frames.len() as f64;
    let mean = (0..width * height)
        .map(|c| {
            let (sx, sy) = frames.iter().fold((0.0, 0.0), |(sx, sy), f| {
                (sx + f.cells[c].dx, sy + f.cells[c].dy)
            });
            Motion::new(sx / n, sy / n)
        })
        .collect();
    MotionField::new(width, height, mean)
}

/// Parsed contents of an FMV1 file.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecords {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub records: Vec<BlockMotionRecord>,
}

impl FrameRecords {
    pub fn mean_field(&self) -> Result<MotionField> {
        let frames = replicate(&self.records, self.width, self.height, self.frame_count)?;
        temporal_mean(&frames)
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_num<T: std::str::FromStr>(line: usize, what: &str, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} from {tok:?}")))
}

fn parse_header(line: Option<(usize, &str)>, magic: &str, fields: usize) -> Result<Vec<usize>> {
    let (_, line) = line.ok_or_else(|| Error::Header("empty input".into()))?;
    let mut toks = line.split_whitespace();
    match toks.next() {
        Some(m) if m == magic => {}
        Some(m) => return Err(Error::Header(format!("expected {magic}, found {m:?}"))),
        None => return Err(Error::Header("empty header".into())),
    }
    let vals: Vec<&str> = toks.collect();
    if vals.len() != fields {
        return Err(Error::Header(format!(
            "{magic} header needs {fields} integers, found {}",
            vals.len()
        )));
    }
    let vals = vals
        .iter()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Header(format!("bad {magic} dimension {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if vals[..2].contains(&0) {
        return Err(Error::Header(format!(
            "{magic} dimensions must be positive"
        )));
    }
    Ok(vals)
}

pub fn parse_mvf1(text: &str) -> Result<MotionField> {
    let mut lines = data_lines(text);
    let dims = parse_header(lines.next(), "MVF1", 2)?;
    let (width, height) = (dims[0], dims[1]);
    let expected = width * height;
    let mut mv = Vec::with_capacity(expected);
    for (lineno, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::parse(
                lineno,
                format!("expected `<dx> <dy>`, found {line:?}"),
            ));
        }
        let dx: f64 = parse_num(lineno, "dx", toks[0])?;
        let dy: f64 = parse_num(lineno, "dy", toks[1])?;
        if !dx.is_finite() || !dy.is_finite() {
            return Err(Error::parse(lineno, "non-finite motion vector"));
        }
        mv.push(Motion::new(dx, dy));
    }
    if mv.len() != expected {
        return Err(Error::CountMismatch {
            expected,
            found: mv.len(),
        });
    }
    MotionField::new(width, height, mv)
}

pub fn parse_fmv1(text: &str) -> Result<FrameRecords> {
    let mut lines = data_lines(text);
    let dims = parse_header(lines.next(), "FMV1", 3)?;
    let (width, height, frame_count) = (dims[0], dims[1], dims[2]);
    if frame_count == 0 {
        return Err(Error::Header("FMV1 frame count must be at least 1".into()));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 7 {
            return Err(Error::parse(
                lineno,
                format!("expected 7 fields per record, found {}", toks.len()),
            ));
        }
        let dx: f64 = parse_num(lineno, "dx", toks[5])?;
        let dy: f64 = parse_num(lineno, "dy", toks[6])?;
        if !dx.is_finite() || !dy.is_finite() {
            return Err(Error::parse(lineno, "non-finite motion vector"));
        }
        records.push(BlockMotionRecord {
            frame: parse_num(lineno, "frame", toks[0])?,
            block_x: parse_num(lineno, "block_x", toks[1])?,
            block_y: parse_num(lineno, "block_y", toks[2])?,
            block_w: parse_num(lineno, "block_w", toks[3])?,
            block_h: parse_num(lineno, "block_h", toks[4])?,
            motion: Motion::new(dx, dy),
        });
    }
    Ok(FrameRecords {
        width,
        height,
        frame_count,
        records,
    })
}

pub fn load_mean_field(path: impl AsRef<Path>) -> Result<MotionField> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mvf1(&text)
}

pub fn load_frame_records(path: impl AsRef<Path>) -> Result<FrameRecords> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fmv1(&text)
}

/// Loads either format, dispatching on the header magic.
pub fn load_any(path: impl AsRef<Path>) -> Result<MotionField> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match text.split_whitespace().next() {
        Some("FMV1") => parse_fmv1(&text)?.mean_field(),
        _ => parse_mvf1(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(
        frame: usize,
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        dx: f64,
        dy: f64,
    ) -> BlockMotionRecord {
        BlockMotionRecord {
            frame,
            block_x: x,
            block_y: y,
            block_w: w,
            block_h: h,
            motion: Motion::new(dx, dy),
        }
    }

    #[test]
    fn macroblock_replicates_to_sixteen_cells() {
        let frames = replicate(&[rec(0, 0, 0, 4, 4, 5.0, 0.0)], 6, 5, 1).unwrap();
        let g = &frames[0];
        for y in 0..5 {
            for x in 0..6 {
                let want = if x < 4 && y < 4 {
                    Motion::new(5.0, 0.0)
                } else {
                    Motion::ZERO
                };
                assert_eq!(g.get(x, y), want, "cell ({x},{y})");
            }
        }
    }

    #[test]
    fn empty_records_fill_zero() {
        let frames = replicate(&[], 2, 2, 1).unwrap();
        assert!(frames[0].cells().iter().all(|m| *m == Motion::ZERO));
    }

    #[test]
    fn record_past_edge_is_out_of_bounds() {
        let err = replicate(&[rec(0, 3, 0, 2, 1, 1.0, 1.0)], 4, 4, 1).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { record: 0, .. }), "{err}");
    }

    #[test]
    fn overlapping_records_rejected() {
        let recs = [rec(0, 0, 0, 2, 2, 1.0, 0.0), rec(0, 1, 1, 1, 1, 0.0, 1.0)];
        let err = replicate(&recs, 4, 4, 1).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Overlap {
                    record: 1,
                    x: 1,
                    y: 1,
                    ..
                }
            ),
            "{err}"
        );
        // same cell in another frame is fine
        let recs = [rec(0, 0, 0, 2, 2, 1.0, 0.0), rec(1, 1, 1, 1, 1, 0.0, 1.0)];
        assert!(replicate(&recs, 4, 4, 2).is_ok());
    }

    #[test]
    fn illegal_extent_and_frame_rejected() {
        assert!(matches!(
            replicate(&[rec(0, 0, 0, 3, 1, 0.0, 0.0)], 4, 4, 1),
            Err(Error::InvalidExtent { .. })
        ));
        assert!(matches!(
            replicate(&[rec(2, 0, 0, 1, 1, 0.0, 0.0)], 4, 4, 2),
            Err(Error::FrameOutOfRange { .. })
        ));
        assert!(replicate(&[], 4, 4, 0).is_err());
    }

    fn single(dx: f64, dy: f64) -> FrameGrid {
        FrameGrid::from_cells(1, 1, vec![Motion::new(dx, dy)]).unwrap()
    }

    #[test]
    fn mean_examples() {
        let f = temporal_mean(&[single(1.0, 0.0), single(3.0, 0.0)]).unwrap();
        assert_eq!(f.vectors()[0], Motion::new(2.0, 0.0));
        assert_eq!(f.magnitude(0), 2.0);
        assert_eq!(f.orientation(0), 0.0);

        let f = temporal_mean(&[single(1.0, 0.0), single(-1.0, 0.0)]).unwrap();
        assert_eq!(f.vectors()[0], Motion::ZERO);
        assert_eq!(f.magnitude(0), 0.0);

        let f = temporal_mean(&[single(0.0, 1.0), single(0.0, 1.0), single(0.0, 4.0)]).unwrap();
        // (0+0+0)/3, (1+1+4)/3
        assert_eq!(f.vectors()[0], Motion::new(0.0, 2.0));
        assert_eq!(f.orientation(0), 90.0);
    }

    #[test]
    fn mean_rejects_mismatched_frames() {
        let err = temporal_mean(&[FrameGrid::zeros(2, 2), FrameGrid::zeros(2, 3)]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(temporal_mean(&[]).is_err());
    }

    #[test]
    fn mvf1_examples() {
        let f = parse_mvf1("MVF1 2 1\n1 0\n0 2\n").unwrap();
        assert_eq!((f.width(), f.height()), (2, 1));
        assert_eq!(f.vectors(), &[Motion::new(1.0, 0.0), Motion::new(0.0, 2.0)]);

        assert!(matches!(
            parse_mvf1("MVF1 2 1\n1 0\n"),
            Err(Error::CountMismatch {
                expected: 2,
                found: 1
            })
        ));
        assert!(matches!(
            parse_mvf1("MVF9 2 1\n1 0\n0 2\n"),
            Err(Error::Header(_))
        ));
        assert!(matches!(parse_mvf1(""), Err(Error::Header(_))));
        assert!(matches!(
            parse_mvf1("MVF1 2 1\n1 0\n0 x\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn fmv1_parses_and_averages() {
        let text = "FMV1 4 4 2\n0 0 0 4 4 2 0\n1 0 0 2 2 0 4\n";
        let parsed = parse_fmv1(text).unwrap();
        assert_eq!(parsed.records.len(), 2);
        let field = parsed.mean_field().unwrap();
        assert_eq!(field.vectors()[0], Motion::new(1.0, 2.0));
        assert_eq!(field.vectors()[3], Motion::new(1.0, 0.0));

        assert!(matches!(
            parse_fmv1("FMV1 4 4 1\n0 0 0 4 4 2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_fmv1("FMV1 4 4\n"), Err(Error::Header(_))));
    }

    #[test]
    fn replicate_then_mean_through_file_text() {
        let parsed = parse_fmv1("FMV1 2 2 1\n0 1 0 1 2 -3 0.5\n").unwrap();
        let f = parsed.mean_field().unwrap();
        assert_eq!(f.vectors()[1], Motion::new(-3.0, 0.5));
        assert_eq!(f.vectors()[3], Motion::new(-3.0, 0.5));
        assert_eq!(f.vectors()[0], Motion::ZERO);
    }

    fn grid_strategy() -> impl Strategy<Value = (usize, usize, Vec<Vec<(f64, f64)>>)> {
        (1usize..5, 1usize..5, 1usize..4).prop_flat_map(|(w, h, n)| {
            (
                Just(w),
                Just(h),
                prop::collection::vec(
                    prop::collection::vec((-20f64..20.0, -20f64..20.0), w * h),
                    n,
                ),
            )
        })
    }

    fn to_frames(w: usize, h: usize, frames: &[Vec<(f64, f64)>], scale: f64) -> Vec<FrameGrid> {
        frames
            .iter()
            .map(|f| {
                let cells = f
                    .iter()
                    .map(|&(dx, dy)| Motion::new(dx * scale, dy * scale))
                    .collect();
                FrameGrid::from_cells(w, h, cells).unwrap()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn mean_is_linear((w, h, frames) in grid_strategy(), s in -4f64..4.0) {
            let base = temporal_mean(&to_frames(w, h, &frames, 1.0)).unwrap();
            let scaled = temporal_mean(&to_frames(w, h, &frames, s)).unwrap();
            for (a, b) in base.vectors().iter().zip(scaled.vectors()) {
                prop_assert!((a.dx * s - b.dx).abs() <= 1e-9 * (1.0 + b.dx.abs()));
                prop_assert!((a.dy * s - b.dy).abs() <= 1e-9 * (1.0 + b.dy.abs()));
            }
        }

        #[test]
        fn mean_of_identical_frames_is_the_frame((w, h, frames) in grid_strategy(), n in 1usize..5) {
            let one = to_frames(w, h, &frames[..1], 1.0).remove(0);
            let many = vec![one.clone(); n];
            let mean = temporal_mean(&many).unwrap();
            for (a, b) in one.cells().iter().zip(mean.vectors()) {
                prop_assert!((a.dx - b.dx).abs() <= 1e-12 * (1.0 + a.dx.abs()));
                prop_assert!((a.dy - b.dy).abs() <= 1e-12 * (1.0 + a.dy.abs()));
            }
        }

        #[test]
        fn mvf1_round_trips_bit_identically((w, h, frames) in grid_strategy()) {
            let field = temporal_mean(&to_frames(w, h, &frames, 1.0)).unwrap();
            let back = parse_mvf1(&field.to_mvf1()).unwrap();
            prop_assert_eq!(back, field);
        }

        #[test]
        fn replicated_coverage_counts(blocks in prop::collection::vec((0usize..2, 0usize..2, 0usize..3, 0usize..3), 0..6)) {
            // non-overlapping by construction: each record owns a distinct 4x4 tile
            let mut seen = std::collections::HashSet::new();
            let mut recs = Vec::new();
            for (tx, ty, wi, hi) in blocks {
                if !seen.insert((tx, ty)) { continue; }
                let ext = [1, 2, 4];
                recs.push(rec(0, tx * 4, ty * 4, ext[wi], ext[hi], 1.0, -1.0));
            }
            let grid = &replicate(&recs, 8, 8, 1).unwrap()[0];
            let covered: usize = recs.iter().map(|r| r.block_w * r.block_h).sum();
            let nonzero = grid.cells().iter().filter(|m| **m != Motion::ZERO).count();
            prop_assert_eq!(covered, nonzero);
        }
    }
}
