//! Alpha-expansion over the grid CRF.
//!
//! Each move lets every node either keep its label or switch to a fixed label
//! alpha; the best such labeling is found exactly as a minimum s-t cut.
//! Sweeps visit labels in ascending order until a sweep brings no decrease.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::crf::{CrfProblem, Label, Labeling, PotentialTables};
use crate::error::{Error, Result};
use crate::maxflow::{max_flow, FlowNetwork};

pub const MAX_SWEEPS: usize = 20;

/// Energy bookkeeping for a single expansion move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveRecord {
    pub sweep: usize,
    pub alpha: Label,
    pub energy_before: f64,
    pub energy_after: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub labeling: Labeling,
    pub energy: f64,
    /// Energy of the initial labeling.
    pub initial_energy: f64,
    /// Energy at the end of each sweep.
    pub sweep_energies: Vec<f64>,
    pub sweeps: usize,
    pub moves: Vec<MoveRecord>,
    pub elapsed: Duration,
}

impl SolverReport {
    pub fn accepted_moves(&self) -> usize {
        self.moves.iter().filter(|m| m.accepted).count()
    }

    /// Per-sweep energy table for diagnostics.
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "sweep  energy             accepted").unwrap();
        writeln!(out, "{:>5}  {:<17.6}  -", 0, self.initial_energy).unwrap();
        for (i, e) in self.sweep_energies.iter().enumerate() {
            let acc = self
                .moves
                .iter()
                .filter(|m| m.sweep == i + 1 && m.accepted)
                .count();
            writeln!(out, "{:>5}  {:<17.6}  {}", i + 1, e, acc).unwrap();
        }
        out
    }
}

/// Pairwise terms must satisfy V(a,a) + V(b,c) <= V(b,a) + V(a,c) for
/// expansion to be solvable by a cut. With a non-negative Potts weight this
/// reduces to `w >= 0`.
fn check_metric(tables: &PotentialTables) -> Result<()> {
    match tables
        .edges()
        .iter()
        .find(|(_, _, w)| w.is_nan() || *w < 0.0 || !w.is_finite())
    {
        Some(&(u, v, w)) => Err(Error::NonMetricPairwise(format!(
            "edge ({u},{v}) has weight {w}"
        ))),
        None => Ok(()),
    }
}

/// Builds the expansion graph and returns the optimal keep/switch decision
/// for each node (`true` = switch to `alpha`).
///
/// Source side means "keep the current label", sink side means "take
/// alpha". Every boundary edge between two nodes that hold different
/// non-alpha labels gets an auxiliary node.
fn best_expansion(tables: &PotentialTables, labels: &[Label], alpha: Label) -> Result<Vec<bool>> {
    let n = labels.len();
    // t-link costs: keep[u] paid when u keeps its label, switch[u] when it moves
    let mut keep = vec![0.0f64; n];
    let mut switch = vec![0.0f64; n];
    for u in 0..n {
        if labels[u] != alpha {
            keep[u] = tables.unary(u, labels[u]);
            switch[u] = tables.unary(u, alpha);
        }
    }

    let mut links: Vec<(usize, usize, f64)> = Vec::new();
    let mut aux: Vec<(usize, usize, f64)> = Vec::new();
    for &(u, v, w) in tables.edges() {
        let (lu, lv) = (labels[u], labels[v]);
        match (lu == alpha, lv == alpha) {
            (true, true) => {}
            (true, false) => keep[v] += w,
            (false, true) => keep[u] += w,
            (false, false) if lu == lv => links.push((u, v, w)),
            (false, false) => aux.push((u, v, w)),
        }
    }

    let free: Vec<usize> = (0..n).filter(|&u| labels[u] != alpha).collect();
    if free.is_empty() {
        return Ok(vec![false; n]);
    }
    let source = n + aux.len();
    let sink = source + 1;
    let mut net =
        FlowNetwork::with_capacity(sink + 1, source, sink, n + links.len() + 3 * aux.len());
    for &u in &free {
        // only the difference between the two t-links matters
        let m = keep[u].min(switch[u]);
        let (k, s) = (keep[u] - m, switch[u] - m);
        if s > 0.0 {
            net.add_edge(source, u, s, 0.0);
        }
        if k > 0.0 {
            net.add_edge(u, sink, k, 0.0);
        }
    }
    for &(u, v, w) in &links {
        if w > 0.0 {
            net.add_edge(u, v, w, w);
        }
    }
    for (i, &(u, v, w)) in aux.iter().enumerate() {
        // Potts: V(lu, alpha) = V(alpha, lv) = V(lu, lv) = w
        if w > 0.0 {
            let a = n + i;
            net.add_edge(u, a, w, w);
            net.add_edge(a, v, w, w);
            net.add_edge(a, sink, w, 0.0);
        }
    }
    let cut = max_flow(&net)?;
    Ok((0..n)
        .map(|u| labels[u] != alpha && !cut.is_source_side(u))
        .collect())
}

fn apply_move(labels: &[Label], switch: &[bool], alpha: Label) -> Vec<Label> {
    labels
        .iter()
        .zip(switch)
        .map(|(&l, &s)| if s { alpha } else { l })
        .collect()
}

fn check_input(problem: &CrfProblem<'_>, labeling: &Labeling) -> Result<()> {
    if labeling.width() != problem.width() || labeling.height() != problem.height() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", problem.width(), problem.height()),
            found: format!("{}x{}", labeling.width(), labeling.height()),
        });
    }
    if labeling.labels().iter().any(|&l| l >= problem.num_labels()) {
        return Err(Error::InvalidLabels(
            "labeling uses labels outside the label set".into(),
        ));
    }
    Ok(())
}

/// Runs one expansion move on `alpha`, returning the best labeling in which
/// every node keeps its label or takes `alpha`. The input labeling is
/// returned unchanged unless the move strictly lowers the energy.
pub fn expansion_move(
    problem: &CrfProblem<'_>,
    labeling: &Labeling,
    alpha: Label,
) -> Result<Labeling> {
    check_input(problem, labeling)?;
    if alpha >= problem.num_labels() {
        return Err(Error::InvalidLabels(format!(
            "alpha {alpha} outside label set"
        )));
    }
    let tables = problem.tables();
    check_metric(&tables)?;
    let (labels, _, _) = step(&tables, labeling.labels(), alpha)?;
    Labeling::from_vec(problem.width(), problem.height(), labels)
}

/// One move against precomputed tables: (labels, energy before, energy after).
fn step(
    tables: &PotentialTables,
    labels: &[Label],
    alpha: Label,
) -> Result<(Vec<Label>, f64, f64)> {
    let before = tables.energy(labels);
    let switch = best_expansion(tables, labels, alpha)?;
    if !switch.iter().any(|&s| s) {
        return Ok((labels.to_vec(), before, before));
    }
    let candidate = apply_move(labels, &switch, alpha);
    let after = tables.energy(&candidate);
    if after < before {
        Ok((candidate, before, after))
    } else {
        Ok((labels.to_vec(), before, before))
    }
}

/// Minimizes the CRF energy by repeated expansion sweeps, starting from an
/// all-background labeling unless `initial` is given.
pub fn minimize(problem: &CrfProblem<'_>, initial: Option<&Labeling>) -> Result<SolverReport> {
    let start = Instant::now();
    let mut labeling = match initial {
        Some(l) => {
            check_input(problem, l)?;
            l.clone()
        }
        None => Labeling::background(problem.width(), problem.height()),
    };
    let tables = problem.tables();
    check_metric(&tables)?;

    let initial_energy = tables.energy(labeling.labels());
    let mut energy = initial_energy;
    let mut sweep_energies = Vec::new();
    let mut moves = Vec::new();
    for sweep in 1..=MAX_SWEEPS {
        let mut improved = false;
        for alpha in 0..problem.num_labels() {
            let (labels, before, after) = step(&tables, labeling.labels(), alpha)?;
            let accepted = after < before;
            moves.push(MoveRecord {
                sweep,
                alpha,
                energy_before: before,
                energy_after: after,
                accepted,
            });
            if accepted {
                labeling.labels_mut().copy_from_slice(&labels);
                energy = after;
                improved = true;
            }
        }
        sweep_energies.push(energy);
        if !improved {
            break;
        }
    }
    Ok(SolverReport {
        labeling,
        energy,
        initial_energy,
        sweeps: sweep_energies.len(),
        sweep_energies,
        moves,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{CrfParams, LabelSet, BACKGROUND};
    use crate::mvfield::{Motion, MotionField};

    fn polar(mag: f64, deg: f64) -> Motion {
        let r = deg.to_radians();
        Motion::new(mag * r.cos(), mag * r.sin())
    }

    fn all_labelings(n: usize, k: usize) -> impl Iterator<Item = Vec<Label>> {
        (0..k.pow(n as u32)).map(move |mut code| {
            let mut v = vec![0; n];
            for slot in v.iter_mut().rev() {
                *slot = code % k;
                code /= k;
            }
            v
        })
    }

    #[test]
    fn alpha_everywhere_is_a_no_op() {
        let field = MotionField::uniform(3, 2, Motion::new(2.0, 0.0)).unwrap();
        let p = CrfProblem::new(
            &field,
            LabelSet::new([0.0, 90.0]).unwrap(),
            CrfParams::default(),
        )
        .unwrap();
        let lab = Labeling::constant(3, 2, 2);
        assert_eq!(expansion_move(&p, &lab, 2).unwrap(), lab);
    }

    #[test]
    fn one_by_two_move_matches_enumeration() {
        let field = MotionField::new(2, 1, vec![polar(2.0, 10.0), polar(0.5, 200.0)]).unwrap();
        let params = CrfParams {
            tau: 1.0,
            c1: 60.0,
            c2: 20.0,
            c3: 0.1,
        };
        let p = CrfProblem::new(&field, LabelSet::new([0.0]).unwrap(), params).unwrap();
        for start in all_labelings(2, 2) {
            let lab = Labeling::from_vec(2, 1, start.clone()).unwrap();
            for alpha in 0..2 {
                let got = expansion_move(&p, &lab, alpha).unwrap();
                let best = all_labelings(2, 2)
                    .filter(|c| c.iter().zip(&start).all(|(&n, &o)| n == o || n == alpha))
                    .map(|c| p.energy(&Labeling::from_vec(2, 1, c).unwrap()).unwrap())
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    (p.energy(&got).unwrap() - best).abs() < 1e-9,
                    "start {start:?} alpha {alpha}"
                );
            }
        }
    }

    #[test]
    fn zero_smoothing_decouples_nodes() {
        let field = MotionField::new(
            3,
            1,
            vec![polar(3.0, 5.0), polar(3.0, 95.0), polar(0.1, 0.0)],
        )
        .unwrap();
        let params = CrfParams {
            c3: 0.0,
            ..CrfParams::default()
        };
        let p = CrfProblem::new(&field, LabelSet::new([0.0, 90.0]).unwrap(), params).unwrap();
        let start = Labeling::from_vec(3, 1, vec![2, 1, 1]).unwrap();
        let got = expansion_move(&p, &start, 1).unwrap();
        // node 0: unary(2)=95 vs unary(1)=5 -> switch; node 1 keeps 1; node 2 already 1
        assert_eq!(got.labels(), &[1, 1, 1]);
        let got = expansion_move(&p, &start, BACKGROUND).unwrap();
        // node 0 keeps 90 (85 < c1), node 1 leaves 0 (95 > c1), node 2 is still
        assert_eq!(got.labels(), &[2, BACKGROUND, BACKGROUND]);
    }

    #[test]
    fn unanimous_optimum() {
        let field = MotionField::uniform(4, 3, polar(5.0, 90.0)).unwrap();
        let p = CrfProblem::new(&field, LabelSet::coarse(), CrfParams::default()).unwrap();
        let report = minimize(&p, None).unwrap();
        let ninety = 1 + LabelSet::coarse()
            .orientations()
            .iter()
            .position(|&t| t == 90.0)
            .unwrap();
        assert!(report.labeling.labels().iter().all(|&l| l == ninety));
        assert!(report.energy.abs() < 1e-9);
        assert_eq!(
            report.energy.to_bits(),
            p.energy(&report.labeling).unwrap().to_bits()
        );
        assert!(report.sweep_energies.windows(2).all(|w| w[1] <= w[0]));
        assert!(report
            .moves
            .iter()
            .all(|m| m.energy_after <= m.energy_before));
        assert!(report.sweeps <= MAX_SWEEPS);
    }

    #[test]
    fn stops_after_first_quiet_sweep() {
        let field = MotionField::uniform(2, 2, Motion::ZERO).unwrap();
        let p = CrfProblem::new(&field, LabelSet::coarse(), CrfParams::default()).unwrap();
        let report = minimize(&p, None).unwrap();
        assert_eq!(report.sweeps, 1);
        assert_eq!(report.energy, 0.0);
        assert_eq!(report.accepted_moves(), 0);
        assert!(report.table().lines().count() >= 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let field = MotionField::uniform(2, 2, Motion::ZERO).unwrap();
        let p =
            CrfProblem::new(&field, LabelSet::new([0.0]).unwrap(), CrfParams::default()).unwrap();
        assert!(minimize(&p, Some(&Labeling::background(3, 2))).is_err());
        assert!(expansion_move(&p, &Labeling::background(2, 2), 2).is_err());
        assert!(expansion_move(&p, &Labeling::constant(2, 2, 7), 1).is_err());
    }
}
