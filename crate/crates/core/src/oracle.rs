//! Exhaustive reference solvers used to check the fast paths on small
//! instances: CRF minimization, s-t minimum cut and label assignment.

use crate::crf::{CrfProblem, Label, Labeling};
use crate::error::{Error, Result};
use crate::maxflow::FlowNetwork;

pub const MAX_ENUMERATION: f64 = 1e7;

/// Global minimum of the CRF energy by enumerating every labeling.
///
/// Labelings are visited in lexicographic order (node 0 most significant)
/// and only strict improvements are kept, so ties resolve to the
/// lexicographically smallest labeling.
pub fn brute_force_minimize(problem: &CrfProblem<'_>) -> Result<(Labeling, f64)> {
    let n = problem.num_nodes();
    let k = problem.num_labels();
    let space = (k as f64).powi(n as i32);
    if space > MAX_ENUMERATION {
        return Err(Error::TooLarge(space));
    }
    let (w, h) = (problem.width(), problem.height());
    let mut current = Labeling::background(w, h);
    let mut best = current.clone();
    let mut best_energy = problem.energy(&current)?;
    loop {
        // odometer increment, last node fastest
        let labels = current.labels_mut();
        let mut i = n;
        loop {
            if i == 0 {
                return Ok((best, best_energy));
            }
            i -= 1;
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
        }
        let e = problem.energy(&current)?;
        if e < best_energy {
            best_energy = e;
            best = current.clone();
        }
    }
}

/// Minimum cut capacity over every partition of the non-terminal nodes.
pub fn brute_force_min_cut(net: &FlowNetwork) -> Result<(f64, Vec<bool>)> {
    net.validate()?;
    let inner: Vec<usize> = (0..net.num_nodes())
        .filter(|&u| u != net.source() && u != net.sink())
        .collect();
    if inner.len() > 24 {
        return Err(Error::TooLarge(2f64.powi(inner.len() as i32)));
    }
    let arcs: Vec<(usize, usize, f64)> = net.arcs().collect();
    let mut best: Option<(f64, Vec<bool>)> = None;
    for mask in 0u32..(1u32 << inner.len()) {
        let mut side = vec![false; net.num_nodes()];
        side[net.source()] = true;
        for (bit, &u) in inner.iter().enumerate() {
            side[u] = mask & (1 << bit) != 0;
        }
        let mut cap = 0.0;
        for &(t, h, c) in &arcs {
            if side[t] && !side[h] {
                cap += c;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| cap < *b) {
            best = Some((cap, side));
        }
    }
    Ok(best.expect("at least the empty partition"))
}

/// Maximum-weight one-to-one assignment of rows to columns by enumeration.
/// Rows may stay unassigned. Returns `(row, column)` pairs and the total.
pub fn brute_force_assignment(weights: &[Vec<u64>]) -> (Vec<(usize, usize)>, u64) {
    fn go(
        row: usize,
        weights: &[Vec<u64>],
        used: &mut Vec<bool>,
        chosen: &mut Vec<(usize, usize)>,
        acc: u64,
        best: &mut (Vec<(usize, usize)>, u64),
    ) {
        if row == weights.len() {
            if acc > best.1 {
                *best = (chosen.clone(), acc);
            }
            return;
        }
        go(row + 1, weights, used, chosen, acc, best);
        for col in 0..weights[row].len() {
            if !used[col] {
                used[col] = true;
                chosen.push((row, col));
                go(
                    row + 1,
                    weights,
                    used,
                    chosen,
                    acc + weights[row][col],
                    best,
                );
                chosen.pop();
                used[col] = false;
            }
        }
    }
    let cols = weights.first().map_or(0, Vec::len);
    let mut best = (Vec::new(), 0);
    go(
        0,
        weights,
        &mut vec![false; cols],
        &mut Vec::new(),
        0,
        &mut best,
    );
    best
}

/// Every labeling of `n` nodes over `k` labels, lexicographic.
pub fn enumerate_labelings(n: usize, k: usize) -> impl Iterator<Item = Vec<Label>> {
    (0..k.pow(n as u32)).map(move |mut code| {
        let mut v = vec![0; n];
        for slot in v.iter_mut().rev() {
            *slot = code % k;
            code /= k;
        }
        v
    })
}
