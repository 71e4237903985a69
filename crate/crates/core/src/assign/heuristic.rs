//! Greedy route picking followed by single-SPV improvement moves, for
//! problems too large to search exhaustively.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::matching::Matcher;
use super::{AssignmentProblem, AssignmentResult, Internal, Selection};

const MAX_PASSES: usize = 25;

#[derive(PartialEq)]
struct Entry {
    gain: f64,
    spv: usize,
    option: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.spv.cmp(&self.spv))
            .then_with(|| other.option.cmp(&self.option))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn gain(problem: &AssignmentProblem, k: usize, o: usize, free: &[bool]) -> f64 {
    let s = &problem.spvs[k];
    let r = &s.routes[o];
    let n = r.servable.iter().filter(|&&p| free[p]).count().min(s.cap as usize);
    problem.reward * n as f64 - r.cost
}

/// Lazy greedy: repeatedly commit the route with the largest marginal gain.
fn greedy(problem: &AssignmentProblem) -> Selection {
    let mut free = vec![true; problem.pdos.len()];
    let mut sel: Selection = vec![None; problem.spvs.len()];
    let mut heap = BinaryHeap::new();
    for (k, s) in problem.spvs.iter().enumerate() {
        for o in 0..s.routes.len() {
            let g = gain(problem, k, o, &free);
            if g > 0.0 {
                heap.push(Entry { gain: g, spv: k, option: o });
            }
        }
    }
    while let Some(e) = heap.pop() {
        if sel[e.spv].is_some() {
            continue;
        }
        let g = gain(problem, e.spv, e.option, &free);
        if g <= 0.0 {
            continue;
        }
        if g < e.gain {
            heap.push(Entry { gain: g, ..e });
            continue;
        }
        sel[e.spv] = Some(e.option);
        let s = &problem.spvs[e.spv];
        let mut taken = 0;
        for &p in &s.routes[e.option].servable {
            if taken == s.cap {
                break;
            }
            if free[p] {
                free[p] = false;
                taken += 1;
            }
        }
    }
    sel
}

pub(crate) fn solve_internal(problem: &AssignmentProblem) -> Internal {
    let mut sel = greedy(problem);
    let mut m = Matcher::new(problem, &sel);
    m.augment_all();
    let mut value = problem.reward * m.matched() as f64 - problem.selection_cost(&sel);

    for _ in 0..MAX_PASSES {
        let mut improved = false;
        for k in 0..problem.spvs.len() {
            let s = &problem.spvs[k];
            let held = m.load[k].len();
            let cur_cost = sel[k].map_or(0.0, |o| s.routes[o].cost);
            let mut best: Option<(f64, Option<usize>)> = None;
            let mut consider = |o: Option<usize>, est: f64| {
                if est > 1e-9 && best.map_or(true, |(b, _)| est > b) {
                    best = Some((est, o));
                }
            };
            if sel[k].is_some() {
                consider(None, cur_cost - problem.reward * held as f64);
            }
            for (o, r) in s.routes.iter().enumerate() {
                if Some(o) == sel[k] {
                    continue;
                }
                let avail = r
                    .servable
                    .iter()
                    .filter(|&&p| m.matched_to[p].is_none() || m.matched_to[p] == Some(k))
                    .count()
                    .min(s.cap as usize);
                consider(Some(o), problem.reward * (avail as f64 - held as f64) - (r.cost - cur_cost));
            }
            let Some((_, choice)) = best else { continue };

            let saved = (sel[k], m.clone());
            sel[k] = choice;
            m.release(k);
            m.rebuild_adjacency(problem, &sel);
            m.augment_all();
            let new_value = problem.reward * m.matched() as f64 - problem.selection_cost(&sel);
            if new_value > value + 1e-9 {
                value = new_value;
                improved = true;
            } else {
                sel[k] = saved.0;
                m = saved.1;
            }
        }
        if !improved {
            break;
        }
    }
    Internal {
        selection: sel,
        matched_to: m.matched_to,
        converged: false,
    }
}

/// Heuristic assignment: feasible, never flagged as proven optimal.
pub fn solve_assignment_heuristic(problem: &AssignmentProblem) -> AssignmentResult {
    solve_internal(problem).into_result(problem)
}
