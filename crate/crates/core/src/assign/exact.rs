//! Exhaustive search over route choices.

use super::matching::Matcher;
use super::{AssignmentProblem, AssignmentResult, Internal, Selection};
use crate::error::{Error, Result};

/// Options worth branching on per SPV: routes that serve something and are
/// not beaten by another route serving a superset at lower cost (or the same
/// cost and a smaller index).
fn useful_options(problem: &AssignmentProblem) -> Vec<Vec<usize>> {
    problem
        .spvs
        .iter()
        .map(|s| {
            let r = &s.routes;
            (0..r.len())
                .filter(|&a| {
                    !r[a].servable.is_empty()
                        && !(0..r.len()).any(|b| {
                            b != a
                                && is_subset(&r[a].servable, &r[b].servable)
                                && (r[b].cost < r[a].cost
                                    || (r[b].cost == r[a].cost && (r[b].route_index < r[a].route_index || r[b].servable.len() > r[a].servable.len())))
                        })
                })
                .collect()
        })
        .collect()
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    let mut j = 0;
    for x in a {
        while j < b.len() && b[j] < *x {
            j += 1;
        }
        if j == b.len() || b[j] != *x {
            return false;
        }
    }
    true
}

pub(crate) fn solve_internal(problem: &AssignmentProblem, limit: u128) -> Result<Internal> {
    let options = useful_options(problem);
    let mut size: u128 = 1;
    for o in &options {
        size = size.saturating_mul(1 + o.len() as u128);
        if size > limit {
            return Err(Error::Capacity {
                solver: "exact assignment",
                size,
                limit,
            });
        }
    }
    let mut sel: Selection = vec![None; problem.spvs.len()];
    let mut best: Option<(f64, Internal)> = None;
    search(problem, &options, 0, &mut sel, &mut best);
    Ok(best.expect("at least the all-null selection").1)
}

fn search(problem: &AssignmentProblem, options: &[Vec<usize>], k: usize, sel: &mut Selection, best: &mut Option<(f64, Internal)>) {
    if k == options.len() {
        let mut m = Matcher::new(problem, sel);
        m.augment_all();
        let value = problem.reward * m.matched() as f64 - problem.selection_cost(sel);
        if best.as_ref().map_or(true, |(b, _)| value > b + 1e-9) {
            *best = Some((
                value,
                Internal {
                    selection: sel.clone(),
                    matched_to: m.matched_to,
                    converged: true,
                },
            ));
        }
        return;
    }
    sel[k] = None;
    search(problem, options, k + 1, sel, best);
    for &o in &options[k] {
        sel[k] = Some(o);
        search(problem, options, k + 1, sel, best);
    }
    sel[k] = None;
}

/// Globally optimal assignment by enumerating every useful route combination.
/// Refuses with a capacity error above `limit` combinations.
pub fn solve_assignment_exact(problem: &AssignmentProblem, limit: u128) -> Result<AssignmentResult> {
    Ok(solve_internal(problem, limit)?.into_result(problem))
}
