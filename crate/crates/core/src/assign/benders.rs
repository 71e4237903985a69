//! Benders decomposition over route choices: the master picks routes under
//! accumulated optimality cuts, the matching subproblem prices them.

use super::matching::solve_subproblem;
use super::{AssignConfig, AssignmentProblem, AssignmentResult, Internal, Selection};

/// `Z <= constant + sum of coefficients[k][o] over chosen (k, o)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    pub constant: f64,
    pub coefficients: Vec<Vec<f64>>,
    pub pdo_duals: Vec<f64>,
    pub route_duals: Vec<Vec<f64>>,
}

impl Cut {
    fn value(&self, sel: &[Option<usize>]) -> f64 {
        self.constant
            + sel
                .iter()
                .enumerate()
                .filter_map(|(k, o)| o.map(|o| self.coefficients[k][o]))
                .sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRecord {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BendersState {
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub cuts: Vec<Cut>,
    pub history: Vec<BoundRecord>,
    pub iterations: usize,
    pub epsilon: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BendersOutcome {
    pub result: AssignmentResult,
    pub state: BendersState,
}

pub(crate) fn solve_internal(problem: &AssignmentProblem, config: &AssignConfig) -> (Internal, BendersState) {
    let eps = config.epsilon;
    let mut state = BendersState {
        lower_bound: f64::NEG_INFINITY,
        upper_bound: f64::INFINITY,
        cuts: Vec::new(),
        history: Vec::new(),
        iterations: 0,
        epsilon: eps,
        converged: false,
    };
    let mut z: Selection = vec![None; problem.spvs.len()];
    let mut incumbent: Option<Internal> = None;

    while state.iterations < config.max_iterations {
        state.iterations += 1;
        let sub = solve_subproblem(problem, &z);
        if sub.value > state.lower_bound {
            state.lower_bound = sub.value;
            incumbent = Some(Internal {
                selection: z.clone(),
                matched_to: sub.matched_to.clone(),
                converged: false,
            });
        }
        let coefficients = problem
            .spvs
            .iter()
            .enumerate()
            .map(|(k, s)| {
                s.routes
                    .iter()
                    .enumerate()
                    .map(|(o, r)| s.cap as f64 * sub.route_duals[k][o] - r.cost)
                    .collect()
            })
            .collect();
        state.cuts.push(Cut {
            constant: sub.pdo_duals.iter().sum(),
            coefficients,
            pdo_duals: sub.pdo_duals,
            route_duals: sub.route_duals,
        });

        let (master_value, next, complete) = solve_master(problem, &state.cuts, config.master_node_limit);
        if complete {
            state.upper_bound = state.upper_bound.min(master_value);
        }
        state.history.push(BoundRecord {
            iteration: state.iterations,
            lower_bound: state.lower_bound,
            upper_bound: state.upper_bound,
        });
        if !complete {
            break;
        }
        if state.upper_bound - state.lower_bound <= eps {
            state.converged = true;
            break;
        }
        z = next;
    }
    let mut best = incumbent.expect("at least one subproblem solve");
    best.converged = state.converged;
    (best, state)
}

/// Best route choice under all cuts by depth-first branch and bound. Returns
/// the master value, its selection and whether the search finished within
/// the node limit.
fn solve_master(problem: &AssignmentProblem, cuts: &[Cut], node_limit: usize) -> (f64, Selection, bool) {
    let n = problem.spvs.len();
    // optimistic remaining gain per cut from SPV k onwards
    let suffix: Vec<Vec<f64>> = cuts
        .iter()
        .map(|c| {
            let mut s = vec![0.0; n + 1];
            for k in (0..n).rev() {
                let best = c.coefficients[k].iter().copied().fold(0.0f64, f64::max);
                s[k] = s[k + 1] + best;
            }
            s
        })
        .collect();
    // branch on the options the latest cut likes best
    let last = cuts.last().expect("cuts");
    let order: Vec<Vec<Option<usize>>> = (0..n)
        .map(|k| {
            let mut opts: Vec<Option<usize>> = (0..problem.spvs[k].routes.len()).map(Some).collect();
            opts.push(None);
            let key = |o: &Option<usize>| o.map_or(0.0, |o| last.coefficients[k][o]);
            opts.sort_by(|a, b| key(b).total_cmp(&key(a)));
            opts
        })
        .collect();

    struct Search<'a> {
        cuts: &'a [Cut],
        suffix: &'a [Vec<f64>],
        order: &'a [Vec<Option<usize>>],
        best: f64,
        best_sel: Selection,
        nodes: usize,
        limit: usize,
    }
    impl Search<'_> {
        fn run(&mut self, k: usize, partial: &mut Vec<f64>, sel: &mut Selection) {
            self.nodes += 1;
            if self.nodes > self.limit {
                return;
            }
            let bound = partial
                .iter()
                .zip(self.suffix)
                .map(|(p, s)| p + s[k])
                .fold(f64::INFINITY, f64::min);
            if bound <= self.best + 1e-12 {
                return;
            }
            if k == sel.len() {
                self.best = bound;
                self.best_sel = sel.clone();
                return;
            }
            for &o in &self.order[k] {
                if let Some(o) = o {
                    for (t, c) in self.cuts.iter().enumerate() {
                        partial[t] += c.coefficients[k][o];
                    }
                }
                sel[k] = o;
                self.run(k + 1, partial, sel);
                if let Some(o) = o {
                    for (t, c) in self.cuts.iter().enumerate() {
                        partial[t] -= c.coefficients[k][o];
                    }
                }
            }
            sel[k] = None;
        }
    }

    let zero: Selection = vec![None; n];
    let start = cuts.iter().map(|c| c.value(&zero)).fold(f64::INFINITY, f64::min);
    let mut s = Search {
        cuts,
        suffix: &suffix,
        order: &order,
        best: start,
        best_sel: zero,
        nodes: 0,
        limit: node_limit,
    };
    let mut partial: Vec<f64> = cuts.iter().map(|c| c.constant).collect();
    let mut sel = vec![None; n];
    s.run(0, &mut partial, &mut sel);
    let complete = s.nodes <= s.limit;
    (s.best, s.best_sel, complete)
}

/// Benders decomposition. Stops when the bounds meet within `epsilon`, or
/// returns the best incumbent flagged non-converged when the iteration cap or
/// the master node limit is reached.
pub fn solve_assignment_benders(problem: &AssignmentProblem, config: &AssignConfig) -> BendersOutcome {
    let (best, state) = solve_internal(problem, config);
    BendersOutcome {
        result: best.into_result(problem),
        state,
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::{solve_assignment_exact, AssignConfig};
    use super::*;

    fn check(p: &AssignmentProblem) -> BendersOutcome {
        let out = solve_assignment_benders(p, &AssignConfig::default());
        assert!(out.state.converged);
        let mut prev: Option<BoundRecord> = None;
        for h in &out.state.history {
            assert!(h.lower_bound <= h.upper_bound + out.state.epsilon);
            if let Some(p) = prev {
                assert!(h.lower_bound >= p.lower_bound);
                assert!(h.upper_bound <= p.upper_bound);
            }
            prev = Some(*h);
        }
        out
    }

    #[test]
    fn empty_problem_converges_fast() {
        let p = problem(0, vec![(2, vec![opt(1, 1.0, &[])])], 100.0);
        let out = check(&p);
        assert_eq!(out.result.objective, 0.0);
        assert!(out.state.iterations <= 2);
    }

    #[test]
    fn single_route() {
        let p = problem(1, vec![(1, vec![opt(1, 0.25, &[0])])], 100.0);
        let out = check(&p);
        let exact = solve_assignment_exact(&p, 10_000).unwrap();
        assert!((out.result.objective - exact.objective).abs() < 1e-9);
    }

    #[test]
    fn agrees_with_exact() {
        for seed in 0..80 {
            let p = random_problem(seed, 8, 5, 15);
            let out = check(&p);
            let exact = solve_assignment_exact(&p, 1_000_000).unwrap();
            assert!((out.result.objective - exact.objective).abs() <= 1e-6, "seed {seed}");
            assert!((out.result.objective - out.state.lower_bound).abs() <= 1e-6);
        }
    }

    #[test]
    fn iteration_cap_flags_non_converged() {
        let p = random_problem(3, 8, 5, 15);
        let cfg = AssignConfig {
            max_iterations: 1,
            ..AssignConfig::default()
        };
        let out = solve_assignment_benders(&p, &cfg);
        if out.state.iterations == 1 && out.state.upper_bound - out.state.lower_bound > cfg.epsilon {
            assert!(!out.result.converged);
        }
    }
}
