//! Capacitated bipartite matching between PDOs and the chosen routes, with
//! dual prices read off a minimum cut.

use super::{AssignmentProblem, Selection};

#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemSolution {
    /// Matched SPV position per PDO position.
    pub matched_to: Vec<Option<usize>>,
    /// One price per PDO.
    pub pdo_duals: Vec<f64>,
    /// One price per (SPV, option).
    pub route_duals: Vec<Vec<f64>>,
    pub value: f64,
}

impl SubproblemSolution {
    pub fn matched(&self) -> usize {
        self.matched_to.iter().filter(|m| m.is_some()).count()
    }
}

/// Matching state for one selection, grown by augmenting paths.
#[derive(Clone, Debug)]
pub(crate) struct Matcher {
    /// SPV positions whose active route serves each PDO, ascending.
    adj: Vec<Vec<usize>>,
    cap: Vec<u32>,
    pub matched_to: Vec<Option<usize>>,
    pub load: Vec<Vec<usize>>,
}

impl Matcher {
    pub fn new(problem: &AssignmentProblem, sel: &[Option<usize>]) -> Self {
        let mut m = Self {
            adj: vec![Vec::new(); problem.pdos.len()],
            cap: problem.spvs.iter().map(|s| s.cap).collect(),
            matched_to: vec![None; problem.pdos.len()],
            load: vec![Vec::new(); problem.spvs.len()],
        };
        m.rebuild_adjacency(problem, sel);
        m
    }

    pub fn rebuild_adjacency(&mut self, problem: &AssignmentProblem, sel: &[Option<usize>]) {
        for a in &mut self.adj {
            a.clear();
        }
        for (k, o) in sel.iter().enumerate() {
            if let Some(o) = o {
                for &p in &problem.spvs[k].routes[*o].servable {
                    self.adj[p].push(k);
                }
            }
        }
    }

    /// Unmatches every PDO held by SPV `k`.
    pub fn release(&mut self, k: usize) {
        for p in std::mem::take(&mut self.load[k]) {
            self.matched_to[p] = None;
        }
    }

    /// Augments from every free PDO until the matching is maximum.
    pub fn augment_all(&mut self) {
        let mut visited = vec![false; self.cap.len()];
        for p in 0..self.adj.len() {
            if self.matched_to[p].is_none() && !self.adj[p].is_empty() && self.augment(p, &mut visited) {
                visited.iter_mut().for_each(|v| *v = false);
            }
        }
    }

    fn augment(&mut self, p: usize, visited: &mut [bool]) -> bool {
        for i in 0..self.adj[p].len() {
            let k = self.adj[p][i];
            if visited[k] {
                continue;
            }
            visited[k] = true;
            if (self.load[k].len() as u32) < self.cap[k] {
                self.load[k].push(p);
                self.matched_to[p] = Some(k);
                return true;
            }
            for j in 0..self.load[k].len() {
                let q = self.load[k][j];
                if self.augment(q, visited) {
                    self.load[k][j] = p;
                    self.matched_to[p] = Some(k);
                    return true;
                }
            }
        }
        false
    }

    pub fn matched(&self) -> usize {
        self.matched_to.iter().filter(|m| m.is_some()).count()
    }

    /// PDOs and SPVs reachable by alternating paths from free PDOs.
    fn residual_reach(&self) -> (Vec<bool>, Vec<bool>) {
        let mut pdo_in = vec![false; self.adj.len()];
        let mut spv_in = vec![false; self.cap.len()];
        let mut stack: Vec<usize> = (0..self.adj.len()).filter(|&p| self.matched_to[p].is_none()).collect();
        for &p in &stack {
            pdo_in[p] = true;
        }
        while let Some(p) = stack.pop() {
            for &k in &self.adj[p] {
                if self.matched_to[p] == Some(k) || spv_in[k] {
                    continue;
                }
                spv_in[k] = true;
                for &q in &self.load[k] {
                    if !pdo_in[q] {
                        pdo_in[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        (pdo_in, spv_in)
    }
}

/// Solves the assignment for fixed route choices: a maximum matching of
/// PDOs to chosen routes under stop caps, valued at reward per match minus
/// the chosen routes' cost. Dual prices come from the minimum cut.
pub fn solve_subproblem(problem: &AssignmentProblem, fixed: &Selection) -> SubproblemSolution {
    let mut m = Matcher::new(problem, fixed);
    m.augment_all();
    let w = problem.reward;
    let (pdo_in, spv_in) = m.residual_reach();
    let pdo_duals: Vec<f64> = pdo_in.iter().map(|&r| if r { 0.0 } else { w }).collect();
    let route_duals = problem
        .spvs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            s.routes
                .iter()
                .enumerate()
                .map(|(o, r)| {
                    let needs = if fixed[k] == Some(o) {
                        spv_in[k]
                    } else {
                        r.servable.iter().any(|&p| pdo_duals[p] == 0.0)
                    };
                    if needs {
                        w
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let value = w * m.matched() as f64 - problem.selection_cost(fixed);
    SubproblemSolution {
        matched_to: m.matched_to,
        pdo_duals,
        route_duals,
        value,
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;

    #[test]
    fn no_active_routes() {
        let p = problem(3, vec![(2, vec![opt(1, 1.0, &[0, 1])])], 100.0);
        let s = solve_subproblem(&p, &vec![None]);
        assert_eq!(s.value, 0.0);
        assert!(s.matched_to.iter().all(|m| m.is_none()));
        assert!(s.pdo_duals.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn capacity_binds() {
        let p = problem(2, vec![(1, vec![opt(1, 0.5, &[0, 1])])], 100.0);
        let s = solve_subproblem(&p, &vec![Some(0)]);
        assert_eq!(s.matched(), 1);
        assert!((s.value - 99.5).abs() < 1e-12);
    }

    /// Strong duality and complementary slackness against the primal matching.
    fn check_duals(p: &AssignmentProblem, sel: &Selection) {
        let s = solve_subproblem(p, sel);
        let w = p.reward;
        assert_eq!(s.matched(), brute_matching(p, sel));
        let mut dual = s.pdo_duals.iter().sum::<f64>();
        for (k, o) in sel.iter().enumerate() {
            if let Some(o) = o {
                dual += p.spvs[k].cap as f64 * s.route_duals[k][*o] - p.spvs[k].routes[*o].cost;
            }
        }
        assert!((dual - s.value).abs() < 1e-9, "strong duality");
        for (k, spv) in p.spvs.iter().enumerate() {
            for (o, r) in spv.routes.iter().enumerate() {
                for &q in &r.servable {
                    assert!(s.pdo_duals[q] + s.route_duals[k][o] >= w - 1e-9, "dual feasibility");
                }
                if sel[k] == Some(o) && s.route_duals[k][o] > 0.0 {
                    let load = s.matched_to.iter().filter(|m| **m == Some(k)).count();
                    assert_eq!(load as u32, spv.cap, "slack route priced");
                }
            }
        }
        for (q, m) in s.matched_to.iter().enumerate() {
            if s.pdo_duals[q] > 0.0 {
                assert!(m.is_some(), "priced pdo unmatched");
            }
            if let Some(k) = m {
                let o = sel[*k].unwrap();
                assert!((s.pdo_duals[q] + s.route_duals[*k][o] - w).abs() < 1e-9, "matched edge tight");
            }
        }
    }

    #[test]
    fn duals_satisfy_slackness_on_random_problems() {
        for seed in 0..200 {
            let p = random_problem(seed, 6, 4, 10);
            let mut sel: Selection = vec![None; p.spvs.len()];
            for (k, s) in p.spvs.iter().enumerate() {
                if !s.routes.is_empty() {
                    sel[k] = Some(seed as usize % s.routes.len());
                }
            }
            check_duals(&p, &sel);
        }
    }

    #[test]
    fn three_by_three_duals() {
        let p = problem(
            3,
            vec![
                (1, vec![opt(1, 1.0, &[0, 1])]),
                (1, vec![opt(1, 1.0, &[1, 2])]),
                (1, vec![opt(1, 1.0, &[0])]),
            ],
            10.0,
        );
        check_duals(&p, &vec![Some(0), Some(0), Some(0)]);
        check_duals(&p, &vec![Some(0), None, Some(0)]);
    }
}
