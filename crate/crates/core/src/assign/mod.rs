//! PDO to SPV-route assignment.
//!
//! Each SPV picks at most one non-null candidate route; each PDO is matched to
//! at most one chosen route that can serve it, within the SPV's stop cap. The
//! objective rewards every match with `reward` and charges the detour cost of
//! every chosen route.

mod benders;
mod exact;
mod heuristic;
mod matching;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::domain::{PdoId, Spv, SpvId};
use crate::error::Result;
use crate::kpaths::CandidateRoute;

pub use benders::{solve_assignment_benders, BendersOutcome, BendersState, BoundRecord, Cut};
pub use exact::solve_assignment_exact;
pub use heuristic::solve_assignment_heuristic;
pub use matching::{solve_subproblem, SubproblemSolution};

/// A non-null route an SPV may take.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteOption {
    /// Index into the SPV's candidate list.
    pub route_index: usize,
    pub cost: f64,
    /// Servable PDOs as positions in [`AssignmentProblem::pdos`], ascending.
    pub servable: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpvOptions {
    pub spv: SpvId,
    pub cap: u32,
    pub routes: Vec<RouteOption>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentProblem {
    pub pdos: Vec<PdoId>,
    /// Ordered by SPV id.
    pub spvs: Vec<SpvOptions>,
    /// Reward per matched PDO (omega).
    pub reward: f64,
}

/// Chosen option per SPV, `None` for the null route.
pub type Selection = Vec<Option<usize>>;

impl AssignmentProblem {
    /// Builds the problem over `pdos`, keeping only servability towards those
    /// PDOs. The reward defaults to `10 x (fixed_cost + max detour)`.
    pub fn from_candidates(
        pdos: &[PdoId],
        spvs: &[(&Spv, &[CandidateRoute])],
        fixed_cost: f64,
        reward: Option<f64>,
    ) -> Self {
        let pos: HashMap<PdoId, usize> = pdos.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut entries: Vec<SpvOptions> = spvs
            .iter()
            .map(|(spv, routes)| SpvOptions {
                spv: spv.id,
                cap: spv.max_stops,
                routes: routes
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| !r.is_null)
                    .map(|(i, r)| {
                        let mut servable: Vec<usize> = r.servable.iter().filter_map(|p| pos.get(p).copied()).collect();
                        servable.sort_unstable();
                        RouteOption {
                            route_index: i,
                            cost: r.detour_cost,
                            servable,
                        }
                    })
                    .collect(),
            })
            .collect();
        entries.sort_by_key(|e| e.spv);
        let max_cost = entries
            .iter()
            .flat_map(|e| e.routes.iter().map(|r| r.cost))
            .fold(0.0f64, f64::max);
        Self {
            pdos: pdos.to_vec(),
            spvs: entries,
            reward: reward.unwrap_or(10.0 * (fixed_cost + max_cost)).max(1.0),
        }
    }

    pub fn route_count(&self) -> usize {
        self.spvs.iter().map(|s| s.routes.len()).sum()
    }

    pub(crate) fn selection_cost(&self, sel: &[Option<usize>]) -> f64 {
        sel.iter()
            .enumerate()
            .filter_map(|(k, o)| o.map(|o| self.spvs[k].routes[o].cost))
            .sum()
    }

    /// Sub-problem holding only the given SPVs and PDOs.
    pub(crate) fn restrict(&self, spv_idx: &[usize], pdo_idx: &[usize]) -> Self {
        let remap: HashMap<usize, usize> = pdo_idx.iter().enumerate().map(|(n, &o)| (o, n)).collect();
        Self {
            pdos: pdo_idx.iter().map(|&i| self.pdos[i]).collect(),
            spvs: spv_idx
                .iter()
                .map(|&k| {
                    let s = &self.spvs[k];
                    SpvOptions {
                        spv: s.spv,
                        cap: s.cap,
                        routes: s
                            .routes
                            .iter()
                            .map(|r| RouteOption {
                                route_index: r.route_index,
                                cost: r.cost,
                                servable: r.servable.iter().filter_map(|p| remap.get(p).copied()).collect(),
                            })
                            .collect(),
                    }
                })
                .collect(),
            reward: self.reward,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignBackend {
    Exact,
    Benders,
    Heuristic,
    /// Exact per connected component when small, Benders for medium
    /// components, the heuristic otherwise.
    #[default]
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignConfig {
    pub backend: AssignBackend,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Largest number of route combinations the exact backend will enumerate.
    pub exact_limit: u128,
    /// Search-node cap for one Benders master solve.
    pub master_node_limit: usize,
    /// Components with more useful routes than this skip Benders in auto mode.
    pub benders_route_limit: usize,
    pub reward: Option<f64>,
}

impl Default for AssignConfig {
    fn default() -> Self {
        Self {
            backend: AssignBackend::Auto,
            epsilon: 1e-6,
            max_iterations: 500,
            exact_limit: 10_000,
            master_node_limit: 200_000,
            benders_route_limit: 60,
            reward: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentResult {
    /// Candidate-route index per SPV; 0 is the null route.
    pub chosen_route: BTreeMap<SpvId, usize>,
    /// Serving SPV and route index per PDO, `None` if unassigned.
    pub pdo_assignment: BTreeMap<PdoId, Option<(SpvId, usize)>>,
    pub objective: f64,
    pub converged: bool,
}

impl AssignmentResult {
    pub fn matched(&self) -> usize {
        self.pdo_assignment.values().filter(|a| a.is_some()).count()
    }

    /// PDOs per SPV with a non-null route.
    pub fn served_by(&self) -> BTreeMap<SpvId, Vec<PdoId>> {
        let mut out: BTreeMap<SpvId, Vec<PdoId>> = BTreeMap::new();
        for (p, a) in &self.pdo_assignment {
            if let Some((s, _)) = a {
                out.entry(*s).or_default().push(*p);
            }
        }
        out
    }
}

/// Reward times assigned PDOs minus detour cost of chosen non-null routes.
pub fn objective_value(problem: &AssignmentProblem, result: &AssignmentResult) -> f64 {
    let cost: f64 = problem
        .spvs
        .iter()
        .filter_map(|s| {
            let idx = *result.chosen_route.get(&s.spv)?;
            s.routes.iter().find(|r| r.route_index == idx).map(|r| r.cost)
        })
        .sum();
    problem.reward * result.matched() as f64 - cost
}

/// Internal solution in problem coordinates.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Internal {
    pub selection: Selection,
    /// Matched SPV position per PDO position.
    pub matched_to: Vec<Option<usize>>,
    pub converged: bool,
}

impl Internal {
    pub fn objective(&self, problem: &AssignmentProblem) -> f64 {
        let m = self.matched_to.iter().filter(|x| x.is_some()).count();
        problem.reward * m as f64 - problem.selection_cost(&self.selection)
    }

    /// Drops chosen routes that carry nothing.
    fn prune_idle(&mut self) {
        let mut used = vec![false; self.selection.len()];
        for k in self.matched_to.iter().flatten() {
            used[*k] = true;
        }
        for (k, s) in self.selection.iter_mut().enumerate() {
            if !used[k] {
                *s = None;
            }
        }
    }

    pub fn into_result(mut self, problem: &AssignmentProblem) -> AssignmentResult {
        self.prune_idle();
        let objective = self.objective(problem);
        let chosen_route = problem
            .spvs
            .iter()
            .zip(&self.selection)
            .map(|(s, o)| (s.spv, o.map_or(0, |o| s.routes[o].route_index)))
            .collect();
        let pdo_assignment = problem
            .pdos
            .iter()
            .zip(&self.matched_to)
            .map(|(p, m)| {
                let a = m.map(|k| {
                    let s = &problem.spvs[k];
                    (s.spv, s.routes[self.selection[k].expect("matched to active route")].route_index)
                });
                (*p, a)
            })
            .collect();
        AssignmentResult {
            chosen_route,
            pdo_assignment,
            objective,
            converged: self.converged,
        }
    }
}

/// Solves with the configured backend.
pub fn solve_assignment(problem: &AssignmentProblem, config: &AssignConfig) -> Result<AssignmentResult> {
    match config.backend {
        AssignBackend::Exact => solve_assignment_exact(problem, config.exact_limit),
        AssignBackend::Benders => Ok(solve_assignment_benders(problem, config).result),
        AssignBackend::Heuristic => Ok(solve_assignment_heuristic(problem)),
        AssignBackend::Auto => Ok(solve_auto(problem, config)),
    }
}

fn solve_auto(problem: &AssignmentProblem, config: &AssignConfig) -> AssignmentResult {
    let mut total = Internal {
        selection: vec![None; problem.spvs.len()],
        matched_to: vec![None; problem.pdos.len()],
        converged: true,
    };
    for (spv_idx, pdo_idx) in components(problem) {
        let sub = problem.restrict(&spv_idx, &pdo_idx);
        let useful = sub.spvs.iter().flat_map(|s| &s.routes).filter(|r| !r.servable.is_empty()).count();
        let part = match exact::solve_internal(&sub, config.exact_limit) {
            Ok(r) => r,
            Err(_) if useful <= config.benders_route_limit => {
                let b = benders::solve_internal(&sub, config);
                if b.0.converged {
                    b.0
                } else {
                    heuristic::solve_internal(&sub)
                }
            }
            Err(_) => heuristic::solve_internal(&sub),
        };
        for (j, &k) in spv_idx.iter().enumerate() {
            total.selection[k] = part.selection[j];
        }
        for (j, &p) in pdo_idx.iter().enumerate() {
            total.matched_to[p] = part.matched_to[j].map(|jk| spv_idx[jk]);
        }
        total.converged &= part.converged;
    }
    total.into_result(problem)
}

/// Groups SPVs that can reach a common PDO. SPVs with no useful route and
/// PDOs nobody can serve are left out.
fn components(problem: &AssignmentProblem) -> Vec<(Vec<usize>, Vec<usize>)> {
    let k = problem.spvs.len();
    let np = problem.pdos.len();
    let mut parent: Vec<usize> = (0..k + np).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut useful = vec![false; k];
    let mut reachable = vec![false; np];
    for (s, opt) in problem.spvs.iter().enumerate() {
        for r in &opt.routes {
            for &p in &r.servable {
                useful[s] = true;
                reachable[p] = true;
                let (a, b) = (find(&mut parent, s), find(&mut parent, k + p));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for s in (0..k).filter(|&s| useful[s]) {
        let r = find(&mut parent, s);
        groups.entry(r).or_default().0.push(s);
    }
    for p in (0..np).filter(|&p| reachable[p]) {
        let r = find(&mut parent, k + p);
        groups.entry(r).or_default().1.push(p);
    }
    groups.into_values().collect()
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn opt(idx: usize, cost: f64, servable: &[usize]) -> RouteOption {
        RouteOption {
            route_index: idx,
            cost,
            servable: servable.to_vec(),
        }
    }

    pub fn problem(n_pdos: usize, spvs: Vec<(u32, Vec<RouteOption>)>, reward: f64) -> AssignmentProblem {
        AssignmentProblem {
            pdos: (0..n_pdos as u32).map(PdoId).collect(),
            spvs: spvs
                .into_iter()
                .enumerate()
                .map(|(i, (cap, routes))| SpvOptions {
                    spv: SpvId(i as u32),
                    cap,
                    routes,
                })
                .collect(),
            reward,
        }
    }

    /// Random problem with up to `max_pdos` PDOs, `max_spvs` SPVs and `max_routes` routes in total.
    pub fn random_problem(seed: u64, max_pdos: usize, max_spvs: usize, max_routes: usize) -> AssignmentProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let np = rng.gen_range(0..=max_pdos);
        let ns = rng.gen_range(1..=max_spvs);
        let mut budget = max_routes;
        let spvs = (0..ns)
            .map(|_| {
                let cap = rng.gen_range(1..=4);
                let nr = rng.gen_range(0..=3.min(budget));
                budget -= nr;
                let routes = (0..nr)
                    .map(|i| {
                        let serv: Vec<usize> = (0..np).filter(|_| rng.gen_bool(0.4)).collect();
                        opt(i + 1, (rng.gen_range(0..400) as f64) / 100.0, &serv)
                    })
                    .collect();
                (cap, routes)
            })
            .collect();
        problem(np, spvs, 100.0)
    }

    /// Best objective over every selection, each evaluated by brute-force matching.
    pub fn brute_force(p: &AssignmentProblem) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut sel: Selection = vec![None; p.spvs.len()];
        fn rec(p: &AssignmentProblem, k: usize, sel: &mut Selection, best: &mut f64) {
            if k == p.spvs.len() {
                let m = brute_matching(p, sel);
                *best = best.max(p.reward * m as f64 - p.selection_cost(sel));
                return;
            }
            sel[k] = None;
            rec(p, k + 1, sel, best);
            for o in 0..p.spvs[k].routes.len() {
                sel[k] = Some(o);
                rec(p, k + 1, sel, best);
            }
        }
        rec(p, 0, &mut sel, &mut best);
        best
    }

    /// Max matching by trying every PDO -> {none, spv} map.
    pub fn brute_matching(p: &AssignmentProblem, sel: &[Option<usize>]) -> usize {
        fn rec(p: &AssignmentProblem, sel: &[Option<usize>], i: usize, load: &mut [u32]) -> usize {
            if i == p.pdos.len() {
                return 0;
            }
            let mut best = rec(p, sel, i + 1, load);
            for k in 0..p.spvs.len() {
                let Some(o) = sel[k] else { continue };
                if load[k] < p.spvs[k].cap && p.spvs[k].routes[o].servable.contains(&i) {
                    load[k] += 1;
                    best = best.max(1 + rec(p, sel, i + 1, load));
                    load[k] -= 1;
                }
            }
            best
        }
        rec(p, sel, 0, &mut vec![0; p.spvs.len()])
    }
}
