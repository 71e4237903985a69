//! The decomposition heuristic: grow the active SPV set batch by batch and,
//! for each batch, assign PDOs to SPV routes, route the rest with DVs,
//! switch PDOs to DVs where that saves money, and keep the cheapest solution.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assign::{solve_assignment, AssignConfig, AssignmentProblem};
use crate::domain::{Instance, PdoId, Solution, Spv, SpvId, SpvPlan};
use crate::dvrp::{build_single_route, insertion_mvrp, DvRoute};
use crate::error::{Error, Result};
use crate::kpaths::{CandidateRoute, RouteCache, RouteConfig, RouteGenerator};
use crate::switching::{switch_loop, SpvAssignment, SwitchLog, SwitchState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhConfig {
    /// SPVs added per iteration.
    pub batch_size: usize,
    pub assign: AssignConfig,
    pub routes: RouteConfig,
    pub seed: u64,
    /// Use only the first `n` SPVs of the seeded order.
    pub spv_limit: Option<usize>,
}

impl Default for DhConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            assign: AssignConfig::default(),
            routes: RouteConfig::default(),
            seed: 0,
            spv_limit: None,
        }
    }
}

/// Iteration 0 always runs with no SPVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub active_spvs: usize,
    /// Active SPVs with at least one route that can serve some PDO.
    pub feasible_spvs: usize,
    pub matched_initial: usize,
    pub matched_final: usize,
    pub dv_count: usize,
    /// `None` when the iteration produced no feasible solution.
    pub total_cost: Option<f64>,
    pub incumbent_cost: Option<f64>,
    pub wall_seconds: f64,
    pub assignment_converged: bool,
    pub switches: SwitchLog,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DhTrace {
    pub iterations: Vec<IterationRecord>,
    pub incumbent_history: Vec<f64>,
}

/// SPV positions in seeded batch order. The order of any SPV subset is the
/// restriction of this order, so limiting the SPV count keeps a prefix.
pub fn spv_order(instance: &Instance, seed: u64) -> Vec<usize> {
    let mut keyed: Vec<(u64, SpvId, usize)> = instance
        .spvs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (s.id.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            (rng.next_u64(), s.id, i)
        })
        .collect();
    keyed.sort();
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// `(dh - oracle) / oracle`.
pub fn incumbent_gap(dh_cost: f64, oracle_cost: f64) -> f64 {
    (dh_cost - oracle_cost) / oracle_cost
}

/// Assembles and prices a solution from SPV plans and DV routes.
pub fn build_solution(
    instance: &Instance,
    spv_plans: &BTreeMap<SpvId, SpvAssignment>,
    routes: &HashMap<SpvId, Vec<CandidateRoute>>,
    dv_routes: &[DvRoute],
) -> Result<Solution> {
    let mut plans = Vec::new();
    for (id, a) in spv_plans {
        if a.served.is_empty() {
            continue;
        }
        let spv = instance.spv(*id).ok_or_else(|| Error::Contract(format!("unknown spv {id}")))?;
        let route = &routes[id][a.route];
        let mut served = a.served.clone();
        served.sort();
        plans.push(SpvPlan {
            spv: *id,
            stop_times: instance.spv_schedule(spv, &route.path, &served)?,
            route: route.path.clone(),
            served,
        });
    }
    Solution::priced(instance, plans, dv_routes.iter().map(|r| r.to_plan()).collect())
}

struct Runner<'a> {
    instance: &'a Instance,
    config: &'a DhConfig,
    routes: HashMap<SpvId, Vec<CandidateRoute>>,
}

impl Runner<'_> {
    fn assignment(&self, active: &[&Spv], pdos: &[PdoId]) -> Result<(BTreeMap<SpvId, SpvAssignment>, usize, bool)> {
        let entries: Vec<(&Spv, &[CandidateRoute])> = active.iter().map(|s| (*s, self.routes[&s.id].as_slice())).collect();
        let problem = AssignmentProblem::from_candidates(pdos, &entries, self.instance.dv_spec.fixed_cost, self.config.assign.reward);
        let result = solve_assignment(&problem, &self.config.assign)?;
        let mut plans = BTreeMap::new();
        for (spv, served) in result.served_by() {
            plans.insert(
                spv,
                SpvAssignment {
                    route: result.chosen_route[&spv],
                    served,
                },
            );
        }
        Ok((plans, result.matched(), result.converged))
    }

    fn iterate(&self, active: &[&Spv]) -> Result<(Solution, usize, usize, bool, SwitchLog)> {
        let inst = self.instance;
        let all: Vec<PdoId> = inst.pdos.iter().map(|p| p.id).collect();
        let (plans, matched_initial, converged) = self.assignment(active, &all)?;
        let on_spv: std::collections::HashSet<PdoId> = plans.values().flat_map(|p| p.served.iter().copied()).collect();
        let mut dv_set: Vec<PdoId> = all.iter().copied().filter(|p| !on_spv.contains(p)).collect();

        let mut state = SwitchState {
            spv: plans,
            dv_route: build_single_route(inst, &dv_set)?,
        };
        let log = switch_loop(inst, &mut state, &self.routes)?;
        dv_set = state.dv_route.pdos().collect();

        let remaining: Vec<PdoId> = {
            let mut v: Vec<PdoId> = state.spv.values().flat_map(|p| p.served.iter().copied()).collect();
            v.sort();
            v
        };
        let (final_plans, matched_final, rematch_converged) = if remaining.is_empty() {
            (BTreeMap::new(), 0, true)
        } else {
            self.assignment(active, &remaining)?
        };
        let rematched: std::collections::HashSet<PdoId> = final_plans.values().flat_map(|p| p.served.iter().copied()).collect();
        dv_set.extend(remaining.iter().filter(|p| !rematched.contains(p)));
        dv_set.sort();

        let dv_routes = insertion_mvrp(inst, &dv_set)?;
        let sol = build_solution(inst, &final_plans, &self.routes, &dv_routes)?;
        Ok((sol, matched_initial, matched_final, converged && rematch_converged, log))
    }
}

/// Runs the decomposition heuristic and returns the cheapest solution found
/// with a per-iteration trace.
pub fn solve_dh(instance: &Instance, config: &DhConfig) -> Result<(Solution, DhTrace)> {
    instance.validate()?;
    if config.batch_size == 0 {
        return Err(Error::Contract("batch_size must be at least 1".into()));
    }
    let mut order = spv_order(instance, config.seed);
    if let Some(n) = config.spv_limit {
        order.truncate(n);
    }
    let mut generator = RouteGenerator::new(instance, config.routes);
    generator.prepare(order.iter().map(|&i| &instance.spvs[i]));
    let mut runner = Runner {
        instance,
        config,
        routes: HashMap::new(),
    };
    let mut cache = RouteCache::new(&instance.network);
    // The empty set first, so every run is at least as good as pure DV.
    let sizes: Vec<usize> = std::iter::once(0)
        .chain((1..=order.len().div_ceil(config.batch_size)).map(|t| (t * config.batch_size).min(order.len())))
        .collect();

    let mut trace = DhTrace::default();
    let mut best: Option<Solution> = None;
    let mut last_err: Option<Error> = None;
    for (t, &size) in sizes.iter().enumerate() {
        let start = Instant::now();
        let active_idx = &order[..size];
        for &i in active_idx {
            let spv = &instance.spvs[i];
            if !runner.routes.contains_key(&spv.id) {
                let r = generator.routes(spv, Some(&mut cache))?;
                runner.routes.insert(spv.id, r);
            }
        }
        let mut active: Vec<&Spv> = active_idx.iter().map(|&i| &instance.spvs[i]).collect();
        active.sort_by_key(|s| s.id);

        let mut record = IterationRecord {
            iteration: t,
            active_spvs: active.len(),
            feasible_spvs: active
                .iter()
                .filter(|s| runner.routes[&s.id].iter().any(|r| !r.servable.is_empty()))
                .count(),
            matched_initial: 0,
            matched_final: 0,
            dv_count: 0,
            total_cost: None,
            incumbent_cost: None,
            wall_seconds: 0.0,
            assignment_converged: true,
            switches: SwitchLog::default(),
        };
        match runner.iterate(&active) {
            Ok((sol, mi, mf, conv, log)) => {
                record.matched_initial = mi;
                record.matched_final = mf;
                record.dv_count = sol.dv_count();
                record.total_cost = Some(sol.cost.total);
                record.assignment_converged = conv;
                record.switches = log;
                if best.as_ref().map_or(true, |b| sol.cost.total < b.cost.total - 1e-6) {
                    best = Some(sol);
                }
            }
            Err(e @ (Error::InfeasiblePdos(_) | Error::FleetLimit { .. })) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        record.incumbent_cost = best.as_ref().map(|b| b.cost.total);
        if let Some(c) = record.incumbent_cost {
            trace.incumbent_history.push(c);
        }
        record.wall_seconds = start.elapsed().as_secs_f64();
        trace.iterations.push(record);
    }
    match best {
        Some(b) => Ok((b, trace)),
        None => Err(last_err.unwrap_or_else(|| Error::Contract("no iteration produced a solution".into()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::*;
    use crate::domain::validate_solution;

    #[test]
    fn gap_examples() {
        assert!((incumbent_gap(151.5, 148.0) - 0.0236).abs() < 5e-5);
        assert_eq!(incumbent_gap(148.0, 148.0), 0.0);
        assert!((incumbent_gap(165.3, 159.8) - 0.0344).abs() < 5e-5);
    }

    #[test]
    fn empty_instance() {
        let inst = line_instance();
        let (sol, trace) = solve_dh(&inst, &DhConfig::default()).unwrap();
        assert_eq!(sol.cost.total, 0.0);
        assert_eq!(trace.iterations.len(), 1);
    }

    #[test]
    fn zero_spvs_is_pure_dv() {
        let mut inst = line_instance();
        inst.pdos = vec![pdo(1, 4, 720), pdo(2, 5, 720)];
        let (sol, _) = solve_dh(&inst, &DhConfig::default()).unwrap();
        let routes = insertion_mvrp(&inst, &[PdoId(1), PdoId(2)]).unwrap();
        let expected: f64 = routes.iter().map(|r| r.cost(&inst).unwrap()).sum::<f64>() + 120.0 * routes.len() as f64;
        assert!((sol.cost.total - expected).abs() < 1e-9);
        assert!(validate_solution(&inst, &sol).is_ok());
    }

    #[test]
    fn spv_takes_cheap_pdo_and_validates() {
        let mut inst = line_instance();
        inst.pdos = vec![pdo(1, 3, 720), pdo(2, 5, 720)];
        inst.spvs = vec![spv(1, 1, 4, 480, 30.0), spv(2, 2, 3, 490, 30.0)];
        let (sol, trace) = solve_dh(&inst, &DhConfig { batch_size: 1, ..DhConfig::default() }).unwrap();
        assert!(validate_solution(&inst, &sol).is_ok(), "{:?}", validate_solution(&inst, &sol));
        assert_eq!(sol.dv_count(), 0);
        let sizes: Vec<usize> = trace.iterations.iter().map(|r| r.active_spvs).collect();
        assert_eq!(sizes, vec![0, 1, 2]);
        let h = &trace.incumbent_history;
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn order_is_prefix_stable() {
        let mut inst = line_instance();
        inst.spvs = (0..20).map(|i| spv(i, 1, 4, 480, 30.0)).collect();
        let full = spv_order(&inst, 9);
        let ids: Vec<u32> = full.iter().map(|&i| inst.spvs[i].id.0).collect();
        inst.spvs.reverse();
        let again: Vec<u32> = spv_order(&inst, 9).iter().map(|&i| inst.spvs[i].id.0).collect();
        assert_eq!(ids, again);
        assert_ne!(ids, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn undeliverable_pdo_surfaces_culprits() {
        let mut inst = line_instance();
        inst.pdos = vec![pdo(1, 4, 485)];
        let err = solve_dh(&inst, &DhConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePdos(v) if v == vec![PdoId(1)]));
    }
}
