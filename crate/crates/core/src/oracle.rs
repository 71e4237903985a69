//! Exact solver for tiny instances by exhaustive search over PDO partitions,
//! SPV route choices and DV visit orders.

use serde::{Deserialize, Serialize};

use crate::domain::{DvPlan, Instance, PdoId, Solution, SpvPlan, TIME_TOL};
use crate::dvrp::undeliverable;
use crate::error::{Error, Result};
use crate::kpaths::{CandidateRoute, RouteConfig, RouteGenerator};
use crate::network::{NodeId, VehicleClass};
use crate::switching::best_plan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_pdos: usize,
    pub max_spvs: usize,
    pub max_dvs: usize,
    /// Cap on evaluated search states.
    pub max_states: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_pdos: 6,
            max_spvs: 5,
            max_dvs: 2,
            max_states: 10_000_000,
        }
    }
}

const INF: f64 = f64::INFINITY;

/// Cheapest on-time DV tour over the PDOs in `mask`: (cost incl. fixed, stops).
fn dv_group(instance: &Instance, mask: usize) -> Option<(f64, Vec<NodeId>)> {
    let mut nodes: Vec<(NodeId, f64)> = Vec::new();
    let mut release = 0u32;
    for (i, p) in instance.pdos.iter().enumerate() {
        if mask >> i & 1 == 0 {
            continue;
        }
        release = release.max(p.earliest_pickup);
        match nodes.iter_mut().find(|(n, _)| *n == p.drop_node) {
            Some(e) => e.1 = e.1.min(p.latest_delivery as f64),
            None => nodes.push((p.drop_node, p.latest_delivery as f64)),
        }
    }
    if nodes.len() > instance.dv_spec.max_stops as usize {
        return None;
    }
    nodes.sort_by_key(|n| n.0);

    struct Tour<'a> {
        instance: &'a Instance,
        nodes: &'a [(NodeId, f64)],
        release: f64,
        used: Vec<bool>,
        path: Vec<NodeId>,
        best: Option<(u64, Vec<NodeId>)>,
    }
    impl Tour<'_> {
        fn run(&mut self, at: NodeId, len: u64) {
            if self.best.as_ref().is_some_and(|b| len >= b.0) {
                return;
            }
            if self.path.len() == self.nodes.len() {
                if let Some(back) = self.instance.length(at, self.instance.depot) {
                    let total = len + back;
                    if self.best.as_ref().map_or(true, |b| total < b.0) {
                        self.best = Some((total, self.path.clone()));
                    }
                }
                return;
            }
            for k in 0..self.nodes.len() {
                if self.used[k] {
                    continue;
                }
                let (n, deadline) = self.nodes[k];
                let Some(d) = self.instance.length(at, n) else { continue };
                let t = self.release + self.instance.model().minutes(VehicleClass::Dv, len + d);
                if t > deadline + TIME_TOL {
                    continue;
                }
                self.used[k] = true;
                self.path.push(n);
                self.run(n, len + d);
                self.path.pop();
                self.used[k] = false;
            }
        }
    }
    let mut tour = Tour {
        instance,
        nodes: &nodes,
        release: release as f64,
        used: vec![false; nodes.len()],
        path: Vec::new(),
        best: None,
    };
    tour.run(instance.depot, 0);
    let (len, path) = tour.best?;
    let cost = instance.model().dollars(VehicleClass::Dv, len) + instance.dv_spec.fixed_cost;
    Some((cost, path))
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Exact minimum-cost solution by exhaustive search. Refuses instances
/// beyond `limits`.
pub fn solve_exact_bruteforce(instance: &Instance, limits: &OracleLimits) -> Result<(Solution, f64)> {
    instance.validate()?;
    let n = instance.pdos.len();
    let refuse = |what: &'static str, size: u128, limit: u128| Err(Error::Capacity { solver: what, size, limit });
    if n > limits.max_pdos {
        return refuse("oracle (pdos)", n as u128, limits.max_pdos as u128);
    }
    if instance.spvs.len() > limits.max_spvs {
        return refuse("oracle (spvs)", instance.spvs.len() as u128, limits.max_spvs as u128);
    }
    let dvs = instance
        .dv_spec
        .fleet_limit
        .map_or(limits.max_dvs, |f| (f as usize).min(limits.max_dvs));
    let subsets = 1usize << n;
    let layers = instance.spvs.len() + dvs;
    let states = subsets as u64 * factorial(n) + layers as u64 * 3u64.pow(n as u32);
    if states > limits.max_states {
        return refuse("oracle (states)", states as u128, limits.max_states as u128);
    }

    let mut spvs: Vec<_> = instance.spvs.iter().collect();
    spvs.sort_by_key(|s| s.id);
    let generator = RouteGenerator::new(
        instance,
        RouteConfig {
            max_routes: None,
            ..RouteConfig::default()
        },
    );
    let ids: Vec<PdoId> = instance.pdos.iter().map(|p| p.id).collect();
    let subset_ids = |mask: usize| -> Vec<PdoId> {
        let mut v: Vec<PdoId> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ids[i]).collect();
        v.sort();
        v
    };

    // cost and route index per SPV and subset
    let mut spv_cost: Vec<Vec<(f64, Option<usize>)>> = Vec::with_capacity(spvs.len());
    let mut spv_routes: Vec<Vec<CandidateRoute>> = Vec::with_capacity(spvs.len());
    for s in &spvs {
        let routes = generator.routes(s, None)?;
        let mut row = vec![(INF, None); subsets];
        row[0] = (0.0, None);
        for (mask, cell) in row.iter_mut().enumerate().skip(1) {
            let pdos = subset_ids(mask);
            if let Some(k) = best_plan(&routes, &pdos, s.max_stops) {
                *cell = (routes[k].detour_cost + instance.params.per_pdo_compensation * pdos.len() as f64, Some(k));
            }
        }
        spv_cost.push(row);
        spv_routes.push(routes);
    }
    let mut dv_cost: Vec<(f64, Vec<NodeId>)> = vec![(0.0, Vec::new()); subsets];
    for (mask, cell) in dv_cost.iter_mut().enumerate().skip(1) {
        *cell = dv_group(instance, mask).unwrap_or((INF, Vec::new()));
    }

    let layer_cost = |l: usize, sub: usize| -> f64 {
        if l < spvs.len() {
            spv_cost[l][sub].0
        } else {
            dv_cost[sub].0
        }
    };
    // best[l][mask]: cheapest way for the first l vehicles to serve exactly mask
    let mut best = vec![vec![INF; subsets]; layers + 1];
    let mut pick = vec![vec![0usize; subsets]; layers + 1];
    best[0][0] = 0.0;
    for l in 0..layers {
        for mask in 0..subsets {
            for sub in 0..subsets {
                if sub & mask != sub {
                    continue;
                }
                let prev = best[l][mask ^ sub];
                let c = layer_cost(l, sub);
                if prev + c < best[l + 1][mask] {
                    best[l + 1][mask] = prev + c;
                    pick[l + 1][mask] = sub;
                }
            }
        }
    }
    let full = subsets - 1;
    if !best[layers][full].is_finite() {
        let bad = undeliverable(instance, &ids);
        let culprits: Vec<PdoId> = bad
            .into_iter()
            .filter(|p| {
                let i = ids.iter().position(|x| x == p).expect("own id");
                spv_cost.iter().all(|row| !row[1 << i].0.is_finite())
            })
            .collect();
        if !culprits.is_empty() {
            return Err(Error::InfeasiblePdos(culprits));
        }
        return Err(Error::Contract(format!("no feasible solution with at most {dvs} DVs")));
    }

    let mut spv_plans = Vec::new();
    let mut dv_plans = Vec::new();
    let mut mask = full;
    for l in (1..=layers).rev() {
        let sub = pick[l][mask];
        mask ^= sub;
        if sub == 0 {
            continue;
        }
        let served = subset_ids(sub);
        if l - 1 < spvs.len() {
            let s = spvs[l - 1];
            let route = &spv_routes[l - 1][spv_cost[l - 1][sub].1.expect("finite cost has a route")];
            spv_plans.push(SpvPlan {
                spv: s.id,
                stop_times: instance.spv_schedule(s, &route.path, &served)?,
                route: route.path.clone(),
                served,
            });
        } else {
            let mut stops = vec![instance.depot];
            stops.extend(&dv_cost[sub].1);
            stops.push(instance.depot);
            let release = served.iter().filter_map(|p| instance.pdo(*p)).map(|p| p.earliest_pickup).max().unwrap_or(0);
            dv_plans.push(DvPlan {
                stop_times: instance.dv_schedule(&stops, release as f64)?,
                route: stops,
                served,
            });
        }
    }
    dv_plans.reverse();
    let sol = Solution::priced(instance, spv_plans, dv_plans)?;
    let cost = sol.cost.total;
    Ok((sol, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::*;
    use crate::domain::{total_objective, validate_solution};
    use crate::kpaths::generate_candidate_routes;

    #[test]
    fn single_pdo_by_dv() {
        let mut inst = line_instance();
        inst.pdos = vec![pdo(1, 4, 720)];
        let (sol, cost) = solve_exact_bruteforce(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(sol.dv_plans.len(), 1);
        assert_eq!(sol.dv_plans[0].route, vec![n(1), n(4), n(1)]);
        // 3 miles out, 3 back
        assert!((cost - (120.0 + 6.0 * 1.5)).abs() < 1e-9);
        assert!(validate_solution(&inst, &sol).is_ok());
    }

    #[test]
    fn cheap_spv_beats_dv() {
        let mut inst = line_instance();
        inst.pdos = vec![pdo(1, 3, 720)];
        inst.spvs = vec![spv(1, 1, 4, 480, 30.0)];
        let (sol, cost) = solve_exact_bruteforce(&inst, &OracleLimits::default()).unwrap();
        assert!(sol.dv_plans.is_empty());
        assert_eq!(sol.pdos_by_spv(), 1);
        assert!(cost < 5.0);
    }

    #[test]
    fn refuses_oversized() {
        let mut inst = line_instance();
        inst.pdos = (1..=7).map(|i| pdo(i, 2 + i % 4, 720)).collect();
        assert!(matches!(solve_exact_bruteforce(&inst, &OracleLimits::default()), Err(Error::Capacity { .. })));
    }

    #[test]
    fn undeliverable_reported() {
        let mut inst = line_instance();
        inst.pdos = vec![pdo(1, 4, 485)];
        assert!(matches!(solve_exact_bruteforce(&inst, &OracleLimits::default()), Err(Error::InfeasiblePdos(_))));
    }

    fn mixed_instance() -> Instance {
        let mut inst = line_instance();
        inst.pdos = vec![pdo(1, 3, 720), pdo(2, 5, 600), pdo(3, 4, 720), pdo(4, 3, 530)];
        inst.spvs = vec![spv(1, 1, 4, 480, 30.0), spv(2, 2, 3, 470, 20.0), spv(3, 5, 4, 490, 25.0)];
        inst.spvs[0].max_stops = 1;
        inst
    }

    /// Independent recomputation: every labelling of PDOs to vehicles,
    /// enumerated in reverse, priced by scanning routes and permutations.
    fn relabel_search(inst: &Instance, dvs: usize) -> f64 {
        let n = inst.pdos.len();
        let k = inst.spvs.len() + dvs;
        let routes: Vec<Vec<CandidateRoute>> = inst
            .spvs
            .iter()
            .map(|s| generate_candidate_routes(inst, s, RouteConfig { max_routes: None, ..RouteConfig::default() }).unwrap())
            .collect();
        let mut best = INF;
        let total = k.pow(n as u32);
        for code in (0..total).rev() {
            let mut labels = vec![0usize; n];
            let mut c = code;
            for l in labels.iter_mut() {
                *l = c % k;
                c /= k;
            }
            let mut cost = 0.0;
            for v in 0..k {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == v).collect();
                if members.is_empty() {
                    continue;
                }
                if v < inst.spvs.len() {
                    let s = &inst.spvs[v];
                    if members.len() > s.max_stops as usize {
                        cost = INF;
                        break;
                    }
                    let c = routes[v]
                        .iter()
                        .filter(|r| !r.is_null && members.iter().all(|&i| r.can_serve(inst.pdos[i].id)))
                        .map(|r| r.detour_cost)
                        .fold(INF, f64::min);
                    cost += c + 1.5 * members.len() as f64;
                } else {
                    cost += brute_tour(inst, &members);
                }
            }
            best = best.min(cost);
        }
        best
    }

    fn brute_tour(inst: &Instance, members: &[usize]) -> f64 {
        let mut nodes: Vec<NodeId> = members.iter().map(|&i| inst.pdos[i].drop_node).collect();
        nodes.sort();
        nodes.dedup();
        let release = members.iter().map(|&i| inst.pdos[i].earliest_pickup).max().unwrap() as f64;
        let mut best = INF;
        permute(&mut nodes, 0, &mut |order| {
            let mut stops = vec![inst.depot];
            stops.extend_from_slice(order);
            stops.push(inst.depot);
            let times = inst.dv_schedule(&stops, release).unwrap();
            let on_time = members.iter().all(|&i| {
                let p = &inst.pdos[i];
                let k = order.iter().position(|&x| x == p.drop_node).unwrap();
                times[k + 1] <= p.latest_delivery as f64 + 1e-6
            });
            if on_time {
                let len = inst.dv_route_milli(&stops).unwrap();
                best = best.min(inst.model().dollars(VehicleClass::Dv, len) + 120.0);
            }
        });
        best
    }

    fn permute(v: &mut Vec<NodeId>, k: usize, f: &mut impl FnMut(&[NodeId])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in (k..v.len()).rev() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }

    #[test]
    fn matches_permuted_double_enumeration() {
        let inst = mixed_instance();
        let (sol, cost) = solve_exact_bruteforce(&inst, &OracleLimits::default()).unwrap();
        assert!(validate_solution(&inst, &sol).is_ok(), "{:?}", validate_solution(&inst, &sol));
        assert!((total_objective(&inst, &sol).unwrap().total - cost).abs() < 1e-9);
        assert!((relabel_search(&inst, 2) - cost).abs() < 1e-9);
    }

    #[test]
    fn invariant_to_input_order() {
        let inst = mixed_instance();
        let (_, cost) = solve_exact_bruteforce(&inst, &OracleLimits::default()).unwrap();
        let mut shuffled = inst.clone();
        shuffled.pdos.reverse();
        shuffled.spvs.rotate_left(1);
        let (_, again) = solve_exact_bruteforce(&shuffled, &OracleLimits::default()).unwrap();
        assert!((cost - again).abs() < 1e-9);
    }
}
