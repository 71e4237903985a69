//! Dedicated-vehicle routing by cheapest insertion.
//!
//! A DV leaves the depot at the latest release time among its PDOs, drives
//! shortest paths between consecutive stops, never waits and spends no time
//! at stops. A stop is on time if the arrival is no later than the earliest
//! deadline among the PDOs dropped there.

use serde::{Deserialize, Serialize};

use crate::domain::{DvPlan, Instance, Pdo, PdoId, TIME_TOL};
use crate::error::{Error, Result};
use crate::network::{DistanceTable, NodeId, VehicleClass};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DvRoute {
    /// Depot, delivery locations, depot.
    pub stops: Vec<NodeId>,
    /// PDOs dropped at each stop, aligned with `stops`.
    pub served: Vec<Vec<PdoId>>,
    pub stop_times: Vec<f64>,
}

impl DvRoute {
    pub fn empty(depot: NodeId) -> Self {
        Self {
            stops: vec![depot, depot],
            served: vec![Vec::new(), Vec::new()],
            stop_times: vec![0.0, 0.0],
        }
    }

    /// Number of delivery locations.
    pub fn load(&self) -> usize {
        self.stops.len().saturating_sub(2)
    }

    pub fn is_empty(&self) -> bool {
        self.load() == 0
    }

    pub fn pdos(&self) -> impl Iterator<Item = PdoId> + '_ {
        self.served.iter().flatten().copied()
    }

    pub fn length_milli(&self, instance: &Instance) -> Result<u64> {
        instance.dv_route_milli(&self.stops)
    }

    /// Variable cost in dollars.
    pub fn cost(&self, instance: &Instance) -> Result<f64> {
        Ok(instance.model().dollars(VehicleClass::Dv, self.length_milli(instance)?))
    }

    pub fn to_plan(&self) -> DvPlan {
        let mut served: Vec<PdoId> = self.pdos().collect();
        served.sort();
        DvPlan {
            route: self.stops.clone(),
            served,
            stop_times: self.stop_times.clone(),
        }
    }
}

/// Added DV cost of visiting `u` between the consecutive stops `i` and `j`:
/// `c(i,u) + c(u,j) - c(i,j)`.
pub fn marginal_insertion_cost(instance: &Instance, route: &DvRoute, link: (NodeId, NodeId), u: NodeId) -> Result<f64> {
    let adjacent = route.stops.windows(2).any(|w| w[0] == link.0 && w[1] == link.1);
    if !adjacent {
        return Err(Error::Contract(format!("{} -> {} are not consecutive stops", link.0, link.1)));
    }
    let d = |a: NodeId, b: NodeId| instance.length(a, b).ok_or(Error::NoPath { from: a, to: b });
    let delta = d(link.0, u)? as i64 + d(u, link.1)? as i64 - d(link.0, link.1)? as i64;
    Ok(instance.model().dollars_signed(VehicleClass::Dv, delta))
}

/// PDOs a DV cannot deliver on time even as its only stop.
pub fn undeliverable(instance: &Instance, pdos: &[PdoId]) -> Vec<PdoId> {
    let mut bad: Vec<PdoId> = pdos
        .iter()
        .filter(|id| match instance.pdo(**id) {
            Some(p) => !deliverable_alone(instance, p),
            None => true,
        })
        .copied()
        .collect();
    bad.sort();
    bad
}

pub(crate) fn deliverable_alone(instance: &Instance, p: &Pdo) -> bool {
    match (instance.length(instance.depot, p.drop_node), instance.length(p.drop_node, instance.depot)) {
        (Some(out), Some(_)) => {
            p.earliest_pickup as f64 + instance.model().minutes(VehicleClass::Dv, out) <= p.latest_delivery as f64 + TIME_TOL
        }
        _ => false,
    }
}

#[derive(Clone, Debug)]
struct Work {
    /// Dense node indices; first and last are the depot.
    stops: Vec<usize>,
    pdos: Vec<Vec<usize>>,
    /// Cumulative length to each stop.
    cum: Vec<u64>,
    /// Earliest deadline per stop; infinite at the depots.
    deadline: Vec<f64>,
    release: u32,
    /// Minimum over stops `<= i` of deadline minus travel minutes.
    pre_slack: Vec<f64>,
    /// Minimum over stops `>= i` of the same.
    suf_slack: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Insertion {
    delta: u64,
    /// Insert after this stop, or merge into it.
    at: usize,
    merge: bool,
}

struct Builder<'a> {
    inst: &'a Instance,
    table: &'a DistanceTable,
    depot: usize,
    cap: Option<usize>,
    /// Dense drop index per PDO position.
    node: Vec<usize>,
}

impl Builder<'_> {
    fn minutes(&self, milli: u64) -> f64 {
        self.inst.model().minutes(VehicleClass::Dv, milli)
    }

    fn dist(&self, a: usize, b: usize) -> u64 {
        self.table.get(a, b).expect("deliverable pdos are reachable")
    }

    fn new_route(&self) -> Work {
        let mut w = Work {
            stops: vec![self.depot, self.depot],
            pdos: vec![Vec::new(), Vec::new()],
            cum: vec![0, 0],
            deadline: vec![f64::INFINITY, f64::INFINITY],
            release: 0,
            pre_slack: Vec::new(),
            suf_slack: Vec::new(),
        };
        self.refresh(&mut w);
        w
    }

    fn refresh(&self, w: &mut Work) {
        let n = w.stops.len();
        w.cum.resize(n, 0);
        w.cum[0] = 0;
        for i in 1..n {
            w.cum[i] = w.cum[i - 1] + self.dist(w.stops[i - 1], w.stops[i]);
        }
        let slack: Vec<f64> = (0..n).map(|i| w.deadline[i] - self.minutes(w.cum[i])).collect();
        w.pre_slack = slack.clone();
        for i in 1..n {
            w.pre_slack[i] = w.pre_slack[i - 1].min(slack[i]);
        }
        w.suf_slack = slack;
        for i in (0..n - 1).rev() {
            w.suf_slack[i] = w.suf_slack[i].min(w.suf_slack[i + 1]);
        }
    }

    /// Cheapest insertion of PDO `p` into `w`; with `respect_windows` only on-time positions.
    fn best_insertion(&self, w: &Work, p: &Pdo, u: usize, respect_windows: bool) -> Option<Insertion> {
        let depart = w.release.max(p.earliest_pickup) as f64;
        let dl = p.latest_delivery as f64;
        let n = w.stops.len();
        if let Some(i) = (1..n - 1).find(|&i| w.stops[i] == u) {
            let ok = !respect_windows
                || (depart <= w.pre_slack[n - 1] + TIME_TOL && depart + self.minutes(w.cum[i]) <= dl + TIME_TOL);
            return ok.then_some(Insertion {
                delta: 0,
                at: i,
                merge: true,
            });
        }
        if self.cap.is_some_and(|c| n - 2 >= c) {
            return None;
        }
        let mut best: Option<Insertion> = None;
        for l in 0..n - 1 {
            let (a, b) = (w.stops[l], w.stops[l + 1]);
            let au = self.dist(a, u);
            let delta = au + self.dist(u, b) - self.dist(a, b);
            if best.is_some_and(|x| x.delta <= delta) {
                continue;
            }
            if respect_windows {
                let ok = depart <= w.pre_slack[l] + TIME_TOL
                    && depart + self.minutes(w.cum[l] + au) <= dl + TIME_TOL
                    && depart + self.minutes(delta) <= w.suf_slack[l + 1] + TIME_TOL;
                if !ok {
                    continue;
                }
            }
            best = Some(Insertion {
                delta,
                at: l,
                merge: false,
            });
        }
        best
    }

    fn apply(&self, w: &mut Work, pos: usize, p: &Pdo, ins: Insertion) {
        let u = self.node[pos];
        if ins.merge {
            w.pdos[ins.at].push(pos);
            w.deadline[ins.at] = w.deadline[ins.at].min(p.latest_delivery as f64);
        } else {
            w.stops.insert(ins.at + 1, u);
            w.pdos.insert(ins.at + 1, vec![pos]);
            w.deadline.insert(ins.at + 1, p.latest_delivery as f64);
        }
        w.release = w.release.max(p.earliest_pickup);
        self.refresh(w);
    }

    fn finish(&self, pdos: &[&Pdo], w: &Work) -> Result<DvRoute> {
        let stops: Vec<NodeId> = w.stops.iter().map(|&i| self.inst.network.node_at(i)).collect();
        let served = w
            .pdos
            .iter()
            .map(|list| {
                let mut ids: Vec<PdoId> = list.iter().map(|&i| pdos[i].id).collect();
                ids.sort();
                ids
            })
            .collect();
        let stop_times = self.inst.dv_schedule(&stops, w.release as f64)?;
        Ok(DvRoute {
            stops,
            served,
            stop_times,
        })
    }
}

fn collect<'a>(instance: &'a Instance, pdos: &[PdoId]) -> Result<Vec<&'a Pdo>> {
    let mut ids = pdos.to_vec();
    ids.sort();
    ids.dedup();
    let bad = undeliverable(instance, &ids);
    if !bad.is_empty() {
        return Err(Error::InfeasiblePdos(bad));
    }
    Ok(ids.iter().map(|id| instance.pdo(*id).expect("checked")).collect())
}

fn builder<'a>(instance: &'a Instance, pdos: &[&Pdo], cap: Option<usize>) -> Result<Builder<'a>> {
    let net = &instance.network;
    Ok(Builder {
        inst: instance,
        table: net.distances(),
        depot: net.require(instance.depot)?,
        cap,
        node: pdos.iter().map(|p| net.require(p.drop_node)).collect::<Result<_>>()?,
    })
}

/// One route through every given PDO's location by cheapest insertion, with
/// no stop cap. Positions that keep every stop on time are preferred; if a
/// PDO has none it goes to its cheapest position regardless.
pub fn build_single_route(instance: &Instance, pdos: &[PdoId]) -> Result<DvRoute> {
    let list = collect(instance, pdos)?;
    let b = builder(instance, &list, None)?;
    let mut w = b.new_route();
    let mut left: Vec<usize> = (0..list.len()).collect();
    while !left.is_empty() {
        let mut pick: Option<(bool, u64, usize, Insertion)> = None;
        for (li, &i) in left.iter().enumerate() {
            let feasible = b.best_insertion(&w, list[i], b.node[i], true);
            let (on_time, ins) = match feasible {
                Some(x) => (true, x),
                None => (false, b.best_insertion(&w, list[i], b.node[i], false).expect("uncapped")),
            };
            let better = match pick {
                None => true,
                Some((t, d, _, _)) => (on_time && !t) || (on_time == t && ins.delta < d),
            };
            if better {
                pick = Some((on_time, ins.delta, li, ins));
            }
        }
        let (_, _, li, ins) = pick.unwrap();
        let i = left.remove(li);
        b.apply(&mut w, i, list[i], ins);
    }
    b.finish(&list, &w)
}

/// Routes every PDO with capped DVs by repeatedly committing the globally
/// cheapest on-time insertion. A new DV opens only when no open route can take
/// any remaining PDO. Ties go to the smallest (pdo id, route, link).
pub fn insertion_mvrp(instance: &Instance, pdos: &[PdoId]) -> Result<Vec<DvRoute>> {
    let list = collect(instance, pdos)?;
    if list.is_empty() {
        return Ok(Vec::new());
    }
    let b = builder(instance, &list, Some(instance.dv_spec.max_stops as usize))?;
    let mut routes: Vec<Work> = Vec::new();
    // best[pos][route]
    let mut best: Vec<Vec<Option<Insertion>>> = vec![Vec::new(); list.len()];
    let mut left: Vec<bool> = vec![true; list.len()];
    let mut remaining = list.len();

    while remaining > 0 {
        let mut pick: Option<(u64, usize, usize)> = None;
        for (i, cands) in best.iter().enumerate() {
            if !left[i] {
                continue;
            }
            for (r, c) in cands.iter().enumerate() {
                if let Some(c) = c {
                    if pick.map_or(true, |(d, _, _)| c.delta < d) {
                        pick = Some((c.delta, i, r));
                    }
                }
            }
        }
        let (i, r) = match pick {
            Some((_, i, r)) => (i, r),
            None => {
                if let Some(limit) = instance.dv_spec.fleet_limit {
                    if routes.len() >= limit as usize {
                        return Err(Error::FleetLimit {
                            limit,
                            needed: routes.len() + 1,
                        });
                    }
                }
                let w = b.new_route();
                for (j, cands) in best.iter_mut().enumerate() {
                    cands.push(if left[j] { b.best_insertion(&w, list[j], b.node[j], true) } else { None });
                }
                routes.push(w);
                let r = routes.len() - 1;
                let mut first: Option<(u64, usize)> = None;
                for (j, cands) in best.iter().enumerate() {
                    if let (true, Some(c)) = (left[j], cands[r]) {
                        if first.map_or(true, |(d, _)| c.delta < d) {
                            first = Some((c.delta, j));
                        }
                    }
                }
                let (_, j) = first.expect("deliverable alone");
                (j, r)
            }
        };
        let ins = best[i][r].expect("picked");
        b.apply(&mut routes[r], i, list[i], ins);
        left[i] = false;
        remaining -= 1;
        for j in 0..list.len() {
            best[j][r] = if left[j] { b.best_insertion(&routes[r], list[j], b.node[j], true) } else { None };
        }
    }
    routes.iter().map(|w| b.finish(&list, w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::*;
    use crate::domain::{validate_solution, Solution};
    use crate::network::{undirected, Network, Point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Nodes 1..=5 on a line, depot 3 in the middle, 1 mile apart.
    fn through_depot() -> Instance {
        let mut inst = line_instance();
        inst.network = Network::new(
            (1..=5).map(n).collect(),
            undirected(&[(n(1), n(2), 1000), (n(2), n(3), 1000), (n(3), n(4), 1000), (n(4), n(5), 1000)]),
        )
        .unwrap();
        inst.depot = n(3);
        inst
    }

    #[test]
    fn marginal_cost_examples() {
        let inst = line_instance();
        let route = DvRoute {
            stops: vec![n(1), n(3), n(1)],
            served: vec![vec![], vec![PdoId(1)], vec![]],
            stop_times: vec![480.0, 484.0, 488.0],
        };
        // 2 lies on the shortest 1 -> 3 path
        assert_eq!(marginal_insertion_cost(&inst, &route, (n(1), n(3)), n(2)).unwrap(), 0.0);
        // c(1,5) + c(5,3) - c(1,3) = 2 + 1 - 2 miles
        let c = marginal_insertion_cost(&inst, &route, (n(1), n(3)), n(5)).unwrap();
        assert!((c - 1.5).abs() < 1e-12);
        assert!(marginal_insertion_cost(&inst, &route, (n(1), n(1)), n(5)).is_err());
    }

    #[test]
    fn marginal_cost_matches_route_difference() {
        let inst = line_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = n(rng.gen_range(2..=5));
            let u = n(rng.gen_range(2..=5));
            let mut route = DvRoute::empty(n(1));
            route.stops.insert(1, a);
            let before = route.cost(&inst).unwrap();
            let mc = marginal_insertion_cost(&inst, &route, (n(1), a), u).unwrap();
            route.stops.insert(1, u);
            assert!(mc >= 0.0);
            assert!((route.cost(&inst).unwrap() - before - mc).abs() < 1e-9);
        }
    }

    #[test]
    fn single_route_basics() {
        let mut inst = line_instance();
        let r = build_single_route(&inst, &[]).unwrap();
        assert_eq!(r.stops, vec![n(1), n(1)]);
        assert_eq!(r.cost(&inst).unwrap(), 0.0);
        inst.pdos.push(pdo(1, 4, 720));
        let r = build_single_route(&inst, &[PdoId(1)]).unwrap();
        assert_eq!(r.stops, vec![n(1), n(4), n(1)]);
        assert!((r.cost(&inst).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn undeliverable_pdo_is_reported() {
        let mut inst = line_instance();
        inst.pdos.push(pdo(1, 4, 485));
        inst.pdos.push(pdo(2, 2, 720));
        let err = insertion_mvrp(&inst, &[PdoId(1), PdoId(2)]).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePdos(ref v) if v == &vec![PdoId(1)]));
        assert!(build_single_route(&inst, &[PdoId(1)]).is_err());
    }

    #[test]
    fn line_through_depot_single_route() {
        let mut inst = through_depot();
        inst.pdos = vec![pdo(1, 1, 720), pdo(2, 4, 720), pdo(3, 5, 720)];
        let routes = insertion_mvrp(&inst, &[PdoId(1), PdoId(2), PdoId(3)]).unwrap();
        assert_eq!(routes.len(), 1);
        let r = &routes[0];
        // 8 miles is the best any single tour can do
        assert_eq!(r.length_milli(&inst).unwrap(), 8000);
        let pos = |x: u32| r.stops.iter().position(|&s| s == n(x)).unwrap();
        assert!(pos(4) < pos(5) || pos(5) < pos(4));
        assert!((pos(4) as i64 - pos(5) as i64).abs() == 1);
    }

    #[test]
    fn stop_cap_one_gives_one_route_per_location() {
        let mut inst = through_depot();
        inst.dv_spec.max_stops = 1;
        inst.pdos = vec![pdo(1, 1, 720), pdo(2, 4, 720), pdo(3, 5, 720)];
        assert_eq!(insertion_mvrp(&inst, &[PdoId(1), PdoId(2), PdoId(3)]).unwrap().len(), 3);
        assert!(insertion_mvrp(&inst, &[]).unwrap().is_empty());
        inst.dv_spec.fleet_limit = Some(2);
        assert!(matches!(
            insertion_mvrp(&inst, &[PdoId(1), PdoId(2), PdoId(3)]),
            Err(Error::FleetLimit { limit: 2, .. })
        ));
    }

    #[test]
    fn shared_location_uses_one_stop() {
        let mut inst = through_depot();
        inst.dv_spec.max_stops = 1;
        inst.pdos = vec![pdo(1, 5, 720), pdo(2, 5, 700)];
        let routes = insertion_mvrp(&inst, &[PdoId(1), PdoId(2)]).unwrap();
        assert_eq!(routes.len(), 1);
        assert_eq!(routes[0].served[1], vec![PdoId(1), PdoId(2)]);
    }

    fn random_grid(seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = 4u32;
        let id = |x: u32, y: u32| n(y * side + x);
        let mut edges = Vec::new();
        for y in 0..side {
            for x in 0..side {
                if x + 1 < side {
                    edges.push((id(x, y), id(x + 1, y), rng.gen_range(500..1500)));
                }
                if y + 1 < side {
                    edges.push((id(x, y), id(x, y + 1), rng.gen_range(500..1500)));
                }
            }
        }
        let nodes = (0..side * side).map(|i| (n(i), Point { x: (i % side) as f64, y: (i / side) as f64 })).collect();
        let mut inst = line_instance();
        inst.network = Network::with_positions(nodes, undirected(&edges)).unwrap();
        inst.depot = n(0);
        inst
    }

    fn perms(v: &mut Vec<NodeId>, k: usize, out: &mut Vec<Vec<NodeId>>) {
        if k == v.len() {
            out.push(v.clone());
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            perms(v, k + 1, out);
            v.swap(k, i);
        }
    }

    #[test]
    fn single_route_within_twice_optimal() {
        for seed in 0..30 {
            let mut inst = random_grid(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            inst.pdos = (0..4).map(|i| pdo(i, rng.gen_range(1..16), 1200)).collect();
            let ids: Vec<PdoId> = inst.pdos.iter().map(|p| p.id).collect();
            let r = build_single_route(&inst, &ids).unwrap();
            let mut locs: Vec<NodeId> = inst.pdos.iter().map(|p| p.drop_node).collect();
            locs.sort();
            locs.dedup();
            let mut all = Vec::new();
            perms(&mut locs, 0, &mut all);
            let opt = all
                .iter()
                .map(|p| {
                    let mut s = vec![n(0)];
                    s.extend(p);
                    s.push(n(0));
                    inst.dv_route_milli(&s).unwrap()
                })
                .min()
                .unwrap();
            assert!(r.length_milli(&inst).unwrap() <= 2 * opt, "seed {seed}");
        }
    }

    #[test]
    fn mvrp_output_validates_and_respects_bounds() {
        for seed in 0..60 {
            let mut inst = random_grid(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
            inst.dv_spec.max_stops = rng.gen_range(1..5);
            let count = rng.gen_range(0..12);
            inst.pdos = (0..count)
                .map(|i| {
                    let mut p = pdo(i, rng.gen_range(1..16), [500, 520, 720][rng.gen_range(0..3)]);
                    p.earliest_pickup = 480 + rng.gen_range(0..10);
                    p
                })
                .collect();
            let ids: Vec<PdoId> = inst.pdos.iter().map(|p| p.id).collect();
            let routes = match insertion_mvrp(&inst, &ids) {
                Ok(r) => r,
                Err(Error::InfeasiblePdos(bad)) => {
                    assert!(!bad.is_empty());
                    continue;
                }
                Err(e) => panic!("{e}"),
            };
            let mut locs: Vec<NodeId> = inst.pdos.iter().map(|p| p.drop_node).collect();
            locs.sort();
            locs.dedup();
            let q = inst.dv_spec.max_stops as usize;
            assert!(routes.len() >= locs.len().div_ceil(q));
            let plans = routes.iter().map(|r| r.to_plan()).collect();
            let sol = Solution::priced(&inst, vec![], plans).unwrap();
            let rep = validate_solution(&inst, &sol);
            assert!(rep.is_ok(), "seed {seed}: {:?}", rep.violations);
        }
    }

    #[test]
    fn inserting_a_pdo_never_lowers_variable_cost() {
        for seed in 0..40 {
            let mut inst = random_grid(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
            inst.pdos = (0..6).map(|i| pdo(i, rng.gen_range(1..16), 1200)).collect();
            let ids: Vec<PdoId> = inst.pdos.iter().map(|p| p.id).collect();
            let routes = insertion_mvrp(&inst, &ids[..5]).unwrap();
            let before: f64 = routes.iter().map(|r| r.cost(&inst).unwrap()).sum();
            let u = inst.pdos[5].drop_node;
            for r in &routes {
                for w in r.stops.windows(2) {
                    let mc = marginal_insertion_cost(&inst, r, (w[0], w[1]), u).unwrap();
                    let mut stops = r.stops.clone();
                    let at = stops.windows(2).position(|x| x == w).unwrap();
                    stops.insert(at + 1, u);
                    let other: f64 = routes.iter().filter(|x| !std::ptr::eq(*x, r)).map(|x| x.cost(&inst).unwrap()).sum();
                    let after = other + inst.model().dollars(VehicleClass::Dv, inst.dv_route_milli(&stops).unwrap());
                    assert!(mc >= 0.0 && after + 1e-9 >= before, "seed {seed}");
                }
            }
        }
    }
}
