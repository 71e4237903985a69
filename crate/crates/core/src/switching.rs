//! Cost-driven switching of PDOs from SPVs to the DV route.
//!
//! Each round prices every SPV-served PDO: what its SPV saves by dropping it,
//! minus the cost of inserting it next to the nearest DV stop, minus a fixed
//! DV charge when the insertion needs one more truckload. The PDO with the
//! largest positive saving moves; the loop ends when no saving is positive.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::domain::{Instance, PdoId, SpvId, MONEY_TOL};
use crate::dvrp::{deliverable_alone, DvRoute};
use crate::error::{Error, Result};
use crate::kpaths::CandidateRoute;
use crate::network::{NodeId, VehicleClass};

/// Route and served PDOs of one active SPV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpvAssignment {
    /// Index into the SPV's candidate routes.
    pub route: usize,
    pub served: Vec<PdoId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchState {
    pub spv: BTreeMap<SpvId, SpvAssignment>,
    pub dv_route: DvRoute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchCandidate {
    pub pdo: PdoId,
    pub spv: SpvId,
    pub spv_cost: f64,
    pub nearest_dv_stop: Option<NodeId>,
    pub insertion_cost: f64,
    /// Stop index after which the PDO's location is inserted, or the stop it
    /// merges into when `merge` is set.
    pub position: usize,
    pub merge: bool,
    pub triggers_new_dv: bool,
    pub saving: f64,
    /// False when screened out; such candidates rank below everything.
    pub improving: bool,
}

impl SwitchCandidate {
    pub fn rank(&self) -> f64 {
        if self.improving {
            self.saving
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub pdo: PdoId,
    pub spv: SpvId,
    pub saving: f64,
    pub cost_before: f64,
    pub cost_after: f64,
    pub dv_load: usize,
    pub new_dv: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SwitchLog {
    pub records: Vec<SwitchRecord>,
    /// Largest saving left when the loop stopped, if any PDO remained on an SPV.
    pub final_max_saving: Option<f64>,
}

fn plan_cost(instance: &Instance, route: &CandidateRoute, n: usize) -> f64 {
    route.detour_cost + instance.params.per_pdo_compensation * n as f64
}

/// Cheapest candidate route serving all of `pdos` within `cap`; the null
/// route when `pdos` is empty.
pub fn best_plan(routes: &[CandidateRoute], pdos: &[PdoId], cap: u32) -> Option<usize> {
    if pdos.is_empty() {
        return routes.iter().position(|r| r.is_null);
    }
    if pdos.len() > cap as usize {
        return None;
    }
    let mut best: Option<usize> = None;
    for (i, r) in routes.iter().enumerate() {
        if r.is_null || !pdos.iter().all(|p| r.can_serve(*p)) {
            continue;
        }
        if best.map_or(true, |b| r.detour_cost < routes[b].detour_cost) {
            best = Some(i);
        }
    }
    best
}

/// What the SPV saves by no longer serving `pdo`: current plan cost minus the
/// cheapest plan for the remaining PDOs, both including per-PDO compensation.
pub fn spv_service_cost(instance: &Instance, routes: &[CandidateRoute], plan: &SpvAssignment, pdo: PdoId) -> Result<f64> {
    if !plan.served.contains(&pdo) {
        return Err(Error::Contract(format!("pdo {pdo} is not on this SPV plan")));
    }
    let current = routes
        .get(plan.route)
        .ok_or_else(|| Error::Contract(format!("route index {} out of range", plan.route)))?;
    let rest: Vec<PdoId> = plan.served.iter().copied().filter(|p| *p != pdo).collect();
    let best = best_plan(routes, &rest, u32::MAX).ok_or_else(|| Error::Contract("remaining PDOs have no route".into()))?;
    Ok(plan_cost(instance, current, plan.served.len()) - plan_cost(instance, &routes[best], rest.len()))
}

fn dv_dollars(instance: &Instance, milli: i64) -> f64 {
    instance.model().dollars_signed(VehicleClass::Dv, milli)
}

fn trucks(load: usize, q: usize) -> usize {
    load.div_ceil(q)
}

/// Prices moving `pdo` (worth `spv_cost` to its SPV) onto the DV route.
pub fn evaluate_candidate(
    instance: &Instance,
    dv_route: &DvRoute,
    spv: SpvId,
    spv_cost: f64,
    pdo: PdoId,
) -> Result<SwitchCandidate> {
    let p = instance.pdo(pdo).ok_or_else(|| Error::Contract(format!("unknown pdo {pdo}")))?;
    let i = p.drop_node;
    let mut cand = SwitchCandidate {
        pdo,
        spv,
        spv_cost,
        nearest_dv_stop: None,
        insertion_cost: 0.0,
        position: 0,
        merge: false,
        triggers_new_dv: false,
        saving: f64::NEG_INFINITY,
        improving: false,
    };
    let stops = &dv_route.stops;
    let interior = 1..stops.len().saturating_sub(1);
    let mut nearest: Option<(u64, NodeId, usize)> = None;
    for k in interior {
        let Some(d) = instance.length(i, stops[k]) else { continue };
        if nearest.map_or(true, |(bd, bn, _)| (d, stops[k]) < (bd, bn)) {
            nearest = Some((d, stops[k], k));
        }
    }
    let Some((d, j, k)) = nearest else {
        return Ok(cand);
    };
    cand.nearest_dv_stop = Some(j);
    if 2.0 * dv_dollars(instance, d as i64) >= spv_cost || !deliverable_alone(instance, p) {
        return Ok(cand);
    }
    let q = instance.dv_spec.max_stops as usize;
    let load = dv_route.load();
    if let Some(m) = stops[1..stops.len() - 1].iter().position(|&s| s == i) {
        cand.merge = true;
        cand.position = m + 1;
    } else {
        let dist = |a: NodeId, b: NodeId| instance.length(a, b).ok_or(Error::NoPath { from: a, to: b });
        let mc = |a: NodeId, b: NodeId| -> Result<i64> { Ok(dist(a, i)? as i64 + dist(i, b)? as i64 - dist(a, b)? as i64) };
        let before = mc(stops[k - 1], j)?;
        let after = mc(j, stops[k + 1])?;
        let (delta, pos) = if before <= after { (before, k - 1) } else { (after, k) };
        cand.insertion_cost = dv_dollars(instance, delta);
        cand.position = pos;
        cand.triggers_new_dv = trucks(load + 1, q) > trucks(load, q);
    }
    let fixed = if cand.triggers_new_dv { instance.dv_spec.fixed_cost } else { 0.0 };
    cand.saving = spv_cost - cand.insertion_cost - fixed;
    cand.improving = true;
    Ok(cand)
}

/// SPV plans plus the DV route priced as `ceil(load / q_d)` truckloads.
pub fn estimated_cost(instance: &Instance, state: &SwitchState, routes: &HashMap<SpvId, Vec<CandidateRoute>>) -> Result<f64> {
    let mut total = 0.0;
    for (id, plan) in &state.spv {
        let r = routes
            .get(id)
            .and_then(|r| r.get(plan.route))
            .ok_or_else(|| Error::Contract(format!("no candidate routes for spv {id}")))?;
        total += plan_cost(instance, r, plan.served.len());
    }
    let milli = state.dv_route.length_milli(instance)?;
    total += instance.model().dollars(VehicleClass::Dv, milli);
    total += instance.dv_spec.fixed_cost * trucks(state.dv_route.load(), instance.dv_spec.max_stops as usize) as f64;
    Ok(total)
}

fn all_candidates(
    instance: &Instance,
    state: &SwitchState,
    routes: &HashMap<SpvId, Vec<CandidateRoute>>,
) -> Result<Vec<SwitchCandidate>> {
    let mut out = Vec::new();
    for (id, plan) in &state.spv {
        let r = routes.get(id).ok_or_else(|| Error::Contract(format!("no candidate routes for spv {id}")))?;
        for &p in &plan.served {
            let cost = spv_service_cost(instance, r, plan, p)?;
            out.push(evaluate_candidate(instance, &state.dv_route, *id, cost, p)?);
        }
    }
    Ok(out)
}

/// Switches PDOs one at a time, always the largest positive saving, until no
/// saving is positive. Does nothing while the DV route has no stops.
pub fn switch_loop(
    instance: &Instance,
    state: &mut SwitchState,
    routes: &HashMap<SpvId, Vec<CandidateRoute>>,
) -> Result<SwitchLog> {
    let mut log = SwitchLog::default();
    loop {
        if state.dv_route.is_empty() || state.spv.values().all(|p| p.served.is_empty()) {
            break;
        }
        let cands = all_candidates(instance, state, routes)?;
        let best = cands
            .iter()
            .filter(|c| c.improving)
            .fold(None::<&SwitchCandidate>, |b, c| match b {
                Some(b) if b.saving > c.saving || (b.saving == c.saving && b.pdo < c.pdo) => Some(b),
                _ => Some(c),
            });
        log.final_max_saving = Some(cands.iter().map(|c| c.rank()).fold(f64::NEG_INFINITY, f64::max));
        let Some(best) = best.filter(|b| b.saving > MONEY_TOL).cloned() else {
            break;
        };
        let before = estimated_cost(instance, state, routes)?;
        apply(instance, state, routes, &best)?;
        let after = estimated_cost(instance, state, routes)?;
        log.records.push(SwitchRecord {
            pdo: best.pdo,
            spv: best.spv,
            saving: best.saving,
            cost_before: before,
            cost_after: after,
            dv_load: state.dv_route.load(),
            new_dv: best.triggers_new_dv,
        });
    }
    if state.spv.values().all(|p| p.served.is_empty()) {
        log.final_max_saving = None;
    }
    Ok(log)
}

fn apply(
    instance: &Instance,
    state: &mut SwitchState,
    routes: &HashMap<SpvId, Vec<CandidateRoute>>,
    c: &SwitchCandidate,
) -> Result<()> {
    let node = instance.pdo(c.pdo).expect("evaluated").drop_node;
    let dv = &mut state.dv_route;
    if c.merge {
        dv.served[c.position].push(c.pdo);
        dv.served[c.position].sort();
    } else {
        dv.stops.insert(c.position + 1, node);
        dv.served.insert(c.position + 1, vec![c.pdo]);
    }
    let release = dv
        .pdos()
        .filter_map(|p| instance.pdo(p))
        .map(|p| p.earliest_pickup)
        .max()
        .unwrap_or(0);
    dv.stop_times = instance.dv_schedule(&dv.stops, release as f64)?;

    let plan = state.spv.get_mut(&c.spv).expect("evaluated");
    plan.served.retain(|p| *p != c.pdo);
    let r = &routes[&c.spv];
    plan.route = best_plan(r, &plan.served, u32::MAX).expect("current route still fits");
    if plan.served.is_empty() {
        state.spv.remove(&c.spv);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::*;
    use crate::dvrp::build_single_route;
    use crate::kpaths::{generate_candidate_routes, RouteConfig};

    fn route(spv: u32, cost: f64, servable: &[u32], null: bool) -> CandidateRoute {
        CandidateRoute {
            spv: SpvId(spv),
            path: vec![],
            length_milli: 0,
            travel_time: 0.0,
            detour_cost: cost,
            servable: servable.iter().map(|&p| PdoId(p)).collect(),
            is_null: null,
        }
    }

    #[test]
    fn service_cost_single_pdo() {
        let mut inst = line_instance();
        inst.pdos.push(pdo(1, 5, 720));
        let routes = vec![route(1, 0.0, &[], true), route(1, 0.56, &[1], false)];
        let plan = SpvAssignment {
            route: 1,
            served: vec![PdoId(1)],
        };
        let c = spv_service_cost(&inst, &routes, &plan, PdoId(1)).unwrap();
        assert!((c - 2.06).abs() < 1e-12);
        assert!(spv_service_cost(&inst, &routes, &plan, PdoId(2)).is_err());
    }

    #[test]
    fn service_cost_shared_node_is_compensation() {
        let inst = line_instance();
        let routes = vec![route(1, 0.0, &[], true), route(1, 0.56, &[1, 2], false), route(1, 1.2, &[1, 2], false)];
        let plan = SpvAssignment {
            route: 1,
            served: vec![PdoId(1), PdoId(2)],
        };
        for p in [PdoId(1), PdoId(2)] {
            let c = spv_service_cost(&inst, &routes, &plan, p).unwrap();
            assert!((c - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn service_cost_distinct_nodes_reoptimizes() {
        let inst = line_instance();
        let routes = vec![
            route(1, 0.0, &[], true),
            route(1, 2.0, &[1, 2], false),
            route(1, 0.5, &[1], false),
            route(1, 1.0, &[2], false),
        ];
        let plan = SpvAssignment {
            route: 1,
            served: vec![PdoId(1), PdoId(2)],
        };
        // dropping 1 leaves {2}: 2 + 3.0 - (1.0 + 1.5)
        assert!((spv_service_cost(&inst, &routes, &plan, PdoId(1)).unwrap() - 2.5).abs() < 1e-12);
        assert!((spv_service_cost(&inst, &routes, &plan, PdoId(2)).unwrap() - 3.0).abs() < 1e-12);
    }

    fn dv_with_stop(inst: &Instance, node: u32) -> DvRoute {
        let mut r = DvRoute::empty(inst.depot);
        r.stops.insert(1, n(node));
        r.served.insert(1, vec![PdoId(99)]);
        r
    }

    #[test]
    fn candidate_saving_and_screen() {
        let mut inst = line_instance();
        inst.pdos.push(pdo(1, 5, 720));
        let dv = dv_with_stop(&inst, 3);
        // nearest stop 3 is 1 mile away: round trip $3, insertion adds 1 mile ($1.5)
        let c = evaluate_candidate(&inst, &dv, SpvId(1), 10.0, PdoId(1)).unwrap();
        assert!(c.improving && !c.triggers_new_dv);
        assert_eq!(c.nearest_dv_stop, Some(n(3)));
        assert!((c.insertion_cost - 1.5).abs() < 1e-12);
        assert!((c.saving - 8.5).abs() < 1e-12);
        let c = evaluate_candidate(&inst, &dv, SpvId(1), 3.0, PdoId(1)).unwrap();
        assert!(!c.improving && c.rank() == f64::NEG_INFINITY);
    }

    #[test]
    fn candidate_full_dv_pays_fixed_cost() {
        let mut inst = line_instance();
        inst.dv_spec.max_stops = 1;
        inst.pdos.push(pdo(1, 5, 720));
        let dv = dv_with_stop(&inst, 3);
        let c = evaluate_candidate(&inst, &dv, SpvId(1), 10.0, PdoId(1)).unwrap();
        assert!(c.triggers_new_dv);
        assert!((c.saving - (10.0 - 1.5 - 120.0)).abs() < 1e-12);
    }

    #[test]
    fn loop_without_positive_saving_is_noop() {
        let mut inst = line_instance();
        inst.pdos.push(pdo(1, 5, 720));
        let routes: HashMap<SpvId, Vec<CandidateRoute>> =
            [(SpvId(1), vec![route(1, 0.0, &[], true), route(1, 0.56, &[1], false)])].into();
        let mut state = SwitchState {
            spv: [(SpvId(1), SpvAssignment { route: 1, served: vec![PdoId(1)] })].into(),
            dv_route: dv_with_stop(&inst, 3),
        };
        let before = state.clone();
        let log = switch_loop(&inst, &mut state, &routes).unwrap();
        assert!(log.records.is_empty());
        assert_eq!(state, before);
    }

    #[test]
    fn single_dominant_candidate_switches_once() {
        let mut inst = line_instance();
        inst.pdos.push(pdo(1, 5, 720));
        inst.pdos.push(pdo(2, 3, 720));
        let routes: HashMap<SpvId, Vec<CandidateRoute>> =
            [(SpvId(1), vec![route(1, 0.0, &[], true), route(1, 9.0, &[1], false)])].into();
        let mut state = SwitchState {
            spv: [(SpvId(1), SpvAssignment { route: 1, served: vec![PdoId(1)] })].into(),
            dv_route: build_single_route(&inst, &[PdoId(2)]).unwrap(),
        };
        let log = switch_loop(&inst, &mut state, &routes).unwrap();
        assert_eq!(log.records.len(), 1);
        let r = &log.records[0];
        assert!((r.cost_before - r.saving - r.cost_after).abs() < 1e-9);
        assert!(state.spv.is_empty());
        assert_eq!(state.dv_route.load(), 2);
        assert_eq!(log.final_max_saving, None);
    }

    #[test]
    fn loop_matches_greedy_replay() {
        // SPVs with expensive detours far from a DV that already visits 3 and 4
        let mut inst = line_instance();
        inst.pdos = vec![pdo(1, 2, 720), pdo(2, 5, 720), pdo(3, 3, 720), pdo(4, 4, 720)];
        for (id, o, d) in [(1, 4, 2), (2, 2, 3), (3, 3, 5)] {
            inst.spvs.push(spv(id, o, d, 480, 40.0));
        }
        let mut routes = HashMap::new();
        let mut state = SwitchState {
            spv: BTreeMap::new(),
            dv_route: build_single_route(&inst, &[PdoId(3), PdoId(4)]).unwrap(),
        };
        for s in &inst.spvs {
            let r = generate_candidate_routes(&inst, s, RouteConfig::default()).unwrap();
            let pick = |p: PdoId| best_plan(&r, &[p], s.max_stops);
            let served = if s.id == SpvId(1) { PdoId(1) } else { PdoId(2) };
            if s.id != SpvId(3) {
                if let Some(k) = pick(served) {
                    state.spv.insert(s.id, SpvAssignment { route: k, served: vec![served] });
                }
            }
            routes.insert(s.id, r);
        }
        let mut replay = state.clone();
        let log = switch_loop(&inst, &mut state, &routes).unwrap();
        for rec in &log.records {
            let cands = all_candidates(&inst, &replay, &routes).unwrap();
            let best = cands.iter().filter(|c| c.improving).map(|c| c.saving).fold(f64::NEG_INFINITY, f64::max);
            let chosen = cands.iter().find(|c| c.pdo == rec.pdo).unwrap();
            assert!((chosen.saving - best).abs() < 1e-12);
            assert!((rec.cost_before - rec.saving - rec.cost_after).abs() < 1e-9);
            apply(&inst, &mut replay, &routes, chosen).unwrap();
        }
        assert_eq!(replay, state);
        if let Some(m) = log.final_max_saving {
            assert!(m <= MONEY_TOL);
        }
    }
}
