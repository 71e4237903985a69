//! Instance model, solution representation, cost accounting and the
//! feasibility validator.
//!
//! Timing model used throughout the crate:
//!
//! * An active SPV drives origin -> depot, waits for the latest release time
//!   among the PDOs it carries, spends `service_time` once, then follows its
//!   route to its destination. Drops take no extra time.
//! * A DV leaves the depot at the latest release time among its PDOs, never
//!   waits and spends no time at stops.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{milli_to_miles, CostModel, Network, NodeId, VehicleClass};

/// Monetary tolerance in dollars.
pub const MONEY_TOL: f64 = 1e-6;
/// Time tolerance in minutes.
pub const TIME_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PdoId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpvId(pub u32);

impl fmt::Display for PdoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for SpvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Package delivery order. Times are minutes of the day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pdo {
    pub id: PdoId,
    pub drop_node: NodeId,
    pub earliest_pickup: u32,
    pub latest_delivery: u32,
    /// Reporting only; vehicles are limited by stops, not volume.
    pub quantity: u32,
}

/// Shared personal vehicle with its own trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spv {
    pub id: SpvId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub earliest_start: u32,
    pub latest_arrival: u32,
    /// Maximum PDOs carried, 1..=4.
    pub max_stops: u32,
    /// Minutes available for origin -> depot -> destination including service.
    pub detour_willingness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DvSpec {
    /// Maximum distinct delivery locations per route.
    pub max_stops: u32,
    pub fixed_cost: f64,
    /// `None` means unbounded.
    pub fleet_limit: Option<u32>,
}

impl Default for DvSpec {
    fn default() -> Self {
        Self {
            max_stops: 60,
            fixed_cost: 120.0,
            fleet_limit: None,
        }
    }
}

/// Compensation and timing parameters. Per-mile rates and speeds live in
/// the cost model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub per_pdo_compensation: f64,
    /// Minutes spent at the depot by an SPV picking up.
    pub service_time: f64,
    pub cost_model: CostModel,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            per_pdo_compensation: 1.5,
            service_time: 10.0,
            cost_model: CostModel::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub network: Network,
    pub depot: NodeId,
    pub pdos: Vec<Pdo>,
    pub spvs: Vec<Spv>,
    pub dv_spec: DvSpec,
    pub params: CostParams,
    /// Treat every SPV as starting its trip at the depot.
    pub spv_origins_at_depot: bool,
}

impl Instance {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInstance(m));
        if !self.network.contains(self.depot) {
            return bad(format!("depot {} is not a network node", self.depot));
        }
        self.params.cost_model.validate()?;
        let p = &self.params;
        if !(p.per_pdo_compensation >= 0.0 && p.service_time >= 0.0) {
            return bad("compensation and service time must be non-negative".into());
        }
        if self.dv_spec.max_stops < 1 || !(self.dv_spec.fixed_cost >= 0.0) {
            return bad("DV max_stops must be >= 1 and fixed_cost >= 0".into());
        }
        let mut ids = std::collections::HashSet::new();
        for pdo in &self.pdos {
            if !ids.insert(pdo.id) {
                return bad(format!("duplicate pdo id {}", pdo.id));
            }
            if !self.network.contains(pdo.drop_node) {
                return bad(format!("pdo {}: drop node {} not in network", pdo.id, pdo.drop_node));
            }
            if pdo.drop_node == self.depot {
                return bad(format!("pdo {}: drop node is the depot", pdo.id));
            }
            if pdo.earliest_pickup >= pdo.latest_delivery {
                return bad(format!("pdo {}: earliest_pickup must precede latest_delivery", pdo.id));
            }
            if pdo.quantity < 1 {
                return bad(format!("pdo {}: quantity must be >= 1", pdo.id));
            }
        }
        let mut ids = std::collections::HashSet::new();
        for spv in &self.spvs {
            if !ids.insert(spv.id) {
                return bad(format!("duplicate spv id {}", spv.id));
            }
            for node in [spv.origin, spv.destination] {
                if !self.network.contains(node) {
                    return bad(format!("spv {}: node {} not in network", spv.id, node));
                }
            }
            if spv.earliest_start >= spv.latest_arrival {
                return bad(format!("spv {}: earliest_start must precede latest_arrival", spv.id));
            }
            if !(1..=4).contains(&spv.max_stops) {
                return bad(format!("spv {}: max_stops must be in 1..=4", spv.id));
            }
            if !(spv.detour_willingness >= 0.0) {
                return bad(format!("spv {}: detour_willingness must be >= 0", spv.id));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> &CostModel {
        &self.params.cost_model
    }

    pub fn pdo(&self, id: PdoId) -> Option<&Pdo> {
        self.pdos.iter().find(|p| p.id == id)
    }

    pub fn spv(&self, id: SpvId) -> Option<&Spv> {
        self.spvs.iter().find(|s| s.id == id)
    }

    pub(crate) fn pdo_positions(&self) -> HashMap<PdoId, usize> {
        self.pdos.iter().enumerate().map(|(i, p)| (p.id, i)).collect()
    }

    /// Shortest length between two nodes in milli-miles.
    pub fn length(&self, from: NodeId, to: NodeId) -> Option<u64> {
        self.network.length_between(from, to)
    }

    /// Origin -> depot length; zero when SPVs start at the depot.
    pub fn depot_leg_milli(&self, spv: &Spv) -> Option<u64> {
        if self.spv_origins_at_depot {
            Some(0)
        } else {
            self.length(spv.origin, self.depot)
        }
    }

    /// Length of the SPV's own trip without deliveries.
    pub fn direct_trip_milli(&self, spv: &Spv) -> Option<u64> {
        if self.spv_origins_at_depot {
            self.length(self.depot, spv.destination)
        } else {
            self.length(spv.origin, spv.destination)
        }
    }

    /// Earliest time the SPV can be at the depot.
    pub fn depot_arrival(&self, spv: &Spv) -> Option<f64> {
        let leg = self.depot_leg_milli(spv)?;
        Some(spv.earliest_start as f64 + self.model().minutes(VehicleClass::Spv, leg))
    }

    /// Depot departure for an SPV carrying PDOs with the given release times.
    pub fn spv_departure(&self, spv: &Spv, releases: impl IntoIterator<Item = u32>) -> Option<f64> {
        let arrival = self.depot_arrival(spv)?;
        let release = releases.into_iter().max().map_or(f64::NEG_INFINITY, |r| r as f64);
        Some(arrival.max(release) + self.params.service_time)
    }

    fn check_spv_route(&self, spv: &Spv, route: &[NodeId]) -> Result<u64> {
        if route.first() != Some(&self.depot) || route.last() != Some(&spv.destination) {
            return Err(Error::Contract(format!(
                "spv {} route must run from depot {} to destination {}",
                spv.id, self.depot, spv.destination
            )));
        }
        self.network.path_length_milli(route)
    }

    /// Detour compensation: origin->depot + route - direct trip, in SPV dollars.
    pub fn spv_detour_cost(&self, spv: &Spv, route: &[NodeId]) -> Result<f64> {
        let route_len = self.check_spv_route(spv, route)?;
        let leg = self.depot_leg_milli(spv).ok_or(Error::NoPath {
            from: spv.origin,
            to: self.depot,
        })?;
        let direct = self.direct_trip_milli(spv).ok_or(Error::NoPath {
            from: spv.origin,
            to: spv.destination,
        })?;
        let delta = (leg + route_len) as i64 - direct as i64;
        Ok(self.model().dollars_signed(VehicleClass::Spv, delta))
    }

    /// Arrival times along an SPV route; entry 0 is the depot departure.
    pub fn spv_schedule(&self, spv: &Spv, route: &[NodeId], served: &[PdoId]) -> Result<Vec<f64>> {
        self.check_spv_route(spv, route)?;
        let mut releases = Vec::with_capacity(served.len());
        for id in served {
            let p = self
                .pdo(*id)
                .ok_or_else(|| Error::Contract(format!("unknown pdo {id}")))?;
            releases.push(p.earliest_pickup);
        }
        let depart = self.spv_departure(spv, releases).ok_or(Error::NoPath {
            from: spv.origin,
            to: self.depot,
        })?;
        let mut times = Vec::with_capacity(route.len());
        let mut cum = 0u64;
        times.push(depart);
        for w in route.windows(2) {
            let a = self.network.arc_between(w[0], w[1]).expect("checked route");
            cum += self.network.arcs()[a].length_milli as u64;
            times.push(depart + self.model().minutes(VehicleClass::Spv, cum));
        }
        Ok(times)
    }

    /// Times at each DV stop given the depot departure.
    pub fn dv_schedule(&self, stops: &[NodeId], departure: f64) -> Result<Vec<f64>> {
        let mut times = Vec::with_capacity(stops.len());
        let mut cum = 0u64;
        times.push(departure);
        for w in stops.windows(2) {
            cum += self.length(w[0], w[1]).ok_or(Error::NoPath { from: w[0], to: w[1] })?;
            times.push(departure + self.model().minutes(VehicleClass::Dv, cum));
        }
        Ok(times)
    }

    /// Length of a DV stop sequence using shortest legs.
    pub fn dv_route_milli(&self, stops: &[NodeId]) -> Result<u64> {
        stops.windows(2).try_fold(0u64, |acc, w| {
            Ok(acc + self.length(w[0], w[1]).ok_or(Error::NoPath { from: w[0], to: w[1] })?)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpvPlan {
    pub spv: SpvId,
    /// Node path depot -> destination.
    pub route: Vec<NodeId>,
    pub served: Vec<PdoId>,
    /// Aligned with `route`; entry 0 is the depot departure.
    pub stop_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DvPlan {
    /// Stop sequence depot -> delivery locations -> depot; legs follow shortest paths.
    pub route: Vec<NodeId>,
    pub served: Vec<PdoId>,
    /// Aligned with `route`.
    pub stop_times: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub spv_detour_cost: f64,
    pub spv_pdo_compensation: f64,
    pub dv_variable_cost: f64,
    pub dv_fixed_cost: f64,
    pub total: f64,
    pub spv_vmt: f64,
    pub dv_vmt: f64,
}

impl CostBreakdown {
    pub fn spv_cost(&self) -> f64 {
        self.spv_detour_cost + self.spv_pdo_compensation
    }

    pub fn dv_cost(&self) -> f64 {
        self.dv_variable_cost + self.dv_fixed_cost
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    #[serde(with = "plans_as_list")]
    pub spv_plans: BTreeMap<SpvId, SpvPlan>,
    pub dv_plans: Vec<DvPlan>,
    pub cost: CostBreakdown,
}

/// Plans are stored as a list; each one carries its SPV id.
mod plans_as_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(plans: &BTreeMap<SpvId, SpvPlan>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(plans.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<SpvId, SpvPlan>, D::Error> {
        let list = Vec::<SpvPlan>::deserialize(d)?;
        let n = list.len();
        let map: BTreeMap<SpvId, SpvPlan> = list.into_iter().map(|p| (p.spv, p)).collect();
        if map.len() != n {
            return Err(serde::de::Error::custom("duplicate spv plan"));
        }
        Ok(map)
    }
}

impl Solution {
    /// Assembles a solution and prices it.
    pub fn priced(instance: &Instance, spv_plans: Vec<SpvPlan>, dv_plans: Vec<DvPlan>) -> Result<Self> {
        let mut sol = Solution {
            spv_plans: spv_plans.into_iter().map(|p| (p.spv, p)).collect(),
            dv_plans,
            cost: CostBreakdown::default(),
        };
        sol.cost = total_objective(instance, &sol)?;
        Ok(sol)
    }

    pub fn pdos_by_spv(&self) -> usize {
        self.spv_plans.values().map(|p| p.served.len()).sum()
    }

    pub fn pdos_by_dv(&self) -> usize {
        self.dv_plans.iter().map(|p| p.served.len()).sum()
    }

    pub fn dv_count(&self) -> usize {
        self.dv_plans.len()
    }
}

/// Prices a solution: detour + per-PDO compensation for SPVs, variable +
/// fixed cost for DVs, plus vehicle miles per fleet.
pub fn total_objective(instance: &Instance, solution: &Solution) -> Result<CostBreakdown> {
    let model = instance.model();
    let mut c = CostBreakdown::default();
    let mut spv_milli = 0u64;
    let mut spv_count = 0usize;
    for plan in solution.spv_plans.values() {
        let spv = instance
            .spv(plan.spv)
            .ok_or_else(|| Error::Contract(format!("unknown spv {}", plan.spv)))?;
        c.spv_detour_cost += instance.spv_detour_cost(spv, &plan.route)?;
        spv_count += plan.served.len();
        spv_milli += instance.depot_leg_milli(spv).unwrap_or(0) + instance.network.path_length_milli(&plan.route)?;
    }
    c.spv_pdo_compensation = instance.params.per_pdo_compensation * spv_count as f64;

    let mut dv_milli = 0u64;
    for plan in &solution.dv_plans {
        dv_milli += instance.dv_route_milli(&plan.route)?;
    }
    c.dv_variable_cost = model.dollars(VehicleClass::Dv, dv_milli);
    c.dv_fixed_cost = instance.dv_spec.fixed_cost * solution.dv_plans.len() as f64;
    c.total = c.spv_detour_cost + c.spv_pdo_compensation + c.dv_variable_cost + c.dv_fixed_cost;
    c.spv_vmt = milli_to_miles(spv_milli);
    c.dv_vmt = milli_to_miles(dv_milli);
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    DuplicateService,
    UnservedPdo,
    UnknownPdo,
    UnknownSpv,
    IdleSpv,
    RouteStart,
    RouteEnd,
    Disconnected,
    PdoNotOnRoute,
    SpvCapacity,
    DvCapacity,
    EarliestStart,
    PickupRelease,
    LatestDelivery,
    LatestArrival,
    StopTiming,
    FleetLimit,
    CostMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::DuplicateService => "duplicate service",
            Self::UnservedPdo => "unserved pdo",
            Self::UnknownPdo => "unknown pdo",
            Self::UnknownSpv => "unknown spv",
            Self::IdleSpv => "idle spv plan",
            Self::RouteStart => "route start",
            Self::RouteEnd => "route end",
            Self::Disconnected => "disconnected route",
            Self::PdoNotOnRoute => "pdo not on route",
            Self::SpvCapacity => "spv capacity",
            Self::DvCapacity => "dv capacity",
            Self::EarliestStart => "earliest start",
            Self::PickupRelease => "pickup before release",
            Self::LatestDelivery => "latest delivery",
            Self::LatestArrival => "latest arrival",
            Self::StopTiming => "stop timing",
            Self::FleetLimit => "fleet limit",
            Self::CostMismatch => "cost mismatch",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

/// Checks a solution against every routing, capacity and time-window rule.
pub fn validate_solution(instance: &Instance, solution: &Solution) -> ValidationReport {
    use ViolationKind::*;
    let mut rep = ValidationReport::default();
    let model = instance.model();
    let pos = instance.pdo_positions();
    let mut times_served = vec![0usize; instance.pdos.len()];

    let mut count = |rep: &mut ValidationReport, id: &PdoId, owner: String| match pos.get(id) {
        Some(&i) => {
            times_served[i] += 1;
            if times_served[i] > 1 {
                rep.push(DuplicateService, format!("pdo {id} served again by {owner}"));
            }
            Some(&instance.pdos[i])
        }
        None => {
            rep.push(UnknownPdo, format!("{owner} lists unknown pdo {id}"));
            None
        }
    };

    for (key, plan) in &solution.spv_plans {
        let owner = format!("spv {}", plan.spv);
        let Some(spv) = instance.spv(plan.spv).filter(|_| *key == plan.spv) else {
            rep.push(UnknownSpv, format!("plan keyed {key} names unknown spv {}", plan.spv));
            continue;
        };
        let pdos: Vec<&Pdo> = plan.served.iter().filter_map(|id| count(&mut rep, id, owner.clone())).collect();
        if plan.served.is_empty() {
            rep.push(IdleSpv, format!("{owner} has a plan but serves nothing"));
        }
        if plan.served.len() > spv.max_stops as usize {
            rep.push(SpvCapacity, format!("{owner} serves {} > {}", plan.served.len(), spv.max_stops));
        }
        if plan.route.first() != Some(&instance.depot) {
            rep.push(RouteStart, format!("{owner} route does not start at the depot"));
        }
        if plan.route.last() != Some(&spv.destination) {
            rep.push(RouteEnd, format!("{owner} route does not end at its destination"));
        }
        let mut arc_times = Vec::with_capacity(plan.route.len());
        let mut connected = true;
        for w in plan.route.windows(2) {
            match instance.network.arc_between(w[0], w[1]) {
                Some(a) => arc_times.push(model.minutes(VehicleClass::Spv, instance.network.arcs()[a].length_milli as u64)),
                None => {
                    connected = false;
                    rep.push(Disconnected, format!("{owner} has no arc {}->{}", w[0], w[1]));
                }
            }
        }
        if plan.stop_times.len() != plan.route.len() {
            rep.push(StopTiming, format!("{owner} stop_times misaligned with route"));
            continue;
        }
        if !connected || plan.route.is_empty() {
            continue;
        }
        let depart = plan.stop_times[0];
        let tau = instance.params.service_time;
        match instance.depot_arrival(spv) {
            Some(arr) if depart + TIME_TOL < arr + tau => {
                rep.push(EarliestStart, format!("{owner} leaves depot at {depart:.3} before {:.3}", arr + tau));
            }
            None => rep.push(Disconnected, format!("{owner} cannot reach the depot")),
            _ => {}
        }
        for (i, dt) in arc_times.iter().enumerate() {
            if plan.stop_times[i + 1] + TIME_TOL < plan.stop_times[i] + dt {
                rep.push(StopTiming, format!("{owner} reaches {} too early", plan.route[i + 1]));
            }
        }
        for p in pdos {
            if depart + TIME_TOL < p.earliest_pickup as f64 + tau {
                rep.push(PickupRelease, format!("{owner} leaves before pdo {} is released", p.id));
            }
            match plan.route.iter().skip(1).position(|&n| n == p.drop_node) {
                Some(k) => {
                    if plan.stop_times[k + 1] > p.latest_delivery as f64 + TIME_TOL {
                        rep.push(LatestDelivery, format!("{owner} drops pdo {} late", p.id));
                    }
                }
                None => rep.push(PdoNotOnRoute, format!("pdo {} drop node not on {owner} route", p.id)),
            }
        }
        let arrive = *plan.stop_times.last().unwrap();
        if arrive > spv.latest_arrival as f64 + TIME_TOL {
            rep.push(LatestArrival, format!("{owner} arrives at {arrive:.3} after {}", spv.latest_arrival));
        }
    }

    for (k, plan) in solution.dv_plans.iter().enumerate() {
        let owner = format!("dv {k}");
        let pdos: Vec<&Pdo> = plan.served.iter().filter_map(|id| count(&mut rep, id, owner.clone())).collect();
        if plan.route.len() < 2 || plan.route[0] != instance.depot {
            rep.push(RouteStart, format!("{owner} route does not start at the depot"));
            continue;
        }
        if *plan.route.last().unwrap() != instance.depot {
            rep.push(RouteEnd, format!("{owner} route does not return to the depot"));
        }
        let interior = &plan.route[1..plan.route.len() - 1];
        let mut distinct: Vec<NodeId> = interior.to_vec();
        distinct.sort();
        distinct.dedup();
        if distinct.len() > instance.dv_spec.max_stops as usize {
            rep.push(DvCapacity, format!("{owner} visits {} > {} locations", distinct.len(), instance.dv_spec.max_stops));
        }
        if plan.stop_times.len() != plan.route.len() {
            rep.push(StopTiming, format!("{owner} stop_times misaligned with route"));
            continue;
        }
        let mut ok = true;
        for (i, w) in plan.route.windows(2).enumerate() {
            match instance.length(w[0], w[1]) {
                Some(len) => {
                    let dt = model.minutes(VehicleClass::Dv, len);
                    if plan.stop_times[i + 1] + TIME_TOL < plan.stop_times[i] + dt {
                        rep.push(StopTiming, format!("{owner} reaches {} too early", w[1]));
                    }
                }
                None => {
                    ok = false;
                    rep.push(Disconnected, format!("{owner} cannot travel {}->{}", w[0], w[1]));
                }
            }
        }
        if !ok {
            continue;
        }
        for p in pdos {
            if plan.stop_times[0] + TIME_TOL < p.earliest_pickup as f64 {
                rep.push(PickupRelease, format!("{owner} leaves before pdo {} is released", p.id));
            }
            match interior.iter().position(|&n| n == p.drop_node) {
                Some(k) => {
                    if plan.stop_times[k + 1] > p.latest_delivery as f64 + TIME_TOL {
                        rep.push(LatestDelivery, format!("{owner} drops pdo {} late", p.id));
                    }
                }
                None => rep.push(PdoNotOnRoute, format!("pdo {} drop node not on {owner} route", p.id)),
            }
        }
    }

    if let Some(limit) = instance.dv_spec.fleet_limit {
        if solution.dv_plans.len() > limit as usize {
            rep.push(FleetLimit, format!("{} DVs used, limit {limit}", solution.dv_plans.len()));
        }
    }

    for (i, n) in times_served.iter().enumerate() {
        if *n == 0 {
            rep.push(UnservedPdo, format!("pdo {} is not served", instance.pdos[i].id));
        }
    }

    match total_objective(instance, solution) {
        Ok(c) => {
            if (c.total - solution.cost.total).abs() > MONEY_TOL {
                rep.push(CostMismatch, format!("reported total {:.6} != recomputed {:.6}", solution.cost.total, c.total));
            }
        }
        Err(e) => rep.push(CostMismatch, format!("cannot price solution: {e}")),
    }
    rep
}
