//! Budgeted enumeration of simple paths and SPV candidate-route generation.
//!
//! Two engines enumerate every simple path whose length fits a budget: a
//! depth-first recursion and a Yen-style deviation search that yields paths
//! in ascending length and can stop early at a route cap.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::domain::{Instance, PdoId, Spv, SpvId};
use crate::error::Result;
use crate::network::{CostModel, DistanceTable, Network, NodeId, VehicleClass, UNREACHABLE};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetedPathQuery {
    pub source: NodeId,
    pub target: NodeId,
    /// Minutes.
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimedPath {
    pub length_milli: u64,
    pub nodes: Vec<NodeId>,
}

impl TimedPath {
    pub fn travel_time(&self, model: &CostModel, class: VehicleClass) -> f64 {
        model.minutes(class, self.length_milli)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathEngine {
    #[default]
    Yen,
    Recursive,
}

/// All simple paths within budget by depth-first recursion. Sorted by length, then nodes.
pub fn enumerate_paths_recursive(
    network: &Network,
    query: &BudgetedPathQuery,
    model: &CostModel,
    class: VehicleClass,
) -> Result<Vec<TimedPath>> {
    let s = network.require(query.source)?;
    let t = network.require(query.target)?;
    let limit = model.budget_milli(class, query.budget);
    let mut out = dfs_indices(network, s, t, limit);
    out.sort();
    Ok(to_paths(network, out))
}

/// All simple paths within budget by Yen's deviation search. Same contract as
/// [`enumerate_paths_recursive`].
pub fn enumerate_paths_yen(
    network: &Network,
    query: &BudgetedPathQuery,
    model: &CostModel,
    class: VehicleClass,
) -> Result<Vec<TimedPath>> {
    let s = network.require(query.source)?;
    let t = network.require(query.target)?;
    let limit = model.budget_milli(class, query.budget);
    Ok(to_paths(network, yen_indices(network, s, t, limit, None)))
}

fn to_paths(network: &Network, raw: Vec<(u64, Vec<usize>)>) -> Vec<TimedPath> {
    raw.into_iter()
        .map(|(len, p)| TimedPath {
            length_milli: len,
            nodes: p.into_iter().map(|i| network.node_at(i)).collect(),
        })
        .collect()
}

fn dfs_indices(network: &Network, s: usize, t: usize, limit: u64) -> Vec<(u64, Vec<usize>)> {
    let table = network.distances();
    let mut out = Vec::new();
    if table.get(s, t).map_or(true, |d| d > limit) {
        return out;
    }
    let mut visited = vec![false; network.node_count()];
    let mut path = vec![s];
    visited[s] = true;
    dfs(network, table, t, 0, limit, &mut visited, &mut path, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    network: &Network,
    table: &DistanceTable,
    t: usize,
    len: u64,
    limit: u64,
    visited: &mut [bool],
    path: &mut Vec<usize>,
    out: &mut Vec<(u64, Vec<usize>)>,
) {
    let u = *path.last().unwrap();
    if u == t {
        out.push((len, path.clone()));
        return;
    }
    for (_, v, l) in network.out_arcs(u) {
        if visited[v] {
            continue;
        }
        let nl = len + l;
        match table.get(v, t) {
            Some(h) if nl + h <= limit => {}
            _ => continue,
        }
        visited[v] = true;
        path.push(v);
        dfs(network, table, t, nl, limit, visited, path, out);
        path.pop();
        visited[v] = false;
    }
}

struct SpurSearch {
    dist: Vec<u64>,
    pred: Vec<usize>,
    touched: Vec<usize>,
    node_block: Vec<bool>,
    arc_block: Vec<bool>,
    heap: BinaryHeap<Reverse<(u64, u64, usize)>>,
}

impl SpurSearch {
    fn new(network: &Network) -> Self {
        let n = network.node_count();
        Self {
            dist: vec![UNREACHABLE; n],
            pred: vec![usize::MAX; n],
            touched: Vec::new(),
            node_block: vec![false; n],
            arc_block: vec![false; network.arc_count()],
            heap: BinaryHeap::new(),
        }
    }

    /// Shortest unblocked path `from -> t` no longer than `limit`, guided by
    /// exact distances to `t` in the unblocked graph.
    fn run(&mut self, network: &Network, table: &DistanceTable, from: usize, t: usize, limit: u64) -> Option<(u64, Vec<usize>)> {
        for &v in &self.touched {
            self.dist[v] = UNREACHABLE;
        }
        self.touched.clear();
        self.heap.clear();
        let h0 = table.get(from, t)?;
        if h0 > limit {
            return None;
        }
        self.dist[from] = 0;
        self.pred[from] = usize::MAX;
        self.touched.push(from);
        self.heap.push(Reverse((h0, 0, from)));
        while let Some(Reverse((_, g, u))) = self.heap.pop() {
            if g > self.dist[u] {
                continue;
            }
            if u == t {
                let mut path = vec![t];
                let mut cur = t;
                while self.pred[cur] != usize::MAX {
                    cur = self.pred[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some((g, path));
            }
            for (a, v, l) in network.out_arcs(u) {
                if self.arc_block[a] || self.node_block[v] {
                    continue;
                }
                let Some(h) = table.get(v, t) else { continue };
                let ng = g + l;
                if ng + h > limit || ng >= self.dist[v] {
                    continue;
                }
                if self.dist[v] == UNREACHABLE {
                    self.touched.push(v);
                }
                self.dist[v] = ng;
                self.pred[v] = u;
                self.heap.push(Reverse((ng + h, ng, v)));
            }
        }
        None
    }
}

/// Paths `s -> t` within `limit` in ascending (length, node index) order.
/// With a cap, the first `cap` in that order.
pub(crate) fn yen_indices(network: &Network, s: usize, t: usize, limit: u64, cap: Option<usize>) -> Vec<(u64, Vec<usize>)> {
    if cap == Some(0) {
        return Vec::new();
    }
    if s == t {
        return vec![(0, vec![s])];
    }
    let table = network.distances();
    let mut ws = SpurSearch::new(network);
    let Some(first) = ws.run(network, table, s, t, limit) else {
        return Vec::new();
    };
    let mut accepted: Vec<(u64, Vec<usize>)> = Vec::new();
    let mut pending: BTreeSet<(u64, Vec<usize>)> = BTreeSet::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(first.1.clone());
    pending.insert(first);

    while let Some(next) = pending.pop_first() {
        if let Some(c) = cap {
            if accepted.len() >= c && next.0 > accepted[c - 1].0 {
                break;
            }
        }
        accepted.push(next);
        let (_, last) = accepted.last().unwrap().clone();

        let mut sharing: Vec<usize> = (0..accepted.len() - 1).collect();
        let mut root_len = 0u64;
        for i in 0..last.len() - 1 {
            let spur = last[i];
            if i > 0 {
                root_len += network
                    .out_arcs(last[i - 1])
                    .find(|&(_, h, _)| h == spur)
                    .map(|(_, _, l)| l)
                    .expect("path arc");
                sharing.retain(|&k| accepted[k].1.get(i) == Some(&spur));
            }
            let Some(h) = table.get(spur, t) else { continue };
            if root_len + h > limit {
                continue;
            }
            let mut blocked_arcs = Vec::new();
            for &k in sharing.iter().chain(std::iter::once(&(accepted.len() - 1))) {
                let p = &accepted[k].1;
                if p.len() > i + 1 {
                    if let Some(a) = network.arc_between_idx(p[i], p[i + 1]) {
                        ws.arc_block[a] = true;
                        blocked_arcs.push(a);
                    }
                }
            }
            for &v in &last[..i] {
                ws.node_block[v] = true;
            }
            if let Some((spur_len, spur_path)) = ws.run(network, table, spur, t, limit - root_len) {
                let mut full = last[..i].to_vec();
                full.extend(spur_path);
                if seen.insert(full.clone()) {
                    pending.insert((root_len + spur_len, full));
                }
            }
            for a in blocked_arcs {
                ws.arc_block[a] = false;
            }
            for &v in &last[..i] {
                ws.node_block[v] = false;
            }
        }
    }
    accepted.sort();
    if let Some(c) = cap {
        accepted.truncate(c);
    }
    accepted
}

/// Minutes left for the depot -> destination leg, floored at zero. `None`
/// when the SPV cannot reach the depot.
pub fn spv_budget(spv: &Spv, instance: &Instance) -> Option<f64> {
    let leg = instance.depot_leg_milli(spv)?;
    let b = spv.detour_willingness - instance.model().minutes(VehicleClass::Spv, leg) - instance.params.service_time;
    Some(b.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRoute {
    pub spv: SpvId,
    /// Depot -> destination; the direct trip for the null route.
    pub path: Vec<NodeId>,
    pub length_milli: u64,
    /// Minutes.
    pub travel_time: f64,
    pub detour_cost: f64,
    /// PDOs this route can deliver on time, ascending.
    pub servable: Vec<PdoId>,
    pub is_null: bool,
}

impl CandidateRoute {
    pub fn can_serve(&self, pdo: PdoId) -> bool {
        self.servable.binary_search(&pdo).is_ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteConfig {
    /// `None` keeps every budget-feasible route.
    pub max_routes: Option<usize>,
    pub engine: PathEngine,
}

impl Default for RouteConfig {
    fn default() -> Self {
        Self {
            max_routes: Some(200),
            engine: PathEngine::Yen,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RouteCacheKey {
    pub spv: SpvId,
    pub budget_milli: u64,
    pub max_routes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedPaths {
    pub source: NodeId,
    pub target: NodeId,
    pub paths: Vec<Vec<NodeId>>,
}

/// Budget-feasible paths keyed by (network hash, spv id, budget).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RouteCache {
    pub network_hash: String,
    pub entries: BTreeMap<String, CachedPaths>,
}

impl RouteCache {
    pub fn new(network: &Network) -> Self {
        Self {
            network_hash: network.fingerprint(),
            entries: BTreeMap::new(),
        }
    }

    fn key(k: &RouteCacheKey) -> String {
        match k.max_routes {
            Some(m) => format!("{}:{}:{}", k.spv.0, k.budget_milli, m),
            None => format!("{}:{}:all", k.spv.0, k.budget_milli),
        }
    }

    pub fn get(&self, key: &RouteCacheKey, source: NodeId, target: NodeId) -> Option<&[Vec<NodeId>]> {
        self.entries
            .get(&Self::key(key))
            .filter(|e| e.source == source && e.target == target)
            .map(|e| e.paths.as_slice())
    }

    pub fn insert(&mut self, key: &RouteCacheKey, entry: CachedPaths) {
        self.entries.insert(Self::key(key), entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Candidate routes for every SPV of an instance. Paths to a destination are
/// enumerated once for the largest budget seen and filtered for smaller ones.
pub struct RouteGenerator<'a> {
    instance: &'a Instance,
    config: RouteConfig,
    by_node: HashMap<NodeId, Vec<usize>>,
    /// Per destination index: budget enumerated for and the paths found.
    memo: RefCell<HashMap<usize, (u64, Vec<(u64, Vec<usize>)>)>>,
    hint: HashMap<usize, u64>,
}

impl<'a> RouteGenerator<'a> {
    pub fn new(instance: &'a Instance, config: RouteConfig) -> Self {
        let mut by_node: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for (i, p) in instance.pdos.iter().enumerate() {
            by_node.entry(p.drop_node).or_default().push(i);
        }
        Self {
            instance,
            config,
            by_node,
            memo: RefCell::new(HashMap::new()),
            hint: HashMap::new(),
        }
    }

    /// Announces SPVs whose routes will be requested, so each destination is
    /// enumerated once with the largest budget among them.
    pub fn prepare<'s>(&mut self, spvs: impl IntoIterator<Item = &'s Spv>) {
        let inst = self.instance;
        for spv in spvs {
            let (Some(budget), Some(t)) = (spv_budget(spv, inst), inst.network.index_of(spv.destination)) else {
                continue;
            };
            if budget > 0.0 {
                let limit = inst.model().budget_milli(VehicleClass::Spv, budget);
                let e = self.hint.entry(t).or_insert(0);
                *e = (*e).max(limit);
            }
        }
    }

    fn enumerate(&self, s: usize, t: usize, limit: u64) -> Vec<(u64, Vec<usize>)> {
        let net = &self.instance.network;
        let cap = self.config.max_routes;
        if let Some((have, paths)) = self.memo.borrow().get(&t) {
            if *have >= limit {
                // paths come in (length, nodes) order, so the first `cap`
                // within `limit` are a prefix of the larger enumeration
                let mut out: Vec<(u64, Vec<usize>)> = paths.iter().take_while(|p| p.0 <= limit).cloned().collect();
                if let Some(m) = cap {
                    out.truncate(m);
                }
                return out;
            }
        }
        let wide = self.hint.get(&t).copied().unwrap_or(0).max(limit);
        let raw = match self.config.engine {
            PathEngine::Yen => yen_indices(net, s, t, wide, cap),
            PathEngine::Recursive => {
                let mut all = dfs_indices(net, s, t, wide);
                all.sort();
                if let Some(m) = cap {
                    all.truncate(m);
                }
                all
            }
        };
        self.memo.borrow_mut().insert(t, (wide, raw));
        self.enumerate(s, t, limit)
    }

    /// Null route first, then routes by travel time and node sequence.
    pub fn routes(&self, spv: &Spv, cache: Option<&mut RouteCache>) -> Result<Vec<CandidateRoute>> {
        let inst = self.instance;
        let net = &inst.network;
        let model = inst.model();
        let mut out = vec![self.null_route(spv)?];

        let Some(budget) = spv_budget(spv, inst) else {
            return Ok(out);
        };
        if budget <= 0.0 {
            return Ok(out);
        }
        let limit = model.budget_milli(VehicleClass::Spv, budget);
        let key = RouteCacheKey {
            spv: spv.id,
            budget_milli: limit,
            max_routes: self.config.max_routes,
        };
        let cached = cache
            .as_deref()
            .and_then(|c| c.get(&key, inst.depot, spv.destination))
            .map(|p| p.to_vec());
        let paths = match cached {
            Some(p) => p,
            None => {
                let s = net.require(inst.depot)?;
                let t = net.require(spv.destination)?;
                let raw = self.enumerate(s, t, limit);
                let p: Vec<Vec<NodeId>> = to_paths(net, raw).into_iter().map(|tp| tp.nodes).collect();
                if let Some(c) = cache {
                    c.insert(
                        &key,
                        CachedPaths {
                            source: inst.depot,
                            target: spv.destination,
                            paths: p.clone(),
                        },
                    );
                }
                p
            }
        };

        let depart = inst.depot_arrival(spv).expect("budget implies reachable depot");
        let departure = depart + inst.params.service_time;
        for path in paths {
            let length_milli = net.path_length_milli(&path)?;
            let detour_cost = inst.spv_detour_cost(spv, &path)?;
            let servable = self.servable(spv, &path, depart, departure);
            out.push(CandidateRoute {
                spv: spv.id,
                travel_time: model.minutes(VehicleClass::Spv, length_milli),
                length_milli,
                detour_cost,
                servable,
                is_null: false,
                path,
            });
        }
        Ok(out)
    }

    fn null_route(&self, spv: &Spv) -> Result<CandidateRoute> {
        let inst = self.instance;
        let from = if inst.spv_origins_at_depot { inst.depot } else { spv.origin };
        let model = inst.model();
        let (path, len) = match inst.network.shortest_path(from, spv.destination, model, VehicleClass::Spv) {
            Ok(p) => {
                let len = inst.network.path_length_milli(&p.nodes)?;
                (p.nodes, len)
            }
            Err(_) => (Vec::new(), 0),
        };
        Ok(CandidateRoute {
            spv: spv.id,
            path,
            length_milli: len,
            travel_time: model.minutes(VehicleClass::Spv, len),
            detour_cost: 0.0,
            servable: Vec::new(),
            is_null: true,
        })
    }

    /// A PDO is servable when its drop node is on the path, it is released by
    /// the time the SPV reaches the depot, it is dropped on time and the SPV
    /// still reaches its destination on time.
    fn servable(&self, spv: &Spv, path: &[NodeId], at_depot: f64, departure: f64) -> Vec<PdoId> {
        let inst = self.instance;
        let model = inst.model();
        let net = &inst.network;
        let total = net.path_length_milli(path).unwrap_or(u64::MAX);
        if departure + model.minutes(VehicleClass::Spv, total) > spv.latest_arrival as f64 + crate::domain::TIME_TOL {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut cum = 0u64;
        for w in path.windows(2) {
            cum += net.arcs()[net.arc_between(w[0], w[1]).expect("path arc")].length_milli as u64;
            let Some(list) = self.by_node.get(&w[1]) else { continue };
            let arrive = departure + model.minutes(VehicleClass::Spv, cum);
            for &i in list {
                let p = &inst.pdos[i];
                if p.earliest_pickup as f64 <= at_depot + crate::domain::TIME_TOL
                    && arrive <= p.latest_delivery as f64 + crate::domain::TIME_TOL
                {
                    out.push(p.id);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Candidate routes for one SPV: the null route first, then every
/// budget-feasible depot -> destination path up to the configured cap.
pub fn generate_candidate_routes(instance: &Instance, spv: &Spv, config: RouteConfig) -> Result<Vec<CandidateRoute>> {
    RouteGenerator::new(instance, config).routes(spv, None)
}
