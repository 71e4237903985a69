//! Synthetic instance generation and on-disk formats for instances,
//! solutions and route caches.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CostParams, DvSpec, Instance, Pdo, PdoId, Solution, Spv, SpvId};
use crate::error::{Error, Result};
use crate::kpaths::RouteCache;
use crate::network::{Arc, Network, NodeId, Point};

pub const INSTANCE_SCHEMA: &str = "crowdship-instance/1";
pub const SOLUTION_SCHEMA: &str = "crowdship-solution/1";
pub const ROUTE_CACHE_SCHEMA: &str = "crowdship-routes/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkKind {
    Grid { cols: u32, rows: u32 },
    /// Points scattered uniformly, joined by non-crossing straight links.
    RandomPlanar { nodes: u32 },
}

impl NetworkKind {
    pub fn node_count(&self) -> u32 {
        match *self {
            NetworkKind::Grid { cols, rows } => cols * rows,
            NetworkKind::RandomPlanar { nodes } => nodes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepotPlacement {
    /// Midpoint of the western edge of the service area.
    Boundary,
    Center,
    Node(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub network: NetworkKind,
    /// Side of the square service area is the root of this.
    pub area_sq_miles: f64,
    /// Id of the first generated node.
    pub node_id_base: u32,
    /// Grid nodes are displaced by up to this fraction of the spacing, so
    /// link lengths differ and equal-length paths are rare.
    pub grid_jitter: f64,
    /// Links per node targeted by the planar generator.
    pub links_per_node: f64,
    pub depot: DepotPlacement,
    pub pdos: usize,
    /// Latest delivery choices, minutes of the day.
    pub deadline_menu: Vec<u32>,
    /// Earliest pickup of every PDO.
    pub day_start: u32,
    pub spvs: usize,
    /// Earliest start of SPV trips is uniform over this range.
    pub spv_start_window: (u32, u32),
    pub detour_willingness: f64,
    pub spv_max_stops: (u32, u32),
    pub spv_origins_at_depot: bool,
    pub seed: u64,
    pub dv_spec: DvSpec,
    pub params: CostParams,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            network: NetworkKind::Grid { cols: 10, rows: 10 },
            area_sq_miles: 25.0,
            node_id_base: 1,
            grid_jitter: 0.25,
            links_per_node: 1.5,
            depot: DepotPlacement::Center,
            pdos: 200,
            deadline_menu: vec![720, 960, 1200],
            day_start: 480,
            spvs: 1200,
            spv_start_window: (480, 1140),
            detour_willingness: 30.0,
            spv_max_stops: (1, 4),
            spv_origins_at_depot: false,
            seed: 0,
            dv_spec: DvSpec::default(),
            params: CostParams::default(),
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Generation(m.to_string()));
        let n = self.network.node_count();
        if n < 2 {
            return bad("network needs at least 2 nodes");
        }
        if let NetworkKind::Grid { cols, rows } = self.network {
            if cols == 0 || rows == 0 {
                return bad("grid dimensions must be positive");
            }
        }
        if !(0.0..1.0).contains(&self.grid_jitter) {
            return bad("grid jitter must be in [0, 1)");
        }
        if !(self.area_sq_miles > 0.0) {
            return bad("area must be positive");
        }
        if self.pdos > 0 && self.deadline_menu.is_empty() {
            return bad("deadline menu is empty");
        }
        if self.spv_start_window.0 > self.spv_start_window.1 {
            return bad("SPV start window is reversed");
        }
        let (lo, hi) = self.spv_max_stops;
        if lo == 0 || lo > hi {
            return bad("SPV max stops range must satisfy 1 <= lo <= hi");
        }
        if !(self.detour_willingness >= 0.0) {
            return bad("detour willingness must be non-negative");
        }
        if self.node_id_base.checked_add(n - 1).is_none() {
            return bad("node ids overflow");
        }
        Ok(())
    }
}

fn side_milli(spec: &GenSpec) -> u32 {
    (spec.area_sq_miles.sqrt() * 1000.0).round().max(1.0) as u32
}

fn grid(spec: &GenSpec, cols: u32, rows: u32, rng: &mut ChaCha8Rng) -> (Vec<(u32, u32)>, Vec<(usize, usize)>) {
    let side = side_milli(spec);
    let span = (cols.max(rows) - 1).max(1);
    let step = (side / span).max(1);
    let half = (spec.grid_jitter * step as f64 / 2.0).floor() as u32;
    let mut pts = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let (dx, dy) = if half > 0 {
                (rng.gen_range(0..=2 * half), rng.gen_range(0..=2 * half))
            } else {
                (half, half)
            };
            pts.push((c * step + dx, r * step + dy));
        }
    }
    let mut edges = Vec::new();
    let at = |c: u32, r: u32| (r * cols + c) as usize;
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((at(c, r), at(c + 1, r)));
            }
            if r + 1 < rows {
                edges.push((at(c, r), at(c, r + 1)));
            }
        }
    }
    (pts, edges)
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Proper crossing of two segments that share no endpoint.
fn segments_cross(p: (i64, i64), q: (i64, i64), r: (i64, i64), s: (i64, i64)) -> bool {
    let d1 = cross(r, s, p);
    let d2 = cross(r, s, q);
    let d3 = cross(p, q, r);
    let d4 = cross(p, q, s);
    ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))
}

fn dist(a: (u32, u32), b: (u32, u32)) -> f64 {
    let dx = a.0 as f64 - b.0 as f64;
    let dy = a.1 as f64 - b.1 as f64;
    (dx * dx + dy * dy).sqrt()
}

fn random_planar(spec: &GenSpec, n: usize, rng: &mut ChaCha8Rng) -> (Vec<(u32, u32)>, Vec<(usize, usize)>) {
    let side = side_milli(spec);
    let mut pts: Vec<(u32, u32)> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = (rng.gen_range(0..=side), rng.gen_range(0..=side));
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    // Euclidean minimum spanning tree keeps the network connected and planar
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = (dist(pts[0], pts[j]), 0);
    }
    for _ in 1..n {
        let j = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0).then(a.cmp(&b)))
            .expect("nodes left");
        in_tree[j] = true;
        edges.push((best[j].1, j));
        for k in 0..n {
            if !in_tree[k] {
                let d = dist(pts[j], pts[k]);
                if d < best[k].0 {
                    best[k] = (d, j);
                }
            }
        }
    }
    // then the shortest non-crossing links among near neighbours
    let target = ((spec.links_per_node * n as f64).round() as usize).max(n - 1);
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        let mut near: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(pts[i], pts[j]), j)).collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d, j) in near.iter().take(6) {
            cands.push((d, i.min(j), i.max(j)));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    cands.dedup_by(|a, b| a.1 == b.1 && a.2 == b.2);
    let pt = |i: usize| (pts[i].0 as i64, pts[i].1 as i64);
    for (_, a, b) in cands {
        if edges.len() >= target {
            break;
        }
        if edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == (a, b)) {
            continue;
        }
        let blocked = edges.iter().any(|&(x, y)| {
            x != a && x != b && y != a && y != b && segments_cross(pt(a), pt(b), pt(x), pt(y))
        });
        if !blocked {
            edges.push((a, b));
        }
    }
    (pts, edges)
}

fn pick_depot(spec: &GenSpec, ids: &[NodeId], pts: &[(u32, u32)]) -> Result<NodeId> {
    let nearest = |target: (f64, f64), allowed: &dyn Fn(usize) -> bool| -> NodeId {
        let mut best: Option<(f64, usize)> = None;
        for (i, p) in pts.iter().enumerate() {
            if !allowed(i) {
                continue;
            }
            let d = (p.0 as f64 - target.0).powi(2) + (p.1 as f64 - target.1).powi(2);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        ids[best.expect("nodes exist").1]
    };
    let max_x = pts.iter().map(|p| p.0).max().unwrap_or(0);
    let max_y = pts.iter().map(|p| p.1).max().unwrap_or(0);
    let min_x = pts.iter().map(|p| p.0).min().unwrap_or(0);
    let min_y = pts.iter().map(|p| p.1).min().unwrap_or(0);
    let mid = ((min_x + max_x) as f64 / 2.0, (min_y + max_y) as f64 / 2.0);
    match spec.depot {
        DepotPlacement::Center => Ok(nearest(mid, &|_| true)),
        DepotPlacement::Boundary => Ok(nearest((min_x as f64, mid.1), &|_| true)),
        DepotPlacement::Node(id) => {
            let id = NodeId(id);
            if ids.contains(&id) {
                Ok(id)
            } else {
                Err(Error::Generation(format!("depot node {id} is not in the generated network")))
            }
        }
    }
}

/// Builds a random instance. The same spec always yields the same instance.
pub fn generate_instance(spec: &GenSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (pts, edges) = match spec.network {
        NetworkKind::Grid { cols, rows } => grid(spec, cols, rows, &mut rng),
        NetworkKind::RandomPlanar { nodes } => random_planar(spec, nodes as usize, &mut rng),
    };
    let ids: Vec<NodeId> = (0..pts.len() as u32).map(|i| NodeId(spec.node_id_base + i)).collect();
    let mut arcs = Vec::with_capacity(edges.len() * 2);
    for &(a, b) in &edges {
        let len = dist(pts[a], pts[b]).round().max(1.0) as u32;
        arcs.push(Arc::new(ids[a], ids[b], len));
        arcs.push(Arc::new(ids[b], ids[a], len));
    }
    let positions: Vec<(NodeId, Point)> = ids
        .iter()
        .zip(&pts)
        .map(|(id, p)| {
            (
                *id,
                Point {
                    x: p.0 as f64 / 1000.0,
                    y: p.1 as f64 / 1000.0,
                },
            )
        })
        .collect();
    let network = Network::with_positions(positions, arcs)?;
    let depot = pick_depot(spec, &ids, &pts)?;

    let others: Vec<NodeId> = ids.iter().copied().filter(|&n| n != depot).collect();
    let pdos: Vec<Pdo> = (0..spec.pdos)
        .map(|i| Pdo {
            id: PdoId(i as u32 + 1),
            drop_node: *others.choose(&mut rng).expect("at least two nodes"),
            earliest_pickup: spec.day_start,
            latest_delivery: *spec.deadline_menu.choose(&mut rng).expect("menu checked"),
            quantity: 1,
        })
        .collect();
    let spvs: Vec<Spv> = (0..spec.spvs)
        .map(|i| {
            let o = rng.gen_range(0..ids.len());
            let mut d = rng.gen_range(0..ids.len() - 1);
            if d >= o {
                d += 1;
            }
            let start = rng.gen_range(spec.spv_start_window.0..=spec.spv_start_window.1);
            Spv {
                id: SpvId(i as u32 + 1),
                origin: ids[o],
                destination: ids[d],
                earliest_start: start,
                latest_arrival: start + spec.detour_willingness.round() as u32,
                max_stops: rng.gen_range(spec.spv_max_stops.0..=spec.spv_max_stops.1),
                detour_willingness: spec.detour_willingness,
            }
        })
        .collect();
    let inst = Instance {
        network,
        depot,
        pdos,
        spvs,
        dv_spec: spec.dv_spec.clone(),
        params: spec.params.clone(),
        spv_origins_at_depot: spec.spv_origins_at_depot,
    };
    inst.validate()?;
    Ok(inst)
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct LinkDoc {
    from: u32,
    to: u32,
    miles: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    nodes: Vec<NodeDoc>,
    links: Vec<LinkDoc>,
}

#[derive(Serialize, Deserialize)]
struct FleetDoc {
    dv: DvSpec,
    spvs: Vec<Spv>,
}

#[derive(Serialize, Deserialize)]
struct DemandDoc {
    pdos: Vec<Pdo>,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    schema: String,
    depot: u32,
    #[serde(default)]
    spv_origins_at_depot: bool,
    network: NetworkDoc,
    fleet: FleetDoc,
    demand: DemandDoc,
    params: CostParams,
}

fn to_doc(instance: &Instance) -> InstanceDoc {
    let net = &instance.network;
    let nodes = net
        .nodes()
        .iter()
        .map(|&id| {
            let p = net.position(id);
            NodeDoc {
                id: id.0,
                x: p.map(|p| p.x),
                y: p.map(|p| p.y),
            }
        })
        .collect();
    let links = net
        .arcs()
        .iter()
        .map(|a| LinkDoc {
            from: a.tail.0,
            to: a.head.0,
            miles: a.length_milli as f64 / 1000.0,
        })
        .collect();
    InstanceDoc {
        schema: INSTANCE_SCHEMA.to_string(),
        depot: instance.depot.0,
        spv_origins_at_depot: instance.spv_origins_at_depot,
        network: NetworkDoc { nodes, links },
        fleet: FleetDoc {
            dv: instance.dv_spec.clone(),
            spvs: instance.spvs.clone(),
        },
        demand: DemandDoc {
            pdos: instance.pdos.clone(),
        },
        params: instance.params.clone(),
    }
}

fn from_doc(doc: InstanceDoc) -> Result<Instance> {
    let perr = |m: String| Error::Parse(m);
    if doc.schema != INSTANCE_SCHEMA {
        return Err(perr(format!("schema: expected {INSTANCE_SCHEMA}, found {}", doc.schema)));
    }
    let mut arcs = Vec::with_capacity(doc.network.links.len());
    for (k, l) in doc.network.links.iter().enumerate() {
        if !(l.miles > 0.0) || !l.miles.is_finite() {
            return Err(perr(format!("network.links[{k}] ({} -> {}): length must be positive", l.from, l.to)));
        }
        let milli = (l.miles * 1000.0).round();
        if milli < 1.0 || milli > u32::MAX as f64 {
            return Err(perr(format!("network.links[{k}] ({} -> {}): length must be positive and at most {} miles", l.from, l.to, u32::MAX / 1000)));
        }
        arcs.push(Arc::new(NodeId(l.from), NodeId(l.to), milli as u32));
    }
    let with_pos = doc.network.nodes.iter().any(|n| n.x.is_some() || n.y.is_some());
    let network = if with_pos {
        let mut nodes = Vec::with_capacity(doc.network.nodes.len());
        for (k, n) in doc.network.nodes.iter().enumerate() {
            match (n.x, n.y) {
                (Some(x), Some(y)) => nodes.push((NodeId(n.id), Point { x, y })),
                _ => return Err(perr(format!("network.nodes[{k}] (node {}): position needs both x and y", n.id))),
            }
        }
        Network::with_positions(nodes, arcs)
    } else {
        Network::new(doc.network.nodes.iter().map(|n| NodeId(n.id)).collect(), arcs)
    }
    .map_err(|e| perr(format!("network: {e}")))?;

    for p in &doc.demand.pdos {
        if !network.contains(p.drop_node) {
            return Err(perr(format!("demand.pdos: pdo {} references unknown node {}", p.id, p.drop_node)));
        }
    }
    for s in &doc.fleet.spvs {
        for n in [s.origin, s.destination] {
            if !network.contains(n) {
                return Err(perr(format!("fleet.spvs: spv {} references unknown node {n}", s.id)));
            }
        }
    }
    let inst = Instance {
        network,
        depot: NodeId(doc.depot),
        pdos: doc.demand.pdos,
        spvs: doc.fleet.spvs,
        dv_spec: doc.fleet.dv,
        params: doc.params,
        spv_origins_at_depot: doc.spv_origins_at_depot,
    };
    inst.validate().map_err(|e| perr(e.to_string()))?;
    Ok(inst)
}

pub fn instance_to_string(instance: &Instance) -> String {
    serde_json::to_string_pretty(&to_doc(instance)).expect("instance serializes") + "\n"
}

pub fn instance_from_str(text: &str) -> Result<Instance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    from_doc(doc)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_instance(path: &Path, instance: &Instance) -> Result<()> {
    write_atomic(path, &instance_to_string(instance))
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)?;
    instance_from_str(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Serialize, Deserialize)]
struct SolutionDoc {
    schema: String,
    #[serde(flatten)]
    solution: Solution,
}

pub fn save_solution(path: &Path, solution: &Solution) -> Result<()> {
    let doc = SolutionDoc {
        schema: SOLUTION_SCHEMA.to_string(),
        solution: solution.clone(),
    };
    write_atomic(path, &(serde_json::to_string_pretty(&doc).expect("solution serializes") + "\n"))
}

pub fn load_solution(path: &Path) -> Result<Solution> {
    let text = fs::read_to_string(path)?;
    let doc: SolutionDoc = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if doc.schema != SOLUTION_SCHEMA {
        return Err(Error::Parse(format!("schema: expected {SOLUTION_SCHEMA}, found {}", doc.schema)));
    }
    Ok(doc.solution)
}

#[derive(Serialize, Deserialize)]
struct RouteCacheDoc {
    schema: String,
    #[serde(flatten)]
    cache: RouteCache,
}

pub fn save_route_cache(path: &Path, cache: &RouteCache) -> Result<()> {
    let doc = RouteCacheDoc {
        schema: ROUTE_CACHE_SCHEMA.to_string(),
        cache: cache.clone(),
    };
    write_atomic(path, &(serde_json::to_string(&doc).expect("cache serializes") + "\n"))
}

/// Loads a route cache; an empty cache is returned when it was built for a
/// different network.
pub fn load_route_cache(path: &Path, network: &Network) -> Result<RouteCache> {
    let text = fs::read_to_string(path)?;
    let doc: RouteCacheDoc = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if doc.schema != ROUTE_CACHE_SCHEMA {
        return Err(Error::Parse(format!("schema: expected {ROUTE_CACHE_SCHEMA}, found {}", doc.schema)));
    }
    if doc.cache.network_hash != network.fingerprint() {
        return Ok(RouteCache::new(network));
    }
    Ok(doc.cache)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenSpec {
        GenSpec {
            pdos: 20,
            spvs: 30,
            seed: 5,
            ..GenSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = instance_to_string(&generate_instance(&small()).unwrap());
        let b = instance_to_string(&generate_instance(&small()).unwrap());
        assert_eq!(a, b);
        let c = instance_to_string(&generate_instance(&GenSpec { seed: 6, ..small() }).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn counts_and_defaults() {
        let inst = generate_instance(&GenSpec {
            pdos: 200,
            spvs: 1200,
            ..GenSpec::default()
        })
        .unwrap();
        assert_eq!(inst.pdos.len(), 200);
        assert_eq!(inst.spvs.len(), 1200);
        assert_eq!(inst.network.node_count(), 100);
        assert_eq!(inst.network.arc_count(), 2 * 180);
        assert!(inst.pdos.iter().all(|p| p.drop_node != inst.depot && [720, 960, 1200].contains(&p.latest_delivery)));
        assert!(inst.spvs.iter().all(|s| s.origin != s.destination && (1..=4).contains(&s.max_stops)));
        assert_eq!(inst.dv_spec.max_stops, 60);
        assert_eq!(inst.dv_spec.fixed_cost, 120.0);
        let empty = generate_instance(&GenSpec { pdos: 0, ..small() }).unwrap();
        assert!(empty.pdos.is_empty());
    }

    #[test]
    fn unsatisfiable_specs() {
        let one = GenSpec {
            network: NetworkKind::Grid { cols: 1, rows: 1 },
            ..small()
        };
        assert!(matches!(generate_instance(&one), Err(Error::Generation(_))));
        let missing = GenSpec {
            depot: DepotPlacement::Node(9999),
            ..small()
        };
        assert!(matches!(generate_instance(&missing), Err(Error::Generation(_))));
    }

    #[test]
    fn depot_placements() {
        let g = |depot| {
            generate_instance(&GenSpec {
                depot,
                grid_jitter: 0.0,
                ..small()
            })
            .unwrap()
            .depot
        };
        let center = g(DepotPlacement::Center);
        let boundary = g(DepotPlacement::Boundary);
        // 10x10 grid numbered row-major from 1
        assert_eq!(center, NodeId(45));
        assert_eq!(boundary, NodeId(41));
        let spec = GenSpec {
            node_id_base: 152600,
            depot: DepotPlacement::Node(152688),
            ..small()
        };
        assert_eq!(generate_instance(&spec).unwrap().depot, NodeId(152688));
    }

    #[test]
    fn planar_network_is_connected_and_planar() {
        let spec = GenSpec {
            network: NetworkKind::RandomPlanar { nodes: 120 },
            ..small()
        };
        let inst = generate_instance(&spec).unwrap();
        let net = &inst.network;
        let d = net.distances();
        for i in 0..net.node_count() {
            assert!(d.get(0, i).is_some());
        }
        let links = net.arc_count() / 2;
        assert_eq!(links, 180);
        let pos = |n: NodeId| {
            let p = net.position(n).unwrap();
            ((p.x * 1000.0).round() as i64, (p.y * 1000.0).round() as i64)
        };
        let arcs: Vec<_> = net.arcs().iter().filter(|a| a.tail < a.head).collect();
        for (i, a) in arcs.iter().enumerate() {
            for b in &arcs[i + 1..] {
                if [a.tail, a.head].iter().any(|n| *n == b.tail || *n == b.head) {
                    continue;
                }
                assert!(!segments_cross(pos(a.tail), pos(a.head), pos(b.tail), pos(b.head)));
            }
        }
    }

    #[test]
    fn instance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for spec in [
            small(),
            GenSpec {
                network: NetworkKind::RandomPlanar { nodes: 40 },
                ..small()
            },
        ] {
            let inst = generate_instance(&spec).unwrap();
            let path = dir.path().join("inst.json");
            save_instance(&path, &inst).unwrap();
            assert_eq!(load_instance(&path).unwrap(), inst);
        }
    }

    #[test]
    fn parse_errors_carry_context() {
        let inst = generate_instance(&small()).unwrap();
        let text = instance_to_string(&inst);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["network"]["links"][3]["miles"] = serde_json::json!(-0.5);
        let err = instance_from_str(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("length must be positive") && err.contains("links[3]"), "{err}");

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["demand"]["pdos"][2]["drop_node"] = serde_json::json!(777);
        let err = instance_from_str(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("pdo p3") && err.contains("777"), "{err}");

        let err = instance_from_str("{\n  \"schema\": \"crowdship-instance/1\",\n  \"depot\": 1\n}").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn route_cache_round_trip_and_mismatch() {
        use crate::kpaths::{RouteConfig, RouteGenerator};
        let inst = generate_instance(&small()).unwrap();
        let gen = RouteGenerator::new(&inst, RouteConfig::default());
        let mut cache = RouteCache::new(&inst.network);
        for s in &inst.spvs {
            gen.routes(s, Some(&mut cache)).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("routes.json");
        save_route_cache(&path, &cache).unwrap();
        assert_eq!(load_route_cache(&path, &inst.network).unwrap(), cache);
        let other = generate_instance(&GenSpec {
            network: NetworkKind::Grid { cols: 4, rows: 4 },
            ..small()
        })
        .unwrap();
        assert!(load_route_cache(&path, &other.network).unwrap().is_empty());
    }
}
