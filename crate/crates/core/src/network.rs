//! Directed road network with per-arc lengths, shortest paths and the
//! distance/time/money conversion for each vehicle class.
//!
//! Arc lengths are stored as integer thousandths of a mile. Path lengths are
//! therefore exact integer sums, which keeps shortest-path ties and budget
//! comparisons reproducible across platforms; minutes and dollars are derived
//! from lengths through a [`CostModel`].

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Unreachable marker in distance vectors.
pub const UNREACHABLE: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
    /// Length in thousandths of a mile.
    pub length_milli: u32,
}

impl Arc {
    pub fn new(tail: NodeId, head: NodeId, length_milli: u32) -> Self {
        Self {
            tail,
            head,
            length_milli,
        }
    }

    /// Length in miles.
    pub fn length(&self) -> f64 {
        milli_to_miles(self.length_milli as u64)
    }
}

pub fn milli_to_miles(milli: u64) -> f64 {
    milli as f64 / 1000.0
}

/// Expands undirected edges into a pair of opposite arcs each.
pub fn undirected(edges: &[(NodeId, NodeId, u32)]) -> Vec<Arc> {
    edges
        .iter()
        .flat_map(|&(a, b, len)| [Arc::new(a, b, len), Arc::new(b, a, len)])
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Spv,
    Dv,
}

/// Speeds (mph) and per-mile rates ($/mile) for both vehicle classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub spv_speed: f64,
    pub dv_speed: f64,
    pub spv_rate: f64,
    pub dv_rate: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            spv_speed: 40.0,
            dv_speed: 30.0,
            spv_rate: 0.56,
            dv_rate: 1.5,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("spv_speed", self.spv_speed),
            ("dv_speed", self.dv_speed),
            ("spv_rate", self.spv_rate),
            ("dv_rate", self.dv_rate),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "cost model {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn speed(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Spv => self.spv_speed,
            VehicleClass::Dv => self.dv_speed,
        }
    }

    pub fn rate(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Spv => self.spv_rate,
            VehicleClass::Dv => self.dv_rate,
        }
    }

    /// Travel time in minutes for a length in milli-miles.
    pub fn minutes(&self, class: VehicleClass, milli: u64) -> f64 {
        milli as f64 * 60.0 / (1000.0 * self.speed(class))
    }

    /// Monetized cost in dollars for a length in milli-miles.
    pub fn dollars(&self, class: VehicleClass, milli: u64) -> f64 {
        milli as f64 * self.rate(class) / 1000.0
    }

    /// Dollars for a signed length difference (detours, insertion deltas).
    pub fn dollars_signed(&self, class: VehicleClass, milli: i64) -> f64 {
        milli as f64 * self.rate(class) / 1000.0
    }

    /// Largest length (milli-miles) whose travel time stays within `minutes`,
    /// with 1e-9 minutes of slack.
    pub fn budget_milli(&self, class: VehicleClass, minutes: f64) -> u64 {
        if !(minutes >= 0.0) {
            return 0;
        }
        let raw = (minutes + 1e-9) * self.speed(class) * 1000.0 / 60.0;
        if raw >= u64::MAX as f64 {
            u64::MAX - 1
        } else {
            raw.floor() as u64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcMetrics {
    /// Minutes.
    pub travel_time: f64,
    /// Dollars.
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSummary {
    pub nodes: Vec<NodeId>,
    pub total_time: f64,
    pub total_cost: f64,
    pub total_miles: f64,
}

/// All-pairs shortest lengths in milli-miles, indexed by dense node index.
#[derive(Clone, Debug)]
pub struct DistanceTable {
    n: usize,
    data: Vec<u64>,
}

impl DistanceTable {
    pub fn get(&self, from: usize, to: usize) -> Option<u64> {
        let d = self.data[from * self.n + to];
        (d != UNREACHABLE).then_some(d)
    }
}

#[derive(Debug)]
pub struct Network {
    ids: Vec<NodeId>,
    positions: Option<Vec<Point>>,
    index: HashMap<NodeId, usize>,
    arcs: Vec<Arc>,
    ends: Vec<(usize, usize)>,
    out_offsets: Vec<usize>,
    out_list: Vec<usize>,
    in_offsets: Vec<usize>,
    in_list: Vec<usize>,
    all_pairs: OnceLock<DistanceTable>,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Self {
            ids: self.ids.clone(),
            positions: self.positions.clone(),
            index: self.index.clone(),
            arcs: self.arcs.clone(),
            ends: self.ends.clone(),
            out_offsets: self.out_offsets.clone(),
            out_list: self.out_list.clone(),
            in_offsets: self.in_offsets.clone(),
            in_list: self.in_list.clone(),
            all_pairs: OnceLock::new(),
        }
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids && self.positions == other.positions && self.arcs == other.arcs
    }
}

impl Network {
    pub fn new(nodes: Vec<NodeId>, arcs: Vec<Arc>) -> Result<Self> {
        Self::build(nodes.into_iter().map(|n| (n, None)).collect(), arcs)
    }

    /// Network whose nodes carry planar coordinates (miles).
    pub fn with_positions(nodes: Vec<(NodeId, Point)>, arcs: Vec<Arc>) -> Result<Self> {
        Self::build(nodes.into_iter().map(|(n, p)| (n, Some(p))).collect(), arcs)
    }

    fn build(mut nodes: Vec<(NodeId, Option<Point>)>, arcs: Vec<Arc>) -> Result<Self> {
        nodes.sort_by_key(|(id, _)| *id);
        for w in nodes.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidNetwork(format!("duplicate node {}", w[0].0)));
            }
        }
        let has_pos = nodes.iter().filter(|(_, p)| p.is_some()).count();
        if has_pos != 0 && has_pos != nodes.len() {
            return Err(Error::InvalidNetwork(
                "either all nodes or none carry positions".into(),
            ));
        }
        let positions = (has_pos > 0 && !nodes.is_empty())
            .then(|| nodes.iter().map(|(_, p)| p.unwrap()).collect());
        let ids: Vec<NodeId> = nodes.iter().map(|(id, _)| *id).collect();
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();

        let mut ends = Vec::with_capacity(arcs.len());
        let mut seen = HashSet::with_capacity(arcs.len());
        for (k, a) in arcs.iter().enumerate() {
            let t = *index.get(&a.tail).ok_or_else(|| {
                Error::InvalidNetwork(format!("arc {k}: tail {} is not a declared node", a.tail))
            })?;
            let h = *index.get(&a.head).ok_or_else(|| {
                Error::InvalidNetwork(format!("arc {k}: head {} is not a declared node", a.head))
            })?;
            if t == h {
                return Err(Error::InvalidNetwork(format!("arc {k}: self-loop at {}", a.tail)));
            }
            if a.length_milli == 0 {
                return Err(Error::InvalidNetwork(format!(
                    "arc {k} ({}->{}): length must be positive",
                    a.tail, a.head
                )));
            }
            if !seen.insert((t, h)) {
                return Err(Error::InvalidNetwork(format!(
                    "arc {k}: duplicate arc {}->{}",
                    a.tail, a.head
                )));
            }
            ends.push((t, h));
        }

        let n = ids.len();
        let (out_offsets, out_list) = csr(n, &ends, |&(t, h)| (t, h));
        let (in_offsets, in_list) = csr(n, &ends, |&(t, h)| (h, t));

        Ok(Self {
            ids,
            positions,
            index,
            arcs,
            ends,
            out_offsets,
            out_list,
            in_offsets,
            in_list,
            all_pairs: OnceLock::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// Node ids in ascending order; position in this slice is the dense index.
    pub fn nodes(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn positions(&self) -> Option<&[Point]> {
        self.positions.as_deref()
    }

    pub fn position(&self, id: NodeId) -> Option<Point> {
        let i = self.index_of(id)?;
        self.positions.as_ref().map(|p| p[i])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub(crate) fn require(&self, id: NodeId) -> Result<usize> {
        self.index_of(id).ok_or(Error::UnknownNode(id))
    }

    pub fn node_at(&self, idx: usize) -> NodeId {
        self.ids[idx]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, arc: usize) -> Result<&Arc> {
        self.arcs.get(arc).ok_or(Error::UnknownArc(arc))
    }

    /// Outgoing `(arc id, head index, length)` of a node, heads ascending.
    pub(crate) fn out_arcs(&self, idx: usize) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.out_list[self.out_offsets[idx]..self.out_offsets[idx + 1]]
            .iter()
            .map(move |&a| (a, self.ends[a].1, self.arcs[a].length_milli as u64))
    }

    /// Incoming `(arc id, tail index, length)` of a node.
    #[cfg(test)]
    pub(crate) fn in_arcs(&self, idx: usize) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.in_list[self.in_offsets[idx]..self.in_offsets[idx + 1]]
            .iter()
            .map(move |&a| (a, self.ends[a].0, self.arcs[a].length_milli as u64))
    }

    pub(crate) fn arc_between_idx(&self, from: usize, to: usize) -> Option<usize> {
        self.out_arcs(from).find(|&(_, h, _)| h == to).map(|(a, _, _)| a)
    }

    pub fn arc_between(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.arc_between_idx(self.index_of(from)?, self.index_of(to)?)
    }

    pub fn arc_metrics(&self, arc: usize, model: &CostModel, class: VehicleClass) -> Result<ArcMetrics> {
        let a = self.arc(arc)?;
        let milli = a.length_milli as u64;
        Ok(ArcMetrics {
            travel_time: model.minutes(class, milli),
            cost: model.dollars(class, milli),
        })
    }

    /// Length of a node sequence that must follow existing arcs.
    pub fn path_length_milli(&self, path: &[NodeId]) -> Result<u64> {
        let mut total = 0u64;
        for w in path.windows(2) {
            let a = self.arc_between(w[0], w[1]).ok_or_else(|| {
                Error::Contract(format!("no arc {}->{} on path", w[0], w[1]))
            })?;
            total += self.arcs[a].length_milli as u64;
        }
        Ok(total)
    }

    /// Minimum-time path. Ties go to the smallest predecessor node id.
    pub fn shortest_path(
        &self,
        origin: NodeId,
        dest: NodeId,
        model: &CostModel,
        class: VehicleClass,
    ) -> Result<PathSummary> {
        let s = self.require(origin)?;
        let t = self.require(dest)?;
        let (dist, pred) = self.dijkstra(s, Some(t));
        if dist[t] == UNREACHABLE {
            return Err(Error::NoPath {
                from: origin,
                to: dest,
            });
        }
        let mut idx_path = vec![t];
        let mut cur = t;
        while cur != s {
            cur = pred[cur];
            idx_path.push(cur);
        }
        idx_path.reverse();

        let mut summary = PathSummary {
            nodes: idx_path.iter().map(|&i| self.ids[i]).collect(),
            total_time: 0.0,
            total_cost: 0.0,
            total_miles: 0.0,
        };
        for w in idx_path.windows(2) {
            let arc = self.arc_between_idx(w[0], w[1]).expect("predecessor arc");
            let m = self.arc_metrics(arc, model, class)?;
            summary.total_time += m.travel_time;
            summary.total_cost += m.cost;
            summary.total_miles += self.arcs[arc].length();
        }
        Ok(summary)
    }

    /// Single-source Dijkstra over lengths; stops early once `target` is settled.
    pub(crate) fn dijkstra(&self, source: usize, target: Option<usize>) -> (Vec<u64>, Vec<usize>) {
        let n = self.ids.len();
        let mut dist = vec![UNREACHABLE; n];
        let mut pred = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0;
        pred[source] = source;
        heap.push(Reverse((0u64, source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if Some(u) == target {
                break;
            }
            for (_, v, len) in self.out_arcs(u) {
                let nd = d + len;
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = u;
                    heap.push(Reverse((nd, v)));
                } else if nd == dist[v] && !done[v] && u < pred[v] {
                    pred[v] = u;
                }
            }
        }
        (dist, pred)
    }

    /// Shortest lengths from every node to `target` (reverse Dijkstra).
    #[cfg(test)]
    pub(crate) fn distances_to(&self, target: usize) -> Vec<u64> {
        let n = self.ids.len();
        let mut dist = vec![UNREACHABLE; n];
        let mut heap = BinaryHeap::new();
        dist[target] = 0;
        heap.push(Reverse((0u64, target)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for (_, v, len) in self.in_arcs(u) {
                let nd = d + len;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }

    /// All-pairs shortest lengths, computed on first use.
    pub fn distances(&self) -> &DistanceTable {
        self.all_pairs.get_or_init(|| {
            let n = self.ids.len();
            let mut data = Vec::with_capacity(n * n);
            for s in 0..n {
                data.extend(self.dijkstra(s, None).0);
            }
            DistanceTable { n, data }
        })
    }

    /// Shortest length between two nodes, `None` if unknown or unreachable.
    pub fn length_between(&self, from: NodeId, to: NodeId) -> Option<u64> {
        let (a, b) = (self.index_of(from)?, self.index_of(to)?);
        self.distances().get(a, b)
    }

    /// Content hash of nodes and arcs, used to key route caches.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for id in &self.ids {
            h.update(id.0.to_le_bytes());
        }
        h.update(b"|");
        let mut arcs: Vec<_> = self.arcs.iter().map(|a| (a.tail, a.head, a.length_milli)).collect();
        arcs.sort();
        for (t, hd, len) in arcs {
            h.update(t.0.to_le_bytes());
            h.update(hd.0.to_le_bytes());
            h.update(len.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn csr<F>(n: usize, ends: &[(usize, usize)], key: F) -> (Vec<usize>, Vec<usize>)
where
    F: Fn(&(usize, usize)) -> (usize, usize),
{
    let mut order: Vec<usize> = (0..ends.len()).collect();
    order.sort_by_key(|&a| key(&ends[a]));
    let mut offsets = vec![0usize; n + 1];
    for e in ends {
        offsets[key(e).0 + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    (offsets, order)
}
