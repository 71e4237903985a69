//! Sweep drivers and the metrics tables they emit.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dh::{solve_dh, DhConfig, DhTrace};
use crate::domain::{Instance, Solution};
use crate::error::{Error, Result};
use crate::kpaths::RouteGenerator;
use crate::network::VehicleClass;
use crate::scenario::{generate_instance, DepotPlacement, GenSpec};

pub const METRICS_SCHEMA: &str = "#schema=metrics/v1";
pub const HISTOGRAM_SCHEMA: &str = "#schema=detour-histogram/v1";

/// One solved point of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub point: String,
    pub spv_count: usize,
    pub pdos_by_spv: usize,
    pub pdos_by_dv: usize,
    pub spv_cost: f64,
    pub dv_cost: f64,
    pub total: f64,
    pub spv_vmt: f64,
    pub dv_vmt: f64,
    pub dv_count: usize,
    pub wall_seconds: f64,
    /// Share of SPVs with at least one route that can serve a PDO.
    pub feasible_spv_pct: f64,
    pub gap: Option<f64>,
}

impl MetricsRow {
    pub fn new(point: impl Into<String>, spv_count: usize, solution: &Solution, wall_seconds: f64) -> Self {
        let c = &solution.cost;
        Self {
            point: point.into(),
            spv_count,
            pdos_by_spv: solution.pdos_by_spv(),
            pdos_by_dv: solution.pdos_by_dv(),
            spv_cost: c.spv_cost(),
            dv_cost: c.dv_cost(),
            total: c.total,
            spv_vmt: c.spv_vmt,
            dv_vmt: c.dv_vmt,
            dv_count: solution.dv_count(),
            wall_seconds,
            feasible_spv_pct: 0.0,
            gap: None,
        }
    }
}

/// Writes the schema line, a header and one line per row.
pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut out = out;
    writeln!(out, "{METRICS_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    if rows.is_empty() {
        w.write_record(METRICS_COLUMNS).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub const METRICS_COLUMNS: [&str; 13] = [
    "point",
    "spv_count",
    "pdos_by_spv",
    "pdos_by_dv",
    "spv_cost",
    "dv_cost",
    "total",
    "spv_vmt",
    "dv_vmt",
    "dv_count",
    "wall_seconds",
    "feasible_spv_pct",
    "gap",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Percentage of SPVs owning a candidate route that can serve some PDO.
pub fn feasible_spv_pct(instance: &Instance, config: &DhConfig) -> Result<f64> {
    if instance.spvs.is_empty() {
        return Ok(0.0);
    }
    let gen = RouteGenerator::new(instance, config.routes);
    let mut feasible = 0usize;
    for s in &instance.spvs {
        if gen.routes(s, None)?.iter().any(|r| !r.is_null && !r.servable.is_empty()) {
            feasible += 1;
        }
    }
    Ok(100.0 * feasible as f64 / instance.spvs.len() as f64)
}

/// Whole-minute buckets of extra SPV travel time over the shortest
/// depot-to-destination path, counting SPVs that serve PDOs.
pub fn detour_histogram(instance: &Instance, solution: &Solution) -> Result<BTreeMap<u32, usize>> {
    let model = instance.model();
    let mut hist = BTreeMap::new();
    for plan in solution.spv_plans.values() {
        let spv = instance
            .spv(plan.spv)
            .ok_or_else(|| Error::Contract(format!("unknown spv {}", plan.spv)))?;
        let used = instance.network.path_length_milli(&plan.route)?;
        let shortest = instance
            .length(instance.depot, spv.destination)
            .ok_or(Error::NoPath { from: instance.depot, to: spv.destination })?;
        let extra = model.minutes(VehicleClass::Spv, used.saturating_sub(shortest));
        *hist.entry((extra + 1e-9).floor() as u32).or_insert(0) += 1;
    }
    Ok(hist)
}

/// One block of rows per labelled histogram, in the given order.
pub fn write_histogram<W: Write>(out: W, hists: &[(&str, &BTreeMap<u32, usize>)]) -> Result<()> {
    let mut out = out;
    writeln!(out, "{HISTOGRAM_SCHEMA}")?;
    writeln!(out, "point,detour_minutes,spvs")?;
    for (point, hist) in hists {
        for (k, v) in hist.iter() {
            writeln!(out, "{point},{k},{v}")?;
        }
    }
    Ok(())
}

/// A solved sweep point.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub row: MetricsRow,
    pub solution: Solution,
    pub trace: DhTrace,
    pub instance: Instance,
}

/// Solves one instance and fills in its metrics row.
pub fn run_point(point: String, instance: Instance, config: &DhConfig) -> Result<SweepPoint> {
    let start = Instant::now();
    let (solution, trace) = solve_dh(&instance, config)?;
    let wall = start.elapsed().as_secs_f64();
    let spvs = config.spv_limit.map_or(instance.spvs.len(), |n| n.min(instance.spvs.len()));
    let mut row = MetricsRow::new(point, spvs, &solution, wall);
    if let Some(last) = trace.iterations.last().filter(|r| r.active_spvs > 0) {
        row.feasible_spv_pct = 100.0 * last.feasible_spvs as f64 / last.active_spvs as f64;
    }
    Ok(SweepPoint {
        row,
        solution,
        trace,
        instance,
    })
}

/// One solve per SPV count, each using a prefix of the seeded SPV order.
pub fn sweep_spv_counts(instance: &Instance, config: &DhConfig, counts: &[usize]) -> Result<Vec<SweepPoint>> {
    counts
        .iter()
        .map(|&n| {
            let cfg = DhConfig {
                spv_limit: Some(n),
                ..config.clone()
            };
            run_point(format!("spvs={n}"), instance.clone(), &cfg)
        })
        .collect()
}

/// Same SPVs with a common detour willingness; latest arrival moves with it.
pub fn with_willingness(instance: &Instance, minutes: f64) -> Instance {
    let mut inst = instance.clone();
    for s in &mut inst.spvs {
        s.detour_willingness = minutes;
        s.latest_arrival = s.earliest_start + minutes.round() as u32;
    }
    inst
}

pub fn sweep_willingness(instance: &Instance, config: &DhConfig, minutes: &[f64]) -> Result<Vec<SweepPoint>> {
    minutes
        .iter()
        .map(|&m| run_point(format!("willingness={m}"), with_willingness(instance, m), config))
        .collect()
}

pub fn sweep_depot(spec: &GenSpec, config: &DhConfig, placements: &[DepotPlacement]) -> Result<Vec<SweepPoint>> {
    placements
        .iter()
        .map(|&d| {
            let inst = generate_instance(&GenSpec { depot: d, ..spec.clone() })?;
            let label = match d {
                DepotPlacement::Boundary => "depot=boundary".to_string(),
                DepotPlacement::Center => "depot=center".to_string(),
                DepotPlacement::Node(n) => format!("depot=node:{n}"),
            };
            run_point(label, inst, config)
        })
        .collect()
}

/// Solves with SPV origins at their homes, then re-prices the same plans
/// with origins at the depot.
pub fn sweep_origins(instance: &Instance, config: &DhConfig) -> Result<Vec<SweepPoint>> {
    let mut home = instance.clone();
    home.spv_origins_at_depot = false;
    let base = run_point("origins=home".into(), home, config)?;
    let mut depot = instance.clone();
    depot.spv_origins_at_depot = true;
    let mut solution = base.solution.clone();
    solution.cost = crate::domain::total_objective(&depot, &solution)?;
    let mut row = MetricsRow::new("origins=depot", base.row.spv_count, &solution, 0.0);
    row.feasible_spv_pct = base.row.feasible_spv_pct;
    let second = SweepPoint {
        row,
        solution,
        trace: base.trace.clone(),
        instance: depot,
    };
    Ok(vec![base, second])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::*;

    #[test]
    fn metrics_csv_layout() {
        let sol = Solution::default();
        let mut buf = Vec::new();
        write_metrics(&mut buf, &[MetricsRow::new("p", 0, &sol, 0.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], METRICS_SCHEMA);
        assert_eq!(lines[1], METRICS_COLUMNS.join(","));
        assert_eq!(lines[2], "p,0,0,0,0.0,0.0,0.0,0.0,0.0,0,0.5,0.0,");
        let mut buf = Vec::new();
        write_metrics(&mut buf, &[]).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("gap\n"));
    }

    #[test]
    fn histogram_counts_detours() {
        let mut inst = line_instance();
        inst.pdos = vec![pdo(1, 5, 720)];
        inst.spvs = vec![spv(1, 1, 3, 480, 30.0)];
        let (sol, _) = solve_dh(&inst, &DhConfig::default()).unwrap();
        let h = detour_histogram(&inst, &sol).unwrap();
        // 1 -> 2 -> 5 -> 3 is 3 miles vs 2 direct: 1.5 minutes at 40 mph
        assert_eq!(h, BTreeMap::from([(1, 1)]));
        let mut buf = Vec::new();
        write_histogram(&mut buf, &[("a", &h)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("{HISTOGRAM_SCHEMA}\npoint,detour_minutes,spvs\na,1,1\n"));
    }

    #[test]
    fn willingness_moves_latest_arrival() {
        let mut inst = line_instance();
        inst.spvs = vec![spv(1, 1, 3, 480, 30.0)];
        let w = with_willingness(&inst, 20.0);
        assert_eq!(w.spvs[0].latest_arrival, 500);
        assert_eq!(w.spvs[0].detour_willingness, 20.0);
    }
}
