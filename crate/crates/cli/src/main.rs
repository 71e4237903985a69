use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use crowdship_core::assign::AssignBackend;
use crowdship_core::dh::incumbent_gap;
use crowdship_core::experiment::{
    detour_histogram, run_point, sweep_depot, sweep_origins, sweep_spv_counts, sweep_willingness, write_histogram,
    write_metrics, MetricsRow, SweepPoint,
};
use crowdship_core::kpaths::PathEngine;
use crowdship_core::scenario::save_solution;
use crowdship_core::{
    generate_instance, load_instance, save_instance, solve_exact_bruteforce, validate_solution, DepotPlacement,
    DhConfig, Error, GenSpec, Instance, NetworkKind, OracleLimits,
};

#[derive(Parser)]
#[command(name = "crowdship", version, about = "Split package deliveries between shared trips and dedicated vans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, env = "CROWDSHIP_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Solve one instance and print its metrics row.
    Solve(SolveCmd),
    /// Solve along one experiment axis, one row per point.
    Sweep(SweepCmd),
    /// Solve with the heuristic and the exact oracle side by side.
    Compare {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, env = "CROWDSHIP_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct GenArgs {
    /// Grid network, COLSxROWS.
    #[arg(long, value_parser = parse_grid, conflicts_with = "planar")]
    grid: Option<(u32, u32)>,
    /// Random planar network with this many nodes.
    #[arg(long)]
    planar: Option<u32>,
    #[arg(long)]
    pdos: usize,
    #[arg(long, default_value_t = 1200)]
    spvs: usize,
    /// boundary, center or node:ID
    #[arg(long, default_value = "center", value_parser = parse_depot)]
    depot: DepotPlacement,
    #[arg(long, default_value_t = 1)]
    node_id_base: u32,
    /// Square miles.
    #[arg(long, default_value_t = 25.0)]
    area: f64,
    #[arg(long, default_value_t = 0.25)]
    jitter: f64,
    /// Minutes.
    #[arg(long, default_value_t = 30.0)]
    willingness: f64,
    /// LO:HI
    #[arg(long, default_value = "1:4", value_parser = parse_pair)]
    spv_max_stops: (u32, u32),
    /// Latest delivery choices, minutes of the day.
    #[arg(long, value_delimiter = ',', default_value = "720,960,1200")]
    deadlines: Vec<u32>,
    #[arg(long)]
    origins_at_depot: bool,
    #[arg(long)]
    fleet_limit: Option<u32>,
    #[arg(long, default_value_t = 60)]
    dv_max_stops: u32,
    #[arg(long, default_value_t = 120.0)]
    dv_fixed_cost: f64,
}

impl GenArgs {
    fn spec(&self, seed: u64) -> GenSpec {
        let d = GenSpec::default();
        let network = match (self.grid, self.planar) {
            (_, Some(nodes)) => NetworkKind::RandomPlanar { nodes },
            (Some((cols, rows)), None) => NetworkKind::Grid { cols, rows },
            (None, None) => d.network,
        };
        let mut spec = GenSpec {
            network,
            area_sq_miles: self.area,
            node_id_base: self.node_id_base,
            grid_jitter: self.jitter,
            depot: self.depot,
            pdos: self.pdos,
            deadline_menu: self.deadlines.clone(),
            spvs: self.spvs,
            detour_willingness: self.willingness,
            spv_max_stops: self.spv_max_stops,
            spv_origins_at_depot: self.origins_at_depot,
            seed,
            ..d
        };
        spec.dv_spec.fleet_limit = self.fleet_limit;
        spec.dv_spec.max_stops = self.dv_max_stops;
        spec.dv_spec.fixed_cost = self.dv_fixed_cost;
        spec
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Auto,
    Exact,
    Benders,
    Heuristic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Yen,
    Recursive,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = Backend::Auto)]
    backend: Backend,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Candidate routes kept per SPV; 0 keeps all.
    #[arg(long, default_value_t = 200)]
    max_routes: usize,
    #[arg(long, value_enum, default_value_t = Engine::Yen)]
    engine: Engine,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> anyhow::Result<DhConfig> {
        if self.batch_size == 0 {
            bail!("--batch-size must be positive");
        }
        let mut c = DhConfig {
            batch_size: self.batch_size,
            seed,
            ..DhConfig::default()
        };
        c.assign.backend = match self.backend {
            Backend::Auto => AssignBackend::Auto,
            Backend::Exact => AssignBackend::Exact,
            Backend::Benders => AssignBackend::Benders,
            Backend::Heuristic => AssignBackend::Heuristic,
        };
        c.assign.epsilon = self.epsilon;
        c.routes.max_routes = (self.max_routes > 0).then_some(self.max_routes);
        c.routes.engine = match self.engine {
            Engine::Yen => PathEngine::Yen,
            Engine::Recursive => PathEngine::Recursive,
        };
        Ok(c)
    }
}

#[derive(Args)]
struct SolveCmd {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Drives the SPV order.
    #[arg(long, env = "CROWDSHIP_SEED", default_value_t = 0)]
    seed: u64,
    /// Use only the first N SPVs of the seeded order.
    #[arg(long)]
    spvs_limit: Option<usize>,
    /// Also run the exact oracle and report the gap.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Metrics CSV path; stdout when absent.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Per-iteration CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("axis").required(true).multiple(false)
    .args(["spv_counts", "willingness_menu", "depots", "origins"])))]
#[command(group(ArgGroup::new("source").required(true).args(["instance", "pdos"])))]
struct SweepCmd {
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    gen: Option<GenArgs>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Drives generation and SPV ordering.
    #[arg(long, env = "CROWDSHIP_SEED", default_value_t = 0)]
    seed: u64,
    /// START:END:STEP, inclusive.
    #[arg(long, value_parser = parse_range)]
    spv_counts: Option<Counts>,
    /// Minutes, comma separated.
    #[arg(long, value_delimiter = ',')]
    willingness_menu: Option<Vec<f64>>,
    /// Depot placements, comma separated; needs generator flags.
    #[arg(long, value_delimiter = ',', value_parser = parse_depot)]
    depots: Option<Vec<DepotPlacement>>,
    /// SPV origins at home, then at the depot.
    #[arg(long)]
    origins: bool,
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long)]
    histogram: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(u32, u32), String> {
    let (c, r) = s.split_once(['x', 'X']).ok_or("expected COLSxROWS")?;
    Ok((c.parse().map_err(|e| format!("{e}"))?, r.parse().map_err(|e| format!("{e}"))?))
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    Ok((a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?))
}

fn parse_depot(s: &str) -> Result<DepotPlacement, String> {
    match s {
        "boundary" => Ok(DepotPlacement::Boundary),
        "center" => Ok(DepotPlacement::Center),
        _ => s
            .strip_prefix("node:")
            .and_then(|n| u32::from_str(n).ok())
            .map(DepotPlacement::Node)
            .ok_or_else(|| format!("expected boundary, center or node:ID, got {s:?}")),
    }
}

#[derive(Clone, Debug)]
struct Counts(Vec<usize>);

fn parse_range(s: &str) -> Result<Counts, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.parse().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match nums[..] {
        [a, b, step] if step > 0 && a <= b => Ok(Counts((a..=b).step_by(step).collect())),
        [a, b] if a <= b => Ok(Counts((a..=b).collect())),
        _ => Err("expected START:END[:STEP] with START <= END and STEP > 0".into()),
    }
}

fn depot_label(d: DepotPlacement) -> String {
    match d {
        DepotPlacement::Boundary => "boundary".into(),
        DepotPlacement::Center => "center".into(),
        DepotPlacement::Node(n) => format!("node:{n}"),
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn summary(inst: &Instance) -> String {
    format!(
        "{} nodes, {} arcs, depot {}, {} PDOs, {} SPVs",
        inst.network.node_count(),
        inst.network.arc_count(),
        inst.depot,
        inst.pdos.len(),
        inst.spvs.len()
    )
}

fn check_valid(instance: &Instance, point: &SweepPoint) -> anyhow::Result<()> {
    let report = validate_solution(instance, &point.solution);
    if !report.is_ok() {
        for v in &report.violations {
            eprintln!("  {v}");
        }
        bail!("{}: solution failed validation", point.row.point);
    }
    Ok(())
}

fn cmd_generate(gen: &GenArgs, seed: u64, out: &Path) -> anyhow::Result<()> {
    let inst = generate_instance(&gen.spec(seed))?;
    save_instance(out, &inst).with_context(|| format!("writing {}", out.display()))?;
    println!("{}", out.display());
    eprintln!("{}", summary(&inst));
    Ok(())
}

fn cmd_solve(cmd: &SolveCmd) -> anyhow::Result<()> {
    let inst = load_instance(&cmd.instance).with_context(|| format!("loading {}", cmd.instance.display()))?;
    eprintln!("{}", summary(&inst));
    let config = DhConfig {
        spv_limit: cmd.spvs_limit,
        ..cmd.solver.config(cmd.seed)?
    };
    let oracle = if cmd.oracle {
        let start = Instant::now();
        let mut exact = inst.clone();
        let order = crowdship_core::dh::spv_order(&inst, config.seed);
        let keep = config.spv_limit.unwrap_or(order.len()).min(order.len());
        exact.spvs = order[..keep].iter().map(|&i| inst.spvs[i].clone()).collect();
        let (_, cost) = solve_exact_bruteforce(&exact, &OracleLimits::default())?;
        eprintln!("oracle cost {cost:.4} ({:.2}s)", start.elapsed().as_secs_f64());
        Some(cost)
    } else {
        None
    };
    let mut point = run_point("solve".into(), inst.clone(), &config)?;
    check_valid(&inst, &point)?;
    if let Some(cost) = oracle {
        let gap = if cost == 0.0 { 0.0 } else { incumbent_gap(point.row.total, cost) };
        point.row.gap = Some(gap);
        eprintln!("gap {:.4}%", 100.0 * gap);
    }
    eprintln!(
        "total {:.4}: {} PDOs by SPV, {} by {} DVs, {:.2}s",
        point.row.total, point.row.pdos_by_spv, point.row.pdos_by_dv, point.row.dv_count, point.row.wall_seconds
    );
    if let Some(p) = &cmd.solution {
        save_solution(p, &point.solution).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &cmd.trace {
        write_trace(p, &point)?;
    }
    write_metrics(output(cmd.metrics.as_deref())?, &[point.row])?;
    Ok(())
}

fn write_trace(path: &Path, point: &SweepPoint) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "iteration",
        "active_spvs",
        "feasible_spvs",
        "matched_initial",
        "matched_final",
        "switches",
        "dv_count",
        "total_cost",
        "incumbent_cost",
        "assignment_converged",
        "wall_seconds",
    ])?;
    let opt = |v: Option<f64>| v.map(|c| c.to_string()).unwrap_or_default();
    for r in &point.trace.iterations {
        w.write_record([
            r.iteration.to_string(),
            r.active_spvs.to_string(),
            r.feasible_spvs.to_string(),
            r.matched_initial.to_string(),
            r.matched_final.to_string(),
            r.switches.records.len().to_string(),
            r.dv_count.to_string(),
            opt(r.total_cost),
            opt(r.incumbent_cost),
            r.assignment_converged.to_string(),
            r.wall_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_sweep(cmd: &SweepCmd) -> anyhow::Result<()> {
    let config = cmd.solver.config(cmd.seed)?;
    let instance = || -> anyhow::Result<Instance> {
        match (&cmd.instance, &cmd.gen) {
            (Some(p), _) => Ok(load_instance(p).with_context(|| format!("loading {}", p.display()))?),
            (None, Some(g)) => Ok(generate_instance(&g.spec(cmd.seed))?),
            (None, None) => bail!("pass --instance or generator flags"),
        }
    };
    let points = if let Some(counts) = &cmd.spv_counts {
        sweep_spv_counts(&instance()?, &config, &counts.0)?
    } else if let Some(menu) = &cmd.willingness_menu {
        sweep_willingness(&instance()?, &config, menu)?
    } else if let Some(depots) = &cmd.depots {
        let Some(g) = &cmd.gen else {
            bail!("a depot sweep regenerates the instance; pass generator flags instead of --instance");
        };
        let mut pts = sweep_depot(&g.spec(cmd.seed), &config, depots)?;
        for (p, d) in pts.iter_mut().zip(depots) {
            p.row.point = format!("depot={}", depot_label(*d));
        }
        pts
    } else {
        sweep_origins(&instance()?, &config)?
    };
    for p in &points {
        check_valid(&p.instance, p)?;
        eprintln!("{}: total {:.4}, {} DVs, {:.2}s", p.row.point, p.row.total, p.row.dv_count, p.row.wall_seconds);
    }
    let rows: Vec<MetricsRow> = points.iter().map(|p| p.row.clone()).collect();
    write_metrics(output(cmd.metrics.as_deref())?, &rows)?;
    if let Some(path) = &cmd.histogram {
        let hists = points
            .iter()
            .map(|p| detour_histogram(&p.instance, &p.solution))
            .collect::<Result<Vec<_>, _>>()?;
        let labelled: Vec<_> = points.iter().map(|p| p.row.point.as_str()).zip(hists.iter()).collect();
        let f = File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_histogram(f, &labelled)?;
    }
    Ok(())
}

fn cmd_compare(instance: &Path, config: &DhConfig, metrics: Option<&Path>) -> anyhow::Result<()> {
    let inst = load_instance(instance).with_context(|| format!("loading {}", instance.display()))?;
    let mut dh = run_point("dh".into(), inst.clone(), config)?;
    check_valid(&inst, &dh)?;
    let start = Instant::now();
    let (solution, cost) = solve_exact_bruteforce(&inst, &OracleLimits::default())?;
    let mut exact = MetricsRow::new("oracle", inst.spvs.len(), &solution, start.elapsed().as_secs_f64());
    exact.feasible_spv_pct = dh.row.feasible_spv_pct;
    exact.gap = Some(0.0);
    dh.row.gap = Some(if cost == 0.0 { 0.0 } else { incumbent_gap(dh.row.total, cost) });
    write_metrics(output(metrics)?, &[dh.row, exact])?;
    Ok(())
}

fn report(err: &anyhow::Error) {
    eprintln!("error: {err:#}");
    if let Some(Error::InfeasiblePdos(ids)) = err.downcast_ref::<Error>() {
        for id in ids {
            eprintln!("  culprit: pdo {id}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Generate { gen, seed, output } => cmd_generate(gen, *seed, output),
        Command::Solve(cmd) => cmd_solve(cmd),
        Command::Sweep(cmd) => cmd_sweep(cmd),
        Command::Compare {
            instance,
            solver,
            seed,
            metrics,
        } => solver
            .config(*seed)
            .and_then(|c| cmd_compare(instance, &c, metrics.as_deref())),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:600:100").unwrap().0, vec![0, 100, 200, 300, 400, 500, 600]);
        assert_eq!(parse_range("2:4").unwrap().0, vec![2, 3, 4]);
        assert!(parse_range("5:1:1").is_err());
        assert!(parse_range("0:10:0").is_err());
    }

    #[test]
    fn depots() {
        assert_eq!(parse_depot("node:152688"), Ok(DepotPlacement::Node(152688)));
        assert_eq!(parse_depot("center"), Ok(DepotPlacement::Center));
        assert!(parse_depot("middle").is_err());
    }
}
