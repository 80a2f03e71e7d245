use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use convio::autotune::{
    exhaustive_oracle, run_tuner, ConfigSpace, ExploreParams, HistoryRow, Measurement, TuneParams,
    ORACLE_CAP,
};
use convio::bounds::{exact_bound_for_dag, lower_bound_dc, lower_bound_wa, BoundReport, Exact};
use convio::dag::{
    build_direct_conv_dag, build_winograd_dag, direct_vertex_count, parse_dag,
    validate_multi_step_partition, winograd_vertex_count, BuildOptions, Dag, VertexKind,
};
use convio::dataflow::{
    analytic_dc_io, analytic_wa_io, optimal_tile_dc, optimal_tile_wa, plan_direct_dataflow,
    plan_winograd_dataflow, simulate, stage_trace, IoVolume, Layout, SimReport, TileConfig,
};
use convio::pebble::{check_hong_kung, corpus};
use convio::{Algorithm, ConvShape, HwModel, Surd};
use serde::{Deserialize, Serialize};

use crate::config::{parse_dims, usage, RunConfig};

/// Print `value` as pretty JSON and copy it to `path` if given.
pub fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::io::stdout().write_all(text.as_bytes())?;
    if let Some(p) = path {
        fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn bound(shape: &ConvShape, alg: &Algorithm, s: u64) -> convio::Result<BoundReport> {
    match alg {
        Algorithm::Direct => lower_bound_dc(shape, s),
        Algorithm::Winograd(p) => lower_bound_wa(shape, p, s),
    }
}

pub fn lower_bound(cfg: &RunConfig) -> anyhow::Result<()> {
    let shape = cfg.shape()?;
    let alg = cfg.algorithm(&shape)?;
    let s = cfg.hardware.s.ok_or_else(|| usage("missing --s"))?;
    emit(&bound(&shape, &alg, s)?, cfg.output.json.as_deref())
}

#[derive(Serialize)]
struct DagStats {
    algorithm: String,
    inputs: u64,
    internal: u64,
    outputs: u64,
    edges: u64,
    steps: u8,
    computed: u64,
    formula: u64,
    #[serde(rename = "match")]
    matches: &'static str,
    partition_valid: bool,
}

pub fn dag_stats(cfg: &RunConfig, cap: u64) -> anyhow::Result<()> {
    let shape = cfg.shape()?;
    let alg = cfg.algorithm(&shape)?;
    let opts = BuildOptions {
        vertex_cap: cap,
        labels: false,
        ..Default::default()
    };
    let (dag, formula) = match &alg {
        Algorithm::Direct => (
            build_direct_conv_dag(&shape, &opts)?,
            direct_vertex_count(&shape),
        ),
        Algorithm::Winograd(p) => (
            build_winograd_dag(&shape, p, &opts)?,
            winograd_vertex_count(&shape, p),
        ),
    };
    let count = |k| dag.count_vertices(&[k]);
    let computed = count(VertexKind::Internal) + count(VertexKind::Output);
    let stats = DagStats {
        algorithm: alg.name().into(),
        inputs: count(VertexKind::Input),
        internal: count(VertexKind::Internal),
        outputs: count(VertexKind::Output),
        edges: dag.edge_count() as u64,
        steps: dag.n_steps(),
        computed,
        formula,
        matches: if computed == formula { "yes" } else { "no" },
        partition_valid: validate_multi_step_partition(&dag).is_ok(),
    };
    emit(&stats, cfg.output.json.as_deref())
}

#[derive(Serialize)]
struct PebbleReport {
    dag: String,
    vertices: usize,
    s: usize,
    q_min: u64,
    p_2s: usize,
    hong_kung_bound: u64,
    holds: bool,
    exact_bound: Option<Exact>,
}

pub fn list_fixtures() -> anyhow::Result<()> {
    let names: Vec<&str> = corpus::FIXTURES.iter().map(|f| f.0).collect();
    emit(&names, None)
}

pub fn pebble(
    cfg: &RunConfig,
    fixture: Option<&str>,
    dag_file: Option<&Path>,
    s: usize,
) -> anyhow::Result<()> {
    let (name, dag): (String, Dag) = match (fixture, dag_file) {
        (Some(n), None) => {
            let d = corpus::fixture(n).ok_or_else(|| usage(format!("unknown fixture {n:?}")))??;
            (n.to_string(), d)
        }
        (None, Some(p)) => {
            let text = fs::read_to_string(p)
                .map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            (p.display().to_string(), parse_dag(&text)?)
        }
        _ => return Err(usage("give exactly one of --fixture or --dag")),
    };
    let hk = check_hong_kung(&dag, s)?;
    let report = PebbleReport {
        dag: name,
        vertices: dag.len(),
        s,
        q_min: hk.q_min,
        p_2s: hk.p_2s,
        hong_kung_bound: s as u64 * (hk.p_2s as u64).saturating_sub(1),
        holds: hk.holds,
        exact_bound: exact_bound_for_dag(&dag, s as u64).ok().map(Exact),
    };
    emit(&report, cfg.output.json.as_deref())
}

/// Tile flags of `simulate`.
pub struct TileArgs<'a> {
    pub tile: Option<&'a str>,
    pub threads: Option<&'a str>,
    pub layout: Option<Layout>,
    pub shared_kernel: bool,
}

#[derive(Serialize)]
struct SimulateReport {
    algorithm: String,
    tile: TileConfig,
    shared_kernel: bool,
    simulated: SimReport,
    analytic: IoVolume,
    lower_bound: Exact,
    omega: Exact,
    ratio_to_bound: Option<f64>,
}

fn resolve_tile(
    shape: &ConvShape,
    alg: &Algorithm,
    hw: &HwModel,
    args: &TileArgs,
) -> anyhow::Result<TileConfig> {
    let mut t = match args.tile {
        None => match alg {
            Algorithm::Direct => optimal_tile_dc(shape, hw)?,
            Algorithm::Winograd(p) => optimal_tile_wa(shape, p, hw)?,
        },
        Some(spec) => {
            let [x, y, z] = parse_dims::<3>(spec, "--tile")?;
            let mut t = TileConfig::new(x, y, z, hw.per_processor());
            if let Algorithm::Winograd(p) = alg {
                t.e = Some(p.e);
            }
            t
        }
    };
    if let Some(th) = args.threads {
        let [a, b, c] = parse_dims::<3>(th, "--threads")?;
        (t.n_xt, t.n_yt, t.n_zt) = (a, b, c);
    }
    if let Some(l) = args.layout {
        t.layout = l;
    }
    Ok(t)
}

fn run_simulation(
    shape: &ConvShape,
    alg: &Algorithm,
    hw: &HwModel,
    tile: &TileConfig,
    shared: bool,
) -> anyhow::Result<(convio::dataflow::Schedule, SimReport, IoVolume)> {
    let (sched, io) = match alg {
        Algorithm::Direct => (
            plan_direct_dataflow(shape, hw, tile)?,
            analytic_dc_io(shape, hw, tile),
        ),
        Algorithm::Winograd(p) => (
            plan_winograd_dataflow(shape, p, hw, tile, shared)?,
            analytic_wa_io(shape, p, hw, tile, shared),
        ),
    };
    let rep = simulate(&sched, hw)?;
    Ok((sched, rep, io))
}

fn ratio(q: u64, b: &Surd) -> Option<f64> {
    (*b > Surd::zero()).then(|| q as f64 / b.to_f64())
}

pub fn simulate_cmd(cfg: &RunConfig, args: &TileArgs) -> anyhow::Result<()> {
    let shape = cfg.shape()?;
    let alg = cfg.algorithm(&shape)?;
    let hw = cfg.hw()?;
    let tile = resolve_tile(&shape, &alg, &hw, args)?;
    let shared = args.shared_kernel && matches!(alg, Algorithm::Winograd(_));
    let (sched, rep, io) = run_simulation(&shape, &alg, &hw, &tile, shared)?;
    let lb = bound(&shape, &alg, hw.s)?;
    if let Some(path) = &cfg.output.csv {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        for row in stage_trace(&sched) {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    let report = SimulateReport {
        algorithm: alg.name().into(),
        tile,
        shared_kernel: shared,
        simulated: rep,
        analytic: io,
        ratio_to_bound: ratio(rep.q_total, &lb.q_lower.0),
        lower_bound: lb.q_lower,
        omega: lb.omega,
    };
    emit(&report, cfg.output.json.as_deref())
}

/// One tuning-history CSV row; also the resume format.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    iteration: u64,
    x: u32,
    y: u32,
    z: u32,
    s_b: u64,
    n_xt: u32,
    n_yt: u32,
    n_zt: u32,
    layout: Layout,
    e: Option<u32>,
    predicted: Option<f64>,
    measured: f64,
    best_so_far: f64,
}

impl From<&HistoryRow> for CsvRow {
    fn from(h: &HistoryRow) -> Self {
        let c = &h.config;
        CsvRow {
            iteration: h.iteration,
            x: c.x,
            y: c.y,
            z: c.z,
            s_b: c.s_b,
            n_xt: c.n_xt,
            n_yt: c.n_yt,
            n_zt: c.n_zt,
            layout: c.layout,
            e: c.e,
            predicted: h.predicted,
            measured: h.measured,
            best_so_far: h.best_so_far,
        }
    }
}

impl CsvRow {
    fn measurement(&self) -> Measurement {
        Measurement {
            config: TileConfig {
                x: self.x,
                y: self.y,
                z: self.z,
                s_b: self.s_b,
                n_xt: self.n_xt,
                n_yt: self.n_yt,
                n_zt: self.n_zt,
                layout: self.layout,
                e: self.e,
            },
            cost: self.measured,
            iteration: self.iteration,
        }
    }
}

fn read_history(path: &Path) -> anyhow::Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<CsvRow>, _>>()
        .map_err(|e| usage(format!("bad history file {}: {e}", path.display())))
}

#[derive(Serialize)]
struct BestConfig {
    config: TileConfig,
    cost: f64,
}

#[derive(Serialize)]
struct TuneSummary {
    algorithm: String,
    space_size: u64,
    budget: usize,
    measured: usize,
    resumed_from: usize,
    iterations: u64,
    stop: convio::autotune::StopReason,
    threshold_met: usize,
    best: Option<BestConfig>,
    oracle: Option<BestConfig>,
}

pub struct TuneArgs<'a> {
    pub layouts: &'a [Layout],
    pub resume: Option<&'a Path>,
    pub oracle: bool,
}

pub fn tune_cmd(cfg: &RunConfig, args: &TuneArgs) -> anyhow::Result<()> {
    let shape = cfg.shape()?;
    let alg = cfg.algorithm(&shape)?;
    let hw = cfg.hw()?;
    let mut space = ConfigSpace::build(&shape, &hw, alg)?;
    if !args.layouts.is_empty() {
        space = space.with_layouts(args.layouts)?;
    }
    let defaults = TuneParams::default();
    let params = TuneParams {
        budget: cfg.tuner.budget.unwrap_or(defaults.budget),
        patience: cfg.tuner.patience.unwrap_or(defaults.patience),
        seed: cfg.seed(),
        explore: ExploreParams {
            n_s: cfg.tuner.ns.unwrap_or(defaults.explore.n_s),
            ..defaults.explore
        },
        ..defaults
    };
    if params.budget < params.explore.n_s {
        return Err(usage(format!(
            "--budget {} is smaller than --ns {}",
            params.budget, params.explore.n_s
        )));
    }
    let prior_rows = match args.resume {
        Some(p) => read_history(p)?,
        None => Vec::new(),
    };
    let prior: Vec<Measurement> = prior_rows.iter().map(CsvRow::measurement).collect();
    if let Some(bad) = prior.iter().find(|m| !space.contains(&m.config)) {
        return Err(usage(format!(
            "resumed configuration {} is not in this space",
            bad.config
        )));
    }
    let session = run_tuner(&space, &params, &prior)?;
    if let Some(path) = &cfg.output.csv {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        for row in &prior_rows {
            w.serialize(row)?;
        }
        for h in &session.history {
            w.serialize(CsvRow::from(h))?;
        }
        w.flush()?;
    }
    let best = session.best.map(|m| BestConfig {
        config: m.config,
        cost: m.cost,
    });
    if let (Some(path), Some(b)) = (&cfg.output.best, &best) {
        fs::write(path, serde_json::to_string_pretty(b)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let size = space.cardinality();
    let oracle = if args.oracle {
        if size > ORACLE_CAP {
            return Err(convio::Error::Size {
                what: "configuration space".into(),
                count: size,
                cap: ORACLE_CAP,
            }
            .into());
        }
        let (config, cost) = exhaustive_oracle(&space)?;
        Some(BestConfig { config, cost })
    } else {
        None
    };
    let summary = TuneSummary {
        algorithm: alg.name().into(),
        space_size: size,
        budget: params.budget,
        measured: session.history.len(),
        resumed_from: prior.len(),
        iterations: session.iterations,
        stop: session.stop,
        threshold_met: session
            .explore_log
            .iter()
            .filter(|l| l.threshold_met)
            .count(),
        best,
        oracle,
    };
    emit(&summary, cfg.output.json.as_deref())
}

#[derive(Serialize)]
struct SpaceStats {
    constrained: u64,
    unconstrained: u64,
    ratio: f64,
}

#[derive(Serialize)]
struct Report {
    algorithm: String,
    shape: ConvShape,
    hw: HwModel,
    bound: BoundReport,
    optimal_tile: TileConfig,
    simulated: SimReport,
    analytic: IoVolume,
    ratio_to_bound: Option<f64>,
    ratio_to_omega: Option<f64>,
    space: Option<SpaceStats>,
}

pub fn report(cfg: &RunConfig) -> anyhow::Result<()> {
    let shape = cfg.shape()?;
    let alg = cfg.algorithm(&shape)?;
    let hw = cfg.hw()?;
    let bound = bound(&shape, &alg, hw.s)?;
    let args = TileArgs {
        tile: None,
        threads: None,
        layout: None,
        shared_kernel: true,
    };
    let tile = resolve_tile(&shape, &alg, &hw, &args)?;
    let shared = matches!(alg, Algorithm::Winograd(_));
    let (_, rep, io) = run_simulation(&shape, &alg, &hw, &tile, shared)?;
    let space = match (
        ConfigSpace::build(&shape, &hw, alg),
        ConfigSpace::unconstrained(&shape, &hw, alg),
    ) {
        (Ok(c), Ok(u)) => {
            let (c, u) = (c.cardinality(), u.cardinality());
            Some(SpaceStats {
                constrained: c,
                unconstrained: u,
                ratio: c as f64 / u as f64,
            })
        }
        _ => None,
    };
    let report = Report {
        algorithm: alg.name().into(),
        shape,
        hw,
        ratio_to_bound: ratio(rep.q_total, &bound.q_lower.0),
        ratio_to_omega: ratio(rep.q_total, &bound.omega.0),
        bound,
        optimal_tile: tile,
        simulated: rep,
        analytic: io,
        space,
    };
    emit(&report, cfg.output.json.as_deref())
}
