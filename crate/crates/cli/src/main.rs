use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use relay_bc::duality::{build_coupling, build_coupling_dpc, duality_check, min_power, CouplingSystem, Link};
use relay_bc::hull::Point;
use relay_bc::plot::{region_svg, Series};
use relay_bc::precoding::{single_pair_beamformer, BeamformerSet, EncodingOrder, Strategy};
use relay_bc::region::{hull_metrics, random_beam_region_with, sweep_region_with, RateRegion};
use relay_bc::scenario::{generate_channels, snr_from_db};
use relay_bc::sdp::{build_sdp, rank1_extract, sdp_region, sdp_solve, SdpStatus, SolveReport};
use relay_bc::{Error, Exec, Scenario};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_SOLVER: u8 = 4;

#[derive(Parser)]
#[command(name = "relay-bc", version, about = "Broadcast-phase strategies for multi-pair two-way relaying")]
struct Cli {
    /// Run sweeps on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Draw i.i.d. Gaussian channels and write a scenario file.
    GenScenario(GenArgs),
    /// Compute a rate region and write points, hull and plot.
    RateRegion(RegionArgs),
    /// Minimum power for fixed two-node beamformers, optionally with the SDP
    /// relaxation.
    PowerMin(PowerArgs),
    /// Coupled and per-set downlink/uplink power totals.
    DualityCheck(DualityArgs),
    /// Region boundary by SDP bisection over a grid of rate weights.
    SdpRegion(SdpRegionArgs),
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long, default_value_t = 2)]
    pairs: usize,
    #[arg(long, default_value_t = 2)]
    antennas: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Sets P with sigma2 = 1.
    #[arg(long, default_value_t = 10.0)]
    snr_db: f64,
    /// Rescale the two-pair channels to the reference norms.
    #[arg(long)]
    reference_norms: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum Beamformer {
    SinglePair,
    Random,
    SdpBisect,
}

impl fmt::Display for Beamformer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Beamformer::SinglePair => "single-pair",
            Beamformer::Random => "random",
            Beamformer::SdpBisect => "sdp-bisect",
        })
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum StrategyArg {
    Linear,
    Dpc,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Linear => Strategy::Linear,
            StrategyArg::Dpc => Strategy::Dpc,
        }
    }
}

#[derive(Args, Serialize)]
struct RegionArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's power: sigma2 = 1, P = 10^(snr/10).
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, value_enum, default_value = "dpc")]
    strategy: StrategyArg,
    /// Repeat to overlay several methods.
    #[arg(long = "beamformer", value_enum, default_values_t = [Beamformer::SinglePair])]
    beamformers: Vec<Beamformer>,
    /// Encoding order as 1-based pair labels, e.g. 2,1 (default: all orders).
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<usize>>,
    #[arg(long, default_value_t = 33)]
    t_grid: usize,
    #[arg(long, default_value_t = 33)]
    power_grid: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Seed of the random beams.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Rate-weight levels for SDP bisection.
    #[arg(long, default_value_t = 11)]
    weights: usize,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: PathBuf,
    /// Hull vertices as CSV; one file per method when several are given.
    #[arg(long)]
    hull_out: Option<PathBuf>,
    /// Additional SVG plot.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SdpRegionArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, value_enum, default_value = "dpc")]
    strategy: StrategyArg,
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<usize>>,
    #[arg(long, default_value_t = 11)]
    weights: usize,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    hull_out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct InstanceSource {
    /// Use the builtin two-pair instance with a nonzero duality gap.
    #[arg(long, conflicts_with = "instance")]
    builtin_counterexample: bool,
    /// Instance JSON with v1, v2, d1, d2, gamma1, gamma2, sigma2.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LinkArg {
    Downlink,
    Uplink,
}

#[derive(Args, Serialize)]
struct PowerArgs {
    #[command(flatten)]
    source: InstanceSource,
    /// Scenario for fixed two-node beamformers (with --targets).
    #[arg(long, conflicts_with_all = ["builtin_counterexample", "instance"])]
    scenario: Option<PathBuf>,
    #[arg(long)]
    snr_db: Option<f64>,
    /// SINR targets per node, pair by pair: g11,g12,g21,g22,...
    #[arg(long, value_delimiter = ',', requires = "scenario")]
    targets: Option<Vec<f64>>,
    /// Mixing weight of every pair's two-node beamformer.
    #[arg(long, default_value_t = 0.5)]
    t: f64,
    #[arg(long, value_enum, default_value = "linear")]
    strategy: StrategyArg,
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "downlink")]
    link: LinkArg,
    /// Also solve the semidefinite relaxation (scenario input only).
    #[arg(long, requires = "scenario")]
    sdp: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DualityArgs {
    #[command(flatten)]
    source: InstanceSource,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with a chosen exit code.
#[derive(Debug)]
struct Exit {
    code: u8,
    message: String,
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Exit>() {
            return e.code;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Divergent { .. } | Error::Infeasible(_) => EXIT_INFEASIBLE,
                Error::Numerical(_) => EXIT_SOLVER,
                _ => EXIT_INVALID,
            };
        }
    }
    EXIT_INVALID
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match run(&cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn config_json(command: &Command) -> String {
    let mut v = serde_json::to_value(command).expect("serializable arguments");
    v["version"] = json!(env!("CARGO_PKG_VERSION"));
    serde_json::to_string(&v).expect("json")
}

fn run(command: &Command, exec: Exec) -> anyhow::Result<()> {
    let config = config_json(command);
    match command {
        Command::GenScenario(a) => gen_scenario(a, &config),
        Command::RateRegion(a) => rate_region(a, exec, &config),
        Command::PowerMin(a) => power_min(a, &config),
        Command::DualityCheck(a) => duality(a, &config),
        Command::SdpRegion(a) => cmd_sdp_region(a, exec, &config),
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn with_config_comment(config: &str, body: &str) -> String {
    format!("# config: {config}\n{body}")
}

fn load_scenario(path: &Path, snr_db: Option<f64>) -> anyhow::Result<Scenario> {
    let s = Scenario::read_file(path).with_context(|| format!("reading scenario {}", path.display()))?;
    Ok(match snr_db {
        Some(db) => s.at_snr_db(db)?,
        None => s,
    })
}

fn parse_order(order: &Option<Vec<usize>>, n: usize) -> anyhow::Result<Option<EncodingOrder>> {
    let Some(o) = order else { return Ok(None) };
    if o.len() != n || o.iter().any(|&p| p == 0) {
        bail!(Exit {
            code: EXIT_INVALID,
            message: format!("--order must list the {n} pair labels 1..{n}"),
        });
    }
    Ok(Some(EncodingOrder::new(o.iter().map(|p| p - 1).collect())?))
}

fn gen_scenario(a: &GenArgs, config: &str) -> anyhow::Result<()> {
    let power = snr_from_db(a.snr_db);
    let s = if a.reference_norms {
        if a.pairs != 2 || a.antennas != 2 {
            bail!(Exit {
                code: EXIT_INVALID,
                message: "--reference-norms needs --pairs 2 --antennas 2".into()
            });
        }
        Scenario::reference_two_pair(a.seed, 1.0, power)?
    } else {
        generate_channels(a.pairs, a.antennas, 1.0, power, a.seed)?
    };
    let s = s.with_note(format!("config: {config}"));
    s.write_file(&a.out)?;
    println!("pair,node,norm_sq");
    for (i, n) in s.channel_norms_sq().iter().enumerate() {
        for (k, v) in n.iter().enumerate() {
            println!("{},{},{v}", i + 1, k + 1);
        }
    }
    Ok(())
}

fn compute_region(
    a: &RegionArgs,
    s: &Scenario,
    method: Beamformer,
    order: Option<&EncodingOrder>,
    exec: Exec,
) -> anyhow::Result<(RateRegion, Option<serde_json::Value>)> {
    let strategy: Strategy = a.strategy.into();
    Ok(match method {
        Beamformer::SinglePair => {
            let orders = order.map(|o| vec![o.clone()]);
            (sweep_region_with(exec, s, strategy, a.t_grid, a.power_grid, orders.as_deref())?, None)
        }
        Beamformer::Random => {
            if order.is_some() {
                bail!(Exit {
                    code: EXIT_INVALID,
                    message: "--order is not supported with random beams".into()
                });
            }
            (random_beam_region_with(exec, s, strategy, a.samples, a.power_grid, a.seed)?, None)
        }
        Beamformer::SdpBisect => {
            let (region, traces) = sdp_region(exec, s, strategy, order, a.weights, a.epsilon)?;
            (region, Some(serde_json::to_value(&traces)?))
        }
    })
}

fn hull_path(base: &Path, method: Beamformer, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("hull");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}.{method}.{ext}"))
}

fn region_json(
    config: &str,
    runs: &[(Beamformer, RateRegion, Option<serde_json::Value>)],
    metrics: Option<&relay_bc::region::RegionMetrics>,
) -> anyhow::Result<String> {
    let regions: Vec<serde_json::Value> = runs
        .iter()
        .map(|(m, r, trace)| {
            json!({
                "beamformer": m.to_string(),
                "meta": r.meta,
                "area": r.area(),
                "hull": r.hull,
                "points": r.points,
                "bisection": trace,
            })
        })
        .collect();
    let v = json!({
        "config": serde_json::from_str::<serde_json::Value>(config)?,
        "regions": regions,
        "metrics": metrics,
    });
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn svg_of(config: &str, runs: &[(Beamformer, RateRegion, Option<serde_json::Value>)]) -> String {
    let xy: Vec<Vec<Point>> = runs.iter().map(|(_, r, _)| r.points.iter().map(|p| p.xy()).collect()).collect();
    let labels: Vec<String> = runs
        .iter()
        .map(|(m, r, _)| format!("{} {}", r.meta.strategy.as_str(), m))
        .collect();
    let series: Vec<Series> = runs
        .iter()
        .enumerate()
        .map(|(n, (_, r, _))| Series { label: &labels[n], points: &xy[n], hull: &r.hull })
        .collect();
    region_svg(&series, &format!("config: {config}"))
}

fn rate_region(a: &RegionArgs, exec: Exec, config: &str) -> anyhow::Result<()> {
    if a.beamformers.is_empty() {
        bail!(Exit { code: EXIT_INVALID, message: "at least one --beamformer is required".into() });
    }
    let s = load_scenario(&a.scenario, a.snr_db)?;
    let order = parse_order(&a.order, s.n_pairs())?;
    let mut runs = Vec::new();
    for &m in &a.beamformers {
        let (region, trace) = compute_region(a, &s, m, order.as_ref(), exec)?;
        runs.push((m, region, trace));
    }
    let metrics = if runs.len() == 2 && s.n_pairs() == 2 {
        let m = hull_metrics(&runs[0].1.hull, &runs[1].1.hull);
        println!(
            "area_ratio ({} / {}) = {:.6}, areas {:.6} {:.6}",
            runs[0].0, runs[1].0, m.area_ratio, m.area_a, m.area_b
        );
        Some(m)
    } else {
        None
    };
    for (m, r, _) in &runs {
        println!("{m}: {} points, hull area {:.6}, max sum rate {:.6}", r.points.len(), r.area(), r.max_sum_rate());
    }

    let text = match a.format {
        Format::Csv => {
            let mut body = String::new();
            for (n, (_, r, _)) in runs.iter().enumerate() {
                let csv = r.to_csv();
                if n == 0 {
                    body.push_str(&csv);
                } else {
                    body.extend(csv.lines().skip(1).map(|l| format!("{l}\n")));
                }
            }
            with_config_comment(config, &body)
        }
        Format::Json => region_json(config, &runs, metrics.as_ref())?,
        Format::Svg => svg_of(config, &runs),
    };
    write(&a.out, &text)?;
    if let Some(h) = &a.hull_out {
        for (m, r, _) in &runs {
            write(&hull_path(h, *m, runs.len() > 1), &with_config_comment(config, &r.hull_csv()))?;
        }
    }
    if let Some(p) = &a.svg {
        write(p, &svg_of(config, &runs))?;
    }
    Ok(())
}

fn cmd_sdp_region(a: &SdpRegionArgs, exec: Exec, config: &str) -> anyhow::Result<()> {
    let s = load_scenario(&a.scenario, a.snr_db)?;
    let order = parse_order(&a.order, s.n_pairs())?;
    let (region, traces) = sdp_region(exec, &s, a.strategy.into(), order.as_ref(), a.weights, a.epsilon)?;
    let degenerate = traces.iter().filter(|t| t.degenerate).count();
    println!(
        "{} weights, {degenerate} degenerate, hull area {:.6}, max sum rate {:.6}",
        traces.len(),
        region.area(),
        region.max_sum_rate()
    );
    let runs = vec![(Beamformer::SdpBisect, region, Some(serde_json::to_value(&traces)?))];
    let text = match a.format {
        Format::Csv => with_config_comment(config, &runs[0].1.to_csv()),
        Format::Json => region_json(config, &runs, None)?,
        Format::Svg => svg_of(config, &runs),
    };
    write(&a.out, &text)?;
    if let Some(h) = &a.hull_out {
        write(h, &with_config_comment(config, &runs[0].1.hull_csv()))?;
    }
    Ok(())
}

fn load_instance(src: &InstanceSource) -> anyhow::Result<CouplingSystem> {
    if src.builtin_counterexample {
        return Ok(CouplingSystem::counterexample());
    }
    let Some(path) = &src.instance else {
        bail!(Exit {
            code: EXIT_INVALID,
            message: "pass --builtin-counterexample, --instance or --scenario".into()
        });
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(CouplingSystem::from_json(&text)?)
}

fn emit(out: &Option<PathBuf>, config: &str, mut report: serde_json::Value) -> anyhow::Result<()> {
    report["config"] = serde_json::from_str(config)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Writes an infeasibility report and returns the matching failure.
fn infeasible(out: &Option<PathBuf>, config: &str, certificate: serde_json::Value, message: String) -> anyhow::Result<()> {
    emit(out, config, json!({ "status": "infeasible", "certificate": certificate }))?;
    bail!(Exit { code: EXIT_INFEASIBLE, message })
}

fn divergence_certificate(e: &Error) -> Option<serde_json::Value> {
    match e {
        Error::Divergent { iterations, norm, growth_ratio } => Some(json!({
            "iterations": iterations,
            "norm": norm,
            "growth_ratio": growth_ratio,
        })),
        _ => None,
    }
}

fn power_min(a: &PowerArgs, config: &str) -> anyhow::Result<()> {
    let link = match a.link {
        LinkArg::Downlink => Link::Downlink,
        LinkArg::Uplink => Link::Uplink,
    };
    let mut report = json!({ "status": "optimal" });
    let sys = if let Some(path) = &a.scenario {
        let s = load_scenario(path, a.snr_db)?;
        let n = s.n_pairs();
        let Some(flat) = &a.targets else {
            bail!(Exit { code: EXIT_INVALID, message: "--scenario needs --targets".into() });
        };
        if flat.len() != 2 * n {
            bail!(Exit {
                code: EXIT_INVALID,
                message: format!("--targets needs {} values (two per pair), got {}", 2 * n, flat.len())
            });
        }
        let targets: Vec<[f64; 2]> = flat.chunks(2).map(|c| [c[0], c[1]]).collect();
        let strategy: Strategy = a.strategy.into();
        let order = parse_order(&a.order, n)?;
        let order = match (strategy, order) {
            (Strategy::Dpc, None) => Some(EncodingOrder::identity(n)),
            (_, o) => o,
        };
        let vectors = (0..n)
            .map(|i| single_pair_beamformer(s.channel(i, 0), s.channel(i, 1), a.t))
            .collect::<relay_bc::Result<Vec<_>>>()?;
        let beams = BeamformerSet::new(vectors, vec![a.t; n])?;
        if a.sdp {
            let problem = build_sdp(&s, &targets, strategy, order.as_ref())?;
            let sol = sdp_solve(&problem)?;
            match sol.status {
                SdpStatus::Infeasible => {
                    return infeasible(
                        &a.out,
                        config,
                        json!({ "phase1_margin": sol.phase1_margin }),
                        format!("SDP relaxation infeasible (phase-I margin {:e})", sol.phase1_margin),
                    );
                }
                SdpStatus::NumericalFailure => {
                    bail!(Exit {
                        code: EXIT_SOLVER,
                        message: format!(
                            "SDP solver did not converge after {} iterations; residuals {:?}",
                            sol.iterations, sol.residuals
                        ),
                    });
                }
                SdpStatus::Optimal => {
                    let r1 = rank1_extract(&problem, &sol)?;
                    report["sdp"] = serde_json::to_value(SolveReport::new(&problem, &sol))?;
                    report["sdp"]["raw_total"] = json!(r1.raw_total());
                    report["sdp"]["raw_shortfall"] = json!(r1.raw_shortfall);
                    report["sdp"]["repaired_shortfall"] = json!(r1.repaired_shortfall);
                    report["sdp"]["repair_error"] = json!(r1.repair_error);
                }
            }
        }
        match strategy {
            Strategy::Linear => build_coupling(&s, &beams, &targets)?,
            Strategy::Dpc => build_coupling_dpc(&s, &beams, &targets, order.as_ref().expect("order set"))?,
        }
    } else {
        load_instance(&a.source)?
    };
    match min_power(&sys, link, &[0, 1]) {
        Ok(r) => {
            report["fixed_beams"] = serde_json::to_value(&r)?;
            emit(&a.out, config, report)
        }
        Err(e) => match divergence_certificate(&e) {
            Some(cert) => infeasible(&a.out, config, cert, e.to_string()),
            None => Err(e.into()),
        },
    }
}

fn duality(a: &DualityArgs, config: &str) -> anyhow::Result<()> {
    let sys = load_instance(&a.source)?;
    match duality_check(&sys) {
        Ok(r) => emit(&a.out, config, serde_json::to_value(&r)?),
        Err(e) => match divergence_certificate(&e) {
            Some(cert) => infeasible(&a.out, config, cert, e.to_string()),
            None => Err(e.into()),
        },
    }
}
