use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use ramiflow_core::experiments::{lsc_experiment, property_suite, LscOptions, PlanSequence, SUITES};
use ramiflow_core::lagrangian::{cost_sides, default_schedule, good_paths, limit_cost, psa, ApproxOptions, PlanStructure};
use ramiflow_core::network::BranchId;
use ramiflow_core::optimizer::{optimize, OptimizeOptions};
use ramiflow_core::step::StepPiece;
use ramiflow_core::tree::{compute_weights_with, weighted_cost};
use ramiflow_core::{AtomicMeasure, BranchedNetwork, IrrigationPlan, LawSpec, PolylinePath, Quadrature, SolveMethod};

/// Weighted branched transport: weights, costs, path decompositions and optimal trees.
///
/// Inputs are JSON files. Set RAMIFLOW_THREADS to cap the number of worker threads.
#[derive(Parser)]
#[command(name = "ramiflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the weight ODE on every branch of a network.
    ///
    /// CSV columns: id, s, w (arc length from the branch start and the weight there).
    Weights {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        law: PathBuf,
        /// Sample points per constant piece of each branch.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[command(flatten)]
        solve: Solve,
        #[command(flatten)]
        output: Output,
    },
    /// Weighted cost of a network, or of a plan at a threshold.
    ///
    /// With --network: per-branch costs (CSV: id, cost, with a final "total" row).
    /// With --plan and --eps: both sides of the cost identity (CSV: eps, branch_sum, particle_integral).
    /// With --plan alone: the ε → 0 limit over eps = M/2, M/4, ... (CSV: eps, cost).
    Cost {
        #[arg(long, required_unless_present = "plan", conflicts_with = "plan")]
        network: Option<PathBuf>,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        law: PathBuf,
        #[arg(long, requires = "plan")]
        eps: Option<f64>,
        /// Path comparison tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        solve: Solve,
        #[command(flatten)]
        output: Output,
    },
    /// Split the ε-good part of a plan into elementary paths and write it as a network.
    ///
    /// CSV columns: id, parent, source, start, end.
    Psa {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Maximal ε-good paths of a plan.
    ///
    /// CSV columns: index, length, mass, members (space separated group indices).
    GoodPaths {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Multiplicity profiles of a plan's groups.
    ///
    /// CSV columns: group, s_from, value.
    Multiplicity {
        #[arg(long)]
        plan: PathBuf,
        /// Only this group.
        #[arg(long)]
        group: Option<usize>,
        /// Also report m(g, t).
        #[arg(long)]
        t: Option<f64>,
        /// Also report the stopping time at this threshold.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Cheapest tree from the origin to an atomic measure of at most six atoms.
    ///
    /// The best network is written as JSON to --out (stdout if absent).
    /// The per-topology table is written as CSV to --table, or to stdout when --out is given.
    /// Table columns: index, description, cost, iterations, converged.
    Optimize {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        law: PathBuf,
        /// Geometric descent stops once its step is below this.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Starting configurations per topology.
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Cost along a built-in plan sequence against the cost of its limit.
    ///
    /// CSV columns: n, cost, delta (Fréchet distance to the limit).
    /// Exits 1 if the limit cost exceeds the liminf estimate by more than --slack.
    Lsc {
        /// One of collapsing-v, zigzag, shortened, late-split, constant.
        #[arg(long)]
        sequence: String,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long)]
        law: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        slack: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Full report as JSON, written alongside the CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        solve: Solve,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Randomized property suites. Exits 1 if any instance violates its property.
    ///
    /// CSV columns: name, instances, failures.
    Suites {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances per suite.
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Run only these suites (repeatable).
        #[arg(long)]
        suite: Vec<String>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Solve {
    /// Use fixed-step RK4 with this step instead of the closed form.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, value_enum, default_value_t = Quad::Closed)]
    quad: Quad,
}

#[derive(Args)]
struct Output {
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Quad {
    Closed,
    Simpson,
}

enum Failure {
    /// Bad input; exit code 2.
    Invalid(String),
    /// Failed self-check or I/O on output; exit code 1.
    Internal(String),
}

impl From<ramiflow_core::Error> for Failure {
    fn from(e: ramiflow_core::Error) -> Self {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

type Outcome<T> = Result<T, Failure>;

impl Solve {
    fn method(&self) -> Outcome<SolveMethod> {
        match self.step {
            None => Ok(SolveMethod::ClosedForm),
            Some(h) if h > 0.0 && h.is_finite() => Ok(SolveMethod::Rk4 { step: Some(h) }),
            Some(h) => Err(Failure::Invalid(format!("--step {h} must be positive"))),
        }
    }

    fn quadrature(&self) -> Quadrature {
        match self.quad {
            Quad::Closed => Quadrature::ClosedForm,
            Quad::Simpson => Quadrature::Simpson {
                tol: ramiflow_core::quadrature::DEFAULT_SIMPSON_TOL,
            },
        }
    }

    fn approx(&self, tol: f64) -> Outcome<ApproxOptions> {
        Ok(ApproxOptions {
            tol: positive("--tol", tol)?,
            method: self.method()?,
            quad: self.quadrature(),
        })
    }
}

fn positive(flag: &str, x: f64) -> Outcome<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Failure::Invalid(format!("{flag} {x} must be positive")))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn sink(out: Option<&Path>) -> Outcome<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(fs::File::create(p).map_err(|e| Failure::Internal(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Outcome<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Internal(e.to_string()))?;
    writeln!(w).map_err(|e| Failure::Internal(e.to_string()))
}

fn write_csv<T: Serialize>(out: Option<&Path>, rows: impl IntoIterator<Item = T>) -> Outcome<()> {
    write_rows(out, None, rows)
}

/// For tuple rows, which carry no field names.
fn write_table<T: Serialize>(out: Option<&Path>, header: &[&str], rows: impl IntoIterator<Item = T>) -> Outcome<()> {
    write_rows(out, Some(header), rows)
}

fn write_rows<T: Serialize>(
    out: Option<&Path>,
    header: Option<&[&str]>,
    rows: impl IntoIterator<Item = T>,
) -> Outcome<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_writer(sink(out)?);
    if let Some(h) = header {
        w.write_record(h).map_err(|e| Failure::Internal(e.to_string()))?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| Failure::Internal(e.to_string()))?;
    }
    w.flush().map_err(|e| Failure::Internal(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BranchWeights {
    id: BranchId,
    initial: f64,
    terminal: f64,
    samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GoodPathOut {
    vertices: PolylinePath,
    multiplicity: Vec<StepPiece>,
    member_groups: Vec<usize>,
    representative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GroupProfile {
    group: usize,
    length: f64,
    profile: Vec<StepPiece>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value_at_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stopping_time: Option<f64>,
}

#[derive(Serialize)]
struct PieceRow {
    id: BranchId,
    parent: Option<BranchId>,
    source: usize,
    start: f64,
    end: f64,
}

fn weights(network: &Path, law: &Path, samples: usize, solve: &Solve, output: &Output) -> Outcome<()> {
    let net: BranchedNetwork = read_json(network)?;
    let law: LawSpec = read_json(law)?;
    let w = compute_weights_with(&net, &law.f, solve.method()?)?;
    let rows: Vec<BranchWeights> = w
        .iter()
        .map(|(&id, p)| BranchWeights {
            id,
            initial: p.initial(),
            terminal: p.terminal(),
            samples: p.sample(samples.max(1)),
        })
        .collect();
    match output.format {
        Format::Json => write_json(output.out.as_deref(), &rows),
        Format::Csv => write_table(
            output.out.as_deref(),
            &["id", "s", "w"],
            rows.iter().flat_map(|b| b.samples.iter().map(move |&(s, w)| (b.id, s, w))),
        ),
    }
}

#[derive(Serialize)]
struct CostRow {
    id: String,
    cost: f64,
}

fn cost(
    network: Option<&Path>,
    plan: Option<&Path>,
    law: &Path,
    eps: Option<f64>,
    tol: f64,
    solve: &Solve,
    output: &Output,
) -> Outcome<()> {
    let law: LawSpec = read_json(law)?;
    let out = output.out.as_deref();
    if let Some(network) = network {
        let net: BranchedNetwork = read_json(network)?;
        let w = compute_weights_with(&net, &law.f, solve.method()?)?;
        let report = weighted_cost(&net, &w, &law, solve.quadrature())?;
        eprintln!("total cost {}", report.total);
        return match output.format {
            Format::Json => write_json(out, &report),
            Format::Csv => write_csv(
                out,
                report
                    .per_branch
                    .iter()
                    .map(|c| CostRow { id: c.id.to_string(), cost: c.cost })
                    .chain([CostRow { id: "total".into(), cost: report.total }]),
            ),
        };
    }
    let plan: IrrigationPlan = read_json(plan.expect("clap requires --network or --plan"))?;
    let opts = solve.approx(tol)?;
    match eps {
        Some(eps) => {
            let sides = cost_sides(&plan, positive("--eps", eps)?, &law, &opts)?;
            eprintln!("approximate cost {}", sides.branch_sum);
            match output.format {
                Format::Json => write_json(out, &sides),
                Format::Csv => write_table(
                    out,
                    &["eps", "branch_sum", "particle_integral"],
                    [(eps, sides.branch_sum, sides.particle_integral)],
                ),
            }
        }
        None => {
            let outcome = limit_cost(&plan, &law, &default_schedule(plan.total_mass(), 60), &opts)?;
            match outcome.value() {
                Some(v) => eprintln!("limit cost {v}"),
                None => eprintln!("eps schedule ended before every group was good"),
            }
            match output.format {
                Format::Json => write_json(out, &outcome),
                Format::Csv => write_csv(out, outcome.sequence().iter().copied()),
            }
        }
    }
}

fn psa_cmd(plan: &Path, eps: f64, tol: f64, output: &Output) -> Outcome<()> {
    let plan: IrrigationPlan = read_json(plan)?;
    let tol = positive("--tol", tol)?;
    let goods = good_paths(&plan, positive("--eps", eps)?, tol)?;
    let dec = psa(&goods, tol)?;
    match output.format {
        Format::Json => write_json(output.out.as_deref(), &dec.to_network()?),
        Format::Csv => write_csv(
            output.out.as_deref(),
            dec.paths.iter().map(|p| PieceRow {
                id: p.id,
                parent: p.parent,
                source: p.source,
                start: p.start,
                end: p.end,
            }),
        ),
    }
}

fn good_paths_cmd(plan: &Path, eps: f64, tol: f64, output: &Output) -> Outcome<()> {
    let plan: IrrigationPlan = read_json(plan)?;
    let goods = good_paths(&plan, positive("--eps", eps)?, positive("--tol", tol)?)?;
    match output.format {
        Format::Json => {
            let rows: Vec<GoodPathOut> = goods
                .iter()
                .map(|g| GoodPathOut {
                    vertices: g.geometry.clone(),
                    multiplicity: g.multiplicity.to_pieces(),
                    member_groups: g.member_groups.clone(),
                    representative: g.representative,
                })
                .collect();
            write_json(output.out.as_deref(), &rows)
        }
        Format::Csv => write_table(
            output.out.as_deref(),
            &["index", "length", "mass", "members"],
            goods.iter().enumerate().map(|(i, g)| {
                let members: Vec<String> = g.member_groups.iter().map(usize::to_string).collect();
                (i, g.length(), g.multiplicity.initial(), members.join(" "))
            }),
        ),
    }
}

fn multiplicity_cmd(
    plan: &Path,
    group: Option<usize>,
    t: Option<f64>,
    eps: Option<f64>,
    tol: f64,
    output: &Output,
) -> Outcome<()> {
    let plan: IrrigationPlan = read_json(plan)?;
    let s = PlanStructure::new(&plan, positive("--tol", tol)?);
    let groups: Vec<usize> = match group {
        Some(g) => vec![g],
        None => (0..plan.len()).collect(),
    };
    let rows = groups
        .into_iter()
        .map(|g| {
            plan.group(g)?;
            Ok(GroupProfile {
                group: g,
                length: s.path_length(g),
                profile: s.profile(g)?.to_pieces(),
                value_at_t: t.map(|t| s.multiplicity(g, t)).transpose()?,
                stopping_time: eps.map(|e| s.stopping_time(g, positive("--eps", e)?).map_err(Failure::from)).transpose()?,
            })
        })
        .collect::<Outcome<Vec<_>>>()?;
    match output.format {
        Format::Json => write_json(output.out.as_deref(), &rows),
        Format::Csv => write_table(
            output.out.as_deref(),
            &["group", "s_from", "value"],
            rows.iter().flat_map(|r| r.profile.iter().map(move |p| (r.group, p.s_from, p.value))),
        ),
    }
}

#[allow(clippy::too_many_arguments)]
fn optimize_cmd(
    measure: &Path,
    law: &Path,
    tol: f64,
    seed: u64,
    restarts: usize,
    out: Option<&Path>,
    table: Option<&Path>,
) -> Outcome<()> {
    let mu: AtomicMeasure = read_json(measure)?;
    let law: LawSpec = read_json(law)?;
    let opts = OptimizeOptions {
        tol,
        seed,
        restarts,
        ..Default::default()
    };
    let r = optimize(&mu, &law, &opts)?;
    eprintln!("best topology {} cost {}", r.table[r.best].description, r.cost);
    write_json(out, &r.network)?;
    if table.is_some() || out.is_some() {
        write_csv(table, &r.table)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn lsc_cmd(
    sequence: &str,
    n: usize,
    law: &Path,
    slack: f64,
    tol: f64,
    summary: Option<&Path>,
    solve: &Solve,
    out: Option<&Path>,
    format: Format,
) -> Outcome<()> {
    let law: LawSpec = read_json(law)?;
    let seq = PlanSequence::builtin(sequence)?;
    let opts = LscOptions {
        n_max: n,
        slack,
        approx: solve.approx(tol)?,
        ..Default::default()
    };
    let report = lsc_experiment(&seq, &law, &opts)?;
    match format {
        Format::Json => write_json(out, &report)?,
        Format::Csv => write_csv(out, &report.rows)?,
    }
    if let Some(p) = summary {
        write_json(Some(p), &report)?;
    }
    eprintln!(
        "limit cost {} liminf {} (tail min {}): {}",
        report.limit_cost,
        report.liminf,
        report.tail_min,
        if report.holds { "holds" } else { "violated" }
    );
    if report.holds {
        Ok(())
    } else {
        Err(Failure::Internal(format!(
            "limit cost {} exceeds liminf {} by more than {}",
            report.limit_cost, report.liminf, slack
        )))
    }
}

fn suites_cmd(seed: u64, count: usize, names: &[String], output: &Output) -> Outcome<()> {
    let names: Vec<&str> = if names.is_empty() {
        SUITES.to_vec()
    } else {
        names.iter().map(String::as_str).collect()
    };
    for n in &names {
        if !SUITES.contains(n) {
            return Err(Failure::Invalid(format!(
                "unknown suite {n:?}; expected one of {}",
                SUITES.join(", ")
            )));
        }
    }
    let outcomes: Vec<_> = names
        .iter()
        .map(|n| property_suite(n, seed, count).expect("name checked"))
        .collect();
    let report = ramiflow_core::experiments::SuiteReport {
        seed,
        count,
        suites: outcomes,
    };
    match output.format {
        Format::Json => write_json(output.out.as_deref(), &report)?,
        Format::Csv => write_table(
            output.out.as_deref(),
            &["name", "instances", "failures"],
            report.suites.iter().map(|s| (&s.name, s.instances, s.failures)),
        )?,
    }
    let failed: Vec<&str> = report
        .suites
        .iter()
        .filter(|s| !s.passed())
        .map(|s| s.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Internal(format!("property violated in suites: {}", failed.join(", "))))
    }
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Weights {
            network,
            law,
            samples,
            solve,
            output,
        } => weights(&network, &law, samples, &solve, &output),
        Command::Cost {
            network,
            plan,
            law,
            eps,
            tol,
            solve,
            output,
        } => cost(network.as_deref(), plan.as_deref(), &law, eps, tol, &solve, &output),
        Command::Psa { plan, eps, tol, output } => psa_cmd(&plan, eps, tol, &output),
        Command::GoodPaths { plan, eps, tol, output } => good_paths_cmd(&plan, eps, tol, &output),
        Command::Multiplicity {
            plan,
            group,
            t,
            eps,
            tol,
            output,
        } => multiplicity_cmd(&plan, group, t, eps, tol, &output),
        Command::Optimize {
            measure,
            law,
            tol,
            seed,
            restarts,
            out,
            table,
        } => optimize_cmd(&measure, &law, tol, seed, restarts, out.as_deref(), table.as_deref()),
        Command::Lsc {
            sequence,
            n,
            law,
            slack,
            tol,
            summary,
            solve,
            out,
            format,
        } => lsc_cmd(&sequence, n, &law, slack, tol, summary.as_deref(), &solve, out.as_deref(), format),
        Command::Suites {
            seed,
            count,
            suite,
            output,
        } => suites_cmd(seed, count, &suite, &output),
    }
}

fn init_threads() -> Outcome<()> {
    let Ok(v) = std::env::var("RAMIFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Invalid(format!("RAMIFLOW_THREADS={v:?} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Internal(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
