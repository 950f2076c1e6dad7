mod manifest;
mod serve;

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use navbench::analysis::{self, DistanceKind};
use navbench::harness::{self, AgentConfig, EvalRecord};
use navbench::humanlab::{Criterion, Lab, QuestionPool, SystemClock};
use navbench::render::{RenderOptions, Renderer};
use navbench::taskgen::{self, Order, Relation, Setting, SuiteSpec, TaskInstance, TaskSpec, Vocabulary};
use navbench::topology::Topology;
use navbench::{jsonl, Error};
use serde_json::json;

use manifest::RunManifest;

/// Error printed as `error[CODE]: message` on a single line.
#[derive(Debug)]
pub struct CliError {
    code: &'static str,
    message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    fn usage(message: impl Into<String>) -> Self {
        CliError::new("E_USAGE", message)
    }

    fn exit_code(&self) -> u8 {
        if self.code == "E_USAGE" {
            2
        } else {
            1
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: e.code(), message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "navbench", version, about = "Spatial-navigation prompts for language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate task instances as JSON lines.
    Generate(GenerateArgs),
    /// Run an agent over an instance file.
    Run(RunArgs),
    /// Error analysis and scoring tables.
    Analyze(AnalyzeArgs),
    /// Write the human-baseline question pool.
    Pool(PoolArgs),
    /// Serve the human-baseline session API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Square,
    Rhombus,
    Hexagon,
    Triangle,
    Ring,
    Tree,
    /// Rectangle size inference.
    Size,
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingArg {
    Local,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    RowMajor,
    Snake,
    Random,
    SnakeCoord,
    RingClockwise,
    TreeDfs,
    TreeBfs,
}

impl From<OrderArg> for Order {
    fn from(o: OrderArg) -> Order {
        match o {
            OrderArg::RowMajor => Order::RowMajor,
            OrderArg::Snake => Order::Snake,
            OrderArg::Random => Order::Random,
            OrderArg::SnakeCoord => Order::SnakeCoord,
            OrderArg::RingClockwise => Order::RingClockwise,
            OrderArg::TreeDfs => Order::TreeDfs,
            OrderArg::TreeBfs => Order::TreeBfs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RelationArg {
    Cousin,
    GreatGreatGrandparent,
    GreatGreatGrandchildren,
}

impl From<RelationArg> for Relation {
    fn from(r: RelationArg) -> Relation {
        match r {
            RelationArg::Cousin => Relation::Cousin,
            RelationArg::GreatGreatGrandparent => Relation::GreatGreatGrandparent,
            RelationArg::GreatGreatGrandchildren => Relation::GreatGreatGrandchildren,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML suite file (`task`, `count`, `seed`, `render`); replaces the task flags.
    #[arg(long, conflicts_with_all = ["topology", "count", "seed"])]
    config: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "config")]
    topology: Option<TopologyArg>,
    /// Grid rows, or rectangle height for size inference.
    #[arg(long)]
    rows: Option<u32>,
    /// Grid columns, or rectangle width for size inference.
    #[arg(long)]
    cols: Option<u32>,
    /// Side length of hexagon and triangle maps.
    #[arg(long)]
    size: Option<u32>,
    /// Ring or tree node count.
    #[arg(long)]
    nodes: Option<u32>,
    #[arg(long, value_enum)]
    setting: Option<SettingArg>,
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    #[arg(long, value_enum)]
    relation: Option<RelationArg>,
    #[arg(long, default_value_t = 8)]
    steps: u32,
    /// Label every cell of a size-inference rectangle.
    #[arg(long)]
    with_items: bool,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Add the structure description to hexagon and triangle prompts.
    #[arg(long)]
    detailed: bool,
    /// Number of worked examples (chain of thought); 0 for zero-shot.
    #[arg(long, default_value_t = 0)]
    cot_shots: u32,
    /// Object labels, one per line. Defaults to the bundled list.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Prompt templates (TOML). Defaults to the bundled English set.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKindArg {
    Oracle,
    Uniform,
    Temporal,
    Spatial,
    Start,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instances: PathBuf,
    /// Agent configuration (TOML or JSON).
    #[arg(long, conflicts_with = "agent_kind", required_unless_present = "agent_kind")]
    agent: Option<PathBuf>,
    /// Reference agent, as an alternative to `--agent`.
    #[arg(long, value_enum)]
    agent_kind: Option<AgentKindArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bias strength of the biased reference agents.
    #[arg(long, default_value_t = 0.8)]
    strength: f64,
    #[arg(long, default_value_t = 1)]
    runs: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnalysisKind {
    Hist,
    Baseline,
    Conditional,
    Axis,
    Regression,
    Score,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    Spatial,
    Temporal,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    Family,
    Topology,
    Setting,
    All,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    evals: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: AnalysisKind,
    #[arg(long, value_enum, default_value = "spatial")]
    distance: DistanceArg,
    /// Restrict to one setting; baselines infer it when the file has only one.
    #[arg(long, value_enum)]
    setting: Option<SettingArg>,
    #[arg(long, default_value_t = analysis::DEFAULT_BASELINE_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Spatial distance to condition on.
    #[arg(long, default_value_t = 1)]
    sd: u32,
    #[arg(long, value_enum, default_value = "family")]
    group_by: GroupArg,
    /// CSV output; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PoolArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    MaxOneAttentionError,
    SquareCheckMustPass,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Criterion {
        match c {
            CriterionArg::MaxOneAttentionError => Criterion::MaxOneAttentionError,
            CriterionArg::SquareCheckMustPass => Criterion::SquareCheckMustPass,
        }
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    pool: PathBuf,
    /// Append-only response log; replayed on start.
    #[arg(long, default_value = "humanlab-log.jsonl")]
    log: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Default criterion of the results endpoint.
    #[arg(long, value_enum, default_value = "max-one-attention-error")]
    criterion: CriterionArg,
    /// Session seeds derive from this.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory served at the root (the survey front-end bundle).
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            return report(CliError::usage(first.trim_start_matches("error: ").to_string()));
        }
    };
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Run(args) => run(args),
        Command::Analyze(args) => analyze(args),
        Command::Pool(args) => pool(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    let message = e.message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error[{}]: {message}", e.code);
    ExitCode::from(e.exit_code())
}

fn load_vocab(path: Option<&Path>) -> CliResult<(Vocabulary, serde_json::Value)> {
    Ok(match path {
        Some(p) => {
            let v = Vocabulary::from_file(p)?;
            let info = json!({ "path": p, "labels": v.len() });
            (v, info)
        }
        None => {
            let v = Vocabulary::imagenet();
            let info = json!({ "path": "builtin:imagenet", "labels": v.len() });
            (v, info)
        }
    })
}

fn task_from_flags(a: &GenerateArgs) -> CliResult<TaskSpec> {
    let topology_arg = a.topology.ok_or_else(|| CliError::usage("--topology is required"))?;
    let need = |v: Option<u32>, flag: &str| v.ok_or_else(|| CliError::usage(format!("--{flag} is required here")));
    let grid = (a.rows.unwrap_or(3), a.cols.unwrap_or(3));
    let topology = match topology_arg {
        TopologyArg::Square => Topology::Square { rows: grid.0, cols: grid.1 },
        TopologyArg::Rhombus => Topology::Rhombus { rows: grid.0, cols: grid.1 },
        TopologyArg::Hexagon => Topology::Hexagon { size: need(a.size, "size")? },
        TopologyArg::Triangle => Topology::Triangle { size: need(a.size, "size")? },
        TopologyArg::Ring => Topology::Ring { n: need(a.nodes, "nodes")? },
        TopologyArg::Tree => {
            if a.setting.is_some() {
                return Err(CliError::usage("trees take --relation, not --setting"));
            }
            return Ok(TaskSpec::TreeKinship {
                nodes: a.nodes.unwrap_or(9),
                relation: a.relation.ok_or_else(|| CliError::usage("--relation is required for trees"))?.into(),
                order: a.order.map_or(Order::TreeDfs, Order::from),
            });
        }
        TopologyArg::Size => {
            if a.setting.is_some() || a.order.is_some() {
                return Err(CliError::usage("size inference takes no --setting or --order"));
            }
            return Ok(TaskSpec::SizeInference {
                height: need(a.rows, "rows")?,
                width: need(a.cols, "cols")?,
                with_items: a.with_items,
            });
        }
    };
    if a.relation.is_some() {
        return Err(CliError::usage("--relation applies to trees only"));
    }
    Ok(match a.setting.unwrap_or(SettingArg::Local) {
        SettingArg::Local => {
            if a.order.is_some() {
                return Err(CliError::usage("--order applies to the global setting"));
            }
            TaskSpec::LoopClosure { topology, steps: a.steps }
        }
        SettingArg::Global => {
            let order = match a.order {
                Some(o) => o.into(),
                None => *Order::for_topology(topology.kind())
                    .first()
                    .ok_or_else(|| CliError::usage("no serialization order applies"))?,
            };
            TaskSpec::GlobalPath { topology, steps: a.steps, order }
        }
    })
}

fn generate(a: GenerateArgs) -> CliResult {
    let suite = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(Error::Io)?;
            toml::from_str::<SuiteSpec>(&text).map_err(|e| CliError::new("E_CONFIG", format!("{}: {e}", path.display())))?
        }
        None => SuiteSpec {
            task: task_from_flags(&a)?,
            count: a.count.unwrap_or(100),
            seed: a.seed.unwrap_or(0),
            render: RenderOptions { detailed: a.detailed, cot_shots: a.cot_shots },
        },
    };
    suite.task.validate().map_err(|e| match e {
        Error::Config(m) | Error::Descriptor(m) => CliError::usage(m),
        other => other.into(),
    })?;
    let (vocab, vocab_info) = load_vocab(a.vocab.as_deref())?;
    let renderer = match &a.templates {
        Some(p) => Renderer::from_toml(&std::fs::read_to_string(p).map_err(Error::Io)?)?,
        None => Renderer::default(),
    };
    let instances = taskgen::generate_suite_with(&suite, &vocab, &renderer)?;
    jsonl::write_all(&a.out, &instances)?;
    let manifest = RunManifest::new(
        "generate",
        serde_json::to_value(suite).map_err(Error::Json)?,
        json!({ "master": suite.seed, "instance": "derive_seed(master, \"instance\", i)" }),
        json!({ "vocab": vocab_info, "templates": a.templates.as_ref().map_or(json!("builtin:en"), |p| json!(p)) }),
        vec![a.out.clone()],
    );
    manifest.write_for(&a.out)?;
    eprintln!("wrote {} instances of {} to {}", instances.len(), suite.task.slug(), a.out.display());
    Ok(())
}

fn read_agent(path: &Path) -> CliResult<AgentConfig> {
    let text = std::fs::read_to_string(path).map_err(Error::Io)?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::new("E_CONFIG", format!("{}: {e}", path.display())))
}

fn run(a: RunArgs) -> CliResult {
    let config = match (&a.agent, a.agent_kind) {
        (Some(path), _) => read_agent(path)?,
        (None, Some(kind)) => match kind {
            AgentKindArg::Oracle => AgentConfig::Oracle,
            AgentKindArg::Uniform => AgentConfig::UniformRandom { seed: a.seed },
            AgentKindArg::Temporal => AgentConfig::TemporalBiased { seed: a.seed, strength: a.strength },
            AgentKindArg::Spatial => AgentConfig::SpatialBiased { seed: a.seed, strength: a.strength },
            AgentKindArg::Start => AgentConfig::StartBiased { seed: a.seed, strength: a.strength },
        },
        (None, None) => return Err(CliError::usage("give --agent or --agent-kind")),
    };
    if a.runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    let instances: Vec<TaskInstance> = jsonl::read_all(&a.instances)?;
    let records = harness::run_agent(&config, &instances, a.runs)?;
    jsonl::write_all(&a.out, &records)?;
    RunManifest::new(
        "run",
        serde_json::to_value(&config).map_err(Error::Json)?,
        json!({ "run": "derive_seed(agent seed, \"run\", r)", "instance": "derive_seed(run seed, \"instance\", i)" }),
        json!({ "instances": a.instances, "runs": a.runs }),
        vec![a.out.clone()],
    )
    .write_for(&a.out)?;
    let correct = records.iter().filter(|r| r.correct).count();
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let accuracy = if records.is_empty() { 0.0 } else { correct as f64 / records.len() as f64 };
    println!(
        "{}: accuracy {accuracy:.3} ({correct}/{} records, {} runs{})",
        config.name(),
        records.len(),
        a.runs,
        if failed > 0 { format!(", {failed} failed calls") } else { String::new() }
    );
    Ok(())
}

fn setting_of(s: SettingArg) -> Setting {
    match s {
        SettingArg::Local => Setting::Local,
        SettingArg::Global => Setting::Global,
    }
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    let instances: Vec<TaskInstance> = jsonl::read_all(&a.instances)?;
    let distance = match a.distance {
        DistanceArg::Spatial => DistanceKind::Spatial,
        DistanceArg::Temporal => DistanceKind::Temporal,
    };
    let setting = a.setting.map(setting_of);
    let evals = || -> CliResult<Vec<EvalRecord>> {
        let path = a.evals.as_ref().ok_or_else(|| CliError::usage("--evals is required for this analysis"))?;
        Ok(jsonl::read_all(path)?)
    };
    let errors = |evals: &[EvalRecord]| -> CliResult<Vec<analysis::ErrorRecord>> {
        let set = analysis::error_records(&instances, evals)?;
        Ok(set.records.into_iter().filter(|r| setting.is_none_or(|s| r.setting == s)).collect())
    };
    let csv = match a.kind {
        AnalysisKind::Hist => {
            let h = analysis::histogram(&errors(&evals()?)?, distance);
            if h.is_empty() {
                eprintln!("warning: no wrong single-object predictions; the histogram is empty");
            }
            h.to_csv()
        }
        AnalysisKind::Conditional => {
            let h = analysis::conditional_td(&errors(&evals()?)?, a.sd);
            if h.is_empty() {
                eprintln!("warning: no wrong predictions at spatial distance {}", a.sd);
            }
            h.to_csv()
        }
        AnalysisKind::Axis => {
            let (rows, cols) = analysis::axis_histograms(&errors(&evals()?)?);
            if rows.is_empty() {
                eprintln!("warning: no wrong predictions on square grids");
            }
            let mut out = String::from("axis,distance,count,frequency\n");
            for (name, h) in [("row", &rows), ("column", &cols)] {
                for line in h.to_csv().lines().skip(1) {
                    out.push_str(&format!("{name},{line}\n"));
                }
            }
            out
        }
        AnalysisKind::Baseline => {
            let setting = match setting {
                Some(s) => s,
                None => {
                    let mut settings: Vec<Setting> = instances.iter().map(TaskInstance::setting).collect();
                    settings.dedup();
                    match settings.as_slice() {
                        [one] => *one,
                        _ => return Err(CliError::usage("instances mix settings; pass --setting")),
                    }
                }
            };
            analysis::baseline(&instances, setting, distance, a.samples, a.seed)?.histogram.to_csv()
        }
        AnalysisKind::Regression => {
            let (rows, skipped) = analysis::design_rows(&instances, &evals()?)?;
            if skipped > 0 {
                eprintln!("warning: {skipped} records on structures outside the model were skipped");
            }
            analysis::regression_csv(&analysis::fit_difficulty::<f64>(&rows)?)
        }
        AnalysisKind::Score => {
            let by_id: std::collections::HashMap<&str, &TaskInstance> =
                instances.iter().map(|i| (i.id.as_str(), i)).collect();
            let evals = evals()?;
            let table = harness::score_by::<f64>(&evals, |r| match a.group_by {
                GroupArg::Family => harness::family_of(&r.instance_id),
                GroupArg::All => "all".into(),
                GroupArg::Topology => by_id
                    .get(r.instance_id.as_str())
                    .map_or_else(|| "unknown".into(), |i| i.topology().kind().name().into()),
                GroupArg::Setting => by_id.get(r.instance_id.as_str()).map_or_else(
                    || "unknown".into(),
                    |i| match i.setting() {
                        Setting::Local => "local".into(),
                        Setting::Global => "global".into(),
                    },
                ),
            })?;
            harness::score_csv(&table)
        }
    };
    match &a.out {
        Some(out) => {
            std::fs::write(out, &csv).map_err(Error::Io)?;
            let kind = a.kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            RunManifest::new(
                "analyze",
                json!({ "kind": kind, "distance": a.distance.to_possible_value().map(|v| v.get_name().to_string()),
                        "setting": setting, "samples": a.samples, "sd": a.sd,
                        "group_by": a.group_by.to_possible_value().map(|v| v.get_name().to_string()) }),
                json!({ "baseline": a.seed }),
                json!({ "instances": a.instances, "evals": a.evals }),
                vec![out.clone()],
            )
            .write_for(out)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn pool(a: PoolArgs) -> CliResult {
    let (vocab, vocab_info) = load_vocab(a.vocab.as_deref())?;
    let pool = QuestionPool::standard(&vocab, a.seed)?;
    pool.save(&a.out)?;
    RunManifest::new(
        "pool",
        json!({ "pool": "standard" }),
        json!({ "master": a.seed }),
        json!({ "vocab": vocab_info }),
        vec![a.out.clone()],
    )
    .write_for(&a.out)?;
    eprintln!("wrote {} questions to {}", pool.questions.len(), a.out.display());
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult {
    let pool = QuestionPool::load(&a.pool)?;
    let lab = Lab::open(pool, a.seed, Box::new(SystemClock), &a.log)?;
    serve::serve(lab, SocketAddr::new(a.bind, a.port), a.criterion.into(), a.static_dir)
}
