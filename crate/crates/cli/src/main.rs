use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use decrv_core::eval::{render_table, score_table, AnnotationSet, EvalError};
use decrv_core::registry::{Registry, RegistryError};
use decrv_core::report::{read_verdicts_csv, summary, write_dir};
use decrv_core::sim::{simulate, DeliveryPolicy, SimConfig, SimError};
use decrv_core::synthesis::{synthesize_with, SynthConfig, SynthError, DEFAULT_MAX_STATES};
use decrv_core::trace::{poll_all, rate_analysis, synthetic, Manifest, ObservationTrace, PollConfig, TraceError};
use decrv_core::{bundled, ltl, Formula};

#[derive(Parser)]
#[command(name = "decrv", version, about = "Decentralized LTL3 monitoring of component-based systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize monitors for a formula or every monitor of a spec file.
    Synth(SynthArgs),
    /// Replay sensor logs through the decentralized monitors.
    Replay(ReplayArgs),
    /// Change-rate analysis of the sensor logs named by a manifest.
    Rates(RatesArgs),
    /// Score verdicts against annotated activity intervals.
    Eval(EvalArgs),
    /// Write a synthetic day of sensor logs with annotations and the bundled spec.
    Gen(GenArgs),
    /// Per-monitor proposition counts and dependency depth.
    Table(TableArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Spec file or formula; omit when using --rooms.
    input: Option<String>,
    /// Use the generated light-check spec with this many rooms.
    #[arg(long, conflicts_with = "input")]
    rooms: Option<usize>,
    /// Inline this monitor's dependencies and synthesize one monitor.
    #[arg(long)]
    centralized: Option<String>,
    /// Ceiling on intermediate states.
    #[arg(long, env = "DECRV_MAX_STATES", default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Per-monitor time limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Skip Moore minimization.
    #[arg(long)]
    no_minimize: bool,
    /// Write `<label>.dot` and `<label>.txt` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    spec: PathBuf,
    /// Sensor manifest, or an observation trace CSV with --trace-csv.
    input: PathBuf,
    /// Treat the input as a 0/1 observation trace CSV.
    #[arg(long)]
    trace_csv: bool,
    /// Poll window START:END:INTERVAL in milliseconds.
    #[arg(long, conflicts_with = "poll_file")]
    poll: Option<String>,
    /// File holding `start end interval`; defaults to poll.txt beside the manifest.
    #[arg(long)]
    poll_file: Option<PathBuf>,
    #[arg(long)]
    no_gc: bool,
    /// Ignore triggers and expand every EHE each round.
    #[arg(long)]
    eager_ehe: bool,
    /// immediate, delay:N, reorder:N or reorder:N:SEED.
    #[arg(long, default_value = "immediate")]
    delivery: String,
    /// Seed for reorder delivery when the policy omits one.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sequential: bool,
    /// Comma-separated labels; their dependencies are kept.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Bundled label set: ADL, ADL+H, ADL+H+2 or ADL+M.
    #[arg(long, conflicts_with = "labels")]
    set: Option<String>,
    #[arg(long, env = "DECRV_MAX_STATES", default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RatesArgs {
    manifest: PathBuf,
    /// Only analyse sensors whose propositions this spec uses.
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    verdicts: PathBuf,
    annotations: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    dir: PathBuf,
    #[arg(long, default_value_t = 36_000)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TableArgs {
    /// Spec file; the bundled rule set when omitted.
    spec: Option<PathBuf>,
}

/// Exit status with message.
struct Failure {
    code: u8,
    message: String,
}

const PARSE: u8 = 1;
const VALIDATION: u8 = 2;
const CAPACITY: u8 = 3;

fn fail(code: u8, message: impl Display) -> Failure {
    Failure { code, message: message.to_string() }
}

impl From<RegistryError> for Failure {
    fn from(e: RegistryError) -> Self {
        let code = match e {
            RegistryError::Syntax { .. } | RegistryError::Formula { .. } | RegistryError::Io { .. } => PARSE,
            _ => VALIDATION,
        };
        fail(code, e)
    }
}

impl From<TraceError> for Failure {
    fn from(e: TraceError) -> Self {
        let code = if matches!(e, TraceError::PollConfig(_)) { VALIDATION } else { PARSE };
        fail(code, e)
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        fail(CAPACITY, e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = if e.is_capacity() { CAPACITY } else { VALIDATION };
        fail(code, e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let code = if matches!(e, EvalError::Overlap { .. }) { VALIDATION } else { PARSE };
        fail(code, e)
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| fail(PARSE, format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(PARSE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Replay(a) => replay(a),
        Command::Rates(a) => rates(a),
        Command::Eval(a) => eval(a),
        Command::Gen(a) => gen(a),
        Command::Table(a) => table(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let jobs: Vec<(String, Formula)> = match (&a.input, a.rooms) {
        (_, Some(rooms)) => targets(&bundled::light_check(rooms)?, a.centralized.as_deref())?,
        (Some(input), None) if Path::new(input).is_file() => targets(&Registry::load(input)?, a.centralized.as_deref())?,
        (Some(input), None) => {
            if a.centralized.is_some() {
                return Err(fail(PARSE, "--centralized needs a spec file or --rooms"));
            }
            let f = ltl::parse(input).map_err(|e| fail(PARSE, format!("{input}: {e}")))?;
            vec![("formula".to_string(), f)]
        }
        (None, None) => return Err(fail(PARSE, "expected a formula, a spec file or --rooms")),
    };
    let cfg = SynthConfig {
        max_states: a.max_states,
        timeout: a.timeout.map(Duration::from_secs_f64),
        minimize: !a.no_minimize,
    };
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    println!("label\tstates\ttransitions\tintermediate\tmillis");
    for (label, f) in jobs {
        let start = Instant::now();
        let res = synthesize_with(&f, &cfg);
        let millis = start.elapsed().as_secs_f64() * 1e3;
        let (m, stats) = res.map_err(|e| {
            println!("{label}\t-\t-\t-\t{millis:.3}");
            Failure::from(e)
        })?;
        println!("{label}\t{}\t{}\t{}\t{millis:.3}", m.state_count(), m.transition_count(), stats.intermediate_states);
        if let Some(dir) = &a.out {
            for (ext, body) in [("dot", m.to_dot()), ("txt", m.to_text())] {
                let path = dir.join(format!("{label}.{ext}"));
                std::fs::write(&path, body).map_err(io(&path))?;
            }
        }
    }
    Ok(())
}

fn targets(reg: &Registry, centralized: Option<&str>) -> Result<Vec<(String, Formula)>, Failure> {
    match centralized {
        Some(label) => Ok(vec![(label.to_string(), reg.inline(label)?)]),
        None => Ok(reg.monitors().iter().map(|m| (m.label.clone(), m.formula.clone())).collect()),
    }
}

fn poll_window(a: &ReplayArgs) -> Result<PollConfig, Failure> {
    let (text, source) = match (&a.poll, &a.poll_file) {
        (Some(p), _) => (p.replace(':', " "), "--poll".to_string()),
        (None, file) => {
            let path = file.clone().unwrap_or_else(|| a.input.parent().unwrap_or(Path::new(".")).join("poll.txt"));
            let text = std::fs::read_to_string(&path)
                .map_err(|e| fail(PARSE, format!("{}: {e} (pass --poll START:END:INTERVAL)", path.display())))?;
            (text, path.display().to_string())
        }
    };
    let nums: Vec<u64> = text
        .split_whitespace()
        .map(|x| x.parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|_| fail(PARSE, format!("{source}: expected START END INTERVAL")))?;
    match nums.as_slice() {
        [s, e, i] => Ok(PollConfig::new(*s, *e, *i)?),
        _ => Err(fail(PARSE, format!("{source}: expected START END INTERVAL"))),
    }
}

fn replay(a: ReplayArgs) -> Result<(), Failure> {
    let mut reg = Registry::load(&a.spec)?;
    if let Some(set) = &a.set {
        let sets = bundled::label_sets();
        let labels = sets
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(set))
            .map(|(_, l)| l.clone())
            .ok_or_else(|| fail(PARSE, format!("unknown label set {set}; expected ADL, ADL+H, ADL+H+2 or ADL+M")))?;
        reg = reg.restrict(&labels)?;
    } else if !a.labels.is_empty() {
        reg = reg.restrict(&a.labels)?;
    }
    let trace = if a.trace_csv {
        let file = std::fs::File::open(&a.input).map_err(io(&a.input))?;
        ObservationTrace::read_csv(file, &a.input.display().to_string())?
    } else {
        let manifest = Manifest::load(&a.input)?;
        poll_all(&manifest, &poll_window(&a)?)?
    };
    let delivery = match a.delivery.split(':').count() {
        2 if a.delivery.starts_with("reorder:") => format!("{}:{}", a.delivery, a.seed),
        _ => a.delivery.clone(),
    };
    let cfg = SimConfig {
        delivery: delivery.parse::<DeliveryPolicy>().map_err(|e| fail(PARSE, e))?,
        gc: !a.no_gc,
        lazy: !a.eager_ehe,
        parallel: !a.sequential,
        synth: SynthConfig { max_states: a.max_states, ..SynthConfig::default() },
    };
    let rep = simulate(&reg, &trace, &cfg)?;
    write_dir(&rep, &a.out).map_err(io(&a.out))?;
    let structural = format!("structural_msgs_per_round = {}\n", reg.steady_state_message_rate());
    let summary_path = a.out.join("summary.txt");
    std::fs::write(&summary_path, format!("{structural}{}", summary(&rep))).map_err(io(&summary_path))?;
    println!(
        "{} monitors, {} rounds, {} messages (steady state {:.4}/round, structural {}); wrote {}",
        rep.labels.len(),
        rep.rounds,
        rep.total_messages(),
        rep.steady_state_rate(),
        reg.steady_state_message_rate(),
        a.out.display()
    );
    Ok(())
}

fn rates(a: RatesArgs) -> Result<(), Failure> {
    let manifest = Manifest::load(&a.manifest)?;
    let used: Option<BTreeSet<String>> = match &a.spec {
        Some(p) => Some(Registry::load(p)?.propositions()),
        None => None,
    };
    let report = rate_analysis(&manifest, used.as_ref())?;
    print!("{}", report.to_table());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let file = std::fs::File::open(&a.verdicts).map_err(io(&a.verdicts))?;
    let verdicts = read_verdicts_csv(file).map_err(|e| fail(PARSE, format!("{}: {e}", a.verdicts.display())))?;
    let text = std::fs::read_to_string(&a.annotations).map_err(io(&a.annotations))?;
    let annotations = AnnotationSet::parse(&text)
        .map_err(|e| Failure { message: format!("{}: {}", a.annotations.display(), e), ..Failure::from(e) })?;
    let (rows, warnings) = score_table(&verdicts, &annotations);
    for w in warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", render_table(&rows));
    Ok(())
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    if a.rounds == 0 {
        return Err(fail(VALIDATION, "--rounds must be positive"));
    }
    let day = synthetic::synthetic_day(a.rounds, a.seed);
    day.write_dir(&a.dir)?;
    let spec = a.dir.join("amiqual.dspec");
    std::fs::write(&spec, bundled::AMIQUAL).map_err(io(&spec))?;
    println!(
        "wrote {} sensor logs, {} rounds at {} ms, annotations and spec to {}",
        day.manifest.peripheries.len(),
        day.poll.rounds(),
        day.poll.interval,
        a.dir.display()
    );
    Ok(())
}

fn table(a: TableArgs) -> Result<(), Failure> {
    let reg = match &a.spec {
        Some(p) => Registry::load(p)?,
        None => bundled::amiqual(),
    };
    println!("label\tap_d\tap_c\tdepth");
    for (label, d, c, depth) in reg.table() {
        println!("{label}\t{d}\t{c}\t{depth}");
    }
    Ok(())
}
