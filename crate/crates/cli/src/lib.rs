//! Command implementations behind the `simulst` binary.

use std::fs;
use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use simulst_core::backends::mock::{MockAsr, MockMt, MockScript};
use simulst_core::backends::transport::serve;
use simulst_core::backends::{AsrBackend, MtBackend};
use simulst_core::datagen::{self, GenConfig};
use simulst_core::metrics::{self, LatencyReport, MetricsReport};
use simulst_core::pipeline::{read_trace, Pipeline, PipelineConfig, RunSummary};
use simulst_core::{jsonl, Error, ErrorKind, Result};

#[derive(Debug, Parser)]
#[command(name = "simulst", version, about = "Cascaded simultaneous speech translation engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay an audio trace through the pipeline and write the emission log.
    Simulate(SimulateArgs),
    /// Score an emission log against timed references.
    Eval(EvalArgs),
    /// Generate context and prefix training samples from a bitext corpus.
    Datagen(DatagenArgs),
    /// Compare latency distributions of several emission logs.
    Bench(BenchArgs),
    /// Serve the mock backends over the line protocol (stdin/stdout or TCP).
    ServeMock(ServeMockArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSONL trace of audio arrival events.
    #[arg(long)]
    pub trace: PathBuf,
    /// Pipeline config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output emission log (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the run summary here; it is always printed to stdout.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeSel {
    Both,
    Nca,
    Ca,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// JSONL reference segments.
    #[arg(long)]
    pub refs: PathBuf,
    /// Latency views to report.
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeSel,
    /// Also write the report here; it is always printed to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output prefix: writes <prefix>.src, <prefix>.tgt and <prefix>.stats.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub prefix_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub min_context: usize,
    #[arg(long, default_value_t = 10)]
    pub max_context: usize,
    /// Skip malformed corpus lines (they are counted in the stats) instead
    /// of failing.
    #[arg(long)]
    pub skip_malformed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Emission logs to compare.
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    /// JSONL reference segments shared by all logs.
    #[arg(long)]
    pub refs: PathBuf,
    /// Logs evaluated in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Also write the JSON rows here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeMockArgs {
    #[arg(long)]
    pub script: PathBuf,
    /// Overrides the script's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Listen on this TCP address instead of stdin/stdout.
    #[arg(long)]
    pub listen: Option<String>,
}

/// 0 on success, 1 on validation, parse and io errors, 2 on backend and
/// protocol errors.
pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Backend | ErrorKind::Protocol => 2,
        ErrorKind::InvalidArgument | ErrorKind::Parse | ErrorKind::Io => 1,
    }
}

/// Machine-readable error document written to stderr.
pub fn error_json(err: &Error) -> serde_json::Value {
    let mut doc = json!({
        "error": {
            "kind": err.kind().as_str(),
            "message": err.to_string(),
        }
    });
    if let Some(f) = err.field() {
        doc["error"]["field"] = json!(f);
    }
    if let Error::Parse { source_name, line, .. } = err {
        doc["error"]["source"] = json!(source_name);
        doc["error"]["line"] = json!(line);
    }
    doc
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<RunSummary> {
    let cfg = PipelineConfig::load(&args.config)?;
    let trace = read_trace(&args.trace)?;
    let (log, summary) = Pipeline::from_config(&cfg)?.run(&trace)?;
    jsonl::write(&args.out, &log)?;
    let text = pretty(&summary);
    if let Some(p) = &args.summary {
        write_file(p, &text)?;
    }
    out.write_all(text.as_bytes())?;
    Ok(summary)
}

/// Report JSON with only the selected latency views.
pub fn report_json(report: &MetricsReport, mode: ModeSel) -> serde_json::Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    let obj = v.as_object_mut().expect("object");
    match mode {
        ModeSel::Both => {}
        ModeSel::Nca => {
            obj.remove("ca");
        }
        ModeSel::Ca => {
            obj.remove("nca");
        }
    }
    v
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<MetricsReport> {
    let log = metrics::read_emission_log(&args.log)?;
    let refs = metrics::read_references(&args.refs)?;
    let report = metrics::evaluate(&log, &refs)?;
    let text = pretty(&report_json(&report, args.mode));
    if let Some(p) = &args.out {
        write_file(p, &text)?;
    }
    out.write_all(text.as_bytes())?;
    Ok(report)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_datagen(args: &DatagenArgs, out: &mut dyn Write) -> Result<datagen::GenStats> {
    let cfg = GenConfig {
        max_context: args.max_context,
        min_context: args.min_context,
        prefix_rate: args.prefix_rate,
        seed: args.seed,
    };
    cfg.validate()?;
    let text = fs::read_to_string(&args.corpus)?;
    let name = args.corpus.display().to_string();
    let (docs, malformed) = if args.skip_malformed {
        let load = datagen::parse_corpus_lenient(&text);
        if load.documents.is_empty() {
            return Err(Error::invalid(format!("{name}: no documents")));
        }
        (load.documents, load.malformed.len())
    } else {
        (datagen::parse_corpus(&text, &name)?, 0)
    };
    let (samples, mut stats) = datagen::generate(&docs, &cfg, args.count)?;
    stats.malformed_lines = malformed;
    let mut src = String::new();
    let mut tgt = String::new();
    for s in &samples {
        src.push_str(&s.source);
        src.push('\n');
        tgt.push_str(&s.target);
        tgt.push('\n');
    }
    write_file(&with_suffix(&args.out, ".src"), &src)?;
    write_file(&with_suffix(&args.out, ".tgt"), &tgt)?;
    let stats_text = pretty(&stats);
    write_file(&with_suffix(&args.out, ".stats.json"), &stats_text)?;
    out.write_all(stats_text.as_bytes())?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub run: String,
    pub mode: &'static str,
    pub mean_s: f64,
    pub median_s: f64,
    pub p90_s: f64,
    pub p95_s: f64,
    pub p99_s: f64,
    pub max_s: f64,
}

impl BenchRow {
    fn new(run: &str, mode: &'static str, r: &LatencyReport) -> Self {
        let s = r.stats;
        BenchRow {
            run: run.to_string(),
            mode,
            mean_s: s.mean_s,
            median_s: s.median_s,
            p90_s: s.p90_s,
            p95_s: s.p95_s,
            p99_s: s.p99_s,
            max_s: s.max_s,
        }
    }

    pub fn values(&self) -> [f64; 6] {
        [self.mean_s, self.median_s, self.p90_s, self.p95_s, self.p99_s, self.max_s]
    }
}

pub fn bench_rows(logs: &[PathBuf], refs_path: &Path, jobs: usize) -> Result<Vec<BenchRow>> {
    let refs = metrics::read_references(refs_path)?;
    let eval = |p: &PathBuf| -> Result<Vec<BenchRow>> {
        let log = metrics::read_emission_log(p)?;
        let rep = metrics::evaluate(&log, &refs)?;
        let name = p.display().to_string();
        Ok(vec![BenchRow::new(&name, "NCA", &rep.nca), BenchRow::new(&name, "CA", &rep.ca)])
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let per_log: Vec<Result<Vec<BenchRow>>> = pool.install(|| logs.par_iter().map(eval).collect());
    let mut rows = Vec::new();
    for r in per_log {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let width = rows.iter().map(|r| r.run.len()).max().unwrap_or(3).max(3);
    let mut out = format!(
        "{:<width$}  {:<4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "run", "mode", "M", "mdn", "90%", "95%", "99%", "max"
    );
    for r in rows {
        out.push_str(&format!("{:<width$}  {:<4}", r.run, r.mode));
        for v in r.values() {
            out.push_str(&format!(" {v:>8.3}"));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<Vec<BenchRow>> {
    let rows = bench_rows(&args.logs, &args.refs, args.jobs)?;
    let json_text = pretty(&rows);
    if let Some(p) = &args.json {
        write_file(p, &json_text)?;
    }
    match args.format {
        Format::Text => out.write_all(bench_table(&rows).as_bytes())?,
        Format::Json => out.write_all(json_text.as_bytes())?,
    }
    Ok(rows)
}

fn mock_backends(script: &MockScript) -> Result<(Option<MockAsr>, Option<MockMt>)> {
    let asr = script.asr.clone().map(|a| MockAsr::new(a, script.seed)).transpose()?;
    let mt = script.mt.clone().map(|m| MockMt::new(m, script.seed)).transpose()?;
    Ok((asr, mt))
}

fn serve_one<R: std::io::BufRead, W: Write>(script: &MockScript, reader: R, writer: W) -> Result<()> {
    let (mut asr, mut mt) = mock_backends(script)?;
    serve(
        reader,
        writer,
        asr.as_mut().map(|b| b as &mut dyn AsrBackend),
        mt.as_mut().map(|b| b as &mut dyn MtBackend),
    )?;
    Ok(())
}

pub fn cmd_serve_mock(args: &ServeMockArgs) -> Result<()> {
    let mut script = MockScript::from_file(&args.script)?;
    if let Some(seed) = args.seed {
        script.seed = seed;
    }
    mock_backends(&script)?;
    match &args.listen {
        None => serve_one(&script, std::io::stdin().lock(), std::io::stdout().lock()),
        Some(addr) => {
            let listener = TcpListener::bind(addr.as_str())?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = stream?;
                let script = script.clone();
                std::thread::spawn(move || {
                    let reader = match stream.try_clone() {
                        Ok(s) => BufReader::new(s),
                        Err(e) => return eprintln!("connection error: {e}"),
                    };
                    if let Err(e) = serve_one(&script, reader, stream) {
                        eprintln!("connection error: {e}");
                    }
                });
            }
            Ok(())
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, out).map(drop),
        Command::Eval(a) => cmd_eval(a, out).map(drop),
        Command::Datagen(a) => cmd_datagen(a, out).map(drop),
        Command::Bench(a) => cmd_bench(a, out).map(drop),
        Command::ServeMock(a) => cmd_serve_mock(a),
    }
}
