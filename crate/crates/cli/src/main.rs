use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use geoprefer_core::girtree::{load_index, save_index, DEFAULT_FANOUT};
use geoprefer_core::ingest::{generate_synthetic, load_jsonl, save_jsonl, write_jsonl, SyntheticConfig};
use geoprefer_core::interaction::TerminationConfig;
use geoprefer_core::model::{Rect, WordSet};
use geoprefer_core::oracle::brute_topk_prefer;
use geoprefer_core::session::{retrieval_metrics, SimulatedUser};
use geoprefer_core::workload::{run_eval, seeded_preference, EvalConfig, EVAL_CSV_HEADER};
use geoprefer_core::{
    GirTree, Location, PreferenceVector, Query, Session, SessionConfig, SignatureConfig, Step, Strategy,
};
use geoprefer_service::{AppState, ServiceConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "geoprefer", version, about = "Interactive top-k geo-tagged image search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index operations.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Run one interactive query, printing each round as a JSON line.
    Query(QueryArgs),
    /// Serve the HTTP session API.
    Serve(ServeArgs),
    /// Simulated-user evaluation over a random query workload, as CSV.
    Eval(EvalArgs),
    /// Write a synthetic JSONL dataset.
    Gen(GenArgs),
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Build an index file from a JSONL dataset.
    Build(BuildArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, env = "GEOPREFER_DATA")]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FANOUT)]
    fanout: usize,
    #[arg(long, default_value_t = 512)]
    sig_bits: usize,
    #[arg(long, default_value_t = 2)]
    bits_per_word: usize,
    #[arg(long, default_value_t = 0, env = "GEOPREFER_SEED")]
    seed: u64,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long, env = "GEOPREFER_INDEX")]
    index: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    lat: f64,
    #[arg(long, allow_hyphen_values = true)]
    lon: f64,
    /// Comma-separated visual word ids.
    #[arg(long, value_delimiter = ',', required = true)]
    words: Vec<u32>,
    #[arg(long, default_value_t = 20, env = "GEOPREFER_K")]
    k: usize,
    #[arg(long, default_value_t = 8, env = "GEOPREFER_THETA")]
    theta: usize,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value = "densest", env = "GEOPREFER_STRATEGY")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0, env = "GEOPREFER_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_rounds: usize,
    /// Answer rounds with a simulated user: `uniform`, `random:<seed>` or a
    /// JSON file holding `{"p0": .., "pw": [..]}`. Without it, picks are read
    /// from stdin, one id per line (`stop` or end of input stops).
    #[arg(long)]
    simulate_p: Option<String>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "GEOPREFER_INDEX")]
    index: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080", env = "GEOPREFER_LISTEN")]
    listen: SocketAddr,
    /// Idle session lifetime in seconds.
    #[arg(long, default_value_t = 1800, env = "GEOPREFER_TTL_SECS")]
    ttl_secs: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, env = "GEOPREFER_INDEX")]
    index: PathBuf,
    #[arg(long, default_value_t = 100)]
    sessions: usize,
    #[arg(long, default_value_t = 20, env = "GEOPREFER_K")]
    k: usize,
    #[arg(long, default_value_t = 8, env = "GEOPREFER_THETA")]
    theta: usize,
    #[arg(long, default_value_t = 100)]
    t: usize,
    /// One or more of `densest`, `random`, comma-separated; one row each.
    #[arg(long, value_delimiter = ',', default_value = "densest", env = "GEOPREFER_STRATEGY")]
    strategy: Vec<Strategy>,
    #[arg(long, default_value_t = 0, env = "GEOPREFER_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_rounds: usize,
    /// Fill the wall-clock column instead of printing NA.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    vocab: u32,
    #[arg(long, default_value_t = 100.0)]
    mean_words: f64,
    #[arg(long, default_value_t = 0, env = "GEOPREFER_SEED")]
    seed: u64,
    /// `min_lon,min_lat,max_lon,max_lat`.
    #[arg(long, value_delimiter = ',', num_args = 4, allow_hyphen_values = true,
          default_values_t = [-74.1, 40.6, -73.8, 40.9])]
    bbox: Vec<f64>,
    /// Output path, `-` for stdout.
    #[arg(long)]
    out: PathBuf,
}

type CliResult<T = ()> = Result<T, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index(IndexCommand::Build(a)) => index_build(a),
        Command::Query(a) => query(a),
        Command::Serve(a) => serve(a),
        Command::Eval(a) => eval(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &PathBuf) -> CliResult<GirTree> {
    load_index(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn index_build(a: BuildArgs) -> CliResult {
    let objects = load_jsonl::<f64>(&a.data).map_err(|e| format!("{}: {e}", a.data.display()))?;
    let sig = SignatureConfig {
        length_bits: a.sig_bits,
        bits_per_word: a.bits_per_word,
        seed: a.seed,
    };
    let tree = GirTree::build(objects, a.fanout, sig).map_err(|e| e.to_string())?;
    save_index(&tree, &a.out).map_err(|e| format!("{}: {e}", a.out.display()))?;
    eprintln!("indexed {} objects into {} nodes (height {})", tree.len(), tree.nodes().len(), tree.height());
    Ok(())
}

fn preference_arg(spec: &str, t: usize) -> CliResult<PreferenceVector> {
    if spec == "uniform" {
        return Ok(PreferenceVector::uniform(t));
    }
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed = seed.parse::<u64>().map_err(|e| format!("--simulate-p {spec}: {e}"))?;
        return Ok(seeded_preference(t, seed));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| format!("--simulate-p {spec}: {e}"))?;
    let p: PreferenceVector = serde_json::from_str(&text).map_err(|e| format!("--simulate-p {spec}: {e}"))?;
    if p.pw.len() != t {
        return Err(format!("--simulate-p {spec}: {} word weights for {t} query words", p.pw.len()));
    }
    PreferenceVector::new(p.p0, p.pw).map_err(|e| format!("--simulate-p {spec}: {e}"))
}

fn emit(out: &mut impl Write, value: serde_json::Value) -> CliResult {
    writeln!(out, "{value}").and_then(|_| out.flush()).map_err(|e| e.to_string())
}

fn query(a: QueryArgs) -> CliResult {
    let tree = load(&a.index)?;
    let q = Query::new(Location::new(a.lon, a.lat), WordSet::from_iter(a.words.iter().copied()))
        .with_k(a.k)
        .with_theta(a.theta)
        .with_lambda(a.lambda);
    q.validate().map_err(|e| e.to_string())?;
    let user = a
        .simulate_p
        .as_deref()
        .map(|s| preference_arg(s, q.dim_words()).map(SimulatedUser::new))
        .transpose()?;
    let config = SessionConfig {
        strategy: a.strategy,
        seed: a.seed,
        termination: TerminationConfig { max_rounds: a.max_rounds },
        ..Default::default()
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    emit(
        &mut out,
        json!({"query": {
            "lat": q.location.lat, "lon": q.location.lon, "words": q.words.as_slice(),
            "t": q.dim_words(), "k": q.k, "theta": q.theta, "lambda": q.lambda,
            "strategy": a.strategy, "seed": a.seed,
        }}),
    )?;
    let mut session = Session::start(&tree, q.clone(), config).map_err(|e| e.to_string())?;
    let mut stdin = std::io::stdin().lock();
    let mut step = session.step();
    while let Step::Show { round, shown } = &step {
        let chosen = match &user {
            Some(u) => Some(u.pick(&tree, &q, shown).map_err(|e| e.to_string())?),
            None => {
                emit(&mut out, json!({"round": round, "shown": shown}))?;
                read_pick(&mut stdin)?
            }
        };
        let Some(chosen) = chosen else {
            session.stop(&tree).map_err(|e| e.to_string())?;
            break;
        };
        if user.is_some() {
            emit(&mut out, json!({"round": round, "shown": shown, "chosen": chosen}))?;
        }
        step = match session.submit_feedback(&tree, chosen) {
            Ok(s) => s,
            Err(e) if user.is_none() => {
                eprintln!("error: {e}");
                session.step()
            }
            Err(e) => return Err(e.to_string()),
        };
    }
    let results = session.results().unwrap_or_default();
    let estimate = session.estimate().ok_or("session ended without an estimate")?;
    let mut done = json!({
        "done": true,
        "rounds_used": session.rounds_used(),
        "termination": session.termination(),
        "p_hat": estimate.p,
        "results": results,
    });
    if let Some(u) = &user {
        let truth = brute_topk_prefer(tree.objects(), &q, &u.p_star, q.k, tree.frame());
        let ids: Vec<u64> = results.iter().map(|r| r.id).collect();
        let (precision, recall, f1) = retrieval_metrics(&ids, &truth);
        done["precision"] = json!(precision);
        done["recall"] = json!(recall);
        done["f1"] = json!(f1);
    }
    emit(&mut out, done)
}

/// Next pick from stdin; `None` on `stop` or end of input.
fn read_pick(input: &mut impl BufRead) -> CliResult<Option<u64>> {
    loop {
        let mut line = String::new();
        if input.read_line(&mut line).map_err(|e| e.to_string())? == 0 {
            return Ok(None);
        }
        match line.trim() {
            "" => continue,
            "stop" => return Ok(None),
            s => match s.parse() {
                Ok(id) => return Ok(Some(id)),
                Err(_) => eprintln!("error: expected an object id or `stop`, got {s:?}"),
            },
        }
    }
}

fn serve(a: ServeArgs) -> CliResult {
    let tree = load(&a.index)?;
    let state = AppState::new(
        tree,
        ServiceConfig {
            idle_ttl: Duration::from_secs(a.ttl_secs),
            ..Default::default()
        },
    );
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let listener = geoprefer_service::bind(a.listen)
            .await
            .map_err(|e| format!("{}: {e}", a.listen))?;
        eprintln!("listening on {}", listener.local_addr().map_err(|e| e.to_string())?);
        geoprefer_service::serve(listener, state).await.map_err(|e| e.to_string())
    })
}

fn eval(a: EvalArgs) -> CliResult {
    let tree = load(&a.index)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{EVAL_CSV_HEADER}").map_err(|e| e.to_string())?;
    for &strategy in &a.strategy {
        let cfg = EvalConfig {
            sessions: a.sessions,
            k: a.k,
            theta: a.theta,
            t: a.t,
            strategy,
            seed: a.seed,
            max_rounds: a.max_rounds,
        };
        let summary = run_eval(&tree, &cfg).map_err(|e| e.to_string())?;
        writeln!(out, "{}", summary.csv_row(a.timing)).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn gen(a: GenArgs) -> CliResult {
    let bbox = Rect {
        min_lon: a.bbox[0],
        min_lat: a.bbox[1],
        max_lon: a.bbox[2],
        max_lat: a.bbox[3],
    };
    let cfg = SyntheticConfig {
        n: a.n,
        vocab_size: a.vocab,
        words_per_object_mean: a.mean_words,
        bbox,
        seed: a.seed,
    };
    let objects = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
    if a.out.as_os_str() == "-" {
        write_jsonl(&objects, std::io::stdout().lock()).map_err(|e| e.to_string())
    } else {
        save_jsonl(&objects, &a.out).map_err(|e| format!("{}: {e}", a.out.display()))
    }
}
