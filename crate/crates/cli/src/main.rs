use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use infpolar_core::datagen::{generate, WorldSpec};
use infpolar_core::pipeline::{run_with_progress, PipelineConfig};
use infpolar_core::corpus::{ingest_tweets, InputFormat};
use infpolar_core::report::{timeline, write_atomic, write_timeline_csv};
use infpolar_core::{Error, Party, UserTable};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "infpolar", version, about = "Influencer polarization analysis for event-centric tweet corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic world with planted stances and a matching pipeline config.
    Generate {
        /// TOML world spec; omitted keys take their defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "world")]
        out: PathBuf,
    },
    /// Run the full analysis described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set tau_add=0.6`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Weekly counts of influencer retweets of one party's politicians.
    Timeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_party)]
        party: Party,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print a readable digest of a finished run.
    Report {
        /// Output directory of a run, or its summary.json.
        path: PathBuf,
    },
}

/// An error the user can fix by changing inputs or flags.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn parse_party(s: &str) -> Result<Party, String> {
    match s.parse::<Party>() {
        Ok(p @ (Party::Bjp | Party::Inc)) => Ok(p),
        _ => Err(format!("expected BJP or INC, got `{s}`")),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let validation = err.chain().any(|e| {
        e.downcast_ref::<Invalid>().is_some() || e.downcast_ref::<Error>().is_some_and(Error::is_validation)
    });
    if validation {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate { spec, seed, out } => cmd_generate(spec.as_deref(), seed, &out),
        Command::Run { config, overrides } => cmd_run(&config, &overrides),
        Command::Timeline {
            config,
            party,
            overrides,
            output,
        } => cmd_timeline(&config, party, &overrides, output.as_deref()),
        Command::Report { path } => cmd_report(&path),
    }
}

fn cmd_generate(spec_path: Option<&Path>, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Invalid(format!("{}: {e}", p.display())))?;
            WorldSpec::from_toml(&text)?
        }
        None => WorldSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate().map_err(|e| Invalid(e.to_string()))?;
    eprintln!("generating world (seed {})", spec.seed);
    let world = generate(&spec).context("datagen")?;
    world.write(out).context("writing world")?;
    fs::write(out.join("pipeline.toml"), spec.pipeline_toml())
        .with_context(|| format!("writing {}", out.join("pipeline.toml").display()))?;
    eprintln!(
        "wrote {} tweets and {} users to {}",
        world.corpus.tweets().len(),
        world.users().len(),
        out.display()
    );
    Ok(())
}

fn cmd_run(config: &Path, overrides: &[String]) -> anyhow::Result<()> {
    let config = PipelineConfig::load(config, overrides)?;
    let started = std::time::Instant::now();
    let output = run_with_progress(&config, |stage| {
        eprintln!("[{:>7.1}s] {stage}", started.elapsed().as_secs_f64());
    })?;
    for w in &output.summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", config.output_dir.join("summary.json").display());
    Ok(())
}

fn cmd_timeline(config: &Path, party: Party, overrides: &[String], output: Option<&Path>) -> anyhow::Result<()> {
    let config = PipelineConfig::load(config, overrides)?;
    let users = UserTable::from_csv(config.users.as_ref().expect("validated"))?;
    let corpus = ingest_tweets(config.tweets.as_ref().expect("validated"), InputFormat::Jsonl, users)?;
    let series = timeline(&corpus, party);
    match output {
        Some(p) => write_atomic(p, |w| write_timeline_csv(w, &series))?,
        None => write_timeline_csv(std::io::stdout().lock(), &series)?,
    }
    if let Some(peak) = series.peak_week() {
        eprintln!("peak week: {peak}");
    }
    Ok(())
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) if x.fract() == 0.0 && x.abs() < 1e15 => format!("{x}"),
        Some(x) => format!("{x:.4}"),
        None if v.is_null() => "n/a".into(),
        None => v.to_string(),
    }
}

fn cmd_report(path: &Path) -> anyhow::Result<()> {
    let file = if path.is_dir() { path.join("summary.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| Invalid(format!("{}: {e}", file.display())))?;
    let s: Value = serde_json::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", file.display())))?;
    let out = &mut std::io::stdout().lock();
    render_report(out, &s).map_err(|e| anyhow!(e))
}

fn render_report(out: &mut impl Write, s: &Value) -> std::io::Result<()> {
    writeln!(out, "config {}", s["config_hash"].as_str().unwrap_or("?"))?;
    writeln!(
        out,
        "{} tweets ({} skipped), {} users, {} word vectors, embeddings: {}",
        num(&s["tweets_loaded"]),
        num(&s["tweets_skipped"]),
        num(&s["users"]),
        num(&s["word_vectors"]),
        s["embedding_provider"].as_str().unwrap_or("?")
    )?;
    if let Some(lex) = s["lexicons"].as_object() {
        writeln!(out, "\nlexicons")?;
        for (event, l) in lex {
            writeln!(
                out,
                "  {event:<16} seeds {:>3}  expanded {:>3}  rounds {}  tweets {}",
                num(&l["seeds"]),
                num(&l["expanded"]),
                num(&l["rounds_run"]),
                num(&l["classified_tweets"])
            )?;
        }
    }
    if let Some(events) = s["events"].as_object() {
        for (event, e) in events {
            writeln!(out, "\n{event}")?;
            writeln!(
                out,
                "  users {}  clusters {}  noise {}  sides {}",
                num(&e["users_embedded"]),
                num(&e["clusters"]),
                num(&e["noise_users"]),
                e["side_sizes"]
            )?;
            writeln!(
                out,
                "  graph {} vertices / {} edges, hitting {}  scored r {}  c {}",
                num(&e["graph_vertices"]),
                num(&e["graph_edges"]),
                e["hitting_method"].as_str().unwrap_or("?"),
                num(&e["retweet_scored"]),
                num(&e["content_scored"])
            )?;
            if let Some(rows) = e["categories"]["rows"].as_array() {
                writeln!(out, "  {:<14} {:>8} {:>8} {:>10} {:>4}", "category", "med r", "med |c|", "med rts", "n")?;
                for r in rows {
                    writeln!(
                        out,
                        "  {:<14} {:>8} {:>8} {:>10} {:>4}",
                        r["category"].as_str().unwrap_or("?"),
                        num(&r["median_r"]),
                        num(&r["median_abs_c"]),
                        num(&r["median_retweets"]),
                        num(&r["n"])
                    )?;
                }
            }
        }
    }
    let stats = &s["stats"];
    writeln!(out, "\ninfluencers with aggregate polarity: {}", num(&stats["influencers_scored"]))?;
    if let Some(f) = stats["followers"].as_object() {
        for (name, a) in f {
            let anova = &a["anova"];
            writeln!(
                out,
                "  {name}: ANOVA F = {}, p = {}",
                num(&anova["f"]),
                num(&anova["p_value"])
            )?;
        }
    }
    if let Some(r) = stats["regression"].as_object() {
        for (name, fit) in r {
            let names = fit["names"].as_array().cloned().unwrap_or_default();
            let coefs = fit["coefficients"].as_array().cloned().unwrap_or_default();
            let ses = fit["std_errors"].as_array().cloned().unwrap_or_default();
            write!(out, "  OLS on {name}:")?;
            for ((n, c), se) in names.iter().zip(&coefs).zip(&ses) {
                write!(out, " {}={} ({})", n.as_str().unwrap_or("?"), num(c), num(se))?;
            }
            writeln!(out, "  R2={}", num(&fit["r_squared"]))?;
        }
    }
    let rate = &stats["retweet_rate"];
    writeln!(
        out,
        "  top-quartile cohort: {} of {} earn more per event tweet (fraction {})",
        num(&rate["cohort_event_higher"]),
        num(&rate["cohort_size"]),
        num(&rate["fraction"])
    )?;
    if let Some(t) = s["table1"].as_object() {
        writeln!(out, "\nretweets of politicians  [1,50] (50,100] (100,150] (150,max]  max")?;
        for (party, h) in t {
            let b = h["buckets"].as_array().cloned().unwrap_or_default();
            let b: Vec<String> = b.iter().map(num).collect();
            writeln!(out, "  {party:<6} {}  {}", b.join(" "), num(&h["max"]))?;
        }
    }
    if let Some(p) = s["timeline_peaks"].as_object() {
        for (party, w) in p {
            writeln!(out, "  {party} timeline peak: {}", w.as_str().unwrap_or("n/a"))?;
        }
    }
    if let Some(w) = s["warnings"].as_array() {
        if !w.is_empty() {
            writeln!(out, "\n{} warnings", w.len())?;
            for x in w {
                writeln!(out, "  {}", x.as_str().unwrap_or(""))?;
            }
        }
    }
    Ok(())
}
