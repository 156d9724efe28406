//! `poise`: run estimator searches, inspect archives and the bundled
//! results fixture.

mod report;

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use poise_core::acquisition::{fit_archive_model, score_node, Scorer};
use poise_core::archive::{to_dot, LineageTree};
use poise_core::estimators::{compute_advantages, Algorithm, EstimatorConfig, RewardGroup};
use poise_core::proposal::{ProposerEndpoint, Transport};
use poise_core::search::{resume, run, Constraint, RunConfig};
use poise_core::{Archive, Curriculum, PaperResults};
use serde_json::Value;

use report::{Format, ReportKind, Table};

#[derive(Parser)]
#[command(name = "poise", version, about = "Closed-loop search over group-relative advantage estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where read-only commands take their lineage from.
#[derive(clap::Args)]
struct Source {
    /// Archive file written by `poise run`.
    #[arg(long, default_value = "archive.jsonl")]
    archive: PathBuf,
    /// Read the results fixture instead of an archive; without a path the
    /// bundled copy is used.
    #[arg(long, num_args = 0..=1, value_name = "PATH", conflicts_with = "archive")]
    fixture: Option<Option<PathBuf>>,
}

enum Loaded {
    Archive(Archive),
    Fixture(PaperResults),
}

impl Source {
    fn load(&self) -> Result<Loaded> {
        match &self.fixture {
            Some(path) => Ok(Loaded::Fixture(load_fixture(path.as_deref())?)),
            None => Ok(Loaded::Archive(load_archive(&self.archive)?)),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the discovery loop and write the archive.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        generations: Option<u64>,
        /// Output archive; overrides the config's `archive_path`.
        #[arg(long)]
        archive: Option<PathBuf>,
        #[arg(long)]
        constraint: Option<Constraint>,
        /// Training steps per candidate.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        group_size: Option<usize>,
        /// Continue an existing archive instead of starting from the root.
        #[arg(long)]
        resume: bool,
        /// Suppress the JSON progress events on stderr.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Depth frontier, parent retention or length trade-off tables.
    Report {
        #[arg(long, value_enum)]
        kind: ReportKind,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        source: Source,
    },
    /// Acquisition score breakdown for one node, or every node.
    Score {
        #[arg(long, default_value = "archive.jsonl")]
        archive: PathBuf,
        #[arg(long)]
        node: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Advantages for a reward group read from stdin as JSON.
    ///
    /// Accepts a group object (`prompt_id`, `samples`), a list of groups,
    /// `{"rewards": [...]}` or a bare list of rewards.
    Estimate {
        #[arg(value_parser = parse_algorithm)]
        estimator: Algorithm,
        /// Coefficient override, e.g. `--param clip_hi=2`.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
    /// Load and cross-check the results fixture.
    Fixtures {
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Render the lineage in another format.
    Export {
        #[arg(value_enum)]
        kind: ExportKind,
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportKind {
    Dot,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse::<Algorithm>().map_err(|_| {
        let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
        format!("unknown estimator `{s}` (expected one of {})", names.join(", "))
    })
}

fn load_archive(path: &Path) -> Result<Archive> {
    Archive::load(path).with_context(|| format!("cannot load archive {}", path.display()))
}

fn load_fixture(path: Option<&Path>) -> Result<PaperResults> {
    match path {
        Some(p) => PaperResults::load(p).with_context(|| format!("cannot load fixture {}", p.display())),
        None => Ok(PaperResults::embedded()?),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: Option<PathBuf>,
    seed: Option<u64>,
    generations: Option<u64>,
    archive: Option<PathBuf>,
    constraint: Option<Constraint>,
    steps: Option<u64>,
    group_size: Option<usize>,
    resume_existing: bool,
    quiet: bool,
) -> Result<()> {
    let mut cfg = match &config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(g) = generations {
        cfg.generations = g;
    }
    if let Some(c) = constraint {
        cfg.constraint = c;
    }
    if let Some(s) = steps {
        cfg.trainer.steps = s;
    }
    if let Some(g) = group_size {
        cfg.trainer.group_size = g;
    }
    let path = archive
        .or(cfg.archive_path.take())
        .unwrap_or_else(|| PathBuf::from("archive.jsonl"));
    cfg.archive_path = Some(path.clone());
    cfg.validate()?;

    let endpoint = ProposerEndpoint::from_env();
    let proposer = endpoint.as_ref().map(|e| e as &(dyn Transport + Sync));
    let curriculum = Curriculum::standard(cfg.seed);
    let stderr = io::stderr();
    let mut log = |event: &poise_core::search::ProgressEvent| {
        if !quiet {
            let line = serde_json::to_string(event).expect("event serializes");
            let _ = writeln!(stderr.lock(), "{line}");
        }
    };
    let out = if resume_existing {
        resume(load_archive(&path)?, &cfg, &curriculum, proposer, &mut log)?
    } else {
        run(&cfg, &curriculum, proposer, &mut log)?
    };
    out.save(&path)?;

    let best = out
        .entries()
        .iter()
        .max_by(|a, b| a.utility.total_cmp(&b.utility))
        .context("archive is empty")?;
    println!(
        "best {} {} overall {:.1} utility {:.1}; {} entries in {}",
        best.node_id,
        best.genome.descriptor,
        best.metrics.overall,
        best.utility,
        out.len(),
        path.display()
    );
    Ok(())
}

fn cmd_score(archive: &Path, node: Option<&str>, format: Format) -> Result<String> {
    let archive = load_archive(archive)?;
    if archive.is_empty() {
        bail!("archive is empty");
    }
    let w = Default::default();
    let model = fit_archive_model(&archive, &w)?;
    let rows = match node {
        Some(id) => vec![score_node(&archive, id, model.as_ref(), &w)?],
        None => {
            let scorer = Scorer::new(&archive, model.as_ref(), &w);
            (0..archive.len()).map(|i| scorer.score(i, &[])).collect()
        }
    };
    let mut t = Table::new(&["node_id", "u_pareto", "u_perf", "u_div", "alpha_gp", "score"]);
    for r in rows {
        t.push(vec![
            r.node_id.into(),
            report::fixed(r.u_pareto, 3),
            report::fixed(r.u_perf, 3),
            report::fixed(r.u_div, 3),
            report::fixed(r.alpha_gp, 3),
            report::fixed(r.score, 3),
        ]);
    }
    Ok(t.render(format))
}

fn parse_groups(text: &str) -> Result<(Vec<RewardGroup>, bool)> {
    let v: Value = serde_json::from_str(text).context("stdin is not valid JSON")?;
    let rewards = |v: &Value| -> Result<Vec<f64>> {
        serde_json::from_value(v.clone()).context("rewards must be a list of numbers")
    };
    match &v {
        Value::Array(items) if items.iter().all(Value::is_number) => {
            Ok((vec![RewardGroup::from_binary("stdin", &rewards(&v)?)], false))
        }
        Value::Array(_) => Ok((serde_json::from_value(v).context("expected a list of reward groups")?, true)),
        Value::Object(o) if o.contains_key("rewards") => {
            Ok((vec![RewardGroup::from_binary("stdin", &rewards(&o["rewards"])?)], false))
        }
        Value::Object(_) => Ok((vec![serde_json::from_value(v).context("expected a reward group")?], false)),
        _ => bail!("expected a reward group, a list of groups or a list of rewards"),
    }
}

fn cmd_estimate(algorithm: Algorithm, params: &[String], input: &str) -> Result<String> {
    let mut cfg = EstimatorConfig::for_algorithm(algorithm);
    for p in params {
        let (key, value) = p.split_once('=').with_context(|| format!("`{p}` is not KEY=VALUE"))?;
        let value: f64 = value.trim().parse().with_context(|| format!("`{value}` is not a number"))?;
        cfg.set(key.trim(), value)?;
    }
    cfg.validate()?;
    let (groups, batch) = parse_groups(input)?;
    let out = compute_advantages(&groups, &cfg)?;
    let text = if batch {
        serde_json::to_string(&out)?
    } else {
        serde_json::to_string(&out[0])?
    };
    Ok(text)
}

fn cmd_fixtures(path: Option<&Path>, format: Format) -> Result<String> {
    let f = load_fixture(path)?;
    let mut t = Table::new(&["name", "overall", "recomputed", "parent"]);
    for r in &f.rows {
        t.push(vec![
            r.name.clone().into(),
            report::fixed(r.overall, 1),
            report::fixed(r.recomputed_overall(), 1),
            r.parent.clone().unwrap_or_default().into(),
        ]);
    }
    eprintln!("{} rows loaded; every Overall within ±0.05 of its recomputed value", f.rows.len());
    Ok(t.render(format))
}

fn cmd_export(source: &Source) -> Result<String> {
    let tree: LineageTree = match source.load()? {
        Loaded::Archive(a) => a.lineage().clone(),
        Loaded::Fixture(f) => f.lineage()?,
    };
    Ok(to_dot(&tree))
}

fn dispatch(cli: Cli) -> Result<Option<String>> {
    match cli.command {
        Command::Run {
            config,
            seed,
            generations,
            archive,
            constraint,
            steps,
            group_size,
            resume,
            quiet,
        } => {
            cmd_run(config, seed, generations, archive, constraint, steps, group_size, resume, quiet)?;
            Ok(None)
        }
        Command::Report { kind, format, source } => {
            let table = match source.load()? {
                Loaded::Archive(a) => report::from_archive(&a, kind)?,
                Loaded::Fixture(f) => report::from_fixture(&f, kind)?,
            };
            Ok(Some(table.render(format)))
        }
        Command::Score { archive, node, format } => cmd_score(&archive, node.as_deref(), format).map(Some),
        Command::Estimate { estimator, params } => {
            let mut input = String::new();
            io::stdin().read_to_string(&mut input).context("cannot read stdin")?;
            cmd_estimate(estimator, &params, &input).map(Some)
        }
        Command::Fixtures { path, format } => cmd_fixtures(path.as_deref(), format).map(Some),
        Command::Export { kind: ExportKind::Dot, source } => cmd_export(&source).map(Some),
    }
}

/// The error chain joined with `: `, skipping causes whose text an outer
/// message already includes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn parse_args() -> Cli {
    use clap::error::ErrorKind;
    use clap::CommandFactory;
    Cli::try_parse().unwrap_or_else(|e| {
        let _ = e.print();
        if matches!(e.kind(), ErrorKind::InvalidValue | ErrorKind::ValueValidation) {
            eprintln!("\n{}", Cli::command().render_usage());
        }
        std::process::exit(e.exit_code())
    })
}

fn main() -> ExitCode {
    match dispatch(parse_args()) {
        Ok(output) => {
            if let Some(text) = output {
                print!("{text}");
                if !text.ends_with('\n') {
                    println!();
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
