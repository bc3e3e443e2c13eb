use std::fs;
use std::io::Read;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use roomforge::backend::{Generator, MockBackend, RemoteBackend, RemoteConfig};
use roomforge::config::PipelineConfig;
use roomforge::constraints::validate;
use roomforge::dataset::Dataset;
use roomforge::level::{parse_level, serialize_level, Grid};
use roomforge::metrics::{is_novel, RoundStats};
use roomforge::pipeline::{read_report, summarize_rounds, Pipeline};
use roomforge::synth;
use roomforge_cli::serve;

#[derive(Parser)]
#[command(name = "roomforge", version, about = "Generate, validate and bootstrap tile-based rooms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Dataset directory; `report` accepts several.
    #[arg(long, global = true)]
    dataset: Vec<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = BackendChoice::Mock)]
    backend: BackendChoice,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    novelty_fraction: Option<f64>,
    /// Rounds to run in this invocation.
    #[arg(long, global = true)]
    rounds: Option<usize>,
    #[arg(long, global = true)]
    gen_per_round: Option<usize>,
    /// Fine-tune epochs for the stage being run.
    #[arg(long, global = true)]
    epochs: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    Mock,
    Remote,
}

#[derive(Subcommand)]
enum Command {
    /// Create a dataset from level files or synthetic rooms.
    Init {
        /// Level files, or directories of `.lvl`/`.txt` files.
        #[arg(long = "from")]
        from: Vec<PathBuf>,
        /// Add this many generated two-pattern rooms.
        #[arg(long)]
        synthetic: Option<usize>,
    },
    /// Run stage-1 rounds, queueing repair tickets.
    Stage1,
    /// Write pending tickets as level files for offline editing.
    RepairExport {
        #[arg(long)]
        out: PathBuf,
    },
    /// Submit edited ticket files written by `repair-export`.
    RepairImport {
        #[arg(long = "from")]
        from: PathBuf,
        /// Discard tickets still pending after the import.
        #[arg(long)]
        discard_rest: bool,
    },
    /// Expand the dataset with flips, rotation and pattern swaps.
    Augment,
    /// Run automated stage-2 rounds.
    Stage2,
    /// Print the round report of one or more datasets.
    Report,
    /// Serve the repair-queue API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory of static files for the editor.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Check a level file; exit status 1 when it is not playable.
    Validate {
        /// Level file, or `-` for stdin.
        file: PathBuf,
    },
    /// Check a level file against a dataset; exit status 1 when it is not novel.
    Novelty { file: PathBuf },
}

impl Cli {
    fn dataset(&self) -> Result<&Path> {
        match self.dataset.as_slice() {
            [one] => Ok(one),
            [] => bail!("--dataset is required"),
            _ => bail!("this command takes a single --dataset"),
        }
    }

    fn apply(&self, mut config: PipelineConfig) -> PipelineConfig {
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.temperature {
            config.temperature = v;
        }
        if let Some(v) = self.novelty_fraction {
            config.novelty_fraction = v;
        }
        if let Some(v) = self.gen_per_round {
            config.gen_per_round = v;
        }
        config
    }

    fn open(&self) -> Result<Pipeline> {
        let dir = self.dataset()?;
        let mut pipeline = Pipeline::open(dir).with_context(|| format!("opening {}", dir.display()))?;
        let config = self.apply(pipeline.config().clone());
        if &config != pipeline.config() {
            pipeline.set_config(config)?;
        }
        Ok(pipeline)
    }

    fn backend(&self) -> Result<Box<dyn Generator>> {
        Ok(match self.backend {
            BackendChoice::Mock => Box::new(MockBackend::new()),
            BackendChoice::Remote => Box::new(RemoteBackend::new(RemoteConfig::from_env()?)?),
        })
    }
}

fn read_level(path: &Path) -> Result<Grid> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    parse_level(&text).with_context(|| format!("parsing {}", path.display()))
}

fn level_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "lvl" || e == "txt"));
    files.sort();
    Ok(files)
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Init { from, synthetic } => {
            let mut rooms = Vec::new();
            for path in from {
                for file in level_files(path)? {
                    rooms.push(read_level(&file)?);
                }
            }
            let config = cli.apply(PipelineConfig::default());
            if let Some(n) = synthetic {
                rooms.extend(synth::two_pattern_rooms(*n, config.seed));
            }
            if rooms.is_empty() {
                bail!("no rooms given; use --from or --synthetic");
            }
            let given = rooms.len();
            let dir = cli.dataset()?;
            let pipeline = Pipeline::init(dir, rooms, config)?;
            let failing = pipeline.dataset().entries().iter().filter(|e| !validate(&e.grid).passed()).count();
            println!(
                "initialized {} with {} rooms ({} duplicates skipped)",
                dir.display(),
                pipeline.dataset().len(),
                given - pipeline.dataset().len()
            );
            if failing > 0 {
                eprintln!("warning: {failing} rooms do not pass validation");
            }
        }
        Command::Stage1 => {
            let mut pipeline = cli.open()?;
            if let Some(epochs) = cli.epochs {
                pipeline.set_config(PipelineConfig {
                    stage1_epochs: epochs,
                    ..pipeline.config().clone()
                })?;
            }
            let backend = cli.backend()?;
            for _ in 0..cli.rounds.unwrap_or(1) {
                let o = pipeline.stage1_round(backend.as_ref())?;
                println!(
                    "round {}: {} generated, {} parsed, {} playable, {} added, {} tickets queued",
                    o.stats.round_index,
                    o.stats.n_generated,
                    o.stats.n_parsed,
                    o.stats.n_playable,
                    o.added.len(),
                    o.tickets.len()
                );
            }
            let (done, target) = (pipeline.state().stage1_accepted, pipeline.config().stage1_target_new);
            println!(
                "stage 1: {done}/{target} rooms accepted, {} tickets pending{}",
                pipeline.pending_tickets().count(),
                if done >= target { ", target reached" } else { "" }
            );
        }
        Command::RepairExport { out } => {
            let pipeline = cli.open()?;
            fs::create_dir_all(out)?;
            let mut n = 0;
            for t in pipeline.pending_tickets() {
                fs::write(out.join(format!("{}.lvl", t.ticket_id)), serialize_level(&t.original_grid, false))?;
                fs::write(
                    out.join(format!("{}.json", t.ticket_id)),
                    serde_json::to_string_pretty(&t.report)?,
                )?;
                n += 1;
            }
            println!("exported {n} pending tickets to {}", out.display());
        }
        Command::RepairImport { from, discard_rest } => {
            let mut pipeline = cli.open()?;
            let pending: Vec<(String, Grid)> = pipeline
                .pending_tickets()
                .map(|t| (t.ticket_id.clone(), t.original_grid.clone()))
                .collect();
            let (mut accepted, mut discarded) = (0, 0);
            for (id, original) in pending {
                let file = from.join(format!("{id}.lvl"));
                if file.exists() {
                    let grid = read_level(&file)?;
                    if grid != original {
                        let outcome = pipeline.submit_repair(&id, grid)?;
                        if outcome.accepted {
                            accepted += 1;
                            println!("{id}: accepted as {}", outcome.entry_id.unwrap_or_default());
                            continue;
                        }
                        let failed: Vec<String> = outcome.report.failed().map(|c| c.to_string()).collect();
                        println!(
                            "{id}: rejected (failed: [{}], novel: {})",
                            failed.join(", "),
                            outcome.novelty.is_novel
                        );
                    }
                }
                if *discard_rest {
                    pipeline.discard(&id)?;
                    discarded += 1;
                }
            }
            println!(
                "{accepted} accepted, {discarded} discarded, {} pending; stage 1: {}/{}",
                pipeline.pending_tickets().count(),
                pipeline.state().stage1_accepted,
                pipeline.config().stage1_target_new
            );
        }
        Command::Augment => {
            let mut pipeline = cli.open()?;
            let before = pipeline.dataset().len();
            let s = pipeline.augment()?;
            println!(
                "{before} -> {} entries ({} added, {} duplicates, {} unplayable, {} rotations without room for doors)",
                pipeline.dataset().len(),
                s.added,
                s.duplicates,
                s.dropped_unplayable,
                s.relocation_failures.len()
            );
        }
        Command::Stage2 => {
            let mut pipeline = cli.open()?;
            if let Some(epochs) = cli.epochs {
                pipeline.set_config(PipelineConfig {
                    stage2_epochs: epochs,
                    ..pipeline.config().clone()
                })?;
            }
            let backend = cli.backend()?;
            let rounds = cli.rounds.unwrap_or(pipeline.config().stage2_rounds);
            println!("{}", RoundStats::CSV_HEADER);
            for _ in 0..rounds {
                println!("{}", pipeline.stage2_round(backend.as_ref())?.csv_row());
            }
        }
        Command::Report => {
            if cli.dataset.is_empty() {
                bail!("--dataset is required");
            }
            let mut rows = Vec::new();
            for dir in &cli.dataset {
                rows.extend(read_report(dir)?);
            }
            println!("{}", RoundStats::CSV_HEADER);
            for row in &rows {
                println!("{}", row.csv_row());
            }
            println!();
            println!("round,runs,mean_playable_novel,min_playable_novel,max_playable_novel,mean_accuracy");
            for s in summarize_rounds(&rows) {
                println!(
                    "{},{},{:.2},{},{},{:.6}",
                    s.round, s.runs, s.mean_playable_novel, s.min_playable_novel, s.max_playable_novel, s.mean_accuracy
                );
            }
        }
        Command::Serve { addr, static_dir } => {
            let pipeline = cli.open()?;
            let app = serve::router(Arc::new(Mutex::new(pipeline)), static_dir.clone());
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("serving on http://{}", listener.local_addr()?);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
        Command::Validate { file } => {
            let report = validate(&read_level(file)?);
            print_json(&report)?;
            return Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Novelty { file } => {
            let grid = read_level(file)?;
            let dataset = Dataset::load(cli.dataset()?)?;
            let fraction = cli.novelty_fraction.unwrap_or(dataset.config.novelty_fraction);
            if !(fraction > 0.0 && fraction <= 1.0) {
                bail!("--novelty-fraction must be in (0, 1]");
            }
            let result = is_novel(&grid, &dataset, fraction);
            print_json(&result)?;
            return Ok(if result.is_novel { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
