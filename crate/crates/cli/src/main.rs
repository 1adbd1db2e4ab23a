use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use jsprune_core::cache::{capture, import_dir, serve, CaptureOptions, PageSnapshot, Variant};
use jsprune_core::pipeline::{
    discover_snapshot, finish, instrument_snapshot, load_discovery, load_report, run_many, save_discovery, Backend,
    PipelineConfig,
};
use jsprune_core::report::{aggregate, EliminationReport, StageDurations};

/// Exit status when every code file had to be skipped.
const EXIT_NO_FILES: u8 = 2;
/// Exit status when discovery stopped early and nothing was eliminated.
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "jsprune", version, about = "Remove JavaScript functions a page never runs")]
struct Cli {
    /// More log output; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch a page and its resources into a snapshot directory.
    Capture {
        url: String,
        #[arg(long)]
        out: PathBuf,
        /// Domains whose scripts may be rewritten (default: the page's host).
        #[arg(long, value_delimiter = ',')]
        first_party: Vec<String>,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
    },
    /// Build a snapshot from a directory of files.
    Import {
        dir: PathBuf,
        /// URL the directory is served under.
        #[arg(long)]
        origin: String,
        /// The document, relative to the directory.
        #[arg(long, default_value = "index.html")]
        page: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        first_party: Vec<String>,
        /// Page script for the simulated backend, copied into the snapshot.
        #[arg(long)]
        sim_script: Option<PathBuf>,
    },
    /// Scan first-party code and store probed copies.
    Instrument {
        snapshot: PathBuf,
        #[command(flatten)]
        opts: StageOpts,
    },
    /// Explore the probed page and record which functions ran.
    Discover {
        snapshot: PathBuf,
        #[command(flatten)]
        opts: StageOpts,
    },
    /// Remove unused functions using the recorded discovery.
    Eliminate {
        snapshot: PathBuf,
        #[command(flatten)]
        opts: StageOpts,
    },
    /// Every stage, on one or more snapshots.
    Run {
        #[arg(required = true)]
        snapshots: Vec<PathBuf>,
        #[command(flatten)]
        opts: StageOpts,
    },
    /// Serve a snapshot over HTTP until interrupted.
    Serve {
        snapshot: PathBuf,
        #[arg(long, value_enum, default_value_t = VariantArg::Original)]
        variant: VariantArg,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Print reports, or their distribution with --aggregate.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        aggregate: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Original,
    Instrumented,
    Eliminated,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Original => Variant::Original,
            VariantArg::Instrumented => Variant::Instrumented,
            VariantArg::Eliminated => Variant::Eliminated,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Sim,
    Cdp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Settings shared by the stage commands; flags override the config file.
#[derive(Args)]
struct StageOpts {
    /// TOML file with pipeline settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    sim_script: Option<PathBuf>,
    #[arg(long)]
    cdp_endpoint: Option<String>,
    #[arg(long)]
    probe_token: Option<String>,
    #[arg(long)]
    settle_ms: Option<u64>,
    #[arg(long)]
    max_triggers: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

impl StageOpts {
    fn config(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(b) = self.backend {
            c.backend = match b {
                BackendArg::Sim => Backend::Sim,
                BackendArg::Cdp => Backend::Cdp,
            };
        }
        if let Some(p) = &self.sim_script {
            c.sim_script = Some(p.clone());
        }
        if let Some(e) = &self.cdp_endpoint {
            c.cdp_endpoint = Some(e.clone());
        }
        if let Some(t) = &self.probe_token {
            c.probe_token = t.clone();
        }
        if let Some(s) = self.settle_ms {
            c.settle_ms = s;
        }
        if let Some(m) = self.max_triggers {
            c.max_triggers = m;
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        Ok(c)
    }
}

fn open(dir: &Path) -> Result<PageSnapshot> {
    PageSnapshot::open(dir).with_context(|| format!("opening snapshot {}", dir.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn print_report(r: &EliminationReport, format: Format) -> Result<()> {
    if format == Format::Json {
        return print_json(r);
    }
    let p = &r.page;
    println!("{}", p.url);
    println!(
        "  functions: {} of {} eliminated ({:.1}%)",
        p.eliminated_functions,
        p.total_functions,
        p.eliminated_fraction * 100.0
    );
    println!(
        "  bytes: {} of {} removed ({:.1}% of script)",
        p.removed_bytes,
        p.original_bytes + p.skipped_bytes,
        p.removed_fraction * 100.0
    );
    println!("  time: {} ms", p.duration_ms);
    for f in &r.per_file {
        println!(
            "  {:<40} {:>5}/{:<5} fn  -{} B",
            f.file, f.eliminated_functions, f.total_functions, f.removed_bytes
        );
    }
    for s in &r.skipped_files {
        println!("  skipped {} ({})", s.url, s.reason);
    }
    if !r.discovery_complete {
        println!("  discovery incomplete: nothing eliminated");
    }
    Ok(())
}

/// The exit status a finished report calls for.
fn status_of(r: &EliminationReport) -> u8 {
    if !r.discovery_complete {
        EXIT_PARTIAL
    } else if r.per_file.is_empty() && !r.skipped_files.is_empty() {
        EXIT_NO_FILES
    } else {
        0
    }
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Capture {
            url,
            out,
            first_party,
            timeout_secs,
        } => {
            let options = CaptureOptions {
                out,
                first_party,
                timeout: Duration::from_secs(timeout_secs),
            };
            let snap = capture(&url, &options)?;
            summarize_capture(&snap);
            Ok(0)
        }
        Command::Import {
            dir,
            origin,
            page,
            out,
            first_party,
            sim_script,
        } => {
            let mut options = CaptureOptions::new(&out);
            options.first_party = first_party;
            let snap = import_dir(&dir, &origin, &page, &options)?;
            if let Some(script) = sim_script {
                std::fs::copy(&script, out.join(jsprune_core::pipeline::SIM_SCRIPT_FILE))
                    .with_context(|| format!("copying {}", script.display()))?;
            }
            summarize_capture(&snap);
            Ok(0)
        }
        Command::Instrument { snapshot, opts } => {
            let config = opts.config()?;
            let mut snap = open(&snapshot)?;
            let summary = instrument_snapshot(&mut snap, &config.probe_token)?;
            if opts.format == Format::Json {
                print_json(&summary)?;
            } else {
                println!("instrumented {} files, {} functions", summary.files, summary.functions);
                for s in &summary.skipped {
                    println!("skipped {} ({})", s.url, s.reason);
                }
            }
            Ok(if summary.files == 0 && !summary.skipped.is_empty() {
                EXIT_NO_FILES
            } else {
                0
            })
        }
        Command::Discover { snapshot, opts } => {
            let config = opts.config()?;
            let snap = open(&snapshot)?;
            let result = discover_snapshot(&snap, &config)?;
            save_discovery(&snapshot, &result)?;
            if opts.format == Format::Json {
                print_json(&result)?;
            } else {
                println!(
                    "{} events, {} orphans, {} functions ran, {} triggers",
                    result.tree.len(),
                    result.tree.orphans().len(),
                    result.used.len(),
                    result.stats.triggers
                );
            }
            Ok(if result.complete { 0 } else { EXIT_PARTIAL })
        }
        Command::Eliminate { snapshot, opts } => {
            let mut snap = open(&snapshot)?;
            let saved = load_discovery(&snapshot).context("run `discover` first")?;
            let report = finish(&mut snap, &saved.used, saved.complete, StageDurations::default())?;
            print_report(&report, opts.format)?;
            Ok(status_of(&report))
        }
        Command::Run { snapshots, opts } => {
            let config = opts.config()?;
            let mut status = 0;
            let runs = run_many(&snapshots, &config)?;
            let mut reports = Vec::new();
            for (dir, run) in snapshots.iter().zip(runs) {
                match run {
                    Ok(r) => {
                        status = status.max(status_of(&r.report));
                        reports.push(r.report);
                    }
                    Err(e) => {
                        eprintln!("{}: {e:#}", dir.display());
                        status = status.max(1);
                    }
                }
            }
            if opts.format == Format::Json {
                print_json(&reports)?;
            } else {
                for r in &reports {
                    print_report(r, Format::Text)?;
                }
            }
            // A failed page is an error only when no page could be processed.
            if status == 1 && !reports.is_empty() {
                status = EXIT_PARTIAL;
            }
            Ok(status)
        }
        Command::Serve {
            snapshot,
            variant,
            port,
            host,
        } => {
            let snap = open(&snapshot)?;
            let server = serve(&snap, variant.into(), &format!("{host}:{port}"))?;
            println!("serving {} at {}", Variant::from(variant), server.page_url());
            loop {
                std::thread::park();
            }
        }
        Command::Report {
            reports,
            aggregate: agg,
            format,
        } => {
            let loaded = reports
                .iter()
                .map(|p| load_report(p).with_context(|| format!("loading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            for r in &loaded {
                r.check()?;
            }
            if agg {
                let d = aggregate(&loaded)?;
                if format == Format::Json {
                    print_json(&d)?;
                } else {
                    println!("pages: {}", d.pages);
                    for (name, s) in [
                        ("eliminated functions", &d.eliminated_functions),
                        ("eliminated fraction", &d.eliminated_fraction),
                        ("removed bytes", &d.removed_bytes),
                        ("duration ms", &d.duration_ms),
                    ] {
                        println!(
                            "{name}: min {} median {} max {} mean {:.3}",
                            s.min, s.median, s.max, s.mean
                        );
                    }
                }
            } else {
                if loaded.is_empty() {
                    bail!("no reports given");
                }
                for r in &loaded {
                    print_report(r, format)?;
                }
            }
            Ok(0)
        }
    }
}

fn summarize_capture(snap: &PageSnapshot) {
    println!(
        "{} resources, {} eligible, {} skipped, {} errors -> {}",
        snap.manifest.entries.len(),
        snap.eligible().len(),
        snap.skipped().len(),
        snap.manifest.capture_errors.len(),
        snap.dir().display()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
