//! Command-line surface.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use attnweb_core::analytics::{DEFAULT_BUCKETS, DEFAULT_MAX_SKEW_MS};
use attnweb_core::engine::NavigationPolarity;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{write_threshold, EngineSection, FileConfig};
use crate::{analyze, calibrate, fixtures, run, CliError};

#[derive(Debug, Parser)]
#[command(name = "attnweb", version, about = "EEG attention gateway")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve a source over WebSocket until interrupted.
    Run(RunArgs),
    /// Build per-page section profiles from session files.
    Analyze(AnalyzeArgs),
    /// Derive an attention threshold from a resting recording.
    Calibrate(CalibrateArgs),
    /// Regenerate the fixture corpus.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Polarity {
    HoldOnHigh,
    AdvanceOnHigh,
}

impl From<Polarity> for NavigationPolarity {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::HoldOnHigh => NavigationPolarity::HoldOnHigh,
            Polarity::AdvanceOnHigh => NavigationPolarity::AdvanceOnHigh,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct EngineFlags {
    #[arg(long, value_name = "N")]
    pub threshold: Option<i32>,
    #[arg(long, value_name = "MS")]
    pub hold_ms: Option<i64>,
    #[arg(long, value_name = "MS")]
    pub advance_period_ms: Option<i64>,
    #[arg(long, value_name = "N")]
    pub blink_delta: Option<i32>,
    #[arg(long, value_name = "MS")]
    pub double_blink_min_gap_ms: Option<i64>,
    #[arg(long, value_name = "MS")]
    pub double_blink_max_gap_ms: Option<i64>,
    #[arg(long, value_name = "N")]
    pub signal_quality_gate: Option<i32>,
    #[arg(long, value_enum)]
    pub polarity: Option<Polarity>,
    /// Compare blink strengths by absolute difference.
    #[arg(long)]
    pub absolute_blink_delta: bool,
    /// Disable the event engine.
    #[arg(long)]
    pub no_events: bool,
}

impl EngineFlags {
    pub fn section(&self) -> EngineSection {
        EngineSection {
            enabled: self.no_events.then_some(false),
            attention_threshold: self.threshold,
            hold_ms: self.hold_ms,
            advance_period_ms: self.advance_period_ms,
            blink_delta: self.blink_delta,
            double_blink_min_gap_ms: self.double_blink_min_gap_ms,
            double_blink_max_gap_ms: self.double_blink_max_gap_ms,
            signal_quality_gate: self.signal_quality_gate,
            polarity: self.polarity.map(Into::into),
            absolute_blink_delta: self.absolute_blink_delta.then_some(true),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// device:<path> | replay:<file>[@speed] | synth:<scenario>[@speed]
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long, value_name = "ADDR")]
    pub listen: Option<SocketAddr>,
    /// Session file to record.
    #[arg(long, value_name = "PATH")]
    pub record: Option<PathBuf>,
    /// Directory served at `/`.
    #[arg(long, value_name = "DIR")]
    pub ui_dir: Option<PathBuf>,
    #[arg(long)]
    pub buckets: Option<usize>,
    #[arg(long, value_name = "MS")]
    pub max_skew_ms: Option<i64>,
    #[arg(long)]
    pub queue_capacity: Option<usize>,
    #[command(flatten)]
    pub engine: EngineFlags,
    /// Replay on virtual time; pacing costs no wall time.
    #[arg(long)]
    pub virtual_clock: bool,
    /// Stamp replayed records with the clock instead of their own times.
    #[arg(long)]
    pub restamp: bool,
    /// Stop after the source ends and queues drain.
    #[arg(long)]
    pub exit_when_done: bool,
    /// Hold the source until this many streams are subscribed.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub wait_for_subscribers: usize,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(required = true, value_name = "SESSION")]
    pub sessions: Vec<PathBuf>,
    #[arg(long)]
    pub buckets: Option<usize>,
    #[arg(long, value_name = "MS")]
    pub max_skew_ms: Option<i64>,
    /// Write the merged profiles as JSON.
    #[arg(long, value_name = "PATH")]
    pub profile: Option<PathBuf>,
    /// Write CSV here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long, value_name = "MS", default_value_t = 20_000)]
    pub duration_ms: i64,
    /// Store the threshold in this config file (created if missing).
    #[arg(long, value_name = "PATH")]
    pub write_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FixturesArgs {
    #[arg(long, value_name = "DIR", default_value = "fixtures")]
    pub out: PathBuf,
}

fn warn(msg: &str) {
    let _ = writeln!(std::io::stderr(), "warning: {msg}");
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load_opt(cli.config.as_deref())?;
    match cli.command {
        Command::Run(args) => {
            let opts = run::options(&args, &file)?;
            let summary = run::serve(opts)?;
            tracing::info!(
                samples = summary.samples,
                events = summary.events,
                scrolls = summary.scrolls,
                records = summary.records,
                "gateway stopped"
            );
            Ok(())
        }
        Command::Analyze(args) => {
            let buckets = args.buckets.or(file.buckets).unwrap_or(DEFAULT_BUCKETS);
            let skew = args.max_skew_ms.or(file.max_skew_ms).unwrap_or(DEFAULT_MAX_SKEW_MS);
            let (doc, warnings) = analyze::analyze(&args.sessions, buckets, skew)?;
            for w in &warnings {
                warn(w);
            }
            if let Some(path) = &args.profile {
                analyze::write_profile(&doc, path)?;
            }
            match &args.csv {
                Some(path) => {
                    let f = std::fs::File::create(path)
                        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
                    analyze::write_csv(&doc, f)
                }
                None => analyze::write_csv(&doc, std::io::stdout().lock()),
            }
        }
        Command::Calibrate(args) => {
            let source = args
                .source
                .or(file.source)
                .ok_or_else(|| CliError::Usage("calibrate needs --source or `source` in the config".into()))?;
            let spec = run::parse_source(&source)?;
            let c = calibrate::run(&spec, args.duration_ms)?;
            if c.fell_back() {
                warn(&format!(
                    "only {} attention samples within {} ms; using the default threshold",
                    c.samples, args.duration_ms
                ));
            }
            println!("{}", c.threshold);
            if let Some(path) = &args.write_config {
                write_threshold(path, c.threshold)?;
            }
            Ok(())
        }
        Command::Fixtures(args) => {
            let written = fixtures::write_all(&args.out)?;
            tracing::info!(files = written.len(), out = %args.out.display(), "fixtures written");
            Ok(())
        }
    }
}
