use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use coreshift::config::Settings;
use coreshift::extract::{scan_imports, serialize_edge_list, LanguageProfile};
use coreshift::pipeline::{exit_code, run_pipeline};

#[derive(Parser)]
#[command(name = "coreshift", version, about = "Core-periphery shift analysis of a project's history")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a source tree for imports and write a module edge list.
    Extract {
        #[arg(long)]
        src: PathBuf,
        #[arg(long, default_value = "java")]
        profile: String,
        #[arg(long)]
        out: PathBuf,
        /// TOML file with `[profiles.NAME]` tables.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Cluster the dependency matrix, track CPDM across windows, classify the trend.
    Analyze(Box<AnalyzeArgs>),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// TOML file with default values for any of these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    project: Option<String>,
    /// Edge list: `source<TAB>target` per line.
    #[arg(long, conflicts_with = "src")]
    deps: Option<PathBuf>,
    /// Source tree to scan instead of an edge list.
    #[arg(long)]
    src: Option<PathBuf>,
    #[arg(long, conflicts_with = "touch_tsv")]
    git_log: Option<PathBuf>,
    /// `timestamp<TAB>author<TAB>path` rows.
    #[arg(long)]
    touch_tsv: Option<PathBuf>,
    /// Language profile for path mapping and source scans [default: java].
    #[arg(long)]
    profile: Option<String>,
    /// Number of clusters [default: 9].
    #[arg(long)]
    clusters: Option<usize>,
    /// Size penalty exponent [default: 2].
    #[arg(long)]
    lambda: Option<u32>,
    /// Vertical-bus fan-in share [default: 0.25].
    #[arg(long)]
    bus_threshold: Option<f64>,
    /// [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// [default: 10]
    #[arg(long)]
    restarts: Option<usize>,
    /// Stop a restart after this many proposals without an accepted bid
    /// [default: twice the non-bus module count].
    #[arg(long)]
    stability_window: Option<usize>,
    /// Window length, e.g. 30d, 2w, 12h.
    #[arg(long, conflicts_with = "windows")]
    interval: Option<String>,
    /// Number of equal windows [default: 10].
    #[arg(long)]
    windows: Option<usize>,
    /// disjoint or cumulative [default: disjoint].
    #[arg(long)]
    window_mode: Option<String>,
    /// Count each touched cluster once per developer and window.
    #[arg(long)]
    binary_touches: bool,
    #[arg(long)]
    recluster_per_window: bool,
    /// [default: 0.05]
    #[arg(long)]
    slope_eps: Option<f64>,
    /// [default: 0.10]
    #[arg(long)]
    amp_eps: Option<f64>,
    /// Measured windows needed for a label [default: 3].
    #[arg(long)]
    min_points: Option<usize>,
    /// Exit with status 3 when the shift-away flag is raised.
    #[arg(long)]
    fail_on_stsc: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl AnalyzeArgs {
    fn settings(self) -> Settings {
        let flag = |b: bool| b.then_some(true);
        Settings {
            project: self.project,
            deps: self.deps,
            src: self.src,
            git_log: self.git_log,
            touch_tsv: self.touch_tsv,
            profile: self.profile,
            clusters: self.clusters,
            lambda: self.lambda,
            bus_threshold: self.bus_threshold,
            seed: self.seed,
            restarts: self.restarts,
            stability_window: self.stability_window,
            interval: self.interval,
            windows: self.windows,
            window_mode: self.window_mode,
            binary_touches: flag(self.binary_touches),
            recluster_per_window: flag(self.recluster_per_window),
            slope_eps: self.slope_eps,
            amp_eps: self.amp_eps,
            min_points: self.min_points,
            fail_on_stsc: flag(self.fail_on_stsc),
            out_dir: self.out_dir,
            profiles: Default::default(),
        }
    }
}

fn load_settings(path: Option<&PathBuf>) -> coreshift::Result<Settings> {
    path.map(|p| Settings::load(p)).transpose().map(Option::unwrap_or_default)
}

fn extract(src: PathBuf, profile: String, out: PathBuf, config: Option<PathBuf>) -> anyhow::Result<()> {
    let settings = load_settings(config.as_ref())?;
    let profile = LanguageProfile::resolve(&profile, &settings.profiles)?;
    let (graph, scan) = scan_imports(&src, &profile)?;
    std::fs::write(&out, serialize_edge_list(&graph)).with_context(|| format!("writing {}", out.display()))?;
    eprint!("{}", scan.render());
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> i32 {
    let settings = match load_settings(args.config.as_ref()) {
        Ok(file) => file.overlay(args.settings()),
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let fail_on_stsc = settings.fail_on_stsc.unwrap_or(false);
    let outcome = settings.to_pipeline_config().and_then(|c| {
        if c.out_dir.is_none() {
            return Err(coreshift::Error::Config("missing --out-dir".into()));
        }
        run_pipeline(&c)
    });
    match &outcome {
        Ok(out) => {
            let s = &out.report.shift;
            println!(
                "{}: {} (slope {:.4}, reversals {}, touched zero: {}, stsc: {})",
                out.report.project, s.label, s.slope, s.reversals, s.touched_zero, s.stsc_flag
            );
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&outcome, fail_on_stsc)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Extract { src, profile, out, config } => match extract(src, profile, out, config) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e:#}");
                match e.downcast_ref::<coreshift::Error>() {
                    Some(inner) if inner.is_input_error() => 2,
                    _ => 1,
                }
            }
        },
        Command::Analyze(args) => analyze(*args),
    };
    ExitCode::from(code as u8)
}
