//! Run settings shared by the TOML config file and the command line.
//!
//! Keys are the long flag names without the leading `--`, e.g. `bus-threshold = 0.3`.
//! Custom language profiles go under `[profiles.NAME]`. Flags override file
//! values; relative paths in a file resolve against the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::clustering::ClusteringParams;
use crate::coreness::TouchWeighting;
use crate::error::{Error, Result};
use crate::extract::ProfileSpec;
use crate::history::WindowSpec;
use crate::pipeline::{DepSource, HistorySource, PipelineConfig};
use crate::shift::ShiftThresholds;

/// Parses `90`, `45s`, `15m`, `12h`, `30d` or `2w` into seconds.
pub fn parse_duration(text: &str) -> Result<i64> {
    let text = text.trim();
    let bad = || Error::InvalidParameter(format!("bad duration `{text}` (expected e.g. 30d, 12h, 2w)"));
    let (digits, unit) = match text.find(|c: char| !c.is_ascii_digit()) {
        Some(at) => text.split_at(at),
        None => (text, "s"),
    };
    let value: i64 = digits.parse().map_err(|_| bad())?;
    let scale = match unit {
        "s" => 1,
        "m" => 60,
        "h" => 3600,
        "d" => 86_400,
        "w" => 7 * 86_400,
        _ => return Err(bad()),
    };
    match value.checked_mul(scale) {
        Some(secs) if secs > 0 => Ok(secs),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    pub project: Option<String>,
    pub deps: Option<PathBuf>,
    pub src: Option<PathBuf>,
    pub git_log: Option<PathBuf>,
    pub touch_tsv: Option<PathBuf>,
    pub profile: Option<String>,
    pub clusters: Option<usize>,
    pub lambda: Option<u32>,
    pub bus_threshold: Option<f64>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub stability_window: Option<usize>,
    pub interval: Option<String>,
    pub windows: Option<usize>,
    pub window_mode: Option<String>,
    pub binary_touches: Option<bool>,
    pub recluster_per_window: Option<bool>,
    pub slope_eps: Option<f64>,
    pub amp_eps: Option<f64>,
    pub min_points: Option<usize>,
    pub fail_on_stsc: Option<bool>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub profiles: BTreeMap<String, ProfileSpec>,
}

impl Settings {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut s: Settings = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in [&mut s.deps, &mut s.src, &mut s.git_log, &mut s.touch_tsv, &mut s.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Settings::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// `self` with every value set in `top` replaced. Source choices
    /// (`deps`/`src`, `git-log`/`touch-tsv`, `interval`/`windows`) are
    /// overridden as a pair.
    pub fn overlay(mut self, top: Settings) -> Settings {
        macro_rules! take {
            ($($f:ident),*) => { $( if top.$f.is_some() { self.$f = top.$f; } )* };
        }
        macro_rules! pair {
            ($a:ident, $b:ident) => {
                if top.$a.is_some() || top.$b.is_some() {
                    self.$a = top.$a;
                    self.$b = top.$b;
                }
            };
        }
        pair!(deps, src);
        pair!(git_log, touch_tsv);
        pair!(interval, windows);
        take!(
            project, profile, clusters, lambda, bus_threshold, seed, restarts, stability_window, window_mode,
            binary_touches, recluster_per_window, slope_eps, amp_eps, min_points, fail_on_stsc, out_dir
        );
        self.profiles.extend(top.profiles);
        self
    }

    pub fn to_pipeline_config(&self) -> Result<PipelineConfig> {
        let missing = |what: &str| Error::Config(format!("missing {what}"));
        let both = |what: &str| Error::Config(format!("{what} are mutually exclusive"));
        let deps = match (&self.deps, &self.src) {
            (Some(p), None) => DepSource::EdgeList(p.clone()),
            (None, Some(p)) => DepSource::SourceTree(p.clone()),
            (None, None) => return Err(missing("dependency source (--deps or --src)")),
            _ => return Err(both("--deps and --src")),
        };
        let history = match (&self.git_log, &self.touch_tsv) {
            (Some(p), None) => HistorySource::GitLog(p.clone()),
            (None, Some(p)) => HistorySource::TouchTsv(p.clone()),
            (None, None) => return Err(missing("history source (--git-log or --touch-tsv)")),
            _ => return Err(both("--git-log and --touch-tsv")),
        };
        let windows = match (&self.interval, self.windows) {
            (Some(i), None) => WindowSpec::Interval(parse_duration(i)?),
            (None, Some(n)) => WindowSpec::Count(n),
            (None, None) => WindowSpec::default(),
            _ => return Err(both("--interval and --windows")),
        };
        let d = ClusteringParams::default();
        let clustering = ClusteringParams {
            k: self.clusters.unwrap_or(d.k),
            lambda: self.lambda.unwrap_or(d.lambda),
            bus_threshold: self.bus_threshold.unwrap_or(d.bus_threshold),
            seed: self.seed.unwrap_or(d.seed),
            restarts: self.restarts.unwrap_or(d.restarts),
            stability_window: self.stability_window.or(d.stability_window),
        };
        let t = ShiftThresholds::default();
        Ok(PipelineConfig {
            project: self.project.clone().unwrap_or_else(|| "unnamed".into()),
            deps,
            history,
            profile: self.profile.clone().unwrap_or_else(|| "java".into()),
            custom_profiles: self.profiles.clone(),
            clustering,
            windows,
            window_mode: self.window_mode.as_deref().map(str::parse).transpose()?.unwrap_or_default(),
            weighting: if self.binary_touches.unwrap_or(false) {
                TouchWeighting::Binary
            } else {
                TouchWeighting::Counts
            },
            recluster_per_window: self.recluster_per_window.unwrap_or(false),
            thresholds: ShiftThresholds {
                slope_eps: self.slope_eps.unwrap_or(t.slope_eps),
                amp_eps: self.amp_eps.unwrap_or(t.amp_eps),
                min_points: self.min_points.unwrap_or(t.min_points),
            },
            out_dir: self.out_dir.clone(),
        })
    }
}
