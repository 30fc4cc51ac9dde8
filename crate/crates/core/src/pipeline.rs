//! End-to-end run: dependencies and history in, report files out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::clustering::ClusteringParams;
use crate::coreness::{analyze_windows, SeriesParams, TouchWeighting};
use crate::dsm::{build_dsm, Dsm};
use crate::error::{Error, Result};
use crate::extract::{load_edge_list, path_to_module, scan_imports, LanguageProfile, ProfileSpec, ScanReport};
use crate::history::{parse_git_log, parse_touch_tsv, windows_for, CommitRecord, WindowMode, WindowSpec};
use crate::report::{
    emit_dot, emit_report_json, emit_series_csv, HealthReport, ModelSummary, ParametersEcho, RunStats,
};
use crate::shift::{classify_shift, ShiftThresholds};

#[derive(Debug, Clone, PartialEq)]
pub enum DepSource {
    EdgeList(PathBuf),
    /// Source tree scanned with the configured language profile.
    SourceTree(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum HistorySource {
    GitLog(PathBuf),
    TouchTsv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub project: String,
    pub deps: DepSource,
    pub history: HistorySource,
    pub profile: String,
    pub custom_profiles: BTreeMap<String, ProfileSpec>,
    pub clustering: ClusteringParams,
    pub windows: WindowSpec,
    pub window_mode: WindowMode,
    pub weighting: TouchWeighting,
    pub recluster_per_window: bool,
    pub thresholds: ShiftThresholds,
    /// Where output files go; `None` computes without writing.
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(deps: DepSource, history: HistorySource) -> Self {
        PipelineConfig {
            project: "unnamed".into(),
            deps,
            history,
            profile: "java".into(),
            custom_profiles: BTreeMap::new(),
            clustering: ClusteringParams::default(),
            windows: WindowSpec::default(),
            window_mode: WindowMode::default(),
            weighting: TouchWeighting::default(),
            recluster_per_window: false,
            thresholds: ShiftThresholds::default(),
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: HealthReport,
    /// Output file names and contents, in write order.
    pub files: Vec<(String, String)>,
}

impl PipelineOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Maps a touched path to a DSM row: an exact module id first, then the
/// profile's path-to-module rule.
fn module_of(dsm: &Dsm, profile: &LanguageProfile, path: &str) -> Option<usize> {
    dsm.index_of(path)
        .or_else(|| path_to_module(path, profile).and_then(|m| dsm.index_of(m.as_str())))
}

fn scan_text(scan: Option<&ScanReport>, dsm: &Dsm, commits: &[CommitRecord], stats: &RunStats, unmapped: &BTreeSet<&str>) -> String {
    let mut out = String::new();
    match scan {
        Some(s) => out.push_str(&s.render()),
        None => {
            let _ = writeln!(out, "dependency source: edge list");
            let _ = writeln!(out, "modules: {}", dsm.n());
            let _ = writeln!(out, "edges: {}", dsm.ones());
        }
    }
    let _ = writeln!(out, "commits: {}", commits.len());
    let _ = writeln!(out, "authors: {}", stats.authors);
    let _ = writeln!(out, "file touches: {}", stats.file_touches);
    let _ = writeln!(out, "unmapped touches: {} ({} distinct paths)", stats.unmapped_touches, unmapped.len());
    out
}

/// Runs extraction, clustering, windowing, the CPDM series and the shift
/// classification, then writes `report.json`, `series.csv`, `scan.txt` and
/// one `window_<i>.dot` per window if an output directory is set.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.clustering.validate()?;
    config.thresholds.validate()?;
    let profile = LanguageProfile::resolve(&config.profile, &config.custom_profiles)?;

    let (graph, scan) = match &config.deps {
        DepSource::EdgeList(path) => (load_edge_list(&read(path)?)?, None),
        DepSource::SourceTree(root) => {
            let (g, s) = scan_imports(root, &profile)?;
            (g, Some(s))
        }
    };
    let dsm = build_dsm(&graph)?;
    if dsm.n() == 0 {
        return Err(Error::InvalidParameter("dependency source declares no modules".into()));
    }

    let commits = match &config.history {
        HistorySource::GitLog(path) => parse_git_log(&read(path)?)?,
        HistorySource::TouchTsv(path) => parse_touch_tsv(&read(path)?)?,
    };
    if commits.is_empty() {
        return Err(Error::NoHistory);
    }
    let windows = windows_for(&commits, config.windows, config.window_mode)?;

    let path_map = |p: &str| module_of(&dsm, &profile, p);
    let params = SeriesParams {
        clustering: config.clustering.clone(),
        weighting: config.weighting,
        recluster_per_window: config.recluster_per_window,
    };
    let analysis = analyze_windows(&dsm, &commits, &windows, path_map, &params)?;
    let primary = &analysis.models[0];
    let shift = classify_shift(&analysis.series, primary.model.k(), &config.thresholds)?;

    let mut unmapped = BTreeSet::new();
    let mut stats = RunStats {
        modules: dsm.n(),
        dependencies: dsm.ones(),
        commits: commits.len(),
        authors: commits.iter().map(|c| c.author.as_str()).collect::<BTreeSet<_>>().len(),
        windows: windows.len(),
        ..Default::default()
    };
    for file in commits.iter().flat_map(|c| &c.files) {
        stats.file_touches += 1;
        if path_map(file).is_none() {
            stats.unmapped_touches += 1;
            unmapped.insert(file.as_str());
        }
    }

    let summaries: Vec<ModelSummary> = analysis.models.iter().map(|m| ModelSummary::new(&dsm, m)).collect();
    let report = HealthReport {
        project: config.project.clone(),
        parameters: ParametersEcho {
            clustering: config.clustering.clone(),
            effective_k: primary.model.k(),
            windows: config.windows,
            window_mode: config.window_mode,
            weighting: config.weighting,
            recluster_per_window: config.recluster_per_window,
            thresholds: config.thresholds,
            profile: profile.name.clone(),
        },
        clustered_cost: primary.model.total_cost,
        model: summaries[0].clone(),
        window_models: config.recluster_per_window.then(|| summaries.clone()),
        windows: analysis.series.points.clone(),
        shift,
        scan: scan.clone(),
        stats,
    };

    let mut files = vec![
        ("report.json".to_string(), emit_report_json(&report)),
        ("series.csv".to_string(), emit_series_csv(&analysis.series)),
        ("scan.txt".to_string(), scan_text(scan.as_ref(), &dsm, &commits, &report.stats, &unmapped)),
    ];
    for w in &analysis.windows {
        let m = &analysis.models[w.model];
        files.push((
            format!("window_{}.dot", w.window.index),
            emit_dot(&m.model, &m.ranking, &m.cdm, &w.pcm, &w.window),
        ));
    }

    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, content) in &files {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(PipelineOutput { report, files })
}

/// Process exit code for a pipeline outcome: 0 on success, 2 for input
/// errors, 3 when the STSC flag is raised and `fail_on_stsc` is set, 1 for
/// anything else.
pub fn exit_code(outcome: &Result<PipelineOutput>, fail_on_stsc: bool) -> i32 {
    match outcome {
        Ok(out) if fail_on_stsc && out.report.shift.stsc_flag => 3,
        Ok(_) => 0,
        Err(e) if e.is_input_error() => 2,
        Err(_) => 1,
    }
}
