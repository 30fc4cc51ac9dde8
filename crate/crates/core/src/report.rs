//! Output formats: author-cluster DOT graphs, the CPDM series CSV and the
//! JSON health report. Every emitter is a pure function of its inputs.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::clustering::{ClusterModel, ClusteringParams};
use crate::coreness::{
    ClusterDependencyMatrix, CorenessRanking, CpdmPoint, CpdmSeries, PeopleClusterMatrix, RankedModel,
    TouchWeighting,
};
use crate::dsm::Dsm;
use crate::error::{Error, Result};
use crate::extract::ScanReport;
use crate::history::{iso8601, TimeWindow, WindowMode, WindowSpec};
use crate::shift::{ShiftReport, ShiftThresholds};

/// Formats `x` with six significant digits, like C's `%g`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_owned()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn dot_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn cluster_node(c: usize) -> String {
    dot_quote(&format!("C{c}"))
}

fn developer_node(author: &str) -> String {
    dot_quote(&format!("dev:{author}"))
}

/// Author-cluster graph of one window: red boxes for clusters, blue
/// ellipses for active developers.
pub fn emit_dot(
    model: &ClusterModel,
    ranking: &CorenessRanking,
    cdm: &ClusterDependencyMatrix,
    pcm: &PeopleClusterMatrix,
    window: &TimeWindow,
) -> String {
    let k = model.k();
    let mut nodes = Vec::new();
    for c in 0..k {
        nodes.push(format!(
            "{} [shape=box, color=red, fontcolor=red, label={}];",
            cluster_node(c),
            dot_quote(&format!("C{c} (w={}, n={})", ranking.weight(c), model.sizes[c]))
        ));
    }
    for author in pcm.rows.keys() {
        nodes.push(format!(
            "{} [shape=ellipse, color=blue, fontcolor=blue, label={}];",
            developer_node(author),
            dot_quote(author)
        ));
    }
    nodes.sort();

    let mut edges = Vec::new();
    for c in 0..k {
        for d in c + 1..k {
            if cdm.get(c, d) + cdm.get(d, c) > 0 {
                edges.push(format!("{} -- {};", cluster_node(c), cluster_node(d)));
            }
        }
    }
    for (author, row) in &pcm.rows {
        for (c, &count) in row.cluster_touches.iter().enumerate() {
            if count > 0 {
                edges.push(format!(
                    "{} -- {} [color=blue, label=\"{count}\"];",
                    developer_node(author),
                    cluster_node(c)
                ));
            }
        }
    }
    edges.sort();

    let mut out = String::new();
    let _ = writeln!(out, "graph window_{} {{", window.index);
    let _ = writeln!(
        out,
        "  label={};",
        dot_quote(&format!(
            "window {} [{}, {}{}",
            window.index,
            window.start_iso(),
            window.end_iso(),
            if window.closed_end { ']' } else { ')' }
        ))
    );
    for line in nodes.iter().chain(&edges) {
        let _ = writeln!(out, "  {line}");
    }
    out.push_str("}\n");
    out
}

pub const SERIES_CSV_HEADER: &str =
    "window_index,window_start_iso,window_end_iso,average_cpdm,active_developers,no_activity";

pub fn emit_series_csv(series: &CpdmSeries) -> String {
    let mut out = String::from(SERIES_CSV_HEADER);
    out.push('\n');
    for p in &series.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.window_index,
            iso8601(p.window_start),
            iso8601(p.window_end),
            format_sig6(p.average),
            p.active_count,
            p.no_activity
        );
    }
    out
}

/// A parsed row of the series CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub window_index: usize,
    pub window_start: String,
    pub window_end: String,
    pub average_cpdm: f64,
    pub active_developers: usize,
    pub no_activity: bool,
}

pub fn parse_series_csv(text: &str) -> Result<Vec<SeriesRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SERIES_CSV_HEADER => {}
        _ => {
            return Err(Error::Line {
                line: 1,
                message: "missing series header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let err = |m: &str| Error::Line {
                line: i + 1,
                message: m.to_owned(),
            };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(err("expected 6 columns"));
            }
            Ok(SeriesRow {
                window_index: f[0].parse().map_err(|_| err("window_index"))?,
                window_start: f[1].to_owned(),
                window_end: f[2].to_owned(),
                average_cpdm: f[3].parse().map_err(|_| err("average_cpdm"))?,
                active_developers: f[4].parse().map_err(|_| err("active_developers"))?,
                no_activity: f[5].parse().map_err(|_| err("no_activity"))?,
            })
        })
        .collect()
}

/// Echo of every parameter that shaped a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParametersEcho {
    pub clustering: ClusteringParams,
    pub effective_k: usize,
    pub windows: WindowSpec,
    pub window_mode: WindowMode,
    pub weighting: TouchWeighting,
    pub recluster_per_window: bool,
    pub thresholds: ShiftThresholds,
    pub profile: String,
}

/// Summary of one clustering model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub clustered_cost: u64,
    pub restart_index: usize,
    pub cluster_sizes: Vec<usize>,
    pub bus_count: usize,
    pub bus_modules: Vec<String>,
    pub coreness_order: Vec<usize>,
    pub coreness_weights: Vec<u32>,
    pub coreness_scores: Vec<f64>,
    pub cluster_dependency_matrix: Vec<Vec<u64>>,
    /// Module ids of each cluster, sorted.
    pub clusters: Vec<Vec<String>>,
}

impl ModelSummary {
    pub fn new(dsm: &Dsm, ranked: &RankedModel) -> Self {
        let a = &ranked.model.assignment;
        let mut clusters: Vec<Vec<String>> = (0..a.k())
            .map(|c| a.members(c).into_iter().map(|i| dsm.id(i).to_string()).collect())
            .collect();
        clusters.iter_mut().for_each(|c| c.sort());
        let bus_modules: BTreeSet<String> = a.bus_set().into_iter().map(|i| dsm.id(i).to_string()).collect();
        ModelSummary {
            clustered_cost: ranked.model.total_cost,
            restart_index: ranked.model.restart_index,
            cluster_sizes: ranked.model.sizes.clone(),
            bus_count: ranked.model.bus_count(),
            bus_modules: bus_modules.into_iter().collect(),
            coreness_order: ranked.ranking.order.clone(),
            coreness_weights: ranked.ranking.weights.clone(),
            coreness_scores: ranked.ranking.scores.clone(),
            cluster_dependency_matrix: ranked.cdm.rows(),
            clusters,
        }
    }
}

/// Input and activity counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub modules: usize,
    pub dependencies: usize,
    pub commits: usize,
    pub authors: usize,
    pub windows: usize,
    /// File touches over the whole history.
    pub file_touches: u64,
    /// Touches of files that map to no module.
    pub unmapped_touches: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HealthReport {
    pub project: String,
    pub parameters: ParametersEcho,
    pub clustered_cost: u64,
    pub model: ModelSummary,
    /// Per-window models when each window is clustered separately.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_models: Option<Vec<ModelSummary>>,
    pub windows: Vec<CpdmPoint>,
    pub shift: ShiftReport,
    pub stats: RunStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanReport>,
}

pub fn emit_report_json(report: &HealthReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}
