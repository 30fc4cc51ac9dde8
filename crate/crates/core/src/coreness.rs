//! Core-ness ranking of clusters and the Core-Periphery Distance Metric.
//!
//! Clusters are scored by the row sums of `CDM x CSM` (cluster dependency
//! matrix times the diagonal cluster size matrix) and weighted `k` (most
//! core) down to `1`. A developer's CPDM is the touch-weighted mean of the
//! weights of the clusters they worked on, with touches of non-code files
//! counted in the denominator; the Average CPDM of a window is the mean over
//! the developers active in it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster, ClusterModel, ClusteringParams};
use crate::dsm::Dsm;
use crate::error::{Error, Result};
use crate::history::{build_touch_table, CommitRecord, TimeWindow, TouchTable};

/// `k x k` dependency counts between clusters, buses excluded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterDependencyMatrix {
    k: usize,
    cells: Vec<u64>,
}

impl ClusterDependencyMatrix {
    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let k = rows.len();
        assert!(rows.iter().all(|r| r.len() == k), "matrix must be square");
        ClusterDependencyMatrix {
            k,
            cells: rows.concat(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, c: usize, d: usize) -> u64 {
        self.cells[c * self.k + d]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.cells.chunks(self.k.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }
}

/// Diagonal cluster size matrix, stored as its diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterSizeMatrix(pub Vec<usize>);

impl ClusterSizeMatrix {
    pub fn of(model: &ClusterModel) -> Self {
        ClusterSizeMatrix(model.sizes.clone())
    }
}

pub fn cluster_dependency_matrix(dsm: &Dsm, model: &ClusterModel) -> ClusterDependencyMatrix {
    let k = model.k();
    let mut cells = vec![0u64; k * k];
    for (i, j) in dsm.cells() {
        if let (Some(c), Some(d)) = (
            model.assignment.cluster_of(i),
            model.assignment.cluster_of(j),
        ) {
            cells[c * k + d] += 1;
        }
    }
    ClusterDependencyMatrix { k, cells }
}

/// Clusters ordered from most core to most peripheral, with weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorenessRanking {
    pub scores: Vec<f64>,
    /// Cluster ids, most core first.
    pub order: Vec<usize>,
    /// `weights[c]`: `k` for the most core cluster down to `1`.
    pub weights: Vec<u32>,
}

impl CorenessRanking {
    pub fn k(&self) -> usize {
        self.order.len()
    }

    pub fn weight(&self, c: usize) -> u32 {
        self.weights[c]
    }
}

/// Orders clusters by descending score; ties go to the larger cluster, then
/// the lower id.
pub fn ranking_from_scores(scores: Vec<f64>, sizes: &ClusterSizeMatrix) -> CorenessRanking {
    let k = scores.len();
    assert_eq!(sizes.0.len(), k, "dimension mismatch");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(sizes.0[b].cmp(&sizes.0[a]))
            .then(a.cmp(&b))
    });
    let mut weights = vec![0u32; k];
    for (rank, &c) in order.iter().enumerate() {
        weights[c] = (k - rank) as u32;
    }
    CorenessRanking {
        scores,
        order,
        weights,
    }
}

/// `score(c) = sum_d cdm(c, d) * size(d)`.
pub fn coreness_ranking(cdm: &ClusterDependencyMatrix, sizes: &ClusterSizeMatrix) -> CorenessRanking {
    let k = cdm.k();
    assert_eq!(sizes.0.len(), k, "dimension mismatch");
    let scores = (0..k)
        .map(|c| {
            (0..k)
                .map(|d| cdm.get(c, d) * sizes.0[d] as u64)
                .sum::<u64>() as f64
        })
        .collect();
    ranking_from_scores(scores, sizes)
}

/// One developer's activity in a window, split by cluster.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuthorRow {
    pub cluster_touches: Vec<u64>,
    /// Touches of vertical-bus modules; no cluster weight applies.
    pub bus_touches: u64,
    pub non_module: u64,
}

impl AuthorRow {
    pub fn module_touches(&self) -> u64 {
        self.cluster_touches.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeopleClusterMatrix {
    pub k: usize,
    /// One row per author active in the window.
    pub rows: BTreeMap<String, AuthorRow>,
}

pub fn people_cluster_matrix(table: &TouchTable, model: &ClusterModel) -> PeopleClusterMatrix {
    let k = model.k();
    let blank = || AuthorRow {
        cluster_touches: vec![0; k],
        ..Default::default()
    };
    let mut rows: BTreeMap<String, AuthorRow> = table
        .active_authors
        .iter()
        .map(|a| (a.clone(), blank()))
        .collect();
    for ((author, module), &count) in &table.touches {
        let row = rows.entry(author.clone()).or_insert_with(blank);
        match model.assignment.cluster_of(*module) {
            Some(c) => row.cluster_touches[c] += count,
            None => row.bus_touches += count,
        }
    }
    for (author, &count) in &table.non_module_touches {
        rows.entry(author.clone()).or_insert_with(blank).non_module += count;
    }
    PeopleClusterMatrix { k, rows }
}

/// How touches enter the weighted mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TouchWeighting {
    /// Every touch counts.
    #[default]
    Counts,
    /// Each touched cluster (and non-code work) counts once.
    Binary,
}

/// Weighted cluster weight of one developer; `0` without module touches.
pub fn developer_cpdm(row: &AuthorRow, ranking: &CorenessRanking, weighting: TouchWeighting) -> f64 {
    let norm = |x: u64| match weighting {
        TouchWeighting::Counts => x,
        TouchWeighting::Binary => (x > 0) as u64,
    };
    let touched: u64 = row.cluster_touches.iter().map(|&x| norm(x)).sum();
    if touched == 0 {
        return 0.0;
    }
    let weighted: u64 = row
        .cluster_touches
        .iter()
        .enumerate()
        .map(|(c, &x)| ranking.weight(c) as u64 * norm(x))
        .sum();
    weighted as f64 / (touched + norm(row.non_module)) as f64
}

/// Average CPDM of one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpdmPoint {
    pub window_index: usize,
    pub window_start: i64,
    pub window_end: i64,
    pub average: f64,
    pub per_author: BTreeMap<String, f64>,
    pub active_count: usize,
    pub no_activity: bool,
    pub bus_touches: u64,
}

pub fn average_cpdm(
    pcm: &PeopleClusterMatrix,
    ranking: &CorenessRanking,
    window: &TimeWindow,
    weighting: TouchWeighting,
) -> CpdmPoint {
    let per_author: BTreeMap<String, f64> = pcm
        .rows
        .iter()
        .map(|(a, row)| (a.clone(), developer_cpdm(row, ranking, weighting)))
        .collect();
    let active_count = per_author.len();
    let average = if active_count == 0 {
        0.0
    } else {
        per_author.values().sum::<f64>() / active_count as f64
    };
    CpdmPoint {
        window_index: window.index,
        window_start: window.start,
        window_end: window.end,
        average,
        per_author,
        active_count,
        no_activity: active_count == 0,
        bus_touches: pcm.rows.values().map(|r| r.bus_touches).sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpdmSeries {
    pub points: Vec<CpdmPoint>,
    pub windows: Vec<TimeWindow>,
}

impl CpdmSeries {
    pub fn averages(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.average).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesParams {
    pub clustering: ClusteringParams,
    pub weighting: TouchWeighting,
    /// Cluster separately for each window (seed offset by window index)
    /// instead of one model shared by every window.
    pub recluster_per_window: bool,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams {
            clustering: ClusteringParams::default(),
            weighting: TouchWeighting::Counts,
            recluster_per_window: false,
        }
    }
}

/// Everything computed for one window.
#[derive(Debug, Clone)]
pub struct WindowAnalysis {
    pub window: TimeWindow,
    /// Index into [`SeriesAnalysis::models`].
    pub model: usize,
    pub table: TouchTable,
    pub pcm: PeopleClusterMatrix,
    pub point: CpdmPoint,
}

/// A clustering model with the matrices derived from it.
#[derive(Debug, Clone)]
pub struct RankedModel {
    pub model: ClusterModel,
    pub cdm: ClusterDependencyMatrix,
    pub ranking: CorenessRanking,
}

impl RankedModel {
    pub fn new(dsm: &Dsm, model: ClusterModel) -> Self {
        let cdm = cluster_dependency_matrix(dsm, &model);
        let ranking = coreness_ranking(&cdm, &ClusterSizeMatrix::of(&model));
        RankedModel {
            model,
            cdm,
            ranking,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeriesAnalysis {
    pub models: Vec<RankedModel>,
    pub windows: Vec<WindowAnalysis>,
    pub series: CpdmSeries,
}

/// Full per-window analysis: touch table, people-cluster matrix and CPDM
/// point for every window.
pub fn analyze_windows<F>(
    dsm: &Dsm,
    commits: &[CommitRecord],
    windows: &[TimeWindow],
    path_map: F,
    params: &SeriesParams,
) -> Result<SeriesAnalysis>
where
    F: Fn(&str) -> Option<usize> + Sync,
{
    if windows.is_empty() {
        return Err(Error::InvalidParameter("no time windows".into()));
    }
    let models: Vec<RankedModel> = if params.recluster_per_window {
        windows
            .par_iter()
            .map(|w| {
                let p = ClusteringParams {
                    seed: params.clustering.seed.wrapping_add(w.index as u64),
                    ..params.clustering.clone()
                };
                cluster(dsm, &p).map(|m| RankedModel::new(dsm, m))
            })
            .collect::<Result<_>>()?
    } else {
        vec![RankedModel::new(dsm, cluster(dsm, &params.clustering)?)]
    };

    let analyses: Vec<WindowAnalysis> = windows
        .par_iter()
        .enumerate()
        .map(|(slot, w)| {
            let model = if params.recluster_per_window { slot } else { 0 };
            let ranked = &models[model];
            let table = build_touch_table(commits, w, &path_map);
            let pcm = people_cluster_matrix(&table, &ranked.model);
            let point = average_cpdm(&pcm, &ranked.ranking, w, params.weighting);
            WindowAnalysis {
                window: *w,
                model,
                table,
                pcm,
                point,
            }
        })
        .collect();

    let series = CpdmSeries {
        points: analyses.iter().map(|a| a.point.clone()).collect(),
        windows: windows.to_vec(),
    };
    Ok(SeriesAnalysis {
        models,
        windows: analyses,
        series,
    })
}

/// Average CPDM for every window.
pub fn cpdm_series<F>(
    dsm: &Dsm,
    commits: &[CommitRecord],
    windows: &[TimeWindow],
    path_map: F,
    params: &SeriesParams,
) -> Result<CpdmSeries>
where
    F: Fn(&str) -> Option<usize> + Sync,
{
    analyze_windows(dsm, commits, windows, path_map, params).map(|a| a.series)
}
