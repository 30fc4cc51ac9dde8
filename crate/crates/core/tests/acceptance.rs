//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Every threshold below is pinned here and nowhere else.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coreshift::clustering::{cluster, clustered_cost, ClusterAssignment, ClusterModel, Clusterer, ClusteringParams};
use coreshift::coreness::{
    average_cpdm, coreness_ranking, developer_cpdm, people_cluster_matrix, ClusterDependencyMatrix,
    ClusterSizeMatrix, TouchWeighting,
};
use coreshift::dsm::Dsm;
use coreshift::history::{build_touch_table, windows_for, CommitRecord, TouchTable, WindowMode, WindowSpec};
use coreshift::pipeline::{run_pipeline, DepSource, HistorySource, PipelineConfig};
use coreshift::shift::ShiftLabel;

const ORACLE_TRIALS: usize = 50;
const ORACLE_MAX_N: usize = 8;
const ORACLE_MAX_K: usize = 3;
const ORACLE_RESTARTS: usize = 20;
const ORACLE_MIN_HIT_RATE: f64 = 0.90;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(10);

const COST_LAW_PAIRS: usize = 1000;
const DESCENT_DSMS: usize = 200;

const PLANTED_BLOCK: usize = 10;
const PLANTED_INTRA: f64 = 0.8;
const PLANTED_INTER: f64 = 0.05;
const PLANTED_SEEDS: u64 = 50;
const PLANTED_MIN_RATE: f64 = 0.80;

const CPDM_TABLES: usize = 500;
const FIXTURE_TIME_LIMIT: Duration = Duration::from_secs(5);
const WINDOW_HISTORIES: usize = 100;

const LAMBDA: u32 = 2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_dense(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<Vec<bool>> {
    (0..n)
        .map(|i| (0..n).map(|j| i != j && rng.gen_bool(density)).collect())
        .collect()
}

/// Clustered cost straight from the dense matrix. `labels[i] == None` marks
/// a bus.
fn brute_cost(m: &[Vec<bool>], labels: &[Option<usize>], lambda: u32) -> u64 {
    let n = m.len();
    let size = |c: usize| labels.iter().filter(|l| **l == Some(c)).count() as u64;
    let mut total = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = m[i][j] as u64 + m[j][i] as u64;
            total += match (labels[i], labels[j]) {
                (None, _) | (_, None) => d,
                (Some(a), Some(b)) if a == b => d * size(a).pow(lambda),
                _ => d * (n as u64).pow(lambda),
            };
        }
    }
    total
}

fn exhaustive_minimum(m: &[Vec<bool>], k: usize) -> u64 {
    let n = m.len();
    let mut labels = vec![Some(0); n];
    let mut best = u64::MAX;
    for code in 0..k.pow(n as u32) {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = Some(c % k);
            c /= k;
        }
        best = best.min(brute_cost(m, &labels, LAMBDA));
    }
    best
}

fn no_bus_params(k: usize, seed: u64, restarts: usize) -> ClusteringParams {
    ClusteringParams {
        k,
        lambda: LAMBDA,
        bus_threshold: 1.0,
        seed,
        restarts,
        stability_window: None,
    }
}

fn criterion_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut hits, mut below) = (0, 0);
    for trial in 0..ORACLE_TRIALS {
        let n = rng.gen_range(2..=ORACLE_MAX_N);
        let k = rng.gen_range(2..=ORACLE_MAX_K);
        let density = rng.gen_range(0.15..0.6);
        let m = random_dense(&mut rng, n, density);
        let dsm = Dsm::from_dense(&m);
        let model = cluster(&dsm, &no_bus_params(k, trial as u64, ORACLE_RESTARTS)).unwrap();
        let best = exhaustive_minimum(&m, k.min(n));
        if model.total_cost == best {
            hits += 1;
        } else if model.total_cost < best {
            below += 1;
        }
    }
    let elapsed = start.elapsed();
    let rate = hits as f64 / ORACLE_TRIALS as f64;
    check(
        rate >= ORACLE_MIN_HIT_RATE && below == 0 && elapsed < ORACLE_TIME_LIMIT,
        format!(
            "{hits}/{ORACLE_TRIALS} at the exhaustive minimum (need >= {:.0}%), {below} below it, {:.2?} (limit {:?})",
            ORACLE_MIN_HIT_RATE * 100.0,
            elapsed,
            ORACLE_TIME_LIMIT
        ),
    )
}

fn random_slots(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Option<usize>> {
    (0..n)
        .map(|_| if rng.gen_bool(0.15) { None } else { Some(rng.gen_range(0..k)) })
        .collect()
}

fn criterion_cost_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = 0;
    for _ in 0..COST_LAW_PAIRS {
        let n = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=4);
        let density = rng.gen_range(0.0..1.0);
        let m = random_dense(&mut rng, n, density);
        let slots = random_slots(&mut rng, n, k);
        let lambda = rng.gen_range(0..=3);
        let a = ClusterAssignment::new(k, slots.clone()).unwrap();
        if clustered_cost(&Dsm::from_dense(&m), &a, lambda) != brute_cost(&m, &slots, lambda) {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches} mismatches in {COST_LAW_PAIRS} random (DSM, assignment) pairs, exact integers"),
    )
}

fn criterion_descent() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut accepted, mut violations) = (0usize, 0usize);
    for t in 0..DESCENT_DSMS {
        let n = rng.gen_range(2..=14);
        let density = rng.gen_range(0.05..0.7);
        let m = random_dense(&mut rng, n, density);
        let dsm = Dsm::from_dense(&m);
        let params = ClusteringParams {
            k: rng.gen_range(1..=5),
            lambda: rng.gen_range(1..=3),
            bus_threshold: rng.gen_range(0.2..1.0),
            seed: t as u64,
            restarts: 3,
            stability_window: None,
        };
        let clusterer = Clusterer::new(&dsm, &params).unwrap();
        for r in 0..params.restarts {
            let mut last = None;
            let run = clusterer.run(r, &mut |step, a| {
                accepted += 1;
                let fresh = brute_cost(&m, a.slots(), params.lambda);
                if step.cost_after >= step.cost_before
                    || step.cost_after != fresh
                    || step.cost_after != clustered_cost(&dsm, a, params.lambda)
                    || last.is_some_and(|prev| prev != step.cost_before)
                {
                    violations += 1;
                }
                last = Some(step.cost_after);
            });
            if run.final_cost != brute_cost(&m, run.assignment.slots(), params.lambda) {
                violations += 1;
            }
        }
    }
    check(
        violations == 0 && accepted > 0,
        format!("{accepted} accepted bids over {DESCENT_DSMS} DSMs, {violations} violations"),
    )
}

fn criterion_planted() -> Outcome {
    let n = 2 * PLANTED_BLOCK;
    let mut recovered = 0;
    for seed in 0..PLANTED_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let block = |i: usize| i / PLANTED_BLOCK;
        let m: Vec<Vec<bool>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let p = if block(i) == block(j) { PLANTED_INTRA } else { PLANTED_INTER };
                        i != j && rng.gen_bool(p)
                    })
                    .collect()
            })
            .collect();
        let params = no_bus_params(2, seed, ClusteringParams::default().restarts);
        let model = cluster(&Dsm::from_dense(&m), &params).unwrap();
        let a = &model.assignment;
        let first = a.cluster_of(0);
        let ok = (0..n).all(|i| (a.cluster_of(i) == first) == (block(i) == 0));
        if ok {
            recovered += 1;
        }
    }
    let rate = recovered as f64 / PLANTED_SEEDS as f64;
    check(
        rate >= PLANTED_MIN_RATE,
        format!(
            "{recovered}/{PLANTED_SEEDS} planted partitions recovered (need >= {:.0}%)",
            PLANTED_MIN_RATE * 100.0
        ),
    )
}

fn random_model(rng: &mut ChaCha8Rng, m: &[Vec<bool>], k: usize) -> ClusterModel {
    let n = m.len();
    let mut slots = random_slots(rng, n, k);
    // every cluster non-empty where possible, so ranks are meaningful
    for (c, slot) in slots.iter_mut().enumerate().take(k) {
        *slot = Some(c);
    }
    let assignment = ClusterAssignment::new(k, slots).unwrap();
    ClusterModel {
        sizes: assignment.sizes().to_vec(),
        total_cost: clustered_cost(&Dsm::from_dense(m), &assignment, LAMBDA),
        module_count: n,
        assignment,
        params: ClusteringParams::default(),
        seed_used: 0,
        restart_index: 0,
        restart_costs: vec![],
    }
}

fn random_commits(rng: &mut ChaCha8Rng, paths: &[String], authors: usize, commits: usize, span: i64) -> Vec<CommitRecord> {
    let mut out: Vec<CommitRecord> = (0..commits)
        .map(|_| CommitRecord {
            timestamp: 1_000_000 + rng.gen_range(0..=span),
            author: format!("dev{}", rng.gen_range(0..authors)),
            files: (0..rng.gen_range(1..5))
                .map(|_| paths[rng.gen_range(0..paths.len())].clone())
                .collect(),
        })
        .collect();
    out.sort_by_key(|c| c.timestamp);
    out
}

fn module_paths(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("m{i}")).chain(["docs/a.md".into(), "build.xml".into()]).collect()
}

fn map_path(dsm: &Dsm) -> impl Fn(&str) -> Option<usize> + '_ {
    move |p| dsm.index_of(p)
}

fn criterion_cpdm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut out_of_bounds, mut checked) = (0, 0);
    for _ in 0..CPDM_TABLES {
        let n = rng.gen_range(1..=10);
        let k = rng.gen_range(1..=5);
        let density = rng.gen_range(0.0..0.6);
        let m = random_dense(&mut rng, n, density);
        let dsm = Dsm::from_dense(&m);
        let model = random_model(&mut rng, &m, k);
        let cdm = coreshift::coreness::cluster_dependency_matrix(&dsm, &model);
        let ranking = coreness_ranking(&cdm, &ClusterSizeMatrix::of(&model));
        let commits = random_commits(&mut rng, &module_paths(n), 4, 30, 1000);
        let window = windows_for(&commits, WindowSpec::Count(1), WindowMode::Disjoint).unwrap()[0];
        let table = build_touch_table(&commits, &window, map_path(&dsm));
        let pcm = people_cluster_matrix(&table, &model);
        for weighting in [TouchWeighting::Counts, TouchWeighting::Binary] {
            let hi = k as f64;
            for row in pcm.rows.values() {
                let v = developer_cpdm(row, &ranking, weighting);
                checked += 1;
                if !(0.0..=hi).contains(&v) {
                    out_of_bounds += 1;
                }
            }
            let avg = average_cpdm(&pcm, &ranking, &window, weighting).average;
            checked += 1;
            if !(0.0..=hi).contains(&avg) {
                out_of_bounds += 1;
            }
        }
    }

    // a window of documentation-only touches
    let m = vec![vec![false, true], vec![false, false]];
    let dsm = Dsm::from_dense(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(506);
    let model = random_model(&mut rng, &m, 2);
    let ranking = coreness_ranking(
        &ClusterDependencyMatrix::from_rows(&[vec![0, 1], vec![0, 0]]),
        &ClusterSizeMatrix::of(&model),
    );
    let docs = random_commits(&mut rng, &["docs/a.md".into(), "build.xml".into()], 3, 10, 100);
    let window = windows_for(&docs, WindowSpec::Count(1), WindowMode::Disjoint).unwrap()[0];
    let pcm = people_cluster_matrix(&build_touch_table(&docs, &window, map_path(&dsm)), &model);
    let zero = [TouchWeighting::Counts, TouchWeighting::Binary]
        .iter()
        .all(|&w| average_cpdm(&pcm, &ranking, &window, w).average == 0.0);

    check(
        out_of_bounds == 0 && zero && !pcm.rows.is_empty(),
        format!(
            "{checked} CPDM values within [0, k], {out_of_bounds} outside; documentation-only window average is {}",
            if zero { "exactly 0" } else { "NOT 0" }
        ),
    )
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn fixture_config(history: &str) -> PipelineConfig {
    let mut config = PipelineConfig::new(
        DepSource::EdgeList(fixture("deps.tsv")),
        HistorySource::TouchTsv(fixture(history)),
    );
    config.project = history.trim_end_matches(".tsv").into();
    config.clustering.k = 3;
    config.clustering.bus_threshold = 0.6;
    config
}

fn criterion_fixtures() -> Outcome {
    let cases = [
        ("shift_away.tsv", ShiftLabel::ShiftAway, Some(true)),
        ("oscillatory.tsv", ShiftLabel::Oscillatory, None),
        ("steady.tsv", ShiftLabel::Steady, None),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (file, want, touched_zero) in cases {
        let start = Instant::now();
        let result = run_pipeline(&fixture_config(file));
        let elapsed = start.elapsed();
        match result {
            Ok(out) => {
                let s = &out.report.shift;
                let ok = s.label == want
                    && touched_zero.is_none_or(|z| s.touched_zero == z)
                    && s.stsc_flag == (want == ShiftLabel::ShiftAway)
                    && elapsed < FIXTURE_TIME_LIMIT;
                pass &= ok;
                parts.push(format!("{file} -> {} ({elapsed:.2?})", s.label));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{file} -> error {e}"));
            }
        }
    }
    check(pass, format!("{} (limit {FIXTURE_TIME_LIMIT:?} each)", parts.join(", ")))
}

fn run_in_pool(threads: usize, config: &PipelineConfig) -> Vec<(String, String)> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| run_pipeline(config))
        .unwrap()
        .files
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut configs = Vec::new();
    for (i, recluster) in [false, true].into_iter().enumerate() {
        let mut c = fixture_config("oscillatory.tsv");
        c.recluster_per_window = recluster;
        c.out_dir = Some(dir.path().join(format!("run{i}")));
        configs.push(c);
    }
    let mut pass = true;
    let mut files = 0;
    for config in &configs {
        let reference = run_in_pool(1, config);
        files += reference.len();
        for threads in [1, 2, 4, 8] {
            pass &= run_in_pool(threads, config) == reference;
        }
        // what landed on disk matches what was produced
        let dir = config.out_dir.as_ref().unwrap();
        pass &= reference
            .iter()
            .all(|(name, body)| std::fs::read_to_string(dir.join(name)).ok().as_deref() == Some(body.as_str()));
        pass &= reference.iter().any(|(n, _)| n == "report.json")
            && reference.iter().any(|(n, _)| n == "series.csv")
            && reference.iter().filter(|(n, _)| n.ends_with(".dot")).count() == 10;
    }
    check(
        pass,
        format!("{files} output files byte-identical across repeated runs and 1/2/4/8 threads, shared and per-window models"),
    )
}

type TableCells = (BTreeMap<(String, usize), u64>, BTreeMap<String, u64>, BTreeSet<String>);

fn table_sum(tables: &[TouchTable]) -> TableCells {
    let mut cells = BTreeMap::new();
    let mut non_module = BTreeMap::new();
    let mut authors = BTreeSet::new();
    for t in tables {
        for (key, v) in &t.touches {
            *cells.entry(key.clone()).or_insert(0) += v;
        }
        for (author, v) in &t.non_module_touches {
            *non_module.entry(author.clone()).or_insert(0) += v;
        }
        authors.extend(t.active_authors.iter().cloned());
    }
    (cells, non_module, authors)
}

fn criterion_windowing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut mismatches = 0;
    let mut compared = 0;
    for _ in 0..WINDOW_HISTORIES {
        let n = rng.gen_range(1..=8);
        let dsm = Dsm::from_dense(&random_dense(&mut rng, n, 0.3));
        let (authors, count, span) = (rng.gen_range(1..=5), rng.gen_range(1..=60), rng.gen_range(0..=5000));
        let commits = random_commits(&mut rng, &module_paths(n), authors, count, span);
        let spec = if rng.gen_bool(0.5) {
            WindowSpec::Count(rng.gen_range(1..=12))
        } else {
            WindowSpec::Interval(rng.gen_range(1..=1500))
        };
        let disjoint = windows_for(&commits, spec, WindowMode::Disjoint).unwrap();
        let cumulative = windows_for(&commits, spec, WindowMode::Cumulative).unwrap();
        if disjoint.len() != cumulative.len() {
            mismatches += 1;
            continue;
        }
        let dt: Vec<TouchTable> = disjoint.iter().map(|w| build_touch_table(&commits, w, map_path(&dsm))).collect();
        for (i, w) in cumulative.iter().enumerate() {
            let ct = build_touch_table(&commits, w, map_path(&dsm));
            let got = table_sum(std::slice::from_ref(&ct));
            compared += 1;
            if got != table_sum(&dt[..=i]) {
                mismatches += 1;
            }
        }
        let total: usize = commits.iter().map(|c| c.files.len()).sum();
        if dt.iter().map(|t| t.total_touches()).sum::<u64>() != total as u64 {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{compared} cumulative tables over {WINDOW_HISTORIES} histories, {mismatches} differ from the disjoint prefix sums"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("clustering oracle", criterion_oracle),
        ("cost law", criterion_cost_law),
        ("monotone descent", criterion_descent),
        ("planted recovery", criterion_planted),
        ("CPDM bounds and zero case", criterion_cpdm),
        ("archetype fixtures", criterion_fixtures),
        ("determinism", criterion_determinism),
        ("windowing consistency", criterion_windowing),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        failed += !outcome.pass as usize;
        println!(
            "{} [{}] {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
