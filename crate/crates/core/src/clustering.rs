//! Dependency-based DSM clustering.
//!
//! The objective ("clustered cost") charges every dependent pair of modules
//! by where the pair lives:
//!
//! * either endpoint is a vertical bus: `d`
//! * both in the same cluster of size `n`: `d * n^lambda`
//! * in different clusters: `d * N^lambda`, `N` the DSM size
//!
//! where `d = SM(i,j) + SM(j,i)`. The total sums over ordered pairs `i != j`.
//! A randomized bid loop moves single modules to the cluster offering the
//! largest cost reduction until a run of proposals yields nothing, and the
//! best of several independently seeded restarts is kept.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsm::{identify_vertical_buses, Dsm};
use crate::error::{Error, Result};

/// Tunables of the clustering search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringParams {
    /// Requested cluster count; clamped to the module count.
    pub k: usize,
    /// Cluster size exponent.
    pub lambda: u32,
    /// Column fan-in fraction of `n` above which a module is a vertical bus.
    pub bus_threshold: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Consecutive rejected proposals that end a run; `None` means twice the
    /// number of clusterable modules.
    pub stability_window: Option<usize>,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        ClusteringParams {
            k: 9,
            lambda: 2,
            bus_threshold: 0.25,
            seed: 42,
            restarts: 10,
            stability_window: None,
        }
    }
}

impl ClusteringParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParameter("cluster count k must be >= 1".into()));
        }
        if self.lambda < 1 {
            return Err(Error::InvalidParameter("lambda must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.bus_threshold) {
            return Err(Error::InvalidParameter(format!(
                "bus threshold {} outside [0, 1]",
                self.bus_threshold
            )));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        Ok(())
    }

    /// Cluster count actually used for a DSM of `n` modules.
    pub fn effective_k(&self, n: usize) -> usize {
        self.k.min(n).max(1)
    }
}

/// Placement of every module: a cluster id in `0..k`, or the bus set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterAssignment {
    k: usize,
    slots: Vec<Option<usize>>,
    sizes: Vec<usize>,
}

impl ClusterAssignment {
    /// `slots[i] = None` marks module `i` as a bus.
    pub fn new(k: usize, slots: Vec<Option<usize>>) -> Result<Self> {
        let mut sizes = vec![0; k];
        for (i, slot) in slots.iter().enumerate() {
            if let Some(c) = *slot {
                if c >= k {
                    return Err(Error::Contract(format!(
                        "module {i} assigned to cluster {c}, k = {k}"
                    )));
                }
                sizes[c] += 1;
            }
        }
        Ok(ClusterAssignment { k, slots, sizes })
    }

    /// Assignment with no buses from a plain cluster-id vector.
    pub fn from_labels(k: usize, labels: &[usize]) -> Result<Self> {
        ClusterAssignment::new(k, labels.iter().map(|&c| Some(c)).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of modules covered.
    pub fn n(&self) -> usize {
        self.slots.len()
    }

    pub fn cluster_of(&self, i: usize) -> Option<usize> {
        self.slots[i]
    }

    pub fn is_bus(&self, i: usize) -> bool {
        self.slots[i].is_none()
    }

    pub fn bus_set(&self) -> BTreeSet<usize> {
        (0..self.n()).filter(|&i| self.is_bus(i)).collect()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, c: usize) -> usize {
        self.sizes[c]
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.slots[i] == Some(c)).collect()
    }

    pub fn slots(&self) -> &[Option<usize>] {
        &self.slots
    }

    fn relocate(&mut self, i: usize, to: usize) {
        let from = self.slots[i].expect("bus modules never move");
        self.sizes[from] -= 1;
        self.sizes[to] += 1;
        self.slots[i] = Some(to);
    }
}

/// Result of clustering a DSM.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterModel {
    pub assignment: ClusterAssignment,
    pub sizes: Vec<usize>,
    pub total_cost: u64,
    pub params: ClusteringParams,
    pub seed_used: u64,
    /// DSM size `N`.
    pub module_count: usize,
    /// Restart that produced this model.
    pub restart_index: usize,
    /// Final cost of every restart, in restart order.
    pub restart_costs: Vec<u64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.assignment.k()
    }

    pub fn bus_count(&self) -> usize {
        self.assignment.n() - self.sizes.iter().sum::<usize>()
    }
}

/// Cost change offered by `target_cluster` for absorbing `module`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bid {
    pub module: usize,
    pub target_cluster: usize,
    pub delta: i64,
}

/// `SM(i,j) + SM(j,i)`.
pub fn pair_dependency(dsm: &Dsm, i: usize, j: usize) -> u8 {
    assert_ne!(i, j, "pair dependency is undefined on the diagonal");
    dsm.get(i, j) as u8 + dsm.get(j, i) as u8
}

fn pair_weight(assignment: &ClusterAssignment, i: usize, j: usize, lambda: u32) -> u64 {
    match (assignment.cluster_of(i), assignment.cluster_of(j)) {
        (None, _) | (_, None) => 1,
        (Some(a), Some(b)) if a == b => (assignment.size(a) as u64).pow(lambda),
        _ => (assignment.n() as u64).pow(lambda),
    }
}

/// Cost of the ordered pair `(i, j)`.
pub fn dependency_cost(
    dsm: &Dsm,
    assignment: &ClusterAssignment,
    i: usize,
    j: usize,
    lambda: u32,
) -> u64 {
    let d = pair_dependency(dsm, i, j) as u64;
    if d == 0 {
        return 0;
    }
    d * pair_weight(assignment, i, j, lambda)
}

/// Total clustered cost over all ordered pairs.
///
/// Each 1-cell `SM(i,j)` shows up in `d` of both `(i,j)` and `(j,i)`, so the
/// total is twice the weighted sum over 1-cells.
pub fn clustered_cost(dsm: &Dsm, assignment: &ClusterAssignment, lambda: u32) -> u64 {
    debug_assert_eq!(dsm.n(), assignment.n());
    dsm.cells()
        .map(|(i, j)| 2 * pair_weight(assignment, i, j, lambda))
        .sum()
}

fn check_cost_bound(dsm: &Dsm, lambda: u32) -> Result<()> {
    let overflow = || Error::CostOverflow {
        modules: dsm.n(),
        lambda,
    };
    let pow = (dsm.n() as u64).checked_pow(lambda).ok_or_else(overflow)?;
    let bound = pow
        .checked_mul(2 * dsm.ones().max(1) as u64)
        .ok_or_else(overflow)?;
    if bound > i64::MAX as u64 {
        return Err(overflow());
    }
    Ok(())
}

/// Bid of `target_cluster` for `module` under `assignment`.
pub fn compute_bid(
    dsm: &Dsm,
    assignment: &ClusterAssignment,
    module: usize,
    target_cluster: usize,
    lambda: u32,
) -> Result<Bid> {
    if target_cluster >= assignment.k() {
        return Err(Error::Contract(format!(
            "target cluster {target_cluster} >= k = {}",
            assignment.k()
        )));
    }
    if assignment.is_bus(module) {
        return Err(Error::Contract(format!("module {module} is a vertical bus")));
    }
    check_cost_bound(dsm, lambda)?;
    let neighbors: Vec<Vec<(usize, u8)>> = (0..dsm.n()).map(|i| dsm.pair_neighbors(i)).collect();
    let state = SearchState::new(dsm, &neighbors, assignment.clone(), lambda);
    let mut scratch = vec![0u64; assignment.k()];
    Ok(Bid {
        module,
        target_cluster,
        delta: state.delta(module, target_cluster, &mut scratch),
    })
}

/// Running cost bookkeeping for incremental bids.
struct SearchState<'a> {
    neighbors: &'a [Vec<(usize, u8)>],
    assignment: ClusterAssignment,
    /// `pow[s] = s^lambda` for `s` in `0..=N`.
    pow: Vec<i128>,
    /// Sum of pair dependencies over unordered pairs inside each cluster.
    intra: Vec<u64>,
    total: u64,
}

impl<'a> SearchState<'a> {
    fn new(
        dsm: &Dsm,
        neighbors: &'a [Vec<(usize, u8)>],
        assignment: ClusterAssignment,
        lambda: u32,
    ) -> Self {
        let n = dsm.n();
        let pow = (0..=n as i128).map(|s| s.pow(lambda)).collect();
        let mut intra = vec![0u64; assignment.k()];
        for (i, j) in dsm.cells() {
            if let (Some(a), Some(b)) = (assignment.cluster_of(i), assignment.cluster_of(j)) {
                if a == b {
                    intra[a] += 1;
                }
            }
        }
        let total = clustered_cost(dsm, &assignment, lambda);
        SearchState {
            neighbors,
            assignment,
            pow,
            intra,
            total,
        }
    }

    /// Fills `scratch[c]` with the pair dependency mass between `m` and cluster `c`.
    fn links(&self, m: usize, scratch: &mut [u64]) {
        scratch.iter_mut().for_each(|x| *x = 0);
        for &(x, d) in &self.neighbors[m] {
            if let Some(c) = self.assignment.cluster_of(x) {
                scratch[c] += d as u64;
            }
        }
    }

    fn delta_with_links(&self, m: usize, to: usize, links: &[u64]) -> i64 {
        let from = self.assignment.cluster_of(m).expect("non-bus module");
        if from == to {
            return 0;
        }
        let p = &self.pow;
        let big = p[self.assignment.n()];
        let na = self.assignment.size(from);
        let nb = self.assignment.size(to);
        let (la, lb) = (links[from] as i128, links[to] as i128);
        let rest_a = self.intra[from] as i128 - la;
        let rest_b = self.intra[to] as i128;
        let unordered = rest_a * (p[na - 1] - p[na])
            + rest_b * (p[nb + 1] - p[nb])
            + la * (big - p[na])
            + lb * (p[nb + 1] - big);
        (2 * unordered) as i64
    }

    fn delta(&self, m: usize, to: usize, scratch: &mut [u64]) -> i64 {
        self.links(m, scratch);
        self.delta_with_links(m, to, scratch)
    }

    fn apply(&mut self, m: usize, to: usize, links: &[u64], delta: i64) {
        let from = self.assignment.cluster_of(m).expect("non-bus module");
        self.intra[from] -= links[from];
        self.intra[to] += links[to];
        self.assignment.relocate(m, to);
        self.total = (self.total as i64 + delta) as u64;
    }
}

/// An accepted relocation, reported to search observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcceptedBid {
    pub bid: Bid,
    pub from_cluster: usize,
    pub cost_before: u64,
    pub cost_after: u64,
}

/// Outcome of a single seeded run of the bid loop.
#[derive(Debug, Clone)]
pub struct RestartRun {
    pub restart_index: usize,
    pub initial_cost: u64,
    pub final_cost: u64,
    pub assignment: ClusterAssignment,
    pub proposals: usize,
    pub accepted: usize,
}

/// Prepared clustering problem: buses identified, neighbourhoods indexed.
pub struct Clusterer<'a> {
    dsm: &'a Dsm,
    params: ClusteringParams,
    k: usize,
    slots_template: Vec<Option<usize>>,
    movable: Vec<usize>,
    neighbors: Vec<Vec<(usize, u8)>>,
}

impl<'a> Clusterer<'a> {
    pub fn new(dsm: &'a Dsm, params: &ClusteringParams) -> Result<Self> {
        params.validate()?;
        if dsm.n() == 0 {
            return Err(Error::InvalidParameter("cannot cluster an empty DSM".into()));
        }
        check_cost_bound(dsm, params.lambda)?;
        let buses = identify_vertical_buses(dsm, params.bus_threshold);
        let slots_template: Vec<Option<usize>> = (0..dsm.n())
            .map(|i| if buses.contains(&i) { None } else { Some(0) })
            .collect();
        let movable = (0..dsm.n()).filter(|i| !buses.contains(i)).collect();
        let neighbors = (0..dsm.n()).map(|i| dsm.pair_neighbors(i)).collect();
        Ok(Clusterer {
            dsm,
            params: params.clone(),
            k: params.effective_k(dsm.n()),
            slots_template,
            movable,
            neighbors,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn stability_window(&self) -> usize {
        self.params
            .stability_window
            .unwrap_or(2 * self.movable.len())
            .max(1)
    }

    /// Runs restart `restart_index`, reporting each accepted bid together
    /// with the assignment after the move.
    pub fn run(
        &self,
        restart_index: usize,
        observer: &mut dyn FnMut(&AcceptedBid, &ClusterAssignment),
    ) -> RestartRun {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(restart_index as u64);

        let mut slots = self.slots_template.clone();
        for &m in &self.movable {
            slots[m] = Some(rng.gen_range(0..self.k));
        }
        let assignment = ClusterAssignment::new(self.k, slots).expect("ids drawn below k");
        let mut state = SearchState::new(self.dsm, &self.neighbors, assignment, self.params.lambda);
        let initial_cost = state.total;

        let window = self.stability_window();
        let mut links = vec![0u64; self.k];
        let (mut proposals, mut accepted, mut rejected_run) = (0, 0, 0);
        while !self.movable.is_empty() && rejected_run < window {
            let m = self.movable[rng.gen_range(0..self.movable.len())];
            proposals += 1;
            state.links(m, &mut links);
            // lowest cluster id wins ties
            let mut best = Bid {
                module: m,
                target_cluster: 0,
                delta: i64::MAX,
            };
            for c in 0..self.k {
                let delta = state.delta_with_links(m, c, &links);
                if delta < best.delta {
                    best = Bid {
                        module: m,
                        target_cluster: c,
                        delta,
                    };
                }
            }
            if best.delta < 0 {
                let from_cluster = state.assignment.cluster_of(m).expect("movable");
                let cost_before = state.total;
                state.apply(m, best.target_cluster, &links, best.delta);
                accepted += 1;
                rejected_run = 0;
                observer(
                    &AcceptedBid {
                        bid: best,
                        from_cluster,
                        cost_before,
                        cost_after: state.total,
                    },
                    &state.assignment,
                );
            } else {
                rejected_run += 1;
            }
        }

        RestartRun {
            restart_index,
            initial_cost,
            final_cost: state.total,
            assignment: state.assignment,
            proposals,
            accepted,
        }
    }

    /// Runs every restart (in parallel) and keeps the cheapest; ties go to
    /// the lowest restart index.
    pub fn best_model(&self) -> ClusterModel {
        let runs: Vec<RestartRun> = (0..self.params.restarts)
            .into_par_iter()
            .map(|r| self.run(r, &mut |_, _| {}))
            .collect();
        let restart_costs = runs.iter().map(|r| r.final_cost).collect();
        let best = runs
            .into_iter()
            .min_by_key(|r| (r.final_cost, r.restart_index))
            .expect("at least one restart");
        ClusterModel {
            sizes: best.assignment.sizes().to_vec(),
            assignment: best.assignment,
            total_cost: best.final_cost,
            params: self.params.clone(),
            seed_used: self.params.seed,
            module_count: self.dsm.n(),
            restart_index: best.restart_index,
            restart_costs,
        }
    }
}

/// Clusters `dsm` with `params.restarts` independent seeded runs.
pub fn cluster(dsm: &Dsm, params: &ClusteringParams) -> Result<ClusterModel> {
    Ok(Clusterer::new(dsm, params)?.best_model())
}
