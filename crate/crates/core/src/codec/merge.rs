//! Neuron merging: grouping feature dimensions that behave alike on a
//! calibration set and transmitting one mean per group.
//!
//! Fitting is greedy agglomerative clustering of the dimensions, where dim
//! `i` is the point `(x_i^1, .., x_i^K)` across the `K` calibration tensors
//! and the cost of joining groups `A` and `B` is the growth of the total
//! within-group sum of squares,
//! `|A||B| / (|A| + |B|) · ‖μ_A − μ_B‖²`.
//! The pair with the smallest growth merges first; ties go to the pair with
//! the lowest `(a, b)` indices, and the merged group keeps index `b`.
//!
//! A naive search is cubic. This keeps a lazy nearest-neighbour list: each
//! live group remembers its best partner. Merging never brings two groups
//! closer than either part was, so an entry whose partner was absorbed is
//! still a lower bound and is only refreshed when it reaches the top of the
//! queue. Partner searches walk groups ordered by their first centroid
//! coordinate and stop once that coordinate alone rules out an improvement.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::ops::Bound;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::FeatureTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeMap {
    pub original_dim: usize,
    pub merged_dim: usize,
    /// Group of every original index.
    pub assignment: Vec<u32>,
    /// Mean within-group squared deviation on the calibration set.
    pub group_floor_mse: f64,
}

impl MergeMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            original_dim: dim,
            merged_dim: dim,
            assignment: (0..dim as u32).collect(),
            group_floor_mse: 0.0,
        }
    }

    /// Checks totality and that no group is empty.
    pub fn validate(&self) -> Result<()> {
        if self.original_dim == 0 || self.merged_dim == 0 || self.merged_dim > self.original_dim {
            return Err(Error::config(
                "merge_map",
                format!(
                    "need 1 <= merged_dim ({}) <= original_dim ({})",
                    self.merged_dim, self.original_dim
                ),
            ));
        }
        if self.assignment.len() != self.original_dim {
            return Err(Error::config(
                "merge_map.assignment",
                format!(
                    "has {} entries for {} dims",
                    self.assignment.len(),
                    self.original_dim
                ),
            ));
        }
        let mut seen = vec![false; self.merged_dim];
        for &g in &self.assignment {
            let g = g as usize;
            if g >= self.merged_dim {
                return Err(Error::config(
                    "merge_map.assignment",
                    format!("group {g} out of range"),
                ));
            }
            seen[g] = true;
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(Error::config(
                "merge_map.assignment",
                format!("group {g} has no members"),
            ));
        }
        if !(self.group_floor_mse >= 0.0) {
            return Err(Error::config("merge_map.group_floor_mse", "must be >= 0"));
        }
        Ok(())
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.merged_dim];
        for &g in &self.assignment {
            sizes[g as usize] += 1;
        }
        sizes
    }

    pub fn is_identity(&self) -> bool {
        self.merged_dim == self.original_dim
            && self.assignment.iter().enumerate().all(|(i, &g)| g as usize == i)
    }

    /// Mean squared deviation of `t` from its own group means.
    pub fn within_group_mse(&self, t: &FeatureTensor) -> Result<f64> {
        let expanded = merge_expand(&merge_reduce(t, self)?, self)?.reshaped(t.shape().to_vec())?;
        crate::metrics::mse(t, &expanded)
    }
}

/// Average of each group's members; output is one-dimensional of length M.
pub fn merge_reduce(t: &FeatureTensor, m: &MergeMap) -> Result<FeatureTensor> {
    if t.len() != m.original_dim {
        return Err(Error::DimMismatch {
            expected: m.original_dim,
            found: t.len(),
        });
    }
    // Deviations from the first member are accumulated so a group of equal
    // values reduces to exactly that value.
    let mut anchor = vec![f64::NAN; m.merged_dim];
    let mut dev = vec![0.0; m.merged_dim];
    let mut counts = vec![0usize; m.merged_dim];
    for (&v, &g) in t.values().iter().zip(&m.assignment) {
        let g = g as usize;
        if counts[g] == 0 {
            anchor[g] = v;
        } else {
            dev[g] += v - anchor[g];
        }
        counts[g] += 1;
    }
    let values = anchor
        .into_iter()
        .zip(dev)
        .zip(counts)
        .map(|((a, d), c)| a + d / c as f64)
        .collect();
    Ok(FeatureTensor::from_parts(vec![m.merged_dim], values, t.role()))
}

/// Broadcasts each group value back to its members; output has length N.
pub fn merge_expand(reduced: &FeatureTensor, m: &MergeMap) -> Result<FeatureTensor> {
    if reduced.len() != m.merged_dim {
        return Err(Error::DimMismatch {
            expected: m.merged_dim,
            found: reduced.len(),
        });
    }
    let values = m
        .assignment
        .iter()
        .map(|&g| reduced.values()[g as usize])
        .collect();
    Ok(FeatureTensor::from_parts(
        vec![m.original_dim],
        values,
        reduced.role(),
    ))
}

/// Fits a merge map with `merged_dim` groups on `calibration`.
pub fn fit_merge_map(calibration: &[FeatureTensor], merged_dim: usize) -> Result<MergeMap> {
    let first = calibration
        .first()
        .ok_or_else(|| Error::config("calibration", "calibration set is empty"))?;
    let n = first.len();
    for t in calibration {
        first.ensure_same_shape(t)?;
    }
    if merged_dim == 0 || merged_dim > n {
        return Err(Error::config(
            "merged_dim",
            format!("must lie in [1, {n}], got {merged_dim}"),
        ));
    }

    let assignment = if merged_dim == n {
        (0..n as u32).collect()
    } else {
        let mut clusterer = WardClusterer::new(calibration);
        clusterer.run(n - merged_dim);
        clusterer.assignment()
    };

    let mut map = MergeMap {
        original_dim: n,
        merged_dim,
        assignment,
        group_floor_mse: 0.0,
    };
    map.group_floor_mse = calibration_floor(calibration, &map)?;
    Ok(map)
}

/// Mean over the calibration tensors of their within-group mse.
pub fn calibration_floor(calibration: &[FeatureTensor], map: &MergeMap) -> Result<f64> {
    if calibration.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for t in calibration {
        total += map.within_group_mse(t)?;
    }
    Ok(total / calibration.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct WardClusterer {
    dims: usize,
    k: usize,
    /// Row-major `dims × k` centroids.
    centroid: Vec<f64>,
    size: Vec<f64>,
    active: Vec<bool>,
    partner: Vec<usize>,
    best: Vec<f64>,
    fresh: Vec<bool>,
    queue: BTreeSet<(Key, usize)>,
    by_coord: BTreeSet<(Key, usize)>,
    /// Groups that named `j` as partner at some point; may hold stale ids.
    followers: Vec<Vec<usize>>,
    /// Entries with `best` above this are checked individually after a merge.
    horizon: f64,
    /// Union-find parent used to resolve final groups.
    parent: Vec<usize>,
}

/// Merges between recomputations of the horizon.
const HORIZON_PERIOD: usize = 512;
/// Target number of entries above the horizon.
const HORIZON_TAIL: usize = 256;

impl WardClusterer {
    fn new(calibration: &[FeatureTensor]) -> Self {
        let dims = calibration[0].len();
        let k = calibration.len();
        let mut centroid = vec![0.0; dims * k];
        for (s, t) in calibration.iter().enumerate() {
            for (i, &v) in t.values().iter().enumerate() {
                centroid[i * k + s] = v;
            }
        }
        let mut this = Self {
            dims,
            k,
            centroid,
            size: vec![1.0; dims],
            active: vec![true; dims],
            partner: vec![usize::MAX; dims],
            best: vec![f64::INFINITY; dims],
            fresh: vec![false; dims],
            queue: BTreeSet::new(),
            by_coord: BTreeSet::new(),
            followers: vec![Vec::new(); dims],
            horizon: f64::INFINITY,
            parent: (0..dims).collect(),
        };
        for i in 0..dims {
            this.by_coord.insert((Key(this.centroid[i * k]), i));
        }
        for i in 0..dims {
            this.refresh(i);
            this.queue.insert((Key(this.best[i]), i));
        }
        this
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        let (ci, cj) = (
            &self.centroid[i * self.k..(i + 1) * self.k],
            &self.centroid[j * self.k..(j + 1) * self.k],
        );
        let sq: f64 = ci.iter().zip(cj).map(|(a, b)| (a - b) * (a - b)).sum();
        let (ni, nj) = (self.size[i], self.size[j]);
        ni * nj / (ni + nj) * sq
    }

    /// Live groups whose first coordinate lies within `radius²/weight` of
    /// `center`'s, excluding `center` itself, nearest first on each side.
    fn slab(&self, center: usize, weight: f64, radius_sq: f64, mut visit: impl FnMut(usize) -> bool) {
        let c0 = self.centroid[center * self.k];
        let start = (Key(c0), center);
        let mut up = self.by_coord.range((Bound::Excluded(start), Bound::Unbounded));
        let mut down = self.by_coord.range(..start).rev();
        let (mut up_open, mut down_open) = (true, true);
        while up_open || down_open {
            if up_open {
                match up.next() {
                    Some(&(Key(cj), j)) if weight * (cj - c0) * (cj - c0) <= radius_sq => {
                        up_open = visit(j);
                    }
                    _ => up_open = false,
                }
            }
            if down_open {
                match down.next() {
                    Some(&(Key(cj), j)) if weight * (c0 - cj) * (c0 - cj) <= radius_sq => {
                        down_open = visit(j);
                    }
                    _ => down_open = false,
                }
            }
        }
    }

    /// Exact best partner of `i` among all other live groups.
    fn refresh(&mut self, i: usize) {
        let ni = self.size[i];
        // Cost is at least `ni/(ni+1) · Δc0²` for every partner.
        let weight = ni / (ni + 1.0);
        let mut best = (f64::INFINITY, usize::MAX);
        let c0 = self.centroid[i * self.k];
        // Alternate sides so the bound tightens quickly; the radius shrinks
        // as `best` improves, which `slab` cannot see, so re-check here.
        self.slab(i, weight, f64::INFINITY, |j| {
            let gap = self.centroid[j * self.k] - c0;
            if weight * gap * gap > best.0 {
                return false;
            }
            let d = self.cost(i, j);
            if d < best.0 || (d == best.0 && j < best.1) {
                best = (d, j);
            }
            true
        });
        self.best[i] = best.0;
        self.partner[i] = best.1;
        self.fresh[i] = true;
        if best.1 != usize::MAX {
            self.followers[best.1].push(i);
        }
    }

    fn set_entry(&mut self, i: usize, best: f64, partner: usize) {
        self.queue.remove(&(Key(self.best[i]), i));
        self.best[i] = best;
        self.partner[i] = partner;
        self.queue.insert((Key(best), i));
        self.followers[partner].push(i);
    }

    fn update_horizon(&mut self) {
        let mut bests: Vec<f64> = self.queue.iter().map(|&(Key(b), _)| b).collect();
        if bests.len() <= HORIZON_TAIL {
            self.horizon = 0.0;
            return;
        }
        let idx = bests.len() - HORIZON_TAIL;
        let (_, nth, _) = bests.select_nth_unstable_by(idx, f64::total_cmp);
        self.horizon = *nth;
    }

    fn run(&mut self, merges: usize) {
        let mut done = 0;
        while done < merges {
            let &(key, a) = self.queue.first().expect("queue exhausted before target");
            if !self.fresh[a] {
                self.queue.remove(&(key, a));
                self.refresh(a);
                self.queue.insert((Key(self.best[a]), a));
                continue;
            }
            if done % HORIZON_PERIOD == 0 {
                self.update_horizon();
            }
            let p = self.partner[a];
            self.merge(a.min(p), a.max(p));
            done += 1;
        }
    }

    fn merge(&mut self, a: usize, b: usize) {
        debug_assert!(a < b && self.active[a] && self.active[b]);
        let k = self.k;
        self.queue.remove(&(Key(self.best[a]), a));
        self.queue.remove(&(Key(self.best[b]), b));
        self.by_coord.remove(&(Key(self.centroid[a * k]), a));
        self.by_coord.remove(&(Key(self.centroid[b * k]), b));
        self.active[a] = false;
        self.parent[a] = b;

        let (na, nb) = (self.size[a], self.size[b]);
        for s in 0..k {
            self.centroid[b * k + s] =
                (na * self.centroid[a * k + s] + nb * self.centroid[b * k + s]) / (na + nb);
        }
        self.size[b] = na + nb;
        self.by_coord.insert((Key(self.centroid[b * k]), b));

        // Whoever pointed at a or b keeps its old value as a lower bound and
        // is refreshed when it surfaces.
        let mut pointing = std::mem::take(&mut self.followers[a]);
        pointing.append(&mut std::mem::take(&mut self.followers[b]));
        for i in pointing {
            if i != b && self.active[i] && (self.partner[i] == a || self.partner[i] == b) {
                self.partner[i] = b;
                self.fresh[i] = false;
                self.followers[b].push(i);
            }
        }

        // Anyone the new group undercuts satisfies
        // `weight · Δc0² <= cost(i, b) <= best[i]`. Entries with
        // `best <= horizon` therefore lie inside a slab around b's first
        // coordinate; the few above it are read off the top of the queue.
        let nb = self.size[b];
        let weight = nb / (nb + 1.0);
        let mut candidates: Vec<usize> = self
            .queue
            .iter()
            .rev()
            .take_while(|&&(Key(best), _)| best > self.horizon)
            .map(|&(_, i)| i)
            .collect();
        self.slab(b, weight, self.horizon, |i| {
            candidates.push(i);
            true
        });
        for i in candidates {
            if i == b || !self.active[i] || self.partner[i] == b {
                continue;
            }
            let d = self.cost(i, b);
            if d < self.best[i] || (d == self.best[i] && b < self.partner[i]) {
                self.set_entry(i, d, b);
            }
        }

        self.refresh(b);
        self.queue.insert((Key(self.best[b]), b));
    }

    fn root(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    /// Groups numbered in order of their lowest member.
    fn assignment(&self) -> Vec<u32> {
        let mut label = vec![u32::MAX; self.dims];
        let mut next = 0u32;
        (0..self.dims)
            .map(|i| {
                let r = self.root(i);
                if label[r] == u32::MAX {
                    label[r] = next;
                    next += 1;
                }
                label[r]
            })
            .collect()
    }
}

/// Merge map plus encoder normalization, as persisted between runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeArtifact {
    pub format: String,
    pub version: u32,
    pub merge_map: MergeMap,
    pub power_norm: super::jscc::PowerNorm,
}

impl MergeArtifact {
    pub const FORMAT: &'static str = "megsim.jscc-calibration";
    pub const VERSION: u32 = 1;

    pub fn new(merge_map: MergeMap, power_norm: super::jscc::PowerNorm) -> Self {
        Self {
            format: Self::FORMAT.to_string(),
            version: Self::VERSION,
            merge_map,
            power_norm,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidValue(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let artifact: Self =
            serde_json::from_str(s).map_err(|e| Error::config("artifact", e.to_string()))?;
        if artifact.format != Self::FORMAT {
            return Err(Error::config(
                "artifact.format",
                format!("expected {}, found {}", Self::FORMAT, artifact.format),
            ));
        }
        if artifact.version != Self::VERSION {
            return Err(Error::config(
                "artifact.version",
                format!("unsupported version {}", artifact.version),
            ));
        }
        artifact.merge_map.validate()?;
        artifact.power_norm.validate()?;
        Ok(artifact)
    }
}

#[cfg(test)]
pub(crate) fn one_dim(values: Vec<f64>) -> FeatureTensor {
    let n = values.len();
    FeatureTensor::from_parts(vec![n], values, crate::tensor::TensorRole::Seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_tensor, RngStream};
    use proptest::prelude::*;

    fn calib(rows: &[&[f64]]) -> Vec<FeatureTensor> {
        rows.iter().map(|r| one_dim(r.to_vec())).collect()
    }

    fn sse(cal: &[FeatureTensor], members: &[usize]) -> f64 {
        let mut total = 0.0;
        for t in cal {
            let m = members.iter().map(|&i| t.values()[i]).sum::<f64>() / members.len() as f64;
            total += members.iter().map(|&i| (t.values()[i] - m).powi(2)).sum::<f64>();
        }
        total
    }

    /// Cubic greedy oracle: scans every live pair each step, computing the
    /// growth in within-group sum of squares directly from the members.
    fn naive_greedy(cal: &[FeatureTensor], merged: usize) -> Vec<Vec<usize>> {
        let n = cal[0].len();
        let mut groups: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
        for _ in 0..n - merged {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..n {
                let Some(ga) = &groups[a] else { continue };
                for b in a + 1..n {
                    let Some(gb) = &groups[b] else { continue };
                    let joined: Vec<usize> = ga.iter().chain(gb).copied().collect();
                    let inc = sse(cal, &joined) - sse(cal, ga) - sse(cal, gb);
                    if inc < best.0 {
                        best = (inc, a, b);
                    }
                }
            }
            let ga = groups[best.1].take().unwrap();
            groups[best.2].as_mut().unwrap().extend(ga);
        }
        let mut out: Vec<Vec<usize>> = groups
            .into_iter()
            .flatten()
            .map(|mut g| {
                g.sort();
                g
            })
            .collect();
        out.sort();
        out
    }

    fn groups_of(map: &MergeMap) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); map.merged_dim];
        for (i, &g) in map.assignment.iter().enumerate() {
            out[g as usize].push(i);
        }
        out.sort();
        out
    }

    #[test]
    fn identity_when_no_reduction() {
        let cal = calib(&[&[1.0, 2.0, 3.0]]);
        let m = fit_merge_map(&cal, 3).unwrap();
        assert!(m.is_identity());
        assert_eq!(m.group_floor_mse, 0.0);
    }

    #[test]
    fn identical_dims_are_grouped() {
        // Brute force over the three 2-group partitions of 3 dims.
        let cal = calib(&[&[1.0, 1.0, 5.0], &[-2.0, -2.0, 0.5], &[0.3, 0.3, -4.0]]);
        let partitions = [vec![vec![0, 1], vec![2]], vec![vec![0, 2], vec![1]], vec![vec![0], vec![1, 2]]];
        let best = partitions
            .iter()
            .min_by(|p, q| {
                let cost = |p: &Vec<Vec<usize>>| p.iter().map(|g| sse(&cal, g)).sum::<f64>();
                cost(p).total_cmp(&cost(q))
            })
            .unwrap();
        let m = fit_merge_map(&cal, 2).unwrap();
        assert_eq!(&groups_of(&m), best);
        assert_eq!(m.assignment, vec![0, 0, 1]);
        assert_eq!(m.group_floor_mse, 0.0);
    }

    #[test]
    fn single_group_floor_is_within_tensor_variance() {
        let cal: Vec<_> = (0..3)
            .map(|s| gaussian_tensor(&[20], RngStream::new(1, s)).unwrap())
            .collect();
        let m = fit_merge_map(&cal, 1).unwrap();
        assert!(m.assignment.iter().all(|&g| g == 0));
        let var = cal
            .iter()
            .map(|t| t.mean_power() - t.mean().powi(2))
            .sum::<f64>()
            / 3.0;
        assert!((m.group_floor_mse - var).abs() < 1e-12);
    }

    #[test]
    fn matches_naive_greedy() {
        for (seed, n, k, merged) in [(1, 12, 1, 5), (2, 16, 3, 7), (3, 30, 2, 11), (4, 25, 4, 3)] {
            let cal: Vec<_> = (0..k)
                .map(|s| gaussian_tensor(&[n], RngStream::new(seed, s)).unwrap())
                .collect();
            let m = fit_merge_map(&cal, merged).unwrap();
            m.validate().unwrap();
            assert_eq!(groups_of(&m), naive_greedy(&cal, merged), "seed {seed}");
        }
    }

    #[test]
    fn tie_goes_to_lowest_pair() {
        // Every adjacent pair is equally close; the first merge must be (0, 1)
        // and the merged group then sits far from 2.
        let cal = calib(&[&[0.0, 1.0, 2.0, 3.0]]);
        let m = fit_merge_map(&cal, 3).unwrap();
        assert_eq!(m.assignment, vec![0, 0, 1, 2]);
    }

    #[test]
    fn reduce_and_expand_examples() {
        let t = one_dim(vec![1.0, 3.0]);
        let m = MergeMap {
            original_dim: 2,
            merged_dim: 1,
            assignment: vec![0, 0],
            group_floor_mse: 0.0,
        };
        assert_eq!(merge_reduce(&t, &m).unwrap().values(), &[2.0]);
        assert_eq!(merge_expand(&one_dim(vec![5.0]), &m).unwrap().values(), &[5.0, 5.0]);
        let id = MergeMap::identity(2);
        assert_eq!(merge_reduce(&t, &id).unwrap().values(), t.values());
        assert_eq!(merge_expand(&t, &id).unwrap().values(), t.values());
        assert!(merge_reduce(&one_dim(vec![1.0]), &m).is_err());
        assert!(merge_expand(&one_dim(vec![1.0, 2.0]), &m).is_err());
    }

    #[test]
    fn rejects_bad_requests() {
        let cal = calib(&[&[1.0, 2.0]]);
        assert!(fit_merge_map(&cal, 3).is_err());
        assert!(fit_merge_map(&cal, 0).is_err());
        assert!(fit_merge_map(&[], 1).is_err());
        let mixed = vec![one_dim(vec![1.0]), one_dim(vec![1.0, 2.0])];
        assert!(fit_merge_map(&mixed, 1).is_err());
    }

    #[test]
    fn invalid_maps_are_rejected() {
        let mut m = MergeMap::identity(3);
        m.assignment[2] = 1;
        assert!(m.validate().is_err(), "group 2 empty");
        let mut m = MergeMap::identity(3);
        m.assignment.pop();
        assert!(m.validate().is_err());
    }

    #[test]
    fn roundtrip_error_is_within_group_variance() {
        let cal: Vec<_> = (0..4)
            .map(|s| gaussian_tensor(&[200], RngStream::new(9, s)).unwrap())
            .collect();
        let m = fit_merge_map(&cal, 80).unwrap();
        let t = gaussian_tensor(&[200], RngStream::new(10, 0)).unwrap();
        let roundtrip = merge_expand(&merge_reduce(&t, &m).unwrap(), &m).unwrap();
        let got = crate::metrics::mse(&t, &roundtrip).unwrap();
        // Independent evaluation: squared deviation from each group mean.
        let sizes = m.group_sizes();
        let mut means = vec![0.0; m.merged_dim];
        for (i, &g) in m.assignment.iter().enumerate() {
            means[g as usize] += t.values()[i] / sizes[g as usize] as f64;
        }
        let want = m
            .assignment
            .iter()
            .enumerate()
            .map(|(i, &g)| (t.values()[i] - means[g as usize]).powi(2))
            .sum::<f64>()
            / 200.0;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn artifact_json_roundtrip() {
        let cal: Vec<_> = (0..2)
            .map(|s| gaussian_tensor(&[10], RngStream::new(3, s)).unwrap())
            .collect();
        let m = fit_merge_map(&cal, 4).unwrap();
        let a = MergeArtifact::new(m, super::super::jscc::PowerNorm { mean: 0.1, scale: 0.7 });
        let back = MergeArtifact::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, back);
        let bad = a.to_json().unwrap().replace("\"version\":1", "\"version\":9");
        assert!(MergeArtifact::from_json(&bad).is_err());
    }

    proptest! {
        #[test]
        fn reduce_after_expand_is_identity(
            assignment in prop::collection::vec(0u32..4, 4..24),
            values in prop::collection::vec(-10f64..10.0, 4),
        ) {
            // Force every group to be non-empty.
            let mut assignment = assignment;
            for g in 0..4u32 { assignment[g as usize] = g; }
            let m = MergeMap {
                original_dim: assignment.len(),
                merged_dim: 4,
                assignment,
                group_floor_mse: 0.0,
            };
            let r = one_dim(values);
            let back = merge_reduce(&merge_expand(&r, &m).unwrap(), &m).unwrap();
            prop_assert_eq!(back.values(), r.values());
        }
    }
}
