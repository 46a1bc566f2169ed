//! Exact simulation of the Λ-coalescent started from `n` labeled leaves.
//!
//! With `b` blocks the chain waits an Exponential(`λ_b`) time, draws a merger
//! size `k` with probability `C(b,k) λ_{b,k} / λ_b`, and merges a uniformly
//! chosen `k`-subset of the current blocks. The run yields both the labeled
//! genealogy and the block-counting trajectory `N^{Λ,n}(t)`.

use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::kernel::{LevyKernel, SpeedCurve};
use crate::measure::{LambdaMeasure, MergerSampler};

/// Rooted ultrametric tree. Nodes `0..n` are the leaves (label = id + 1, age
/// 0); internal nodes follow in merge order, so every child id is smaller
/// than its parent's.
#[derive(Debug, Clone, PartialEq)]
pub struct GenealogyTree {
    n: usize,
    times: Vec<f64>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    leaf_counts: Vec<usize>,
}

impl GenealogyTree {
    fn with_leaves(n: usize) -> Self {
        GenealogyTree {
            n,
            times: vec![0.0; n],
            parent: vec![None; n],
            children: vec![Vec::new(); n],
            leaf_counts: vec![1; n],
        }
    }

    fn push_merge(&mut self, time: f64, children: Vec<usize>) -> usize {
        let id = self.times.len();
        let mut leaves = 0;
        for &c in &children {
            self.parent[c] = Some(id);
            leaves += self.leaf_counts[c];
        }
        self.times.push(time);
        self.parent.push(None);
        self.children.push(children);
        self.leaf_counts.push(leaves);
        id
    }

    /// Builds a tree from explicit merge events `(time, children)`, applied
    /// in order; the `i`-th event creates node `n + i`.
    pub fn from_merges(n: usize, merges: &[(f64, Vec<usize>)]) -> Result<Self> {
        if n == 0 {
            return Err(invalid("a tree needs at least one leaf"));
        }
        let mut tree = Self::with_leaves(n);
        for (time, children) in merges {
            let id = tree.times.len();
            if children.len() < 2 {
                return Err(invalid("every merge needs at least two children"));
            }
            for &c in children {
                if c >= id || tree.parent[c].is_some() {
                    return Err(invalid(format!("child {c} is unknown or already merged")));
                }
                if !(tree.times[c] < *time) {
                    return Err(invalid(format!("merge at {time} is not above child {c}")));
                }
            }
            tree.push_merge(*time, children.clone());
        }
        if tree.parent.iter().filter(|p| p.is_none()).count() != 1 {
            return Err(invalid("merges do not produce a single root"));
        }
        Ok(tree)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_nodes(&self) -> usize {
        self.times.len()
    }

    pub fn root(&self) -> usize {
        self.times.len() - 1
    }

    /// Merge time (age) of a node; 0 for leaves.
    pub fn time(&self, node: usize) -> f64 {
        self.times[node]
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.n
    }

    /// Number of leaves subtended by a node.
    pub fn leaf_count(&self, node: usize) -> usize {
        self.leaf_counts[node]
    }

    /// Length of the branch above `node` (0 for the root).
    pub fn branch_length(&self, node: usize) -> f64 {
        self.parent[node].map_or(0.0, |p| self.times[p] - self.times[node])
    }

    /// `τ_1^n`, the age of the root.
    pub fn tmrca(&self) -> f64 {
        self.times[self.root()]
    }

    /// `L_n`, the sum of all branch lengths.
    pub fn total_length(&self) -> f64 {
        (0..self.num_nodes()).map(|v| self.branch_length(v)).sum()
    }

    pub fn internal_nodes(&self) -> std::ops::Range<usize> {
        self.n..self.num_nodes()
    }

    /// Newick string, leaves named by label, branch lengths in coalescent
    /// time units.
    pub fn to_newick(&self) -> String {
        enum Step {
            Open(usize),
            Close(usize),
        }
        let mut out = String::new();
        let mut stack = vec![Step::Open(self.root())];
        while let Some(step) = stack.pop() {
            match step {
                Step::Open(v) if self.is_leaf(v) => {
                    write!(out, "{}", v + 1).unwrap();
                    self.write_length(&mut out, v);
                }
                Step::Open(v) => {
                    out.push('(');
                    stack.push(Step::Close(v));
                    for (i, &c) in self.children[v].iter().enumerate().rev() {
                        stack.push(Step::Open(c));
                        if i > 0 {
                            stack.push(Step::Close(usize::MAX));
                        }
                    }
                }
                Step::Close(usize::MAX) => out.push(','),
                Step::Close(v) => {
                    out.push(')');
                    self.write_length(&mut out, v);
                }
            }
        }
        out.push(';');
        out
    }

    fn write_length(&self, out: &mut String, v: usize) {
        if self.parent[v].is_some() {
            write!(out, ":{}", self.branch_length(v)).unwrap();
        }
    }

    /// The subtree spanned by leaves `1..=m`, with pass-through nodes
    /// contracted.
    pub fn restrict(&self, m: usize) -> Result<GenealogyTree> {
        Ok(self.restrict_with_map(m)?.0)
    }

    /// As [`Self::restrict`], also returning how original branches map onto
    /// the restricted tree.
    pub fn restrict_with_map(&self, m: usize) -> Result<(GenealogyTree, Restriction)> {
        if m == 0 || m > self.n {
            return Err(invalid(format!("restriction size {m} outside [1, {}]", self.n)));
        }
        let nodes = self.num_nodes();
        let mut retained = vec![0usize; nodes];
        for leaf in 0..m {
            retained[leaf] = 1;
        }
        let mut rep: Vec<Option<usize>> = vec![None; nodes];
        for leaf in 0..m {
            rep[leaf] = Some(leaf);
        }
        let mut out = Self::with_leaves(m);
        for v in self.n..nodes {
            let kept: Vec<usize> = self.children[v].iter().copied().filter(|&c| retained[c] > 0).collect();
            retained[v] = kept.iter().map(|&c| retained[c]).sum();
            rep[v] = match kept.len() {
                0 => None,
                1 => rep[kept[0]],
                _ => {
                    let kids = kept.iter().map(|&c| rep[c].expect("retained child")).collect();
                    Some(out.push_merge(self.times[v], kids))
                }
            };
        }
        let branch_map = (0..nodes)
            .map(|v| (retained[v] >= 1 && retained[v] < m).then(|| rep[v].expect("retained node")))
            .collect();
        Ok((out, Restriction { m, branch_map, retained }))
    }
}

/// Correspondence between an original tree and its restriction to leaves
/// `1..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    pub m: usize,
    /// For each original node: the restricted node whose branch contains the
    /// original branch above it, if that branch lies in the restricted tree.
    pub branch_map: Vec<Option<usize>>,
    /// For each original node: how many of the leaves `1..=m` it subtends.
    pub retained: Vec<usize>,
}

/// Piecewise-constant block count `N^{Λ,n}(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTrajectory {
    pub jump_times: Vec<f64>,
    /// `block_counts[0] = n`; `block_counts[i + 1]` holds after jump `i`.
    pub block_counts: Vec<u64>,
}

impl BlockTrajectory {
    pub fn n(&self) -> u64 {
        self.block_counts[0]
    }

    /// `N(t)`, right-continuous.
    pub fn count_at(&self, t: f64) -> u64 {
        let jumps = self.jump_times.partition_point(|&s| s <= t);
        self.block_counts[jumps]
    }

    /// Whether the block count takes the value `k` exactly at some time.
    pub fn attains(&self, k: u64) -> bool {
        self.block_counts.contains(&k)
    }

    /// `τ_k^n = inf{t : N(t) <= k}`.
    pub fn tau(&self, k: u64) -> f64 {
        match self.block_counts.iter().position(|&c| c <= k) {
            Some(0) => 0.0,
            Some(i) => self.jump_times[i - 1],
            None => f64::INFINITY,
        }
    }

    /// `∫_0^{τ_1} N(t) dt`, which equals the tree length.
    pub fn integral(&self) -> f64 {
        let mut prev = 0.0;
        let mut total = 0.0;
        for (i, &t) in self.jump_times.iter().enumerate() {
            total += self.block_counts[i] as f64 * (t - prev);
            prev = t;
        }
        total
    }

    /// `∫_0^{τ_1} u N(u) du`.
    pub fn weighted_integral(&self) -> f64 {
        let mut prev = 0.0;
        let mut total = 0.0;
        for (i, &t) in self.jump_times.iter().enumerate() {
            total += self.block_counts[i] as f64 * 0.5 * (t * t - prev * prev);
            prev = t;
        }
        total
    }

    /// Writes `time,block_count` rows, starting with `(0, n)`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "time,block_count")?;
        writeln!(w, "0,{}", self.block_counts[0])?;
        for (t, c) in self.jump_times.iter().zip(&self.block_counts[1..]) {
            writeln!(w, "{t},{c}")?;
        }
        Ok(())
    }
}

/// Reusable simulator for one measure, valid for sample sizes up to `n_max`.
pub struct Simulator {
    sampler: MergerSampler,
}

impl Simulator {
    pub fn new(measure: &LambdaMeasure, n_max: usize) -> Result<Self> {
        Ok(Simulator { sampler: MergerSampler::new(measure, n_max as u64)? })
    }

    pub fn n_max(&self) -> usize {
        self.sampler.b_max() as usize
    }

    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(GenealogyTree, BlockTrajectory)> {
        if n == 0 {
            return Err(invalid("cannot simulate a coalescent on zero leaves"));
        }
        if n > self.n_max() && n > 1 {
            return Err(invalid(format!("n = {n} exceeds simulator capacity {}", self.n_max())));
        }
        let mut tree = GenealogyTree::with_leaves(n);
        let mut pool: Vec<usize> = (0..n).collect();
        let mut jump_times = Vec::new();
        let mut block_counts = vec![n as u64];
        let mut t = 0.0;
        while pool.len() > 1 {
            let b = pool.len();
            let rate = self.sampler.total_rate(b as u64);
            let wait: f64 = Exp1.sample(rng);
            let next = t + wait / rate;
            if !(next > t) {
                return Err(Error::TiedEventTimes(t));
            }
            t = next;
            let k = self.sampler.sample(b as u64, rng.random::<f64>())? as usize;
            // partial Fisher–Yates: the first k slots become a uniform k-subset
            for i in 0..k {
                let j = rng.random_range(i..b);
                pool.swap(i, j);
            }
            let children: Vec<usize> = pool[..k].to_vec();
            let id = tree.push_merge(t, children);
            pool[0] = id;
            for i in (1..k).rev() {
                pool.swap_remove(i);
            }
            jump_times.push(t);
            block_counts.push(pool.len() as u64);
        }
        Ok((tree, BlockTrajectory { jump_times, block_counts }))
    }
}

/// Simulates one genealogy of `n` leaves.
pub fn simulate_tree<R: Rng + ?Sized>(
    measure: &LambdaMeasure,
    n: usize,
    rng: &mut R,
) -> Result<(GenealogyTree, BlockTrajectory)> {
    Simulator::new(measure, n)?.simulate(n, rng)
}

/// Fraction of `reps` trajectories started from `from` blocks that pass
/// through exactly `target` blocks. A diagnostic for how often a large
/// coalescent visits a given level; no limit is asserted.
pub fn attainment_frequency(sim: &Simulator, from: usize, target: u64, seed: u64, reps: u64) -> Result<f64> {
    let mut hits = 0u64;
    for r in 0..reps {
        let (_, traj) = sim.simulate(from, &mut crate::rng::stream(seed, from as u64, r, crate::rng::Purpose::Tree))?;
        hits += u64::from(traj.attains(target));
    }
    Ok(hits as f64 / reps as f64)
}

/// One row of the speed-of-coming-down comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub blocks: u64,
    /// `v(t_n + t)`.
    pub speed: f64,
    pub ratio: f64,
}

/// Compares `N^{Λ,n}(t)` with `v(t_n + t)` on `t_grid`. Refuses measures
/// that fail Grey's condition.
pub fn trajectory_stats(tr: &BlockTrajectory, kernel: &LevyKernel, t_grid: &[f64]) -> Result<Vec<TrajectoryRow>> {
    let curve = kernel.speed_curve(tr.n(), t_grid)?;
    trajectory_stats_against(tr, &curve)
}

/// As [`trajectory_stats`] with a precomputed reference curve.
pub fn trajectory_stats_against(tr: &BlockTrajectory, curve: &SpeedCurve) -> Result<Vec<TrajectoryRow>> {
    if curve.n != tr.n() {
        return Err(invalid(format!("curve built for n = {}, trajectory has n = {}", curve.n, tr.n())));
    }
    Ok(curve
        .t_grid
        .iter()
        .zip(&curve.values)
        .map(|(&t, &speed)| {
            let blocks = tr.count_at(t);
            TrajectoryRow { t, blocks, speed, ratio: blocks as f64 / speed }
        })
        .collect())
}

/// `sup |ratio - 1|` over a comparison table.
pub fn max_ratio_deviation(rows: &[TrajectoryRow]) -> f64 {
    rows.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max)
}
