//! Mutation overlays and the statistics read off them.
//!
//! Mutations fall on the branches of a genealogy as a Poisson process of
//! intensity `θ` per unit branch length. Under the infinite-sites reading,
//! each mark is a segregating site. Under the infinite-alleles reading, each
//! mark creates a new type that its descendants inherit unless a younger
//! mark intervenes.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::engine::{GenealogyTree, Restriction};
use crate::error::{invalid, Error, Result};

/// One mutation: it sits on the branch above `branch`, at age `age`, and is
/// carried by `subtended` leaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mark {
    pub branch: usize,
    pub age: f64,
    pub subtended: usize,
}

/// Marks sorted by `(branch, age)`; the first mark of a branch is its
/// youngest.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationOverlay {
    pub theta: f64,
    pub marks: Vec<Mark>,
}

impl MutationOverlay {
    pub fn from_marks(theta: f64, mut marks: Vec<Mark>) -> Self {
        marks.sort_by(|a, b| a.branch.cmp(&b.branch).then(a.age.total_cmp(&b.age)));
        MutationOverlay { theta, marks }
    }

    /// `S_n`.
    pub fn segregating_sites(&self) -> usize {
        self.marks.len()
    }

    /// The overlay seen on the restriction of its tree to leaves `1..=m`.
    pub fn restrict(&self, map: &Restriction) -> MutationOverlay {
        let marks = self
            .marks
            .iter()
            .filter_map(|mk| {
                map.branch_map[mk.branch].map(|b| Mark { branch: b, age: mk.age, subtended: map.retained[mk.branch] })
            })
            .collect();
        MutationOverlay::from_marks(self.theta, marks)
    }
}

/// Drops Poisson(`θ ℓ`) marks on every branch of length `ℓ`, at ages uniform
/// strictly inside the branch.
pub fn overlay_mutations<R: Rng + ?Sized>(tree: &GenealogyTree, theta: f64, rng: &mut R) -> Result<MutationOverlay> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(invalid(format!("mutation rate must be finite and non-negative, got {theta}")));
    }
    let mut marks = Vec::new();
    for v in 0..tree.num_nodes() {
        let len = tree.branch_length(v);
        let mean = theta * len;
        if !(mean > 0.0) {
            continue;
        }
        let count = Poisson::new(mean).map_err(|e| invalid(e.to_string()))?.sample(rng) as usize;
        let lo = tree.time(v);
        let hi = lo + len;
        let start = marks.len();
        for _ in 0..count {
            let age = loop {
                let a = lo + rng.random::<f64>() * len;
                if a > lo && a < hi {
                    break a;
                }
            };
            marks.push(Mark { branch: v, age, subtended: tree.leaf_count(v) });
        }
        marks[start..].sort_by(|a, b| a.age.total_cmp(&b.age));
    }
    Ok(MutationOverlay { theta, marks })
}

/// `ξ_k` for `k = 1..n-1`: sites carried by exactly `k` leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSpectrum {
    pub n: usize,
    /// `counts[k - 1] = ξ_k`.
    pub counts: Vec<u64>,
}

impl SiteSpectrum {
    pub fn get(&self, k: usize) -> u64 {
        if k == 0 || k > self.counts.len() {
            0
        } else {
            self.counts[k - 1]
        }
    }

    pub fn segregating_sites(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn site_spectrum(overlay: &MutationOverlay, n: usize) -> SiteSpectrum {
    let mut counts = vec![0u64; n.saturating_sub(1)];
    for mk in &overlay.marks {
        if mk.subtended >= 1 && mk.subtended < n {
            counts[mk.subtended - 1] += 1;
        }
    }
    SiteSpectrum { n, counts }
}

/// Where a type came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TypeOrigin {
    /// Index into the overlay's marks.
    Mark(usize),
    /// No mark between the leaves and the root.
    Ancestral,
}

/// Partition of the leaf labels `1..=n` into allelic types.
#[derive(Debug, Clone, PartialEq)]
pub struct AllelicPartition {
    pub n: usize,
    /// Blocks of leaf labels, each sorted, ordered by smallest label.
    pub blocks: Vec<Vec<usize>>,
    pub origins: Vec<TypeOrigin>,
    /// `S_n` of the overlay that produced the partition.
    pub segregating: usize,
}

impl AllelicPartition {
    /// `A_n`, taken to be 0 when no mutation occurred at all.
    pub fn allele_count(&self) -> usize {
        if self.segregating == 0 {
            0
        } else {
            self.blocks.len()
        }
    }

    /// `F_k` for `k = 1..=n`: the number of types carried by exactly `k`
    /// leaves; `result[k - 1] = F_k`.
    pub fn family_spectrum(&self) -> Vec<u64> {
        let mut f = vec![0u64; self.n];
        if self.segregating > 0 {
            for b in &self.blocks {
                f[b.len() - 1] += 1;
            }
        }
        f
    }

    /// As [`Self::family_spectrum`] without the ancestral block. Each of these
    /// families descends from a single mark, so its cumulative tails are
    /// dominated by those of the site spectrum.
    pub fn mutant_family_spectrum(&self) -> Vec<u64> {
        let mut f = vec![0u64; self.n];
        for (b, o) in self.blocks.iter().zip(&self.origins) {
            if matches!(o, TypeOrigin::Mark(_)) {
                f[b.len() - 1] += 1;
            }
        }
        f
    }
}

pub fn allelic_partition(tree: &GenealogyTree, overlay: &MutationOverlay) -> AllelicPartition {
    let nodes = tree.num_nodes();
    let mut youngest: Vec<Option<usize>> = vec![None; nodes];
    for (i, mk) in overlay.marks.iter().enumerate().rev() {
        youngest[mk.branch] = Some(i);
    }
    // parents have larger ids, so a descending sweep visits them first
    let mut types = vec![TypeOrigin::Ancestral; nodes];
    for v in (0..nodes).rev() {
        types[v] = match (youngest[v], tree.parent(v)) {
            (Some(i), _) => TypeOrigin::Mark(i),
            (None, Some(p)) => types[p],
            (None, None) => TypeOrigin::Ancestral,
        };
    }
    let mut index: HashMap<TypeOrigin, usize> = HashMap::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut origins = Vec::new();
    for leaf in 0..tree.n() {
        let t = types[leaf];
        let b = *index.entry(t).or_insert_with(|| {
            blocks.push(Vec::new());
            origins.push(t);
            blocks.len() - 1
        });
        blocks[b].push(leaf + 1);
    }
    AllelicPartition { n: tree.n(), blocks, origins, segregating: overlay.marks.len() }
}

/// `M_n`: the age of a uniformly chosen mark, or 0 when there is none.
pub fn random_mutation_age<R: Rng + ?Sized>(overlay: &MutationOverlay, rng: &mut R) -> f64 {
    if overlay.marks.is_empty() {
        0.0
    } else {
        overlay.marks[rng.random_range(0..overlay.marks.len())].age
    }
}

/// Allele frequencies `|block| / n`, in decreasing order.
pub fn allele_frequencies(partition: &AllelicPartition) -> Vec<f64> {
    let n = partition.n as f64;
    let mut f: Vec<f64> = partition.blocks.iter().map(|b| b.len() as f64 / n).collect();
    f.sort_by(|a, b| b.total_cmp(a));
    f
}

/// Law of `M_n` conditional on `S_n > 0`: `probs[k - 1] = M_k / S_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtendedLaw {
    pub probs: Vec<f64>,
}

impl SubtendedLaw {
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 || k > self.probs.len() {
            0.0
        } else {
            self.probs[k - 1]
        }
    }

    /// `P(M_n >= k)`.
    pub fn tail(&self, k: usize) -> f64 {
        self.probs.iter().skip(k.saturating_sub(1)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }
}

pub fn leaves_under_random_mutation(overlay: &MutationOverlay) -> Result<SubtendedLaw> {
    if overlay.marks.is_empty() {
        return Err(Error::NoMutations);
    }
    let kmax = overlay.marks.iter().map(|m| m.subtended).max().unwrap_or(0);
    let mut probs = vec![0.0; kmax];
    let w = 1.0 / overlay.marks.len() as f64;
    for mk in &overlay.marks {
        probs[mk.subtended - 1] += w;
    }
    Ok(SubtendedLaw { probs })
}

/// Counts marks `x` for which no other mark lies on `T(x)`, the part of the
/// tree spanned by `x` and the `k` smallest-labeled leaves below it.
pub fn unblocked_count(tree: &GenealogyTree, overlay: &MutationOverlay, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(invalid("unblocked fraction needs k >= 1"));
    }
    let nodes = tree.num_nodes();
    let mut on_branch = vec![0usize; nodes];
    for mk in &overlay.marks {
        on_branch[mk.branch] += 1;
    }
    // k smallest leaf ids under each node
    let mut smallest: Vec<Vec<usize>> = Vec::with_capacity(nodes);
    for v in 0..nodes {
        if tree.is_leaf(v) {
            smallest.push(vec![v]);
        } else {
            let mut ids: Vec<usize> = tree.children(v).iter().flat_map(|&c| smallest[c].iter().copied()).collect();
            ids.sort_unstable();
            ids.truncate(k);
            smallest.push(ids);
        }
    }
    let mut unblocked = 0;
    for v in 0..nodes {
        if on_branch[v] == 0 {
            continue;
        }
        // only the youngest mark on a branch can be unblocked
        let blocked = smallest[v].iter().any(|&leaf| {
            let mut w = leaf;
            while w != v {
                if on_branch[w] > 0 {
                    return true;
                }
                w = tree.parent(w).expect("leaf lies below v");
            }
            false
        });
        if !blocked {
            unblocked += 1;
        }
    }
    Ok(unblocked)
}

/// Unblocked marks as a fraction of `S_n`; 1 when there are no marks.
pub fn unblocked_fraction(tree: &GenealogyTree, overlay: &MutationOverlay, k: usize) -> Result<f64> {
    let count = unblocked_count(tree, overlay, k)?;
    Ok(if overlay.marks.is_empty() { 1.0 } else { count as f64 / overlay.marks.len() as f64 })
}

/// Per-replicate summary row; spectra are sparse `(k, count)` lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateStats {
    pub n: usize,
    pub theta: f64,
    pub seed: u64,
    pub replicate: u64,
    pub segregating_sites: usize,
    pub allele_count: usize,
    pub total_length: f64,
    pub tmrca: f64,
    pub mutation_age: f64,
    pub site_spectrum: Vec<(usize, u64)>,
    pub family_spectrum: Vec<(usize, u64)>,
}

impl ReplicateStats {
    /// Simulates replicate `replicate` of the `(seed, n)` stream family: tree,
    /// overlay, then the mark sampled for `M_n`.
    pub fn simulate(
        sim: &crate::engine::Simulator,
        n: usize,
        theta: f64,
        seed: u64,
        replicate: u64,
    ) -> Result<Self> {
        use crate::rng::{stream, Purpose};
        let (tree, _) = sim.simulate(n, &mut stream(seed, n as u64, replicate, Purpose::Tree))?;
        let overlay = overlay_mutations(&tree, theta, &mut stream(seed, n as u64, replicate, Purpose::Mutation))?;
        let partition = allelic_partition(&tree, &overlay);
        let age = random_mutation_age(&overlay, &mut stream(seed, n as u64, replicate, Purpose::Sampling));
        let sparse = |v: &[u64]| v.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i + 1, c)).collect();
        Ok(ReplicateStats {
            n,
            theta,
            seed,
            replicate,
            segregating_sites: overlay.segregating_sites(),
            allele_count: partition.allele_count(),
            total_length: tree.total_length(),
            tmrca: tree.tmrca(),
            mutation_age: age,
            site_spectrum: sparse(&site_spectrum(&overlay, n).counts),
            family_spectrum: sparse(&partition.family_spectrum()),
        })
    }
}
