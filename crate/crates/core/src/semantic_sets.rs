//! Bi-directional entailment clustering into semantic equivalence classes,
//! and the set-count uncertainty measure.
//!
//! Two responses belong together when each entails the other: for the
//! ordered pair (a, b) the entailment probability must strictly exceed the
//! contradiction probability, and likewise for (b, a). Ties do not merge.
//! Union-find realizes the transitive closure, so the partition does not
//! depend on pair processing order.

use crate::ingest::ResponseSet;
use crate::nli::{to_probabilities, NliScorer};
use crate::similarity::{PairLogits, SimilarityError};

/// Partition of the m responses into semantic sets. Cluster ids are
/// contiguous, assigned in order of each cluster's smallest member index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticPartition {
    pub assignment: Vec<usize>,
    pub num_sets: usize,
}

/// Merge-probability softmax temperature. Temperature does not change which
/// of the entail/contra probabilities is larger, so the partition is
/// temperature-invariant; 1 keeps the probabilities interpretable.
const MERGE_TEMPERATURE: f64 = 1.0;

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        // Path compression.
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Cluster one question's responses with NLI judgments fetched through
/// `scorer`. Byte-identical responses merge for free; a question whose
/// responses are all identical makes no NLI calls at all.
pub fn cluster_semantic_sets(
    rs: &ResponseSet,
    scorer: &dyn NliScorer,
) -> Result<SemanticPartition, SimilarityError> {
    let pair_logits = PairLogits::collect(rs, scorer)?;
    cluster_from_pair_logits(&pair_logits)
}

/// Cluster from already-fetched pair logits.
pub fn cluster_from_pair_logits(
    pair_logits: &PairLogits,
) -> Result<SemanticPartition, SimilarityError> {
    let m = pair_logits.representatives().len();
    let mut uf = UnionFind::new(m);
    for j1 in 0..m {
        for j2 in (j1 + 1)..m {
            let merge = match (pair_logits.logits(j1, j2), pair_logits.logits(j2, j1)) {
                // Byte-identical responses share a set by definition.
                (None, _) | (_, None) => true,
                (Some(forward), Some(backward)) => {
                    let pf = to_probabilities(forward, MERGE_TEMPERATURE)?;
                    let pb = to_probabilities(backward, MERGE_TEMPERATURE)?;
                    pf.p_entail > pf.p_contra && pb.p_entail > pb.p_contra
                }
            };
            if merge {
                uf.union(j1, j2);
            }
        }
    }
    Ok(canonicalize(&mut uf, m))
}

/// Contiguous cluster ids ordered by smallest member index.
fn canonicalize(uf: &mut UnionFind, m: usize) -> SemanticPartition {
    let mut id_of_root: Vec<Option<usize>> = vec![None; m];
    let mut next = 0usize;
    let mut assignment = Vec::with_capacity(m);
    for j in 0..m {
        let root = uf.find(j);
        let id = *id_of_root[root].get_or_insert_with(|| {
            let id = next;
            next += 1;
            id
        });
        assignment.push(id);
    }
    SemanticPartition {
        assignment,
        num_sets: next,
    }
}

/// The number of semantic sets, as an uncertainty value: more distinct
/// meanings, more uncertain.
pub fn num_set_uncertainty(partition: &SemanticPartition) -> f64 {
    partition.num_sets as f64
}
