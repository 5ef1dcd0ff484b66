use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClusterSet, CorpusError, ProteinRecord};

/// How to draw an artificial sample from a [`ClusterSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub cluster_count: usize,
    pub rng_seed: u64,
    /// Draw a random non-reference member instead of the reference. Clusters
    /// without members fall back to their reference.
    pub pick_members: bool,
}

/// Draws one protein from each of `spec.cluster_count` distinct clusters.
///
/// The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`.
/// Clusters are chosen by `rand::seq::index::sample` over the clusters in id
/// order and then emitted in id order; the member within each cluster is a
/// uniform draw from the same stream.
pub fn make_sample(
    clusters: &ClusterSet,
    spec: &SampleSpec,
) -> Result<Vec<ProteinRecord>, CorpusError> {
    if spec.cluster_count > clusters.len() {
        return Err(CorpusError::TooManyClusters {
            requested: spec.cluster_count,
            available: clusters.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let all: Vec<_> = clusters.iter().collect();
    let mut picked = index::sample(&mut rng, all.len(), spec.cluster_count).into_vec();
    picked.sort_unstable();

    Ok(picked
        .into_iter()
        .map(|i| {
            let c = all[i];
            if spec.pick_members && !c.members.is_empty() {
                c.members[rng.random_range(0..c.members.len())].clone()
            } else {
                c.reference.clone()
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Cluster;
    use std::collections::HashSet;

    fn toy(n: usize) -> ClusterSet {
        ClusterSet::from_clusters((0..n).map(|i| {
            let id = format!("C{i:02}");
            Cluster {
                cluster_id: id.clone(),
                identity: 0.9,
                reference: ProteinRecord::new(format!("R{i}"), id.clone(), "MAK"),
                members: (0..3)
                    .map(|j| ProteinRecord::new(format!("M{i}_{j}"), id.clone(), "MAR"))
                    .collect(),
            }
        }))
    }

    #[test]
    fn full_draw_covers_every_cluster() {
        let set = toy(12);
        let spec = SampleSpec {
            cluster_count: 12,
            rng_seed: 7,
            pick_members: true,
        };
        let s = make_sample(&set, &spec).unwrap();
        let ids: HashSet<_> = s.iter().map(|r| r.cluster_id.clone()).collect();
        assert_eq!(ids.len(), 12);
    }

    #[test]
    fn zero_and_too_many() {
        let set = toy(3);
        let mut spec = SampleSpec {
            cluster_count: 0,
            rng_seed: 1,
            pick_members: false,
        };
        assert!(make_sample(&set, &spec).unwrap().is_empty());
        spec.cluster_count = 4;
        assert_eq!(
            make_sample(&set, &spec),
            Err(CorpusError::TooManyClusters {
                requested: 4,
                available: 3
            })
        );
    }

    #[test]
    fn references_when_not_picking_members() {
        let set = toy(5);
        let spec = SampleSpec {
            cluster_count: 5,
            rng_seed: 3,
            pick_members: false,
        };
        assert!(make_sample(&set, &spec)
            .unwrap()
            .iter()
            .all(|r| r.protein_id.starts_with('R')));
    }

    #[test]
    fn seeded_and_distinct() {
        let set = toy(12);
        for seed in 0..50 {
            let spec = SampleSpec {
                cluster_count: 6,
                rng_seed: seed,
                pick_members: true,
            };
            let a = make_sample(&set, &spec).unwrap();
            assert_eq!(a, make_sample(&set, &spec).unwrap());
            let ids: HashSet<_> = a.iter().map(|r| &r.cluster_id).collect();
            assert_eq!(ids.len(), 6);
        }
    }
}
