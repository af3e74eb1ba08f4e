//! Labelled feature datasets, deterministic splits, normalisation and the
//! nested synthetic generator.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::taxonomy::Taxonomy;

/// Standard deviations below this are treated as zero by [`normalize_features`].
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("feature dimension mismatch at instance {index}: expected {expected}, found {found}")]
    FeatureDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite feature value at instance {index}")]
    NonFinite { index: usize },
    #[error("inconsistent label path at instance {index}")]
    InconsistentPath { index: usize },
    #[error("label path of instance {index} is invalid for the taxonomy")]
    InvalidLabels { index: usize },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("split leaves an empty side ({train} train / {test} test)")]
    EmptySplit { train: usize, test: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(&'static str),
    #[error("dataset is bound to a different taxonomy")]
    TaxonomyMismatch,
}

pub type Result<T> = core::result::Result<T, DataError>;

/// One feature vector with its per-level class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub feature: Vec<f64>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Vec<Instance>,
    feature_dim: usize,
    taxonomy_hash: String,
}

impl Dataset {
    /// Checks dimensions, finiteness and label consistency of every instance.
    pub fn new(feature_dim: usize, instances: Vec<Instance>, taxonomy: &Taxonomy) -> Result<Self> {
        for (index, inst) in instances.iter().enumerate() {
            if inst.feature.len() != feature_dim {
                return Err(DataError::FeatureDimension {
                    index,
                    expected: feature_dim,
                    found: inst.feature.len(),
                });
            }
            if inst.feature.iter().any(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { index });
            }
            match taxonomy.is_consistent_indices(&inst.labels) {
                Ok(true) => {}
                Ok(false) => return Err(DataError::InconsistentPath { index }),
                Err(_) => return Err(DataError::InvalidLabels { index }),
            }
        }
        Ok(Self {
            instances,
            feature_dim,
            taxonomy_hash: taxonomy.fingerprint(),
        })
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn taxonomy_hash(&self) -> &str {
        &self.taxonomy_hash
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Re-checks the binding and every label path against `taxonomy`.
    pub fn check_taxonomy(&self, taxonomy: &Taxonomy) -> Result<()> {
        if self.taxonomy_hash != taxonomy.fingerprint() {
            return Err(DataError::TaxonomyMismatch);
        }
        for (index, inst) in self.instances.iter().enumerate() {
            if taxonomy.is_consistent_indices(&inst.labels) != Ok(true) {
                return Err(DataError::InconsistentPath { index });
            }
        }
        Ok(())
    }

    fn with_instances(&self, instances: Vec<Instance>) -> Self {
        Self {
            instances,
            feature_dim: self.feature_dim,
            taxonomy_hash: self.taxonomy_hash.clone(),
        }
    }

    /// Sub-dataset with the instances at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        self.with_instances(indices.iter().map(|&i| self.instances[i].clone()).collect())
    }
}

/// Seeded permutation, first `⌊fraction·m⌋` instances to train and the rest to test.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidFraction(train_fraction));
    }
    let m = ds.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // the epsilon absorbs representation error, e.g. 0.7 * 90 = 62.99999999999999
    let n_train = libm::floor(train_fraction * m as f64 + 1e-9) as usize;
    let n_train = n_train.min(m);
    if n_train == 0 || n_train == m {
        return Err(DataError::EmptySplit {
            train: n_train,
            test: m - n_train,
        });
    }
    Ok((ds.select(&order[..n_train]), ds.select(&order[n_train..])))
}

/// Parameters of the nested synthetic generator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticSpec {
    pub feature_dim: usize,
    /// Offset radius per level, strictly decreasing.
    pub radii: Vec<f64>,
    pub noise_sigma: f64,
    pub instances_per_leaf: usize,
}

impl SyntheticSpec {
    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(DataError::InvalidSpec("feature_dim must be at least 1"));
        }
        if self.radii.len() != taxonomy.num_levels() {
            return Err(DataError::InvalidSpec("need one radius per taxonomy level"));
        }
        if self.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(DataError::InvalidSpec("radii must be positive and finite"));
        }
        if self.radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(DataError::InvalidSpec("radii must be strictly decreasing"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(DataError::InvalidSpec(
                "noise_sigma must be finite and non-negative",
            ));
        }
        if self.instances_per_leaf == 0 {
            return Err(DataError::InvalidSpec(
                "instances_per_leaf must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Class centres drawn by the generator, `centers[level - 1][index]`.
pub type ClassCenters = Vec<Vec<Vec<f64>>>;

/// Like [`generate_synthetic`], also returning the class centres it drew.
pub fn generate_synthetic_with_centers(
    taxonomy: &Taxonomy,
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<(Dataset, ClassCenters)> {
    spec.validate(taxonomy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.feature_dim;
    let sizes = taxonomy.level_sizes();

    let mut centers: ClassCenters = Vec::with_capacity(sizes.len());
    let r1 = spec.radii[0];
    centers.push(
        (0..sizes[0])
            .map(|_| (0..d).map(|_| rng.random_range(-r1..=r1)).collect())
            .collect(),
    );
    for (l, &r) in spec.radii.iter().enumerate().skip(1) {
        let parents = taxonomy
            .transition_matrix(l)
            .expect("level below the last one");
        let level: Vec<Vec<f64>> = parents
            .parents()
            .iter()
            .map(|&k| {
                centers[l - 1][k]
                    .iter()
                    .map(|c| c + rng.random_range(-r..=r))
                    .collect()
            })
            .collect();
        centers.push(level);
    }

    let mut instances = Vec::with_capacity(taxonomy.leaf_paths().len() * spec.instances_per_leaf);
    for (leaf, path) in taxonomy.leaf_paths().into_iter().enumerate() {
        let center = &centers[sizes.len() - 1][leaf];
        for _ in 0..spec.instances_per_leaf {
            let feature = center
                .iter()
                .map(|c| {
                    let z: f64 = rng.sample(StandardNormal);
                    c + spec.noise_sigma * z
                })
                .collect();
            instances.push(Instance {
                feature,
                labels: path.clone(),
            });
        }
    }
    Ok((Dataset::new(d, instances, taxonomy)?, centers))
}

/// Nested-centre Gaussian data: every leaf gets `instances_per_leaf` points
/// scattered around its centre, labelled with the leaf's ancestor path.
pub fn generate_synthetic(taxonomy: &Taxonomy, spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    generate_synthetic_with_centers(taxonomy, spec, seed).map(|(ds, _)| ds)
}

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn compute(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        let d = ds.feature_dim();
        let m = ds.len() as f64;
        let mut mean = vec![0.0; d];
        for inst in ds.instances() {
            for (s, v) in mean.iter_mut().zip(&inst.feature) {
                *s += v;
            }
        }
        mean.iter_mut().for_each(|s| *s /= m);
        let mut var = vec![0.0; d];
        for inst in ds.instances() {
            for ((s, v), mu) in var.iter_mut().zip(&inst.feature).zip(&mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        let std = var.into_iter().map(|s| libm::sqrt(s / m)).collect();
        Ok(Self { mean, std })
    }

    pub fn transform(&self, feature: &mut [f64]) {
        for ((v, mu), sd) in feature.iter_mut().zip(&self.mean).zip(&self.std) {
            *v -= mu;
            if *sd >= MIN_STD {
                *v /= sd;
            }
        }
    }

    /// Applies the stored shift and scale to every instance of `ds`.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if self.mean.len() != ds.feature_dim() {
            return Err(DataError::FeatureDimension {
                index: 0,
                expected: self.mean.len(),
                found: ds.feature_dim(),
            });
        }
        let instances = ds
            .instances()
            .iter()
            .map(|inst| {
                let mut feature = inst.feature.clone();
                self.transform(&mut feature);
                Instance {
                    feature,
                    labels: inst.labels.clone(),
                }
            })
            .collect();
        Ok(ds.with_instances(instances))
    }
}

/// Shifts every dimension to mean 0 and scales it to unit deviation.
/// Near-constant dimensions are only centred.
pub fn normalize_features(ds: &Dataset) -> Result<(Dataset, FeatureStats)> {
    let stats = FeatureStats::compute(ds)?;
    Ok((stats.apply(ds)?, stats))
}
