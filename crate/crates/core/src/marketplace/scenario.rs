use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    corrupt, gaussian_mixture_with_counts, inject_duplicates, sample_dirichlet, sample_weighted, Corruption,
    EmbeddingSet, MixtureSpec,
};
use crate::error::{Error, Result};
use crate::kernel::norm;
use crate::seed::{derive_seed, rng_for};

// stream roles for derive_seed
const WORLD: u64 = 0;
const BUYER: u64 = 1;
const SELLER: u64 = 2;
const TEST: u64 = 3;
const PROPS: u64 = 4;
const DUPLICATES: u64 = 5;
const CORRUPTION: u64 = 6;
const FOREIGN: u64 = 7;
pub(crate) const DECOYS: u64 = 8;
pub(crate) const ORDER: u64 = 9;
pub(crate) const MODEL: u64 = 10;

/// Shape of the synthetic embedding world.
///
/// Every dataset shares one global offset and adds its own offset; each class
/// of a dataset adds a further random direction. Points scatter isotropically
/// around their class mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub dim: usize,
    pub num_classes: usize,
    pub num_datasets: usize,
    /// Norm of each class offset.
    pub class_scale: f64,
    /// Expected norm of a point's deviation from its class mean.
    pub within_scale: f64,
    /// Norm of the offset common to all datasets.
    pub shared_offset: f64,
    /// Norm of each dataset's own offset.
    pub dataset_offset: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            dim: 512,
            num_classes: 10,
            num_datasets: 20,
            class_scale: 1.0,
            within_scale: 0.3,
            shared_offset: 1.0,
            dataset_offset: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuyerSpec {
    pub dataset: usize,
    pub query_size: usize,
    /// Held-out buyer points for downstream evaluation.
    pub test_size: usize,
}

impl Default for BuyerSpec {
    fn default() -> Self {
        BuyerSpec {
            dataset: 0,
            query_size: 100,
            test_size: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SellerSpec {
    pub dataset: usize,
    pub size: usize,
    pub duplication: usize,
    pub corruption: Option<Corruption>,
    pub severity: u32,
    /// Draw per-seller class proportions from Dirichlet(alpha) instead of
    /// sampling classes uniformly.
    pub dirichlet_alpha: Option<f64>,
    /// Number of sellers this entry expands to.
    pub count: usize,
}

impl Default for SellerSpec {
    fn default() -> Self {
        SellerSpec {
            dataset: 0,
            size: 10_000,
            duplication: 1,
            corruption: None,
            severity: 0,
            dirichlet_alpha: None,
            count: 1,
        }
    }
}

impl SellerSpec {
    fn is_clean(&self) -> bool {
        self.duplication == 1 && self.severity == 0 && self.dirichlet_alpha.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    Clustering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationSpec {
    pub buyers: usize,
    pub task: Task,
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        CorrelationSpec {
            buyers: 10,
            task: Task::Clustering,
        }
    }
}

/// Declarative experiment description, usually loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub k: usize,
    /// Index into the expanded seller list; defaults to the first clean
    /// seller drawn from the buyer's dataset.
    pub iid_seller: Option<usize>,
    pub world: WorldSpec,
    pub buyer: BuyerSpec,
    pub sellers: Vec<SellerSpec>,
    pub correlation: CorrelationSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "scenario".into(),
            seed: 0,
            trials: 10,
            k: 10,
            iid_seller: None,
            world: WorldSpec::default(),
            buyer: BuyerSpec::default(),
            sellers: Vec::new(),
            correlation: CorrelationSpec::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        let w = &self.world;
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if w.dim == 0 || w.num_classes == 0 || w.num_datasets == 0 {
            return bad("world needs positive dim, num_classes and num_datasets".into());
        }
        if self.k < 1 || self.k > w.dim {
            return bad(format!("k = {} outside 1..={}", self.k, w.dim));
        }
        for (what, v) in [
            ("class_scale", w.class_scale),
            ("shared_offset", w.shared_offset),
            ("dataset_offset", w.dataset_offset),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{what} must be a nonnegative number"));
            }
        }
        if !(w.within_scale > 0.0 && w.within_scale.is_finite()) {
            return bad("within_scale must be positive".into());
        }
        if self.buyer.dataset >= w.num_datasets {
            return bad(format!("buyer dataset {} out of range", self.buyer.dataset));
        }
        if self.buyer.query_size < self.k {
            return bad(format!("buyer query_size {} smaller than k", self.buyer.query_size));
        }
        if self.sellers.is_empty() {
            return bad("at least one seller is required".into());
        }
        for (i, s) in self.sellers.iter().enumerate() {
            if s.dataset >= w.num_datasets {
                return bad(format!("seller entry {i}: dataset {} out of range", s.dataset));
            }
            if s.size < 1 || s.duplication < 1 || s.count < 1 {
                return bad(format!("seller entry {i}: size, duplication and count must be >= 1"));
            }
            if s.severity > 5 {
                return bad(format!("seller entry {i}: severity {} outside 0..=5", s.severity));
            }
            if s.severity > 0 && s.corruption.is_none() {
                return bad(format!("seller entry {i}: severity given without a corruption kind"));
            }
            if let Some(a) = s.dirichlet_alpha {
                if !(a > 0.0 && a.is_finite()) {
                    return bad(format!("seller entry {i}: dirichlet_alpha must be positive"));
                }
            }
        }
        if let Some(i) = self.iid_seller {
            if i >= self.num_sellers() {
                return bad(format!("iid_seller {i} out of range"));
            }
        }
        Ok(())
    }

    /// Seller entries with `count` expanded.
    pub fn expanded_sellers(&self) -> Vec<SellerSpec> {
        self.sellers
            .iter()
            .flat_map(|s| std::iter::repeat_n(SellerSpec { count: 1, ..s.clone() }, s.count))
            .collect()
    }

    pub fn num_sellers(&self) -> usize {
        self.sellers.iter().map(|s| s.count).sum()
    }

    pub fn iid_index(&self) -> Result<usize> {
        if let Some(i) = self.iid_seller {
            return Ok(i);
        }
        self.expanded_sellers()
            .iter()
            .position(|s| s.dataset == self.buyer.dataset && s.is_clean())
            .ok_or_else(|| Error::Scenario("no seller shares the buyer's distribution".into()))
    }
}

/// Materialized world: class means for every dataset.
#[derive(Debug, Clone)]
pub struct World {
    spec: WorldSpec,
    class_means: Vec<Vec<Vec<f64>>>,
}

fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

impl World {
    pub fn new(spec: &WorldSpec, seed: u64) -> World {
        let d = spec.dim;
        let mut rng = rng_for(seed, &[WORLD]);
        let shared: Vec<f64> = random_unit(d, &mut rng)
            .iter()
            .map(|v| v * spec.shared_offset)
            .collect();
        let class_means = (0..spec.num_datasets)
            .map(|_| {
                let delta = random_unit(d, &mut rng);
                (0..spec.num_classes)
                    .map(|_| {
                        let a = random_unit(d, &mut rng);
                        (0..d)
                            .map(|j| shared[j] + spec.dataset_offset * delta[j] + spec.class_scale * a[j])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        World {
            spec: spec.clone(),
            class_means,
        }
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn class_means(&self, dataset: usize) -> &[Vec<f64>] {
        &self.class_means[dataset]
    }

    /// `n` points from `dataset`, classes drawn from `props` (uniform when
    /// `None`).
    pub fn sample(&self, dataset: usize, n: usize, props: Option<&[f64]>, seed: u64) -> Result<EmbeddingSet> {
        if dataset >= self.class_means.len() {
            return Err(Error::InvalidArgument(format!("dataset {dataset} out of range")));
        }
        let c = self.spec.num_classes;
        let uniform = vec![1.0; c];
        let weights = props.unwrap_or(&uniform);
        if weights.len() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                found: weights.len(),
            });
        }
        let mut rng = rng_for(seed, &[0]);
        let mut counts = vec![0usize; c];
        for _ in 0..n {
            counts[sample_weighted(weights, &mut rng)] += 1;
        }
        let spec = MixtureSpec {
            num_classes: c,
            dim: self.spec.dim,
            class_means: self.class_means[dataset].clone(),
            class_scales: vec![self.spec.within_scale; c],
            points_per_class: 0,
            seed: derive_seed(seed, &[1]),
        };
        Ok(gaussian_mixture_with_counts(&spec, &counts)?.with_name(format!("dataset{dataset}")))
    }
}

/// Scenario bound to its world, producing every data sample by logical
/// position so results do not depend on evaluation order.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub scenario: Scenario,
    pub world: World,
    sellers: Vec<SellerSpec>,
}

/// Per-call changes to a seller's recipe, used by the sweeps.
#[derive(Debug, Clone, Copy, Default)]
pub struct SellerOverride {
    pub size: Option<usize>,
    pub duplication: Option<usize>,
    pub corruption: Option<(Corruption, u32)>,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Simulation> {
        scenario.validate()?;
        Ok(Simulation {
            world: World::new(&scenario.world, scenario.seed),
            sellers: scenario.expanded_sellers(),
            scenario: scenario.clone(),
        })
    }

    pub fn sellers(&self) -> &[SellerSpec] {
        &self.sellers
    }

    pub fn seed(&self, path: &[u64]) -> u64 {
        derive_seed(self.scenario.seed, path)
    }

    pub fn buyer_query(&self, trial: usize, size: usize) -> Result<EmbeddingSet> {
        let b = &self.scenario.buyer;
        Ok(self
            .world
            .sample(b.dataset, size, None, self.seed(&[BUYER, trial as u64]))?
            .with_name("buyer"))
    }

    pub fn buyer_test(&self, trial: usize) -> Result<EmbeddingSet> {
        let b = &self.scenario.buyer;
        Ok(self
            .world
            .sample(b.dataset, b.test_size, None, self.seed(&[TEST, trial as u64]))?
            .with_name("buyer-test"))
    }

    /// Unrelated sample from `dataset` for decoy construction.
    pub fn foreign(&self, trial: usize, dataset: usize, size: usize) -> Result<EmbeddingSet> {
        self.world
            .sample(dataset, size, None, self.seed(&[FOREIGN, trial as u64, dataset as u64]))
    }

    /// Class proportions of seller `j` (fixed across trials), if Dirichlet.
    pub fn seller_props(&self, j: usize) -> Result<Option<Vec<f64>>> {
        match self.sellers[j].dirichlet_alpha {
            None => Ok(None),
            Some(alpha) => {
                let mut rng = rng_for(self.scenario.seed, &[PROPS, j as u64]);
                sample_dirichlet(alpha, self.world.spec.num_classes, &mut rng).map(Some)
            }
        }
    }

    pub fn seller(&self, trial: usize, j: usize, over: SellerOverride) -> Result<EmbeddingSet> {
        let spec = self
            .sellers
            .get(j)
            .ok_or_else(|| Error::InvalidArgument(format!("seller {j} out of range")))?;
        let size = over.size.unwrap_or(spec.size);
        let props = self.seller_props(j)?;
        let (t, jj) = (trial as u64, j as u64);
        let mut set = self
            .world
            .sample(spec.dataset, size, props.as_deref(), self.seed(&[SELLER, t, jj]))?;
        let dup = over.duplication.unwrap_or(spec.duplication);
        if dup > 1 {
            set = inject_duplicates(&set, dup, self.seed(&[DUPLICATES, t, jj]))?;
        }
        let corruption = over.corruption.or(spec.corruption.map(|c| (c, spec.severity)));
        if let Some((kind, severity)) = corruption {
            if severity > 0 {
                set = corrupt(&set, kind, severity, self.seed(&[CORRUPTION, t, jj]))?;
            }
        }
        Ok(set.with_name(format!("seller{j}")))
    }
}
