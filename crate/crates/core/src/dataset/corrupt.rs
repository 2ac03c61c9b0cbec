use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::EmbeddingSet;
use crate::error::{Error, Result};
use crate::kernel::{norm, Matrix};
use crate::seed::derive_seed;

/// Systematic perturbation applied to every row of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    /// Additive noise with per-coordinate std `0.05·severity·std_j`.
    Gaussian,
    /// A fixed half of the coordinates multiplied by `1 + 0.1·severity`.
    Scale,
    /// `floor(0.1·severity·d)` coordinates of each row set to zero.
    Mask,
    /// A fixed unit direction times `0.1·severity` added to every row.
    Shift,
}

impl Corruption {
    pub const ALL: [Corruption; 4] = [
        Corruption::Gaussian,
        Corruption::Scale,
        Corruption::Mask,
        Corruption::Shift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Corruption::Gaussian => "gaussian",
            Corruption::Scale => "scale",
            Corruption::Mask => "mask",
            Corruption::Shift => "shift",
        }
    }
}

impl fmt::Display for Corruption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Corruption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Corruption::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown corruption kind '{s}'")))
    }
}

pub const MAX_SEVERITY: u32 = 5;

/// Applies `kind` at `severity` (1..=5).
///
/// The random ingredients (noise draws, coordinate subsets, shift direction)
/// depend only on `seed`, so sweeping severity with a fixed seed scales one
/// perturbation rather than drawing a new one each time.
pub fn corrupt(set: &EmbeddingSet, kind: Corruption, severity: u32, seed: u64) -> Result<EmbeddingSet> {
    if !(1..=MAX_SEVERITY).contains(&severity) {
        return Err(Error::InvalidArgument(format!(
            "severity {severity} outside 1..={MAX_SEVERITY}"
        )));
    }
    if set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let s = f64::from(severity);
    let x = set.vectors();
    let (n, d) = x.shape();
    let mut data = x.as_slice().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        Corruption::Gaussian => {
            let mean = x.col_mean();
            let mut var = vec![0.0; d];
            for r in x.row_iter() {
                for ((v, &a), &m) in var.iter_mut().zip(r).zip(&mean) {
                    *v += (a - m) * (a - m);
                }
            }
            let sd: Vec<f64> = var.iter().map(|v| 0.05 * s * (v / n as f64).sqrt()).collect();
            for row in data.chunks_exact_mut(d) {
                for (a, &sj) in row.iter_mut().zip(&sd) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *a += sj * z;
                }
            }
        }
        Corruption::Scale => {
            let mut coords: Vec<usize> = (0..d).collect();
            coords.shuffle(&mut rng);
            let factor = 1.0 + 0.1 * s;
            for row in data.chunks_exact_mut(d) {
                for &j in &coords[..d / 2] {
                    row[j] *= factor;
                }
            }
        }
        Corruption::Mask => {
            let m = ((0.1 * s * d as f64).floor() as usize).min(d);
            for (i, row) in data.chunks_exact_mut(d).enumerate() {
                // per-row permutation independent of severity: higher severity
                // masks a superset of the lower one's coordinates
                let mut row_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64]));
                for j in index::sample(&mut row_rng, d, d).into_iter().take(m) {
                    row[j] = 0.0;
                }
            }
        }
        Corruption::Shift => {
            let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let len = norm(&dir);
            if len == 0.0 {
                dir[rng.random_range(0..d)] = 1.0;
            } else {
                dir.iter_mut().for_each(|v| *v /= len);
            }
            for row in data.chunks_exact_mut(d) {
                for (a, &u) in row.iter_mut().zip(&dir) {
                    *a += 0.1 * s * u;
                }
            }
        }
    }
    EmbeddingSet::new(
        Matrix::from_vec(n, d, data)?,
        set.labels().map(<[u32]>::to_vec),
        format!("{}-{kind}{severity}", set.name),
    )
}
