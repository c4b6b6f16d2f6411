//! Gaussian and Laplace location mixtures: sampling and mixing measures.
//!
//! A [`MixtureSpec`] lists component means, per-component isotropic scales,
//! and mixture weights. [`sample`] draws an empirical measure (n atoms,
//! uniform weights); [`mixing_measure`] returns the discrete measure sitting
//! on the component means with the mixture weights, which is the object the
//! distance and excess-mass machinery analyzes.
//!
//! Sampling is deterministic per seed and stable across platforms: draw `i`
//! uses stream `i` of a ChaCha12 generator seeded with the given seed, so
//! samples do not depend on evaluation order. The Laplace kernel is the
//! density `(1/2b) exp(-|x - mu|/b)` sampled by inverse CDF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Laplace,
}

/// RNG seed; a plain 64-bit value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed(pub u64);

/// A finite location mixture with isotropic component scales.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    kernel: Kernel,
    means: Vec<Vec<f64>>,
    scales: Vec<f64>,
    weights: Vec<f64>,
}

/// JSON mirror: means may be written as scalars (univariate) or points.
#[derive(Serialize, Deserialize)]
struct MixtureSpecFile {
    kernel: Kernel,
    means: Vec<MeanEntry>,
    scales: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MeanEntry {
    Scalar(f64),
    Point(Vec<f64>),
}

impl MixtureSpec {
    pub fn new(
        kernel: Kernel,
        means: Vec<Vec<f64>>,
        scales: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if means.is_empty() || means.len() != scales.len() || means.len() != weights.len() {
            return Err(Error::ShapeMismatch {
                rows: means.len(),
                cols: 1,
                r_len: scales.len(),
                c_len: weights.len(),
            });
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for mean in &means {
            if mean.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: mean.len(),
                });
            }
            if mean.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: "mixture means",
                });
            }
        }
        for &s in &scales {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "scale",
                    value: s,
                });
            }
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter {
                name: "mixture weight",
                value: -1.0,
            });
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotOnSimplex { sum });
        }
        Ok(Self {
            kernel,
            means,
            scales,
            weights,
        })
    }

    /// Univariate convenience constructor.
    pub fn univariate(
        kernel: Kernel,
        means: Vec<f64>,
        scales: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            kernel,
            means.into_iter().map(|m| vec![m]).collect(),
            scales,
            weights,
        )
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: MixtureSpecFile = serde_json::from_str(s)?;
        let means = raw
            .means
            .into_iter()
            .map(|m| match m {
                MeanEntry::Scalar(x) => vec![x],
                MeanEntry::Point(p) => p,
            })
            .collect();
        Self::new(raw.kernel, means, raw.scales, raw.weights)
    }

    pub fn to_json_string(&self) -> String {
        let means = self
            .means
            .iter()
            .map(|m| {
                if m.len() == 1 {
                    MeanEntry::Scalar(m[0])
                } else {
                    MeanEntry::Point(m.clone())
                }
            })
            .collect();
        let file = MixtureSpecFile {
            kernel: self.kernel,
            means,
            scales: self.scales.clone(),
            weights: self.weights.clone(),
        };
        serde_json::to_string(&file).expect("mixture spec serialization cannot fail")
    }
}

/// Draw `n` points: component chosen categorically by weight, then kernel
/// noise added coordinatewise. Returns the empirical measure with uniform
/// weights `1/n`.
pub fn sample(spec: &MixtureSpec, n: usize, seed: Seed) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
        });
    }
    let mut atoms = Vec::with_capacity(n);
    for draw in 0..n {
        let mut rng = ChaCha12Rng::seed_from_u64(seed.0);
        rng.set_stream(draw as u64);

        let u: f64 = rng.random();
        let mut component = spec.components() - 1;
        let mut cumulative = 0.0;
        for (idx, &w) in spec.weights.iter().enumerate() {
            cumulative += w;
            if u < cumulative {
                component = idx;
                break;
            }
        }

        let scale = spec.scales[component];
        let atom = spec.means[component]
            .iter()
            .map(|&mean| mean + kernel_noise(spec.kernel, scale, &mut rng))
            .collect();
        atoms.push(atom);
    }
    DiscreteMeasure::new(atoms, vec![1.0 / n as f64; n])
}

fn kernel_noise(kernel: Kernel, scale: f64, rng: &mut ChaCha12Rng) -> f64 {
    match kernel {
        Kernel::Gaussian => {
            let z: f64 = rng.sample(StandardNormal);
            scale * z
        }
        Kernel::Laplace => {
            // Inverse CDF of the Laplace(0, b) density (1/2b) e^{-|x|/b}.
            let u: f64 = rng.random::<f64>() - 0.5;
            -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
    }
}

/// The discrete measure `sum_i w_i delta_{mean_i}`.
pub fn mixing_measure(spec: &MixtureSpec) -> DiscreteMeasure {
    DiscreteMeasure::new(spec.means.clone(), spec.weights.clone())
        .expect("a valid mixture spec always yields a valid mixing measure")
}

/// The Gaussian 3-mixture used by the bundled transport simulation:
/// means `[3, 4, 5]`, common sigma `0.3`, weights `[0.37, 0.30, 0.33]`.
pub fn simulation_gaussian_spec() -> MixtureSpec {
    MixtureSpec::univariate(
        Kernel::Gaussian,
        vec![3.0, 4.0, 5.0],
        vec![0.3, 0.3, 0.3],
        vec![0.37, 0.30, 0.33],
    )
    .expect("static spec is valid")
}

/// The Laplace 4-mixture used by the bundled transport simulation:
/// means `[7, 8, 9, 6]`, scales `[0.3, 0.3, 0.3, 0.1]`, weights
/// `[0.30, 0.32, 0.32, 0.06]`. The light component at 6 is the outlier.
pub fn simulation_laplace_spec() -> MixtureSpec {
    MixtureSpec::univariate(
        Kernel::Laplace,
        vec![7.0, 8.0, 9.0, 6.0],
        vec![0.3, 0.3, 0.3, 0.1],
        vec![0.30, 0.32, 0.32, 0.06],
    )
    .expect("static spec is valid")
}
