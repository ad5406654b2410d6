use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// One Gaussian cluster per class in `dim` dimensions.
    GaussianBlobs { dim: usize },
    /// Two-dimensional rings of radius `1 + class`.
    ConcentricRings,
    /// `1×size×size` sinusoidal gratings whose orientation encodes the class.
    /// Pixel statistics are orientation-free, so only spatial filters can
    /// tell the classes apart.
    TexturedPatches { size: usize },
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::GaussianBlobs { .. } => "gaussian-blobs",
            Geometry::ConcentricRings => "concentric-rings",
            Geometry::TexturedPatches { .. } => "textured-patches",
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses the geometry name; the size parameter is filled in by the caller.
impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian-blobs" => Ok(Geometry::GaussianBlobs { dim: 2 }),
            "concentric-rings" => Ok(Geometry::ConcentricRings),
            "textured-patches" => Ok(Geometry::TexturedPatches { size: 8 }),
            other => Err(Error::Config(format!(
                "unknown geometry `{other}` (gaussian-blobs, concentric-rings, textured-patches)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub classes: usize,
    pub geometry: Geometry,
    pub noise: f64,
    pub seed: u64,
}

/// Deterministic, class-balanced synthetic data: sample `i` has label
/// `i mod classes`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.samples == 0 {
        return Err(Error::Config("synthetic dataset needs at least one sample".into()));
    }
    if spec.classes < 2 {
        return Err(Error::Config("synthetic dataset needs at least two classes".into()));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::Config(format!("noise {} must be non-negative", spec.noise)));
    }
    let mut rng = rng_from_seed(spec.seed);
    let labels: Vec<usize> = (0..spec.samples).map(|i| i % spec.classes).collect();
    let (shape, data) = match spec.geometry {
        Geometry::GaussianBlobs { dim } => {
            if dim == 0 {
                return Err(Error::Config("blob dimension must be positive".into()));
            }
            let means: Vec<Vec<f64>> = (0..spec.classes)
                .map(|_| (0..dim).map(|_| 2.0 * gauss(&mut rng)).collect())
                .collect();
            let mut data = Vec::with_capacity(spec.samples * dim);
            for &l in &labels {
                for &m in &means[l] {
                    data.push(m + spec.noise * gauss(&mut rng));
                }
            }
            (vec![spec.samples, dim], data)
        }
        Geometry::ConcentricRings => {
            let mut data = Vec::with_capacity(spec.samples * 2);
            for &l in &labels {
                let theta = rng.random::<f64>() * 2.0 * PI;
                let r = 1.0 + l as f64 + spec.noise * gauss(&mut rng);
                data.push(r * theta.cos());
                data.push(r * theta.sin());
            }
            (vec![spec.samples, 2], data)
        }
        Geometry::TexturedPatches { size } => {
            if size < 3 {
                return Err(Error::Config("textured patches need size >= 3".into()));
            }
            let freq = 0.25;
            let mut data = Vec::with_capacity(spec.samples * size * size);
            for &l in &labels {
                let theta = PI * l as f64 / spec.classes as f64;
                let (c, s) = (theta.cos(), theta.sin());
                let phase = rng.random::<f64>() * 2.0 * PI;
                for y in 0..size {
                    for x in 0..size {
                        let u = x as f64 * c + y as f64 * s;
                        data.push((2.0 * PI * freq * u + phase).sin() + spec.noise * gauss(&mut rng));
                    }
                }
            }
            (vec![spec.samples, 1, size, size], data)
        }
    };
    Dataset::new(Tensor::new(shape, data)?, labels, spec.classes)
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
