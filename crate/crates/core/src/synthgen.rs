//! Synthetic multi-matching problems with planted ground truth.
//!
//! A set of `d_true` universe points with canonical 2D coordinates and
//! feature prototypes is sampled once; each object sees a random subset of
//! them under its own transform, with coordinate and feature noise, an
//! optional occluding rectangle and appended outliers. Point order inside
//! every object is shuffled.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Label, Object, ProblemInstance, UniverseAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TransformFamily {
    /// Rotation and translation.
    #[default]
    Rigid,
    /// Rotation, translation and uniform scaling in `[0.5, 2]`.
    Similarity,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub k: usize,
    pub d_true: usize,
    /// Probability that a universe point appears in an object.
    pub visibility: f64,
    pub coord_noise_sigma: f64,
    pub feature_dim: usize,
    pub feature_noise_sigma: f64,
    /// Fraction of each object's points that are outliers.
    pub outlier_fraction: f64,
    /// Width and height of the occluding rectangle as fractions of the
    /// object's bounding box; placed uniformly at random per object.
    pub occlusion_rect: Option<(f64, f64)>,
    pub transform_family: TransformFamily,
    /// Number of distinct feature prototypes; universe point `c` uses
    /// prototype `c % n`. `None` gives every universe point its own.
    pub feature_prototypes: Option<usize>,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            k: 5,
            d_true: 10,
            visibility: 1.0,
            coord_noise_sigma: 0.0,
            feature_dim: 8,
            feature_noise_sigma: 0.0,
            outlier_fraction: 0.0,
            occlusion_rect: None,
            transform_family: TransformFamily::Rigid,
            feature_prototypes: None,
            shuffle: true,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d_true == 0 || self.feature_dim == 0 {
            return Err(Error::invalid(
                "k, d_true and feature_dim must be at least 1",
            ));
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(Error::invalid(format!(
                "visibility must lie in (0, 1], got {}",
                self.visibility
            )));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::invalid(format!(
                "outlier_fraction must lie in [0, 1), got {}",
                self.outlier_fraction
            )));
        }
        if let Some((w, h)) = self.occlusion_rect {
            if !(0.0..1.0).contains(&w) || !(0.0..1.0).contains(&h) {
                return Err(Error::invalid(
                    "occlusion rectangle fractions must lie in [0, 1)",
                ));
            }
        }
        if !(self.coord_noise_sigma >= 0.0 && self.feature_noise_sigma >= 0.0) {
            return Err(Error::invalid("noise levels must be non-negative"));
        }
        if self.feature_prototypes == Some(0) {
            return Err(Error::invalid("feature_prototypes must be at least 1"));
        }
        Ok(())
    }
}

/// Number of outliers added to an object with `inliers` inlier points so
/// that they make up `fraction` of the object.
pub fn outlier_count(inliers: usize, fraction: f64) -> usize {
    (inliers as f64 * fraction / (1.0 - fraction)).round() as usize
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn bounding_box(points: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

pub fn generate(cfg: &GenConfig) -> Result<ProblemInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let canonical: Vec<[f64; 2]> = (0..cfg.d_true)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let n_proto = cfg.feature_prototypes.unwrap_or(cfg.d_true);
    let prototypes: Vec<Vec<f64>> = (0..n_proto)
        .map(|_| gaussian_vec(&mut rng, cfg.feature_dim))
        .collect();
    let coord_noise = Normal::new(0.0, cfg.coord_noise_sigma).expect("validated sigma");
    let feature_noise = Normal::new(0.0, cfg.feature_noise_sigma).expect("validated sigma");

    let mut objects = Vec::with_capacity(cfg.k);
    for i in 0..cfg.k {
        let (angle, shift, scale) = match cfg.transform_family {
            TransformFamily::None => (0.0, [0.0, 0.0], 1.0),
            TransformFamily::Rigid | TransformFamily::Similarity => {
                let angle = rng.random_range(0.0..2.0 * PI);
                let shift = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let scale = if cfg.transform_family == TransformFamily::Similarity {
                    rng.random_range(0.5..2.0)
                } else {
                    1.0
                };
                (angle, shift, scale)
            }
        };
        let (s, c) = angle.sin_cos();
        let transform = |p: &[f64; 2]| {
            [
                scale * (c * p[0] - s * p[1]) + shift[0],
                scale * (s * p[0] + c * p[1]) + shift[1],
            ]
        };
        let frame: Vec<[f64; 2]> = canonical.iter().map(transform).collect();
        let (lo, hi) = bounding_box(&frame);

        let mut points: Vec<[f64; 2]> = Vec::new();
        let mut features: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<Label> = Vec::new();
        for (u, base) in frame.iter().enumerate() {
            if rng.random::<f64>() >= cfg.visibility {
                continue;
            }
            let jitter = [coord_noise.sample(&mut rng), coord_noise.sample(&mut rng)];
            points.push([base[0] + jitter[0], base[1] + jitter[1]]);
            features.push(
                prototypes[u % n_proto]
                    .iter()
                    .map(|v| v + feature_noise.sample(&mut rng))
                    .collect(),
            );
            labels.push(Label::Universe(u));
        }

        if let Some((fw, fh)) = cfg.occlusion_rect {
            let (w, h) = (fw * (hi[0] - lo[0]), fh * (hi[1] - lo[1]));
            let x0 = lo[0] + rng.random::<f64>() * (hi[0] - lo[0] - w);
            let y0 = lo[1] + rng.random::<f64>() * (hi[1] - lo[1] - h);
            let keep: Vec<bool> = points
                .iter()
                .map(|p| !(p[0] >= x0 && p[0] <= x0 + w && p[1] >= y0 && p[1] <= y0 + h))
                .collect();
            let mut t = 0;
            points.retain(|_| (keep[t], t += 1).0);
            t = 0;
            features.retain(|_| (keep[t], t += 1).0);
            t = 0;
            labels.retain(|_| (keep[t], t += 1).0);
        }

        for _ in 0..outlier_count(points.len(), cfg.outlier_fraction) {
            points.push([
                rng.random_range(lo[0]..=hi[0]),
                rng.random_range(lo[1]..=hi[1]),
            ]);
            features.push(gaussian_vec(&mut rng, cfg.feature_dim));
            labels.push(Label::Outlier);
        }

        if points.is_empty() {
            return Err(Error::invalid(format!(
                "object {i} ended up without points; raise visibility or shrink the occlusion"
            )));
        }

        let mut order: Vec<usize> = (0..points.len()).collect();
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        objects.push(Object {
            points: order.iter().map(|&t| points[t].to_vec()).collect(),
            features: order.iter().map(|&t| features[t].clone()).collect(),
            distances: None,
            labels: Some(order.iter().map(|&t| labels[t]).collect()),
        });
    }
    ProblemInstance::new(objects, Some(cfg.seed))
}

/// The ground-truth assignment with `d` universe columns.
///
/// Inliers use their label as column. Outliers are spread round-robin over
/// the columns that no inlier of any object uses, continuing the cursor from
/// object to object so that outliers of different objects share a column
/// only once those columns run out; if an object has more outliers than
/// there are such columns, the rest take the lowest columns still free in
/// that object.
pub fn planted_assignment(p: &ProblemInstance, d: usize) -> Result<UniverseAssignment> {
    let index = p.block_index();
    let truth = p.ground_truth().ok_or(Error::MissingGroundTruth)?;
    if d < index.max_size() {
        return Err(Error::UniverseTooSmall {
            d,
            required: index.max_size(),
        });
    }
    let mut used_globally = vec![false; d];
    for l in &truth {
        if let Label::Universe(c) = *l {
            if c >= d {
                return Err(Error::UniverseTooSmall { d, required: c + 1 });
            }
            used_globally[c] = true;
        }
    }
    let surplus: Vec<usize> = (0..d).filter(|&c| !used_globally[c]).collect();
    let mut cursor = 0;
    let mut assignment = vec![0; index.total()];
    for i in 0..index.num_objects() {
        let range = index.range(i);
        let mut taken = vec![false; d];
        for g in range.clone() {
            if let Label::Universe(c) = truth[g] {
                assignment[g] = c;
                taken[c] = true;
            }
        }
        let outliers: Vec<usize> = range.filter(|&g| truth[g] == Label::Outlier).collect();
        for (n, &g) in outliers.iter().enumerate() {
            let c = if n < surplus.len() {
                let c = surplus[cursor % surplus.len()];
                cursor += 1;
                c
            } else {
                (0..d)
                    .find(|&c| !taken[c])
                    .ok_or(Error::UniverseTooSmall { d, required: d + 1 })?
            };
            assignment[g] = c;
            taken[c] = true;
        }
    }
    UniverseAssignment::new(assignment, d, index)
}
