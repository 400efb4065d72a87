//! Seeded corruptions: nearest-neighbour masking, random downsampling and
//! replicate padding back to a fixed size.

use std::cmp::Ordering;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds;
use crate::transport::{distance, CloudError, PointCloud};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorruptError {
    #[error("fraction {0} is outside its allowed range")]
    Fraction(f64),
    #[error("masking needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("cloud of {len} points is larger than the padding target {target}")]
    LargerThanTarget { len: usize, target: usize },
    #[error("downsampling keeps no points")]
    EmptyResult,
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    /// Delete the nearest-neighbour ball around a random point; `fraction` is the share removed.
    MaskKnn,
    /// Keep a uniform random subset; `fraction` is the share kept.
    Downsample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub fraction: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pad_to: Option<usize>,
}

/// Output of [`CorruptionSpec::apply`].
#[derive(Clone, Debug, PartialEq)]
pub struct Corrupted {
    pub cloud: PointCloud,
    /// Original indices no longer present.
    pub removed: Vec<usize>,
}

impl CorruptionSpec {
    pub fn mask(fraction: f64, seed: u64) -> Self {
        Self { kind: CorruptionKind::MaskKnn, fraction, seed, pad_to: None }
    }

    pub fn downsample(keep: f64, seed: u64) -> Self {
        Self { kind: CorruptionKind::Downsample, fraction: keep, seed, pad_to: None }
    }

    pub fn validate(&self) -> Result<(), CorruptError> {
        let ok = match self.kind {
            CorruptionKind::MaskKnn => self.fraction > 0.0 && self.fraction < 1.0,
            CorruptionKind::Downsample => self.fraction > 0.0 && self.fraction <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(CorruptError::Fraction(self.fraction))
        }
    }

    /// Same spec with a different seed, e.g. one per cloud.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<Corrupted, CorruptError> {
        self.validate()?;
        match self.kind {
            CorruptionKind::MaskKnn => {
                let (masked, removed) = mask_knn(cloud, self.fraction, self.seed)?;
                let cloud = match self.pad_to {
                    Some(t) if t != masked.len() => {
                        let survivors = survivors_only(&masked, cloud.len() - removed.len());
                        pad_replicate(&survivors, t, seeds::child(self.seed, 1))?
                    }
                    _ => masked,
                };
                Ok(Corrupted { cloud, removed })
            }
            CorruptionKind::Downsample => {
                let kept = downsample_indices(cloud.len(), self.fraction, self.seed)?;
                let mut removed = Vec::with_capacity(cloud.len() - kept.len());
                let mut next = kept.iter().peekable();
                for i in 0..cloud.len() {
                    if next.peek() == Some(&&i) {
                        next.next();
                    } else {
                        removed.push(i);
                    }
                }
                let mut out = cloud.reordered(&kept);
                if let Some(t) = self.pad_to {
                    out = pad_replicate(&out, t, seeds::child(self.seed, 1))?;
                }
                Ok(Corrupted { cloud: out, removed })
            }
        }
    }
}

fn survivors_only(masked: &PointCloud, survivors: usize) -> PointCloud {
    PointCloud::new(masked.points()[..survivors].to_vec()).expect("survivors are non-empty")
}

/// Removes a random point together with its `floor(N·fraction) − 1` nearest
/// neighbours, then pads back to `N` by replicating one survivor.
///
/// Returns the padded cloud (survivors in original order, replicas appended)
/// and the removed indices, nearest first. Neighbour ties go to the lower index.
pub fn mask_knn(cloud: &PointCloud, fraction: f64, seed: u64) -> Result<(PointCloud, Vec<usize>), CorruptError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorruptError::Fraction(fraction));
    }
    let n = cloud.len();
    if n < 2 {
        return Err(CorruptError::TooFewPoints(n));
    }
    let remove = (n as f64 * fraction).floor() as usize;
    if remove == 0 {
        return Ok((cloud.clone(), Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centre = rng.gen_range(0..n);
    let pts = cloud.points();
    let mut others: Vec<(f64, usize)> =
        (0..n).filter(|&i| i != centre).map(|i| (distance(&pts[centre], &pts[i]), i)).collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut removed = Vec::with_capacity(remove);
    removed.push(centre);
    removed.extend(others[..remove - 1].iter().map(|&(_, i)| i));

    let mut gone = vec![false; n];
    for &i in &removed {
        gone[i] = true;
    }
    let survivors = PointCloud::new((0..n).filter(|&i| !gone[i]).map(|i| pts[i]).collect())?;
    let padded = pad_replicate(&survivors, n, seeds::child(seed, 1))?;
    Ok((padded, removed))
}

fn downsample_indices(n: usize, keep_fraction: f64, seed: u64) -> Result<Vec<usize>, CorruptError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(CorruptError::Fraction(keep_fraction));
    }
    let keep = (n as f64 * keep_fraction).round() as usize;
    if keep == 0 {
        return Err(CorruptError::EmptyResult);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = index::sample(&mut rng, n, keep).into_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// Uniform random subset of `round(N·keep_fraction)` points, original order kept,
/// optionally replicate-padded to `pad_to`.
pub fn downsample(
    cloud: &PointCloud,
    keep_fraction: f64,
    seed: u64,
    pad_to: Option<usize>,
) -> Result<PointCloud, CorruptError> {
    let kept = cloud.reordered(&downsample_indices(cloud.len(), keep_fraction, seed)?);
    match pad_to {
        Some(t) => pad_replicate(&kept, t, seeds::child(seed, 1)),
        None => Ok(kept),
    }
}

fn lexicographic(a: &[f64; 3], b: &[f64; 3]) -> Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])).then(a[2].total_cmp(&b[2]))
}

/// Appends copies of one randomly chosen existing point until the cloud has
/// `target` points.
///
/// The candidate is drawn from the points in lexicographic coordinate order, so
/// the choice depends only on the multiset of points and the seed.
pub fn pad_replicate(cloud: &PointCloud, target: usize, seed: u64) -> Result<PointCloud, CorruptError> {
    let len = cloud.len();
    if len > target {
        return Err(CorruptError::LargerThanTarget { len, target });
    }
    if len == target {
        return Ok(cloud.clone());
    }
    let mut sorted: Vec<[f64; 3]> = cloud.points().to_vec();
    sorted.sort_by(lexicographic);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let replica = sorted[rng.gen_range(0..len)];
    let mut points = cloud.points().to_vec();
    points.resize(target, replica);
    Ok(PointCloud::new(points)?)
}
