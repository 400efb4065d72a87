use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("point cloud has no points")]
    Empty,
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("flat coordinate buffer of length {0} is not a multiple of 3")]
    Ragged(usize),
}

/// Ordered list of 3-D points. Order carries no meaning for any metric.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self, CloudError> {
        if points.is_empty() {
            return Err(CloudError::Empty);
        }
        if let Some(index) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(CloudError::NonFinite { index });
        }
        Ok(Self { points })
    }

    /// Builds a cloud from `[x0, y0, z0, x1, ...]`.
    pub fn from_flat(coords: &[f32]) -> Result<Self, CloudError> {
        if coords.len() % 3 != 0 {
            return Err(CloudError::Ragged(coords.len()));
        }
        let points = coords
            .chunks_exact(3)
            .map(|c| [f64::from(c[0]), f64::from(c[1]), f64::from(c[2])])
            .collect();
        Self::new(points)
    }

    pub fn to_flat_f32(&self) -> Vec<f32> {
        self.points.iter().flat_map(|p| p.map(|c| c as f32)).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn into_points(self) -> Vec<[f64; 3]> {
        self.points
    }

    /// Cloud whose `i`-th point is `self[order[i]]`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        Self { points: order.iter().map(|&i| self.points[i]).collect() }
    }
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
