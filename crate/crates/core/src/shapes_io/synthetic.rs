//! Parametric primitives sampled uniformly over their surfaces.
//!
//! Each shape is normalized by moving its analytic surface centroid to the
//! origin and scaling the farthest sampled point to radius 1.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::seeds;
use crate::transport::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Ellipsoid,
    Box,
    Cylinder,
    /// A slab top on four legs.
    Table,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 4] = [ShapeClass::Ellipsoid, ShapeClass::Box, ShapeClass::Cylinder, ShapeClass::Table];

    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Ellipsoid => "ellipsoid",
            ShapeClass::Box => "box",
            ShapeClass::Cylinder => "cylinder",
            ShapeClass::Table => "table",
        }
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeClass {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ShapeClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| IoError::InvalidSpec(format!("unknown shape class {s:?}")))
    }
}

/// Closed interval a size parameter is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn check(&self, what: &str) -> Result<(), IoError> {
        if self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.min <= self.max {
            Ok(())
        } else {
            Err(IoError::InvalidSpec(format!("{what} range [{}, {}] is invalid", self.min, self.max)))
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }
}

/// Per-class size parameter ranges (half-extents and radii).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRanges {
    pub ellipsoid_axis: Range,
    pub box_half_extent: Range,
    pub cylinder_radius: Range,
    pub cylinder_half_height: Range,
    pub table_half_width: Range,
    pub table_half_depth: Range,
    pub table_thickness: Range,
    pub table_leg_height: Range,
    pub table_leg_half_width: Range,
}

impl Default for ShapeRanges {
    fn default() -> Self {
        Self {
            ellipsoid_axis: Range::new(0.35, 1.0),
            box_half_extent: Range::new(0.3, 1.0),
            cylinder_radius: Range::new(0.25, 0.7),
            cylinder_half_height: Range::new(0.3, 1.0),
            table_half_width: Range::new(0.6, 1.0),
            table_half_depth: Range::new(0.35, 0.8),
            table_thickness: Range::new(0.04, 0.12),
            table_leg_height: Range::new(0.4, 0.9),
            table_leg_half_width: Range::new(0.03, 0.07),
        }
    }
}

impl ShapeRanges {
    pub fn validate(&self) -> Result<(), IoError> {
        self.ellipsoid_axis.check("ellipsoid_axis")?;
        self.box_half_extent.check("box_half_extent")?;
        self.cylinder_radius.check("cylinder_radius")?;
        self.cylinder_half_height.check("cylinder_half_height")?;
        self.table_half_width.check("table_half_width")?;
        self.table_half_depth.check("table_half_depth")?;
        self.table_thickness.check("table_thickness")?;
        self.table_leg_height.check("table_leg_height")?;
        self.table_leg_half_width.check("table_leg_half_width")?;
        if self.table_leg_half_width.max * 2.0 >= self.table_half_depth.min {
            return Err(IoError::InvalidSpec("table legs wider than the top".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub class_id: ShapeClass,
    #[serde(default)]
    pub ranges: ShapeRanges,
    pub points_per_cloud: usize,
    pub count: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(class_id: ShapeClass, points_per_cloud: usize, count: usize, seed: u64) -> Self {
        Self { class_id, ranges: ShapeRanges::default(), points_per_cloud, count, seed }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        if self.count == 0 {
            return Err(IoError::InvalidSpec("count must be at least 1".into()));
        }
        if self.points_per_cloud == 0 {
            return Err(IoError::InvalidSpec("points_per_cloud must be at least 1".into()));
        }
        self.ranges.validate()
    }
}

/// Axis-aligned box surface.
#[derive(Clone, Copy)]
struct Cuboid {
    centre: [f64; 3],
    half: [f64; 3],
}

impl Cuboid {
    fn face_areas(&self) -> [f64; 3] {
        let [x, y, z] = self.half;
        // pairs of faces normal to x, y, z
        [2.0 * 4.0 * y * z, 2.0 * 4.0 * x * z, 2.0 * 4.0 * x * y]
    }

    fn area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        let areas = self.face_areas();
        let axis = pick(rng, &areas);
        let mut p = [0.0; 3];
        for (d, v) in p.iter_mut().enumerate() {
            *v = if d == axis {
                if rng.gen_bool(0.5) {
                    self.half[d]
                } else {
                    -self.half[d]
                }
            } else {
                rng.gen_range(-self.half[d]..=self.half[d])
            };
        }
        add(p, self.centre)
    }
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Index drawn with probability proportional to `weights`.
fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.gen_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

enum Primitive {
    Ellipsoid([f64; 3]),
    Cylinder { radius: f64, half_height: f64 },
    Parts(Vec<Cuboid>),
}

impl Primitive {
    fn draw(class: ShapeClass, r: &ShapeRanges, rng: &mut ChaCha8Rng) -> Self {
        match class {
            ShapeClass::Ellipsoid => {
                Primitive::Ellipsoid([r.ellipsoid_axis.draw(rng), r.ellipsoid_axis.draw(rng), r.ellipsoid_axis.draw(rng)])
            }
            ShapeClass::Box => Primitive::Parts(vec![Cuboid {
                centre: [0.0; 3],
                half: [r.box_half_extent.draw(rng), r.box_half_extent.draw(rng), r.box_half_extent.draw(rng)],
            }]),
            ShapeClass::Cylinder => Primitive::Cylinder {
                radius: r.cylinder_radius.draw(rng),
                half_height: r.cylinder_half_height.draw(rng),
            },
            ShapeClass::Table => {
                let w = r.table_half_width.draw(rng);
                let d = r.table_half_depth.draw(rng);
                let t = r.table_thickness.draw(rng) / 2.0;
                let h = r.table_leg_height.draw(rng) / 2.0;
                let l = r.table_leg_half_width.draw(rng);
                let mut parts = vec![Cuboid { centre: [0.0, 0.0, 0.0], half: [w, t, d] }];
                for (sx, sz) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                    parts.push(Cuboid { centre: [sx * (w - l), -t - h, sz * (d - l)], half: [l, h, l] });
                }
                Primitive::Parts(parts)
            }
        }
    }

    /// Area-weighted centroid of the surface.
    fn centroid(&self) -> [f64; 3] {
        match self {
            Primitive::Ellipsoid(_) | Primitive::Cylinder { .. } => [0.0; 3],
            Primitive::Parts(parts) => {
                let total: f64 = parts.iter().map(Cuboid::area).sum();
                let mut c = [0.0; 3];
                for p in parts {
                    for d in 0..3 {
                        c[d] += p.centre[d] * p.area() / total;
                    }
                }
                c
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        match self {
            Primitive::Ellipsoid(axes) => sample_ellipsoid(axes, rng),
            Primitive::Cylinder { radius, half_height } => {
                let side = 2.0 * PI * radius * 2.0 * half_height;
                let cap = PI * radius * radius;
                match pick(rng, &[side, cap, cap]) {
                    0 => {
                        let a = rng.gen_range(0.0..2.0 * PI);
                        [radius * a.cos(), rng.gen_range(-half_height..=*half_height), radius * a.sin()]
                    }
                    k => {
                        let a = rng.gen_range(0.0..2.0 * PI);
                        let s = radius * rng.gen_range(0.0f64..1.0).sqrt();
                        let y = if k == 1 { *half_height } else { -half_height };
                        [s * a.cos(), y, s * a.sin()]
                    }
                }
            }
            Primitive::Parts(parts) => {
                let areas: Vec<f64> = parts.iter().map(Cuboid::area).collect();
                parts[pick(rng, &areas)].sample(rng)
            }
        }
    }
}

/// Uniform ellipsoid surface sample: a uniform sphere direction mapped through
/// the axes, accepted with probability proportional to the area stretch.
fn sample_ellipsoid(axes: &[f64; 3], rng: &mut ChaCha8Rng) -> [f64; 3] {
    let [a, b, c] = *axes;
    let g_max = (b * c).max(a * c).max(a * b);
    loop {
        let u = unit_vector(rng);
        let g = ((b * c * u[0]).powi(2) + (a * c * u[1]).powi(2) + (a * b * u[2]).powi(2)).sqrt();
        if rng.gen_range(0.0..g_max) < g {
            return [a * u[0], b * u[1], c * u[2]];
        }
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

fn normalize(mut points: Vec<[f64; 3]>, centre: [f64; 3]) -> Vec<[f64; 3]> {
    for p in &mut points {
        for d in 0..3 {
            p[d] -= centre[d];
        }
    }
    let radius = points.iter().map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()).fold(0.0, f64::max);
    if radius > 0.0 {
        for p in &mut points {
            for v in p.iter_mut() {
                *v /= radius;
            }
        }
    }
    points
}

/// One labelled synthetic cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCloud {
    pub id: String,
    pub class: ShapeClass,
    pub cloud: PointCloud,
}

/// `spec.count` clouds of `spec.class_id`, ids `<class>_<index:04>`.
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<Vec<LabeledCloud>, IoError> {
    spec.validate()?;
    let stream = seeds::substream(spec.seed, spec.class_id.name());
    (0..spec.count)
        .map(|i| {
            let mut rng = seeds::rng(seeds::child(stream, i as u64), "shape");
            let shape = Primitive::draw(spec.class_id, &spec.ranges, &mut rng);
            let points = (0..spec.points_per_cloud).map(|_| shape.sample(&mut rng)).collect();
            let cloud = PointCloud::new(normalize(points, shape.centroid()))?;
            Ok(LabeledCloud { id: format!("{}_{i:04}", spec.class_id), class: spec.class_id, cloud })
        })
        .collect()
}
