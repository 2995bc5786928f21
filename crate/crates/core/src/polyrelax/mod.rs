//! Polyhedral relaxation of `y = g(x)` over a bounded interval.
//!
//! The domain is split at every curvature break point so that `g` is convex
//! or concave on each piece. Each piece contributes a triangle bounded by the
//! secant and the two endpoint tangents; the relaxation is the convex hull of
//! all triangles. Its extreme points are the two domain endpoints on the
//! curve plus one tangent intersection per piece, which is what
//! [`PartitionRelaxation::vertices`] holds. A model encodes the hull as a
//! convex combination of those vertices.

mod refine;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use refine::{
    refine, BisectAll, BisectLongest, MaxErrorPoint, RefinementRegistry, RefinementScheme,
};

#[derive(Debug, Error, PartialEq)]
pub enum RelaxError {
    #[error("invalid domain [{0}, {1}]")]
    InvalidDomain(f64, f64),
    #[error("break points must lie strictly inside the domain and be sorted")]
    BadBreakPoints,
    #[error("function is not finite at x = {0}")]
    NotFinite(f64),
    #[error("tangents at {0} and {1} are parallel")]
    ParallelTangents(f64, f64),
    #[error(
        "partition must be strictly increasing, span the domain and contain every break point"
    )]
    BadPartition,
    #[error("unknown refinement scheme `{0}`")]
    UnknownScheme(String),
}

/// A continuously differentiable function of one variable.
pub trait Univariate: Send + Sync + fmt::Debug {
    fn label(&self) -> String;
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    /// Points where the curvature changes sign, anywhere on the real line.
    fn inflection_points(&self) -> Vec<f64>;
}

/// `x |x|`
#[derive(Debug, Clone, Copy, Default)]
pub struct SignedSquare;

impl Univariate for SignedSquare {
    fn label(&self) -> String {
        "x|x|".into()
    }
    fn value(&self, x: f64) -> f64 {
        x * x.abs()
    }
    fn derivative(&self, x: f64) -> f64 {
        2.0 * x.abs()
    }
    fn inflection_points(&self) -> Vec<f64> {
        vec![0.0]
    }
}

/// `(b1/2) x^2 + (b2/3) x^3`, the gas potential.
#[derive(Debug, Clone, Copy)]
pub struct Potential {
    pub b1: f64,
    pub b2: f64,
}

impl Univariate for Potential {
    fn label(&self) -> String {
        format!("{}/2 x^2 + {}/3 x^3", self.b1, self.b2)
    }
    fn value(&self, x: f64) -> f64 {
        x * x * (0.5 * self.b1 + self.b2 * x / 3.0)
    }
    fn derivative(&self, x: f64) -> f64 {
        x * (self.b1 + self.b2 * x)
    }
    fn inflection_points(&self) -> Vec<f64> {
        if self.b2 != 0.0 {
            vec![-self.b1 / (2.0 * self.b2)]
        } else {
            vec![]
        }
    }
}

/// `x^3`
#[derive(Debug, Clone, Copy, Default)]
pub struct Cube;

impl Univariate for Cube {
    fn label(&self) -> String {
        "x^3".into()
    }
    fn value(&self, x: f64) -> f64 {
        x * x * x
    }
    fn derivative(&self, x: f64) -> f64 {
        3.0 * x * x
    }
    fn inflection_points(&self) -> Vec<f64> {
        vec![0.0]
    }
}

/// A function on `[lo, hi]` together with its break points inside the domain.
#[derive(Debug, Clone)]
pub struct UnivariateSpec {
    func: Arc<dyn Univariate>,
    lo: f64,
    hi: f64,
    break_points: Vec<f64>,
}

impl UnivariateSpec {
    /// Takes the break points from the function's inflection points.
    /// `lo == hi` is accepted and yields a single-point relaxation.
    pub fn new(func: Arc<dyn Univariate>, lo: f64, hi: f64) -> Result<Self, RelaxError> {
        let breaks = func
            .inflection_points()
            .into_iter()
            .filter(|&b| b > lo && b < hi)
            .collect();
        Self::with_break_points(func, lo, hi, breaks)
    }

    pub fn with_break_points(
        func: Arc<dyn Univariate>,
        lo: f64,
        hi: f64,
        mut break_points: Vec<f64>,
    ) -> Result<Self, RelaxError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(RelaxError::InvalidDomain(lo, hi));
        }
        break_points.sort_by(f64::total_cmp);
        if break_points.iter().any(|&b| !(b > lo && b < hi))
            || break_points.windows(2).any(|w| w[0] == w[1])
        {
            return Err(RelaxError::BadBreakPoints);
        }
        for x in [lo, hi].iter().chain(break_points.iter()) {
            if !(func.value(*x).is_finite() && func.derivative(*x).is_finite()) {
                return Err(RelaxError::NotFinite(*x));
            }
        }
        Ok(Self {
            func,
            lo,
            hi,
            break_points,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn break_points(&self) -> &[f64] {
        &self.break_points
    }
    pub fn func(&self) -> &Arc<dyn Univariate> {
        &self.func
    }
    pub fn value(&self, x: f64) -> f64 {
        self.func.value(x)
    }
    pub fn derivative(&self, x: f64) -> f64 {
        self.func.derivative(x)
    }
}

/// Slopes closer than this (relative) are treated as parallel.
pub const SLOPE_TOLERANCE: f64 = 1e-10;

fn parallel(s0: f64, s1: f64) -> bool {
    (s0 - s1).abs() <= SLOPE_TOLERANCE * s0.abs().max(1.0)
}

/// A sorted partition and, per interval, whether the endpoint slopes coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub points: Vec<f64>,
    pub degenerate: Vec<bool>,
}

/// `{lo} ∪ break points ∪ {hi}`.
pub fn base_partition(spec: &UnivariateSpec) -> Partition {
    let mut points = vec![spec.lo];
    points.extend_from_slice(&spec.break_points);
    if spec.hi > spec.lo {
        points.push(spec.hi);
    }
    let degenerate = interval_flags(spec, &points);
    Partition { points, degenerate }
}

fn interval_flags(spec: &UnivariateSpec, points: &[f64]) -> Vec<bool> {
    points
        .windows(2)
        .map(|w| parallel(spec.derivative(w[0]), spec.derivative(w[1])))
        .collect()
}

/// Intersection of the tangents to `g` at `x0` and `x1`.
pub fn tangent_intersection(
    spec: &UnivariateSpec,
    x0: f64,
    x1: f64,
) -> Result<(f64, f64), RelaxError> {
    let (g0, g1) = (spec.value(x0), spec.value(x1));
    let (s0, s1) = (spec.derivative(x0), spec.derivative(x1));
    if parallel(s0, s1) {
        return Err(RelaxError::ParallelTangents(x0, x1));
    }
    let x = (g1 - g0 + s0 * x0 - s1 * x1) / (s0 - s1);
    // evaluate along the tangent whose anchor is nearer for accuracy
    let y = if (x - x0).abs() <= (x1 - x).abs() {
        g0 + s0 * (x - x0)
    } else {
        g1 + s1 * (x - x1)
    };
    Ok((x, y))
}

/// Relaxation of one univariate term: the partition it was built on and the
/// ordered vertex set whose convex hull contains the graph.
#[derive(Debug, Clone)]
pub struct PartitionRelaxation {
    spec: UnivariateSpec,
    partition: Vec<f64>,
    degenerate: Vec<bool>,
    vertices: Vec<(f64, f64)>,
}

/// Builds the vertex set for a partition that refines the base partition.
pub fn build_relaxation(
    spec: &UnivariateSpec,
    partition: &[f64],
) -> Result<PartitionRelaxation, RelaxError> {
    let ok = !partition.is_empty()
        && partition[0] == spec.lo
        && *partition.last().unwrap() == spec.hi
        && partition.windows(2).all(|w| w[0] < w[1])
        && spec
            .break_points
            .iter()
            .all(|b| partition.iter().any(|p| p == b));
    if !ok {
        return Err(RelaxError::BadPartition);
    }
    let degenerate = interval_flags(spec, partition);
    let mut vertices = vec![(spec.lo, spec.value(spec.lo))];
    for (w, &flat) in partition.windows(2).zip(&degenerate) {
        if flat {
            vertices.push((w[0], spec.value(w[0])));
            vertices.push((w[1], spec.value(w[1])));
        } else {
            vertices.push(tangent_intersection(spec, w[0], w[1])?);
        }
    }
    if spec.hi > spec.lo {
        vertices.push((spec.hi, spec.value(spec.hi)));
    }
    vertices.dedup();
    Ok(PartitionRelaxation {
        spec: spec.clone(),
        partition: partition.to_vec(),
        degenerate,
        vertices,
    })
}

/// Relaxation over the base partition.
pub fn base_relaxation(spec: &UnivariateSpec) -> Result<PartitionRelaxation, RelaxError> {
    build_relaxation(spec, &base_partition(spec).points)
}

impl PartitionRelaxation {
    pub fn spec(&self) -> &UnivariateSpec {
        &self.spec
    }
    pub fn partition(&self) -> &[f64] {
        &self.partition
    }
    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }
    /// Ordered by x: `v0, v01, v12, ..., vn`.
    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// Convex hull of the vertices, counter-clockwise, no collinear points.
    pub fn hull(&self) -> Vec<(f64, f64)> {
        convex_hull(&self.vertices)
    }

    /// Only the vertices that are extreme points of the hull, in x order.
    pub fn pruned_vertices(&self) -> Vec<(f64, f64)> {
        let hull = self.hull();
        self.vertices
            .iter()
            .copied()
            .filter(|v| hull.contains(v))
            .collect()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.hull())
    }

    /// Lower and upper boundary of the hull on the vertical line at `x`.
    pub fn vertical_extent(&self, x: f64) -> Option<(f64, f64)> {
        vertical_extent(&self.hull(), x)
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain convex hull, counter-clockwise starting from the
/// lowest-x point.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..poly.len() {
        let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    0.5 * s.abs()
}

fn vertical_extent(poly: &[(f64, f64)], x: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let (x0, x1) = if a.0 <= b.0 { (a, b) } else { (b, a) };
        if x < x0.0 || x > x1.0 {
            continue;
        }
        if x1.0 == x0.0 {
            lo = lo.min(x0.1.min(x1.1));
            hi = hi.max(x0.1.max(x1.1));
        } else {
            let t = (x - x0.0) / (x1.0 - x0.0);
            let y = x0.1 + t * (x1.1 - x0.1);
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    (lo <= hi).then_some((lo, hi))
}
