//! Partition refinement schemes, selectable by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{build_relaxation, PartitionRelaxation, RelaxError};

/// Proposes a strictly finer partition from the current relaxation.
pub trait RefinementScheme: Send + Sync {
    fn name(&self) -> &'static str;
    /// Points to insert; must lie strictly inside existing intervals.
    fn new_points(&self, relax: &PartitionRelaxation) -> Vec<f64>;
}

/// Midpoint of every interval.
pub struct BisectAll;

impl RefinementScheme for BisectAll {
    fn name(&self) -> &'static str {
        "bisect-all"
    }
    fn new_points(&self, relax: &PartitionRelaxation) -> Vec<f64> {
        relax
            .partition()
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }
}

/// Midpoint of the longest interval (leftmost on ties).
pub struct BisectLongest;

impl RefinementScheme for BisectLongest {
    fn name(&self) -> &'static str {
        "bisect-longest"
    }
    fn new_points(&self, relax: &PartitionRelaxation) -> Vec<f64> {
        let mut best: Option<(f64, f64)> = None;
        for w in relax.partition().windows(2) {
            let len = w[1] - w[0];
            if best.is_none_or(|(l, _)| len > l) {
                best = Some((len, 0.5 * (w[0] + w[1])));
            }
        }
        best.map(|(_, m)| vec![m]).unwrap_or_default()
    }
}

/// Point of largest vertical hull thickness on a uniform grid per interval.
pub struct MaxErrorPoint {
    pub grid: usize,
}

impl Default for MaxErrorPoint {
    fn default() -> Self {
        Self { grid: 129 }
    }
}

impl RefinementScheme for MaxErrorPoint {
    fn name(&self) -> &'static str {
        "max-error-point"
    }
    fn new_points(&self, relax: &PartitionRelaxation) -> Vec<f64> {
        let hull = relax.hull();
        let steps = self.grid.max(3) - 1;
        let mut best: Option<(f64, f64)> = None;
        for w in relax.partition().windows(2) {
            let h = (w[1] - w[0]) / steps as f64;
            for k in 1..steps {
                let x = w[0] + k as f64 * h;
                if !(x > w[0] && x < w[1]) {
                    continue;
                }
                if let Some((lo, hi)) = super::vertical_extent(&hull, x) {
                    let gap = hi - lo;
                    if best.is_none_or(|(g, _)| gap > g) {
                        best = Some((gap, x));
                    }
                }
            }
        }
        best.map(|(_, x)| vec![x]).unwrap_or_default()
    }
}

/// Refinement schemes keyed by name.
#[derive(Clone)]
pub struct RefinementRegistry {
    schemes: BTreeMap<&'static str, Arc<dyn RefinementScheme>>,
}

impl RefinementRegistry {
    pub fn empty() -> Self {
        Self {
            schemes: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, scheme: Arc<dyn RefinementScheme>) {
        self.schemes.insert(scheme.name(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn RefinementScheme>, RelaxError> {
        self.schemes
            .get(name)
            .cloned()
            .ok_or_else(|| RelaxError::UnknownScheme(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.schemes.keys().copied().collect()
    }
}

impl Default for RefinementRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(BisectAll));
        r.register(Arc::new(BisectLongest));
        r.register(Arc::new(MaxErrorPoint::default()));
        r
    }
}

/// Applies `rounds` rounds of `scheme`. Zero rounds returns a copy.
pub fn refine(
    relax: &PartitionRelaxation,
    scheme: &dyn RefinementScheme,
    rounds: usize,
) -> Result<PartitionRelaxation, RelaxError> {
    let mut current = relax.clone();
    for _ in 0..rounds {
        let mut points = current.partition().to_vec();
        let before = points.len();
        points.extend(scheme.new_points(&current));
        points.sort_by(f64::total_cmp);
        points.dedup();
        if points.len() == before {
            break;
        }
        current = build_relaxation(current.spec(), &points)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyrelax::{base_relaxation, Cube, SignedSquare, UnivariateSpec};

    fn cube() -> PartitionRelaxation {
        let s = UnivariateSpec::new(Arc::new(Cube), -1.5, 2.0).unwrap();
        base_relaxation(&s).unwrap()
    }

    #[test]
    fn zero_rounds_is_identity() {
        let r = cube();
        let same = refine(&r, &BisectAll, 0).unwrap();
        assert_eq!(same.partition(), r.partition());
        assert_eq!(same.vertices(), r.vertices());
    }

    #[test]
    fn bisect_all_on_cube() {
        let r = refine(&cube(), &BisectAll, 1).unwrap();
        assert_eq!(r.partition(), &[-1.5, -0.75, 0.0, 1.0, 2.0]);
        assert_eq!(r.vertices().len(), 6);
        // tangents at -1.5 and -0.75 meet at x = -1.125 (solved by hand:
        // for x^3 the intersection is 2(a^2 + ab + b^2) / (3(a + b)))
        let (x, _) = r.vertices()[1];
        let (a, b) = (-1.5f64, -0.75f64);
        assert!((x - 2.0 * (a * a + a * b + b * b) / (3.0 * (a + b))).abs() < 1e-12);
    }

    #[test]
    fn bisect_longest_adds_one_point() {
        let r = refine(&cube(), &BisectLongest, 1).unwrap();
        assert_eq!(r.partition(), &[-1.5, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn max_error_point_shrinks_area() {
        let s = UnivariateSpec::new(Arc::new(SignedSquare), -2.0, 3.0).unwrap();
        let r = base_relaxation(&s).unwrap();
        let mut prev = r.area();
        let mut cur = r;
        for _ in 0..4 {
            cur = refine(&cur, &MaxErrorPoint::default(), 1).unwrap();
            let a = cur.area();
            assert!(a < prev);
            prev = a;
        }
        assert_eq!(cur.partition().len(), 7);
    }

    #[test]
    fn registry_lookup() {
        let reg = RefinementRegistry::default();
        assert_eq!(
            reg.names(),
            vec!["bisect-all", "bisect-longest", "max-error-point"]
        );
        assert!(reg.get("bisect-all").is_ok());
        assert!(matches!(reg.get("nope"), Err(RelaxError::UnknownScheme(_))));
    }
}
