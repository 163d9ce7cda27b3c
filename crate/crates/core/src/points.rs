use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Finite multiset of points in the complex plane. Repeated points encode
/// multiplicity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointSet {
    points: Vec<Complex64>,
}

impl PointSet {
    pub fn new(points: Vec<Complex64>) -> Self {
        Self { points }
    }

    /// Builds a multiset from `(point, multiplicity)` pairs.
    pub fn from_multiplicities(items: &[(Complex64, usize)]) -> Self {
        let mut points = Vec::new();
        for &(z, m) in items {
            points.extend(std::iter::repeat(z).take(m));
        }
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.points.iter()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.points
    }

    pub fn to_vec(&self) -> Vec<Complex64> {
        self.points.clone()
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.points
    }

    pub fn push(&mut self, z: Complex64) {
        self.points.push(z);
    }

    pub fn filter(&self, mut keep: impl FnMut(Complex64) -> bool) -> Self {
        Self {
            points: self.points.iter().copied().filter(|&z| keep(z)).collect(),
        }
    }

    /// Applies `z ↦ scale · (z - center)` to every point.
    pub fn rescaled(&self, center: Complex64, scale: f64) -> Self {
        Self {
            points: self.points.iter().map(|&z| (z - center) * scale).collect(),
        }
    }

    /// Points sorted lexicographically by (re, im), useful for stable output.
    pub fn sorted(&self) -> Self {
        let mut points = self.points.clone();
        points.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Self { points }
    }

    /// Distance from `z` to the nearest point, `+∞` when empty.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        self.points.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min)
    }
}

impl FromIterator<Complex64> for PointSet {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        Self {
            points: iter.into_iter().collect(),
        }
    }
}

impl From<Vec<Complex64>> for PointSet {
    fn from(points: Vec<Complex64>) -> Self {
        Self { points }
    }
}

impl<'a> IntoIterator for &'a PointSet {
    type Item = &'a Complex64;
    type IntoIter = std::slice::Iter<'a, Complex64>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicities_expand() {
        let z = Complex64::new(1.0, -1.0);
        let s = PointSet::from_multiplicities(&[(z, 3), (Complex64::new(0.0, 0.0), 1)]);
        assert_eq!(s.len(), 4);
        assert_eq!(s.iter().filter(|&&w| w == z).count(), 3);
        assert_eq!(s.distance_to(Complex64::new(0.0, 0.5)), 0.5);
    }
}
