//! Small dense vector helpers and the norm tags used by constant sheets.

use serde::{Deserialize, Serialize};

/// The norms that appear in the analysis: the primal norm of a proximal setup
/// and its dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    /// Evaluates the norm of `v`.
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => norm2(v),
            Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// Norm of the difference `a - b`.
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Norm::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Norm::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Norm::Linf => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        }
    }

    /// The dual norm.
    pub fn dual(self) -> Norm {
        match self {
            Norm::L1 => Norm::Linf,
            Norm::L2 => Norm::L2,
            Norm::Linf => Norm::L1,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `y += s * x`.
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Index of the smallest entry; ties resolve to the lowest index.
pub fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_norms_pair_up() {
        assert_eq!(Norm::L1.dual(), Norm::Linf);
        assert_eq!(Norm::Linf.dual(), Norm::L1);
        assert_eq!(Norm::L2.dual(), Norm::L2);
    }

    #[test]
    fn norms_of_a_small_vector() {
        let v = [3.0, -4.0];
        assert_eq!(Norm::L1.of(&v), 7.0);
        assert_eq!(Norm::L2.of(&v), 5.0);
        assert_eq!(Norm::Linf.of(&v), 4.0);
        assert_eq!(Norm::L2.dist(&v, &[0.0, 0.0]), 5.0);
    }

    #[test]
    fn argmin_prefers_first_tie() {
        assert_eq!(argmin(&[2.0, 1.0, 1.0]), 1);
    }
}
