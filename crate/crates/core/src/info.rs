//! Closed-form arithmetic on 2×2 symmetric information matrices.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PSD tolerance on the smaller eigenvalue.
pub const PSD_TOL: f64 = 1e-12;

/// Symmetric matrix `[[bb, bd], [bd, dd]]`, rows and columns ordered `(β, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InfoMatrix {
    pub bb: f64,
    pub bd: f64,
    pub dd: f64,
}

impl InfoMatrix {
    pub const ZERO: InfoMatrix = InfoMatrix {
        bb: 0.0,
        bd: 0.0,
        dd: 0.0,
    };

    pub fn new(bb: f64, bd: f64, dd: f64) -> Self {
        Self { bb, bd, dd }
    }

    pub fn identity() -> Self {
        Self::diag(1.0, 1.0)
    }

    pub fn diag(bb: f64, dd: f64) -> Self {
        Self { bb, bd: 0.0, dd }
    }

    /// `w · g gᵀ`.
    pub fn outer(g: [f64; 2], w: f64) -> Self {
        Self {
            bb: w * g[0] * g[0],
            bd: w * g[0] * g[1],
            dd: w * g[1] * g[1],
        }
    }

    /// Symmetric matrix from full rows; asymmetry beyond a relative `1e-12` is rejected.
    pub fn from_rows(rows: [[f64; 2]; 2]) -> Result<Self> {
        let scale = rows.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        let skew = rows[0][1] - rows[1][0];
        if skew.abs() > 1e-12 * scale {
            return Err(Error::NotSymmetric(skew));
        }
        Ok(Self::new(rows[0][0], 0.5 * (rows[0][1] + rows[1][0]), rows[1][1]))
    }

    pub fn scaled(self, s: f64) -> Self {
        Self::new(s * self.bb, s * self.bd, s * self.dd)
    }

    pub fn trace(&self) -> f64 {
        self.bb + self.dd
    }

    pub fn det(&self) -> f64 {
        self.bb * self.dd - self.bd * self.bd
    }

    pub fn frobenius(&self) -> f64 {
        (self.bb * self.bb + 2.0 * self.bd * self.bd + self.dd * self.dd).sqrt()
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NotPositiveDefinite(format!("singular matrix {self:?}")));
        }
        Ok(Self::new(self.dd / det, -self.bd / det, self.bb / det))
    }

    /// Eigenvalues `(λ₁, λ₂)` with `|λ₁| ≥ |λ₂|`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let tr = self.trace();
        let half_gap = 0.5 * self.bb - 0.5 * self.dd;
        // (tr² − 4det)/4 written as a sum of squares, so it never goes negative.
        let root = (half_gap * half_gap + self.bd * self.bd).sqrt();
        let big = if tr >= 0.0 { 0.5 * tr + root } else { 0.5 * tr - root };
        let small = if big != 0.0 { self.det() / big } else { 0.0 };
        if big.abs() >= small.abs() {
            (big, small)
        } else {
            (small, big)
        }
    }

    /// `λ₂ / λ₁`; zero for the zero matrix.
    pub fn eigen_ratio(&self) -> f64 {
        let (l1, l2) = self.eigenvalues();
        if l1 == 0.0 {
            0.0
        } else {
            l2 / l1
        }
    }

    pub fn is_psd(&self) -> bool {
        self.eigenvalues().1 >= -PSD_TOL
    }

    pub fn is_pd(&self) -> bool {
        let (l1, l2) = self.eigenvalues();
        l1 > 0.0 && l2 > 0.0
    }
}

impl Add for InfoMatrix {
    type Output = InfoMatrix;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.bb + rhs.bb, self.bd + rhs.bd, self.dd + rhs.dd)
    }
}

impl AddAssign for InfoMatrix {
    fn add_assign(&mut self, rhs: Self) {
        self.bb += rhs.bb;
        self.bd += rhs.bd;
        self.dd += rhs.dd;
    }
}

/// Eigenvalues of a general 2×2 matrix given by rows, via
/// `λ = (tr ± sqrt(tr² − 4 det)) / 2`, ordered by magnitude.
///
/// A discriminant below `-1e-12` means complex eigenvalues (an asymmetric
/// input) and is rejected; smaller negative values are clamped to zero.
pub fn eig2(rows: [[f64; 2]; 2]) -> Result<(f64, f64)> {
    let tr = rows[0][0] + rows[1][1];
    let det = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0];
    let mut disc = tr * tr - 4.0 * det;
    if disc < -1e-12 {
        return Err(Error::NotSymmetric(disc));
    }
    if disc < 0.0 {
        disc = 0.0;
    }
    let root = disc.sqrt();
    let a = 0.5 * (tr + root);
    let b = 0.5 * (tr - root);
    Ok(if a.abs() >= b.abs() { (a, b) } else { (b, a) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(eig2([[1.0, 0.0], [0.0, 1.0]]).unwrap(), (1.0, 1.0));
        assert_eq!(eig2([[3.0, 0.0], [0.0, 1.0]]).unwrap(), (3.0, 1.0));
        assert_eq!(eig2([[2.0, 1.0], [1.0, 2.0]]).unwrap(), (3.0, 1.0));
        assert_eq!(InfoMatrix::new(2.0, 1.0, 2.0).eigenvalues(), (3.0, 1.0));
        assert_eq!(InfoMatrix::diag(1.0, 3.0).eigenvalues(), (3.0, 1.0));
    }

    #[test]
    fn rejects_complex_spectrum() {
        assert!(eig2([[0.0, 1.0], [-1.0, 0.0]]).is_err());
        assert!(InfoMatrix::from_rows([[1.0, 2.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn magnitude_ordering_with_negative_eigenvalue() {
        let (l1, l2) = InfoMatrix::diag(-5.0, 1.0).eigenvalues();
        assert_eq!((l1, l2), (-5.0, 1.0));
    }

    #[test]
    fn inverse_roundtrip() {
        let m = InfoMatrix::new(4.0, 1.0, 3.0);
        let inv = m.inverse().unwrap();
        assert!((m.bb * inv.bb + m.bd * inv.bd - 1.0).abs() < 1e-15);
        assert!((m.bb * inv.bd + m.bd * inv.dd).abs() < 1e-15);
        assert!(InfoMatrix::ZERO.inverse().is_err());
    }

    fn psd() -> impl Strategy<Value = InfoMatrix> {
        (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b, c, d)| {
            // G Gᵀ for a random 2×2 G.
            InfoMatrix::new(a * a + b * b, a * c + b * d, c * c + d * d)
        })
    }

    proptest! {
        #[test]
        fn weyl_inequalities(a in psd(), b in psd()) {
            let (a1, a2) = a.eigenvalues();
            let (b1, b2) = b.eigenvalues();
            let (s1, s2) = (a + b).eigenvalues();
            let tol = 1e-9 * (1.0 + a1 + b1);
            prop_assert!(a1 <= s1 + tol);
            prop_assert!(s1 <= a1 + b1 + tol);
            prop_assert!(s2 + tol >= a2 + b2);
        }

        #[test]
        fn stable_route_matches_general_route(m in psd()) {
            let (l1, l2) = m.eigenvalues();
            let (g1, g2) = eig2([[m.bb, m.bd], [m.bd, m.dd]]).unwrap();
            let scale = 1.0 + l1.abs();
            prop_assert!((l1 - g1).abs() < 1e-10 * scale);
            prop_assert!((l2 - g2).abs() < 1e-10 * scale);
            prop_assert!((l1 + l2 - m.trace()).abs() < 1e-10 * scale);
            prop_assert!(m.is_psd());
        }
    }
}
