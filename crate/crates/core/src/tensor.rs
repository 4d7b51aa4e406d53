//! Symmetric rank-2 tensor algebra on R^3.
//!
//! A rank-2 magnetic polarizability tensor splits into real and imaginary
//! symmetric parts, so everything here is built around a six-coefficient
//! symmetric tensor type: eigendecomposition, rotation by proper orthogonal
//! matrices, principal and deviatoric invariants, and the commutator of the
//! two parts whose single independent invariant survives rotation.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Canonical coefficient order used everywhere: c11, c22, c33, c12, c13, c23.
pub const COEFF_NAMES: [&str; 6] = ["c11", "c22", "c33", "c12", "c13", "c23"];

/// Symmetric 3x3 tensor stored as its six independent coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricTensor3 {
    pub c11: f64,
    pub c22: f64,
    pub c33: f64,
    pub c12: f64,
    pub c13: f64,
    pub c23: f64,
}

impl SymmetricTensor3 {
    pub fn new(c11: f64, c22: f64, c33: f64, c12: f64, c13: f64, c23: f64) -> Self {
        Self { c11, c22, c33, c12, c13, c23 }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn identity() -> Self {
        Self::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0)
    }

    pub fn diagonal(d1: f64, d2: f64, d3: f64) -> Self {
        Self::new(d1, d2, d3, 0.0, 0.0, 0.0)
    }

    /// Coefficients in canonical order c11, c22, c33, c12, c13, c23.
    pub fn coeffs(&self) -> [f64; 6] {
        [self.c11, self.c22, self.c33, self.c12, self.c13, self.c23]
    }

    pub fn from_coeffs(c: [f64; 6]) -> Self {
        Self::new(c[0], c[1], c[2], c[3], c[4], c[5])
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.c11, self.c12, self.c13,
            self.c12, self.c22, self.c23,
            self.c13, self.c23, self.c33,
        )
    }

    /// Rejects matrices whose asymmetry exceeds 1e-12 relative to scale.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        let scale = m.norm().max(1.0);
        let asym = (m - m.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric: max asymmetry {asym:.3e}"
            )));
        }
        Ok(Self::from_matrix_symmetrized(m))
    }

    /// Takes the symmetric part (m + m^T)/2 without checking.
    pub fn from_matrix_symmetrized(m: &Matrix3<f64>) -> Self {
        Self::new(
            m[(0, 0)],
            m[(1, 1)],
            m[(2, 2)],
            0.5 * (m[(0, 1)] + m[(1, 0)]),
            0.5 * (m[(0, 2)] + m[(2, 0)]),
            0.5 * (m[(1, 2)] + m[(2, 1)]),
        )
    }

    /// Coefficient (i, j) with 0-based indices in either order.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.c11,
            (1, 1) => self.c22,
            (2, 2) => self.c33,
            (0, 1) => self.c12,
            (0, 2) => self.c13,
            (1, 2) => self.c23,
            _ => panic!("tensor index out of range: ({i}, {j})"),
        }
    }

    pub fn trace(&self) -> f64 {
        self.c11 + self.c22 + self.c33
    }

    /// Frobenius norm; off-diagonal coefficients count twice.
    pub fn frobenius_norm(&self) -> f64 {
        (self.c11 * self.c11
            + self.c22 * self.c22
            + self.c33 * self.c33
            + 2.0 * (self.c12 * self.c12 + self.c13 * self.c13 + self.c23 * self.c23))
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs().iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_coeffs(self.coeffs().map(|c| c * s))
    }

    /// Applies v -> T v.
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.c11 * v.x + self.c12 * v.y + self.c13 * v.z,
            self.c12 * v.x + self.c22 * v.y + self.c23 * v.z,
            self.c13 * v.x + self.c23 * v.y + self.c33 * v.z,
        )
    }
}

impl std::ops::Add for SymmetricTensor3 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let a = self.coeffs();
        let b = rhs.coeffs();
        Self::from_coeffs(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl std::ops::Sub for SymmetricTensor3 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let a = self.coeffs();
        let b = rhs.coeffs();
        Self::from_coeffs(std::array::from_fn(|i| a[i] - b[i]))
    }
}

impl std::ops::Neg for SymmetricTensor3 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl std::ops::Mul<f64> for SymmetricTensor3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

/// One frequency sample of a spectral signature: omega in rad/s, the real
/// part R~ = N0 + R and the imaginary part I of the tensor at that frequency.
#[derive(Debug, Clone, Copy)]
pub struct MptSample {
    omega: f64,
    r_tilde: SymmetricTensor3,
    i_part: SymmetricTensor3,
}

impl MptSample {
    /// omega must be finite and nonnegative; at omega = 0 the imaginary part
    /// must vanish identically.
    pub fn new(omega: f64, r_tilde: SymmetricTensor3, i_part: SymmetricTensor3) -> Result<Self> {
        if !omega.is_finite() || omega < 0.0 {
            return Err(Error::InvalidInput(format!(
                "sample frequency must be finite and nonnegative, got {omega}"
            )));
        }
        if !r_tilde.is_finite() || !i_part.is_finite() {
            return Err(Error::InvalidInput(
                "sample tensors must have finite coefficients".into(),
            ));
        }
        if omega == 0.0 && i_part.max_abs() != 0.0 {
            return Err(Error::InvalidInput(
                "imaginary part must be zero at zero frequency".into(),
            ));
        }
        Ok(Self { omega, r_tilde, i_part })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn r_tilde(&self) -> &SymmetricTensor3 {
        &self.r_tilde
    }

    pub fn i_part(&self) -> &SymmetricTensor3 {
        &self.i_part
    }
}

/// Result of a symmetric 3x3 eigendecomposition.
///
/// Eigenvalues are sorted descending; basis column j is the unit eigenvector
/// of eigenvalues[j] with its largest-magnitude component positive (ties
/// resolved toward the lowest index).
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: [f64; 3],
    pub basis: Matrix3<f64>,
}

/// Principal invariants (I1, I2, I3) or the deviatoric set (I1, J2, J3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantTriple {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

// Cyclic Jacobi sweeps; robust fallback for clustered eigenvalues.
fn jacobi_eig(m: &Matrix3<f64>) -> ([f64; 3], Matrix3<f64>) {
    let mut a = *m;
    let mut v = Matrix3::identity();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for _ in 0..64 {
        let off = (a[(0, 1)].abs()).max(a[(0, 2)].abs()).max(a[(1, 2)].abs());
        if off <= 1e-15 * scale {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq.abs() <= f64::MIN_POSITIVE {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Matrix3::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            a = rot.transpose() * a * rot;
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            v *= rot;
        }
    }
    ([a[(0, 0)], a[(1, 1)], a[(2, 2)]], v)
}

// Eigenvector of (m - lambda I) via the largest cross product of its rows.
fn eigenvector_for(m: &Matrix3<f64>, lambda: f64) -> Option<Vector3<f64>> {
    let b = m - Matrix3::from_diagonal_element(lambda);
    let r0 = Vector3::new(b[(0, 0)], b[(0, 1)], b[(0, 2)]);
    let r1 = Vector3::new(b[(1, 0)], b[(1, 1)], b[(1, 2)]);
    let r2 = Vector3::new(b[(2, 0)], b[(2, 1)], b[(2, 2)]);
    let c01 = r0.cross(&r1);
    let c02 = r0.cross(&r2);
    let c12 = r1.cross(&r2);
    let (mut best, mut best_norm) = (c01, c01.norm());
    if c02.norm() > best_norm {
        best = c02;
        best_norm = c02.norm();
    }
    if c12.norm() > best_norm {
        best = c12;
        best_norm = c12.norm();
    }
    if best_norm <= f64::MIN_POSITIVE {
        return None;
    }
    Some(best / best_norm)
}

fn sort_and_orient(mut eigenvalues: [f64; 3], mut basis: Matrix3<f64>) -> EigenDecomposition {
    // Descending eigenvalue order, columns permuted alongside.
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| eigenvalues[j].partial_cmp(&eigenvalues[i]).unwrap());
    let vals = [eigenvalues[idx[0]], eigenvalues[idx[1]], eigenvalues[idx[2]]];
    let cols = [basis.column(idx[0]).into_owned(), basis.column(idx[1]).into_owned(), basis.column(idx[2]).into_owned()];
    eigenvalues = vals;
    basis = Matrix3::from_columns(&cols);
    // Sign convention: largest-magnitude component positive, ties toward
    // the lowest index.
    for j in 0..3 {
        let col = basis.column(j).into_owned();
        let mut k = 0;
        for i in 1..3 {
            if col[i].abs() > col[k].abs() {
                k = i;
            }
        }
        if col[k] < 0.0 {
            basis.set_column(j, &(-col));
        }
    }
    EigenDecomposition { eigenvalues, basis }
}

/// Eigendecomposition of a symmetric tensor.
///
/// Uses the trigonometric closed form with an iterative Jacobi fallback when
/// eigenvalue gaps shrink below 1e-8 of the Frobenius norm or the closed-form
/// basis fails its reconstruction check.
pub fn eig_sym3(t: &SymmetricTensor3) -> Result<EigenDecomposition> {
    if !t.is_finite() {
        return Err(Error::InvalidInput("tensor has non-finite coefficients".into()));
    }
    let m = t.to_matrix();
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Ok(EigenDecomposition { eigenvalues: [0.0; 3], basis: Matrix3::identity() });
    }

    let q = t.trace() / 3.0;
    let b = m - Matrix3::from_diagonal_element(q);
    let p = (b.norm_squared() / 6.0).sqrt();
    if p <= 1e-14 * norm {
        // Near-multiple of the identity.
        return Ok(EigenDecomposition { eigenvalues: [q; 3], basis: Matrix3::identity() });
    }
    let r = ((b / p).determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let e2 = 3.0 * q - e1 - e3;

    let gap = (e1 - e2).abs().min((e2 - e3).abs());
    let closed_form = if gap >= 1e-8 * norm {
        let v1 = eigenvector_for(&m, e1);
        let v3 = eigenvector_for(&m, e3);
        match (v1, v3) {
            (Some(v1), Some(v3)) => {
                let v2 = v3.cross(&v1);
                Some(Matrix3::from_columns(&[v1, v2, v3]))
            }
            _ => None,
        }
    } else {
        None
    };

    let decomp = match closed_form {
        Some(basis) => sort_and_orient([e1, e2, e3], basis),
        None => {
            let (vals, vecs) = jacobi_eig(&m);
            sort_and_orient(vals, vecs)
        }
    };

    // Verify reconstruction; fall back to Jacobi if the closed form drifted.
    let d = Matrix3::from_diagonal(&Vector3::from(decomp.eigenvalues));
    let recon = decomp.basis * d * decomp.basis.transpose();
    if (recon - m).norm() > 1e-11 * norm {
        let (vals, vecs) = jacobi_eig(&m);
        return Ok(sort_and_orient(vals, vecs));
    }
    Ok(decomp)
}

/// Principal invariants: I1 = tr, I2 = (tr^2 - tr(T^2))/2, I3 = det.
pub fn principal_invariants(t: &SymmetricTensor3) -> InvariantTriple {
    let i1 = t.trace();
    let i2 = t.c11 * t.c22 + t.c11 * t.c33 + t.c22 * t.c33
        - t.c12 * t.c12
        - t.c13 * t.c13
        - t.c23 * t.c23;
    let i3 = t.to_matrix().determinant();
    InvariantTriple { i1, i2, i3 }
}

/// Deviatoric set (I1, J2, J3): J2 = tr(S^2)/2 >= 0 and J3 = det S for the
/// deviator S = T - (I1/3) Id.
pub fn alternative_invariants(t: &SymmetricTensor3) -> InvariantTriple {
    let i1 = t.trace();
    let s = *t - SymmetricTensor3::identity().scale(i1 / 3.0);
    let j2 = 0.5 * s.frobenius_norm().powi(2);
    let j3 = s.to_matrix().determinant();
    InvariantTriple { i1, i2: j2, i3: j3 }
}

/// Commutator Z = R~ I - I R~ of the two symmetric parts.
///
/// Built from the three independent entries of P - P^T with P = R~ I, so the
/// diagonal is exactly zero and Z = -Z^T holds exactly.
pub fn commutator(r_tilde: &SymmetricTensor3, i_part: &SymmetricTensor3) -> Matrix3<f64> {
    let p = r_tilde.to_matrix() * i_part.to_matrix();
    let z12 = p[(0, 1)] - p[(1, 0)];
    let z13 = p[(0, 2)] - p[(2, 0)];
    let z23 = p[(1, 2)] - p[(2, 1)];
    Matrix3::new(0.0, z12, z13, -z12, 0.0, z23, -z13, -z23, 0.0)
}

/// Rotation-invariant magnitude of a skew matrix,
/// sqrt(Z12^2 + Z13^2 + Z23^2); its eigenvalues are {0, +-i times this}.
///
/// Errors if the input deviates from skew symmetry by more than 1e-12
/// relative to scale.
pub fn commutator_invariant(z: &Matrix3<f64>) -> Result<f64> {
    let scale = z.amax().max(1.0);
    let skew_defect = (z + z.transpose()).amax();
    if skew_defect > 1e-12 * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not skew-symmetric: max defect {skew_defect:.3e}"
        )));
    }
    let z12 = z[(0, 1)];
    let z13 = z[(0, 2)];
    let z23 = z[(1, 2)];
    Ok((z12 * z12 + z13 * z13 + z23 * z23).sqrt())
}

/// Conjugates T by a rotation: R T R^T.
///
/// R must be orthogonal with determinant +1, both checked to 1e-10.
pub fn rotate(t: &SymmetricTensor3, r: &Matrix3<f64>) -> Result<SymmetricTensor3> {
    let ortho_defect = (r.transpose() * r - Matrix3::identity()).amax();
    if ortho_defect > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "rotation matrix is not orthogonal: max defect {ortho_defect:.3e}"
        )));
    }
    if (r.determinant() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "rotation matrix must have determinant +1, got {}",
            r.determinant()
        )));
    }
    Ok(SymmetricTensor3::from_matrix_symmetrized(&(r * t.to_matrix() * r.transpose())))
}

/// Checks the eigenvalue perturbation bound sum (lambda_i(A+E) - lambda_i(A))^2
/// <= ||E||_F^2 for sorted eigenvalues, with slack for roundoff.
pub fn eigenvalue_shift_bound_holds(a: &SymmetricTensor3, e: &SymmetricTensor3) -> Result<bool> {
    let base = eig_sym3(a)?.eigenvalues;
    let shifted = eig_sym3(&(*a + *e))?.eigenvalues;
    let sum: f64 = (0..3).map(|i| (shifted[i] - base[i]).powi(2)).sum();
    let rhs = e.frobenius_norm().powi(2);
    let slack = 1e-12 * (a.frobenius_norm() + e.frobenius_norm()).powi(2).max(f64::MIN_POSITIVE);
    Ok(sum <= rhs + slack)
}

/// Off-diagonal magnitude checks for a split (N0, R~, I):
/// |R~_ij| <= |tr(R~ - N0)| + |tr N0| and |I_ij| <= tr I.
///
/// These hold for tensors of conducting permeable objects; on arbitrary
/// input the result only flags, it never fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffDiagonalBounds {
    pub r_tilde_ok: bool,
    pub i_ok: bool,
}

pub fn off_diagonal_bounds(
    n0: &SymmetricTensor3,
    r_tilde: &SymmetricTensor3,
    i_part: &SymmetricTensor3,
) -> OffDiagonalBounds {
    let slack = 1e-12 * (n0.max_abs() + r_tilde.max_abs() + i_part.max_abs()).max(1e-300);
    let r_bound = (r_tilde.trace() - n0.trace()).abs() + n0.trace().abs() + slack;
    let i_bound = i_part.trace() + slack;
    let r_tilde_ok = [r_tilde.c12, r_tilde.c13, r_tilde.c23]
        .iter()
        .all(|c| c.abs() <= r_bound);
    let i_ok = [i_part.c12, i_part.c13, i_part.c23]
        .iter()
        .all(|c| c.abs() <= i_bound);
    OffDiagonalBounds { r_tilde_ok, i_ok }
}
