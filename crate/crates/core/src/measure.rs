//! Forward coil-voltage simulation and least-squares recovery of the six
//! complex polarizability coefficients.
//!
//! A small object at z perturbs the field of exciter m by
//! (H_a - H_0)(x) = D^2 G(x, z) M H_0(z) to leading order, and receiver
//! coil n measures the flux-like voltage V_nm = int_C n . (H_a - H_0) dx.
//! Stacking all coil pairs gives an overdetermined real linear system in
//! the six distinct coefficients of each symmetric part, solved by
//! orthogonal factorization.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::tensor::SymmetricTensor3;

/// Planar circular receiver coil.
#[derive(Debug, Clone, Copy)]
pub struct ReceiverCoil {
    pub center: Vector3<f64>,
    /// Unit normal; normalized on construction.
    pub normal: Vector3<f64>,
    pub radius: f64,
    pub quadrature_order: usize,
}

impl ReceiverCoil {
    pub fn new(
        center: Vector3<f64>,
        normal: Vector3<f64>,
        radius: f64,
        quadrature_order: usize,
    ) -> Result<Self> {
        if !center.iter().all(|v| v.is_finite()) || !normal.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("coil geometry must be finite".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "coil radius must be finite and positive, got {radius}"
            )));
        }
        if quadrature_order == 0 {
            return Err(Error::InvalidInput("quadrature order must be at least 1".into()));
        }
        let n = normal.norm();
        if n <= 0.0 {
            return Err(Error::InvalidInput("coil normal must be nonzero".into()));
        }
        Ok(Self { center, normal: normal / n, radius, quadrature_order })
    }
}

/// Exciter fields at the object position plus receiver coils.
#[derive(Debug, Clone)]
pub struct CoilLayout {
    pub exciters: Vec<Vector3<f64>>,
    pub receivers: Vec<ReceiverCoil>,
    /// Object position.
    pub z: Vector3<f64>,
}

impl CoilLayout {
    /// Validates geometry: nonempty, finite, and no receiver disc reaching
    /// the object position.
    pub fn new(
        exciters: Vec<Vector3<f64>>,
        receivers: Vec<ReceiverCoil>,
        z: Vector3<f64>,
    ) -> Result<Self> {
        if exciters.is_empty() || receivers.is_empty() {
            return Err(Error::InvalidInput(
                "layout needs at least one exciter and one receiver".into(),
            ));
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("object position must be finite".into()));
        }
        for (m, h) in exciters.iter().enumerate() {
            if !h.iter().all(|v| v.is_finite()) || h.norm() == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "exciter {m} field must be finite and nonzero"
                )));
            }
        }
        for (n, coil) in receivers.iter().enumerate() {
            if (coil.center - z).norm() <= coil.radius {
                return Err(Error::InvalidInput(format!(
                    "receiver {n} disc reaches the object position"
                )));
            }
        }
        Ok(Self { exciters, receivers, z })
    }

    pub fn num_exciters(&self) -> usize {
        self.exciters.len()
    }

    pub fn num_receivers(&self) -> usize {
        self.receivers.len()
    }

    /// Reference array: three orthogonal unit exciters and eight receivers
    /// at the cube vertices of a sphere of radius `standoff` around z, each
    /// facing outward.
    pub fn cube_vertex_array(
        z: Vector3<f64>,
        standoff: f64,
        coil_radius: f64,
        quadrature_order: usize,
    ) -> Result<Self> {
        if !(standoff.is_finite() && standoff > 0.0) {
            return Err(Error::InvalidInput(format!(
                "standoff must be finite and positive, got {standoff}"
            )));
        }
        let exciters = vec![Vector3::x(), Vector3::y(), Vector3::z()];
        let mut receivers = Vec::with_capacity(8);
        let s = 1.0 / 3.0f64.sqrt();
        for &sx in &[-1.0, 1.0] {
            for &sy in &[-1.0, 1.0] {
                for &sz in &[-1.0, 1.0] {
                    let dir = Vector3::new(sx * s, sy * s, sz * s);
                    receivers.push(ReceiverCoil::new(
                        z + standoff * dir,
                        dir,
                        coil_radius,
                        quadrature_order,
                    )?);
                }
            }
        }
        Self::new(exciters, receivers, z)
    }
}

/// Voltages for every (receiver, exciter) pair at one frequency; entry
/// index is n * M_e + m for receiver n and exciter m.
#[derive(Debug, Clone)]
pub struct VoltageSet {
    pub omega: f64,
    pub entries: Vec<Complex64>,
    pub num_exciters: usize,
    pub num_receivers: usize,
}

/// Assembled least-squares system with condition diagnostics.
#[derive(Debug, Clone)]
pub struct RecoverySystem {
    /// Rows = coil pairs in index order n * M_e + m; columns = the six
    /// unknowns (11, 22, 33, 12, 13, 23) with off-diagonal columns carrying
    /// both symmetric contributions.
    pub a: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub condition_number: f64,
    pub rank: usize,
    pub num_exciters: usize,
    pub num_receivers: usize,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Recovered tensor pair and least-squares residual.
#[derive(Debug, Clone, Copy)]
pub struct Recovery {
    pub r_tilde: SymmetricTensor3,
    pub i_part: SymmetricTensor3,
    /// Euclidean norm of A u - b over both parts.
    pub residual: f64,
}

/// Hessian of the free-space Green's function 1/(4 pi |x - z|):
/// (3 d d^T - I)/(4 pi r^3) for the unit vector d from z to x. Symmetric
/// and trace-free.
pub fn green_hessian(x: &Vector3<f64>, z: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let d = x - z;
    let r = d.norm();
    if r < 1e-12 {
        return Err(Error::Singularity(format!(
            "field point within 1e-12 m of the source (r = {r:.3e})"
        )));
    }
    let u = d / r;
    let scale = 1.0 / (4.0 * std::f64::consts::PI * r.powi(3));
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let v = scale * (3.0 * u[i] * u[j] - if i == j { 1.0 } else { 0.0 });
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Leading-order field perturbation (H_a - H_0)(x) = D^2 G(x, z) M H_0(z)
/// for M = R~ + i I, returned as a complex vector.
pub fn forward_perturbation(
    r_tilde: &SymmetricTensor3,
    i_part: &SymmetricTensor3,
    h0_at_z: &Vector3<f64>,
    x: &Vector3<f64>,
    z: &Vector3<f64>,
) -> Result<Vector3<Complex64>> {
    let g = green_hessian(x, z)?;
    let re = g * r_tilde.apply(h0_at_z);
    let im = g * i_part.apply(h0_at_z);
    Ok(Vector3::new(
        Complex64::new(re.x, im.x),
        Complex64::new(re.y, im.y),
        Complex64::new(re.z, im.z),
    ))
}

// In-plane orthonormal frame for a unit normal.
fn disc_frame(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if normal.x.abs() <= normal.y.abs().min(normal.z.abs()) {
        Vector3::x()
    } else if normal.y.abs() <= normal.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = normal.cross(&helper).normalize();
    let e2 = normal.cross(&e1);
    (e1, e2)
}

/// Integral of D^2 G(x, z) n over the coil disc: the voltage contraction
/// V = J . (M H_0) uses this vector for every exciter.
///
/// Quadrature: Gauss-Legendre of the coil's order radially, mapped to
/// [0, R], crossed with a uniform angular rule of twice that order, which
/// converges spectrally on the periodic direction.
pub fn coil_integral(coil: &ReceiverCoil, z: &Vector3<f64>) -> Result<Vector3<f64>> {
    let q = coil.quadrature_order;
    let (nodes, weights) = gauss_legendre(q)?;
    let (e1, e2) = disc_frame(&coil.normal);
    let n_ang = 2 * q;
    let w_ang = 2.0 * std::f64::consts::PI / n_ang as f64;
    let mut acc = Vector3::zeros();
    for (&u, &wu) in nodes.iter().zip(&weights) {
        let rho = coil.radius * 0.5 * (u + 1.0);
        let jac = rho * coil.radius * 0.5;
        for j in 0..n_ang {
            let theta = w_ang * j as f64;
            let x = coil.center + rho * (theta.cos() * e1 + theta.sin() * e2);
            let g = green_hessian(&x, z)?;
            acc += wu * jac * w_ang * (g * coil.normal);
        }
    }
    Ok(acc)
}

/// Voltage induced in one receiver coil by one exciter.
pub fn induced_voltage(
    coil: &ReceiverCoil,
    r_tilde: &SymmetricTensor3,
    i_part: &SymmetricTensor3,
    h0_at_z: &Vector3<f64>,
    z: &Vector3<f64>,
) -> Result<Complex64> {
    let j = coil_integral(coil, z)?;
    Ok(Complex64::new(j.dot(&r_tilde.apply(h0_at_z)), j.dot(&i_part.apply(h0_at_z))))
}

/// Voltages for every coil pair of the layout at one frequency tag.
pub fn forward_voltages(
    layout: &CoilLayout,
    r_tilde: &SymmetricTensor3,
    i_part: &SymmetricTensor3,
    omega: f64,
) -> Result<VoltageSet> {
    let me = layout.num_exciters();
    let mut entries = Vec::with_capacity(me * layout.num_receivers());
    for coil in &layout.receivers {
        let j = coil_integral(coil, &layout.z)?;
        for h0 in &layout.exciters {
            entries.push(Complex64::new(
                j.dot(&r_tilde.apply(h0)),
                j.dot(&i_part.apply(h0)),
            ));
        }
    }
    Ok(VoltageSet {
        omega,
        entries,
        num_exciters: me,
        num_receivers: layout.num_receivers(),
    })
}

/// Builds the design matrix mapping the six distinct coefficients to all
/// coil-pair voltages, with singular-value diagnostics.
pub fn assemble_system(layout: &CoilLayout) -> Result<RecoverySystem> {
    let (me, mr) = (layout.num_exciters(), layout.num_receivers());
    let rows = me * mr;
    if rows <= 6 {
        return Err(Error::Underdetermined { rows });
    }
    let mut a = DMatrix::<f64>::zeros(rows, 6);
    for (n, coil) in layout.receivers.iter().enumerate() {
        let j = coil_integral(coil, &layout.z)?;
        for (m, h) in layout.exciters.iter().enumerate() {
            let row = n * me + m;
            a[(row, 0)] = j.x * h.x;
            a[(row, 1)] = j.y * h.y;
            a[(row, 2)] = j.z * h.z;
            a[(row, 3)] = j.x * h.y + j.y * h.x;
            a[(row, 4)] = j.x * h.z + j.z * h.x;
            a[(row, 5)] = j.y * h.z + j.z * h.y;
        }
    }
    let svd = a.clone().svd(true, true);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let s_max = singular_values[0];
    let s_min = singular_values[singular_values.len() - 1];
    let rank = singular_values.iter().filter(|s| **s > 1e-10 * s_max).count();
    let condition_number = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    Ok(RecoverySystem {
        a,
        singular_values,
        condition_number,
        rank,
        num_exciters: me,
        num_receivers: mr,
        svd,
    })
}

/// Least-squares recovery of the complex tensor from a voltage set.
///
/// Real and imaginary systems share the design matrix and are solved
/// separately through its singular value decomposition.
pub fn recover_mpt(system: &RecoverySystem, voltages: &VoltageSet) -> Result<Recovery> {
    let rows = system.a.nrows();
    if voltages.entries.len() != rows
        || voltages.num_exciters != system.num_exciters
        || voltages.num_receivers != system.num_receivers
    {
        return Err(Error::InvalidInput(format!(
            "voltage set shape {}x{} does not match system {}x{}",
            voltages.num_receivers,
            voltages.num_exciters,
            system.num_receivers,
            system.num_exciters
        )));
    }
    if system.rank < 6 {
        return Err(Error::RankDeficient {
            rank: system.rank,
            null_dim: 6 - system.rank,
        });
    }
    let b_re = DVector::from_iterator(rows, voltages.entries.iter().map(|v| v.re));
    let b_im = DVector::from_iterator(rows, voltages.entries.iter().map(|v| v.im));
    let eps = 1e-13 * system.singular_values[0];
    let u_re = system
        .svd
        .solve(&b_re, eps)
        .map_err(|e| Error::Convergence { message: e.to_string(), residual: f64::NAN })?;
    let u_im = system
        .svd
        .solve(&b_im, eps)
        .map_err(|e| Error::Convergence { message: e.to_string(), residual: f64::NAN })?;
    let res_re = (&system.a * &u_re - &b_re).norm_squared();
    let res_im = (&system.a * &u_im - &b_im).norm_squared();
    let to_tensor = |u: &DVector<f64>| {
        SymmetricTensor3::from_coeffs([u[0], u[1], u[2], u[3], u[4], u[5]])
    };
    Ok(Recovery {
        r_tilde: to_tensor(&u_re),
        i_part: to_tensor(&u_im),
        residual: (res_re + res_im).sqrt(),
    })
}

pub(crate) fn add_noise_with_rng(
    r_tilde: &SymmetricTensor3,
    i_part: &SymmetricTensor3,
    level: f64,
    rng: &mut ChaCha8Rng,
) -> (SymmetricTensor3, SymmetricTensor3) {
    let mut perturb = |t: &SymmetricTensor3| {
        let std = level * t.frobenius_norm() / 3.0;
        let mut c = t.coeffs();
        for v in &mut c {
            let g: f64 = StandardNormal.sample(rng);
            *v += std * g;
        }
        SymmetricTensor3::from_coeffs(c)
    };
    (perturb(r_tilde), perturb(i_part))
}

/// Adds independent symmetric Gaussian perturbations to both parts with
/// entrywise standard deviation level * ||part||_F / 3. Deterministic for
/// a fixed seed; level 0 returns the input unchanged.
pub fn add_noise(
    r_tilde: &SymmetricTensor3,
    i_part: &SymmetricTensor3,
    level: f64,
    seed: u64,
) -> (SymmetricTensor3, SymmetricTensor3) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    add_noise_with_rng(r_tilde, i_part, level, &mut rng)
}
