//! Modal spectral models and signature synthesis.
//!
//! The complex polarizability at angular frequency omega splits as
//! M(omega) = N0 + R(omega) + i I(omega) with
//!
//!   R = (alpha^3/4) sum_n Re beta_n w_n,   I = (alpha^3/4) sum_n Im beta_n w_n,
//!
//! where beta_n(nu) = -nu^2/(nu^2 + lambda_n^2) + i nu lambda_n/(nu^2 + lambda_n^2)
//! and nu = alpha^2 omega mu_0 sigma*. Each mode carries a positive
//! semidefinite symmetric weight w_n and a positive spectral parameter
//! lambda_n. At omega = 0 the signature reduces exactly to (N0, 0); as
//! omega grows, R falls toward its finite limit and I rises and returns
//! to zero.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::tensor::{eig_sym3, MptSample, SymmetricTensor3};

/// Vacuum permeability in H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// One spectral mode: parameter lambda > 0 and PSD weight tensor.
#[derive(Debug, Clone, Copy)]
pub struct Mode {
    pub lambda: f64,
    pub weight: SymmetricTensor3,
}

/// Validated modal description of one object.
#[derive(Debug, Clone)]
pub struct ModalModel {
    alpha: f64,
    sigma_star: f64,
    mu_r: f64,
    n0: SymmetricTensor3,
    modes: Vec<Mode>,
}

impl ModalModel {
    /// Validates and normalizes a modal description.
    ///
    /// alpha and sigma* must be positive, mu_r >= 1, every lambda positive,
    /// every weight PSD to 1e-10 relative, and n0 must vanish when mu_r = 1.
    /// Modes are sorted by ascending lambda.
    pub fn new(
        alpha: f64,
        sigma_star: f64,
        mu_r: f64,
        n0: SymmetricTensor3,
        mut modes: Vec<Mode>,
    ) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "size parameter must be finite and positive, got {alpha}"
            )));
        }
        if !sigma_star.is_finite() || sigma_star <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "conductivity must be finite and positive, got {sigma_star}"
            )));
        }
        if !mu_r.is_finite() || mu_r < 1.0 {
            return Err(Error::InvalidModel(format!(
                "relative permeability must be finite and at least 1, got {mu_r}"
            )));
        }
        if !n0.is_finite() {
            return Err(Error::InvalidModel("static tensor must be finite".into()));
        }
        if mu_r == 1.0 && n0.max_abs() != 0.0 {
            return Err(Error::InvalidModel(
                "static tensor must vanish for a non-permeable object".into(),
            ));
        }
        for (i, m) in modes.iter().enumerate() {
            if !m.lambda.is_finite() || m.lambda <= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "mode {i} has nonpositive spectral parameter {}",
                    m.lambda
                )));
            }
            if !m.weight.is_finite() {
                return Err(Error::InvalidModel(format!("mode {i} has non-finite weight")));
            }
            let min_eig = eig_sym3(&m.weight)?.eigenvalues[2];
            if min_eig < -1e-10 * m.weight.frobenius_norm().max(1.0) {
                return Err(Error::InvalidModel(format!(
                    "mode {i} weight is not positive semidefinite (min eigenvalue {min_eig:.3e})"
                )));
            }
        }
        modes.sort_by(|x, y| x.lambda.partial_cmp(&y.lambda).unwrap());
        Ok(Self { alpha, sigma_star, mu_r, n0, modes })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma_star(&self) -> f64 {
        self.sigma_star
    }

    pub fn mu_r(&self) -> f64 {
        self.mu_r
    }

    pub fn n0(&self) -> &SymmetricTensor3 {
        &self.n0
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }
}

/// A spectral signature: samples of (R~, I) over ascending frequencies,
/// tagged with the physical parameters they were generated from.
#[derive(Debug, Clone)]
pub struct MptSignature {
    pub alpha: f64,
    pub sigma_star: f64,
    pub mu_r: f64,
    pub label: Option<String>,
    /// Upper frequency bound of validity for the eddy-current regime.
    pub omega_limit: Option<f64>,
    pub samples: Vec<MptSample>,
}

impl MptSignature {
    pub fn omegas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.omega()).collect()
    }
}

/// Dimensionless frequency nu = alpha^2 omega mu_0 sigma*.
pub fn nu(alpha: f64, omega: f64, sigma_star: f64) -> f64 {
    alpha * alpha * omega * MU0 * sigma_star
}

/// Modal response beta(nu) = -nu^2/(nu^2 + lambda^2) + i nu lambda/(nu^2 + lambda^2).
///
/// beta(0) = 0 exactly; Re beta falls monotonically to -1; Im beta peaks at
/// nu = lambda with value 1/2, so beta(lambda, lambda) = -1/2 + i/2.
pub fn beta(nu: f64, lambda: f64) -> Complex64 {
    let denom = nu * nu + lambda * lambda;
    Complex64::new(-nu * nu / denom, nu * lambda / denom)
}

/// Synthesizes the spectral signature of `model` at the given ascending
/// frequencies (rad/s, nonnegative).
pub fn synthesize(model: &ModalModel, omegas: &[f64]) -> Result<MptSignature> {
    if model.modes.is_empty() {
        return Err(Error::InvalidModel("model has no spectral modes".into()));
    }
    if omegas.is_empty() {
        return Err(Error::InvalidInput("frequency grid is empty".into()));
    }
    if omegas.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidInput(
            "frequencies must be finite and nonnegative".into(),
        ));
    }
    if omegas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("frequencies must be ascending".into()));
    }
    let quarter_a3 = 0.25 * model.alpha.powi(3);
    let mut samples = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        let nu_w = nu(model.alpha, omega, model.sigma_star);
        let mut r = model.n0;
        let mut i = SymmetricTensor3::zero();
        for m in &model.modes {
            let b = beta(nu_w, m.lambda);
            r = r + m.weight.scale(quarter_a3 * b.re);
            i = i + m.weight.scale(quarter_a3 * b.im);
        }
        samples.push(MptSample::new(omega, r, i)?);
    }
    Ok(MptSignature {
        alpha: model.alpha,
        sigma_star: model.sigma_star,
        mu_r: model.mu_r,
        label: None,
        omega_limit: None,
        samples,
    })
}

/// Analytic infinite-frequency limit: R~ tends to N0 - (alpha^3/4) sum_n w_n
/// and I returns to zero.
pub fn high_freq_limit(model: &ModalModel) -> Result<(SymmetricTensor3, SymmetricTensor3)> {
    if model.modes.is_empty() {
        return Err(Error::InvalidModel("model has no spectral modes".into()));
    }
    let quarter_a3 = 0.25 * model.alpha.powi(3);
    let mut r = model.n0;
    for m in &model.modes {
        r = r - m.weight.scale(quarter_a3);
    }
    Ok((r, SymmetricTensor3::zero()))
}

/// Inputs bounding the frequency range where the eddy-current model holds.
#[derive(Debug, Clone, Copy)]
pub struct EddyLimitParams {
    /// Largest object diameter in m.
    pub diameter: f64,
    /// Smallest conductivity in the object, S/m.
    pub sigma_min: f64,
    /// Largest permeability in the object, H/m.
    pub mu_max: f64,
    /// Relative size at which neglected terms are no longer small.
    pub threshold: f64,
    /// Weight of the wave-propagation term.
    pub c1: f64,
    /// Weight of the charge-relaxation term.
    pub c2: f64,
}

const EPS0: f64 = 8.8541878128e-12;

impl EddyLimitParams {
    pub fn new(
        diameter: f64,
        sigma_min: f64,
        mu_max: f64,
        threshold: f64,
        c1: f64,
        c2: f64,
    ) -> Result<Self> {
        let pos = |v: f64, name: &str| -> Result<()> {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
            Ok(())
        };
        pos(diameter, "diameter")?;
        pos(sigma_min, "minimum conductivity")?;
        pos(mu_max, "maximum permeability")?;
        pos(c1, "wave term weight")?;
        pos(c2, "relaxation term weight")?;
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidInput(format!(
                "threshold must lie in (0, 1), got {threshold}"
            )));
        }
        Ok(Self { diameter, sigma_min, mu_max, threshold, c1, c2 })
    }
}

/// Upper angular frequency below which both neglected effects stay under
/// the threshold: the smaller of the wave-propagation and charge-relaxation
/// bounds.
pub fn eddy_limit(p: &EddyLimitParams) -> f64 {
    let wave = (p.threshold / (p.c1 * EPS0 * p.mu_max * p.diameter * p.diameter)).sqrt();
    let relax = p.threshold * p.sigma_min / (p.c2 * EPS0);
    wave.min(relax)
}

/// Interpolates a sampled signature onto new frequencies by reducing the
/// 12-channel sample matrix with an SVD, keeping singular values above
/// `tol` relative to the largest, and passing each retained coordinate
/// through a monotone cubic in log frequency.
///
/// Snapshot frequencies must be strictly ascending and positive; targets
/// must stay inside the snapshot range. Targets equal to a snapshot
/// frequency return that snapshot unchanged.
pub fn snapshot_interpolate(
    snapshots: &MptSignature,
    targets: &[f64],
    tol: f64,
) -> Result<MptSignature> {
    let n = snapshots.samples.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 snapshots, got {n}"
        )));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "truncation tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    let omegas = snapshots.omegas();
    if omegas.iter().any(|w| *w <= 0.0) {
        return Err(Error::InvalidInput(
            "snapshot frequencies must be positive for log-frequency interpolation".into(),
        ));
    }
    if omegas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "snapshot frequencies must be strictly ascending".into(),
        ));
    }
    let (w_min, w_max) = (omegas[0], omegas[n - 1]);
    for &t in targets {
        if !t.is_finite() || t < w_min || t > w_max {
            return Err(Error::Extrapolation(format!(
                "target {t} outside snapshot range [{w_min}, {w_max}]"
            )));
        }
    }

    // N x 12 sample matrix: R~ coefficients then I coefficients.
    let mut x = nalgebra::DMatrix::<f64>::zeros(n, 12);
    for (row, s) in snapshots.samples.iter().enumerate() {
        for (col, v) in s.r_tilde().coeffs().into_iter().enumerate() {
            x[(row, col)] = v;
        }
        for (col, v) in s.i_part().coeffs().into_iter().enumerate() {
            x[(row, col + 6)] = v;
        }
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested");
    let v_t = svd.v_t.as_ref().expect("requested");
    let s_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s >= tol * s_max && **s > 0.0)
        .count()
        .max(1);

    // Reduced coordinates c_j(omega_i) = (X v_j)_i = sigma_j u_j.
    let ln_omegas: Vec<f64> = omegas.iter().map(|w| w.ln()).collect();
    let mut curves = Vec::with_capacity(rank);
    for j in 0..rank {
        let col: Vec<f64> = (0..n).map(|i| u[(i, j)] * svd.singular_values[j]).collect();
        curves.push(MonotoneCubic::new(ln_omegas.clone(), col)?);
    }

    let mut samples = Vec::with_capacity(targets.len());
    for &t in targets {
        // Exact snapshot frequencies pass through unchanged.
        if let Ok(idx) = omegas.binary_search_by(|w| w.partial_cmp(&t).unwrap()) {
            samples.push(snapshots.samples[idx]);
            continue;
        }
        let lt = t.ln();
        let mut row = [0.0f64; 12];
        for (j, curve) in curves.iter().enumerate() {
            let c = curve.eval(lt)?;
            for (k, r) in row.iter_mut().enumerate() {
                *r += c * v_t[(j, k)];
            }
        }
        let r = SymmetricTensor3::from_coeffs(row[..6].try_into().unwrap());
        let i = SymmetricTensor3::from_coeffs(row[6..].try_into().unwrap());
        samples.push(MptSample::new(t, r, i)?);
    }
    Ok(MptSignature {
        alpha: snapshots.alpha,
        sigma_star: snapshots.sigma_star,
        mu_r: snapshots.mu_r,
        label: snapshots.label.clone(),
        omega_limit: snapshots.omega_limit,
        samples,
    })
}

/// Leave-one-out interior error of the snapshot interpolation: each interior
/// snapshot is predicted from the others and compared; returns the largest
/// coefficient error relative to the largest coefficient magnitude over all
/// snapshots.
pub fn leave_one_out_error(snapshots: &MptSignature, tol: f64) -> Result<f64> {
    let n = snapshots.samples.len();
    if n < 5 {
        return Err(Error::InvalidInput(format!(
            "need at least 5 snapshots for a leave-one-out estimate, got {n}"
        )));
    }
    let mut scale = 0.0f64;
    for s in &snapshots.samples {
        scale = scale.max(s.r_tilde().max_abs()).max(s.i_part().max_abs());
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    for leave in 1..n - 1 {
        let reduced = MptSignature {
            alpha: snapshots.alpha,
            sigma_star: snapshots.sigma_star,
            mu_r: snapshots.mu_r,
            label: None,
            omega_limit: None,
            samples: snapshots
                .samples
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != leave)
                .map(|(_, s)| *s)
                .collect(),
        };
        let target = snapshots.samples[leave].omega();
        let predicted = snapshot_interpolate(&reduced, &[target], tol)?;
        let p = &predicted.samples[0];
        let t = &snapshots.samples[leave];
        let dr = (*p.r_tilde() - *t.r_tilde()).max_abs();
        let di = (*p.i_part() - *t.i_part()).max_abs();
        worst = worst.max(dr.max(di) / scale);
    }
    Ok(worst)
}
