//! Ellipsoids, demagnetization factors and the equivalent-ellipsoid
//! inversion.
//!
//! The diagonal polarizability of an ellipsoid with semiaxes a >= b >= c at
//! contrast k has entries alpha^3 (k - 1) |E| / (1 - A_i + k A_i) where the
//! A_i are the demagnetization factors of the unit-scaled shape. Given three
//! eigenvalues of like sign, the inversion recovers |E| and the A_i in
//! closed form and then solves a 2x2 nonlinear system for the axis ratios.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quad::{adaptive_gauss_kronrod, gauss_legendre};
use crate::tensor::SymmetricTensor3;

/// Ellipsoid semiaxes, sorted so a >= b >= c > 0 on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    a: f64,
    b: f64,
    c: f64,
}

impl Ellipsoid {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let mut s = [a, b, c];
        if s.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "semiaxes must be finite and positive, got ({a}, {b}, {c})"
            )));
        }
        s.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Ok(Self { a: s[0], b: s[1], c: s[2] })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn semiaxes(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn volume(&self) -> f64 {
        4.0 * std::f64::consts::PI / 3.0 * self.a * self.b * self.c
    }

    /// Largest-to-smallest semiaxis ratio.
    pub fn aspect_ratio(&self) -> f64 {
        self.a / self.c
    }
}

/// Demagnetization factors of an ellipsoid, ordered with its axes:
/// a1 for the longest axis. For a >= b >= c they satisfy a1 <= a2 <= a3,
/// each lies in (0, 1), and they sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemagFactors {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Set when the aspect ratio exceeds 1e6 or a quadrature failed to
    /// reach its tolerance; values may carry fewer correct digits.
    pub accuracy_warning: bool,
}

impl DemagFactors {
    fn checked(a1: f64, a2: f64, a3: f64, accuracy_warning: bool) -> Result<Self> {
        let sum_defect = (a1 + a2 + a3 - 1.0).abs();
        let tol = if accuracy_warning { 1e-6 } else { 1e-9 };
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(open_unit(a1) && open_unit(a2) && open_unit(a3)) || sum_defect > tol {
            return Err(Error::Convergence {
                message: format!(
                    "demagnetization factors failed validation: ({a1}, {a2}, {a3})"
                ),
                residual: sum_defect,
            });
        }
        Ok(Self { a1, a2, a3, accuracy_warning })
    }
}

// Demagnetization factor of one axis from the ratios r1, r2 of the other
// two semiaxes to it: r1 r2 * int_0^1 s^2 / (sqrt(1-(1-r1^2)s^2)
// sqrt(1-(1-r2^2)s^2)) ds. Smooth on [0, 1] for any positive ratios.
// The grouping (1-s)(1+s) + r^2 s^2 avoids cancellation near s = 1.
fn demag_axis_integrand(s: f64, r1: f64, r2: f64) -> f64 {
    let q = (1.0 - s) * (1.0 + s);
    let p1 = q + r1 * r1 * s * s;
    let p2 = q + r2 * r2 * s * s;
    s * s / (p1.sqrt() * p2.sqrt())
}

fn demag_axis(r1: f64, r2: f64) -> Result<(f64, bool)> {
    let q = adaptive_gauss_kronrod(|s| demag_axis_integrand(s, r1, r2), 0.0, 1.0, 1e-12)?;
    Ok((r1 * r2 * q.value, q.converged))
}

// Per-axis factors for arbitrary positive semiaxes, no ordering assumed.
fn demag_all_axes(a: f64, b: f64, c: f64) -> Result<([f64; 3], bool)> {
    let (a1, c1) = demag_axis(b / a, c / a)?;
    let (a2, c2) = demag_axis(a / b, c / b)?;
    let (a3, c3) = demag_axis(a / c, b / c)?;
    Ok(([a1, a2, a3], c1 && c2 && c3))
}

/// Demagnetization factors by adaptive quadrature of the axis integrals.
pub fn demag_factors(e: &Ellipsoid) -> Result<DemagFactors> {
    let ([a1, a2, a3], converged) = demag_all_axes(e.a, e.b, e.c)?;
    let warn = e.aspect_ratio() > 1e6 || !converged;
    DemagFactors::checked(a1, a2, a3, warn)
}

// Carlson's degenerate elliptic integral R_D by the duplication theorem.
fn carlson_rd(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    let mut sum = 0.0;
    let mut fac = 1.0;
    let (ave, dx, dy, dz) = loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + lam));
        fac *= 0.25;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        let ave = 0.2 * (x + y + 3.0 * z);
        let dx = (ave - x) / ave;
        let dy = (ave - y) / ave;
        let dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 1e-4 {
            break (ave, dx, dy, dz);
        }
    };
    let ea = dx * dy;
    let eb = dz * dz;
    let ec = ea - eb;
    let ed = ea - 6.0 * eb;
    let ee = ed + ec + ec;
    let (c1, c2, c3, c4) = (3.0 / 14.0, 1.0 / 6.0, 9.0 / 22.0, 3.0 / 26.0);
    let (c5, c6) = (0.25 * c3, 1.5 * c4);
    3.0 * sum
        + fac
            * (1.0 + ed * (-c1 + c5 * ed - c6 * dz * ee)
                + dz * (c2 * ee + dz * (-c3 * ec + dz * c4 * ea)))
            / (ave * ave.sqrt())
}

/// Demagnetization factors through Carlson symmetric integrals; independent
/// of the quadrature route and used to cross-check it.
pub fn demag_factors_carlson(e: &Ellipsoid) -> Result<DemagFactors> {
    let (beta, gamma) = (e.b / e.a, e.c / e.a);
    let scale = beta * gamma / 3.0;
    // Own squared axis goes in the third slot of R_D.
    let a1 = scale * carlson_rd(beta * beta, gamma * gamma, 1.0);
    let a2 = scale * carlson_rd(gamma * gamma, 1.0, beta * beta);
    let a3 = scale * carlson_rd(1.0, beta * beta, gamma * gamma);
    DemagFactors::checked(a1, a2, a3, e.aspect_ratio() > 1e6)
}

/// Contrast parameter of the polarizability: finite, nonnegative and not 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contrast {
    k: f64,
}

impl Contrast {
    pub fn new(k: f64) -> Result<Self> {
        if !k.is_finite() || k < 0.0 {
            return Err(Error::InvalidInput(format!(
                "contrast must be finite and nonnegative, got {k}"
            )));
        }
        if k == 1.0 {
            return Err(Error::DegenerateContrast(
                "contrast 1 gives an identically zero tensor".into(),
            ));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Diagonal polarizability tensor of the scaled ellipsoid alpha E at
/// contrast k, in the frame of the semiaxes (entry 1 along axis a).
///
/// Entries come out sorted descending because the demagnetization factors
/// ascend as the axes shorten.
pub fn polya_szego(alpha: f64, e: &Ellipsoid, contrast: &Contrast) -> Result<SymmetricTensor3> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "size parameter must be finite and positive, got {alpha}"
        )));
    }
    let k = contrast.k();
    if k == 1.0 {
        return Err(Error::DegenerateContrast(
            "contrast 1 gives an identically zero tensor".into(),
        ));
    }
    let d = demag_factors(e)?;
    let vol = e.volume();
    let entry = |a_i: f64| alpha.powi(3) * (k - 1.0) * vol / (1.0 - a_i + k * a_i);
    Ok(SymmetricTensor3::diagonal(entry(d.a1), entry(d.a2), entry(d.a3)))
}

/// Result of the root-finding equivalent-ellipsoid construction.
#[derive(Debug, Clone, Copy)]
pub struct EquivalentEllipsoid {
    pub ellipsoid: Ellipsoid,
    pub demag: DemagFactors,
    /// Recovered unit-scale volume |E|.
    pub volume: f64,
    /// Final sup-norm of the log axis-ratio residuals.
    pub residual: f64,
    pub iterations: usize,
}

// Init table mapping axis ratios to demag-factor ratios, built once.
// Rows: (ln(A2/A1), ln(A3/A1), ln beta, ln gamma) on a 64x64 grid of
// (beta, gamma * beta) with low-order fixed quadrature; init accuracy only.
fn ratio_lut() -> &'static Vec<[f64; 4]> {
    static LUT: OnceLock<Vec<[f64; 4]>> = OnceLock::new();
    LUT.get_or_init(|| {
        let (nodes, weights) = gauss_legendre(12).expect("fixed order is valid");
        let fixed_demag = |r1: f64, r2: f64| -> f64 {
            let mut acc = 0.0;
            for (&x, &w) in nodes.iter().zip(&weights) {
                let s = 0.5 * (x + 1.0);
                acc += w * demag_axis_integrand(s, r1, r2);
            }
            r1 * r2 * 0.5 * acc
        };
        let n = 64;
        let mut lut = Vec::with_capacity(n * n);
        for i in 1..=n {
            let beta = i as f64 / n as f64;
            for j in 1..=n {
                let gamma = beta * j as f64 / n as f64;
                let a1 = fixed_demag(beta, gamma);
                let a2 = fixed_demag(1.0 / beta, gamma / beta);
                let a3 = fixed_demag(1.0 / gamma, beta / gamma);
                lut.push([(a2 / a1).ln(), (a3 / a1).ln(), beta.ln(), gamma.ln()]);
            }
        }
        lut
    })
}

// Log demag-factor ratios for log axis ratios u = (ln beta, ln gamma).
fn log_ratio_map(u: [f64; 2]) -> Result<[f64; 2]> {
    let (beta, gamma) = (u[0].exp(), u[1].exp());
    let ([a1, a2, a3], _) = demag_all_axes(1.0, beta, gamma)?;
    Ok([(a2 / a1).ln(), (a3 / a1).ln()])
}

/// Recovers the ellipsoid whose diagonal polarizability at size alpha and
/// the given contrast has the supplied eigenvalues.
///
/// Eigenvalues are sorted descending internally; the largest pairs with the
/// longest axis. The unit-scale volume and demagnetization factors follow
/// in closed form; the two axis ratios come from a damped Newton iteration
/// on the log ratio map, seeded from a precomputed table.
pub fn equivalent_ellipsoid(
    eigenvalues: &[f64; 3],
    alpha: f64,
    contrast: &Contrast,
) -> Result<EquivalentEllipsoid> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "size parameter must be finite and positive, got {alpha}"
        )));
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("eigenvalues must be finite".into()));
    }
    let k = contrast.k();
    let sign = if k > 1.0 { 1.0 } else { -1.0 };
    if eigenvalues.iter().any(|v| v * sign <= 0.0) {
        return Err(Error::NotRealizable(format!(
            "eigenvalues must all have the sign of k - 1; got {eigenvalues:?} at contrast {k}"
        )));
    }
    let mut lam = *eigenvalues;
    lam.sort_by(|x, y| y.partial_cmp(x).unwrap());

    // Closed-form volume and demag factors.
    let a3 = alpha.powi(3);
    let l_sum: f64 = lam.iter().map(|v| 1.0 / v).sum();
    let volume = (1.0 + 3.0 / (k - 1.0)) / (a3 * l_sum);
    if !volume.is_finite() || volume <= 0.0 {
        return Err(Error::NotRealizable(format!(
            "recovered volume {volume} is not positive"
        )));
    }
    let af: Vec<f64> = lam.iter().map(|v| a3 * volume / v - 1.0 / (k - 1.0)).collect();
    let sum_defect = (af.iter().sum::<f64>() - 1.0).abs();
    if af.iter().any(|v| *v <= 0.0 || *v >= 1.0) || sum_defect > 1e-6 {
        return Err(Error::NotRealizable(format!(
            "recovered factors ({:.6}, {:.6}, {:.6}) are not demagnetization factors",
            af[0], af[1], af[2]
        )));
    }

    // Axis ratios from the two independent factor ratios.
    let target = [(af[1] / af[0]).ln(), (af[2] / af[0]).ln()];
    let mut u = best_lut_start(target);
    let mut g = sub2(log_ratio_map(u)?, target);
    let mut iterations = 0;
    for it in 0..80 {
        iterations = it + 1;
        let residual = g[0].abs().max(g[1].abs());
        if residual <= 1e-12 {
            break;
        }
        // Forward-difference Jacobian in the two log ratios.
        let h = 1e-7;
        let gx = sub2(log_ratio_map([u[0] + h, u[1]])?, target);
        let gy = sub2(log_ratio_map([u[0], u[1] + h])?, target);
        let j = [
            [(gx[0] - g[0]) / h, (gy[0] - g[0]) / h],
            [(gx[1] - g[1]) / h, (gy[1] - g[1]) / h],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::Convergence {
                message: "singular Jacobian in axis-ratio iteration".into(),
                residual,
            });
        }
        let mut step = [
            -(j[1][1] * g[0] - j[0][1] * g[1]) / det,
            -(j[0][0] * g[1] - j[1][0] * g[0]) / det,
        ];
        // Cap the step; axis ratios move at most a factor e^0.5 per try.
        let cap = step[0].abs().max(step[1].abs());
        if cap > 0.5 {
            step[0] *= 0.5 / cap;
            step[1] *= 0.5 / cap;
        }
        // Backtrack until the residual drops.
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..10 {
            let trial = clamp_ratios([u[0] + scale * step[0], u[1] + scale * step[1]]);
            let gt = sub2(log_ratio_map(trial)?, target);
            if gt[0].abs().max(gt[1].abs()) < residual {
                u = trial;
                g = gt;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let residual = g[0].abs().max(g[1].abs());
    if residual > 1e-9 {
        return Err(Error::Convergence {
            message: "axis-ratio iteration stalled".into(),
            residual,
        });
    }

    let (beta, gamma) = (u[0].exp(), u[1].exp());
    let a = (3.0 * volume / (4.0 * std::f64::consts::PI * beta * gamma)).powf(1.0 / 3.0);
    let ellipsoid = Ellipsoid::new(a, a * beta, a * gamma)?;
    let demag = demag_factors(&ellipsoid)?;
    Ok(EquivalentEllipsoid { ellipsoid, demag, volume, residual, iterations })
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn clamp_ratios(u: [f64; 2]) -> [f64; 2] {
    // beta, gamma in (1e-8, 1] and gamma <= beta.
    let lo = (1e-8f64).ln();
    let b = u[0].clamp(lo, 0.0);
    let g = u[1].clamp(lo, 0.0).min(b);
    [b, g]
}

fn best_lut_start(target: [f64; 2]) -> [f64; 2] {
    let mut best = [0.0, 0.0];
    let mut best_d = f64::INFINITY;
    for row in ratio_lut() {
        let d = (row[0] - target[0]).powi(2) + (row[1] - target[1]).powi(2);
        if d < best_d {
            best_d = d;
            best = [row[2], row[3]];
        }
    }
    best
}

/// Result of the minimisation-based construction.
#[derive(Debug, Clone, Copy)]
pub struct MinimisedEllipsoid {
    pub ellipsoid: Ellipsoid,
    /// Final sum of squared entry mismatches.
    pub objective: f64,
    pub iterations: usize,
}

/// Equivalent ellipsoid by direct least squares on the semiaxes: minimizes
/// the sum of squared differences between the supplied eigenvalues (sorted
/// descending) and the diagonal entries of the candidate's polarizability,
/// over log semiaxes, by Levenberg-Marquardt.
pub fn equivalent_ellipsoid_minimisation(
    eigenvalues: &[f64; 3],
    alpha: f64,
    contrast: &Contrast,
    start: Option<&Ellipsoid>,
) -> Result<MinimisedEllipsoid> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "size parameter must be finite and positive, got {alpha}"
        )));
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("eigenvalues must be finite".into()));
    }
    let k = contrast.k();
    let sign = if k > 1.0 { 1.0 } else { -1.0 };
    if eigenvalues.iter().any(|v| v * sign <= 0.0) {
        return Err(Error::NotRealizable(format!(
            "eigenvalues must all have the sign of k - 1; got {eigenvalues:?} at contrast {k}"
        )));
    }
    let mut lam = *eigenvalues;
    lam.sort_by(|x, y| y.partial_cmp(x).unwrap());

    // Per-axis entries without ordering assumptions, smooth in u.
    let a3 = alpha.powi(3);
    let entries = |u: [f64; 3]| -> Result<[f64; 3]> {
        let (a, b, c) = (u[0].exp(), u[1].exp(), u[2].exp());
        let ([f1, f2, f3], _) = demag_all_axes(a, b, c)?;
        let vol = 4.0 * std::f64::consts::PI / 3.0 * a * b * c;
        let e = |f: f64| a3 * (k - 1.0) * vol / (1.0 - f + k * f);
        Ok([e(f1), e(f2), e(f3)])
    };
    let resid = |u: [f64; 3]| -> Result<[f64; 3]> {
        let t = entries(u)?;
        Ok([lam[0] - t[0], lam[1] - t[1], lam[2] - t[2]])
    };
    let objective = |r: &[f64; 3]| r.iter().map(|v| v * v).sum::<f64>();

    let mut u = match start {
        Some(e) => [e.a().ln(), e.b().ln(), e.c().ln()],
        None => {
            // Sphere of the volume implied by the closed-form recovery.
            let l_sum: f64 = lam.iter().map(|v| 1.0 / v).sum();
            let vol = (1.0 + 3.0 / (k - 1.0)) / (a3 * l_sum);
            if !vol.is_finite() || vol <= 0.0 {
                return Err(Error::NotRealizable(format!(
                    "recovered volume {vol} is not positive"
                )));
            }
            let r = (3.0 * vol / (4.0 * std::f64::consts::PI)).powf(1.0 / 3.0);
            [r.ln(), r.ln(), r.ln()]
        }
    };
    let mut r = resid(u)?;
    let mut obj = objective(&r);
    let scale = lam.iter().map(|v| v * v).sum::<f64>();
    let mut mu = 1e-3;
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        if obj <= 1e-28 * scale {
            break;
        }
        // Forward-difference Jacobian d r / d u.
        let h = 1e-6;
        let mut jac = [[0.0; 3]; 3];
        for c in 0..3 {
            let mut up = u;
            up[c] += h;
            let rp = resid(up)?;
            for row in 0..3 {
                jac[row][c] = (rp[row] - r[row]) / h;
            }
        }
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                jtj[i][j] = (0..3).map(|row| jac[row][i] * jac[row][j]).sum();
            }
            jtr[i] = (0..3).map(|row| jac[row][i] * r[row]).sum();
        }
        let mut damped = jtj;
        for i in 0..3 {
            damped[i][i] += mu * jtj[i][i].max(1e-300);
        }
        let step = match solve3(&damped, &[-jtr[0], -jtr[1], -jtr[2]]) {
            Some(s) => s,
            None => {
                mu *= 10.0;
                continue;
            }
        };
        let trial = [u[0] + step[0], u[1] + step[1], u[2] + step[2]];
        let rt = resid(trial)?;
        let ot = objective(&rt);
        if ot < obj {
            u = trial;
            r = rt;
            obj = ot;
            mu = (mu * 0.3).max(1e-12);
            if step.iter().all(|s| s.abs() < 1e-13) {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    if obj > 1e-12 * scale {
        return Err(Error::Convergence {
            message: "entry minimisation stalled above tolerance".into(),
            residual: obj.sqrt(),
        });
    }
    let ellipsoid = Ellipsoid::new(u[0].exp(), u[1].exp(), u[2].exp())?;
    Ok(MinimisedEllipsoid { ellipsoid, objective: obj, iterations })
}

fn solve3(m: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    // Gaussian elimination with partial pivoting.
    let mut a = [[0.0f64; 4]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&m[i]);
        a[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        let pivot_row = a[col];
        for row in a.iter_mut().skip(col + 1) {
            let f = row[col] / pivot_row[col];
            for (dst, src) in row.iter_mut().zip(pivot_row).skip(col) {
                *dst -= f * src;
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = a[row][3];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}
