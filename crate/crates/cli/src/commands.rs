//! Command implementations: each reads its inputs, runs the library and
//! writes CSV or JSON through the io module.

use std::path::Path;

use serde::Serialize;

use mptsig::ellipsoid::{equivalent_ellipsoid, equivalent_ellipsoid_minimisation, Contrast};
use mptsig::error::Error;
use mptsig::features::{
    build_dataset_named, features_from_signature, holdout_split, knn_classify, knn_predict,
};
use mptsig::measure::{assemble_system, add_noise, forward_voltages, recover_mpt};
use mptsig::spectral::{snapshot_interpolate, synthesize, MptSignature};
use mptsig::tensor::{
    alternative_invariants, commutator, commutator_invariant, eig_sym3, principal_invariants,
    MptSample, SymmetricTensor3,
};

use crate::io::{self, CliError, CliResult, ConfigDto, InvariantsTable, TensorDto};

// Deterministic order-preserving parallel map over 0..n.
fn parallel_map<T: Send, F: Fn(usize) -> T + Sync>(n: usize, threads: usize, f: F) -> Vec<T> {
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(threads);
    let mut pieces: Vec<Vec<T>> = Vec::new();
    std::thread::scope(|s| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let lo = (t * chunk).min(n);
            let hi = ((t + 1) * chunk).min(n);
            let f = &f;
            handles.push(s.spawn(move || (lo..hi).map(f).collect::<Vec<T>>()));
        }
        for h in handles {
            pieces.push(h.join().expect("worker thread panicked"));
        }
    });
    pieces.into_iter().flatten().collect()
}

fn emit_report<T: Serialize>(report: &T, out: Option<&Path>) -> CliResult<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
    println!("{json}");
    if let Some(path) = out {
        io::write_atomic(path, &format!("{json}\n"))?;
    }
    Ok(())
}

/// Frequency grid for synthesis. Log spacing is the default; a zero lower
/// bound under log spacing yields omega = 0 followed by decade steps up to
/// the maximum.
pub fn frequency_grid(
    omega_min: f64,
    omega_max: f64,
    num: usize,
    linear: bool,
) -> CliResult<Vec<f64>> {
    if !(omega_min.is_finite() && omega_max.is_finite()) || omega_min < 0.0 {
        return Err(CliError::Lib(Error::InvalidInput(format!(
            "frequency bounds must be finite and nonnegative, got [{omega_min}, {omega_max}]"
        ))));
    }
    if omega_max < omega_min {
        return Err(CliError::Lib(Error::InvalidInput(format!(
            "omega-max {omega_max} is below omega-min {omega_min}"
        ))));
    }
    if num == 0 {
        return Err(CliError::Lib(Error::InvalidInput("grid needs at least one point".into())));
    }
    if num == 1 {
        if omega_min != omega_max {
            return Err(CliError::Lib(Error::InvalidInput(
                "a single-point grid needs omega-min equal to omega-max".into(),
            )));
        }
        return Ok(vec![omega_min]);
    }
    if omega_min == omega_max {
        return Err(CliError::Lib(Error::InvalidInput(
            "equal bounds admit only --num 1".into(),
        )));
    }
    let mut grid = Vec::with_capacity(num);
    if linear {
        let step = (omega_max - omega_min) / (num - 1) as f64;
        for i in 0..num {
            grid.push(omega_min + step * i as f64);
        }
    } else if omega_min > 0.0 {
        let (lo, hi) = (omega_min.ln(), omega_max.ln());
        for i in 0..num {
            let s = i as f64 / (num - 1) as f64;
            grid.push((lo + s * (hi - lo)).exp());
        }
    } else {
        grid.push(0.0);
        for j in 0..num - 1 {
            grid.push(omega_max * 10f64.powi(j as i32 + 2 - num as i32));
        }
    }
    grid[0] = omega_min;
    *grid.last_mut().unwrap() = omega_max;
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Lib(Error::InvalidInput(
            "grid is not strictly ascending; reduce --num or raise omega-min".into(),
        )));
    }
    Ok(grid)
}

pub fn cmd_synth(
    model_path: &Path,
    out: &Path,
    omega_min: f64,
    omega_max: f64,
    num: usize,
    linear: bool,
    threads: usize,
) -> CliResult<()> {
    let dto = io::read_model(model_path)?;
    let model = dto.to_model()?;
    let grid = frequency_grid(omega_min, omega_max, num, linear)?;
    let chunk = grid.len().div_ceil(threads.max(1));
    let chunks: Vec<&[f64]> = grid.chunks(chunk).collect();
    let parts = parallel_map(chunks.len(), threads, |i| synthesize(&model, chunks[i]));
    let mut samples = Vec::with_capacity(grid.len());
    let mut alpha_sigma_mu = None;
    for part in parts {
        let sig = part?;
        alpha_sigma_mu = Some((sig.alpha, sig.sigma_star, sig.mu_r));
        samples.extend(sig.samples);
    }
    let (alpha, sigma_star, mu_r) = alpha_sigma_mu.expect("grid is nonempty");
    let sig = MptSignature {
        alpha,
        sigma_star,
        mu_r,
        label: dto.label.clone(),
        omega_limit: dto.omega_limit()?,
        samples,
    };
    io::write_signature(out, &sig)?;
    eprintln!("wrote {} rows to {}", sig.samples.len(), out.display());
    Ok(())
}

fn part_columns(set: &str, part: &str) -> Vec<String> {
    let quantities: &[&str] = match set {
        "eig" => &["l1", "l2", "l3"],
        "principal" => &["i1", "i2", "i3"],
        "alternative" => &["i1", "j2", "j3"],
        _ => unreachable!("validated set"),
    };
    quantities.iter().map(|q| format!("{part}_{q}")).collect()
}

fn invariant_values(set: &str, t: &SymmetricTensor3) -> CliResult<[f64; 3]> {
    Ok(match set {
        "eig" => eig_sym3(t).map(|d| d.eigenvalues)?,
        "principal" => {
            let v = principal_invariants(t);
            [v.i1, v.i2, v.i3]
        }
        "alternative" => {
            let v = alternative_invariants(t);
            [v.i1, v.i2, v.i3]
        }
        _ => unreachable!("validated set"),
    })
}

pub fn cmd_invariants(signature_path: &Path, set: &str, out: &Path) -> CliResult<()> {
    let sig = io::read_signature(signature_path)?;
    let table = match set {
        "commutator" => {
            let mut rows = Vec::with_capacity(sig.samples.len());
            for s in &sig.samples {
                let z = commutator(s.r_tilde(), s.i_part());
                rows.push(vec![s.omega(), commutator_invariant(&z)?]);
            }
            InvariantsTable { set: set.into(), columns: vec!["z".into()], rows }
        }
        "eig" | "principal" | "alternative" => {
            let mut columns = part_columns(set, "re");
            columns.extend(part_columns(set, "im"));
            let mut rows = Vec::with_capacity(sig.samples.len());
            for s in &sig.samples {
                let re = invariant_values(set, s.r_tilde())?;
                let im = invariant_values(set, s.i_part())?;
                let mut row = vec![s.omega()];
                row.extend_from_slice(&re);
                row.extend_from_slice(&im);
                rows.push(row);
            }
            InvariantsTable { set: set.into(), columns, rows }
        }
        _ => {
            return Err(CliError::Parse(format!(
                "unknown invariant set {set:?}; expected eig, principal, alternative or commutator"
            )))
        }
    };
    io::write_atomic(out, &io::invariants_to_csv(&table))?;
    eprintln!("wrote {} rows to {}", table.rows.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct EllipsoidReport {
    a: f64,
    b: f64,
    c: f64,
    volume: f64,
    a1: f64,
    a2: f64,
    a3: f64,
    accuracy_warning: bool,
    residual: f64,
    iterations: usize,
}

#[derive(Serialize)]
struct MinimisationReport {
    a: f64,
    b: f64,
    c: f64,
    objective: f64,
    iterations: usize,
}

#[derive(Serialize)]
struct EquivReport {
    contrast: f64,
    alpha: f64,
    eigenvalues_sorted: [f64; 3],
    root_finding: EllipsoidReport,
    minimisation: MinimisationReport,
    /// Largest relative semiaxis difference between the two routes.
    max_radius_discrepancy: f64,
}

pub fn cmd_equiv_ellipsoid(
    eigs: &[f64; 3],
    alpha: f64,
    contrast_k: f64,
    out: Option<&Path>,
) -> CliResult<()> {
    let contrast = Contrast::new(contrast_k)?;
    let root = equivalent_ellipsoid(eigs, alpha, &contrast)?;
    let min = equivalent_ellipsoid_minimisation(eigs, alpha, &contrast, None)?;
    let mut lam = *eigs;
    lam.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let ra = root.ellipsoid.semiaxes();
    let ma = min.ellipsoid.semiaxes();
    let discrepancy = ra
        .iter()
        .zip(&ma)
        .map(|(r, m)| (r - m).abs() / r.abs())
        .fold(0.0f64, f64::max);
    let report = EquivReport {
        contrast: contrast_k,
        alpha,
        eigenvalues_sorted: lam,
        root_finding: EllipsoidReport {
            a: ra[0],
            b: ra[1],
            c: ra[2],
            volume: root.volume,
            a1: root.demag.a1,
            a2: root.demag.a2,
            a3: root.demag.a3,
            accuracy_warning: root.demag.accuracy_warning,
            residual: root.residual,
            iterations: root.iterations,
        },
        minimisation: MinimisationReport {
            a: ma[0],
            b: ma[1],
            c: ma[2],
            objective: min.objective,
            iterations: min.iterations,
        },
        max_radius_discrepancy: discrepancy,
    };
    emit_report(&report, out)
}

#[derive(Serialize)]
struct NoiseReport {
    level: f64,
    trials: usize,
    seed: u64,
    mean_relative_error: f64,
    std_relative_error: f64,
    min_relative_error: f64,
    max_relative_error: f64,
}

#[derive(Serialize)]
struct RoundtripReport {
    omega_rad_per_s: f64,
    interpolated: bool,
    rows: usize,
    rank: usize,
    condition_number: f64,
    singular_values: Vec<f64>,
    true_re: TensorDto,
    true_im: TensorDto,
    recovered_re: TensorDto,
    recovered_im: TensorDto,
    /// Combined Frobenius relative error of the noiseless recovery.
    relative_error: f64,
    least_squares_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseReport>,
}

fn combined_relative_error(
    rec_r: &SymmetricTensor3,
    rec_i: &SymmetricTensor3,
    true_r: &SymmetricTensor3,
    true_i: &SymmetricTensor3,
) -> f64 {
    let dr = (*rec_r - *true_r).frobenius_norm();
    let di = (*rec_i - *true_i).frobenius_norm();
    let scale = (true_r.frobenius_norm().powi(2) + true_i.frobenius_norm().powi(2)).sqrt();
    let err = (dr * dr + di * di).sqrt();
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

fn sample_at_omega(sig: &MptSignature, omega: f64, tol: f64) -> CliResult<(MptSample, bool)> {
    if let Some(s) = sig.samples.iter().find(|s| s.omega() == omega) {
        return Ok((*s, false));
    }
    // Interpolation needs positive snapshot frequencies; a static row only
    // matters when it is the target itself, which the exact match covers.
    let positive: Vec<MptSample> =
        sig.samples.iter().filter(|s| s.omega() > 0.0).copied().collect();
    let snapshots = MptSignature {
        alpha: sig.alpha,
        sigma_star: sig.sigma_star,
        mu_r: sig.mu_r,
        label: None,
        omega_limit: None,
        samples: positive,
    };
    let interp = snapshot_interpolate(&snapshots, &[omega], tol)?;
    Ok((interp.samples[0], true))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_measure_roundtrip(
    layout_path: &Path,
    signature_path: &Path,
    omega: f64,
    tol: f64,
    noise: f64,
    trials: usize,
    seed: u64,
    threads: usize,
    out: Option<&Path>,
) -> CliResult<()> {
    if trials == 0 {
        return Err(CliError::Lib(Error::InvalidInput(
            "at least one trial is needed".into(),
        )));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(CliError::Lib(Error::InvalidInput(format!(
            "noise level must be finite and nonnegative, got {noise}"
        ))));
    }
    let layout = io::read_layout(layout_path)?.to_layout()?;
    let sig = io::read_signature(signature_path)?;
    let (sample, interpolated) = sample_at_omega(&sig, omega, tol)?;
    let (true_r, true_i) = (*sample.r_tilde(), *sample.i_part());

    let system = assemble_system(&layout)?;
    let clean = forward_voltages(&layout, &true_r, &true_i, omega)?;
    let recovery = recover_mpt(&system, &clean)?;
    let base_err = combined_relative_error(
        &recovery.r_tilde,
        &recovery.i_part,
        &true_r,
        &true_i,
    );

    let noise_report = if noise > 0.0 {
        let errors: Vec<CliResult<f64>> = parallel_map(trials, threads, |t| {
            let (nr, ni) = add_noise(&true_r, &true_i, noise, seed.wrapping_add(t as u64));
            let v = forward_voltages(&layout, &nr, &ni, omega)?;
            let rec = recover_mpt(&system, &v)?;
            Ok(combined_relative_error(&rec.r_tilde, &rec.i_part, &true_r, &true_i))
        });
        let errors = errors.into_iter().collect::<CliResult<Vec<f64>>>()?;
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        Some(NoiseReport {
            level: noise,
            trials,
            seed,
            mean_relative_error: mean,
            std_relative_error: var.sqrt(),
            min_relative_error: errors.iter().cloned().fold(f64::INFINITY, f64::min),
            max_relative_error: errors.iter().cloned().fold(0.0, f64::max),
        })
    } else {
        None
    };

    let report = RoundtripReport {
        omega_rad_per_s: omega,
        interpolated,
        rows: system.a.nrows(),
        rank: system.rank,
        condition_number: system.condition_number,
        singular_values: system.singular_values.clone(),
        true_re: true_r.into(),
        true_im: true_i.into(),
        recovered_re: recovery.r_tilde.into(),
        recovered_im: recovery.i_part.into(),
        relative_error: base_err,
        least_squares_residual: recovery.residual,
        noise: noise_report,
    };
    emit_report(&report, out)
}

// Shared between dataset and classify: build the labeled dataset a config
// describes.
fn dataset_from_config(
    config: &ConfigDto,
    config_dir: &Path,
    seed: u64,
) -> CliResult<(mptsig::features::LabeledDataset, Vec<f64>)> {
    let objects = io::resolve_objects(config, config_dir)?;
    let grid = frequency_grid(
        config.grid.omega_min_rad_per_s,
        config.grid.omega_max_rad_per_s,
        config.grid.num,
        match config.grid.spacing.as_str() {
            "linear" => true,
            "log" => false,
            other => {
                return Err(CliError::Parse(format!(
                    "unknown spacing {other:?}; expected log or linear"
                )))
            }
        },
    )?;
    let variant = io::parse_variant(&config.features.variant)?;
    let dataset = build_dataset_named(
        &objects,
        Some(&config.classes),
        &grid,
        variant,
        config.features.with_commutator,
        config.noise.level,
        config.noise.replicates,
        seed,
    )?;
    Ok((dataset, grid))
}

pub fn cmd_dataset(config_path: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let config = io::read_config(config_path)?;
    let config_dir = config_path.parent().unwrap_or(Path::new("."));
    let seed = seed.unwrap_or(config.seed);
    let (dataset, grid) = dataset_from_config(&config, config_dir, seed)?;
    let meta = io::DatasetMetaDto {
        variant: config.features.variant.clone(),
        with_commutator: config.features.with_commutator,
        num_frequencies: grid.len(),
        omegas_rad_per_s: grid,
        class_names: dataset.class_names().to_vec(),
        noise_level: config.noise.level,
        replicates: config.noise.replicates,
        seed,
        feature_names: dataset.layout().feature_names(),
    };
    io::write_dataset(out, &dataset, &meta)?;
    eprintln!(
        "wrote {} rows ({} features, {} classes) to {}",
        dataset.pairs().len(),
        dataset.layout().len(),
        dataset.class_names().len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct QueryReport {
    file: String,
    probabilities: Vec<f64>,
    predicted_class: usize,
    predicted_class_name: String,
}

#[derive(Serialize)]
struct ClassifyReport {
    class_names: Vec<String>,
    dataset_rows: usize,
    k: usize,
    zscore: bool,
    holdout_fraction: f64,
    resamples: usize,
    seed: u64,
    overall_accuracy: f64,
    per_class_accuracy: Vec<f64>,
    /// Rows are true classes, columns predicted, summed over resamples.
    confusion_matrix: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    query: Option<QueryReport>,
}

pub fn cmd_classify(
    config_path: &Path,
    dataset_path: Option<&Path>,
    query_path: Option<&Path>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> CliResult<()> {
    let config = io::read_config(config_path)?;
    let config_dir = config_path.parent().unwrap_or(Path::new("."));
    let dataset = match dataset_path {
        Some(p) => io::read_dataset(p)?.0,
        None => dataset_from_config(&config, config_dir, config.seed)?.0,
    };
    let eval = config.evaluation.unwrap_or_default();
    let seed = seed.unwrap_or(eval.seed);
    let kc = dataset.class_names().len();

    let mut confusion = vec![vec![0usize; kc]; kc];
    for r in 0..eval.resamples {
        let (train, held) = holdout_split(&dataset, eval.holdout_fraction, seed.wrapping_add(r as u64))?;
        for (x, t) in held.pairs() {
            let truth = t
                .values()
                .iter()
                .position(|v| *v == 1.0)
                .expect("target rows carry one marker");
            let pred = knn_predict(&train, x, eval.k, eval.zscore)?;
            confusion[truth][pred] += 1;
        }
    }
    let total: usize = confusion.iter().map(|row| row.iter().sum::<usize>()).sum();
    let correct: usize = (0..kc).map(|c| confusion[c][c]).sum();
    let per_class: Vec<f64> = (0..kc)
        .map(|c| {
            let row: usize = confusion[c].iter().sum();
            if row > 0 {
                confusion[c][c] as f64 / row as f64
            } else {
                f64::NAN
            }
        })
        .collect();

    let query = match query_path {
        None => None,
        Some(p) => {
            let sig = io::read_signature(p)?;
            let variant = io::parse_variant(&config.features.variant)?;
            let x = features_from_signature(&sig, variant, config.features.with_commutator)?;
            let probabilities = knn_classify(&dataset, &x, eval.k, eval.zscore)?;
            let predicted = knn_predict(&dataset, &x, eval.k, eval.zscore)?;
            Some(QueryReport {
                file: p.display().to_string(),
                probabilities,
                predicted_class: predicted,
                predicted_class_name: dataset.class_names()[predicted].clone(),
            })
        }
    };

    let report = ClassifyReport {
        class_names: dataset.class_names().to_vec(),
        dataset_rows: dataset.pairs().len(),
        k: eval.k,
        zscore: eval.zscore,
        holdout_fraction: eval.holdout_fraction,
        resamples: eval.resamples,
        seed,
        overall_accuracy: if total > 0 { correct as f64 / total as f64 } else { f64::NAN },
        per_class_accuracy: per_class,
        confusion_matrix: confusion,
        query,
    };
    emit_report(&report, out)
}
