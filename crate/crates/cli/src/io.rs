//! File formats: JSON schemas for models, layouts and configs, CSV formats
//! for signatures, invariants and datasets, and atomic writing.
//!
//! All numeric text uses 17-significant-digit scientific notation so every
//! emitted file parses back to bit-identical values.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use mptsig::error::Error;
use mptsig::features::{FeatureLayout, FeatureVariant, FeatureVector, LabeledDataset, one_of_k};
use mptsig::measure::{CoilLayout, ReceiverCoil};
use mptsig::spectral::{EddyLimitParams, ModalModel, Mode, MptSignature};
use mptsig::tensor::{MptSample, SymmetricTensor3};

/// CLI-level error: library errors plus file and parse problems.
#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Io(String),
    Parse(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Exit code contract: 0 success, 2 input or parse error, 3 mathematical
/// infeasibility, 4 numerical non-convergence.
pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Io(_) | CliError::Parse(_) => 2,
        CliError::Lib(err) => match err {
            Error::InvalidInput(_) | Error::InvalidModel(_) => 2,
            Error::Convergence { .. } => 4,
            _ => 3,
        },
    }
}

/// 17 significant digits in scientific notation; round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, what: &str) -> CliResult<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Parse(format!("{what}: cannot parse number from {s:?}")))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, content: &str) -> CliResult<()> {
    let tmp = PathBuf::from(format!("{}.tmp{}", path.display(), std::process::id()));
    fs::write(&tmp, content)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::Io(format!("renaming to {}: {e}", path.display()))
    })
}

pub fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// JSON schemas
// ---------------------------------------------------------------------------

/// Symmetric tensor coefficients in canonical order.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TensorDto {
    pub c11: f64,
    pub c22: f64,
    pub c33: f64,
    pub c12: f64,
    pub c13: f64,
    pub c23: f64,
}

impl From<SymmetricTensor3> for TensorDto {
    fn from(t: SymmetricTensor3) -> Self {
        let [c11, c22, c33, c12, c13, c23] = t.coeffs();
        Self { c11, c22, c33, c12, c13, c23 }
    }
}

impl From<TensorDto> for SymmetricTensor3 {
    fn from(d: TensorDto) -> Self {
        SymmetricTensor3::new(d.c11, d.c22, d.c33, d.c12, d.c13, d.c23)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeDto {
    pub lambda: f64,
    /// Dimensionless weight tensor.
    pub weight: TensorDto,
}

/// Inputs for the eddy-current validity bound, optional in a model file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EddyLimitDto {
    pub diameter_m: f64,
    pub sigma_min_s_per_m: f64,
    pub mu_max_h_per_m: f64,
    pub threshold: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Modal model file schema, SI units in field names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub alpha_m: f64,
    pub sigma_star_s_per_m: f64,
    pub mu_r: f64,
    /// Static tensor, m^3.
    pub n0_m3: TensorDto,
    pub modes: Vec<ModeDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eddy_limit: Option<EddyLimitDto>,
}

impl ModelDto {
    pub fn to_model(&self) -> CliResult<ModalModel> {
        let modes = self
            .modes
            .iter()
            .map(|m| Mode { lambda: m.lambda, weight: m.weight.into() })
            .collect();
        Ok(ModalModel::new(
            self.alpha_m,
            self.sigma_star_s_per_m,
            self.mu_r,
            self.n0_m3.into(),
            modes,
        )?)
    }

    /// Validity bound from the optional eddy-limit block.
    pub fn omega_limit(&self) -> CliResult<Option<f64>> {
        match &self.eddy_limit {
            None => Ok(None),
            Some(e) => {
                let p = EddyLimitParams::new(
                    e.diameter_m,
                    e.sigma_min_s_per_m,
                    e.mu_max_h_per_m,
                    e.threshold,
                    e.c1,
                    e.c2,
                )?;
                Ok(Some(mptsig::spectral::eddy_limit(&p)))
            }
        }
    }
}

pub fn read_model(path: &Path) -> CliResult<ModelDto> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("model file {}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReceiverDto {
    pub center_m: [f64; 3],
    pub normal: [f64; 3],
    pub radius_m: f64,
    pub quadrature_order: usize,
}

/// Coil layout file schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutDto {
    pub z_m: [f64; 3],
    /// Exciter background fields at z.
    pub exciters_a_per_m: Vec<[f64; 3]>,
    pub receivers: Vec<ReceiverDto>,
}

impl LayoutDto {
    pub fn to_layout(&self) -> CliResult<CoilLayout> {
        let exciters = self
            .exciters_a_per_m
            .iter()
            .map(|v| Vector3::new(v[0], v[1], v[2]))
            .collect();
        let receivers = self
            .receivers
            .iter()
            .map(|r| {
                ReceiverCoil::new(
                    Vector3::new(r.center_m[0], r.center_m[1], r.center_m[2]),
                    Vector3::new(r.normal[0], r.normal[1], r.normal[2]),
                    r.radius_m,
                    r.quadrature_order,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CoilLayout::new(
            exciters,
            receivers,
            Vector3::new(self.z_m[0], self.z_m[1], self.z_m[2]),
        )?)
    }
}

pub fn read_layout(path: &Path) -> CliResult<LayoutDto> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("layout file {}: {e}", path.display())))
}

/// One classified object in a dataset config: a model by file or inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDto>,
    pub class: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridDto {
    pub omega_min_rad_per_s: f64,
    pub omega_max_rad_per_s: f64,
    pub num: usize,
    /// "log" or "linear".
    pub spacing: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeaturesDto {
    /// "eig", "principal" or "alternative".
    pub variant: String,
    pub with_commutator: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseDto {
    pub level: f64,
    pub replicates: usize,
}

fn default_resamples() -> usize {
    50
}

fn default_holdout() -> f64 {
    0.25
}

fn default_k() -> usize {
    3
}

/// Held-out evaluation settings for classify.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalDto {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub zscore: bool,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EvalDto {
    fn default() -> Self {
        Self {
            k: default_k(),
            zscore: false,
            holdout_fraction: default_holdout(),
            resamples: default_resamples(),
            seed: 0,
        }
    }
}

/// Dataset / classification config schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigDto {
    pub classes: Vec<String>,
    pub objects: Vec<ObjectDto>,
    pub grid: GridDto,
    pub features: FeaturesDto,
    pub noise: NoiseDto,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvalDto>,
}

pub fn read_config(path: &Path) -> CliResult<ConfigDto> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("config file {}: {e}", path.display())))
}

pub fn parse_variant(name: &str) -> CliResult<FeatureVariant> {
    match name {
        "eig" => Ok(FeatureVariant::Eigenvalues),
        "principal" => Ok(FeatureVariant::Principal),
        "alternative" => Ok(FeatureVariant::Alternative),
        _ => Err(CliError::Parse(format!(
            "unknown feature variant {name:?}; expected eig, principal or alternative"
        ))),
    }
}

/// Resolves the models of a config, reading referenced files relative to
/// the config's directory.
pub fn resolve_objects(
    config: &ConfigDto,
    config_dir: &Path,
) -> CliResult<Vec<(ModalModel, usize)>> {
    let mut out = Vec::with_capacity(config.objects.len());
    for (i, obj) in config.objects.iter().enumerate() {
        if obj.class >= config.classes.len() {
            return Err(CliError::Parse(format!(
                "object {i}: class index {} out of range for {} classes",
                obj.class,
                config.classes.len()
            )));
        }
        let dto = match (&obj.model, &obj.model_file) {
            (Some(m), None) => m.clone(),
            (None, Some(f)) => read_model(&config_dir.join(f))?,
            _ => {
                return Err(CliError::Parse(format!(
                    "object {i}: provide exactly one of model or model_file"
                )))
            }
        };
        out.push((dto.to_model()?, obj.class));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Signature CSV
// ---------------------------------------------------------------------------

const SIGNATURE_HEADER: &str = "omega_rad_per_s,re_c11,re_c22,re_c33,re_c12,re_c13,re_c23,im_c11,im_c22,im_c33,im_c12,im_c13,im_c23";

/// Writes a signature CSV: `# key = value` metadata lines, a fixed header
/// declaring units and coefficient order, then one row per frequency.
pub fn signature_to_csv(sig: &MptSignature) -> String {
    let mut out = String::new();
    out.push_str("# signature-version: 1\n");
    out.push_str(&format!("# alpha_m = {}\n", fmt_f64(sig.alpha)));
    out.push_str(&format!("# sigma_star_s_per_m = {}\n", fmt_f64(sig.sigma_star)));
    out.push_str(&format!("# mu_r = {}\n", fmt_f64(sig.mu_r)));
    if let Some(label) = &sig.label {
        out.push_str(&format!("# label = {label}\n"));
    }
    if let Some(limit) = sig.omega_limit {
        out.push_str(&format!("# omega_limit_rad_per_s = {}\n", fmt_f64(limit)));
    }
    out.push_str(SIGNATURE_HEADER);
    out.push('\n');
    for s in &sig.samples {
        let mut fields = vec![fmt_f64(s.omega())];
        fields.extend(s.r_tilde().coeffs().iter().map(|v| fmt_f64(*v)));
        fields.extend(s.i_part().coeffs().iter().map(|v| fmt_f64(*v)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_signature(path: &Path, sig: &MptSignature) -> CliResult<()> {
    write_atomic(path, &signature_to_csv(sig))
}

pub fn signature_from_csv(text: &str) -> CliResult<MptSignature> {
    let mut alpha = None;
    let mut sigma = None;
    let mut mu_r = None;
    let mut label = None;
    let mut omega_limit = None;
    let mut saw_header = false;
    let mut samples: Vec<MptSample> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((key, value)) = meta.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                match key {
                    "alpha_m" => alpha = Some(parse_f64(value, "alpha_m")?),
                    "sigma_star_s_per_m" => sigma = Some(parse_f64(value, "sigma_star_s_per_m")?),
                    "mu_r" => mu_r = Some(parse_f64(value, "mu_r")?),
                    "label" => label = Some(value.to_string()),
                    "omega_limit_rad_per_s" => {
                        omega_limit = Some(parse_f64(value, "omega_limit_rad_per_s")?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !saw_header {
            if line != SIGNATURE_HEADER {
                return Err(CliError::Parse(format!(
                    "line {}: unexpected signature header {line:?}",
                    lineno + 1
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(CliError::Parse(format!(
                "line {}: expected 13 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let nums = fields
            .iter()
            .map(|f| parse_f64(f, "signature row"))
            .collect::<CliResult<Vec<f64>>>()?;
        let r = SymmetricTensor3::from_coeffs(nums[1..7].try_into().unwrap());
        let i = SymmetricTensor3::from_coeffs(nums[7..13].try_into().unwrap());
        samples.push(MptSample::new(nums[0], r, i)?);
    }
    if !saw_header {
        return Err(CliError::Parse("signature file has no header row".into()));
    }
    if samples.windows(2).any(|w| w[0].omega() >= w[1].omega()) {
        return Err(CliError::Parse(
            "signature rows must be strictly ascending in omega".into(),
        ));
    }
    let missing = |what: &str| CliError::Parse(format!("signature file missing metadata {what}"));
    Ok(MptSignature {
        alpha: alpha.ok_or_else(|| missing("alpha_m"))?,
        sigma_star: sigma.ok_or_else(|| missing("sigma_star_s_per_m"))?,
        mu_r: mu_r.ok_or_else(|| missing("mu_r"))?,
        label,
        omega_limit,
        samples,
    })
}

pub fn read_signature(path: &Path) -> CliResult<MptSignature> {
    signature_from_csv(&read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Invariants CSV
// ---------------------------------------------------------------------------

/// Invariant rows: omega plus the set's value columns.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantsTable {
    /// "eig", "principal", "alternative" or "commutator".
    pub set: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn invariants_to_csv(table: &InvariantsTable) -> String {
    let mut out = String::new();
    out.push_str("# invariants-version: 1\n");
    out.push_str(&format!("# set = {}\n", table.set));
    out.push_str("omega_rad_per_s,");
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let fields: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn invariants_from_csv(text: &str) -> CliResult<InvariantsTable> {
    let mut set = None;
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((key, value)) = meta.split_once('=') {
                if key.trim() == "set" {
                    set = Some(value.trim().to_string());
                }
            }
            continue;
        }
        match &columns {
            None => {
                let mut names: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
                if names.first().map(String::as_str) != Some("omega_rad_per_s") {
                    return Err(CliError::Parse(format!(
                        "line {}: invariants header must start with omega_rad_per_s",
                        lineno + 1
                    )));
                }
                names.remove(0);
                columns = Some(names);
            }
            Some(cols) => {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != cols.len() + 1 {
                    return Err(CliError::Parse(format!(
                        "line {}: expected {} fields, found {}",
                        lineno + 1,
                        cols.len() + 1,
                        fields.len()
                    )));
                }
                rows.push(
                    fields
                        .iter()
                        .map(|f| parse_f64(f, "invariants row"))
                        .collect::<CliResult<Vec<f64>>>()?,
                );
            }
        }
    }
    Ok(InvariantsTable {
        set: set.ok_or_else(|| CliError::Parse("invariants file missing set metadata".into()))?,
        columns: columns
            .ok_or_else(|| CliError::Parse("invariants file has no header row".into()))?,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Dataset CSV + sidecar
// ---------------------------------------------------------------------------

/// Sidecar metadata describing a dataset CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMetaDto {
    pub variant: String,
    pub with_commutator: bool,
    pub num_frequencies: usize,
    pub omegas_rad_per_s: Vec<f64>,
    pub class_names: Vec<String>,
    pub noise_level: f64,
    pub replicates: usize,
    pub seed: u64,
    pub feature_names: Vec<String>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    PathBuf::from(format!("{}.meta.json", csv_path.display()))
}

/// Writes the dataset CSV (feature columns named by the layout, then one
/// 0/1 column per class) and its JSON sidecar.
pub fn write_dataset(
    csv_path: &Path,
    dataset: &LabeledDataset,
    meta: &DatasetMetaDto,
) -> CliResult<()> {
    let mut out = String::new();
    out.push_str("# dataset-version: 1\n");
    let mut header: Vec<String> = dataset.layout().feature_names();
    header.extend(dataset.class_names().iter().map(|n| format!("class_{n}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for (x, t) in dataset.pairs() {
        let mut fields: Vec<String> = x.values().iter().map(|v| fmt_f64(*v)).collect();
        fields.extend(t.values().iter().map(|v| fmt_f64(*v)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_atomic(csv_path, &out)?;
    let json = serde_json::to_string_pretty(meta)
        .map_err(|e| CliError::Io(format!("serializing sidecar: {e}")))?;
    write_atomic(&sidecar_path(csv_path), &format!("{json}\n"))
}

/// Reads a dataset CSV with its sidecar back into a labeled dataset.
pub fn read_dataset(csv_path: &Path) -> CliResult<(LabeledDataset, DatasetMetaDto)> {
    let meta_text = read_to_string(&sidecar_path(csv_path))?;
    let meta: DatasetMetaDto = serde_json::from_str(&meta_text)
        .map_err(|e| CliError::Parse(format!("sidecar {}: {e}", sidecar_path(csv_path).display())))?;
    let layout = FeatureLayout {
        variant: parse_variant(&meta.variant)?,
        num_frequencies: meta.num_frequencies,
        with_commutator: meta.with_commutator,
    };
    let f = layout.len();
    let k = meta.class_names.len();
    let text = read_to_string(csv_path)?;
    let mut saw_header = false;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            let cols = line.split(',').count();
            if cols != f + k {
                return Err(CliError::Parse(format!(
                    "dataset header has {cols} columns, expected {} features + {k} classes",
                    f
                )));
            }
            continue;
        }
        let nums = line
            .split(',')
            .map(|s| parse_f64(s, "dataset row"))
            .collect::<CliResult<Vec<f64>>>()?;
        if nums.len() != f + k {
            return Err(CliError::Parse(format!(
                "line {}: expected {} fields, found {}",
                lineno + 1,
                f + k,
                nums.len()
            )));
        }
        let x = FeatureVector::new(nums[..f].to_vec(), layout)?;
        let class = nums[f..]
            .iter()
            .position(|v| *v == 1.0)
            .ok_or_else(|| CliError::Parse(format!("line {}: no class marker", lineno + 1)))?;
        pairs.push((x, one_of_k(class, k)?));
    }
    if !saw_header {
        return Err(CliError::Parse("dataset file has no header row".into()));
    }
    Ok((LabeledDataset::new(pairs, layout, meta.class_names.clone())?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips_awkward_values() {
        for v in [
            0.0,
            1.0,
            -1.0,
            0.1,
            std::f64::consts::PI,
            1.4426e-17,
            -9.87654321e300,
            5.0e-324,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s} -> {back}");
        }
    }

    #[test]
    fn signature_csv_round_trips() {
        let r = SymmetricTensor3::new(2e-5, 1.5e-5, 1e-5, 3e-6, -2e-6, 1e-6);
        let i = SymmetricTensor3::new(8e-6, 6e-6, 9e-6, -1e-6, 2e-6, 5e-7);
        let sig = MptSignature {
            alpha: 0.01,
            sigma_star: 5.96e6,
            mu_r: 2.0,
            label: Some("test object".into()),
            omega_limit: Some(2.9979e8),
            samples: vec![
                MptSample::new(0.0, r, SymmetricTensor3::zero()).unwrap(),
                MptSample::new(1.5e3, r, i).unwrap(),
                MptSample::new(7.2e5, r.scale(0.9), i.scale(1.1)).unwrap(),
            ],
        };
        let text = signature_to_csv(&sig);
        let back = signature_from_csv(&text).unwrap();
        assert_eq!(back.alpha, sig.alpha);
        assert_eq!(back.sigma_star, sig.sigma_star);
        assert_eq!(back.mu_r, sig.mu_r);
        assert_eq!(back.label, sig.label);
        assert_eq!(back.omega_limit, sig.omega_limit);
        assert_eq!(back.samples.len(), 3);
        for (a, b) in back.samples.iter().zip(&sig.samples) {
            assert_eq!(a.omega().to_bits(), b.omega().to_bits());
            assert_eq!(a.r_tilde().coeffs(), b.r_tilde().coeffs());
            assert_eq!(a.i_part().coeffs(), b.i_part().coeffs());
        }
        // Identical output on re-serialization.
        assert_eq!(signature_to_csv(&back), text);
    }

    #[test]
    fn signature_csv_rejects_malformed_input() {
        assert!(signature_from_csv("").is_err());
        assert!(signature_from_csv("# alpha_m = 0.01\nnot,a,header\n").is_err());
        let good_header = format!("# alpha_m = 1e-2\n# sigma_star_s_per_m = 1e6\n# mu_r = 1e0\n{SIGNATURE_HEADER}\n");
        let short_row = format!("{good_header}1.0,2.0\n");
        assert!(signature_from_csv(&short_row).is_err());
        // Descending frequencies.
        let zeros = ["0.0"; 12].join(",");
        let bad_order = format!("{good_header}2.0,{zeros}\n1.0,{zeros}\n");
        assert!(signature_from_csv(&bad_order).is_err());
    }

    #[test]
    fn invariants_csv_round_trips() {
        let table = InvariantsTable {
            set: "principal".into(),
            columns: vec![
                "re_i1".into(),
                "re_i2".into(),
                "re_i3".into(),
                "im_i1".into(),
                "im_i2".into(),
                "im_i3".into(),
            ],
            rows: vec![
                vec![0.0, 1.0, 2.0, 3.0, 0.0, 0.0, 0.0],
                vec![1e4, 0.9, 1.9, 2.9, 0.1, 0.2, 0.3],
            ],
        };
        let text = invariants_to_csv(&table);
        let back = invariants_from_csv(&text).unwrap();
        assert_eq!(back.set, table.set);
        assert_eq!(back.columns, table.columns);
        assert_eq!(back.rows.len(), 2);
        for (a, b) in back.rows.iter().zip(&table.rows) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
