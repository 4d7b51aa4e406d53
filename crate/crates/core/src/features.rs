//! Rotation-invariant feature vectors, labeled datasets and a reference
//! k-nearest-neighbour classifier.
//!
//! Each spectral sample contributes three invariant quantities per tensor
//! part (eigenvalues, principal invariants, or the deviatoric set) and
//! optionally the commutator invariant coupling the two parts, so a
//! signature with M frequencies yields 6M or 7M features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::add_noise_with_rng;
use crate::spectral::{synthesize, ModalModel, MptSignature};
use crate::tensor::{
    alternative_invariants, commutator, commutator_invariant, eig_sym3, principal_invariants,
    SymmetricTensor3,
};

/// Which three per-part quantities enter the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureVariant {
    /// Sorted eigenvalues of each part.
    Eigenvalues,
    /// Principal invariants I1, I2, I3.
    Principal,
    /// Deviatoric set I1, J2, J3.
    Alternative,
}

impl FeatureVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Eigenvalues => "eig",
            Self::Principal => "principal",
            Self::Alternative => "alternative",
        }
    }

    /// Column labels of the three quantities for one part.
    pub fn quantity_names(&self) -> [&'static str; 3] {
        match self {
            Self::Eigenvalues => ["l1", "l2", "l3"],
            Self::Principal => ["i1", "i2", "i3"],
            Self::Alternative => ["i1", "j2", "j3"],
        }
    }
}

/// How eigenvalues are paired across neighbouring frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenOrdering {
    /// Independent descending sort at every frequency.
    SortedDescending,
    /// Start descending, then follow each branch by minimal total
    /// displacement from the previous frequency.
    ContinuityTracked,
}

/// Descriptor fixing the meaning of every feature index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub variant: FeatureVariant,
    pub num_frequencies: usize,
    pub with_commutator: bool,
}

/// One feature position decoded: which part, which quantity, which
/// frequency sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureIndex {
    /// "re", "im" or "z".
    pub part: &'static str,
    pub quantity: &'static str,
    pub frequency_index: usize,
}

impl FeatureLayout {
    pub fn len(&self) -> usize {
        let per_part = 3 * self.num_frequencies;
        2 * per_part + if self.with_commutator { self.num_frequencies } else { 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.num_frequencies == 0
    }

    /// The index bijection: the real-part block holds quantities for all
    /// frequencies (frequency-major, quantity-minor), the imaginary-part
    /// block follows, then one commutator value per frequency.
    pub fn describe(&self, index: usize) -> Result<FeatureIndex> {
        let m = self.num_frequencies;
        let block = 3 * m;
        if index >= self.len() {
            return Err(Error::InvalidInput(format!(
                "feature index {index} out of range for {} features",
                self.len()
            )));
        }
        Ok(if index < block {
            FeatureIndex {
                part: "re",
                quantity: self.variant.quantity_names()[index % 3],
                frequency_index: index / 3,
            }
        } else if index < 2 * block {
            let j = index - block;
            FeatureIndex {
                part: "im",
                quantity: self.variant.quantity_names()[j % 3],
                frequency_index: j / 3,
            }
        } else {
            FeatureIndex { part: "z", quantity: "z", frequency_index: index - 2 * block }
        })
    }

    /// Stable column names, e.g. "re_l1_w003".
    pub fn feature_names(&self) -> Vec<String> {
        (0..self.len())
            .map(|i| {
                let d = self.describe(i).expect("index in range");
                if d.part == "z" {
                    format!("z_w{:03}", d.frequency_index)
                } else {
                    format!("{}_{}_w{:03}", d.part, d.quantity, d.frequency_index)
                }
            })
            .collect()
    }
}

/// Feature values plus the layout that gives them meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    layout: FeatureLayout,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, layout: FeatureLayout) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::IncompatibleFeatures(format!(
                "{} values for a layout of {} features",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }
}

/// 1-of-K class encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTarget {
    t: Vec<f64>,
}

impl ClassTarget {
    pub fn values(&self) -> &[f64] {
        &self.t
    }

    pub fn num_classes(&self) -> usize {
        self.t.len()
    }

    pub fn class_index(&self) -> usize {
        self.t.iter().position(|v| *v == 1.0).expect("one-hot by construction")
    }
}

/// Unit vector of length `k_total` with a 1 at `class_index`.
pub fn one_of_k(class_index: usize, k_total: usize) -> Result<ClassTarget> {
    if class_index >= k_total {
        return Err(Error::InvalidInput(format!(
            "class index {class_index} out of range for {k_total} classes"
        )));
    }
    let mut t = vec![0.0; k_total];
    t[class_index] = 1.0;
    Ok(ClassTarget { t })
}

/// Feature/target pairs sharing one layout.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pairs: Vec<(FeatureVector, ClassTarget)>,
    layout: FeatureLayout,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        pairs: Vec<(FeatureVector, ClassTarget)>,
        layout: FeatureLayout,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::InvalidInput("dataset needs at least one class".into()));
        }
        for (p, (x, t)) in pairs.iter().enumerate() {
            if *x.layout() != layout {
                return Err(Error::IncompatibleFeatures(format!(
                    "row {p} has a different feature layout"
                )));
            }
            if t.num_classes() != class_names.len() {
                return Err(Error::InvalidInput(format!(
                    "row {p} targets {} classes, expected {}",
                    t.num_classes(),
                    class_names.len()
                )));
            }
        }
        Ok(Self { pairs, layout, class_names })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(FeatureVector, ClassTarget)] {
        &self.pairs
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

fn part_quantities(
    variant: FeatureVariant,
    t: &SymmetricTensor3,
    prev: Option<[f64; 3]>,
    ordering: EigenOrdering,
) -> Result<[f64; 3]> {
    Ok(match variant {
        FeatureVariant::Eigenvalues => {
            let eigs = eig_sym3(t)?.eigenvalues;
            match (ordering, prev) {
                (EigenOrdering::ContinuityTracked, Some(p)) => best_pairing(eigs, p),
                _ => eigs,
            }
        }
        FeatureVariant::Principal => {
            let inv = principal_invariants(t);
            [inv.i1, inv.i2, inv.i3]
        }
        FeatureVariant::Alternative => {
            let inv = alternative_invariants(t);
            [inv.i1, inv.i2, inv.i3]
        }
    })
}

// Permutation of `vals` minimizing total displacement from `prev`.
fn best_pairing(vals: [f64; 3], prev: [f64; 3]) -> [f64; 3] {
    const PERMS: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut best = vals;
    let mut best_cost = f64::INFINITY;
    for p in PERMS {
        let cand = [vals[p[0]], vals[p[1]], vals[p[2]]];
        let cost: f64 = (0..3).map(|i| (cand[i] - prev[i]).abs()).sum();
        if cost < best_cost {
            best_cost = cost;
            best = cand;
        }
    }
    best
}

/// Extracts the invariant feature vector of a signature with the default
/// descending eigenvalue ordering.
pub fn features_from_signature(
    sig: &MptSignature,
    variant: FeatureVariant,
    with_commutator: bool,
) -> Result<FeatureVector> {
    features_from_signature_with_ordering(
        sig,
        variant,
        with_commutator,
        EigenOrdering::SortedDescending,
    )
}

/// Feature extraction with explicit eigenvalue pairing across frequencies;
/// the ordering choice only affects the eigenvalue variant.
pub fn features_from_signature_with_ordering(
    sig: &MptSignature,
    variant: FeatureVariant,
    with_commutator: bool,
    ordering: EigenOrdering,
) -> Result<FeatureVector> {
    let m = sig.samples.len();
    if m == 0 {
        return Err(Error::InvalidInput("signature has no samples".into()));
    }
    let layout = FeatureLayout { variant, num_frequencies: m, with_commutator };
    let mut values = Vec::with_capacity(layout.len());
    let mut prev_r: Option<[f64; 3]> = None;
    let mut prev_i: Option<[f64; 3]> = None;
    for s in &sig.samples {
        let q = part_quantities(variant, s.r_tilde(), prev_r, ordering)?;
        prev_r = Some(q);
        values.extend_from_slice(&q);
    }
    for s in &sig.samples {
        let q = part_quantities(variant, s.i_part(), prev_i, ordering)?;
        prev_i = Some(q);
        values.extend_from_slice(&q);
    }
    if with_commutator {
        for s in &sig.samples {
            let z = commutator(s.r_tilde(), s.i_part());
            values.push(commutator_invariant(&z)?);
        }
    }
    FeatureVector::new(values, layout)
}

// Per-feature mean and std over the dataset; std 0 marks a constant
// feature, which is excluded from scaled distances.
fn zscore_stats(dataset: &LabeledDataset) -> (Vec<f64>, Vec<f64>) {
    let f = dataset.layout().len();
    let p = dataset.len() as f64;
    let mut mean = vec![0.0; f];
    for (x, _) in dataset.pairs() {
        for (i, v) in x.values().iter().enumerate() {
            mean[i] += v;
        }
    }
    for v in &mut mean {
        *v /= p;
    }
    let mut var = vec![0.0; f];
    for (x, _) in dataset.pairs() {
        for (i, v) in x.values().iter().enumerate() {
            var[i] += (v - mean[i]).powi(2);
        }
    }
    let std = var.into_iter().map(|v| (v / p).sqrt()).collect();
    (mean, std)
}

fn scaled_distance(a: &[f64], b: &[f64], stats: Option<&(Vec<f64>, Vec<f64>)>) -> f64 {
    match stats {
        None => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        Some((_, std)) => a
            .iter()
            .zip(b)
            .zip(std)
            .filter(|(_, s)| **s > 0.0)
            .map(|((x, y), s)| ((x - y) / s).powi(2))
            .sum::<f64>()
            .sqrt(),
    }
}

// Indices and distances of the k nearest training rows, distance then
// index order for determinism.
fn nearest(
    dataset: &LabeledDataset,
    query: &FeatureVector,
    k: usize,
    zscore: bool,
) -> Result<Vec<(usize, f64)>> {
    if query.layout() != dataset.layout() {
        return Err(Error::IncompatibleFeatures(format!(
            "query layout {:?} does not match dataset layout {:?}",
            query.layout(),
            dataset.layout()
        )));
    }
    if k == 0 || k > dataset.len() {
        return Err(Error::InvalidInput(format!(
            "neighbour count {k} outside 1..={}",
            dataset.len()
        )));
    }
    let stats = zscore.then(|| zscore_stats(dataset));
    let mut dist: Vec<(usize, f64)> = dataset
        .pairs()
        .iter()
        .enumerate()
        .map(|(i, (x, _))| (i, scaled_distance(query.values(), x.values(), stats.as_ref())))
        .collect();
    dist.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    dist.truncate(k);
    Ok(dist)
}

/// Class-frequency vector among the k nearest training points under
/// Euclidean distance, optionally z-scored per feature. Entries sum to 1.
pub fn knn_classify(
    dataset: &LabeledDataset,
    query: &FeatureVector,
    k: usize,
    zscore: bool,
) -> Result<Vec<f64>> {
    let nn = nearest(dataset, query, k, zscore)?;
    let mut probs = vec![0.0; dataset.num_classes()];
    for (i, _) in &nn {
        probs[dataset.pairs()[*i].1.class_index()] += 1.0 / k as f64;
    }
    Ok(probs)
}

/// Predicted class index: the most frequent class among the k nearest,
/// ties broken by smaller mean distance, then lower class index.
pub fn knn_predict(
    dataset: &LabeledDataset,
    query: &FeatureVector,
    k: usize,
    zscore: bool,
) -> Result<usize> {
    let nn = nearest(dataset, query, k, zscore)?;
    let kc = dataset.num_classes();
    let mut count = vec![0usize; kc];
    let mut dist_sum = vec![0.0f64; kc];
    for (i, d) in &nn {
        let c = dataset.pairs()[*i].1.class_index();
        count[c] += 1;
        dist_sum[c] += d;
    }
    let best = (0..kc)
        .filter(|c| count[*c] > 0)
        .min_by(|&a, &b| {
            count[b]
                .cmp(&count[a])
                .then_with(|| {
                    let ma = dist_sum[a] / count[a] as f64;
                    let mb = dist_sum[b] / count[b] as f64;
                    ma.partial_cmp(&mb).unwrap()
                })
                .then(a.cmp(&b))
        })
        .expect("k >= 1 neighbours");
    Ok(best)
}

/// Synthesizes, perturbs and featurizes every (model, class) pair.
///
/// Each of the `objects.len() * replicates` rows gets its own random stream
/// derived from (seed, row); sample tensors are perturbed with the
/// measurement noise model at `noise_level` before feature extraction.
/// Class names default to "class_0", "class_1", ...
pub fn build_dataset(
    objects: &[(ModalModel, usize)],
    omegas: &[f64],
    variant: FeatureVariant,
    with_commutator: bool,
    noise_level: f64,
    replicates: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    build_dataset_named(
        objects, None, omegas, variant, with_commutator, noise_level, replicates, seed,
    )
}

/// `build_dataset` with explicit class names; `None` falls back to
/// "class_k" and a class count of max index + 1.
#[allow(clippy::too_many_arguments)]
pub fn build_dataset_named(
    objects: &[(ModalModel, usize)],
    class_names: Option<&[String]>,
    omegas: &[f64],
    variant: FeatureVariant,
    with_commutator: bool,
    noise_level: f64,
    replicates: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if objects.is_empty() {
        return Err(Error::InvalidInput("no objects to build a dataset from".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidInput("replicate count must be at least 1".into()));
    }
    if !(noise_level.is_finite() && noise_level >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise level must be finite and nonnegative, got {noise_level}"
        )));
    }
    let k_total = match class_names {
        Some(names) => names.len(),
        None => objects.iter().map(|(_, c)| c + 1).max().unwrap(),
    };
    let names: Vec<String> = match class_names {
        Some(names) => names.to_vec(),
        None => (0..k_total).map(|i| format!("class_{i}")).collect(),
    };
    let mut layout = None;
    let mut pairs = Vec::with_capacity(objects.len() * replicates);
    for (obj_index, (model, class)) in objects.iter().enumerate() {
        let target = one_of_k(*class, k_total)?;
        let clean = synthesize(model, omegas)?;
        for rep in 0..replicates {
            let row = obj_index * replicates + rep;
            let sig = if noise_level > 0.0 {
                // Independent stream per row keeps rows reproducible and
                // order-independent.
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(row as u64);
                perturb_signature(&clean, noise_level, &mut rng)?
            } else {
                clean.clone()
            };
            let x = features_from_signature(&sig, variant, with_commutator)?;
            match &layout {
                None => layout = Some(*x.layout()),
                Some(l) => debug_assert_eq!(l, x.layout()),
            }
            pairs.push((x, target.clone()));
        }
    }
    LabeledDataset::new(pairs, layout.expect("at least one row"), names)
}

fn perturb_signature(
    sig: &MptSignature,
    level: f64,
    rng: &mut ChaCha8Rng,
) -> Result<MptSignature> {
    let mut samples = Vec::with_capacity(sig.samples.len());
    for s in &sig.samples {
        let (r, i) = add_noise_with_rng(s.r_tilde(), s.i_part(), level, rng);
        samples.push(crate::tensor::MptSample::new(s.omega(), r, i)?);
    }
    Ok(MptSignature {
        alpha: sig.alpha,
        sigma_star: sig.sigma_star,
        mu_r: sig.mu_r,
        label: sig.label.clone(),
        omega_limit: sig.omega_limit,
        samples,
    })
}

/// Stratified shuffled split: per class, about `holdout_fraction` of the
/// rows (at least one when the class has two or more) go to the held-out
/// set. Deterministic in `seed`.
pub fn holdout_split(
    dataset: &LabeledDataset,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "holdout fraction must lie in (0, 1), got {holdout_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..dataset.num_classes() {
        let mut rows: Vec<usize> = dataset
            .pairs()
            .iter()
            .enumerate()
            .filter(|(_, (_, t))| t.class_index() == class)
            .map(|(i, _)| i)
            .collect();
        rows.shuffle(&mut rng);
        let held = if rows.len() >= 2 {
            ((rows.len() as f64 * holdout_fraction).round() as usize).clamp(1, rows.len() - 1)
        } else {
            0
        };
        for (j, row) in rows.into_iter().enumerate() {
            let pair = dataset.pairs()[row].clone();
            if j < held {
                test.push(pair);
            } else {
                train.push(pair);
            }
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidInput(
            "split left an empty training or held-out set".into(),
        ));
    }
    Ok((
        LabeledDataset::new(train, *dataset.layout(), dataset.class_names().to_vec())?,
        LabeledDataset::new(test, *dataset.layout(), dataset.class_names().to_vec())?,
    ))
}
