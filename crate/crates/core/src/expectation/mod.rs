//! Conditional authorship-category model.
//!
//! Fits a penalized multinomial regression of a paper's authorship
//! category on its characteristics — publication date, team size,
//! combined first/last-author seniority, journal, review status and
//! (optionally) subfield — and turns the fit into per-paper expected
//! citation probabilities. Date, team size and seniority enter as
//! penalized cubic B-spline smooths (degrading to linear terms when a
//! feature has too few distinct values); journal, review status and
//! subfield enter as dummies.
//!
//! Each smooth block carries a sum-to-zero constraint (so the intercept
//! stays identified) and a second-order difference penalty augmented
//! with a shrinkage term on the penalty null space, which makes the
//! whole smooth — not just its wiggly part — vanish as the smoothing
//! parameter grows. In that limit predictions collapse onto the
//! categorical-covariates-only model.

pub mod basis;
pub mod fit;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::authors::{AuthorTable, GenderCategory, GenderLabel};
use crate::corpus::Corpus;
use crate::par;
use basis::{difference_penalty, BSplineBasis};
use fit::{FitError, PenalizedProblem, N_CATEGORIES};

/// Serialized-model schema; bumped on any breaking layout change.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Eigenvalues below this fraction of the largest are treated as the
/// penalty null space and receive their own shrinkage.
const NULL_SPACE_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum ExpectationError {
    #[error("no training papers supplied")]
    EmptyTraining,
    #[error("training paper {index} has an unknown authorship category")]
    UnknownCategory { index: usize },
    #[error("training data lacks categories: {0}")]
    MissingCategories(String),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("empty candidate pool")]
    EmptyPool,
    #[error("model schema version {found} unsupported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("model serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-paper characteristics entering the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperFeatures {
    /// Months since January of the first cited-window year.
    pub months_since_epoch: i32,
    pub team_size: u32,
    /// First-author plus last-author publication counts; a sole author
    /// is counted in both roles.
    pub combined_seniority: u32,
    pub journal: String,
    pub is_review: bool,
    pub subfield: Option<String>,
}

/// Features for one corpus record. `seniorities` must come from the
/// author table the corpus was resolved with.
pub fn build_features(
    corpus: &Corpus,
    table: &AuthorTable,
    seniorities: &[u32],
    idx: usize,
) -> PaperFeatures {
    let record = corpus.record(idx);
    let epoch = crate::corpus::MonthIdx::new(corpus.cited_window.0, 1);
    let first = table.first_author(idx);
    let last = table.last_author(idx);
    PaperFeatures {
        months_since_epoch: record.month_idx().0 - epoch.0,
        team_size: record.authors.len() as u32,
        combined_seniority: seniorities[first as usize] + seniorities[last as usize],
        journal: record.journal.clone(),
        is_review: record.is_review,
        subfield: record.subfield.clone(),
    }
}

/// Features for every record, with seniorities derived from `table`.
pub fn build_all_features(corpus: &Corpus, table: &AuthorTable) -> Vec<PaperFeatures> {
    let seniorities = table.seniorities();
    (0..corpus.len())
        .map(|idx| build_features(corpus, table, &seniorities, idx))
        .collect()
}

/// Smoothing-parameter policy: one shared value across smooth terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    /// Grid search over 10^-3 … 10^3 minimizing GCV; ties go to the
    /// larger (smoother) value.
    GcvGrid,
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub lambda: LambdaChoice,
    pub interior_knots: usize,
    pub degree: usize,
    pub use_subfield: bool,
    /// Permit fitting when not all four categories appear (degenerate
    /// corpora); the default refuses.
    pub allow_missing_categories: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            lambda: LambdaChoice::Fixed(1.0),
            interior_knots: 10,
            degree: 3,
            use_subfield: false,
            allow_missing_categories: false,
        }
    }
}

/// The three numeric features modelled as smooths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmoothFeature {
    Months,
    TeamSize,
    Seniority,
}

impl SmoothFeature {
    const ALL: [SmoothFeature; 3] =
        [SmoothFeature::Months, SmoothFeature::TeamSize, SmoothFeature::Seniority];

    fn extract(self, f: &PaperFeatures) -> f64 {
        match self {
            SmoothFeature::Months => f.months_since_epoch as f64,
            SmoothFeature::TeamSize => f.team_size as f64,
            SmoothFeature::Seniority => f.combined_seniority as f64,
        }
    }
}

/// How one numeric feature ended up represented.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SmoothKind {
    /// Constrained spline block: `constraint` is the Householder vector
    /// enforcing the training-mean sum-to-zero reparameterization.
    Spline { basis: BSplineBasis, constraint: Vec<f64> },
    /// Standardized linear column (too few distinct values to smooth).
    Linear { mean: f64, sd: f64 },
    /// Constant in training; contributes nothing.
    Dropped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedTerm {
    pub feature: SmoothFeature,
    pub kind: SmoothKind,
}

impl FittedTerm {
    fn width(&self) -> usize {
        match &self.kind {
            SmoothKind::Spline { basis, .. } => basis.n_basis() - 1,
            SmoothKind::Linear { .. } => 1,
            SmoothKind::Dropped => 0,
        }
    }

    /// Writes this term's design columns for feature value `x`.
    fn write_into(&self, x: f64, out: &mut [f64]) {
        match &self.kind {
            SmoothKind::Spline { basis, constraint } => {
                let q = basis.n_basis();
                let mut raw = vec![0.0; q];
                basis.eval_into(x, &mut raw);
                householder_apply(constraint, &mut raw);
                out.copy_from_slice(&raw[1..]);
            }
            SmoothKind::Linear { mean, sd } => out[0] = (x - mean) / sd,
            SmoothKind::Dropped => {}
        }
    }
}

/// Applies the Householder reflection with vector `v` to `row` in
/// place; afterwards `row[1..]` holds the constrained block columns.
fn householder_apply(v: &[f64], row: &mut [f64]) {
    let vv: f64 = v.iter().map(|a| a * a).sum();
    if vv == 0.0 {
        return;
    }
    let dot: f64 = v.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
    let scale = 2.0 * dot / vv;
    for (r, a) in row.iter_mut().zip(v.iter()) {
        *r -= scale * a;
    }
}

/// Categorical vocabulary with a majority baseline level. Dummy columns
/// cover every level except the majority, in stored order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalVocab {
    pub name: String,
    pub levels: Vec<String>,
    pub majority: usize,
}

impl CategoricalVocab {
    fn build<'a>(name: &str, values: impl Iterator<Item = &'a str>) -> CategoricalVocab {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for v in values {
            *counts.entry(v).or_insert(0) += 1;
        }
        let levels: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
        let majority = levels
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                counts[a.as_str()]
                    .cmp(&counts[b.as_str()])
                    // Count ties resolve to the alphabetically first level.
                    .then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        CategoricalVocab { name: name.to_string(), levels, majority }
    }

    fn width(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// Dummy-column index for `level`, or `None` for the baseline.
    /// Unseen levels map to the baseline with a warning.
    fn encode(&self, level: &str) -> Option<usize> {
        match self.levels.iter().position(|l| l == level) {
            Some(i) if i == self.majority => None,
            Some(i) => Some(if i < self.majority { i } else { i - 1 }),
            None => {
                log::warn!(
                    "unseen {} level {level:?}; treating as training majority {:?}",
                    self.name,
                    self.levels[self.majority]
                );
                None
            }
        }
    }
}

/// A 4-vector of authorship-category probabilities in the fixed
/// (MM, WM, MW, WW) order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryProbabilities(pub [f64; 4]);

impl CategoryProbabilities {
    pub fn get(&self, cat: GenderCategory) -> f64 {
        cat.index().map(|i| self.0[i]).unwrap_or(0.0)
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

/// Fitted model: design layout plus coefficients, serializable to
/// versioned JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationModel {
    pub schema_version: u32,
    pub terms: Vec<FittedTerm>,
    pub journal: CategoricalVocab,
    pub use_is_review: bool,
    pub subfield: Option<CategoricalVocab>,
    /// One row per design column, one entry per category.
    pub coefficients: Vec<[f64; 4]>,
    pub lambda: f64,
    pub deviance: f64,
    pub edf: f64,
    pub gcv: f64,
    pub n_train: usize,
}

impl ExpectationModel {
    fn width(&self) -> usize {
        1 + self.terms.iter().map(FittedTerm::width).sum::<usize>()
            + self.journal.width()
            + usize::from(self.use_is_review)
            + self.subfield.as_ref().map_or(0, CategoricalVocab::width)
    }

    fn design_row(&self, f: &PaperFeatures) -> Vec<f64> {
        let mut row = vec![0.0; self.width()];
        row[0] = 1.0;
        let mut offset = 1;
        for term in &self.terms {
            let w = term.width();
            term.write_into(term.feature.extract(f), &mut row[offset..offset + w]);
            offset += w;
        }
        if let Some(col) = self.journal.encode(&f.journal) {
            row[offset + col] = 1.0;
        }
        offset += self.journal.width();
        if self.use_is_review {
            row[offset] = f.is_review as u8 as f64;
            offset += 1;
        }
        if let Some(vocab) = &self.subfield {
            if let Some(col) = vocab.encode(f.subfield.as_deref().unwrap_or("")) {
                row[offset + col] = 1.0;
            }
        }
        row
    }

    /// Category probabilities for one paper; always sums to exactly 1.
    pub fn predict(&self, f: &PaperFeatures) -> CategoryProbabilities {
        let row = self.design_row(f);
        let mut eta = [0.0f64; 4];
        for (j, coef) in self.coefficients.iter().enumerate() {
            for c in 0..N_CATEGORIES {
                eta[c] += row[j] * coef[c];
            }
        }
        let max = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs = [0.0f64; 4];
        let mut total = 0.0;
        for c in 0..N_CATEGORIES {
            probs[c] = (eta[c] - max).exp();
            total += probs[c];
        }
        for p in &mut probs {
            *p /= total;
        }
        CategoryProbabilities(probs)
    }

    /// Probabilities for many papers, evaluated on the worker pool.
    pub fn predict_many(&self, features: &[PaperFeatures]) -> Vec<CategoryProbabilities> {
        par::indexed_map(features.len(), |i| self.predict(&features[i]))
    }

    pub fn to_json(&self) -> Result<String, ExpectationError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<ExpectationModel, ExpectationError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as u32;
        if found != MODEL_SCHEMA_VERSION {
            return Err(ExpectationError::SchemaVersion {
                found,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }
}

/// A smooth term's penalty, positioned inside the full design.
struct PenaltyBlock {
    offset: usize,
    /// Constrained difference penalty plus null-space shrinkage,
    /// awaiting the lambda scale.
    matrix: DMatrix<f64>,
}

fn build_term(
    feature: SmoothFeature,
    values: &[f64],
    spec: &ModelSpec,
) -> (FittedTerm, Option<DMatrix<f64>>) {
    let mut distinct = values.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("non-finite feature value"));
    distinct.dedup();
    if distinct.len() < 2 {
        return (FittedTerm { feature, kind: SmoothKind::Dropped }, None);
    }
    if distinct.len() < spec.interior_knots.max(2) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        return (
            FittedTerm { feature, kind: SmoothKind::Linear { mean, sd: var.sqrt() } },
            None,
        );
    }
    // Sparse value sets get fewer knots so quantiles stay interior.
    let n_interior = spec.interior_knots.min(distinct.len() - 2);
    let basis = BSplineBasis::from_quantiles(values, spec.degree, n_interior)
        .expect("distinct-value check guarantees a valid basis");
    let q = basis.n_basis();
    // Sum-to-zero constraint over the training rows: column means.
    let mut c = vec![0.0; q];
    let mut row = vec![0.0; q];
    for &x in values {
        basis.eval_into(x, &mut row);
        for (acc, v) in c.iter_mut().zip(&row) {
            *acc += v;
        }
    }
    for v in &mut c {
        *v /= values.len() as f64;
    }
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = c;
    v[0] += norm.copysign(if v[0] >= 0.0 { 1.0 } else { -1.0 });
    // Z = columns 1.. of the Householder reflection for v.
    let vv: f64 = v.iter().map(|a| a * a).sum();
    let h = DMatrix::from_fn(q, q, |i, j| {
        let idn = if i == j { 1.0 } else { 0.0 };
        idn - 2.0 * v[i] * v[j] / vv
    });
    let z = h.columns(1, q - 1).into_owned();
    let s_z = z.transpose() * difference_penalty(q, 2) * &z;
    // Shrink the penalty null space too, so lambda → ∞ removes the
    // whole term instead of leaving an unpenalized linear remnant.
    let eigen = SymmetricEigen::new(s_z.clone());
    let max_eig = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut p0 = DMatrix::zeros(q - 1, q - 1);
    for (k, &ev) in eigen.eigenvalues.iter().enumerate() {
        if ev < NULL_SPACE_TOL * max_eig.max(1.0) {
            let u = eigen.eigenvectors.column(k);
            p0 += &u * u.transpose();
        }
    }
    (
        FittedTerm { feature, kind: SmoothKind::Spline { basis, constraint: v } },
        Some(s_z + p0),
    )
}

struct Layout {
    model: ExpectationModel,
    penalties: Vec<PenaltyBlock>,
}

fn build_layout(spec: &ModelSpec, features: &[PaperFeatures]) -> Layout {
    let mut terms = Vec::new();
    let mut penalties = Vec::new();
    let mut offset = 1;
    for feature in SmoothFeature::ALL {
        let values: Vec<f64> = features.iter().map(|f| feature.extract(f)).collect();
        let (term, penalty) = build_term(feature, &values, spec);
        if let Some(matrix) = penalty {
            penalties.push(PenaltyBlock { offset, matrix });
        }
        offset += term.width();
        terms.push(term);
    }
    let journal = CategoricalVocab::build("journal", features.iter().map(|f| f.journal.as_str()));
    let use_is_review = {
        let first = features[0].is_review;
        features.iter().any(|f| f.is_review != first)
    };
    let subfield = spec.use_subfield.then(|| {
        CategoricalVocab::build(
            "subfield",
            features.iter().map(|f| f.subfield.as_deref().unwrap_or("")),
        )
    });
    Layout {
        model: ExpectationModel {
            schema_version: MODEL_SCHEMA_VERSION,
            terms,
            journal,
            use_is_review,
            subfield,
            coefficients: Vec::new(),
            lambda: f64::NAN,
            deviance: f64::NAN,
            edf: f64::NAN,
            gcv: f64::NAN,
            n_train: features.len(),
        },
        penalties,
    }
}

fn assemble_penalty(layout: &Layout, width: usize, lambda: f64) -> DMatrix<f64> {
    let mut penalty = DMatrix::zeros(width, width);
    for block in &layout.penalties {
        let k = block.matrix.nrows();
        for a in 0..k {
            for b in 0..k {
                penalty[(block.offset + a, block.offset + b)] += lambda * block.matrix[(a, b)];
            }
        }
    }
    penalty
}

/// Fits the category model on labeled papers. Every training category
/// must be known, and all four categories must appear unless the spec
/// allows otherwise.
pub fn fit(
    spec: &ModelSpec,
    data: &[(PaperFeatures, GenderCategory)],
) -> Result<ExpectationModel, ExpectationError> {
    if data.is_empty() {
        return Err(ExpectationError::EmptyTraining);
    }
    let mut labels = Vec::with_capacity(data.len());
    let mut seen = [false; 4];
    for (index, (_, cat)) in data.iter().enumerate() {
        let label = cat
            .index()
            .ok_or(ExpectationError::UnknownCategory { index })?;
        seen[label] = true;
        labels.push(label);
    }
    if !spec.allow_missing_categories && seen.iter().any(|s| !s) {
        let missing: Vec<&str> = GenderCategory::KNOWN
            .iter()
            .enumerate()
            .filter(|(i, _)| !seen[*i])
            .map(|(_, c)| c.tag())
            .collect();
        return Err(ExpectationError::MissingCategories(missing.join(", ")));
    }
    let features: Vec<&PaperFeatures> = data.iter().map(|(f, _)| f).collect();
    let features_owned: Vec<PaperFeatures> = features.iter().map(|f| (*f).clone()).collect();
    let mut layout = build_layout(spec, &features_owned);
    let width = layout.model.width();
    let rows: Vec<Vec<f64>> = features_owned.iter().map(|f| layout.model.design_row(f)).collect();
    let x = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);

    let solve_at = |lambda: f64| -> Result<fit::FitOutput, ExpectationError> {
        let problem = PenalizedProblem {
            x: x.clone(),
            labels: labels.clone(),
            penalty: assemble_penalty(&layout, width, lambda),
            ridge: 1e-8,
        };
        Ok(problem.solve(None)?)
    };

    let (lambda, output) = match spec.lambda {
        LambdaChoice::Fixed(value) => (value, solve_at(value)?),
        LambdaChoice::GcvGrid => {
            if layout.penalties.is_empty() {
                (1.0, solve_at(1.0)?)
            } else {
                let mut best: Option<(f64, fit::FitOutput)> = None;
                for exp in -3..=3 {
                    let lambda = 10f64.powi(exp);
                    let candidate = solve_at(lambda)?;
                    let better = match &best {
                        None => true,
                        Some((_, held)) => candidate.gcv <= held.gcv,
                    };
                    if better {
                        best = Some((lambda, candidate));
                    }
                }
                best.expect("grid is nonempty")
            }
        }
    };

    layout.model.coefficients = (0..width)
        .map(|j| {
            let mut row = [0.0; 4];
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = output.theta[(j, c)];
            }
            row
        })
        .collect();
    layout.model.lambda = lambda;
    layout.model.deviance = output.deviance;
    layout.model.edf = output.edf;
    layout.model.gcv = output.gcv;
    Ok(layout.model)
}

/// Equal-weight category proportions over a candidate pool — the naive
/// expectation where every earlier paper is equally likely to be cited.
/// Unknown-category papers are excluded.
pub fn random_draws_expectation(
    pool: &[GenderCategory],
) -> Result<CategoryProbabilities, ExpectationError> {
    let mut counts = [0.0f64; 4];
    let mut total = 0.0;
    for cat in pool {
        if let Some(i) = cat.index() {
            counts[i] += 1.0;
            total += 1.0;
        }
    }
    if total == 0.0 {
        return Err(ExpectationError::EmptyPool);
    }
    for c in &mut counts {
        *c /= total;
    }
    Ok(CategoryProbabilities(counts))
}

/// Draws a category for a paper with (partially) unknown authorship
/// from its model probabilities, renormalized over the categories
/// compatible with whatever labels are known.
pub fn impute_unknown<R: Rng + ?Sized>(
    first: GenderLabel,
    last: GenderLabel,
    probs: &CategoryProbabilities,
    rng: &mut R,
) -> GenderCategory {
    let compatible: Vec<GenderCategory> = GenderCategory::KNOWN
        .iter()
        .copied()
        .filter(|c| {
            (first == GenderLabel::Unknown || first == c.first_label())
                && (last == GenderLabel::Unknown || last == c.last_label())
        })
        .collect();
    debug_assert!(!compatible.is_empty());
    let total: f64 = compatible.iter().map(|&c| probs.get(c)).sum();
    if total <= 0.0 {
        // All compatible categories have zero mass; fall back to a
        // uniform draw among them.
        let i = rng.random_range(0..compatible.len());
        return compatible[i];
    }
    let mut u = rng.random::<f64>() * total;
    for &cat in &compatible {
        u -= probs.get(cat);
        if u <= 0.0 {
            return cat;
        }
    }
    *compatible.last().expect("nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authors::{build_author_table, NicknameTable};
    use crate::corpus::{ArticleRecord, Corpus};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(doi: &str, year: i32, month: u8, authors: Vec<&str>) -> ArticleRecord {
        ArticleRecord {
            doi: doi.to_string(),
            journal: "jneuro".to_string(),
            pub_year: year,
            pub_month: month,
            is_review: false,
            authors: authors.into_iter().map(str::to_string).collect(),
            references: Vec::new(),
            subfield: None,
            inbound_citation_count: None,
        }
    }

    fn uniform_features(n: usize) -> Vec<PaperFeatures> {
        (0..n)
            .map(|_| PaperFeatures {
                months_since_epoch: 12,
                team_size: 3,
                combined_seniority: 10,
                journal: "jneuro".to_string(),
                is_review: false,
                subfield: None,
            })
            .collect()
    }

    #[test]
    fn months_since_epoch_counts_from_first_cited_year() {
        let corpus = Corpus::new(vec![
            record("10.1/a", 1995, 1, vec!["Ada Lovelace"]),
            record("10.1/b", 1995, 3, vec!["Ada Lovelace"]),
            record("10.1/c", 1996, 1, vec!["Ada Lovelace"]),
        ])
        .unwrap();
        let table = build_author_table(&corpus, &NicknameTable::empty());
        let seniorities = table.seniorities();
        assert_eq!(build_features(&corpus, &table, &seniorities, 0).months_since_epoch, 0);
        assert_eq!(build_features(&corpus, &table, &seniorities, 1).months_since_epoch, 2);
        assert_eq!(build_features(&corpus, &table, &seniorities, 2).months_since_epoch, 12);
    }

    #[test]
    fn sole_author_counts_for_both_roles() {
        let records: Vec<ArticleRecord> = (0..4)
            .map(|i| record(&format!("10.1/{i}"), 2000 + i, 1, vec!["Ada Lovelace"]))
            .collect();
        let corpus = Corpus::new(records).unwrap();
        let table = build_author_table(&corpus, &NicknameTable::empty());
        let seniorities = table.seniorities();
        let features = build_features(&corpus, &table, &seniorities, 0);
        assert_eq!(features.team_size, 1);
        assert_eq!(features.combined_seniority, 8);
    }

    #[test]
    fn intercept_only_fit_matches_empirical_frequencies() {
        let features = uniform_features(100);
        let labels = [(GenderCategory::Mm, 50), (GenderCategory::Wm, 30), (GenderCategory::Mw, 12), (GenderCategory::Ww, 8)];
        let data: Vec<(PaperFeatures, GenderCategory)> = labels
            .iter()
            .flat_map(|&(cat, n)| std::iter::repeat_n(cat, n))
            .zip(features)
            .map(|(cat, f)| (f, cat))
            .collect();
        let model = fit(&ModelSpec::default(), &data).unwrap();
        // All smooth terms constant → dropped; single journal; review
        // constant → intercept-only model.
        assert!(model.terms.iter().all(|t| t.kind == SmoothKind::Dropped));
        assert_eq!(model.coefficients.len(), 1);
        let probs = model.predict(&data[0].0).0;
        let expected = [0.50, 0.30, 0.12, 0.08];
        for c in 0..4 {
            assert_relative_eq!(probs[c], expected[c], epsilon = 1e-6);
        }
    }

    #[test]
    fn missing_categories_error_unless_allowed() {
        let data: Vec<(PaperFeatures, GenderCategory)> = uniform_features(30)
            .into_iter()
            .map(|f| (f, GenderCategory::Mm))
            .collect();
        match fit(&ModelSpec::default(), &data) {
            Err(ExpectationError::MissingCategories(msg)) => {
                assert_eq!(msg, "WM, MW, WW");
            }
            other => panic!("expected MissingCategories, got {other:?}"),
        }
        let spec = ModelSpec { allow_missing_categories: true, ..ModelSpec::default() };
        let model = fit(&spec, &data).unwrap();
        assert!(model.predict(&data[0].0).0[0] > 0.999);
    }

    #[test]
    fn unknown_training_category_is_rejected() {
        let data = vec![(uniform_features(1).pop().unwrap(), GenderCategory::Unknown)];
        assert!(matches!(
            fit(&ModelSpec::default(), &data),
            Err(ExpectationError::UnknownCategory { index: 0 })
        ));
    }

    fn trending_data(n: usize, seed: u64) -> Vec<(PaperFeatures, GenderCategory)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let months = (i % 200) as i32;
                let p_ww = 0.1 + 0.5 * months as f64 / 200.0;
                let rest = (1.0 - p_ww) / 3.0;
                let probs = CategoryProbabilities([rest, rest, rest, p_ww]);
                let cat = impute_unknown(GenderLabel::Unknown, GenderLabel::Unknown, &probs, &mut rng);
                let features = PaperFeatures {
                    months_since_epoch: months,
                    team_size: 2 + (i % 12) as u32,
                    combined_seniority: 5 + (i % 40) as u32,
                    journal: if i % 3 == 0 { "nn".into() } else { "jneuro".into() },
                    is_review: i % 11 == 0,
                    subfield: None,
                };
                (features, cat)
            })
            .collect()
    }

    #[test]
    fn rising_category_share_is_recovered_monotonically() {
        let data = trending_data(2000, 5);
        let spec = ModelSpec { lambda: LambdaChoice::Fixed(10.0), ..ModelSpec::default() };
        let model = fit(&spec, &data).unwrap();
        let probe = |months: i32| {
            model.predict(&PaperFeatures {
                months_since_epoch: months,
                team_size: 4,
                combined_seniority: 20,
                journal: "jneuro".to_string(),
                is_review: false,
                subfield: None,
            })
            .0[3]
        };
        let values: Vec<f64> = (1..=9).map(|k| probe(k * 20)).collect();
        for pair in values.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-3, "p_WW dipped: {values:?}");
        }
        assert!(values[8] > values[0] + 0.2, "trend too flat: {values:?}");
    }

    #[test]
    fn predictions_are_deterministic_and_normalized() {
        let data = trending_data(600, 9);
        let model = fit(&ModelSpec::default(), &data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..1000 {
            let f = PaperFeatures {
                months_since_epoch: rng.random_range(-50..400),
                team_size: rng.random_range(1..40),
                combined_seniority: rng.random_range(0..300),
                journal: ["jneuro", "nn", "mystery"][rng.random_range(0..3)].to_string(),
                is_review: rng.random::<bool>(),
                subfield: None,
            };
            let a = model.predict(&f).0;
            let b = model.predict(&f).0;
            assert_eq!(a, b);
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(a.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn unseen_journal_level_predicts_like_the_majority() {
        let data = trending_data(600, 2);
        let model = fit(&ModelSpec::default(), &data).unwrap();
        let mut f = PaperFeatures {
            months_since_epoch: 60,
            team_size: 4,
            combined_seniority: 18,
            journal: "jneuro".to_string(), // majority level (2 of 3 rows)
            is_review: false,
            subfield: None,
        };
        let baseline = model.predict(&f);
        f.journal = "never-seen".to_string();
        assert_eq!(model.predict(&f), baseline);
    }

    #[test]
    fn fit_is_invariant_to_affine_feature_rescaling() {
        let data = trending_data(800, 17);
        let rescaled: Vec<(PaperFeatures, GenderCategory)> = data
            .iter()
            .map(|(f, c)| {
                let mut f = f.clone();
                // Seniority enters the smooth as a float; scale it.
                f.combined_seniority = f.combined_seniority * 3 + 7;
                (f, *c)
            })
            .collect();
        let model_a = fit(&ModelSpec::default(), &data).unwrap();
        let model_b = fit(&ModelSpec::default(), &rescaled).unwrap();
        for (f, _) in data.iter().step_by(97) {
            let mut g = f.clone();
            g.combined_seniority = g.combined_seniority * 3 + 7;
            let pa = model_a.predict(f).0;
            let pb = model_b.predict(&g).0;
            for c in 0..4 {
                assert_relative_eq!(pa[c], pb[c], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn infinite_smoothing_collapses_to_categorical_model() {
        let data = trending_data(800, 31);
        let spec = ModelSpec { lambda: LambdaChoice::Fixed(1e10), ..ModelSpec::default() };
        let smooth_model = fit(&spec, &data).unwrap();
        // Reference: same labels, smooth features frozen to constants so
        // only the categorical covariates remain.
        let flat_data: Vec<(PaperFeatures, GenderCategory)> = data
            .iter()
            .map(|(f, c)| {
                let mut f = f.clone();
                f.months_since_epoch = 0;
                f.team_size = 1;
                f.combined_seniority = 0;
                (f, *c)
            })
            .collect();
        let flat_model = fit(&ModelSpec::default(), &flat_data).unwrap();
        for (f, _) in data.iter().step_by(131) {
            let mut g = f.clone();
            g.months_since_epoch = 0;
            g.team_size = 1;
            g.combined_seniority = 0;
            let pa = smooth_model.predict(f).0;
            let pb = flat_model.predict(&g).0;
            for c in 0..4 {
                assert_relative_eq!(pa[c], pb[c], epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn gcv_grid_returns_a_grid_value() {
        let data = trending_data(400, 41);
        let spec = ModelSpec { lambda: LambdaChoice::GcvGrid, ..ModelSpec::default() };
        let model = fit(&spec, &data).unwrap();
        let grid: Vec<f64> = (-3..=3).map(|e| 10f64.powi(e)).collect();
        assert!(grid.iter().any(|&l| (l - model.lambda).abs() < 1e-12));
        assert!(model.gcv.is_finite());
    }

    #[test]
    fn few_distinct_values_degrade_to_linear_then_dropped() {
        let mut features = uniform_features(60);
        for (i, f) in features.iter_mut().enumerate() {
            f.team_size = 1 + (i % 3) as u32; // 3 distinct values < 10
            f.months_since_epoch = (i % 30) as i32; // 30 distinct → spline
        }
        let data: Vec<(PaperFeatures, GenderCategory)> = features
            .into_iter()
            .enumerate()
            .map(|(i, f)| (f, GenderCategory::KNOWN[i % 4]))
            .collect();
        let model = fit(&ModelSpec::default(), &data).unwrap();
        let kind_of = |feat: SmoothFeature| {
            &model.terms.iter().find(|t| t.feature == feat).unwrap().kind
        };
        assert!(matches!(kind_of(SmoothFeature::Months), SmoothKind::Spline { .. }));
        assert!(matches!(kind_of(SmoothFeature::TeamSize), SmoothKind::Linear { .. }));
        assert_eq!(*kind_of(SmoothFeature::Seniority), SmoothKind::Dropped);
    }

    #[test]
    fn serialization_round_trips_and_rejects_other_schemas() {
        let data = trending_data(300, 53);
        let model = fit(&ModelSpec::default(), &data).unwrap();
        let json = model.to_json().unwrap();
        let restored = ExpectationModel::from_json(&json).unwrap();
        assert_eq!(model, restored);
        let tampered = json.replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
        assert!(matches!(
            ExpectationModel::from_json(&tampered),
            Err(ExpectationError::SchemaVersion { found: 99, expected: 1 })
        ));
    }

    #[test]
    fn random_draw_expectation_is_pool_proportions() {
        use GenderCategory::*;
        let pool = vec![Mm, Mm, Ww, Ww];
        assert_eq!(random_draws_expectation(&pool).unwrap().0, [0.5, 0.0, 0.0, 0.5]);
        assert_eq!(random_draws_expectation(&[Wm]).unwrap().0, [0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            random_draws_expectation(&[Unknown]),
            Err(ExpectationError::EmptyPool)
        ));
        assert!(matches!(random_draws_expectation(&[]), Err(ExpectationError::EmptyPool)));
    }

    #[test]
    fn imputation_renormalizes_over_compatible_categories() {
        let probs = CategoryProbabilities([0.4, 0.3, 0.2, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut wm = 0usize;
        let mut other = 0usize;
        for _ in 0..10_000 {
            match impute_unknown(GenderLabel::Woman, GenderLabel::Unknown, &probs, &mut rng) {
                GenderCategory::Wm => wm += 1,
                GenderCategory::Ww => other += 1,
                cat => panic!("incompatible draw {cat:?}"),
            }
        }
        let share = wm as f64 / (wm + other) as f64;
        assert!((share - 0.75).abs() < 0.02, "WM share {share}");
        let sure = CategoryProbabilities([1.0, 0.0, 0.0, 0.0]);
        for _ in 0..50 {
            assert_eq!(
                impute_unknown(GenderLabel::Unknown, GenderLabel::Unknown, &sure, &mut rng),
                GenderCategory::Mm
            );
        }
    }

    proptest! {
        // Imputed categories always respect the known author labels,
        // whatever the probability vector.
        #[test]
        fn imputation_respects_known_labels(
            raw in proptest::array::uniform4(0.0f64..1.0),
            first_known in proptest::option::of(proptest::bool::ANY),
            last_known in proptest::option::of(proptest::bool::ANY),
            seed in proptest::num::u64::ANY,
        ) {
            let to_label = |k: Option<bool>| match k {
                None => GenderLabel::Unknown,
                Some(true) => GenderLabel::Woman,
                Some(false) => GenderLabel::Man,
            };
            let first = to_label(first_known);
            let last = to_label(last_known);
            let probs = CategoryProbabilities(raw);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cat = impute_unknown(first, last, &probs, &mut rng);
            prop_assert!(cat.is_known());
            if first != GenderLabel::Unknown {
                prop_assert_eq!(cat.first_label(), first);
            }
            if last != GenderLabel::Unknown {
                prop_assert_eq!(cat.last_label(), last);
            }
        }
    }
}
