//! Observed-versus-expected citation accounting.
//!
//! Builds a [`Dataset`] of citing papers, their candidate citations and
//! per-paper category probabilities, then computes Δ (percent over- or
//! undercitation per cited category), yearly δ gaps, per-paper gaps and
//! trend slopes. Uncertainty comes from bootstrapping citing papers;
//! significance from a graph-preserving null that redraws cited
//! categories from their model probabilities while leaving every edge,
//! reference-list size and citing category untouched. Families of
//! statistics share Holm–Bonferroni adjustment.
//!
//! Bootstrap replicates and null randomizations are independent jobs
//! over an immutable dataset, each with its own deterministic random
//! stream, so parallel and sequential runs produce identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::authors::gender::PaperGender;
use crate::authors::{AuthorTable, GenderCategory, GenderLabel};
use crate::corpus::{CitationEdge, Corpus, SelfCiteDef, SelfCiteFlags};
use crate::expectation::{impute_unknown, CategoryProbabilities};
use crate::par;
use crate::stats;

pub const DEFAULT_BOOTSTRAP_REPLICATES: usize = 1_000;
pub const DEFAULT_NULL_RANDOMIZATIONS: usize = 10_000;

/// Stream id reserved for imputing the observed statistic, distinct
/// from every replicate stream.
const OBSERVED_IMPUTE_STREAM: u64 = u64::MAX;
/// Seed perturbation separating null randomizations from bootstrap
/// replicates that share a user-facing seed.
const NULL_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, thiserror::Error)]
pub enum ImbalanceError {
    #[error("no candidate citations under the requested options")]
    NoCandidates,
    #[error("need at least {needed} yearly points, found {found}")]
    TooFewYears { needed: usize, found: usize },
    #[error("resampling requires at least one replicate")]
    NoReplicates,
}

// ---------------------------------------------------------------------
// Self-citation flagging
// ---------------------------------------------------------------------

/// Fills in all four self-citation flags on every edge.
///
/// * `primary`: the cited first or last author is the citing first or
///   last author.
/// * `broad_citing`: the cited first or last author appears anywhere on
///   the citing byline.
/// * `broad_cited`: the citing first or last author appears anywhere on
///   the cited byline.
/// * `surname`: any folded family name is shared between the two
///   first/last author pairs (conservative sensitivity filter).
pub fn flag_self_citations(edges: &mut [CitationEdge], table: &AuthorTable) {
    for edge in edges.iter_mut() {
        let citing = edge.citing as usize;
        let cited = edge.cited as usize;
        let citing_ends = [table.first_author(citing), table.last_author(citing)];
        let cited_ends = [table.first_author(cited), table.last_author(cited)];
        let primary = cited_ends.iter().any(|id| citing_ends.contains(id));
        let broad_citing = cited_ends
            .iter()
            .any(|id| table.assignment[citing].contains(id));
        let broad_cited = citing_ends
            .iter()
            .any(|id| table.assignment[cited].contains(id));
        let surname = cited_ends.iter().any(|&c| {
            citing_ends
                .iter()
                .any(|&g| table.identity(g).family == table.identity(c).family)
        });
        edge.flags = SelfCiteFlags { primary, broad_citing, broad_cited, surname };
    }
}

// ---------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------

/// One candidate citation inside a [`Dataset`].
#[derive(Clone, Copy, Debug)]
pub struct DatasetEdge {
    /// Corpus record index of the cited paper.
    pub cited: u32,
    pub flags: SelfCiteFlags,
}

/// A citing paper and its contiguous slice of edges.
#[derive(Clone, Debug)]
pub struct CitingPaper {
    pub record: u32,
    pub year: i32,
    /// Citing-team category, fixed for every analysis (the null never
    /// redraws it).
    pub group: GenderCategory,
    pub start: u32,
    pub end: u32,
}

/// Immutable analysis input: the citation graph plus per-record
/// categories, author labels and model probabilities.
#[derive(Clone, Debug)]
pub struct Dataset {
    /// Observed category per corpus record.
    pub categories: Vec<GenderCategory>,
    /// First/last author labels per record (for partial-knowledge
    /// imputation).
    pub labels: Vec<(GenderLabel, GenderLabel)>,
    /// Model probabilities per record.
    pub probs: Vec<[f64; 4]>,
    /// DOI per record, for per-paper outputs.
    pub dois: Vec<String>,
    pub citing: Vec<CitingPaper>,
    pub edges: Vec<DatasetEdge>,
    /// Unique record indices appearing as cited papers.
    pub cited_records: Vec<u32>,
}

impl Dataset {
    /// Assembles a dataset from flagged edges, per-paper gender calls
    /// and model probabilities (both indexed like the corpus records).
    pub fn build(
        corpus: &Corpus,
        edges: &[CitationEdge],
        papers: &[PaperGender],
        probs: &[CategoryProbabilities],
    ) -> Dataset {
        assert_eq!(papers.len(), corpus.len());
        assert_eq!(probs.len(), corpus.len());
        let mut citing: Vec<CitingPaper> = Vec::new();
        let mut ds_edges = Vec::with_capacity(edges.len());
        for edge in edges {
            let is_new = citing
                .last()
                .map(|c: &CitingPaper| c.record != edge.citing)
                .unwrap_or(true);
            if is_new {
                let record = corpus.record(edge.citing as usize);
                citing.push(CitingPaper {
                    record: edge.citing,
                    year: record.pub_year,
                    group: papers[edge.citing as usize].category,
                    start: ds_edges.len() as u32,
                    end: ds_edges.len() as u32,
                });
            }
            ds_edges.push(DatasetEdge { cited: edge.cited, flags: edge.flags });
            citing.last_mut().expect("just pushed").end = ds_edges.len() as u32;
        }
        let mut cited_records: Vec<u32> = ds_edges.iter().map(|e| e.cited).collect();
        cited_records.sort_unstable();
        cited_records.dedup();
        Dataset {
            categories: papers.iter().map(|p| p.category).collect(),
            labels: papers.iter().map(|p| (p.first, p.last)).collect(),
            probs: probs.iter().map(|p| p.as_array()).collect(),
            dois: corpus.records().iter().map(|r| r.doi.clone()).collect(),
            citing,
            edges: ds_edges,
            cited_records,
        }
    }

    pub fn n_citing(&self) -> usize {
        self.citing.len()
    }

    pub fn edges_of(&self, paper: &CitingPaper) -> &[DatasetEdge] {
        &self.edges[paper.start as usize..paper.end as usize]
    }
}

// ---------------------------------------------------------------------
// Tally options and evaluation context
// ---------------------------------------------------------------------

/// Which citing teams contribute reference lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conditioning {
    All,
    Group(GenderCategory),
    /// Union of WM, MW and WW citing teams.
    AnyWoman,
}

impl Conditioning {
    pub fn admits(self, group: GenderCategory) -> bool {
        match self {
            Conditioning::All => true,
            Conditioning::Group(g) => group == g,
            Conditioning::AnyWoman => group.any_woman(),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Conditioning::All => "ALL",
            Conditioning::Group(g) => g.tag(),
            Conditioning::AnyWoman => "WuW",
        }
    }
}

/// How cited papers with unknown category are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum UnknownMode {
    /// Drop them from the candidate set (primary analysis).
    #[default]
    Exclude,
    /// Draw their category from the model, renormalized over whatever
    /// labels are known (sensitivity analysis; assumes the null).
    Impute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TallyOptions {
    pub conditioning: Conditioning,
    /// `None` keeps self-citations; `Some(def)` removes citations that
    /// are self-citations under that definition.
    pub self_def: Option<SelfCiteDef>,
}

impl Default for TallyOptions {
    fn default() -> Self {
        TallyOptions { conditioning: Conditioning::All, self_def: None }
    }
}

/// One view of the dataset: a category vector (observed, imputed or
/// null-redrawn) and optional citing-paper multiplicities from the
/// bootstrap.
pub struct EvalCtx<'a> {
    pub ds: &'a Dataset,
    pub cats: &'a [GenderCategory],
    pub weights: Option<&'a [u32]>,
}

impl<'a> EvalCtx<'a> {
    pub fn observed(ds: &'a Dataset) -> EvalCtx<'a> {
        EvalCtx { ds, cats: &ds.categories, weights: None }
    }

    pub fn weight(&self, citing_index: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[citing_index] as f64)
    }
}

// ---------------------------------------------------------------------
// Tallies and point statistics
// ---------------------------------------------------------------------

/// Observed counts and expected (probability-summed) counts per cited
/// category, over the same candidate citations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CitationTally {
    pub obs: [f64; 4],
    pub exp: [f64; 4],
}

impl CitationTally {
    /// Builds a tally directly from already-aggregated shares (or
    /// counts): useful for checking arithmetic against published
    /// aggregate proportions.
    pub fn from_shares(obs: [f64; 4], exp: [f64; 4]) -> CitationTally {
        CitationTally { obs, exp }
    }

    /// Number of candidate citations.
    pub fn total(&self) -> f64 {
        self.obs.iter().sum()
    }

    pub fn exp_total(&self) -> f64 {
        self.exp.iter().sum()
    }

    pub fn obs_share(&self, cat: GenderCategory) -> Option<f64> {
        let total = self.total();
        let i = cat.index()?;
        (total > 0.0).then(|| self.obs[i] / total)
    }

    pub fn exp_share(&self, cat: GenderCategory) -> Option<f64> {
        let total = self.exp_total();
        let i = cat.index()?;
        (total > 0.0).then(|| self.exp[i] / total)
    }

    /// Percent difference from expectation for one cited category:
    /// `(obs − exp) / exp × 100`. `None` when the expectation is zero.
    pub fn delta_percent(&self, cat: GenderCategory) -> Option<f64> {
        let i = cat.index()?;
        (self.exp[i] > 0.0).then(|| (self.obs[i] - self.exp[i]) / self.exp[i] * 100.0)
    }
}

/// Accumulates the tally for one dataset view under `opts`. Cited
/// papers whose category is unknown in `ctx.cats` contribute nothing
/// (imputation, when enabled, already resolved them upstream).
pub fn tally(ctx: &EvalCtx, opts: &TallyOptions) -> CitationTally {
    let mut out = CitationTally::default();
    for (i, paper) in ctx.ds.citing.iter().enumerate() {
        if !opts.conditioning.admits(paper.group) {
            continue;
        }
        let w = ctx.weight(i);
        if w == 0.0 {
            continue;
        }
        for edge in ctx.ds.edges_of(paper) {
            if opts.self_def.map_or(false, |def| edge.flags.is_self(def)) {
                continue;
            }
            let rec = edge.cited as usize;
            let Some(cat) = ctx.cats[rec].index() else { continue };
            out.obs[cat] += w;
            for (k, p) in ctx.ds.probs[rec].iter().enumerate() {
                out.exp[k] += w * p;
            }
        }
    }
    out
}

/// Yearly observed/expected gap for one cited category, in percentage
/// points of that year's candidate citations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YearlyOvercitation {
    pub year: i32,
    pub obs_total: f64,
    pub obs_group: f64,
    pub exp_group: f64,
    /// `(obs_group − exp_group) / obs_total × 100`.
    pub delta_points: f64,
}

/// Per-citing-year δ series for `cat`; years without candidate
/// citations are dropped with a warning.
pub fn yearly_overcitation(
    ctx: &EvalCtx,
    opts: &TallyOptions,
    cat: GenderCategory,
) -> Vec<YearlyOvercitation> {
    let Some(index) = cat.index() else { return Vec::new() };
    let mut years: Vec<i32> = ctx.ds.citing.iter().map(|c| c.year).collect();
    years.sort_unstable();
    years.dedup();
    let mut series = Vec::with_capacity(years.len());
    for year in years {
        let mut t = CitationTally::default();
        for (i, paper) in ctx.ds.citing.iter().enumerate() {
            if paper.year != year || !opts.conditioning.admits(paper.group) {
                continue;
            }
            let w = ctx.weight(i);
            for edge in ctx.ds.edges_of(paper) {
                if opts.self_def.map_or(false, |def| edge.flags.is_self(def)) {
                    continue;
                }
                let rec = edge.cited as usize;
                let Some(c) = ctx.cats[rec].index() else { continue };
                t.obs[c] += w;
                for (k, p) in ctx.ds.probs[rec].iter().enumerate() {
                    t.exp[k] += w * p;
                }
            }
        }
        let total = t.total();
        if total == 0.0 {
            log::warn!("dropping year {year}: no candidate citations");
            continue;
        }
        series.push(YearlyOvercitation {
            year,
            obs_total: total,
            obs_group: t.obs[index],
            exp_group: t.exp[index],
            delta_points: (t.obs[index] - t.exp[index]) / total * 100.0,
        });
    }
    series
}

/// Ordinary least-squares slope of the yearly δ series, in points per
/// year; optionally weighting years by their citation volume. `None`
/// with fewer than 3 usable years.
pub fn trend_slope(series: &[YearlyOvercitation], volume_weighted: bool) -> Option<f64> {
    if series.len() < 3 {
        return None;
    }
    let x: Vec<f64> = series.iter().map(|s| s.year as f64).collect();
    let y: Vec<f64> = series.iter().map(|s| s.delta_points).collect();
    let w: Vec<f64> = series.iter().map(|s| s.obs_total).collect();
    let weights = volume_weighted.then_some(w.as_slice());
    stats::ols_slope(&x, &y, weights).map(|(slope, _)| slope)
}

/// Observed/expected gap inside one paper's reference list, as a
/// proportion of its candidate citations (always in [−1, 1]).
#[derive(Clone, Debug, PartialEq)]
pub struct PaperOvercitation {
    pub record: u32,
    pub doi: String,
    pub obs_total: f64,
    pub obs_group: f64,
    pub exp_group: f64,
    /// `(obs_group − exp_group) / obs_total`, a proportion.
    pub delta: f64,
}

/// Per-paper δ for `cat` over citing papers admitted by the options;
/// papers with zero candidate citations are skipped.
pub fn paper_overcitation(
    ctx: &EvalCtx,
    opts: &TallyOptions,
    cat: GenderCategory,
) -> Vec<PaperOvercitation> {
    let Some(index) = cat.index() else { return Vec::new() };
    let mut out = Vec::new();
    for paper in &ctx.ds.citing {
        if !opts.conditioning.admits(paper.group) {
            continue;
        }
        let mut obs_total = 0.0;
        let mut obs_group = 0.0;
        let mut exp_group = 0.0;
        for edge in ctx.ds.edges_of(paper) {
            if opts.self_def.map_or(false, |def| edge.flags.is_self(def)) {
                continue;
            }
            let rec = edge.cited as usize;
            let Some(c) = ctx.cats[rec].index() else { continue };
            obs_total += 1.0;
            if c == index {
                obs_group += 1.0;
            }
            exp_group += ctx.ds.probs[rec][index];
        }
        if obs_total == 0.0 {
            continue;
        }
        out.push(PaperOvercitation {
            record: paper.record,
            doi: ctx.ds.dois[paper.record as usize].clone(),
            obs_total,
            obs_group,
            exp_group,
            delta: (obs_group - exp_group) / obs_total,
        });
    }
    out
}

/// Weighted median of per-paper δ in percentage points, weighting each
/// paper by its candidate citations times its resample multiplicity —
/// the same outcome and weights the overcitation regression uses.
pub fn median_points_stat(opts: TallyOptions, cat: GenderCategory) -> impl Statistic {
    move |ctx: &EvalCtx| {
        let index = cat.index()?;
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for (i, paper) in ctx.ds.citing.iter().enumerate() {
            if !opts.conditioning.admits(paper.group) {
                continue;
            }
            let multiplicity = ctx.weight(i);
            if multiplicity == 0.0 {
                continue;
            }
            let mut obs_total = 0.0;
            let mut obs_group = 0.0;
            let mut exp_group = 0.0;
            for edge in ctx.ds.edges_of(paper) {
                if opts.self_def.map_or(false, |def| edge.flags.is_self(def)) {
                    continue;
                }
                let rec = edge.cited as usize;
                let Some(c) = ctx.cats[rec].index() else { continue };
                obs_total += 1.0;
                if c == index {
                    obs_group += 1.0;
                }
                exp_group += ctx.ds.probs[rec][index];
            }
            if obs_total == 0.0 {
                continue;
            }
            values.push((obs_group - exp_group) / obs_total * 100.0);
            weights.push(obs_total * multiplicity);
        }
        stats::weighted_median(&values, &weights)
    }
}

// ---------------------------------------------------------------------
// Statistics as resamplable closures
// ---------------------------------------------------------------------

/// A scalar statistic over one dataset view. Returning `None` marks the
/// statistic undefined on that view (e.g. an empty conditioned set).
pub trait Statistic: Sync {
    fn eval(&self, ctx: &EvalCtx) -> Option<f64>;
}

impl<F> Statistic for F
where
    F: Fn(&EvalCtx) -> Option<f64> + Sync,
{
    fn eval(&self, ctx: &EvalCtx) -> Option<f64> {
        self(ctx)
    }
}

/// Δ in percent for one cited category.
pub fn delta_stat(opts: TallyOptions, cat: GenderCategory) -> impl Statistic {
    move |ctx: &EvalCtx| tally(ctx, &opts).delta_percent(cat)
}

/// Trend slope of the yearly δ series, points per year.
pub fn trend_stat(
    opts: TallyOptions,
    cat: GenderCategory,
    volume_weighted: bool,
) -> impl Statistic {
    move |ctx: &EvalCtx| trend_slope(&yearly_overcitation(ctx, &opts, cat), volume_weighted)
}

/// Median per-paper δ (a proportion); bootstrap weights multiply
/// papers, so the median is weight-aware.
pub fn median_paper_delta_stat(opts: TallyOptions, cat: GenderCategory) -> impl Statistic {
    move |ctx: &EvalCtx| {
        let index = cat.index()?;
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for (i, paper) in ctx.ds.citing.iter().enumerate() {
            if !opts.conditioning.admits(paper.group) {
                continue;
            }
            let w = ctx.weight(i);
            if w == 0.0 {
                continue;
            }
            let mut obs_total = 0.0;
            let mut obs_group = 0.0;
            let mut exp_group = 0.0;
            for edge in ctx.ds.edges_of(paper) {
                if opts.self_def.map_or(false, |def| edge.flags.is_self(def)) {
                    continue;
                }
                let rec = edge.cited as usize;
                let Some(c) = ctx.cats[rec].index() else { continue };
                obs_total += 1.0;
                if c == index {
                    obs_group += 1.0;
                }
                exp_group += ctx.ds.probs[rec][index];
            }
            if obs_total > 0.0 {
                values.push((obs_group - exp_group) / obs_total);
                weights.push(w);
            }
        }
        stats::weighted_median(&values, &weights)
    }
}

/// Candidate-citation count under `opts` (for reporting).
pub fn candidate_count(ctx: &EvalCtx, opts: &TallyOptions) -> f64 {
    tally(ctx, opts).total()
}

// ---------------------------------------------------------------------
// Resampling engine
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct ResampleOpts {
    pub bootstrap_replicates: usize,
    pub null_randomizations: usize,
    pub seed: u64,
    pub unknowns: UnknownMode,
}

impl Default for ResampleOpts {
    fn default() -> Self {
        ResampleOpts {
            bootstrap_replicates: DEFAULT_BOOTSTRAP_REPLICATES,
            null_randomizations: DEFAULT_NULL_RANDOMIZATIONS,
            seed: 0,
            unknowns: UnknownMode::Exclude,
        }
    }
}

/// Everything attached to one statistic by [`run_family`].
#[derive(Clone, Debug, PartialEq)]
pub struct StatisticResult {
    pub value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Extra bootstrap replicates drawn because the statistic was
    /// undefined on a resample.
    pub boot_redrawn: usize,
    /// Replicates abandoned after the redraw cap.
    pub boot_dropped: usize,
    pub p_raw: Option<f64>,
    pub p_holm: Option<f64>,
}

fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_category<R: Rng + ?Sized>(probs: &[f64; 4], rng: &mut R) -> GenderCategory {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        u -= p;
        if u <= 0.0 {
            return GenderCategory::from_index(i);
        }
    }
    GenderCategory::Ww
}

/// Resolves unknown cited categories by drawing from the model,
/// renormalized over categories compatible with the known labels.
fn impute_cats(ds: &Dataset, rng: &mut ChaCha8Rng) -> Vec<GenderCategory> {
    let mut cats = ds.categories.clone();
    for &rec in &ds.cited_records {
        let rec = rec as usize;
        if cats[rec] == GenderCategory::Unknown {
            let (first, last) = ds.labels[rec];
            let probs = CategoryProbabilities(ds.probs[rec]);
            cats[rec] = impute_unknown(first, last, &probs, rng);
        }
    }
    cats
}

/// One null randomization: every cited paper's category is redrawn
/// from its model probabilities. Under `Exclude`, unknown-category
/// papers stay unknown so the candidate set is bit-identical to the
/// observed analysis; under `Impute` they draw like the rest.
fn null_cats(ds: &Dataset, mode: UnknownMode, rng: &mut ChaCha8Rng) -> Vec<GenderCategory> {
    let mut cats = ds.categories.clone();
    for &rec in &ds.cited_records {
        let rec = rec as usize;
        if cats[rec].is_known() || mode == UnknownMode::Impute {
            cats[rec] = draw_category(&ds.probs[rec], rng);
        }
    }
    cats
}

/// The exact category vector null randomization `replicate` evaluates
/// on under `opts`. The dataset itself is never touched: edges,
/// reference-list slices and citing-team categories stay fixed, and
/// only the entries at cited records differ from the observed vector.
pub fn null_replicate_cats(
    ds: &Dataset,
    opts: &ResampleOpts,
    replicate: usize,
) -> Vec<GenderCategory> {
    let mut rng = replicate_rng(opts.seed.wrapping_add(NULL_SEED_SALT), replicate as u64);
    null_cats(ds, opts.unknowns, &mut rng)
}

/// The category vector the observed statistic is computed on: the
/// observed categories, or (in imputation mode) observed categories
/// with unknowns resolved once from a dedicated stream.
pub fn observed_cats(ds: &Dataset, opts: &ResampleOpts) -> Vec<GenderCategory> {
    match opts.unknowns {
        UnknownMode::Exclude => ds.categories.clone(),
        UnknownMode::Impute => {
            let mut rng = replicate_rng(opts.seed, OBSERVED_IMPUTE_STREAM);
            impute_cats(ds, &mut rng)
        }
    }
}

fn bootstrap_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut weights = vec![0u32; n];
    for _ in 0..n {
        weights[rng.random_range(0..n)] += 1;
    }
    weights
}

fn eval_bootstrap_replicate(
    ds: &Dataset,
    family: &[&dyn Statistic],
    opts: &ResampleOpts,
    stream: u64,
) -> Vec<Option<f64>> {
    let mut rng = replicate_rng(opts.seed, stream);
    let weights = bootstrap_weights(ds.n_citing(), &mut rng);
    let cats = match opts.unknowns {
        UnknownMode::Exclude => None,
        UnknownMode::Impute => Some(impute_cats(ds, &mut rng)),
    };
    let ctx = EvalCtx {
        ds,
        cats: cats.as_deref().unwrap_or(&ds.categories),
        weights: Some(&weights),
    };
    family.iter().map(|s| s.eval(&ctx)).collect()
}

/// Runs a family of statistics through the full pipeline: observed
/// values, percentile bootstrap CIs (resampling citing papers with
/// replacement, reference lists moving whole), null-model p-values and
/// Holm–Bonferroni adjustment across the family.
pub fn run_family(
    ds: &Dataset,
    family: &[&dyn Statistic],
    opts: &ResampleOpts,
) -> Result<Vec<StatisticResult>, ImbalanceError> {
    if opts.bootstrap_replicates == 0 || opts.null_randomizations == 0 {
        return Err(ImbalanceError::NoReplicates);
    }
    let b = opts.bootstrap_replicates;
    let r = opts.null_randomizations;
    let base_cats = observed_cats(ds, opts);
    let observed: Vec<Option<f64>> = {
        let ctx = EvalCtx { ds, cats: &base_cats, weights: None };
        family.iter().map(|s| s.eval(&ctx)).collect()
    };

    // Bootstrap: streams 0..B, then per-statistic redraw streams.
    let replicates: Vec<Vec<Option<f64>>> =
        par::indexed_map(b, |i| eval_bootstrap_replicate(ds, family, opts, i as u64));
    let mut results = Vec::with_capacity(family.len());
    for (s, stat) in family.iter().enumerate() {
        let mut values: Vec<f64> = Vec::with_capacity(b);
        let mut missing = 0usize;
        for rep in &replicates {
            match rep[s] {
                Some(v) => values.push(v),
                None => missing += 1,
            }
        }
        // Undefined replicates are redrawn from this statistic's own
        // reserved streams, capped at one extra pass of B draws.
        let mut redrawn = 0usize;
        let mut attempt = 0usize;
        while missing > 0 && attempt < b {
            let stream = b as u64 + (s as u64) * (b as u64) + attempt as u64;
            let rep = eval_bootstrap_replicate(ds, &[*stat], opts, stream);
            attempt += 1;
            redrawn += 1;
            if let Some(v) = rep[0] {
                values.push(v);
                missing -= 1;
            }
        }
        let (ci_low, ci_high) = if values.len() >= 2 {
            (
                stats::percentile(&values, 0.025),
                stats::percentile(&values, 0.975),
            )
        } else {
            (None, None)
        };
        results.push(StatisticResult {
            value: observed[s],
            ci_low,
            ci_high,
            boot_redrawn: redrawn,
            boot_dropped: missing,
            p_raw: None,
            p_holm: None,
        });
    }

    // Graph-preserving null: only cited categories are redrawn.
    let null_values: Vec<Vec<Option<f64>>> = par::indexed_map(r, |i| {
        let cats = null_replicate_cats(ds, opts, i);
        let ctx = EvalCtx { ds, cats: &cats, weights: None };
        family.iter().map(|s| s.eval(&ctx)).collect()
    });
    for (s, result) in results.iter_mut().enumerate() {
        let Some(obs) = result.value else { continue };
        let mut extreme = 0usize;
        for rep in &null_values {
            // An undefined null statistic counts as extreme, keeping
            // the p-value conservative.
            match rep[s] {
                Some(v) => {
                    if v.abs() >= obs.abs() {
                        extreme += 1;
                    }
                }
                None => extreme += 1,
            }
        }
        result.p_raw = Some((1 + extreme) as f64 / (r + 1) as f64);
    }

    // Holm–Bonferroni over the statistics that produced a p-value.
    let defined: Vec<usize> = (0..results.len())
        .filter(|&i| results[i].p_raw.is_some())
        .collect();
    let raw: Vec<f64> = defined
        .iter()
        .map(|&i| results[i].p_raw.expect("filtered"))
        .collect();
    for (&i, adj) in defined.iter().zip(stats::holm_bonferroni(&raw)) {
        results[i].p_holm = Some(adj);
    }
    Ok(results)
}

/// A vector-valued statistic whose components share one computation per
/// dataset view (e.g. regression coefficients from a single fit).
/// `None` marks the whole vector undefined on that view.
pub trait VectorStatistic: Sync {
    fn len(&self) -> usize;
    fn eval(&self, ctx: &EvalCtx) -> Option<Vec<f64>>;
}

/// Adapter turning a closure plus a fixed length into a
/// [`VectorStatistic`].
pub struct VectorFn<F> {
    pub len: usize,
    pub f: F,
}

impl<F> VectorStatistic for VectorFn<F>
where
    F: Fn(&EvalCtx) -> Option<Vec<f64>> + Sync,
{
    fn len(&self) -> usize {
        self.len
    }

    fn eval(&self, ctx: &EvalCtx) -> Option<Vec<f64>> {
        let out = (self.f)(ctx);
        debug_assert!(out.as_ref().map_or(true, |v| v.len() == self.len));
        out
    }
}

fn eval_vector_replicate(
    ds: &Dataset,
    stat: &dyn VectorStatistic,
    opts: &ResampleOpts,
    stream: u64,
) -> Option<Vec<f64>> {
    let mut rng = replicate_rng(opts.seed, stream);
    let weights = bootstrap_weights(ds.n_citing(), &mut rng);
    let cats = match opts.unknowns {
        UnknownMode::Exclude => None,
        UnknownMode::Impute => Some(impute_cats(ds, &mut rng)),
    };
    let ctx = EvalCtx {
        ds,
        cats: cats.as_deref().unwrap_or(&ds.categories),
        weights: Some(&weights),
    };
    stat.eval(&ctx)
}

/// [`run_family`] for one vector-valued statistic: same replicate
/// streams and p-value convention, with whole-vector redraws when a
/// resample leaves the statistic undefined and Holm–Bonferroni across
/// the components.
pub fn run_vector_family(
    ds: &Dataset,
    stat: &dyn VectorStatistic,
    opts: &ResampleOpts,
) -> Result<Vec<StatisticResult>, ImbalanceError> {
    if opts.bootstrap_replicates == 0 || opts.null_randomizations == 0 {
        return Err(ImbalanceError::NoReplicates);
    }
    let b = opts.bootstrap_replicates;
    let r = opts.null_randomizations;
    let width = stat.len();
    let base_cats = observed_cats(ds, opts);
    let observed = {
        let ctx = EvalCtx { ds, cats: &base_cats, weights: None };
        stat.eval(&ctx)
    };

    let mut replicates: Vec<Option<Vec<f64>>> =
        par::indexed_map(b, |i| eval_vector_replicate(ds, stat, opts, i as u64));
    let mut redrawn = 0usize;
    let mut attempt = 0usize;
    let mut missing = replicates.iter().filter(|v| v.is_none()).count();
    while missing > 0 && attempt < b {
        let stream = b as u64 + attempt as u64;
        let rep = eval_vector_replicate(ds, stat, opts, stream);
        attempt += 1;
        redrawn += 1;
        if rep.is_some() {
            replicates.push(rep);
            missing -= 1;
        }
    }

    let mut results = Vec::with_capacity(width);
    for component in 0..width {
        let values: Vec<f64> = replicates
            .iter()
            .filter_map(|rep| rep.as_ref().map(|v| v[component]))
            .collect();
        let (ci_low, ci_high) = if values.len() >= 2 {
            (
                stats::percentile(&values, 0.025),
                stats::percentile(&values, 0.975),
            )
        } else {
            (None, None)
        };
        results.push(StatisticResult {
            value: observed.as_ref().map(|v| v[component]),
            ci_low,
            ci_high,
            boot_redrawn: redrawn,
            boot_dropped: missing,
            p_raw: None,
            p_holm: None,
        });
    }

    let null_values: Vec<Option<Vec<f64>>> = par::indexed_map(r, |i| {
        let cats = null_replicate_cats(ds, opts, i);
        let ctx = EvalCtx { ds, cats: &cats, weights: None };
        stat.eval(&ctx)
    });
    for (component, result) in results.iter_mut().enumerate() {
        let Some(obs) = result.value else { continue };
        let mut extreme = 0usize;
        for rep in &null_values {
            match rep.as_ref().map(|v| v[component]) {
                Some(v) => {
                    if v.abs() >= obs.abs() {
                        extreme += 1;
                    }
                }
                None => extreme += 1,
            }
        }
        result.p_raw = Some((1 + extreme) as f64 / (r + 1) as f64);
    }

    let defined: Vec<usize> = (0..results.len())
        .filter(|&i| results[i].p_raw.is_some())
        .collect();
    let raw: Vec<f64> = defined
        .iter()
        .map(|&i| results[i].p_raw.expect("filtered"))
        .collect();
    for (&i, adj) in defined.iter().zip(stats::holm_bonferroni(&raw)) {
        results[i].p_holm = Some(adj);
    }
    Ok(results)
}

// ---------------------------------------------------------------------
// Authorship trend
// ---------------------------------------------------------------------

/// Slope (and record-bootstrap CI) of the yearly percentage of papers
/// with a woman first or last author.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrendEstimate {
    /// Percentage points per year.
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_years: usize,
}

fn weighted_authorship_slope(
    years: &[i32],
    cats: &[GenderCategory],
    weights: Option<&[u32]>,
) -> Option<(f64, usize)> {
    let mut by_year: std::collections::BTreeMap<i32, (f64, f64)> = std::collections::BTreeMap::new();
    for (i, (&year, &cat)) in years.iter().zip(cats).enumerate() {
        if !cat.is_known() {
            continue;
        }
        let w = weights.map_or(1.0, |w| w[i] as f64);
        let entry = by_year.entry(year).or_insert((0.0, 0.0));
        entry.0 += w;
        if cat.any_woman() {
            entry.1 += w;
        }
    }
    let points: Vec<(f64, f64)> = by_year
        .iter()
        .filter(|(_, (n, _))| *n > 0.0)
        .map(|(&y, &(n, w))| (y as f64, 100.0 * w / n))
        .collect();
    if points.len() < 3 {
        return None;
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    stats::ols_slope(&x, &y, None).map(|(slope, _)| (slope, points.len()))
}

/// Fits the authorship trend on `(year, category)` records, attaching a
/// percentile CI from `replicates` record-level bootstrap resamples.
pub fn authorship_trend(
    years: &[i32],
    cats: &[GenderCategory],
    replicates: usize,
    seed: u64,
) -> Result<TrendEstimate, ImbalanceError> {
    assert_eq!(years.len(), cats.len());
    let (slope, n_years) = weighted_authorship_slope(years, cats, None)
        .ok_or(ImbalanceError::TooFewYears { needed: 3, found: 0 })?;
    if replicates == 0 {
        return Err(ImbalanceError::NoReplicates);
    }
    let n = years.len();
    let values: Vec<Option<f64>> = par::indexed_map(replicates, |i| {
        let mut rng = replicate_rng(seed, i as u64);
        let weights = bootstrap_weights(n, &mut rng);
        weighted_authorship_slope(years, cats, Some(&weights)).map(|(s, _)| s)
    });
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    let ci_low = stats::percentile(&defined, 0.025).unwrap_or(slope);
    let ci_high = stats::percentile(&defined, 0.975).unwrap_or(slope);
    Ok(TrendEstimate { slope, ci_low, ci_high, n_years })
}
