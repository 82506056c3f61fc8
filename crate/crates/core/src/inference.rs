//! Weighted quantile (median) regression of per-paper overcitation on
//! team category and neighborhood composition, with a least-squares
//! sensitivity mode.
//!
//! The quantile fit minimizes the weighted check loss
//! `Σ wᵢ ρ_τ(yᵢ − xᵢᵀβ)` exactly, by running a bounded-variable
//! primal simplex on the dual program
//!
//! ```text
//! maximize  Σ aᵢ yᵢ   subject to   Σ aᵢ xᵢ = 0,
//!           aᵢ ∈ [−(1−τ)·wᵢ, τ·wᵢ]
//! ```
//!
//! whose constraint multipliers at the optimum are the regression
//! coefficients (the fitted hyperplane interpolates the observations
//! indexed by the final basis). Confidence intervals and p-values
//! reuse the resampling engine: one refit per bootstrap replicate and
//! per null randomization.

use nalgebra::{DMatrix, DVector};

use crate::authors::GenderCategory;
use crate::imbalance::{
    observed_cats, run_vector_family, Dataset, EvalCtx, ImbalanceError, ResampleOpts,
    StatisticResult, TallyOptions, VectorStatistic,
};
use crate::network::NeighborhoodStats;

/// Column order of the regression design: one indicator per citing
/// category (no reference level) and the two composition regressors.
pub const REGRESSION_TERMS: [&str; 6] =
    ["mm_team", "wm_team", "mw_team", "ww_team", "ma_or", "mmp_or"];

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("quantile must lie strictly between 0 and 1, got {0}")]
    InvalidQuantile(f64),
    #[error("no observations with positive weight")]
    NoData,
    #[error("no {} citing papers with positive weight", .0.tag())]
    MissingCategory(GenderCategory),
    #[error("design matrix is rank deficient on the weighted sample")]
    RankDeficient,
    #[error("solver failed to converge: {0}")]
    Numerical(&'static str),
    #[error(transparent)]
    Resample(#[from] ImbalanceError),
}

// ---------------------------------------------------------------------
// Check loss and least squares
// ---------------------------------------------------------------------

/// Weighted check loss `Σ wᵢ ρ_τ(yᵢ − xᵢᵀβ)` with
/// `ρ_τ(u) = u·(τ − 1[u<0])`.
pub fn check_loss(x: &DMatrix<f64>, y: &[f64], w: &[f64], tau: f64, beta: &[f64]) -> f64 {
    let mut loss = 0.0;
    for i in 0..x.nrows() {
        let mut fit = 0.0;
        for k in 0..x.ncols() {
            fit += x[(i, k)] * beta[k];
        }
        let r = y[i] - fit;
        loss += w[i] * r * (tau - if r < 0.0 { 1.0 } else { 0.0 });
    }
    loss
}

/// Weighted least squares via the normal equations.
pub fn weighted_least_squares(
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
) -> Result<Vec<f64>, InferenceError> {
    let (n, p) = (x.nrows(), x.ncols());
    if n == 0 || p == 0 || !w.iter().any(|&wi| wi > 0.0) {
        return Err(InferenceError::NoData);
    }
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        for r in 0..p {
            let wr = w[i] * x[(i, r)];
            xtwy[r] += wr * y[i];
            for c in r..p {
                xtwx[(r, c)] += wr * x[(i, c)];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            xtwx[(r, c)] = xtwx[(c, r)];
        }
    }
    let chol = xtwx.cholesky().ok_or(InferenceError::RankDeficient)?;
    Ok(chol.solve(&xtwy).iter().copied().collect())
}

// ---------------------------------------------------------------------
// Exact quantile regression (bounded-variable simplex on the dual)
// ---------------------------------------------------------------------

/// Final simplex state, reusable to hot-start the next fit on the same
/// rows (e.g. a null refit where only the outcome changed).
#[derive(Clone, Debug)]
pub struct WarmStart {
    basis: Vec<usize>,
    upper: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct QuantileFit {
    pub beta: Vec<f64>,
    /// Weighted check loss at `beta`.
    pub objective: f64,
    pub iterations: usize,
    pub warm: WarmStart,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic,
    Lower,
    Upper,
}

/// Bounded-variable simplex over `n` dual variables `tⱼ ∈ [0, wⱼ]`
/// (shifted from `aⱼ` by the lower bound) plus `p` artificials used to
/// reach an initial basic feasible point.
struct Simplex<'a> {
    x: &'a DMatrix<f64>,
    n: usize,
    p: usize,
    u: Vec<f64>,
    art_sign: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    b: DVector<f64>,
    b_eff: DVector<f64>,
    cursor: usize,
    bland: bool,
    stall: usize,
    toggles: usize,
}

/// Pivots consumed before switching to Bland's rule (anti-cycling).
const STALL_LIMIT: usize = 60;
/// Candidates examined per partial-pricing window.
const PRICE_WINDOW: usize = 512;

impl<'a> Simplex<'a> {
    fn new(x: &'a DMatrix<f64>, w: &[f64], tau: f64) -> Simplex<'a> {
        let (n, p) = (x.nrows(), x.ncols());
        let mut b = DVector::<f64>::zeros(p);
        for i in 0..n {
            let scale = (1.0 - tau) * w[i];
            for k in 0..p {
                b[k] += scale * x[(i, k)];
            }
        }
        let art_sign: Vec<f64> = (0..p).map(|k| if b[k] < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut state = vec![VarState::Lower; n + p];
        let basis: Vec<usize> = (n..n + p).collect();
        for &j in &basis {
            state[j] = VarState::Basic;
        }
        Simplex {
            x,
            n,
            p,
            u: w.to_vec(),
            art_sign,
            state,
            basis,
            b_eff: b.clone(),
            b,
            cursor: 0,
            bland: false,
            stall: 0,
            toggles: 0,
        }
    }

    fn add_col(&self, j: usize, scale: f64, out: &mut DVector<f64>) {
        if j < self.n {
            for k in 0..self.p {
                out[k] += scale * self.x[(j, k)];
            }
        } else {
            out[j - self.n] += scale * self.art_sign[j - self.n];
        }
    }

    fn bump_b_eff(&mut self, j: usize, scale: f64) {
        if j < self.n {
            for k in 0..self.p {
                self.b_eff[k] += scale * self.x[(j, k)];
            }
        } else {
            self.b_eff[j - self.n] += scale * self.art_sign[j - self.n];
        }
    }

    fn column(&self, j: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.p);
        self.add_col(j, 1.0, &mut out);
        out
    }

    /// `b` minus the contribution of every nonbasic variable sitting at
    /// its upper bound; recomputed from scratch to cap drift.
    fn rebuild_b_eff(&mut self) {
        self.b_eff = self.b.clone();
        for j in 0..self.n {
            if self.state[j] == VarState::Upper {
                let scale = -self.u[j];
                for k in 0..self.p {
                    self.b_eff[k] += scale * self.x[(j, k)];
                }
            }
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let mut bm = DMatrix::<f64>::zeros(self.p, self.p);
        for (slot, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                for k in 0..self.p {
                    bm[(k, slot)] = self.x[(j, k)];
                }
            } else {
                bm[(j - self.n, slot)] = self.art_sign[j - self.n];
            }
        }
        bm
    }

    fn cost(&self, j: usize, c: &[f64], phase1: bool) -> f64 {
        if j < self.n {
            if phase1 {
                0.0
            } else {
                c[j]
            }
        } else if phase1 {
            -1.0
        } else {
            0.0
        }
    }

    fn multipliers(
        &self,
        bm: &DMatrix<f64>,
        c: &[f64],
        phase1: bool,
    ) -> Result<DVector<f64>, InferenceError> {
        let cb = DVector::from_iterator(
            self.p,
            self.basis.iter().map(|&j| self.cost(j, c, phase1)),
        );
        bm.transpose()
            .lu()
            .solve(&cb)
            .ok_or(InferenceError::Numerical("singular basis (multipliers)"))
    }

    fn reduced_cost(&self, j: usize, pi: &DVector<f64>, c: &[f64], phase1: bool) -> f64 {
        let mut dot = 0.0;
        for k in 0..self.p {
            dot += self.x[(j, k)] * pi[k];
        }
        self.cost(j, c, phase1) - dot
    }

    /// Entering-variable search: Bland (first eligible by index) when
    /// anti-cycling, otherwise rotating partial pricing under the
    /// largest-violation rule. Artificials and fixed (zero-width)
    /// variables never enter.
    fn price(&mut self, pi: &DVector<f64>, c: &[f64], phase1: bool, tol: f64) -> Option<usize> {
        if self.bland {
            return (0..self.n).find(|&j| {
                self.state[j] != VarState::Basic && self.u[j] > 0.0 && {
                    let cbar = self.reduced_cost(j, pi, c, phase1);
                    (self.state[j] == VarState::Lower && cbar > tol)
                        || (self.state[j] == VarState::Upper && cbar < -tol)
                }
            });
        }
        let start = self.cursor % self.n;
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0usize;
        let mut j = start;
        loop {
            if self.state[j] != VarState::Basic && self.u[j] > 0.0 {
                let cbar = self.reduced_cost(j, pi, c, phase1);
                let violation = match self.state[j] {
                    VarState::Lower if cbar > tol => cbar,
                    VarState::Upper if cbar < -tol => -cbar,
                    _ => 0.0,
                };
                if violation > 0.0 && best.map_or(true, |(_, v)| violation > v) {
                    best = Some((j, violation));
                }
            }
            scanned += 1;
            j = (j + 1) % self.n;
            if j == start {
                break;
            }
            if best.is_some() && scanned % PRICE_WINDOW == 0 {
                break;
            }
        }
        self.cursor = j;
        best.map(|(e, _)| e)
    }

    /// One phase of the simplex; `c` is the per-observation objective
    /// (ignored in phase 1, which minimizes total artificial mass).
    fn optimize(
        &mut self,
        c: &[f64],
        phase1: bool,
        budget: &mut usize,
    ) -> Result<(), InferenceError> {
        loop {
            if *budget == 0 {
                return Err(InferenceError::Numerical("pivot budget exhausted"));
            }
            *budget -= 1;
            let bm = self.basis_matrix();
            let lu = bm.clone().lu();
            let t_b = lu
                .solve(&self.b_eff)
                .ok_or(InferenceError::Numerical("singular basis (values)"))?;
            let pi = self.multipliers(&bm, c, phase1)?;
            let cost_scale = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tol = 1e-9 * cost_scale;
            let Some(e) = self.price(&pi, c, phase1, tol) else {
                return Ok(());
            };
            let d = lu
                .solve(&self.column(e))
                .ok_or(InferenceError::Numerical("singular basis (direction)"))?;
            let from_lower = self.state[e] == VarState::Lower;
            let dir = if from_lower { 1.0 } else { -1.0 };
            let piv_tol = 1e-9 * (1.0 + d.amax());

            // Ratio test: basic values move as t_B(Δ) = t_B − dir·Δ·d.
            let flip_cap = self.u[e];
            let mut leaving: Option<(usize, bool, f64, f64)> = None;
            for slot in 0..self.p {
                let step = dir * d[slot];
                let v = self.basis[slot];
                let (limit, at_upper) = if step > piv_tol {
                    (t_b[slot].max(0.0) / step, false)
                } else if step < -piv_tol {
                    let upper = if v < self.n { self.u[v] } else { f64::INFINITY };
                    if upper.is_infinite() {
                        continue;
                    }
                    ((upper - t_b[slot]).max(0.0) / -step, true)
                } else {
                    continue;
                };
                let replace = match leaving {
                    None => true,
                    Some((held_slot, _, held, _)) => {
                        let tie = 1e-11 * (1.0 + held.abs());
                        if limit < held - tie {
                            true
                        } else if limit > held + tie {
                            false
                        } else if self.bland {
                            v < self.basis[held_slot]
                        } else {
                            // Prefer expelling artificials, then the
                            // largest pivot element for stability.
                            let held_art = self.basis[held_slot] >= self.n;
                            let cand_art = v >= self.n;
                            cand_art && !held_art
                                || (cand_art == held_art
                                    && step.abs() > leaving.map_or(0.0, |l| l.3))
                        }
                    }
                };
                if replace {
                    leaving = Some((slot, at_upper, limit, step.abs()));
                }
            }

            let pivot = leaving.filter(|&(_, _, limit, _)| {
                limit <= flip_cap + 1e-11 * (1.0 + flip_cap)
            });
            match pivot {
                Some((slot, at_upper, limit, _)) => {
                    let leaving_var = self.basis[slot];
                    self.state[leaving_var] =
                        if at_upper { VarState::Upper } else { VarState::Lower };
                    if at_upper {
                        // Real by construction: artificials are unbounded.
                        self.bump_b_eff(leaving_var, -self.u[leaving_var]);
                        self.toggles += 1;
                    }
                    if self.state[e] == VarState::Upper {
                        self.bump_b_eff(e, self.u[e]);
                        self.toggles += 1;
                    }
                    self.basis[slot] = e;
                    self.state[e] = VarState::Basic;
                    if limit <= 1e-10 {
                        self.stall += 1;
                        if self.stall > STALL_LIMIT {
                            self.bland = true;
                        }
                    } else {
                        self.stall = 0;
                        self.bland = false;
                    }
                }
                None => {
                    // Bound flip: the entering variable crosses to its
                    // other bound without a basis change.
                    if from_lower {
                        self.bump_b_eff(e, -self.u[e]);
                        self.state[e] = VarState::Upper;
                    } else {
                        self.bump_b_eff(e, self.u[e]);
                        self.state[e] = VarState::Lower;
                    }
                    self.toggles += 1;
                    self.stall = 0;
                    self.bland = false;
                }
            }
            if self.toggles >= 1024 {
                self.toggles = 0;
                self.rebuild_b_eff();
            }
        }
    }

    /// Degenerate pivots replacing any artificial still in the basis
    /// after phase 1; failure means the constraint rows (design
    /// columns) are linearly dependent on the weighted sample.
    fn expel_artificials(&mut self, budget: &mut usize) -> Result<(), InferenceError> {
        loop {
            let Some(slot) = self.basis.iter().position(|&j| j >= self.n) else {
                return Ok(());
            };
            if *budget == 0 {
                return Err(InferenceError::Numerical("pivot budget exhausted"));
            }
            *budget -= 1;
            let lu = self.basis_matrix().lu();
            let mut replaced = false;
            for j in 0..self.n {
                if self.state[j] == VarState::Basic || self.u[j] <= 0.0 {
                    continue;
                }
                let d = lu
                    .solve(&self.column(j))
                    .ok_or(InferenceError::Numerical("singular basis (expulsion)"))?;
                if d[slot].abs() > 1e-7 {
                    if self.state[j] == VarState::Upper {
                        self.bump_b_eff(j, self.u[j]);
                    }
                    let artificial = self.basis[slot];
                    self.state[artificial] = VarState::Lower;
                    self.basis[slot] = j;
                    self.state[j] = VarState::Basic;
                    replaced = true;
                    break;
                }
            }
            if !replaced {
                return Err(InferenceError::RankDeficient);
            }
        }
    }

    fn basic_artificial_mass(&self) -> Result<f64, InferenceError> {
        let lu = self.basis_matrix().lu();
        let t_b = lu
            .solve(&self.b_eff)
            .ok_or(InferenceError::Numerical("singular basis (mass)"))?;
        Ok(self
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &j)| j >= self.n)
            .map(|(slot, _)| t_b[slot].abs())
            .sum())
    }

    /// Installs a previous solution's basis and bound pattern, checking
    /// primal feasibility; returns false (leaving the cold-start state
    /// untouched) when the hint no longer fits.
    fn try_warm_start(&mut self, warm: &WarmStart) -> bool {
        if warm.upper.len() != self.n
            || warm.basis.len() != self.p
            || warm.basis.iter().any(|&j| j >= self.n)
        {
            return false;
        }
        let mut seen = vec![false; self.n];
        for &j in &warm.basis {
            if seen[j] {
                return false;
            }
            seen[j] = true;
        }
        let mut state = vec![VarState::Lower; self.n + self.p];
        for (j, &up) in warm.upper.iter().enumerate() {
            if up && self.u[j] > 0.0 {
                state[j] = VarState::Upper;
            }
        }
        for &j in &warm.basis {
            state[j] = VarState::Basic;
        }
        let saved = (
            std::mem::replace(&mut self.state, state),
            std::mem::replace(&mut self.basis, warm.basis.clone()),
        );
        self.rebuild_b_eff();
        let feasible = self
            .basis_matrix()
            .lu()
            .solve(&self.b_eff)
            .map_or(false, |t_b| {
                let tol = 1e-7 * (1.0 + self.u.iter().fold(0.0f64, |m, &v| m.max(v)));
                self.basis.iter().enumerate().all(|(slot, &j)| {
                    t_b[slot] >= -tol && t_b[slot] <= self.u[j] + tol
                })
            });
        if !feasible {
            self.state = saved.0;
            self.basis = saved.1;
            self.rebuild_b_eff();
        }
        feasible
    }
}

/// Exact weighted quantile regression. `warm`, when given and still
/// compatible with the row set, hot-starts the solve from a previous
/// optimum.
pub fn weighted_quantile_fit(
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    tau: f64,
    warm: Option<&WarmStart>,
) -> Result<QuantileFit, InferenceError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(InferenceError::InvalidQuantile(tau));
    }
    let (n, p) = (x.nrows(), x.ncols());
    assert_eq!(y.len(), n);
    assert_eq!(w.len(), n);
    if n == 0 || p == 0 || !w.iter().any(|&wi| wi > 0.0) {
        return Err(InferenceError::NoData);
    }
    if w.iter().any(|&wi| wi < 0.0) {
        return Err(InferenceError::Numerical("negative weight"));
    }

    let mut simplex = Simplex::new(x, w, tau);
    let mut budget = 400 * (n + p) + 10_000;
    let started_warm = warm.map_or(false, |h| simplex.try_warm_start(h));
    if !started_warm {
        simplex.optimize(y, true, &mut budget)?;
        let mass = simplex.basic_artificial_mass()?;
        let scale = 1.0 + simplex.b.amax();
        if mass > 1e-7 * scale {
            return Err(InferenceError::Numerical("phase 1 left residual mass"));
        }
        simplex.expel_artificials(&mut budget)?;
    }
    simplex.optimize(y, false, &mut budget)?;

    let bm = simplex.basis_matrix();
    let pi = simplex.multipliers(&bm, y, false)?;
    let beta: Vec<f64> = pi.iter().copied().collect();
    let objective = check_loss(x, y, w, tau, &beta);
    let iterations = 400 * (n + p) + 10_000 - budget;
    let warm_out = WarmStart {
        basis: simplex.basis.clone(),
        upper: (0..n).map(|j| simplex.state[j] == VarState::Upper).collect(),
    };
    Ok(QuantileFit { beta, objective, iterations, warm: warm_out })
}

// ---------------------------------------------------------------------
// Regression rows from a dataset view
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub enum Estimator {
    Quantile,
    LeastSquares,
}

#[derive(Clone, Copy, Debug)]
pub struct RegressionSpec {
    pub tau: f64,
    pub estimator: Estimator,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        RegressionSpec { tau: 0.5, estimator: Estimator::Quantile }
    }
}

/// One citing paper prepared for the regression. Everything is in
/// percentage points: the outcome is `δ_p × 100`, and the composition
/// regressors are point differences from the field baseline.
#[derive(Clone, Debug)]
pub struct RegressionRow {
    pub citing_index: usize,
    pub group: GenderCategory,
    pub delta_points: f64,
    /// Candidate-citation count times the bootstrap multiplicity; zero
    /// freezes the row out of the fit without disturbing row indexing.
    pub weight: f64,
    pub ma_or: f64,
    pub mmp_or: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RowSummary {
    pub rows: Vec<RegressionRow>,
    /// Admitted citing papers skipped for lack of neighborhood stats.
    pub excluded_no_stats: usize,
    /// Admitted citing papers skipped for an unknown team category.
    pub excluded_unknown_group: usize,
}

/// Joins per-paper MM overcitation with neighborhood composition. The
/// row set (and its order) depends only on fixed structure — never on
/// weights or redrawn categories — so a warm start carries across
/// replicates.
pub fn regression_rows(
    ctx: &EvalCtx,
    opts: &TallyOptions,
    stats: &[Option<NeighborhoodStats>],
) -> RowSummary {
    let outcome = GenderCategory::Mm.index().expect("known category");
    let mut summary = RowSummary::default();
    for (i, paper) in ctx.ds.citing.iter().enumerate() {
        if !opts.conditioning.admits(paper.group) {
            continue;
        }
        if paper.group.index().is_none() {
            summary.excluded_unknown_group += 1;
            continue;
        }
        let Some(Some(neighborhood)) = stats.get(paper.record as usize) else {
            summary.excluded_no_stats += 1;
            continue;
        };
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
            if c == outcome {
                obs_group += 1.0;
            }
            exp_group += ctx.ds.probs[rec][outcome];
        }
        let delta_points = if obs_total > 0.0 {
            (obs_group - exp_group) / obs_total * 100.0
        } else {
            0.0
        };
        summary.rows.push(RegressionRow {
            citing_index: i,
            group: paper.group,
            delta_points,
            weight: obs_total * ctx.weight(i),
            ma_or: neighborhood.ma_or * 100.0,
            mmp_or: neighborhood.mmp_or * 100.0,
        });
    }
    summary
}

/// Design matrix, outcome and weights in [`REGRESSION_TERMS`] order.
pub fn design_from_rows(rows: &[RegressionRow]) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let mut x = DMatrix::<f64>::zeros(n, 6);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        let g = row.group.index().expect("known group");
        x[(i, g)] = 1.0;
        x[(i, 4)] = row.ma_or;
        x[(i, 5)] = row.mmp_or;
        y.push(row.delta_points);
        w.push(row.weight);
    }
    (x, y, w)
}

#[derive(Clone, Debug)]
pub struct PlainFit {
    /// One coefficient per [`REGRESSION_TERMS`] entry.
    pub coefficients: Vec<f64>,
    /// Check loss (quantile) or weighted squared error (least squares).
    pub objective: f64,
    pub warm: Option<WarmStart>,
}

/// Fits one set of rows. Every citing category must appear with
/// positive weight, otherwise its indicator column is degenerate.
pub fn fit_rows(
    rows: &[RegressionRow],
    spec: RegressionSpec,
    warm: Option<&WarmStart>,
) -> Result<PlainFit, InferenceError> {
    if rows.is_empty() {
        return Err(InferenceError::NoData);
    }
    for cat in GenderCategory::KNOWN {
        if !rows.iter().any(|r| r.group == cat && r.weight > 0.0) {
            return Err(InferenceError::MissingCategory(cat));
        }
    }
    let (x, y, w) = design_from_rows(rows);
    match spec.estimator {
        Estimator::Quantile => {
            let fit = weighted_quantile_fit(&x, &y, &w, spec.tau, warm)?;
            Ok(PlainFit {
                coefficients: fit.beta,
                objective: fit.objective,
                warm: Some(fit.warm),
            })
        }
        Estimator::LeastSquares => {
            let beta = weighted_least_squares(&x, &y, &w)?;
            let mut sse = 0.0;
            for i in 0..rows.len() {
                let mut fit = 0.0;
                for k in 0..6 {
                    fit += x[(i, k)] * beta[k];
                }
                sse += w[i] * (y[i] - fit) * (y[i] - fit);
            }
            Ok(PlainFit { coefficients: beta, objective: sse, warm: None })
        }
    }
}

// ---------------------------------------------------------------------
// Resampled inference
// ---------------------------------------------------------------------

/// The regression as a vector statistic: one fit per dataset view
/// yields all six coefficients. The warm start is frozen at
/// construction (from the observed fit) so every replicate's pivot
/// path — and therefore the output — is deterministic.
pub struct RegressionStatistic<'a> {
    stats: &'a [Option<NeighborhoodStats>],
    opts: TallyOptions,
    spec: RegressionSpec,
    warm: Option<WarmStart>,
}

impl<'a> RegressionStatistic<'a> {
    pub fn new(
        ds: &Dataset,
        stats: &'a [Option<NeighborhoodStats>],
        opts: TallyOptions,
        spec: RegressionSpec,
    ) -> RegressionStatistic<'a> {
        let summary = regression_rows(&EvalCtx::observed(ds), &opts, stats);
        let warm = fit_rows(&summary.rows, spec, None)
            .ok()
            .and_then(|fit| fit.warm);
        RegressionStatistic { stats, opts, spec, warm }
    }
}

impl VectorStatistic for RegressionStatistic<'_> {
    fn len(&self) -> usize {
        REGRESSION_TERMS.len()
    }

    fn eval(&self, ctx: &EvalCtx) -> Option<Vec<f64>> {
        let summary = regression_rows(ctx, &self.opts, self.stats);
        let fit = fit_rows(&summary.rows, self.spec, self.warm.as_ref()).ok()?;
        Some(fit.coefficients)
    }
}

/// Full inference output for one regression run.
#[derive(Clone, Debug)]
pub struct RegressionReport {
    pub spec: RegressionSpec,
    /// Aligned with [`REGRESSION_TERMS`].
    pub terms: Vec<StatisticResult>,
    /// Objective of the observed fit (`None` if it failed).
    pub objective: Option<f64>,
    /// Rows with positive weight in the observed fit.
    pub n_rows: usize,
    pub excluded_no_stats: usize,
    pub excluded_unknown_group: usize,
}

/// Point estimates, bootstrap CIs and null p-values (Holm-adjusted
/// across the six terms) for the overcitation regression.
pub fn run_regression(
    ds: &Dataset,
    stats: &[Option<NeighborhoodStats>],
    opts: TallyOptions,
    spec: RegressionSpec,
    resample: &ResampleOpts,
) -> Result<RegressionReport, InferenceError> {
    let stat = RegressionStatistic::new(ds, stats, opts, spec);
    let terms = run_vector_family(ds, &stat, resample)?;
    let base_cats = observed_cats(ds, resample);
    let ctx = EvalCtx { ds, cats: &base_cats, weights: None };
    let summary = regression_rows(&ctx, &opts, stats);
    let objective = fit_rows(&summary.rows, spec, stat.warm.as_ref())
        .ok()
        .map(|fit| fit.objective);
    Ok(RegressionReport {
        spec,
        terms,
        objective,
        n_rows: summary.rows.iter().filter(|r| r.weight > 0.0).count(),
        excluded_no_stats: summary.excluded_no_stats,
        excluded_unknown_group: summary.excluded_unknown_group,
    })
}

/// Fitted median overcitation for one citing category at zero local
/// overrepresentation (the category's indicator coefficient).
pub fn conditional_overcitation(
    report: &RegressionReport,
    group: GenderCategory,
) -> Option<&StatisticResult> {
    report.terms.get(group.index()?)
}
