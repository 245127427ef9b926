//! Max-min-fair precoder design under imperfect CSIT.
//!
//! The ergodic problem is replaced by a sample average over CSIT-error draws
//! `H_s = H^ + H~_s` and solved by successive convex approximation. Around the
//! current iterate each averaged rate `log2(1 + |a|^2 / b)` (signal `a`,
//! interference-plus-noise `b`) is bounded below by the concave minorant
//!
//! ```text
//! ln(1 + |a0|^2/b0) - |a0|^2/b0 + 2 Re(a0* a)/b0 - |a0|^2 (|a|^2 + b) / (b0 (b0 + |a0|^2))
//! ```
//!
//! which is tight at the iterate. Averaged over samples it becomes
//! `const + Re(v^H p_sig) - sum_j p_j^H Q p_j`, a rotated second-order cone.
//! Each subproblem maximizes `t` subject to
//!
//! - `sum_m C_m <= R~_{c,k}` for every user (RSMA only),
//! - `t <= C_{mu(k)} + R~_k` for every user,
//! - `p_c^H D_l p_c + sum_m p_m^H D_l p_m <= P_l`, and `C_m >= 0`,
//!
//! and is handed to an interior-point conic solver. Because the surrogate is
//! a tight lower bound, the sample-average objective cannot decrease from one
//! iterate to the next.
//!
//! RSMA runs also try a start derived from the SDMA optimum and keep the SDMA
//! point itself as a candidate, so an RSMA result is never worse than SDMA on
//! the same samples.

use crate::channel::draw_true_channel;
use crate::error::{check_dim, Error, Result};
use crate::rng::{complex_gaussian, derive_seed, rng_from_seed, tag};
use crate::sysmodel::{inner, PowerConstraintSet, PrecoderSet, Strategy, SystemConfig};
use crate::{CMatrix, CVector, C64};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// Group principal directions for the privates, dominant left singular
    /// vector of `H^` for the common precoder, half the power to each part.
    #[default]
    MrtSvd,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub num_sample_channels: usize,
    pub max_iterations: usize,
    /// Stop once an iteration improves the objective by less than this
    /// (bps/Hz).
    pub convergence_epsilon: f64,
    pub strategy: Strategy,
    pub initialization: Initialization,
    /// RSMA only: extra runs first solved with the CSIT error variance
    /// multiplied by each factor, then refined on the true problem.
    #[serde(default = "default_continuation")]
    pub continuation_factors: Vec<f64>,
    /// RSMA only: extra runs from random directions.
    #[serde(default = "default_random_starts")]
    pub random_starts: usize,
}

fn default_continuation() -> Vec<f64> {
    vec![2.0, 4.0, 8.0]
}

fn default_random_starts() -> usize {
    3
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            num_sample_channels: 1000,
            max_iterations: 200,
            convergence_epsilon: 1e-4,
            strategy: Strategy::Rsma,
            initialization: Initialization::MrtSvd,
            continuation_factors: default_continuation(),
            random_starts: default_random_starts(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sample_channels == 0 {
            return Err(Error::InvalidConfig("need at least one sample channel".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("need at least one iteration".into()));
        }
        if !(self.convergence_epsilon > 0.0) {
            return Err(Error::InvalidConfig("convergence epsilon must be positive".into()));
        }
        if self.continuation_factors.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidConfig("continuation factors must be positive".into()));
        }
        Ok(())
    }
}

/// Average rates of one precoder set over sampled channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageRateReport {
    /// Sample mean of `R_c = min_k R_{c,k}`.
    pub common_rate: f64,
    /// Sample mean of `r_m = min_{k in G_m} R_k`.
    pub private_rates: Vec<f64>,
    pub common_rate_split: Vec<f64>,
    /// `C_m + r_m`.
    pub group_rates: Vec<f64>,
    /// `min_m (C_m + r_m)`.
    pub mmf_value: f64,
}

/// How the SCA loop ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The conic solver failed or returned a worse point; the previous
    /// iterate was kept.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct MmfSolution {
    pub precoders: PrecoderSet,
    pub report: AverageRateReport,
    /// Sample-average MMF objective (mean rate per user, then minimum) at the
    /// start and after every SCA iteration of the winning run.
    pub trace: Vec<f64>,
    pub termination: Termination,
    /// For RSMA: the SDMA optimum the RSMA search started from, identical
    /// to what an SDMA run with the same inputs returns.
    pub sdma_baseline: Option<Box<MmfSolution>>,
}

impl MmfSolution {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }
}

/// `C_m` maximizing `min_m (C_m + r_m)` subject to `sum C_m = R_c`, `C >= 0`.
pub fn waterfill(common_rate: f64, private_rates: &[f64]) -> Vec<f64> {
    let budget = common_rate.max(0.0);
    if private_rates.is_empty() {
        return Vec::new();
    }
    let mut sorted = private_rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Raise the level over the lowest rates until the budget runs out.
    let mut level = sorted[0] + budget;
    let mut acc = 0.0;
    for (i, &r) in sorted.iter().enumerate() {
        acc += r;
        let candidate = (budget + acc) / (i + 1) as f64;
        if i + 1 == sorted.len() || candidate <= sorted[i + 1] {
            level = candidate;
            break;
        }
    }
    private_rates.iter().map(|r| (level - r).max(0.0)).collect()
}

/// `min_m (C_m + r_m)` with the split from [`waterfill`].
pub fn waterfill_value(common_rate: f64, private_rates: &[f64]) -> f64 {
    waterfill(common_rate, private_rates)
        .iter()
        .zip(private_rates)
        .map(|(c, r)| c + r)
        .fold(f64::INFINITY, f64::min)
}

/// Channels `H^ + H~_s`, `s = 0..n`, with `H~_s` drawn from `seed`.
pub fn sample_channels(estimate: &CMatrix, error_variance: f64, n: usize, seed: u64) -> Vec<CMatrix> {
    if error_variance == 0.0 {
        return vec![estimate.clone()];
    }
    (0..n)
        .map(|s| draw_true_channel(estimate, error_variance, derive_seed(seed, tag::SAA_SAMPLES, s as u64)).true_channel)
        .collect()
}

/// Per-user channel vectors of every sample: `[user][sample]`.
fn user_samples(samples: &[CMatrix]) -> Vec<Vec<CVector>> {
    let k = samples[0].ncols();
    (0..k)
        .map(|u| samples.iter().map(|h| h.column(u).into_owned()).collect())
        .collect()
}

/// Average rates of `precoders` over `num_samples` channel draws around
/// `estimate`. The common-rate split is taken from `precoders`.
pub fn average_rates(
    precoders: &PrecoderSet,
    estimate: &CMatrix,
    config: &SystemConfig,
    num_samples: usize,
    seed: u64,
) -> Result<AverageRateReport> {
    config.validate()?;
    precoders.validate(config)?;
    check_dim("channel users", config.num_users(), estimate.ncols())?;
    check_dim("channel antennas", config.num_tx_antennas, estimate.nrows())?;
    if num_samples == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    let samples = sample_channels(estimate, config.csit_error_variance(), num_samples, seed);
    let (common, private) = mean_of_minimum_rates(&user_samples(&samples), precoders, config);
    Ok(report_with_split(common, private, precoders.common_rate_split.clone()))
}

fn report_with_split(common_rate: f64, private_rates: Vec<f64>, split: Vec<f64>) -> AverageRateReport {
    let group_rates: Vec<f64> = split.iter().zip(&private_rates).map(|(c, r)| c + r).collect();
    AverageRateReport {
        common_rate,
        mmf_value: group_rates.iter().copied().fold(f64::INFINITY, f64::min),
        private_rates,
        common_rate_split: split,
        group_rates,
    }
}

/// Per-sample `(R_{c,k}, R_k)` for one user.
fn sample_rates(h: &CVector, streams: &Streams, group: usize, sigma2: f64) -> (f64, f64) {
    let common = inner(h, streams.common).norm_sqr();
    let mut total_private = 0.0;
    let mut own = 0.0;
    for (m, p) in streams.private.iter().enumerate() {
        let g = inner(h, p).norm_sqr();
        total_private += g;
        if m == group {
            own = g;
        }
    }
    let rc = (1.0 + common / (total_private + sigma2)).log2();
    let rp = (1.0 + own / (total_private - own + sigma2)).log2();
    (rc, rp)
}

struct Streams<'a> {
    common: &'a CVector,
    private: &'a [CVector],
}

impl<'a> Streams<'a> {
    fn of(set: &'a PrecoderSet) -> Self {
        Streams {
            common: &set.common,
            private: &set.private,
        }
    }
}

/// Sample means of `min_k R_{c,k}` and of `min_{k in G_m} R_k`.
fn mean_of_minimum_rates(users: &[Vec<CVector>], set: &PrecoderSet, config: &SystemConfig) -> (f64, Vec<f64>) {
    let m = config.num_groups();
    let n = users[0].len();
    let streams = Streams::of(set);
    let mut common = 0.0;
    let mut private = vec![0.0; m];
    for s in 0..n {
        let mut rc_min = f64::INFINITY;
        let mut rp_min = vec![f64::INFINITY; m];
        for (k, hs) in users.iter().enumerate() {
            let g = config.groups.group_of(k);
            let (rc, rp) = sample_rates(&hs[s], &streams, g, config.noise_variance);
            rc_min = rc_min.min(rc);
            rp_min[g] = rp_min[g].min(rp);
        }
        common += rc_min;
        for (acc, r) in private.iter_mut().zip(rp_min) {
            *acc += r;
        }
    }
    let inv = 1.0 / n as f64;
    (common * inv, private.into_iter().map(|r| r * inv).collect())
}

/// The SCA objective: per-user mean rates, minimum over users, then the best
/// common-rate split.
fn ergodic_objective(users: &[Vec<CVector>], set: &PrecoderSet, config: &SystemConfig, rsma: bool) -> f64 {
    let m = config.num_groups();
    let streams = Streams::of(set);
    let mut common = f64::INFINITY;
    let mut private = vec![f64::INFINITY; m];
    for (k, hs) in users.iter().enumerate() {
        let g = config.groups.group_of(k);
        let (mut rc, mut rp) = (0.0, 0.0);
        for h in hs {
            let (a, b) = sample_rates(h, &streams, g, config.noise_variance);
            rc += a;
            rp += b;
        }
        let inv = 1.0 / hs.len() as f64;
        common = common.min(rc * inv);
        private[g] = private[g].min(rp * inv);
    }
    if rsma {
        waterfill_value(common, &private)
    } else {
        private.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Scales every precoder by one factor so that the tightest constraint is
/// met with equality. Zero sets are returned unchanged.
fn scale_to_budget(set: &mut PrecoderSet, power: &PowerConstraintSet, allow_growth: bool) {
    let ratio = power
        .constraints()
        .iter()
        .map(|c| set.shaped_power(&c.shaping) / c.limit)
        .fold(0.0, f64::max);
    if ratio > 0.0 && (ratio > 1.0 || allow_growth) {
        let f = C64::new(1.0 / ratio.sqrt(), 0.0);
        set.common *= f;
        for p in &mut set.private {
            *p *= f;
        }
    }
}

fn principal_direction(m: &CMatrix) -> CVector {
    let n = m.nrows();
    if m.iter().all(|x| x.norm_sqr() == 0.0) {
        let mut v = CVector::zeros(n);
        v[0] = C64::new(1.0, 0.0);
        return v;
    }
    let eig = SymmetricEigen::new(m.clone());
    let (best, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &l)| if l > acc.1 { (i, l) } else { acc });
    eig.eigenvectors.column(best).into_owned()
}

fn initial_point(estimate: &CMatrix, config: &SystemConfig, rsma: bool, init: Initialization, seed: u64) -> PrecoderSet {
    let nt = config.num_tx_antennas;
    let m = config.num_groups();
    let mut set = PrecoderSet::zeros(nt, m);
    match init {
        Initialization::MrtSvd => {
            for g in 0..m {
                let mut cov = CMatrix::zeros(nt, nt);
                for k in config.groups.members(g) {
                    let h = estimate.column(k);
                    cov += &h * h.adjoint();
                }
                set.private[g] = principal_direction(&cov);
            }
            if rsma {
                set.common = principal_direction(&(estimate * estimate.adjoint()));
            }
        }
        Initialization::Random => {
            let mut rng = rng_from_seed(derive_seed(seed, tag::OPT_INIT, 0));
            let mut draw = || {
                let v = CVector::from_fn(nt, |_, _| complex_gaussian(&mut rng, 1.0));
                let n = v.norm();
                v / C64::new(n, 0.0)
            };
            for g in 0..m {
                set.private[g] = draw();
            }
            if rsma {
                set.common = draw();
            }
        }
    }
    // Unit-norm directions; 50/50 between common and privates.
    let private_share = if rsma { 0.5 } else { 1.0 } / m as f64;
    for p in &mut set.private {
        *p *= C64::new(private_share.sqrt(), 0.0);
    }
    if rsma {
        set.common *= C64::new(0.5f64.sqrt(), 0.0);
    }
    scale_to_budget(&mut set, &config.power, true);
    set
}

/// Variable layout of the real-valued subproblem: the real then imaginary
/// parts of each active precoder, then `C_1..C_M` (RSMA), then `t`.
struct Layout {
    nt: usize,
    m: usize,
    rsma: bool,
}

impl Layout {
    fn num_streams(&self) -> usize {
        self.m + usize::from(self.rsma)
    }

    /// Offset of stream `j`: `0` is the common stream, `1..=M` the privates.
    fn stream(&self, j: usize) -> usize {
        let slot = if self.rsma { j } else { j - 1 };
        slot * 2 * self.nt
    }

    fn split(&self, g: usize) -> usize {
        self.num_streams() * 2 * self.nt + g
    }

    fn t(&self) -> usize {
        self.num_streams() * 2 * self.nt + if self.rsma { self.m } else { 0 }
    }

    fn len(&self) -> usize {
        self.t() + 1
    }
}

/// Affine expression `constant + sum coeff * x`.
#[derive(Clone, Default)]
struct Affine {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl Affine {
    fn add(&mut self, var: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((var, coeff));
        }
    }

    fn scaled(&self, f: f64, shift: f64) -> Affine {
        Affine {
            constant: self.constant * f + shift,
            terms: self.terms.iter().map(|&(v, c)| (v, c * f)).collect(),
        }
    }
}

/// Accumulates conic rows in `s = b - A x` form.
struct ConeBuilder {
    rows: Vec<Affine>,
    cones: Vec<SupportedConeT<f64>>,
}

impl ConeBuilder {
    fn soc(&mut self, rows: Vec<Affine>) {
        self.cones.push(SupportedConeT::SecondOrderConeT(rows.len()));
        self.rows.extend(rows);
    }

    fn nonneg(&mut self, rows: Vec<Affine>) {
        self.cones.push(SupportedConeT::NonnegativeConeT(rows.len()));
        self.rows.extend(rows);
    }

    /// `||z||^2 <= u` as the cone `((u+1)/2, z, (u-1)/2)`.
    fn rotated(&mut self, u: &Affine, z: Vec<Affine>) {
        let mut rows = vec![u.scaled(0.5, 0.5)];
        rows.extend(z);
        rows.push(u.scaled(0.5, -0.5));
        self.soc(rows);
    }
}

/// `Re(r x_j)` and `Im(r x_j)` for a complex row `r`.
fn complex_row(layout: &Layout, j: usize, r: &[C64]) -> [Affine; 2] {
    let off = layout.stream(j);
    let nt = layout.nt;
    let mut re = Affine::default();
    let mut im = Affine::default();
    for (i, c) in r.iter().enumerate() {
        re.add(off + i, c.re);
        re.add(off + nt + i, -c.im);
        im.add(off + i, c.im);
        im.add(off + nt + i, c.re);
    }
    [re, im]
}

/// Linearized rate of one stream at one user, averaged over samples.
struct Surrogate {
    constant: f64,
    /// `Re(v^H p_sig)` coefficients.
    v: CVector,
    /// Rows `sqrt(lambda) u^H` with `Q = sum lambda u u^H`.
    q_rows: Vec<Vec<C64>>,
}

/// Builds the averaged minorant of `log2(1 + |h^H p_sig|^2 / b)` where `b`
/// holds the streams in `interferers` plus noise. Precoders are expressed in
/// units of `scale` (`p = scale x`).
fn surrogate(
    hs: &[CVector],
    sig: &CVector,
    interferers: &[&CVector],
    sigma2: f64,
    scale: f64,
) -> Surrogate {
    let nt = sig.len();
    let n = hs.len() as f64;
    let norm = 1.0 / (n * std::f64::consts::LN_2);
    let mut constant = 0.0;
    let mut v = CVector::zeros(nt);
    let mut q = CMatrix::zeros(nt, nt);
    for h in hs {
        let a = inner(h, sig);
        let b: f64 = interferers.iter().map(|p| inner(h, p).norm_sqr()).sum::<f64>() + sigma2;
        let a2 = a.norm_sqr();
        let w = a2 / (b * (b + a2));
        constant += (1.0 + a2 / b).ln() - a2 / b - w * sigma2;
        v += h * (a * (2.0 / b));
        q.gerc(C64::new(w, 0.0), h, h, C64::new(1.0, 0.0));
    }
    constant *= norm;
    v *= C64::new(norm * scale, 0.0);
    q *= C64::new(norm * scale * scale, 0.0);
    let eig = SymmetricEigen::new(q);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let q_rows = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 1e-13 * top && l > 0.0)
        .map(|(i, &l)| {
            eig.eigenvectors
                .column(i)
                .iter()
                .map(|u| u.conj() * l.sqrt())
                .collect()
        })
        .collect();
    Surrogate { constant, v, q_rows }
}

struct Problem<'a> {
    users: &'a [Vec<CVector>],
    config: &'a SystemConfig,
    layout: Layout,
    scale: f64,
}

impl Problem<'_> {
    /// Index `j` of every active stream (`0` common, `1..=M` private).
    fn stream_ids(&self) -> Vec<usize> {
        let start = if self.layout.rsma { 0 } else { 1 };
        (start..=self.layout.m).collect()
    }

    /// One SCA step from `current`; `None` when the solver fails.
    fn step(&self, current: &PrecoderSet) -> Option<PrecoderSet> {
        let l = &self.layout;
        let sigma2 = self.config.noise_variance;
        let mut cb = ConeBuilder {
            rows: Vec::new(),
            cones: Vec::new(),
        };
        let privates: Vec<&CVector> = current.private.iter().collect();

        for (k, hs) in self.users.iter().enumerate() {
            let g = self.config.groups.group_of(k);
            if l.rsma {
                let s = surrogate(hs, &current.common, &privates, sigma2, self.scale);
                let mut u = self.linear_part(&s, 0);
                for gg in 0..l.m {
                    u.add(l.split(gg), -1.0);
                }
                cb.rotated(&u, self.quadratic_rows(&s, &self.stream_ids()));
            }
            let others: Vec<&CVector> = privates
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != g)
                .map(|(_, p)| *p)
                .collect();
            let s = surrogate(hs, &current.private[g], &others, sigma2, self.scale);
            let mut u = self.linear_part(&s, 1 + g);
            if l.rsma {
                u.add(l.split(g), 1.0);
            }
            u.add(l.t(), -1.0);
            let private_ids: Vec<usize> = (1..=l.m).collect();
            cb.rotated(&u, self.quadratic_rows(&s, &private_ids));
        }

        for c in self.config.power.constraints() {
            let mut rows = vec![Affine {
                constant: (c.limit).sqrt() / self.scale,
                terms: Vec::new(),
            }];
            for j in self.stream_ids() {
                let off = l.stream(j);
                for (i, &d) in c.shaping.iter().enumerate() {
                    if d > 0.0 {
                        for part in [0, l.nt] {
                            let mut a = Affine::default();
                            a.add(off + part + i, d.sqrt());
                            rows.push(a);
                        }
                    }
                }
            }
            cb.soc(rows);
        }
        if l.rsma {
            let rows = (0..l.m)
                .map(|g| {
                    let mut a = Affine::default();
                    a.add(l.split(g), 1.0);
                    a
                })
                .collect();
            cb.nonneg(rows);
        }

        let n = l.len();
        let (mut ri, mut ci, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (row, a) in cb.rows.iter().enumerate() {
            b.push(a.constant);
            for &(var, coeff) in &a.terms {
                ri.push(row);
                ci.push(var);
                vals.push(-coeff);
            }
        }
        let a_mat = CscMatrix::new_from_triplets(cb.rows.len(), n, ri, ci, vals);
        let p_mat = CscMatrix::new_from_triplets(n, n, Vec::new(), Vec::new(), Vec::new());
        let mut q = vec![0.0; n];
        q[l.t()] = -1.0;
        let settings = DefaultSettings {
            verbose: false,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cb.cones, settings).ok()?;
        solver.solve();
        // Inaccurate iterates are still worth a look: the caller only keeps a
        // point if the true objective does not drop.
        if !matches!(
            solver.solution.status,
            SolverStatus::Solved
                | SolverStatus::AlmostSolved
                | SolverStatus::NumericalError
                | SolverStatus::InsufficientProgress
                | SolverStatus::MaxIterations
        ) {
            return None;
        }
        let x = &solver.solution.x;
        let read = |j: usize| {
            let off = l.stream(j);
            CVector::from_fn(l.nt, |i, _| C64::new(x[off + i], x[off + l.nt + i]) * self.scale)
        };
        let mut next = PrecoderSet::zeros(l.nt, l.m);
        if l.rsma {
            next.common = read(0);
        }
        for g in 0..l.m {
            next.private[g] = read(1 + g);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        scale_to_budget(&mut next, &self.config.power, false);
        Some(next)
    }

    fn linear_part(&self, s: &Surrogate, sig: usize) -> Affine {
        let off = self.layout.stream(sig);
        let mut u = Affine {
            constant: s.constant,
            terms: Vec::new(),
        };
        for (i, c) in s.v.iter().enumerate() {
            u.add(off + i, c.re);
            u.add(off + self.layout.nt + i, c.im);
        }
        u
    }

    fn quadratic_rows(&self, s: &Surrogate, streams: &[usize]) -> Vec<Affine> {
        let mut rows = Vec::new();
        for &j in streams {
            for r in &s.q_rows {
                let [re, im] = complex_row(&self.layout, j, r);
                rows.push(re);
                rows.push(im);
            }
        }
        rows
    }
}

/// Runs SCA from `start`; returns the final iterate, the objective trace and
/// how the loop ended.
fn run_sca(problem: &Problem, start: PrecoderSet, opt: &OptimizerConfig) -> (PrecoderSet, Vec<f64>, Termination) {
    let rsma = problem.layout.rsma;
    let mut current = start;
    let mut value = ergodic_objective(problem.users, &current, problem.config, rsma);
    let mut trace = vec![value];
    for _ in 0..opt.max_iterations {
        let Some(next) = problem.step(&current) else {
            return (current, trace, Termination::Stalled);
        };
        let next_value = ergodic_objective(problem.users, &next, problem.config, rsma);
        if next_value < value {
            // Only solver inaccuracy can get here; keep the better point.
            return (current, trace, Termination::Stalled);
        }
        trace.push(next_value);
        let gain = next_value - value;
        current = next;
        value = next_value;
        if gain < opt.convergence_epsilon {
            return (current, trace, Termination::Converged);
        }
    }
    (current, trace, Termination::MaxIterations)
}

/// Max-min-fair precoders for `opt.strategy` on the estimate `H^`.
///
/// The returned split `C_m` water-fills the reported common average rate,
/// so `sum_m C_m = R_c` and `mmf_value = min_m (C_m + r_m)`. The report
/// uses the same channel samples as the optimization.
pub fn optimize_mmf(
    estimate: &CMatrix,
    config: &SystemConfig,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<MmfSolution> {
    config.validate()?;
    opt.validate()?;
    check_dim("channel users", config.num_users(), estimate.ncols())?;
    check_dim("channel antennas", config.num_tx_antennas, estimate.nrows())?;
    let samples = sample_channels(estimate, config.csit_error_variance(), opt.num_sample_channels, seed);
    let users = user_samples(&samples);
    let scale = config.power.total_power().sqrt();
    let problem = |rsma: bool| Problem {
        users: &users,
        config,
        layout: Layout {
            nt: config.num_tx_antennas,
            m: config.num_groups(),
            rsma,
        },
        scale,
    };

    // Each candidate is one SCA run. Both strategies start from the MRT/SVD
    // point, from continuation runs and from random directions.
    let portfolio = |rsma: bool| -> Vec<Candidate> {
        let target = problem(rsma);
        let mut out = vec![run_sca(&target, initial_point(estimate, config, rsma, opt.initialization, seed), opt)];
        // Continuation: solutions that are robust to a larger CSIT error
        // often sit in a better basin than the direct runs reach.
        if config.csit_error_variance() > 0.0 {
            for &f in &opt.continuation_factors {
                let wide = user_samples(&sample_channels(
                    estimate,
                    config.csit_error_variance() * f,
                    opt.num_sample_channels,
                    seed,
                ));
                let pessimistic = Problem {
                    users: &wide,
                    ..problem(rsma)
                };
                let start = initial_point(estimate, config, rsma, opt.initialization, seed);
                let (mid, _, _) = run_sca(&pessimistic, start, opt);
                out.push(run_sca(&target, mid, opt));
            }
        }
        for i in 0..opt.random_starts as u64 {
            let start = initial_point(estimate, config, rsma, Initialization::Random, derive_seed(seed, tag::OPT_INIT, i + 1));
            out.push(run_sca(&target, start, opt));
        }
        out
    };

    let sdma_best = select(portfolio(false), &users, config, false)?;
    if opt.strategy == Strategy::Sdma {
        return Ok(sdma_best);
    }

    let rsma = problem(true);
    let sdma_set = sdma_best.precoders.clone();
    let mut candidates = vec![(sdma_set.clone(), sdma_best.trace.clone(), sdma_best.termination)];
    candidates.extend(portfolio(true));
    // Warm start: the SDMA optimum with a fifth of the power moved to a
    // common precoder along the dominant direction of H^.
    let mut warm = sdma_set.clone();
    for p in &mut warm.private {
        *p *= C64::new(0.8f64.sqrt(), 0.0);
    }
    let dir = principal_direction(&(estimate * estimate.adjoint()));
    warm.common = dir * C64::new((0.2 * config.power.total_power()).sqrt(), 0.0);
    scale_to_budget(&mut warm, &config.power, false);
    candidates.push(run_sca(&rsma, warm, opt));
    // One start per group with that group's SDMA beam moved to the common
    // stream, so the group is served through the common message.
    for g in 0..config.num_groups() {
        let mut start = sdma_set.clone();
        start.common = std::mem::replace(&mut start.private[g], CVector::zeros(config.num_tx_antennas));
        candidates.push(run_sca(&rsma, start, opt));
    }
    let mut best = select(candidates, &users, config, true)?;
    best.sdma_baseline = Some(Box::new(sdma_best));
    Ok(best)
}

type Candidate = (PrecoderSet, Vec<f64>, Termination);

/// Best candidate by reported MMF value; the first wins ties.
fn select(candidates: Vec<Candidate>, users: &[Vec<CVector>], config: &SystemConfig, rsma: bool) -> Result<MmfSolution> {
    let mut best: Option<MmfSolution> = None;
    for (mut set, trace, termination) in candidates {
        let (common, private) = mean_of_minimum_rates(users, &set, config);
        let split = if rsma && !set.common.iter().all(|c| c.norm_sqr() == 0.0) {
            waterfill(common, &private)
        } else {
            vec![0.0; config.num_groups()]
        };
        set.common_rate_split = split.clone();
        let report = report_with_split(common, private, split);
        if best.as_ref().map_or(true, |b| report.mmf_value > b.report.mmf_value) {
            best = Some(MmfSolution {
                precoders: set,
                report,
                trace,
                termination,
                sdma_baseline: None,
            });
        }
    }
    best.ok_or_else(|| Error::Optimizer("no candidate solution".into()))
}

/// One point of a Shannon-bound curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShannonPoint {
    pub snr_db: f64,
    pub rsma: f64,
    pub sdma: f64,
}

/// MMF bounds of both strategies over an SNR grid (sum transmit power over
/// unit noise, in dB). The CSIT error at each point is a scaled copy of one
/// unit-variance draw, so points differ only through the power.
pub fn shannon_curve(
    true_channel: &CMatrix,
    base: &SystemConfig,
    snr_grid_db: &[f64],
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<Vec<ShannonPoint>> {
    if snr_grid_db.is_empty() {
        return Err(Error::InvalidConfig("empty SNR grid".into()));
    }
    if snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("SNR grid must be strictly ascending".into()));
    }
    snr_grid_db
        .iter()
        .map(|&snr_db| {
            let mut config = base.clone();
            config.power = base.power.scaled_to_total(10f64.powf(snr_db / 10.0) * base.noise_variance);
            let estimate = if config.perfect_csit {
                true_channel.clone()
            } else {
                crate::channel::apply_csit_error(
                    true_channel,
                    config.csit_alpha,
                    config.power.total_power(),
                    derive_seed(seed, tag::CSIT_ERROR, 0),
                )
                .estimate
            };
            // The RSMA search carries the SDMA optimum along.
            let o = OptimizerConfig {
                strategy: Strategy::Rsma,
                ..opt.clone()
            };
            let sol = optimize_mmf(&estimate, &config, &o, derive_seed(seed, tag::OPT_INIT, 0))?;
            let sdma = sol
                .sdma_baseline
                .as_ref()
                .map(|b| b.report.mmf_value)
                .ok_or_else(|| Error::Optimizer("RSMA search without SDMA baseline".into()))?;
            Ok(ShannonPoint {
                snr_db,
                rsma: sol.report.mmf_value,
                sdma,
            })
        })
        .collect()
}

const FILE_FORMAT: &str = "rsma-precoders";

#[derive(Serialize, Deserialize)]
struct PrecoderFile {
    format: String,
    version: u32,
    num_tx: usize,
    num_groups: usize,
    strategy: Strategy,
    common: Vec<[f64; 2]>,
    private: Vec<Vec<[f64; 2]>>,
    common_rate_split: Vec<f64>,
}

fn to_pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn from_pairs(v: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|p| C64::new(p[0], p[1])))
}

/// Writes `set` as JSON: a header (`num_tx`, `num_groups`, `strategy`) and
/// `[re, im]` pairs at full precision.
pub fn store_precoders(set: &PrecoderSet, path: &Path) -> Result<()> {
    let file = PrecoderFile {
        format: FILE_FORMAT.into(),
        version: 1,
        num_tx: set.num_tx(),
        num_groups: set.num_groups(),
        strategy: if set.is_sdma() { Strategy::Sdma } else { Strategy::Rsma },
        common: to_pairs(&set.common),
        private: set.private.iter().map(to_pairs).collect(),
        common_rate_split: set.common_rate_split.clone(),
    };
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Reads a file written by [`store_precoders`] (or by an external tool using
/// the same layout) and checks it against `config`.
pub fn load_precoders(path: &Path, config: &SystemConfig) -> Result<PrecoderSet> {
    let text = std::fs::read_to_string(path)?;
    let file: PrecoderFile = serde_json::from_str(&text)?;
    if file.format != FILE_FORMAT {
        return Err(Error::Malformed(format!("unexpected format tag {:?}", file.format)));
    }
    check_dim("precoder file antennas", file.num_tx, file.common.len())?;
    check_dim("precoder file groups", file.num_groups, file.private.len())?;
    check_dim("precoder groups", config.num_groups(), file.num_groups)?;
    check_dim("precoder antennas", config.num_tx_antennas, file.num_tx)?;
    let set = PrecoderSet {
        common: from_pairs(&file.common),
        private: file.private.iter().map(|p| from_pairs(p)).collect(),
        common_rate_split: file.common_rate_split,
    };
    set.validate(config)?;
    if file.strategy == Strategy::Sdma && !set.is_sdma() {
        return Err(Error::Malformed("SDMA file with a common precoder or split".into()));
    }
    Ok(set)
}
