//! Single-spin-flip Metropolis dynamics for the long-range model: transition
//! probabilities, seeded trajectory simulation, exact Gibbs distributions
//! with detailed-balance audits, first-hitting-time measurement (Monte Carlo
//! replicas and exact linear solves), and Arrhenius-slope extraction.

use crate::graph::{DistanceOracle, Graph};
use crate::landscape::enumerate_energies;
use crate::model::{flip_delta_with_table, ModelParams, SpinConfiguration};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Largest instance for exact distribution computations (2^20 states).
pub const GIBBS_MAX_N: usize = 20;
/// Largest instance for exact hitting-time linear solves.
pub const EXACT_HITTING_MAX_N: usize = 14;
/// Largest instance solved by dense factorization; above this (up to the
/// exact cap) a matrix-free conjugate-gradient solve is used.
pub const DENSE_SOLVE_MAX_N: usize = 12;
/// Default censoring cap on Monte Carlo hitting times.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("states differ in {0} spins; transition probabilities are defined for at most one")]
    NotAdjacent(usize),
    #[error("instance too large: n = {n} exceeds the cap of {max}")]
    BudgetExceeded { n: usize, max: usize },
    #[error("all {0} replicas were censored at the step cap; statistics undefined")]
    AllCensored(usize),
    #[error("linear solve failed: {0}")]
    SolveFailed(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// A set of spin configurations used as a hitting target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    AllPlus,
    AllMinus,
    /// Explicit mask list (requires n <= 64); kept sorted internally.
    Masks(Vec<u64>),
}

impl Target {
    pub fn masks(mut masks: Vec<u64>) -> Self {
        masks.sort_unstable();
        masks.dedup();
        Target::Masks(masks)
    }

    pub fn contains(&self, s: &SpinConfiguration) -> bool {
        match self {
            Target::AllPlus => s.plus_count() == s.n(),
            Target::AllMinus => s.plus_count() == 0,
            Target::Masks(m) => m.binary_search(&s.mask()).is_ok(),
        }
    }

    pub fn contains_mask(&self, mask: u64, n: usize) -> bool {
        match self {
            Target::AllPlus => mask == (1u64 << n) - 1,
            Target::AllMinus => mask == 0,
            Target::Masks(m) => m.binary_search(&mask).is_ok(),
        }
    }
}

/// One-step transition probability of the Metropolis chain: a uniformly
/// chosen vertex proposes a flip, accepted with probability
/// `exp(-beta * max(H(eta) - H(sigma), 0))`; the diagonal carries the
/// rejected mass. States differing in two or more spins are unreachable in
/// one step.
pub fn transition_probability(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    sigma: &SpinConfiguration,
    eta: &SpinConfiguration,
) -> Result<f64, DynamicsError> {
    let n = g.n();
    let diff: Vec<usize> = (0..n).filter(|&x| sigma.is_plus(x) != eta.is_plus(x)).collect();
    let table = p.kernel.table(d.diameter(), g.r());
    match diff.len() {
        0 => {
            let mut stay = 1.0;
            for x in 0..n {
                let delta = flip_delta_with_table(g, d, &table, p.h, sigma, x);
                stay -= (-p.beta * delta.max(0.0)).exp() / n as f64;
            }
            Ok(stay)
        }
        1 => {
            let delta = flip_delta_with_table(g, d, &table, p.h, sigma, diff[0]);
            Ok((-p.beta * delta.max(0.0)).exp() / n as f64)
        }
        k => Err(DynamicsError::NotAdjacent(k)),
    }
}

/// Final state of a simulated trajectory.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub sigma: SpinConfiguration,
    /// Steps taken (proposals, accepted or not).
    pub t: u64,
    /// Accepted flips.
    pub accepted: u64,
}

/// Runs `steps` Metropolis steps from `start` with a dedicated generator
/// seeded by `seed`. Per step: one vertex index is drawn, then one uniform
/// variate only if the proposed flip is uphill — this draw order is part of
/// the reproducibility contract. O(n) per step.
pub fn run_chain(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    start: &SpinConfiguration,
    steps: u64,
    seed: u64,
) -> ChainState {
    let (state, _) = run_chain_inner(g, d, p, start, steps, seed, false);
    state
}

/// [`run_chain`] that also records the energy gap accumulated so far after
/// every step (relative to the start state's energy).
pub fn run_chain_logged(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    start: &SpinConfiguration,
    steps: u64,
    seed: u64,
) -> (ChainState, Vec<f64>) {
    run_chain_inner(g, d, p, start, steps, seed, true)
}

fn run_chain_inner(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    start: &SpinConfiguration,
    steps: u64,
    seed: u64,
    log: bool,
) -> (ChainState, Vec<f64>) {
    let n = g.n();
    let table = p.kernel.table(d.diameter(), g.r());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sigma = start.clone();
    let mut accepted = 0u64;
    let mut energy_gap = 0.0;
    let mut trace = if log { Vec::with_capacity(steps as usize) } else { Vec::new() };
    for _ in 0..steps {
        let x = rng.random_range(0..n);
        let delta = flip_delta_with_table(g, d, &table, p.h, &sigma, x);
        let accept = delta <= 0.0 || rng.random::<f64>() < (-p.beta * delta).exp();
        if accept {
            sigma.flip(x);
            accepted += 1;
            energy_gap += delta;
        }
        if log {
            trace.push(energy_gap);
        }
    }
    (ChainState { sigma, t: steps, accepted }, trace)
}

/// Exact Gibbs distribution and the worst detailed-balance residual.
#[derive(Debug, Clone)]
pub struct GibbsReport {
    /// Normalized Gibbs mass per state, indexed by mask.
    pub mu: Vec<f64>,
    /// Maximum relative residual `|mu(s)p(s,e) - mu(e)p(e,s)|` over adjacent
    /// pairs, scaled by the larger side.
    pub max_relative_residual: f64,
}

/// Computes `mu(sigma) proportional to exp(-beta H(sigma))` over all states
/// and audits detailed balance on every adjacent pair.
pub fn gibbs_and_balance(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
) -> Result<GibbsReport, DynamicsError> {
    let n = g.n();
    if n > GIBBS_MAX_N {
        return Err(DynamicsError::BudgetExceeded { n, max: GIBBS_MAX_N });
    }
    let l = enumerate_energies(g, d, p).map_err(|e| DynamicsError::Invalid(e.to_string()))?;
    let energies = l.energies();
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut mu: Vec<f64> = energies.iter().map(|e| (-p.beta * (e - e_min)).exp()).collect();
    let z: f64 = mu.iter().sum();
    for m in mu.iter_mut() {
        *m /= z;
    }

    let inv_n = 1.0 / n as f64;
    let mut worst = 0.0f64;
    for s in 0..energies.len() {
        for b in 0..n {
            let e = s ^ (1usize << b);
            if e < s {
                continue; // each unordered pair once
            }
            let p_se = inv_n * (-p.beta * (energies[e] - energies[s]).max(0.0)).exp();
            let p_es = inv_n * (-p.beta * (energies[s] - energies[e]).max(0.0)).exp();
            let lhs = mu[s] * p_se;
            let rhs = mu[e] * p_es;
            let scale = lhs.abs().max(rhs.abs());
            if scale > 0.0 {
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    Ok(GibbsReport { mu, max_relative_residual: worst })
}

/// First-hitting-time sample statistics across independent replicas.
#[derive(Debug, Clone, Serialize)]
pub struct HittingTimeStats {
    /// Uncensored first-hitting step counts, in replica order.
    #[serde(skip)]
    pub samples: Vec<u64>,
    /// Per-replica outcome in replica order: `Some(tau)` or `None` if censored.
    #[serde(skip)]
    pub outcomes: Vec<Option<u64>>,
    pub censored_count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

/// Measures the first hitting time of `target` from `start` over independent
/// replica chains. Replica `i` uses stream `i + 1` of a ChaCha8 generator
/// seeded by `seed`, so results are independent of thread scheduling.
/// The hitting time counts from 1: membership is checked after each step,
/// never at step zero. Runs reaching `cap` steps are censored, excluded from
/// the moments, and reported.
pub fn hitting_times(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    start: &SpinConfiguration,
    target: &Target,
    replicas: usize,
    seed: u64,
    cap: u64,
) -> Result<HittingTimeStats, DynamicsError> {
    if replicas == 0 || cap == 0 {
        return Err(DynamicsError::Invalid("replicas and cap must be positive".into()));
    }
    let n = g.n();
    let table = p.kernel.table(d.diameter(), g.r());
    let outcomes: Vec<Option<u64>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut sigma = start.clone();
            for t in 1..=cap {
                let x = rng.random_range(0..n);
                let delta = flip_delta_with_table(g, d, &table, p.h, &sigma, x);
                if delta <= 0.0 || rng.random::<f64>() < (-p.beta * delta).exp() {
                    sigma.flip(x);
                }
                if target.contains(&sigma) {
                    return Some(t);
                }
            }
            None
        })
        .collect();

    let samples: Vec<u64> = outcomes.iter().filter_map(|o| *o).collect();
    let censored_count = replicas - samples.len();
    if samples.is_empty() {
        return Err(DynamicsError::AllCensored(replicas));
    }
    let k = samples.len() as f64;
    let mean = samples.iter().map(|&t| t as f64).sum::<f64>() / k;
    let variance = if samples.len() > 1 {
        samples.iter().map(|&t| (t as f64 - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let std_error = (variance / k).sqrt();
    Ok(HittingTimeStats { samples, outcomes, censored_count, mean, variance, std_error })
}

/// How the exact hitting-time linear system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Dense LU factorization of `I - P_restricted`.
    DenseLu,
    /// Matrix-free conjugate gradient on the similarity-symmetrized system;
    /// residual tolerance 1e-10.
    ConjugateGradient,
}

/// Expected first hitting time of `target` from `start_mask`, computed
/// exactly from a full energy table by solving `(I - P_restricted) u = 1`
/// with the target states absorbing. If the start lies inside the target the
/// first-return convention `1 + sum_eta P(start, eta) u(eta)` is used,
/// matching the strictly positive hitting-time definition.
pub fn exact_hitting_time_from_energies(
    n: usize,
    energies: &[f64],
    beta: f64,
    start_mask: u64,
    target: &Target,
    method: SolveMethod,
) -> Result<f64, DynamicsError> {
    if n > EXACT_HITTING_MAX_N {
        return Err(DynamicsError::BudgetExceeded { n, max: EXACT_HITTING_MAX_N });
    }
    let total = 1usize << n;
    if energies.len() != total {
        return Err(DynamicsError::Invalid("energy table length must be 2^n".into()));
    }
    // Index the transient (non-target) states.
    let mut idx = vec![usize::MAX; total];
    let mut transient = Vec::new();
    for m in 0..total {
        if !target.contains_mask(m as u64, n) {
            idx[m] = transient.len();
            transient.push(m);
        }
    }
    if transient.is_empty() {
        return Err(DynamicsError::Invalid("target covers the whole state space".into()));
    }
    let inv_n = 1.0 / n as f64;
    let prob = |from: usize, to: usize| -> f64 {
        inv_n * (-beta * (energies[to] - energies[from]).max(0.0)).exp()
    };

    let u = match method {
        SolveMethod::DenseLu => {
            let m = transient.len();
            let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
            for (i, &s) in transient.iter().enumerate() {
                let mut stay = 1.0;
                for b in 0..n {
                    let e = s ^ (1usize << b);
                    let pr = prob(s, e);
                    stay -= pr;
                    if idx[e] != usize::MAX {
                        a[(i, idx[e])] = -pr;
                    }
                }
                a[(i, i)] += 1.0 - stay; // 1 - p(s,s)
            }
            let rhs = nalgebra::DVector::from_element(m, 1.0);
            let sol = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| DynamicsError::SolveFailed("singular restricted system".into()))?;
            sol.iter().copied().collect::<Vec<f64>>()
        }
        SolveMethod::ConjugateGradient => {
            solve_symmetrized_cg(n, energies, beta, &idx, &transient)?
        }
    };

    if idx[start_mask as usize] != usize::MAX {
        Ok(u[idx[start_mask as usize]])
    } else {
        // First return to the target set.
        let s = start_mask as usize;
        let mut e_t = 1.0;
        for b in 0..n {
            let e = s ^ (1usize << b);
            if idx[e] != usize::MAX {
                e_t += prob(s, e) * u[idx[e]];
            }
        }
        Ok(e_t)
    }
}

/// Conjugate gradient on the reversibility-symmetrized restricted system.
/// With `d(s) = exp(-beta (H(s) - H_min) / 2)`, the matrix
/// `S(s,e) = d(s) p(s,e) / d(e) = (1/n) exp(-beta |H(s)-H(e)| / 2)` is
/// symmetric and `I - S_restricted` is positive definite, so CG applies to
/// `(I - S) y = d`, with `u = y / d`.
fn solve_symmetrized_cg(
    n: usize,
    energies: &[f64],
    beta: f64,
    idx: &[usize],
    transient: &[usize],
) -> Result<Vec<f64>, DynamicsError> {
    let m = transient.len();
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let d: Vec<f64> = transient.iter().map(|&s| (-beta * (energies[s] - e_min) / 2.0).exp()).collect();
    let inv_n = 1.0 / n as f64;

    let apply = |x: &[f64], out: &mut [f64]| {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let s = transient[i];
            let mut stay = 1.0;
            let mut acc = 0.0;
            for b in 0..n {
                let e = s ^ (1usize << b);
                stay -= inv_n * (-beta * (energies[e] - energies[s]).max(0.0)).exp();
                if idx[e] != usize::MAX {
                    acc += inv_n * (-beta * (energies[e] - energies[s]).abs() / 2.0).exp() * x[idx[e]];
                }
            }
            // (I - S)x = x - diag(stay) x - offdiag S x
            *o = x[i] - stay * x[i] - acc;
        });
    };

    let b = d.clone();
    let mut x = vec![0.0; m];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let max_iters = 400_000usize;
    for _ in 0..max_iters {
        if rs.sqrt() / b_norm <= 1e-10 {
            return Ok(x.iter().zip(&d).map(|(xi, di)| xi / di).collect());
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(DynamicsError::SolveFailed("lost positive definiteness".into()));
        }
        let alpha = rs / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta_cg = rs_new / rs;
        for i in 0..m {
            p[i] = r[i] + beta_cg * p[i];
        }
        rs = rs_new;
    }
    Err(DynamicsError::SolveFailed(format!(
        "conjugate gradient did not reach 1e-10 in {max_iters} iterations"
    )))
}

/// Expected first hitting time via exact linear solve on a graph instance.
/// Dense factorization up to [`DENSE_SOLVE_MAX_N`]; conjugate gradient above
/// that, up to [`EXACT_HITTING_MAX_N`].
pub fn exact_expected_hitting_time(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    start_mask: u64,
    target: &Target,
) -> Result<f64, DynamicsError> {
    let n = g.n();
    if n > EXACT_HITTING_MAX_N {
        return Err(DynamicsError::BudgetExceeded { n, max: EXACT_HITTING_MAX_N });
    }
    let l = enumerate_energies(g, d, p).map_err(|e| DynamicsError::Invalid(e.to_string()))?;
    let method = if n <= DENSE_SOLVE_MAX_N { SolveMethod::DenseLu } else { SolveMethod::ConjugateGradient };
    exact_hitting_time_from_energies(n, l.energies(), p.beta, start_mask, target, method)
}

/// One point of an Arrhenius sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ArrheniusPoint {
    pub beta: f64,
    pub mean_tau: f64,
    pub ln_mean: f64,
    /// Standard error of the mean (zero in exact mode).
    pub std_error: f64,
    pub censored: usize,
}

/// Least-squares fit of `ln E[tau]` against `beta`.
#[derive(Debug, Clone, Serialize)]
pub struct ArrheniusFit {
    pub points: Vec<ArrheniusPoint>,
    pub slope: f64,
    pub intercept: f64,
    /// Per-point residual of the fit.
    pub residuals: Vec<f64>,
    /// Finite-difference slopes between consecutive beta values.
    pub fd_slopes: Vec<f64>,
    /// Any censoring at any point invalidates the fit.
    pub censoring_present: bool,
}

/// How each sweep point measures the expected hitting time.
#[derive(Debug, Clone, Copy)]
pub enum SweepMode {
    Exact,
    MonteCarlo { replicas: usize, seed: u64, cap: u64 },
}

/// Measures `E[tau]` from the all-minus to the all-plus state at each
/// inverse temperature and fits `ln E[tau] = slope * beta + intercept` by
/// ordinary least squares.
pub fn arrhenius_sweep(
    g: &Graph,
    d: &DistanceOracle,
    p_base: &ModelParams,
    betas: &[f64],
    mode: SweepMode,
) -> Result<ArrheniusFit, DynamicsError> {
    if betas.len() < 2 {
        return Err(DynamicsError::Invalid("need at least two beta values".into()));
    }
    let n = g.n();
    let mut points = Vec::with_capacity(betas.len());
    for (bi, &beta) in betas.iter().enumerate() {
        let p = ModelParams { beta, ..*p_base };
        let (mean, se, censored) = match mode {
            SweepMode::Exact => {
                let m = exact_expected_hitting_time(g, d, &p, 0, &Target::AllPlus)?;
                (m, 0.0, 0)
            }
            SweepMode::MonteCarlo { replicas, seed, cap } => {
                let start = SpinConfiguration::all_minus(n);
                let stats = hitting_times(
                    g,
                    d,
                    &p,
                    &start,
                    &Target::AllPlus,
                    replicas,
                    seed.wrapping_add(bi as u64),
                    cap,
                )?;
                (stats.mean, stats.std_error, stats.censored_count)
            }
        };
        points.push(ArrheniusPoint {
            beta,
            mean_tau: mean,
            ln_mean: mean.ln(),
            std_error: se,
            censored,
        });
    }

    let k = points.len() as f64;
    let beta_bar = points.iter().map(|p| p.beta).sum::<f64>() / k;
    let y_bar = points.iter().map(|p| p.ln_mean).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.beta - beta_bar).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.beta - beta_bar) * (p.ln_mean - y_bar)).sum();
    if sxx == 0.0 {
        return Err(DynamicsError::Invalid("beta values must not be all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * beta_bar;
    let residuals: Vec<f64> =
        points.iter().map(|p| p.ln_mean - (slope * p.beta + intercept)).collect();
    let fd_slopes: Vec<f64> = points
        .windows(2)
        .map(|w| (w[1].ln_mean - w[0].ln_mean) / (w[1].beta - w[0].beta))
        .collect();
    let censoring_present = points.iter().any(|p| p.censored > 0);
    Ok(ArrheniusFit { points, slope, intercept, residuals, fd_slopes, censoring_present })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{all_pairs_distances, fixture};
    use crate::model::InteractionKernel;
    use approx::assert_abs_diff_eq;

    fn exp_params(j: f64, h: f64, beta: f64) -> ModelParams {
        ModelParams { kernel: InteractionKernel::Exponential { j }, h, beta }
    }

    #[test]
    fn rows_are_stochastic_and_balanced() {
        let g = fixture("prism").unwrap();
        let d = all_pairs_distances(&g);
        let p = exp_params(1.0, 0.4, 1.3);
        let rep = gibbs_and_balance(&g, &d, &p).unwrap();
        assert!(rep.max_relative_residual <= 1e-12, "residual {}", rep.max_relative_residual);
        assert_abs_diff_eq!(rep.mu.iter().sum::<f64>(), 1.0, epsilon = 1e-12);

        // Exhaustive row sums over {sigma} union neighbors, n = 6.
        for mask in 0u64..64 {
            let s = SpinConfiguration::from_mask(mask, 6);
            let mut row = transition_probability(&g, &d, &p, &s, &s).unwrap();
            for b in 0..6 {
                let e = SpinConfiguration::from_mask(mask ^ (1 << b), 6);
                row += transition_probability(&g, &d, &p, &s, &e).unwrap();
            }
            assert_abs_diff_eq!(row, 1.0, epsilon = 1e-12);
        }

        // Two-spin difference is rejected.
        let a = SpinConfiguration::from_mask(0b000011, 6);
        let b = SpinConfiguration::from_mask(0b000000, 6);
        assert!(matches!(transition_probability(&g, &d, &p, &a, &b), Err(DynamicsError::NotAdjacent(2))));
    }

    #[test]
    fn downhill_flip_has_probability_one_over_n() {
        let g = fixture("k4").unwrap();
        let d = all_pairs_distances(&g);
        let p = exp_params(1.0, 0.5, 2.0);
        // From a single-plus state, flipping the plus down is downhill.
        let s = SpinConfiguration::from_mask(0b0001, 4);
        let e = SpinConfiguration::from_mask(0b0000, 4);
        assert_eq!(transition_probability(&g, &d, &p, &s, &e).unwrap(), 0.25);
    }

    #[test]
    fn infinite_temperature_accepts_everything() {
        let g = fixture("petersen").unwrap();
        let d = all_pairs_distances(&g);
        let p = ModelParams { kernel: InteractionKernel::Exponential { j: 1.0 }, h: 0.0, beta: 0.0 };
        let start = SpinConfiguration::all_minus(10);
        let st = run_chain(&g, &d, &p, &start, 5_000, 42);
        assert_eq!(st.accepted, 5_000);
    }

    #[test]
    fn trajectories_are_reproducible() {
        let g = fixture("petersen").unwrap();
        let d = all_pairs_distances(&g);
        let p = exp_params(1.0, 0.5, 1.0);
        let start = SpinConfiguration::all_minus(10);
        let a = run_chain(&g, &d, &p, &start, 20_000, 7);
        let b = run_chain(&g, &d, &p, &start, 20_000, 7);
        assert_eq!(a.sigma, b.sigma);
        assert_eq!(a.accepted, b.accepted);
        let c = run_chain(&g, &d, &p, &start, 20_000, 8);
        assert!(c.sigma != a.sigma || c.accepted != a.accepted);
    }

    #[test]
    fn logged_energy_matches_final_recompute() {
        let g = fixture("prism").unwrap();
        let d = all_pairs_distances(&g);
        let p = exp_params(1.0, 0.4, 0.8);
        let start = SpinConfiguration::all_minus(6);
        let (st, trace) = run_chain_logged(&g, &d, &p, &start, 3_000, 3);
        let direct = crate::model::energy(&g, &d, &p, &st.sigma)
            - crate::model::energy(&g, &d, &p, &start);
        assert_abs_diff_eq!(*trace.last().unwrap(), direct, epsilon = 1e-9);
    }

    #[test]
    fn deep_freeze_keeps_all_plus_absorbing_in_practice() {
        let g = fixture("k4").unwrap();
        let d = all_pairs_distances(&g);
        let p = exp_params(1.0, 0.5, 10.0);
        let start = SpinConfiguration::all_plus(4);
        let mut exits = 0;
        for seed in 0..100 {
            let st = run_chain(&g, &d, &p, &start, 10_000, seed);
            if st.accepted > 0 {
                exits += 1;
            }
        }
        assert!(
            (exits as f64 / 100.0) < 1e-2,
            "observed exit fraction {}",
            exits as f64 / 100.0
        );
    }

    #[test]
    fn zero_beta_gibbs_is_uniform() {
        let g = fixture("k4").unwrap();
        let d = all_pairs_distances(&g);
        let p = ModelParams { kernel: InteractionKernel::Exponential { j: 1.0 }, h: 0.3, beta: 0.0 };
        let rep = gibbs_and_balance(&g, &d, &p).unwrap();
        for m in rep.mu {
            assert_abs_diff_eq!(m, 1.0 / 16.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_field_gibbs_is_flip_symmetric() {
        let g = fixture("prism").unwrap();
        let d = all_pairs_distances(&g);
        let p = ModelParams { kernel: InteractionKernel::Exponential { j: 1.0 }, h: 0.0, beta: 0.9 };
        let rep = gibbs_and_balance(&g, &d, &p).unwrap();
        for m in 0usize..64 {
            assert_abs_diff_eq!(rep.mu[m], rep.mu[!m & 63], epsilon = 1e-12);
        }
    }

    #[test]
    fn long_chain_occupation_matches_gibbs() {
        let g = fixture("k4").unwrap();
        let d = all_pairs_distances(&g);
        let p = exp_params(1.0, 0.3, 0.7);
        let rep = gibbs_and_balance(&g, &d, &p).unwrap();
        let table = p.kernel.table(d.diameter(), g.r());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut sigma = SpinConfiguration::all_minus(4);
        let mut counts = [0u64; 16];
        let steps = 1_000_000u64;
        for _ in 0..steps {
            let x = rng.random_range(0..4);
            let delta = flip_delta_with_table(&g, &d, &table, p.h, &sigma, x);
            if delta <= 0.0 || rng.random::<f64>() < (-p.beta * delta).exp() {
                sigma.flip(x);
            }
            counts[sigma.mask() as usize] += 1;
        }
        let tv: f64 = (0..16)
            .map(|m| (counts[m] as f64 / steps as f64 - rep.mu[m]).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "total variation {tv}");
    }

    #[test]
    fn hitting_time_counts_from_one() {
        let g = fixture("k4").unwrap();
        let d = all_pairs_distances(&g);
        let p = exp_params(1.0, 0.5, 1.0);
        // Start inside the target: tau > 0 still (first return, not zero).
        let start = SpinConfiguration::all_plus(4);
        let stats =
            hitting_times(&g, &d, &p, &start, &Target::AllPlus, 200, 5, 100_000).unwrap();
        assert!(stats.samples.iter().all(|&t| t >= 1));
        assert_eq!(stats.censored_count, 0);
    }

    #[test]
    fn monte_carlo_matches_linear_solve_oracle() {
        let g = fixture("k4").unwrap();
        let d = all_pairs_distances(&g);
        let p = exp_params(1.0, 0.9, 1.5);
        let start = SpinConfiguration::all_minus(4);
        let stats =
            hitting_times(&g, &d, &p, &start, &Target::AllPlus, 20_000, 11, 10_000_000).unwrap();
        let exact = exact_expected_hitting_time(&g, &d, &p, 0, &Target::AllPlus).unwrap();
        assert_eq!(stats.censored_count, 0);
        assert!(
            (stats.mean - exact).abs() <= 3.0 * stats.std_error,
            "mc {} vs exact {} (se {})",
            stats.mean,
            exact,
            stats.std_error
        );
    }

    #[test]
    fn mean_hitting_time_grows_with_beta() {
        let g = fixture("k4").unwrap();
        let d = all_pairs_distances(&g);
        let start = SpinConfiguration::all_minus(4);
        let mut prev = 0.0;
        for (i, beta) in [0.5, 1.0, 1.5].into_iter().enumerate() {
            let p = exp_params(1.0, 0.9, beta);
            let stats = hitting_times(&g, &d, &p, &start, &Target::AllPlus, 2_000, 21 + i as u64, 10_000_000)
                .unwrap();
            assert!(stats.mean >= prev, "beta {beta}: {} < {prev}", stats.mean);
            prev = stats.mean;
        }
    }

    #[test]
    fn dense_and_cg_solvers_agree() {
        let g = fixture("petersen").unwrap();
        let d = all_pairs_distances(&g);
        let p = exp_params(1.0, 0.9, 1.0);
        let l = enumerate_energies(&g, &d, &p).unwrap();
        let dense = exact_hitting_time_from_energies(
            10, l.energies(), p.beta, 0, &Target::AllPlus, SolveMethod::DenseLu,
        )
        .unwrap();
        let cg = exact_hitting_time_from_energies(
            10, l.energies(), p.beta, 0, &Target::AllPlus, SolveMethod::ConjugateGradient,
        )
        .unwrap();
        assert_abs_diff_eq!(dense, cg, epsilon = 1e-6 * dense.abs());
    }

    #[test]
    fn two_state_system_slope_is_the_energy_gap() {
        // Formal n = 1 fixture: states {0, 1} with energy gap 2.5. The only
        // proposal flips the single spin, so E[tau] = exp(beta * gap) and
        // the Arrhenius slope equals the gap exactly.
        let gap = 2.5;
        let energies = vec![0.0, gap];
        let mut lns = Vec::new();
        for beta in [1.0, 2.0, 3.0] {
            let t = exact_hitting_time_from_energies(
                1, &energies, beta, 0, &Target::AllPlus, SolveMethod::DenseLu,
            )
            .unwrap();
            assert_abs_diff_eq!(t, (beta * gap).exp(), epsilon = 1e-9 * (beta * gap).exp());
            lns.push(t.ln());
        }
        let slope = (lns[2] - lns[0]) / 2.0;
        assert_abs_diff_eq!(slope, gap, epsilon = 1e-9);
    }

    #[test]
    fn arrhenius_modes_agree_at_moderate_beta() {
        // A small-barrier instance (the uphill ridge from all-minus is a
        // single 1.5 step) keeps the Monte Carlo side cheap at these betas.
        let g = fixture("petersen").unwrap();
        let d = all_pairs_distances(&g);
        let p = ModelParams {
            kernel: InteractionKernel::PowerLaw { j: 1.0, lambda: 3.0 },
            h: 3.0,
            beta: 1.0,
        };
        let betas = [1.5, 2.0];
        let exact = arrhenius_sweep(&g, &d, &p, &betas, SweepMode::Exact).unwrap();
        let mc = arrhenius_sweep(
            &g,
            &d,
            &p,
            &betas,
            SweepMode::MonteCarlo { replicas: 4_000, seed: 33, cap: 50_000_000 },
        )
        .unwrap();
        assert!(!mc.censoring_present);
        for (pe, pm) in exact.points.iter().zip(&mc.points) {
            assert!(
                (pe.mean_tau - pm.mean_tau).abs() <= 3.0 * pm.std_error,
                "beta {}: exact {} mc {} (se {})",
                pe.beta,
                pe.mean_tau,
                pm.mean_tau,
                pm.std_error
            );
        }
        assert_eq!(exact.fd_slopes.len(), 1);
        assert!(exact.residuals.iter().all(|r| r.abs() < 1e-9));
    }
}
