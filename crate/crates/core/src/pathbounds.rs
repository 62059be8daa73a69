//! Constructive single-flip paths between the two uniform states: local flip
//! conditions, randomized-then-greedy shrink and grow constructions with
//! per-step energy audits, and the concatenated reference path that upper
//! bounds the communication height between all-minus and all-plus.

use crate::bounds::{gamma_bounds, s_formulas, step_cost_bound};
use crate::graph::{
    cheeger_seeded, cheeger_lower_bound, vertex_shell_counts, CheegerMode, DistanceOracle, Graph,
    GraphError, CHEEGER_EXACT_MAX_N,
};
use crate::landscape::{communication_height, enumerate_energies};
use crate::model::{
    delta_energy_shell, InteractionKernel, ModelError, ModelParams, SpinConfiguration,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// Largest instance the path machinery accepts (sets are stored as 64-bit masks).
pub const PATH_MAX_N: usize = 64;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("vertex {vertex} is not on the {expected} side of the set")]
    WrongSide { vertex: usize, expected: &'static str },
    #[error("plus set size {size} outside the admissible range [{lo}, {hi}]")]
    BadSetSize { size: usize, lo: usize, hi: usize },
    #[error("no eligible boundary vertex although work remains (disconnected graph?)")]
    NoBoundary,
    #[error("instance too large: n = {0} exceeds {PATH_MAX_N}")]
    TooLarge(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Direction of a boundary flip relative to the plus set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlipSide {
    /// Flip a plus spin down (remove a vertex from the set).
    Shrink,
    /// Flip a minus spin up (add a vertex to the set).
    Grow,
}

/// Outcome of the local flip condition at one vertex.
///
/// `rhs` is the shell-weighted boundary imbalance
/// `sum_i J(i) (|shell_i(x) intersect A^c| - |shell_i(x) intersect A|)`.
/// Flipping `x` changes the energy by `2h - 2 rhs` (shrink) or
/// `-2h + 2 rhs` (grow), so a shrink is non-increasing iff `h <= rhs` and a
/// grow is non-increasing iff `h >= rhs`. The predicate is checked against
/// the directly computed energy difference on every audited step.
#[derive(Debug, Clone, Serialize)]
pub struct FlipCondition {
    pub side: FlipSide,
    pub vertex: usize,
    pub h: f64,
    pub rhs: f64,
    /// Whether the flip does not increase the energy.
    pub beneficial: bool,
    /// Exact predicted energy change of the flip.
    pub predicted_delta: f64,
}

/// Evaluates the flip condition for `x` against the plus set `a`
/// (`a[v]` true means `v` is plus). `side` states which move is intended;
/// a vertex on the other side is an error.
pub fn flip_condition(
    g: &Graph,
    d: &DistanceOracle,
    k: &InteractionKernel,
    h: f64,
    x: usize,
    a: &[bool],
    side: FlipSide,
) -> Result<FlipCondition, PathError> {
    if x >= g.n() || a.len() != g.n() {
        return Err(PathError::WrongSide { vertex: x, expected: "valid" });
    }
    match side {
        FlipSide::Shrink if !a[x] => {
            return Err(PathError::WrongSide { vertex: x, expected: "plus" })
        }
        FlipSide::Grow if a[x] => {
            return Err(PathError::WrongSide { vertex: x, expected: "minus" })
        }
        _ => {}
    }
    let not_a: Vec<bool> = a.iter().map(|&v| !v).collect();
    let c_minus = vertex_shell_counts(d, x, &not_a);
    let c_plus = vertex_shell_counts(d, x, a);
    let mut rhs = 0.0;
    for i in 1..=d.diameter() {
        rhs += k.eval(i, g.r()) * (c_minus.count(i) as f64 - c_plus.count(i) as f64);
    }
    let (predicted_delta, beneficial) = match side {
        FlipSide::Shrink => (2.0 * h - 2.0 * rhs, h <= rhs),
        FlipSide::Grow => (-2.0 * h + 2.0 * rhs, h >= rhs),
    };
    Ok(FlipCondition { side, vertex: x, h, rhs, beneficial, predicted_delta })
}

/// Audit record of one flip along a constructed path.
#[derive(Debug, Clone, Serialize)]
pub struct StepAudit {
    pub vertex: usize,
    pub side: FlipSide,
    /// True for the deterministic second phase, false for the randomized first.
    pub greedy: bool,
    /// Energy change actually incurred (difference of exact shell-form gaps).
    pub delta: f64,
    /// Energy change predicted by the flip condition.
    pub predicted_delta: f64,
    /// Predicted and actual change agree (relative 1e-9), hence so do signs.
    pub sign_agreement: bool,
    /// Per-step ceiling: `2h + B` (shrink) or `-2h + B` (grow) with
    /// `B = 2 sum_i J(i)(r(r-1)^(i-1) - 1)`.
    pub step_bound: f64,
    pub within_bound: bool,
    /// Distance-shell profile of the opposite side around the flipped
    /// vertex (the profile the step estimate leans on).
    pub opposite_profile: Vec<u64>,
    /// Whether that profile has no gaps (a zero shell never followed by a
    /// populated one) — the hypothesis of the shell-profile inequality.
    pub profile_zero_tail: bool,
}

/// A single-flip path through plus-set space.
#[derive(Debug, Clone, Serialize)]
pub struct PathTrace {
    /// Visited states as bitmasks; consecutive entries differ in one bit.
    pub masks: Vec<u64>,
    /// Exact energy gap to the all-minus state at each visited state.
    pub energies: Vec<f64>,
    pub max_energy: f64,
    pub steps: Vec<StepAudit>,
}

/// Where the expansion constant fed into the path-length formula came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExpansionSource {
    /// Exhaustive Cheeger computation.
    Exact,
    /// The closed-form degree bound `r/2 - sqrt(ln 2) sqrt(r)`.
    LowerBoundFormula,
}

/// A constructed shrink or grow path plus its audit summary.
#[derive(Debug, Clone, Serialize)]
pub struct PathReport {
    pub side: FlipSide,
    pub trace: PathTrace,
    pub final_mask: u64,
    /// Expansion constant used in the length formula, and its provenance
    /// (the formula's output shifts with it).
    pub i_e: f64,
    pub i_e_source: ExpansionSource,
    /// Length formula value, after capping at the available vertex count.
    pub s_used: u64,
    /// Randomized flips actually performed (may stop early if the set empties).
    pub random_flips: usize,
    /// Headline excess ceiling `(2h + B) * s_used`.
    pub headline_bound: f64,
    /// `max_energy - H(start) <= headline_bound`.
    pub headline_ok: bool,
    /// Strictly lower endpoint: `H(final) < H(start)`.
    pub endpoint_drop: bool,
}

struct PathBuilder<'a> {
    g: &'a Graph,
    d: &'a DistanceOracle,
    p: &'a ModelParams,
    membership: Vec<bool>,
    sigma: SpinConfiguration,
    masks: Vec<u64>,
    energies: Vec<f64>,
    steps: Vec<StepAudit>,
    /// `B = 2 sum_i J(i)(r(r-1)^(i-1) - 1)` over the distance horizon.
    b_sum: f64,
}

impl<'a> PathBuilder<'a> {
    fn new(
        g: &'a Graph,
        d: &'a DistanceOracle,
        p: &'a ModelParams,
        membership: Vec<bool>,
    ) -> Result<Self, PathError> {
        let sigma = SpinConfiguration::from_plus_set(
            &membership
                .iter()
                .enumerate()
                .filter_map(|(v, &m)| m.then_some(v))
                .collect::<Vec<_>>(),
            g.n(),
        );
        let b_sum = 2.0 * step_cost_bound(&p.kernel, g.r(), d.diameter())?.exact_sum;
        let e0 = delta_energy_shell(g, d, p, &sigma);
        Ok(PathBuilder {
            g,
            d,
            p,
            masks: vec![sigma.mask()],
            energies: vec![e0],
            steps: Vec::new(),
            membership,
            sigma,
            b_sum,
        })
    }

    fn plus_count(&self) -> usize {
        self.sigma.plus_count()
    }

    fn mask(&self) -> u64 {
        self.sigma.mask()
    }

    /// Vertices on the flippable side that touch the opposite side, ascending.
    fn boundary_vertices(&self, side: FlipSide) -> Vec<usize> {
        (0..self.g.n())
            .filter(|&v| {
                let on_source = match side {
                    FlipSide::Shrink => self.membership[v],
                    FlipSide::Grow => !self.membership[v],
                };
                on_source && self.g.neighbors(v).iter().any(|&w| self.membership[w] != self.membership[v])
            })
            .collect()
    }

    /// Lowest-index vertex whose flip condition is beneficial, if any.
    fn greedy_candidate(&self, side: FlipSide) -> Result<Option<usize>, PathError> {
        for v in 0..self.g.n() {
            let on_source = match side {
                FlipSide::Shrink => self.membership[v],
                FlipSide::Grow => !self.membership[v],
            };
            if on_source
                && flip_condition(self.g, self.d, &self.p.kernel, self.p.h, v, &self.membership, side)?
                    .beneficial
            {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn flip(&mut self, x: usize, side: FlipSide, greedy: bool) -> Result<(), PathError> {
        let fc = flip_condition(self.g, self.d, &self.p.kernel, self.p.h, x, &self.membership, side)?;
        let opposite: Vec<bool> = match side {
            FlipSide::Shrink => self.membership.iter().map(|&v| !v).collect(),
            FlipSide::Grow => self.membership.clone(),
        };
        let profile = vertex_shell_counts(self.d, x, &opposite);
        let mut zero_tail = true;
        let mut seen_zero = false;
        for &c in profile.counts() {
            if c == 0 {
                seen_zero = true;
            } else if seen_zero {
                zero_tail = false;
            }
        }

        let prev = *self.energies.last().unwrap();
        self.sigma.flip(x);
        self.membership[x] = !self.membership[x];
        let next = delta_energy_shell(self.g, self.d, self.p, &self.sigma);
        let delta = next - prev;
        let step_bound = match side {
            FlipSide::Shrink => 2.0 * self.p.h + self.b_sum,
            FlipSide::Grow => -2.0 * self.p.h + self.b_sum,
        };
        self.steps.push(StepAudit {
            vertex: x,
            side,
            greedy,
            delta,
            predicted_delta: fc.predicted_delta,
            sign_agreement: (delta - fc.predicted_delta).abs() <= 1e-9 * (1.0 + delta.abs()),
            step_bound,
            within_bound: delta <= step_bound + 1e-9,
            opposite_profile: profile.counts().to_vec(),
            profile_zero_tail: zero_tail,
        });
        self.masks.push(self.sigma.mask());
        self.energies.push(next);
        Ok(())
    }

    fn into_trace(self) -> PathTrace {
        let max_energy = self.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        PathTrace { masks: self.masks, energies: self.energies, max_energy, steps: self.steps }
    }
}

/// Expansion constant for the length formula: exact Cheeger when the
/// exhaustive computation is affordable, else the closed-form lower bound.
fn expansion_constant(g: &Graph) -> Result<(f64, ExpansionSource), PathError> {
    if g.n() <= CHEEGER_EXACT_MAX_N {
        let c = cheeger_seeded(g, CheegerMode::ExactHalfOrLess, 0)?;
        Ok((c.value, ExpansionSource::Exact))
    } else {
        Ok((cheeger_lower_bound(g.r()), ExpansionSource::LowerBoundFormula))
    }
}

fn build_side_path(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    a: &[bool],
    seed: u64,
    side: FlipSide,
) -> Result<PathReport, PathError> {
    let n = g.n();
    if n > PATH_MAX_N {
        return Err(PathError::TooLarge(n));
    }
    if a.len() != n {
        return Err(PathError::BadSetSize { size: a.len(), lo: n, hi: n });
    }
    let size = a.iter().filter(|&&v| v).count();
    match side {
        FlipSide::Shrink => {
            // 1 <= |A| <= n/2.
            if size == 0 || 2 * size > n {
                return Err(PathError::BadSetSize { size, lo: 1, hi: n / 2 });
            }
        }
        FlipSide::Grow => {
            // floor(n/2) <= |A| < n (the floor admits the half set on odd n).
            if size < n / 2 || size >= n {
                return Err(PathError::BadSetSize { size, lo: n / 2, hi: n - 1 });
            }
        }
    }

    let (i_e, i_e_source) = expansion_constant(g)?;
    let sf = s_formulas(size, n - size, p.h, i_e, &p.kernel, g.r(), d.diameter())?;
    let (s_formula, workable) = match side {
        FlipSide::Shrink => (sf.s_shrink, size as u64),
        FlipSide::Grow => (sf.s_grow, (n - size) as u64),
    };
    let s_used = s_formula.min(workable);

    let mut b = PathBuilder::new(g, d, p, a.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_flips = 0usize;
    for _ in 0..s_used {
        let eligible = b.boundary_vertices(side);
        if eligible.is_empty() {
            let exhausted = match side {
                FlipSide::Shrink => b.plus_count() == 0,
                FlipSide::Grow => b.plus_count() == n,
            };
            if exhausted {
                break;
            }
            return Err(PathError::NoBoundary);
        }
        let x = eligible[rng.random_range(0..eligible.len())];
        b.flip(x, side, false)?;
        random_flips += 1;
    }
    while let Some(x) = b.greedy_candidate(side)? {
        b.flip(x, side, true)?;
    }

    let final_mask = b.mask();
    let b_sum = b.b_sum;
    let trace = b.into_trace();
    let headline_bound = (2.0 * p.h + b_sum) * s_used as f64;
    let excess = trace.max_energy - trace.energies[0];
    let headline_ok = excess <= headline_bound + 1e-9;
    let endpoint_drop = *trace.energies.last().unwrap() < trace.energies[0];
    Ok(PathReport {
        side,
        final_mask,
        i_e,
        i_e_source,
        s_used,
        random_flips,
        headline_bound,
        headline_ok,
        endpoint_drop,
        trace,
    })
}

/// Shrinks a plus set toward the all-minus state: first `s` uniformly chosen
/// boundary pluses (the length formula's count), then greedily every plus
/// whose flip condition is non-increasing, lowest index first, until none
/// remain. Requires `1 <= |A| <= n/2` and a connected graph.
pub fn shrink_path(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    a: &[bool],
    seed: u64,
) -> Result<PathReport, PathError> {
    build_side_path(g, d, p, a, seed, FlipSide::Shrink)
}

/// Grows a plus set toward the all-plus state; mirror image of
/// [`shrink_path`]. Requires `floor(n/2) <= |A| < n`.
pub fn grow_path(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    a: &[bool],
    seed: u64,
) -> Result<PathReport, PathError> {
    build_side_path(g, d, p, a, seed, FlipSide::Grow)
}

/// The concatenated reference path and its comparisons.
#[derive(Debug, Clone, Serialize)]
pub struct ReferencePathReport {
    /// Full path from all-minus to all-plus through the half set.
    pub masks: Vec<u64>,
    /// Energy gap to the all-minus state at each step.
    pub energies: Vec<f64>,
    /// Maximum gap along the path: a valid upper bound on
    /// `Phi(all-minus, all-plus) - H(all-minus)`.
    pub max_energy: f64,
    pub shrink_legs: Vec<PathReport>,
    pub grow_legs: Vec<PathReport>,
    /// Flips forced to restore progress when a leg stalled (zero under
    /// regime-condition parameters).
    pub forced_flips: usize,
    /// Exact `Phi(all-minus, all-plus) - H(all-minus)` when `n <= 14`.
    pub exact_phi_gap: Option<f64>,
    /// Explicit closed-form barrier upper bound for this instance.
    pub gamma_u_explicit: f64,
    /// Whether the constructed maximum stays below the closed-form bound
    /// (asymptotic claim; reported, never asserted).
    pub within_gamma_u: bool,
    /// The path must cross the half-filled manifold.
    pub visits_half_manifold: bool,
    /// The half set the path pivots on.
    pub half_set: Vec<usize>,
    /// Whether the half set came from the exhaustive Cheeger computation.
    pub half_set_exact: bool,
}

/// Builds the reference path: pivot on a minimum-boundary half set `P`,
/// shrink `P` to all-minus, reverse that leg, then grow `P` to all-plus.
/// The maximum energy along the concatenation upper-bounds the exact
/// communication height, which is also computed for comparison when the
/// state space is enumerable.
pub fn reference_path_bound(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    seed: u64,
) -> Result<ReferencePathReport, PathError> {
    let n = g.n();
    if n > PATH_MAX_N {
        return Err(PathError::TooLarge(n));
    }
    let half = n / 2;
    let (half_set, half_set_exact) = if n <= CHEEGER_EXACT_MAX_N {
        (cheeger_seeded(g, CheegerMode::ExactExactHalf, seed)?.witness, true)
    } else {
        (resize_witness(g, cheeger_seeded(g, CheegerMode::Heuristic, seed)?.witness, half), false)
    };
    let mut p_membership = vec![false; n];
    for &v in &half_set {
        p_membership[v] = true;
    }

    // Shrink leg chain: P -> ... -> all-minus.
    let mut down_masks: Vec<u64> = Vec::new();
    let mut down_energies: Vec<f64> = Vec::new();
    let mut shrink_legs = Vec::new();
    let mut forced_flips = 0usize;
    let mut current = p_membership.clone();
    let mut leg = 0u64;
    {
        let b0 = PathBuilder::new(g, d, p, current.clone())?;
        down_masks.push(b0.mask());
        down_energies.push(b0.energies[0]);
    }
    while current.iter().any(|&v| v) {
        let rep = shrink_path(g, d, p, &current, seed.wrapping_add(leg))?;
        leg += 1;
        if rep.final_mask == *down_masks.last().unwrap() {
            // Stalled: force the lowest-index boundary plus down to keep the
            // chain moving (never taken under regime-condition parameters).
            let mut b = PathBuilder::new(g, d, p, current.clone())?;
            let eligible = b.boundary_vertices(FlipSide::Shrink);
            let &x = eligible.first().ok_or(PathError::NoBoundary)?;
            b.flip(x, FlipSide::Shrink, false)?;
            forced_flips += 1;
            current = b.membership.clone();
            let t = b.into_trace();
            down_masks.push(t.masks[1]);
            down_energies.push(t.energies[1]);
            continue;
        }
        for (m, e) in rep.trace.masks.iter().zip(&rep.trace.energies).skip(1) {
            down_masks.push(*m);
            down_energies.push(*e);
        }
        current = (0..n).map(|v| rep.final_mask >> v & 1 == 1).collect();
        shrink_legs.push(rep);
    }

    // Reverse into all-minus -> ... -> P.
    let mut masks: Vec<u64> = down_masks.into_iter().rev().collect();
    let mut energies: Vec<f64> = down_energies.into_iter().rev().collect();

    // Grow leg chain: P -> ... -> all-plus.
    let mut grow_legs = Vec::new();
    let mut current = p_membership;
    while current.iter().any(|&v| !v) {
        let rep = grow_path(g, d, p, &current, seed.wrapping_add(1_000 + leg))?;
        leg += 1;
        if rep.final_mask == *masks.last().unwrap() {
            let mut b = PathBuilder::new(g, d, p, current.clone())?;
            let eligible = b.boundary_vertices(FlipSide::Grow);
            let &x = eligible.first().ok_or(PathError::NoBoundary)?;
            b.flip(x, FlipSide::Grow, false)?;
            forced_flips += 1;
            current = b.membership.clone();
            let t = b.into_trace();
            masks.push(t.masks[1]);
            energies.push(t.energies[1]);
            continue;
        }
        for (m, e) in rep.trace.masks.iter().zip(&rep.trace.energies).skip(1) {
            masks.push(*m);
            energies.push(*e);
        }
        current = (0..n).map(|v| rep.final_mask >> v & 1 == 1).collect();
        grow_legs.push(rep);
    }

    let max_energy = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exact_phi_gap = if n <= crate::dynamics::EXACT_HITTING_MAX_N {
        let l = enumerate_energies(g, d, p).map_err(|e| PathError::Graph(GraphError::Invalid(e.to_string())))?;
        Some(communication_height(&l, 0, l.full_mask()) - l.energy(0))
    } else {
        None
    };
    let gamma_u_explicit = gamma_bounds(n, g.r(), &p.kernel, d.diameter(), None)?.gamma_u_explicit;
    let visits_half_manifold = masks.iter().any(|m| m.count_ones() as usize == half);

    Ok(ReferencePathReport {
        masks,
        energies,
        max_energy,
        shrink_legs,
        grow_legs,
        forced_flips,
        exact_phi_gap,
        gamma_u_explicit,
        within_gamma_u: max_energy <= gamma_u_explicit,
        visits_half_manifold,
        half_set,
        half_set_exact,
    })
}

/// Adjusts a witness set to exactly `target` vertices, greedily moving the
/// vertex that increases the cut least at each step.
fn resize_witness(g: &Graph, mut w: Vec<usize>, target: usize) -> Vec<usize> {
    let n = g.n();
    let mut member = vec![false; n];
    for &v in &w {
        member[v] = true;
    }
    let cut_delta = |member: &[bool], v: usize, joining: bool| -> i64 {
        g.neighbors(v)
            .iter()
            .map(|&u| {
                let same_after = member[u] == joining;
                if same_after {
                    -1i64
                } else {
                    1
                }
            })
            .sum()
    };
    while w.len() < target {
        let v = (0..n)
            .filter(|&v| !member[v])
            .min_by_key(|&v| (cut_delta(&member, v, true), v))
            .expect("set smaller than n");
        member[v] = true;
        w.push(v);
    }
    while w.len() > target {
        let v = *w
            .iter()
            .min_by_key(|&&v| (cut_delta(&member, v, false), v))
            .expect("nonempty");
        member[v] = false;
        w.retain(|&u| u != v);
    }
    w.sort_unstable();
    w
}
