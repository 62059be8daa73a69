//! Interaction kernels, the Hamiltonian, and every energy-difference formula:
//! direct pair sums, the distance-shell form of the energy gap to the
//! all-minus state, single-flip local energies, and the parameter conditions
//! that delimit the metastable regime.

use crate::graph::{shell_boundary, DistanceOracle, Graph, UNREACHABLE};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("coupling J must be positive (got {0})")]
    NonPositiveCoupling(f64),
    #[error("power-law exponent lambda must exceed 2 (got {0}); pass allow_soft_decay to override")]
    LambdaTooSmall(f64),
    #[error("external field h must be positive (got {0})")]
    NonPositiveField(f64),
    #[error("inverse temperature beta must be positive (got {0})")]
    NonPositiveBeta(f64),
    #[error("distance argument must be >= 1 (got {0})")]
    BadDistance(usize),
    #[error("config error: {0}")]
    Config(String),
}

/// Distance-decaying pair coupling. Both variants equal `J` at distance 1 and
/// decrease strictly with distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionKernel {
    /// `J * r^(1-i)`: decay base is the graph degree.
    Exponential { j: f64 },
    /// `J * i^(-lambda)` with `lambda > 2`.
    PowerLaw { j: f64, lambda: f64 },
}

impl InteractionKernel {
    pub fn j(&self) -> f64 {
        match *self {
            InteractionKernel::Exponential { j } => j,
            InteractionKernel::PowerLaw { j, .. } => j,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            InteractionKernel::Exponential { .. } => None,
            InteractionKernel::PowerLaw { lambda, .. } => Some(lambda),
        }
    }

    /// Validates `J > 0` and, for the power-law variant, `lambda > 2`.
    /// `allow_soft_decay` relaxes the exponent check to `lambda > 0` for
    /// exploratory runs.
    pub fn validate(&self, allow_soft_decay: bool) -> Result<(), ModelError> {
        if self.j() <= 0.0 {
            return Err(ModelError::NonPositiveCoupling(self.j()));
        }
        if let InteractionKernel::PowerLaw { lambda, .. } = *self {
            let floor = if allow_soft_decay { 0.0 } else { 2.0 };
            if lambda <= floor {
                return Err(ModelError::LambdaTooSmall(lambda));
            }
        }
        Ok(())
    }

    /// Coupling value at hop distance `i >= 1` on a graph of degree `r`.
    #[inline]
    pub fn eval(&self, i: usize, r: usize) -> f64 {
        debug_assert!(i >= 1, "kernel distance must be >= 1");
        match *self {
            InteractionKernel::Exponential { j } => j * (r as f64).powi(1 - i as i32),
            InteractionKernel::PowerLaw { j, lambda } => j * (i as f64).powf(-lambda),
        }
    }

    /// Lookup table of kernel values indexed by distance; entry 0 is unused
    /// and set to zero so `table[d]` is the coupling at hop distance `d`.
    pub fn table(&self, diameter: usize, r: usize) -> Vec<f64> {
        let mut t = vec![0.0; diameter + 1];
        for (i, slot) in t.iter_mut().enumerate().skip(1) {
            *slot = self.eval(i, r);
        }
        t
    }

    /// Limit of the full kernel sum `sum_{i>=1} J(i)`: `J r/(r-1)` for the
    /// exponential variant and `J zeta(lambda)` for the power law. Both stay
    /// below `2J` on the admissible parameter range.
    pub fn tail_sum_limit(&self, r: usize) -> f64 {
        match *self {
            InteractionKernel::Exponential { j } => j * r as f64 / (r as f64 - 1.0),
            InteractionKernel::PowerLaw { j, lambda } => j * crate::bounds::zeta(lambda, 1e-13).expect("lambda > 1"),
        }
    }
}

/// Free-function form of [`InteractionKernel::eval`] with domain checking.
pub fn kernel_eval(k: &InteractionKernel, i: usize, r: usize) -> Result<f64, ModelError> {
    if i < 1 {
        return Err(ModelError::BadDistance(i));
    }
    Ok(k.eval(i, r))
}

/// Full parameter set of the model: kernel, external field, inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub kernel: InteractionKernel,
    pub h: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.kernel.validate(false)?;
        if self.h <= 0.0 {
            return Err(ModelError::NonPositiveField(self.h));
        }
        if self.beta <= 0.0 {
            return Err(ModelError::NonPositiveBeta(self.beta));
        }
        Ok(())
    }

    pub fn j(&self) -> f64 {
        self.kernel.j()
    }
}

/// Wire format for [`ModelParams`]: `{"kernel": "exponential"|"powerlaw",
/// "J": .., "lambda": .., "h": .., "beta": ..}` with `lambda` required
/// exactly when the kernel is the power law.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelParamsWire {
    kernel: String,
    #[serde(rename = "J")]
    j: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    h: f64,
    beta: f64,
}

impl Serialize for ModelParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let wire = ModelParamsWire {
            kernel: match self.kernel {
                InteractionKernel::Exponential { .. } => "exponential".into(),
                InteractionKernel::PowerLaw { .. } => "powerlaw".into(),
            },
            j: self.kernel.j(),
            lambda: self.kernel.lambda(),
            h: self.h,
            beta: self.beta,
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let wire = ModelParamsWire::deserialize(d)?;
        let kernel = match wire.kernel.as_str() {
            "exponential" => {
                if wire.lambda.is_some() {
                    return Err(D::Error::custom("lambda is not a parameter of the exponential kernel"));
                }
                InteractionKernel::Exponential { j: wire.j }
            }
            "powerlaw" => InteractionKernel::PowerLaw {
                j: wire.j,
                lambda: wire
                    .lambda
                    .ok_or_else(|| D::Error::custom("powerlaw kernel requires lambda"))?,
            },
            other => return Err(D::Error::custom(format!("unknown kernel `{other}`"))),
        };
        Ok(ModelParams { kernel, h: wire.h, beta: wire.beta })
    }
}

/// A +/-1 spin assignment, bit-packed with a cached count of plus spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    blocks: Vec<u64>,
    n: usize,
    plus_count: usize,
}

impl SpinConfiguration {
    pub fn all_minus(n: usize) -> Self {
        SpinConfiguration { blocks: vec![0; n.div_ceil(64)], n, plus_count: 0 }
    }

    pub fn all_plus(n: usize) -> Self {
        let mut s = Self::all_minus(n);
        for x in 0..n {
            s.set_plus(x, true);
        }
        s
    }

    /// Builds from a bitmask; bit `x` set means spin `x` is plus. Requires `n <= 64`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        assert!(n <= 64, "mask form only supports n <= 64");
        assert!(n == 64 || mask < (1u64 << n), "mask has bits beyond n");
        let mut s = Self::all_minus(n);
        s.blocks[0] = mask;
        s.plus_count = mask.count_ones() as usize;
        s
    }

    pub fn from_plus_set(plus: &[usize], n: usize) -> Self {
        let mut s = Self::all_minus(n);
        for &x in plus {
            s.set_plus(x, true);
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn plus_count(&self) -> usize {
        self.plus_count
    }

    #[inline]
    pub fn is_plus(&self, x: usize) -> bool {
        self.blocks[x / 64] >> (x % 64) & 1 == 1
    }

    /// Spin value as +1 or -1.
    #[inline]
    pub fn spin(&self, x: usize) -> f64 {
        if self.is_plus(x) {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn flip(&mut self, x: usize) {
        let was_plus = self.is_plus(x);
        self.blocks[x / 64] ^= 1u64 << (x % 64);
        if was_plus {
            self.plus_count -= 1;
        } else {
            self.plus_count += 1;
        }
    }

    fn set_plus(&mut self, x: usize, plus: bool) {
        if self.is_plus(x) != plus {
            self.flip(x);
        }
    }

    /// Bitmask form (requires `n <= 64`).
    pub fn mask(&self) -> u64 {
        assert!(self.n <= 64, "mask form only supports n <= 64");
        self.blocks[0]
    }

    pub fn plus_vertices(&self) -> Vec<usize> {
        (0..self.n).filter(|&x| self.is_plus(x)).collect()
    }

    /// Membership slice of the plus set, for boundary queries.
    pub fn plus_membership(&self) -> Vec<bool> {
        (0..self.n).map(|x| self.is_plus(x)).collect()
    }
}

/// Hamiltonian `H(sigma) = -sum_{x<y} J(d(x,y)) sigma_x sigma_y - h sum_x sigma_x`.
/// The pair sum runs over unordered pairs, in a fixed (x ascending, y ascending)
/// order so that symmetric evaluations cancel bit-for-bit.
pub fn energy(g: &Graph, d: &DistanceOracle, p: &ModelParams, s: &SpinConfiguration) -> f64 {
    let table = p.kernel.table(d.diameter(), g.r());
    energy_with_table(g, d, &table, p.h, s)
}

/// [`energy`] with a precomputed kernel table (see [`InteractionKernel::table`]).
pub fn energy_with_table(
    g: &Graph,
    d: &DistanceOracle,
    table: &[f64],
    h: f64,
    s: &SpinConfiguration,
) -> f64 {
    let n = g.n();
    debug_assert_eq!(s.n(), n);
    let mut pair_sum = 0.0;
    for x in 0..n {
        let row = d.row(x);
        let sx = s.spin(x);
        for y in (x + 1)..n {
            let dist = row[y];
            if dist != UNREACHABLE && dist > 0 {
                pair_sum += table[dist as usize] * sx * s.spin(y);
            }
        }
    }
    let field_sum = s.plus_count() as f64 - (n - s.plus_count()) as f64;
    -pair_sum - h * field_sum
}

/// Energy gap `H(sigma_A) - H(all minus)` via the distance-shell form
/// `-2h|A| + 2 sum_i J(i) |shell_i(A)|`. Exact zero for the empty set and
/// exactly `-2hn` for the full set.
pub fn delta_energy_shell(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
    s: &SpinConfiguration,
) -> f64 {
    if s.plus_count() == 0 {
        return 0.0;
    }
    let membership = s.plus_membership();
    let report = shell_boundary(g, d, &membership).expect("plus set is nonempty");
    let table = p.kernel.table(d.diameter(), g.r());
    let mut boundary_term = 0.0;
    for i in 1..=d.diameter() {
        boundary_term += table[i] * report.count(i) as f64;
    }
    -2.0 * p.h * s.plus_count() as f64 + 2.0 * boundary_term
}

/// Energy change of flipping spin `x`:
/// `H(sigma^(x)) - H(sigma) = 2 sigma_x (h + sum_{y != x} J(d(x,y)) sigma_y)`.
/// O(n) using the distance row of `x`.
pub fn flip_delta(g: &Graph, d: &DistanceOracle, p: &ModelParams, s: &SpinConfiguration, x: usize) -> f64 {
    let table = p.kernel.table(d.diameter(), g.r());
    flip_delta_with_table(g, d, &table, p.h, s, x)
}

/// [`flip_delta`] with a precomputed kernel table; this is the hot path of
/// the Monte Carlo dynamics.
#[inline]
pub fn flip_delta_with_table(
    g: &Graph,
    d: &DistanceOracle,
    table: &[f64],
    h: f64,
    s: &SpinConfiguration,
    x: usize,
) -> f64 {
    let n = g.n();
    let row = d.row(x);
    let mut local_field = 0.0;
    for y in 0..n {
        let dist = row[y];
        if y != x && dist != UNREACHABLE {
            local_field += table[dist as usize] * s.spin(y);
        }
    }
    2.0 * s.spin(x) * (h + local_field)
}

/// Outcome of checking the metastable-regime parameter conditions. Clause
/// failures are reported, never fatal: desk-scale instances routinely violate
/// the size clause.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// `n > max(ceil(r^r), ceil(r^2 J / h))`.
    pub clause1_size: bool,
    /// `r >= 3`.
    pub clause1_degree: bool,
    /// `h > 0`.
    pub clause2_field: bool,
    /// `J >= max(1, ceil(h / i_e))`.
    pub clause2_coupling: bool,
    /// Derived implication `J > h/r` (follows from clause 2 since `i_e <= r`).
    pub implies_j_gt_h_over_r: bool,
    pub n: usize,
    pub r: usize,
    pub size_floor: u64,
    pub i_e: f64,
}

impl ConditionReport {
    pub fn clause1(&self) -> bool {
        self.clause1_size && self.clause1_degree
    }

    pub fn clause2(&self) -> bool {
        self.clause2_field && self.clause2_coupling
    }

    pub fn all(&self) -> bool {
        self.clause1() && self.clause2()
    }
}

/// Evaluates both parameter-condition clauses against an instance, given a
/// value (exact or bound) for the Cheeger constant `i_e`.
pub fn validate_conditions(n: usize, r: usize, p: &ModelParams, i_e: f64) -> ConditionReport {
    let j = p.j();
    let r_pow_r = (r as f64).powi(r as i32).ceil() as u64;
    let coupling_floor = ((r * r) as f64 * j / p.h).ceil() as u64;
    let size_floor = r_pow_r.max(coupling_floor);
    let clause2_coupling = p.h > 0.0 && i_e > 0.0 && j >= 1f64.max((p.h / i_e).ceil());
    ConditionReport {
        clause1_size: (n as u64) > size_floor,
        clause1_degree: r >= 3,
        clause2_field: p.h > 0.0,
        clause2_coupling,
        implies_j_gt_h_over_r: j > p.h / r as f64,
        n,
        r,
        size_floor,
        i_e,
    }
}
