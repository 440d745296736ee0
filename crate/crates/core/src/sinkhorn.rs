//! Entropic-regularized optimal transport between distributions on a token
//! grid.
//!
//! The solver alternates scaling updates against the Gibbs kernel
//! `exp(-C/epsilon)` until the transport plan's marginals match the inputs.
//! The default path works in the log domain, which tolerates zero-mass cells
//! and small epsilon without underflow; it anneals epsilon from the cost
//! scale down to the requested value with warm-started potentials, and
//! solves each problem in a canonical orientation so the distance is
//! exactly symmetric in its arguments. [`sinkhorn_distance_naive`] is the
//! plain single-epsilon kernel iteration kept as a cross-check.

use crate::grid::TokenGrid;
use thiserror::Error;

/// Allowed deviation of an input distribution's sum from 1.
pub const MASS_SUM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SinkhornError {
    #[error("source and target must have length {expected}, got {source_len} and {target_len}")]
    DimensionMismatch {
        expected: usize,
        source_len: usize,
        target_len: usize,
    },
    #[error("{side} is not a probability vector: {detail}")]
    InvalidDistribution { side: &'static str, detail: String },
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("max_iterations must be positive")]
    ZeroIterations,
    #[error("kernel exp(-C/epsilon) underflowed; raise epsilon or use the log-domain solver")]
    NumericalUnderflow,
    #[error("coordinate list is empty")]
    EmptyCoords,
}

/// Symmetric pairwise cost matrix with zero diagonal, normalized by the
/// coordinate set's bounding-box diagonal so every cost lies in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// Euclidean costs between arbitrary D-dimensional points.
    pub fn from_coords<const D: usize>(coords: &[[f64; D]]) -> Result<CostMatrix, SinkhornError> {
        let n = coords.len();
        if n == 0 {
            return Err(SinkhornError::EmptyCoords);
        }
        let mut lo = coords[0];
        let mut hi = coords[0];
        for c in coords {
            for d in 0..D {
                lo[d] = lo[d].min(c[d]);
                hi[d] = hi[d].max(c[d]);
            }
        }
        let mut diag_sq = 0.0;
        for d in 0..D {
            diag_sq += (hi[d] - lo[d]) * (hi[d] - lo[d]);
        }
        let diag = diag_sq.sqrt();
        let inv = if diag > 0.0 { 1.0 / diag } else { 0.0 };

        let mut data = vec![0.0; n * n];
        for j in 0..n {
            for k in (j + 1)..n {
                let mut d_sq = 0.0;
                for d in 0..D {
                    let diff = coords[j][d] - coords[k][d];
                    d_sq += diff * diff;
                }
                let c = d_sq.sqrt() * inv;
                data[j * n + k] = c;
                data[k * n + j] = c;
            }
        }
        Ok(CostMatrix { n, data })
    }

    /// Costs between the cell centers of a token grid, time axis included
    /// with unit weight, normalized by the grid's 3-D diagonal.
    pub fn from_grid(grid: &TokenGrid) -> CostMatrix {
        let coords: Vec<[f64; 3]> = (0..grid.total_tokens())
            .map(|i| grid.cell_coords(i).expect("index in range"))
            .collect();
        CostMatrix::from_coords(&coords).expect("grid has at least one token")
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        assert!(j < self.n && k < self.n, "cost index out of range");
        self.data[j * self.n + k]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Solver knobs; defaults are epsilon 0.05, 2000 iterations, tolerance 1e-6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams {
            epsilon: 0.05,
            max_iterations: 2000,
            tolerance: 1e-6,
        }
    }
}

/// A validated transport instance; construction checks every invariant so
/// the solvers can assume well-formed inputs.
#[derive(Debug, Clone)]
pub struct TransportProblem<'c> {
    source: Vec<f64>,
    target: Vec<f64>,
    cost: &'c CostMatrix,
    params: SinkhornParams,
}

fn check_distribution(side: &'static str, v: &[f64]) -> Result<(), SinkhornError> {
    let mut sum = 0.0;
    for (i, &x) in v.iter().enumerate() {
        if !(x >= 0.0) {
            return Err(SinkhornError::InvalidDistribution {
                side,
                detail: format!("entry {i} is {x}"),
            });
        }
        sum += x;
    }
    if !(sum - 1.0).abs().le(&MASS_SUM_TOLERANCE) {
        return Err(SinkhornError::InvalidDistribution {
            side,
            detail: format!("sums to {sum}"),
        });
    }
    Ok(())
}

impl<'c> TransportProblem<'c> {
    pub fn new(
        source: Vec<f64>,
        target: Vec<f64>,
        cost: &'c CostMatrix,
        params: SinkhornParams,
    ) -> Result<TransportProblem<'c>, SinkhornError> {
        if source.len() != cost.len() || target.len() != cost.len() {
            return Err(SinkhornError::DimensionMismatch {
                expected: cost.len(),
                source_len: source.len(),
                target_len: target.len(),
            });
        }
        check_distribution("source", &source)?;
        check_distribution("target", &target)?;
        if !(params.epsilon > 0.0 && params.epsilon.is_finite()) {
            return Err(SinkhornError::InvalidEpsilon(params.epsilon));
        }
        if !(params.tolerance > 0.0) {
            return Err(SinkhornError::InvalidTolerance(params.tolerance));
        }
        if params.max_iterations == 0 {
            return Err(SinkhornError::ZeroIterations);
        }
        Ok(TransportProblem {
            source,
            target,
            cost,
            params,
        })
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn cost(&self) -> &CostMatrix {
        self.cost
    }

    pub fn params(&self) -> SinkhornParams {
        self.params
    }
}

/// Outcome of a solve; `distance` is `<P, C>` for the final plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportResult {
    pub distance: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub marginal_error: f64,
}

/// A solve together with its row-major transport plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornSolution {
    pub result: TransportResult,
    pub plan: Vec<f64>,
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// Alternating-update sweeps per annealing stage before epsilon drops.
const ANNEAL_SWEEPS: usize = 8;
/// Geometric decay factor of the annealing schedule.
const ANNEAL_FACTOR: f64 = 4.0;
/// Overrelaxation weight for the target-epsilon iterations; the plain
/// update is the omega = 1 case, and values below 2 keep the fixed point.
const OVERRELAXATION: f64 = 1.7;

/// Overrelaxed potential update; falls back to the plain update whenever
/// either value is infinite so zero-mass -inf potentials stay -inf instead
/// of turning into NaN.
fn relax(old: f64, new: f64, omega: f64) -> f64 {
    if old.is_finite() && new.is_finite() {
        old + omega * (new - old)
    } else {
        new
    }
}

/// Log-domain Sinkhorn. Zero-mass cells get a -inf potential and never
/// receive plan mass, so no smoothing is needed on this path.
///
/// The problem is solved with the lexicographically smaller marginal as the
/// row side; the cost matrix is symmetric, so the swapped orientation has
/// the same optimal value and the transposed plan, and canonicalizing makes
/// the reported distance bitwise symmetric rather than symmetric only up to
/// the stopping residual. Epsilon is annealed geometrically from the cost
/// scale down to `params.epsilon`, rescaling the potentials at each drop;
/// `iterations_used` counts every sweep including the annealing ones.
pub fn sinkhorn_plan(problem: &TransportProblem) -> Result<SinkhornSolution, SinkhornError> {
    let n = problem.source.len();
    let c = problem.cost.data();
    let target_eps = problem.params.epsilon;
    let max_iterations = problem.params.max_iterations;

    let swapped = problem.source > problem.target;
    let (a, b) = if swapped {
        (&problem.target, &problem.source)
    } else {
        (&problem.source, &problem.target)
    };
    let log_a: Vec<f64> = a.iter().map(|&x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|&x| x.ln()).collect();

    let mut phi = vec![0.0f64; n];
    let mut psi = vec![0.0f64; n];
    let mut iterations_used = 0;
    let mut marginal_error = f64::INFINITY;
    let mut converged = false;

    let sweep = |eps: f64, omega: f64, phi: &mut [f64], psi: &mut [f64]| {
        for j in 0..n {
            let row = &c[j * n..(j + 1) * n];
            let lse = log_sum_exp(psi.iter().zip(row).map(|(&p, &cv)| p - cv / eps));
            phi[j] = relax(phi[j], log_a[j] - lse, omega);
        }
        for k in 0..n {
            let lse = log_sum_exp((0..n).map(|j| phi[j] - c[j * n + k] / eps));
            psi[k] = relax(psi[k], log_b[k] - lse, omega);
        }
    };

    // warm stages: costs are normalized to [0, 1], so anneal from 1.0 down
    // to just above the target; the dual potentials f = eps * phi carry
    // over, which in phi coordinates is a multiplication by the eps ratio
    let mut stage_eps = 1.0;
    let mut previous_eps: Option<f64> = None;
    while stage_eps > ANNEAL_FACTOR * target_eps {
        if let Some(prev) = previous_eps {
            for v in phi.iter_mut().chain(psi.iter_mut()) {
                *v *= prev / stage_eps;
            }
        }
        for _ in 0..ANNEAL_SWEEPS {
            // always leave budget for at least one sweep at the target eps
            if iterations_used + 1 >= max_iterations {
                break;
            }
            iterations_used += 1;
            sweep(stage_eps, 1.0, &mut phi, &mut psi);
        }
        previous_eps = Some(stage_eps);
        stage_eps /= ANNEAL_FACTOR;
    }
    if let Some(prev) = previous_eps {
        for v in phi.iter_mut().chain(psi.iter_mut()) {
            *v *= prev / target_eps;
        }
    }

    let measure = |phi: &[f64], psi: &[f64]| -> f64 {
        let mut err = 0.0f64;
        let mut col_sums = vec![0.0f64; n];
        for j in 0..n {
            let mut row_sum = 0.0;
            for k in 0..n {
                let p = (phi[j] + psi[k] - c[j * n + k] / target_eps).exp();
                row_sum += p;
                col_sums[k] += p;
            }
            err = err.max((row_sum - a[j]).abs());
        }
        for k in 0..n {
            err = err.max((col_sums[k] - b[k]).abs());
        }
        err
    };

    // overrelaxation is only locally stable, so ease into it (the annealing
    // handoff leaves the state far from the target fixed point, where a
    // relaxed first sweep overshoots wildly) and safeguard it: relaxed error
    // decay oscillates, but a sweep whose error escapes well past the best
    // seen so far is diverging and gets rolled back, redone unrelaxed, and
    // the weight decays toward the plain update (a rejected sweep and its
    // redo count as a single iteration)
    let mut omega = OVERRELAXATION;
    let mut best_err = f64::INFINITY;
    let mut plain_warmup = 2usize;
    while iterations_used < max_iterations {
        iterations_used += 1;
        if plain_warmup > 0 {
            plain_warmup -= 1;
            sweep(target_eps, 1.0, &mut phi, &mut psi);
            let err = measure(&phi, &psi);
            best_err = best_err.min(err);
            marginal_error = err;
            if err <= problem.params.tolerance {
                converged = true;
                break;
            }
            continue;
        }
        let saved_phi = phi.clone();
        let saved_psi = psi.clone();
        sweep(target_eps, omega, &mut phi, &mut psi);
        let mut err = measure(&phi, &psi);
        if (!err.is_finite() || err > 10.0 * best_err) && omega > 1.0 {
            phi.copy_from_slice(&saved_phi);
            psi.copy_from_slice(&saved_psi);
            sweep(target_eps, 1.0, &mut phi, &mut psi);
            err = measure(&phi, &psi);
            omega = 1.0 + 0.5 * (omega - 1.0);
        }
        best_err = best_err.min(err);
        marginal_error = err;
        if err <= problem.params.tolerance {
            converged = true;
            break;
        }
    }

    // polish with one plain sweep: problems whose feasible plan is forced
    // land exactly on their fixed point, which the relaxed update only
    // approaches; keep whichever state measures the smaller error
    if converged && iterations_used < max_iterations {
        let saved_phi = phi.clone();
        let saved_psi = psi.clone();
        iterations_used += 1;
        sweep(target_eps, 1.0, &mut phi, &mut psi);
        let polished = measure(&phi, &psi);
        if polished <= marginal_error {
            marginal_error = polished;
        } else {
            phi = saved_phi;
            psi = saved_psi;
        }
    }

    let mut plan = vec![0.0f64; n * n];
    let mut distance = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let p = (phi[j] + psi[k] - c[j * n + k] / target_eps).exp();
            let (row, col) = if swapped { (k, j) } else { (j, k) };
            plan[row * n + col] = p;
            distance += p * c[j * n + k];
        }
    }
    Ok(SinkhornSolution {
        result: TransportResult {
            distance,
            iterations_used,
            converged,
            marginal_error,
        },
        plan,
    })
}

/// Log-domain Sinkhorn distance (the default solver).
pub fn sinkhorn_distance(problem: &TransportProblem) -> Result<TransportResult, SinkhornError> {
    sinkhorn_plan(problem).map(|s| s.result)
}

/// Plain kernel-domain Sinkhorn, kept as a cross-check for the log path.
///
/// Zero-mass cells break the multiplicative updates, so any vector
/// containing a zero gets uniform smoothing mass 1e-9 (then renormalized)
/// before iterating. Returns [`SinkhornError::NumericalUnderflow`] when
/// `exp(-C/epsilon)` or a scaling denominator flushes to zero.
pub fn sinkhorn_distance_naive(problem: &TransportProblem) -> Result<TransportResult, SinkhornError> {
    const SMOOTHING: f64 = 1e-9;
    let n = problem.source.len();
    let c = problem.cost.data();
    let eps = problem.params.epsilon;

    let smooth = |v: &[f64]| -> Vec<f64> {
        if v.iter().any(|&x| x == 0.0) {
            let total: f64 = v.iter().map(|x| x + SMOOTHING).sum();
            v.iter().map(|x| (x + SMOOTHING) / total).collect()
        } else {
            v.to_vec()
        }
    };
    let a = smooth(&problem.source);
    let b = smooth(&problem.target);

    let kernel: Vec<f64> = c.iter().map(|&cv| (-cv / eps).exp()).collect();
    for j in 0..n {
        if kernel[j * n..(j + 1) * n].iter().all(|&k| k == 0.0) {
            return Err(SinkhornError::NumericalUnderflow);
        }
    }

    let mut u = vec![1.0f64; n];
    let mut v = vec![1.0f64; n];
    let mut iterations_used = 0;
    let mut marginal_error = f64::INFINITY;
    let mut converged = false;

    while iterations_used < problem.params.max_iterations {
        iterations_used += 1;
        for j in 0..n {
            let mut kv = 0.0;
            for k in 0..n {
                kv += kernel[j * n + k] * v[k];
            }
            if kv == 0.0 || !kv.is_finite() {
                return Err(SinkhornError::NumericalUnderflow);
            }
            u[j] = a[j] / kv;
        }
        for k in 0..n {
            let mut ku = 0.0;
            for j in 0..n {
                ku += kernel[j * n + k] * u[j];
            }
            if ku == 0.0 || !ku.is_finite() {
                return Err(SinkhornError::NumericalUnderflow);
            }
            v[k] = b[k] / ku;
        }

        let mut err = 0.0f64;
        let mut col_sums = vec![0.0f64; n];
        for j in 0..n {
            let mut row_sum = 0.0;
            for k in 0..n {
                let p = u[j] * kernel[j * n + k] * v[k];
                row_sum += p;
                col_sums[k] += p;
            }
            err = err.max((row_sum - a[j]).abs());
        }
        for k in 0..n {
            err = err.max((col_sums[k] - b[k]).abs());
        }
        marginal_error = err;
        if err <= problem.params.tolerance {
            converged = true;
            break;
        }
    }

    let mut distance = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            distance += u[j] * kernel[j * n + k] * v[k] * c[j * n + k];
        }
    }
    Ok(TransportResult {
        distance,
        iterations_used,
        converged,
        marginal_error,
    })
}

/// Sinkhorn distance negated, so that a similarity argmax applies uniformly.
pub fn negative_sinkhorn_sim(
    p: &[f64],
    q: &[f64],
    grid: &TokenGrid,
    epsilon: f64,
) -> Result<f64, SinkhornError> {
    let cost = CostMatrix::from_grid(grid);
    let params = SinkhornParams {
        epsilon,
        ..SinkhornParams::default()
    };
    let problem = TransportProblem::new(p.to_vec(), q.to_vec(), &cost, params)?;
    Ok(-sinkhorn_distance(&problem)?.distance)
}
