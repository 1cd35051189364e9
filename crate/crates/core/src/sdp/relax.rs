use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::solver::{self, Residuals, SdpData, SolverStatus};
use crate::duality::{min_power_downlink, CouplingSystem};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::linalg::{dominant_eigpair, from_real_embedding, gain, hermitian_eigen, quad_form, ComplexMat, ComplexVec};
use crate::precoding::{capacity, EncodingOrder, RateWeights, Strategy};
use crate::region::{power_simplex, BeamSource, Provenance, RatePoint, RateRegion, RegionMeta, HULL_CLOSURE};
use crate::scenario::Scenario;

/// Largest problem accepted by [`sdp_solve`] in either dimension.
pub const MAX_SDP_DIM: usize = 8;
/// Phase-I margin below which the constraints are declared infeasible.
pub const PHASE1_TOL: f64 = 1e-8;
/// Relative eigenvalue threshold used when reporting numerical ranks.
pub const RANK_TOL: f64 = 1e-6;
/// DPC bisection enumerates all orders up to this many active pairs.
pub const MAX_PAIRS_ORDER_SEARCH: usize = 4;

/// SINR constraint of node `(pair, node)`:
/// `h^H Q_pair h - gamma sum_{j in interferers} h^H Q_j h >= gamma sigma2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpConstraint {
    pub pair: usize,
    pub node: usize,
    pub channel: ComplexVec,
    pub gamma: f64,
    pub interferers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    n_pairs: usize,
    n_antennas: usize,
    sigma2: f64,
    strategy: Strategy,
    order: Option<EncodingOrder>,
    constraints: Vec<SdpConstraint>,
}

impl SdpProblem {
    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn order(&self) -> Option<&EncodingOrder> {
        self.order.as_ref()
    }

    /// Constraints ordered by pair, then node.
    pub fn constraints(&self) -> &[SdpConstraint] {
        &self.constraints
    }

    fn constraint(&self, pair: usize, node: usize) -> &SdpConstraint {
        &self.constraints[2 * pair + node]
    }

    /// SINR of every constraint for beams `u` and powers `p`, in constraint
    /// order.
    pub fn sinrs(&self, u: &[ComplexVec], p: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| {
                let interference: f64 = c.interferers.iter().map(|&j| p[j] * gain(&c.channel, &u[j])).sum();
                p[c.pair] * gain(&c.channel, &u[c.pair]) / (interference + self.sigma2)
            })
            .collect()
    }

    /// Largest `gamma - sinr` over all constraints (nonpositive when met).
    pub fn max_sinr_shortfall(&self, u: &[ComplexVec], p: &[f64]) -> f64 {
        self.sinrs(u, p)
            .iter()
            .zip(&self.constraints)
            .map(|(s, c)| c.gamma - s)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// SDP relaxation of the power minimization with SINR targets
/// `targets[i][k]`. Dirty-paper mode needs the encoding order; there pair
/// `i` only sees interference from pairs encoded after it.
pub fn build_sdp(
    scenario: &Scenario,
    targets: &[[f64; 2]],
    strategy: Strategy,
    order: Option<&EncodingOrder>,
) -> Result<SdpProblem> {
    let n = scenario.n_pairs();
    if targets.len() != n {
        return invalid(format!("expected {n} target pairs, got {}", targets.len()));
    }
    for (i, t) in targets.iter().enumerate() {
        for (k, &g) in t.iter().enumerate() {
            if !(g > 0.0) || !g.is_finite() {
                return invalid(format!("SINR target of node ({i}, {k}) must be positive and finite, got {g}"));
            }
        }
    }
    let order = match (strategy, order) {
        (Strategy::Linear, _) => None,
        (Strategy::Dpc, None) => return invalid("dirty-paper relaxation needs an encoding order"),
        (Strategy::Dpc, Some(o)) => {
            if o.len() != n {
                return invalid("encoding order length does not match n_pairs");
            }
            Some(o.clone())
        }
    };
    let mut constraints = Vec::with_capacity(2 * n);
    for i in 0..n {
        let interferers: Vec<usize> = (0..n)
            .filter(|&j| j != i && order.as_ref().map_or(true, |o| o.interferes(i, j)))
            .collect();
        for k in 0..2 {
            constraints.push(SdpConstraint {
                pair: i,
                node: k,
                channel: scenario.channel(i, k).clone(),
                gamma: targets[i][k],
                interferers: interferers.clone(),
            });
        }
    }
    Ok(SdpProblem {
        n_pairs: n,
        n_antennas: scenario.n_antennas(),
        sigma2: scenario.sigma2(),
        strategy,
        order,
        constraints,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct PsdSolution {
    /// Hermitian `Q_i`, one per pair.
    pub q: Vec<ComplexMat>,
    /// `sum_i trace Q_i`.
    pub objective: f64,
    pub status: SdpStatus,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Best achievable smallest normalized constraint slack at unit total
    /// trace. Positive exactly when the constraints are feasible.
    pub phase1_margin: f64,
    pub ranks: Vec<usize>,
    pub min_eigenvalue: f64,
}

/// Real representation of `h^H Q h` on the embedded variable:
/// `(w w^T + (Jw)(Jw)^T) / 2` with `w = [Re h; Im h]`, `Jw = [-Im h; Re h]`.
fn embedded_gain_matrix(h: &ComplexVec) -> DMatrix<f64> {
    let n = h.len();
    let w = DVector::from_fn(2 * n, |r, _| if r < n { h[r].re } else { h[r - n].im });
    let jw = DVector::from_fn(2 * n, |r, _| if r < n { -h[r].im } else { h[r - n].re });
    (&w * w.transpose() + &jw * jw.transpose()) * 0.5
}

/// Constraint rows scaled by `1 / |h|^2`, as (block matrices, rhs).
fn constraint_rows(problem: &SdpProblem) -> Vec<(Vec<Option<DMatrix<f64>>>, f64)> {
    problem
        .constraints
        .iter()
        .map(|c| {
            let scale = 1.0 / c.channel.norm_squared();
            let w = embedded_gain_matrix(&c.channel) * scale;
            let mut blocks = vec![None; problem.n_pairs];
            blocks[c.pair] = Some(w.clone());
            for &j in &c.interferers {
                blocks[j] = Some(&w * -c.gamma);
            }
            (blocks, c.gamma * problem.sigma2 * scale)
        })
        .collect()
}

fn check_dims(problem: &SdpProblem) -> Result<()> {
    if problem.n_pairs > MAX_SDP_DIM || problem.n_antennas > MAX_SDP_DIM {
        return invalid(format!(
            "sdp_solve supports at most {MAX_SDP_DIM} pairs and antennas, got {} and {}",
            problem.n_pairs, problem.n_antennas
        ));
    }
    for c in &problem.constraints {
        if !(c.channel.norm_squared() > 0.0) {
            return Err(Error::Unservable { pair: c.pair, node: c.node });
        }
    }
    Ok(())
}

/// Phase I: `max t` s.t. every scaled constraint slack at zero noise is at
/// least `t` and the total trace is one. Returns `t*`.
fn phase1(problem: &SdpProblem) -> (f64, SolverStatus) {
    let rows = constraint_rows(problem);
    let m = rows.len();
    let dim = 2 * problem.n_antennas;
    let shift = 1.0 + problem.constraints.iter().map(|c| c.gamma).fold(0.0, f64::max);
    // LP variables: [t + shift, s_1 .. s_m].
    let mut a_blocks = Vec::with_capacity(m + 1);
    let mut a_lp = DMatrix::zeros(m + 1, m + 1);
    let mut b = DVector::zeros(m + 1);
    for (c, (blocks, _)) in rows.into_iter().enumerate() {
        a_blocks.push(blocks);
        a_lp[(c, 0)] = -1.0;
        a_lp[(c, c + 1)] = -1.0;
        b[c] = -shift;
    }
    a_blocks.push(vec![Some(DMatrix::identity(dim, dim) * 0.5); problem.n_pairs]);
    b[m] = 1.0;
    let mut c_lp = DVector::zeros(m + 1);
    c_lp[0] = -1.0;
    let data = SdpData {
        c_blocks: vec![DMatrix::zeros(dim, dim); problem.n_pairs],
        c_lp,
        a_blocks,
        a_lp,
        b,
    };
    let out = solver::solve(&data);
    (-out.primal_objective - shift, out.status)
}

/// Solve the relaxation. Infeasible constraints are detected by a phase-I
/// problem first; the main problem is only attempted when that margin is
/// positive.
pub fn sdp_solve(problem: &SdpProblem) -> Result<PsdSolution> {
    check_dims(problem)?;
    let n = problem.n_pairs;
    let dim = 2 * problem.n_antennas;
    let (margin, p1_status) = phase1(problem);
    if p1_status == SolverStatus::Optimal && margin <= PHASE1_TOL {
        return Ok(PsdSolution {
            q: vec![ComplexMat::zeros(problem.n_antennas, problem.n_antennas); n],
            objective: f64::INFINITY,
            status: SdpStatus::Infeasible,
            residuals: Residuals { primal: f64::NAN, dual: f64::NAN, complementarity: f64::NAN },
            iterations: 0,
            phase1_margin: margin,
            ranks: vec![0; n],
            min_eigenvalue: 0.0,
        });
    }

    let rows = constraint_rows(problem);
    let m = rows.len();
    let mut a_blocks = Vec::with_capacity(m);
    let mut a_lp = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    for (c, (blocks, rhs)) in rows.into_iter().enumerate() {
        a_blocks.push(blocks);
        a_lp[(c, c)] = -1.0;
        b[c] = rhs;
    }
    let data = SdpData {
        c_blocks: vec![DMatrix::identity(dim, dim) * 0.5; n],
        c_lp: DVector::zeros(m),
        a_blocks,
        a_lp,
        b,
    };
    let out = solver::solve(&data);
    let q: Vec<ComplexMat> = out.x_blocks.iter().map(from_real_embedding).collect();
    let objective: f64 = q.iter().map(|q| q.trace().re).sum();

    let mut ranks = Vec::with_capacity(n);
    let mut min_eigenvalue = f64::INFINITY;
    for qi in &q {
        let eig = hermitian_eigen(qi)?;
        let top = eig[0].value.max(0.0);
        ranks.push(eig.iter().filter(|p| p.value > RANK_TOL * top.max(f64::MIN_POSITIVE)).count());
        min_eigenvalue = min_eigenvalue.min(eig.last().map_or(0.0, |p| p.value));
    }
    let status = if p1_status != SolverStatus::Optimal {
        SdpStatus::NumericalFailure
    } else {
        match out.status {
            SolverStatus::Optimal => SdpStatus::Optimal,
            SolverStatus::NumericalFailure => SdpStatus::NumericalFailure,
        }
    };
    Ok(PsdSolution {
        q,
        objective,
        status,
        residuals: out.residuals,
        iterations: out.iterations,
        phase1_margin: margin,
        ranks,
        min_eigenvalue,
    })
}

#[derive(Debug, Clone)]
pub struct Rank1Result {
    /// Unit-norm dominant eigenvectors of `Q_i`.
    pub beams: Vec<ComplexVec>,
    /// `trace Q_i`.
    pub raw_powers: Vec<f64>,
    /// Largest `gamma - sinr` with the raw powers.
    pub raw_shortfall: f64,
    /// Least powers meeting every target with the extracted beams, if the
    /// fixed-point repair converged.
    pub repaired_powers: Option<Vec<f64>>,
    pub repaired_total: Option<f64>,
    pub repaired_shortfall: Option<f64>,
    /// Why the repair failed, when it did.
    pub repair_error: Option<String>,
}

impl Rank1Result {
    pub fn raw_total(&self) -> f64 {
        self.raw_powers.iter().sum()
    }

    /// All targets met after repair, within `tol`.
    pub fn repaired_feasible(&self, tol: f64) -> bool {
        self.repaired_shortfall.is_some_and(|s| s <= tol)
    }
}

/// Dominant-eigenvector beams with trace powers, followed by a fixed-point
/// power repair under the problem's interference sets.
pub fn rank1_extract(problem: &SdpProblem, sol: &PsdSolution) -> Result<Rank1Result> {
    if sol.status != SdpStatus::Optimal {
        return invalid("rank-one extraction needs an optimal relaxation");
    }
    if sol.q.len() != problem.n_pairs {
        return invalid("solution does not match the problem size");
    }
    let mut beams = Vec::with_capacity(problem.n_pairs);
    let mut raw_powers = Vec::with_capacity(problem.n_pairs);
    for q in &sol.q {
        beams.push(dominant_eigpair(q)?.vector);
        raw_powers.push(q.trace().re.max(0.0));
    }
    let raw_shortfall = problem.max_sinr_shortfall(&beams, &raw_powers);

    let repair = coupling_for(problem, &beams).and_then(|sys| min_power_downlink(&sys));
    let (repaired_powers, repaired_total, repaired_shortfall, repair_error) = match repair {
        Ok(r) => {
            let shortfall = problem.max_sinr_shortfall(&beams, &r.powers);
            (Some(r.powers), Some(r.total), Some(shortfall), None)
        }
        Err(e) => (None, None, None, Some(e.to_string())),
    };
    Ok(Rank1Result {
        beams,
        raw_powers,
        raw_shortfall,
        repaired_powers,
        repaired_total,
        repaired_shortfall,
        repair_error,
    })
}

/// Coupling system of the problem's constraints with fixed beams.
pub fn coupling_for(problem: &SdpProblem, beams: &[ComplexVec]) -> Result<CouplingSystem> {
    let n = problem.n_pairs;
    let mut v = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    let mut d = [DVector::zeros(n), DVector::zeros(n)];
    let mut g = [DVector::zeros(n), DVector::zeros(n)];
    for i in 0..n {
        for k in 0..2 {
            let c = problem.constraint(i, k);
            let direct = gain(&c.channel, &beams[i]);
            if !(direct > 0.0) {
                return Err(Error::Unservable { pair: i, node: k });
            }
            d[k][i] = direct;
            g[k][i] = c.gamma;
            for &j in &c.interferers {
                v[k][(i, j)] = gain(&c.channel, &beams[j]);
            }
        }
    }
    CouplingSystem::new(v, d, g, problem.sigma2)
}

/// Per-solve summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: SdpStatus,
    pub objective: f64,
    pub residuals: Residuals,
    pub ranks: Vec<usize>,
    pub repaired_total: Option<f64>,
    pub order: Option<Vec<usize>>,
}

impl SolveReport {
    pub fn new(problem: &SdpProblem, sol: &PsdSolution) -> Self {
        let repaired_total = if sol.status == SdpStatus::Optimal {
            rank1_extract(problem, sol).ok().and_then(|r| r.repaired_total)
        } else {
            None
        };
        SolveReport {
            status: sol.status,
            objective: sol.objective,
            residuals: sol.residuals,
            ranks: sol.ranks.clone(),
            repaired_total,
            order: problem.order.as_ref().map(|o| o.pairs().to_vec()),
        }
    }
}

// ---- bisection ----

/// One feasibility test of the bisection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub rate_scale: f64,
    pub feasible: bool,
    /// Smallest relaxation objective over the tried orders, when any solved.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BisectionResult {
    pub mu: Vec<f64>,
    /// Largest rate scale found feasible (0 when degenerate).
    pub rate_scale: f64,
    pub epsilon: f64,
    /// Initial upper bound, before any doubling.
    pub r_hi_initial: f64,
    /// Upper bound the halving started from.
    pub r_hi: f64,
    /// Number of halving steps.
    pub iterations: usize,
    /// `ceil(log2(r_hi / epsilon))`.
    pub iteration_bound: usize,
    /// No positive rate scale was feasible.
    pub degenerate: bool,
    pub probes: Vec<Probe>,
    pub point: RatePoint,
    /// Relaxation at the returned rate scale.
    pub solve: Option<SolveReport>,
}

/// `2^{mu R} - 1`.
pub fn sinr_target(mu: f64, rate_scale: f64) -> f64 {
    (mu * rate_scale).exp2() - 1.0
}

/// Initial bisection upper bound: twice the largest single-pair sum
/// capacity at full power.
pub fn initial_upper_bound(scenario: &Scenario, pairs: &[usize]) -> f64 {
    let snr = scenario.power_budget() / scenario.sigma2();
    2.0 * pairs
        .iter()
        .map(|&i| {
            capacity(scenario.channel(i, 0).norm_squared() * snr)
                + capacity(scenario.channel(i, 1).norm_squared() * snr)
        })
        .fold(0.0, f64::max)
}

/// Scenario restricted to `pairs`.
fn sub_scenario(scenario: &Scenario, pairs: &[usize]) -> Result<Scenario> {
    Scenario::new(
        scenario.n_antennas(),
        pairs.iter().map(|&i| scenario.channels()[i].clone()).collect(),
        scenario.sigma2(),
        scenario.power_budget(),
        scenario.seed(),
    )
}

struct Feasibility {
    problem: SdpProblem,
    solution: PsdSolution,
}

/// Feasibility predicate shared by the bisection and its re-checks.
pub struct RateFeasibility<'a> {
    scenario: Scenario,
    mu: Vec<f64>,
    active: Vec<usize>,
    strategy: Strategy,
    orders: Vec<Option<EncodingOrder>>,
    exec: Exec,
    original: &'a Scenario,
}

impl<'a> RateFeasibility<'a> {
    /// `order` refers to pairs of `scenario`; in dirty-paper mode without
    /// an order every order of the active pairs is tried.
    pub fn new(
        scenario: &'a Scenario,
        mu: &RateWeights,
        strategy: Strategy,
        order: Option<&EncodingOrder>,
        exec: Exec,
    ) -> Result<Self> {
        let n = scenario.n_pairs();
        let mu = mu.as_slice().to_vec();
        if mu.len() != n {
            return invalid(format!("expected {n} rate weights, got {}", mu.len()));
        }
        let active: Vec<usize> = (0..n).filter(|&i| mu[i] > 0.0).collect();
        let sub = sub_scenario(scenario, &active)?;
        let orders = match strategy {
            Strategy::Linear => vec![None],
            Strategy::Dpc => match order {
                Some(o) => {
                    if o.len() != n {
                        return invalid("encoding order length does not match n_pairs");
                    }
                    let restricted: Vec<usize> = o
                        .pairs()
                        .iter()
                        .filter_map(|p| active.iter().position(|a| a == p))
                        .collect();
                    vec![Some(EncodingOrder::new(restricted)?)]
                }
                None => {
                    if active.len() > MAX_PAIRS_ORDER_SEARCH {
                        return invalid(format!(
                            "order search is limited to {MAX_PAIRS_ORDER_SEARCH} active pairs; pass an order"
                        ));
                    }
                    EncodingOrder::all(active.len()).into_iter().map(Some).collect()
                }
            },
        };
        Ok(RateFeasibility {
            scenario: sub,
            mu,
            active,
            strategy,
            orders,
            exec,
            original: scenario,
        })
    }

    fn solve(&self, rate_scale: f64) -> Result<Vec<Feasibility>> {
        let targets: Vec<[f64; 2]> = self
            .active
            .iter()
            .map(|&i| {
                let g = sinr_target(self.mu[i], rate_scale);
                [g, g]
            })
            .collect();
        let results = self.exec.map(self.orders.len(), |o| -> Result<Feasibility> {
            let problem = build_sdp(&self.scenario, &targets, self.strategy, self.orders[o].as_ref())?;
            let solution = sdp_solve(&problem)?;
            Ok(Feasibility { problem, solution })
        });
        results.into_iter().collect()
    }

    /// Best (smallest objective) feasible relaxation at `rate_scale`, and
    /// the smallest objective of any solved order.
    fn probe(&self, rate_scale: f64) -> Result<(Option<Feasibility>, Option<f64>)> {
        let budget = self.scenario.power_budget();
        let mut best: Option<Feasibility> = None;
        let mut min_obj: Option<f64> = None;
        for f in self.solve(rate_scale)? {
            if f.solution.status != SdpStatus::Optimal {
                continue;
            }
            let obj = f.solution.objective;
            min_obj = Some(min_obj.map_or(obj, |m: f64| m.min(obj)));
            if obj <= budget && best.as_ref().map_or(true, |b| obj < b.solution.objective) {
                best = Some(f);
            }
        }
        Ok((best, min_obj))
    }

    /// Whether some tried order admits a relaxed solution within the power
    /// budget at rate scale `rate_scale`.
    pub fn is_feasible(&self, rate_scale: f64) -> Result<bool> {
        if rate_scale <= 0.0 {
            return Ok(true);
        }
        Ok(self.probe(rate_scale)?.0.is_some())
    }

    pub fn upper_bound(&self) -> f64 {
        initial_upper_bound(self.original, &self.active)
    }
}

/// Bisection over the common rate scale `R` with per-node SINR targets
/// `2^{mu_i R} - 1`, starting from `[0, R_hi]` and stopping once the bracket
/// is at most `epsilon` wide. The pair sum rate of the returned point is
/// `2 mu_i R`.
pub fn bisect_rate_region(
    scenario: &Scenario,
    mu: &RateWeights,
    strategy: Strategy,
    order: Option<&EncodingOrder>,
    epsilon: f64,
) -> Result<BisectionResult> {
    bisect_rate_region_with(Exec::default(), scenario, mu, strategy, order, epsilon)
}

pub fn bisect_rate_region_with(
    exec: Exec,
    scenario: &Scenario,
    mu: &RateWeights,
    strategy: Strategy,
    order: Option<&EncodingOrder>,
    epsilon: f64,
) -> Result<BisectionResult> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return invalid(format!("bisection accuracy must be positive, got {epsilon}"));
    }
    let pred = RateFeasibility::new(scenario, mu, strategy, order, exec)?;
    let r_hi_initial = pred.upper_bound();
    let mut probes = Vec::new();
    let mut best: Option<Feasibility> = None;

    let record = |r: f64, probes: &mut Vec<Probe>| -> Result<Option<Feasibility>> {
        let (found, objective) = pred.probe(r)?;
        probes.push(Probe { rate_scale: r, feasible: found.is_some(), objective });
        Ok(found)
    };

    let mut lo = 0.0;
    let mut hi = r_hi_initial;
    // The bound should be infeasible already; doubling is a safeguard.
    for _ in 0..64 {
        match record(hi, &mut probes)? {
            Some(f) => {
                lo = hi;
                best = Some(f);
                hi *= 2.0;
            }
            None => break,
        }
    }
    let r_hi = hi;
    let mut iterations = 0;
    while hi - lo > epsilon {
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        match record(mid, &mut probes)? {
            Some(f) => {
                lo = mid;
                best = Some(f);
            }
            None => hi = mid,
        }
    }

    let n = scenario.n_pairs();
    let mu_v = mu.as_slice().to_vec();
    let degenerate = best.is_none();
    let mut powers = vec![0.0; n];
    let mut solve = None;
    let mut full_order = None;
    if let Some(f) = &best {
        for (a, &i) in pred.active.iter().enumerate() {
            powers[i] = f.solution.q[a].trace().re;
        }
        solve = Some(SolveReport::new(&f.problem, &f.solution));
        if let Some(o) = f.problem.order() {
            // Back to original indices; silent pairs are encoded last.
            let mut full: Vec<usize> = o.pairs().iter().map(|&a| pred.active[a]).collect();
            full.extend((0..n).filter(|i| !pred.active.contains(i)));
            full_order = Some(full);
        }
    }
    if strategy == Strategy::Dpc && full_order.is_none() {
        full_order = Some(match order {
            Some(o) => o.pairs().to_vec(),
            None => (0..n).collect(),
        });
    }
    let rate_scale = if degenerate { 0.0 } else { lo };
    let point = RatePoint {
        rates: mu_v.iter().map(|m| 2.0 * m * rate_scale).collect(),
        provenance: Provenance {
            strategy,
            order: full_order,
            powers,
            beams: BeamSource::SdpBisect { mu: mu_v.clone() },
        },
    };
    Ok(BisectionResult {
        mu: mu_v,
        rate_scale,
        epsilon,
        r_hi_initial,
        r_hi,
        iterations,
        iteration_bound: (r_hi / epsilon).log2().ceil().max(0.0) as usize,
        degenerate,
        probes,
        point,
        solve,
    })
}

/// Rate weights on the simplex grid with `n_weights` levels per axis.
pub fn weight_grid(n_pairs: usize, n_weights: usize) -> Result<Vec<RateWeights>> {
    if n_weights < 2 {
        return invalid("weight grid needs at least 2 levels");
    }
    power_simplex(n_pairs, n_weights, 1.0).into_iter().map(RateWeights::normalized).collect()
}

/// Boundary points from bisections over a grid of rate weights, run
/// concurrently.
pub fn sdp_region(
    exec: Exec,
    scenario: &Scenario,
    strategy: Strategy,
    order: Option<&EncodingOrder>,
    n_weights: usize,
    epsilon: f64,
) -> Result<(RateRegion, Vec<BisectionResult>)> {
    let grid = weight_grid(scenario.n_pairs(), n_weights)?;
    // Inner order enumeration stays sequential; the weight grid is the
    // parallel axis.
    let results: Result<Vec<BisectionResult>> = exec
        .map(grid.len(), |w| {
            bisect_rate_region_with(Exec::Sequential, scenario, &grid[w], strategy, order, epsilon)
        })
        .into_iter()
        .collect();
    let results = results?;
    let meta = RegionMeta {
        strategy,
        method: "sdp-bisect".to_string(),
        n_pairs: scenario.n_pairs(),
        t_grid: None,
        power_grid: None,
        n_samples: Some(grid.len()),
        seed: scenario.seed(),
        hull_closure: HULL_CLOSURE.to_string(),
    };
    let points = results.iter().map(|r| r.point.clone()).collect();
    Ok((RateRegion::new(points, meta), results))
}

/// `Q_i = p_i u_i u_i^H`.
pub fn rank_one_solution(powers: &[f64], beams: &[ComplexVec]) -> Vec<ComplexMat> {
    powers
        .iter()
        .zip(beams)
        .map(|(&p, u)| u * u.adjoint() * Complex64::from(p))
        .collect()
}

/// `h^H Q h` for every constraint's own pair.
pub fn direct_gains(problem: &SdpProblem, q: &[ComplexMat]) -> Vec<f64> {
    problem.constraints.iter().map(|c| quad_form(&q[c.pair], &c.channel)).collect()
}
