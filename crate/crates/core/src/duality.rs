//! Fixed-beamformer power minimization with two SINR constraint sets per
//! pair (one per node), for the downlink and its dual uplink.
//!
//! With fixed beams the constraints of node `(i, k)` read
//!
//! ```text
//! p >= D_k^{-1} (G_k V_k p + sigma2 G_k 1),   k = 1, 2
//! ```
//!
//! where `V_k` holds the cross gains, `D_k` the direct gains and `G_k` the
//! SINR targets. The dual uplink replaces `V_k` by its transpose. The least
//! feasible power vector is the least fixed point of the element-wise
//! maximum over both sets, reached by monotone iteration from zero.
//!
//! For a single constraint set the two totals coincide. With both sets
//! active they generally do not; [`CouplingSystem::counterexample`] is a
//! small instance with a strictly positive gap.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::gain;
use crate::precoding::{BeamformerSet, EncodingOrder};
use crate::scenario::Scenario;

/// Relative step size at which the fixed-point iteration stops.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Divergence is declared once `|p|_inf` exceeds this multiple of `sigma2`.
pub const DIVERGENCE_CAP: f64 = 1e12;
pub const MAX_ITERATIONS: usize = 1_000_000;

/// Which direction the power-control problem is posed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Downlink,
    Uplink,
}

/// Coupling data for both constraint sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSystem {
    v: [DMatrix<f64>; 2],
    d: [DVector<f64>; 2],
    gamma: [DVector<f64>; 2],
    sigma2: f64,
}

impl CouplingSystem {
    pub fn new(
        v: [DMatrix<f64>; 2],
        d: [DVector<f64>; 2],
        gamma: [DVector<f64>; 2],
        sigma2: f64,
    ) -> Result<Self> {
        let n = d[0].len();
        if n == 0 {
            return invalid("coupling system needs at least one pair");
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return invalid(format!("sigma2 must be positive, got {sigma2}"));
        }
        for k in 0..2 {
            if v[k].nrows() != n || v[k].ncols() != n || d[k].len() != n || gamma[k].len() != n {
                return invalid(format!("constraint set {} has inconsistent dimensions", k + 1));
            }
            for i in 0..n {
                if v[k][(i, i)] != 0.0 {
                    return invalid(format!("V{} has nonzero diagonal entry at {i}", k + 1));
                }
                if !(d[k][i] > 0.0) || !d[k][i].is_finite() {
                    return invalid(format!("D{} diagonal must be positive (entry {i})", k + 1));
                }
                if !(gamma[k][i] > 0.0) || !gamma[k][i].is_finite() {
                    return invalid(format!("SINR target gamma{} must be positive (entry {i})", k + 1));
                }
            }
            if v[k].iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return invalid(format!("V{} must be finite and nonnegative", k + 1));
            }
        }
        Ok(CouplingSystem { v, d, gamma, sigma2 })
    }

    /// The builtin two-pair instance with `D = I`, `G1 = I`, symmetric `V1`
    /// and `G2 != I`, on which the coupled downlink and uplink optima differ
    /// (`115/19` versus `13`).
    pub fn counterexample() -> Self {
        let v1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let v2 = DMatrix::from_row_slice(2, 2, &[0.0, 0.2, 0.6, 0.0]);
        let ones = DVector::from_element(2, 1.0);
        CouplingSystem::new(
            [v1, v2],
            [ones.clone(), ones.clone()],
            [ones, DVector::from_vec(vec![2.0, 1.0])],
            1.0,
        )
        .expect("valid builtin instance")
    }

    pub fn n_pairs(&self) -> usize {
        self.d[0].len()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn v(&self, k: usize) -> &DMatrix<f64> {
        &self.v[k]
    }

    pub fn d(&self, k: usize) -> &DVector<f64> {
        &self.d[k]
    }

    pub fn gamma(&self, k: usize) -> &DVector<f64> {
        &self.gamma[k]
    }

    /// Right-hand side of constraint set `k` at `p`.
    pub fn rhs(&self, link: Link, k: usize, p: &[f64], i: usize) -> f64 {
        let n = self.n_pairs();
        let mut acc = 0.0;
        for j in 0..n {
            let c = match link {
                Link::Downlink => self.v[k][(i, j)],
                Link::Uplink => self.v[k][(j, i)],
            };
            acc += c * p[j];
        }
        self.gamma[k][i] * (acc + self.sigma2) / self.d[k][i]
    }

    /// The same system with every SINR target multiplied by `factor`.
    pub fn with_scaled_targets(&self, factor: f64) -> Result<Self> {
        CouplingSystem::new(
            self.v.clone(),
            self.d.clone(),
            [&self.gamma[0] * factor, &self.gamma[1] * factor],
            self.sigma2,
        )
    }
}

/// Coupling matrices induced by fixed beams: `V_k[i][j] = |h_(i,k)^H u_j|^2`
/// for `j != i`, `D_k = diag(|h_(i,k)^H u_i|^2)`. `targets[i][k]` is the SINR
/// target of node `(i, k)`.
pub fn build_coupling(
    scenario: &Scenario,
    beams: &BeamformerSet,
    targets: &[[f64; 2]],
) -> Result<CouplingSystem> {
    build(scenario, beams, targets, |_, _| true)
}

/// Dirty-paper analogue of [`build_coupling`]: only beams encoded after
/// pair `i` couple into its constraints.
pub fn build_coupling_dpc(
    scenario: &Scenario,
    beams: &BeamformerSet,
    targets: &[[f64; 2]],
    order: &EncodingOrder,
) -> Result<CouplingSystem> {
    if order.len() != scenario.n_pairs() {
        return invalid("encoding order length does not match n_pairs");
    }
    build(scenario, beams, targets, |i, j| order.interferes(i, j))
}

fn build(
    scenario: &Scenario,
    beams: &BeamformerSet,
    targets: &[[f64; 2]],
    couples: impl Fn(usize, usize) -> bool,
) -> Result<CouplingSystem> {
    let n = scenario.n_pairs();
    if beams.len() != n || targets.len() != n {
        return invalid(format!(
            "expected {n} beams and targets, got {} and {}",
            beams.len(),
            targets.len()
        ));
    }
    let mut v = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    let mut d = [DVector::zeros(n), DVector::zeros(n)];
    let mut gamma = [DVector::zeros(n), DVector::zeros(n)];
    for k in 0..2 {
        for i in 0..n {
            let h = scenario.channel(i, k);
            let direct = gain(h, beams.vector(i));
            if !(direct > 0.0) {
                return Err(Error::Unservable { pair: i, node: k });
            }
            d[k][i] = direct;
            gamma[k][i] = targets[i][k];
            for j in 0..n {
                if j != i && couples(i, j) {
                    v[k][(i, j)] = gain(h, beams.vector(j));
                }
            }
        }
    }
    CouplingSystem::new(v, d, gamma, scenario.sigma2())
}

/// Solution of a power-minimization problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinPowerResult {
    pub link: Link,
    pub powers: Vec<f64>,
    pub total: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `slacks[i][k] = p_i - rhs_k(p)_i`; `None` for sets not imposed.
    pub slacks: Vec<[Option<f64>; 2]>,
    /// Stopping tolerance the slacks should be judged against.
    pub tolerance: f64,
}

impl MinPowerResult {
    /// Smallest slack of each node across the imposed sets. At the least
    /// fixed point this is zero up to the tolerance for every node.
    pub fn binding_slacks(&self) -> Vec<f64> {
        self.slacks
            .iter()
            .map(|s| s.iter().flatten().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// Least power vector satisfying the constraint sets in `sets` (a subset of
/// `{0, 1}`), by monotone iteration `p <- max_k rhs_k(p)` from `p = 0`.
pub fn min_power(sys: &CouplingSystem, link: Link, sets: &[usize]) -> Result<MinPowerResult> {
    if sets.is_empty() || sets.iter().any(|&k| k > 1) {
        return invalid(format!("constraint sets must be a non-empty subset of {{0, 1}}, got {sets:?}"));
    }
    let n = sys.n_pairs();
    let mut p = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut last_step = f64::NAN;
    let cap = DIVERGENCE_CAP * sys.sigma2;
    for it in 1..=MAX_ITERATIONS {
        for (i, x) in next.iter_mut().enumerate() {
            *x = sets
                .iter()
                .map(|&k| sys.rhs(link, k, &p, i))
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let step = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let norm = p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let next_norm = next.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        std::mem::swap(&mut p, &mut next);
        let tolerance = FIXED_POINT_TOL * (1.0 + norm);
        if step <= tolerance {
            let p = polish(sys, link, sets, p, tolerance);
            return Ok(finish(sys, link, sets, p, it, tolerance));
        }
        if next_norm > cap || !next_norm.is_finite() {
            return Err(Error::Divergent {
                iterations: it,
                norm: next_norm,
                growth_ratio: step / last_step,
            });
        }
        last_step = step;
    }
    let norm = p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Err(Error::Divergent {
        iterations: MAX_ITERATIONS,
        norm,
        growth_ratio: 1.0,
    })
}

/// The iterate approaches the fixed point from below, so binding constraints
/// end up violated by up to the tolerance. Solve the linear system of the
/// binding sets exactly and inflate by `1 + POLISH_MARGIN`: since the noise
/// term is positive, `rhs((1 + e) p*) < (1 + e) p*` componentwise, so every
/// slack becomes nonnegative while staying well inside the tolerance.
fn polish(sys: &CouplingSystem, link: Link, sets: &[usize], p: Vec<f64>, tolerance: f64) -> Vec<f64> {
    const POLISH_MARGIN: f64 = 1e-13;
    let n = sys.n_pairs();
    let binding: Vec<usize> = (0..n)
        .map(|i| {
            *sets
                .iter()
                .max_by(|&&a, &&b| sys.rhs(link, a, &p, i).total_cmp(&sys.rhs(link, b, &p, i)))
                .expect("nonempty sets")
        })
        .collect();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..n {
        let k = binding[i];
        let scale = sys.gamma[k][i] / sys.d[k][i];
        for j in 0..n {
            let c = match link {
                Link::Downlink => sys.v[k][(i, j)],
                Link::Uplink => sys.v[k][(j, i)],
            };
            m[(i, j)] -= scale * c;
        }
        b[i] = scale * sys.sigma2;
    }
    let Some(exact) = m.lu().solve(&b) else {
        return p;
    };
    let close = exact
        .iter()
        .zip(&p)
        .all(|(e, q)| e.is_finite() && *e >= 0.0 && (e - q).abs() <= 1e3 * tolerance);
    if !close {
        return p;
    }
    let candidate: Vec<f64> = exact.iter().map(|e| e * (1.0 + POLISH_MARGIN)).collect();
    let feasible = (0..n).all(|i| sets.iter().all(|&k| candidate[i] >= sys.rhs(link, k, &candidate, i)));
    if feasible {
        candidate
    } else {
        p
    }
}

fn finish(
    sys: &CouplingSystem,
    link: Link,
    sets: &[usize],
    p: Vec<f64>,
    iterations: usize,
    tolerance: f64,
) -> MinPowerResult {
    let slacks = (0..sys.n_pairs())
        .map(|i| {
            let mut s = [None, None];
            for &k in sets {
                s[k] = Some(p[i] - sys.rhs(link, k, &p, i));
            }
            s
        })
        .collect();
    MinPowerResult {
        link,
        total: p.iter().sum(),
        powers: p,
        iterations,
        converged: true,
        slacks,
        tolerance,
    }
}

/// Least downlink powers meeting both constraint sets.
pub fn min_power_downlink(sys: &CouplingSystem) -> Result<MinPowerResult> {
    min_power(sys, Link::Downlink, &[0, 1])
}

/// Least dual-uplink powers meeting both constraint sets.
pub fn min_power_uplink(sys: &CouplingSystem) -> Result<MinPowerResult> {
    min_power(sys, Link::Uplink, &[0, 1])
}

/// Coupled and per-set downlink/uplink totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub dl_total: f64,
    pub ul_total: f64,
    /// `ul_total - dl_total`.
    pub gap: f64,
    pub per_k_dl_totals: [f64; 2],
    pub per_k_ul_totals: [f64; 2],
    pub dl_powers: Vec<f64>,
    pub ul_powers: Vec<f64>,
    pub dl_iterations: usize,
    pub ul_iterations: usize,
}

pub fn duality_check(sys: &CouplingSystem) -> Result<DualityReport> {
    let dl = min_power_downlink(sys)?;
    let ul = min_power_uplink(sys)?;
    let per_k = |link| -> Result<[f64; 2]> {
        Ok([min_power(sys, link, &[0])?.total, min_power(sys, link, &[1])?.total])
    };
    Ok(DualityReport {
        dl_total: dl.total,
        ul_total: ul.total,
        gap: ul.total - dl.total,
        per_k_dl_totals: per_k(Link::Downlink)?,
        per_k_ul_totals: per_k(Link::Uplink)?,
        dl_powers: dl.powers,
        ul_powers: ul.powers,
        dl_iterations: dl.iterations,
        ul_iterations: ul.iterations,
    })
}

// ---- instance file ----

/// JSON instance: coupling matrices as row lists, diagonals as vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub v1: Vec<Vec<f64>>,
    pub v2: Vec<Vec<f64>>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub sigma2: f64,
}

impl CouplingSystem {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance: {e}")))?;
        let n = f.d1.len();
        let mat = |rows: &[Vec<f64>], name: &str| -> Result<DMatrix<f64>> {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Parse(format!("instance: field `{name}` must be {n}x{n}")));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        };
        let v = [mat(&f.v1, "v1")?, mat(&f.v2, "v2")?];
        CouplingSystem::new(
            v,
            [DVector::from_vec(f.d1), DVector::from_vec(f.d2)],
            [DVector::from_vec(f.gamma1), DVector::from_vec(f.gamma2)],
            f.sigma2,
        )
    }

    pub fn to_instance(&self) -> InstanceFile {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        InstanceFile {
            v1: rows(&self.v[0]),
            v2: rows(&self.v[1]),
            d1: self.d[0].iter().copied().collect(),
            d2: self.d[1].iter().copied().collect(),
            gamma1: self.gamma[0].iter().copied().collect(),
            gamma2: self.gamma[1].iter().copied().collect(),
            sigma2: self.sigma2,
        }
    }
}
