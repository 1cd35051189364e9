//! Beamformer construction and SINR/rate evaluation for linear precoding
//! (interference treated as noise) and dirty-paper coding under a fixed
//! encoding order.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::linalg::{gain, ComplexVec};
use crate::scenario::Scenario;

/// Unit-norm tolerance for beamformers.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Below this `|g1^H g2|` the two directions are treated as orthogonal and
/// the alignment phase is taken as zero.
pub const ORTHOGONAL_TOL: f64 = 1e-14;

/// `C(x) = log2(1 + x)`.
#[inline]
pub fn capacity(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Per-pair precoding strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Linear precoding; every node sees all other beams as noise.
    Linear,
    /// Dirty-paper coding; a pair only sees beams encoded after it.
    Dpc,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Linear => "linear",
            Strategy::Dpc => "dpc",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Strategy::Linear),
            "dpc" => Ok(Strategy::Dpc),
            other => Err(format!("unknown strategy `{other}` (expected linear or dpc)")),
        }
    }
}

/// One unit-norm beamformer per pair, plus the mixing weight `t` that
/// produced it (`NaN` when the beam did not come from the two-node rule).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    vectors: Vec<ComplexVec>,
    weights: Vec<f64>,
}

impl BeamformerSet {
    pub fn new(vectors: Vec<ComplexVec>, weights: Vec<f64>) -> Result<Self> {
        if vectors.is_empty() || vectors.len() != weights.len() {
            return invalid("beamformer set needs one weight per beamformer and at least one beam");
        }
        for (i, u) in vectors.iter().enumerate() {
            let n = u.norm();
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return invalid(format!("beamformer {i} has norm {n}, expected 1"));
            }
        }
        Ok(BeamformerSet { vectors, weights })
    }

    /// Normalizes each vector; the weights are recorded as `NaN`.
    pub fn from_directions(vectors: Vec<ComplexVec>) -> Result<Self> {
        let mut out = Vec::with_capacity(vectors.len());
        for (i, v) in vectors.into_iter().enumerate() {
            let n = v.norm();
            if !(n > 0.0 && n.is_finite()) {
                return invalid(format!("beam direction {i} is zero or non-finite"));
            }
            out.push(v / Complex64::from(n));
        }
        let w = vec![f64::NAN; out.len()];
        BeamformerSet::new(out, w)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, i: usize) -> &ComplexVec {
        &self.vectors[i]
    }

    pub fn vectors(&self) -> &[ComplexVec] {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Nonnegative per-pair transmit powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return invalid(format!("powers must be finite and nonnegative: {p:?}"));
        }
        Ok(PowerAllocation(p))
    }

    pub fn uniform(n: usize, total: f64) -> Self {
        PowerAllocation(vec![total / n as f64; n])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn within_budget(&self, budget: f64) -> bool {
        self.total() <= budget + 1e-12
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every power multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        PowerAllocation::new(self.0.iter().map(|p| p * factor).collect())
    }
}

/// Dirty-paper encoding order: `pairs()[pos]` is the pair encoded at
/// position `pos`; the last position is encoded last and sees no
/// interference.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodingOrder {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl EncodingOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut position = vec![usize::MAX; n];
        for (pos, &pair) in order.iter().enumerate() {
            if pair >= n || position[pair] != usize::MAX {
                return invalid(format!("encoding order {order:?} is not a permutation of 0..{n}"));
            }
            position[pair] = pos;
        }
        Ok(EncodingOrder { order, position })
    }

    pub fn identity(n: usize) -> Self {
        EncodingOrder {
            order: (0..n).collect(),
            position: (0..n).collect(),
        }
    }

    /// All `n!` orders in lexicographic order.
    pub fn all(n: usize) -> Vec<EncodingOrder> {
        let mut out = Vec::new();
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            out.push(EncodingOrder::new(perm.clone()).expect("permutation"));
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).expect("successor");
            perm.swap(i, j);
            perm[i + 1..].reverse();
        }
        out
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn pairs(&self) -> &[usize] {
        &self.order
    }

    pub fn pair_at(&self, pos: usize) -> usize {
        self.order[pos]
    }

    pub fn position_of(&self, pair: usize) -> usize {
        self.position[pair]
    }

    /// Whether `other`'s beam still interferes at `pair`'s nodes, i.e.
    /// `other` is encoded after `pair`.
    pub fn interferes(&self, pair: usize, other: usize) -> bool {
        self.position[other] > self.position[pair]
    }

    /// Order formatted as 1-based pair labels, e.g. `2>1`.
    pub fn label(&self) -> String {
        self.order
            .iter()
            .map(|p| (p + 1).to_string())
            .collect::<Vec<_>>()
            .join(">")
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct RateWeights(Vec<f64>);

impl RateWeights {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() || mu.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return invalid(format!("rate weights must be nonnegative: {mu:?}"));
        }
        let sum: f64 = mu.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return invalid(format!("rate weights must sum to 1, got {sum}"));
        }
        Ok(RateWeights(mu))
    }

    /// Normalizes nonnegative weights to sum to one.
    pub fn normalized(mu: Vec<f64>) -> Result<Self> {
        let sum: f64 = mu.iter().sum();
        if !(sum > 0.0) {
            return invalid("rate weights must have a positive sum");
        }
        RateWeights::new(mu.into_iter().map(|m| m / sum).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Interpolates between the maximum-ratio directions of the two nodes of a
/// pair:
///
/// `u = (t g1 + (1 - t) e^{-j phi} g2) / ||...||`, `g_k = h_k / ||h_k||`,
/// `phi = arg(g1^H g2)`.
///
/// The phase rotation makes the cross term real and nonnegative, so the
/// numerator never vanishes for `t` in `[0, 1]`.
pub fn single_pair_beamformer(h1: &ComplexVec, h2: &ComplexVec, t: f64) -> Result<ComplexVec> {
    if !(0.0..=1.0).contains(&t) {
        return invalid(format!("mixing weight t must lie in [0, 1], got {t}"));
    }
    if h1.len() != h2.len() {
        return invalid("channel vectors of a pair must have equal length");
    }
    let n1 = h1.norm();
    let n2 = h2.norm();
    if !(n1 > 0.0) || !(n2 > 0.0) {
        return invalid("single_pair_beamformer needs nonzero channel vectors");
    }
    let g1 = h1 / Complex64::from(n1);
    let g2 = h2 / Complex64::from(n2);
    let cross = g1.dotc(&g2);
    let phi = if cross.norm() <= ORTHOGONAL_TOL { 0.0 } else { cross.arg() };
    let v = g1 * Complex64::from(t) + g2 * (Complex64::from_polar(1.0, -phi) * (1.0 - t));
    let n = v.norm();
    Ok(v / Complex64::from(n))
}

fn check_indices(scenario: &Scenario, beams: &BeamformerSet, p: &PowerAllocation) -> Result<()> {
    let n = scenario.n_pairs();
    if beams.len() != n || p.len() != n {
        return invalid(format!(
            "expected {n} beams and powers, got {} and {}",
            beams.len(),
            p.len()
        ));
    }
    if beams.vector(0).len() != scenario.n_antennas() {
        return invalid("beamformer length does not match n_antennas");
    }
    Ok(())
}

/// SINR at node `(i, k)` with every other beam treated as noise.
pub fn linear_sinr(
    scenario: &Scenario,
    beams: &BeamformerSet,
    p: &PowerAllocation,
    i: usize,
    k: usize,
) -> Result<f64> {
    check_indices(scenario, beams, p)?;
    if i >= scenario.n_pairs() || k > 1 {
        return invalid(format!("node ({i}, {k}) out of range"));
    }
    let h = scenario.channel(i, k);
    let p = p.as_slice();
    let mut interference = 0.0;
    for j in 0..scenario.n_pairs() {
        if j != i {
            interference += p[j] * gain(h, beams.vector(j));
        }
    }
    Ok(p[i] * gain(h, beams.vector(i)) / (interference + scenario.sigma2()))
}

/// SINR at node `k` of the pair encoded at `position` under dirty-paper
/// coding: only beams encoded later interfere.
pub fn dpc_sinr(
    scenario: &Scenario,
    beams: &BeamformerSet,
    p: &PowerAllocation,
    order: &EncodingOrder,
    position: usize,
    k: usize,
) -> Result<f64> {
    check_indices(scenario, beams, p)?;
    if order.len() != scenario.n_pairs() {
        return invalid("encoding order length does not match n_pairs");
    }
    if position >= order.len() || k > 1 {
        return invalid(format!("position {position}, node {k} out of range"));
    }
    let i = order.pair_at(position);
    let h = scenario.channel(i, k);
    let p = p.as_slice();
    let mut interference = 0.0;
    for &j in &order.pairs()[position + 1..] {
        interference += p[j] * gain(h, beams.vector(j));
    }
    Ok(p[i] * gain(h, beams.vector(i)) / (interference + scenario.sigma2()))
}

/// `C(sinr1) + C(sinr2)`.
pub fn pair_sum_rate(sinr1: f64, sinr2: f64) -> Result<f64> {
    if !(sinr1 >= 0.0) || !(sinr2 >= 0.0) {
        return invalid(format!("SINRs must be nonnegative, got ({sinr1}, {sinr2})"));
    }
    Ok(capacity(sinr1) + capacity(sinr2))
}

/// Weighted rate of a single pair transmitting with power `power` along `u`:
/// `mu1 C(|h1^H u|^2 P / s2) + mu2 C(|h2^H u|^2 P / s2)`.
pub fn weighted_single_pair_rate(
    scenario: &Scenario,
    u: &ComplexVec,
    power: f64,
    mu1: f64,
    mu2: f64,
) -> Result<f64> {
    if scenario.n_pairs() != 1 {
        return invalid("weighted_single_pair_rate needs a single-pair scenario");
    }
    if !(mu1 >= 0.0) || !(mu2 >= 0.0) {
        return invalid(format!("weights must be nonnegative, got ({mu1}, {mu2})"));
    }
    if !(power >= 0.0) {
        return invalid("power must be nonnegative");
    }
    let s2 = scenario.sigma2();
    let snr = |k: usize| gain(scenario.channel(0, k), u) * power / s2;
    Ok(mu1 * capacity(snr(0)) + mu2 * capacity(snr(1)))
}

/// Beamformers together with the per-node effective noise
/// (interference-plus-noise power) seen under the chosen strategy.
#[derive(Debug, Clone)]
pub struct Beamforming {
    pub beams: BeamformerSet,
    /// `effective_noise[i][k]` for node `(i, k)`.
    pub effective_noise: Vec<[f64; 2]>,
}

fn two_node_beams(scenario: &Scenario, t: &[f64]) -> Result<BeamformerSet> {
    if t.len() != scenario.n_pairs() {
        return invalid(format!("expected {} mixing weights, got {}", scenario.n_pairs(), t.len()));
    }
    let vectors = (0..scenario.n_pairs())
        .map(|i| single_pair_beamformer(scenario.channel(i, 0), scenario.channel(i, 1), t[i]))
        .collect::<Result<Vec<_>>>()?;
    BeamformerSet::new(vectors, t.to_vec())
}

fn effective_noise(
    scenario: &Scenario,
    beams: &BeamformerSet,
    p: &PowerAllocation,
    interferes: impl Fn(usize, usize) -> bool,
) -> Vec<[f64; 2]> {
    let n = scenario.n_pairs();
    let p = p.as_slice();
    (0..n)
        .map(|i| {
            let node = |k: usize| {
                let h = scenario.channel(i, k);
                let mut acc = 0.0;
                for j in 0..n {
                    if j != i && interferes(i, j) {
                        acc += p[j] * gain(h, beams.vector(j));
                    }
                }
                acc + scenario.sigma2()
            };
            [node(0), node(1)]
        })
        .collect()
}

/// Successive dirty-paper construction: starting from the last-encoded pair,
/// each pair gets the two-node beamformer and the effective noise of the
/// pairs encoded before it accumulates the later beams.
///
/// Powers and mixing weights are inputs; the beam directions themselves do
/// not depend on the powers or the noise.
pub fn successive_dpc_beamformers(
    scenario: &Scenario,
    order: &EncodingOrder,
    p: &PowerAllocation,
    t: &[f64],
) -> Result<Beamforming> {
    if order.len() != scenario.n_pairs() {
        return invalid("encoding order length does not match n_pairs");
    }
    let n = scenario.n_pairs();
    if t.len() != n {
        return invalid(format!("expected {n} mixing weights, got {}", t.len()));
    }
    let mut vectors = vec![ComplexVec::zeros(scenario.n_antennas()); n];
    for &pair in order.pairs().iter().rev() {
        vectors[pair] =
            single_pair_beamformer(scenario.channel(pair, 0), scenario.channel(pair, 1), t[pair])?;
    }
    let beams = BeamformerSet::new(vectors, t.to_vec())?;
    check_indices(scenario, &beams, p)?;
    let effective_noise = effective_noise(scenario, &beams, p, |i, j| order.interferes(i, j));
    Ok(Beamforming {
        beams,
        effective_noise,
    })
}

/// Linear precoding counterpart of [`successive_dpc_beamformers`]; every
/// other beam contributes to the effective noise.
pub fn linear_beamformers(scenario: &Scenario, p: &PowerAllocation, t: &[f64]) -> Result<Beamforming> {
    let beams = two_node_beams(scenario, t)?;
    check_indices(scenario, &beams, p)?;
    let effective_noise = effective_noise(scenario, &beams, p, |_, _| true);
    Ok(Beamforming {
        beams,
        effective_noise,
    })
}

/// Cross-gain table `gains[i][k][j] = |h_(i,k)^H u_j|^2` for fast rate
/// evaluation over many power allocations.
#[derive(Debug, Clone)]
pub struct GainTable {
    gains: Vec<[Vec<f64>; 2]>,
    sigma2: f64,
}

impl GainTable {
    pub fn new(scenario: &Scenario, beams: &BeamformerSet) -> Self {
        let n = scenario.n_pairs();
        let gains = (0..n)
            .map(|i| {
                let row = |k: usize| {
                    let h = scenario.channel(i, k);
                    (0..n).map(|j| gain(h, beams.vector(j))).collect::<Vec<_>>()
                };
                [row(0), row(1)]
            })
            .collect();
        GainTable {
            gains,
            sigma2: scenario.sigma2(),
        }
    }

    pub fn gain(&self, i: usize, k: usize, j: usize) -> f64 {
        self.gains[i][k][j]
    }

    /// Per-pair sum rates under linear precoding.
    pub fn linear_rates(&self, p: &[f64]) -> Vec<f64> {
        let n = self.gains.len();
        (0..n)
            .map(|i| {
                let sinr = |k: usize| {
                    let g = &self.gains[i][k];
                    let mut interference = 0.0;
                    for j in 0..n {
                        if j != i {
                            interference += p[j] * g[j];
                        }
                    }
                    p[i] * g[i] / (interference + self.sigma2)
                };
                capacity(sinr(0)) + capacity(sinr(1))
            })
            .collect()
    }

    /// Per-pair sum rates under dirty-paper coding with `order`, indexed by
    /// pair (not by position).
    pub fn dpc_rates(&self, p: &[f64], order: &EncodingOrder) -> Vec<f64> {
        let n = self.gains.len();
        let mut rates = vec![0.0; n];
        for pos in 0..n {
            let i = order.pair_at(pos);
            let sinr = |k: usize| {
                let g = &self.gains[i][k];
                let mut interference = 0.0;
                for &j in &order.pairs()[pos + 1..] {
                    interference += p[j] * g[j];
                }
                p[i] * g[i] / (interference + self.sigma2)
            };
            rates[i] = capacity(sinr(0)) + capacity(sinr(1));
        }
        rates
    }
}

/// Per-pair sum rates by direct SINR evaluation.
pub fn pair_rates(
    scenario: &Scenario,
    beams: &BeamformerSet,
    p: &PowerAllocation,
    strategy: Strategy,
    order: Option<&EncodingOrder>,
) -> Result<Vec<f64>> {
    let n = scenario.n_pairs();
    let mut rates = vec![0.0; n];
    match strategy {
        Strategy::Linear => {
            for (i, r) in rates.iter_mut().enumerate() {
                *r = pair_sum_rate(
                    linear_sinr(scenario, beams, p, i, 0)?,
                    linear_sinr(scenario, beams, p, i, 1)?,
                )?;
            }
        }
        Strategy::Dpc => {
            let Some(order) = order else {
                return invalid("dirty-paper rates need an encoding order");
            };
            for pos in 0..n {
                rates[order.pair_at(pos)] = pair_sum_rate(
                    dpc_sinr(scenario, beams, p, order, pos, 0)?,
                    dpc_sinr(scenario, beams, p, order, pos, 1)?,
                )?;
            }
        }
    }
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_channels;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cv(v: &[(f64, f64)]) -> ComplexVec {
        ComplexVec::from_iterator(v.len(), v.iter().map(|&(a, b)| c(a, b)))
    }

    fn two_pair_fixture() -> (Scenario, BeamformerSet, PowerAllocation) {
        let h11 = cv(&[(1.0, 0.0), (1.0, 0.0)]);
        let other = cv(&[(0.3, 0.1), (-0.2, 0.5)]);
        let s = Scenario::new(
            2,
            vec![[h11, other.clone()], [other.clone(), other]],
            1.0,
            5.0,
            None,
        )
        .unwrap();
        let u = BeamformerSet::from_directions(vec![cv(&[(1.0, 0.0), (0.0, 0.0)]), cv(&[(0.0, 0.0), (1.0, 0.0)])])
            .unwrap();
        (s, u, PowerAllocation::new(vec![2.0, 3.0]).unwrap())
    }

    #[test]
    fn beamformer_endpoints() {
        let h1 = cv(&[(1.0, 2.0), (0.5, -1.0), (0.0, 0.3)]);
        let h2 = cv(&[(-0.4, 0.1), (2.0, 0.0), (1.0, 1.0)]);
        let g1 = &h1 / c(h1.norm(), 0.0);
        let g2 = &h2 / c(h2.norm(), 0.0);
        let u1 = single_pair_beamformer(&h1, &h2, 1.0).unwrap();
        assert!((u1 - &g1).norm() < 1e-14);
        let u0 = single_pair_beamformer(&h1, &h2, 0.0).unwrap();
        assert_relative_eq!(u0.dotc(&g2).norm(), 1.0, epsilon = 1e-14);
        // u0 = e^{-j phi} g2
        let phi = g1.dotc(&g2).arg();
        assert!((u0 - &g2 * Complex64::from_polar(1.0, -phi)).norm() < 1e-14);
    }

    #[test]
    fn beamformer_orthogonal_midpoint() {
        let h1 = cv(&[(2.0, 0.0), (0.0, 0.0)]);
        let h2 = cv(&[(0.0, 0.0), (0.0, 3.0)]);
        let u = single_pair_beamformer(&h1, &h2, 0.5).unwrap();
        let g2 = &h2 / c(3.0, 0.0);
        let expected = (cv(&[(1.0, 0.0), (0.0, 0.0)]) + g2) / c(2f64.sqrt(), 0.0);
        assert!((&u - expected).norm() < 1e-15);
        assert_relative_eq!(gain(&h1, &u), h1.norm_squared() / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn beamformer_rejects_zero_channel() {
        let z = ComplexVec::zeros(2);
        let h = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        assert!(single_pair_beamformer(&z, &h, 0.5).is_err());
        assert!(single_pair_beamformer(&h, &h, 1.5).is_err());
    }

    #[test]
    fn linear_sinr_direct_case() {
        let (s, u, p) = two_pair_fixture();
        assert_relative_eq!(linear_sinr(&s, &u, &p, 0, 0).unwrap(), 0.5, epsilon = 1e-15);
        let zero = PowerAllocation::new(vec![0.0, 3.0]).unwrap();
        assert_eq!(linear_sinr(&s, &u, &zero, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn dpc_sinr_direct_case() {
        let (s, u, p) = two_pair_fixture();
        let order = EncodingOrder::new(vec![0, 1]).unwrap();
        // pair 0 is encoded first and still sees pair 1's beam
        assert_relative_eq!(dpc_sinr(&s, &u, &p, &order, 0, 0).unwrap(), 0.5, epsilon = 1e-15);
        // pair 1 is encoded last: no interference
        let h = s.channel(1, 0);
        let expected = 3.0 * gain(h, u.vector(1)) / s.sigma2();
        assert_eq!(dpc_sinr(&s, &u, &p, &order, 1, 0).unwrap(), expected);
    }

    #[test]
    fn single_pair_sinrs_coincide() {
        let s = generate_channels(1, 3, 0.5, 2.0, 11).unwrap();
        let u = BeamformerSet::new(
            vec![single_pair_beamformer(s.channel(0, 0), s.channel(0, 1), 0.3).unwrap()],
            vec![0.3],
        )
        .unwrap();
        let p = PowerAllocation::new(vec![2.0]).unwrap();
        let order = EncodingOrder::identity(1);
        for k in 0..2 {
            let lin = linear_sinr(&s, &u, &p, 0, k).unwrap();
            assert_eq!(lin, dpc_sinr(&s, &u, &p, &order, 0, k).unwrap());
            assert_relative_eq!(lin, 2.0 * gain(s.channel(0, k), u.vector(0)) / 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn pair_sum_rate_values() {
        assert_relative_eq!(pair_sum_rate(1.0, 1.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(pair_sum_rate(3.0, 3.0).unwrap(), 4.0, epsilon = 1e-15);
        assert_eq!(pair_sum_rate(0.0, 0.0).unwrap(), 0.0);
        assert!(pair_sum_rate(-1.0, 0.0).is_err());
    }

    #[test]
    fn weighted_rate_values() {
        // |h^H u|^2 P / s2 = 3 at both nodes
        let u = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let s = Scenario::new(
            2,
            vec![[cv(&[(3f64.sqrt(), 0.0), (0.0, 0.0)]), cv(&[(0.0, 3f64.sqrt()), (1.0, 0.0)])]],
            1.0,
            1.0,
            None,
        )
        .unwrap();
        assert_relative_eq!(weighted_single_pair_rate(&s, &u, 1.0, 0.5, 0.5).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(weighted_single_pair_rate(&s, &u, 1.0, 1.0, 0.0).unwrap(), 2.0, epsilon = 1e-14);
        assert!(weighted_single_pair_rate(&s, &u, 1.0, -0.1, 1.1).is_err());
    }

    #[test]
    fn weighted_rate_grid_maximum_is_resolved() {
        let s = generate_channels(1, 2, 1.0, 2.0, 21).unwrap();
        let rate = |t: f64| {
            let u = single_pair_beamformer(s.channel(0, 0), s.channel(0, 1), t).unwrap();
            weighted_single_pair_rate(&s, &u, s.power_budget(), 0.3, 0.7).unwrap()
        };
        let coarse = (0..=100).map(|i| rate(i as f64 / 100.0)).fold(f64::MIN, f64::max);
        let fine = (0..=10_000).map(|i| rate(i as f64 / 10_000.0)).fold(f64::MIN, f64::max);
        assert!(fine >= coarse - 1e-12);
        // rate is smooth in t; the 101-point grid is within a grid step of the optimum
        assert!(fine - coarse < 1e-3, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn effective_noise_two_pairs() {
        let s = generate_channels(2, 2, 1.0, 4.0, 3).unwrap();
        let p = PowerAllocation::new(vec![1.5, 2.0]).unwrap();
        let t = [0.4, 0.7];
        let order = EncodingOrder::new(vec![0, 1]).unwrap();
        let dpc = successive_dpc_beamformers(&s, &order, &p, &t).unwrap();
        let last = dpc.beams.vector(1);
        for k in 0..2 {
            let expected = 2.0 * gain(s.channel(0, k), last) + 1.0;
            assert_relative_eq!(dpc.effective_noise[0][k], expected, epsilon = 1e-14);
            assert_eq!(dpc.effective_noise[1][k], 1.0);
        }
        let lin = linear_beamformers(&s, &p, &t).unwrap();
        for k in 0..2 {
            assert_relative_eq!(
                lin.effective_noise[1][k],
                1.5 * gain(s.channel(1, k), lin.beams.vector(0)) + 1.0,
                epsilon = 1e-14
            );
            assert_relative_eq!(lin.effective_noise[0][k], dpc.effective_noise[0][k], epsilon = 1e-14);
        }
    }

    #[test]
    fn effective_noise_worked_example() {
        // p = 2 on the later pair, |h^H u|^2 = 0.5, sigma2 = 1 -> 2.0
        let h_first = cv(&[(0.5f64.sqrt(), 0.0), (0.0, 0.0)]);
        let h_last1 = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let h_last2 = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let s = Scenario::new(
            2,
            vec![[h_first.clone(), h_first], [h_last1, h_last2]],
            1.0,
            3.0,
            None,
        )
        .unwrap();
        let order = EncodingOrder::new(vec![0, 1]).unwrap();
        let p = PowerAllocation::new(vec![1.0, 2.0]).unwrap();
        let out = successive_dpc_beamformers(&s, &order, &p, &[0.5, 0.5]).unwrap();
        assert_relative_eq!(out.effective_noise[0][0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn last_beam_is_independent_of_power() {
        let s = generate_channels(3, 3, 1.0, 4.0, 8).unwrap();
        let order = EncodingOrder::new(vec![2, 0, 1]).unwrap();
        let t = [0.2, 0.5, 0.9];
        let a = successive_dpc_beamformers(&s, &order, &PowerAllocation::new(vec![1.0, 1.0, 2.0]).unwrap(), &t)
            .unwrap();
        let b = successive_dpc_beamformers(&s, &order, &PowerAllocation::new(vec![0.1, 3.0, 0.4]).unwrap(), &t)
            .unwrap();
        assert_eq!(a.beams, b.beams);
    }

    #[test]
    fn linear_beams_ignore_noise_level() {
        let s = generate_channels(2, 2, 1.0, 4.0, 9).unwrap();
        let quiet = s.with_power(0.01, 4.0).unwrap();
        let p = PowerAllocation::uniform(2, 4.0);
        let t = [0.3, 0.6];
        assert_eq!(
            linear_beamformers(&s, &p, &t).unwrap().beams,
            linear_beamformers(&quiet, &p, &t).unwrap().beams
        );
        let single = generate_channels(1, 2, 1.0, 1.0, 2).unwrap();
        let b = linear_beamformers(&single, &PowerAllocation::uniform(1, 1.0), &[0.25]).unwrap();
        let direct = single_pair_beamformer(single.channel(0, 0), single.channel(0, 1), 0.25).unwrap();
        assert_eq!(b.beams.vector(0), &direct);
    }

    #[test]
    fn gain_table_matches_direct_rates() {
        let s = generate_channels(3, 3, 0.8, 5.0, 17).unwrap();
        let p = PowerAllocation::new(vec![1.0, 2.5, 1.5]).unwrap();
        let b = linear_beamformers(&s, &p, &[0.1, 0.5, 0.8]).unwrap().beams;
        let table = GainTable::new(&s, &b);
        let direct = pair_rates(&s, &b, &p, Strategy::Linear, None).unwrap();
        for (a, d) in table.linear_rates(p.as_slice()).iter().zip(&direct) {
            assert_relative_eq!(a, d, epsilon = 1e-12);
        }
        for order in EncodingOrder::all(3) {
            let direct = pair_rates(&s, &b, &p, Strategy::Dpc, Some(&order)).unwrap();
            for (a, d) in table.dpc_rates(p.as_slice(), &order).iter().zip(&direct) {
                assert_relative_eq!(a, d, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn orders_enumerate_permutations() {
        let all = EncodingOrder::all(3);
        assert_eq!(all.len(), 6);
        assert_eq!(all[0].pairs(), &[0, 1, 2]);
        assert_eq!(all[5].pairs(), &[2, 1, 0]);
        assert!(EncodingOrder::new(vec![0, 0]).is_err());
        assert!(EncodingOrder::new(vec![1, 2]).is_err());
        assert_eq!(EncodingOrder::all(1).len(), 1);
    }

    #[test]
    fn rate_weights_validation() {
        assert!(RateWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(RateWeights::new(vec![0.5, 0.6]).is_err());
        assert!(RateWeights::new(vec![-0.5, 1.5]).is_err());
        assert_eq!(RateWeights::normalized(vec![1.0, 3.0]).unwrap().as_slice(), &[0.25, 0.75]);
    }
}
