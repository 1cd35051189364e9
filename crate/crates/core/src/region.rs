//! Rate-region enumeration: grid sweeps of the two-node beamformer, the
//! random-beam baseline, and region comparison metrics.
//!
//! Regions are stored as per-pair sum rates. Hulls are taken in the
//! (pair 1, pair 2) plane and closed under time-sharing with silence (see
//! [`closed_hull`]).

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::exec::Exec;
use crate::hull::{closed_hull, polygon_area, Point};
use crate::precoding::{single_pair_beamformer, BeamformerSet, EncodingOrder, GainTable, Strategy};
use crate::scenario::{GaussianSource, Scenario};

pub const DEFAULT_T_GRID: usize = 33;
pub const DEFAULT_POWER_GRID: usize = 33;
/// Above this many pairs the all-orders dirty-paper sweep needs an explicit
/// order list.
pub const MAX_PAIRS_ALL_ORDERS: usize = 6;

/// Recorded in region metadata: how the hull is closed.
pub const HULL_CLOSURE: &str = "origin and axis feet added before hulling";

/// Where the beamformers of a rate point came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BeamSource {
    /// Two-node interpolating beamformer with one mixing weight per pair.
    SinglePair { t: Vec<f64> },
    /// Isotropic random beams: sample `sample` of the stream seeded by `seed`.
    Random { seed: u64, sample: usize },
    /// Rank-one extraction of the SDP relaxation at rate weights `mu`.
    SdpBisect { mu: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub strategy: Strategy,
    /// Encoding order (pair indices, first encoded first); dirty-paper only.
    pub order: Option<Vec<usize>>,
    pub powers: Vec<f64>,
    pub beams: BeamSource,
}

/// Per-pair sum rates with the parameters that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub rates: Vec<f64>,
    pub provenance: Provenance,
}

impl RatePoint {
    /// Projection onto the (pair 1, pair 2) plane.
    pub fn xy(&self) -> Point {
        [self.rates[0], self.rates.get(1).copied().unwrap_or(0.0)]
    }

    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMeta {
    pub strategy: Strategy,
    pub method: String,
    pub n_pairs: usize,
    pub t_grid: Option<usize>,
    pub power_grid: Option<usize>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub hull_closure: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRegion {
    pub points: Vec<RatePoint>,
    /// Counter-clockwise vertices of the closed hull in the (pair 1, pair 2)
    /// plane.
    pub hull: Vec<Point>,
    pub meta: RegionMeta,
}

impl RateRegion {
    pub fn new(points: Vec<RatePoint>, meta: RegionMeta) -> Self {
        let xy: Vec<Point> = points.iter().map(RatePoint::xy).collect();
        let hull = closed_hull(&xy);
        RateRegion { points, hull, meta }
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.hull)
    }

    pub fn max_sum_rate(&self) -> f64 {
        self.points.iter().map(RatePoint::sum_rate).fold(0.0, f64::max)
    }
}

/// Power splits `P * c / (grid - 1)` over all compositions `c` of
/// `grid - 1` into `n` nonnegative parts. Every split sums to `P`.
pub fn power_simplex(n: usize, grid: usize, total: f64) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![total]];
    }
    let steps = grid.saturating_sub(1).max(1);
    let mut out = Vec::new();
    let mut parts = vec![0usize; n];
    fn rec(idx: usize, left: usize, parts: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx == parts.len() - 1 {
            parts[idx] = left;
            out.push(parts.clone());
            return;
        }
        for take in (0..=left).rev() {
            parts[idx] = take;
            rec(idx + 1, left - take, parts, out);
        }
    }
    let mut comps = Vec::new();
    rec(0, steps, &mut parts, &mut comps);
    for c in comps {
        let mut p: Vec<f64> = c.iter().map(|&k| total * k as f64 / steps as f64).collect();
        // Exact budget on the last nonzero coordinate.
        let head: f64 = p[..n - 1].iter().sum();
        p[n - 1] = (total - head).max(0.0);
        out.push(p);
    }
    out
}

fn t_values(grid: usize) -> Vec<f64> {
    if grid == 1 {
        return vec![0.5];
    }
    (0..grid).map(|a| a as f64 / (grid - 1) as f64).collect()
}

fn orders_for(scenario: &Scenario, strategy: Strategy, orders: Option<&[EncodingOrder]>) -> Result<Vec<Option<EncodingOrder>>> {
    match strategy {
        Strategy::Linear => Ok(vec![None]),
        Strategy::Dpc => match orders {
            Some(list) => {
                if list.is_empty() {
                    return invalid("explicit order list is empty");
                }
                if list.iter().any(|o| o.len() != scenario.n_pairs()) {
                    return invalid("encoding order length does not match n_pairs");
                }
                Ok(list.iter().cloned().map(Some).collect())
            }
            None => {
                if scenario.n_pairs() > MAX_PAIRS_ALL_ORDERS {
                    return invalid(format!(
                        "all-orders dirty-paper sweep is limited to {MAX_PAIRS_ALL_ORDERS} pairs; pass an explicit order list"
                    ));
                }
                Ok(EncodingOrder::all(scenario.n_pairs()).into_iter().map(Some).collect())
            }
        },
    }
}

fn rates_for(table: &GainTable, p: &[f64], order: Option<&EncodingOrder>) -> Vec<f64> {
    match order {
        None => table.linear_rates(p),
        Some(o) => table.dpc_rates(p, o),
    }
}

/// Evaluate every (power split, order) combination for a list of beam sets.
/// Points come out grouped by beam set, then power split, then order.
pub fn evaluate_beam_sets(
    exec: Exec,
    scenario: &Scenario,
    strategy: Strategy,
    beam_sets: &[(BeamformerSet, BeamSource)],
    powers: &[Vec<f64>],
    orders: Option<&[EncodingOrder]>,
) -> Result<Vec<RatePoint>> {
    let orders = orders_for(scenario, strategy, orders)?;
    for (b, _) in beam_sets {
        if b.len() != scenario.n_pairs() {
            return invalid("beam set size does not match n_pairs");
        }
    }
    Ok(exec.flat_map(beam_sets.len(), |s| {
        let (beams, source) = &beam_sets[s];
        let table = GainTable::new(scenario, beams);
        let mut pts = Vec::with_capacity(powers.len() * orders.len());
        for p in powers {
            for o in &orders {
                pts.push(RatePoint {
                    rates: rates_for(&table, p, o.as_ref()),
                    provenance: Provenance {
                        strategy,
                        order: o.as_ref().map(|o| o.pairs().to_vec()),
                        powers: p.clone(),
                        beams: source.clone(),
                    },
                });
            }
        }
        pts
    }))
}

fn validate_grids(t_grid: usize, power_grid: usize) -> Result<()> {
    if t_grid < 2 || power_grid < 2 {
        return invalid(format!(
            "grids must have at least 2 points (t_grid = {t_grid}, power_grid = {power_grid})"
        ));
    }
    Ok(())
}

/// Sweep the two-node beamformer over a `t_grid^N` grid of mixing weights
/// and a simplex grid of power splits (summing to the budget), and for
/// dirty-paper coding over every encoding order.
pub fn sweep_region(scenario: &Scenario, strategy: Strategy, t_grid: usize, power_grid: usize) -> Result<RateRegion> {
    sweep_region_with(Exec::default(), scenario, strategy, t_grid, power_grid, None)
}

pub fn sweep_region_with(
    exec: Exec,
    scenario: &Scenario,
    strategy: Strategy,
    t_grid: usize,
    power_grid: usize,
    orders: Option<&[EncodingOrder]>,
) -> Result<RateRegion> {
    validate_grids(t_grid, power_grid)?;
    let n = scenario.n_pairs();
    let ts = t_values(t_grid);
    // beams[i][a]: pair i's beam for mixing weight ts[a]
    let per_pair = (0..n)
        .map(|i| {
            ts.iter()
                .map(|&t| single_pair_beamformer(scenario.channel(i, 0), scenario.channel(i, 1), t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let combos = t_grid.checked_pow(n as u32).ok_or_else(|| {
        crate::Error::Validation(format!("t grid {t_grid}^{n} is too large"))
    })?;
    let beam_sets = exec.map(combos, |mut idx| {
        let mut vectors = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for beams in per_pair.iter() {
            let a = idx % t_grid;
            idx /= t_grid;
            vectors.push(beams[a].clone());
            weights.push(ts[a]);
        }
        let set = BeamformerSet::new(vectors, weights.clone()).expect("unit beams");
        (set, BeamSource::SinglePair { t: weights })
    });
    let powers = power_simplex(n, power_grid, scenario.power_budget());
    let points = evaluate_beam_sets(exec, scenario, strategy, &beam_sets, &powers, orders)?;
    Ok(RateRegion::new(
        points,
        RegionMeta {
            strategy,
            method: "single-pair".into(),
            n_pairs: n,
            t_grid: Some(t_grid),
            power_grid: Some(power_grid),
            n_samples: None,
            seed: None,
            hull_closure: HULL_CLOSURE.into(),
        },
    ))
}

/// The `N` isotropic unit beams of random sample `sample`.
pub fn random_beam_set(scenario: &Scenario, seed: u64, sample: usize) -> BeamformerSet {
    let mut src = GaussianSource::new(seed, sample as u64);
    let vectors = (0..scenario.n_pairs())
        .map(|_| src.unit_vector(scenario.n_antennas()))
        .collect();
    BeamformerSet::new(vectors, vec![f64::NAN; scenario.n_pairs()]).expect("unit beams")
}

/// Baseline region: `n_samples` sets of isotropic random beams, each
/// evaluated on the power simplex grid and, for dirty-paper coding, every
/// encoding order. Sample `s` depends only on `(seed, s)`.
pub fn random_beam_region(
    scenario: &Scenario,
    strategy: Strategy,
    n_samples: usize,
    power_grid: usize,
    seed: u64,
) -> Result<RateRegion> {
    random_beam_region_with(Exec::default(), scenario, strategy, n_samples, power_grid, seed)
}

pub fn random_beam_region_with(
    exec: Exec,
    scenario: &Scenario,
    strategy: Strategy,
    n_samples: usize,
    power_grid: usize,
    seed: u64,
) -> Result<RateRegion> {
    if n_samples == 0 {
        return invalid("n_samples must be at least 1");
    }
    validate_grids(2, power_grid)?;
    let beam_sets = exec.map(n_samples, |s| {
        (random_beam_set(scenario, seed, s), BeamSource::Random { seed, sample: s })
    });
    let powers = power_simplex(scenario.n_pairs(), power_grid, scenario.power_budget());
    let points = evaluate_beam_sets(exec, scenario, strategy, &beam_sets, &powers, None)?;
    Ok(RateRegion::new(
        points,
        RegionMeta {
            strategy,
            method: "random".into(),
            n_pairs: scenario.n_pairs(),
            t_grid: None,
            power_grid: Some(power_grid),
            n_samples: Some(n_samples),
            seed: Some(seed),
            hull_closure: HULL_CLOSURE.into(),
        },
    ))
}

/// Closed hull of [`random_beam_region`] without materializing the points.
/// Samples are processed in batches and only per-batch hulls are kept.
pub fn random_beam_hull(
    exec: Exec,
    scenario: &Scenario,
    strategy: Strategy,
    n_samples: usize,
    power_grid: usize,
    seed: u64,
) -> Result<Vec<Point>> {
    if n_samples == 0 {
        return invalid("n_samples must be at least 1");
    }
    validate_grids(2, power_grid)?;
    let orders = orders_for(scenario, strategy, None)?;
    let powers = power_simplex(scenario.n_pairs(), power_grid, scenario.power_budget());
    const BATCH: usize = 256;
    let batches = n_samples.div_ceil(BATCH);
    let partial = exec.flat_map(batches, |b| {
        let mut xy = Vec::with_capacity(BATCH * powers.len() * orders.len());
        for s in b * BATCH..((b + 1) * BATCH).min(n_samples) {
            let table = GainTable::new(scenario, &random_beam_set(scenario, seed, s));
            for p in &powers {
                for o in &orders {
                    let r = rates_for(&table, p, o.as_ref());
                    xy.push([r[0], r.get(1).copied().unwrap_or(0.0)]);
                }
            }
        }
        closed_hull(&xy)
    });
    Ok(closed_hull(&partial))
}

/// Re-evaluate a swept or random point from its provenance alone.
pub fn reevaluate(scenario: &Scenario, point: &RatePoint) -> Result<Vec<f64>> {
    let prov = &point.provenance;
    let beams = match &prov.beams {
        BeamSource::SinglePair { t } => {
            let vectors = (0..scenario.n_pairs())
                .map(|i| single_pair_beamformer(scenario.channel(i, 0), scenario.channel(i, 1), t[i]))
                .collect::<Result<Vec<_>>>()?;
            BeamformerSet::new(vectors, t.clone())?
        }
        BeamSource::Random { seed, sample } => random_beam_set(scenario, *seed, *sample),
        BeamSource::SdpBisect { .. } => {
            return invalid("SDP points carry no beam directions; re-run the bisection instead")
        }
    };
    let p = crate::precoding::PowerAllocation::new(prov.powers.clone())?;
    let order = prov.order.clone().map(EncodingOrder::new).transpose()?;
    crate::precoding::pair_rates(scenario, &beams, &p, prov.strategy, order.as_ref())
}

/// Area and best sum rate of two closed two-pair regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionMetrics {
    pub area_a: f64,
    pub area_b: f64,
    /// `area_a / area_b`.
    pub area_ratio: f64,
    pub max_sum_rate_a: f64,
    pub max_sum_rate_b: f64,
}

pub fn region_metrics(a: &RateRegion, b: &RateRegion) -> Result<RegionMetrics> {
    if a.meta.n_pairs != 2 || b.meta.n_pairs != 2 {
        return invalid(format!(
            "region metrics need two-pair regions, got {} and {} pairs",
            a.meta.n_pairs, b.meta.n_pairs
        ));
    }
    Ok(hull_metrics(&a.hull, &b.hull))
}

/// [`region_metrics`] on bare closed hulls.
pub fn hull_metrics(a: &[Point], b: &[Point]) -> RegionMetrics {
    let area_a = polygon_area(a);
    let area_b = polygon_area(b);
    let best = |h: &[Point]| h.iter().map(|p| p[0] + p[1]).fold(0.0, f64::max);
    RegionMetrics {
        area_a,
        area_b,
        area_ratio: area_a / area_b,
        max_sum_rate_a: best(a),
        max_sum_rate_b: best(b),
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";")
}

impl RateRegion {
    /// Region CSV: `strategy,order,t_params,powers,R_pair_1,...,R_pair_N`.
    /// `order` uses 1-based labels (`2>1`), `-` for linear precoding.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,order,t_params,powers");
        for i in 1..=self.meta.n_pairs {
            let _ = write!(out, ",R_pair_{i}");
        }
        out.push('\n');
        for pt in &self.points {
            let prov = &pt.provenance;
            let order = match &prov.order {
                Some(o) => o.iter().map(|p| (p + 1).to_string()).collect::<Vec<_>>().join(">"),
                None => "-".into(),
            };
            let t = match &prov.beams {
                BeamSource::SinglePair { t } => join(t),
                BeamSource::Random { seed, sample } => format!("random:{seed}:{sample}"),
                BeamSource::SdpBisect { mu } => format!("mu:{}", join(mu)),
            };
            let _ = write!(out, "{},{},{},{}", prov.strategy.as_str(), order, t, join(&prov.powers));
            for r in &pt.rates {
                let _ = write!(out, ",{r}");
            }
            out.push('\n');
        }
        out
    }

    /// Hull CSV with `hull_x,hull_y` columns.
    pub fn hull_csv(&self) -> String {
        hull_csv(&self.hull)
    }
}

pub fn hull_csv(hull: &[Point]) -> String {
    let mut out = String::from("hull_x,hull_y\n");
    for p in hull {
        let _ = writeln!(out, "{},{}", p[0], p[1]);
    }
    out
}
