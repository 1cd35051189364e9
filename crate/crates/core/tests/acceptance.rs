//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Run with `cargo test -p relay-bc --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use relay_bc::duality::{build_coupling, duality_check, min_power, min_power_downlink, CouplingSystem, Link};
use relay_bc::hull::{closed_hull, convex_hull, hull_contains_hull, polygon_area, Point};
use relay_bc::linalg::{eigen_residual, hermitian_eigen, ComplexMat, ComplexVec};
use relay_bc::precoding::{
    capacity, linear_sinr, single_pair_beamformer, BeamformerSet, EncodingOrder, PowerAllocation, RateWeights, Strategy,
};
use relay_bc::region::{random_beam_hull, sweep_region_with};
use relay_bc::scenario::{generate_channels, GaussianSource};
use relay_bc::sdp::{bisect_rate_region, build_sdp, rank1_extract, sdp_solve, RateFeasibility, SdpStatus};
use relay_bc::{Exec, Scenario};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- oracles ----

/// `(I - A)^{-1} b` by LU.
fn affine_fixed_point(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    (DMatrix::identity(n, n) - a).lu().solve(b)
}

fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Least fixed point of `p -> max_k D_k^{-1}(G_k V_k p + s2 G_k 1)` as the
/// componentwise maximum of the fixed points of every per-node choice of
/// `k`. Each choice is a monotone affine map below the max-map, so its fixed
/// point is below the least fixed point, and the binding choice attains it.
fn coupled_oracle(
    v: &[DMatrix<f64>; 2],
    d: &[DVector<f64>; 2],
    g: &[DVector<f64>; 2],
    s2: f64,
    transpose: bool,
) -> DVector<f64> {
    let n = d[0].len();
    let mut best = DVector::zeros(n);
    for mask in 0..(1usize << n) {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for i in 0..n {
            let k = (mask >> i) & 1;
            let vk = if transpose { v[k].transpose() } else { v[k].clone() };
            for j in 0..n {
                a[(i, j)] = g[k][i] * vk[(i, j)] / d[k][i];
            }
            b[i] = s2 * g[k][i] / d[k][i];
        }
        assert!(spectral_radius(&a) < 1.0, "oracle needs every selection to be stable");
        let p = affine_fixed_point(&a, &b).expect("nonsingular");
        best = best.sup(&p);
    }
    best
}

fn brute_force_hull(points: &[Point]) -> Vec<Point> {
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut out = Vec::new();
    for &a in points {
        let on_hull = points.iter().any(|&b| {
            a != b
                && points.iter().all(|&c| {
                    let x = cross(a, b, c);
                    if x == 0.0 {
                        let t = (c[0] - a[0]) * (b[0] - a[0]) + (c[1] - a[1]) * (b[1] - a[1]);
                        let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
                        return t >= 0.0 && t <= len2;
                    }
                    x > 0.0
                })
        });
        if on_hull && !out.contains(&a) {
            out.push(a);
        }
    }
    out.sort_by(|a: &Point, b: &Point| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    out
}

// ---- criteria ----

fn counterexample_gap() -> Outcome {
    let start = Instant::now();
    let sys = CouplingSystem::counterexample();
    let report = duality_check(&sys).map_err(|e| e.to_string())?;
    let v = [sys.v(0).clone(), sys.v(1).clone()];
    let d = [sys.d(0).clone(), sys.d(1).clone()];
    let g = [sys.gamma(0).clone(), sys.gamma(1).clone()];
    let dl = coupled_oracle(&v, &d, &g, sys.sigma2(), false).sum();
    let ul = coupled_oracle(&v, &d, &g, sys.sigma2(), true).sum();
    let elapsed = start.elapsed();
    check((dl - 115.0 / 19.0).abs() <= 1e-12 && (ul - 13.0).abs() <= 1e-12, || {
        format!("oracle disagrees with the hand values: {dl}, {ul}")
    })?;
    check((report.dl_total - dl).abs() <= 1e-9, || format!("dl_total {} vs {dl}", report.dl_total))?;
    check((report.ul_total - ul).abs() <= 1e-9, || format!("ul_total {} vs {ul}", report.ul_total))?;
    check(report.gap > 1.0, || format!("gap {}", report.gap))?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "dl {:.12} ul {:.12} gap {:.6} in {:?}",
        report.dl_total, report.ul_total, report.gap, elapsed
    ))
}

fn per_set_duality() -> Outcome {
    let start = Instant::now();
    let mut src = GaussianSource::new(2024, 0);
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for _ in 0..1000 {
        let n = 2 + (src.uniform() * 5.0) as usize;
        let mut v = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
        let mut d = [DVector::zeros(n), DVector::zeros(n)];
        let mut g = [DVector::zeros(n), DVector::zeros(n)];
        for k in 0..2 {
            for i in 0..n {
                d[k][i] = 0.2 + src.uniform();
                g[k][i] = 0.2 + src.uniform();
                for j in 0..n {
                    if i != j {
                        v[k][(i, j)] = src.uniform();
                    }
                }
            }
            // Scale targets so that rho(D^{-1} G V) is uniform in [0.1, 0.9).
            let a = DMatrix::from_fn(n, n, |i, j| g[k][i] * v[k][(i, j)] / d[k][i]);
            let target = 0.1 + 0.8 * src.uniform();
            g[k] *= target / spectral_radius(&a);
        }
        let sys = CouplingSystem::new(v.clone(), d.clone(), g.clone(), 1.0).map_err(|e| e.to_string())?;
        for k in 0..2 {
            let dl = min_power(&sys, Link::Downlink, &[k]).map_err(|e| e.to_string())?.total;
            let ul = min_power(&sys, Link::Uplink, &[k]).map_err(|e| e.to_string())?.total;
            worst = worst.max((dl - ul).abs());
            let a = DMatrix::from_fn(n, n, |i, j| g[k][i] * v[k][(i, j)] / d[k][i]);
            let b = DVector::from_fn(n, |i, _| g[k][i] / d[k][i]);
            let oracle_dl = affine_fixed_point(&a, &b).expect("stable").sum();
            let a_ul = DMatrix::from_fn(n, n, |i, j| g[k][i] * v[k][(j, i)] / d[k][i]);
            let oracle_ul = affine_fixed_point(&a_ul, &b).expect("stable").sum();
            worst_oracle = worst_oracle.max((dl - oracle_dl).abs()).max((ul - oracle_ul).abs());
        }
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-9, || format!("max |dl - ul| = {worst:e}"))?;
    check(worst_oracle <= 1e-9, || format!("max deviation from inverse oracle {worst_oracle:e}"))?;
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("2000 single-set problems, max |dl - ul| = {worst:.2e}, oracle dev {worst_oracle:.2e}, {elapsed:?}"))
}

fn sdp_orthogonal() -> Outcome {
    let c = |re, im| Complex64::new(re, im);
    let h1 = ComplexVec::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
    let h2 = ComplexVec::from_vec(vec![c(0.0, 0.8), c(0.6, 0.0)]);
    // h1^H h2 = 0.6*0.8i - 0.8i*0.6 = 0
    let s = Scenario::new(2, vec![[h1, h2]], 1.0, 10.0, None).map_err(|e| e.to_string())?;
    let p = build_sdp(&s, &[[1.0, 1.0]], Strategy::Linear, None).map_err(|e| e.to_string())?;
    let sol = sdp_solve(&p).map_err(|e| e.to_string())?;
    check(sol.status == SdpStatus::Optimal, || format!("status {:?}", sol.status))?;
    check((sol.objective - 2.0).abs() <= 1e-6, || format!("objective {}", sol.objective))?;
    Ok(format!("objective {:.10}, {} iterations", sol.objective, sol.iterations))
}

fn relaxation_bound() -> Outcome {
    let start = Instant::now();
    let mut src = GaussianSource::new(77, 0);
    let mut solved = 0;
    let mut seed = 0u64;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_shortfall = f64::NEG_INFINITY;
    while solved < 100 {
        seed += 1;
        if seed > 1000 {
            return Err(format!("only {solved} feasible instances in 1000 draws"));
        }
        let s = generate_channels(2, 2, 1.0, 10.0, 5000 + seed).map_err(|e| e.to_string())?;
        let targets: Vec<[f64; 2]> = (0..2).map(|_| [0.1 + 1.9 * src.uniform(), 0.1 + 1.9 * src.uniform()]).collect();
        let vectors = (0..2)
            .map(|i| single_pair_beamformer(s.channel(i, 0), s.channel(i, 1), 0.5))
            .collect::<relay_bc::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let beams = BeamformerSet::new(vectors, vec![0.5; 2]).map_err(|e| e.to_string())?;
        // Feasible means the fixed two-node beams admit finite powers.
        let Ok(fixed) = build_coupling(&s, &beams, &targets).and_then(|sys| min_power_downlink(&sys)) else {
            continue;
        };
        solved += 1;
        let p = build_sdp(&s, &targets, Strategy::Linear, None).map_err(|e| e.to_string())?;
        let sol = sdp_solve(&p).map_err(|e| e.to_string())?;
        check(sol.status == SdpStatus::Optimal, || format!("seed {seed}: status {:?}", sol.status))?;
        let gap = sol.objective - fixed.total;
        worst_gap = worst_gap.max(gap);
        check(gap <= 1e-7, || format!("seed {seed}: sdp {} > fixed-beam {}", sol.objective, fixed.total))?;
        let r1 = rank1_extract(&p, &sol).map_err(|e| e.to_string())?;
        let shortfall = r1
            .repaired_shortfall
            .ok_or_else(|| format!("seed {seed}: repair failed: {:?}", r1.repair_error))?;
        worst_shortfall = worst_shortfall.max(shortfall);
        check(shortfall <= 1e-7, || format!("seed {seed}: repaired SINR shortfall {shortfall:e}"))?;
        let repaired = r1.repaired_total.expect("repaired");
        check(sol.objective <= repaired + 1e-7, || format!("seed {seed}: sdp above repaired total"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "100 instances ({seed} drawn), max sdp - fixed = {worst_gap:.3e}, max repaired shortfall {worst_shortfall:.2e}, {elapsed:?}"
    ))
}

fn area_trend() -> Outcome {
    let start = Instant::now();
    const SCENARIOS: u64 = 50;
    const BEAMS: usize = 10_000;
    let exec = Exec::default();
    let mean_ratio = |snr_db: f64| -> Result<f64, String> {
        let mut acc = 0.0;
        for seed in 0..SCENARIOS {
            let s = generate_channels(2, 2, 1.0, 1.0, 900 + seed)
                .and_then(|s| s.at_snr_db(snr_db))
                .map_err(|e| e.to_string())?;
            let sweep = sweep_region_with(exec, &s, Strategy::Dpc, 33, 33, None).map_err(|e| e.to_string())?;
            let random = random_beam_hull(exec, &s, Strategy::Dpc, BEAMS, 33, seed).map_err(|e| e.to_string())?;
            acc += sweep.area() / polygon_area(&random);
        }
        Ok(acc / SCENARIOS as f64)
    };
    let low = mean_ratio(3.0)?;
    let high = mean_ratio(30.0)?;
    let elapsed = start.elapsed();
    check(low >= high, || format!("mean ratio at 3 dB {low:.4} < at 30 dB {high:.4}"))?;
    check(low >= 0.9, || format!("mean ratio at 3 dB {low:.4} < 0.9"))?;
    Ok(format!("mean sweep/random area ratio: 3 dB {low:.4}, 30 dB {high:.4} ({elapsed:?})"))
}

fn dpc_dominance() -> Outcome {
    let mut tested = 0;
    for seed in 0..20 {
        for snr_db in [3.0, 10.0, 30.0] {
            let s = generate_channels(2, 2, 1.0, 1.0, 300 + seed)
                .and_then(|s| s.at_snr_db(snr_db))
                .map_err(|e| e.to_string())?;
            let dpc = sweep_region_with(Exec::default(), &s, Strategy::Dpc, 17, 17, None).map_err(|e| e.to_string())?;
            let lin = sweep_region_with(Exec::default(), &s, Strategy::Linear, 17, 17, None).map_err(|e| e.to_string())?;
            check(hull_contains_hull(&dpc.hull, &lin.hull, 1e-9), || {
                format!("seed {seed} at {snr_db} dB: linear hull leaves the DPC hull")
            })?;
            tested += 1;
        }
    }
    Ok(format!("{tested} scenario/SNR combinations"))
}

fn bisection_contract() -> Outcome {
    let eps = 0.01;
    let mut runs = 0;
    let mut max_iter = 0;
    for seed in 0..3u64 {
        let s = generate_channels(2, 2, 1.0, 1.0, 40 + seed)
            .and_then(|s| s.at_snr_db(10.0))
            .map_err(|e| e.to_string())?;
        let snr = s.power_budget() / s.sigma2();
        let single_pair = |i: usize| {
            capacity(s.channel(i, 0).norm_squared() * snr) + capacity(s.channel(i, 1).norm_squared() * snr)
        };
        let r_hi_expected = 2.0 * single_pair(0).max(single_pair(1));
        for mu in [[0.5, 0.5], [0.2, 0.8]] {
            let w = RateWeights::new(mu.to_vec()).map_err(|e| e.to_string())?;
            for strategy in [Strategy::Linear, Strategy::Dpc] {
                let res = bisect_rate_region(&s, &w, strategy, None, eps).map_err(|e| e.to_string())?;
                let tag = format!("seed {seed} mu {mu:?} {}", strategy.as_str());
                check(!res.degenerate, || format!("{tag}: degenerate"))?;
                check((res.r_hi - r_hi_expected).abs() <= 1e-12, || {
                    format!("{tag}: R_hi {} vs {r_hi_expected}", res.r_hi)
                })?;
                let bound = (r_hi_expected / eps).log2().ceil() as usize;
                check(res.iterations <= bound, || format!("{tag}: {} iterations > {bound}", res.iterations))?;
                let pred = RateFeasibility::new(&s, &w, strategy, None, Exec::default()).map_err(|e| e.to_string())?;
                check(pred.is_feasible(res.rate_scale).map_err(|e| e.to_string())?, || {
                    format!("{tag}: R = {} not feasible on re-solve", res.rate_scale)
                })?;
                check(!pred.is_feasible(res.rate_scale + 2.0 * eps).map_err(|e| e.to_string())?, || {
                    format!("{tag}: R + 2 eps = {} still feasible", res.rate_scale + 2.0 * eps)
                })?;
                max_iter = max_iter.max(res.iterations);
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} bisections, at most {max_iter} iterations"))
}

fn property_suites() -> Outcome {
    let mut src = GaussianSource::new(8, 0);
    // unit-norm beamformers
    for seed in 0..50 {
        let s = generate_channels(1, 3, 1.0, 1.0, seed).map_err(|e| e.to_string())?;
        for a in 0..=20 {
            let u = single_pair_beamformer(s.channel(0, 0), s.channel(0, 1), a as f64 / 20.0).map_err(|e| e.to_string())?;
            check((u.norm() - 1.0).abs() <= 1e-12, || format!("beam norm {}", u.norm()))?;
        }
    }
    // SINR scale invariance: powers and noise scaled together
    for seed in 0..50 {
        let s = generate_channels(3, 2, 1.0, 1.0, 100 + seed).map_err(|e| e.to_string())?;
        let vectors: Vec<ComplexVec> = (0..3).map(|_| src.unit_vector(2)).collect();
        let beams = BeamformerSet::from_directions(vectors).map_err(|e| e.to_string())?;
        let p: Vec<f64> = (0..3).map(|_| 0.1 + src.uniform()).collect();
        let c = 0.01 + 100.0 * src.uniform();
        let scaled = s.with_power(s.sigma2() * c, s.power_budget() * c).map_err(|e| e.to_string())?;
        let pa = PowerAllocation::new(p.clone()).map_err(|e| e.to_string())?;
        let pb = PowerAllocation::new(p.iter().map(|x| x * c).collect()).map_err(|e| e.to_string())?;
        for i in 0..3 {
            for k in 0..2 {
                let a = linear_sinr(&s, &beams, &pa, i, k).map_err(|e| e.to_string())?;
                let b = linear_sinr(&scaled, &beams, &pb, i, k).map_err(|e| e.to_string())?;
                check((a - b).abs() <= 1e-12 * (1.0 + a), || format!("SINR {a} vs {b}"))?;
            }
        }
    }
    // monotone fixed-point convergence and minimality probes
    for _ in 0..200 {
        let n = 2 + (src.uniform() * 3.0) as usize;
        let mk = |src: &mut GaussianSource| DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.3 * src.uniform() / n as f64 });
        let v = [mk(&mut src), mk(&mut src)];
        let d = [DVector::from_fn(n, |_, _| 0.5 + src.uniform()), DVector::from_fn(n, |_, _| 0.5 + src.uniform())];
        let g = [DVector::from_fn(n, |_, _| 0.2 + src.uniform()), DVector::from_fn(n, |_, _| 0.2 + src.uniform())];
        let sys = CouplingSystem::new(v.clone(), d.clone(), g.clone(), 1.0).map_err(|e| e.to_string())?;
        let r = min_power_downlink(&sys).map_err(|e| e.to_string())?;
        let oracle = coupled_oracle(&v, &d, &g, 1.0, false);
        for i in 0..n {
            check((r.powers[i] - oracle[i]).abs() <= 1e-9 * (1.0 + oracle[i]), || {
                format!("fixed point {} vs oracle {}", r.powers[i], oracle[i])
            })?;
            let slack = r.binding_slacks()[i];
            check((0.0..=r.tolerance).contains(&slack), || format!("binding slack {slack:e}"))?;
            let mut p = r.powers.clone();
            p[i] -= 10.0 * r.tolerance;
            check((0..2).any(|k| p[i] < sys.rhs(Link::Downlink, k, &p, i)), || "minimality probe".into())?;
        }
        // Iterates from zero are nondecreasing: one map step from any
        // truncated iterate stays below the fixed point.
        let mut p = vec![0.0; n];
        for _ in 0..20 {
            let next: Vec<f64> = (0..n)
                .map(|i| sys.rhs(Link::Downlink, 0, &p, i).max(sys.rhs(Link::Downlink, 1, &p, i)))
                .collect();
            check(next.iter().zip(&p).all(|(a, b)| a >= b), || "iteration decreased".into())?;
            check(next.iter().zip(&r.powers).all(|(a, b)| *a <= b + 1e-12), || "iterate above fixed point".into())?;
            p = next;
        }
    }
    // hull oracle on 200-point inputs
    for seed in 0..20 {
        let mut g = GaussianSource::new(seed, 1);
        let pts: Vec<Point> = (0..200).map(|_| [g.uniform() * 5.0, g.uniform() * 3.0]).collect();
        let mut mine = convex_hull(&pts);
        mine.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        check(mine == brute_force_hull(&pts), || format!("hull mismatch on seed {seed}"))?;
        let closed = closed_hull(&pts);
        check(hull_contains_hull(&closed, &pts, 1e-9), || "closed hull misses a point".into())?;
    }
    // eigen residuals
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = 1 + (src.uniform() * 8.0) as usize;
        let b = ComplexMat::from_fn(n, n, |_, _| src.complex_normal());
        let m = &b * b.adjoint();
        for pair in hermitian_eigen(&m).map_err(|e| e.to_string())? {
            worst = worst.max(eigen_residual(&m, &pair));
        }
    }
    check(worst <= 1e-9, || format!("eigen residual {worst:e}"))?;
    // encoding-order bookkeeping used by every DPC path
    for n in 1..=4 {
        let all = EncodingOrder::all(n);
        check(all.len() == (1..=n).product::<usize>(), || format!("{n}! orders"))?;
    }
    Ok(format!("all property checks hold, max eigen residual {worst:.2e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("duality gap on the builtin counter-example", counterexample_gap),
        ("per-constraint-set downlink/uplink duality", per_set_duality),
        ("SDP analytic single-pair check", sdp_orthogonal),
        ("relaxation lower bound and repaired feasibility", relaxation_bound),
        ("sweep vs random-search area trend", area_trend),
        ("DPC hull contains linear hull", dpc_dominance),
        ("bisection contract", bisection_contract),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.1}s): {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1}s): {detail}", n + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
