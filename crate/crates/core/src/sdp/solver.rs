//! Dense primal-dual interior-point solver for small block SDPs.
//!
//! Standard form over the cone `K = S^{n_1}_+ x ... x S^{n_B}_+ x R^l_+`:
//!
//! ```text
//! primal:  min  <C, X>   s.t.  A(X) = b,  X in K
//! dual:    max  b^T y    s.t.  C - A^T(y) = Z,  Z in K
//! ```
//!
//! Infeasible-start path following with the HKM search direction and
//! Mehrotra predictor-corrector steps. The Schur complement is at most a few
//! dozen rows, so it is formed and factored densely every iteration.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::linalg::symmetric_eigen;

/// Problem data in standard form. Constraint `i` is
/// `sum_b <a_blocks[i][b], X_b> + a_lp.row(i) . x = b[i]`.
#[derive(Debug, Clone)]
pub struct SdpData {
    pub c_blocks: Vec<DMatrix<f64>>,
    pub c_lp: DVector<f64>,
    /// `a_blocks[i][b]`; `None` is a zero block.
    pub a_blocks: Vec<Vec<Option<DMatrix<f64>>>>,
    pub a_lp: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl SdpData {
    pub fn n_constraints(&self) -> usize {
        self.b.len()
    }

    fn block_sizes(&self) -> Vec<usize> {
        self.c_blocks.iter().map(|c| c.nrows()).collect()
    }

    fn lp_dim(&self) -> usize {
        self.c_lp.len()
    }

    /// Barrier parameter denominator: total cone rank.
    fn cone_rank(&self) -> f64 {
        (self.block_sizes().iter().sum::<usize>() + self.lp_dim()) as f64
    }

    fn apply(&self, xb: &[DMatrix<f64>], xl: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n_constraints(), |i, _| {
            let mut acc = self.a_lp.row(i).transpose().dot(xl);
            for (a, x) in self.a_blocks[i].iter().zip(xb) {
                if let Some(a) = a {
                    acc += a.dot(x);
                }
            }
            acc
        })
    }

    fn adjoint(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mut blocks: Vec<DMatrix<f64>> =
            self.block_sizes().iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (i, row) in self.a_blocks.iter().enumerate() {
            for (acc, a) in blocks.iter_mut().zip(row) {
                if let Some(a) = a {
                    *acc += a * y[i];
                }
            }
        }
        (blocks, self.a_lp.transpose() * y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Target for the relative primal, dual and gap residuals.
    pub tol: f64,
    /// Residual level still accepted as optimal when progress stalls.
    pub accept_tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 200,
            tol: 1e-9,
            accept_tol: 1e-7,
            step_fraction: 0.98,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    /// Iteration cap or stalled steps before the residuals reached
    /// `accept_tol`.
    NumericalFailure,
}

/// Relative KKT residuals.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Residuals {
    /// `|b - A(X)| / (1 + |b|)`.
    pub primal: f64,
    /// `|C - A^T y - Z|_F / (1 + |C|_F)`.
    pub dual: f64,
    /// `<X, Z> / (1 + |p_obj| + |d_obj|)`.
    pub complementarity: f64,
}

#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub status: SolverStatus,
    pub x_blocks: Vec<DMatrix<f64>>,
    pub x_lp: DVector<f64>,
    pub y: DVector<f64>,
    pub z_blocks: Vec<DMatrix<f64>>,
    pub z_lp: DVector<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub residuals: Residuals,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `alpha` with `X + alpha dX` in the PSD cone (capped at `cap`).
fn psd_step(x: &DMatrix<f64>, dx: &DMatrix<f64>, cap: f64) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = ch.l();
    let n = x.nrows();
    // L^{-1} dX L^{-T}
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("nonsingular Cholesky factor");
    let m = &linv * dx * linv.transpose();
    let (vals, _) = symmetric_eigen(&m);
    let min = vals[n - 1];
    if min >= 0.0 {
        cap
    } else {
        (-1.0 / min).min(cap)
    }
}

fn lp_step(x: &DVector<f64>, dx: &DVector<f64>, cap: f64) -> f64 {
    let mut a = cap;
    for (xi, di) in x.iter().zip(dx) {
        if *di < 0.0 {
            a = a.min(-xi / di);
        }
    }
    a
}

fn inverse_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
    dzl: DVector<f64>,
}

/// Solve with default options.
pub fn solve(data: &SdpData) -> SolverOutput {
    solve_with(data, &SolverOptions::default())
}

pub fn solve_with(data: &SdpData, opts: &SolverOptions) -> SolverOutput {
    let m = data.n_constraints();
    let sizes = data.block_sizes();
    let nu = data.cone_rank();

    let b_norm = data.b.norm();
    let c_norm = (data.c_blocks.iter().map(|c| c.norm_squared()).sum::<f64>()
        + data.c_lp.norm_squared())
    .sqrt();

    // Starting point scaled to the data.
    let a_max = data
        .a_blocks
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let blk: f64 = row.iter().flatten().map(|a| a.norm_squared()).sum();
            (blk + data.a_lp.row(i).norm_squared()).sqrt()
        })
        .collect::<Vec<_>>();
    let xi = (0..m)
        .map(|i| (1.0 + data.b[i].abs()) / (1.0 + a_max[i]))
        .fold(1.0f64, f64::max)
        * 10.0;
    let eta = (1.0 + c_norm).max(a_max.iter().copied().fold(1.0, f64::max)) * 10.0;

    let mut x: Vec<DMatrix<f64>> = sizes.iter().map(|&n| DMatrix::identity(n, n) * xi).collect();
    let mut z: Vec<DMatrix<f64>> = sizes.iter().map(|&n| DMatrix::identity(n, n) * eta).collect();
    let mut xl = DVector::from_element(data.lp_dim(), xi);
    let mut zl = DVector::from_element(data.lp_dim(), eta);
    let mut y = DVector::zeros(m);

    let mut status = SolverStatus::NumericalFailure;
    let mut iterations = 0;
    let mut stalls = 0;
    let mut best: Option<(f64, Residuals, Vec<DMatrix<f64>>, DVector<f64>, DVector<f64>, Vec<DMatrix<f64>>, DVector<f64>)> = None;

    let residuals_at = |x: &[DMatrix<f64>], xl: &DVector<f64>, y: &DVector<f64>, z: &[DMatrix<f64>], zl: &DVector<f64>| {
        let rp = &data.b - data.apply(x, xl);
        let (aty, atyl) = data.adjoint(y);
        let mut rd2 = 0.0;
        for b in 0..x.len() {
            rd2 += (&data.c_blocks[b] - &aty[b] - &z[b]).norm_squared();
        }
        rd2 += (&data.c_lp - atyl - zl).norm_squared();
        let pobj: f64 = data.c_blocks.iter().zip(x).map(|(c, x)| c.dot(x)).sum::<f64>() + data.c_lp.dot(xl);
        let dobj = data.b.dot(y);
        let xz: f64 = x.iter().zip(z).map(|(a, b)| a.dot(b)).sum::<f64>() + xl.dot(zl);
        (
            Residuals {
                primal: rp.norm() / (1.0 + b_norm),
                dual: rd2.sqrt() / (1.0 + c_norm),
                complementarity: xz.abs() / (1.0 + pobj.abs() + dobj.abs()),
            },
            pobj,
            dobj,
        )
    };

    for it in 0..opts.max_iterations {
        iterations = it;
        let (res, _, _) = residuals_at(&x, &xl, &y, &z, &zl);
        let worst = res.primal.max(res.dual).max(res.complementarity);
        if best.as_ref().map_or(true, |b| worst < b.0) {
            best = Some((worst, res, x.clone(), xl.clone(), y.clone(), z.clone(), zl.clone()));
        }
        if worst <= opts.tol {
            status = SolverStatus::Optimal;
            break;
        }

        let rp = &data.b - data.apply(&x, &xl);
        let (aty, atyl) = data.adjoint(&y);
        let rd: Vec<DMatrix<f64>> = (0..x.len()).map(|b| &data.c_blocks[b] - &aty[b] - &z[b]).collect();
        let rdl = &data.c_lp - atyl - &zl;
        let mu = (x.iter().zip(&z).map(|(a, b)| a.dot(b)).sum::<f64>() + xl.dot(&zl)) / nu;

        let Some(zinv) = z.iter().map(inverse_spd).collect::<Option<Vec<_>>>() else {
            break;
        };

        // Schur complement M_ij = sum_b <A_jb, X_b A_ib Z_b^{-1}> + LP part.
        let mut w: Vec<Vec<Option<DMatrix<f64>>>> = Vec::with_capacity(m);
        for i in 0..m {
            w.push(
                data.a_blocks[i]
                    .iter()
                    .enumerate()
                    .map(|(b, a)| a.as_ref().map(|a| &x[b] * a * &zinv[b]))
                    .collect(),
            );
        }
        let ratio = xl.component_div(&zl);
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut acc = 0.0;
                for b in 0..x.len() {
                    if let (Some(a), Some(wi)) = (&data.a_blocks[j][b], &w[i][b]) {
                        acc += a.dot(wi);
                    }
                }
                for l in 0..data.lp_dim() {
                    acc += data.a_lp[(i, l)] * data.a_lp[(j, l)] * ratio[l];
                }
                schur[(i, j)] = acc;
                schur[(j, i)] = acc;
            }
        }
        let diag_scale = schur.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let mut reg = schur.clone();
                for i in 0..m {
                    reg[(i, i)] += 1e-14 * diag_scale;
                }
                match Cholesky::new(reg) {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        let direction = |target: f64, corr: Option<(&Vec<DMatrix<f64>>, &DVector<f64>)>| -> Direction {
            // G_b = target Z^{-1} - X - corr_b - X Rd Z^{-1}
            let g: Vec<DMatrix<f64>> = (0..x.len())
                .map(|b| {
                    let mut g = &zinv[b] * target - &x[b] - &x[b] * &rd[b] * &zinv[b];
                    if let Some((cb, _)) = corr {
                        g -= &cb[b];
                    }
                    g
                })
                .collect();
            let gl = DVector::from_fn(data.lp_dim(), |l, _| {
                let mut v = (target - xl[l] * zl[l]) / zl[l] - ratio[l] * rdl[l];
                if let Some((_, cl)) = corr {
                    v -= cl[l] / zl[l];
                }
                v
            });
            let rhs = &rp - data.apply(&g, &gl);
            let dy = chol.solve(&rhs);
            let (atdy, atdyl) = data.adjoint(&dy);
            let dz: Vec<DMatrix<f64>> = (0..x.len()).map(|b| &rd[b] - &atdy[b]).collect();
            let dzl = &rdl - atdyl;
            let dx: Vec<DMatrix<f64>> = (0..x.len())
                .map(|b| {
                    let mut d = &zinv[b] * target - &x[b] - &x[b] * &dz[b] * &zinv[b];
                    if let Some((cb, _)) = corr {
                        d -= &cb[b];
                    }
                    sym(&d)
                })
                .collect();
            let dxl = DVector::from_fn(data.lp_dim(), |l, _| {
                let mut v = (target - xl[l] * zl[l] - xl[l] * dzl[l]) / zl[l];
                if let Some((_, cl)) = corr {
                    v -= cl[l] / zl[l];
                }
                v
            });
            Direction { dx, dxl, dy, dz, dzl }
        };
        let steps = |d: &Direction, frac: f64| -> (f64, f64) {
            let mut ap = lp_step(&xl, &d.dxl, f64::INFINITY);
            let mut ad = lp_step(&zl, &d.dzl, f64::INFINITY);
            for b in 0..x.len() {
                ap = ap.min(psd_step(&x[b], &d.dx[b], f64::INFINITY));
                ad = ad.min(psd_step(&z[b], &d.dz[b], f64::INFINITY));
            }
            ((frac * ap).min(1.0), (frac * ad).min(1.0))
        };

        // Predictor.
        let aff = direction(0.0, None);
        let (ap, ad) = steps(&aff, 1.0);
        let mu_aff = {
            let mut acc = 0.0;
            for b in 0..x.len() {
                acc += (&x[b] + &aff.dx[b] * ap).dot(&(&z[b] + &aff.dz[b] * ad));
            }
            acc += (&xl + &aff.dxl * ap).dot(&(&zl + &aff.dzl * ad));
            acc / nu
        };
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let corr_b: Vec<DMatrix<f64>> = (0..x.len()).map(|b| &aff.dx[b] * &aff.dz[b] * &zinv[b]).collect();
        let corr_l = aff.dxl.component_mul(&aff.dzl);
        let dir = direction(sigma * mu, Some((&corr_b, &corr_l)));
        let (ap, ad) = steps(&dir, opts.step_fraction);

        if ap.max(ad) < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }

        for b in 0..x.len() {
            x[b] = sym(&(&x[b] + &dir.dx[b] * ap));
            z[b] = sym(&(&z[b] + &dir.dz[b] * ad));
        }
        xl += &dir.dxl * ap;
        zl += &dir.dzl * ad;
        y += &dir.dy * ad;
        iterations = it + 1;
    }

    let (res, pobj, dobj) = residuals_at(&x, &xl, &y, &z, &zl);
    let worst = res.primal.max(res.dual).max(res.complementarity);
    if status != SolverStatus::Optimal {
        // Fall back to the best iterate seen.
        if let Some((bw, _, bx, bxl, by, bz, bzl)) = best {
            if bw < worst {
                x = bx;
                xl = bxl;
                y = by;
                z = bz;
                zl = bzl;
            }
        }
    }
    let (res, pobj, dobj) = if status == SolverStatus::Optimal {
        (res, pobj, dobj)
    } else {
        residuals_at(&x, &xl, &y, &z, &zl)
    };
    if status != SolverStatus::Optimal && res.primal.max(res.dual).max(res.complementarity) <= opts.accept_tol {
        status = SolverStatus::Optimal;
    }
    SolverOutput {
        status,
        x_blocks: x,
        x_lp: xl,
        y,
        z_blocks: z,
        z_lp: zl,
        primal_objective: pobj,
        dual_objective: dobj,
        iterations,
        residuals: res,
    }
}
