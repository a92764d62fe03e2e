//! Sparse coding against the effective dictionary `D = Φ Ψ` and frame
//! reconstruction.
//!
//! [`BasisPursuit`] solves basis pursuit denoising,
//! `min ‖a‖₁ s.t. ‖y − D a‖₂ ≤ ε`, through a log-barrier method on its dual
//! `max yᵀν − ε‖ν‖₂ s.t. ‖Dᵀν‖∞ ≤ 1`. The dual has only `m` unknowns.
//! Newton steps are taken in `z = R ν`, where `Dᵀ = Q R`, so the barrier
//! Hessian becomes `Qᵀ W Q` plus the norm term and no longer inherits the
//! conditioning of `D`; learned dictionaries are often close to singular.
//! At a barrier center the multipliers of the `2d` constraints
//! `±dⱼᵀν ≤ 1` form a primal code whose residual is exactly ε.
//!
//! When the rows of `D` are dependent the problem is restated on the range
//! of `D`, with ε shrunk by the part of `y` outside it.
//!
//! After each centering stage the primal code is made feasible, its ℓ1 norm
//! is compared with the dual objective of the current strictly feasible `ν`,
//! and the solver stops once this certified gap falls under the relative
//! tolerance. Once the objective settles, the support of the active dual
//! constraints is polished to an exact solution by a few active-set moves.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::dictionary::Dictionary;
use crate::error::{dim_err, Error, Result};
use crate::framing::{FrameLayout, SignalFrameSet};
use crate::linalg::{axpy, dot, lstsq_columns, norm1, norm2, Cholesky, IncrementalQr, Matrix};
use crate::sensing::{MeasurementSet, SensingMatrix};

/// `D = Φ Ψ`, `m × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveDictionary {
    pub entries: Matrix,
    /// Ambient dimension of the atoms before sensing.
    pub n: usize,
}

impl EffectiveDictionary {
    pub fn m(&self) -> usize {
        self.entries.rows()
    }

    pub fn d(&self) -> usize {
        self.entries.cols()
    }
}

pub fn compose(phi: &SensingMatrix, dict: &Dictionary) -> Result<EffectiveDictionary> {
    if phi.n() != dict.n() {
        return Err(dim_err("dictionary atom length vs sensing matrix columns", phi.n(), dict.n()));
    }
    Ok(EffectiveDictionary { entries: phi.entries.matmul(&dict.atoms)?, n: dict.n() })
}

/// Residual bound per column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Absolute(f64),
    /// `ε = factor · ‖y‖₂`.
    Relative(f64),
}

impl Epsilon {
    pub fn resolve(self, y: &[f64]) -> f64 {
        match self {
            Epsilon::Absolute(e) => e,
            Epsilon::Relative(f) => f * norm2(y),
        }
    }

    fn validate(self) -> Result<()> {
        let v = match self {
            Epsilon::Absolute(e) | Epsilon::Relative(e) => e,
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Config(alloc::format!("epsilon {v} must be finite and ≥ 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    pub epsilon: Epsilon,
    /// Cap on the total number of Newton steps.
    pub max_iters: usize,
    /// Relative duality-gap tolerance.
    pub tol: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self { epsilon: Epsilon::Relative(1e-3), max_iters: 500, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpSolution {
    pub code: Vec<f64>,
    pub residual_norm: f64,
    /// Resolved ε for this column.
    pub epsilon: f64,
    /// Newton steps taken.
    pub iterations: usize,
    /// The certified gap reached the tolerance and the code satisfies the bound.
    pub converged: bool,
    /// `‖a‖₁` minus the best dual lower bound found.
    pub duality_gap: f64,
    /// Smallest `‖a‖₁` found by the end of every centering stage.
    pub objective_history: Vec<f64>,
}

impl BpSolution {
    pub fn l1(&self) -> f64 {
        norm1(&self.code)
    }
}

/// Basis pursuit denoising solver bound to one effective dictionary.
#[derive(Debug, Clone)]
pub struct BasisPursuit {
    d: Matrix,
    /// Thin QR of `Dᵀ` over the rows of `D` that are independent
    rows_qr: IncrementalQr,
    kept_rows: Vec<usize>,
    /// `Qᵀ` from `Dᵀ = Q R`; the Newton steps run in `z = R ν`, where the
    /// barrier Hessian no longer carries the conditioning of `D`
    whitened: Matrix,
    /// `R⁻ᵀ R⁻¹`
    r_gram_inv: Matrix,
    /// `DᵀD`, for restricted solves
    atom_gram: Matrix,
    full_rank: bool,
    /// When `D` has dependent rows: an orthonormal basis `U` of its range
    /// and a solver for `Uᵀ D`, which has full row rank
    range: Option<(Matrix, Box<BasisPursuit>)>,
    cfg: RecoveryConfig,
}

const BARRIER_GROWTH: f64 = 30.0;
const MAX_CENTERING_STEPS: usize = 50;
const NEWTON_TOL: f64 = 1e-10;
const ARMIJO: f64 = 0.01;
const POLISH_MOVES: usize = 12;
const POLISH_START: f64 = 1e-3;

enum Restricted {
    Solved { code: Vec<f64>, nu: Vec<f64> },
    /// Coefficients that came out with the wrong sign.
    SignFlip(Vec<usize>),
    /// The support is too small to reach the ball; grow it by this atom.
    Short(usize, f64),
}

fn residual(d: &Matrix, a: &[f64], y: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; y.len()];
    d.mul_vec_into(a, &mut r);
    r.iter_mut().zip(y).for_each(|(ri, yi)| *ri = yi - *ri);
    r
}

/// Smallest `t ∈ [0, 1]` with `‖r0 − t g‖ ≤ eps`, assuming `‖r0 − g‖ ≤ eps`.
fn feasible_step(r0: &[f64], g: &[f64], eps: f64) -> f64 {
    let a = dot(g, g);
    let b = -2.0 * dot(r0, g);
    let c = dot(r0, r0) - eps * eps;
    if c <= 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        return 1.0;
    }
    let disc = (b * b - 4.0 * a * c).max(0.0);
    // smaller root of a t² + b t + c
    let t = (-b - libm::sqrt(disc)) / (2.0 * a);
    t.clamp(0.0, 1.0)
}

/// Cholesky of `h`, adding a growing ridge when rounding has made it
/// indefinite.
fn factor_with_ridge(h: &mut Matrix) -> Option<Cholesky> {
    if let Ok(c) = Cholesky::factor(h) {
        return Some(c);
    }
    let n = h.rows();
    let top = (0..n).map(|i| h.get(i, i)).fold(0.0f64, f64::max);
    let mut ridge = 1e-14 * top;
    let mut added = 0.0;
    while ridge <= 1e-6 * top {
        for i in 0..n {
            h.set(i, i, h.get(i, i) + ridge - added);
        }
        added = ridge;
        if let Ok(c) = Cholesky::factor(h) {
            return Some(c);
        }
        ridge *= 100.0;
    }
    None
}

/// `τ(ε‖ν‖ − yᵀν) − Σ log(1 − sⱼ) − Σ log(1 + sⱼ)` with `s = Dᵀν`, or `None`
/// outside the domain.
fn dual_barrier(nu: &[f64], s: &[f64], y: &[f64], eps: f64, tau: f64) -> Option<f64> {
    let mut f = tau * (eps * norm2(nu) - dot(y, nu));
    for &sj in s {
        let (p, q) = (1.0 - sj, 1.0 + sj);
        if !(p > 0.0 && q > 0.0) {
            return None;
        }
        f -= libm::log(p) + libm::log(q);
    }
    Some(f)
}

impl BasisPursuit {
    pub fn new(dict: &EffectiveDictionary, cfg: RecoveryConfig) -> Result<Self> {
        Self::with_row_tol(dict, cfg, 1e-10)
    }

    fn with_row_tol(dict: &EffectiveDictionary, cfg: RecoveryConfig, row_tol: f64) -> Result<Self> {
        cfg.epsilon.validate()?;
        if cfg.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(cfg.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        let d = dict.entries.clone();
        let dt = d.transpose();
        let mut rows_qr = IncrementalQr::new(d.cols());
        let kept_rows: Vec<usize> = (0..d.rows()).filter(|&i| rows_qr.push_with_tol(dt.col(i), row_tol)).collect();
        let full_rank = kept_rows.len() == d.rows();
        let atom_gram = dt.outer_gram();
        let m = d.rows();
        let (whitened, r_gram_inv) = if full_rank {
            let r_inv = Matrix::from_columns(
                m,
                &(0..m)
                    .map(|i| {
                        let mut e = vec![0.0; m];
                        e[i] = 1.0;
                        rows_qr.solve_r(&e)
                    })
                    .collect::<Vec<_>>(),
            )?;
            (rows_qr.q_matrix().transpose(), r_inv.transpose().outer_gram())
        } else {
            (Matrix::zeros(0, 0), Matrix::zeros(0, 0))
        };
        let mut range = None;
        if !full_rank {
            let mut cols_qr = IncrementalQr::new(m);
            d.columns().for_each(|c| {
                cols_qr.push(c);
            });
            if !cols_qr.is_empty() && cols_qr.len() < m {
                let u = cols_qr.q_matrix();
                let reduced = EffectiveDictionary { entries: u.transpose().matmul(&d)?, n: dict.n };
                // UᵀD has exactly as many rows as independent columns were found
                range = Some((u, Box::new(BasisPursuit::with_row_tol(&reduced, cfg, 0.0)?)));
            }
        }
        Ok(Self { d, rows_qr, kept_rows, whitened, r_gram_inv, atom_gram, full_rank, range, cfg })
    }

    pub fn config(&self) -> &RecoveryConfig {
        &self.cfg
    }

    /// Minimum-norm `x` with `(D x)ᵢ = tᵢ` on the independent rows.
    fn least_norm(&self, t: &[f64]) -> Vec<f64> {
        let sub: Vec<f64> = self.kept_rows.iter().map(|&i| t[i]).collect();
        self.rows_qr.min_norm(&sub)
    }

    pub fn solve(&self, y: &[f64]) -> Result<BpSolution> {
        let m = self.d.rows();
        if y.len() != m {
            return Err(dim_err("measurement length", m, y.len()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("measurement vector is not finite".into()));
        }
        self.solve_within(y, self.cfg.epsilon.resolve(y))
    }

    fn solve_within(&self, y: &[f64], eps: f64) -> Result<BpSolution> {
        let d = &self.d;
        let dim = d.cols();
        if let Some((u, inner)) = &self.range {
            // ‖y − D a‖² = ‖y⊥‖² + ‖Uᵀy − UᵀD a‖²
            let yr = u.tr_mul_vec(y)?;
            let mut perp = y.to_vec();
            u.mul_vec_into(&yr, &mut perp);
            let perp = norm2(&y.iter().zip(&perp).map(|(a, b)| a - b).collect::<Vec<_>>());
            let reachable = perp <= eps + 1e-12 * norm2(y);
            // out of reach: the sparsest code for the nearest reachable point, flagged
            let inner_eps = if reachable { libm::sqrt((eps * eps - perp * perp).max(0.0)) } else { 0.0 };
            let mut sol = inner.solve_within(&yr, inner_eps)?;
            sol.converged &= reachable;
            sol.epsilon = eps;
            sol.residual_norm = norm2(&residual(d, &sol.code, y));
            return Ok(sol);
        }
        let ynorm = norm2(y);
        if ynorm <= eps {
            return Ok(BpSolution {
                code: vec![0.0; dim],
                residual_norm: ynorm,
                epsilon: eps,
                iterations: 0,
                converged: true,
                duality_gap: 0.0,
                objective_history: Vec::new(),
            });
        }

        let dty = d.tr_mul_vec(y)?;
        let scale = dty.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 || !self.full_rank {
            // no strictly feasible dual start along y, or an unbounded dual
            let a0 = self.least_norm(y);
            return Ok(self.finish(a0, y, eps, 0, false, f64::INFINITY, Vec::new()));
        }
        // two starts with ‖Dᵀν‖∞ = 1/2: along y, and along the least-norm
        // code (z ∝ R⁻ᵀ y); keep the one with the better dual value
        let y_white = self.rows_qr.solve_rt(y);
        let along_y: Vec<f64> = y.iter().map(|v| 0.5 * v / scale).collect();
        let mut z = self.whitened.mul_vec(&d.tr_mul_vec(&along_y)?)?;
        let ln = self.whitened.tr_mul_vec(&y_white)?;
        let ln_scale = ln.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if ln_scale > 0.0 {
            let z_ln: Vec<f64> = y_white.iter().map(|v| 0.5 * v / ln_scale).collect();
            let value = |z: &[f64]| {
                let nu = self.rows_qr.solve_r(z);
                dot(y, &nu) - eps * norm2(&nu)
            };
            if value(&z_ln) > value(&z) {
                z = z_ln;
            }
        }
        let mut nu = self.rows_qr.solve_r(&z);
        let mut s = self.whitened.tr_mul_vec(&z)?;
        let mut tau = (2 * dim) as f64 / (dot(y, &nu) - eps * norm2(&nu));
        let mut iterations = 0;
        let mut history: Vec<f64> = Vec::new();
        // best feasible code by ℓ1, and the best certified lower bound
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut best_lower = f64::NEG_INFINITY;

        loop {
            let mut moved = false;
            for _ in 0..MAX_CENTERING_STEPS {
                if iterations >= self.cfg.max_iters {
                    break;
                }
                iterations += 1;
                match self.newton_step(&mut z, &mut nu, &mut s, y, &y_white, eps, tau) {
                    Some(true) => moved = true,
                    Some(false) | None => break,
                }
            }
            let lower = self.dual_value(nu.clone(), y, eps);
            if lower.is_finite() {
                best_lower = best_lower.max(lower);
            }
            let code = self.primal_from_dual(&s, &nu, y, eps, tau);
            let l1 = norm1(&code);
            if l1.is_finite() && best.as_ref().is_none_or(|(_, b)| l1 < *b) {
                best = Some((code, l1));
            }
            let Some(best_l1) = best.as_ref().map(|(_, b)| *b) else {
                // nothing usable from the barrier path
                let a0 = self.least_norm(y);
                return Ok(self.finish(a0, y, eps, iterations, false, f64::INFINITY, history));
            };
            history.push(best_l1);
            let gap = (best_l1 - best_lower).max(0.0);
            if gap <= self.cfg.tol * best_l1 {
                let (code, _) = best.expect("checked above");
                return Ok(self.finish(code, y, eps, iterations, true, gap, history));
            }
            // polishing pays off once the objective has settled
            let settled = history.len() >= 2 && history[history.len() - 2] - best_l1 <= POLISH_START * best_l1;
            if settled {
                if let Some((pcode, pgap)) = self.polish(&s, y, eps) {
                    let pl1 = norm1(&pcode);
                    best_lower = best_lower.max(pl1 - pgap);
                    if pl1 < best_l1 {
                        best = Some((pcode, pl1));
                    }
                    let (code, l1) = best.clone().expect("checked above");
                    let gap = (l1 - best_lower).max(0.0);
                    if gap <= self.cfg.tol * l1 {
                        return Ok(self.finish(code, y, eps, iterations, true, gap, history));
                    }
                }
            }
            // a stage without a single accepted step means rounding has taken over
            if iterations >= self.cfg.max_iters || (!moved && history.len() > 1) {
                let (code, l1) = best.expect("checked above");
                let gap = (l1 - best_lower).max(0.0);
                return Ok(self.finish(code, y, eps, iterations, false, gap, history));
            }
            tau *= BARRIER_GROWTH;
        }
    }

    /// One damped Newton step on the dual barrier at `tau`, taken in
    /// `z = R ν`. Returns `Some(false)` once the Newton decrement is
    /// negligible and `None` when the linear algebra breaks down.
    #[allow(clippy::too_many_arguments)]
    fn newton_step(
        &self,
        z: &mut Vec<f64>,
        nu: &mut Vec<f64>,
        s: &mut Vec<f64>,
        y: &[f64],
        y_white: &[f64],
        eps: f64,
        tau: f64,
    ) -> Option<bool> {
        let wq = &self.whitened;
        let m = z.len();
        let nnorm = norm2(nu);
        let mut w = vec![0.0; s.len()];
        let mut q = vec![0.0; s.len()];
        for (j, &sj) in s.iter().enumerate() {
            let (p1, p2) = (1.0 / (1.0 - sj), 1.0 / (1.0 + sj));
            q[j] = p1 - p2;
            w[j] = p1 * p1 + p2 * p2;
        }
        // gradient τ R⁻ᵀ(εν̂ − y) + Qᵀ q
        let mut grad = wq.mul_vec(&q).expect("dims");
        let mut h = wq.weighted_outer_gram(&w).expect("dims");
        if eps > 0.0 {
            let nu_hat: Vec<f64> = nu.iter().map(|v| v / nnorm).collect();
            let u = self.rows_qr.solve_rt(&nu_hat);
            for i in 0..m {
                grad[i] += tau * (eps * u[i] - y_white[i]);
            }
            let c = tau * eps / nnorm;
            for j in 0..m {
                for i in 0..m {
                    h.set(i, j, h.get(i, j) + c * (self.r_gram_inv.get(i, j) - u[i] * u[j]));
                }
            }
        } else {
            for i in 0..m {
                grad[i] -= tau * y_white[i];
            }
        }
        let chol = factor_with_ridge(&mut h)?;
        let mut step: Vec<f64> = grad.iter().map(|g| -g).collect();
        chol.solve_in_place(&mut step);
        let slope = dot(&grad, &step);
        if !slope.is_finite() {
            return None;
        }
        if -slope / 2.0 < NEWTON_TOL || slope >= 0.0 {
            return Some(false);
        }
        let ds = wq.tr_mul_vec(&step).expect("dims");
        let dnu = self.rows_qr.solve_r(&step);
        // largest step keeping every |sⱼ| < 1
        let mut smax: f64 = 1.0;
        for (&sj, &dj) in s.iter().zip(&ds) {
            if dj > 0.0 {
                smax = smax.min((1.0 - sj) / dj);
            } else if dj < 0.0 {
                smax = smax.min((-1.0 - sj) / dj);
            }
        }
        let f0 = dual_barrier(nu, s, y, eps, tau)?;
        let mut t = (0.99 * smax).min(1.0);
        for _ in 0..60 {
            let trial: Vec<f64> = nu.iter().zip(&dnu).map(|(v, p)| v + t * p).collect();
            let st: Vec<f64> = s.iter().zip(&ds).map(|(v, p)| v + t * p).collect();
            if let Some(f) = dual_barrier(&trial, &st, y, eps, tau) {
                if f <= f0 + ARMIJO * t * slope {
                    let mut zt = z.clone();
                    axpy(t, &step, &mut zt);
                    // recompute from z against drift
                    let st = wq.tr_mul_vec(&zt).expect("dims");
                    let nt = self.rows_qr.solve_r(&zt);
                    if st.iter().all(|v| v.abs() < 1.0) && nt.iter().all(|v| v.is_finite()) {
                        (*z, *s, *nu) = (zt, st, nt);
                        return Some(true);
                    }
                }
            }
            t *= 0.5;
        }
        Some(false)
    }

    /// Primal code from the barrier multipliers,
    /// `aⱼ = (1/(1 − sⱼ) − 1/(1 + sⱼ)) / τ`, corrected so that
    /// `y − D a = εν̂` exactly.
    fn primal_from_dual(&self, s: &[f64], nu: &[f64], y: &[f64], eps: f64, tau: f64) -> Vec<f64> {
        let d = &self.d;
        let mut a: Vec<f64> = s.iter().map(|&sj| (1.0 / (1.0 - sj) - 1.0 / (1.0 + sj)) / tau).collect();
        let nnorm = norm2(nu);
        let mut target = residual(d, &a, y);
        for (t, v) in target.iter_mut().zip(nu) {
            *t -= eps * v / nnorm;
        }
        let corr = self.least_norm(&target);
        axpy(1.0, &corr, &mut a);
        a
    }

    /// Exact solution on the support of the nearly active dual constraints
    /// `|sⱼ| ≈ 1`, refined by a few active-set moves, with its certified
    /// duality gap.
    fn polish(&self, s: &[f64], y: &[f64], eps: f64) -> Option<(Vec<f64>, f64)> {
        let (m, dim) = (self.d.rows(), self.d.cols());
        let a: Vec<f64> = s.iter().map(|&sj| 1.0 / (1.0 - sj) - 1.0 / (1.0 + sj)).collect();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| a[j].abs().total_cmp(&a[i].abs()).then(i.cmp(&j)));
        let mut sizes: Vec<usize> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|tol| order.iter().take_while(|&&i| 1.0 - s[i].abs() < *tol).count())
            .filter(|&k| k > 0 && k <= m)
            .collect();
        sizes.push(m.min(dim));
        sizes.sort_unstable();
        sizes.dedup();

        let mut best: Option<(Vec<f64>, f64)> = None;
        for k in sizes {
            let mut support: Vec<(usize, f64)> = order[..k].iter().map(|&i| (i, s[i].signum())).collect();
            for _ in 0..POLISH_MOVES {
                let Some(step) = self.restricted(&support, y, eps) else { break };
                match step {
                    Restricted::Solved { code, nu } => {
                        let l1 = norm1(&code);
                        let dtn = self.d.tr_mul_vec(&nu).expect("dims");
                        let gap = (l1 - self.dual_value(nu, y, eps)).max(0.0);
                        if best.as_ref().is_none_or(|(_, g)| gap < *g) {
                            best = Some((code, gap));
                        }
                        if gap <= self.cfg.tol * l1 || support.len() >= m {
                            break;
                        }
                        // bring in the most violated dual constraint
                        let (j, v) = dtn
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| !support.iter().any(|(i, _)| i == j))
                            .fold((usize::MAX, 0.0f64), |acc, (j, &v)| if v.abs() > acc.1.abs() { (j, v) } else { acc });
                        if j == usize::MAX || v.abs() <= 1.0 {
                            break;
                        }
                        support.push((j, v.signum()));
                    }
                    Restricted::SignFlip(bad) => support.retain(|(i, _)| !bad.contains(i)),
                    Restricted::Short(j, sign) => {
                        if support.len() >= m {
                            break;
                        }
                        support.push((j, sign));
                    }
                }
                if support.is_empty() {
                    break;
                }
            }
            if best.as_ref().is_some_and(|(c, g)| *g <= self.cfg.tol * norm1(c)) {
                break;
            }
        }
        best
    }

    /// On a support `S` with signs `s` the problem `min sᵀc s.t.
    /// ‖y − D_S c‖ ≤ ε` has the closed form `c = c_ls − t G⁻¹ s`,
    /// `G = D_SᵀD_S`, where `t` stretches the residual to length ε; then
    /// `ν = (y − D_S c) / t` satisfies `D_Sᵀ ν = s`.
    fn restricted(&self, support: &[(usize, f64)], y: &[f64], eps: f64) -> Option<Restricted> {
        let d = &self.d;
        let m = d.rows();
        let k = support.len();
        let signs: Vec<f64> = support.iter().map(|&(_, s)| s).collect();
        let g = Matrix::from_fn(k, k, |i, j| self.atom_gram.get(support[i].0, support[j].0));
        // the normal equations square the conditioning of D_S; past about
        // 1e8 switch to a QR of D_S itself
        let (c_ls, h, r_ls, gvec) = match Cholesky::factor(&g) {
            Ok(chol) if chol.diag_ratio() < 1e4 => {
                let dty: Vec<f64> = support.iter().map(|&(i, _)| dot(d.col(i), y)).collect();
                let c_ls = chol.solve(&dty);
                let h = chol.solve(&signs);
                let mut r_ls = y.to_vec();
                let mut gvec = vec![0.0; m];
                for (j, &(i, _)) in support.iter().enumerate() {
                    axpy(-c_ls[j], d.col(i), &mut r_ls);
                    axpy(h[j], d.col(i), &mut gvec);
                }
                (c_ls, h, r_ls, gvec)
            }
            _ => {
                let mut qr = IncrementalQr::new(m);
                if !support.iter().all(|&(i, _)| qr.push(d.col(i))) {
                    return None;
                }
                let u = qr.solve_rt(&signs);
                (qr.solve(y), qr.solve_r(&u), qr.residual(y), qr.q_mul(&u))
            }
        };
        let ynorm = norm2(y);
        let slack = eps * eps - dot(&r_ls, &r_ls);
        if slack < -1e-24 * ynorm * ynorm {
            // the support cannot reach the ball; add the atom best aligned with the residual
            let c = d.tr_mul_vec(&r_ls).expect("dims");
            let (j, v) = c
                .iter()
                .enumerate()
                .filter(|(j, _)| !support.iter().any(|(i, _)| i == j))
                .fold((usize::MAX, 0.0f64), |acc, (j, &v)| if v.abs() > acc.1.abs() { (j, v) } else { acc });
            return (j != usize::MAX).then(|| Restricted::Short(j, v.signum()));
        }
        let gnorm = norm2(&gvec);
        if gnorm == 0.0 {
            return None;
        }
        let t = libm::sqrt(slack.max(0.0)) / gnorm;
        let c: Vec<f64> = c_ls.iter().zip(&h).map(|(c, h)| c - t * h).collect();
        let bad: Vec<usize> =
            support.iter().zip(&c).filter(|((_, s), c)| *c * s <= 0.0).map(|((i, _), _)| *i).collect();
        if !bad.is_empty() {
            return Some(Restricted::SignFlip(bad));
        }
        // ν = r_ls / t + D_S G⁻¹ s; the first term vanishes with the ball
        let mut nu = gvec;
        if t > 0.0 {
            axpy(1.0 / t, &r_ls, &mut nu);
        }
        let mut code = vec![0.0; d.cols()];
        support.iter().zip(&c).for_each(|(&(i, _), &v)| code[i] = v);
        Some(Restricted::Solved { code, nu })
    }

    /// Largest `yᵀν − ε‖ν‖` along the ray through `ν` inside the dual
    /// feasible set `‖Dᵀν‖∞ ≤ 1`; zero when the ray only decreases it.
    fn dual_value(&self, nu: Vec<f64>, y: &[f64], eps: f64) -> f64 {
        let dtn = self.d.tr_mul_vec(&nu).expect("dims");
        let scale = dtn.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let value = dot(y, &nu) - eps * norm2(&nu);
        if scale == 0.0 || !(value > 0.0) {
            return 0.0;
        }
        value / scale
    }

    /// Certifies `‖y − D a‖ ≤ ε` by stepping from the iterate towards an
    /// exact solution when it is not already feasible.
    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        w: Vec<f64>,
        y: &[f64],
        eps: f64,
        iterations: usize,
        gap_ok: bool,
        duality_gap: f64,
        objective_history: Vec<f64>,
    ) -> BpSolution {
        let d = &self.d;
        // rounding allowance so that ε = 0 can be certified
        let bound = eps + 1e-12 * norm2(y);
        let r0 = residual(d, &w, y);
        let mut code = w;
        let mut res = norm2(&r0);
        let mut feasible = res <= bound;

        if !feasible {
            let support: Vec<usize> = (0..code.len()).filter(|&i| code[i] != 0.0).collect();
            let mut target = None;
            if !support.is_empty() && support.len() <= d.rows() {
                if let Some(c) = lstsq_columns(d, &support, y) {
                    let mut a = vec![0.0; code.len()];
                    support.iter().zip(&c).for_each(|(&i, &v)| a[i] = v);
                    if norm2(&residual(d, &a, y)) <= bound {
                        target = Some(a);
                    }
                }
            }
            if target.is_none() && self.full_rank {
                // projection of the iterate onto {a : D a = y}
                let corr = self.least_norm(&r0);
                target = Some(code.iter().zip(&corr).map(|(a, c)| a + c).collect());
            }
            if let Some(target) = target {
                let step: Vec<f64> = target.iter().zip(&code).map(|(t, a)| t - a).collect();
                let g = d.mul_vec(&step).expect("dims");
                let tau = feasible_step(&r0, &g, bound);
                let candidate: Vec<f64> = code.iter().zip(&step).map(|(a, s)| a + tau * s).collect();
                let cres = norm2(&residual(d, &candidate, y));
                let full_res = norm2(&residual(d, &target, y));
                // the root can land a hair outside the ball; fall back to the endpoint
                if cres <= bound {
                    code = candidate;
                    res = cres;
                    feasible = true;
                } else if full_res <= bound {
                    code = target;
                    res = full_res;
                    feasible = true;
                }
            }
        }
        BpSolution {
            code,
            residual_norm: res,
            epsilon: eps,
            iterations,
            converged: gap_ok && feasible,
            duality_gap,
            objective_history,
        }
    }
}

/// One-shot basis pursuit denoising for a single measurement vector.
pub fn bp_solve(y: &[f64], dict: &EffectiveDictionary, cfg: &RecoveryConfig) -> Result<BpSolution> {
    BasisPursuit::new(dict, *cfg)?.solve(y)
}

/// Codes for every measurement column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodes {
    /// `d × L`.
    pub codes: Matrix,
    pub residual_norms: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

impl SparseCodes {
    pub fn from_solutions(d: usize, solutions: Vec<BpSolution>) -> Result<Self> {
        let cols: Vec<&[f64]> = solutions.iter().map(|s| s.code.as_slice()).collect();
        let codes = Matrix::from_columns(d, &cols)?;
        Ok(Self {
            codes,
            residual_norms: solutions.iter().map(|s| s.residual_norm).collect(),
            iterations: solutions.iter().map(|s| s.iterations).collect(),
            converged: solutions.iter().map(|s| s.converged).collect(),
        })
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn non_converged(&self) -> usize {
        self.converged.iter().filter(|&&c| !c).count()
    }
}

pub fn sparse_code_all(
    y: &MeasurementSet,
    dict: &EffectiveDictionary,
    cfg: &RecoveryConfig,
) -> Result<SparseCodes> {
    if y.m() != dict.m() {
        return Err(dim_err("measurement rows vs effective dictionary rows", dict.m(), y.m()));
    }
    let solver = BasisPursuit::new(dict, *cfg)?;
    let solutions = y
        .measurements
        .columns()
        .map(|col| solver.solve(col))
        .collect::<Result<Vec<_>>>()?;
    SparseCodes::from_solutions(dict.d(), solutions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpSolution {
    pub code: Vec<f64>,
    /// Selected atoms in selection order.
    pub support: Vec<usize>,
    pub residual: Vec<f64>,
}

/// Orthogonal matching pursuit with `k` atoms and a least-squares refit after
/// every selection. Stops early on an exact fit or when no remaining atom is
/// linearly independent of the selection.
pub fn omp_solve(y: &[f64], dict: &EffectiveDictionary, k: usize) -> Result<OmpSolution> {
    let d = &dict.entries;
    let (m, dim) = (d.rows(), d.cols());
    if y.len() != m {
        return Err(dim_err("measurement length", m, y.len()));
    }
    if k > m {
        return Err(Error::Config(alloc::format!("sparsity {k} exceeds measurement count {m}")));
    }
    let norms: Vec<f64> = d.columns().map(norm2).collect();
    let mut qr = IncrementalQr::new(m);
    let mut support = Vec::with_capacity(k);
    let mut excluded = vec![false; dim];
    let mut r = y.to_vec();
    let ynorm = norm2(y);
    while support.len() < k && norm2(&r) > 1e-14 * ynorm.max(f64::MIN_POSITIVE) {
        let best = (0..dim)
            .filter(|&j| !excluded[j] && norms[j] > 0.0)
            .map(|j| (j, dot(d.col(j), &r).abs() / norms[j]))
            .fold(None, |best: Option<(usize, f64)>, c| match best {
                Some(b) if b.1 >= c.1 => Some(b),
                _ => Some(c),
            });
        let Some((j, _)) = best else { break };
        excluded[j] = true;
        if !qr.push(d.col(j)) {
            continue;
        }
        support.push(j);
        r = qr.residual(y);
    }
    let coef = qr.solve(y);
    let mut code = vec![0.0; dim];
    support.iter().zip(&coef).for_each(|(&j, &c)| code[j] = c);
    Ok(OmpSolution { code, support, residual: r })
}

/// `X̂ = Ψ A`, framed with `layout`.
pub fn recover_frames(codes: &Matrix, dict: &Dictionary, layout: FrameLayout) -> Result<SignalFrameSet> {
    if codes.rows() != dict.d() {
        return Err(dim_err("code length vs dictionary size", dict.d(), codes.rows()));
    }
    if layout.frame_len != dict.n() {
        return Err(dim_err("frame length vs atom length", layout.frame_len, dict.n()));
    }
    SignalFrameSet::new(dict.atoms.matmul(codes)?, layout)
}
