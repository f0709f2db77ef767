//! ADMM solver for the augmented latent self-representation problem
//!
//! ```text
//! min  ||[E1; E2]||_{2,1} + lambda * ||Z_a - blkdiag(Z_a)||_1
//! s.t. X_a = P H_a + E1,   H_a = H_a Z_a + E2,   P^T P = I
//! ```
//!
//! with an auxiliary copy `J = Z_a` carrying the sparsity term. Each sweep
//! updates `P`, `H_a`, `Z_a`, `E`, `J`, then the multipliers `Y1..Y3` and the
//! penalty `mu`, and stops once all three primal residuals drop below `tol`
//! in the max-abs norm.

use std::borrow::Cow;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::AugmentedMatrix;
use crate::error::{Error, Result};
use crate::numerics::{
    col_l21_prox, l21_norm, max_abs, orthogonal_procrustes, shrink, solve_sylvester, spd_solve, DenseMatrix,
};

/// Which parts of the model are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Ablation {
    /// The complete model.
    #[default]
    #[serde(rename = "full")]
    Full,
    /// No off-diagonal sparsity (`lambda = 0`).
    #[serde(rename = "v1")]
    NoSparsity,
    /// Off-diagonal blocks of `X_a` replaced by zeros before solving.
    #[serde(rename = "v2")]
    ZeroOffdiagBlocks,
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::Full => "full",
            Ablation::NoSparsity => "v1",
            Ablation::ZeroOffdiagBlocks => "v2",
        })
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Ablation::Full),
            "v1" | "no-sparsity" => Ok(Ablation::NoSparsity),
            "v2" | "zero-offdiag-blocks" => Ok(Ablation::ZeroOffdiagBlocks),
            other => Err(Error::Config(format!("unknown ablation `{other}` (expected full, v1 or v2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the off-diagonal sparsity term.
    pub lambda: f64,
    /// Latent dimension `k` (rows of `H_a`).
    pub latent_dim: usize,
    pub mu0: f64,
    pub mu_max: f64,
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Seed for the Gaussian initialization of `H_a`.
    pub seed: u64,
    pub ablation: Ablation,
}

impl SolverConfig {
    pub const DEFAULT_MU0: f64 = 1e-4;
    pub const DEFAULT_MU_MAX: f64 = 1e6;
    pub const DEFAULT_RHO: f64 = 1.2;
    pub const DEFAULT_TOL: f64 = 1e-3;
    pub const DEFAULT_MAX_ITER: usize = 100;

    pub fn new(lambda: f64, latent_dim: usize) -> Self {
        Self {
            lambda,
            latent_dim,
            mu0: Self::DEFAULT_MU0,
            mu_max: Self::DEFAULT_MU_MAX,
            rho: Self::DEFAULT_RHO,
            tol: Self::DEFAULT_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
            seed: 0,
            ablation: Ablation::Full,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation;
        self
    }

    /// The sparsity weight actually used, after applying the ablation.
    pub fn effective_lambda(&self) -> f64 {
        match self.ablation {
            Ablation::NoSparsity => 0.0,
            _ => self.lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive".into());
        }
        if !(self.mu0 > 0.0) || !(self.mu0 < self.mu_max) || !self.mu_max.is_finite() {
            return bad(format!("need 0 < mu0 < mu_max, got mu0 = {}, mu_max = {}", self.mu0, self.mu_max));
        }
        if !(self.rho > 1.0) || !self.rho.is_finite() {
            return bad(format!("rho must exceed 1, got {}", self.rho));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        Ok(())
    }
}

/// All primal and dual variables of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    /// Projection, `d x k`.
    pub p: DenseMatrix,
    /// Augmented latent representation, `k x vn`.
    pub h: DenseMatrix,
    /// Augmented self-representation, `vn x vn`.
    pub z: DenseMatrix,
    pub e1: DenseMatrix,
    pub e2: DenseMatrix,
    /// Split copy of `z` carrying the sparsity term.
    pub j: DenseMatrix,
    pub y1: DenseMatrix,
    pub y2: DenseMatrix,
    pub y3: DenseMatrix,
    pub mu: f64,
    pub iter: usize,
}

impl AdmmState {
    /// State with the given `H_a`, everything else zero.
    pub fn zeros(d: usize, h: DenseMatrix, mu: f64) -> Self {
        let (k, m) = h.shape();
        Self {
            p: DenseMatrix::zeros(d, k),
            h,
            z: DenseMatrix::zeros(m, m),
            e1: DenseMatrix::zeros(d, m),
            e2: DenseMatrix::zeros(k, m),
            j: DenseMatrix::zeros(m, m),
            y1: DenseMatrix::zeros(d, m),
            y2: DenseMatrix::zeros(k, m),
            y3: DenseMatrix::zeros(m, m),
            mu,
            iter: 0,
        }
    }

    /// Stacked error `[E1; E2]`.
    pub fn e(&self) -> DenseMatrix {
        stack(&self.e1, &self.e2)
    }
}

fn stack(top: &DenseMatrix, bottom: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

#[inline]
fn same_block(i: usize, j: usize, n: usize) -> bool {
    i / n == j / n
}

pub fn init_state(xa: &AugmentedMatrix, cfg: &SolverConfig) -> Result<AdmmState> {
    cfg.validate()?;
    let (d, m) = xa.xa.shape();
    if cfg.latent_dim > d {
        return Err(Error::Config(format!(
            "latent_dim {} exceeds the total feature dimension {d}",
            cfg.latent_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = DenseMatrix::from_fn(cfg.latent_dim, m, |_, _| StandardNormal.sample(&mut rng));
    Ok(AdmmState::zeros(d, h, cfg.mu0))
}

/// `P` with orthonormal columns minimizing `||(X_a + Y1/mu - E1) - P H_a||_F`.
pub fn update_p(state: &AdmmState, xa: &DenseMatrix) -> Result<DenseMatrix> {
    let target = xa + &state.y1 / state.mu - &state.e1;
    let k = &state.h * target.transpose();
    Ok(orthogonal_procrustes(&k)?.transpose())
}

/// Minimizer of the `H_a` subproblem: the Sylvester equation
/// `A H + H B = C` with `A = mu P^T P` and `B = mu (I - Z)(I - Z)^T`.
///
/// When `P^T P = I` (always true after [`update_p`]) the system reduces to
/// `H (mu I + B) = C`, solved by Cholesky.
pub fn update_h(state: &AdmmState, xa: &DenseMatrix) -> Result<DenseMatrix> {
    let (a, b, c) = h_system(state, xa);
    let k = a.nrows();
    let orthonormal = max_abs(&(&state.p.transpose() * &state.p - DenseMatrix::identity(k, k))) <= 1e-8;
    if orthonormal {
        let lhs = b + DenseMatrix::identity(c.ncols(), c.ncols()) * state.mu;
        Ok(spd_solve(&lhs, &c.transpose())?.transpose())
    } else {
        solve_sylvester(&a, &b, &c)
    }
}

/// The `(A, B, C)` of the `H_a` Sylvester equation at the current state.
pub fn h_system(state: &AdmmState, xa: &DenseMatrix) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
    let mu = state.mu;
    let m = state.z.nrows();
    let resid = DenseMatrix::identity(m, m) - &state.z;
    let a = state.p.transpose() * &state.p * mu;
    let b = &resid * resid.transpose() * mu;
    let pt = state.p.transpose();
    let c = &pt * (&state.y1 + (xa - &state.e1) * mu) + (&state.e2 * mu - &state.y2) * resid.transpose();
    (a, b, c)
}

/// `Z_a = (H^T H + I)^{-1} [J + H^T H - H^T E2 + (Y3 + H^T Y2) / mu]`.
///
/// The inverse is applied through the push-through identity
/// `(I + H^T H)^{-1} R = R - H^T (I_k + H H^T)^{-1} H R`, so only a `k x k`
/// system is factored.
pub fn update_z(state: &AdmmState) -> Result<DenseMatrix> {
    let h = &state.h;
    let k = h.nrows();
    let rhs = z_rhs(state);
    let small = DenseMatrix::identity(k, k) + h * h.transpose();
    let correction = spd_solve(&small, &(h * &rhs))?;
    Ok(rhs - h.transpose() * correction)
}

/// Right-hand side `J + H^T H - H^T E2 + (Y3 + H^T Y2) / mu` of the `Z_a` update.
pub fn z_rhs(state: &AdmmState) -> DenseMatrix {
    let mu = state.mu;
    let inner = &state.h - &state.e2 + &state.y2 / mu;
    &state.j + &state.y3 / mu + state.h.transpose() * inner
}

/// Column-wise `l2,1` shrinkage of `G = [X_a - P H + Y1/mu; H - H Z + Y2/mu]`
/// with threshold `1/mu`, split back into `(E1, E2)`.
pub fn update_e(state: &AdmmState, xa: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let g = e_target(state, xa);
    let e = col_l21_prox(&g, 1.0 / state.mu)?;
    let d = xa.nrows();
    Ok((e.rows(0, d).into_owned(), e.rows(d, e.nrows() - d).into_owned()))
}

/// The matrix `G` whose `l2,1` prox is the `E` update.
pub fn e_target(state: &AdmmState, xa: &DenseMatrix) -> DenseMatrix {
    let inv = 1.0 / state.mu;
    let g1 = xa - &state.p * &state.h + &state.y1 * inv;
    let g2 = &state.h - &state.h * &state.z + &state.y2 * inv;
    stack(&g1, &g2)
}

/// `M = Z_a - Y3/mu`; the `v` diagonal `n x n` blocks of `M` pass through,
/// the rest is soft-thresholded at `lambda / mu`.
pub fn update_j(state: &AdmmState, lambda: f64, v: usize, n: usize) -> Result<DenseMatrix> {
    let m = state.z.nrows();
    if n == 0 || v * n != m {
        return Err(Error::contract(format!("update_j: {m}x{m} Z_a cannot hold {v} blocks of size {n}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::contract(format!("update_j: lambda must be >= 0, got {lambda}")));
    }
    let eta = lambda / state.mu;
    let target = &state.z - &state.y3 / state.mu;
    Ok(DMatrix::from_fn(m, m, |i, j| {
        let x = target[(i, j)];
        if same_block(i, j, n) {
            x
        } else {
            shrink(x, eta)
        }
    }))
}

/// Dual ascent on the three constraints, then `mu <- min(rho mu, mu_max)`.
pub fn update_multipliers(state: &mut AdmmState, xa: &DenseMatrix, rho: f64, mu_max: f64) {
    let mu = state.mu;
    let ph = &state.p * &state.h;
    let hz = &state.h * &state.z;
    state.y1 += (xa - ph - &state.e1) * mu;
    state.y2 += (&state.h - hz - &state.e2) * mu;
    state.y3 += (&state.j - &state.z) * mu;
    state.mu = (rho * mu).min(mu_max);
}

/// Max-abs primal residuals of the three equality constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `||X_a - P H - E1||_inf`
    pub r1: f64,
    /// `||H - H Z - E2||_inf`
    pub r2: f64,
    /// `||J - Z||_inf`
    pub r3: f64,
}

impl Residuals {
    pub fn below(&self, tol: f64) -> bool {
        self.r1 < tol && self.r2 < tol && self.r3 < tol
    }
}

pub fn residuals(state: &AdmmState, xa: &DenseMatrix) -> Residuals {
    Residuals {
        r1: max_abs(&(xa - &state.p * &state.h - &state.e1)),
        r2: max_abs(&(&state.h - &state.h * &state.z - &state.e2)),
        r3: max_abs(&(&state.j - &state.z)),
    }
}

/// `||[E1; E2]||_{2,1} + lambda * ||Z_a - blkdiag(Z_a)||_1`.
pub fn objective(state: &AdmmState, lambda: f64, n: usize) -> f64 {
    l21_norm(&state.e()) + lambda * offdiag_l1(&state.z, n)
}

fn offdiag_l1(m: &DenseMatrix, n: usize) -> f64 {
    let mut total = 0.0;
    for (j, col) in m.column_iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            if !same_block(i, j, n) {
                total += x.abs();
            }
        }
    }
    total
}

/// Augmented-Lagrangian terms of the individual subproblems, each as a
/// function of its own variable with everything else held at `state`.
pub mod subproblem {
    use super::*;

    /// `mu/2 ||psi||_F^2 + <theta, psi>`.
    pub fn penalty(theta: &DenseMatrix, psi: &DenseMatrix, mu: f64) -> f64 {
        0.5 * mu * psi.norm_squared() + theta.dot(psi)
    }

    pub fn p_objective(state: &AdmmState, xa: &DenseMatrix, p: &DenseMatrix) -> f64 {
        penalty(&state.y1, &(xa - p * &state.h - &state.e1), state.mu)
    }

    pub fn h_objective(state: &AdmmState, xa: &DenseMatrix, h: &DenseMatrix) -> f64 {
        penalty(&state.y1, &(xa - &state.p * h - &state.e1), state.mu)
            + penalty(&state.y2, &(h - h * &state.z - &state.e2), state.mu)
    }

    pub fn z_objective(state: &AdmmState, z: &DenseMatrix) -> f64 {
        penalty(&state.y3, &(&state.j - z), state.mu)
            + penalty(&state.y2, &(&state.h - &state.h * z - &state.e2), state.mu)
    }

    pub fn e_objective(state: &AdmmState, xa: &DenseMatrix, e1: &DenseMatrix, e2: &DenseMatrix) -> f64 {
        l21_norm(&stack(e1, e2))
            + penalty(&state.y1, &(xa - &state.p * &state.h - e1), state.mu)
            + penalty(&state.y2, &(&state.h - &state.h * &state.z - e2), state.mu)
    }

    pub fn j_objective(state: &AdmmState, lambda: f64, n: usize, j: &DenseMatrix) -> f64 {
        lambda * offdiag_l1(j, n) + penalty(&state.y3, &(j - &state.z), state.mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub objective: f64,
    /// Penalty used during this iteration's updates.
    pub mu: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// One line per iteration: `iter,r1,r2,r3,objective,mu`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iter,r1,r2,r3,objective,mu")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{},{},{}", r.iter, r.r1, r.r2, r.r3, r.objective, r.mu)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverOutput {
    /// Final iterate, including multipliers.
    pub state: AdmmState,
    pub trace: ConvergenceTrace,
    /// All three residuals fell below `tol` before `max_iter`.
    pub converged: bool,
}

impl SolverOutput {
    pub fn z(&self) -> &DenseMatrix {
        &self.state.z
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.state.h
    }

    pub fn p(&self) -> &DenseMatrix {
        &self.state.p
    }

    pub fn e(&self) -> DenseMatrix {
        self.state.e()
    }
}

/// The data matrix the solver actually sees under `cfg.ablation`.
pub fn effective_input<'a>(xa: &'a AugmentedMatrix, cfg: &SolverConfig) -> Cow<'a, AugmentedMatrix> {
    match cfg.ablation {
        Ablation::ZeroOffdiagBlocks => Cow::Owned(xa.with_zero_offdiag()),
        _ => Cow::Borrowed(xa),
    }
}

pub fn run(xa: &AugmentedMatrix, cfg: &SolverConfig) -> Result<SolverOutput> {
    let input = effective_input(xa, cfg);
    let x = &input.xa;
    let (v, n) = (input.view_count(), input.sample_count());
    let lambda = cfg.effective_lambda();

    let mut state = init_state(&input, cfg)?;
    let mut trace = ConvergenceTrace::default();
    let mut converged = false;
    for t in 1..=cfg.max_iter {
        let at = |source: Error| Error::Iteration {
            iter: t,
            source: Box::new(source),
        };
        state.p = update_p(&state, x).map_err(at)?;
        state.h = update_h(&state, x).map_err(at)?;
        state.z = update_z(&state).map_err(at)?;
        let (e1, e2) = update_e(&state, x).map_err(at)?;
        state.e1 = e1;
        state.e2 = e2;
        state.j = update_j(&state, lambda, v, n).map_err(at)?;

        let mu = state.mu;
        update_multipliers(&mut state, x, cfg.rho, cfg.mu_max);
        state.iter = t;

        let res = residuals(&state, x);
        trace.records.push(IterationRecord {
            iter: t,
            r1: res.r1,
            r2: res.r2,
            r3: res.r3,
            objective: objective(&state, lambda, n),
            mu,
        });
        if !(res.r1.is_finite() && res.r2.is_finite() && res.r3.is_finite()) {
            return Err(at(Error::NonFinite("solver residuals")));
        }
        if res.below(cfg.tol) {
            converged = true;
            break;
        }
    }
    Ok(SolverOutput { state, trace, converged })
}

/// `sum_{i,j} Z_a(i, j)`: the entrywise sum of all `v^2` blocks of size `n x n`.
pub fn aggregate_z(z: &DenseMatrix, v: usize, n: usize) -> Result<DenseMatrix> {
    if v == 0 || n == 0 || z.nrows() != v * n || z.ncols() != v * n {
        return Err(Error::contract(format!(
            "aggregate_z: {}x{} matrix is not {v}x{v} blocks of size {n}",
            z.nrows(),
            z.ncols()
        )));
    }
    let mut out = DenseMatrix::zeros(n, n);
    for bi in 0..v {
        for bj in 0..v {
            out += z.view((bi * n, bj * n), (n, n));
        }
    }
    Ok(out)
}

/// First-order stationarity diagnostics at a solver iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `||X_a - P H - E1||_inf`
    pub primal_x: f64,
    /// `||H - H Z - E2||_inf`
    pub primal_h: f64,
    /// `||J - Z||_inf`
    pub primal_j: f64,
    /// Largest column distance from `[Y1; Y2]` to the `l2,1` subdifferential at `E`.
    pub l21_gap: f64,
    /// Largest entry distance from `-Y3` to `lambda` times the `l1`
    /// subdifferential of the off-diagonal blocks at `J`.
    pub l1_gap: f64,
}

impl KktReport {
    pub fn max_gap(&self) -> f64 {
        [self.primal_x, self.primal_h, self.primal_j, self.l21_gap, self.l1_gap]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn kkt_residuals(state: &AdmmState, xa: &DenseMatrix, lambda: f64, n: usize) -> KktReport {
    let res = residuals(state, xa);
    let e = state.e();
    let y12 = stack(&state.y1, &state.y2);
    let l21_gap = e
        .column_iter()
        .zip(y12.column_iter())
        .map(|(ec, yc)| {
            let norm = ec.norm();
            if norm > 0.0 {
                (yc - ec / norm).norm()
            } else {
                (yc.norm() - 1.0).max(0.0)
            }
        })
        .fold(0.0, f64::max);

    let mut l1_gap = 0.0_f64;
    for (c, col) in state.j.column_iter().enumerate() {
        for (r, &jv) in col.iter().enumerate() {
            let y = state.y3[(r, c)];
            let gap = if same_block(r, c, n) {
                y.abs()
            } else if jv != 0.0 {
                (y + lambda * jv.signum()).abs()
            } else {
                (y.abs() - lambda).max(0.0)
            };
            l1_gap = l1_gap.max(gap);
        }
    }
    KktReport {
        primal_x: res.r1,
        primal_h: res.r2,
        primal_j: res.r3,
        l21_gap,
        l1_gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_augmented, gen_synthetic, SyntheticSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_state(d: usize, k: usize, m: usize, seed: u64) -> AdmmState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = AdmmState::zeros(d, random(k, m, &mut rng), 0.7);
        s.p = random(d, k, &mut rng);
        s.z = random(m, m, &mut rng);
        s.e1 = random(d, m, &mut rng);
        s.e2 = random(k, m, &mut rng);
        s.j = random(m, m, &mut rng);
        s.y1 = random(d, m, &mut rng);
        s.y2 = random(k, m, &mut rng);
        s.y3 = random(m, m, &mut rng);
        s
    }

    fn small_problem(seed: u64) -> AugmentedMatrix {
        let ds = gen_synthetic(&SyntheticSpec {
            clusters: 2,
            per_cluster: 6,
            latent_dim: 4,
            view_dims: vec![6, 5],
            noise_sigma: 0.0,
            seed,
        })
        .unwrap();
        build_augmented(&ds, 4).unwrap()
    }

    #[test]
    fn config_defaults() {
        let cfg = SolverConfig::new(1.0, 10);
        assert_eq!(cfg.mu0, 1e-4);
        assert_eq!(cfg.mu_max, 1e6);
        assert_eq!(cfg.rho, 1.2);
        assert_eq!(cfg.tol, 1e-3);
        assert_eq!(cfg.max_iter, 100);
        assert!(cfg.validate().is_ok());
        assert!(SolverConfig { rho: 1.0, ..cfg.clone() }.validate().is_err());
        assert!(SolverConfig { mu0: 2e6, ..cfg.clone() }.validate().is_err());
        assert_eq!(cfg.with_ablation(Ablation::NoSparsity).effective_lambda(), 0.0);
    }

    #[test]
    fn ablation_parse_round_trip() {
        for a in [Ablation::Full, Ablation::NoSparsity, Ablation::ZeroOffdiagBlocks] {
            assert_eq!(a.to_string().parse::<Ablation>().unwrap(), a);
        }
        assert!("v3".parse::<Ablation>().is_err());
    }

    #[test]
    fn init_state_is_seeded_and_zeroed() {
        let xa = small_problem(1);
        let cfg = SolverConfig::new(0.1, 3).with_seed(5);
        let a = init_state(&xa, &cfg).unwrap();
        let b = init_state(&xa, &cfg).unwrap();
        assert_eq!(a.h, b.h);
        assert_ne!(a.h, init_state(&xa, &cfg.clone().with_seed(6)).unwrap().h);
        assert_eq!(a.mu, 1e-4);
        for m in [&a.p, &a.z, &a.e1, &a.e2, &a.j, &a.y1, &a.y2, &a.y3] {
            assert!(m.iter().all(|&x| x == 0.0));
        }
        assert_eq!(a.h.shape(), (3, 24));
        assert!(matches!(init_state(&xa, &SolverConfig::new(0.1, 12)), Err(Error::Config(_))));
    }

    #[test]
    fn update_p_identity_case() {
        // H (Y1/mu + X - E1)^T = [I_k | 0] when H = [I_k | 0] and X = I.
        let (d, k) = (5, 2);
        let h = DenseMatrix::from_fn(k, d, |i, j| if i == j { 1.0 } else { 0.0 });
        let state = AdmmState::zeros(d, h, 1.0);
        let p = update_p(&state, &DenseMatrix::identity(d, d)).unwrap();
        let want = DenseMatrix::from_fn(d, k, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!(max_abs(&(p - want)) < 1e-12);
    }

    #[test]
    fn update_h_trivial_case() {
        // Z, Y, E zero and orthonormal P: A = B = mu I, so H = P^T X / 2.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(6, 8, &mut rng);
        let mut state = AdmmState::zeros(6, random(3, 8, &mut rng), 0.3);
        state.p = update_p(&state, &x).unwrap();
        let h = update_h(&state, &x).unwrap();
        assert!(max_abs(&(h - state.p.transpose() * &x * 0.5)) < 1e-12);
    }

    #[test]
    fn update_h_general_path_matches_fast_path() {
        let mut state = random_state(6, 3, 8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(6, 8, &mut rng);
        state.p = update_p(&state, &x).unwrap();
        let fast = update_h(&state, &x).unwrap();
        let (a, b, c) = h_system(&state, &x);
        let general = solve_sylvester(&a, &b, &c).unwrap();
        assert!(max_abs(&(fast - general)) < 1e-8);
    }

    #[test]
    fn update_z_with_zero_h() {
        let mut state = random_state(4, 2, 6, 8);
        state.h.fill(0.0);
        let z = update_z(&state).unwrap();
        let want = &state.j + &state.y3 / state.mu;
        assert!(max_abs(&(z - want)) < 1e-12);
    }

    #[test]
    fn update_e_threshold_cases() {
        let mut state = AdmmState::zeros(3, DenseMatrix::zeros(2, 4), 2.0);
        let x = DenseMatrix::zeros(3, 4);
        let (e1, e2) = update_e(&state, &x).unwrap();
        assert!(e1.iter().chain(e2.iter()).all(|&v| v == 0.0));

        // One nonzero column with norm 0.5 = 1/mu: shrunk to zero.
        let mut x = DenseMatrix::zeros(3, 4);
        x[(0, 2)] = 0.3;
        x[(1, 2)] = 0.4;
        let (e1, _) = update_e(&state, &x).unwrap();
        assert!(e1.iter().all(|&v| v == 0.0));
        state.mu = 4.0;
        let (e1, _) = update_e(&state, &x).unwrap();
        assert!((e1[(1, 2)] - 0.4 * (0.5 - 0.25) / 0.5).abs() < 1e-15);
    }

    #[test]
    fn update_j_cases() {
        let state = random_state(3, 2, 6, 2);
        let m = &state.z - &state.y3 / state.mu;
        assert_eq!(update_j(&state, 0.0, 2, 3).unwrap(), m);

        let j = update_j(&state, 1e6, 2, 3).unwrap();
        for r in 0..6 {
            for c in 0..6 {
                let want = if r / 3 == c / 3 { m[(r, c)] } else { 0.0 };
                assert_eq!(j[(r, c)], want);
            }
        }
        assert!(update_j(&state, 0.1, 4, 3).is_err());
    }

    #[test]
    fn multipliers_zero_residual_and_clamp() {
        let mut state = AdmmState::zeros(3, DenseMatrix::zeros(2, 4), 1.0);
        let x = DenseMatrix::zeros(3, 4);
        state.y1[(0, 0)] = 0.25;
        let before = state.clone();
        update_multipliers(&mut state, &x, 1.2, 1e6);
        assert_eq!(state.y1, before.y1);
        assert_eq!(state.y3, before.y3);
        assert!((state.mu - 1.2).abs() < 1e-15);

        state.mu = 1e6;
        update_multipliers(&mut state, &x, 1.2, 1e6);
        assert_eq!(state.mu, 1e6);
    }

    #[test]
    fn residuals_infinity_norm() {
        let mut state = AdmmState::zeros(2, DenseMatrix::zeros(1, 3), 1.0);
        let mut x = DenseMatrix::zeros(2, 3);
        assert_eq!(residuals(&state, &x), Residuals { r1: 0.0, r2: 0.0, r3: 0.0 });
        x[(1, 2)] = -0.7;
        x[(0, 0)] = 0.2;
        assert_eq!(residuals(&state, &x).r1, 0.7);
        state.j[(2, 1)] = 0.4;
        assert_eq!(residuals(&state, &x).r3, 0.4);
    }

    #[test]
    fn aggregate_z_cases() {
        let z = DenseMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64);
        assert_eq!(aggregate_z(&z, 1, 4).unwrap(), z);
        assert_eq!(aggregate_z(&DenseMatrix::identity(6, 6), 3, 2).unwrap(), DenseMatrix::identity(2, 2) * 3.0);
        assert!(aggregate_z(&z, 3, 2).is_err());
    }

    #[test]
    fn kkt_subgradient_membership() {
        let mut state = AdmmState::zeros(2, DenseMatrix::zeros(1, 2), 1.0);
        // Column 0: E = g, Y12 = g / ||g||. Column 1: E = 0, ||Y12|| <= 1.
        state.e1[(0, 0)] = 3.0;
        state.e2[(0, 0)] = 4.0;
        state.y1[(0, 0)] = 0.6;
        state.y2[(0, 0)] = 0.8;
        state.y1[(1, 1)] = 0.5;
        state.y2[(0, 1)] = -0.5;
        let report = kkt_residuals(&state, &state.e1.clone(), 0.5, 1);
        assert!(report.l21_gap < 1e-15);
        state.y1[(1, 1)] = 2.0;
        let report = kkt_residuals(&state, &state.e1.clone(), 0.5, 1);
        assert!(report.l21_gap > 1.0);
    }

    #[test]
    fn run_is_deterministic_and_traced() {
        let xa = small_problem(2);
        let cfg = SolverConfig::new(0.1, 4).with_seed(11);
        let a = run(&xa, &cfg).unwrap();
        let b = run(&xa, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.len(), a.state.iter);
        let mus: Vec<f64> = a.trace.records.iter().map(|r| r.mu).collect();
        assert!(mus.windows(2).all(|w| w[0] <= w[1]));
        assert!(mus.iter().all(|&m| m <= cfg.mu_max));
        if a.converged {
            let last = a.trace.last().unwrap();
            assert!(last.r1 < cfg.tol && last.r2 < cfg.tol && last.r3 < cfg.tol);
        }
    }

    #[test]
    fn trace_csv_header_and_rows() {
        let xa = small_problem(3);
        let mut cfg = SolverConfig::new(0.1, 3);
        cfg.max_iter = 3;
        cfg.tol = 1e-300;
        let out = run(&xa, &cfg).unwrap();
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iter,r1,r2,r3,objective,mu");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,"));
        assert!(!out.converged);
    }

    proptest! {
        #[test]
        fn aggregation_is_linear(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(6, 6, &mut rng);
            let b = random(6, 6, &mut rng);
            let lhs = aggregate_z(&(&a + &b), 2, 3).unwrap();
            let rhs = aggregate_z(&a, 2, 3).unwrap() + aggregate_z(&b, 2, 3).unwrap();
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }

        #[test]
        fn update_p_gives_orthonormal_columns(seed in 0u64..200) {
            let state = random_state(7, 3, 9, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let x = random(7, 9, &mut rng);
            let p = update_p(&state, &x).unwrap();
            prop_assert!(max_abs(&(p.transpose() * &p - DenseMatrix::identity(3, 3))) <= 1e-8);
        }

        #[test]
        fn zero_lambda_j_is_pass_through(seed in 0u64..200) {
            let state = random_state(3, 2, 6, seed);
            let j = update_j(&state, 0.0, 3, 2).unwrap();
            prop_assert_eq!(j, &state.z - &state.y3 / state.mu);
        }
    }
}
