//! Collocation discretization of the transfer operators
//!
//! ```text
//! L_{t,n} f(x) = Σ_{k ≤ n} f(g_k(x)) |g_k'(x)|^t
//! ```
//!
//! on Chebyshev–Gauss–Lobatto nodes of `[0,1]`, and their leading
//! eigen-triple (eigenvalue, eigenfunction samples, dual quadrature weights).
//!
//! The infinite Gauss operator is split into a direct sum over
//! `k ≤ DIRECT_TERMS` and a tail `Σ_{k > K}` evaluated analytically: the
//! interpolant is expanded in a Taylor series at `0`, and each power of
//! `1/(x+k)` sums to a Hurwitz zeta value.

use crate::error::{Error, Result};
use crate::ifs::{branch, branch_slope, SystemKind};
use crate::special::hurwitz_zeta;

/// Number of branches summed directly before the analytic tail takes over.
pub const DIRECT_TERMS: u64 = 64;
/// Chebyshev modes that enter the Taylor expansion of the tail.
const TAIL_MODES: usize = 32;
/// Taylor order of the tail expansion.
const TAIL_ORDER: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Truncation {
    Finite(u64),
    Infinite,
}

impl Truncation {
    pub fn finite(&self) -> Option<u64> {
        match self {
            Truncation::Finite(n) => Some(*n),
            Truncation::Infinite => None,
        }
    }
}

impl std::fmt::Display for Truncation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Truncation::Finite(n) => write!(f, "{n}"),
            Truncation::Infinite => f.write_str("inf"),
        }
    }
}

/// Chebyshev–Gauss–Lobatto nodes on `[0,1]` with barycentric weights.
#[derive(Clone, Debug)]
pub struct CollocationGrid {
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl CollocationGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 8 {
            return Err(Error::domain(format!("grid size {m} is below the minimum of 8")));
        }
        let n = (m - 1) as f64;
        let nodes = (0..m)
            .map(|j| 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / n).cos()))
            .collect();
        let bary = (0..m)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == m - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Ok(CollocationGrid { nodes, bary })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Lagrange basis values `ℓ_j(y)` written into `out`.
    pub fn basis_at(&self, y: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        if let Some(j) = self.nodes.iter().position(|&x| x == y) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[j] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for ((o, &x), &w) in out.iter_mut().zip(&self.nodes).zip(&self.bary) {
            *o = w / (y - x);
            denom += *o;
        }
        out.iter_mut().for_each(|v| *v /= denom);
    }

    pub fn interpolate(&self, values: &[f64], y: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&x, &w), &v) in self.nodes.iter().zip(&self.bary).zip(values) {
            if x == y {
                return v;
            }
            let c = w / (y - x);
            num += c * v;
            den += c;
        }
        num / den
    }

    /// Row-major `M×M` map from nodal values to Chebyshev coefficients of the
    /// interpolant in the variable `s = 2x - 1`.
    fn chebyshev_transform(&self) -> Vec<f64> {
        let m = self.len();
        let n = (m - 1) as f64;
        let mut c = vec![0.0; m * m];
        for mode in 0..m {
            let sign = if mode % 2 == 0 { 1.0 } else { -1.0 };
            let mode_scale = if mode == 0 || mode == m - 1 { 0.5 } else { 1.0 };
            for j in 0..m {
                let node_scale = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
                let theta = std::f64::consts::PI * j as f64 / n;
                c[mode * m + j] =
                    2.0 / n * mode_scale * node_scale * sign * (mode as f64 * theta).cos();
            }
        }
        c
    }
}

/// Dense discretization of `L_{t,n}` acting on nodal values.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub kind: SystemKind,
    pub t: f64,
    pub truncation: Truncation,
    size: usize,
    entries: Vec<f64>,
}

impl OperatorMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.size)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for (row, &vi) in self.entries.chunks_exact(self.size).zip(v) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.chunks_exact(self.size).map(|r| r.iter().sum()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }
}

fn check_parameter(kind: SystemKind, t: f64, truncation: Truncation) -> Result<()> {
    if !t.is_finite() || t <= 0.0 || t > 4.0 {
        return Err(Error::domain(format!("t = {t} is outside the supported range (0, 4]")));
    }
    match truncation {
        Truncation::Finite(0) => Err(Error::domain("truncation n must be positive")),
        Truncation::Finite(_) => Ok(()),
        Truncation::Infinite => {
            if kind != SystemKind::Gauss {
                return Err(Error::domain("the infinite operator is only available for the Gauss system"));
            }
            if t <= 0.75 {
                return Err(Error::domain(format!("t = {t} must exceed 3/4 for the infinite operator")));
            }
            Ok(())
        }
    }
}

/// Accumulates `Σ_{k in range} ℓ_j(g_k(x_i)) |g_k'(x_i)|^t` into `entries`.
fn add_direct_terms(
    kind: SystemKind,
    t: f64,
    ks: impl Iterator<Item = u64> + Clone,
    grid: &CollocationGrid,
    entries: &mut [f64],
) {
    let m = grid.len();
    let mut basis = vec![0.0; m];
    for (i, &x) in grid.nodes().iter().enumerate() {
        let row = &mut entries[i * m..(i + 1) * m];
        for k in ks.clone() {
            let y = branch(kind, k, &x);
            let weight = branch_slope(kind, k, &x).powf(t);
            grid.basis_at(y, &mut basis);
            for (r, b) in row.iter_mut().zip(&basis) {
                *r += weight * b;
            }
        }
    }
}

/// Adds the Gauss tail `Σ_{k > start} f(1/(x+k)) (x+k)^{-2t}` as a matrix.
fn add_gauss_tail(t: f64, start: u64, grid: &CollocationGrid, entries: &mut [f64]) {
    let m = grid.len();
    let modes = m.min(TAIL_MODES);
    let cheb = grid.chebyshev_transform();
    // taylor[p][j]: coefficient of u^p in the interpolant, as a functional of f_j
    let mut taylor = vec![vec![0.0; m]; TAIL_ORDER + 1];
    for mode in 0..modes {
        let mm = (mode * mode) as f64;
        let mut coeff = if mode % 2 == 0 { 1.0 } else { -1.0 };
        for (p, row) in taylor.iter_mut().enumerate() {
            if p > 0 {
                // τ_{m,p} = τ_{m,p-1} · (-2)(m² - (p-1)²) / (p (2p-1))
                let q = (p - 1) as f64;
                coeff *= -2.0 * (mm - q * q) / (p as f64 * (2.0 * q + 1.0));
            }
            if coeff == 0.0 {
                break;
            }
            for (r, c) in row.iter_mut().zip(&cheb[mode * m..(mode + 1) * m]) {
                *r += coeff * c;
            }
        }
    }
    for (i, &x) in grid.nodes().iter().enumerate() {
        let a = x + start as f64 + 1.0;
        let row = &mut entries[i * m..(i + 1) * m];
        for (p, coeffs) in taylor.iter().enumerate() {
            let z = hurwitz_zeta(2.0 * t + p as f64, a);
            for (r, c) in row.iter_mut().zip(coeffs) {
                *r += z * c;
            }
        }
    }
}

pub fn assemble_operator(
    kind: SystemKind,
    t: f64,
    truncation: Truncation,
    grid: &CollocationGrid,
) -> Result<OperatorMatrix> {
    check_parameter(kind, t, truncation)?;
    let m = grid.len();
    let mut entries = vec![0.0; m * m];
    match truncation {
        Truncation::Finite(n) => add_direct_terms(kind, t, 1..=n, grid, &mut entries),
        Truncation::Infinite => {
            add_direct_terms(kind, t, 1..=DIRECT_TERMS, grid, &mut entries);
            add_gauss_tail(t, DIRECT_TERMS, grid, &mut entries);
        }
    }
    Ok(OperatorMatrix { kind, t, truncation, size: m, entries })
}

/// Applies `(L_{t,∞} - L_{t,n}) f = Σ_{k>n} f(g_k) |g_k'|^t` for the Gauss system.
pub fn gauss_tail_apply(t: f64, n: u64, grid: &CollocationGrid, f: &[f64]) -> Result<Vec<f64>> {
    check_parameter(SystemKind::Gauss, t, Truncation::Infinite)?;
    if n == 0 {
        return Err(Error::domain("truncation n must be positive"));
    }
    let m = grid.len();
    let mut entries = vec![0.0; m * m];
    let start = n.max(DIRECT_TERMS);
    if n < DIRECT_TERMS {
        add_direct_terms(SystemKind::Gauss, t, n + 1..=DIRECT_TERMS, grid, &mut entries);
    }
    add_gauss_tail(t, start, grid, &mut entries);
    let op = OperatorMatrix {
        kind: SystemKind::Gauss,
        t,
        truncation: Truncation::Infinite,
        size: m,
        entries,
    };
    Ok(op.apply(f))
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-12, max_iter: 20_000 }
    }
}

/// Leading eigen-triple of a discretized transfer operator.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub kind: SystemKind,
    pub t: f64,
    pub truncation: Truncation,
    pub nodes: Vec<f64>,
    pub lambda: f64,
    /// Eigenfunction samples, scaled so that `Σ dual_weights · rho = 1`.
    pub rho: Vec<f64>,
    /// Quadrature weights of the eigenmeasure, `Σ dual_weights = 1`.
    pub dual_weights: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl SpectralData {
    pub fn pairing(&self, f: &[f64]) -> f64 {
        self.dual_weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// `∫ φ dm` for a smooth integrand, by the dual quadrature rule.
    pub fn integrate(&self, phi: impl Fn(f64) -> f64) -> f64 {
        self.dual_weights.iter().zip(&self.nodes).map(|(w, &x)| w * phi(x)).sum()
    }
}

/// Power iteration with max-norm scaling from the all-ones vector.
fn power_iterate(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    size: usize,
    opts: EigenOptions,
    what: &'static str,
) -> Result<(f64, Vec<f64>, usize, f64)> {
    let mut v = vec![1.0; size];
    let mut residual = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let w = apply(&v);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let lambda = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / vv;
        let vmax = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0, f64::max)
            / (lambda.abs() * vmax);
        let scale = w.iter().fold(0.0f64, |acc, &x| if x.abs() > acc.abs() { x } else { acc });
        if scale == 0.0 || !scale.is_finite() {
            break;
        }
        v = w.iter().map(|x| x / scale).collect();
        if residual < opts.tol {
            return Ok((lambda, v, iter, residual));
        }
    }
    Err(Error::NonConvergence { what, iterations: opts.max_iter, residual })
}

pub fn leading_eigen(op: &OperatorMatrix, grid: &CollocationGrid) -> Result<SpectralData> {
    leading_eigen_with(op, grid, EigenOptions::default())
}

pub fn leading_eigen_with(
    op: &OperatorMatrix,
    grid: &CollocationGrid,
    opts: EigenOptions,
) -> Result<SpectralData> {
    if grid.len() != op.size() {
        return Err(Error::domain("grid and operator sizes differ"));
    }
    let (lambda, mut rho, it_right, res_right) =
        power_iterate(|v| op.apply(v), op.size(), opts, "power iteration")?;
    let (_, mut dual, it_left, res_left) =
        power_iterate(|v| op.apply_transpose(v), op.size(), opts, "dual power iteration")?;
    if lambda <= 0.0 {
        return Err(Error::domain(format!("leading eigenvalue {lambda} is not positive")));
    }
    let mass: f64 = dual.iter().sum();
    dual.iter_mut().for_each(|w| *w /= mass);
    let pairing: f64 = dual.iter().zip(&rho).map(|(a, b)| a * b).sum();
    rho.iter_mut().for_each(|r| *r /= pairing);
    if rho.iter().any(|&r| r <= 0.0) {
        return Err(Error::domain("leading eigenfunction is not positive on the grid"));
    }
    Ok(SpectralData {
        kind: op.kind,
        t: op.t,
        truncation: op.truncation,
        nodes: grid.nodes().to_vec(),
        lambda,
        rho,
        dual_weights: dual,
        iterations: it_right + it_left,
        residual: res_right.max(res_left),
    })
}

/// Convenience: assemble and solve.
pub fn spectral_data(
    kind: SystemKind,
    t: f64,
    truncation: Truncation,
    grid: &CollocationGrid,
) -> Result<SpectralData> {
    let op = assemble_operator(kind, t, truncation, grid)?;
    leading_eigen(&op, grid)
}

/// Sup-norm over the grid of `(L_{t,n} - L_{t,∞}) f`.
pub fn perturbation_probe(t: f64, n: u64, f: &[f64], grid: &CollocationGrid) -> Result<f64> {
    let tail = gauss_tail_apply(t, n, grid, f)?;
    Ok(tail.iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

/// `8|t| n^{1-2t} ‖f‖_BV`, the operator-distance bound the probe is checked against.
pub fn operator_distance_bound(t: f64, n: u64, bv_norm: f64) -> f64 {
    8.0 * t.abs() * (n as f64).powf(1.0 - 2.0 * t) * bv_norm
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenCloseness {
    pub dlambda: f64,
    pub drho_sup: f64,
}

/// Distance of `(λ_{t,n}, ρ_{t,n})` from the unperturbed `(1, ρ_{1,∞})`.
pub fn eigen_closeness_probe(
    t: f64,
    truncation: Truncation,
    grid: &CollocationGrid,
) -> Result<EigenCloseness> {
    let base = spectral_data(SystemKind::Gauss, 1.0, Truncation::Infinite, grid)?;
    let pert = spectral_data(SystemKind::Gauss, t, truncation, grid)?;
    let drho_sup = base
        .rho
        .iter()
        .zip(&pert.rho)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    Ok(EigenCloseness { dlambda: (pert.lambda - 1.0).abs(), drho_sup })
}
