//! Hausdorff dimension `h_n` of the truncated limit sets, the Lyapunov
//! constant of the linear system, and asymptotic tables of `n(1 - h_n)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::SystemKind;
use crate::special::hurwitz_zeta;
use crate::spectral::{assemble_operator, leading_eigen, CollocationGrid, Truncation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DimensionMethod {
    MoranBisection,
    PressureRoot,
    /// `n = 1`: the limit set is a single point.
    Degenerate,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub grid: Option<usize>,
    /// `|λ_{h,n} - 1|` recomputed on the doubled grid.
    pub grid_gap: Option<f64>,
    /// Lower end of the final bracket for the pressure root.
    pub bracket_lo: Option<f64>,
    /// `h ≤ 3/4`: the root lies where the infinite-branch operator diverges,
    /// and the row is left out of the asymptotic fit.
    pub below_convergence_region: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionResult {
    pub kind: SystemKind,
    pub n: u64,
    pub h: f64,
    pub residual: f64,
    pub method: DimensionMethod,
    pub diagnostics: SolverDiagnostics,
}

impl DimensionResult {
    fn degenerate(kind: SystemKind) -> Self {
        DimensionResult {
            kind,
            n: 1,
            h: 0.0,
            residual: 0.0,
            method: DimensionMethod::Degenerate,
            diagnostics: SolverDiagnostics::default(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.method == DimensionMethod::Degenerate
    }

    /// `n (1 - h_n)`.
    pub fn normalized_defect(&self) -> f64 {
        self.n as f64 * (1.0 - self.h)
    }
}

/// Branches summed term by term before switching to zeta differences.
const MORAN_DIRECT: u64 = 32;
/// Terms of the binomial expansion of `(1 + 1/k)^{-h}`.
const MORAN_SERIES: usize = 14;

/// `Σ_{k ≤ n} (k(k+1))^{-h}`, valid for `h > 1/2` when `n` is large.
pub fn moran_sum(n: u64, h: f64) -> f64 {
    let direct_to = n.min(MORAN_DIRECT);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in (1..=direct_to).rev() {
        let k = k as f64;
        let term = (-h * (k * (k + 1.0)).ln()).exp();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    if n <= MORAN_DIRECT {
        return sum;
    }
    // (k(k+1))^{-h} = Σ_p C(-h, p) k^{-2h-p}
    let lo = MORAN_DIRECT as f64 + 1.0;
    let hi = n as f64 + 1.0;
    let mut binom = 1.0;
    let mut tail = 0.0;
    for p in 0..MORAN_SERIES {
        if p > 0 {
            binom *= (-h - (p as f64 - 1.0)) / p as f64;
        }
        let s = 2.0 * h + p as f64;
        tail += binom * (hurwitz_zeta(s, lo) - hurwitz_zeta(s, hi));
    }
    sum + tail
}

/// Root of `Σ_{k ≤ n} (k(k+1))^{-h} = 1` by bisection.
pub fn moran_dimension(n: u64, tol: f64) -> Result<DimensionResult> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    if !(tol >= 1e-14) {
        return Err(Error::domain(format!("tolerance {tol} is below 1e-14")));
    }
    if n == 1 {
        return Ok(DimensionResult::degenerate(SystemKind::LinearGauss));
    }
    // h_2 ≈ 0.601 bounds every h_n from below
    let (mut lo, mut hi) = (0.55, 1.0);
    let mut iterations = 0;
    while hi - lo > 1e-16 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if moran_sum(n, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (r_lo, r_hi) = ((moran_sum(n, lo) - 1.0).abs(), (moran_sum(n, hi) - 1.0).abs());
    let (h, residual) = if r_lo <= r_hi { (lo, r_lo) } else { (hi, r_hi) };
    if residual >= tol {
        return Err(Error::NonConvergence { what: "Moran bisection", iterations, residual });
    }
    Ok(DimensionResult {
        kind: SystemKind::LinearGauss,
        n,
        h,
        residual,
        method: DimensionMethod::MoranBisection,
        diagnostics: SolverDiagnostics { iterations, ..Default::default() },
    })
}

fn pressure_defect(kind: SystemKind, n: u64, t: f64, grid: &CollocationGrid) -> Result<f64> {
    let op = assemble_operator(kind, t, Truncation::Finite(n), grid)?;
    Ok(leading_eigen(&op, grid)?.lambda - 1.0)
}

/// Root in `t` of `λ_{t,n} = 1` for the collocation operator of `kind`.
pub fn pressure_dimension(kind: SystemKind, n: u64, grid_m: usize, tol: f64) -> Result<DimensionResult> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    if grid_m < 16 {
        return Err(Error::domain(format!("grid size {grid_m} is below 16")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    if n == 1 {
        return Ok(DimensionResult::degenerate(kind));
    }
    const FLOOR: f64 = 0.5;
    let grid = CollocationGrid::new(grid_m)?;
    let mut evals = 0;
    let mut eval = |t: f64| {
        evals += 1;
        pressure_defect(kind, n, t, &grid)
    };

    let mut hi = 1.0;
    let mut f_hi = eval(hi)?;
    let mut lo = (1.0 - 4.0 / n as f64).max(FLOOR);
    let mut f_lo = eval(lo)?;
    while f_lo <= 0.0 {
        if lo <= FLOOR {
            return Err(Error::BracketFailure { n, lowest_t: lo });
        }
        // the old lower end becomes the new upper end
        hi = lo;
        f_hi = f_lo;
        lo = (1.0 - 2.0 * (1.0 - lo)).max(FLOOR);
        f_lo = eval(lo)?;
    }
    if f_hi >= 0.0 {
        return Err(Error::BracketFailure { n, lowest_t: lo });
    }
    let bracket_lo = lo;

    // Illinois variant of regula falsi
    let mut side = 0i8;
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    let mut iterations = 0;
    while best.1.abs() >= tol && hi - lo > 1e-15 {
        iterations += 1;
        if iterations > 200 {
            return Err(Error::NonConvergence {
                what: "pressure root",
                iterations,
                residual: best.1.abs(),
            });
        }
        let mut t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let f = eval(t)?;
        if f.abs() < best.1.abs() {
            best = (t, f);
        }
        if f > 0.0 {
            lo = t;
            f_lo = f;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = t;
            f_hi = f;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    let (h, residual) = (best.0, best.1.abs());
    if residual >= tol {
        return Err(Error::NonConvergence { what: "pressure root", iterations, residual });
    }
    let fine = CollocationGrid::new(2 * grid_m)?;
    let grid_gap = pressure_defect(kind, n, h, &fine)?.abs();
    if grid_gap > 10.0 * tol {
        return Err(Error::NonConvergence {
            what: "pressure root grid confirmation",
            iterations,
            residual: grid_gap,
        });
    }
    Ok(DimensionResult {
        kind,
        n,
        h,
        residual,
        method: DimensionMethod::PressureRoot,
        diagnostics: SolverDiagnostics {
            iterations: evals,
            grid: Some(grid_m),
            grid_gap: Some(grid_gap),
            bracket_lo: Some(bracket_lo),
            below_convergence_region: h <= 0.75,
        },
    })
}

pub fn gauss_dimension(n: u64, grid_m: usize, tol: f64) -> Result<DimensionResult> {
    pressure_dimension(SystemKind::Gauss, n, grid_m, tol)
}

/// Default solver for each kind: Moran bisection for the linear system, the
/// pressure root on an `M = 48` grid for the Gauss system.
pub fn dimension(kind: SystemKind, n: u64) -> Result<DimensionResult> {
    match kind {
        SystemKind::LinearGauss => moran_dimension(n, 1e-13),
        SystemKind::Gauss => gauss_dimension(n, 48, 1e-11),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovConstant {
    pub chi: f64,
    pub lower: f64,
    pub upper: f64,
    /// Upper bound on the omitted tail, so `partial_sum ≤ chi ≤ partial_sum + tail_bound`.
    pub tail_bound: f64,
    pub partial_sum: f64,
    pub terms_summed: u64,
}

fn lyapunov_term(k: f64) -> f64 {
    let q = k * (k + 1.0);
    q.ln() / q
}

/// `Σ_{k ≤ terms} ln(k(k+1)) / (k(k+1))`, compensated.
pub fn lyapunov_partial_sum(terms: u64) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in (1..=terms).rev() {
        let y = lyapunov_term(k as f64) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `∫_x^∞ ln(u(u+1)) / (u(u+1)) du` for `x ≥ 100`, from the expansion in `1/u`.
fn lyapunov_tail_integral(x: f64) -> f64 {
    // 1/(u(u+1)) = Σ_{m≥2} (-1)^m u^{-m},  ln(u+1) = ln u + Σ_{j≥1} (-1)^{j+1} u^{-j}/j
    const ORDER: usize = 24;
    let mut inv = [0.0; ORDER + 2];
    for m in 2..ORDER + 2 {
        inv[m] = if m % 2 == 0 { 1.0 } else { -1.0 };
    }
    let mut log_coeff = [0.0; ORDER + 2];
    for j in 1..ORDER + 2 {
        log_coeff[j] = if j % 2 == 1 { 1.0 } else { -1.0 } / j as f64;
    }
    // integrand = Σ_m inv[m] u^{-m} (2 ln u + Σ_j log_coeff[j] u^{-j})
    let ln_x = x.ln();
    let mut total = 0.0;
    for m in 2..ORDER + 2 {
        let e = (m - 1) as f64;
        let pow = x.powf(-e);
        // ∫_x^∞ u^{-m} ln u du = x^{1-m} (ln x/(m-1) + 1/(m-1)²)
        total += inv[m] * 2.0 * pow * (ln_x / e + 1.0 / (e * e));
        for j in 1..ORDER + 2 - m {
            let e2 = (m + j - 1) as f64;
            total += inv[m] * log_coeff[j] * x.powf(-e2) / e2;
        }
    }
    total
}

/// `χ = Σ_k ln(k(k+1)) / (k(k+1))` with a two-sided integral bracket on the tail.
pub fn lyapunov_chi(tol: f64) -> Result<LyapunovConstant> {
    if !(tol >= 1e-12) {
        return Err(Error::domain(format!("tolerance {tol} is below 1e-12")));
    }
    // bracket width is at most the first omitted term
    let mut terms: u64 = 1000;
    while lyapunov_term(terms as f64) >= tol {
        terms = terms * 5 / 4;
    }
    let partial_sum = lyapunov_partial_sum(terms);
    let upper_tail = lyapunov_tail_integral(terms as f64);
    let lower_tail = lyapunov_tail_integral(terms as f64 + 1.0);
    let lower = partial_sum + lower_tail;
    let upper = partial_sum + upper_tail;
    Ok(LyapunovConstant {
        chi: 0.5 * (lower + upper),
        lower,
        upper,
        tail_bound: upper_tail,
        partial_sum,
        terms_summed: terms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimRow {
    pub n: u64,
    pub h: f64,
    pub residual: f64,
    /// `n (1 - h_n)`.
    pub normalized: f64,
    /// Running fit of the limit over all rows up to this one.
    pub extrapolation: Option<f64>,
    pub degenerate: bool,
    /// Excluded from the fit (degenerate or below the convergence region).
    pub outside_fit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Extrapolation {
    /// Fitted limit `L` of `n (1 - h_n) ≈ L + c ln n / n`.
    pub limit: f64,
    pub slope: f64,
    /// Same fit with the largest `n` removed.
    pub limit_without_last: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimTable {
    pub kind: SystemKind,
    pub rows: Vec<DimRow>,
    pub extrapolation: Option<Extrapolation>,
}

/// Least-squares fit of `y = L + c ln n / n`; needs two distinct abscissae.
pub fn fit_log_correction(points: &[(u64, f64)]) -> Option<(f64, f64)> {
    let xs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, y)| ((n as f64).ln() / n as f64, y))
        .collect();
    if xs.len() < 2 {
        return None;
    }
    let k = xs.len() as f64;
    let mx = xs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

pub fn tabulate(kind: SystemKind, results: Vec<DimensionResult>) -> DimTable {
    let mut results = results;
    results.sort_by_key(|r| r.n);
    let points: Vec<(u64, f64)> = results
        .iter()
        .filter(|r| !r.is_degenerate() && !r.diagnostics.below_convergence_region)
        .map(|r| (r.n, r.normalized_defect()))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in &results {
        let upto: Vec<(u64, f64)> = points.iter().copied().filter(|p| p.0 <= r.n).collect();
        rows.push(DimRow {
            n: r.n,
            h: r.h,
            residual: r.residual,
            normalized: r.normalized_defect(),
            extrapolation: fit_log_correction(&upto).map(|f| f.0),
            degenerate: r.is_degenerate(),
            outside_fit: r.is_degenerate() || r.diagnostics.below_convergence_region,
        });
    }
    let extrapolation = fit_log_correction(&points).map(|(limit, slope)| Extrapolation {
        limit,
        slope,
        limit_without_last: fit_log_correction(&points[..points.len() - 1]).map(|f| f.0),
    });
    DimTable { kind, rows, extrapolation }
}

/// `h_n` for every `n` in the list with the default solver of `kind`.
pub fn dim_sweep(kind: SystemKind, n_list: &[u64]) -> Result<DimTable> {
    dim_sweep_with(kind, n_list, |n| dimension(kind, n))
}

pub fn dim_sweep_with(
    kind: SystemKind,
    n_list: &[u64],
    solve: impl Fn(u64) -> Result<DimensionResult> + Sync,
) -> Result<DimTable> {
    use rayon::prelude::*;
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("n list must be strictly ascending"));
    }
    let results = n_list.par_iter().map(|&n| solve(n)).collect::<Result<Vec<_>>>()?;
    Ok(tabulate(kind, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_moran(n: u64, h: f64) -> f64 {
        (1..=n).rev().map(|k| ((k * (k + 1)) as f64).powf(-h)).sum()
    }

    #[test]
    fn moran_sum_matches_direct_summation() {
        for &n in &[33u64, 100, 1000, 54_321] {
            for &h in &[0.6, 0.8, 0.97, 0.9999] {
                let fast = moran_sum(n, h);
                let slow = brute_moran(n, h);
                assert!((fast - slow).abs() < 2e-14, "n={n} h={h}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn moran_small_cases() {
        let d = moran_dimension(1, 1e-12).unwrap();
        assert_eq!(d.h, 0.0);
        assert!(d.is_degenerate());
        let d = moran_dimension(2, 1e-12).unwrap();
        assert!((d.h - 0.6010).abs() < 5e-4);
        // independent check of the root
        let s = 0.5f64.powf(d.h) + (1.0f64 / 6.0).powf(d.h);
        assert!((s - 1.0).abs() < 1e-12);
        assert!(moran_dimension(4096, 1e-12).unwrap().h > 0.999);
        assert!(moran_dimension(0, 1e-12).is_err());
    }

    #[test]
    fn gauss_small_cases() {
        let d = gauss_dimension(1, 32, 1e-11).unwrap();
        assert!(d.is_degenerate());
        let d = gauss_dimension(2, 32, 1e-11).unwrap();
        assert!((d.h - 0.5313).abs() < 1e-3, "{}", d.h);
        assert!(d.diagnostics.below_convergence_region);
        assert!(!gauss_dimension(4, 32, 1e-11).unwrap().diagnostics.below_convergence_region);
        let d256 = gauss_dimension(256, 48, 1e-11).unwrap();
        let lead = 0.61 / 256.0;
        assert!(1.0 - d256.h > lead * 0.8 && 1.0 - d256.h < lead * 1.2, "{}", d256.h);
    }

    #[test]
    fn pressure_root_agrees_with_moran_for_linear() {
        for &n in &[2u64, 5, 17] {
            let m = moran_dimension(n, 1e-13).unwrap();
            let p = pressure_dimension(SystemKind::LinearGauss, n, 16, 1e-13).unwrap();
            assert!((m.h - p.h).abs() < 1e-9, "n={n}: {} vs {}", m.h, p.h);
        }
    }

    #[test]
    fn lyapunov_values() {
        assert!((lyapunov_partial_sum(1) - 2f64.ln() / 2.0).abs() < 1e-15);
        assert!((lyapunov_partial_sum(10) - 1.42846).abs() < 5e-5);
        assert!((lyapunov_partial_sum(10) - 1.428_436_661_783_907_5).abs() < 1e-14);
        let chi = lyapunov_chi(1e-10).unwrap();
        assert!(chi.upper - chi.lower < 2e-10);
        assert!(chi.partial_sum <= chi.chi && chi.chi <= chi.partial_sum + chi.tail_bound);
        assert!((chi.chi - 2.05).abs() < 0.01, "{}", chi.chi);
    }

    #[test]
    fn tail_integral_against_quadrature() {
        // Simpson in log-coordinates on [x, x·e^{30}] plus the leading far tail
        let x = 500.0f64;
        let (a, b) = (x.ln(), x.ln() + 30.0);
        let steps = 200_000;
        let hstep = (b - a) / steps as f64;
        let g = |y: f64| {
            let u = y.exp();
            lyapunov_term(u) * u
        };
        let mut s = g(a) + g(b);
        for i in 1..steps {
            s += g(a + i as f64 * hstep) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let ub = b.exp();
        let far = 2.0 * (ub.ln() + 1.0) / ub;
        let oracle = s * hstep / 3.0 + far;
        let value = lyapunov_tail_integral(x);
        assert!((value - oracle).abs() < 1e-12 * oracle.max(1.0), "{value} vs {oracle}");
    }

    #[test]
    fn fit_recovers_exact_model() {
        let pts: Vec<(u64, f64)> = [8u64, 16, 32, 64]
            .iter()
            .map(|&n| (n, 0.6 - 0.7 * (n as f64).ln() / n as f64))
            .collect();
        let (l, c) = fit_log_correction(&pts).unwrap();
        assert!((l - 0.6).abs() < 1e-12 && (c + 0.7).abs() < 1e-12);
        assert!(fit_log_correction(&pts[..1]).is_none());
    }

    #[test]
    fn single_row_sweep_has_no_extrapolation() {
        let t = dim_sweep(SystemKind::LinearGauss, &[10]).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.extrapolation.is_none());
        assert!(dim_sweep(SystemKind::LinearGauss, &[10, 5]).is_err());
    }
}
