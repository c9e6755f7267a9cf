//! Invariant suites behind `hlab verify`.
//!
//! Each check counts its assertions and failures. A check that returns an
//! error counts as one failed assertion carrying the error text, which is how
//! an injected dimension offset surfaces as `StaleDimension` failures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Cell, ResultTable, RunConfig};
use crate::conformal::{distortion_probe, ConformalMeasure};
use crate::density::{
    candidate_families, density_ratio, entropy_partition, gauss_sharp_cap, rn_bound_check, s_alpha_max,
    sup_ratio_search, Family, FamilySpec,
};
use crate::dimension::{gauss_dimension, lyapunov_chi, moran_dimension, pressure_dimension, tabulate};
use crate::error::Result;
use crate::ifs::{
    apply_word, block_image, branch_derivative_abs, cf_encode, cylinder_interval, decompose_prefix,
    word_derivative_abs, IntervalX, SystemKind, Word,
};
use crate::scalar::{rational_from_f64, Rational, Scalar};
use crate::spectral::{
    assemble_operator, operator_distance_bound, perturbation_probe, spectral_data, CollocationGrid, SpectralData,
    Truncation,
};

const KINDS: [SystemKind; 2] = [SystemKind::LinearGauss, SystemKind::Gauss];

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub assertions: u64,
    pub failures: u64,
    /// First failure, or a short summary of the largest observed deviation.
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failures == 0)
    }

    pub fn assertions(&self) -> u64 {
        self.checks.iter().map(|c| c.assertions).sum()
    }

    pub fn failures(&self) -> u64 {
        self.checks.iter().map(|c| c.failures).sum()
    }

    /// Columns: `suite, check, assertions, failures, status, detail`.
    pub fn table(&self, config: &RunConfig) -> Result<ResultTable> {
        let mut t = ResultTable::new(
            "verify",
            config,
            &["suite", "check", "assertions", "failures", "status", "detail"],
        );
        t.meta("total.assertions", self.assertions());
        t.meta("total.failures", self.failures());
        for c in &self.checks {
            t.push(vec![
                Cell::from(c.suite),
                Cell::from(c.name),
                c.assertions.into(),
                c.failures.into(),
                Cell::from(if c.failures == 0 { "pass" } else { "fail" }),
                Cell::from(c.detail.clone()),
            ])?;
        }
        Ok(t)
    }
}

#[derive(Default)]
struct Tally {
    assertions: u64,
    failures: u64,
    first_failure: Option<String>,
    worst: f64,
}

impl Tally {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.assertions += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(msg());
            }
        }
    }

    /// `value ≤ tol`, tracking the largest value seen.
    fn below(&mut self, value: f64, tol: f64, what: impl FnOnce() -> String) {
        self.worst = self.worst.max(value);
        self.check(value <= tol, || format!("{}: {value:e} > {tol:e}", what()));
    }
}

struct Runner {
    checks: Vec<Check>,
}

impl Runner {
    fn run(&mut self, suite: &'static str, name: &'static str, f: impl FnOnce(&mut Tally) -> Result<()>) {
        let mut t = Tally::default();
        if let Err(e) = f(&mut t) {
            t.assertions += 1;
            t.failures += 1;
            t.first_failure.get_or_insert_with(|| e.to_string());
        }
        let detail = match t.first_failure {
            Some(m) => m,
            None if t.worst > 0.0 => format!("max deviation {:e}", t.worst),
            None => String::new(),
        };
        self.checks.push(Check { suite, name, assertions: t.assertions, failures: t.failures, detail });
    }
}

fn exact(x: f64) -> Rational {
    rational_from_f64(x).expect("finite")
}

fn random_word(rng: &mut ChaCha8Rng, n: u64, len: std::ops::RangeInclusive<usize>) -> Word {
    let len = rng.gen_range(len);
    Word::new((0..len).map(|_| rng.gen_range(1..=n)).collect()).expect("symbols ≥ 1")
}

fn words_of_length(n: u64, len: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    for _ in 0..len {
        out = out.iter().flat_map(|w| (1..=n).map(move |k| w.child(k).expect("k ≥ 1"))).collect();
    }
    out
}

fn dim_h(kind: SystemKind, n: u64, grid: usize) -> Result<f64> {
    Ok(match kind {
        SystemKind::LinearGauss => moran_dimension(n, 1e-13)?.h,
        SystemKind::Gauss => gauss_dimension(n, grid, 1e-11)?.h,
    })
}

pub fn cmd_verify(config: &RunConfig) -> Result<VerifyReport> {
    let mut r = Runner { checks: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let s = config.tol_scale;
    ifs_suite(&mut r, &mut rng, s);
    spectral_suite(&mut r, config, s);
    dimension_suite(&mut r, config, s);
    conformal_suite(&mut r, &mut rng, config, s);
    density_suite(&mut r, &mut rng, config, s);
    Ok(VerifyReport { checks: r.checks })
}

fn ifs_suite(r: &mut Runner, rng: &mut ChaCha8Rng, s: f64) {
    r.run("ifs", "tiling", |t| {
        // children of each cylinder abut and fill g_parent([b_{n+1}, 1])
        for kind in KINDS {
            for n in 1..=8u64 {
                let bottom = Rational::from_ratio(1, n as i64 + 1);
                for depth in 1..=4usize {
                    let mut all = Vec::new();
                    for parent in words_of_length(n, depth - 1) {
                        let mut kids: Vec<IntervalX<Rational>> = (1..=n)
                            .map(|k| cylinder_interval(kind, &parent.child(k).expect("k ≥ 1")))
                            .collect();
                        kids.sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("ordered"));
                        for pair in kids.windows(2) {
                            t.check(pair[0].hi == pair[1].lo, || {
                                format!("{kind} n={n} parent {parent:?}: children do not abut")
                            });
                        }
                        let ends = [apply_word(kind, &parent, &bottom)?, apply_word(kind, &parent, &Rational::from_u64(1))?];
                        let (lo, hi) = if ends[0] < ends[1] { (&ends[0], &ends[1]) } else { (&ends[1], &ends[0]) };
                        t.check(&kids[0].lo == lo && &kids[kids.len() - 1].hi == hi, || {
                            format!("{kind} n={n} parent {parent:?}: children miss the image of [b_(n+1), 1]")
                        });
                        all.extend(kids);
                    }
                    all.sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("ordered"));
                    for pair in all.windows(2) {
                        t.check(pair[0].hi <= pair[1].lo, || format!("{kind} n={n} depth {depth}: overlap"));
                    }
                    if depth == 1 {
                        t.check(all[0].lo == bottom && all[all.len() - 1].hi == Rational::from_u64(1), || {
                            format!("{kind} n={n}: first level does not cover [b_(n+1), 1]")
                        });
                    }
                }
            }
        }
        Ok(())
    });

    r.run("ifs", "nesting", |t| {
        for i in 0..600 {
            let kind = KINDS[i % 2];
            let n = rng.gen_range(2..=1000);
            let head = random_word(rng, n, 1..=6);
            let tail = random_word(rng, n, 1..=3);
            let outer = cylinder_interval::<Rational>(kind, &head);
            let inner = cylinder_interval::<Rational>(kind, &head.concat(&tail));
            t.check(outer.contains_interval(&inner), || format!("{kind} {head:?}+{tail:?} escapes"));
        }
        Ok(())
    });

    r.run("ifs", "chain_rule", |t| {
        for i in 0..600 {
            let kind = KINDS[i % 2];
            let n = rng.gen_range(2..=200);
            let w = random_word(rng, n, 1..=8);
            let x: f64 = rng.gen();
            let whole = word_derivative_abs(kind, &w, &x)?;
            let mut y = x;
            let mut product = 1.0;
            for &k in w.symbols().iter().rev() {
                product *= branch_derivative_abs(kind, k, &y)?;
                y = apply_word(kind, &Word::new(vec![k])?, &y)?;
            }
            t.below(((whole - product) / product).abs(), 1e-13 * s, || format!("{kind} {w:?} at {x}"));
            if kind == SystemKind::LinearGauss {
                let xq = exact(x);
                let exact_slope = word_derivative_abs(kind, &w, &xq)?;
                let slopes = w
                    .symbols()
                    .iter()
                    .fold(Rational::from_u64(1), |acc, &k| acc * Rational::from_ratio(1, (k * (k + 1)) as i64));
                t.check(exact_slope == slopes, || format!("{w:?}: slope is not the product of a_k"));
            }
        }
        Ok(())
    });

    r.run("ifs", "prefix_halving", |t| {
        let eps = 1e-15 * s;
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(1e-9..1.0);
            let d = decompose_prefix(SystemKind::LinearGauss, &exact(x), 24)?;
            let w = d.weights();
            // 1-based: w[m - 1] is w_m
            for m in 2..=w.len() {
                if m % 2 == 0 {
                    t.check(w[m - 1] <= w[m - 2] + eps, || format!("r={x}: w_{m} > w_{}", m - 1));
                }
            }
            for m in (1..=w.len()).step_by(2) {
                if m + 2 <= w.len() {
                    t.check(w[m + 1] <= w[m - 1] / 4.0 + eps, || format!("r={x}: w_{} > w_{m}/4", m + 2));
                }
            }
        }
        Ok(())
    });

    r.run("ifs", "coding_round_trip", |t| {
        for i in 0..600 {
            let kind = KINDS[i % 2];
            let x = exact(rng.gen_range(1e-6..1.0));
            let depth = rng.gen_range(1..=12);
            let coding = cf_encode(kind, &x, depth)?;
            if coding.word.is_empty() {
                continue;
            }
            let iv = cylinder_interval::<Rational>(kind, &coding.word);
            t.check(iv.contains(&x), || format!("{kind} x={} escapes {:?}", x.as_f64(), coding.word));
        }
        Ok(())
    });
}

fn spectral_suite(r: &mut Runner, config: &RunConfig, s: f64) {
    let mut solved: Vec<SpectralData> = Vec::new();

    r.run("spectral", "telescoping_identity", |t| {
        for m in [32, 48, config.grid.max(32)] {
            let grid = CollocationGrid::new(m)?;
            let op = assemble_operator(SystemKind::Gauss, 1.0, Truncation::Infinite, &grid)?;
            let f = grid.sample(|x| 1.0 / (1.0 + x));
            for (a, b) in op.apply(&f).iter().zip(&f) {
                t.below((a - b).abs(), 1e-13 * s, || format!("grid {m}"));
            }
        }
        Ok(())
    });

    r.run("spectral", "grid_convergence", |t| {
        let coarse = CollocationGrid::new(32)?;
        let fine = CollocationGrid::new(64)?;
        let mut cases: Vec<(f64, Truncation)> = Vec::new();
        for tv in [0.8, 1.0, 1.2] {
            for n in [2, 16, 256] {
                cases.push((tv, Truncation::Finite(n)));
            }
            cases.push((tv, Truncation::Infinite));
        }
        for (tv, n) in cases {
            let a = spectral_data(SystemKind::Gauss, tv, n, &coarse)?;
            let b = spectral_data(SystemKind::Gauss, tv, n, &fine)?;
            t.below((a.lambda - b.lambda).abs(), 1e-8 * s, || format!("t={tv} n={n}"));
            solved.push(b);
        }
        Ok(())
    });

    let grid = CollocationGrid::new(32).expect("grid size is valid");
    r.run("spectral", "monotone_in_t", |t| {
        for n in [Truncation::Finite(4), Truncation::Finite(64), Truncation::Infinite] {
            let mut prev = f64::INFINITY;
            for i in 0..10 {
                let tv = 0.8 + 0.4 * i as f64 / 9.0;
                let d = spectral_data(SystemKind::Gauss, tv, n, &grid)?;
                t.check(d.lambda < prev, || format!("n={n}: λ not decreasing at t={tv}"));
                prev = d.lambda;
                solved.push(d);
            }
        }
        Ok(())
    });

    r.run("spectral", "monotone_in_n", |t| {
        for tv in [0.9, 1.0, 1.1] {
            let mut prev = 0.0;
            for n in (1..=8).map(|e| Truncation::Finite(1 << e)).chain([Truncation::Infinite]) {
                let d = spectral_data(SystemKind::Gauss, tv, n, &grid)?;
                t.check(d.lambda > prev, || format!("t={tv}: λ not increasing at n={n}"));
                prev = d.lambda;
                solved.push(d);
            }
        }
        Ok(())
    });

    r.run("spectral", "positivity", |t| {
        for d in &solved {
            t.check(d.rho.iter().all(|&v| v > 0.0), || format!("t={} n={}: rho not positive", d.t, d.truncation));
            // the dual functional is positive on positive integrands
            for phi in [|x: f64| 1.0 + x * x, |x: f64| (-x).exp(), |x: f64| 1.0 / (2.0 + x).powi(2)] {
                t.check(d.integrate(phi) > 0.0, || format!("t={} n={}: functional not positive", d.t, d.truncation));
            }
        }
        let gk = spectral_data(SystemKind::Gauss, 1.0, Truncation::Infinite, &grid)?;
        t.check(gk.dual_weights.iter().all(|&w| w >= 0.0), || "Gauss measure weights negative".into());
        Ok(())
    });

    r.run("spectral", "operator_perturbation", |t| {
        let probes: [(fn(f64) -> f64, f64); 3] = [(|_| 1.0, 1.0), (|x| x, 2.0), (|x| 1.0 / (1.0 + x), 1.5)];
        for tv in [0.9, 1.0, 1.1] {
            for n in [10, 100, 1000, 10_000] {
                for (f, bv) in probes {
                    let p = perturbation_probe(tv, n, &grid.sample(f), &grid)?;
                    let bound = operator_distance_bound(tv, n, bv);
                    t.check(p <= bound, || format!("t={tv} n={n}: probe {p:e} > bound {bound:e}"));
                }
            }
        }
        let dev: Vec<f64> = [64, 128, 256, 512]
            .iter()
            .map(|&n| spectral_data(SystemKind::Gauss, 1.0, Truncation::Finite(n), &grid).map(|d| (d.lambda - 1.0).abs()))
            .collect::<Result<_>>()?;
        for w in dev.windows(2) {
            let ratio = w[1] / w[0];
            t.check((ratio - 0.5).abs() <= 0.1, || format!("|λ-1| ratio {ratio} under doubling"));
        }
        Ok(())
    });
}

fn dimension_suite(r: &mut Runner, config: &RunConfig, s: f64) {
    r.run("dimension", "moran_residual_and_monotone", |t| {
        let mut prev = 0.0;
        for n in 2..=3000 {
            let d = moran_dimension(n, 1e-13)?;
            t.below(d.residual, 1e-12 * s, || format!("n={n}"));
            t.check(prev < d.h && d.h < 1.0, || format!("h_{n} = {} not in ({prev}, 1)", d.h));
            prev = d.h;
        }
        Ok(())
    });

    r.run("dimension", "gauss_monotone", |t| {
        let mut prev = 0.0;
        for n in 2..=24 {
            let d = gauss_dimension(n, config.grid, 1e-11)?;
            t.check(prev < d.h && d.h < 1.0, || format!("h_{n} = {} not in ({prev}, 1)", d.h));
            prev = d.h;
        }
        Ok(())
    });

    r.run("dimension", "solver_agreement", |t| {
        for n in [2, 3, 5, 8, 13, 21, 34] {
            let a = pressure_dimension(SystemKind::LinearGauss, n, 32, 1e-13)?;
            let b = moran_dimension(n, 1e-13)?;
            t.below((a.h - b.h).abs(), 1e-9 * s, || format!("n={n}"));
        }
        Ok(())
    });

    r.run("dimension", "extrapolation_stability", |t| {
        let linear: Vec<_> = (6..=14).map(|e| moran_dimension(1 << e, 1e-13)).collect::<Result<_>>()?;
        let gauss: Vec<_> = (2..=7).map(|e| gauss_dimension(1 << e, config.grid, 1e-11)).collect::<Result<_>>()?;
        for (kind, rows) in [(SystemKind::LinearGauss, linear), (SystemKind::Gauss, gauss)] {
            let table = tabulate(kind, rows);
            let e = table.extrapolation.ok_or_else(|| crate::Error::domain("no extrapolation"))?;
            let without = e.limit_without_last.unwrap_or(f64::NAN);
            // a trend band, not a rounding tolerance, so it ignores tol_scale
            t.below(((e.limit - without) / e.limit).abs(), 0.02, || format!("{kind}"));
        }
        Ok(())
    });

    r.run("dimension", "lyapunov_bracket", |t| {
        let chi = lyapunov_chi(1e-10)?;
        t.check(chi.lower <= chi.chi && chi.chi <= chi.upper, || "χ outside its bracket".into());
        t.below(chi.upper - chi.lower, 1e-6 * s, || "bracket width".into());
        Ok(())
    });
}

fn build(kind: SystemKind, n: u64, config: &RunConfig) -> Result<ConformalMeasure> {
    let h = dim_h(kind, n, config.grid)? + config.inject_h_offset;
    match kind {
        SystemKind::LinearGauss => ConformalMeasure::linear(n, h),
        SystemKind::Gauss => ConformalMeasure::gauss(n, h, config.grid),
    }
}

fn conformal_suite(r: &mut Runner, rng: &mut ChaCha8Rng, config: &RunConfig, s: f64) {
    let cases = [(SystemKind::LinearGauss, 2), (SystemKind::LinearGauss, 16), (SystemKind::Gauss, 2), (SystemKind::Gauss, 16)];

    r.run("conformal", "first_level_conformality", |t| {
        for (kind, n) in cases {
            let m = build(kind, n, config)?;
            t.below((m.total_mass() - 1.0).abs(), 1e-8 * s, || format!("{kind} n={n}: total mass"));
            if let Some(sd) = m.spectral() {
                for j in 1..=n {
                    let direct = sd.integrate(|x| (x + j as f64).powf(-2.0 * m.h));
                    let mass = m.cylinder_mass(&Word::new(vec![j])?)?;
                    t.below((mass - direct).abs(), 1e-8 * s, || format!("{kind} n={n} j={j}"));
                }
            }
        }
        Ok(())
    });

    r.run("conformal", "additivity", |t| {
        for (kind, n) in cases {
            let m = build(kind, n, config)?;
            for _ in 0..40 {
                let parent = random_word(rng, n, 0..=4);
                let whole = m.cylinder_mass(&parent)?;
                let sum: f64 = m.children_masses(&parent).iter().sum();
                let tol = if kind == SystemKind::Gauss { 1e-8 } else { 1e-14 * whole };
                t.below((sum - whole).abs(), tol * s, || format!("{kind} n={n} {parent:?}"));
            }
        }
        Ok(())
    });

    r.run("conformal", "bracket_sanity", |t| {
        for (kind, n) in cases {
            let m = build(kind, n, config)?;
            for _ in 0..20 {
                let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                let f = IntervalX::raw(exact(a.min(b)), exact(a.max(b)))?;
                if f.is_degenerate() {
                    continue;
                }
                for d in [2, 4, 6] {
                    let coarse = m.interval_mass(&f, d)?;
                    let fine = m.interval_mass(&f, d + 2)?;
                    t.check(coarse.lower <= coarse.upper && fine.lower <= fine.upper, || {
                        format!("{kind} n={n}: inverted bracket")
                    });
                    t.check(fine.width() <= coarse.width() + 1e-15, || format!("{kind} n={n} depth {d}: width grew"));
                }
            }
        }
        Ok(())
    });

    r.run("conformal", "depth_ten_refinement", |t| {
        let m = build(SystemKind::Gauss, 2, config)?;
        let head = Word::new(vec![1])?;
        let deep: f64 =
            words_of_length(2, 9).iter().map(|w| m.cylinder_mass(&head.concat(w))).sum::<Result<f64>>()?;
        let quad = m.spectral().expect("gauss backend").integrate(|x| (x + 1.0).powf(-2.0 * m.h));
        t.below((deep - quad).abs(), 1e-6 * s, || "m_2(g_1[0,1])".into());
        Ok(())
    });
}

fn density_suite(r: &mut Runner, rng: &mut ChaCha8Rng, config: &RunConfig, s: f64) {
    r.run("density", "measure_at_most_one", |t| {
        let gauss_n = [2u64, 3, 4, 5, 6, 7, 8, 12, 16, 24, 32, 48, 64];
        for kind in KINDS {
            let ns: Vec<u64> = match kind {
                SystemKind::LinearGauss => (2..=64).collect(),
                SystemKind::Gauss => gauss_n.to_vec(),
            };
            for n in ns {
                let m = build(kind, n, config)?;
                let est = sup_ratio_search(&m, &FamilySpec::default_for(kind, n))?;
                t.below(est.h_upper - 1.0, 1e-9 * s, || format!("{kind} n={n}: H_upper"));
                if kind == SystemKind::Gauss {
                    let cap = gauss_sharp_cap(n, m.h);
                    t.below(est.h_upper - cap, 1e-9 * s, || format!("n={n}: H_upper above the sharp cap"));
                }
            }
        }
        Ok(())
    });

    r.run("density", "duality", |t| {
        for (kind, n) in [(SystemKind::LinearGauss, 3), (SystemKind::Gauss, 3), (SystemKind::Gauss, 5)] {
            let m = build(kind, n, config)?;
            let spec = FamilySpec::default_for(kind, n);
            let est = sup_ratio_search(&m, &spec)?;
            for c in candidate_families(kind, n, &spec)? {
                let iv = c.interval(kind, n)?;
                if iv.is_degenerate() {
                    continue;
                }
                let ratio = density_ratio(&m, &iv, 12)?;
                t.below(ratio.lower - est.sup_ratio, 1e-9 * s * est.sup_ratio, || format!("{kind} n={n} {c:?}"));
            }
        }
        Ok(())
    });

    r.run("density", "linear_pushforward_invariance", |t| {
        let n = 5;
        let m = build(SystemKind::LinearGauss, n, config)?;
        for _ in 0..60 {
            let k = rng.gen_range(1..=n);
            let l = rng.gen_range(k..=n);
            let w = random_word(rng, n, 1..=3);
            let base = density_ratio(&m, &block_image::<Rational>(m.kind, &Word::empty(), k, l)?, 8)?;
            let moved = density_ratio(&m, &block_image::<Rational>(m.kind, &w, k, l)?, 8)?;
            t.below((moved.upper / base.lower - 1.0).abs(), 1e-12 * s, || format!("{w:?} ({k},{l})"));
            t.below((moved.lower / base.upper - 1.0).abs(), 1e-12 * s, || format!("{w:?} ({k},{l})"));
        }
        Ok(())
    });

    r.run("density", "gauss_pushforward_near_invariance", |t| {
        let n = 5;
        let m = build(SystemKind::Gauss, n, config)?;
        for _ in 0..60 {
            let k = rng.gen_range(1..=n);
            let l = rng.gen_range(k..=n);
            let w = random_word(rng, n, 1..=4);
            let f = block_image::<f64>(m.kind, &Word::empty(), k, l)?;
            let pts: Vec<f64> = (0..=16).map(|i| f.lo + (f.hi - f.lo) * i as f64 / 16.0).collect();
            let pairs: Vec<(f64, f64)> =
                pts.iter().enumerate().flat_map(|(i, &a)| pts[i + 1..].iter().map(move |&b| (a, b))).collect();
            let c = distortion_probe(m.kind, &w, &pairs).constant;
            let allowed = c * f.diameter() * (1.0 + 1e-6) + 1e-9 * s;
            let base = density_ratio(&m, &block_image::<Rational>(m.kind, &Word::empty(), k, l)?, 8)?;
            let moved = density_ratio(&m, &block_image::<Rational>(m.kind, &w, k, l)?, 8)?;
            t.below(moved.upper / base.lower - 1.0, allowed, || format!("{w:?} ({k},{l}) above"));
            t.below(1.0 - moved.lower / base.upper, allowed, || format!("{w:?} ({k},{l}) below"));
        }
        Ok(())
    });

    r.run("density", "entropy_bound", |t| {
        for (k, l) in [(1, 2), (1, 10), (3, 50), (10, 99), (500, 999), (900, 9999)] {
            let p = entropy_partition(k, l)?;
            for h in [0.5, 0.8, 0.9, 0.99, 0.999] {
                let lhs = (p.weights.iter().map(|w| w.powf(h)).sum::<f64>() - 1.0) / (1.0 - h);
                t.below(p.entropy - lhs, 1e-12 * s, || format!("(k,l)=({k},{l}) h={h}"));
            }
        }
        Ok(())
    });

    r.run("density", "monotone_search", |t| {
        for kind in KINDS {
            for n in [3, 6] {
                let m = build(kind, n, config)?;
                let mut prev = 0.0;
                let chain = [
                    vec![],
                    vec![Family::Blocks],
                    vec![Family::Blocks, Family::Windows],
                    vec![Family::Blocks, Family::Windows, Family::Images],
                    Family::ALL.to_vec(),
                ];
                for fams in chain {
                    let est = sup_ratio_search(&m, &FamilySpec { families: fams.clone(), ..FamilySpec::default_for(kind, n) })?;
                    t.check(est.sup_ratio >= prev, || format!("{kind} n={n}: sup fell when adding {fams:?}"));
                    prev = est.sup_ratio;
                }
            }
        }
        Ok(())
    });

    r.run("density", "s_alpha_bound", |t| {
        for alpha in [0.3, 0.5, 0.7] {
            for h in [0.3, 0.5, 0.7] {
                let rec = s_alpha_max(alpha, h, 10_000, rng)?;
                t.below(rec.empirical_max - rec.closed_form, 1e-9 * s, || format!("α={alpha} h={h}"));
                t.below((rec.geometric - rec.closed_form).abs(), 1e-12 * s, || format!("α={alpha} h={h} geometric"));
            }
        }
        Ok(())
    });

    r.run("density", "prefix_power_sum", |t| {
        let h = moran_dimension(64, 1e-13)?.h;
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(1e-9..1.0);
            let rec = rn_bound_check(x, h)?;
            t.below(rec.r_sum - rec.bound, 1e-12 * s, || format!("r={x}"));
        }
        Ok(())
    });
}
