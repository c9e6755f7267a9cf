//! The `h_n`-conformal measure `m_n` on the limit set `J_n`.
//!
//! Linear system: cylinder masses are products of slopes raised to `h_n`.
//! Gauss system: `m_n(g_ω[0,1]) = ∫ |g_ω'|^{h_n} dm_n`, integrated with the
//! dual quadrature weights of the collocation operator. Interval masses go
//! through cylinder refinement so that quadrature only sees smooth integrands.

use serde::Serialize;

use crate::dimension::{moran_sum, DimensionResult};
use crate::error::{Error, Result};
use crate::ifs::{
    block_length, branch, branch_slope, cylinder, word_image, word_slope, IntervalX, SystemKind,
    Word,
};
use crate::scalar::Scalar;
use crate::spectral::{spectral_data, CollocationGrid, SpectralData, Truncation};

/// `|λ_{h,n} - 1|` (or the Moran defect) allowed at construction.
pub const CONFORMAL_DEFECT_TOL: f64 = 1e-9;
/// Largest `|h - h_n|` tolerated when checking against a dimension result.
pub const STALE_TOL: f64 = 1e-10;
pub const DEFAULT_DEPTH_CAP: usize = 64;

#[derive(Clone, Debug)]
pub enum MeasureBackend {
    ExactProduct,
    DualQuadrature(Box<SpectralData>),
}

#[derive(Clone, Debug)]
pub struct ConformalMeasure {
    pub kind: SystemKind,
    pub n: u64,
    pub h: f64,
    pub backend: MeasureBackend,
    pub depth_cap: usize,
    /// `m_n(g_j[0,1])` for `j = 1..=n`, index `j - 1`.
    first_level: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassBracket {
    pub lower: f64,
    pub upper: f64,
}

impl MassBracket {
    pub fn exact(v: f64) -> Self {
        MassBracket { lower: v, upper: v }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

impl ConformalMeasure {
    /// Linear system at exponent `h`; fails if `Σ a_k^h` is not 1.
    pub fn linear(n: u64, h: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("the conformal measure needs n ≥ 2"));
        }
        let defect = (moran_sum(n, h) - 1.0).abs();
        if !(defect < CONFORMAL_DEFECT_TOL) {
            return Err(Error::StaleDimension { h, defect, tol: CONFORMAL_DEFECT_TOL });
        }
        let first_level = (1..=n).map(|k| block_length::<f64>(k).powf(h)).collect();
        Ok(ConformalMeasure {
            kind: SystemKind::LinearGauss,
            n,
            h,
            backend: MeasureBackend::ExactProduct,
            depth_cap: DEFAULT_DEPTH_CAP,
            first_level,
        })
    }

    /// Gauss system at exponent `h` on a collocation grid of size `grid_m`;
    /// fails if the leading eigenvalue at `h` is not 1.
    pub fn gauss(n: u64, h: f64, grid_m: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("the conformal measure needs n ≥ 2"));
        }
        let grid = CollocationGrid::new(grid_m)?;
        let data = spectral_data(SystemKind::Gauss, h, Truncation::Finite(n), &grid)?;
        let defect = (data.lambda - 1.0).abs();
        if !(defect < CONFORMAL_DEFECT_TOL) {
            return Err(Error::StaleDimension { h, defect, tol: CONFORMAL_DEFECT_TOL });
        }
        let mut m = ConformalMeasure {
            kind: SystemKind::Gauss,
            n,
            h,
            backend: MeasureBackend::DualQuadrature(Box::new(data)),
            depth_cap: DEFAULT_DEPTH_CAP,
            first_level: Vec::new(),
        };
        m.first_level = m.children_masses(&Word::empty());
        Ok(m)
    }

    pub fn from_dimension(dim: &DimensionResult, grid_m: usize) -> Result<Self> {
        match dim.kind {
            SystemKind::LinearGauss => Self::linear(dim.n, dim.h),
            SystemKind::Gauss => Self::gauss(dim.n, dim.h, grid_m),
        }
    }

    pub fn with_depth_cap(mut self, cap: usize) -> Self {
        self.depth_cap = cap;
        self
    }

    /// Fails with `StaleDimension` if `dim` no longer matches this measure.
    pub fn check_current(&self, dim: &DimensionResult) -> Result<()> {
        let gap = (dim.h - self.h).abs();
        if dim.kind != self.kind || dim.n != self.n || gap > STALE_TOL {
            return Err(Error::StaleDimension { h: self.h, defect: gap, tol: STALE_TOL });
        }
        Ok(())
    }

    pub fn spectral(&self) -> Option<&SpectralData> {
        match &self.backend {
            MeasureBackend::DualQuadrature(s) => Some(s),
            MeasureBackend::ExactProduct => None,
        }
    }

    /// `∫ φ dm_n` for a smooth `φ` (Gauss); linear measures integrate by
    /// self-similarity at the given depth.
    pub fn integrate(&self, phi: impl Fn(f64) -> f64) -> f64 {
        match &self.backend {
            MeasureBackend::DualQuadrature(s) => s.integrate(phi),
            MeasureBackend::ExactProduct => {
                // midpoint rule over depth-3 cylinders
                let mut total = 0.0;
                let mut stack = vec![Word::empty()];
                while let Some(w) = stack.pop() {
                    if w.len() == 3 {
                        let c = cylinder::<f64>(self.kind, &w);
                        let mid = 0.5 * (c.image_of_zero + c.image_of_one);
                        total += self.cylinder_mass_unchecked(&w) * phi(mid);
                        continue;
                    }
                    for k in 1..=self.n {
                        stack.push(w.child(k).expect("k ≥ 1"));
                    }
                }
                total
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.first_level.iter().sum()
    }

    pub fn first_level(&self) -> &[f64] {
        &self.first_level
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        w.check_bound(self.n)?;
        if w.len() > self.depth_cap {
            return Err(Error::DepthOverflow { depth: w.len(), cap: self.depth_cap });
        }
        Ok(())
    }

    pub fn cylinder_mass(&self, w: &Word) -> Result<f64> {
        self.check_word(w)?;
        Ok(self.cylinder_mass_unchecked(w))
    }

    pub(crate) fn cylinder_mass_unchecked(&self, w: &Word) -> f64 {
        if w.is_empty() {
            return 1.0;
        }
        match &self.backend {
            MeasureBackend::ExactProduct => {
                let log: f64 = w.symbols().iter().map(|&k| block_length::<f64>(k).ln()).sum();
                (self.h * log).exp()
            }
            MeasureBackend::DualQuadrature(s) => {
                s.integrate(|x| word_slope(self.kind, w, &x).powf(self.h))
            }
        }
    }

    /// Masses of the children `w1, …, wn`.
    pub fn children_masses(&self, w: &Word) -> Vec<f64> {
        match &self.backend {
            MeasureBackend::ExactProduct => {
                let parent = self.cylinder_mass_unchecked(w);
                (1..=self.n)
                    .map(|k| parent * block_length::<f64>(k).powf(self.h))
                    .collect()
            }
            MeasureBackend::DualQuadrature(s) => {
                let h = self.h;
                let mut out = vec![0.0; self.n as usize];
                for (&x, &wt) in s.nodes.iter().zip(&s.dual_weights) {
                    for (k, o) in (1..=self.n).zip(out.iter_mut()) {
                        let y = branch(self.kind, k, &x);
                        let d = word_slope(self.kind, w, &y) * branch_slope(self.kind, k, &x);
                        *o += wt * d.powf(h);
                    }
                }
                out
            }
        }
    }

    /// Mass bracket for `F` by refining cylinders down to `depth`.
    pub fn interval_mass<T: Scalar>(&self, f: &IntervalX<T>, depth: usize) -> Result<MassBracket> {
        if depth > self.depth_cap {
            return Err(Error::DepthOverflow { depth, cap: self.depth_cap });
        }
        if f.is_degenerate() {
            return Ok(MassBracket::exact(0.0));
        }
        let mut lower = 0.0;
        let mut partial = 0.0;
        self.refine(&Word::empty(), 1.0, f, depth, &mut lower, &mut partial);
        let lower = lower.clamp(0.0, 1.0);
        let upper = (lower + partial).clamp(lower, 1.0);
        Ok(MassBracket { lower, upper })
    }

    fn refine<T: Scalar>(
        &self,
        w: &Word,
        mass: f64,
        f: &IntervalX<T>,
        depth: usize,
        lower: &mut f64,
        partial: &mut f64,
    ) {
        let (lo, hi) = support_of::<T>(self.kind, self.n, w);
        if hi <= f.lo || lo >= f.hi {
            return;
        }
        if f.lo <= lo && hi <= f.hi {
            *lower += mass;
            return;
        }
        if w.len() >= depth {
            *partial += mass;
            return;
        }
        let masses = self.children_masses(w);
        for (k, m) in (1..=self.n).zip(masses) {
            let child = w.child(k).expect("k ≥ 1");
            self.refine(&child, m, f, depth, lower, partial);
        }
    }
}

/// Convex hull of `g_w(J_n)`, which is `g_w([b_{n+1}, 1])`.
pub(crate) fn support_of<T: Scalar>(kind: SystemKind, n: u64, w: &Word) -> (T, T) {
    let a = word_image(kind, w, &T::from_ratio(1, n as i64 + 1));
    let b = word_image(kind, w, &T::one());
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Records from the bounded-distortion probes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistortionSample {
    /// `max (|g_ω'(z)/g_ω'(w)| - 1) / |z - w|`.
    pub constant: f64,
    /// `max |g_ω'(z)/g_ω'(w)| - 1`.
    pub max_excess: f64,
    pub pairs: usize,
}

/// Largest relative distortion of `g_ω` over the given pairs.
pub fn distortion_probe(kind: SystemKind, w: &Word, pairs: &[(f64, f64)]) -> DistortionSample {
    let mut constant = 0.0f64;
    let mut max_excess = 0.0f64;
    for &(z, x) in pairs {
        let a = word_slope(kind, w, &z);
        let b = word_slope(kind, w, &x);
        let excess = (a / b).max(b / a) - 1.0;
        max_excess = max_excess.max(excess);
        let gap = (z - x).abs();
        if gap > 0.0 {
            constant = constant.max(excess / gap);
        }
    }
    DistortionSample { constant, max_excess, pairs: pairs.len() }
}

/// `g_n²(D_n)` with `D_n = [1/(n+1), 1]`.
pub fn double_top_image(n: u64) -> Result<IntervalX<f64>> {
    let g = |x: f64| branch(SystemKind::Gauss, n, &branch(SystemKind::Gauss, n, &x));
    let (a, b) = (g(1.0 / (n as f64 + 1.0)), g(1.0));
    IntervalX::spanning(a, b, crate::ifs::Provenance::Raw)
}

/// Max distortion excess of `g_ω` for `ω` over words with symbols in
/// `{1, 2, n}` of length ≤ 3, on pairs spread across `g_n²(D_n)`.
pub fn top_distortion_excess(n: u64, samples: usize) -> Result<f64> {
    if n < 2 || samples < 2 {
        return Err(Error::domain("need n ≥ 2 and at least two samples"));
    }
    let iv = double_top_image(n)?;
    let pts: Vec<f64> = (0..samples)
        .map(|i| iv.lo + (iv.hi - iv.lo) * i as f64 / (samples - 1) as f64)
        .collect();
    let mut pairs = Vec::new();
    for (i, &z) in pts.iter().enumerate() {
        for &x in &pts[i + 1..] {
            pairs.push((z, x));
        }
    }
    let alphabet = [1, 2, n];
    let mut words = vec![Word::empty()];
    let mut frontier = vec![Word::empty()];
    for _ in 0..3 {
        let mut next = Vec::new();
        for w in &frontier {
            for &k in &alphabet {
                next.push(Word::new(vec![k]).expect("k ≥ 1").concat(w));
            }
        }
        words.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(words
        .iter()
        .map(|w| distortion_probe(SystemKind::Gauss, w, &pairs).max_excess)
        .fold(0.0, f64::max))
}
