//! Density ratios `m_n(F) / diam(F)^{h_n}` and the supremum search that
//! brackets the Hausdorff measure `H_n = H_{h_n}(J_n)`, together with the
//! numerical checks of the auxiliary inequalities used along the way.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::conformal::ConformalMeasure;
use crate::error::{Error, Result};
use crate::ifs::{
    block_endpoint, block_image, cylinder, decompose_prefix, IntervalX, Provenance, SystemKind,
    Word,
};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioBracket {
    pub lower: f64,
    pub upper: f64,
}

/// `m_n(F) / diam(F)^{h_n}` with the mass bracket from refinement to `depth`.
pub fn density_ratio<T: Scalar>(
    measure: &ConformalMeasure,
    f: &IntervalX<T>,
    depth: usize,
) -> Result<RatioBracket> {
    let diam = f.diameter().as_f64();
    if f.is_degenerate() || diam <= 0.0 {
        return Err(Error::DegenerateInterval { lo: f.lo.as_f64(), hi: f.hi.as_f64() });
    }
    let mass = measure.interval_mass(f, depth)?;
    let scale = diam.powf(measure.h);
    Ok(RatioBracket { lower: mass.lower / scale, upper: mass.upper / scale })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Family {
    /// Blocks `[b_{l+1}, b_k]`.
    Blocks,
    /// Images `g_w([b_{l+1}, b_k])` for short words `w`.
    Images,
    /// Windows `F_n(ε) = [b_{n+1}, b_{[n - n^{1-ε}] + 1}]`.
    Windows,
    /// All intervals between cylinder endpoints of depth `≤ D`.
    Exhaustive,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Blocks, Family::Images, Family::Windows, Family::Exhaustive];

    pub fn tag(&self) -> &'static str {
        match self {
            Family::Blocks => "a",
            Family::Images => "b",
            Family::Windows => "c",
            Family::Exhaustive => "d",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "blocks" => Ok(Family::Blocks),
            "b" | "images" => Ok(Family::Images),
            "c" | "windows" => Ok(Family::Windows),
            "d" | "exhaustive" => Ok(Family::Exhaustive),
            other => Err(Error::domain(format!("unknown candidate family '{other}'"))),
        }
    }
}

/// Index `[n - n^{1-ε}] + 1` of the left end of the window `F_n(ε)`.
pub fn window_start(n: u64, eps: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("ε = {eps} is not in (0,1)")));
    }
    let k = (n as f64 - (n as f64).powf(1.0 - eps)).floor() + 1.0;
    if k < 1.0 || k > n as f64 {
        return Err(Error::domain(format!("window F_{n}({eps}) is empty")));
    }
    Ok(k as u64)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Candidate {
    Block { k: u64, l: u64 },
    Image { word: Word, k: u64, l: u64 },
    Window { eps: f64, k: u64 },
    Exhaustive { lo: Rational, hi: Rational },
}

impl Candidate {
    pub fn family(&self) -> Family {
        match self {
            Candidate::Block { .. } => Family::Blocks,
            Candidate::Image { .. } => Family::Images,
            Candidate::Window { .. } => Family::Windows,
            Candidate::Exhaustive { .. } => Family::Exhaustive,
        }
    }

    pub fn interval(&self, kind: SystemKind, n: u64) -> Result<IntervalX<f64>> {
        match self {
            Candidate::Block { k, l } => block_image(kind, &Word::empty(), *k, *l),
            Candidate::Image { word, k, l } => block_image(kind, word, *k, *l),
            Candidate::Window { k, .. } => block_image(kind, &Word::empty(), *k, n),
            Candidate::Exhaustive { lo, hi } => IntervalX::raw(lo.as_f64(), hi.as_f64()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    pub families: Vec<Family>,
    pub eps: Vec<f64>,
    /// Endpoint depth for the exhaustive family.
    pub depth: usize,
    /// Word length for the image family.
    pub image_depth: usize,
    pub budget: usize,
}

pub const DEFAULT_BUDGET: usize = 50_000_000;

impl FamilySpec {
    /// Blocks and windows, plus images for the Gauss system (for the linear
    /// system an image has exactly the ratio of its block) and the
    /// exhaustive family for `n ≤ 8`.
    pub fn default_for(kind: SystemKind, n: u64) -> Self {
        let mut families = vec![Family::Blocks, Family::Windows];
        if kind == SystemKind::Gauss {
            families.push(Family::Images);
        }
        if n <= 8 {
            families.push(Family::Exhaustive);
        }
        FamilySpec {
            families,
            eps: vec![0.1, 0.3, 0.5, 0.7],
            depth: 3,
            image_depth: 3,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn only(families: &[Family]) -> Self {
        FamilySpec { families: families.to_vec(), ..FamilySpec::default_for(SystemKind::Gauss, 0) }
    }
}

/// Words over `{1, 2, n-1, n}` of length `1..=depth`.
pub fn image_words(n: u64, depth: usize) -> Vec<Word> {
    let alphabet: BTreeSet<u64> = [1, 2, n.saturating_sub(1), n]
        .into_iter()
        .filter(|&k| k >= 1 && k <= n)
        .collect();
    let mut out = Vec::new();
    let mut frontier = vec![Word::empty()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for w in &frontier {
            for &k in &alphabet {
                next.push(w.child(k).expect("k ≥ 1"));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Distinct endpoints of all cylinders of depth `1..=depth`, sorted.
fn cylinder_endpoints(kind: SystemKind, n: u64, depth: usize) -> Vec<Rational> {
    let mut set = BTreeSet::new();
    let mut frontier = vec![Word::empty()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for w in &frontier {
            for k in 1..=n {
                let c = w.child(k).expect("k ≥ 1");
                let cyl = cylinder::<Rational>(kind, &c);
                set.insert(cyl.image_of_zero.clone());
                set.insert(cyl.image_of_one.clone());
                next.push(c);
            }
        }
        frontier = next;
    }
    set.into_iter().collect()
}

fn check_exhaustive(n: u64, depth: usize) -> Result<()> {
    if n > 8 || depth > 3 || depth == 0 {
        return Err(Error::domain(format!(
            "the exhaustive family needs n ≤ 8 and 1 ≤ depth ≤ 3 (got n = {n}, depth = {depth})"
        )));
    }
    Ok(())
}

fn candidate_count(n: u64, spec: &FamilySpec) -> usize {
    let blocks = (n * (n + 1) / 2) as usize;
    let mut count = 0usize;
    for f in &spec.families {
        count = count.saturating_add(match f {
            Family::Blocks => blocks,
            Family::Images => image_words(n, spec.image_depth).len().saturating_mul(blocks),
            Family::Windows => spec.eps.len(),
            Family::Exhaustive => {
                let e = (n as usize + 1).pow(spec.depth as u32) * 2;
                e * e / 2
            }
        });
    }
    count
}

/// Enumerates the candidate intervals of the requested families in a fixed
/// order: blocks by `(k, l)`, images by word then `(k, l)`, windows in the
/// order of `ε`, exhaustive pairs by endpoint.
pub fn candidate_families(kind: SystemKind, n: u64, spec: &FamilySpec) -> Result<Vec<Candidate>> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let mut out = Vec::new();
    let push = |out: &mut Vec<Candidate>, c: Candidate| -> Result<()> {
        if out.len() >= spec.budget {
            return Err(Error::BudgetExceeded { budget: spec.budget, produced: out.len() });
        }
        out.push(c);
        Ok(())
    };
    let mut families = spec.families.clone();
    families.sort();
    families.dedup();
    for f in families {
        match f {
            Family::Blocks => {
                for k in 1..=n {
                    for l in k..=n {
                        push(&mut out, Candidate::Block { k, l })?;
                    }
                }
            }
            Family::Images => {
                for w in image_words(n, spec.image_depth) {
                    for k in 1..=n {
                        for l in k..=n {
                            push(&mut out, Candidate::Image { word: w.clone(), k, l })?;
                        }
                    }
                }
            }
            Family::Windows => {
                for &eps in &spec.eps {
                    push(&mut out, Candidate::Window { eps, k: window_start(n, eps)? })?;
                }
            }
            Family::Exhaustive => {
                check_exhaustive(n, spec.depth)?;
                let ends = cylinder_endpoints(kind, n, spec.depth);
                for (i, lo) in ends.iter().enumerate() {
                    for hi in &ends[i + 1..] {
                        push(&mut out, Candidate::Exhaustive { lo: lo.clone(), hi: hi.clone() })?;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `|g_w(a) - g_w(b)|` carried through the composition without cancellation.
fn image_gap(kind: SystemKind, w: &Word, a: f64, b: f64, gap: f64) -> f64 {
    let (mut a, mut b, mut gap) = (a, b, gap);
    for &k in w.symbols().iter().rev() {
        let kf = k as f64;
        match kind {
            SystemKind::Gauss => {
                gap /= (a + kf) * (b + kf);
                a = 1.0 / (a + kf);
                b = 1.0 / (b + kf);
            }
            SystemKind::LinearGauss => {
                let slope = 1.0 / (kf * (kf + 1.0));
                gap *= slope;
                a = 1.0 / kf - slope * a;
                b = 1.0 / kf - slope * b;
            }
        }
    }
    gap
}

/// `b_k - b_{l+1}` without cancellation.
fn block_gap(k: u64, l: u64) -> f64 {
    (l + 1 - k) as f64 / (k as f64 * (l + 1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyBest {
    pub family: Family,
    pub best_ratio: f64,
    pub evaluated: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundConstants {
    /// Coefficient of `(1 - h_n)² ln² n`.
    pub c: f64,
    /// Coefficient of `n^{-1} ln ln n`.
    pub c3: f64,
}

impl Default for BoundConstants {
    /// Fitted on the linear system for `n ∈ {64, …, 1024}`.
    fn default() -> Self {
        BoundConstants { c: FITTED_C, c3: FITTED_C3 }
    }
}

pub const FITTED_C: f64 = 0.0;
pub const FITTED_C3: f64 = 0.0;

/// Smallest `C ≥ 0` (with `C_3 = 0`) for which the cap dominates every
/// `(n, h_n, sup_ratio)` triple.
pub fn fit_bound_constants(samples: &[(u64, f64, f64)]) -> BoundConstants {
    let c = samples
        .iter()
        .map(|&(n, h, sup)| {
            let lead = (1.0 - h) * (n as f64).ln();
            (sup - 1.0 - lead) / (lead * lead)
        })
        .fold(0.0, f64::max);
    BoundConstants { c, c3: 0.0 }
}

/// Upper cap on the density supremum:
/// `1 + (1-h) ln n + C (1-h)² ln² n + C_3 ln ln n / n`.
pub fn measure_cap_evaluator(n: u64, h: f64, constants: BoundConstants) -> f64 {
    let ln_n = (n as f64).ln();
    let d = 1.0 - h;
    let lnln = if n >= 3 { ln_n.ln() } else { 0.0 };
    1.0 + d * ln_n + constants.c * d * d * ln_n * ln_n + constants.c3 * lnln / n as f64
}

/// `(1 - 1/(3n²))^{h}`, the sharper ceiling for the Gauss system.
pub fn gauss_sharp_cap(n: u64, h: f64) -> f64 {
    let nf = n as f64;
    (1.0 - 1.0 / (3.0 * nf * nf)).powf(h)
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureEstimate {
    pub kind: SystemKind,
    pub n: u64,
    pub h: f64,
    #[serde(serialize_with = "ser_interval")]
    pub best_interval: IntervalX<f64>,
    pub best_family: Family,
    pub sup_ratio: f64,
    pub h_lower: f64,
    pub h_upper: f64,
    /// `sup_ratio ≤ cap`, i.e. `H_lower ≤ H_upper`. The cap is asymptotic and
    /// fails for small `n`.
    pub cap_holds: bool,
    pub families_used: Vec<Family>,
    pub per_family: Vec<FamilyBest>,
    pub evaluated: usize,
}

fn ser_interval<S: serde::Serializer>(iv: &IntervalX<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Interval", 2)?;
    st.serialize_field("lo", &iv.lo)?;
    st.serialize_field("hi", &iv.hi)?;
    st.end()
}

impl MeasureEstimate {
    /// `(1 - H_upper) / ((1 - h_n) ln n)`.
    pub fn normalized(&self) -> f64 {
        (1.0 - self.h_upper) / ((1.0 - self.h) * (self.n as f64).ln())
    }
}

#[derive(Clone, Debug)]
struct Best {
    ratio: f64,
    family: Family,
    lo: f64,
    hi: f64,
    candidate: Candidate,
}

impl Best {
    fn beats(&self, other: &Best) -> bool {
        self.ratio > other.ratio
            || (self.ratio == other.ratio
                && (self.family, self.lo, self.hi) < (other.family, other.lo, other.hi))
    }
}

fn keep(best: &mut Option<Best>, cand: Best) {
    if best.as_ref().is_none_or(|b| cand.beats(b)) {
        *best = Some(cand);
    }
}

/// Best block inside `g_w([b_{n+1}, 1])`, using the masses of `w1, …, wn`.
fn best_block_under(measure: &ConformalMeasure, w: &Word, family: Family) -> (Option<Best>, usize) {
    let n = measure.n;
    let h = measure.h;
    let masses = if w.is_empty() {
        measure.first_level().to_vec()
    } else {
        measure.children_masses(w)
    };
    let mut prefix = Vec::with_capacity(masses.len() + 1);
    prefix.push(0.0);
    for m in &masses {
        prefix.push(prefix.last().unwrap() + m);
    }
    let mut best: Option<Best> = None;
    let mut count = 0;
    for k in 1..=n {
        for l in k..=n {
            count += 1;
            let mass = prefix[l as usize] - prefix[k as usize - 1];
            let gap = image_gap(
                measure.kind,
                w,
                block_endpoint::<f64>(l + 1),
                block_endpoint::<f64>(k),
                block_gap(k, l),
            );
            let ratio = mass / gap.powf(h);
            if best.as_ref().is_none_or(|b| ratio >= b.ratio) {
                let iv = block_image::<f64>(measure.kind, w, k, l).expect("block image in [0,1]");
                let candidate = if w.is_empty() {
                    Candidate::Block { k, l }
                } else {
                    Candidate::Image { word: w.clone(), k, l }
                };
                keep(&mut best, Best { ratio, family, lo: iv.lo, hi: iv.hi, candidate });
            }
        }
    }
    (best, count)
}

fn best_exhaustive(measure: &ConformalMeasure, depth: usize) -> Result<(Option<Best>, usize)> {
    check_exhaustive(measure.n, depth)?;
    let (kind, n) = (measure.kind, measure.n);
    // depth-D cylinders with exact endpoints, ordered along [0,1]
    let mut cyls: Vec<(Rational, Rational, f64)> = Vec::new();
    let mut frontier = vec![Word::empty()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for w in &frontier {
            for k in 1..=n {
                next.push(w.child(k).expect("k ≥ 1"));
            }
        }
        frontier = next;
    }
    for w in &frontier {
        let c = cylinder::<Rational>(kind, w).interval();
        cyls.push((c.lo, c.hi, measure.cylinder_mass(w)?));
    }
    cyls.sort_by(|a, b| a.0.cmp(&b.0));
    let ends = cylinder_endpoints(kind, n, depth);
    // cumulative mass of cylinders lying left of each endpoint
    let mut cdf = Vec::with_capacity(ends.len());
    let mut acc = 0.0;
    let mut idx = 0;
    for e in &ends {
        while idx < cyls.len() && cyls[idx].1 <= *e {
            acc += cyls[idx].2;
            idx += 1;
        }
        cdf.push(acc);
    }
    let h = measure.h;
    let mut best = None;
    let mut count = 0;
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            count += 1;
            let mass = cdf[j] - cdf[i];
            if mass <= 0.0 {
                continue;
            }
            let diam = (ends[j].clone() - ends[i].clone()).as_f64();
            let ratio = mass / diam.powf(h);
            if best.as_ref().is_none_or(|b: &Best| ratio >= b.ratio) {
                keep(
                    &mut best,
                    Best {
                        ratio,
                        family: Family::Exhaustive,
                        lo: ends[i].as_f64(),
                        hi: ends[j].as_f64(),
                        candidate: Candidate::Exhaustive { lo: ends[i].clone(), hi: ends[j].clone() },
                    },
                );
            }
        }
    }
    Ok((best, count))
}

fn window_best(measure: &ConformalMeasure, eps: f64) -> Result<Best> {
    let n = measure.n;
    let k = window_start(n, eps)?;
    let mass: f64 = measure.first_level()[k as usize - 1..].iter().sum();
    let ratio = mass / block_gap(k, n).powf(measure.h);
    let iv = block_image::<f64>(measure.kind, &Word::empty(), k, n)?;
    Ok(Best { ratio, family: Family::Windows, lo: iv.lo, hi: iv.hi, candidate: Candidate::Window { eps, k } })
}

/// Finite surrogate of `sup_F m_n(F) / diam(F)^{h_n}` over the requested
/// families, with the trivial candidate `[b_{n+1}, 1]` always included.
pub fn sup_ratio_search(measure: &ConformalMeasure, spec: &FamilySpec) -> Result<MeasureEstimate> {
    sup_ratio_search_with(measure, spec, BoundConstants::default())
}

pub fn sup_ratio_search_with(
    measure: &ConformalMeasure,
    spec: &FamilySpec,
    constants: BoundConstants,
) -> Result<MeasureEstimate> {
    use rayon::prelude::*;
    let n = measure.n;
    let planned = candidate_count(n, spec);
    if planned > spec.budget {
        return Err(Error::BudgetExceeded { budget: spec.budget, produced: 0 });
    }
    let mut families = spec.families.clone();
    families.sort();
    families.dedup();

    let full_mass: f64 = measure.first_level().iter().sum();
    let fallback_iv = block_image::<f64>(measure.kind, &Word::empty(), 1, n)?;
    let mut best = Best {
        ratio: full_mass / block_gap(1, n).powf(measure.h),
        family: Family::Blocks,
        lo: fallback_iv.lo,
        hi: fallback_iv.hi,
        candidate: Candidate::Block { k: 1, l: n },
    };
    let mut evaluated = 1;
    let mut per_family = Vec::new();
    for &f in &families {
        let (fam_best, count) = match f {
            Family::Blocks => best_block_under(measure, &Word::empty(), f),
            Family::Images => {
                let words = image_words(n, spec.image_depth);
                let parts: Vec<(Option<Best>, usize)> =
                    words.par_iter().map(|w| best_block_under(measure, w, f)).collect();
                let mut b = None;
                let mut c = 0;
                for (pb, pc) in parts {
                    c += pc;
                    if let Some(pb) = pb {
                        keep(&mut b, pb);
                    }
                }
                (b, c)
            }
            Family::Windows => {
                let mut b = None;
                for &eps in &spec.eps {
                    keep(&mut b, window_best(measure, eps)?);
                }
                (b, spec.eps.len())
            }
            Family::Exhaustive => best_exhaustive(measure, spec.depth)?,
        };
        evaluated += count;
        per_family.push(FamilyBest {
            family: f,
            best_ratio: fam_best.as_ref().map_or(f64::NAN, |b| b.ratio),
            evaluated: count,
        });
        if let Some(fb) = fam_best {
            if fb.beats(&best) {
                best = fb;
            }
        }
    }
    let best_interval = best.candidate.interval(measure.kind, n)?;
    let cap = measure_cap_evaluator(n, measure.h, constants);
    Ok(MeasureEstimate {
        kind: measure.kind,
        n,
        h: measure.h,
        best_interval,
        best_family: best.family,
        sup_ratio: best.ratio,
        h_lower: 1.0 / cap,
        h_upper: 1.0 / best.ratio,
        cap_holds: best.ratio <= cap,
        families_used: families,
        per_family,
        evaluated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionEntropy {
    pub k: u64,
    pub l: u64,
    pub weights: Vec<f64>,
    pub entropy: f64,
}

/// `w_j = (b_j - b_{j+1}) / (b_k - b_{l+1})` for `k ≤ j ≤ l`, in any scalar.
pub fn partition_weights<T: Scalar>(k: u64, l: u64) -> Result<Vec<T>> {
    if k == 0 || k > l {
        return Err(Error::domain(format!("need 1 ≤ k ≤ l (got k = {k}, l = {l})")));
    }
    let total = block_endpoint::<T>(k) - block_endpoint::<T>(l + 1);
    Ok((k..=l)
        .map(|j| (block_endpoint::<T>(j) - block_endpoint::<T>(j + 1)) / total.clone())
        .collect())
}

pub fn entropy_partition(k: u64, l: u64) -> Result<PartitionEntropy> {
    if k == 0 || k > l {
        return Err(Error::domain(format!("need 1 ≤ k ≤ l (got k = {k}, l = {l})")));
    }
    // w_j = k (l+1) / ((l+1-k) j (j+1)), formed without cancellation
    let scale = k as f64 * (l + 1) as f64 / (l + 1 - k) as f64;
    let weights: Vec<f64> = (k..=l).map(|j| scale / (j as f64 * (j + 1) as f64)).collect();
    let entropy = -weights.iter().filter(|&&w| w > 0.0).map(|w| w * w.ln()).sum::<f64>();
    Ok(PartitionEntropy { k, l, weights, entropy })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerSumRecord {
    /// `(Σ u_j^t - 1) / (1 - t)`.
    pub lhs: f64,
    pub empirical_c: f64,
}

pub fn power_sum_check(u: &[f64], t: f64, n: u64) -> Result<PowerSumRecord> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("t = {t} is not in (0,1)")));
    }
    if u.is_empty() || u.len() as u64 > n || u.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::domain("u must be a probability vector of length ≤ n"));
    }
    if (u.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::domain("u does not sum to 1"));
    }
    let power: f64 = u.iter().filter(|&&x| x > 0.0).map(|x| x.powf(t)).sum();
    let lhs = (power - 1.0) / (1.0 - t);
    let ln_n = (n as f64).ln();
    let empirical_c = if n >= 2 {
        ((lhs - ln_n) / ((1.0 - t) * ln_n * ln_n)).max(0.0)
    } else {
        0.0
    };
    Ok(PowerSumRecord { lhs, empirical_c })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SAlphaRecord {
    pub closed_form: f64,
    pub geometric: f64,
    pub empirical_max: f64,
    pub samples: usize,
}

/// `(1-α)^h / (1-α^h)`.
pub fn s_alpha_closed_form(alpha: f64, h: f64) -> f64 {
    (1.0 - alpha).powf(h) / (1.0 - alpha.powf(h))
}

/// Max of `Σ x_j^h` over random sequences with `x_{j+1} ≤ α x_j`, `Σ x_j = 1`.
pub fn s_alpha_max(alpha: f64, h: f64, samples: usize, rng: &mut impl Rng) -> Result<SAlphaRecord> {
    if !(alpha > 0.0 && alpha < 1.0 && h > 0.0 && h < 1.0) {
        return Err(Error::domain("α and h must lie in (0,1)"));
    }
    // geometric x_j = (1-α) α^{j-1}, summed until the terms vanish
    let mut geometric = 0.0;
    let mut comp = 0.0;
    let mut x = 1.0 - alpha;
    while x > 0.0 {
        let term = x.powf(h);
        if term < 1e-18 * geometric {
            break;
        }
        let y = term - comp;
        let t = geometric + y;
        comp = (t - geometric) - y;
        geometric = t;
        x *= alpha;
    }
    let mut empirical_max = geometric;
    let mut seq = Vec::with_capacity(256);
    for _ in 0..samples {
        // ratios α·U^γ: small γ hugs the geometric extremal, large γ decays fast
        let gamma: f64 = 10f64.powf(rng.gen_range(-3.0..1.0));
        seq.clear();
        let mut y = 1.0f64;
        for _ in 0..256 {
            seq.push(y);
            y *= alpha * rng.gen::<f64>().powf(gamma);
            if y < 1e-300 {
                break;
            }
        }
        let total: f64 = seq.iter().sum();
        let value: f64 = seq.iter().map(|v| (v / total).powf(h)).sum();
        empirical_max = empirical_max.max(value);
    }
    Ok(SAlphaRecord { closed_form: s_alpha_closed_form(alpha, h), geometric, empirical_max, samples })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RnRecord {
    /// `Σ w_m^h` over the prefix pieces of `[0, r]`.
    pub r_sum: f64,
    /// `2^{1-h} / (2^h - 1)`.
    pub bound: f64,
    pub pieces: usize,
}

pub fn rn_bound(h: f64) -> f64 {
    2f64.powf(1.0 - h) / (2f64.powf(h) - 1.0)
}

pub fn rn_bound_check(r: f64, h: f64) -> Result<RnRecord> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::domain(format!("h = {h} is not in (0,1)")));
    }
    let d = decompose_prefix(SystemKind::LinearGauss, &r, 48)?;
    let weights = d.weights();
    let r_sum = weights.iter().filter(|&&w| w > 0.0).map(|w| w.powf(h)).sum();
    Ok(RnRecord { r_sum, bound: rn_bound(h), pieces: weights.len() })
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessRecord {
    pub eps: f64,
    pub k: u64,
    pub ratio: f64,
    /// `(ratio - 1) / ((1 - h_n) ln n)`.
    pub normalized: f64,
}

/// Density ratio of `F_n(ε)` (linear) or of `g_n(F_n(ε))` (Gauss).
pub fn lower_bound_witness(measure: &ConformalMeasure, eps: f64) -> Result<WitnessRecord> {
    let n = measure.n;
    let k = window_start(n, eps)?;
    let h = measure.h;
    let ratio = match measure.kind {
        SystemKind::LinearGauss => {
            let mass: f64 = measure.first_level()[k as usize - 1..].iter().sum();
            mass / block_gap(k, n).powf(h)
        }
        SystemKind::Gauss => {
            let w = Word::new(vec![n])?;
            let masses = measure.children_masses(&w);
            let mass: f64 = masses[k as usize - 1..].iter().sum();
            let gap = image_gap(
                measure.kind,
                &w,
                block_endpoint::<f64>(n + 1),
                block_endpoint::<f64>(k),
                block_gap(k, n),
            );
            mass / gap.powf(h)
        }
    };
    let normalized = (ratio - 1.0) / ((1.0 - h) * (n as f64).ln());
    Ok(WitnessRecord { eps, k, ratio, normalized })
}

/// Interval of a block image in exact arithmetic, for exact mass checks.
pub fn exact_block_image(kind: SystemKind, w: &Word, k: u64, l: u64) -> Result<IntervalX<Rational>> {
    block_image::<Rational>(kind, w, k, l)
}

/// Provenance-tagged interval for `[b_{n+1}, 1]`.
pub fn full_block(kind: SystemKind, n: u64) -> Result<IntervalX<f64>> {
    let iv = block_image::<f64>(kind, &Word::empty(), 1, n)?;
    debug_assert_eq!(iv.provenance, Provenance::BlockEndpoints { k: 1, l: n });
    Ok(iv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimension::{gauss_dimension, moran_dimension};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(n: u64) -> ConformalMeasure {
        ConformalMeasure::linear(n, moran_dimension(n, 1e-13).unwrap().h).unwrap()
    }

    #[test]
    fn density_ratio_examples() {
        let m = linear(2);
        let full = full_block(SystemKind::LinearGauss, 2).unwrap();
        let r = density_ratio(&m, &full, 2).unwrap();
        assert!((r.upper - (2.0f64 / 3.0).powf(-m.h)).abs() < 1e-12);
        assert!((r.upper - 1.276).abs() < 1e-3);
        let gap = IntervalX::raw(0.0, 1.0 / 3.0).unwrap();
        assert_eq!(density_ratio(&m, &gap, 3).unwrap().upper, 0.0);
        let point = IntervalX::raw(0.5, 0.5).unwrap();
        assert!(matches!(density_ratio(&m, &point, 3), Err(Error::DegenerateInterval { .. })));
    }

    #[test]
    fn candidate_examples() {
        let a = candidate_families(SystemKind::Gauss, 4, &FamilySpec::only(&[Family::Blocks])).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(window_start(100, 0.5).unwrap(), 91);
        let c = Candidate::Window { eps: 0.5, k: 91 }.interval(SystemKind::LinearGauss, 100).unwrap();
        assert!((c.lo - 1.0 / 101.0).abs() < 1e-16 && (c.hi - 1.0 / 91.0).abs() < 1e-16);
        let mut spec = FamilySpec::only(&[Family::Exhaustive]);
        spec.depth = 2;
        let d = candidate_families(SystemKind::LinearGauss, 2, &spec).unwrap();
        assert_eq!(d.len(), 7 * 6 / 2);
        spec.budget = 5;
        assert!(matches!(
            candidate_families(SystemKind::LinearGauss, 2, &spec),
            Err(Error::BudgetExceeded { budget: 5, produced: 5 })
        ));
    }

    #[test]
    fn search_linear_two() {
        let m = linear(2);
        let mut spec = FamilySpec::only(&[Family::Blocks, Family::Exhaustive]);
        spec.depth = 3;
        let est = sup_ratio_search(&m, &spec).unwrap();
        assert!(est.h_upper < 0.79);
        assert!(est.h_upper <= 1.0 + 1e-9);
        let empty = sup_ratio_search(&m, &FamilySpec::only(&[])).unwrap();
        assert!((empty.sup_ratio - (2.0f64 / 3.0).powf(-m.h)).abs() < 1e-12);
        assert!(est.sup_ratio >= empty.sup_ratio);
    }

    #[test]
    fn search_agrees_with_enumeration() {
        // independent evaluation of every enumerated candidate through refinement
        let m = linear(3);
        let spec = FamilySpec::only(&[Family::Blocks, Family::Images]);
        let mut spec = spec;
        spec.image_depth = 2;
        let est = sup_ratio_search(&m, &spec).unwrap();
        let cands = candidate_families(SystemKind::LinearGauss, 3, &spec).unwrap();
        let mut best: f64 = 0.0;
        for c in &cands {
            let iv = match c {
                Candidate::Block { k, l } => exact_block_image(m.kind, &Word::empty(), *k, *l).unwrap(),
                Candidate::Image { word, k, l } => exact_block_image(m.kind, word, *k, *l).unwrap(),
                _ => unreachable!(),
            };
            let r = density_ratio(&m, &iv, 4).unwrap();
            assert!((r.upper - r.lower).abs() < 1e-12);
            best = best.max(r.lower);
        }
        assert!((best - est.sup_ratio).abs() < 1e-12 * best);
    }

    #[test]
    fn entropy_examples() {
        let p = entropy_partition(2, 3).unwrap();
        assert!((p.weights[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.entropy - 0.636514).abs() < 1e-6);
        assert_eq!(entropy_partition(5, 5).unwrap().entropy, 0.0);
        assert!(entropy_partition(4, 3).is_err());
        let exact = partition_weights::<Rational>(7, 40).unwrap();
        let total = exact.iter().fold(Rational::from_u64(0), |a, b| a + b);
        assert_eq!(total, Rational::from_u64(1));
    }

    #[test]
    fn power_sum_examples() {
        let r = power_sum_check(&[0.5, 0.5], 0.9, 2).unwrap();
        assert!((r.lhs - 0.7177).abs() < 1e-4);
        assert_eq!(power_sum_check(&[1.0, 0.0, 0.0], 0.3, 3).unwrap().lhs, 0.0);
        let n = 10_000u64;
        let u = vec![1.0 / n as f64; n as usize];
        let t = 1.0 - 1.0 / n as f64;
        let r = power_sum_check(&u, t, n).unwrap();
        let ln_n = (n as f64).ln();
        assert!(r.lhs <= ln_n * (1.0 + 2.0 * ln_n / n as f64));
        assert!(power_sum_check(&[0.5, 0.4], 0.5, 2).is_err());
    }

    #[test]
    fn s_alpha_examples() {
        assert!((s_alpha_closed_form(0.5, 0.5) - 2.414214).abs() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = s_alpha_max(0.5, 0.7, 2000, &mut rng).unwrap();
        assert!((r.geometric - r.closed_form).abs() < 1e-12);
        assert!(r.empirical_max <= r.closed_form + 1e-9);
    }

    #[test]
    fn rn_examples() {
        assert!((rn_bound(0.9) - 1.23751).abs() < 1e-5);
        assert!((rn_bound(1.0 - 1e-12) - 1.0).abs() < 1e-9);
        let r = rn_bound_check(0.4, 1.0 - 1e-12).unwrap();
        assert!((r.r_sum - 1.0).abs() < 1e-9);
        let r = rn_bound_check(0.4, 0.9).unwrap();
        assert!(r.r_sum <= r.bound);
    }

    #[test]
    fn witness_limits() {
        let m = linear(64);
        let near_one = lower_bound_witness(&m, 0.999).unwrap();
        // n^{1-ε} is just above 1, so the window keeps two blocks
        assert_eq!(near_one.k, 63);
        // two almost equal blocks: entropy ln 2
        assert!((near_one.normalized - 2f64.ln() / 64f64.ln()).abs() < 0.01);
        // the single block [b_65, b_64] has ratio exactly 1
        let single = m.first_level()[63] / block_gap(64, 64).powf(m.h);
        assert!((single - 1.0).abs() < 1e-12);
        let g = ConformalMeasure::gauss(16, gauss_dimension(16, 32, 1e-11).unwrap().h, 32).unwrap();
        let w = lower_bound_witness(&g, 0.5).unwrap();
        assert!(w.ratio > 1.0);
    }
}
