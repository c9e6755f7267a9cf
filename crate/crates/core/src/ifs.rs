//! Branch maps, words, cylinders and symbolic coding for the Gauss system
//! `g_k(x) = 1/(x + k)` and its piecewise-affine analogue
//! `g_k(x) = -x/(k(k+1)) + 1/k`.
//!
//! Both families map `[0,1]` onto `[1/(k+1), 1/k]`, are strictly decreasing,
//! and have rational coefficients, so everything here is generic over
//! [`Scalar`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SystemKind {
    LinearGauss,
    Gauss,
}

impl SystemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemKind::LinearGauss => "linear",
            SystemKind::Gauss => "gauss",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "lineargauss" | "linear-gauss" => Ok(SystemKind::LinearGauss),
            "gauss" => Ok(SystemKind::Gauss),
            other => Err(Error::domain(format!("unknown system kind '{other}'"))),
        }
    }
}

/// Address of a cylinder: `g_w = g_{w_1} ∘ … ∘ g_{w_m}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    symbols: Vec<u64>,
}

impl Word {
    pub fn new(symbols: Vec<u64>) -> Result<Self> {
        if symbols.iter().any(|&k| k == 0) {
            return Err(Error::domain("branch indices start at 1"));
        }
        Ok(Word { symbols })
    }

    /// A word over the alphabet `{1, …, n}` of the truncated system.
    pub fn bounded(symbols: Vec<u64>, n: u64) -> Result<Self> {
        let w = Word::new(symbols)?;
        w.check_bound(n)?;
        Ok(w)
    }

    pub fn empty() -> Self {
        Word::default()
    }

    pub fn repeated(k: u64, len: usize) -> Result<Self> {
        Word::new(vec![k; len])
    }

    pub fn symbols(&self) -> &[u64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn check_bound(&self, n: u64) -> Result<()> {
        match self.symbols.iter().find(|&&k| k > n) {
            Some(k) => Err(Error::domain(format!("symbol {k} exceeds the system size {n}"))),
            None => Ok(()),
        }
    }

    /// `self` followed by `k`.
    pub fn child(&self, k: u64) -> Result<Word> {
        if k == 0 {
            return Err(Error::domain("branch indices start at 1"));
        }
        let mut symbols = self.symbols.clone();
        symbols.push(k);
        Ok(Word { symbols })
    }

    pub fn concat(&self, tail: &Word) -> Word {
        let mut symbols = self.symbols.clone();
        symbols.extend_from_slice(&tail.symbols);
        Word { symbols }
    }

    /// Branch maps reverse orientation, so `g_w` preserves it iff `|w|` is even.
    pub fn preserves_orientation(&self) -> bool {
        self.symbols.len() % 2 == 0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.symbols.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// How an interval was produced.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    /// `g_w([0,1])`
    CylinderImage(Word),
    /// `[b_{l+1}, b_k]`, the union of `Δ_k, …, Δ_l`
    BlockEndpoints { k: u64, l: u64 },
    /// `g_w([b_{l+1}, b_k])`
    BlockImage { word: Word, k: u64, l: u64 },
    /// m-th piece of the prefix decomposition of `[0, r]`
    PrefixPiece(usize),
    Raw,
}

/// Closed subinterval of `[0,1]`, possibly a single point.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalX<T> {
    pub lo: T,
    pub hi: T,
    pub provenance: Provenance,
}

impl<T: Scalar> IntervalX<T> {
    pub fn new(lo: T, hi: T, provenance: Provenance) -> Result<Self> {
        if !(T::zero() <= lo && lo <= hi && hi <= T::one()) {
            return Err(Error::domain(format!(
                "[{}, {}] is not a closed subinterval of [0,1]",
                lo.as_f64(),
                hi.as_f64()
            )));
        }
        Ok(IntervalX { lo, hi, provenance })
    }

    pub fn raw(lo: T, hi: T) -> Result<Self> {
        IntervalX::new(lo, hi, Provenance::Raw)
    }

    /// Interval spanned by two points in either order.
    pub fn spanning(a: T, b: T, provenance: Provenance) -> Result<Self> {
        if a <= b {
            IntervalX::new(a, b, provenance)
        } else {
            IntervalX::new(b, a, provenance)
        }
    }

    pub fn diameter(&self) -> T {
        self.hi.clone() - self.lo.clone()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &T) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn contains_interval(&self, other: &IntervalX<T>) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn to_f64(&self) -> IntervalX<f64> {
        IntervalX {
            lo: self.lo.as_f64(),
            hi: self.hi.as_f64(),
            provenance: self.provenance.clone(),
        }
    }
}

/// `b_k = 1/k = g_k(0)`.
pub fn block_endpoint<T: Scalar>(k: u64) -> T {
    T::from_u64(k).recip()
}

/// `a_k = b_k - b_{k+1} = 1/(k(k+1))`, the length of `Δ_k` and the
/// contraction ratio of the affine branch `g_k`.
pub fn block_length<T: Scalar>(k: u64) -> T {
    (T::from_u64(k) * T::from_u64(k + 1)).recip()
}

fn check_branch(k: u64) -> Result<()> {
    if k == 0 {
        Err(Error::domain("branch index must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_unit<T: Scalar>(x: &T) -> Result<()> {
    if T::zero() <= *x && *x <= T::one() {
        Ok(())
    } else {
        Err(Error::domain(format!("{} is outside [0,1]", x.as_f64())))
    }
}

#[inline]
pub(crate) fn branch<T: Scalar>(kind: SystemKind, k: u64, x: &T) -> T {
    let kk = T::from_u64(k);
    match kind {
        SystemKind::Gauss => (x.clone() + kk).recip(),
        SystemKind::LinearGauss => kk.recip() - x.clone() * block_length::<T>(k),
    }
}

#[inline]
pub(crate) fn branch_slope<T: Scalar>(kind: SystemKind, k: u64, x: &T) -> T {
    match kind {
        SystemKind::Gauss => {
            let d = x.clone() + T::from_u64(k);
            (d.clone() * d).recip()
        }
        SystemKind::LinearGauss => block_length(k),
    }
}

/// Expanding inverse `f_k` of `g_k`, mapping `Δ_k` onto `[0,1]`.
#[inline]
pub(crate) fn expand<T: Scalar>(kind: SystemKind, k: u64, y: &T) -> T {
    let kk = T::from_u64(k);
    match kind {
        SystemKind::Gauss => y.recip() - kk,
        SystemKind::LinearGauss => kk.clone() + T::one() - y.clone() * kk.clone() * (kk + T::one()),
    }
}

pub fn apply_branch<T: Scalar>(kind: SystemKind, k: u64, x: &T) -> Result<T> {
    check_branch(k)?;
    check_unit(x)?;
    Ok(branch(kind, k, x))
}

pub fn branch_derivative_abs<T: Scalar>(kind: SystemKind, k: u64, x: &T) -> Result<T> {
    check_branch(k)?;
    check_unit(x)?;
    Ok(branch_slope(kind, k, x))
}

pub(crate) fn word_image<T: Scalar>(kind: SystemKind, w: &Word, x: &T) -> T {
    w.symbols
        .iter()
        .rev()
        .fold(x.clone(), |y, &k| branch(kind, k, &y))
}

pub(crate) fn word_slope<T: Scalar>(kind: SystemKind, w: &Word, x: &T) -> T {
    let mut y = x.clone();
    let mut d = T::one();
    for &k in w.symbols.iter().rev() {
        d = d * branch_slope(kind, k, &y);
        y = branch(kind, k, &y);
    }
    d
}

pub fn apply_word<T: Scalar>(kind: SystemKind, w: &Word, x: &T) -> Result<T> {
    check_unit(x)?;
    Ok(word_image(kind, w, x))
}

/// `|g_w'(x)|` by the chain rule along the orbit of `x`.
pub fn word_derivative_abs<T: Scalar>(kind: SystemKind, w: &Word, x: &T) -> Result<T> {
    check_unit(x)?;
    Ok(word_slope(kind, w, x))
}

/// `g_w([0,1])` with both images of the unit endpoints retained.
#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder<T> {
    pub word: Word,
    pub image_of_zero: T,
    pub image_of_one: T,
}

impl<T: Scalar> Cylinder<T> {
    pub fn interval(&self) -> IntervalX<T> {
        let (lo, hi) = if self.word.preserves_orientation() {
            (self.image_of_zero.clone(), self.image_of_one.clone())
        } else {
            (self.image_of_one.clone(), self.image_of_zero.clone())
        };
        IntervalX {
            lo,
            hi,
            provenance: Provenance::CylinderImage(self.word.clone()),
        }
    }
}

pub fn cylinder<T: Scalar>(kind: SystemKind, w: &Word) -> Cylinder<T> {
    Cylinder {
        word: w.clone(),
        image_of_zero: word_image(kind, w, &T::zero()),
        image_of_one: word_image(kind, w, &T::one()),
    }
}

pub fn cylinder_interval<T: Scalar>(kind: SystemKind, w: &Word) -> IntervalX<T> {
    cylinder(kind, w).interval()
}

/// `g_w([b_{l+1}, b_k])`.
pub fn block_image<T: Scalar>(kind: SystemKind, w: &Word, k: u64, l: u64) -> Result<IntervalX<T>> {
    if k == 0 || k > l {
        return Err(Error::domain(format!("block [b_{{{}}}, b_{k}] needs 1 <= k <= l", l + 1)));
    }
    let a = word_image(kind, w, &block_endpoint::<T>(k));
    let b = word_image(kind, w, &block_endpoint::<T>(l + 1));
    let provenance = if w.is_empty() {
        Provenance::BlockEndpoints { k, l }
    } else {
        Provenance::BlockImage { word: w.clone(), k, l }
    };
    IntervalX::spanning(a, b, provenance)
}

/// Digits of a point under the expanding map.
#[derive(Clone, Debug, PartialEq)]
pub struct Coding {
    pub word: Word,
    /// The orbit landed on a cylinder endpoint before the requested depth;
    /// `word` holds the digits read up to that point.
    pub endpoint_hit: bool,
}

/// Reads the first digit of `y ∈ (0,1]`. Returns `(k, exact)` where `exact`
/// means `y = b_k` is a cylinder endpoint.
fn leading_digit<T: Scalar>(y: &T) -> Result<(u64, bool)> {
    let inv = y.recip();
    let d = inv
        .floor_u64()
        .ok_or_else(|| Error::domain(format!("digit of {} does not fit in 64 bits", y.as_f64())))?;
    if d == 0 {
        // y > 1 from rounding; treat as the endpoint 1 = b_1
        return Ok((1, true));
    }
    Ok((d, inv == T::from_u64(d)))
}

/// Continued-fraction style digits: `k = floor(1/y)` at each step, so that
/// `y ∈ Δ_k`. Once the orbit reaches `0` no further digit exists.
pub fn cf_encode<T: Scalar>(kind: SystemKind, x: &T, depth: usize) -> Result<Coding> {
    if !(T::zero() < *x && *x < T::one()) {
        return Err(Error::domain(format!("{} is not in (0,1)", x.as_f64())));
    }
    let mut digits = Vec::with_capacity(depth);
    let mut y = x.clone();
    for _ in 0..depth {
        if y <= T::zero() {
            return Ok(Coding { word: Word { symbols: digits }, endpoint_hit: true });
        }
        let (d, _) = leading_digit(&y)?;
        digits.push(d);
        y = if y > T::one() { T::zero() } else { expand(kind, d, &y) };
    }
    Ok(Coding { word: Word { symbols: digits }, endpoint_hit: false })
}

/// `[0, r]` written as adjacent pieces `I_1, I_2, …` where `I_m` is a union of
/// generation-`m` cylinders of the full system, plus the cylinder that still
/// contains `r` after the last piece.
#[derive(Clone, Debug)]
pub struct PrefixDecomposition<T> {
    pub r: T,
    pub pieces: Vec<IntervalX<T>>,
    /// `None` once `r` has been hit exactly.
    pub remainder: Option<IntervalX<T>>,
}

impl<T: Scalar> PrefixDecomposition<T> {
    pub fn is_complete(&self) -> bool {
        self.remainder.is_none()
    }

    /// `w_m = |I_m| / r`.
    pub fn weights(&self) -> Vec<f64> {
        let r = self.r.as_f64();
        self.pieces.iter().map(|p| p.diameter().as_f64() / r).collect()
    }
}

pub fn decompose_prefix<T: Scalar>(
    kind: SystemKind,
    r: &T,
    max_depth: usize,
) -> Result<PrefixDecomposition<T>> {
    if !(T::zero() < *r && *r <= T::one()) {
        return Err(Error::domain(format!("r = {} is not in (0,1]", r.as_f64())));
    }
    if max_depth == 0 {
        return Err(Error::domain("max_depth must be positive"));
    }
    let mut parent = Word::empty();
    let mut y = r.clone();
    let mut pieces = Vec::new();
    let mut remainder = None;

    for m in 1..=max_depth {
        let increasing = parent.preserves_orientation();
        let left = if increasing {
            word_image(kind, &parent, &T::zero())
        } else {
            word_image(kind, &parent, &T::one())
        };
        let piece_at = |hi: T| IntervalX::new(left.clone(), hi, Provenance::PrefixPiece(m));

        if y <= T::zero() {
            // r = g_parent(0), only reachable through rounding
            let end = if increasing { left.clone() } else { word_image(kind, &parent, &T::zero()) };
            pieces.push(piece_at(end)?);
            remainder = None;
            break;
        }
        let (d, exact) = leading_digit(&y)?;
        let end = if exact || !increasing {
            word_image(kind, &parent, &block_endpoint::<T>(d))
        } else {
            word_image(kind, &parent, &block_endpoint::<T>(d + 1))
        };
        pieces.push(piece_at(end)?);
        if exact {
            remainder = None;
            break;
        }
        parent = parent.child(d)?;
        remainder = Some(cylinder_interval(kind, &parent));
        y = expand(kind, d, &y);
    }
    Ok(PrefixDecomposition { r: r.clone(), pieces, remainder })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn branch_examples() {
        assert_eq!(apply_branch(SystemKind::LinearGauss, 1, &q(0, 1)).unwrap(), q(1, 1));
        assert_eq!(apply_branch(SystemKind::Gauss, 2, &q(1, 1)).unwrap(), q(1, 3));
        assert_eq!(apply_branch(SystemKind::LinearGauss, 2, &q(1, 2)).unwrap(), q(5, 12));
        assert!(apply_branch(SystemKind::Gauss, 0, &0.5).is_err());
        assert!(apply_branch(SystemKind::Gauss, 1, &1.5).is_err());
    }

    #[test]
    fn derivative_examples() {
        for x in [q(0, 1), q(1, 3), q(1, 1)] {
            assert_eq!(branch_derivative_abs(SystemKind::LinearGauss, 3, &x).unwrap(), q(1, 12));
        }
        assert_eq!(branch_derivative_abs(SystemKind::Gauss, 1, &q(0, 1)).unwrap(), q(1, 1));
        assert_eq!(branch_derivative_abs(SystemKind::Gauss, 2, &q(1, 1)).unwrap(), q(1, 9));
    }

    #[test]
    fn word_examples() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let w = Word::repeated(1, 40).unwrap();
        let y = apply_word(SystemKind::Gauss, &w, &0.5).unwrap();
        assert!((y - golden).abs() < 1e-12);

        let w = Word::new(vec![1, 1]).unwrap();
        assert_eq!(apply_word(SystemKind::LinearGauss, &w, &q(0, 1)).unwrap(), q(1, 2));
        assert_eq!(apply_word(SystemKind::LinearGauss, &w, &q(1, 1)).unwrap(), q(3, 4));

        for kind in [SystemKind::Gauss, SystemKind::LinearGauss] {
            assert_eq!(apply_word(kind, &Word::empty(), &0.37).unwrap(), 0.37);
            assert_eq!(word_derivative_abs(kind, &Word::empty(), &0.37).unwrap(), 1.0);
        }
    }

    #[test]
    fn cylinder_examples() {
        let c = cylinder_interval::<Rational>(SystemKind::LinearGauss, &Word::new(vec![2]).unwrap());
        assert_eq!((c.lo, c.hi), (q(1, 3), q(1, 2)));
        let c = cylinder_interval::<Rational>(SystemKind::Gauss, &Word::new(vec![1, 2]).unwrap());
        assert_eq!((c.lo, c.hi), (q(2, 3), q(3, 4)));
        let c = cylinder_interval::<Rational>(SystemKind::LinearGauss, &Word::new(vec![1, 1]).unwrap());
        assert_eq!((c.lo, c.hi), (q(1, 2), q(3, 4)));
    }

    #[test]
    fn coding_examples() {
        let c = cf_encode(SystemKind::Gauss, &0.7, 3).unwrap();
        assert_eq!(c.word.symbols(), &[1, 2, 3]);
        // 7/10 = [1,2,3] exactly, so a fourth digit does not exist
        let c = cf_encode(SystemKind::Gauss, &q(7, 10), 3).unwrap();
        assert_eq!(c.word.symbols(), &[1, 2, 3]);
        assert!(!c.endpoint_hit);
        let c = cf_encode(SystemKind::Gauss, &q(7, 10), 4).unwrap();
        assert!(c.endpoint_hit);
        assert_eq!(c.word.symbols(), &[1, 2, 3]);

        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let c = cf_encode(SystemKind::Gauss, &golden, 5).unwrap();
        assert_eq!(c.word.symbols(), &[1, 1, 1, 1, 1]);

        let c = cf_encode(SystemKind::LinearGauss, &0.4, 1).unwrap();
        assert_eq!(c.word.symbols(), &[2]);
        assert!(cf_encode(SystemKind::Gauss, &0.0, 3).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let d = decompose_prefix(SystemKind::LinearGauss, &q(1, 3), 5).unwrap();
        assert_eq!(d.pieces.len(), 1);
        assert_eq!((d.pieces[0].lo.clone(), d.pieces[0].hi.clone()), (q(0, 1), q(1, 3)));
        assert!(d.is_complete());

        let d = decompose_prefix(SystemKind::LinearGauss, &q(2, 5), 2).unwrap();
        assert_eq!(d.pieces.len(), 2);
        assert_eq!((d.pieces[0].lo.clone(), d.pieces[0].hi.clone()), (q(0, 1), q(1, 3)));
        assert!(d.pieces[1].is_degenerate());
        assert_eq!(d.pieces[1].lo, q(1, 3));
        let rem = d.remainder.unwrap();
        assert_eq!((rem.lo, rem.hi), (q(1, 3), q(5, 12)));

        let d = decompose_prefix(SystemKind::Gauss, &1.0, 1).unwrap();
        assert_eq!((d.pieces[0].lo, d.pieces[0].hi), (0.0, 1.0));
        assert!(d.is_complete());

        assert!(decompose_prefix(SystemKind::Gauss, &0.0, 3).is_err());
        assert!(decompose_prefix(SystemKind::Gauss, &1.5, 3).is_err());
    }

    #[test]
    fn endpoint_table() {
        let mut total = q(0, 1);
        for k in 1..=20u64 {
            let a: Rational = block_length(k);
            assert_eq!(a, block_endpoint::<Rational>(k) - block_endpoint::<Rational>(k + 1));
            assert!(block_endpoint::<Rational>(k + 1) < block_endpoint::<Rational>(k));
            total = total + a;
        }
        assert_eq!(total, q(1, 1) - q(1, 21));
    }

    #[test]
    fn block_image_orientation() {
        let w = Word::new(vec![3]).unwrap();
        let f = block_image::<f64>(SystemKind::Gauss, &w, 1, 4).unwrap();
        assert!(f.lo < f.hi);
        let c = cylinder_interval::<f64>(SystemKind::Gauss, &w);
        assert!(c.contains_interval(&f));
        assert!(block_image::<f64>(SystemKind::Gauss, &w, 3, 2).is_err());
    }
}
