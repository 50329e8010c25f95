//! Poincaré-disk geometry and the genus-2 (Bolza) surface group.
//!
//! Points of the hyperbolic plane are complex numbers of modulus < 1, the
//! metric is `4|dz|^2/(1-|z|^2)^2`, and isometries are [`MobiusTransform`]s
//! `z -> (a z + b)/(conj(b) z + conj(a))` with `|a|^2 - |b|^2 = 1`.
//!
//! The surface is the quotient of the disk by the group generated by the four
//! side pairings of the regular octagon with interior angles `pi/4`, centered
//! at the origin. Free homotopy classes of closed curves correspond to
//! conjugacy classes of the group, written as cyclically reduced [`Word`]s in
//! the alphabet `a b c d` (inverses `A B C D`).

use std::collections::{HashMap, VecDeque};
use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{MaglabError, Result};

pub type Complex = Complex64;

/// Hyperbolic inradius of the regular octagon, `arccosh(1 + sqrt 2)`.
pub fn inradius() -> f64 {
    (1.0 + SQRT_2).acosh()
}

/// Hyperbolic circumradius of the regular octagon, `arccosh(3 + 2 sqrt 2)`.
pub fn circumradius() -> f64 {
    (3.0 + 2.0 * SQRT_2).acosh()
}

/// Length of the shortest closed geodesic, `2 arccosh(1 + sqrt 2)`.
pub fn systole() -> f64 {
    2.0 * inradius()
}

/// Default cap on the number of group elements produced by enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 100_000;

fn check_in_disk(z: Complex, what: &str) -> Result<()> {
    if !(z.norm_sqr() < 1.0) {
        return Err(MaglabError::Domain(format!(
            "{what} {z} is not inside the unit disk"
        )));
    }
    Ok(())
}

/// Hyperbolic distance in the disk model.
pub fn hyperbolic_distance(z: Complex, w: Complex) -> Result<f64> {
    check_in_disk(z, "point")?;
    check_in_disk(w, "point")?;
    Ok(distance_unchecked(z, w))
}

/// [`hyperbolic_distance`] without the boundary checks.
#[inline]
pub fn distance_unchecked(z: Complex, w: Complex) -> f64 {
    let num = (z - w).norm();
    let den = (Complex::new(1.0, 0.0) - w.conj() * z).norm();
    2.0 * (num / den).min(1.0).atanh()
}

/// `cosh d(z, w) - 1`, smooth in both points and cheaper than the distance.
#[inline]
pub fn cosh_distance_minus_one(z: Complex, w: Complex) -> f64 {
    2.0 * (z - w).norm_sqr() / ((1.0 - z.norm_sqr()) * (1.0 - w.norm_sqr()))
}

/// An orientation-preserving isometry of the disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobiusTransform {
    pub a: Complex,
    pub b: Complex,
}

impl MobiusTransform {
    pub fn identity() -> Self {
        Self {
            a: Complex::new(1.0, 0.0),
            b: Complex::new(0.0, 0.0),
        }
    }

    pub fn new(a: Complex, b: Complex) -> Self {
        Self { a, b }
    }

    /// The hyperbolic translation taking 0 to `p` along the diameter through `p`.
    pub fn translation_to(p: Complex) -> Self {
        let s = 1.0 / (1.0 - p.norm_sqr()).sqrt();
        Self::new(Complex::new(s, 0.0), p * s)
    }

    pub fn rotation(theta: f64) -> Self {
        Self::new(Complex::from_polar(1.0, theta / 2.0), Complex::new(0.0, 0.0))
    }

    /// `|a|^2 - |b|^2`, equal to 1 for an isometry.
    pub fn determinant(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    pub fn apply(&self, z: Complex) -> Result<Complex> {
        check_in_disk(z, "point")?;
        Ok(self.apply_unchecked(z))
    }

    #[inline]
    pub fn apply_unchecked(&self, z: Complex) -> Complex {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    /// Complex derivative at `z`.
    #[inline]
    pub fn derivative(&self, z: Complex) -> Complex {
        let d = self.b.conj() * z + self.a.conj();
        Complex::new(self.determinant(), 0.0) / (d * d)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MobiusTransform) -> Self {
        Self {
            a: self.a * other.a + self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    /// Trace of the SU(1,1) matrix.
    pub fn trace(&self) -> f64 {
        2.0 * self.a.re
    }

    /// Whether the matrix is `± identity` within `tol` (entrywise).
    pub fn is_plus_minus_identity(&self, tol: f64) -> bool {
        self.b.norm() <= tol && (self.a.im.abs() <= tol) && ((self.a.re.abs() - 1.0).abs() <= tol)
    }

    /// Relative distance between two matrices, insensitive to the overall sign.
    pub fn relative_difference(&self, other: &MobiusTransform) -> f64 {
        let scale = self.a.norm().max(other.a.norm());
        let plus = (self.a - other.a).norm() + (self.b - other.b).norm();
        let minus = (self.a + other.a).norm() + (self.b + other.b).norm();
        plus.min(minus) / scale
    }

    /// Translation length `2 arccosh(|tr|/2)` of a hyperbolic element.
    pub fn translation_length(&self) -> Result<f64> {
        let half = self.a.re.abs();
        if !(half > 1.0) {
            return Err(MaglabError::Domain(format!(
                "element with |trace| = {} is not hyperbolic",
                2.0 * half
            )));
        }
        Ok(2.0 * half.acosh())
    }

    /// Repelling and attracting fixed points on the unit circle.
    pub fn fixed_points(&self) -> Result<(Complex, Complex)> {
        self.translation_length()?;
        let re = self.a.re;
        let root = (re * re - 1.0).sqrt();
        let bc = self.b.conj();
        let attracting = Complex::new(re.signum() * root, self.a.im) / bc;
        let repelling = Complex::new(-re.signum() * root, self.a.im) / bc;
        Ok((repelling / repelling.norm(), attracting / attracting.norm()))
    }

    /// The translation axis: the point of the axis nearest the origin and the
    /// unit direction of translation there.
    pub fn axis(&self) -> Result<(Complex, Complex)> {
        let (rep, att) = self.fixed_points()?;
        let sum = rep + att;
        let diff = att - rep;
        let dir = diff / diff.norm();
        let cos_beta = sum.norm() / 2.0;
        if cos_beta < 1e-15 {
            return Ok((Complex::new(0.0, 0.0), dir));
        }
        let m = sum / sum.norm();
        let sin_beta = (1.0 - cos_beta * cos_beta).max(0.0).sqrt();
        Ok((m * (cos_beta / (1.0 + sin_beta)), dir))
    }
}

/// Point at signed hyperbolic distance `s` from `p` along the geodesic leaving
/// `p` with Euclidean unit direction `u`.
pub fn geodesic_point(p: Complex, u: Complex, s: f64) -> Complex {
    MobiusTransform::translation_to(p).apply_unchecked(u * (s / 2.0).tanh())
}

/// One of the eight letters `a b c d A B C D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(u8);

impl Letter {
    pub const ALL: [Letter; 8] = [
        Letter(0),
        Letter(1),
        Letter(2),
        Letter(3),
        Letter(4),
        Letter(5),
        Letter(6),
        Letter(7),
    ];

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn inverse(self) -> Letter {
        Letter((self.0 + 4) % 8)
    }

    pub fn from_char(c: char) -> Result<Letter> {
        "abcdABCD"
            .find(c)
            .map(|i| Letter(i as u8))
            .ok_or_else(|| MaglabError::Input(format!("invalid letter '{c}' in word")))
    }

    pub fn to_char(self) -> char {
        b"abcdABCD"[self.0 as usize] as char
    }
}

/// A word in the generators; `canonical` marks a cyclically reduced,
/// rotation-minimal representative of its conjugacy class in the free group.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Word {
    letters: Vec<Letter>,
    canonical: bool,
}

impl Word {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_letters(letters: Vec<Letter>) -> Self {
        Self {
            letters,
            canonical: false,
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn inverse(&self) -> Word {
        Word::from_letters(self.letters.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word::from_letters(letters).free_reduce()
    }

    pub fn push(&mut self, l: Letter) {
        if self.letters.last() == Some(&l.inverse()) {
            self.letters.pop();
        } else {
            self.letters.push(l);
        }
        self.canonical = false;
    }

    pub fn power(&self, n: usize) -> Word {
        let mut letters = Vec::with_capacity(self.len() * n);
        for _ in 0..n {
            letters.extend_from_slice(&self.letters);
        }
        Word::from_letters(letters).free_reduce()
    }

    /// Cancels adjacent inverse pairs.
    pub fn free_reduce(&self) -> Word {
        let mut out: Vec<Letter> = Vec::with_capacity(self.letters.len());
        for &l in &self.letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word::from_letters(out)
    }

    /// Cyclic rotation starting at `k`.
    pub fn rotate(&self, k: usize) -> Word {
        let n = self.len();
        if n == 0 {
            return self.clone();
        }
        Word::from_letters((0..n).map(|i| self.letters[(i + k) % n]).collect())
    }

    /// Canonical conjugacy-class representative: freely and cyclically reduced,
    /// then the lexicographically least rotation (order `a<b<c<d<A<B<C<D`).
    pub fn cyclic_reduce(&self) -> Word {
        let mut letters = self.free_reduce().letters;
        let mut start = 0;
        let mut end = letters.len();
        while end - start >= 2 && letters[start] == letters[end - 1].inverse() {
            start += 1;
            end -= 1;
        }
        letters = letters[start..end].to_vec();
        let w = Word::from_letters(letters);
        let best = (0..w.len().max(1))
            .map(|k| w.rotate(k))
            .min_by(|x, y| x.letters.cmp(&y.letters))
            .unwrap_or_default();
        Word {
            letters: best.letters,
            canonical: true,
        }
    }

    /// Whether the word is cyclically reduced (no adjacent or wrap-around
    /// inverse pairs).
    pub fn is_cyclically_reduced(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| n < 2 || self.letters[i] != self.letters[(i + 1) % n].inverse())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = MaglabError;
    fn from_str(s: &str) -> Result<Word> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(Letter::from_char)
            .collect::<Result<Vec<_>>>()
            .map(Word::from_letters)
    }
}

/// A group element together with one word spelling it.
#[derive(Clone, Debug)]
pub struct GroupElement {
    pub word: Word,
    pub matrix: MobiusTransform,
}

impl GroupElement {
    pub fn identity() -> Self {
        Self {
            word: Word::empty(),
            matrix: MobiusTransform::identity(),
        }
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            word: self.word.concat(&other.word),
            matrix: self.matrix.compose(&other.matrix),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            word: self.word.inverse(),
            matrix: self.matrix.inverse(),
        }
    }

    /// Hyperbolic displacement of the origin.
    pub fn displacement(&self) -> f64 {
        distance_unchecked(Complex::new(0.0, 0.0), self.matrix.apply_unchecked(Complex::new(0.0, 0.0)))
    }
}

/// The genus-2 surface group of the regular octagon with opposite sides paired.
#[derive(Clone, Debug)]
pub struct FuchsianGroup {
    letters: [MobiusTransform; 8],
    relator: Word,
    systole: f64,
}

impl FuchsianGroup {
    /// Generators `T_k` with `a = 1 + sqrt 2`, `b = sqrt(2 + 2 sqrt 2) e^{i k pi/4}`,
    /// `k = 0..3`: `T_k` translates by twice the inradius toward the midpoint
    /// of side `k`, mapping the opposite side onto it. The relator is found by
    /// searching the cyclically reduced orderings of the eight letters.
    pub fn standard() -> Result<Self> {
        let a = Complex::new(1.0 + SQRT_2, 0.0);
        let r = (2.0 + 2.0 * SQRT_2).sqrt();
        let mut letters = [MobiusTransform::identity(); 8];
        for k in 0..4 {
            let t = MobiusTransform::new(a, Complex::from_polar(r, k as f64 * FRAC_PI_4));
            letters[k] = t;
            letters[k + 4] = t.inverse();
        }
        let relator = find_relator(&letters).ok_or_else(|| {
            MaglabError::Construction("no side-pairing ordering multiplies to ± identity".into())
        })?;
        Ok(Self {
            letters,
            relator,
            systole: systole(),
        })
    }

    pub fn generator(&self, k: usize) -> MobiusTransform {
        self.letters[k]
    }

    pub fn letter_matrix(&self, l: Letter) -> MobiusTransform {
        self.letters[l.index()]
    }

    pub fn relator(&self) -> &Word {
        &self.relator
    }

    pub fn systole(&self) -> f64 {
        self.systole
    }

    pub fn word_to_matrix(&self, w: &Word) -> MobiusTransform {
        w.letters()
            .iter()
            .fold(MobiusTransform::identity(), |m, &l| m.compose(&self.letters[l.index()]))
    }

    pub fn element(&self, w: &Word) -> GroupElement {
        GroupElement {
            word: w.clone(),
            matrix: self.word_to_matrix(w),
        }
    }

    /// All elements `g` with `d(0, g·0) <= radius`, each once, by breadth-first
    /// search over adjacent octagons.
    pub fn enumerate(&self, radius: f64, cap: usize) -> Result<Vec<GroupElement>> {
        if radius < 0.0 {
            return Err(MaglabError::Input(format!("negative enumeration radius {radius}")));
        }
        // an octagon meeting the ball has its center within radius + circumradius
        let prune = radius + circumradius() + 1e-9;
        let origin = Complex::new(0.0, 0.0);
        let mut seen: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut all: Vec<(GroupElement, Complex, f64)> = Vec::new();
        let mut queue = VecDeque::new();
        let key = |p: Complex| ((p.re * 1e6).round() as i64, (p.im * 1e6).round() as i64);

        let id = GroupElement::identity();
        seen.entry(key(origin)).or_default().push(0);
        all.push((id, origin, 0.0));
        queue.push_back(0usize);

        while let Some(idx) = queue.pop_front() {
            let parent = all[idx].0.clone();
            for l in Letter::ALL {
                if parent.word.letters().last() == Some(&l.inverse()) {
                    continue;
                }
                let matrix = parent.matrix.compose(&self.letters[l.index()]);
                let p = matrix.apply_unchecked(origin);
                let d = distance_unchecked(origin, p);
                if d > prune {
                    continue;
                }
                let k = key(p);
                let duplicate = (-1..=1).any(|dx| {
                    (-1..=1).any(|dy| {
                        seen.get(&(k.0 + dx, k.1 + dy)).is_some_and(|v| {
                            v.iter().any(|&j| distance_unchecked(all[j].1, p) < 1e-6)
                        })
                    })
                });
                if duplicate {
                    continue;
                }
                if all.len() >= cap {
                    return Err(MaglabError::Resource(format!(
                        "group enumeration to radius {radius} exceeds the cap of {cap} elements"
                    )));
                }
                let mut word = parent.word.clone();
                word.push(l);
                seen.entry(k).or_default().push(all.len());
                all.push((GroupElement { word, matrix }, p, d));
                queue.push_back(all.len() - 1);
            }
        }
        Ok(all
            .into_iter()
            .filter(|(_, _, d)| *d <= radius)
            .map(|(g, _, _)| g)
            .collect())
    }

    /// Moves `z` into the octagon (within `buffer` of its Dirichlet sides).
    /// Returns the normalized point `w` and the element `h` with `z = h·w`.
    pub fn normalize_point(&self, z: Complex, buffer: f64) -> Result<(Complex, GroupElement)> {
        check_in_disk(z, "point")?;
        let origin = Complex::new(0.0, 0.0);
        let mut w = z;
        let mut h = GroupElement::identity();
        for _ in 0..10_000 {
            let d0 = distance_unchecked(origin, w);
            let mut best: Option<(Letter, f64)> = None;
            for l in Letter::ALL {
                // d(s·0, w) = d(0, s⁻¹ w)
                let ds = distance_unchecked(self.letters[l.index()].apply_unchecked(origin), w);
                let gain = d0 - ds;
                if gain > buffer && best.is_none_or(|(_, g)| gain > g) {
                    best = Some((l, gain));
                }
            }
            match best {
                None => return Ok((w, h)),
                Some((l, _)) => {
                    w = self.letters[l.inverse().index()].apply_unchecked(w);
                    h.word.push(l);
                    h.matrix = h.matrix.compose(&self.letters[l.index()]);
                }
            }
        }
        Err(MaglabError::Resource(format!("could not normalize {z} into the octagon")))
    }

    /// [`FuchsianGroup::normalize_point`] without tracking the word.
    pub fn normalize_matrix(&self, z: Complex, buffer: f64) -> Result<(Complex, MobiusTransform)> {
        check_in_disk(z, "point")?;
        let origin = Complex::new(0.0, 0.0);
        let mut w = z;
        let mut h = MobiusTransform::identity();
        for _ in 0..10_000 {
            let c0 = cosh_distance_minus_one(origin, w);
            let d0 = c0.acosh_1p();
            let mut best: Option<(usize, f64)> = None;
            for (k, s) in self.letters.iter().enumerate() {
                let cs = cosh_distance_minus_one(s.b / s.a.conj(), w);
                if cs >= c0 {
                    continue;
                }
                let gain = d0 - cs.acosh_1p();
                if gain > buffer && best.is_none_or(|(_, g)| gain > g) {
                    best = Some((k, gain));
                }
            }
            match best {
                None => return Ok((w, h)),
                Some((k, _)) => {
                    w = self.letters[(k + 4) % 8].apply_unchecked(w);
                    h = h.compose(&self.letters[k]);
                }
            }
        }
        Err(MaglabError::Resource(format!("could not normalize {z} into the octagon")))
    }

    /// Whether `w` lies in the octagon enlarged by `buffer`.
    pub fn in_domain(&self, w: Complex, buffer: f64) -> bool {
        let origin = Complex::new(0.0, 0.0);
        let d0 = distance_unchecked(origin, w);
        Letter::ALL.iter().all(|l| {
            d0 - distance_unchecked(self.letters[l.index()].apply_unchecked(origin), w) <= buffer
        })
    }
}

trait AcoshOnePlus {
    fn acosh_1p(self) -> f64;
}

impl AcoshOnePlus for f64 {
    /// `arccosh(1 + self)`, accurate for small arguments.
    #[inline]
    fn acosh_1p(self) -> f64 {
        (self + (self * (self + 2.0)).sqrt()).ln_1p()
    }
}

/// Slack used when normalizing evaluation points into the octagon.
pub const CHART_BUFFER: f64 = 0.1;

/// A point `z` of the disk together with its normalized representative:
/// `z = h·w` with `w` in the (slightly enlarged) octagon.
#[derive(Clone, Copy, Debug)]
pub struct Location {
    pub z: Complex,
    pub w: Complex,
    pub h: MobiusTransform,
    pub trivial: bool,
}

impl Location {
    /// Maps a point of the normalized chart to the chart of `z`.
    #[inline]
    pub fn lift(&self, p: Complex) -> Complex {
        if self.trivial {
            p
        } else {
            self.h.apply_unchecked(p)
        }
    }
}

struct SurfaceInner {
    group: FuchsianGroup,
    neighbors: Vec<GroupElement>,
}

/// Shared handle to the genus-2 surface: its group plus the short elements
/// needed to match nearby translates.
#[derive(Clone)]
pub struct Surface(std::sync::Arc<SurfaceInner>);

impl fmt::Debug for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Surface").field("relator", &self.0.group.relator.to_string()).finish()
    }
}

impl Surface {
    pub fn standard() -> Result<Self> {
        let group = FuchsianGroup::standard()?;
        let neighbors = group.enumerate(2.0 * circumradius() + 1.0, DEFAULT_ENUMERATION_CAP)?;
        Ok(Self(std::sync::Arc::new(SurfaceInner { group, neighbors })))
    }

    pub fn group(&self) -> &FuchsianGroup {
        &self.0.group
    }

    /// Group elements moving the origin by at most twice the circumradius plus one.
    pub fn neighbors(&self) -> &[GroupElement] {
        &self.0.neighbors
    }

    pub fn locate(&self, z: Complex) -> Result<Location> {
        let (w, h) = self.0.group.normalize_matrix(z, CHART_BUFFER)?;
        let trivial = h == MobiusTransform::identity();
        Ok(Location { z, w, h, trivial })
    }

    /// The short element `s` minimizing `d(s·p, q)`, with that distance.
    pub fn nearest_translate(&self, p: Complex, q: Complex) -> (GroupElement, f64) {
        let mut best = (GroupElement::identity(), f64::INFINITY);
        for g in self.neighbors() {
            let d = distance_unchecked(g.matrix.apply_unchecked(p), q);
            if d < best.1 {
                best = (g.clone(), d);
            }
        }
        best
    }
}

fn find_relator(letters: &[MobiusTransform; 8]) -> Option<Word> {
    // permutations of the eight letters beginning with `a`, in lexicographic order
    let mut rest: Vec<u8> = (1..8).collect();
    loop {
        let mut word: Vec<Letter> = vec![Letter(0)];
        word.extend(rest.iter().map(|&i| Letter(i)));
        let w = Word::from_letters(word);
        if w.is_cyclically_reduced() {
            let m = w
                .letters()
                .iter()
                .fold(MobiusTransform::identity(), |m, &l| m.compose(&letters[l.index()]));
            if m.is_plus_minus_identity(1e-10) {
                return Some(w);
            }
        }
        if !next_permutation(&mut rest) {
            return None;
        }
    }
}

fn next_permutation(v: &mut [u8]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, rmax: f64) -> Complex {
        let r = rmax * rng.random::<f64>().sqrt();
        Complex::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
    }

    fn random_isometry(rng: &mut ChaCha8Rng) -> MobiusTransform {
        MobiusTransform::translation_to(random_point(rng, 0.8))
            .compose(&MobiusTransform::rotation(rng.random_range(0.0..6.3)))
    }

    #[test]
    fn distance_basics() {
        let o = Complex::new(0.0, 0.0);
        assert_eq!(hyperbolic_distance(o, o).unwrap(), 0.0);
        for r in [0.1, 0.5, 0.9, 0.999] {
            assert_relative_eq!(
                hyperbolic_distance(o, Complex::new(r, 0.0)).unwrap(),
                2.0 * f64::atanh(r),
                max_relative = 1e-12
            );
        }
        assert!(hyperbolic_distance(o, Complex::new(1.0, 0.0)).is_err());
        // cosh formula
        let (z, w) = (Complex::new(0.3, -0.2), Complex::new(-0.5, 0.4));
        let d = hyperbolic_distance(z, w).unwrap();
        assert_relative_eq!(d.cosh() - 1.0, cosh_distance_minus_one(z, w), max_relative = 1e-12);
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (x, y, z) = (
                random_point(&mut rng, 0.95),
                random_point(&mut rng, 0.95),
                random_point(&mut rng, 0.95),
            );
            let dxy = distance_unchecked(x, y);
            let dyz = distance_unchecked(y, z);
            let dxz = distance_unchecked(x, z);
            assert!(dxz <= dxy + dyz + 1e-12);
            assert_relative_eq!(dxy, distance_unchecked(y, x), epsilon = 1e-12);
        }
    }

    #[test]
    fn mobius_is_an_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let id = MobiusTransform::identity();
        let z = Complex::new(0.3, 0.1);
        assert_eq!(id.apply(z).unwrap(), z);
        assert!(id.apply(Complex::new(0.0, 1.0)).is_err());
        for _ in 0..200 {
            let t = random_isometry(&mut rng);
            assert!((t.determinant() - 1.0).abs() < 1e-12);
            let (z, w) = (random_point(&mut rng, 0.7), random_point(&mut rng, 0.7));
            let d = distance_unchecked(z, w);
            assert!((distance_unchecked(t.apply_unchecked(z), t.apply_unchecked(w)) - d).abs() < 1e-12);
            let tt = t.compose(&t.inverse());
            assert!(tt.is_plus_minus_identity(1e-12));
        }
    }

    #[test]
    fn mobius_composition_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (p, q, r) = (random_isometry(&mut rng), random_isometry(&mut rng), random_isometry(&mut rng));
            let left = p.compose(&q).compose(&r);
            let right = p.compose(&q.compose(&r));
            assert!(left.relative_difference(&right) < 1e-12);
        }
    }

    #[test]
    fn standard_group_invariants() {
        let g = FuchsianGroup::standard().unwrap();
        let expected_trace = 2.0 * (1.0 + SQRT_2);
        for k in 0..4 {
            let t = g.generator(k);
            assert!((t.trace().abs() - expected_trace).abs() < 1e-10);
            assert!((t.determinant() - 1.0).abs() < 1e-12);
            assert_relative_eq!(t.translation_length().unwrap(), 3.057141838961996, epsilon = 1e-12);
            // generator moves the origin by exactly its translation length
            let d = hyperbolic_distance(Complex::new(0.0, 0.0), t.apply_unchecked(Complex::new(0.0, 0.0))).unwrap();
            assert!((d - 2.0 * (1.0 + SQRT_2).acosh()).abs() < 1e-10);
        }
        assert!(g.word_to_matrix(g.relator()).is_plus_minus_identity(1e-10));
        assert!(g.relator().is_cyclically_reduced());
        assert_eq!(g.relator().len(), 8);
        assert!((g.systole() - 2.0 * (1.0 + SQRT_2).acosh()).abs() < 1e-8);
    }

    #[test]
    fn word_matrix_homomorphism() {
        let g = FuchsianGroup::standard().unwrap();
        let aa: Word = "aA".parse().unwrap();
        assert!(g.word_to_matrix(&aa).is_plus_minus_identity(1e-12));
        assert!(g.word_to_matrix(&Word::empty()).is_plus_minus_identity(0.0));
        let ab: Word = "ab".parse().unwrap();
        let prod = g
            .word_to_matrix(&"a".parse().unwrap())
            .compose(&g.word_to_matrix(&"b".parse().unwrap()));
        assert!(g.word_to_matrix(&ab).relative_difference(&prod) < 1e-12);
        assert!(g.word_to_matrix(&ab).trace().abs() > 2.0);
        assert!("ax".parse::<Word>().is_err());
    }

    #[test]
    fn translation_length_properties() {
        let g = FuchsianGroup::standard().unwrap();
        let t = g.generator(1);
        let l = t.translation_length().unwrap();
        assert!((t.compose(&t).translation_length().unwrap() - 2.0 * l).abs() < 1e-10);
        assert!(MobiusTransform::identity().translation_length().is_err());
    }

    #[test]
    fn axis_is_invariant() {
        let g = FuchsianGroup::standard().unwrap();
        for w in ["a", "ab", "aCbD", "abc"] {
            let m = g.word_to_matrix(&w.parse().unwrap());
            let (p, u) = m.axis().unwrap();
            let l = m.translation_length().unwrap();
            let image = m.apply_unchecked(p);
            let expected = geodesic_point(p, u, l);
            assert!((image - expected).norm() < 1e-10, "{w}: {image} vs {expected}");
        }
    }

    #[test]
    fn cyclic_reduction_examples() {
        let w = |s: &str| s.parse::<Word>().unwrap();
        assert_eq!(w("aBAb").cyclic_reduce().to_string(), "aBAb");
        assert_eq!(w("b a B").cyclic_reduce().to_string(), "a");
        assert_eq!(w("aA b").cyclic_reduce().to_string(), "b");
        assert!(w("abA").cyclic_reduce().is_canonical());
        assert_eq!(w("aA").cyclic_reduce().len(), 0);
    }

    #[test]
    fn enumeration_examples() {
        let g = FuchsianGroup::standard().unwrap();
        let zero = g.enumerate(0.0, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(zero.len(), 1);
        let small = g.enumerate(3.1, DEFAULT_ENUMERATION_CAP).unwrap();
        for l in Letter::ALL {
            let m = g.letter_matrix(l);
            assert!(small.iter().any(|e| e.matrix.relative_difference(&m) < 1e-12));
        }
        let big = g.enumerate(6.0, DEFAULT_ENUMERATION_CAP).unwrap();
        // closed under inversion, nested
        for e in &big {
            let inv = e.matrix.inverse();
            assert!(big.iter().any(|f| f.matrix.relative_difference(&inv) < 1e-9));
        }
        for e in &small {
            assert!(big.iter().any(|f| f.matrix.relative_difference(&e.matrix) < 1e-9));
        }
        // no duplicates: orbit points are separated by at least the systole
        for (i, e) in big.iter().enumerate() {
            let p = e.matrix.apply_unchecked(Complex::new(0.0, 0.0));
            for f in &big[i + 1..] {
                let q = f.matrix.apply_unchecked(Complex::new(0.0, 0.0));
                assert!(distance_unchecked(p, q) > systole() - 1e-9);
            }
        }
        assert!(g.enumerate(30.0, 1000).is_err());
    }

    #[test]
    fn normalization() {
        let g = FuchsianGroup::standard().unwrap();
        let p = Complex::new(0.2, -0.1);
        let (w, h) = g.normalize_point(p, 1e-9).unwrap();
        assert_eq!(w, p);
        assert!(h.word.is_empty());
        for l in Letter::ALL {
            let moved = g.letter_matrix(l).apply_unchecked(p);
            let (w, h) = g.normalize_point(moved, 1e-9).unwrap();
            assert!((w - p).norm() < 1e-12);
            assert_eq!(h.word.letters(), &[l]);
            let (w2, h2) = g.normalize_point(w, 1e-9).unwrap();
            assert_eq!(w2, w);
            assert!(h2.word.is_empty());
        }
    }
}
