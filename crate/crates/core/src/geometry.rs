//! Upper half-plane geometry and the concrete rank-2 free Fuchsian group.
//!
//! The group is generated by the parabolic matrices [[1,2],[0,1]] and
//! [[1,0],[2,1]] (a thrice-punctured sphere of area 2*pi with cusps at
//! infinity, 0 and +-1). The fundamental domain is the ideal quadrilateral
//! {|x| < 1, |2z+1| > 1, |2z-1| > 1}.

use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// A point x + iy of the upper half-plane (y > 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn new(x: f64, y: f64) -> Self {
        assert!(y > 0.0, "half-plane point needs y > 0, got y={y}");
        PlanePoint { x, y }
    }
}

/// cosh of the hyperbolic distance; cheaper than the distance itself and
/// monotone in it, so range tests compare cosh values directly.
pub fn cosh_dist(z: PlanePoint, w: PlanePoint) -> f64 {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    1.0 + (dx * dx + dy * dy) / (2.0 * z.y * w.y)
}

/// Hyperbolic distance arccosh(1 + |z-w|^2 / (2 Im z Im w)).
pub fn hyp_dist(z: PlanePoint, w: PlanePoint) -> f64 {
    cosh_dist(z, w).acosh()
}

/// Real unit-determinant 2x2 matrix acting by Moebius transformations.
/// `m` and `-m` represent the same isometry; products are renormalized to
/// determinant one and a canonical sign to control drift on long words.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub const DET_TOL: f64 = 1e-12;

impl MoebiusMatrix {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        let m = MoebiusMatrix { a, b, c, d };
        assert!(
            (m.det() - 1.0).abs() < 1e-9,
            "matrix determinant {} too far from 1",
            m.det()
        );
        m.normalized()
    }

    pub fn identity() -> Self {
        MoebiusMatrix { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Rescales to determinant exactly one and fixes the PSL(2,R) sign.
    pub fn normalized(mut self) -> Self {
        let det = self.det();
        assert!(det > 0.0, "cannot normalize matrix with det {det}");
        let s = det.sqrt();
        self.a /= s;
        self.b /= s;
        self.c /= s;
        self.d /= s;
        if self.a < 0.0 || (self.a == 0.0 && self.b < 0.0) {
            self.a = -self.a;
            self.b = -self.b;
            self.c = -self.c;
            self.d = -self.d;
        }
        self
    }

    pub fn mul(&self, rhs: &MoebiusMatrix) -> Self {
        MoebiusMatrix {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
        .normalized()
    }

    pub fn inverse(&self) -> Self {
        MoebiusMatrix { a: self.d, b: -self.b, c: -self.c, d: self.a }.normalized()
    }

    /// Applies (az+b)/(cz+d). The image height is y/|cz+d|^2, so it stays
    /// positive for any determinant-one matrix.
    pub fn apply(&self, z: PlanePoint) -> PlanePoint {
        let re_den = self.c * z.x + self.d;
        let im_den = self.c * z.y;
        let norm = re_den * re_den + im_den * im_den;
        let re_num = self.a * z.x + self.b;
        let im_num = self.a * z.y;
        PlanePoint {
            x: (re_num * re_den + im_num * im_den) / norm,
            y: z.y / norm,
        }
    }

    /// Max entrywise difference, up to the PSL sign ambiguity.
    pub fn entry_distance(&self, other: &MoebiusMatrix) -> f64 {
        let d1 = (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs());
        let d2 = (self.a + other.a)
            .abs()
            .max((self.b + other.b).abs())
            .max((self.c + other.c).abs())
            .max((self.d + other.d).abs());
        d1.min(d2)
    }
}

/// A reduced word over the free generators together with its cached matrix.
/// Letters are signed generator indices: +k for gamma_k, -k for its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub word: Vec<i8>,
    pub matrix: MoebiusMatrix,
}

impl GroupElement {
    pub fn identity() -> Self {
        GroupElement { word: Vec::new(), matrix: MoebiusMatrix::identity() }
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    pub fn inverse(&self) -> Self {
        let word: Vec<i8> = self.word.iter().rev().map(|&l| -l).collect();
        GroupElement { word, matrix: self.matrix.inverse() }
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }
}

/// Free reduction: cancels adjacent letter/inverse pairs.
pub fn reduce_word(word: &[i8]) -> Vec<i8> {
    let mut out: Vec<i8> = Vec::with_capacity(word.len());
    for &l in word {
        assert!(l != 0, "letter 0 is not a generator index");
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// All reduced words of length <= max_len over d generators, in BFS order.
/// Used for ball counts with d other than 2; matrices are not attached.
pub fn reduced_words(d: usize, max_len: usize) -> Vec<Vec<i8>> {
    let letters: Vec<i8> = (1..=d as i8).flat_map(|k| [k, -k]).collect();
    let mut out: Vec<Vec<i8>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<i8>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * (2 * d - 1));
        for w in &frontier {
            for &l in &letters {
                if w.last() == Some(&-l) {
                    continue;
                }
                let mut v = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Closed-form count of reduced words of length <= l over d >= 2 generators.
pub fn ball_count(d: usize, l: usize) -> usize {
    if l == 0 {
        return 1;
    }
    let q = 2 * d - 1;
    1 + 2 * d * (q.pow(l as u32) - 1) / (q - 1)
}

/// Location of a cusp on the boundary circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CuspLocation {
    Infinity,
    Real(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cusp {
    pub location: CuspLocation,
    pub width: f64,
}

/// The concrete group, its fundamental domain, and the cusp data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub generators: [MoebiusMatrix; 2],
    pub cusps: Vec<Cusp>,
    /// Normalized horocycle height below which the compact part lives.
    pub height_cut: f64,
}

impl DomainSpec {
    /// The standard rank-2 setup: generators [[1,2],[0,1]] and [[1,0],[2,1]],
    /// cusps at infinity, 0, and +-1 (one class), each of width 2.
    pub fn gamma2(height_cut: f64) -> Self {
        assert!(height_cut > 1.0, "height cutoff must exceed 1");
        DomainSpec {
            generators: [
                MoebiusMatrix::new(1.0, 2.0, 0.0, 1.0),
                MoebiusMatrix::new(1.0, 0.0, 2.0, 1.0),
            ],
            cusps: vec![
                Cusp { location: CuspLocation::Infinity, width: 2.0 },
                Cusp { location: CuspLocation::Real(0.0), width: 2.0 },
                Cusp { location: CuspLocation::Real(1.0), width: 2.0 },
                Cusp { location: CuspLocation::Real(-1.0), width: 2.0 },
            ],
            height_cut,
        }
    }

    /// Hyperbolic area of the fundamental domain (Gauss-Bonnet, chi = -1).
    pub fn area(&self) -> f64 {
        2.0 * std::f64::consts::PI
    }

    pub fn generator(&self, letter: i8) -> MoebiusMatrix {
        let idx = (letter.unsigned_abs() as usize) - 1;
        assert!(idx < 2, "letter {letter} out of range");
        if letter > 0 {
            self.generators[idx]
        } else {
            self.generators[idx].inverse()
        }
    }

    /// Builds the group element for a (not necessarily reduced) word.
    pub fn element(&self, word: &[i8]) -> GroupElement {
        let reduced = reduce_word(word);
        let mut matrix = MoebiusMatrix::identity();
        for &l in &reduced {
            matrix = matrix.mul(&self.generator(l));
        }
        GroupElement { word: reduced, matrix }
    }

    /// Membership in the ideal quadrilateral, half-open convention: the left
    /// vertical side and the left circle boundary are included.
    pub fn in_domain(&self, z: PlanePoint) -> bool {
        let left_circle = (2.0 * z.x + 1.0).powi(2) + 4.0 * z.y * z.y;
        let right_circle = (2.0 * z.x - 1.0).powi(2) + 4.0 * z.y * z.y;
        z.x >= -1.0 && z.x < 1.0 && left_circle >= 1.0 && right_circle > 1.0
    }

    /// Normalized horocycle height of `z` seen from cusp `i`: the imaginary
    /// part after mapping the cusp to infinity with width normalized to 2.
    pub fn cusp_height(&self, z: PlanePoint, i: usize) -> f64 {
        match self.cusps[i].location {
            CuspLocation::Infinity => z.y,
            CuspLocation::Real(p) => {
                let dx = z.x - p;
                z.y / (dx * dx + z.y * z.y)
            }
        }
    }

    /// Max of the normalized cusp heights; the compact part of the domain is
    /// where this stays at or below the height cutoff.
    pub fn max_cusp_height(&self, z: PlanePoint) -> f64 {
        (0..self.cusps.len())
            .map(|i| self.cusp_height(z, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn in_compact_part(&self, z: PlanePoint, height_cut: f64) -> bool {
        self.in_domain(z) && self.max_cusp_height(z) <= height_cut
    }

    /// All group elements with reduced word length <= max_len, BFS order.
    pub fn enumerate_ball(&self, max_len: usize) -> Vec<GroupElement> {
        let mut out = vec![GroupElement::identity()];
        let mut frontier = vec![GroupElement::identity()];
        for _ in 0..max_len {
            let mut next = Vec::with_capacity(frontier.len() * 3 + 1);
            for g in &frontier {
                for l in [1i8, -1, 2, -2] {
                    if g.word.last() == Some(&-l) {
                        continue;
                    }
                    let mut word = g.word.clone();
                    word.push(l);
                    let matrix = g.matrix.mul(&self.generator(l));
                    next.push(GroupElement { word, matrix });
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    /// Minimal displacement of `g` over the sample set: min over x, y in K of
    /// d(g x, y). Symmetric under g -> g^-1 because x and y range over the
    /// same set.
    pub fn min_displacement(&self, g: &GroupElement, k: &[PlanePoint]) -> f64 {
        let mut best = f64::INFINITY;
        for &x in k {
            let gx = g.matrix.apply(x);
            for &y in k {
                let c = cosh_dist(gx, y);
                if c < best {
                    best = c;
                }
            }
        }
        best.acosh()
    }

    /// The finite set S(T, K): every gamma whose minimal displacement over K
    /// is at most T+1, found by breadth-first search over reduced words. A
    /// word stops being extended once its minimal displacement exceeds
    /// T + 1 + diam(K); if open words remain at the length cap the search
    /// fails loudly rather than return a silently truncated set.
    pub fn enumerate_s(
        &self,
        t: f64,
        k: &[PlanePoint],
        word_cap: usize,
    ) -> Result<Vec<GroupElement>> {
        if k.is_empty() || t <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "enumerate_s needs nonempty K and T > 0 (|K|={}, T={t})",
                k.len()
            )));
        }
        let mut diam: f64 = 0.0;
        for (i, &x) in k.iter().enumerate() {
            for &y in &k[i + 1..] {
                diam = diam.max(cosh_dist(x, y));
            }
        }
        let diam = diam.max(1.0).acosh();
        let keep = t + 1.0;
        let prune = t + 1.0 + diam;

        let mut selected: Vec<GroupElement> = vec![GroupElement::identity()];
        let mut frontier: Vec<GroupElement> = vec![GroupElement::identity()];
        for _level in 0..word_cap {
            if frontier.is_empty() {
                break;
            }
            let children: Vec<(GroupElement, f64)> = frontier
                .par_iter()
                .flat_map_iter(|g| {
                    let spec = self;
                    [1i8, -1, 2, -2].into_iter().filter_map(move |l| {
                        if g.word.last() == Some(&-l) {
                            return None;
                        }
                        let mut word = g.word.clone();
                        word.push(l);
                        let matrix = g.matrix.mul(&spec.generator(l));
                        let child = GroupElement { word, matrix };
                        let m = spec.min_displacement(&child, k);
                        Some((child, m))
                    })
                })
                .collect();
            let mut next = Vec::new();
            for (child, m) in children {
                if m <= keep {
                    selected.push(child.clone());
                }
                if m <= prune {
                    next.push(child);
                }
            }
            frontier = next;
        }
        if !frontier.is_empty() {
            return Err(Error::FrontierOverflow { cap: word_cap, open: frontier.len() });
        }

        // Close under inverse; the displacement criterion is symmetric but
        // pruning asymmetries must not leak into the result.
        let mut seen: HashSet<Vec<i8>> = selected.iter().map(|g| g.word.clone()).collect();
        let mut extra = Vec::new();
        for g in &selected {
            let inv = g.inverse();
            if seen.insert(inv.word.clone()) {
                extra.push(inv);
            }
        }
        selected.extend(extra);
        selected.sort_by(|a, b| (a.len(), &a.word).cmp(&(b.len(), &b.word)));
        Ok(selected)
    }

    /// Witnesses freeness on short words: all matrices for distinct reduced
    /// words up to the given length are pairwise distinct.
    pub fn verify_freeness(&self, max_len: usize, min_gap: f64) -> bool {
        let ball = self.enumerate_ball(max_len);
        for (i, g) in ball.iter().enumerate() {
            for h in &ball[i + 1..] {
                if g.matrix.entry_distance(&h.matrix) <= min_gap {
                    return false;
                }
            }
        }
        true
    }

    /// Serializes as a key=value text block (generator entries row-major).
    pub fn to_kv_block(&self) -> String {
        let mut out = String::new();
        for (i, g) in self.generators.iter().enumerate() {
            out.push_str(&format!("gen{}={},{},{},{}\n", i + 1, g.a, g.b, g.c, g.d));
        }
        out.push_str(&format!("height_cut={}\n", self.height_cut));
        for (i, c) in self.cusps.iter().enumerate() {
            let loc = match c.location {
                CuspLocation::Infinity => "inf".to_string(),
                CuspLocation::Real(p) => format!("{p}"),
            };
            out.push_str(&format!("cusp{}={}:{}\n", i, loc, c.width));
        }
        out
    }

    pub fn from_kv_block(text: &str) -> Result<Self> {
        let mut gens: [Option<MoebiusMatrix>; 2] = [None, None];
        let mut cusps: Vec<(usize, Cusp)> = Vec::new();
        let mut height_cut = None;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::BadConfig(format!("expected key=value, got '{line}'")))?;
            let key = key.trim();
            let value = value.trim();
            if let Some(idx) = key.strip_prefix("gen") {
                let idx: usize = idx
                    .parse()
                    .map_err(|_| Error::BadConfig(format!("bad generator key '{key}'")))?;
                let entries: Vec<f64> = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::BadConfig(format!("bad generator entries '{value}'")))?;
                if entries.len() != 4 || !(1..=2).contains(&idx) {
                    return Err(Error::BadConfig(format!("bad generator line '{line}'")));
                }
                gens[idx - 1] =
                    Some(MoebiusMatrix::new(entries[0], entries[1], entries[2], entries[3]));
            } else if let Some(idx) = key.strip_prefix("cusp") {
                let idx: usize = idx
                    .parse()
                    .map_err(|_| Error::BadConfig(format!("bad cusp key '{key}'")))?;
                let (loc, width) = value
                    .split_once(':')
                    .ok_or_else(|| Error::BadConfig(format!("bad cusp value '{value}'")))?;
                let location = if loc == "inf" {
                    CuspLocation::Infinity
                } else {
                    CuspLocation::Real(loc.parse().map_err(|_| {
                        Error::BadConfig(format!("bad cusp location '{loc}'"))
                    })?)
                };
                let width: f64 = width
                    .parse()
                    .map_err(|_| Error::BadConfig(format!("bad cusp width '{width}'")))?;
                cusps.push((idx, Cusp { location, width }));
            } else if key == "height_cut" {
                height_cut = Some(
                    value
                        .parse::<f64>()
                        .map_err(|_| Error::BadConfig(format!("bad height_cut '{value}'")))?,
                );
            } else {
                return Err(Error::BadConfig(format!("unknown key '{key}'")));
            }
        }
        let height_cut =
            height_cut.ok_or_else(|| Error::BadConfig("missing height_cut".into()))?;
        let generators = match gens {
            [Some(a), Some(b)] => [a, b],
            _ => return Err(Error::BadConfig("missing generator".into())),
        };
        cusps.sort_by_key(|(i, _)| *i);
        let cusps = cusps.into_iter().map(|(_, c)| c).collect();
        Ok(DomainSpec { generators, cusps, height_cut })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{fill_uniform, rng_from_seed};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn spec() -> DomainSpec {
        DomainSpec::gamma2(2.0)
    }

    fn random_domain_point(rng: &mut rand_chacha::ChaCha8Rng, spec: &DomainSpec) -> PlanePoint {
        loop {
            let x = rng.random_range(-1.0..1.0);
            let y = rng.random_range(0.05..3.0);
            let z = PlanePoint::new(x, y);
            if spec.in_domain(z) {
                return z;
            }
        }
    }

    #[test]
    fn mobius_apply_examples() {
        let z = PlanePoint::new(0.0, 1.0);
        let id = MoebiusMatrix::identity();
        assert_eq!(id.apply(z), z);

        let translate = MoebiusMatrix::new(1.0, 2.0, 0.0, 1.0);
        let w = translate.apply(z);
        assert_relative_eq!(w.x, 2.0, epsilon = 1e-15);
        assert_relative_eq!(w.y, 1.0, epsilon = 1e-15);

        // i / (2i + 1) = (2 + i) / 5
        let lower = MoebiusMatrix::new(1.0, 0.0, 2.0, 1.0);
        let v = lower.apply(z);
        assert_relative_eq!(v.x, 2.0 / 5.0, epsilon = 1e-15);
        assert_relative_eq!(v.y, 1.0 / 5.0, epsilon = 1e-15);
    }

    #[test]
    fn hyp_dist_examples() {
        let i = PlanePoint::new(0.0, 1.0);
        assert_eq!(hyp_dist(i, i), 0.0);
        let two_i = PlanePoint::new(0.0, 2.0);
        assert_relative_eq!(hyp_dist(i, two_i), 2.0f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(hyp_dist(two_i, i), 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn hyp_dist_is_isometry_invariant() {
        let spec = spec();
        let mut rng = rng_from_seed(11);
        let ball = spec.enumerate_ball(3);
        for trial in 0..100 {
            let g = &ball[trial % ball.len()];
            let z = random_domain_point(&mut rng, &spec);
            let w = random_domain_point(&mut rng, &spec);
            let d0 = hyp_dist(z, w);
            let d1 = hyp_dist(g.matrix.apply(z), g.matrix.apply(w));
            assert!(
                (d0 - d1).abs() < 1e-10,
                "isometry violated by {:?}: {d0} vs {d1}",
                g.word
            );
        }
    }

    #[test]
    fn word_to_element_examples() {
        let spec = spec();
        assert!(spec.element(&[1, -1]).is_identity());

        let sq = spec.element(&[1, 1]);
        assert_relative_eq!(sq.matrix.b, 4.0, epsilon = 1e-12);
        assert_relative_eq!(sq.matrix.a, 1.0, epsilon = 1e-12);

        // Independent product check for g1 * g2.
        let g1 = spec.generators[0];
        let g2 = spec.generators[1];
        let manual = MoebiusMatrix {
            a: g1.a * g2.a + g1.b * g2.c,
            b: g1.a * g2.b + g1.b * g2.d,
            c: g1.c * g2.a + g1.d * g2.c,
            d: g1.c * g2.b + g1.d * g2.d,
        };
        let e = spec.element(&[1, 2]);
        assert!(e.matrix.entry_distance(&manual) < 1e-12);
        assert_relative_eq!(e.matrix.a, 5.0, epsilon = 1e-12);
        assert_relative_eq!(e.matrix.b, 2.0, epsilon = 1e-12);
        assert_relative_eq!(e.matrix.c, 2.0, epsilon = 1e-12);
        assert_relative_eq!(e.matrix.d, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn element_inverse_roundtrip() {
        let spec = spec();
        let g = spec.element(&[1, 2, -1, 2, 2]);
        let gi = g.inverse();
        let prod = g.matrix.mul(&gi.matrix);
        assert!(prod.entry_distance(&MoebiusMatrix::identity()) < 1e-12);
        assert!(reduce_word(&[g.word.clone(), gi.word.clone()].concat()).is_empty());
    }

    #[test]
    fn determinant_stays_normalized_on_long_words() {
        let spec = spec();
        let mut rng = rng_from_seed(3);
        for _ in 0..200 {
            let mut word = Vec::new();
            while word.len() < 15 {
                let l = *[1i8, -1, 2, -2]
                    .get(rng.random_range(0..4usize))
                    .unwrap();
                if word.last() == Some(&-l) {
                    continue;
                }
                word.push(l);
            }
            let g = spec.element(&word);
            assert!((g.matrix.det() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ball_counts_match_formula() {
        let spec = spec();
        for l in 0..=8 {
            assert_eq!(spec.enumerate_ball(l).len(), ball_count(2, l), "d=2, L={l}");
        }
        for d in 2..=3 {
            for l in 0..=(if d == 2 { 8 } else { 6 }) {
                assert_eq!(reduced_words(d, l).len(), ball_count(d, l), "d={d}, L={l}");
            }
        }
        assert_eq!(ball_count(2, 0), 1);
        assert_eq!(ball_count(2, 1), 5);
        assert_eq!(ball_count(2, 2), 17);
    }

    #[test]
    fn ball_words_are_reduced_and_unique() {
        let spec = spec();
        let ball = spec.enumerate_ball(5);
        let mut seen = HashSet::new();
        for g in &ball {
            assert_eq!(reduce_word(&g.word), g.word);
            assert!(seen.insert(g.word.clone()), "duplicate {:?}", g.word);
        }
    }

    #[test]
    fn freeness_witness_on_short_words() {
        assert!(spec().verify_freeness(6, 1e-6));
    }

    #[test]
    fn in_domain_examples() {
        let spec = spec();
        assert!(spec.in_domain(PlanePoint::new(0.0, 1.0)));
        assert!(!spec.in_domain(PlanePoint::new(0.5, 0.1)));
        // half-open convention: left side in, right side out
        assert!(spec.in_domain(PlanePoint::new(-1.0, 1.5)));
        assert!(!spec.in_domain(PlanePoint::new(1.0, 1.5)));
    }

    #[test]
    fn domain_tiles_without_overlap() {
        let spec = spec();
        let mut rng = rng_from_seed(5);
        let ball = spec.enumerate_ball(3);
        let gammas: Vec<&GroupElement> =
            ball.iter().filter(|g| !g.is_identity()).take(20).collect();
        assert_eq!(gammas.len(), 20);
        for _ in 0..200 {
            let z = random_domain_point(&mut rng, &spec);
            for g in &gammas {
                assert!(
                    !spec.in_domain(g.matrix.apply(z)),
                    "translate {:?} of {z:?} landed back in the domain",
                    g.word
                );
            }
        }
    }

    #[test]
    fn cusp_heights_normalize_all_three_cusps() {
        let spec = spec();
        // Deep in the infinity cusp.
        let z = PlanePoint::new(0.3, 9.0);
        assert_relative_eq!(spec.cusp_height(z, 0), 9.0);
        // Deep in the cusp at 0: height y/|z|^2.
        let w = PlanePoint::new(0.0, 0.05);
        assert_relative_eq!(spec.cusp_height(w, 1), 20.0, epsilon = 1e-12);
        // Near +1.
        let v = PlanePoint::new(0.99, 0.01);
        assert!(spec.cusp_height(v, 2) > 10.0);
    }

    #[test]
    fn enumerate_s_tiny_radius_is_identity_only() {
        let spec = spec();
        let k = [PlanePoint::new(0.0, 1.0)];
        let s = spec.enumerate_s(0.1, &k, 30).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].is_identity());

        // Brute-force scan: no nonidentity word of length <= 6 displaces
        // (0,1) by 1.1 or less.
        let min_disp = spec
            .enumerate_ball(6)
            .iter()
            .filter(|g| !g.is_identity())
            .map(|g| hyp_dist(g.matrix.apply(k[0]), k[0]))
            .fold(f64::INFINITY, f64::min)
;
        assert!(min_disp > 1.1, "min nonidentity displacement {min_disp}");
    }

    #[test]
    fn enumerate_s_is_monotone_in_t() {
        let spec = spec();
        let k = [
            PlanePoint::new(0.0, 0.8),
            PlanePoint::new(0.5, 1.2),
            PlanePoint::new(-0.4, 1.6),
        ];
        let words =
            |s: &Vec<GroupElement>| s.iter().map(|g| g.word.clone()).collect::<HashSet<_>>();
        let s1 = words(&spec.enumerate_s(1.0, &k, 40).unwrap());
        let s2 = words(&spec.enumerate_s(2.0, &k, 40).unwrap());
        let s3 = words(&spec.enumerate_s(3.0, &k, 40).unwrap());
        assert!(s1.is_subset(&s2));
        assert!(s2.is_subset(&s3));
    }

    #[test]
    fn enumerate_s_matches_ball_scan_oracle() {
        let spec = spec();
        // Coarse mesh of the domain below normalized height 2. Near-cusp
        // sample points admit long quasi-parabolic words with small
        // displacement, so the exhaustive oracle must scan past the longest
        // word the search returns.
        let mut k = Vec::new();
        let h = 0.4;
        let mut i = 0;
        loop {
            let x = -1.0 + (i as f64 + 0.5) * h;
            if x >= 1.0 {
                break;
            }
            let mut j = 0;
            loop {
                let y = (j as f64 + 0.5) * h;
                if y > 2.0 {
                    break;
                }
                let z = PlanePoint::new(x, y);
                if spec.in_compact_part(z, 2.0) {
                    k.push(z);
                }
                j += 1;
            }
            i += 1;
        }
        assert!(!k.is_empty());

        let t = 3.0;
        let s = spec.enumerate_s(t, &k, 400).unwrap();
        let got = s.iter().map(|g| g.word.clone()).collect::<HashSet<_>>();
        let max_len = s.iter().map(|g| g.len()).max().unwrap();
        let scan_len = (max_len + 1).max(8);
        assert!(scan_len <= 12, "search found words of length {max_len}; oracle too costly");

        let expected: HashSet<Vec<i8>> = spec
            .enumerate_ball(scan_len)
            .into_par_iter()
            .filter(|g| spec.min_displacement(g, &k) <= t + 1.0)
            .map(|g| g.word)
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn enumerate_s_closed_under_inverse() {
        let spec = spec();
        let k = [PlanePoint::new(0.0, 1.0), PlanePoint::new(0.3, 1.4)];
        let s = spec.enumerate_s(2.5, &k, 40).unwrap();
        let words: HashSet<Vec<i8>> = s.iter().map(|g| g.word.clone()).collect();
        for g in &s {
            assert!(words.contains(&g.inverse().word), "missing inverse of {:?}", g.word);
        }
    }

    #[test]
    fn enumerate_s_overflows_loudly() {
        let spec = spec();
        let k = [PlanePoint::new(0.0, 1.0)];
        match spec.enumerate_s(6.0, &k, 2) {
            Err(Error::FrontierOverflow { cap: 2, .. }) => {}
            other => panic!("expected frontier overflow, got {other:?}"),
        }
    }

    #[test]
    fn kv_block_roundtrip() {
        let spec = spec();
        let block = spec.to_kv_block();
        let back = DomainSpec::from_kv_block(&block).unwrap();
        assert_eq!(spec, back);
        assert!(DomainSpec::from_kv_block("nonsense").is_err());
    }

    #[test]
    fn random_words_preserve_isometry_property() {
        // property-style sweep with a fixed seed
        let spec = spec();
        let mut rng = rng_from_seed(17);
        let mut buf = vec![0.0; 2];
        for _ in 0..64 {
            let len = rng.random_range(0..8usize);
            let mut word = Vec::new();
            while word.len() < len {
                let l = [1i8, -1, 2, -2][rng.random_range(0..4usize)];
                if word.last() == Some(&-l) {
                    continue;
                }
                word.push(l);
            }
            let g = spec.element(&word);
            fill_uniform(&mut rng, &mut buf);
            let z = PlanePoint::new(buf[0], 1.0 + 0.9 * buf[1]);
            let w = PlanePoint::new(-buf[1], 0.4 + 0.2 * (buf[0] + 1.0));
            let d0 = hyp_dist(z, w);
            let d1 = hyp_dist(g.matrix.apply(z), g.matrix.apply(w));
            assert!((d0 - d1).abs() < 1e-10);
        }
    }
}
