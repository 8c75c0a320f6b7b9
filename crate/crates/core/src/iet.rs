//! Interval exchange transformations with exact endpoints.
//!
//! An `Iet` rearranges `r` half-open subintervals of `[0, total)` by
//! translations. The permutation is stored in image order: `perm.at(m)` is
//! the (1-based) index of the interval whose image is m-th from the left.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num::rational::BigRational;
use num::Zero;

use crate::error::{Error, Result};
use crate::field::{exact_floor_index, exact_sort, Field, FieldElement};

/// Bijection of `{1..r}` stored as the image-order listing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Permutation> {
        let r = images.len();
        if r == 0 {
            return Err(Error::InvalidPermutation("empty".into()));
        }
        let mut seen = vec![false; r + 1];
        for &i in &images {
            if i < 1 || i > r || seen[i] {
                return Err(Error::InvalidPermutation(format!("{:?} is not a bijection of 1..{}", images, r)));
            }
            seen[i] = true;
        }
        Ok(Permutation { images })
    }

    pub fn identity(r: usize) -> Permutation {
        Permutation { images: (1..=r).collect() }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `pi(m)`: interval index occupying image position `m` (both 1-based).
    pub fn at(&self, m: usize) -> usize {
        self.images[m - 1]
    }

    /// `pi^{-1}(i)`: image position of interval `i` (both 1-based).
    pub fn position_of(&self, i: usize) -> usize {
        self.images.iter().position(|&x| x == i).expect("valid permutation") + 1
    }

    pub fn listing(&self) -> &[usize] {
        &self.images
    }
}

/// The singularity-cycle permutation of `{0..r}` attached to an IET.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XiPermutation {
    images: Vec<usize>,
}

impl XiPermutation {
    pub fn at(&self, j: usize) -> usize {
        self.images[j]
    }

    pub fn listing(&self) -> &[usize] {
        &self.images
    }

    /// Cycle decomposition, each cycle starting at its least element,
    /// cycles ordered by least element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.images.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                cyc.push(cur);
                cur = self.images[cur];
            }
            out.push(cyc);
        }
        out
    }

    pub fn orbit_of(&self, start: usize) -> Vec<usize> {
        let mut orbit = vec![start];
        let mut cur = self.images[start];
        while cur != start {
            orbit.push(cur);
            cur = self.images[cur];
        }
        orbit
    }
}

#[derive(Debug, Clone)]
pub struct Iet {
    field: Field,
    lengths: Vec<FieldElement>,
    perm: Permutation,
    /// gammas[i] = sum of the first i lengths; gammas[0] = 0, gammas[r] = total.
    gammas: Vec<FieldElement>,
    /// translation added on interval i (0-based).
    translations: Vec<FieldElement>,
    /// image-tiling boundaries, gammas of the inverse; length r+1.
    image_bounds: Vec<FieldElement>,
}

impl PartialEq for Iet {
    fn eq(&self, other: &Self) -> bool {
        self.lengths == other.lengths && self.perm == other.perm
    }
}

impl Iet {
    pub fn new(lengths: Vec<FieldElement>, perm: Permutation) -> Result<Iet> {
        if lengths.len() != perm.len() {
            return Err(Error::InvalidPermutation(format!(
                "{} lengths vs {} permutation entries",
                lengths.len(),
                perm.len()
            )));
        }
        let field = lengths
            .first()
            .map(|l| l.field().clone())
            .ok_or_else(|| Error::InvalidPermutation("empty".into()))?;
        for (i, l) in lengths.iter().enumerate() {
            if l.sign()? != Ordering::Greater {
                return Err(Error::NonpositiveLength { index: i });
            }
        }
        let r = lengths.len();
        let mut gammas = Vec::with_capacity(r + 1);
        gammas.push(field.zero());
        for l in &lengths {
            let next = gammas.last().unwrap().add(l);
            gammas.push(next);
        }
        // image offsets: the m-th image interval is interval perm.at(m); its
        // left endpoint is the sum of the lengths placed before it.
        let mut image_bounds = Vec::with_capacity(r + 1);
        image_bounds.push(field.zero());
        for m in 1..=r {
            let next = image_bounds.last().unwrap().add(&lengths[perm.at(m) - 1]);
            image_bounds.push(next);
        }
        let mut translations = vec![field.zero(); r];
        for m in 1..=r {
            let i = perm.at(m) - 1;
            translations[i] = image_bounds[m - 1].sub(&gammas[i]);
        }
        Ok(Iet { field, lengths, perm, gammas, translations, image_bounds })
    }

    /// Rotation by `alpha` presented as the exchange of `[0, 1-alpha)` and
    /// `[1-alpha, 1)`.
    pub fn rotation(field: &Field, alpha: &FieldElement) -> Result<Iet> {
        let one = field.one();
        Iet::new(vec![one.sub(alpha), alpha.clone()], Permutation::new(vec![2, 1])?)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn interval_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[FieldElement] {
        &self.lengths
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn total(&self) -> &FieldElement {
        &self.gammas[self.lengths.len()]
    }

    /// Grid of interval endpoints `0 = g0 < g1 < ... < gr = total`.
    pub fn gammas(&self) -> &[FieldElement] {
        &self.gammas
    }

    /// Interior discontinuity points of the map itself, `g1 .. g_{r-1}`
    /// (some may be spurious when adjacent intervals co-move).
    pub fn discontinuities(&self) -> &[FieldElement] {
        &self.gammas[1..self.lengths.len()]
    }

    /// Sorted interior boundaries of the image tiling: the discontinuity
    /// set of the inverse map.
    pub fn inverse_discontinuities(&self) -> &[FieldElement] {
        &self.image_bounds[1..self.lengths.len()]
    }

    pub fn translations(&self) -> &[FieldElement] {
        &self.translations
    }

    /// 0-based index of the interval containing `x`.
    pub fn interval_of(&self, x: &FieldElement) -> Result<usize> {
        if x.sign()? == Ordering::Less || x.cmp_exact(self.total())? != Ordering::Less {
            return Err(Error::OutOfDomain(x.to_string()));
        }
        let idx = exact_floor_index(&self.gammas, x)?.expect("x >= 0 = gammas[0]");
        Ok(idx.min(self.lengths.len() - 1))
    }

    pub fn apply(&self, x: &FieldElement) -> Result<FieldElement> {
        let i = self.interval_of(x)?;
        Ok(x.add(&self.translations[i]))
    }

    pub fn apply_inverse(&self, y: &FieldElement) -> Result<FieldElement> {
        if y.sign()? == Ordering::Less || y.cmp_exact(self.total())? != Ordering::Less {
            return Err(Error::OutOfDomain(y.to_string()));
        }
        let m = exact_floor_index(&self.image_bounds, y)?.expect("y >= 0") + 1;
        let m = m.min(self.lengths.len());
        let i = self.perm.at(m) - 1;
        Ok(y.sub(&self.translations[i]))
    }

    pub fn xi(&self) -> XiPermutation {
        let r = self.lengths.len();
        let mut images = vec![0usize; r + 1];
        images[0] = self.perm.at(1) - 1;
        images[self.perm.at(r)] = r;
        for j in 1..=r {
            if j == self.perm.at(r) {
                continue;
            }
            images[j] = self.perm.at(self.perm.position_of(j) + 1) - 1;
        }
        XiPermutation { images }
    }

    /// If every translation carries the same nonzero generator-coefficient
    /// vector, return it. Orbit points then have irrational coefficients
    /// `coeffs(x) + p * v` after `p` steps, which certifies aperiodicity and
    /// lets connection scans terminate with certainty.
    pub fn common_translation_vector(&self) -> Option<BTreeMap<usize, BigRational>> {
        let first = self.translations.first()?.irrational_coeffs().clone();
        if first.is_empty() {
            return None;
        }
        for t in &self.translations[1..] {
            if t.irrational_coeffs() != &first {
                return None;
            }
        }
        Some(first)
    }

    pub fn certified_aperiodic(&self) -> bool {
        self.common_translation_vector().is_some()
    }

    /// Decompose into pieces `(left, right, translation)` in domain order.
    pub fn pieces(&self) -> Vec<(FieldElement, FieldElement, FieldElement)> {
        (0..self.lengths.len())
            .map(|i| (self.gammas[i].clone(), self.gammas[i + 1].clone(), self.translations[i].clone()))
            .collect()
    }

    /// Build from a list of `(left, right, translation)` pieces that tile
    /// `[0, total)` in the given order; verifies the image also tiles.
    /// Adjacent co-moving pieces are merged when `merge` is set.
    pub fn from_pieces(
        field: &Field,
        pieces: Vec<(FieldElement, FieldElement, FieldElement)>,
        merge: bool,
    ) -> Result<Iet> {
        if pieces.is_empty() {
            return Err(Error::InvalidPermutation("no pieces".into()));
        }
        let mut pieces = pieces;
        if pieces[0].0.sign()? != Ordering::Equal {
            return Err(Error::Internal("pieces do not start at 0".into()));
        }
        for w in 0..pieces.len() - 1 {
            if pieces[w].1 != pieces[w + 1].0 {
                return Err(Error::Internal("pieces do not tile the domain".into()));
            }
        }
        if merge {
            let mut merged: Vec<(FieldElement, FieldElement, FieldElement)> = Vec::new();
            for p in pieces.drain(..) {
                if let Some(last) = merged.last_mut() {
                    if last.2 == p.2 && last.1 == p.0 {
                        last.1 = p.1;
                        continue;
                    }
                }
                merged.push(p);
            }
            pieces = merged;
        }
        let lengths: Vec<FieldElement> = pieces.iter().map(|p| p.1.sub(&p.0)).collect();
        // image order: sort pieces by image left endpoint
        let mut order: Vec<usize> = (0..pieces.len()).collect();
        let image_left: Vec<FieldElement> = pieces.iter().map(|p| p.0.add(&p.2)).collect();
        // insertion sort with the exact comparator
        for i in 1..order.len() {
            let mut j = i;
            while j > 0
                && image_left[order[j - 1]].cmp_exact(&image_left[order[j]])? == Ordering::Greater
            {
                order.swap(j - 1, j);
                j -= 1;
            }
        }
        let perm = Permutation::new(order.iter().map(|&i| i + 1).collect())?;
        let iet = Iet::new(lengths, perm)?;
        // verify the declared translations are reproduced and the image tiles
        for (i, p) in pieces.iter().enumerate() {
            if iet.translations[i] != p.2 {
                return Err(Error::Internal("image intervals do not tile exactly".into()));
            }
        }
        Ok(iet)
    }

    /// Exact composition `self ∘ other` (apply `other` first). The result is
    /// in canonical form (adjacent co-moving intervals merged).
    pub fn compose(&self, other: &Iet) -> Result<Iet> {
        if self.total() != other.total() {
            return Err(Error::TotalMismatch);
        }
        let mut cuts: Vec<FieldElement> = other.discontinuities().to_vec();
        for g in self.discontinuities() {
            cuts.push(other.apply_inverse(g)?);
        }
        crate::field::exact_sort_dedup(&mut cuts)?;
        let mut ends = vec![self.field.zero()];
        ends.extend(cuts);
        ends.push(self.total().clone());
        let mut pieces = Vec::new();
        for w in 0..ends.len() - 1 {
            let left = ends[w].clone();
            let right = ends[w + 1].clone();
            let t1 = &other.translations[other.interval_of(&left)?];
            let mid_image = left.add(t1);
            let t2 = &self.translations[self.interval_of(&mid_image)?];
            pieces.push((left, right, t1.add(t2)));
        }
        Iet::from_pieces(&self.field, pieces, true)
    }

    pub fn inverse(&self) -> Result<Iet> {
        let r = self.lengths.len();
        let mut pieces = Vec::with_capacity(r);
        for m in 1..=r {
            let i = self.perm.at(m) - 1;
            pieces.push((
                self.image_bounds[m - 1].clone(),
                self.image_bounds[m].clone(),
                self.translations[i].neg(),
            ));
        }
        Iet::from_pieces(&self.field, pieces, true)
    }

    pub fn power(&self, p: usize) -> Result<Iet> {
        assert!(p >= 1, "power must be at least 1");
        let mut acc = self.clone();
        for _ in 1..p {
            acc = acc.compose(self)?;
        }
        Ok(acc)
    }

    /// Canonical form with adjacent co-moving intervals merged.
    pub fn canonical_merge(&self) -> Result<Iet> {
        Iet::from_pieces(&self.field, self.pieces(), true)
    }

    /// Bounded search for an interval of periodic points: the least
    /// `p <= p_max` such that some continuity interval of `T^p` translates
    /// by exactly zero, together with that interval. Aperiodicity certified
    /// through the translation-vector argument short-circuits the scan.
    pub fn find_periodic_interval(
        &self,
        p_max: usize,
    ) -> Result<Option<(usize, FieldElement, FieldElement)>> {
        if self.certified_aperiodic() {
            return Ok(None);
        }
        let mut acc = self.clone();
        for p in 1..=p_max {
            for (i, t) in acc.translations.iter().enumerate() {
                if t.is_zero() {
                    return Ok(Some((p, acc.gammas[i].clone(), acc.gammas[i + 1].clone())));
                }
            }
            if p < p_max {
                acc = acc.compose(self)?;
            }
        }
        Ok(None)
    }

    /// Image of the interval `[left, right)` under the map, provided it
    /// sits inside a single continuity interval.
    pub fn apply_interval(
        &self,
        left: &FieldElement,
        right: &FieldElement,
    ) -> Result<(FieldElement, FieldElement)> {
        let i = self.interval_of(left)?;
        if right.cmp_exact(&self.gammas[i + 1])? == Ordering::Greater {
            return Err(Error::Internal("interval straddles a discontinuity".into()));
        }
        Ok((left.add(&self.translations[i]), right.add(&self.translations[i])))
    }

    /// Exact check that the images of the intervals tile `[0, total)`.
    pub fn verify_bijection(&self) -> Result<()> {
        let r = self.lengths.len();
        let mut lefts: Vec<FieldElement> =
            (0..r).map(|i| self.gammas[i].add(&self.translations[i])).collect();
        exact_sort(&mut lefts)?;
        let mut expected = self.field.zero();
        for (k, l) in lefts.iter().enumerate() {
            if *l != expected {
                return Err(Error::Internal(format!("image gap or overlap at piece {}", k)));
            }
            // find which interval starts here to advance by its length
            let i = (0..r)
                .find(|&i| self.gammas[i].add(&self.translations[i]) == *l)
                .expect("just sorted from these");
            expected = l.add(&self.lengths[i]);
        }
        if expected != *self.total() {
            return Err(Error::Internal("image does not close up to total".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GeneratorSpec;

    fn rot_field() -> (Field, FieldElement) {
        let f = Field::new(vec![GeneratorSpec::surd("a", -1, 1, 1, 2)]).unwrap();
        let a = f.generator("a").unwrap();
        (f, a)
    }

    #[test]
    fn rotation_build() {
        let (f, a) = rot_field();
        let t = Iet::rotation(&f, &a).unwrap();
        assert_eq!(t.interval_count(), 2);
        assert_eq!(t.discontinuities()[0], f.one().sub(&a));
        assert_eq!(t.inverse_discontinuities()[0], a);
        t.verify_bijection().unwrap();
    }

    #[test]
    fn degenerate_identity_is_legal() {
        let f = Field::new(vec![]).unwrap();
        let t = Iet::new(
            vec![f.rational(1, 2), f.rational(1, 2)],
            Permutation::new(vec![1, 2]).unwrap(),
        )
        .unwrap();
        let x = f.rational(1, 3);
        assert_eq!(t.apply(&x).unwrap(), x);
    }

    #[test]
    fn zero_length_rejected() {
        let f = Field::new(vec![]).unwrap();
        let e = Iet::new(vec![f.zero(), f.one()], Permutation::new(vec![2, 1]).unwrap());
        assert!(matches!(e, Err(Error::NonpositiveLength { index: 0 })));
    }

    #[test]
    fn rotation_apply() {
        let (f, a) = rot_field();
        let t = Iet::rotation(&f, &a).unwrap();
        assert_eq!(t.apply(&f.zero()).unwrap(), a);
        let left2 = f.one().sub(&a);
        assert_eq!(t.apply(&left2).unwrap(), f.zero());
        // inverse undoes
        let x = f.rational(1, 3);
        assert_eq!(t.apply_inverse(&t.apply(&x).unwrap()).unwrap(), x);
        assert!(t.apply(&f.integer(2)).is_err());
    }

    #[test]
    fn xi_of_rotation_is_three_cycle() {
        let (f, a) = rot_field();
        let t = Iet::rotation(&f, &a).unwrap();
        let xi = t.xi();
        assert_eq!(xi.listing(), &[1, 2, 0]);
        let cycles = xi.cycles();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].len(), 3);
    }

    #[test]
    fn xi_of_trivial_permutation() {
        let f = Field::new(vec![]).unwrap();
        let t = Iet::new(vec![f.one()], Permutation::new(vec![1]).unwrap()).unwrap();
        let xi = t.xi();
        assert_eq!(xi.listing(), &[0, 1]);
    }

    #[test]
    fn compose_rotations() {
        let (f, a) = rot_field();
        let t = Iet::rotation(&f, &a).unwrap();
        // T^2 is the rotation by 2a (2a < 1 here: 2(sqrt2-1) ~ 0.828)
        let two_a = a.scale_int(2);
        let t2 = t.power(2).unwrap();
        let expect = Iet::rotation(&f, &two_a).unwrap();
        assert_eq!(t2, expect);
        // compose with inverse gives the identity (one interval, zero shift)
        let id = t.compose(&t.inverse().unwrap()).unwrap();
        assert_eq!(id.interval_count(), 1);
        assert!(id.translations()[0].is_zero());
    }

    #[test]
    fn compose_with_identity_is_canonical_form() {
        let (f, a) = rot_field();
        let t = Iet::rotation(&f, &a).unwrap();
        let id = Iet::new(vec![f.one()], Permutation::new(vec![1]).unwrap()).unwrap();
        let c = t.compose(&id).unwrap();
        assert_eq!(c, t.canonical_merge().unwrap());
    }

    #[test]
    fn periodic_search() {
        let f = Field::new(vec![]).unwrap();
        // rational rotation by 1/3 has period 3
        let t = Iet::new(
            vec![f.rational(2, 3), f.rational(1, 3)],
            Permutation::new(vec![2, 1]).unwrap(),
        )
        .unwrap();
        let (p, l, r) = t.find_periodic_interval(3).unwrap().unwrap();
        assert_eq!(p, 3);
        assert_eq!(l, f.zero());
        assert_eq!(r, f.one());

        // identity has period 1
        let id = Iet::new(vec![f.one()], Permutation::new(vec![1]).unwrap()).unwrap();
        assert_eq!(id.find_periodic_interval(5).unwrap().unwrap().0, 1);

        // irrational rotation: no periodic point, certified
        let (f2, a) = rot_field();
        let t = Iet::rotation(&f2, &a).unwrap();
        assert!(t.certified_aperiodic());
        assert!(t.find_periodic_interval(50).unwrap().is_none());
    }

    #[test]
    fn image_tiling_random_points() {
        let (f, a) = rot_field();
        // a 4-interval exchange with irrational cuts
        let l1 = a.scale(&BigRational::new(1.into(), 4.into()));
        let l2 = f.rational(1, 3);
        let l3 = a.scale(&BigRational::new(1.into(), 2.into()));
        let sum = l1.add(&l2).add(&l3);
        let l4 = f.one().sub(&sum);
        let t = Iet::new(
            vec![l1, l2, l3, l4],
            Permutation::new(vec![3, 1, 4, 2]).unwrap(),
        )
        .unwrap();
        t.verify_bijection().unwrap();
        for k in 0..200 {
            let x = f.rational(k, 211);
            let y = t.apply(&x).unwrap();
            assert_eq!(t.apply_inverse(&y).unwrap(), x);
        }
    }
}
