//! Exact arithmetic over the rational-affine span of declared irrational
//! generators.
//!
//! An element is `c0 + sum cj * gj` with rational coefficients. Equality is
//! structural (coefficients in lowest terms, zeros dropped), so it is exact
//! and free. Ordering is decided by refining a rational enclosure of each
//! generator until the sign of the difference is certain; under the declared
//! rational independence of `{1, g1, .., gk}` this always terminates.
//!
//! Products of two irrationals are deliberately unrepresentable: everything
//! downstream only ever translates points by sums of lengths.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::{Error, Result};

/// How a generator's value is pinned down numerically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnclosureSpec {
    /// `(p + q*sqrt(d)) / r` with `d > 0` not a perfect square and `q != 0`.
    Surd { p: BigInt, q: BigInt, r: BigInt, d: BigInt },
    /// Continued fraction `[a0; a1, a2, ...]` given as an initial block
    /// followed by a repeating block (the repeating block may not be empty,
    /// which keeps the represented number irrational).
    ContinuedFraction { initial: Vec<BigInt>, repeat: Vec<BigInt> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub name: String,
    pub enclosure: EnclosureSpec,
}

impl GeneratorSpec {
    pub fn surd(name: &str, p: i64, q: i64, r: i64, d: i64) -> Self {
        GeneratorSpec {
            name: name.to_string(),
            enclosure: EnclosureSpec::Surd {
                p: p.into(),
                q: q.into(),
                r: r.into(),
                d: d.into(),
            },
        }
    }

    pub fn continued_fraction(name: &str, initial: &[i64], repeat: &[i64]) -> Self {
        GeneratorSpec {
            name: name.to_string(),
            enclosure: EnclosureSpec::ContinuedFraction {
                initial: initial.iter().map(|&a| BigInt::from(a)).collect(),
                repeat: repeat.iter().map(|&a| BigInt::from(a)).collect(),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidGenerator {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            || !self.name.chars().next().unwrap().is_ascii_alphabetic()
        {
            return Err(bad("name must be an ascii identifier"));
        }
        match &self.enclosure {
            EnclosureSpec::Surd { q, r, d, .. } => {
                if d.sign() != num::bigint::Sign::Plus {
                    return Err(bad("d must be positive"));
                }
                let s = isqrt(d);
                if &(&s * &s) == d {
                    return Err(bad("d must not be a perfect square"));
                }
                if q.is_zero() {
                    return Err(bad("q must be nonzero, otherwise the value is rational"));
                }
                if r.is_zero() {
                    return Err(bad("r must be nonzero"));
                }
            }
            EnclosureSpec::ContinuedFraction { initial, repeat } => {
                if repeat.is_empty() {
                    return Err(bad("repeating block must be nonempty"));
                }
                for a in initial.iter().skip(1).chain(repeat.iter()) {
                    if a.sign() != num::bigint::Sign::Plus {
                        return Err(bad("partial quotients after a0 must be positive"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn isqrt(n: &BigInt) -> BigInt {
    use num::integer::Roots;
    n.sqrt()
}

/// Mutable refinement state for one generator: a rational enclosure
/// `[lo, hi]` that every refinement call strictly shrinks.
#[derive(Debug, Clone)]
struct EnclosureState {
    lo: BigRational,
    hi: BigRational,
    kind: StateKind,
}

#[derive(Debug, Clone)]
enum StateKind {
    /// Dyadic bracket of sqrt(d) with `prec` fractional bits; the affine
    /// map (p + q*s)/r is applied on read-out.
    Surd { prec: u64 },
    /// Index of the next partial quotient to consume, plus the last two
    /// convergents (p_{k-1}/q_{k-1} and p_k/q_k).
    Cf { next: usize, p_prev: BigInt, q_prev: BigInt, p_cur: BigInt, q_cur: BigInt },
}

const SURD_PREC_STEP: u64 = 64;

fn surd_bracket(d: &BigInt, prec: u64) -> (BigRational, BigRational) {
    // floor(sqrt(d * 4^prec)) / 2^prec brackets sqrt(d) within 2^-prec.
    let scaled = d << (2 * prec as usize);
    let s = isqrt(&scaled);
    let denom = BigInt::one() << (prec as usize);
    (
        BigRational::new(s.clone(), denom.clone()),
        BigRational::new(s + 1, denom),
    )
}

fn affine(spec: &EnclosureSpec, slo: &BigRational, shi: &BigRational) -> (BigRational, BigRational) {
    match spec {
        EnclosureSpec::Surd { p, q, r, .. } => {
            let p = BigRational::from(p.clone());
            let q = BigRational::from(q.clone());
            let r = BigRational::from(r.clone());
            let a = (&p + &q * slo) / &r;
            let b = (&p + &q * shi) / &r;
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        }
        EnclosureSpec::ContinuedFraction { .. } => unreachable!("affine is only used for surds"),
    }
}

impl EnclosureState {
    fn new(spec: &EnclosureSpec) -> Self {
        match spec {
            EnclosureSpec::Surd { d, .. } => {
                let (slo, shi) = surd_bracket(d, SURD_PREC_STEP);
                let (lo, hi) = affine(spec, &slo, &shi);
                EnclosureState { lo, hi, kind: StateKind::Surd { prec: SURD_PREC_STEP } }
            }
            EnclosureSpec::ContinuedFraction { .. } => {
                let mut st = EnclosureState {
                    lo: BigRational::zero(),
                    hi: BigRational::zero(),
                    kind: StateKind::Cf {
                        next: 0,
                        p_prev: BigInt::one(),
                        q_prev: BigInt::zero(),
                        p_cur: BigInt::zero(),
                        q_cur: BigInt::one(),
                    },
                };
                // Consume two quotients so consecutive convergents bracket
                // the value from both sides.
                st.refine(spec);
                st.refine(spec);
                st
            }
        }
    }

    fn refine(&mut self, spec: &EnclosureSpec) {
        match (&mut self.kind, spec) {
            (StateKind::Surd { prec }, EnclosureSpec::Surd { d, .. }) => {
                *prec += SURD_PREC_STEP;
                let (slo, shi) = surd_bracket(d, *prec);
                let (lo, hi) = affine(spec, &slo, &shi);
                self.lo = lo;
                self.hi = hi;
            }
            (
                StateKind::Cf { next, p_prev, q_prev, p_cur, q_cur },
                EnclosureSpec::ContinuedFraction { initial, repeat },
            ) => {
                let a = if *next < initial.len() {
                    initial[*next].clone()
                } else {
                    repeat[(*next - initial.len()) % repeat.len()].clone()
                };
                let p_next = &a * &*p_cur + &*p_prev;
                let q_next = &a * &*q_cur + &*q_prev;
                *p_prev = std::mem::replace(p_cur, p_next);
                *q_prev = std::mem::replace(q_cur, q_next);
                *next += 1;
                if !q_prev.is_zero() {
                    let c1 = BigRational::new(p_prev.clone(), q_prev.clone());
                    let c2 = BigRational::new(p_cur.clone(), q_cur.clone());
                    if c1 <= c2 {
                        self.lo = c1;
                        self.hi = c2;
                    } else {
                        self.lo = c2;
                        self.hi = c1;
                    }
                } else {
                    // Only one convergent so far: a0 brackets within 1.
                    let c = BigRational::new(p_cur.clone(), q_cur.clone());
                    self.lo = c.clone();
                    self.hi = c + BigRational::one();
                }
            }
            _ => unreachable!("state kind matches spec kind by construction"),
        }
    }
}

struct FieldInner {
    gens: Vec<GeneratorSpec>,
    by_name: BTreeMap<String, usize>,
    states: Mutex<Vec<EnclosureState>>,
    refine_budget: usize,
}

impl fmt::Debug for FieldInner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("generators", &self.gens.iter().map(|g| &g.name).collect::<Vec<_>>())
            .finish()
    }
}

/// Shared handle to a set of declared generators. Cheap to clone; all
/// elements of one analysis session carry the same handle.
#[derive(Clone, Debug)]
pub struct Field(Arc<FieldInner>);

pub const DEFAULT_REFINE_BUDGET: usize = 10_000;

impl Field {
    pub fn new(gens: Vec<GeneratorSpec>) -> Result<Field> {
        Field::with_budget(gens, DEFAULT_REFINE_BUDGET)
    }

    pub fn with_budget(gens: Vec<GeneratorSpec>, refine_budget: usize) -> Result<Field> {
        let mut by_name = BTreeMap::new();
        for (i, g) in gens.iter().enumerate() {
            g.validate()?;
            if by_name.insert(g.name.clone(), i).is_some() {
                return Err(Error::InvalidGenerator {
                    name: g.name.clone(),
                    reason: "duplicate generator name".into(),
                });
            }
        }
        let states = gens.iter().map(|g| EnclosureState::new(&g.enclosure)).collect();
        let field = Field(Arc::new(FieldInner {
            gens,
            by_name,
            states: Mutex::new(states),
            refine_budget,
        }));
        field.independence_residual_check()?;
        Ok(field)
    }

    /// Heuristic screen for violated independence assertions: look for a
    /// small integer relation `m0 + m1*g1 + ... + mk*gk ~ 0` numerically.
    /// This cannot prove independence; a genuinely dependent set that slips
    /// through is caught later as a refinement-budget error.
    fn independence_residual_check(&self) -> Result<()> {
        let k = self.0.gens.len();
        if k == 0 || k > 2 {
            return Ok(());
        }
        let approx: Vec<f64> = (0..k).map(|i| self.generator_f64(i)).collect();
        const RANGE: i64 = 24;
        const TOL: f64 = 1e-9;
        let check = |combo: f64| combo.abs() < TOL;
        if k == 1 {
            for m in 1..=RANGE {
                for n in -RANGE..=RANGE {
                    if check(m as f64 * approx[0] + n as f64) {
                        return Err(Error::InvalidGenerator {
                            name: self.0.gens[0].name.clone(),
                            reason: format!("numerically close to rational {}/{}", -n, m),
                        });
                    }
                }
            }
        } else {
            for m1 in -RANGE..=RANGE {
                for m2 in -RANGE..=RANGE {
                    if m1 == 0 && m2 == 0 {
                        continue;
                    }
                    for n in -RANGE..=RANGE {
                        if check(m1 as f64 * approx[0] + m2 as f64 * approx[1] + n as f64) {
                            return Err(Error::InvalidGenerator {
                                name: self.0.gens[1].name.clone(),
                                reason: format!(
                                    "generators look rationally dependent: {}*{} + {}*{} + {} ~ 0",
                                    m1, self.0.gens[0].name, m2, self.0.gens[1].name, n
                                ),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn generator_names(&self) -> Vec<String> {
        self.0.gens.iter().map(|g| g.name.clone()).collect()
    }

    pub fn generator_index(&self, name: &str) -> Result<usize> {
        self.0
            .by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownGenerator(name.to_string()))
    }

    fn generator_f64(&self, idx: usize) -> f64 {
        let mut states = self.0.states.lock().unwrap();
        let st = &mut states[idx];
        // 64 fractional bits are plenty for an f64 read-out.
        let lo = st.lo.clone();
        let hi = st.hi.clone();
        let mid = (lo + hi) / BigRational::from(BigInt::from(2));
        rational_to_f64(&mid)
    }

    pub fn zero(&self) -> FieldElement {
        self.from_rational(BigRational::zero())
    }

    pub fn one(&self) -> FieldElement {
        self.from_rational(BigRational::one())
    }

    pub fn integer(&self, n: i64) -> FieldElement {
        self.from_rational(BigRational::from(BigInt::from(n)))
    }

    pub fn rational(&self, num: i64, den: i64) -> FieldElement {
        assert!(den != 0, "denominator must be nonzero");
        self.from_rational(BigRational::new(num.into(), den.into()))
    }

    pub fn from_rational(&self, r: BigRational) -> FieldElement {
        FieldElement { field: self.clone(), constant: r, coeffs: BTreeMap::new() }
    }

    pub fn generator(&self, name: &str) -> Result<FieldElement> {
        let idx = self.generator_index(name)?;
        let mut coeffs = BTreeMap::new();
        coeffs.insert(idx, BigRational::one());
        Ok(FieldElement { field: self.clone(), constant: BigRational::zero(), coeffs })
    }

    /// Parse `"1/3 + 2*a - 1"` style expressions over declared generators.
    pub fn parse(&self, input: &str) -> Result<FieldElement> {
        parse_element(self, input)
    }

    fn same_as(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Current enclosure of an element, refining nothing.
    fn element_interval(
        &self,
        states: &mut [EnclosureState],
        elem: &FieldElement,
    ) -> (BigRational, BigRational) {
        let mut lo = elem.constant.clone();
        let mut hi = elem.constant.clone();
        for (&idx, c) in &elem.coeffs {
            let st = &states[idx];
            if c.is_positive() {
                lo += c * &st.lo;
                hi += c * &st.hi;
            } else {
                lo += c * &st.hi;
                hi += c * &st.lo;
            }
        }
        (lo, hi)
    }

    /// Decide the sign of a nonzero element by enclosure refinement.
    fn sign_of(&self, elem: &FieldElement) -> Result<Ordering> {
        debug_assert!(!elem.coeffs.is_empty());
        let mut states = self.0.states.lock().unwrap();
        let mut steps = 0usize;
        loop {
            let (lo, hi) = self.element_interval(&mut states, elem);
            if lo.is_positive() {
                return Ok(Ordering::Greater);
            }
            if hi.is_negative() {
                return Ok(Ordering::Less);
            }
            for (&idx, _) in &elem.coeffs {
                if steps >= self.0.refine_budget {
                    return Err(Error::RefinementBudget { steps });
                }
                let spec = self.0.gens[idx].enclosure.clone();
                states[idx].refine(&spec);
                steps += 1;
            }
        }
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// An exact number `constant + sum coeffs[g] * g`.
#[derive(Clone)]
pub struct FieldElement {
    field: Field,
    constant: BigRational,
    coeffs: BTreeMap<usize, BigRational>,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        debug_assert!(self.field.same_as(&other.field), "elements from different fields");
        self.constant == other.constant && self.coeffs == other.coeffs
    }
}

impl Eq for FieldElement {}

impl FieldElement {
    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn constant_part(&self) -> &BigRational {
        &self.constant
    }

    pub fn coefficient(&self, gen_idx: usize) -> BigRational {
        self.coeffs.get(&gen_idx).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Generator-coefficient vector with zeros dropped; the "irrational
    /// part" used for orbit-coefficient certificates.
    pub fn irrational_coeffs(&self) -> &BTreeMap<usize, BigRational> {
        &self.coeffs
    }

    pub fn is_rational(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty() && self.constant.is_zero()
    }

    fn normalized(mut self) -> Self {
        self.coeffs.retain(|_, c| !c.is_zero());
        self
    }

    pub fn add(&self, other: &FieldElement) -> FieldElement {
        assert!(self.field.same_as(&other.field), "elements from different fields");
        let mut coeffs = self.coeffs.clone();
        for (&idx, c) in &other.coeffs {
            let entry = coeffs.entry(idx).or_insert_with(BigRational::zero);
            *entry += c;
        }
        FieldElement {
            field: self.field.clone(),
            constant: &self.constant + &other.constant,
            coeffs,
        }
        .normalized()
    }

    pub fn sub(&self, other: &FieldElement) -> FieldElement {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> FieldElement {
        FieldElement {
            field: self.field.clone(),
            constant: -self.constant.clone(),
            coeffs: self.coeffs.iter().map(|(&i, c)| (i, -c.clone())).collect(),
        }
    }

    pub fn scale(&self, by: &BigRational) -> FieldElement {
        FieldElement {
            field: self.field.clone(),
            constant: &self.constant * by,
            coeffs: self.coeffs.iter().map(|(&i, c)| (i, c * by)).collect(),
        }
        .normalized()
    }

    pub fn scale_int(&self, by: i64) -> FieldElement {
        self.scale(&BigRational::from(BigInt::from(by)))
    }

    /// Multiplication is only defined when at least one side is rational.
    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement> {
        if other.is_rational() {
            Ok(self.scale(&other.constant))
        } else if self.is_rational() {
            Ok(other.scale(&self.constant))
        } else {
            Err(Error::IrrationalProduct)
        }
    }

    /// Exact trichotomy. `Equal` is structural; strict orders are decided
    /// by enclosure refinement and may fail only on a violated
    /// independence assertion.
    pub fn cmp_exact(&self, other: &FieldElement) -> Result<Ordering> {
        if self == other {
            return Ok(Ordering::Equal);
        }
        let diff = self.sub(other);
        if diff.coeffs.is_empty() {
            return Ok(diff.constant.cmp(&BigRational::zero()));
        }
        self.field.sign_of(&diff)
    }

    pub fn lt(&self, other: &FieldElement) -> Result<bool> {
        Ok(self.cmp_exact(other)? == Ordering::Less)
    }

    pub fn le(&self, other: &FieldElement) -> Result<bool> {
        Ok(self.cmp_exact(other)? != Ordering::Greater)
    }

    pub fn sign(&self) -> Result<Ordering> {
        self.cmp_exact(&self.field.zero())
    }

    /// Reduce into `[0, modulus)`, subtracting the unique integer multiple.
    pub fn reduce_mod(&self, modulus: u64) -> Result<FieldElement> {
        assert!(modulus >= 1, "modulus must be positive");
        let m = BigRational::from(BigInt::from(modulus));
        if self.coeffs.is_empty() {
            let k = (&self.constant / &m).floor();
            return Ok(FieldElement {
                field: self.field.clone(),
                constant: &self.constant - k * &m,
                coeffs: BTreeMap::new(),
            });
        }
        // Irrational element: floor(x/m) stabilizes once the enclosure of
        // x/m excludes every integer, which happens because x/m itself is
        // irrational.
        let mut states = self.field.0.states.lock().unwrap();
        let mut steps = 0usize;
        loop {
            let (lo, hi) = self.field.element_interval(&mut states, self);
            let klo = (&lo / &m).floor();
            let khi = (&hi / &m).floor();
            if klo == khi {
                let shift = klo * &m;
                drop(states);
                return Ok(FieldElement {
                    field: self.field.clone(),
                    constant: &self.constant - shift,
                    coeffs: self.coeffs.clone(),
                });
            }
            for (&idx, _) in &self.coeffs {
                if steps >= self.field.0.refine_budget {
                    return Err(Error::RefinementBudget { steps });
                }
                let spec = self.field.0.gens[idx].enclosure.clone();
                states[idx].refine(&spec);
                steps += 1;
            }
        }
    }

    /// If `x = m*g + n` exactly with integers `m, n` (where `g` is the named
    /// generator and no other generator occurs), return `(m, n)`.
    pub fn in_z_alpha(&self, generator: &str) -> Result<Option<(BigInt, BigInt)>> {
        let gi = self.field.generator_index(generator)?;
        if !self.constant.is_integer() {
            return Ok(None);
        }
        let mut m = BigInt::zero();
        for (&idx, c) in &self.coeffs {
            if idx != gi {
                return Ok(None);
            }
            if !c.is_integer() {
                return Ok(None);
            }
            m = c.to_integer();
        }
        Ok(Some((m, self.constant.to_integer())))
    }

    /// Double-precision approximation; probe-grade only, never feeds a
    /// verdict.
    pub fn to_f64(&self) -> f64 {
        let mut states = self.field.0.states.lock().unwrap();
        let (lo, hi) = self.field.element_interval(&mut states, self);
        drop(states);
        let two = BigRational::from(BigInt::from(2));
        rational_to_f64(&((lo + hi) / two))
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        if !self.constant.is_zero() || self.coeffs.is_empty() {
            write!(f, "{}", format_rational(&self.constant))?;
            wrote = true;
        }
        for (&idx, c) in &self.coeffs {
            let name = &self.field.0.gens[idx].name;
            let mag = c.abs();
            if wrote {
                write!(f, " {} ", if c.is_negative() { "-" } else { "+" })?;
            } else if c.is_negative() {
                write!(f, "-")?;
            }
            if mag.is_one() {
                write!(f, "{}", name)?;
            } else {
                write!(f, "{}*{}", format_rational(&mag), name)?;
            }
            wrote = true;
        }
        Ok(())
    }
}

fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

// ---------------------------------------------------------------------------
// expression parser: expr := ['-'] term (('+'|'-') term)*
//                    term := rational ['*' ident] | ident
// ---------------------------------------------------------------------------

fn parse_element(field: &Field, input: &str) -> Result<FieldElement> {
    let err = |reason: &str| Error::Parse { input: input.to_string(), reason: reason.to_string() };
    let mut acc = field.zero();
    let chars: Vec<char> = input.chars().collect();
    let mut pos = 0usize;
    let mut sign = 1i64;
    let mut expect_term = true;
    while pos < chars.len() {
        let c = chars[pos];
        if c.is_whitespace() {
            pos += 1;
            continue;
        }
        if expect_term {
            if c == '-' {
                sign = -sign;
                pos += 1;
                continue;
            }
            if c == '+' {
                pos += 1;
                continue;
            }
            let term = if c.is_ascii_digit() {
                let num = read_integer(&chars, &mut pos).ok_or_else(|| err("expected number"))?;
                let den = if pos < chars.len() && chars[pos] == '/' {
                    pos += 1;
                    let d =
                        read_integer(&chars, &mut pos).ok_or_else(|| err("expected denominator"))?;
                    if d.is_zero() {
                        return Err(err("zero denominator"));
                    }
                    d
                } else {
                    BigInt::one()
                };
                let coeff = BigRational::new(num, den);
                // optional '*ident'
                let save = pos;
                skip_ws(&chars, &mut pos);
                if pos < chars.len() && chars[pos] == '*' {
                    pos += 1;
                    skip_ws(&chars, &mut pos);
                    let name = read_ident(&chars, &mut pos).ok_or_else(|| err("expected generator"))?;
                    field.generator(&name)?.scale(&coeff)
                } else {
                    pos = save;
                    field.from_rational(coeff)
                }
            } else if c.is_ascii_alphabetic() {
                let name = read_ident(&chars, &mut pos).ok_or_else(|| err("expected generator"))?;
                field.generator(&name)?
            } else {
                return Err(err(&format!("unexpected character `{}`", c)));
            };
            acc = if sign >= 0 { acc.add(&term) } else { acc.sub(&term) };
            sign = 1;
            expect_term = false;
        } else {
            match c {
                '+' => {
                    sign = 1;
                    expect_term = true;
                    pos += 1;
                }
                '-' => {
                    sign = -1;
                    expect_term = true;
                    pos += 1;
                }
                _ => return Err(err(&format!("expected `+` or `-`, found `{}`", c))),
            }
        }
    }
    if expect_term && !acc.is_zero() {
        return Err(err("dangling operator"));
    }
    if input.trim().is_empty() {
        return Err(err("empty expression"));
    }
    Ok(acc)
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while *pos < chars.len() && chars[*pos].is_whitespace() {
        *pos += 1;
    }
}

fn read_integer(chars: &[char], pos: &mut usize) -> Option<BigInt> {
    let start = *pos;
    while *pos < chars.len() && chars[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return None;
    }
    chars[start..*pos].iter().collect::<String>().parse().ok()
}

fn read_ident(chars: &[char], pos: &mut usize) -> Option<String> {
    let start = *pos;
    if *pos < chars.len() && chars[*pos].is_ascii_alphabetic() {
        *pos += 1;
        while *pos < chars.len() && (chars[*pos].is_ascii_alphanumeric() || chars[*pos] == '_') {
            *pos += 1;
        }
        Some(chars[start..*pos].iter().collect())
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// sorting helpers over the fallible comparator
// ---------------------------------------------------------------------------

/// Insertion sort with the exact comparator; inputs are small everywhere
/// this is used (cut points, image boundaries).
pub fn exact_sort(items: &mut Vec<FieldElement>) -> Result<()> {
    for i in 1..items.len() {
        let mut j = i;
        while j > 0 && items[j - 1].cmp_exact(&items[j])? == Ordering::Greater {
            items.swap(j - 1, j);
            j -= 1;
        }
    }
    Ok(())
}

/// Sort and remove exact duplicates.
pub fn exact_sort_dedup(items: &mut Vec<FieldElement>) -> Result<()> {
    exact_sort(items)?;
    let mut out: Vec<FieldElement> = Vec::with_capacity(items.len());
    for x in items.drain(..) {
        if out.last().map(|l| l == &x) != Some(true) {
            out.push(x);
        }
    }
    *items = out;
    Ok(())
}

/// Binary search in an exactly sorted slice; returns the matching index.
pub fn exact_find(sorted: &[FieldElement], target: &FieldElement) -> Result<Option<usize>> {
    let mut lo = 0usize;
    let mut hi = sorted.len();
    while lo < hi {
        let mid = (lo + hi) / 2;
        match sorted[mid].cmp_exact(target)? {
            Ordering::Less => lo = mid + 1,
            Ordering::Greater => hi = mid,
            Ordering::Equal => return Ok(Some(mid)),
        }
    }
    Ok(None)
}

/// Index of the last element `<= target` in an exactly sorted slice.
pub fn exact_floor_index(sorted: &[FieldElement], target: &FieldElement) -> Result<Option<usize>> {
    let mut lo = 0usize;
    let mut hi = sorted.len();
    while lo < hi {
        let mid = (lo + hi) / 2;
        if sorted[mid].cmp_exact(target)? == Ordering::Greater {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(if lo == 0 { None } else { Some(lo - 1) })
}

/// A growing set of exact points with membership queries; used by orbit
/// coincidence scans.
#[derive(Default)]
pub struct ExactSet {
    items: Vec<(FieldElement, usize)>,
}

impl ExactSet {
    pub fn new() -> Self {
        ExactSet { items: Vec::new() }
    }

    /// Insert tagged point; on an exact collision returns the existing tag.
    pub fn insert(&mut self, x: FieldElement, tag: usize) -> Result<Option<usize>> {
        let mut lo = 0usize;
        let mut hi = self.items.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.items[mid].0.cmp_exact(&x)? {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Ok(Some(self.items[mid].1)),
            }
        }
        self.items.insert(lo, (x, tag));
        Ok(None)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt2_field() -> Field {
        // a = sqrt(2) - 1
        Field::new(vec![GeneratorSpec::surd("a", -1, 1, 1, 2)]).unwrap()
    }

    #[test]
    fn add_identity_and_cancellation() {
        let f = Field::new(vec![]).unwrap();
        let half = f.rational(1, 2);
        assert_eq!(half.add(&f.zero()), half);

        let f = sqrt2_field();
        let a = f.generator("a").unwrap();
        let x = f.rational(1, 3).add(&a);
        let y = f.rational(2, 3).sub(&a);
        assert_eq!(x.add(&y), f.one());
    }

    #[test]
    fn add_coefficientwise() {
        let f = Field::new(vec![GeneratorSpec::surd("s", 0, 1, 1, 2)]).unwrap();
        let s = f.generator("s").unwrap();
        let x = f.one().add(&s.scale_int(2));
        let y = f.integer(-1).add(&s.scale_int(3));
        assert_eq!(x.add(&y), s.scale_int(5));
    }

    #[test]
    fn compare_examples() {
        let f = Field::new(vec![]).unwrap();
        assert_eq!(f.rational(1, 2).cmp_exact(&f.rational(1, 2)).unwrap(), Ordering::Equal);

        // a = sqrt(2)-1: 3a ~ 1.2426 > 1  (checked against f64 below)
        let f = sqrt2_field();
        let a = f.generator("a").unwrap();
        let three_a = a.scale_int(3);
        assert!((three_a.to_f64() - 1.242_640_687).abs() < 1e-6);
        assert_eq!(three_a.cmp_exact(&f.one()).unwrap(), Ordering::Greater);

        // a = sqrt(2)/10 ~ 0.1414 < 1/5
        let f = Field::new(vec![GeneratorSpec::surd("a", 0, 1, 10, 2)]).unwrap();
        let a = f.generator("a").unwrap();
        assert!((a.to_f64() - 0.141_421_356).abs() < 1e-6);
        assert_eq!(a.cmp_exact(&f.rational(1, 5)).unwrap(), Ordering::Less);
    }

    #[test]
    fn reduce_mod_examples() {
        let f = Field::new(vec![]).unwrap();
        assert_eq!(f.rational(3, 2).reduce_mod(1).unwrap(), f.rational(1, 2));
        assert_eq!(f.zero().reduce_mod(1).unwrap(), f.zero());

        let f = sqrt2_field();
        let a = f.generator("a").unwrap();
        let three_a = a.scale_int(3);
        let expected = three_a.sub(&f.one());
        assert_eq!(three_a.reduce_mod(1).unwrap(), expected);
    }

    #[test]
    fn in_z_alpha_examples() {
        let f = sqrt2_field();
        let a = f.generator("a").unwrap();
        let x = a.scale_int(2);
        assert_eq!(x.in_z_alpha("a").unwrap(), Some((2.into(), 0.into())));
        let y = a.scale_int(3).sub(&f.one());
        assert_eq!(y.in_z_alpha("a").unwrap(), Some((3.into(), (-1).into())));
        assert_eq!(f.rational(1, 3).in_z_alpha("a").unwrap(), None);
        assert_eq!(f.integer(5).in_z_alpha("a").unwrap(), Some((0.into(), 5.into())));
    }

    #[test]
    fn continued_fraction_enclosure() {
        // [0; 2, 2, 2, ...] = sqrt(2) - 1
        let f =
            Field::new(vec![GeneratorSpec::continued_fraction("g", &[0], &[2])]).unwrap();
        let g = f.generator("g").unwrap();
        assert!((g.to_f64() - (2f64.sqrt() - 1.0)).abs() < 1e-9);
        assert_eq!(g.scale_int(3).cmp_exact(&f.one()).unwrap(), Ordering::Greater);
        // and against the surd representation of the same number
        let fs = sqrt2_field();
        let a = fs.generator("a").unwrap();
        assert!((g.to_f64() - a.to_f64()).abs() < 1e-12);
    }

    #[test]
    fn parser_round_trip() {
        let f = Field::new(vec![GeneratorSpec::surd("a", 0, 1, 10, 2)]).unwrap();
        for expr in ["1/3 + 2*a", "1 - a", "a", "0", "-1 + 3*a", "2*a - 1"] {
            let e = f.parse(expr).unwrap();
            let rt = f.parse(&e.to_string()).unwrap();
            assert_eq!(e, rt, "round trip failed for `{}`", expr);
        }
        assert_eq!(f.parse("1-a").unwrap(), f.one().sub(&f.generator("a").unwrap()));
        assert!(f.parse("1 + 2*zz").is_err());
        assert!(f.parse("").is_err());
        assert!(f.parse("1 +").is_err());
    }

    #[test]
    fn rejects_dependent_generators() {
        // sqrt(2) and sqrt(8) = 2*sqrt(2) are rationally dependent.
        let r = Field::new(vec![
            GeneratorSpec::surd("x", 0, 1, 1, 2),
            GeneratorSpec::surd("y", 0, 1, 1, 8),
        ]);
        assert!(r.is_err());
        // a perfect square is rejected outright
        assert!(Field::new(vec![GeneratorSpec::surd("x", 0, 1, 1, 4)]).is_err());
    }

    #[test]
    fn budget_error_reported() {
        let f = Field::with_budget(vec![GeneratorSpec::surd("a", 0, 1, 1, 2)], 3).unwrap();
        let a = f.generator("a").unwrap();
        // comparing a against an extremely close rational exhausts 3 steps
        let close = f.parse("577/408").unwrap(); // convergent of sqrt 2
        let very_close = close.scale(&BigRational::new(1.into(), 1.into()));
        // force many refinements: compare a with a rational within ~1e-12
        let r = a.cmp_exact(&very_close.sub(&f.one()));
        // either decided quickly or budget error; with budget 3 and a good
        // convergent it must still decide or fail cleanly
        match r {
            Ok(_) | Err(Error::RefinementBudget { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn concurrent_compare_smoke() {
        let f = sqrt2_field();
        let a = f.generator("a").unwrap();
        let mut handles = Vec::new();
        for k in 1..8 {
            let a = a.clone();
            let f = f.clone();
            handles.push(std::thread::spawn(move || {
                let x = a.scale_int(k);
                x.cmp_exact(&f.rational(k * 41, 100)).unwrap()
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
    }
}
