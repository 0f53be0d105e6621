//! Exact accumulation of truncated universal path sums and rigorous
//! enclosures of their limits.
//!
//! Every phase in scope is a dyadic fraction of a turn, so a sum of weighted
//! unit phasors is represented exactly as a finite map from phase to signed
//! dyadic coefficient, with an optional global factor of `2^-1/2`. Addition,
//! multiplication, conjugation, and rescaling are exact; conversion to a
//! floating complex number is explicitly lossy and exists for display and
//! float-oracle comparisons only.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};

use crate::bitcore::{DyadicRational, ParseDyadicError, PhaseFraction};
use crate::enumerator::ExplorationReport;

/// An exact signed number `numerator / 2^exponent`; the signed companion of
/// [`DyadicRational`] used for amplitude coefficients.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SignedDyadic {
    numer: BigInt,
    exp: u64,
}

impl SignedDyadic {
    pub fn new(numer: BigInt, exp: u64) -> Self {
        let mut d = SignedDyadic { numer, exp };
        d.canonicalize();
        d
    }

    pub fn zero() -> Self {
        SignedDyadic { numer: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        SignedDyadic { numer: BigInt::from(1), exp: 0 }
    }

    pub fn from_unsigned(value: &DyadicRational) -> Self {
        SignedDyadic {
            numer: BigInt::from_biguint(Sign::Plus, value.numerator().clone()),
            exp: value.exponent(),
        }
    }

    fn canonicalize(&mut self) {
        if self.numer.is_zero() {
            self.exp = 0;
            return;
        }
        let twos = self.numer.trailing_zeros().unwrap_or(0).min(self.exp);
        if twos > 0 {
            self.numer >>= twos;
            self.exp -= twos;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.numer.is_zero()
    }

    pub fn add(&self, other: &SignedDyadic) -> SignedDyadic {
        let exp = self.exp.max(other.exp);
        let a = &self.numer << (exp - self.exp) as usize;
        let b = &other.numer << (exp - other.exp) as usize;
        SignedDyadic::new(a + b, exp)
    }

    pub fn neg(&self) -> SignedDyadic {
        SignedDyadic { numer: -self.numer.clone(), exp: self.exp }
    }

    pub fn mul(&self, other: &SignedDyadic) -> SignedDyadic {
        SignedDyadic::new(&self.numer * &other.numer, self.exp + other.exp)
    }

    /// Exact division by `2^k`.
    pub fn div_pow2(&self, k: u64) -> SignedDyadic {
        SignedDyadic::new(self.numer.clone(), self.exp + k)
    }

    pub fn to_f64(&self) -> f64 {
        let (sign, mag) = self.numer.clone().into_parts();
        let v = biguint_scaled_to_f64(&mag, self.exp);
        if sign == Sign::Minus {
            -v
        } else {
            v
        }
    }
}

fn biguint_scaled_to_f64(numer: &BigUint, exp: u64) -> f64 {
    if numer.is_zero() {
        return 0.0;
    }
    let bits = numer.bits();
    if bits <= 64 {
        return numer.to_f64().unwrap_or(f64::MAX) * 2f64.powi(-(exp as i32));
    }
    let top: BigUint = numer >> (bits - 64) as usize;
    let top = top.to_f64().unwrap_or(f64::MAX);
    top * 2f64.powi((bits as i64 - 64 - exp as i64) as i32)
}

impl fmt::Display for SignedDyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numer, self.exp)
    }
}

impl fmt::Debug for SignedDyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SignedDyadic({self})")
    }
}

impl FromStr for SignedDyadic {
    type Err = ParseDyadicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let unsigned: DyadicRational = body.parse()?;
        let signed = SignedDyadic::from_unsigned(&unsigned);
        Ok(if neg { signed.neg() } else { signed })
    }
}

/// Adding amplitudes with scales `2^-h/2` of different parity would need an
/// irrational rescale, which the exact representation refuses to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("incompatible amplitude scales: 2^-{0}/2 vs 2^-{1}/2 differ by an odd power of sqrt(2)")]
pub struct ScaleMismatch(pub u8, pub u8);

/// An exact complex value `(1/sqrt 2)^s · Σ_q c_q e^{2πiq}` over dyadic
/// phases `q` with signed dyadic coefficients `c_q`.
///
/// Canonical form: phases live in `[0, 1/2)` (`e^{2πi(q+1/2)} = -e^{2πiq}`
/// folds the upper half-turn into negated coefficients), zero coefficients
/// are dropped, and even powers of `2^-1/2` are absorbed so `s` is 0 or 1.
/// On that range the dyadic-phase phasors are a power basis of their
/// cyclotomic field, so two amplitudes at equal scale represent the same
/// complex number if and only if they are structurally equal.
#[derive(Clone, PartialEq, Eq)]
pub struct ExactAmplitude {
    coeffs: BTreeMap<PhaseFraction, SignedDyadic>,
    scale_half: u8,
}

impl ExactAmplitude {
    pub fn zero() -> Self {
        ExactAmplitude { coeffs: BTreeMap::new(), scale_half: 0 }
    }

    pub fn one() -> Self {
        ExactAmplitude::term(PhaseFraction::zero(), SignedDyadic::one())
    }

    /// A single term `c · e^{2πiq}`.
    pub fn term(phase: PhaseFraction, coeff: SignedDyadic) -> Self {
        let mut coeffs = BTreeMap::new();
        merge_coeff(&mut coeffs, phase, coeff);
        ExactAmplitude { coeffs, scale_half: 0 }
    }

    /// Build from integer-coefficient terms carrying a global scale
    /// `2^-half_exponent/2`; the even part of the scale is folded into the
    /// coefficients exactly.
    pub fn with_scale(
        terms: impl IntoIterator<Item = (PhaseFraction, SignedDyadic)>,
        half_exponent: u64,
    ) -> Self {
        let absorb = half_exponent / 2;
        let parity = (half_exponent % 2) as u8;
        let mut coeffs: BTreeMap<PhaseFraction, SignedDyadic> = BTreeMap::new();
        for (phase, coeff) in terms {
            let scaled = coeff.div_pow2(absorb);
            merge_coeff(&mut coeffs, phase, scaled);
        }
        ExactAmplitude { coeffs, scale_half: parity }.normalized()
    }

    /// A value of zero carries no scale.
    fn normalized(mut self) -> Self {
        if self.coeffs.is_empty() {
            self.scale_half = 0;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Residual odd power of `2^-1/2` (0 or 1).
    pub fn scale_half_exponent(&self) -> u8 {
        self.scale_half
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&PhaseFraction, &SignedDyadic)> {
        self.coeffs.iter()
    }

    /// Coefficient-wise exact sum. Scales must agree in parity.
    pub fn add(&self, other: &ExactAmplitude) -> Result<ExactAmplitude, ScaleMismatch> {
        if !self.coeffs.is_empty() && !other.coeffs.is_empty() && self.scale_half != other.scale_half
        {
            return Err(ScaleMismatch(self.scale_half, other.scale_half));
        }
        let scale_half = if self.coeffs.is_empty() { other.scale_half } else { self.scale_half };
        let mut coeffs = self.coeffs.clone();
        for (phase, coeff) in &other.coeffs {
            merge_coeff(&mut coeffs, phase.clone(), coeff.clone());
        }
        Ok(ExactAmplitude { coeffs, scale_half }.normalized())
    }

    pub fn neg(&self) -> ExactAmplitude {
        ExactAmplitude {
            coeffs: self.coeffs.iter().map(|(q, c)| (q.clone(), c.neg())).collect(),
            scale_half: self.scale_half,
        }
    }

    pub fn sub(&self, other: &ExactAmplitude) -> Result<ExactAmplitude, ScaleMismatch> {
        self.add(&other.neg())
    }

    /// Complex conjugate: negate every phase mod 1.
    pub fn conj(&self) -> ExactAmplitude {
        let mut coeffs = BTreeMap::new();
        for (phase, coeff) in &self.coeffs {
            merge_coeff(&mut coeffs, phase.negate_mod1(), coeff.clone());
        }
        ExactAmplitude { coeffs, scale_half: self.scale_half }
    }

    /// Exact product: phases add mod 1, coefficients multiply, scales add
    /// (an even total is folded into the coefficients).
    pub fn mul(&self, other: &ExactAmplitude) -> ExactAmplitude {
        let mut terms = Vec::with_capacity(self.coeffs.len() * other.coeffs.len());
        for (p, a) in &self.coeffs {
            for (q, b) in &other.coeffs {
                terms.push((p.add_mod1(q), a.mul(b)));
            }
        }
        ExactAmplitude::with_scale(terms, (self.scale_half + other.scale_half) as u64)
    }

    /// Exact multiplication by a non-negative dyadic factor.
    pub fn scale_by(&self, factor: &DyadicRational) -> ExactAmplitude {
        let f = SignedDyadic::from_unsigned(factor);
        let mut coeffs = BTreeMap::new();
        for (phase, coeff) in &self.coeffs {
            merge_coeff(&mut coeffs, phase.clone(), coeff.mul(&f));
        }
        ExactAmplitude { coeffs, scale_half: self.scale_half }.normalized()
    }

    /// Evaluate in double precision. For amplitudes of at most `2^20` terms
    /// with unit total weight the relative error stays below `1e-12`; exact
    /// assertions must use the amplitude itself, never this value.
    pub fn to_complex(&self) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (phase, coeff) in &self.coeffs {
            let angle = std::f64::consts::TAU * phase.to_f64();
            acc += coeff.to_f64() * Complex64::new(angle.cos(), angle.sin());
        }
        if self.scale_half == 1 {
            acc *= std::f64::consts::FRAC_1_SQRT_2;
        }
        acc
    }

    /// True iff the real part cancels on the phase grid itself: fold each
    /// phase with `cos(2π(1-q)) = cos(2πq)` and `cos(2π(1/2-q)) = -cos(2πq)`,
    /// drop the quarter turn (cosine zero), and check that every folded
    /// coefficient vanishes.
    pub fn real_part_symbolically_zero(&self) -> bool {
        let half = DyadicRational::pow2_neg(1);
        let quarter = DyadicRational::pow2_neg(2);
        let mut folded: BTreeMap<DyadicRational, SignedDyadic> = BTreeMap::new();
        for (phase, coeff) in &self.coeffs {
            let mut q = phase.turn().clone();
            let mut signed = coeff.clone();
            if q > half {
                q = DyadicRational::one().checked_sub(&q).expect("phase below one");
            }
            match q.cmp(&quarter) {
                Ordering::Equal => continue,
                Ordering::Greater => {
                    q = half.checked_sub(&q).expect("phase at most a half here");
                    signed = signed.neg();
                }
                Ordering::Less => {}
            }
            let entry = folded.entry(q).or_insert_with(SignedDyadic::zero);
            *entry = entry.add(&signed);
        }
        folded.values().all(SignedDyadic::is_zero)
    }
}

fn merge_coeff(
    coeffs: &mut BTreeMap<PhaseFraction, SignedDyadic>,
    phase: PhaseFraction,
    coeff: SignedDyadic,
) {
    if coeff.is_zero() {
        return;
    }
    let half = DyadicRational::pow2_neg(1);
    let (phase, coeff) = if *phase.turn() >= half {
        let folded = phase.turn().checked_sub(&half).expect("phase below one");
        (PhaseFraction::from_dyadic(folded), coeff.neg())
    } else {
        (phase, coeff)
    };
    match coeffs.entry(phase) {
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(coeff);
        }
        std::collections::btree_map::Entry::Occupied(mut o) => {
            let sum = o.get().add(&coeff);
            if sum.is_zero() {
                o.remove();
            } else {
                *o.get_mut() = sum;
            }
        }
    }
}

impl fmt::Debug for ExactAmplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExactAmplitude[s={}]{{", self.scale_half)?;
        for (i, (q, c)) in self.coeffs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{q}: {c}")?;
        }
        f.write_str("}")
    }
}

/// Exact sum over free amplitude terms.
pub fn amplitude_add(a: &ExactAmplitude, b: &ExactAmplitude) -> Result<ExactAmplitude, ScaleMismatch> {
    a.add(b)
}

/// The paper-faithful truncation: every halting program contributes its
/// measure at its output phase, and all unresolved mass contributes at phase
/// zero (non-halting inputs read as output 0).
pub fn sigma_paper(report: &ExplorationReport) -> ExactAmplitude {
    let mut acc = sigma_halted(report);
    if !report.unresolved_mass.is_zero() {
        acc = acc
            .add(&ExactAmplitude::term(
                PhaseFraction::zero(),
                SignedDyadic::from_unsigned(&report.unresolved_mass),
            ))
            .expect("measure terms share the unit scale");
    }
    acc
}

/// The halted-only phase sum.
pub fn sigma_halted(report: &ExplorationReport) -> ExactAmplitude {
    let terms = report
        .halted
        .iter()
        .map(|r| (r.phase.clone(), SignedDyadic::from_unsigned(&r.measure)));
    ExactAmplitude::with_scale(terms, 0)
}

/// A disk with exact center and exact radius that is guaranteed to contain
/// the limiting path sum: every unit of unresolved measure eventually lands
/// somewhere on the closed unit disk (a phase if it halts later, +1 if it
/// never does), never farther than `radius` from the center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enclosure {
    pub center: ExactAmplitude,
    pub radius: DyadicRational,
}

/// Enclosure of the `t -> ∞` limit from a budgeted report: center is the
/// halted-only sum, radius is the unresolved mass.
pub fn sigma_enclosure(report: &ExplorationReport) -> Enclosure {
    Enclosure { center: sigma_halted(report), radius: report.unresolved_mass.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcore::BitString;
    use crate::enumerator::{explore, ExploreBudget};
    use crate::machine::Dialect;
    use proptest::prelude::*;

    fn dy(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    fn sd(s: &str) -> SignedDyadic {
        s.parse().unwrap()
    }

    fn ph(s: &str) -> PhaseFraction {
        s.parse().unwrap()
    }

    #[test]
    fn sigma_paper_len4_is_one() {
        let report = explore(ExploreBudget::new(4, 100), Dialect::A);
        let sigma = sigma_paper(&report);
        assert_eq!(sigma, ExactAmplitude::one());
        assert_eq!(sigma.to_complex(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn sigma_paper_len6_is_62_64ths() {
        // 1/16 + 1/64 + 58/64 at phase 0, minus the 1/64 at the half turn
        // contributed by 011111 (output "1").
        let report = explore(ExploreBudget::new(6, 100), Dialect::A);
        let sigma = sigma_paper(&report);
        assert_eq!(sigma, ExactAmplitude::term(ph("0/2^0"), sd("31/2^5")));
        let v = sigma.to_complex();
        assert!((v.re - 0.96875).abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn sigma_paper_of_empty_report_is_one() {
        let report = explore(ExploreBudget::new(1, 100), Dialect::A);
        assert_eq!(sigma_paper(&report), ExactAmplitude::one());
    }

    #[test]
    fn enclosure_examples() {
        let report = explore(ExploreBudget::new(4, 100), Dialect::A);
        let disk = sigma_enclosure(&report);
        assert_eq!(disk.center, ExactAmplitude::term(PhaseFraction::zero(), sd("1/2^4")));
        assert_eq!(disk.radius, dy("15/2^4"));

        let report6 = explore(ExploreBudget::new(6, 100), Dialect::A);
        let disk6 = sigma_enclosure(&report6);
        let v = disk6.center.to_complex();
        assert!((v.re - 0.0625).abs() < 1e-15 && v.im.abs() < 1e-15);
        assert_eq!(disk6.radius, dy("58/2^6"));
    }

    #[test]
    fn paper_sum_equals_center_plus_unresolved_exactly() {
        for budget in [ExploreBudget::new(6, 100), ExploreBudget::new(10, 300)] {
            let report = explore(budget, Dialect::A);
            let disk = sigma_enclosure(&report);
            let unresolved_term = ExactAmplitude::term(
                PhaseFraction::zero(),
                SignedDyadic::from_unsigned(&report.unresolved_mass),
            );
            assert_eq!(sigma_paper(&report), disk.center.add(&unresolved_term).unwrap());
        }
    }

    #[test]
    fn modulus_never_exceeds_one() {
        for (len, steps) in [(4, 100), (8, 50), (12, 400)] {
            let report = explore(ExploreBudget::new(len, steps), Dialect::A);
            assert!(sigma_paper(&report).to_complex().norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn nested_enclosures_as_budget_grows() {
        let ladder = [
            ExploreBudget::new(8, 30),
            ExploreBudget::new(10, 100),
            ExploreBudget::new(12, 400),
        ];
        let disks: Vec<Enclosure> =
            ladder.iter().map(|b| sigma_enclosure(&explore(*b, Dialect::A))).collect();
        for pair in disks.windows(2) {
            let (old, new) = (&pair[0], &pair[1]);
            assert!(new.radius <= old.radius);
            let shift = new.center.sub(&old.center).unwrap().to_complex().norm();
            let shrink = old.radius.to_f64() - new.radius.to_f64();
            assert!(shift <= shrink + 1e-12, "disks not nested: moved {shift}, shrank {shrink}");
        }
    }

    #[test]
    fn amplitude_add_examples() {
        let a = ExactAmplitude::term(ph("0/2^0"), sd("1/2^6"));
        assert_eq!(amplitude_add(&a, &ExactAmplitude::zero()).unwrap(), a);

        // e^{iπ} = -1, so opposite half-turn terms cancel to exactly zero.
        let b = ExactAmplitude::term(ph("1/2^1"), sd("1/2^6"));
        let sum = amplitude_add(&a, &b).unwrap();
        assert!(sum.is_zero());
        assert_eq!(sum.to_complex().norm(), 0.0);
    }

    #[test]
    fn cancellation_removes_coefficients() {
        let a = ExactAmplitude::term(ph("1/2^3"), sd("5/2^2"));
        let diff = a.sub(&a).unwrap();
        assert!(diff.is_zero());
        assert_eq!(diff, ExactAmplitude::zero());
    }

    #[test]
    fn odd_scale_parity_is_rejected() {
        let unit = ExactAmplitude::one();
        let root2 = ExactAmplitude::with_scale([(ph("0/2^0"), sd("1/2^0"))], 1);
        assert_eq!(unit.add(&root2), Err(ScaleMismatch(0, 1)));
        // Even powers absorb exactly.
        let quarter = ExactAmplitude::with_scale([(ph("0/2^0"), sd("1/2^0"))], 4);
        assert_eq!(quarter, ExactAmplitude::term(ph("0/2^0"), sd("1/2^2")));
    }

    #[test]
    fn to_complex_examples() {
        assert_eq!(ExactAmplitude::one().to_complex(), Complex64::new(1.0, 0.0));

        let t = ExactAmplitude::term(ph("1/2^4"), sd("1/2^0")).to_complex();
        let angle = std::f64::consts::PI / 8.0;
        assert!((t.re - angle.cos()).abs() < 1e-15);
        assert!((t.im - angle.sin()).abs() < 1e-15);

        let cancel = ExactAmplitude::with_scale(
            [(ph("0/2^0"), sd("1/2^0")), (ph("1/2^1"), sd("1/2^0"))],
            0,
        );
        assert!(cancel.to_complex().norm() < 1e-15);
    }

    #[test]
    fn symbolic_real_zero_detection() {
        // e^{2πi/4} is purely imaginary.
        assert!(ExactAmplitude::term(ph("1/2^2"), sd("7/2^1")).real_part_symbolically_zero());
        // cos(π/4) + cos(3π/4) = 0.
        let folded = ExactAmplitude::with_scale(
            [(ph("1/2^3"), sd("1/2^0")), (ph("3/2^3"), sd("1/2^0"))],
            0,
        );
        assert!(folded.real_part_symbolically_zero());
        // cos(0) alone does not cancel.
        assert!(!ExactAmplitude::one().real_part_symbolically_zero());
    }

    #[test]
    fn conj_mul_matches_float_route() {
        let a = ExactAmplitude::with_scale(
            [(ph("1/2^4"), sd("3/2^2")), (ph("1/2^1"), sd("-1/2^0"))],
            1,
        );
        let b = ExactAmplitude::with_scale(
            [(ph("7/2^4"), sd("1/2^1")), (ph("0/2^0"), sd("5/2^3"))],
            3,
        );
        let exact = a.mul(&b.conj()).to_complex();
        let float = a.to_complex() * b.to_complex().conj();
        assert!((exact - float).norm() < 1e-12);
    }

    prop_compose! {
        fn arb_amp()(
            terms in proptest::collection::vec(
                ((0u64..64, 0u64..7), (-40i64..40, 0u64..6)),
                0..6,
            ),
            parity in 0u64..2,
        ) -> ExactAmplitude {
            let terms = terms.into_iter().map(|((pn, pe), (cn, ce))| {
                (
                    PhaseFraction::from_dyadic(DyadicRational::new(BigUint::from(pn), pe)),
                    SignedDyadic::new(BigInt::from(cn), ce),
                )
            });
            ExactAmplitude::with_scale(terms, parity)
        }
    }

    proptest! {
        #[test]
        fn add_matches_float_oracle(a in arb_amp(), b in arb_amp()) {
            if let Ok(sum) = amplitude_add(&a, &b) {
                let exact = sum.to_complex();
                let float = a.to_complex() + b.to_complex();
                prop_assert!((exact - float).norm() < 1e-12);
            }
        }

        #[test]
        fn conj_is_involutive(a in arb_amp()) {
            prop_assert_eq!(a.conj().conj(), a);
        }

        #[test]
        fn symbolic_zero_implies_float_zero(a in arb_amp(), b in arb_amp()) {
            let prod = a.mul(&b.conj());
            if prod.real_part_symbolically_zero() {
                prop_assert!(prod.to_complex().re.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn phase_oracle_equality_shape() {
        // sigma_paper over a report equals the same accumulation done from
        // raw terms; guards the canonical-form assumption used by the
        // circuit-side bridge.
        let report = explore(ExploreBudget::new(8, 100), Dialect::A);
        let mut terms: Vec<(PhaseFraction, SignedDyadic)> = report
            .halted
            .iter()
            .map(|r| (r.phase.clone(), SignedDyadic::from_unsigned(&r.measure)))
            .collect();
        terms.push((PhaseFraction::zero(), SignedDyadic::from_unsigned(&report.unresolved_mass)));
        assert_eq!(sigma_paper(&report), ExactAmplitude::with_scale(terms, 0));
        let _ = BitString::new();
    }
}
