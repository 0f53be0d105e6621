//! Bit strings and exact dyadic arithmetic.
//!
//! Everything downstream (program enumeration, measures, phases, amplitudes)
//! is built on two value types: [`BitString`], a packed sequence of bits, and
//! [`DyadicRational`], an exact non-negative number of the form `m / 2^e`.
//! [`PhaseFraction`] is a dyadic rational reduced mod 1, read as a fraction of
//! a full turn. No operation here ever rounds.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// A finite ordered sequence of bits, packed MSB-first into 64-bit words.
///
/// Unused trailing bits of the last word are kept zero, so derived equality
/// and hashing agree with bit-level equality. Indexed reads are O(1) and
/// appends are amortized O(1).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Append a bit.
    pub fn push(&mut self, bit: bool) {
        let word = self.len / 64;
        let off = self.len % 64;
        if off == 0 {
            self.words.push(0);
        }
        if bit {
            self.words[word] |= 1u64 << (63 - off);
        }
        self.len += 1;
    }

    /// Read the bit at `index`. Panics if out of range.
    pub fn get(&self, index: usize) -> bool {
        assert!(index < self.len, "bit index {index} out of range {}", self.len);
        (self.words[index / 64] >> (63 - index % 64)) & 1 == 1
    }

    /// Read the bit at `index`, or `None` past the end.
    pub fn try_get(&self, index: usize) -> Option<bool> {
        (index < self.len).then(|| self.get(index))
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Append all bits of `other`.
    pub fn extend_from(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push(b);
        }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    /// The low `width` bits of `value`, MSB first.
    pub fn from_u64_msb(value: u64, width: usize) -> BitString {
        assert!(width <= 64);
        let mut out = BitString::new();
        for i in (0..width).rev() {
            out.push((value >> i) & 1 == 1);
        }
        out
    }

    /// True iff `self` is a (not necessarily proper) prefix of `other`.
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        if self.len > other.len {
            return false;
        }
        let full = self.len / 64;
        if self.words[..full] != other.words[..full] {
            return false;
        }
        let rem = self.len % 64;
        if rem == 0 {
            return true;
        }
        let shift = 64 - rem;
        (self.words[full] >> shift) == (other.words[full] >> shift)
    }

    /// The bit pattern read as an integer (empty string reads as 0).
    pub fn to_biguint(&self) -> BigUint {
        let mut bytes = Vec::with_capacity(self.len / 8 + 1);
        let mut acc = 0u8;
        let mut nbits = 0;
        for b in self.iter() {
            acc = (acc << 1) | b as u8;
            nbits += 1;
            if nbits == 8 {
                bytes.push(acc);
                acc = 0;
                nbits = 0;
            }
        }
        if nbits > 0 {
            // Left-align the partial byte, then shift the padding back out.
            bytes.push(acc << (8 - nbits));
            BigUint::from_bytes_be(&bytes) >> (8 - nbits)
        } else {
            BigUint::from_bytes_be(&bytes)
        }
    }
}

impl Ord for BitString {
    /// Lexicographic order; a proper prefix sorts before its extensions.
    fn cmp(&self, other: &Self) -> Ordering {
        let min_len = self.len.min(other.len);
        let full = min_len / 64;
        for i in 0..full {
            match self.words[i].cmp(&other.words[i]) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        let rem = min_len % 64;
        if rem > 0 {
            let shift = 64 - rem;
            let a = self.words[full] >> shift;
            let b = other.words[full] >> shift;
            match a.cmp(&b) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid bit character {0:?}; expected '0' or '1'")]
pub struct ParseBitStringError(char);

impl FromStr for BitString {
    type Err = ParseBitStringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = BitString::new();
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                other => return Err(ParseBitStringError(other)),
            }
        }
        Ok(out)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut out = BitString::new();
        for b in iter {
            out.push(b);
        }
        out
    }
}

/// True iff `a != b` and `b` begins with `a`.
pub fn is_proper_prefix(a: &BitString, b: &BitString) -> bool {
    a.len() < b.len() && a.is_prefix_of(b)
}

/// An exact non-negative number `numerator / 2^exponent`.
///
/// Canonical form: the numerator is odd or zero, and zero has exponent 0.
/// Arithmetic is exact; there is no rounding anywhere.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    numer: BigUint,
    exp: u64,
}

impl DyadicRational {
    /// `numer / 2^exp`, reduced to canonical form.
    pub fn new(numer: BigUint, exp: u64) -> Self {
        let mut d = DyadicRational { numer, exp };
        d.canonicalize();
        d
    }

    pub fn zero() -> Self {
        DyadicRational { numer: BigUint::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        DyadicRational { numer: BigUint::from(1u8), exp: 0 }
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u64) -> Self {
        DyadicRational { numer: BigUint::from(1u8), exp: k }
    }

    pub fn is_zero(&self) -> bool {
        self.numer.is_zero()
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numer
    }

    pub fn exponent(&self) -> u64 {
        self.exp
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

    pub fn add(&self, other: &DyadicRational) -> DyadicRational {
        let exp = self.exp.max(other.exp);
        let a = &self.numer << (exp - self.exp) as usize;
        let b = &other.numer << (exp - other.exp) as usize;
        DyadicRational::new(a + b, exp)
    }

    /// `self - other`, or `None` when the result would be negative.
    pub fn checked_sub(&self, other: &DyadicRational) -> Option<DyadicRational> {
        let exp = self.exp.max(other.exp);
        let a = &self.numer << (exp - self.exp) as usize;
        let b = &other.numer << (exp - other.exp) as usize;
        (a >= b).then(|| DyadicRational::new(a - b, exp))
    }

    pub fn mul(&self, other: &DyadicRational) -> DyadicRational {
        DyadicRational::new(&self.numer * &other.numer, self.exp + other.exp)
    }

    /// Lossy conversion for display and float-oracle comparisons.
    pub fn to_f64(&self) -> f64 {
        biguint_scaled_to_f64(&self.numer, self.exp)
    }
}

/// `numer * 2^-exp` in double precision, stable for numerators far beyond
/// the f64 range (top 64 bits are extracted before scaling).
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
    let scale = bits as i64 - 64 - exp as i64;
    top * 2f64.powi(scale as i32)
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let exp = self.exp.max(other.exp);
        let a = &self.numer << (exp - self.exp) as usize;
        let b = &other.numer << (exp - other.exp) as usize;
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DyadicRational {
    /// Canonical text rendering `m/2^e`, used verbatim in CLI output and
    /// cache files.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numer, self.exp)
    }
}

impl fmt::Debug for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DyadicRational({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid dyadic rational {0:?}; expected \"m/2^e\"")]
pub struct ParseDyadicError(String);

impl FromStr for DyadicRational {
    type Err = ParseDyadicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseDyadicError(s.to_owned());
        let (m, e) = s.split_once("/2^").ok_or_else(bad)?;
        let numer = BigUint::from_str(m).map_err(|_| bad())?;
        let exp = u64::from_str(e).map_err(|_| bad())?;
        Ok(DyadicRational::new(numer, exp))
    }
}

/// A phase angle expressed as a dyadic fraction of a full turn, kept in
/// `[0, 1)`. The angle is `2π · turn`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhaseFraction {
    turn: DyadicRational,
}

impl PhaseFraction {
    /// Reduce an arbitrary dyadic value mod 1.
    pub fn from_dyadic(value: DyadicRational) -> Self {
        let modulus = BigUint::from(1u8) << value.exp as usize;
        let numer = value.numer % modulus;
        PhaseFraction { turn: DyadicRational::new(numer, value.exp) }
    }

    pub fn zero() -> Self {
        PhaseFraction { turn: DyadicRational::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.turn.is_zero()
    }

    pub fn turn(&self) -> &DyadicRational {
        &self.turn
    }

    /// Exact mod-1 sum.
    pub fn add_mod1(&self, other: &PhaseFraction) -> PhaseFraction {
        PhaseFraction::from_dyadic(self.turn.add(&other.turn))
    }

    /// The conjugate phase `-turn mod 1`.
    pub fn negate_mod1(&self) -> PhaseFraction {
        if self.turn.is_zero() {
            return PhaseFraction::zero();
        }
        PhaseFraction {
            turn: DyadicRational::one()
                .checked_sub(&self.turn)
                .expect("phase fraction is below 1"),
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.turn.to_f64()
    }
}

impl fmt::Display for PhaseFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.turn.fmt(f)
    }
}

impl fmt::Debug for PhaseFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhaseFraction({})", self.turn)
    }
}

impl FromStr for PhaseFraction {
    type Err = ParseDyadicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(PhaseFraction::from_dyadic(DyadicRational::from_str(s)?))
    }
}

/// The binary-fraction value of a bit string: `Σ_k b_k 2^-k`, exactly.
/// Always lands in `[0, 1)`.
pub fn bits_to_dyadic(bits: &BitString) -> DyadicRational {
    DyadicRational::new(bits.to_biguint(), bits.len() as u64)
}

/// [`bits_to_dyadic`] wrapped into a phase; bit-string values never reach 1.
pub fn bits_to_phase(bits: &BitString) -> PhaseFraction {
    PhaseFraction::from_dyadic(bits_to_dyadic(bits))
}

/// Exact mod-1 phase addition.
pub fn dyadic_add_mod1(x: &PhaseFraction, y: &PhaseFraction) -> PhaseFraction {
    x.add_mod1(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn dy(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    #[test]
    fn bits_to_dyadic_examples() {
        assert_eq!(bits_to_dyadic(&bs("1011")), dy("11/2^4"));
        assert_eq!(bits_to_dyadic(&bs("")), DyadicRational::zero());
        assert_eq!(bits_to_dyadic(&bs("1")), dy("1/2^1"));
    }

    #[test]
    fn proper_prefix_examples() {
        assert!(is_proper_prefix(&bs("10"), &bs("1011")));
        assert!(!is_proper_prefix(&bs("10"), &bs("10")));
        assert!(!is_proper_prefix(&bs("11"), &bs("1011")));
    }

    #[test]
    fn add_mod1_examples() {
        let half = PhaseFraction::from_dyadic(dy("1/2^1"));
        assert_eq!(dyadic_add_mod1(&half, &half), PhaseFraction::zero());

        let a = PhaseFraction::from_dyadic(dy("11/2^4"));
        let b = PhaseFraction::from_dyadic(dy("7/2^4"));
        assert_eq!(dyadic_add_mod1(&a, &b), PhaseFraction::from_dyadic(dy("1/2^3")));

        let q = PhaseFraction::from_dyadic(dy("5/2^3"));
        assert_eq!(dyadic_add_mod1(&PhaseFraction::zero(), &q), q);
    }

    #[test]
    fn dyadic_display_roundtrip() {
        for s in ["0/2^0", "1/2^0", "11/2^4", "31/2^5"] {
            assert_eq!(dy(s).to_string(), s);
        }
        // Non-canonical input reduces.
        assert_eq!(dy("62/2^6").to_string(), "31/2^5");
        assert_eq!(dy("0/2^9").to_string(), "0/2^0");
    }

    #[test]
    fn dyadic_ordering() {
        assert!(dy("1/2^2") < dy("1/2^1"));
        assert!(dy("3/2^2") < dy("1/2^0"));
        assert_eq!(dy("2/2^2").cmp(&dy("1/2^1")), Ordering::Equal);
    }

    #[test]
    fn phase_negation() {
        let q = PhaseFraction::from_dyadic(dy("3/2^3"));
        assert_eq!(q.add_mod1(&q.negate_mod1()), PhaseFraction::zero());
        assert_eq!(PhaseFraction::zero().negate_mod1(), PhaseFraction::zero());
    }

    #[test]
    fn scaled_to_f64_handles_huge_numerators() {
        // value = (2^200 + 1) / 2^201 ~ 0.5
        let numer = (BigUint::from(1u8) << 200usize) + 1u8;
        let v = DyadicRational::new(numer, 201).to_f64();
        assert!((v - 0.5).abs() < 1e-12);
    }

    prop_compose! {
        fn arb_bits(max_len: usize)(v in proptest::collection::vec(any::<bool>(), 0..max_len)) -> BitString {
            v.into_iter().collect()
        }
    }

    proptest! {
        #[test]
        fn packed_bits_match_model(v in proptest::collection::vec(any::<bool>(), 0..200)) {
            let b: BitString = v.iter().copied().collect();
            prop_assert_eq!(b.len(), v.len());
            for (i, &bit) in v.iter().enumerate() {
                prop_assert_eq!(b.get(i), bit);
            }
            prop_assert_eq!(b.to_string(), v.iter().map(|&x| if x { '1' } else { '0' }).collect::<String>());
        }

        #[test]
        fn ordering_matches_model(a in arb_bits(80), b in arb_bits(80)) {
            let va: Vec<bool> = a.iter().collect();
            let vb: Vec<bool> = b.iter().collect();
            prop_assert_eq!(a.cmp(&b), va.cmp(&vb));
            prop_assert_eq!(a.is_prefix_of(&b), vb.starts_with(&va));
        }

        #[test]
        fn to_biguint_matches_fold(b in arb_bits(150)) {
            let model = b.iter().fold(BigUint::zero(), |acc, bit| (acc << 1u8) + bit as u8);
            prop_assert_eq!(b.to_biguint(), model);
        }

        #[test]
        fn value_in_unit_interval(b in arb_bits(120)) {
            let v = bits_to_dyadic(&b);
            prop_assert!(v < DyadicRational::one());
        }

        #[test]
        fn appending_zero_keeps_value(b in arb_bits(120)) {
            let mut extended = b.clone();
            extended.push(false);
            prop_assert_eq!(bits_to_dyadic(&b), bits_to_dyadic(&extended));
        }

        #[test]
        fn prefix_implies_interval_containment(a in arb_bits(40), suffix in arb_bits(40)) {
            // b extends a, so [val(b), val(b) + 2^-|b|] ⊆ [val(a), val(a) + 2^-|a|].
            let b = a.concat(&suffix);
            let lo_a = bits_to_dyadic(&a);
            let hi_a = lo_a.add(&DyadicRational::pow2_neg(a.len() as u64));
            let lo_b = bits_to_dyadic(&b);
            let hi_b = lo_b.add(&DyadicRational::pow2_neg(b.len() as u64));
            prop_assert!(lo_a <= lo_b);
            prop_assert!(hi_b <= hi_a);
        }

        #[test]
        fn add_sub_roundtrip(m1 in 0u64..1 << 40, e1 in 0u64..50, m2 in 0u64..1 << 40, e2 in 0u64..50) {
            let x = DyadicRational::new(BigUint::from(m1), e1);
            let y = DyadicRational::new(BigUint::from(m2), e2);
            let roundtrip = x.add(&y).checked_sub(&y).unwrap();
            prop_assert_eq!(roundtrip, x);
        }

        #[test]
        fn phase_add_stays_reduced(m1 in 0u64..1 << 30, e1 in 0u64..32, m2 in 0u64..1 << 30, e2 in 0u64..32) {
            let x = PhaseFraction::from_dyadic(DyadicRational::new(BigUint::from(m1), e1));
            let y = PhaseFraction::from_dyadic(DyadicRational::new(BigUint::from(m2), e2));
            let s = x.add_mod1(&y);
            prop_assert!(*s.turn() < DyadicRational::one());
        }
    }
}
