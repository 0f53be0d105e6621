//! Feynman path sums over {CNOT, H, T} circuits with exact phase buckets,
//! a dense state-vector oracle, the phase-operator expectation that bridges
//! circuit language and program enumeration, and the ancilla construction
//! that turns the real part of that expectation into a measurement
//! probability.
//!
//! Conventions, used identically by the exact path sum and the float oracle:
//! the T gate applies `e^{+iπ/8}` to a 0 bit and `e^{-iπ/8}` to a 1 bit
//! (that is, ±1/16 of a turn); an H transition `a -> b` carries weight
//! `2^-1/2` and sign `(-1)^{a·b}`. Qubit `i` of an n-qubit basis label is
//! bit `i` of a [`BitString`] and bit `i` (LSB-first) of a state index.

use std::fmt;

use num_complex::Complex64;

use crate::bitcore::{BitString, DyadicRational, PhaseFraction};
use crate::enumerator::{explore, ExploreBudget};
use crate::machine::{run, Dialect, ExecResult};
use crate::pathsum::{sigma_paper, ExactAmplitude, SignedDyadic};

/// One gate of the {CNOT, Hadamard, π/8} set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Cnot { control: usize, target: usize },
    H(usize),
    T(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CircuitError {
    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("CNOT control and target are both qubit {0}")]
    ControlEqualsTarget(usize),
    #[error("basis state {found} bits does not match {n} qubits")]
    DimensionMismatch { found: usize, n: usize },
    #[error("{what} supports at most {limit} qubits, got {n}")]
    SizeBound { what: &'static str, limit: usize, n: usize },
    #[error("the real-part construction needs a diagonal circuit; gate {0} is not a T gate")]
    NonDiagonal(String),
    #[error("circuit line {line}: cannot parse {text:?}")]
    Parse { line: usize, text: String },
}

/// An ordered gate list over `n` qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        for gate in &gates {
            match *gate {
                Gate::H(q) | Gate::T(q) => {
                    if q >= n {
                        return Err(CircuitError::QubitOutOfRange { index: q, n });
                    }
                }
                Gate::Cnot { control, target } => {
                    if control >= n {
                        return Err(CircuitError::QubitOutOfRange { index: control, n });
                    }
                    if target >= n {
                        return Err(CircuitError::QubitOutOfRange { index: target, n });
                    }
                    if control == target {
                        return Err(CircuitError::ControlEqualsTarget(control));
                    }
                }
            }
        }
        Ok(Circuit { n, gates })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Number of Hadamard gates; each one doubles the path count.
    pub fn hadamard_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::H(_))).count()
    }

    /// Parse the one-gate-per-line text format: `H q`, `T q`, `CNOT c t`.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(n: usize, text: &str) -> Result<Self, CircuitError> {
        let mut gates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = || CircuitError::Parse { line: idx + 1, text: raw.to_owned() };
            let mut parts = line.split_whitespace();
            let op = parts.next().ok_or_else(err)?;
            let mut arg = || -> Result<usize, CircuitError> {
                parts.next().and_then(|t| t.parse().ok()).ok_or_else(err)
            };
            let gate = match op {
                "H" => Gate::H(arg()?),
                "T" => Gate::T(arg()?),
                "CNOT" => Gate::Cnot { control: arg()?, target: arg()? },
                _ => return Err(err()),
            };
            if parts.next().is_some() {
                return Err(err());
            }
            gates.push(gate);
        }
        Circuit::new(n, gates)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for gate in &self.gates {
            match *gate {
                Gate::H(q) => writeln!(f, "H {q}")?,
                Gate::T(q) => writeln!(f, "T {q}")?,
                Gate::Cnot { control, target } => writeln!(f, "CNOT {control} {target}")?,
            }
        }
        Ok(())
    }
}

/// Result of an exact path-sum evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSumResult {
    /// Transition amplitude with global scale `2^-h/2`.
    pub amplitude: ExactAmplitude,
    /// Total branch count `2^h`, examined or pruned.
    pub path_count: u128,
    pub hadamard_count: u32,
}

fn bits_to_mask(bits: &BitString) -> u64 {
    let mut mask = 0u64;
    for (i, b) in bits.iter().enumerate() {
        mask |= (b as u64) << i;
    }
    mask
}

const SIXTEENTH: u64 = 16;

/// Phase bucket arithmetic on the 1/16-turn grid, as a plain counter.
fn sixteenth_phase(k: u64) -> PhaseFraction {
    PhaseFraction::from_dyadic(DyadicRational::new((k % SIXTEENTH).into(), 4))
}

struct PathSummer<'c> {
    gates: &'c [Gate],
    out_mask: u64,
    /// For each gate index, the number of H gates at or after it.
    h_suffix: Vec<u32>,
    /// Required classical state entering the H-free tail, reached by pulling
    /// `out_mask` back through the tail's CNOTs.
    tail_required: u64,
    prune: bool,
    /// Accumulated terms as (phase sixteenths, ±1) counts.
    buckets: [i64; 16],
}

impl<'c> PathSummer<'c> {
    fn new(circuit: &'c Circuit, out_mask: u64, prune: bool) -> Self {
        let gates = circuit.gates();
        let mut h_suffix = vec![0u32; gates.len() + 1];
        for i in (0..gates.len()).rev() {
            h_suffix[i] = h_suffix[i + 1] + matches!(gates[i], Gate::H(_)) as u32;
        }
        let tail_start = gates
            .iter()
            .rposition(|g| matches!(g, Gate::H(_)))
            .map_or(0, |i| i + 1);
        let mut tail_required = out_mask;
        for gate in gates[tail_start..].iter().rev() {
            if let Gate::Cnot { control, target } = *gate {
                // CNOT is an involution; undo it.
                if (tail_required >> control) & 1 == 1 {
                    tail_required ^= 1 << target;
                }
            }
        }
        PathSummer { gates, out_mask, h_suffix, tail_required, prune, buckets: [0; 16] }
    }

    /// Walk gates from `idx`, branching at each H. `phase` counts sixteenth
    /// turns; `sign` tracks (-1) factors from H transitions.
    fn walk(&mut self, idx: usize, mut state: u64, mut phase: u64, sign: i64) {
        for (offset, gate) in self.gates[idx..].iter().enumerate() {
            let i = idx + offset;
            match *gate {
                Gate::Cnot { control, target } => {
                    state ^= ((state >> control) & 1) << target;
                }
                Gate::T(q) => {
                    // +1/16 turn on 0, -1/16 (= +15/16) on 1.
                    phase += if (state >> q) & 1 == 0 { 1 } else { SIXTEENTH - 1 };
                }
                Gate::H(q) => {
                    let a = (state >> q) & 1;
                    // At the last H the remaining gates are deterministic, so
                    // the branch bit is forced by the back-propagated target.
                    let forced = (self.prune && self.h_suffix[i] == 1)
                        .then(|| (self.tail_required >> q) & 1);
                    for b in 0..2u64 {
                        if forced.is_some_and(|need| b != need) {
                            continue;
                        }
                        let branch_sign = if a & b == 1 { -sign } else { sign };
                        let next = (state & !(1 << q)) | (b << q);
                        self.walk(i + 1, next, phase, branch_sign);
                    }
                    return;
                }
            }
        }
        if state == self.out_mask {
            let bucket = (phase % SIXTEENTH) as usize;
            self.buckets[bucket] += sign;
        }
    }
}

fn pathsum_amplitude_impl(
    circuit: &Circuit,
    in_state: &BitString,
    out_state: &BitString,
    prune: bool,
) -> Result<PathSumResult, CircuitError> {
    let n = circuit.qubits();
    if in_state.len() != n {
        return Err(CircuitError::DimensionMismatch { found: in_state.len(), n });
    }
    if out_state.len() != n {
        return Err(CircuitError::DimensionMismatch { found: out_state.len(), n });
    }
    if n > 63 {
        return Err(CircuitError::SizeBound { what: "path sum", limit: 63, n });
    }
    let h = circuit.hadamard_count() as u32;
    let mut summer = PathSummer::new(circuit, bits_to_mask(out_state), prune);
    summer.walk(0, bits_to_mask(in_state), 0, 1);
    let terms = summer
        .buckets
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(k, &c)| (sixteenth_phase(k as u64), SignedDyadic::new(c.into(), 0)));
    Ok(PathSumResult {
        amplitude: ExactAmplitude::with_scale(terms, h as u64),
        path_count: 1u128 << h,
        hadamard_count: h,
    })
}

/// Exact transition amplitude `<out|C|in>` as a sum over the `2^h` classical
/// bit-configuration paths, one branch per Hadamard gate. Paths ending in a
/// configuration other than `out_state` contribute nothing; branches of the
/// final Hadamard that provably cannot reach `out_state` are pruned, which
/// never changes the amplitude.
pub fn pathsum_amplitude(
    circuit: &Circuit,
    in_state: &BitString,
    out_state: &BitString,
) -> Result<PathSumResult, CircuitError> {
    pathsum_amplitude_impl(circuit, in_state, out_state, true)
}

/// [`pathsum_amplitude`] with the last-Hadamard pruning disabled; exists so
/// tests can certify that pruning is invisible.
pub fn pathsum_amplitude_unpruned(
    circuit: &Circuit,
    in_state: &BitString,
    out_state: &BitString,
) -> Result<PathSumResult, CircuitError> {
    pathsum_amplitude_impl(circuit, in_state, out_state, false)
}

/// Largest qubit count the dense oracle will materialize (`2^n` amplitudes).
pub const ORACLE_QUBIT_LIMIT: usize = 14;

/// Dense state-vector simulation in double precision: the independent
/// verification oracle for the exact path sum. Index bit `i` is qubit `i`.
pub fn statevector_oracle(circuit: &Circuit, in_state: &BitString) -> Result<Vec<Complex64>, CircuitError> {
    let n = circuit.qubits();
    if in_state.len() != n {
        return Err(CircuitError::DimensionMismatch { found: in_state.len(), n });
    }
    if n > ORACLE_QUBIT_LIMIT {
        return Err(CircuitError::SizeBound { what: "state-vector oracle", limit: ORACLE_QUBIT_LIMIT, n });
    }
    let dim = 1usize << n;
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    amps[bits_to_mask(in_state) as usize] = Complex64::new(1.0, 0.0);
    let t_zero = Complex64::from_polar(1.0, std::f64::consts::PI / 8.0);
    let t_one = t_zero.conj();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for gate in circuit.gates() {
        match *gate {
            Gate::T(q) => {
                let bit = 1usize << q;
                for (idx, amp) in amps.iter_mut().enumerate() {
                    *amp *= if idx & bit == 0 { t_zero } else { t_one };
                }
            }
            Gate::H(q) => {
                let bit = 1usize << q;
                for idx in 0..dim {
                    if idx & bit == 0 {
                        let lo = amps[idx];
                        let hi = amps[idx | bit];
                        amps[idx] = (lo + hi) * inv_sqrt2;
                        amps[idx | bit] = (lo - hi) * inv_sqrt2;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let cbit = 1usize << control;
                let tbit = 1usize << target;
                for idx in 0..dim {
                    if idx & cbit != 0 && idx & tbit == 0 {
                        amps.swap(idx, idx | tbit);
                    }
                }
            }
        }
    }
    Ok(amps)
}

/// The finite-budget phase-operator expectation over the uniform input
/// superposition on `n` bits: `2^-n Σ_b e^{2πi U_t(b)}`, computed literally
/// by running the machine on every one of the `2^n` input strings. The
/// budgeted exploration reaches the same value through the program tree;
/// agreement of the two routes is the circuit/program bridge.
pub fn phase_oracle_sigma(n: usize, max_steps: u64, dialect: Dialect) -> Result<ExactAmplitude, CircuitError> {
    if n > 20 {
        return Err(CircuitError::SizeBound { what: "phase oracle", limit: 20, n });
    }
    let mut buckets: std::collections::BTreeMap<PhaseFraction, u64> = std::collections::BTreeMap::new();
    for raw in 0u64..1 << n {
        let input = BitString::from_u64_msb(raw, n);
        let phase = match run(&input, max_steps, dialect) {
            ExecResult::Halted { phase, .. } => phase,
            ExecResult::OutOfGas { .. } => PhaseFraction::zero(),
        };
        *buckets.entry(phase).or_insert(0) += 1;
    }
    let terms = buckets
        .into_iter()
        .map(|(phase, count)| (phase, SignedDyadic::new(count.into(), n as u64)));
    Ok(ExactAmplitude::with_scale(terms, 0))
}

/// Convenience for the bridge identity: the exploration-side value at the
/// same budget.
pub fn sigma_from_exploration(n: usize, max_steps: u64, dialect: Dialect) -> ExactAmplitude {
    sigma_paper(&explore(ExploreBudget::new(n, max_steps), dialect))
}

/// The interferometer emitted by [`realpart_construction`], plus the reading
/// instructions: run `circuit` on `|0...0>` and measure; the probability of
/// `measure_state` equals `(Re <Ψ|V|Ψ>)^2` for the uniform state `|Ψ>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RealPartRecipe {
    pub circuit: Circuit,
    pub ancilla: usize,
    pub measure_state: BitString,
}

/// Build the ancilla construction for a diagonal phase circuit `V` (T gates
/// only): prepare `(V|Ψ>|0> + V̄|Ψ>|1>)/√2` and interfere it back, so that
/// the all-zeros outcome has probability `(Re <Ψ|V|Ψ>)^2`.
///
/// Each `T q` of `V` becomes `CNOT q anc; T anc; CNOT q anc`, which applies
/// `e^{±iπ/8}` according to `q XOR anc` — that is, `V` on the `anc = 0`
/// branch and `V̄` on the `anc = 1` branch.
pub fn realpart_construction(v: &Circuit) -> Result<RealPartRecipe, CircuitError> {
    for gate in v.gates() {
        match gate {
            Gate::T(_) => {}
            other => return Err(CircuitError::NonDiagonal(format!("{other:?}"))),
        }
    }
    let n = v.qubits();
    let ancilla = n;
    let mut gates = Vec::with_capacity(2 * (n + 1) + 3 * v.gates().len());
    for q in 0..=n {
        gates.push(Gate::H(q));
    }
    for gate in v.gates() {
        if let Gate::T(q) = *gate {
            gates.push(Gate::Cnot { control: q, target: ancilla });
            gates.push(Gate::T(ancilla));
            gates.push(Gate::Cnot { control: q, target: ancilla });
        }
    }
    for q in 0..=n {
        gates.push(Gate::H(q));
    }
    let circuit = Circuit::new(n + 1, gates)?;
    let measure_state = std::iter::repeat(false).take(n + 1).collect();
    Ok(RealPartRecipe { circuit, ancilla, measure_state })
}

/// `<Ψ|V|Ψ>` over the uniform superposition, evaluated with the float
/// oracle; test-side reference for the real-part recipe.
pub fn uniform_expectation_oracle(v: &Circuit) -> Result<Complex64, CircuitError> {
    let n = v.qubits();
    if n > ORACLE_QUBIT_LIMIT {
        return Err(CircuitError::SizeBound { what: "state-vector oracle", limit: ORACLE_QUBIT_LIMIT, n });
    }
    let dim = 1usize << n;
    let mut prep = Vec::with_capacity(n + v.gates().len());
    for q in 0..n {
        prep.push(Gate::H(q));
    }
    prep.extend_from_slice(v.gates());
    let zeros: BitString = std::iter::repeat(false).take(n).collect();
    let state = statevector_oracle(&Circuit::new(n, prep)?, &zeros)?;
    let norm = (dim as f64).sqrt();
    Ok(state.iter().sum::<Complex64>() / norm)
}
