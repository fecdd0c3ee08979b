//! Gate-level realization of one map iteration.
//!
//! The register holds `theta / 2 pi = sum_i alpha_i 2^{-(i+1)}` with qubit 0
//! the most significant bit. Both diagonal operators are quadratic forms in
//! the register bits, so
//!
//! `k (theta - pi)^2 / 2 = 2 pi^2 k sum_{i,j} x_i x_j`,
//! `x_i = alpha_i 2^{-(i+1)} - 1 / (2 n_q)`,
//!
//! splits into `n_q^2` diagonal gates, one per ordered pair `(i, j)` (the
//! `i = j` terms act on a single qubit). The free rotation has the same
//! shape with prefactor `-T N^2 / 2` on the momentum bits. One iteration is
//! kick, QFT, free rotation, inverse QFT: `3 n_q^2 + n_q` counted gates.
//!
//! The QFT network leaves the momentum bits in reversed qubit order and with
//! the uncentered labelling `m' = c XOR N/2` (`c = n + N/2`). Inside a full
//! iteration both are absorbed by addressing the free block on the reversed
//! qubits and flipping the role of the top momentum bit in its phases, so no
//! extra gates are needed. Standalone QFT circuits undo the bit reversal with
//! [`Gate::SwapTracked`], which is bookkeeping and not counted.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::MapParams;
use crate::state::{free_phases, kick_phases, Basis, Floquet, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    Hadamard {
        q: usize,
    },
    /// `diag(exp(i phases[0]), exp(i phases[1]))`.
    DiagonalPhase1 {
        q: usize,
        phases: [f64; 2],
    },
    /// Diagonal two-qubit gate; `phases[2 a + b]` applies to `|a b>` with `a`
    /// the bit of `qa` and `b` the bit of `qb`.
    DiagonalPhase2 {
        qa: usize,
        qb: usize,
        phases: [f64; 4],
    },
    /// Phase `exp(i angle)` on `|1 1>`.
    ControlledPhase {
        control: usize,
        target: usize,
        angle: f64,
    },
    /// Relabelling of two qubits, not a physical gate.
    SwapTracked {
        a: usize,
        b: usize,
    },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Hadamard { q } | Gate::DiagonalPhase1 { q, .. } => vec![q],
            Gate::DiagonalPhase2 { qa, qb, .. } => vec![qa, qb],
            Gate::ControlledPhase {
                control, target, ..
            } => vec![control, target],
            Gate::SwapTracked { a, b } => vec![a, b],
        }
    }

    /// Whether the gate enters the gate tally.
    pub fn is_counted(&self) -> bool {
        !matches!(self, Gate::SwapTracked { .. })
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(
            self,
            Gate::DiagonalPhase1 { .. } | Gate::DiagonalPhase2 { .. } | Gate::ControlledPhase { .. }
        )
    }

    /// Inverse gate.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::DiagonalPhase1 { q, phases } => Gate::DiagonalPhase1 {
                q,
                phases: phases.map(|p| -p),
            },
            Gate::DiagonalPhase2 { qa, qb, phases } => Gate::DiagonalPhase2 {
                qa,
                qb,
                phases: phases.map(|p| -p),
            },
            Gate::ControlledPhase {
                control,
                target,
                angle,
            } => Gate::ControlledPhase {
                control,
                target,
                angle: -angle,
            },
            g => g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitRole {
    Kick,
    Free,
    Qft,
    Iqft,
    FullIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_q: u32,
    pub role: CircuitRole,
    pub gates: Vec<Gate>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateTally {
    pub hadamard: usize,
    pub controlled_phase: usize,
    pub diagonal_1q: usize,
    pub diagonal_2q: usize,
    /// Bookkeeping relabellings, excluded from `counted`.
    pub swaps_tracked: usize,
    pub counted: usize,
}

impl Circuit {
    pub fn tally(&self) -> GateTally {
        gate_count(self)
    }

    pub fn counted_gates(&self) -> usize {
        self.tally().counted
    }

    /// Inverse circuit: reversed order, conjugated phases.
    pub fn inverse(&self) -> Circuit {
        let role = match self.role {
            CircuitRole::Qft => CircuitRole::Iqft,
            CircuitRole::Iqft => CircuitRole::Qft,
            r => r,
        };
        Circuit {
            n_q: self.n_q,
            role,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// One JSON object per line, in application order.
    pub fn to_json_lines(&self) -> String {
        self.gates
            .iter()
            .map(|g| serde_json::to_string(g).expect("gates serialize"))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }

    pub fn from_json_lines(n_q: u32, role: CircuitRole, text: &str) -> Result<Circuit> {
        let gates = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<Gate>, _>>()?;
        Ok(Circuit { n_q, role, gates })
    }
}

/// Tally the gates of a circuit by kind.
pub fn gate_count(circuit: &Circuit) -> GateTally {
    let mut t = GateTally::default();
    for g in &circuit.gates {
        match g {
            Gate::Hadamard { .. } => t.hadamard += 1,
            Gate::ControlledPhase { .. } => t.controlled_phase += 1,
            Gate::DiagonalPhase1 { .. } => t.diagonal_1q += 1,
            Gate::DiagonalPhase2 { .. } => t.diagonal_2q += 1,
            Gate::SwapTracked { .. } => t.swaps_tracked += 1,
        }
        if g.is_counted() {
            t.counted += 1;
        }
    }
    t
}

/// Gates per iteration: `3 n_q^2 + n_q`.
pub fn expected_iteration_gates(n_q: u32) -> usize {
    let n = n_q as usize;
    3 * n * n + n
}

/// Bit of qubit `q` in basis index `index`; qubit 0 is the most significant.
pub fn bit_of(index: usize, q: usize, n_q: u32) -> u8 {
    ((index >> (n_q as usize - 1 - q)) & 1) as u8
}

/// Basis index from bits listed from qubit 0 (most significant) upwards.
pub fn index_from_bits(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub fn bits_of(index: usize, n_q: u32) -> Vec<u8> {
    (0..n_q as usize).map(|q| bit_of(index, q, n_q)).collect()
}

/// Centered momentum index held by register value `m'` after a QFT.
pub fn register_to_centered(index: usize, n_q: u32) -> usize {
    index ^ (1usize << (n_q - 1))
}

/// Emit the `n_q^2` diagonal gates of `prefactor * (sum_l x_l)^2`, where
/// `x_l(bit)` is the contribution of logical bit `l` placed on qubit
/// `layout[l]`.
fn quadratic_block(prefactor: f64, layout: &[usize], x: impl Fn(usize, u8) -> f64) -> Vec<Gate> {
    let n = layout.len();
    let mut gates = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                gates.push(Gate::DiagonalPhase1 {
                    q: layout[i],
                    phases: [0u8, 1].map(|b| prefactor * x(i, b) * x(i, b)),
                });
            } else {
                let mut phases = [0.0; 4];
                for a in 0..2u8 {
                    for b in 0..2u8 {
                        phases[2 * a as usize + b as usize] = prefactor * x(i, a) * x(j, b);
                    }
                }
                gates.push(Gate::DiagonalPhase2 {
                    qa: layout[i],
                    qb: layout[j],
                    phases,
                });
            }
        }
    }
    gates
}

fn kick_gates(params: &MapParams, n_q: u32) -> Vec<Gate> {
    let nq = n_q as f64;
    let layout: Vec<usize> = (0..n_q as usize).collect();
    quadratic_block(2.0 * PI * PI * params.k, &layout, |i, bit| {
        bit as f64 * 0.5f64.powi(i as i32 + 1) - 1.0 / (2.0 * nq)
    })
}

/// Free rotation on momentum bits. `layout[l]` is the qubit holding bit `l`
/// (most significant first); `flip_top` selects the uncentered labelling
/// left by the QFT network.
fn free_gates(params: &MapParams, n_q: u32, layout: &[usize], flip_top: bool) -> Vec<Gate> {
    let nq = n_q as f64;
    let dim = (1u64 << n_q) as f64;
    quadratic_block(-params.t * dim * dim / 2.0, layout, |l, bit| {
        let centered = if l == 0 && flip_top { 1 - bit } else { bit };
        centered as f64 * 0.5f64.powi(l as i32 + 1) - 1.0 / (2.0 * nq)
    })
}

/// QFT network for the kernel `exp(-2 pi i j m / N)`, without the final
/// bit reversal: momentum bit `l` ends up on qubit `n_q - 1 - l`.
fn qft_network(n_q: u32) -> Vec<Gate> {
    let n = n_q as usize;
    let mut gates = Vec::with_capacity(n * (n + 1) / 2);
    for q in 0..n {
        gates.push(Gate::Hadamard { q });
        for r in q + 1..n {
            gates.push(Gate::ControlledPhase {
                control: r,
                target: q,
                angle: -PI / (1u64 << (r - q)) as f64,
            });
        }
    }
    gates
}

fn reversal_swaps(n_q: u32) -> Vec<Gate> {
    let n = n_q as usize;
    (0..n / 2)
        .map(|q| Gate::SwapTracked { a: q, b: n - 1 - q })
        .collect()
}

/// Kick `exp(i k (theta - pi)^2 / 2)` as `n_q^2` diagonal gates.
pub fn build_kick_circuit(params: &MapParams, n_q: u32) -> Circuit {
    Circuit {
        n_q,
        role: CircuitRole::Kick,
        gates: kick_gates(params, n_q),
    }
}

/// Free rotation `exp(-i T n^2 / 2)` on a centered momentum register in
/// natural bit order.
pub fn build_free_circuit(params: &MapParams, n_q: u32) -> Circuit {
    let layout: Vec<usize> = (0..n_q as usize).collect();
    Circuit {
        n_q,
        role: CircuitRole::Free,
        gates: free_gates(params, n_q, &layout, false),
    }
}

/// Quantum Fourier transform: `n_q` Hadamards and `n_q (n_q - 1) / 2`
/// controlled phases, followed by uncounted swaps restoring bit order.
/// The output register holds the uncentered momentum label, see
/// [`register_to_centered`].
pub fn build_qft_circuit(n_q: u32) -> Circuit {
    let mut gates = qft_network(n_q);
    gates.extend(reversal_swaps(n_q));
    Circuit {
        n_q,
        role: CircuitRole::Qft,
        gates,
    }
}

pub fn build_iqft_circuit(n_q: u32) -> Circuit {
    build_qft_circuit(n_q).inverse()
}

/// Kick, QFT, free rotation and inverse QFT.
pub fn build_iteration(params: &MapParams, n_q: u32) -> Circuit {
    let qft = qft_network(n_q);
    let reversed: Vec<usize> = (0..n_q as usize).rev().collect();
    let mut gates = kick_gates(params, n_q);
    gates.extend(qft.iter().copied());
    gates.extend(free_gates(params, n_q, &reversed, true));
    gates.extend(qft.iter().rev().map(Gate::inverse));
    let circuit = Circuit {
        n_q,
        role: CircuitRole::FullIteration,
        gates,
    };
    debug_assert_eq!(circuit.counted_gates(), expected_iteration_gates(n_q));
    circuit
}

fn check_qubits(gate: &Gate, n_q: u32) -> Result<()> {
    let qs = gate.qubits();
    for &q in &qs {
        if q >= n_q as usize {
            return Err(Error::QubitOutOfRange { index: q, n_q });
        }
    }
    if qs.len() == 2 && qs[0] == qs[1] {
        return Err(Error::InvalidParameter {
            name: "gate",
            reason: format!("two-qubit gate on repeated qubit {}", qs[0]),
        });
    }
    Ok(())
}

/// Apply a single gate to a raw register of `2^n_q` amplitudes.
pub fn apply_gate(amps: &mut [Complex64], n_q: u32, gate: &Gate) -> Result<()> {
    check_qubits(gate, n_q)?;
    let mask = |q: usize| 1usize << (n_q as usize - 1 - q);
    match *gate {
        Gate::Hadamard { q } => {
            let s = mask(q);
            for i in 0..amps.len() {
                if i & s == 0 {
                    let a = amps[i];
                    let b = amps[i | s];
                    amps[i] = (a + b) * FRAC_1_SQRT_2;
                    amps[i | s] = (a - b) * FRAC_1_SQRT_2;
                }
            }
        }
        Gate::DiagonalPhase1 { q, phases } => {
            let s = mask(q);
            let f = phases.map(|p| Complex64::from_polar(1.0, p));
            for (i, a) in amps.iter_mut().enumerate() {
                *a *= f[usize::from(i & s != 0)];
            }
        }
        Gate::DiagonalPhase2 { qa, qb, phases } => {
            let (sa, sb) = (mask(qa), mask(qb));
            let f = phases.map(|p| Complex64::from_polar(1.0, p));
            for (i, a) in amps.iter_mut().enumerate() {
                let idx = 2 * usize::from(i & sa != 0) + usize::from(i & sb != 0);
                *a *= f[idx];
            }
        }
        Gate::ControlledPhase {
            control,
            target,
            angle,
        } => {
            let both = mask(control) | mask(target);
            let f = Complex64::from_polar(1.0, angle);
            for (i, a) in amps.iter_mut().enumerate() {
                if i & both == both {
                    *a *= f;
                }
            }
        }
        Gate::SwapTracked { a, b } => {
            let (sa, sb) = (mask(a), mask(b));
            for i in 0..amps.len() {
                if i & sa != 0 && i & sb == 0 {
                    amps.swap(i, (i ^ sa) | sb);
                }
            }
        }
    }
    Ok(())
}

/// Apply every gate of `circuit` in order to a raw register.
pub fn apply_gates(amps: &mut [Complex64], circuit: &Circuit) -> Result<()> {
    if amps.len() != 1usize << circuit.n_q {
        return Err(Error::RegisterMismatch {
            circuit: circuit.n_q,
            state: amps.len().trailing_zeros(),
        });
    }
    for g in &circuit.gates {
        apply_gate(amps, circuit.n_q, g)?;
    }
    Ok(())
}

fn relabel_top_bit(amps: &mut [Complex64]) {
    let half = amps.len() / 2;
    let (lo, hi) = amps.split_at_mut(half);
    lo.swap_with_slice(hi);
}

/// Apply `circuit` to a statevector.
///
/// Kick and full-iteration circuits act on angle-basis states, free circuits
/// on momentum-basis states. A QFT takes an angle-basis state to the
/// centered momentum basis (the top-bit relabelling is applied as
/// bookkeeping) and the inverse QFT goes back.
pub fn apply_circuit(psi: &mut StateVector, circuit: &Circuit) -> Result<()> {
    if psi.n_q() != circuit.n_q {
        return Err(Error::RegisterMismatch {
            circuit: circuit.n_q,
            state: psi.n_q(),
        });
    }
    let (expected, output) = match circuit.role {
        CircuitRole::Kick | CircuitRole::FullIteration | CircuitRole::Qft => (
            Basis::Theta,
            if circuit.role == CircuitRole::Qft {
                Basis::Momentum
            } else {
                Basis::Theta
            },
        ),
        CircuitRole::Free => (Basis::Momentum, Basis::Momentum),
        CircuitRole::Iqft => (Basis::Momentum, Basis::Theta),
    };
    if psi.basis() != expected {
        return Err(Error::WrongBasis {
            expected,
            found: psi.basis(),
        });
    }
    let mut amps = psi.amplitudes().to_vec();
    if circuit.role == CircuitRole::Iqft {
        relabel_top_bit(&mut amps);
    }
    apply_gates(&mut amps, circuit)?;
    if circuit.role == CircuitRole::Qft {
        relabel_top_bit(&mut amps);
    }
    let params = *psi.params();
    *psi = StateVector::normalized(amps, output, params)?;
    Ok(())
}

/// Largest `|<x|C|x> - e^{i phi(x)}|` over all basis states, for the kick
/// block against `k (theta - pi)^2 / 2` and the free block against
/// `-T n^2 / 2`. Exhaustive, so only sensible for small registers.
pub fn diagonal_phase_error(params: &MapParams, n_q: u32) -> Result<f64> {
    let n = 1usize << n_q;
    let mut worst = 0.0f64;
    let blocks = [
        (build_kick_circuit(params, n_q), kick_phases(params.k, n)),
        (build_free_circuit(params, n_q), free_phases(params.t, n)),
    ];
    for (circuit, expected) in &blocks {
        for (x, want) in expected.iter().enumerate() {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            v[x] = Complex64::new(1.0, 0.0);
            apply_gates(&mut v, circuit)?;
            worst = worst.max((v[x] - want).norm());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub n_q: u32,
    pub trials: usize,
    pub steps: usize,
    /// `1 - |<circuit|oracle>|^2`, maximized over trials.
    pub max_fidelity_deficit: f64,
    pub counted_gates: usize,
}

/// Evolve `trials` random states for `steps` iterations through the gate
/// circuit and through the split-operator evolution and compare.
pub fn verify_iteration(
    params: &MapParams,
    n_q: u32,
    trials: usize,
    steps: usize,
    seed: u64,
) -> Result<Verification> {
    let params = MapParams {
        qubits: Some(n_q),
        ..*params
    };
    let circuit = build_iteration(&params, n_q);
    let floquet = Floquet::new(&params, 1 << n_q);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let start = StateVector::random(params, Basis::Theta, seed.wrapping_add(trial as u64))?;
        let mut via_gates = start.clone();
        let mut oracle = start;
        for _ in 0..steps {
            apply_circuit(&mut via_gates, &circuit)?;
            floquet.step(&mut oracle);
        }
        worst = worst.max(1.0 - via_gates.fidelity(&oracle)?);
    }
    Ok(Verification {
        n_q,
        trials,
        steps,
        max_fidelity_deficit: worst,
        counted_gates: circuit.counted_gates(),
    })
}
