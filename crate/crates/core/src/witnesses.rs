//! Entanglement and nonclassicality witnesses.
//!
//! Every witness is reported as a raw value whose sign carries the physics:
//! positive means the state is nonclassical (or entangled) according to
//! that witness, zero or negative means the witness is blind to it. The
//! truncated form clips the classical side to zero, which is the quantity
//! whose sudden vanishing and rebirth the event detector tracks. The CHSH
//! witness is special: its raw value lives on a squared scale and the
//! truncated form takes a square root.

use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::linalg::{
    eigvals_hermitian, is_psd_within, pauli_x, pauli_y, pauli_z, psd_sqrt,
    ComplexMatrix, ONE,
};
use crate::moments::OperatorSum;
use crate::states::{moment_unchecked, partial_transpose, MonomialMoment, QuantumState};

/// Mean photon numbers below this are treated as vacuum by the Mandel
/// witness to avoid dividing noise by noise.
const MANDEL_FLOOR: f64 = 1e-12;

/// Identifier of a witness; the string form doubles as the CSV column tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WitnessId {
    /// Concurrence (two qubits).
    C,
    /// Negativity of the partial transpose.
    N,
    /// CHSH violation (two qubits); raw value is on the squared scale.
    B,
    /// Two-mode moment witness |<a1 a2+>|^2 - <n1 n2>.
    H,
    /// Two-mode moment witness |<a1 a2>|^2 - <n1><n2>.
    Hp,
    /// Photon-number-difference squeezing with offset s0.
    S,
    /// Shifted photon-number-difference witness with displacement d0.
    D,
    /// Mandel sub-Poissonian witness, mode 1.
    Q1,
    /// Mandel sub-Poissonian witness, mode 2.
    Q2,
    /// Quadrature squeezing at a fixed phase.
    Sx,
    /// Principal (phase-optimized) quadrature squeezing.
    Sopt,
}

impl WitnessId {
    pub const ALL: [WitnessId; 11] = [
        WitnessId::C,
        WitnessId::N,
        WitnessId::B,
        WitnessId::H,
        WitnessId::Hp,
        WitnessId::S,
        WitnessId::D,
        WitnessId::Q1,
        WitnessId::Q2,
        WitnessId::Sx,
        WitnessId::Sopt,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            WitnessId::C => "C",
            WitnessId::N => "N",
            WitnessId::B => "B",
            WitnessId::H => "H",
            WitnessId::Hp => "Hp",
            WitnessId::S => "S",
            WitnessId::D => "D",
            WitnessId::Q1 => "Q1",
            WitnessId::Q2 => "Q2",
            WitnessId::Sx => "Sx",
            WitnessId::Sopt => "Sopt",
        }
    }

    pub fn parse(s: &str) -> Option<WitnessId> {
        WitnessId::ALL.iter().copied().find(|w| w.as_str() == s)
    }

    /// Truncated (clipped) form of a raw value.
    pub fn truncate(&self, raw: f64) -> f64 {
        match self {
            WitnessId::B => raw.max(0.0).sqrt(),
            _ => raw.max(0.0),
        }
    }
}

impl std::fmt::Display for WitnessId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classical offsets and phases the witness family depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessParams {
    /// Offset subtracted from number-difference and quadrature squeezing.
    pub s0: f64,
    /// Displacement inside the shifted number-difference witness.
    pub d0: f64,
    /// Quadrature phase for the fixed-phase squeezing witness.
    pub phi: f64,
}

impl Default for WitnessParams {
    fn default() -> Self {
        Self {
            s0: 0.0,
            d0: 0.0,
            phi: 0.0,
        }
    }
}

/// One evaluated witness: raw value, clipped value, and the classical
/// offset that entered the comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessValue {
    pub id: WitnessId,
    pub raw: f64,
    pub truncated: f64,
    pub threshold: f64,
}

fn require_modes(state: &QuantumState, n: usize, context: &'static str) -> Result<()> {
    if state.layout().n_modes() != n {
        return Err(CoreError::DimensionMismatch {
            context,
            expected: n,
            got: state.layout().n_modes(),
        });
    }
    Ok(())
}

fn require_two_qubits(state: &QuantumState, context: &'static str) -> Result<()> {
    if state.layout().dims() != [2, 2] {
        return Err(CoreError::DimensionMismatch {
            context,
            expected: 4,
            got: state.dim(),
        });
    }
    Ok(())
}

fn mono_mean(state: &QuantumState, pairs: Vec<(u32, u32)>) -> C64 {
    moment_unchecked(state.rho(), state.layout(), &MonomialMoment::new(pairs))
}

/// ⟨: (W - ⟨W⟩)^2 :⟩ for a Hermitian operator sum W, with the square taken
/// formally (exponents stack, no commutators).
fn formal_variance(state: &QuantumState, w: &OperatorSum) -> f64 {
    let mean = w.mean(state).re;
    let square = w.formal_mul(w).mean(state).re;
    square - mean * mean
}

/// Concurrence raw value 2 max(l) - sum(l) over the spin-flip spectrum.
pub fn concurrence(state: &QuantumState) -> Result<f64> {
    require_two_qubits(state, "concurrence (two qubits)")?;
    let yy = pauli_y().kron(&pauli_y());
    let sqrt_rho = psd_sqrt(state.rho())?;
    let flipped = yy.mul(&state.rho().conj()).mul(&yy);
    let m = sqrt_rho.mul(&flipped).mul(&sqrt_rho);
    // m is Hermitian PSD up to roundoff. Eigenvalues at the noise floor
    // must be zeroed before the square root: sqrt(1e-18 of roundoff) would
    // otherwise contaminate the result at the 1e-9 level.
    let vals = eigvals_hermitian(&m.hermitize())?;
    let floor = (vals.last().copied().unwrap_or(0.0) * 1e-13).max(1e-15);
    let lambdas: Vec<f64> = vals
        .iter()
        .map(|&v| if v < floor { 0.0 } else { v.sqrt() })
        .collect();
    let sum: f64 = lambdas.iter().sum();
    let max = lambdas.last().copied().unwrap_or(0.0);
    Ok(2.0 * max - sum)
}

/// Negativity raw value -2 min eig(rho^PT).
pub fn negativity(state: &QuantumState) -> Result<f64> {
    require_modes(state, 2, "negativity")?;
    let pt = partial_transpose(state, 1)?;
    let vals = eigvals_hermitian(&pt)?;
    Ok(-2.0 * vals[0])
}

/// Fast check that the negativity vanishes: the partial transpose passes a
/// Cholesky test after a 1e-10 identity shift. Avoids the eigensolver on
/// large product spaces.
pub fn negativity_vanishes(state: &QuantumState) -> Result<bool> {
    require_modes(state, 2, "negativity")?;
    let pt = partial_transpose(state, 1)?;
    Ok(is_psd_within(&pt, 1e-10))
}

/// CHSH raw value: largest pair sum of eigenvalues of T^t T minus one,
/// where T is the spin correlation matrix. Positive means the optimal CHSH
/// combination exceeds the classical bound 2.
pub fn chsh_b(state: &QuantumState) -> Result<f64> {
    require_two_qubits(state, "chsh (two qubits)")?;
    let paulis = [pauli_x(), pauli_y(), pauli_z()];
    let mut t = ComplexMatrix::zeros(3, 3);
    for (i, si) in paulis.iter().enumerate() {
        for (j, sj) in paulis.iter().enumerate() {
            let op = si.kron(sj);
            t[(i, j)] = C64::new(state.expect(&op).re, 0.0);
        }
    }
    let u = t.transpose().mul(&t);
    let vals = eigvals_hermitian(&u)?;
    Ok(vals[1] + vals[2] - 1.0)
}

/// Raw value |<a1 a2+>|^2 - <n1 n2>.
pub fn hillery_h(state: &QuantumState) -> Result<f64> {
    require_modes(state, 2, "pair-exchange moment witness")?;
    let cross = mono_mean(state, vec![(0, 1), (1, 0)]);
    let nn = mono_mean(state, vec![(1, 1), (1, 1)]).re;
    Ok(cross.norm_sqr() - nn)
}

/// Raw value |<a1 a2>|^2 - <n1><n2>.
pub fn hillery_hprime(state: &QuantumState) -> Result<f64> {
    require_modes(state, 2, "pair-annihilation moment witness")?;
    let cross = mono_mean(state, vec![(0, 1), (0, 1)]);
    let n1 = mono_mean(state, vec![(1, 1), (0, 0)]).re;
    let n2 = mono_mean(state, vec![(0, 0), (1, 1)]).re;
    Ok(cross.norm_sqr() - n1 * n2)
}

fn number_sum(n_modes: usize, mode: usize) -> OperatorSum {
    OperatorSum::from_monomial(&MonomialMoment::single(n_modes, mode, 1, 1), ONE)
}

/// Raw value -S - s0 where S = ⟨:[Delta(n1 - n2)]^2:⟩.
pub fn pnd_s(state: &QuantumState, s0: f64) -> Result<f64> {
    require_modes(state, 2, "number-difference squeezing")?;
    let w = number_sum(2, 1).sub(&number_sum(2, 2));
    Ok(-formal_variance(state, &w) - s0)
}

/// Raw value -D where D = ⟨:(n1 - n2 + d0)^2:⟩, no mean subtraction.
pub fn pnd_d(state: &QuantumState, d0: f64) -> Result<f64> {
    require_modes(state, 2, "shifted number-difference witness")?;
    let w = number_sum(2, 1)
        .sub(&number_sum(2, 2))
        .add(&OperatorSum::identity(2).scale(C64::new(d0, 0.0)));
    Ok(-w.formal_mul(&w).mean(state).re)
}

/// Mandel raw value -⟨:(Delta n)^2:⟩ / <n> for one mode (1-based).
/// Returns zero on (numerical) vacuum.
pub fn mandel_q(state: &QuantumState, mode: usize) -> Result<f64> {
    state.layout().check_mode(mode - 1)?;
    let n_modes = state.layout().n_modes();
    let n_op = number_sum(n_modes, mode);
    let mean_n = n_op.mean(state).re;
    if mean_n <= MANDEL_FLOOR {
        return Ok(0.0);
    }
    Ok(-formal_variance(state, &n_op) / mean_n)
}

/// Normally ordered variance of the quadrature x(phi) = a e^{i phi} +
/// a^dag e^{-i phi} for a single-mode state.
pub fn quad_variance(state: &QuantumState, phi: f64) -> Result<f64> {
    require_modes(state, 1, "quadrature variance")?;
    let a = OperatorSum::from_monomial(&MonomialMoment::new(vec![(0, 1)]), C64::from_polar(1.0, phi));
    let ad =
        OperatorSum::from_monomial(&MonomialMoment::new(vec![(1, 0)]), C64::from_polar(1.0, -phi));
    Ok(formal_variance(state, &a.add(&ad)))
}

/// Raw value -S_x(phi) - s0 for the fixed-phase quadrature witness.
pub fn quad_squeezing(state: &QuantumState, phi: f64, s0: f64) -> Result<f64> {
    Ok(-quad_variance(state, phi)? - s0)
}

/// Phase-optimized quadrature variance
/// min over phi of S_x(phi) = 2 (⟨Delta a^dag Delta a⟩ - |⟨(Delta a)^2⟩|).
pub fn principal_variance(state: &QuantumState) -> Result<f64> {
    require_modes(state, 1, "principal quadrature variance")?;
    let a = mono_mean(state, vec![(0, 1)]);
    let aa = mono_mean(state, vec![(0, 2)]);
    let n = mono_mean(state, vec![(1, 1)]).re;
    let var_a = n - a.norm_sqr();
    let disp = aa - a * a;
    Ok(2.0 * (var_a - disp.norm()))
}

/// Raw value -S_opt - s0 for the principal squeezing witness.
pub fn principal_squeezing(state: &QuantumState, s0: f64) -> Result<f64> {
    Ok(-principal_variance(state)? - s0)
}

/// Evaluates one witness with the given parameters.
pub fn evaluate(id: WitnessId, state: &QuantumState, params: &WitnessParams) -> Result<WitnessValue> {
    let (raw, threshold) = match id {
        WitnessId::C => (concurrence(state)?, 0.0),
        WitnessId::N => (negativity(state)?, 0.0),
        WitnessId::B => (chsh_b(state)?, 1.0),
        WitnessId::H => (hillery_h(state)?, 0.0),
        WitnessId::Hp => (hillery_hprime(state)?, 0.0),
        WitnessId::S => (pnd_s(state, params.s0)?, params.s0),
        WitnessId::D => (pnd_d(state, params.d0)?, params.d0),
        WitnessId::Q1 => (mandel_q(state, 1)?, 0.0),
        WitnessId::Q2 => (mandel_q(state, 2)?, 0.0),
        WitnessId::Sx => (quad_squeezing(state, params.phi, params.s0)?, params.s0),
        WitnessId::Sopt => (principal_squeezing(state, params.s0)?, params.s0),
    };
    Ok(WitnessValue {
        id,
        raw,
        truncated: id.truncate(raw),
        threshold,
    })
}
