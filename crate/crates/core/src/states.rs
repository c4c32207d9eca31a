//! States on truncated Fock spaces and normally ordered moments.

use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::linalg::{is_psd_within, ComplexMatrix, HilbertLayout, ONE, ZERO};

/// Hermiticity tolerance for density matrices, relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Allowed trace drift for density matrices.
pub const TRACE_TOL: f64 = 1e-9;
/// Identity shift under which a density matrix must pass a Cholesky test.
pub const PSD_SHIFT: f64 = 1e-8;
/// Norm tolerance for pure-state amplitude vectors.
pub const NORM_TOL: f64 = 1e-10;
/// Coherent amplitudes must leave less tail weight than this above the cutoff.
pub const COHERENT_TAIL: f64 = 1e-20;

/// Validated density matrix on a truncated multimode space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    rho: ComplexMatrix,
    layout: HilbertLayout,
}

impl QuantumState {
    /// Wraps a density matrix after checking shape, Hermiticity, unit trace,
    /// and positivity (Cholesky of `rho + 1e-8 I`).
    pub fn new(rho: ComplexMatrix, layout: HilbertLayout) -> Result<Self> {
        let d = layout.total_dim();
        if !rho.is_square() || rho.rows() != d {
            return Err(CoreError::DimensionMismatch {
                context: "QuantumState",
                expected: d,
                got: rho.rows(),
            });
        }
        let dev = rho.hermitian_deviation();
        if dev > HERMITIAN_TOL * rho.max_abs().max(1.0) {
            return Err(CoreError::NonHermitian { deviation: dev });
        }
        let trace_err = (rho.trace().re - 1.0).abs().max(rho.trace().im.abs());
        if trace_err > TRACE_TOL {
            return Err(CoreError::TraceDrift {
                deviation: trace_err,
            });
        }
        if !is_psd_within(&rho, PSD_SHIFT) {
            return Err(CoreError::NotPositiveSemidefinite {
                min_eigenvalue: f64::NAN,
            });
        }
        Ok(Self { rho, layout })
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    /// tr(rho op).
    pub fn expect(&self, op: &ComplexMatrix) -> C64 {
        assert_eq!(op.rows(), self.dim());
        let mut acc = ZERO;
        for n in 0..self.dim() {
            for m in 0..self.dim() {
                acc += self.rho[(n, m)] * op[(m, n)];
            }
        }
        acc
    }

    /// Restricts a multi-level two-mode state to the two lowest levels per
    /// mode. Population outside that subspace beyond 1e-9 is an error; the
    /// projected matrix is renormalized.
    pub fn project_to_qubits(&self) -> Result<QuantumState> {
        let n_modes = self.layout.n_modes();
        let kept: Vec<usize> = (0..self.dim())
            .filter(|&i| self.layout.decode(i).iter().all(|&n| n <= 1))
            .collect();
        let mut kept_weight = 0.0;
        for &i in &kept {
            kept_weight += self.rho[(i, i)].re;
        }
        let discarded = 1.0 - kept_weight;
        if discarded > 1e-9 {
            return Err(CoreError::ProjectionLeakage { discarded });
        }
        let sub = ComplexMatrix::from_fn(kept.len(), kept.len(), |r, c| {
            self.rho[(kept[r], kept[c])] / kept_weight
        });
        QuantumState::new(sub, HilbertLayout::new(vec![2; n_modes])?)
    }
}

/// Normalized state vector on a truncated multimode space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
    layout: HilbertLayout,
}

impl PureState {
    pub fn new(amps: Vec<C64>, layout: HilbertLayout) -> Result<Self> {
        if amps.len() != layout.total_dim() {
            return Err(CoreError::DimensionMismatch {
                context: "PureState",
                expected: layout.total_dim(),
                got: amps.len(),
            });
        }
        let norm_sq: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let dev = (norm_sq.sqrt() - 1.0).abs();
        if dev > NORM_TOL {
            return Err(CoreError::NotNormalized { deviation: dev });
        }
        Ok(Self { amps, layout })
    }

    /// Product basis state |n0 n1 ...>.
    pub fn basis(layout: HilbertLayout, occupations: &[usize]) -> Result<Self> {
        if occupations.len() != layout.n_modes() {
            return Err(CoreError::DimensionMismatch {
                context: "PureState::basis",
                expected: layout.n_modes(),
                got: occupations.len(),
            });
        }
        for (mode, (&n, &d)) in occupations.iter().zip(layout.dims()).enumerate() {
            if n >= d {
                return Err(CoreError::ExponentTooLarge {
                    mode: mode + 1,
                    exponent: n as u32,
                    max: (d - 1) as u32,
                });
            }
        }
        let mut amps = vec![ZERO; layout.total_dim()];
        amps[layout.index(occupations)] = ONE;
        Ok(Self { amps, layout })
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn to_density(&self) -> QuantumState {
        let d = self.amps.len();
        let rho = ComplexMatrix::from_fn(d, d, |r, c| self.amps[r] * self.amps[c].conj());
        QuantumState {
            rho,
            layout: self.layout.clone(),
        }
    }
}

/// Single-mode coherent state truncated at `dim` levels.
///
/// Requires the tail weight estimate (|alpha|^2)^dim / dim! to stay below
/// 1e-20 so the renormalized amplitudes are an honest representation of the
/// infinite-dimensional state.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<PureState> {
    let layout = HilbertLayout::single(dim)?;
    let asq = alpha.norm_sqr();
    if asq > 0.0 {
        // log-space tail test: dim ln|alpha|^2 - ln(dim!)
        let ln_tail = dim as f64 * asq.ln() - ln_factorial(dim);
        if ln_tail >= COHERENT_TAIL.ln() {
            return Err(CoreError::TruncationTail {
                alpha_sq: asq,
                dim,
                tail: ln_tail.exp(),
            });
        }
    }
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-asq / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..dim {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    Ok(PureState { amps, layout })
}

/// Coherent state evolved for a scaled time `tau` under a single-mode Kerr
/// nonlinearity: each Fock amplitude picks up the phase n (n - 1) tau / 2.
pub fn kerr_state(alpha0: C64, tau: f64, dim: usize) -> Result<PureState> {
    let base = coherent_state(alpha0, dim)?;
    let amps = base
        .amps
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let n = n as f64;
            c * C64::from_polar(1.0, n * (n - 1.0) * tau / 2.0)
        })
        .collect();
    Ok(PureState {
        amps,
        layout: base.layout,
    })
}

/// Two-qubit mixture of a pure state with white noise:
/// p |psi><psi| + (1 - p) I / 4.
pub fn werner_like(p: f64, psi: &PureState) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CoreError::InvalidParameter {
            name: "p",
            value: p,
            reason: "mixing weight must lie in [0, 1]",
        });
    }
    if psi.layout.dims() != [2, 2] {
        return Err(CoreError::DimensionMismatch {
            context: "werner_like",
            expected: 4,
            got: psi.layout.total_dim(),
        });
    }
    let pure = psi.to_density();
    let mut rho = pure.rho.scale(C64::new(p, 0.0));
    for i in 0..4 {
        rho[(i, i)] += C64::new((1.0 - p) / 4.0, 0.0);
    }
    Ok(QuantumState {
        rho,
        layout: psi.layout.clone(),
    })
}

/// Transpose the indices of one mode only. The result is Hermitian with
/// unit trace but may fail positivity; it is returned as a bare matrix.
pub fn partial_transpose(state: &QuantumState, mode: usize) -> Result<ComplexMatrix> {
    let layout = &state.layout;
    layout.check_mode(mode)?;
    let d = layout.total_dim();
    let mut out = ComplexMatrix::zeros(d, d);
    for r in 0..d {
        let mut ro = layout.decode(r);
        for c in 0..d {
            let mut co = layout.decode(c);
            std::mem::swap(&mut ro[mode], &mut co[mode]);
            let (rt, ct) = (layout.index(&ro), layout.index(&co));
            std::mem::swap(&mut ro[mode], &mut co[mode]);
            out[(rt, ct)] = state.rho[(r, c)];
        }
    }
    Ok(out)
}

/// Product of per-mode normally ordered factors `a_m^dag^p a_m^q`.
///
/// `pairs[m] = (p, q)` holds the dagger and lowering exponents of mode m.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MonomialMoment {
    pairs: Vec<(u32, u32)>,
}

impl MonomialMoment {
    pub fn new(pairs: Vec<(u32, u32)>) -> Self {
        assert!(!pairs.is_empty());
        Self { pairs }
    }

    pub fn identity(n_modes: usize) -> Self {
        Self::new(vec![(0, 0); n_modes])
    }

    /// `a_mode^dag^p a_mode^q` with every other mode untouched (1-based mode).
    pub fn single(n_modes: usize, mode: usize, p: u32, q: u32) -> Self {
        assert!(mode >= 1 && mode <= n_modes);
        let mut pairs = vec![(0, 0); n_modes];
        pairs[mode - 1] = (p, q);
        Self::new(pairs)
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn n_modes(&self) -> usize {
        self.pairs.len()
    }

    /// Hermitian conjugate: every (p, q) becomes (q, p).
    pub fn adjoint(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(p, q)| (q, p)).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.pairs.iter().all(|&(p, q)| p == 0 && q == 0)
    }
}

impl std::fmt::Display for MonomialMoment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        for (m, &(p, q)) in self.pairs.iter().enumerate() {
            for _ in 0..p {
                write!(f, "a{}+", m + 1)?;
            }
            for _ in 0..q {
                write!(f, "a{}", m + 1)?;
            }
        }
        Ok(())
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// sqrt of the matrix-element weight for a^dag^p a^q acting on |n>:
/// lowering q steps from n, then raising p steps.
fn ladder_coeff(n: usize, q: u32, p: u32) -> f64 {
    let mut prod = 1.0;
    let low = n - q as usize;
    for j in (low + 1)..=n {
        prod *= j as f64;
    }
    for j in (low + 1)..=(low + p as usize) {
        prod *= j as f64;
    }
    prod.sqrt()
}

/// Moment of a normally ordered monomial, exact under truncation.
///
/// Matrix elements whose raised index would leave the cutoff are exactly
/// zero, so the banded sum below reproduces the infinite-dimensional
/// normally ordered operator restricted to the kept block. The only
/// approximation in a reported moment is the state itself.
pub(crate) fn moment_unchecked(
    rho: &ComplexMatrix,
    layout: &HilbertLayout,
    mono: &MonomialMoment,
) -> C64 {
    debug_assert_eq!(mono.n_modes(), layout.n_modes());
    let d = layout.total_dim();
    let mut acc = ZERO;
    'outer: for n_flat in 0..d {
        let occs = layout.decode(n_flat);
        let mut target = occs.clone();
        let mut weight = 1.0;
        for (m, &(p, q)) in mono.pairs.iter().enumerate() {
            let n = occs[m];
            if (n as u32) < q {
                continue 'outer;
            }
            let raised = n - q as usize + p as usize;
            if raised >= layout.dim(m) {
                continue 'outer;
            }
            target[m] = raised;
            weight *= ladder_coeff(n, q, p);
        }
        let m_flat = layout.index(&target);
        acc += rho[(n_flat, m_flat)] * weight;
    }
    acc
}

/// tr(rho a^dag^p a^q ...) for a normally ordered monomial.
///
/// Errors when any exponent exceeds the representable range `dim - 1` of
/// its mode; such a monomial cannot be formed from the truncated ladder
/// operators without losing information.
pub fn moment(state: &QuantumState, mono: &MonomialMoment) -> Result<C64> {
    if mono.n_modes() != state.layout.n_modes() {
        return Err(CoreError::DimensionMismatch {
            context: "moment",
            expected: state.layout.n_modes(),
            got: mono.n_modes(),
        });
    }
    for (m, &(p, q)) in mono.pairs.iter().enumerate() {
        let max = (state.layout.dim(m) - 1) as u32;
        if p > max || q > max {
            return Err(CoreError::ExponentTooLarge {
                mode: m + 1,
                exponent: p.max(q),
                max,
            });
        }
    }
    Ok(moment_unchecked(&state.rho, &state.layout, mono))
}
