//! Model catalogue and time evolution engines.
//!
//! Three families are built in: a pair of damped qubits starting from a
//! noisy Bell mixture, a two-mode exchange coupler (frequency converter)
//! started pure or mixed, and a single-mode Kerr oscillator started in a
//! coherent state. Each family offers a closed-form trajectory next to the
//! numerical integrators, which is what the cross-validation layer feeds
//! on; agreement between the two routes is part of the test contract, so
//! neither route may be expressed through the other.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::linalg::{
    annihilation, creation, eig_hermitian, ComplexMatrix, HilbertLayout, ONE, ZERO,
};
use crate::states::{coherent_state, kerr_state, werner_like, PureState, QuantumState};
use crate::witnesses::WitnessParams;

/// Trace drift beyond this at a sample point aborts the integration.
const TRACE_DRIFT_MAX: f64 = 1e-8;
/// Population allowed in the top Fock level of a truncated oscillator mode.
const LEAKAGE_MAX: f64 = 1e-9;
/// A single-step jump probability above this means dt is too coarse for
/// the first-order unraveling.
const JUMP_PROB_MAX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// Two qubits in a noisy Bell mixture, each decaying into its own bath.
    DampedWerner,
    /// Lossless exchange coupler starting from a single excitation.
    ConverterPure,
    /// Exchange coupler starting from a noisy Bell mixture.
    ConverterMixed,
    /// Single-mode Kerr oscillator starting from a coherent state.
    Kerr,
}

impl Model {
    pub const ALL: [Model; 4] = [
        Model::DampedWerner,
        Model::ConverterPure,
        Model::ConverterMixed,
        Model::Kerr,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Model::DampedWerner => "damped-werner",
            Model::ConverterPure => "converter-pure",
            Model::ConverterMixed => "converter-mixed",
            Model::Kerr => "kerr",
        }
    }

    pub fn parse(s: &str) -> Option<Model> {
        Model::ALL.iter().copied().find(|m| m.as_str() == s)
    }

    pub fn n_modes(&self) -> usize {
        match self {
            Model::Kerr => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvolutionPath {
    /// Closed-form trajectory.
    Analytic,
    /// Master-equation integration (exact propagation when lossless).
    Lindblad,
    /// Monte Carlo wave-function average.
    Mcwf,
}

impl EvolutionPath {
    pub const ALL: [EvolutionPath; 3] = [
        EvolutionPath::Analytic,
        EvolutionPath::Lindblad,
        EvolutionPath::Mcwf,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EvolutionPath::Analytic => "analytic",
            EvolutionPath::Lindblad => "lindblad",
            EvolutionPath::Mcwf => "mcwf",
        }
    }

    pub fn parse(s: &str) -> Option<EvolutionPath> {
        EvolutionPath::ALL.iter().copied().find(|p| p.as_str() == s)
    }
}

impl std::fmt::Display for EvolutionPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Full parameter set of one simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub model: Model,
    /// Damping rate per mode.
    pub gamma: [f64; 2],
    /// Mean thermal occupation of each bath.
    pub nbar: [f64; 2],
    /// Coupling (exchange or Kerr) strength.
    pub kappa: f64,
    /// Weight of the pure component in mixture models.
    pub p: f64,
    /// Initial coherent amplitude of the Kerr mode.
    pub alpha0: C64,
    /// Reference phase of the quadrature family.
    pub phi0: f64,
    /// Measured quadrature phase.
    pub phi: f64,
    /// Classical offset for squeezing-type witnesses.
    pub s0: f64,
    /// Displacement of the shifted number-difference witness.
    pub d0: f64,
    /// Optional cutoff override for the oscillator mode.
    pub dim: Option<usize>,
}

impl ModelConfig {
    pub fn new(model: Model) -> Self {
        Self {
            model,
            gamma: [0.0, 0.0],
            nbar: [0.0, 0.0],
            kappa: 1.0,
            p: 1.0,
            alpha0: ZERO,
            phi0: 0.0,
            phi: 0.0,
            s0: 0.0,
            d0: 0.0,
            dim: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma1", self.gamma[0]),
            ("gamma2", self.gamma[1]),
            ("nbar1", self.nbar[0]),
            ("nbar2", self.nbar[1]),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(CoreError::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be finite and nonnegative",
                });
            }
        }
        if !self.kappa.is_finite() || self.kappa < 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "kappa",
                value: self.kappa,
                reason: "must be finite and nonnegative",
            });
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(CoreError::InvalidParameter {
                name: "p",
                value: self.p,
                reason: "mixing weight must lie in [0, 1]",
            });
        }
        if let Some(d) = self.dim {
            if d < 2 {
                return Err(CoreError::InvalidDimension {
                    dim: d,
                    reason: "cutoff override needs at least two levels",
                });
            }
        }
        Ok(())
    }

    /// Truncation layout: qubit pairs for the two-mode models, the chosen
    /// (or derived) cutoff for the Kerr oscillator.
    pub fn layout(&self) -> Result<HilbertLayout> {
        match self.model {
            Model::Kerr => {
                let dim = self.dim.unwrap_or_else(|| kerr_cutoff(self.alpha0));
                HilbertLayout::single(dim)
            }
            _ => HilbertLayout::new(vec![2, 2]),
        }
    }

    pub fn witness_params(&self) -> WitnessParams {
        WitnessParams {
            s0: self.s0,
            d0: self.d0,
            phi: self.phi,
        }
    }

    fn lossless(&self) -> bool {
        self.gamma[0] == 0.0 && self.gamma[1] == 0.0
    }
}

/// Default cutoff for a Kerr mode: generous multiple of the mean photon
/// number, then raised until the coherent tail estimate
/// (|alpha|^2)^dim / dim! drops below 1e-20.
pub fn kerr_cutoff(alpha0: C64) -> usize {
    let asq = alpha0.norm_sqr();
    let mut dim = (5.0 * asq.max(1.0)).ceil() as usize + 15;
    let tail_ok = |d: usize| {
        if asq == 0.0 {
            return true;
        }
        let ln_fact: f64 = (2..=d).map(|k| (k as f64).ln()).sum();
        d as f64 * asq.ln() - ln_fact < crate::states::COHERENT_TAIL.ln()
    };
    while !tail_ok(dim) {
        dim += 1;
    }
    dim
}

/// Uniform grid over [0, t_max] with n points, endpoints included.
pub fn sample_grid(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if t_max.is_nan() || t_max <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "t_max",
            value: t_max,
            reason: "must be positive",
        });
    }
    if n < 2 {
        return Err(CoreError::InvalidParameter {
            name: "n_samples",
            value: n as f64,
            reason: "need at least two samples",
        });
    }
    Ok((0..n)
        .map(|i| t_max * i as f64 / (n - 1) as f64)
        .collect())
}

/// Default integrator step: 1e-3 in units of the fastest rate.
pub fn default_dt(cfg: &ModelConfig) -> f64 {
    let fastest = cfg.gamma[0].max(cfg.gamma[1]).max(cfg.kappa);
    if fastest > 0.0 {
        1e-3 / fastest
    } else {
        1e-3
    }
}

/// The entangled pure component each mixture model starts from.
fn mixture_core(model: Model) -> Result<PureState> {
    let layout = HilbertLayout::new(vec![2, 2])?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match model {
        // (|00> + |11>) / sqrt(2)
        Model::DampedWerner => PureState::new(
            vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)],
            layout,
        ),
        // (|01> - i |10>) / sqrt(2)
        Model::ConverterMixed => PureState::new(
            vec![ZERO, C64::new(s, 0.0), C64::new(0.0, -s), ZERO],
            layout,
        ),
        _ => Err(CoreError::Unsupported {
            model: model.as_str(),
            what: "mixture initial state",
        }),
    }
}

/// Initial density matrix of a scenario.
pub fn initial_state(cfg: &ModelConfig) -> Result<QuantumState> {
    cfg.validate()?;
    match cfg.model {
        Model::DampedWerner | Model::ConverterMixed => {
            werner_like(cfg.p, &mixture_core(cfg.model)?)
        }
        Model::ConverterPure => {
            let layout = HilbertLayout::new(vec![2, 2])?;
            Ok(PureState::basis(layout, &[0, 1])?.to_density())
        }
        Model::Kerr => {
            let dim = cfg.layout()?.dim(0);
            Ok(coherent_state(cfg.alpha0, dim)?.to_density())
        }
    }
}

/// Interaction-picture Hamiltonian on the given layout (free evolution is
/// already rotated away, so the damped model has none).
pub fn hamiltonian(cfg: &ModelConfig, layout: &HilbertLayout) -> Result<ComplexMatrix> {
    let d = layout.total_dim();
    match cfg.model {
        Model::DampedWerner => Ok(ComplexMatrix::zeros(d, d)),
        Model::ConverterPure | Model::ConverterMixed => {
            let a1 = layout.embed(&annihilation(layout.dim(0)), 0)?;
            let a2 = layout.embed(&annihilation(layout.dim(1)), 1)?;
            let hop = a1.dagger().mul(&a2);
            Ok(hop.add(&hop.dagger()).scale(C64::new(cfg.kappa, 0.0)))
        }
        Model::Kerr => {
            // sign convention: exp(-i h t) must twist Fock amplitude n by
            // +n (n - 1) kappa t / 2, matching the closed-form trajectory
            let a = annihilation(layout.dim(0));
            let ad = creation(layout.dim(0));
            let quart = ad.mul(&ad).mul(&a).mul(&a);
            Ok(quart.scale(C64::new(-cfg.kappa / 2.0, 0.0)))
        }
    }
}

/// One evolution run: states on the sample grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub path: EvolutionPath,
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
}

/// Damped-qubit-pair state at time t, from the closed-form solution of
/// the zero-temperature master equation.
pub fn analytic_damped_werner(cfg: &ModelConfig, t: f64) -> Result<QuantumState> {
    cfg.validate()?;
    if cfg.model != Model::DampedWerner {
        return Err(CoreError::Unsupported {
            model: cfg.model.as_str(),
            what: "damped-pair closed form",
        });
    }
    if cfg.nbar[0] != 0.0 || cfg.nbar[1] != 0.0 {
        return Err(CoreError::Unsupported {
            model: cfg.model.as_str(),
            what: "closed form with thermal baths",
        });
    }
    let (p, gamma) = (cfg.p, cfg.gamma);
    let g1 = (-gamma[0] * t).exp();
    let g2 = (-gamma[1] * t).exp();
    let h00 = (2.0 - g1) * (2.0 - g2) + p * g1 * g2;
    let h01 = g2 * (2.0 - (1.0 + p) * g1);
    let h10 = g1 * (2.0 - (1.0 + p) * g2);
    let h11 = (1.0 + p) * g1 * g2;
    let corner = 2.0 * p * (g1 * g2).sqrt();
    let mut rho = ComplexMatrix::zeros(4, 4);
    for (i, v) in [h00, h01, h10, h11].into_iter().enumerate() {
        rho[(i, i)] = C64::new(v / 4.0, 0.0);
    }
    rho[(0, 3)] = C64::new(corner / 4.0, 0.0);
    rho[(3, 0)] = C64::new(corner / 4.0, 0.0);
    QuantumState::new(rho, HilbertLayout::new(vec![2, 2])?)
}

/// Exchange-coupler pure state cos(kt) |01> - i sin(kt) |10>.
pub fn analytic_freq_converter_pure(kappa: f64, t: f64) -> Result<PureState> {
    let layout = HilbertLayout::new(vec![2, 2])?;
    let (s, c) = (kappa * t).sin_cos();
    PureState::new(
        vec![ZERO, C64::new(c, 0.0), C64::new(0.0, -s), ZERO],
        layout,
    )
}

/// Exchange-coupler evolution of the mixture core:
/// [f_minus |01> - i f_plus |10>] / sqrt(2), f_pm = cos(kt) +- sin(kt).
fn converter_mixed_core(kappa: f64, t: f64) -> Result<PureState> {
    let layout = HilbertLayout::new(vec![2, 2])?;
    let (s, c) = (kappa * t).sin_cos();
    let fm = (c - s) * std::f64::consts::FRAC_1_SQRT_2;
    let fp = (c + s) * std::f64::consts::FRAC_1_SQRT_2;
    PureState::new(
        vec![ZERO, C64::new(fm, 0.0), C64::new(0.0, -fp), ZERO],
        layout,
    )
}

/// Exchange-coupler mixture at time t: the evolved entangled core with
/// weight p on top of white noise.
pub fn analytic_freq_converter_mixed(kappa: f64, p: f64, t: f64) -> Result<QuantumState> {
    werner_like(p, &converter_mixed_core(kappa, t)?)
}

/// Closed-form trajectory of a scenario.
///
/// The damped model requires zero-temperature baths; the converter models
/// require lossless evolution. Everything else is an unsupported
/// combination rather than a silent approximation.
pub fn analytic_trajectory(cfg: &ModelConfig, grid: &[f64]) -> Result<Trajectory> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let mut states = Vec::with_capacity(grid.len());
    match cfg.model {
        Model::DampedWerner => {
            for &t in grid {
                states.push(analytic_damped_werner(cfg, t)?);
            }
        }
        Model::ConverterPure | Model::ConverterMixed => {
            if !cfg.lossless() {
                return Err(CoreError::Unsupported {
                    model: cfg.model.as_str(),
                    what: "closed form with damping",
                });
            }
            for &t in grid {
                let state = if cfg.model == Model::ConverterPure {
                    analytic_freq_converter_pure(cfg.kappa, t)?.to_density()
                } else {
                    analytic_freq_converter_mixed(cfg.kappa, cfg.p, t)?
                };
                states.push(state);
            }
        }
        Model::Kerr => {
            if !cfg.lossless() {
                return Err(CoreError::Unsupported {
                    model: cfg.model.as_str(),
                    what: "closed form with damping",
                });
            }
            let dim = layout.dim(0);
            for &t in grid {
                states.push(kerr_state(cfg.alpha0, cfg.kappa * t, dim)?.to_density());
            }
        }
    }
    Ok(Trajectory {
        path: EvolutionPath::Analytic,
        times: grid.to_vec(),
        states,
    })
}

/// Closed-form quadrature variances of the Kerr oscillator at scaled time
/// tau = kappa t: returns (S_x(phi), S_opt).
pub fn analytic_kerr_witnesses(cfg: &ModelConfig, tau: f64) -> (f64, f64) {
    kerr_variances_closed_form(cfg.alpha0, cfg.phi, cfg.phi0, tau)
}

fn kerr_variances_closed_form(alpha0: C64, phi: f64, phi0: f64, tau: f64) -> (f64, f64) {
    let a = alpha0.norm_sqr();
    let f = |k: f64, l: f64| (k * a * ((l * tau).cos() - 1.0)).exp();
    let t_arg = |k: f64, l: f64| k * a * (l * tau).sin() + 2.0 * (phi - phi0);
    let f12 = f(1.0, 2.0);
    let f21 = f(2.0, 1.0);
    let t12 = t_arg(1.0, 2.0);
    let t21 = t_arg(2.0, 1.0);
    let sx = 2.0 * a * (1.0 + f12 * (t12 + tau).cos() - f21 * (t21.cos() + 1.0));
    let f22 = f(2.0, 2.0);
    let f41 = f(4.0, 1.0);
    let tprime = t12 - t21 + tau;
    let sopt = 2.0 * a * (1.0 - f21 - (f22 + f41 - 2.0 * f12 * f21 * tprime.cos()).sqrt());
    (sx, sopt)
}

struct Dissipator {
    a: ComplexMatrix,
    ad: ComplexMatrix,
    ada: ComplexMatrix,
    aad: ComplexMatrix,
    /// gamma (nbar + 1) / 2
    down: f64,
    /// gamma nbar / 2
    up: f64,
}

fn build_dissipators(cfg: &ModelConfig, layout: &HilbertLayout) -> Result<Vec<Dissipator>> {
    let mut out = Vec::new();
    for mode in 0..layout.n_modes() {
        if cfg.gamma[mode] == 0.0 {
            continue;
        }
        let a = layout.embed(&annihilation(layout.dim(mode)), mode)?;
        let ad = a.dagger();
        out.push(Dissipator {
            ada: ad.mul(&a),
            aad: a.mul(&ad),
            a,
            ad,
            down: cfg.gamma[mode] * (cfg.nbar[mode] + 1.0) / 2.0,
            up: cfg.gamma[mode] * cfg.nbar[mode] / 2.0,
        });
    }
    Ok(out)
}

fn liouvillian(
    h: &ComplexMatrix,
    dissipators: &[Dissipator],
    rho: &ComplexMatrix,
) -> ComplexMatrix {
    let comm = h.mul(rho).sub(&rho.mul(h));
    let mut out = comm.scale(C64::new(0.0, -1.0));
    for d in dissipators {
        if d.down != 0.0 {
            let sandwich = d.a.mul(rho).mul(&d.ad).scale(C64::new(2.0, 0.0));
            let anti = d.ada.mul(rho).add(&rho.mul(&d.ada));
            out = out.add(&sandwich.sub(&anti).scale(C64::new(d.down, 0.0)));
        }
        if d.up != 0.0 {
            let sandwich = d.ad.mul(rho).mul(&d.a).scale(C64::new(2.0, 0.0));
            let anti = d.aad.mul(rho).add(&rho.mul(&d.aad));
            out = out.add(&sandwich.sub(&anti).scale(C64::new(d.up, 0.0)));
        }
    }
    out
}

/// Validates and wraps an integrator state at a sample point: trace checked
/// against drift, then renormalized and symmetrized; oscillator modes
/// (cutoff above two levels) must keep their top level empty.
fn finish_sample(
    rho: &ComplexMatrix,
    layout: &HilbertLayout,
) -> Result<QuantumState> {
    let tr = rho.trace();
    let drift = (tr.re - 1.0).abs().max(tr.im.abs());
    if drift > TRACE_DRIFT_MAX {
        return Err(CoreError::TraceDrift { deviation: drift });
    }
    let normalized = rho.scale(ONE / tr).hermitize();
    for mode in 0..layout.n_modes() {
        let dim = layout.dim(mode);
        if dim <= 2 {
            continue; // genuine qubit, the top level is physical
        }
        let mut top = 0.0;
        for idx in 0..layout.total_dim() {
            if layout.decode(idx)[mode] == dim - 1 {
                top += normalized[(idx, idx)].re;
            }
        }
        if top > LEAKAGE_MAX {
            return Err(CoreError::Leakage {
                mode: mode + 1,
                population: top,
            });
        }
    }
    QuantumState::new(normalized, layout.clone())
}

/// Number of integrator sub-steps for one grid interval.
fn substeps(interval: f64, dt: f64) -> usize {
    ((interval / dt).ceil() as usize).max(1)
}

/// Master-equation trajectory on the sample grid.
///
/// Lossless scenarios are propagated exactly through the eigenbasis of the
/// Hamiltonian instead of stepping RK4 through a stiff generator; the
/// result is still the master-equation solution, just free of integration
/// error.
pub fn lindblad_evolve(
    cfg: &ModelConfig,
    rho0: &QuantumState,
    grid: &[f64],
    dt: f64,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !dt.is_finite() || dt <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "step must be positive",
        });
    }
    let layout = rho0.layout().clone();
    if cfg.lossless() {
        let mut traj = unitary_density_evolve(cfg, rho0, grid)?;
        traj.path = EvolutionPath::Lindblad;
        return Ok(traj);
    }
    let h = hamiltonian(cfg, &layout)?;
    let dissipators = build_dissipators(cfg, &layout)?;
    let mut rho = rho0.rho().clone();
    let mut times_iter = grid.iter();
    let mut t_prev = match times_iter.next() {
        Some(&t0) => t0,
        None => {
            return Err(CoreError::InvalidParameter {
                name: "grid",
                value: 0.0,
                reason: "need at least one sample time",
            })
        }
    };
    if t_prev != 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "grid",
            value: t_prev,
            reason: "grid must start at time zero",
        });
    }
    let mut states = vec![finish_sample(&rho, &layout)?];
    for &t in times_iter {
        let interval = t - t_prev;
        let n = substeps(interval, dt);
        let h_step = interval / n as f64;
        for _ in 0..n {
            let k1 = liouvillian(&h, &dissipators, &rho);
            let k2 = liouvillian(
                &h,
                &dissipators,
                &rho.add(&k1.scale(C64::new(h_step / 2.0, 0.0))),
            );
            let k3 = liouvillian(
                &h,
                &dissipators,
                &rho.add(&k2.scale(C64::new(h_step / 2.0, 0.0))),
            );
            let k4 = liouvillian(&h, &dissipators, &rho.add(&k3.scale(C64::new(h_step, 0.0))));
            let sum = k1
                .add(&k2.scale(C64::new(2.0, 0.0)))
                .add(&k3.scale(C64::new(2.0, 0.0)))
                .add(&k4);
            rho = rho.add(&sum.scale(C64::new(h_step / 6.0, 0.0)));
        }
        // the generator maps Hermitian to Hermitian; anything beyond
        // roundoff accumulation signals an integrator defect
        let herm_drift = rho.hermitian_deviation();
        if herm_drift > 1e-10 * t.max(1.0) {
            return Err(CoreError::NonHermitian {
                deviation: herm_drift,
            });
        }
        states.push(finish_sample(&rho, &layout)?);
        t_prev = t;
    }
    Ok(Trajectory {
        path: EvolutionPath::Lindblad,
        times: grid.to_vec(),
        states,
    })
}

/// Exact propagation of a pure state under the scenario Hamiltonian.
/// Requires a lossless configuration.
pub fn unitary_evolve(cfg: &ModelConfig, psi0: &PureState, grid: &[f64]) -> Result<Trajectory> {
    cfg.validate()?;
    if !cfg.lossless() {
        return Err(CoreError::Unsupported {
            model: cfg.model.as_str(),
            what: "unitary propagation with damping",
        });
    }
    let layout = psi0.layout().clone();
    let h = hamiltonian(cfg, &layout)?;
    let (vals, vecs) = eig_hermitian(&h)?;
    let vdag = vecs.dagger();
    let coeffs = vdag.matvec(psi0.amps());
    let mut states = Vec::with_capacity(grid.len());
    for &t in grid {
        let rotated: Vec<C64> = coeffs
            .iter()
            .zip(&vals)
            .map(|(c, &e)| c * C64::from_polar(1.0, -e * t))
            .collect();
        let amps = vecs.matvec(&rotated);
        let d = amps.len();
        let rho = ComplexMatrix::from_fn(d, d, |r, c| amps[r] * amps[c].conj());
        states.push(finish_sample(&rho, &layout)?);
    }
    Ok(Trajectory {
        path: EvolutionPath::Lindblad,
        times: grid.to_vec(),
        states,
    })
}

/// Exact propagation of a density matrix: rho(t) = U rho U^dag.
fn unitary_density_evolve(
    cfg: &ModelConfig,
    rho0: &QuantumState,
    grid: &[f64],
) -> Result<Trajectory> {
    let layout = rho0.layout().clone();
    let h = hamiltonian(cfg, &layout)?;
    let (vals, vecs) = eig_hermitian(&h)?;
    let vdag = vecs.dagger();
    // work in the eigenbasis once; rotate back per sample
    let core = vdag.mul(rho0.rho()).mul(&vecs);
    let n = layout.total_dim();
    let mut states = Vec::with_capacity(grid.len());
    for &t in grid {
        let mut rotated = core.clone();
        for r in 0..n {
            for c in 0..n {
                rotated[(r, c)] *= C64::from_polar(1.0, -(vals[r] - vals[c]) * t);
            }
        }
        let rho = vecs.mul(&rotated).mul(&vdag);
        states.push(finish_sample(&rho, &layout)?);
    }
    Ok(Trajectory {
        path: EvolutionPath::Analytic,
        times: grid.to_vec(),
        states,
    })
}

/// Monte Carlo parameters: trajectory count, base seed, and jump step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McwfConfig {
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
}

/// Trajectory-averaged states, kept in batches for error estimation.
#[derive(Debug, Clone)]
pub struct McwfEnsemble {
    times: Vec<f64>,
    layout: HilbertLayout,
    /// batch_sums[b][t] accumulates |psi><psi| over the batch's trajectories
    batch_sums: Vec<Vec<ComplexMatrix>>,
    batch_counts: Vec<usize>,
    n_traj: usize,
}

impl McwfEnsemble {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_traj(&self) -> usize {
        self.n_traj
    }

    pub fn n_batches(&self) -> usize {
        self.batch_counts.len()
    }

    /// Ensemble-mean state at one sample index.
    pub fn mean_state(&self, t_idx: usize) -> Result<QuantumState> {
        let d = self.layout.total_dim();
        let mut sum = ComplexMatrix::zeros(d, d);
        for batch in &self.batch_sums {
            sum = sum.add(&batch[t_idx]);
        }
        finish_sample(&sum.scale(ONE / C64::new(self.n_traj as f64, 0.0)), &self.layout)
    }

    /// Mean state of one batch at one sample index.
    pub fn batch_state(&self, batch: usize, t_idx: usize) -> Result<QuantumState> {
        let count = self.batch_counts[batch];
        finish_sample(
            &self.batch_sums[batch][t_idx].scale(ONE / C64::new(count as f64, 0.0)),
            &self.layout,
        )
    }

    /// Standard error of a scalar statistic across batches.
    pub fn standard_error(
        &self,
        t_idx: usize,
        f: &mut dyn FnMut(&QuantumState) -> Result<f64>,
    ) -> Result<f64> {
        let b = self.n_batches();
        let mut values = Vec::with_capacity(b);
        for batch in 0..b {
            values.push(f(&self.batch_state(batch, t_idx)?)?);
        }
        let mean = values.iter().sum::<f64>() / b as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        Ok((var / b as f64).sqrt())
    }

    /// The ensemble mean as an ordinary trajectory.
    pub fn trajectory(&self) -> Result<Trajectory> {
        let states = (0..self.times.len())
            .map(|i| self.mean_state(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            path: EvolutionPath::Mcwf,
            times: self.times.clone(),
            states,
        })
    }
}

/// Per-trajectory RNG seed: splitmix-style avalanche of (seed, index).
fn trajectory_seed(seed: u64, idx: u64) -> u64 {
    let mut z = seed ^ idx.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct JumpOp {
    op: ComplexMatrix,
}

/// Shared machinery of the Monte Carlo runs: jump operators and the
/// non-Hermitian step generator 1 - i H_eff dt.
struct McwfEngine {
    jumps: Vec<JumpOp>,
    h_eff: ComplexMatrix,
}

impl McwfEngine {
    fn new(cfg: &ModelConfig, layout: &HilbertLayout) -> Result<Self> {
        let mut jumps = Vec::new();
        for mode in 0..layout.n_modes() {
            let gamma = cfg.gamma[mode];
            if gamma == 0.0 {
                continue;
            }
            let a = layout.embed(&annihilation(layout.dim(mode)), mode)?;
            let down = (gamma * (cfg.nbar[mode] + 1.0)).sqrt();
            jumps.push(JumpOp {
                op: a.scale(C64::new(down, 0.0)),
            });
            if cfg.nbar[mode] > 0.0 {
                let up = (gamma * cfg.nbar[mode]).sqrt();
                jumps.push(JumpOp {
                    op: a.dagger().scale(C64::new(up, 0.0)),
                });
            }
        }
        let mut h_eff = hamiltonian(cfg, layout)?;
        for j in &jumps {
            let cc = j.op.dagger().mul(&j.op);
            h_eff = h_eff.add(&cc.scale(C64::new(0.0, -0.5)));
        }
        Ok(Self { jumps, h_eff })
    }

    /// Advance one first-order step. Draws at most two uniforms: one for
    /// the jump decision, one for the channel choice.
    fn step(&self, psi: &mut Vec<C64>, dt: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let mut probs = Vec::with_capacity(self.jumps.len());
        let mut jumped_states: Vec<Vec<C64>> = Vec::with_capacity(self.jumps.len());
        let mut delta_p = 0.0;
        for j in &self.jumps {
            let cpsi = j.op.matvec(psi);
            let w: f64 = cpsi.iter().map(|z| z.norm_sqr()).sum();
            let p = dt * w;
            delta_p += p;
            probs.push(p);
            jumped_states.push(cpsi);
        }
        if delta_p > JUMP_PROB_MAX {
            return Err(CoreError::StepTooLarge { delta_p });
        }
        if !self.jumps.is_empty() && rng.gen::<f64>() < delta_p {
            // jump: pick the channel proportionally to its weight
            let r = rng.gen::<f64>() * delta_p;
            let mut acc = 0.0;
            let mut chosen = probs.len() - 1;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if r < acc {
                    chosen = i;
                    break;
                }
            }
            *psi = std::mem::take(&mut jumped_states[chosen]);
        } else {
            // drift under the non-Hermitian generator
            let hp = self.h_eff.matvec(psi);
            for (a, h) in psi.iter_mut().zip(&hp) {
                *a -= C64::new(0.0, dt) * h;
            }
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for a in psi.iter_mut() {
            *a /= norm;
        }
        Ok(())
    }
}

fn run_mcwf<F>(
    cfg: &ModelConfig,
    layout: &HilbertLayout,
    grid: &[f64],
    mc: &McwfConfig,
    mut initial: F,
) -> Result<McwfEnsemble>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<Vec<C64>>,
{
    cfg.validate()?;
    if mc.n_traj == 0 {
        return Err(CoreError::InvalidParameter {
            name: "n_traj",
            value: 0.0,
            reason: "need at least one trajectory",
        });
    }
    if !mc.dt.is_finite() || mc.dt <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "dt",
            value: mc.dt,
            reason: "step must be positive",
        });
    }
    if grid.first() != Some(&0.0) {
        return Err(CoreError::InvalidParameter {
            name: "grid",
            value: grid.first().copied().unwrap_or(f64::NAN),
            reason: "grid must start at time zero",
        });
    }
    let engine = McwfEngine::new(cfg, layout)?;
    let d = layout.total_dim();
    let n_batches = mc.n_traj.min(20);
    let mut batch_sums =
        vec![vec![ComplexMatrix::zeros(d, d); grid.len()]; n_batches];
    let mut batch_counts = vec![0usize; n_batches];

    for traj in 0..mc.n_traj {
        let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(mc.seed, traj as u64));
        let mut psi = initial(&mut rng)?;
        let batch = traj % n_batches;
        batch_counts[batch] += 1;
        accumulate(&mut batch_sums[batch][0], &psi);
        let mut t_prev = 0.0;
        for (t_idx, &t) in grid.iter().enumerate().skip(1) {
            let interval = t - t_prev;
            let n = substeps(interval, mc.dt);
            let h = interval / n as f64;
            for _ in 0..n {
                engine.step(&mut psi, h, &mut rng)?;
            }
            accumulate(&mut batch_sums[batch][t_idx], &psi);
            t_prev = t;
        }
    }
    Ok(McwfEnsemble {
        times: grid.to_vec(),
        layout: layout.clone(),
        batch_sums,
        batch_counts,
        n_traj: mc.n_traj,
    })
}

fn accumulate(sum: &mut ComplexMatrix, psi: &[C64]) {
    for r in 0..psi.len() {
        for c in 0..psi.len() {
            sum[(r, c)] += psi[r] * psi[c].conj();
        }
    }
}

/// Monte Carlo average over jump unravelings from a fixed pure state.
pub fn mcwf_evolve(
    cfg: &ModelConfig,
    psi0: &PureState,
    grid: &[f64],
    mc: &McwfConfig,
) -> Result<McwfEnsemble> {
    let amps = psi0.amps().to_vec();
    run_mcwf(cfg, psi0.layout(), grid, mc, move |_| Ok(amps.clone()))
}

/// Monte Carlo average for the mixture models: each trajectory starts from
/// the entangled core with probability p, otherwise from one of the four
/// basis states chosen uniformly.
pub fn mcwf_evolve_werner(
    cfg: &ModelConfig,
    grid: &[f64],
    mc: &McwfConfig,
) -> Result<McwfEnsemble> {
    let core = mixture_core(cfg.model)?;
    let layout = core.layout().clone();
    let sample_layout = layout.clone();
    let p = cfg.p;
    run_mcwf(cfg, &sample_layout, grid, mc, move |rng| {
        if rng.gen::<f64>() < p {
            Ok(core.amps().to_vec())
        } else {
            let which = rng.gen_range(0..4usize);
            let occs = [(0, 0), (0, 1), (1, 0), (1, 1)][which];
            Ok(PureState::basis(layout.clone(), &[occs.0, occs.1])?
                .amps()
                .to_vec())
        }
    })
}
