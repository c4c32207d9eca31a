//! Acceptance checks for the full pipeline, one per shipped guarantee.
//! Every test prints a single PASS/FAIL line so the suite doubles as a
//! readable checklist under --nocapture.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use witsim::dynamics::{
    analytic_damped_werner, analytic_kerr_witnesses, initial_state, kerr_cutoff, lindblad_evolve,
    mcwf_evolve_werner, sample_grid, McwfConfig, Model, ModelConfig,
};
use witsim::events::{closed_form_sv_times, detect_events, EventClass, EventKind, WitnessSample};
use witsim::linalg::{ComplexMatrix, HilbertLayout, C64};
use witsim::moments::{
    default_lists, moment_matrix, nonclassicality_detected, npt_detected, parse_monomial_list,
};
use witsim::states::{coherent_state, kerr_state, moment, MonomialMoment, PureState, QuantumState};
use witsim::witnesses::{self, WitnessId};

const PI: f64 = std::f64::consts::PI;

/// Scalar statistic probed on ensemble states for error bars.
type StatProbe<'a> = &'a mut dyn FnMut(&QuantumState) -> witsim::Result<f64>;

fn finish(n: usize, what: &str, violations: Vec<String>) {
    let verdict = if violations.is_empty() { "PASS" } else { "FAIL" };
    println!("acceptance criterion {n} ({what}): {verdict}");
    assert!(
        violations.is_empty(),
        "criterion {n} ({what}):\n  {}",
        violations.join("\n  ")
    );
}

fn damped_config(p: f64) -> ModelConfig {
    let mut cfg = ModelConfig::new(Model::DampedWerner);
    cfg.gamma = [1.0, 1.0];
    cfg.p = p;
    cfg.s0 = 0.03;
    cfg.d0 = 0.1;
    cfg
}

fn mixed_config() -> ModelConfig {
    let mut cfg = ModelConfig::new(Model::ConverterMixed);
    cfg.p = 0.8;
    cfg.s0 = 0.5;
    cfg.d0 = 1.0;
    cfg
}

fn witness_samples(
    cfg: &ModelConfig,
    grid: &[f64],
    states: &[QuantumState],
    ids: &[WitnessId],
) -> Vec<WitnessSample> {
    let params = cfg.witness_params();
    let mut samples = Vec::with_capacity(grid.len() * ids.len());
    for (k, &t) in grid.iter().enumerate() {
        for &id in ids {
            let v = witnesses::evaluate(id, &states[k], &params).unwrap();
            samples.push(WitnessSample {
                time: t,
                id,
                raw: v.raw,
                truncated: v.truncated,
            });
        }
    }
    samples
}

#[test]
fn criterion_1_sudden_vanishing_times_recovered_from_integration() {
    let started = Instant::now();
    let mut violations = Vec::new();
    let cfg = damped_config(0.8);
    let grid = sample_grid(3.0, 3001).unwrap();
    let traj = lindblad_evolve(&cfg, &initial_state(&cfg).unwrap(), &grid, 1e-3).unwrap();
    let ids = [WitnessId::C, WitnessId::B, WitnessId::S, WitnessId::D];
    let events =
        detect_events(&witness_samples(&cfg, &grid, &traj.states, &ids)).unwrap();
    let table = closed_form_sv_times(&cfg).unwrap();

    for id in ids {
        let want = table
            .iter()
            .find(|e| e.witness == id)
            .and_then(|e| e.t_sv)
            .unwrap();
        let found: Vec<_> = events.iter().filter(|e| e.witness == id).collect();
        if found.len() != 1 {
            violations.push(format!("{id}: expected exactly one event, got {}", found.len()));
            continue;
        }
        let ev = found[0];
        if ev.kind != EventKind::Vanish || ev.class != EventClass::Proper {
            violations.push(format!("{id}: expected a proper vanish, got {ev:?}"));
        }
        let dev = (ev.time - want).abs();
        if dev > 1e-5 {
            violations.push(format!("{id}: |detected - closed form| = {dev:.3e}"));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    if secs >= 10.0 {
        violations.push(format!("took {secs:.1} s, budget 10 s"));
    }
    finish(1, "vanishing times from the integrated trajectory", violations);
}

#[test]
fn criterion_2_master_equation_matches_closed_form_states() {
    let mut violations = Vec::new();
    let grid = sample_grid(2.0, 5).unwrap();
    for p in [0.5, 0.8, 1.0] {
        let cfg = damped_config(p);
        let traj = lindblad_evolve(&cfg, &initial_state(&cfg).unwrap(), &grid, 1e-3).unwrap();
        for (k, &t) in grid.iter().enumerate().skip(1) {
            let closed = analytic_damped_werner(&cfg, t).unwrap();
            let dev = closed.rho().sub(traj.states[k].rho()).max_abs();
            if dev > 1e-8 {
                violations.push(format!("p = {p}, t = {t}: max entry dev {dev:.3e}"));
            }
        }
    }
    finish(2, "integrated states match the damped closed form", violations);
}

#[test]
fn criterion_3_pure_converter_truncated_witnesses_follow_the_formulas() {
    let mut violations = Vec::new();
    let mut cfg = ModelConfig::new(Model::ConverterPure);
    cfg.kappa = 1.0;
    let grid = sample_grid(PI, 200).unwrap();
    let traj = lindblad_evolve(&cfg, &initial_state(&cfg).unwrap(), &grid, 1e-3).unwrap();
    let params = cfg.witness_params();
    let ids = [
        WitnessId::C,
        WitnessId::B,
        WitnessId::H,
        WitnessId::Q1,
        WitnessId::Q2,
    ];
    for (k, &t) in grid.iter().enumerate() {
        let s2 = (2.0 * t).sin();
        let expected = [
            s2.abs(),
            s2.abs(),
            0.25 * s2 * s2,
            t.sin().powi(2),
            t.cos().powi(2),
        ];
        for (&id, &want) in ids.iter().zip(&expected) {
            let got = witnesses::evaluate(id, &traj.states[k], &params)
                .unwrap()
                .truncated;
            if (got - want).abs() > 1e-9 {
                violations.push(format!("{id} at t = {t:.4}: got {got:.12}, want {want:.12}"));
            }
        }
    }
    finish(3, "pure-converter truncated witnesses", violations);
}

#[test]
fn criterion_4_mixed_converter_ordering_and_complementarity() {
    let mut violations = Vec::new();
    let cfg = mixed_config();
    let grid = sample_grid(PI, 2001).unwrap();
    let traj = lindblad_evolve(&cfg, &initial_state(&cfg).unwrap(), &grid, 1e-3).unwrap();
    let ids = [WitnessId::B, WitnessId::H, WitnessId::C];
    let events =
        detect_events(&witness_samples(&cfg, &grid, &traj.states, &ids)).unwrap();
    let table = closed_form_sv_times(&cfg).unwrap();

    let mut sv_times = Vec::new();
    for id in ids {
        let sv = events
            .iter()
            .find(|e| e.witness == id && e.kind == EventKind::Vanish)
            .map(|e| e.time);
        let sr = events
            .iter()
            .find(|e| e.witness == id && e.kind == EventKind::Rebirth)
            .map(|e| e.time);
        let (Some(sv), Some(sr)) = (sv, sr) else {
            violations.push(format!("{id}: missing vanish or rebirth"));
            continue;
        };
        let want = table.iter().find(|e| e.witness == id).unwrap();
        let dev_sv = (sv - want.t_sv.unwrap()).abs();
        if dev_sv > 1e-5 {
            violations.push(format!("{id}: vanish off by {dev_sv:.3e}"));
        }
        let comp = (sv + sr - PI / 2.0).abs();
        if comp > 1e-5 {
            violations.push(format!("{id}: |t_SV + t_SR - pi/2| = {comp:.3e}"));
        }
        sv_times.push(sv);
    }
    // weaker witnesses lose detection earlier
    if !(sv_times.len() == 3 && sv_times[0] < sv_times[1] && sv_times[1] < sv_times[2]) {
        violations.push(format!("vanish ordering B < H < C broken: {sv_times:?}"));
    }
    finish(4, "mixed-converter event ordering and complementarity", violations);
}

#[test]
fn criterion_5_kerr_closed_forms_are_self_consistent() {
    let mut violations = Vec::new();
    let mut cfg = ModelConfig::new(Model::Kerr);
    cfg.alpha0 = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let dim = kerr_cutoff(cfg.alpha0);

    let closed_sx = |phi: f64, tau: f64| {
        let mut c = cfg.clone();
        c.phi = phi;
        analytic_kerr_witnesses(&c, tau).0
    };

    for k in 1..=50 {
        let tau = 2.0 * PI * k as f64 / 50.0;
        let state = kerr_state(cfg.alpha0, tau, dim).unwrap().to_density();
        let (want_x, want_opt) = analytic_kerr_witnesses(&cfg, tau);
        let got_x = witnesses::quad_variance(&state, 0.0).unwrap();
        let got_opt = witnesses::principal_variance(&state).unwrap();
        if (got_x - want_x).abs() > 1e-8 {
            violations.push(format!("tau = {tau:.3}: fixed-phase variance off by {:.3e}", (got_x - want_x).abs()));
        }
        if (got_opt - want_opt).abs() > 1e-8 {
            violations.push(format!("tau = {tau:.3}: principal variance off by {:.3e}", (got_opt - want_opt).abs()));
        }

        // the optimized form must equal the phase-scanned minimum
        let n_scan = 64;
        let mut best_phi = 0.0;
        let mut best = f64::INFINITY;
        for j in 0..n_scan {
            let phi = PI * j as f64 / n_scan as f64;
            let v = closed_sx(phi, tau);
            if v < best {
                best = v;
                best_phi = phi;
            }
        }
        let h = PI / n_scan as f64;
        let (mut lo, mut hi) = (best_phi - h, best_phi + h);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut m1, mut m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut f1, mut f2) = (closed_sx(m1, tau), closed_sx(m2, tau));
        for _ in 0..90 {
            if f1 <= f2 {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - g * (hi - lo);
                f1 = closed_sx(m1, tau);
            } else {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + g * (hi - lo);
                f2 = closed_sx(m2, tau);
            }
        }
        let scanned = f1.min(f2);
        if (scanned - want_opt).abs() > 1e-10 {
            violations.push(format!(
                "tau = {tau:.3}: phase scan {scanned:.14} vs optimized {want_opt:.14}"
            ));
        }
    }
    finish(5, "anharmonic squeezing closed forms", violations);
}

#[test]
fn criterion_6_monte_carlo_brackets_the_master_equation() {
    let started = Instant::now();
    let mut violations = Vec::new();
    let cfg = damped_config(0.8);
    let grid = sample_grid(1.0, 11).unwrap();
    let mc = McwfConfig {
        n_traj: 2000,
        seed: 11,
        dt: 1e-3,
    };
    let ensemble = mcwf_evolve_werner(&cfg, &grid, &mc).unwrap();
    let lind = lindblad_evolve(&cfg, &initial_state(&cfg).unwrap(), &grid, 1e-3).unwrap();
    let n1 = MonomialMoment::single(2, 1, 1, 1);

    for (k, &t) in grid.iter().enumerate().skip(1) {
        let mean = ensemble.mean_state(k).unwrap();
        let checks: [(&str, f64, f64, StatProbe); 2] = [
            (
                "mode-1 occupation",
                moment(&mean, &n1).unwrap().re,
                moment(&lind.states[k], &n1).unwrap().re,
                &mut |s| Ok(moment(s, &n1)?.re),
            ),
            (
                "concurrence",
                witnesses::concurrence(&mean).unwrap(),
                witnesses::concurrence(&lind.states[k]).unwrap(),
                &mut witnesses::concurrence,
            ),
        ];
        for (label, got, want, f) in checks {
            let se = ensemble.standard_error(k, f).unwrap();
            let dev = (got - want).abs();
            if se.is_nan() || se <= 0.0 {
                violations.push(format!("{label} at t = {t:.2}: degenerate error bar"));
            } else if dev > 4.0 * se {
                violations.push(format!(
                    "{label} at t = {t:.2}: dev {dev:.3e} vs 4 sigma = {:.3e}",
                    4.0 * se
                ));
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    if secs >= 60.0 {
        violations.push(format!("took {secs:.1} s, budget 60 s"));
    }
    finish(6, "Monte Carlo mean within error bars", violations);
}

#[test]
fn criterion_7_moment_matrices_separate_classical_from_nonclassical() {
    let mut violations = Vec::new();
    let dim = 16;
    let layout = HilbertLayout::new(vec![dim, dim]).unwrap();
    let lists = default_lists(2);
    let params = ModelConfig::new(Model::ConverterMixed).witness_params();
    let ids = [
        WitnessId::H,
        WitnessId::Hp,
        WitnessId::S,
        WitnessId::D,
        WitnessId::Q1,
        WitnessId::Q2,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    for trial in 0..100 {
        // random three-component mixture of two-mode coherent products
        let mut rho = ComplexMatrix::zeros(dim * dim, dim * dim);
        let mut weights = [0.0f64; 3];
        for w in &mut weights {
            *w = rng.gen_range(0.1..1.0);
        }
        let total: f64 = weights.iter().sum();
        for &w in &weights {
            let mut amps = Vec::with_capacity(dim * dim);
            let mut alphas = Vec::new();
            for _ in 0..2 {
                let r = rng.gen_range(0.0..0.5);
                let th = rng.gen_range(0.0..2.0 * PI);
                alphas.push(coherent_state(C64::from_polar(r, th), dim).unwrap());
            }
            for &a in alphas[0].amps() {
                for &b in alphas[1].amps() {
                    amps.push(a * b);
                }
            }
            for i in 0..dim * dim {
                for j in 0..dim * dim {
                    rho[(i, j)] += amps[i] * amps[j].conj() * (w / total);
                }
            }
        }
        let state = QuantumState::new(rho, layout.clone()).unwrap();

        for list in &lists {
            let det = moment_matrix(&state, list).unwrap().det_lu().re;
            if det < -1e-10 {
                violations.push(format!("trial {trial}: list ({list}) det {det:.3e}"));
            }
            if nonclassicality_detected(&state, list).unwrap() {
                violations.push(format!("trial {trial}: false nonclassicality on ({list})"));
            }
            for mode in 0..2 {
                if npt_detected(&state, mode, list).unwrap() {
                    violations.push(format!(
                        "trial {trial}: false negativity on ({list}), mode {mode}"
                    ));
                }
            }
        }
        for id in ids {
            let v = witnesses::evaluate(id, &state, &params).unwrap().truncated;
            if v > 1e-9 {
                violations.push(format!("trial {trial}: classical {id} fired at {v:.3e}"));
            }
        }
    }

    // sub-Poissonian Fock state: the photon-number list must go negative
    let fock = PureState::basis(HilbertLayout::single(3).unwrap(), &[1])
        .unwrap()
        .to_density();
    let q = witnesses::mandel_q(&fock, 1).unwrap();
    if (q - 1.0).abs() > 1e-12 {
        violations.push(format!("Fock |1>: sub-Poissonian value {q}, want 1"));
    }
    let number_list = parse_monomial_list("1,a1+a1", 1).unwrap();
    if !nonclassicality_detected(&fock, &number_list).unwrap() {
        violations.push("Fock |1>: photon-number matrix failed to fire".into());
    }

    // entangled pair: the pair list must certify negativity
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = PureState::new(
        vec![
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
            C64::new(s, 0.0),
            C64::new(0.0, 0.0),
        ],
        HilbertLayout::new(vec![2, 2]).unwrap(),
    )
    .unwrap()
    .to_density();
    if witnesses::concurrence(&bell).unwrap() < 0.99 {
        violations.push("Bell pair: concurrence lost".into());
    }
    let pair_list = parse_monomial_list("1,a1a2", 2).unwrap();
    if !npt_detected(&bell, 1, &pair_list).unwrap() {
        violations.push("Bell pair: partial-transpose matrix failed to fire".into());
    }
    finish(7, "moment-matrix classifiers", violations);
}

#[test]
fn criterion_8_touching_and_proper_events_are_told_apart() {
    let mut violations = Vec::new();
    let grid = sample_grid(PI, 2001).unwrap();

    let mut pure = ModelConfig::new(Model::ConverterPure);
    pure.kappa = 1.0;
    let traj = lindblad_evolve(&pure, &initial_state(&pure).unwrap(), &grid, 1e-3).unwrap();
    let events =
        detect_events(&witness_samples(&pure, &grid, &traj.states, &[WitnessId::C])).unwrap();
    if events.len() != 2 {
        violations.push(format!("pure converter: {} events, want 2", events.len()));
    }
    for ev in &events {
        if ev.class != EventClass::Touching {
            violations.push(format!("pure converter: {:?} not touching", ev.kind));
        }
        if (ev.time - PI / 2.0).abs() > 1e-9 {
            violations.push(format!("pure converter: graze at {} not pi/2", ev.time));
        }
    }
    if events.len() == 2
        && !(events[0].kind == EventKind::Vanish && events[1].kind == EventKind::Rebirth)
    {
        violations.push("pure converter: graze must report a vanish-rebirth pair".into());
    }

    let mixed = mixed_config();
    let traj = lindblad_evolve(&mixed, &initial_state(&mixed).unwrap(), &grid, 1e-3).unwrap();
    let events =
        detect_events(&witness_samples(&mixed, &grid, &traj.states, &[WitnessId::C])).unwrap();
    if events.is_empty() {
        violations.push("mixed converter: no events".into());
    }
    for ev in &events {
        if ev.class != EventClass::Proper {
            violations.push(format!(
                "mixed converter: {} at {} misclassified as touching",
                ev.kind.as_str(),
                ev.time
            ));
        }
    }
    finish(8, "touching vs proper classification", violations);
}

#[test]
fn criterion_9_bundled_scenarios_reproduce_byte_for_byte() {
    let mut violations = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    for name in ["fig1", "fig2", "fig3a", "fig3b"] {
        let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("configs/{name}.cfg"));
        let mut outs = Vec::new();
        for round in 0..2 {
            let out_dir = dir.path().join(format!("{name}-{round}"));
            let status = Command::new(env!("CARGO_BIN_EXE_witsim"))
                .args(["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
                .output()
                .expect("binary should run");
            if status.status.code() != Some(0) {
                violations.push(format!(
                    "{name} round {round}: exit {:?}: {}",
                    status.status.code(),
                    String::from_utf8_lossy(&status.stderr)
                ));
            }
            outs.push(out_dir);
        }
        if outs.len() == 2 {
            for artifact in ["witnesses.csv", "events.csv", "compare.csv", "plot.gp"] {
                let a = std::fs::read(outs[0].join(artifact)).unwrap_or_default();
                let b = std::fs::read(outs[1].join(artifact)).unwrap_or_default();
                if a.is_empty() || a != b {
                    violations.push(format!("{name}: {artifact} not reproducible"));
                }
            }
        }
    }
    finish(9, "bundled scenarios reproduce byte for byte", violations);
}
