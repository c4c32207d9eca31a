//! Scenario execution: evaluate witness trajectories over the requested
//! evolution paths, write the CSV artifacts and a gnuplot script, and run
//! the oracle cross-checks behind `verify`.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use witsim::dynamics::{
    analytic_kerr_witnesses, analytic_trajectory, initial_state, lindblad_evolve, mcwf_evolve,
    mcwf_evolve_werner, sample_grid, EvolutionPath, McwfEnsemble, Model, Trajectory,
};
use witsim::events::{closed_form_sv_times, detect_events, EventKind, WitnessSample};
use witsim::linalg::HilbertLayout;
use witsim::states::{coherent_state, moment, MonomialMoment, PureState, QuantumState};
use witsim::witnesses::{self, WitnessId, WitnessValue};
use witsim::CoreError;

use crate::config::ScenarioConfig;

/// Largest closed-form-vs-integrated witness deviation tolerated by `run`.
const COMPARE_TOL: f64 = 1e-6;
/// Scalar statistic evaluated on ensemble states for error bars.
type StatFn<'a> = Box<dyn FnMut(&QuantumState) -> witsim::Result<f64> + 'a>;
/// State-level agreement tolerance used by `verify`.
const STATE_TOL: f64 = 1e-8;
/// Event-time agreement tolerance used by `verify`.
const EVENT_TOL: f64 = 1e-5;
/// Closed-form squeezing vs Fock-moment tolerance used by `verify`.
const SQUEEZE_TOL: f64 = 1e-8;

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Witness values for every sample of one evolution path, time-major.
struct PathSeries {
    path: EvolutionPath,
    values: Vec<Vec<WitnessValue>>,
}

fn evaluate_states(cfg: &ScenarioConfig, traj: &Trajectory) -> Result<Vec<Vec<WitnessValue>>> {
    let params = cfg.model.witness_params();
    let mut rows = Vec::with_capacity(traj.states.len());
    for state in &traj.states {
        let mut row = Vec::with_capacity(cfg.witnesses.len());
        for &id in &cfg.witnesses {
            row.push(witnesses::evaluate(id, state, &params)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Closed-form quadrature witnesses of the anharmonic oscillator, bypassing
/// the Fock representation entirely on the analytic path.
fn patch_kerr_closed_forms(cfg: &ScenarioConfig, times: &[f64], rows: &mut [Vec<WitnessValue>]) {
    let s0 = cfg.model.s0;
    for (row, &t) in rows.iter_mut().zip(times) {
        let (var_x, var_opt) = analytic_kerr_witnesses(&cfg.model, cfg.model.kappa * t);
        for (slot, &id) in row.iter_mut().zip(&cfg.witnesses) {
            let raw = match id {
                WitnessId::Sx => -var_x - s0,
                WitnessId::Sopt => -var_opt - s0,
                _ => continue,
            };
            *slot = WitnessValue {
                id,
                raw,
                truncated: id.truncate(raw),
                threshold: s0,
            };
        }
    }
}

fn lindblad_traj(cfg: &ScenarioConfig, grid: &[f64]) -> witsim::Result<Trajectory> {
    let rho0 = initial_state(&cfg.model)?;
    lindblad_evolve(&cfg.model, &rho0, grid, cfg.dt)
}

fn mcwf_ensemble(cfg: &ScenarioConfig, grid: &[f64]) -> witsim::Result<McwfEnsemble> {
    let mc = cfg.mcwf();
    match cfg.model.model {
        Model::DampedWerner | Model::ConverterMixed => {
            mcwf_evolve_werner(&cfg.model, grid, &mc)
        }
        Model::ConverterPure => {
            let psi0 = PureState::basis(HilbertLayout::new(vec![2, 2])?, &[0, 1])?;
            mcwf_evolve(&cfg.model, &psi0, grid, &mc)
        }
        Model::Kerr => {
            let dim = cfg.model.layout()?.dim(0);
            let psi0 = coherent_state(cfg.model.alpha0, dim)?;
            mcwf_evolve(&cfg.model, &psi0, grid, &mc)
        }
    }
}

fn evaluate_path(
    cfg: &ScenarioConfig,
    path: EvolutionPath,
    grid: &[f64],
) -> Result<Vec<Vec<WitnessValue>>> {
    match path {
        EvolutionPath::Analytic => {
            let traj = analytic_trajectory(&cfg.model, grid)?;
            let mut rows = evaluate_states(cfg, &traj)?;
            if cfg.model.model == Model::Kerr {
                patch_kerr_closed_forms(cfg, &traj.times, &mut rows);
            }
            Ok(rows)
        }
        EvolutionPath::Lindblad => {
            let traj = lindblad_traj(cfg, grid)?;
            evaluate_states(cfg, &traj)
        }
        EvolutionPath::Mcwf => {
            let traj = mcwf_ensemble(cfg, grid)?.trajectory()?;
            evaluate_states(cfg, &traj)
        }
    }
}

fn witnesses_csv(cfg: &ScenarioConfig, grid: &[f64], series: &[PathSeries]) -> String {
    let mut out = String::from("t");
    for &id in &cfg.witnesses {
        for s in series {
            let _ = write!(out, ",{id}_{}_raw,{id}_{}_trunc", s.path, s.path);
        }
    }
    out.push('\n');
    for (k, &t) in grid.iter().enumerate() {
        out.push_str(&fmt(t));
        for (w, _) in cfg.witnesses.iter().enumerate() {
            for s in series {
                let v = &s.values[k][w];
                let _ = write!(out, ",{},{}", fmt(v.raw), fmt(v.truncated));
            }
        }
        out.push('\n');
    }
    out
}

fn first_path_samples(cfg: &ScenarioConfig, grid: &[f64], series: &[PathSeries]) -> Vec<WitnessSample> {
    let lead = &series[0];
    let mut samples = Vec::with_capacity(grid.len() * cfg.witnesses.len());
    for (k, &t) in grid.iter().enumerate() {
        for (w, &id) in cfg.witnesses.iter().enumerate() {
            let v = &lead.values[k][w];
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

fn events_csv(samples: &[WitnessSample]) -> Result<String> {
    let events = detect_events(samples)?;
    let mut out = String::from("witness,kind,time,classification,bracket_lo,bracket_hi\n");
    for ev in events {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            ev.witness,
            ev.kind.as_str(),
            fmt(ev.time),
            ev.class.as_str(),
            fmt(ev.bracket.0),
            fmt(ev.bracket.1),
        );
    }
    Ok(out)
}

/// Per-time closed-form-vs-integrated deviations. Only deterministic paths
/// enter the comparison; a Monte Carlo mean carries statistical noise far
/// above the tolerance and is cross-checked by `verify` instead.
fn compare_csv(
    cfg: &ScenarioConfig,
    grid: &[f64],
    series: &[PathSeries],
) -> (String, Vec<f64>) {
    let mut out = String::from("t");
    for &id in &cfg.witnesses {
        let _ = write!(out, ",{id}");
    }
    out.push('\n');
    let analytic = series.iter().find(|s| s.path == EvolutionPath::Analytic);
    let numeric = series.iter().find(|s| s.path == EvolutionPath::Lindblad);
    let mut max_dev = vec![0.0f64; cfg.witnesses.len()];
    if let (Some(a), Some(n)) = (analytic, numeric) {
        for (k, &t) in grid.iter().enumerate() {
            out.push_str(&fmt(t));
            for (w, slot) in max_dev.iter_mut().enumerate() {
                let dev = (a.values[k][w].raw - n.values[k][w].raw).abs();
                *slot = slot.max(dev);
                let _ = write!(out, ",{}", fmt(dev));
            }
            out.push('\n');
        }
    }
    (out, max_dev)
}

fn plot_script(cfg: &ScenarioConfig, series: &[PathSeries]) -> String {
    let mut out = String::new();
    out.push_str("# truncated witness trajectories; run with: gnuplot plot.gp\n");
    out.push_str("set datafile separator ','\n");
    out.push_str("set key outside right\n");
    out.push_str("set xlabel 't'\n");
    out.push_str("set ylabel 'truncated witness'\n");
    out.push_str("plot \\\n");
    let n_paths = series.len();
    let mut lines = Vec::new();
    for (w, &id) in cfg.witnesses.iter().enumerate() {
        for (p, s) in series.iter().enumerate() {
            // column 1 is t; each (witness, path) owns a raw/trunc pair
            let col = 3 + 2 * (w * n_paths + p);
            lines.push(format!(
                "  'witnesses.csv' using 1:{col} with lines title '{id} ({})'",
                s.path
            ));
        }
    }
    out.push_str(&lines.join(", \\\n"));
    out.push('\n');
    out
}

pub fn run(cfg: &ScenarioConfig) -> Result<u8> {
    let grid = sample_grid(cfg.t_max, cfg.n_samples)?;
    let mut series = Vec::with_capacity(cfg.paths.len());
    for &path in &cfg.paths {
        let values = evaluate_path(cfg, path, &grid)
            .with_context(|| format!("evaluating the {path} path"))?;
        series.push(PathSeries { path, values });
    }

    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out.display()))?;
    let write = |name: &str, text: &str| -> Result<()> {
        let path = cfg.out.join(name);
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(())
    };

    write("witnesses.csv", &witnesses_csv(cfg, &grid, &series))?;
    write(
        "events.csv",
        &events_csv(&first_path_samples(cfg, &grid, &series))?,
    )?;
    let (compare, max_dev) = compare_csv(cfg, &grid, &series);
    write("compare.csv", &compare)?;
    write("plot.gp", &plot_script(cfg, &series))?;

    let mut exceeded = false;
    if cfg.paths.contains(&EvolutionPath::Analytic) && cfg.paths.contains(&EvolutionPath::Lindblad)
    {
        for (w, &id) in cfg.witnesses.iter().enumerate() {
            let flag = if max_dev[w] > COMPARE_TOL {
                exceeded = true;
                " EXCEEDS TOLERANCE"
            } else {
                ""
            };
            println!(
                "{id}: max |analytic - numeric| = {:.3e} (tol {COMPARE_TOL:.0e}){flag}",
                max_dev[w]
            );
        }
    }
    Ok(if exceeded { 2 } else { 0 })
}

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check_dev(name: &str, dev: f64, tol: f64) -> Check {
    Check {
        name: name.to_string(),
        pass: dev <= tol,
        detail: format!("max dev {dev:.3e} (tol {tol:.0e})"),
    }
}

fn check_err(name: &str, err: impl std::fmt::Display) -> Check {
    Check {
        name: name.to_string(),
        pass: false,
        detail: format!("{err}"),
    }
}

/// Witnesses whose closed-form event table matches trajectories of the
/// mixture models; the shifted number-difference witness follows another
/// phase convention for the exchange coupler and is excluded there.
fn event_check_ids(cfg: &ScenarioConfig) -> Vec<WitnessId> {
    cfg.witnesses
        .iter()
        .copied()
        .filter(|&id| {
            matches!(
                id,
                WitnessId::C | WitnessId::B | WitnessId::H | WitnessId::S | WitnessId::D
            ) && !(cfg.model.model == Model::ConverterMixed && id == WitnessId::D)
        })
        .collect()
}

fn event_time_check(
    cfg: &ScenarioConfig,
    grid: &[f64],
    series: &[Vec<WitnessValue>],
) -> Option<Check> {
    let name = "event times vs closed forms";
    let table = match closed_form_sv_times(&cfg.model) {
        Err(CoreError::Unsupported { .. }) => return None,
        Err(e) => return Some(check_err(name, e)),
        Ok(t) => t,
    };
    let ids = event_check_ids(cfg);
    if ids.is_empty() {
        return None;
    }
    let mut samples = Vec::new();
    for (k, &t) in grid.iter().enumerate() {
        for (w, &id) in cfg.witnesses.iter().enumerate() {
            if !ids.contains(&id) {
                continue;
            }
            let v = &series[k][w];
            samples.push(WitnessSample {
                time: t,
                id,
                raw: v.raw,
                truncated: v.truncated,
            });
        }
    }
    let events = match detect_events(&samples) {
        Err(e) => return Some(check_err(name, e)),
        Ok(ev) => ev,
    };
    let t_max = *grid.last().unwrap();
    // localization is interpolation-limited: the crossing-time error of a
    // linear bracket scales with the squared grid step
    let step = grid[1] - grid[0];
    let tol = EVENT_TOL.max(step * step);
    let mut max_dev = 0.0f64;
    for entry in table.iter().filter(|e| ids.contains(&e.witness)) {
        for (want, kind) in [
            (entry.t_sv, EventKind::Vanish),
            (entry.t_sr, EventKind::Rebirth),
        ] {
            // closed-form times past the sampled window have no counterpart
            let Some(want) = want.filter(|&v| v <= t_max) else {
                continue;
            };
            let best = events
                .iter()
                .filter(|e| e.witness == entry.witness && e.kind == kind)
                .map(|e| (e.time - want).abs())
                .fold(f64::INFINITY, f64::min);
            if best.is_infinite() {
                return Some(check_err(
                    name,
                    format!(
                        "no detected {} for {} near t = {want:.6}",
                        kind.as_str(),
                        entry.witness
                    ),
                ));
            }
            max_dev = max_dev.max(best);
        }
    }
    Some(check_dev(name, max_dev, tol))
}

fn kerr_squeezing_check(cfg: &ScenarioConfig, grid: &[f64]) -> Check {
    let name = "closed-form squeezing vs Fock moments";
    let run = || -> witsim::Result<f64> {
        let dim = cfg.model.layout()?.dim(0);
        let mut max_dev = 0.0f64;
        for &t in grid {
            let tau = cfg.model.kappa * t;
            let state = witsim::states::kerr_state(cfg.model.alpha0, tau, dim)?.to_density();
            let (want_x, want_opt) = analytic_kerr_witnesses(&cfg.model, tau);
            let got_x = witnesses::quad_variance(&state, cfg.model.phi)?;
            let got_opt = witnesses::principal_variance(&state)?;
            max_dev = max_dev.max((got_x - want_x).abs()).max((got_opt - want_opt).abs());
        }
        Ok(max_dev)
    };
    match run() {
        Ok(dev) => check_dev(name, dev, SQUEEZE_TOL),
        Err(e) => check_err(name, e),
    }
}

fn mcwf_check(cfg: &ScenarioConfig, grid: &[f64], lind: &Trajectory) -> Check {
    let widened = cfg.n_traj < 100;
    let limit = if widened { 4.0 } else { 3.0 };
    let name = if widened {
        "Monte Carlo vs master equation (tolerance widened to 4 sigma for a small ensemble)"
    } else {
        "Monte Carlo vs master equation"
    };
    let run = || -> witsim::Result<f64> {
        let ensemble = mcwf_ensemble(cfg, grid)?;
        if ensemble.n_batches() < 2 {
            return Err(CoreError::InvalidParameter {
                name: "n_traj",
                value: cfg.n_traj as f64,
                reason: "error bars need at least two trajectories",
            });
        }
        let n_modes = cfg.model.layout()?.n_modes();
        let n1 = MonomialMoment::single(n_modes, 1, 1, 1);
        let two_qubit = cfg.model.layout()?.dims() == [2, 2];
        let n = grid.len();
        let step = ((n - 1) / 10).max(1);
        let mut max_z = 0.0f64;
        for k in (step..n).step_by(step) {
            let mean = ensemble.mean_state(k)?;
            let mut stats: Vec<(f64, f64, StatFn)> = vec![(
                    moment(&mean, &n1)?.re,
                    moment(&lind.states[k], &n1)?.re,
                    Box::new(|s: &QuantumState| Ok(moment(s, &n1)?.re)),
                )];
            if two_qubit {
                stats.push((
                    witnesses::concurrence(&mean)?,
                    witnesses::concurrence(&lind.states[k])?,
                    Box::new(witnesses::concurrence),
                ));
            }
            for (got, want, mut f) in stats {
                let se = ensemble.standard_error(k, &mut f)?;
                let dev = (got - want).abs();
                // a vanishing error bar only accepts a vanishing deviation
                let z = if se > 0.0 { dev / se } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
                max_z = max_z.max(z);
            }
        }
        Ok(max_z)
    };
    match run() {
        Ok(z) => Check {
            name: name.to_string(),
            pass: z <= limit,
            detail: format!("max |dev| = {z:.2} sigma (limit {limit:.0})"),
        },
        Err(e) => check_err(name, e),
    }
}

pub fn verify(cfg: &ScenarioConfig) -> Result<u8> {
    let grid = sample_grid(cfg.t_max, cfg.n_samples)?;
    let mut checks = Vec::new();

    let lind = match lindblad_traj(cfg, &grid) {
        Ok(t) => Some(t),
        Err(e) => {
            checks.push(check_err("master-equation trajectory", e));
            None
        }
    };

    match analytic_trajectory(&cfg.model, &grid) {
        Err(CoreError::Unsupported { .. }) => {}
        Err(e) => checks.push(check_err("closed-form trajectory", e)),
        Ok(analytic) => {
            if let Some(lind) = &lind {
                let mut state_dev = 0.0f64;
                for (a, l) in analytic.states.iter().zip(&lind.states) {
                    state_dev = state_dev.max(a.rho().sub(l.rho()).max_abs());
                }
                checks.push(check_dev(
                    "state agreement (closed form vs master equation)",
                    state_dev,
                    STATE_TOL,
                ));
            }
            match evaluate_states(cfg, &analytic) {
                Err(e) => checks.push(check_err("witness evaluation", e)),
                Ok(rows) => {
                    let mut a_rows = rows;
                    if cfg.model.model == Model::Kerr {
                        // cross-check the Fock route against the closed forms
                        // instead of comparing a path against itself
                        patch_kerr_closed_forms(cfg, &analytic.times, &mut a_rows);
                    }
                    if let Some(lind) = &lind {
                        match evaluate_states(cfg, lind) {
                            Err(e) => checks.push(check_err("witness evaluation", e)),
                            Ok(l_rows) => {
                                let mut dev = 0.0f64;
                                for (ra, rl) in a_rows.iter().zip(&l_rows) {
                                    for (va, vl) in ra.iter().zip(rl) {
                                        dev = dev.max((va.raw - vl.raw).abs());
                                    }
                                }
                                checks.push(check_dev(
                                    "witness agreement (closed form vs master equation)",
                                    dev,
                                    COMPARE_TOL,
                                ));
                            }
                        }
                    }
                    if let Some(c) = event_time_check(cfg, &grid, &a_rows) {
                        checks.push(c);
                    }
                }
            }
        }
    }

    if cfg.model.model == Model::Kerr {
        checks.push(kerr_squeezing_check(cfg, &grid));
    }

    if cfg.paths.contains(&EvolutionPath::Mcwf) {
        match &lind {
            Some(lind) => checks.push(mcwf_check(cfg, &grid, lind)),
            None => checks.push(check_err(
                "Monte Carlo vs master equation",
                "no master-equation trajectory to compare against",
            )),
        }
    }

    let mut failures = 0;
    for c in &checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("{status}  {}  [{}]", c.name, c.detail);
        if !c.pass {
            failures += 1;
        }
    }
    if failures == 0 {
        println!("all {} checks passed", checks.len());
        Ok(0)
    } else {
        println!("{failures} of {} checks failed", checks.len());
        Ok(2)
    }
}

pub fn sv_times(cfg: &ScenarioConfig) -> Result<u8> {
    let table = closed_form_sv_times(&cfg.model)?;
    println!("{:<8}{:>26}{:>26}", "witness", "t_SV", "t_SR");
    for entry in table {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), fmt);
        println!(
            "{:<8}{:>26}{:>26}",
            entry.witness.to_string(),
            cell(entry.t_sv),
            cell(entry.t_sr)
        );
    }
    Ok(0)
}
