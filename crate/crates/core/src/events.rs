//! Detection, refinement, and classification of sudden-vanishing (SV) and
//! sudden-rebirth (SR) events on witness trajectories, plus the closed-form
//! event times of the built-in models.
//!
//! An event lives in the raw (untruncated) signal: the truncated witness
//! max(0, raw) hits zero exactly where raw crosses below zero. Two shapes
//! must be told apart: a proper SV, where raw stays negative for a finite
//! interval before the matching SR, and a touching event, where raw only
//! grazes zero and recovers instantly. max(0, cos t) produces the former,
//! |cos t| the latter.

use crate::dynamics::{Model, ModelConfig};
use crate::error::{CoreError, Result};
use crate::witnesses::WitnessId;

/// Absolute dead band: |raw| at or below this counts as zero.
pub const DEAD_BAND: f64 = 1e-9;
/// Refined bracket width relative to the full time span.
const BRACKET_REL: f64 = 1e-10;
/// Permitted spread of grid steps relative to the mean step.
const GRID_UNIFORM_REL: f64 = 1e-6;

/// One witness evaluation along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessSample {
    pub time: f64,
    pub id: WitnessId,
    pub raw: f64,
    pub truncated: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Witness drops to zero.
    Vanish,
    /// Witness becomes positive again (or for the first time).
    Rebirth,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Vanish => "SV",
            EventKind::Rebirth => "SR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventClass {
    /// Finite zero interval between vanish and rebirth.
    Proper,
    /// Graze: zero attained and left instantly.
    Touching,
}

impl EventClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventClass::Proper => "proper",
            EventClass::Touching => "touching",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub witness: WitnessId,
    pub kind: EventKind,
    pub time: f64,
    pub class: EventClass,
    pub bracket: (f64, f64),
    /// A rebirth with no preceding vanish: the witness was absent from the
    /// start and appears here for the first time.
    pub first_appearance: bool,
}

fn sign_of(raw: f64) -> i8 {
    if raw > DEAD_BAND {
        1
    } else if raw < -DEAD_BAND {
        -1
    } else {
        0
    }
}

/// Refine a zero crossing of the piecewise interpolant on [times[i], times[j]]
/// by bisection down to a bracket of width `target`. When the crossing sits
/// in a single grid interval a parabola through three neighboring samples
/// is used; wider brackets (in-band plateaus) fall back to the
/// piecewise-linear interpolant.
fn refine_crossing(
    times: &[f64],
    raw: &[f64],
    i: usize,
    j: usize,
    target: f64,
) -> (f64, (f64, f64)) {
    let eval: Box<dyn Fn(f64) -> f64> = if j == i + 1 {
        // stencil: the crossing interval plus its left neighbor when one
        // exists, otherwise the right neighbor
        let (k0, k1, k2) = if i >= 1 { (i - 1, i, i + 1) } else { (i, i + 1, i + 2) };
        let (t0, t1, t2) = (times[k0], times[k1], times[k2]);
        let (y0, y1, y2) = (raw[k0], raw[k1], raw[k2]);
        Box::new(move |t: f64| {
            // Lagrange parabola through the three samples
            y0 * (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2))
                + y1 * (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2))
                + y2 * (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1))
        })
    } else {
        let ts = times[i..=j].to_vec();
        let ys = raw[i..=j].to_vec();
        Box::new(move |t: f64| {
            let k = match ts.iter().position(|&tk| tk > t) {
                Some(0) => 1,
                Some(k) => k,
                None => ts.len() - 1,
            };
            let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
            ys[k - 1] * (1.0 - w) + ys[k] * w
        })
    };
    let (mut lo, mut hi) = (times[i], times[j]);
    let mut f_lo = raw[i];
    while hi - lo > target {
        let mid = 0.5 * (lo + hi);
        let f_mid = eval(mid);
        if (f_mid >= 0.0) == (f_lo >= 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), (lo, hi))
}

/// Vertex of the parabola through three samples around index k.
fn parabola_vertex(times: &[f64], raw: &[f64], k: usize) -> (f64, f64) {
    let (t0, t1, t2) = (times[k - 1], times[k], times[k + 1]);
    let (y0, y1, y2) = (raw[k - 1], raw[k], raw[k + 1]);
    let d1 = (y1 - y0) / (t1 - t0);
    let d2 = (y2 - y1) / (t2 - t1);
    let a = (d2 - d1) / (t2 - t0);
    if a.abs() < f64::EPSILON {
        return (t1, y1);
    }
    // vertex of the Newton form y0 + d1 (t - t0) + a (t - t0)(t - t1)
    let t_vertex = 0.5 * (t0 + t1) - d1 / (2.0 * a);
    let y_vertex = y0 + d1 * (t_vertex - t0) + a * (t_vertex - t0) * (t_vertex - t1);
    (t_vertex, y_vertex)
}

/// Detect events in one witness series (times strictly increasing, uniform).
fn detect_single(id: WitnessId, times: &[f64], raw: &[f64]) -> Result<Vec<EventRecord>> {
    let n = times.len();
    if n < 4 {
        return Err(CoreError::InvalidParameter {
            name: "samples",
            value: n as f64,
            reason: "event detection needs at least four samples",
        });
    }
    let span = times[n - 1] - times[0];
    let h = span / (n - 1) as f64;
    if h.is_nan() || h <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "samples",
            value: h,
            reason: "sample times must be strictly increasing",
        });
    }
    for k in 1..n {
        let step = times[k] - times[k - 1];
        if (step - h).abs() > GRID_UNIFORM_REL * h {
            return Err(CoreError::InvalidParameter {
                name: "samples",
                value: step,
                reason: "sample grid must be uniform",
            });
        }
    }
    let target = BRACKET_REL * span;
    let mut events = Vec::new();
    let mut seen_vanish = false;

    // pass 1: dead-band sign transitions
    let mut prev_idx: Option<usize> = None;
    for k in 0..n {
        let s = sign_of(raw[k]);
        if s == 0 {
            continue;
        }
        let Some(i) = prev_idx else {
            prev_idx = Some(k);
            continue;
        };
        let s_prev = sign_of(raw[i]);
        if s_prev != s {
            let (time, bracket) = refine_crossing(times, raw, i, k, target);
            let kind = if s < 0 {
                EventKind::Vanish
            } else {
                EventKind::Rebirth
            };
            // a crossing that registers a genuinely negative (or positive)
            // sample on the far side is a proper event; grazes never leave
            // the dead band and are handled by the plateau and minimum scans
            let first_appearance = kind == EventKind::Rebirth && !seen_vanish;
            if kind == EventKind::Vanish {
                seen_vanish = true;
            }
            events.push(EventRecord {
                witness: id,
                kind,
                time,
                class: EventClass::Proper,
                bracket,
                first_appearance,
            });
        } else if s_prev > 0 && k > i + 1 {
            // positive, a zero plateau, positive again: the witness hit
            // zero and recovered without a sign change
            let inner_min = raw[i + 1..k].iter().cloned().fold(f64::INFINITY, f64::min);
            let class = if k - i - 1 <= 2 && inner_min > -DEAD_BAND {
                EventClass::Touching
            } else {
                EventClass::Proper
            };
            let (time, bracket) = if class == EventClass::Touching {
                let k_min = (i + 1..k)
                    .min_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap())
                    .unwrap();
                let (tv, _) = if k_min >= 1 && k_min + 1 < n {
                    parabola_vertex(times, raw, k_min)
                } else {
                    (times[k_min], raw[k_min])
                };
                (tv, (tv - target, tv + target))
            } else {
                refine_crossing(times, raw, i, i + 1, target)
            };
            events.push(EventRecord {
                witness: id,
                kind: EventKind::Vanish,
                time,
                class,
                bracket,
                first_appearance: false,
            });
            seen_vanish = true;
            let (r_time, r_bracket) = if class == EventClass::Touching {
                (time, bracket)
            } else {
                refine_crossing(times, raw, k - 1, k, target)
            };
            events.push(EventRecord {
                witness: id,
                kind: EventKind::Rebirth,
                time: r_time,
                class,
                bracket: r_bracket,
                first_appearance: false,
            });
        }
        prev_idx = Some(k);
    }

    // pass 2: grazes that never enter the dead band. A strictly positive
    // local minimum is a touch when the two sampled arms, extended as
    // straight lines, meet at or below the noise floor of the sampling:
    // their intersection value must be under h·min(|slope_l|, |slope_r|).
    // True minima of size O(1) fail this by orders of magnitude; touches
    // of any finite order pass it with a grid-independent margin.
    for k in 2..n.saturating_sub(2) {
        // local sampled minimum; ties resolve to the rightmost candidate
        // so a symmetric straddle fires exactly once
        if sign_of(raw[k]) <= 0 || raw[k] > raw[k - 1] || raw[k] >= raw[k + 1] {
            continue;
        }
        if sign_of(raw[k - 1]) <= 0 || sign_of(raw[k + 1]) <= 0 {
            continue; // dead-band neighborhoods belong to pass 1
        }
        let slope_l = (raw[k - 1] - raw[k - 2]) / h;
        let slope_r = (raw[k + 2] - raw[k + 1]) / h;
        if !(slope_l < 0.0 && slope_r > 0.0) {
            continue;
        }
        // lines through (t[k-1], raw[k-1]) with slope_l and
        // (t[k+1], raw[k+1]) with slope_r
        let t_hat = (raw[k - 1] - raw[k + 1] + slope_r * times[k + 1]
            - slope_l * times[k - 1])
            / (slope_r - slope_l);
        let v_hat = raw[k - 1] + slope_l * (t_hat - times[k - 1]);
        if v_hat > h * slope_l.abs().min(slope_r.abs()) {
            continue;
        }
        // the intersection decides; the vertex of the parabola through the
        // three bottom samples locates the graze without the O(h) bias of
        // the line crossing
        let (t_event, _) = parabola_vertex(times, raw, k);
        for kind in [EventKind::Vanish, EventKind::Rebirth] {
            events.push(EventRecord {
                witness: id,
                kind,
                time: t_event,
                class: EventClass::Touching,
                bracket: (t_event - target, t_event + target),
                first_appearance: false,
            });
        }
    }

    events.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .unwrap()
            .then_with(|| (a.kind == EventKind::Rebirth).cmp(&(b.kind == EventKind::Rebirth)))
    });
    Ok(events)
}

/// Detect SV/SR events on a witness-sample list. Samples may interleave
/// several witnesses; each witness series must sit on a uniform time grid
/// dense enough that the raw signal changes sign at most once per step.
pub fn detect_events(samples: &[WitnessSample]) -> Result<Vec<EventRecord>> {
    let mut order: Vec<WitnessId> = Vec::new();
    for s in samples {
        if !order.contains(&s.id) {
            order.push(s.id);
        }
    }
    let mut out = Vec::new();
    for id in order {
        let times: Vec<f64> = samples
            .iter()
            .filter(|s| s.id == id)
            .map(|s| s.time)
            .collect();
        let raw: Vec<f64> = samples
            .iter()
            .filter(|s| s.id == id)
            .map(|s| s.raw)
            .collect();
        out.extend(detect_single(id, &times, &raw)?);
    }
    Ok(out)
}

/// Closed-form event times for one witness: either time may be absent when
/// the witness never vanishes (or never appears).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormEvent {
    pub witness: WitnessId,
    pub t_sv: Option<f64>,
    pub t_sr: Option<f64>,
}

/// arccos(x)/(2k), or None when x falls outside [-1, 1].
fn acos_over(x: f64, kappa: f64) -> Option<f64> {
    if !(-1.0..=1.0).contains(&x) || !x.is_finite() {
        return None;
    }
    Some(x.acos() / (2.0 * kappa))
}

/// Positive times only; a vanish "at or before the start" is no vanish.
fn positive(t: f64) -> Option<f64> {
    (t > 0.0 && t.is_finite()).then_some(t)
}

/// Closed-form SV and SR times of the damped-pair and mixed-converter
/// scenarios. The damped model needs equal rates and zero-temperature
/// baths; other models have no closed-form event table.
pub fn closed_form_sv_times(cfg: &ModelConfig) -> Result<Vec<ClosedFormEvent>> {
    cfg.validate()?;
    let p = cfg.p;
    match cfg.model {
        Model::DampedWerner => {
            let gamma = cfg.gamma[0];
            if cfg.gamma[1] != gamma || gamma <= 0.0 {
                return Err(CoreError::Unsupported {
                    model: cfg.model.as_str(),
                    what: "closed-form event times with unequal rates",
                });
            }
            if cfg.nbar[0] != 0.0 || cfg.nbar[1] != 0.0 {
                return Err(CoreError::Unsupported {
                    model: cfg.model.as_str(),
                    what: "closed-form event times with thermal baths",
                });
            }
            let entry = |witness, t: Option<f64>| ClosedFormEvent {
                witness,
                t_sv: t.and_then(positive),
                t_sr: None,
            };
            let t_c = (p < 1.0).then(|| ((1.0 + p) / (2.0 * (1.0 - p))).ln() / gamma);
            let t_b = Some((2f64.sqrt() * p).ln() / gamma);
            let t_s =
                (cfg.s0 > 0.0).then(|| ((1.0 + p) / (2.0 * cfg.s0)).ln() / (2.0 * gamma));
            let t_d = (cfg.d0 != 0.0)
                .then(|| ((1.0 + p) / (2.0 * cfg.d0 * cfg.d0)).ln() / (2.0 * gamma));
            Ok(vec![
                entry(WitnessId::C, t_c),
                entry(WitnessId::B, t_b),
                entry(WitnessId::S, t_s),
                entry(WitnessId::D, t_d),
            ])
        }
        Model::ConverterMixed => {
            if cfg.gamma[0] != 0.0 || cfg.gamma[1] != 0.0 {
                return Err(CoreError::Unsupported {
                    model: cfg.model.as_str(),
                    what: "closed-form event times with damping",
                });
            }
            let k = cfg.kappa;
            if k <= 0.0 {
                return Err(CoreError::InvalidParameter {
                    name: "kappa",
                    value: k,
                    reason: "closed-form event times need a positive coupling",
                });
            }
            let quarter = std::f64::consts::FRAC_PI_2 / k / 2.0;
            let half = std::f64::consts::FRAC_PI_2 / k;
            let sv_c = acos_over((1.0 - p) / (2.0 * p), k).and_then(positive);
            let sv_b = acos_over((1.0 - p * p).sqrt() / p, k).and_then(positive);
            let sv_h = acos_over((1.0 - p).sqrt() / p, k).and_then(positive);
            let sv_s = acos_over(
                (2.0 * cfg.s0 + p - 1.0).sqrt() / (2f64.sqrt() * p),
                k,
            )
            .map(|t| quarter + t)
            .and_then(positive);
            let sv_d = acos_over(
                (2.0 * cfg.d0 * cfg.d0 + p - 1.0) / (4.0 * cfg.d0 * p),
                k,
            )
            .map(|t| quarter + t)
            .and_then(positive);
            let sr = |sv: Option<f64>, period: f64| sv.map(|t| period - t);
            Ok(vec![
                ClosedFormEvent {
                    witness: WitnessId::C,
                    t_sv: sv_c,
                    t_sr: sr(sv_c, half),
                },
                ClosedFormEvent {
                    witness: WitnessId::B,
                    t_sv: sv_b,
                    t_sr: sr(sv_b, half),
                },
                ClosedFormEvent {
                    witness: WitnessId::H,
                    t_sv: sv_h,
                    t_sr: sr(sv_h, half),
                },
                ClosedFormEvent {
                    witness: WitnessId::S,
                    t_sv: sv_s,
                    t_sr: sr(sv_s, 2.0 * half),
                },
                ClosedFormEvent {
                    witness: WitnessId::D,
                    t_sv: sv_d,
                    t_sr: sr(sv_d, 3.0 * half),
                },
            ])
        }
        _ => Err(CoreError::Unsupported {
            model: cfg.model.as_str(),
            what: "closed-form event times",
        }),
    }
}
