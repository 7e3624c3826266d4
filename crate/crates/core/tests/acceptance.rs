//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test --release --test acceptance`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use fenand::cell::{CellState, Port};
use fenand::config::{ExperimentConfig, OutputFormat, StackKind};
use fenand::electrostatics::{
    efe_vs_vpass_curve, solve_electrostatics, ChannelChargeModel, GateStack, PassTerminal, EPS0,
};
use fenand::experiments::{
    calibrate, default_sequence, run, strictly_decreasing, write_outputs, CalibrationTargets, ExperimentId,
    ExperimentOutput,
};
use fenand::kinetics::{GrainEnsemble, MemoryState, Orientation, SwitchingKinetics};
use fenand::string::{StringConfig, TransientOptions};

// tolerances
const FLIP_WINDOW: (f64, f64) = (33e-6, 300e-6);
const NO_FLIP: f64 = 0.010;
const CALIBRATION_BUDGET_S: f64 = 60.0;
const DISTURB_FREE: f64 = 0.010;
const PG_STRESS_V: f64 = 15.0;
const PG_STRESS_S: f64 = 1.0;
const SCREENING_ON: f64 = 0.05;
const FIELD_CURVES_BUDGET_S: f64 = 5.0;
const NEIGHBOR_SPREAD: f64 = 0.020;
const READ_RATIO: f64 = 10.0;
const RESIDUAL: f64 = 1e-9;
const CONTINUITY: f64 = 1e-9;
const REFINEMENT: f64 = 1e-3;
const MC_ABS: f64 = 0.01;
const MC_TRIALS: usize = 100_000;

struct Verdict {
    ok: bool,
    detail: String,
}

fn f(out: &ExperimentOutput, key: &str) -> f64 {
    out.summary.get(key).and_then(|v| v.as_f64()).unwrap_or(f64::NAN)
}

fn b(out: &ExperimentOutput, key: &str) -> bool {
    out.summary.get(key).and_then(|v| v.as_bool()).unwrap_or(false)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn c1_calibration(cfg: &mut ExperimentConfig) -> Verdict {
    let t0 = Instant::now();
    let (fitted, report) = match calibrate(&ExperimentConfig::default(), &CalibrationTargets::default()) {
        Ok(r) => r,
        Err(e) => return Verdict { ok: false, detail: format!("calibrate failed: {e}") },
    };
    *cfg = fitted;
    let out = match run(ExperimentId::Fig3d, cfg) {
        Ok(o) => o,
        Err(e) => return Verdict { ok: false, detail: format!("fig3d failed: {e}") },
    };
    let elapsed = t0.elapsed().as_secs_f64();
    let flips = out.table("fig3d_flip").map(|t| t.numbers("flip_time_s")).unwrap_or_default();
    let times: Vec<Option<f64>> = flips.iter().copied().map(Some).collect();
    let t23 = report.eval.flip_time.unwrap_or(f64::NAN);
    let t23_string = f(&out, "flip_2.3v_s");
    let grid = out.table("fig3d").unwrap();
    let at_09: Vec<f64> = grid
        .numbers("v_pass_v")
        .iter()
        .zip(grid.numbers("dvth_v"))
        .filter(|(v, _)| (**v - 0.9).abs() < 1e-12)
        .map(|(_, d)| d)
        .collect();
    let hold = report.eval.hold_dvth.abs().max(max_abs(&at_09));
    let mut ok = true;
    let in_window = |t: f64| (FLIP_WINDOW.0..=FLIP_WINDOW.1).contains(&t);
    ok &= report.converged;
    ok &= in_window(t23) && in_window(t23_string);
    ok &= times.len() == 4 && strictly_decreasing(&times);
    ok &= hold < NO_FLIP && !at_09.is_empty();
    ok &= elapsed < CALIBRATION_BUDGET_S;
    Verdict {
        ok,
        detail: format!(
            "moves={} flip(2.3 V) cell={t23:.3e} s string={t23_string:.3e} s in [{:.1e}, {:.1e}]; flips {:?} strictly decreasing; 0.9 V/1 s |dVTH|={:.1} mV < {:.0} mV; {elapsed:.2} s < {CALIBRATION_BUDGET_S} s",
            report.moves,
            FLIP_WINDOW.0,
            FLIP_WINDOW.1,
            flips.iter().map(|t| format!("{t:.2e}")).collect::<Vec<_>>(),
            hold * 1e3,
            NO_FLIP * 1e3
        ),
    }
}

fn worst_at(out: &ExperimentOutput, name: &str) -> (f64, bool) {
    let t = out.table(name).unwrap();
    let v = t.numbers("v_pass_v");
    let dwell = t.numbers("dwell_s");
    let covers = v.iter().zip(&dwell).any(|(v, d)| *v >= PG_STRESS_V && *d >= PG_STRESS_S);
    let states: std::collections::BTreeSet<&str> = t.text("state").into_iter().collect();
    (max_abs(&t.numbers("dvth_v")), covers && states.len() == 2)
}

fn c2_dual_port(outs: &BTreeMap<ExperimentId, ExperimentOutput>) -> Verdict {
    let (cell, c1) = worst_at(&outs[&ExperimentId::Fig2l], "fig2l");
    let (string, c2) = worst_at(&outs[&ExperimentId::Fig3i], "fig3i");
    let ok = c1 && c2 && cell < DISTURB_FREE && string < DISTURB_FREE;
    Verdict {
        ok,
        detail: format!(
            "PG up to {PG_STRESS_V} V for {PG_STRESS_S} s, HVT+LVT: cell max |dVTH|={:.2} mV, string max |dVTH|={:.2} mV < {:.0} mV",
            cell * 1e3,
            string * 1e3,
            DISTURB_FREE * 1e3
        ),
    }
}

fn c3_field_curves(cfg: &ExperimentConfig) -> Verdict {
    let t0 = Instant::now();
    let mut ok = true;
    let mut notes = String::new();
    let g = run(ExperimentId::Fig2g, cfg).unwrap();
    let h = run(ExperimentId::Fig2h, cfg).unwrap();
    let wg = g.table("fig2g").unwrap().numbers("efe_wg_pass_vpm");
    let rising = wg.windows(2).all(|w| w[1] > w[0]);
    ok &= rising;
    let _ = write!(notes, "single-port HVT dE/dV>0 at {} pts: {rising}; ", wg.len());

    let d = h.table("fig2h_dual_port").unwrap();
    let on: Vec<f64> = d
        .numbers("on_state")
        .iter()
        .zip(d.numbers("screening"))
        .filter(|(o, _)| **o == 1.0)
        .map(|(_, s)| s)
        .collect();
    let worst = on.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ok &= !on.is_empty() && worst < SCREENING_ON;
    let _ = write!(notes, "dual-port LVT on-state screening max={worst:.4} < {SCREENING_ON} over {} pts; ", on.len());

    // HVT on both stacks with a back port
    let dev = cfg.device(StackKind::DualPort).unwrap();
    let mut toward = true;
    for (stack, ch, ps) in [
        (dev.stack.clone(), dev.channel, dev.saturation_polarization),
        {
            let s = cfg.device(StackKind::SinglePort).unwrap();
            (s.stack, s.channel, s.saturation_polarization)
        },
    ] {
        let curve = efe_vs_vpass_curve(&stack, &ch, ps, MemoryState::Hvt, PassTerminal::PassGate, (0.0, PG_STRESS_V), 61).unwrap();
        // HVT: P < 0
        toward &= curve.windows(2).all(|w| w[1].e_fe < w[0].e_fe);
    }
    toward &= b(&g, "pg_moves_toward_p");
    ok &= toward;
    let elapsed = t0.elapsed().as_secs_f64();
    ok &= elapsed < FIELD_CURVES_BUDGET_S;
    let _ = write!(notes, "dual-port HVT E_FE toward sign(P): {toward}; {elapsed:.2} s < {FIELD_CURVES_BUDGET_S} s");
    Verdict { ok, detail: notes }
}

fn c4_sensing(outs: &BTreeMap<ExperimentId, ExperimentOutput>) -> Verdict {
    let o = &outs[&ExperimentId::Fig3b];
    let spread = f(o, "neighbor_spread_v");
    let under = b(o, "pg_low_pass_hvt_under_pass") && !b(o, "pg_low_pass_lvt_under_pass");
    let i_hvt = f(o, "pg_low_pass_hvt_max_current_a");
    let i_lvt = f(o, "pg_low_pass_lvt_max_current_a");
    let i_hi = f(o, "pg_high_pass_hvt_max_current_a");
    let ok = spread < NEIGHBOR_SPREAD && under && i_hvt < i_lvt && i_hvt < i_hi && !b(o, "pg_high_pass_hvt_under_pass");
    Verdict {
        ok,
        detail: format!(
            "neighbour spread {:.2} mV < {:.0} mV; low pass with HVT pass cell: under-pass={} I_max {i_hvt:.2e} A vs LVT pass {i_lvt:.2e} A, high pass {i_hi:.2e} A",
            spread * 1e3,
            NEIGHBOR_SPREAD * 1e3,
            under
        ),
    }
}

fn c5_eight_wl(outs: &BTreeMap<ExperimentId, ExperimentOutput>) -> Verdict {
    let o = &outs[&ExperimentId::Fig4c];
    let erased = f(o, "read_erased_a");
    let programmed = f(o, "read_programmed_a");
    let ratio = programmed / erased;
    let s = &outs[&ExperimentId::FigS2];
    let conc = b(s, "single_anti_p_concentration");
    let relief = b(s, "dual_relief");
    Verdict {
        ok: ratio >= READ_RATIO && conc && relief,
        detail: format!(
            "WL3 read erased {erased:.2e} A, programmed {programmed:.2e} A, ratio {ratio:.2e} >= {READ_RATIO}; single-port anti-P concentration {conc}; dual-port relief {relief}"
        ),
    }
}

fn c6_tradeoff(cfg: &ExperimentConfig, outs: &BTreeMap<ExperimentId, ExperimentOutput>) -> Verdict {
    let o = &outs[&ExperimentId::Fig1fTradeoff];
    let t = o.table("fig1f-tradeoff").unwrap();
    let modes = t.text("port_mode");
    let pick = |m: &str, col: &str| -> Vec<f64> {
        modes.iter().zip(t.numbers(col)).filter(|(x, _)| **x == m).map(|(_, y)| y).collect()
    };
    let pass = pick("single", "dvth_pass_v");
    let prog = pick("single", "dvth_prog_v");
    let mono = pass.windows(2).all(|w| w[1] >= w[0]) && prog.windows(2).all(|w| w[1] <= w[0]);
    let lo = f(o, "single_window_lo_v");
    let hi = f(o, "single_window_hi_v");
    let (s0, s1) = (cfg.array.sweep_start.value(), cfg.array.sweep_stop.value());
    let finite = lo.is_finite() && hi.is_finite() && hi >= lo && (hi - lo) < (s1 - s0);
    let dual_full = f(o, "dual_window_lo_v") == s0 && f(o, "dual_window_hi_v") == s1;
    let dual_shift = f(&outs[&ExperimentId::Fig1iDist], "dual_max_quantile_shift_v");
    Verdict {
        ok: mono && finite && dual_full && dual_shift < DISTURB_FREE && cfg.array.disturb_threshold.value() == 0.1,
        detail: format!(
            "single-port monotone {mono}, {:.0} mV window [{lo:.2}, {hi:.2}] V of [{s0}, {s1}] V; dual-port window full sweep {dual_full}; dual distribution shift {:.2} mV",
            cfg.array.disturb_threshold.value() * 1e3,
            dual_shift * 1e3
        ),
    }
}

fn two_capacitor_oracle_ok() -> (f64, f64) {
    let mut worst_res: f64 = 0.0;
    let mut worst_cont: f64 = 0.0;
    let ch = ChannelChargeModel::default();
    for stack in [GateStack::fdsoi(), GateStack::vertical_dual_port()] {
        let fe = stack.ferroelectric_index();
        let chi = stack.channel_index();
        for i in 0..=12 {
            for j in 0..=12 {
                for p in [-0.02, 0.0, 0.013, 0.02] {
                    let v_wg = -6.0 + i as f64;
                    let v_pg = -15.0 + 2.5 * j as f64;
                    let sol = solve_electrostatics(&stack, v_wg, v_pg, p, &ch).unwrap();
                    worst_res = worst_res.max(sol.residual);
                    for (k, layer) in stack.layers().iter().enumerate() {
                        if let Some(e) = sol.fields[k] {
                            let mut d = EPS0 * layer.permittivity * e;
                            if k == fe {
                                d += p;
                            }
                            let expect = if k < chi { sol.displacement_front } else { sol.displacement_back };
                            worst_cont = worst_cont.max((d - expect).abs() / expect.abs().max(1e-12));
                        }
                    }
                }
            }
        }
    }
    (worst_res, worst_cont)
}

/// Forward Euler at a fixed step, re-solving the field every step.
fn fixed_step(cell: &CellState, v_front: f64, duration: f64, steps: usize) -> f64 {
    let mut c = cell.clone();
    let dt = duration / steps as f64;
    for _ in 0..steps {
        let e = solve_electrostatics(&c.stack, v_front, 0.0, c.ensemble.net_polarization(), &c.channel)
            .unwrap()
            .ferroelectric_field;
        c.ensemble.evolve(e, dt, &c.kinetics);
    }
    c.vth(Port::Front, 0.0)
}

fn c7_numerics(cfg: &ExperimentConfig) -> Verdict {
    let (res, cont) = two_capacitor_oracle_ok();

    // cell transients mid-switch
    let dev = cfg.device(StackKind::SinglePort).unwrap();
    let mut hvt = dev.cell(cfg.seed).unwrap();
    hvt.set_state(MemoryState::Hvt);
    let mut worst_oracle: f64 = 0.0;
    let mut worst_adaptive: f64 = 0.0;
    for (v, t) in [(2.3, 150e-6), (2.5, 6e-6), (3.0, 1e-7)] {
        let coarse = fixed_step(&hvt, v, t, 8000);
        let fine = fixed_step(&hvt, v, t, 16000);
        let mut a = hvt.clone();
        a.apply_bias(v, 0.0, t).unwrap();
        worst_oracle = worst_oracle.max((coarse - fine).abs());
        worst_adaptive = worst_adaptive.max((a.vth(Port::Front, 0.0) - fine).abs());
    }

    // string transient under 2x max-step refinement
    let dual = cfg.device(StackKind::DualPort).unwrap();
    let wf = default_sequence(cfg.array.n_wls).unwrap();
    let trace = |h: f64| {
        let mut s = StringConfig::from_device(&dual, cfg.array.n_wls, true, cfg.seed).unwrap();
        for c in &mut s.cells {
            c.set_state(MemoryState::Lvt);
        }
        s.apply_waveform(&wf, &TransientOptions { max_step: Some(h), sample_rate: 2e6 }).unwrap()
    };
    let a = trace(50e-9);
    let b2 = trace(25e-9);
    let mut worst_string: f64 = 0.0;
    for (x, y) in a.samples.iter().zip(&b2.samples) {
        for (p, q) in x.vth.iter().zip(&y.vth).chain(x.nodes.iter().zip(&y.nodes)) {
            worst_string = worst_string.max((p - q).abs());
        }
    }
    let same_len = a.samples.len() == b2.samples.len();

    // Monte Carlo vs analytic single-grain probability
    let mut worst_mc: f64 = 0.0;
    for (beta, ratio) in [(1.0, 1.0), (2.0, 0.7), (2.0, 1.3)] {
        let k = SwitchingKinetics {
            tau0: 1e-9,
            field_exponent: 3.0,
            stretch_exponent: beta,
            activation_median: 1e8,
            activation_sigma: 0.0,
        };
        let field = 1.5e8;
        let dt = ratio * k.switching_time(field, 1e8);
        let mut ens = GrainEnsemble::sample(MC_TRIALS, &k, 0.1, 7).unwrap();
        ens.set_all(Orientation::Down);
        ens.evolve(field, dt, &k);
        let frac = ens.fraction(Orientation::Up);
        worst_mc = worst_mc.max((frac - k.flip_probability(field, 1e8, dt)).abs());
    }

    let ok = res < RESIDUAL
        && cont < CONTINUITY
        && worst_oracle < REFINEMENT
        && worst_adaptive < REFINEMENT
        && same_len
        && worst_string < REFINEMENT
        && worst_mc < MC_ABS;
    Verdict {
        ok,
        detail: format!(
            "residual {res:.1e} V < {RESIDUAL:.0e}; continuity {cont:.1e} < {CONTINUITY:.0e}; fixed-step oracle N vs 2N {:.2} mV, adaptive vs oracle {:.2} mV, string 2x refinement {:.3} mV < 1 mV; MC vs analytic {worst_mc:.4} < {MC_ABS} at {MC_TRIALS} trials",
            worst_oracle * 1e3,
            worst_adaptive * 1e3,
            worst_string * 1e3
        ),
    }
}

fn c8_determinism(cfg: &ExperimentConfig, first: &BTreeMap<ExperimentId, ExperimentOutput>) -> Verdict {
    let root = std::env::temp_dir().join(format!("fenand-acceptance-{}", std::process::id()));
    let mut mismatched = Vec::new();
    for id in ExperimentId::ALL {
        let second = run(id, cfg).unwrap();
        for (k, out) in [&first[&id], &second].into_iter().enumerate() {
            write_outputs(out, cfg, &root.join(k.to_string()), OutputFormat::Csv).unwrap();
        }
        let names: Vec<String> = second
            .tables
            .iter()
            .map(|t| format!("{}.csv", t.name))
            .chain([format!("{}.meta.json", id.as_str())])
            .collect();
        for n in names {
            let a = std::fs::read(root.join("0").join(&n)).unwrap();
            let b = std::fs::read(root.join("1").join(&n)).unwrap();
            if a != b {
                mismatched.push(n);
            }
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    Verdict {
        ok: mismatched.is_empty(),
        detail: format!(
            "all {} experiments re-run with identical config+seed: {} mismatching files {:?}",
            ExperimentId::ALL.len(),
            mismatched.len(),
            mismatched
        ),
    }
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; only a filter that excludes us matters
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let t0 = Instant::now();
    let mut cfg = ExperimentConfig::default();
    let mut verdicts = Vec::new();
    verdicts.push(("calibration anchor", c1_calibration(&mut cfg)));

    let mut outs = BTreeMap::new();
    for id in ExperimentId::ALL {
        match run(id, &cfg) {
            Ok(o) => {
                outs.insert(id, o);
            }
            Err(e) => {
                println!("FAIL experiment {id}: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    verdicts.push(("dual-port disturb-free", c2_dual_port(&outs)));
    verdicts.push(("field-curve structure", c3_field_curves(&cfg)));
    verdicts.push(("string sensing", c4_sensing(&outs)));
    verdicts.push(("8-WL scenario", c5_eight_wl(&outs)));
    verdicts.push(("tradeoff window", c6_tradeoff(&cfg, &outs)));
    verdicts.push(("numerical soundness", c7_numerics(&cfg)));
    verdicts.push(("determinism", c8_determinism(&cfg, &outs)));

    let mut failed = 0;
    for (i, (name, v)) in verdicts.iter().enumerate() {
        if !v.ok {
            failed += 1;
        }
        println!("{} {}. {name}: {}", if v.ok { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        verdicts.len() - failed,
        verdicts.len(),
        t0.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
