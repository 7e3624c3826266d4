//! End-to-end runs of every experiment: output schema plus the property
//! each one exists to show.

use fenand::config::{ExperimentConfig, OutputFormat};
use fenand::experiments::{run, strictly_decreasing, write_outputs, ExperimentId, ExperimentOutput, Table};

const DISTURB_FREE: f64 = 0.01;

fn cfg() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.array.distribution_cells = 40;
    c.array.sweep_points = 11;
    c
}

fn go(id: ExperimentId) -> ExperimentOutput {
    let out = run(id, &cfg()).unwrap_or_else(|e| panic!("{id}: {e}"));
    assert_eq!(out.id, id);
    for t in &out.tables {
        assert!(!t.rows.is_empty(), "{} is empty", t.name);
        for r in &t.rows {
            assert_eq!(r.len(), t.columns.len(), "{}", t.name);
        }
    }
    out
}

fn table<'a>(out: &'a ExperimentOutput, name: &str) -> &'a Table {
    out.table(name).unwrap_or_else(|| panic!("no table {name}"))
}

fn columns(t: &Table, want: &[&str]) {
    assert_eq!(t.columns, want, "{} columns", t.name);
}

fn flag(out: &ExperimentOutput, key: &str) -> bool {
    out.summary[key].as_bool().unwrap_or_else(|| panic!("{key} missing"))
}

fn scalar(out: &ExperimentOutput, key: &str) -> f64 {
    out.summary[key].as_f64().unwrap_or_else(|| panic!("{key} missing"))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn fig2g_hvt_field_curves() {
    let out = go(ExperimentId::Fig2g);
    let t = table(&out, "fig2g");
    columns(t, &["v_pass_v", "efe_wg_pass_vpm", "efe_pg_pass_vpm"]);
    assert_eq!(t.rows.len(), cfg().sweeps.field_points);
    let wg = t.numbers("efe_wg_pass_vpm");
    assert!(wg.windows(2).all(|w| w[1] > w[0]), "WG pass must strengthen the depolarizing field");
    // HVT polarization is negative: PG pass drives E_FE down with it
    let pg = t.numbers("efe_pg_pass_vpm");
    assert!(pg.windows(2).all(|w| w[1] < w[0]));
    assert!(flag(&out, "wg_strictly_increasing") && flag(&out, "pg_moves_toward_p"));
}

#[test]
fn fig2h_lvt_screening() {
    let out = go(ExperimentId::Fig2h);
    let t = table(&out, "fig2h");
    columns(t, &["v_pass_v", "efe_wg_pass_vpm", "efe_pg_pass_vpm", "screening_pg"]);
    let wg = t.numbers("efe_wg_pass_vpm");
    assert!(wg.windows(2).all(|w| w[1] > w[0]), "WG pass aligns with P in LVT");
    // PG curve is far flatter than the WG one
    let pg = t.numbers("efe_pg_pass_vpm");
    let span = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
    assert!(span(&pg) < 0.05 * span(&wg));
    assert!(scalar(&out, "pg_flatness") < 0.05);

    let d = table(&out, "fig2h_dual_port");
    columns(d, &["v_pg_v", "psi_channel_v", "on_state", "screening", "efe_vpm"]);
    let on = d.numbers("on_state");
    let s = d.numbers("screening");
    assert!(on.iter().any(|&x| x == 1.0), "sweep never turns the channel on");
    for (o, f) in on.iter().zip(&s) {
        if *o == 1.0 {
            assert!(*f < 0.05, "on-state screening factor {f}");
        }
    }
    assert!(s.windows(2).all(|w| w[1] <= w[0] + 1e-12), "more carriers, more screening");
    assert!(scalar(&out, "dual_screening_on_max") < 0.05);
}

fn disturb_grid_checks(out: &ExperimentOutput, name: &str, levels: usize) -> (Vec<f64>, Vec<f64>) {
    let t = table(out, name);
    columns(t, &["state", "v_pass_v", "dwell_s", "dvth_v"]);
    let dwell = cfg().sweeps.dwell.len();
    assert_eq!(t.rows.len(), 2 * levels * dwell);
    let states = t.text("state");
    let dv = t.numbers("dvth_v");
    let pick = |s: &str| -> Vec<f64> {
        states.iter().zip(&dv).filter(|(st, _)| **st == s).map(|(_, d)| *d).collect()
    };
    (pick("HVT"), pick("LVT"))
}

#[test]
fn fig2k_wg_pass_disturbs_hvt_only() {
    let c = cfg();
    let out = go(ExperimentId::Fig2k);
    let (hvt, lvt) = disturb_grid_checks(&out, "fig2k", c.sweeps.wg_v_pass.len());
    assert!(max_abs(&hvt) > 0.1, "HVT should be disturbed, worst {}", max_abs(&hvt));
    assert!(max_abs(&lvt) < DISTURB_FREE);
    // HVT loses threshold, never gains
    assert!(hvt.iter().all(|&d| d <= 1e-12));
    // at each level, longer dwell disturbs at least as much
    let dwell = c.sweeps.dwell.len();
    for row in hvt.chunks(dwell) {
        assert!(row.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{row:?}");
    }
}

#[test]
fn fig2l_pg_pass_is_disturb_free() {
    let out = go(ExperimentId::Fig2l);
    let (hvt, lvt) = disturb_grid_checks(&out, "fig2l", cfg().sweeps.pg_v_pass.len());
    assert!(max_abs(&hvt) < DISTURB_FREE && max_abs(&lvt) < DISTURB_FREE);
}

#[test]
fn fig3b_sensing_ignores_neighbours() {
    let out = go(ExperimentId::Fig3b);
    let t = table(&out, "fig3b");
    columns(t, &["pass_mode", "target_state", "neighbor_states", "v_pass_v", "v_g_v", "i_string_a"]);
    let combos: std::collections::BTreeSet<&str> = t.text("neighbor_states").into_iter().collect();
    for c in ["HH", "HL", "LH", "LL"] {
        assert!(combos.contains(c), "missing neighbour combo {c}");
    }
    assert!(scalar(&out, "neighbor_spread_v") < 0.02);
    for state in ["hvt", "lvt"] {
        let vths: Vec<f64> = ["HH", "HL", "LH", "LL"]
            .iter()
            .map(|c| scalar(&out, &format!("vth_{state}_{c}_v")))
            .collect();
        let spread = vths.iter().cloned().fold(f64::MIN, f64::max) - vths.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.02, "{state}: {vths:?}");
    }
    // too little pass bias on an HVT pass cell starves the string
    assert!(flag(&out, "pg_low_pass_hvt_under_pass"));
    assert!(!flag(&out, "pg_high_pass_hvt_under_pass"));
    assert!(scalar(&out, "pg_low_pass_hvt_max_current_a") < scalar(&out, "pg_low_pass_lvt_max_current_a"));
    assert!(scalar(&out, "pg_low_pass_hvt_max_current_a") < scalar(&out, "pg_high_pass_hvt_max_current_a"));
    let i = t.numbers("i_string_a");
    assert!(i.iter().all(|&x| x.is_finite() && x >= 0.0));
}

#[test]
fn fig3d_string_wl_disturb_and_flip_ordering() {
    let out = go(ExperimentId::Fig3d);
    let t = table(&out, "fig3d");
    columns(t, &["v_pass_v", "dwell_s", "dvth_v"]);
    let v = t.numbers("v_pass_v");
    let lo = v.iter().cloned().fold(f64::MAX, f64::min);
    let hi = v.iter().cloned().fold(f64::MIN, f64::max);
    assert!((lo - 0.9).abs() < 1e-12 && (hi - 2.5).abs() < 1e-12, "grid {lo}..{hi}");
    let dv = t.numbers("dvth_v");
    let at_09: Vec<f64> = v.iter().zip(&dv).filter(|(v, _)| (**v - 0.9).abs() < 1e-12).map(|(_, d)| *d).collect();
    assert!(max_abs(&at_09) < DISTURB_FREE);
    assert!(max_abs(&dv) > 0.4, "2.5 V should flip the victim");

    let f = table(&out, "fig3d_flip");
    columns(f, &["v_pass_v", "flip_time_s"]);
    let times: Vec<Option<f64>> = f.numbers("flip_time_s").into_iter().map(Some).collect();
    assert_eq!(times.len(), cfg().sweeps.flip_v_pass.len());
    assert!(strictly_decreasing(&times));
    assert!(flag(&out, "flip_ordering_ok"));
    let t23 = scalar(&out, "flip_2.3v_s");
    assert!((33e-6..=300e-6).contains(&t23), "{t23}");
}

#[test]
fn fig3i_string_pg_pass_is_disturb_free() {
    let out = go(ExperimentId::Fig3i);
    let t = table(&out, "fig3i");
    columns(t, &["state", "v_pass_v", "dwell_s", "dvth_v"]);
    let v = t.numbers("v_pass_v");
    assert!(v.iter().any(|&x| x >= 15.0));
    assert!(max_abs(&t.numbers("dvth_v")) < DISTURB_FREE);
    assert!(scalar(&out, "max_rel_polarization_change") < 1e-3);
}

#[test]
fn fig4c_eight_wordline_sequence() {
    let out = go(ExperimentId::Fig4c);
    let t = table(&out, "fig4c");
    let mut want = vec!["t_s".to_string(), "I_string_A".to_string()];
    want.extend((0..=8).map(|i| format!("node_{i}_V")));
    want.extend((0..8).map(|i| format!("vth_cell_{i}_V")));
    want.extend((0..8).map(|i| format!("efe_cell_{i}_Vpm")));
    assert_eq!(t.columns, want);
    let ts = t.numbers("t_s");
    assert!(ts.windows(2).all(|w| w[1] > w[0]));
    let erased = scalar(&out, "read_erased_a");
    let programmed = scalar(&out, "read_programmed_a");
    assert!(programmed >= 10.0 * erased, "{programmed} vs {erased}");
    assert!(scalar(&out, "read_ratio") >= 10.0);
    // erase leaves every cell HVT; only WL3 is programmed back
    for k in [0usize, 1, 2, 4, 5, 6, 7] {
        let v = t.numbers(&format!("vth_cell_{k}_V"));
        assert!(*v.last().unwrap() > 0.5, "cell {k} ends at {}", v.last().unwrap());
    }
    let wl3 = t.numbers("vth_cell_3_V");
    assert!(wl3.last().unwrap() < &0.0, "WL3 should end programmed to LVT");
}

#[test]
fn figs2_field_maps() {
    let out = go(ExperimentId::FigS2);
    columns(table(&out, "figS2"), &["port_mode", "v_pass_v", "layer", "role", "field_vpm"]);
    columns(table(&out, "figS2_cells"), &["port_mode", "v_pass_v", "cell", "efe_vpm"]);
    assert!(flag(&out, "single_anti_p_concentration"));
    assert!(flag(&out, "dual_relief"));
    let modes: std::collections::BTreeSet<&str> = table(&out, "figS2").text("port_mode").into_iter().collect();
    assert_eq!(modes.len(), 2);
}

#[test]
fn fig1f_tradeoff_window() {
    let c = cfg();
    let out = go(ExperimentId::Fig1fTradeoff);
    let t = table(&out, "fig1f-tradeoff");
    columns(t, &["port_mode", "v_pass", "dvth_pass_v", "dvth_prog_v"]);
    assert_eq!(t.rows.len(), 2 * c.array.sweep_points);
    let modes = t.text("port_mode");
    let pass = t.numbers("dvth_pass_v");
    let prog = t.numbers("dvth_prog_v");
    let of = |m: &str, v: &[f64]| -> Vec<f64> { modes.iter().zip(v).filter(|(x, _)| **x == m).map(|(_, y)| *y).collect() };
    let sp = of("single", &pass);
    let sg = of("single", &prog);
    assert!(sp.windows(2).all(|w| w[1] >= w[0] - 1e-12), "pass disturb must not fall with V_PASS");
    assert!(sg.windows(2).all(|w| w[1] <= w[0] + 1e-12), "program disturb must not rise with V_PASS");
    let width = scalar(&out, "single_window_width_v");
    assert!(width > 0.0 && width < 2.0);
    let lo = scalar(&out, "dual_window_lo_v");
    let hi = scalar(&out, "dual_window_hi_v");
    assert_eq!((lo, hi), (c.array.sweep_start.value(), c.array.sweep_stop.value()));
    assert!(max_abs(&of("dual", &pass)) < DISTURB_FREE);
}

#[test]
fn fig1i_distributions() {
    let c = cfg();
    let out = go(ExperimentId::Fig1iDist);
    for name in ["fig1i-dist_dual", "fig1i-dist_single"] {
        let t = table(&out, name);
        columns(t, &["quantile", "vth_pre_v", "vth_post_v"]);
        assert_eq!(t.rows.len(), c.array.distribution_cells);
        let q = t.numbers("quantile");
        assert!(q.iter().all(|&x| x > 0.0 && x < 1.0));
        for col in ["quantile", "vth_pre_v", "vth_post_v"] {
            let v = t.numbers(col);
            assert!(v.windows(2).all(|w| w[1] >= w[0]), "{name}.{col} not sorted");
        }
    }
    assert!(scalar(&out, "dual_max_quantile_shift_v") < DISTURB_FREE);
    assert!(scalar(&out, "single_max_quantile_shift_v") > 0.1);
}

fn write_all(id: ExperimentId, c: &ExperimentConfig, format: OutputFormat) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let out = run(id, c).unwrap();
    write_outputs(&out, c, dir.path(), format)
        .unwrap()
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn reruns_are_byte_identical() {
    let c = cfg();
    for id in [ExperimentId::Fig4c, ExperimentId::Fig1iDist, ExperimentId::Fig3b] {
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            assert_eq!(write_all(id, &c, format), write_all(id, &c, format), "{id}");
        }
    }
}

#[test]
fn seed_reaches_the_monte_carlo() {
    let a = cfg();
    let mut b = cfg();
    b.seed = 2;
    let ra = run(ExperimentId::Fig1iDist, &a).unwrap();
    let rb = run(ExperimentId::Fig1iDist, &b).unwrap();
    assert_ne!(ra.tables, rb.tables);
}

#[test]
fn sidecar_records_provenance() {
    let c = cfg();
    let files = write_all(ExperimentId::Fig3i, &c, OutputFormat::Csv);
    let (name, body) = files.last().unwrap();
    assert_eq!(name, "fig3i.meta.json");
    let meta: serde_json::Value = serde_json::from_slice(body).unwrap();
    assert_eq!(meta["experiment"], "fig3i");
    assert_eq!(meta["seed"], 1);
    assert_eq!(meta["config_hash"], c.hash().unwrap());
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["files"][0], "fig3i.csv");
}

#[test]
fn json_tables_match_csv() {
    let c = cfg();
    let out = run(ExperimentId::Fig2g, &c).unwrap();
    let t = &out.tables[0];
    let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
    assert_eq!(v["columns"].as_array().unwrap().len(), t.columns.len());
    assert_eq!(v["rows"].as_array().unwrap().len(), t.rows.len());
    let csv = t.to_csv();
    let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let json_first: Vec<f64> = v["rows"][0].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(first, json_first);
}

#[test]
fn invalid_config_is_refused_before_running() {
    let mut c = cfg();
    c.sweeps.dwell.clear();
    let e = run(ExperimentId::Fig2k, &c).unwrap_err().to_string();
    assert!(e.contains("sweeps.dwell"), "{e}");
}
