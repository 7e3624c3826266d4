//! Series NAND string of FeFET cells.
//!
//! Cells are ordered from the bit line (BL) to the source line (SL), with
//! optional select transistors at both ends. Several cells may share one
//! word line (WL); all cells share the pass gate / body node (PG).
//!
//! The string is solved quasi-statically: the current is found by
//! bisection in log space, and for each trial current the node potentials
//! are propagated from the low-potential end with the closed-form inverse
//! of the cell current.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cell::{
    extract_vth_constant_current, sweep, CellState, ChannelCurrent, DeviceModel, IvPoint, Port,
    VTH_CURRENT_PER_SQUARE,
};
use crate::electrostatics::ElectrostaticsSolution;
use crate::error::{Error, Result};
use crate::kinetics::substream_seed;
use crate::waveform::{merge_times, BiasWaveform, Terminal, DURATION_TOLERANCE};

/// Most samples a single transient may record.
pub const MAX_TRACE_SAMPLES: usize = 1_000_000;

// log-space bisection span below the saturation bound
const LOG_SPAN: f64 = 600.0;

/// Fixed-threshold select transistors at the string ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectGates {
    /// BL-side select threshold, V.
    pub vth_ssl: f64,
    /// SL-side select threshold, V.
    pub vth_gsl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringConfig {
    /// BL end first.
    pub cells: Vec<CellState>,
    /// All cells' back gates tie to one pass-gate node.
    pub shared_pass_gate: bool,
    pub select: Option<SelectGates>,
    /// Word-line index of each cell.
    wordlines: Vec<usize>,
}

/// Levels on every string terminal; `wl` is indexed by word line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringBiases {
    pub bl: f64,
    pub sl: f64,
    pub pg: f64,
    pub ssl: f64,
    pub gsl: f64,
    pub wl: Vec<f64>,
}

impl StringBiases {
    pub fn zeros(n_wordlines: usize) -> Self {
        StringBiases {
            bl: 0.0,
            sl: 0.0,
            pg: 0.0,
            ssl: 0.0,
            gsl: 0.0,
            wl: vec![0.0; n_wordlines],
        }
    }

    pub fn from_waveform(waveform: &BiasWaveform, t: f64, n_wordlines: usize) -> Self {
        StringBiases {
            bl: waveform.value_at(Terminal::Bl, t),
            sl: waveform.value_at(Terminal::Sl, t),
            pg: waveform.value_at(Terminal::Pg, t),
            ssl: waveform.value_at(Terminal::Ssl, t),
            gsl: waveform.value_at(Terminal::Gsl, t),
            wl: (0..n_wordlines)
                .map(|i| waveform.value_at(Terminal::Wl(i), t))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringSolution {
    /// Positive from BL to SL, A.
    pub current: f64,
    /// Every node from BL to SL, terminals included, V.
    pub nodes: Vec<f64>,
    /// Largest per-element current mismatch relative to `current`.
    pub continuity: f64,
}

/// How unselected cells are made conducting during a read or stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PassMode {
    /// `V_PASS` on the unselected word lines (single-port).
    Wordline,
    /// `V_PASS` on the shared pass gate (dual-port).
    PassGate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadSetup {
    pub v_start: f64,
    pub v_stop: f64,
    pub n_points: usize,
    pub v_pass: f64,
    pub mode: PassMode,
    /// BL bias with the SL grounded, V.
    pub v_ds: f64,
    /// Unselected word-line level in pass-gate mode, V.
    pub v_unselected: f64,
    /// Gate level of the select transistors, V.
    pub v_select: f64,
}

impl ReadSetup {
    pub fn new(v_start: f64, v_stop: f64, n_points: usize, v_pass: f64, mode: PassMode) -> Self {
        ReadSetup {
            v_start,
            v_stop,
            n_points,
            v_pass,
            mode,
            v_ds: 0.05,
            v_unselected: 0.0,
            v_select: 3.0,
        }
    }
}

/// Result of sensing one cell through the string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReadOutcome {
    Sensed {
        curve: Vec<IvPoint>,
        /// Constant-current threshold of the string curve, V.
        vth: f64,
    },
    /// The string never reaches the sensing current: some pass cell is not
    /// conducting at this `V_PASS`.
    UnderPass {
        curve: Vec<IvPoint>,
        max_current: f64,
        target_current: f64,
    },
}

impl ReadOutcome {
    pub fn curve(&self) -> &[IvPoint] {
        match self {
            ReadOutcome::Sensed { curve, .. } | ReadOutcome::UnderPass { curve, .. } => curve,
        }
    }

    pub fn vth(&self) -> Option<f64> {
        match self {
            ReadOutcome::Sensed { vth, .. } => Some(*vth),
            ReadOutcome::UnderPass { .. } => None,
        }
    }

    pub fn max_current(&self) -> f64 {
        self.curve().iter().map(|p| p.i_d).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientOptions {
    /// Longest quasi-static step, s; `None` steps only at breakpoints and
    /// sample times.
    pub max_step: Option<f64>,
    /// Samples per second.
    pub sample_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub biases: StringBiases,
    pub current: f64,
    pub nodes: Vec<f64>,
    pub vth: Vec<f64>,
    pub efe: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StringTrace {
    pub samples: Vec<TraceSample>,
}

impl StringTrace {
    /// Columns: `t_s, I_string_A, node_<k>_V..., vth_cell_<i>_V...,
    /// efe_cell_<i>_Vpm...`, nodes from BL to SL.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.samples.first() else {
            out.push_str("t_s,I_string_A\n");
            return out;
        };
        out.push_str("t_s,I_string_A");
        for k in 0..first.nodes.len() {
            let _ = write!(out, ",node_{k}_V");
        }
        for i in 0..first.vth.len() {
            let _ = write!(out, ",vth_cell_{i}_V");
        }
        for i in 0..first.efe.len() {
            let _ = write!(out, ",efe_cell_{i}_Vpm");
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{:e},{:e}", s.t, s.current);
            for v in s.nodes.iter().chain(&s.vth).chain(&s.efe) {
                let _ = write!(out, ",{v:e}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbPoint {
    pub v_pass: f64,
    pub dwell: f64,
    pub dvth: f64,
}

#[derive(Clone, Copy)]
struct Element {
    overdrive: f64,
    model: ChannelCurrent,
}

impl StringConfig {
    /// One word line per cell.
    pub fn new(cells: Vec<CellState>, shared_pass_gate: bool) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::invalid("a string needs at least one cell"));
        }
        let wordlines = (0..cells.len()).collect();
        Ok(StringConfig {
            cells,
            shared_pass_gate,
            select: None,
            wordlines,
        })
    }

    /// `n` cells from `device`, cell `i` seeded from `(seed, i)`.
    pub fn from_device(device: &DeviceModel, n: usize, shared_pass_gate: bool, seed: u64) -> Result<Self> {
        let cells = (0..n)
            .map(|i| device.cell(substream_seed(seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        StringConfig::new(cells, shared_pass_gate)
    }

    /// Wires cells to word lines; `map[i]` is the WL of cell `i`. Word-line
    /// indices must be dense from 0.
    pub fn with_wordlines(mut self, map: Vec<usize>) -> Result<Self> {
        if map.len() != self.cells.len() {
            return Err(Error::invalid(format!(
                "word-line map has {} entries for {} cells",
                map.len(),
                self.cells.len()
            )));
        }
        let n = map.iter().max().map_or(0, |m| m + 1);
        if (0..n).any(|w| !map.contains(&w)) {
            return Err(Error::invalid("word-line indices must be dense from 0"));
        }
        self.wordlines = map;
        Ok(self)
    }

    pub fn with_select_gates(mut self, select: SelectGates) -> Self {
        self.select = Some(select);
        self
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn n_wordlines(&self) -> usize {
        self.wordlines.iter().max().map_or(0, |m| m + 1)
    }

    pub fn wordline_of(&self, cell: usize) -> usize {
        self.wordlines[cell]
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.cells.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.cells.len(),
            });
        }
        Ok(())
    }

    /// Per-cell gate levels from per-word-line levels.
    pub fn cell_gate_biases(&self, wl: &[f64]) -> Result<Vec<f64>> {
        if wl.len() != self.n_wordlines() {
            return Err(Error::invalid(format!(
                "{} word-line levels for {} word lines",
                wl.len(),
                self.n_wordlines()
            )));
        }
        Ok(self.wordlines.iter().map(|&w| wl[w]).collect())
    }

    fn elements(&self, wl_cells: &[f64], v_pg: f64, v_ssl: f64, v_gsl: f64) -> Vec<Element> {
        let select_model = self.cells[0].channel_current();
        let mut out = Vec::with_capacity(self.cells.len() + 2);
        if let Some(s) = self.select {
            out.push(Element {
                overdrive: v_ssl - s.vth_ssl,
                model: select_model,
            });
        }
        for (cell, &v) in self.cells.iter().zip(wl_cells) {
            out.push(Element {
                overdrive: cell.overdrive(v, v_pg),
                model: cell.channel_current(),
            });
        }
        if let Some(s) = self.select {
            out.push(Element {
                overdrive: v_gsl - s.vth_gsl,
                model: select_model,
            });
        }
        out
    }

    /// Current and node potentials with per-cell gate levels `wl_cells`.
    /// Select gates, if present, are held at 3 V; use
    /// [`StringConfig::solve`] to set them explicitly.
    pub fn solve_string_current(
        &self,
        v_bl: f64,
        v_sl: f64,
        wl_cells: &[f64],
        v_pg: f64,
    ) -> Result<StringSolution> {
        if wl_cells.len() != self.cells.len() {
            return Err(Error::invalid(format!(
                "{} gate levels for {} cells",
                wl_cells.len(),
                self.cells.len()
            )));
        }
        self.solve_elements(&self.elements(wl_cells, v_pg, 3.0, 3.0), v_bl, v_sl)
    }

    pub fn solve(&self, biases: &StringBiases) -> Result<StringSolution> {
        let wl = self.cell_gate_biases(&biases.wl)?;
        let elems = self.elements(&wl, biases.pg, biases.ssl, biases.gsl);
        self.solve_elements(&elems, biases.bl, biases.sl)
    }

    fn solve_elements(&self, elems: &[Element], v_bl: f64, v_sl: f64) -> Result<StringSolution> {
        if !(v_bl.is_finite() && v_sl.is_finite()) || elems.iter().any(|e| !e.overdrive.is_finite()) {
            return Err(Error::invalid("non-finite string bias"));
        }
        let n = elems.len();
        if v_bl == v_sl {
            return Ok(StringSolution {
                current: 0.0,
                nodes: vec![v_sl; n + 1],
                continuity: 0.0,
            });
        }
        // conduct from the low end upward
        let forward = v_bl > v_sl;
        let chain: Vec<Element> = if forward {
            elems.iter().rev().copied().collect()
        } else {
            elems.to_vec()
        };
        let (v_src, v_top) = if forward { (v_sl, v_bl) } else { (v_bl, v_sl) };
        let (current, mut nodes) = solve_chain(&chain, v_src, v_top);
        let continuity = chain
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let i = e.model.current(e.overdrive, nodes[k], nodes[k + 1]);
                if current > 0.0 {
                    (i - current).abs() / current
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        if forward {
            nodes.reverse();
        }
        Ok(StringSolution {
            current: if forward { current } else { -current },
            nodes,
            continuity,
        })
    }

    /// Channel potential of cell `index`: mean of its two nodes.
    pub fn channel_potential(&self, sol: &StringSolution, index: usize) -> f64 {
        let k = index + usize::from(self.select.is_some());
        0.5 * (sol.nodes[k] + sol.nodes[k + 1])
    }

    /// Channel-referenced (front, back) biases of every cell.
    fn local_biases(&self, biases: &StringBiases, sol: &StringSolution) -> Result<Vec<(f64, f64)>> {
        let wl = self.cell_gate_biases(&biases.wl)?;
        Ok((0..self.cells.len())
            .map(|i| {
                let ch = self.channel_potential(sol, i);
                (wl[i] - ch, biases.pg - ch)
            })
            .collect())
    }

    /// Sweeps the target's word line with the rest of the string passed on
    /// word lines or on the pass gate.
    pub fn read_target(&self, target: usize, setup: &ReadSetup) -> Result<ReadOutcome> {
        self.check_index(target)?;
        if setup.n_points < 2 {
            return Err(Error::invalid("read sweep needs at least two points"));
        }
        let twl = self.wordline_of(target);
        let mut biases = StringBiases::zeros(self.n_wordlines());
        biases.bl = setup.v_ds;
        biases.ssl = setup.v_select;
        biases.gsl = setup.v_select;
        match setup.mode {
            PassMode::Wordline => biases.wl.fill(setup.v_pass),
            PassMode::PassGate => {
                biases.wl.fill(setup.v_unselected);
                biases.pg = setup.v_pass;
            }
        }
        let curve = sweep(setup.v_start, setup.v_stop, setup.n_points)
            .map(|v| {
                biases.wl[twl] = v;
                self.solve(&biases).map(|s| IvPoint { v_g: v, i_d: s.current })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = &self.cells[target].params;
        match extract_vth_constant_current(&curve, p.width, p.length) {
            Ok(vth) => Ok(ReadOutcome::Sensed { curve, vth }),
            Err(Error::ExtractionFailure { i_max, target, .. }) if i_max < target => Ok(ReadOutcome::UnderPass {
                curve,
                max_current: i_max,
                target_current: target,
            }),
            Err(e) => Err(e),
        }
    }

    /// Holds `biases` for `duration`, each cell stressed at its own
    /// channel-referenced bias.
    pub fn hold(&mut self, biases: &StringBiases, duration: f64) -> Result<()> {
        let sol = self.solve(biases)?;
        let local = self.local_biases(biases, &sol)?;
        for (cell, (f, b)) in self.cells.iter_mut().zip(local) {
            cell.apply_bias(f, b, duration)?;
        }
        Ok(())
    }

    fn sample(&self, t: f64, biases: StringBiases) -> Result<TraceSample> {
        let sol = self.solve(&biases)?;
        let local = self.local_biases(&biases, &sol)?;
        let efe = self
            .cells
            .iter()
            .zip(&local)
            .map(|(c, &(f, b))| c.electrostatics(f, b).map(|s| s.ferroelectric_field))
            .collect::<Result<Vec<_>>>()?;
        Ok(TraceSample {
            t,
            biases,
            current: sol.current,
            vth: self.cells.iter().map(|c| c.vth(Port::Front, 0.0)).collect(),
            nodes: sol.nodes,
            efe,
        })
    }

    /// Runs `waveform` quasi-statically. Each step solves the string at the
    /// step's mid-time biases and stresses every cell for the step.
    pub fn apply_waveform(
        &mut self,
        waveform: &BiasWaveform,
        options: &TransientOptions,
    ) -> Result<StringTrace> {
        waveform.validate()?;
        if let Some(w) = waveform.max_wl() {
            if w >= self.n_wordlines() {
                return Err(Error::InvalidWaveform(format!(
                    "waveform drives WL{w}, string has {} word lines",
                    self.n_wordlines()
                )));
            }
        }
        if !(options.sample_rate > 0.0 && options.sample_rate.is_finite()) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(h) = options.max_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid("max step must be positive"));
            }
        }
        let total = waveform.duration();
        let n_samples = (total * options.sample_rate).floor();
        if n_samples + 2.0 > MAX_TRACE_SAMPLES as f64 {
            return Err(Error::invalid(format!(
                "{n_samples} samples exceed the limit of {MAX_TRACE_SAMPLES}"
            )));
        }
        let sample_times: Vec<f64> = (0..=n_samples as usize)
            .map(|k| k as f64 / options.sample_rate)
            .chain(std::iter::once(total))
            .collect();
        let sample_times = merge_times(sample_times, total);
        let breakpoints = waveform.breakpoints();
        let mut grid = breakpoints.clone();
        grid.extend_from_slice(&sample_times);
        let grid = merge_times(grid, total);

        let nwl = self.n_wordlines();
        let mut trace = StringTrace::default();
        let mut next_sample = 0;
        let context = |t: f64, e: Error| {
            let segment = breakpoints.partition_point(|&b| b <= t).saturating_sub(1);
            Error::Transient {
                t,
                segment,
                source: Box::new(e),
            }
        };
        if sample_times.first() == Some(&0.0) {
            let s = self
                .sample(0.0, StringBiases::from_waveform(waveform, 0.0, nwl))
                .map_err(|e| context(0.0, e))?;
            trace.samples.push(s);
            next_sample = 1;
        }
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let pieces = options
                .max_step
                .map_or(1, |h| ((b - a) / h).ceil().max(1.0) as usize);
            for k in 0..pieces {
                let t0 = a + (b - a) * k as f64 / pieces as f64;
                let t1 = if k + 1 == pieces {
                    b
                } else {
                    a + (b - a) * (k + 1) as f64 / pieces as f64
                };
                let mid = 0.5 * (t0 + t1);
                let biases = StringBiases::from_waveform(waveform, mid, nwl);
                self.hold(&biases, t1 - t0).map_err(|e| context(mid, e))?;
            }
            // grid points absorb samples within the merge tolerance
            let eps = DURATION_TOLERANCE * total;
            let mut due = false;
            while next_sample < sample_times.len() && sample_times[next_sample] <= b + eps {
                next_sample += 1;
                due = true;
            }
            if due {
                let s = self
                    .sample(b, StringBiases::from_waveform(waveform, b, nwl))
                    .map_err(|e| context(b, e))?;
                trace.samples.push(s);
            }
        }
        Ok(trace)
    }

    fn disturb_biases(&self, victim: usize, v_pass: f64, mode: PassMode) -> StringBiases {
        let mut biases = StringBiases::zeros(self.n_wordlines());
        match mode {
            PassMode::Wordline => biases.wl[self.wordline_of(victim)] = v_pass,
            PassMode::PassGate => biases.pg = v_pass,
        }
        biases
    }

    /// Threshold shift of an HVT victim after each (`V_PASS`, dwell) stress,
    /// starting every point from this string's state. The victim's word
    /// line (wordline mode) or the pass gate carries `V_PASS`; BL, SL and
    /// the other gates are grounded.
    pub fn pass_disturb_experiment(
        &self,
        victim: usize,
        v_pass: &[f64],
        dwell: &[f64],
        mode: PassMode,
    ) -> Result<Vec<DisturbPoint>> {
        self.check_index(victim)?;
        let cell = &self.cells[victim];
        if cell.vth(Port::Front, 0.0) <= cell.params.vth0_front {
            return Err(Error::invalid(format!(
                "victim {victim} must start in the high-threshold state"
            )));
        }
        self.disturb_grid(victim, v_pass, dwell, mode)
    }

    /// [`StringConfig::pass_disturb_experiment`] for a victim in any state.
    pub fn disturb_grid(
        &self,
        victim: usize,
        v_pass: &[f64],
        dwell: &[f64],
        mode: PassMode,
    ) -> Result<Vec<DisturbPoint>> {
        self.check_index(victim)?;
        let before = self.cells[victim].vth(Port::Front, 0.0);
        let mut out = Vec::with_capacity(v_pass.len() * dwell.len());
        for &v in v_pass {
            for &t in dwell {
                let mut s = self.clone();
                s.hold(&self.disturb_biases(victim, v, mode), t)?;
                out.push(DisturbPoint {
                    v_pass: v,
                    dwell: t,
                    dvth: s.cells[victim].vth(Port::Front, 0.0) - before,
                });
            }
        }
        Ok(out)
    }

    /// Pass time after which the victim has lost half the memory window.
    pub fn victim_flip_time(
        &self,
        victim: usize,
        v_pass: f64,
        mode: PassMode,
        t_max: f64,
    ) -> Result<Option<f64>> {
        self.check_index(victim)?;
        let biases = self.disturb_biases(victim, v_pass, mode);
        let sol = self.solve(&biases)?;
        let (f, b) = self.local_biases(&biases, &sol)?[victim];
        self.cells[victim].time_to_flip_at(f, b, t_max)
    }

    /// Stack electrostatics of cell `index` at `biases`.
    pub fn field_report(&self, index: usize, biases: &StringBiases) -> Result<ElectrostaticsSolution> {
        self.check_index(index)?;
        let sol = self.solve(biases)?;
        let (f, b) = self.local_biases(biases, &sol)?[index];
        self.cells[index].electrostatics(f, b)
    }

    /// Sensing current of the string, A.
    pub fn sense_current(&self) -> f64 {
        VTH_CURRENT_PER_SQUARE * self.cells[0].params.aspect()
    }
}

/// Elements ordered from the source (lowest potential) end. Returns the
/// current and the node potentials from the source to `v_top`.
fn solve_chain(chain: &[Element], v_src: f64, v_top: f64) -> (f64, Vec<f64>) {
    let propagate = |i: f64, nodes: &mut Vec<f64>| -> Option<f64> {
        nodes.clear();
        let mut v = v_src;
        nodes.push(v);
        for e in chain {
            v = e.model.drain_for_current(e.overdrive, v, i)?;
            nodes.push(v);
        }
        Some(v)
    };
    let first = chain[0];
    let hi0 = first.model.saturation_current(first.overdrive, v_src);
    let mut scratch = Vec::with_capacity(chain.len() + 1);
    let (mut lo, mut hi) = (hi0.ln() - LOG_SPAN, hi0.ln());
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match propagate(mid.exp(), &mut scratch) {
            Some(v) if v <= v_top => lo = mid,
            _ => hi = mid,
        }
    }
    let mut current = lo.exp();
    let mut nodes = Vec::with_capacity(chain.len() + 1);
    if propagate(current, &mut nodes).is_none() {
        // lower end of the span; the string is off below any resolvable level
        current = 0.0;
        propagate(0.0, &mut nodes);
    }
    if let Some(last) = nodes.last_mut() {
        *last = v_top;
    }
    (current, nodes)
}
