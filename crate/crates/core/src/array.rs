//! Page program with self-boosted inhibit, and the disturb it leaves behind.
//!
//! In single-port mode the unselected word lines of the selected string
//! carry `V_PASS` on the ferroelectric gate, while inhibited strings float
//! and are boosted by the word-line swing. In dual-port mode the pass bias
//! goes to the shared pass gate instead and unselected write gates stay at
//! 0 V. The pass-gate level is `V_PASS / r`, which gives the same channel
//! overdrive as `V_PASS` on the write gate.

use std::ops::Range;

use rand::SeedableRng;
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cell::{sweep, CellState, DeviceModel, Port};
use crate::error::{Error, Result};
use crate::kinetics::{substream_seed, MemoryState};

/// Write amplitude used to erase or fully program, V.
pub const WRITE_AMPLITUDE: f64 = 4.0;
/// Write pulse width, s.
pub const WRITE_DURATION: f64 = 1e-6;
/// Default disturb threshold for window reporting, V.
pub const DISTURB_THRESHOLD: f64 = 0.1;

// stream offset separating variability draws from grain draws
const VARIABILITY_DOMAIN: u64 = 0x5f3a_9d2c_71e4_b086;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InhibitScheme {
    /// Inhibit precharge level on the bit line, V.
    pub v_cc: f64,
    /// V
    pub v_pgm: f64,
    /// s
    pub pulse_duration: f64,
    /// Word-line-to-channel coupling ratio.
    pub coupling_ratio: f64,
    /// V
    pub vth_ssl: f64,
    pub n_wls: usize,
}

impl Default for InhibitScheme {
    fn default() -> Self {
        InhibitScheme {
            v_cc: 1.0,
            v_pgm: 3.5,
            pulse_duration: 10e-6,
            coupling_ratio: 0.8,
            vth_ssl: 0.5,
            n_wls: 8,
        }
    }
}

impl InhibitScheme {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_pgm > self.v_cc && self.v_cc > 0.0 && self.v_pgm.is_finite()) {
            return Err(Error::invalid("need V_PGM > V_CC > 0"));
        }
        if !(self.coupling_ratio > 0.0 && self.coupling_ratio <= 1.0) {
            return Err(Error::invalid("coupling ratio must lie in (0, 1]"));
        }
        if !(self.pulse_duration > 0.0 && self.pulse_duration.is_finite()) {
            return Err(Error::invalid("pulse duration must be positive"));
        }
        if self.n_wls == 0 || !self.vth_ssl.is_finite() {
            return Err(Error::invalid("need at least one word line and a finite SSL threshold"));
        }
        Ok(())
    }
}

/// `max(0, V_CC - VTH_SSL) + r_c ((n - 1) V_PASS + V_PGM) / n`.
pub fn boosted_channel_potential(scheme: &InhibitScheme, v_pass: f64) -> f64 {
    let n = scheme.n_wls as f64;
    let precharge = (scheme.v_cc - scheme.vth_ssl).max(0.0);
    precharge + scheme.coupling_ratio * ((n - 1.0) * v_pass + scheme.v_pgm) / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PortMode {
    Single,
    Dual,
}

/// Worst threshold shift per cell class after one page program. Each
/// entry is the signed shift with the largest magnitude in its class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbReport {
    pub programmed: f64,
    /// Selected string, unselected word lines.
    pub pass_disturbed: f64,
    /// Inhibited strings, selected word line.
    pub program_disturbed: f64,
    /// Inhibited strings, unselected word lines.
    pub boosted_idle: f64,
    /// Inhibited channel potential, V.
    pub boosted_potential: f64,
    /// Largest `|dP| / Ps` in the pass-disturbed class.
    pub pass_polarization_change: f64,
}

/// Block of NAND strings, `cells[string][wl]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellArray {
    pub device: DeviceModel,
    pub cells: Vec<Vec<CellState>>,
}

impl CellArray {
    /// Every cell erased with a `-4 V`, 1 µs pulse.
    pub fn erased(device: &DeviceModel, n_strings: usize, n_wls: usize, seed: u64) -> Result<Self> {
        if n_strings == 0 || n_wls == 0 {
            return Err(Error::invalid("array needs at least one string and one word line"));
        }
        let mut cells = Vec::with_capacity(n_strings);
        for s in 0..n_strings {
            let mut row = Vec::with_capacity(n_wls);
            for w in 0..n_wls {
                let mut c = device.cell(substream_seed(seed, (s * n_wls + w) as u64))?;
                c.write_state(MemoryState::Hvt, WRITE_AMPLITUDE, WRITE_DURATION)?;
                row.push(c);
            }
            cells.push(row);
        }
        Ok(CellArray {
            device: device.clone(),
            cells,
        })
    }

    pub fn n_strings(&self) -> usize {
        self.cells.len()
    }

    pub fn n_wls(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    /// Programs `selected_wl` on every string whose bit is `true`; the
    /// others are inhibited.
    pub fn program_page(
        &mut self,
        selected_wl: usize,
        bit_pattern: &[bool],
        scheme: &InhibitScheme,
        v_pass: f64,
        mode: PortMode,
    ) -> Result<DisturbReport> {
        scheme.validate()?;
        if selected_wl >= self.n_wls() {
            return Err(Error::IndexOutOfRange {
                index: selected_wl,
                len: self.n_wls(),
            });
        }
        if bit_pattern.len() != self.n_strings() {
            return Err(Error::invalid(format!(
                "bit pattern has {} entries for {} strings",
                bit_pattern.len(),
                self.n_strings()
            )));
        }
        if !v_pass.is_finite() {
            return Err(Error::invalid("V_PASS must be finite"));
        }
        let r = self.device.params.interport_ratio;
        let t = scheme.pulse_duration;
        let v_pg = match mode {
            PortMode::Single => 0.0,
            PortMode::Dual => v_pass / r,
        };
        let swing = match mode {
            PortMode::Single => v_pass,
            PortMode::Dual => v_pg,
        };
        let vb = boosted_channel_potential(scheme, swing);

        let mut report = DisturbReport {
            programmed: 0.0,
            pass_disturbed: 0.0,
            program_disturbed: 0.0,
            boosted_idle: 0.0,
            boosted_potential: vb,
            pass_polarization_change: 0.0,
        };
        let worst = |slot: &mut f64, d: f64| {
            if d.abs() > slot.abs() {
                *slot = d;
            }
        };
        for (string, &program) in self.cells.iter_mut().zip(bit_pattern) {
            for (w, cell) in string.iter_mut().enumerate() {
                let selected = w == selected_wl;
                // channel-referenced (front, back) bias
                let (f, b) = match (mode, program, selected) {
                    (PortMode::Single, true, true) => (scheme.v_pgm, 0.0),
                    (PortMode::Single, true, false) => (v_pass, 0.0),
                    (PortMode::Single, false, true) => (scheme.v_pgm - vb, 0.0),
                    (PortMode::Single, false, false) => (v_pass - vb, 0.0),
                    (PortMode::Dual, true, true) => (scheme.v_pgm, v_pg),
                    (PortMode::Dual, true, false) => (0.0, v_pg),
                    (PortMode::Dual, false, true) => (scheme.v_pgm - vb, v_pg - vb),
                    (PortMode::Dual, false, false) => (-vb, v_pg - vb),
                };
                let vth0 = cell.vth(Port::Front, 0.0);
                let p0 = cell.polarization();
                cell.apply_bias(f, b, t)?;
                let d = cell.vth(Port::Front, 0.0) - vth0;
                match (program, selected) {
                    (true, true) => worst(&mut report.programmed, d),
                    (true, false) => {
                        worst(&mut report.pass_disturbed, d);
                        let dp = (cell.polarization() - p0).abs()
                            / cell.ensemble.saturation_polarization();
                        report.pass_polarization_change = report.pass_polarization_change.max(dp);
                    }
                    (false, true) => worst(&mut report.program_disturbed, d),
                    (false, false) => worst(&mut report.boosted_idle, d),
                }
            }
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub v_pass: f64,
    /// Worst |dVTH| of the pass-disturbed class, V.
    pub dvth_pass: f64,
    /// Worst |dVTH| of the program-disturbed class, V.
    pub dvth_prog: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffSweep {
    pub points: Vec<TradeoffPoint>,
    pub threshold: f64,
    /// Lowest and highest swept `V_PASS` with both disturbs below the
    /// threshold; `None` when no point qualifies.
    pub window: Option<(f64, f64)>,
}

impl TradeoffSweep {
    pub fn window_width(&self) -> f64 {
        self.window.map_or(0.0, |(lo, hi)| hi - lo)
    }

    /// Report with keys `v_pass`, `dvth_pass_v`, `dvth_prog_v`,
    /// `window_lo_v`, `window_hi_v` (null for an empty window).
    pub fn to_json(&self) -> serde_json::Value {
        let (lo, hi) = self.window.unzip();
        serde_json::json!({
            "v_pass": self.points.iter().map(|p| p.v_pass).collect::<Vec<_>>(),
            "dvth_pass_v": self.points.iter().map(|p| p.dvth_pass).collect::<Vec<_>>(),
            "dvth_prog_v": self.points.iter().map(|p| p.dvth_prog).collect::<Vec<_>>(),
            "window_lo_v": lo,
            "window_hi_v": hi,
        })
    }
}

/// Alternating program/inhibit pattern, first string programmed.
pub fn checkerboard(n_strings: usize) -> Vec<bool> {
    (0..n_strings).map(|i| i % 2 == 0).collect()
}

/// Programs the same page from a fresh copy of `array` at each `V_PASS`.
pub fn disturb_tradeoff_sweep(
    array: &CellArray,
    scheme: &InhibitScheme,
    v_pass_range: (f64, f64),
    n_points: usize,
    mode: PortMode,
    threshold: f64,
) -> Result<TradeoffSweep> {
    let (v0, v1) = v_pass_range;
    if !(v0 > 0.0 && v1 > v0 && v1.is_finite()) {
        return Err(Error::invalid("V_PASS range must be positive and increasing"));
    }
    if n_points < 2 {
        return Err(Error::invalid("sweep needs at least two points"));
    }
    let selected = array.n_wls() / 2;
    let pattern = checkerboard(array.n_strings());
    let points = sweep(v0, v1, n_points)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|v| {
            let mut a = array.clone();
            let r = a.program_page(selected, &pattern, scheme, v, mode)?;
            Ok(TradeoffPoint {
                v_pass: v,
                dvth_pass: r.pass_disturbed.abs(),
                dvth_prog: r.program_disturbed.abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ok: Vec<f64> = points
        .iter()
        .filter(|p| p.dvth_pass < threshold && p.dvth_prog < threshold)
        .map(|p| p.v_pass)
        .collect();
    let window = match (ok.first(), ok.last()) {
        (Some(&lo), Some(&hi)) => Some((lo, hi)),
        _ => None,
    };
    Ok(TradeoffSweep {
        points,
        threshold,
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Variability {
    /// Std. dev. of the mid-window threshold, V.
    pub sigma_vth0: f64,
    /// Log-normal spread of the activation-field median.
    pub sigma_ea_median: f64,
}

/// Stress applied to every cell of a distribution run: the pass-disturbed
/// class of a page program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbProtocol {
    pub mode: PortMode,
    pub v_pass: f64,
    pub duration: f64,
    pub initial: MemoryState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VthSample {
    pub index: usize,
    pub pre: f64,
    pub post: f64,
}

/// Cells `range` of a Monte Carlo run. Cell `i` draws its variability from
/// `(seed, i)`; all cells share one grain draw, so zero variability gives
/// identical cells.
pub fn vth_samples(
    device: &DeviceModel,
    range: Range<usize>,
    variability: &Variability,
    protocol: &DisturbProtocol,
    seed: u64,
) -> Result<Vec<VthSample>> {
    if !(variability.sigma_vth0 >= 0.0 && variability.sigma_ea_median >= 0.0) {
        return Err(Error::invalid("variability sigmas must be non-negative"));
    }
    let base = device.cell(seed)?;
    let r = device.params.interport_ratio;
    range
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed ^ VARIABILITY_DOMAIN, i as u64));
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let mut cell = base.clone();
            cell.params.vth0_front += variability.sigma_vth0 * z1;
            cell.params.vth0_back = cell.params.vth0_front / r;
            cell.ensemble.scale_activation((variability.sigma_ea_median * z2).exp());
            cell.write_state(protocol.initial, WRITE_AMPLITUDE, WRITE_DURATION)?;
            let pre = cell.vth(Port::Front, 0.0);
            match protocol.mode {
                PortMode::Single => cell.pass_stress(Port::Front, protocol.v_pass, protocol.duration)?,
                PortMode::Dual => cell.pass_stress(Port::Back, protocol.v_pass / r, protocol.duration)?,
            };
            Ok(VthSample {
                index: i,
                pre,
                post: cell.vth(Port::Front, 0.0),
            })
        })
        .collect()
}

/// Sorted pre- and post-stress thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VthDistribution {
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

impl VthDistribution {
    pub fn from_samples(samples: &[VthSample]) -> Self {
        let mut pre: Vec<f64> = samples.iter().map(|s| s.pre).collect();
        let mut post: Vec<f64> = samples.iter().map(|s| s.post).collect();
        pre.sort_by(f64::total_cmp);
        post.sort_by(f64::total_cmp);
        VthDistribution { pre, post }
    }

    pub fn len(&self) -> usize {
        self.pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty()
    }

    /// Largest post-minus-pre difference at equal quantile, V.
    pub fn max_quantile_shift(&self) -> f64 {
        self.pre
            .iter()
            .zip(&self.post)
            .map(|(a, b)| (b - a).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `quantile, vth_pre_v, vth_post_v`.
    pub fn to_csv(&self) -> String {
        let n = self.len() as f64;
        let mut out = String::from("quantile,vth_pre_v,vth_post_v\n");
        for (i, (a, b)) in self.pre.iter().zip(&self.post).enumerate() {
            out.push_str(&format!("{:e},{a:e},{b:e}\n", (i as f64 + 0.5) / n));
        }
        out
    }
}

pub fn vth_distribution(
    device: &DeviceModel,
    n_cells: usize,
    variability: &Variability,
    protocol: &DisturbProtocol,
    seed: u64,
) -> Result<VthDistribution> {
    if n_cells == 0 {
        return Err(Error::invalid("distribution needs at least one cell"));
    }
    let samples = vth_samples(device, 0..n_cells, variability, protocol, seed)?;
    Ok(VthDistribution::from_samples(&samples))
}
