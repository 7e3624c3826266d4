//! Compact FeFET cell: polarization-dependent thresholds on both ports,
//! a smooth I-V expression, self-consistent write/stress pulses and
//! constant-current threshold extraction.

use serde::{Deserialize, Serialize};

use crate::electrostatics::{
    softplus, solve_electrostatics, ChannelChargeModel, ElectrostaticsSolution, GateStack,
};
use crate::error::{Error, Result};
use crate::kinetics::{GrainEnsemble, MemoryState, SwitchingKinetics, DEFAULT_GRAINS};

/// Current criterion per unit W/L for threshold extraction, A.
pub const VTH_CURRENT_PER_SQUARE: f64 = 1e-7;

/// Smallest pulse substep, s.
pub const DT_MIN: f64 = 1e-15;

/// Allowed relative change of the ferroelectric field across one substep.
pub const FIELD_DRIFT_TOLERANCE: f64 = 0.01;

// fields below this are treated as this for the drift test, V/m
const FIELD_DRIFT_FLOOR: f64 = 1e5;

// relative resolution of reported crossing times
const CROSSING_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    /// Ferroelectric write gate.
    Front,
    /// Non-ferroelectric pass gate.
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// m
    pub width: f64,
    /// m
    pub length: f64,
    /// A/V² at W/L = 1.
    pub transconductance: f64,
    /// V/decade, front port.
    pub subthreshold_swing: f64,
    /// V
    pub vth0_front: f64,
    /// V
    pub vth0_back: f64,
    /// V per C/m².
    pub gamma_front: f64,
    /// V per C/m².
    pub gamma_back: f64,
    /// Front threshold shift per volt on the back port.
    pub interport_ratio: f64,
}

impl CellParams {
    /// Front-port memory window `memory_window` (V) between the saturated
    /// states, centred at `vth0_front`. Back-port quantities follow from
    /// the stack's interport ratio.
    pub fn for_stack(
        stack: &GateStack,
        saturation_polarization: f64,
        vth0_front: f64,
        memory_window: f64,
    ) -> Self {
        let r = stack.interport_ratio();
        let gamma_front = memory_window / (2.0 * saturation_polarization);
        CellParams {
            width: 100e-9,
            length: 100e-9,
            transconductance: 1.3e-4,
            subthreshold_swing: 0.09,
            vth0_front,
            vth0_back: vth0_front / r,
            gamma_front,
            gamma_back: gamma_front / r,
            interport_ratio: r,
        }
    }

    pub fn aspect(&self) -> f64 {
        self.width / self.length
    }

    pub fn validate(&self, thermal_voltage: f64) -> Result<()> {
        let all_finite = [
            self.vth0_front,
            self.vth0_back,
            self.gamma_front,
            self.gamma_back,
            self.interport_ratio,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !(self.width > 0.0 && self.length > 0.0 && self.transconductance > 0.0) {
            return Err(Error::invalid("W, L and k must be positive"));
        }
        if !(self.subthreshold_swing >= thermal_voltage * std::f64::consts::LN_10) {
            return Err(Error::invalid(format!(
                "subthreshold swing {} V/dec below the thermal limit",
                self.subthreshold_swing
            )));
        }
        if !(all_finite && self.interport_ratio > 0.0) {
            return Err(Error::invalid("threshold parameters must be finite, r > 0"));
        }
        Ok(())
    }
}

/// EKV-style forward-minus-reverse channel current,
/// `I = Is (qf² - qr²)`, `q = ln(1 + exp((Vov - m Vx) / (2 m Vt)))`.
///
/// `Vov` is the front-equivalent gate overdrive and `Vx` the source or
/// drain potential. Below threshold the current falls one decade per
/// `m Vt ln 10`; above, it grows quadratically in `Vov`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCurrent {
    specific_current: f64,
    slope: f64,
    thermal_voltage: f64,
}

impl ChannelCurrent {
    pub fn new(params: &CellParams, thermal_voltage: f64) -> Self {
        let slope = params.subthreshold_swing / (thermal_voltage * std::f64::consts::LN_10);
        ChannelCurrent {
            specific_current: 2.0
                * slope
                * params.transconductance
                * params.aspect()
                * thermal_voltage
                * thermal_voltage,
            slope,
            thermal_voltage,
        }
    }

    fn charge(&self, overdrive: f64, v: f64) -> f64 {
        softplus((overdrive - self.slope * v) / (2.0 * self.slope * self.thermal_voltage))
    }

    pub fn current(&self, overdrive: f64, v_source: f64, v_drain: f64) -> f64 {
        let qf = self.charge(overdrive, v_source);
        let qr = self.charge(overdrive, v_drain);
        self.specific_current * (qf * qf - qr * qr)
    }

    /// Saturation current for a source at `v_source`.
    pub fn saturation_current(&self, overdrive: f64, v_source: f64) -> f64 {
        let qf = self.charge(overdrive, v_source);
        self.specific_current * qf * qf
    }

    /// Drain potential at which the device carries `current` (>= 0) from
    /// `v_source`; `None` when `current` reaches the saturation current.
    pub fn drain_for_current(&self, overdrive: f64, v_source: f64, current: f64) -> Option<f64> {
        let qf = self.charge(overdrive, v_source);
        let qr2 = qf * qf - current / self.specific_current;
        if !(qr2 > 0.0) {
            return None;
        }
        let qr = qr2.sqrt();
        // inverse softplus
        let x = if qr > 35.0 { qr } else { qr.exp_m1().ln() };
        let v = (overdrive - 2.0 * self.slope * self.thermal_voltage * x) / self.slope;
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    pub v_g: f64,
    pub i_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvCurve {
    pub port: Port,
    pub points: Vec<IvPoint>,
}

/// Gate voltage where the curve first reaches `1e-7 * W/L` A, by linear
/// interpolation in `log10(I_D)`.
pub fn extract_vth_constant_current(curve: &[IvPoint], width: f64, length: f64) -> Result<f64> {
    let target = VTH_CURRENT_PER_SQUARE * width / length;
    let fail = || {
        let (mut i_min, mut i_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in curve {
            i_min = i_min.min(p.i_d);
            i_max = i_max.max(p.i_d);
        }
        Error::ExtractionFailure {
            target,
            v_min: curve.first().map_or(f64::NAN, |p| p.v_g),
            v_max: curve.last().map_or(f64::NAN, |p| p.v_g),
            i_min,
            i_max,
        }
    };
    if curve.len() < 2 {
        return Err(fail());
    }
    for w in curve.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.i_d < target && b.i_d >= target {
            if !(a.i_d > 0.0) {
                return Ok(b.v_g);
            }
            let (la, lb, lt) = (a.i_d.log10(), b.i_d.log10(), target.log10());
            return Ok(a.v_g + (b.v_g - a.v_g) * (lt - la) / (lb - la));
        }
    }
    Err(fail())
}

/// Device template: everything a cell needs apart from its grain draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub stack: GateStack,
    pub channel: ChannelChargeModel,
    pub kinetics: SwitchingKinetics,
    pub params: CellParams,
    pub grains: usize,
    /// Effective saturation polarization, C/m².
    pub saturation_polarization: f64,
}

/// Default front-port memory window, V.
pub const DEFAULT_MEMORY_WINDOW: f64 = 1.0;
/// Default mid-window front threshold, V.
pub const DEFAULT_VTH0_FRONT: f64 = 0.3;

/// Polarization whose full swing shifts the front threshold by
/// `memory_window` through the ferroelectric elastance, C/m².
pub fn matched_polarization(stack: &GateStack, memory_window: f64) -> f64 {
    let fe = stack.ferroelectric();
    memory_window * crate::electrostatics::EPS0 * fe.permittivity / (2.0 * fe.thickness)
}

impl DeviceModel {
    /// Saturation polarization chosen so that the compact window equals
    /// the window the stack electrostatics imply, `Ps = MW / (2 S_fe)`.
    pub fn from_stack(stack: GateStack) -> Self {
        let ps = matched_polarization(&stack, DEFAULT_MEMORY_WINDOW);
        let params = CellParams::for_stack(&stack, ps, DEFAULT_VTH0_FRONT, DEFAULT_MEMORY_WINDOW);
        DeviceModel {
            stack,
            channel: ChannelChargeModel::default(),
            kinetics: SwitchingKinetics::default(),
            params,
            grains: DEFAULT_GRAINS,
            saturation_polarization: ps,
        }
    }

    /// Planar single-port cell with the p-well as back gate.
    pub fn fdsoi() -> Self {
        DeviceModel::from_stack(GateStack::fdsoi())
    }

    /// Vertical dual-port cell with a dedicated pass gate.
    pub fn dual_port() -> Self {
        DeviceModel::from_stack(GateStack::vertical_dual_port())
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.kinetics.validate()?;
        self.params.validate(self.channel.thermal_voltage)?;
        if !(self.saturation_polarization > 0.0 && self.saturation_polarization.is_finite()) {
            return Err(Error::invalid("saturation polarization must be positive"));
        }
        if self.grains == 0 {
            return Err(Error::invalid("ensemble needs at least one grain"));
        }
        Ok(())
    }

    /// Fresh cell, every grain up (LVT side).
    pub fn cell(&self, seed: u64) -> Result<CellState> {
        self.validate()?;
        let ensemble = GrainEnsemble::sample(
            self.grains,
            &self.kinetics,
            self.saturation_polarization,
            seed,
        )?;
        Ok(CellState {
            ensemble,
            stack: self.stack.clone(),
            params: self.params,
            channel: self.channel,
            kinetics: self.kinetics,
        })
    }

    /// Full front-port window, V.
    pub fn memory_window(&self) -> f64 {
        2.0 * self.params.gamma_front * self.saturation_polarization
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub ensemble: GrainEnsemble,
    pub stack: GateStack,
    pub params: CellParams,
    pub channel: ChannelChargeModel,
    pub kinetics: SwitchingKinetics,
}

/// Outcome of a stress that watches for a threshold crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressOutcome {
    pub flips: usize,
    pub substeps: usize,
    /// Time at which the watch condition first held, s.
    pub crossed_at: Option<f64>,
}

impl CellState {
    pub fn polarization(&self) -> f64 {
        self.ensemble.net_polarization()
    }

    /// `VTH0_port - gamma_port P - r_port V_other`.
    pub fn vth(&self, port: Port, other_port_bias: f64) -> f64 {
        let p = self.polarization();
        let pr = &self.params;
        match port {
            Port::Front => {
                pr.vth0_front - pr.gamma_front * p - pr.interport_ratio * other_port_bias
            }
            Port::Back => {
                pr.vth0_back - pr.gamma_back * p - other_port_bias / pr.interport_ratio
            }
        }
    }

    /// Full front-port window of this cell, V.
    pub fn memory_window(&self) -> f64 {
        2.0 * self.params.gamma_front * self.ensemble.saturation_polarization()
    }

    /// Front-equivalent overdrive at absolute gate potentials.
    pub fn overdrive(&self, v_front: f64, v_back: f64) -> f64 {
        v_front - self.vth(Port::Front, v_back)
    }

    pub fn channel_current(&self) -> ChannelCurrent {
        ChannelCurrent::new(&self.params, self.channel.thermal_voltage)
    }

    /// Drain current with the source at 0 V.
    pub fn drain_current(&self, v_front: f64, v_back: f64, v_ds: f64) -> f64 {
        self.channel_current()
            .current(self.overdrive(v_front, v_back), 0.0, v_ds)
    }

    pub fn id_vg(
        &self,
        sweep_port: Port,
        v_start: f64,
        v_stop: f64,
        n_points: usize,
        v_ds: f64,
        other_port_bias: f64,
    ) -> Result<IvCurve> {
        if n_points < 2 {
            return Err(Error::invalid("sweep needs at least two points"));
        }
        if !(v_start.is_finite() && v_stop.is_finite() && v_ds.is_finite()) {
            return Err(Error::invalid("sweep bounds must be finite"));
        }
        let points = sweep(v_start, v_stop, n_points)
            .map(|v_g| {
                let (f, b) = match sweep_port {
                    Port::Front => (v_g, other_port_bias),
                    Port::Back => (other_port_bias, v_g),
                };
                IvPoint {
                    v_g,
                    i_d: self.drain_current(f, b, v_ds),
                }
            })
            .collect();
        Ok(IvCurve {
            port: sweep_port,
            points,
        })
    }

    /// Electrostatics at gate biases relative to the channel.
    pub fn electrostatics(&self, v_front: f64, v_back: f64) -> Result<ElectrostaticsSolution> {
        solve_electrostatics(&self.stack, v_front, v_back, self.polarization(), &self.channel)
    }

    fn field_at(&self, ensemble: &GrainEnsemble, v_front: f64, v_back: f64) -> Result<f64> {
        Ok(solve_electrostatics(
            &self.stack,
            v_front,
            v_back,
            ensemble.net_polarization(),
            &self.channel,
        )?
        .ferroelectric_field)
    }

    /// Holds gate biases (relative to the channel) for `duration`, letting
    /// the polarization respond self-consistently.
    pub fn apply_bias(&mut self, v_front: f64, v_back: f64, duration: f64) -> Result<StressOutcome> {
        self.stress_until(v_front, v_back, duration, |_| false)
    }

    /// Like [`CellState::apply_bias`], but stops as soon as `watch` holds
    /// and reports the crossing time to within 0.1 %.
    ///
    /// Each substep solves the field, evolves a trial ensemble, re-solves
    /// and halves the step while the field moves by more than 1 %. The
    /// accepted step evolves the original ensemble at the mean of the two
    /// fields.
    pub fn stress_until<F>(
        &mut self,
        v_front: f64,
        v_back: f64,
        duration: f64,
        mut watch: F,
    ) -> Result<StressOutcome>
    where
        F: FnMut(&CellState) -> bool,
    {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(Error::invalid(format!("stress duration {duration} s")));
        }
        let mut out = StressOutcome {
            flips: 0,
            substeps: 0,
            crossed_at: None,
        };
        if watch(self) {
            out.crossed_at = Some(0.0);
            return Ok(out);
        }
        let mut t = 0.0;
        let mut dt = duration;
        let mut e0 = self.field_at(&self.ensemble, v_front, v_back)?;
        while t < duration {
            let step = dt.min(duration - t);
            let mut trial = self.ensemble.clone();
            let n = trial.evolve(e0, step, &self.kinetics);
            let accepted = if n == 0 {
                trial
            } else {
                let e1 = self.field_at(&trial, v_front, v_back)?;
                let tol = FIELD_DRIFT_TOLERANCE * e0.abs().max(FIELD_DRIFT_FLOOR);
                if (e1 - e0).abs() > tol && step > DT_MIN {
                    dt = 0.5 * step;
                    continue;
                }
                let mut corrected = self.ensemble.clone();
                corrected.evolve(0.5 * (e0 + e1), step, &self.kinetics);
                corrected
            };
            let previous = std::mem::replace(&mut self.ensemble, accepted);
            if watch(self) {
                if step > CROSSING_RESOLUTION * (t + step) && step > DT_MIN {
                    self.ensemble = previous;
                    dt = 0.5 * step;
                    continue;
                }
                out.crossed_at = Some(t + step);
            }
            out.substeps += 1;
            out.flips += flip_count(&previous, &self.ensemble);
            t += step;
            if out.crossed_at.is_some() {
                break;
            }
            if n > 0 {
                e0 = self.field_at(&self.ensemble, v_front, v_back)?;
            }
            dt = 2.0 * step;
        }
        Ok(out)
    }

    /// Write pulse on the ferroelectric port, back port grounded.
    pub fn write_pulse(&mut self, amplitude: f64, duration: f64) -> Result<()> {
        self.apply_bias(amplitude, 0.0, duration).map(|_| ())
    }

    /// Drives the cell into `state` with a ±`amplitude` write pulse.
    pub fn write_state(&mut self, state: MemoryState, amplitude: f64, duration: f64) -> Result<()> {
        let a = amplitude.abs() * state.orientation().sign();
        self.write_pulse(a, duration)
    }

    /// Forces every grain into the saturated `state` without kinetics.
    pub fn set_state(&mut self, state: MemoryState) {
        self.ensemble.set_all(state.orientation());
    }

    /// Stress with `v_pass` on one port, the other grounded; returns the
    /// front-port threshold change at zero back bias.
    pub fn pass_stress(&mut self, port: Port, v_pass: f64, duration: f64) -> Result<f64> {
        let before = self.vth(Port::Front, 0.0);
        let (f, b) = match port {
            Port::Front => (v_pass, 0.0),
            Port::Back => (0.0, v_pass),
        };
        self.apply_bias(f, b, duration)?;
        Ok(self.vth(Port::Front, 0.0) - before)
    }

    /// First time the front threshold has dropped by half the memory
    /// window under `v_pass` on `port` (other port grounded), or `None`
    /// within `t_max`.
    pub fn time_to_flip(&self, port: Port, v_pass: f64, t_max: f64) -> Result<Option<f64>> {
        let (f, b) = match port {
            Port::Front => (v_pass, 0.0),
            Port::Back => (0.0, v_pass),
        };
        self.time_to_flip_at(f, b, t_max)
    }

    /// [`CellState::time_to_flip`] at arbitrary channel-referenced biases.
    pub fn time_to_flip_at(&self, v_front: f64, v_back: f64, t_max: f64) -> Result<Option<f64>> {
        let mut cell = self.clone();
        let target = self.vth(Port::Front, 0.0) - 0.5 * self.memory_window();
        let out = cell.stress_until(v_front, v_back, t_max, |c| c.vth(Port::Front, 0.0) <= target)?;
        Ok(out.crossed_at)
    }

    /// Partial write for multi-level storage; same path as a write pulse.
    pub fn program_mlc(&mut self, amplitude: f64, duration: f64) -> Result<()> {
        self.write_pulse(amplitude, duration)
    }

    /// Small-signal drain conductance `I_D / V_DS`, S.
    pub fn gds_readout(&self, v_g_read: f64, v_ds: f64) -> Result<f64> {
        if !(v_ds > 0.0 && v_ds <= 0.05) {
            return Err(Error::invalid(format!(
                "conductance readout needs 0 < V_DS <= 50 mV, got {v_ds} V"
            )));
        }
        Ok(self.drain_current(v_g_read, 0.0, v_ds) / v_ds)
    }
}

fn flip_count(a: &GrainEnsemble, b: &GrainEnsemble) -> usize {
    a.grains()
        .iter()
        .zip(b.grains())
        .map(|(x, y)| (y.flips() - x.flips()) as usize)
        .sum()
}

/// `n` evenly spaced points from `a` to `b`, endpoints exact.
pub(crate) fn sweep(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if i + 1 == n {
            b
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cell() -> CellState {
        DeviceModel::fdsoi().cell(3).unwrap()
    }

    #[test]
    fn vth_is_affine_in_polarization() {
        let mut c = cell();
        c.set_state(MemoryState::Lvt);
        let lvt = c.vth(Port::Front, 0.0);
        c.set_state(MemoryState::Hvt);
        let hvt = c.vth(Port::Front, 0.0);
        // P = 0 sits halfway between the saturated states
        assert_relative_eq!(0.5 * (lvt + hvt), c.params.vth0_front, epsilon = 1e-12);
        assert_relative_eq!(hvt - lvt, DEFAULT_MEMORY_WINDOW, epsilon = 1e-12);
        assert!(lvt < 0.0 && hvt > 0.0);
        let r = c.params.interport_ratio;
        assert_relative_eq!(c.vth(Port::Front, 1.5), hvt - 1.5 * r, epsilon = 1e-12);
    }

    #[test]
    fn back_window_scales_with_coupling() {
        let mut c = cell();
        c.set_state(MemoryState::Lvt);
        let (lf, lb) = (c.vth(Port::Front, 0.0), c.vth(Port::Back, 0.0));
        c.set_state(MemoryState::Hvt);
        let (hf, hb) = (c.vth(Port::Front, 0.0), c.vth(Port::Back, 0.0));
        let ratio = (hb - lb) / (hf - lf);
        assert_relative_eq!(ratio, c.params.gamma_back / c.params.gamma_front, epsilon = 1e-9);
        assert!(ratio > 1.0);
    }

    #[test]
    fn gamma_arithmetic() {
        let mut p = CellParams::for_stack(&GateStack::fdsoi(), 0.1, 0.6, 10.0);
        p.gamma_front = 5.0 / 0.1;
        // P = +10 µC/cm² = 0.1 C/m²
        let vth = p.vth0_front - p.gamma_front * 0.1;
        assert_relative_eq!(vth, -4.4, epsilon = 1e-12);
    }

    #[test]
    fn deep_off_and_monotone() {
        let c = cell();
        let vth = c.vth(Port::Front, 0.0);
        let i = c.drain_current(vth - 10.0 * c.params.subthreshold_swing, 0.0, 0.05);
        assert!(i < 1e-10 * c.params.aspect(), "{i}");
        let curve = c.id_vg(Port::Front, -2.0, 3.0, 201, 0.05, 0.0).unwrap();
        assert!(curve.points.windows(2).all(|w| w[1].i_d > w[0].i_d));
    }

    #[test]
    fn subthreshold_slope_matches_swing() {
        let c = cell();
        let vth = c.vth(Port::Front, 0.0);
        let ss = c.params.subthreshold_swing;
        let i1 = c.drain_current(vth - 8.0 * ss, 0.0, 0.05);
        let i2 = c.drain_current(vth - 7.0 * ss, 0.0, 0.05);
        assert_relative_eq!(i2 / i1, 10.0, max_relative = 1e-3);
    }

    #[test]
    fn back_bias_translates_curve() {
        let c = cell();
        let r = c.params.interport_ratio;
        let a = c.id_vg(Port::Front, -1.0, 2.0, 31, 0.05, 0.0).unwrap();
        let b = c.id_vg(Port::Front, -1.0 - r, 2.0 - r, 31, 0.05, 1.0).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_relative_eq!(p.i_d, q.i_d, max_relative = 1e-9);
        }
    }

    #[test]
    fn inverse_current_round_trip() {
        let c = cell().channel_current();
        for &(ov, vs, vd) in &[(0.5, 0.0, 0.05), (1.5, 0.2, 0.3), (-0.3, 0.0, 0.1), (2.0, 1.0, 1.01)] {
            let i = c.current(ov, vs, vd);
            let back = c.drain_for_current(ov, vs, i).unwrap();
            assert_relative_eq!(back, vd, epsilon = 1e-9);
        }
        let isat = c.saturation_current(1.0, 0.0);
        assert!(c.drain_for_current(1.0, 0.0, isat * (1.0 + 1e-9)).is_none());
    }

    fn synthetic(shift: f64) -> Vec<IvPoint> {
        // log-linear through 1e-7 A at 0.30 V, 100 mV/dec
        sweep(-0.5, 1.0, 16)
            .map(|v| IvPoint {
                v_g: v + shift,
                i_d: 1e-7 * 10f64.powf((v - 0.3) / 0.1),
            })
            .collect()
    }

    #[test]
    fn constant_current_extraction() {
        let v = extract_vth_constant_current(&synthetic(0.0), 1.0, 1.0).unwrap();
        assert!((v - 0.30).abs() < 1e-3, "{v}");
        let s = extract_vth_constant_current(&synthetic(0.2), 1.0, 1.0).unwrap();
        assert_relative_eq!(s - v, 0.2, epsilon = 1e-9);
        let off: Vec<IvPoint> = sweep(0.0, 1.0, 5).map(|v| IvPoint { v_g: v, i_d: 1e-12 }).collect();
        assert!(matches!(
            extract_vth_constant_current(&off, 1.0, 1.0),
            Err(Error::ExtractionFailure { .. })
        ));
    }

    #[test]
    fn extracted_matches_compact_threshold() {
        let c = cell();
        let curve = c.id_vg(Port::Front, -1.0, 2.0, 301, 0.05, 0.0).unwrap();
        let v = extract_vth_constant_current(&curve.points, c.params.width, c.params.length).unwrap();
        assert!((v - c.vth(Port::Front, 0.0)).abs() < 0.01, "{v}");
    }

    #[test]
    fn zero_amplitude_and_zero_duration_are_no_ops() {
        let mut c = cell();
        c.write_pulse(-4.0, 1e-6).unwrap();
        let before = c.clone();
        c.write_pulse(0.0, 1e-3).unwrap();
        // polarization unchanged at zero bias only if depolarization is weak
        assert_eq!(c.polarization(), before.polarization());
        let mut d = before.clone();
        assert_eq!(d.pass_stress(Port::Front, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(d, before);
    }

    #[test]
    fn write_sets_full_window() {
        let mut c = cell();
        c.write_pulse(-4.0, 1e-6).unwrap();
        assert!(c.ensemble.fraction(crate::kinetics::Orientation::Down) >= 0.95);
        let erased = c.vth(Port::Front, 0.0);
        c.write_pulse(4.0, 1e-6).unwrap();
        let drop = erased - c.vth(Port::Front, 0.0);
        assert!(drop >= 0.8 * c.memory_window(), "{drop}");
    }

    #[test]
    fn history_erased_at_saturation() {
        let mut direct = cell();
        direct.write_pulse(4.0, 1e-6).unwrap();
        let mut cycled = cell();
        cycled.write_pulse(-4.0, 1e-6).unwrap();
        cycled.write_pulse(4.0, 1e-6).unwrap();
        let (a, b) = (direct.vth(Port::Front, 0.0), cycled.vth(Port::Front, 0.0));
        assert!((a - b).abs() <= 0.05 * a.abs().max(cycled.memory_window()), "{a} {b}");
    }

    #[test]
    fn conductance_readout_is_repeatable() {
        let c = cell();
        let g0 = c.gds_readout(0.8, 0.05).unwrap();
        for _ in 0..100 {
            assert_eq!(c.gds_readout(0.8, 0.05).unwrap(), g0);
        }
        assert!(c.gds_readout(0.8, 0.2).is_err());
    }
}
