//! One-dimensional electrostatics of a double-gated ferroelectric stack.
//!
//! Layers run from the write-gate metal (front) through the insulators, the
//! channel and the back insulators to the pass-gate metal. The positive field
//! direction points from the write gate toward the pass gate, and positive
//! polarization points toward the channel.
//!
//! The channel is a single equipotential sheet at potential `psi` sitting in
//! the middle of the channel layer; each half of the channel layer acts as a
//! dielectric in series with its side. For a trial `psi` the two voltage
//! loops fix the displacement on each side,
//!
//! ```text
//! V_WG - Vfb_f - psi = D_f * S_f - P * t_fe / (eps0 * eps_fe)
//! psi - (V_PG - Vfb_b) = D_b * S_b
//! ```
//!
//! with `S = sum(t_i / (eps0 * eps_i))`, and Gauss's law at the sheet,
//! `D_b - D_f = Q(psi) + Q_fixed`, is solved for `psi` by bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::MemoryState;

/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Bracket expansion limit for the channel potential, V.
pub const PSI_LIMIT: f64 = 100.0;
/// Bisection tolerance on the channel potential, V.
pub const PSI_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerRole {
    Metal,
    Ferroelectric,
    Dielectric,
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub role: LayerRole,
    /// m
    pub thickness: f64,
    /// Relative permittivity; ignored for metals.
    pub permittivity: f64,
}

impl Layer {
    pub fn metal() -> Self {
        Layer {
            role: LayerRole::Metal,
            thickness: 0.0,
            permittivity: 1.0,
        }
    }

    pub fn ferroelectric(thickness: f64, permittivity: f64) -> Self {
        Layer {
            role: LayerRole::Ferroelectric,
            thickness,
            permittivity,
        }
    }

    pub fn dielectric(thickness: f64, permittivity: f64) -> Self {
        Layer {
            role: LayerRole::Dielectric,
            thickness,
            permittivity,
        }
    }

    pub fn channel(thickness: f64, permittivity: f64) -> Self {
        Layer {
            role: LayerRole::Channel,
            thickness,
            permittivity,
        }
    }

    /// Series elastance `t / (eps0 eps_r)`, m²/F.
    fn elastance(&self) -> f64 {
        self.thickness / (EPS0 * self.permittivity)
    }
}

/// Which gate carries a bias in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PassTerminal {
    /// Ferroelectric (front) gate: single-port pass.
    WriteGate,
    /// Non-ferroelectric (back) gate: dual-port pass.
    PassGate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateStack {
    layers: Vec<Layer>,
    flatband_front: f64,
    flatband_back: f64,
    #[serde(skip)]
    ferroelectric: usize,
    #[serde(skip)]
    channel: usize,
}

impl GateStack {
    /// Validates ordering: metal, front insulators with exactly one
    /// ferroelectric, channel, back insulators, metal.
    pub fn new(layers: Vec<Layer>, flatband_front: f64, flatband_back: f64) -> Result<Self> {
        let n = layers.len();
        if n < 4 {
            return Err(Error::InvalidStack(format!(
                "need at least metal/ferroelectric/channel/metal, got {n} layers"
            )));
        }
        if layers[0].role != LayerRole::Metal || layers[n - 1].role != LayerRole::Metal {
            return Err(Error::InvalidStack("stack must start and end with a metal".into()));
        }
        if !(flatband_front.is_finite() && flatband_back.is_finite()) {
            return Err(Error::InvalidStack("flatband voltages must be finite".into()));
        }
        let mut ferroelectric = None;
        let mut channel = None;
        for (i, layer) in layers.iter().enumerate().take(n - 1).skip(1) {
            match layer.role {
                LayerRole::Metal => {
                    return Err(Error::InvalidStack(format!(
                        "layer {i}: metal allowed only at the two ends"
                    )))
                }
                LayerRole::Ferroelectric if ferroelectric.is_some() => {
                    return Err(Error::InvalidStack("more than one ferroelectric layer".into()))
                }
                LayerRole::Ferroelectric => ferroelectric = Some(i),
                LayerRole::Channel if channel.is_some() => {
                    return Err(Error::InvalidStack("more than one channel layer".into()))
                }
                LayerRole::Channel => channel = Some(i),
                LayerRole::Dielectric => {}
            }
            if !(layer.thickness > 0.0 && layer.thickness.is_finite()) {
                return Err(Error::InvalidStack(format!(
                    "layer {i}: thickness must be positive, got {}",
                    layer.thickness
                )));
            }
            if !(layer.permittivity >= 1.0 && layer.permittivity.is_finite()) {
                return Err(Error::InvalidStack(format!(
                    "layer {i}: relative permittivity must be >= 1, got {}",
                    layer.permittivity
                )));
            }
        }
        let ferroelectric =
            ferroelectric.ok_or_else(|| Error::InvalidStack("no ferroelectric layer".into()))?;
        let channel = channel.ok_or_else(|| Error::InvalidStack("no channel layer".into()))?;
        if ferroelectric > channel {
            return Err(Error::InvalidStack(
                "ferroelectric must sit between the write gate and the channel".into(),
            ));
        }
        Ok(GateStack {
            layers,
            flatband_front,
            flatband_back,
            ferroelectric,
            channel,
        })
    }

    /// FDSOI single-cell stack: 10 nm ferroelectric, 1 nm interfacial oxide,
    /// 7 nm silicon body, 20 nm buried oxide over the p-well pass gate.
    pub fn fdsoi() -> Self {
        GateStack::new(
            vec![
                Layer::metal(),
                Layer::ferroelectric(10e-9, 30.0),
                Layer::dielectric(1e-9, 3.9),
                Layer::channel(7e-9, 11.7),
                Layer::dielectric(20e-9, 3.9),
                Layer::metal(),
            ],
            0.0,
            0.0,
        )
        .expect("default stack is valid")
    }

    /// Vertical dual-port cell flattened to planar thicknesses: same front as
    /// [`GateStack::fdsoi`], 8 nm core dielectric to the central pass gate.
    pub fn vertical_dual_port() -> Self {
        GateStack::new(
            vec![
                Layer::metal(),
                Layer::ferroelectric(10e-9, 30.0),
                Layer::dielectric(1e-9, 3.9),
                Layer::channel(7e-9, 11.7),
                Layer::dielectric(8e-9, 3.9),
                Layer::metal(),
            ],
            0.0,
            0.0,
        )
        .expect("default stack is valid")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn flatband_front(&self) -> f64 {
        self.flatband_front
    }

    pub fn flatband_back(&self) -> f64 {
        self.flatband_back
    }

    pub fn ferroelectric_index(&self) -> usize {
        self.ferroelectric
    }

    pub fn channel_index(&self) -> usize {
        self.channel
    }

    pub fn ferroelectric(&self) -> &Layer {
        &self.layers[self.ferroelectric]
    }

    fn channel_half_elastance(&self) -> f64 {
        0.5 * self.layers[self.channel].elastance()
    }

    /// Front-side elastance incl. half the channel, m²/F.
    pub fn front_elastance(&self) -> f64 {
        self.layers[1..self.channel]
            .iter()
            .map(Layer::elastance)
            .sum::<f64>()
            + self.channel_half_elastance()
    }

    /// Back-side elastance incl. half the channel, m²/F.
    pub fn back_elastance(&self) -> f64 {
        self.layers[self.channel + 1..self.layers.len() - 1]
            .iter()
            .map(Layer::elastance)
            .sum::<f64>()
            + self.channel_half_elastance()
    }

    /// Front-gate threshold shift per volt on the back gate, `C_back / C_front`.
    pub fn interport_ratio(&self) -> f64 {
        self.front_elastance() / self.back_elastance()
    }

    /// Rebuilds the cached indices after deserialization.
    pub fn revalidated(self) -> Result<Self> {
        GateStack::new(self.layers, self.flatband_front, self.flatband_back)
    }
}

/// Channel sheet charge as a function of its potential.
pub trait ChannelCharge {
    /// Total sheet charge (mobile plus fixed), C/m².
    fn sheet_charge(&self, psi: f64) -> f64;
}

/// No mobile or fixed charge: the channel is a floating, charge-neutral
/// plane. Used for analytic checks and as the deep-depletion reference.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoChannelCharge;

impl ChannelCharge for NoChannelCharge {
    fn sheet_charge(&self, _psi: f64) -> f64 {
        0.0
    }
}

/// Smooth turn-on sheet charge,
/// `Q = -Cq Vt ln(1 + exp((psi - psi_on) / Vt))`, plus an optional mirrored
/// hole branch below `hole_onset` and a fixed sheet charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelChargeModel {
    /// V
    pub thermal_voltage: f64,
    /// Electron turn-on potential, V.
    pub turn_on_potential: f64,
    /// F/m²
    pub sheet_capacitance: f64,
    /// C/m²
    pub fixed_sheet_charge: f64,
    /// Hole accumulation onset, V. `None` disables the hole branch.
    pub hole_onset: Option<f64>,
}

impl Default for ChannelChargeModel {
    fn default() -> Self {
        ChannelChargeModel {
            thermal_voltage: 0.025_852,
            turn_on_potential: 0.25,
            sheet_capacitance: 0.3,
            fixed_sheet_charge: 0.0,
            hole_onset: Some(-0.25),
        }
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

impl ChannelChargeModel {
    pub fn validate(&self) -> Result<()> {
        let finite = self.turn_on_potential.is_finite()
            && self.fixed_sheet_charge.is_finite()
            && self.hole_onset.is_none_or(f64::is_finite);
        if !(self.thermal_voltage > 0.0 && self.sheet_capacitance > 0.0 && finite) {
            return Err(Error::invalid(format!("invalid channel model {self:?}")));
        }
        if self.hole_onset.is_some_and(|h| h >= self.turn_on_potential) {
            return Err(Error::invalid("hole onset must lie below the electron turn-on"));
        }
        Ok(())
    }

    /// Electron sheet charge (<= 0).
    pub fn electron_charge(&self, psi: f64) -> f64 {
        let vt = self.thermal_voltage;
        -self.sheet_capacitance * vt * softplus((psi - self.turn_on_potential) / vt)
    }

    /// Hole sheet charge (>= 0); zero when the hole branch is disabled.
    pub fn hole_charge(&self, psi: f64) -> f64 {
        let vt = self.thermal_voltage;
        self.hole_onset
            .map_or(0.0, |h| self.sheet_capacitance * vt * softplus((h - psi) / vt))
    }

    /// Mobile charge magnitude marking a strongly conducting channel.
    pub fn strong_on_charge(&self) -> f64 {
        10.0 * self.sheet_capacitance * self.thermal_voltage
    }

    /// Channel potential above which the electron branch's differential
    /// capacitance is within 5 % of `sheet_capacitance`: the channel is on
    /// and further gate charge is taken up by electrons.
    pub fn on_potential(&self) -> f64 {
        self.turn_on_potential + self.thermal_voltage * 19f64.ln()
    }
}

impl ChannelCharge for ChannelChargeModel {
    fn sheet_charge(&self, psi: f64) -> f64 {
        self.electron_charge(psi) + self.hole_charge(psi) + self.fixed_sheet_charge
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrostaticsSolution {
    /// Field per layer, V/m, aligned with the stack's layers. `None` for
    /// metals and for the channel (whose halves carry `D_f` and `D_b`).
    pub fields: Vec<Option<f64>>,
    /// Field in the ferroelectric, V/m.
    pub ferroelectric_field: f64,
    /// Channel sheet potential, V.
    pub psi_channel: f64,
    /// Total channel sheet charge, C/m².
    pub channel_charge: f64,
    /// Displacement on the write-gate side, C/m².
    pub displacement_front: f64,
    /// Displacement on the pass-gate side, C/m².
    pub displacement_back: f64,
    /// Largest loop / charge-balance mismatch, V.
    pub residual: f64,
}

impl ElectrostaticsSolution {
    pub fn field(&self, layer: usize) -> Option<f64> {
        self.fields.get(layer).copied().flatten()
    }
}

struct Loops {
    front_drive: f64,
    back_drive: f64,
    s_front: f64,
    s_back: f64,
}

impl Loops {
    fn new(stack: &GateStack, v_wg: f64, v_pg: f64, p: f64) -> Self {
        let fe = stack.ferroelectric();
        Loops {
            front_drive: v_wg - stack.flatband_front + p * fe.elastance(),
            back_drive: v_pg - stack.flatband_back,
            s_front: stack.front_elastance(),
            s_back: stack.back_elastance(),
        }
    }

    fn d_front(&self, psi: f64) -> f64 {
        (self.front_drive - psi) / self.s_front
    }

    fn d_back(&self, psi: f64) -> f64 {
        (psi - self.back_drive) / self.s_back
    }
}

/// Solves the stack at gate biases `v_wg`, `v_pg` (referenced to the
/// channel carriers' quasi-Fermi level) and polarization `p` (C/m²).
pub fn solve_electrostatics<C: ChannelCharge + ?Sized>(
    stack: &GateStack,
    v_wg: f64,
    v_pg: f64,
    p: f64,
    channel: &C,
) -> Result<ElectrostaticsSolution> {
    if !(v_wg.is_finite() && v_pg.is_finite() && p.is_finite()) {
        return Err(Error::invalid("non-finite bias or polarization"));
    }
    let loops = Loops::new(stack, v_wg, v_pg, p);
    // increasing in psi: d_back rises, d_front falls, Q falls
    let balance =
        |psi: f64| loops.d_back(psi) - loops.d_front(psi) - channel.sheet_charge(psi);

    let (mut lo, mut hi) = (-1.0, 1.0);
    while balance(lo) > 0.0 {
        if lo <= -PSI_LIMIT {
            return Err(Error::SolverFailure {
                lo,
                hi,
                context: format!("V_WG={v_wg} V, V_PG={v_pg} V, P={p} C/m^2"),
            });
        }
        hi = lo;
        lo = (2.0 * lo).max(-PSI_LIMIT);
    }
    while balance(hi) < 0.0 {
        if hi >= PSI_LIMIT {
            return Err(Error::SolverFailure {
                lo,
                hi,
                context: format!("V_WG={v_wg} V, V_PG={v_pg} V, P={p} C/m^2"),
            });
        }
        lo = hi;
        hi = (2.0 * hi).min(PSI_LIMIT);
    }
    for _ in 0..200 {
        if hi - lo <= PSI_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if balance(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let psi = 0.5 * (lo + hi);
    Ok(assemble(stack, &loops, psi, p, channel.sheet_charge(psi)))
}

fn assemble(stack: &GateStack, loops: &Loops, psi: f64, p: f64, q: f64) -> ElectrostaticsSolution {
    let d_front = loops.d_front(psi);
    let d_back = loops.d_back(psi);
    let n = stack.layers.len();
    let mut fields = vec![None; n];
    let mut front_drop = 0.0;
    let mut back_drop = 0.0;
    let mut fe_field = 0.0;
    for (i, layer) in stack.layers.iter().enumerate() {
        match layer.role {
            LayerRole::Metal | LayerRole::Channel => {}
            LayerRole::Ferroelectric => {
                let e = (d_front - p) / (EPS0 * layer.permittivity);
                fields[i] = Some(e);
                front_drop += e * layer.thickness;
                fe_field = e;
            }
            LayerRole::Dielectric => {
                let d = if i < stack.channel { d_front } else { d_back };
                let e = d / (EPS0 * layer.permittivity);
                fields[i] = Some(e);
                if i < stack.channel {
                    front_drop += e * layer.thickness;
                } else {
                    back_drop += e * layer.thickness;
                }
            }
        }
    }
    let half = stack.channel_half_elastance();
    front_drop += d_front * half;
    back_drop += d_back * half;

    let v_front = loops.front_drive - p * stack.ferroelectric().elastance();
    let front_loop = v_front - psi - front_drop;
    let back_loop = psi - loops.back_drive - back_drop;
    let charge = (d_back - d_front - q) / (1.0 / loops.s_front + 1.0 / loops.s_back);
    let residual = front_loop.abs().max(back_loop.abs()).max(charge.abs());

    ElectrostaticsSolution {
        fields,
        ferroelectric_field: fe_field,
        psi_channel: psi,
        channel_charge: q,
        displacement_front: d_front,
        displacement_back: d_back,
        residual,
    }
}

/// Ferroelectric field with both gates grounded.
pub fn depolarization_field<C: ChannelCharge + ?Sized>(
    stack: &GateStack,
    p: f64,
    channel: &C,
) -> Result<f64> {
    Ok(solve_electrostatics(stack, 0.0, 0.0, p, channel)?.ferroelectric_field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub v_pass: f64,
    pub e_fe: f64,
}

/// Ferroelectric field versus pass voltage on one terminal (other grounded)
/// at frozen polarization `±remanent` for HVT/LVT.
pub fn efe_vs_vpass_curve<C: ChannelCharge + ?Sized>(
    stack: &GateStack,
    channel: &C,
    remanent: f64,
    state: MemoryState,
    terminal: PassTerminal,
    v_range: (f64, f64),
    n_points: usize,
) -> Result<Vec<FieldPoint>> {
    let (v0, v1) = v_range;
    if !(v0.is_finite() && v1.is_finite()) {
        return Err(Error::invalid("sweep range must be finite"));
    }
    if n_points < 2 {
        return Err(Error::invalid("sweep needs at least two points"));
    }
    let p = state.orientation().sign() * remanent.abs();
    (0..n_points)
        .map(|i| {
            let v = if i + 1 == n_points {
                v1
            } else {
                v0 + (v1 - v0) * i as f64 / (n_points - 1) as f64
            };
            let (wg, pg) = match terminal {
                PassTerminal::WriteGate => (v, 0.0),
                PassTerminal::PassGate => (0.0, v),
            };
            let sol = solve_electrostatics(stack, wg, pg, p, channel)?;
            Ok(FieldPoint {
                v_pass: v,
                e_fe: sol.ferroelectric_field,
            })
        })
        .collect()
}

/// Step used for numerical pass-gate derivatives, V.
pub const SCREENING_STEP: f64 = 0.01;

/// `dE_FE/dV_PG` at `v_pg`, normalized by the same derivative for a
/// charge-free channel. Near 1 in depletion, near 0 when the channel
/// carriers screen the pass gate.
pub fn screening_factor(
    stack: &GateStack,
    p: f64,
    v_pg: f64,
    channel: &ChannelChargeModel,
) -> Result<f64> {
    let h = SCREENING_STEP;
    let slope = |c: &dyn ChannelCharge| -> Result<f64> {
        let up = solve_electrostatics(stack, 0.0, v_pg + h, p, c)?.ferroelectric_field;
        let dn = solve_electrostatics(stack, 0.0, v_pg - h, p, c)?.ferroelectric_field;
        Ok((up - dn) / (2.0 * h))
    };
    let reference = slope(&NoChannelCharge)?;
    Ok(slope(channel)? / reference)
}
