//! Multi-grain ferroelectric polarization and its switching kinetics.
//!
//! Each grain carries a binary orientation and its own activation field.
//! Switching follows a Merz-type law, `tau = tau0 * exp((Ea / |E|)^n)`, with
//! a stretched-exponential flip probability `1 - exp(-(t / tau)^beta)`.
//!
//! Grain flips are driven by an accumulated reduced time `s = ∫ dt / tau(E)`
//! and a per-grain exponential threshold `h` drawn from a counter-based
//! stream keyed by `(seed, grain, flip count)`: a grain flips once
//! `s^beta >= h`. For a fresh grain under a constant field this reproduces
//! the flip probability above exactly, results do not depend on how a
//! stress is split into steps, and grains can be evaluated in any order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grains per cell.
pub const DEFAULT_GRAINS: usize = 2000;

// Stream-space separation between activation-field draws and flip thresholds.
const THRESHOLD_DOMAIN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Kinetic parameters shared by every grain of a film.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingKinetics {
    /// Attempt time, s.
    pub tau0: f64,
    /// Field-law exponent `n` (>= 1).
    pub field_exponent: f64,
    /// Stretch exponent `beta` (> 0).
    pub stretch_exponent: f64,
    /// Median activation field, V/m.
    pub activation_median: f64,
    /// Log-normal sigma of the activation field.
    pub activation_sigma: f64,
}

impl Default for SwitchingKinetics {
    /// Calibrated against the pass-disturb and write anchors; see
    /// `calibrate` in the experiments module.
    fn default() -> Self {
        SwitchingKinetics {
            tau0: 1e-9,
            field_exponent: 3.0,
            stretch_exponent: 2.0,
            activation_median: 1.84e8,
            activation_sigma: 0.03,
        }
    }
}

impl SwitchingKinetics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau0 > 0.0
            && self.tau0.is_finite()
            && self.field_exponent >= 1.0
            && self.field_exponent.is_finite()
            && self.stretch_exponent > 0.0
            && self.stretch_exponent.is_finite()
            && self.activation_median > 0.0
            && self.activation_median.is_finite()
            && self.activation_sigma >= 0.0
            && self.activation_sigma.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid switching kinetics {self:?}")))
        }
    }

    /// Characteristic switching time for a grain at field `field` (signed,
    /// only the magnitude matters). Infinite at zero field.
    pub fn switching_time(&self, field: f64, activation_field: f64) -> f64 {
        let e = field.abs();
        if e == 0.0 {
            return f64::INFINITY;
        }
        self.tau0 * ((activation_field / e).powf(self.field_exponent)).exp()
    }

    /// Flip probability of a fresh, opposing grain over `dt` at constant field.
    pub fn flip_probability(&self, field: f64, activation_field: f64, dt: f64) -> f64 {
        let tau = self.switching_time(field, activation_field);
        if dt <= 0.0 || tau.is_infinite() {
            return 0.0;
        }
        -(-(dt / tau).powf(self.stretch_exponent)).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    /// Pointing toward the channel (LVT-setting).
    Up,
    /// Pointing away from the channel (HVT-setting).
    Down,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Up => 1.0,
            Orientation::Down => -1.0,
        }
    }

    fn flipped(self) -> Self {
        match self {
            Orientation::Up => Orientation::Down,
            Orientation::Down => Orientation::Up,
        }
    }

    /// Orientation a field of this sign drives grains toward.
    pub fn favoured_by(field: f64) -> Option<Self> {
        if field > 0.0 {
            Some(Orientation::Up)
        } else if field < 0.0 {
            Some(Orientation::Down)
        } else {
            None
        }
    }
}

/// Binary memory state of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemoryState {
    /// High threshold (erased): polarization away from the channel.
    Hvt,
    /// Low threshold (programmed): polarization toward the channel.
    Lvt,
}

impl MemoryState {
    pub fn orientation(self) -> Orientation {
        match self {
            MemoryState::Hvt => Orientation::Down,
            MemoryState::Lvt => Orientation::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grain {
    pub orientation: Orientation,
    /// V/m, strictly positive.
    pub activation_field: f64,
    /// Reduced time accumulated toward the next flip.
    progress: f64,
    /// Exponential threshold for the next flip.
    threshold: f64,
    flips: u32,
}

impl Grain {
    pub fn flips(&self) -> u32 {
        self.flips
    }
}

fn flip_threshold(seed: u64, index: usize, flips: u32) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ THRESHOLD_DOMAIN);
    rng.set_stream(index as u64);
    rng.set_word_pos(u128::from(flips) * 2);
    // open interval (0, 1]: avoids ln(0)
    let u: f64 = 1.0 - rng.random::<f64>();
    -u.ln()
}

/// Decorrelated seed for item `index` of a family keyed by `seed`
/// (splitmix64 finalizer).
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The polarization state of one ferroelectric film.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrainEnsemble {
    grains: Vec<Grain>,
    /// Saturation polarization, C/m².
    saturation_polarization: f64,
    seed: u64,
}

impl GrainEnsemble {
    /// Draws `n_grains` activation fields from the log-normal distribution of
    /// `kinetics`; every grain starts in [`Orientation::Up`].
    pub fn sample(
        n_grains: usize,
        kinetics: &SwitchingKinetics,
        saturation_polarization: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_grains == 0 {
            return Err(Error::invalid("ensemble needs at least one grain"));
        }
        if !(saturation_polarization > 0.0 && saturation_polarization.is_finite()) {
            return Err(Error::invalid("saturation polarization must be positive"));
        }
        kinetics.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let median = kinetics.activation_median;
        let fields: Vec<f64> = if kinetics.activation_sigma == 0.0 {
            vec![median; n_grains]
        } else {
            let dist = LogNormal::new(median.ln(), kinetics.activation_sigma)
                .map_err(|e| Error::invalid(e.to_string()))?;
            (0..n_grains).map(|_| dist.sample(&mut rng)).collect()
        };
        let grains = fields
            .into_iter()
            .enumerate()
            .map(|(i, activation_field)| Grain {
                orientation: Orientation::Up,
                activation_field,
                progress: 0.0,
                threshold: flip_threshold(seed, i, 0),
                flips: 0,
            })
            .collect();
        Ok(GrainEnsemble {
            grains,
            saturation_polarization,
            seed,
        })
    }

    pub fn grains(&self) -> &[Grain] {
        &self.grains
    }

    pub fn len(&self) -> usize {
        self.grains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grains.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn saturation_polarization(&self) -> f64 {
        self.saturation_polarization
    }

    /// Mean orientation in [-1, 1].
    pub fn mean_orientation(&self) -> f64 {
        let up = self
            .grains
            .iter()
            .filter(|g| g.orientation == Orientation::Up)
            .count();
        (2.0 * up as f64 - self.grains.len() as f64) / self.grains.len() as f64
    }

    /// `Ps * mean(orientation)`, C/m².
    pub fn net_polarization(&self) -> f64 {
        self.saturation_polarization * self.mean_orientation()
    }

    /// Fraction of grains in `orientation`.
    pub fn fraction(&self, orientation: Orientation) -> f64 {
        self.grains
            .iter()
            .filter(|g| g.orientation == orientation)
            .count() as f64
            / self.grains.len() as f64
    }

    /// Forces every grain into `orientation` and clears flip progress.
    /// Threshold streams continue where they were.
    pub fn set_all(&mut self, orientation: Orientation) {
        for (i, g) in self.grains.iter_mut().enumerate() {
            if g.orientation != orientation {
                g.orientation = orientation;
                g.flips += 1;
                g.threshold = flip_threshold(self.seed, i, g.flips);
            }
            g.progress = 0.0;
        }
    }

    /// Multiplies every activation field by `factor` (device-to-device spread).
    pub fn scale_activation(&mut self, factor: f64) {
        for g in &mut self.grains {
            g.activation_field *= factor;
        }
    }

    /// Advances the ensemble by `dt` at constant field `field` (V/m, signed).
    /// Grains aligned with the field are untouched; zero field or zero time is
    /// a no-op. Returns the number of grains that flipped.
    pub fn evolve(&mut self, field: f64, dt: f64, kinetics: &SwitchingKinetics) -> usize {
        let Some(target) = Orientation::favoured_by(field) else {
            return 0;
        };
        if !(dt > 0.0) {
            return 0;
        }
        let beta = kinetics.stretch_exponent;
        let mut flipped = 0;
        for (i, g) in self.grains.iter_mut().enumerate() {
            if g.orientation == target {
                continue;
            }
            let tau = kinetics.switching_time(field, g.activation_field);
            if !tau.is_finite() {
                continue;
            }
            g.progress += dt / tau;
            if g.progress.powf(beta) >= g.threshold {
                g.orientation = g.orientation.flipped();
                g.progress = 0.0;
                g.flips += 1;
                g.threshold = flip_threshold(self.seed, i, g.flips);
                flipped += 1;
            }
        }
        flipped
    }
}
