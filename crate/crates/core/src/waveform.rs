//! Piecewise-linear bias schedules for string terminals.
//!
//! A waveform maps each terminal to a list of linear segments. Every
//! terminal must cover the same total duration. Waveforms can be built in
//! code ([`BiasWaveform::from_phases`]) or parsed from a line-oriented text
//! form:
//!
//! ```text
//! # terminal: segment, segment, ...
//! BL:  0 V for 1 us, 50 mV for 2 us
//! WL0: 0 V -> 4 V over 1 us, 4 V for 2 us
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Time, Voltage};

/// Longest waveform text accepted by the parser, bytes.
pub const MAX_WAVEFORM_LEN: usize = 64 * 1024;

/// Relative tolerance when comparing terminal durations.
pub(crate) const DURATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Terminal {
    Bl,
    Sl,
    Pg,
    Ssl,
    Gsl,
    Wl(usize),
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminal::Bl => f.write_str("BL"),
            Terminal::Sl => f.write_str("SL"),
            Terminal::Pg => f.write_str("PG"),
            Terminal::Ssl => f.write_str("SSL"),
            Terminal::Gsl => f.write_str("GSL"),
            Terminal::Wl(i) => write!(f, "WL{i}"),
        }
    }
}

impl FromStr for Terminal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_uppercase().as_str() {
            "BL" => Ok(Terminal::Bl),
            "SL" => Ok(Terminal::Sl),
            "PG" => Ok(Terminal::Pg),
            "SSL" => Ok(Terminal::Ssl),
            "GSL" => Ok(Terminal::Gsl),
            u => u
                .strip_prefix("WL")
                .filter(|d| !d.is_empty() && d.len() <= 6 && d.bytes().all(|b| b.is_ascii_digit()))
                .and_then(|d| d.parse().ok())
                .map(Terminal::Wl)
                .ok_or_else(|| Error::InvalidWaveform(format!("unknown terminal {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// V
    pub start: f64,
    /// V
    pub end: f64,
    /// s
    pub duration: f64,
}

impl Segment {
    pub fn hold(level: f64, duration: f64) -> Self {
        Segment {
            start: level,
            end: level,
            duration,
        }
    }

    pub fn ramp(start: f64, end: f64, duration: f64) -> Self {
        Segment {
            start,
            end,
            duration,
        }
    }
}

/// One step of a schedule: listed terminals jump to their level, the rest
/// keep their previous level (0 V initially).
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub duration: f64,
    pub levels: Vec<(Terminal, f64)>,
}

impl Phase {
    pub fn new(duration: f64, levels: &[(Terminal, f64)]) -> Self {
        Phase {
            duration,
            levels: levels.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BiasWaveform {
    terminals: BTreeMap<Terminal, Vec<Segment>>,
}

impl BiasWaveform {
    pub fn new(terminals: BTreeMap<Terminal, Vec<Segment>>) -> Result<Self> {
        let w = BiasWaveform { terminals };
        w.validate()?;
        Ok(w)
    }

    /// Holds every terminal in `terminals` at 0 V for `duration`.
    pub fn zeros(terminals: &[Terminal], duration: f64) -> Result<Self> {
        BiasWaveform::new(
            terminals
                .iter()
                .map(|&t| (t, vec![Segment::hold(0.0, duration)]))
                .collect(),
        )
    }

    /// Step schedule over `terminals`. Terminals not mentioned in a phase
    /// hold their previous level.
    pub fn from_phases(terminals: &[Terminal], phases: &[Phase]) -> Result<Self> {
        let mut level: BTreeMap<Terminal, f64> = terminals.iter().map(|&t| (t, 0.0)).collect();
        let mut map: BTreeMap<Terminal, Vec<Segment>> =
            terminals.iter().map(|&t| (t, Vec::new())).collect();
        for phase in phases {
            for &(t, v) in &phase.levels {
                match level.get_mut(&t) {
                    Some(l) => *l = v,
                    None => {
                        return Err(Error::InvalidWaveform(format!(
                            "phase drives {t}, which is not in the terminal list"
                        )))
                    }
                }
            }
            for (t, segs) in &mut map {
                segs.push(Segment::hold(level[t], phase.duration));
            }
        }
        BiasWaveform::new(map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terminals.is_empty() {
            return Err(Error::InvalidWaveform("no terminals".into()));
        }
        let mut total = None;
        for (t, segs) in &self.terminals {
            if segs.is_empty() {
                return Err(Error::InvalidWaveform(format!("{t} has no segments")));
            }
            let mut sum = 0.0;
            for (k, s) in segs.iter().enumerate() {
                if !(s.duration > 0.0 && s.duration.is_finite()) {
                    return Err(Error::InvalidWaveform(format!(
                        "{t} segment {k}: duration must be positive and finite"
                    )));
                }
                if !(s.start.is_finite() && s.end.is_finite()) {
                    return Err(Error::InvalidWaveform(format!(
                        "{t} segment {k}: non-finite level"
                    )));
                }
                sum += s.duration;
            }
            match total {
                None => total = Some(sum),
                Some(d) if (sum - d).abs() > DURATION_TOLERANCE * d => {
                    return Err(Error::InvalidWaveform(format!(
                        "{t} lasts {sum:e} s, other terminals {d:e} s"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn terminals(&self) -> impl Iterator<Item = Terminal> + '_ {
        self.terminals.keys().copied()
    }

    pub fn segments(&self, terminal: Terminal) -> Option<&[Segment]> {
        self.terminals.get(&terminal).map(Vec::as_slice)
    }

    pub fn duration(&self) -> f64 {
        self.terminals
            .values()
            .next()
            .map_or(0.0, |s| s.iter().map(|s| s.duration).sum())
    }

    /// Level of `terminal` at time `t`; 0 V for terminals not in the
    /// waveform. At a breakpoint the later segment wins.
    pub fn value_at(&self, terminal: Terminal, t: f64) -> f64 {
        let Some(segs) = self.terminals.get(&terminal) else {
            return 0.0;
        };
        let mut t0 = 0.0;
        for s in segs {
            let t1 = t0 + s.duration;
            if t < t1 {
                let x = ((t - t0) / s.duration).clamp(0.0, 1.0);
                return s.start + (s.end - s.start) * x;
            }
            t0 = t1;
        }
        segs.last().map_or(0.0, |s| s.end)
    }

    /// Every segment boundary of every terminal, sorted, from 0 to the end.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0];
        for segs in self.terminals.values() {
            let mut t = 0.0;
            for s in segs {
                t += s.duration;
                pts.push(t);
            }
        }
        merge_times(pts, self.duration())
    }

    /// Highest WL index driven, if any.
    pub fn max_wl(&self) -> Option<usize> {
        self.terminals
            .keys()
            .filter_map(|t| match t {
                Terminal::Wl(i) => Some(*i),
                _ => None,
            })
            .max()
    }
}

/// Sorts, clamps to `[0, end]` and drops near-duplicates.
pub(crate) fn merge_times(mut pts: Vec<f64>, end: f64) -> Vec<f64> {
    pts.retain(|t| t.is_finite());
    pts.sort_by(f64::total_cmp);
    let eps = DURATION_TOLERANCE * end.max(f64::MIN_POSITIVE);
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for t in pts {
        let t = t.clamp(0.0, end);
        match out.last() {
            Some(&last) if t - last <= eps => {}
            _ => out.push(t),
        }
    }
    if let Some(last) = out.last_mut() {
        if end - *last <= eps {
            *last = end;
        } else {
            out.push(end);
        }
    }
    out
}

fn parse_segment(text: &str) -> Result<Segment> {
    let bad = |why: &str| Error::InvalidWaveform(format!("segment {text:?}: {why}"));
    if let Some((levels, dur)) = text.split_once(" over ") {
        let (a, b) = levels
            .split_once("->")
            .ok_or_else(|| bad("ramp needs `a -> b over t`"))?;
        let a: Voltage = a.trim().parse()?;
        let b: Voltage = b.trim().parse()?;
        let d: Time = dur.trim().parse()?;
        Ok(Segment::ramp(a.value(), b.value(), d.value()))
    } else if let Some((level, dur)) = text.split_once(" for ") {
        let v: Voltage = level.trim().parse()?;
        let d: Time = dur.trim().parse()?;
        Ok(Segment::hold(v.value(), d.value()))
    } else {
        Err(bad("expected `v for t` or `a -> b over t`"))
    }
}

impl FromStr for BiasWaveform {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        if text.len() > MAX_WAVEFORM_LEN {
            return Err(Error::InvalidWaveform(format!(
                "input longer than {MAX_WAVEFORM_LEN} bytes"
            )));
        }
        let mut map: BTreeMap<Terminal, Vec<Segment>> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, rest) = line.split_once(':').ok_or_else(|| {
                Error::InvalidWaveform(format!("line {}: expected `TERMINAL: segments`", n + 1))
            })?;
            let terminal: Terminal = name.parse()?;
            let segs = rest
                .split(',')
                .map(|s| parse_segment(s.trim()))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::InvalidWaveform(format!("line {}: {e}", n + 1)))?;
            if map.insert(terminal, segs).is_some() {
                return Err(Error::InvalidWaveform(format!(
                    "line {}: {terminal} given twice",
                    n + 1
                )));
            }
        }
        BiasWaveform::new(map)
    }
}

impl fmt::Display for BiasWaveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, segs) in &self.terminals {
            write!(f, "{t}:")?;
            for (k, s) in segs.iter().enumerate() {
                let sep = if k == 0 { " " } else { ", " };
                if s.start == s.end {
                    write!(f, "{sep}{:e} V for {:e} s", s.start, s.duration)?;
                } else {
                    write!(f, "{sep}{:e} V -> {:e} V over {:e} s", s.start, s.end, s.duration)?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
