//! Virtual clock separating audio availability from compute time.
//!
//! `audio_available_s` is how much source audio exists; `now_s` is the
//! simulated wall clock. Audio arrival drags `now_s` forward, compute charges
//! push it further. Emissions stamped with both give the NCA and CA views of
//! latency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VirtualClock {
    pub audio_available_s: f64,
    pub now_s: f64,
}

/// Where compute cost comes from when stepping the pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockSource {
    /// Charge the cost reported by the backend. Deterministic.
    #[default]
    Virtual,
    /// Charge the measured host monotonic time of each backend call.
    Host,
}

fn check_duration(what: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::invalid(format!(
            "{what} must be finite and non-negative, got {value}"
        )));
    }
    Ok(())
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance_audio(&mut self, delta_s: f64) -> Result<()> {
        check_duration("audio delta", delta_s)?;
        self.audio_available_s += delta_s;
        self.now_s = self.now_s.max(self.audio_available_s);
        Ok(())
    }

    pub fn charge_compute(&mut self, cost_s: f64) -> Result<()> {
        check_duration("compute cost", cost_s)?;
        self.now_s += cost_s;
        Ok(())
    }

    /// Moves the wall clock to at least `t_s` (an external arrival time).
    pub fn wait_until(&mut self, t_s: f64) -> Result<()> {
        check_duration("arrival time", t_s)?;
        self.now_s = self.now_s.max(t_s);
        Ok(())
    }
}

impl VirtualClock {
    /// Runs a backend call and charges its cost: the backend-reported cost
    /// under [`ClockSource::Virtual`], measured host time under
    /// [`ClockSource::Host`]. Nothing is charged when the call fails.
    pub fn charge_call<T>(
        &mut self,
        source: ClockSource,
        call: impl FnOnce() -> Result<T>,
        reported_cost: impl FnOnce(&T) -> f64,
    ) -> Result<T> {
        let started = std::time::Instant::now();
        let out = call()?;
        let cost = match source {
            ClockSource::Virtual => reported_cost(&out),
            ClockSource::Host => started.elapsed().as_secs_f64(),
        };
        self.charge_compute(cost)?;
        Ok(out)
    }
}
