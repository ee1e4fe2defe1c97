//! Pulse demultiplexer: the switching schedule that fans one pulsed photon
//! stream into synchronized spatial channels, and the efficiency budget of
//! a delivered photon.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemuxError {
    #[error("cycle length {cycle_len} is not divisible by {channels} channels")]
    IndivisibleCycle { cycle_len: u32, channels: u32 },

    #[error("cycle length and channel count must be positive")]
    EmptyCycle,

    #[error("efficiency {0} outside [0, 1]")]
    BadEfficiency(f64),
}

/// Demultiplexer configuration: a switching cell redirects blocks of
/// `cycle_len / channels` consecutive pulses into each channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemuxConfig<R: Real> {
    pub laser_rep_hz: R,
    pub cycle_len: u32,
    pub channels: u32,
    pub pc_rep_hz: R,
    /// Brightness at the collection fiber output.
    pub eta_f: R,
    /// Switch transmission.
    pub eta_w: R,
    /// Optical line transmission.
    pub eta_l: R,
}

impl<R: Real> DemuxConfig<R> {
    /// The four-channel layout: one hundred pulses per switching cycle.
    pub fn experiment(eta_f: R, eta_w: R, eta_l: R) -> Result<Self, DemuxError> {
        DemuxConfig::new(R::of(76e6), 100, 4, eta_f, eta_w, eta_l)
    }

    pub fn new(
        laser_rep_hz: R,
        cycle_len: u32,
        channels: u32,
        eta_f: R,
        eta_w: R,
        eta_l: R,
    ) -> Result<Self, DemuxError> {
        if cycle_len == 0 || channels == 0 {
            return Err(DemuxError::EmptyCycle);
        }
        if !cycle_len.is_multiple_of(channels) {
            return Err(DemuxError::IndivisibleCycle {
                cycle_len,
                channels,
            });
        }
        for eta in [eta_f, eta_w, eta_l] {
            if eta < R::zero() || eta > R::one() {
                return Err(DemuxError::BadEfficiency(eta.to_f64().unwrap()));
            }
        }
        Ok(DemuxConfig {
            laser_rep_hz,
            cycle_len,
            channels,
            pc_rep_hz: laser_rep_hz / R::of(cycle_len as f64),
            eta_f,
            eta_w,
            eta_l,
        })
    }

    /// Channel (1-based) receiving the 1-based pulse index; periodic with
    /// the cycle length.
    pub fn channel_for_pulse(&self, pulse: u64) -> u32 {
        let block = (self.cycle_len / self.channels) as u64;
        let in_cycle = (pulse - 1) % self.cycle_len as u64;
        (in_cycle / block) as u32 + 1
    }

    /// The full one-cycle routing table as `(pulse_index, channel)` rows.
    pub fn schedule(&self) -> Vec<(u32, u32)> {
        (1..=self.cycle_len)
            .map(|i| (i, self.channel_for_pulse(i as u64)))
            .collect()
    }

    /// Pulses delivered to each channel over one cycle.
    pub fn per_channel_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.channels as usize];
        for (_, ch) in self.schedule() {
            counts[ch as usize - 1] += 1;
        }
        counts
    }

    /// Overall single-photon survival: fiber output brightness times switch
    /// and optical-line transmission.
    pub fn efficiency_budget(&self) -> R {
        self.eta_f * self.eta_w * self.eta_l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn experiment() -> DemuxConfig<f64> {
        DemuxConfig::experiment(0.263, 0.83, 0.80).unwrap()
    }

    #[test]
    fn pulse_thirty_lands_on_channel_two() {
        assert_eq!(experiment().channel_for_pulse(30), 2);
        assert_eq!(experiment().channel_for_pulse(1), 1);
        assert_eq!(experiment().channel_for_pulse(25), 1);
        assert_eq!(experiment().channel_for_pulse(26), 2);
        assert_eq!(experiment().channel_for_pulse(76), 4);
        assert_eq!(experiment().channel_for_pulse(100), 4);
    }

    #[test]
    fn channels_receive_equal_blocks() {
        let counts = experiment().per_channel_counts();
        assert_eq!(counts, vec![25, 25, 25, 25]);
    }

    #[test]
    fn schedule_is_periodic() {
        let cfg = experiment();
        for pulse in 1..=300u64 {
            assert_eq!(
                cfg.channel_for_pulse(pulse),
                cfg.channel_for_pulse(pulse + 100)
            );
        }
    }

    #[test]
    fn toy_cycle_routes_like_the_big_one() {
        let cfg = DemuxConfig::<f64>::new(76e6, 8, 4, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(cfg.channel_for_pulse(7), 4);
        assert_eq!(cfg.per_channel_counts(), vec![2, 2, 2, 2]);
    }

    #[test]
    fn indivisible_cycles_are_rejected() {
        let err = DemuxConfig::<f64>::new(76e6, 10, 4, 1.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, DemuxError::IndivisibleCycle { .. }));
    }

    #[test]
    fn efficiency_budget_composes() {
        let eta = experiment().efficiency_budget();
        assert!((eta - 0.174632).abs() < 1e-12);
        assert!((eta - 0.17463).abs() < 1e-5);
        assert!((DemuxConfig::<f64>::experiment(1.0, 1.0, 1.0)
            .unwrap()
            .efficiency_budget()
            - 1.0)
            .abs()
            < 1e-15);
    }

    #[test]
    fn switch_rate_is_derived() {
        let cfg = experiment();
        assert!((cfg.pc_rep_hz - 0.76e6).abs() < 1e-6);
    }

    #[test]
    fn budget_feeds_the_heralding_closed_form() {
        // Composing the unrounded budget into the multiplexed-detector
        // ratio lands on the published working point.
        use crate::herald::{eta_h_closed_form, ClosedFormKind};
        let eta_s = experiment().efficiency_budget();
        let eta_h = eta_h_closed_form(ClosedFormKind::Pse, eta_s);
        assert!((eta_h - 0.00875).abs() < 5e-5);
    }
}
