use super::{
    make_pdft_rp, sample_channel, sample_support, stationary_activation, synthesize_measurements, ChannelRealization,
    ChannelSpec, MeasurementSet, PilotMatrix,
};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Dimensions and channel statistics of a synthetic experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub p10: f64,
    pub p01: f64,
    pub spec: ChannelSpec,
}

/// One generated problem instance.
#[derive(Debug, Clone)]
pub struct Trial {
    pub channel: ChannelRealization,
    pub pilots: Vec<PilotMatrix>,
    pub measurements: MeasurementSet,
}

impl Scenario {
    pub fn new(n: usize, m: usize, p: usize) -> Self {
        Self {
            n,
            m,
            p,
            p10: 0.05,
            p01: 0.2,
            spec: ChannelSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 {
            return Err(Error::Config(format!("need N >= 2 and P >= 1, got N={} P={}", self.n, self.p)));
        }
        if self.m == 0 || self.m >= self.n {
            return Err(Error::Config(format!("need 0 < M < N, got M={} N={}", self.m, self.n)));
        }
        for (name, x) in [("p10", self.p10), ("p01", self.p01)] {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {x}")));
            }
        }
        self.spec.validate()
    }

    pub fn activation(&self) -> f64 {
        stationary_activation(self.p10, self.p01)
    }

    /// Average element power of the channel prior.
    pub fn mean_power(&self) -> f64 {
        self.spec.mean_power(self.activation())
    }

    pub fn channel(&self, seed: u64) -> Result<ChannelRealization> {
        let support = sample_support(self.n, self.p10, self.p01, derive_seed(seed, &[1]))?;
        sample_channel(&support, self.p, &self.spec, derive_seed(seed, &[2]))
    }

    pub fn pilots(&self, seed: u64) -> Result<Vec<PilotMatrix>> {
        (0..self.p)
            .map(|i| make_pdft_rp(self.n, self.m, derive_seed(seed, &[3, i as u64])))
            .collect()
    }

    /// Pilots and noisy measurements for a given channel.
    pub fn observe(&self, channel: ChannelRealization, seed: u64, snr_db: f64) -> Result<Trial> {
        if channel.n != self.n || channel.p != self.p {
            return Err(Error::Dimension(format!(
                "channel is {}x{}, scenario expects {}x{}",
                channel.n, channel.p, self.n, self.p
            )));
        }
        let pilots = self.pilots(seed)?;
        let measurements = synthesize_measurements(&channel, &pilots, snr_db, derive_seed(seed, &[4, snr_db.to_bits()]))?;
        Ok(Trial {
            channel,
            pilots,
            measurements,
        })
    }

    /// A fresh synthetic channel with its pilots and measurements.
    pub fn trial(&self, seed: u64, snr_db: f64) -> Result<Trial> {
        self.observe(self.channel(seed)?, seed, snr_db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trials_are_reproducible() {
        let sc = Scenario::new(32, 12, 3);
        let a = sc.trial(5, 10.0).unwrap();
        let b = sc.trial(5, 10.0).unwrap();
        assert!(a.channel.gains == b.channel.gains && a.channel.support == b.channel.support);
        assert_eq!(a.measurements, b.measurements);
        let c = sc.trial(6, 10.0).unwrap();
        assert!(a.channel.gains != c.channel.gains);
        // same channel, different SNR, different noise
        let d = sc.trial(5, 20.0).unwrap();
        assert!(a.channel.gains == d.channel.gains);
        assert!(d.measurements.noise_variance < a.measurements.noise_variance);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Scenario::new(32, 32, 1).validate().is_err());
        assert!(Scenario::new(32, 0, 1).validate().is_err());
        assert!(Scenario::new(32, 8, 2).validate().is_ok());
        let sc = Scenario::new(16, 8, 2);
        let ch = Scenario::new(16, 8, 3).channel(1).unwrap();
        assert!(sc.observe(ch, 1, 10.0).is_err());
    }
}
