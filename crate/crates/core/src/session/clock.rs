use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Time source for latency injection and task timing.
pub trait Clock: Send {
    fn now_s(&self) -> f64;
    fn sleep(&mut self, seconds: f64);
}

/// Advances only when slept on.
#[derive(Debug, Clone, Default)]
pub struct SimClock {
    t: f64,
}

impl Clock for SimClock {
    fn now_s(&self) -> f64 {
        self.t
    }

    fn sleep(&mut self, seconds: f64) {
        self.t += seconds.max(0.0);
    }
}

#[derive(Debug, Clone)]
pub struct WallClock {
    start: std::time::Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        Self {
            start: std::time::Instant::now(),
        }
    }
}

impl Clock for WallClock {
    fn now_s(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn sleep(&mut self, seconds: f64) {
        std::thread::sleep(std::time::Duration::from_secs_f64(seconds.max(0.0)));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyConfig {
    pub latency_mean_s: f64,
    #[serde(default)]
    pub latency_jitter_s: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Delays drawn uniformly from `mean ± jitter`, floored at zero.
#[derive(Debug, Clone)]
pub struct LatencyInjector {
    cfg: LatencyConfig,
    rng: ChaCha8Rng,
}

impl LatencyInjector {
    pub fn new(cfg: LatencyConfig) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    pub fn sample(&mut self) -> f64 {
        let j = self.cfg.latency_jitter_s.abs();
        let offset = if j > 0.0 { self.rng.random_range(-j..=j) } else { 0.0 };
        (self.cfg.latency_mean_s + offset).max(0.0)
    }

    /// Waits one sampled delay on `clock` and returns it.
    pub fn delay(&mut self, clock: &mut dyn Clock) -> f64 {
        let d = self.sample();
        clock.sleep(d);
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_stay_in_band_and_repeat() {
        let cfg = LatencyConfig {
            latency_mean_s: 2.5,
            latency_jitter_s: 0.5,
            seed: 4,
        };
        let mut a = LatencyInjector::new(cfg);
        let mut b = LatencyInjector::new(cfg);
        for _ in 0..200 {
            let s = a.sample();
            assert!((2.0..=3.0).contains(&s));
            assert_eq!(s, b.sample());
        }
    }

    #[test]
    fn sim_clock_advances_by_delay() {
        let mut clock = SimClock::default();
        let mut inj = LatencyInjector::new(LatencyConfig {
            latency_mean_s: 1.0,
            latency_jitter_s: 0.0,
            seed: 0,
        });
        inj.delay(&mut clock);
        inj.delay(&mut clock);
        assert_eq!(clock.now_s(), 2.0);
    }
}
