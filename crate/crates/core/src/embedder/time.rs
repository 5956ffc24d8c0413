use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeEncodingConfig {
    pub alpha: f64,
    pub f_hz: f64,
    pub phi: f64,
    pub enabled: bool,
}

impl Default for TimeEncodingConfig {
    fn default() -> Self {
        TimeEncodingConfig {
            alpha: 1.0,
            f_hz: 4.0,
            phi: 0.0,
            enabled: true,
        }
    }
}

impl TimeEncodingConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.alpha > 0.0) || !(self.f_hz > 0.0) || !self.phi.is_finite() {
            return Err(crate::Error::Config(format!(
                "time encoding needs alpha > 0, f > 0 and finite phi (got {}, {}, {})",
                self.alpha, self.f_hz, self.phi
            )));
        }
        Ok(())
    }
}

/// Sinusoidal time wrap: `(a cos(2 pi f t + phi), a sin(2 pi f t + phi))`, `t` in microseconds.
pub fn encode_time(cfg: &TimeEncodingConfig, t_us: u64) -> (f64, f64) {
    let phase = TAU * cfg.f_hz * (t_us as f64 * 1e-6) + cfg.phi;
    let (s, c) = phase.sin_cos();
    (cfg.alpha * c, cfg.alpha * s)
}
