use num_complex::Complex64;

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: Complex64,
    carry: Complex64,
}

impl CompensatedSum {
    pub fn add(&mut self, value: Complex64) {
        self.sum.re = neumaier(self.sum.re, value.re, &mut self.carry.re);
        self.sum.im = neumaier(self.sum.im, value.im, &mut self.carry.im);
    }

    pub fn total(&self) -> Complex64 {
        self.sum + self.carry
    }
}

fn neumaier(sum: f64, x: f64, carry: &mut f64) -> f64 {
    let t = sum + x;
    if sum.abs() >= x.abs() {
        *carry += (sum - t) + x;
    } else {
        *carry += (x - t) + sum;
    }
    t
}

/// Wraps an angle in radians to [-π, π].
pub(crate) fn wrap_phase(phase: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut p = phase.rem_euclid(two_pi);
    if p > std::f64::consts::PI {
        p -= two_pi;
    }
    p
}

/// Wraps an angle in degrees to (-180, 180].
pub(crate) fn wrap_degrees(deg: f64) -> f64 {
    let mut d = deg.rem_euclid(360.0);
    if d > 180.0 {
        d -= 360.0;
    }
    d
}

pub(crate) fn check_positive(name: &str, value: f64) -> crate::Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(crate::Error::param(format!(
            "{name} must be finite and > 0, got {value}"
        )))
    }
}
