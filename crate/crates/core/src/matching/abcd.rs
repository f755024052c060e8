use num_complex::Complex64;

/// ABCD (chain) matrix of a two-port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPort {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl TwoPort {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self {
            a: one,
            b: zero,
            c: zero,
            d: one,
        }
    }

    pub fn series(z: Complex64) -> Self {
        Self {
            b: z,
            ..Self::identity()
        }
    }

    pub fn shunt(y: Complex64) -> Self {
        Self {
            c: y,
            ..Self::identity()
        }
    }

    /// `self` followed by `next` (source side first).
    pub fn then(&self, next: &TwoPort) -> Self {
        Self {
            a: self.a * next.a + self.b * next.c,
            b: self.a * next.b + self.b * next.d,
            c: self.c * next.a + self.d * next.c,
            d: self.c * next.b + self.d * next.d,
        }
    }

    /// Load voltage for a source of EMF `emf` and internal impedance `z_src`
    /// driving the two-port terminated in `z_load`.
    pub fn load_voltage(&self, emf: Complex64, z_src: Complex64, z_load: Complex64) -> Complex64 {
        emf * z_load / (self.a * z_load + self.b + z_src * (self.c * z_load + self.d))
    }
}
