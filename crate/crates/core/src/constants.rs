/// SI vacuum constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Permittivity of free space, F/m.
    pub eps0: f64,
    /// Permeability of free space, H/m.
    pub mu0: f64,
    /// Speed of light, m/s.
    pub c: f64,
}

impl PhysicalConstants {
    pub const SI: PhysicalConstants = PhysicalConstants {
        eps0: 8.854_187_812_8e-12,
        mu0: 1.256_637_062_12e-6,
        c: 2.997_924_58e8,
    };

    /// Impedance of free space, ohm.
    pub fn eta0(&self) -> f64 {
        (self.mu0 / self.eps0).sqrt()
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::SI
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu0_matches_light_speed_relation() {
        let k = PhysicalConstants::SI;
        let derived = 1.0 / (k.c * k.c * k.eps0);
        assert!(((k.mu0 - derived) / derived).abs() < 1e-9);
    }
}
