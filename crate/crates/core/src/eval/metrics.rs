use crate::error::{Error, Result};

/// Per-scenario driving submetrics. `ep` is continuous, the rest binary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubMetrics {
    pub nc: f64,
    pub dac: f64,
    pub ep: f64,
    pub ttc: f64,
    pub comf: f64,
}

impl SubMetrics {
    pub const NAMES: [&'static str; 5] = ["nc", "dac", "ep", "ttc", "comf"];

    pub fn perfect() -> Self {
        Self { nc: 1.0, dac: 1.0, ep: 1.0, ttc: 1.0, comf: 1.0 }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.nc, self.dac, self.ep, self.ttc, self.comf]
    }

    pub fn validate(&self) -> Result<()> {
        let binary = |v: f64| v == 0.0 || v == 1.0;
        if !(binary(self.nc) && binary(self.dac) && binary(self.ttc) && binary(self.comf)) {
            return Err(Error::Invalid(format!("NC, DAC, TTC and Comf must be 0 or 1: {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.ep) {
            return Err(Error::Invalid(format!("EP must lie in [0,1], got {}", self.ep)));
        }
        Ok(())
    }
}

/// `NC · DAC · (5·EP + 5·TTC + 2·Comf) / 12`.
pub fn pdms(m: &SubMetrics) -> Result<f64> {
    m.validate()?;
    Ok(m.nc * m.dac * (5.0 * m.ep + 5.0 * m.ttc + 2.0 * m.comf) / 12.0)
}
