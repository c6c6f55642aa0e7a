use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Distance of boundary-symbol roots from the real axis below which the
/// operator is reported non-elliptic.
pub const TAU_ELL: f64 = 1e-8;
/// Idempotency defect allowed for symbol projectors.
pub const TAU_IDEM: f64 = 1e-8;
/// Allowed disagreement between the residue and Riesz routes.
pub const TAU_AGREE: f64 = 1e-8;
/// Roots closer than this are residued together on one contour.
pub const TAU_CLUSTER: f64 = 1e-6;
/// Relative singular-value threshold for kernel counting.
pub const TAU_SV: f64 = 1e-6;
/// Relative `‖D b‖ / ‖b‖` accepted for kernel basis elements.
pub const TAU_KER: f64 = 1e-9;
/// Minimum `|det α|` on the boundary circle.
pub const TAU_INV: f64 = 1e-6;
/// Green's identity residual contract.
pub const TAU_GREEN: f64 = 1e-8;
/// Singular-value gap needed for a confident kernel count.
pub const GAP_CONFIDENT: f64 = 1e3;

/// Runtime-overridable copy of the module tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub ell: f64,
    pub idem: f64,
    pub agree: f64,
    pub cluster: f64,
    pub sv: f64,
    pub ker: f64,
    pub inv: f64,
    pub green: f64,
    pub gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ell: TAU_ELL,
            idem: TAU_IDEM,
            agree: TAU_AGREE,
            cluster: TAU_CLUSTER,
            sv: TAU_SV,
            ker: TAU_KER,
            inv: TAU_INV,
            green: TAU_GREEN,
            gap: GAP_CONFIDENT,
        }
    }
}

impl Tolerances {
    /// Apply a `KEY=VALUE` override. Values must be positive.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::invalid(format!("tolerance {key} must be positive, got {value}")));
        }
        let slot = match key {
            "ell" => &mut self.ell,
            "idem" => &mut self.idem,
            "agree" => &mut self.agree,
            "cluster" => &mut self.cluster,
            "sv" => &mut self.sv,
            "ker" => &mut self.ker,
            "inv" => &mut self.inv,
            "green" => &mut self.green,
            "gap" => &mut self.gap,
            _ => return Err(Error::invalid(format!("unknown tolerance key `{key}`"))),
        };
        *slot = value;
        Ok(())
    }

    /// Parse and apply `KEY=VALUE`.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected KEY=VALUE, got `{kv}`")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("tolerance value `{v}` is not a number")))?;
        self.set(k.trim(), value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_and_reject_nonpositive() {
        let mut t = Tolerances::default();
        t.apply_override("sv=1e-7").unwrap();
        assert_eq!(t.sv, 1e-7);
        assert!(t.apply_override("sv=-1").is_err());
        assert!(t.apply_override("bogus=1").is_err());
        assert!(t.apply_override("sv").is_err());
    }
}
