use serde::{Deserialize, Serialize};

use crate::finite_field::PrimeField;
use crate::robust_pir::{universal_params, UniversalParams};
use crate::PlanError;

/// System parameters shared by every stage of a session.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n: usize,
    pub k: usize,
    pub q: u32,
    #[serde(default = "default_ell")]
    pub ell: usize,
    pub m: usize,
    pub nu: usize,
}

fn default_ell() -> usize {
    1
}

impl SystemConfig {
    pub fn validate(&self) -> Result<UniversalParams, PlanError> {
        PrimeField::new(self.q).map_err(|_| PlanError::InvalidField(self.q))?;
        if self.ell == 0 {
            return Err(PlanError::InvalidEll);
        }
        if self.m == 0 {
            return Err(PlanError::FileIndex { f: 0, m: 0 });
        }
        universal_params(self.n, self.k, self.nu)
    }

    pub fn field(&self) -> Result<PrimeField, PlanError> {
        PrimeField::new(self.q).map_err(|_| PlanError::InvalidField(self.q))
    }
}
