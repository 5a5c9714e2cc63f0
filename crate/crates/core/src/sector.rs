use serde::{Deserialize, Serialize};

use crate::torus_quad::Weight;

/// Parity under `p → −p` and under the coordinate swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    /// odd, symmetric
    Os,
    /// odd, antisymmetric
    Oa,
    /// even, antisymmetric
    Ea,
    /// even, symmetric
    Es,
}

impl Sector {
    pub const ALL: [Sector; 4] = [Sector::Os, Sector::Oa, Sector::Ea, Sector::Es];
    pub const RANK_ONE: [Sector; 3] = [Sector::Os, Sector::Oa, Sector::Ea];

    pub fn as_str(self) -> &'static str {
        match self {
            Sector::Os => "os",
            Sector::Oa => "oa",
            Sector::Ea => "ea",
            Sector::Es => "es",
        }
    }

    /// Character under negation: +1 for even sectors.
    pub fn negation_sign(self) -> f64 {
        match self {
            Sector::Os | Sector::Oa => -1.0,
            Sector::Ea | Sector::Es => 1.0,
        }
    }

    /// Character under the swap: +1 for symmetric sectors.
    pub fn swap_sign(self) -> f64 {
        match self {
            Sector::Os | Sector::Es => 1.0,
            Sector::Oa | Sector::Ea => -1.0,
        }
    }

    /// The function `w_ω` spanning the sector's share of the potential's range.
    /// For `es` this is `2 + cos q1 + cos q2`, the threshold profile.
    pub fn weight(self) -> Weight {
        match self {
            Sector::Os => Weight::sin_sum(),
            Sector::Oa => Weight::sin_diff(),
            Sector::Ea => Weight::cos_diff(),
            Sector::Es => Weight::cos_sum_plus_two(),
        }
    }
}

impl std::fmt::Display for Sector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sector {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "os" => Ok(Sector::Os),
            "oa" => Ok(Sector::Oa),
            "ea" => Ok(Sector::Ea),
            "es" => Ok(Sector::Es),
            _ => Err(format!("unknown sector '{s}' (expected os, oa, ea, es)")),
        }
    }
}
