//! Per-model state shared by the threshold, determinant and spectrum layers.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::dispersion::{DispersionModel, MorseData};
use crate::error::Result;
use crate::sector::Sector;
use crate::thresholds::{EsConstants, SectorConstants};
use crate::torus_quad::{Kernel, QuadratureSpec, TorusQuadrature, Weight};

/// `4π²`, the torus area.
pub const TORUS_AREA: f64 = 4.0 * PI * PI;

#[derive(Debug)]
struct Kernels {
    rank_one: [Kernel; 3],
    unit: Kernel,
    cos_sum: Kernel,
    cos_sum_sq: Kernel,
}

/// A validated model with its quadrature and memoized constants.
#[derive(Debug)]
pub struct ModelContext {
    quad: TorusQuadrature,
    morse: MorseData,
    kernels: OnceLock<Kernels>,
    pub(crate) gammas: OnceLock<Result<SectorConstants>>,
    pub(crate) es: OnceLock<Result<EsConstants>>,
}

impl ModelContext {
    pub fn new(model: DispersionModel) -> Result<Self> {
        let spec = QuadratureSpec::for_model(&model);
        Self::with_spec(model, spec)
    }

    pub fn with_spec(model: DispersionModel, spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let morse = model.morse_data()?;
        Ok(Self {
            quad: TorusQuadrature::new(model, spec),
            morse,
            kernels: OnceLock::new(),
            gammas: OnceLock::new(),
            es: OnceLock::new(),
        })
    }

    pub fn model(&self) -> &DispersionModel {
        self.quad.model()
    }

    pub fn quadrature(&self) -> &TorusQuadrature {
        &self.quad
    }

    pub fn morse(&self) -> &MorseData {
        &self.morse
    }

    pub fn e_max(&self) -> f64 {
        self.morse.e_max
    }

    fn kernels(&self) -> &Kernels {
        self.kernels.get_or_init(|| Kernels {
            rank_one: Sector::RANK_ONE.map(|s| self.quad.kernel(&s.weight().square())),
            unit: self.quad.kernel(&Weight::unit()),
            cos_sum: self.quad.kernel(&Weight::cos_sum()),
            cos_sum_sq: self.quad.kernel(&Weight::cos_sum().square()),
        })
    }

    /// `(1/4π²) ∫ w_ω² / (α + gap)` for a rank-one sector.
    pub fn rank_one_integral(&self, sector: Sector, alpha: f64) -> f64 {
        let i = match sector {
            Sector::Os => 0,
            Sector::Oa => 1,
            Sector::Ea => 2,
            Sector::Es => panic!("es is not a rank-one sector"),
        };
        self.kernels().rank_one[i].eval(alpha, 1) / TORUS_AREA
    }

    /// Normalized es integrals `(B[1], B[cos q1 + cos q2], B[(cos q1 + cos q2)²]) / 4π²`.
    pub fn es_integrals(&self, alpha: f64) -> [f64; 3] {
        let k = self.kernels();
        [
            k.unit.eval(alpha, 1) / TORUS_AREA,
            k.cos_sum.eval(alpha, 1) / TORUS_AREA,
            k.cos_sum_sq.eval(alpha, 1) / TORUS_AREA,
        ]
    }
}
