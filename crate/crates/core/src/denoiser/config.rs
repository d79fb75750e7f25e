use crate::dist::DigammaMode;
use crate::error::{Error, Result};

/// Prior family used by module B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PriorVariant {
    /// Per-element Gamma precisions for the large component.
    TsgmLvd,
    /// One pooled large-component precision per subcarrier.
    Tsgm,
    /// Spike at zero instead of the near-zero Gaussian; pooled slab precision.
    Bg,
}

impl PriorVariant {
    pub fn name(self) -> &'static str {
        match self {
            PriorVariant::TsgmLvd => "hmp-tsgm-lvd",
            PriorVariant::Tsgm => "hmp-tsgm",
            PriorVariant::Bg => "hmp-bg",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hmp-tsgm-lvd" | "tsgm-lvd" => Some(PriorVariant::TsgmLvd),
            "hmp-tsgm" | "tsgm" => Some(PriorVariant::Tsgm),
            "hmp-bg" | "bg" => Some(PriorVariant::Bg),
            _ => None,
        }
    }
}

/// Where the backward sweep is anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpwardInit {
    /// `λ↑_N = 1/2`; `λ⇑_N` then includes the evidence at `N`.
    #[default]
    FactorMessage,
    /// `λ⇑_N = 1/2` directly.
    VariableMessage,
}

/// Hyperprior parameters and switches for module B.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub variant: PriorVariant,
    /// Gamma prior (shape, rate) of each large-component precision.
    pub eps0: f64,
    pub eta0: f64,
    /// Gamma prior (shape, rate) of the near-zero precision.
    pub alpha0: f64,
    pub beta0: f64,
    /// Beta prior of `p10`.
    pub e0: f64,
    pub f0: f64,
    /// Beta prior of `p01`.
    pub c0: f64,
    pub d0: f64,
    /// Turbo iteration budget `T`.
    pub max_iters: usize,
    pub digamma: DigammaMode,
    /// Use `e^{ψ(ε̂)}/η̂` instead of `e^{ψ(ε̂)}/ε̂` as mixture weight.
    pub std_gamma_weight: bool,
    /// Re-initialise beliefs from the priors at every pass.
    pub reset_beliefs: bool,
    pub upward_init: UpwardInit,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            variant: PriorVariant::TsgmLvd,
            eps0: 1.0,
            eta0: 1.0,
            alpha0: 1.0,
            beta0: 0.01,
            e0: 1.0,
            f0: 1.0,
            c0: 1.0,
            d0: 1.0,
            max_iters: 20,
            digamma: DigammaMode::Approx,
            std_gamma_weight: false,
            reset_beliefs: false,
            upward_init: UpwardInit::FactorMessage,
        }
    }
}

impl PriorConfig {
    pub fn with_variant(variant: PriorVariant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params = [
            ("eps", self.eps0),
            ("eta", self.eta0),
            ("alpha", self.alpha0),
            ("beta", self.beta0),
            ("e", self.e0),
            ("f", self.f0),
            ("c", self.c0),
            ("d", self.d0),
        ];
        for (name, v) in params {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("prior parameter {name} must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}
