//! Multilevel norms, stable decompositions and diagonal additive Schwarz
//! preconditioners for negative-order Sobolev spaces on hierarchies of
//! newest-vertex-bisection triangulations.
//!
//! Piecewise constants P⁰(T_L) on the finest mesh are measured in
//! H^{-s}(Ω) (dual of H̃^s) or H̃^{-s}(Ω) (dual of H^s), 0 < s < 1. The fast
//! paths ([`mlnorm`], [`precond`]) run in time linear in the hierarchy size;
//! the dense reference paths ([`fem_oracles`], [`model_problems`]) realize the
//! norms as spectral interpolation between the discrete H^{-1} dual norm and
//! L², and serve as ground truth in the tests.

pub mod bench;
pub mod error;
pub mod fem_oracles;
pub mod linalg;
pub mod mesh;
pub mod mlnorm;
pub mod model_problems;
pub mod operators;
pub mod precond;
pub mod sampling;
pub mod spaces;
pub mod splitting;

pub use error::{Error, Result};

/// Which negative-order space is meant.
///
/// `Plain` is H^{-s}(Ω), tested against functions vanishing on Γ = ∂Ω;
/// `Tilde` is H̃^{-s}(Ω), tested against all of H^s(Ω).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Plain,
    Tilde,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Tilde => "tilde",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "tilde" => Ok(Variant::Tilde),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant `{other}` (expected plain or tilde)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
