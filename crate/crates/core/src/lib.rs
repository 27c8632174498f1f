//! Hypergraph signal processing with graph-expansion shift operators.
//!
//! The crate builds clique-expansion and line-graph shift operators from a
//! [`Hypergraph`], measures how spectrally similar two operators are, and
//! trains small polynomial-filter networks (plain GNNs and the two-stage HENN
//! model) whose output deviation can be bounded in terms of that similarity.

pub mod checkpoint;
pub mod dataset;
pub mod diffusion;
pub mod error;
pub mod filters;
pub mod gnn;
pub mod gso;
pub mod henn;
pub mod hypergraph;
pub mod randgraph;
pub mod spectral;
pub mod torus;
pub mod train;

pub use error::{Error, Result};
pub use filters::GraphFilter;
pub use gnn::{GnnModel, Nonlinearity};
pub use gso::{gso, GsoKind, ShiftOperator};
pub use henn::{Architecture, HennContext, HennModel};
pub use hypergraph::{Graph, Hypergraph};
pub use spectral::{spectral_similarity, SimilarityReport, Spectrum};

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`.
pub mod serde_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}
