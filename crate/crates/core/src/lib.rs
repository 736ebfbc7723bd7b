//! Numerical laboratory for fractal measures on the line and in the plane:
//! exact Fourier transforms of atomic/step/product measures, dyadic band
//! envelopes with decay-exponent fits, ball-mass (Frostman and heavy-ball)
//! profiles, several concrete Cantor-type and random-image constructions,
//! prime-periodized measures, and numerical frame-nonexistence criteria.

pub mod arc;
pub mod brownian;
pub mod bump;
pub mod cantor;
pub mod convolution;
pub mod criteria;
pub mod envelope;
pub mod error;
pub mod kaufman;
pub mod measure;
pub mod numeric;
pub mod rng;

pub use envelope::{BallProfile, Band, BallSample, FourierProfile, Sampling, Side};
pub use error::{Error, Result};
pub use measure::{AtomicMeasure, MeasureRef, ProductMeasure, StepDensity, Window};
