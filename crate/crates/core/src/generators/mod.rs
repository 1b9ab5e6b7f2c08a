//! The nonlinearity `F`, its frozen version on a slab, terminal functionals, and
//! sampled assumption probes.

pub mod builtin;
mod spec;
pub mod terminal;
mod validate;

pub use spec::{
    freeze, Branch, BranchCoeffs, CoefSensitivities, Driver, DriverFn, DriverGradFn, DriverPartials, Envelope,
    EnvelopeBound, EnvelopeSigma, EvalFn, Form, FrozenGenerator, FrozenKey, GeneratorSpec, Modulus, PathFeatures,
    PathScalarFn, PathVectorFn, ScalarCoef, Structure, VectorCoef,
};
pub use terminal::{terminal_on_key, LinearFunctional, Summary, TerminalSpec};
pub use validate::{validate_assumptions, validate_assumptions_on, CheckResult, ValidationReport, Witness};
