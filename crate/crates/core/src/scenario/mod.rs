//! The regime-switching model, its Lyapunov test functions, and per-regime
//! rate extraction.

mod generator;
mod model;
mod rates;
mod test_function;

pub use generator::{
    default_sample_points, strongly_connected, validate_generator, PointCheck, RateField,
    SwitchingGenerator, ValidationReport,
};
pub use model::{
    Coefficients, ConstantDiffusion, FnDiffusion, FnDrift, LinearDiffusion, LinearDrift,
    PowerClippedDiffusion, PowerClippedDrift, RegimeSpace, ScenarioModel, ZeroField,
};
pub(crate) use model::sigma_sigma_t;
pub use rates::{extract_rates, Annulus, Companion, GridSpec, RateMode, RateProvenance, RateVector};
pub use test_function::{
    apply_generator_l, CustomTestFunction, InfinityBehavior, TestFamily, TestFunctionSpec,
    ZeroBehavior,
};
