//! Built-in test problems with analytic Jacobians and consistent initial values.

mod ennpe;
mod pendulum;
mod petzold;
mod robertson;

pub use ennpe::{
    ennpe_analytic, ennpe_assemble, ennpe_initial_conditions, Ennpe, EnnpeAssembly, EnnpeIc,
};
pub use pendulum::{PendulumIndex1, PendulumIndex2, PendulumParams};
pub use petzold::Petzold;
pub use robertson::Robertson;

use crate::dae::{DaeIndex, DaeProblem};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parameters for [`build_problem`]; each problem reads only its own fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemParams<T> {
    pub pendulum: PendulumParams<T>,
    /// Petzold decay rate `λ`.
    pub lambda: T,
    /// ENNPE cell count `Ns` (`dx = 1 / Ns`).
    pub ns: usize,
    pub d_c: T,
    pub d_a: T,
    pub ennpe_ic: EnnpeIc,
}

impl<T: Real> Default for ProblemParams<T> {
    fn default() -> Self {
        Self {
            pendulum: PendulumParams::default(),
            lambda: -T::one(),
            ns: 50,
            d_c: T::one(),
            d_a: T::lit(2.0),
            ennpe_ic: EnnpeIc::Discrete,
        }
    }
}

/// Catalogue entry for a built-in problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProblemInfo {
    pub name: &'static str,
    pub index: DaeIndex,
    pub summary: &'static str,
    pub parameters: &'static str,
}

const CATALOGUE: [ProblemInfo; 5] = [
    ProblemInfo {
        name: "robertson",
        index: DaeIndex::One,
        summary: "Robertson chemical kinetics, y = [y1, y2], z = y3, y1 + y2 + z = 1",
        parameters: "none",
    },
    ProblemInfo {
        name: "pendulum1",
        index: DaeIndex::One,
        summary: "planar pendulum with the acceleration-level constraint",
        parameters: "mass (1), gravity (9.81), length (1)",
    },
    ProblemInfo {
        name: "petzold2",
        index: DaeIndex::Two,
        summary: "non-autonomous Hessenberg system with exact solution y1 = 1 + e^{λt}, y2 = e^{2λt}, z = λ",
        parameters: "lambda (-1)",
    },
    ProblemInfo {
        name: "pendulum2",
        index: DaeIndex::Two,
        summary: "planar pendulum with the velocity-level constraint y1 y3 + y2 y4 = 0",
        parameters: "mass (1), gravity (9.81), length (1)",
    },
    ProblemInfo {
        name: "ennpe",
        index: DaeIndex::Two,
        summary: "staggered-grid electro-neutral Nernst-Planck system, y = [C, A], z = W",
        parameters: "ns (50), d_c (1), d_a (2), ic (discrete | analytic)",
    },
];

pub fn list_problems() -> &'static [ProblemInfo] {
    &CATALOGUE
}

pub fn problem_info(name: &str) -> Result<&'static ProblemInfo> {
    CATALOGUE
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))
}

/// Instantiates a built-in problem by name.
pub fn build_problem<T: Real>(name: &str, params: &ProblemParams<T>) -> Result<Box<dyn DaeProblem<T>>> {
    match name {
        "robertson" => Ok(Box::new(Robertson)),
        "pendulum1" => {
            params.pendulum.validate()?;
            Ok(Box::new(PendulumIndex1 { params: params.pendulum }))
        }
        "pendulum2" => {
            params.pendulum.validate()?;
            Ok(Box::new(PendulumIndex2 { params: params.pendulum }))
        }
        "petzold2" => {
            if !params.lambda.is_finite() {
                return Err(Error::InvalidParams(format!("lambda = {}", params.lambda)));
            }
            Ok(Box::new(Petzold { lambda: params.lambda }))
        }
        "ennpe" => Ok(Box::new(Ennpe::new(params.ns, params.d_c, params.d_a, params.ennpe_ic)?)),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}
