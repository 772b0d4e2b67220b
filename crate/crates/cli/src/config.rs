//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use adjoint_dae::problems::{build_problem, EnnpeIc, ProblemParams};
use adjoint_dae::{
    AdjointPath, DaeProblem, Dopri5Settings, NewtonSettings64, Qoi64, ReferenceBackend, ReferenceSettings, TimeGrid64,
};
use serde::Deserialize;

use crate::ConfigError;

pub const SCHEMA_VERSION: u32 = 1;

/// Raw config as written on disk. Everything except the problem, the sweep
/// lists and the QoI has a default.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub problem: String,
    #[serde(default)]
    pub params: ParamsSpec,
    pub dt: Vec<f64>,
    pub t_end: Vec<f64>,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_refinement")]
    pub r: usize,
    #[serde(default)]
    pub reference: ReferenceSpec,
    pub qoi: QoiSpec,
    #[serde(default)]
    pub newton: NewtonSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Initial error `(e_y(0), e_z(0))`; zero when absent.
    #[serde(default)]
    pub initial_error: Option<InitialErrorSpec>,
}

fn default_refinement() -> usize {
    4
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AdjointDae,
    AdjointOde,
    #[default]
    Both,
}

impl Method {
    pub fn paths(self) -> &'static [AdjointPath] {
        match self {
            Method::AdjointDae => &[AdjointPath::Dae],
            Method::AdjointOde => &[AdjointPath::Ode],
            Method::Both => &[AdjointPath::Dae, AdjointPath::Ode],
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub lambda: Option<f64>,
    pub ns: Option<usize>,
    pub d_c: Option<f64>,
    pub d_a: Option<f64>,
    /// `discrete` or `analytic`.
    pub ic: Option<String>,
    pub mass: Option<f64>,
    pub gravity: Option<f64>,
    pub length: Option<f64>,
}

impl ParamsSpec {
    pub fn resolve(&self) -> Result<ProblemParams<f64>, ConfigError> {
        let mut p = ProblemParams::default();
        if let Some(v) = self.lambda {
            p.lambda = v;
        }
        if let Some(v) = self.ns {
            p.ns = v;
        }
        if let Some(v) = self.d_c {
            p.d_c = v;
        }
        if let Some(v) = self.d_a {
            p.d_a = v;
        }
        if let Some(ic) = &self.ic {
            p.ennpe_ic = match ic.as_str() {
                "discrete" => EnnpeIc::Discrete,
                "analytic" => EnnpeIc::Analytic,
                other => return Err(ConfigError::Invalid(format!("unknown initial condition `{other}`"))),
            };
        }
        if let Some(v) = self.mass {
            p.pendulum.mass = v;
        }
        if let Some(v) = self.gravity {
            p.pendulum.gravity = v;
        }
        if let Some(v) = self.length {
            p.pendulum.length = v;
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// `rk-adaptive`, `fine-bdf-richardson` or `analytic`.
    #[serde(default = "default_backend")]
    pub backend: String,
    pub atol: Option<f64>,
    pub rtol: Option<f64>,
    pub richardson_factor: Option<usize>,
    pub fallback: Option<bool>,
}

fn default_backend() -> String {
    "rk-adaptive".into()
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self { backend: default_backend(), atol: None, rtol: None, richardson_factor: None, fallback: None }
    }
}

impl ReferenceSpec {
    pub fn resolve(&self) -> Result<ReferenceSettings<f64>, ConfigError> {
        let backend = match self.backend.as_str() {
            "rk-adaptive" => ReferenceBackend::RkAdaptive,
            "fine-bdf-richardson" => ReferenceBackend::FineBdfRichardson,
            "analytic" => ReferenceBackend::Analytic,
            other => return Err(ConfigError::Invalid(format!("unknown reference backend `{other}`"))),
        };
        let mut s = ReferenceSettings { backend, ..ReferenceSettings::default() };
        let dopri: &mut Dopri5Settings<f64> = &mut s.dopri;
        if let Some(v) = self.atol {
            dopri.atol = v;
        }
        if let Some(v) = self.rtol {
            dopri.rtol = v;
        }
        if let Some(v) = self.richardson_factor {
            if v < 1 {
                return Err(ConfigError::Invalid("richardson_factor must be at least 1".into()));
            }
            s.richardson_factor = v;
        }
        if let Some(v) = self.fallback {
            s.fallback = v;
        }
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QoiKindSpec {
    Cumulative,
    Terminal,
}

/// Constant weights. Each vector is given either in full or as a block
/// pattern (`*_blocks`) whose entries are repeated over equal contiguous
/// blocks, so `[1, 0]` on a 100-vector sets the first 50 entries. Missing
/// vectors are zero.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QoiSpec {
    pub kind: QoiKindSpec,
    pub psi_y: Option<Vec<f64>>,
    pub psi_z: Option<Vec<f64>>,
    pub psi_y_blocks: Option<Vec<f64>>,
    pub psi_z_blocks: Option<Vec<f64>>,
    pub zeta_y: Option<Vec<f64>>,
    pub zeta_z: Option<Vec<f64>>,
    pub zeta_y_blocks: Option<Vec<f64>>,
    pub zeta_z_blocks: Option<Vec<f64>>,
}

fn weights(
    name: &str,
    full: &Option<Vec<f64>>,
    blocks: &Option<Vec<f64>>,
    len: usize,
) -> Result<Vec<f64>, ConfigError> {
    match (full, blocks) {
        (Some(_), Some(_)) => Err(ConfigError::Invalid(format!("{name}: give either the vector or its blocks"))),
        (Some(v), None) if v.len() != len => {
            Err(ConfigError::Invalid(format!("{name} has {} entries, problem needs {len}", v.len())))
        }
        (Some(v), None) => Ok(v.clone()),
        (None, Some(b)) => {
            if b.is_empty() || len % b.len() != 0 {
                return Err(ConfigError::Invalid(format!(
                    "{name}_blocks: {} blocks do not split {len} entries evenly",
                    b.len()
                )));
            }
            let width = len / b.len();
            Ok(b.iter().flat_map(|&w| std::iter::repeat(w).take(width)).collect())
        }
        (None, None) => Ok(vec![0.0; len]),
    }
}

impl QoiSpec {
    pub fn resolve(&self, n: usize, m: usize) -> Result<Qoi64, ConfigError> {
        match self.kind {
            QoiKindSpec::Cumulative => {
                if self.zeta_y.is_some() || self.zeta_z.is_some() || self.zeta_y_blocks.is_some() || self.zeta_z_blocks.is_some() {
                    return Err(ConfigError::Invalid("cumulative QoI takes psi weights only".into()));
                }
                let psi_y = weights("psi_y", &self.psi_y, &self.psi_y_blocks, n)?;
                let psi_z = weights("psi_z", &self.psi_z, &self.psi_z_blocks, m)?;
                Ok(Qoi64::cumulative_constant(psi_y, psi_z))
            }
            QoiKindSpec::Terminal => {
                if self.psi_y.is_some() || self.psi_z.is_some() || self.psi_y_blocks.is_some() || self.psi_z_blocks.is_some() {
                    return Err(ConfigError::Invalid("terminal QoI takes zeta weights only".into()));
                }
                let zeta_y = weights("zeta_y", &self.zeta_y, &self.zeta_y_blocks, n)?;
                let zeta_z = weights("zeta_z", &self.zeta_z, &self.zeta_z_blocks, m)?;
                Ok(Qoi64::terminal(zeta_y, zeta_z))
            }
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSpec {
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub max_halvings: Option<usize>,
    pub reuse_jacobian: Option<bool>,
}

impl NewtonSpec {
    pub fn resolve(&self) -> Result<NewtonSettings64, ConfigError> {
        let mut s = NewtonSettings64::default();
        if let Some(v) = self.tol {
            s.tol = v;
        }
        if let Some(v) = self.max_iters {
            s.max_iters = v;
        }
        if let Some(v) = self.max_halvings {
            s.max_halvings = v;
        }
        if let Some(v) = self.reuse_jacobian {
            s.reuse_jacobian = v;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Markdown,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialErrorSpec {
    pub y: Vec<f64>,
    #[serde(default)]
    pub z: Option<Vec<f64>>,
}

/// A config that passed validation, with the problem instantiated.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: Box<dyn DaeProblem<f64>>,
    pub qoi: Qoi64,
    pub newton: NewtonSettings64,
    pub reference: ReferenceSettings<f64>,
    pub initial_error: Option<(Vec<f64>, Vec<f64>)>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
        Self::from_toml(&text)
    }

    pub fn validate(self) -> Result<Experiment, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema(self.schema_version));
        }
        if self.dt.is_empty() || self.t_end.is_empty() {
            return Err(ConfigError::Invalid("dt and t_end need at least one value each".into()));
        }
        if self.r == 0 {
            return Err(ConfigError::Invalid("refinement factor r must be positive".into()));
        }
        let problem = build_problem::<f64>(&self.problem, &self.params.resolve()?)?;
        let (n, m) = (problem.n_differential(), problem.n_algebraic());
        let t0 = problem.initial_conditions().t0;
        // Every (dt, T) pair must give an integer step count.
        for &dt in &self.dt {
            for &t in &self.t_end {
                TimeGrid64::with_step(t0, t, dt)?;
            }
        }
        let qoi = self.qoi.resolve(n, m)?;
        let newton = self.newton.resolve()?;
        let reference = self.reference.resolve()?;
        let initial_error = match &self.initial_error {
            None => None,
            Some(e) => {
                let ez = e.z.clone().unwrap_or_else(|| vec![0.0; m]);
                if e.y.len() != n || ez.len() != m {
                    return Err(ConfigError::Invalid(format!("initial_error needs {n} + {m} entries")));
                }
                Some((e.y.clone(), ez))
            }
        };
        Ok(Experiment { config: self, problem, qoi, newton, reference, initial_error })
    }
}
