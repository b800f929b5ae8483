//! JSON scenario configuration schema.

use serde::Deserialize;

/// One state variable of an inline system definition.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDef {
    pub name: String,
    /// Restrict the component to strictly positive values.
    #[serde(default)]
    pub positive: bool,
}

/// A system given directly in the config: one expression per state derivative
/// in the state names and `u`, plus an output expression.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    pub states: Vec<StateDef>,
    pub equations: Vec<String>,
    pub output: String,
}

/// Either a builtin bundle name or an inline definition.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SystemRef {
    Builtin(String),
    Inline(InlineSystem),
}

/// Input signal description.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalDef {
    Constant {
        value: f64,
    },
    Sinusoid {
        offset: f64,
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    Ramp {
        offset: f64,
        slope: f64,
    },
    Table {
        points: Vec<(f64, f64)>,
        #[serde(default)]
        hold: bool,
    },
    DayNight {
        period: f64,
        night: f64,
        day: f64,
    },
}

/// Which state-transformation family scales which components; used by
/// check-equivariance for inline systems.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDef {
    /// Components multiplied by `e^p`; the rest stay fixed.
    pub scaled: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisDef {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub log: bool,
}

fn default_rtol() -> f64 {
    1e-8
}

fn default_atol() -> f64 {
    1e-10
}

fn default_samples() -> usize {
    100
}

fn default_n_starts() -> usize {
    128
}

// no deny_unknown_fields here: the enum is flattened into ScenarioConfig and
// shares its map with the rtol/atol/out fields
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    /// Integrate a system in original coordinates.
    Simulate {
        system: SystemRef,
        signal: SignalDef,
        x0: Vec<f64>,
        t_span: (f64, f64),
    },
    /// Integrate a builtin normal form and record its channels.
    SimulateNormalForm {
        normal_form: String,
        signal: SignalDef,
        z0: Vec<f64>,
        #[serde(default)]
        p_hat0: f64,
        t_span: (f64, f64),
    },
    /// Residual sweep of the equivariance identities.
    CheckEquivariance {
        system: SystemRef,
        /// "scaling" or "translation".
        #[serde(default)]
        group: Option<String>,
        family: Option<FamilyDef>,
        x_box: Vec<AxisDef>,
        u_box: AxisDef,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    /// Residual sweep of the PDE conditions on builtin coordinate changes.
    CheckPde {
        bundle: String,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    /// Find and classify constant transmissible inputs.
    Transmissible {
        normal_form: String,
        z_box: Vec<AxisDef>,
        u_box: AxisDef,
        #[serde(default = "default_n_starts")]
        n_starts: usize,
    },
    /// Apply a gauge reparametrization and report the transmissible inputs
    /// of the gauged normal form.
    Gauge {
        normal_form: String,
        /// Expression in the z names (`z1`, `z2`, ...) for the gauge
        /// function.
        tau: String,
        z_box: Vec<AxisDef>,
        u_box: AxisDef,
        #[serde(default = "default_n_starts")]
        n_starts: usize,
    },
    /// Rectify the group action at query points and compare with the
    /// bundled analytic coordinates.
    Rectify {
        bundle: String,
        points: Vec<Vec<f64>>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    /// Scaled input/output comparison: run a bundle with an input and its
    /// transformed version from matched initial states; the outputs must
    /// coincide.
    ScaledIo {
        bundle: String,
        signal: SignalDef,
        x0: Vec<f64>,
        p: f64,
        t_span: (f64, f64),
        #[serde(default)]
        tolerance: Option<f64>,
    },
    /// Nullclines of a two-dimensional variable part at a fixed back
    /// transformed input, with the equilibria marked.
    Nullclines {
        normal_form: String,
        u_hat: f64,
        z_box: Vec<AxisDef>,
        #[serde(default = "default_samples")]
        grid: usize,
    },
    /// Drive the oscillator normal form with a periodic input and its
    /// transformed version; the estimator difference must settle at the
    /// transformation parameter while the output channel amplitude is
    /// unchanged.
    OscillatorComparison {
        normal_form: String,
        signal: SignalDef,
        z0: Vec<f64>,
        p: f64,
        horizon: f64,
        /// Averaging window at the end of the horizon.
        window: f64,
        #[serde(default)]
        tolerance: Option<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScenarioConfig {
    #[serde(flatten)]
    pub scenario: Scenario,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub out: Option<String>,
}

impl ScenarioConfig {
    /// Structural validation beyond what serde enforces.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err("rtol and atol must be positive".into());
        }
        match &self.scenario {
            Scenario::Simulate { system, x0, .. } => {
                if let SystemRef::Inline(sys) = system {
                    validate_inline(sys)?;
                    if x0.len() != sys.states.len() {
                        return Err(format!(
                            "x0 has {} entries, system has {} states",
                            x0.len(),
                            sys.states.len()
                        ));
                    }
                }
            }
            Scenario::CheckEquivariance { system, family, .. } => {
                if let SystemRef::Inline(sys) = system {
                    validate_inline(sys)?;
                    if family.is_none() {
                        return Err(
                            "check-equivariance on an inline system needs a family".into()
                        );
                    }
                }
            }
            Scenario::Transmissible { n_starts, .. } | Scenario::Gauge { n_starts, .. } => {
                if *n_starts == 0 {
                    return Err("n_starts must be at least 1".into());
                }
            }
            Scenario::Rectify { points, .. } => {
                if points.is_empty() {
                    return Err("rectify needs at least one query point".into());
                }
            }
            Scenario::Nullclines { grid, .. } => {
                if *grid < 2 {
                    return Err("nullcline grid must be at least 2".into());
                }
            }
            Scenario::OscillatorComparison {
                horizon, window, ..
            }
                if !(*window > 0.0 && *horizon > *window) => {
                    return Err("need horizon > window > 0".into());
                }
            _ => {}
        }
        Ok(())
    }
}

fn validate_inline(sys: &InlineSystem) -> Result<(), String> {
    if sys.states.is_empty() {
        return Err("inline system needs at least one state".into());
    }
    if sys.states.len() != sys.equations.len() {
        return Err(format!(
            "inline system has {} states but {} equations",
            sys.states.len(),
            sys.equations.len()
        ));
    }
    let mut seen = std::collections::HashSet::new();
    for s in &sys.states {
        if s.name == "u" || !seen.insert(&s.name) {
            return Err(format!("bad or duplicate state name '{}'", s.name));
        }
    }
    Ok(())
}
