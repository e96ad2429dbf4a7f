//! Scenario files: grid, background, source term, initial potential, time
//! integration and diagnostics, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chern::gauduchon_from_potential;
use crate::error::{Error, Result};
use crate::flow::{manufacture_psi, Background, FlowOptions};
use crate::grid::{resample, Grid, ScalarField, StencilOrder, DEFAULT_PERIOD, DEFAULT_POINTS};
use crate::io::read_scalar_field;
use crate::linalg::CMat;
use crate::trig::TrigPoly;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    #[serde(rename = "N", default = "default_points")]
    pub points: usize,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default)]
    pub stencil_order: StencilOrder,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub background: BackgroundSpec,
    #[serde(default)]
    pub psi: PsiSpec,
    #[serde(default)]
    pub u0: InitialSpec,
    #[serde(default)]
    pub flow: FlowOptions,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_points() -> usize {
    DEFAULT_POINTS
}

fn default_period() -> f64 {
    DEFAULT_PERIOD
}

/// Background metric. `beta` is the identity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackgroundSpec {
    #[default]
    FlatKahler,
    /// `alpha^{n-1} = beta^{n-1} + eps i ddbar v ^ beta^{n-2}`.
    GauduchonPotential { v: TrigPoly, eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiSpec {
    #[default]
    Zero,
    /// `psi` chosen so that `u_star` is stationary with `b = 0`.
    Manufactured {
        u_star: TrigPoly,
    },
    Explicit {
        terms: TrigPoly,
    },
    /// Field dump written by `manufacture`, resampled to the grid when the
    /// resolution differs. Relative paths are taken from the config file.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    Zero,
    Trig {
        terms: TrigPoly,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSpec {
    pub harnack: bool,
    pub alpha_c: f64,
    pub gauduchon_residual: bool,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec {
            harnack: false,
            alpha_c: 2.0,
            gauduchon_residual: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Steps between periodic checkpoints; 0 writes one only on interrupt.
    pub checkpoint_every: u64,
}

impl ScenarioConfig {
    /// Defaults for everything but the dimension.
    pub fn new(n: usize) -> Self {
        ScenarioConfig {
            n,
            points: DEFAULT_POINTS,
            period: DEFAULT_PERIOD,
            stencil_order: StencilOrder::default(),
            seed: 0,
            background: BackgroundSpec::default(),
            psi: PsiSpec::default(),
            u0: InitialSpec::default(),
            flow: FlowOptions::default(),
            diagnostics: DiagnosticsSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path == "." { String::new() } else { path },
                e.inner().message().trim().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        self.validate()?;
        toml::to_string(self).map_err(|e| Error::config("", e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.n, self.points, self.period)?.with_order(self.stencil_order))
    }

    /// Range checks that do not need the grid fields.
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.n) {
            return Err(Error::config("n", format!("{} not in {{2, 3}}", self.n)));
        }
        if self.points < 8 || !self.points.is_multiple_of(2) {
            return Err(Error::config("N", format!("{} must be even and at least 8", self.points)));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::config("period", format!("{} must be positive", self.period)));
        }
        let dim = 2 * self.n;
        let check_poly = |path: &str, p: &TrigPoly| -> Result<()> {
            if let Some(k) = p.dimension_mismatch(dim) {
                return Err(Error::config(
                    format!("{path}[{k}].freq"),
                    format!("expected {dim} entries, got {}", p.0[k].freq.len()),
                ));
            }
            if let Some(k) = p.0.iter().position(|t| !t.amp.is_finite() || !t.phase.is_finite()) {
                return Err(Error::config(format!("{path}[{k}]"), "amplitude and phase must be finite"));
            }
            Ok(())
        };
        if let BackgroundSpec::GauduchonPotential { v, eps } = &self.background {
            check_poly("background.v", v)?;
            if !eps.is_finite() {
                return Err(Error::config("background.eps", "must be finite"));
            }
        }
        match &self.psi {
            PsiSpec::Manufactured { u_star } => check_poly("psi.u_star", u_star)?,
            PsiSpec::Explicit { terms } => check_poly("psi.terms", terms)?,
            _ => {}
        }
        if let InitialSpec::Trig { terms } = &self.u0 {
            check_poly("u0.terms", terms)?;
        }
        let f = &self.flow;
        let positive = [
            ("flow.cfl", f.cfl),
            ("flow.tol_osc", f.tol_osc),
            ("flow.t_max", f.t_max),
            ("flow.dt_min", f.dt_min),
        ];
        for (path, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(path, format!("{v} must be positive")));
            }
        }
        if f.sample_every == 0 {
            return Err(Error::config("flow.sample_every", "must be at least 1"));
        }
        // TOML integers are signed
        let integers = [
            ("seed", self.seed),
            ("flow.sample_every", f.sample_every),
            ("output.checkpoint_every", self.output.checkpoint_every),
        ];
        for (path, v) in integers {
            if i64::try_from(v).is_err() {
                return Err(Error::config(path, format!("{v} exceeds {}", i64::MAX)));
            }
        }
        let a = self.diagnostics.alpha_c;
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::config("diagnostics.alpha_c", format!("{a} must exceed 1")));
        }
        Ok(())
    }

    /// Builds the grid fields. `base` resolves relative file paths.
    pub fn build(&self, base: &Path) -> Result<Scenario> {
        self.validate()?;
        let grid = self.grid()?;
        let n = self.n;
        let beta = CMat::identity(n);
        let zero = ScalarField::zeros(grid);
        let bg = match &self.background {
            BackgroundSpec::FlatKahler => Background::flat(grid, &beta, zero)?,
            BackgroundSpec::GauduchonPotential { v, eps } => {
                let alpha =
                    gauduchon_from_potential(&v.sample(grid), &beta, *eps).map_err(|e| positivity("background.eps", e))?;
                Background::new(alpha.clone(), alpha, zero).map_err(|e| positivity("background.eps", e))?
            }
        };
        let mut u_star = None;
        let psi = match &self.psi {
            PsiSpec::Zero => None,
            PsiSpec::Manufactured { u_star: spec } => {
                let us = spec.sample(grid);
                let psi = manufacture_psi(&us, &bg).map_err(|e| positivity("psi.u_star", e))?;
                u_star = Some(us);
                Some(psi)
            }
            PsiSpec::Explicit { terms } => Some(terms.sample(grid)),
            PsiSpec::File { path } => {
                let full = base.join(path);
                let (_, field) =
                    read_scalar_field(&full).map_err(|e| Error::config("psi.path", format!("{}: {e}", full.display())))?;
                Some(resample(&field, grid).map_err(|e| Error::config("psi.path", e.to_string()))?)
            }
        };
        let bg = match psi {
            Some(psi) => bg.with_psi(psi),
            None => bg,
        };
        let u0 = match &self.u0 {
            InitialSpec::Zero => ScalarField::zeros(grid),
            InitialSpec::Trig { terms } => terms.sample(grid),
        };
        Ok(Scenario {
            config: self.clone(),
            grid,
            background: bg,
            u0,
            u_star,
        })
    }
}

fn positivity(path: &str, e: Error) -> Error {
    match e {
        Error::PositivityLoss { .. } | Error::NotPositive { .. } => Error::config(path, e.to_string()),
        other => other,
    }
}

/// Reads, validates and builds a scenario file.
pub fn load_config(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let cfg = ScenarioConfig::from_toml(&text)?;
    cfg.build(path.parent().unwrap_or(Path::new(".")))
}

/// A validated configuration with its fields on the grid.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: Grid,
    pub background: Background,
    pub u0: ScalarField,
    /// The manufactured solution, when `psi` was manufactured.
    pub u_star: Option<ScalarField>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(text: &str) -> Result<Scenario> {
        ScenarioConfig::from_toml(text)?.build(Path::new("."))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ScenarioConfig::from_toml("n = 2").unwrap();
        assert_eq!(cfg, ScenarioConfig::new(2));
        assert_eq!(cfg.points, 24);
        let back = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_field_is_named() {
        let e = ScenarioConfig::from_toml("n = 2\n[flow]\ncfll = 0.1")
            .unwrap_err()
            .to_string();
        assert!(e.contains("cfll"), "{e}");
        let e = ScenarioConfig::from_toml("n = 2\nbogus = 1").unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");
    }

    #[test]
    fn validation_names_field_path() {
        let e = ScenarioConfig::from_toml("n = 4").unwrap_err().to_string();
        assert!(e.contains("`n`"), "{e}");
        let e = ScenarioConfig::from_toml("n = 2\nN = 9").unwrap_err().to_string();
        assert!(e.contains("`N`"), "{e}");
        let e = ScenarioConfig::from_toml("n = 2\n[diagnostics]\nalpha_c = 1.0")
            .unwrap_err()
            .to_string();
        assert!(e.contains("diagnostics.alpha_c"), "{e}");
        let text = "n = 2\n[background]\nkind = \"gauduchon_potential\"\neps = 0.1\nv = [{ amp = 1.0, freq = [1, 0, 0] }]";
        let e = ScenarioConfig::from_toml(text).unwrap_err().to_string();
        assert!(e.contains("background.v[0].freq"), "{e}");
    }

    #[test]
    fn oversized_eps_names_the_failing_point() {
        let text =
            "n = 2\nN = 8\n[background]\nkind = \"gauduchon_potential\"\neps = 5.0\nv = [{ amp = 1.0, freq = [1, 0, 0, 1] }]";
        let e = build(text).unwrap_err().to_string();
        assert!(e.contains("background.eps") && e.contains("at x = ["), "{e}");
    }

    #[test]
    fn manufactured_scenario_builds() {
        let text = "n = 2\nN = 8\n[psi]\nkind = \"manufactured\"\nu_star = [{ amp = 0.05, freq = [1, 0, -1, 0] }, { amp = -0.05, freq = [1, 0, 1, 0] }]";
        let s = build(text).unwrap();
        let us = s.u_star.unwrap();
        assert!(us.max_abs() > 0.09);
        assert!(s.background.psi.max_abs() > 0.0);
    }
}
