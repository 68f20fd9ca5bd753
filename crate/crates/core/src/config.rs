//! Experiment configuration (TOML) and the shipped presets.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineConfig, HgoConfig, HosmConfig};
use crate::differentiators::{Realization, SdParams, Switch};
use crate::error::{Error, Result};
use crate::integrators::{Method, SimPlan};
use crate::metrics::MetricsConfig;
use crate::signals::{NoiseSpec, TestSignal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum MethodConfig {
    #[serde(rename = "sd-cascade")]
    SdCascade {
        k: f64,
        l: f64,
        #[serde(default = "default_stages")]
        stages: usize,
        #[serde(default)]
        switch: Switch,
        #[serde(default)]
        realization: Realization,
    },
    #[serde(rename = "hgo")]
    Hgo { c: [f64; 5], epsilon: f64 },
    #[serde(rename = "hosm")]
    Hosm {
        l: f64,
        #[serde(default = "default_hosm_switch")]
        final_switch: Switch,
    },
}

fn default_stages() -> usize {
    4
}

fn default_hosm_switch() -> Switch {
    Switch::Sgn
}

impl MethodConfig {
    /// Column prefix of the estimates this method produces.
    pub fn prefix(&self) -> &'static str {
        match self {
            MethodConfig::SdCascade { .. } => "sd",
            MethodConfig::Hgo { .. } => "hgo",
            MethodConfig::Hosm { .. } => "hosm",
        }
    }

    /// Highest derivative order estimated.
    pub fn orders(&self) -> usize {
        match self {
            MethodConfig::SdCascade { stages, .. } => *stages,
            _ => 4,
        }
    }

    pub fn sd_params(&self) -> Option<SdParams> {
        match *self {
            MethodConfig::SdCascade { k, l, switch, .. } => Some(SdParams { k, l, switch }),
            _ => None,
        }
    }

    pub fn baseline(&self) -> Option<BaselineConfig> {
        match *self {
            MethodConfig::Hgo { c, epsilon } => Some(BaselineConfig::Hgo(HgoConfig { c, epsilon })),
            MethodConfig::Hosm { l, final_switch } => {
                Some(BaselineConfig::Hosm(HosmConfig { l, final_switch }))
            }
            MethodConfig::SdCascade { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let checked = match self {
            MethodConfig::SdCascade { stages, .. } if *stages == 0 => {
                Err(Error::param("stages", "must be at least 1"))
            }
            MethodConfig::SdCascade { .. } => self.sd_params().expect("sd variant").validate(),
            _ => self.baseline().expect("baseline variant").validate(),
        };
        checked.map_err(|e| prefix_field(e, "method"))
    }
}

fn prefix_field(e: Error, section: &str) -> Error {
    match e {
        Error::InvalidParameter { field, reason } if !field.contains('.') => {
            Error::InvalidParameter {
                field: format!("{section}.{field}"),
                reason,
            }
        }
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub integrator: Method,
}

fn default_stride() -> usize {
    100
}

impl PlanConfig {
    pub fn sim_plan(&self) -> SimPlan {
        SimPlan {
            t_start: self.t_start,
            t_end: self.t_end,
            dt: self.dt,
            record_stride: self.record_stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub signal: TestSignal,
    pub method: MethodConfig,
    pub plan: PlanConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let name_ok = !self.name.is_empty()
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if !name_ok {
            return Err(Error::param("name", "use letters, digits, '-', '_' or '.'"));
        }
        self.signal
            .validate()
            .map_err(|e| prefix_field(e, "signal"))?;
        self.method.validate()?;
        let plan = self.plan.sim_plan();
        plan.validate().map_err(|e| match e {
            Error::InvalidPlan(msg) => Error::param("plan", msg),
            other => prefix_field(other, "plan"),
        })?;
        self.noise.validate()?;
        self.metrics.validate()?;
        let slack = 1e-9 * plan.record_dt();
        for (field, (a, b)) in [
            ("metrics.steady_window", self.metrics.steady_window),
            ("metrics.chatter_window", self.metrics.chatter_window),
        ] {
            if a < plan.t_start - slack || b > plan.t_end + slack {
                return Err(Error::param(
                    field,
                    "must lie within [plan.t_start, plan.t_end]",
                ));
            }
        }
        Ok(())
    }

    /// The same config with `realization = "auto"` replaced by the choice
    /// the simulation will make.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        if let MethodConfig::SdCascade { realization, .. } = &mut cfg.method {
            if *realization == Realization::Auto {
                *realization = if self.noise.is_active() {
                    Realization::Direct
                } else {
                    Realization::ErrorCoordinates
                };
            }
        }
        cfg
    }

    /// TOML text of the resolved config without the output location, which
    /// is embedded in every output file.
    pub fn header(&self) -> String {
        #[derive(Serialize)]
        struct Header<'a> {
            name: &'a str,
            #[serde(skip_serializing_if = "str::is_empty")]
            description: &'a str,
            signal: &'a TestSignal,
            method: &'a MethodConfig,
            plan: &'a PlanConfig,
            noise: &'a NoiseSpec,
            metrics: &'a MetricsConfig,
        }
        let cfg = self.resolved();
        toml::to_string(&Header {
            name: &cfg.name,
            description: &cfg.description,
            signal: &cfg.signal,
            method: &cfg.method,
            plan: &cfg.plan,
            noise: &cfg.noise,
            metrics: &cfg.metrics,
        })
        .expect("config serializes to TOML")
    }

    /// Parses a header written by [`ExperimentConfig::header`].
    pub fn from_header(text: &str) -> Result<Self> {
        Self::from_toml_str(text)
    }
}

pub const PRESET_NAMES: [&str; 4] = ["sd-paper-1", "sd-paper-2", "hgo-paper", "hosm-paper"];

fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "sd-paper-1" => include_str!("../presets/sd-paper-1.toml"),
        "sd-paper-2" => include_str!("../presets/sd-paper-2.toml"),
        "hgo-paper" => include_str!("../presets/hgo-paper.toml"),
        "hosm-paper" => include_str!("../presets/hosm-paper.toml"),
        _ => return None,
    })
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = preset_text(name).ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    ExperimentConfig::from_toml_str(text)
}

/// Preset TOML source as shipped.
pub fn preset_source(name: &str) -> Result<&'static str> {
    preset_text(name).ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.name, name);
            assert_eq!(cfg.signal, TestSignal::paper());
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn preset_parameters() {
        let sd1 = preset("sd-paper-1").unwrap();
        let p = sd1.method.sd_params().unwrap();
        assert_eq!((p.k, p.l), (3000.0, 3000.0));
        assert_eq!(p.switch, Switch::Sat { epsilon: 1e-4 });
        assert_eq!(sd1.plan.dt, 1e-6);
        assert_eq!((sd1.plan.t_start, sd1.plan.t_end), (0.0, 2.0));
        let p2 = preset("sd-paper-2").unwrap().method.sd_params().unwrap();
        assert_eq!((p2.k, p2.l), (5000.0, 10000.0));
        assert_eq!(
            preset("hgo-paper").unwrap().method.baseline(),
            Some(BaselineConfig::Hgo(HgoConfig::paper()))
        );
        let hosm = preset("hosm-paper").unwrap();
        assert_eq!(
            hosm.method.baseline(),
            Some(BaselineConfig::Hosm(HosmConfig::paper()))
        );
        assert_eq!(hosm.plan.dt, 1e-7);
        assert_eq!(hosm.plan.t_end, 0.5);
    }

    #[test]
    fn header_round_trips() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            let back = ExperimentConfig::from_header(&cfg.header()).unwrap();
            assert_eq!(back.output, OutputConfig::default());
            assert_eq!(
                back,
                ExperimentConfig {
                    output: OutputConfig::default(),
                    ..cfg.resolved()
                }
            );
        }
    }

    #[test]
    fn invalid_fields_are_named() {
        let text = preset_source("sd-paper-1")
            .unwrap()
            .replace("k = 3000.0", "k = -1.0");
        let err = ExperimentConfig::from_toml_str(&text)
            .unwrap_err()
            .to_string();
        assert!(err.contains("method.k"), "{err}");

        let text = preset_source("sd-paper-1")
            .unwrap()
            .replace("dt = 1e-6", "dt = 0.0");
        let err = ExperimentConfig::from_toml_str(&text)
            .unwrap_err()
            .to_string();
        assert!(err.contains("plan"), "{err}");

        let text = preset_source("hosm-paper").unwrap().replace(
            "chatter_window = [0.25, 0.5]",
            "chatter_window = [0.25, 3.0]",
        );
        let err = ExperimentConfig::from_toml_str(&text)
            .unwrap_err()
            .to_string();
        assert!(err.contains("metrics.chatter_window"), "{err}");

        let err = ExperimentConfig::from_toml_str("name = \"x\"\nbogus = 1").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn auto_realization_resolves() {
        let cfg = preset("sd-paper-1").unwrap().resolved();
        assert!(matches!(
            cfg.method,
            MethodConfig::SdCascade {
                realization: Realization::ErrorCoordinates,
                ..
            }
        ));
        let mut noisy = preset("sd-paper-1").unwrap();
        noisy.noise = NoiseSpec {
            kind: crate::signals::NoiseKind::Uniform,
            magnitude: 1e-3,
            seed: 3,
        };
        assert!(matches!(
            noisy.resolved().method,
            MethodConfig::SdCascade {
                realization: Realization::Direct,
                ..
            }
        ));
    }
}
