//! JSON model configuration and the experiment presets.
//!
//! ```json
//! {"model": "rb", "I": [2, 1, 0.6667], "Ihat": [1, 2, 3],
//!  "sigma": [1, 1, 1], "y0": [0.45, 0.0, 0.89]}
//! ```
//! Complex entries for `se` are given as `[re, im]` pairs. Omitted fields
//! fall back to the preset defaults below.

use serde::Deserialize;

use crate::error::{Error, Result};

use super::{MaxwellBloch, Model, RigidBody, SineEuler};

#[derive(Debug, Deserialize)]
#[serde(tag = "model", deny_unknown_fields)]
enum ModelConfig {
    #[serde(rename = "mb")]
    Mb {
        sigma: Option<[f64; 2]>,
        y0: Option<[f64; 3]>,
    },
    #[serde(rename = "rb")]
    Rb {
        #[serde(rename = "I")]
        inertia: Option<[f64; 3]>,
        #[serde(rename = "Ihat")]
        noise_inertia: Option<[f64; 3]>,
        sigma: Option<[f64; 3]>,
        y0: Option<[f64; 3]>,
    },
    #[serde(rename = "se")]
    Se {
        sigma: Option<[f64; 4]>,
        y0: Option<[[f64; 2]; 4]>,
    },
}

/// A model together with the initial value an experiment starts from.
pub struct ModelSetup {
    pub model: Box<dyn Model>,
    pub y0: Vec<f64>,
}

fn build(cfg: ModelConfig) -> Result<ModelSetup> {
    match cfg {
        ModelConfig::Mb { sigma, y0 } => {
            let [s1, s3] = sigma.unwrap_or([1.0, 1.0]);
            if s1 < 0.0 || s3 < 0.0 {
                return Err(Error::Config("sigma entries must be >= 0".into()));
            }
            let model = MaxwellBloch::new(s1, s3);
            let y0 = y0.map(|v| v.to_vec()).unwrap_or_else(|| model.default_initial());
            Ok(ModelSetup {
                model: Box::new(model),
                y0,
            })
        }
        ModelConfig::Rb {
            inertia,
            noise_inertia,
            sigma,
            y0,
        } => {
            let model = RigidBody::new(
                inertia.unwrap_or([2.0, 1.0, 2.0 / 3.0]),
                noise_inertia.unwrap_or([1.0, 2.0, 3.0]),
                sigma.unwrap_or([1.0; 3]),
            )?;
            let y0 = y0.map(|v| v.to_vec()).unwrap_or_else(|| model.default_initial());
            Ok(ModelSetup {
                model: Box::new(model),
                y0,
            })
        }
        ModelConfig::Se { sigma, y0 } => {
            let sigma = sigma.unwrap_or([1.0; 4]);
            if sigma.iter().any(|s| *s < 0.0) {
                return Err(Error::Config("sigma entries must be >= 0".into()));
            }
            let model = SineEuler::new(sigma);
            let y0 = match y0 {
                Some(pairs) => pairs.iter().flat_map(|[re, im]| [*re, *im]).collect(),
                None => model.default_initial(),
            };
            Ok(ModelSetup {
                model: Box::new(model),
                y0,
            })
        }
    }
}

pub fn from_json(text: &str) -> Result<ModelSetup> {
    let cfg: ModelConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    build(cfg)
}

pub fn from_json_file(path: &std::path::Path) -> Result<ModelSetup> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    from_json(&text)
}

/// Built-in presets reproducing the bundled experiments.
pub fn preset(name: &str) -> Result<ModelSetup> {
    match name {
        "mb" => from_json(r#"{"model": "mb"}"#),
        "rb" => from_json(r#"{"model": "rb"}"#),
        "se" => from_json(r#"{"model": "se"}"#),
        other => Err(Error::Config(format!(
            "unknown model preset '{other}' (expected mb, rb or se)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_expected_initial_values() {
        let mb = preset("mb").unwrap();
        assert_eq!(mb.y0, vec![1.0, 2.0, 3.0]);
        let rb = preset("rb").unwrap();
        assert!((rb.y0[0] - 1.1f64.cos()).abs() < 1e-15);
        assert_eq!(rb.y0[1], 0.0);
        let se = preset("se").unwrap();
        assert_eq!(se.y0.len(), 8);
        assert_eq!(se.y0[0], 0.1);
        assert_eq!(se.y0[1], 0.3);
    }

    #[test]
    fn explicit_fields_override_defaults() {
        let s = r#"{"model": "rb", "I": [3, 4, 5], "sigma": [0, 0, 0], "y0": [1, 0, 0]}"#;
        let setup = from_json(s).unwrap();
        assert_eq!(setup.y0, vec![1.0, 0.0, 0.0]);
        assert_eq!(setup.model.name(), "rb");
    }

    #[test]
    fn se_complex_pairs() {
        let s = r#"{"model": "se", "y0": [[0.1, 0.3], [0.2, 0.3], [0.3, 0.2], [0.4, 0.1]]}"#;
        let setup = from_json(s).unwrap();
        assert_eq!(setup.y0, vec![0.1, 0.3, 0.2, 0.3, 0.3, 0.2, 0.4, 0.1]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(from_json(r#"{"model": "nope"}"#).is_err());
        assert!(from_json(r#"{"model": "rb", "I": [1, 1, 2]}"#).is_err());
        assert!(from_json(r#"{"model": "mb", "unknown_field": 3}"#).is_err());
        assert!(preset("xx").is_err());
    }
}
