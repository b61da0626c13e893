//! Model files: JSON documents declaring a chart, polynomial frames, an
//! orthonormal-frame metric and optional problem blocks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use geoctrl::control::ControlSystem;
use geoctrl::vecfield::{parse_polynomial, Chart, PolyVectorField};

/// The JSON shape of a model file. Frames map names to lists of vector
/// fields; each field is a list of component expression strings in the
/// declared coordinates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub dimension: usize,
    pub coordinates: Vec<String>,
    pub frames: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub problems: Vec<ProblemBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricDecl {
    pub orthonormal_frame: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemBlock {
    pub label: String,
    pub kind: String,
    pub point: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covector: Option<Vec<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_horizon() -> f64 {
    1.0
}
fn default_step() -> f64 {
    1e-3
}
fn default_tol() -> f64 {
    1e-6
}

/// A parsed model: the chart plus compiled frames.
pub struct Model {
    pub file: ModelFile,
    pub chart: Chart,
    pub frames: BTreeMap<String, Vec<PolyVectorField>>,
}

impl Model {
    /// The frame named by the metric declaration, else the single frame,
    /// else an error.
    pub fn main_frame(&self) -> anyhow::Result<&Vec<PolyVectorField>> {
        if let Some(metric) = &self.file.metric {
            return self.frames.get(&metric.orthonormal_frame).ok_or_else(|| {
                anyhow::anyhow!("metric frame `{}` not declared", metric.orthonormal_frame)
            });
        }
        if self.frames.len() == 1 {
            return Ok(self.frames.values().next().unwrap());
        }
        anyhow::bail!("model declares multiple frames and no metric; pick one")
    }

    pub fn control_system(&self) -> anyhow::Result<ControlSystem> {
        Ok(ControlSystem::new(
            self.chart.clone(),
            self.main_frame()?.clone(),
        )?)
    }
}

/// Parse and validate a model file. Expression errors carry the parser's
/// line/column within the offending expression string.
pub fn parse_model(src: &str) -> Result<Model, geoctrl::Error> {
    let file: ModelFile = serde_json::from_str(src).map_err(|e| geoctrl::Error::Parse {
        line: e.line(),
        col: e.column(),
        msg: format!("model file: {e}"),
    })?;
    if file.coordinates.len() != file.dimension {
        return Err(geoctrl::Error::Parse {
            line: 0,
            col: 0,
            msg: format!(
                "dimension {} does not match {} coordinates",
                file.dimension,
                file.coordinates.len()
            ),
        });
    }
    let chart = Chart::new(file.coordinates.clone())?;
    let mut frames = BTreeMap::new();
    for (name, fields) in &file.frames {
        let mut parsed = Vec::new();
        for (fi, components) in fields.iter().enumerate() {
            if components.len() != file.dimension {
                return Err(geoctrl::Error::Parse {
                    line: 0,
                    col: 0,
                    msg: format!(
                        "frame `{name}` field {fi}: {} components for dimension {}",
                        components.len(),
                        file.dimension
                    ),
                });
            }
            let polys = components
                .iter()
                .map(|expr| parse_polynomial(expr, &chart))
                .collect::<Result<Vec<_>, _>>()?;
            parsed.push(PolyVectorField::new(polys)?);
        }
        frames.insert(name.clone(), parsed);
    }
    Ok(Model {
        file,
        chart,
        frames,
    })
}

/// Render a model back to its JSON document (frames through the expression
/// printer, so the output re-parses to an equal model).
pub fn emit_model(model: &Model) -> String {
    let mut file = model.file.clone();
    file.frames = model
        .frames
        .iter()
        .map(|(name, fields)| {
            let rendered = fields
                .iter()
                .map(|f| {
                    f.components()
                        .iter()
                        .map(|p| p.display_with(model.chart.names()))
                        .collect()
                })
                .collect();
            (name.clone(), rendered)
        })
        .collect();
    serde_json::to_string_pretty(&file).expect("model serializes")
}

/// The three bundled example models.
pub fn bundled_models() -> Vec<ModelFile> {
    let m5 = ModelFile {
        name: "m5".into(),
        description: Some("Free-nilpotent rank-2 frame on R^5 with growth (2,3,5)".into()),
        dimension: 5,
        coordinates: (1..=5).map(|i| format!("x{i}")).collect(),
        frames: BTreeMap::from([(
            "D".to_string(),
            vec![
                vec!["1".into(), "0".into(), "0".into(), "0".into(), "0".into()],
                vec![
                    "0".into(),
                    "1".into(),
                    "x1".into(),
                    "(1/2)*x1^2".into(),
                    "x1*x2".into(),
                ],
            ],
        )]),
        metric: Some(MetricDecl {
            orthonormal_frame: "D".into(),
        }),
        problems: vec![
            ProblemBlock {
                label: "abnormal-line".into(),
                kind: "abnormal".into(),
                point: vec![0.0; 5],
                covector: Some(vec![0.0, 0.0, 0.0, 0.0, 1.0]),
                horizon: 1.0,
                step: 1e-3,
                tol: 1e-6,
            },
            ProblemBlock {
                label: "normal-generic".into(),
                kind: "normal".into(),
                point: vec![0.0; 5],
                covector: Some(vec![0.3, -0.2, 0.5, 0.1, -0.4]),
                horizon: 1.0,
                step: 1e-3,
                tol: 1e-6,
            },
        ],
    };
    let heisenberg = ModelFile {
        name: "heisenberg".into(),
        description: Some("Rank-2 contact frame on R^3".into()),
        dimension: 3,
        coordinates: vec!["x".into(), "y".into(), "z".into()],
        frames: BTreeMap::from([(
            "D".to_string(),
            vec![
                vec!["1".into(), "0".into(), "0".into()],
                vec!["0".into(), "1".into(), "x".into()],
            ],
        )]),
        metric: Some(MetricDecl {
            orthonormal_frame: "D".into(),
        }),
        problems: vec![ProblemBlock {
            label: "circle".into(),
            kind: "normal".into(),
            point: vec![0.0; 3],
            covector: Some(vec![0.0, 1.0, -2.0]),
            horizon: 1.5,
            step: 1e-3,
            tol: 1e-6,
        }],
    };
    let involutive = ModelFile {
        name: "involutive".into(),
        description: Some(
            "Involutive rank-2 frame on R^3; negative control for growth tests".into(),
        ),
        dimension: 3,
        coordinates: vec!["x".into(), "y".into(), "z".into()],
        frames: BTreeMap::from([(
            "D".to_string(),
            vec![
                vec!["1".into(), "0".into(), "0".into()],
                vec!["0".into(), "1".into(), "0".into()],
            ],
        )]),
        metric: Some(MetricDecl {
            orthonormal_frame: "D".into(),
        }),
        problems: vec![],
    };
    vec![m5, heisenberg, involutive]
}
