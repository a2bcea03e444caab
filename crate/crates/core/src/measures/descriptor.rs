use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{AffineMap, Factor, MeasureModel, ModelKind};
use crate::error::{Error, Result};

/// JSON form of a model: `{"kind": ..., "dimension": n, "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    pub kind: String,
    pub dimension: usize,
    #[serde(default = "empty_params")]
    pub params: Value,
}

fn empty_params() -> Value {
    json!({})
}

fn number(params: &Value, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key) {
        None | Some(Value::Null) => default.ok_or_else(|| Error::input(format!("missing parameter `{key}`"))),
        Some(v) => v.as_f64().ok_or_else(|| Error::input(format!("parameter `{key}` must be a number"))),
    }
}

impl ModelDescriptor {
    pub fn to_model(&self) -> Result<MeasureModel> {
        let n = self.dimension;
        let p = &self.params;
        if !p.is_object() {
            return Err(Error::input("`params` must be an object"));
        }
        let model = match self.kind.as_str() {
            "isotropic_gaussian" => MeasureModel::gaussian(n)?,
            "uniform_ball" => {
                if p.get("radius").and_then(Value::as_str) == Some("unit_volume") {
                    MeasureModel::unit_volume_ball(n)?
                } else {
                    MeasureModel::ball(n, number(p, "radius", Some(1.0))?)?
                }
            }
            "uniform_cube" => MeasureModel::cube(n, number(p, "side", Some(1.0))?)?,
            "product_exponential_centered" => MeasureModel::exponential(n)?,
            "product_factors" => {
                let raw = p.get("factors").ok_or_else(|| Error::input("missing parameter `factors`"))?;
                let factors: Vec<Factor> = serde_json::from_value(raw.clone())
                    .map_err(|e| Error::input(format!("bad `factors`: {e}")))?;
                if factors.len() != n {
                    return Err(Error::input(format!("{} factors given for dimension {n}", factors.len())));
                }
                MeasureModel::product(factors)?
            }
            "affine_pushforward" => {
                let base: ModelDescriptor = serde_json::from_value(
                    p.get("base").cloned().ok_or_else(|| Error::input("missing parameter `base`"))?,
                )
                .map_err(|e| Error::input(format!("bad `base`: {e}")))?;
                let rows: Vec<Vec<f64>> = serde_json::from_value(
                    p.get("matrix").cloned().ok_or_else(|| Error::input("missing parameter `matrix`"))?,
                )
                .map_err(|e| Error::input(format!("bad `matrix`: {e}")))?;
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::input(format!("`matrix` must be {n}x{n}")));
                }
                let shift: Vec<f64> = match p.get("shift") {
                    None | Some(Value::Null) => vec![0.0; n],
                    Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::input(format!("bad `shift`: {e}")))?,
                };
                if shift.len() != n {
                    return Err(Error::input(format!("`shift` must have length {n}")));
                }
                let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                let map = AffineMap::new(matrix, DVector::from_vec(shift))?;
                MeasureModel::pushforward(&base.to_model()?, map)?
            }
            other => return Err(Error::input(format!("unknown model kind `{other}`"))),
        };
        if model.dimension() != n {
            return Err(Error::input("dimension mismatch between descriptor and base model"));
        }
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::input(format!("invalid model descriptor: {e}")))
    }
}

impl MeasureModel {
    pub fn descriptor(&self) -> ModelDescriptor {
        let n = self.dimension();
        let (kind, params) = match self.kind() {
            ModelKind::IsotropicGaussian => ("isotropic_gaussian", json!({})),
            ModelKind::UniformBall { radius } => ("uniform_ball", json!({ "radius": radius })),
            ModelKind::UniformCube { side } => ("uniform_cube", json!({ "side": side })),
            ModelKind::ProductExponentialCentered => ("product_exponential_centered", json!({})),
            ModelKind::ProductFactors(f) => ("product_factors", json!({ "factors": f })),
            ModelKind::AffinePushforward { base, map } => {
                let m = map.matrix();
                let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
                let shift: Vec<f64> = map.shift().iter().copied().collect();
                ("affine_pushforward", json!({ "base": base.descriptor(), "matrix": rows, "shift": shift }))
            }
        };
        ModelDescriptor { kind: kind.into(), dimension: n, params }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        ModelDescriptor::from_json(text)?.to_model()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptors_round_trip() {
        let base = MeasureModel::product(vec![Factor::Uniform { side: 2.0 }, Factor::Laplace { scale: 0.5 }]).unwrap();
        let map = AffineMap::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 2.0]), DVector::zeros(2)).unwrap();
        let models = vec![
            MeasureModel::gaussian(3).unwrap(),
            MeasureModel::ball(2, 1.5).unwrap(),
            MeasureModel::cube(4, 1.0).unwrap(),
            MeasureModel::exponential(2).unwrap(),
            MeasureModel::pushforward(&base, map).unwrap(),
            base,
        ];
        for m in models {
            let text = serde_json::to_string(&m.descriptor()).unwrap();
            let back = MeasureModel::from_json(&text).unwrap();
            assert_eq!(back, m, "{text}");
        }
    }

    #[test]
    fn bad_descriptors_are_input_errors() {
        for text in [
            "{",
            r#"{"kind":"nope","dimension":2}"#,
            r#"{"kind":"uniform_cube","dimension":0}"#,
            r#"{"kind":"uniform_ball","dimension":2,"params":{"radius":-1}}"#,
            r#"{"kind":"product_factors","dimension":2,"params":{"factors":[{"type":"gaussian","scale":1}]}}"#,
            r#"{"kind":"affine_pushforward","dimension":2,"params":{"base":{"kind":"isotropic_gaussian","dimension":2},"matrix":[[1,1],[1,1]]}}"#,
        ] {
            assert!(matches!(MeasureModel::from_json(text), Err(Error::Input(_))), "{text}");
        }
    }
}
