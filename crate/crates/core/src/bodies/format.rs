use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Body, BoxBody, Ellipsoid, PolytopeH, PolytopeV};
use crate::error::{Error, Result};

/// A norm index that serializes `inf` as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormIndex {
    Finite(f64),
    Named(NamedIndex),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NamedIndex {
    #[serde(rename = "inf", alias = "infinity", alias = "Infinity", alias = "INF")]
    Inf,
}

impl NormIndex {
    pub fn value(self) -> f64 {
        match self {
            NormIndex::Finite(p) => p,
            NormIndex::Named(NamedIndex::Inf) => f64::INFINITY,
        }
    }

    pub fn from_value(p: f64) -> Self {
        if p.is_infinite() {
            NormIndex::Named(NamedIndex::Inf)
        } else {
            NormIndex::Finite(p)
        }
    }
}

/// Structured-text form of a body.
///
/// ```json
/// {"type": "polytope_h", "n": 2, "A": [[1, 0], [0, 1]], "p": "inf"}
/// ```
///
/// Matrices are arrays of rows. `ellipsoid` accepts either `M` or `semi_axes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub n: usize,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<NormIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<f64>>>,
}

impl BodySpec {
    fn bare(kind: &str, n: usize) -> Self {
        BodySpec {
            kind: kind.to_string(),
            n,
            a: None,
            p: None,
            tau: None,
            m: None,
            semi_axes: None,
            radius: None,
            endpoint: None,
            generators: None,
        }
    }

    pub fn from_body(body: &Body) -> Self {
        let mut spec = BodySpec::bare(body.kind(), body.dim());
        match body {
            Body::PolytopeH(b) => {
                spec.a = Some(rows_of(b.a()));
                spec.p = Some(NormIndex::from_value(b.p()));
            }
            Body::PolytopeV(b) => spec.generators = Some(rows_of(b.generators())),
            Body::Ellipsoid(b) => spec.m = Some(rows_of(b.shape())),
            Body::Box(b) => spec.tau = Some(b.half_widths().iter().copied().collect()),
            Body::LpBall { p, radius, .. } => {
                spec.p = Some(NormIndex::from_value(*p));
                spec.radius = Some(*radius);
            }
            Body::EuclideanBall { radius, .. } => spec.radius = Some(*radius),
            Body::Segment { endpoint } => spec.endpoint = Some(endpoint.iter().copied().collect()),
        }
        spec
    }

    pub fn to_body(&self) -> Result<Body> {
        let n = self.n;
        if n == 0 {
            return Err(Error::arg("body dimension n must be positive"));
        }
        let unexpected = |field: &str, present: bool| -> Result<()> {
            if present {
                Err(Error::arg(format!("field `{field}` does not apply to type `{}`", self.kind)))
            } else {
                Ok(())
            }
        };
        let body = match self.kind.as_str() {
            "polytope_h" => {
                let a = matrix_field("A", self.a.as_ref(), n)?;
                let p = self.p.map(NormIndex::value).unwrap_or(f64::INFINITY);
                Body::PolytopeH(PolytopeH::new(a, p)?)
            }
            "polytope_v" => {
                let g = matrix_field("generators", self.generators.as_ref(), n)?;
                Body::PolytopeV(PolytopeV::new(g)?)
            }
            "ellipsoid" => match (&self.m, &self.semi_axes) {
                (Some(_), None) => {
                    let m = matrix_field("M", self.m.as_ref(), n)?;
                    Body::Ellipsoid(Ellipsoid::new(m)?)
                }
                (None, Some(axes)) => {
                    Error::check_dim(n, axes.len())?;
                    Body::Ellipsoid(Ellipsoid::from_semi_axes(axes)?)
                }
                _ => return Err(Error::arg("ellipsoid needs exactly one of `M` or `semi_axes`")),
            },
            "box" => {
                let tau = self
                    .tau
                    .as_ref()
                    .ok_or_else(|| Error::arg("box needs `tau`"))?;
                Error::check_dim(n, tau.len())?;
                Body::Box(BoxBody::new(DVector::from_vec(tau.clone()))?)
            }
            "lp_ball" => {
                let p = self
                    .p
                    .ok_or_else(|| Error::arg("lp_ball needs `p`"))?
                    .value();
                Body::lp_ball(n, p, self.radius.unwrap_or(1.0))?
            }
            "ball" => Body::ball(n, self.radius.unwrap_or(1.0))?,
            "segment" => {
                let e = self
                    .endpoint
                    .as_ref()
                    .ok_or_else(|| Error::arg("segment needs `endpoint`"))?;
                Error::check_dim(n, e.len())?;
                Body::segment(DVector::from_vec(e.clone()))?
            }
            other => return Err(Error::arg(format!("unknown body type `{other}`"))),
        };
        let kind = body.kind();
        unexpected("A", self.a.is_some() && kind != "polytope_h")?;
        unexpected("p", self.p.is_some() && kind != "polytope_h" && kind != "lp_ball")?;
        unexpected("tau", self.tau.is_some() && kind != "box")?;
        unexpected("M", self.m.is_some() && kind != "ellipsoid")?;
        unexpected("semi_axes", self.semi_axes.is_some() && kind != "ellipsoid")?;
        unexpected("radius", self.radius.is_some() && kind != "ball" && kind != "lp_ball")?;
        unexpected("endpoint", self.endpoint.is_some() && kind != "segment")?;
        unexpected("generators", self.generators.is_some() && kind != "polytope_v")?;
        Ok(body)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("body spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::arg(format!("body document: {e}")))
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_field(name: &str, rows: Option<&Vec<Vec<f64>>>, n: usize) -> Result<DMatrix<f64>> {
    let rows = rows.ok_or_else(|| Error::arg(format!("missing `{name}`")))?;
    if rows.is_empty() {
        return Err(Error::arg(format!("`{name}` has no rows")));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::arg(format!(
                "row {i} of `{name}` has {} entries, expected n = {n}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polytope_round_trip() {
        let text = r#"{"type":"polytope_h","n":2,"A":[[0.1,0.2],[0.30000000000000004,-1e-17]],"p":"inf"}"#;
        let spec = BodySpec::from_json(text).unwrap();
        let body = spec.to_body().unwrap();
        let again = BodySpec::from_body(&body);
        assert_eq!(again, spec);
        assert_eq!(BodySpec::from_json(&again.to_json()).unwrap(), spec);
    }

    #[test]
    fn all_variants_round_trip() {
        let bodies = vec![
            Body::cube(3),
            Body::ball(2, 1.5).unwrap(),
            Body::lp_ball(4, 3.0, 0.7).unwrap(),
            Body::lp_ball(4, f64::INFINITY, 0.7).unwrap(),
            Body::Box(BoxBody::new(DVector::from_vec(vec![1.0, 2.5])).unwrap()),
            Body::Ellipsoid(Ellipsoid::from_semi_axes(&[2.0, 1.0]).unwrap()),
            Body::segment(DVector::from_vec(vec![0.1, 0.7])).unwrap(),
            Body::cube(2).polar_dual().unwrap(),
        ];
        for b in bodies {
            let json = b.to_spec().to_json();
            let back = BodySpec::from_json(&json).unwrap().to_body().unwrap();
            assert_eq!(back.to_spec(), b.to_spec(), "{json}");
        }
    }

    #[test]
    fn rejects_malformed() {
        for text in [
            r#"{"type":"polytope_h","n":2,"A":[[1,0],[0]]}"#,
            r#"{"type":"box","n":2,"tau":[1,-1]}"#,
            r#"{"type":"ball","n":2,"radius":1,"tau":[1,1]}"#,
            r#"{"type":"ball","n":2,"colour":"red"}"#,
            r#"{"type":"torus","n":2}"#,
            r#"{"type":"polytope_h","n":3,"A":[[-1,1,0],[0,-1,1]],"p":"inf"}"#,
        ] {
            let res = BodySpec::from_json(text).and_then(|s| s.to_body());
            assert!(res.is_err(), "{text}");
        }
    }
}
