//! GeoJSON `FeatureCollection`s of labelled `Polygon` features.

use serde_json::{json, Map, Value};

use super::{GeometryError, LinearRing, Point2, Polygon};

pub const DEFAULT_LABEL_KEY: &str = "label";

fn json_err(text: &str, e: &serde_json::Error) -> GeometryError {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(e.line().saturating_sub(1))
        .map(str::len)
        .sum();
    GeometryError::Parse {
        pos: line_start + e.column().saturating_sub(1),
        msg: e.to_string(),
    }
}

fn shape_err(msg: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        pos: 0,
        msg: msg.into(),
    }
}

fn ring_from_json(v: &Value) -> Result<LinearRing, GeometryError> {
    let coords = v
        .as_array()
        .ok_or_else(|| shape_err("ring must be an array of positions"))?;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(coords.len());
    for c in coords {
        let pos = c.as_array().filter(|a| a.len() >= 2);
        let xy = pos.and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)));
        let Some(xy) = xy else {
            return Err(shape_err("position must hold at least two numbers"));
        };
        if pts.last() != Some(&xy) {
            pts.push(xy);
        }
    }
    LinearRing::from_coords(&pts)
}

/// Reads every feature of a `FeatureCollection`, pairing its polygon with
/// the string form of `properties[label_key]`.
pub fn parse_geojson_features(
    text: &str,
    label_key: &str,
) -> Result<Vec<(Polygon, String)>, GeometryError> {
    let root: Value = serde_json::from_str(text).map_err(|e| json_err(text, &e))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(shape_err("top-level object must be a FeatureCollection"));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| shape_err("FeatureCollection has no `features` array"))?;

    let mut out = Vec::with_capacity(features.len());
    for (index, f) in features.iter().enumerate() {
        let geom = f
            .get("geometry")
            .ok_or_else(|| shape_err(format!("feature {index} has no geometry")))?;
        let kind = geom.get("type").and_then(Value::as_str).unwrap_or("null");
        if kind != "Polygon" {
            return Err(GeometryError::UnsupportedGeometry(kind.to_string()));
        }
        let rings = geom
            .get("coordinates")
            .and_then(Value::as_array)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| shape_err(format!("feature {index} has no polygon rings")))?;
        let mut parsed = rings.iter().map(ring_from_json).collect::<Result<Vec<_>, _>>()?;
        let exterior = parsed.remove(0);

        let label = match f.get("properties").and_then(|p| p.get(label_key)) {
            Some(Value::String(s)) => s.clone(),
            Some(v @ (Value::Number(_) | Value::Bool(_))) => v.to_string(),
            _ => {
                return Err(GeometryError::MissingLabel {
                    index,
                    key: label_key.to_string(),
                })
            }
        };
        out.push((Polygon::new(exterior, parsed), label));
    }
    Ok(out)
}

fn ring_to_json(ring: &LinearRing) -> Value {
    let v = ring.vertices();
    Value::Array(
        v.iter()
            .chain(v.first())
            .map(|p: &Point2| json!([p.x, p.y]))
            .collect(),
    )
}

pub fn write_geojson_features(features: &[(Polygon, String)], label_key: &str) -> String {
    let feats: Vec<Value> = features
        .iter()
        .map(|(poly, label)| {
            let mut props = Map::new();
            props.insert(label_key.to_string(), Value::String(label.clone()));
            json!({
                "type": "Feature",
                "properties": props,
                "geometry": {
                    "type": "Polygon",
                    "coordinates": poly.rings().map(ring_to_json).collect::<Vec<_>>(),
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": feats }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{"label":"L","other":1},
         "geometry":{"type":"Polygon","coordinates":[[[0,0],[2,0],[2,1],[1,1],[1,3],[0,3],[0,0]]]}}]}"#;

    #[test]
    fn reads_single_feature() {
        let v = parse_geojson_features(ONE, DEFAULT_LABEL_KEY).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].1, "L");
        assert_eq!(v[0].0.exterior.len(), 6);
    }

    #[test]
    fn empty_collection() {
        let v = parse_geojson_features(r#"{"type":"FeatureCollection","features":[]}"#, "label").unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn rejects_other_geometry() {
        let text = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"label":"x"},
            "geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}}]}"#;
        assert_eq!(
            parse_geojson_features(text, "label"),
            Err(GeometryError::UnsupportedGeometry("LineString".into()))
        );
        let multi = text.replace("LineString", "MultiPolygon");
        assert!(matches!(
            parse_geojson_features(&multi, "label"),
            Err(GeometryError::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn missing_label_and_custom_key() {
        assert_eq!(
            parse_geojson_features(ONE, "class"),
            Err(GeometryError::MissingLabel { index: 0, key: "class".into() })
        );
        let v = parse_geojson_features(ONE, "other").unwrap();
        assert_eq!(v[0].1, "1");
    }

    #[test]
    fn bad_json_reports_position() {
        let err = parse_geojson_features("{\"type\":\n  oops}", "label").unwrap_err();
        assert!(matches!(err, GeometryError::Parse { pos, .. } if pos >= 9));
    }

    #[test]
    fn writer_round_trips() {
        let v = parse_geojson_features(ONE, "label").unwrap();
        let text = write_geojson_features(&v, "kind");
        assert_eq!(parse_geojson_features(&text, "kind").unwrap(), v);
    }
}
