//! Versioned (`drso/1`) JSON problem files, CSV ingestion, and the
//! 17-significant-digit serialization that makes regression fixtures exact.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::distribution::DiscreteDistribution;
use crate::dual::WassersteinBall;
use crate::error::{Error, Result};
use crate::metric::{GroundMetric, MetricKind};
use crate::objective::{Builtin, Objective};
use crate::space::PointSpace;

pub const SCHEMA: &str = "drso/1";

/// A discrete distribution as support points plus weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionFile {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DistributionFile {
    pub fn to_distribution(&self) -> Result<DiscreteDistribution> {
        let space = PointSpace::new(self.points.clone())?;
        DiscreteDistribution::from_weights(space, &self.weights)
    }

    pub fn from_distribution(d: &DiscreteDistribution) -> Self {
        let points = d.atoms().iter().map(|a| d.space().point(a.index).to_vec()).collect();
        let weights = d.atoms().iter().map(|a| a.weight).collect();
        Self { points, weights }
    }
}

/// Objective section: an explicit value table over the candidates, or a
/// named built-in family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectiveFile {
    Table { table: Vec<f64> },
    Builtin(Builtin),
}

impl ObjectiveFile {
    pub fn to_objective(&self) -> Result<Objective> {
        match self {
            ObjectiveFile::Table { table } => Objective::from_table(table.clone()),
            ObjectiveFile::Builtin(b) => Ok(Objective::builtin(*b)),
        }
    }
}

/// Input for the dual solver family of commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub schema: String,
    pub nominal: DistributionFile,
    pub candidates: Vec<Vec<f64>>,
    pub metric: MetricKind,
    pub p: f64,
    pub theta: f64,
    pub objective: ObjectiveFile,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if file.schema != SCHEMA {
            return Err(Error::Schema(format!("expected schema {SCHEMA}, got {}", file.schema)));
        }
        Ok(file)
    }

    /// Resolves the nominal atoms into the candidate set (exact coordinate
    /// match) and assembles the ball plus objective.
    pub fn build(&self) -> Result<(WassersteinBall, Objective)> {
        let space = PointSpace::new(self.candidates.clone())?;
        let mut atoms = Vec::with_capacity(self.nominal.points.len());
        if self.nominal.points.len() != self.nominal.weights.len() {
            return Err(Error::Schema("nominal points and weights differ in length".into()));
        }
        for (pt, &w) in self.nominal.points.iter().zip(&self.nominal.weights) {
            let Some(idx) = space.find(pt) else {
                return Err(Error::Schema(format!(
                    "nominal point {pt:?} is not among the candidates"
                )));
            };
            atoms.push((idx, w));
        }
        let nominal = DiscreteDistribution::new(space, atoms)?;
        let metric = GroundMetric::new(self.metric.clone(), self.p)?;
        let ball = WassersteinBall::new(nominal, metric, self.theta)?;
        let objective = self.objective.to_objective()?;
        if let ObjectiveFile::Table { table } = &self.objective {
            if table.len() != ball.space().len() {
                return Err(Error::Schema(format!(
                    "objective table has {} entries for {} candidates",
                    table.len(),
                    ball.space().len()
                )));
            }
        }
        Ok((ball, objective))
    }
}

/// Input for the plain distance command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WassersteinFile {
    pub schema: String,
    pub mu: DistributionFile,
    pub nu: DistributionFile,
    pub metric: MetricKind,
    pub p: f64,
}

impl WassersteinFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: WassersteinFile =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if file.schema != SCHEMA {
            return Err(Error::Schema(format!("expected schema {SCHEMA}, got {}", file.schema)));
        }
        Ok(file)
    }
}

/// One float with 17 significant digits, bijective over finite f64.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{:.16e}", x)
    }
}

/// Deterministic JSON with 17-significant-digit numbers. Keys are already
/// sorted (serde_json maps are ordered); non-finite floats arrive as null
/// and stay null.
pub fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, &mut out);
    Ok(out)
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_f64(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serializes"));
        }
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("key serializes"));
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

/// Parses a numeric CSV row; empty cells are rejected.
fn parse_row(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|cell| {
            cell.trim()
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("line {line_no}: bad number {cell:?}")))
        })
        .collect()
}

/// Distribution CSV: one row per atom, `s` coordinate columns then a weight.
pub fn parse_distribution_csv(text: &str) -> Result<DistributionFile> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(line, k + 1)?;
        if row.len() < 2 {
            return Err(Error::Schema(format!("line {}: need coordinates and a weight", k + 1)));
        }
        points.push(row[..row.len() - 1].to_vec());
        weights.push(row[row.len() - 1]);
    }
    if points.is_empty() {
        return Err(Error::Schema("empty distribution csv".into()));
    }
    Ok(DistributionFile { points, weights })
}

/// Dense numeric matrix, one row per line.
pub fn parse_matrix_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(parse_row(line, k + 1)?);
    }
    if rows.is_empty() {
        return Err(Error::Schema("empty matrix csv".into()));
    }
    Ok(rows)
}

/// Sample paths: one row per path, variable-length arrival lists; a blank
/// row is a path with no arrivals.
pub fn parse_paths_csv(text: &str) -> Result<Vec<crate::process::SamplePath>> {
    let mut paths = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            paths.push(crate::process::SamplePath::new(Vec::new())?);
            continue;
        }
        paths.push(crate::process::SamplePath::new(parse_row(trimmed, k + 1)?)?);
    }
    if paths.is_empty() {
        return Err(Error::Schema("empty paths csv".into()));
    }
    Ok(paths)
}

/// Single-column CSV of numbers.
pub fn parse_column_csv(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(line, k + 1)?;
        if row.len() != 1 {
            return Err(Error::Schema(format!("line {}: expected one column", k + 1)));
        }
        out.push(row[0]);
    }
    if out.is_empty() {
        return Err(Error::Schema("empty column csv".into()));
    }
    Ok(out)
}

/// Distribution as coordinate columns plus a trailing weight column.
pub fn write_distribution_csv(d: &crate::distribution::DiscreteDistribution) -> String {
    let mut out = String::new();
    for atom in d.atoms() {
        let mut cells: Vec<String> =
            d.space().point(atom.index).iter().map(|&c| format_f64(c)).collect();
        cells.push(format_f64(atom.weight));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// CSV with a header and 17-digit cells.
pub fn write_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| format_f64(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_bijective() {
        for &x in &[1.5, 0.1, -2.0 / 3.0, 1e-300, 123456.789] {
            let s = format_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
        assert_eq!(format_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn problem_file_round_trip() {
        let text = r#"{
            "schema": "drso/1",
            "nominal": { "points": [[0.0]], "weights": [1.0] },
            "candidates": [[0.0], [0.5], [1.0]],
            "metric": { "kind": "absolute-1d" },
            "p": 1.0,
            "theta": 0.5,
            "objective": { "builtin": "example5a", "a": -1.0 }
        }"#;
        let file = ProblemFile::parse(text).unwrap();
        let (ball, objective) = file.build().unwrap();
        assert_eq!(ball.space().len(), 3);
        assert_eq!(ball.nominal.atoms().len(), 1);
        assert!((objective.value_at(ball.space(), 2) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_schema_and_missing_points() {
        let bad_schema = r#"{
            "schema": "drso/2",
            "nominal": { "points": [[0.0]], "weights": [1.0] },
            "candidates": [[0.0]],
            "metric": { "kind": "absolute-1d" },
            "p": 1.0, "theta": 0.5,
            "objective": { "table": [0.0] }
        }"#;
        assert!(matches!(ProblemFile::parse(bad_schema), Err(Error::Schema(_))));

        let missing = r#"{
            "schema": "drso/1",
            "nominal": { "points": [[0.25]], "weights": [1.0] },
            "candidates": [[0.0], [0.5]],
            "metric": { "kind": "absolute-1d" },
            "p": 1.0, "theta": 0.5,
            "objective": { "table": [0.0, 1.0] }
        }"#;
        let file = ProblemFile::parse(missing).unwrap();
        assert!(matches!(file.build(), Err(Error::Schema(_))));
    }

    #[test]
    fn csv_parsers() {
        let d = parse_distribution_csv("0.0,0.5\n1.0,0.5\n").unwrap();
        assert_eq!(d.points, vec![vec![0.0], vec![1.0]]);
        let paths = parse_paths_csv("0.1,0.9\n\n0.5\n").unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths[1].arrivals.is_empty());
        let col = parse_column_csv("1\n2\n3\n").unwrap();
        assert_eq!(col, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn distribution_csv_round_trip() {
        let text = "0.0,2.5,0.5\n1.0,-1.0,0.5\n";
        let file = parse_distribution_csv(text).unwrap();
        let dist = file.to_distribution().unwrap();
        let back = write_distribution_csv(&dist);
        let reparsed = parse_distribution_csv(&back).unwrap();
        assert_eq!(reparsed.points, file.points);
        assert_eq!(reparsed.weights, file.weights);
    }

    #[test]
    fn json_output_is_deterministic() {
        #[derive(Serialize)]
        struct Demo {
            b: f64,
            a: f64,
        }
        let one = to_json_17(&Demo { b: 1.5, a: 2.0 / 3.0 }).unwrap();
        let two = to_json_17(&Demo { b: 1.5, a: 2.0 / 3.0 }).unwrap();
        assert_eq!(one, two);
        assert!(one.contains("6.6666666666666663e-1"));
    }
}
