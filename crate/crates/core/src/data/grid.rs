use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{predict_reports, Architecture, Input, Model, UncertaintyReport};
use crate::nn::ModelParams;

pub const GRID_HEADER: &str = "x,y,vacuity,dissonance,entropy";

/// Square evaluation lattice `[min, max]^2` with `resolution` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            min: -12.0,
            max: 12.0,
            resolution: 101,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::Config(format!(
                "grid resolution must be >= 2, got {}",
                self.resolution
            )));
        }
        // Negated so NaN bounds are rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.min < self.max) {
            return Err(Error::Config("grid bounds must satisfy min < max".into()));
        }
        Ok(())
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.min + (self.max - self.min) * i as f64 / (self.resolution - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub report: UncertaintyReport,
}

/// One parsed CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    pub vacuity: f64,
    pub dissonance: f64,
    pub entropy: f64,
}

impl From<&GridPoint> for GridRow {
    fn from(p: &GridPoint) -> Self {
        Self {
            x: p.x,
            y: p.y,
            vacuity: p.report.vacuity,
            dissonance: p.report.dissonance,
            entropy: p.report.entropy,
        }
    }
}

/// Reports over the lattice, row-major with `y` as the row index.
pub fn uncertainty_grid(
    model: &Model,
    params: &ModelParams,
    spec: &GridSpec,
) -> Result<Vec<GridPoint>> {
    spec.validate()?;
    match model.spec().arch {
        Architecture::Mlp2d { input_dim: 2, .. } => {}
        _ => {
            return Err(Error::domain(
                "uncertainty maps need a model over 2-D inputs",
            ))
        }
    }
    let mut coords = Vec::with_capacity(spec.resolution * spec.resolution);
    for r in 0..spec.resolution {
        for c in 0..spec.resolution {
            coords.push((spec.coordinate(c), spec.coordinate(r)));
        }
    }
    let inputs: Vec<Input> = coords
        .iter()
        .map(|&(x, y)| Input::Features(vec![x, y]))
        .collect();
    let refs: Vec<&Input> = inputs.iter().collect();
    let reports = predict_reports(model, params, &refs)?;
    Ok(coords
        .into_iter()
        .zip(reports)
        .map(|((x, y), report)| GridPoint { x, y, report })
        .collect())
}

pub fn grid_csv(points: &[GridPoint]) -> String {
    let mut s = format!("{GRID_HEADER}\n");
    for p in points {
        let r = &p.report;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            p.x, p.y, r.vacuity, r.dissonance, r.entropy
        );
    }
    s
}

pub fn write_grid_csv(path: impl AsRef<Path>, points: &[GridPoint]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, grid_csv(points)).map_err(|e| Error::io(path, e))
}

pub fn read_grid_csv(path: impl AsRef<Path>) -> Result<Vec<GridRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == GRID_HEADER => {}
        _ => return Err(err(1, "missing grid header")),
    }
    lines
        .map(|(i, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(i + 1, "non-numeric field"))?;
            if v.len() != 5 {
                return Err(err(i + 1, "expected 5 fields"));
            }
            Ok(GridRow {
                x: v[0],
                y: v[1],
                vacuity: v[2],
                dissonance: v[3],
                entropy: v[4],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, Head, ModelSpec};

    fn model(input_dim: usize) -> (Model, ModelParams) {
        Model::init(
            ModelSpec {
                arch: Architecture::Mlp2d {
                    input_dim,
                    embed_dim: 4,
                    hidden_dim: 4,
                },
                num_classes: 2,
                head: Head::Evidential(Activation::Softplus),
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn two_by_two_round_trip() {
        let (m, p) = model(2);
        let spec = GridSpec {
            min: -1.0,
            max: 1.0,
            resolution: 2,
        };
        let g = uncertainty_grid(&m, &p, &spec).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!((g[1].x, g[1].y), (1.0, -1.0));
        let f = tempfile::NamedTempFile::new().unwrap();
        write_grid_csv(f.path(), &g).unwrap();
        let back = read_grid_csv(f.path()).unwrap();
        assert_eq!(back, g.iter().map(GridRow::from).collect::<Vec<_>>());
        for r in &back {
            assert!(r.vacuity > 0.0 && r.vacuity <= 1.0);
            assert!((0.0..1.0).contains(&r.dissonance));
        }
    }

    #[test]
    fn rejects_non_planar_models() {
        let (m, p) = model(3);
        assert!(uncertainty_grid(&m, &p, &GridSpec::default()).is_err());
    }
}
