use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::svg::{line_chart, Line};
use crate::error::{Error, Result};
use crate::flows::{rotation_demo, rotation_paths, QuadraticModel, QuadraticSystem, RotationRadii, DEMO_MATRIX};
use crate::optim::HyperParams;
use crate::oscillator::{homogeneous, OscillatorParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoKind {
    Quadratic,
    Rotation,
    Oscillator,
}

impl std::str::FromStr for DemoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(DemoKind::Quadratic),
            "rotation" => Ok(DemoKind::Rotation),
            "oscillator" => Ok(DemoKind::Oscillator),
            other => Err(Error::InvalidArgument(format!(
                "unknown demo {other:?} (expected quadratic, rotation or oscillator)"
            ))),
        }
    }
}

pub const QUADRATIC_ETAS: [f64; 3] = [0.05, 0.1, 0.2];
pub const QUADRATIC_STEPS: usize = 20;
pub const QUADRATIC_START: [f64; 2] = [1.0, 1.0];

/// Gradient descent against the gradient flow and modified-loss flow on the
/// demo quadratic, sampled at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticRun {
    pub eta: f64,
    pub gd: Vec<[f64; 2]>,
    pub flow: Vec<[f64; 2]>,
    pub modified: Vec<[f64; 2]>,
}

impl QuadraticRun {
    fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// Endpoint distances of gradient descent to (flow, modified flow).
    pub fn endpoint_errors(&self) -> (f64, f64) {
        let n = self.gd.len() - 1;
        (Self::dist(self.gd[n], self.flow[n]), Self::dist(self.gd[n], self.modified[n]))
    }
}

pub fn quadratic_run(eta: f64, steps: usize, w0: [f64; 2]) -> Result<QuadraticRun> {
    let sys = QuadraticSystem::new(2, &DEMO_MATRIX)?;
    let h = HyperParams::sgd(eta, 0.0);
    let at = |k: usize, model| -> Result<[f64; 2]> {
        let w = sys.state(&w0, &h, eta * k as f64, model)?;
        Ok([w[0], w[1]])
    };
    let series = |model| (0..=steps).map(|k| at(k, model)).collect::<Result<Vec<_>>>();
    Ok(QuadraticRun {
        eta,
        gd: series(QuadraticModel::GdTrajectory)?,
        flow: series(QuadraticModel::GradientFlow)?,
        modified: series(QuadraticModel::ModifiedLossFlow)?,
    })
}

/// Oscillator regimes shown by the demo: (label, γ, ω).
pub const OSCILLATOR_CASES: [(&str, f64, f64); 3] =
    [("underdamped", 0.1, 1.0), ("critical", 1.0, 1.0), ("overdamped", 3.0, 1.0)];

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `<kind>.csv` (and `<kind>.svg` when asked) into `out` and returns
/// the written paths plus a one-paragraph summary.
pub fn run_demo(kind: DemoKind, out: &Path, svg: bool) -> Result<(Vec<PathBuf>, String)> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = Vec::new();
    let summary;
    match kind {
        DemoKind::Quadratic => {
            let path = out.join("quadratic.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["eta", "step", "time", "gd_x", "gd_y", "flow_x", "flow_y", "modified_x", "modified_y"])?;
            let mut lines = String::new();
            let mut runs = Vec::new();
            for eta in QUADRATIC_ETAS {
                let run = quadratic_run(eta, QUADRATIC_STEPS, QUADRATIC_START)?;
                for k in 0..=QUADRATIC_STEPS {
                    let mut rec = vec![eta.to_string(), k.to_string(), (eta * k as f64).to_string()];
                    for p in [run.gd[k], run.flow[k], run.modified[k]] {
                        rec.push(p[0].to_string());
                        rec.push(p[1].to_string());
                    }
                    w.write_record(&rec)?;
                }
                let (flow, modified) = run.endpoint_errors();
                lines.push_str(&format!("eta {eta}: |gd - flow| = {flow:.3e}, |gd - modified| = {modified:.3e}\n"));
                runs.push(run);
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            files.push(path);
            if svg {
                let run = &runs[runs.len() - 1];
                let xs = |p: &[[f64; 2]]| p.iter().map(|q| q[0]).collect::<Vec<_>>();
                let ys = |p: &[[f64; 2]]| p.iter().map(|q| q[1]).collect::<Vec<_>>();
                let (gx, gy, fx, fy, mx, my) = (xs(&run.gd), ys(&run.gd), xs(&run.flow), ys(&run.flow), xs(&run.modified), ys(&run.modified));
                let chart = line_chart(
                    &format!("quadratic, eta = {}", run.eta),
                    "w_0",
                    &[
                        Line { name: "gradient descent", xs: &gx, ys: &gy, dashed: false },
                        Line { name: "gradient flow", xs: &fx, ys: &fy, dashed: true },
                        Line { name: "modified flow", xs: &mx, ys: &my, dashed: true },
                    ],
                );
                let p = out.join("quadratic.svg");
                write(&p, &chart)?;
                files.push(p);
            }
            summary = lines;
        }
        DemoKind::Rotation => {
            let (eta, n) = (0.1, 100);
            let paths = rotation_paths(eta, n);
            let path = out.join("rotation.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["step", "discrete_x", "discrete_y", "flow_x", "flow_y", "modified_x", "modified_y"])?;
            for k in 0..=n {
                let mut rec = vec![k.to_string()];
                for p in [paths.discrete[k], paths.flow[k], paths.modified[k]] {
                    rec.push(p[0].to_string());
                    rec.push(p[1].to_string());
                }
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            files.push(path);
            let RotationRadii { discrete, flow, modified } = rotation_demo(eta, n);
            summary = format!("eta {eta}, n {n}: radii discrete {discrete:.6}, flow {flow:.6}, modified {modified:.6}\n");
            if svg {
                let col = |p: &[[f64; 2]], i: usize| p.iter().map(|q| q[i]).collect::<Vec<_>>();
                let (dx, dy) = (col(&paths.discrete, 0), col(&paths.discrete, 1));
                let (fx, fy) = (col(&paths.flow, 0), col(&paths.flow, 1));
                let (mx, my) = (col(&paths.modified, 0), col(&paths.modified, 1));
                let chart = line_chart(
                    "rotation field",
                    "x",
                    &[
                        Line { name: "euler", xs: &dx, ys: &dy, dashed: false },
                        Line { name: "flow", xs: &fx, ys: &fy, dashed: true },
                        Line { name: "modified flow", xs: &mx, ys: &my, dashed: true },
                    ],
                );
                let p = out.join("rotation.svg");
                write(&p, &chart)?;
                files.push(p);
            }
        }
        DemoKind::Oscillator => {
            let times: Vec<f64> = (0..=400).map(|k| 0.05 * k as f64).collect();
            let mut cols = Vec::new();
            for (_, g, o) in OSCILLATOR_CASES {
                let p = OscillatorParams::new(g, o)?;
                cols.push(times.iter().map(|&t| homogeneous(p, 1.0, t)).collect::<Vec<_>>());
            }
            let path = out.join("oscillator.csv");
            let mut w = csv::Writer::from_path(&path)?;
            let mut header = vec!["time"];
            header.extend(OSCILLATOR_CASES.iter().map(|c| c.0));
            w.write_record(&header)?;
            for (k, t) in times.iter().enumerate() {
                let mut rec = vec![t.to_string()];
                rec.extend(cols.iter().map(|c| c[k].to_string()));
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            files.push(path);
            let crossings = cols[0].windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
            summary = format!("underdamped case crosses zero {crossings} times over t in [0, 20]\n");
            if svg {
                let lines: Vec<Line> = OSCILLATOR_CASES
                    .iter()
                    .zip(&cols)
                    .map(|(c, ys)| Line { name: c.0, xs: &times, ys, dashed: false })
                    .collect();
                let p = out.join("oscillator.svg");
                write(&p, &line_chart("x'' + 2 gamma x' + omega^2 x = 0", "time", &lines))?;
                files.push(p);
            }
        }
    }
    Ok((files, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gd_endpoint_is_closer_to_modified_flow() {
        for eta in QUADRATIC_ETAS {
            let (flow, modified) = quadratic_run(eta, QUADRATIC_STEPS, QUADRATIC_START).unwrap().endpoint_errors();
            assert!(modified < flow, "eta {eta}: {modified} vs {flow}");
        }
    }

    #[test]
    fn demos_write_files() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [DemoKind::Quadratic, DemoKind::Rotation, DemoKind::Oscillator] {
            let (files, summary) = run_demo(kind, dir.path(), true).unwrap();
            assert_eq!(files.len(), 2);
            assert!(files.iter().all(|f| f.is_file()));
            assert!(!summary.is_empty());
        }
        let text = std::fs::read_to_string(dir.path().join("oscillator.csv")).unwrap();
        let under: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(under.windows(2).any(|w| w[0] > 0.0 && w[1] < 0.0));
        assert!("spiral".parse::<DemoKind>().is_err());
    }
}
