use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::ExperimentConfig;
use crate::error::{ConfigError, Error};
use crate::geometry::{Mesh, MetricGrid};

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// An output directory holding `manifest.txt` and the run's CSV files.
#[derive(Debug, Clone)]
pub struct RunDirectory {
    path: PathBuf,
}

impl RunDirectory {
    /// Create the directory and write the manifest: the resolved config,
    /// preceded by comment lines with version and wall-clock metadata.
    pub fn create(path: &Path, cfg: &ExperimentConfig) -> Result<Self, Error> {
        fs::create_dir_all(path).map_err(io(path))?;
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = format!(
            "# {} {}\n# started_unix = {started}\n# seed = {}\n{}",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
            cfg.seed,
            cfg.to_manifest()
        );
        let file = path.join("manifest.txt");
        fs::write(&file, manifest).map_err(io(&file))?;
        Ok(RunDirectory {
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, Error> {
        let file = self.file(name);
        fs::write(&file, text).map_err(io(&file))?;
        Ok(file)
    }
}

/// Per-cell CSV: `i,j,x,y` followed by the named columns.
pub fn write_cell_csv(
    path: &Path,
    grid: &MetricGrid,
    columns: &[(&str, &[f64])],
) -> Result<(), Error> {
    let mesh = grid.mesh();
    for (name, c) in columns {
        if c.len() != mesh.len() {
            return Err(Error::Run {
                context: format!("column {name}"),
                source: Box::new(
                    crate::error::StatsError::ShapeMismatch {
                        expected: mesh.len(),
                        got: c.len(),
                    }
                    .into(),
                ),
            });
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["i", "j", "x", "y"];
    header.extend(columns.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let k = mesh.idx(i, j);
            let [x, y] = mesh.center(i, j);
            let mut row = vec![i.to_string(), j.to_string(), x.to_string(), y.to_string()];
            row.extend(columns.iter().map(|(_, c)| c[k].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(io(path))?;
    Ok(())
}

/// Snapshot CSV with columns `i,j,x,y,rho,count`, `count = N rho sqrt|G| dx dy`.
pub fn write_snapshot_csv(
    path: &Path,
    grid: &MetricGrid,
    rho: &[f64],
    n: usize,
) -> Result<(), Error> {
    let counts = crate::stats::rho_to_counts(rho, grid, n);
    write_cell_csv(path, grid, &[("rho", rho), ("count", &counts)])
}

/// Read `rho` from a CSV with at least the columns `i`, `j`, `rho`.
pub fn read_density_csv(path: &Path, mesh: &Mesh) -> Result<Vec<f64>, Error> {
    let bad = |msg: String| -> Error {
        ConfigError::invalid("init.file", format!("{}: {msg}", path.display())).into()
    };
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("no `{name}` column")))
    };
    let (ci, cj, cr) = (col("i")?, col("j")?, col("rho")?);
    let mut values = vec![f64::NAN; mesh.len()];
    for record in r.records() {
        let record = record?;
        let field = |c: usize| record.get(c).map(str::trim).unwrap_or("");
        let i: usize = field(ci)
            .parse()
            .map_err(|_| bad(format!("bad i `{}`", field(ci))))?;
        let j: usize = field(cj)
            .parse()
            .map_err(|_| bad(format!("bad j `{}`", field(cj))))?;
        let rho: f64 = field(cr)
            .parse()
            .map_err(|_| bad(format!("bad rho `{}`", field(cr))))?;
        if i >= mesh.nx || j >= mesh.ny {
            return Err(bad(format!(
                "cell ({i}, {j}) outside the {}x{} grid",
                mesh.nx, mesh.ny
            )));
        }
        values[mesh.idx(i, j)] = rho;
    }
    if let Some(k) = values.iter().position(|v| v.is_nan()) {
        return Err(bad(format!(
            "cell ({}, {}) missing",
            k % mesh.nx,
            k / mesh.nx
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{precompute_grid, HeightSurface};

    #[test]
    fn snapshot_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let grid = precompute_grid(&HeightSurface::sinusoidal(1.0), 5, 4).unwrap();
        let rho: Vec<f64> = (0..20).map(|k| 0.1 + k as f64 / 7.0).collect();
        let path = dir.path().join("s.csv");
        write_snapshot_csv(&path, &grid, &rho, 100).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("i,j,x,y,rho,count\n"));
        assert_eq!(read_density_csv(&path, grid.mesh()).unwrap(), rho);
    }

    #[test]
    fn missing_cell_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "i,j,rho\n0,0,1\n1,0,1\n0,1,1\n").unwrap();
        let err = read_density_csv(&path, &Mesh::new(2, 2, 1.0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("(1, 1) missing"), "{err}");
    }
}
