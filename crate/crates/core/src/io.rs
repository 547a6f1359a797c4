//! File formats: field CSV with a JSON grid sidecar, trace CSV, diffusion
//! problem JSON, and an artifact writer that records content hashes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn, GridMeta};
use crate::invert::InversionTrace;
use crate::models::DiffusionProblem;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sidecar path `name.grid.json` for `name.csv`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("grid.json")
}

/// CSV bytes `x[,y],value` in storage order.
pub fn gridfn_csv(f: &GridFn) -> Result<Vec<u8>> {
    let grid = f.grid();
    let mut w = csv::Writer::from_writer(Vec::new());
    if grid.dim() == 1 {
        w.write_record(["x", "value"])?;
    } else {
        w.write_record(["x", "y", "value"])?;
    }
    for (k, v) in f.values().iter().enumerate() {
        let [x, y] = grid.point(k);
        if grid.dim() == 1 {
            w.write_record([x.to_string(), v.to_string()])?;
        } else {
            w.write_record([x.to_string(), y.to_string(), v.to_string()])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_gridfn(csv_path: &Path) -> Result<GridFn> {
    let meta: GridMeta = serde_json::from_slice(&fs::read(sidecar_path(csv_path))?)?;
    let grid = Grid::from_meta(&meta)?;
    let mut r = csv::Reader::from_path(csv_path)?;
    let col = grid.dim();
    let mut values = Vec::with_capacity(grid.len());
    for rec in r.records() {
        let rec = rec?;
        let v: f64 = rec
            .get(col)
            .ok_or_else(|| Error::InvalidInput(format!("{}: short record", csv_path.display())))?
            .trim()
            .parse()
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", csv_path.display())))?;
        values.push(v);
    }
    GridFn::new(grid, values)
}

/// Trace CSV `iter,objective,step,gradnorm` (wall times stay out so reruns
/// are byte-identical).
pub fn trace_csv(trace: &InversionTrace) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "objective", "step", "gradnorm"])?;
    for r in &trace.rows {
        w.write_record([r.iter.to_string(), r.objective.to_string(), r.step.to_string(), r.gradnorm.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Rows of serializable records as CSV.
pub fn records_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// A coefficient given inline or as a field CSV (with sidecar) relative to
/// the JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldRef {
    Scalar(f64),
    Csv { csv: String },
}

impl FieldRef {
    fn resolve(&self, grid: &Grid, base: &Path) -> Result<GridFn> {
        match self {
            FieldRef::Scalar(c) => Ok(GridFn::constant(grid, *c)),
            FieldRef::Csv { csv } => {
                let f = read_gridfn(&base.join(csv))?;
                grid.ensure_same(f.grid())?;
                Ok(f)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    pub grid: GridMeta,
    pub gamma: f64,
    pub kappa: f64,
    pub source: FieldRef,
    pub sigma: FieldRef,
}

impl DiffusionSpec {
    /// Build the problem; CSV references resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<DiffusionProblem> {
        let grid = Grid::from_meta(&self.grid)?;
        DiffusionProblem::new(self.gamma, self.kappa, self.source.resolve(&grid, base)?, self.sigma.resolve(&grid, base)?)
    }
}

pub fn read_diffusion_problem(path: &Path) -> Result<DiffusionProblem> {
    let spec: DiffusionSpec = serde_json::from_slice(&fs::read(path)?)?;
    spec.build(path.parent().unwrap_or(Path::new(".")))
}

/// Write `p` as `name.json` plus `name.sigma.csv` / `name.source.csv` when
/// the fields are not constant.
pub fn write_diffusion_problem(p: &DiffusionProblem, dir: &Path, name: &str) -> Result<PathBuf> {
    let field = |f: &GridFn, tag: &str| -> Result<FieldRef> {
        let (lo, hi) = (f.min(), f.max());
        if lo == hi {
            return Ok(FieldRef::Scalar(lo));
        }
        let file = format!("{name}.{tag}.csv");
        write_gridfn(&dir.join(&file), f)?;
        Ok(FieldRef::Csv { csv: file })
    };
    let spec = DiffusionSpec {
        grid: p.grid().meta(),
        gamma: p.gamma(),
        kappa: p.kappa(),
        source: field(p.source(), "source")?,
        sigma: field(p.sigma(), "sigma")?,
    };
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_vec_pretty(&spec)?)?;
    Ok(path)
}

pub fn write_gridfn(path: &Path, f: &GridFn) -> Result<()> {
    fs::write(path, gridfn_csv(f)?)?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&f.grid().meta())?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
}

/// Writes files under one directory and remembers each relative path with
/// its hash, in write order.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    records: Vec<ArtifactRecord>,
}

impl ArtifactWriter {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), records: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn bytes(&mut self, rel: &str, data: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, data)?;
        self.records.push(ArtifactRecord { path: rel.to_string(), sha256: sha256_hex(data) });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let data = serde_json::to_vec_pretty(value)?;
        self.bytes(rel, &data)
    }

    pub fn records<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> Result<()> {
        let data = records_csv(rows)?;
        self.bytes(rel, &data)
    }

    pub fn gridfn(&mut self, rel: &str, f: &GridFn) -> Result<()> {
        let data = gridfn_csv(f)?;
        self.bytes(rel, &data)?;
        let side = Path::new(rel).with_extension("grid.json");
        self.json(&side.to_string_lossy(), &f.grid().meta())
    }

    pub fn trace(&mut self, rel: &str, t: &InversionTrace) -> Result<()> {
        let data = trace_csv(t)?;
        self.bytes(rel, &data)
    }

    /// Same layout as [`write_diffusion_problem`], with `name` relative to the root.
    pub fn diffusion_problem(&mut self, name: &str, p: &DiffusionProblem) -> Result<()> {
        let base = Path::new(name).file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let mut field = |f: &GridFn, tag: &str| -> Result<FieldRef> {
            let (lo, hi) = (f.min(), f.max());
            if lo == hi {
                return Ok(FieldRef::Scalar(lo));
            }
            self.gridfn(&format!("{name}.{tag}.csv"), f)?;
            Ok(FieldRef::Csv { csv: format!("{base}.{tag}.csv") })
        };
        let spec = DiffusionSpec {
            grid: p.grid().meta(),
            gamma: p.gamma(),
            kappa: p.kappa(),
            source: field(p.source(), "source")?,
            sigma: field(p.sigma(), "sigma")?,
        };
        self.json(&format!("{name}.json"), &spec)
    }

    pub fn artifacts(&self) -> &[ArtifactRecord] {
        &self.records
    }
}
