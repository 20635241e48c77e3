//! CSV tables and JSON sidecars.
//!
//! CSV dialect: UTF-8, `,` separator, `.` decimal, one header row, no
//! quoting. Floats are written in shortest round-trip form, so a read after
//! a write returns the same bits.

use std::fs;
use std::path::{Path, PathBuf};

use manidens_core::charts::Chart;
use manidens_core::geometry::{DensityKind, ManifoldSpec, PointCloud, Truth};
use manidens_core::kernels::{KernelRecord, RadialKernel};
use manidens_core::numerics::Projector;
use manidens_core::volume::{VolumeEstimate, VolumeProvenance};
use manidens_core::{PointSet, WeightedMeasure};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // drop the sign of -0.0 so equal measures print equal bytes
        return "0".into();
    }
    let mut b = ryu::Buffer::new();
    let s = b.format(x);
    s.strip_suffix(".0").unwrap_or(s).to_string()
}

/// Path of the JSON sidecar next to a CSV file: `a/b.csv -> a/b.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable value");
    v.push(b'\n');
    v
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_bytes(path, &to_json_bytes(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let line = e.inner().line();
        let key = e.path().to_string();
        CliError::format(path, line, format!("at `{key}`: {}", e.inner()))
    })
}

/// A numeric table with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Indices of the columns `prefix0, prefix1, ..` in order.
    pub fn prefixed(&self, prefix: &str) -> Vec<usize> {
        let mut out = Vec::new();
        while let Some(i) = self.column(&format!("{prefix}{}", out.len())) {
            out.push(i);
        }
        out
    }
}

pub fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Never).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_table(path: &Path, table: &Table) -> CliResult<()> {
    let rows = table.rows.iter().map(|r| r.iter().map(|&x| fmt_f64(x)).collect());
    write_bytes(path, &csv_bytes(&table.header, rows))
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let header: Vec<String> =
        r.headers().map_err(|e| CliError::format(path, 1, e.to_string()))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::format(path, line, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(CliError::format(path, line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| CliError::format(path, line, format!("not a number: `{f}`"))))
            .collect::<CliResult<Vec<f64>>>()?;
        if row.iter().any(|x| !x.is_finite()) {
            return Err(CliError::format(path, line, "non-finite value"));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn coord_header(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (0..dim).map(move |i| format!("{prefix}{i}"))
}

fn gather(table: &Table, cols: &[usize], path: &Path) -> CliResult<PointSet> {
    let mut flat = Vec::with_capacity(table.rows.len() * cols.len());
    for r in &table.rows {
        flat.extend(cols.iter().map(|&c| r[c]));
    }
    PointSet::from_flat(cols.len(), flat).map_err(|e| CliError::format(path, 1, e.to_string()))
}

fn require_coords(table: &Table, path: &Path) -> CliResult<Vec<usize>> {
    let xs = table.prefixed("x");
    if xs.is_empty() {
        return Err(CliError::format(path, 1, "missing coordinate columns x0, x1, .."));
    }
    Ok(xs)
}

/// Sidecar of a point cloud file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSidecar {
    pub manifold: ManifoldSpec,
    pub density: DensityKind,
    pub n: usize,
    pub seed: u64,
    pub gamma: f64,
}

/// Columns `x*`, then `y*` (base points) and `z*` (noise) when the truth is
/// known.
pub fn cloud_table(cloud: &PointCloud) -> Table {
    let dd = cloud.points.dim();
    let mut header: Vec<String> = coord_header("x", dd).collect();
    if cloud.truth.is_some() {
        header.extend(coord_header("y", dd));
        header.extend(coord_header("z", dd));
    }
    let rows = (0..cloud.len())
        .map(|i| {
            let mut r = cloud.points.row(i).to_vec();
            if let Some(t) = &cloud.truth {
                r.extend_from_slice(t.base.row(i));
                r.extend_from_slice(t.noise.row(i));
            }
            r
        })
        .collect();
    Table { header, rows }
}

pub fn write_cloud(path: &Path, cloud: &PointCloud, sidecar: &CloudSidecar) -> CliResult<()> {
    write_table(path, &cloud_table(cloud))?;
    write_json(&sidecar_path(path), sidecar)
}

/// Reads a cloud. The truth is rebuilt when `y*`/`z*` columns are present
/// and the manifold is known: parameters by inverting the embedding, frames
/// from the analytic tangent spaces.
pub fn read_cloud(path: &Path, manifold: Option<&ManifoldSpec>) -> CliResult<PointCloud> {
    let t = read_table(path)?;
    let xs = require_coords(&t, path)?;
    let points = gather(&t, &xs, path)?;
    let (ys, zs) = (t.prefixed("y"), t.prefixed("z"));
    let truth = match manifold {
        Some(spec) if ys.len() == xs.len() && zs.len() == xs.len() => {
            if spec.ambient_dim != xs.len() {
                return Err(CliError::format(path, 1, format!("{} coordinates, manifold has {}", xs.len(), spec.ambient_dim)));
            }
            let base = gather(&t, &ys, path)?;
            let noise = gather(&t, &zs, path)?;
            let d = spec.intrinsic_dim();
            let mut params = PointSet::with_capacity(d, base.len());
            let mut frames = Vec::with_capacity(base.len() * spec.ambient_dim * d);
            for y in base.rows() {
                let q = spec.locate(y);
                frames.extend_from_slice(&spec.tangent_frame(&q));
                params.push(&q);
            }
            Some(Truth { base, params, frames, noise })
        }
        _ => None,
    };
    Ok(PointCloud { points, truth })
}

/// Reads the sidecar of a cloud if it exists.
pub fn read_cloud_sidecar(path: &Path) -> CliResult<Option<CloudSidecar>> {
    let p = sidecar_path(path);
    if p.exists() {
        read_json(&p).map(Some)
    } else {
        Ok(None)
    }
}

/// Flags stored next to a measure file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSidecar {
    pub mass: f64,
    pub nonnegative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn measure_table(m: &WeightedMeasure) -> Table {
    let mut header: Vec<String> = coord_header("x", m.dim()).collect();
    header.push("weight".into());
    let rows = (0..m.len())
        .map(|i| {
            let mut r = m.support.row(i).to_vec();
            r.push(m.weights[i]);
            r
        })
        .collect();
    Table { header, rows }
}

pub fn write_measure(path: &Path, m: &WeightedMeasure, sidecar: &MeasureSidecar) -> CliResult<()> {
    write_table(path, &measure_table(m))?;
    write_json(&sidecar_path(path), sidecar)
}

/// Reads `x*,weight`; a file without a weight column is an empirical
/// measure.
pub fn read_measure(path: &Path) -> CliResult<WeightedMeasure> {
    let t = read_table(path)?;
    let xs = require_coords(&t, path)?;
    let support = gather(&t, &xs, path)?;
    let m = match t.column("weight") {
        Some(w) => WeightedMeasure::new(support, t.rows.iter().map(|r| r[w]).collect()),
        None => WeightedMeasure::empirical(support),
    };
    m.map_err(|e| CliError::format(path, 1, e.to_string()))
}

pub fn volume_table(v: &VolumeEstimate) -> Table {
    let mut header: Vec<String> = coord_header("x", v.nodes.dim()).collect();
    header.push("weight".into());
    header.push("patch".into());
    let rows = (0..v.len())
        .map(|i| {
            let mut r = v.nodes.row(i).to_vec();
            r.push(v.weights[i]);
            r.push(v.patch[i] as f64);
            r
        })
        .collect();
    Table { header, rows }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeSidecar {
    pub total_mass: f64,
    pub patches: usize,
    pub provenance: VolumeProvenance,
}

pub fn write_volume(path: &Path, v: &VolumeEstimate, patches: usize) -> CliResult<()> {
    write_table(path, &volume_table(v))?;
    write_json(&sidecar_path(path), &VolumeSidecar { total_mass: v.total_mass, patches, provenance: v.provenance.clone() })
}

/// Reads a volume estimate; the provenance comes from the sidecar.
pub fn read_volume(path: &Path) -> CliResult<VolumeEstimate> {
    let t = read_table(path)?;
    let xs = require_coords(&t, path)?;
    let (Some(w), Some(p)) = (t.column("weight"), t.column("patch")) else {
        return Err(CliError::format(path, 1, "missing `weight` or `patch` column"));
    };
    let nodes = gather(&t, &xs, path)?;
    let weights: Vec<f64> = t.rows.iter().map(|r| r[w]).collect();
    let mut patch = Vec::with_capacity(t.rows.len());
    for (i, r) in t.rows.iter().enumerate() {
        let v = r[p];
        if v < 0.0 || v.fract() != 0.0 {
            return Err(CliError::format(path, i + 2, "patch must be a nonnegative integer"));
        }
        patch.push(v as usize);
    }
    if let Some(i) = weights.iter().position(|&x| x < 0.0) {
        return Err(CliError::format(path, i + 2, "negative volume weight"));
    }
    let side: VolumeSidecar = read_json(&sidecar_path(path))?;
    let total_mass = weights.iter().sum();
    Ok(VolumeEstimate { nodes, weights, patch, total_mass, provenance: side.provenance })
}

pub fn write_indices(path: &Path, name: &str, idx: &[usize]) -> CliResult<()> {
    let rows = idx.iter().map(|i| vec![i.to_string()]);
    write_bytes(path, &csv_bytes(&[name.to_string()], rows))
}

pub fn read_indices(path: &Path, name: &str) -> CliResult<Vec<usize>> {
    let t = read_table(path)?;
    let c = t.column(name).ok_or_else(|| CliError::format(path, 1, format!("missing `{name}` column")))?;
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let v = r[c];
            if v < 0.0 || v.fract() != 0.0 {
                Err(CliError::format(path, i + 2, "expected a nonnegative integer"))
            } else {
                Ok(v as usize)
            }
        })
        .collect()
}

/// Charts file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartsFile {
    pub d: usize,
    pub m: usize,
    pub epsilon: f64,
    pub ell: f64,
    pub charts: Vec<Chart>,
}

pub fn write_charts(path: &Path, file: &ChartsFile) -> CliResult<()> {
    write_json(path, file)
}

/// Reads charts and checks that each basis is orthonormal.
pub fn read_charts(path: &Path) -> CliResult<ChartsFile> {
    let file: ChartsFile = read_json(path)?;
    for (j, c) in file.charts.iter().enumerate() {
        Projector::new(c.projector.basis())
            .map_err(|e| CliError::format(path, 1, format!("chart {j}: {e}")))?;
        if c.center.len() != c.projector.ambient_dim() || c.projector.rank() != file.d {
            return Err(CliError::format(path, 1, format!("chart {j}: inconsistent dimensions")));
        }
    }
    Ok(file)
}

pub fn write_kernel(path: &Path, k: &RadialKernel) -> CliResult<()> {
    write_json(path, &k.to_record())
}

/// Imports a kernel; the certificate is recomputed and must match.
pub fn read_kernel(path: &Path) -> CliResult<RadialKernel> {
    let rec: KernelRecord = read_json(path)?;
    Ok(RadialKernel::from_record(&rec)?)
}
