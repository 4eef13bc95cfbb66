//! On-disk container shared by datasets and checkpoints: a `manifest.json`
//! with sorted keys next to one raw little-endian `f64` file per array.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use astral::problems::SampleKey;
use astral::{EllipticProblem, Family, ScalarField, SpdTensorField, TensorGrid};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayEntry {
    pub file: String,
    pub shape: Vec<usize>,
    pub dtype: String,
}

impl ArrayEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub type ArrayIndex = BTreeMap<String, ArrayEntry>;

/// Writes `value` as pretty JSON with keys in sorted order.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    let mut text = serde_json::to_string_pretty(&v).expect("a JSON value always serialises");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<M: DeserializeOwned>(path: &Path) -> Result<M, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

pub fn write_array(dir: &Path, index: &mut ArrayIndex, name: &str, shape: Vec<usize>, data: &[f64]) -> Result<(), CliError> {
    let n: usize = shape.iter().product();
    if n != data.len() {
        return Err(CliError::Format(format!("array `{name}`: shape {shape:?} does not hold {} values", data.len())));
    }
    let file = format!("{name}.f64");
    let bytes: Vec<u8> = data.iter().flat_map(|x| x.to_le_bytes()).collect();
    let path = dir.join(&file);
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    index.insert(name.to_string(), ArrayEntry { file, shape, dtype: "f64".into() });
    Ok(())
}

pub fn read_array(dir: &Path, index: &ArrayIndex, name: &str) -> Result<(Vec<usize>, Vec<f64>), CliError> {
    let entry = index.get(name).ok_or_else(|| CliError::Format(format!("array `{name}` is not in the manifest")))?;
    let path = dir.join(&entry.file);
    let bytes = fs::read(&path).map_err(|e| CliError::Format(format!("array `{name}`: {}: {e}", path.display())))?;
    check_length(name, entry, bytes.len())?;
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Ok((entry.shape.clone(), data))
}

fn check_length(name: &str, entry: &ArrayEntry, bytes: usize) -> Result<(), CliError> {
    if entry.dtype != "f64" {
        return Err(CliError::Format(format!("array `{name}`: unsupported element type `{}`", entry.dtype)));
    }
    if bytes != 8 * entry.len() {
        return Err(CliError::Format(format!(
            "array `{name}`: file has {bytes} bytes, shape {:?} needs {}",
            entry.shape,
            8 * entry.len()
        )));
    }
    Ok(())
}

/// Checks that every listed array exists with the byte length its shape implies.
pub fn validate_arrays(dir: &Path, index: &ArrayIndex) -> Result<(), CliError> {
    for (name, entry) in index {
        let path = dir.join(&entry.file);
        let meta = fs::metadata(&path).map_err(|e| CliError::Format(format!("array `{name}`: {}: {e}", path.display())))?;
        check_length(name, entry, meta.len() as usize)?;
    }
    Ok(())
}

fn check_version(version: u32, dir: &Path) -> Result<(), CliError> {
    if version != FORMAT_VERSION {
        return Err(CliError::Format(format!(
            "{}: format version {version} is not supported (expected {FORMAT_VERSION})",
            dir.display()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub master_seed: u64,
    pub index: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub family: String,
    pub dim: usize,
    #[serde(rename = "J")]
    pub level: u32,
    pub n_samples: usize,
    pub master_seed: u64,
    /// Whether `a` is stored as the three fields `a11, a12, a22` or as one scalar.
    pub full_tensor: bool,
    pub samples: Vec<Option<SampleRecord>>,
    pub arrays: ArrayIndex,
    pub provenance: BTreeMap<String, serde_json::Value>,
}

/// A dataset directory opened for reading and appending arrays.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let manifest: DatasetManifest = read_json(&dir.join(MANIFEST))?;
        check_version(manifest.format_version, dir)?;
        if manifest.samples.len() != manifest.n_samples {
            return Err(CliError::Format(format!("{}: sample list does not match n_samples", dir.display())));
        }
        validate_arrays(dir, &manifest.arrays)?;
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    pub fn grid(&self) -> Result<TensorGrid<f64>, CliError> {
        grid_for(self.manifest.dim, self.manifest.level)
    }

    pub fn family(&self) -> Result<Family, CliError> {
        self.manifest.family.parse().map_err(|e| CliError::Format(format!("{}: {e}", self.dir.display())))
    }

    pub fn has(&self, name: &str) -> bool {
        self.manifest.arrays.contains_key(name)
    }

    pub fn read(&self, name: &str) -> Result<(Vec<usize>, Vec<f64>), CliError> {
        read_array(&self.dir, &self.manifest.arrays, name)
    }

    /// One field per sample from an array of shape `[n, nodes...]`.
    pub fn read_fields(&self, name: &str) -> Result<Vec<ScalarField<f64>>, CliError> {
        let grid = self.grid()?;
        let (shape, data) = self.read(name)?;
        if shape.first() != Some(&self.manifest.n_samples) || shape[1..].iter().product::<usize>() != grid.len() {
            return Err(CliError::Format(format!("array `{name}`: shape {shape:?} does not match the dataset grid")));
        }
        data.chunks(grid.len())
            .map(|c| ScalarField::new(grid, c.to_vec()).map_err(|e| CliError::Format(format!("array `{name}`: {e}"))))
            .collect()
    }

    /// Writes (or replaces) an array and rewrites the manifest.
    pub fn append(&mut self, name: &str, shape: Vec<usize>, data: &[f64]) -> Result<(), CliError> {
        write_array(&self.dir, &mut self.manifest.arrays, name, shape, data)?;
        write_json(&self.dir.join(MANIFEST), &self.manifest)
    }

    pub fn field_shape(&self) -> Result<Vec<usize>, CliError> {
        let grid = self.grid()?;
        let mut shape = vec![self.manifest.n_samples];
        shape.extend(std::iter::repeat_n(grid.nodes_per_axis(), self.manifest.dim));
        Ok(shape)
    }

    pub fn problems(&self) -> Result<Vec<EllipticProblem<f64>>, CliError> {
        read_dataset(&self.dir)
    }
}

pub fn grid_for(dim: usize, level: u32) -> Result<TensorGrid<f64>, CliError> {
    let grid = match dim {
        1 => TensorGrid::interval(level),
        2 => TensorGrid::square(level),
        _ => return Err(CliError::Format(format!("unsupported dimension {dim}"))),
    };
    grid.map_err(|e| CliError::Format(e.to_string()))
}

/// Metadata that is not recoverable from the problems themselves.
#[derive(Clone, Debug, Default)]
pub struct DatasetInfo {
    pub master_seed: u64,
    pub provenance: BTreeMap<String, serde_json::Value>,
}

/// Writes `problems` to `dir`, which is created if needed. All problems must share
/// one family and grid; `grid` describes the (possibly empty) dataset.
pub fn write_dataset(
    dir: &Path,
    family: Family,
    grid: TensorGrid<f64>,
    problems: &[EllipticProblem<f64>],
    info: &DatasetInfo,
) -> Result<Dataset, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let dim = grid.spatial_dim();
    let full = problems.iter().any(|p| p.a.a12().is_some());
    for p in problems {
        if *p.grid() != grid || p.family != family {
            return Err(CliError::Format("all problems of a dataset must share one family and grid".into()));
        }
        if full != p.a.a12().is_some() {
            return Err(CliError::Format("problems mix scalar and tensor coefficients".into()));
        }
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        family: family.tag().into(),
        dim,
        level: grid.level(),
        n_samples: problems.len(),
        master_seed: info.master_seed,
        full_tensor: full,
        samples: problems.iter().map(|p| p.key.map(|k| SampleRecord { master_seed: k.master_seed, index: k.index })).collect(),
        arrays: ArrayIndex::new(),
        provenance: info.provenance.clone(),
    };
    let mut ds = Dataset { dir: dir.to_path_buf(), manifest };
    let shape = ds.field_shape()?;
    let stack = |get: &dyn Fn(&EllipticProblem<f64>) -> &ScalarField<f64>| -> Vec<f64> {
        problems.iter().flat_map(|p| get(p).values().iter().copied()).collect()
    };
    let mut arrays: Vec<(&str, Vec<f64>)> = vec![("a11", stack(&|p| p.a.a11()))];
    if full {
        arrays.push(("a12", stack(&|p| p.a.a12().expect("checked"))));
        arrays.push(("a22", stack(&|p| p.a.a22().expect("checked"))));
    }
    arrays.push(("b_sq", stack(&|p| &p.b_sq)));
    arrays.push(("f", stack(&|p| &p.f)));
    let with_exact = problems.iter().filter(|p| p.exact_solution.is_some()).count();
    if with_exact > 0 {
        if with_exact != problems.len() {
            return Err(CliError::Format("either every problem or none carries an exact solution".into()));
        }
        arrays.push(("exact_solution", stack(&|p| p.exact_solution.as_ref().expect("checked"))));
    }
    for (name, data) in arrays {
        write_array(dir, &mut ds.manifest.arrays, name, shape.clone(), &data)?;
    }
    write_json(&dir.join(MANIFEST), &ds.manifest)?;
    Ok(ds)
}

pub fn read_dataset(dir: &Path) -> Result<Vec<EllipticProblem<f64>>, CliError> {
    let ds = Dataset::open(dir)?;
    let family = ds.family()?;
    let n = ds.manifest.n_samples;
    let a11 = ds.read_fields("a11")?;
    let off = if ds.manifest.full_tensor { Some((ds.read_fields("a12")?, ds.read_fields("a22")?)) } else { None };
    let b_sq = ds.read_fields("b_sq")?;
    let f = ds.read_fields("f")?;
    let exact = if ds.has("exact_solution") { Some(ds.read_fields("exact_solution")?) } else { None };
    (0..n)
        .map(|i| {
            let a = match &off {
                Some((a12, a22)) => SpdTensorField::full(a11[i].clone(), a12[i].clone(), a22[i].clone()),
                None => Ok(SpdTensorField::scalar(a11[i].clone())),
            };
            let key = ds.manifest.samples[i].map(|s| SampleKey::new(s.master_seed, s.index));
            a.and_then(|a| {
                EllipticProblem::new(a, b_sq[i].clone(), f[i].clone(), exact.as_ref().map(|e| e[i].clone()), family, key)
            })
            .map_err(|e| CliError::Format(format!("sample {i}: {e}")))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format_version: u32,
    /// `pinn` or `operator`.
    pub kind: String,
    /// Network specifications and scalar state such as optimizer step counts.
    pub meta: serde_json::Value,
    /// Resolved configuration of the run that produced the checkpoint.
    pub config: serde_json::Value,
    pub arrays: ArrayIndex,
}

/// A directory of named arrays plus metadata, written by the training commands.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub dir: PathBuf,
    pub manifest: CheckpointManifest,
}

impl Checkpoint {
    pub fn create(dir: &Path, kind: &str, config: serde_json::Value) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: CheckpointManifest {
                format_version: FORMAT_VERSION,
                kind: kind.into(),
                meta: serde_json::Value::Object(Default::default()),
                config,
                arrays: ArrayIndex::new(),
            },
        })
    }

    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let manifest: CheckpointManifest = read_json(&dir.join(MANIFEST))?;
        check_version(manifest.format_version, dir)?;
        validate_arrays(dir, &manifest.arrays)?;
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    pub fn put(&mut self, name: &str, data: &[f64]) -> Result<(), CliError> {
        write_array(&self.dir, &mut self.manifest.arrays, name, vec![data.len()], data)
    }

    pub fn get(&self, name: &str) -> Result<Vec<f64>, CliError> {
        read_array(&self.dir, &self.manifest.arrays, name).map(|(_, d)| d)
    }

    pub fn finish(&self) -> Result<(), CliError> {
        write_json(&self.dir.join(MANIFEST), &self.manifest)
    }
}
