//! Synthetic letter-shaped polygon datasets: generation, augmentation
//! splits, simplified views and JSONL storage.

mod shapes;

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use shapes::{densify, generate_class_instance, ShapeClass, ShapeJitter, CLASS_NAMES, DENSIFY_JITTER};

use crate::geometry::{
    normalize, parse_geojson_features, parse_wkt, rotate, scale, shear, simplify_dp, write_wkt, GeometryError,
    Polygon, TransformTag,
};
use crate::graph::{encode_graph, GraphError, GraphRecord, PolyGraph};

pub const GENERATOR_VERSION: u32 = 1;
pub const RATIOS: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.8];
pub const DEFAULT_SIMPLIFY_TOLERANCE: f64 = 1.0;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TEST_SPLIT: &str = "test";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("transform ratio {0} is not one of 0, 0.2, 0.4, 0.6, 0.8")]
    InvalidRatio(f64),
    #[error("a random transform needs R, SC or SH, not O")]
    OriginalTransform,
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown split `{0}`")]
    UnknownSplit(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: corrupt record: {msg}")]
    CorruptRecord { path: PathBuf, line: usize, msg: String },
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

type Result<T, E = DatasetError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// An augmentation with its drawn parameters (degrees for angles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Rotate { angle: f64 },
    Scale { fx: f64, fy: f64 },
    Shear { ax: f64, ay: f64 },
}

impl Transform {
    pub fn tag(&self) -> TransformTag {
        match self {
            Transform::Identity => TransformTag::Original,
            Transform::Rotate { .. } => TransformTag::Rotated,
            Transform::Scale { .. } => TransformTag::Scaled,
            Transform::Shear { .. } => TransformTag::Sheared,
        }
    }

    /// Applies the map about the polygon's centroid, without normalizing.
    pub fn apply(&self, poly: &Polygon) -> Result<Polygon> {
        Ok(match *self {
            Transform::Identity => poly.clone(),
            Transform::Rotate { angle } => rotate(poly, angle),
            Transform::Scale { fx, fy } => scale(poly, fx, fy)?,
            Transform::Shear { ax, ay } => shear(poly, ax, ay)?,
        })
    }

    /// Draws parameters: rotation in [-75, 75] degrees, per-axis scale in
    /// [0.1, 2], per-axis shear in [-45, 45] degrees.
    pub fn random(which: TransformTag, rng: &mut impl Rng) -> Result<Self> {
        Ok(match which {
            TransformTag::Original => return Err(DatasetError::OriginalTransform),
            TransformTag::Rotated => Transform::Rotate {
                angle: rng.gen_range(-75.0..=75.0),
            },
            TransformTag::Scaled => Transform::Scale {
                fx: rng.gen_range(0.1..=2.0),
                fy: rng.gen_range(0.1..=2.0),
            },
            TransformTag::Sheared => Transform::Shear {
                ax: rng.gen_range(-45.0..=45.0),
                ay: rng.gen_range(-45.0..=45.0),
            },
        })
    }
}

/// Draws a transform of kind `which`, applies it and re-normalizes.
pub fn apply_random_transform(poly: &Polygon, rng: &mut impl Rng, which: TransformTag) -> Result<Polygon> {
    let t = Transform::random(which, rng)?;
    Ok(normalize(&t.apply(poly)?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub label: usize,
    /// Geometry before augmentation and normalization, in generator units.
    pub raw: Polygon,
    pub transform: Transform,
    /// `normalize(transform(raw))`, with `raw` simplified first when
    /// `simplified` is set.
    pub polygon: Polygon,
    pub graph: PolyGraph,
    /// Douglas-Peucker tolerance when this is a simplified view.
    pub simplified: Option<f64>,
}

impl Sample {
    pub fn new(id: usize, label: usize, raw: Polygon, transform: Transform) -> Result<Self> {
        let polygon = normalize(&transform.apply(&raw)?)?;
        let graph = encode_graph(&polygon, label);
        Ok(Self {
            id,
            label,
            raw,
            transform,
            polygon,
            graph,
            simplified: None,
        })
    }

    pub fn tag(&self) -> TransformTag {
        self.transform.tag()
    }

    /// The same sample with the raw geometry Douglas-Peucker simplified at
    /// `tolerance` before the transform is re-applied.
    pub fn simplified(&self, tolerance: f64) -> Result<Self> {
        let raw = simplify_dp(&self.raw, tolerance)?;
        let polygon = normalize(&self.transform.apply(&raw)?)?;
        let graph = encode_graph(&polygon, self.label);
        Ok(Self {
            polygon,
            graph,
            simplified: Some(tolerance),
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn graphs(&self) -> Vec<&PolyGraph> {
        self.samples.iter().map(|s| &s.graph).collect()
    }

    pub fn get(&self, id: usize) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// `counts[class][tag]`.
    pub fn counts(&self) -> Vec<[usize; 4]> {
        let mut counts = vec![[0; 4]; self.n_classes()];
        for s in &self.samples {
            counts[s.label][s.tag().index()] += 1;
        }
        counts
    }
}

fn sample_rng(seed: u64, stream: u64, id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&id.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

const STREAM_TRAIN: u64 = 1;
const STREAM_TEST: u64 = 2;
const STREAM_SINGLE: u64 = 3;
const STREAM_SPLIT: u64 = 4;

fn ratio_code(ratio: f64) -> Result<u64> {
    RATIOS
        .iter()
        .position(|r| (r - ratio).abs() < 1e-9)
        .map(|i| 20 * i as u64)
        .ok_or(DatasetError::InvalidRatio(ratio))
}

/// Split-file stem for a ratio, e.g. `train_r40`.
pub fn split_name(ratio: f64) -> Result<String> {
    Ok(format!("train_r{:02}", ratio_code(ratio)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub classes: Vec<String>,
    pub per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
    pub densify: usize,
    pub jitter: ShapeJitter,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            classes: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            per_class: 100,
            test_per_class: 40,
            seed: 0,
            densify: 3,
            jitter: ShapeJitter::default(),
        }
    }
}

impl GenConfig {
    fn shape_classes(&self) -> Result<Vec<ShapeClass>> {
        self.classes
            .iter()
            .map(|n| ShapeClass::from_name(n).ok_or_else(|| DatasetError::UnknownClass(n.clone())))
            .collect()
    }
}

/// One undensified instance of `cls` drawn from its own seeded stream.
pub fn sample_instance(cls: ShapeClass, jitter: &ShapeJitter, seed: u64) -> Polygon {
    generate_class_instance(cls, jitter, &mut sample_rng(seed, STREAM_SINGLE, cls as u64))
}

fn raw_instance(cls: ShapeClass, cfg: &GenConfig, points_per_edge: Option<usize>, rng: &mut ChaCha8Rng) -> Polygon {
    let poly = generate_class_instance(cls, &cfg.jitter, rng);
    let k = points_per_edge.unwrap_or_else(|| rng.gen_range(0..=cfg.densify));
    densify(&poly, k, rng)
}

/// Untransformed training samples, `per_class` per class, ids class-major.
/// Each sample gets between 0 and `densify` extra points per edge.
pub fn generate_base(cfg: &GenConfig) -> Result<Dataset> {
    let classes = cfg.shape_classes()?;
    if cfg.per_class == 0 || classes.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut samples = Vec::new();
    for (label, &cls) in classes.iter().enumerate() {
        for j in 0..cfg.per_class {
            let id = label * cfg.per_class + j;
            let mut rng = sample_rng(cfg.seed, STREAM_TRAIN, id as u64);
            samples.push(Sample::new(id, label, raw_instance(cls, cfg, None, &mut rng), Transform::Identity)?);
        }
    }
    Ok(Dataset {
        class_names: cfg.classes.clone(),
        samples,
    })
}

/// Test samples cycling through O, R, SC, SH within each class, all
/// densified with exactly `densify` points per edge.
pub fn generate_test(cfg: &GenConfig) -> Result<Dataset> {
    let classes = cfg.shape_classes()?;
    if cfg.test_per_class == 0 || classes.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut samples = Vec::new();
    for (label, &cls) in classes.iter().enumerate() {
        for j in 0..cfg.test_per_class {
            let id = label * cfg.test_per_class + j;
            let mut rng = sample_rng(cfg.seed, STREAM_TEST, id as u64);
            let raw = raw_instance(cls, cfg, Some(cfg.densify), &mut rng);
            let transform = match TransformTag::ALL[j % 4] {
                TransformTag::Original => Transform::Identity,
                tag => Transform::random(tag, &mut rng)?,
            };
            samples.push(Sample::new(id, label, raw, transform)?);
        }
    }
    Ok(Dataset {
        class_names: cfg.classes.clone(),
        samples,
    })
}

/// Integer quotas summing to `round(ratio * total)`, proportional to
/// `sizes` by largest remainder (ties to the lower class index).
fn quotas(sizes: &[usize], ratio: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = (ratio * total as f64).round() as usize;
    let exact: Vec<f64> = sizes.iter().map(|&n| ratio * n as f64).collect();
    let mut q: Vec<usize> = exact.iter().map(|e| (e + 1e-9).floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - q[b] as f64).total_cmp(&(exact[a] - q[a] as f64)).then(a.cmp(&b)));
    let mut missing = target.saturating_sub(q.iter().sum());
    for &c in order.iter().cycle().take(sizes.len() * 2) {
        if missing == 0 {
            break;
        }
        if q[c] < sizes[c] {
            q[c] += 1;
            missing -= 1;
        }
    }
    q
}

/// Replaces `round(ratio * N)` samples of `base` (stratified by class) by
/// transformed variants whose kind is uniform over R, SC and SH.
pub fn build_ratio_split(base: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    let code = ratio_code(ratio)?;
    if base.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut by_class = vec![Vec::new(); base.n_classes()];
    for (i, s) in base.samples.iter().enumerate() {
        by_class[s.label].push(i);
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let quota = quotas(&sizes, ratio);
    let mut chooser = sample_rng(seed, STREAM_SPLIT, code);
    let mut samples = base.samples.clone();
    for (members, q) in by_class.iter_mut().zip(quota) {
        members.shuffle(&mut chooser);
        for &i in &members[..q] {
            let s = &base.samples[i];
            let mut rng = sample_rng(seed, STREAM_SPLIT + 1 + code, s.id as u64);
            let tag = [TransformTag::Rotated, TransformTag::Scaled, TransformTag::Sheared][rng.gen_range(0..3)];
            let transform = Transform::random(tag, &mut rng)?;
            samples[i] = Sample::new(s.id, s.label, s.raw.clone(), transform)?;
        }
    }
    Ok(Dataset {
        class_names: base.class_names.clone(),
        samples,
    })
}

/// Douglas-Peucker view of `ds`. Samples whose exterior collapses are
/// dropped; their number is returned alongside.
pub fn build_simplified_view(ds: &Dataset, tolerance: f64) -> Result<(Dataset, usize)> {
    let mut samples = Vec::with_capacity(ds.len());
    let mut dropped = 0;
    for s in &ds.samples {
        match s.simplified(tolerance) {
            Ok(v) => samples.push(v),
            Err(DatasetError::Geometry(GeometryError::ExteriorCollapsed(_))) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if dropped > 0 {
        log::warn!("simplification dropped {dropped} of {} samples", ds.len());
    }
    Ok((
        Dataset {
            class_names: ds.class_names.clone(),
            samples,
        },
        dropped,
    ))
}

/// Maps labelled polygons (for example from GeoJSON) into untransformed
/// samples. Without `class_names`, classes are the sorted distinct labels.
pub fn from_labeled_polygons(items: Vec<(Polygon, String)>, class_names: Option<Vec<String>>) -> Result<Dataset> {
    if items.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let class_names = class_names.unwrap_or_else(|| {
        let mut names: Vec<String> = items.iter().map(|(_, l)| l.clone()).collect();
        names.sort();
        names.dedup();
        names
    });
    let samples = items
        .into_iter()
        .enumerate()
        .map(|(id, (poly, label))| {
            let idx = class_names
                .iter()
                .position(|c| *c == label)
                .ok_or(DatasetError::UnknownClass(label))?;
            Sample::new(id, idx, poly, Transform::Identity)
        })
        .collect::<Result<_>>()?;
    Ok(Dataset { class_names, samples })
}

pub fn import_geojson(text: &str, label_key: &str, class_names: Option<Vec<String>>) -> Result<Dataset> {
    from_labeled_polygons(parse_geojson_features(text, label_key)?, class_names)
}

/// All splits written by [`save_generated`].
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub train: Vec<(f64, Dataset)>,
    pub test: Dataset,
}

pub fn generate_all(cfg: &GenConfig) -> Result<Generated> {
    let base = generate_base(cfg)?;
    let train = RATIOS
        .iter()
        .map(|&r| Ok((r, build_ratio_split(&base, r, cfg.seed)?)))
        .collect::<Result<_>>()?;
    Ok(Generated {
        train,
        test: generate_test(cfg)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub name: String,
    pub file: String,
    pub total: usize,
    /// `counts[class]` in `O, R, SC, SH` order.
    pub counts: Vec<[usize; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator_version: u32,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub config: Option<GenConfig>,
    pub splits: Vec<SplitEntry>,
}

impl DatasetManifest {
    pub fn split(&self, name: &str) -> Option<&SplitEntry> {
        self.splits.iter().find(|s| s.name == name)
    }
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    id: usize,
    label: usize,
    class: String,
    tag: TransformTag,
    transform: Transform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    simplified: Option<f64>,
    raw: String,
    graph: GraphRecord,
}

fn to_record(s: &Sample, class_names: &[String]) -> SampleRecord {
    SampleRecord {
        id: s.id,
        label: s.label,
        class: class_names[s.label].clone(),
        tag: s.tag(),
        transform: s.transform,
        simplified: s.simplified,
        raw: write_wkt(&s.raw),
        graph: s.graph.to_record(),
    }
}

fn from_record(rec: SampleRecord, class_names: &[String]) -> Result<Sample, String> {
    if class_names.get(rec.label) != Some(&rec.class) {
        return Err(format!("label {} does not name class `{}`", rec.label, rec.class));
    }
    if rec.tag != rec.transform.tag() {
        return Err(format!("tag {} does not match transform", rec.tag));
    }
    let raw = parse_wkt(&rec.raw).map_err(|e| e.to_string())?;
    let base = Sample::new(rec.id, rec.label, raw, rec.transform).map_err(|e| e.to_string())?;
    let sample = match rec.simplified {
        Some(tol) => base.simplified(tol).map_err(|e| e.to_string())?,
        None => base,
    };
    let graph = PolyGraph::from_record(&rec.graph).map_err(|e| e.to_string())?;
    if graph != sample.graph {
        return Err("graph does not match its geometry".into());
    }
    Ok(sample)
}

pub fn write_split(path: &Path, ds: &Dataset) -> Result<()> {
    let mut out = String::new();
    for s in &ds.samples {
        out.push_str(&serde_json::to_string(&to_record(s, &ds.class_names)).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Reads and validates a JSONL split; every record's graph must match its
/// stored geometry.
pub fn read_split(path: &Path, class_names: &[String]) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let corrupt = |msg: String| DatasetError::CorruptRecord {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        samples.push(from_record(rec, class_names).map_err(corrupt)?);
    }
    Ok(Dataset {
        class_names: class_names.to_vec(),
        samples,
    })
}

fn split_entry(name: &str, ds: &Dataset) -> SplitEntry {
    SplitEntry {
        name: name.to_string(),
        file: format!("{name}.jsonl"),
        total: ds.len(),
        counts: ds.counts(),
    }
}

/// Writes named splits plus `manifest.json` into `dir` (created if absent).
pub fn save_dataset(dir: &Path, splits: &[(&str, &Dataset)], seed: u64, config: Option<&GenConfig>) -> Result<DatasetManifest> {
    let first = splits.first().ok_or(DatasetError::EmptyDataset)?.1;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::new();
    for (name, ds) in splits {
        if ds.class_names != first.class_names {
            return Err(DatasetError::ManifestMismatch(format!("split `{name}` has different classes")));
        }
        let entry = split_entry(name, ds);
        write_split(&dir.join(&entry.file), ds)?;
        entries.push(entry);
    }
    let manifest = DatasetManifest {
        generator_version: GENERATOR_VERSION,
        seed,
        class_names: first.class_names.clone(),
        config: config.cloned(),
        splits: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::File::create(&path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn save_generated(dir: &Path, data: &Generated, cfg: &GenConfig) -> Result<DatasetManifest> {
    let names: Vec<String> = data.train.iter().map(|(r, _)| split_name(*r)).collect::<Result<_>>()?;
    let mut splits: Vec<(&str, &Dataset)> = names.iter().map(String::as_str).zip(data.train.iter().map(|(_, d)| d)).collect();
    splits.push((TEST_SPLIT, &data.test));
    save_dataset(dir, &splits, cfg.seed, Some(cfg))
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::CorruptRecord {
        path,
        line: e.line(),
        msg: e.to_string(),
    })
}

/// Loads one split of the dataset in `dir` and checks it against the
/// manifest counts.
pub fn load_dataset(dir: &Path, split: &str) -> Result<Dataset> {
    let manifest = load_manifest(dir)?;
    let entry = manifest
        .split(split)
        .ok_or_else(|| DatasetError::UnknownSplit(split.to_string()))?;
    let ds = read_split(&dir.join(&entry.file), &manifest.class_names)?;
    if ds.len() != entry.total || ds.counts() != entry.counts {
        return Err(DatasetError::ManifestMismatch(format!(
            "split `{split}` has {} records, manifest lists {}",
            ds.len(),
            entry.total
        )));
    }
    Ok(ds)
}
