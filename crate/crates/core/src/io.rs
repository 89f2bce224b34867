//! On-disk formats: headerless CSV matrices, JSON manifests for networks,
//! dictionaries, classifiers and synthetic instances, and trace CSVs.
//!
//! Paths inside manifests are relative to the manifest's directory. Every
//! writer goes through [`write_atomic`], so a file either has its full new
//! contents or does not change.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::solver::{Trace, TraceRecord};
use crate::synth::{InstanceSpec, Landscape, RealizableInstance, SyntheticClassifier};
use crate::{Activation, AttackDictionary, BlockId, BlockIndex, Error, GeneratorNetwork, Matrix, Result, Vector};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Parse { path: path.to_path_buf(), msg: msg.to_string() }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let name = path.file_name().ok_or_else(|| Error::arg(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Serializes rows of numbers with the shortest round-trip decimal form.
fn rows_to_csv<I>(rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| Error::arg(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::arg(e.to_string()))
}

pub fn matrix_to_csv(m: &Matrix) -> Result<Vec<u8>> {
    rows_to_csv(m.rows().into_iter().map(|r| r.iter().map(|v| v.to_string()).collect()))
}

/// Parses headerless numeric CSV. Every row must have the same width.
pub fn matrix_from_csv(text: &str, path: &Path) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(parse_err(path, format!("row {} has {} fields, expected {c}", i + 1, rec.len())))
            }
            _ => {}
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, format!("row {}, column {}: {field:?} is not a number", i + 1, j + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(path, "no data"))?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| parse_err(path, e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    matrix_from_csv(&read_text(path)?, path)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_atomic(path, &matrix_to_csv(m)?)
}

/// Reads a vector stored as a single row or a single column.
pub fn read_vector(path: &Path) -> Result<Vector> {
    let m = read_matrix(path)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(parse_err(path, format!("expected a vector, found a {}×{} matrix", m.nrows(), m.ncols())));
    }
    Ok(Array1::from_iter(m.iter().copied()))
}

/// Writes a vector as one value per line.
pub fn write_vector(path: &Path, v: &Vector) -> Result<()> {
    let col = v.clone().into_shape_with_order((v.len(), 1)).expect("contiguous");
    write_matrix(path, &col)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| parse_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::arg(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkManifest {
    pub activation: Activation,
    /// One CSV per layer, first layer first.
    pub layers: Vec<PathBuf>,
}

pub fn read_network(manifest_path: &Path) -> Result<GeneratorNetwork> {
    let manifest: NetworkManifest = read_json(manifest_path)?;
    let base = base_dir(manifest_path);
    let weights = manifest.layers.iter().map(|p| read_matrix(&base.join(p))).collect::<Result<Vec<_>>>()?;
    GeneratorNetwork::new(weights, manifest.activation)
}

/// Writes `<stem>_layer<i>.csv` files and the `<stem>.json` manifest into `dir`.
/// Returns every path written, manifest last.
pub fn write_network(dir: &Path, stem: &str, g: &GeneratorNetwork) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut layers = Vec::new();
    for (i, w) in g.weights().iter().enumerate() {
        let name = PathBuf::from(format!("{stem}_layer{i}.csv"));
        write_matrix(&dir.join(&name), w)?;
        written.push(dir.join(&name));
        layers.push(name);
    }
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &NetworkManifest { activation: g.activation(), layers })?;
    written.push(path);
    Ok(written)
}

/// One dictionary block; `cols` is the half-open column range `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub signal_class: i64,
    pub attack_type: i64,
    pub cols: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryManifest {
    pub matrix: PathBuf,
    pub blocks: Vec<BlockEntry>,
}

pub fn block_entries(index: &BlockIndex) -> Vec<BlockEntry> {
    index
        .blocks()
        .iter()
        .map(|b| {
            let (signal_class, attack_type) = b.label();
            let r = b.range();
            BlockEntry { signal_class, attack_type, cols: [r.start, r.end] }
        })
        .collect()
}

pub fn index_from_entries(entries: &[BlockEntry]) -> Result<BlockIndex> {
    let mut sorted = entries.to_vec();
    sorted.sort_by_key(|e| e.cols[0]);
    let mut next = 0;
    let mut sizes = Vec::with_capacity(sorted.len());
    for e in &sorted {
        if e.cols[0] != next || e.cols[1] <= e.cols[0] {
            return Err(Error::arg(format!(
                "block ({}, {}) covers [{}, {}); blocks must tile the columns contiguously from 0",
                e.signal_class, e.attack_type, e.cols[0], e.cols[1]
            )));
        }
        next = e.cols[1];
        sizes.push((e.signal_class, e.attack_type, e.cols[1] - e.cols[0]));
    }
    BlockIndex::from_sizes(&sizes)
}

pub fn read_dictionary(manifest_path: &Path) -> Result<AttackDictionary> {
    let manifest: DictionaryManifest = read_json(manifest_path)?;
    let matrix = read_matrix(&base_dir(manifest_path).join(&manifest.matrix))?;
    let index = index_from_entries(&manifest.blocks).map_err(|e| parse_err(manifest_path, e))?;
    AttackDictionary::new(matrix, index)
}

/// Writes `<stem>.csv` and the `<stem>.json` block manifest into `dir`.
pub fn write_dictionary(dir: &Path, stem: &str, dict: &AttackDictionary) -> Result<Vec<PathBuf>> {
    let matrix = PathBuf::from(format!("{stem}.csv"));
    write_matrix(&dir.join(&matrix), dict.matrix())?;
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &DictionaryManifest { matrix: matrix.clone(), blocks: block_entries(dict.index()) })?;
    Ok(vec![dir.join(matrix), path])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierManifest {
    pub activation: Activation,
    /// `k × m` inner weights.
    pub inner: PathBuf,
    pub signs: Vec<f64>,
}

pub fn read_classifier(manifest_path: &Path) -> Result<SyntheticClassifier> {
    let manifest: ClassifierManifest = read_json(manifest_path)?;
    let inner = read_matrix(&base_dir(manifest_path).join(&manifest.inner))?;
    SyntheticClassifier::new(inner, Array1::from(manifest.signs), manifest.activation)
}

pub fn write_classifier(dir: &Path, stem: &str, psi: &SyntheticClassifier) -> Result<Vec<PathBuf>> {
    let inner = PathBuf::from(format!("{stem}_inner.csv"));
    write_matrix(&dir.join(&inner), psi.inner())?;
    let path = dir.join(format!("{stem}.json"));
    let manifest = ClassifierManifest { activation: psi.activation(), inner: inner.clone(), signs: psi.signs().to_vec() };
    write_json(&path, &manifest)?;
    Ok(vec![dir.join(inner), path])
}

const TRACE_HEADER: [&str; 8] = ["iter", "loss", "f", "grad_z", "grad_c", "dist_z", "dist_c", "mu"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_to_csv(trace: &Trace) -> Result<Vec<u8>> {
    let header = std::iter::once(TRACE_HEADER.iter().map(|s| s.to_string()).collect());
    let rows = trace.records.iter().map(|r| {
        vec![
            r.iter.to_string(),
            r.loss.to_string(),
            r.f.to_string(),
            r.grad_z.to_string(),
            r.grad_c.to_string(),
            opt(r.dist_z),
            opt(r.dist_c),
            opt(r.mu),
        ]
    });
    rows_to_csv(header.chain(rows))
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    write_atomic(path, &trace_to_csv(trace)?)
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| parse_err(path, e))?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(parse_err(path, format!("unexpected trace header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| parse_err(path, format!("{s:?} is not a number"))) };
    let maybe = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        records.push(TraceRecord {
            iter: rec[0].parse().map_err(|_| parse_err(path, format!("{:?} is not an iteration", &rec[0])))?,
            loss: num(&rec[1])?,
            f: num(&rec[2])?,
            grad_z: num(&rec[3])?,
            grad_c: num(&rec[4])?,
            dist_z: maybe(&rec[5])?,
            dist_c: maybe(&rec[6])?,
            mu: maybe(&rec[7])?,
        });
    }
    Ok(Trace { records })
}

const LANDSCAPE_CORNER: &str = "z1\\z2";

/// Grid CSV: the first row holds the `z2` axis after a corner label, and
/// every later row starts with its `z1` coordinate.
pub fn landscape_to_csv(l: &Landscape) -> Result<Vec<u8>> {
    let header = std::iter::once(
        std::iter::once(LANDSCAPE_CORNER.to_string()).chain(l.z2.iter().map(|v| v.to_string())).collect(),
    );
    let rows = l.z1.iter().zip(l.values.rows()).map(|(z1, row)| {
        std::iter::once(z1.to_string()).chain(row.iter().map(|v| v.to_string())).collect()
    });
    rows_to_csv(header.chain(rows))
}

pub fn write_landscape(path: &Path, l: &Landscape) -> Result<()> {
    write_atomic(path, &landscape_to_csv(l)?)
}

pub fn read_landscape(path: &Path) -> Result<Landscape> {
    let text = read_text(path)?;
    let (head, body) = text.split_once('\n').ok_or_else(|| parse_err(path, "missing axis header"))?;
    let head = head.trim_end_matches('\r');
    let z2_text = head
        .strip_prefix(LANDSCAPE_CORNER)
        .and_then(|r| r.strip_prefix(','))
        .ok_or_else(|| parse_err(path, "first row must start with the axis label"))?;
    let z2 = matrix_from_csv(z2_text, path)?.iter().copied().collect::<Vec<_>>();
    let grid = matrix_from_csv(body, path)?;
    if grid.ncols() != z2.len() + 1 {
        return Err(parse_err(path, "grid width does not match the z2 axis"));
    }
    let z1 = grid.column(0).to_vec();
    let values = grid.slice(ndarray::s![.., 1..]).to_owned();
    Ok(Landscape { z1, z2, values })
}

/// `instance.json` inside an instance directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub spec: Option<InstanceSpec>,
    pub lambda: f64,
    pub network: PathBuf,
    pub dictionary: Option<PathBuf>,
    pub classifier: Option<PathBuf>,
    pub observed: PathBuf,
    pub z_star: PathBuf,
    pub c_star: PathBuf,
    pub true_block: Option<usize>,
    /// `(signal_class, attack_type)` of the true block.
    pub true_label: Option<(i64, i64)>,
    pub blocks: Vec<BlockEntry>,
}

pub const INSTANCE_MANIFEST: &str = "instance.json";

/// Writes every matrix of the instance plus `instance.json` (last) into `dir`.
pub fn write_instance(dir: &Path, inst: &RealizableInstance) -> Result<Vec<PathBuf>> {
    let p = &inst.problem;
    let mut written = write_network(dir, "network", p.generator())?;
    let dictionary = if p.dictionary().is_empty() {
        None
    } else {
        written.extend(write_dictionary(dir, "dictionary", p.dictionary())?);
        Some(PathBuf::from("dictionary.json"))
    };
    let classifier = match &inst.classifier {
        Some(psi) => {
            written.extend(write_classifier(dir, "classifier", psi)?);
            Some(PathBuf::from("classifier.json"))
        }
        None => None,
    };
    for (name, v) in [("observed.csv", p.observed()), ("z_star.csv", &inst.z_star), ("c_star.csv", inst.c_star.values())] {
        write_vector(&dir.join(name), v)?;
        written.push(dir.join(name));
    }
    let manifest = InstanceManifest {
        spec: inst.spec.clone(),
        lambda: p.lambda(),
        network: "network.json".into(),
        dictionary,
        classifier,
        observed: "observed.csv".into(),
        z_star: "z_star.csv".into(),
        c_star: "c_star.csv".into(),
        true_block: inst.true_block.map(|b| b.0),
        true_label: inst.true_label(),
        blocks: block_entries(p.dictionary().index()),
    };
    let path = dir.join(INSTANCE_MANIFEST);
    write_json(&path, &manifest)?;
    written.push(path);
    Ok(written)
}

/// Loads an instance directory. `path` may be the directory or its manifest.
pub fn read_instance(path: &Path) -> Result<RealizableInstance> {
    let manifest_path = if path.is_dir() { path.join(INSTANCE_MANIFEST) } else { path.to_path_buf() };
    let base = base_dir(&manifest_path);
    let m: InstanceManifest = read_json(&manifest_path)?;
    let generator = read_network(&base.join(&m.network))?;
    let dictionary = match &m.dictionary {
        Some(d) => read_dictionary(&base.join(d))?,
        None => AttackDictionary::empty(generator.output_dim()),
    };
    let classifier = m.classifier.as_ref().map(|c| read_classifier(&base.join(c))).transpose()?;
    let observed = read_vector(&base.join(&m.observed))?;
    let z_star = read_vector(&base.join(&m.z_star))?;
    let c_values = if dictionary.is_empty() { Array1::zeros(0) } else { read_vector(&base.join(&m.c_star))? };
    let c_star = dictionary.coefficients(c_values)?;
    let problem = crate::RedProblem::new(observed, generator, dictionary, m.lambda)?;
    Ok(RealizableInstance { problem, z_star, c_star, classifier, true_block: m.true_block.map(BlockId), spec: m.spec })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = array![[0.1, -2.5e-300, 1.0 / 3.0], [f64::MAX, 7.0, -0.0]];
        let back = matrix_from_csv(std::str::from_utf8(&matrix_to_csv(&m).unwrap()).unwrap(), Path::new("x")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_csv_is_a_parse_error() {
        let ragged = matrix_from_csv("1,2\n3\n", Path::new("x"));
        assert!(matches!(ragged, Err(Error::Parse { .. })));
        let text = matrix_from_csv("1,abc\n", Path::new("x"));
        assert!(matches!(text, Err(Error::Parse { .. })));
        assert!(matches!(matrix_from_csv("", Path::new("x")), Err(Error::Parse { .. })));
    }

    #[test]
    fn landscape_round_trip() {
        let l = Landscape { z1: vec![-1.0, 0.5], z2: vec![0.0, 0.1, 0.2], values: array![[1.0, 2.0, 3.0], [0.25, 1e-9, 7.0]] };
        let dir = std::env::temp_dir().join(format!("red_io_landscape_{}", std::process::id()));
        let path = dir.join("grid.csv");
        write_landscape(&path, &l).unwrap();
        assert_eq!(read_landscape(&path).unwrap(), l);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn block_entries_round_trip() {
        let idx = BlockIndex::from_sizes(&[(0, 0, 2), (1, 2, 3)]).unwrap();
        let entries = block_entries(&idx);
        assert_eq!(entries[1], BlockEntry { signal_class: 1, attack_type: 2, cols: [2, 5] });
        assert_eq!(index_from_entries(&entries).unwrap(), idx);
        let gap = [BlockEntry { signal_class: 0, attack_type: 0, cols: [1, 2] }];
        assert!(index_from_entries(&gap).is_err());
    }
}
