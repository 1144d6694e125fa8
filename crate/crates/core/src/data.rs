//! Data sets, file formats and PCA feature reduction.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::classifier::{BinaryTTClassifier, MulticlassModel, Scaling, Strategy};
use crate::error::{Error, Result};
use crate::poly::DegreeVector;
use crate::tt::{TTCore, TensorTrain};

/// Raw multiclass data: `N × D` features (row-major) and integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<i64>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<i64>, provenance: impl Into<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("data set"));
        }
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature values for {} samples of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Self {
            features,
            dim,
            labels,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn sample(&self, j: usize) -> &[f64] {
        &self.features[j * self.dim..(j + 1) * self.dim]
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<i64> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Position of each sample's label in `classes`.
    pub fn class_indices(&self, classes: &[i64]) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .map(|l| {
                classes.iter().position(|c| c == l).ok_or_else(|| {
                    Error::InvalidLabels(format!("label {l} is not one of {classes:?}"))
                })
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut f = Vec::with_capacity(indices.len() * self.dim);
        let mut l = Vec::with_capacity(indices.len());
        for &i in indices {
            f.extend_from_slice(self.sample(i));
            l.push(self.labels[i]);
        }
        Self::new(f, self.dim, l, format!("{} (subset)", self.provenance))
    }

    /// The first `n` samples (or all of them).
    pub fn head(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn with_features(&self, features: Vec<f64>, dim: usize) -> Result<Self> {
        Self::new(features, dim, self.labels.clone(), self.provenance.clone())
    }
}

/// Which CSV column holds the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    First,
    Last,
    /// 0-based column index.
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Self::First),
            "last" => Ok(Self::Last),
            _ => s
                .parse()
                .map(Self::Index)
                .map_err(|_| Error::InvalidConfig(format!("label column '{s}': expected first, last or an index"))),
        }
    }
}

fn parse_label(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Some(v as i64),
        _ => None,
    }
}

/// Reads a comma-separated file. A first line that does not parse as numbers
/// is treated as a header.
pub fn load_csv(path: impl AsRef<Path>, label_column: LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let all_numeric = rec.iter().all(|f| f.parse::<f64>().is_ok());
        if i == 0 && !all_numeric {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        if w < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: "need at least one feature and a label".into(),
            });
        }
        let lc = match label_column {
            LabelColumn::First => 0,
            LabelColumn::Last => w - 1,
            LabelColumn::Index(c) if c < w => c,
            LabelColumn::Index(c) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("label column {c} out of range for {w} fields"),
                })
            }
        };
        for (c, field) in rec.iter().enumerate() {
            if c == lc {
                labels.push(parse_label(field).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("label '{field}' is not an integer"),
                })?);
            } else {
                features.push(field.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("field {} ('{field}') is not a number", c + 1),
                })?);
            }
        }
    }
    let Some(w) = width else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "no data rows".into(),
        });
    };
    Dataset::new(features, w - 1, labels, format!("csv:{}", path.display()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

/// Writes features followed by the label, one sample per line, using the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for j in 0..ds.len() {
        for x in ds.sample(j) {
            write!(w, "{x:?},")?;
        }
        writeln!(w, "{}", ds.labels()[j])?;
    }
    w.flush()?;
    Ok(())
}

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(buf: &[u8], at: usize, path: &Path) -> Result<u32> {
    buf.get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx {
            path: path.to_path_buf(),
            msg: "truncated header".into(),
        })
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    Ok(buf)
}

/// Reads an IDX image file (`u8`, 3 dimensions) and its label file. Images
/// are flattened row-major to `rows·cols` features with values 0–255.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let (ipath, lpath) = (images.as_ref(), labels.as_ref());
    let ibuf = read_all(ipath)?;
    let lbuf = read_all(lpath)?;
    let idx_err = |p: &Path, msg: String| Error::Idx {
        path: p.to_path_buf(),
        msg,
    };

    let magic = read_be_u32(&ibuf, 0, ipath)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(idx_err(ipath, format!("bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let count = read_be_u32(&ibuf, 4, ipath)? as usize;
    let rows = read_be_u32(&ibuf, 8, ipath)? as usize;
    let cols = read_be_u32(&ibuf, 12, ipath)? as usize;
    let dim = rows * cols;
    let need = 16 + count * dim;
    if ibuf.len() < need {
        return Err(idx_err(ipath, format!("truncated: {} bytes, header promises {need}", ibuf.len())));
    }

    let lmagic = read_be_u32(&lbuf, 0, lpath)?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(idx_err(lpath, format!("bad magic {lmagic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let lcount = read_be_u32(&lbuf, 4, lpath)? as usize;
    if lcount != count {
        return Err(idx_err(lpath, format!("{lcount} labels for {count} images")));
    }
    if lbuf.len() < 8 + lcount {
        return Err(idx_err(lpath, format!("truncated: {} bytes, header promises {}", lbuf.len(), 8 + lcount)));
    }
    let features = ibuf[16..need].iter().map(|&b| f64::from(b)).collect();
    let labels = lbuf[8..8 + lcount].iter().map(|&b| i64::from(b)).collect();
    Dataset::new(
        features,
        dim,
        labels,
        format!("idx:{}", ipath.display()),
    )
}

/// Encodes images and labels in the IDX format (used for fixtures and exports).
pub fn idx_bytes(images: &[u8], count: usize, rows: usize, cols: usize, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut i = Vec::with_capacity(16 + images.len());
    i.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for v in [count, rows, cols] {
        i.extend_from_slice(&(v as u32).to_be_bytes());
    }
    i.extend_from_slice(images);
    let mut l = Vec::with_capacity(8 + labels.len());
    l.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    l.extend_from_slice(&(count as u32).to_be_bytes());
    l.extend_from_slice(labels);
    (i, l)
}

/// Centering plus projection onto the leading principal directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `D × d`, column-major; columns are orthonormal principal directions.
    pub basis: DMatrix<f64>,
    /// Variance along each kept direction.
    pub variances: Vec<f64>,
    /// Sum of all eigenvalues of the covariance.
    pub total_variance: f64,
}

impl Pca {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn explained_variance_ratio(&self) -> f64 {
        if self.total_variance > 0.0 {
            self.variances.iter().sum::<f64>() / self.total_variance
        } else {
            1.0
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (0..self.output_dim())
            .map(|c| {
                self.basis
                    .column(c)
                    .iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(b, (xi, m))| b * (xi - m))
                    .sum()
            })
            .collect()
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "PCA expects {} features, data has {}",
                self.input_dim(),
                ds.dim()
            )));
        }
        let f: Vec<f64> = (0..ds.len())
            .into_par_iter()
            .flat_map_iter(|j| self.project(ds.sample(j)))
            .collect();
        ds.with_features(f, self.output_dim())
    }
}

/// Rows per block in the covariance accumulation.
const PCA_BLOCK: usize = 2048;

/// Fits a `d`-component PCA. Each direction's largest-magnitude component is
/// made positive.
pub fn pca_fit(ds: &Dataset, d: usize) -> Result<Pca> {
    let (n, dim) = (ds.len(), ds.dim());
    if d == 0 || d > n.min(dim) {
        return Err(Error::InvalidConfig(format!(
            "PCA dimension {d} must be between 1 and min(N, D) = {}",
            n.min(dim)
        )));
    }
    let mut mean = vec![0.0; dim];
    for j in 0..n {
        for (m, x) in mean.iter_mut().zip(ds.sample(j)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let starts: Vec<usize> = (0..n).step_by(PCA_BLOCK).collect();
    let partials: Vec<DMatrix<f64>> = starts
        .par_iter()
        .map(|&s| {
            let len = PCA_BLOCK.min(n - s);
            let block = DMatrix::from_fn(dim, len, |i, c| ds.sample(s + c)[i] - mean[i]);
            &block * block.transpose()
        })
        .collect();
    let mut cov = DMatrix::zeros(dim, dim);
    for p in &partials {
        cov += p;
    }
    cov /= n as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut basis = DMatrix::zeros(dim, d);
    let mut variances = Vec::with_capacity(d);
    for (c, &e) in order.iter().take(d).enumerate() {
        let mut v = eig.eigenvectors.column(e).clone_owned();
        let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.neg_mut();
        }
        basis.set_column(c, &v);
        variances.push(eig.eigenvalues[e].max(0.0));
    }
    let total_variance = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    Ok(Pca {
        mean,
        basis,
        variances,
        total_variance,
    })
}

/// A trained model together with the optional PCA front end.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: MulticlassModel,
    pub pca: Option<Pca>,
}

pub const MODEL_VERSION: u32 = 1;
const MODEL_HEADER_PREFIX: &str = "TTCLASS MODEL ";

impl ModelFile {
    /// Maps raw features (e.g. pixels) to classifier inputs.
    pub fn prepare(&self, ds: &Dataset) -> Result<Dataset> {
        match &self.pca {
            Some(p) => p.apply(ds),
            None => Ok(ds.clone()),
        }
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<i64>> {
        let prepared = self.prepare(ds)?;
        self.model.predict_rows(prepared.features())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.buf.extend_from_slice(format!("{MODEL_HEADER_PREFIX}{MODEL_VERSION}\n").as_bytes());
        w.u32(match self.model.strategy {
            Strategy::OneVsAll => 0,
            Strategy::OneVsOne => 1,
            Strategy::BinaryCoding => 2,
        });
        w.u64(self.model.class_labels.len() as u64);
        for &c in &self.model.class_labels {
            w.i64(c);
        }
        w.u64(self.model.classifiers.len() as u64);
        for c in &self.model.classifiers {
            w.u64(c.degree.len() as u64);
            for &deg in c.degree.degrees() {
                w.u64(deg as u64);
            }
            w.f64s(&c.scaling.scale);
            w.f64s(&c.scaling.shift);
            w.u64(c.train.order() as u64);
            for core in c.train.cores() {
                let (rl, n, rr) = core.shape();
                w.u64(rl as u64);
                w.u64(n as u64);
                w.u64(rr as u64);
                w.f64s(core.as_slice());
            }
        }
        match &self.pca {
            None => w.u32(0),
            Some(p) => {
                w.u32(1);
                w.u64(p.input_dim() as u64);
                w.u64(p.output_dim() as u64);
                w.f64s(&p.mean);
                w.f64s(p.basis.as_slice());
                w.f64s(&p.variances);
                w.f64s(&[p.total_variance]);
            }
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::ModelFormat("missing header".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| Error::ModelFormat("header is not text".into()))?;
        let version: u32 = header
            .strip_prefix(MODEL_HEADER_PREFIX)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::ModelFormat(format!("unrecognized header '{header}'")))?;
        if version != MODEL_VERSION {
            return Err(Error::ModelVersion {
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let mut r = Reader {
            buf: &bytes[nl + 1..],
            pos: 0,
        };
        let strategy = match r.u32()? {
            0 => Strategy::OneVsAll,
            1 => Strategy::OneVsOne,
            2 => Strategy::BinaryCoding,
            s => return Err(Error::ModelFormat(format!("unknown strategy code {s}"))),
        };
        let m = r.len()?;
        let classes = (0..m).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
        let nc = r.len()?;
        let mut classifiers = Vec::with_capacity(nc.min(1 << 16));
        for _ in 0..nc {
            let d = r.len()?;
            let degrees = (0..d).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
            let scale = r.f64s(d)?;
            let shift = r.f64s(d)?;
            let ncores = r.len()?;
            let mut cores = Vec::with_capacity(ncores.min(1 << 16));
            for _ in 0..ncores {
                let (rl, n, rr) = (r.len()?, r.len()?, r.len()?);
                let len = rl
                    .checked_mul(n)
                    .and_then(|x| x.checked_mul(rr))
                    .ok_or_else(|| Error::ModelFormat("core size overflow".into()))?;
                cores.push(TTCore::new(rl, n, rr, r.f64s(len)?)?);
            }
            let train = TensorTrain::new(cores)?;
            classifiers.push(BinaryTTClassifier::new(
                train,
                DegreeVector::new(degrees)?,
                Scaling { scale, shift },
            )?);
        }
        let pca = match r.u32()? {
            0 => None,
            1 => {
                let (din, dout) = (r.len()?, r.len()?);
                let mean = r.f64s(din)?;
                let len = din
                    .checked_mul(dout)
                    .ok_or_else(|| Error::ModelFormat("PCA size overflow".into()))?;
                let basis = DMatrix::from_vec(din, dout, r.f64s(len)?);
                let variances = r.f64s(dout)?;
                let total_variance = r.f64s(1)?[0];
                Some(Pca {
                    mean,
                    basis,
                    variances,
                    total_variance,
                })
            }
            f => return Err(Error::ModelFormat(format!("unknown PCA flag {f}"))),
        };
        if r.pos != r.buf.len() {
            return Err(Error::ModelFormat(format!(
                "{} unexpected trailing bytes",
                r.buf.len() - r.pos
            )));
        }
        let model = MulticlassModel::new(strategy, classifiers, classes)?;
        if let Some(p) = &pca {
            if p.output_dim() != model.dim() {
                return Err(Error::ModelFormat("PCA output does not match classifier input".into()));
            }
        }
        Ok(Self { model, pca })
    }
}

pub fn save_model(model: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.as_os_str().is_empty() {
        return Err(Error::InvalidConfig("empty model path".into()));
    }
    std::fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path: PathBuf = path.as_ref().to_path_buf();
    if path.as_os_str().is_empty() {
        return Err(Error::InvalidConfig("empty model path".into()));
    }
    ModelFile::from_bytes(&std::fs::read(&path)?)
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::ModelFormat("truncated payload".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    /// A count that must fit in the remaining payload.
    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&v| v <= self.buf.len())
            .ok_or_else(|| Error::ModelFormat(format!("implausible length {v}")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::ModelFormat("length overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}
