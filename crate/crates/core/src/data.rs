//! Synthetic two-domain datasets with a known cross-domain map, plus CSV
//! ingestion and the unpaired batch iterator that feeds training.
//!
//! Domain X is sampled from a base generator; domain Y applies the
//! ground-truth affine map to fresh, independent base samples, so the
//! trainer never sees aligned pairs. Only evaluation code may consult the
//! map.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// Gaussian blobs centered on a circle.
    GaussMix,
    /// Uniform annulus with hard radial bounds.
    Ring,
    /// The classic interleaved half-circles.
    TwoMoonsAffine,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gauss-mix" => Ok(Self::GaussMix),
            "ring" => Ok(Self::Ring),
            "two-moons-affine" => Ok(Self::TwoMoonsAffine),
            other => Err(Error::InvalidArg(format!("unknown dataset kind '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::GaussMix => "gauss-mix",
            Self::Ring => "ring",
            Self::TwoMoonsAffine => "two-moons-affine",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Invertible 2-D affine ground-truth map `y = L·x + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMap {
    pub linear: [[f64; 2]; 2],
    pub offset: [f64; 2],
}

impl GroundTruthMap {
    pub fn rotation_scale(angle_deg: f64, scale: f64) -> Self {
        let a = angle_deg.to_radians();
        let (s, c) = a.sin_cos();
        Self {
            linear: [[scale * c, -scale * s], [scale * s, scale * c]],
            offset: [0.0, 0.0],
        }
    }

    pub fn apply(&self, p: &[f64]) -> [f64; 2] {
        [
            self.linear[0][0] * p[0] + self.linear[0][1] * p[1] + self.offset[0],
            self.linear[1][0] * p[0] + self.linear[1][1] * p[1] + self.offset[1],
        ]
    }

    pub fn apply_all(&self, pts: &Matrix) -> Matrix {
        let mut data = Vec::with_capacity(pts.rows() * 2);
        for r in pts.row_iter() {
            data.extend_from_slice(&self.apply(r));
        }
        Matrix::new(pts.rows(), 2, data).expect("2-D output")
    }

    pub fn inverse(&self) -> Result<Self> {
        let [[a, b], [c, d]] = self.linear;
        let det = a * d - b * c;
        if det.abs() < 1e-12 {
            return Err(Error::InvalidConfig("ground-truth map is singular".into()));
        }
        let inv = [[d / det, -b / det], [-c / det, a / det]];
        let off = [
            -(inv[0][0] * self.offset[0] + inv[0][1] * self.offset[1]),
            -(inv[1][0] * self.offset[0] + inv[1][1] * self.offset[1]),
        ];
        Ok(Self {
            linear: inv,
            offset: off,
        })
    }
}

/// Everything needed to regenerate a dataset deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub seed: u64,
    /// Ground-truth map: rotate by `angle_deg`, then scale.
    pub angle_deg: f64,
    pub scale: f64,
    /// Mixture components (gauss-mix).
    pub components: usize,
    /// Circle / annulus radius.
    pub radius: f64,
    /// Gaussian std around each center (gauss-mix, two-moons noise).
    pub sigma: f64,
    /// Annulus half-width (ring).
    pub width: f64,
    /// Align `y_samples[i] = map(x_samples[i])`; evaluation only.
    #[serde(default)]
    pub paired: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            kind: DatasetKind::GaussMix,
            n: 2000,
            seed: 1,
            angle_deg: 90.0,
            scale: 0.5,
            components: 8,
            radius: 1.0,
            sigma: 0.05,
            width: 0.1,
            paired: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DomainDataset {
    pub x: Matrix,
    pub y: Matrix,
    map: Option<GroundTruthMap>,
    pub spec: Option<GeneratorSpec>,
}

impl DomainDataset {
    pub fn from_parts(
        x: Matrix,
        y: Matrix,
        map: Option<GroundTruthMap>,
        spec: Option<GeneratorSpec>,
    ) -> Result<Self> {
        if x.cols() == 0 || y.cols() == 0 || x.rows() == 0 || y.rows() == 0 {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        if x.data().iter().chain(y.data()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite sample".into()));
        }
        Ok(Self { x, y, map, spec })
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Ground-truth correspondence, where the generator recorded one.
    /// Evaluation-side only; the trainer never consults it.
    pub fn ground_truth_map(&self) -> Option<&GroundTruthMap> {
        self.map.as_ref()
    }
}

/// Sample a two-domain dataset. X comes from the base generator; Y applies
/// the map to fresh independent base samples (or to the same samples in
/// paired mode).
pub fn gen_domain_pair(spec: &GeneratorSpec) -> Result<DomainDataset> {
    if spec.n == 0 {
        return Err(Error::InvalidArg("need at least one sample".into()));
    }
    if spec.components == 0 && spec.kind == DatasetKind::GaussMix {
        return Err(Error::InvalidArg("gauss-mix needs >= 1 component".into()));
    }
    if spec.width < 0.0 || spec.radius <= 0.0 || spec.sigma < 0.0 {
        return Err(Error::InvalidArg(format!(
            "bad shape params: radius {}, sigma {}, width {}",
            spec.radius, spec.sigma, spec.width
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(0xDA7A);
    let map = GroundTruthMap::rotation_scale(spec.angle_deg, spec.scale);
    let x = sample_base(spec, spec.n, &mut rng);
    let y_base = if spec.paired {
        x.clone()
    } else {
        sample_base(spec, spec.n, &mut rng)
    };
    let y = map.apply_all(&y_base);
    DomainDataset::from_parts(x, y, Some(map), Some(spec.clone()))
}

fn sample_base(spec: &GeneratorSpec, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut data = Vec::with_capacity(n * 2);
    match spec.kind {
        DatasetKind::GaussMix => {
            for _ in 0..n {
                let k = rng.random_range(0..spec.components);
                let theta = 2.0 * PI * k as f64 / spec.components as f64;
                let (s, c) = theta.sin_cos();
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                data.push(spec.radius * c + spec.sigma * dx);
                data.push(spec.radius * s + spec.sigma * dy);
            }
        }
        DatasetKind::Ring => {
            for _ in 0..n {
                let r = rng.random_range(spec.radius - spec.width..=spec.radius + spec.width);
                let theta = rng.random_range(0.0..2.0 * PI);
                let (s, c) = theta.sin_cos();
                data.push(r * c);
                data.push(r * s);
            }
        }
        DatasetKind::TwoMoonsAffine => {
            for _ in 0..n {
                let t = rng.random_range(0.0..PI);
                let upper = rng.random_bool(0.5);
                let (mut px, mut py) = if upper {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                px += spec.sigma * dx;
                py += spec.sigma * dy;
                data.push(spec.radius * px);
                data.push(spec.radius * py);
            }
        }
    }
    Matrix::new(n, 2, data).expect("generator output is rectangular")
}

/// Write one domain as CSV with a `dim0,dim1,...` header. Values print in
/// Rust's shortest round-trip form, so reading them back is exact.
pub fn save_matrix_csv(m: &Matrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (0..m.cols()).map(|d| format!("dim{d}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_matrix_csv(path: &Path) -> Result<Matrix> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let display = path.display().to_string();
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: display.clone(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let header = header?;
    let cols: Vec<&str> = header.split(',').collect();
    let dim = cols.len();
    for (d, name) in cols.iter().enumerate() {
        if *name != format!("dim{d}") {
            return Err(Error::Parse {
                path: display,
                line: 1,
                msg: format!("expected header column 'dim{d}', found '{name}'"),
            });
        }
    }
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (idx, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != dim {
            return Err(Error::Parse {
                path: display,
                line: idx + 1,
                msg: format!("expected {dim} columns, found {}", cells.len()),
            });
        }
        for cell in cells {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: idx + 1,
                msg: format!("bad number '{cell}'"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse {
            path: display,
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Matrix::new(rows, dim, data)
}

/// Write `x.csv`, `y.csv`, and `spec.json` into `dir`.
pub fn save_dataset(ds: &DomainDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_matrix_csv(&ds.x, &dir.join("x.csv"))?;
    save_matrix_csv(&ds.y, &dir.join("y.csv"))?;
    if let Some(spec) = &ds.spec {
        let mut f = std::fs::File::create(dir.join("spec.json"))?;
        serde_json::to_writer_pretty(&mut f, spec)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// Load a dataset directory written by [`save_dataset`]. Without a
/// `spec.json` the dataset has no ground-truth map and map-based metrics are
/// unavailable.
pub fn load_dataset(dir: &Path) -> Result<DomainDataset> {
    let x = load_matrix_csv(&dir.join("x.csv"))?;
    let y = load_matrix_csv(&dir.join("y.csv"))?;
    let spec_path = dir.join("spec.json");
    let spec: Option<GeneratorSpec> = if spec_path.exists() {
        Some(serde_json::from_reader(std::fs::File::open(spec_path)?)?)
    } else {
        None
    };
    let map = spec
        .as_ref()
        .map(|s| GroundTruthMap::rotation_scale(s.angle_deg, s.scale));
    DomainDataset::from_parts(x, y, map, spec)
}

/// Unpaired minibatches: each epoch reshuffles the two domains with
/// independent permutations and drops the final short batch.
pub fn batches(
    ds: &DomainDataset,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Matrix, Matrix)>> {
    if batch_size == 0 {
        return Err(Error::InvalidArg("batch size must be >= 1".into()));
    }
    let n = ds.x.rows();
    let m = ds.y.rows();
    if batch_size > n.min(m) {
        return Err(Error::InvalidArg(format!(
            "batch size {batch_size} exceeds domain sizes {n}/{m}"
        )));
    }
    let mut xi: Vec<usize> = (0..n).collect();
    let mut yi: Vec<usize> = (0..m).collect();
    xi.shuffle(rng);
    yi.shuffle(rng);
    let steps = (n / batch_size).min(m / batch_size);
    let mut out = Vec::with_capacity(steps);
    for s in 0..steps {
        let bx = ds.x.select_rows(&xi[s * batch_size..(s + 1) * batch_size]);
        let by = ds.y.select_rows(&yi[s * batch_size..(s + 1) * batch_size]);
        out.push((bx, by));
    }
    Ok(out)
}
