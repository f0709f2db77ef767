//! Multi-view data: loading, synthesis and the augmented block matrix.
//!
//! Every view is stored features x samples, so sample `i` of view `l` is
//! column `i` of `views[l]`.
//!
//! # On-disk format
//!
//! A dataset is described by a TOML manifest:
//!
//! ```toml
//! n = 30
//! labels = "labels.txt"      # optional
//!
//! [[views]]
//! name = "color"
//! path = "color.txt"         # relative to the manifest's directory
//! rows = 10                  # features
//! cols = 30                  # samples, must equal n
//! ```
//!
//! Matrix files hold one matrix row per line with comma- or
//! whitespace-separated numbers; blank lines and lines starting with `#` are
//! ignored. Label files hold one nonnegative integer per line.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, pca_reduce, DenseMatrix};

/// `v` views over the same `n` samples, with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<DenseMatrix>,
    labels: Option<Vec<usize>>,
    view_names: Vec<String>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<DenseMatrix>, labels: Option<Vec<usize>>) -> Result<Self> {
        let names = (0..views.len()).map(|l| format!("view{l}")).collect();
        Self::with_names(views, labels, names)
    }

    pub fn with_names(views: Vec<DenseMatrix>, labels: Option<Vec<usize>>, view_names: Vec<String>) -> Result<Self> {
        let Some(first) = views.first() else {
            return Err(Error::contract("a dataset needs at least one view"));
        };
        if view_names.len() != views.len() {
            return Err(Error::contract(format!(
                "{} view names for {} views",
                view_names.len(),
                views.len()
            )));
        }
        let n = first.ncols();
        if n == 0 {
            return Err(Error::contract("views must contain at least one sample"));
        }
        for (view, name) in views.iter().zip(&view_names) {
            if view.nrows() == 0 {
                return Err(Error::View {
                    view: name.clone(),
                    message: "view has no features".into(),
                });
            }
            if view.ncols() != n {
                return Err(Error::View {
                    view: name.clone(),
                    message: format!("has {} samples, expected {n}", view.ncols()),
                });
            }
            if ensure_finite(view, "view").is_err() {
                return Err(Error::View {
                    view: name.clone(),
                    message: "contains non-finite values".into(),
                });
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::contract(format!("{} labels for {n} samples", labels.len())));
            }
        }
        Ok(Self { views, labels, view_names })
    }

    pub fn views(&self) -> &[DenseMatrix] {
        &self.views
    }

    pub fn view(&self, l: usize) -> &DenseMatrix {
        &self.views[l]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn sample_count(&self) -> usize {
        self.views[0].ncols()
    }

    /// Total feature count `d = sum_l d_l`.
    pub fn total_dim(&self) -> usize {
        self.views.iter().map(|v| v.nrows()).sum()
    }

    pub fn min_dim(&self) -> usize {
        self.views.iter().map(|v| v.nrows()).min().unwrap_or(0)
    }

    /// Number of distinct ground-truth labels, if labels are attached.
    pub fn cluster_count(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut seen: Vec<usize> = l.clone();
            seen.sort_unstable();
            seen.dedup();
            seen.len()
        })
    }
}

/// Cross-view similarity `S^(p,q)` between the samples of views `p` and `q`.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub p: usize,
    pub q: usize,
    pub s: DenseMatrix,
}

impl SimilarityMatrix {
    pub fn between(p: usize, xp: &DenseMatrix, q: usize, xq: &DenseMatrix) -> Result<Self> {
        Ok(Self {
            p,
            q,
            s: cosine_similarity(xp, xq)?,
        })
    }

    /// The `(q, p)` similarity, which is the transpose of `(p, q)`.
    pub fn reversed(&self) -> Self {
        Self {
            p: self.q,
            q: self.p,
            s: self.s.transpose(),
        }
    }
}

/// Entry `(i, j)` is `cos(x^p_i, x^q_j) / 2 + 1/2`, mapping cosine similarity
/// onto `[0, 1]`. A zero sample column has cosine 0 with everything.
pub fn cosine_similarity(xp: &DenseMatrix, xq: &DenseMatrix) -> Result<DenseMatrix> {
    if xp.nrows() != xq.nrows() || xp.ncols() != xq.ncols() {
        return Err(Error::contract(format!(
            "cosine_similarity: views must be aligned, got {}x{} and {}x{}",
            xp.nrows(),
            xp.ncols(),
            xq.nrows(),
            xq.ncols()
        )));
    }
    let unit = |x: &DenseMatrix| {
        let mut u = x.clone();
        for mut col in u.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            } else {
                col.fill(0.0);
            }
        }
        u
    };
    let (up, uq) = (unit(xp), unit(xq));
    let cos = up.transpose() * uq;
    Ok(cos.map(|c| (0.5 * c + 0.5).clamp(0.0, 1.0)))
}

/// How the off-diagonal blocks of the augmented matrix are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossViewWeights {
    /// PCA-aligned cosine similarity.
    #[default]
    Cosine,
    /// `S^(p,q) = I`, so every block in block-row `p` is `X^(p)`.
    Identity,
}

/// The `d x vn` block matrix: view `p` on block `(p, p)` and `X^(p) S^(p,q)`
/// on block `(p, q)`.
#[derive(Debug, Clone)]
pub struct AugmentedMatrix {
    pub xa: DenseMatrix,
    /// First row of each block-row (one per view).
    pub block_rows: Vec<usize>,
    /// First column of each block-column (one per view).
    pub block_cols: Vec<usize>,
    /// Dimension the views were aligned to before computing similarities.
    pub pca_dim: usize,
    /// Fraction of variance kept by the PCA alignment, per view.
    pub retained_variance: Vec<f64>,
    view_dims: Vec<usize>,
    n: usize,
}

impl AugmentedMatrix {
    pub fn view_count(&self) -> usize {
        self.view_dims.len()
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    pub fn view_dims(&self) -> &[usize] {
        &self.view_dims
    }

    pub fn block(&self, p: usize, q: usize) -> DenseMatrix {
        self.xa
            .view((self.block_rows[p], self.block_cols[q]), (self.view_dims[p], self.n))
            .into_owned()
    }

    /// Copy with every off-diagonal block replaced by zeros.
    pub fn with_zero_offdiag(&self) -> Self {
        let mut out = self.clone();
        for p in 0..self.view_count() {
            for q in 0..self.view_count() {
                if p != q {
                    out.xa
                        .view_mut((self.block_rows[p], self.block_cols[q]), (self.view_dims[p], self.n))
                        .fill(0.0);
                }
            }
        }
        out
    }

    /// Wraps an existing `d x vn` matrix with the given block layout.
    pub fn from_parts(xa: DenseMatrix, view_dims: Vec<usize>, n: usize) -> Result<Self> {
        let d: usize = view_dims.iter().sum();
        let v = view_dims.len();
        if v == 0 || n == 0 || xa.nrows() != d || xa.ncols() != v * n {
            return Err(Error::contract(format!(
                "augmented matrix is {}x{}, layout expects {d}x{}",
                xa.nrows(),
                xa.ncols(),
                v * n
            )));
        }
        let block_rows = view_dims
            .iter()
            .scan(0, |acc, &dl| {
                let start = *acc;
                *acc += dl;
                Some(start)
            })
            .collect();
        let block_cols = (0..v).map(|q| q * n).collect();
        Ok(Self {
            xa,
            block_rows,
            block_cols,
            pca_dim: 0,
            retained_variance: Vec::new(),
            view_dims,
            n,
        })
    }
}

pub fn build_augmented(ds: &MultiViewDataset, pca_components: usize) -> Result<AugmentedMatrix> {
    build_augmented_with(ds, pca_components, CrossViewWeights::Cosine)
}

pub fn build_augmented_with(
    ds: &MultiViewDataset,
    pca_components: usize,
    weights: CrossViewWeights,
) -> Result<AugmentedMatrix> {
    let v = ds.view_count();
    let n = ds.sample_count();
    let view_dims: Vec<usize> = ds.views().iter().map(|x| x.nrows()).collect();

    let mut reduced = Vec::new();
    let mut retained = Vec::new();
    if v > 1 && weights == CrossViewWeights::Cosine {
        let limit = ds.min_dim().min(n.saturating_sub(1));
        if pca_components == 0 || pca_components > limit {
            return Err(Error::Config(format!(
                "{pca_components} principal components requested but the views allow at most {limit}; \
                 choose a smaller component count"
            )));
        }
        for view in ds.views() {
            let pca = pca_reduce(view, pca_components)?;
            retained.push(pca.retained_variance);
            reduced.push(pca.reduced);
        }
    }

    let mut aug = AugmentedMatrix::from_parts(DenseMatrix::zeros(ds.total_dim(), v * n), view_dims, n)?;
    aug.pca_dim = pca_components;
    aug.retained_variance = retained;

    for p in 0..v {
        let (r0, dp) = (aug.block_rows[p], aug.view_dims[p]);
        aug.xa.view_mut((r0, p * n), (dp, n)).copy_from(ds.view(p));
        for q in (p + 1)..v {
            let (s0, dq) = (aug.block_rows[q], aug.view_dims[q]);
            match weights {
                CrossViewWeights::Identity => {
                    aug.xa.view_mut((r0, q * n), (dp, n)).copy_from(ds.view(p));
                    aug.xa.view_mut((s0, p * n), (dq, n)).copy_from(ds.view(q));
                }
                CrossViewWeights::Cosine => {
                    let spq = SimilarityMatrix::between(p, &reduced[p], q, &reduced[q])?;
                    let sqp = spq.reversed();
                    aug.xa.view_mut((r0, q * n), (dp, n)).copy_from(&(ds.view(p) * &spq.s));
                    aug.xa.view_mut((s0, p * n), (dq, n)).copy_from(&(ds.view(q) * &sqp.s));
                }
            }
        }
    }
    Ok(aug)
}

/// `clusters * 6` principal components, clipped to `n - 1` and the smallest
/// view dimension.
pub fn default_pca_components(clusters: usize, ds: &MultiViewDataset) -> usize {
    (clusters * 6)
        .min(ds.sample_count().saturating_sub(1))
        .min(ds.min_dim())
        .max(1)
}

/// Parameters of the synthetic multi-view generator.
///
/// Each cluster occupies its own linear subspace of a shared latent space,
/// spanned by a random center direction and `cluster_dim() - 1` further random
/// directions. Samples sit around the center along those directions. Every
/// view maps the latent points through its own Gaussian linear map and adds
/// isotropic noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub per_cluster: usize,
    pub latent_dim: usize,
    pub view_dims: Vec<usize>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Dimension of the subspace each cluster occupies in latent space. The
    /// subspaces are independent whenever `clusters <= latent_dim`.
    pub fn cluster_dim(&self) -> usize {
        (self.latent_dim / self.clusters.max(1)).max(1)
    }
}

/// Distance of each cluster center from the origin relative to the within-cluster spread.
const CENTER_SCALE: f64 = 6.0;

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    if spec.clusters == 0 || spec.per_cluster == 0 || spec.latent_dim == 0 {
        return Err(Error::contract("clusters, per_cluster and latent_dim must be positive"));
    }
    if spec.view_dims.is_empty() || spec.view_dims.contains(&0) {
        return Err(Error::contract("view_dims must list at least one positive dimension"));
    }
    let min_dim = *spec.view_dims.iter().min().unwrap_or(&0);
    if spec.latent_dim > min_dim {
        return Err(Error::contract(format!(
            "latent_dim {} exceeds the smallest view dimension {min_dim}",
            spec.latent_dim
        )));
    }
    if !(spec.noise_sigma >= 0.0) || !spec.noise_sigma.is_finite() {
        return Err(Error::contract(format!("noise_sigma must be >= 0, got {}", spec.noise_sigma)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gauss = |rows: usize, cols: usize, scale: f64| {
        DenseMatrix::from_fn(rows, cols, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
    };

    let n = spec.clusters * spec.per_cluster;
    let sub = spec.cluster_dim();
    let unit = 1.0 / (spec.latent_dim as f64).sqrt();
    let mut latent = DenseMatrix::zeros(spec.latent_dim, n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..spec.clusters {
        let basis = gauss(spec.latent_dim, sub, unit);
        let mut coords = gauss(sub, spec.per_cluster, 1.0);
        coords.row_mut(0).add_scalar_mut(CENTER_SCALE);
        let block = basis * coords;
        latent
            .view_mut((0, c * spec.per_cluster), (spec.latent_dim, spec.per_cluster))
            .copy_from(&block);
        labels.extend(std::iter::repeat_n(c, spec.per_cluster));
    }

    let mut views: Vec<DenseMatrix> = Vec::with_capacity(spec.view_dims.len());
    for &dl in &spec.view_dims {
        let map = gauss(dl, spec.latent_dim, unit);
        let mut x = map * &latent;
        if spec.noise_sigma > 0.0 {
            x += gauss(dl, n, spec.noise_sigma);
        }
        views.push(x);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let views = views
        .into_iter()
        .map(|x| DenseMatrix::from_fn(x.nrows(), n, |i, j| x[(i, order[j])]))
        .collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    MultiViewDataset::new(views, Some(labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewEntry {
    pub name: String,
    pub path: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    pub views: Vec<ViewEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| Error::parse("manifest", None, e.message().to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::parse("manifest", None, "n must be positive"));
        }
        if self.views.is_empty() {
            return Err(Error::parse("manifest", None, "at least one view is required"));
        }
        for view in &self.views {
            if view.rows == 0 {
                return Err(Error::View {
                    view: view.name.clone(),
                    message: "declares zero feature rows".into(),
                });
            }
            if view.cols != self.n {
                return Err(Error::View {
                    view: view.name.clone(),
                    message: format!("declares {} samples but the manifest has n = {}", view.cols, self.n),
                });
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest fields are always representable in TOML")
    }
}

/// Parses a numeric text matrix: one row per line, comma- or
/// whitespace-separated cells.
pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let mut count = 0;
        for cell in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|c| !c.is_empty()) {
            let value: f64 = cell
                .parse()
                .map_err(|_| Error::parse("matrix", Some(lineno), format!("non-numeric cell `{cell}`")))?;
            if !value.is_finite() {
                return Err(Error::parse("matrix", Some(lineno), format!("non-finite cell `{cell}`")));
            }
            data.push(value);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(Error::parse(
                    "matrix",
                    Some(lineno),
                    format!("row has {count} cells, previous rows have {c}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    match cols {
        Some(c) if c > 0 => Ok(DenseMatrix::from_row_slice(rows, c, &data)),
        _ => Err(Error::parse("matrix", None, "no data rows")),
    }
}

pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, line)| {
            line.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse("labels", Some(idx + 1), format!("`{}` is not a nonnegative integer", line.trim())))
        })
        .collect()
}

pub fn format_matrix(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn format_labels(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_dataset(manifest_path: &Path) -> Result<MultiViewDataset> {
    let manifest = Manifest::parse(&read(manifest_path)?)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut views = Vec::with_capacity(manifest.views.len());
    let mut names = Vec::with_capacity(manifest.views.len());
    for entry in &manifest.views {
        let view_err = |message: String| Error::View {
            view: entry.name.clone(),
            message,
        };
        let path = base.join(&entry.path);
        let matrix = parse_matrix(&read(&path)?).map_err(|e| view_err(e.to_string()))?;
        if matrix.shape() != (entry.rows, entry.cols) {
            return Err(view_err(format!(
                "{} is {}x{}, manifest declares {}x{}",
                path.display(),
                matrix.nrows(),
                matrix.ncols(),
                entry.rows,
                entry.cols
            )));
        }
        views.push(matrix);
        names.push(entry.name.clone());
    }

    let labels = match &manifest.labels {
        Some(rel) => {
            let labels = parse_labels(&read(&base.join(rel))?)?;
            if labels.len() != manifest.n {
                return Err(Error::parse(
                    "labels",
                    None,
                    format!("{} labels for n = {}", labels.len(), manifest.n),
                ));
            }
            Some(labels)
        }
        None => None,
    };
    MultiViewDataset::with_names(views, labels, names)
}

/// Writes each view, the labels (if any) and a manifest into `dir`, returning
/// the manifest path.
pub fn write_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::new();
    for (view, name) in ds.views().iter().zip(ds.view_names()) {
        let file = format!("{name}.txt");
        write(&dir.join(&file), &format_matrix(view))?;
        entries.push(ViewEntry {
            name: name.clone(),
            path: file,
            rows: view.nrows(),
            cols: view.ncols(),
        });
    }
    let labels = match ds.labels() {
        Some(labels) => {
            write(&dir.join("labels.txt"), &format_labels(labels))?;
            Some("labels.txt".to_string())
        }
        None => None,
    };
    let manifest = Manifest {
        n: ds.sample_count(),
        labels,
        views: entries,
    };
    let path = dir.join("manifest.toml");
    write(&path, &manifest.to_toml())?;
    Ok(path)
}
