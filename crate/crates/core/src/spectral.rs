//! Spectral clustering of an aggregated self-representation matrix.
//!
//! `W = (|Z| + |Z^T|) / 2`, `L = D - W` with `d_ii = sum_j w_ij`, `F` holds the
//! eigenvectors of the `c` smallest eigenvalues of `L`, and the rows of `F`
//! are grouped by k-means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, sym_eig, DenseMatrix};

/// Symmetric, entrywise nonnegative similarity graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinity {
    w: DenseMatrix,
}

impl Affinity {
    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn size(&self) -> usize {
        self.w.nrows()
    }

    pub fn into_inner(self) -> DenseMatrix {
        self.w
    }
}

pub fn affinity(zhat: &DenseMatrix) -> Result<Affinity> {
    if !zhat.is_square() || zhat.nrows() == 0 {
        return Err(Error::contract(format!(
            "affinity: expected a nonempty square matrix, got {}x{}",
            zhat.nrows(),
            zhat.ncols()
        )));
    }
    ensure_finite(zhat, "affinity input")?;
    let n = zhat.nrows();
    let mut w = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let x = (zhat[(i, j)].abs() + zhat[(j, i)].abs()) / 2.0;
            w[(i, j)] = x;
            w[(j, i)] = x;
        }
    }
    Ok(Affinity { w })
}

/// Unnormalized graph Laplacian `D - W`.
pub fn laplacian(a: &Affinity) -> DenseMatrix {
    let mut l = -a.w.clone();
    for (i, row) in a.w.row_iter().enumerate() {
        l[(i, i)] += row.sum();
    }
    l
}

/// Eigenvectors of `l` for its `c` smallest eigenvalues, as columns.
pub fn spectral_embed(l: &DenseMatrix, c: usize) -> Result<DenseMatrix> {
    if c == 0 || c > l.nrows() {
        return Err(Error::contract(format!(
            "spectral_embed: need 1 <= c <= {}, got {c}",
            l.nrows()
        )));
    }
    let eig = sym_eig(l)?;
    Ok(eig.q.columns(0, c).into_owned())
}

/// One Lloyd run from a single seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansRun {
    pub labels: Vec<usize>,
    pub centroids: DenseMatrix,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Index of the winning restart.
    pub restart: usize,
}

const LLOYD_MAX_ITER: usize = 300;

fn sq_dist(points: &DenseMatrix, i: usize, centroids: &DenseMatrix, j: usize) -> f64 {
    let mut s = 0.0;
    for col in 0..points.ncols() {
        let d = points[(i, col)] - centroids[(j, col)];
        s += d * d;
    }
    s
}

/// Nearest centroid, ties to the lowest index.
fn nearest(points: &DenseMatrix, i: usize, centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centroids.nrows() {
        let d = sq_dist(points, i, centroids, j);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Greedy k-means++: each new center is the best of several `D^2`-weighted
/// candidates by resulting potential.
fn seed_centroids(points: &DenseMatrix, c: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let (n, dim) = points.shape();
    let trials = 2 + (c as f64).ln().floor() as usize;
    let mut centroids = DenseMatrix::zeros(c, dim);
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from(&points.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centroids, 0)).collect();

    for k in 1..c {
        let total: f64 = closest.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = if total > 0.0 {
                let mut target = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, &d) in closest.iter().enumerate() {
                    if target < d {
                        pick = i;
                        break;
                    }
                    target -= d;
                }
                pick
            } else {
                rng.random_range(0..n)
            };
            let updated: Vec<f64> = (0..n)
                .map(|i| {
                    let d: f64 = (0..dim).map(|col| (points[(i, col)] - points[(cand, col)]).powi(2)).sum();
                    d.min(closest[i])
                })
                .collect();
            let potential: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, cand, updated));
            }
        }
        let (_, cand, updated) = best.expect("at least one candidate");
        centroids.row_mut(k).copy_from(&points.row(cand));
        closest = updated;
    }
    centroids
}

/// A single seeded Lloyd run.
pub fn kmeans_once(points: &DenseMatrix, c: usize, rng: &mut ChaCha8Rng) -> KmeansRun {
    let (n, dim) = points.shape();
    let mut centroids = seed_centroids(points, c, rng);
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();

    for _ in 0..LLOYD_MAX_ITER {
        let mut changed = false;
        for i in 0..n {
            let (j, d) = nearest(points, i, &centroids);
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
            dists[i] = d;
        }
        history.push(dists.iter().sum());
        if !changed {
            break;
        }

        let mut sums = DenseMatrix::zeros(c, dim);
        let mut counts = vec![0usize; c];
        for i in 0..n {
            counts[labels[i]] += 1;
            let mut row = sums.row_mut(labels[i]);
            row += points.row(i);
        }
        let mut taken = vec![false; n];
        for j in 0..c {
            if counts[j] > 0 {
                let mean = sums.row(j) / counts[j] as f64;
                centroids.row_mut(j).copy_from(&mean);
            } else {
                // Empty cluster: move it onto the point worst served so far.
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken[far] = true;
                centroids.row_mut(j).copy_from(&points.row(far));
            }
        }
    }
    let inertia = *history.last().unwrap_or(&0.0);
    KmeansRun {
        labels,
        centroids,
        inertia,
        history,
    }
}

/// Best of `restarts` seeded Lloyd runs by inertia; ties go to the earlier restart.
pub fn kmeans(points: &DenseMatrix, c: usize, restarts: usize, seed: u64) -> Result<KmeansResult> {
    let n = points.nrows();
    if c == 0 || c > n {
        return Err(Error::contract(format!("kmeans: need 1 <= c <= {n}, got {c}")));
    }
    if restarts == 0 {
        return Err(Error::contract("kmeans: restarts must be positive"));
    }
    ensure_finite(points, "kmeans points")?;
    let mut best: Option<KmeansResult> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let run = kmeans_once(points, c, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(KmeansResult {
                labels: run.labels,
                inertia: run.inertia,
                restart: r,
            });
        }
    }
    Ok(best.expect("restarts >= 1"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Scale each row of the embedding to unit length before k-means.
    pub normalize_rows: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            seed: 0,
            normalize_rows: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusteringResult {
    pub zhat: DenseMatrix,
    pub affinity: Affinity,
    pub laplacian: DenseMatrix,
    /// Rows are the spectral coordinates of the samples.
    pub embedding: DenseMatrix,
    pub labels: Vec<usize>,
    pub kmeans_inertia: f64,
}

pub fn cluster(zhat: &DenseMatrix, c: usize, restarts: usize, seed: u64) -> Result<ClusteringResult> {
    cluster_with(
        zhat,
        c,
        &SpectralOptions {
            restarts,
            seed,
            ..SpectralOptions::default()
        },
    )
}

pub fn cluster_with(zhat: &DenseMatrix, c: usize, opts: &SpectralOptions) -> Result<ClusteringResult> {
    let affinity = affinity(zhat)?;
    let laplacian = laplacian(&affinity);
    let embedding = spectral_embed(&laplacian, c)?;
    let points = if opts.normalize_rows {
        let mut p = embedding.clone();
        for mut row in p.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
        p
    } else {
        embedding.clone()
    };
    let km = kmeans(&points, c, opts.restarts, opts.seed)?;
    Ok(ClusteringResult {
        zhat: zhat.clone(),
        affinity,
        laplacian,
        embedding,
        labels: km.labels,
        kmeans_inertia: km.inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_abs;
    use nalgebra::dmatrix;

    fn two_blocks(a: usize, b: usize) -> DenseMatrix {
        DenseMatrix::from_fn(a + b, a + b, |i, j| if (i < a) == (j < a) { 1.0 } else { 0.0 })
    }

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn affinity_formula() {
        let a = affinity(&dmatrix![0.0, -2.0; 4.0, 0.0]).unwrap();
        assert_eq!(a.w(), &dmatrix![0.0, 3.0; 3.0, 0.0]);
        let sym = dmatrix![1.0, 0.5; 0.5, 2.0];
        assert_eq!(affinity(&sym).unwrap().w(), &sym);
        let r = affinity(&random(7, 7, 1)).unwrap();
        assert_eq!(r.w(), &r.w().transpose());
        assert!(r.w().iter().all(|&x| x >= 0.0));
        assert!(affinity(&random(2, 3, 1)).is_err());
    }

    #[test]
    fn laplacian_rows_and_psd() {
        let l = laplacian(&affinity(&dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap());
        assert_eq!(l, dmatrix![1.0, -1.0; -1.0, 1.0]);
        let l = laplacian(&affinity(&random(9, 9, 2)).unwrap());
        for row in l.row_iter() {
            assert!(row.sum().abs() < 1e-10);
        }
        assert!(sym_eig(&l).unwrap().lambda[0] >= -1e-10);
    }

    #[test]
    fn embedding_spans_component_indicators() {
        let l = laplacian(&affinity(&two_blocks(3, 4)).unwrap());
        let f = spectral_embed(&l, 2).unwrap();
        assert!(max_abs(&(f.transpose() * &f - DenseMatrix::identity(2, 2))) < 1e-8);
        let proj = &f * f.transpose();
        let ind1 = DenseMatrix::from_fn(7, 1, |i, _| if i < 3 { 1.0 } else { 0.0 });
        let ind2 = DenseMatrix::from_fn(7, 1, |i, _| if i >= 3 { 1.0 } else { 0.0 });
        assert!(max_abs(&(&proj * &ind1 - &ind1)) < 1e-8);
        assert!(max_abs(&(&proj * &ind2 - &ind2)) < 1e-8);
    }

    #[test]
    fn constant_vector_in_span_for_connected_graph() {
        let z = random(8, 8, 3).map(|x| x.abs() + 0.1);
        let l = laplacian(&affinity(&z).unwrap());
        let f = spectral_embed(&l, 1).unwrap();
        let ones = DenseMatrix::from_element(8, 1, 1.0 / 8f64.sqrt());
        assert!(max_abs(&(&f * (f.transpose() * &ones) - &ones)) < 1e-8);
        assert!(spectral_embed(&l, 9).is_err());
    }

    #[test]
    fn kmeans_separated_clouds() {
        let mut pts = random(20, 2, 4) * 0.1;
        for i in 10..20 {
            pts[(i, 0)] += 100.0;
        }
        let r = kmeans(&pts, 2, 3, 7).unwrap();
        assert!(r.labels[..10].iter().all(|&l| l == r.labels[0]));
        assert!(r.labels[10..].iter().all(|&l| l == r.labels[10]));
        assert_ne!(r.labels[0], r.labels[10]);
        assert_eq!(kmeans(&pts, 2, 3, 7).unwrap(), r);
    }

    #[test]
    fn kmeans_singletons_and_errors() {
        let pts = random(6, 3, 5);
        let r = kmeans(&pts, 6, 2, 0).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert!(kmeans(&pts, 7, 1, 0).is_err());
        assert!(kmeans(&pts, 2, 0, 0).is_err());
    }

    #[test]
    fn kmeans_duplicate_points_fill_every_cluster() {
        let pts = DenseMatrix::from_fn(6, 1, |i, _| if i < 5 { 0.0 } else { 1.0 });
        let r = kmeans(&pts, 3, 2, 1).unwrap();
        assert!(r.inertia.is_finite());
        assert!(r.labels.iter().all(|&l| l < 3));
    }

    #[test]
    fn lloyd_inertia_is_monotone() {
        let pts = random(60, 3, 6);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let run = kmeans_once(&pts, 5, &mut rng);
            assert!(run.history.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", run.history);
        }
    }

    #[test]
    fn cluster_recovers_blocks() {
        let r = cluster(&two_blocks(4, 5), 2, 10, 0).unwrap();
        assert!(r.labels[..4].iter().all(|&l| l == r.labels[0]));
        assert!(r.labels[4..].iter().all(|&l| l == r.labels[4]));
        assert_ne!(r.labels[0], r.labels[4]);
        assert_eq!(r.embedding.shape(), (9, 2));

        let one = cluster(&two_blocks(4, 5), 1, 3, 0).unwrap();
        assert!(one.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn row_normalization_option() {
        let opts = SpectralOptions {
            normalize_rows: true,
            ..SpectralOptions::default()
        };
        let r = cluster_with(&two_blocks(3, 3), 2, &opts).unwrap();
        assert_ne!(r.labels[0], r.labels[3]);
    }
}
