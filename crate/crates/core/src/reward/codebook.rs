use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::features::{cosine_similarity, norm};
use crate::error::{check_dim, Error, Result};
use crate::seed;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

/// Centroids `e_1..e_N` with the temperature of the centroid softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    centroids: Vec<Vec<f64>>,
    temperature: f64,
}

impl Codebook {
    pub fn new(centroids: Vec<Vec<f64>>, temperature: f64) -> Result<Self> {
        let dim = centroids
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("codebook needs at least one centroid".into()))?;
        if dim == 0 {
            return Err(Error::InvalidArgument("centroids must have positive dimension".into()));
        }
        for (i, c) in centroids.iter().enumerate() {
            check_dim(dim, c.len())?;
            if !(norm(c) > 0.0) {
                return Err(Error::InvalidArgument(format!("centroid {i} has zero norm")));
            }
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be > 0, got {temperature}"
            )));
        }
        Ok(Self {
            centroids,
            temperature,
        })
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(self.centroids.clone(), temperature)
    }

    /// Cosine similarity of `frame` to every centroid.
    pub fn similarities(&self, frame: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.feature_dim(), frame.len())?;
        if norm(frame) == 0.0 {
            return Err(Error::InvalidArgument("zero-norm frame".into()));
        }
        self.centroids
            .iter()
            .map(|c| cosine_similarity(frame, c))
            .collect()
    }
}

/// `p(c) = softmax_c(sim(frame, e_c) / τ)`.
pub fn centroid_probs(frame: &[f64], codebook: &Codebook) -> Result<Vec<f64>> {
    let sims = codebook.similarities(frame)?;
    let tau = codebook.temperature();
    let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = sims.iter().map(|s| ((s - max) / tau).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Total squared distortion after each assignment pass, starting with the
    /// assignment to the seeded centroids.
    pub distortion: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by squared Euclidean distance, lowest index on ties.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn kmeans_plus_plus(points: &[Vec<f64>], n: usize, rng: &mut seed::Rng) -> Vec<Vec<f64>> {
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < n {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = None;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 {
                    idx = Some(i);
                    if target < *d {
                        break;
                    }
                    target -= d;
                }
            }
            idx.expect("positive total implies a positive entry")
        } else {
            // Every remaining point duplicates a centroid.
            chosen.iter().position(|c| !c).expect("n ≤ number of points")
        };
        chosen[pick] = true;
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm from k-means++ seeding.
///
/// Stops early once assignments stop changing. Empty clusters keep their
/// previous centroid, so the distortion never increases.
pub fn kmeans_fit(
    points: &[Vec<f64>],
    n_centroids: usize,
    iterations: usize,
    seed: u64,
    temperature: f64,
) -> Result<KMeansFit> {
    if n_centroids == 0 {
        return Err(Error::InvalidArgument("need at least one centroid".into()));
    }
    if points.len() < n_centroids {
        return Err(Error::InvalidArgument(format!(
            "{} points cannot seed {} centroids",
            points.len(),
            n_centroids
        )));
    }
    let dim = points[0].len();
    for p in points {
        check_dim(dim, p.len())?;
    }
    let mut rng = seed::rng(seed);
    let mut centroids = kmeans_plus_plus(points, n_centroids, &mut rng);

    let assign = |centroids: &[Vec<f64>]| -> (Vec<usize>, f64) {
        let mut total = 0.0;
        let labels = points
            .iter()
            .map(|p| {
                let (i, d) = nearest(p, centroids);
                total += d;
                i
            })
            .collect();
        (labels, total)
    };

    let (mut labels, d0) = assign(&centroids);
    let mut distortion = vec![d0];
    for _ in 0..iterations {
        let mut sums = vec![vec![0.0; dim]; n_centroids];
        let mut counts = vec![0usize; n_centroids];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|v| v / n as f64).collect();
            }
        }
        let (next, d) = assign(&centroids);
        distortion.push(d);
        let converged = next == labels;
        labels = next;
        if converged {
            break;
        }
    }
    Ok(KMeansFit {
        codebook: Codebook::new(centroids, temperature)?,
        distortion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::standard_normal_vec;

    #[test]
    fn single_centroid_is_certain() {
        let cb = Codebook::new(vec![vec![1.0, 2.0]], 0.1).unwrap();
        assert_eq!(centroid_probs(&[-3.0, 0.5], &cb).unwrap(), vec![1.0]);
    }

    #[test]
    fn equiangular_centroids_split_evenly() {
        let cb = Codebook::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.1).unwrap();
        let p = centroid_probs(&[1.0, 1.0], &cb).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hand_evaluated_softmax() {
        let cb = Codebook::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).unwrap();
        let p = centroid_probs(&[1.0, 0.0], &cb).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((p[0] - 0.73106).abs() < 1e-5);
    }

    #[test]
    fn zero_frame_and_bad_codebooks() {
        let cb = Codebook::new(vec![vec![1.0, 0.0]], 0.1).unwrap();
        assert!(centroid_probs(&[0.0, 0.0], &cb).is_err());
        assert!(Codebook::new(vec![vec![0.0, 0.0]], 0.1).is_err());
        assert!(Codebook::new(vec![vec![1.0]], 0.0).is_err());
        assert!(Codebook::new(vec![], 0.1).is_err());
    }

    #[test]
    fn as_many_centroids_as_points() {
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, (i * i) as f64 + 1.0]).collect();
        let fit = kmeans_fit(&pts, 7, 10, 3, 0.1).unwrap();
        assert_eq!(*fit.distortion.last().unwrap(), 0.0);
        let mut got = fit.codebook.centroids().to_vec();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, pts);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![1.0], vec![2.0]];
        assert!(kmeans_fit(&pts, 3, 5, 0, 0.1).is_err());
    }

    #[test]
    fn recovers_two_separated_clusters() {
        let mut rng = seed::rng(12);
        let sigma = 0.5;
        let m = 200;
        let means = [[10.0, 0.0, 0.0], [-10.0, 5.0, 1.0]];
        let mut pts = Vec::new();
        for mean in &means {
            for _ in 0..m {
                let n = standard_normal_vec(&mut rng, 3);
                pts.push(mean.iter().zip(&n).map(|(a, b)| a + sigma * b).collect::<Vec<_>>());
            }
        }
        let fit = kmeans_fit(&pts, 2, 20, 1, 0.1).unwrap();
        // Sample-mean oracle: each centroid lies near one cluster mean.
        let tol = 3.0 * sigma / (m as f64).sqrt();
        for mean in &means {
            let best = fit
                .codebook
                .centroids()
                .iter()
                .map(|c| c.iter().zip(mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min);
            assert!(best < tol, "{best} ≥ {tol}");
        }
    }

    #[test]
    fn distortion_is_monotone() {
        let mut rng = seed::rng(4);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| standard_normal_vec(&mut rng, 4)).collect();
        let fit = kmeans_fit(&pts, 12, 50, 9, 0.1).unwrap();
        for w in fit.distortion.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0], "{:?}", w);
        }
        let one = kmeans_fit(&pts, 12, 1, 9, 0.1).unwrap();
        assert!(fit.distortion.last().unwrap() <= one.distortion.last().unwrap());
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = seed::rng(4);
        let pts: Vec<Vec<f64>> = (0..50).map(|_| standard_normal_vec(&mut rng, 2)).collect();
        assert_eq!(kmeans_fit(&pts, 5, 10, 2, 0.1).unwrap(), kmeans_fit(&pts, 5, 10, 2, 0.1).unwrap());
    }
}
