use serde::{Deserialize, Serialize};

use super::StatsError;

/// Strictly increasing bin edges; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edges(Vec<f64>);

impl Edges {
    pub fn new(edges: Vec<f64>) -> Result<Self, StatsError> {
        if edges.len() < 2
            || edges.iter().any(|e| !e.is_finite())
            || edges.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(StatsError::EdgeOrdering);
        }
        Ok(Self(edges))
    }

    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self, StatsError> {
        if bins == 0 {
            return Err(StatsError::EdgeOrdering);
        }
        let w = (hi - lo) / bins as f64;
        let mut e: Vec<f64> = (0..bins).map(|i| lo + i as f64 * w).collect();
        e.push(hi);
        Self::new(e)
    }

    /// 64 bins over [-1, 1].
    pub fn imbalance_default() -> Self {
        Self::uniform(-1.0, 1.0, 64).expect("valid edges")
    }

    /// 64 bins over [0, 3 mean].
    pub fn intensity_default(mean_i_tot: f64) -> Result<Self, StatsError> {
        Self::uniform(0.0, 3.0 * mean_i_tot, 64)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn bins(&self) -> usize {
        self.0.len() - 1
    }

    pub fn centers(&self) -> Vec<f64> {
        self.0.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.0.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Bin containing `v`, or `None` outside the covered range.
    pub fn locate(&self, v: f64) -> Option<usize> {
        let e = &self.0;
        let last = *e.last()?;
        if !(v >= e[0] && v <= last) {
            return None;
        }
        if v == last {
            return Some(self.bins() - 1);
        }
        Some(e.partition_point(|&edge| edge <= v) - 1)
    }
}

/// Counts per bin plus values falling outside the edges.
pub fn histogram_1d(values: &[f64], edges: &Edges) -> (Vec<u64>, u64) {
    let mut counts = vec![0u64; edges.bins()];
    let mut outside = 0;
    for &v in values {
        match edges.locate(v) {
            Some(i) => counts[i] += 1,
            None => outside += 1,
        }
    }
    (counts, outside)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointHistogram {
    pub x_edges: Edges,
    pub y_edges: Edges,
    /// Row-major, `counts[ix * ny + iy]`.
    pub counts: Vec<u64>,
    pub outside: u64,
}

impl JointHistogram {
    pub fn new(x_edges: Edges, y_edges: Edges) -> Self {
        let n = x_edges.bins() * y_edges.bins();
        Self {
            x_edges,
            y_edges,
            counts: vec![0; n],
            outside: 0,
        }
    }

    pub fn push(&mut self, x: f64, y: f64) {
        match (self.x_edges.locate(x), self.y_edges.locate(y)) {
            (Some(i), Some(j)) => self.counts[i * self.y_edges.bins() + j] += 1,
            _ => self.outside += 1,
        }
    }

    pub fn get(&self, ix: usize, iy: usize) -> u64 {
        self.counts[ix * self.y_edges.bins() + iy]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn marginal_x(&self) -> Vec<u64> {
        let ny = self.y_edges.bins();
        self.counts.chunks(ny).map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<u64> {
        let ny = self.y_edges.bins();
        let mut out = vec![0; ny];
        for row in self.counts.chunks(ny) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }

    /// Probability density normalized over the in-range counts.
    pub fn density(&self) -> Vec<f64> {
        let total = self.total() as f64;
        let wx = self.x_edges.widths();
        let wy = self.y_edges.widths();
        let ny = wy.len();
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if total == 0.0 {
                    0.0
                } else {
                    c as f64 / (total * wx[k / ny] * wy[k % ny])
                }
            })
            .collect()
    }

    pub fn merge(&mut self, other: &JointHistogram) -> Result<(), StatsError> {
        if self.x_edges != other.x_edges || self.y_edges != other.y_edges {
            return Err(StatsError::Domain("histogram edges differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.outside += other.outside;
        Ok(())
    }
}

pub fn joint_histogram(
    xs: &[f64],
    ys: &[f64],
    x_edges: Edges,
    y_edges: Edges,
) -> Result<JointHistogram, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    let mut h = JointHistogram::new(x_edges, y_edges);
    for (&x, &y) in xs.iter().zip(ys) {
        h.push(x, y);
    }
    Ok(h)
}

/// Normalized chi-square excess `(chi2 - dof) / sqrt(2 dof)` against equal
/// expected counts; values below about 3 are consistent with flatness.
pub fn chi2_flatness(counts: &[u64]) -> Result<f64, StatsError> {
    if counts.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: counts.len(),
        });
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(StatsError::ZeroMean);
    }
    let expected = total as f64 / counts.len() as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = (counts.len() - 1) as f64;
    Ok((chi2 - dof) / (2.0 * dof).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn edges_validate_ordering() {
        assert_eq!(Edges::new(vec![0.0, 1.0, 1.0]), Err(StatsError::EdgeOrdering));
        assert_eq!(Edges::new(vec![0.0]), Err(StatsError::EdgeOrdering));
        assert_eq!(Edges::new(vec![0.0, f64::NAN]), Err(StatsError::EdgeOrdering));
        assert!(Edges::uniform(1.0, 0.0, 4).is_err());
        assert!(Edges::intensity_default(0.0).is_err());
        assert_eq!(Edges::imbalance_default().bins(), 64);
    }

    #[test]
    fn locate_handles_boundaries() {
        let e = Edges::uniform(-1.0, 1.0, 4).unwrap();
        assert_eq!(e.locate(-1.0), Some(0));
        assert_eq!(e.locate(-0.5), Some(1));
        assert_eq!(e.locate(1.0), Some(3));
        assert_eq!(e.locate(1.0 + 1e-15), None);
        assert_eq!(e.locate(f64::NAN), None);
        let (c, out) = histogram_1d(&[-1.0, 0.0, 1.0, 2.0], &e);
        assert_eq!(c, vec![1, 0, 1, 1]);
        assert_eq!(out, 1);
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..5000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = (0..5000).map(|_| rng.random_range(0.0..10.0)).collect();
        let h = joint_histogram(
            &xs,
            &ys,
            Edges::uniform(-1.0, 1.0, 8).unwrap(),
            Edges::new(vec![0.0, 1.0, 5.0, 10.0]).unwrap(),
        )
        .unwrap();
        let wx = h.x_edges.widths();
        let wy = h.y_edges.widths();
        let integral: f64 = h
            .density()
            .iter()
            .enumerate()
            .map(|(k, d)| d * wx[k / 3] * wy[k % 3])
            .sum();
        assert!((integral - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi2_detects_nonflat() {
        assert!(chi2_flatness(&[1000; 20]).unwrap() < -3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = Edges::imbalance_default();
        let xs: Vec<f64> = (0..200_000).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let (c, _) = histogram_1d(&xs, &e);
        assert!(chi2_flatness(&c).unwrap().abs() < 3.0);
        let skewed: Vec<f64> = xs.iter().map(|x| x * x.abs()).collect();
        let (c, _) = histogram_1d(&skewed, &e);
        assert!(chi2_flatness(&c).unwrap() > 3.0);
        assert!(chi2_flatness(&[0, 0]).is_err());
    }

    proptest! {
        #[test]
        fn marginals_equal_one_dimensional_histograms(
            pts in proptest::collection::vec((-1.2f64..1.2, -0.5f64..3.5), 0..300)
        ) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let ex = Edges::uniform(-1.0, 1.0, 7).unwrap();
            let ey = Edges::uniform(0.0, 3.0, 5).unwrap();
            let h = joint_histogram(&xs, &ys, ex.clone(), ey.clone()).unwrap();
            // Restrict 1D histograms to points inside both ranges.
            let inside: Vec<(f64, f64)> = xs.iter().zip(&ys)
                .filter(|(x, y)| ex.locate(**x).is_some() && ey.locate(**y).is_some())
                .map(|(x, y)| (*x, *y))
                .collect();
            let (ix, iy): (Vec<f64>, Vec<f64>) = inside.into_iter().unzip();
            prop_assert_eq!(h.marginal_x(), histogram_1d(&ix, &ex).0);
            prop_assert_eq!(h.marginal_y(), histogram_1d(&iy, &ey).0);
            prop_assert_eq!(h.total() + h.outside, xs.len() as u64);
        }
    }
}
