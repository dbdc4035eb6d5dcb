use std::cmp::Ordering;

use rayon::prelude::*;

use super::SpatialDataset;
use crate::scalar::Real;

/// Above this many observations distances are computed on demand instead of
/// being stored.
pub const MATERIALIZE_LIMIT: usize = 20_000;

/// Euclidean distances between all observation pairs with a per-row
/// neighbour ordering (self first, then by distance, ties by index).
#[derive(Debug, Clone)]
pub struct DistanceMatrix<T> {
    n: usize,
    coords: Vec<[T; 2]>,
    dense: Option<Vec<T>>,
    neighbours: Option<Vec<u32>>,
    max_pair_distance: T,
    min_positive_distance: T,
    coincident: Vec<(usize, usize)>,
}

fn euclid<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

fn order_row<T: Real>(row: &[T], i: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..row.len() as u32).collect();
    idx.sort_by(|&a, &b| {
        let (a, b) = (a as usize, b as usize);
        // self always ranks first, even among coincident points
        (a != i)
            .cmp(&(b != i))
            .then(row[a].partial_cmp(&row[b]).unwrap_or(Ordering::Equal))
            .then(a.cmp(&b))
    });
    idx
}

impl<T: Real> DistanceMatrix<T> {
    pub fn new(ds: &SpatialDataset<T>) -> Self {
        Self::from_coords(ds.coords())
    }

    pub fn from_coords(coords: &[[T; 2]]) -> Self {
        let n = coords.len();
        let coords = coords.to_vec();
        let rows: Vec<(Vec<T>, T, T, Vec<(usize, usize)>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row: Vec<T> = (0..n).map(|j| euclid(coords[i], coords[j])).collect();
                let mut max = T::zero();
                let mut min_pos = T::infinity();
                let mut coincident = Vec::new();
                for (j, &d) in row.iter().enumerate() {
                    if d > max {
                        max = d;
                    }
                    if j != i && d > T::zero() && d < min_pos {
                        min_pos = d;
                    }
                    if j > i && d == T::zero() {
                        coincident.push((i, j));
                    }
                }
                (row, max, min_pos, coincident)
            })
            .collect();

        let mut max_pair_distance = T::zero();
        let mut min_positive_distance = T::infinity();
        let mut coincident = Vec::new();
        for (_, max, min_pos, c) in &rows {
            if *max > max_pair_distance {
                max_pair_distance = *max;
            }
            if *min_pos < min_positive_distance {
                min_positive_distance = *min_pos;
            }
            coincident.extend_from_slice(c);
        }
        if !coincident.is_empty() {
            log::warn!(
                "{} coincident location pair(s) in dataset",
                coincident.len()
            );
        }

        let (dense, neighbours) = if n <= MATERIALIZE_LIMIT {
            let neighbours: Vec<u32> = rows
                .par_iter()
                .enumerate()
                .flat_map_iter(|(i, (row, ..))| order_row(row, i))
                .collect();
            let dense: Vec<T> = rows.into_iter().flat_map(|(row, ..)| row).collect();
            (Some(dense), Some(neighbours))
        } else {
            (None, None)
        };

        Self {
            n,
            coords,
            dense,
            neighbours,
            max_pair_distance,
            min_positive_distance,
            coincident,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[[T; 2]] {
        &self.coords
    }

    pub fn is_materialized(&self) -> bool {
        self.dense.is_some()
    }

    pub fn max_pair_distance(&self) -> T {
        self.max_pair_distance
    }

    /// Smallest nonzero pairwise distance (infinite when every point coincides).
    pub fn min_positive_distance(&self) -> T {
        self.min_positive_distance
    }

    /// Pairs `(i, j)`, `i < j`, sharing a location.
    pub fn coincident_pairs(&self) -> &[(usize, usize)] {
        &self.coincident
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        match &self.dense {
            Some(d) => d[i * self.n + j],
            None => euclid(self.coords[i], self.coords[j]),
        }
    }

    /// Distances from observation `i` to every observation.
    pub fn row(&self, i: usize) -> std::borrow::Cow<'_, [T]> {
        match &self.dense {
            Some(d) => std::borrow::Cow::Borrowed(&d[i * self.n..(i + 1) * self.n]),
            None => std::borrow::Cow::Owned(
                (0..self.n)
                    .map(|j| euclid(self.coords[i], self.coords[j]))
                    .collect(),
            ),
        }
    }

    /// Observation indices ordered by distance from `i`; `i` itself is first.
    pub fn neighbours(&self, i: usize) -> std::borrow::Cow<'_, [u32]> {
        match &self.neighbours {
            Some(nb) => std::borrow::Cow::Borrowed(&nb[i * self.n..(i + 1) * self.n]),
            None => std::borrow::Cow::Owned(order_row(&self.row(i), i)),
        }
    }

    /// Distance from `i` to its `rank`-th nearest observation, counting `i`
    /// itself as rank 1.
    pub fn kth_neighbour_distance(&self, i: usize, rank: usize) -> T {
        assert!(
            rank >= 1 && rank <= self.n,
            "rank {rank} outside 1..={}",
            self.n
        );
        match &self.neighbours {
            Some(nb) => self.get(i, nb[i * self.n + rank - 1] as usize),
            None => {
                let mut row = self.row(i).into_owned();
                let (_, kth, _) = row.select_nth_unstable_by(rank - 1, |a, b| {
                    a.partial_cmp(b).unwrap_or(Ordering::Equal)
                });
                *kth
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_four_five() {
        let dm = DistanceMatrix::from_coords(&[[0.0f64, 0.0], [3.0, 4.0]]);
        assert_eq!(dm.get(0, 1), 5.0);
        assert_eq!(dm.get(1, 0), 5.0);
        assert_eq!(dm.max_pair_distance(), 5.0);
        assert_eq!(dm.kth_neighbour_distance(0, 1), 0.0);
        assert_eq!(dm.kth_neighbour_distance(0, 2), 5.0);
    }

    #[test]
    fn coincident_points_are_flagged() {
        let pts = [
            [0.0f64, 0.0],
            [1.0, 1.0],
            [0.0, 0.0],
            [2.0, 0.0],
            [1.0, 1.0],
        ];
        let dm = DistanceMatrix::from_coords(&pts);
        // brute-force scan
        let mut expected = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if pts[i] == pts[j] {
                    expected.push((i, j));
                }
            }
        }
        assert_eq!(dm.coincident_pairs(), expected.as_slice());
        // self ranks first even when another point shares its location
        assert_eq!(dm.neighbours(2)[0], 2);
        assert_eq!(dm.neighbours(2)[1], 0);
    }

    #[test]
    fn line_neighbours() {
        let pts: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, 0.0]).collect();
        let dm = DistanceMatrix::from_coords(&pts);
        assert_eq!(dm.kth_neighbour_distance(0, 3), 2.0);
        assert_eq!(dm.kth_neighbour_distance(2, 3), 1.0);
        assert_eq!(dm.min_positive_distance(), 1.0);
    }

    fn coords_strategy() -> impl Strategy<Value = Vec<[f64; 2]>> {
        proptest::collection::vec(
            (-1e3f64..1e3, -1e3f64..1e3).prop_map(|(a, b)| [a, b]),
            3..25,
        )
    }

    proptest! {
        #[test]
        fn metric_properties(coords in coords_strategy()) {
            let dm = DistanceMatrix::from_coords(&coords);
            let n = coords.len();
            let mut max = 0.0f64;
            for i in 0..n {
                prop_assert_eq!(dm.get(i, i), 0.0);
                for j in 0..n {
                    prop_assert_eq!(dm.get(i, j), dm.get(j, i));
                    max = max.max(dm.get(i, j));
                    for k in 0..n.min(6) {
                        prop_assert!(dm.get(i, j) <= dm.get(i, k) + dm.get(k, j) + 1e-9);
                    }
                }
            }
            prop_assert_eq!(dm.max_pair_distance(), max);
        }

        #[test]
        fn permutation_equivariant(coords in coords_strategy(), seed in any::<u64>()) {
            let n = coords.len();
            let mut order: Vec<usize> = (0..n).collect();
            // cheap deterministic shuffle
            let mut s = seed | 1;
            for i in (1..n).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                order.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let permuted: Vec<[f64; 2]> = order.iter().map(|&i| coords[i]).collect();
            let a = DistanceMatrix::from_coords(&coords);
            let b = DistanceMatrix::from_coords(&permuted);
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(b.get(i, j), a.get(order[i], order[j]));
                }
            }
        }

        #[test]
        fn lazy_matches_dense(coords in coords_strategy(), rank in 1usize..3) {
            let dm = DistanceMatrix::from_coords(&coords);
            let lazy = DistanceMatrix { dense: None, neighbours: None, ..dm.clone() };
            for i in 0..coords.len() {
                let (a, b) = (dm.row(i), lazy.row(i));
                prop_assert_eq!(a.as_ref(), b.as_ref());
                prop_assert_eq!(dm.kth_neighbour_distance(i, rank), lazy.kth_neighbour_distance(i, rank));
            }
        }
    }
}
