//! Exact Euclidean k-nearest-neighbour search over the rows of a
//! [`StateSeries`].
//!
//! Both backends use the same distance routine and the same ordering
//! (distance, then index), so their answers are identical bit for bit.

use std::cmp::Ordering;

use crate::series::StateSeries;
use crate::{Error, Result};

/// Above this dimension the tree is no better than a linear scan.
pub const KD_TREE_MAX_DIM: usize = 16;

const LEAF_SIZE: usize = 8;

/// Squared Euclidean distance by pairwise (cascade) summation.
///
/// Splitting at the midpoint means a vector made of two identical halves
/// has exactly twice the squared distance of one half, so neighbour order
/// in a duplicated joint space matches the single space exactly.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    match a.len() {
        0 => 0.0,
        1 => {
            let d = a[0] - b[0];
            d * d
        }
        n => {
            let h = n / 2;
            squared_distance(&a[..h], &b[..h]) + squared_distance(&a[h..], &b[h..])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    KdTree,
    BruteForce,
}

/// The k nearest admissible states to a query, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub query_index: Option<usize>,
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Candidate {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

/// Bounded sorted buffer of the best `k` candidates seen so far.
struct Best {
    k: usize,
    items: Vec<Candidate>,
}

impl Best {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn is_full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst_d2(&self) -> f64 {
        self.items.last().map_or(f64::INFINITY, |c| c.d2)
    }

    fn offer(&mut self, c: Candidate) {
        if self.is_full() && c.cmp_key(self.items.last().unwrap()) != Ordering::Less {
            return;
        }
        let pos = self
            .items
            .partition_point(|x| x.cmp_key(&c) == Ordering::Less);
        self.items.insert(pos, c);
        self.items.truncate(self.k);
    }

    fn into_set(self, query_index: Option<usize>) -> NeighborSet {
        NeighborSet {
            query_index,
            indices: self.items.iter().map(|c| c.index).collect(),
            distances: self.items.iter().map(|c| c.d2.sqrt()).collect(),
        }
    }
}

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug)]
struct KdTree {
    nodes: Vec<Node>,
    perm: Vec<usize>,
}

impl KdTree {
    fn build(points: &[f64], dim: usize, n: usize) -> Self {
        let mut tree = KdTree {
            nodes: Vec::new(),
            perm: (0..n).collect(),
        };
        tree.build_node(points, dim, 0, n);
        tree
    }

    fn build_node(&mut self, points: &[f64], dim: usize, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let coord = |i: usize, a: usize| points[i * dim + a];

        // Split on the axis of widest spread.
        let slice = &self.perm[start..end];
        let (mut axis, mut spread) = (0, -1.0);
        for a in 0..dim {
            let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(coord(i, a)), hi.max(coord(i, a)))
            });
            if hi - lo > spread {
                spread = hi - lo;
                axis = a;
            }
        }
        if spread <= 0.0 {
            // All points coincide.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }

        let mid = start + (end - start) / 2;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            coord(i, axis)
                .total_cmp(&coord(j, axis))
                .then(i.cmp(&j))
        });
        let value = coord(self.perm[mid], axis);

        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(points, dim, start, mid);
        let right = self.build_node(points, dim, mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn search(
        &self,
        node: usize,
        points: &[f64],
        dim: usize,
        query: &[f64],
        admissible: &dyn Fn(usize) -> bool,
        best: &mut Best,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    if admissible(i) {
                        let d2 = squared_distance(&points[i * dim..(i + 1) * dim], query);
                        best.offer(Candidate { d2, index: i });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, points, dim, query, admissible, best);
                // `<=` keeps equal-distance candidates with lower indices reachable.
                if !best.is_full() || diff * diff <= best.worst_d2() {
                    self.search(far, points, dim, query, admissible, best);
                }
            }
        }
    }
}

/// Exact nearest-neighbour index over a borrowed state matrix.
#[derive(Debug)]
pub struct NeighborIndex<'a> {
    points: &'a [f64],
    dim: usize,
    n: usize,
    tree: Option<KdTree>,
}

impl<'a> NeighborIndex<'a> {
    /// k-d tree for `dim <= 16`, linear scan otherwise.
    pub fn build(states: &'a StateSeries) -> Result<Self> {
        let backend = if states.dim() <= KD_TREE_MAX_DIM {
            Backend::KdTree
        } else {
            Backend::BruteForce
        };
        Self::with_backend(states, backend)
    }

    pub fn with_backend(states: &'a StateSeries, backend: Backend) -> Result<Self> {
        let n = states.len();
        if n < 2 {
            return Err(Error::TooShort(format!(
                "neighbour search needs at least 2 states, got {n}"
            )));
        }
        let tree = match backend {
            Backend::KdTree => Some(KdTree::build(states.states(), states.dim(), n)),
            Backend::BruteForce => None,
        };
        Ok(Self {
            points: states.states(),
            dim: states.dim(),
            n,
            tree,
        })
    }

    pub fn backend(&self) -> Backend {
        if self.tree.is_some() {
            Backend::KdTree
        } else {
            Backend::BruteForce
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Number of states a query at `query_index` may use when every `j` with
    /// `|j - query_index| <= window` is banned.
    pub fn admissible_count(&self, query_index: usize, window: usize) -> usize {
        let lo = query_index.saturating_sub(window);
        let hi = (query_index + window).min(self.n - 1);
        self.n - (hi - lo + 1)
    }

    /// The `k` nearest states to state `query_index`, excluding the query
    /// itself and every state within `window` samples of it.
    pub fn query_knn(&self, query_index: usize, k: usize, window: usize) -> Result<NeighborSet> {
        if query_index >= self.n {
            return Err(Error::InvalidParameter(format!(
                "query index {query_index} out of range for {} states",
                self.n
            )));
        }
        let available = self.admissible_count(query_index, window);
        if k == 0 || k > available {
            return Err(Error::NotEnoughNeighbors {
                requested: k,
                available,
            });
        }
        let admissible = |j: usize| j.abs_diff(query_index) > window;
        let best = self.run(self.point(query_index), k, &admissible);
        Ok(best.into_set(Some(query_index)))
    }

    /// The `k` nearest states to an arbitrary point; nothing is excluded.
    pub fn query_point(&self, point: &[f64], k: usize) -> Result<NeighborSet> {
        if point.len() != self.dim {
            return Err(Error::Misaligned(format!(
                "query has dimension {}, index has {}",
                point.len(),
                self.dim
            )));
        }
        if k == 0 || k > self.n {
            return Err(Error::NotEnoughNeighbors {
                requested: k,
                available: self.n,
            });
        }
        Ok(self.run(point, k, &|_| true).into_set(None))
    }

    fn run(&self, query: &[f64], k: usize, admissible: &dyn Fn(usize) -> bool) -> Best {
        let mut best = Best::new(k);
        match &self.tree {
            Some(tree) => tree.search(0, self.points, self.dim, query, admissible, &mut best),
            None => {
                for i in (0..self.n).filter(|&i| admissible(i)) {
                    let d2 = squared_distance(self.point(i), query);
                    best.offer(Candidate { d2, index: i });
                }
            }
        }
        best
    }
}
