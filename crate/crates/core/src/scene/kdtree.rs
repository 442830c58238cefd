//! Static 3-d tree for k-nearest-neighbor queries over a point cloud.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

const LEAF_SIZE: usize = 8;

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

#[derive(Debug)]
pub struct KdTree<'a> {
    points: &'a [Vector3<f64>],
    order: Vec<usize>,
    root: Node,
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    dist_sq: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq.total_cmp(&other.dist_sq).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Squared Euclidean distance, summed in a fixed x, y, z order.
#[inline]
pub fn dist_sq(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vector3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = Self::build_node(points, &mut order, 0, points.len());
        Self { points, order, root }
    }

    fn build_node(points: &[Vector3<f64>], order: &mut [usize], start: usize, end: usize) -> Node {
        if end - start <= LEAF_SIZE {
            return Node::Leaf { start, end };
        }
        let slice = &mut order[start..end];
        let (mut lo, mut hi) = (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY));
        for &i in slice.iter() {
            lo = lo.inf(&points[i]);
            hi = hi.sup(&points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = points[slice[mid]][axis];
        let split = start + mid;
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build_node(points, order, start, split)),
            right: Box::new(Self::build_node(points, order, split, end)),
        }
    }

    /// Squared distances to the `k` nearest points other than `exclude`,
    /// sorted ascending.
    pub fn nearest_dist_sq(&self, query: &Vector3<f64>, k: usize, exclude: Option<usize>) -> Vec<f64> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(&self.root, query, k, exclude, &mut heap);
        }
        let mut out: Vec<f64> = heap.into_iter().map(|c| c.dist_sq).collect();
        out.sort_by(f64::total_cmp);
        out
    }

    fn search(&self, node: &Node, q: &Vector3<f64>, k: usize, exclude: Option<usize>, heap: &mut BinaryHeap<Candidate>) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = Candidate { dist_sq: dist_sq(q, &self.points[i]), index: i };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap holds k items") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, exclude, heap);
                let worst = heap.peek().map_or(f64::INFINITY, |c| c.dist_sq);
                if heap.len() < k || diff * diff <= worst {
                    self.search(far, q, k, exclude, heap);
                }
            }
        }
    }
}
