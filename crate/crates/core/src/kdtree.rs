//! Static 3D kd-tree for exact nearest-neighbor queries.

use crate::geom::Pt3;

enum Node {
    Leaf {
        start: usize,
        count: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

pub struct KdTree3 {
    points: Vec<Pt3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 12;

impl KdTree3 {
    pub fn build(points: &[Pt3]) -> Self {
        assert!(!points.is_empty(), "kd-tree needs at least one point");
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        build_recursive(points, &mut order, 0, points.len(), &mut nodes);
        KdTree3 {
            points: points.to_vec(),
            order,
            nodes,
        }
    }

    /// Index and Euclidean distance of the nearest stored point.
    pub fn nearest(&self, query: &Pt3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        (best.0, best.1.sqrt())
    }

    fn search(&self, node: usize, query: &Pt3, best: &mut (usize, f64)) {
        match &self.nodes[node] {
            Node::Leaf { start, count } => {
                for &ix in &self.order[*start..*start + *count] {
                    let d2 = (self.points[ix as usize] - query).norm_squared();
                    if d2 < best.1 {
                        *best = (ix as usize, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[*axis] - value;
                let (near, far) = if delta <= 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(near, query, best);
                if delta * delta < best.1 {
                    self.search(far, query, best);
                }
            }
        }
    }
}

fn build_recursive(
    points: &[Pt3],
    order: &mut [u32],
    start: usize,
    count: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let index = nodes.len();
    if count <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, count });
        return index;
    }
    // Split on the widest axis at the median.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &ix in &order[start..start + count] {
        let p = &points[ix as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap())
        .unwrap();
    if hi[axis] - lo[axis] <= 0.0 {
        nodes.push(Node::Leaf { start, count });
        return index;
    }
    let mid = count / 2;
    order[start..start + count].select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let split_value = points[order[start + mid] as usize][axis];
    nodes.push(Node::Split {
        axis,
        value: split_value,
        left: 0,
        right: 0,
    });
    let left = build_recursive(points, order, start, mid, nodes);
    let right = build_recursive(points, order, start + mid, count - mid, nodes);
    if let Node::Split {
        left: l, right: r, ..
    } = &mut nodes[index]
    {
        *l = left;
        *r = right;
    }
    index
}
