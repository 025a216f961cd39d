//! Static KD-tree over points in `R^k` with axis-bounded range queries.
//!
//! Used as the per-action spatial index behind [`crate::incorrect_set::HypersphereSet`].
//! Points are stored in a flat array in implicit-tree order (median splits).

#[derive(Clone, Debug, Default)]
pub struct KdTree {
    dim: usize,
    /// Point coordinates in tree order, `dim` values per point.
    coords: Vec<f64>,
    /// Caller-supplied payload for each point, in tree order.
    ids: Vec<u32>,
}

impl KdTree {
    pub fn build(dim: usize, points: Vec<(Vec<f64>, u32)>) -> Self {
        let mut items = points;
        let mut tree = KdTree {
            dim,
            coords: Vec::with_capacity(items.len() * dim),
            ids: Vec::with_capacity(items.len()),
        };
        let mut ordered = Vec::with_capacity(items.len());
        Self::arrange(&mut items, 0, dim, &mut ordered);
        for (p, id) in ordered {
            debug_assert_eq!(p.len(), dim);
            tree.coords.extend_from_slice(&p);
            tree.ids.push(id);
        }
        tree
    }

    // Pre-order layout: median at the front of each subrange.
    fn arrange(
        items: &mut [(Vec<f64>, u32)],
        depth: usize,
        dim: usize,
        out: &mut Vec<(Vec<f64>, u32)>,
    ) {
        if items.is_empty() {
            return;
        }
        let axis = depth % dim.max(1);
        let mid = items.len() / 2;
        items.select_nth_unstable_by(mid, |a, b| {
            a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1))
        });
        out.push(items[mid].clone());
        let (left, rest) = items.split_at_mut(mid);
        Self::arrange(left, depth + 1, dim, out);
        Self::arrange(&mut rest[1..], depth + 1, dim, out);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Visits every point whose coordinates are all within `reach` of `query`
    /// along each axis. Stops early when `visit` returns `true`; the return
    /// value reports whether it did.
    pub fn any_within_box<F>(&self, query: &[f64], reach: f64, mut visit: F) -> bool
    where
        F: FnMut(&[f64], u32) -> bool,
    {
        self.walk(0, self.len(), 0, query, reach, &mut visit)
    }

    fn walk<F>(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        query: &[f64],
        reach: f64,
        visit: &mut F,
    ) -> bool
    where
        F: FnMut(&[f64], u32) -> bool,
    {
        if lo >= hi {
            return false;
        }
        let axis = depth % self.dim.max(1);
        let n = hi - lo;
        let mid = n / 2;
        let p = self.point(lo);
        if p.iter().zip(query).all(|(a, b)| (a - b).abs() <= reach) && visit(p, self.ids[lo]) {
            return true;
        }
        let split = p[axis];
        let left = (lo + 1, lo + 1 + mid);
        let right = (lo + 1 + mid, hi);
        if query[axis] - reach <= split && self.walk(left.0, left.1, depth + 1, query, reach, visit)
        {
            return true;
        }
        if query[axis] + reach >= split
            && self.walk(right.0, right.1, depth + 1, query, reach, visit)
        {
            return true;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_query_finds_exactly_the_points_in_range() {
        let pts: Vec<_> = (0..50)
            .map(|i| (vec![(i % 7) as f64, (i / 7) as f64], i as u32))
            .collect();
        let tree = KdTree::build(2, pts.clone());
        let q = [3.0, 2.0];
        let mut found = Vec::new();
        tree.any_within_box(&q, 1.0, |_, id| {
            found.push(id);
            false
        });
        found.sort();
        let mut expected: Vec<u32> = pts
            .iter()
            .filter(|(p, _)| (p[0] - q[0]).abs() <= 1.0 && (p[1] - q[1]).abs() <= 1.0)
            .map(|(_, id)| *id)
            .collect();
        expected.sort();
        assert_eq!(found, expected);
    }
}
